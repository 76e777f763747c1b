//! C interface to `sep_eda`.
//!
//! Objects cross the boundary as opaque handles created and destroyed by this
//! library. Every fallible call returns a [`SepStatus`]; on failure a
//! message is available from [`sep_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use sep_eda::data::{load_csv, normalize};
use sep_eda::spectral::{sep_spectral_cluster, standard_spectral_cluster_traced, PipelineParams};
use sep_eda::tsne::{exact_tsne, sep_tsne, TsneParams};
use sep_eda::{DataMatrix, Error, Normalization};

/// Status codes; the non-zero values match the command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SepStatus {
    Ok = 0,
    /// Invalid argument or parameter.
    Usage = 1,
    /// Unreadable or malformed input data.
    Data = 2,
    /// Numerical failure, including too few equilibrium points.
    Numerical = 3,
    /// A required pointer was null.
    NullPointer = 4,
    /// Internal panic caught at the boundary.
    Internal = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SepMethod {
    /// Equilibrium-point pipeline.
    Sep = 0,
    /// Full-data baseline.
    Standard = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SepNormalization {
    MinMax = 0,
    ZScore = 1,
    None = 2,
}

/// Pipeline tunables. Obtain defaults from [`sep_params_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SepParams {
    pub k_nn: usize,
    pub agg_threshold: f64,
    /// Kernel width; `<= 0` selects it from the data.
    pub kernel_q: f64,
    pub svc_c: f64,
    pub grad_tol: f64,
    pub max_descent_iters: usize,
    pub sep_knn: usize,
    pub kmeans_restarts: usize,
    pub seed: u64,
    /// t-SNE settings (ignored by clustering).
    pub perplexity: f64,
    pub tsne_iters: usize,
    pub learning_rate: f64,
}

/// Opaque dataset handle.
pub struct SepDataset {
    data: DataMatrix,
}

/// Opaque result handle: cluster labels or a 2-D embedding.
pub struct SepResult {
    labels: Vec<usize>,
    coords: Vec<f64>,
    m: usize,
    s: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn status_of(err: &Error) -> SepStatus {
    if err.is_usage() {
        SepStatus::Usage
    } else if err.is_numerical() {
        SepStatus::Numerical
    } else {
        SepStatus::Data
    }
}

/// Run `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (SepStatus, String)>) -> SepStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SepStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            SepStatus::Internal
        }
    }
}

fn lib_err(e: Error) -> (SepStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (SepStatus, String) {
    (SepStatus::NullPointer, format!("{what} is null"))
}

impl SepParams {
    fn pipeline(&self) -> PipelineParams {
        PipelineParams {
            k_nn: self.k_nn,
            agg_threshold: self.agg_threshold,
            kernel_q: (self.kernel_q > 0.0).then_some(self.kernel_q),
            svc_c: self.svc_c,
            grad_tol: self.grad_tol,
            max_descent_iters: self.max_descent_iters,
            sep_knn: self.sep_knn,
            kmeans_restarts: self.kmeans_restarts,
            seed: self.seed,
            ..PipelineParams::default()
        }
    }

    fn tsne(&self) -> TsneParams {
        TsneParams {
            perplexity: self.perplexity,
            iters: self.tsne_iters,
            learning_rate: self.learning_rate,
            seed: self.seed,
            ..TsneParams::default()
        }
    }
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn sep_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

#[no_mangle]
pub extern "C" fn sep_params_default() -> SepParams {
    let p = PipelineParams::default();
    let t = TsneParams::default();
    SepParams {
        k_nn: p.k_nn,
        agg_threshold: p.agg_threshold,
        kernel_q: 0.0,
        svc_c: p.svc_c,
        grad_tol: p.grad_tol,
        max_descent_iters: p.max_descent_iters,
        sep_knn: p.sep_knn,
        kmeans_restarts: p.kmeans_restarts,
        seed: p.seed,
        perplexity: t.perplexity,
        tsne_iters: t.iters,
        learning_rate: t.learning_rate,
    }
}

/// Copy a row-major `n x d` buffer into a new dataset. `labels` may be null;
/// otherwise it holds `n` class indices.
///
/// # Safety
/// `values` must point to `n * d` doubles and `labels`, when non-null, to `n`
/// `size_t` values. `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sep_dataset_from_buffer(
    values: *const f64,
    n: usize,
    d: usize,
    labels: *const usize,
    out: *mut *mut SepDataset,
) -> SepStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if values.is_null() {
            return Err(null("values"));
        }
        let len = n.checked_mul(d).ok_or((SepStatus::Usage, "n * d overflows".to_string()))?;
        let vals = std::slice::from_raw_parts(values, len).to_vec();
        let labels = (!labels.is_null()).then(|| std::slice::from_raw_parts(labels, n).to_vec());
        let data = DataMatrix::new(n, d, vals, labels, "buffer").map_err(lib_err)?;
        *out = Box::into_raw(Box::new(SepDataset { data }));
        Ok(())
    })
}

/// Load a CSV file (optionally with a trailing label column) and normalize it.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sep_dataset_load_csv(
    path: *const c_char,
    has_label_column: bool,
    skip_header: bool,
    normalization: SepNormalization,
    out: *mut *mut SepDataset,
) -> SepStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if path.is_null() {
            return Err(null("path"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| (SepStatus::Usage, "path is not UTF-8".to_string()))?;
        let raw = load_csv(Path::new(path), has_label_column, skip_header).map_err(lib_err)?;
        let mode = match normalization {
            SepNormalization::MinMax => Normalization::MinMax,
            SepNormalization::ZScore => Normalization::ZScore,
            SepNormalization::None => Normalization::None,
        };
        *out = Box::into_raw(Box::new(SepDataset { data: normalize(&raw, mode) }));
        Ok(())
    })
}

/// # Safety
/// `dataset` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sep_dataset_free(dataset: *mut SepDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Sample count, or 0 for a null handle.
///
/// # Safety
/// `dataset` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sep_dataset_n(dataset: *const SepDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.data.n)
}

/// Feature count, or 0 for a null handle.
///
/// # Safety
/// `dataset` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sep_dataset_d(dataset: *const SepDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.data.d)
}

/// Partition the dataset into `k` clusters. `params` may be null for defaults.
///
/// # Safety
/// `dataset` must be a live handle, `params` null or valid, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn sep_cluster(
    dataset: *const SepDataset,
    k: usize,
    method: SepMethod,
    params: *const SepParams,
    out: *mut *mut SepResult,
) -> SepStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let ds = dataset.as_ref().ok_or_else(|| null("dataset"))?;
        let p = params.as_ref().copied().unwrap_or_else(|| sep_params_default()).pipeline();
        let (labels, trace) = match method {
            SepMethod::Sep => sep_spectral_cluster(&ds.data, k, &p),
            SepMethod::Standard => standard_spectral_cluster_traced(&ds.data, k, &p.spectral()),
        }
        .map_err(lib_err)?;
        *out = Box::into_raw(Box::new(SepResult {
            labels: labels.labels,
            coords: Vec::new(),
            m: trace.m,
            s: trace.s,
        }));
        Ok(())
    })
}

/// 2-D t-SNE embedding: of the equilibrium points for [`SepMethod::Sep`]
/// (with per-sample labels giving each sample's point) or of every sample
/// for [`SepMethod::Standard`].
///
/// # Safety
/// As for [`sep_cluster`].
#[no_mangle]
pub unsafe extern "C" fn sep_tsne_embed(
    dataset: *const SepDataset,
    method: SepMethod,
    params: *const SepParams,
    out: *mut *mut SepResult,
) -> SepStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let ds = dataset.as_ref().ok_or_else(|| null("dataset"))?;
        let p = params.as_ref().copied().unwrap_or_else(|| sep_params_default());
        let result = match method {
            SepMethod::Sep => {
                let r = sep_tsne(&ds.data, None, &p.pipeline(), &p.tsne()).map_err(lib_err)?;
                SepResult {
                    labels: r.reps.fine_assignment(),
                    coords: r.embedding.coords,
                    m: r.trace.m,
                    s: r.trace.s,
                }
            }
            SepMethod::Standard => {
                let (emb, trace) = exact_tsne(&ds.data, &p.tsne()).map_err(lib_err)?;
                SepResult {
                    labels: (0..ds.data.n).collect(),
                    coords: emb.coords,
                    m: trace.m,
                    s: trace.s,
                }
            }
        };
        *out = Box::into_raw(Box::new(result));
        Ok(())
    })
}

/// # Safety
/// `result` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sep_result_free(result: *mut SepResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Per-sample labels; `*len` receives the count. The pointer stays valid
/// until the result is freed.
///
/// # Safety
/// `result` must be a live handle and `len` valid.
#[no_mangle]
pub unsafe extern "C" fn sep_result_labels(result: *const SepResult, len: *mut usize) -> *const usize {
    match (result.as_ref(), len.as_mut()) {
        (Some(r), Some(len)) => {
            *len = r.labels.len();
            r.labels.as_ptr()
        }
        _ => ptr::null(),
    }
}

/// Row-major `points x 2` embedding coordinates (empty for clustering
/// results); `*points` receives the row count.
///
/// # Safety
/// `result` must be a live handle and `points` valid.
#[no_mangle]
pub unsafe extern "C" fn sep_result_coords(result: *const SepResult, points: *mut usize) -> *const f64 {
    match (result.as_ref(), points.as_mut()) {
        (Some(r), Some(points)) => {
            *points = r.coords.len() / 2;
            r.coords.as_ptr()
        }
        _ => ptr::null(),
    }
}

/// Compressed-node and equilibrium-point counts of the run.
///
/// # Safety
/// `result` must be a live handle; `m` and `s` may be null.
#[no_mangle]
pub unsafe extern "C" fn sep_result_sizes(result: *const SepResult, m: *mut usize, s: *mut usize) -> SepStatus {
    guard(|| {
        let r = result.as_ref().ok_or_else(|| null("result"))?;
        if let Some(m) = m.as_mut() {
            *m = r.m;
        }
        if let Some(s) = s.as_mut() {
            *s = r.s;
        }
        Ok(())
    })
}

/// Clustering accuracy under the best one-to-one label matching.
///
/// # Safety
/// `pred` and `truth` must each point to `n` values; `acc` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sep_accuracy(pred: *const usize, truth: *const usize, n: usize, acc: *mut f64) -> SepStatus {
    guard(|| {
        if pred.is_null() || truth.is_null() || acc.is_null() {
            return Err(null("pred, truth or acc"));
        }
        let pred = std::slice::from_raw_parts(pred, n);
        let truth = std::slice::from_raw_parts(truth, n);
        *acc = sep_eda::accuracy(pred, truth).map_err(lib_err)?.acc;
        Ok(())
    })
}

//! Spectral clustering: the full-data baseline and the SEP pipeline.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::coarsen::{aggregate, aggregate_to_ratio, compress, smooth_test_vectors, AggregationMap, CompressedDataset};
use crate::data::DataMatrix;
use crate::eigen::{jacobi_eigen, lanczos_smallest, LanczosOptions, SymmetricOperator};
use crate::error::{Error, Result};
use crate::graph::{build_knn_graph, laplacian, LaplacianView, NeighborGraph, Weighting};
use crate::kmeans::{kmeans, kmeans_weighted, ClusterAssignment};
use crate::sep::{diameter, find_seps, DescentOptions, SepSet};
use crate::svc::{default_kernel_q, fit_sphere, SphereModel};

/// Largest graph decomposed densely; bigger graphs use Lanczos.
pub const DENSE_EIGEN_LIMIT: usize = 600;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LaplacianVariant {
    #[default]
    Unnormalized,
    SymNormalized,
}

impl std::str::FromStr for LaplacianVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unnormalized" => Ok(LaplacianVariant::Unnormalized),
            "sym-normalized" => Ok(LaplacianVariant::SymNormalized),
            other => Err(Error::InvalidParameter(format!(
                "unknown Laplacian variant {other:?} (expected unnormalized|sym-normalized)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpectralParams {
    pub k_nn: usize,
    pub weighting: Weighting,
    pub variant: LaplacianVariant,
    pub seed: u64,
    pub kmeans_restarts: usize,
    pub kmeans_max_iter: usize,
}

impl Default for SpectralParams {
    fn default() -> Self {
        SpectralParams {
            k_nn: 10,
            weighting: Weighting::Binary,
            variant: LaplacianVariant::Unnormalized,
            seed: 0,
            kmeans_restarts: 10,
            kmeans_max_iter: 300,
        }
    }
}

struct LaplacianOp<'a> {
    lap: &'a LaplacianView<'a>,
    inv_sqrt_deg: Option<Vec<f64>>,
    /// Orthonormal null-space basis projected out of every product.
    deflate: &'a [Vec<f64>],
}

impl LaplacianOp<'_> {
    fn project(&self, x: &mut [f64]) {
        for v in self.deflate {
            let c: f64 = v.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
            x.iter_mut().zip(v).for_each(|(xi, vi)| *xi -= c * vi);
        }
    }
}

impl SymmetricOperator for LaplacianOp<'_> {
    fn dim(&self) -> usize {
        self.lap.n()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let mut xp = x.to_vec();
        self.project(&mut xp);
        match &self.inv_sqrt_deg {
            None => self.lap.apply(&xp, out),
            Some(s) => {
                let scaled: Vec<f64> = xp.iter().zip(s).map(|(a, b)| a * b).collect();
                self.lap.apply(&scaled, out);
                out.iter_mut().zip(s).for_each(|(o, b)| *o *= b);
            }
        }
        self.project(out);
    }
}

/// Row-major `n x k` spectral embedding of a graph.
///
/// For a connected graph the constant (trivial) eigenvector is skipped and
/// the next `k` are used. When the graph splits into `c > 1` components the
/// component indicators span the null space and carry the partition, so the
/// embedding keeps `min(c, k)` of them and fills the rest with the lowest
/// nonzero eigenvectors.
pub fn spectral_embedding(graph: &NeighborGraph, k: usize, variant: LaplacianVariant) -> Result<Vec<f64>> {
    let n = graph.n;
    let lap = laplacian(graph);
    let (c, comp) = graph.components();

    let weight_of = |i: usize| -> f64 {
        match variant {
            LaplacianVariant::Unnormalized => 1.0,
            LaplacianVariant::SymNormalized => lap.degrees[i].sqrt(),
        }
    };
    let mut null_basis = vec![vec![0.0; n]; c];
    for i in 0..n {
        null_basis[comp[i]][i] = weight_of(i);
    }
    for v in &mut null_basis {
        let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nv > 0.0 {
            v.iter_mut().for_each(|x| *x /= nv);
        }
    }

    let (kept_null, nonzero) = if c == 1 { (0, k) } else { (c.min(k), k.saturating_sub(c)) };
    let nonzero = nonzero.min(n - c);

    let mut columns: Vec<Vec<f64>> = null_basis.iter().take(kept_null).cloned().collect();
    if nonzero > 0 {
        if n <= DENSE_EIGEN_LIMIT {
            let dense = match variant {
                LaplacianVariant::Unnormalized => lap.to_dense(),
                LaplacianVariant::SymNormalized => lap.to_dense_sym_normalized(),
            };
            let (_, vectors) = jacobi_eigen(&dense, n)?;
            columns.extend(vectors.into_iter().skip(c).take(nonzero));
        } else {
            let max_degree = lap.degrees.iter().copied().fold(0.0, f64::max);
            let (inv_sqrt_deg, bound) = match variant {
                LaplacianVariant::Unnormalized => (None, 2.0 * max_degree),
                LaplacianVariant::SymNormalized => (
                    Some(lap.degrees.iter().map(|d| if *d > 0.0 { 1.0 / d.sqrt() } else { 0.0 }).collect()),
                    2.0,
                ),
            };
            let op = LaplacianOp {
                lap: &lap,
                inv_sqrt_deg,
                deflate: &null_basis,
            };
            // The deflated null space shows up as `c` spurious zeros; ask for them too.
            let pairs = lanczos_smallest(&op, nonzero + c, bound, LanczosOptions::default())?;
            let mut found: Vec<(f64, Vec<f64>)> = pairs
                .values
                .into_iter()
                .zip(pairs.vectors)
                .filter(|(_, v)| {
                    // Drop vectors lying in the deflated subspace.
                    let mass: f64 = null_basis
                        .iter()
                        .map(|b| b.iter().zip(v).map(|(x, y)| x * y).sum::<f64>().powi(2))
                        .sum();
                    mass < 0.5
                })
                .collect();
            found.sort_by(|a, b| a.0.total_cmp(&b.0));
            columns.extend(found.into_iter().take(nonzero).map(|(_, v)| v));
        }
    }

    let k_cols = columns.len();
    let mut rows = vec![0.0; n * k_cols];
    for (j, col) in columns.iter().enumerate() {
        for i in 0..n {
            rows[i * k_cols + j] = col[i];
        }
    }
    if variant == LaplacianVariant::SymNormalized {
        for row in rows.chunks_exact_mut(k_cols.max(1)) {
            let nr = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if nr > 0.0 {
                row.iter_mut().for_each(|x| *x /= nr);
            }
        }
    }
    Ok(rows)
}

pub fn spectral_cluster_graph(graph: &NeighborGraph, k: usize, params: &SpectralParams) -> Result<ClusterAssignment> {
    if k < 1 || k > graph.n {
        return Err(Error::InvalidParameter(format!(
            "cluster count k={k} must satisfy 1 <= k <= n={}",
            graph.n
        )));
    }
    let embedding = spectral_embedding(graph, k, params.variant)?;
    let width = embedding.len() / graph.n;
    if width == 0 {
        return Err(Error::Numerical("empty spectral embedding".into()));
    }
    kmeans(
        &embedding,
        width,
        k,
        params.seed,
        params.kmeans_max_iter,
        params.kmeans_restarts,
    )
}

/// Standard spectral clustering over the full dataset.
///
/// `k_nn` is clamped to `n - 1` so tiny inputs still yield a graph.
pub fn spectral_cluster(data: &DataMatrix, k: usize, params: &SpectralParams) -> Result<ClusterAssignment> {
    if k < 2 {
        return Err(Error::InvalidParameter("spectral clustering needs k >= 2".into()));
    }
    if k > data.n {
        return Err(Error::InvalidParameter(format!(
            "cluster count k={k} exceeds sample count n={}",
            data.n
        )));
    }
    let graph = build_knn_graph(data, params.k_nn.min(data.n - 1), params.weighting)?;
    spectral_cluster_graph(&graph, k, params)
}

/// Every tunable of the SEP pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineParams {
    pub k_nn: usize,
    pub weighting: Weighting,
    pub variant: LaplacianVariant,
    pub test_vectors: usize,
    pub sweeps: usize,
    pub agg_threshold: f64,
    pub target_ratio: Option<f64>,
    pub kernel_q: Option<f64>,
    pub svc_c: f64,
    pub step0: Option<f64>,
    pub mass_scaled_step: bool,
    pub grad_tol: f64,
    pub max_descent_iters: usize,
    pub merge_tol_rel: f64,
    pub sep_knn: usize,
    pub sep_weighting: Weighting,
    pub sep_variant: LaplacianVariant,
    /// Let SEP membership counts scale SEP graph edges (by `sqrt(c_i c_j)`)
    /// and weight the k-means step, so large basins count as many samples.
    pub mass_aware: bool,
    pub seed: u64,
    pub kmeans_restarts: usize,
    pub kmeans_max_iter: usize,
}

impl Default for PipelineParams {
    fn default() -> Self {
        let sc = SpectralParams::default();
        PipelineParams {
            k_nn: sc.k_nn,
            weighting: sc.weighting,
            variant: sc.variant,
            test_vectors: 5,
            sweeps: 10,
            agg_threshold: 0.7,
            target_ratio: None,
            kernel_q: None,
            svc_c: 1.0,
            step0: None,
            mass_scaled_step: true,
            grad_tol: 1e-5,
            max_descent_iters: 500,
            merge_tol_rel: 1e-3,
            sep_knn: 10,
            sep_weighting: Weighting::Gaussian,
            sep_variant: LaplacianVariant::SymNormalized,
            mass_aware: true,
            seed: 0,
            kmeans_restarts: sc.kmeans_restarts,
            kmeans_max_iter: sc.kmeans_max_iter,
        }
    }
}

impl PipelineParams {
    pub fn spectral(&self) -> SpectralParams {
        SpectralParams {
            k_nn: self.k_nn,
            weighting: self.weighting,
            variant: self.variant,
            seed: self.seed,
            kmeans_restarts: self.kmeans_restarts,
            kmeans_max_iter: self.kmeans_max_iter,
        }
    }

    /// Settings for the graph over SEPs.
    pub fn sep_spectral(&self, s: usize) -> SpectralParams {
        SpectralParams {
            k_nn: self.sep_knn.min(s.saturating_sub(1)).max(1),
            weighting: self.sep_weighting,
            variant: self.sep_variant,
            ..self.spectral()
        }
    }
}

/// Kernel width from the local data scale: `q = 1 / mean squared
/// nearest-neighbor distance`, so a typical nearest neighbor has kernel
/// value `1/e`. Falls back to the median heuristic on `points` when every
/// point coincides with its neighbor.
pub fn local_kernel_q(graph: Option<&NeighborGraph>, points: &[f64], d: usize) -> f64 {
    match graph.and_then(NeighborGraph::mean_nearest_sq) {
        Some(mean) if mean > 0.0 => 1.0 / mean,
        _ => default_kernel_q(points, d),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineTrace {
    pub n: usize,
    pub m: usize,
    pub s: usize,
    pub kernel_q: f64,
    pub agg_threshold_used: f64,
    pub sphere_converged: bool,
    pub sphere_iterations: usize,
    pub seps_degraded: bool,
    /// Wall time per stage in milliseconds.
    pub stage_ms: BTreeMap<String, f64>,
}

impl PipelineTrace {
    pub fn total_ms(&self) -> f64 {
        self.stage_ms.values().sum()
    }
}

pub(crate) struct Stopwatch<'t> {
    trace: &'t mut PipelineTrace,
}

impl<'t> Stopwatch<'t> {
    pub(crate) fn new(trace: &'t mut PipelineTrace) -> Self {
        Stopwatch { trace }
    }

    pub(crate) fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        *self.trace.stage_ms.entry(stage.to_string()).or_insert(0.0) += start.elapsed().as_secs_f64() * 1e3;
        out
    }
}

/// Everything produced on the way from raw data to representative points.
#[derive(Debug, Clone)]
pub struct SepRepresentatives {
    pub map: AggregationMap,
    pub compressed: CompressedDataset,
    pub model: SphereModel,
    pub seps: SepSet,
    pub trace: PipelineTrace,
}

impl SepRepresentatives {
    /// Fine-point membership count per SEP.
    pub fn fine_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.seps.s];
        for &c in &self.map.fine_to_coarse {
            counts[self.seps.assignment[c]] += 1;
        }
        counts
    }

    /// SEP index of every fine point.
    pub fn fine_assignment(&self) -> Vec<usize> {
        self.map
            .fine_to_coarse
            .iter()
            .map(|&c| self.seps.assignment[c])
            .collect()
    }

    pub fn sep_matrix(&self, name: &str) -> DataMatrix {
        DataMatrix {
            n: self.seps.s,
            d: self.seps.d,
            values: self.seps.seps.clone(),
            labels: None,
            name: name.to_string(),
        }
    }
}

/// Graph, coarsening, sphere fit and SEP search.
pub fn sep_representatives(data: &DataMatrix, params: &PipelineParams) -> Result<SepRepresentatives> {
    let mut trace = PipelineTrace {
        n: data.n,
        ..PipelineTrace::default()
    };
    let mut watch = Stopwatch::new(&mut trace);

    let mut fine_graph = None;
    let (map, threshold_used) = if data.n < 2 {
        (AggregationMap::identity(data.n), params.agg_threshold)
    } else {
        let graph = fine_graph.insert(
            watch.time("graph", || build_knn_graph(data, params.k_nn.min(data.n - 1), params.weighting))?,
        );
        watch.time("coarsen", || -> Result<_> {
            let lap = laplacian(graph);
            let tv = smooth_test_vectors(&lap, params.test_vectors, params.sweeps, params.seed)?;
            match params.target_ratio {
                Some(ratio) => aggregate_to_ratio(graph, &tv, params.agg_threshold, ratio),
                None => Ok((aggregate(graph, &tv, params.agg_threshold)?, params.agg_threshold)),
            }
        })?
    };
    let compressed = watch.time("coarsen", || compress(data, &map))?;

    let q = params
        .kernel_q
        .unwrap_or_else(|| local_kernel_q(fine_graph.as_ref(), &compressed.features, compressed.d));
    let model = watch.time("svc", || fit_sphere(&compressed.features, compressed.d, q, params.svc_c))?;

    let seps = watch.time("sep", || -> Result<SepSet> {
        let mut opts = if params.mass_scaled_step {
            DescentOptions::mean_shift(&model)
        } else {
            DescentOptions::for_model(&model)
        };
        if let Some(step0) = params.step0 {
            opts.step0 = step0;
        }
        opts.grad_tol = params.grad_tol;
        opts.max_iters = params.max_descent_iters;
        let diam = diameter(&compressed.features, compressed.d);
        let merge_tol = (params.merge_tol_rel * diam).max(f64::MIN_POSITIVE);
        find_seps(&model, &compressed.features, opts, merge_tol)
    })?;

    trace.m = map.m;
    trace.s = seps.s;
    trace.kernel_q = q;
    trace.agg_threshold_used = threshold_used;
    trace.sphere_converged = model.converged;
    trace.sphere_iterations = model.iterations;
    trace.seps_degraded = seps.degraded;
    Ok(SepRepresentatives {
        map,
        compressed,
        model,
        seps,
        trace,
    })
}

/// Label each fine point through its compressed node and SEP.
pub fn backmap(sep_labels: &ClusterAssignment, seps: &SepSet, map: &AggregationMap) -> Result<ClusterAssignment> {
    if sep_labels.labels.len() != seps.s {
        return Err(Error::DimensionMismatch(format!(
            "{} SEP labels for {} SEPs",
            sep_labels.labels.len(),
            seps.s
        )));
    }
    if seps.assignment.len() != map.m {
        return Err(Error::DimensionMismatch(format!(
            "SEP assignment covers {} compressed points, aggregation has {}",
            seps.assignment.len(),
            map.m
        )));
    }
    let labels = map
        .fine_to_coarse
        .iter()
        .map(|&c| sep_labels.labels[seps.assignment[c]])
        .collect();
    Ok(ClusterAssignment {
        labels,
        k: sep_labels.k,
        inertia: sep_labels.inertia,
    })
}

/// Spectral clustering of the SEPs themselves (one label per SEP).
pub(crate) fn cluster_seps(
    reps: &SepRepresentatives,
    k: usize,
    params: &PipelineParams,
    watch: &mut Stopwatch<'_>,
) -> Result<ClusterAssignment> {
    let s = reps.seps.s;
    if k > s {
        return Err(Error::TooFewSeps { found: s, requested: k });
    }
    let sep_data = reps.sep_matrix("seps");
    let spectral = params.sep_spectral(s);
    let counts: Vec<f64> = reps.fine_counts().into_iter().map(|c| c as f64).collect();
    let graph = watch.time("graph", || -> Result<NeighborGraph> {
        let mut g = build_knn_graph(&sep_data, spectral.k_nn, spectral.weighting)?;
        if params.mass_aware {
            g.rescale(|p, q| (counts[p] * counts[q]).sqrt());
        }
        Ok(g)
    })?;
    let embedding = watch.time("eigs", || spectral_embedding(&graph, k, spectral.variant))?;
    let width = embedding.len() / s;
    watch.time("kmeans", || {
        kmeans_weighted(
            &embedding,
            width,
            k,
            params.mass_aware.then_some(counts.as_slice()),
            spectral.seed,
            spectral.kmeans_max_iter,
            spectral.kmeans_restarts,
        )
    })
}

/// Spectral clustering on stable equilibrium points, mapped back to the data.
pub fn sep_spectral_cluster(
    data: &DataMatrix,
    k: usize,
    params: &PipelineParams,
) -> Result<(ClusterAssignment, PipelineTrace)> {
    if k < 2 {
        return Err(Error::InvalidParameter("spectral clustering needs k >= 2".into()));
    }
    let reps = sep_representatives(data, params)?;
    if reps.seps.s < k {
        return Err(Error::TooFewSeps {
            found: reps.seps.s,
            requested: k,
        });
    }
    let mut trace = reps.trace.clone();
    let mut watch = Stopwatch::new(&mut trace);
    let sep_labels = cluster_seps(&reps, k, params, &mut watch)?;
    let labels = watch.time("backmap", || backmap(&sep_labels, &reps.seps, &reps.map))?;
    Ok((labels, trace))
}

/// Baseline with the same stage timing as the SEP pipeline.
pub fn standard_spectral_cluster_traced(
    data: &DataMatrix,
    k: usize,
    params: &SpectralParams,
) -> Result<(ClusterAssignment, PipelineTrace)> {
    if k < 2 || k > data.n {
        return Err(Error::InvalidParameter(format!(
            "cluster count k={k} must satisfy 2 <= k <= n={}",
            data.n
        )));
    }
    let mut trace = PipelineTrace {
        n: data.n,
        m: data.n,
        s: data.n,
        ..PipelineTrace::default()
    };
    let mut watch = Stopwatch::new(&mut trace);
    let graph = watch.time("graph", || build_knn_graph(data, params.k_nn.min(data.n - 1), params.weighting))?;
    let embedding = watch.time("eigs", || spectral_embedding(&graph, k, params.variant))?;
    let width = embedding.len() / data.n;
    let labels = watch.time("kmeans", || {
        kmeans(&embedding, width, k, params.seed, params.kmeans_max_iter, params.kmeans_restarts)
    })?;
    Ok((labels, trace))
}

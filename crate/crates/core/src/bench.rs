//! Benchmark harness: method x dataset x seed cells, timed per stage.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{load_csv, load_idx, load_libsvm, normalize, DataMatrix, Normalization};
use crate::error::{Error, Result};
use crate::eval::accuracy;
use crate::spectral::{sep_spectral_cluster, standard_spectral_cluster_traced, PipelineParams, PipelineTrace};
use crate::tsne::{exact_tsne, sep_tsne, TsneParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    #[default]
    Csv,
    Libsvm,
    Idx,
}

impl FromStr for DataFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(DataFormat::Csv),
            "libsvm" => Ok(DataFormat::Libsvm),
            "idx" => Ok(DataFormat::Idx),
            other => Err(Error::InvalidParameter(format!(
                "unknown format {other:?} (expected csv|libsvm|idx)"
            ))),
        }
    }
}

fn yes() -> bool {
    true
}

/// Where a dataset lives and how to read it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSource {
    #[serde(default)]
    pub name: Option<String>,
    pub path: PathBuf,
    #[serde(default)]
    pub format: DataFormat,
    /// Label file for the IDX format.
    #[serde(default)]
    pub labels: Option<PathBuf>,
    /// CSV only: skip the first line.
    #[serde(default)]
    pub header: bool,
    /// CSV only: the last column holds class labels.
    #[serde(default = "yes")]
    pub label_column: bool,
    #[serde(default)]
    pub normalize: Normalization,
}

impl DatasetSource {
    pub fn new(path: impl Into<PathBuf>, format: DataFormat) -> Self {
        DatasetSource {
            name: None,
            path: path.into(),
            format,
            labels: None,
            header: false,
            label_column: true,
            normalize: Normalization::default(),
        }
    }

    /// Read and normalize the dataset.
    pub fn load(&self) -> Result<DataMatrix> {
        let raw = match self.format {
            DataFormat::Csv => load_csv(&self.path, self.label_column, self.header)?,
            DataFormat::Libsvm => load_libsvm(&self.path)?,
            DataFormat::Idx => {
                let labels = self.labels.as_deref().ok_or_else(|| {
                    Error::InvalidParameter("the idx format needs a label file".into())
                })?;
                load_idx(&self.path, labels)?
            }
        };
        let mut data = normalize(&raw, self.normalize);
        if let Some(name) = &self.name {
            data.name = name.clone();
        }
        Ok(data)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    StandardSc,
    SepSc,
    ExactTsne,
    SepTsne,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::StandardSc => "standard-sc",
            Method::SepSc => "sep-sc",
            Method::ExactTsne => "exact-tsne",
            Method::SepTsne => "sep-tsne",
        }
    }

    /// The method whose wall time this one's speedup is measured against.
    fn baseline(self) -> Option<Method> {
        match self {
            Method::SepSc => Some(Method::StandardSc),
            Method::SepTsne => Some(Method::ExactTsne),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchDataset {
    #[serde(flatten)]
    pub source: DatasetSource,
    /// Cluster count; defaults to the number of label classes.
    #[serde(default)]
    pub k: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSpec {
    pub datasets: Vec<BenchDataset>,
    pub methods: Vec<Method>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub pipeline: PipelineParams,
    #[serde(default)]
    pub tsne: TsneParams,
    #[serde(default)]
    pub parallel_cells: bool,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

impl BenchSpec {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut spec: BenchSpec = serde_json::from_str(&text)?;
        // Relative dataset paths are resolved against the config's directory.
        let base = path.parent().unwrap_or(Path::new("."));
        for ds in &mut spec.datasets {
            for p in std::iter::once(&mut ds.source.path).chain(ds.source.labels.as_mut()) {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub method: String,
    pub dataset: String,
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub acc: Option<f64>,
    pub seed: u64,
    /// Wall time per stage in milliseconds.
    pub wall_ms: BTreeMap<String, f64>,
    pub total_ms: f64,
    /// Compressed and SEP counts (equal to `n` for full-data methods).
    pub m: usize,
    pub s: usize,
    /// Baseline wall time divided by this cell's, when the baseline ran.
    pub speedup: Option<f64>,
    pub params: serde_json::Value,
    pub error: Option<String>,
    /// Cells ran concurrently; wall times are indicative only.
    pub concurrent: bool,
}

struct LoadedDataset {
    name: String,
    data: std::result::Result<DataMatrix, String>,
    k: Option<usize>,
}

fn run_cell(ds: &LoadedDataset, k_default: Option<usize>, method: Method, seed: u64, spec: &BenchSpec) -> BenchRecord {
    let pipeline = PipelineParams {
        seed,
        ..spec.pipeline.clone()
    };
    let tsne = TsneParams { seed, ..spec.tsne };
    let params = match method {
        Method::StandardSc => serde_json::to_value(pipeline.spectral()),
        Method::SepSc => serde_json::to_value(&pipeline),
        Method::ExactTsne => serde_json::to_value(tsne),
        Method::SepTsne => serde_json::to_value(serde_json::json!({ "pipeline": &pipeline, "tsne": tsne })),
    }
    .unwrap_or(serde_json::Value::Null);
    let mut record = BenchRecord {
        method: method.as_str().to_string(),
        dataset: ds.name.clone(),
        n: 0,
        d: 0,
        k: 0,
        acc: None,
        seed,
        wall_ms: BTreeMap::new(),
        total_ms: 0.0,
        m: 0,
        s: 0,
        speedup: None,
        params,
        error: None,
        concurrent: spec.parallel_cells,
    };
    let data = match &ds.data {
        Ok(d) => d,
        Err(e) => {
            record.error = Some(e.clone());
            return record;
        }
    };
    record.n = data.n;
    record.d = data.d;
    let k = ds.k.or(k_default).or_else(|| data.num_classes()).unwrap_or(2);
    record.k = k;

    let start = Instant::now();
    let outcome: Result<(Option<Vec<usize>>, PipelineTrace)> = match method {
        Method::StandardSc => {
            standard_spectral_cluster_traced(data, k, &pipeline.spectral()).map(|(a, t)| (Some(a.labels), t))
        }
        Method::SepSc => sep_spectral_cluster(data, k, &pipeline).map(|(a, t)| (Some(a.labels), t)),
        Method::ExactTsne => exact_tsne(data, &tsne).map(|(_, t)| (None, t)),
        Method::SepTsne => sep_tsne(data, None, &pipeline, &tsne).map(|r| (None, r.trace)),
    };
    let elapsed = start.elapsed().as_secs_f64() * 1e3;
    match outcome {
        Ok((labels, trace)) => {
            record.m = trace.m;
            record.s = trace.s;
            record.wall_ms = trace.stage_ms;
            record.total_ms = elapsed;
            if let (Some(pred), Some(truth)) = (labels, &data.labels) {
                match accuracy(&pred, truth) {
                    Ok(r) => record.acc = Some(r.acc),
                    Err(e) => record.error = Some(e.to_string()),
                }
            }
        }
        Err(e) => {
            record.total_ms = elapsed;
            record.error = Some(e.to_string());
        }
    }
    record
}

/// Run every (dataset, method, seed) cell and return one record per cell.
///
/// A failing cell records its error and the run moves on.
pub fn run_bench(spec: &BenchSpec) -> Vec<BenchRecord> {
    if spec.methods.is_empty() {
        return Vec::new();
    }
    let datasets: Vec<LoadedDataset> = spec
        .datasets
        .iter()
        .map(|ds| {
            let name = ds.source.name.clone().unwrap_or_else(|| {
                ds.source
                    .path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "dataset".into())
            });
            LoadedDataset {
                name,
                data: ds.source.load().map_err(|e| e.to_string()),
                k: ds.k,
            }
        })
        .collect();

    let cells: Vec<(usize, Method, u64)> = datasets
        .iter()
        .enumerate()
        .flat_map(|(di, _)| {
            spec.methods
                .iter()
                .flat_map(move |&m| spec.seeds.iter().map(move |&s| (di, m, s)))
        })
        .collect();

    let mut records: Vec<BenchRecord> = if spec.parallel_cells {
        let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(cells.len()).max(1);
        let mut slots: Vec<Option<BenchRecord>> = vec![None; cells.len()];
        std::thread::scope(|scope| {
            let chunk = cells.len().div_ceil(workers);
            for (cell_chunk, slot_chunk) in cells.chunks(chunk).zip(slots.chunks_mut(chunk)) {
                let datasets = &datasets;
                scope.spawn(move || {
                    for (&(di, m, s), slot) in cell_chunk.iter().zip(slot_chunk) {
                        *slot = Some(run_cell(&datasets[di], spec.k, m, s, spec));
                    }
                });
            }
        });
        slots.into_iter().map(|r| r.expect("every cell ran")).collect()
    } else {
        cells
            .iter()
            .map(|&(di, m, s)| run_cell(&datasets[di], spec.k, m, s, spec))
            .collect()
    };

    fill_speedups(&mut records);
    records
}

fn fill_speedups(records: &mut [BenchRecord]) {
    let lookup: BTreeMap<(String, String, u64), f64> = records
        .iter()
        .filter(|r| r.error.is_none())
        .map(|r| ((r.method.clone(), r.dataset.clone(), r.seed), r.total_ms))
        .collect();
    for r in records.iter_mut().filter(|r| r.error.is_none()) {
        let baseline = [Method::SepSc, Method::SepTsne]
            .into_iter()
            .find(|m| m.as_str() == r.method)
            .and_then(Method::baseline);
        if let Some(base) = baseline {
            if let Some(&base_ms) = lookup.get(&(base.as_str().to_string(), r.dataset.clone(), r.seed)) {
                if r.total_ms > 0.0 {
                    r.speedup = Some(base_ms / r.total_ms);
                }
            }
        }
    }
}

/// Mean accuracy of one method on one dataset across successful seeds.
pub fn mean_acc(records: &[BenchRecord], method: Method, dataset: &str) -> Option<f64> {
    let accs: Vec<f64> = records
        .iter()
        .filter(|r| r.method == method.as_str() && r.dataset == dataset)
        .filter_map(|r| r.acc)
        .collect();
    (!accs.is_empty()).then(|| accs.iter().sum::<f64>() / accs.len() as f64)
}

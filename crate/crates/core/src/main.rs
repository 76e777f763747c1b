use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use sep_eda::bench::{run_bench, BenchSpec, DataFormat, DatasetSource};
use sep_eda::data::{parse_idx_labels, DataMatrix, Normalization};
use sep_eda::graph::Weighting;
use sep_eda::spectral::{sep_spectral_cluster, spectral_cluster, LaplacianVariant, PipelineParams};
use sep_eda::svg::render_scatter_svg;
use sep_eda::tsne::{exact_tsne, majority_pure_classes, sep_majority_labels, sep_tsne, TsneParams};
use sep_eda::{accuracy, Error, Result};

#[derive(Parser)]
#[command(name = "sep-eda", version, about = "Stable-equilibrium-point spectral clustering and t-SNE")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster a dataset and write labels.json.
    Cluster(ClusterArgs),
    /// Embed a dataset in 2-D and render an SVG scatter plot.
    Tsne(TsneArgs),
    /// Score predicted labels against ground truth.
    Eval(EvalArgs),
    /// Run a benchmark configuration and write records.json.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Libsvm,
    Idx,
}

#[derive(Clone, Copy, ValueEnum)]
enum NormalizeArg {
    Minmax,
    Zscore,
    None,
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightingArg {
    Binary,
    Gaussian,
}

#[derive(Clone, Copy, ValueEnum)]
enum LaplacianArg {
    Unnormalized,
    SymNormalized,
}

#[derive(Args)]
struct InputArgs {
    /// Dataset file (for idx: the image file).
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    /// Label file accompanying an idx image file.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// CSV: skip the first line.
    #[arg(long)]
    header: bool,
    /// CSV: the file has no trailing label column.
    #[arg(long)]
    unlabeled: bool,
    #[arg(long, value_enum, default_value = "minmax")]
    normalize: NormalizeArg,
}

impl InputArgs {
    fn load(&self) -> Result<DataMatrix> {
        let source = DatasetSource {
            name: None,
            path: self.input.clone(),
            format: match self.format {
                FormatArg::Csv => DataFormat::Csv,
                FormatArg::Libsvm => DataFormat::Libsvm,
                FormatArg::Idx => DataFormat::Idx,
            },
            labels: self.labels.clone(),
            header: self.header,
            label_column: !self.unlabeled,
            normalize: match self.normalize {
                NormalizeArg::Minmax => Normalization::MinMax,
                NormalizeArg::Zscore => Normalization::ZScore,
                NormalizeArg::None => Normalization::None,
            },
        };
        source.load()
    }
}

/// Pipeline tunables; unset flags keep the library defaults.
#[derive(Args)]
struct PipelineArgs {
    /// Neighbors per node in the k-NN graph.
    #[arg(long)]
    knn: Option<usize>,
    #[arg(long, value_enum)]
    weighting: Option<WeightingArg>,
    #[arg(long, value_enum)]
    laplacian: Option<LaplacianArg>,
    /// Number of smoothed test vectors used for coarsening.
    #[arg(long)]
    test_vectors: Option<usize>,
    /// Gauss-Seidel sweeps per test vector.
    #[arg(long)]
    sweeps: Option<usize>,
    /// Structural-correlation threshold for aggregation.
    #[arg(long)]
    agg_threshold: Option<f64>,
    /// Lower the threshold until m <= ratio * n.
    #[arg(long)]
    target_ratio: Option<f64>,
    /// Gaussian kernel width q (default: 1 / mean squared nearest-neighbor distance).
    #[arg(long)]
    kernel_q: Option<f64>,
    /// Box constraint C of the sphere dual.
    #[arg(long)]
    svc_c: Option<f64>,
    /// Initial descent step, divided by the local kernel mass (default: 1 / (4 q)).
    #[arg(long)]
    step0: Option<f64>,
    /// Stop a descent once the gradient norm falls below this.
    #[arg(long)]
    grad_tol: Option<f64>,
    /// Step cap per descent trajectory.
    #[arg(long)]
    max_descent_iters: Option<usize>,
    /// SEP merge tolerance relative to the data diameter.
    #[arg(long)]
    merge_tol: Option<f64>,
    /// Neighbors per SEP in the representative graph.
    #[arg(long)]
    sep_knn: Option<usize>,
    /// k-means restarts; the lowest inertia wins.
    #[arg(long)]
    kmeans_restarts: Option<usize>,
    /// Seed for every random choice in the run.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl PipelineArgs {
    fn params(&self) -> PipelineParams {
        let mut p = PipelineParams {
            seed: self.seed,
            ..PipelineParams::default()
        };
        macro_rules! set {
            ($($field:ident => $target:ident),*) => {
                $(if let Some(v) = self.$field { p.$target = v; })*
            };
        }
        set!(knn => k_nn, test_vectors => test_vectors, sweeps => sweeps, agg_threshold => agg_threshold,
             svc_c => svc_c, grad_tol => grad_tol, max_descent_iters => max_descent_iters,
             merge_tol => merge_tol_rel, sep_knn => sep_knn, kmeans_restarts => kmeans_restarts);
        if let Some(w) = self.weighting {
            p.weighting = match w {
                WeightingArg::Binary => Weighting::Binary,
                WeightingArg::Gaussian => Weighting::Gaussian,
            };
        }
        if let Some(v) = self.laplacian {
            p.variant = match v {
                LaplacianArg::Unnormalized => LaplacianVariant::Unnormalized,
                LaplacianArg::SymNormalized => LaplacianVariant::SymNormalized,
            };
        }
        p.target_ratio = self.target_ratio.or(p.target_ratio);
        p.kernel_q = self.kernel_q.or(p.kernel_q);
        p.step0 = self.step0.or(p.step0);
        p
    }
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum ClusterMethod {
    Sep,
    Standard,
}

#[derive(Args)]
struct ClusterArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Number of clusters.
    #[arg(long)]
    k: usize,
    #[arg(long, value_enum, default_value = "sep")]
    method: ClusterMethod,
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Treat sphere or descent non-convergence as fatal.
    #[arg(long)]
    strict: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum TsneMethod {
    Sep,
    Exact,
}

#[derive(Args)]
struct TsneArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum, default_value = "sep")]
    method: TsneMethod,
    #[arg(long, default_value_t = 30.0)]
    perplexity: f64,
    #[arg(long, default_value_t = 1000)]
    iters: usize,
    #[arg(long, default_value_t = 200.0)]
    learning_rate: f64,
    /// Color SEPs by a k-way spectral clustering instead of ground truth.
    #[arg(long)]
    color_k: Option<usize>,
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[arg(long)]
    strict: bool,
    #[arg(long)]
    svg: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// labels.json written by `cluster`.
    #[arg(long)]
    pred: PathBuf,
    /// Ground truth: a JSON label array or labels.json, an IDX label file,
    /// or a text file whose lines end in the label (CSV datasets work).
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Run cells concurrently (wall times become indicative only).
    #[arg(long)]
    parallel_cells: bool,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Non-convergence is a warning unless `--strict`.
fn check_convergence(strict: bool, sphere_converged: bool, degraded: bool) -> Result<()> {
    let mut problems = Vec::new();
    if !sphere_converged {
        problems.push("sphere solver hit its iteration cap");
    }
    if degraded {
        problems.push("more than 10% of descent trajectories did not converge");
    }
    if problems.is_empty() {
        return Ok(());
    }
    let msg = problems.join("; ");
    if strict {
        Err(Error::Numerical(msg))
    } else {
        eprintln!("warning: {msg}");
        Ok(())
    }
}

fn cmd_cluster(args: &ClusterArgs) -> Result<()> {
    let data = args.input.load()?;
    let params = args.pipeline.params();
    let (assignment, params_json) = match args.method {
        ClusterMethod::Standard => {
            let sc = params.spectral();
            (spectral_cluster(&data, args.k, &sc)?, json!({ "method": "standard", "spectral": sc }))
        }
        ClusterMethod::Sep => {
            let (a, trace) = sep_spectral_cluster(&data, args.k, &params)?;
            check_convergence(args.strict, trace.sphere_converged, trace.seps_degraded)?;
            eprintln!(
                "n={} m={} s={} q={:.4} time={:.0} ms",
                trace.n,
                trace.m,
                trace.s,
                trace.kernel_q,
                trace.total_ms()
            );
            (a, json!({ "method": "sep", "pipeline": params }))
        }
    };
    write_json(
        &args.out,
        &json!({
            "n": data.n,
            "k": args.k,
            "labels": assignment.labels,
            "params": params_json,
            "seed": params.seed,
        }),
    )
}

fn cmd_tsne(args: &TsneArgs) -> Result<()> {
    let data = args.input.load()?;
    let params = args.pipeline.params();
    let tsne = TsneParams {
        perplexity: args.perplexity,
        iters: args.iters,
        learning_rate: args.learning_rate,
        seed: params.seed,
        ..TsneParams::default()
    };
    let start = Instant::now();
    let report = match args.method {
        TsneMethod::Exact => {
            let (emb, trace) = exact_tsne(&data, &tsne)?;
            render_scatter_svg(&emb.coords, data.labels.as_deref(), None, &args.svg)?;
            json!({
                "method": "exact",
                "n": data.n,
                "tsne": tsne,
                "initial_kl": emb.initial_kl,
                "final_kl": emb.final_kl,
                "wall_ms": trace.stage_ms,
                "total_ms": start.elapsed().as_secs_f64() * 1e3,
                "coords": emb.coords,
            })
        }
        TsneMethod::Sep => {
            let out = sep_tsne(&data, args.color_k, &params, &tsne)?;
            check_convergence(args.strict, out.trace.sphere_converged, out.trace.seps_degraded)?;
            render_scatter_svg(&out.embedding.coords, out.colors.as_deref(), Some(&out.sizes), &args.svg)?;
            let pure = data.labels.as_ref().map(|truth| {
                let majority = sep_majority_labels(&out.reps.fine_assignment(), truth, out.reps.seps.s);
                majority_pure_classes(&out.embedding.coords, &majority)
            });
            json!({
                "method": "sep",
                "n": data.n,
                "m": out.trace.m,
                "s": out.trace.s,
                "pipeline": params,
                "tsne": tsne,
                "initial_kl": out.embedding.initial_kl,
                "final_kl": out.embedding.final_kl,
                "pure_classes": pure,
                "wall_ms": out.trace.stage_ms,
                "total_ms": start.elapsed().as_secs_f64() * 1e3,
                "sizes": out.sizes,
                "coords": out.embedding.coords,
            })
        }
    };
    match &args.report {
        Some(path) => write_json(path, &report),
        None => Ok(()),
    }
}

/// Labels from labels.json (`{"labels": [...]}`) or a bare JSON array.
fn json_labels(value: &serde_json::Value) -> Option<Vec<i64>> {
    let arr = value.get("labels").unwrap_or(value).as_array()?;
    arr.iter().map(|v| v.as_i64()).collect()
}

fn remap(raw: &[i64]) -> Vec<usize> {
    let mut distinct = raw.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    raw.iter()
        .map(|v| distinct.binary_search(v).expect("value present"))
        .collect()
}

fn read_truth(path: &Path) -> Result<Vec<usize>> {
    let bytes = read_file(path)?;
    if bytes.len() >= 4 && bytes[..4] == [0, 0, 8, 1] {
        let raw = parse_idx_labels(&bytes)?;
        return Ok(remap(&raw.iter().map(|&b| b as i64).collect::<Vec<_>>()));
    }
    let text = String::from_utf8(bytes).map_err(|_| Error::InvalidData(format!("{} is not text", path.display())))?;
    if let Ok(value) = serde_json::from_str::<serde_json::Value>(&text) {
        return json_labels(&value)
            .map(|raw| remap(&raw))
            .ok_or_else(|| Error::InvalidData(format!("{} holds no integer label array", path.display())));
    }
    let mut raw = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let field = line.rsplit(',').next().unwrap_or("").trim();
        if field.is_empty() {
            continue;
        }
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() && v.fract() == 0.0 => raw.push(v as i64),
            _ if i == 0 => continue,
            _ => {
                return Err(Error::Parse {
                    row: i + 1,
                    column: line.split(',').count(),
                    message: format!("label {field:?} is not an integer"),
                })
            }
        }
    }
    Ok(remap(&raw))
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let pred_text = String::from_utf8(read_file(&args.pred)?)
        .map_err(|_| Error::InvalidData(format!("{} is not text", args.pred.display())))?;
    let pred_value: serde_json::Value = serde_json::from_str(&pred_text)?;
    let pred_raw = json_labels(&pred_value)
        .ok_or_else(|| Error::InvalidData(format!("{} has no integer labels array", args.pred.display())))?;
    if pred_raw.iter().any(|&v| v < 0) {
        return Err(Error::InvalidData("predicted labels must be non-negative".into()));
    }
    let pred: Vec<usize> = pred_raw.iter().map(|&v| v as usize).collect();
    let truth = read_truth(&args.truth)?;
    let report = accuracy(&pred, &truth)?;
    println!("ACC = {:.4}", report.acc);
    write_json(&args.out, &report)
}

fn cmd_bench(args: &BenchArgs) -> Result<()> {
    let mut spec = BenchSpec::from_path(&args.config)?;
    spec.parallel_cells |= args.parallel_cells;
    let records = run_bench(&spec);
    for r in &records {
        match (&r.error, r.acc) {
            (Some(e), _) => eprintln!("{} {} seed={}: error: {e}", r.method, r.dataset, r.seed),
            (None, acc) => eprintln!(
                "{} {} seed={}: acc={} time={:.0} ms",
                r.method,
                r.dataset,
                r.seed,
                acc.map_or("-".to_string(), |a| format!("{:.2}%", 100.0 * a)),
                r.total_ms
            ),
        }
    }
    write_json(&args.out, &records)
}

fn exit_code(err: &Error) -> u8 {
    if err.is_usage() {
        1
    } else if err.is_numerical() {
        3
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Cluster(a) => cmd_cluster(a),
        Command::Tsne(a) => cmd_tsne(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

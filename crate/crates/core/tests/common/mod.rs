//! Independent oracles shared by the oracle tests and the acceptance runner.
//!
//! Every check returns `Ok(detail)` or `Err(reason)` so it can back both a
//! `#[test]` and a one-line acceptance report.

#![allow(dead_code)]

use std::path::Path;
use std::process::Command;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sep_eda::coarsen::{gauss_seidel_sweep, structural_correlation, TestVectors};
use sep_eda::graph::{laplacian, NeighborGraph};
use sep_eda::kmeans::kmeans_once;
use sep_eda::spectral::{spectral_cluster_graph, LaplacianVariant, SpectralParams};
use sep_eda::svc::{fit_sphere, SphereModel};
use sep_eda::tsne::{kl_divergence, kl_gradient, p_matrix, q_matrix};
use sep_eda::{accuracy, DataMatrix};

pub type Check = Result<String, String>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_points(rng: &mut ChaCha8Rng, m: usize, d: usize, scale: f64) -> Vec<f64> {
    (0..m * d).map(|_| rng.random_range(-scale..scale)).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Central differences of `f` at `x` with step `h`.
pub fn finite_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let up = f(&probe);
            probe[i] = orig - h;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn relative_error(approx: &[f64], exact: &[f64]) -> f64 {
    let diff: Vec<f64> = approx.iter().zip(exact).map(|(a, b)| a - b).collect();
    norm(&diff) / norm(exact).max(f64::MIN_POSITIVE)
}

/// (points, dimension, q) for the sphere fixtures.
pub fn sphere_fixtures() -> Vec<(Vec<f64>, usize, f64)> {
    let mut r = rng(11);
    [(3, 2, 2.0), (8, 2, 1.0), (15, 3, 0.5), (25, 5, 0.8), (40, 4, 3.0)]
        .into_iter()
        .map(|(m, d, q)| (uniform_points(&mut r, m, d, 1.0), d, q))
        .collect()
}

pub fn radius_grad_vs_fd() -> Check {
    let mut worst = 0.0f64;
    let mut probes = rng(12);
    for (points, d, q) in sphere_fixtures() {
        let model = fit_sphere(&points, d, q, 1.0).map_err(|e| e.to_string())?;
        for _ in 0..100 {
            let x = uniform_points(&mut probes, 1, d, 1.5);
            let analytic = model.radius_grad(&x);
            // Unfloored f: the floor at zero is not differentiable.
            let f = |y: &[f64]| 1.0 - 2.0 * model.kernel_mass(y) + model.self_term;
            let numeric = finite_difference(f, &x, 1e-5);
            worst = worst.max(relative_error(&numeric, &analytic));
        }
    }
    if worst < 1e-5 {
        Ok(format!("500 probes, worst relative error {worst:.2e}"))
    } else {
        Err(format!("worst relative error {worst:.2e} >= 1e-5"))
    }
}

/// Dual objective `1 - beta' K beta` on a simplex grid of step `h`.
fn simplex_grid_max(k: &[[f64; 3]; 3], h: f64) -> f64 {
    let steps = (1.0 / h).round() as usize;
    let mut best = f64::NEG_INFINITY;
    for a in 0..=steps {
        for b in 0..=steps - a {
            let beta = [a as f64 * h, b as f64 * h, (steps - a - b) as f64 * h];
            let mut quad = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    quad += beta[i] * beta[j] * k[i][j];
                }
            }
            best = best.max(1.0 - quad);
        }
    }
    best
}

pub fn sphere_kkt_and_grid() -> Check {
    let mut worst_kkt = 0.0f64;
    for (points, d, q) in sphere_fixtures() {
        let model = fit_sphere(&points, d, q, 1.0).map_err(|e| e.to_string())?;
        worst_kkt = worst_kkt.max(model.kkt_residual());
    }
    let mut r = rng(13);
    let mut worst_gap = 0.0f64;
    for trial in 0..10 {
        let points = uniform_points(&mut r, 3, 2, 1.0);
        let q = 0.5 + trial as f64 * 0.3;
        let model: SphereModel = fit_sphere(&points, 2, q, 1.0).map_err(|e| e.to_string())?;
        worst_kkt = worst_kkt.max(model.kkt_residual());
        let mut k = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let d2: f64 = (0..2).map(|c| (points[2 * i + c] - points[2 * j + c]).powi(2)).sum();
                k[i][j] = (-q * d2).exp();
            }
        }
        worst_gap = worst_gap.max((simplex_grid_max(&k, 1e-3) - model.dual_objective()).abs());
    }
    if worst_kkt < 1e-5 && worst_gap < 1e-4 {
        Ok(format!("worst KKT residual {worst_kkt:.2e}, worst grid gap {worst_gap:.2e}"))
    } else {
        Err(format!("KKT residual {worst_kkt:.2e}, grid gap {worst_gap:.2e}"))
    }
}

fn permutations(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == items.len() {
        out.push(items.clone());
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permutations(items, k + 1, out);
        items.swap(k, i);
    }
}

/// Best matched count by trying every bijection of the padded label sets.
pub fn exhaustive_matches(pred: &[usize], truth: &[usize]) -> usize {
    let size = 1 + pred.iter().chain(truth).copied().max().unwrap_or(0);
    let mut perms = Vec::new();
    permutations(&mut (0..size).collect(), 0, &mut perms);
    perms
        .iter()
        .map(|perm| pred.iter().zip(truth).filter(|(p, t)| perm[**p] == **t).count())
        .max()
        .unwrap_or(0)
}

pub fn accuracy_vs_permutations() -> Check {
    let mut r = rng(14);
    for instance in 0..50 {
        let kp = r.random_range(1..=6usize);
        let kt = r.random_range(1..=6usize);
        let n = r.random_range(1..=200usize);
        let pred: Vec<usize> = (0..n).map(|_| r.random_range(0..kp)).collect();
        let truth: Vec<usize> = (0..n).map(|_| r.random_range(0..kt)).collect();
        let report = accuracy(&pred, &truth).map_err(|e| e.to_string())?;
        let best = exhaustive_matches(&pred, &truth);
        if (report.acc * n as f64 - best as f64).abs() > 1e-9 {
            return Err(format!("instance {instance}: acc {} vs oracle {best}/{n}", report.acc));
        }
    }
    Ok("50 instances agree".into())
}

pub fn mass_and_kl() -> Check {
    let mut r = rng(15);
    let mut worst_mass = 0.0f64;
    for trial in 0..10 {
        let n = 5 + trial * 4;
        let data = DataMatrix::new(n, 3, uniform_points(&mut r, n, 3, 2.0), None, "p")
            .map_err(|e| e.to_string())?;
        let p = p_matrix(&data, ((n - 1) as f64 / 3.0).min(5.0)).map_err(|e| e.to_string())?;
        worst_mass = worst_mass.max((p.p.iter().sum::<f64>() - 1.0).abs());
        let q = q_matrix(&uniform_points(&mut r, n, 2, 3.0));
        worst_mass = worst_mass.max((q.iter().sum::<f64>() - 1.0).abs());
        let kl = kl_divergence(&p.p, &q, n).map_err(|e| e.to_string())?;
        if kl < 0.0 {
            return Err(format!("negative KL {kl}"));
        }
        let self_kl = kl_divergence(&p.p, &p.p, n).map_err(|e| e.to_string())?;
        if self_kl.abs() > 1e-12 {
            return Err(format!("KL(p, p) = {self_kl:e}"));
        }
    }
    // Both sides normalized from the same unnormalized weights.
    let n = 6;
    let raw: Vec<f64> = (0..n * n).map(|i| if i % (n + 1) == 0 { 0.0 } else { r.random_range(0.1..2.0) }).collect();
    let total: f64 = raw.iter().sum();
    let p: Vec<f64> = raw.iter().map(|v| v / total).collect();
    let scaled: Vec<f64> = raw.iter().map(|v| 7.5 * v).collect();
    let st: f64 = scaled.iter().sum();
    let q: Vec<f64> = scaled.iter().map(|v| v / st).collect();
    let prop_kl = kl_divergence(&p, &q, n).map_err(|e| e.to_string())?;
    if worst_mass < 1e-10 && prop_kl.abs() < 1e-12 {
        Ok(format!("worst mass error {worst_mass:.1e}, KL at q~p {prop_kl:.1e}"))
    } else {
        Err(format!("mass error {worst_mass:.1e}, KL at q~p {prop_kl:.1e}"))
    }
}

pub fn tsne_gradient_vs_fd() -> Check {
    let mut r = rng(16);
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let data = DataMatrix::new(8, 4, uniform_points(&mut r, 8, 4, 1.0), None, "g")
            .map_err(|e| e.to_string())?;
        let p = p_matrix(&data, 2.0).map_err(|e| e.to_string())?;
        let y = uniform_points(&mut r, 8, 2, 1.0);
        let mut grad = vec![0.0; 16];
        kl_gradient(&p.p, &y, 1.0, &mut grad);
        let cost = |c: &[f64]| kl_divergence(&p.p, &q_matrix(c), 8).expect("finite cost");
        let numeric = finite_difference(cost, &y, 1e-6);
        worst = worst.max(relative_error(&numeric, &grad));
    }
    if worst < 1e-4 {
        Ok(format!("5 fixtures, worst relative error {worst:.2e}"))
    } else {
        Err(format!("worst relative error {worst:.2e} >= 1e-4"))
    }
}

/// Random connected weighted graph: a ring plus random chords.
pub fn random_graph(r: &mut ChaCha8Rng, n: usize) -> NeighborGraph {
    let mut edges: Vec<(usize, usize, f64)> = (0..n).map(|i| (i, (i + 1) % n, r.random_range(0.1..2.0))).collect();
    for _ in 0..2 * n {
        let (a, b) = (r.random_range(0..n), r.random_range(0..n));
        if a != b && !edges.iter().any(|&(x, y, _)| (x, y) == (a, b) || (x, y) == (b, a)) {
            edges.push((a, b, r.random_range(0.1..2.0)));
        }
    }
    NeighborGraph::from_edges(n, &edges).expect("valid edges")
}

pub fn gauss_seidel_energy() -> Check {
    let mut r = rng(17);
    for g in 0..20 {
        let n = r.random_range(5..60usize);
        let graph = random_graph(&mut r, n);
        let lap = laplacian(&graph);
        let mut x: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
        let mut energy = lap.quadratic_form(&x);
        for sweep in 0..15 {
            gauss_seidel_sweep(&lap, &mut x).map_err(|e| e.to_string())?;
            let next = lap.quadratic_form(&x);
            if next > energy * (1.0 + 1e-12) + 1e-300 {
                return Err(format!("graph {g} sweep {sweep}: energy {energy:e} -> {next:e}"));
            }
            energy = next;
        }
    }
    Ok("20 graphs x 15 sweeps non-increasing".into())
}

pub fn correlation_properties() -> Check {
    let mut r = rng(18);
    for _ in 0..50 {
        let (n, k) = (r.random_range(2..20usize), r.random_range(1..8usize));
        let vectors: Vec<Vec<f64>> = (0..k).map(|_| (0..n).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
        let scale = r.random_range(-5.0..5.0f64);
        let tv = TestVectors::from_vectors(vectors.clone());
        let scaled = TestVectors::from_vectors(vectors.iter().map(|v| v.iter().map(|x| x * scale).collect()).collect());
        let (p, q) = (r.random_range(0..n), r.random_range(0..n));
        let c = structural_correlation(&tv, p, q);
        if !(0.0..=1.0).contains(&c) {
            return Err(format!("correlation {c} outside [0, 1]"));
        }
        if c != structural_correlation(&tv, q, p) {
            return Err("correlation not symmetric".into());
        }
        if scale.abs() > 1e-3 && (c - structural_correlation(&scaled, p, q)).abs() > 1e-12 {
            return Err(format!("scaling by {scale} changed correlation"));
        }
    }
    Ok("50 random TestVectors".into())
}

pub fn kmeans_and_cliques() -> Check {
    let mut r = rng(19);
    for trial in 0..10 {
        let rows = uniform_points(&mut r, 60, 3, 1.0);
        let run = kmeans_once(&rows, 3, 2 + trial % 4, trial as u64, 100).map_err(|e| e.to_string())?;
        if let Some(w) = run.history.windows(2).find(|w| w[1] > w[0] * (1.0 + 1e-12)) {
            return Err(format!("inertia rose {} -> {}", w[0], w[1]));
        }
    }
    for size in [4, 7, 12] {
        let mut edges = Vec::new();
        for base in [0, size] {
            for i in 0..size {
                for j in i + 1..size {
                    edges.push((base + i, base + j, r.random_range(0.5..1.5)));
                }
            }
        }
        let graph = NeighborGraph::from_edges(2 * size, &edges).map_err(|e| e.to_string())?;
        for variant in [LaplacianVariant::Unnormalized, LaplacianVariant::SymNormalized] {
            let params = SpectralParams { variant, ..SpectralParams::default() };
            let labels = spectral_cluster_graph(&graph, 2, &params).map_err(|e| e.to_string())?.labels;
            let truth: Vec<usize> = (0..2 * size).map(|i| i / size).collect();
            let acc = accuracy(&labels, &truth).map_err(|e| e.to_string())?.acc;
            if acc != 1.0 {
                return Err(format!("clique size {size} {variant:?}: acc {acc}"));
            }
        }
    }
    Ok("inertia monotone over 10 runs; cliques recovered exactly".into())
}

pub fn write_blobs_csv(path: &Path, seed: u64) {
    let data = sep_eda::data::make_blobs(3, 60, 2, 6.0, 0.6, seed).expect("blobs");
    let labels = data.labels.as_ref().expect("labeled");
    let mut text = String::new();
    for i in 0..data.n {
        let row = data.row(i);
        text.push_str(&format!("{},{},{}\n", row[0], row[1], labels[i]));
    }
    std::fs::write(path, text).expect("write csv");
}

pub fn run_cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_sep-eda"))
        .args(args)
        .output()
        .expect("spawn sep-eda")
}

pub fn cli_determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let input = dir.path().join("blobs.csv");
    write_blobs_csv(&input, 3);
    let mut outputs = Vec::new();
    for method in ["sep", "standard"] {
        for run in 0..2 {
            let out = dir.path().join(format!("{method}{run}.json"));
            let status = run_cli(&[
                "cluster",
                "--input",
                input.to_str().unwrap(),
                "--k",
                "3",
                "--method",
                method,
                "--seed",
                "5",
                "--out",
                out.to_str().unwrap(),
            ]);
            if !status.status.success() {
                return Err(format!("{method} run failed: {}", String::from_utf8_lossy(&status.stderr)));
            }
            outputs.push(std::fs::read(&out).map_err(|e| e.to_string())?);
        }
    }
    if outputs[0] == outputs[1] && outputs[2] == outputs[3] {
        Ok("sep and standard labels.json byte-identical across runs".into())
    } else {
        Err("labels.json differs between identical runs".into())
    }
}

/// Degenerate inputs through the library: each must give its documented outcome.
pub fn degenerate_suite() -> Check {
    use sep_eda::kmeans::kmeans;
    use sep_eda::spectral::{sep_spectral_cluster, spectral_cluster, PipelineParams};
    use sep_eda::Error;

    let mut notes = Vec::new();
    let pipeline = PipelineParams::default();

    // Single point: one SEP, so any k >= 2 is TooFewSeps; the baseline rejects k > n.
    let single = DataMatrix::new(1, 2, vec![0.3, 0.4], None, "one").map_err(|e| e.to_string())?;
    match sep_spectral_cluster(&single, 2, &pipeline) {
        Err(Error::TooFewSeps { found: 1, requested: 2 }) => notes.push("single point: TooFewSeps"),
        other => return Err(format!("single point sep: {other:?}")),
    }
    match spectral_cluster(&single, 2, &SpectralParams::default()) {
        Err(e) if e.is_usage() => {}
        other => return Err(format!("single point standard: {other:?}")),
    }

    // All duplicates collapse to a single SEP.
    let dup = DataMatrix::new(20, 2, [0.5, 0.5].repeat(20), None, "dup").map_err(|e| e.to_string())?;
    match sep_spectral_cluster(&dup, 3, &pipeline) {
        Err(Error::TooFewSeps { found: 1, requested: 3 }) => notes.push("duplicates: one SEP"),
        other => return Err(format!("duplicates sep: {other:?}")),
    }
    let labels = spectral_cluster(&dup, 3, &SpectralParams::default()).map_err(|e| e.to_string())?;
    if labels.labels.len() != 20 || labels.labels.iter().any(|&l| l >= 3) {
        return Err("duplicates standard: malformed labels".into());
    }

    // n = k: k-means gives every point its own cluster with zero inertia.
    let rows = [0.0, 0.0, 5.0, 5.0, 10.0, 0.0];
    let own = kmeans(&rows, 2, 3, 0, 100, 3).map_err(|e| e.to_string())?;
    let mut sorted = own.labels.clone();
    sorted.sort_unstable();
    if sorted != vec![0, 1, 2] || own.inertia != 0.0 {
        return Err(format!("n = k k-means: {own:?}"));
    }
    let nk = DataMatrix::new(3, 2, rows.to_vec(), None, "nk").map_err(|e| e.to_string())?;
    let sc = spectral_cluster(&nk, 3, &SpectralParams::default()).map_err(|e| e.to_string())?;
    let mut sorted = sc.labels.clone();
    sorted.sort_unstable();
    if sorted != vec![0, 1, 2] {
        return Err(format!("n = k standard: {:?}", sc.labels));
    }
    notes.push("n = k: singletons");

    // s < k: too wide a kernel merges two blobs into one basin.
    let blobs = sep_eda::data::make_blobs(2, 30, 2, 8.0, 0.5, 1).map_err(|e| e.to_string())?;
    let wide = PipelineParams { kernel_q: Some(1e-4), ..PipelineParams::default() };
    match sep_spectral_cluster(&blobs, 4, &wide) {
        Err(Error::TooFewSeps { found, requested: 4 }) if found < 4 => notes.push("s < k: TooFewSeps"),
        other => return Err(format!("s < k: {other:?}")),
    }
    Ok(notes.join(", "))
}

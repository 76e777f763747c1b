//! Exact t-SNE and its SEP-accelerated variant.
//!
//! Affinities follow the usual construction: Gaussian conditionals
//! `p_{j|i}` calibrated per row to a target perplexity, symmetrized as
//! `p_ij = (p_{j|i} + p_{i|j}) / 2N`. The embedding uses the Student-t kernel
//! `(1 + |y_i - y_j|^2)^-1` and minimizes `KL(P || Q)` by gradient descent
//! with momentum, per-coordinate gains and early exaggeration.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::graph::sq_dist;
use crate::spectral::{cluster_seps, sep_representatives, PipelineParams, PipelineTrace, SepRepresentatives, Stopwatch};

const P_FLOOR: f64 = 1e-12;

/// Row-major `n x n` squared Euclidean distances.
pub fn squared_distances(data: &DataMatrix) -> Vec<f64> {
    let n = data.n;
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = sq_dist(data.row(i), data.row(j));
            out[i * n + j] = v;
            out[j * n + i] = v;
        }
    }
    out
}

/// Conditional row `p_{.|i}` for a given sigma; writes into `out`, returns
/// the Shannon entropy in bits.
fn conditional_row(sq_row: &[f64], i: usize, sigma: f64, out: &mut [f64]) -> f64 {
    let inv = 1.0 / (2.0 * sigma * sigma);
    let dmin = sq_row
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != i)
        .map(|(_, &d)| d)
        .fold(f64::INFINITY, f64::min);
    let mut total = 0.0;
    for (j, (o, &d)) in out.iter_mut().zip(sq_row).enumerate() {
        *o = if j == i { 0.0 } else { (-(d - dmin) * inv).exp() };
        total += *o;
    }
    let mut entropy = 0.0;
    for o in out.iter_mut() {
        *o /= total;
        if *o > 0.0 {
            entropy -= *o * o.log2();
        }
    }
    entropy
}

/// Per-row Gaussian widths whose conditionals reach the requested perplexity.
///
/// Bisection in `log sigma` over `(1e-12, 1e12)`, at most 64 steps, stopping
/// once `|2^H - perplexity| < 1e-4`.
pub fn perplexity_sigmas(sq_dists: &[f64], n: usize, perplexity: f64) -> Result<Vec<f64>> {
    if sq_dists.len() != n * n {
        return Err(Error::DimensionMismatch(format!(
            "{} distances for {n} points",
            sq_dists.len()
        )));
    }
    if !(perplexity > 1.0 && perplexity < n as f64) {
        return Err(Error::InvalidParameter(format!(
            "perplexity must satisfy 1 < perplexity < n (perplexity={perplexity}, n={n})"
        )));
    }
    let mut row = vec![0.0; n];
    let mut sigmas = Vec::with_capacity(n);
    for i in 0..n {
        let sq_row = &sq_dists[i * n..(i + 1) * n];
        let (mut lo, mut hi) = (1e-12f64.ln(), 1e12f64.ln());
        let mut mid = 0.5 * (lo + hi);
        for _ in 0..64 {
            mid = 0.5 * (lo + hi);
            let perp = conditional_row(sq_row, i, mid.exp(), &mut row).exp2();
            if (perp - perplexity).abs() < 1e-4 {
                break;
            }
            if perp > perplexity {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        sigmas.push(mid.exp());
    }
    Ok(sigmas)
}

/// Achieved perplexity `2^H(P_{.|i})` of every row for the given sigmas.
pub fn achieved_perplexities(sq_dists: &[f64], n: usize, sigmas: &[f64]) -> Vec<f64> {
    let mut row = vec![0.0; n];
    (0..n)
        .map(|i| conditional_row(&sq_dists[i * n..(i + 1) * n], i, sigmas[i], &mut row).exp2())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix {
    pub n: usize,
    /// Row-major symmetric joint probabilities, zero diagonal.
    pub p: Vec<f64>,
    pub perplexity_used: f64,
    pub sigmas: Vec<f64>,
}

impl AffinityMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.p[i * self.n + j]
    }
}

pub fn p_matrix_from_distances(sq_dists: &[f64], n: usize, perplexity: f64) -> Result<AffinityMatrix> {
    let sigmas = perplexity_sigmas(sq_dists, n, perplexity)?;
    let mut cond = vec![0.0; n * n];
    for i in 0..n {
        conditional_row(&sq_dists[i * n..(i + 1) * n], i, sigmas[i], &mut cond[i * n..(i + 1) * n]);
    }
    let mut p = vec![0.0; n * n];
    let denom = 2.0 * n as f64;
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let v = ((cond[i * n + j] + cond[j * n + i]) / denom).max(P_FLOOR);
                p[i * n + j] = v;
                total += v;
            }
        }
    }
    // The floor adds a little mass; renormalize so the joint sums to one.
    p.iter_mut().for_each(|v| *v /= total);
    Ok(AffinityMatrix {
        n,
        p,
        perplexity_used: perplexity,
        sigmas,
    })
}

pub fn p_matrix(data: &DataMatrix, perplexity: f64) -> Result<AffinityMatrix> {
    p_matrix_from_distances(&squared_distances(data), data.n, perplexity)
}

/// Student-t joint similarities of a row-major `n x 2` embedding.
pub fn q_matrix(coords: &[f64]) -> Vec<f64> {
    let n = coords.len() / 2;
    let mut q = vec![0.0; n * n];
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let v = 1.0 / (1.0 + sq_dist(&coords[2 * i..2 * i + 2], &coords[2 * j..2 * j + 2]));
            q[i * n + j] = v;
            q[j * n + i] = v;
            total += 2.0 * v;
        }
    }
    if total > 0.0 {
        q.iter_mut().for_each(|v| *v /= total);
    }
    q
}

/// `sum_{i != j} p_ij log(p_ij / q_ij)` with `0 log 0 = 0`.
pub fn kl_cost(p: &AffinityMatrix, q: &[f64]) -> Result<f64> {
    kl_divergence(&p.p, q, p.n)
}

pub fn kl_divergence(p: &[f64], q: &[f64], n: usize) -> Result<f64> {
    if p.len() != n * n || q.len() != n * n {
        return Err(Error::DimensionMismatch("P and Q must both be n x n".into()));
    }
    let mut c = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let (pv, qv) = (p[i * n + j], q[i * n + j]);
            if pv > 0.0 {
                if qv <= 0.0 {
                    return Err(Error::Numerical(format!(
                        "q[{i}][{j}] = 0 where p > 0: degenerate embedding"
                    )));
                }
                c += pv * (pv / qv).ln();
            }
        }
    }
    Ok(c.max(0.0))
}

/// Analytic gradient `4 sum_j (p_ij - q_ij)(y_i - y_j) / (1 + |y_i - y_j|^2)`
/// with `P` scaled by `exaggeration`. Returns the unscaled KL cost as well.
pub fn kl_gradient(p: &[f64], coords: &[f64], exaggeration: f64, grad: &mut [f64]) -> f64 {
    gradient_impl(p, coords, exaggeration, grad, true)
}

// One pass over the pairs: the attractive part `sum p_ij w_ij (y_i - y_j)`
// and the repulsive part `sum w_ij^2 (y_i - y_j)` are accumulated apart, so
// the normalizer Z is only needed at the end.
fn gradient_impl(p: &[f64], coords: &[f64], exaggeration: f64, grad: &mut [f64], with_cost: bool) -> f64 {
    let n = coords.len() / 2;
    let mut attract = vec![0.0; 2 * n];
    let mut repulse = vec![0.0; 2 * n];
    let mut z = 0.0;
    // sum p_ij log p_ij and sum p_ij log w_ij, for the cost.
    let (mut p_log_p, mut p_log_w) = (0.0, 0.0);
    for i in 0..n {
        let (xi, yi) = (coords[2 * i], coords[2 * i + 1]);
        let row = &p[i * n..(i + 1) * n];
        for j in i + 1..n {
            let (dx, dy) = (xi - coords[2 * j], yi - coords[2 * j + 1]);
            let w = 1.0 / (1.0 + dx * dx + dy * dy);
            z += 2.0 * w;
            let pw = row[j] * w;
            let ww = w * w;
            attract[2 * i] += pw * dx;
            attract[2 * i + 1] += pw * dy;
            attract[2 * j] -= pw * dx;
            attract[2 * j + 1] -= pw * dy;
            repulse[2 * i] += ww * dx;
            repulse[2 * i + 1] += ww * dy;
            repulse[2 * j] -= ww * dx;
            repulse[2 * j + 1] -= ww * dy;
            if with_cost && row[j] > 0.0 {
                p_log_p += 2.0 * row[j] * row[j].ln();
                p_log_w += 2.0 * row[j] * w.ln();
            }
        }
    }
    let inv_z = 1.0 / z;
    for ((g, a), r) in grad.iter_mut().zip(&attract).zip(&repulse) {
        *g = 4.0 * (exaggeration * a - r * inv_z);
    }
    if !with_cost {
        return 0.0;
    }
    // KL = sum p log p - sum p log w + (sum p) log Z.
    let p_mass: f64 = p.iter().sum();
    p_log_p - p_log_w + p_mass * z.ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TsneParams {
    pub perplexity: f64,
    pub iters: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub final_momentum: f64,
    pub exaggeration: f64,
    pub exaggeration_iters: usize,
    pub seed: u64,
}

impl Default for TsneParams {
    fn default() -> Self {
        TsneParams {
            perplexity: 30.0,
            iters: 1000,
            learning_rate: 200.0,
            momentum: 0.5,
            final_momentum: 0.8,
            exaggeration: 12.0,
            exaggeration_iters: 250,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding2D {
    /// Row-major `n x 2`.
    pub coords: Vec<f64>,
    pub initial_kl: f64,
    pub final_kl: f64,
    pub iters_run: usize,
}

pub fn tsne_embed(p: &AffinityMatrix, params: &TsneParams) -> Result<Embedding2D> {
    if params.iters == 0 {
        return Err(Error::InvalidParameter("t-SNE needs at least one iteration".into()));
    }
    let n = p.n;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let normal = Normal::new(0.0, 1e-4).expect("valid normal");
    let mut y: Vec<f64> = (0..2 * n).map(|_| normal.sample(&mut rng)).collect();
    let mut grad = vec![0.0; 2 * n];
    let mut update = vec![0.0; 2 * n];
    let mut gains = vec![1.0f64; 2 * n];

    let initial_kl = kl_gradient(&p.p, &y, 1.0, &mut grad);
    for iter in 0..params.iters {
        let exaggerate = iter < params.exaggeration_iters;
        let factor = if exaggerate { params.exaggeration } else { 1.0 };
        let momentum = if iter < params.exaggeration_iters {
            params.momentum
        } else {
            params.final_momentum
        };
        gradient_impl(&p.p, &y, factor, &mut grad, false);
        for i in 0..2 * n {
            gains[i] = if (grad[i] > 0.0) != (update[i] > 0.0) {
                gains[i] + 0.2
            } else {
                (gains[i] * 0.8).max(0.01)
            };
            update[i] = momentum * update[i] - params.learning_rate * gains[i] * grad[i];
            y[i] += update[i];
        }
        for c in 0..2 {
            let mean = (0..n).map(|i| y[2 * i + c]).sum::<f64>() / n as f64;
            (0..n).for_each(|i| y[2 * i + c] -= mean);
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "t-SNE coordinates became non-finite at iteration {iter}"
            )));
        }
    }
    let final_kl = kl_gradient(&p.p, &y, 1.0, &mut grad);
    Ok(Embedding2D {
        coords: y,
        initial_kl,
        final_kl: final_kl.max(0.0),
        iters_run: params.iters,
    })
}

/// Perplexity usable on `n` points: the request capped at `(n - 1) / 3`.
pub fn effective_perplexity(requested: f64, n: usize) -> f64 {
    requested.min(((n as f64) - 1.0) / 3.0).max(1.0 + 1e-3)
}

pub fn exact_tsne(data: &DataMatrix, params: &TsneParams) -> Result<(Embedding2D, PipelineTrace)> {
    if data.n < 3 {
        return Err(Error::InvalidParameter(format!(
            "t-SNE needs at least 3 points, got {}",
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
    let perplexity = effective_perplexity(params.perplexity, data.n);
    let p = watch.time("affinity", || p_matrix(data, perplexity))?;
    let embedding = watch.time("tsne", || tsne_embed(&p, params))?;
    Ok((embedding, trace))
}

#[derive(Debug, Clone)]
pub struct SepTsne {
    pub embedding: Embedding2D,
    pub reps: SepRepresentatives,
    /// Fine-point membership per SEP (marker size).
    pub sizes: Vec<usize>,
    /// Per-SEP color: cluster label when a cluster count was given, else the
    /// majority ground-truth label when the data is labeled.
    pub colors: Option<Vec<usize>>,
    pub trace: PipelineTrace,
}

/// Majority ground-truth label of each SEP's fine members (ties to lower label).
pub fn sep_majority_labels(fine_assignment: &[usize], truth: &[usize], s: usize) -> Vec<usize> {
    let classes = truth.iter().copied().max().map_or(0, |m| m + 1);
    let mut counts = vec![0usize; s * classes];
    for (&sep, &t) in fine_assignment.iter().zip(truth) {
        counts[sep * classes + t] += 1;
    }
    (0..s)
        .map(|i| {
            let row = &counts[i * classes..(i + 1) * classes];
            row.iter()
                .enumerate()
                .fold((0, 0), |best, (c, &v)| if v > best.1 { (c, v) } else { best })
                .0
        })
        .collect()
}

/// Classes whose SEPs mostly sit next to SEPs of the same class in the embedding.
///
/// Every SEP carries its majority ground-truth label. A class passes when more
/// than half of the SEPs labeled with it have a nearest embedded neighbor
/// (another SEP) with the same label. Returns the passing class count.
pub fn majority_pure_classes(coords: &[f64], sep_labels: &[usize]) -> usize {
    let s = sep_labels.len();
    let classes = sep_labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut agree = vec![0usize; classes];
    let mut total = vec![0usize; classes];
    for i in 0..s {
        let nearest = (0..s)
            .filter(|&j| j != i)
            .map(|j| (j, sq_dist(&coords[2 * i..2 * i + 2], &coords[2 * j..2 * j + 2])))
            .fold(None::<(usize, f64)>, |best, cur| match best {
                Some(b) if b.1 <= cur.1 => Some(b),
                _ => Some(cur),
            });
        total[sep_labels[i]] += 1;
        if let Some((j, _)) = nearest {
            if sep_labels[j] == sep_labels[i] {
                agree[sep_labels[i]] += 1;
            }
        }
    }
    (0..classes).filter(|&c| total[c] > 0 && 2 * agree[c] > total[c]).count()
}

/// Embed the SEP representative set instead of every sample.
pub fn sep_tsne(
    data: &DataMatrix,
    k_for_color: Option<usize>,
    params: &PipelineParams,
    tsne: &TsneParams,
) -> Result<SepTsne> {
    let reps = sep_representatives(data, params)?;
    let s = reps.seps.s;
    if s < 3 {
        return Err(Error::TooFewSeps {
            found: s,
            requested: 3,
        });
    }
    let mut trace = reps.trace.clone();
    let sep_data = reps.sep_matrix("seps");
    let perplexity = effective_perplexity(tsne.perplexity, s);
    let mut watch = Stopwatch::new(&mut trace);
    let p = watch.time("affinity", || p_matrix(&sep_data, perplexity))?;
    let embedding = watch.time("tsne", || tsne_embed(&p, tsne))?;
    let colors = match (k_for_color, &data.labels) {
        (Some(k), _) if k >= 2 && k <= s => Some(cluster_seps(&reps, k, params, &mut watch)?.labels),
        (_, Some(truth)) => Some(sep_majority_labels(&reps.fine_assignment(), truth, s)),
        _ => None,
    };
    let sizes = reps.fine_counts();
    Ok(SepTsne {
        embedding,
        reps,
        sizes,
        colors,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    // Unit basis vectors: every squared distance is exactly 2.
    fn equilateral() -> DataMatrix {
        DataMatrix::from_rows(
            &[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
            None,
            "tri",
        )
        .unwrap()
    }

    #[test]
    fn equidistant_points() {
        let data = equilateral();
        let d = squared_distances(&data);
        for perp in [1.5, 2.0, 2.5] {
            let sig = perplexity_sigmas(&d, 3, perp).unwrap();
            assert!(sig[0] == sig[1] && sig[1] == sig[2]);
        }
        let p = p_matrix(&data, 1.5).unwrap();
        for i in 0..3 {
            assert_eq!(p.get(i, i), 0.0);
            for j in 0..3 {
                if i != j {
                    assert!((p.get(i, j) - 1.0 / 6.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn perplexity_range_checked() {
        let d = squared_distances(&equilateral());
        assert!(perplexity_sigmas(&d, 3, 1.0).is_err());
        assert!(perplexity_sigmas(&d, 3, 3.0).is_err());
    }

    #[test]
    fn two_point_q() {
        let q = q_matrix(&[0.0, 0.0, 7.0, -2.0]);
        assert_eq!(q, vec![0.0, 0.5, 0.5, 0.0]);
    }

    #[test]
    fn kl_zero_for_equal() {
        let q = q_matrix(&[0.0, 0.0, 1.0, 0.0, 0.0, 2.0]);
        let p = AffinityMatrix {
            n: 3,
            p: q.clone(),
            perplexity_used: 2.0,
            sigmas: vec![1.0; 3],
        };
        assert!(kl_cost(&p, &q).unwrap().abs() < 1e-15);
    }

    #[test]
    fn kl_by_hand() {
        // Off-diagonal p = (0.1, 0.2, 0.2 | ...) symmetric; q uniform 1/6.
        let p = vec![0.0, 0.1, 0.2, 0.1, 0.0, 0.2, 0.2, 0.2, 0.0];
        let total: f64 = p.iter().sum();
        let p: Vec<f64> = p.iter().map(|v| v / total).collect();
        let q = vec![0.0, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0, 0.0, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0, 0.0];
        let mut expected = 0.0;
        for v in [0.1, 0.2, 0.2, 0.1, 0.2, 0.2] {
            let pv = v / total;
            expected += pv * (pv * 6.0f64).ln();
        }
        assert!((kl_divergence(&p, &q, 3).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn majority_labels_and_purity() {
        let assign = [0, 0, 0, 1, 1, 2];
        let truth = [3, 3, 1, 0, 0, 0];
        assert_eq!(sep_majority_labels(&assign, &truth, 3), vec![3, 0, 0]);
        // SEPs 1 and 2 (both class 0) are mutual nearest neighbors; SEP 0 alone.
        let coords = [10.0, 10.0, 0.0, 0.0, 0.1, 0.0];
        assert_eq!(majority_pure_classes(&coords, &[3, 0, 0]), 1);
    }
}

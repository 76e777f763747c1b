//! k-means++ seeding with Lloyd iterations and best-of-restarts selection.
//!
//! Rows may carry positive weights (a row standing for several samples);
//! seeding, centroids and inertia then count each row that many times.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::sq_dist;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
    pub k: usize,
    pub inertia: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansRun {
    pub assignment: ClusterAssignment,
    pub centroids: Vec<f64>,
    /// Inertia after each centroid update.
    pub history: Vec<f64>,
    pub iterations: usize,
}

fn nearest(row: &[f64], centroids: &[f64], p: usize) -> (usize, f64) {
    centroids
        .chunks_exact(p)
        .enumerate()
        .map(|(c, ctr)| (c, sq_dist(row, ctr)))
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
}

fn plus_plus(rows: &[f64], n: usize, p: usize, k: usize, w: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let row = |i: usize| &rows[i * p..(i + 1) * p];
    let mut centroids = Vec::with_capacity(k * p);
    let first = rng.random_range(0..n);
    centroids.extend_from_slice(row(first));
    let mut d2: Vec<f64> = (0..n).map(|i| w[i] * sq_dist(row(i), row(first))).collect();
    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let start = centroids.len();
        centroids.extend_from_slice(row(pick));
        for (i, slot) in d2.iter_mut().enumerate() {
            *slot = slot.min(w[i] * sq_dist(row(i), &centroids[start..start + p]));
        }
    }
    centroids
}

/// One seeded k-means run.
pub fn kmeans_once(rows: &[f64], p: usize, k: usize, seed: u64, max_iter: usize) -> Result<KMeansRun> {
    kmeans_once_weighted(rows, p, k, None, seed, max_iter)
}

fn check_weights(weights: Option<&[f64]>, n: usize) -> Result<Vec<f64>> {
    match weights {
        None => Ok(vec![1.0; n]),
        Some(w) if w.len() != n => Err(Error::DimensionMismatch(format!("{} weights for {n} rows", w.len()))),
        Some(w) if w.iter().any(|&x| !(x > 0.0 && x.is_finite())) => {
            Err(Error::InvalidParameter("k-means weights must be positive and finite".into()))
        }
        Some(w) => Ok(w.to_vec()),
    }
}

pub fn kmeans_once_weighted(
    rows: &[f64],
    p: usize,
    k: usize,
    weights: Option<&[f64]>,
    seed: u64,
    max_iter: usize,
) -> Result<KMeansRun> {
    if p == 0 || rows.len() % p != 0 {
        return Err(Error::DimensionMismatch("rows not a multiple of the row width".into()));
    }
    let n = rows.len() / p;
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!(
            "k-means needs 1 <= k <= n (k={k}, n={n})"
        )));
    }
    let w = check_weights(weights, n)?;
    let row = |i: usize| &rows[i * p..(i + 1) * p];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus(rows, n, p, k, &w, &mut rng);
    let mut labels = vec![usize::MAX; n];
    let mut history = Vec::new();
    let mut iterations = 0;

    loop {
        let mut changed = false;
        for i in 0..n {
            let (c, _) = nearest(row(i), &centroids, p);
            if labels[i] != c {
                labels[i] = c;
                changed = true;
            }
        }
        if !changed && iterations > 0 {
            break;
        }

        // Empty clusters take the point farthest from its own current centroid.
        let mut sizes = vec![0usize; k];
        labels.iter().for_each(|&l| sizes[l] += 1);
        for empty in 0..k {
            if sizes[empty] > 0 {
                continue;
            }
            let far = (0..n)
                .filter(|&i| sizes[labels[i]] > 1)
                .map(|i| (i, sq_dist(row(i), &centroids[labels[i] * p..(labels[i] + 1) * p])))
                .fold(None::<(usize, f64)>, |best, cur| match best {
                    Some(b) if b.1 >= cur.1 => Some(b),
                    _ => Some(cur),
                });
            if let Some((i, _)) = far {
                sizes[labels[i]] -= 1;
                labels[i] = empty;
                sizes[empty] = 1;
            }
        }

        let mut sums = vec![0.0; k * p];
        let mut mass = vec![0.0; k];
        for (i, &l) in labels.iter().enumerate() {
            mass[l] += w[i];
            sums[l * p..(l + 1) * p]
                .iter_mut()
                .zip(row(i))
                .for_each(|(s, v)| *s += w[i] * v);
        }
        for c in 0..k {
            if sizes[c] > 0 {
                let inv = 1.0 / mass[c];
                for (dst, s) in centroids[c * p..(c + 1) * p].iter_mut().zip(&sums[c * p..(c + 1) * p]) {
                    *dst = s * inv;
                }
            }
        }
        iterations += 1;
        history.push(inertia(rows, p, &w, &labels, &centroids));
        if iterations >= max_iter {
            break;
        }
    }
    let inertia = history.last().copied().unwrap_or(0.0);
    Ok(KMeansRun {
        assignment: ClusterAssignment { labels, k, inertia },
        centroids,
        history,
        iterations,
    })
}

fn inertia(rows: &[f64], p: usize, w: &[f64], labels: &[usize], centroids: &[f64]) -> f64 {
    labels
        .iter()
        .enumerate()
        .map(|(i, &l)| w[i] * sq_dist(&rows[i * p..(i + 1) * p], &centroids[l * p..(l + 1) * p]))
        .sum()
}

/// Best of `restarts` seeded runs by inertia (earliest restart wins ties).
pub fn kmeans(
    rows: &[f64],
    p: usize,
    k: usize,
    seed: u64,
    max_iter: usize,
    restarts: usize,
) -> Result<ClusterAssignment> {
    kmeans_weighted(rows, p, k, None, seed, max_iter, restarts)
}

pub fn kmeans_weighted(
    rows: &[f64],
    p: usize,
    k: usize,
    weights: Option<&[f64]>,
    seed: u64,
    max_iter: usize,
    restarts: usize,
) -> Result<ClusterAssignment> {
    let mut best: Option<ClusterAssignment> = None;
    for r in 0..restarts.max(1) {
        let run_seed = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(r as u64);
        let run = kmeans_once_weighted(rows, p, k, weights, run_seed, max_iter)?;
        if best.as_ref().is_none_or(|b| run.assignment.inertia < b.inertia) {
            best = Some(run.assignment);
        }
    }
    Ok(best.expect("at least one restart"))
}

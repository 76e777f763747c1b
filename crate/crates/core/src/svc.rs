//! Minimal enclosing hypersphere in Gaussian-kernel feature space.
//!
//! The dual `max_beta sum_j beta_j K_jj - beta' K beta` subject to
//! `sum beta = 1, 0 <= beta <= C` is solved by pairwise coordinate ascent.
//! Because `K_jj = 1` for the Gaussian kernel the objective reduces to
//! `1 - beta' K beta`.
//!
//! The fitted model evaluates the squared kernel-space distance to the
//! sphere center,
//!
//! ```text
//! f(x) = K(x, x) - 2 sum_j beta_j K(x_j, x) + sum_ij beta_i beta_j K(x_i, x_j)
//! ```
//!
//! and its analytic gradient `4 q sum_j beta_j K(x_j, x) (x - x_j)`.

use crate::error::{Error, Result};
use crate::graph::sq_dist;

#[inline]
pub fn kernel_value(x: &[f64], y: &[f64], q: f64) -> f64 {
    (-q * sq_dist(x, y)).exp()
}

/// Kernel width `1 / (2 median^2)` of pairwise distances on an evenly strided
/// subsample of at most 1000 rows.
pub fn default_kernel_q(points: &[f64], d: usize) -> f64 {
    let m = points.len() / d;
    let take = m.min(1000);
    let idx: Vec<usize> = (0..take).map(|i| i * m / take).collect();
    let mut sq = Vec::with_capacity(take * (take.saturating_sub(1)) / 2);
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            sq.push(sq_dist(&points[i * d..(i + 1) * d], &points[j * d..(j + 1) * d]));
        }
    }
    if sq.is_empty() {
        return 1.0;
    }
    let mid = sq.len() / 2;
    let (_, median, _) = sq.select_nth_unstable_by(mid, f64::total_cmp);
    if *median > 0.0 {
        1.0 / (2.0 * *median)
    } else {
        1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SphereModel {
    pub m: usize,
    pub d: usize,
    /// Row-major `m x d` training points.
    pub points: Vec<f64>,
    pub beta: Vec<f64>,
    pub q: f64,
    pub c_upper: f64,
    pub self_term: f64,
    pub r_sq: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Dual objective after every accepted pair update (first entry: start).
    pub objective_trace: Vec<f64>,
    support: Vec<usize>,
}

#[derive(Debug, Clone, Copy)]
pub struct SphereFitOptions {
    pub tol: f64,
    pub max_iter: Option<usize>,
    pub record_trace: bool,
}

impl Default for SphereFitOptions {
    fn default() -> Self {
        SphereFitOptions {
            tol: 1e-6,
            max_iter: None,
            record_trace: false,
        }
    }
}

pub fn fit_sphere(points: &[f64], d: usize, q: f64, c_upper: f64) -> Result<SphereModel> {
    fit_sphere_with(points, d, q, c_upper, SphereFitOptions::default())
}

pub fn fit_sphere_with(
    points: &[f64],
    d: usize,
    q: f64,
    c_upper: f64,
    opts: SphereFitOptions,
) -> Result<SphereModel> {
    if d == 0 || points.is_empty() || points.len() % d != 0 {
        return Err(Error::InvalidParameter(
            "sphere fit needs at least one d-dimensional point".into(),
        ));
    }
    if !(q > 0.0 && q.is_finite()) {
        return Err(Error::InvalidParameter(format!("kernel width q must be > 0, got {q}")));
    }
    let m = points.len() / d;
    if !(c_upper > 0.0 && c_upper <= 1.0) || c_upper * (m as f64) < 1.0 - 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "box bound C={c_upper} infeasible for {m} points (need 1/m <= C <= 1)"
        )));
    }

    let row = |i: usize| &points[i * d..(i + 1) * d];
    let mut kmat = vec![0.0; m * m];
    for i in 0..m {
        kmat[i * m + i] = 1.0;
        for j in i + 1..m {
            let v = kernel_value(row(i), row(j), q);
            kmat[i * m + j] = v;
            kmat[j * m + i] = v;
        }
    }

    // Fill the box in index order until the multipliers sum to one.
    let mut beta = vec![0.0; m];
    let mut remaining = 1.0f64;
    for b in beta.iter_mut() {
        if remaining <= 0.0 {
            break;
        }
        *b = remaining.min(c_upper);
        remaining -= *b;
    }

    // grad_i = dW/dbeta_i = 1 - 2 (K beta)_i
    let mut grad = vec![1.0; m];
    for (j, &bj) in beta.iter().enumerate() {
        if bj != 0.0 {
            for i in 0..m {
                grad[i] -= 2.0 * bj * kmat[i * m + j];
            }
        }
    }
    let objective = |beta: &[f64], grad: &[f64]| -> f64 {
        // W = 1 - b'Kb and grad = 1 - 2Kb  =>  b'Kb = (1 - b'grad) / 2.
        let bg: f64 = beta.iter().zip(grad).map(|(b, g)| b * g).sum();
        1.0 - (1.0 - bg) / 2.0
    };

    let max_iter = opts.max_iter.unwrap_or_else(|| (100 * m).max(100_000));
    let bound_eps = 1e-12 * c_upper;
    let mut trace = Vec::new();
    if opts.record_trace {
        trace.push(objective(&beta, &grad));
    }
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        // Most violating pair: raise the largest gradient, lower the smallest.
        let mut up: Option<usize> = None;
        let mut low: Option<usize> = None;
        for i in 0..m {
            if beta[i] < c_upper - bound_eps && up.is_none_or(|u| grad[i] > grad[u]) {
                up = Some(i);
            }
            if beta[i] > bound_eps && low.is_none_or(|l| grad[i] < grad[l]) {
                low = Some(i);
            }
        }
        let (Some(u), Some(l)) = (up, low) else {
            converged = true;
            break;
        };
        let violation = grad[u] - grad[l];
        if violation < opts.tol || u == l {
            converged = true;
            break;
        }
        let eta = 2.0 * (2.0 - 2.0 * kmat[u * m + l]);
        let cap = (c_upper - beta[u]).min(beta[l]);
        let step = if eta > 1e-15 {
            (violation / eta).min(cap)
        } else {
            cap
        };
        beta[u] += step;
        beta[l] -= step;
        for i in 0..m {
            grad[i] -= 2.0 * step * (kmat[i * m + u] - kmat[i * m + l]);
        }
        iterations += 1;
        if opts.record_trace {
            trace.push(objective(&beta, &grad));
        }
    }

    let bkb = (1.0 - beta.iter().zip(&grad).map(|(b, g)| b * g).sum::<f64>()) / 2.0;
    let self_term = bkb.clamp(f64::MIN_POSITIVE, 1.0);
    let f_train: Vec<f64> = grad.iter().map(|g| (g + self_term).max(0.0)).collect();

    let free: Vec<usize> = (0..m)
        .filter(|&i| beta[i] > bound_eps && beta[i] < c_upper - bound_eps)
        .collect();
    let r_sq = if !free.is_empty() {
        free.iter().map(|&i| f_train[i]).sum::<f64>() / free.len() as f64
    } else {
        // No free multiplier: any radius between the interior and bounded sets works.
        let lower = (0..m)
            .filter(|&i| beta[i] <= bound_eps)
            .map(|i| f_train[i])
            .fold(0.0f64, f64::max);
        let upper = (0..m)
            .filter(|&i| beta[i] >= c_upper - bound_eps)
            .map(|i| f_train[i])
            .fold(f64::INFINITY, f64::min);
        let bounded: Vec<f64> = (0..m).filter(|&i| beta[i] > bound_eps).map(|i| f_train[i]).collect();
        let mean = bounded.iter().sum::<f64>() / bounded.len().max(1) as f64;
        mean.clamp(lower, upper.max(lower))
    };

    let support = (0..m).filter(|&i| beta[i] > 0.0).collect();
    Ok(SphereModel {
        m,
        d,
        points: points.to_vec(),
        beta,
        q,
        c_upper,
        self_term,
        r_sq,
        converged,
        iterations,
        objective_trace: trace,
        support,
    })
}

impl SphereModel {
    pub fn point(&self, j: usize) -> &[f64] {
        &self.points[j * self.d..(j + 1) * self.d]
    }

    /// Indices with a nonzero multiplier.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn dual_objective(&self) -> f64 {
        1.0 - self.self_term
    }

    /// Weighted kernel sum `sum_j beta_j K(x_j, x)`.
    pub fn kernel_mass(&self, x: &[f64]) -> f64 {
        self.support
            .iter()
            .map(|&j| self.beta[j] * kernel_value(self.point(j), x, self.q))
            .sum()
    }

    pub fn radius_sq(&self, x: &[f64]) -> f64 {
        (1.0 - 2.0 * self.kernel_mass(x) + self.self_term).max(0.0)
    }

    pub fn radius_grad(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.d];
        self.radius_grad_into(x, &mut g);
        g
    }

    /// Gradient into `out`; returns the kernel mass as a by-product.
    pub fn radius_grad_into(&self, x: &[f64], out: &mut [f64]) -> f64 {
        out.iter_mut().for_each(|o| *o = 0.0);
        let mut mass = 0.0;
        for &j in &self.support {
            let xj = self.point(j);
            let w = self.beta[j] * kernel_value(xj, x, self.q);
            mass += w;
            for ((o, a), b) in out.iter_mut().zip(x).zip(xj) {
                *o += w * (a - b);
            }
        }
        let scale = 4.0 * self.q;
        out.iter_mut().for_each(|o| *o *= scale);
        mass
    }

    /// Largest KKT residual over the training points, in units of `f`.
    pub fn kkt_residual(&self) -> f64 {
        let eps = 1e-12 * self.c_upper;
        (0..self.m)
            .map(|j| {
                let f = self.radius_sq(self.point(j));
                if self.beta[j] <= eps {
                    (f - self.r_sq).max(0.0)
                } else if self.beta[j] >= self.c_upper - eps {
                    (self.r_sq - f).max(0.0)
                } else {
                    (f - self.r_sq).abs()
                }
            })
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_examples() {
        assert_eq!(kernel_value(&[1.0, 2.0], &[1.0, 2.0], 3.0), 1.0);
        let q = 0.7;
        let r = (2f64.ln() / q).sqrt();
        assert!((kernel_value(&[0.0], &[r], q) - 0.5).abs() < 1e-14);
        let (a, b) = ([0.3, -1.0], [2.0, 0.5]);
        assert_eq!(kernel_value(&a, &b, q), kernel_value(&b, &a, q));
    }

    #[test]
    fn single_point_model() {
        let model = fit_sphere(&[0.4, 0.6], 2, 2.0, 1.0).unwrap();
        assert_eq!(model.beta, vec![1.0]);
        assert!(model.r_sq.abs() < 1e-15);
        assert!(model.radius_sq(&[0.4, 0.6]).abs() < 1e-15);
        assert!(model.radius_grad(&[0.4, 0.6]).iter().all(|g| *g == 0.0));
        let far = model.radius_sq(&[1e6, 1e6]);
        assert!((far - (1.0 + model.self_term)).abs() < 1e-12);
    }

    #[test]
    fn duplicate_points() {
        let model = fit_sphere(&[1.0, 1.0, 1.0, 1.0], 2, 1.0, 1.0).unwrap();
        assert!((model.beta.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(model.r_sq.abs() < 1e-12);
    }

    #[test]
    fn symmetric_pair_midpoint() {
        let q = 0.5;
        let model = fit_sphere(&[-1.0, 0.0, 1.0, 0.0], 2, q, 1.0).unwrap();
        assert!((model.beta[0] - 0.5).abs() < 1e-9);
        // Hand expansion: f(mid) = 1 - 2 * exp(-q) + (1 + exp(-4q)) / 2.
        let expected = 1.0 - 2.0 * (-q).exp() + 0.5 * (1.0 + (-4.0 * q).exp());
        assert!((model.radius_sq(&[0.0, 0.0]) - expected).abs() < 1e-9);
        let g = model.radius_grad(&[0.0, 0.0]);
        assert!(g.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn infeasible_box_rejected() {
        assert!(fit_sphere(&[0.0, 1.0, 2.0], 1, 1.0, 0.2).is_err());
        assert!(fit_sphere(&[0.0], 1, -1.0, 1.0).is_err());
    }

    #[test]
    fn default_q_uses_median() {
        // Pairwise squared distances on points 0,1,3: {1, 9, 4}; median 4.
        let q = default_kernel_q(&[0.0, 1.0, 3.0], 1);
        assert!((q - 1.0 / 8.0).abs() < 1e-15);
    }
}

//! Stable equilibrium points of the squared radial distance.
//!
//! Each training point follows the descent flow `dx/dt = -grad f(x)` to a local
//! minimum of `f`. Endpoints closer than a merge tolerance are fused by
//! single linkage; the fused centroids are the stable equilibrium points.

use crate::error::{Error, Result};
use crate::graph::sq_dist;
use crate::svc::SphereModel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentOptions {
    pub step0: f64,
    pub grad_tol: f64,
    pub max_iters: usize,
    /// Divide the step by the local kernel mass `sum_j beta_j K(x_j, x)`.
    ///
    /// The gradient is `4q P(x) (x - m(x))` with `m(x)` the kernel-weighted
    /// mean of the support vectors, so its size collapses wherever `P(x)` is
    /// small. With the scaling a step of `1 / (4q)` lands exactly on `m(x)`
    /// (a mean-shift update) regardless of `P(x)`. The flow and its
    /// equilibria are unchanged; only the time parametrization differs.
    pub mass_scaled: bool,
}

impl DescentOptions {
    /// Defaults scaled to the model: `step0 = 0.1 / (4 q)`, unscaled steps.
    pub fn for_model(model: &SphereModel) -> Self {
        DescentOptions {
            step0: 0.1 / (4.0 * model.q),
            grad_tol: 1e-5,
            max_iters: 500,
            mass_scaled: false,
        }
    }

    /// Mass-scaled steps of `1 / (4 q)`: full mean-shift moves.
    pub fn mean_shift(model: &SphereModel) -> Self {
        DescentOptions {
            step0: 1.0 / (4.0 * model.q),
            mass_scaled: true,
            ..DescentOptions::for_model(model)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Descent {
    pub point: Vec<f64>,
    pub iters: usize,
    pub converged: bool,
    pub grad_norm: f64,
    /// `f` at the start and after every accepted step.
    pub values: Vec<f64>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Explicit Euler on the gradient flow with backtracking.
///
/// The step halves whenever `f` would increase and resets to its initial
/// value after every accepted step, so `f` is non-increasing along the returned path.
pub fn descend(model: &SphereModel, x0: &[f64], opts: DescentOptions) -> Result<Descent> {
    if !(opts.step0 > 0.0) || !(opts.grad_tol > 0.0) {
        return Err(Error::InvalidParameter(
            "descent needs step0 > 0 and grad_tol > 0".into(),
        ));
    }
    let d = model.d;
    let mut x = x0.to_vec();
    let mut grad = vec![0.0; d];
    let mut trial = vec![0.0; d];
    let mut mass = model.radius_grad_into(&x, &mut grad);
    let mut fx = model.radius_sq(&x);
    let mut values = vec![fx];
    let mut iters = 0;

    loop {
        let gn = norm(&grad);
        if gn < opts.grad_tol {
            return Ok(Descent {
                point: x,
                iters,
                converged: true,
                grad_norm: gn,
                values,
            });
        }
        if iters >= opts.max_iters {
            return Ok(Descent {
                point: x,
                iters,
                converged: false,
                grad_norm: gn,
                values,
            });
        }
        let mut eta = if opts.mass_scaled && mass > 1e-300 {
            opts.step0 / mass
        } else {
            opts.step0
        };
        let mut accepted = false;
        // 60 halvings take the step below 1e-18 * step0.
        for _ in 0..60 {
            for ((t, xi), gi) in trial.iter_mut().zip(&x).zip(&grad) {
                *t = xi - eta * gi;
            }
            let ft = model.radius_sq(&trial);
            if ft <= fx {
                std::mem::swap(&mut x, &mut trial);
                fx = ft;
                accepted = true;
                break;
            }
            eta *= 0.5;
        }
        iters += 1;
        if !accepted {
            // No representable decrease: x is a minimum to working precision.
            let gn = norm(&grad);
            return Ok(Descent {
                point: x,
                iters,
                converged: gn < opts.grad_tol,
                grad_norm: gn,
                values,
            });
        }
        values.push(fx);
        mass = model.radius_grad_into(&x, &mut grad);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SepSet {
    pub s: usize,
    pub d: usize,
    /// Row-major `s x d` equilibrium coordinates.
    pub seps: Vec<f64>,
    /// SEP index for every training point.
    pub assignment: Vec<usize>,
    pub iterations: Vec<usize>,
    pub converged: Vec<bool>,
    pub grad_norms: Vec<f64>,
    /// More than 10% of the trajectories failed to converge.
    pub degraded: bool,
}

impl SepSet {
    pub fn sep(&self, i: usize) -> &[f64] {
        &self.seps[i * self.d..(i + 1) * self.d]
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.s];
        for &a in &self.assignment {
            counts[a] += 1;
        }
        counts
    }
}

/// Union-find single-linkage grouping; groups are numbered by lowest member.
fn single_linkage(points: &[f64], d: usize, tol: f64) -> Vec<usize> {
    let m = points.len() / d;
    let mut parent: Vec<usize> = (0..m).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let tol_sq = tol * tol;
    for i in 0..m {
        for j in i + 1..m {
            if sq_dist(&points[i * d..(i + 1) * d], &points[j * d..(j + 1) * d]) <= tol_sq {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut label = vec![usize::MAX; m];
    let mut next = 0;
    let mut out = vec![0; m];
    for i in 0..m {
        let root = find(&mut parent, i);
        if label[root] == usize::MAX {
            label[root] = next;
            next += 1;
        }
        out[i] = label[root];
    }
    out
}

fn centroids(points: &[f64], d: usize, groups: &[usize], count: usize) -> Vec<f64> {
    let mut sums = vec![0.0; count * d];
    let mut sizes = vec![0usize; count];
    for (i, &g) in groups.iter().enumerate() {
        sizes[g] += 1;
        for (s, v) in sums[g * d..(g + 1) * d].iter_mut().zip(&points[i * d..(i + 1) * d]) {
            *s += v;
        }
    }
    for (g, &size) in sizes.iter().enumerate() {
        let inv = 1.0 / size as f64;
        sums[g * d..(g + 1) * d].iter_mut().for_each(|s| *s *= inv);
    }
    sums
}

/// Largest pairwise distance between rows.
pub fn diameter(points: &[f64], d: usize) -> f64 {
    let m = points.len() / d;
    let mut best = 0.0f64;
    for i in 0..m {
        for j in i + 1..m {
            best = best.max(sq_dist(&points[i * d..(i + 1) * d], &points[j * d..(j + 1) * d]));
        }
    }
    best.sqrt()
}

/// Descend from every training point and merge coincident endpoints.
pub fn find_seps(
    model: &SphereModel,
    points: &[f64],
    opts: DescentOptions,
    merge_tol: f64,
) -> Result<SepSet> {
    let d = model.d;
    if points.len() % d != 0 || points.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "{} coordinates is not a whole number of {d}-dimensional points",
            points.len()
        )));
    }
    let m = points.len() / d;
    let mut endpoints = Vec::with_capacity(m * d);
    let mut iterations = Vec::with_capacity(m);
    let mut converged = Vec::with_capacity(m);
    for i in 0..m {
        let run = descend(model, &points[i * d..(i + 1) * d], opts)?;
        endpoints.extend_from_slice(&run.point);
        iterations.push(run.iters);
        converged.push(run.converged);
    }

    let mut assignment = single_linkage(&endpoints, d, merge_tol);
    let mut s = assignment.iter().copied().max().map_or(0, |x| x + 1);
    let mut seps = centroids(&endpoints, d, &assignment, s);
    // Centroids of merged clouds can sit off the minimum; polish and re-merge
    // until the set is stable.
    for _ in 0..8 {
        let mut polished = Vec::with_capacity(s * d);
        let mut moved = false;
        for g in 0..s {
            let c = &seps[g * d..(g + 1) * d];
            if norm(&model.radius_grad(c)) < opts.grad_tol {
                polished.extend_from_slice(c);
            } else {
                moved = true;
                polished.extend_from_slice(&descend(model, c, opts)?.point);
            }
        }
        let regroup = single_linkage(&polished, d, merge_tol);
        let s_new = regroup.iter().copied().max().map_or(0, |x| x + 1);
        if !moved && s_new == s {
            break;
        }
        assignment.iter_mut().for_each(|a| *a = regroup[*a]);
        seps = centroids(&polished, d, &regroup, s_new);
        s = s_new;
    }
    let grad_norms = (0..s)
        .map(|g| norm(&model.radius_grad(&seps[g * d..(g + 1) * d])))
        .collect();

    let failed = converged.iter().filter(|c| !**c).count();
    Ok(SepSet {
        s,
        d,
        seps,
        assignment,
        iterations,
        converged,
        grad_norms,
        degraded: failed * 10 > m,
    })
}

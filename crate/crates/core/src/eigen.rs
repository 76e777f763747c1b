//! Symmetric eigensolvers.
//!
//! [`small_eigs`] runs cyclic Jacobi rotations on a dense matrix. Graphs past
//! the dense guard go through [`lanczos_smallest`], a thick-restart Lanczos
//! iteration on an implicit operator that reuses the Jacobi solver for its
//! projected problem.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const DENSE_GUARD: usize = 5000;

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPairs {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// `vectors[i]` belongs to `values[i]`; unit norm.
    pub vectors: Vec<Vec<f64>>,
    /// Leading eigenvalues below `1e-8 * lambda_max` (null-space directions).
    pub trivial: usize,
}

pub(crate) fn count_trivial(values: &[f64], lambda_max: f64) -> usize {
    let cut = 1e-8 * lambda_max.abs().max(f64::MIN_POSITIVE);
    values.iter().take_while(|&&v| v < cut).count()
}

/// Full cyclic-Jacobi decomposition of a dense symmetric matrix.
///
/// Returns all eigenvalues ascending with column eigenvectors in
/// `vectors[i]`. Sweeps stop once the off-diagonal Frobenius norm drops
/// below `1e-10 * max(1, ||A||_F)`.
pub fn jacobi_eigen(matrix: &[f64], n: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    if matrix.len() != n * n {
        return Err(Error::DimensionMismatch(format!(
            "{} entries for a {n}x{n} matrix",
            matrix.len()
        )));
    }
    let mut a = matrix.to_vec();
    let scale = a.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
    for i in 0..n {
        for j in i + 1..n {
            if (a[i * n + j] - a[j * n + i]).abs() > 1e-10 * scale {
                return Err(Error::InvalidParameter(format!(
                    "matrix not symmetric at ({i},{j})"
                )));
            }
            let avg = 0.5 * (a[i * n + j] + a[j * n + i]);
            a[i * n + j] = avg;
            a[j * n + i] = avg;
        }
    }
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let off_norm = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                s += 2.0 * a[i * n + j] * a[i * n + j];
            }
        }
        s.sqrt()
    };
    let tol = 1e-10 * scale;
    let mut sweep = 0;
    while off_norm(&a) >= tol {
        sweep += 1;
        if sweep > 100 {
            return Err(Error::Numerical("Jacobi sweeps did not converge".into()));
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    let new_p = c * akp - s * akq;
                    let new_q = s * akp + c * akq;
                    a[k * n + p] = new_p;
                    a[p * n + k] = new_p;
                    a[k * n + q] = new_q;
                    a[q * n + k] = new_q;
                }
                a[p * n + p] = app - t * apq;
                a[q * n + q] = aqq + t * apq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].total_cmp(&a[j * n + j]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let vectors = order
        .iter()
        .map(|&j| (0..n).map(|k| v[k * n + j]).collect())
        .collect();
    Ok((values, vectors))
}

/// Bottom `count` eigenpairs of a dense symmetric matrix.
pub fn small_eigs(matrix: &[f64], n: usize, count: usize) -> Result<EigenPairs> {
    if n > DENSE_GUARD {
        return Err(Error::InvalidParameter(format!(
            "dense eigensolver limited to n <= {DENSE_GUARD}, got {n}"
        )));
    }
    let (values, vectors) = jacobi_eigen(matrix, n)?;
    let lambda_max = values.last().copied().unwrap_or(0.0);
    let trivial = count_trivial(&values, lambda_max);
    let count = count.min(n);
    Ok(EigenPairs {
        values: values[..count].to_vec(),
        vectors: vectors.into_iter().take(count).collect(),
        trivial: trivial.min(count),
    })
}

/// Symmetric linear operator for the iterative solver.
pub trait SymmetricOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], out: &mut [f64]);
}

#[derive(Debug, Clone, Copy)]
pub struct LanczosOptions {
    pub max_basis: usize,
    pub tol: f64,
    pub max_restarts: usize,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions {
            max_basis: 120,
            tol: 1e-8,
            max_restarts: 2000,
            seed: 0x5eed,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn orthogonalize(basis: &[Vec<f64>], w: &mut [f64]) {
    // Two passes of classical Gram-Schmidt.
    for _ in 0..2 {
        for v in basis {
            let c = dot(v, w);
            w.iter_mut().zip(v).for_each(|(wi, vi)| *wi -= c * vi);
        }
    }
}

/// Smallest `nev` eigenpairs of a symmetric operator.
///
/// `spectral_bound` must bound `|lambda|` over the spectrum; it scales the
/// residual tolerance.
pub fn lanczos_smallest(
    op: &dyn SymmetricOperator,
    nev: usize,
    spectral_bound: f64,
    opts: LanczosOptions,
) -> Result<EigenPairs> {
    let n = op.dim();
    if nev == 0 || nev > n {
        return Err(Error::InvalidParameter(format!(
            "requested {nev} eigenpairs of a {n}-dimensional operator"
        )));
    }
    let max_basis = opts.max_basis.max(2 * nev + 10).min(n);
    let keep = (nev + (max_basis - nev) / 2).min(max_basis - 1).max(nev);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let random_unit = |rng: &mut ChaCha8Rng, basis: &[Vec<f64>]| -> Vec<f64> {
        loop {
            let mut w: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            orthogonalize(basis, &mut w);
            let nw = dot(&w, &w).sqrt();
            if nw > 1e-8 {
                w.iter_mut().for_each(|x| *x /= nw);
                return w;
            }
        }
    };

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(max_basis);
    let mut images: Vec<Vec<f64>> = Vec::with_capacity(max_basis);
    // Projected matrix, row-major max_basis x max_basis.
    let mut h = vec![0.0; max_basis * max_basis];
    let mut next = random_unit(&mut rng, &basis);
    let tol = opts.tol * spectral_bound.abs().max(f64::MIN_POSITIVE);

    for _restart in 0..opts.max_restarts {
        while basis.len() < max_basis {
            let j = basis.len();
            let mut av = vec![0.0; n];
            op.apply(&next, &mut av);
            for (i, v) in basis.iter().enumerate() {
                let hij = dot(v, &av);
                h[i * max_basis + j] = hij;
                h[j * max_basis + i] = hij;
            }
            h[j * max_basis + j] = dot(&next, &av);
            basis.push(std::mem::take(&mut next));
            images.push(av.clone());
            let mut w = av;
            orthogonalize(&basis, &mut w);
            let nw = dot(&w, &w).sqrt();
            next = if nw > 1e-10 * spectral_bound.abs().max(1e-300) {
                w.iter_mut().for_each(|x| *x /= nw);
                w
            } else {
                // Invariant subspace found: continue with a fresh direction.
                random_unit(&mut rng, &basis)
            };
        }

        let mdim = basis.len();
        let proj: Vec<f64> = (0..mdim)
            .flat_map(|i| (0..mdim).map(move |j| (i, j)))
            .map(|(i, j)| h[i * max_basis + j])
            .collect();
        let (theta, s) = jacobi_eigen(&proj, mdim)?;

        let combine = |set: &[Vec<f64>], coeffs: &[f64]| -> Vec<f64> {
            let mut out = vec![0.0; n];
            for (v, &c) in set.iter().zip(coeffs) {
                if c != 0.0 {
                    out.iter_mut().zip(v).for_each(|(o, x)| *o += c * x);
                }
            }
            out
        };

        let mut all_converged = true;
        let mut ritz_vectors = Vec::with_capacity(keep);
        let mut ritz_images = Vec::with_capacity(keep);
        for i in 0..keep {
            let y = combine(&basis, &s[i]);
            let ay = combine(&images, &s[i]);
            if i < nev {
                let res: f64 = ay
                    .iter()
                    .zip(&y)
                    .map(|(a, b)| (a - theta[i] * b).powi(2))
                    .sum::<f64>()
                    .sqrt();
                if res > tol {
                    all_converged = false;
                }
            }
            ritz_vectors.push(y);
            ritz_images.push(ay);
        }

        if all_converged {
            let values = theta[..nev].to_vec();
            let vectors = ritz_vectors.into_iter().take(nev).collect();
            let trivial = count_trivial(&values, spectral_bound);
            return Ok(EigenPairs {
                values,
                vectors,
                trivial,
            });
        }

        basis = ritz_vectors;
        images = ritz_images;
        h.iter_mut().for_each(|x| *x = 0.0);
        for (i, &t) in theta.iter().take(keep).enumerate() {
            h[i * max_basis + i] = t;
        }
        // Re-orthogonalize the continuation vector against the compressed basis.
        orthogonalize(&basis, &mut next);
        let nn = dot(&next, &next).sqrt();
        if nn > 1e-8 {
            next.iter_mut().for_each(|x| *x /= nn);
        } else {
            next = random_unit(&mut rng, &basis);
        }
    }
    Err(Error::Numerical(format!(
        "Lanczos did not converge {nev} eigenpairs within {} restarts",
        opts.max_restarts
    )))
}

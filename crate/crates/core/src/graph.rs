//! Exact k-nearest-neighbor graphs and their Laplacians.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    Binary,
    #[default]
    Gaussian,
}

impl std::str::FromStr for Weighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(Weighting::Binary),
            "gaussian" => Ok(Weighting::Gaussian),
            other => Err(Error::InvalidParameter(format!(
                "unknown weighting {other:?} (expected binary|gaussian)"
            ))),
        }
    }
}

/// Symmetric weighted graph stored as sorted adjacency lists.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborGraph {
    pub n: usize,
    pub adjacency: Vec<Vec<(usize, f64)>>,
    pub k_nn: usize,
    /// Squared distance from each node to its nearest neighbor (empty for
    /// graphs not built from coordinates).
    pub nearest_sq: Vec<f64>,
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl NeighborGraph {
    /// Build from an undirected edge list; duplicate edges keep the larger weight.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); n];
        for &(p, q, w) in edges {
            if p >= n || q >= n {
                return Err(Error::InvalidParameter(format!(
                    "edge ({p},{q}) out of range for {n} nodes"
                )));
            }
            if p == q {
                return Err(Error::InvalidParameter(format!("self-loop at node {p}")));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "edge ({p},{q}) has non-positive weight {w}"
                )));
            }
            adjacency[p].push((q, w));
            adjacency[q].push((p, w));
        }
        for list in &mut adjacency {
            list.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.total_cmp(&a.1)));
            list.dedup_by_key(|e| e.0);
        }
        Ok(NeighborGraph {
            n,
            adjacency,
            k_nn: 0,
            nearest_sq: Vec::new(),
        })
    }

    /// Mean squared nearest-neighbor distance, if known.
    pub fn mean_nearest_sq(&self) -> Option<f64> {
        (!self.nearest_sq.is_empty()).then(|| self.nearest_sq.iter().sum::<f64>() / self.nearest_sq.len() as f64)
    }

    /// Multiply every edge weight by `scale(p, q)`; the result must stay positive.
    pub fn rescale(&mut self, scale: impl Fn(usize, usize) -> f64) {
        for (p, list) in self.adjacency.iter_mut().enumerate() {
            for (q, w) in list.iter_mut() {
                *w *= scale(p, *q);
            }
        }
    }

    pub fn num_edges(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn weight(&self, p: usize, q: usize) -> Option<f64> {
        self.adjacency[p]
            .binary_search_by_key(&q, |e| e.0)
            .ok()
            .map(|i| self.adjacency[p][i].1)
    }

    /// Connected-component label per node, numbered in order of first node.
    pub fn components(&self) -> (usize, Vec<usize>) {
        let mut comp = vec![usize::MAX; self.n];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..self.n {
            if comp[start] != usize::MAX {
                continue;
            }
            comp[start] = count;
            stack.push(start);
            while let Some(p) = stack.pop() {
                for &(q, _) in &self.adjacency[p] {
                    if comp[q] == usize::MAX {
                        comp[q] = count;
                        stack.push(q);
                    }
                }
            }
            count += 1;
        }
        (count, comp)
    }
}

/// Brute-force k-NN graph, symmetrized by edge union.
///
/// Neighbor ties are broken toward the lower index. Gaussian weights use
/// `exp(-d^2 / sigma^2)` with `sigma^2` the mean squared distance to each
/// node's k-th neighbor.
pub fn build_knn_graph(data: &DataMatrix, k_nn: usize, weighting: Weighting) -> Result<NeighborGraph> {
    let n = data.n;
    if k_nn == 0 || k_nn >= n {
        return Err(Error::InvalidParameter(format!(
            "k_nn must satisfy 1 <= k_nn < n (k_nn={k_nn}, n={n})"
        )));
    }

    let mut neighbors: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    let mut dists: Vec<(f64, usize)> = Vec::with_capacity(n);
    for p in 0..n {
        let xp = data.row(p);
        dists.clear();
        dists.extend(
            (0..n)
                .filter(|&q| q != p)
                .map(|q| (sq_dist(xp, data.row(q)), q)),
        );
        let by_dist = |a: &(f64, usize), b: &(f64, usize)| -> Ordering {
            a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
        };
        dists.select_nth_unstable_by(k_nn - 1, by_dist);
        let nearest = &mut dists[..k_nn];
        nearest.sort_by(by_dist);
        neighbors.push(nearest.iter().map(|&(d2, q)| (q, d2)).collect());
    }

    let nearest_sq: Vec<f64> = neighbors.iter().map(|nb| nb[0].1).collect();
    let sigma_sq = neighbors.iter().map(|nb| nb[k_nn - 1].1).sum::<f64>() / n as f64;
    let weight_of = |d2: f64| -> f64 {
        match weighting {
            Weighting::Binary => 1.0,
            Weighting::Gaussian if sigma_sq > 0.0 => (-d2 / sigma_sq).exp().max(f64::MIN_POSITIVE),
            Weighting::Gaussian => 1.0,
        }
    };

    let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (p, nb) in neighbors.iter().enumerate() {
        for &(q, d2) in nb {
            let w = weight_of(d2);
            adjacency[p].push((q, w));
            adjacency[q].push((p, w));
        }
    }
    for list in &mut adjacency {
        list.sort_by_key(|e| e.0);
        // Both directions carry the same weight, so either copy may stay.
        list.dedup_by_key(|e| e.0);
    }
    Ok(NeighborGraph {
        n,
        adjacency,
        k_nn,
        nearest_sq,
    })
}

/// Degree vector plus implicit `L = D - W` operations.
#[derive(Debug, Clone)]
pub struct LaplacianView<'g> {
    pub graph: &'g NeighborGraph,
    pub degrees: Vec<f64>,
}

pub fn laplacian(graph: &NeighborGraph) -> LaplacianView<'_> {
    let degrees = graph
        .adjacency
        .iter()
        .map(|nb| nb.iter().map(|e| e.1).sum())
        .collect();
    LaplacianView { graph, degrees }
}

impl LaplacianView<'_> {
    pub fn n(&self) -> usize {
        self.graph.n
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (p, nb) in self.graph.adjacency.iter().enumerate() {
            let offdiag: f64 = nb.iter().map(|&(q, w)| w * x[q]).sum();
            out[p] = self.degrees[p] * x[p] - offdiag;
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.apply(x, &mut out);
        out
    }

    /// `x' L x` evaluated edge-wise as `sum w (x_p - x_q)^2`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.graph
            .adjacency
            .iter()
            .enumerate()
            .flat_map(|(p, nb)| nb.iter().filter(move |e| e.0 > p).map(move |&(q, w)| (p, q, w)))
            .map(|(p, q, w)| w * (x[p] - x[q]) * (x[p] - x[q]))
            .sum()
    }

    /// Dense row-major materialization; only sensible for small graphs.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.n();
        let mut m = vec![0.0; n * n];
        for (p, nb) in self.graph.adjacency.iter().enumerate() {
            m[p * n + p] = self.degrees[p];
            for &(q, w) in nb {
                m[p * n + q] -= w;
            }
        }
        m
    }

    /// Dense `D^{-1/2} L D^{-1/2}`. Zero-degree nodes keep a zero row.
    pub fn to_dense_sym_normalized(&self) -> Vec<f64> {
        let n = self.n();
        let inv_sqrt: Vec<f64> = self
            .degrees
            .iter()
            .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
            .collect();
        let mut m = vec![0.0; n * n];
        for (p, nb) in self.graph.adjacency.iter().enumerate() {
            if self.degrees[p] > 0.0 {
                m[p * n + p] = 1.0;
            }
            for &(q, w) in nb {
                m[p * n + q] = -w * inv_sqrt[p] * inv_sqrt[q];
            }
        }
        m
    }
}

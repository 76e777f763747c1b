//! Spectrum-preserving node aggregation.
//!
//! Random vectors are smoothed by forward Gauss-Seidel sweeps on `L x = 0`,
//! which damps their high-frequency content and leaves approximations of the
//! low Laplacian eigenvectors. Nodes whose per-node tuples across the smoothed
//! vectors are nearly parallel (squared cosine close to one) are merged.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::graph::{LaplacianView, NeighborGraph};

#[derive(Debug, Clone, PartialEq)]
pub struct TestVectors {
    pub n: usize,
    pub k: usize,
    /// `k` vectors of length `n`.
    pub vectors: Vec<Vec<f64>>,
    pub sweeps_applied: usize,
}

impl TestVectors {
    pub fn from_vectors(vectors: Vec<Vec<f64>>) -> Self {
        let n = vectors.first().map_or(0, Vec::len);
        TestVectors {
            n,
            k: vectors.len(),
            vectors,
            sweeps_applied: 0,
        }
    }

    pub fn tuple(&self, p: usize) -> Vec<f64> {
        self.vectors.iter().map(|v| v[p]).collect()
    }

    /// Node-major copy: row `p` holds node `p`'s tuple.
    fn node_major(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n * self.k];
        for (i, v) in self.vectors.iter().enumerate() {
            for (p, &x) in v.iter().enumerate() {
                out[p * self.k + i] = x;
            }
        }
        out
    }
}

/// One forward Gauss-Seidel pass of `L x = 0`: `x_p <- sum_q w_pq x_q / deg_p`.
pub fn gauss_seidel_sweep(lap: &LaplacianView<'_>, x: &mut [f64]) -> Result<()> {
    for (p, nb) in lap.graph.adjacency.iter().enumerate() {
        let deg = lap.degrees[p];
        if deg <= 0.0 {
            return Err(Error::ZeroDegree { node: p });
        }
        let s: f64 = nb.iter().map(|&(q, w)| w * x[q]).sum();
        x[p] = s / deg;
    }
    Ok(())
}

fn mean_center(x: &mut [f64]) {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter_mut().for_each(|v| *v -= mean);
}

pub fn smooth_test_vectors(
    lap: &LaplacianView<'_>,
    k: usize,
    sweeps: usize,
    seed: u64,
) -> Result<TestVectors> {
    if k == 0 || sweeps == 0 {
        return Err(Error::InvalidParameter(
            "test vector count and sweep count must be >= 1".into(),
        ));
    }
    let n = lap.n();
    if let Some(node) = lap.degrees.iter().position(|&d| d <= 0.0) {
        return Err(Error::ZeroDegree { node });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vectors = Vec::with_capacity(k);
    for _ in 0..k {
        let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
        for _ in 0..sweeps {
            gauss_seidel_sweep(lap, &mut x)?;
        }
        mean_center(&mut x);
        vectors.push(x);
    }
    Ok(TestVectors {
        n,
        k,
        vectors,
        sweeps_applied: sweeps,
    })
}

#[inline]
fn squared_cosine(a: &[f64], b: &[f64]) -> f64 {
    let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    if aa == 0.0 || bb == 0.0 {
        return 0.0;
    }
    // Clamp guards the Cauchy-Schwarz bound against rounding.
    ((ab * ab) / (aa * bb)).min(1.0)
}

/// Squared cosine between the nodes' tuples; 0 when either tuple is all zero.
pub fn structural_correlation(tv: &TestVectors, p: usize, q: usize) -> f64 {
    squared_cosine(&tv.tuple(p), &tv.tuple(q))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AggregationMap {
    pub fine_to_coarse: Vec<usize>,
    pub m: usize,
}

impl AggregationMap {
    pub fn identity(n: usize) -> Self {
        AggregationMap {
            fine_to_coarse: (0..n).collect(),
            m: n,
        }
    }

    pub fn n(&self) -> usize {
        self.fine_to_coarse.len()
    }

    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut members = vec![Vec::new(); self.m];
        for (i, &c) in self.fine_to_coarse.iter().enumerate() {
            members[c].push(i);
        }
        members
    }
}

/// Single greedy pass in ascending node order.
///
/// An unassigned node joins the aggregate of its already-assigned neighbor
/// with the highest correlation at or above `threshold` (ties to the lower
/// neighbor index); otherwise it seeds a new aggregate.
pub fn aggregate(graph: &NeighborGraph, tv: &TestVectors, threshold: f64) -> Result<AggregationMap> {
    if tv.n != graph.n {
        return Err(Error::DimensionMismatch(format!(
            "test vectors over {} nodes, graph has {}",
            tv.n, graph.n
        )));
    }
    let tuples = tv.node_major();
    let k = tv.k;
    let tuple = |p: usize| &tuples[p * k..(p + 1) * k];

    const UNASSIGNED: usize = usize::MAX;
    let mut fine_to_coarse = vec![UNASSIGNED; graph.n];
    let mut m = 0;
    for p in 0..graph.n {
        let mut best: Option<(f64, usize)> = None;
        for &(q, _) in &graph.adjacency[p] {
            if fine_to_coarse[q] == UNASSIGNED {
                continue;
            }
            let sim = squared_cosine(tuple(p), tuple(q));
            if sim >= threshold && best.is_none_or(|(s, _)| sim > s) {
                // Adjacency is sorted, so strict improvement keeps the lower index on ties.
                best = Some((sim, q));
            }
        }
        fine_to_coarse[p] = match best {
            Some((_, q)) => fine_to_coarse[q],
            None => {
                m += 1;
                m - 1
            }
        };
    }
    Ok(AggregationMap { fine_to_coarse, m })
}

/// Repeat [`aggregate`] with a decreasing threshold until `m / n <= ratio`.
///
/// The threshold shrinks by 0.05 per pass; the last pass (threshold 0) is
/// returned if the ratio is never reached.
pub fn aggregate_to_ratio(
    graph: &NeighborGraph,
    tv: &TestVectors,
    start_threshold: f64,
    ratio: f64,
) -> Result<(AggregationMap, f64)> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "target ratio must lie in (0, 1], got {ratio}"
        )));
    }
    let mut threshold = start_threshold;
    loop {
        let map = aggregate(graph, tv, threshold)?;
        if map.m as f64 <= ratio * graph.n as f64 || threshold <= 0.0 {
            return Ok((map, threshold));
        }
        threshold = (threshold - 0.05).max(0.0);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompressedDataset {
    pub m: usize,
    pub d: usize,
    /// Row-major `m x d` member centroids.
    pub features: Vec<f64>,
    pub members: Vec<Vec<usize>>,
    pub source: String,
}

impl CompressedDataset {
    pub fn row(&self, c: usize) -> &[f64] {
        &self.features[c * self.d..(c + 1) * self.d]
    }

    pub fn as_data_matrix(&self) -> DataMatrix {
        DataMatrix {
            n: self.m,
            d: self.d,
            values: self.features.clone(),
            labels: None,
            name: format!("{}-compressed", self.source),
        }
    }
}

pub fn compress(data: &DataMatrix, map: &AggregationMap) -> Result<CompressedDataset> {
    if map.n() != data.n {
        return Err(Error::DimensionMismatch(format!(
            "aggregation over {} nodes, dataset has {}",
            map.n(),
            data.n
        )));
    }
    let d = data.d;
    let members = map.members();
    let mut features = vec![0.0; map.m * d];
    for (c, list) in members.iter().enumerate() {
        let out = &mut features[c * d..(c + 1) * d];
        for &i in list {
            for (o, v) in out.iter_mut().zip(data.row(i)) {
                *o += v;
            }
        }
        let inv = 1.0 / list.len() as f64;
        out.iter_mut().for_each(|o| *o *= inv);
    }
    Ok(CompressedDataset {
        m: map.m,
        d,
        features,
        members,
        source: data.name.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::laplacian;

    fn clique_edges(nodes: std::ops::Range<usize>) -> Vec<(usize, usize, f64)> {
        let v: Vec<usize> = nodes.collect();
        let mut edges = Vec::new();
        for (i, &a) in v.iter().enumerate() {
            for &b in &v[i + 1..] {
                edges.push((a, b, 1.0));
            }
        }
        edges
    }

    #[test]
    fn one_sweep_on_triangle_by_hand() {
        // K3 from x = (1, -1, 0.5): x0 <- (-1 + 0.5)/2 = -0.25,
        // x1 <- (-0.25 + 0.5)/2 = 0.125, x2 <- (-0.25 + 0.125)/2 = -0.0625.
        let g = NeighborGraph::from_edges(3, &clique_edges(0..3)).unwrap();
        let lap = laplacian(&g);
        let mut x = vec![1.0, -1.0, 0.5];
        gauss_seidel_sweep(&lap, &mut x).unwrap();
        assert_eq!(x, vec![-0.25, 0.125, -0.0625]);
    }

    #[test]
    fn complete_graph_smooths_to_near_zero() {
        let g = NeighborGraph::from_edges(20, &clique_edges(0..20)).unwrap();
        let lap = laplacian(&g);
        let tv = smooth_test_vectors(&lap, 3, 1, 5).unwrap();
        for v in &tv.vectors {
            let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            // Each update averages 19 near-uniform randoms: spread shrinks by ~1/sqrt(19).
            assert!(max < 0.5, "max {max}");
        }
    }

    #[test]
    fn zero_degree_reported() {
        let g = NeighborGraph::from_edges(3, &[(0, 1, 1.0)]).unwrap();
        let lap = laplacian(&g);
        assert!(matches!(
            smooth_test_vectors(&lap, 1, 1, 0),
            Err(Error::ZeroDegree { node: 2 })
        ));
    }

    #[test]
    fn determinism() {
        let g = NeighborGraph::from_edges(6, &clique_edges(0..6)).unwrap();
        let lap = laplacian(&g);
        let a = smooth_test_vectors(&lap, 4, 3, 9).unwrap();
        let b = smooth_test_vectors(&lap, 4, 3, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn correlation_examples() {
        let tv = TestVectors::from_vectors(vec![vec![1.0, 3.0, 1.0, 0.0], vec![2.0, 6.0, 0.0, 1.0]]);
        assert!((structural_correlation(&tv, 0, 0) - 1.0).abs() < 1e-15);
        assert!((structural_correlation(&tv, 0, 1) - 1.0).abs() < 1e-15);
        assert_eq!(structural_correlation(&tv, 2, 3), 0.0);
        let zero = TestVectors::from_vectors(vec![vec![0.0, 1.0]]);
        assert_eq!(structural_correlation(&zero, 0, 1), 0.0);
    }

    #[test]
    fn threshold_one_keeps_generic_nodes_apart() {
        let g = NeighborGraph::from_edges(4, &clique_edges(0..4)).unwrap();
        let tv = TestVectors::from_vectors(vec![
            vec![1.0, 0.3, -0.7, 0.2],
            vec![0.1, 0.9, 0.4, -0.8],
        ]);
        let map = aggregate(&g, &tv, 1.0).unwrap();
        assert_eq!(map, AggregationMap::identity(4));
    }

    #[test]
    fn compress_midpoint_and_identity() {
        let data = DataMatrix::from_rows(&[vec![0.0, 0.0], vec![2.0, 2.0], vec![5.0, 1.0]], None, "t")
            .unwrap();
        let map = AggregationMap {
            fine_to_coarse: vec![0, 0, 1],
            m: 2,
        };
        let c = compress(&data, &map).unwrap();
        assert_eq!(c.row(0), &[1.0, 1.0]);
        assert_eq!(c.members, vec![vec![0, 1], vec![2]]);
        let id = compress(&data, &AggregationMap::identity(3)).unwrap();
        assert_eq!(id.features, data.values);
    }

    #[test]
    fn target_ratio_lowers_threshold() {
        let g = NeighborGraph::from_edges(6, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 4, 1.0), (4, 5, 1.0)])
            .unwrap();
        let tv = TestVectors::from_vectors(vec![
            vec![1.0, 0.8, 0.1, -0.2, -0.9, -1.0],
            vec![0.2, 0.5, 1.0, 0.9, 0.1, -0.3],
        ]);
        let (map, thr) = aggregate_to_ratio(&g, &tv, 0.99, 0.5).unwrap();
        assert!(map.m <= 3, "m = {}", map.m);
        assert!(thr < 0.99);
    }
}

//! Clustering accuracy under the best one-to-one cluster/class matching.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum-cost perfect assignment on a square `n x n` cost matrix.
///
/// Returns `assign[row] = column`. O(n^3) shortest augmenting path with
/// potentials.
pub fn hungarian(cost: &[f64], n: usize) -> Result<Vec<usize>> {
    if cost.len() != n * n {
        return Err(Error::DimensionMismatch(format!(
            "cost matrix has {} entries, expected {n}x{n}",
            cost.len()
        )));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidData("cost matrix must be finite".into()));
    }
    // 1-based arrays; index 0 is the virtual source column.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut matched = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        matched[0] = row;
        let mut col0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let r0 = matched[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0;
            for col in 1..=n {
                if used[col] {
                    continue;
                }
                let cur = cost[(r0 - 1) * n + col - 1] - u[r0] - v[col];
                if cur < minv[col] {
                    minv[col] = cur;
                    way[col] = col0;
                }
                if minv[col] < delta {
                    delta = minv[col];
                    col1 = col;
                }
            }
            for col in 0..=n {
                if used[col] {
                    u[matched[col]] += delta;
                    v[col] -= delta;
                } else {
                    minv[col] -= delta;
                }
            }
            col0 = col1;
            if matched[col0] == 0 {
                break;
            }
        }
        loop {
            let col1 = way[col0];
            matched[col0] = matched[col1];
            col0 = col1;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for col in 1..=n {
        if matched[col] > 0 {
            assign[matched[col] - 1] = col - 1;
        }
    }
    Ok(assign)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccReport {
    pub acc: f64,
    /// `mapping[cluster] = class`, or `None` for clusters matched to padding.
    pub mapping: Vec<Option<usize>>,
    /// `confusion[cluster][class]` counts.
    pub confusion: Vec<Vec<usize>>,
}

/// Fraction of points whose cluster maps to their class under the best
/// injective cluster-to-class matching. The contingency table is padded to
/// square when the two counts differ.
pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<AccReport> {
    if pred.len() != truth.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predicted labels vs {} true labels",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::InvalidData("cannot score an empty labeling".into()));
    }
    let clusters = pred.iter().max().unwrap() + 1;
    let classes = truth.iter().max().unwrap() + 1;
    let mut confusion = vec![vec![0usize; classes]; clusters];
    for (&p, &t) in pred.iter().zip(truth) {
        confusion[p][t] += 1;
    }
    let size = clusters.max(classes);
    let mut cost = vec![0.0; size * size];
    for (c, row) in confusion.iter().enumerate() {
        for (t, &count) in row.iter().enumerate() {
            cost[c * size + t] = -(count as f64);
        }
    }
    let assign = hungarian(&cost, size)?;
    let mapping: Vec<Option<usize>> = (0..clusters)
        .map(|c| Some(assign[c]).filter(|&t| t < classes))
        .collect();
    let hits: usize = mapping
        .iter()
        .enumerate()
        .filter_map(|(c, t)| t.map(|t| confusion[c][t]))
        .sum();
    Ok(AccReport {
        acc: hits as f64 / pred.len() as f64,
        mapping,
        confusion,
    })
}

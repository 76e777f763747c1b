use proptest::prelude::*;
use sep_eda::coarsen::{gauss_seidel_sweep, structural_correlation, TestVectors};
use sep_eda::data::{normalize, Normalization};
use sep_eda::graph::{build_knn_graph, laplacian, NeighborGraph, Weighting};
use sep_eda::kmeans::kmeans_once;
use sep_eda::sep::{descend, DescentOptions};
use sep_eda::svc::fit_sphere;
use sep_eda::svg::scatter_svg;
use sep_eda::tsne::{kl_divergence, p_matrix, q_matrix};
use sep_eda::{accuracy, DataMatrix};

fn matrix(max_n: usize, d: usize) -> impl Strategy<Value = DataMatrix> {
    (3..max_n).prop_flat_map(move |n| {
        prop::collection::vec(-10.0..10.0f64, n * d)
            .prop_map(move |values| DataMatrix::new(n, d, values, None, "prop").unwrap())
    })
}

fn weighted_graph() -> impl Strategy<Value = NeighborGraph> {
    (3..30usize).prop_flat_map(|n| {
        prop::collection::vec((0..n, 0..n, 0.01..5.0f64), n..4 * n).prop_map(move |raw| {
            // A ring keeps every degree positive.
            let mut edges: Vec<(usize, usize, f64)> = (0..n).map(|i| (i, (i + 1) % n, 1.0)).collect();
            for (a, b, w) in raw {
                if a != b && !edges.iter().any(|&(x, y, _)| (x, y) == (a, b) || (x, y) == (b, a)) {
                    edges.push((a, b, w));
                }
            }
            NeighborGraph::from_edges(n, &edges).unwrap()
        })
    })
}

fn labels(n: usize, k: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0..k, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn knn_graph_symmetric(data in matrix(40, 3), k in 1usize..6, gaussian in any::<bool>()) {
        let k = k.min(data.n - 1);
        let weighting = if gaussian { Weighting::Gaussian } else { Weighting::Binary };
        let g = build_knn_graph(&data, k, weighting).unwrap();
        for p in 0..g.n {
            prop_assert!(g.adjacency[p].len() >= k);
            for &(q, w) in &g.adjacency[p] {
                prop_assert!(w > 0.0 && w <= 1.0);
                prop_assert_eq!(g.weight(q, p), Some(w));
            }
        }
    }

    #[test]
    fn laplacian_positive_semidefinite(g in weighted_graph(), seed in any::<u64>()) {
        let lap = laplacian(&g);
        let x: Vec<f64> = (0..g.n).map(|i| ((seed.wrapping_add(i as u64) % 997) as f64 - 498.0) / 100.0).collect();
        prop_assert!(lap.quadratic_form(&x) >= -1e-9);
        let ones = vec![1.0; g.n];
        prop_assert!(lap.mul(&ones).iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn gauss_seidel_never_raises_energy(g in weighted_graph(), x0 in prop::collection::vec(-1.0..1.0f64, 30)) {
        let lap = laplacian(&g);
        let mut x = x0[..g.n].to_vec();
        let mut e = lap.quadratic_form(&x);
        for _ in 0..10 {
            gauss_seidel_sweep(&lap, &mut x).unwrap();
            let next = lap.quadratic_form(&x);
            prop_assert!(next <= e * (1.0 + 1e-12) + 1e-300);
            e = next;
        }
    }

    #[test]
    fn correlation_bounded_symmetric_scale_free(
        vectors in prop::collection::vec(prop::collection::vec(-1.0..1.0f64, 12), 1..6),
        p in 0usize..12,
        q in 0usize..12,
        scale in prop_oneof![-100.0..-0.01f64, 0.01..100.0f64],
    ) {
        let tv = TestVectors::from_vectors(vectors.clone());
        let c = structural_correlation(&tv, p, q);
        prop_assert!((0.0..=1.0).contains(&c));
        prop_assert_eq!(c, structural_correlation(&tv, q, p));
        let scaled = TestVectors::from_vectors(vectors.iter().map(|v| v.iter().map(|x| x * scale).collect()).collect());
        prop_assert!((c - structural_correlation(&scaled, p, q)).abs() < 1e-12);
    }

    #[test]
    fn accuracy_relabel_invariant(pred in labels(80, 5), truth in labels(80, 4), shift in 1usize..5) {
        let base = accuracy(&pred, &truth).unwrap().acc;
        let relabeled: Vec<usize> = pred.iter().map(|&l| (l + shift) % 5).collect();
        prop_assert!((accuracy(&relabeled, &truth).unwrap().acc - base).abs() < 1e-12);
        let truth_relabeled: Vec<usize> = truth.iter().map(|&l| 3 - l).collect();
        prop_assert!((accuracy(&pred, &truth_relabeled).unwrap().acc - base).abs() < 1e-12);
    }

    #[test]
    fn single_cluster_accuracy_is_majority(truth in labels(60, 4)) {
        let pred = vec![0; truth.len()];
        let largest = (0..4).map(|c| truth.iter().filter(|&&t| t == c).count()).max().unwrap();
        let acc = accuracy(&pred, &truth).unwrap().acc;
        prop_assert!((acc - largest as f64 / truth.len() as f64).abs() < 1e-12);
    }

    #[test]
    fn affinity_invariants(data in matrix(25, 2), perp in 1.5..6.0f64) {
        let perp = perp.min((data.n - 1) as f64 / 3.0).max(1.01);
        let p = p_matrix(&data, perp).unwrap();
        let n = p.n;
        let mut mass = 0.0;
        for i in 0..n {
            prop_assert_eq!(p.get(i, i), 0.0);
            for j in 0..n {
                prop_assert!((p.get(i, j) - p.get(j, i)).abs() < 1e-15);
                mass += p.get(i, j);
            }
        }
        prop_assert!((mass - 1.0).abs() < 1e-10);
    }

    #[test]
    fn q_matrix_invariants(coords in prop::collection::vec(-20.0..20.0f64, 6..60)) {
        let coords = &coords[..coords.len() / 2 * 2];
        let n = coords.len() / 2;
        let q = q_matrix(coords);
        prop_assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    prop_assert!(q[i * n + j] > 0.0 && q[i * n + j] < 1.0);
                }
            }
        }
    }

    #[test]
    fn kl_nonnegative(a in prop::collection::vec(0.01..1.0f64, 25), b in prop::collection::vec(0.01..1.0f64, 25)) {
        let n = 5;
        let off = |v: &[f64]| {
            let mut m: Vec<f64> = v.to_vec();
            (0..n).for_each(|i| m[i * n + i] = 0.0);
            let t: f64 = m.iter().sum();
            m.iter().map(|x| x / t).collect::<Vec<f64>>()
        };
        prop_assert!(kl_divergence(&off(&a), &off(&b), n).unwrap() >= 0.0);
    }

    #[test]
    fn kmeans_labels_valid_and_monotone(data in matrix(60, 2), k in 1usize..5, seed in any::<u64>()) {
        let k = k.min(data.n);
        let run = kmeans_once(&data.values, 2, k, seed, 100).unwrap();
        prop_assert!(run.assignment.labels.iter().all(|&l| l < k));
        prop_assert!(run.history.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    }

    #[test]
    fn minmax_in_unit_box(data in matrix(30, 3)) {
        let out = normalize(&data, Normalization::MinMax);
        prop_assert!(out.values.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn descent_path_non_increasing(data in matrix(15, 2), start in prop::collection::vec(-12.0..12.0f64, 2)) {
        let model = fit_sphere(&data.values, 2, 0.05, 1.0).unwrap();
        prop_assert!(model.radius_sq(&start) >= 0.0);
        let run = descend(&model, &start, DescentOptions::mean_shift(&model)).unwrap();
        prop_assert!(run.values.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn svg_well_formed_with_one_circle_per_point(
        coords in prop::collection::vec(-1e3..1e3f64, 2..80),
        with_labels in any::<bool>(),
    ) {
        let coords = &coords[..coords.len() / 2 * 2];
        let n = coords.len() / 2;
        let labels: Vec<usize> = (0..n).map(|i| i % 7).collect();
        let sizes: Vec<usize> = (0..n).map(|i| 1 + i % 5).collect();
        let doc = scatter_svg(coords, with_labels.then_some(&labels[..]), Some(&sizes)).unwrap();
        let tree = roxmltree::Document::parse(&doc).unwrap();
        let circles = tree.descendants().filter(|node| node.has_tag_name("circle")).count();
        prop_assert_eq!(circles, n);
    }
}

#![allow(clippy::needless_range_loop)]

use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use graph_quant::classifiers::{load_predictions, save_predictions};
use graph_quant::estimation::{confusion_estimate, DensityWeights};
use graph_quant::graph::{load_graph, save_graph};
use graph_quant::harness::aggregate::{aggregate, GroupKey};
use graph_quant::harness::experiment::ResultRow;
use graph_quant::harness::metrics::{ae, rae};
use graph_quant::kernels::ppr_matrix_dense;
use graph_quant::shift::{format_sample, largest_remainder, sample_bfs, sample_pps, sample_rw, StructuralParams, WalkParams};
use graph_quant::solver::{solve_simplex_lsq, SolverOptions};
use graph_quant::{quantify, Graph, KernelSpec, PredictionMode, PredictionSet, QuantifierSpec};

fn graph_strategy(max_n: usize) -> impl Strategy<Value = Graph> {
    (1..=max_n).prop_flat_map(|n| {
        prop::collection::vec((0..n, 0..n), 0..(3 * n)).prop_map(move |edges| Graph::from_edges(n, &edges).unwrap())
    })
}

fn labeled_graph_strategy(max_n: usize, k: usize) -> impl Strategy<Value = Graph> {
    graph_strategy(max_n).prop_flat_map(move |g| {
        let n = g.n();
        prop::collection::vec(0..k, n).prop_map(move |labels| g.clone().with_labels(labels, Some(k)).unwrap())
    })
}

fn simplex(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.001f64..1.0, k).prop_map(|raw| {
        let s: f64 = raw.iter().sum();
        raw.into_iter().map(|x| x / s).collect()
    })
}

fn soft_preds(n: usize, k: usize) -> impl Strategy<Value = PredictionSet> {
    prop::collection::vec(simplex(k), n).prop_map(move |rows| PredictionSet::from_soft(rows.concat(), k).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn degree_sum_is_twice_edges(g in graph_strategy(40)) {
        let total: usize = (0..g.n()).map(|v| g.degree(v)).sum();
        prop_assert_eq!(total, 2 * g.num_edges());
        for (u, v) in g.edges() {
            prop_assert!(u < v);
            prop_assert!(g.has_edge(v, u));
        }
    }

    #[test]
    fn graph_round_trip(g in labeled_graph_strategy(50, 3)) {
        let dir = tempfile::tempdir().unwrap();
        let (e, l) = (dir.path().join("g.edges"), dir.path().join("g.labels"));
        save_graph(&g, &e, Some(&l), None).unwrap();
        let back = load_graph(&e, Some(&l), None).unwrap();
        prop_assert_eq!(back.n(), g.n());
        prop_assert_eq!(back.edges().collect::<Vec<_>>(), g.edges().collect::<Vec<_>>());
        prop_assert_eq!(back.labels(), g.labels());
    }

    #[test]
    fn predictions_round_trip(preds in (1usize..30).prop_flat_map(|n| soft_preds(n, 3))) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.txt");
        save_predictions(&path, &preds).unwrap();
        let back = load_predictions(&path, preds.n(), 3).unwrap();
        prop_assert_eq!(back, preds);
    }

    #[test]
    fn ppr_columns_are_distributions(g in graph_strategy(25), alpha in 0.01f64..0.99, steps in 0usize..12) {
        let n = g.n();
        let pi = ppr_matrix_dense(&g, alpha, steps).unwrap();
        for j in 0..n {
            let s: f64 = (0..n).map(|i| pi[i * n + j]).sum();
            prop_assert!((s - 1.0).abs() < 1e-9);
            prop_assert!((0..n).all(|i| pi[i * n + j] >= 0.0));
        }
    }

    #[test]
    fn confusion_columns_sum_to_one_and_scale_free(
        preds in soft_preds(30, 3),
        labels in prop::collection::vec(0usize..3, 30),
        w in prop::collection::vec(0.0f64..5.0, 30),
        c in 0.01f64..100.0,
    ) {
        let train: Vec<(usize, usize)> = labels.iter().copied().enumerate().collect();
        let weights = DensityWeights::new(w).unwrap();
        for mode in [PredictionMode::Hard, PredictionMode::Soft] {
            let a = confusion_estimate(&preds, &train, &weights, mode).unwrap();
            let b = confusion_estimate(&preds, &train, &weights.scaled(c).unwrap(), mode).unwrap();
            for class in 0..3 {
                let s: f64 = a.column(class).iter().sum();
                prop_assert!((s - 1.0).abs() < 1e-9);
            }
            for (x, y) in a.matrix.iter().zip(&b.matrix) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn quantify_ignores_test_order(
        preds in soft_preds(40, 3),
        labels in prop::collection::vec(0usize..3, 20),
        seed in any::<u64>(),
    ) {
        let g = Graph::from_edges(40, &(0..39).map(|i| (i, i + 1)).collect::<Vec<_>>()).unwrap();
        let train: Vec<(usize, usize)> = labels.iter().copied().enumerate().collect();
        let test: Vec<usize> = (20..40).collect();
        let mut shuffled = test.clone();
        let mut s = seed;
        for i in (1..shuffled.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            shuffled.swap(i, (s >> 33) as usize % (i + 1));
        }
        for spec in [
            QuantifierSpec::cc(),
            QuantifierSpec::acc().probabilistic(),
            QuantifierSpec::acc().with_sis(KernelSpec::ppr_default(), None),
            QuantifierSpec::acc().with_nacc(),
        ] {
            let a = quantify(&spec, &g, &train, &test, &preds).unwrap();
            let b = quantify(&spec, &g, &train, &shuffled, &preds).unwrap();
            for (x, y) in a.q.iter().zip(&b.q) {
                prop_assert!((x - y).abs() < 1e-9);
            }
            prop_assert!((a.q.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn solver_stays_on_simplex(
        k in 1usize..5,
        raw in prop::collection::vec(-2.0f64..2.0, 36),
        p in prop::collection::vec(-1.0f64..2.0, 6),
    ) {
        let m = 6;
        let c: Vec<f64> = raw[..m * k].to_vec();
        let sol = solve_simplex_lsq(&c, k, &p, SolverOptions::default()).unwrap();
        prop_assert_eq!(sol.q.len(), k);
        prop_assert!(sol.q.iter().all(|&x| x >= 0.0));
        prop_assert!((sol.q.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn samplers_are_seed_deterministic(g in labeled_graph_strategy(40, 2), seed in any::<u64>()) {
        let all: Vec<usize> = (0..g.n()).collect();
        let labeled = g.labeled(&all).unwrap();
        let structural = StructuralParams { seeds_per_label: 2, sample_size: 10 };
        let params = graph_quant::shift::PpsParams { num_dists: 3, sample_size: 10, zipf_exponent: 1.0 };
        let render = |s: Vec<graph_quant::shift::ShiftSample>| s.iter().map(format_sample).collect::<String>();
        prop_assert_eq!(
            render(sample_pps(&labeled, 2, params, seed).unwrap()),
            render(sample_pps(&labeled, 2, params, seed).unwrap())
        );
        prop_assert_eq!(
            render(sample_bfs(&g, &all, structural, seed).unwrap()),
            render(sample_bfs(&g, &all, structural, seed).unwrap())
        );
        prop_assert_eq!(
            render(sample_rw(&g, &all, structural, WalkParams::default(), seed).unwrap()),
            render(sample_rw(&g, &all, structural, WalkParams::default(), seed).unwrap())
        );
        for s in sample_rw(&g, &all, structural, WalkParams::default(), seed).unwrap() {
            let mut v = s.vertices.clone();
            v.sort_unstable();
            v.dedup();
            prop_assert_eq!(v.len(), s.vertices.len());
            prop_assert!((s.true_prev.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pps_counts_follow_largest_remainder(
        k in 2usize..5,
        extra in prop::collection::vec(0usize..15, 5),
        n in 5usize..40,
        seed in any::<u64>(),
    ) {
        let pool: Vec<(usize, usize)> = (0..k)
            .flat_map(|c| std::iter::repeat_n(c, n + extra[c]))
            .enumerate()
            .collect();
        let params = graph_quant::shift::PpsParams { num_dists: 2, sample_size: n, zipf_exponent: 1.0 };
        for s in sample_pps(&pool, k, params, seed).unwrap() {
            let want = largest_remainder(n, s.provenance.target.as_ref().unwrap()).unwrap();
            let mut got = vec![0; k];
            for &v in &s.vertices {
                got[pool[v].1] += 1;
            }
            prop_assert_eq!(got, want);
            prop_assert!(!s.exhausted);
        }
    }

    #[test]
    fn largest_remainder_sums_to_total(total in 0usize..500, w in prop::collection::vec(0.0f64..10.0, 1..8)) {
        prop_assume!(w.iter().any(|&x| x > 0.0));
        let counts = largest_remainder(total, &w).unwrap();
        prop_assert_eq!(counts.iter().sum::<usize>(), total);
        let s: f64 = w.iter().sum();
        for (c, wi) in counts.iter().zip(&w) {
            prop_assert!((*c as f64 - total as f64 * wi / s).abs() < 1.0);
        }
    }

    #[test]
    fn ae_symmetric_and_bounded(k in 2usize..8, a in any::<u64>(), b in any::<u64>(), n in 1usize..1000) {
        let draw = |seed: u64| {
            let raw: Vec<f64> = (0..k).map(|i| ((seed.rotate_left(i as u32 * 7) % 1000) as f64) + 1.0).collect();
            let s: f64 = raw.iter().sum();
            raw.into_iter().map(|x| x / s).collect::<Vec<_>>()
        };
        let (q, q_hat) = (draw(a), draw(b));
        let x = ae(&q, &q_hat).unwrap();
        prop_assert_eq!(x, ae(&q_hat, &q).unwrap());
        prop_assert!((0.0..=1.0).contains(&x));
        prop_assert!(rae(&q, &q_hat, n).unwrap() >= 0.0);
    }

    #[test]
    fn ranks_follow_quantifiers_not_order(
        errs in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 3), 4),
        rotate in 0usize..4,
    ) {
        let names = ["A", "B", "C", "D"];
        let rows_for = |order: &[usize]| {
            let mut rows = Vec::new();
            for shift in ["PPS", "RW"] {
                for sample in 0..3 {
                    for &q in order {
                        rows.push(ResultRow {
                            repetition: 0,
                            dataset: "d".into(),
                            shift: shift.into(),
                            classifier: "ENQ".into(),
                            quantifier: names[q].into(),
                            sample,
                            sample_size: 10,
                            ae: Some(errs[q][sample] + if shift == "RW" { 0.1 * q as f64 } else { 0.0 }),
                            rae: Some(errs[q][sample]),
                            flags: String::new(),
                            error: String::new(),
                        });
                    }
                }
            }
            rows
        };
        let mut order = vec![0, 1, 2, 3];
        order.rotate_left(rotate);
        let key = |rows: Vec<ResultRow>| {
            let mut s: Vec<(String, String, String, u64, u64, Option<bool>)> = aggregate(&rows, &GroupKey::ALL)
                .unwrap()
                .into_iter()
                .map(|r| (r.kind, r.shift, r.quantifier, r.rank_ae.to_bits(), r.rank_rae.to_bits(), r.best_ae))
                .collect();
            s.sort();
            s
        };
        prop_assert_eq!(key(rows_for(&[0, 1, 2, 3])), key(rows_for(&order)));
    }
}

#[test]
fn mean_ranks_are_averaged() {
    let rows: Vec<ResultRow> = [("PPS", "A", 0.1), ("PPS", "B", 0.2), ("RW", "A", 0.3), ("RW", "B", 0.2)]
        .iter()
        .map(|&(shift, q, x)| ResultRow {
            repetition: 0,
            dataset: "d".into(),
            shift: shift.into(),
            classifier: "ENQ".into(),
            quantifier: q.into(),
            sample: 0,
            sample_size: 10,
            ae: Some(x),
            rae: Some(x),
            flags: String::new(),
            error: String::new(),
        })
        .collect();
    let summary = aggregate(&rows, &GroupKey::ALL).unwrap();
    let avg: Vec<f64> = summary.iter().filter(|r| r.kind == "average").map(|r| r.rank_ae).collect();
    assert_abs_diff_eq!(avg[0], 1.5);
    assert_abs_diff_eq!(avg[1], 1.5);
}

use cgexplain::cgnn::{CgnnConfig, CgnnModel};
use cgexplain::explainer::random_explanation;
use cgexplain::graph::{extract_subgraph, knn_edges, CellGraph};
use cgexplain::metrics::{ce_report, reduction, reduction_stats, relevance, weighted_f1, CeSample};
use cgexplain::numerics::Tensor2;
use cgexplain::rng::rng_from;
use rand::seq::SliceRandom;
use rand::Rng;

/// Per-class counts of true positives, false positives and false negatives.
fn oracle_weighted_f1(preds: &[usize], labels: &[usize]) -> f64 {
    let classes = preds.iter().chain(labels).max().unwrap() + 1;
    let mut total = 0.0;
    for c in 0..classes {
        let tp = preds
            .iter()
            .zip(labels)
            .filter(|&(&p, &l)| p == c && l == c)
            .count() as f64;
        let fp = preds
            .iter()
            .zip(labels)
            .filter(|&(&p, &l)| p == c && l != c)
            .count() as f64;
        let fneg = preds
            .iter()
            .zip(labels)
            .filter(|&(&p, &l)| p != c && l == c)
            .count() as f64;
        let support = tp + fneg;
        let f1 = if tp == 0.0 {
            0.0
        } else {
            2.0 * tp / (2.0 * tp + fp + fneg)
        };
        total += support / labels.len() as f64 * f1;
    }
    total
}

#[test]
fn weighted_f1_examples() {
    assert_eq!(weighted_f1(&[0, 1, 2, 1], &[0, 1, 2, 1]).unwrap(), 1.0);
    assert_eq!(weighted_f1(&[1, 0, 0, 1], &[0, 1, 1, 0]).unwrap(), 0.0);
    // class 0: P 1, R 1/2; class 1: P 1/2, R 1; both F1 = 2/3
    assert!((weighted_f1(&[0, 1, 1], &[0, 0, 1]).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    assert!(weighted_f1(&[], &[]).is_err());
    assert!(weighted_f1(&[0], &[0, 1]).is_err());
}

#[test]
fn weighted_f1_matches_oracle_and_ignores_order() {
    for i in 0..100 {
        let mut rng = rng_from(61, i);
        let n = rng.random_range(1..60);
        let c = rng.random_range(2..6);
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
        let preds: Vec<usize> = labels
            .iter()
            .map(|&l| {
                if rng.random_bool(0.6) {
                    l
                } else {
                    rng.random_range(0..c)
                }
            })
            .collect();
        let got = weighted_f1(&preds, &labels).unwrap();
        assert!((got - oracle_weighted_f1(&preds, &labels)).abs() < 1e-12);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let p2: Vec<usize> = order.iter().map(|&j| preds[j]).collect();
        let l2: Vec<usize> = order.iter().map(|&j| labels[j]).collect();
        assert!((weighted_f1(&p2, &l2).unwrap() - got).abs() < 1e-12);
    }
}

fn graph(seed: u64, n: usize) -> CellGraph {
    let mut rng = rng_from(seed, 0);
    let pts: Vec<[f64; 2]> = (0..n)
        .map(|_| [rng.random_range(0.0..80.0), rng.random_range(0.0..80.0)])
        .collect();
    let feats = (0..n * 3).map(|_| rng.random_range(-1.0..1.0)).collect();
    CellGraph::new(
        Tensor2::from_vec(n, 3, feats).unwrap(),
        pts.clone(),
        knn_edges(&pts, 4),
        Some(0),
    )
    .unwrap()
}

#[test]
fn reductions_are_bounded_and_monotone() {
    let g = graph(1, 100);
    let five = extract_subgraph(&g, &[0, 1, 2, 3, 4]).unwrap();
    assert_eq!(reduction(&g, &five.graph).0, 95.0);
    assert_eq!(reduction(&g, &g), (0.0, 0.0));
    let single = graph(2, 1);
    assert_eq!(reduction(&single, &single), (0.0, 0.0));

    let mut last = (100.0, 100.0);
    for k in 1..=100 {
        let keep: Vec<usize> = (0..k).collect();
        let (nr, er) = reduction(&g, &extract_subgraph(&g, &keep).unwrap().graph);
        assert!((0.0..=100.0).contains(&nr) && (0.0..=100.0).contains(&er));
        assert!(nr <= last.0 && er <= last.1);
        last = (nr, er);
    }
    let stats = reduction_stats(&[(&g, &five.graph), (&g, &g)], &[0, 1], 2).unwrap();
    assert_eq!(stats.all_node, Some(47.5));
    assert_eq!(stats.per_class_node, vec![Some(95.0), Some(0.0)]);
}

#[test]
fn uniform_model_has_log_c_cross_entropy() {
    let mut model = CgnnModel::init(CgnnConfig::default(), 3, 4).unwrap();
    model
        .params
        .iter_mut()
        .for_each(|p| *p = Tensor2::zeros(p.rows(), p.cols()));
    let g = graph(3, 20);
    let e = extract_subgraph(&g, &[0, 3]).unwrap().graph;
    let r = vec![random_explanation(&g, 2, 1, 0).unwrap().graph];
    let samples = [CeSample {
        original: &g,
        explanation: &e,
        random: &r,
        label: 2,
    }];
    let rep = ce_report(&model, &samples).unwrap();
    let t = rep.all.unwrap();
    for v in [t.original, t.explanation, t.random] {
        assert!((v - 4f64.ln()).abs() < 1e-12);
    }
    assert_eq!(rep, ce_report(&model, &samples).unwrap());
    assert_eq!(rep.per_class[2], rep.all);
    assert_eq!(rep.per_class[0], None);
}

#[test]
fn random_recall_matches_hypergeometric_expectation() {
    let n = 40;
    let g = graph(4, n);
    let planted: Vec<usize> = (5..15).collect();
    let k = 8;
    let draws = 1000;
    let mut total = 0.0;
    for seed in 0..draws {
        let sub = random_explanation(&g, k, usize::MAX, seed).unwrap();
        total += relevance(&sub.origin, &planted).unwrap().recall;
    }
    let mean = total / draws as f64;
    let (nn, m, kk) = (n as f64, planted.len() as f64, k as f64);
    let expected = kk / nn;
    let var_hits = kk * (m / nn) * ((nn - m) / nn) * ((nn - kk) / (nn - 1.0));
    let sd = var_hits.sqrt() / m / (draws as f64).sqrt();
    assert!(
        (mean - expected).abs() <= 3.0 * sd,
        "{mean} vs {expected} (sd {sd})"
    );
}

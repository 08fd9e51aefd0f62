//! Node-mask explanations of a trained classifier.
//!
//! A per-node logit vector `m` scales the input features by `sigmoid(m)`.
//! Adam minimizes
//!
//! ```text
//! L = L_KD(y_t, y_hat) + alpha_mask * sum_i sigmoid(m_i) + alpha_entropy * H_bin(sigmoid(m))
//! L_KD = lambda * CE(y_t, argmax y_hat) + (1 - lambda) * T^2 * KL(softmax(y_hat/T) || softmax(y_t/T))
//! lambda = clamp(H(softmax(y_t)) / H(softmax(y_hat)))
//! ```
//!
//! where `y_hat` are the logits of the unmasked graph and `y_t` those of the
//! masked graph at step `t`. After every step the mask is binarized and the
//! induced subgraph classified; an iterate whose subgraph changes the
//! predicted class is rejected and optimization stops at the previous one.

use rand::seq::index;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cgnn::{CgnnModel, Prediction};
use crate::data::{ExplanationRecord, StopReason};
use crate::graph::{extract_subgraph, CellGraph, Subgraph};
use crate::numerics::{
    shannon_entropy, sigmoid, softmax, AdamConfig, AdamState, GradTape, Tensor2, Var,
};
use crate::rng::rng_from;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum MaskInit {
    #[default]
    Zeros,
    Normal {
        std: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainerConfig {
    pub lr: f64,
    pub alpha_mask: f64,
    pub alpha_entropy: f64,
    pub max_iters: usize,
    /// Relative change of the total loss across `convergence_window`
    /// iterations below which optimization stops.
    pub convergence_tol: f64,
    pub convergence_window: usize,
    pub mask_init: MaskInit,
    pub binarize_threshold: f64,
    pub distill_temperature: f64,
    pub lambda_clamp: (f64, f64),
    pub seed: u64,
}

impl Default for ExplainerConfig {
    fn default() -> Self {
        Self {
            lr: 0.01,
            alpha_mask: 0.005,
            alpha_entropy: 0.1,
            max_iters: 500,
            convergence_tol: 1e-4,
            convergence_window: 10,
            mask_init: MaskInit::Zeros,
            binarize_threshold: 0.5,
            distill_temperature: 1.0,
            lambda_clamp: (0.0, 1.0),
            seed: 0,
        }
    }
}

impl ExplainerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lr.is_nan() || self.lr <= 0.0 {
            return Err(Error::Config("explainer lr must be positive".into()));
        }
        if !(self.alpha_mask >= 0.0 && self.alpha_entropy >= 0.0) {
            return Err(Error::Config(
                "regularizer weights must be non-negative".into(),
            ));
        }
        if !(self.binarize_threshold > 0.0 && self.binarize_threshold < 1.0) {
            return Err(Error::Config(
                "binarize threshold must lie in (0, 1)".into(),
            ));
        }
        if self.distill_temperature.is_nan() || self.distill_temperature <= 0.0 {
            return Err(Error::Config(
                "distillation temperature must be positive".into(),
            ));
        }
        let (lo, hi) = self.lambda_clamp;
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(Error::Config("lambda clamp must satisfy lo <= hi".into()));
        }
        if self.convergence_window == 0 {
            return Err(Error::Config("convergence window must be >= 1".into()));
        }
        Ok(())
    }
}

/// Mask logits and their sigmoid activations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeMask {
    pub logits: Vec<f64>,
    pub activation: Vec<f64>,
}

impl NodeMask {
    pub fn from_logits(logits: Vec<f64>) -> Self {
        let activation = logits.iter().map(|&m| sigmoid(m)).collect();
        Self { logits, activation }
    }

    pub fn len(&self) -> usize {
        self.logits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logits.is_empty()
    }
}

/// Nodes whose activation reaches `threshold` (inclusive).
pub fn binarize_mask(mask: &NodeMask, threshold: f64) -> Vec<usize> {
    mask.activation
        .iter()
        .enumerate()
        .filter(|(_, &s)| s >= threshold)
        .map(|(i, _)| i)
        .collect()
}

/// Value of the distillation objective and its gradient with respect to
/// the current logits.
#[derive(Debug, Clone, PartialEq)]
pub struct KdLoss {
    pub value: f64,
    pub lambda: f64,
    pub cross_entropy: f64,
    pub distillation: f64,
    pub grad: Vec<f64>,
}

/// The entropy ratio weighting hard cross-entropy against distillation.
pub fn kd_lambda(current_logits: &[f64], original_logits: &[f64], clamp: (f64, f64)) -> f64 {
    let num = shannon_entropy(&softmax(current_logits));
    let den = shannon_entropy(&softmax(original_logits)).max(1e-8);
    (num / den).clamp(clamp.0, clamp.1)
}

/// Records `L_KD` on the tape for `logits` (a `1 x C` row). Returns the loss
/// var, lambda, and the CE and distillation vars.
fn record_kd<'a>(
    tape: &mut GradTape<'a>,
    logits: Var,
    original_logits: &[f64],
    cfg: &ExplainerConfig,
) -> Result<(Var, f64, Var, Var)> {
    let current = tape.value(logits).row(0).to_vec();
    if current.len() != original_logits.len() {
        return Err(Error::ClassCount {
            expected: original_logits.len(),
            found: current.len(),
        });
    }
    let lambda = kd_lambda(&current, original_logits, cfg.lambda_clamp);
    let target = crate::cgnn::argmax(original_logits);
    let t = cfg.distill_temperature;
    let ce = tape.softmax_cross_entropy(logits, &[target])?;
    let teacher: Vec<f64> = original_logits.iter().map(|v| v / t).collect();
    let teacher = Tensor2::row_vector(softmax(&teacher));
    let scaled = tape.scale(logits, 1.0 / t);
    let student = tape.softmax(scaled);
    let kl = tape.kl_divergence(&teacher, student)?;
    let dist = tape.scale(kl, t * t);
    let hard = tape.scale(ce, lambda);
    let soft = tape.scale(dist, 1.0 - lambda);
    let total = tape.add(hard, soft)?;
    Ok((total, lambda, ce, dist))
}

/// `L_KD` of `current_logits` against `original_logits`. `lambda` is held
/// constant when differentiating.
pub fn kd_loss(
    current_logits: &[f64],
    original_logits: &[f64],
    cfg: &ExplainerConfig,
) -> Result<KdLoss> {
    let mut tape = GradTape::new();
    let y = tape.param(Tensor2::row_vector(current_logits.to_vec()));
    let (total, lambda, ce, dist) = record_kd(&mut tape, y, original_logits, cfg)?;
    let grads = tape.backward(total)?;
    Ok(KdLoss {
        value: tape.value(total).item(),
        lambda,
        cross_entropy: tape.value(ce).item(),
        distillation: tape.value(dist).item(),
        grad: grads.get(y).into_data(),
    })
}

/// Loss terms at one iterate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossComponents {
    pub total: f64,
    pub kd: f64,
    /// `alpha_mask * sum sigmoid(m)`
    pub size: f64,
    /// `alpha_entropy * mean binary entropy of sigmoid(m)`
    pub entropy: f64,
    pub lambda: f64,
}

/// Explainer objective at `mask_logits` and its gradient with respect to
/// them.
pub fn explainer_loss(
    model: &CgnnModel,
    graph: &CellGraph,
    mask_logits: &[f64],
    original: &Prediction,
    cfg: &ExplainerConfig,
) -> Result<(LossComponents, Vec<f64>)> {
    if mask_logits.len() != graph.num_nodes() {
        return Err(Error::Shape {
            op: "explainer_loss",
            left: (graph.num_nodes(), 1),
            right: (mask_logits.len(), 1),
        });
    }
    if graph.feature_dim() != model.input_dim {
        return Err(Error::FeatureDim {
            expected: model.input_dim,
            found: graph.feature_dim(),
        });
    }
    let mut tape = GradTape::new();
    let m = tape.param(Tensor2::column(mask_logits.to_vec()));
    let s = tape.sigmoid(m);
    let x = tape.constant(graph.features().clone());
    let masked = tape.row_scale(x, s)?;
    let (logits, _) = model.record(
        &mut tape,
        masked,
        graph.neighbors(),
        std::slice::from_ref(&(0..graph.num_nodes())),
        false,
    )?;
    let (kd, lambda, _, _) = record_kd(&mut tape, logits, &original.logits, cfg)?;
    let size_sum = tape.sum(s);
    let size = tape.scale(size_sum, cfg.alpha_mask);
    let ent = tape.mean_binary_entropy(s)?;
    let entropy = tape.scale(ent, cfg.alpha_entropy);
    let reg = tape.add(size, entropy)?;
    let total = tape.add(kd, reg)?;
    let grads = tape.backward(total)?;
    let components = LossComponents {
        total: tape.value(total).item(),
        kd: tape.value(kd).item(),
        size: tape.value(size).item(),
        entropy: tape.value(entropy).item(),
        lambda,
    };
    Ok((components, grads.get(m).into_data()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Explanation {
    pub roi_id: String,
    pub mask: NodeMask,
    /// Original-graph indices of the retained nodes.
    pub kept_nodes: Vec<usize>,
    pub subgraph: Subgraph,
    pub stop_reason: StopReason,
    /// No node reached the threshold; the single most active node was kept.
    pub empty_fallback: bool,
    /// The initial mask already flipped the label and was reset to zeros.
    pub init_reset: bool,
    /// One entry per executed iteration, evaluated before that step.
    pub loss_trace: Vec<LossComponents>,
    pub original_prediction: Prediction,
    pub explanation_prediction: Prediction,
}

impl Explanation {
    pub fn iterations(&self) -> usize {
        self.loss_trace.len()
    }

    /// Induced edges of the kept nodes in original numbering.
    pub fn kept_edges(&self) -> Vec<[usize; 2]> {
        self.subgraph
            .graph
            .edges()
            .iter()
            .map(|&(u, v)| [self.subgraph.origin[u], self.subgraph.origin[v]])
            .collect()
    }

    pub fn to_record(&self) -> ExplanationRecord {
        ExplanationRecord {
            roi_id: self.roi_id.clone(),
            mask_logits: self.mask.logits.clone(),
            sigmoid: self.mask.activation.clone(),
            kept_nodes: self.kept_nodes.clone(),
            kept_edges: self.kept_edges(),
            stop_reason: self.stop_reason,
            loss_trace: self.loss_trace.iter().map(|c| c.total).collect(),
            predicted_class: self.explanation_prediction.predicted_class,
            empty_fallback: self.empty_fallback,
        }
    }

    /// Kept centroids, activations and induced edges for external plotting.
    pub fn overlay(&self, graph: &CellGraph) -> Overlay {
        Overlay {
            roi_id: self.roi_id.clone(),
            nodes: self
                .kept_nodes
                .iter()
                .map(|&i| OverlayNode {
                    index: i,
                    x: graph.centroids_px()[i][0],
                    y: graph.centroids_px()[i][1],
                    sigma: self.mask.activation[i],
                })
                .collect(),
            edges: self.kept_edges(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlayNode {
    pub index: usize,
    pub x: f64,
    pub y: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Overlay {
    pub roi_id: String,
    pub nodes: Vec<OverlayNode>,
    pub edges: Vec<[usize; 2]>,
}

/// Binarized iterate with its classified subgraph.
struct Candidate {
    kept: Vec<usize>,
    subgraph: Subgraph,
    prediction: Prediction,
    empty_fallback: bool,
}

fn evaluate_candidate(
    model: &CgnnModel,
    graph: &CellGraph,
    mask: &NodeMask,
    threshold: f64,
) -> Result<Candidate> {
    let mut kept = binarize_mask(mask, threshold);
    let empty_fallback = kept.is_empty();
    if empty_fallback {
        kept = vec![crate::cgnn::argmax(&mask.activation)];
    }
    let subgraph = extract_subgraph(graph, &kept)?;
    let prediction = model.predict(&subgraph.graph)?;
    Ok(Candidate {
        kept,
        subgraph,
        prediction,
        empty_fallback,
    })
}

fn initial_logits(n: usize, cfg: &ExplainerConfig) -> Result<Vec<f64>> {
    match cfg.mask_init {
        MaskInit::Zeros => Ok(vec![0.0; n]),
        MaskInit::Normal { std } => {
            let dist =
                Normal::new(0.0, std).map_err(|e| Error::Config(format!("mask init: {e}")))?;
            let mut rng = rng_from(cfg.seed, 0);
            Ok((0..n).map(|_| dist.sample(&mut rng)).collect())
        }
    }
}

fn converged(trace: &[LossComponents], cfg: &ExplainerConfig) -> bool {
    let w = cfg.convergence_window;
    if trace.len() <= w {
        return false;
    }
    let now = trace[trace.len() - 1].total;
    let then = trace[trace.len() - 1 - w].total;
    (now - then).abs() / then.abs().max(1e-12) < cfg.convergence_tol
}

/// Optimizes a node mask for `graph` and returns the binarized explanation.
pub fn explain(
    model: &CgnnModel,
    graph: &CellGraph,
    roi_id: &str,
    cfg: &ExplainerConfig,
) -> Result<Explanation> {
    explain_with(model, graph, roi_id, cfg, |_, _, _| {})
}

/// [`explain`], calling `observe(iteration, mask, loss)` with every accepted
/// iterate and the loss evaluated just before the step that produced it.
pub fn explain_with<F>(
    model: &CgnnModel,
    graph: &CellGraph,
    roi_id: &str,
    cfg: &ExplainerConfig,
    mut observe: F,
) -> Result<Explanation>
where
    F: FnMut(usize, &NodeMask, &LossComponents),
{
    cfg.validate()?;
    let original = model.predict(graph)?;
    let target = original.predicted_class;
    let n = graph.num_nodes();

    let mut mask = NodeMask::from_logits(initial_logits(n, cfg)?);
    let mut accepted = evaluate_candidate(model, graph, &mask, cfg.binarize_threshold)?;
    let mut init_reset = false;
    if accepted.prediction.predicted_class != target {
        mask = NodeMask::from_logits(vec![0.0; n]);
        accepted = evaluate_candidate(model, graph, &mask, cfg.binarize_threshold)?;
        init_reset = true;
    }

    let mut params = vec![Tensor2::column(mask.logits.clone())];
    let mut adam = AdamState::new(AdamConfig::new(cfg.lr, 0.0), &params);
    let mut trace = Vec::new();
    let mut stop_reason = StopReason::MaxIters;

    for iteration in 0..cfg.max_iters {
        let (components, grad) = explainer_loss(model, graph, &mask.logits, &original, cfg)?;
        trace.push(components);
        adam.step(&mut params, &[Tensor2::column(grad)])?;
        let next = NodeMask::from_logits(params[0].data().to_vec());
        let candidate = evaluate_candidate(model, graph, &next, cfg.binarize_threshold)?;
        if candidate.prediction.predicted_class != target {
            stop_reason = StopReason::LabelFlip;
            break;
        }
        mask = next;
        accepted = candidate;
        observe(iteration, &mask, &components);
        if converged(&trace, cfg) {
            stop_reason = StopReason::Converged;
            break;
        }
    }

    Ok(Explanation {
        roi_id: roi_id.to_string(),
        mask,
        kept_nodes: accepted.kept,
        subgraph: accepted.subgraph,
        stop_reason,
        empty_fallback: accepted.empty_fallback,
        init_reset,
        loss_trace: trace,
        original_prediction: original,
        explanation_prediction: accepted.prediction,
    })
}

/// Random baseline: `n_nodes` uniformly chosen nodes and at most `n_edges`
/// uniformly chosen edges among those they induce.
pub fn random_explanation(
    graph: &CellGraph,
    n_nodes: usize,
    n_edges: usize,
    seed: u64,
) -> Result<Subgraph> {
    if n_nodes == 0 {
        return Err(Error::EmptyExplanation);
    }
    if n_nodes > graph.num_nodes() {
        return Err(Error::Config(format!(
            "cannot sample {n_nodes} nodes from a graph with {}",
            graph.num_nodes()
        )));
    }
    let mut rng = rng_from(seed, 0);
    let mut nodes = index::sample(&mut rng, graph.num_nodes(), n_nodes).into_vec();
    nodes.sort_unstable();
    let induced = extract_subgraph(graph, &nodes)?;
    let all_edges = induced.graph.edges();
    let keep = n_edges.min(all_edges.len());
    let mut picked = index::sample(&mut rng, all_edges.len(), keep).into_vec();
    picked.sort_unstable();
    let edges = picked.into_iter().map(|i| all_edges[i]).collect();
    let g = CellGraph::new(
        induced.graph.features().clone(),
        induced.graph.centroids_px().to_vec(),
        edges,
        graph.label(),
    )?;
    Ok(Subgraph {
        graph: g,
        origin: induced.origin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    #[test]
    fn kd_loss_vanishes_for_matching_confident_logits() {
        let cfg = ExplainerConfig::default();
        let kd = kd_loss(&[30.0, -30.0], &[30.0, -30.0], &cfg).unwrap();
        assert!(kd.distillation.abs() < 1e-12);
        assert!(kd.cross_entropy < 1e-12);
        assert!(kd.value < 1e-12);
    }

    #[test]
    fn kd_loss_uniform_student_confident_teacher() {
        let cfg = ExplainerConfig::default();
        let kd = kd_loss(&[0.0, 0.0], &[8.0, -8.0], &cfg).unwrap();
        assert_eq!(kd.lambda, 1.0);
        assert!((kd.value - LN_2).abs() < 1e-12);
    }

    #[test]
    fn lambda_is_clamped() {
        // student more uncertain than teacher: raw ratio > 1
        assert_eq!(
            kd_lambda(&[0.0, 0.0, 0.0], &[2.0, 0.0, -1.0], (0.0, 1.0)),
            1.0
        );
        assert!(kd_lambda(&[2.0, 0.0], &[0.5, 0.0], (0.0, 1.0)) < 1.0);
    }

    #[test]
    fn binarize_examples() {
        let half = NodeMask::from_logits(vec![0.0; 4]);
        assert_eq!(binarize_mask(&half, 0.5), vec![0, 1, 2, 3]);
        let m = NodeMask {
            logits: vec![],
            activation: vec![0.9, 0.1],
        };
        assert_eq!(binarize_mask(&m, 0.5), vec![0]);
    }

    fn path(n: usize) -> CellGraph {
        let edges = (1..n).map(|i| (i - 1, i)).collect();
        let feats = Tensor2::from_vec(n, 2, (0..2 * n).map(|i| i as f64).collect()).unwrap();
        CellGraph::new(feats, vec![[0.0; 2]; n], edges, Some(0)).unwrap()
    }

    #[test]
    fn random_explanation_examples() {
        let g = path(6);
        let same = random_explanation(&g, 6, g.num_edges(), 3).unwrap();
        assert_eq!(same.graph, g);
        let one = random_explanation(&g, 1, 10, 3).unwrap();
        assert_eq!(one.graph.num_nodes(), 1);
        assert_eq!(one.graph.num_edges(), 0);
        assert!(random_explanation(&g, 0, 1, 3).is_err());
        assert!(random_explanation(&g, 7, 1, 3).is_err());
        assert_eq!(
            random_explanation(&g, 4, 2, 11).unwrap(),
            random_explanation(&g, 4, 2, 11).unwrap()
        );
    }

    fn random_model(seed: u64) -> CgnnModel {
        let cfg = crate::cgnn::CgnnConfig {
            hidden_dim: 8,
            classifier_hidden: 8,
            seed,
            ..Default::default()
        };
        CgnnModel::init(cfg, 2, 3).unwrap()
    }

    /// First-layer weight zeroed: every node embedding is the same, so the
    /// logits ignore the mask.
    fn degenerate_model() -> CgnnModel {
        let mut m = random_model(1);
        let (r, c) = m.params[0].shape();
        m.params[0] = Tensor2::zeros(r, c);
        m
    }

    #[test]
    fn closed_mask_matches_zero_feature_forward() {
        let model = random_model(2);
        let g = path(6);
        let cfg = ExplainerConfig::default();
        let original = model.predict(&g).unwrap();
        let (c, _) = explainer_loss(&model, &g, &[-30.0; 6], &original, &cfg).unwrap();
        assert!(c.size < 1e-12 && c.entropy < 1e-10);
        let zeroed = CellGraph::new(
            Tensor2::zeros(6, 2),
            vec![[0.0; 2]; 6],
            g.edges().to_vec(),
            None,
        )
        .unwrap();
        let kd = kd_loss(
            &model.predict(&zeroed).unwrap().logits,
            &original.logits,
            &cfg,
        )
        .unwrap();
        assert!((c.kd - kd.value).abs() < 1e-9);
    }

    #[test]
    fn half_open_mask_regularizers() {
        let model = random_model(2);
        let g = path(6);
        let cfg = ExplainerConfig::default();
        let original = model.predict(&g).unwrap();
        let (c, _) = explainer_loss(&model, &g, &[0.0; 6], &original, &cfg).unwrap();
        assert!((c.size - 0.005 * 6.0 * 0.5).abs() < 1e-15);
        assert!((c.entropy - 0.1 * LN_2).abs() < 1e-12);
        assert!((c.total - c.kd - c.size - c.entropy).abs() < 1e-12);
    }

    #[test]
    fn degenerate_model_has_no_kd_gradient_and_collapses() {
        let model = degenerate_model();
        let g = path(6);
        let silent = ExplainerConfig {
            alpha_mask: 0.0,
            alpha_entropy: 0.0,
            ..Default::default()
        };
        let original = model.predict(&g).unwrap();
        let (_, grad) = explainer_loss(
            &model,
            &g,
            &[0.3, -1.0, 2.0, 0.0, 0.5, -0.2],
            &original,
            &silent,
        )
        .unwrap();
        assert!(grad.iter().all(|&v| v == 0.0));

        let cfg = ExplainerConfig {
            max_iters: 5000,
            ..Default::default()
        };
        let mut sizes = Vec::new();
        let e = explain_with(&model, &g, "d", &cfg, |_, m, _| {
            sizes.push(m.activation.iter().sum::<f64>())
        })
        .unwrap();
        assert_eq!(e.stop_reason, StopReason::Converged);
        assert!(sizes.windows(2).all(|w| w[1] < w[0]));
        assert_eq!(e.kept_nodes.len(), 1);
        assert!(e.empty_fallback);
        assert_eq!(
            e.explanation_prediction.predicted_class,
            e.original_prediction.predicted_class
        );
    }

    #[test]
    fn entropy_pressure_shrinks_mid_range() {
        let model = degenerate_model();
        let g = path(6);
        let cfg = ExplainerConfig {
            alpha_mask: 0.0,
            mask_init: MaskInit::Normal { std: 0.1 },
            seed: 5,
            convergence_tol: 0.0,
            ..Default::default()
        };
        let mut mid = Vec::new();
        explain_with(&model, &g, "d", &cfg, |_, m, _| {
            mid.push(
                m.activation
                    .iter()
                    .filter(|&&s| (0.05..=0.95).contains(&s))
                    .count(),
            )
        })
        .unwrap();
        assert_eq!(mid.len(), cfg.max_iters);
        assert!(mid[10..].windows(2).all(|w| w[1] <= w[0]));
        assert!(*mid.last().unwrap() < 6);
    }

    #[test]
    fn explanations_preserve_label_and_match_threshold() {
        for seed in 0..8 {
            let model = random_model(seed);
            let mut rng = rng_from(seed, 9);
            let n = 12;
            let feats = crate::numerics::gradcheck::random_tensor(&mut rng, n, 2, -2.0, 2.0);
            let pts: Vec<[f64; 2]> = (0..n)
                .map(|i| [i as f64 * 10.0, (i % 3) as f64 * 7.0])
                .collect();
            let g =
                CellGraph::new(feats, pts.clone(), crate::graph::knn_edges(&pts, 3), None).unwrap();
            let cfg = ExplainerConfig {
                max_iters: 150,
                ..Default::default()
            };
            let e = explain(&model, &g, "r", &cfg).unwrap();
            assert_eq!(
                e.explanation_prediction.predicted_class,
                e.original_prediction.predicted_class
            );
            if !e.empty_fallback {
                assert_eq!(e.kept_nodes, binarize_mask(&e.mask, cfg.binarize_threshold));
            }
            assert_eq!(e, explain(&model, &g, "r", &cfg).unwrap());
            assert!(e.to_record().validate().is_ok());
        }
    }

    #[test]
    fn binarize_is_monotone_in_threshold() {
        let mut rng = rng_from(3, 0);
        for _ in 0..200 {
            let logits: Vec<f64> = (0..20)
                .map(|_| rand::Rng::random_range(&mut rng, -4.0..4.0))
                .collect();
            let m = NodeMask::from_logits(logits);
            let a: f64 = rand::Rng::random_range(&mut rng, 0.01..0.99);
            let b: f64 = rand::Rng::random_range(&mut rng, a..0.999);
            let low = binarize_mask(&m, a);
            assert!(binarize_mask(&m, b).iter().all(|i| low.contains(i)));
        }
    }

    #[test]
    fn random_baseline_inclusion_is_uniform() {
        let n = 10;
        let g = path(n);
        let draws = 10_000;
        let k = 3;
        let mut counts = vec![0usize; n];
        for seed in 0..draws {
            let s = random_explanation(&g, k, 1, seed as u64).unwrap();
            assert_eq!(s.graph.num_nodes(), k);
            assert!(s.graph.num_edges() <= 1);
            for &o in &s.origin {
                counts[o] += 1;
            }
        }
        let p = k as f64 / n as f64;
        let mean = draws as f64 * p;
        let sd = (draws as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - mean).abs() <= 3.0 * sd, "count {c} vs {mean}");
        }
    }
}

//! Finite-difference checks of the composite losses, run by `gradcheck`.

use rand::Rng;

use crate::cgnn::{loss_and_gradients, CgnnConfig, CgnnModel, Readout};
use crate::explainer::{explainer_loss, kd_loss, ExplainerConfig};
use crate::graph::{knn_edges, CellGraph};
use crate::numerics::gradcheck::{check_primitives, random_tensor, CheckOutcome, FD_STEP};
use crate::numerics::{grad_check, Tensor2};
use crate::rng::rng_from;
use crate::Result;

/// Tolerance for single primitives.
pub const PRIMITIVE_TOLERANCE: f64 = 1e-6;
/// Tolerance for losses composed through the whole network.
pub const COMPOSITE_TOLERANCE: f64 = 1e-4;

const GRAPH_NODES: usize = 6;
const FEATURE_DIM: usize = 4;
const NUM_CLASSES: usize = 3;

/// Random connected-ish 6-node graph with a label.
fn random_graph(seed: u64, ordinal: u64, label: usize) -> Result<CellGraph> {
    let mut rng = rng_from(seed, ordinal);
    let points: Vec<[f64; 2]> = (0..GRAPH_NODES)
        .map(|_| [rng.random_range(0.0..100.0), rng.random_range(0.0..100.0)])
        .collect();
    let features = random_tensor(&mut rng, GRAPH_NODES, FEATURE_DIM, -1.5, 1.5);
    CellGraph::new(features, points.clone(), knn_edges(&points, 2), Some(label))
}

/// Default-sized model with every parameter, biases included, randomized.
fn random_model(seed: u64, readout: Readout) -> Result<CgnnModel> {
    let cfg = CgnnConfig {
        readout,
        seed,
        ..CgnnConfig::default()
    };
    let mut model = CgnnModel::init(cfg, FEATURE_DIM, NUM_CLASSES)?;
    let mut rng = rng_from(seed, 1 << 40);
    for p in &mut model.params {
        *p = random_tensor(&mut rng, p.rows(), p.cols(), -0.5, 0.5);
    }
    Ok(model)
}

fn flatten(params: &[Tensor2]) -> Vec<f64> {
    params
        .iter()
        .flat_map(|p| p.data().iter().copied())
        .collect()
}

fn unflatten(template: &[Tensor2], flat: &[f64]) -> Result<Vec<Tensor2>> {
    let mut out = Vec::with_capacity(template.len());
    let mut offset = 0;
    for p in template {
        let n = p.rows() * p.cols();
        out.push(Tensor2::from_vec(
            p.rows(),
            p.cols(),
            flat[offset..offset + n].to_vec(),
        )?);
        offset += n;
    }
    Ok(out)
}

fn check_training_loss(seed: u64, readout: Readout) -> Result<f64> {
    let model = random_model(seed, readout)?;
    let graphs = [random_graph(seed, 1, 0)?, random_graph(seed, 2, 2)?];
    let refs: Vec<&CellGraph> = graphs.iter().collect();
    let f = |flat: &[f64]| -> Result<(f64, Vec<f64>)> {
        let mut m = model.clone();
        m.params = unflatten(&model.params, flat)?;
        let (loss, grads) = loss_and_gradients(&m, &refs)?;
        Ok((loss, flatten(&grads)))
    };
    Ok(grad_check(f, &flatten(&model.params), FD_STEP)?.max_rel_err)
}

fn check_explainer_loss(seed: u64) -> Result<f64> {
    let model = random_model(seed, Readout::Mean)?;
    let graph = random_graph(seed, 3, 1)?;
    let original = model.predict(&graph)?;
    let cfg = ExplainerConfig::default();
    let mut rng = rng_from(seed, 4);
    let point: Vec<f64> = (0..GRAPH_NODES)
        .map(|_| rng.random_range(-2.0..2.0))
        .collect();
    let f = |m: &[f64]| -> Result<(f64, Vec<f64>)> {
        let (c, g) = explainer_loss(&model, &graph, m, &original, &cfg)?;
        Ok((c.total, g))
    };
    Ok(grad_check(f, &point, FD_STEP)?.max_rel_err)
}

fn check_kd_loss(seed: u64, instances: usize) -> Result<f64> {
    let cfg = ExplainerConfig::default();
    let mut worst: f64 = 0.0;
    for i in 0..instances {
        let mut rng = rng_from(seed, 100 + i as u64);
        let original: Vec<f64> = (0..NUM_CLASSES)
            .map(|_| rng.random_range(-3.0..3.0))
            .collect();
        let point: Vec<f64> = (0..NUM_CLASSES)
            .map(|_| rng.random_range(-3.0..3.0))
            .collect();
        // lambda is held constant in the analytic gradient, so the finite
        // difference must hold it constant too.
        let lambda_cfg = |y: &[f64]| {
            let lambda = crate::explainer::kd_lambda(y, &original, cfg.lambda_clamp);
            ExplainerConfig {
                lambda_clamp: (lambda, lambda),
                ..cfg.clone()
            }
        };
        let frozen = lambda_cfg(&point);
        let f = |y: &[f64]| -> Result<(f64, Vec<f64>)> {
            let kd = kd_loss(y, &original, &frozen)?;
            Ok((kd.value, kd.grad))
        };
        worst = worst.max(grad_check(f, &point, FD_STEP)?.max_rel_err);
    }
    Ok(worst)
}

/// Composite checks: training loss (mean and sum readout) with respect to
/// all parameters, distillation loss with respect to logits, explainer
/// loss with respect to mask logits.
pub fn check_composites(seed: u64) -> Result<Vec<CheckOutcome>> {
    let outcome = |name: &str, err: f64, tolerance: f64| CheckOutcome {
        name: name.to_string(),
        max_rel_err: err,
        tolerance,
    };
    Ok(vec![
        outcome(
            "training_loss_mean_readout",
            check_training_loss(seed, Readout::Mean)?,
            COMPOSITE_TOLERANCE,
        ),
        outcome(
            "training_loss_sum_readout",
            check_training_loss(seed, Readout::Sum)?,
            COMPOSITE_TOLERANCE,
        ),
        outcome("kd_loss", check_kd_loss(seed, 50)?, PRIMITIVE_TOLERANCE),
        outcome(
            "explainer_loss",
            check_explainer_loss(seed)?,
            COMPOSITE_TOLERANCE,
        ),
    ])
}

/// Every primitive and composite check.
pub fn check_all(seed: u64, primitive_instances: usize) -> Result<Vec<CheckOutcome>> {
    let mut out = check_primitives(seed, primitive_instances, PRIMITIVE_TOLERANCE)?;
    out.extend(check_composites(seed)?);
    Ok(out)
}

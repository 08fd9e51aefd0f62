//! GIN graph classifier.
//!
//! Each GIN layer computes `m_v = (1 + eps) h_v + sum_{u in N(v)} h_u` and
//! passes it through an MLP with ReLU after every sublayer. Node embeddings
//! of the last layer are pooled per graph and fed to an MLP classifier head.
//! An optional per-node mask scales the input features by `sigmoid(mask)`.

use std::ops::Range;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{normalize_features, DatasetSplit, FeatureStats};
use crate::graph::{disjoint_union, CellGraph, GraphConfig};
use crate::metrics::weighted_f1;
use crate::numerics::{
    log_sum_exp, softmax, AdamConfig, AdamState, GradTape, Tensor2, Var, WeightDecayMode,
};
use crate::rng::rng_from;
use crate::{json, Error, Result};

/// Graph-level pooling of node embeddings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Readout {
    #[default]
    Mean,
    Sum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CgnnConfig {
    pub num_layers: usize,
    pub hidden_dim: usize,
    /// Linear sublayers in every GIN MLP.
    pub mlp_depth: usize,
    pub classifier_hidden: usize,
    /// Linear sublayers in the classifier head.
    pub classifier_depth: usize,
    pub readout: Readout,
    pub epsilon_gin: f64,
    pub lr: f64,
    pub weight_decay: f64,
    #[serde(default)]
    pub decay_mode: WeightDecayMode,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for CgnnConfig {
    fn default() -> Self {
        Self {
            num_layers: 3,
            hidden_dim: 32,
            mlp_depth: 2,
            classifier_hidden: 64,
            classifier_depth: 2,
            readout: Readout::Mean,
            epsilon_gin: 0.0,
            lr: 1e-3,
            weight_decay: 5e-4,
            decay_mode: WeightDecayMode::Decoupled,
            batch_size: 16,
            epochs: 100,
            seed: 0,
        }
    }
}

impl CgnnConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.num_layers,
            self.hidden_dim,
            self.mlp_depth,
            self.classifier_hidden,
            self.classifier_depth,
            self.batch_size,
        ];
        if dims.contains(&0) {
            return Err(Error::Config(
                "model dimensions and batch size must be >= 1".into(),
            ));
        }
        if self.lr.is_nan()
            || self.lr <= 0.0
            || self.weight_decay.is_nan()
            || self.weight_decay < 0.0
        {
            return Err(Error::Config("lr must be > 0 and weight_decay >= 0".into()));
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` of every linear sublayer, GIN layers first.
    fn linear_shapes(&self, input_dim: usize, num_classes: usize) -> Vec<(usize, usize)> {
        let mut shapes = Vec::new();
        let mut width = input_dim;
        for _ in 0..self.num_layers {
            for _ in 0..self.mlp_depth {
                shapes.push((width, self.hidden_dim));
                width = self.hidden_dim;
            }
        }
        for i in 0..self.classifier_depth {
            let out = if i + 1 == self.classifier_depth {
                num_classes
            } else {
                self.classifier_hidden
            };
            shapes.push((width, out));
            width = out;
        }
        shapes
    }
}

/// Class scores for one graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
    pub predicted_class: usize,
}

impl Prediction {
    pub fn from_logits(logits: Vec<f64>) -> Self {
        let probs = softmax(&logits);
        let predicted_class = argmax(&logits);
        Self {
            logits,
            probs,
            predicted_class,
        }
    }

    /// Softmax cross-entropy of the logits against `target`.
    pub fn cross_entropy(&self, target: usize) -> f64 {
        log_sum_exp(&self.logits) - self.logits[target]
    }
}

/// Index of the largest value; ties resolve to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Preprocessing a model was trained with; applied again at inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessing {
    pub graph: GraphConfig,
    pub feature_stats: FeatureStats,
    pub class_names: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CgnnModel {
    pub config: CgnnConfig,
    pub input_dim: usize,
    pub num_classes: usize,
    /// Weight (`fan_in x fan_out`) and bias (`1 x fan_out`) per linear
    /// sublayer, in forward order.
    pub params: Vec<Tensor2>,
    #[serde(default)]
    pub meta: TrainingMeta,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preprocessing: Option<Preprocessing>,
}

impl CgnnModel {
    /// Glorot-uniform weights, zero biases.
    pub fn init(config: CgnnConfig, input_dim: usize, num_classes: usize) -> Result<Self> {
        config.validate()?;
        if input_dim == 0 || num_classes < 2 {
            return Err(Error::Config(
                "need input_dim >= 1 and at least 2 classes".into(),
            ));
        }
        let mut params = Vec::new();
        for (i, (fan_in, fan_out)) in config
            .linear_shapes(input_dim, num_classes)
            .into_iter()
            .enumerate()
        {
            let mut rng = rng_from(config.seed, i as u64);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let w = (0..fan_in * fan_out)
                .map(|_| rng.random_range(-bound..=bound))
                .collect();
            params.push(Tensor2::from_vec(fan_in, fan_out, w)?);
            params.push(Tensor2::zeros(1, fan_out));
        }
        Ok(Self {
            config,
            input_dim,
            num_classes,
            params,
            meta: TrainingMeta::default(),
            preprocessing: None,
        })
    }

    pub fn check_shapes(&self) -> Result<()> {
        let shapes = self.config.linear_shapes(self.input_dim, self.num_classes);
        if self.params.len() != 2 * shapes.len() {
            return Err(Error::Config(format!(
                "expected {} parameter tensors, found {}",
                2 * shapes.len(),
                self.params.len()
            )));
        }
        for (i, (fan_in, fan_out)) in shapes.into_iter().enumerate() {
            let w = &self.params[2 * i];
            let b = &self.params[2 * i + 1];
            if w.shape() != (fan_in, fan_out) || b.shape() != (1, fan_out) {
                return Err(Error::Shape {
                    op: "checkpoint",
                    left: w.shape(),
                    right: (fan_in, fan_out),
                });
            }
            if !w.is_finite() || !b.is_finite() {
                return Err(Error::Diverged(format!(
                    "non-finite parameters in layer {i}"
                )));
            }
        }
        Ok(())
    }

    /// Records the forward pass on `tape` and returns `(logits, param vars)`.
    ///
    /// `logits` has one row per range in `ranges`. Parameters are
    /// differentiable leaves when `trainable` is set, constants otherwise.
    pub fn record<'a>(
        &self,
        tape: &mut GradTape<'a>,
        features: Var,
        neighbors: &'a [Vec<usize>],
        ranges: &[Range<usize>],
        trainable: bool,
    ) -> Result<(Var, Vec<Var>)> {
        let params: Vec<Var> = self
            .params
            .iter()
            .map(|p| {
                if trainable {
                    tape.param(p.clone())
                } else {
                    tape.constant(p.clone())
                }
            })
            .collect();
        let mut linears = params.chunks(2);
        let mut h = features;
        for _ in 0..self.config.num_layers {
            let mlp: Vec<&[Var]> = linears.by_ref().take(self.config.mlp_depth).collect();
            h = gin_layer_on_tape(tape, h, neighbors, &mlp, self.config.epsilon_gin)?;
        }
        let mut z = match self.config.readout {
            Readout::Mean => tape.segment_mean(h, ranges)?,
            Readout::Sum => tape.segment_sum(h, ranges)?,
        };
        for i in 0..self.config.classifier_depth {
            let lin = linears.next().expect("layout matches config");
            z = tape.matmul(z, lin[0])?;
            z = tape.add_bias(z, lin[1])?;
            if i + 1 < self.config.classifier_depth {
                z = tape.relu(z);
            }
        }
        Ok((z, params))
    }

    fn check_graph(&self, graph: &CellGraph) -> Result<()> {
        if graph.feature_dim() != self.input_dim {
            return Err(Error::FeatureDim {
                expected: self.input_dim,
                found: graph.feature_dim(),
            });
        }
        if graph.num_nodes() == 0 {
            return Err(Error::EmptyRoi);
        }
        Ok(())
    }

    /// Forward pass over one graph, optionally scaling input features by
    /// `sigmoid(mask_logits)`.
    pub fn forward(&self, graph: &CellGraph, mask_logits: Option<&[f64]>) -> Result<Prediction> {
        self.check_graph(graph)?;
        let mut tape = GradTape::new();
        let x = tape.constant(graph.features().clone());
        let x = match mask_logits {
            Some(mask) => {
                if mask.len() != graph.num_nodes() {
                    return Err(Error::Shape {
                        op: "mask",
                        left: (graph.num_nodes(), 1),
                        right: (mask.len(), 1),
                    });
                }
                let m = tape.constant(Tensor2::column(mask.to_vec()));
                let s = tape.sigmoid(m);
                tape.row_scale(x, s)?
            }
            None => x,
        };
        let (logits, _) = self.record(
            &mut tape,
            x,
            graph.neighbors(),
            std::slice::from_ref(&(0..graph.num_nodes())),
            false,
        )?;
        let logits = tape.value(logits);
        if logits.cols() != self.num_classes {
            return Err(Error::ClassCount {
                expected: self.num_classes,
                found: logits.cols(),
            });
        }
        Ok(Prediction::from_logits(logits.row(0).to_vec()))
    }

    /// Unmasked prediction.
    pub fn predict(&self, graph: &CellGraph) -> Result<Prediction> {
        self.forward(graph, None)
    }

    /// Predictions for several graphs through one batched forward pass.
    pub fn predict_batch(&self, graphs: &[&CellGraph]) -> Result<Vec<Prediction>> {
        for g in graphs {
            self.check_graph(g)?;
        }
        let batch = disjoint_union(graphs)?;
        let mut tape = GradTape::new();
        let x = tape.constant(batch.graph.features().clone());
        let (logits, _) =
            self.record(&mut tape, x, batch.graph.neighbors(), &batch.ranges, false)?;
        let logits = tape.value(logits);
        Ok((0..logits.rows())
            .map(|r| Prediction::from_logits(logits.row(r).to_vec()))
            .collect())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        json::write_file(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let model: Self = json::read_file(path)?;
        model.config.validate()?;
        model.check_shapes()?;
        Ok(model)
    }
}

/// Free-function form of [`CgnnModel::forward`].
pub fn model_forward(
    model: &CgnnModel,
    graph: &CellGraph,
    mask_logits: Option<&[f64]>,
) -> Result<Prediction> {
    model.forward(graph, mask_logits)
}

pub fn predict(model: &CgnnModel, graph: &CellGraph) -> Result<Prediction> {
    model.predict(graph)
}

fn gin_layer_on_tape<'a>(
    tape: &mut GradTape<'a>,
    h: Var,
    neighbors: &'a [Vec<usize>],
    mlp: &[&[Var]],
    eps: f64,
) -> Result<Var> {
    let mut z = tape.neighbor_aggregate(h, 1.0 + eps, neighbors)?;
    for lin in mlp {
        z = tape.matmul(z, lin[0])?;
        z = tape.add_bias(z, lin[1])?;
        z = tape.relu(z);
    }
    Ok(z)
}

/// One GIN layer: aggregation followed by the MLP given as `(weight, bias)`
/// pairs.
pub fn gin_layer(
    h: &Tensor2,
    neighbors: &[Vec<usize>],
    mlp: &[(Tensor2, Tensor2)],
    eps: f64,
) -> Result<Tensor2> {
    let mut tape = GradTape::new();
    let x = tape.constant(h.clone());
    let vars: Vec<[Var; 2]> = mlp
        .iter()
        .map(|(w, b)| [tape.constant(w.clone()), tape.constant(b.clone())])
        .collect();
    let slices: Vec<&[Var]> = vars.iter().map(|v| v.as_slice()).collect();
    let out = gin_layer_on_tape(&mut tape, x, neighbors, &slices, eps)?;
    Ok(tape.value(out).clone())
}

/// Mean cross-entropy of the model over labelled graphs and its gradient
/// with respect to every parameter.
pub fn loss_and_gradients(model: &CgnnModel, graphs: &[&CellGraph]) -> Result<(f64, Vec<Tensor2>)> {
    let targets = labels_of(graphs)?;
    let batch = disjoint_union(graphs)?;
    let mut tape = GradTape::new();
    let x = tape.constant(batch.graph.features().clone());
    let (logits, params) =
        model.record(&mut tape, x, batch.graph.neighbors(), &batch.ranges, true)?;
    let loss = tape.softmax_cross_entropy(logits, &targets)?;
    let mut grads = tape.backward(loss)?;
    let value = tape.value(loss).item();
    Ok((value, params.into_iter().map(|p| grads.take(p)).collect()))
}

fn labels_of(graphs: &[&CellGraph]) -> Result<Vec<usize>> {
    graphs
        .iter()
        .map(|g| {
            g.label()
                .ok_or(Error::Config("training graph without a label".into()))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_f1: Option<f64>,
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

/// Mini-batch Adam on labelled graphs. Returns the parameters of the epoch
/// with the best validation weighted F1 (ties: lower validation loss, then
/// earlier epoch); without validation graphs, the last epoch.
pub fn train(
    train_graphs: &[CellGraph],
    val_graphs: &[CellGraph],
    num_classes: usize,
    cfg: &CgnnConfig,
) -> Result<(CgnnModel, TrainHistory)> {
    let first = train_graphs
        .first()
        .ok_or(Error::EmptyInput("training split"))?;
    let mut model = CgnnModel::init(cfg.clone(), first.feature_dim(), num_classes)?;
    let val_refs: Vec<&CellGraph> = val_graphs.iter().collect();
    let val_labels = labels_of(&val_refs)?;
    for g in train_graphs.iter().chain(val_graphs) {
        model.check_graph(g)?;
        if g.label().is_some_and(|l| l >= num_classes) {
            return Err(Error::ClassCount {
                expected: num_classes,
                found: g.label().unwrap_or(0) + 1,
            });
        }
    }

    let mut adam_cfg = AdamConfig::new(cfg.lr, cfg.weight_decay);
    adam_cfg.decay_mode = cfg.decay_mode;
    let mut adam = AdamState::new(adam_cfg, &model.params);
    let mut history = TrainHistory::default();
    let mut best: Option<(f64, f64, Vec<Tensor2>, usize)> = None;
    let mut order: Vec<usize> = (0..train_graphs.len()).collect();

    for epoch in 0..cfg.epochs {
        let mut rng = rng_from(cfg.seed, 1 << 32 | epoch as u64);
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&CellGraph> = chunk.iter().map(|&i| &train_graphs[i]).collect();
            let (loss, grads) = loss_and_gradients(&model, &batch)?;
            if !loss.is_finite() {
                return Err(Error::Diverged(format!(
                    "non-finite training loss at epoch {epoch}"
                )));
            }
            adam.step(&mut model.params, &grads)
                .map_err(|_| Error::Diverged(format!("non-finite gradient at epoch {epoch}")))?;
            total += loss * chunk.len() as f64;
        }
        let train_loss = total / train_graphs.len() as f64;

        let (val_f1, val_loss) = if val_refs.is_empty() {
            (None, None)
        } else {
            let preds = model.predict_batch(&val_refs)?;
            let classes: Vec<usize> = preds.iter().map(|p| p.predicted_class).collect();
            let f1 = weighted_f1(&classes, &val_labels)?;
            let ce = preds
                .iter()
                .zip(&val_labels)
                .map(|(p, &l)| p.cross_entropy(l))
                .sum::<f64>()
                / preds.len() as f64;
            (Some(f1), Some(ce))
        };
        history.epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_f1,
            val_loss,
        });
        if let (Some(f1), Some(ce)) = (val_f1, val_loss) {
            let better = match &best {
                None => true,
                Some((bf, bl, _, _)) => f1 > *bf || (f1 == *bf && ce < *bl),
            };
            if better {
                best = Some((f1, ce, model.params.clone(), epoch));
            }
        }
    }

    model.meta.epochs_run = cfg.epochs;
    match best {
        Some((f1, _, params, epoch)) => {
            model.params = params;
            model.meta.best_epoch = epoch;
            model.meta.best_val_f1 = f1;
        }
        None => model.meta.best_epoch = cfg.epochs.saturating_sub(1),
    }
    Ok((model, history))
}

/// Normalized, graph-built view of a dataset under a model's preprocessing.
#[derive(Debug, Clone)]
pub struct PreparedSplit {
    pub ids: Vec<String>,
    pub graphs: Vec<CellGraph>,
}

/// Normalizes features with `stats` and builds one graph per RoI.
pub fn prepare_rois(
    rois: &[crate::data::RoiRecord],
    stats: &FeatureStats,
    graph_cfg: &GraphConfig,
) -> Result<PreparedSplit> {
    let mut rois = rois.to_vec();
    stats.apply(&mut rois)?;
    let graphs = rois
        .iter()
        .map(|r| r.build_graph(graph_cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(PreparedSplit {
        ids: rois.into_iter().map(|r| r.id).collect(),
        graphs,
    })
}

/// Normalizes with train statistics, builds graphs, trains, and records the
/// preprocessing in the returned model.
pub fn train_on_dataset(
    dataset: &DatasetSplit,
    cfg: &CgnnConfig,
    graph_cfg: &GraphConfig,
) -> Result<(CgnnModel, TrainHistory)> {
    graph_cfg.validate()?;
    let normalized = normalize_features(dataset)?;
    let build = |rois: &[crate::data::RoiRecord]| -> Result<Vec<CellGraph>> {
        rois.iter().map(|r| r.build_graph(graph_cfg)).collect()
    };
    let train_graphs = build(&normalized.train)?;
    let val_graphs = build(&normalized.val)?;
    let (mut model, history) = train(&train_graphs, &val_graphs, dataset.num_classes(), cfg)?;
    model.preprocessing = Some(Preprocessing {
        graph: *graph_cfg,
        feature_stats: dataset.feature_stats.clone(),
        class_names: dataset.class_names.clone(),
    });
    Ok((model, history))
}

//! One function per subcommand.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use cgexplain::cgnn::{
    prepare_rois, train_on_dataset, CgnnConfig, CgnnModel, PreparedSplit, Readout,
};
use cgexplain::data::{
    generate_synthetic, merge_classes, parse_dataset, read_explanation, scenario_class_names,
    write_dataset, write_explanation, DatasetSplit, RoiRecord, SplitName, SynthSpec,
};
use cgexplain::explainer::{explain, random_explanation, ExplainerConfig, MaskInit};
use cgexplain::graph::{extract_subgraph, CellGraph, GraphConfig, Symmetrization};
use cgexplain::json;
use cgexplain::metrics::{
    ce_report, planted_relevance, reduction_stats, CeSample, CeTriplet, EvalReport, PlantedInput,
    ReportInputs, RoiRelevance,
};
use cgexplain::numerics::WeightDecayMode;
use cgexplain::rng::derive_seed;
use cgexplain::verify;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::args::*;
use crate::manifest::{manifest_for_dir, manifest_for_file, RunManifest};

/// Invalid flag values or combinations; reported with exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(e: impl fmt::Display) -> anyhow::Error {
    anyhow!(UsageError(e.to_string()))
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => synth(&a),
        Command::Train(a) => train(&a),
        Command::Explain(a) => explain_split(&a),
        Command::Evaluate(a) => evaluate(&a),
        Command::Gradcheck(a) => gradcheck(&a),
    }
}

fn finish(mut manifest: RunManifest, start: Instant, path: &Path) -> Result<()> {
    manifest.duration_secs = start.elapsed().as_secs_f64();
    manifest.write(path)
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

pub fn synth(a: &SynthArgs) -> Result<()> {
    let start = Instant::now();
    let spec = SynthSpec {
        num_classes: a.classes,
        rois_per_class: a.rois_per_class,
        nuclei_per_roi: (a.min_nuclei, a.max_nuclei),
        planted_cluster_size: (a.min_planted, a.max_planted),
        feature_dim: a.feature_dim,
        noise_scale: a.noise_scale,
        seed: a.seed,
    };
    spec.validate().map_err(usage)?;
    let ds = generate_synthetic(&spec)?;
    write_dataset(&a.out, &ds).with_context(|| format!("writing {}", a.out.display()))?;
    let mut manifest = RunManifest::new("synth", a)?.seed("synth", a.seed);
    manifest.outputs.push(display(&a.out));
    finish(manifest, start, &manifest_for_file(&a.out))?;
    println!(
        "wrote {} RoIs ({} train / {} val / {} test, {} classes) to {}",
        ds.train.len() + ds.val.len() + ds.test.len(),
        ds.train.len(),
        ds.val.len(),
        ds.test.len(),
        ds.num_classes(),
        a.out.display()
    );
    Ok(())
}

pub fn train(a: &TrainArgs) -> Result<()> {
    let start = Instant::now();
    let graph_cfg = GraphConfig {
        k: a.k,
        max_edge_px: a.max_edge_px,
        symmetrization: match a.symmetrization {
            SymmetrizationArg::Union => Symmetrization::Union,
            SymmetrizationArg::Mutual => Symmetrization::Mutual,
        },
    };
    graph_cfg.validate().map_err(usage)?;
    let cfg = CgnnConfig {
        lr: a.lr,
        weight_decay: a.weight_decay,
        decay_mode: match a.decay_mode {
            DecayArg::Decoupled => WeightDecayMode::Decoupled,
            DecayArg::Coupled => WeightDecayMode::Coupled,
        },
        batch_size: a.batch_size,
        epochs: a.epochs,
        readout: match a.readout {
            ReadoutArg::Mean => Readout::Mean,
            ReadoutArg::Sum => Readout::Sum,
        },
        seed: a.seed,
        ..CgnnConfig::default()
    };
    cfg.validate().map_err(usage)?;
    if let Some(c) = a.classes {
        scenario_class_names(c).map_err(usage)?;
    }

    let mut manifest = RunManifest::new("train", a)?.seed("train", a.seed);
    manifest.input("dataset", &a.dataset)?;
    let ds =
        parse_dataset(&a.dataset).with_context(|| format!("loading {}", a.dataset.display()))?;
    let ds = match a.classes {
        Some(c) => merge_classes(&ds, c)?,
        None => ds,
    };
    let (model, history) = train_on_dataset(&ds, &cfg, &graph_cfg)?;
    model
        .save(&a.out)
        .with_context(|| format!("writing {}", a.out.display()))?;
    let history_path = a.out.with_extension("history.json");
    json::write_file(&history_path, &history)?;
    manifest.outputs = vec![display(&a.out), display(&history_path)];
    finish(manifest, start, &manifest_for_file(&a.out))?;
    println!(
        "trained {} epochs; best epoch {} with validation weighted F1 {:.4}; model written to {}",
        model.meta.epochs_run,
        model.meta.best_epoch,
        model.meta.best_val_f1,
        a.out.display()
    );
    Ok(())
}

/// The dataset mapped onto the model's classes.
fn dataset_for_model(path: &Path, model: &CgnnModel) -> Result<DatasetSplit> {
    let ds = parse_dataset(path).with_context(|| format!("loading {}", path.display()))?;
    let ds = merge_classes(&ds, model.num_classes)?;
    if let Some(pre) = &model.preprocessing {
        if pre.class_names != ds.class_names {
            bail!(
                "dataset classes {:?} do not match model classes {:?}",
                ds.class_names,
                pre.class_names
            );
        }
    }
    Ok(ds)
}

/// RoIs of one split, ordered by id, prepared with the model's preprocessing.
fn prepared_split(
    model: &CgnnModel,
    ds: &DatasetSplit,
    split: SplitName,
) -> Result<(Vec<RoiRecord>, PreparedSplit)> {
    let pre = model
        .preprocessing
        .as_ref()
        .context("model checkpoint carries no preprocessing; retrain with `cgexplain train`")?;
    let mut rois = ds.split(split).to_vec();
    if rois.is_empty() {
        bail!("split {} is empty", split.as_str());
    }
    rois.sort_by(|a, b| a.id.cmp(&b.id));
    let prepared = prepare_rois(&rois, &pre.feature_stats, &pre.graph)?;
    Ok((rois, prepared))
}

/// File-name stem for an RoI id.
fn roi_stem(id: &str) -> Result<&str> {
    if id.is_empty() || id == "." || id == ".." || id.contains(['/', '\\']) {
        bail!("RoI id {id:?} cannot be used as a file name");
    }
    Ok(id)
}

pub fn explanation_path(dir: &Path, id: &str) -> Result<PathBuf> {
    Ok(dir.join(format!("{}.json", roi_stem(id)?)))
}

pub fn overlay_path(dir: &Path, id: &str) -> Result<PathBuf> {
    Ok(dir.join(format!("{}.overlay.json", roi_stem(id)?)))
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .context("starting worker pool")
}

pub fn explain_split(a: &ExplainArgs) -> Result<()> {
    let start = Instant::now();
    let cfg = ExplainerConfig {
        lr: a.explainer_lr,
        alpha_mask: a.alpha_mask,
        alpha_entropy: a.alpha_entropy,
        max_iters: a.max_iters,
        convergence_tol: a.convergence_tol,
        mask_init: match a.mask_init {
            MaskInitArg::Zeros => MaskInit::Zeros,
            MaskInitArg::Normal => MaskInit::Normal { std: 0.1 },
        },
        binarize_threshold: a.threshold,
        distill_temperature: a.temperature,
        seed: a.seed,
        ..ExplainerConfig::default()
    };
    cfg.validate().map_err(usage)?;
    let split = SplitName::from_str(&a.split).map_err(usage)?;

    let mut manifest = RunManifest::new("explain", a)?.seed("explain", a.seed);
    manifest.input("model", &a.model)?;
    manifest.input("dataset", &a.dataset)?;
    let model =
        CgnnModel::load(&a.model).with_context(|| format!("loading {}", a.model.display()))?;
    let ds = dataset_for_model(&a.dataset, &model)?;
    let (_, prepared) = prepared_split(&model, &ds, split)?;
    for id in &prepared.ids {
        roi_stem(id)?;
    }

    let pool = thread_pool(a.workers)?;
    let explanations = pool.install(|| {
        prepared
            .graphs
            .par_iter()
            .zip(&prepared.ids)
            .enumerate()
            .map(|(i, (g, id))| {
                let cfg = ExplainerConfig {
                    seed: derive_seed(a.seed, i as u64),
                    ..cfg.clone()
                };
                explain(&model, g, id, &cfg).with_context(|| format!("explaining {id}"))
            })
            .collect::<Result<Vec<_>>>()
    })?;

    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let mut stops: BTreeMap<String, usize> = BTreeMap::new();
    let mut kept_fraction = 0.0;
    for (e, g) in explanations.iter().zip(&prepared.graphs) {
        let path = explanation_path(&a.out, &e.roi_id)?;
        write_explanation(&e.to_record(), &path)?;
        let overlay = overlay_path(&a.out, &e.roi_id)?;
        json::write_file(&overlay, &e.overlay(g))?;
        manifest.outputs.push(display(&path));
        manifest.outputs.push(display(&overlay));
        let stop = serde_json::to_value(e.stop_reason)?;
        *stops
            .entry(stop.as_str().unwrap_or("?").to_string())
            .or_default() += 1;
        kept_fraction += e.kept_nodes.len() as f64 / g.num_nodes() as f64;
    }
    finish(manifest, start, &manifest_for_dir(&a.out))?;
    println!(
        "explained {} RoIs of the {} split; mean kept fraction {:.3}; stop reasons {:?}; written to {}",
        explanations.len(),
        split.as_str(),
        kept_fraction / explanations.len() as f64,
        stops,
        a.out.display()
    );
    Ok(())
}

/// Per-RoI line of an evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoiEvaluation {
    pub roi_id: String,
    pub label: usize,
    pub original_class: usize,
    pub explanation_class: usize,
    pub num_nodes: usize,
    pub num_edges: usize,
    pub kept_nodes: usize,
    pub kept_edges: usize,
    pub node_reduction: f64,
    pub edge_reduction: f64,
    pub ce: CeTriplet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relevance: Option<RoiRelevance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationFile {
    pub split: String,
    pub random_draws: usize,
    pub report: EvalReport,
    pub rois: Vec<RoiEvaluation>,
}

/// Explanation subgraph of one RoI rebuilt from its file, with matched
/// random baselines.
struct Evaluated {
    explanation: CellGraph,
    random: Vec<CellGraph>,
    sigma: Vec<f64>,
    kept: Vec<usize>,
}

fn rebuild(dir: &Path, id: &str, graph: &CellGraph, draws: usize, seed: u64) -> Result<Evaluated> {
    let path = explanation_path(dir, id)?;
    let rec = read_explanation(&path).with_context(|| format!("reading {}", path.display()))?;
    if rec.roi_id != id || rec.mask_logits.len() != graph.num_nodes() {
        bail!(
            "{} does not describe RoI {id} with {} nodes",
            path.display(),
            graph.num_nodes()
        );
    }
    let sub = extract_subgraph(graph, &rec.kept_nodes)?;
    let mut induced: Vec<[usize; 2]> = sub
        .graph
        .edges()
        .iter()
        .map(|&(u, v)| [sub.origin[u], sub.origin[v]])
        .collect();
    let mut stored = rec.kept_edges.clone();
    induced.sort_unstable();
    stored.sort_unstable();
    if induced != stored {
        bail!(
            "{}: kept edges differ from the induced subgraph",
            path.display()
        );
    }
    let random = (0..draws)
        .map(|d| {
            random_explanation(
                graph,
                sub.graph.num_nodes(),
                sub.graph.num_edges(),
                derive_seed(seed, d as u64),
            )
            .map(|s| s.graph)
        })
        .collect::<cgexplain::Result<Vec<_>>>()?;
    Ok(Evaluated {
        explanation: sub.graph,
        random,
        sigma: rec.sigmoid,
        kept: sub.origin,
    })
}

pub fn evaluate(a: &EvaluateArgs) -> Result<()> {
    let start = Instant::now();
    if a.random_draws == 0 {
        return Err(usage("--random-draws must be at least 1"));
    }
    let mut manifest = RunManifest::new("evaluate", a)?.seed("random_baseline", a.seed);
    let model_hash = manifest.input("model", &a.model)?;
    manifest.input("dataset", &a.dataset)?;
    let expl_manifest = RunManifest::read(&manifest_for_dir(&a.explanations))?;
    if expl_manifest.command != "explain" {
        bail!(
            "{} was not written by `cgexplain explain`",
            a.explanations.display()
        );
    }
    match expl_manifest.input_hash("model") {
        Some(h) if h == model_hash => {}
        Some(h) => bail!(
            "explanations in {} were produced by a model with sha256 {h}, but {} has sha256 {model_hash}",
            a.explanations.display(),
            a.model.display()
        ),
        None => bail!("explanation manifest records no model hash"),
    }
    let split_name = expl_manifest.config["split"]
        .as_str()
        .context("explanation manifest records no split")?
        .to_string();
    let split = SplitName::from_str(&split_name)?;

    let model =
        CgnnModel::load(&a.model).with_context(|| format!("loading {}", a.model.display()))?;
    let ds = dataset_for_model(&a.dataset, &model)?;
    let (rois, prepared) = prepared_split(&model, &ds, split)?;
    let evaluated = prepared
        .graphs
        .iter()
        .zip(&prepared.ids)
        .enumerate()
        .map(|(i, (g, id))| {
            rebuild(
                &a.explanations,
                id,
                g,
                a.random_draws,
                derive_seed(a.seed, i as u64),
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let labels: Vec<usize> = rois.iter().map(|r| r.label).collect();
    let originals = model.predict_batch(&prepared.graphs.iter().collect::<Vec<_>>())?;
    let explained =
        model.predict_batch(&evaluated.iter().map(|e| &e.explanation).collect::<Vec<_>>())?;
    let predictions: Vec<usize> = originals.iter().map(|p| p.predicted_class).collect();
    let pairs: Vec<(&CellGraph, &CellGraph)> = prepared
        .graphs
        .iter()
        .zip(evaluated.iter().map(|e| &e.explanation))
        .collect();
    let reductions = reduction_stats(&pairs, &labels, model.num_classes)?;
    let samples: Vec<CeSample<'_>> = prepared
        .graphs
        .iter()
        .zip(&evaluated)
        .zip(&labels)
        .map(|((g, e), &label)| CeSample {
            original: g,
            explanation: &e.explanation,
            random: &e.random,
            label,
        })
        .collect();
    let ce = ce_report(&model, &samples)?;
    let planted = if rois.iter().all(|r| r.planted_relevant.is_some()) {
        let inputs: Vec<PlantedInput<'_>> = rois
            .iter()
            .zip(&evaluated)
            .map(|(r, e)| PlantedInput {
                roi_id: &r.id,
                kept: &e.kept,
                sigma: &e.sigma,
                planted: r.planted_relevant.as_deref(),
            })
            .collect();
        Some(planted_relevance(&inputs)?)
    } else {
        None
    };

    let per_roi = (0..rois.len())
        .map(|i| {
            let g = &prepared.graphs[i];
            let e = &evaluated[i].explanation;
            RoiEvaluation {
                roi_id: rois[i].id.clone(),
                label: labels[i],
                original_class: predictions[i],
                explanation_class: explained[i].predicted_class,
                num_nodes: g.num_nodes(),
                num_edges: g.num_edges(),
                kept_nodes: e.num_nodes(),
                kept_edges: e.num_edges(),
                node_reduction: reductions.per_pair[i].0,
                edge_reduction: reductions.per_pair[i].1,
                ce: ce.per_roi[i],
                relevance: planted.as_ref().and_then(|p| p.per_roi[i]),
            }
        })
        .collect();
    let report = EvalReport::assemble(ReportInputs {
        class_names: &ds.class_names,
        labels: &labels,
        predictions: &predictions,
        reductions: &reductions,
        ce: &ce,
        planted,
    })?;
    let table = report.to_table();
    let file = EvaluationFile {
        split: split_name,
        random_draws: a.random_draws,
        report,
        rois: per_roi,
    };
    json::write_file(&a.out, &file).with_context(|| format!("writing {}", a.out.display()))?;
    let explanation_hashes = rois
        .iter()
        .map(|r| explanation_path(&a.explanations, &r.id))
        .collect::<Result<Vec<_>>>()?;
    for p in &explanation_hashes {
        manifest.input("explanation", p)?;
    }
    manifest.outputs.push(display(&a.out));
    finish(manifest, start, &manifest_for_file(&a.out))?;
    print!("{table}");
    Ok(())
}

#[derive(Debug, Serialize)]
struct CheckLine {
    name: String,
    max_rel_err: f64,
    tolerance: f64,
    passed: bool,
}

pub fn gradcheck(a: &GradcheckArgs) -> Result<()> {
    let start = Instant::now();
    if a.instances == 0 {
        return Err(usage("--instances must be at least 1"));
    }
    let outcomes = verify::check_all(a.seed, a.instances)?;
    let mut failed = 0;
    let lines: Vec<CheckLine> = outcomes
        .iter()
        .map(|o| CheckLine {
            name: o.name.clone(),
            max_rel_err: o.max_rel_err,
            tolerance: o.tolerance,
            passed: o.passed(),
        })
        .collect();
    for l in &lines {
        if !l.passed {
            failed += 1;
        }
        println!(
            "{} {:<28} max rel err {:.3e} (tol {:.0e})",
            if l.passed { "PASS" } else { "FAIL" },
            l.name,
            l.max_rel_err,
            l.tolerance
        );
    }
    if let Some(out) = &a.out {
        json::write_file(out, &lines)?;
        let mut manifest = RunManifest::new("gradcheck", a)?.seed("gradcheck", a.seed);
        manifest.outputs.push(display(out));
        finish(manifest, start, &manifest_for_file(out))?;
    }
    if failed > 0 {
        bail!("{failed} of {} gradient checks failed", lines.len());
    }
    println!(
        "all {} gradient checks passed in {:.1}s",
        lines.len(),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}

//! Classifier and explanation quality metrics, aggregated per class and over
//! all RoIs in the layout of a class-column report table.

use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::cgnn::CgnnModel;
use crate::graph::CellGraph;
use crate::{Error, Result};

/// `matrix[label][prediction]` counts.
pub fn confusion_matrix(
    predictions: &[usize],
    labels: &[usize],
    num_classes: usize,
) -> Vec<Vec<usize>> {
    let mut m = vec![vec![0; num_classes]; num_classes];
    for (&p, &l) in predictions.iter().zip(labels) {
        m[l][p] += 1;
    }
    m
}

fn check_inputs(predictions: &[usize], labels: &[usize]) -> Result<usize> {
    if predictions.is_empty() {
        return Err(Error::EmptyInput("weighted_f1"));
    }
    if predictions.len() != labels.len() {
        return Err(Error::Shape {
            op: "weighted_f1",
            left: (predictions.len(), 1),
            right: (labels.len(), 1),
        });
    }
    Ok(predictions.iter().chain(labels).max().copied().unwrap_or(0) + 1)
}

/// One-vs-rest F1 per class; 0 when precision + recall is 0.
pub fn per_class_f1(
    predictions: &[usize],
    labels: &[usize],
    num_classes: usize,
) -> Result<Vec<f64>> {
    let seen = check_inputs(predictions, labels)?;
    let c = num_classes.max(seen);
    let m = confusion_matrix(predictions, labels, c);
    Ok((0..c)
        .map(|k| {
            let tp = m[k][k] as f64;
            let predicted: usize = (0..c).map(|l| m[l][k]).sum();
            let actual: usize = m[k].iter().sum();
            let precision = if predicted > 0 {
                tp / predicted as f64
            } else {
                0.0
            };
            let recall = if actual > 0 { tp / actual as f64 } else { 0.0 };
            if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            }
        })
        .collect())
}

/// Support-weighted mean of per-class F1.
pub fn weighted_f1(predictions: &[usize], labels: &[usize]) -> Result<f64> {
    let c = check_inputs(predictions, labels)?;
    let f1 = per_class_f1(predictions, labels, c)?;
    let mut support = vec![0usize; c];
    for &l in labels {
        support[l] += 1;
    }
    let n = labels.len() as f64;
    Ok(f1
        .iter()
        .zip(&support)
        .map(|(f, &s)| f * s as f64 / n)
        .sum())
}

/// Node and edge reduction of one explanation, in percent.
pub fn reduction(original: &CellGraph, explanation: &CellGraph) -> (f64, f64) {
    let node = 100.0 * (1.0 - explanation.num_nodes() as f64 / original.num_nodes() as f64);
    let edge = if original.num_edges() == 0 {
        0.0
    } else {
        100.0 * (1.0 - explanation.num_edges() as f64 / original.num_edges() as f64)
    };
    (node, edge)
}

/// Mean of `values` over the entries whose label is `class`; `None` for a
/// class without samples.
fn class_mean(values: &[f64], labels: &[usize], class: Option<usize>) -> Option<f64> {
    let picked: Vec<f64> = values
        .iter()
        .zip(labels)
        .filter(|(_, &l)| class.is_none_or(|c| c == l))
        .map(|(v, _)| *v)
        .collect();
    if picked.is_empty() {
        None
    } else {
        Some(picked.iter().sum::<f64>() / picked.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionStats {
    pub per_pair: Vec<(f64, f64)>,
    pub per_class_node: Vec<Option<f64>>,
    pub per_class_edge: Vec<Option<f64>>,
    pub all_node: Option<f64>,
    pub all_edge: Option<f64>,
}

pub fn reduction_stats(
    pairs: &[(&CellGraph, &CellGraph)],
    labels: &[usize],
    num_classes: usize,
) -> Result<ReductionStats> {
    if pairs.len() != labels.len() {
        return Err(Error::Shape {
            op: "reduction_stats",
            left: (pairs.len(), 1),
            right: (labels.len(), 1),
        });
    }
    for (o, e) in pairs {
        if e.num_nodes() > o.num_nodes() {
            return Err(Error::Config(
                "explanation larger than its original graph".into(),
            ));
        }
    }
    let per_pair: Vec<(f64, f64)> = pairs.iter().map(|(o, e)| reduction(o, e)).collect();
    let nodes: Vec<f64> = per_pair.iter().map(|p| p.0).collect();
    let edges: Vec<f64> = per_pair.iter().map(|p| p.1).collect();
    Ok(ReductionStats {
        per_class_node: (0..num_classes)
            .map(|c| class_mean(&nodes, labels, Some(c)))
            .collect(),
        per_class_edge: (0..num_classes)
            .map(|c| class_mean(&edges, labels, Some(c)))
            .collect(),
        all_node: class_mean(&nodes, labels, None),
        all_edge: class_mean(&edges, labels, None),
        per_pair,
    })
}

/// Graphs evaluated for one RoI by [`ce_report`].
pub struct CeSample<'a> {
    pub original: &'a CellGraph,
    pub explanation: &'a CellGraph,
    /// One or more random explanations; their CE is averaged.
    pub random: &'a [CellGraph],
    pub label: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CeTriplet {
    pub original: f64,
    pub explanation: f64,
    pub random: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CeReport {
    pub per_roi: Vec<CeTriplet>,
    pub per_class: Vec<Option<CeTriplet>>,
    pub all: Option<CeTriplet>,
}

/// Cross-entropy of the model's logits against ground truth for original,
/// explanation and random graphs.
pub fn ce_report(model: &CgnnModel, samples: &[CeSample<'_>]) -> Result<CeReport> {
    let mut per_roi = Vec::with_capacity(samples.len());
    for s in samples {
        if s.label >= model.num_classes {
            return Err(Error::ClassCount {
                expected: model.num_classes,
                found: s.label + 1,
            });
        }
        if s.random.is_empty() {
            return Err(Error::EmptyInput("random explanations"));
        }
        let ce = |g: &CellGraph| model.predict(g).map(|p| p.cross_entropy(s.label));
        let mut random = 0.0;
        for g in s.random {
            random += ce(g)?;
        }
        per_roi.push(CeTriplet {
            original: ce(s.original)?,
            explanation: ce(s.explanation)?,
            random: random / s.random.len() as f64,
        });
    }
    let labels: Vec<usize> = samples.iter().map(|s| s.label).collect();
    let group = |class: Option<usize>| -> Option<CeTriplet> {
        let pick = |f: fn(&CeTriplet) -> f64| {
            let v: Vec<f64> = per_roi.iter().map(f).collect();
            class_mean(&v, &labels, class)
        };
        Some(CeTriplet {
            original: pick(|t| t.original)?,
            explanation: pick(|t| t.explanation)?,
            random: pick(|t| t.random)?,
        })
    };
    Ok(CeReport {
        per_class: (0..model.num_classes).map(|c| group(Some(c))).collect(),
        all: group(None),
        per_roi,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelevanceScore {
    pub precision: f64,
    pub recall: f64,
}

/// Planted-relevance inputs for one explained RoI.
pub struct PlantedInput<'a> {
    pub roi_id: &'a str,
    pub kept: &'a [usize],
    /// Mask activation per node of the original graph.
    pub sigma: &'a [f64],
    pub planted: Option<&'a [usize]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoiRelevance {
    pub precision: f64,
    pub recall: f64,
    /// Expected recall of a uniform random subset of the same size.
    pub random_recall: f64,
    pub planted_sigma: f64,
    /// `None` when every node is planted.
    pub background_sigma: Option<f64>,
}

impl RoiRelevance {
    pub fn separated(&self) -> bool {
        self.background_sigma
            .is_some_and(|b| self.planted_sigma > b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedRelevance {
    /// `None` for RoIs whose planted set is empty (background-only).
    pub per_roi: Vec<Option<RoiRelevance>>,
    pub mean_precision: Option<f64>,
    pub mean_recall: Option<f64>,
    pub mean_random_recall: Option<f64>,
    /// Fraction of scored RoIs whose mean planted activation exceeds the
    /// mean background activation.
    pub sigma_separation_rate: Option<f64>,
}

pub fn relevance(kept: &[usize], planted: &[usize]) -> Option<RelevanceScore> {
    if planted.is_empty() {
        return None;
    }
    let planted: HashSet<usize> = planted.iter().copied().collect();
    let kept: HashSet<usize> = kept.iter().copied().collect();
    let hits = kept.intersection(&planted).count() as f64;
    Some(RelevanceScore {
        precision: if kept.is_empty() {
            0.0
        } else {
            hits / kept.len() as f64
        },
        recall: hits / planted.len() as f64,
    })
}

fn roi_relevance(input: &PlantedInput<'_>, planted: &[usize]) -> Result<Option<RoiRelevance>> {
    let n = input.sigma.len();
    if let Some(&bad) = planted.iter().chain(input.kept).find(|&&i| i >= n) {
        return Err(Error::NodeIndex {
            index: bad,
            num_nodes: n,
        });
    }
    let Some(score) = relevance(input.kept, planted) else {
        return Ok(None);
    };
    let is_planted: HashSet<usize> = planted.iter().copied().collect();
    let mean = |pick: bool| {
        let v: Vec<f64> = (0..n)
            .filter(|i| is_planted.contains(i) == pick)
            .map(|i| input.sigma[i])
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    Ok(Some(RoiRelevance {
        precision: score.precision,
        recall: score.recall,
        random_recall: input.kept.len() as f64 / n as f64,
        planted_sigma: mean(true).unwrap_or(0.0),
        background_sigma: mean(false),
    }))
}

/// Precision/recall of kept nodes against planted relevant nodes, with the
/// size-matched random expectation and mask separation.
pub fn planted_relevance(inputs: &[PlantedInput<'_>]) -> Result<PlantedRelevance> {
    let mut per_roi = Vec::with_capacity(inputs.len());
    for input in inputs {
        let planted = input
            .planted
            .ok_or_else(|| Error::MissingPlanted(input.roi_id.to_string()))?;
        per_roi.push(roi_relevance(input, planted)?);
    }
    let scored: Vec<&RoiRelevance> = per_roi.iter().flatten().collect();
    let mean = |f: &dyn Fn(&RoiRelevance) -> f64| {
        (!scored.is_empty()).then(|| scored.iter().map(|s| f(s)).sum::<f64>() / scored.len() as f64)
    };
    Ok(PlantedRelevance {
        mean_precision: mean(&|s| s.precision),
        mean_recall: mean(&|s| s.recall),
        mean_random_recall: mean(&|s| s.random_recall),
        sigma_separation_rate: mean(&|s| if s.separated() { 1.0 } else { 0.0 }),
        per_roi,
    })
}

/// One class column (or the "All" column) of the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportColumn {
    pub name: String,
    pub count: usize,
    /// Per-class F1, or the weighted F1 for the "All" column.
    pub f1: Option<f64>,
    pub node_reduction: Option<f64>,
    pub edge_reduction: Option<f64>,
    pub ce: Option<CeTriplet>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub classes: Vec<ReportColumn>,
    pub all: ReportColumn,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planted: Option<PlantedRelevance>,
}

/// Everything needed to assemble an [`EvalReport`].
pub struct ReportInputs<'a> {
    pub class_names: &'a [String],
    pub labels: &'a [usize],
    pub predictions: &'a [usize],
    pub reductions: &'a ReductionStats,
    pub ce: &'a CeReport,
    pub planted: Option<PlantedRelevance>,
}

impl EvalReport {
    pub fn assemble(inputs: ReportInputs<'_>) -> Result<Self> {
        let c = inputs.class_names.len();
        let f1 = per_class_f1(inputs.predictions, inputs.labels, c)?;
        let classes = (0..c)
            .map(|k| {
                let count = inputs.labels.iter().filter(|&&l| l == k).count();
                ReportColumn {
                    name: inputs.class_names[k].clone(),
                    count,
                    f1: (count > 0).then(|| f1[k]),
                    node_reduction: inputs.reductions.per_class_node[k],
                    edge_reduction: inputs.reductions.per_class_edge[k],
                    ce: inputs.ce.per_class[k],
                }
            })
            .collect();
        let all = ReportColumn {
            name: "All".into(),
            count: inputs.labels.len(),
            f1: Some(weighted_f1(inputs.predictions, inputs.labels)?),
            node_reduction: inputs.reductions.all_node,
            edge_reduction: inputs.reductions.all_edge,
            ce: inputs.ce.all,
        };
        Ok(Self {
            classes,
            all,
            planted: inputs.planted,
        })
    }

    /// Aligned plain-text table: metric rows by class columns, "All" last.
    pub fn to_table(&self) -> String {
        let columns: Vec<&ReportColumn> = self
            .classes
            .iter()
            .chain(std::iter::once(&self.all))
            .collect();
        let fmt = |v: Option<f64>, digits: usize| {
            v.map_or_else(|| "-".to_string(), |x| format!("{x:.digits$}"))
        };
        type Row<'r> = (&'static str, Box<dyn Fn(&ReportColumn) -> String + 'r>);
        let rows: Vec<Row<'_>> = vec![
            ("Samples", Box::new(|c: &ReportColumn| c.count.to_string())),
            (
                "Weighted F1-score",
                Box::new(move |c: &ReportColumn| fmt(c.f1, 2)),
            ),
            (
                "Node reduction (%)",
                Box::new(move |c: &ReportColumn| fmt(c.node_reduction, 1)),
            ),
            (
                "Edge reduction (%)",
                Box::new(move |c: &ReportColumn| fmt(c.edge_reduction, 1)),
            ),
            (
                "Original CE",
                Box::new(move |c: &ReportColumn| fmt(c.ce.map(|t| t.original), 2)),
            ),
            (
                "Explanation CE",
                Box::new(move |c: &ReportColumn| fmt(c.ce.map(|t| t.explanation), 2)),
            ),
            (
                "Random CE",
                Box::new(move |c: &ReportColumn| fmt(c.ce.map(|t| t.random), 2)),
            ),
        ];
        let label_width = rows
            .iter()
            .map(|r| r.0.len())
            .max()
            .unwrap_or(0)
            .max("Metric".len());
        let cells: Vec<Vec<String>> = rows
            .iter()
            .map(|(_, f)| columns.iter().map(|c| f(c)).collect())
            .collect();
        let widths: Vec<usize> = columns
            .iter()
            .enumerate()
            .map(|(j, c)| {
                cells
                    .iter()
                    .map(|r| r[j].len())
                    .chain([c.name.len()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let mut out = String::new();
        let _ = write!(out, "{:<label_width$}", "Metric");
        for (c, w) in columns.iter().zip(&widths) {
            let _ = write!(out, " | {:>w$}", c.name);
        }
        out.push('\n');
        let _ = writeln!(
            out,
            "{}",
            "-".repeat(label_width + widths.iter().map(|w| w + 3).sum::<usize>())
        );
        for ((name, _), row) in rows.iter().zip(&cells) {
            let _ = write!(out, "{name:<label_width$}");
            for (cell, w) in row.iter().zip(&widths) {
                let _ = write!(out, " | {cell:>w$}");
            }
            out.push('\n');
        }
        if let Some(p) = &self.planted {
            let _ = writeln!(
                out,
                "Planted relevance: precision {} recall {} (random {}), mask separation {}",
                fmt(p.mean_precision, 3),
                fmt(p.mean_recall, 3),
                fmt(p.mean_random_recall, 3),
                fmt(p.sigma_separation_rate, 3)
            );
        }
        out
    }
}

//! Cell-graph topology: thresholded kNN over nucleus centroids, induced
//! subgraphs, and disjoint-union batching.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::numerics::Tensor2;
use crate::{Error, Result};

/// One detected nucleus: pixel centroid plus hand-crafted attributes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NucleusRecord {
    pub x: f64,
    pub y: f64,
    #[serde(rename = "f")]
    pub features: Vec<f64>,
}

/// How per-node kNN lists become an undirected edge set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Symmetrization {
    /// `u ~ v` if either is among the other's k nearest.
    #[default]
    Union,
    /// `u ~ v` only if each is among the other's k nearest.
    Mutual,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphConfig {
    pub k: usize,
    pub max_edge_px: f64,
    #[serde(default)]
    pub symmetrization: Symmetrization,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self {
            k: 5,
            max_edge_px: 50.0,
            symmetrization: Symmetrization::Union,
        }
    }
}

impl GraphConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if self.max_edge_px.is_nan() || self.max_edge_px <= 0.0 {
            return Err(Error::Config("max_edge_px must be positive".into()));
        }
        Ok(())
    }
}

/// Undirected edge stored as `(min, max)`.
pub type Edge = (usize, usize);

fn squared_distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

pub fn edge_length(points: &[[f64; 2]], (u, v): Edge) -> f64 {
    squared_distance(points[u], points[v]).sqrt()
}

/// The `k` nearest other points of every point, ordered by distance then
/// index.
fn nearest_lists(points: &[[f64; 2]], k: usize) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut out = Vec::with_capacity(n);
    let mut scratch: Vec<(f64, usize)> = Vec::with_capacity(n);
    for u in 0..n {
        scratch.clear();
        scratch.extend(
            (0..n)
                .filter(|&v| v != u)
                .map(|v| (squared_distance(points[u], points[v]), v)),
        );
        let take = k.min(scratch.len());
        if take < scratch.len() {
            scratch.select_nth_unstable_by(take, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        }
        scratch.truncate(take);
        scratch.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        out.push(scratch.iter().map(|&(_, v)| v).collect());
    }
    out
}

/// Union-symmetrized kNN edges over pixel coordinates.
pub fn knn_edges(points: &[[f64; 2]], k: usize) -> Vec<Edge> {
    knn_edges_with(points, k, Symmetrization::Union)
}

pub fn knn_edges_with(points: &[[f64; 2]], k: usize, mode: Symmetrization) -> Vec<Edge> {
    let lists = nearest_lists(points, k);
    let mut edges: Vec<Edge> = match mode {
        Symmetrization::Union => lists
            .iter()
            .enumerate()
            .flat_map(|(u, nbrs)| nbrs.iter().map(move |&v| (u.min(v), u.max(v))))
            .collect(),
        Symmetrization::Mutual => lists
            .iter()
            .enumerate()
            .flat_map(|(u, nbrs)| {
                let lists = &lists;
                nbrs.iter()
                    .filter(move |&&v| u < v && lists[v].contains(&u))
                    .map(move |&v| (u, v))
            })
            .collect(),
    };
    edges.sort_unstable();
    edges.dedup();
    edges
}

/// Keeps edges no longer than `max_edge_px` (the boundary is kept).
pub fn threshold_edges(edges: &[Edge], points: &[[f64; 2]], max_edge_px: f64) -> Vec<Edge> {
    edges
        .iter()
        .copied()
        .filter(|&e| edge_length(points, e) <= max_edge_px)
        .collect()
}

/// Undirected attributed graph over nuclei.
#[derive(Debug, Clone, PartialEq)]
pub struct CellGraph {
    features: Tensor2,
    centroids_px: Vec<[f64; 2]>,
    edges: Vec<Edge>,
    neighbors: Vec<Vec<usize>>,
    label: Option<usize>,
}

impl CellGraph {
    /// Validates and canonicalizes the edge list (sorted `(min, max)` pairs).
    pub fn new(
        features: Tensor2,
        centroids_px: Vec<[f64; 2]>,
        edges: Vec<Edge>,
        label: Option<usize>,
    ) -> Result<Self> {
        let n = features.rows();
        if centroids_px.len() != n {
            return Err(Error::Shape {
                op: "CellGraph::new",
                left: features.shape(),
                right: (centroids_px.len(), 2),
            });
        }
        if !features.is_finite() {
            return Err(Error::InvalidFeature("non-finite node feature".into()));
        }
        let mut canonical = Vec::with_capacity(edges.len());
        for (u, v) in edges {
            for idx in [u, v] {
                if idx >= n {
                    return Err(Error::NodeIndex {
                        index: idx,
                        num_nodes: n,
                    });
                }
            }
            if u == v {
                return Err(Error::Config(format!("self-loop on node {u}")));
            }
            canonical.push((u.min(v), u.max(v)));
        }
        canonical.sort_unstable();
        let before = canonical.len();
        canonical.dedup();
        if canonical.len() != before {
            return Err(Error::Config("duplicate edge".into()));
        }
        let mut neighbors = vec![Vec::new(); n];
        for &(u, v) in &canonical {
            neighbors[u].push(v);
            neighbors[v].push(u);
        }
        neighbors.iter_mut().for_each(|l| l.sort_unstable());
        Ok(Self {
            features,
            centroids_px,
            edges: canonical,
            neighbors,
            label,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.features.rows()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn features(&self) -> &Tensor2 {
        &self.features
    }

    pub fn centroids_px(&self) -> &[[f64; 2]] {
        &self.centroids_px
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn neighbors(&self) -> &[Vec<usize>] {
        &self.neighbors
    }

    pub fn label(&self) -> Option<usize> {
        self.label
    }

    pub fn with_label(mut self, label: Option<usize>) -> Self {
        self.label = label;
        self
    }

    /// Dense symmetric 0/1 adjacency.
    pub fn adjacency(&self) -> Tensor2 {
        let n = self.num_nodes();
        let mut a = Tensor2::zeros(n, n);
        for &(u, v) in &self.edges {
            a.set(u, v, 1.0);
            a.set(v, u, 1.0);
        }
        a
    }
}

/// Builds the thresholded kNN cell graph of one RoI.
///
/// Node features are the record attributes followed by the centroid divided
/// by the image width and height.
pub fn build_cell_graph(
    nuclei: &[NucleusRecord],
    image_w: f64,
    image_h: f64,
    cfg: &GraphConfig,
) -> Result<CellGraph> {
    cfg.validate()?;
    if nuclei.is_empty() {
        return Err(Error::EmptyRoi);
    }
    if !(image_w > 0.0 && image_h > 0.0) {
        return Err(Error::Config(format!(
            "image size must be positive, got {image_w}x{image_h}"
        )));
    }
    let f = nuclei[0].features.len();
    let d = f + 2;
    let mut data = Vec::with_capacity(nuclei.len() * d);
    let mut points = Vec::with_capacity(nuclei.len());
    for (i, rec) in nuclei.iter().enumerate() {
        if rec.features.len() != f {
            return Err(Error::InvalidFeature(format!(
                "nucleus {i} has {} features, expected {f}",
                rec.features.len()
            )));
        }
        if !rec.x.is_finite() || !rec.y.is_finite() {
            return Err(Error::InvalidFeature(format!(
                "nucleus {i} has a non-finite centroid"
            )));
        }
        if let Some(j) = rec.features.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidFeature(format!(
                "nucleus {i} feature {j} is not finite"
            )));
        }
        data.extend_from_slice(&rec.features);
        data.push(rec.x / image_w);
        data.push(rec.y / image_h);
        points.push([rec.x, rec.y]);
    }
    let edges = threshold_edges(
        &knn_edges_with(&points, cfg.k, cfg.symmetrization),
        &points,
        cfg.max_edge_px,
    );
    CellGraph::new(
        Tensor2::from_vec(nuclei.len(), d, data)?,
        points,
        edges,
        None,
    )
}

/// Induced subgraph plus the original index of every retained node.
#[derive(Debug, Clone, PartialEq)]
pub struct Subgraph {
    pub graph: CellGraph,
    pub origin: Vec<usize>,
}

/// Induced subgraph on `keep_nodes`, reindexed densely in original order.
pub fn extract_subgraph(graph: &CellGraph, keep_nodes: &[usize]) -> Result<Subgraph> {
    let n = graph.num_nodes();
    let mut origin = keep_nodes.to_vec();
    origin.sort_unstable();
    origin.dedup();
    if origin.is_empty() {
        return Err(Error::EmptyExplanation);
    }
    if let Some(&bad) = origin.iter().find(|&&i| i >= n) {
        return Err(Error::NodeIndex {
            index: bad,
            num_nodes: n,
        });
    }
    let mut new_index = vec![usize::MAX; n];
    for (new, &old) in origin.iter().enumerate() {
        new_index[old] = new;
    }
    let d = graph.feature_dim();
    let mut data = Vec::with_capacity(origin.len() * d);
    for &old in &origin {
        data.extend_from_slice(graph.features.row(old));
    }
    let edges = graph
        .edges
        .iter()
        .filter(|&&(u, v)| new_index[u] != usize::MAX && new_index[v] != usize::MAX)
        .map(|&(u, v)| (new_index[u], new_index[v]))
        .collect();
    let centroids = origin.iter().map(|&i| graph.centroids_px[i]).collect();
    let sub = CellGraph::new(
        Tensor2::from_vec(origin.len(), d, data)?,
        centroids,
        edges,
        graph.label,
    )?;
    Ok(Subgraph { graph: sub, origin })
}

/// Several graphs merged into one block-diagonal graph.
#[derive(Debug, Clone)]
pub struct Batch {
    pub graph: CellGraph,
    /// Node range of each input graph, in input order.
    pub ranges: Vec<Range<usize>>,
}

pub fn disjoint_union(graphs: &[&CellGraph]) -> Result<Batch> {
    let first = graphs.first().ok_or(Error::EmptyInput("disjoint_union"))?;
    let d = first.feature_dim();
    let total: usize = graphs.iter().map(|g| g.num_nodes()).sum();
    let mut data = Vec::with_capacity(total * d);
    let mut centroids = Vec::with_capacity(total);
    let mut edges = Vec::new();
    let mut ranges = Vec::with_capacity(graphs.len());
    let mut offset = 0;
    for g in graphs {
        if g.feature_dim() != d {
            return Err(Error::FeatureDim {
                expected: d,
                found: g.feature_dim(),
            });
        }
        data.extend_from_slice(g.features.data());
        centroids.extend_from_slice(&g.centroids_px);
        edges.extend(g.edges.iter().map(|&(u, v)| (u + offset, v + offset)));
        ranges.push(offset..offset + g.num_nodes());
        offset += g.num_nodes();
    }
    let graph = CellGraph::new(Tensor2::from_vec(total, d, data)?, centroids, edges, None)?;
    Ok(Batch { graph, ranges })
}

//! Central finite-difference verification of analytic gradients.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{GradTape, Tensor2, Var};
use crate::rng::rng_from;
use crate::Result;

/// Step used by every finite-difference check.
pub const FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    /// `max_i |g_a - g_n| / max(1, |g_a|, |g_n|)`
    pub max_rel_err: f64,
    pub worst_index: usize,
}

/// Compares the analytic gradient returned by `f` at `point` against central
/// differences with step `h`.
pub fn grad_check<F>(f: F, point: &[f64], h: f64) -> Result<GradCheckReport>
where
    F: Fn(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let (_, analytic) = f(point)?;
    let mut x = point.to_vec();
    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst_index: 0,
    };
    for i in 0..point.len() {
        x[i] = point[i] + h;
        let (plus, _) = f(&x)?;
        x[i] = point[i] - h;
        let (minus, _) = f(&x)?;
        x[i] = point[i];
        let numeric = (plus - minus) / (2.0 * h);
        let err = (analytic[i] - numeric).abs() / 1f64.max(analytic[i].abs()).max(numeric.abs());
        if err > report.max_rel_err {
            report.max_rel_err = err;
            report.worst_index = i;
        }
    }
    Ok(report)
}

/// Outcome of one named check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub max_rel_err: f64,
    pub tolerance: f64,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.max_rel_err.is_finite() && self.max_rel_err < self.tolerance
    }
}

/// Random fixture shared by the primitive checks.
struct Case {
    rows: usize,
    cols: usize,
    right: Tensor2,
    left: Tensor2,
    column: Tensor2,
    base: Tensor2,
    prob_target: Tensor2,
    targets: Vec<usize>,
    ranges: Vec<std::ops::Range<usize>>,
    neighbors: Vec<Vec<usize>>,
}

/// Domain the differentiated input is sampled from.
#[derive(Clone, Copy)]
enum Domain {
    Real,
    Unit,
    Distribution,
}

struct Primitive {
    name: &'static str,
    domain: Domain,
    /// Shape of the differentiated input.
    shape: fn(&Case) -> (usize, usize),
    build: for<'a> fn(&mut GradTape<'a>, Var, &'a Case) -> Result<Var>,
}

fn full(c: &Case) -> (usize, usize) {
    (c.rows, c.cols)
}

fn primitives() -> Vec<Primitive> {
    vec![
        Primitive {
            name: "matmul_lhs",
            domain: Domain::Real,
            shape: full,
            build: |t, x, c| {
                let b = t.constant(c.right.clone());
                t.matmul(x, b)
            },
        },
        Primitive {
            name: "matmul_rhs",
            domain: Domain::Real,
            shape: full,
            build: |t, x, c| {
                let a = t.constant(c.left.clone());
                t.matmul(a, x)
            },
        },
        Primitive {
            name: "add_bias_input",
            domain: Domain::Real,
            shape: full,
            build: |t, x, c| {
                let bias = t.constant(Tensor2::row_vector(c.base.row(0).to_vec()));
                t.add_bias(x, bias)
            },
        },
        Primitive {
            name: "add_bias_bias",
            domain: Domain::Real,
            shape: |c| (1, c.cols),
            build: |t, x, c| {
                let base = t.constant(c.base.clone());
                t.add_bias(base, x)
            },
        },
        Primitive {
            name: "relu",
            domain: Domain::Real,
            shape: full,
            build: |t, x, _| Ok(t.relu(x)),
        },
        Primitive {
            name: "sigmoid",
            domain: Domain::Real,
            shape: full,
            build: |t, x, _| Ok(t.sigmoid(x)),
        },
        Primitive {
            name: "row_scale_input",
            domain: Domain::Real,
            shape: full,
            build: |t, x, c| {
                let s = t.constant(c.column.clone());
                t.row_scale(x, s)
            },
        },
        Primitive {
            name: "row_scale_factor",
            domain: Domain::Real,
            shape: |c| (c.rows, 1),
            build: |t, x, c| {
                let base = t.constant(c.base.clone());
                t.row_scale(base, x)
            },
        },
        Primitive {
            name: "neighbor_aggregate",
            domain: Domain::Real,
            shape: full,
            build: |t, x, c| t.neighbor_aggregate(x, 1.0, &c.neighbors),
        },
        Primitive {
            name: "sum_rows",
            domain: Domain::Real,
            shape: full,
            build: |t, x, c| t.segment_sum(x, &c.ranges),
        },
        Primitive {
            name: "mean_rows",
            domain: Domain::Real,
            shape: full,
            build: |t, x, c| t.segment_mean(x, &c.ranges),
        },
        Primitive {
            name: "softmax",
            domain: Domain::Real,
            shape: full,
            build: |t, x, _| Ok(t.softmax(x)),
        },
        Primitive {
            name: "softmax_cross_entropy",
            domain: Domain::Real,
            shape: full,
            build: |t, x, c| t.softmax_cross_entropy(x, &c.targets),
        },
        Primitive {
            name: "kl_divergence",
            domain: Domain::Distribution,
            shape: full,
            build: |t, x, c| t.kl_divergence(&c.prob_target, x),
        },
        Primitive {
            name: "mean_binary_entropy",
            domain: Domain::Unit,
            shape: full,
            build: |t, x, _| t.mean_binary_entropy(x),
        },
        Primitive {
            name: "scale_add",
            domain: Domain::Real,
            shape: full,
            build: |t, x, _| {
                let y = t.scale(x, -1.7);
                t.add(x, y)
            },
        },
    ]
}

pub(crate) fn random_tensor(
    rng: &mut ChaCha8Rng,
    rows: usize,
    cols: usize,
    lo: f64,
    hi: f64,
) -> Tensor2 {
    let data = (0..rows * cols).map(|_| rng.random_range(lo..hi)).collect();
    Tensor2::from_vec(rows, cols, data).expect("length matches shape")
}

fn random_distribution(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor2 {
    let mut t = random_tensor(rng, rows, cols, 0.1, 1.0);
    for r in 0..rows {
        let total: f64 = t.row(r).iter().sum();
        t.row_mut(r).iter_mut().for_each(|v| *v /= total);
    }
    t
}

fn random_case(rng: &mut ChaCha8Rng) -> Case {
    let rows = rng.random_range(1..6);
    let cols = rng.random_range(2..5);
    let split = rng.random_range(0..rows);
    // random simple undirected graph over the rows
    let mut neighbors = vec![Vec::new(); rows];
    for u in 0..rows {
        for v in u + 1..rows {
            if rng.random_bool(0.5) {
                neighbors[u].push(v);
                neighbors[v].push(u);
            }
        }
    }
    Case {
        rows,
        cols,
        right: random_tensor(rng, cols, 3, -1.0, 1.0),
        left: random_tensor(rng, 3, rows, -1.0, 1.0),
        column: random_tensor(rng, rows, 1, -1.5, 1.5),
        base: random_tensor(rng, rows, cols, -1.0, 1.0),
        prob_target: random_distribution(rng, rows, cols),
        targets: (0..rows).map(|_| rng.random_range(0..cols)).collect(),
        ranges: vec![0..split + 1, split..rows],
        neighbors,
    }
}

/// Checks every tape primitive on `instances` random inputs each.
pub fn check_primitives(seed: u64, instances: usize, tolerance: f64) -> Result<Vec<CheckOutcome>> {
    let mut outcomes = Vec::new();
    for (p_idx, prim) in primitives().into_iter().enumerate() {
        let mut worst: f64 = 0.0;
        for inst in 0..instances {
            let mut rng = rng_from(seed, (p_idx * 100_003 + inst) as u64);
            let mut case = random_case(&mut rng);
            if prim.name == "mean_rows" && case.ranges[1].is_empty() {
                case.ranges.pop();
            }
            let (rows, cols) = (prim.shape)(&case);
            let point = match prim.domain {
                Domain::Real => random_tensor(&mut rng, rows, cols, -2.0, 2.0)
                    // keep relu samples away from the kink
                    .map(|v| if v.abs() < 1e-3 { v + 0.01 } else { v }),
                Domain::Unit => random_tensor(&mut rng, rows, cols, 0.05, 0.95),
                Domain::Distribution => random_distribution(&mut rng, rows, cols),
            };
            let out_shape = {
                let mut tape = GradTape::new();
                let x = tape.param(point.clone());
                let out = (prim.build)(&mut tape, x, &case)?;
                tape.value(out).shape()
            };
            let weights = random_tensor(&mut rng, out_shape.0, out_shape.1, -1.0, 1.0);
            let f = |flat: &[f64]| -> Result<(f64, Vec<f64>)> {
                let mut tape = GradTape::new();
                let x = tape.param(Tensor2::from_vec(rows, cols, flat.to_vec())?);
                let out = (prim.build)(&mut tape, x, &case)?;
                let loss = tape.weighted_sum(out, &weights)?;
                let grads = tape.backward(loss)?;
                Ok((tape.value(loss).item(), grads.get(x).into_data()))
            };
            let report = grad_check(f, point.data(), FD_STEP)?;
            worst = worst.max(report.max_rel_err);
        }
        outcomes.push(CheckOutcome {
            name: prim.name.to_string(),
            max_rel_err: worst,
            tolerance,
        });
    }
    Ok(outcomes)
}

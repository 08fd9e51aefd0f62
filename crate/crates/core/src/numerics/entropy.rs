//! Entropy helpers used by the distillation weight and the mask regularizer.

/// Floor applied inside every logarithm.
pub const LOG_EPS: f64 = 1e-12;

pub fn clamped_ln(x: f64) -> f64 {
    x.max(LOG_EPS).ln()
}

/// Shannon entropy in nats, with `0 ln 0 = 0`.
pub fn shannon_entropy(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| v * clamped_ln(v))
        .sum::<f64>()
}

/// Mean of `-p ln p - (1 - p) ln(1 - p)` over the elements.
pub fn mean_binary_entropy(p: &[f64]) -> f64 {
    if p.is_empty() {
        return 0.0;
    }
    let total: f64 = p
        .iter()
        .map(|&v| -v * clamped_ln(v) - (1.0 - v) * clamped_ln(1.0 - v))
        .sum();
    total / p.len() as f64
}

use crate::error::{Error, Result};
use crate::Point;

const DISTRIBUTION_TOLERANCE: f64 = 1e-9;

/// Max-shifted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Checks that `p` is a probability vector within `1e-9`.
pub fn check_distribution(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::NotADistribution("empty vector".into()));
    }
    if let Some(v) = p.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::NotADistribution(format!("entry {v} is not a probability")));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > DISTRIBUTION_TOLERANCE {
        return Err(Error::NotADistribution(format!("entries sum to {sum}")));
    }
    Ok(())
}

/// Soft-target cross entropy `-Σ target_j · log softmax(logits)_j`.
///
/// Returns the loss and its gradient with respect to the logits.
pub fn softmax_cross_entropy(logits: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    if logits.len() != target.len() {
        return Err(Error::dim("cross entropy classes", logits.len(), target.len()));
    }
    check_distribution(target)?;
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(logits.len());
    for (&z, &t) in logits.iter().zip(target) {
        let log_p = z - max - log_sum;
        if t > 0.0 {
            loss -= t * log_p;
        }
        grad.push(log_p.exp() - t);
    }
    Ok((loss, grad))
}

/// Time-weighted squared error `1/T · Σ_t exp(t/T) · ‖ŷ_t − y_t‖²`, `t = 1..T`.
///
/// Returns the loss and the gradient with respect to each predicted point.
pub fn exp_l2_loss(predicted: &[Point], truth: &[Point]) -> Result<(f64, Vec<Point>)> {
    if predicted.len() != truth.len() {
        return Err(Error::dim("trajectory length", truth.len(), predicted.len()));
    }
    if predicted.is_empty() {
        return Err(Error::EmptySequence);
    }
    let steps = predicted.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(predicted.len());
    for (t, (p, y)) in predicted.iter().zip(truth).enumerate() {
        let w = ((t + 1) as f64 / steps).exp() / steps;
        let dx = p[0] - y[0];
        let dy = p[1] - y[1];
        loss += w * (dx * dx + dy * dy);
        grad.push([2.0 * w * dx, 2.0 * w * dy]);
    }
    Ok((loss, grad))
}

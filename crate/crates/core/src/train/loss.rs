use crate::error::{Error, Result};

/// Mean of squared differences.
pub fn mse_loss(preds: &[f64], targets: &[f64]) -> Result<f64> {
    if preds.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            context: "mse_loss",
            expected: targets.len(),
            found: preds.len(),
        });
    }
    if preds.is_empty() {
        return Err(Error::invalid("mse_loss of empty vectors"));
    }
    let sum: f64 = preds.iter().zip(targets).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(sum / preds.len() as f64)
}

/// `100·‖pred − target‖₂ / ‖target‖₂`.
pub fn relative_rmse_percent(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::DimensionMismatch {
            context: "relative_rmse_percent",
            expected: target.len(),
            found: pred.len(),
        });
    }
    let energy: f64 = target.iter().map(|t| t * t).sum();
    if energy == 0.0 {
        return Err(Error::invalid("relative RMSE undefined for a zero-energy target"));
    }
    let err: f64 = pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(100.0 * (err / energy).sqrt())
}

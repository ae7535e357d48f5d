//! Effect-estimation error metrics against known ground truth.

use crate::error::{Error, Result};

fn check_pair(ite_hat: &[f64], ite_true: &[f64]) -> Result<()> {
    if ite_hat.len() != ite_true.len() {
        return Err(Error::LengthMismatch {
            expected: ite_true.len(),
            got: ite_hat.len(),
        });
    }
    if ite_hat.is_empty() {
        return Err(Error::param("ite", "no units to score"));
    }
    if ite_hat.iter().chain(ite_true).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "effect vectors".into(),
        });
    }
    Ok(())
}

/// Absolute error of the average effect: |mean(ite_hat) - mean(ite_true)|.
pub fn eps_ate(ite_hat: &[f64], ite_true: &[f64]) -> Result<f64> {
    check_pair(ite_hat, ite_true)?;
    let n = ite_hat.len() as f64;
    let mean_hat = ite_hat.iter().sum::<f64>() / n;
    let mean_true = ite_true.iter().sum::<f64>() / n;
    Ok((mean_hat - mean_true).abs())
}

/// Root mean squared per-unit effect error:
/// sqrt(mean((ite_hat_i - ite_true_i)^2)). Per-unit sign errors cannot
/// cancel here, unlike in [`eps_ate`].
pub fn eps_pehe(ite_hat: &[f64], ite_true: &[f64]) -> Result<f64> {
    check_pair(ite_hat, ite_true)?;
    let n = ite_hat.len() as f64;
    let sum_sq: f64 = ite_hat
        .iter()
        .zip(ite_true)
        .map(|(h, t)| (h - t) * (h - t))
        .sum();
    Ok((sum_sq / n).sqrt())
}

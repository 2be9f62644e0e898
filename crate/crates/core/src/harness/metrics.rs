//! Absolute and relative absolute error between prevalence vectors.

use crate::error::{Error, Result};

fn check_dims(q: &[f64], q_hat: &[f64]) -> Result<()> {
    if q.len() != q_hat.len() {
        return Err(Error::Dimension {
            expected: q.len(),
            got: q_hat.len(),
        });
    }
    if q.is_empty() {
        return Err(Error::Empty("prevalence vector".into()));
    }
    Ok(())
}

/// Mean absolute componentwise deviation.
pub fn ae(q: &[f64], q_hat: &[f64]) -> Result<f64> {
    check_dims(q, q_hat)?;
    let k = q.len() as f64;
    Ok(q.iter().zip(q_hat).map(|(a, b)| (a - b).abs()).sum::<f64>() / k)
}

/// Relative absolute error with additive smoothing `ε = 1/(2·sample_size)`
/// applied to both vectors: `x ↦ (x + ε) / (1 + K·ε)`.
pub fn rae(q: &[f64], q_hat: &[f64], sample_size: usize) -> Result<f64> {
    check_dims(q, q_hat)?;
    if sample_size == 0 {
        return Err(Error::Parameter("sample size must be positive".into()));
    }
    let k = q.len() as f64;
    let eps = 1.0 / (2.0 * sample_size as f64);
    let smooth = |x: f64| (x + eps) / (1.0 + k * eps);
    Ok(q.iter()
        .zip(q_hat)
        .map(|(&a, &b)| {
            let (a, b) = (smooth(a), smooth(b));
            (a - b).abs() / a
        })
        .sum::<f64>()
        / k)
}

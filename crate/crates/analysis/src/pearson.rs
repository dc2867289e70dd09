//! Pearson correlation; point-biserial is the case of a 0/1 variable.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CorrelationError {
    #[error("inputs differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least {min} pairs, got {got}")]
    TooShort { min: usize, got: usize },
    #[error("a constant input has no correlation")]
    DegenerateInput,
    #[error("success values must be 0 or 1")]
    NotBinary,
}

pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64, CorrelationError> {
    if x.len() != y.len() {
        return Err(CorrelationError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(CorrelationError::TooShort { min: 2, got: x.len() });
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(CorrelationError::DegenerateInput);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Correlation between a measurement and a 0/1 success flag.
pub fn point_biserial_r(values: &[f64], success: &[f64]) -> Result<f64, CorrelationError> {
    if values.len() != success.len() {
        return Err(CorrelationError::LengthMismatch(values.len(), success.len()));
    }
    if values.len() < 3 {
        return Err(CorrelationError::TooShort { min: 3, got: values.len() });
    }
    if success.iter().any(|s| *s != 0.0 && *s != 1.0) {
        return Err(CorrelationError::NotBinary);
    }
    pearson_r(values, success)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect() {
        assert!((pearson_r(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate() {
        assert_eq!(point_biserial_r(&[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0]), Err(CorrelationError::DegenerateInput));
        assert_eq!(point_biserial_r(&[1.0, 2.0], &[0.0, 1.0]), Err(CorrelationError::TooShort { min: 3, got: 2 }));
        assert_eq!(point_biserial_r(&[1.0, 2.0, 3.0], &[0.0, 2.0, 1.0]), Err(CorrelationError::NotBinary));
    }
}

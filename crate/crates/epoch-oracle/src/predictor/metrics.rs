//! Comparison metrics between predicted and measured times.

use crate::error::{Error, Result};

/// Root mean squared error, in the units of the inputs (milliseconds here).
pub fn rmse(pred: &[f64], actual: &[f64]) -> Result<f64> {
    if pred.len() != actual.len() || pred.is_empty() {
        return Err(Error::invalid("rmse needs two non-empty slices of equal length"));
    }
    let sum: f64 = pred.iter().zip(actual).map(|(p, a)| (p - a) * (p - a)).sum();
    Ok((sum / pred.len() as f64).sqrt())
}

/// Root mean square logarithmic error:
/// `sqrt(mean((ln(1+pred) - ln(1+actual))^2))`.
///
/// Not scale-free: rescaling both inputs by a common factor changes the
/// result, because log1p is affine only near zero.
pub fn loss_rmsle(pred: &[f64], actual: &[f64]) -> Result<f64> {
    if pred.len() != actual.len() || pred.is_empty() {
        return Err(Error::invalid("rmsle needs two non-empty slices of equal length"));
    }
    if pred.iter().chain(actual).any(|v| *v < 0.0 || !v.is_finite()) {
        return Err(Error::invalid("rmsle inputs must be non-negative and finite"));
    }
    let sum: f64 = pred
        .iter()
        .zip(actual)
        .map(|(p, a)| {
            let d = p.ln_1p() - a.ln_1p();
            d * d
        })
        .sum();
    Ok((sum / pred.len() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions_score_zero() {
        let v = [0.5, 1.0, 7.25];
        assert_eq!(rmse(&v, &v).unwrap(), 0.0);
        assert_eq!(loss_rmsle(&v, &v).unwrap(), 0.0);
    }

    #[test]
    fn rmsle_of_e_minus_one_vs_zero_is_one() {
        let pred = [std::f64::consts::E - 1.0];
        assert!((loss_rmsle(&pred, &[0.0]).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rmse_hand_example() {
        let got = rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap();
        assert!((got - (12.5f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn rmsle_rejects_negative_values() {
        assert!(loss_rmsle(&[-0.1], &[1.0]).is_err());
        assert!(loss_rmsle(&[0.1], &[-1.0]).is_err());
    }

    #[test]
    fn rmsle_is_not_scale_free() {
        let pred = [1.0, 2.0];
        let actual = [2.0, 1.0];
        let small = loss_rmsle(&pred, &actual).unwrap();
        let big = loss_rmsle(&[1000.0, 2000.0], &[2000.0, 1000.0]).unwrap();
        assert!((small - big).abs() > 1e-3);
    }
}

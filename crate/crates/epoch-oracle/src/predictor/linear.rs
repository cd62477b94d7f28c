//! Ordinary-least-squares baseline over the raw numeric features.
//!
//! The linear model cannot consume one-hot features, so those slots are
//! excluded; the analytic FLOP count can be included as an extra regressor.

use crate::dataset::{Dataset, SplitIndices};
use crate::error::{Error, Result};
use crate::featurespace::{
    encode, HardwareProfile, LayerConfig, SlotKind, I_FLOPS, SCHEMA_ID, SLOTS,
};

/// A fitted linear model over a subset of feature slots.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    /// One coefficient per entry of `slots`.
    pub weights: Vec<f64>,
    pub intercept: f64,
    /// Schema slot indices the model reads, in order.
    pub slots: Vec<usize>,
    pub schema_id: String,
}

/// Slots the baseline regresses on: everything that is not one-hot, with the
/// FLOP feature optional.
pub fn baseline_slots(include_flops: bool) -> Vec<usize> {
    SLOTS
        .iter()
        .enumerate()
        .filter(|(i, s)| {
            s.kind != SlotKind::OneHot && (include_flops || *i != I_FLOPS)
        })
        .map(|(i, _)| i)
        .collect()
}

/// Solve `A x = b` by Gaussian elimination with partial pivoting. `None`
/// signals a (near-)singular system.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a
        .iter()
        .flat_map(|row| row.iter().map(|v| v.abs()))
        .fold(0.0f64, f64::max)
        .max(1.0);
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&r, &s| a[r][col].abs().partial_cmp(&a[s][col].abs()).unwrap())?;
        if a[pivot_row][col].abs() < 1e-12 * scale {
            return None;
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}

/// Least squares via the normal equations. Columns are equilibrated to unit
/// diagonal before solving; if the plain system is singular, a ridge jitter
/// of 1e-8 is added to the (equilibrated) diagonal and the solve is retried.
fn least_squares(rows: &[Vec<f64>], targets: &[f64]) -> Result<Vec<f64>> {
    let n = rows.len();
    let k = rows[0].len();
    let mut ata = vec![vec![0.0f64; k]; k];
    let mut aty = vec![0.0f64; k];
    for (row, &y) in rows.iter().zip(targets) {
        for i in 0..k {
            let ri = row[i];
            if ri == 0.0 {
                continue;
            }
            for j in i..k {
                ata[i][j] += ri * row[j];
            }
            aty[i] += ri * y;
        }
    }
    for i in 0..k {
        for j in 0..i {
            ata[i][j] = ata[j][i];
        }
    }
    let _ = n;

    // Equilibrate: D^-1 (A^T A) D^-1 z = D^-1 A^T y, weights = D^-1 z.
    let d: Vec<f64> =
        ata.iter().enumerate().map(|(i, r)| if r[i] > 0.0 { r[i].sqrt() } else { 1.0 }).collect();
    let scaled = |jitter: f64| -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut m = vec![vec![0.0f64; k]; k];
        for i in 0..k {
            for j in 0..k {
                m[i][j] = ata[i][j] / (d[i] * d[j]);
            }
            m[i][i] += jitter;
        }
        let rhs: Vec<f64> = aty.iter().zip(&d).map(|(v, di)| v / di).collect();
        (m, rhs)
    };

    let (m, rhs) = scaled(0.0);
    let z = match solve_dense(m, rhs) {
        Some(z) => z,
        None => {
            let (m, rhs) = scaled(1e-8);
            solve_dense(m, rhs).ok_or_else(|| {
                Error::Numerical("normal equations are singular even after ridge jitter".into())
            })?
        }
    };
    Ok(z.iter().zip(&d).map(|(zi, di)| zi / di).collect())
}

/// Fit the baseline on the training split, targets in raw milliseconds.
pub fn fit_linear(
    ds: &Dataset,
    splits: &SplitIndices,
    include_flops: bool,
) -> Result<LinearModel> {
    let slots = baseline_slots(include_flops);
    if splits.train.len() < slots.len() + 1 {
        return Err(Error::invalid(format!(
            "need at least {} training rows for {} regressors plus intercept, got {}",
            slots.len() + 1,
            slots.len(),
            splits.train.len()
        )));
    }
    let mut rows = Vec::with_capacity(splits.train.len());
    let mut targets = Vec::with_capacity(splits.train.len());
    for &i in &splits.train {
        let r = ds
            .records
            .get(i)
            .ok_or_else(|| Error::invalid(format!("train index {i} out of bounds")))?;
        let fv = encode(&r.config, &r.hw)?;
        let mut row: Vec<f64> = slots.iter().map(|&s| fv.values[s]).collect();
        row.push(1.0);
        rows.push(row);
        targets.push(r.median_ms as f64);
    }
    let mut coeffs = least_squares(&rows, &targets)?;
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::Numerical("linear fit produced non-finite coefficients".into()));
    }
    let intercept = coeffs.pop().unwrap();
    Ok(LinearModel { weights: coeffs, intercept, slots, schema_id: SCHEMA_ID.to_string() })
}

/// Predicted time in milliseconds under the linear model.
pub fn predict_linear(
    model: &LinearModel,
    config: &LayerConfig,
    hw: &HardwareProfile,
) -> Result<f64> {
    let fv = encode(config, hw)?;
    if fv.schema_id != model.schema_id {
        return Err(Error::Version(format!(
            "feature schema `{}` does not match model schema `{}`",
            fv.schema_id, model.schema_id
        )));
    }
    let mut acc = model.intercept;
    for (&slot, &w) in model.slots.iter().zip(&model.weights) {
        acc += fv.values[slot] * w;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_linear_data_is_recovered() {
        // X = [(1,0), (0,1), (1,1)], y = [1, 2, 3] -> weights (1, 2), intercept 0.
        let rows = vec![vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 1.0], vec![1.0, 1.0, 1.0]];
        let y = vec![1.0, 2.0, 3.0];
        let w = least_squares(&rows, &y).unwrap();
        assert!((w[0] - 1.0).abs() < 1e-9, "w0 = {}", w[0]);
        assert!((w[1] - 2.0).abs() < 1e-9, "w1 = {}", w[1]);
        assert!(w[2].abs() < 1e-9, "intercept = {}", w[2]);
    }

    #[test]
    fn constant_target_fits_as_pure_intercept() {
        // Distinct inputs, constant output: weights 0, intercept c.
        let rows: Vec<Vec<f64>> =
            (0..8).map(|i| vec![i as f64, (i * i) as f64, 1.0]).collect();
        let y = vec![5.0; 8];
        let w = least_squares(&rows, &y).unwrap();
        assert!(w[0].abs() < 1e-9 && w[1].abs() < 1e-9);
        assert!((w[2] - 5.0).abs() < 1e-9);
    }

    #[test]
    fn residuals_are_orthogonal_to_regressors() {
        // Over-determined random-ish system with O(1) entries.
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|i| {
                let t = i as f64 / 10.0;
                vec![t.sin(), t.cos(), t, 1.0]
            })
            .collect();
        let y: Vec<f64> = (0..20).map(|i| ((i * 13 % 7) as f64) / 7.0).collect();
        let w = least_squares(&rows, &y).unwrap();
        for j in 0..4 {
            let dot: f64 = rows
                .iter()
                .zip(&y)
                .map(|(r, &yi)| {
                    let pred: f64 = r.iter().zip(&w).map(|(a, b)| a * b).sum();
                    r[j] * (yi - pred)
                })
                .sum();
            assert!(dot.abs() < 1e-8, "column {j} residual dot product {dot}");
        }
    }

    #[test]
    fn collinear_columns_fall_back_to_ridge() {
        // Duplicate column: plain normal equations are singular.
        let rows: Vec<Vec<f64>> =
            (0..6).map(|i| vec![i as f64, i as f64, 1.0]).collect();
        let y: Vec<f64> = (0..6).map(|i| 3.0 * i as f64).collect();
        let w = least_squares(&rows, &y).unwrap();
        // Ridge splits the weight across the twin columns.
        assert!((w[0] + w[1] - 3.0).abs() < 1e-3, "{w:?}");
    }

    #[test]
    fn baseline_slots_exclude_one_hots() {
        let with = baseline_slots(true);
        let without = baseline_slots(false);
        assert_eq!(with.len(), without.len() + 1);
        assert!(with.contains(&I_FLOPS));
        assert!(!without.contains(&I_FLOPS));
        for &s in &with {
            assert_ne!(SLOTS[s].kind, SlotKind::OneHot);
        }
    }
}

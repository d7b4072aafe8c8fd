//! Small dense least-squares helper.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Least-squares solution of `sum_j coef_j * columns[j] = y`; returns the
/// coefficients and the root-mean-square residual.
pub fn lstsq(columns: &[Vec<f64>], y: &[f64]) -> Result<(Vec<f64>, f64)> {
    let rows = y.len();
    let cols = columns.len();
    if cols == 0 || rows < cols || columns.iter().any(|c| c.len() != rows) {
        return Err(Error::DimensionMismatch(format!(
            "least squares with {rows} rows and {cols} columns"
        )));
    }
    // scale columns to unit norm for conditioning
    let norms: Vec<f64> = columns
        .iter()
        .map(|c| {
            c.iter()
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt()
                .max(f64::MIN_POSITIVE)
        })
        .collect();
    let a = DMatrix::from_fn(rows, cols, |i, j| columns[j][i] / norms[j]);
    let b = DVector::from_column_slice(y);
    let svd = a.clone().svd(true, true);
    let x = svd
        .solve(&b, 1e-14)
        .map_err(|e| Error::DimensionMismatch(format!("least squares failed: {e}")))?;
    let resid = &a * &x - &b;
    let rms = (resid.norm_squared() / rows as f64).sqrt();
    Ok((x.iter().zip(&norms).map(|(v, n)| v / n).collect(), rms))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_line() {
        let x: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 2.0 * v).collect();
        let (coef, res) = lstsq(&[vec![1.0; 20], x], &y).unwrap();
        assert!((coef[0] - 3.0).abs() < 1e-12 && (coef[1] + 2.0).abs() < 1e-12);
        assert!(res < 1e-12);
    }
}

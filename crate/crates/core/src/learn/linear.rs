//! Ordinary least squares with an intercept.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
}

impl LinearModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.intercept + row.iter().zip(&self.coefficients).map(|(x, b)| x * b).sum::<f64>()
    }
}

/// Least squares on standardized columns. Constant columns get a zero
/// coefficient and rank-deficient designs resolve to the least-norm solution.
pub fn fit_linear_rows(n: usize, p: usize, get: impl Fn(usize, usize) -> f64, y: &[f64]) -> Result<LinearModel> {
    if n == 0 || y.len() != n {
        return Err(Error::Fit(format!("linear fit needs matching non-empty rows, got {n} rows and {} targets", y.len())));
    }
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let mut mean = vec![0.0; p];
    let mut scale = vec![0.0; p];
    for j in 0..p {
        mean[j] = (0..n).map(|i| get(i, j)).sum::<f64>() / n as f64;
        scale[j] = ((0..n).map(|i| (get(i, j) - mean[j]).powi(2)).sum::<f64>() / n as f64).sqrt();
    }
    let active: Vec<usize> = (0..p).filter(|&j| scale[j] > 0.0).collect();
    let mut coefficients = vec![0.0; p];
    if !active.is_empty() {
        let z = DMatrix::from_fn(n, active.len(), |i, k| {
            let j = active[k];
            (get(i, j) - mean[j]) / scale[j]
        });
        let b = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
        let svd = z.svd(true, true);
        let s_max = svd.singular_values.max();
        let eps = s_max * n.max(active.len()) as f64 * f64::EPSILON;
        let beta = svd.solve(&b, eps).map_err(|e| Error::Fit(e.to_string()))?;
        for (k, &j) in active.iter().enumerate() {
            coefficients[j] = beta[k] / scale[j];
        }
    }
    let intercept = y_mean - mean.iter().zip(&coefficients).map(|(m, b)| m * b).sum::<f64>();
    Ok(LinearModel {
        intercept,
        coefficients,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fit(x: &[Vec<f64>], y: &[f64]) -> LinearModel {
        fit_linear_rows(x.len(), x[0].len(), |i, j| x[i][j], y).unwrap()
    }

    #[test]
    fn exact_line() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 * 0.7 - 2.0]).collect();
        let y: Vec<f64> = x.iter().map(|r| 2.0 * r[0] + 1.0).collect();
        let m = fit(&x, &y);
        assert!((m.coefficients[0] - 2.0).abs() < 1e-10);
        assert!((m.intercept - 1.0).abs() < 1e-10);
    }

    #[test]
    fn constant_column_gives_mean_intercept() {
        let x = vec![vec![4.0]; 5];
        let y = [1.0, 2.0, 3.0, 4.0, 10.0];
        let m = fit(&x, &y);
        assert_eq!(m.coefficients, vec![0.0]);
        assert_eq!(m.intercept, 4.0);
    }

    #[test]
    fn duplicated_columns_split_weight() {
        let x: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64, i as f64]).collect();
        let y: Vec<f64> = (0..8).map(|i| 3.0 * i as f64).collect();
        let m = fit(&x, &y);
        assert!((m.coefficients[0] - 1.5).abs() < 1e-10);
        assert!((m.coefficients[1] - 1.5).abs() < 1e-10);
    }

    fn planted(seed: u64, n: usize, p: usize, noise: f64) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let beta: Vec<f64> = (0..p).map(|_| rng.random_range(-5.0..5.0)).collect();
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..p).map(|j| rng.random_range(-1.0..1.0) * 10f64.powi(j as i32 % 4)).collect())
            .collect();
        let y = x
            .iter()
            .map(|r| 0.5 + r.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>() + noise * rng.random_range(-1.0..1.0))
            .collect();
        (x, y, beta)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn recovers_planted_coefficients(seed in any::<u64>(), p in 1usize..8) {
            let (x, y, beta) = planted(seed, 40, p, 0.0);
            let m = fit(&x, &y);
            for (a, b) in m.coefficients.iter().zip(&beta) {
                prop_assert!((a - b).abs() <= 1e-8, "{a} vs {b}");
            }
            prop_assert!((m.intercept - 0.5).abs() <= 1e-8);
        }

        #[test]
        fn residual_orthogonal_to_columns(seed in any::<u64>(), p in 1usize..8) {
            let (x, y, _) = planted(seed, 30, p, 3.0);
            let m = fit(&x, &y);
            let r: Vec<f64> = x.iter().zip(&y).map(|(row, y)| y - m.predict_row(row)).collect();
            let mut xtr = 0.0;
            let mut xty = 0.0;
            // Columns of the design include the intercept.
            for j in 0..=p {
                let col = |i: usize| if j == p { 1.0 } else { x[i][j] };
                xtr += (0..x.len()).map(|i| col(i) * r[i]).sum::<f64>().powi(2);
                xty += (0..x.len()).map(|i| col(i) * y[i]).sum::<f64>().powi(2);
            }
            prop_assert!(xtr.sqrt() <= 1e-8 * xty.sqrt(), "{} vs {}", xtr.sqrt(), xty.sqrt());
        }
    }
}

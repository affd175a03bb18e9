use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{ForecastError, Result};

/// Multi-output ridge regression on standardized features.
///
/// Features are centered and scaled by their training standard deviation
/// (constant columns are only centered); targets are centered, so the
/// intercept is the target mean and is not penalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeRegression {
    pub lambda: f64,
    pub feature_mean: Vec<f64>,
    pub feature_scale: Vec<f64>,
    pub target_mean: Vec<f64>,
    /// `features × targets`, row-major.
    pub weights: Vec<f64>,
}

fn column_stats(x: &DMatrix<f64>) -> (Vec<f64>, Vec<f64>) {
    let n = x.nrows() as f64;
    let mut mean = Vec::with_capacity(x.ncols());
    let mut scale = Vec::with_capacity(x.ncols());
    for col in x.column_iter() {
        let m = col.sum() / n;
        let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
        let sd = var.sqrt();
        mean.push(m);
        scale.push(if sd > 1e-12 * (1.0 + m.abs()) { sd } else { 1.0 });
    }
    (mean, scale)
}

impl RidgeRegression {
    /// Fits `y ≈ x W + b`; rows are samples.
    pub fn fit(x: &DMatrix<f64>, y: &DMatrix<f64>, lambda: f64) -> Result<Self> {
        if x.nrows() == 0 || x.nrows() != y.nrows() {
            return Err(ForecastError::Input(format!(
                "{} feature rows vs {} target rows",
                x.nrows(),
                y.nrows()
            )));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(ForecastError::Input(format!("ridge penalty must be ≥ 0, got {lambda}")));
        }
        let (feature_mean, feature_scale) = column_stats(x);
        let target_mean: Vec<f64> = y.column_iter().map(|c| c.sum() / y.nrows() as f64).collect();
        let mut z = x.clone();
        for (j, mut col) in z.column_iter_mut().enumerate() {
            col.apply(|v| *v = (*v - feature_mean[j]) / feature_scale[j]);
        }
        let mut yc = y.clone();
        for (j, mut col) in yc.column_iter_mut().enumerate() {
            col.add_scalar_mut(-target_mean[j]);
        }
        let mut gram = z.tr_mul(&z);
        let max_diag = gram.diagonal().max();
        for i in 0..gram.nrows() {
            gram[(i, i)] += lambda;
        }
        let chol = nalgebra::Cholesky::new(gram).ok_or(ForecastError::RankDeficient)?;
        let l = chol.l_dirty();
        let min_pivot = (0..l.nrows()).map(|i| l[(i, i)] * l[(i, i)]).fold(f64::INFINITY, f64::min);
        if min_pivot <= 1e-10 * max_diag.max(1.0) {
            return Err(ForecastError::RankDeficient);
        }
        let w = chol.solve(&z.tr_mul(&yc));
        let weights = (0..w.nrows()).flat_map(|i| w.row(i).iter().copied().collect::<Vec<_>>()).collect();
        Ok(Self {
            lambda,
            feature_mean,
            feature_scale,
            target_mean,
            weights,
        })
    }

    pub fn n_features(&self) -> usize {
        self.feature_mean.len()
    }

    pub fn n_targets(&self) -> usize {
        self.target_mean.len()
    }

    pub fn predict_one(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_features() {
            return Err(ForecastError::Layout(format!(
                "{} features given, model expects {}",
                x.len(),
                self.n_features()
            )));
        }
        let m = self.n_targets();
        let mut out = self.target_mean.clone();
        for (i, xi) in x.iter().enumerate() {
            let z = (xi - self.feature_mean[i]) / self.feature_scale[i];
            if z != 0.0 {
                for (o, w) in out.iter_mut().zip(&self.weights[i * m..(i + 1) * m]) {
                    *o += z * w;
                }
            }
        }
        Ok(out)
    }

    /// Mean squared error over every entry of `y`.
    pub fn mse(&self, x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<f64> {
        let mut total = 0.0;
        for r in 0..x.nrows() {
            let row: Vec<f64> = x.row(r).iter().copied().collect();
            let pred = DVector::from_vec(self.predict_one(&row)?);
            total += (pred - y.row(r).transpose()).norm_squared();
        }
        Ok(total / (x.nrows() * y.ncols()) as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn data(n: usize, p: usize, seed: u64) -> (DMatrix<f64>, DMatrix<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, p, |_, _| rng.gen_range(-1.0..1.0));
        let w = DMatrix::from_fn(p, 2, |_, _| rng.gen_range(-2.0..2.0));
        let y = &x * &w + DMatrix::from_fn(n, 2, |_, _| 0.1 * rng.gen_range(-1.0..1.0) + 3.0);
        (x, y)
    }

    #[test]
    fn recovers_a_copied_feature() {
        let (x, _) = data(200, 5, 1);
        let y = DMatrix::from_fn(200, 1, |r, _| x[(r, 3)]);
        let m = RidgeRegression::fit(&x, &y, 1e-8).unwrap();
        assert!(m.mse(&x, &y).unwrap() < 1e-12);
        let row: Vec<f64> = x.row(7).iter().copied().collect();
        assert!((m.predict_one(&row).unwrap()[0] - x[(7, 3)]).abs() < 1e-6);
    }

    #[test]
    fn training_loss_falls_as_penalty_shrinks() {
        let (x, y) = data(100, 8, 2);
        let mut prev = f64::INFINITY;
        for lambda in [1000.0, 100.0, 10.0, 1.0, 0.1, 0.0] {
            let loss = RidgeRegression::fit(&x, &y, lambda).unwrap().mse(&x, &y).unwrap();
            assert!(loss <= prev + 1e-12, "λ = {lambda}");
            prev = loss;
        }
    }

    #[test]
    fn affine_feature_rescaling_does_not_change_predictions() {
        let (x, y) = data(80, 4, 3);
        let scaled = DMatrix::from_fn(80, 4, |r, c| x[(r, c)] * (c as f64 + 2.0) - 7.0 * c as f64);
        let a = RidgeRegression::fit(&x, &y, 0.5).unwrap();
        let b = RidgeRegression::fit(&scaled, &y, 0.5).unwrap();
        for r in 0..80 {
            let pa = a.predict_one(&x.row(r).iter().copied().collect::<Vec<_>>()).unwrap();
            let pb = b.predict_one(&scaled.row(r).iter().copied().collect::<Vec<_>>()).unwrap();
            for (u, v) in pa.iter().zip(&pb) {
                assert!((u - v).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn duplicate_columns_need_a_penalty() {
        let (mut x, y) = data(50, 3, 4);
        let c0 = x.column(0).clone_owned();
        x.set_column(2, &c0);
        assert_eq!(RidgeRegression::fit(&x, &y, 0.0), Err(ForecastError::RankDeficient));
        assert!(RidgeRegression::fit(&x, &y, 1.0).is_ok());
    }

    #[test]
    fn fitting_is_deterministic() {
        let (x, y) = data(60, 6, 5);
        assert_eq!(RidgeRegression::fit(&x, &y, 1.0).unwrap(), RidgeRegression::fit(&x, &y, 1.0).unwrap());
    }
}

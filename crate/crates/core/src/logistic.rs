//! Finite-sample logistic regression potential.
//!
//! `v(b) = -(1/n) Σᵢ [Yᵢ log σ(bᵀXᵢ) + (1-Yᵢ) log(1-σ(bᵀXᵢ))]`, with
//! `∇ᵏv(b) = (1/n) Σᵢ σ^{(k-1)}(bᵀXᵢ) Xᵢ⊗k` for `k ≥ 2`. Every contraction
//! is evaluated through `O(n·d)` sums; dense `d³` tensors are never
//! materialized here.

use nalgebra::{DMatrix, DVector};

use crate::dataset::Dataset;
use crate::error::Result;
use crate::model::{check_point, CubicForm, PotentialModel, QuarticForm};
use crate::sigmoid::{sigma, sigma_d1, sigma_d2, sigma_d3, softplus};

#[derive(Debug, Clone)]
pub struct LogisticModel {
    data: Dataset,
}

impl LogisticModel {
    pub fn new(data: Dataset) -> Self {
        Self { data }
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    /// `bᵀXᵢ` for all rows.
    fn margins(&self, b: &DVector<f64>) -> DVector<f64> {
        &self.data.features * b
    }
}

impl PotentialModel for LogisticModel {
    fn dim(&self) -> usize {
        self.data.d()
    }

    fn sample_size(&self) -> f64 {
        self.data.n() as f64
    }

    fn potential(&self, x: &DVector<f64>) -> Result<f64> {
        check_point(x, self.dim())?;
        let t = self.margins(x);
        let n = self.data.n();
        let mut total = 0.0;
        for i in 0..n {
            // -log σ(t) = softplus(-t); -log(1-σ(t)) = softplus(t)
            total += if self.data.labels[i] == 1 {
                softplus(-t[i])
            } else {
                softplus(t[i])
            };
        }
        Ok(total / n as f64)
    }

    fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_point(x, self.dim())?;
        let t = self.margins(x);
        let n = self.data.n();
        let residuals = DVector::from_fn(n, |i, _| sigma(t[i]) - self.data.labels[i] as f64);
        Ok(self.data.features.transpose() * residuals / n as f64)
    }

    fn hessian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_point(x, self.dim())?;
        let t = self.margins(x);
        let (n, d) = (self.data.n(), self.dim());
        // Xᵀ diag(σ'(t)) X / n via a scaled copy of X.
        let mut scaled = self.data.features.clone();
        for i in 0..n {
            let w = sigma_d1(t[i]) / n as f64;
            for j in 0..d {
                scaled[(i, j)] *= w;
            }
        }
        Ok(self.data.features.transpose() * scaled)
    }

    fn third_directional(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<f64> {
        check_point(x, self.dim())?;
        check_point(u, self.dim())?;
        let t = self.margins(x);
        let w = self.margins(u);
        let n = self.data.n();
        let mut acc = 0.0;
        for i in 0..n {
            let wi = w[i];
            acc += sigma_d2(t[i]) * wi * wi * wi;
        }
        Ok(acc / n as f64)
    }

    fn fourth_directional(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<f64> {
        check_point(x, self.dim())?;
        check_point(u, self.dim())?;
        let t = self.margins(x);
        let w = self.margins(u);
        let n = self.data.n();
        let mut acc = 0.0;
        for i in 0..n {
            let w2 = w[i] * w[i];
            acc += sigma_d3(t[i]) * w2 * w2;
        }
        Ok(acc / n as f64)
    }

    fn third_form(&self, x: &DVector<f64>) -> Result<CubicForm> {
        check_point(x, self.dim())?;
        let t = self.margins(x);
        let n = self.data.n() as f64;
        let coeffs: Vec<f64> = t.iter().map(|&ti| sigma_d2(ti) / n).collect();
        Ok(CubicForm::RankOneSum {
            coeffs,
            vectors: self.data.features.clone(),
        })
    }

    fn fourth_form(&self, x: &DVector<f64>) -> Result<QuarticForm> {
        check_point(x, self.dim())?;
        let t = self.margins(x);
        let n = self.data.n() as f64;
        let coeffs: Vec<f64> = t.iter().map(|&ti| sigma_d3(ti) / n).collect();
        Ok(QuarticForm::RankOneSum {
            coeffs,
            vectors: self.data.features.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::stream_rng;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn test_model(d: usize, n: usize, seed: u64) -> LogisticModel {
        let beta = DVector::from_fn(d, |i, _| if i == 0 { 1.0 } else { 0.0 });
        LogisticModel::new(Dataset::generate(d, n, &beta, seed).unwrap())
    }

    fn random_vec(d: usize, rng: &mut impl Rng) -> DVector<f64> {
        DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal))
    }

    #[test]
    fn potential_at_zero_is_log_two() {
        let model = test_model(3, 40, 5);
        let v0 = model.potential(&DVector::zeros(3)).unwrap();
        assert_relative_eq!(v0, 2.0f64.ln(), max_relative = 1e-14);
    }

    #[test]
    fn rejects_non_finite_point() {
        let model = test_model(2, 10, 1);
        let bad = DVector::from_column_slice(&[f64::NAN, 0.0]);
        assert!(model.potential(&bad).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let model = test_model(3, 50, 9);
        let mut rng = stream_rng(17, 0);
        for _ in 0..5 {
            let x = random_vec(3, &mut rng);
            let g = model.gradient(&x).unwrap();
            let h = 1e-5 * (1.0 + x.norm());
            for j in 0..3 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[j] += h;
                xm[j] -= h;
                let fd =
                    (model.potential(&xp).unwrap() - model.potential(&xm).unwrap()) / (2.0 * h);
                assert_relative_eq!(g[j], fd, epsilon = 1e-9, max_relative = 1e-5);
            }
        }
    }

    #[test]
    fn hessian_matches_finite_differences_and_is_psd() {
        let model = test_model(3, 50, 21);
        let mut rng = stream_rng(18, 0);
        for _ in 0..5 {
            let x = random_vec(3, &mut rng);
            let h_mat = model.hessian(&x).unwrap();
            assert_relative_eq!(
                (&h_mat - h_mat.transpose()).norm(),
                0.0,
                epsilon = 1e-14
            );
            let h = 1e-5 * (1.0 + x.norm());
            for j in 0..3 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[j] += h;
                xm[j] -= h;
                let fd = (model.gradient(&xp).unwrap() - model.gradient(&xm).unwrap()) / (2.0 * h);
                for i in 0..3 {
                    assert_relative_eq!(h_mat[(i, j)], fd[i], epsilon = 1e-8, max_relative = 1e-5);
                }
            }
            let min_eig = h_mat
                .symmetric_eigenvalues()
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
            assert!(min_eig >= -1e-10, "Hessian not PSD: {min_eig}");
        }
    }

    #[test]
    fn convexity_on_many_random_points() {
        let model = test_model(4, 80, 33);
        let mut rng = stream_rng(19, 0);
        for _ in 0..100 {
            let x = random_vec(4, &mut rng);
            let min_eig = model
                .hessian(&x)
                .unwrap()
                .symmetric_eigenvalues()
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
            assert!(min_eig >= -1e-10);
        }
    }

    #[test]
    fn third_contraction_matches_directional_finite_differences() {
        let model = test_model(3, 50, 13);
        let mut rng = stream_rng(20, 0);
        for _ in 0..5 {
            let x = random_vec(3, &mut rng);
            let u = random_vec(3, &mut rng);
            let exact = model.third_directional(&x, &u).unwrap();
            let h = 5e-3;
            let f = |t: f64| model.potential(&(&x + t * &u)).unwrap();
            let fd = (f(2.0 * h) - 2.0 * f(h) + 2.0 * f(-h) - f(-2.0 * h)) / (2.0 * h * h * h);
            assert_relative_eq!(exact, fd, epsilon = 1e-6, max_relative = 1e-3);
        }
    }

    #[test]
    fn forms_agree_with_directional_contractions() {
        let model = test_model(3, 30, 29);
        let mut rng = stream_rng(21, 0);
        let x = random_vec(3, &mut rng);
        let u = random_vec(3, &mut rng);
        let c3 = model.third_form(&x).unwrap();
        assert_relative_eq!(
            c3.value(&u),
            model.third_directional(&x, &u).unwrap(),
            max_relative = 1e-12
        );
        let c4 = model.fourth_form(&x).unwrap();
        assert_relative_eq!(
            c4.value(&u),
            model.fourth_directional(&x, &u).unwrap(),
            max_relative = 1e-12
        );
        // dense materialization agrees too
        let dense = c3.to_dense().unwrap();
        assert_relative_eq!(
            dense.contract3(&u).unwrap(),
            c3.value(&u),
            max_relative = 1e-11
        );
    }
}

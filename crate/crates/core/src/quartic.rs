//! Synthetic quartic test potential with exactly known derivatives.
//!
//! `v(x) = ½ xᵀHx + (s/6)⟨S, x⊗3⟩ + (1/24)⟨T, x⊗4⟩`. Used as ground truth in
//! end-to-end tests: all derivative quantities are closed-form polynomials,
//! and with `S = 0, T = 0` the potential is exactly Gaussian so every
//! downstream diagnostic must vanish.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{check_point, CubicForm, PotentialModel, QuarticForm};
use crate::tensor::{SymTensor3, SymTensor4};

#[derive(Debug, Clone)]
pub struct QuarticModel {
    h: DMatrix<f64>,
    s: SymTensor3,
    t: SymTensor4,
    cubic_scale: f64,
    n: f64,
}

impl QuarticModel {
    /// Rejects configurations whose quartic term is negative somewhere on the
    /// sphere (the potential would be unbounded below); the check runs the
    /// same multistart machinery as the operator-norm estimates.
    pub fn new(
        h: DMatrix<f64>,
        s: SymTensor3,
        t: SymTensor4,
        cubic_scale: f64,
        n: f64,
    ) -> Result<Self> {
        let d = h.nrows();
        if h.ncols() != d || d == 0 {
            return Err(Error::Argument("quartic model: H must be square".into()));
        }
        if s.dim() != d || t.dim() != d {
            return Err(Error::Argument(
                "quartic model: tensor dimensions must match H".into(),
            ));
        }
        if !n.is_finite() || n < 1.0 {
            return Err(Error::Argument("quartic model: need n ≥ 1".into()));
        }
        if nalgebra::linalg::Cholesky::new(h.clone()).is_none() {
            return Err(Error::Argument(
                "quartic model: H must be positive definite".into(),
            ));
        }
        let min4 = t.min_sphere(16, 0xA55A);
        let scale = t.frobenius().max(1.0);
        if min4 < -1e-9 * scale {
            return Err(Error::Argument(format!(
                "quartic model: quartic term reaches {min4} on the sphere; potential unbounded below"
            )));
        }
        Ok(Self {
            h,
            s,
            t,
            cubic_scale,
            n,
        })
    }

    pub fn hessian_at_mode(&self) -> &DMatrix<f64> {
        &self.h
    }
}

impl PotentialModel for QuarticModel {
    fn dim(&self) -> usize {
        self.h.nrows()
    }

    fn sample_size(&self) -> f64 {
        self.n
    }

    fn potential(&self, x: &DVector<f64>) -> Result<f64> {
        check_point(x, self.dim())?;
        let quad = 0.5 * (x.transpose() * &self.h * x)[(0, 0)];
        let cubic = self.cubic_scale / 6.0 * self.s.contract3(x)?;
        let quartic = self.t.contract4(x)? / 24.0;
        Ok(quad + cubic + quartic)
    }

    fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_point(x, self.dim())?;
        let mut g = &self.h * x;
        g += self.cubic_scale / 2.0 * self.s.contract_two(x)?;
        g += self.t.contract_three(x)? / 6.0;
        Ok(g)
    }

    fn hessian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_point(x, self.dim())?;
        let mut hess = self.h.clone();
        hess += self.cubic_scale * self.s.contract_one(x)?;
        hess += self.t.contract_two_matrix(x)? / 2.0;
        Ok(hess)
    }

    fn third_directional(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<f64> {
        check_point(x, self.dim())?;
        Ok(self.cubic_scale * self.s.contract3(u)?)
    }

    fn fourth_directional(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<f64> {
        check_point(x, self.dim())?;
        self.t.contract4(u)
    }

    fn third_form(&self, x: &DVector<f64>) -> Result<CubicForm> {
        check_point(x, self.dim())?;
        Ok(CubicForm::Dense(self.s.clone()).scale(self.cubic_scale))
    }

    fn fourth_form(&self, x: &DVector<f64>) -> Result<QuarticForm> {
        check_point(x, self.dim())?;
        Ok(QuarticForm::Dense(self.t.clone()))
    }
}

/// Purely Gaussian instance (`S = 0`, `T = 0`).
pub fn gaussian_model(h: DMatrix<f64>, n: f64) -> Result<QuarticModel> {
    let d = h.nrows();
    QuarticModel::new(h, SymTensor3::zeros(d)?, SymTensor4::zeros(d)?, 0.0, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::stream_rng;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn psd_quartic(d: usize) -> SymTensor4 {
        // Σᵢ eᵢ⊗4 is nonnegative on the sphere.
        let mut t = SymTensor4::zeros(d).unwrap();
        for i in 0..d {
            t.set_orbit(i, i, i, i, 1.0);
        }
        t
    }

    #[test]
    fn gaussian_case_has_zero_higher_derivatives() {
        let model = gaussian_model(DMatrix::identity(3, 3), 10.0).unwrap();
        let u = DVector::from_column_slice(&[1.0, -2.0, 0.5]);
        assert_eq!(model.third_directional(&DVector::zeros(3), &u).unwrap(), 0.0);
        assert_eq!(model.fourth_directional(&DVector::zeros(3), &u).unwrap(), 0.0);
    }

    #[test]
    fn gradient_vanishes_at_origin() {
        let mut rng = stream_rng(2, 0);
        let s = SymTensor3::random_gaussian(3, &mut rng).unwrap();
        let model =
            QuarticModel::new(DMatrix::identity(3, 3), s, psd_quartic(3), 0.3, 5.0).unwrap();
        let g = model.gradient(&DVector::zeros(3)).unwrap();
        assert_eq!(g.norm(), 0.0);
    }

    #[test]
    fn third_contraction_is_scaled_cubic() {
        let mut rng = stream_rng(3, 0);
        let s = SymTensor3::random_gaussian(3, &mut rng).unwrap();
        let model = QuarticModel::new(
            DMatrix::identity(3, 3),
            s.clone(),
            psd_quartic(3),
            0.7,
            5.0,
        )
        .unwrap();
        let u = DVector::from_fn(3, |_, _| rng.sample::<f64, _>(StandardNormal));
        assert_relative_eq!(
            model.third_directional(&DVector::zeros(3), &u).unwrap(),
            0.7 * s.contract3(&u).unwrap(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn rejects_unbounded_below_quartic() {
        let mut t = SymTensor4::zeros(2).unwrap();
        t.set_orbit(0, 0, 0, 0, -1.0);
        let err = QuarticModel::new(
            DMatrix::identity(2, 2),
            SymTensor3::zeros(2).unwrap(),
            t,
            0.0,
            5.0,
        );
        assert!(err.is_err());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let mut rng = stream_rng(5, 0);
        let s = SymTensor3::random_gaussian(3, &mut rng).unwrap();
        let model =
            QuarticModel::new(DMatrix::identity(3, 3) * 2.0, s, psd_quartic(3), 0.4, 7.0)
                .unwrap();
        let x = DVector::from_fn(3, |_, _| 0.3 * rng.sample::<f64, _>(StandardNormal));
        let g = model.gradient(&x).unwrap();
        let hess = model.hessian(&x).unwrap();
        let h = 1e-5 * (1.0 + x.norm());
        for j in 0..3 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            let fd = (model.potential(&xp).unwrap() - model.potential(&xm).unwrap()) / (2.0 * h);
            assert_relative_eq!(g[j], fd, epsilon = 1e-9, max_relative = 1e-5);
            let fd_grad = (model.gradient(&xp).unwrap() - model.gradient(&xm).unwrap()) / (2.0 * h);
            for i in 0..3 {
                assert_relative_eq!(hess[(i, j)], fd_grad[i], epsilon = 1e-8, max_relative = 1e-5);
            }
        }
    }
}

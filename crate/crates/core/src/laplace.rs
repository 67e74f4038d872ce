//! Mode finding, the Laplace fit, and the whitened potential.
//!
//! The fit holds the mode `x̂` of `V = n·v`, the Cholesky factor `L` of
//! `H_V = n∇²v(x̂)`, and exposes `W(z) = V(x̂ + L⁻ᵀz)` together with the
//! Taylor remainders `r₃, r₄` of `W`. All uses of `H_V^{-1/2}` go through
//! triangular solves against `L`; any factor choice yields the same
//! distributions, and the Cholesky one is a single `O(d³)` factorization.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::format::float17;
use crate::model::PotentialModel;

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 100;
const ARMIJO: f64 = 1e-4;
const MAX_LEVENBERG_FALLBACKS: usize = 10;

/// Damped Newton search for the minimizer of `v`.
///
/// Stops when the gradient norm falls under `tol` relative to its starting
/// value (on both the `v` and the `V = n·v` scale). An iterate escaping
/// `‖x‖ > 10³(1 + ‖x₀‖)` is reported as a diverged mode, which for logistic
/// likelihoods signals non-existence of a finite maximizer (separable data).
pub fn find_mode(
    model: &dyn PotentialModel,
    x0: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<(DVector<f64>, usize)> {
    let n = model.sample_size();
    let g0 = model.gradient(x0)?.norm();
    let threshold = tol * (1.0 / n + g0).min(g0.max(1.0));
    let escape = 1e3 * (1.0 + x0.norm());

    let mut x = x0.clone();
    let mut consecutive_fallbacks = 0usize;
    for iter in 0..max_iter {
        let grad = model.gradient(&x)?;
        if grad.norm() <= threshold {
            return Ok((x, iter));
        }
        let hess = model.hessian(&x)?;
        let step = match nalgebra::linalg::Cholesky::new(hess.clone()) {
            Some(chol) => {
                consecutive_fallbacks = 0;
                chol.solve(&(-&grad))
            }
            None => {
                consecutive_fallbacks += 1;
                if consecutive_fallbacks > MAX_LEVENBERG_FALLBACKS {
                    return Err(Error::Numerical(
                        "mode search: Hessian stayed singular for more than 10 iterations".into(),
                    ));
                }
                levenberg_step(&hess, &grad)?
            }
        };
        let v_here = model.potential(&x)?;
        let slope = grad.dot(&step);
        // Roundoff slack keeps the line search from rejecting full Newton
        // steps once the required decrease falls below f64 resolution of v.
        let slack = 1e-14 * (1.0 + v_here.abs());
        let mut t = 1.0;
        let mut accepted = None;
        while t >= 1e-18 {
            let cand = &x + t * &step;
            if cand.iter().all(|c| c.is_finite()) {
                if let Ok(v_cand) = model.potential(&cand) {
                    if v_cand <= v_here + ARMIJO * t * slope + slack {
                        accepted = Some(cand);
                        break;
                    }
                }
            }
            t *= 0.5;
        }
        let next = accepted.ok_or_else(|| {
            Error::Convergence("mode search: line search found no decrease".into())
        })?;
        x = next;
        if !x.iter().all(|c| c.is_finite()) || x.norm() > escape {
            return Err(Error::ModeDiverged(format!(
                "iterate norm {:.3e} exceeded {:.3e} after {} iterations",
                x.norm(),
                escape,
                iter + 1
            )));
        }
    }
    let gn = model.gradient(&x)?.norm();
    if gn <= threshold {
        return Ok((x, max_iter));
    }
    Err(Error::Convergence(format!(
        "mode search: gradient norm {gn:.3e} above tolerance {threshold:.3e} after {max_iter} iterations"
    )))
}

fn levenberg_step(hess: &DMatrix<f64>, grad: &DVector<f64>) -> Result<DVector<f64>> {
    let d = hess.nrows();
    let scale = (0..d).map(|i| hess[(i, i)].abs()).fold(1e-12, f64::max);
    let mut mu = 1e-8 * scale;
    for _ in 0..40 {
        let damped = hess + DMatrix::identity(d, d) * mu;
        if let Some(chol) = nalgebra::linalg::Cholesky::new(damped) {
            return Ok(chol.solve(&(-grad)));
        }
        mu *= 10.0;
    }
    Err(Error::Numerical(
        "mode search: damping failed to make the Hessian positive definite".into(),
    ))
}

/// The Laplace approximation `N(x̂, H_V⁻¹)` and the whitening transform.
#[derive(Debug, Clone)]
pub struct LaplaceFit {
    /// Mode `x̂` of `V`.
    pub mode: DVector<f64>,
    /// Scale `n` with `V = n·v`.
    pub n: f64,
    /// Lower-triangular `L` with `L Lᵀ = H_V = n ∇²v(x̂)`.
    pub chol_lower: DMatrix<f64>,
    /// Smallest eigenvalue of `H_V`.
    pub lambda_min: f64,
    /// `‖∇V(x̂)‖₂`.
    pub grad_norm: f64,
    pub iterations: usize,
    /// `v(x̂)`, kept so `W(z) - W(0)` is formed without cancellation.
    pub v_at_mode: f64,
}

/// Fits the Laplace approximation: mode search from `x0` (origin if `None`),
/// Hessian, Cholesky factorization, and smallest-eigenvalue record.
pub fn fit(model: &dyn PotentialModel, x0: Option<DVector<f64>>) -> Result<LaplaceFit> {
    fit_with(model, x0, DEFAULT_TOL, DEFAULT_MAX_ITER)
}

pub fn fit_with(
    model: &dyn PotentialModel,
    x0: Option<DVector<f64>>,
    tol: f64,
    max_iter: usize,
) -> Result<LaplaceFit> {
    let d = model.dim();
    let x0 = x0.unwrap_or_else(|| DVector::zeros(d));
    let (mode, iterations) = find_mode(model, &x0, tol, max_iter)?;
    let n = model.sample_size();
    let h_v = model.hessian(&mode)? * n;
    let chol = nalgebra::linalg::Cholesky::new(h_v.clone()).ok_or_else(|| {
        Error::DegenerateFit("Hessian at the mode is not positive definite".into())
    })?;
    let lambda_min = h_v
        .symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if lambda_min.is_nan() || lambda_min <= 0.0 {
        return Err(Error::DegenerateFit(format!(
            "smallest Hessian eigenvalue {lambda_min} is not positive"
        )));
    }
    let grad_norm = model.gradient(&mode)?.norm() * n;
    let v_at_mode = model.potential(&mode)?;
    Ok(LaplaceFit {
        mode,
        n,
        chol_lower: chol.l(),
        lambda_min,
        grad_norm,
        iterations,
        v_at_mode,
    })
}

impl LaplaceFit {
    pub fn dim(&self) -> usize {
        self.mode.len()
    }

    /// `L⁻ᵀ z`: the whitened direction mapped back to model coordinates.
    pub fn unwhiten_direction(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        self.chol_lower
            .transpose()
            .solve_upper_triangular(z)
            .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))
    }

    /// `x̂ + L⁻ᵀ z`.
    pub fn point_from_whitened(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(&self.mode + self.unwhiten_direction(z)?)
    }

    /// `W(z) = V(x̂ + L⁻ᵀ z)`.
    pub fn whitened_potential(&self, model: &dyn PotentialModel, z: &DVector<f64>) -> Result<f64> {
        let x = self.point_from_whitened(z)?;
        Ok(self.n * model.potential(&x)?)
    }

    /// `W(z) - W(0)`, formed from `v(x) - v(x̂)` before scaling by `n`.
    pub fn whitened_delta(&self, model: &dyn PotentialModel, z: &DVector<f64>) -> Result<f64> {
        let x = self.point_from_whitened(z)?;
        Ok(self.n * (model.potential(&x)? - self.v_at_mode))
    }

    /// `∇W(z) = L⁻¹ ∇V(x̂ + L⁻ᵀ z)`.
    pub fn whitened_gradient(
        &self,
        model: &dyn PotentialModel,
        z: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        let x = self.point_from_whitened(z)?;
        let grad_v = model.gradient(&x)? * self.n;
        self.chol_lower
            .solve_lower_triangular(&grad_v)
            .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))
    }

    /// `⟨∇³W(0), z⊗3⟩ = n ⟨∇³v(x̂), (L⁻ᵀz)⊗3⟩`.
    pub fn whitened_third(&self, model: &dyn PotentialModel, z: &DVector<f64>) -> Result<f64> {
        let dir = self.unwhiten_direction(z)?;
        Ok(self.n * model.third_directional(&self.mode, &dir)?)
    }

    /// Third-order Taylor remainder `r₃(z) = W(z) - W(0) - ‖z‖²/2`.
    pub fn r3(&self, model: &dyn PotentialModel, z: &DVector<f64>) -> Result<f64> {
        Ok(self.whitened_delta(model, z)? - 0.5 * z.norm_squared())
    }

    /// Fourth-order remainder `r₄(z) = r₃(z) - ⟨∇³W(0), z⊗3⟩/3!`.
    pub fn r4(&self, model: &dyn PotentialModel, z: &DVector<f64>) -> Result<f64> {
        Ok(self.r3(model, z)? - self.whitened_third(model, z)? / 6.0)
    }

    /// Fit persisted as JSON with 17-significant-digit floats.
    pub fn to_json(&self) -> String {
        let d = self.dim();
        let mode = crate::format::json_float_array(self.mode.as_slice());
        let mut rows = Vec::with_capacity(d);
        for i in 0..d {
            let row: Vec<f64> = (0..d).map(|j| self.chol_lower[(i, j)]).collect();
            rows.push(crate::format::json_float_array(&row));
        }
        let n_str = if self.n.fract() == 0.0 && self.n.abs() < 9.0e15 {
            format!("{}", self.n as i64)
        } else {
            float17(self.n)
        };
        format!(
            "{{\"d\":{d},\"n\":{n},\"mode\":{mode},\"hessian_chol\":[{chol}],\"lambda_min\":{lmin},\"grad_norm\":{gnorm},\"iterations\":{iters}}}\n",
            d = d,
            n = n_str,
            mode = mode,
            chol = rows.join(","),
            lmin = float17(self.lambda_min),
            gnorm = float17(self.grad_norm),
            iters = self.iterations
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Dataset;
    use crate::logistic::LogisticModel;
    use crate::mc::stream_rng;
    use crate::quartic::{gaussian_model, QuarticModel};
    use crate::tensor::{SymTensor3, SymTensor4};
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn logistic_fixture(d: usize, n: usize, seed: u64) -> LogisticModel {
        let beta = DVector::from_fn(d, |i, _| if i == 0 { 1.0 } else { 0.0 });
        LogisticModel::new(Dataset::generate(d, n, &beta, seed).unwrap())
    }

    #[test]
    fn newton_is_exact_on_quadratics() {
        let h = DMatrix::from_diagonal(&DVector::from_column_slice(&[2.0, 0.5, 1.0]));
        let model = gaussian_model(h, 10.0).unwrap();
        for seed in 0..3u64 {
            let mut rng = stream_rng(seed, 0);
            let x0 = DVector::from_fn(3, |_, _| 5.0 * rng.sample::<f64, _>(StandardNormal));
            let (mode, iters) = find_mode(&model, &x0, 1e-9, 100).unwrap();
            assert!(mode.norm() < 1e-12, "mode {mode}");
            assert!(iters <= 2, "iters = {iters}");
        }
    }

    #[test]
    fn separable_data_is_reported_as_diverged_mode() {
        // Margins ~0.01 make Newton steps of size ~100, so the iterate
        // escapes the trust region well before the sigmoid saturates.
        let features = DMatrix::from_row_slice(
            4,
            2,
            &[0.01, 0.002, 0.02, -0.001, -0.01, 0.001, -0.02, -0.003],
        );
        let labels = vec![1, 1, 0, 0];
        let model = LogisticModel::new(Dataset::new(features, labels).unwrap());
        let err = find_mode(&model, &DVector::zeros(2), 1e-9, 100).unwrap_err();
        assert!(matches!(err, Error::ModeDiverged(_)), "{err}");
    }

    #[test]
    fn logistic_mode_reaches_tolerance_and_matches_coordinate_descent() {
        let model = logistic_fixture(4, 200, 1);
        let fit = fit(&model, None).unwrap();
        let grad_v = model.gradient(&fit.mode).unwrap().norm();
        assert!(grad_v <= 1e-9, "|grad v| = {grad_v}");
        assert!(fit.lambda_min > 0.0);
        // recorded V-scale gradient norm satisfies the fit tolerance contract
        let g0_big = model.gradient(&DVector::zeros(4)).unwrap().norm() * fit.n;
        assert!(
            fit.grad_norm <= 1e-9 * (1.0 + g0_big),
            "grad_norm {} vs allowance {}",
            fit.grad_norm,
            1e-9 * (1.0 + g0_big)
        );

        // slow cyclic coordinate-descent oracle
        let mut x = DVector::zeros(4);
        for _ in 0..20_000 {
            let mut moved = 0.0f64;
            for j in 0..4 {
                let g = model.gradient(&x).unwrap()[j];
                let h = model.hessian(&x).unwrap()[(j, j)];
                let step = g / h;
                x[j] -= step;
                moved = moved.max(step.abs());
            }
            if moved < 1e-13 {
                break;
            }
        }
        assert!(
            (&x - &fit.mode).norm() <= 1e-6,
            "coordinate descent disagrees: {}",
            (&x - &fit.mode).norm()
        );
    }

    #[test]
    fn quartic_fit_reproduces_scaled_hessian() {
        let h = DMatrix::from_diagonal(&DVector::from_column_slice(&[2.0, 3.0]));
        let n = 40.0;
        let model = gaussian_model(h.clone(), n).unwrap();
        let fit = fit(&model, None).unwrap();
        let recovered = &fit.chol_lower * fit.chol_lower.transpose();
        assert_relative_eq!(recovered[(0, 0)], n * 2.0, max_relative = 1e-12);
        assert_relative_eq!(recovered[(1, 1)], n * 3.0, max_relative = 1e-12);
        assert_relative_eq!(fit.lambda_min, n * 2.0, max_relative = 1e-12);
    }

    #[test]
    fn population_fit_recovers_beta_and_moment_hessian() {
        let model = crate::population::PopulationLogistic::new(4, 100.0).unwrap();
        let fit = fit(&model, None).unwrap();
        assert!((fit.mode[0] - 1.0).abs() < 1e-8, "mode {}", fit.mode[0]);
        let m = &model.moments;
        let h_v = &fit.chol_lower * fit.chol_lower.transpose();
        assert_relative_eq!(h_v[(0, 0)], 100.0 * m.get(1, 2), max_relative = 1e-6);
        assert_relative_eq!(h_v[(1, 1)], 100.0 * m.get(1, 0), max_relative = 1e-6);
        assert!(h_v[(0, 1)].abs() < 1e-8);
    }

    #[test]
    fn whitening_normalizes_gaussian_models_exactly() {
        let h = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let n = 25.0;
        let model = gaussian_model(h, n).unwrap();
        let fit = fit(&model, None).unwrap();
        assert_relative_eq!(
            fit.whitened_potential(&model, &DVector::zeros(2)).unwrap(),
            n * model.potential(&fit.mode).unwrap(),
            max_relative = 1e-14
        );
        let mut rng = stream_rng(8, 0);
        for _ in 0..10 {
            let z = DVector::from_fn(2, |_, _| rng.sample::<f64, _>(StandardNormal));
            let delta = fit.whitened_delta(&model, &z).unwrap();
            assert_relative_eq!(delta, 0.5 * z.norm_squared(), max_relative = 1e-12);
            assert!(fit.r3(&model, &z).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn whitened_hessian_is_identity_by_finite_differences() {
        let model = logistic_fixture(3, 120, 4);
        let fit = fit(&model, None).unwrap();
        let h = 1e-4;
        for i in 0..3 {
            for j in 0..3 {
                let mut zpp = DVector::zeros(3);
                zpp[i] += h;
                zpp[j] += h;
                let mut zpm = DVector::zeros(3);
                zpm[i] += h;
                zpm[j] -= h;
                let mut zmp = DVector::zeros(3);
                zmp[i] -= h;
                zmp[j] += h;
                let mut zmm = DVector::zeros(3);
                zmm[i] -= h;
                zmm[j] -= h;
                let fd = (fit.whitened_delta(&model, &zpp).unwrap()
                    - fit.whitened_delta(&model, &zpm).unwrap()
                    - fit.whitened_delta(&model, &zmp).unwrap()
                    + fit.whitened_delta(&model, &zmm).unwrap())
                    / (4.0 * h * h);
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((fd - want).abs() < 1e-4, "({i},{j}): {fd}");
            }
        }
    }

    #[test]
    fn quartic_remainders_match_closed_forms() {
        let mut rng = stream_rng(11, 0);
        let s = SymTensor3::random_gaussian(2, &mut rng).unwrap();
        let mut t = SymTensor4::zeros(2).unwrap();
        t.set_orbit(0, 0, 0, 0, 0.8);
        t.set_orbit(1, 1, 1, 1, 1.2);
        let h = DMatrix::from_row_slice(2, 2, &[1.5, 0.2, 0.2, 0.9]);
        let n = 30.0;
        let model = QuarticModel::new(h, s.clone(), t.clone(), 0.25, n).unwrap();
        let fit = fit(&model, None).unwrap();
        for _ in 0..10 {
            let z = DVector::from_fn(2, |_, _| rng.sample::<f64, _>(StandardNormal));
            let x = fit.unwhiten_direction(&z).unwrap();
            let want_r3 =
                n * (0.25 / 6.0 * s.contract3(&x).unwrap() + t.contract4(&x).unwrap() / 24.0);
            assert_relative_eq!(
                fit.r3(&model, &z).unwrap(),
                want_r3,
                epsilon = 1e-10,
                max_relative = 1e-9
            );
            let want_r4 = n * t.contract4(&x).unwrap() / 24.0;
            assert_relative_eq!(
                fit.r4(&model, &z).unwrap(),
                want_r4,
                epsilon = 1e-10,
                max_relative = 1e-9
            );
            assert!(fit.r3(&model, &DVector::zeros(2)).unwrap().abs() < 1e-14);
        }
    }

    #[test]
    fn whitened_third_norm_equals_weighted_norm_of_model_tensor() {
        // ‖∇³W(0)‖ should equal ‖∇³v(x̂)‖_{H_v} / √n.
        let mut rng = stream_rng(12, 0);
        let s = SymTensor3::random_gaussian(3, &mut rng).unwrap();
        let h = DMatrix::identity(3, 3) * 1.7;
        let n = 12.0;
        let model = QuarticModel::new(
            h.clone(),
            s.clone(),
            SymTensor4::zeros(3).unwrap(),
            0.4,
            n,
        )
        .unwrap();
        let fit = fit(&model, None).unwrap();

        // dense ∇³W(0) via whitening of s·scale by chol(H_V)
        let minv = fit
            .chol_lower
            .solve_lower_triangular(&DMatrix::identity(3, 3))
            .unwrap();
        let mut s_w = s.mode_transform(&minv).unwrap();
        s_w.scale_mut(0.4 * n);
        let lhs = s_w.opnorm(32, 7).value;

        let mut s_scaled = s.clone();
        s_scaled.scale_mut(0.4);
        let h_v_weighted = s_scaled.weighted_opnorm(&h, 32, 7).unwrap().value;
        let rhs = h_v_weighted / n.sqrt();
        assert_relative_eq!(lhs, rhs, max_relative = 1e-6);
    }

    #[test]
    fn r4_is_bounded_by_the_weighted_fourth_norm_on_the_ball() {
        let mut t = SymTensor4::zeros(2).unwrap();
        t.set_orbit(0, 0, 0, 0, 1.1);
        t.set_orbit(1, 1, 1, 1, 0.7);
        t.set_orbit(0, 0, 1, 1, 0.2);
        let h = DMatrix::from_row_slice(2, 2, &[1.2, 0.1, 0.1, 0.9]);
        let n = 50.0;
        let model =
            QuarticModel::new(h, SymTensor3::zeros(2).unwrap(), t, 0.0, n).unwrap();
        let fit = fit(&model, None).unwrap();
        let radius = 4.0;
        let c4 = crate::diagnostics::estimate_c4(&fit, &model, radius, 8, 32, 3)
            .unwrap()
            .value;
        let mut rng = stream_rng(13, 0);
        let ball = radius * 2.0f64.sqrt();
        for _ in 0..50 {
            let mut z = DVector::from_fn(2, |_, _| rng.sample::<f64, _>(StandardNormal));
            let u: f64 = rng.random::<f64>();
            z *= ball * u.powf(0.5) / z.norm();
            let r4 = fit.r4(&model, &z).unwrap().abs();
            let cap = c4 / (24.0 * n) * z.norm().powi(4) * (1.0 + 1e-3);
            assert!(r4 <= cap + 1e-12, "r4 = {r4}, cap = {cap}");
        }
    }

    #[test]
    fn fit_json_is_parseable_and_complete() {
        let model = logistic_fixture(2, 60, 3);
        let fit = fit(&model, None).unwrap();
        let json = fit.to_json();
        let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed["d"], 2);
        assert_eq!(parsed["n"], 60);
        assert_eq!(parsed["mode"].as_array().unwrap().len(), 2);
        assert_eq!(parsed["hessian_chol"].as_array().unwrap().len(), 2);
        assert!(parsed["lambda_min"].as_f64().unwrap() > 0.0);
        assert!(parsed["grad_norm"].as_f64().unwrap() >= 0.0);
    }
}

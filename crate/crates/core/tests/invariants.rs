//! Cross-module invariants: affine invariance of the fit/TV pipeline, the
//! ordering chain between the Monte Carlo leading term and its closed-form
//! bounds, and agreement between the quadrature and sampling routes.

use approx::assert_relative_eq;
use laplace_diag_core::diagnostics;
use laplace_diag_core::laplace;
use laplace_diag_core::mc::stream_rng;
use laplace_diag_core::model::{CubicForm, PotentialModel, QuarticForm};
use laplace_diag_core::oracle;
use laplace_diag_core::quad::{composite_legendre, gauss_legendre};
use laplace_diag_core::quartic::QuarticModel;
use laplace_diag_core::{Dataset, SymTensor3, SymTensor4};
use nalgebra::{DMatrix, DVector};

/// `v'(x) = v(Ax + b)` for an invertible `A`: the Laplace pipeline applied to
/// the transformed potential must produce the same whitened posterior.
struct AffineImage<'a> {
    inner: &'a QuarticModel,
    a: DMatrix<f64>,
    b: DVector<f64>,
}

impl AffineImage<'_> {
    fn map(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b
    }
}

impl PotentialModel for AffineImage<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn sample_size(&self) -> f64 {
        self.inner.sample_size()
    }
    fn potential(&self, x: &DVector<f64>) -> laplace_diag_core::Result<f64> {
        self.inner.potential(&self.map(x))
    }
    fn gradient(&self, x: &DVector<f64>) -> laplace_diag_core::Result<DVector<f64>> {
        Ok(self.a.transpose() * self.inner.gradient(&self.map(x))?)
    }
    fn hessian(&self, x: &DVector<f64>) -> laplace_diag_core::Result<DMatrix<f64>> {
        Ok(self.a.transpose() * self.inner.hessian(&self.map(x))? * &self.a)
    }
    fn third_directional(
        &self,
        x: &DVector<f64>,
        u: &DVector<f64>,
    ) -> laplace_diag_core::Result<f64> {
        self.inner.third_directional(&self.map(x), &(&self.a * u))
    }
    fn fourth_directional(
        &self,
        x: &DVector<f64>,
        u: &DVector<f64>,
    ) -> laplace_diag_core::Result<f64> {
        self.inner.fourth_directional(&self.map(x), &(&self.a * u))
    }
    fn third_form(&self, x: &DVector<f64>) -> laplace_diag_core::Result<CubicForm> {
        // value'(u) = value(Au): slot transform by Aᵀ
        self.inner.third_form(&self.map(x))?.whiten(&self.a.transpose())
    }
    fn fourth_form(&self, x: &DVector<f64>) -> laplace_diag_core::Result<QuarticForm> {
        self.inner.fourth_form(&self.map(x))?.whiten(&self.a.transpose())
    }
}

/// `(1/12)·∫ |⟨S_W, z⊗3⟩| φ(z) dz` over the box, by composite quadrature;
/// a deterministic route to `L` available in low dimensions.
fn leading_term_by_quadrature(cubic: &CubicForm) -> f64 {
    let rule = gauss_legendre(16);
    match cubic.dim() {
        1 => {
            let mut f = |z: f64| {
                let zv = DVector::from_column_slice(&[z]);
                cubic.value(&zv).abs() * (-0.5 * z * z).exp()
                    / (2.0 * std::f64::consts::PI).sqrt()
            };
            composite_legendre(&mut f, -12.0, 12.0, 4096, &rule) / 12.0
        }
        2 => {
            let m = 192;
            let h = 24.0 / m as f64;
            let half = h / 2.0;
            let mut total = 0.0;
            for pi in 0..m {
                let cx = -12.0 + (pi as f64 + 0.5) * h;
                for pj in 0..m {
                    let cy = -12.0 + (pj as f64 + 0.5) * h;
                    let mut cell = 0.0;
                    for (&xi, &wi) in rule.nodes.iter().zip(&rule.weights) {
                        for (&xj, &wj) in rule.nodes.iter().zip(&rule.weights) {
                            let z = DVector::from_column_slice(&[cx + half * xi, cy + half * xj]);
                            let phi = (-0.5 * z.norm_squared()).exp()
                                / (2.0 * std::f64::consts::PI);
                            cell += wi * wj * cubic.value(&z).abs() * phi;
                        }
                    }
                    total += cell * half * half;
                }
            }
            total / 12.0
        }
        _ => panic!("quadrature route only implemented for d ≤ 2"),
    }
}

#[test]
fn laplace_pipeline_is_affine_invariant() {
    let mut rng = stream_rng(50, 0);
    let s = SymTensor3::random_gaussian(2, &mut rng).unwrap();
    let mut t = SymTensor4::zeros(2).unwrap();
    t.set_orbit(0, 0, 0, 0, 0.9);
    t.set_orbit(1, 1, 1, 1, 1.3);
    t.set_orbit(0, 0, 1, 1, 0.3);
    let h = DMatrix::from_row_slice(2, 2, &[1.6, 0.25, 0.25, 1.1]);
    let base = QuarticModel::new(h, s, t, 0.2, 40.0).unwrap();
    let base_fit = laplace::fit(&base, None).unwrap();

    let a = DMatrix::from_row_slice(2, 2, &[0.8, -0.5, 0.3, 1.4]);
    let b = DVector::from_column_slice(&[0.7, -0.2]);
    let image = AffineImage {
        inner: &base,
        a: a.clone(),
        b: b.clone(),
    };
    // start near the pulled-back mode so the search stays in basin
    let x0 = a.clone().try_inverse().unwrap() * (&base_fit.mode - &b);
    let image_fit = laplace::fit(&image, Some(x0)).unwrap();

    // whitened posteriors are equal up to an orthogonal map, so both the
    // TV oracle and the quadrature value of the leading term agree
    let tv_base = oracle::tv_bruteforce(&base, &base_fit).unwrap();
    let tv_image = oracle::tv_bruteforce(&image, &image_fit).unwrap();
    assert!(
        (tv_base.tv - tv_image.tv).abs() <= 1e-8,
        "tv {} vs {}",
        tv_base.tv,
        tv_image.tv
    );

    let l_base = leading_term_by_quadrature(&diagnostics::whitened_cubic(&base_fit, &base).unwrap());
    let l_image =
        leading_term_by_quadrature(&diagnostics::whitened_cubic(&image_fit, &image).unwrap());
    assert!(
        (l_base - l_image).abs() <= 1e-8 * (1.0 + l_base.abs()),
        "L {l_base} vs {l_image}"
    );
}

#[test]
fn leading_term_chain_against_dense_oracle_in_low_dimension() {
    // L - 3se ≤ c̃₃·d/√(8n), c̃₃ ≤ c₃ (dense-tensor route), L - 3se ≤ c₃·d/√n
    let beta = DVector::from_column_slice(&[1.0, 0.0, 0.0]);
    for seed in [1u64, 2, 3] {
        let data = Dataset::generate(3, 60, &beta, seed).unwrap();
        let model = laplace_diag_core::logistic::LogisticModel::new(data);
        let fit = laplace::fit(&model, None).unwrap();
        let (l, se) = diagnostics::estimate_l(&fit, &model, 100_000, seed).unwrap();
        let tilde = diagnostics::tilde_c3(&fit, &model).unwrap();
        let c3 = diagnostics::estimate_c3(&fit, &model, 48, seed).unwrap().value;
        let d = 3.0;
        let n = fit.n;
        assert!(
            l - 3.0 * se <= tilde * d / (8.0 * n).sqrt(),
            "seed {seed}: L = {l} vs tilde bound"
        );
        assert!(
            tilde <= c3 * (1.0 + 1e-6),
            "seed {seed}: tilde = {tilde} vs c3 = {c3}"
        );
        assert!(
            l - 3.0 * se <= c3 * d / n.sqrt(),
            "seed {seed}: L = {l} vs c3 bound"
        );
    }
}

#[test]
fn monte_carlo_and_quadrature_leading_terms_agree() {
    let mut rng = stream_rng(51, 0);
    let s = SymTensor3::random_gaussian(2, &mut rng).unwrap();
    let model = QuarticModel::new(
        DMatrix::identity(2, 2),
        s,
        SymTensor4::zeros(2).unwrap(),
        0.15,
        30.0,
    )
    .unwrap();
    let fit = laplace::fit(&model, None).unwrap();
    let (l_mc, se) = diagnostics::estimate_l(&fit, &model, 400_000, 9).unwrap();
    let l_quad = leading_term_by_quadrature(&diagnostics::whitened_cubic(&fit, &model).unwrap());
    assert!(
        (l_mc - l_quad).abs() <= 3.0 * se,
        "mc {l_mc} vs quad {l_quad} (se {se})"
    );
}

#[test]
fn population_tv_tracks_leading_term_at_moderate_n() {
    // single-point version of the leading-order validation sweep
    let model = laplace_diag_core::population::PopulationLogistic::new(1, 1000.0).unwrap();
    let fit = laplace::fit(&model, None).unwrap();
    let tv = oracle::tv_bruteforce(&model, &fit).unwrap();
    let l = oracle::population_leading_exact(&model.moments, 1, 1000.0, 128).unwrap();
    let ratio = tv.tv / l;
    assert!(
        (0.9..=1.1).contains(&ratio),
        "tv = {}, L = {l}, ratio = {ratio}",
        tv.tv
    );
}

#[test]
fn whitened_gradient_identity_for_quartic() {
    // ∇r₃(z) = ∇W(z) - z vanishes identically for Gaussian potentials
    let model =
        laplace_diag_core::quartic::gaussian_model(DMatrix::identity(2, 2) * 1.7, 12.0).unwrap();
    let fit = laplace::fit(&model, None).unwrap();
    let mut rng = stream_rng(52, 0);
    for _ in 0..10 {
        let z = DVector::from_fn(2, |_, _| {
            rand::Rng::sample::<f64, _>(&mut rng, rand_distr::StandardNormal)
        });
        let g = fit.whitened_gradient(&model, &z).unwrap();
        assert_relative_eq!((g - &z).norm(), 0.0, epsilon = 1e-10);
    }
}

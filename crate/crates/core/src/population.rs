//! Idealized population logistic posterior: the data-averaged potential
//! `v(b) = -E_X[σ(X₁) log σ(bᵀX) + (1-σ(X₁)) log(1-σ(bᵀX))]` with ground
//! truth direction `β = e₁`.
//!
//! Everything reduces to one- and two-dimensional Gaussian integrals: the
//! potential depends on `b` only through `(b₁, ‖b₂:d‖)`, and for `k ≥ 2` the
//! derivative tensors `∇ᵏv(b) = E[σ^{(k-1)}(bᵀX) X⊗k]` depend on `b` only
//! through `‖b‖` and the direction `b/‖b‖`. At the mode the Hessian is
//! `diag(a₁₂, a₁₀, ..., a₁₀)` and the third-derivative contraction is
//! `a₂₃ u₁³ + 3 a₂₁ u₁ ‖u₂:d‖²`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{check_point, CubicForm, PotentialModel, QuarticForm};
use crate::moments::GaussianMoments;
use crate::quad::gauss_hermite;
use crate::sigmoid::{sigma, sigma_d1, sigma_d2, sigma_d3, softplus};
use crate::tensor::{SymTensor3, SymTensor4};

#[derive(Debug, Clone)]
pub struct PopulationLogistic {
    d: usize,
    n: f64,
    pub moments: GaussianMoments,
    /// Gauss–Hermite nodes scaled for `E[f(Z)]`, shared by all evaluations.
    nodes: Vec<f64>,
    weights: Vec<f64>,
    order: usize,
}

impl PopulationLogistic {
    /// `order` is the Gauss–Hermite order for the reduced integrals.
    pub fn with_order(d: usize, n: f64, order: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::Argument(
                "population model: dimension must be at least 1".into(),
            ));
        }
        if !n.is_finite() || n < 1.0 {
            return Err(Error::Argument("population model: need n ≥ 1".into()));
        }
        let moments = GaussianMoments::compute(order.max(32))?;
        let rule = gauss_hermite(order.max(32));
        let inv_sqrt_pi = 1.0 / std::f64::consts::PI.sqrt();
        let nodes: Vec<f64> = rule
            .nodes
            .iter()
            .map(|&x| std::f64::consts::SQRT_2 * x)
            .collect();
        let weights: Vec<f64> = rule.weights.iter().map(|&w| inv_sqrt_pi * w).collect();
        Ok(Self {
            d,
            n,
            moments,
            nodes,
            weights,
            order: order.max(32),
        })
    }

    pub fn new(d: usize, n: f64) -> Result<Self> {
        Self::with_order(d, n, 128)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// The ground-truth parameter `β = e₁`, which is also the minimizer.
    pub fn beta(&self) -> DVector<f64> {
        DVector::from_fn(self.d, |i, _| if i == 0 { 1.0 } else { 0.0 })
    }

    fn expect_1d(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&z, &w)| w * f(z))
            .sum()
    }

    fn expect_2d(&self, mut f: impl FnMut(f64, f64) -> f64) -> f64 {
        let mut total = 0.0;
        for (&z1, &w1) in self.nodes.iter().zip(&self.weights) {
            let mut inner = 0.0;
            for (&z2, &w2) in self.nodes.iter().zip(&self.weights) {
                inner += w2 * f(z1, z2);
            }
            total += w1 * inner;
        }
        total
    }

    /// Splits `b` into the ground-truth component and the orthogonal radius.
    fn split(&self, b: &DVector<f64>) -> (f64, f64) {
        let b1 = b[0];
        let mut s2 = 0.0;
        for j in 1..self.d {
            s2 += b[j] * b[j];
        }
        (b1, s2.sqrt())
    }

    /// `E[σ''(r·T) Tᵖ]` over `T ~ N(0,1)`.
    fn m2(&self, r: f64, p: i32) -> f64 {
        self.expect_1d(|t| sigma_d2(r * t) * t.powi(p))
    }

    /// `E[σ'''(r·T) Tᵖ]`.
    fn m3(&self, r: f64, p: i32) -> f64 {
        self.expect_1d(|t| sigma_d3(r * t) * t.powi(p))
    }
}

impl PotentialModel for PopulationLogistic {
    fn dim(&self) -> usize {
        self.d
    }

    fn sample_size(&self) -> f64 {
        self.n
    }

    fn potential(&self, x: &DVector<f64>) -> Result<f64> {
        check_point(x, self.d)?;
        let (b1, s) = self.split(x);
        // cross-entropy: σ(z₁)·softplus(-u) + (1-σ(z₁))·softplus(u)
        let v = if s == 0.0 {
            self.expect_1d(|z1| {
                let u = b1 * z1;
                let p = sigma(z1);
                p * softplus(-u) + (1.0 - p) * softplus(u)
            })
        } else {
            self.expect_2d(|z1, z2| {
                let u = b1 * z1 + s * z2;
                let p = sigma(z1);
                p * softplus(-u) + (1.0 - p) * softplus(u)
            })
        };
        Ok(v)
    }

    fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_point(x, self.d)?;
        let (b1, s) = self.split(x);
        let (g1, gs) = if s == 0.0 {
            let g1 = self.expect_1d(|z1| (sigma(b1 * z1) - sigma(z1)) * z1);
            (g1, 0.0)
        } else {
            let g1 = self.expect_2d(|z1, z2| (sigma(b1 * z1 + s * z2) - sigma(z1)) * z1);
            let gs = self.expect_2d(|z1, z2| (sigma(b1 * z1 + s * z2) - sigma(z1)) * z2);
            (g1, gs)
        };
        let mut grad = DVector::zeros(self.d);
        grad[0] = g1;
        if s > 0.0 {
            for j in 1..self.d {
                grad[j] = gs * x[j] / s;
            }
        }
        Ok(grad)
    }

    fn hessian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_point(x, self.d)?;
        let (b1, s) = self.split(x);
        let d = self.d;
        let (m0, m11, m12, m22) = if s == 0.0 {
            let m0 = self.expect_1d(|z1| sigma_d1(b1 * z1));
            let m11 = self.expect_1d(|z1| sigma_d1(b1 * z1) * z1 * z1);
            (m0, m11, 0.0, 0.0)
        } else {
            let m0 = self.expect_2d(|z1, z2| sigma_d1(b1 * z1 + s * z2));
            let m11 = self.expect_2d(|z1, z2| sigma_d1(b1 * z1 + s * z2) * z1 * z1);
            let m12 = self.expect_2d(|z1, z2| sigma_d1(b1 * z1 + s * z2) * z1 * z2);
            let m22 = self.expect_2d(|z1, z2| sigma_d1(b1 * z1 + s * z2) * z2 * z2);
            (m0, m11, m12, m22)
        };
        // frame {e₁, ê = x₂:d/s, complement}
        let mut hess = DMatrix::identity(d, d) * m0;
        hess[(0, 0)] = m11;
        if s > 0.0 {
            for j in 1..d {
                let ej = x[j] / s;
                hess[(0, j)] = m12 * ej;
                hess[(j, 0)] = m12 * ej;
                for k in 1..d {
                    let ek = x[k] / s;
                    hess[(j, k)] += (m22 - m0) * ej * ek;
                }
            }
        }
        Ok(hess)
    }

    fn third_directional(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<f64> {
        check_point(x, self.d)?;
        check_point(u, self.d)?;
        let r = x.norm();
        if r == 0.0 {
            // σ''(0) = 0 so the whole tensor vanishes at the origin.
            return Ok(0.0);
        }
        let c = x.dot(u) / r;
        let w2 = (u.norm_squared() - c * c).max(0.0);
        Ok(c * c * c * self.m2(r, 3) + 3.0 * c * w2 * self.m2(r, 1))
    }

    fn fourth_directional(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<f64> {
        check_point(x, self.d)?;
        check_point(u, self.d)?;
        let r = x.norm();
        let (c, w2) = if r == 0.0 {
            (0.0, u.norm_squared())
        } else {
            let c = x.dot(u) / r;
            (c, (u.norm_squared() - c * c).max(0.0))
        };
        let q4 = self.m3(r, 4);
        let q2 = self.m3(r, 2);
        let q0 = self.m3(r, 0);
        Ok(c.powi(4) * q4 + 6.0 * c * c * w2 * q2 + 3.0 * w2 * w2 * q0)
    }

    fn third_form(&self, x: &DVector<f64>) -> Result<CubicForm> {
        check_point(x, self.d)?;
        let r = x.norm();
        let mut t = SymTensor3::zeros(self.d)?;
        if r == 0.0 {
            return Ok(CubicForm::Dense(t));
        }
        let e = x / r;
        let m3 = self.m2(r, 3);
        let m1 = self.m2(r, 1);
        let a = m3 - 3.0 * m1;
        let d = self.d;
        for i in 0..d {
            for j in i..d {
                for k in j..d {
                    let mut v = a * e[i] * e[j] * e[k];
                    if j == k {
                        v += m1 * e[i];
                    }
                    if i == k {
                        v += m1 * e[j];
                    }
                    if i == j {
                        v += m1 * e[k];
                    }
                    t.set_orbit(i, j, k, v);
                }
            }
        }
        Ok(CubicForm::Dense(t))
    }

    fn fourth_form(&self, x: &DVector<f64>) -> Result<QuarticForm> {
        check_point(x, self.d)?;
        let d = self.d;
        let r = x.norm();
        let e = if r == 0.0 {
            DVector::from_fn(d, |i, _| if i == 0 { 1.0 } else { 0.0 })
        } else {
            x / r
        };
        let q4 = self.m3(r, 4);
        let q2 = self.m3(r, 2);
        let q0 = self.m3(r, 0);
        let ca = q4 - 6.0 * q2 + 3.0 * q0;
        let cb = q2 - q0;
        let mut t = SymTensor4::zeros(d)?;
        for i in 0..d {
            for j in i..d {
                for k in j..d {
                    for l in k..d {
                        let mut v = ca * e[i] * e[j] * e[k] * e[l];
                        // Σ over the six pair placements of e·e·δ
                        let pairs = [
                            (i, j, k, l),
                            (i, k, j, l),
                            (i, l, j, k),
                            (j, k, i, l),
                            (j, l, i, k),
                            (k, l, i, j),
                        ];
                        for (a1, a2, b1, b2) in pairs {
                            if b1 == b2 {
                                v += cb * e[a1] * e[a2];
                            }
                        }
                        // isotropic part q₀(δδ + δδ + δδ)
                        v += q0
                            * (f64::from(u8::from(i == j && k == l))
                                + f64::from(u8::from(i == k && j == l))
                                + f64::from(u8::from(i == l && j == k)));
                        t.set_orbit(i, j, k, l, v);
                    }
                }
            }
        }
        Ok(QuarticForm::Dense(t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::stream_rng;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn gradient_vanishes_at_beta() {
        for d in [1usize, 2, 4] {
            let model = PopulationLogistic::new(d, 100.0).unwrap();
            let g = model.gradient(&model.beta()).unwrap();
            assert!(g.norm() < 1e-13, "d={d}: |∇v(β)| = {}", g.norm());
        }
    }

    #[test]
    fn hessian_at_beta_is_the_moment_diagonal() {
        let model = PopulationLogistic::new(4, 50.0).unwrap();
        let h = model.hessian(&model.beta()).unwrap();
        let m = &model.moments;
        for i in 0..4 {
            for j in 0..4 {
                let want = if i != j {
                    0.0
                } else if i == 0 {
                    m.get(1, 2)
                } else {
                    m.get(1, 0)
                };
                assert_relative_eq!(h[(i, j)], want, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn third_contraction_closed_form_at_beta() {
        let model = PopulationLogistic::new(3, 50.0).unwrap();
        let m = &model.moments;
        let mut rng = stream_rng(9, 0);
        for _ in 0..5 {
            let u = DVector::from_fn(3, |_, _| rng.sample::<f64, _>(StandardNormal));
            let got = model.third_directional(&model.beta(), &u).unwrap();
            let want = m.get(2, 3) * u[0].powi(3)
                + 3.0 * m.get(2, 1) * u[0] * (u[1] * u[1] + u[2] * u[2]);
            assert_relative_eq!(got, want, epsilon = 1e-10, max_relative = 1e-9);
        }
    }

    #[test]
    fn third_contraction_vanishes_orthogonal_to_beta() {
        let model = PopulationLogistic::new(3, 50.0).unwrap();
        let e2 = DVector::from_column_slice(&[0.0, 1.0, 0.0]);
        let got = model.third_directional(&model.beta(), &e2).unwrap();
        assert!(got.abs() < 1e-12, "{got}");
    }

    #[test]
    fn rotational_symmetry_in_trailing_coordinates() {
        let model = PopulationLogistic::new(4, 25.0).unwrap();
        let b = DVector::from_column_slice(&[0.8, 0.3, -0.4, 0.1]);
        let b_perm = DVector::from_column_slice(&[0.8, -0.4, 0.1, 0.3]);
        let u = DVector::from_column_slice(&[1.0, 0.0, 0.0, 0.0]);
        assert_relative_eq!(
            model.potential(&b).unwrap(),
            model.potential(&b_perm).unwrap(),
            max_relative = 1e-13
        );
        assert_relative_eq!(
            model.third_directional(&b, &u).unwrap(),
            model.third_directional(&b_perm, &u).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn gradient_and_hessian_match_finite_differences() {
        let model = PopulationLogistic::new(3, 10.0).unwrap();
        let x = DVector::from_column_slice(&[0.7, -0.3, 0.5]);
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
                assert_relative_eq!(hess[(i, j)], fd_grad[i], epsilon = 1e-7, max_relative = 1e-4);
            }
        }
    }

    #[test]
    fn third_directional_matches_finite_differences() {
        let model = PopulationLogistic::new(2, 10.0).unwrap();
        let x = DVector::from_column_slice(&[0.9, 0.4]);
        let u = DVector::from_column_slice(&[0.6, -1.1]);
        let exact = model.third_directional(&x, &u).unwrap();
        let h = 5e-3;
        let f = |t: f64| model.potential(&(&x + t * &u)).unwrap();
        let fd = (f(2.0 * h) - 2.0 * f(h) + 2.0 * f(-h) - f(-2.0 * h)) / (2.0 * h * h * h);
        assert_relative_eq!(exact, fd, epsilon = 1e-6, max_relative = 1e-3);
    }

    #[test]
    fn forms_agree_with_directional_values() {
        let model = PopulationLogistic::new(3, 10.0).unwrap();
        let mut rng = stream_rng(10, 0);
        let x = DVector::from_column_slice(&[0.9, -0.2, 0.3]);
        for _ in 0..4 {
            let u = DVector::from_fn(3, |_, _| rng.sample::<f64, _>(StandardNormal));
            let c3 = model.third_form(&x).unwrap();
            assert_relative_eq!(
                c3.value(&u),
                model.third_directional(&x, &u).unwrap(),
                epsilon = 1e-12,
                max_relative = 1e-10
            );
            let c4 = model.fourth_form(&x).unwrap();
            assert_relative_eq!(
                c4.value(&u),
                model.fourth_directional(&x, &u).unwrap(),
                epsilon = 1e-12,
                max_relative = 1e-10
            );
        }
    }

    #[test]
    fn rejects_dimension_zero() {
        assert!(PopulationLogistic::new(0, 10.0).is_err());
    }
}

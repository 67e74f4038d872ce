//! Gaussian moments of sigmoid derivatives: `a[k][p] = E[σ^{(k)}(Z) Zᵖ]`.
//!
//! These constants drive the idealized population posterior: its Hessian at
//! the mode is `n·diag(a[1][2], a[1][0], ..., a[1][0])` and its third
//! derivative contracts to `n(a[2][3] b₁³ + 3 a[2][1] b₁ ‖b₂:d‖²)`.

use crate::error::{Error, Result};
use crate::quad::normal_expectation;
use crate::sigmoid::sigma_deriv;

#[derive(Debug, Clone)]
pub struct GaussianMoments {
    /// `a[k][p]` for derivative order `k ∈ {1, 2, 3}` (index 0 unused) and
    /// power `p ∈ {0, ..., 4}`.
    pub a: [[f64; 5]; 4],
    pub quadrature_order: usize,
}

impl GaussianMoments {
    /// Gauss–Hermite evaluation of every `a[k][p]`; `order ≥ 32`.
    pub fn compute(quadrature_order: usize) -> Result<Self> {
        if quadrature_order < 32 {
            return Err(Error::Argument(format!(
                "moment quadrature order must be at least 32, got {quadrature_order}"
            )));
        }
        let mut a = [[0.0; 5]; 4];
        for (k, row) in a.iter_mut().enumerate().skip(1) {
            for (p, slot) in row.iter_mut().enumerate() {
                *slot =
                    normal_expectation(quadrature_order, |z| sigma_deriv(k, z) * z.powi(p as i32));
            }
        }
        Ok(Self {
            a,
            quadrature_order,
        })
    }

    pub fn get(&self, k: usize, p: usize) -> f64 {
        self.a[k][p]
    }

    /// Symmetry zeros hold exactly: `σ'` is even and `σ''` odd, so
    /// `a[1][odd] = a[3][odd] = 0` and `a[2][even] = 0`.
    pub fn check_symmetry(&self) -> Result<()> {
        for (k, p) in [(1usize, 1usize), (1, 3), (3, 1), (3, 3), (2, 0), (2, 2), (2, 4)] {
            if self.a[k][p].abs() > 1e-12 {
                return Err(Error::Numerical(format!(
                    "moment a[{k}][{p}] = {} should vanish by parity",
                    self.a[k][p]
                )));
            }
        }
        if self.a[1][0] <= 0.0 || self.a[1][2] <= 0.0 {
            return Err(Error::Numerical(
                "positive sigmoid-derivative moments came out non-positive".into(),
            ));
        }
        Ok(())
    }
}

impl Default for GaussianMoments {
    fn default() -> Self {
        Self::compute(128).expect("order 128 is valid")
    }
}

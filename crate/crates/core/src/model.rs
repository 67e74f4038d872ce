//! The potential-function capability interface shared by all models.
//!
//! A model exposes the `1/n`-normalized potential `v`, its first two
//! derivatives, and directional contractions of the third and fourth
//! derivative tensors. Dense `d³` tensors are never required: models hand out
//! a [`CubicForm`]/[`QuarticForm`], which is either a dense tensor (small
//! dimensions) or a sum of rank-one terms (the natural structure for
//! sample-average potentials), and all downstream estimators work through
//! that representation.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::opnorm::{self, OpNormEstimate, SphereForm};
use crate::tensor::{SymTensor3, SymTensor4};

pub trait PotentialModel: Sync {
    fn dim(&self) -> usize;

    /// The scale `n` in `V = n·v`.
    fn sample_size(&self) -> f64;

    /// `v(x)`.
    fn potential(&self, x: &DVector<f64>) -> Result<f64>;

    /// `∇v(x)`.
    fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>>;

    /// `∇²v(x)` (symmetric).
    fn hessian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>>;

    /// `⟨∇³v(x), u⊗3⟩`.
    fn third_directional(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<f64>;

    /// `⟨∇⁴v(x), u⊗4⟩`.
    fn fourth_directional(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<f64>;

    /// Representation of `∇³v(x)`.
    fn third_form(&self, x: &DVector<f64>) -> Result<CubicForm>;

    /// Representation of `∇⁴v(x)`.
    fn fourth_form(&self, x: &DVector<f64>) -> Result<QuarticForm>;
}

pub(crate) fn check_point(x: &DVector<f64>, dim: usize) -> Result<()> {
    if x.len() != dim {
        return Err(Error::Argument(format!(
            "point has dimension {}, model has dimension {}",
            x.len(),
            dim
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Argument("point has non-finite coordinates".into()));
    }
    Ok(())
}

const ROW_TILE: usize = 4096;

/// A symmetric cubic form `u ↦ ⟨S, u⊗3⟩`.
#[derive(Debug, Clone)]
pub enum CubicForm {
    Dense(SymTensor3),
    /// `S = Σ_ℓ cℓ vℓ⊗3`, rows of `vectors` being the `vℓ`.
    RankOneSum {
        coeffs: Vec<f64>,
        vectors: DMatrix<f64>,
    },
}

impl CubicForm {
    pub fn dim(&self) -> usize {
        match self {
            CubicForm::Dense(t) => t.dim(),
            CubicForm::RankOneSum { vectors, .. } => vectors.ncols(),
        }
    }

    pub fn value(&self, u: &DVector<f64>) -> f64 {
        match self {
            CubicForm::Dense(t) => t.contract3(u).expect("dimension checked"),
            CubicForm::RankOneSum { coeffs, vectors } => {
                let w = vectors * u;
                coeffs
                    .iter()
                    .zip(w.iter())
                    .map(|(&c, &wi)| c * wi * wi * wi)
                    .sum()
            }
        }
    }

    /// Values of the form on every column of `z` (`d × m`).
    ///
    /// The rank-one path runs tiled matrix products over fixed row blocks in
    /// index order, so the result does not depend on the caller's threading.
    pub fn batch_values(&self, z: &DMatrix<f64>) -> Vec<f64> {
        match self {
            CubicForm::Dense(_) => (0..z.ncols())
                .map(|s| self.value(&z.column(s).into_owned()))
                .collect(),
            CubicForm::RankOneSum { coeffs, vectors } => {
                let m = z.ncols();
                let n = vectors.nrows();
                let mut acc = vec![0.0; m];
                let mut start = 0;
                while start < n {
                    let len = ROW_TILE.min(n - start);
                    let prod = vectors.rows(start, len) * z;
                    for (s, slot) in acc.iter_mut().enumerate() {
                        let col = prod.column(s);
                        let mut sum = 0.0;
                        for (r, &w) in col.iter().enumerate() {
                            sum += coeffs[start + r] * w * w * w;
                        }
                        *slot += sum;
                    }
                    start += len;
                }
                acc
            }
        }
    }

    /// `⟨S, I⟩`: for the rank-one form this is `Σ_ℓ cℓ ‖vℓ‖² vℓ`.
    pub fn identity_contract(&self) -> DVector<f64> {
        match self {
            CubicForm::Dense(t) => t.identity_contract(),
            CubicForm::RankOneSum { coeffs, vectors } => {
                let n = vectors.nrows();
                let mut weights = DVector::zeros(n);
                for l in 0..n {
                    let row = vectors.row(l);
                    weights[l] = coeffs[l] * row.norm_squared();
                }
                vectors.transpose() * weights
            }
        }
    }

    /// Squared Frobenius norm. The rank-one path evaluates the pairwise
    /// Gram form `Σ_{ℓm} cℓ cm (vℓᵀvm)³` with tiled matrix products.
    pub fn frobenius_sq(&self) -> f64 {
        match self {
            CubicForm::Dense(t) => {
                let f = t.frobenius();
                f * f
            }
            CubicForm::RankOneSum { coeffs, vectors } => {
                pairwise_sums(coeffs, vectors).0
            }
        }
    }

    /// Applies `x ↦ Mᵀx` to every slot: the result represents the tensor
    /// with `⟨S', z⊗3⟩ = ⟨S, (Mᵀz)⊗3⟩`. With `M = L⁻¹` for `H = LLᵀ` this is
    /// the whitening transform.
    pub fn whiten(&self, m_inv: &DMatrix<f64>) -> Result<CubicForm> {
        match self {
            CubicForm::Dense(t) => Ok(CubicForm::Dense(t.mode_transform(m_inv)?)),
            CubicForm::RankOneSum { coeffs, vectors } => Ok(CubicForm::RankOneSum {
                coeffs: coeffs.clone(),
                vectors: vectors * m_inv.transpose(),
            }),
        }
    }

    pub fn scale(mut self, c: f64) -> CubicForm {
        match &mut self {
            CubicForm::Dense(t) => t.scale_mut(c),
            CubicForm::RankOneSum { coeffs, .. } => {
                for a in coeffs.iter_mut() {
                    *a *= c;
                }
            }
        }
        self
    }

    /// Dense materialization (subject to the dense dimension cap).
    pub fn to_dense(&self) -> Result<SymTensor3> {
        match self {
            CubicForm::Dense(t) => Ok(t.clone()),
            CubicForm::RankOneSum { coeffs, vectors } => {
                SymTensor3::from_rank_one_sum(coeffs, vectors)
            }
        }
    }

    pub fn opnorm(&self, restarts: usize, seed: u64) -> OpNormEstimate {
        opnorm::multistart_opnorm(self, restarts, seed)
    }
}

/// `(Σ_{ℓm} cℓcm (vℓᵀvm)³, Σ_{ℓm} cℓcm qℓ qm (vℓᵀvm))` with `qℓ = ‖vℓ‖²`,
/// i.e. the two pairwise sums needed for the closed-form coefficient.
/// Tiles the Gram matrix over fixed blocks; cost `O(n²d)`.
pub(crate) fn pairwise_sums(coeffs: &[f64], vectors: &DMatrix<f64>) -> (f64, f64) {
    use rayon::prelude::*;
    const TILE: usize = 512;
    let n = vectors.nrows();
    let q: Vec<f64> = (0..n).map(|l| vectors.row(l).norm_squared()).collect();
    let n_tiles = n.div_ceil(TILE);
    // Upper-triangular tile pairs, processed in a fixed order.
    let mut pairs = Vec::new();
    for ti in 0..n_tiles {
        for tj in ti..n_tiles {
            pairs.push((ti, tj));
        }
    }
    let partials: Vec<(f64, f64)> = pairs
        .par_iter()
        .map(|&(ti, tj)| {
            let i0 = ti * TILE;
            let j0 = tj * TILE;
            let ni = TILE.min(n - i0);
            let nj = TILE.min(n - j0);
            let gram = vectors.rows(i0, ni) * vectors.rows(j0, nj).transpose();
            let mut cube_sum = 0.0;
            let mut norm_sum = 0.0;
            for a in 0..ni {
                let ca = coeffs[i0 + a];
                let qa = q[i0 + a];
                let jstart = if ti == tj { a } else { 0 };
                for b in jstart..nj {
                    let g = gram[(a, b)];
                    let w = ca * coeffs[j0 + b];
                    let mult = if ti == tj && a == b { 1.0 } else { 2.0 };
                    cube_sum += mult * w * g * g * g;
                    norm_sum += mult * w * qa * q[j0 + b] * g;
                }
            }
            (cube_sum, norm_sum)
        })
        .collect();
    let mut cube = 0.0;
    let mut norm = 0.0;
    for (c, s) in partials {
        cube += c;
        norm += s;
    }
    (cube, norm)
}

impl SphereForm for CubicForm {
    fn dim(&self) -> usize {
        self.dim()
    }
    fn eval(&self, u: &DVector<f64>) -> f64 {
        self.value(u)
    }
    fn eval_grad(&self, u: &DVector<f64>) -> (f64, DVector<f64>) {
        match self {
            CubicForm::Dense(t) => {
                let w = t.contract_two(u).expect("dimension checked");
                (w.dot(u), 3.0 * w)
            }
            CubicForm::RankOneSum { coeffs, vectors } => {
                let w = vectors * u;
                let mut value = 0.0;
                let mut scaled = DVector::zeros(w.len());
                for (l, &wl) in w.iter().enumerate() {
                    value += coeffs[l] * wl * wl * wl;
                    scaled[l] = 3.0 * coeffs[l] * wl * wl;
                }
                (value, vectors.transpose() * scaled)
            }
        }
    }
    fn odd(&self) -> bool {
        true
    }
}

/// A symmetric quartic form `u ↦ ⟨T, u⊗4⟩`.
#[derive(Debug, Clone)]
pub enum QuarticForm {
    Dense(SymTensor4),
    RankOneSum {
        coeffs: Vec<f64>,
        vectors: DMatrix<f64>,
    },
}

impl QuarticForm {
    pub fn dim(&self) -> usize {
        match self {
            QuarticForm::Dense(t) => t.dim(),
            QuarticForm::RankOneSum { vectors, .. } => vectors.ncols(),
        }
    }

    pub fn value(&self, u: &DVector<f64>) -> f64 {
        match self {
            QuarticForm::Dense(t) => t.contract4(u).expect("dimension checked"),
            QuarticForm::RankOneSum { coeffs, vectors } => {
                let w = vectors * u;
                coeffs
                    .iter()
                    .zip(w.iter())
                    .map(|(&c, &wi)| c * wi * wi * wi * wi)
                    .sum()
            }
        }
    }

    pub fn whiten(&self, m_inv: &DMatrix<f64>) -> Result<QuarticForm> {
        match self {
            QuarticForm::Dense(t) => Ok(QuarticForm::Dense(t.mode_transform(m_inv)?)),
            QuarticForm::RankOneSum { coeffs, vectors } => Ok(QuarticForm::RankOneSum {
                coeffs: coeffs.clone(),
                vectors: vectors * m_inv.transpose(),
            }),
        }
    }

    pub fn scale(mut self, c: f64) -> QuarticForm {
        match &mut self {
            QuarticForm::Dense(t) => t.scale_mut(c),
            QuarticForm::RankOneSum { coeffs, .. } => {
                for a in coeffs.iter_mut() {
                    *a *= c;
                }
            }
        }
        self
    }

    pub fn to_dense(&self) -> Result<SymTensor4> {
        match self {
            QuarticForm::Dense(t) => Ok(t.clone()),
            QuarticForm::RankOneSum { coeffs, vectors } => {
                SymTensor4::from_rank_one_sum(coeffs, vectors)
            }
        }
    }

    pub fn opnorm(&self, restarts: usize, seed: u64) -> OpNormEstimate {
        opnorm::multistart_opnorm(self, restarts, seed)
    }
}

impl SphereForm for QuarticForm {
    fn dim(&self) -> usize {
        self.dim()
    }
    fn eval(&self, u: &DVector<f64>) -> f64 {
        self.value(u)
    }
    fn eval_grad(&self, u: &DVector<f64>) -> (f64, DVector<f64>) {
        match self {
            QuarticForm::Dense(t) => {
                let w = t.contract_three(u).expect("dimension checked");
                (w.dot(u), 4.0 * w)
            }
            QuarticForm::RankOneSum { coeffs, vectors } => {
                let w = vectors * u;
                let mut value = 0.0;
                let mut scaled = DVector::zeros(w.len());
                for (l, &wl) in w.iter().enumerate() {
                    let w2 = wl * wl;
                    value += coeffs[l] * w2 * w2;
                    scaled[l] = 4.0 * coeffs[l] * wl * w2;
                }
                (value, vectors.transpose() * scaled)
            }
        }
    }
    fn odd(&self) -> bool {
        false
    }
}

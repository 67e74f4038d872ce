//! Dense symmetric order-3 and order-4 tensors with the contractions and
//! norms used by the diagnostics.
//!
//! Full dense storage is the reference semantics; every operation is defined
//! on the full symmetric array, with orbit multiplicities counted (so e.g.
//! the Frobenius norm of the symmetrized tensor with a single off-diagonal
//! generator `S₁₂₃ = 1` in d = 3 is `√6`).

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::opnorm::{self, OpNormEstimate, SphereForm};

/// Dense tensors above these dimensions are refused; the contraction-based
/// code paths must be used instead.
pub const MAX_DENSE3_DIM: usize = 128;
pub const MAX_DENSE4_DIM: usize = 32;

const SYMMETRY_RTOL: f64 = 1e-12;

fn check_dim(d: usize, max: usize, what: &str) -> Result<()> {
    if d == 0 {
        return Err(Error::Argument(format!("{what}: dimension must be positive")));
    }
    if d > max {
        return Err(Error::UnsupportedDimension {
            dim: d,
            msg: format!("{what}: dense storage capped at dimension {max}"),
        });
    }
    Ok(())
}

/// Lower-triangular inverse `L⁻¹` for a PD matrix `H = LLᵀ`.
pub(crate) fn cholesky_inverse_factor(h: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = h.nrows();
    let chol = nalgebra::linalg::Cholesky::new(h.clone())
        .ok_or_else(|| Error::Domain("matrix is not positive definite".into()))?;
    let l = chol.l();
    let inv = l
        .solve_lower_triangular(&DMatrix::identity(d, d))
        .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
    Ok(inv)
}

// ---------------------------------------------------------------------------
// Order 3
// ---------------------------------------------------------------------------

/// Dense symmetric order-3 tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTensor3 {
    dim: usize,
    data: Vec<f64>, // data[(i*d + j)*d + k]
}

impl SymTensor3 {
    pub fn zeros(dim: usize) -> Result<Self> {
        check_dim(dim, MAX_DENSE3_DIM, "SymTensor3")?;
        Ok(Self {
            dim,
            data: vec![0.0; dim * dim * dim],
        })
    }

    /// Builds from a full `d³` array in row-major order, verifying finiteness
    /// and permutation symmetry to `1e-12` relative, then storing the
    /// symmetrized entries.
    pub fn from_entries(dim: usize, entries: Vec<f64>) -> Result<Self> {
        check_dim(dim, MAX_DENSE3_DIM, "SymTensor3")?;
        if entries.len() != dim * dim * dim {
            return Err(Error::Argument(format!(
                "SymTensor3: expected {} entries, got {}",
                dim * dim * dim,
                entries.len()
            )));
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::Argument("SymTensor3: non-finite entry".into()));
        }
        let mut t = Self { dim, data: entries };
        t.symmetrize_checked()?;
        Ok(t)
    }

    fn symmetrize_checked(&mut self) -> Result<()> {
        let d = self.dim;
        let scale = self.data.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
        let tol = SYMMETRY_RTOL * scale.max(1e-300);
        for i in 0..d {
            for j in i..d {
                for k in j..d {
                    let orbit = [
                        (i, j, k),
                        (i, k, j),
                        (j, i, k),
                        (j, k, i),
                        (k, i, j),
                        (k, j, i),
                    ];
                    let vals: Vec<f64> = orbit.iter().map(|&(a, b, c)| self.at(a, b, c)).collect();
                    let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
                    let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    if hi - lo > tol {
                        return Err(Error::Argument(format!(
                            "SymTensor3: entries not permutation symmetric at ({i},{j},{k})"
                        )));
                    }
                    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                    for &(a, b, c) in &orbit {
                        *self.at_mut(a, b, c) = mean;
                    }
                }
            }
        }
        Ok(())
    }

    /// Sets every permutation of `(i, j, k)` to `v`.
    pub fn set_orbit(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let d = self.dim;
        assert!(i < d && j < d && k < d);
        for (a, b, c) in [
            (i, j, k),
            (i, k, j),
            (j, i, k),
            (j, k, i),
            (k, i, j),
            (k, j, i),
        ] {
            *self.at_mut(a, b, c) = v;
        }
    }

    /// Symmetrization of an i.i.d. standard normal array; the standard random
    /// test tensor throughout the crate.
    pub fn random_gaussian(dim: usize, rng: &mut impl Rng) -> Result<Self> {
        check_dim(dim, MAX_DENSE3_DIM, "SymTensor3")?;
        let raw: Vec<f64> = (0..dim * dim * dim)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let mut t = Self { dim, data: raw };
        let d = dim;
        for i in 0..d {
            for j in i..d {
                for k in j..d {
                    let orbit = [
                        (i, j, k),
                        (i, k, j),
                        (j, i, k),
                        (j, k, i),
                        (k, i, j),
                        (k, j, i),
                    ];
                    let mean =
                        orbit.iter().map(|&(a, b, c)| t.at(a, b, c)).sum::<f64>() / 6.0;
                    for &(a, b, c) in &orbit {
                        *t.at_mut(a, b, c) = mean;
                    }
                }
            }
        }
        Ok(t)
    }

    /// `Σ_ℓ cℓ · vℓ⊗3` for rows `vℓ` of `vectors`.
    pub fn from_rank_one_sum(coeffs: &[f64], vectors: &DMatrix<f64>) -> Result<Self> {
        if coeffs.len() != vectors.nrows() {
            return Err(Error::Argument(
                "rank-one sum: coefficient/vector count mismatch".into(),
            ));
        }
        let mut t = Self::zeros(vectors.ncols())?;
        for (l, &c) in coeffs.iter().enumerate() {
            t.add_rank_one(c, &vectors.row(l).transpose());
        }
        Ok(t)
    }

    /// Adds `c · v⊗3` in place.
    pub fn add_rank_one(&mut self, c: f64, v: &DVector<f64>) {
        let d = self.dim;
        assert_eq!(v.len(), d);
        for i in 0..d {
            let ci = c * v[i];
            for j in 0..d {
                let cij = ci * v[j];
                let base = (i * d + j) * d;
                for k in 0..d {
                    self.data[base + k] += cij * v[k];
                }
            }
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.dim + j) * self.dim + k]
    }

    #[inline]
    fn at_mut(&mut self, i: usize, j: usize, k: usize) -> &mut f64 {
        &mut self.data[(i * self.dim + j) * self.dim + k]
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        assert!(i < self.dim && j < self.dim && k < self.dim);
        self.at(i, j, k)
    }

    pub fn scale_mut(&mut self, c: f64) {
        for x in &mut self.data {
            *x *= c;
        }
    }

    fn check_vec(&self, u: &DVector<f64>, what: &str) -> Result<()> {
        if u.len() != self.dim {
            return Err(Error::Argument(format!(
                "{what}: vector length {} does not match tensor dimension {}",
                u.len(),
                self.dim
            )));
        }
        Ok(())
    }

    /// `⟨S, u⊗3⟩ = Σᵢⱼₖ Sᵢⱼₖ uᵢuⱼuₖ`.
    pub fn contract3(&self, u: &DVector<f64>) -> Result<f64> {
        self.check_vec(u, "contract3")?;
        let w = self.contract_two_unchecked(u);
        Ok(w.dot(u))
    }

    /// `S[u, u, ·]`: the vector with entries `Σⱼₖ Sᵢⱼₖ uⱼuₖ`.
    pub fn contract_two(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_vec(u, "contract_two")?;
        Ok(self.contract_two_unchecked(u))
    }

    fn contract_two_unchecked(&self, u: &DVector<f64>) -> DVector<f64> {
        let d = self.dim;
        let mut out = DVector::zeros(d);
        for i in 0..d {
            let mut acc = 0.0;
            for j in 0..d {
                let uj = u[j];
                if uj == 0.0 {
                    continue;
                }
                let base = (i * d + j) * d;
                let mut row = 0.0;
                for k in 0..d {
                    row += self.data[base + k] * u[k];
                }
                acc += uj * row;
            }
            out[i] = acc;
        }
        out
    }

    /// `S[·, ·, x]`: the matrix with entries `Σₖ Sᵢⱼₖ xₖ`.
    pub fn contract_one(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_vec(x, "contract_one")?;
        let d = self.dim;
        let mut out = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                let base = (i * d + j) * d;
                let mut acc = 0.0;
                for k in 0..d {
                    acc += self.data[base + k] * x[k];
                }
                out[(i, j)] = acc;
            }
        }
        Ok(out)
    }

    /// `⟨S, A⟩`: the vector with entries `Σⱼₖ Sᵢⱼₖ Aⱼₖ` for symmetric `A`.
    pub fn contract_matrix(&self, a: &DMatrix<f64>) -> Result<DVector<f64>> {
        let d = self.dim;
        if a.nrows() != d || a.ncols() != d {
            return Err(Error::Argument(format!(
                "contract_matrix: matrix is {}x{}, tensor dimension {d}",
                a.nrows(),
                a.ncols()
            )));
        }
        let scale = a.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
        for i in 0..d {
            for j in (i + 1)..d {
                if (a[(i, j)] - a[(j, i)]).abs() > 1e-10 * scale.max(1e-300) {
                    return Err(Error::Argument(
                        "contract_matrix: matrix is not symmetric".into(),
                    ));
                }
            }
        }
        let mut out = DVector::zeros(d);
        for i in 0..d {
            let mut acc = 0.0;
            for j in 0..d {
                let base = (i * d + j) * d;
                for k in 0..d {
                    acc += self.data[base + k] * a[(j, k)];
                }
            }
            out[i] = acc;
        }
        Ok(out)
    }

    /// `⟨S, I⟩`: the vector with entries `Σⱼ Sᵢⱼⱼ`.
    pub fn identity_contract(&self) -> DVector<f64> {
        let d = self.dim;
        DVector::from_fn(d, |i, _| (0..d).map(|j| self.at(i, j, j)).sum())
    }

    /// Frobenius norm over the full symmetric array.
    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// `S'ᵢⱼₖ = Σ_{abc} S_{abc} Mᵢₐ Mⱼᵦ Mₖ𝒸` (same transform applied to every
    /// slot, so symmetry is preserved).
    pub fn mode_transform(&self, m: &DMatrix<f64>) -> Result<Self> {
        let d = self.dim;
        if m.nrows() != d || m.ncols() != d {
            return Err(Error::Argument("mode_transform: shape mismatch".into()));
        }
        // Three successive single-mode products; by symmetry it is enough to
        // cycle the same contraction three times.
        let mut cur = self.data.clone();
        for _ in 0..3 {
            // contract the last index, then rotate indices: (i,j,k) -> (k,i,j)
            let mut next = vec![0.0; d * d * d];
            for i in 0..d {
                for j in 0..d {
                    let base = (i * d + j) * d;
                    for t in 0..d {
                        let mut acc = 0.0;
                        for k in 0..d {
                            acc += cur[base + k] * m[(t, k)];
                        }
                        next[(t * d + i) * d + j] = acc;
                    }
                }
            }
            cur = next;
        }
        Ok(Self { dim: d, data: cur })
    }

    /// Multistart estimate of `max_{‖u‖=1} |⟨S, u⊗3⟩|` (a lower bound on the
    /// operator norm).
    pub fn opnorm(&self, restarts: usize, seed: u64) -> OpNormEstimate {
        opnorm::multistart_opnorm(&DenseCubic(self), restarts, seed)
    }

    /// Multistart estimate of the `H`-weighted operator norm for PD `H`,
    /// computed by whitening with the Cholesky factor of `H`.
    pub fn weighted_opnorm(
        &self,
        h: &DMatrix<f64>,
        restarts: usize,
        seed: u64,
    ) -> Result<OpNormEstimate> {
        let m = cholesky_inverse_factor(h)?;
        let whitened = self.mode_transform(&m)?;
        Ok(whitened.opnorm(restarts, seed))
    }
}

pub(crate) struct DenseCubic<'a>(pub &'a SymTensor3);

impl SphereForm for DenseCubic<'_> {
    fn dim(&self) -> usize {
        self.0.dim
    }
    fn eval(&self, u: &DVector<f64>) -> f64 {
        self.0.contract_two_unchecked(u).dot(u)
    }
    fn eval_grad(&self, u: &DVector<f64>) -> (f64, DVector<f64>) {
        let w = self.0.contract_two_unchecked(u);
        (w.dot(u), 3.0 * w)
    }
    fn odd(&self) -> bool {
        true
    }
}

// ---------------------------------------------------------------------------
// Order 4
// ---------------------------------------------------------------------------

/// Dense symmetric order-4 tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTensor4 {
    dim: usize,
    data: Vec<f64>, // data[((i*d + j)*d + k)*d + l]
}

impl SymTensor4 {
    pub fn zeros(dim: usize) -> Result<Self> {
        check_dim(dim, MAX_DENSE4_DIM, "SymTensor4")?;
        Ok(Self {
            dim,
            data: vec![0.0; dim * dim * dim * dim],
        })
    }

    pub fn from_entries(dim: usize, entries: Vec<f64>) -> Result<Self> {
        check_dim(dim, MAX_DENSE4_DIM, "SymTensor4")?;
        if entries.len() != dim.pow(4) {
            return Err(Error::Argument(format!(
                "SymTensor4: expected {} entries, got {}",
                dim.pow(4),
                entries.len()
            )));
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::Argument("SymTensor4: non-finite entry".into()));
        }
        let mut t = Self { dim, data: entries };
        t.symmetrize_checked()?;
        Ok(t)
    }

    fn orbit(mut idx: [usize; 4]) -> Vec<[usize; 4]> {
        idx.sort_unstable();
        let mut perms = Vec::with_capacity(24);
        permute(&mut idx, 0, &mut perms);
        perms.sort_unstable();
        perms.dedup();
        perms
    }

    fn symmetrize_checked(&mut self) -> Result<()> {
        let d = self.dim;
        let scale = self.data.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
        let tol = SYMMETRY_RTOL * scale.max(1e-300);
        for i in 0..d {
            for j in i..d {
                for k in j..d {
                    for l in k..d {
                        let orbit = Self::orbit([i, j, k, l]);
                        let vals: Vec<f64> = orbit.iter().map(|&p| self.at4(p)).collect();
                        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
                        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                        if hi - lo > tol {
                            return Err(Error::Argument(format!(
                                "SymTensor4: entries not permutation symmetric at ({i},{j},{k},{l})"
                            )));
                        }
                        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                        for &p in &orbit {
                            *self.at4_mut(p) = mean;
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn set_orbit(&mut self, i: usize, j: usize, k: usize, l: usize, v: f64) {
        for p in Self::orbit([i, j, k, l]) {
            *self.at4_mut(p) = v;
        }
    }

    pub fn random_gaussian(dim: usize, rng: &mut impl Rng) -> Result<Self> {
        check_dim(dim, MAX_DENSE4_DIM, "SymTensor4")?;
        let raw: Vec<f64> = (0..dim.pow(4))
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let mut t = Self { dim, data: raw };
        let d = dim;
        for i in 0..d {
            for j in i..d {
                for k in j..d {
                    for l in k..d {
                        let orbit = Self::orbit([i, j, k, l]);
                        let mean = orbit.iter().map(|&p| t.at4(p)).sum::<f64>()
                            / orbit.len() as f64;
                        for &p in &orbit {
                            *t.at4_mut(p) = mean;
                        }
                    }
                }
            }
        }
        Ok(t)
    }

    /// `Σ_ℓ cℓ · vℓ⊗4` for rows `vℓ` of `vectors`.
    pub fn from_rank_one_sum(coeffs: &[f64], vectors: &DMatrix<f64>) -> Result<Self> {
        if coeffs.len() != vectors.nrows() {
            return Err(Error::Argument(
                "rank-one sum: coefficient/vector count mismatch".into(),
            ));
        }
        let mut t = Self::zeros(vectors.ncols())?;
        for (l, &c) in coeffs.iter().enumerate() {
            t.add_rank_one(c, &vectors.row(l).transpose());
        }
        Ok(t)
    }

    /// Adds `c · v⊗4` in place.
    pub fn add_rank_one(&mut self, c: f64, v: &DVector<f64>) {
        let d = self.dim;
        assert_eq!(v.len(), d);
        for i in 0..d {
            let ci = c * v[i];
            for j in 0..d {
                let cij = ci * v[j];
                for k in 0..d {
                    let cijk = cij * v[k];
                    let base = ((i * d + j) * d + k) * d;
                    for l in 0..d {
                        self.data[base + l] += cijk * v[l];
                    }
                }
            }
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn at4(&self, p: [usize; 4]) -> f64 {
        let d = self.dim;
        self.data[((p[0] * d + p[1]) * d + p[2]) * d + p[3]]
    }

    #[inline]
    fn at4_mut(&mut self, p: [usize; 4]) -> &mut f64 {
        let d = self.dim;
        &mut self.data[((p[0] * d + p[1]) * d + p[2]) * d + p[3]]
    }

    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.at4([i, j, k, l])
    }

    pub fn scale_mut(&mut self, c: f64) {
        for x in &mut self.data {
            *x *= c;
        }
    }

    /// `⟨T, u⊗4⟩`.
    pub fn contract4(&self, u: &DVector<f64>) -> Result<f64> {
        if u.len() != self.dim {
            return Err(Error::Argument("contract4: dimension mismatch".into()));
        }
        Ok(self.contract_three_unchecked(u).dot(u))
    }

    /// `T[u, u, u, ·]`.
    pub fn contract_three(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        if u.len() != self.dim {
            return Err(Error::Argument("contract_three: dimension mismatch".into()));
        }
        Ok(self.contract_three_unchecked(u))
    }

    fn contract_three_unchecked(&self, u: &DVector<f64>) -> DVector<f64> {
        let d = self.dim;
        let mut out = DVector::zeros(d);
        for i in 0..d {
            let mut acc_i = 0.0;
            for j in 0..d {
                let uj = u[j];
                if uj == 0.0 {
                    continue;
                }
                let mut acc_j = 0.0;
                for k in 0..d {
                    let uk = u[k];
                    if uk == 0.0 {
                        continue;
                    }
                    let base = ((i * d + j) * d + k) * d;
                    let mut row = 0.0;
                    for l in 0..d {
                        row += self.data[base + l] * u[l];
                    }
                    acc_j += uk * row;
                }
                acc_i += uj * acc_j;
            }
            out[i] = acc_i;
        }
        out
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// `T[·, ·, x, x]`: the matrix with entries `Σₖₗ Tᵢⱼₖₗ xₖxₗ`.
    pub fn contract_two_matrix(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        if x.len() != self.dim {
            return Err(Error::Argument(
                "contract_two_matrix: dimension mismatch".into(),
            ));
        }
        let d = self.dim;
        let mut out = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                let mut acc = 0.0;
                for k in 0..d {
                    let xk = x[k];
                    if xk == 0.0 {
                        continue;
                    }
                    let base = ((i * d + j) * d + k) * d;
                    let mut row = 0.0;
                    for l in 0..d {
                        row += self.data[base + l] * x[l];
                    }
                    acc += xk * row;
                }
                out[(i, j)] = acc;
            }
        }
        Ok(out)
    }

    pub fn mode_transform(&self, m: &DMatrix<f64>) -> Result<Self> {
        let d = self.dim;
        if m.nrows() != d || m.ncols() != d {
            return Err(Error::Argument("mode_transform: shape mismatch".into()));
        }
        let mut cur = self.data.clone();
        for _ in 0..4 {
            let mut next = vec![0.0; d.pow(4)];
            for i in 0..d {
                for j in 0..d {
                    for k in 0..d {
                        let base = ((i * d + j) * d + k) * d;
                        for t in 0..d {
                            let mut acc = 0.0;
                            for l in 0..d {
                                acc += cur[base + l] * m[(t, l)];
                            }
                            next[((t * d + i) * d + j) * d + k] = acc;
                        }
                    }
                }
            }
            cur = next;
        }
        Ok(Self { dim: d, data: cur })
    }

    pub fn opnorm(&self, restarts: usize, seed: u64) -> OpNormEstimate {
        opnorm::multistart_opnorm(&DenseQuartic(self), restarts, seed)
    }

    /// Signed minimum of `⟨T, u⊗4⟩` over the sphere (multistart estimate);
    /// used to reject quartic terms that are unbounded below.
    pub fn min_sphere(&self, restarts: usize, seed: u64) -> f64 {
        -opnorm::multistart_signed_max(&opnorm::Negated(&DenseQuartic(self)), restarts, seed).value
    }

    pub fn weighted_opnorm(
        &self,
        h: &DMatrix<f64>,
        restarts: usize,
        seed: u64,
    ) -> Result<OpNormEstimate> {
        let m = cholesky_inverse_factor(h)?;
        let whitened = self.mode_transform(&m)?;
        Ok(whitened.opnorm(restarts, seed))
    }
}

fn permute(idx: &mut [usize; 4], k: usize, out: &mut Vec<[usize; 4]>) {
    if k == 4 {
        out.push(*idx);
        return;
    }
    for i in k..4 {
        idx.swap(k, i);
        permute(idx, k + 1, out);
        idx.swap(k, i);
    }
}

pub(crate) struct DenseQuartic<'a>(pub &'a SymTensor4);

impl SphereForm for DenseQuartic<'_> {
    fn dim(&self) -> usize {
        self.0.dim
    }
    fn eval(&self, u: &DVector<f64>) -> f64 {
        self.0.contract_three_unchecked(u).dot(u)
    }
    fn eval_grad(&self, u: &DVector<f64>) -> (f64, DVector<f64>) {
        let w = self.0.contract_three_unchecked(u);
        (w.dot(u), 4.0 * w)
    }
    fn odd(&self) -> bool {
        false
    }
}

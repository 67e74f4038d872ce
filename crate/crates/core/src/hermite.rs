//! Order-3 Hermite-tensor identities used as both a computational kernel and
//! an independent test oracle.
//!
//! For a symmetric `S`, `⟨S, Z⊗3⟩ = ⟨S, 𝐇₃(Z)⟩ + 3⟨S, I⟩ᵀZ` where `𝐇₃` is the
//! order-3 Hermite tensor, and `E[⟨S, Z⊗3⟩²] = 3!‖S‖_F² + 9‖⟨S, I⟩‖²`.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::mc;
use crate::tensor::SymTensor3;

/// `⟨S, 𝐇₃(x)⟩ = ⟨S, x⊗3⟩ - 3⟨S, I⟩ᵀx`.
pub fn hermite3_apply(s: &SymTensor3, x: &DVector<f64>) -> Result<f64> {
    let cubic = s.contract3(x)?;
    Ok(cubic - 3.0 * s.identity_contract().dot(x))
}

/// Closed form for `E[⟨S, Z⊗3⟩²]`: `3!‖S‖_F² + 9‖⟨S, I⟩‖²`.
pub fn cubic_second_moment(s: &SymTensor3) -> f64 {
    let f = s.frobenius();
    let g = s.identity_contract().norm();
    6.0 * f * f + 9.0 * g * g
}

/// Monte Carlo estimate of `E[⟨S, Z⊗3⟩^{2k}]` with its standard error.
/// Deterministic for a given `(seed, samples)`. For `2k ≥ 8` the powers are
/// accumulated on a normalized scale so intermediate sums cannot overflow.
pub fn mc_cubic_moment(
    s: &SymTensor3,
    k: usize,
    samples: u64,
    seed: u64,
) -> Result<(f64, f64)> {
    if k == 0 {
        return Err(Error::Argument("mc_cubic_moment: k must be positive".into()));
    }
    if samples < 100 {
        return Err(Error::Argument(format!(
            "mc_cubic_moment: need at least 100 samples, got {samples}"
        )));
    }
    let d = s.dim();
    let power = 2 * k as i32;
    let scale = if power >= 8 {
        let max_abs = (0..d)
            .flat_map(|i| (0..d).flat_map(move |j| (0..d).map(move |k2| (i, j, k2))))
            .map(|(i, j, k2)| s.get(i, j, k2).abs())
            .fold(0.0f64, f64::max);
        (4.0 * (d as f64).powf(1.5) * max_abs).max(1e-300)
    } else {
        1.0
    };
    let (mean_scaled, se_scaled) = mc::mean_stderr(samples, seed, |rng| {
        let z = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let v = s.contract3(&z).expect("dimension fixed") / scale;
        v.powi(power)
    });
    let factor = scale.powi(power);
    Ok((mean_scaled * factor, se_scaled * factor))
}

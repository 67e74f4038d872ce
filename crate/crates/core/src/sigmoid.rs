//! Numerically stable sigmoid and its first three derivatives.
//!
//! `σ(t) = 1/(1 + e^{-t})`. The derivatives are polynomials in `σ`:
//! `σ' = σ(1-σ)`, `σ'' = σ'(1-2σ)`, `σ''' = σ'(1-6σ')`.

/// `σ(t)`, branch-stable for large `|t|`.
pub fn sigma(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `log σ(t)` without cancellation (`-softplus(-t)`).
pub fn log_sigma(t: f64) -> f64 {
    -softplus(-t)
}

/// `log(1 + e^t)`.
pub fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

pub fn sigma_d1(t: f64) -> f64 {
    let s = sigma(t);
    s * (1.0 - s)
}

pub fn sigma_d2(t: f64) -> f64 {
    let s = sigma(t);
    s * (1.0 - s) * (1.0 - 2.0 * s)
}

pub fn sigma_d3(t: f64) -> f64 {
    let s1 = sigma_d1(t);
    s1 * (1.0 - 6.0 * s1)
}

/// `σ^{(k)}(t)` for `k ∈ {0, 1, 2, 3}`.
pub fn sigma_deriv(k: usize, t: f64) -> f64 {
    match k {
        0 => sigma(t),
        1 => sigma_d1(t),
        2 => sigma_d2(t),
        3 => sigma_d3(t),
        _ => panic!("sigma_deriv: order {k} not implemented"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn values_at_zero() {
        assert_eq!(sigma(0.0), 0.5);
        assert_eq!(sigma_d1(0.0), 0.25);
        assert_eq!(sigma_d2(0.0), 0.0);
        assert_relative_eq!(sigma_d3(0.0), -0.125, max_relative = 1e-15);
        assert_relative_eq!(log_sigma(0.0), -(2.0f64.ln()), max_relative = 1e-15);
    }

    #[test]
    fn saturation_is_clean() {
        assert_eq!(sigma(800.0), 1.0);
        assert_eq!(sigma(-800.0), 0.0);
        assert!(sigma_d1(800.0) >= 0.0);
        assert_relative_eq!(log_sigma(-745.0), -745.0, max_relative = 1e-12);
        assert!(log_sigma(40.0).abs() < 1e-15);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let h = 1e-5;
        for &t in &[-3.0, -0.7, 0.3, 1.9, 4.2] {
            let d1 = (sigma(t + h) - sigma(t - h)) / (2.0 * h);
            assert_relative_eq!(d1, sigma_d1(t), max_relative = 1e-8);
            let d2 = (sigma_d1(t + h) - sigma_d1(t - h)) / (2.0 * h);
            assert_relative_eq!(d2, sigma_d2(t), epsilon = 1e-9, max_relative = 1e-7);
            let d3 = (sigma_d2(t + h) - sigma_d2(t - h)) / (2.0 * h);
            assert_relative_eq!(d3, sigma_d3(t), epsilon = 1e-9, max_relative = 1e-7);
        }
    }

    #[test]
    fn parity() {
        for &t in &[0.1, 1.3, 2.7, 9.0] {
            assert_relative_eq!(sigma_d1(-t), sigma_d1(t), max_relative = 1e-14);
            assert_relative_eq!(sigma_d2(-t), -sigma_d2(t), max_relative = 1e-13);
            assert_relative_eq!(sigma_d3(-t), sigma_d3(t), max_relative = 1e-13);
        }
    }
}

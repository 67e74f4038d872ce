//! Gaussian quadrature rules and composite integration.
//!
//! Nodes and weights come from the Golub–Welsch construction: eigenvalues of
//! the Jacobi matrix of the orthogonal-polynomial recurrence give the nodes,
//! and the squared first eigenvector components give the weights. The
//! symmetric tridiagonal eigensolver below is a QL iteration with implicit
//! shifts that tracks only the first row of the eigenvector matrix.

use crate::error::{Error, Result};

/// Eigenvalues of a symmetric tridiagonal matrix together with the first
/// component of each (normalized) eigenvector.
///
/// `diag` has length `n`, `offdiag` length `n - 1`.
pub fn tridiag_eigen_first(diag: &[f64], offdiag: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = diag.len();
    assert!(n >= 1 && offdiag.len() + 1 == n);
    let mut d = diag.to_vec();
    // e[i] couples entries i-1 and i; slot n is scratch for the QL sweep.
    let mut e = vec![0.0; n + 1];
    e[1..n].copy_from_slice(offdiag);
    let mut q = vec![0.0; n];
    q[0] = 1.0;

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m + 1].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            assert!(iter < 50, "tridiagonal QL failed to converge");
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l + 1]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l + 1] / (g + r.copysign(g));
            let (mut s, mut c) = (1.0, 1.0);
            let mut p = 0.0;
            let mut underflow = false;
            for i in (l..m).rev() {
                let mut f = s * e[i + 1];
                let b = c * e[i + 1];
                r = f.hypot(g);
                e[i + 2] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                f = q[i + 1];
                q[i + 1] = s * q[i] + c * f;
                q[i] = c * q[i] - s * f;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l + 1] = g;
            e[m + 1] = 0.0;
        }
    }

    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let values: Vec<f64> = idx.iter().map(|&i| d[i]).collect();
    let firsts: Vec<f64> = idx.iter().map(|&i| q[i]).collect();
    (values, firsts)
}

/// A one-dimensional quadrature rule: `∫ f dμ ≈ Σ wᵢ f(xᵢ)`.
#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Gauss–Hermite rule for weight `exp(-x²)` on the real line.
pub fn gauss_hermite(order: usize) -> Rule {
    assert!(order >= 1);
    let diag = vec![0.0; order];
    let offdiag: Vec<f64> = (1..order).map(|i| (i as f64 / 2.0).sqrt()).collect();
    let (nodes, firsts) = tridiag_eigen_first(&diag, &offdiag);
    let mu0 = std::f64::consts::PI.sqrt();
    let weights = firsts.iter().map(|&c| mu0 * c * c).collect();
    Rule { nodes, weights }
}

/// Expectation `E[f(Z)]`, `Z ~ N(0,1)`, by Gauss–Hermite of the given order.
pub fn normal_expectation(order: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
    let rule = gauss_hermite(order);
    let inv = 1.0 / std::f64::consts::PI.sqrt();
    rule.nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&x, &w)| inv * w * f(std::f64::consts::SQRT_2 * x))
        .sum()
}

/// Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> Rule {
    assert!(order >= 1);
    let diag = vec![0.0; order];
    let offdiag: Vec<f64> = (1..order)
        .map(|i| {
            let i = i as f64;
            i / (4.0 * i * i - 1.0).sqrt()
        })
        .collect();
    let (nodes, firsts) = tridiag_eigen_first(&diag, &offdiag);
    let weights = firsts.iter().map(|&c| 2.0 * c * c).collect();
    Rule { nodes, weights }
}

/// Generalized Gauss–Laguerre rule for weight `x^α exp(-x)` on `[0, ∞)`.
/// Weights sum to `Γ(α + 1)`.
pub fn gauss_laguerre(order: usize, alpha: f64) -> Result<Rule> {
    if alpha.is_nan() || alpha <= -1.0 {
        return Err(Error::Argument(format!(
            "gauss_laguerre: alpha must exceed -1, got {alpha}"
        )));
    }
    assert!(order >= 1);
    let diag: Vec<f64> = (0..order).map(|i| 2.0 * i as f64 + alpha + 1.0).collect();
    let offdiag: Vec<f64> = (1..order)
        .map(|i| {
            let i = i as f64;
            (i * (i + alpha)).sqrt()
        })
        .collect();
    let (nodes, firsts) = tridiag_eigen_first(&diag, &offdiag);
    let mu0 = statrs::function::gamma::gamma(alpha + 1.0);
    let weights = firsts.iter().map(|&c| mu0 * c * c).collect();
    Ok(Rule { nodes, weights })
}

/// Composite Gauss–Legendre integral of `f` over `[a, b]` with `panels`
/// equal panels and a fixed-order rule per panel.
pub fn composite_legendre(
    f: &mut impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    panels: usize,
    rule: &Rule,
) -> f64 {
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let mid = lo + 0.5 * h;
        let half = 0.5 * h;
        let mut s = 0.0;
        for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
            s += w * f(mid + half * x);
        }
        total += half * s;
    }
    total
}

/// Result of an integration with a node-doubling error estimate.
#[derive(Debug, Clone, Copy)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

/// Integrates `f` over `[a, b]`, doubling the panel count until two
/// successive composite values agree to `tol` (absolute + relative).
pub fn integrate_doubling(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    tol: f64,
    max_panels: usize,
) -> Integral {
    let rule = gauss_legendre(16);
    let mut panels = 32;
    let mut prev = composite_legendre(&mut f, a, b, panels, &rule);
    let mut evals = panels * rule.nodes.len();
    loop {
        panels *= 2;
        let cur = composite_legendre(&mut f, a, b, panels, &rule);
        evals += panels * rule.nodes.len();
        let err = (cur - prev).abs();
        if err <= tol * cur.abs().max(1.0) || panels >= max_panels {
            return Integral {
                value: cur,
                error: err,
                evaluations: evals,
            };
        }
        prev = cur;
    }
}

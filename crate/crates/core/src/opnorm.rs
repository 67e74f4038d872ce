//! Multistart projected-gradient ascent for operator norms of symmetric
//! forms on the unit sphere.
//!
//! The maximized quantity is nonconvex, so the returned value is a lower
//! bound on the true norm and is labeled as an estimate everywhere it is
//! reported. Start `i` draws from the ChaCha stream `(seed, i)`, which makes
//! the result independent of scheduling order.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::mc::stream_rng;

/// A homogeneous form `u ↦ ⟨S, u⊗k⟩` restricted to the unit sphere.
pub trait SphereForm: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, u: &DVector<f64>) -> f64;
    /// Value and ambient gradient of `u ↦ eval(u)`.
    fn eval_grad(&self, u: &DVector<f64>) -> (f64, DVector<f64>);
    /// Whether the form is odd (`eval(-u) = -eval(u)`); odd forms need no
    /// separate sign pass.
    fn odd(&self) -> bool;
}

/// Negation of a form, used to search for minima.
pub struct Negated<'a, F: SphereForm>(pub &'a F);

impl<F: SphereForm> SphereForm for Negated<'_, F> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn eval(&self, u: &DVector<f64>) -> f64 {
        -self.0.eval(u)
    }
    fn eval_grad(&self, u: &DVector<f64>) -> (f64, DVector<f64>) {
        let (v, g) = self.0.eval_grad(u);
        (-v, -g)
    }
    fn odd(&self) -> bool {
        self.0.odd()
    }
}

/// Outcome of a multistart search. `value` has lower-bound semantics.
#[derive(Debug, Clone, Copy)]
pub struct OpNormEstimate {
    pub value: f64,
    /// False if any restart hit the iteration cap before stalling.
    pub converged: bool,
    /// Number of restarts that hit the iteration cap.
    pub capped_restarts: usize,
}

const MAX_ITER: usize = 500;
const STEP0: f64 = 0.1;
const MOVE_TOL: f64 = 1e-10;

fn random_unit(dim: usize, rng: &mut impl Rng) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

/// Single projected-gradient ascent of `form` from `u0`.
/// Returns the final value and whether the iterate stalled before the cap.
fn ascend<F: SphereForm>(form: &F, mut u: DVector<f64>) -> (f64, bool) {
    let mut value = form.eval(&u);
    for _ in 0..MAX_ITER {
        let (_, grad) = form.eval_grad(&u);
        let mut step = STEP0;
        let mut cand = None;
        while step >= 1e-16 {
            let mut trial = &u + step * &grad;
            let n = trial.norm();
            if n > 0.0 {
                trial /= n;
                let tv = form.eval(&trial);
                if tv > value {
                    cand = Some((trial, tv));
                    break;
                }
            }
            step *= 0.5;
        }
        match cand {
            Some((trial, tv)) => {
                let moved = (&trial - &u).norm();
                u = trial;
                value = tv;
                if moved < MOVE_TOL {
                    return (value, true);
                }
            }
            // No uphill step exists at any scale: stationary.
            None => return (value, true),
        }
    }
    (value, false)
}

/// Maximizes `|form|` over the sphere from `restarts` random unit starts.
pub fn multistart_opnorm<F: SphereForm>(form: &F, restarts: usize, seed: u64) -> OpNormEstimate {
    let restarts = restarts.max(1);
    let results: Vec<(f64, bool)> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, r as u64);
            let u0 = random_unit(form.dim(), &mut rng);
            let (v_pos, c_pos) = ascend(form, u0.clone());
            if form.odd() {
                (v_pos.abs(), c_pos)
            } else {
                let (v_neg, c_neg) = ascend(&Negated(form), u0);
                (v_pos.abs().max(v_neg.abs()), c_pos && c_neg)
            }
        })
        .collect();
    summarize(results)
}

/// Maximizes the signed value of `form` over the sphere.
pub fn multistart_signed_max<F: SphereForm>(
    form: &F,
    restarts: usize,
    seed: u64,
) -> OpNormEstimate {
    let restarts = restarts.max(1);
    let results: Vec<(f64, bool)> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, r as u64);
            let u0 = random_unit(form.dim(), &mut rng);
            ascend(form, u0)
        })
        .collect();
    summarize(results)
}

fn summarize(results: Vec<(f64, bool)>) -> OpNormEstimate {
    let mut best = f64::NEG_INFINITY;
    let mut capped = 0;
    for (v, ok) in results {
        if v > best {
            best = v;
        }
        if !ok {
            capped += 1;
        }
    }
    OpNormEstimate {
        value: best,
        converged: capped == 0,
        capped_restarts: capped,
    }
}

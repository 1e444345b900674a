//! Damped Newton iteration with seeded random restarts.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::EvalError;
use crate::linalg::{norm_inf, Lu, Matrix};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewtonConfig {
    pub max_iter: usize,
    /// Converged when `‖R‖∞ ≤ tol·(1 + scale)`.
    pub tol: f64,
    /// Extra starts drawn uniformly from `[-1, 1]^n` after the initial guess fails.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig { max_iter: 100, tol: 1e-12, restarts: 8, seed: 0x5eed }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NewtonOutcome {
    pub x: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

enum Attempt {
    Converged(NewtonOutcome),
    Failed { residual: f64, singular: bool },
}

/// Solves `R(x) = 0` where `system` returns the residual and its Jacobian.
///
/// `scale` sets the convergence threshold (typically `‖p‖∞`). A step that
/// increases the residual or leaves the domain is halved, up to 40 times.
pub fn solve<F>(system: F, x0: &[f64], scale: f64, cfg: &NewtonConfig) -> Result<NewtonOutcome>
where
    F: Fn(&[f64]) -> std::result::Result<(Vec<f64>, Matrix), EvalError>,
{
    let threshold = cfg.tol * (1.0 + scale.abs());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best = f64::INFINITY;
    let mut total = 0;
    let mut all_singular = true;
    for start in 0..=cfg.restarts {
        let guess: Vec<f64> = if start == 0 {
            x0.to_vec()
        } else {
            (0..x0.len()).map(|_| rng.random_range(-1.0..=1.0)).collect()
        };
        match attempt(&system, guess, threshold, cfg.max_iter) {
            Attempt::Converged(mut out) => {
                out.iterations += total;
                return Ok(out);
            }
            Attempt::Failed { residual, singular } => {
                best = best.min(residual);
                all_singular &= singular;
                total += cfg.max_iter;
            }
        }
    }
    if all_singular {
        return Err(Error::Singular("Jacobian of the supremum condition".into()));
    }
    Err(Error::NoConvergence { iterations: total, residual: best })
}

fn attempt<F>(system: &F, mut x: Vec<f64>, threshold: f64, max_iter: usize) -> Attempt
where
    F: Fn(&[f64]) -> std::result::Result<(Vec<f64>, Matrix), EvalError>,
{
    let (mut r, mut jac) = match system(&x) {
        Ok(v) => v,
        Err(_) => return Attempt::Failed { residual: f64::INFINITY, singular: false },
    };
    let mut norm = norm_inf(&r);
    for it in 0..=max_iter {
        if norm <= threshold {
            return Attempt::Converged(NewtonOutcome { x, residual: norm, iterations: it });
        }
        if it == max_iter || !norm.is_finite() {
            break;
        }
        let Some(lu) = Lu::new(&jac) else {
            return Attempt::Failed { residual: norm, singular: true };
        };
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        let dx = lu.solve(&neg);
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + lambda * d).collect();
            if let Ok((r2, j2)) = system(&trial) {
                let n2 = norm_inf(&r2);
                if n2.is_finite() && (n2 < norm || n2 <= threshold) {
                    x = trial;
                    r = r2;
                    jac = j2;
                    norm = n2;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Attempt::Failed { residual: norm, singular: false }
}

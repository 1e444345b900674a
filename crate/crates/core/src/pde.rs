//! The multidimensional Clairaut equation
//!
//! ```text
//! y = Σ_j x_j ∂y/∂x_j − f(∂y/∂x)
//! ```
//!
//! with its general (affine), envelope and `s`-mixed solutions.

use crate::error::{Error, Result};
use crate::expr::{differentiate, parse_expression, CompiledExpr, Expr};
use crate::linalg::{pivoted_rank, Matrix};
use crate::newton::{self, NewtonConfig};

/// Relative pivot tolerance for the Hessian of `f`.
pub const HESSIAN_RANK_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct ClairautProblem {
    pub n: usize,
    pub f: Expr,
    value: CompiledExpr,
    grad: Vec<CompiledExpr>,
    hess: Vec<Vec<CompiledExpr>>,
}

pub fn z_symbol(j: usize) -> String {
    format!("z{}", j + 1)
}

impl ClairautProblem {
    pub fn new(n: usize, f: Expr) -> Result<ClairautProblem> {
        if n == 0 {
            return Err(Error::Usage("dimension must be at least 1".into()));
        }
        let names: Vec<String> = (0..n).map(z_symbol).collect();
        for s in f.free_symbols() {
            if !names.contains(&s) {
                return Err(Error::Model(format!("f may only use z1..z{n}, found '{s}'")));
            }
        }
        let compile = |e: &Expr| CompiledExpr::compile_with_names(e, &names);
        let first: Vec<Expr> = names.iter().map(|z| differentiate(&f, z)).collect();
        let hess = first
            .iter()
            .map(|d| names.iter().map(|z| compile(&differentiate(d, z))).collect())
            .collect::<std::result::Result<_, _>>()?;
        let grad = first.iter().map(compile).collect::<std::result::Result<_, _>>()?;
        Ok(ClairautProblem { n, value: compile(&f)?, grad, hess, f })
    }

    /// Parses `f`; the dimension defaults to the largest `z` index used.
    pub fn parse(text: &str, n: Option<usize>) -> Result<ClairautProblem> {
        let f = parse_expression(text)?;
        let used = f
            .free_symbols()
            .iter()
            .filter_map(|s| s.strip_prefix('z').and_then(|k| k.parse::<usize>().ok()))
            .max()
            .unwrap_or(1);
        ClairautProblem::new(n.unwrap_or(used), f)
    }

    pub fn f(&self, z: &[f64]) -> Result<f64> {
        Ok(self.value.eval(z)?)
    }

    pub fn gradient(&self, z: &[f64]) -> Result<Vec<f64>> {
        Ok(self.grad.iter().map(|e| e.eval(z)).collect::<std::result::Result<_, _>>()?)
    }

    pub fn hessian(&self, z: &[f64]) -> Result<Matrix> {
        Ok(self
            .hess
            .iter()
            .map(|row| row.iter().map(|e| e.eval(z)).collect())
            .collect::<std::result::Result<_, _>>()?)
    }

    fn check_dim(&self, v: &[f64], what: &str) -> Result<()> {
        if v.len() != self.n {
            return Err(Error::Usage(format!("{what} needs {} entries, got {}", self.n, v.len())));
        }
        Ok(())
    }
}

/// `y(x) = Σ x_j c_j − f(c)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneralSolution {
    pub c: Vec<f64>,
    pub f_c: f64,
}

impl GeneralSolution {
    pub fn eval(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.c).map(|(a, b)| a * b).sum::<f64>() - self.f_c
    }
}

pub fn general_solution(prob: &ClairautProblem, c: &[f64]) -> Result<GeneralSolution> {
    prob.check_dim(c, "c")?;
    Ok(GeneralSolution { c: c.to_vec(), f_c: prob.f(c)? })
}

/// Solves `x_i = ∂f/∂z_i` for the leading `s` components with the tail fixed.
fn resolve_leading(
    prob: &ClairautProblem,
    s: usize,
    tail: &[f64],
    x: &[f64],
    cfg: &NewtonConfig,
) -> Result<Vec<f64>> {
    let full = |head: &[f64]| -> Vec<f64> { head.iter().chain(tail).copied().collect() };
    let start = vec![0.0; s];
    let rank = |z: &[f64]| -> Result<usize> {
        let h = prob.hessian(&full(z))?;
        let block: Matrix = h[..s].iter().map(|row| row[..s].to_vec()).collect();
        Ok(pivoted_rank(&block, HESSIAN_RANK_TOL, 0.0).rank)
    };
    let probes = [start.clone(), vec![0.5; s], (0..s).map(|i| 0.3 - 0.2 * i as f64).collect()];
    let best = probes.iter().filter_map(|z| rank(z).ok()).max().unwrap_or(0);
    if best < s {
        return Err(Error::RankDeficient(format!(
            "leading {s}×{s} block of the Hessian of f has rank {best}; no envelope in those variables"
        )));
    }
    let system = |z: &[f64]| {
        let zf = full(z);
        let g: Vec<f64> = prob.grad[..s].iter().map(|e| e.eval(&zf)).collect::<std::result::Result<_, _>>()?;
        let jac: Matrix = prob.hess[..s]
            .iter()
            .map(|row| row[..s].iter().map(|e| e.eval(&zf)).collect())
            .collect::<std::result::Result<_, _>>()?;
        Ok((g.iter().zip(x).map(|(a, b)| a - b).collect(), jac))
    };
    let scale = x[..s].iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    Ok(newton::solve(system, &start, scale, cfg)?.x)
}

/// `Σ x_i z_i − f(z)` at the solution of `x_i = ∂f/∂z_i`.
pub fn envelope_solution(prob: &ClairautProblem, x: &[f64], cfg: &NewtonConfig) -> Result<f64> {
    prob.check_dim(x, "x")?;
    let z = resolve_leading(prob, prob.n, &[], x, cfg)?;
    Ok(x.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>() - prob.f(&z)?)
}

/// Envelope for the leading `s` variables, general solution with `c_tail` for the rest.
pub fn mixed_solution(
    prob: &ClairautProblem,
    s: usize,
    c_tail: &[f64],
    x: &[f64],
    cfg: &NewtonConfig,
) -> Result<f64> {
    prob.check_dim(x, "x")?;
    if s > prob.n || c_tail.len() != prob.n - s {
        return Err(Error::Usage(format!(
            "s = {s} needs s ≤ {} and {} tail constants, got {}",
            prob.n,
            prob.n.saturating_sub(s),
            c_tail.len()
        )));
    }
    let head = if s == 0 { Vec::new() } else { resolve_leading(prob, s, c_tail, x, cfg)? };
    let z: Vec<f64> = head.iter().chain(c_tail).copied().collect();
    Ok(x.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>() - prob.f(&z)?)
}

/// Envelope reached by stationarity of the general solution in `c`.
///
/// `∂y_gen/∂c` is taken by central differences of the general solution
/// itself; the Newton Jacobian uses the Hessian of `f`.
pub fn envelope_from_general(prob: &ClairautProblem, x: &[f64], cfg: &NewtonConfig) -> Result<f64> {
    prob.check_dim(x, "x")?;
    let h = 1e-5;
    let system = |c: &[f64]| {
        let mut r = Vec::with_capacity(prob.n);
        for j in 0..prob.n {
            let mut cp = c.to_vec();
            let mut cm = c.to_vec();
            let step = h * (1.0 + c[j].abs());
            cp[j] += step;
            cm[j] -= step;
            let gp = x.iter().zip(&cp).map(|(a, b)| a * b).sum::<f64>() - prob.value.eval(&cp)?;
            let gm = x.iter().zip(&cm).map(|(a, b)| a * b).sum::<f64>() - prob.value.eval(&cm)?;
            r.push((gp - gm) / (2.0 * step));
        }
        let jac: Matrix = prob
            .hess
            .iter()
            .map(|row| row.iter().map(|e| e.eval(c).map(|v| -v)).collect())
            .collect::<std::result::Result<_, _>>()?;
        Ok((r, jac))
    };
    let relaxed = NewtonConfig { tol: cfg.tol.max(1e-9), ..*cfg };
    let c = newton::solve(system, &vec![0.0; prob.n], 0.0, &relaxed)?.x;
    Ok(general_solution(prob, &c)?.eval(x))
}

/// `|y − Σ x_j ∂y/∂x_j + f(∂y/∂x)|` with a central-difference gradient.
pub fn equation_residual(
    prob: &ClairautProblem,
    y: &dyn Fn(&[f64]) -> Result<f64>,
    x: &[f64],
    h: f64,
) -> Result<f64> {
    prob.check_dim(x, "x")?;
    let mut grad = Vec::with_capacity(prob.n);
    for j in 0..prob.n {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[j] += h;
        xm[j] -= h;
        grad.push((y(&xp)? - y(&xm)?) / (2.0 * h));
    }
    let xg: f64 = x.iter().zip(&grad).map(|(a, b)| a * b).sum();
    Ok((y(x)? - xg + prob.f(&grad)?).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> NewtonConfig {
        NewtonConfig::default()
    }

    #[test]
    fn general_solution_examples() {
        let prob = ClairautProblem::parse("z1^2 + z2^2 + z3", None).unwrap();
        assert_eq!(prob.n, 3);
        let c = [0.5, -1.5, 2.0];
        let y = general_solution(&prob, &c).unwrap();
        let x = [1.0, 2.0, 3.0];
        let want = c[0] * (x[0] - c[0]) + c[1] * (x[1] - c[1]) + c[2] * (x[2] - 1.0);
        assert!((y.eval(&x) - want).abs() < 1e-14);

        let zero = ClairautProblem::parse("0", Some(2)).unwrap();
        assert_eq!(general_solution(&zero, &[0.0, 0.0]).unwrap().eval(&[3.0, 4.0]), 0.0);

        // oscillator: f(c) = L(x, c) = m c²/2 − k x²/2 with m = 2, k = 3, x = 0.7
        let (m, k, xq) = (2.0, 3.0, 0.7);
        let osc = ClairautProblem::parse(&format!("{m}*z1^2/2 - {}", k * xq * xq / 2.0), None).unwrap();
        let (c, pbar) = (1.1, 0.4);
        let y = general_solution(&osc, &[c]).unwrap().eval(&[pbar]);
        assert!((y - (pbar * c - m * c * c / 2.0 + k * xq * xq / 2.0)).abs() < 1e-14);
    }

    #[test]
    fn envelope_examples() {
        let q = ClairautProblem::parse("z1^2/2", None).unwrap();
        assert!((envelope_solution(&q, &[3.0], &cfg()).unwrap() - 4.5).abs() < 1e-12);
        let sq = ClairautProblem::parse("z1^2", None).unwrap();
        assert!((envelope_solution(&sq, &[3.0], &cfg()).unwrap() - 2.25).abs() < 1e-12);
        let two = ClairautProblem::parse("z1^2 + z2^2", None).unwrap();
        let x = [1.3, -0.4];
        let want = x[0] * x[0] / 4.0 + x[1] * x[1] / 4.0;
        assert!((envelope_solution(&two, &x, &cfg()).unwrap() - want).abs() < 1e-12);
        let bad = ClairautProblem::parse("z1^2 + z2^2 + z3", None).unwrap();
        let err = envelope_solution(&bad, &[1.0, 1.0, 1.0], &cfg()).unwrap_err();
        assert!(matches!(err, Error::RankDeficient(_)), "{err}");
    }

    #[test]
    fn mixed_examples() {
        let prob = ClairautProblem::parse("z1^2 + z2^2 + z3", None).unwrap();
        let x = [2.0, 2.0, 3.0];
        assert!((mixed_solution(&prob, 2, &[1.0], &x, &cfg()).unwrap() - 4.0).abs() < 1e-12);
        let (c2, c3) = (0.6, -1.2);
        let want = x[0] * x[0] / 4.0 + c2 * (x[1] - c2) + c3 * (x[2] - 1.0);
        assert!((mixed_solution(&prob, 1, &[c2, c3], &x, &cfg()).unwrap() - want).abs() < 1e-12);
        let c = [0.3, c2, c3];
        let gen = general_solution(&prob, &c).unwrap().eval(&x);
        assert_eq!(mixed_solution(&prob, 0, &c, &x, &cfg()).unwrap(), gen);
        assert!(matches!(mixed_solution(&prob, 3, &[], &x, &cfg()), Err(Error::RankDeficient(_))));
        assert!(matches!(mixed_solution(&prob, 2, &[], &x, &cfg()), Err(Error::Usage(_))));
    }

    #[test]
    fn residuals_vanish_and_envelope_routes_agree() {
        let prob = ClairautProblem::parse("exp(z1) + z2^2 + z1*z2/2", None).unwrap();
        let x = [1.7, 0.4];
        let y = |x: &[f64]| envelope_solution(&prob, x, &cfg());
        assert!(equation_residual(&prob, &y, &x, 1e-6).unwrap() < 1e-8);
        let a = envelope_solution(&prob, &x, &cfg()).unwrap();
        let b = envelope_from_general(&prob, &x, &cfg()).unwrap();
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        let gen = general_solution(&prob, &[0.2, -0.3]).unwrap();
        assert!(equation_residual(&prob, &|x: &[f64]| Ok(gen.eval(x)), &x, 1e-6).unwrap() < 1e-8);
    }

    #[test]
    fn rejects_foreign_symbols() {
        assert!(ClairautProblem::parse("z1 + w", None).is_err());
        assert!(ClairautProblem::parse("z3", Some(2)).is_err());
    }
}

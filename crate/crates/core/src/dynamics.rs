//! Hamilton–Clairaut equations of motion, their RK4 integration and
//! trajectory diagnostics.
//!
//! ```text
//! dq^i/dt = ∂H/∂p_i − Σ_β ∂B_β/∂p_i v^β
//! dp_i/dt = −∂H/∂q^i + Σ_β ∂B_β/∂q^i v^β
//! dq^α/dt = v^α,   Σ_β F_αβ v^β = D_α H
//! ```

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{parse_expression, CompiledExpr, Expr};
use crate::gauge::{
    b_gradient, corrected_bracket, field_strength_of, h_gradient, long_derivatives_of_h, poisson,
    GaugeClassification, GaugeKind, Gradient, PhaseFunction,
};
use crate::legendre::{ClairautTransform, PhasePoint, PhysicalData};
use crate::linalg::{norm_inf, select, Lu};
use crate::newton::NewtonConfig;

/// Sign relating `{Φ_α, H_phys}_full` to `D_α H_phys`.
pub const DIRAC_SIGN: f64 = -1.0;
pub const DEFAULT_CONSISTENCY_TOL: f64 = 1e-6;
const MAX_STEPS: f64 = 1e8;

/// How one degenerate velocity is obtained.
#[derive(Clone, Debug)]
pub enum GaugeMode {
    Solve,
    /// A function of `t` alone.
    Prescribed { expr: Expr, compiled: CompiledExpr },
    Zero,
}

impl GaugeMode {
    pub fn prescribed(expr: Expr) -> Result<GaugeMode> {
        let compiled = CompiledExpr::compile_with_names(&expr, &["t".to_string()]).map_err(|e| match e {
            crate::expr::EvalError::Unbound(s) => {
                Error::Usage(format!("gauge function may only depend on t, found '{s}'"))
            }
            other => other.into(),
        })?;
        Ok(GaugeMode::Prescribed { expr, compiled })
    }

    fn value(&self, t: f64) -> Result<f64> {
        match self {
            GaugeMode::Prescribed { compiled, .. } => Ok(compiled.eval(&[t])?),
            _ => Ok(0.0),
        }
    }
}

/// One mode per degenerate coordinate, in `split.degenerate` order.
#[derive(Clone, Debug)]
pub struct GaugeInput {
    pub modes: Vec<GaugeMode>,
}

impl GaugeInput {
    /// Solve on the classification subblock, zero elsewhere.
    pub fn default_for(cls: &GaugeClassification, n_deg: usize) -> GaugeInput {
        let modes = (0..n_deg)
            .map(|k| if cls.subblock.contains(&k) { GaugeMode::Solve } else { GaugeMode::Zero })
            .collect();
        GaugeInput { modes }
    }

    /// Defaults overridden by `name = <expr in t>` entries.
    pub fn from_specs(
        ct: &ClairautTransform,
        cls: &GaugeClassification,
        specs: &[(String, String)],
    ) -> Result<GaugeInput> {
        let mut g = GaugeInput::default_for(cls, ct.n_deg());
        for (name, text) in specs {
            let k = ct
                .split
                .degenerate
                .iter()
                .position(|d| d == name)
                .ok_or_else(|| Error::Usage(format!("'{name}' is not a degenerate coordinate")))?;
            g.modes[k] = GaugeMode::prescribed(parse_expression(text)?)?;
        }
        g.validate(cls)?;
        Ok(g)
    }

    pub fn solve_set(&self) -> Vec<usize> {
        (0..self.modes.len()).filter(|&k| matches!(self.modes[k], GaugeMode::Solve)).collect()
    }

    pub fn free_set(&self) -> Vec<usize> {
        (0..self.modes.len()).filter(|&k| !matches!(self.modes[k], GaugeMode::Solve)).collect()
    }

    pub fn validate(&self, cls: &GaugeClassification) -> Result<()> {
        let n_solve = self.solve_set().len();
        if n_solve != cls.r_f {
            return Err(Error::Usage(format!(
                "{} classification needs {} solved velocities, gauge input solves {}",
                kind_name(cls.kind),
                cls.r_f,
                n_solve
            )));
        }
        Ok(())
    }
}

fn kind_name(k: GaugeKind) -> &'static str {
    match k {
        GaugeKind::Gaugeless => "gaugeless",
        GaugeKind::Gauge => "gauge",
        GaugeKind::Limit => "limit",
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DegenerateVelocities {
    pub v: Vec<f64>,
    /// `‖F v − D H‖∞` over every degenerate row.
    pub residual: f64,
}

/// Degenerate velocities from the last equation of motion at time `t`.
pub fn degenerate_velocities(
    ct: &ClairautTransform,
    pt: &PhasePoint,
    gauge: &GaugeInput,
    t: f64,
) -> Result<DegenerateVelocities> {
    let d = ct.physical(pt)?;
    degenerate_velocities_of(ct, &d, gauge, t)
}

pub fn degenerate_velocities_of(
    ct: &ClairautTransform,
    d: &PhysicalData,
    gauge: &GaugeInput,
    t: f64,
) -> Result<DegenerateVelocities> {
    let m = ct.n_deg();
    if gauge.modes.len() != m {
        return Err(Error::Usage(format!("gauge input has {} modes for {m} degenerate coordinates", gauge.modes.len())));
    }
    let f = field_strength_of(ct, d);
    let dh = long_derivatives_of_h(ct, d);
    let mut v = vec![0.0; m];
    for (k, mode) in gauge.modes.iter().enumerate() {
        v[k] = mode.value(t)?;
    }
    let (s, free) = (gauge.solve_set(), gauge.free_set());
    if !s.is_empty() {
        let lu = Lu::new(&select(&f, &s, &s)).ok_or_else(|| Error::Singular(format!("F block on {s:?}")))?;
        let rhs: Vec<f64> = s
            .iter()
            .map(|&a| dh[a] - free.iter().map(|&b| f[a][b] * v[b]).sum::<f64>())
            .collect();
        for (&a, x) in s.iter().zip(lu.solve(&rhs)) {
            v[a] = x;
        }
    }
    let rows: Vec<f64> = (0..m)
        .map(|a| (0..m).map(|b| f[a][b] * v[b]).sum::<f64>() - dh[a])
        .collect();
    Ok(DegenerateVelocities { residual: norm_inf(&rows), v })
}

/// Right-hand side `(dq/dt, dp/dt)` for given degenerate velocities.
pub fn phase_velocity(ct: &ClairautTransform, d: &PhysicalData, v: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (reg, deg) = (&ct.split.regular_idx, &ct.split.degenerate_idx);
    let mut dq = vec![0.0; ct.n()];
    let mut dp = vec![0.0; ct.r()];
    for (i, &a) in reg.iter().enumerate() {
        dq[a] = d.dh_dp[i] - (0..v.len()).map(|k| d.db_dp[k][i] * v[k]).sum::<f64>();
        dp[i] = -d.dh_dq[a] + (0..v.len()).map(|k| d.db_dq[k][a] * v[k]).sum::<f64>();
    }
    for (k, &al) in deg.iter().enumerate() {
        dq[al] = v[k];
    }
    (dq, dp)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IntegratorConfig {
    pub t0: f64,
    pub t1: f64,
    pub dt: f64,
    pub newton: NewtonConfig,
    pub consistency_tol: f64,
}

impl IntegratorConfig {
    pub fn new(t0: f64, t1: f64, dt: f64) -> IntegratorConfig {
        IntegratorConfig { t0, t1, dt, newton: NewtonConfig::default(), consistency_tol: DEFAULT_CONSISTENCY_TOL }
    }

    /// Number of steps, after validation.
    pub fn steps(&self) -> Result<usize> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Usage(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t1 >= self.t0) || !self.t0.is_finite() || !self.t1.is_finite() {
            return Err(Error::Usage(format!("need finite t0 ≤ t1, got {} and {}", self.t0, self.t1)));
        }
        let n = ((self.t1 - self.t0) / self.dt).round();
        if n > MAX_STEPS {
            return Err(Error::Usage(format!("{n} steps exceeds the limit of {MAX_STEPS}")));
        }
        Ok(n as usize)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Sample {
    pub t: f64,
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub v: Vec<f64>,
    pub h_phys: f64,
    pub consistency: f64,
}

impl Sample {
    pub fn point(&self) -> PhasePoint {
        PhasePoint { q: self.q.clone(), p: self.p.clone(), v_deg: self.v.clone() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory {
    pub dt: f64,
    pub samples: Vec<Sample>,
    /// The initial point already violated the degenerate consistency rows.
    pub flagged_inconsistent: bool,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn max_consistency(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.consistency))
    }

    pub fn column(&self, f: impl Fn(&Sample) -> f64) -> Vec<f64> {
        self.samples.iter().map(f).collect()
    }
}

/// Integration stopped early; `partial` holds every accepted sample.
#[derive(Debug, thiserror::Error)]
#[error("integration stopped after {} samples: {error}", partial.samples.len())]
pub struct Interrupted {
    pub partial: Trajectory,
    pub error: Error,
}

impl From<Interrupted> for Error {
    fn from(i: Interrupted) -> Error {
        i.error
    }
}

struct Evaluated {
    dq: Vec<f64>,
    dp: Vec<f64>,
    v: Vec<f64>,
    h: f64,
    consistency: f64,
}

fn evaluate(ct: &ClairautTransform, gauge: &GaugeInput, t: f64, pt: &PhasePoint) -> Result<Evaluated> {
    let d = ct.physical(pt)?;
    let dv = degenerate_velocities_of(ct, &d, gauge, t)?;
    let (dq, dp) = phase_velocity(ct, &d, &dv.v);
    Ok(Evaluated { dq, dp, h: d.h, consistency: dv.residual, v: dv.v })
}

/// Fixed-step fourth-order Runge–Kutta over `(q^A, p_i)`.
pub fn integrate(
    ct: &ClairautTransform,
    initial: &PhasePoint,
    gauge: &GaugeInput,
    cfg: &IntegratorConfig,
) -> std::result::Result<Trajectory, Interrupted> {
    let mut traj = Trajectory { dt: cfg.dt, samples: Vec::new(), flagged_inconsistent: false };
    let fail = |traj: Trajectory, error: Error| Interrupted { partial: traj, error };
    let steps = match cfg.steps() {
        Ok(s) => s,
        Err(e) => return Err(fail(traj, e)),
    };
    let mut ct_local;
    let ct = if ct.newton != cfg.newton {
        ct_local = ct.clone();
        ct_local.newton = cfg.newton;
        &ct_local
    } else {
        ct
    };
    let mut pt = PhasePoint { q: initial.q.clone(), p: initial.p.clone(), v_deg: initial.v_deg.clone() };
    let mut cur = match evaluate(ct, gauge, cfg.t0, &pt) {
        Ok(e) => e,
        Err(e) => return Err(fail(traj, e)),
    };
    traj.flagged_inconsistent = cur.consistency > cfg.consistency_tol;
    let dt = cfg.dt;
    for k in 0..=steps {
        let t = cfg.t0 + k as f64 * dt;
        pt.v_deg = cur.v.clone();
        traj.samples.push(Sample {
            t,
            q: pt.q.clone(),
            p: pt.p.clone(),
            v: cur.v.clone(),
            h_phys: cur.h,
            consistency: cur.consistency,
        });
        if !traj.flagged_inconsistent && cur.consistency > cfg.consistency_tol {
            return Err(fail(traj, Error::Inconsistent { t, residual: cur.consistency }));
        }
        if k == steps {
            break;
        }
        let stage = |src: &Evaluated, h: f64| PhasePoint {
            q: pt.q.iter().zip(&src.dq).map(|(a, b)| a + h * b).collect(),
            p: pt.p.iter().zip(&src.dp).map(|(a, b)| a + h * b).collect(),
            v_deg: src.v.clone(),
        };
        let step = (|| -> Result<(PhasePoint, Evaluated)> {
            let k2 = evaluate(ct, gauge, t + dt / 2.0, &stage(&cur, dt / 2.0))?;
            let k3 = evaluate(ct, gauge, t + dt / 2.0, &stage(&k2, dt / 2.0))?;
            let k4 = evaluate(ct, gauge, t + dt, &stage(&k3, dt))?;
            let combine = |x: &[f64], a: &[f64], b: &[f64], c: &[f64], d: &[f64]| -> Vec<f64> {
                (0..x.len()).map(|i| x[i] + dt / 6.0 * (a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i])).collect()
            };
            let next = PhasePoint {
                q: combine(&pt.q, &cur.dq, &k2.dq, &k3.dq, &k4.dq),
                p: combine(&pt.p, &cur.dp, &k2.dp, &k3.dp, &k4.dp),
                v_deg: k4.v.clone(),
            };
            let e = evaluate(ct, gauge, t + dt, &next)?;
            Ok((next, e))
        })();
        match step {
            Ok((next, e)) => {
                pt = next;
                cur = e;
            }
            Err(e) => return Err(fail(traj, e)),
        }
    }
    Ok(traj)
}

/// Second-order time derivative of uniformly sampled values.
pub fn time_derivative(values: &[f64], dt: f64) -> Vec<f64> {
    let n = values.len();
    assert!(n >= 3, "need at least three samples");
    (0..n)
        .map(|k| {
            if k == 0 {
                (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * dt)
            } else if k == n - 1 {
                (3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) / (2.0 * dt)
            } else {
                (values[k + 1] - values[k - 1]) / (2.0 * dt)
            }
        })
        .collect()
}

/// Per-sample `max_B |d/dt ∂L/∂v^B − ∂L/∂q^B|` along the trajectory.
///
/// Regular velocities are resolved from the recorded `(q, p, v^α)`.
pub fn el_residual(ct: &ClairautTransform, traj: &Trajectory) -> Result<Vec<f64>> {
    if traj.samples.len() < 3 {
        return Err(Error::Usage("Euler–Lagrange residual needs at least three samples".into()));
    }
    let n = ct.n();
    let mut momenta = vec![Vec::with_capacity(traj.samples.len()); n];
    let mut forces = Vec::with_capacity(traj.samples.len());
    for s in &traj.samples {
        let v_reg = ct.resolve_regular_velocities(&s.point())?;
        let mut v = vec![0.0; n];
        for (k, &a) in ct.split.regular_idx.iter().enumerate() {
            v[a] = v_reg[k];
        }
        for (k, &a) in ct.split.degenerate_idx.iter().enumerate() {
            v[a] = s.v[k];
        }
        for (b, pb) in ct.lagrangian_dv(&s.q, &v)?.into_iter().enumerate() {
            momenta[b].push(pb);
        }
        forces.push(ct.lagrangian_dq(&s.q, &v)?);
    }
    let rates: Vec<Vec<f64>> = momenta.iter().map(|m| time_derivative(m, traj.dt)).collect();
    Ok((0..traj.samples.len())
        .map(|k| (0..n).fold(0.0, |m: f64, b| m.max((rates[b][k] - forces[k][b]).abs())))
        .collect())
}

/// `dX/dt` predicted from the brackets at a point with degenerate velocities `v`.
///
/// `{X,H}` corrected on the solved block, plus the prescribed-gauge terms
/// and the explicit `∂X/∂q^α v^α`.
pub fn predicted_rate(
    ct: &ClairautTransform,
    x: &dyn PhaseFunction,
    pt: &PhasePoint,
    v: &[f64],
    gauge: &GaugeInput,
) -> Result<f64> {
    let d = ct.physical(pt)?;
    let gx = x.gradient(ct, pt)?;
    predicted_rate_of(ct, &d, &gx, v, gauge)
}

fn predicted_rate_of(
    ct: &ClairautTransform,
    d: &PhysicalData,
    gx: &Gradient,
    v: &[f64],
    gauge: &GaugeInput,
) -> Result<f64> {
    let (s, free) = (gauge.solve_set(), gauge.free_set());
    let mut rate = corrected_bracket(ct, d, gx, &h_gradient(d), &s)?;
    let xb: Vec<f64> = (0..ct.n_deg()).map(|a| poisson(ct, gx, &b_gradient(d, a))).collect();
    if !s.is_empty() && !free.is_empty() {
        let f = field_strength_of(ct, d);
        let lu = Lu::new(&select(&f, &s, &s)).ok_or_else(|| Error::Singular(format!("F block on {s:?}")))?;
        let coupling: Vec<f64> =
            s.iter().map(|&a| free.iter().map(|&b| f[a][b] * v[b]).sum()).collect();
        let w = lu.solve(&coupling);
        rate += s.iter().zip(&w).map(|(&a, w)| xb[a] * w).sum::<f64>();
    }
    rate -= free.iter().map(|&b| xb[b] * v[b]).sum::<f64>();
    rate += ct.split.degenerate_idx.iter().zip(v).map(|(&al, va)| gx.dq[al] * va).sum::<f64>();
    Ok(rate)
}

/// Per-sample `|dX/dt − predicted_rate|` with `dX/dt` from time differences.
pub fn evolve_observable(
    ct: &ClairautTransform,
    x: &dyn PhaseFunction,
    traj: &Trajectory,
    gauge: &GaugeInput,
) -> Result<Vec<f64>> {
    if traj.samples.len() < 3 {
        return Err(Error::Usage("observable evolution needs at least three samples".into()));
    }
    let mut values = Vec::with_capacity(traj.samples.len());
    let mut predicted = Vec::with_capacity(traj.samples.len());
    for s in &traj.samples {
        let pt = s.point();
        values.push(x.value(ct, &pt)?);
        let d = ct.physical(&pt)?;
        predicted.push(predicted_rate_of(ct, &d, &x.gradient(ct, &pt)?, &s.v, gauge)?);
    }
    Ok(time_derivative(&values, traj.dt).iter().zip(&predicted).map(|(a, b)| (a - b).abs()).collect())
}

/// First-order formulation on the full phase space at one point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiracReport {
    /// `Φ_α = p_α − B_α`.
    pub phi: Vec<f64>,
    pub h_total: f64,
    /// `max |{Φ_α,Φ_β}_full − F_αβ|`.
    pub constraint_algebra: f64,
    /// `{Φ_α, H_phys}_full`.
    pub phi_h: Vec<f64>,
    /// `max |{Φ_α,H_phys}_full − σ D_α H_phys|`.
    pub hamiltonian_identity: f64,
    pub sigma: f64,
    /// `{Φ_α, H_T}_full` at the supplied velocities.
    pub second_stage: Vec<f64>,
}

/// Gradient on `(q^A, p_A)`; `p` in model order.
struct FullGradient {
    dq: Vec<f64>,
    dp: Vec<f64>,
}

fn full_bracket(x: &FullGradient, y: &FullGradient) -> f64 {
    (0..x.dq.len()).map(|a| x.dq[a] * y.dp[a] - y.dq[a] * x.dp[a]).sum()
}

fn lift(ct: &ClairautTransform, g: &Gradient) -> FullGradient {
    let mut dp = vec![0.0; ct.n()];
    for (i, &a) in ct.split.regular_idx.iter().enumerate() {
        dp[a] = g.dp[i];
    }
    FullGradient { dq: g.dq.clone(), dp }
}

/// Dirac-side quantities with degenerate momenta `p_deg` (default `B_α`).
pub fn dirac_report(
    ct: &ClairautTransform,
    pt: &PhasePoint,
    v_deg: &[f64],
    p_deg: Option<&[f64]>,
) -> Result<DiracReport> {
    let m = ct.n_deg();
    if v_deg.len() != m || p_deg.is_some_and(|p| p.len() != m) {
        return Err(Error::Usage(format!("need {m} degenerate velocities and momenta")));
    }
    let d = ct.physical(pt)?;
    let p_deg: Vec<f64> = p_deg.map_or_else(|| d.b.clone(), <[f64]>::to_vec);
    let phi: Vec<f64> = (0..m).map(|k| p_deg[k] - d.b[k]).collect();
    let h_total = d.h + (0..m).map(|k| v_deg[k] * phi[k]).sum::<f64>();

    let phi_grad: Vec<FullGradient> = (0..m)
        .map(|k| {
            let mut g = lift(ct, &b_gradient(&d, k));
            g.dq.iter_mut().chain(g.dp.iter_mut()).for_each(|x| *x = -*x);
            g.dp[ct.split.degenerate_idx[k]] = 1.0;
            g
        })
        .collect();
    let h_grad = lift(ct, &h_gradient(&d));
    let mut ht_grad = FullGradient { dq: h_grad.dq.clone(), dp: h_grad.dp.clone() };
    for (k, g) in phi_grad.iter().enumerate() {
        for a in 0..ct.n() {
            ht_grad.dq[a] += v_deg[k] * g.dq[a];
            ht_grad.dp[a] += v_deg[k] * g.dp[a];
        }
    }

    let f = field_strength_of(ct, &d);
    let dh = long_derivatives_of_h(ct, &d);
    let mut constraint_algebra: f64 = 0.0;
    for a in 0..m {
        for b in 0..m {
            constraint_algebra = constraint_algebra.max((full_bracket(&phi_grad[a], &phi_grad[b]) - f[a][b]).abs());
        }
    }
    let phi_h: Vec<f64> = phi_grad.iter().map(|g| full_bracket(g, &h_grad)).collect();
    let hamiltonian_identity = (0..m).fold(0.0, |acc: f64, a| acc.max((phi_h[a] - DIRAC_SIGN * dh[a]).abs()));
    let second_stage = phi_grad.iter().map(|g| full_bracket(g, &ht_grad)).collect();
    Ok(DiracReport { phi, h_total, constraint_algebra, phi_h, hamiltonian_identity, sigma: DIRAC_SIGN, second_stage })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::gauge::{classify, HPhys, Observable, DEFAULT_F_RANK_TOL};

    fn load(name: &str) -> ClairautTransform {
        ClairautTransform::from_model(fixtures::load(name).unwrap(), 42).unwrap()
    }

    fn cls_at(ct: &ClairautTransform, pts: &[PhasePoint]) -> GaugeClassification {
        classify(ct, pts, DEFAULT_F_RANK_TOL).unwrap()
    }

    #[test]
    fn oscillator_is_harmonic() {
        let ct = load("oscillator");
        let cls = cls_at(&ct, &[PhasePoint::new(vec![0.3], vec![0.1])]);
        assert_eq!(cls.kind, GaugeKind::Gaugeless);
        let gauge = GaugeInput::default_for(&cls, 0);
        let traj = integrate(&ct, &PhasePoint::new(vec![1.0], vec![0.0]), &gauge, &IntegratorConfig::new(0.0, 1.0, 1e-3))
            .unwrap();
        let last = traj.samples.last().unwrap();
        assert_eq!(traj.samples.len(), 1001);
        assert!((last.t - 1.0).abs() < 1e-12);
        assert!((last.q[0] - 1f64.cos()).abs() < 1e-8);
        let el = el_residual(&ct, &traj).unwrap();
        assert!(el.iter().all(|r| *r <= 1e-5));
        let energy = evolve_observable(&ct, &HPhys, &traj, &gauge).unwrap();
        assert!(energy.iter().all(|r| *r <= 1e-5));
    }

    #[test]
    fn cawley_velocity_and_trajectory() {
        let ct = load("cawley");
        let y = 0.8;
        let pt = PhasePoint::new(vec![0.1, y, 0.3], vec![0.2, -0.5]);
        let cls = cls_at(&ct, std::slice::from_ref(&pt));
        assert_eq!(cls.kind, GaugeKind::Limit);
        let gauge = GaugeInput::from_specs(&ct, &cls, &[("z".into(), "1".into())]).unwrap();
        let dv = degenerate_velocities(&ct, &pt, &gauge, 0.0).unwrap();
        assert_eq!(dv.v, [1.0]);
        assert!((dv.residual - y * y / 2.0).abs() < 1e-14);

        let start = PhasePoint::new(vec![0.0, 0.0, 0.0], vec![0.0, 0.7]);
        let traj = integrate(&ct, &start, &gauge, &IntegratorConfig::new(0.0, 5.0, 1e-3)).unwrap();
        assert!(!traj.flagged_inconsistent);
        for s in &traj.samples {
            assert!((s.q[0] - 0.7 * s.t).abs() < 1e-6);
            assert_eq!(s.q[1], 0.0);
            assert!((s.q[2] - s.t).abs() < 1e-9);
        }
        assert!(el_residual(&ct, &traj).unwrap().iter().all(|r| *r <= 1e-5));
    }

    #[test]
    fn inconsistent_start_is_flagged_not_halted() {
        let ct = load("cawley");
        let start = PhasePoint::new(vec![0.0, 0.5, 0.0], vec![0.0, 0.0]);
        let cls = cls_at(&ct, std::slice::from_ref(&start));
        let gauge = GaugeInput::default_for(&cls, 1);
        let traj = integrate(&ct, &start, &gauge, &IntegratorConfig::new(0.0, 0.1, 1e-2)).unwrap();
        assert!(traj.flagged_inconsistent);
        assert!((traj.samples[0].consistency - 0.125).abs() < 1e-14);
    }

    #[test]
    fn particle_residual_vanishes_and_momenta_are_constant() {
        let ct = load("particle");
        let pt = PhasePoint::new(vec![0.0; 4], vec![3.0, 0.0, 4.0]);
        let cls = cls_at(&ct, std::slice::from_ref(&pt));
        let gauge = GaugeInput::from_specs(&ct, &cls, &[("x0".into(), "1 + 0.1*sin(t)".into())]).unwrap();
        let dv = degenerate_velocities(&ct, &pt, &gauge, 0.0).unwrap();
        assert_eq!(dv.residual, 0.0);
        let traj = integrate(&ct, &pt, &gauge, &IntegratorConfig::new(0.0, 1.0, 1e-2)).unwrap();
        let last = traj.samples.last().unwrap();
        for (a, b) in last.p.iter().zip(&pt.p) {
            assert!((a - b).abs() < 1e-12);
        }
        let e = 50f64.sqrt();
        let x0 = last.q[0];
        assert!((last.q[1] - 3.0 / e * x0).abs() < 1e-10);
    }

    #[test]
    fn synthetic_gaugeless_velocities_and_evolution() {
        let ct = load("synthetic_gaugeless");
        let (x, a, p) = (1.2, 0.5, -0.7);
        let pt = PhasePoint::new(vec![x, a, 0.0], vec![p]);
        let cls = cls_at(&ct, std::slice::from_ref(&pt));
        let gauge = GaugeInput::default_for(&cls, 2);
        let dv = degenerate_velocities(&ct, &pt, &gauge, 0.0).unwrap();
        assert!((dv.v[0] + a * p / x).abs() < 1e-14);
        assert!(dv.v[1].abs() < 1e-14);
        assert!(dv.residual <= 1e-10);

        let traj = integrate(&ct, &pt, &gauge, &IntegratorConfig::new(0.0, 1.0, 1e-3)).unwrap();
        let px = Observable::parse(&ct, "p_x").unwrap();
        let res = evolve_observable(&ct, &px, &traj, &gauge).unwrap();
        assert!(res.iter().all(|r| *r <= 1e-5));
        let xa = Observable::parse(&ct, "x*a").unwrap();
        // ax is conserved since d(ax)/dt is the b equation of motion
        let first = traj.samples[0].q[0] * traj.samples[0].q[1];
        for s in &traj.samples {
            assert!((s.q[0] * s.q[1] - first).abs() < 1e-9);
        }
        assert!(evolve_observable(&ct, &xa, &traj, &gauge).unwrap().iter().all(|r| *r <= 1e-5));
        assert!(el_residual(&ct, &traj).unwrap().iter().all(|r| *r <= 1e-5));
    }

    #[test]
    fn gauge_fixture_with_prescribed_free_directions() {
        let ct = load("synthetic_gauge");
        let pt = PhasePoint::new(vec![0.9, 0.4, 0.1, -0.2, 0.3], vec![0.5]);
        let cls = cls_at(&ct, std::slice::from_ref(&pt));
        assert_eq!(cls.kind, GaugeKind::Gauge);
        let free = cls.free_directions(4);
        let specs: Vec<(String, String)> = free
            .iter()
            .map(|&k| (ct.split.degenerate[k].clone(), "0.3*cos(t)".to_string()))
            .collect();
        let gauge = GaugeInput::from_specs(&ct, &cls, &specs).unwrap();
        let traj = integrate(&ct, &pt, &gauge, &IntegratorConfig::new(0.0, 1.0, 1e-3)).unwrap();
        assert!(traj.max_consistency() < 1e-9);
        let x = Observable::parse(&ct, "p_x*a + x*b").unwrap();
        assert!(evolve_observable(&ct, &x, &traj, &gauge).unwrap().iter().all(|r| *r <= 1e-5));
        assert!(el_residual(&ct, &traj).unwrap().iter().all(|r| *r <= 1e-5));
    }

    #[test]
    fn gauge_input_validation() {
        let ct = load("cawley");
        let pt = PhasePoint::new(vec![0.1, 0.2, 0.3], vec![0.2, -0.5]);
        let cls = cls_at(&ct, std::slice::from_ref(&pt));
        assert!(GaugeInput::from_specs(&ct, &cls, &[("x".into(), "1".into())]).is_err());
        assert!(GaugeInput::from_specs(&ct, &cls, &[("z".into(), "y".into())]).is_err());
        let bad = GaugeInput { modes: vec![GaugeMode::Solve] };
        assert!(bad.validate(&cls).is_err());
        let cfg = IntegratorConfig::new(0.0, 1.0, 0.0);
        assert!(matches!(cfg.steps(), Err(Error::Usage(_))));
    }

    #[test]
    fn dirac_correspondence() {
        let ct = load("cawley");
        let pt = PhasePoint::new(vec![0.1, 0.6, 0.3], vec![0.2, -0.5]);
        let rep = dirac_report(&ct, &pt, &[0.4], Some(&[0.0])).unwrap();
        assert_eq!(rep.phi, [0.0]);
        assert_eq!(rep.h_total, ct.eval_h_phys(&pt).unwrap());
        assert_eq!(rep.constraint_algebra, 0.0);
        assert!(rep.hamiltonian_identity < 1e-15);

        let cl = load("christ_lee");
        let (x, p) = ([0.3, -0.2, 0.5], [0.2, 0.1, -0.3]);
        let pt = PhasePoint::new(vec![x[0], x[1], x[2], 0.1, 0.4, -0.7], p.to_vec());
        let rep = dirac_report(&cl, &pt, &[0.0; 3], Some(&[0.0; 3])).unwrap();
        let cross = [p[1] * x[2] - p[2] * x[1], p[2] * x[0] - p[0] * x[2], p[0] * x[1] - p[1] * x[0]];
        for k in 0..3 {
            assert!((rep.phi_h[k].abs() - cross[k].abs()).abs() < 1e-12);
        }
        assert!(rep.hamiltonian_identity < 1e-12);

        let sg = load("synthetic_bianchi");
        let pt = PhasePoint::new(vec![0.7, -0.4, 0.3, 0.5, -0.2], vec![0.6, -0.3]);
        let rep = dirac_report(&sg, &pt, &[0.1, 0.2, 0.3], None).unwrap();
        assert!(rep.constraint_algebra <= 1e-9);
        assert!(rep.hamiltonian_identity <= 1e-9);
    }

    #[test]
    fn second_stage_vanishes_on_solved_velocities() {
        let ct = load("synthetic_gaugeless");
        let pt = PhasePoint::new(vec![1.2, 0.5, 0.0], vec![-0.7]);
        let cls = cls_at(&ct, std::slice::from_ref(&pt));
        let dv = degenerate_velocities(&ct, &pt, &GaugeInput::default_for(&cls, 2), 0.0).unwrap();
        let rep = dirac_report(&ct, &pt, &dv.v, None).unwrap();
        assert!(norm_inf(&rep.second_stage) < 1e-14);
    }
}

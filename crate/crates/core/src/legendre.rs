//! The mixed Legendre–Clairaut transform.
//!
//! Regular velocities `V^i` are resolved from `p_i = ∂L/∂v^i` at fixed
//! coordinates and degenerate velocities. Everything else (`H_phys`, `B_α`,
//! `H_mix` and their first derivatives) follows from `V` through envelope and
//! implicit-function identities, so no finite differences are involved.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{differentiate, CompiledExpr, EvalError};
use crate::linalg::{self, select, Lu, Matrix};
use crate::model::{
    generate_probes, split_variables, LagrangianModel, VariableSplit, DEFAULT_PROBES,
    DEFAULT_RANK_TOL,
};
use crate::newton::{self, NewtonConfig};

/// State `(q^A, p_i, v^α)`.
///
/// `q` holds all coordinates in the model's order, `p` the regular momenta
/// in `split.regular` order and `v_deg` the degenerate velocities in
/// `split.degenerate` order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhasePoint {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub v_deg: Vec<f64>,
}

impl PhasePoint {
    pub fn new(q: Vec<f64>, p: Vec<f64>) -> PhasePoint {
        PhasePoint { q, p, v_deg: Vec::new() }
    }

    pub fn with_v_deg(mut self, v_deg: Vec<f64>) -> PhasePoint {
        self.v_deg = v_deg;
        self
    }
}

/// Physical quantities and their gradients at one phase point.
#[derive(Clone, Debug, PartialEq)]
pub struct PhysicalData {
    /// Resolved regular velocities at `v_ref`.
    pub v_reg: Vec<f64>,
    /// Degenerate velocities the data was evaluated at.
    pub v_ref: Vec<f64>,
    pub h: f64,
    pub b: Vec<f64>,
    /// `∂H_phys/∂q^A`, all `n` coordinates.
    pub dh_dq: Vec<f64>,
    /// `∂H_phys/∂p_i`.
    pub dh_dp: Vec<f64>,
    /// `∂B_α/∂q^A`, `(n−r) × n`.
    pub db_dq: Matrix,
    /// `∂B_α/∂p_i`, `(n−r) × r`.
    pub db_dp: Matrix,
}

/// Evaluator bundle for one model and split.
#[derive(Clone, Debug)]
pub struct ClairautTransform {
    pub model: LagrangianModel,
    pub split: VariableSplit,
    pub newton: NewtonConfig,
    l: CompiledExpr,
    l_v: Vec<CompiledExpr>,
    l_q: Vec<CompiledExpr>,
    w: Vec<Vec<CompiledExpr>>,
    /// `∂²L/∂v^A∂q^B`.
    l_vq: Vec<Vec<CompiledExpr>>,
    params: Vec<f64>,
}

impl ClairautTransform {
    pub fn new(model: LagrangianModel, split: VariableSplit) -> Result<ClairautTransform> {
        Self::with_config(model, split, NewtonConfig::default())
    }

    pub fn with_config(
        model: LagrangianModel,
        split: VariableSplit,
        newton: NewtonConfig,
    ) -> Result<ClairautTransform> {
        if !(newton.tol > 0.0) {
            return Err(Error::Usage("Newton tolerance must be positive".into()));
        }
        let names = model.slot_names();
        let compile = |e: &crate::expr::Expr| CompiledExpr::compile_with_names(e, &names);
        let vel = model.velocity_names();
        let lag = &model.lagrangian;
        let first_v: Vec<_> = vel.iter().map(|v| differentiate(lag, v)).collect();
        let l_v = first_v.iter().map(compile).collect::<std::result::Result<_, _>>()?;
        let l_q = model
            .coords
            .iter()
            .map(|c| compile(&differentiate(lag, c)))
            .collect::<std::result::Result<_, _>>()?;
        let second = |wrt: &[String]| -> std::result::Result<Vec<Vec<CompiledExpr>>, EvalError> {
            first_v
                .iter()
                .map(|d| wrt.iter().map(|s| compile(&differentiate(d, s))).collect())
                .collect()
        };
        let w = second(&vel)?;
        let l_vq = second(&model.coords)?;
        Ok(ClairautTransform {
            l: compile(lag)?,
            l_v,
            l_q,
            w,
            l_vq,
            params: model.params.iter().map(|(_, v)| *v).collect(),
            model,
            split,
            newton,
        })
    }

    /// Splits `model` on seeded random probes and builds the transform.
    pub fn from_model(model: LagrangianModel, seed: u64) -> Result<ClairautTransform> {
        let probes = generate_probes(&model, DEFAULT_PROBES, seed)?;
        let split = split_variables(&model, &probes, DEFAULT_RANK_TOL)?;
        ClairautTransform::new(model, split)
    }

    pub fn n(&self) -> usize {
        self.model.n()
    }

    pub fn r(&self) -> usize {
        self.split.r
    }

    pub fn n_deg(&self) -> usize {
        self.split.n_deg()
    }

    fn check_dims(&self, pt: &PhasePoint) -> Result<()> {
        if pt.q.len() != self.n() || pt.p.len() != self.r() {
            return Err(Error::Usage(format!(
                "phase point has {} coordinates and {} momenta, expected {} and {}",
                pt.q.len(),
                pt.p.len(),
                self.n(),
                self.r()
            )));
        }
        if !pt.q.iter().chain(&pt.p).all(|x| x.is_finite()) {
            return Err(Error::Usage("phase point has non-finite entries".into()));
        }
        Ok(())
    }

    /// Slot vector `[q, v, params]` for the given regular and degenerate velocities.
    pub fn slots(&self, q: &[f64], v_reg: &[f64], v_deg: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut s = Vec::with_capacity(2 * n + self.params.len());
        s.extend_from_slice(q);
        s.resize(2 * n, 0.0);
        for (k, &a) in self.split.regular_idx.iter().enumerate() {
            s[n + a] = v_reg[k];
        }
        for (k, &a) in self.split.degenerate_idx.iter().enumerate() {
            s[n + a] = v_deg.get(k).copied().unwrap_or(0.0);
        }
        s.extend_from_slice(&self.params);
        s
    }

    /// `L(q, v)` with `v` in original coordinate order.
    pub fn lagrangian(&self, q: &[f64], v: &[f64]) -> Result<f64> {
        let mut s = q.to_vec();
        s.extend_from_slice(v);
        s.extend_from_slice(&self.params);
        Ok(self.l.eval(&s)?)
    }

    /// `∂L/∂q^A` with `v` in original coordinate order.
    pub fn lagrangian_dq(&self, q: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        let mut s = q.to_vec();
        s.extend_from_slice(v);
        s.extend_from_slice(&self.params);
        Ok(self.l_q.iter().map(|e| e.eval(&s)).collect::<std::result::Result<_, _>>()?)
    }

    /// `∂L/∂v^A` with `v` in original coordinate order.
    pub fn lagrangian_dv(&self, q: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        let mut s = q.to_vec();
        s.extend_from_slice(v);
        s.extend_from_slice(&self.params);
        Ok(self.l_v.iter().map(|e| e.eval(&s)).collect::<std::result::Result<_, _>>()?)
    }

    fn eval_vec(es: &[CompiledExpr], idx: &[usize], s: &[f64]) -> std::result::Result<Vec<f64>, EvalError> {
        idx.iter().map(|&a| es[a].eval(s)).collect()
    }

    fn eval_mat(es: &[Vec<CompiledExpr>], s: &[f64]) -> std::result::Result<Matrix, EvalError> {
        es.iter().map(|row| row.iter().map(|e| e.eval(s)).collect()).collect()
    }

    /// Solves `p_i = ∂L/∂v^i` for `V^i` at `pt.q` and `pt.v_deg`.
    pub fn resolve_regular_velocities(&self, pt: &PhasePoint) -> Result<Vec<f64>> {
        self.check_dims(pt)?;
        self.resolve_at(&pt.q, &pt.p, &pt.v_deg)
    }

    fn resolve_at(&self, q: &[f64], p: &[f64], v_deg: &[f64]) -> Result<Vec<f64>> {
        let r = self.r();
        if r == 0 {
            return Ok(Vec::new());
        }
        let reg = &self.split.regular_idx;
        let system = |v: &[f64]| {
            let s = self.slots(q, v, v_deg);
            let lv = Self::eval_vec(&self.l_v, reg, &s)?;
            let res: Vec<f64> = lv.iter().zip(p).map(|(a, b)| a - b).collect();
            let jac: Matrix = reg
                .iter()
                .map(|&i| reg.iter().map(|&j| self.w[i][j].eval(&s)).collect())
                .collect::<std::result::Result<_, _>>()?;
            Ok((res, jac))
        };
        let out = newton::solve(system, &vec![0.0; r], linalg::norm_inf(p), &self.newton)?;
        Ok(out.x)
    }

    /// Physical data at the degenerate velocities `v_deg` exactly.
    pub fn physical_at(&self, pt: &PhasePoint, v_deg: &[f64]) -> Result<PhysicalData> {
        self.check_dims(pt)?;
        let v_reg = self.resolve_at(&pt.q, &pt.p, v_deg)?;
        self.assemble(pt, v_reg, v_deg.to_vec())
    }

    /// Physical data at a reference degenerate velocity.
    ///
    /// `H_phys` and `B_α` do not depend on `v^α`. The reference is the first
    /// of `0`, `1` (all components) and `pt.v_deg` at which the supremum
    /// condition resolves; `0` fails for Lagrangians that are singular there.
    pub fn physical(&self, pt: &PhasePoint) -> Result<PhysicalData> {
        self.check_dims(pt)?;
        let k = self.n_deg();
        let mut candidates = vec![vec![0.0; k]];
        if k > 0 {
            candidates.push(vec![1.0; k]);
            if pt.v_deg.len() == k {
                candidates.push(pt.v_deg.clone());
            }
        }
        let mut last = None;
        for v in candidates {
            match self.resolve_at(&pt.q, &pt.p, &v) {
                Ok(v_reg) => match self.assemble(pt, v_reg, v) {
                    Ok(d) => return Ok(d),
                    Err(e) => last = Some(e),
                },
                Err(e) => last = Some(e),
            }
        }
        Err(last.expect("at least one candidate"))
    }

    fn assemble(&self, pt: &PhasePoint, v_reg: Vec<f64>, v_ref: Vec<f64>) -> Result<PhysicalData> {
        let n = self.n();
        let (reg, deg) = (&self.split.regular_idx, &self.split.degenerate_idx);
        let s = self.slots(&pt.q, &v_reg, &v_ref);
        let l = self.l.eval(&s)?;
        let l_q: Vec<f64> = self.l_q.iter().map(|e| e.eval(&s)).collect::<std::result::Result<_, _>>()?;
        let b = Self::eval_vec(&self.l_v, deg, &s)?;
        let w = Self::eval_mat(&self.w, &s)?;
        let l_vq = Self::eval_mat(&self.l_vq, &s)?;

        let (dv_dq, w_rr_inv) = if reg.is_empty() {
            (vec![Vec::new(); n], Vec::new())
        } else {
            let lu = Lu::new(&select(&w, reg, reg))
                .ok_or_else(|| Error::Singular("regular Hessian block W_ij".into()))?;
            // dv_dq[A] = ∂V/∂q^A
            let dv_dq: Vec<Vec<f64>> = (0..n)
                .map(|a| lu.solve(&reg.iter().map(|&i| -l_vq[i][a]).collect::<Vec<_>>()))
                .collect();
            (dv_dq, lu.inverse())
        };

        let db_dq: Matrix = deg
            .iter()
            .map(|&al| {
                (0..n)
                    .map(|a| l_vq[al][a] + reg.iter().enumerate().map(|(j, &rj)| w[al][rj] * dv_dq[a][j]).sum::<f64>())
                    .collect()
            })
            .collect();
        let db_dp: Matrix = deg
            .iter()
            .map(|&al| {
                (0..reg.len())
                    .map(|i| reg.iter().enumerate().map(|(j, &rj)| w[al][rj] * w_rr_inv[j][i]).sum())
                    .collect()
            })
            .collect();

        let pv: f64 = pt.p.iter().zip(&v_reg).map(|(a, b)| a * b).sum();
        let bv: f64 = b.iter().zip(&v_ref).map(|(a, b)| a * b).sum();
        let h = pv + bv - l;
        let dh_dq: Vec<f64> = (0..n)
            .map(|a| -l_q[a] + (0..deg.len()).map(|k| v_ref[k] * db_dq[k][a]).sum::<f64>())
            .collect();
        let dh_dp: Vec<f64> = (0..reg.len())
            .map(|i| v_reg[i] + (0..deg.len()).map(|k| v_ref[k] * db_dp[k][i]).sum::<f64>())
            .collect();
        let all_finite = std::iter::once(h)
            .chain(b.iter().copied())
            .chain(dh_dq.iter().copied())
            .chain(dh_dp.iter().copied())
            .chain(db_dq.iter().flatten().copied())
            .chain(db_dp.iter().flatten().copied())
            .all(f64::is_finite);
        if !all_finite {
            return Err(Error::Eval(EvalError::Domain { op: "non-finite physical data", value: h }));
        }
        Ok(PhysicalData { v_reg, v_ref, h, b, dh_dq, dh_dp, db_dq, db_dp })
    }

    pub fn eval_b(&self, pt: &PhasePoint) -> Result<Vec<f64>> {
        Ok(self.physical(pt)?.b)
    }

    pub fn eval_h_phys(&self, pt: &PhasePoint) -> Result<f64> {
        Ok(self.physical(pt)?.h)
    }

    /// `(∂H_phys/∂q^A, ∂H_phys/∂p_i)`.
    pub fn grad_h_phys(&self, pt: &PhasePoint) -> Result<(Vec<f64>, Vec<f64>)> {
        let d = self.physical(pt)?;
        Ok((d.dh_dq, d.dh_dp))
    }

    /// `(∂B_α/∂q^A, ∂B_α/∂p_i)`.
    pub fn grad_b(&self, pt: &PhasePoint) -> Result<(Matrix, Matrix)> {
        let d = self.physical(pt)?;
        Ok((d.db_dq, d.db_dp))
    }

    /// `H_mix = H_phys + Σ_β (p̄_β − B_β) v^β` with `v^β = pt.v_deg`.
    pub fn eval_h_mix(&self, pt: &PhasePoint, pbar: &[f64]) -> Result<f64> {
        let d = self.physical(pt)?;
        if pbar.len() != self.n_deg() || pt.v_deg.len() != self.n_deg() {
            return Err(Error::Usage("p̄ and v_deg need one entry per degenerate coordinate".into()));
        }
        Ok(d.h + (0..pbar.len()).map(|k| (pbar[k] - d.b[k]) * pt.v_deg[k]).sum::<f64>())
    }

    /// Residual of the Clairaut equation for the mixed solution at `(q, p̄)`.
    ///
    /// `pbar` has one entry per coordinate in model order; regular entries
    /// act as the momenta `p_i`. The degenerate constants `c^α = ∂H/∂p̄_α`
    /// are `v_deg` (zero when empty).
    pub fn clairaut_residual(&self, q: &[f64], pbar: &[f64], v_deg: &[f64]) -> Result<f64> {
        if pbar.len() != self.n() {
            return Err(Error::Usage("p̄ needs one entry per coordinate".into()));
        }
        let p: Vec<f64> = self.split.regular_idx.iter().map(|&a| pbar[a]).collect();
        let c: Vec<f64> = if v_deg.is_empty() { vec![0.0; self.n_deg()] } else { v_deg.to_vec() };
        let pt = PhasePoint { q: q.to_vec(), p, v_deg: c.clone() };
        let d = self.physical(&pt)?;
        let mut h = d.h;
        let mut grad = vec![0.0; self.n()];
        for (k, &al) in self.split.degenerate_idx.iter().enumerate() {
            h += (pbar[al] - d.b[k]) * c[k];
            grad[al] = c[k];
        }
        for (i, &a) in self.split.regular_idx.iter().enumerate() {
            grad[a] = d.dh_dp[i] - (0..c.len()).map(|k| c[k] * d.db_dp[k][i]).sum::<f64>();
        }
        clairaut_residual_of(self, q, pbar, h, &grad)
    }
}

/// `|H − Σ p̄_B ∂H/∂p̄_B + L(q, ∂H/∂p̄)|` for a candidate value and p̄-gradient.
pub fn clairaut_residual_of(
    ct: &ClairautTransform,
    q: &[f64],
    pbar: &[f64],
    h: f64,
    grad: &[f64],
) -> Result<f64> {
    let pg: f64 = pbar.iter().zip(grad).map(|(a, b)| a * b).sum();
    Ok((h - pg + ct.lagrangian(q, grad)?).abs())
}

/// Numeric Legendre–Fenchel conjugate `sup_v (p·v − L(q, v))`.
///
/// Independent oracle for nondegenerate models: stationary points of
/// `p·v − L` are found by Newton from a grid of starts in `[-2, 2]^n` and
/// the largest value at a strict local maximum is returned.
pub fn fenchel_conjugate(
    model: &LagrangianModel,
    q: &[f64],
    p: &[f64],
    cfg: &NewtonConfig,
) -> Result<f64> {
    let n = model.n();
    let names = model.slot_names();
    let vel = model.velocity_names();
    let compile = |e: &crate::expr::Expr| CompiledExpr::compile_with_names(e, &names);
    let lag = compile(&model.lagrangian)?;
    let first: Vec<_> = vel.iter().map(|v| differentiate(&model.lagrangian, v)).collect();
    let grad = first.iter().map(compile).collect::<std::result::Result<Vec<_>, _>>()?;
    let hess = first
        .iter()
        .map(|d| vel.iter().map(|v| compile(&differentiate(d, v))).collect())
        .collect::<std::result::Result<Vec<Vec<_>>, _>>()?;
    let params: Vec<f64> = model.params.iter().map(|(_, v)| *v).collect();
    let slots = |v: &[f64]| -> Vec<f64> { q.iter().chain(v).chain(&params).copied().collect() };
    let system = |v: &[f64]| {
        let s = slots(v);
        let g: Vec<f64> = grad.iter().zip(p).map(|(e, pb)| Ok(e.eval(&s)? - pb)).collect::<std::result::Result<_, EvalError>>()?;
        let h: Matrix = hess
            .iter()
            .map(|row| row.iter().map(|e| e.eval(&s)).collect())
            .collect::<std::result::Result<_, _>>()?;
        Ok((g, h))
    };
    let single = NewtonConfig { restarts: 0, ..*cfg };
    let grid = [-2.0, -1.0, 0.0, 1.0, 2.0];
    let mut best: Option<f64> = None;
    for k in 0..grid.len().pow(n as u32) {
        let start: Vec<f64> = (0..n).map(|d| grid[(k / grid.len().pow(d as u32)) % grid.len()]).collect();
        let Ok(out) = newton::solve(&system, &start, linalg::norm_inf(p), &single) else {
            continue;
        };
        let s = slots(&out.x);
        let Ok(w) = hess.iter().map(|row| row.iter().map(|e| e.eval(&s)).collect()).collect::<std::result::Result<Matrix, _>>() else {
            continue;
        };
        // strict maximum of p·v − L needs W positive definite
        if !positive_definite(&w) {
            continue;
        }
        let Ok(l) = lag.eval(&s) else { continue };
        let value = p.iter().zip(&out.x).map(|(a, b)| a * b).sum::<f64>() - l;
        best = Some(best.map_or(value, |b: f64| b.max(value)));
    }
    best.ok_or_else(|| Error::NoConvergence { iterations: cfg.max_iter, residual: f64::NAN })
}

fn positive_definite(a: &Matrix) -> bool {
    // Cholesky
    let n = a.len();
    let mut l = linalg::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - s;
                if !(d > 0.0) {
                    return false;
                }
                l[i][j] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    true
}

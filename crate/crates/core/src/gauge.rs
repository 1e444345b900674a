//! Degenerate-sector structure: the physical Poisson bracket, long
//! derivatives `D_α`, the field strength `F_αβ`, classification and the
//! corrected brackets.
//!
//! Degenerate indices `α` are positions in `split.degenerate`; regular
//! momenta follow `split.regular`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{differentiate, parse_expression, CompiledExpr, Expr};
use crate::legendre::{ClairautTransform, PhasePoint, PhysicalData};
use crate::linalg::{self, pivoted_rank, select, Lu, Matrix};
use crate::model::generate_probes;

pub const DEFAULT_F_RANK_TOL: f64 = 1e-9;
/// Absolute floor below which an `F` entry counts as zero.
pub const F_ABS_FLOOR: f64 = 1e-12;
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Partial derivatives of a phase-space function.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient {
    /// `∂/∂q^A`, all coordinates in model order.
    pub dq: Vec<f64>,
    /// `∂/∂p_i`, regular momenta.
    pub dp: Vec<f64>,
}

/// A scalar function of `(q^A, p_i)`.
pub trait PhaseFunction {
    fn value(&self, ct: &ClairautTransform, pt: &PhasePoint) -> Result<f64>;
    fn gradient(&self, ct: &ClairautTransform, pt: &PhasePoint) -> Result<Gradient>;
}

/// Name of the momentum conjugate to `coord` in observable expressions.
pub fn momentum_symbol(coord: &str) -> String {
    format!("p_{coord}")
}

/// Symbolic function of coordinates, regular momenta `p_<coord>` and parameters.
#[derive(Clone, Debug)]
pub struct Observable {
    pub expr: Expr,
    value: CompiledExpr,
    dq: Vec<CompiledExpr>,
    dp: Vec<CompiledExpr>,
}

impl Observable {
    pub fn new(ct: &ClairautTransform, expr: Expr) -> Result<Observable> {
        let names = observable_slots(ct);
        for s in expr.free_symbols() {
            if !names.contains(&s) {
                return Err(Error::Model(format!("observable uses unknown symbol '{s}'")));
            }
        }
        let compile = |e: &Expr| CompiledExpr::compile_with_names(e, &names);
        let dq = ct
            .model
            .coords
            .iter()
            .map(|c| compile(&differentiate(&expr, c)))
            .collect::<std::result::Result<_, _>>()?;
        let dp = ct
            .split
            .regular
            .iter()
            .map(|c| compile(&differentiate(&expr, &momentum_symbol(c))))
            .collect::<std::result::Result<_, _>>()?;
        Ok(Observable { value: compile(&expr)?, dq, dp, expr })
    }

    pub fn parse(ct: &ClairautTransform, text: &str) -> Result<Observable> {
        Observable::new(ct, parse_expression(text)?)
    }

    fn slots(ct: &ClairautTransform, pt: &PhasePoint) -> Vec<f64> {
        let mut s = pt.q.clone();
        s.extend_from_slice(&pt.p);
        s.extend(ct.model.params.iter().map(|(_, v)| *v));
        s
    }
}

fn observable_slots(ct: &ClairautTransform) -> Vec<String> {
    let mut names = ct.model.coords.clone();
    names.extend(ct.split.regular.iter().map(|c| momentum_symbol(c)));
    names.extend(ct.model.params.iter().map(|(p, _)| p.clone()));
    names
}

impl PhaseFunction for Observable {
    fn value(&self, ct: &ClairautTransform, pt: &PhasePoint) -> Result<f64> {
        Ok(self.value.eval(&Observable::slots(ct, pt))?)
    }

    fn gradient(&self, ct: &ClairautTransform, pt: &PhasePoint) -> Result<Gradient> {
        let s = Observable::slots(ct, pt);
        let eval = |es: &[CompiledExpr]| es.iter().map(|e| e.eval(&s)).collect::<std::result::Result<Vec<_>, _>>();
        Ok(Gradient { dq: eval(&self.dq)?, dp: eval(&self.dp)? })
    }
}

/// `H_phys` with analytic gradient.
pub struct HPhys;

impl PhaseFunction for HPhys {
    fn value(&self, ct: &ClairautTransform, pt: &PhasePoint) -> Result<f64> {
        ct.eval_h_phys(pt)
    }

    fn gradient(&self, ct: &ClairautTransform, pt: &PhasePoint) -> Result<Gradient> {
        let d = ct.physical(pt)?;
        Ok(h_gradient(&d))
    }
}

/// `B_α` with analytic gradient.
pub struct BComponent(pub usize);

impl PhaseFunction for BComponent {
    fn value(&self, ct: &ClairautTransform, pt: &PhasePoint) -> Result<f64> {
        Ok(ct.physical(pt)?.b[self.0])
    }

    fn gradient(&self, ct: &ClairautTransform, pt: &PhasePoint) -> Result<Gradient> {
        Ok(b_gradient(&ct.physical(pt)?, self.0))
    }
}

/// Any scalar function of the phase point, differentiated by central differences.
pub struct FiniteDiff<F> {
    pub f: F,
    pub step: f64,
}

impl<F> PhaseFunction for FiniteDiff<F>
where
    F: Fn(&PhasePoint) -> Result<f64>,
{
    fn value(&self, _: &ClairautTransform, pt: &PhasePoint) -> Result<f64> {
        (self.f)(pt)
    }

    fn gradient(&self, _: &ClairautTransform, pt: &PhasePoint) -> Result<Gradient> {
        let g = fd_gradients(&|p: &PhasePoint| Ok(vec![(self.f)(p)?]), pt, self.step)?;
        Ok(g.into_iter().next().expect("one component"))
    }
}

pub fn h_gradient(d: &PhysicalData) -> Gradient {
    Gradient { dq: d.dh_dq.clone(), dp: d.dh_dp.clone() }
}

pub fn b_gradient(d: &PhysicalData, k: usize) -> Gradient {
    Gradient { dq: d.db_dq[k].clone(), dp: d.db_dp[k].clone() }
}

/// Central-difference gradients of every component of a vector-valued
/// function, with step `h·(1 + |x|)` per variable.
pub fn fd_gradients(
    f: &dyn Fn(&PhasePoint) -> Result<Vec<f64>>,
    pt: &PhasePoint,
    h: f64,
) -> Result<Vec<Gradient>> {
    let (n, r) = (pt.q.len(), pt.p.len());
    let mut out: Option<Vec<Gradient>> = None;
    for var in 0..n + r {
        let mut plus = pt.clone();
        let mut minus = pt.clone();
        let (x, xp, xm) = if var < n {
            (pt.q[var], &mut plus.q[var], &mut minus.q[var])
        } else {
            (pt.p[var - n], &mut plus.p[var - n], &mut minus.p[var - n])
        };
        let step = h * (1.0 + x.abs());
        *xp = x + step;
        *xm = x - step;
        let (fp, fm) = (f(&plus)?, f(&minus)?);
        let grads = out.get_or_insert_with(|| {
            vec![Gradient { dq: vec![0.0; n], dp: vec![0.0; r] }; fp.len()]
        });
        for (k, g) in grads.iter_mut().enumerate() {
            let d = (fp[k] - fm[k]) / (2.0 * step);
            if var < n {
                g.dq[var] = d;
            } else {
                g.dp[var - n] = d;
            }
        }
    }
    Ok(out.unwrap_or_default())
}

/// `Σ_i (∂X/∂q^i ∂Y/∂p_i − ∂Y/∂q^i ∂X/∂p_i)` over regular indices.
pub fn poisson(ct: &ClairautTransform, gx: &Gradient, gy: &Gradient) -> f64 {
    ct.split
        .regular_idx
        .iter()
        .enumerate()
        .map(|(i, &a)| gx.dq[a] * gy.dp[i] - gy.dq[a] * gx.dp[i])
        .sum()
}

pub fn poisson_phys(
    ct: &ClairautTransform,
    x: &dyn PhaseFunction,
    y: &dyn PhaseFunction,
    pt: &PhasePoint,
) -> Result<f64> {
    Ok(poisson(ct, &x.gradient(ct, pt)?, &y.gradient(ct, pt)?))
}

/// `D_α X = ∂X/∂q^α + {B_α, X}` from precomputed pieces.
pub fn long_derivative_of(ct: &ClairautTransform, d: &PhysicalData, gx: &Gradient, k: usize) -> f64 {
    gx.dq[ct.split.degenerate_idx[k]] + poisson(ct, &b_gradient(d, k), gx)
}

pub fn long_derivative(
    ct: &ClairautTransform,
    x: &dyn PhaseFunction,
    k: usize,
    pt: &PhasePoint,
) -> Result<f64> {
    let d = ct.physical(pt)?;
    Ok(long_derivative_of(ct, &d, &x.gradient(ct, pt)?, k))
}

/// `δ_{B_α} X = {B_α, X}`.
pub fn delta_b(ct: &ClairautTransform, k: usize, x: &dyn PhaseFunction, pt: &PhasePoint) -> Result<f64> {
    let d = ct.physical(pt)?;
    Ok(poisson(ct, &b_gradient(&d, k), &x.gradient(ct, pt)?))
}

/// `D_α H_phys` for every degenerate index.
pub fn long_derivatives_of_h(ct: &ClairautTransform, d: &PhysicalData) -> Vec<f64> {
    let gh = h_gradient(d);
    (0..ct.n_deg()).map(|k| long_derivative_of(ct, d, &gh, k)).collect()
}

/// `F_αβ = ∂B_β/∂q^α − ∂B_α/∂q^β + {B_α, B_β}`, upper triangle mirrored.
pub fn field_strength_of(ct: &ClairautTransform, d: &PhysicalData) -> Matrix {
    let deg = &ct.split.degenerate_idx;
    let m = deg.len();
    let mut f = linalg::zeros(m, m);
    for a in 0..m {
        for b in a + 1..m {
            let v = d.db_dq[b][deg[a]] - d.db_dq[a][deg[b]]
                + poisson(ct, &b_gradient(d, a), &b_gradient(d, b));
            f[a][b] = v;
            f[b][a] = -v;
        }
    }
    f
}

pub fn field_strength(ct: &ClairautTransform, pt: &PhasePoint) -> Result<Matrix> {
    Ok(field_strength_of(ct, &ct.physical(pt)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GaugeKind {
    Gaugeless,
    Gauge,
    Limit,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GaugeClassification {
    pub kind: GaugeKind,
    pub r_f: usize,
    /// Degenerate indices of the nonsingular `r_f × r_f` block, sorted.
    pub subblock: Vec<usize>,
    /// Rank of `F` at each probe.
    pub ranks: Vec<usize>,
}

impl GaugeClassification {
    /// Degenerate indices outside the solvable block.
    pub fn free_directions(&self, n_deg: usize) -> Vec<usize> {
        (0..n_deg).filter(|k| !self.subblock.contains(k)).collect()
    }
}

/// Classifies the theory from the rank of `F` at the probes.
pub fn classify(ct: &ClairautTransform, probes: &[PhasePoint], tol: f64) -> Result<GaugeClassification> {
    if probes.is_empty() {
        return Err(Error::Usage("probe list is empty".into()));
    }
    let m = ct.n_deg();
    let mut ranks = Vec::with_capacity(probes.len());
    let mut subblock = None;
    let mut fs = Vec::with_capacity(probes.len());
    for pt in probes {
        let f = field_strength(ct, pt)?;
        let info = pivoted_rank(&f, tol, F_ABS_FLOOR);
        ranks.push(info.rank);
        subblock.get_or_insert_with(|| {
            let mut s = info.pivot_cols.clone();
            s.sort_unstable();
            s
        });
        fs.push(f);
    }
    if let Some(k) = ranks.iter().position(|&r| r != ranks[0]) {
        return Err(Error::RankVaries { first: ranks[0], first_probe: 0, other: ranks[k], other_probe: k });
    }
    let r_f = ranks[0];
    let subblock = subblock.expect("probes are non-empty");
    for (k, f) in fs.iter().enumerate() {
        let block = select(f, &subblock, &subblock);
        if r_f > 0 && pivoted_rank(&block, tol, F_ABS_FLOOR).rank != r_f {
            return Err(Error::Singular(format!("F subblock {subblock:?} at probe {k}")));
        }
    }
    let kind = if r_f == m {
        GaugeKind::Gaugeless
    } else if r_f == 0 {
        GaugeKind::Limit
    } else {
        GaugeKind::Gauge
    };
    Ok(GaugeClassification { kind, r_f, subblock, ranks })
}

/// Seeded phase-space points: Lagrangian probes mapped through `p_i = ∂L/∂v^i`.
///
/// Points where the physical data cannot be evaluated are skipped.
pub fn phase_probes(ct: &ClairautTransform, count: usize, seed: u64) -> Result<Vec<PhasePoint>> {
    let mut out = Vec::with_capacity(count);
    for batch in 0..64u64 {
        let probes = generate_probes(&ct.model, count, seed.wrapping_add(batch.wrapping_mul(0x9e37_79b9)))?;
        for b in probes {
            let slots = ct.model.slots_from_bindings(&b)?;
            let (q, v) = (&slots[..ct.n()], &slots[ct.n()..2 * ct.n()]);
            let lv = ct.lagrangian_dv(q, v)?;
            let pt = PhasePoint {
                q: q.to_vec(),
                p: ct.split.regular_idx.iter().map(|&a| lv[a]).collect(),
                v_deg: ct.split.degenerate_idx.iter().map(|&a| v[a]).collect(),
            };
            if ct.physical(&pt).is_ok() {
                out.push(pt);
                if out.len() == count {
                    return Ok(out);
                }
            }
        }
    }
    Err(Error::Model(format!("found only {} of {count} admissible phase points", out.len())))
}

/// `{X,Y} − Σ {X,B_α} F̄^{αβ} D_β Y` with the sums restricted to `block`.
pub(crate) fn corrected_bracket(
    ct: &ClairautTransform,
    d: &PhysicalData,
    gx: &Gradient,
    gy: &Gradient,
    block: &[usize],
) -> Result<f64> {
    let base = poisson(ct, gx, gy);
    if block.is_empty() {
        return Ok(base);
    }
    let f = field_strength_of(ct, d);
    let inv = Lu::new(&select(&f, block, block))
        .ok_or_else(|| Error::Singular("field strength block".into()))?
        .inverse();
    let xb: Vec<f64> = block.iter().map(|&a| poisson(ct, gx, &b_gradient(d, a))).collect();
    let dy: Vec<f64> = block.iter().map(|&b| long_derivative_of(ct, d, gy, b)).collect();
    let mut corr = 0.0;
    for (i, xbi) in xb.iter().enumerate() {
        for (j, dyj) in dy.iter().enumerate() {
            corr += xbi * inv[i][j] * dyj;
        }
    }
    Ok(base - corr)
}

/// Bracket of the gaugeless case, with the inverse of the full `F`.
pub fn bracket_new(
    ct: &ClairautTransform,
    x: &dyn PhaseFunction,
    y: &dyn PhaseFunction,
    pt: &PhasePoint,
) -> Result<f64> {
    let d = ct.physical(pt)?;
    let all: Vec<usize> = (0..ct.n_deg()).collect();
    corrected_bracket(ct, &d, &x.gradient(ct, pt)?, &y.gradient(ct, pt)?, &all)
}

/// Bracket of the gauge and limit cases, restricted to the classification subblock.
pub fn bracket_gauge(
    ct: &ClairautTransform,
    x: &dyn PhaseFunction,
    y: &dyn PhaseFunction,
    pt: &PhasePoint,
    cls: &GaugeClassification,
) -> Result<f64> {
    let d = ct.physical(pt)?;
    corrected_bracket(ct, &d, &x.gradient(ct, pt)?, &y.gradient(ct, pt)?, &cls.subblock)
}

/// Bracket selected by the classification.
pub fn bracket_for(
    ct: &ClairautTransform,
    x: &dyn PhaseFunction,
    y: &dyn PhaseFunction,
    pt: &PhasePoint,
    cls: &GaugeClassification,
) -> Result<f64> {
    match cls.kind {
        GaugeKind::Gaugeless => bracket_new(ct, x, y, pt),
        GaugeKind::Gauge | GaugeKind::Limit => bracket_gauge(ct, x, y, pt, cls),
    }
}

fn flat_f(ct: &ClairautTransform) -> impl Fn(&PhasePoint) -> Result<Vec<f64>> + '_ {
    move |p: &PhasePoint| Ok(field_strength(ct, p)?.concat())
}

/// `D_γ F_αβ` for all index triples, as `out[γ][α][β]`.
fn long_derivatives_of_f(ct: &ClairautTransform, pt: &PhasePoint, h: f64) -> Result<Vec<Matrix>> {
    let m = ct.n_deg();
    let d = ct.physical(pt)?;
    let grads = fd_gradients(&flat_f(ct), pt, h)?;
    Ok((0..m)
        .map(|g| {
            (0..m)
                .map(|a| (0..m).map(|b| long_derivative_of(ct, &d, &grads[a * m + b], g)).collect())
                .collect()
        })
        .collect())
}

/// Current `J_β = Σ_α D_α F_αβ`, outer derivatives by central differences.
pub fn maxwell_current(ct: &ClairautTransform, pt: &PhasePoint, h: f64) -> Result<Vec<f64>> {
    let m = ct.n_deg();
    if m == 0 {
        return Ok(Vec::new());
    }
    let df = long_derivatives_of_f(ct, pt, h)?;
    Ok((0..m).map(|b| (0..m).map(|a| df[a][a][b]).sum()).collect())
}

/// Largest cyclic sum `D_α F_βγ + D_γ F_αβ + D_β F_γα` over index triples.
pub fn bianchi_residual(ct: &ClairautTransform, pt: &PhasePoint, h: f64) -> Result<f64> {
    let m = ct.n_deg();
    if m < 3 {
        return Ok(0.0);
    }
    let df = long_derivatives_of_f(ct, pt, h)?;
    let mut worst: f64 = 0.0;
    for a in 0..m {
        for b in a + 1..m {
            for c in b + 1..m {
                let s = df[a][b][c] + df[c][a][b] + df[b][c][a];
                worst = worst.max(s.abs());
            }
        }
    }
    Ok(worst)
}

/// `|(D_α D_β − D_β D_α) X − {F_αβ, X}|`.
pub fn commutator_defect(
    ct: &ClairautTransform,
    x: &dyn PhaseFunction,
    a: usize,
    b: usize,
    pt: &PhasePoint,
    h: f64,
) -> Result<f64> {
    let dx = |k: usize| move |p: &PhasePoint| Ok(vec![long_derivative(ct, x, k, p)?]);
    let g_dbx = fd_gradients(&dx(b), pt, h)?.remove(0);
    let g_dax = fd_gradients(&dx(a), pt, h)?.remove(0);
    let d = ct.physical(pt)?;
    let lhs = long_derivative_of(ct, &d, &g_dbx, a) - long_derivative_of(ct, &d, &g_dax, b);
    let g_f = fd_gradients(&|p: &PhasePoint| Ok(vec![field_strength(ct, p)?[a][b]]), pt, h)?.remove(0);
    let rhs = poisson(ct, &g_f, &x.gradient(ct, pt)?);
    Ok((lhs - rhs).abs())
}

/// `|D_α{B_β,B_γ} − {D_αB_β, B_γ} − {B_β, D_αB_γ}|`.
pub fn leibniz_defect(
    ct: &ClairautTransform,
    a: usize,
    b: usize,
    c: usize,
    pt: &PhasePoint,
    h: f64,
) -> Result<f64> {
    let d = ct.physical(pt)?;
    let bb = |p: &PhasePoint| {
        let d = ct.physical(p)?;
        Ok(vec![poisson(ct, &b_gradient(&d, b), &b_gradient(&d, c))])
    };
    let g_bb = fd_gradients(&bb, pt, h)?.remove(0);
    let lhs = long_derivative_of(ct, &d, &g_bb, a);
    let db = |k: usize| {
        move |p: &PhasePoint| {
            let d = ct.physical(p)?;
            Ok(vec![long_derivative_of(ct, &d, &b_gradient(&d, k), a)])
        }
    };
    let g_dab = fd_gradients(&db(b), pt, h)?.remove(0);
    let g_dac = fd_gradients(&db(c), pt, h)?.remove(0);
    let rhs = poisson(ct, &g_dab, &b_gradient(&d, c)) + poisson(ct, &b_gradient(&d, b), &g_dac);
    Ok((lhs - rhs).abs())
}

/// `|(δ_α δ_β − δ_β δ_α) B_γ − δ_{{B_α,B_β}} B_γ|`.
pub fn delta_commutator_defect(
    ct: &ClairautTransform,
    a: usize,
    b: usize,
    c: usize,
    pt: &PhasePoint,
    h: f64,
) -> Result<f64> {
    let d = ct.physical(pt)?;
    let pair = |i: usize, j: usize| {
        move |p: &PhasePoint| {
            let d = ct.physical(p)?;
            Ok(vec![poisson(ct, &b_gradient(&d, i), &b_gradient(&d, j))])
        }
    };
    let g_bc = fd_gradients(&pair(b, c), pt, h)?.remove(0);
    let g_ac = fd_gradients(&pair(a, c), pt, h)?.remove(0);
    let g_ab = fd_gradients(&pair(a, b), pt, h)?.remove(0);
    let lhs = poisson(ct, &b_gradient(&d, a), &g_bc) - poisson(ct, &b_gradient(&d, b), &g_ac);
    let rhs = poisson(ct, &g_ab, &b_gradient(&d, c));
    Ok((lhs - rhs).abs())
}

/// `|Σ_α D_α J_α|` with `J` itself from differences of step `inner`.
pub fn current_divergence(ct: &ClairautTransform, pt: &PhasePoint, inner: f64, outer: f64) -> Result<f64> {
    let m = ct.n_deg();
    if m == 0 {
        return Ok(0.0);
    }
    let d = ct.physical(pt)?;
    let grads = fd_gradients(&|p: &PhasePoint| maxwell_current(ct, p, inner), pt, outer)?;
    Ok((0..m).map(|a| long_derivative_of(ct, &d, &grads[a], a)).sum::<f64>().abs())
}

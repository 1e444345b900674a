//! Lagrangian models: the `.lag` front-end, the velocity Hessian and the
//! regular/degenerate split.
//!
//! ```text
//! # harmonic oscillator
//! coord x;
//! param m = 1;
//! param k = 1;
//! lagrangian = m*d(x)^2/2 - k*x^2/2;
//! ```
//!
//! Statements: `coord a, b;`, `param name = number;`, `degenerate { a };`
//! (pins the split, still verified) and exactly one `lagrangian = expr;`.

use std::collections::BTreeSet;
use std::path::Path;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{
    differentiate, velocity_coord, velocity_symbol, Bindings, CompiledExpr, Expr, Lexer,
    TokenKind, TokenStream,
};
use crate::linalg::{pivoted_rank, select, Matrix};

pub const DEFAULT_RANK_TOL: f64 = 1e-9;
pub const DEFAULT_PROBES: usize = 17;
const GUARD_RADIUS: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct LagrangianModel {
    pub coords: Vec<String>,
    /// Parameters in declaration order.
    pub params: Vec<(String, f64)>,
    pub lagrangian: Expr,
    /// Degenerate coordinates pinned by a `degenerate { .. };` statement.
    pub pinned_degenerate: Option<Vec<String>>,
}

impl LagrangianModel {
    /// Builds and validates a model from its parts.
    pub fn new(
        coords: Vec<String>,
        params: Vec<(String, f64)>,
        lagrangian: Expr,
        pinned_degenerate: Option<Vec<String>>,
    ) -> Result<LagrangianModel> {
        let model = LagrangianModel { coords, params, lagrangian, pinned_degenerate };
        model.validate()?;
        Ok(model)
    }

    pub fn n(&self) -> usize {
        self.coords.len()
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|(p, _)| p == name).map(|(_, v)| *v)
    }

    pub fn coord_index(&self, name: &str) -> Option<usize> {
        self.coords.iter().position(|c| c == name)
    }

    pub fn velocity_names(&self) -> Vec<String> {
        self.coords.iter().map(|c| velocity_symbol(c)).collect()
    }

    /// Slot order used by every compiled evaluator: coordinates, velocities, parameters.
    pub fn slot_names(&self) -> Vec<String> {
        let mut names = self.coords.clone();
        names.extend(self.velocity_names());
        names.extend(self.params.iter().map(|(p, _)| p.clone()));
        names
    }

    /// Slot vector for `b`; parameters default to the model's values.
    pub fn slots_from_bindings(&self, b: &Bindings) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(2 * self.n() + self.params.len());
        for name in self.coords.iter().cloned().chain(self.velocity_names()) {
            out.push(b.get(&name).ok_or(crate::expr::EvalError::Unbound(name))?);
        }
        for (p, v) in &self.params {
            out.push(b.get(p).unwrap_or(*v));
        }
        Ok(out)
    }

    fn validate(&self) -> Result<()> {
        if self.coords.is_empty() {
            return Err(Error::Model("at least one coordinate is required".into()));
        }
        let mut seen = BTreeSet::new();
        for name in self.coords.iter().chain(self.params.iter().map(|(p, _)| p)) {
            if !seen.insert(name.as_str()) {
                return Err(Error::Model(format!("'{name}' declared more than once")));
            }
        }
        for sym in self.lagrangian.free_symbols() {
            if let Some(c) = velocity_coord(&sym) {
                if self.coord_index(c).is_none() {
                    return Err(Error::Model(format!("d({c}) uses undeclared coordinate '{c}'")));
                }
            } else if !seen.contains(sym.as_str()) {
                let hint = if sym == "t" { " (time-dependent Lagrangians are not supported)" } else { "" };
                return Err(Error::Model(format!("unknown symbol '{sym}' in lagrangian{hint}")));
            }
        }
        if let Some(deg) = &self.pinned_degenerate {
            let mut pinned = BTreeSet::new();
            for c in deg {
                if self.coord_index(c).is_none() {
                    return Err(Error::Model(format!("degenerate '{c}' is not a coordinate")));
                }
                if !pinned.insert(c) {
                    return Err(Error::Model(format!("degenerate '{c}' listed twice")));
                }
            }
        }
        Ok(())
    }
}

/// Parses model source text.
pub fn parse_model(text: &str) -> Result<LagrangianModel> {
    let mut ts = TokenStream::new(Lexer::tokenize(text)?);
    let mut coords = Vec::new();
    let mut params = Vec::new();
    let mut lagrangian = None;
    let mut pinned = None;
    loop {
        let keyword = match ts.peek_kind().clone() {
            TokenKind::Eof => break,
            TokenKind::Ident(k) => k,
            _ => return Err(ts.error(&["'coord'", "'param'", "'degenerate'", "'lagrangian'"]).into()),
        };
        match keyword.as_str() {
            "coord" => {
                ts.advance();
                coords.push(ts.expect_ident()?);
                while *ts.peek_kind() == TokenKind::Comma {
                    ts.advance();
                    coords.push(ts.expect_ident()?);
                }
            }
            "param" => {
                ts.advance();
                let name = ts.expect_ident()?;
                ts.expect(TokenKind::Equals, "'='")?;
                let sign = if *ts.peek_kind() == TokenKind::Minus {
                    ts.advance();
                    -1.0
                } else {
                    1.0
                };
                let value = match ts.peek_kind().clone() {
                    TokenKind::Number(v) => v,
                    _ => return Err(ts.error(&["number"]).into()),
                };
                ts.advance();
                params.push((name, sign * value));
            }
            "degenerate" => {
                ts.advance();
                if pinned.is_some() {
                    return Err(Error::Model("more than one degenerate statement".into()));
                }
                ts.expect(TokenKind::LBrace, "'{'")?;
                let mut names = Vec::new();
                if *ts.peek_kind() != TokenKind::RBrace {
                    names.push(ts.expect_ident()?);
                    while *ts.peek_kind() == TokenKind::Comma {
                        ts.advance();
                        names.push(ts.expect_ident()?);
                    }
                }
                ts.expect(TokenKind::RBrace, "'}'")?;
                pinned = Some(names);
            }
            "lagrangian" => {
                ts.advance();
                if lagrangian.is_some() {
                    return Err(Error::Model("more than one lagrangian statement".into()));
                }
                ts.expect(TokenKind::Equals, "'='")?;
                lagrangian = Some(ts.parse_expr()?);
            }
            _ => return Err(ts.error(&["'coord'", "'param'", "'degenerate'", "'lagrangian'"]).into()),
        }
        ts.expect(TokenKind::Semi, "';'")?;
    }
    let lagrangian = lagrangian.ok_or_else(|| Error::Model("missing lagrangian statement".into()))?;
    LagrangianModel::new(coords, params, lagrangian, pinned)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<LagrangianModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    parse_model(&text)
}

/// Symbolic velocity Hessian `W_AB = ∂²L/∂v^A∂v^B`.
pub fn hessian_matrix(model: &LagrangianModel) -> Vec<Vec<Expr>> {
    let n = model.n();
    let vel = model.velocity_names();
    let first: Vec<Expr> = vel.iter().map(|v| differentiate(&model.lagrangian, v)).collect();
    let mut w = vec![vec![Expr::num(0.0); n]; n];
    for a in 0..n {
        for b in a..n {
            let e = differentiate(&first[a], &vel[b]);
            w[b][a] = e.clone();
            w[a][b] = e;
        }
    }
    w
}

/// Hessian compiled against [`LagrangianModel::slot_names`].
#[derive(Clone, Debug)]
pub struct HessianEvaluator {
    entries: Vec<Vec<CompiledExpr>>,
}

impl HessianEvaluator {
    pub fn new(model: &LagrangianModel) -> Result<HessianEvaluator> {
        let names = model.slot_names();
        let entries = hessian_matrix(model)
            .iter()
            .map(|row| row.iter().map(|e| CompiledExpr::compile_with_names(e, &names)).collect())
            .collect::<std::result::Result<_, _>>()?;
        Ok(HessianEvaluator { entries })
    }

    pub fn eval(&self, slots: &[f64]) -> Result<Matrix> {
        let mut out = Vec::with_capacity(self.entries.len());
        for row in &self.entries {
            out.push(row.iter().map(|e| e.eval(slots)).collect::<std::result::Result<Vec<_>, _>>()?);
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VariableSplit {
    pub r: usize,
    /// `permutation[A]` is the position of original coordinate `A` in the
    /// rearranged order (regular first, then degenerate).
    pub permutation: Vec<usize>,
    pub regular: Vec<String>,
    pub degenerate: Vec<String>,
    /// Original indices of the regular coordinates.
    pub regular_idx: Vec<usize>,
    pub degenerate_idx: Vec<usize>,
}

impl VariableSplit {
    /// Split from a set of regular coordinate indices; each class keeps the
    /// original coordinate order.
    pub fn from_regular(model: &LagrangianModel, regular: &BTreeSet<usize>) -> VariableSplit {
        let regular_idx: Vec<usize> = regular.iter().copied().collect();
        let degenerate_idx: Vec<usize> = (0..model.n()).filter(|a| !regular.contains(a)).collect();
        let mut permutation = vec![0; model.n()];
        for (pos, &a) in regular_idx.iter().chain(&degenerate_idx).enumerate() {
            permutation[a] = pos;
        }
        VariableSplit {
            r: regular_idx.len(),
            regular: regular_idx.iter().map(|&a| model.coords[a].clone()).collect(),
            degenerate: degenerate_idx.iter().map(|&a| model.coords[a].clone()).collect(),
            permutation,
            regular_idx,
            degenerate_idx,
        }
    }

    pub fn n(&self) -> usize {
        self.permutation.len()
    }

    pub fn n_deg(&self) -> usize {
        self.degenerate_idx.len()
    }

    /// Reorders values given in original coordinate order into regular-first order.
    pub fn apply<T: Clone>(&self, values: &[T]) -> Vec<T> {
        let mut out = values.to_vec();
        for (a, v) in values.iter().enumerate() {
            out[self.permutation[a]] = v.clone();
        }
        out
    }

    /// Inverse of [`VariableSplit::apply`].
    pub fn unapply<T: Clone>(&self, values: &[T]) -> Vec<T> {
        (0..values.len()).map(|a| values[self.permutation[a]].clone()).collect()
    }
}

fn probe_slots(model: &LagrangianModel, probes: &[Bindings]) -> Result<Vec<Vec<f64>>> {
    if probes.is_empty() {
        return Err(Error::Usage("probe list is empty".into()));
    }
    probes.iter().map(|b| model.slots_from_bindings(b)).collect()
}

/// Determines the Hessian rank and the regular/degenerate split.
pub fn split_variables(
    model: &LagrangianModel,
    probes: &[Bindings],
    tol: f64,
) -> Result<VariableSplit> {
    let slots = probe_slots(model, probes)?;
    let hess = HessianEvaluator::new(model)?;
    let mut ranks = Vec::with_capacity(slots.len());
    let mut first_info = None;
    for s in &slots {
        let info = pivoted_rank(&hess.eval(s)?, tol, 0.0);
        ranks.push(info.rank);
        first_info.get_or_insert(info);
    }
    if let Some(k) = ranks.iter().position(|&r| r != ranks[0]) {
        return Err(Error::RankVaries { first: ranks[0], first_probe: 0, other: ranks[k], other_probe: k });
    }
    let split = match &model.pinned_degenerate {
        Some(deg) => {
            let regular = (0..model.n()).filter(|&a| !deg.contains(&model.coords[a])).collect();
            VariableSplit::from_regular(model, &regular)
        }
        None => VariableSplit::from_regular(
            model,
            &first_info.expect("probes are non-empty").pivot_cols.into_iter().collect(),
        ),
    };
    let report = check_rank_constancy(model, &split, probes, tol)?;
    if !report.pass {
        let bad = report.minor_ok.iter().position(|ok| !ok).unwrap_or(0);
        return Err(Error::Model(format!(
            "regular block {:?} is not a nonsingular rank-{} minor at probe {bad} (rank {})",
            split.regular, split.r, report.ranks[bad]
        )));
    }
    Ok(split)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankReport {
    pub pass: bool,
    pub r: usize,
    pub ranks: Vec<usize>,
    /// Whether the regular block is a nonsingular minor at each probe.
    pub minor_ok: Vec<bool>,
}

/// Checks that the Hessian rank equals `split.r` and the regular block is
/// nonsingular at every probe. Failure is reported as data.
pub fn check_rank_constancy(
    model: &LagrangianModel,
    split: &VariableSplit,
    probes: &[Bindings],
    tol: f64,
) -> Result<RankReport> {
    let slots = probe_slots(model, probes)?;
    let hess = HessianEvaluator::new(model)?;
    let mut report = RankReport { pass: true, r: split.r, ranks: vec![], minor_ok: vec![] };
    for s in &slots {
        let w = hess.eval(s)?;
        let rank = pivoted_rank(&w, tol, 0.0).rank;
        let block = select(&w, &split.regular_idx, &split.regular_idx);
        // the block threshold is relative to the whole Hessian
        let scale = crate::linalg::max_abs(&w);
        let block_rank = pivoted_rank(&block, 0.0, tol * scale).rank;
        let ok = block_rank == split.r;
        report.pass &= ok && rank == split.r;
        report.ranks.push(rank);
        report.minor_ok.push(ok);
    }
    Ok(report)
}

/// Seeded random probes in `[-1, 1]` for coordinates and velocities,
/// keeping every domain guard of `L` and `W` at least 0.1 away from zero.
pub fn generate_probes(model: &LagrangianModel, count: usize, seed: u64) -> Result<Vec<Bindings>> {
    let names = model.slot_names();
    let mut guards = model.lagrangian.domain_guards();
    for row in hessian_matrix(model) {
        for e in row {
            for g in e.domain_guards() {
                if !guards.contains(&g) {
                    guards.push(g);
                }
            }
        }
    }
    let guards = guards
        .iter()
        .map(|g| CompiledExpr::compile_with_names(g, &names))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let hess = HessianEvaluator::new(model)?;
    let n = model.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut tries = 0usize;
    while out.len() < count {
        tries += 1;
        if tries > 100_000 * count.max(1) {
            return Err(Error::Model("could not find admissible probe points in [-1, 1]".into()));
        }
        let mut slots: Vec<f64> = (0..2 * n).map(|_| rng.random_range(-1.0..=1.0)).collect();
        slots.extend(model.params.iter().map(|(_, v)| *v));
        let admissible = guards
            .iter()
            .all(|g| g.eval(&slots).is_ok_and(|v| v.abs() >= GUARD_RADIUS))
            && model_value_ok(model, &names, &slots)
            && hess.eval(&slots).is_ok_and(|w| w.iter().flatten().all(|x| x.is_finite()));
        if admissible {
            out.push(names.iter().cloned().zip(slots).collect());
        }
    }
    Ok(out)
}

fn model_value_ok(model: &LagrangianModel, names: &[String], slots: &[f64]) -> bool {
    CompiledExpr::compile_with_names(&model.lagrangian, names)
        .and_then(|l| l.eval(slots))
        .is_ok_and(f64::is_finite)
}

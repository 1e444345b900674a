//! Command-line front end.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage or parse error,
//! 3 numeric failure.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::dynamics::{el_residual, integrate, GaugeInput, IntegratorConfig, Trajectory};
use crate::error::{Error, Result};
use crate::expr::Bindings;
use crate::gauge::{
    classify, field_strength_of, long_derivatives_of_h, momentum_symbol, phase_probes, GaugeClassification,
    GaugeKind, DEFAULT_F_RANK_TOL,
};
use crate::legendre::{ClairautTransform, PhasePoint};
use crate::model::{generate_probes, load_model, split_variables, LagrangianModel, DEFAULT_PROBES, DEFAULT_RANK_TOL};
use crate::pde::{self, ClairautProblem};
use crate::verify::{verify, VerifyConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "clairaut", version, about = "Mixed Legendre–Clairaut transform for singular Lagrangians")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Hessian rank, variable split and gauge classification.
    Analyze {
        model: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_PROBES)]
        probes: usize,
        #[arg(long, default_value_t = DEFAULT_RANK_TOL)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Physical Hamiltonian, B, F and the Clairaut residual at a point.
    Transform {
        model: PathBuf,
        /// Coordinates and regular momenta `p_<coord>`, e.g. "x=1,p_x=0".
        #[arg(long)]
        at: String,
        /// Degenerate velocities; default 1 for each.
        #[arg(long)]
        v: Option<String>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        json: bool,
    },
    /// Integrate the equations of motion and write a CSV trajectory.
    Simulate {
        model: PathBuf,
        /// Initial coordinates and regular momenta; unlisted entries start at 0.
        #[arg(long, default_value = "")]
        init: String,
        /// Prescribed degenerate velocities as functions of t, e.g. "x0=1+0.1*sin(t)".
        #[arg(long, default_value = "")]
        gauge: String,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        t0: f64,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        t1: f64,
        #[arg(long, default_value_t = 1e-3, allow_negative_numbers = true)]
        dt: f64,
        /// Bound on the Euler–Lagrange and consistency residuals.
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Run the property suite; exit 1 if any check fails.
    Verify {
        model: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        probes: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve a multidimensional Clairaut equation with f over z1..zn.
    Pde {
        #[arg(long)]
        f: String,
        #[arg(long, value_enum, default_value_t = PdeMode::Envelope)]
        mode: PdeMode,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 0)]
        s: usize,
        /// Constants "c1=..,c2=.."; the general mode needs all, the mixed mode those after s.
        #[arg(long, default_value = "")]
        c: String,
        /// Evaluation point "x1=..,x2=..".
        #[arg(long)]
        at: String,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PdeMode {
    General,
    Envelope,
    Mixed,
}

/// Parses `args` and runs; returns the exit code.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli, out, err),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
            } else {
                let _ = write!(out, "{text}");
            }
            code
        }
    }
}

pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = match cli.command {
        Command::Analyze { model, seed, probes, tol, out: path } => {
            analyze(&model, seed, probes, tol).and_then(|r| emit_json(&r, path.as_deref(), out)).map(|_| EXIT_OK)
        }
        Command::Transform { model, at, v, seed, json } => {
            transform(&model, &at, v.as_deref(), seed).and_then(|r| {
                if json {
                    emit_json(&r, None, out)
                } else {
                    write_out(out, &r.to_text())
                }
            })
            .map(|_| EXIT_OK)
        }
        Command::Simulate { model, init, gauge, t0, t1, dt, tol, seed, out: path, plot } => {
            simulate(&SimulateArgs { model, init, gauge, t0, t1, dt, tol, seed, out: path, plot }, out, err)
        }
        Command::Verify { model, seed, probes, out: path } => (|| {
            let m = load_model(&model)?;
            let label = model.file_name().map_or_else(|| model.display().to_string(), |f| f.to_string_lossy().into());
            let rep = verify(&m, &label, &VerifyConfig { seed, probes, ..VerifyConfig::default() })?;
            emit_json(&rep, path.as_deref(), out)?;
            Ok(if rep.all_pass { EXIT_OK } else { EXIT_FAILED })
        })(),
        Command::Pde { f, mode, n, s, c, at, json } => pde_cmd(&f, mode, n, s, &c, &at).and_then(|r| {
            if json {
                emit_json(&r, None, out)
            } else {
                write_out(out, &format!("y = {:.16e}\nresidual = {:.3e}\n", r.value, r.residual))
            }
        })
        .map(|_| EXIT_OK),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_usage() {
        EXIT_USAGE
    } else {
        EXIT_NUMERIC
    }
}

fn write_out(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).map_err(|source| Error::Io { path: "<stdout>".into(), source })
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

fn emit_json<T: Serialize>(value: &T, path: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
    text.push('\n');
    match path {
        Some(p) => write_file(p, &text),
        None => write_out(out, &text),
    }
}

fn bindings(text: &str, what: &str) -> Result<Bindings> {
    Bindings::parse_list(text).map_err(|e| Error::Usage(format!("--{what}: {e}")))
}

fn transform_for(model: LagrangianModel, seed: u64) -> Result<ClairautTransform> {
    ClairautTransform::from_model(model, seed)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassificationSummary {
    pub kind: GaugeKind,
    #[serde(rename = "rank_F")]
    pub rank_f: usize,
    /// Degenerate coordinates whose velocities are solved for.
    pub solved: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnalyzeReport {
    pub coords: Vec<String>,
    pub params: BTreeMap<String, f64>,
    pub hessian_rank: usize,
    pub regular: Vec<String>,
    pub degenerate: Vec<String>,
    /// Position of each original coordinate once the regular ones come first.
    pub permutation: Vec<usize>,
    pub pinned: bool,
    pub classification: ClassificationSummary,
    pub probes: usize,
    pub seed: u64,
    pub rank_tolerance: f64,
    pub f_rank_tolerance: f64,
}

fn summary(ct: &ClairautTransform, cls: &GaugeClassification) -> ClassificationSummary {
    ClassificationSummary {
        kind: cls.kind,
        rank_f: cls.r_f,
        solved: cls.subblock.iter().map(|&k| ct.split.degenerate[k].clone()).collect(),
    }
}

pub fn analyze(path: &Path, seed: u64, probes: usize, tol: f64) -> Result<AnalyzeReport> {
    if !(tol > 0.0) || probes == 0 {
        return Err(Error::Usage("--tol must be positive and --probes at least 1".into()));
    }
    let model = load_model(path)?;
    let lag_probes = generate_probes(&model, probes, seed)?;
    let split = split_variables(&model, &lag_probes, tol)?;
    let pinned = model.pinned_degenerate.is_some();
    let ct = ClairautTransform::new(model, split)?;
    let pts = phase_probes(&ct, probes, seed)?;
    let cls = classify(&ct, &pts, DEFAULT_F_RANK_TOL)?;
    Ok(AnalyzeReport {
        coords: ct.model.coords.clone(),
        params: ct.model.params.iter().cloned().collect(),
        hessian_rank: ct.r(),
        regular: ct.split.regular.clone(),
        degenerate: ct.split.degenerate.clone(),
        permutation: ct.split.permutation.clone(),
        pinned,
        classification: summary(&ct, &cls),
        probes,
        seed,
        rank_tolerance: tol,
        f_rank_tolerance: DEFAULT_F_RANK_TOL,
    })
}

/// Phase point from `name=value` bindings; missing entries fall back to `default`.
fn phase_point(ct: &ClairautTransform, b: &Bindings, default: Option<f64>) -> Result<PhasePoint> {
    let mut known: Vec<String> = ct.model.coords.clone();
    known.extend(ct.split.regular.iter().map(|c| momentum_symbol(c)));
    if let Some(bad) = b.names().find(|n| !known.iter().any(|k| k == n)) {
        let hint = if ct.split.degenerate.iter().any(|d| momentum_symbol(d) == bad) {
            " (momenta of degenerate coordinates are not phase-space variables)"
        } else {
            ""
        };
        return Err(Error::Usage(format!("unknown name '{bad}'{hint}")));
    }
    let get = |name: &str| -> Result<f64> {
        b.get(name)
            .or(default)
            .ok_or_else(|| crate::expr::EvalError::Unbound(name.to_string()).into())
    };
    let q = ct.model.coords.iter().map(|c| get(c)).collect::<Result<_>>()?;
    let p = ct.split.regular.iter().map(|c| get(&momentum_symbol(c))).collect::<Result<_>>()?;
    Ok(PhasePoint::new(q, p))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransformReport {
    pub regular: Vec<String>,
    pub degenerate: Vec<String>,
    pub h_phys: f64,
    pub b: BTreeMap<String, f64>,
    /// Rows and columns follow `degenerate`.
    pub f: Vec<Vec<f64>>,
    pub d_h: BTreeMap<String, f64>,
    pub v_regular: BTreeMap<String, f64>,
    pub v_degenerate: BTreeMap<String, f64>,
    pub clairaut_residual: f64,
}

impl TransformReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "H_phys = {:.17e}", self.h_phys);
        for (k, v) in &self.b {
            let _ = writeln!(s, "B_{k} = {v:.17e}");
        }
        for (k, v) in &self.d_h {
            let _ = writeln!(s, "D_{k} H_phys = {v:.17e}");
        }
        for (i, row) in self.f.iter().enumerate() {
            for (j, v) in row.iter().enumerate().skip(i + 1) {
                let _ = writeln!(s, "F_{}{} = {v:.17e}", self.degenerate[i], self.degenerate[j]);
            }
        }
        for (k, v) in &self.v_regular {
            let _ = writeln!(s, "v_{k} = {v:.17e}");
        }
        let _ = writeln!(s, "clairaut_residual = {:.3e}", self.clairaut_residual);
        s
    }
}

pub fn transform(path: &Path, at: &str, v: Option<&str>, seed: u64) -> Result<TransformReport> {
    let ct = transform_for(load_model(path)?, seed)?;
    let mut pt = phase_point(&ct, &bindings(at, "at")?, None)?;
    let vb = bindings(v.unwrap_or(""), "v")?;
    if let Some(bad) = vb.names().find(|n| !ct.split.degenerate.iter().any(|d| d == n)) {
        return Err(Error::Usage(format!("--v: '{bad}' is not a degenerate coordinate")));
    }
    let v_deg: Vec<f64> = ct.split.degenerate.iter().map(|d| vb.get(d).unwrap_or(1.0)).collect();
    pt.v_deg = v_deg.clone();
    let d = ct.physical(&pt)?;
    let v_reg = ct.resolve_regular_velocities(&pt)?;
    let mut pbar = vec![0.0; ct.n()];
    for (i, &a) in ct.split.regular_idx.iter().enumerate() {
        pbar[a] = pt.p[i];
    }
    for (k, &a) in ct.split.degenerate_idx.iter().enumerate() {
        pbar[a] = d.b[k];
    }
    let named = |names: &[String], vals: &[f64]| names.iter().cloned().zip(vals.iter().copied()).collect();
    Ok(TransformReport {
        regular: ct.split.regular.clone(),
        degenerate: ct.split.degenerate.clone(),
        h_phys: d.h,
        b: named(&ct.split.degenerate, &d.b),
        f: field_strength_of(&ct, &d),
        d_h: named(&ct.split.degenerate, &long_derivatives_of_h(&ct, &d)),
        v_regular: named(&ct.split.regular, &v_reg),
        v_degenerate: named(&ct.split.degenerate, &v_deg),
        clairaut_residual: ct.clairaut_residual(&pt.q, &pbar, &v_deg)?,
    })
}

pub struct SimulateArgs {
    pub model: PathBuf,
    pub init: String,
    pub gauge: String,
    pub t0: f64,
    pub t1: f64,
    pub dt: f64,
    pub tol: f64,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub plot: Option<PathBuf>,
}

fn gauge_specs(text: &str) -> Result<Vec<(String, String)>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            item.split_once('=')
                .map(|(a, b)| (a.trim().to_string(), b.trim().to_string()))
                .ok_or_else(|| Error::Usage(format!("--gauge: expected name=<expr in t>, got '{item}'")))
        })
        .collect()
}

/// Simulation result with its diagnostics.
pub struct Simulation {
    pub ct: ClairautTransform,
    pub classification: GaugeClassification,
    pub trajectory: Trajectory,
    pub el: Vec<f64>,
    /// Set when the integrator stopped early.
    pub error: Option<Error>,
}

pub fn run_simulation(a: &SimulateArgs) -> Result<Simulation> {
    if !(a.tol > 0.0) {
        return Err(Error::Usage("--tol must be positive".into()));
    }
    let cfg = IntegratorConfig::new(a.t0, a.t1, a.dt);
    cfg.steps()?;
    let ct = transform_for(load_model(&a.model)?, a.seed)?;
    let start = phase_point(&ct, &bindings(&a.init, "init")?, Some(0.0))?;
    let cls = classify(&ct, std::slice::from_ref(&start), DEFAULT_F_RANK_TOL)?;
    let gauge = GaugeInput::from_specs(&ct, &cls, &gauge_specs(&a.gauge)?)?;
    let (trajectory, error) = match integrate(&ct, &start, &gauge, &cfg) {
        Ok(t) => (t, None),
        Err(i) => (i.partial, Some(i.error)),
    };
    let el = if trajectory.samples.len() >= 3 {
        el_residual(&ct, &trajectory)?
    } else {
        vec![f64::NAN; trajectory.samples.len()]
    };
    Ok(Simulation { ct, classification: cls, trajectory, el, error })
}

/// `t,q:<name>…,p:<name>…,v:<name>…,H_phys,consistency_residual,el_residual`.
pub fn trajectory_csv(ct: &ClairautTransform, traj: &Trajectory, el: &[f64]) -> String {
    let mut cols = vec!["t".to_string()];
    cols.extend(ct.model.coords.iter().map(|c| format!("q:{c}")));
    cols.extend(ct.split.regular.iter().map(|c| format!("p:{c}")));
    cols.extend(ct.split.degenerate.iter().map(|c| format!("v:{c}")));
    cols.extend(["H_phys", "consistency_residual", "el_residual"].map(String::from));
    let mut s = cols.join(",");
    s.push('\n');
    for (k, smp) in traj.samples.iter().enumerate() {
        let row: Vec<String> = std::iter::once(smp.t)
            .chain(smp.q.iter().copied())
            .chain(smp.p.iter().copied())
            .chain(smp.v.iter().copied())
            .chain([smp.h_phys, smp.consistency, el.get(k).copied().unwrap_or(f64::NAN)])
            .map(|x| format!("{x:.16e}"))
            .collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

/// Polylines of every coordinate against `t`.
pub fn trajectory_svg(ct: &ClairautTransform, traj: &Trajectory) -> String {
    let (w, h, pad) = (640.0, 400.0, 40.0);
    let t = traj.times();
    let series: Vec<Vec<f64>> = (0..ct.n()).map(|a| traj.column(|s| s.q[a])).collect();
    let (tmin, tmax) = (t.first().copied().unwrap_or(0.0), t.last().copied().unwrap_or(1.0));
    let finite = series.iter().flatten().filter(|x| x.is_finite());
    let ymin = finite.clone().fold(f64::INFINITY, |a, b| a.min(*b));
    let ymax = finite.fold(f64::NEG_INFINITY, |a, b| a.max(*b));
    let (ymin, ymax) = if ymin < ymax { (ymin, ymax) } else { (ymin - 1.0, ymin + 1.0) };
    let tspan = if tmax > tmin { tmax - tmin } else { 1.0 };
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
         <rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"
    );
    let stride = (t.len() / 2000).max(1);
    for (k, ys) in series.iter().enumerate() {
        let pts: Vec<String> = t
            .iter()
            .zip(ys)
            .step_by(stride)
            .map(|(ti, yi)| {
                let x = pad + (ti - tmin) / tspan * (w - 2.0 * pad);
                let y = h - pad - (yi - ymin) / (ymax - ymin) * (h - 2.0 * pad);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = writeln!(
            s,
            "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"><title>{}</title></polyline>",
            colors[k % colors.len()],
            pts.join(" "),
            ct.model.coords[k]
        );
    }
    s.push_str("</svg>\n");
    s
}

fn simulate(a: &SimulateArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let sim = run_simulation(a)?;
    let csv = trajectory_csv(&sim.ct, &sim.trajectory, &sim.el);
    match &a.out {
        Some(p) => write_file(p, &csv)?,
        None => write_out(out, &csv)?,
    }
    if let Some(p) = &a.plot {
        write_file(p, &trajectory_svg(&sim.ct, &sim.trajectory))?;
    }
    let max_el = sim.el.iter().fold(0.0, |m: f64, x| if x.is_nan() { m } else { m.max(*x) });
    let max_cons = sim.trajectory.max_consistency();
    let _ = writeln!(
        err,
        "classification={:?} samples={} max_el_residual={max_el:.3e} max_consistency_residual={max_cons:.3e}{}",
        sim.classification.kind,
        sim.trajectory.samples.len(),
        if sim.trajectory.flagged_inconsistent { " (initial point violates the degenerate equations)" } else { "" }
    );
    if let Some(e) = sim.error {
        return Err(e);
    }
    Ok(if max_el > a.tol || max_cons > a.tol { EXIT_FAILED } else { EXIT_OK })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PdeReport {
    pub mode: PdeMode,
    pub n: usize,
    pub s: usize,
    pub x: Vec<f64>,
    pub value: f64,
    /// Residual of the equation at `x` by central differences.
    pub residual: f64,
}

fn indexed(b: &Bindings, prefix: char, range: std::ops::Range<usize>, what: &str) -> Result<Vec<f64>> {
    if let Some(bad) = b.names().find(|name| {
        !name.strip_prefix(prefix).and_then(|k| k.parse::<usize>().ok()).is_some_and(|k| k >= 1 && range.contains(&(k - 1)))
    }) {
        return Err(Error::Usage(format!("--{what}: unexpected name '{bad}'")));
    }
    range
        .map(|j| {
            let name = format!("{prefix}{}", j + 1);
            b.get(&name).ok_or_else(|| Error::Usage(format!("--{what}: missing {name}")))
        })
        .collect()
}

pub fn pde_cmd(f: &str, mode: PdeMode, n: Option<usize>, s: usize, c: &str, at: &str) -> Result<PdeReport> {
    let prob = ClairautProblem::parse(f, n)?;
    let n = prob.n;
    let x = indexed(&bindings(at, "at")?, 'x', 0..n, "at")?;
    let cb = bindings(c, "c")?;
    let cfg = crate::newton::NewtonConfig::default();
    let (s, y): (usize, Box<dyn Fn(&[f64]) -> Result<f64>>) = match mode {
        PdeMode::General => {
            let gen = pde::general_solution(&prob, &indexed(&cb, 'c', 0..n, "c")?)?;
            (0, Box::new(move |x: &[f64]| Ok(gen.eval(x))))
        }
        PdeMode::Envelope => {
            let p = prob.clone();
            (n, Box::new(move |x: &[f64]| pde::envelope_solution(&p, x, &cfg)))
        }
        PdeMode::Mixed => {
            if s > n {
                return Err(Error::Usage(format!("--s {s} exceeds the dimension {n}")));
            }
            let tail = indexed(&cb, 'c', s..n, "c")?;
            let p = prob.clone();
            (s, Box::new(move |x: &[f64]| pde::mixed_solution(&p, s, &tail, x, &cfg)))
        }
    };
    let value = y(&x)?;
    let residual = pde::equation_residual(&prob, &*y, &x, 1e-6)?;
    Ok(PdeReport { mode, n, s, x, value, residual })
}

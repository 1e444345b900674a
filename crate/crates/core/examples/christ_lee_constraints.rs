// Christ–Lee model: constraint preservation and the reduced Hamiltonian.

use clairaut::dynamics::{integrate, GaugeInput, IntegratorConfig};
use clairaut::fixtures;
use clairaut::gauge::{classify, DEFAULT_F_RANK_TOL};
use clairaut::legendre::ClairautTransform;
use clairaut::verify::{christ_lee_constraint, christ_lee_start};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let ct = ClairautTransform::from_model(fixtures::load("christ_lee")?, 42)?;
    let start = christ_lee_start();
    let cls = classify(&ct, std::slice::from_ref(&start), DEFAULT_F_RANK_TOL)?;
    let specs = [("y1", "0.3"), ("y2", "sin(t)"), ("y3", "0")].map(|(a, b)| (a.to_string(), b.to_string()));
    let gauge = GaugeInput::from_specs(&ct, &cls, &specs)?;
    let traj = integrate(&ct, &start, &gauge, &IntegratorConfig::new(0.0, 3.0, 1e-3))?;
    let drift = traj
        .samples
        .iter()
        .flat_map(|s| christ_lee_constraint(&s.point()))
        .fold(0.0, |m: f64, c| m.max(c.abs()));
    println!("{:?}; max constraint over t in [0, 3]: {drift:.2e}", cls.kind);

    let (g, lam) = (ct.model.param("g").unwrap_or(1.0), ct.model.param("lam").unwrap_or(0.0));
    let x2: f64 = start.q[..3].iter().map(|v| v * v).sum();
    let p_t = start.p[0] * x2.sqrt() / start.q[0];
    let reduced = p_t * p_t / 2.0 + g * x2 / 2.0 + lam * x2 * x2 / 4.0;
    println!("H_phys = {:.12}, reduced = {reduced:.12}", ct.eval_h_phys(&start)?);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}

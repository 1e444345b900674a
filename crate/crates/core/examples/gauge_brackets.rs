// Long derivatives, field strength and the corrected bracket.

use clairaut::fixtures;
use clairaut::gauge::{
    bracket_new, classify, field_strength, long_derivative, poisson_phys, HPhys, Observable, DEFAULT_F_RANK_TOL,
};
use clairaut::legendre::{ClairautTransform, PhasePoint};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let ct = ClairautTransform::from_model(fixtures::load("synthetic_gaugeless")?, 42)?;
    let pt = PhasePoint::new(vec![1.2, 0.5, -0.3], vec![0.4]);
    let cls = classify(&ct, std::slice::from_ref(&pt), DEFAULT_F_RANK_TOL)?;
    println!("{:?}, F = {:?}", cls.kind, field_strength(&ct, &pt)?);

    let x = Observable::parse(&ct, "x*p_x + a")?;
    for k in 0..ct.n_deg() {
        println!("D_{} X = {:.6}", ct.split.degenerate[k], long_derivative(&ct, &x, k, &pt)?);
    }
    println!("{{X, H}}     = {:.6}", poisson_phys(&ct, &x, &HPhys, &pt)?);
    println!("{{X, H}}_new = {:.6}", bracket_new(&ct, &x, &HPhys, &pt)?);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}

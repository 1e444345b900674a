// Physical Hamiltonian, B and the mixed Hamiltonian of the mixed model.

use clairaut::fixtures;
use clairaut::legendre::{ClairautTransform, PhasePoint};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let ct = ClairautTransform::from_model(fixtures::load("mixed")?, 42)?;
    println!("regular {:?}, degenerate {:?}", ct.split.regular, ct.split.degenerate);
    let pt = PhasePoint::new(vec![0.5, 1.5], vec![0.8]).with_v_deg(vec![0.3]);
    let d = ct.physical(&pt)?;
    println!("H_phys = {:.6}  B_y = {:.6}  v_x = {:.6}", d.h, d.b[0], d.v_reg[0]);
    println!("H_mix(pbar_y = 2) = {:.6}", ct.eval_h_mix(&pt, &[2.0])?);
    println!("Clairaut residual = {:.2e}", ct.clairaut_residual(&pt.q, &[0.8, 2.0], &[0.3])?);

    let exp = ClairautTransform::from_model(fixtures::load("exponential")?, 42)?;
    let (x, p) = (1.3, 0.7);
    let h = exp.eval_h_phys(&PhasePoint::new(vec![x], vec![p]))?;
    println!("exponential: H_phys = {h:.12}, closed form {:.12}", p * (p / x).ln() - p);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}

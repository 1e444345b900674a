// Primary constraints, their algebra and the total Hamiltonian.

use clairaut::dynamics::{dirac_report, DIRAC_SIGN};
use clairaut::fixtures;
use clairaut::legendre::{ClairautTransform, PhasePoint};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let ct = ClairautTransform::from_model(fixtures::load("synthetic_bianchi")?, 42)?;
    let pt = PhasePoint::new(vec![0.7, -0.4, 0.3, 0.5, -0.2], vec![0.6, -0.3]);
    let rep = dirac_report(&ct, &pt, &[0.1, 0.2, 0.3], Some(&[0.5, 0.0, -0.5]))?;
    println!("Phi = {:?}", rep.phi);
    println!("H_T = {:.6}", rep.h_total);
    println!("{{Phi, H}} = {:?} (sigma = {DIRAC_SIGN})", rep.phi_h);
    println!("constraint algebra defect {:.1e}, Hamiltonian defect {:.1e}", rep.constraint_algebra, rep.hamiltonian_identity);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}

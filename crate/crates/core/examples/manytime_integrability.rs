// Many-time Hamiltonians and the integrability matrix G.

use clairaut::fixtures;
use clairaut::gauge::phase_probes;
use clairaut::legendre::{ClairautTransform, PhasePoint};
use clairaut::manytime::{integrability_report, map_to_manytime};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let ct = ClairautTransform::from_model(fixtures::load("cawley")?, 42)?;
    let mts = map_to_manytime(&ct);
    let pt = PhasePoint::new(vec![0.2, 0.7, 1.3], vec![0.4, -0.9]);
    println!("times {:?}, H = {:?}", mts.time_labels(), mts.hamiltonians(&pt)?);
    println!("G = {:?}", mts.g_matrix(&pt)?);

    for name in ["particle", "synthetic_bianchi"] {
        let ct = ClairautTransform::from_model(fixtures::load(name)?, 42)?;
        let rep = integrability_report(&map_to_manytime(&ct), &phase_probes(&ct, 20, 1)?)?;
        println!(
            "{name}: max |G| = {:.2e}, |G - F| = {:.1e}, |G0 - DH| = {:.1e}",
            rep.max_g, rep.max_g_minus_f, rep.max_g_minus_dh
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}

// Hessian rank, variable split and gauge classification of every bundled model.

use clairaut::fixtures;
use clairaut::gauge::{classify, phase_probes, DEFAULT_F_RANK_TOL};
use clairaut::legendre::ClairautTransform;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    for name in fixtures::NAMES {
        let ct = ClairautTransform::from_model(fixtures::load(name)?, 42)?;
        let cls = classify(&ct, &phase_probes(&ct, 10, 42)?, DEFAULT_F_RANK_TOL)?;
        println!(
            "{name:<20} rank {} regular {:?} degenerate {:?} -> {:?} (rank F = {})",
            ct.r(),
            ct.split.regular,
            ct.split.degenerate,
            cls.kind,
            cls.r_f
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}

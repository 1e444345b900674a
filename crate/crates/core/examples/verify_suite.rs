// Runs the property suite on the gaugeless synthetic model.

use clairaut::fixtures;
use clairaut::verify::{verify, VerifyConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = VerifyConfig { probes: 20, ..VerifyConfig::default() };
    let rep = verify(&fixtures::load("synthetic_gaugeless")?, "synthetic_gaugeless", &cfg)?;
    for c in &rep.checks {
        let tol = c.tolerance.map_or("-".to_string(), |t| format!("{t:.0e}"));
        println!("{:<36} {:>10.2e}  tol {tol:<6} {}", c.name, c.residual, if c.pass { "ok" } else { "FAIL" });
    }
    if !rep.all_pass {
        return Err("some checks failed".into());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}

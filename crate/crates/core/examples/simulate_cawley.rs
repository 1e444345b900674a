// Cawley's model with gauge v_z = 1, written as CSV through the CLI helpers.

use clairaut::cli::trajectory_csv;
use clairaut::dynamics::{el_residual, integrate, GaugeInput, IntegratorConfig};
use clairaut::fixtures;
use clairaut::gauge::{classify, DEFAULT_F_RANK_TOL};
use clairaut::legendre::{ClairautTransform, PhasePoint};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let ct = ClairautTransform::from_model(fixtures::load("cawley")?, 42)?;
    let start = PhasePoint::new(vec![0.0; 3], vec![0.0, 0.7]);
    let cls = classify(&ct, std::slice::from_ref(&start), DEFAULT_F_RANK_TOL)?;
    let gauge = GaugeInput::from_specs(&ct, &cls, &[("z".into(), "1".into())])?;
    let traj = integrate(&ct, &start, &gauge, &IntegratorConfig::new(0.0, 0.01, 1e-3))?;
    let el = el_residual(&ct, &traj)?;
    print!("{}", trajectory_csv(&ct, &traj, &el));
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}

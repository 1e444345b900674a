// The relativistic particle under two gauges: same worldline, constant momenta.

use clairaut::dynamics::{integrate, GaugeInput, IntegratorConfig};
use clairaut::fixtures;
use clairaut::gauge::{classify, DEFAULT_F_RANK_TOL};
use clairaut::legendre::{ClairautTransform, PhasePoint};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let ct = ClairautTransform::from_model(fixtures::load("particle")?, 42)?;
    let start = PhasePoint::new(vec![0.0; 4], vec![0.6, -0.3, 0.8]);
    let cls = classify(&ct, std::slice::from_ref(&start), DEFAULT_F_RANK_TOL)?;
    for g in ["1 + 0.1*sin(t)", "2 + cos(t)"] {
        let gauge = GaugeInput::from_specs(&ct, &cls, &[("x0".into(), g.into())])?;
        let traj = integrate(&ct, &start, &gauge, &IntegratorConfig::new(0.0, 2.0, 1e-3))?;
        let last = traj.samples.last().ok_or("empty trajectory")?;
        println!(
            "v_x0 = {g:<16} x0(2) = {:.6}  x/x0 = {:.6}  p = {:?}",
            last.q[0],
            last.q[1] / last.q[0],
            last.p
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}

// General, envelope and mixed solutions of a multidimensional Clairaut equation.

use clairaut::newton::NewtonConfig;
use clairaut::pde::{envelope_solution, equation_residual, general_solution, mixed_solution, ClairautProblem};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = NewtonConfig::default();
    let f = ClairautProblem::parse("z1^2 + z2^2 + z3", None)?;
    let x = [0.6, -1.0, 2.0];
    let gen = general_solution(&f, &[0.3, 0.1, 0.5])?;
    println!("general   y = {:.6}", gen.eval(&x));
    for s in 1..=2 {
        let tail: Vec<f64> = [0.1, 0.5][s - 1..].to_vec();
        let y = mixed_solution(&f, s, &tail, &x, &cfg)?;
        let res = equation_residual(&f, &|z: &[f64]| mixed_solution(&f, s, &tail, z, &cfg), &x, 1e-5)?;
        println!("mixed s={s} y = {y:.6}  residual {res:.1e}");
    }
    match envelope_solution(&f, &x, &cfg) {
        Ok(y) => println!("envelope  y = {y:.6}"),
        Err(e) => println!("envelope  {e}"),
    }
    let full = ClairautProblem::parse("z1^2 + z2^2", None)?;
    println!("envelope of z1^2 + z2^2 at (0.6, -1) = {:.6}", envelope_solution(&full, &x[..2], &cfg)?);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}

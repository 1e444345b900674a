mod legendre_transform {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/legendre_transform.rs"));
}

mod split_and_classify {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/split_and_classify.rs"));
}

mod gauge_brackets {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/gauge_brackets.rs"));
}

mod particle_dynamics {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/particle_dynamics.rs"));
}

mod christ_lee_constraints {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/christ_lee_constraints.rs"));
}

mod manytime_integrability {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/manytime_integrability.rs"));
}

mod clairaut_pde {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/clairaut_pde.rs"));
}

mod dirac_correspondence {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/dirac_correspondence.rs"));
}

mod verify_suite {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/verify_suite.rs"));
}

mod simulate_cawley {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/simulate_cawley.rs"));
}


#[test]
fn legendre_transform_runs() {
    legendre_transform::run_example().expect("legendre_transform example");
}

#[test]
fn split_and_classify_runs() {
    split_and_classify::run_example().expect("split_and_classify example");
}

#[test]
fn gauge_brackets_runs() {
    gauge_brackets::run_example().expect("gauge_brackets example");
}

#[test]
fn particle_dynamics_runs() {
    particle_dynamics::run_example().expect("particle_dynamics example");
}

#[test]
fn christ_lee_constraints_runs() {
    christ_lee_constraints::run_example().expect("christ_lee_constraints example");
}

#[test]
fn manytime_integrability_runs() {
    manytime_integrability::run_example().expect("manytime_integrability example");
}

#[test]
fn clairaut_pde_runs() {
    clairaut_pde::run_example().expect("clairaut_pde example");
}

#[test]
fn dirac_correspondence_runs() {
    dirac_correspondence::run_example().expect("dirac_correspondence example");
}

#[test]
fn verify_suite_runs() {
    verify_suite::run_example().expect("verify_suite example");
}

#[test]
fn simulate_cawley_runs() {
    simulate_cawley::run_example().expect("simulate_cawley example");
}

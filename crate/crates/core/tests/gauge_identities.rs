use clairaut::fixtures;
use clairaut::gauge::{
    bracket_for, classify, delta_commutator_defect, leibniz_defect, long_derivatives_of_h, phase_probes, poisson_phys,
    GaugeKind, HPhys, Observable, DEFAULT_FD_STEP, DEFAULT_F_RANK_TOL,
};
use clairaut::legendre::ClairautTransform;
use clairaut::verify::{verify, VerifyConfig};

fn load(name: &str) -> ClairautTransform {
    ClairautTransform::from_model(fixtures::load(name).unwrap(), 42).unwrap()
}

#[test]
fn delta_commutator_on_multi_degenerate_fixtures() {
    for name in ["synthetic_gaugeless", "synthetic_gauge", "synthetic_bianchi", "christ_lee"] {
        let ct = load(name);
        let m = ct.n_deg();
        for pt in &phase_probes(&ct, 5, 3).unwrap() {
            for c in 0..m {
                let d = delta_commutator_defect(&ct, 0, 1, c, pt, DEFAULT_FD_STEP).unwrap();
                assert!(d <= 1e-4, "{name}: delta commutator {d:e}");
                let l = leibniz_defect(&ct, 0, 1, c, pt, DEFAULT_FD_STEP).unwrap();
                assert!(l <= 1e-4, "{name}: Leibniz {l:e}");
            }
        }
    }
}

#[test]
fn limit_case_independence_and_bracket_reduction() {
    for name in ["cawley", "christ_lee"] {
        let ct = load(name);
        let probes = phase_probes(&ct, 30, 5).unwrap();
        let cls = classify(&ct, &probes, DEFAULT_F_RANK_TOL).unwrap();
        assert_eq!(cls.kind, GaugeKind::Limit);
        let x = Observable::parse(&ct, &format!("sin({})*p_{}", ct.model.coords[0], ct.split.regular[0])).unwrap();
        for pt in &probes {
            let d = ct.physical(pt).unwrap();
            assert!(d.b.iter().all(|b| *b == 0.0));
            let dh = long_derivatives_of_h(&ct, &d);
            for (k, &a) in ct.split.degenerate_idx.iter().enumerate() {
                assert!((d.dh_dq[a].abs() - dh[k].abs()).abs() <= 1e-12);
            }
            let a = bracket_for(&ct, &x, &HPhys, pt, &cls).unwrap();
            assert_eq!(a, poisson_phys(&ct, &x, &HPhys, pt).unwrap());
        }
    }
}

#[test]
fn verify_passes_on_every_fixture() {
    let cfg = VerifyConfig { probes: 40, ..VerifyConfig::default() };
    for name in fixtures::NAMES {
        let rep = verify(&fixtures::load(name).unwrap(), name, &cfg).unwrap();
        assert!(rep.all_pass, "{name}: {}", rep.to_json());
    }
}

#[test]
fn gaugeless_bracket_defects_are_reported() {
    let rep = verify(&fixtures::load("synthetic_gaugeless").unwrap(), "g", &VerifyConfig::default()).unwrap();
    for name in ["bracket_new_antisymmetry_defect", "bracket_new_jacobiator"] {
        let c = rep.check(name).unwrap();
        assert!(c.tolerance.is_none() && c.residual.is_finite(), "{name}");
    }
}

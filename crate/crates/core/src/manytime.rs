//! Many-time form: degenerate coordinates become extra times `t^α = q^α`
//! with Hamiltonians `H_0 = H_phys`, `H_α = −B_α`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gauge::{b_gradient, field_strength_of, h_gradient, long_derivatives_of_h, poisson, Gradient};
use crate::legendre::{ClairautTransform, PhasePoint, PhysicalData};
use crate::linalg::{self, Matrix};

#[derive(Clone, Copy, Debug)]
pub struct ManyTimeSystem<'a> {
    pub ct: &'a ClairautTransform,
    /// Number of times, `n − r + 1`.
    pub m: usize,
}

pub fn map_to_manytime(ct: &ClairautTransform) -> ManyTimeSystem<'_> {
    ManyTimeSystem { ct, m: ct.n_deg() + 1 }
}

impl ManyTimeSystem<'_> {
    /// `t`, then the degenerate coordinate names.
    pub fn time_labels(&self) -> Vec<String> {
        std::iter::once("t".to_string()).chain(self.ct.split.degenerate.iter().cloned()).collect()
    }

    fn from_data(&self, d: &PhysicalData) -> (Vec<f64>, Vec<Gradient>) {
        let mut values = vec![d.h];
        let mut grads = vec![h_gradient(d)];
        for k in 0..self.m - 1 {
            values.push(-d.b[k]);
            let g = b_gradient(d, k);
            grads.push(Gradient {
                dq: g.dq.iter().map(|x| -x).collect(),
                dp: g.dp.iter().map(|x| -x).collect(),
            });
        }
        (values, grads)
    }

    /// `H_μ` at a point; `pt.q` carries `t^α` in the degenerate slots.
    pub fn hamiltonians(&self, pt: &PhasePoint) -> Result<Vec<f64>> {
        Ok(self.from_data(&self.ct.physical(pt)?).0)
    }

    /// `G_μν = ∂H_μ/∂t^ν − ∂H_ν/∂t^μ + {H_μ, H_ν}`; no `H_μ` depends on `t^0`.
    pub fn g_matrix(&self, pt: &PhasePoint) -> Result<Matrix> {
        let (_, grads) = self.from_data(&self.ct.physical(pt)?);
        let time_partial = |g: &Gradient, nu: usize| {
            if nu == 0 {
                0.0
            } else {
                g.dq[self.ct.split.degenerate_idx[nu - 1]]
            }
        };
        let mut g = linalg::zeros(self.m, self.m);
        for mu in 0..self.m {
            for nu in mu + 1..self.m {
                let v = time_partial(&grads[mu], nu) - time_partial(&grads[nu], mu)
                    + poisson(self.ct, &grads[mu], &grads[nu]);
                g[mu][nu] = v;
                g[nu][mu] = -v;
            }
        }
        Ok(g)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntegrabilityReport {
    pub probes: usize,
    /// Zero exactly when the many-time system is integrable at the probes.
    pub max_g: f64,
    /// `max |G_αβ − F_αβ|`.
    pub max_g_minus_f: f64,
    /// `max |G_0α − D_α H_phys|`.
    pub max_g_minus_dh: f64,
}

pub fn integrability_report(mts: &ManyTimeSystem<'_>, probes: &[PhasePoint]) -> Result<IntegrabilityReport> {
    if probes.is_empty() {
        return Err(Error::Usage("probe list is empty".into()));
    }
    let mut rep = IntegrabilityReport { probes: probes.len(), max_g: 0.0, max_g_minus_f: 0.0, max_g_minus_dh: 0.0 };
    for pt in probes {
        let g = mts.g_matrix(pt)?;
        let d = mts.ct.physical(pt)?;
        let f = field_strength_of(mts.ct, &d);
        let dh = long_derivatives_of_h(mts.ct, &d);
        rep.max_g = rep.max_g.max(linalg::max_abs(&g));
        for a in 0..mts.m - 1 {
            rep.max_g_minus_dh = rep.max_g_minus_dh.max((g[0][a + 1] - dh[a]).abs());
            for b in 0..mts.m - 1 {
                rep.max_g_minus_f = rep.max_g_minus_f.max((g[a + 1][b + 1] - f[a][b]).abs());
            }
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::gauge::phase_probes;

    fn load(name: &str) -> ClairautTransform {
        ClairautTransform::from_model(fixtures::load(name).unwrap(), 42).unwrap()
    }

    #[test]
    fn cawley_hamiltonians() {
        let ct = load("cawley");
        let mts = map_to_manytime(&ct);
        assert_eq!(mts.time_labels(), ["t", "z"]);
        let (y, tz, px, py) = (0.7, 1.3, 0.4, -0.9);
        let pt = PhasePoint::new(vec![0.2, y, tz], vec![px, py]);
        let h = mts.hamiltonians(&pt).unwrap();
        assert!((h[0] - (px * py - tz * y * y / 2.0)).abs() < 1e-14);
        assert_eq!(h[1], 0.0);
        let g = mts.g_matrix(&pt).unwrap();
        assert!((g[0][1] + y * y / 2.0).abs() < 1e-14);
        assert_eq!(g[0][0], 0.0);
        assert_eq!(g[1][1], 0.0);
    }

    #[test]
    fn particle_is_integrable() {
        let ct = load("particle");
        let mts = map_to_manytime(&ct);
        let pt = PhasePoint::new(vec![0.0; 4], vec![3.0, 0.0, 4.0]);
        let h = mts.hamiltonians(&pt).unwrap();
        assert!(h[0].abs() < 1e-12);
        assert!((h[1] - 50f64.sqrt()).abs() < 1e-12);
        let rep = integrability_report(&mts, &phase_probes(&ct, 30, 1).unwrap()).unwrap();
        assert!(rep.max_g <= 1e-9, "{rep:?}");
    }

    #[test]
    fn christ_lee_g_is_the_constraint() {
        let ct = load("christ_lee");
        let mts = map_to_manytime(&ct);
        let (x, p) = ([0.3, -0.2, 0.5], [0.2, 0.1, -0.3]);
        let pt = PhasePoint::new(vec![x[0], x[1], x[2], 0.1, 0.4, -0.7], p.to_vec());
        let h = mts.hamiltonians(&pt).unwrap();
        assert_eq!(&h[1..], [0.0; 3]);
        let g = mts.g_matrix(&pt).unwrap();
        let cross = [p[1] * x[2] - p[2] * x[1], p[2] * x[0] - p[0] * x[2], p[0] * x[1] - p[1] * x[0]];
        for a in 0..3 {
            assert!((g[0][a + 1].abs() - cross[a].abs()).abs() < 1e-12);
            for b in 0..3 {
                assert_eq!(g[a + 1][b + 1], 0.0);
            }
        }
    }

    #[test]
    fn cross_identities_on_every_fixture() {
        for name in fixtures::NAMES {
            let ct = load(name);
            let mts = map_to_manytime(&ct);
            let rep = integrability_report(&mts, &phase_probes(&ct, 25, 9).unwrap()).unwrap();
            assert!(rep.max_g_minus_f <= 1e-9 && rep.max_g_minus_dh <= 1e-9, "{name}: {rep:?}");
        }
        assert!(integrability_report(&map_to_manytime(&load("cawley")), &[]).is_err());
    }
}

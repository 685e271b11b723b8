//! Conserved quantities and energy norms of trajectories.

use serde::{Deserialize, Serialize};

use crate::report::SweepReport;
use crate::solver::Trajectory;
use crate::spectral::{from_spectrum, project, sobolev_norm, to_spectrum, Field, Projection};

/// Denominator floor for relative drifts.
pub const DRIFT_FLOOR: f64 = 1e-30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConservedSnapshot {
    pub t: f64,
    /// `∫ u dx` (real part for complex data).
    pub mass: f64,
    /// `∫ |u|² dx`.
    pub l2sq: f64,
    /// `∫ (1/2) u H u_x ∓ (1/12) u⁴ dx`; present for real fields only.
    pub hamiltonian: Option<f64>,
    pub modified_e0: Option<f64>,
    pub modified_e01: Option<f64>,
}

/// Snapshot for the defocusing flow at `t = 0`.
pub fn snapshot(u: &Field) -> ConservedSnapshot {
    snapshot_signed(u, 0.0, 1.0)
}

/// `sign` is the coefficient of `u² u_x`: `1` defocusing, `-1` focusing,
/// `0` for the linear flow. The quartic term carries it, so the Hamiltonian
/// is conserved by each of the three flows.
pub fn snapshot_signed(u: &Field, t: f64, sign: f64) -> ConservedSnapshot {
    let g = u.grid;
    let s = to_spectrum(u);
    let l = g.length();
    let mass = s.coeffs[0].re;
    let l2sq = s.l2_norm_sq();
    let hamiltonian = if u.reality_hint {
        let quad: f64 = s
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| g.xi(i).abs() * c.norm_sqr())
            .sum::<f64>()
            / l;
        // u⁴ has modes up to 2n; its mean is exact on the 2n grid
        let fine = from_spectrum(&s.resample(2 * g.n()).expect("doubling a valid grid"));
        let quartic: f64 = fine.values.iter().map(|v| v.re.powi(4)).sum::<f64>() * fine.grid.dx();
        Some(0.5 * quad - sign * quartic / 12.0)
    } else {
        None
    };
    ConservedSnapshot {
        t,
        mass,
        l2sq,
        hamiltonian,
        modified_e0: None,
        modified_e01: None,
    }
}

fn rel_drift(q: f64, q0: f64) -> f64 {
    (q - q0).abs() / q0.abs().max(DRIFT_FLOOR)
}

/// Rows `quantity,t,value,rel_drift`; `values["max_drift_<q>"]` holds the
/// maximum over the log.
pub fn drift_report(tr: &Trajectory) -> SweepReport {
    let mut rep = SweepReport::new("drift", &["quantity", "t", "value", "rel_drift"]);
    let log = &tr.invariant_log;
    let Some(first) = log.first() else {
        return rep;
    };
    type Getter = fn(&ConservedSnapshot) -> Option<f64>;
    let quantities: [(&str, Getter); 5] = [
        ("mass", |c| Some(c.mass)),
        ("l2sq", |c| Some(c.l2sq)),
        ("hamiltonian", |c| c.hamiltonian),
        ("modified_e0", |c| c.modified_e0),
        ("modified_e01", |c| c.modified_e01),
    ];
    for (name, get) in quantities {
        let Some(q0) = get(first) else { continue };
        let mut max = 0.0f64;
        for snap in log {
            if let Some(q) = get(snap) {
                let d = rel_drift(q, q0);
                max = max.max(d);
                rep.push(vec![name.into(), snap.t.into(), q.into(), d.into()]);
            }
        }
        rep.values.insert(format!("max_drift_{name}"), max);
    }
    rep
}

/// `‖R_{≤0} u(0)‖²_{Ḣ^l} + Σ_{k≥1} sup_t 2^{2sk} ‖R_k u(t)‖²`, square-rooted.
///
/// The sup runs over the stored snapshots; shells beyond the grid are dropped.
pub fn els_norm(tr: &Trajectory, l: f64, s: f64) -> f64 {
    let Some(first) = tr.states.first() else {
        return 0.0;
    };
    let g = first.grid;
    let spectra: Vec<_> = tr.states.iter().map(to_spectrum).collect();
    let low = sobolev_norm(&project(&spectra[0], Projection::RLeq(0)), l, true);
    let mut total = low * low;
    let mut k = 1;
    while 0.75 * f64::from(1u32 << k.min(30)) <= g.max_xi() {
        let sup = spectra
            .iter()
            .map(|sp| project(sp, Projection::R(k)).l2_norm_sq())
            .fold(0.0, f64::max);
        total += 2f64.powf(2.0 * s * f64::from(k)) * sup;
        k += 1;
    }
    total.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{free_evolve, solve, SolverConfig};
    use crate::spectral::SpectralGrid;
    use std::f64::consts::PI;

    #[test]
    fn cosine_examples() {
        let g = SpectralGrid::new(32, 1.0).unwrap();
        let u = Field::from_real_fn(g, f64::cos);
        let c = snapshot(&u);
        assert!(c.mass.abs() < 1e-14);
        assert!((c.l2sq - PI).abs() < 1e-13);
        assert!((c.hamiltonian.unwrap() - 7.0 * PI / 16.0).abs() < 1e-13);
    }

    #[test]
    fn hamiltonian_matches_dense_quadrature() {
        // oracle: Hu_x from the closed form, products by a fine Riemann sum
        let g = SpectralGrid::new(64, 1.0).unwrap();
        let f = |x: f64| 0.4 + x.cos() - 0.7 * (2.0 * x).sin() + 0.2 * (5.0 * x).cos();
        // H∂_x maps cos(mx) -> m cos(mx), sin(mx) -> m sin(mx)
        let hux = |x: f64| x.cos() - 0.7 * 2.0 * (2.0 * x).sin() + 0.2 * 5.0 * (5.0 * x).cos();
        let m = 20000;
        let dx = 2.0 * PI / m as f64;
        let dense: f64 = (0..m)
            .map(|j| {
                let x = j as f64 * dx;
                0.5 * f(x) * hux(x) - f(x).powi(4) / 12.0
            })
            .sum::<f64>()
            * dx;
        let h = snapshot(&Field::from_real_fn(g, f)).hamiltonian.unwrap();
        assert!((h - dense).abs() < 1e-8 * dense.abs());
    }

    #[test]
    fn complex_fields_have_no_hamiltonian() {
        let g = SpectralGrid::new(16, 1.0).unwrap();
        let u = Field::from_fn(g, |x| num_complex::Complex64::new(0.0, x).exp());
        let c = snapshot(&u);
        assert!(c.hamiltonian.is_none());
        assert!((c.l2sq - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn linear_run_drifts_vanish() {
        let g = SpectralGrid::new(64, 2.0).unwrap();
        let cfg = SolverConfig::new(g, 1e-2, 0.5)
            .unwrap()
            .with_linear_only(true)
            .with_stride(10);
        let u0 = Field::from_real_fn(g, |x| 0.3 + (-x * x).exp());
        let rep = drift_report(&solve(&u0, &cfg).unwrap());
        for q in ["mass", "l2sq", "hamiltonian"] {
            assert!(rep.values[&format!("max_drift_{q}")] <= 1e-12, "{q}");
        }
        assert_eq!(rep.columns, ["quantity", "t", "value", "rel_drift"]);
    }

    #[test]
    fn els_examples() {
        let g = SpectralGrid::new(64, 1.0).unwrap();
        // mode 4 lies in O_2 = [3, 6)
        let u0 = Field::from_real_fn(g, |x| (4.0 * x).cos());
        let s0 = to_spectrum(&u0);
        let times = vec![0.0, 0.1, 0.2];
        let spectra: Vec<_> = times.iter().map(|&t| free_evolve(&s0, t)).collect();
        let tr = Trajectory::from_spectra(times, &spectra, true, 1.0);
        let want = 2f64.powf(2.0 * 0.5) * PI.sqrt();
        assert!((els_norm(&tr, 0.0, 0.5) - want).abs() < 1e-10);

        let z = Trajectory::from_spectra(vec![0.0], &[Field::zeros(g, true).to_spectrum()], true, 1.0);
        assert_eq!(els_norm(&z, 1.0, 1.0), 0.0);

        let one = Trajectory::from_spectra(vec![0.0], &spectra[..1], true, 1.0);
        assert!((els_norm(&one, 0.0, 0.5) - els_norm(&tr, 0.0, 0.5)).abs() < 1e-10);
    }
}

//! Growth of `H^s` norms along solutions and the scaling symmetry
//! `u_λ(x, t) = λ^{-1/2} u(x/λ, t/λ²)`.

use crate::error::{Error, Result};
use crate::report::SweepReport;
use crate::solver::{solve, SolverConfig};
use crate::spectral::{sobolev_norm, to_spectrum, Field, SpectralGrid};

/// Bound on `sup_t ‖u(t)‖_{H^s} / ‖u(0)‖_{H^s}` checked by the report.
pub const GROWTH_LIMIT: f64 = 2.0;
/// Regularity below which runs are exploratory.
pub const REGULARITY_THRESHOLD: f64 = 0.25;

/// Rows `amplitude,c_emp` with `C_emp = sup_t ‖u(t)‖_{H^s} / ‖u_0‖_{H^s}`
/// for `u_0 = amplitude · shape`; `0/0` counts as 1.
pub fn apriori_experiment(s: f64, amplitudes: &[f64], cfg: &SolverConfig, shape: &Field) -> Result<SweepReport> {
    if amplitudes.is_empty() {
        return Err(Error::config("amplitudes", "need at least one amplitude"));
    }
    if !shape.reality_hint || !shape.satisfies_reality() {
        return Err(Error::Domain("a priori runs need real data".into()));
    }
    let mut rep = SweepReport::new("apriori", &["amplitude", "c_emp"]);
    let mut worst = 0.0f64;
    for &amp in amplitudes {
        let u0 = shape.scale(amp);
        let tr = solve(&u0, cfg)?;
        let norms: Vec<f64> = tr
            .states
            .iter()
            .map(|u| sobolev_norm(&to_spectrum(u), s, false))
            .collect();
        let n0 = norms[0];
        let sup = norms.iter().cloned().fold(0.0, f64::max);
        let c = if n0 == 0.0 && sup == 0.0 { 1.0 } else { sup / n0 };
        worst = worst.max(c);
        rep.push(vec![amp.into(), c.into()]);
    }
    rep.values.insert("max_c_emp".into(), worst);
    rep.values.insert("s".into(), s);
    rep.checks.insert("growth_bounded".into(), worst <= GROWTH_LIMIT);
    if s <= REGULARITY_THRESHOLD {
        rep.notes
            .insert("regime".into(), format!("exploratory: s = {s} <= 1/4"));
    }
    Ok(rep)
}

/// Configuration on the dilated torus: period `λ·P`, step `λ²dt`, horizon `λ²T`.
pub fn scaled_config(lambda: f64, cfg: &SolverConfig) -> Result<SolverConfig> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::config("lambda", "must be positive and finite"));
    }
    let g = cfg.grid;
    let grid = SpectralGrid::new(g.n(), lambda * g.period_scale())
        .map_err(|e| Error::GridMismatch(format!("dilated grid: {e}")))?;
    let l2 = lambda * lambda;
    let mut out = SolverConfig::new(grid, l2 * cfg.dt, l2 * cfg.t_final)
        .map_err(|e| Error::GridMismatch(format!("dilated time grid: {e}")))?;
    out.integrator = cfg.integrator;
    out.dealias_pad = cfg.dealias_pad;
    out.snapshot_stride = cfg.snapshot_stride;
    out.focusing = cfg.focusing;
    out.linear_only = cfg.linear_only;
    Ok(out)
}

/// `φ_λ(x) = λ^{-1/2} φ(x/λ)` sampled on the dilated grid.
pub fn dilate(lambda: f64, u: &Field, grid: SpectralGrid) -> Result<Field> {
    if grid.n() != u.grid.n() {
        return Err(Error::GridMismatch("dilation keeps the number of points".into()));
    }
    Field::new(grid, u.scale(lambda.powf(-0.5)).values, u.reality_hint)
}

fn l2_distance(a: &Field, b: &Field) -> f64 {
    let d: f64 = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).norm_sqr()).sum();
    (d * a.grid.dx()).sqrt()
}

/// Solve-then-dilate against dilate-then-solve at matched snapshots, plus
/// the norm identities `‖φ_λ‖_{L²} = ‖φ‖_{L²}` and
/// `‖φ_λ‖_{Ḣ^{1/2}} = λ^{-1/2} ‖φ‖_{Ḣ^{1/2}}`.
pub fn scaling_check(lambda: f64, cfg: &SolverConfig, u0: &Field) -> Result<SweepReport> {
    let cfg_l = scaled_config(lambda, cfg)?;
    if u0.grid != cfg.grid {
        return Err(Error::GridMismatch("initial data is not on the solver grid".into()));
    }
    let u0_l = dilate(lambda, u0, cfg_l.grid)?;
    let base = solve(u0, cfg)?;
    let scaled = solve(&u0_l, &cfg_l)?;
    let mut rep = SweepReport::new("scaling", &["t", "t_scaled", "discrepancy"]);
    let mut sup = 0.0f64;
    for (i, (u, v)) in base.states.iter().zip(&scaled.states).enumerate() {
        let d = l2_distance(&dilate(lambda, u, cfg_l.grid)?, v);
        sup = sup.max(d);
        rep.push(vec![base.times[i].into(), scaled.times[i].into(), d.into()]);
    }
    let (s0, s1) = (to_spectrum(u0), to_spectrum(&u0_l));
    let l2 = (s0.l2_norm_sq().sqrt(), s1.l2_norm_sq().sqrt());
    let h = (sobolev_norm(&s0, 0.5, true), sobolev_norm(&s1, 0.5, true));
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(f64::MIN_POSITIVE);
    let l2_err = rel(l2.1, l2.0);
    let h_err = if h.0 == 0.0 {
        h.1
    } else {
        rel(h.1, lambda.powf(-0.5) * h.0)
    };
    rep.values.insert("sup_discrepancy".into(), sup);
    rep.values.insert("l2_identity_error".into(), l2_err);
    rep.values.insert("hdot_half_identity_error".into(), h_err);
    rep.checks.insert("l2_identity".into(), l2_err <= 1e-12);
    rep.checks.insert("hdot_half_identity".into(), h_err <= 1e-12);
    rep.checks.insert("trajectories_commute".into(), sup <= 1e-6);
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(amp: f64) -> (SolverConfig, Field) {
        let g = SpectralGrid::new(128, 4.0).unwrap();
        let cfg = SolverConfig::new(g, 1e-2, 0.5).unwrap().with_stride(10);
        (cfg, Field::from_real_fn(g, |x| amp * (-x * x / 4.0).exp()))
    }

    #[test]
    fn zero_data_counts_as_one() {
        let (cfg, shape) = setup(1.0);
        let rep = apriori_experiment(0.3, &[0.0], &cfg, &shape).unwrap();
        assert_eq!(rep.column("c_emp").unwrap(), vec![1.0]);
    }

    #[test]
    fn linear_flow_preserves_sobolev_norms() {
        let (cfg, shape) = setup(1.0);
        let cfg = cfg.with_linear_only(true);
        let rep = apriori_experiment(0.3, &[0.5, 2.0], &cfg, &shape).unwrap();
        for c in rep.column("c_emp").unwrap() {
            assert!((c - 1.0).abs() < 1e-10, "{c}");
        }
    }

    #[test]
    fn complex_data_rejected() {
        let (cfg, _) = setup(1.0);
        let z = Field::from_fn(cfg.grid, |x| num_complex::Complex64::new(x.cos(), x.sin()));
        assert!(matches!(
            apriori_experiment(0.3, &[1.0], &cfg, &z),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn unit_dilation_is_exact() {
        let (cfg, u0) = setup(0.3);
        let rep = scaling_check(1.0, &cfg, &u0).unwrap();
        assert_eq!(rep.values["sup_discrepancy"], 0.0);
    }

    #[test]
    fn dilation_identities_and_commuting_flows() {
        let (cfg, u0) = setup(0.3);
        let rep = scaling_check(2.0, &cfg, &u0).unwrap();
        assert!(rep.all_checks_pass(), "{:?}", rep.values);
        assert!(scaling_check(-1.0, &cfg, &u0).is_err());
    }
}

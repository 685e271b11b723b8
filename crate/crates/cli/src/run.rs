//! Command dispatch and artifact writing.

use std::fs;
use std::path::Path;

use log::info;
use mbo_core::energy::{cancellation_experiment, QuarticForm};
use mbo_core::invariants::drift_report;
use mbo_core::lab::{
    apriori_experiment, counterexample_trilinear, counterexample_xsb, dispersive_sweep, scaling_check,
    symmetric_estimate_sweep,
};
use mbo_core::report::{Cell, SweepReport};
use mbo_core::solver::{picard_solve, solve, SolverConfig};
use mbo_core::spectral::{sobolev_norm, to_spectrum, Field};
use mbo_core::{Error, Result};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::{Command, Resolved};

/// Relative drift allowed by the `conservation` checks.
pub const DRIFT_TOLERANCE: f64 = 1e-6;

/// SHA-256 of the compact resolved configuration; map keys are sorted.
pub fn digest(echo: &Value) -> String {
    hex::encode(Sha256::digest(echo.to_string().as_bytes()))
}

fn solver_parts(r: &Resolved) -> (&SolverConfig, Field) {
    let cfg = r.solver.as_ref().expect("solver command without solver config");
    let u0 = r
        .initial
        .as_ref()
        .expect("solver command without initial data")
        .field(cfg.grid);
    (cfg, u0)
}

/// Rows of several reports stacked under a leading `group` column; values,
/// checks and fits are prefixed with the group name.
fn stack(experiment: &str, parts: Vec<(&str, SweepReport)>) -> SweepReport {
    let mut cols = vec!["group".to_string()];
    if let Some((_, first)) = parts.first() {
        cols.extend(first.columns.iter().cloned());
    }
    let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut out = SweepReport::new(experiment, &col_refs);
    for (name, rep) in parts {
        for row in rep.rows {
            let mut r = vec![Cell::from(name)];
            r.extend(row);
            out.push(r);
        }
        out.values
            .extend(rep.values.into_iter().map(|(k, v)| (format!("{name}.{k}"), v)));
        out.checks
            .extend(rep.checks.into_iter().map(|(k, v)| (format!("{name}.{k}"), v)));
        out.fits
            .extend(rep.fits.into_iter().map(|(k, v)| (format!("{name}.{k}"), v)));
        out.notes
            .extend(rep.notes.into_iter().map(|(k, v)| (format!("{name}.{k}"), v)));
    }
    out
}

/// Runs the command and returns `(csv body without trailer, report)`.
pub fn execute(r: &Resolved) -> Result<(String, SweepReport)> {
    let rep = match r.command {
        Command::Simulate => {
            let (cfg, u0) = solver_parts(r);
            let tr = solve(&u0, cfg)?;
            let mut rep = drift_report(&tr);
            rep.experiment = "simulate".into();
            rep.values.insert("snapshots".into(), tr.times.len() as f64);
            return Ok((tr.to_csv(), rep));
        }
        Command::Conservation => {
            let (cfg, u0) = solver_parts(r);
            let mut rep = drift_report(&solve(&u0, cfg)?);
            rep.experiment = "conservation".into();
            for q in ["l2sq", "hamiltonian"] {
                let d = rep.values.get(&format!("max_drift_{q}")).copied().unwrap_or(f64::NAN);
                rep.checks.insert(format!("{q}_conserved"), d <= DRIFT_TOLERANCE);
            }
            rep
        }
        Command::Picard => {
            let (cfg, mut u0) = solver_parts(r);
            if let Some(h) = r.h_half_norm {
                let cur = sobolev_norm(&to_spectrum(&u0), 0.5, false);
                if cur == 0.0 {
                    return Err(Error::config("h_half_norm", "initial data is zero"));
                }
                u0 = u0.scale(h / cur);
            }
            let out = picard_solve(&u0, cfg, r.iterations)?;
            let ratios = out.ratios();
            let mut rep = SweepReport::new("picard", &["iteration", "residual", "ratio"]);
            for (i, res) in out.residuals.iter().enumerate() {
                let ratio = if i == 0 { f64::NAN } else { ratios[i - 1] };
                rep.push(vec![(i + 1).into(), (*res).into(), ratio.into()]);
            }
            let last = out.iterates.last().expect("at least one iterate");
            let d = last.sup_l2_distance(&solve(&u0, cfg)?);
            let worst = ratios.iter().skip(1).cloned().fold(0.0, f64::max);
            rep.values.insert("max_contraction_ratio".into(), worst);
            rep.values.insert("distance_to_solver".into(), d);
            rep.checks.insert("contracts".into(), worst <= 0.5);
            rep.checks.insert("matches_solver".into(), d <= 1e-6);
            rep
        }
        Command::ModifiedEnergy => {
            let (cfg, shape) = solver_parts(r);
            let a = r.symbol.as_ref().expect("symbol resolved");
            // the sextic sum is refused before any time stepping
            let r6 = if r.r6 {
                let form = QuarticForm::new(cfg.grid, a, cfg.focusing);
                Some(form.r6(&to_spectrum(&shape.scale(r.amplitudes[0])))?)
            } else {
                None
            };
            let mut rep = cancellation_experiment(&r.amplitudes, cfg, a, &shape)?.to_report();
            if let Some(v) = r6 {
                rep.values.insert("r6_at_first_amplitude".into(), v);
            }
            let (s0, s1) = (rep.values["slope_e0"], rep.values["slope_e01"]);
            rep.checks.insert("e0_drift_quartic".into(), (s0 - 4.0).abs() <= 0.5);
            rep.checks.insert("e01_drift_sextic".into(), (s1 - 6.0).abs() <= 0.5);
            rep
        }
        Command::Divergence => counterexample_trilinear(&r.spec)?,
        Command::Xsb => counterexample_xsb(&r.spec)?,
        Command::Estimates => {
            let mut parts = Vec::new();
            for p in &r.parts {
                info!("estimates part {}", p.name());
                parts.push((p.name(), symmetric_estimate_sweep(*p, &r.spec)?));
            }
            stack("estimates", parts)
        }
        Command::Dispersive => {
            let mut parts = Vec::new();
            for k in &r.kinds {
                info!("dispersive {}", k.name());
                parts.push((k.name(), dispersive_sweep(*k, &r.spec)?));
            }
            stack("dispersive", parts)
        }
        Command::Apriori => {
            let (cfg, shape) = solver_parts(r);
            apriori_experiment(r.regularity, &r.amplitudes, cfg, &shape)?
        }
        Command::Scaling => {
            let (cfg, u0) = solver_parts(r);
            scaling_check(r.lambda, cfg, &u0)?
        }
    };
    Ok((rep.to_csv(None), rep))
}

/// Writes `<cmd>.csv` and `<cmd>.summary.json` into `out`.
pub fn write_artifacts(r: &Resolved, out: &Path, csv: &str, rep: &SweepReport) -> Result<()> {
    fs::create_dir_all(out)?;
    let dig = digest(&r.echo);
    let name = r.command.name();
    let trailer = format!("# mbo-lab {} config-digest={dig}\n", env!("CARGO_PKG_VERSION"));
    fs::write(out.join(format!("{name}.csv")), format!("{csv}{trailer}"))?;
    let mut summary = rep.summary_json();
    summary["config"] = r.echo["config"].clone();
    summary["command"] = Value::from(name);
    summary["config_digest"] = Value::from(dig);
    let text = serde_json::to_string_pretty(&summary).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(out.join(format!("{name}.summary.json")), text + "\n")?;
    Ok(())
}

/// Process exit status for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } => 2,
        Error::Divergence { .. } => 3,
        Error::CostGuard(_) => 4,
        _ => 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stacking_prefixes_groups() {
        let mut a = SweepReport::new("x", &["k", "v"]);
        a.push(vec![1.into(), 2.0.into()]);
        a.checks.insert("ok".into(), true);
        let mut b = a.clone();
        b.checks.insert("ok".into(), false);
        let s = stack("both", vec![("a", a), ("b", b)]);
        assert_eq!(s.columns, ["group", "k", "v"]);
        assert_eq!(s.rows.len(), 2);
        assert!(s.checks["a.ok"]);
        assert!(!s.all_checks_pass());
    }

    #[test]
    fn digest_ignores_key_order() {
        let a: Value = serde_json::from_str(r#"{"a":1,"b":[2,3]}"#).unwrap();
        let b: Value = serde_json::from_str(r#"{"b":[2,3],"a":1}"#).unwrap();
        assert_eq!(digest(&a), digest(&b));
    }
}

//! Space-time norms of free waves whose spectrum sits in one dyadic shell.
//!
//! Data `φ̂(ξ) = η0(ξ - ξ0)` with `ξ0 = (3/2) 2^k` lies in `Ĩ_k` for `k ≥ 2`.
//! On `ξ > 0` the flow is `e^{-itξ²}`, so
//! `|u(x, t)| = |v(x - 2ξ0 t, t)|` with `v̂(η, t) = η0(η) e^{-itη²}`
//! independent of `k`. `v` is resolved on a small periodic grid and the
//! norms are sums over a lab-frame `(x, t)` lattice aligned with it
//! (`2ξ0 Δt = Δy`).

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ExperimentSpec;
use crate::cutoff::{self, pow2};
use crate::error::{Error, Result};
use crate::report::{fit_line, SweepReport};
use crate::spectral::{from_spectrum, SpectralGrid, Spectrum};

/// Band limits on the fitted exponents.
pub const SMOOTHING_RATE: f64 = -0.5;
pub const MAXIMAL_RATE: f64 = 0.5;
pub const RATE_TOLERANCE: f64 = 0.15;
pub const STRICHARTZ_SLOPE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DispersiveKind {
    /// `‖u‖_{L⁶_{t,x}}`.
    Strichartz,
    /// `sup_x ‖u(x, ·)‖_{L²_t}`.
    Smoothing,
    /// `‖sup_t |u(·, t)|‖_{L²_x}`.
    Maximal,
}

impl DispersiveKind {
    pub fn name(&self) -> &'static str {
        match self {
            DispersiveKind::Strichartz => "strichartz",
            DispersiveKind::Smoothing => "smoothing",
            DispersiveKind::Maximal => "maximal",
        }
    }
}

impl std::str::FromStr for DispersiveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strichartz" => Ok(DispersiveKind::Strichartz),
            "smoothing" => Ok(DispersiveKind::Smoothing),
            "maximal" => Ok(DispersiveKind::Maximal),
            _ => Err(Error::config("kind", format!("unknown dispersive kind `{s}`"))),
        }
    }
}

/// Envelope grid: `n` points, period `2π·scale`, sampled `pad` times finer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Envelope {
    pub grid: SpectralGrid,
    pub pad: usize,
}

impl Default for Envelope {
    fn default() -> Self {
        Envelope {
            grid: SpectralGrid::new(256, 8.0).expect("valid envelope grid"),
            pad: 4,
        }
    }
}

/// Norms of the free wave with shell index `k` on `t ∈ [0, 1]`, each divided
/// by `‖φ‖_{L²}`: `[strichartz, smoothing, maximal]`.
pub fn dispersive_norms(k: i32, env: Envelope) -> Result<[f64; 3]> {
    if k < 2 {
        return Err(Error::Domain(format!(
            "shell {k} is too narrow for the packet; need k >= 2"
        )));
    }
    let g = env.grid;
    if 4.0 * cutoff::SUPPORT > g.max_xi() {
        return Err(Error::UnderResolved(format!(
            "packet band {} exceeds a quarter of the envelope Nyquist {}",
            cutoff::SUPPORT,
            g.max_xi()
        )));
    }
    let fine = g.with_points(env.pad * g.n())?;
    let dy = fine.dx();
    let half = 0.5 * g.length();
    let speed = 3.0 * pow2(k);
    let dt = dy / speed;
    let steps = (1.0 / dt).floor() as usize;

    let mut psi = Spectrum::zeros(g);
    for (i, c) in psi.coeffs.iter_mut().enumerate() {
        *c = Complex64::new(cutoff::eta0(g.xi(i)), 0.0);
    }
    psi.coeffs[g.nyquist_slot()] = Complex64::new(0.0, 0.0);
    let phi_sq = psi.l2_norm_sq();

    // |v(y_i, t_l)| on the fine envelope grid, one row per time
    let rows: Vec<Vec<f64>> = (0..=steps)
        .into_par_iter()
        .map(|l| {
            let t = l as f64 * dt;
            let s = psi.map_multiplier(|eta| Complex64::new(0.0, -t * eta * eta).exp());
            let f = from_spectrum(&s.resample(fine.n()).expect("padding a valid grid"));
            f.values.iter().map(|v| v.norm()).collect()
        })
        .collect();

    // lab point x_m = -half + m dy meets envelope node i at time l when
    // m = i + l (x = y + speed t and speed dt = dy)
    let nx = fine.n() + steps + 1;
    let mut smooth = vec![0.0; nx];
    let mut peak = vec![0.0f64; nx];
    let mut sixth = 0.0;
    for (l, row) in rows.iter().enumerate() {
        let mut acc = 0.0;
        for (i, &a) in row.iter().enumerate() {
            let m = i + l;
            smooth[m] += a * a * dt;
            peak[m] = peak[m].max(a);
            acc += a.powi(6);
        }
        sixth += acc * dy * dt;
    }
    debug_assert!((fine.x(0) + half).abs() < 1e-9 * half);
    let strichartz = sixth.powf(1.0 / 6.0);
    let smoothing = smooth.iter().cloned().fold(0.0, f64::max).sqrt();
    let maximal = (peak.iter().map(|p| p * p).sum::<f64>() * dy).sqrt();
    let norm = phi_sq.sqrt();
    Ok([strichartz / norm, smoothing / norm, maximal / norm])
}

/// Rows `k,norm_ratio` for `kind` over `spec.k_range`, with the fitted
/// exponent of `log2(norm_ratio)` in `k`.
pub fn dispersive_sweep(kind: DispersiveKind, spec: &ExperimentSpec) -> Result<SweepReport> {
    spec.validate()?;
    let env = Envelope::default();
    let ks = spec.ks();
    let norms: Vec<[f64; 3]> = ks.iter().map(|&k| dispersive_norms(k, env)).collect::<Result<_>>()?;
    let col = match kind {
        DispersiveKind::Strichartz => 0,
        DispersiveKind::Smoothing => 1,
        DispersiveKind::Maximal => 2,
    };
    let mut rep = SweepReport::new(&format!("dispersive_{}", kind.name()), &["k", "norm_ratio"]);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (&k, n) in ks.iter().zip(&norms) {
        rep.push(vec![k.into(), n[col].into()]);
        xs.push(f64::from(k));
        ys.push(n[col].log2());
    }
    if xs.len() >= 2 {
        let fit = fit_line(&xs, &ys);
        let ok = match kind {
            DispersiveKind::Strichartz => fit.slope.abs() <= STRICHARTZ_SLOPE,
            DispersiveKind::Smoothing => (fit.slope - SMOOTHING_RATE).abs() <= RATE_TOLERANCE,
            DispersiveKind::Maximal => (fit.slope - MAXIMAL_RATE).abs() <= RATE_TOLERANCE,
        };
        rep.values.insert("exponent".into(), fit.slope);
        rep.fits.insert("log2_norm_vs_k".into(), fit);
        rep.checks.insert("exponent_in_band".into(), ok);
    }
    Ok(rep)
}

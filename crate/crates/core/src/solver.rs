//! Time evolution of `u_t + H u_xx = ±u² u_x` on the periodic grid.
//!
//! In Fourier variables the equation reads `û_t = i ω(xi) û + N̂(u)` with
//! `ω(xi) = -xi|xi|` and `N = ±u² u_x = ±(1/3) ∂_x(u³)`. The cube is formed
//! on a zero-padded grid (factor 2 is alias free for a cubic) and the Nyquist
//! mode of every right-hand side is discarded.

use std::f64::consts::PI;

use log::warn;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::invariants::{self, ConservedSnapshot};
use crate::spectral::{
    fft_forward, fft_inverse, from_spectrum, mode_of, sobolev_norm, to_spectrum, Field, SpectralGrid, Spectrum,
};

/// Dispersion relation of the linear flow.
pub fn omega(xi: f64) -> f64 {
    -xi * xi.abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    Etdrk4,
    Ifrk4,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub grid: SpectralGrid,
    pub dt: f64,
    pub t_final: f64,
    pub integrator: Integrator,
    pub dealias_pad: f64,
    pub snapshot_stride: usize,
    /// `-u² u_x` instead of `+u² u_x`.
    pub focusing: bool,
    /// Drop the nonlinearity (free evolution through the same stepper).
    pub linear_only: bool,
    /// `max |ω| dt` over the grid, recorded at construction.
    pub max_phase_per_step: f64,
}

impl SolverConfig {
    pub fn new(grid: SpectralGrid, dt: f64, t_final: f64) -> Result<Self> {
        let cfg = SolverConfig {
            grid,
            dt,
            t_final,
            integrator: Integrator::Etdrk4,
            dealias_pad: 2.0,
            snapshot_stride: 1,
            focusing: false,
            linear_only: false,
            max_phase_per_step: grid.max_xi().powi(2) * dt,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_integrator(mut self, integrator: Integrator) -> Self {
        self.integrator = integrator;
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.snapshot_stride = stride;
        self
    }

    pub fn with_focusing(mut self, focusing: bool) -> Self {
        self.focusing = focusing;
        self
    }

    pub fn with_linear_only(mut self, linear_only: bool) -> Self {
        self.linear_only = linear_only;
        self
    }

    pub fn with_pad(mut self, pad: f64) -> Self {
        self.dealias_pad = pad;
        self
    }

    pub fn with_t_final(mut self, t_final: f64) -> Self {
        self.t_final = t_final;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self.max_phase_per_step = self.grid.max_xi().powi(2) * dt;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config("dt", "time step must be positive"));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::config("t_final", "horizon must be positive"));
        }
        if !(self.dealias_pad >= 2.0) {
            return Err(Error::config("dealias_pad", "padding factor must be >= 2"));
        }
        if self.snapshot_stride == 0 {
            return Err(Error::config("snapshot_stride", "stride must be >= 1"));
        }
        let steps = self.t_final / self.dt;
        if (steps - steps.round()).abs() > 1e-6 * steps.max(1.0) {
            return Err(Error::config(
                "t_final",
                format!("horizon {} is not a multiple of dt {}", self.t_final, self.dt),
            ));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    pub fn padded_points(&self) -> usize {
        ((self.dealias_pad * self.grid.n() as f64).ceil() as usize).next_power_of_two()
    }

    /// Coefficient of `u² u_x` in the flow actually integrated.
    pub fn flow_sign(&self) -> f64 {
        if self.linear_only {
            0.0
        } else {
            self.sign()
        }
    }

    fn sign(&self) -> f64 {
        if self.focusing {
            -1.0
        } else {
            1.0
        }
    }
}

/// `W(t)`: multiply by `e^{i t ω(xi)}`.
pub fn free_evolve(s: &Spectrum, t: f64) -> Spectrum {
    s.map_multiplier(|xi| Complex64::new(0.0, t * omega(xi)).exp())
}

/// Alias-free `±(i xi / 3) F[u³]` on the retained modes, Nyquist dropped.
pub(crate) fn cubic_rhs(coeffs: &[Complex64], grid: SpectralGrid, padded: usize, sign: f64) -> Vec<Complex64> {
    let n = grid.n();
    let l = grid.length();
    // same (-1)^m / L normalisation as `from_spectrum`, on the padded grid
    let mut buf = vec![Complex64::new(0.0, 0.0); padded];
    for (i, c) in coeffs.iter().enumerate() {
        let m = mode_of(i, n);
        let s = if m >= 0 {
            m as usize
        } else {
            (m + padded as i64) as usize
        };
        let par = if m.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        buf[s] = c * (par / l);
    }
    fft_inverse(&mut buf);
    for v in buf.iter_mut() {
        *v = *v * *v * *v;
    }
    fft_forward(&mut buf);
    let dx = l / padded as f64;
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for (i, o) in out.iter_mut().enumerate() {
        if i == n / 2 {
            continue;
        }
        let m = mode_of(i, n);
        let s = if m >= 0 {
            m as usize
        } else {
            (m + padded as i64) as usize
        };
        let par = if m.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        let xi = m as f64 / grid.period_scale();
        *o = buf[s] * (dx * par) * Complex64::new(0.0, sign * xi / 3.0);
    }
    out
}

/// `±u² u_x` evaluated spectrally; cubic in `u` by construction.
pub fn nonlinearity(u: &Field, focusing: bool, pad: f64) -> Result<Field> {
    if !(pad >= 2.0) {
        return Err(Error::config("dealias_pad", "padding factor must be >= 2"));
    }
    let padded = ((pad * u.grid.n() as f64).ceil() as usize).next_power_of_two();
    let s = to_spectrum(u);
    let sign = if focusing { -1.0 } else { 1.0 };
    let coeffs = cubic_rhs(&s.coeffs, u.grid, padded, sign);
    let mut out = from_spectrum(&Spectrum { grid: u.grid, coeffs });
    out.reality_hint = u.reality_hint;
    Ok(out)
}

/// Mean of `f` over a circle of radius 1 around `z` (16 points).
fn contour_mean(z: Complex64, f: impl Fn(Complex64) -> Complex64) -> Complex64 {
    const M: usize = 16;
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..M {
        let theta = PI * (j as f64 + 0.5) / M as f64 * 2.0;
        acc += f(z + Complex64::new(0.0, theta).exp());
    }
    acc / M as f64
}

/// Precomputed per-mode coefficients of one time step.
pub struct Stepper {
    cfg: SolverConfig,
    sign: f64,
    padded: usize,
    e: Vec<Complex64>,
    e2: Vec<Complex64>,
    q: Vec<Complex64>,
    f1: Vec<Complex64>,
    f2: Vec<Complex64>,
    f3: Vec<Complex64>,
}

impl Stepper {
    pub fn new(cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let g = cfg.grid;
        let h = cfg.dt;
        let n = g.n();
        let mut st = Stepper {
            cfg: cfg.clone(),
            sign: cfg.sign(),
            padded: cfg.padded_points(),
            e: Vec::with_capacity(n),
            e2: Vec::with_capacity(n),
            q: Vec::with_capacity(n),
            f1: Vec::with_capacity(n),
            f2: Vec::with_capacity(n),
            f3: Vec::with_capacity(n),
        };
        for i in 0..n {
            let lh = Complex64::new(0.0, omega(g.xi(i)) * h);
            st.e.push(lh.exp());
            st.e2.push((lh / 2.0).exp());
            if cfg.integrator == Integrator::Etdrk4 {
                st.q.push(h * contour_mean(lh, |z| ((z / 2.0).exp() - 1.0) / z));
                st.f1
                    .push(h * contour_mean(lh, |z| (-4.0 - z + z.exp() * (4.0 - 3.0 * z + z * z)) / (z * z * z)));
                st.f2
                    .push(h * contour_mean(lh, |z| (2.0 + z + z.exp() * (z - 2.0)) / (z * z * z)));
                st.f3
                    .push(h * contour_mean(lh, |z| (-4.0 - 3.0 * z - z * z + z.exp() * (4.0 - z)) / (z * z * z)));
            }
        }
        Ok(st)
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    fn rhs(&self, v: &[Complex64]) -> Vec<Complex64> {
        if self.cfg.linear_only {
            return vec![Complex64::new(0.0, 0.0); v.len()];
        }
        cubic_rhs(v, self.cfg.grid, self.padded, self.sign)
    }

    /// Advance the spectrum by one step.
    pub fn advance(&self, v: &mut [Complex64]) {
        let n = v.len();
        let h = self.cfg.dt;
        match self.cfg.integrator {
            Integrator::Etdrk4 => {
                let nu = self.rhs(v);
                let a: Vec<_> = (0..n).map(|i| self.e2[i] * v[i] + self.q[i] * nu[i]).collect();
                let na = self.rhs(&a);
                let b: Vec<_> = (0..n).map(|i| self.e2[i] * v[i] + self.q[i] * na[i]).collect();
                let nb = self.rhs(&b);
                let c: Vec<_> = (0..n)
                    .map(|i| self.e2[i] * a[i] + self.q[i] * (2.0 * nb[i] - nu[i]))
                    .collect();
                let nc = self.rhs(&c);
                for i in 0..n {
                    v[i] =
                        self.e[i] * v[i] + nu[i] * self.f1[i] + 2.0 * (na[i] + nb[i]) * self.f2[i] + nc[i] * self.f3[i];
                }
            }
            Integrator::Ifrk4 => {
                let k1 = self.rhs(v);
                let a: Vec<_> = (0..n).map(|i| self.e2[i] * (v[i] + 0.5 * h * k1[i])).collect();
                let k2 = self.rhs(&a);
                let b: Vec<_> = (0..n).map(|i| self.e2[i] * v[i] + 0.5 * h * k2[i]).collect();
                let k3 = self.rhs(&b);
                let c: Vec<_> = (0..n).map(|i| self.e[i] * v[i] + h * self.e2[i] * k3[i]).collect();
                let k4 = self.rhs(&c);
                for i in 0..n {
                    v[i] =
                        self.e[i] * v[i] + h / 6.0 * (self.e[i] * k1[i] + 2.0 * self.e2[i] * (k2[i] + k3[i]) + k4[i]);
                }
            }
        }
    }

    /// One guarded step at time `t` (used only for error reporting).
    pub fn step_guarded(&self, s: &mut Spectrum, reality: bool, t: f64) -> Result<()> {
        let before = s.l2_norm_sq();
        self.advance(&mut s.coeffs);
        if reality {
            s.symmetrize_real();
        }
        let after = s.l2_norm_sq();
        if !after.is_finite() {
            return Err(Error::Divergence {
                t,
                reason: "non-finite state".into(),
            });
        }
        if before > 0.0 && after > 100.0 * before {
            return Err(Error::Divergence {
                t,
                reason: format!("L2 norm grew by {:.3e}x in one step", (after / before).sqrt()),
            });
        }
        Ok(())
    }
}

/// One step of size `cfg.dt`.
pub fn step(u: &Field, cfg: &SolverConfig) -> Result<Field> {
    check_grid(u, cfg)?;
    let st = Stepper::new(cfg)?;
    let mut s = to_spectrum(u);
    st.step_guarded(&mut s, u.reality_hint, cfg.dt)?;
    Ok(field_from(&s, u.reality_hint))
}

fn check_grid(u: &Field, cfg: &SolverConfig) -> Result<()> {
    if u.grid != cfg.grid {
        return Err(Error::GridMismatch(
            "initial data does not live on the configured grid".into(),
        ));
    }
    Ok(())
}

pub(crate) fn field_from(s: &Spectrum, reality: bool) -> Field {
    let mut f = from_spectrum(s);
    if reality {
        for v in f.values.iter_mut() {
            v.im = 0.0;
        }
        f.reality_hint = true;
    }
    f
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Field>,
    pub invariant_log: Vec<ConservedSnapshot>,
}

impl Trajectory {
    pub fn grid(&self) -> Option<SpectralGrid> {
        self.states.first().map(|f| f.grid)
    }

    pub fn spectra(&self) -> Vec<Spectrum> {
        self.states.iter().map(to_spectrum).collect()
    }

    pub fn from_spectra(times: Vec<f64>, spectra: &[Spectrum], reality: bool, sign: f64) -> Self {
        let states: Vec<Field> = spectra.iter().map(|s| field_from(s, reality)).collect();
        let invariant_log = states
            .iter()
            .zip(&times)
            .map(|(f, &t)| invariants::snapshot_signed(f, t, sign))
            .collect();
        Trajectory {
            times,
            states,
            invariant_log,
        }
    }

    /// `sup_t ‖u(t) - v(t)‖_{L²}` over shared snapshot times.
    pub fn sup_l2_distance(&self, other: &Trajectory) -> f64 {
        self.states
            .iter()
            .zip(&other.states)
            .map(|(a, b)| {
                let d: f64 = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).norm_sqr()).sum();
                (d * a.grid.dx()).sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// Long-format CSV `t,x,re_u,im_u`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,x,re_u,im_u\n");
        for (t, f) in self.times.iter().zip(&self.states) {
            for (j, v) in f.values.iter().enumerate() {
                out.push_str(&format!("{:e},{:e},{:e},{:e}\n", t, f.grid.x(j), v.re, v.im));
            }
        }
        out
    }

    /// Per-snapshot little-endian f64 records: `n, P, t`, then `2n`
    /// interleaved spectral coefficients (re, im) in FFT order.
    pub fn to_binary(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for (t, f) in self.times.iter().zip(&self.states) {
            let s = to_spectrum(f);
            out.extend_from_slice(&(f.grid.n() as f64).to_le_bytes());
            out.extend_from_slice(&f.grid.period_scale().to_le_bytes());
            out.extend_from_slice(&t.to_le_bytes());
            for c in &s.coeffs {
                out.extend_from_slice(&c.re.to_le_bytes());
                out.extend_from_slice(&c.im.to_le_bytes());
            }
        }
        out
    }

    /// Inverse of [`Trajectory::to_binary`].
    pub fn from_binary(bytes: &[u8], reality: bool, sign: f64) -> Result<Trajectory> {
        let rd = |off: usize| -> Result<f64> {
            bytes
                .get(off..off + 8)
                .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                .ok_or_else(|| Error::Io("truncated trajectory record".into()))
        };
        let mut off = 0;
        let mut times = Vec::new();
        let mut spectra = Vec::new();
        while off < bytes.len() {
            let n = rd(off)? as usize;
            let p = rd(off + 8)?;
            let t = rd(off + 16)?;
            let grid = SpectralGrid::new(n, p)?;
            off += 24;
            let mut coeffs = Vec::with_capacity(n);
            for _ in 0..n {
                coeffs.push(Complex64::new(rd(off)?, rd(off + 8)?));
                off += 16;
            }
            times.push(t);
            spectra.push(Spectrum { grid, coeffs });
        }
        Ok(Trajectory::from_spectra(times, &spectra, reality, sign))
    }
}

pub fn solve(u0: &Field, cfg: &SolverConfig) -> Result<Trajectory> {
    check_grid(u0, cfg)?;
    let st = Stepper::new(cfg)?;
    let steps = cfg.steps();
    let reality = u0.reality_hint;
    let mut s = to_spectrum(u0);
    if reality {
        s.symmetrize_real();
    }
    let mut times = vec![0.0];
    let mut spectra = vec![s.clone()];
    for k in 1..=steps {
        let t = k as f64 * cfg.dt;
        st.step_guarded(&mut s, reality, t)?;
        if k % cfg.snapshot_stride == 0 || k == steps {
            times.push(t);
            spectra.push(s.clone());
        }
    }
    Ok(Trajectory::from_spectra(times, &spectra, reality, cfg.flow_sign()))
}

#[derive(Debug, Clone)]
pub struct PicardOutcome {
    /// `u⁽⁰⁾, u⁽¹⁾, ...` sampled at the snapshot times.
    pub iterates: Vec<Trajectory>,
    /// `residuals[n] = sup_t ‖u⁽ⁿ⁺¹⁾(t) - u⁽ⁿ⁾(t)‖_{H^{1/2}}` over the full time grid.
    pub residuals: Vec<f64>,
}

impl PicardOutcome {
    pub fn ratios(&self) -> Vec<f64> {
        self.residuals.windows(2).map(|w| w[1] / w[0]).collect()
    }
}

/// Picard iteration of `u = W(t)φ + ∫_0^t W(t - t') N(u(t')) dt'`.
///
/// The Duhamel integral is a composite trapezoid on the uniform `dt` grid,
/// accumulated in the interaction picture `e^{-itω} û(t)`.
pub fn picard_solve(u0: &Field, cfg: &SolverConfig, iterations: usize) -> Result<PicardOutcome> {
    check_grid(u0, cfg)?;
    cfg.validate()?;
    if cfg.t_final > 1.0 {
        return Err(Error::config("t_final", "Picard iteration requires T <= 1"));
    }
    if iterations < 2 {
        return Err(Error::config("iterations", "need at least 2 iterations"));
    }
    let g = cfg.grid;
    let n = g.n();
    let steps = cfg.steps();
    let reality = u0.reality_hint;
    let padded = cfg.padded_points();
    let sign = cfg.sign();
    let mut phi = to_spectrum(u0);
    if reality {
        phi.symmetrize_real();
    }
    let times: Vec<f64> = (0..=steps).map(|k| k as f64 * cfg.dt).collect();
    let phase = |t: f64, i: usize| Complex64::new(0.0, t * omega(g.xi(i))).exp();

    let mut current: Vec<Vec<Complex64>> = times
        .iter()
        .map(|&t| (0..n).map(|i| phase(t, i) * phi.coeffs[i]).collect())
        .collect();
    let stored = |states: &[Vec<Complex64>]| -> Trajectory {
        let mut ts = Vec::new();
        let mut sp = Vec::new();
        for (k, st) in states.iter().enumerate() {
            if k % cfg.snapshot_stride == 0 || k == steps {
                ts.push(times[k]);
                sp.push(Spectrum {
                    grid: g,
                    coeffs: st.clone(),
                });
            }
        }
        Trajectory::from_spectra(ts, &sp, reality, cfg.flow_sign())
    };

    let mut iterates = vec![stored(&current)];
    let mut residuals = Vec::with_capacity(iterations);
    for it in 0..iterations {
        // interaction-picture integrand e^{-itω} N̂(u(t))
        let integrand: Vec<Vec<Complex64>> = current
            .par_iter()
            .zip(times.par_iter())
            .map(|(st, &t)| {
                let mut nl = if cfg.linear_only {
                    vec![Complex64::new(0.0, 0.0); n]
                } else {
                    cubic_rhs(st, g, padded, sign)
                };
                for (i, v) in nl.iter_mut().enumerate() {
                    *v *= phase(-t, i);
                }
                nl
            })
            .collect();
        let mut next = Vec::with_capacity(times.len());
        let mut acc = vec![Complex64::new(0.0, 0.0); n];
        for (k, &t) in times.iter().enumerate() {
            if k > 0 {
                for i in 0..n {
                    acc[i] += 0.5 * cfg.dt * (integrand[k - 1][i] + integrand[k][i]);
                }
            }
            let mut s = Spectrum {
                grid: g,
                coeffs: (0..n).map(|i| phase(t, i) * (phi.coeffs[i] + acc[i])).collect(),
            };
            if reality {
                s.symmetrize_real();
            }
            next.push(s.coeffs);
        }
        let res = next
            .iter()
            .zip(&current)
            .map(|(a, b)| {
                let d = Spectrum {
                    grid: g,
                    coeffs: a.iter().zip(b).map(|(x, y)| x - y).collect(),
                };
                sobolev_norm(&d, 0.5, false)
            })
            .fold(0.0, f64::max);
        if !res.is_finite() {
            return Err(Error::Divergence {
                t: cfg.t_final,
                reason: format!("Picard iterate {} is not finite", it + 1),
            });
        }
        if let Some(&prev) = residuals.last() {
            if res > prev {
                warn!("Picard iteration is not contracting: residual {res:e} after {prev:e}");
            }
        }
        residuals.push(res);
        current = next;
        iterates.push(stored(&current));
    }
    Ok(PicardOutcome { iterates, residuals })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(grid: SpectralGrid, amp: f64) -> Field {
        Field::from_real_fn(grid, |x| amp * (-x * x).exp())
    }

    #[test]
    fn free_evolve_examples() {
        let g = SpectralGrid::new(32, 1.0).unwrap();
        let f = Field::from_fn(g, |x| Complex64::new(0.0, x).exp());
        let s = to_spectrum(&f);
        assert_eq!(free_evolve(&s, 0.0), s);
        let t = 0.37;
        let moved = from_spectrum(&free_evolve(&s, t));
        for (j, v) in moved.values.iter().enumerate() {
            let x = g.x(j);
            assert!((v - Complex64::new(0.0, x - t).exp()).norm() < 1e-12);
        }
        let a = free_evolve(&free_evolve(&s, 0.3), 0.4);
        let b = free_evolve(&s, 0.7);
        for (x, y) in a.coeffs.iter().zip(&b.coeffs) {
            assert!((x - y).norm() < 1e-12 * g.length());
        }
    }

    #[test]
    fn nonlinearity_examples() {
        let g = SpectralGrid::new(32, 1.0).unwrap();
        let c = Field::from_real_fn(g, |_| 0.7);
        assert!(nonlinearity(&c, false, 2.0).unwrap().max_abs() < 1e-14);

        // sin² x cos x against the pointwise product on the same grid
        let s = Field::from_real_fn(g, f64::sin);
        let nl = nonlinearity(&s, false, 2.0).unwrap();
        for (j, v) in nl.values.iter().enumerate() {
            let x = g.x(j);
            assert!((v.re - x.sin().powi(2) * x.cos()).abs() < 1e-13);
        }
        let spec = to_spectrum(&nl);
        for i in 0..g.n() {
            let m = g.mode(i).abs();
            if m != 1 && m != 3 {
                assert!(spec.coeffs[i].norm() < 1e-12);
            }
        }

        let u = Field::from_real_fn(g, |x| x.cos() + 0.3 * (5.0 * x).sin());
        let lam = -1.7;
        let a = nonlinearity(&u.scale(lam), false, 2.0).unwrap();
        let b = nonlinearity(&u, false, 2.0).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y * lam.powi(3)).norm() < 1e-12);
        }
        let f = nonlinearity(&u, true, 2.0).unwrap();
        for (x, y) in f.values.iter().zip(&b.values) {
            assert!((x + y).norm() < 1e-14);
        }
        assert!(nonlinearity(&u, false, 1.5).is_err());
    }

    #[test]
    fn dealiased_cube_matches_dense_oracle() {
        // high modes that alias on the unpadded grid
        let g = SpectralGrid::new(16, 1.0).unwrap();
        let f = |x: f64| (6.0 * x).cos() + 0.5 * (7.0 * x).sin();
        let df = |x: f64| -6.0 * (6.0 * x).sin() + 3.5 * (7.0 * x).cos();
        let u = Field::from_real_fn(g, f);
        let nl = to_spectrum(&nonlinearity(&u, false, 2.0).unwrap());
        // dense grid product, projected onto the coarse modes
        let dense = SpectralGrid::new(256, 1.0).unwrap();
        let prod = Field::from_real_fn(dense, |x| f(x).powi(2) * df(x));
        let ps = to_spectrum(&prod);
        for i in 0..g.n() {
            if i == g.nyquist_slot() {
                continue;
            }
            let m = g.mode(i);
            assert!((nl.coeffs[i] - ps.at_mode(m)).norm() < 1e-11, "mode {m}");
        }
    }

    #[test]
    fn config_validation() {
        let g = SpectralGrid::new(32, 1.0).unwrap();
        assert!(SolverConfig::new(g, 0.0, 1.0).is_err());
        assert!(SolverConfig::new(g, 0.3, 1.0).is_err());
        let c = SolverConfig::new(g, 0.01, 1.0).unwrap();
        assert!(c.clone().with_pad(1.0).validate().is_err());
        assert_eq!(c.steps(), 100);
        assert_eq!(c.padded_points(), 64);
    }

    #[test]
    fn zero_and_tiny_data() {
        let g = SpectralGrid::new(64, 2.0).unwrap();
        let cfg = SolverConfig::new(g, 1e-2, 0.1).unwrap();
        let z = Field::zeros(g, true);
        assert!(step(&z, &cfg).unwrap().max_abs() == 0.0);
        let tr = solve(&z, &cfg).unwrap();
        assert!(tr.states.iter().all(|f| f.max_abs() == 0.0));

        let tiny = gaussian(g, 1e-8);
        let stepped = to_spectrum(&step(&tiny, &cfg).unwrap());
        let free = free_evolve(&to_spectrum(&tiny), cfg.dt);
        for (a, b) in stepped.coeffs.iter().zip(&free.coeffs) {
            assert!((a - b).norm() < 1e-20);
        }
    }

    #[test]
    fn both_integrators_agree() {
        let g = SpectralGrid::new(128, 4.0).unwrap();
        let u0 = gaussian(g, 1.0);
        let a = solve(&u0, &SolverConfig::new(g, 1e-3, 0.2).unwrap().with_stride(50)).unwrap();
        let b = solve(
            &u0,
            &SolverConfig::new(g, 1e-3, 0.2)
                .unwrap()
                .with_stride(50)
                .with_integrator(Integrator::Ifrk4),
        )
        .unwrap();
        assert!(a.sup_l2_distance(&b) < 1e-8);
        assert!(a.states.iter().all(Field::satisfies_reality));
    }

    #[test]
    fn divergence_guard_fires() {
        let g = SpectralGrid::new(64, 1.0).unwrap();
        let cfg = SolverConfig::new(g, 0.5, 1.0).unwrap().with_focusing(true);
        let u0 = Field::from_real_fn(g, |x| 30.0 * x.cos());
        match solve(&u0, &cfg) {
            Err(Error::Divergence { t, .. }) => assert!(t > 0.0),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn binary_round_trip() {
        let g = SpectralGrid::new(32, 2.0).unwrap();
        let cfg = SolverConfig::new(g, 1e-2, 0.05).unwrap();
        let tr = solve(&gaussian(g, 0.4), &cfg).unwrap();
        let bytes = tr.to_binary();
        assert_eq!(bytes.len(), tr.times.len() * 8 * (3 + 2 * g.n()));
        let back = Trajectory::from_binary(&bytes, true, 1.0).unwrap();
        assert_eq!(back.times, tr.times);
        assert!(back.sup_l2_distance(&tr) < 1e-14);
        let csv = tr.to_csv();
        assert!(csv.starts_with("t,x,re_u,im_u\n"));
        assert_eq!(csv.lines().count(), 1 + tr.times.len() * g.n());
    }

    #[test]
    fn picard_first_iterate_is_free_flow() {
        let g = SpectralGrid::new(64, 4.0).unwrap();
        let cfg = SolverConfig::new(g, 1e-2, 0.5).unwrap().with_stride(10);
        let u0 = gaussian(g, 0.05);
        let out = picard_solve(&u0, &cfg, 2).unwrap();
        assert_eq!(out.iterates.len(), 3);
        assert_eq!(out.residuals.len(), 2);
        let s0 = to_spectrum(&u0);
        for (t, f) in out.iterates[0].times.iter().zip(&out.iterates[0].states) {
            let free = field_from(&free_evolve(&s0, *t), true);
            let d: f64 = f
                .values
                .iter()
                .zip(&free.values)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(d < 1e-14);
        }
        assert!(picard_solve(&u0, &cfg, 1).is_err());
        assert!(picard_solve(&u0, &cfg.clone().with_t_final(2.0), 3).is_err());
    }
}

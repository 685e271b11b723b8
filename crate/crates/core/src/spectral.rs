//! Periodic spectral infrastructure.
//!
//! The torus has period `L = 2πP`; samples sit at `x_j = j L / n - πP` and
//! the frequency lattice is `xi_m = m / P`, `m ∈ [-n/2, n/2)`. Coefficients
//! use the continuum convention `û(xi) = ∫ e^{-i x xi} u(x) dx`, approximated
//! by the (spectrally exact) trapezoid rule, so that
//!
//! ```text
//! u(x) = (1/L) Σ_m û(xi_m) e^{i x xi_m},     ∫|u|² dx = (1/L) Σ_m |û(xi_m)|².
//! ```
//!
//! Coefficients are stored in FFT order (index `i` ↔ `m = i` for `i < n/2`,
//! `m = i - n` otherwise). With this normalisation, zero-padding a spectrum
//! onto a finer grid of the same period needs no rescaling.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::cutoff;
use crate::error::{Error, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if forward {
            p.plan_fft_forward(n)
        } else {
            p.plan_fft_inverse(n)
        }
    })
}

/// In-place unnormalised forward DFT.
pub fn fft_forward(buf: &mut [Complex64]) {
    plan(buf.len(), true).process(buf);
}

/// In-place unnormalised inverse DFT.
pub fn fft_inverse(buf: &mut [Complex64]) {
    plan(buf.len(), false).process(buf);
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralGrid {
    n: usize,
    period_scale: f64,
}

impl SpectralGrid {
    pub fn new(n: usize, period_scale: f64) -> Result<Self> {
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::config(
                "n",
                format!("grid size must be a power of two >= 8, got {n}"),
            ));
        }
        if !(period_scale > 0.0 && period_scale.is_finite()) {
            return Err(Error::config(
                "period_scale",
                format!("must be positive and finite, got {period_scale}"),
            ));
        }
        Ok(SpectralGrid { n, period_scale })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn period_scale(&self) -> f64 {
        self.period_scale
    }

    /// `2πP`
    pub fn length(&self) -> f64 {
        2.0 * PI * self.period_scale
    }

    pub fn dx(&self) -> f64 {
        self.length() / self.n as f64
    }

    /// Frequency spacing `1/P`.
    pub fn dxi(&self) -> f64 {
        1.0 / self.period_scale
    }

    pub fn x(&self, j: usize) -> f64 {
        j as f64 * self.dx() - PI * self.period_scale
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x(j)).collect()
    }

    /// Signed lattice index of FFT slot `i`.
    pub fn mode(&self, i: usize) -> i64 {
        mode_of(i, self.n)
    }

    /// FFT slot holding lattice index `m`, if representable.
    pub fn slot(&self, m: i64) -> Option<usize> {
        let half = (self.n / 2) as i64;
        if m < -half || m >= half {
            None
        } else if m >= 0 {
            Some(m as usize)
        } else {
            Some((m + self.n as i64) as usize)
        }
    }

    pub fn xi(&self, i: usize) -> f64 {
        self.mode(i) as f64 / self.period_scale
    }

    /// Frequencies in FFT order.
    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.xi(i)).collect()
    }

    /// Frequencies in ascending order, `-n/(2P), ..., (n/2 - 1)/P`.
    pub fn frequencies_ascending(&self) -> Vec<f64> {
        let half = (self.n / 2) as i64;
        (-half..half).map(|m| m as f64 / self.period_scale).collect()
    }

    /// Slot of the Nyquist mode `m = -n/2`.
    pub fn nyquist_slot(&self) -> usize {
        self.n / 2
    }

    /// Largest resolved |xi| (excluding the Nyquist mode).
    pub fn max_xi(&self) -> f64 {
        ((self.n / 2) as f64 - 1.0) / self.period_scale
    }

    /// Same period, `m` points.
    pub fn with_points(&self, m: usize) -> Result<Self> {
        SpectralGrid::new(m, self.period_scale)
    }
}

pub(crate) fn mode_of(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

fn parity(m: i64) -> f64 {
    if m.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub grid: SpectralGrid,
    pub values: Vec<Complex64>,
    /// The field represents a real-valued function.
    pub reality_hint: bool,
}

impl Field {
    pub fn new(grid: SpectralGrid, values: Vec<Complex64>, reality_hint: bool) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::GridMismatch(format!(
                "{} samples for a grid of {} points",
                values.len(),
                grid.n()
            )));
        }
        Ok(Field {
            grid,
            values,
            reality_hint,
        })
    }

    pub fn zeros(grid: SpectralGrid, reality_hint: bool) -> Self {
        Field {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.n()],
            reality_hint,
        }
    }

    pub fn from_real_fn(grid: SpectralGrid, mut f: impl FnMut(f64) -> f64) -> Self {
        Field {
            grid,
            values: grid.xs().into_iter().map(|x| Complex64::new(f(x), 0.0)).collect(),
            reality_hint: true,
        }
    }

    pub fn from_fn(grid: SpectralGrid, f: impl FnMut(f64) -> Complex64) -> Self {
        Field {
            grid,
            values: grid.xs().into_iter().map(f).collect(),
            reality_hint: false,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn max_imag(&self) -> f64 {
        self.values.iter().map(|v| v.im.abs()).fold(0.0, f64::max)
    }

    /// Reality invariant: `max |Im u| <= 1e-10 max |u|`.
    pub fn satisfies_reality(&self) -> bool {
        self.max_imag() <= 1e-10 * self.max_abs()
    }

    /// `∫|u|² dx` by the trapezoid rule.
    pub fn l2_norm_sq(&self) -> f64 {
        self.grid.dx() * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()
    }

    pub fn to_spectrum(&self) -> Spectrum {
        to_spectrum(self)
    }

    pub fn scale(&self, c: f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|v| v * c).collect(),
            reality_hint: self.reality_hint,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub grid: SpectralGrid,
    /// `û(xi_m)` in FFT order.
    pub coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn zeros(grid: SpectralGrid) -> Self {
        Spectrum {
            grid,
            coeffs: vec![Complex64::new(0.0, 0.0); grid.n()],
        }
    }

    /// Coefficient at lattice index `m` (zero when not representable).
    pub fn at_mode(&self, m: i64) -> Complex64 {
        self.grid.slot(m).map(|s| self.coeffs[s]).unwrap_or_default()
    }

    /// Multiply each coefficient by `f(xi)`.
    pub fn map_multiplier(&self, f: impl Fn(f64) -> Complex64) -> Spectrum {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * f(self.grid.xi(i)))
            .collect();
        Spectrum {
            grid: self.grid,
            coeffs,
        }
    }

    pub fn map_real_multiplier(&self, f: impl Fn(f64) -> f64) -> Spectrum {
        self.map_multiplier(|xi| Complex64::new(f(xi), 0.0))
    }

    /// Parseval: `(1/L) Σ |û|²`.
    pub fn l2_norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>() / self.grid.length()
    }

    /// Hermitian symmetrisation `c_m ← (c_m + conj(c_{-m}))/2`, the spectrum
    /// of the real part of the field. The Nyquist mode is made real.
    pub fn symmetrize_real(&mut self) {
        let n = self.grid.n();
        let old = self.coeffs.clone();
        for i in 0..n {
            let j = (n - i) % n;
            self.coeffs[i] = 0.5 * (old[i] + old[j].conj());
        }
    }

    pub fn add(&self, other: &Spectrum) -> Spectrum {
        Spectrum {
            grid: self.grid,
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Spectrum) -> Spectrum {
        Spectrum {
            grid: self.grid,
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn scale(&self, c: Complex64) -> Spectrum {
        Spectrum {
            grid: self.grid,
            coeffs: self.coeffs.iter().map(|v| v * c).collect(),
        }
    }

    /// Zero-pad (or truncate) onto an `m`-point grid with the same period.
    pub fn resample(&self, m: usize) -> Result<Spectrum> {
        let grid = self.grid.with_points(m)?;
        let mut out = Spectrum::zeros(grid);
        for i in 0..self.grid.n() {
            if let Some(s) = grid.slot(self.grid.mode(i)) {
                out.coeffs[s] = self.coeffs[i];
            }
        }
        Ok(out)
    }
}

pub fn to_spectrum(f: &Field) -> Spectrum {
    let g = f.grid;
    let mut buf = f.values.clone();
    fft_forward(&mut buf);
    let scale = g.dx();
    for (i, c) in buf.iter_mut().enumerate() {
        *c *= scale * parity(g.mode(i));
    }
    Spectrum { grid: g, coeffs: buf }
}

/// Inverse of [`to_spectrum`]; the result carries no reality hint.
pub fn from_spectrum(s: &Spectrum) -> Field {
    let g = s.grid;
    let inv_l = 1.0 / g.length();
    let mut buf: Vec<Complex64> = s
        .coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| c * (inv_l * parity(g.mode(i))))
        .collect();
    fft_inverse(&mut buf);
    Field {
        grid: g,
        values: buf,
        reality_hint: false,
    }
}

/// Hilbert transform, multiplier `-i sgn(xi)` with `sgn(0) = 0`.
pub fn hilbert(s: &Spectrum) -> Spectrum {
    s.map_multiplier(hilbert_symbol)
}

pub fn hilbert_symbol(xi: f64) -> Complex64 {
    if xi > 0.0 {
        Complex64::new(0.0, -1.0)
    } else if xi < 0.0 {
        Complex64::new(0.0, 1.0)
    } else {
        Complex64::new(0.0, 0.0)
    }
}

/// `∂_x`, multiplier `i xi`.
pub fn derivative(s: &Spectrum) -> Spectrum {
    s.map_multiplier(|xi| Complex64::new(0.0, xi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Projection {
    /// Smooth `chi_k`.
    P(i32),
    /// Sharp indicator of `O_k`.
    R(i32),
    /// `sum_{l <= k} chi_l = eta0(xi / 2^k)` (keeps the mean).
    PLeq(i32),
    /// `1 - P_{<= k-1}`.
    PGeq(i32),
    /// `sum_{l <= k} 1_{O_l}`: `0 < |xi| < (3/2) 2^k`.
    RLeq(i32),
    /// `1_{xi > 0}`.
    PPlus,
}

impl Projection {
    pub fn symbol(&self, xi: f64) -> f64 {
        match *self {
            Projection::P(k) => cutoff::chi(k, xi),
            Projection::R(k) => f64::from(u8::from(cutoff::in_o_k(k, xi))),
            Projection::PLeq(k) => cutoff::eta0(xi / cutoff::pow2(k)),
            Projection::PGeq(k) => 1.0 - cutoff::eta0(xi / cutoff::pow2(k - 1)),
            Projection::RLeq(k) => {
                let r = xi.abs();
                f64::from(u8::from(r > 0.0 && r < 1.5 * cutoff::pow2(k)))
            }
            Projection::PPlus => f64::from(u8::from(xi > 0.0)),
        }
    }
}

pub fn project(s: &Spectrum, p: Projection) -> Spectrum {
    s.map_real_multiplier(|xi| p.symbol(xi))
}

/// `‖u‖_{H^s}` with weight `(1+xi²)^{s/2}`, or `‖u‖_{Ḣ^s}` with weight
/// `|xi|^s`; the homogeneous norm skips the `xi = 0` mode.
pub fn sobolev_norm(s: &Spectrum, exponent: f64, homogeneous: bool) -> f64 {
    let g = s.grid;
    let sum: f64 = s
        .coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let xi = g.xi(i);
            let w = if homogeneous {
                if xi == 0.0 {
                    0.0
                } else {
                    xi.abs().powf(2.0 * exponent)
                }
            } else {
                (1.0 + xi * xi).powf(exponent)
            };
            w * c.norm_sqr()
        })
        .sum();
    (sum / g.length()).sqrt()
}

/// Low cutoff standing in for `P_{≲1}`.
pub const GAUGE_LOW: Projection = Projection::PLeq(0);
/// High cutoff standing in for `P_{≫1}`.
pub const GAUGE_HIGH: Projection = Projection::PGeq(10);

/// `v = exp(-(i/2) ∫^x (P_{≤0} u)² dy) · P_+ P_{≥10} u`.
///
/// The primitive is the zero-mean periodic antiderivative plus `mean · x`.
pub fn gauge_transform(u: &Field) -> Result<Field> {
    if !u.reality_hint {
        return Err(Error::Domain("gauge transform needs a real-valued field".into()));
    }
    let g = u.grid;
    let spec = to_spectrum(u);
    let high = from_spectrum(&project(&project(&spec, GAUGE_HIGH), Projection::PPlus));

    // (P_{<=0} u)^2 on a grid twice as fine, then back: exact for a quadratic.
    let low_spec = project(&spec, GAUGE_LOW).resample(2 * g.n())?;
    let low_fine = from_spectrum(&low_spec);
    let sq = Field {
        grid: low_fine.grid,
        values: low_fine.values.iter().map(|v| v * v).collect(),
        reality_hint: false,
    };
    let sq_spec = to_spectrum(&sq).resample(g.n())?;
    let mean = sq_spec.coeffs[0] / g.length();
    let prim_spec = sq_spec.map_multiplier(|xi| {
        if xi == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, -1.0 / xi)
        }
    });
    let prim = from_spectrum(&prim_spec);

    let values = prim
        .values
        .iter()
        .zip(&high.values)
        .enumerate()
        .map(|(j, (p, h))| {
            let phase = p + mean * g.x(j);
            (Complex64::new(0.0, -0.5) * phase).exp() * h
        })
        .collect();
    Ok(Field {
        grid: g,
        values,
        reality_hint: false,
    })
}

//! Weighted energies `E0 = (A(D)u, u)`, the quartic correction `E1`, and the
//! flux identities `d/dt E0 = R4`, `d/dt (E0 + E1) = R6`.
//!
//! Lattice sums run over the non-Nyquist modes of the grid; with the Nyquist
//! coefficient zero the identities hold exactly for the truncated flow the
//! solver integrates. A `Γ4` sum carries the weight `1/L³`, a `Γ6` sum `1/L⁵`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cutoff;
use crate::error::{Error, Result};
use crate::invariants;
use crate::quadrature::pairwise_sum;
use crate::report::{fit_line, SweepReport};
use crate::solver::{cubic_rhs, omega, solve, SolverConfig, Trajectory};
use crate::spectral::{to_spectrum, Field, SpectralGrid, Spectrum};

/// Threshold `θ` of the direct quotient: used when `|Σω| ≥ θ μ²`.
pub const DIRECT_THRESHOLD: f64 = 1e-6;
/// Largest grid accepted by the `O(n⁵)` sextic sum.
pub const R6_MAX_POINTS: usize = 32;

type Evaluator = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum SymbolKind {
    Power,
    Custom(Evaluator),
}

/// Even multiplier `a(ξ)` of order `s`, optionally multiplied by `η_{≥1}`.
#[derive(Clone)]
pub struct SymbolS {
    pub s: f64,
    pub epsilon: f64,
    pub high_pass: bool,
    kind: SymbolKind,
}

impl fmt::Debug for SymbolS {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            SymbolKind::Power => "power",
            SymbolKind::Custom(_) => "custom",
        };
        f.debug_struct("SymbolS")
            .field("s", &self.s)
            .field("epsilon", &self.epsilon)
            .field("high_pass", &self.high_pass)
            .field("kind", &kind)
            .finish()
    }
}

/// `(1 + ξ²)^s`, optionally high-passed.
pub fn make_symbol(s: f64, epsilon: f64, high_pass: bool) -> Result<SymbolS> {
    let a = SymbolS {
        s,
        epsilon,
        high_pass,
        kind: SymbolKind::Power,
    };
    a.validate()?;
    Ok(a)
}

/// Symbol with a caller-supplied base evaluator, checked like the default.
pub fn custom_symbol(
    s: f64,
    epsilon: f64,
    high_pass: bool,
    f: impl Fn(f64) -> f64 + Send + Sync + 'static,
) -> Result<SymbolS> {
    let a = SymbolS {
        s,
        epsilon,
        high_pass,
        kind: SymbolKind::Custom(Arc::new(f)),
    };
    a.validate()?;
    Ok(a)
}

impl SymbolS {
    fn base(&self, xi: f64) -> f64 {
        match &self.kind {
            SymbolKind::Power => (1.0 + xi * xi).powf(self.s),
            SymbolKind::Custom(f) => f(xi),
        }
    }

    fn base_deriv(&self, xi: f64) -> f64 {
        match &self.kind {
            SymbolKind::Power => 2.0 * self.s * xi * (1.0 + xi * xi).powf(self.s - 1.0),
            SymbolKind::Custom(f) => {
                let h = 1e-5 * (1.0 + xi.abs());
                (f(xi + h) - f(xi - h)) / (2.0 * h)
            }
        }
    }

    pub fn eval(&self, xi: f64) -> f64 {
        let b = self.base(xi);
        if self.high_pass {
            b * cutoff::eta_geq1(xi)
        } else {
            b
        }
    }

    pub fn deriv(&self, xi: f64) -> f64 {
        let d = self.base_deriv(xi);
        if self.high_pass {
            d * cutoff::eta_geq1(xi) - self.base(xi) * cutoff::eta0_deriv(xi)
        } else {
            d
        }
    }

    /// `g(ξ) = ξ a(ξ)`.
    pub fn g(&self, xi: f64) -> f64 {
        xi * self.eval(xi)
    }

    pub fn g_deriv(&self, xi: f64) -> f64 {
        self.eval(xi) + xi * self.deriv(xi)
    }

    /// Constant of the sampled regularity check `|a'| ≤ C a ⟨ξ⟩^{-1}`.
    pub fn regularity_constant(&self) -> f64 {
        2.0 * (self.s + self.epsilon) + 1.0
    }

    /// Evenness, positivity, regularity and the decay window, sampled on a
    /// logarithmic grid. Regularity is checked on the base symbol: the
    /// high-passed one vanishes on `[-5/4, 5/4]`.
    fn validate(&self) -> Result<()> {
        if !(self.s >= 0.0 && self.s.is_finite()) {
            return Err(Error::config("s", "order must be nonnegative"));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::config("epsilon", "window width must be positive"));
        }
        let c = self.regularity_constant();
        for i in 0..=180 {
            let xi = 10f64.powf(-3.0 + 9.0 * f64::from(i) / 180.0);
            let (p, m) = (self.base(xi), self.base(-xi));
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::Domain(format!("symbol is not positive at {xi:e}")));
            }
            if (p - m).abs() > 1e-12 * p {
                return Err(Error::Domain(format!("symbol is not even at {xi:e}")));
            }
            let bound = c * p / (1.0 + xi * xi).sqrt();
            if self.base_deriv(xi).abs() > bound * (1.0 + 1e-9) {
                return Err(Error::Domain(format!("symbol fails the regularity bound at {xi:e}")));
            }
            if xi >= 8.0 {
                let r = self.eval(xi).ln() / (1.0 + xi * xi).ln();
                if r < self.s - 1e-12 || r > self.s + self.epsilon + 1e-12 {
                    return Err(Error::Domain(format!(
                        "log a / log(1+xi^2) = {r} leaves [s, s+eps] at {xi:e}"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn check_gamma4(xi: [f64; 4]) -> Result<f64> {
    let mu = xi.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let sum: f64 = xi.iter().sum();
    if sum.abs() > 1e-9 * mu {
        return Err(Error::Domain(format!(
            "frequencies sum to {sum:e}, not on the quartic hyperplane"
        )));
    }
    Ok(mu)
}

/// `(1/6) Σ g(ξᵢ) / Σ ω(ξᵢ)` evaluated literally.
pub fn b4_direct(xi: [f64; 4], a: &SymbolS) -> f64 {
    let num: f64 = xi.iter().map(|&x| a.g(x)).sum();
    let den: f64 = xi.iter().map(|&x| omega(x)).sum();
    num / (6.0 * den)
}

/// `(g(x) + g(y)) / (x + y)`, by the midpoint derivative near `x + y = 0`.
fn q(a: &SymbolS, x: f64, y: f64) -> f64 {
    let scale = x.abs().max(y.abs());
    if (x + y).abs() < 1e-5 * scale || scale == 0.0 {
        a.g_deriv(0.5 * (x - y))
    } else {
        (a.g(x) + a.g(y)) / (x + y)
    }
}

/// Difference-quotient form of `b4`, finite on the whole hyperplane.
pub fn b4_stable(xi: [f64; 4], a: &SymbolS) -> f64 {
    let mu = xi.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if mu == 0.0 {
        return 0.0;
    }
    let negatives = xi.iter().filter(|&&x| x < 0.0).count();
    // b4 is even under ξ -> -ξ
    let (v, neg) = if negatives == 3 {
        (xi.map(|x| -x), 1)
    } else {
        (xi, negatives)
    };
    match neg {
        1 => {
            let mut t: Vec<f64> = v.iter().copied().filter(|&x| x >= 0.0).collect();
            t.sort_by(f64::total_cmp);
            let x4 = v.iter().copied().find(|&x| x < 0.0).unwrap_or(0.0);
            let (t1, t2, t3) = (t[0], t[1], t[2]);
            let frac = if t1 + t2 > 0.0 { t1 * t2 / (t1 + t2) } else { 0.0 };
            (q(a, t1, t2) - q(a, t3, x4)) / (12.0 * (t3 + frac))
        }
        2 => {
            let n: Vec<f64> = v.iter().copied().filter(|&x| x < 0.0).collect();
            let p: Vec<f64> = v.iter().copied().filter(|&x| x >= 0.0).collect();
            let (n1, n2) = (n[0], n[1]);
            // Σω = 2 (n1 + p1)(n1 + p2); divide by the larger factor
            let (p1, p2) = if (n1 + p[1]).abs() >= (n1 + p[0]).abs() {
                (p[0], p[1])
            } else {
                (p[1], p[0])
            };
            let d = n1 + p2;
            if d.abs() >= 1e-5 * mu {
                (q(a, n1, p1) - q(a, p2, n2)) / (12.0 * d)
            } else {
                let phi = |t: f64| q(a, n1 - t, p1 + t);
                let h = 1e-4 * mu;
                -(phi(0.5 * d + h) - phi(0.5 * d - h)) / (24.0 * h)
            }
        }
        _ => 0.0,
    }
}

/// `b4` with the `1/6` convention of the defocusing flow.
pub fn b4_eval(xi: [f64; 4], a: &SymbolS) -> Result<f64> {
    let mu = check_gamma4(xi)?;
    if mu == 0.0 {
        return Ok(0.0);
    }
    let den: f64 = xi.iter().map(|&x| omega(x)).sum();
    if den.abs() >= DIRECT_THRESHOLD * mu * mu {
        Ok(b4_direct(xi, a))
    } else {
        Ok(b4_stable(xi, a))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyOrder {
    E0,
    E1,
}

/// Quartic multiplier tabulated on the grid's non-Nyquist `Γ4` lattice.
pub struct QuarticForm {
    grid: SpectralGrid,
    a: SymbolS,
    sign: f64,
    /// `b4(m1, m2, m3, -(m1+m2+m3))` at `[i1][i2][i3]`, zero off the lattice.
    table: Vec<f64>,
}

impl QuarticForm {
    pub fn new(grid: SpectralGrid, a: &SymbolS, focusing: bool) -> Self {
        let k = grid.n() - 1;
        let h = (grid.n() / 2 - 1) as i64;
        let p = grid.period_scale();
        let table: Vec<f64> = (0..k * k * k)
            .into_par_iter()
            .map(|idx| {
                let (i1, i2, i3) = (idx / (k * k), (idx / k) % k, idx % k);
                let m = [i1 as i64 - h, i2 as i64 - h, i3 as i64 - h];
                let m4 = -(m[0] + m[1] + m[2]);
                if m4.abs() > h {
                    return 0.0;
                }
                let xi = [m[0] as f64 / p, m[1] as f64 / p, m[2] as f64 / p, m4 as f64 / p];
                b4_eval(xi, a).expect("lattice point lies on the hyperplane")
            })
            .collect();
        QuarticForm {
            grid,
            a: a.clone(),
            sign: if focusing { -1.0 } else { 1.0 },
            table,
        }
    }

    fn half(&self) -> i64 {
        (self.grid.n() / 2 - 1) as i64
    }

    fn width(&self) -> usize {
        self.grid.n() - 1
    }

    /// Coefficients of modes `-h..=h` in ascending order.
    fn lattice(&self, s: &Spectrum) -> Result<Vec<Complex64>> {
        if s.grid != self.grid {
            return Err(Error::GridMismatch(
                "spectrum and quartic form use different grids".into(),
            ));
        }
        let h = self.half();
        Ok((-h..=h).map(|m| s.at_mode(m)).collect())
    }

    fn b4(&self, i1: usize, i2: usize, i3: usize) -> f64 {
        let k = self.width();
        self.sign * self.table[(i1 * k + i2) * k + i3]
    }

    /// Ordered reduction of `Σ_{Γ4} w(i1,i2,i3,i4) û1 û2 û3 û4`.
    fn gamma4_sum(&self, u: &[Complex64], w: impl Fn(usize, usize, usize, usize) -> f64 + Sync) -> Complex64 {
        let k = self.width();
        let h = self.half();
        let partial: Vec<Complex64> = (0..k)
            .into_par_iter()
            .map(|i1| {
                let mut acc = Complex64::new(0.0, 0.0);
                for i2 in 0..k {
                    let u12 = u[i1] * u[i2];
                    for i3 in 0..k {
                        let m4 = 3 * h - (i1 + i2 + i3) as i64;
                        if m4.abs() > h {
                            continue;
                        }
                        let i4 = (m4 + h) as usize;
                        acc += w(i1, i2, i3, i4) * u12 * u[i3] * u[i4];
                    }
                }
                acc
            })
            .collect();
        sum_complex(&partial)
    }

    /// `E1 = (1/L³) Σ_{Γ4} b4 û1 û2 û3 û4` (real part; real for real data).
    pub fn e1(&self, s: &Spectrum) -> Result<f64> {
        let u = self.lattice(s)?;
        let l = self.grid.length();
        Ok(self.gamma4_sum(&u, |i1, i2, i3, _| self.b4(i1, i2, i3)).re / l.powi(3))
    }

    /// `R4 = -(i/(6L³)) Σ_{Γ4} (Σ ξⱼ a(ξⱼ)) û1 û2 û3 û4`, signed by the flow.
    pub fn r4(&self, s: &Spectrum) -> Result<f64> {
        let u = self.lattice(s)?;
        let h = self.half();
        let p = self.grid.period_scale();
        let g: Vec<f64> = (-h..=h).map(|m| self.a.g(m as f64 / p)).collect();
        let sum = self.gamma4_sum(&u, |i1, i2, i3, i4| g[i1] + g[i2] + g[i3] + g[i4]);
        let l = self.grid.length();
        Ok((Complex64::new(0.0, -self.sign / 6.0) * sum).re / l.powi(3))
    }

    /// `R6 = ±(4i/(3L⁵)) Σ b4(ξ1,ξ2,ξ3,ξ_M) ξ_M û1 û2 û3 Σ_{ξ4+ξ5+ξ6=ξ_M} û4 û5 û6`
    /// with `ξ_M = -(ξ1+ξ2+ξ3)`, summed literally.
    pub fn r6(&self, s: &Spectrum) -> Result<f64> {
        if self.grid.n() > R6_MAX_POINTS {
            return Err(Error::CostGuard(format!(
                "sextic sum needs n <= {R6_MAX_POINTS}, got {}",
                self.grid.n()
            )));
        }
        let u = self.lattice(s)?;
        let k = self.width();
        let h = self.half();
        let p = self.grid.period_scale();
        // cubic convolution of the lattice coefficients, indexed by mode
        let cube: Vec<Complex64> = (-h..=h)
            .map(|mm| {
                let mut acc = Complex64::new(0.0, 0.0);
                for i4 in 0..k {
                    for i5 in 0..k {
                        let m6 = mm - (i4 as i64 - h) - (i5 as i64 - h);
                        if m6.abs() <= h {
                            acc += u[i4] * u[i5] * u[(m6 + h) as usize];
                        }
                    }
                }
                acc
            })
            .collect();
        let partial: Vec<Complex64> = (0..k)
            .into_par_iter()
            .map(|i1| {
                let mut acc = Complex64::new(0.0, 0.0);
                for i2 in 0..k {
                    for i3 in 0..k {
                        let mm = 3 * h - (i1 + i2 + i3) as i64;
                        if mm.abs() > h {
                            continue;
                        }
                        let im = (mm + h) as usize;
                        let xm = mm as f64 / p;
                        acc += self.b4(i1, i2, i3) * xm * u[i1] * u[i2] * u[i3] * cube[im];
                    }
                }
                acc
            })
            .collect();
        let l = self.grid.length();
        Ok((Complex64::new(0.0, 4.0 * self.sign / 3.0) * sum_complex(&partial)).re / l.powi(5))
    }

    /// `R6` through `4 (1/L³) Σ_{Γ4} b4 û1 û2 û3 N̂(ξ_M)` with `N̂` from the
    /// dealiased solver nonlinearity. Any grid size.
    pub fn r6_factored(&self, s: &Spectrum) -> Result<f64> {
        let u = self.lattice(s)?;
        let g = self.grid;
        let padded = (2 * g.n()).next_power_of_two();
        let nl = cubic_rhs(&s.coeffs, g, padded, self.sign);
        let h = self.half();
        let nlat: Vec<Complex64> = (-h..=h)
            .map(|m| g.slot(m).map_or(Complex64::new(0.0, 0.0), |i| nl[i]))
            .collect();
        let k = self.width();
        let partial: Vec<Complex64> = (0..k)
            .into_par_iter()
            .map(|i1| {
                let mut acc = Complex64::new(0.0, 0.0);
                for i2 in 0..k {
                    for i3 in 0..k {
                        let mm = 3 * h - (i1 + i2 + i3) as i64;
                        if mm.abs() > h {
                            continue;
                        }
                        acc += self.b4(i1, i2, i3) * u[i1] * u[i2] * u[i3] * nlat[(mm + h) as usize];
                    }
                }
                acc
            })
            .collect();
        Ok(4.0 * sum_complex(&partial).re / g.length().powi(3))
    }
}

fn sum_complex(v: &[Complex64]) -> Complex64 {
    let re: Vec<f64> = v.iter().map(|c| c.re).collect();
    let im: Vec<f64> = v.iter().map(|c| c.im).collect();
    Complex64::new(pairwise_sum(&re), pairwise_sum(&im))
}

/// `E0 = (1/L) Σ a(ξ) |û(ξ)|²`.
pub fn e0(s: &Spectrum, a: &SymbolS) -> f64 {
    let g = s.grid;
    let terms: Vec<f64> = s
        .coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| a.eval(g.xi(i)) * c.norm_sqr())
        .collect();
    pairwise_sum(&terms) / g.length()
}

/// `E0` or `E1` of the defocusing flow.
pub fn modified_energy(s: &Spectrum, a: &SymbolS, order: EnergyOrder) -> Result<f64> {
    match order {
        EnergyOrder::E0 => Ok(e0(s, a)),
        EnergyOrder::E1 => QuarticForm::new(s.grid, a, false).e1(s),
    }
}

pub fn r4(s: &Spectrum, a: &SymbolS) -> Result<f64> {
    QuarticForm::new(s.grid, a, false).r4(s)
}

pub fn r6(s: &Spectrum, a: &SymbolS) -> Result<f64> {
    if s.grid.n() > R6_MAX_POINTS {
        return Err(Error::CostGuard(format!(
            "sextic sum needs n <= {R6_MAX_POINTS}, got {}",
            s.grid.n()
        )));
    }
    QuarticForm::new(s.grid, a, false).r6(s)
}

/// Fill `modified_e0` and `modified_e01` of every logged snapshot.
pub fn annotate(tr: &mut Trajectory, form: &QuarticForm) -> Result<()> {
    for (snap, state) in tr.invariant_log.iter_mut().zip(&tr.states) {
        let s = to_spectrum(state);
        let e0v = e0(&s, &form.a);
        snap.modified_e0 = Some(e0v);
        snap.modified_e01 = Some(e0v + form.e1(&s)?);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyRow {
    pub amplitude: f64,
    pub drift_e0: f64,
    pub drift_e01: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub rows: Vec<EnergyRow>,
    /// Slope of `log drift_e0` against `log amplitude`.
    pub slope_e0: f64,
    pub slope_e01: f64,
}

impl EnergyReport {
    pub fn to_report(&self) -> SweepReport {
        let mut rep = SweepReport::new("modified_energy", &["amplitude", "drift_e0", "drift_e01"]);
        for r in &self.rows {
            rep.push(vec![r.amplitude.into(), r.drift_e0.into(), r.drift_e01.into()]);
        }
        rep.values.insert("slope_e0".into(), self.slope_e0);
        rep.values.insert("slope_e01".into(), self.slope_e01);
        rep
    }
}

/// Solve from `amplitude · shape` for each amplitude and record the largest
/// absolute excursion of `E0` and of `E0 + E1` from their initial values.
pub fn cancellation_experiment(
    amplitudes: &[f64],
    cfg: &SolverConfig,
    a: &SymbolS,
    shape: &Field,
) -> Result<EnergyReport> {
    if amplitudes.len() < 2 || amplitudes.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::config("amplitudes", "need at least two positive amplitudes"));
    }
    if !shape.reality_hint {
        return Err(Error::Domain("cancellation experiment needs real data".into()));
    }
    let form = QuarticForm::new(cfg.grid, a, cfg.focusing);
    let mut rows = Vec::with_capacity(amplitudes.len());
    for &amp in amplitudes {
        let mut spec = to_spectrum(&shape.scale(amp));
        spec.coeffs[cfg.grid.nyquist_slot()] = Complex64::new(0.0, 0.0);
        let u0 = crate::solver::field_from(&spec, true);
        let mut tr = solve(&u0, cfg)?;
        annotate(&mut tr, &form)?;
        let drift = |get: fn(&invariants::ConservedSnapshot) -> Option<f64>| {
            let v0 = get(&tr.invariant_log[0]).unwrap_or(0.0);
            tr.invariant_log
                .iter()
                .filter_map(get)
                .map(|v| (v - v0).abs())
                .fold(0.0, f64::max)
        };
        rows.push(EnergyRow {
            amplitude: amp,
            drift_e0: drift(|c| c.modified_e0),
            drift_e01: drift(|c| c.modified_e01),
        });
    }
    let la: Vec<f64> = rows.iter().map(|r| r.amplitude.ln()).collect();
    let l0: Vec<f64> = rows.iter().map(|r| r.drift_e0.max(f64::MIN_POSITIVE).ln()).collect();
    let l1: Vec<f64> = rows.iter().map(|r| r.drift_e01.max(f64::MIN_POSITIVE).ln()).collect();
    Ok(EnergyReport {
        slope_e0: fit_line(&la, &l0).slope,
        slope_e01: fit_line(&la, &l1).slope,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn perms(v: [f64; 4]) -> Vec<[f64; 4]> {
        let mut out = Vec::new();
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    for d in 0..4 {
                        let idx = [a, b, c, d];
                        let mut seen = [false; 4];
                        idx.iter().for_each(|&i| seen[i] = true);
                        if seen.iter().all(|&x| x) {
                            out.push(idx.map(|i| v[i]));
                        }
                    }
                }
            }
        }
        out
    }

    #[test]
    fn symbol_examples() {
        let a = make_symbol(0.7, 0.1, false).unwrap();
        assert_eq!(a.eval(0.0), 1.0);
        for xi in [8.0, 50.0, 1e4] {
            let r = a.eval(xi).ln() / (1.0 + xi * xi).ln();
            assert!((r - 0.7).abs() < 1e-14);
        }
        let hp = make_symbol(0.7, 0.1, true).unwrap();
        for xi in [0.0, 0.5, -1.0, 1.25] {
            assert_eq!(hp.eval(xi), 0.0);
        }
        assert!(make_symbol(-0.1, 0.1, false).is_err());
        assert!(custom_symbol(1.0, 0.1, false, |x| 1.0 + x * x + x).is_err());
        assert!(custom_symbol(0.5, 0.1, false, |x| 2.0 + x * x).is_err());
        assert!(custom_symbol(1.0, 0.1, false, |x| 1.0 + x * x).is_ok());
    }

    #[test]
    fn symbol_derivative_matches_finite_difference() {
        let hp = make_symbol(1.3, 0.1, true).unwrap();
        for xi in [0.3, 1.3, 1.45, 2.0, 17.0] {
            let h = 1e-6;
            let fd = (hp.eval(xi + h) - hp.eval(xi - h)) / (2.0 * h);
            assert!((fd - hp.deriv(xi)).abs() < 1e-5 * (1.0 + fd.abs()), "{xi}");
        }
    }

    #[test]
    fn b4_reference_value_and_symmetry() {
        let a = make_symbol(1.0, 0.1, false).unwrap();
        let v = b4_eval([1.0, 1.0, 1.0, -3.0], &a).unwrap();
        assert!((v + 2.0 / 3.0).abs() < 1e-14);
        assert!((b4_stable([1.0, 1.0, 1.0, -3.0], &a) + 2.0 / 3.0).abs() < 1e-14);
        let base = [2.5, -0.75, 3.0, -4.75];
        let want = b4_eval(base, &a).unwrap();
        for p in perms(base) {
            assert_eq!(perms(base).len(), 24);
            assert!((b4_eval(p, &a).unwrap() - want).abs() < 1e-12 * want.abs());
        }
        assert!(b4_eval([1.0, 1.0, 1.0, -2.0], &a).is_err());
    }

    #[test]
    fn resonance_factorisation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let x1 = -rng.gen_range(0.0..10.0);
            let x2 = rng.gen_range(0.0..10.0);
            let x3 = rng.gen_range(0.0..10.0);
            let x4 = -(x1 + x2 + x3);
            if x4 >= 0.0 {
                continue;
            }
            let direct = omega(x1) + omega(x2) + omega(x3) + omega(x4);
            let fact = 2.0 * (x1 + x2) * (x1 + x3);
            assert!((direct - fact).abs() < 1e-12 * (1.0 + direct.abs().max(100.0)));
        }
    }

    #[test]
    fn stable_and_direct_branches_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for high_pass in [false, true] {
            let a = make_symbol(0.8, 0.1, high_pass).unwrap();
            let mut checked = 0;
            while checked < 2000 {
                let v = [
                    rng.gen_range(-20.0..20.0),
                    rng.gen_range(-20.0..20.0),
                    rng.gen_range(-20.0..20.0),
                ];
                let xi = [v[0], v[1], v[2], -(v[0] + v[1] + v[2])];
                let mu = xi.iter().fold(0.0f64, |m, x: &f64| m.max(x.abs()));
                let so: f64 = xi.iter().map(|&x| omega(x)).sum();
                if so.abs() < 1e-3 * mu * mu {
                    continue;
                }
                let d = b4_direct(xi, &a);
                let s = b4_stable(xi, &a);
                assert!((d - s).abs() <= 1e-9 * (d.abs() + a.eval(mu) / mu), "{xi:?}: {d} {s}");
                checked += 1;
            }
        }
    }

    #[test]
    fn branch_handover_band() {
        // 2+2 configurations with Σω/μ² in [θ, 10θ]
        let a = make_symbol(1.0, 0.1, false).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let mu = rng.gen_range(2.0..50.0);
            let r = rng.gen_range(1.0..10.0) * DIRECT_THRESHOLD;
            // Σω = 2 s d with d = mu/2: choose s to hit r μ²
            let n1 = -mu;
            let p2 = 0.5 * mu;
            let p1 = mu + r * mu * mu / (2.0 * (n1 + p2));
            let xi = [n1, p1, p2, -(n1 + p1 + p2)];
            let so: f64 = xi.iter().map(|&x| omega(x)).sum();
            let m = xi.iter().fold(0.0f64, |m, x: &f64| m.max(x.abs()));
            let band = so.abs() / (m * m);
            assert!((0.5 * DIRECT_THRESHOLD..=20.0 * DIRECT_THRESHOLD).contains(&band));
            let d = b4_direct(xi, &a);
            let s = b4_stable(xi, &a);
            assert!((d - s).abs() <= 1e-6 * s.abs(), "{d} {s}");
        }
    }

    #[test]
    fn b4_finite_on_resonant_set() {
        let a = make_symbol(1.0, 0.1, true).unwrap();
        for xi in [
            [0.0, 0.0, 0.0, 0.0],
            [3.0, -3.0, 0.0, 0.0],
            [2.0, -2.0, 5.0, -5.0],
            [4.0, -4.0, 4.0, -4.0],
            [0.0, 7.0, -7.0, 0.0],
        ] {
            let v = b4_eval(xi, &a).unwrap();
            assert!(v.is_finite(), "{xi:?}");
        }
        // continuity across the resonant set
        let near = b4_eval([2.0, -2.0 + 1e-7, 5.0, -5.0 - 1e-7], &a).unwrap();
        let at = b4_eval([2.0, -2.0, 5.0, -5.0], &a).unwrap();
        assert!((near - at).abs() < 1e-5 * (1.0 + at.abs()));
    }

    #[test]
    fn b4_size_bound() {
        // |b4| μ / a(μ) stays below a fixed constant when two frequencies are ~ μ
        let a = make_symbol(1.0, 0.1, false).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut worst = 0.0f64;
        for _ in 0..1000 {
            let mu = 2f64.powf(rng.gen_range(2.0..10.0));
            let x3 = mu * rng.gen_range(0.5..1.0);
            let x1 = mu * rng.gen_range(-0.25..0.25);
            let x2 = mu * rng.gen_range(-0.25..0.25);
            let xi = [x1, x2, x3, -(x1 + x2 + x3)];
            let m = xi.iter().fold(0.0f64, |m, x: &f64| m.max(x.abs()));
            worst = worst.max(b4_eval(xi, &a).unwrap().abs() * m / a.eval(m));
        }
        assert!(worst < B4_BOUND_CONSTANT, "worst ratio {worst}");
    }

    /// Regression value: `|b4| μ / a(μ)` peaked at 0.3488 on this family.
    const B4_BOUND_CONSTANT: f64 = 0.35;

    #[test]
    fn energy_examples() {
        let g = SpectralGrid::new(16, 1.0).unwrap();
        let u = Field::from_real_fn(g, |x| 0.3 * x.cos() + 0.2 * (3.0 * x).sin() + 0.1);
        let s = to_spectrum(&u);
        let one = make_symbol(0.0, 0.1, false).unwrap();
        assert!((e0(&s, &one) - s.l2_norm_sq()).abs() < 1e-14);
        let hp = make_symbol(1.0, 0.1, true).unwrap();
        let c = to_spectrum(&Field::from_real_fn(g, f64::cos));
        assert!(e0(&c, &hp).abs() < 1e-25);
        let a = make_symbol(1.0, 0.1, false).unwrap();
        let pure = to_spectrum(&Field::from_fn(g, |x| Complex64::new(0.0, 2.0 * x).exp()));
        assert!(modified_energy(&pure, &a, EnergyOrder::E1).unwrap().abs() < 1e-14);
        assert!(r4(&s, &one).unwrap().abs() < 1e-14);
        let z = Spectrum::zeros(g);
        assert_eq!(r4(&z, &a).unwrap(), 0.0);
        assert_eq!(r6(&z, &a).unwrap(), 0.0);
        assert!(matches!(
            r6(&Spectrum::zeros(SpectralGrid::new(64, 1.0).unwrap()), &a),
            Err(Error::CostGuard(_))
        ));
    }

    #[test]
    fn literal_and_factored_sextic_sums_agree() {
        let g = SpectralGrid::new(16, 1.0).unwrap();
        let a = make_symbol(1.0, 0.1, true).unwrap();
        let u = Field::from_real_fn(g, |x| {
            0.3 + x.cos() - 0.6 * (2.0 * x + 0.3).sin() + 0.4 * (3.0 * x + 1.0).cos() + 0.2 * (5.0 * x).sin()
        });
        let s = to_spectrum(&u);
        for focusing in [false, true] {
            let form = QuarticForm::new(g, &a, focusing);
            let lit = form.r6(&s).unwrap();
            let fac = form.r6_factored(&s).unwrap();
            assert!(lit.abs() > 1.0);
            assert!((lit - fac).abs() < 1e-12 * lit.abs(), "{lit} {fac}");
        }
    }
}

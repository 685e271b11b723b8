//! Interactions that defeat the plain dyadic and `X^{s,b}` trilinear bounds.
//!
//! Both are evaluated in sharp coordinates. For the high-low-low product the
//! two modulation integrals collapse into the kernel `G = η_k ∗ η_1 ∗ η_1`,
//! leaving a 2-D frequency integral per output point. For the `X^{s,b}`
//! product the modulation integral of two unit indicators against the wide
//! one has a closed form.

use rayon::prelude::*;

use super::ExperimentSpec;
use crate::bourgain::{dyadic_modulation_norm_in, resonance, BlockFunction2D, BlockSpec, Modulation, NormKind, Shell};
use crate::cutoff::{self, pow2};
use crate::error::{Error, Result};
use crate::quadrature::{composite, pairwise_sum, UniformTable};
use crate::report::{fit_line, Cell, SweepReport};

const TRILINEAR_K_RANGE: (i32, i32) = (6, 16);
const EVALUATION_LIMIT: f64 = 1e10;
const KERNEL_SAMPLES: usize = 8193;

/// `G(X) = ∫∫ η_k(X - s) η_1(m) η_1(s - m) dm ds`.
fn modulation_kernel(k: i32) -> UniformTable {
    let eb = cutoff::eta_breakpoints(1);
    // K(s) = (η_1 ∗ η_1)(s) on a composite rule in s
    let mut s_breaks = vec![0.0];
    for &a in &eb {
        for &b in &eb {
            s_breaks.push(a + b);
        }
    }
    let s_nodes: Vec<(f64, f64)> = composite(-6.4, 6.4, &s_breaks, 12)
        .into_iter()
        .map(|(s, w)| {
            let mut br = eb.clone();
            br.extend(eb.iter().map(|b| s - b));
            let v: Vec<f64> = composite(-3.2, 3.2, &br, 12)
                .into_iter()
                .map(|(m, wm)| wm * cutoff::eta(1, m) * cutoff::eta(1, s - m))
                .collect();
            (s, w * pairwise_sum(&v))
        })
        .filter(|&(_, w)| w != 0.0)
        .collect();
    let reach = cutoff::SUPPORT * pow2(k) + 6.4;
    UniformTable::build(-reach, reach, KERNEL_SAMPLES, |x| {
        let v: Vec<f64> = s_nodes.iter().map(|&(s, w)| w * cutoff::eta(k, x - s)).collect();
        pairwise_sum(&v)
    })
}

/// `Ĩ_j` as a union of closed intervals.
fn tilde_pieces(j: i32) -> Vec<(f64, f64)> {
    if j == 0 {
        vec![(-2.0, 2.0)]
    } else {
        vec![(-pow2(j + 1), -pow2(j - 1)), (pow2(j - 1), pow2(j + 1))]
    }
}

struct Trilinear {
    k: i32,
    kernel: UniformTable,
    inner: Vec<(f64, f64)>,
    outer: Vec<(f64, f64)>,
}

impl Trilinear {
    fn new(k: i32, resolution: usize) -> Self {
        let inner = composite(0.5, 1.0, &[0.75], resolution);
        let lo = pow2(k - 1);
        let hi = pow2(k + 1);
        // χ_{I_k}(ξ - ξ1 - ξ2) switches where ξ - a crosses a shell edge
        let mut breaks = Vec::new();
        for e in [lo, hi, -lo, -hi] {
            breaks.extend([e + 1.0, e + 2.0]);
        }
        let panels = 64;
        let mut outer = Vec::new();
        for (a, b) in [(-hi, -lo), (lo, hi)] {
            let mut br = breaks.clone();
            br.extend((1..panels).map(|p| a + (b - a) * p as f64 / panels as f64));
            outer.extend(composite(a, b, &br, 8));
        }
        Trilinear {
            k,
            kernel: modulation_kernel(k),
            inner,
            outer,
        }
    }

    /// `(f_1 ∗ f_1 ∗ f_k)` at sharp coordinates `(ξ, μ)`.
    fn convolution(&self, xi: f64, mu: f64) -> f64 {
        let mut acc = 0.0;
        for &(x1, w1) in &self.inner {
            for &(x2, w2) in &self.inner {
                let x3 = xi - x1 - x2;
                if !cutoff::in_i_k(self.k, x3) {
                    continue;
                }
                acc += w1 * w2 * self.kernel.eval(mu - resonance(x1, x2, x3));
            }
        }
        acc
    }

    /// `‖1_{D_{k,j}} (f_1 ∗ f_1 ∗ f_k)‖_{L²}`.
    fn slice_norm(&self, j: i32) -> f64 {
        let mu_nodes: Vec<(f64, f64)> = tilde_pieces(j)
            .into_iter()
            .flat_map(|(a, b)| composite(a, b, &[], 16))
            .collect();
        let terms: Vec<f64> = self
            .outer
            .par_iter()
            .map(|&(x, wx)| {
                let v: Vec<f64> = mu_nodes
                    .iter()
                    .map(|&(m, wm)| wm * self.convolution(x, m).powi(2))
                    .collect();
                wx * pairwise_sum(&v)
            })
            .collect();
        pairwise_sum(&terms).sqrt()
    }
}

/// `‖χ_{[a,b]}(ξ) η_j(μ)‖_{X_k}`, doubled in mass when `two_sided`.
fn indicator_xk(k: i32, j: i32, xi: (f64, f64), shell: Shell, two_sided: bool) -> Result<f64> {
    let r = if j == 0 {
        cutoff::SUPPORT
    } else {
        cutoff::SUPPORT * pow2(j)
    };
    let spec = BlockSpec {
        k,
        j,
        shell,
        modulation: Modulation::Shell(j),
        xi_box: xi,
        mu_box: (-r, r),
        xi_breaks: vec![],
        mu_breaks: vec![],
        panels: 1,
        per_panel: 16,
    };
    let f = BlockFunction2D::separable(spec, |_| 1.0, move |m| cutoff::eta(j, m))?;
    let n = dyadic_modulation_norm_in(&f, k, NormKind::Xk, shell)?;
    Ok(if two_sided { n * 2f64.sqrt() } else { n })
}

/// Rows `k,s_k,s_k_scaled,fk_xk,fk_xk_scaled` with
/// `S(k) = 2^k Σ_{j ≤ k/2} 2^{-j/2} ‖1_{D_{k,j}} f_1 ∗ f_1 ∗ f_k‖`,
/// `f_1 = χ_{[1/2,1]}(ξ) η_1(μ)`, `f_k = χ_{I_k}(ξ) η_k(μ)` and
/// `scaled` meaning divided by `2^{3k/2}`.
pub fn counterexample_trilinear(spec: &ExperimentSpec) -> Result<SweepReport> {
    spec.validate()?;
    let (lo, hi) = spec.k_range;
    if lo < TRILINEAR_K_RANGE.0 || hi > TRILINEAR_K_RANGE.1 {
        return Err(Error::config(
            "k_range",
            format!("must lie within {TRILINEAR_K_RANGE:?}, got {:?}", spec.k_range),
        ));
    }
    let res = spec.resolution.max(8);
    for k in spec.ks() {
        let outputs = 2.0 * 64.0 * 8.0 * 32.0 * f64::from(k / 2 + 1);
        let cost = outputs * (res * res) as f64 * 2.0;
        if cost > EVALUATION_LIMIT {
            return Err(Error::CostGuard(format!("k = {k} needs {cost:.2e} kernel evaluations")));
        }
    }
    // f_1 sits in I_0 = [1/2, 2]; its norm uses the X_1 weights
    let f1 = indicator_xk(1, 1, (0.5, 1.0), Shell::Dyadic(0), false)?;
    let mut rep = SweepReport::new(
        "counterexample_trilinear",
        &["k", "s_k", "s_k_scaled", "fk_xk", "fk_xk_scaled"],
    );
    let (mut ks, mut scaled, mut fk_scaled) = (Vec::new(), Vec::new(), Vec::new());
    for k in spec.ks() {
        let t = Trilinear::new(k, res);
        let terms: Vec<f64> = (0..=k / 2)
            .map(|j| 2f64.powf(-f64::from(j) / 2.0) * t.slice_norm(j))
            .collect();
        let s = pow2(k) * pairwise_sum(&terms);
        let fk = indicator_xk(k, k, (pow2(k - 1), pow2(k + 1)), Shell::Dyadic(k), true)?;
        let scale = 2f64.powf(1.5 * f64::from(k));
        rep.push(vec![
            k.into(),
            s.into(),
            (s / scale).into(),
            fk.into(),
            (fk / scale).into(),
        ]);
        ks.push(f64::from(k));
        scaled.push(s / scale);
        fk_scaled.push(fk / scale);
    }
    rep.values.insert("f1_x1".into(), f1);
    rep.checks.insert("f1_x1_order_one".into(), (0.25..=4.0).contains(&f1));
    let spread =
        fk_scaled.iter().cloned().fold(0.0, f64::max) / fk_scaled.iter().cloned().fold(f64::INFINITY, f64::min);
    rep.values.insert("fk_xk_scaled_spread".into(), spread);
    rep.checks.insert("fk_xk_scaled_stable".into(), spread <= 2.0);
    if ks.len() >= 2 {
        let fit = fit_line(&ks, &scaled);
        rep.checks
            .insert("s_k_scaled_grows".into(), fit.slope > 0.0 && fit.r2 >= 0.9);
        rep.values.insert("slope".into(), fit.slope);
        rep.values.insert("r2".into(), fit.r2);
        rep.fits.insert("s_k_scaled_vs_k".into(), fit);
        let lk: Vec<f64> = ks.iter().map(|k| k.ln()).collect();
        let ls: Vec<f64> = scaled.iter().map(|v| v.ln()).collect();
        let power = fit_line(&lk, &ls);
        rep.values.insert("growth_power".into(), power.slope);
        rep.fits.insert("log_s_k_scaled_vs_log_k".into(), power);
        rep.notes.insert(
            "growth_power".into(),
            "fitted p in S(k)/2^(3k/2) ~ k^p; compare with 1 (X_k) and 1/2 (b = 1/2)".into(),
        );
    }
    Ok(rep)
}

/// Half-width of the wide modulation indicator.
const XSB_WIDTH: f64 = 1024.0;
/// Output frequency window is `[(M-1)N/M, (M+1)N/M]`.
const XSB_M: f64 = 16.0;
/// Allowed range of `τ/ξ` on the sampled window.
const XSB_SLOPES: (f64, f64) = (2.0, 9.0);
const XSB_GRID: usize = 9;

/// `∫∫_{|μ1|,|μ2| ≤ 1} 1{|c - μ1 - μ2| ≤ XSB_WIDTH} dμ1 dμ2`.
fn unit_pair_mass(c: f64) -> f64 {
    // primitive of the triangle density (2 - |s|) on [-2, 2]
    let cdf = |s: f64| {
        let s = s.clamp(-2.0, 2.0);
        if s <= 0.0 {
            0.5 * (s + 2.0).powi(2)
        } else {
            4.0 - 0.5 * (2.0 - s).powi(2)
        }
    };
    let (lo, hi) = (c - XSB_WIDTH, c + XSB_WIDTH);
    if lo >= hi {
        return 0.0;
    }
    (cdf(hi) - cdf(lo)).max(0.0)
}

/// `(u ∗ v ∗ w)(ξ, τ + ω(ξ))` for `u = v = χ_{[1/2,10]}(ξ)χ_{|μ|≤1}`,
/// `w = χ_{[N/2,2N]}(ξ)χ_{|μ|≤1024}`, with `τ` the output modulation.
///
/// Integrates over `a = ξ1 + ξ2`, `d = ξ1 - ξ2` (Jacobian 1/2); `Ω` is
/// increasing in `a` on the domain, so the kinks of the closed-form
/// modulation mass are located by solving a quadratic.
pub fn xsb_convolution(n: f64, xi: f64, tau: f64) -> f64 {
    let omega_of = |a: f64, d: f64| resonance(0.5 * (a + d), 0.5 * (a - d), xi - a);
    // Ω(a; d) = -(3/2)a² + 2ξa - d²/2 while ξ - a > 0
    let root = |d: f64, target: f64| {
        let disc = 4.0 * xi * xi - 6.0 * (0.5 * d * d + target);
        if disc < 0.0 {
            None
        } else {
            Some((2.0 * xi - disc.sqrt()) / 3.0)
        }
    };
    let kinks = [
        -XSB_WIDTH - 2.0,
        -XSB_WIDTH,
        -XSB_WIDTH + 2.0,
        XSB_WIDTH - 2.0,
        XSB_WIDTH,
        XSB_WIDTH + 2.0,
    ];
    let inner = |d: f64| {
        let a_lo = (1.0 + d.abs()).max(xi - 2.0 * n);
        let a_hi = (20.0 - d.abs()).min(xi - 0.5 * n);
        if a_lo >= a_hi {
            return 0.0;
        }
        let breaks: Vec<f64> = kinks.iter().filter_map(|&c| root(d, tau - c)).collect();
        let v: Vec<f64> = composite(a_lo, a_hi, &breaks, 8)
            .into_iter()
            .map(|(a, w)| w * unit_pair_mass(tau - omega_of(a, d)))
            .collect();
        pairwise_sum(&v)
    };
    let mut d_breaks: Vec<f64> = (1..64).map(|p| -9.5 + 19.0 * p as f64 / 64.0).collect();
    d_breaks.push(0.0);
    let v: Vec<f64> = composite(-9.5, 9.5, &d_breaks, 8)
        .into_iter()
        .map(|(d, w)| w * inner(d))
        .collect();
    0.5 * pairwise_sum(&v)
}

/// Sample lattice `(ξ, τ)` on the output window; points with `τ/ξ` outside
/// `XSB_SLOPES` are dropped.
pub fn xsb_samples(n: f64) -> Vec<(f64, f64)> {
    let m = XSB_GRID;
    let at = |a: f64, b: f64, i: usize| a + (b - a) * i as f64 / (m - 1) as f64;
    let (x0, x1) = ((XSB_M - 1.0) * n / XSB_M, (XSB_M + 1.0) * n / XSB_M);
    let mut out = Vec::new();
    for i in 0..m {
        for l in 0..m {
            let (x, t) = (at(x0, x1, i), at(4.0 * n, 8.0 * n, l));
            let r = t / x;
            if r >= XSB_SLOPES.0 && r <= XSB_SLOPES.1 {
                out.push((x, t));
            }
        }
    }
    out
}

/// Rows `n,min_f,n_min_f,w_l2` over `spec.n_list`.
pub fn counterexample_xsb(spec: &ExperimentSpec) -> Result<SweepReport> {
    spec.validate()?;
    if spec.n_list.len() < 2 || spec.n_list.iter().any(|&n| !(n >= 64.0) || !n.is_finite()) {
        return Err(Error::config("n_list", "need at least two values, each >= 64"));
    }
    let per_sample = 64.0 * 8.0 * 7.0 * 8.0;
    let cost = per_sample * (XSB_GRID * XSB_GRID * spec.n_list.len()) as f64;
    if cost > EVALUATION_LIMIT {
        return Err(Error::CostGuard(format!("{cost:.2e} evaluations")));
    }
    let mut rep = SweepReport::new("counterexample_xsb", &["n", "min_f", "n_min_f", "w_l2"]);
    let (mut ln, mut lw, mut scaled) = (Vec::new(), Vec::new(), Vec::new());
    for &n in &spec.n_list {
        let values: Vec<f64> = xsb_samples(n)
            .par_iter()
            .map(|&(x, t)| xsb_convolution(n, x, t))
            .collect();
        let min_f = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let wspec = BlockSpec {
            k: 0,
            j: 10,
            shell: Shell::Interval(0.5 * n, 2.0 * n),
            modulation: Modulation::UpTo(9),
            xi_box: (0.5 * n, 2.0 * n),
            mu_box: (-XSB_WIDTH, XSB_WIDTH),
            xi_breaks: vec![],
            mu_breaks: vec![],
            panels: 1,
            per_panel: 16,
        };
        let w = BlockFunction2D::separable(wspec, |_| 1.0, |_| 1.0)?.l2_norm();
        rep.push(vec![Cell::from(n), min_f.into(), (n * min_f).into(), w.into()]);
        ln.push(n.ln());
        lw.push(w.ln());
        scaled.push(n * min_f);
    }
    let fit = fit_line(&ln, &lw);
    rep.values.insert("w_exponent".into(), fit.slope);
    rep.checks
        .insert("w_exponent_half".into(), (fit.slope - 0.5).abs() <= 0.05);
    rep.fits.insert("log_w_vs_log_n".into(), fit);
    let hi = scaled.iter().cloned().fold(0.0, f64::max);
    let lo = scaled.iter().cloned().fold(f64::INFINITY, f64::min);
    let spread = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    rep.values.insert("n_min_f_spread".into(), spread);
    rep.checks.insert("n_min_f_stable".into(), lo > 0.0 && spread <= 2.0);
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_mass_examples() {
        assert!((unit_pair_mass(0.0) - 4.0).abs() < 1e-12);
        assert!((unit_pair_mass(XSB_WIDTH) - 2.0).abs() < 1e-12);
        assert_eq!(unit_pair_mass(XSB_WIDTH + 3.0), 0.0);
        // dense midpoint oracle
        let c = XSB_WIDTH + 0.7;
        let m = 2000;
        let h = 2.0 / m as f64;
        let mut acc = 0.0;
        for a in 0..m {
            for b in 0..m {
                let (u, v) = (-1.0 + (a as f64 + 0.5) * h, -1.0 + (b as f64 + 0.5) * h);
                if (c - u - v).abs() <= XSB_WIDTH {
                    acc += h * h;
                }
            }
        }
        assert!((unit_pair_mass(c) - acc).abs() < 1e-2, "{} {acc}", unit_pair_mass(c));
    }

    #[test]
    fn xsb_convolution_matches_riemann_oracle() {
        let n = 64.0;
        let (x, t) = (64.0, 300.0);
        let q = xsb_convolution(n, x, t);
        // midpoint rule in ξ1, ξ2 with the closed-form μ mass
        let m = 1200;
        let h = 9.5 / m as f64;
        let mut acc = 0.0;
        for a in 0..m {
            for b in 0..m {
                let (x1, x2) = (0.5 + (a as f64 + 0.5) * h, 0.5 + (b as f64 + 0.5) * h);
                let x3 = x - x1 - x2;
                if x3 >= 0.5 * n && x3 <= 2.0 * n {
                    acc += h * h * unit_pair_mass(t - resonance(x1, x2, x3));
                }
            }
        }
        assert!((q - acc).abs() < 2e-3 * acc, "{q} {acc}");
    }

    #[test]
    fn xsb_samples_stay_on_the_interaction_ray() {
        for n in [64.0, 1024.0] {
            let s = xsb_samples(n);
            assert_eq!(s.len(), XSB_GRID * XSB_GRID);
            assert!(s.iter().all(|&(x, t)| (2.0..=9.0).contains(&(t / x))));
        }
        // once 4N exceeds the modulation width the mirrored window is empty
        for &(x, t) in &xsb_samples(256.0) {
            assert_eq!(xsb_convolution(256.0, x, -t), 0.0);
        }
    }

    #[test]
    fn kernel_integrates_to_product_of_masses() {
        let k = 6;
        let g = modulation_kernel(k);
        let mass = |l: i32, r: f64| -> f64 {
            composite(-r, r, &cutoff::eta_breakpoints(l), 32)
                .iter()
                .map(|&(x, w)| w * cutoff::eta(l, x))
                .sum()
        };
        let e1 = mass(1, 3.2);
        let ek = mass(k, 1.6 * pow2(k));
        let reach = 1.6 * pow2(k) + 6.4;
        let br: Vec<f64> = (1..256).map(|p| -reach + 2.0 * reach * p as f64 / 256.0).collect();
        let gi: f64 = composite(-reach, reach, &br, 16)
            .iter()
            .map(|&(x, w)| w * g.eval(x))
            .sum();
        assert!((gi / (e1 * e1 * ek) - 1.0).abs() < 1e-4, "{gi} {}", e1 * e1 * ek);
    }

    #[test]
    fn trilinear_configuration_checks() {
        let spec = ExperimentSpec {
            k_range: (2, 8),
            ..Default::default()
        };
        assert!(matches!(counterexample_trilinear(&spec), Err(Error::Config { .. })));
        let f1 = indicator_xk(1, 1, (0.5, 1.0), Shell::Dyadic(0), false).unwrap();
        assert!((0.25..=4.0).contains(&f1), "{f1}");
    }
}

//! Space-time frequency machinery in sharp coordinates `(ξ, μ = τ - ω(ξ))`:
//! resonance function, dyadic modulation norms, block functions with tensor
//! quadrature, the quadrilinear functional `J`, and windowed space-time
//! spectra of solver output.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cutoff::{self, pow2};
use crate::error::{Error, Result};
use crate::quadrature::{composite, pairwise_sum, UniformTable};
use crate::solver::{omega, Trajectory};
use crate::spectral::{fft_forward, to_spectrum};

/// Largest number of integrand evaluations `j_functional` accepts.
pub const J_COST_LIMIT: f64 = 1e9;

/// `Ω(ξ1, ξ2, ξ3) = ω(ξ1) + ω(ξ2) + ω(ξ3) - ω(ξ1 + ξ2 + ξ3)`.
pub fn resonance(x1: f64, x2: f64, x3: f64) -> f64 {
    omega(x1) + omega(x2) + omega(x3) - omega(x1 + x2 + x3)
}

/// `β_{k,j} = 1 + 2^{(j - 2k)/2}`.
pub fn beta(k: i32, j: i32) -> f64 {
    1.0 + 2f64.powf(f64::from(j - 2 * k) / 2.0)
}

/// `exp(-1/(1-t²))` on `(-1, 1)`, zero elsewhere.
pub fn smooth_bump(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - t * t)).exp()
    }
}

/// Frequency shell a block is declared to live in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shell {
    /// `Ĩ_k`: `[-2, 2]` for `k = 0`, `I_k` otherwise.
    Tilde(i32),
    /// `I_k = {2^{k-1} ≤ |ξ| ≤ 2^{k+1}}`, any integer `k`.
    Dyadic(i32),
    /// Explicit closed interval.
    Interval(f64, f64),
}

impl Shell {
    pub fn contains(&self, xi: f64) -> bool {
        match *self {
            Shell::Tilde(k) => cutoff::in_i_tilde(k, xi),
            Shell::Dyadic(k) => cutoff::in_i_k(k, xi),
            Shell::Interval(a, b) => xi >= a && xi <= b,
        }
    }

    /// Whether the closed interval `[a, b]` lies in the shell.
    pub fn contains_range(&self, a: f64, b: f64) -> bool {
        let tol = 1e-12 * a.abs().max(b.abs()).max(1.0);
        match *self {
            Shell::Interval(lo, hi) => a >= lo - tol && b <= hi + tol,
            Shell::Tilde(k) if k <= 0 => a >= -2.0 - tol && b <= 2.0 + tol,
            Shell::Tilde(k) | Shell::Dyadic(k) => {
                let (lo, hi) = (pow2(k - 1), pow2(k + 1));
                (a >= lo - tol && b <= hi + tol) || (a >= -hi - tol && b <= -lo + tol)
            }
        }
    }
}

/// Declared modulation support.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modulation {
    /// `Ĩ_j`.
    Shell(i32),
    /// `∪_{l ≤ j} Ĩ_l = [-2^{j+1}, 2^{j+1}]`.
    UpTo(i32),
}

impl Modulation {
    fn contains_range(&self, a: f64, b: f64) -> bool {
        let j = match *self {
            Modulation::Shell(j) | Modulation::UpTo(j) => j,
        };
        let r = if j <= 0 { 2.0 } else { pow2(j + 1) };
        let tol = 1e-12 * r;
        a >= -r - tol && b <= r + tol
    }
}

/// One-dimensional quadrature rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule1D {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule1D {
    /// Composite Gauss–Legendre on `[a, b]`: split at `breaks`, then every
    /// piece into `panels` equal panels of `per_panel` nodes.
    pub fn new(a: f64, b: f64, breaks: &[f64], panels: usize, per_panel: usize) -> Self {
        let mut cuts = breaks.to_vec();
        let pieces = crate::quadrature::panel_edges(a, b, breaks);
        for w in pieces.windows(2) {
            for p in 1..panels {
                cuts.push(w[0] + (w[1] - w[0]) * p as f64 / panels as f64);
            }
        }
        let (nodes, weights) = composite(a, b, &cuts, per_panel).into_iter().unzip();
        Rule1D { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

type Eval2 = Arc<dyn Fn(f64, f64) -> Complex64 + Send + Sync>;
type Eval1 = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum Profile {
    /// `1` on the block's box.
    Indicator,
    /// `η_k(ξ) η_j(μ)` on the positive half (`Ĩ_0` is two-sided).
    SmoothEta,
    /// Caller-supplied evaluator, cut off to the indicator box.
    Custom(Eval2),
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Indicator => write!(f, "Indicator"),
            Profile::SmoothEta => write!(f, "SmoothEta"),
            Profile::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// Function of `(ξ, μ)` vanishing outside `xi_box × mu_box`.
#[derive(Clone)]
pub struct BlockFunction2D {
    pub k: i32,
    pub j: i32,
    pub shell: Shell,
    pub modulation: Modulation,
    pub xi_box: (f64, f64),
    pub mu_box: (f64, f64),
    pub xi_rule: Rule1D,
    pub mu_rule: Rule1D,
    xi_breaks: Vec<f64>,
    mu_breaks: Vec<f64>,
    eval: Eval2,
    /// `f(ξ, μ) = a(ξ) b(μ)` when known.
    factors: Option<(Eval1, Eval1)>,
}

impl fmt::Debug for BlockFunction2D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BlockFunction2D")
            .field("k", &self.k)
            .field("j", &self.j)
            .field("shell", &self.shell)
            .field("modulation", &self.modulation)
            .field("xi_box", &self.xi_box)
            .field("mu_box", &self.mu_box)
            .field("separable", &self.factors.is_some())
            .finish()
    }
}

/// Breakpoints of every `η_l`, `0 ≤ l ≤ top`, plus the origin.
fn eta_breaks(top: i32) -> Vec<f64> {
    let mut v = vec![0.0];
    for l in 0..=top.max(0) {
        v.extend(cutoff::eta_breakpoints(l));
    }
    v
}

fn modulation_top(mu_box: (f64, f64)) -> i32 {
    let m = mu_box.0.abs().max(mu_box.1.abs());
    let mut j = 0;
    while 0.625 * pow2(j) < m && j < 62 {
        j += 1;
    }
    j
}

pub struct BlockSpec {
    pub k: i32,
    pub j: i32,
    pub shell: Shell,
    pub modulation: Modulation,
    pub xi_box: (f64, f64),
    pub mu_box: (f64, f64),
    /// Interior breakpoints of the evaluator in `ξ` and `μ`.
    pub xi_breaks: Vec<f64>,
    pub mu_breaks: Vec<f64>,
    pub panels: usize,
    pub per_panel: usize,
}

impl BlockSpec {
    fn validate(&self) -> Result<()> {
        let (a, b) = self.xi_box;
        let (c, d) = self.mu_box;
        if !(a < b && c < d && a.is_finite() && b.is_finite() && c.is_finite() && d.is_finite()) {
            return Err(Error::Domain("block support box is empty or not finite".into()));
        }
        if !self.shell.contains_range(a, b) {
            return Err(Error::Support(format!(
                "xi range [{a}, {b}] is not inside {:?}",
                self.shell
            )));
        }
        if !self.modulation.contains_range(c, d) {
            return Err(Error::Support(format!(
                "mu range [{c}, {d}] is not inside {:?}",
                self.modulation
            )));
        }
        if self.per_panel < 2 || self.panels == 0 {
            return Err(Error::config(
                "resolution",
                "quadrature needs at least 2 nodes per panel",
            ));
        }
        Ok(())
    }

    fn mu_breaks_all(&self) -> Vec<f64> {
        let mut mb = self.mu_breaks.clone();
        mb.extend(eta_breaks(modulation_top(self.mu_box)));
        mb
    }
}

impl BlockFunction2D {
    pub fn custom(spec: BlockSpec, f: impl Fn(f64, f64) -> Complex64 + Send + Sync + 'static) -> Result<Self> {
        spec.validate()?;
        let mu_breaks = spec.mu_breaks_all();
        let xi_rule = Rule1D::new(
            spec.xi_box.0,
            spec.xi_box.1,
            &spec.xi_breaks,
            spec.panels,
            spec.per_panel,
        );
        let mu_rule = Rule1D::new(spec.mu_box.0, spec.mu_box.1, &mu_breaks, spec.panels, spec.per_panel);
        Ok(BlockFunction2D {
            k: spec.k,
            j: spec.j,
            shell: spec.shell,
            modulation: spec.modulation,
            xi_box: spec.xi_box,
            mu_box: spec.mu_box,
            xi_rule,
            mu_rule,
            xi_breaks: spec.xi_breaks,
            mu_breaks,
            eval: Arc::new(f),
            factors: None,
        })
    }

    /// `f(ξ, μ) = a(ξ) b(μ)`, enabling the fast path of `j_functional`.
    pub fn separable(
        spec: BlockSpec,
        a: impl Fn(f64) -> f64 + Send + Sync + 'static,
        b: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let a: Eval1 = Arc::new(a);
        let b: Eval1 = Arc::new(b);
        let (a2, b2) = (a.clone(), b.clone());
        let mut blk = Self::custom(spec, move |x, m| Complex64::new(a2(x) * b2(m), 0.0))?;
        blk.factors = Some((a, b));
        Ok(blk)
    }

    pub fn is_separable(&self) -> bool {
        self.factors.is_some()
    }

    fn in_box(&self, xi: f64, mu: f64) -> bool {
        xi >= self.xi_box.0 && xi <= self.xi_box.1 && mu >= self.mu_box.0 && mu <= self.mu_box.1
    }

    pub fn eval(&self, xi: f64, mu: f64) -> Complex64 {
        if self.in_box(xi, mu) {
            (self.eval)(xi, mu)
        } else {
            Complex64::new(0.0, 0.0)
        }
    }

    fn factor_xi(&self, xi: f64) -> f64 {
        match &self.factors {
            Some((a, _)) if xi >= self.xi_box.0 && xi <= self.xi_box.1 => a(xi),
            _ => 0.0,
        }
    }

    fn factor_mu(&self, mu: f64) -> f64 {
        match &self.factors {
            Some((_, b)) if mu >= self.mu_box.0 && mu <= self.mu_box.1 => b(mu),
            _ => 0.0,
        }
    }

    /// `|f|²` on the tensor rule, `ξ`-major.
    fn sampled_sq(&self) -> Vec<f64> {
        let mu = &self.mu_rule.nodes;
        self.xi_rule
            .nodes
            .par_iter()
            .flat_map_iter(|&x| mu.iter().map(move |&m| (x, m)).collect::<Vec<_>>())
            .map(|(x, m)| self.eval(x, m).norm_sqr())
            .collect()
    }

    pub fn l2_norm(&self) -> f64 {
        let sq = self.sampled_sq();
        let nm = self.mu_rule.len();
        let rows: Vec<f64> = (0..self.xi_rule.len())
            .map(|a| {
                let r: Vec<f64> = (0..nm).map(|b| self.mu_rule.weights[b] * sq[a * nm + b]).collect();
                self.xi_rule.weights[a] * pairwise_sum(&r)
            })
            .collect();
        pairwise_sum(&rows).sqrt()
    }

    /// Same block on refined rules.
    pub fn with_resolution(&self, panels: usize, per_panel: usize) -> Self {
        let mut out = self.clone();
        out.xi_rule = Rule1D::new(self.xi_box.0, self.xi_box.1, &self.xi_breaks, panels, per_panel);
        out.mu_rule = Rule1D::new(self.mu_box.0, self.mu_box.1, &self.mu_breaks, panels, per_panel);
        out
    }
}

/// Declared-shell block: `Indicator` on `[2^{k-1}, 2^{k+1}] × [-2^{j+1}, 2^{j+1}]`,
/// `SmoothEta` as `η_k(ξ) η_j(μ)` on its support. `resolution` is the number of
/// Gauss nodes per panel.
pub fn make_block(k: i32, j: i32, profile: Profile, resolution: usize) -> Result<BlockFunction2D> {
    if resolution < 16 {
        return Err(Error::config("resolution", "need at least 16 nodes per dimension"));
    }
    if j < 0 {
        return Err(Error::config("j", "modulation index must be >= 0"));
    }
    let mu_hi = pow2(j + 1);
    match profile {
        Profile::Indicator | Profile::Custom(_) => {
            let spec = BlockSpec {
                k,
                j,
                shell: Shell::Dyadic(k),
                modulation: Modulation::UpTo(j),
                xi_box: (pow2(k - 1), pow2(k + 1)),
                mu_box: (-mu_hi, mu_hi),
                xi_breaks: vec![],
                mu_breaks: vec![],
                panels: 1,
                per_panel: resolution,
            };
            match profile {
                Profile::Custom(f) => BlockFunction2D::custom(spec, move |x, m| f(x, m)),
                _ => BlockFunction2D::separable(spec, |_| 1.0, |_| 1.0),
            }
        }
        Profile::SmoothEta => {
            if k < 0 {
                return Err(Error::Domain("η_k vanishes for k < 0".into()));
            }
            let (xi_box, shell) = if k == 0 {
                ((-cutoff::SUPPORT, cutoff::SUPPORT), Shell::Tilde(0))
            } else {
                ((0.625 * pow2(k), cutoff::SUPPORT * pow2(k)), Shell::Tilde(k))
            };
            let mu_box = if j == 0 {
                (-cutoff::SUPPORT, cutoff::SUPPORT)
            } else {
                (-cutoff::SUPPORT * pow2(j), cutoff::SUPPORT * pow2(j))
            };
            let spec = BlockSpec {
                k,
                j,
                shell,
                modulation: Modulation::Shell(j),
                xi_box,
                mu_box,
                xi_breaks: eta_breaks(k),
                mu_breaks: vec![],
                panels: 1,
                per_panel: resolution,
            };
            BlockFunction2D::separable(spec, move |x| cutoff::eta(k, x), move |m| cutoff::eta(j, m))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    Xk,
    Bk,
}

fn weight(kind: NormKind, k: i32, j: i32) -> f64 {
    let w = 2f64.powf(f64::from(j) / 2.0);
    match kind {
        NormKind::Xk => w * beta(k, j),
        NormKind::Bk => w,
    }
}

/// `Σ_j 2^{j/2} [β_{k,j}] ‖η_j(μ) f‖_{L²}` with the default shell (`Ĩ_k` for
/// `Xk`, `I_k` for `Bk`).
pub fn dyadic_modulation_norm(f: &BlockFunction2D, k: i32, kind: NormKind) -> Result<f64> {
    let shell = match kind {
        NormKind::Xk => Shell::Tilde(k),
        NormKind::Bk => Shell::Dyadic(k),
    };
    dyadic_modulation_norm_in(f, k, kind, shell)
}

/// As [`dyadic_modulation_norm`] with an explicit support shell.
pub fn dyadic_modulation_norm_in(f: &BlockFunction2D, k: i32, kind: NormKind, shell: Shell) -> Result<f64> {
    if !shell.contains_range(f.xi_box.0, f.xi_box.1) {
        return Err(Error::Support(format!(
            "block xi range [{}, {}] is not inside {shell:?}",
            f.xi_box.0, f.xi_box.1
        )));
    }
    let sq = f.sampled_sq();
    let nm = f.mu_rule.len();
    // ∫ |f(ξ, μ)|² dξ for every μ node
    let col: Vec<f64> = (0..nm)
        .map(|b| {
            let v: Vec<f64> = (0..f.xi_rule.len())
                .map(|a| f.xi_rule.weights[a] * sq[a * nm + b])
                .collect();
            pairwise_sum(&v)
        })
        .collect();
    let top = modulation_top(f.mu_box);
    let terms: Vec<f64> = (0..=top)
        .map(|j| {
            let v: Vec<f64> = (0..nm)
                .map(|b| {
                    let e = cutoff::eta(j, f.mu_rule.nodes[b]);
                    f.mu_rule.weights[b] * e * e * col[b]
                })
                .collect();
            weight(kind, k, j) * pairwise_sum(&v).sqrt()
        })
        .collect();
    Ok(pairwise_sum(&terms))
}

/// `|J(f1, f2, f3, f4)|` by tensor quadrature over the blocks' own rules,
/// with `f4` evaluated at `(Σξᵢ, Σμᵢ + Ω)`.
pub fn j_functional(
    f1: &BlockFunction2D,
    f2: &BlockFunction2D,
    f3: &BlockFunction2D,
    f4: &BlockFunction2D,
) -> Result<f64> {
    let cost: f64 = [f1, f2, f3]
        .iter()
        .map(|f| (f.xi_rule.len() * f.mu_rule.len()) as f64)
        .product();
    if cost > J_COST_LIMIT {
        return Err(Error::CostGuard(format!(
            "quadrilinear functional needs {cost:.3e} evaluations (limit {J_COST_LIMIT:e})"
        )));
    }
    let tab = |f: &BlockFunction2D| -> Vec<(f64, f64, Complex64)> {
        let mut v = Vec::with_capacity(f.xi_rule.len() * f.mu_rule.len());
        for (x, wx) in f.xi_rule.nodes.iter().zip(&f.xi_rule.weights) {
            for (m, wm) in f.mu_rule.nodes.iter().zip(&f.mu_rule.weights) {
                let val = f.eval(*x, *m) * (wx * wm);
                if val.norm_sqr() > 0.0 {
                    v.push((*x, *m, val));
                }
            }
        }
        v
    };
    let (t1, t2, t3) = (tab(f1), tab(f2), tab(f3));
    let partial: Vec<Complex64> = t1
        .par_iter()
        .map(|&(x1, m1, v1)| {
            let mut acc = Complex64::new(0.0, 0.0);
            for &(x2, m2, v2) in &t2 {
                let v12 = v1 * v2;
                for &(x3, m3, v3) in &t3 {
                    let x4 = x1 + x2 + x3;
                    let m4 = m1 + m2 + m3 + resonance(x1, x2, x3);
                    acc += v12 * v3 * f4.eval(x4, m4);
                }
            }
            acc
        })
        .collect();
    let re: Vec<f64> = partial.iter().map(|c| c.re).collect();
    let im: Vec<f64> = partial.iter().map(|c| c.im).collect();
    Ok(Complex64::new(pairwise_sum(&re), pairwise_sum(&im)).norm())
}

/// Index of the widest support; 3 means the output variable.
fn widest(boxes: [(f64, f64); 4]) -> usize {
    let mut best = 3;
    for i in 0..3 {
        if boxes[i].1 - boxes[i].0 > boxes[best].1 - boxes[best].0 {
            best = i;
        }
    }
    best
}

/// `∫ g1(y1) g2(y2) g3(y3) g4(y1 + y2 + y3 + shift) dy`, with the widest of the
/// four factors eliminated through the constraint.
struct ConstrainedTriple<'a> {
    boxes: [(f64, f64); 4],
    rules: [Rule1D; 4],
    g: [&'a (dyn Fn(f64) -> f64 + Sync); 4],
    elim: usize,
}

impl<'a> ConstrainedTriple<'a> {
    fn new(boxes: [(f64, f64); 4], rules: [Rule1D; 4], g: [&'a (dyn Fn(f64) -> f64 + Sync); 4]) -> Self {
        let elim = widest(boxes);
        ConstrainedTriple { boxes, rules, g, elim }
    }

    /// Weighted node triples `(y1, y2, y3, weight)` after elimination, for a
    /// given shift; weights include every factor except the output's when the
    /// output is kept.
    fn for_each(&self, shift: f64, mut visit: impl FnMut([f64; 3], f64)) {
        let e = self.elim;
        let others: Vec<usize> = (0..4).filter(|&i| i != e).collect();
        let (ra, rb, rc) = (&self.rules[others[0]], &self.rules[others[1]], &self.rules[others[2]]);
        for (ya, wa) in ra.nodes.iter().zip(&ra.weights) {
            let ga = (self.g[others[0]])(*ya) * wa;
            if ga == 0.0 {
                continue;
            }
            for (yb, wb) in rb.nodes.iter().zip(&rb.weights) {
                let gb = (self.g[others[1]])(*yb) * wb;
                if gb == 0.0 {
                    continue;
                }
                for (yc, wc) in rc.nodes.iter().zip(&rc.weights) {
                    let gc = (self.g[others[2]])(*yc) * wc;
                    if gc == 0.0 {
                        continue;
                    }
                    let mut y = [0.0; 4];
                    y[others[0]] = *ya;
                    y[others[1]] = *yb;
                    y[others[2]] = *yc;
                    if e == 3 {
                        y[3] = y[0] + y[1] + y[2] + shift;
                    } else {
                        // y_e = y4 - shift - (sum of the other two inputs)
                        let rest: f64 = (0..3).filter(|&i| i != e).map(|i| y[i]).sum();
                        y[e] = y[3] - shift - rest;
                    }
                    let (lo, hi) = self.boxes[e];
                    if y[e] < lo || y[e] > hi {
                        continue;
                    }
                    let ge = (self.g[e])(y[e]);
                    visit([y[0], y[1], y[2]], ga * gb * gc * ge);
                }
            }
        }
    }
}

/// `|J|` for separable blocks `fᵢ = aᵢ(ξ) bᵢ(μ)`.
///
/// The modulation integral collapses to `C(ρ) = ∫ b1 b2 b3 b4(μ1+μ2+μ3+ρ)`,
/// tabulated on `samples` points and interpolated (cubic); the frequency
/// integral is `∫ a1 a2 a3 a4(ξ1+ξ2+ξ3) C(Ω)`. Both eliminate the widest
/// support through the linear constraint. Rules use `panels × per_panel`
/// nodes per variable.
pub fn j_functional_separable(
    f: [&BlockFunction2D; 4],
    panels: usize,
    per_panel: usize,
    samples: usize,
) -> Result<f64> {
    if f.iter().any(|b| !b.is_separable()) {
        return Err(Error::Domain("fast path needs separable blocks".into()));
    }
    let cost = (panels * per_panel).pow(3) as f64 * 2.0;
    if cost > J_COST_LIMIT {
        return Err(Error::CostGuard(format!(
            "separable functional needs {cost:.3e} evaluations"
        )));
    }
    let mu_boxes = [f[0].mu_box, f[1].mu_box, f[2].mu_box, f[3].mu_box];
    let xi_boxes = [f[0].xi_box, f[1].xi_box, f[2].xi_box, f[3].xi_box];
    let rule = |b: (f64, f64)| Rule1D::new(b.0, b.1, &[], panels, per_panel);

    // C(ρ) is supported in [lo4 - Σhi, hi4 - Σlo]
    let c_lo = mu_boxes[3].0 - (mu_boxes[0].1 + mu_boxes[1].1 + mu_boxes[2].1);
    let c_hi = mu_boxes[3].1 - (mu_boxes[0].0 + mu_boxes[1].0 + mu_boxes[2].0);
    let bm: [Box<dyn Fn(f64) -> f64 + Sync>; 4] = [
        Box::new(|m| f[0].factor_mu(m)),
        Box::new(|m| f[1].factor_mu(m)),
        Box::new(|m| f[2].factor_mu(m)),
        Box::new(|m| f[3].factor_mu(m)),
    ];
    let mu_tri = ConstrainedTriple::new(
        mu_boxes,
        [
            rule(mu_boxes[0]),
            rule(mu_boxes[1]),
            rule(mu_boxes[2]),
            rule(mu_boxes[3]),
        ],
        [&*bm[0], &*bm[1], &*bm[2], &*bm[3]],
    );
    let table = UniformTable::build(c_lo, c_hi, samples.max(16), |rho| {
        let mut acc = Vec::new();
        mu_tri.for_each(rho, |_, w| acc.push(w));
        pairwise_sum(&acc)
    });
    let c_of = |rho: f64| table.eval(rho);

    let ax: [Box<dyn Fn(f64) -> f64 + Sync>; 4] = [
        Box::new(|x| f[0].factor_xi(x)),
        Box::new(|x| f[1].factor_xi(x)),
        Box::new(|x| f[2].factor_xi(x)),
        Box::new(|x| f[3].factor_xi(x)),
    ];
    let xi_tri = ConstrainedTriple::new(
        xi_boxes,
        [
            rule(xi_boxes[0]),
            rule(xi_boxes[1]),
            rule(xi_boxes[2]),
            rule(xi_boxes[3]),
        ],
        [&*ax[0], &*ax[1], &*ax[2], &*ax[3]],
    );
    let mut terms = Vec::new();
    xi_tri.for_each(0.0, |y, w| {
        terms.push(w * c_of(resonance(y[0], y[1], y[2])));
    });
    Ok(pairwise_sum(&terms).abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    Hann,
    Eta0,
}

impl Window {
    /// Weight at fraction `s ∈ [0, 1]` of the record.
    fn weight(&self, s: f64) -> f64 {
        match self {
            Window::Hann => (PI * s).sin().powi(2),
            Window::Eta0 => cutoff::eta0((2.0 * s - 1.0) * cutoff::SUPPORT),
        }
    }
}

/// Samples of `F(ξ, τ) = Δt Σ_l w(t_l) û(ξ, t_l) e^{-i t_l τ}` on the lattice
/// `τ = 2π p/(N Δt)`, both axes ascending, `ξ`-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSpectrum {
    pub xi: Vec<f64>,
    pub tau: Vec<f64>,
    pub values: Vec<Complex64>,
    /// Spatial period `L`; `(1/L) Σ_ξ` is the `ξ` measure.
    pub length: f64,
    pub dt: f64,
}

impl SampledSpectrum {
    pub fn at(&self, i_xi: usize, i_tau: usize) -> Complex64 {
        self.values[i_xi * self.tau.len() + i_tau]
    }

    /// Energy with the measure `(1/L) × 1/(N Δt)`; equals `Δt Σ_l ∫ |w u|² dx`.
    pub fn energy(&self) -> f64 {
        let scale = 1.0 / (self.length * self.tau.len() as f64 * self.dt);
        pairwise_sum(&self.values.iter().map(|v| v.norm_sqr()).collect::<Vec<_>>()) * scale
    }

    /// `(ξ, τ)` of the largest magnitude sample.
    pub fn peak(&self) -> (f64, f64) {
        let (idx, _) =
            self.values.iter().enumerate().fold(
                (0, -1.0),
                |(bi, bv), (i, v)| if v.norm() > bv { (i, v.norm()) } else { (bi, bv) },
            );
        let nt = self.tau.len();
        (self.xi[idx / nt], self.tau[idx % nt])
    }

    pub fn dtau(&self) -> f64 {
        2.0 * PI / (self.tau.len() as f64 * self.dt)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("xi,tau,re,im\n");
        for (a, x) in self.xi.iter().enumerate() {
            for (b, t) in self.tau.iter().enumerate() {
                let v = self.at(a, b);
                out.push_str(&format!("{x:e},{t:e},{:e},{:e}\n", v.re, v.im));
            }
        }
        out
    }

    /// `Σ_j 2^{j/2} [β_{k,j}] ‖η_j(τ - ω(ξ)) F‖` over the sampled lattice.
    /// Samples with `ξ` outside `shell` must vanish.
    pub fn modulation_norm(&self, k: i32, kind: NormKind, shell: Shell) -> Result<f64> {
        let nt = self.tau.len();
        let total = self.energy();
        let mut outside = 0.0;
        for (a, &x) in self.xi.iter().enumerate() {
            if !shell.contains(x) {
                outside += (0..nt).map(|b| self.at(a, b).norm_sqr()).sum::<f64>();
            }
        }
        let scale = 1.0 / (self.length * nt as f64 * self.dt);
        if outside * scale > 1e-24 * total.max(f64::MIN_POSITIVE) {
            return Err(Error::Support(format!("sampled data is not supported in {shell:?}")));
        }
        let mut top = 0;
        let mut mx = 0.0f64;
        for &x in &self.xi {
            for &t in &self.tau {
                mx = mx.max((t - omega(x)).abs());
            }
        }
        while 0.625 * pow2(top) < mx && top < 62 {
            top += 1;
        }
        let terms: Vec<f64> = (0..=top)
            .map(|j| {
                let mut v = Vec::with_capacity(self.values.len());
                for (a, &x) in self.xi.iter().enumerate() {
                    for (b, &t) in self.tau.iter().enumerate() {
                        let e = cutoff::eta(j, t - omega(x));
                        v.push(e * e * self.at(a, b).norm_sqr());
                    }
                }
                weight(kind, k, j) * (pairwise_sum(&v) * scale).sqrt()
            })
            .collect();
        Ok(pairwise_sum(&terms))
    }
}

/// Windowed space-time transform of a trajectory with uniform snapshots.
pub fn spacetime_spectrum(tr: &Trajectory, window: Window) -> Result<SampledSpectrum> {
    let nt = tr.times.len();
    if nt < 64 {
        return Err(Error::config(
            "snapshots",
            "space-time spectrum needs at least 64 snapshots",
        ));
    }
    let dt = tr.times[1] - tr.times[0];
    for w in tr.times.windows(2) {
        if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt {
            return Err(Error::config("snapshot_stride", "snapshot times must be uniform"));
        }
    }
    let g = tr.states[0].grid;
    let n = g.n();
    let t0 = tr.times[0];
    let spectra: Vec<_> = tr.states.iter().map(to_spectrum).collect();
    let wts: Vec<f64> = (0..nt).map(|l| window.weight(l as f64 / (nt - 1) as f64)).collect();
    // τ index p in FFT order, mapped to ascending order below
    let taus: Vec<f64> = (0..nt)
        .map(|p| {
            let q = if p < nt.div_ceil(2) {
                p as i64
            } else {
                p as i64 - nt as i64
            };
            2.0 * PI * q as f64 / (nt as f64 * dt)
        })
        .collect();
    let mut order: Vec<usize> = (0..nt).collect();
    order.sort_by(|&a, &b| taus[a].total_cmp(&taus[b]));
    let mut xi_order: Vec<usize> = (0..n).collect();
    xi_order.sort_by(|&a, &b| g.xi(a).total_cmp(&g.xi(b)));
    let rows: Vec<Vec<Complex64>> = xi_order
        .par_iter()
        .map(|&i| {
            let mut buf: Vec<Complex64> = (0..nt).map(|l| spectra[l].coeffs[i] * wts[l]).collect();
            fft_forward(&mut buf);
            order
                .iter()
                .map(|&p| buf[p] * dt * Complex64::new(0.0, -t0 * taus[p]).exp())
                .collect()
        })
        .collect();
    Ok(SampledSpectrum {
        xi: xi_order.iter().map(|&i| g.xi(i)).collect(),
        tau: order.iter().map(|&p| taus[p]).collect(),
        values: rows.into_iter().flatten().collect(),
        length: g.length(),
        dt,
    })
}

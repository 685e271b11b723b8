//! Ratios of the quadrilinear functional to its dyadic bounds over seeded
//! random block quadruples.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ExperimentSpec;
use crate::bourgain::{j_functional_separable, resonance, smooth_bump, BlockFunction2D, BlockSpec, Modulation, Shell};
use crate::cutoff::pow2;
use crate::error::{Error, Result};
use crate::report::{fit_line, Cell, SweepReport};

/// Largest output frequency index a configuration may reach.
pub const K_CAP: i32 = 12;
/// Allowed growth of `log2(ratio)` per unit of `k_max`.
pub const SLOPE_LIMIT: f64 = 0.05;
const MAX_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Part {
    A,
    B,
    C,
    D,
}

impl Part {
    pub fn name(&self) -> &'static str {
        match self {
            Part::A => "a",
            Part::B => "b",
            Part::C => "c",
            Part::D => "d",
        }
    }

    fn index(&self) -> u64 {
        match self {
            Part::A => 0,
            Part::B => 1,
            Part::C => 2,
            Part::D => 3,
        }
    }
}

impl std::str::FromStr for Part {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a" => Ok(Part::A),
            "b" => Ok(Part::B),
            "c" => Ok(Part::C),
            "d" => Ok(Part::D),
            _ => Err(Error::config(
                "part",
                format!("unknown part `{s}` (expected a, b, c or d)"),
            )),
        }
    }
}

/// Resolution of the fast separable quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadConfig {
    pub panels: usize,
    pub per_panel: usize,
    pub samples: usize,
}

impl QuadConfig {
    pub fn from_spec(spec: &ExperimentSpec) -> Self {
        QuadConfig {
            panels: spec.panels,
            per_panel: spec.resolution,
            samples: spec.samples,
        }
    }

    pub fn doubled(&self) -> Self {
        QuadConfig {
            panels: 2 * self.panels,
            per_panel: self.per_panel,
            samples: 2 * self.samples - 1,
        }
    }
}

/// Dyadic bound without the `Π‖fᵢ‖` factor; `ks` ascending.
pub fn symmetric_bound(part: Part, ks: [i32; 4], js: [i32; 4]) -> Result<f64> {
    if ks.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Hypothesis(format!("frequency indices {ks:?} are not ascending")));
    }
    if js.iter().any(|&j| j < 0) {
        return Err(Error::Hypothesis(format!("modulation indices {js:?} must be >= 0")));
    }
    let mut sj = js;
    sj.sort_unstable();
    let (jmin, jthd, jmax) = (sj[0], sj[2], sj[3]);
    let (kmin, kthd, kmax) = (ks[0], ks[2], ks[3]);
    let jsum: i32 = js.iter().sum();
    let e = |x: i32| 2f64.powf(f64::from(x) / 2.0);
    match part {
        Part::A => Ok(e(jmin + jthd) * e(kmin + kthd)),
        Part::B => {
            if ks[1] > ks[2] - 5 {
                return Err(Error::Hypothesis(format!("part (b) needs k2 <= k3 - 5, got {ks:?}")));
            }
            let low = if js[1] != jmax { kmin } else { kthd };
            Ok(e(jsum - jmax) * e(low - kmax))
        }
        Part::C => Ok(e(jsum - jmax)),
        Part::D => {
            if kmin > kmax - 10 {
                return Err(Error::Hypothesis(format!(
                    "part (d) needs k_min <= k_max - 10, got {ks:?}"
                )));
            }
            Ok(e(jsum) * pow2(-kmax))
        }
    }
}

/// Frequency indices of the three inputs, ascending, for `part`.
fn draw_ks(part: Part, rng: &mut ChaCha8Rng) -> [i32; 3] {
    let pair = |rng: &mut ChaCha8Rng, hi: i32| {
        let a = rng.gen_range(0..=hi);
        let b = rng.gen_range(0..=hi);
        (a.min(b), a.max(b))
    };
    match part {
        Part::A | Part::C => {
            let k3 = rng.gen_range(1..K_CAP);
            if rng.gen_bool(0.5) {
                let lo = (k3 - 3).max(0);
                let a = rng.gen_range(lo..=k3);
                let b = rng.gen_range(lo..=k3);
                [a.min(b), a.max(b), k3]
            } else {
                let (a, b) = pair(rng, (k3 - 3).max(0));
                [a, b, k3]
            }
        }
        Part::B => {
            let k3 = rng.gen_range(5..K_CAP);
            let (a, b) = pair(rng, k3 - 5);
            [a, b, k3]
        }
        Part::D => {
            let k3 = rng.gen_range(9..K_CAP);
            let k1 = rng.gen_range(0..=(k3 - 9));
            let k2 = rng.gen_range(k1..=k3);
            [k1, k2, k3]
        }
    }
}

/// Output index whose shell holds `[a, b]`.
fn shell_of(a: f64, b: f64) -> Option<i32> {
    let m = a.abs().max(b.abs());
    let top = m.log2().ceil() as i32;
    (top - 2..=top + 1).find(|&k| Shell::Dyadic(k).contains_range(a, b))
}

fn block(k: i32, j: i32, xi: (f64, f64), rho: f64, amp: f64, quad: QuadConfig) -> Result<BlockFunction2D> {
    let (c, w) = (0.5 * (xi.0 + xi.1), 0.5 * (xi.1 - xi.0));
    let spec = BlockSpec {
        k,
        j,
        shell: Shell::Dyadic(k),
        modulation: Modulation::UpTo(j),
        xi_box: xi,
        mu_box: (-rho, rho),
        xi_breaks: vec![],
        mu_breaks: vec![],
        panels: quad.panels,
        per_panel: quad.per_panel,
    };
    BlockFunction2D::separable(
        spec,
        move |x| amp * smooth_bump((x - c) / w),
        move |m| smooth_bump(m / rho),
    )
}

/// Largest `|Ω|` over a sample lattice of the three input boxes.
fn max_resonance(boxes: &[(f64, f64); 3]) -> f64 {
    let m = 9;
    let at = |b: (f64, f64), i: usize| b.0 + (b.1 - b.0) * i as f64 / (m - 1) as f64;
    let mut best = 0.0f64;
    for a in 0..m {
        for b in 0..m {
            for c in 0..m {
                best = best.max(resonance(at(boxes[0], a), at(boxes[1], b), at(boxes[2], c)).abs());
            }
        }
    }
    best
}

/// Nonnegative separable bump blocks with ascending `k`, the fourth covering
/// every reachable `(ξ1+ξ2+ξ3, μ1+μ2+μ3+Ω)`.
pub fn random_configuration(
    part: Part,
    spec: &ExperimentSpec,
    row: u64,
    quad: QuadConfig,
) -> Result<([i32; 4], [i32; 4], [BlockFunction2D; 4])> {
    let mut rng = spec.rng(row * 4 + part.index());
    for _ in 0..MAX_ATTEMPTS {
        let k3 = draw_ks(part, &mut rng);
        let mut boxes = [(0.0, 0.0); 3];
        let mut centre = 0.0;
        let mut spread = 0.0;
        for (i, &k) in k3.iter().enumerate() {
            let c = rng.gen_range(0.75..1.5) * pow2(k) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let w = rng.gen_range(0.1..0.25) * pow2(k);
            boxes[i] = (c - w, c + w);
            centre += c;
            spread += w;
        }
        let out = (centre - spread, centre + spread);
        let Some(k4) = shell_of(out.0, out.1) else { continue };
        if k4 < k3[2] || k4 > K_CAP {
            continue;
        }
        let ks = [k3[0], k3[1], k3[2], k4];
        let mut js = [0; 4];
        let mut rhos = [0.0; 4];
        for i in 0..3 {
            js[i] = rng.gen_range(0..=6);
            rhos[i] = pow2(js[i] + 1) * rng.gen_range(0.5..1.0);
        }
        let reach = rhos[..3].iter().sum::<f64>() + 1.05 * max_resonance(&boxes);
        js[3] = (reach.log2().ceil() as i32 - 1).max(0);
        rhos[3] = pow2(js[3] + 1);
        if symmetric_bound(part, ks, js).is_err() {
            continue;
        }
        let amps: Vec<f64> = (0..4).map(|_| rng.gen_range(0.5..1.5)).collect();
        let blocks = [
            block(ks[0], js[0], boxes[0], rhos[0], amps[0], quad)?,
            block(ks[1], js[1], boxes[1], rhos[1], amps[1], quad)?,
            block(ks[2], js[2], boxes[2], rhos[2], amps[2], quad)?,
            block(ks[3], js[3], out, rhos[3], amps[3], quad)?,
        ];
        return Ok((ks, js, blocks));
    }
    Err(Error::CostGuard(format!(
        "no admissible configuration for part ({}) after {MAX_ATTEMPTS} draws",
        part.name()
    )))
}

/// `(J, bound, Π‖fᵢ‖)` for one configuration.
pub fn evaluate(
    part: Part,
    ks: [i32; 4],
    js: [i32; 4],
    blocks: &[BlockFunction2D; 4],
    quad: QuadConfig,
) -> Result<(f64, f64, f64)> {
    let bound = symmetric_bound(part, ks, js)?;
    let j = j_functional_separable(
        [&blocks[0], &blocks[1], &blocks[2], &blocks[3]],
        quad.panels,
        quad.per_panel,
        quad.samples,
    )?;
    let norms: f64 = blocks.iter().map(|b| b.l2_norm()).product();
    Ok((j, bound, norms))
}

/// `(ks, js, J, bound, Π‖f‖)` of one configuration.
type Row = ([i32; 4], [i32; 4], f64, f64, f64);

/// Rows `part,k1..k4,j1..j4,j_value,bound,norm_product,ratio`; fit of
/// `log2(ratio)` against `k_max` over the nonzero ratios.
pub fn symmetric_estimate_sweep(part: Part, spec: &ExperimentSpec) -> Result<SweepReport> {
    spec.validate()?;
    let quad = QuadConfig::from_spec(spec);
    let rows: Vec<Row> = (0..spec.configs as u64)
        .into_par_iter()
        .map(|r| {
            let (ks, js, blocks) = random_configuration(part, spec, r, quad)?;
            let (j, bound, norms) = evaluate(part, ks, js, &blocks, quad)?;
            Ok((ks, js, j, bound, norms))
        })
        .collect::<Result<_>>()?;
    let mut rep = SweepReport::new(
        &format!("symmetric_{}", part.name()),
        &[
            "part",
            "k1",
            "k2",
            "k3",
            "k4",
            "j1",
            "j2",
            "j3",
            "j4",
            "j_value",
            "bound",
            "norm_product",
            "ratio",
        ],
    );
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    let mut max_ratio = 0.0f64;
    for (ks, js, j, bound, norms) in rows {
        let ratio = if norms > 0.0 { j / (bound * norms) } else { 0.0 };
        if ratio > 0.0 {
            xs.push(f64::from(ks[3]));
            ys.push(ratio.log2());
        }
        max_ratio = max_ratio.max(ratio);
        let mut row: Vec<Cell> = vec![part.name().into()];
        row.extend(ks.iter().map(|&k| Cell::from(k)));
        row.extend(js.iter().map(|&j| Cell::from(j)));
        row.extend([j.into(), bound.into(), norms.into(), ratio.into()]);
        rep.push(row);
    }
    rep.values.insert("max_ratio".into(), max_ratio);
    rep.values.insert("nonzero_rows".into(), xs.len() as f64);
    if xs.len() >= 2 {
        let fit = fit_line(&xs, &ys);
        rep.checks
            .insert("log2_ratio_slope_bounded".into(), fit.slope <= SLOPE_LIMIT);
        rep.values.insert("slope".into(), fit.slope);
        rep.fits.insert("log2_ratio_vs_kmax".into(), fit);
    } else {
        rep.checks.insert("log2_ratio_slope_bounded".into(), false);
        rep.notes.insert("fit".into(), "fewer than two nonzero ratios".into());
    }
    Ok(rep)
}

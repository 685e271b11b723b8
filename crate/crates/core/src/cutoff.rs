//! Littlewood-Paley cutoffs.
//!
//! `eta0` is even, equal to 1 on `[-5/4, 5/4]`, zero outside `(-8/5, 8/5)` and
//! monotone in between. The transition is the normalised primitive of the
//! compactly supported bump `exp(-1/t) exp(-1/(1-t))`, written in closed
//! form as `f(t) / (f(t) + f(1 - t))` with `f(t) = exp(-1/t)`; it is C^∞.
//!
//! `chi_k(xi) = eta0(xi / 2^k) - eta0(xi / 2^(k-1))` is supported in
//! `(5/8) 2^k <= |xi| <= (8/5) 2^k`; `eta_k = chi_k` for `k >= 1`,
//! `eta_0 = eta0` and `eta_k = 0` for negative `k`.

use serde::{Deserialize, Serialize};

pub const PLATEAU: f64 = 5.0 / 4.0;
pub const SUPPORT: f64 = 8.0 / 5.0;

/// Guaranteed continuity class of the transition (it is in fact C^∞); tests
/// probe derivatives up to this order by finite differences.
pub const SMOOTHNESS_ORDER: u32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutoffKind {
    Eta0,
    ChiK,
    EtaK,
    EtaLeq,
}

fn f_exp(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

/// Smooth step rising from 0 at `t <= 0` to 1 at `t >= 1`.
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let a = f_exp(t);
    let b = f_exp(1.0 - t);
    a / (a + b)
}

/// Derivative of [`smooth_step`].
pub fn smooth_step_deriv(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        return 0.0;
    }
    let a = f_exp(t);
    let b = f_exp(1.0 - t);
    let da = a / (t * t);
    let db = -b / ((1.0 - t) * (1.0 - t));
    (da * b - a * db) / ((a + b) * (a + b))
}

const WIDTH: f64 = SUPPORT - PLATEAU;

pub fn eta0(xi: f64) -> f64 {
    let r = xi.abs();
    if r <= PLATEAU {
        1.0
    } else if r >= SUPPORT {
        0.0
    } else {
        1.0 - smooth_step((r - PLATEAU) / WIDTH)
    }
}

pub fn eta0_deriv(xi: f64) -> f64 {
    let r = xi.abs();
    if r <= PLATEAU || r >= SUPPORT {
        return 0.0;
    }
    -smooth_step_deriv((r - PLATEAU) / WIDTH) / WIDTH * xi.signum()
}

pub fn pow2(k: i32) -> f64 {
    2f64.powi(k)
}

pub fn chi(k: i32, xi: f64) -> f64 {
    eta0(xi / pow2(k)) - eta0(xi / pow2(k - 1))
}

pub fn eta(k: i32, xi: f64) -> f64 {
    match k {
        k if k < 0 => 0.0,
        0 => eta0(xi),
        k => chi(k, xi),
    }
}

/// `sum_{l <= k} eta_l`.
pub fn eta_leq(k: i32, xi: f64) -> f64 {
    if k < 0 {
        0.0
    } else {
        eta0(xi / pow2(k))
    }
}

/// `eta_{>=1} = 1 - eta0`.
pub fn eta_geq1(xi: f64) -> f64 {
    1.0 - eta0(xi)
}

pub fn dyadic_cutoff(kind: CutoffKind, k: i32, xi: f64) -> f64 {
    match kind {
        CutoffKind::Eta0 => eta0(xi),
        CutoffKind::ChiK => chi(k, xi),
        CutoffKind::EtaK => eta(k, xi),
        CutoffKind::EtaLeq => eta_leq(k, xi),
    }
}

/// Breakpoints of `eta_l` (both signs) where its profile changes regime.
pub fn eta_breakpoints(l: i32) -> Vec<f64> {
    let s = pow2(l);
    let base: &[f64] = if l <= 0 {
        &[PLATEAU, SUPPORT]
    } else {
        &[5.0 / 8.0, 4.0 / 5.0, PLATEAU, SUPPORT]
    };
    base.iter().flat_map(|c| [c * s, -c * s]).collect()
}

/// Sharp indicator of `O_k = {(3/4) 2^k <= |xi| < (3/2) 2^k}`.
pub fn in_o_k(k: i32, xi: f64) -> bool {
    let r = xi.abs();
    let s = pow2(k);
    r >= 0.75 * s && r < 1.5 * s
}

/// `I_k = {2^(k-1) <= |xi| <= 2^(k+1)}`.
pub fn in_i_k(k: i32, xi: f64) -> bool {
    let r = xi.abs();
    r >= pow2(k - 1) && r <= pow2(k + 1)
}

/// `Ĩ_k`: `[-2, 2]` for `k = 0`, `I_k` for `k >= 1`.
pub fn in_i_tilde(k: i32, xi: f64) -> bool {
    if k <= 0 {
        xi.abs() <= 2.0
    } else {
        in_i_k(k, xi)
    }
}

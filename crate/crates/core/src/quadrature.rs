//! Gauss-Legendre rules and composite tensor panels.

use std::f64::consts::PI;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite rule on `[a, b]` split at the given interior breakpoints, with
/// `per_panel` nodes on every panel. Returns `(node, weight)` pairs.
pub fn composite(a: f64, b: f64, breaks: &[f64], per_panel: usize) -> Vec<(f64, f64)> {
    let cuts = panel_edges(a, b, breaks);
    let (x, w) = gauss_legendre(per_panel);
    let mut out = Vec::with_capacity((cuts.len() - 1) * per_panel);
    for win in cuts.windows(2) {
        let (lo, hi) = (win[0], win[1]);
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        for (xi, wi) in x.iter().zip(&w) {
            out.push((mid + half * xi, half * wi));
        }
    }
    out
}

/// Sorted panel edges `a = e0 < e1 < ... < b` using the breakpoints that lie
/// strictly inside `(a, b)`.
pub fn panel_edges(a: f64, b: f64, breaks: &[f64]) -> Vec<f64> {
    let mut cuts = vec![a];
    let tol = 1e-12 * (b - a).abs().max(1e-300);
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|&c| c > a + tol && c < b - tol).collect();
    inner.sort_by(|p, q| p.partial_cmp(q).unwrap());
    inner.dedup_by(|p, q| (*p - *q).abs() <= tol);
    cuts.extend(inner);
    cuts.push(b);
    cuts
}

/// Sum in a fixed pairwise order; the result depends only on the input order.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        n if n <= 8 => v.iter().sum(),
        n => {
            let (l, r) = v.split_at(n / 2);
            pairwise_sum(l) + pairwise_sum(r)
        }
    }
}

/// Samples on a uniform lattice over `[lo, hi]`, read back by cubic
/// (Catmull-Rom) interpolation; zero outside the lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformTable {
    lo: f64,
    hi: f64,
    h: f64,
    values: Vec<f64>,
}

impl UniformTable {
    /// Tabulates `f` at `m >= 2` points.
    pub fn build(lo: f64, hi: f64, m: usize, f: impl Fn(f64) -> f64 + Sync) -> Self {
        use rayon::prelude::*;
        assert!(m >= 2 && hi > lo);
        let h = (hi - lo) / (m - 1) as f64;
        let values = (0..m).into_par_iter().map(|i| f(lo + h * i as f64)).collect();
        UniformTable { lo, hi, h, values }
    }

    pub fn eval(&self, x: f64) -> f64 {
        if !(x >= self.lo && x <= self.hi) {
            return 0.0;
        }
        let m = self.values.len();
        let s = (x - self.lo) / self.h;
        let i = (s.floor() as usize).min(m - 2);
        let t = s - i as f64;
        let at = |k: isize| self.values[k.clamp(0, m as isize - 1) as usize];
        let i = i as isize;
        let (p0, p1, p2, p3) = (at(i - 1), at(i), at(i + 1), at(i + 2));
        p1 + 0.5 * t * (p2 - p0 + t * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + t * (3.0 * (p1 - p2) + p3 - p0)))
    }
}

//! JSON configuration: per-command key sets, defaults, and aggregated
//! validation. Nothing is dispatched unless every key checks out.

use std::collections::BTreeSet;
use std::fmt;

use clap::ValueEnum;
use mbo_core::energy::{make_symbol, SymbolS};
use mbo_core::lab::{DispersiveKind, ExperimentSpec, Part};
use mbo_core::solver::{Integrator, SolverConfig};
use mbo_core::spectral::{Field, SpectralGrid};
use serde_json::{json, Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Simulate,
    Conservation,
    Picard,
    ModifiedEnergy,
    Divergence,
    Xsb,
    Estimates,
    Dispersive,
    Apriori,
    Scaling,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Conservation => "conservation",
            Command::Picard => "picard",
            Command::ModifiedEnergy => "modified-energy",
            Command::Divergence => "divergence",
            Command::Xsb => "xsb",
            Command::Estimates => "estimates",
            Command::Dispersive => "dispersive",
            Command::Apriori => "apriori",
            Command::Scaling => "scaling",
        }
    }

    fn uses_solver(&self) -> bool {
        matches!(
            self,
            Command::Simulate
                | Command::Conservation
                | Command::Picard
                | Command::ModifiedEnergy
                | Command::Apriori
                | Command::Scaling
        )
    }
}

/// One offending key.
#[derive(Debug, Clone, PartialEq)]
pub struct Issue {
    pub key: String,
    pub reason: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "`{}`: {}", self.key, self.reason)
    }
}

struct Reader<'a> {
    src: &'a Map<String, Value>,
    out: Map<String, Value>,
    seen: BTreeSet<String>,
    issues: Vec<Issue>,
}

impl<'a> Reader<'a> {
    fn new(src: &'a Map<String, Value>) -> Self {
        Reader {
            src,
            out: Map::new(),
            seen: BTreeSet::new(),
            issues: Vec::new(),
        }
    }

    fn issue(&mut self, key: &str, reason: impl Into<String>) {
        self.issues.push(Issue {
            key: key.into(),
            reason: reason.into(),
        });
    }

    /// Raw value or default; `None` default marks the key required.
    fn take(&mut self, key: &str, default: Option<Value>, check: fn(&Value) -> bool, kind: &str) -> Option<Value> {
        self.seen.insert(key.into());
        let v = match (self.src.get(key), default) {
            (Some(v), _) => v.clone(),
            (None, Some(d)) => d,
            (None, None) => {
                self.issue(key, "required key is missing");
                return None;
            }
        };
        if !check(&v) {
            self.issue(key, format!("expected {kind}, got {v}"));
            return None;
        }
        self.out.insert(key.into(), v.clone());
        Some(v)
    }

    fn f64(&mut self, key: &str, default: Option<f64>) -> Option<f64> {
        self.take(key, default.map(|d| json!(d)), Value::is_number, "a number")
            .and_then(|v| v.as_f64())
    }

    fn usize(&mut self, key: &str, default: Option<usize>) -> Option<usize> {
        self.take(key, default.map(|d| json!(d)), Value::is_u64, "a non-negative integer")
            .and_then(|v| v.as_u64())
            .map(|v| v as usize)
    }

    fn u64(&mut self, key: &str, default: u64) -> Option<u64> {
        self.take(key, Some(json!(default)), Value::is_u64, "a non-negative integer")
            .and_then(|v| v.as_u64())
    }

    fn bool(&mut self, key: &str, default: bool) -> Option<bool> {
        self.take(key, Some(json!(default)), Value::is_boolean, "true or false")
            .and_then(|v| v.as_bool())
    }

    fn string(&mut self, key: &str, default: &str) -> Option<String> {
        self.take(key, Some(json!(default)), Value::is_string, "a string")
            .and_then(|v| v.as_str().map(str::to_string))
    }

    fn f64_list(&mut self, key: &str, default: &[f64]) -> Option<Vec<f64>> {
        let ok = |v: &Value| {
            v.as_array()
                .is_some_and(|a| !a.is_empty() && a.iter().all(Value::is_number))
        };
        self.take(key, Some(json!(default)), ok, "a non-empty list of numbers")
            .map(|v| v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect())
    }

    fn str_list(&mut self, key: &str, default: &[&str]) -> Option<Vec<String>> {
        let ok = |v: &Value| {
            v.as_array()
                .is_some_and(|a| !a.is_empty() && a.iter().all(Value::is_string))
        };
        self.take(key, Some(json!(default)), ok, "a non-empty list of strings")
            .map(|v| {
                v.as_array()
                    .unwrap()
                    .iter()
                    .map(|x| x.as_str().unwrap().to_string())
                    .collect()
            })
    }

    fn int_pair(&mut self, key: &str, default: (i32, i32)) -> Option<(i32, i32)> {
        let ok = |v: &Value| {
            v.as_array()
                .is_some_and(|a| a.len() == 2 && a.iter().all(Value::is_i64))
        };
        self.take(key, Some(json!([default.0, default.1])), ok, "a pair of integers")
            .map(|v| {
                let a = v.as_array().unwrap();
                (a[0].as_i64().unwrap() as i32, a[1].as_i64().unwrap() as i32)
            })
    }

    fn finish(mut self) -> (Map<String, Value>, Vec<Issue>) {
        let unknown: Vec<String> = self.src.keys().filter(|k| !self.seen.contains(*k)).cloned().collect();
        for k in unknown {
            self.issue(&k, "unknown key for this command");
        }
        (self.out, self.issues)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Initial {
    Gaussian,
    Cosine,
    Multimode,
}

impl Initial {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "gaussian" => Some(Initial::Gaussian),
            "cosine" => Some(Initial::Cosine),
            "multimode" => Some(Initial::Multimode),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct InitialData {
    pub kind: Initial,
    pub amplitude: f64,
    pub width: f64,
}

impl InitialData {
    /// Real field on `grid`; `y = x / P` so every shape is periodic.
    pub fn field(&self, grid: SpectralGrid) -> Field {
        let p = grid.period_scale();
        let (a, w) = (self.amplitude, self.width);
        match self.kind {
            Initial::Gaussian => Field::from_real_fn(grid, |x| a * (-(x / w).powi(2)).exp()),
            Initial::Cosine => Field::from_real_fn(grid, |x| a * (x / p).cos()),
            Initial::Multimode => Field::from_real_fn(grid, |x| {
                let y = x / p;
                a * (0.3 + y.cos() - 0.6 * (2.0 * y + 0.3).sin() + 0.4 * (3.0 * y + 1.0).cos() + 0.2 * (5.0 * y).sin())
            }),
        }
    }
}

/// Fully resolved run.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub command: Command,
    /// Every key with its effective value; hashed into the digest.
    pub echo: Value,
    pub solver: Option<SolverConfig>,
    pub initial: Option<InitialData>,
    pub spec: ExperimentSpec,
    pub iterations: usize,
    pub h_half_norm: Option<f64>,
    pub amplitudes: Vec<f64>,
    pub regularity: f64,
    pub lambda: f64,
    pub symbol: Option<SymbolS>,
    pub r6: bool,
    pub parts: Vec<Part>,
    pub kinds: Vec<DispersiveKind>,
}

fn solver_section(r: &mut Reader, cmd: Command) -> Option<SolverConfig> {
    let n = r.usize("n", None);
    let p = r.f64("period_scale", Some(1.0));
    let dt = r.f64("dt", None);
    let t_final = r.f64("t_final", Some(1.0));
    let integrator = r.string("integrator", "etdrk4");
    let pad = r.f64("dealias_pad", Some(2.0));
    let stride = r.usize("snapshot_stride", Some(if cmd == Command::Picard { 100 } else { 1 }));
    let focusing = r.bool("focusing", false);
    let linear = r.bool("linear_only", false);
    let integrator = match integrator.as_deref() {
        Some("etdrk4") => Some(Integrator::Etdrk4),
        Some("ifrk4") => Some(Integrator::Ifrk4),
        Some(other) => {
            r.issue("integrator", format!("expected `etdrk4` or `ifrk4`, got `{other}`"));
            None
        }
        None => None,
    };
    let grid = match (n, p) {
        (Some(n), Some(p)) => match SpectralGrid::new(n, p) {
            Ok(g) => Some(g),
            Err(mbo_core::Error::Config { key, reason }) => {
                r.issue(&key, reason);
                None
            }
            Err(e) => {
                r.issue("n", e.to_string());
                None
            }
        },
        _ => None,
    };
    let (grid, dt, t_final, integrator, pad, stride, focusing, linear) =
        (grid?, dt?, t_final?, integrator?, pad?, stride?, focusing?, linear?);
    let cfg = SolverConfig {
        grid,
        dt,
        t_final,
        integrator,
        dealias_pad: pad,
        snapshot_stride: stride,
        focusing,
        linear_only: linear,
        max_phase_per_step: grid.max_xi().powi(2) * dt,
    };
    match cfg.validate() {
        Ok(()) => Some(cfg),
        Err(mbo_core::Error::Config { key, reason }) => {
            r.issue(&key, reason);
            None
        }
        Err(e) => {
            r.issue("dt", e.to_string());
            None
        }
    }
}

fn initial_section(r: &mut Reader, default_kind: &str, default_amp: f64) -> Option<InitialData> {
    let kind = r.string("initial", default_kind);
    let amplitude = r.f64("amplitude", Some(default_amp));
    let width = r.f64("width", Some(1.0));
    let kind = match kind.as_deref().map(Initial::parse) {
        Some(Some(k)) => Some(k),
        Some(None) => {
            r.issue("initial", "expected `gaussian`, `cosine` or `multimode`");
            None
        }
        None => None,
    };
    if let Some(w) = width {
        if !(w > 0.0 && w.is_finite()) {
            r.issue("width", "must be positive");
        }
    }
    Some(InitialData {
        kind: kind?,
        amplitude: amplitude?,
        width: width?,
    })
}

fn spec_section(r: &mut Reader, cmd: Command, seed: u64) -> ExperimentSpec {
    let base = ExperimentSpec::default();
    let k_default = match cmd {
        Command::Divergence => (6, 14),
        _ => base.k_range,
    };
    let mut spec = ExperimentSpec {
        id: cmd.name().into(),
        seed,
        ..base.clone()
    };
    if matches!(cmd, Command::Divergence | Command::Dispersive) {
        spec.k_range = r.int_pair("k_range", k_default).unwrap_or(k_default);
    }
    if cmd == Command::Xsb {
        spec.n_list = r.f64_list("n_list", &base.n_list).unwrap_or_default();
    }
    if cmd == Command::Estimates {
        spec.configs = r.usize("configs", Some(base.configs)).unwrap_or(base.configs);
        spec.panels = r.usize("panels", Some(base.panels)).unwrap_or(base.panels);
        spec.samples = r.usize("samples", Some(base.samples)).unwrap_or(base.samples);
    }
    if matches!(cmd, Command::Estimates | Command::Divergence) {
        spec.resolution = r.usize("resolution", Some(base.resolution)).unwrap_or(base.resolution);
    }
    if let Err(mbo_core::Error::Config { key, reason }) = spec.validate() {
        r.issue(&key, reason);
    }
    spec
}

/// Validates `raw` for `cmd`; `seed_override` replaces the `seed` key.
pub fn resolve(cmd: Command, raw: &Value, seed_override: Option<u64>) -> Result<Resolved, Vec<Issue>> {
    let empty = Map::new();
    let src = match raw {
        Value::Object(m) => m,
        Value::Null => &empty,
        _ => {
            return Err(vec![Issue {
                key: "<root>".into(),
                reason: "configuration must be a JSON object".into(),
            }])
        }
    };
    let mut r = Reader::new(src);
    let seed_cfg = r.u64("seed", 0).unwrap_or(0);
    let seed = seed_override.unwrap_or(seed_cfg);
    r.out.insert("seed".into(), json!(seed));

    let solver = if cmd.uses_solver() {
        solver_section(&mut r, cmd)
    } else {
        None
    };
    let initial = if cmd.uses_solver() {
        let (kind, amp) = match cmd {
            Command::ModifiedEnergy => ("multimode", 1.0),
            Command::Apriori => ("gaussian", 1.0),
            _ => ("gaussian", 0.5),
        };
        initial_section(&mut r, kind, amp)
    } else {
        None
    };
    let spec = spec_section(&mut r, cmd, seed);

    let mut iterations = 6;
    let mut h_half_norm = None;
    let mut amplitudes = Vec::new();
    let mut regularity = 0.3;
    let mut lambda = 2.0;
    let mut symbol = None;
    let mut r6 = false;
    let mut parts = Vec::new();
    let mut kinds = Vec::new();
    match cmd {
        Command::Picard => {
            iterations = r.usize("iterations", Some(6)).unwrap_or(6);
            if iterations < 2 {
                r.issue("iterations", "need at least 2 iterations");
            }
            if src.contains_key("h_half_norm") {
                h_half_norm = r.f64("h_half_norm", None);
                if h_half_norm.is_some_and(|h| !(h > 0.0)) {
                    r.issue("h_half_norm", "must be positive");
                }
            }
        }
        Command::Apriori => {
            regularity = r.f64("s", Some(0.3)).unwrap_or(0.3);
            amplitudes = r.f64_list("amplitudes", &[0.1]).unwrap_or_default();
        }
        Command::Scaling => {
            lambda = r.f64("lambda", Some(2.0)).unwrap_or(2.0);
            if !(lambda > 0.0 && lambda.is_finite()) {
                r.issue("lambda", "must be positive");
            }
        }
        Command::ModifiedEnergy => {
            let s = r.f64("s", Some(1.0));
            let eps = r.f64("epsilon", Some(0.1));
            let hp = r.bool("high_pass", true);
            amplitudes = r.f64_list("amplitudes", &[0.1, 0.2, 0.4]).unwrap_or_default();
            if amplitudes.len() < 2 || amplitudes.iter().any(|&a| !(a > 0.0)) {
                r.issue("amplitudes", "need at least two positive amplitudes");
            }
            r6 = r.bool("r6", false).unwrap_or(false);
            if let (Some(s), Some(eps), Some(hp)) = (s, eps, hp) {
                match make_symbol(s, eps, hp) {
                    Ok(a) => symbol = Some(a),
                    Err(e) => r.issue("s", e.to_string()),
                }
            }
        }
        Command::Estimates => {
            for p in r.str_list("parts", &["a", "b", "c", "d"]).unwrap_or_default() {
                match p.parse::<Part>() {
                    Ok(p) => parts.push(p),
                    Err(e) => r.issue("parts", e.to_string()),
                }
            }
        }
        Command::Dispersive => {
            for k in r
                .str_list("kinds", &["strichartz", "smoothing", "maximal"])
                .unwrap_or_default()
            {
                match k.parse::<DispersiveKind>() {
                    Ok(k) => kinds.push(k),
                    Err(e) => r.issue("kinds", e.to_string()),
                }
            }
        }
        _ => {}
    }

    let (out, issues) = r.finish();
    if !issues.is_empty() {
        return Err(issues);
    }
    let mut echo = Map::new();
    echo.insert("command".into(), json!(cmd.name()));
    echo.insert("config".into(), Value::Object(out));
    Ok(Resolved {
        command: cmd,
        echo: Value::Object(echo),
        solver,
        initial,
        spec,
        iterations,
        h_half_norm,
        amplitudes,
        regularity,
        lambda,
        symbol,
        r6,
        parts,
        kinds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn keys(e: &[Issue]) -> Vec<&str> {
        e.iter().map(|i| i.key.as_str()).collect()
    }

    #[test]
    fn missing_dt_is_named() {
        let e = resolve(Command::Simulate, &json!({"n": 64}), None).unwrap_err();
        assert_eq!(keys(&e), ["dt"]);
    }

    #[test]
    fn grid_precondition_is_cited() {
        let e = resolve(Command::Simulate, &json!({"n": 100, "dt": 0.01}), None).unwrap_err();
        assert_eq!(keys(&e), ["n"]);
        assert!(e[0].reason.contains("power of two"));
    }

    #[test]
    fn all_issues_are_reported_together() {
        let cfg = json!({"n": 100, "dealias_pad": "x", "bogus": 1, "initial": "square"});
        let e = resolve(Command::Simulate, &cfg, None).unwrap_err();
        let k = keys(&e);
        for want in ["n", "dt", "dealias_pad", "bogus", "initial"] {
            assert!(k.contains(&want), "{k:?}");
        }
    }

    #[test]
    fn defaults_are_echoed() {
        let r = resolve(Command::Simulate, &json!({"n": 64, "dt": 0.01}), Some(9)).unwrap();
        let c = &r.echo["config"];
        assert_eq!(c["period_scale"], json!(1.0));
        assert_eq!(c["integrator"], json!("etdrk4"));
        assert_eq!(c["seed"], json!(9));
        let r = resolve(Command::Divergence, &Value::Null, None).unwrap();
        assert_eq!(r.spec.k_range, (6, 14));
    }

    #[test]
    fn sweep_keys_are_scoped() {
        let e = resolve(Command::Xsb, &json!({"k_range": [1, 2]}), None).unwrap_err();
        assert_eq!(keys(&e), ["k_range"]);
        let e = resolve(Command::Estimates, &json!({"parts": ["a", "q"]}), None).unwrap_err();
        assert_eq!(keys(&e), ["parts"]);
    }
}

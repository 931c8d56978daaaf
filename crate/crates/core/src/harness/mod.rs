//! Experiment runner: parameter sweeps, log-log regressions, oracle comparisons
//! and the on-disk result bundle.

mod commands;
mod compare;
mod kinds;
mod stats;
mod suite;

pub use commands::{run_command, Command};
pub use compare::{compare, CompareResult};
pub use kinds::interior_fraction;
pub use stats::{logspace, regress_loglog, RegressionResult};
pub use suite::{eigen_suite, EigenReport};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::spectral::ModeIndex;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    #[default]
    BlScaling,
    ResonantGrowth,
    WindConvergence,
    DirichletConvergence,
    EkmanRate,
    Destabilization,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub bl_classical_slope: f64,
    pub bl_quasi_slope: f64,
    pub resonant_slope: f64,
    pub resonant_fraction: f64,
    pub wind_slope: f64,
    pub wind_direct_ratio: f64,
    pub dirichlet_error: f64,
    pub ekman_rate: f64,
    pub destabilization: f64,
    pub divergence: f64,
    pub eigen: f64,
    pub traces: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            bl_classical_slope: 0.03,
            bl_quasi_slope: 0.05,
            resonant_slope: 0.05,
            resonant_fraction: 0.10,
            wind_slope: 0.05,
            wind_direct_ratio: 5.0,
            dirichlet_error: 0.1,
            ekman_rate: 0.10,
            destabilization: 0.1,
            divergence: 1e-10,
            eigen: 1e-8,
            traces: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: Kind,
    pub epsilon: Vec<f64>,
    /// Empty means ν = ε at every point.
    pub nu: Vec<f64>,
    pub beta: Vec<f64>,
    /// Initial-data mode (Dirichlet runs) or forcing wavenumber (k_h part).
    pub mode: [i64; 3],
    /// Forcing frequency; per-kind default when absent.
    pub mu: Option<f64>,
    pub n_cut: usize,
    pub nz: Option<usize>,
    /// dt = dt_ratio · ε.
    pub dt_ratio: Option<f64>,
    pub t_end: Option<f64>,
    /// Steps between stored snapshots.
    pub stride: Option<usize>,
    /// Grid values of ε that also get a direct run (wind convergence).
    pub direct_epsilon: Vec<f64>,
    /// Mode-ball radius for the `modes` command.
    pub radius: f64,
    pub tolerances: Tolerances,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            kind: Kind::BlScaling,
            epsilon: vec![1e-2, 1e-3, 1e-4, 1e-5],
            nu: vec![],
            beta: vec![1.0],
            mode: [1, 0, 1],
            mu: None,
            n_cut: 8,
            nz: None,
            dt_ratio: None,
            t_end: None,
            stride: None,
            direct_epsilon: vec![1e-3],
            radius: 4.0,
            tolerances: Tolerances::default(),
        }
    }
}

/// One (ε, ν, β) combination. Points sharing `series` differ only in ε.
#[derive(Debug, Clone, Serialize)]
pub struct GridPoint {
    pub index: usize,
    pub series: usize,
    pub epsilon: f64,
    pub nu: f64,
    pub beta: f64,
}

impl GridPoint {
    pub fn params(&self, spec: &ExperimentSpec) -> crate::Params {
        let mut p = crate::Params::new(self.epsilon, self.nu).with_beta(self.beta);
        p.n_cut = spec.n_cut;
        p
    }

    pub fn dir_name(&self) -> String {
        format!("point_{:03}", self.index)
    }
}

impl ExperimentSpec {
    /// JSON object, or `key = value` lines (`#` comments, `tol.name` for tolerances,
    /// comma lists without brackets allowed).
    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim_start();
        let value = if t.starts_with('{') {
            serde_json::from_str(t).map_err(|e| Error::Spec(e.to_string()))?
        } else {
            key_value_to_json(text)?
        };
        serde_json::from_value(value).map_err(|e| Error::Spec(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Spec(m));
        if self.epsilon.is_empty() || self.beta.is_empty() {
            return bad("parameter grid is empty".into());
        }
        for (name, v) in [("epsilon", &self.epsilon), ("nu", &self.nu), ("beta", &self.beta)] {
            if let Some(x) = v.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
                return bad(format!("{name} entries must be positive, got {x}"));
            }
        }
        let k = ModeIndex::new(self.mode[0], self.mode[1], self.mode[2]);
        if k.is_zero() {
            return bad("mode (0,0,0) is not an eigenmode".into());
        }
        if k.norm() > self.n_cut as f64 {
            return bad(format!("mode {k} lies outside the cutoff {}", self.n_cut));
        }
        if matches!(self.kind, Kind::BlScaling | Kind::WindConvergence) && k.kh_is_zero() {
            return bad("this kind needs a mode with k_h != 0".into());
        }
        if let Some(r) = self.dt_ratio {
            if !(r > 0.0 && r <= 0.1) {
                return bad(format!("dt_ratio must lie in (0, 0.1], got {r}"));
            }
        }
        if self.nz.is_some_and(|n| n < 16) || self.stride == Some(0) {
            return bad("nz must be at least 16 and stride positive".into());
        }
        if self.t_end.is_some_and(|t| !(t > 0.0 && t.is_finite())) {
            return bad("t_end must be positive".into());
        }
        Ok(())
    }

    /// Points in a fixed order: β outermost, then ν, then ε.
    pub fn grid(&self) -> Vec<GridPoint> {
        let mut out = Vec::new();
        let nus: Vec<Option<f64>> = if self.nu.is_empty() { vec![None] } else { self.nu.iter().map(|&n| Some(n)).collect() };
        let mut series = 0;
        for &beta in &self.beta {
            for nu in &nus {
                for &epsilon in &self.epsilon {
                    out.push(GridPoint { index: out.len(), series, epsilon, nu: nu.unwrap_or(epsilon), beta });
                }
                series += 1;
            }
        }
        out
    }

    pub fn mode_index(&self) -> ModeIndex {
        ModeIndex::new(self.mode[0], self.mode[1], self.mode[2])
    }

    pub fn kh(&self) -> [i64; 2] {
        [self.mode[0], self.mode[1]]
    }

    pub(crate) fn is_direct_epsilon(&self, e: f64) -> bool {
        self.direct_epsilon.iter().any(|d| (d - e).abs() <= 1e-9 * e)
    }
}

const LIST_KEYS: [&str; 4] = ["epsilon", "nu", "beta", "direct_epsilon"];

fn key_value_to_json(text: &str) -> Result<serde_json::Value> {
    let mut root = serde_json::Map::new();
    let mut tol = serde_json::Map::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Spec(format!("line {}: expected key = value", n + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        let v = if v.contains(',') && !v.starts_with('[') { format!("[{v}]") } else { v.to_string() };
        let mut value = serde_json::from_str(&v).unwrap_or(serde_json::Value::String(v));
        if LIST_KEYS.contains(&k) && !value.is_array() {
            value = serde_json::Value::Array(vec![value]);
        }
        match k.strip_prefix("tol.") {
            Some(name) => tol.insert(name.to_string(), value),
            None => root.insert(k.to_string(), value),
        };
    }
    if !tol.is_empty() {
        root.insert("tolerances".into(), serde_json::Value::Object(tol));
    }
    Ok(serde_json::Value::Object(root))
}

/// A pass/fail decision together with the tolerance it was checked against.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    /// How `value` is compared to `tolerance`.
    pub rule: String,
    pub passed: bool,
}

impl Check {
    pub fn below(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Check { name: name.into(), value, tolerance, rule: "value < tolerance".into(), passed: value < tolerance }
    }

    pub fn above(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Check { name: name.into(), value, tolerance, rule: "value > tolerance".into(), passed: value > tolerance }
    }

    /// |value − target| ≤ tolerance.
    pub fn near(name: impl Into<String>, value: f64, target: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            value,
            tolerance,
            rule: format!("|value - {target}| <= tolerance"),
            passed: (value - target).abs() <= tolerance,
        }
    }

    /// A condition without a numeric margin (value 1 = holds).
    pub fn holds(name: impl Into<String>, ok: bool, what: &str) -> Self {
        Check { name: name.into(), value: ok as u8 as f64, tolerance: 1.0, rule: what.into(), passed: ok }
    }

    pub fn failed(name: impl Into<String>, why: &str) -> Self {
        Check { name: name.into(), value: f64::NAN, tolerance: f64::NAN, rule: why.into(), passed: false }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PointResult {
    #[serde(flatten)]
    pub point: GridPoint,
    pub dir: String,
    pub values: BTreeMap<String, f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub command: String,
    pub spec: ExperimentSpec,
    pub points: Vec<PointResult>,
    pub regressions: BTreeMap<String, RegressionResult>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl RunSummary {
    pub fn new(command: &str, spec: &ExperimentSpec, points: Vec<PointResult>) -> Self {
        RunSummary { command: command.into(), spec: spec.clone(), points, regressions: BTreeMap::new(), checks: vec![], passed: false }
    }

    /// Fails a check for every point that errored, then sets `passed`.
    pub fn finish(&mut self) {
        for p in &self.points {
            if let Some(e) = &p.error {
                self.checks.push(Check::failed(format!("{}.completed", p.dir), e));
            }
        }
        self.passed = !self.checks.is_empty() && self.checks.iter().all(|c| c.passed);
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Adds a log-log regression of `y` against `x` over the completed points of
    /// each series, with a slope check.
    pub fn slope_check(&mut self, name: &str, x: &str, y: &str, target: f64, tol: f64) {
        let series: BTreeSet<usize> = self.points.iter().map(|p| p.point.series).collect();
        for s in series {
            let pts: Vec<(f64, f64)> = self
                .points
                .iter()
                .filter(|p| p.point.series == s)
                .filter_map(|p| Some((*p.values.get(x)?, *p.values.get(y)?)))
                .collect();
            let label = if self.points.iter().any(|p| p.point.series > 0) { format!("{name}.series{s}") } else { name.to_string() };
            match regress_loglog(&pts) {
                Ok(r) => {
                    self.checks.push(Check::near(format!("{label}.slope"), r.slope, target, tol));
                    self.regressions.insert(label, r);
                }
                Err(e) => self.checks.push(Check::failed(format!("{label}.slope"), &e.to_string())),
            }
        }
    }

    /// points.csv: one row per grid point, columns sorted by name.
    pub fn write_points_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        let keys: BTreeSet<&String> = self.points.iter().flat_map(|p| p.values.keys()).collect();
        write!(w, "index,series,epsilon,nu,beta")?;
        for k in &keys {
            write!(w, ",{k}")?;
        }
        writeln!(w, ",error")?;
        for p in &self.points {
            let g = &p.point;
            write!(w, "{},{},{:.10e},{:.10e},{:.10e}", g.index, g.series, g.epsilon, g.nu, g.beta)?;
            for k in &keys {
                match p.values.get(*k) {
                    Some(v) => write!(w, ",{v:.10e}")?,
                    None => write!(w, ",")?,
                }
            }
            writeln!(w, ",{}", p.error.as_deref().unwrap_or("").replace(',', ";"))?;
        }
        Ok(())
    }

    pub fn write(&self, out: &Path) -> Result<()> {
        std::fs::create_dir_all(out)?;
        self.write_points_csv(std::io::BufWriter::new(std::fs::File::create(out.join("points.csv"))?))?;
        let json = serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))?;
        std::fs::write(out.join("summary.json"), json + "\n")?;
        Ok(())
    }
}

pub(crate) type PointFn = dyn Fn(&GridPoint, &ExperimentSpec, &Path) -> Result<BTreeMap<String, f64>> + Sync + Send;

/// Runs `f` at every grid point (in parallel under `exec`), each in its own directory.
/// Failures are recorded per point and do not stop the sweep.
pub(crate) fn run_points(spec: &ExperimentSpec, out: &Path, exec: Execution, f: &PointFn) -> Result<Vec<PointResult>> {
    std::fs::create_dir_all(out)?;
    let grid = spec.grid();
    Ok(exec.map(&grid, |g| {
        let dir: PathBuf = out.join(g.dir_name());
        let res = std::fs::create_dir_all(&dir).map_err(Error::from).and_then(|_| f(g, spec, &dir));
        let (values, error) = match res {
            Ok(v) => (v, None),
            Err(e) => (BTreeMap::new(), Some(e.to_string())),
        };
        PointResult { point: g.clone(), dir: g.dir_name(), values, error }
    }))
}

/// Validates `spec`, runs the sweep for its kind, writes the bundle under `out`.
pub fn run(spec: &ExperimentSpec, out: &Path, exec: Execution) -> Result<RunSummary> {
    spec.validate()?;
    let summary = kinds::run_kind(spec, out, exec)?;
    summary.write(out)?;
    Ok(summary)
}

pub(crate) fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    Ok(std::io::BufWriter::new(std::fs::File::create(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_json_and_key_value() {
        let a = ExperimentSpec::parse(r#"{"kind": "ekman_rate", "epsilon": [1e-3], "tolerances": {"ekman_rate": 0.2}}"#).unwrap();
        let b = ExperimentSpec::parse("kind = ekman_rate\n# comment\nepsilon = 1e-3\ntol.ekman_rate = 0.2\n").unwrap();
        for s in [&a, &b] {
            assert_eq!(s.kind, Kind::EkmanRate);
            assert_eq!(s.epsilon, vec![1e-3]);
            assert_eq!(s.tolerances.ekman_rate, 0.2);
            assert_eq!(s.tolerances.divergence, 1e-10);
        }
        let c = ExperimentSpec::parse("epsilon = 1e-2, 1e-3\nmode = [1, 1, 2]").unwrap();
        assert_eq!(c.epsilon, vec![1e-2, 1e-3]);
        assert_eq!(c.mode, [1, 1, 2]);
        assert!(ExperimentSpec::parse("bogus = 1").is_err());
        assert!(ExperimentSpec::parse("epsilon").is_err());
    }

    #[test]
    fn validation() {
        let mut s = ExperimentSpec::default();
        assert!(s.validate().is_ok());
        s.epsilon.clear();
        assert!(matches!(s.validate(), Err(Error::Spec(_))));
        let s = ExperimentSpec { mode: [9, 0, 1], ..Default::default() };
        assert!(s.validate().is_err());
        let s = ExperimentSpec { mode: [0, 0, 1], kind: Kind::WindConvergence, ..Default::default() };
        assert!(s.validate().is_err());
        let s = ExperimentSpec { dt_ratio: Some(0.5), ..Default::default() };
        assert!(s.validate().is_err());
    }

    #[test]
    fn grid_order_and_series() {
        let s = ExperimentSpec { epsilon: vec![1e-2, 1e-3], nu: vec![1e-2, 1e-4], beta: vec![1.0, 2.0], ..Default::default() };
        let g = s.grid();
        assert_eq!(g.len(), 8);
        assert_eq!(g.iter().map(|p| p.series).collect::<Vec<_>>(), vec![0, 0, 1, 1, 2, 2, 3, 3]);
        assert_eq!((g[3].epsilon, g[3].nu, g[3].beta), (1e-3, 1e-4, 1.0));
        let s = ExperimentSpec::default();
        assert!(s.grid().iter().all(|p| p.nu == p.epsilon && p.series == 0));
    }
}

//! Run configuration: a TOML file with `[problem]`, `[solver]`,
//! `[quadrature]`, `[dictionary]` and `[output]` sections, layered over
//! dimension-dependent defaults and optional named presets.
//!
//! Every key is optional. Resolution order, later wins: built-in defaults,
//! the preset (if any), the keys present in the file. Command-line flags are
//! applied by the caller after resolution.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::dictionary::{GridConfig, BIAS_MARGIN};
use crate::error::{Error, Result};
use crate::problem::BoxDomain;
use crate::quadrature::QuadratureConfig;
use crate::uzawa::{delta_select, MAX_STEPS};

/// Penalty parameter: `"auto"` picks `delta_select` at the largest `n` of the
/// sweep and keeps it fixed for every `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DeltaMode {
    Fixed(f64),
    Auto(AutoTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoTag {
    Auto,
}

impl DeltaMode {
    pub const AUTO: DeltaMode = DeltaMode::Auto(AutoTag::Auto);
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    preset: Option<String>,
    name: Option<String>,
    #[serde(default)]
    problem: RawProblem,
    #[serde(default)]
    solver: RawSolver,
    #[serde(default)]
    quadrature: RawQuadrature,
    #[serde(default)]
    dictionary: RawDictionary,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    dim: Option<usize>,
    a0: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    k: Option<u32>,
    n_list: Option<Vec<usize>>,
    steps: Option<usize>,
    delta: Option<DeltaMode>,
    normalize: Option<bool>,
    boundary_mass: Option<bool>,
    warm_start: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawQuadrature {
    cells_per_axis: Option<usize>,
    gauss_per_axis: Option<usize>,
    boundary_panels: Option<usize>,
    boundary_gauss: Option<usize>,
    error_refine: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDictionary {
    n_omega: Option<usize>,
    n_b: Option<usize>,
    bias_bound: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
    trace: Option<bool>,
    timing: Option<bool>,
}

macro_rules! overlay {
    ($base:expr, $top:expr; $($field:ident),+) => {
        $( if $top.$field.is_some() { $base.$field = $top.$field.clone(); } )+
    };
}

impl RawConfig {
    /// Fields set in `top` replace those in `self`.
    fn overlay(mut self, top: &RawConfig) -> RawConfig {
        overlay!(self, top; preset, name);
        overlay!(self.problem, top.problem; dim, a0);
        overlay!(self.solver, top.solver; k, n_list, steps, delta, normalize, boundary_mass, warm_start);
        overlay!(self.quadrature, top.quadrature; cells_per_axis, gauss_per_axis, boundary_panels, boundary_gauss, error_refine);
        overlay!(self.dictionary, top.dictionary; n_omega, n_b, bias_bound);
        overlay!(self.output, top.output; dir, trace, timing);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub dim: usize,
    pub a0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub k: u32,
    pub n_list: Vec<usize>,
    pub steps: usize,
    pub delta: DeltaMode,
    pub normalize: bool,
    pub boundary_mass: bool,
    pub warm_start: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSection {
    pub cells_per_axis: usize,
    pub gauss_per_axis: usize,
    pub boundary_panels: usize,
    pub boundary_gauss: usize,
    /// Measure errors on a rule with twice as many cells as the assembly rule.
    pub error_refine: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DictionarySection {
    pub n_omega: usize,
    pub n_b: usize,
    pub bias_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Also write per-iteration greedy traces.
    pub trace: bool,
    /// Record wall-clock times in the CSV. Off by default so reruns are
    /// byte-identical.
    pub timing: bool,
}

/// Fully resolved run parameters. Serializing it gives a config file that
/// reproduces the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    pub problem: ProblemSection,
    pub solver: SolverSection,
    pub quadrature: QuadratureSection,
    pub dictionary: DictionarySection,
    pub output: OutputSection,
}

impl RunConfig {
    pub fn delta(&self) -> f64 {
        match self.solver.delta {
            DeltaMode::Fixed(v) => v,
            DeltaMode::Auto(_) => {
                let n_max = self.solver.n_list.iter().copied().max().unwrap_or(1);
                delta_select(n_max, self.solver.k, self.problem.dim)
            }
        }
    }

    pub fn quadrature_config(&self) -> QuadratureConfig {
        QuadratureConfig {
            cells_per_axis: self.quadrature.cells_per_axis,
            gauss_per_axis: self.quadrature.gauss_per_axis,
            boundary_panels: self.quadrature.boundary_panels,
            boundary_gauss: self.quadrature.boundary_gauss,
        }
    }

    pub fn grid_config(&self) -> GridConfig {
        GridConfig {
            n_omega: self.dictionary.n_omega,
            n_b: self.dictionary.n_b,
            bias_bound: Some(self.dictionary.bias_bound),
        }
    }

    /// The same configuration with `delta` pinned to its resolved value.
    pub fn pinned(&self) -> RunConfig {
        let mut c = self.clone();
        c.solver.delta = DeltaMode::Fixed(self.delta());
        c
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configuration serializes")
    }
}

pub const PRESETS: &[&str] = &[
    "paper-1d-k1",
    "paper-1d-k1-a1",
    "paper-1d-k2",
    "paper-1d-k2-a1",
    "paper-2d-k1",
    "paper-2d-k1-a1",
    "paper-2d-k2",
    "paper-2d-k2-a1",
    "paper-3d-k1",
    "paper-3d-k1-a1",
    "paper-3d-k2",
    "paper-3d-k2-a1",
    "paper-2d-k1-reduced",
    "paper-3d-k2-reduced",
];

/// Parameters pinned by a named preset.
fn preset(name: &str) -> Result<RawConfig> {
    if !PRESETS.contains(&name) {
        return Err(Error::Config(format!(
            "unknown preset `{name}`; available: {}",
            PRESETS.join(", ")
        )));
    }
    let mut parts = name.split('-').skip(1);
    let dim: usize = parts.next().and_then(|s| s.trim_end_matches('d').parse().ok()).unwrap_or(1);
    let k: u32 = parts.next().and_then(|s| s.trim_start_matches('k').parse().ok()).unwrap_or(1);
    let rest: Vec<&str> = parts.collect();
    let a0 = if rest.contains(&"a1") { 1.0 } else { 0.0 };
    let reduced = rest.contains(&"reduced");

    let mut raw = RawConfig {
        name: Some(name.to_string()),
        ..Default::default()
    };
    raw.problem = RawProblem {
        dim: Some(dim),
        a0: Some(a0),
    };
    let n_max = if reduced { 128 } else { 256 };
    raw.solver = RawSolver {
        k: Some(k),
        n_list: Some(dyadic(16, n_max)),
        steps: Some(2),
        delta: Some(DeltaMode::AUTO),
        normalize: Some(false),
        boundary_mass: Some(false),
        warm_start: Some(false),
    };
    if dim == 1 {
        // Biases on [-2, 2] in steps of 1e-3: every kink sits on a cell edge
        // of the 4000-cell rule, and |b| > 1 adds globally smooth atoms.
        raw.dictionary = RawDictionary {
            n_omega: Some(2),
            n_b: Some(4001),
            bias_bound: Some(2.0),
        };
    }
    Ok(raw)
}

fn dyadic(lo: usize, hi: usize) -> Vec<usize> {
    std::iter::successors(Some(lo), |n| Some(n * 2)).take_while(|n| *n <= hi).collect()
}

fn field_error(text: &str, section: &str, key: &str, msg: impl std::fmt::Display) -> Error {
    match locate(text, section, key) {
        Some(line) => Error::Config(format!("line {line}, field `{section}.{key}`: {msg}")),
        None => Error::Config(format!("field `{section}.{key}`: {msg}")),
    }
}

/// 1-based line of `key` inside `[section]`, if written in the file.
fn locate(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if let Some(h) = t.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            current = h.trim().to_string();
            continue;
        }
        if current == section {
            if let Some((k, _)) = t.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

/// Parses and validates a config file. `preset` (from the command line)
/// takes precedence over a `preset` key in the file.
pub fn validate_config(text: &str, preset_override: Option<&str>) -> Result<RunConfig> {
    let file: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let preset_name = preset_override.map(str::to_string).or_else(|| file.preset.clone());
    let base = match &preset_name {
        Some(name) => preset(name)?,
        None => RawConfig::default(),
    };
    let raw = base.overlay(&file);
    resolve(&raw, text)
}

/// Reads a config file, or the `[config]` table of a run manifest.
pub fn load_config(text: &str, preset_override: Option<&str>) -> Result<RunConfig> {
    if let Ok(toml::Value::Table(t)) = text.parse::<toml::Value>() {
        if let (Some(toml::Value::Table(cfg)), Some(_)) = (t.get("config"), t.get("manifest_schema")) {
            let inner = toml::to_string(cfg).map_err(|e| Error::Config(e.to_string()))?;
            return validate_config(&inner, preset_override);
        }
    }
    validate_config(text, preset_override)
}

fn resolve(raw: &RawConfig, text: &str) -> Result<RunConfig> {
    let dim = raw.problem.dim.unwrap_or(1);
    if !(1..=3).contains(&dim) {
        return Err(field_error(text, "problem", "dim", format!("must be 1, 2 or 3, got {dim}")));
    }
    let a0 = raw.problem.a0.unwrap_or(0.0);
    if a0 != 0.0 && a0 != 1.0 {
        return Err(field_error(text, "problem", "a0", format!("built-in problems use a0 = 0 or 1, got {a0}")));
    }

    let k = raw.solver.k.unwrap_or(1);
    if !(1..=4).contains(&k) {
        return Err(field_error(text, "solver", "k", format!("must be in 1..=4, got {k}")));
    }
    let n_list = raw.solver.n_list.clone().unwrap_or_else(|| dyadic(16, 256));
    if n_list.is_empty() {
        return Err(field_error(text, "solver", "n_list", "must not be empty"));
    }
    if n_list[0] == 0 {
        return Err(field_error(text, "solver", "n_list", "entries must be positive"));
    }
    if let Some(w) = n_list.windows(2).find(|w| w[1] != 2 * w[0]) {
        return Err(field_error(
            text,
            "solver",
            "n_list",
            format!("each entry must double the previous one ({} then {})", w[0], w[1]),
        ));
    }
    let steps = raw.solver.steps.unwrap_or(2);
    if steps == 0 || steps > MAX_STEPS {
        return Err(field_error(text, "solver", "steps", format!("must be in 1..={MAX_STEPS}, got {steps}")));
    }
    let delta = raw.solver.delta.unwrap_or(DeltaMode::AUTO);
    if let DeltaMode::Fixed(v) = delta {
        if !(v > 0.0 && v.is_finite()) {
            return Err(field_error(text, "solver", "delta", format!("must be positive or \"auto\", got {v}")));
        }
    }

    let qd = QuadratureConfig::default_for(dim);
    let quadrature = QuadratureSection {
        cells_per_axis: raw.quadrature.cells_per_axis.unwrap_or(qd.cells_per_axis),
        gauss_per_axis: raw.quadrature.gauss_per_axis.unwrap_or(qd.gauss_per_axis),
        boundary_panels: raw.quadrature.boundary_panels.unwrap_or(qd.boundary_panels),
        boundary_gauss: raw.quadrature.boundary_gauss.unwrap_or(qd.boundary_gauss),
        error_refine: raw.quadrature.error_refine.unwrap_or(false),
    };
    if quadrature.cells_per_axis == 0 {
        return Err(field_error(text, "quadrature", "cells_per_axis", "must be positive"));
    }
    if !(1..=5).contains(&quadrature.gauss_per_axis) {
        return Err(field_error(text, "quadrature", "gauss_per_axis", "must be in 1..=5"));
    }
    if quadrature.boundary_panels == 0 {
        return Err(field_error(text, "quadrature", "boundary_panels", "must be positive"));
    }
    let bg = quadrature.boundary_gauss;
    let per_axis = (bg as f64).sqrt().round() as usize;
    if dim == 3 && per_axis * per_axis != bg {
        return Err(field_error(text, "quadrature", "boundary_gauss", format!("must be a perfect square in 3D, got {bg}")));
    }
    if !(1..=25).contains(&bg) || (dim == 2 && bg > 5) {
        return Err(field_error(text, "quadrature", "boundary_gauss", format!("unsupported point count {bg}")));
    }

    let gd = GridConfig::default_for(dim);
    let domain = BoxDomain::unit(dim);
    let default_bound = if dim == 1 { 1.0 } else { domain.max_norm() } + BIAS_MARGIN;
    let dictionary = DictionarySection {
        n_omega: raw.dictionary.n_omega.unwrap_or(gd.n_omega),
        n_b: raw.dictionary.n_b.unwrap_or(gd.n_b),
        bias_bound: raw.dictionary.bias_bound.unwrap_or(default_bound),
    };
    if dim == 1 && dictionary.n_omega != 2 {
        return Err(field_error(text, "dictionary", "n_omega", "must be 2 in 1D (the directions ±1)"));
    }
    if dictionary.n_omega == 0 {
        return Err(field_error(text, "dictionary", "n_omega", "must be positive"));
    }
    if dictionary.n_b < 2 {
        return Err(field_error(text, "dictionary", "n_b", "must be at least 2"));
    }
    if !(dictionary.bias_bound > 0.0 && dictionary.bias_bound.is_finite()) {
        return Err(field_error(text, "dictionary", "bias_bound", "must be positive"));
    }

    let output = OutputSection {
        dir: raw.output.dir.clone().unwrap_or_else(|| PathBuf::from("out")),
        trace: raw.output.trace.unwrap_or(false),
        timing: raw.output.timing.unwrap_or(false),
    };
    let name = raw.name.clone().unwrap_or_else(|| format!("{dim}d-k{k}-a{a0}"));
    Ok(RunConfig {
        name,
        problem: ProblemSection { dim, a0 },
        solver: SolverSection {
            k,
            n_list,
            steps,
            delta,
            normalize: raw.solver.normalize.unwrap_or(true),
            boundary_mass: raw.solver.boundary_mass.unwrap_or(true),
            warm_start: raw.solver.warm_start.unwrap_or(false),
        },
        quadrature,
        dictionary,
        output,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gives_defaults() {
        let c = validate_config("", None).unwrap();
        assert_eq!(c.problem, ProblemSection { dim: 1, a0: 0.0 });
        assert_eq!(c.solver.k, 1);
        assert_eq!(c.solver.n_list, vec![16, 32, 64, 128, 256]);
        assert_eq!(c.solver.steps, 2);
        assert!(c.solver.normalize && c.solver.boundary_mass);
        assert_eq!(c.quadrature.cells_per_axis, 4000);
        assert_eq!(c.dictionary.n_b, 2101);
        assert!((c.dictionary.bias_bound - 1.05).abs() < 1e-15);
    }

    #[test]
    fn auto_delta_uses_largest_n() {
        let c = validate_config("", None).unwrap();
        assert_eq!(c.delta(), 256f64.powf(-2.0 / 3.0));
        let c = validate_config("[solver]\nn_list = [16, 32]\nk = 2\n", None).unwrap();
        assert_eq!(c.delta(), delta_select(32, 2, 1));
        let c = validate_config("[solver]\ndelta = 0.125\n", None).unwrap();
        assert_eq!(c.delta(), 0.125);
        let c = validate_config("[solver]\ndelta = \"auto\"\n", None).unwrap();
        assert_eq!(c.solver.delta, DeltaMode::AUTO);
    }

    #[test]
    fn rejects_non_dyadic_sweep_with_line() {
        let text = "name = \"x\"\n[solver]\nk = 1\nn_list = [16, 48]\n";
        let err = validate_config(text, None).unwrap_err().to_string();
        assert!(err.contains("line 4"), "{err}");
        assert!(err.contains("solver.n_list"), "{err}");
        assert!(validate_config("[solver]\nn_list = [32, 16]\n", None).is_err());
        assert!(validate_config("[solver]\nn_list = []\n", None).is_err());
        assert!(validate_config("[solver]\nn_list = [16]\n", None).is_ok());
    }

    #[test]
    fn rejects_unknown_keys() {
        let err = validate_config("[solver]\nstpes = 3\n", None).unwrap_err().to_string();
        assert!(err.contains("stpes"), "{err}");
        assert!(err.contains("line 2"), "{err}");
        assert!(validate_config("[solvr]\n", None).is_err());
    }

    #[test]
    fn rejects_bad_values() {
        for text in [
            "[problem]\ndim = 4\n",
            "[problem]\na0 = 2.5\n",
            "[solver]\nsteps = 0\n",
            "[solver]\nsteps = 17\n",
            "[solver]\ndelta = -1.0\n",
            "[solver]\ndelta = \"fixed\"\n",
            "[quadrature]\ngauss_per_axis = 6\n",
            "[problem]\ndim = 3\n[quadrature]\nboundary_gauss = 3\n",
            "[dictionary]\nn_omega = 3\n",
        ] {
            assert!(validate_config(text, None).is_err(), "{text}");
        }
    }

    #[test]
    fn presets_pin_parameters_and_file_overrides() {
        for name in PRESETS {
            let c = validate_config("", Some(name)).unwrap();
            assert_eq!(c.name, *name);
        }
        let c = validate_config("", Some("paper-1d-k2-a1")).unwrap();
        assert_eq!((c.problem.dim, c.problem.a0, c.solver.k), (1, 1.0, 2));
        assert_eq!(c.delta(), 256f64.powf(-4.0 / 3.0));
        assert_eq!(c.dictionary.n_b, 4001);
        let c = validate_config("preset = \"paper-3d-k2-reduced\"\n[solver]\nsteps = 3\n", None).unwrap();
        assert_eq!(c.solver.n_list, vec![16, 32, 64, 128]);
        assert_eq!(c.solver.steps, 3);
        let c = validate_config("preset = \"paper-2d-k1\"\n", Some("paper-1d-k1")).unwrap();
        assert_eq!(c.problem.dim, 1);
        assert!(validate_config("", Some("paper-4d-k1")).is_err());
    }

    #[test]
    fn resolved_config_round_trips() {
        let c = validate_config("", Some("paper-2d-k1-a1")).unwrap().pinned();
        let again = validate_config(&c.to_toml(), None).unwrap();
        assert_eq!(c, again);
        assert_eq!(again.delta(), 256f64.powf(-0.5));
    }
}

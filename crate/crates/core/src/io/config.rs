use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::optimizers::{InitMode, Method, SelectionRule, StepSizeSchedule, DEFAULT_GRAD_TOL, DEFAULT_MAX_PASSES};
use crate::oracle::FiniteSumProblem;

use super::LabelMap;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DatasetSpec {
    /// `synthetic:<d>:<m>[:<seed>]`; without a seed the `seed` key is used.
    Synthetic { d: usize, m: usize, seed: Option<u64> },
    /// `libsvm:<path>`.
    Libsvm(PathBuf),
}

impl FromStr for DatasetSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: &str| Error::config("dataset", format!("{msg} in `{s}`"));
        if let Some(rest) = s.strip_prefix("synthetic:") {
            let parts: Vec<&str> = rest.split(':').collect();
            if !(2..=3).contains(&parts.len()) {
                return Err(bad("expected synthetic:<d>:<m>[:<seed>]"));
            }
            let d = parts[0].parse().map_err(|_| bad("bad dimension"))?;
            let m = parts[1].parse().map_err(|_| bad("bad sample count"))?;
            let seed = match parts.get(2) {
                Some(v) => Some(v.parse().map_err(|_| bad("bad seed"))?),
                None => None,
            };
            Ok(DatasetSpec::Synthetic { d, m, seed })
        } else if let Some(path) = s.strip_prefix("libsvm:") {
            if path.is_empty() {
                return Err(bad("empty path"));
            }
            Ok(DatasetSpec::Libsvm(PathBuf::from(path)))
        } else {
            Err(bad("expected synthetic:... or libsvm:..."))
        }
    }
}

/// Step-size rule as written in a configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSpec {
    /// `const:<γ>`.
    Const(f64),
    /// `const-frac:<c>`, `γ = c/L`.
    ConstFrac(f64),
    /// `iag-frac:<c>`, `γ = c/(mL)`.
    IagFrac(f64),
    /// `γ_k = 1/(⌈k/m⌉L)`.
    Vanishing,
    /// Starts at `1/L` and ramps towards `2/(μ+L)`, checked once per pass.
    Adaptive,
}

impl FromStr for StepSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let number = |v: &str| -> Result<f64> {
            match v.parse::<f64>() {
                Ok(x) if x > 0.0 && x.is_finite() => Ok(x),
                _ => Err(Error::config("step", format!("`{v}` is not a positive number"))),
            }
        };
        if let Some(v) = s.strip_prefix("const-frac:") {
            Ok(StepSpec::ConstFrac(number(v)?))
        } else if let Some(v) = s.strip_prefix("iag-frac:") {
            Ok(StepSpec::IagFrac(number(v)?))
        } else if let Some(v) = s.strip_prefix("const:") {
            Ok(StepSpec::Const(number(v)?))
        } else if s == "vanishing" {
            Ok(StepSpec::Vanishing)
        } else if s == "adaptive" {
            Ok(StepSpec::Adaptive)
        } else {
            Err(Error::config("step", format!("unknown step rule `{s}`")))
        }
    }
}

impl StepSpec {
    pub fn schedule(&self, problem: &FiniteSumProblem, selection: SelectionRule) -> StepSizeSchedule {
        let l = problem.lipschitz();
        let m = problem.num_components();
        match *self {
            StepSpec::Const(g) => StepSizeSchedule::Constant(g),
            StepSpec::ConstFrac(c) => StepSizeSchedule::Constant(c / l),
            StepSpec::IagFrac(c) => StepSizeSchedule::Constant(c / (m as f64 * l)),
            StepSpec::Vanishing => StepSizeSchedule::Vanishing { lipschitz: l, m },
            StepSpec::Adaptive => StepSizeSchedule::AdaptiveRamp {
                start: 1.0 / l,
                max: 2.0 / (problem.mu() + l),
                ramp: 2.0,
                check_interval: selection.iterations_per_pass(m),
            },
        }
    }
}

/// The step rule each method uses when none is configured.
pub fn default_step(method: Method) -> StepSpec {
    match method {
        Method::Ciag | Method::Fg => StepSpec::ConstFrac(1.0),
        Method::Iag => StepSpec::IagFrac(50.0),
        Method::Ig => StepSpec::Vanishing,
        Method::NewtonAgg => StepSpec::Const(1.0),
    }
}

/// Flat `key = value` run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub method: Method,
    /// Methods for `compare`.
    pub methods: Vec<Method>,
    pub dataset: Option<DatasetSpec>,
    pub rho: Option<f64>,
    pub step: Option<StepSpec>,
    /// Per-method overrides (`step.<method> = ...`).
    pub method_steps: BTreeMap<Method, StepSpec>,
    pub batch: usize,
    pub grad_tol: f64,
    pub gap_tol: Option<f64>,
    pub max_passes: f64,
    pub trace_every: Option<usize>,
    pub init: InitMode,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub append_bias: bool,
    pub label_map: LabelMap,
    /// Record wall time in traces. Disable for byte-identical output.
    pub timing: bool,
    /// Compute a reference solution for objective gaps.
    pub reference: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            method: Method::Ciag,
            methods: Vec::new(),
            dataset: None,
            rho: None,
            step: None,
            method_steps: BTreeMap::new(),
            batch: 1,
            grad_tol: DEFAULT_GRAD_TOL,
            gap_tol: None,
            max_passes: DEFAULT_MAX_PASSES as f64,
            trace_every: None,
            init: InitMode::Warm,
            seed: 0,
            out: None,
            append_bias: false,
            label_map: LabelMap::Auto,
            timing: true,
            reference: true,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(key, format!("cannot parse `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::config(key, format!("`{value}` is not a boolean"))),
    }
}

fn positive(key: &str, value: &str) -> Result<f64> {
    let v: f64 = parse_value(key, value)?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::config(key, format!("must be positive, got `{value}`")))
    }
}

fn method(key: &str, value: &str) -> Result<Method> {
    value.parse().map_err(|_| Error::config(key, format!("unknown method `{value}`")))
}

impl RunConfig {
    /// Sets one key. Later calls override earlier ones, so applying file
    /// entries first and flags second lets flags win.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().to_ascii_lowercase().replace('-', "_");
        let value = value.trim();
        if let Some(name) = key.strip_prefix("step.") {
            let m = method(&key, name)?;
            let spec = value.parse::<StepSpec>().map_err(|e| Error::config(&key, e.to_string()))?;
            self.method_steps.insert(m, spec);
            return Ok(());
        }
        match key.as_str() {
            "method" => self.method = method(&key, value)?,
            "methods" => {
                self.methods = value
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| method(&key, s))
                    .collect::<Result<_>>()?;
                if self.methods.is_empty() {
                    return Err(Error::config(&key, "empty method list"));
                }
            }
            "dataset" => self.dataset = Some(value.parse()?),
            "rho" => self.rho = Some(positive(&key, value)?),
            "step" => self.step = Some(value.parse()?),
            "batch" => {
                self.batch = parse_value(&key, value)?;
                if self.batch == 0 {
                    return Err(Error::config(&key, "must be at least 1"));
                }
            }
            "grad_tol" => self.grad_tol = positive(&key, value)?,
            "gap_tol" => self.gap_tol = Some(positive(&key, value)?),
            "max_passes" => self.max_passes = positive(&key, value)?,
            "trace_every" => {
                let v: usize = parse_value(&key, value)?;
                if v == 0 {
                    return Err(Error::config(&key, "must be at least 1"));
                }
                self.trace_every = Some(v);
            }
            "init" => {
                self.init = match value {
                    "warm" => InitMode::Warm,
                    "cold" => InitMode::Cold,
                    _ => return Err(Error::config(&key, format!("expected warm or cold, got `{value}`"))),
                }
            }
            "seed" => self.seed = parse_value(&key, value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            "append_bias" => self.append_bias = parse_bool(&key, value)?,
            "label_map" => self.label_map = value.parse().map_err(|_| Error::config(&key, format!("unknown label map `{value}`")))?,
            "timing" => self.timing = parse_bool(&key, value)?,
            "reference" => self.reference = parse_bool(&key, value)?,
            _ => return Err(Error::config(&key, "unknown key")),
        }
        Ok(())
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        parse_config_str(&text)
    }

    /// Step rule for `method`: per-method override, then `step`, then the
    /// method default.
    pub fn step_for(&self, method: Method) -> StepSpec {
        self.method_steps
            .get(&method)
            .copied()
            .or(self.step)
            .unwrap_or_else(|| default_step(method))
    }

    pub fn selection(&self) -> SelectionRule {
        if self.batch <= 1 {
            SelectionRule::Cyclic
        } else {
            SelectionRule::CyclicMinibatch(self.batch)
        }
    }

    /// Access budget for `m` components.
    pub fn max_accesses(&self, m: usize) -> usize {
        (self.max_passes * m as f64).ceil() as usize
    }

    /// Trace cadence in iterations: the configured value, or ten rows per
    /// pass. Full-gradient steps are traced at the equivalent access count.
    pub fn trace_every_for(&self, method: Method, m: usize) -> usize {
        let selection = self.selection();
        let per_pass = selection.iterations_per_pass(m);
        let incremental = self.trace_every.unwrap_or_else(|| (per_pass / 10).max(1));
        if method == Method::Fg {
            (incremental * selection.batch_size() / m).max(1)
        } else {
            incremental
        }
    }

    /// `θ¹ = 0`.
    pub fn initial_point(&self, d: usize) -> DVector<f64> {
        DVector::zeros(d)
    }
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::config(line, "expected `key = value`"))?;
        cfg.apply(key, value)?;
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::make_quadratic_problem;

    #[test]
    fn parses_all_spec_keys() {
        let text = "
            # comment
            method = iag
            dataset = synthetic:51:1000:7
            rho = 0.001
            step = iag-frac:50
            batch = 5
            grad_tol = 1e-8
            max_passes = 100
            trace_every = 20
            init = cold
            seed = 3
            out = results/x.csv
        ";
        let c = parse_config_str(text).unwrap();
        assert_eq!(c.method, Method::Iag);
        assert_eq!(c.dataset, Some(DatasetSpec::Synthetic { d: 51, m: 1000, seed: Some(7) }));
        assert_eq!(c.rho, Some(0.001));
        assert_eq!(c.step, Some(StepSpec::IagFrac(50.0)));
        assert_eq!(c.selection(), SelectionRule::CyclicMinibatch(5));
        assert_eq!(c.grad_tol, 1e-8);
        assert_eq!(c.max_accesses(1000), 100_000);
        assert_eq!(c.trace_every, Some(20));
        assert_eq!(c.init, InitMode::Cold);
        assert_eq!(c.seed, 3);
        assert_eq!(c.out, Some(PathBuf::from("results/x.csv")));
    }

    #[test]
    fn errors_name_the_key() {
        match parse_config_str("colour = red") {
            Err(Error::Config { key, .. }) => assert_eq!(key, "colour"),
            other => panic!("{other:?}"),
        }
        match parse_config_str("rho = abc") {
            Err(Error::Config { key, .. }) => assert_eq!(key, "rho"),
            other => panic!("{other:?}"),
        }
        match parse_config_str("step = sometimes") {
            Err(Error::Config { key, .. }) => assert_eq!(key, "step"),
            other => panic!("{other:?}"),
        }
        assert!(parse_config_str("dataset = csv:foo").is_err());
        assert!(parse_config_str("batch = 0").is_err());
    }

    #[test]
    fn later_values_win() {
        let mut c = parse_config_str("method = ig\ngrad_tol = 1e-6").unwrap();
        c.apply("grad-tol", "1e-9").unwrap();
        c.apply("method", "ciag").unwrap();
        assert_eq!(c.grad_tol, 1e-9);
        assert_eq!(c.method, Method::Ciag);
    }

    #[test]
    fn step_rules_resolve_against_the_problem() {
        let c: Vec<DVector<f64>> = (0..4).map(|i| DVector::from_element(2, i as f64)).collect();
        let p = make_quadratic_problem(&c, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        let l = p.lipschitz();
        let sel = SelectionRule::Cyclic;
        let g = |s: &str| match s.parse::<StepSpec>().unwrap().schedule(&p, sel) {
            StepSizeSchedule::Constant(g) => g,
            other => panic!("{other:?}"),
        };
        assert_eq!(g("const-frac:1"), 1.0 / l);
        assert_eq!(g("iag-frac:50"), 50.0 / (4.0 * l));
        assert_eq!(g("const-frac:0.001"), 0.001 / l);
        assert_eq!(g("const:0.25"), 0.25);
        assert!(matches!(
            StepSpec::Vanishing.schedule(&p, sel),
            StepSizeSchedule::Vanishing { m: 4, .. }
        ));
    }

    #[test]
    fn per_method_steps_take_precedence() {
        let c = parse_config_str("step = const-frac:2\nstep.iag = iag-frac:10").unwrap();
        assert_eq!(c.step_for(Method::Iag), StepSpec::IagFrac(10.0));
        assert_eq!(c.step_for(Method::Ciag), StepSpec::ConstFrac(2.0));
        let d = RunConfig::default();
        assert_eq!(d.step_for(Method::Ig), StepSpec::Vanishing);
    }

    #[test]
    fn dataset_forms() {
        assert_eq!(
            "synthetic:5:10".parse::<DatasetSpec>().unwrap(),
            DatasetSpec::Synthetic { d: 5, m: 10, seed: None }
        );
        assert_eq!(
            "libsvm:data/mushrooms".parse::<DatasetSpec>().unwrap(),
            DatasetSpec::Libsvm(PathBuf::from("data/mushrooms"))
        );
    }
}

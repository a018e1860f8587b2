//! Experiment files: flat `key = value` lines under `[section]` headers.
//!
//! ```text
//! [problem]
//! name = rigid-body
//! x0 = 0.8,0.6,0
//!
//! [driver]
//! lambda = 1
//! sigma = 0.5
//! seed = 20240601
//! scheme = gaussian
//!
//! [run]
//! mode = ms
//! horizon = 0.5
//! step_sizes = 2^-7 2^-8 2^-9
//!
//! [methods]
//! names = eps1 eps2 eps3
//!
//! [acceptance]
//! eps1.ms = 0.75 1.25
//! ```
//!
//! Every key is checked; anything unrecognized is an error naming the line.

use sisde::drivers::{DriverConfig, DriverScheme};
use sisde::harness::{
    ExperimentConfig, Reference, WeakEstimator, DEFAULT_ENUMERATION_CAP, DEFAULT_REFERENCE_TOLERANCE,
};
use sisde::methods::SolverSettings;
use sisde::problems::{Observable, Problem, ProblemKind};
use std::fmt::Write as _;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown key {key:?} in [{section}]")]
    UnknownKey {
        line: usize,
        section: String,
        key: String,
    },
    #[error("line {line}: key {key:?} given twice")]
    Duplicate { line: usize, key: String },
    #[error("key {key:?}: {message}")]
    Value { key: String, message: String },
    #[error("missing required key {0:?}")]
    Missing(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    MeanSquare,
    Weak,
}

impl Mode {
    pub fn parse(s: &str) -> Option<Mode> {
        match s {
            "ms" => Some(Mode::MeanSquare),
            "weak" => Some(Mode::Weak),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::MeanSquare => "ms",
            Mode::Weak => "weak",
        }
    }
}

/// Accepted slope interval for one (method, error family).
#[derive(Clone, Debug, PartialEq)]
pub struct SlopeBand {
    pub method: String,
    /// `ms` or an observable such as `x1^2`.
    pub family: String,
    pub low: f64,
    pub high: f64,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub experiment: ExperimentConfig,
    pub mode: Mode,
    pub out: Option<PathBuf>,
    pub bands: Vec<SlopeBand>,
    /// Bound on `max |dH|` and `max |dC|` for drift runs.
    pub max_drift: Option<f64>,
}

const SECTIONS: [&str; 5] = ["problem", "driver", "run", "methods", "acceptance"];

struct Entry {
    line: usize,
    key: String,
    value: String,
}

#[derive(Default)]
struct Sections {
    entries: Vec<(String, Entry)>,
}

impl Sections {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut out = Sections::default();
        let mut section: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(name) = content.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or_else(|| ConfigError::Syntax {
                    line,
                    message: format!("malformed section header {content:?}"),
                })?;
                let name = name.trim();
                if !SECTIONS.contains(&name) {
                    return Err(ConfigError::Syntax {
                        line,
                        message: format!("unknown section [{name}]"),
                    });
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                message: format!("expected `key = value`, found {content:?}"),
            })?;
            let section = section.clone().ok_or_else(|| ConfigError::Syntax {
                line,
                message: "key before any [section]".into(),
            })?;
            let key = key.trim().to_string();
            if out.entries.iter().any(|(s, e)| *s == section && e.key == key) {
                return Err(ConfigError::Duplicate { line, key });
            }
            out.entries.push((
                section,
                Entry {
                    line,
                    key,
                    value: value.trim().to_string(),
                },
            ));
        }
        Ok(out)
    }

    fn section<'a>(&'a self, name: &str) -> impl Iterator<Item = &'a Entry> + 'a {
        let name = name.to_string();
        self.entries.iter().filter(move |(s, _)| *s == name).map(|(_, e)| e)
    }

    fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.section(section).find(|e| e.key == key).map(|e| e.value.as_str())
    }

    fn reject_unknown(&self, section: &str, known: &[&str]) -> Result<(), ConfigError> {
        match self.section(section).find(|e| !known.contains(&e.key.as_str())) {
            Some(e) => Err(ConfigError::UnknownKey {
                line: e.line,
                section: section.into(),
                key: e.key.clone(),
            }),
            None => Ok(()),
        }
    }
}

fn value_error(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Value {
        key: key.into(),
        message: message.into(),
    }
}

fn number(key: &str, value: &str) -> Result<f64, ConfigError> {
    parse_real(value).ok_or_else(|| value_error(key, format!("not a number: {value:?}")))
}

fn integer<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value
        .parse()
        .map_err(|_| value_error(key, format!("not a non-negative integer: {value:?}")))
}

/// Decimal, `2^-k` or `p/q`.
pub fn parse_real(s: &str) -> Option<f64> {
    let s = s.trim();
    if let Some((base, exp)) = s.split_once('^') {
        return Some(base.trim().parse::<f64>().ok()?.powi(exp.trim().parse().ok()?));
    }
    if let Some((p, q)) = s.split_once('/') {
        return Some(p.trim().parse::<f64>().ok()? / q.trim().parse::<f64>().ok()?);
    }
    s.parse().ok()
}

fn bound(key: &str, s: &str) -> Result<f64, ConfigError> {
    match s {
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => number(key, s),
    }
}

const PROBLEM_KEYS: [&str; 6] = ["name", "inertia", "x0", "a", "b", "p"];
const DRIVER_KEYS: [&str; 5] = ["lambda", "sigma", "seed", "scheme", "points"];
const RUN_KEYS: [&str; 16] = [
    "mode",
    "horizon",
    "step_sizes",
    "samples",
    "n_fine",
    "reference",
    "reference_tolerance",
    "reference_method",
    "reference_h",
    "observables",
    "estimator",
    "enumeration_cap",
    "target_samples",
    "solver_tolerance",
    "solver_max_iterations",
    "out",
];

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        let s = Sections::parse(text)?;
        s.reject_unknown("problem", &PROBLEM_KEYS)?;
        s.reject_unknown("driver", &DRIVER_KEYS)?;
        s.reject_unknown("run", &RUN_KEYS)?;
        s.reject_unknown("methods", &["names"])?;

        let name = s.get("problem", "name").ok_or(ConfigError::Missing("problem.name".into()))?;
        let params: Vec<(String, String)> = s
            .section("problem")
            .filter(|e| e.key != "name")
            .map(|e| (e.key.clone(), e.value.clone()))
            .collect();
        let problem = Problem::from_registry(name, &params).map_err(|e| value_error("problem", e.to_string()))?;

        let lambda = match s.get("driver", "lambda") {
            Some(v) => integer::<u8>("driver.lambda", v)?,
            None => 1,
        };
        let sigma = match s.get("driver", "sigma") {
            Some(v) => number("driver.sigma", v)?,
            None => 0.5,
        };
        let seed = match s.get("driver", "seed") {
            Some(v) => integer::<u64>("driver.seed", v)?,
            None => 0,
        };
        let scheme = match (s.get("driver", "scheme").unwrap_or("gaussian"), s.get("driver", "points")) {
            ("gaussian", None) => DriverScheme::Gaussian,
            ("gaussian", Some(_)) => return Err(value_error("driver.points", "only for scheme = discrete")),
            ("discrete", Some(k)) => DriverScheme::Discrete(integer("driver.points", k)?),
            ("discrete", None) => return Err(ConfigError::Missing("driver.points".into())),
            (other, _) => return Err(value_error("driver.scheme", format!("{other:?} is not gaussian or discrete"))),
        };
        let driver =
            DriverConfig::new(lambda, sigma, seed, scheme).map_err(|e| value_error("driver", e.to_string()))?;

        let methods: Vec<String> = s
            .get("methods", "names")
            .ok_or(ConfigError::Missing("methods.names".into()))?
            .split_whitespace()
            .map(String::from)
            .collect();
        let horizon = number("run.horizon", s.get("run", "horizon").ok_or(ConfigError::Missing("run.horizon".into()))?)?;
        let step_sizes = s
            .get("run", "step_sizes")
            .ok_or(ConfigError::Missing("run.step_sizes".into()))?
            .split_whitespace()
            .map(|v| number("run.step_sizes", v))
            .collect::<Result<Vec<_>, _>>()?;

        let mut experiment = ExperimentConfig::new(problem, methods, horizon, step_sizes, driver);
        if let Some(v) = s.get("run", "samples") {
            experiment.samples = integer("run.samples", v)?;
        }
        if let Some(v) = s.get("run", "n_fine") {
            experiment.n_fine = Some(integer("run.n_fine", v)?);
        }
        experiment.reference = match s.get("run", "reference").unwrap_or("flow") {
            "flow" => {
                if s.get("run", "reference_method").is_some() || s.get("run", "reference_h").is_some() {
                    return Err(value_error("run.reference", "reference_method/reference_h need reference = fine"));
                }
                Reference::FlowOracle {
                    tolerance: match s.get("run", "reference_tolerance") {
                        Some(v) => number("run.reference_tolerance", v)?,
                        None => DEFAULT_REFERENCE_TOLERANCE,
                    },
                }
            }
            "fine" => {
                if s.get("run", "reference_tolerance").is_some() {
                    return Err(value_error("run.reference_tolerance", "only for reference = flow"));
                }
                Reference::FineScheme {
                    method: s.get("run", "reference_method").unwrap_or("eps3").to_string(),
                    h: number("run.reference_h", s.get("run", "reference_h").unwrap_or("2^-14"))?,
                }
            }
            other => return Err(value_error("run.reference", format!("{other:?} is not flow or fine"))),
        };
        if let Some(v) = s.get("run", "observables") {
            experiment.observables = v
                .split_whitespace()
                .map(|o| o.parse::<Observable>().map_err(|e| value_error("run.observables", e.to_string())))
                .collect::<Result<_, _>>()?;
        }
        experiment.weak_estimator = match s.get("run", "estimator").unwrap_or("monte-carlo") {
            "monte-carlo" => {
                if s.get("run", "enumeration_cap").is_some() {
                    return Err(value_error("run.enumeration_cap", "only for estimator = enumeration"));
                }
                WeakEstimator::MonteCarlo
            }
            "enumeration" => WeakEstimator::Enumeration {
                cap: match s.get("run", "enumeration_cap") {
                    Some(v) => integer("run.enumeration_cap", v)?,
                    None => DEFAULT_ENUMERATION_CAP,
                },
            },
            other => return Err(value_error("run.estimator", format!("{other:?} is not monte-carlo or enumeration"))),
        };
        if let Some(v) = s.get("run", "target_samples") {
            experiment.target_samples = integer("run.target_samples", v)?;
        }
        let mut solver = SolverSettings::default();
        if let Some(v) = s.get("run", "solver_tolerance") {
            solver.tolerance = number("run.solver_tolerance", v)?;
        }
        if let Some(v) = s.get("run", "solver_max_iterations") {
            solver.max_iterations = integer("run.solver_max_iterations", v)?;
        }
        experiment.solver = solver;

        let mode = match s.get("run", "mode") {
            Some(v) => Mode::parse(v).ok_or_else(|| value_error("run.mode", format!("{v:?} is not ms or weak")))?,
            None => Mode::MeanSquare,
        };
        let out = s.get("run", "out").map(PathBuf::from);

        let mut bands = Vec::new();
        let mut max_drift = None;
        for e in s.section("acceptance") {
            if e.key == "max_drift" {
                max_drift = Some(number("acceptance.max_drift", &e.value)?);
                continue;
            }
            let key = format!("acceptance.{}", e.key);
            let (method, family) = e.key.split_once('.').ok_or_else(|| ConfigError::UnknownKey {
                line: e.line,
                section: "acceptance".into(),
                key: e.key.clone(),
            })?;
            if !experiment.methods.iter().any(|m| m == method) {
                return Err(value_error(&key, format!("method {method:?} is not in [methods]")));
            }
            if family != "ms" {
                family.parse::<Observable>().map_err(|e| value_error(&key, e.to_string()))?;
            }
            let parts: Vec<&str> = e.value.split_whitespace().collect();
            let [low, high] = parts[..] else {
                return Err(value_error(&key, "expected `low high`"));
            };
            let (low, high) = (bound(&key, low)?, bound(&key, high)?);
            if !(low <= high) {
                return Err(value_error(&key, "empty interval"));
            }
            bands.push(SlopeBand {
                method: method.into(),
                family: family.into(),
                low,
                high,
            });
        }

        experiment.validate().map_err(|e| value_error("run", e.to_string()))?;
        Ok(RunConfig {
            experiment,
            mode,
            out,
            bands,
            max_drift,
        })
    }

    /// Every setting, defaults included, in the input syntax. Parsing the
    /// result gives back the same configuration.
    pub fn render(&self) -> String {
        let e = &self.experiment;
        let mut s = String::new();
        let list = |xs: &[f64]| xs.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(",");
        let _ = writeln!(s, "[problem]\nname = {}", e.problem.name());
        match e.problem.kind() {
            ProblemKind::RigidBody(rb) => {
                let _ = writeln!(s, "inertia = {}", list(&rb.params().inertia));
            }
            ProblemKind::Kubo(_) => {}
            ProblemKind::Fatigue(f) => {
                let _ = writeln!(s, "a = {:?}\nb = {:?}\np = {:?}", f.a, f.b, f.p);
            }
        }
        let _ = writeln!(s, "x0 = {}", list(e.problem.x0()));

        let d = &e.driver;
        let _ = writeln!(s, "\n[driver]\nlambda = {}\nsigma = {:?}\nseed = {}", d.lambda_u8(), d.sigma(), d.seed());
        match d.scheme() {
            DriverScheme::Gaussian => s.push_str("scheme = gaussian\n"),
            DriverScheme::Discrete(k) => {
                let _ = writeln!(s, "scheme = discrete\npoints = {k}");
            }
        }

        let _ = writeln!(s, "\n[run]\nmode = {}\nhorizon = {:?}", self.mode.as_str(), e.horizon);
        let steps: Vec<String> = e.step_sizes.iter().map(|h| format!("{h:?}")).collect();
        let _ = writeln!(s, "step_sizes = {}", steps.join(" "));
        let _ = writeln!(s, "samples = {}\nn_fine = {}", e.samples, e.fine_steps());
        match &e.reference {
            Reference::FlowOracle { tolerance } => {
                let _ = writeln!(s, "reference = flow\nreference_tolerance = {tolerance:?}");
            }
            Reference::FineScheme { method, h } => {
                let _ = writeln!(s, "reference = fine\nreference_method = {method}\nreference_h = {h:?}");
            }
        }
        let obs: Vec<String> = e.observables.iter().map(|o| o.to_string()).collect();
        let _ = writeln!(s, "observables = {}", obs.join(" "));
        match e.weak_estimator {
            WeakEstimator::MonteCarlo => s.push_str("estimator = monte-carlo\n"),
            WeakEstimator::Enumeration { cap } => {
                let _ = writeln!(s, "estimator = enumeration\nenumeration_cap = {cap}");
            }
        }
        let _ = writeln!(
            s,
            "target_samples = {}\nsolver_tolerance = {:?}\nsolver_max_iterations = {}",
            e.target_samples, e.solver.tolerance, e.solver.max_iterations
        );
        if let Some(out) = &self.out {
            let _ = writeln!(s, "out = {}", out.display());
        }

        let _ = writeln!(s, "\n[methods]\nnames = {}", e.methods.join(" "));

        if !self.bands.is_empty() || self.max_drift.is_some() {
            s.push_str("\n[acceptance]\n");
            for b in &self.bands {
                let _ = writeln!(s, "{}.{} = {} {}", b.method, b.family, render_bound(b.low), render_bound(b.high));
            }
            if let Some(m) = self.max_drift {
                let _ = writeln!(s, "max_drift = {m:?}");
            }
        }
        s
    }
}

fn render_bound(v: f64) -> String {
    match v {
        f64::INFINITY => "inf".into(),
        f64::NEG_INFINITY => "-inf".into(),
        _ => format!("{v:?}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use sisde::harness::DEFAULT_TARGET_SAMPLES;

    const MINIMAL: &str = "[problem]\nname = kubo\n[run]\nhorizon = 1\nstep_sizes = 2^-2 1/8\n[methods]\nnames = eps1\n";

    #[test]
    fn defaults() {
        let c = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.mode, Mode::MeanSquare);
        assert_eq!(c.experiment.step_sizes, vec![0.25, 0.125]);
        assert_eq!(c.experiment.samples, 200);
        assert_eq!(c.experiment.target_samples, DEFAULT_TARGET_SAMPLES);
        assert_eq!(c.experiment.driver.sigma(), 0.5);
    }

    #[test]
    fn unknown_keys_and_sections_are_errors() {
        let bad = MINIMAL.replace("horizon = 1", "horizon = 1\nhorizn = 2");
        assert!(matches!(RunConfig::parse(&bad), Err(ConfigError::UnknownKey { line: 5, .. })));
        let bad = format!("{MINIMAL}[plots]\nx = 1\n");
        assert!(matches!(RunConfig::parse(&bad), Err(ConfigError::Syntax { .. })));
        let bad = MINIMAL.replace("name = kubo", "name = kubo\nx1 = 3");
        assert!(RunConfig::parse(&bad).is_err());
        let bad = format!("{MINIMAL}[acceptance]\neps9.ms = 1 2\n");
        assert!(RunConfig::parse(&bad).is_err());
    }

    #[test]
    fn duplicates_are_errors() {
        let bad = MINIMAL.replace("horizon = 1", "horizon = 1\nhorizon = 1");
        assert!(matches!(RunConfig::parse(&bad), Err(ConfigError::Duplicate { .. })));
    }

    #[test]
    fn bands() {
        let text = format!("{MINIMAL}[acceptance]\neps1.ms = 0.75 1.25\neps1.x1^2 = 0.8 inf\nmax_drift = 1e-10\n");
        let c = RunConfig::parse(&text).unwrap();
        assert_eq!(c.bands.len(), 2);
        assert_eq!(c.bands[1].high, f64::INFINITY);
        assert_eq!(c.max_drift, Some(1e-10));
    }

    #[test]
    fn render_round_trips() {
        let text = format!(
            "{MINIMAL}[driver]\nscheme = discrete\npoints = 3\nseed = 9\n[acceptance]\neps1.x1^2 = 0.8 inf\n"
        )
        .replace("horizon = 1", "horizon = 1\nmode = weak\nestimator = enumeration\nobservables = x1^2 x1x2");
        let c = RunConfig::parse(&text).unwrap();
        let rendered = c.render();
        assert_eq!(RunConfig::parse(&rendered).unwrap().render(), rendered);
    }

    #[test]
    fn reals() {
        assert_eq!(parse_real("2^-7"), Some(0.0078125));
        assert_eq!(parse_real("1/16"), Some(0.0625));
        assert_eq!(parse_real("0.5"), Some(0.5));
        assert_eq!(parse_real("x"), None);
    }
}

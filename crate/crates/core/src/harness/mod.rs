//! Randomized verification suites, their configuration and reports.

pub mod cli;
pub mod io;
pub mod suites;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::stream_rng;
pub use suites::{check_case, generate, Case, GenContext, Outcome, Tolerances};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteName {
    PaperExample,
    Axioms,
    Gmean,
    Prop1,
    Prop2,
    Prop3,
    InterpIdentity,
    ReprIndependence,
    VnEquivalence,
    Monotonicity,
    Schwarz,
    ClassicalReduction,
    SupportDivergence,
}

impl SuiteName {
    pub const ALL: [SuiteName; 13] = [
        SuiteName::PaperExample,
        SuiteName::Axioms,
        SuiteName::Gmean,
        SuiteName::Prop1,
        SuiteName::Prop2,
        SuiteName::Prop3,
        SuiteName::InterpIdentity,
        SuiteName::ReprIndependence,
        SuiteName::VnEquivalence,
        SuiteName::Monotonicity,
        SuiteName::Schwarz,
        SuiteName::ClassicalReduction,
        SuiteName::SupportDivergence,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SuiteName::PaperExample => "paper_example",
            SuiteName::Axioms => "axioms",
            SuiteName::Gmean => "gmean",
            SuiteName::Prop1 => "prop1",
            SuiteName::Prop2 => "prop2",
            SuiteName::Prop3 => "prop3",
            SuiteName::InterpIdentity => "interp_identity",
            SuiteName::ReprIndependence => "repr_independence",
            SuiteName::VnEquivalence => "vn_equivalence",
            SuiteName::Monotonicity => "monotonicity",
            SuiteName::Schwarz => "schwarz",
            SuiteName::ClassicalReduction => "classical_reduction",
            SuiteName::SupportDivergence => "support_divergence",
        }
    }

    /// Stream index used to derive per-trial RNGs.
    pub fn id(self) -> u64 {
        SuiteName::ALL.iter().position(|&s| s == self).expect("listed") as u64 + 1
    }

    pub fn default_tolerance(self) -> Option<f64> {
        Some(match self {
            SuiteName::PaperExample => 1e-12,
            SuiteName::Axioms => 1e-10,
            SuiteName::Gmean
            | SuiteName::Prop1
            | SuiteName::Prop2
            | SuiteName::InterpIdentity
            | SuiteName::ReprIndependence => 1e-9,
            SuiteName::Prop3 => 1e-8,
            SuiteName::VnEquivalence => 1e-5,
            SuiteName::Monotonicity => 1e-7,
            SuiteName::Schwarz | SuiteName::ClassicalReduction => 1e-10,
            SuiteName::SupportDivergence => return None,
        })
    }

    /// Trial count used when the configuration does not fix one.
    pub fn default_trials(self) -> usize {
        match self {
            SuiteName::PaperExample => 1,
            SuiteName::Prop3 => 500,
            SuiteName::VnEquivalence | SuiteName::ReprIndependence => 100,
            SuiteName::Monotonicity => 1000,
            SuiteName::Schwarz => 31,
            SuiteName::SupportDivergence => 50,
            _ => 200,
        }
    }

    pub fn default_dims(self) -> Vec<usize> {
        match self {
            SuiteName::ReprIndependence => vec![2, 3],
            SuiteName::VnEquivalence => vec![2, 3, 4, 5, 6],
            _ => vec![2, 3, 4, 5],
        }
    }
}

impl fmt::Display for SuiteName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SuiteName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SuiteName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::Config(vec![format!("suites: unknown suite {s:?}")]))
    }
}

pub const DEFAULT_SEED: u64 = 7;
pub const SEED_ENV: &str = "QRELENT_SEED";

pub fn default_t_grid() -> Vec<f64> {
    (0..=10).map(|k| k as f64 / 10.0).collect()
}

/// Configuration of a verification run. `trials` and `dims` override the
/// per-suite defaults when present.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub seed: u64,
    pub trials: Option<usize>,
    pub dims: Option<Vec<usize>>,
    pub t_grid: Vec<f64>,
    pub tolerances: BTreeMap<String, f64>,
    pub suites: Vec<SuiteName>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            trials: None,
            dims: None,
            t_grid: default_t_grid(),
            tolerances: BTreeMap::new(),
            suites: SuiteName::ALL.to_vec(),
        }
    }
}

impl SuiteConfig {
    /// Collects every invalid field instead of stopping at the first.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.trials == Some(0) {
            problems.push("trials: must be at least 1".to_string());
        }
        if let Some(dims) = &self.dims {
            if dims.is_empty() {
                problems.push("dims: must not be empty".to_string());
            }
            for (i, &d) in dims.iter().enumerate() {
                if !(1..=8).contains(&d) {
                    problems.push(format!("dims[{i}]: {d} outside [1, 8]"));
                }
            }
        }
        if self.t_grid.is_empty() {
            problems.push("t_grid: must not be empty".to_string());
        }
        for (i, &t) in self.t_grid.iter().enumerate() {
            if !(0.0..=1.0).contains(&t) {
                problems.push(format!("t_grid[{i}]: {t} outside [0, 1]"));
            }
        }
        let known = Tolerances::known_keys();
        for (k, &v) in &self.tolerances {
            if !known.contains(k) {
                problems.push(format!("tolerances.{k}: unknown name"));
            } else if !(v.is_finite() && v > 0.0) {
                problems.push(format!("tolerances.{k}: {v} must be positive and finite"));
            }
        }
        if self.suites.is_empty() {
            problems.push("suites: must not be empty".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }

    pub fn tolerances(&self) -> Tolerances {
        let mut t = Tolerances::default();
        t.0.extend(self.tolerances.iter().map(|(k, v)| (k.clone(), *v)));
        t
    }

    pub fn trials_for(&self, suite: SuiteName) -> usize {
        if suite == SuiteName::PaperExample {
            return 1;
        }
        self.trials.unwrap_or_else(|| suite.default_trials())
    }

    pub fn dims_for(&self, suite: SuiteName) -> Vec<usize> {
        self.dims.clone().unwrap_or_else(|| suite.default_dims())
    }
}

/// A failing trial with everything needed to re-check it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub suite: SuiteName,
    pub trial: usize,
    #[serde(with = "io::extended_f64")]
    pub margin: f64,
    pub tolerances: Tolerances,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
    pub case: Case,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: SuiteName,
    pub passed: bool,
    pub trials: usize,
    /// Smallest `tolerance − excess` over the trials.
    #[serde(with = "io::extended_f64")]
    pub min_margin: f64,
    /// Largest measured excess over the trials.
    #[serde(with = "io::extended_f64")]
    pub max_violation: f64,
    pub counterexample: Option<Counterexample>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: SuiteConfig,
    pub seed_source: String,
    pub all_passed: bool,
    pub suites: Vec<SuiteReport>,
    /// Wall-clock seconds per suite; the only non-deterministic field.
    pub timings: BTreeMap<String, f64>,
}

impl RunReport {
    pub fn first_counterexample(&self) -> Option<&Counterexample> {
        self.suites.iter().find_map(|s| s.counterexample.as_ref())
    }
}

struct TrialResult {
    excess: f64,
    margin: f64,
    case: Option<Case>,
    error: Option<String>,
}

fn run_trial(suite: SuiteName, config: &SuiteConfig, tol: &Tolerances, trial: usize) -> TrialResult {
    let ctx = GenContext {
        trial,
        dims: config.dims_for(suite),
        t_grid: config.t_grid.clone(),
        seed: config.seed,
    };
    let mut rng = stream_rng(config.seed, suite.id(), trial as u64);
    let case = match generate(suite, &ctx, &mut rng) {
        Ok(c) => c,
        Err(e) => {
            return TrialResult {
                excess: f64::INFINITY,
                margin: f64::NEG_INFINITY,
                case: None,
                error: Some(e.to_string()),
            }
        }
    };
    match check_case(&case, tol) {
        Ok(o) => TrialResult {
            excess: o.excess,
            margin: o.margin(),
            case: Some(case),
            error: None,
        },
        Err(e) => TrialResult {
            excess: f64::INFINITY,
            margin: f64::NEG_INFINITY,
            case: Some(case),
            error: Some(e.to_string()),
        },
    }
}

/// Runs one suite; trials run in parallel and are aggregated in trial order.
pub fn run_single_suite(suite: SuiteName, config: &SuiteConfig) -> Result<SuiteReport> {
    config.validate()?;
    let tol = config.tolerances();
    let trials = config.trials_for(suite);
    let results: Vec<TrialResult> = (0..trials)
        .into_par_iter()
        .map(|trial| run_trial(suite, config, &tol, trial))
        .collect();
    let mut min_margin = f64::INFINITY;
    let mut max_violation = f64::NEG_INFINITY;
    let mut counterexample = None;
    for (trial, r) in results.into_iter().enumerate() {
        min_margin = min_margin.min(r.margin);
        max_violation = max_violation.max(r.excess);
        if r.margin < 0.0 && counterexample.is_none() {
            match r.case {
                Some(case) => {
                    counterexample = Some(Counterexample {
                        suite,
                        trial,
                        margin: r.margin,
                        tolerances: tol.clone(),
                        error: r.error,
                        case,
                    })
                }
                None => return Err(Error::InvalidParameter(r.error.unwrap_or_default())),
            }
        }
    }
    Ok(SuiteReport {
        suite,
        passed: counterexample.is_none(),
        trials,
        min_margin,
        max_violation,
        counterexample,
    })
}

pub fn run_suite(config: &SuiteConfig, seed_source: &str) -> Result<RunReport> {
    config.validate()?;
    let mut suites = Vec::new();
    let mut timings = BTreeMap::new();
    for &suite in &config.suites {
        let start = Instant::now();
        suites.push(run_single_suite(suite, config)?);
        timings.insert(suite.as_str().to_string(), start.elapsed().as_secs_f64());
    }
    Ok(RunReport {
        config: config.clone(),
        seed_source: seed_source.to_string(),
        all_passed: suites.iter().all(|s| s.passed),
        suites,
        timings,
    })
}

/// Re-checks a serialized counterexample under its recorded tolerances.
pub fn replay(cx: &Counterexample) -> Result<Outcome> {
    check_case(&cx.case, &cx.tolerances)
}

/// Seed precedence: explicit value, then `QRELENT_SEED`, then the default.
pub fn resolve_seed(explicit: Option<(u64, &str)>) -> Result<(u64, String)> {
    if let Some((seed, source)) = explicit {
        return Ok((seed, source.to_string()));
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse::<u64>()
            .map(|s| (s, format!("env:{SEED_ENV}")))
            .map_err(|_| Error::Config(vec![format!("{SEED_ENV}: {v:?} is not an unsigned integer")])),
        Err(_) => Ok((DEFAULT_SEED, "default".to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn form_gap_channels_are_not_homomorphisms() {
        let config = SuiteConfig::default();
        for trial in (3..300).step_by(3) {
            let ctx = GenContext {
                trial,
                dims: vec![1, 2, 3, 4, 5],
                t_grid: config.t_grid.clone(),
                seed: 1,
            };
            let mut rng = stream_rng(1, SuiteName::Schwarz.id(), trial as u64);
            match generate(SuiteName::Schwarz, &ctx, &mut rng).unwrap() {
                Case::FormGap { channel, .. } => {
                    let (m, n) = (channel.kraus[0].nrows(), channel.kraus[0].ncols());
                    assert!(
                        m * channel.kraus.len() > n,
                        "trial {trial}: {m}x{n}, {}",
                        channel.kraus.len()
                    );
                }
                other => panic!("trial {trial}: {other:?}"),
            }
        }
    }

    #[test]
    fn config_errors_are_named() {
        let cfg = SuiteConfig {
            trials: Some(0),
            dims: Some(vec![2, 9]),
            t_grid: vec![0.5, 1.5],
            suites: vec![],
            ..SuiteConfig::default()
        };
        let Err(Error::Config(problems)) = cfg.validate() else {
            panic!("expected config error");
        };
        assert_eq!(problems.len(), 4);
        assert!(problems[0].starts_with("trials"));
        assert!(problems[1].starts_with("dims[1]"));
        assert!(problems[2].starts_with("t_grid[1]"));
        assert!(problems[3].starts_with("suites"));
    }

    #[test]
    fn unknown_tolerance_rejected() {
        let mut cfg = SuiteConfig::default();
        cfg.tolerances.insert("bogus".into(), 1.0);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn suite_names_round_trip() {
        for s in SuiteName::ALL {
            assert_eq!(s.as_str().parse::<SuiteName>().unwrap(), s);
            assert_eq!(serde_json::to_string(&s).unwrap(), format!("\"{s}\""));
        }
        assert!("nope".parse::<SuiteName>().is_err());
    }

    #[test]
    fn paper_example_passes() {
        let cfg = SuiteConfig {
            suites: vec![SuiteName::PaperExample],
            ..SuiteConfig::default()
        };
        let rep = run_suite(&cfg, "default").unwrap();
        assert!(rep.all_passed);
        assert_eq!(rep.suites[0].trials, 1);
    }
}

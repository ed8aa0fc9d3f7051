//! Experiment configuration.
//!
//! The text format is a sequence of `key=value` pairs separated by
//! whitespace or newlines; `#` starts a comment that runs to the end of the
//! line. Values cannot contain whitespace. Unknown keys are errors; keys that
//! are valid but do not apply to the chosen experiment produce a warning and
//! are ignored.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::str::FromStr;

use legrad_core::optimizer::Schedule;
use legrad_core::{BoundSplit, EstimatorKind};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Environment variable naming the default output directory.
pub const OUTPUT_ENV: &str = "LEGRAD_OUTPUT_DIR";
pub const DEFAULT_OUTPUT: &str = "legrad-output";

const KEYS: &[&str] = &[
    "experiment",
    "estimator",
    "split",
    "n",
    "quadrature",
    "samples",
    "step",
    "recognition_step",
    "schedule",
    "tau",
    "iterations",
    "seed",
    "window",
    "trace_every",
    "tracked",
    "data",
    "images",
    "labels",
    "classes",
    "examples",
    "separation",
    "prior_variance",
    "hidden",
    "visible",
    "prototypes",
    "flip",
    "init_std",
    "target",
    "estimators",
    "calls",
    "output",
    "workers",
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("line {line}: expected key=value, got '{token}'")]
    Syntax { line: usize, token: String },
    #[error("unknown key '{0}'")]
    UnknownKey(String),
    #[error("key '{0}' is given more than once")]
    Duplicate(String),
    #[error("missing required key '{0}'")]
    Missing(&'static str),
    #[error("invalid value for '{key}': {reason}")]
    Invalid { key: String, reason: String },
}

fn invalid(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    GaussFit,
    Logreg,
    Sbn,
    VarianceStudy,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Self::GaussFit => "gauss-fit",
            Self::Logreg => "logreg",
            Self::Sbn => "sbn",
            Self::VarianceStudy => "variance-study",
        }
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "gauss-fit" => Ok(Self::GaussFit),
            "logreg" => Ok(Self::Logreg),
            "sbn" => Ok(Self::Sbn),
            "variance-study" => Ok(Self::VarianceStudy),
            _ => Err("expected gauss-fit, logreg, sbn or variance-study".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DataSource {
    Synthetic,
    Idx { images: PathBuf, labels: PathBuf },
}

/// One entry of a variance study: an estimator and its sample count
/// (`None` matches LeGrad's evaluation budget, `n * quadrature`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StudyEstimator {
    pub kind: EstimatorKind,
    pub samples: Option<usize>,
}

impl StudyEstimator {
    /// `legrad`, `ldgrad` (budget-matched) or `name:S`.
    pub fn label(&self) -> String {
        match self.samples {
            Some(s) if self.kind != EstimatorKind::LeGrad => format!("{}:{s}", self.kind.name()),
            _ => self.kind.name().into(),
        }
    }

    pub fn samples_for(&self, dim: usize, quadrature: usize) -> usize {
        self.samples.unwrap_or(dim * quadrature)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub estimator: EstimatorKind,
    pub split: BoundSplit,
    /// Latent dimension: grid size for gauss-fit, weights (with bias) for logreg.
    pub dim: usize,
    pub quadrature: usize,
    /// Samples per call for LdGrad and ReGrad; `None` matches LeGrad's
    /// budget of `n * quadrature` evaluations once `n` is known.
    pub samples: Option<usize>,
    pub step: f64,
    pub recognition_step: Option<f64>,
    pub schedule: Schedule,
    pub iterations: usize,
    pub seed: u64,
    pub window: usize,
    pub trace_every: usize,
    pub tracked: Vec<usize>,
    pub data: DataSource,
    pub examples: usize,
    pub separation: f64,
    pub prior_variance: f64,
    pub classes: (u8, u8),
    pub hidden: usize,
    pub visible: usize,
    pub prototypes: usize,
    pub flip: f64,
    pub init_std: f64,
    pub study_target: Experiment,
    pub estimators: Vec<StudyEstimator>,
    pub calls: usize,
    pub output: Option<PathBuf>,
    /// Worker threads; 0 uses the rayon default. Never affects results.
    pub workers: usize,
}

/// A parsed configuration and the warnings raised while parsing it.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed {
    pub config: ExperimentConfig,
    pub warnings: Vec<String>,
}

/// Splits the text into `(line, key, value)` triples.
fn tokenize(text: &str) -> Result<Vec<(usize, String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        for token in line.split_whitespace() {
            let (k, v) = token.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: n + 1,
                token: token.to_string(),
            })?;
            if k.is_empty() {
                return Err(ConfigError::Syntax {
                    line: n + 1,
                    token: token.to_string(),
                });
            }
            out.push((n + 1, k.to_string(), v.to_string()));
        }
    }
    Ok(out)
}

/// Raw key/value pairs; tracks which keys the chosen experiment consumed.
struct Raw {
    values: BTreeMap<String, String>,
    used: BTreeSet<String>,
}

impl Raw {
    fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        self.used.insert(key.to_string());
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|e| invalid(key, format!("'{v}': {e}"))),
        }
    }

    fn or<T: FromStr>(&mut self, key: &str, default: T) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        Ok(self.take(key)?.unwrap_or(default))
    }

    fn list<T: FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        let Some(text) = self.take::<String>(key)? else {
            return Ok(None);
        };
        text.split(',')
            .map(|item| item.parse().map_err(|e| invalid(key, format!("'{item}': {e}"))))
            .collect::<Result<Vec<T>, _>>()
            .map(Some)
    }
}

/// Merges several sources in order; later sources override earlier ones.
pub fn parse_sources(sources: &[&str]) -> Result<Parsed, ConfigError> {
    let mut values = BTreeMap::new();
    for text in sources {
        let mut seen = BTreeSet::new();
        for (_, k, v) in tokenize(text)? {
            if !KEYS.contains(&k.as_str()) {
                return Err(ConfigError::UnknownKey(k));
            }
            if !seen.insert(k.clone()) {
                return Err(ConfigError::Duplicate(k));
            }
            values.insert(k, v);
        }
    }
    resolve(Raw {
        values,
        used: BTreeSet::new(),
    })
}

pub fn parse_config(text: &str) -> Result<Parsed, ConfigError> {
    parse_sources(&[text])
}

fn resolve(mut raw: Raw) -> Result<Parsed, ConfigError> {
    let mut warnings = Vec::new();
    let experiment: Experiment = raw.take("experiment")?.ok_or(ConfigError::Missing("experiment"))?;
    let seed = raw.or("seed", 0u64)?;
    let output = raw.take::<PathBuf>("output")?;
    let workers = raw.or("workers", 0usize)?;

    let estimator = match experiment {
        Experiment::GaussFit | Experiment::Logreg => {
            raw.take::<EstimatorKind>("estimator")?.ok_or(ConfigError::Missing("estimator"))?
        }
        Experiment::Sbn => raw.or("estimator", EstimatorKind::LeGrad)?,
        Experiment::VarianceStudy => EstimatorKind::LeGrad,
    };
    if experiment == Experiment::Sbn && estimator != EstimatorKind::LeGrad {
        let reason = match estimator {
            EstimatorKind::ReGrad => "regrad needs continuous latent variables; the belief net's are binary",
            _ => "the belief net is trained with the closed-form legrad recognition gradient",
        };
        return Err(invalid("estimator", reason));
    }

    let study_target = if experiment == Experiment::VarianceStudy {
        let t: Experiment = raw.or("target", Experiment::GaussFit)?;
        if !matches!(t, Experiment::GaussFit | Experiment::Logreg) {
            return Err(invalid("target", "variance studies run on gauss-fit or logreg"));
        }
        t
    } else {
        experiment
    };
    let continuous = matches!(study_target, Experiment::GaussFit | Experiment::Logreg);

    // Data.
    let uses_data = matches!(study_target, Experiment::Logreg | Experiment::Sbn);
    let data = if uses_data {
        match raw.or("data", "synthetic".to_string())?.as_str() {
            "synthetic" => DataSource::Synthetic,
            "idx" => DataSource::Idx {
                images: raw.take("images")?.ok_or(ConfigError::Missing("images"))?,
                labels: raw.take("labels")?.ok_or(ConfigError::Missing("labels"))?,
            },
            other => return Err(invalid("data", format!("'{other}': expected synthetic or idx"))),
        }
    } else {
        DataSource::Synthetic
    };
    let synthetic = data == DataSource::Synthetic;

    let dim = if continuous && (study_target == Experiment::GaussFit || synthetic) {
        let default = if study_target == Experiment::GaussFit { 100 } else { 20 };
        raw.or("n", default)?
    } else {
        0
    };
    let quadrature = if continuous {
        raw.or("quadrature", 5usize)?
    } else {
        5
    };

    let mut examples = 0;
    let (mut separation, mut prior_variance, mut classes) = (3.0, 1.0, (2u8, 7u8));
    if uses_data {
        let default = if study_target == Experiment::Logreg { 500 } else { 200 };
        examples = raw.or("examples", default)?;
        if study_target == Experiment::Logreg {
            prior_variance = raw.or("prior_variance", 1.0)?;
            if synthetic {
                separation = raw.or("separation", 3.0)?;
            } else if let Some(c) = raw.list::<u8>("classes")? {
                if c.len() != 2 || c[0] == c[1] {
                    return Err(invalid("classes", "expected two distinct labels, e.g. 2,7"));
                }
                classes = (c[0], c[1]);
            }
        }
    }
    let (mut hidden, mut visible, mut prototypes, mut flip, mut init_std) = (20, 64, 8, 0.05, 0.1);
    let mut recognition_step = None;
    if experiment == Experiment::Sbn {
        hidden = raw.or("hidden", 20usize)?;
        init_std = raw.or("init_std", 0.1)?;
        recognition_step = raw.take("recognition_step")?;
        if synthetic {
            visible = raw.or("visible", 64usize)?;
            prototypes = raw.or("prototypes", 8usize)?;
            flip = raw.or("flip", 0.05)?;
        }
    }

    // Estimator budget and optimization.
    let mut samples = None;
    let optimizing = experiment != Experiment::VarianceStudy;
    if optimizing && experiment != Experiment::Sbn {
        samples = match estimator {
            EstimatorKind::LeGrad => None,
            EstimatorKind::LdGrad => raw.take("samples")?,
            EstimatorKind::ReGrad => Some(raw.or("samples", 1usize)?),
        };
    }
    let split = if continuous {
        match raw.or("split", "entropy".to_string())?.as_str() {
            "entropy" => BoundSplit::EntropyClosedForm,
            "folded" => BoundSplit::LogQFolded,
            other => return Err(invalid("split", format!("'{other}': expected entropy or folded"))),
        }
    } else {
        BoundSplit::LogQFolded
    };
    if estimator == EstimatorKind::ReGrad && split == BoundSplit::LogQFolded {
        return Err(invalid("split", "regrad needs the closed-form entropy split"));
    }

    let (mut step, mut schedule, mut iterations, mut trace_every) = (0.0, Schedule::Constant, 1, 1);
    if optimizing {
        let default_step = match experiment {
            Experiment::GaussFit => 0.02,
            Experiment::Logreg => 1e-4,
            _ => 0.05,
        };
        step = raw.or("step", default_step)?;
        iterations = raw.or("iterations", if experiment == Experiment::Sbn { 1000 } else { 2000 })?;
        trace_every = raw.or("trace_every", 1usize)?;
        schedule = raw.or("schedule", Schedule::Constant)?;
        if let Schedule::RobbinsMonro { tau } = &mut schedule {
            *tau = raw.or("tau", *tau)?;
        }
    }
    let window = if optimizing { raw.or("window", 10usize)? } else { 10 };
    let tracked = raw.list::<usize>("tracked")?.unwrap_or_else(|| vec![0]);

    let (mut estimators, mut calls) = (Vec::new(), 0);
    if experiment == Experiment::VarianceStudy {
        calls = raw.or("calls", 2000usize)?;
        let items = raw
            .take::<String>("estimators")?
            .unwrap_or_else(|| "legrad,regrad,ldgrad".into());
        for item in items.split(',') {
            let (name, s) = match item.split_once(':') {
                Some((n, s)) => (n, Some(s)),
                None => (item, None),
            };
            let kind: EstimatorKind = name.parse().map_err(|e| invalid("estimators", format!("'{item}': {e}")))?;
            let samples = match (kind, s) {
                (EstimatorKind::LeGrad, Some(_)) => {
                    warnings.push(format!("estimators: sample count in '{item}' does not apply to legrad; ignored"));
                    None
                }
                (EstimatorKind::LeGrad, None) | (EstimatorKind::LdGrad, None) => None,
                (_, Some(s)) => Some(
                    s.parse()
                        .map_err(|_| invalid("estimators", format!("'{item}': bad sample count")))?,
                ),
                (EstimatorKind::ReGrad, None) => Some(1),
            };
            estimators.push(StudyEstimator { kind, samples });
        }
    }

    for key in raw.values.keys() {
        if !raw.used.contains(key) {
            warnings.push(format!(
                "key '{key}' does not apply to this {} configuration; ignored",
                experiment.name()
            ));
        }
    }

    let config = ExperimentConfig {
        experiment,
        estimator,
        split,
        dim,
        quadrature,
        samples,
        step,
        recognition_step,
        schedule,
        iterations,
        seed,
        window,
        trace_every,
        tracked,
        data,
        examples,
        separation,
        prior_variance,
        classes,
        hidden,
        visible,
        prototypes,
        flip,
        init_std,
        study_target,
        estimators,
        calls,
        output,
        workers,
    };
    config.validate()?;
    Ok(Parsed { config, warnings })
}

impl ExperimentConfig {
    fn validate(&self) -> Result<(), ConfigError> {
        let continuous = matches!(self.study_target, Experiment::GaussFit | Experiment::Logreg);
        let synthetic = self.data == DataSource::Synthetic;
        if continuous && synthetic && self.dim == 0 {
            return Err(invalid("n", "must be at least 1"));
        }
        if self.study_target == Experiment::Logreg && synthetic && self.dim < 2 {
            return Err(invalid("n", "logistic regression needs at least one feature plus the bias"));
        }
        if !(1..=legrad_core::quadrature::MAX_ORDER).contains(&self.quadrature) {
            return Err(invalid(
                "quadrature",
                format!("must be between 1 and {}", legrad_core::quadrature::MAX_ORDER),
            ));
        }
        if self.samples == Some(0) || self.estimators.iter().any(|e| e.samples == Some(0)) {
            return Err(invalid("samples", "must be at least 1"));
        }
        let optimizing = self.experiment != Experiment::VarianceStudy;
        if optimizing {
            if !(self.step >= 0.0) || !self.step.is_finite() {
                return Err(invalid("step", "must be finite and nonnegative"));
            }
            if let Some(s) = self.recognition_step {
                if !(s >= 0.0) || !s.is_finite() {
                    return Err(invalid("recognition_step", "must be finite and nonnegative"));
                }
            }
            if self.iterations == 0 {
                return Err(invalid("iterations", "must be at least 1"));
            }
            if self.trace_every == 0 {
                return Err(invalid("trace_every", "must be at least 1"));
            }
            if self.window < 2 {
                return Err(invalid("window", "must be at least 2"));
            }
            if let Schedule::RobbinsMonro { tau } = self.schedule {
                if !(tau > 0.0) || !tau.is_finite() {
                    return Err(invalid("tau", "must be positive"));
                }
            }
        } else {
            if self.calls < 2 {
                return Err(invalid("calls", "must be at least 2"));
            }
            if self.estimators.is_empty() {
                return Err(invalid("estimators", "list is empty"));
            }
            let mut labels = BTreeSet::new();
            if let Some(e) = self.estimators.iter().find(|e| !labels.insert(e.label())) {
                return Err(invalid("estimators", format!("'{}' is listed twice", e.label())));
            }
        }
        if self.tracked.is_empty() {
            return Err(invalid("tracked", "list is empty"));
        }
        if matches!(self.study_target, Experiment::Logreg | Experiment::Sbn) && self.examples == 0 {
            return Err(invalid("examples", "must be at least 1"));
        }
        if self.experiment == Experiment::Sbn {
            if self.hidden == 0 {
                return Err(invalid("hidden", "must be at least 1"));
            }
            if synthetic && (self.visible == 0 || self.prototypes == 0) {
                return Err(invalid("visible", "visible and prototypes must be at least 1"));
            }
            if !(0.0..=1.0).contains(&self.flip) {
                return Err(invalid("flip", "must lie in [0, 1]"));
            }
            if !(self.init_std >= 0.0) || !self.init_std.is_finite() {
                return Err(invalid("init_std", "must be finite and nonnegative"));
            }
        }
        if self.study_target == Experiment::Logreg && !(self.prior_variance > 0.0) {
            return Err(invalid("prior_variance", "must be positive"));
        }
        Ok(())
    }

    /// Canonical text: every key that applies, resolved, in a fixed order.
    /// Parsing the output yields an identical configuration.
    pub fn emit(&self) -> String {
        let mut out = self.canonical();
        if let Some(dir) = &self.output {
            let _ = writeln!(out, "output={}", dir.display());
        }
        if self.workers != 0 {
            let _ = writeln!(out, "workers={}", self.workers);
        }
        out
    }

    /// SHA-256 of the canonical text without `output` and `workers`, neither
    /// of which can change any result.
    pub fn hash(&self) -> String {
        format!("{:x}", Sha256::digest(self.canonical().as_bytes()))
    }

    /// [`emit`](Self::emit) without `output` and `workers`.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k}={v}");
        };
        let join = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        let target = self.study_target;
        let continuous = matches!(target, Experiment::GaussFit | Experiment::Logreg);
        let optimizing = self.experiment != Experiment::VarianceStudy;

        put("experiment", self.experiment.name().into());
        if self.experiment == Experiment::VarianceStudy {
            put("target", target.name().into());
            put("estimators", self.estimators.iter().map(StudyEstimator::label).collect::<Vec<_>>().join(","));
            put("calls", self.calls.to_string());
        } else {
            put("estimator", self.estimator.name().into());
        }
        if continuous {
            put("split", if self.split == BoundSplit::LogQFolded { "folded" } else { "entropy" }.into());
        }
        put("seed", self.seed.to_string());
        if matches!(target, Experiment::Logreg | Experiment::Sbn) {
            match &self.data {
                DataSource::Synthetic => put("data", "synthetic".into()),
                DataSource::Idx { images, labels } => {
                    put("data", "idx".into());
                    put("images", images.display().to_string());
                    put("labels", labels.display().to_string());
                }
            }
            put("examples", self.examples.to_string());
        }
        let synthetic = self.data == DataSource::Synthetic;
        if continuous && (target == Experiment::GaussFit || synthetic) {
            put("n", self.dim.to_string());
        }
        if continuous {
            put("quadrature", self.quadrature.to_string());
        }
        if target == Experiment::Logreg {
            put("prior_variance", self.prior_variance.to_string());
            if synthetic {
                put("separation", self.separation.to_string());
            } else {
                put("classes", format!("{},{}", self.classes.0, self.classes.1));
            }
        }
        if self.experiment == Experiment::Sbn {
            put("hidden", self.hidden.to_string());
            if synthetic {
                put("visible", self.visible.to_string());
                put("prototypes", self.prototypes.to_string());
                put("flip", self.flip.to_string());
            }
            put("init_std", self.init_std.to_string());
            if let Some(s) = self.recognition_step {
                put("recognition_step", s.to_string());
            }
        }
        if optimizing {
            if let Some(s) = self.samples {
                put("samples", s.to_string());
            }
            put("step", self.step.to_string());
            match self.schedule {
                Schedule::Constant => put("schedule", "constant".into()),
                Schedule::RobbinsMonro { tau } => {
                    put("schedule", "robbins-monro".into());
                    put("tau", tau.to_string());
                }
            }
            put("iterations", self.iterations.to_string());
            put("trace_every", self.trace_every.to_string());
            put("window", self.window.to_string());
        }
        put("tracked", join(&self.tracked));
        out
    }

    /// LdGrad/ReGrad samples per call for a latent dimension `dim`.
    pub fn samples_per_call(&self, dim: usize) -> usize {
        self.samples.unwrap_or(dim * self.quadrature)
    }

    /// Output directory: the `output` key, else `$LEGRAD_OUTPUT_DIR`, else
    /// `legrad-output` in the working directory.
    pub fn output_dir(&self) -> PathBuf {
        self.output.clone().unwrap_or_else(|| {
            std::env::var_os(OUTPUT_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Parsed {
        parse_config(text).unwrap()
    }

    #[test]
    fn minimal_gauss_fit_defaults() {
        let p = parse("experiment=gauss-fit estimator=legrad");
        let c = &p.config;
        assert_eq!((c.dim, c.quadrature, c.window), (100, 5, 10));
        assert_eq!(c.tracked, vec![0]);
        assert!(p.warnings.is_empty());
    }

    #[test]
    fn ldgrad_budget_matches_legrad() {
        let c = parse("experiment=gauss-fit estimator=ldgrad").config;
        assert_eq!(c.samples_per_call(c.dim), 500);
        let c = parse("experiment=logreg estimator=ldgrad").config;
        assert_eq!(c.samples_per_call(c.dim), 100);
        let c = parse("experiment=gauss-fit estimator=regrad").config;
        assert_eq!(c.samples_per_call(c.dim), 1);
    }

    #[test]
    fn regrad_on_discrete_experiment_is_rejected() {
        let err = parse_config("experiment=sbn estimator=regrad").unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { ref key, .. } if key == "estimator"), "{err}");
    }

    #[test]
    fn samples_for_legrad_warns() {
        let p = parse("experiment=gauss-fit estimator=legrad samples=7");
        assert_eq!(p.warnings.len(), 1);
        assert!(p.warnings[0].contains("samples"));
    }

    #[test]
    fn unknown_and_missing_keys_are_named() {
        assert_eq!(
            parse_config("experiment=gauss-fit estimator=legrad bogus=1").unwrap_err(),
            ConfigError::UnknownKey("bogus".into())
        );
        assert_eq!(parse_config("experiment=logreg").unwrap_err(), ConfigError::Missing("estimator"));
        let err = parse_config("experiment=gauss-fit estimator=legrad step=fast").unwrap_err();
        assert!(err.to_string().contains("'step'"));
    }

    #[test]
    fn comments_and_newlines() {
        let p = parse("# fit\nexperiment=gauss-fit   # the experiment\n\testimator=legrad\nn=10\n");
        assert_eq!(p.config.dim, 10);
    }

    #[test]
    fn syntax_error_reports_line() {
        assert_eq!(
            parse_config("experiment=gauss-fit\nestimator").unwrap_err(),
            ConfigError::Syntax {
                line: 2,
                token: "estimator".into()
            }
        );
    }

    #[test]
    fn later_sources_override() {
        let p = parse_sources(&["experiment=gauss-fit estimator=legrad seed=1", "seed=9"]).unwrap();
        assert_eq!(p.config.seed, 9);
        assert!(parse_sources(&["experiment=gauss-fit estimator=legrad seed=1 seed=2"]).is_err());
    }

    #[test]
    fn round_trip() {
        for text in [
            "experiment=gauss-fit estimator=legrad",
            "experiment=gauss-fit estimator=ldgrad samples=10000 schedule=robbins-monro tau=2000 output=/tmp/x workers=3",
            "experiment=logreg estimator=regrad step=0.001 tracked=0,3",
            "experiment=logreg estimator=legrad data=idx images=a.idx labels=b.idx classes=3,8",
            "experiment=sbn hidden=7 recognition_step=0.2",
            "experiment=variance-study estimators=legrad,regrad,ldgrad:10000 calls=100",
            "experiment=variance-study target=logreg split=folded estimators=legrad,ldgrad",
        ] {
            let c = parse(text).config;
            let again = parse(&c.emit()).config;
            assert_eq!(c, again, "{text}");
            assert_eq!(c.emit(), again.emit());
        }
    }

    #[test]
    fn hash_ignores_output_and_workers() {
        let a = parse("experiment=gauss-fit estimator=legrad").config;
        let b = parse("experiment=gauss-fit estimator=legrad workers=4 output=elsewhere").config;
        let c = parse("experiment=gauss-fit estimator=legrad seed=1").config;
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
    }
}

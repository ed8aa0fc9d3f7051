//! Runs a configured experiment and writes its output files.
//!
//! Every run writes `trace.csv`, `variance.csv`, `final_params.txt`,
//! `config.txt` and `manifest.txt`; the belief net adds `reconstruction.csv`.
//! Wall-clock times go to `timing.csv`, which is the only file not covered by
//! the manifest: everything else is a function of the configuration alone.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use legrad_core::diagnostics::fixed_point_variance_study;
use legrad_core::optimizer::{run, OptimizerConfig, TraceRecord};
use legrad_core::sbn::{reconstruct, train, SbnConfig, SbnRun};
use legrad_core::targets::idx::{self, IdxError};
use legrad_core::targets::synthetic::{noisy_prototypes, two_class_blobs};
use legrad_core::targets::{CorrelatedGaussianTarget, LogisticRegressionTarget};
use legrad_core::variational::FactorKind;
use legrad_core::{EstimatorConfig, EstimatorKind, ModelBuilder, Target, VariationalModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{DataSource, Experiment, ExperimentConfig};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Core(#[from] legrad_core::Error),
    #[error("reading IDX data: {0}")]
    Idx(#[from] IdxError),
    #[error("writing output: {0}")]
    Io(#[from] io::Error),
    #[error("writing CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("starting worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
    #[error("{0}")]
    Data(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub total_f_evaluations: u64,
    /// Files covered by the manifest, with their SHA-256 digests.
    pub files: Vec<(String, String)>,
}

/// Output files collected in memory and written together at the end.
#[derive(Default)]
struct Outputs {
    files: Vec<(&'static str, Vec<u8>)>,
    timing: Vec<u8>,
    total_f_evaluations: u64,
}

impl Outputs {
    fn add(&mut self, name: &'static str, bytes: Vec<u8>) {
        self.files.push((name, bytes));
    }
}

fn csv_bytes<I, R>(header: &[String], rows: I) -> Result<Vec<u8>, RunError>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.into_inner().map_err(|e| RunError::Io(e.into_error()))
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<RunSummary, RunError> {
    run_in(config, &config.output_dir())
}

/// Runs `config` and writes its files into `dir`, on a pool of
/// `config.workers` threads (the rayon default when 0).
pub fn run_in(config: &ExperimentConfig, dir: &Path) -> Result<RunSummary, RunError> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if config.workers > 0 {
        pool = pool.num_threads(config.workers);
    }
    let outputs = pool.build()?.install(|| match config.experiment {
        Experiment::GaussFit | Experiment::Logreg => run_optimization(config),
        Experiment::Sbn => run_sbn(config),
        Experiment::VarianceStudy => run_variance_study(config),
    })?;
    write_outputs(config, dir, outputs)
}

fn write_outputs(config: &ExperimentConfig, dir: &Path, mut outputs: Outputs) -> Result<RunSummary, RunError> {
    fs::create_dir_all(dir)?;
    outputs.add("config.txt", config.canonical().into_bytes());
    let mut files = Vec::new();
    for (name, bytes) in &outputs.files {
        fs::write(dir.join(name), bytes)?;
        files.push((name.to_string(), format!("{:x}", Sha256::digest(bytes))));
    }
    fs::write(dir.join("timing.csv"), &outputs.timing)?;
    let mut manifest = format!(
        "experiment={}\nseed={}\nconfig_sha256={}\ntotal_f_evaluations={}\n",
        config.experiment.name(),
        config.seed,
        config.hash(),
        outputs.total_f_evaluations
    );
    for (name, digest) in &files {
        manifest.push_str(&format!("sha256:{name}={digest}\n"));
    }
    fs::write(dir.join("manifest.txt"), manifest)?;
    Ok(RunSummary {
        dir: dir.to_path_buf(),
        total_f_evaluations: outputs.total_f_evaluations,
        files,
    })
}

fn gaussian_model(n: usize) -> Result<VariationalModel, RunError> {
    let mut b = ModelBuilder::new();
    for _ in 0..n {
        b.gaussian(0.0, 1.0)?;
    }
    Ok(b.build()?)
}

/// Generator for synthetic data, on a different stream from the optimizer's.
fn data_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

pub fn logreg_target(config: &ExperimentConfig) -> Result<LogisticRegressionTarget, RunError> {
    let (rows, labels) = match &config.data {
        DataSource::Synthetic => two_class_blobs(config.examples, config.dim, config.separation, &mut data_rng(config.seed)),
        DataSource::Idx { images, labels } => {
            let images = idx::read_images(images)?;
            let labels = idx::read_labels(labels)?;
            let (mut rows, mut ys) = idx::two_class_subset(&images, &labels, config.classes.0, config.classes.1);
            rows.truncate(config.examples);
            ys.truncate(config.examples);
            if rows.is_empty() {
                return Err(RunError::Data(format!(
                    "no images with labels {} or {}",
                    config.classes.0, config.classes.1
                )));
            }
            (rows, ys)
        }
    };
    Ok(LogisticRegressionTarget::new(&rows, &labels, config.prior_variance)?)
}

pub fn sbn_data(config: &ExperimentConfig) -> Result<Vec<Vec<f64>>, RunError> {
    match &config.data {
        DataSource::Synthetic => Ok(noisy_prototypes(
            config.examples,
            config.visible,
            config.prototypes,
            config.flip,
            &mut data_rng(config.seed),
        )),
        DataSource::Idx { images, labels } => {
            let images = idx::read_images(images)?;
            let labels = idx::read_labels(labels)?;
            let mut data = idx::balanced_binarized(&images, &labels, config.examples.div_ceil(10));
            data.truncate(config.examples);
            if data.is_empty() {
                return Err(RunError::Data("no images in the IDX file".into()));
            }
            Ok(data)
        }
    }
}

fn estimator_config(kind: EstimatorKind, samples: usize, config: &ExperimentConfig) -> Result<EstimatorConfig, RunError> {
    Ok(EstimatorConfig::new(kind, samples, config.quadrature)?
        .with_split(config.split)
        .with_parallel(true))
}

fn run_optimization(config: &ExperimentConfig) -> Result<Outputs, RunError> {
    match config.experiment {
        Experiment::GaussFit => optimize(config, &CorrelatedGaussianTarget::kernel_grid(config.dim)?),
        _ => optimize(config, &logreg_target(config)?),
    }
}

fn optimize<T: Target>(config: &ExperimentConfig, target: &T) -> Result<Outputs, RunError> {
    let n = target.dim();
    let mut model = gaussian_model(n)?;
    let estimator = estimator_config(config.estimator, config.samples_per_call(n), config)?;
    let mut opt = OptimizerConfig::new(config.step, config.iterations, config.seed);
    opt.schedule = config.schedule;
    opt.trace_every = config.trace_every;
    opt.window = config.window;
    opt.tracked = config.tracked.clone();
    let result = run(&mut model, target, &estimator, &opt)?;

    let mut out = Outputs {
        total_f_evaluations: result.total_f_evaluations,
        ..Outputs::default()
    };
    out.add("trace.csv", trace_csv(&config.tracked, &result.trace)?);
    out.add(
        "variance.csv",
        variance_csv(&config.tracked, result.trace.iter().map(|r| (r.iteration, &r.variances[..])))?,
    );
    out.add("final_params.txt", model_text(&model).into_bytes());
    out.timing = timing_csv(result.trace.iter().map(|r| (r.iteration, r.elapsed_seconds)))?;
    Ok(out)
}

fn trace_csv(tracked: &[usize], trace: &[TraceRecord]) -> Result<Vec<u8>, RunError> {
    let mut header = strings(&["iteration", "bound", "f_evaluations"]);
    header.extend(tracked.iter().map(|j| format!("gradient_{j}")));
    header.extend(tracked.iter().map(|j| format!("variance_{j}")));
    csv_bytes(
        &header,
        trace.iter().map(|r| {
            let mut row = vec![r.iteration.to_string(), r.bound.to_string(), r.f_evaluations.to_string()];
            row.extend(r.gradients.iter().map(f64::to_string));
            row.extend(r.variances.iter().map(|v| v.map_or(String::new(), |v| v.to_string())));
            row
        }),
    )
}

/// Long format, one row per (iteration, parameter) once the window is full.
fn variance_csv<'a>(
    tracked: &[usize],
    rows: impl Iterator<Item = (usize, &'a [Option<f64>])>,
) -> Result<Vec<u8>, RunError> {
    let mut out = Vec::new();
    for (iteration, variances) in rows {
        for (j, v) in tracked.iter().zip(variances) {
            if let Some(v) = v {
                out.push(vec![iteration.to_string(), j.to_string(), v.to_string()]);
            }
        }
    }
    csv_bytes(&strings(&["iteration", "parameter", "variance"]), out)
}

fn timing_csv(rows: impl Iterator<Item = (usize, f64)>) -> Result<Vec<u8>, RunError> {
    csv_bytes(
        &strings(&["iteration", "elapsed_seconds"]),
        rows.map(|(i, t)| vec![i.to_string(), t.to_string()]),
    )
}

/// One line per factor: index, kind and parameters.
pub fn model_text(model: &VariationalModel) -> String {
    let mut out = String::from("# factor kind parameters\n");
    for (i, f) in model.factors().iter().enumerate() {
        let params = &model.params()[f.params.clone()];
        let kind = match f.kind {
            FactorKind::GaussianLocationScale => "gaussian",
            FactorKind::Categorical { .. } => "categorical",
            FactorKind::RecognitionBernoulli { .. } => "recognition",
        };
        let values: Vec<String> = params.iter().map(f64::to_string).collect();
        out.push_str(&format!("{i} {kind} {}\n", values.join(" ")));
    }
    out
}

/// Reads the Gaussian `(mu, ell)` pairs back from [`model_text`] output.
pub fn parse_gaussian_params(text: &str) -> Option<Vec<(f64, f64)>> {
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let parts: Vec<&str> = l.split_whitespace().collect();
            match parts.as_slice() {
                [_, "gaussian", mu, ell] => Some((mu.parse().ok()?, ell.parse().ok()?)),
                _ => None,
            }
        })
        .collect()
}

fn matrix_text(name: &str, rows: usize, cols: usize, values: &[f64]) -> String {
    let mut out = format!("{name} {rows} {cols}\n");
    for r in values.chunks(cols) {
        let line: Vec<String> = r.iter().map(f64::to_string).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

fn run_sbn(config: &ExperimentConfig) -> Result<Outputs, RunError> {
    let data = sbn_data(config)?;
    let mut sbn = SbnConfig::new(config.hidden, config.iterations, config.step, config.seed);
    sbn.recognition_step_size = config.recognition_step;
    sbn.init_std = config.init_std;
    sbn.trace_every = config.trace_every;
    sbn.window = config.window;
    sbn.tracked = config.tracked.clone();
    let run: SbnRun = train(data, &sbn)?;

    let (net, rec) = (&run.generative, &run.recognition);
    let mut header = strings(&["iteration", "bound", "reconstruction_error", "f_evaluations"]);
    header.extend(config.tracked.iter().map(|j| format!("gradient_{j}")));
    header.extend(config.tracked.iter().map(|j| format!("variance_{j}")));
    let trace = csv_bytes(
        &header,
        run.trace.iter().map(|r| {
            let mut row = vec![
                r.iteration.to_string(),
                r.bound.to_string(),
                r.reconstruction_error.to_string(),
                r.f_evaluations.to_string(),
            ];
            row.extend(r.gradients.iter().map(f64::to_string));
            row.extend(r.variances.iter().map(|v| v.map_or(String::new(), |v| v.to_string())));
            row
        }),
    )?;
    let reconstruction = csv_bytes(
        &(0..net.visible()).map(|d| format!("pixel_{d}")).collect::<Vec<_>>(),
        net.data()
            .iter()
            .map(|y| reconstruct(net, rec, y).into_iter().map(|v| v.to_string()).collect::<Vec<_>>()),
    )?;
    let params = matrix_text("W", net.visible(), net.hidden() + 1, net.weights())
        + &matrix_text("V", rec.hidden(), rec.visible() + 1, rec.weights());

    let mut out = Outputs {
        total_f_evaluations: run.total_f_evaluations,
        ..Outputs::default()
    };
    out.add("trace.csv", trace);
    out.add(
        "variance.csv",
        variance_csv(&config.tracked, run.trace.iter().map(|r| (r.iteration, &r.variances[..])))?,
    );
    out.add("final_params.txt", params.into_bytes());
    out.add("reconstruction.csv", reconstruction);
    out.timing = timing_csv(run.trace.iter().map(|r| (r.iteration, r.elapsed_seconds)))?;
    Ok(out)
}

fn run_variance_study(config: &ExperimentConfig) -> Result<Outputs, RunError> {
    match config.study_target {
        Experiment::GaussFit => study(config, &CorrelatedGaussianTarget::kernel_grid(config.dim)?),
        _ => study(config, &logreg_target(config)?),
    }
}

/// Fixed-point study at the initial parameters `mu = 0`, `ell = 1`.
fn study<T: Target>(config: &ExperimentConfig, target: &T) -> Result<Outputs, RunError> {
    let n = target.dim();
    let model = gaussian_model(n)?;
    if let Some(&bad) = config.tracked.iter().find(|&&j| j >= model.param_count()) {
        return Err(legrad_core::Error::InvalidConfig(format!("tracked parameter {bad} out of range")).into());
    }
    let estimators = config
        .estimators
        .iter()
        .map(|e| Ok((e.label(), estimator_config(e.kind, e.samples_for(n, config.quadrature), config)?)))
        .collect::<Result<Vec<_>, RunError>>()?;
    let table = fixed_point_variance_study(&model, target, &estimators, config.calls, config.seed, Some(&config.tracked))?;

    let variance = csv_bytes(
        &strings(&["estimator", "coordinate", "mean", "variance"]),
        table.rows.iter().map(|r| {
            vec![r.estimator.clone(), r.coordinate.to_string(), r.mean.to_string(), r.variance.to_string()]
        }),
    )?;
    let trace = csv_bytes(
        &strings(&["estimator", "samples", "mean_f_evaluations"]),
        estimators.iter().zip(&table.evaluations).map(|((label, est), (_, evals))| {
            // LeGrad's cost is set by the quadrature order, not a sample count.
            let samples = match est.kind {
                EstimatorKind::LeGrad => String::new(),
                _ => est.samples.to_string(),
            };
            vec![label.clone(), samples, evals.to_string()]
        }),
    )?;
    let total = table
        .evaluations
        .iter()
        .map(|(_, e)| (e * config.calls as f64).round() as u64)
        .sum();
    let mut out = Outputs {
        total_f_evaluations: total,
        ..Outputs::default()
    };
    out.add("trace.csv", trace);
    out.add("variance.csv", variance);
    out.add("final_params.txt", model_text(&model).into_bytes());
    out.timing = csv_bytes(&strings(&["iteration", "elapsed_seconds"]), Vec::<Vec<String>>::new())?;
    Ok(out)
}

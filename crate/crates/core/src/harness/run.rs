//! Experiment runners that write CSV and JSON artifacts.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::config::{Alignment, ExperimentConfig, StudyKind, StudySpec};
use crate::analysis::{
    averaging_scaling_study, concentration_study, discretization_bias_study, em_ascent_study, probe_suite,
    ProbeConstants, ProbeSettings, SimulationSettings, AVERAGING_DEFAULT_T_END, BIAS_DEFAULT_T_END,
};
use crate::dynamics::{run, Algorithm, Budget, RunRecord, RunSummary, SdeConfig};
use crate::error::{Error, Result};
use crate::models::{write_logistic_csv, Model};

use super::config::BuiltModel;

/// Files written by one command.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Artifacts {
    pub paths: Vec<PathBuf>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// Comment lines embedding the resolved configuration.
fn preamble(config: &ExperimentConfig) -> Result<Vec<String>> {
    Ok(vec![format!("config: {}", serde_json::to_string(config)?)])
}

fn write_json<T: Serialize>(path: &Path, config: &ExperimentConfig, body: &T) -> Result<()> {
    #[derive(Serialize)]
    struct Wrapped<'a, T> {
        config: &'a ExperimentConfig,
        #[serde(flatten)]
        body: &'a T,
    }
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, &Wrapped { config, body })?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn out_path(config: &ExperimentConfig, name: &str) -> PathBuf {
    config
        .output
        .resolved_dir()
        .join(format!("{}_{name}", config.output.prefix))
}

fn algorithm_section(config: &ExperimentConfig) -> Result<&super::config::AlgorithmSpec> {
    config
        .algorithm
        .as_ref()
        .ok_or_else(|| Error::Config("missing [algorithm] section".into()))
}

/// One algorithm run: `<prefix>_<algorithm>.csv` (trajectory) and
/// `<prefix>_<algorithm>_summary.json`.
pub fn run_single(config: &ExperimentConfig) -> Result<Artifacts> {
    let spec = algorithm_section(config)?;
    let algorithm = spec
        .name
        .ok_or_else(|| Error::Config("algorithm.name is required for a single run".into()))?;
    let built = config.model.build()?;
    let model = built.as_model();
    let sde = spec.sde_for(algorithm, model, &config.output);
    let record = run(model, algorithm, &sde)?;

    let csv_path = out_path(config, &format!("{algorithm}.csv"));
    let mut w = create(&csv_path)?;
    record.write_csv(&mut w, &preamble(config)?)?;
    w.flush()?;

    #[derive(Serialize)]
    struct Body {
        summary: RunSummary,
    }
    let json_path = out_path(config, &format!("{algorithm}_summary.json"));
    write_json(
        &json_path,
        config,
        &Body {
            summary: record.summary(model),
        },
    )?;
    Ok(Artifacts {
        paths: vec![csv_path, json_path],
    })
}

/// Algorithms sharing one model and one budget.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonSuite {
    pub entries: Vec<(Algorithm, SdeConfig)>,
    pub alignment: Alignment,
}

impl ComparisonSuite {
    pub fn new(entries: Vec<(Algorithm, SdeConfig)>, alignment: Alignment) -> Result<Self> {
        if entries.len() < 2 {
            return Err(Error::Config(format!(
                "a comparison needs at least 2 entries, got {}",
                entries.len()
            )));
        }
        let budget = entries[0].1.budget;
        if entries.iter().any(|(_, c)| c.budget != budget) {
            return Err(Error::Config("comparison entries must share one budget".into()));
        }
        match (alignment, budget) {
            (Alignment::GradEvals, Budget::MaxGradEvals(_)) | (Alignment::WallClock, Budget::MaxSeconds(_)) => {}
            _ => {
                return Err(Error::Config(format!(
                    "{alignment:?} alignment does not match a {} budget",
                    budget.kind()
                )))
            }
        }
        Ok(Self { entries, alignment })
    }

    /// Runs every entry. Grad-eval budgets run in parallel; wall-clock
    /// budgets run one after another so entries do not compete for cores.
    pub fn run(&self, model: &dyn Model) -> Result<Vec<RunRecord>> {
        match self.alignment {
            Alignment::GradEvals => self.entries.par_iter().map(|(a, c)| run(model, *a, c)).collect(),
            Alignment::WallClock => self.entries.iter().map(|(a, c)| run(model, *a, c)).collect(),
        }
    }

    /// Long format: `algorithm,step,grad_evals,elapsed_s,theta_1,...`.
    pub fn write_csv<W: Write>(records: &[RunRecord], mut out: W, preamble: &[String]) -> Result<()> {
        for line in preamble {
            writeln!(out, "# {line}")?;
        }
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        let d = records.first().map_or(0, |r| r.terminal_theta.len());
        let mut header = vec!["algorithm".to_string()];
        header.extend(RunRecord::csv_header(d));
        w.write_record(&header)?;
        for r in records {
            for s in &r.samples {
                let mut row = vec![r.algorithm.to_string()];
                row.extend(RunRecord::csv_row(s));
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs the `[compare]` suite: `<prefix>_comparison.csv` (long format) and
/// `<prefix>_comparison.json` (terminal errors).
pub fn run_comparison(config: &ExperimentConfig) -> Result<Artifacts> {
    let spec = algorithm_section(config)?;
    let compare = config
        .compare
        .as_ref()
        .ok_or_else(|| Error::Config("missing [compare] section".into()))?;
    let built = config.model.build()?;
    let model = built.as_model();
    let entries = compare
        .algorithms
        .iter()
        .map(|&a| (a, spec.sde_for(a, model, &config.output)))
        .collect();
    let suite = ComparisonSuite::new(entries, compare.alignment)?;
    let records = suite.run(model)?;

    let csv_path = out_path(config, "comparison.csv");
    let mut w = create(&csv_path)?;
    ComparisonSuite::write_csv(&records, &mut w, &preamble(config)?)?;
    w.flush()?;

    #[derive(Serialize)]
    struct Body {
        alignment: Alignment,
        entries: Vec<RunSummary>,
    }
    let json_path = out_path(config, "comparison.json");
    write_json(
        &json_path,
        config,
        &Body {
            alignment: compare.alignment,
            entries: records.iter().map(|r| r.summary(model)).collect(),
        },
    )?;
    Ok(Artifacts {
        paths: vec![csv_path, json_path],
    })
}

fn gaussian(built: &BuiltModel) -> Result<&crate::models::GaussianHierarchicalModel> {
    built
        .gaussian()
        .ok_or_else(|| Error::UnsupportedOracle(built.as_model().name().to_string()))
}

fn settings(spec: &StudySpec, replicas: usize, burn_fraction: f64) -> SimulationSettings {
    SimulationSettings {
        t_end: spec.t_end,
        burn_fraction,
        n_replicas: spec.replicas.unwrap_or(replicas),
        seed: spec.seed,
        delta: None,
    }
}

/// Default sweeps and replica counts per study.
pub const AVERAGING_DEFAULT_EPSILONS: [f64; 4] = [0.2, 0.1, 0.05, 0.025];
pub const CONCENTRATION_DEFAULT_BETAS: [f64; 3] = [1e2, 1e3, 1e4];
pub const BIAS_DEFAULT_DELTAS: [f64; 3] = [4e-3, 2e-3, 1e-3];

/// Runs the `[study]` section: `<prefix>_<study>.json` and
/// `<prefix>_<study>.csv`.
pub fn run_study(config: &ExperimentConfig) -> Result<Artifacts> {
    let spec = config
        .study
        .as_ref()
        .ok_or_else(|| Error::Config("missing [study] section".into()))?;
    let built = config.model.build()?;
    let name = spec.name.as_str();
    let json_path = out_path(config, &format!("{name}.json"));
    let csv_path = out_path(config, &format!("{name}.csv"));
    match spec.name {
        StudyKind::AveragingScaling => {
            let m = gaussian(&built)?;
            let eps = spec.values.clone().unwrap_or(AVERAGING_DEFAULT_EPSILONS.to_vec());
            let mut s = settings(spec, 16, 0.05);
            s.t_end = s.t_end.or(Some(AVERAGING_DEFAULT_T_END));
            let report = averaging_scaling_study(m, &eps, spec.beta.unwrap_or(1e2), &s)?;
            write_json(&json_path, config, &report)?;
            report.write_csv(create(&csv_path)?)?;
        }
        StudyKind::Concentration => {
            let m = gaussian(&built)?;
            let betas = spec.values.clone().unwrap_or(CONCENTRATION_DEFAULT_BETAS.to_vec());
            let report = concentration_study(m, &betas, spec.theta0, &settings(spec, 2000, 0.5))?;
            write_json(&json_path, config, &report)?;
            report.write_csv(create(&csv_path)?)?;
        }
        StudyKind::EmAscent => {
            let trace = em_ascent_study(gaussian(&built)?, spec.theta0, spec.k_max);
            write_json(&json_path, config, &trace)?;
            trace.write_csv(create(&csv_path)?)?;
        }
        StudyKind::BiasDecay => {
            let m = gaussian(&built)?;
            let deltas = spec.values.clone().unwrap_or(BIAS_DEFAULT_DELTAS.to_vec());
            let mut s = settings(spec, 8, 0.01);
            s.t_end = s.t_end.or(Some(BIAS_DEFAULT_T_END));
            let report =
                discretization_bias_study(m, spec.epsilon.unwrap_or(0.1), spec.beta.unwrap_or(1e3), &deltas, &s)?;
            write_json(&json_path, config, &report)?;
            report.write_csv(create(&csv_path)?)?;
        }
        StudyKind::Probes => {
            let constants = match &built {
                BuiltModel::Gaussian(m) => ProbeConstants::gaussian(m),
                BuiltModel::Example(p) => ProbeConstants::example(p).ok_or_else(|| {
                    Error::Config(
                        "example potential violates its fast-variable condition; no constants to probe".into(),
                    )
                })?,
                BuiltModel::Logistic(_) => {
                    return Err(Error::Config("probes need the gaussian or an example model".into()))
                }
            };
            let defaults = ProbeSettings::default();
            let ps = ProbeSettings {
                n_samples: spec.samples.unwrap_or(defaults.n_samples),
                radius: spec.radius.unwrap_or(defaults.radius),
                seed: spec.seed,
                ..defaults
            };
            let reports = probe_suite(built.as_model(), &constants, &ps);
            #[derive(Serialize)]
            struct Body<'a> {
                constants: &'a ProbeConstants,
                all_pass: bool,
                probes: &'a [crate::analysis::ProbeReport],
            }
            write_json(
                &json_path,
                config,
                &Body {
                    constants: &constants,
                    all_pass: reports.iter().all(|r| r.pass),
                    probes: &reports,
                },
            )?;
            let header = [
                "probe",
                "parameter_name",
                "parameter",
                "samples",
                "pass",
                "worst_violation",
                "tolerance",
            ];
            let mut w = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(create(&csv_path)?);
            w.write_record(header)?;
            for r in &reports {
                w.write_record([
                    r.probe.clone(),
                    r.parameter_name.clone(),
                    r.parameter.to_string(),
                    r.samples.to_string(),
                    r.pass.to_string(),
                    r.worst_violation.to_string(),
                    r.tolerance.to_string(),
                ])?;
            }
            w.flush()?;
        }
    }
    Ok(Artifacts {
        paths: vec![json_path, csv_path],
    })
}

/// Writes the configured logistic dataset to `path` (or
/// `<out>/<prefix>_dataset.csv`).
pub fn export_dataset(config: &ExperimentConfig, path: Option<&Path>) -> Result<Artifacts> {
    let built = config.model.build()?;
    let BuiltModel::Logistic(m) = &built else {
        return Err(Error::Config("export-data needs a logistic model".into()));
    };
    let path = path.map_or_else(|| out_path(config, "dataset.csv"), Path::to_path_buf);
    let mut w = create(&path)?;
    write_logistic_csv(m, &mut w)?;
    w.flush()?;
    Ok(Artifacts { paths: vec![path] })
}

/// Process exit status for an error: 2 configuration, 3 divergence,
/// 4 missing oracle, 1 anything else.
pub fn exit_code(error: &Error) -> i32 {
    match error {
        Error::Config(_) | Error::DimensionMismatch { .. } | Error::Format(_) => 2,
        Error::Divergence { .. } => 3,
        Error::UnsupportedOracle(_) => 4,
        _ => 1,
    }
}

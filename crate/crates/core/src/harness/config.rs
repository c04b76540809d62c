//! Typed experiment configuration and its validation.

use std::collections::BTreeSet;
use std::fmt::Display;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::document::{split_list, Diagnostic, Document};
use crate::dynamics::{Algorithm, Budget, SdeConfig};
use crate::error::{Error, Result};
use crate::models::{
    read_logistic_csv, CovariateLaw, ExamplePotential, ExampleVariant, GaussianHierarchicalModel, LogisticDataOptions,
    LogisticRegressionModel, Model,
};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "MMLE_OUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum ModelSpec {
    Gaussian {
        /// Explicit observations; when absent they are generated.
        y: Option<Vec<f64>>,
        d_x: usize,
        theta_true: f64,
        sigma_x: f64,
        sigma_y: f64,
        data_seed: u64,
    },
    Logistic {
        d_x: usize,
        d_y: usize,
        theta_true: f64,
        sigma: f64,
        data_seed: u64,
        covariates: CovariateLaw,
        /// Dataset CSV to load instead of generating one.
        path: Option<PathBuf>,
    },
    Example {
        potential: ExamplePotential,
    },
}

/// A constructed model.
#[derive(Debug, Clone)]
pub enum BuiltModel {
    Gaussian(GaussianHierarchicalModel),
    Logistic(LogisticRegressionModel),
    Example(ExamplePotential),
}

impl BuiltModel {
    pub fn as_model(&self) -> &dyn Model {
        match self {
            BuiltModel::Gaussian(m) => m,
            BuiltModel::Logistic(m) => m,
            BuiltModel::Example(m) => m,
        }
    }

    pub fn gaussian(&self) -> Option<&GaussianHierarchicalModel> {
        match self {
            BuiltModel::Gaussian(m) => Some(m),
            _ => None,
        }
    }
}

impl ModelSpec {
    pub fn build(&self) -> Result<BuiltModel> {
        Ok(match self {
            ModelSpec::Gaussian {
                y,
                d_x,
                theta_true,
                sigma_x,
                sigma_y,
                data_seed,
            } => BuiltModel::Gaussian(match y {
                Some(y) => GaussianHierarchicalModel::new(y.clone(), *sigma_x, *sigma_y)?,
                None => GaussianHierarchicalModel::generate(*d_x, *theta_true, *sigma_x, *sigma_y, *data_seed)?,
            }),
            ModelSpec::Logistic {
                d_x,
                d_y,
                theta_true,
                sigma,
                data_seed,
                covariates,
                path,
            } => BuiltModel::Logistic(match path {
                Some(p) => read_logistic_csv(File::open(p)?, *sigma)?,
                None => LogisticDataOptions {
                    d_x: *d_x,
                    d_y: *d_y,
                    theta_true: *theta_true,
                    sigma: *sigma,
                    seed: *data_seed,
                    covariates: *covariates,
                }
                .generate()?,
            }),
            ModelSpec::Example { potential } => BuiltModel::Example(potential.clone()),
        })
    }

    /// `(d_θ, d_x)` without building the model, when knowable.
    fn dims(&self) -> Option<(usize, usize)> {
        match self {
            ModelSpec::Gaussian { y: Some(y), .. } => Some((1, y.len())),
            ModelSpec::Gaussian { d_x, .. } => Some((1, *d_x)),
            ModelSpec::Logistic { path: None, d_x, .. } => Some((1, *d_x)),
            ModelSpec::Logistic { .. } => None,
            ModelSpec::Example { potential } => Some((potential.dim, potential.dim)),
        }
    }
}

/// Shared run parameters. Each algorithm receives the equal-cost coupling
/// derived from `(gamma, n_inner)` (see [`SdeConfig::coupled_for`]), after
/// which explicit `epsilon` and `delta` values override it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSpec {
    pub name: Option<Algorithm>,
    pub gamma: f64,
    pub n_inner: usize,
    pub beta: f64,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub budget: Budget,
    pub seed: u64,
    pub theta0: Option<Vec<f64>>,
    pub x0: Option<Vec<f64>>,
}

impl AlgorithmSpec {
    /// Fully resolved config for `algorithm` on `model`.
    pub fn sde_for(&self, algorithm: Algorithm, model: &dyn Model, output: &OutputSpec) -> SdeConfig {
        let mut base = SdeConfig::new(
            self.gamma,
            self.budget,
            self.seed,
            self.theta0.clone().unwrap_or_else(|| vec![0.0; model.dim_theta()]),
            self.x0.clone().unwrap_or_else(|| vec![0.0; model.dim_latent()]),
        )
        .with_gamma(self.gamma)
        .with_n_inner(self.n_inner)
        .with_beta(self.beta);
        base.thin = output.thin;
        base.record_wall_clock = output.record_wall_clock;
        let mut c = base.coupled_for(algorithm);
        if let Some(e) = self.epsilon {
            c.epsilon = e;
        }
        if let Some(d) = self.delta {
            c.delta = d;
        }
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alignment {
    GradEvals,
    WallClock,
}

impl FromStr for Alignment {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "grad_evals" => Ok(Alignment::GradEvals),
            "wall_clock" => Ok(Alignment::WallClock),
            _ => Err(format!("unknown alignment `{s}` (expected grad_evals or wall_clock)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareSpec {
    pub algorithms: Vec<Algorithm>,
    pub alignment: Alignment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    AveragingScaling,
    Concentration,
    EmAscent,
    BiasDecay,
    Probes,
}

impl StudyKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            StudyKind::AveragingScaling => "averaging_scaling",
            StudyKind::Concentration => "concentration",
            StudyKind::EmAscent => "em_ascent",
            StudyKind::BiasDecay => "bias_decay",
            StudyKind::Probes => "probes",
        }
    }
}

impl FromStr for StudyKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        [
            StudyKind::AveragingScaling,
            StudyKind::Concentration,
            StudyKind::EmAscent,
            StudyKind::BiasDecay,
            StudyKind::Probes,
        ]
        .into_iter()
        .find(|k| k.as_str() == s)
        .ok_or_else(|| {
            format!("unknown study `{s}` (expected averaging_scaling, concentration, em_ascent, bias_decay or probes)")
        })
    }
}

/// Study parameters; unset values take per-study defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySpec {
    pub name: StudyKind,
    /// Sweep values (`ε`, `β` or `δ` depending on the study).
    pub values: Option<Vec<f64>>,
    pub replicas: Option<usize>,
    pub t_end: Option<f64>,
    pub beta: Option<f64>,
    pub epsilon: Option<f64>,
    pub theta0: f64,
    pub k_max: usize,
    pub seed: u64,
    pub samples: Option<usize>,
    pub radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSpec {
    pub dir: Option<PathBuf>,
    /// File-name prefix for every artifact.
    pub prefix: String,
    pub thin: Option<u64>,
    pub record_wall_clock: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: None,
            prefix: "mmle".into(),
            thin: None,
            record_wall_clock: false,
        }
    }
}

impl OutputSpec {
    /// `dir`, else `$MMLE_OUT_DIR`, else `mmle-out`.
    pub fn resolved_dir(&self) -> PathBuf {
        self.dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("mmle-out"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub algorithm: Option<AlgorithmSpec>,
    pub compare: Option<CompareSpec>,
    pub study: Option<StudySpec>,
    pub output: OutputSpec,
}

/// Command-line overrides applied on top of a configuration file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub epsilon: Option<f64>,
    pub beta: Option<f64>,
    pub delta: Option<f64>,
    pub gamma: Option<f64>,
    pub n: Option<usize>,
    pub steps: Option<u64>,
    pub seconds: Option<f64>,
    pub grad_evals: Option<u64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, doc: &mut Document) {
        let pairs: [(&str, Option<String>); 6] = [
            ("epsilon", self.epsilon.map(|v| v.to_string())),
            ("beta", self.beta.map(|v| v.to_string())),
            ("delta", self.delta.map(|v| v.to_string())),
            ("gamma", self.gamma.map(|v| v.to_string())),
            ("n", self.n.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
        ];
        for (k, v) in pairs {
            if let Some(v) = v {
                doc.set("algorithm", k, v);
            }
        }
        let budget = [
            ("max_steps", self.steps.map(|v| v.to_string())),
            ("max_seconds", self.seconds.map(|v| v.to_string())),
            ("max_grad_evals", self.grad_evals.map(|v| v.to_string())),
        ];
        if budget.iter().any(|(_, v)| v.is_some()) {
            for (k, v) in budget {
                match v {
                    Some(v) => doc.set("algorithm", k, v),
                    None => doc.remove("algorithm", k),
                }
            }
        }
        if let Some(out) = &self.out {
            doc.set("output", "dir", out.to_string_lossy());
        }
    }
}

const KNOWN: &[(&str, &[&str])] = &[
    (
        "model",
        &[
            "name",
            "y",
            "d_x",
            "d_y",
            "theta_true",
            "sigma_x",
            "sigma_y",
            "sigma",
            "data_seed",
            "covariates",
            "path",
            "dim",
            "a",
            "a_tilde",
            "c_h",
            "c_b",
            "c_g",
        ],
    ),
    (
        "algorithm",
        &[
            "name",
            "epsilon",
            "beta",
            "delta",
            "gamma",
            "n",
            "max_steps",
            "max_seconds",
            "max_grad_evals",
            "seed",
            "theta0",
            "x0",
        ],
    ),
    ("compare", &["algorithms", "alignment"]),
    (
        "study",
        &[
            "name", "values", "replicas", "t_end", "beta", "epsilon", "theta0", "k_max", "seed", "samples", "radius",
        ],
    ),
    ("output", &["dir", "prefix", "thin", "record_wall_clock"]),
];

/// Typed field access that accumulates diagnostics instead of stopping.
struct Reader<'a> {
    doc: &'a Document,
    diags: Vec<Diagnostic>,
}

impl<'a> Reader<'a> {
    fn raw(&self, section: &str, key: &str) -> Option<(&'a str, Option<usize>)> {
        self.doc.get(section, key).map(|e| (e.value.as_str(), e.line))
    }

    fn err(&mut self, section: &str, key: &str, message: impl Into<String>) {
        let line = self.doc.get(section, key).and_then(|e| e.line);
        self.diags
            .push(Diagnostic::new(line, format!("{section}.{key}"), message));
    }

    fn opt<T: FromStr>(&mut self, section: &str, key: &str) -> Option<T>
    where
        T::Err: Display,
    {
        let (v, _) = self.raw(section, key)?;
        match v.parse::<T>() {
            Ok(t) => Some(t),
            Err(e) => {
                self.err(section, key, format!("cannot parse `{v}`: {e}"));
                None
            }
        }
    }

    fn or<T: FromStr>(&mut self, section: &str, key: &str, default: T) -> T
    where
        T::Err: Display,
    {
        self.opt(section, key).unwrap_or(default)
    }

    fn list(&mut self, section: &str, key: &str) -> Option<Vec<f64>> {
        let (v, _) = self.raw(section, key)?;
        let parsed: std::result::Result<Vec<f64>, _> = split_list(v).into_iter().map(str::parse).collect();
        match parsed {
            Ok(l) => Some(l),
            Err(e) => {
                self.err(section, key, format!("cannot parse list `{v}`: {e}"));
                None
            }
        }
    }

    /// Checks `v > 0` (and finite unless `allow_inf`).
    fn positive(&mut self, section: &str, key: &str, v: f64, allow_inf: bool) -> f64 {
        if v.is_nan() || v <= 0.0 || (!allow_inf && v.is_infinite()) {
            self.err(
                section,
                key,
                format!(
                    "must be positive{}, got {v}",
                    if allow_inf { "" } else { " and finite" }
                ),
            );
        }
        v
    }

    fn positive_opt(&mut self, section: &str, key: &str) -> Option<f64> {
        self.opt::<f64>(section, key)
            .map(|v| self.positive(section, key, v, false))
    }

    fn at_least_one(&mut self, section: &str, key: &str, v: usize) -> usize {
        if v == 0 {
            self.err(section, key, "must be at least 1");
        }
        v
    }
}

fn parse_model(r: &mut Reader<'_>) -> Option<ModelSpec> {
    let Some((name, _)) = r.raw("model", "name") else {
        r.diags.push(Diagnostic::new(
            r.doc.sections.get("model").and_then(|s| s.line),
            "model.name",
            "missing model name (gaussian, logistic, example_difference or example_product)",
        ));
        return None;
    };
    let name = name.to_ascii_lowercase();
    let s = "model";
    match name.as_str() {
        "gaussian" => {
            let y = r.list(s, "y");
            if y.as_ref().is_some_and(|y| y.is_empty()) {
                r.err(s, "y", "needs at least one observation");
            }
            let d_x = r.or(s, "d_x", 10usize);
            let d_x = r.at_least_one(s, "d_x", d_x);
            let sigma_x = r.or(s, "sigma_x", 1.0);
            let sigma_y = r.or(s, "sigma_y", 1.0);
            Some(ModelSpec::Gaussian {
                y,
                d_x,
                theta_true: r.or(s, "theta_true", 1.0),
                sigma_x: r.positive(s, "sigma_x", sigma_x, false),
                sigma_y: r.positive(s, "sigma_y", sigma_y, false),
                data_seed: r.or(s, "data_seed", 0),
            })
        }
        "logistic" => {
            let d_x = r.or(s, "d_x", 10usize);
            let d_y = r.or(s, "d_y", 100usize);
            let sigma = r.or(s, "sigma", 1.0);
            let covariates = match r.raw(s, "covariates").map(|(v, _)| v) {
                None | Some("normal") | Some("standard_normal") => CovariateLaw::StandardNormal,
                Some("half_normal") => CovariateLaw::HalfNormal,
                Some(other) => {
                    r.err(
                        s,
                        "covariates",
                        format!("unknown law `{other}` (expected normal or half_normal)"),
                    );
                    CovariateLaw::StandardNormal
                }
            };
            let path: Option<PathBuf> = r.raw(s, "path").map(|(v, _)| PathBuf::from(v));
            if let Some(p) = path.as_ref().filter(|p| !p.exists()) {
                r.err(s, "path", format!("dataset `{}` does not exist", p.display()));
            }
            Some(ModelSpec::Logistic {
                d_x: r.at_least_one(s, "d_x", d_x),
                d_y: r.at_least_one(s, "d_y", d_y),
                theta_true: r.or(s, "theta_true", 1.0),
                sigma: r.positive(s, "sigma", sigma, false),
                data_seed: r.or(s, "data_seed", 0),
                covariates,
                path,
            })
        }
        "example_difference" | "example_product" => {
            let dim = r.or(s, "dim", 2usize);
            let dim = r.at_least_one(s, "dim", dim);
            let a = r.or(s, "a", 1.0);
            let a = r.positive(s, "a", a, false);
            let a_tilde = r.or(s, "a_tilde", 1.0);
            let a_tilde = r.positive(s, "a_tilde", a_tilde, false);
            let variant = if name == "example_difference" {
                ExampleVariant::Difference {
                    c_h: r.or(s, "c_h", 0.5),
                }
            } else {
                ExampleVariant::Product {
                    c_b: r.or(s, "c_b", 0.5),
                    c_g: r.or(s, "c_g", 0.5),
                }
            };
            ExamplePotential::new(dim, a, a_tilde, variant)
                .ok()
                .map(|potential| ModelSpec::Example { potential })
        }
        other => {
            r.err(s, "name", format!("unknown model `{other}`"));
            None
        }
    }
}

fn parse_algorithm(r: &mut Reader<'_>, dims: Option<(usize, usize)>) -> AlgorithmSpec {
    let s = "algorithm";
    let name = r.opt::<Algorithm>(s, "name");
    let gamma = r.or(s, "gamma", 0.01);
    let gamma = r.positive(s, "gamma", gamma, false);
    let n_inner = r.or(s, "n", 100usize);
    let n_inner = r.at_least_one(s, "n", n_inner);
    let beta = r.or(s, "beta", 1e4);
    let beta = r.positive(s, "beta", beta, true);
    let epsilon = r.positive_opt(s, "epsilon");
    let delta = r.opt::<f64>(s, "delta");
    // SOUL accepts δ = 0 (frozen parameter).
    if let Some(d) = delta {
        let frozen_ok = name == Some(Algorithm::Soul) && d == 0.0;
        if !frozen_ok && !(d > 0.0 && d.is_finite()) {
            r.err(s, "delta", format!("must be positive and finite, got {d}"));
        }
    }
    let budgets: Vec<Budget> = [
        r.opt::<u64>(s, "max_steps").map(Budget::MaxSteps),
        r.opt::<f64>(s, "max_seconds").map(Budget::MaxSeconds),
        r.opt::<u64>(s, "max_grad_evals").map(Budget::MaxGradEvals),
    ]
    .into_iter()
    .flatten()
    .collect();
    let budget = match budgets.as_slice() {
        [b] => *b,
        _ => {
            let line = r.doc.sections.get(s).and_then(|sec| sec.line);
            r.diags.push(Diagnostic::new(
                line,
                "algorithm",
                format!(
                    "exactly one budget (max_steps, max_seconds or max_grad_evals) must be set, found {}",
                    budgets.len()
                ),
            ));
            Budget::MaxSteps(0)
        }
    };
    if let Budget::MaxSeconds(t) = budget {
        if !(t >= 0.0 && t.is_finite()) {
            r.err(s, "max_seconds", format!("must be non-negative, got {t}"));
        }
    }
    let theta0 = r.list(s, "theta0");
    let x0 = r.list(s, "x0");
    if let Some((dt, dx)) = dims {
        if let Some(t) = theta0.as_ref().filter(|t| t.len() != dt) {
            r.err(s, "theta0", format!("expected {dt} values, got {}", t.len()));
        }
        if let Some(x) = x0.as_ref().filter(|x| x.len() != dx) {
            r.err(s, "x0", format!("expected {dx} values, got {}", x.len()));
        }
    }
    AlgorithmSpec {
        name,
        gamma,
        n_inner,
        beta,
        epsilon,
        delta,
        budget,
        seed: r.or(s, "seed", 0),
        theta0,
        x0,
    }
}

fn parse_compare(r: &mut Reader<'_>, algorithm: Option<&AlgorithmSpec>) -> CompareSpec {
    let s = "compare";
    let algorithms = match r.raw(s, "algorithms") {
        Some((v, _)) => {
            let mut out = Vec::new();
            for item in split_list(v) {
                match item.parse::<Algorithm>() {
                    Ok(a) => out.push(a),
                    Err(e) => r.err(s, "algorithms", e.to_string()),
                }
            }
            out
        }
        None => vec![Algorithm::Sfla, Algorithm::Soul, Algorithm::Pgd, Algorithm::Ipla],
    };
    if algorithms.len() < 2 {
        r.err(s, "algorithms", "a comparison needs at least 2 algorithms");
    }
    if algorithms.iter().collect::<BTreeSet<_>>().len() != algorithms.len() {
        r.err(s, "algorithms", "algorithms must be distinct");
    }
    let budget = algorithm.map(|a| a.budget);
    let default_alignment = match budget {
        Some(Budget::MaxSeconds(_)) => Alignment::WallClock,
        _ => Alignment::GradEvals,
    };
    let alignment = r.or(s, "alignment", default_alignment);
    match (alignment, budget) {
        (_, None) => r.diags.push(Diagnostic::new(
            None,
            "algorithm",
            "a comparison needs an [algorithm] section with a budget",
        )),
        (Alignment::GradEvals, Some(Budget::MaxGradEvals(_))) | (Alignment::WallClock, Some(Budget::MaxSeconds(_))) => {
        }
        (Alignment::GradEvals, Some(_)) => r.err(s, "alignment", "grad_evals alignment needs a max_grad_evals budget"),
        (Alignment::WallClock, Some(_)) => r.err(s, "alignment", "wall_clock alignment needs a max_seconds budget"),
    }
    CompareSpec { algorithms, alignment }
}

fn parse_study(r: &mut Reader<'_>) -> Option<StudySpec> {
    let s = "study";
    let Some((name, _)) = r.raw(s, "name") else {
        r.diags.push(Diagnostic::new(None, "study.name", "missing study name"));
        return None;
    };
    let name = match name.parse::<StudyKind>() {
        Ok(k) => k,
        Err(e) => {
            r.err(s, "name", e);
            return None;
        }
    };
    let values = r.list(s, "values");
    if let Some(v) = &values {
        if v.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
            r.err(s, "values", "sweep values must be strictly positive");
        }
        let mut sorted = v.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            r.err(s, "values", "sweep values must be distinct");
        }
    }
    let replicas = r.opt::<usize>(s, "replicas");
    if replicas.is_some_and(|n| n < 2) {
        r.err(s, "replicas", "need at least 2 replicas");
    }
    Some(StudySpec {
        name,
        values,
        replicas,
        t_end: r.positive_opt(s, "t_end"),
        beta: r.positive_opt(s, "beta"),
        epsilon: r.positive_opt(s, "epsilon"),
        theta0: r.or(s, "theta0", 0.0),
        k_max: r.or(s, "k_max", 50),
        seed: r.or(s, "seed", 0),
        samples: r.opt(s, "samples"),
        radius: r.positive_opt(s, "radius"),
    })
}

fn parse_output(r: &mut Reader<'_>) -> OutputSpec {
    let s = "output";
    let thin = r.opt::<u64>(s, "thin");
    if thin == Some(0) {
        r.err(s, "thin", "must be at least 1");
    }
    OutputSpec {
        dir: r.raw(s, "dir").map(|(v, _)| PathBuf::from(v)),
        prefix: r
            .raw(s, "prefix")
            .map_or_else(|| "mmle".to_string(), |(v, _)| v.to_string()),
        thin,
        record_wall_clock: r.or(s, "record_wall_clock", false),
    }
}

/// Validates `doc` and returns the typed config, or every diagnostic found.
pub fn parse_document(doc: &Document) -> std::result::Result<ExperimentConfig, Vec<Diagnostic>> {
    let mut r = Reader { doc, diags: Vec::new() };
    for (name, section) in &doc.sections {
        match KNOWN.iter().find(|(s, _)| s == name) {
            None => r
                .diags
                .push(Diagnostic::new(section.line, name.as_str(), "unknown section")),
            Some((_, keys)) => {
                for (k, e) in &section.entries {
                    if !keys.contains(&k.as_str()) {
                        r.diags
                            .push(Diagnostic::new(e.line, format!("{name}.{k}"), "unknown key"));
                    }
                }
            }
        }
    }
    if !doc.has_section("model") {
        r.diags.push(Diagnostic::new(None, "model", "missing [model] section"));
    }
    let model = parse_model(&mut r);
    let algorithm = doc
        .has_section("algorithm")
        .then(|| parse_algorithm(&mut r, model.as_ref().and_then(ModelSpec::dims)));
    let compare = doc
        .has_section("compare")
        .then(|| parse_compare(&mut r, algorithm.as_ref()));
    let study = if doc.has_section("study") {
        parse_study(&mut r)
    } else {
        None
    };
    let output = parse_output(&mut r);

    if compare.is_none() && study.is_none() {
        match &algorithm {
            None => r
                .diags
                .push(Diagnostic::new(None, "algorithm", "missing [algorithm] section")),
            Some(a) if a.name.is_none() => r.diags.push(Diagnostic::new(
                doc.sections.get("algorithm").and_then(|s| s.line),
                "algorithm.name",
                "missing algorithm name",
            )),
            Some(_) => {}
        }
    }
    if let (Some(st), Some(m)) = (&study, &model) {
        let supported = match m {
            ModelSpec::Gaussian { .. } => true,
            ModelSpec::Example { .. } => st.name == StudyKind::Probes,
            ModelSpec::Logistic { .. } => false,
        };
        if !supported {
            r.diags.push(Diagnostic::new(
                None,
                "study.name",
                format!("study `{}` is not available for this model", st.name.as_str()),
            ));
        }
    }
    if let (Some(alg), Some(m)) = (&algorithm, &model) {
        let uses_oracle = alg.name == Some(Algorithm::AveragedUla)
            || compare
                .as_ref()
                .is_some_and(|c| c.algorithms.contains(&Algorithm::AveragedUla));
        if uses_oracle && !matches!(m, ModelSpec::Gaussian { .. }) {
            r.diags.push(Diagnostic::new(
                None,
                "algorithm.name",
                "averaged_ula needs a model with an analytic marginal",
            ));
        }
    }

    match (model, r.diags.is_empty()) {
        (Some(model), true) => Ok(ExperimentConfig {
            model,
            algorithm,
            compare,
            study,
            output,
        }),
        _ => Err(r.diags),
    }
}

/// Reads, overrides and validates a configuration file.
pub fn load_config_with(path: &Path, overrides: &Overrides) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    let (mut doc, diags) = Document::parse(&text);
    if !diags.is_empty() {
        return Err(diagnostics_error(&diags));
    }
    overrides.apply(&mut doc);
    parse_document(&doc).map_err(|d| diagnostics_error(&d))
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    load_config_with(path, &Overrides::default())
}

/// Full validation without execution; an empty list means the file is valid.
pub fn validate_config(path: &Path) -> Result<Vec<Diagnostic>> {
    let text = std::fs::read_to_string(path)?;
    let (doc, mut diags) = Document::parse(&text);
    if let Err(more) = parse_document(&doc) {
        diags.extend(more);
    }
    Ok(diags)
}

pub(crate) fn diagnostics_error(diags: &[Diagnostic]) -> Error {
    let lines: Vec<String> = diags.iter().map(|d| d.to_string()).collect();
    Error::Config(lines.join("; "))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> std::result::Result<ExperimentConfig, Vec<Diagnostic>> {
        let (doc, d) = Document::parse(text);
        assert!(d.is_empty(), "{d:?}");
        parse_document(&doc)
    }

    const MINIMAL: &str = "[model]\nname = gaussian\ny = 1, 3\n[algorithm]\nname = sfla\nmax_steps = 10\n";

    #[test]
    fn minimal_config_resolves_coupling() {
        let c = parse(MINIMAL).unwrap();
        let m = c.model.build().unwrap();
        let alg = c.algorithm.unwrap();
        let sde = alg.sde_for(Algorithm::Sfla, m.as_model(), &c.output);
        assert_eq!((sde.epsilon, sde.delta, sde.beta), (0.01, 1e-4, 1e4));
        assert_eq!(sde.x0, vec![0.0, 0.0]);
        let soul = alg.sde_for(Algorithm::Soul, m.as_model(), &c.output);
        assert_eq!((soul.delta, soul.n_inner), (0.01, 100));
    }

    #[test]
    fn explicit_values_override_coupling() {
        let c = parse(&format!("{MINIMAL}epsilon = 0.05\ndelta = 1e-3\n")).unwrap();
        let m = c.model.build().unwrap();
        let sde = c.algorithm.unwrap().sde_for(Algorithm::Sfla, m.as_model(), &c.output);
        assert_eq!((sde.epsilon, sde.delta), (0.05, 1e-3));
    }

    #[test]
    fn zero_epsilon_and_negative_beta_are_named() {
        let d = parse(&format!("{MINIMAL}epsilon = 0\nbeta = -1\n")).unwrap_err();
        let fields: Vec<&str> = d.iter().map(|d| d.field.as_str()).collect();
        assert_eq!(fields, ["algorithm.beta", "algorithm.epsilon"]);
        assert_eq!(d[0].line, Some(8));
    }

    #[test]
    fn exactly_one_budget() {
        let d = parse(&format!("{MINIMAL}max_seconds = 1\n")).unwrap_err();
        assert_eq!(d.len(), 1);
        assert!(d[0].message.contains("exactly one budget"));
        let d = parse("[model]\nname = gaussian\n[algorithm]\nname = sfla\n").unwrap_err();
        assert!(d[0].message.contains("exactly one budget"));
    }

    #[test]
    fn unknown_names_are_reported() {
        let d =
            parse("[model]\nname = poisson\n[algorithm]\nname = hmc\nmax_steps = 1\nbogus = 2\n[extra]\n").unwrap_err();
        let fields: Vec<&str> = d.iter().map(|d| d.field.as_str()).collect();
        assert!(fields.contains(&"model.name"));
        assert!(fields.contains(&"algorithm.name"));
        assert!(fields.contains(&"algorithm.bogus"));
        assert!(fields.contains(&"extra"));
    }

    #[test]
    fn overrides_replace_budget() {
        let (mut doc, _) = Document::parse(MINIMAL);
        Overrides {
            grad_evals: Some(40),
            beta: Some(5.0),
            ..Default::default()
        }
        .apply(&mut doc);
        let a = parse_document(&doc).unwrap().algorithm.unwrap();
        assert_eq!((a.budget, a.beta), (Budget::MaxGradEvals(40), 5.0));
    }

    #[test]
    fn compare_and_study_sections() {
        let c = parse(
            "[model]\nname = gaussian\n[algorithm]\nmax_grad_evals = 1000\n[compare]\nalgorithms = sfla, pgd\n[study]\nname = probes\n",
        )
        .unwrap();
        assert_eq!(c.compare.unwrap().algorithms, [Algorithm::Sfla, Algorithm::Pgd]);
        assert_eq!(c.study.unwrap().name, StudyKind::Probes);
        let d =
            parse("[model]\nname = gaussian\n[algorithm]\nmax_steps = 10\n[compare]\nalgorithms = sfla\n").unwrap_err();
        assert_eq!(d.len(), 2, "{d:?}");
    }
}

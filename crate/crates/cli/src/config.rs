//! Strict TOML experiment configuration with per-system defaults.
//!
//! Unknown keys are rejected everywhere. Fields whose defaults depend on
//! the system (thresholds, filter passes, series length) are optional in
//! the file and resolved against the Table defaults of the selected
//! system; the resolved form round-trips through TOML losslessly.

use anyhow::{bail, Context};
use minit::dynamics::{LorenzModel, MackeyGlassModel, Microstate, SystemModel};
use minit::observation::{NoiseDistribution, ObservationOperator};
use minit::optim::{OptimizerKind, OptimizerSpec};
use minit::pipeline::PipelineConfig;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Which reference system an experiment runs on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemSection {
    Lorenz {
        #[serde(default = "defaults::lorenz_sigma")]
        sigma: f64,
        #[serde(default = "defaults::lorenz_rho")]
        rho: f64,
        #[serde(default = "defaults::lorenz_beta")]
        beta: f64,
        #[serde(default = "defaults::lorenz_dt")]
        dt: f64,
    },
    MackeyGlass {
        #[serde(default = "defaults::mg_a")]
        a: f64,
        #[serde(default = "defaults::mg_b")]
        b: f64,
        #[serde(default = "defaults::mg_c")]
        c: f64,
        #[serde(default = "defaults::mg_t_d")]
        t_d: f64,
        #[serde(default = "defaults::mg_n_x")]
        n_x: usize,
    },
}

mod defaults {
    pub fn lorenz_sigma() -> f64 {
        10.0
    }
    pub fn lorenz_rho() -> f64 {
        28.0
    }
    pub fn lorenz_beta() -> f64 {
        8.0 / 3.0
    }
    pub fn lorenz_dt() -> f64 {
        0.01
    }
    pub fn mg_a() -> f64 {
        0.2
    }
    pub fn mg_b() -> f64 {
        0.1
    }
    pub fn mg_c() -> f64 {
        10.0
    }
    pub fn mg_t_d() -> f64 {
        25.0
    }
    pub fn mg_n_x() -> usize {
        50
    }
}

/// Runtime dispatch over the two reference systems.
#[derive(Debug, Clone)]
pub enum Model {
    Lorenz(LorenzModel),
    MackeyGlass(MackeyGlassModel),
}

impl SystemModel for Model {
    fn dimension(&self) -> usize {
        match self {
            Model::Lorenz(m) => m.dimension(),
            Model::MackeyGlass(m) => m.dimension(),
        }
    }
    fn dt(&self) -> f64 {
        match self {
            Model::Lorenz(m) => m.dt(),
            Model::MackeyGlass(m) => SystemModel::dt(m),
        }
    }
    fn step_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Model::Lorenz(m) => m.step_into(x, out),
            Model::MackeyGlass(m) => m.step_into(x, out),
        }
    }
    fn sample_box(&self) -> Vec<(f64, f64)> {
        match self {
            Model::Lorenz(m) => m.sample_box(),
            Model::MackeyGlass(m) => m.sample_box(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationSection {
    #[serde(default = "default_operator")]
    pub operator: ObservationOperator,
    /// Number of sampling intervals: the series has `T + 1` points.
    #[serde(rename = "T")]
    pub t_count: Option<usize>,
    #[serde(default = "default_m")]
    pub m: usize,
}

fn default_operator() -> ObservationOperator {
    ObservationOperator::CubeSum
}

fn default_m() -> usize {
    2
}

impl Default for ObservationSection {
    fn default() -> Self {
        Self {
            operator: default_operator(),
            t_count: None,
            m: default_m(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    #[serde(default = "default_noise_ratio")]
    pub ratio: f64,
    #[serde(default)]
    pub distribution: NoiseKind,
    #[serde(default = "default_beta_alpha")]
    pub beta_alpha: f64,
    #[serde(default = "default_beta_beta")]
    pub beta_beta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    #[default]
    Gaussian,
    Beta,
}

fn default_noise_ratio() -> f64 {
    0.3
}
fn default_beta_alpha() -> f64 {
    5.0
}
fn default_beta_beta() -> f64 {
    2.0
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            ratio: default_noise_ratio(),
            distribution: NoiseKind::Gaussian,
            beta_alpha: default_beta_alpha(),
            beta_beta: default_beta_beta(),
        }
    }
}

impl NoiseSection {
    pub fn distribution(&self) -> NoiseDistribution {
        match self.distribution {
            NoiseKind::Gaussian => NoiseDistribution::Gaussian,
            NoiseKind::Beta => NoiseDistribution::Beta {
                alpha: self.beta_alpha,
                beta: self.beta_beta,
            },
        }
    }
}

/// Pipeline thresholds and budgets; system-dependent fields are optional
/// and resolved from the Table defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct PipelineSection {
    pub alpha_rough: Option<f64>,
    pub beta_rough: Option<f64>,
    pub alpha_refine: Option<f64>,
    pub beta_refine: Option<f64>,
    pub r0: Option<f64>,
    pub q: Option<usize>,
    #[serde(default = "default_optimizer")]
    pub optimizer: String,
    /// Optional hyperparameter overrides applied to the optimizer's
    /// literature defaults.
    #[serde(default)]
    pub hyper: HyperSection,
    pub bound_budget: Option<usize>,
    pub refine_budget: Option<usize>,
    pub patience: Option<usize>,
    pub guess_retries: Option<usize>,
}

fn default_optimizer() -> String {
    "adam".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct HyperSection {
    pub eta: Option<f64>,
    pub gamma: Option<f64>,
    pub rho: Option<f64>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub eps: Option<f64>,
}

impl HyperSection {
    /// Applies the overrides onto a spec built from literature defaults.
    pub fn apply(&self, kind: OptimizerKind) -> OptimizerSpec {
        let mut spec = OptimizerSpec::defaults(kind);
        match &mut spec {
            OptimizerSpec::Sgd { eta } => {
                set(eta, self.eta);
            }
            OptimizerSpec::Momentum { eta, gamma } | OptimizerSpec::Nesterov { eta, gamma } => {
                set(eta, self.eta);
                set(gamma, self.gamma);
            }
            OptimizerSpec::Adagrad { eta, eps } => {
                set(eta, self.eta);
                set(eps, self.eps);
            }
            OptimizerSpec::Adadelta { rho, eps } => {
                set(rho, self.rho);
                set(eps, self.eps);
            }
            OptimizerSpec::RmsProp { eta, rho, eps } => {
                set(eta, self.eta);
                set(rho, self.rho);
                set(eps, self.eps);
            }
            OptimizerSpec::Adam {
                eta,
                beta1,
                beta2,
                eps,
            }
            | OptimizerSpec::AmsGrad {
                eta,
                beta1,
                beta2,
                eps,
            } => {
                set(eta, self.eta);
                set(beta1, self.beta1);
                set(beta2, self.beta2);
                set(eps, self.eps);
            }
            OptimizerSpec::YamAdam { eps } => {
                set(eps, self.eps);
            }
        }
        spec
    }
}

fn set(slot: &mut f64, value: Option<f64>) {
    if let Some(v) = value {
        *slot = v;
    }
}

/// A full experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
    /// 0 means one worker per core.
    #[serde(default)]
    pub workers: usize,
    #[serde(default = "default_ensemble_size")]
    pub ensemble_size: usize,
    /// Prediction window in observation samples; resolved per system.
    pub prediction_window: Option<usize>,
    pub system: SystemSection,
    #[serde(default)]
    pub observation: ObservationSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub pipeline: PipelineSection,
}

fn default_output_dir() -> String {
    std::env::var("MINIT_OUTPUT_DIR").unwrap_or_else(|_| "out".into())
}

fn default_ensemble_size() -> usize {
    100
}

impl ExperimentConfig {
    /// Built-in defaults for a named system.
    pub fn for_system(kind: &str) -> anyhow::Result<Self> {
        let system = match kind {
            "lorenz" => SystemSection::Lorenz {
                sigma: defaults::lorenz_sigma(),
                rho: defaults::lorenz_rho(),
                beta: defaults::lorenz_beta(),
                dt: defaults::lorenz_dt(),
            },
            "mackey_glass" => SystemSection::MackeyGlass {
                a: defaults::mg_a(),
                b: defaults::mg_b(),
                c: defaults::mg_c(),
                t_d: defaults::mg_t_d(),
                n_x: defaults::mg_n_x(),
            },
            other => bail!("unknown system '{other}' (use lorenz or mackey_glass)"),
        };
        let mut cfg = Self {
            seed: 0,
            output_dir: default_output_dir(),
            workers: 0,
            ensemble_size: default_ensemble_size(),
            prediction_window: None,
            system,
            observation: ObservationSection::default(),
            noise: NoiseSection::default(),
            pipeline: PipelineSection::default(),
        };
        cfg.resolve();
        Ok(cfg)
    }

    /// Parses a config file strictly and resolves system defaults.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: ExperimentConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        cfg.resolve();
        Ok(cfg)
    }

    pub fn is_lorenz(&self) -> bool {
        matches!(self.system, SystemSection::Lorenz { .. })
    }

    /// Fills every optional field with the Table default of the system.
    pub fn resolve(&mut self) {
        let lorenz = self.is_lorenz();
        let d = |slot: &mut Option<f64>, l: f64, m: f64| {
            slot.get_or_insert(if lorenz { l } else { m });
        };
        d(&mut self.pipeline.alpha_rough, 0.05, 0.05);
        d(&mut self.pipeline.beta_rough, 0.5, 0.5);
        d(&mut self.pipeline.alpha_refine, 1e-4, 1e-5);
        d(&mut self.pipeline.beta_refine, 0.8, 0.2);
        d(&mut self.pipeline.r0, 2.02, 2.41);
        self.pipeline.q.get_or_insert(if lorenz { 4 } else { 5 });
        self.pipeline.bound_budget.get_or_insert(200_000);
        self.pipeline.refine_budget.get_or_insert(30_000);
        self.pipeline.patience.get_or_insert(200);
        self.pipeline.guess_retries.get_or_insert(10);
        self.observation
            .t_count
            .get_or_insert(if lorenz { 50 } else { 25 });
        self.prediction_window
            .get_or_insert(if lorenz { 600 } else { 900 });
    }

    /// Instantiates the dynamical model.
    pub fn model(&self) -> anyhow::Result<Model> {
        Ok(match self.system {
            SystemSection::Lorenz {
                sigma,
                rho,
                beta,
                dt,
            } => Model::Lorenz(LorenzModel::new(sigma, rho, beta, dt)?),
            SystemSection::MackeyGlass { a, b, c, t_d, n_x } => {
                Model::MackeyGlass(MackeyGlassModel::new(a, b, c, t_d, n_x)?)
            }
        })
    }

    pub fn operator(&self) -> ObservationOperator {
        self.observation.operator
    }

    pub fn t_count(&self) -> usize {
        self.observation.t_count.expect("resolved")
    }

    pub fn m(&self) -> usize {
        self.observation.m
    }

    pub fn window(&self) -> usize {
        self.prediction_window.expect("resolved")
    }

    pub fn optimizer_kind(&self) -> anyhow::Result<OptimizerKind> {
        Ok(self.pipeline.optimizer.parse()?)
    }

    /// Builds the core pipeline configuration. `noisy` selects whether the
    /// preprocess stage filters: clean series carry no noise to reduce, so
    /// noiseless variants run with q = 0.
    pub fn pipeline_config(&self, noisy: bool) -> anyhow::Result<PipelineConfig> {
        let kind = self.optimizer_kind()?;
        let p = &self.pipeline;
        Ok(PipelineConfig {
            alpha_rough: p.alpha_rough.expect("resolved"),
            beta_rough: p.beta_rough.expect("resolved"),
            alpha_refine: p.alpha_refine.expect("resolved"),
            beta_refine: p.beta_refine.expect("resolved"),
            r0: p.r0.expect("resolved"),
            q: if noisy { p.q.expect("resolved") } else { 0 },
            optimizer: p.hyper.apply(kind),
            bound_budget: p.bound_budget.expect("resolved"),
            refine_budget: p.refine_budget.expect("resolved"),
            patience: p.patience.expect("resolved"),
            guess_retries: p.guess_retries.expect("resolved"),
            seed: self.seed,
            basins: Vec::new(),
        })
    }

    /// Canonical TOML of the resolved config.
    pub fn canonical_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

/// Truth states used by validation; shared across noise variants.
pub fn format_state(x: &Microstate) -> Vec<f64> {
    x.to_vec()
}

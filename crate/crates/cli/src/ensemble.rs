//! Seeded parallel ensemble execution and aggregation.
//!
//! Every run derives independent random streams for ground-truth sampling,
//! noise, and guess directions from `(master seed, run id, stage)`, so runs
//! are bit-reproducible in isolation, ground truths are shared between the
//! noiseless and noisy variants of an experiment, and aggregate outputs do
//! not depend on the worker count.

use crate::config::{ExperimentConfig, Model};
use anyhow::Context;
use minit::dynamics::{Microstate, SystemModel};
use minit::observation::{add_noise, generate_series, ObservationSeries};
use minit::pipeline::{initialize, InitializationResult};
use minit::seed::{derive, Stage};
use minit::validation::{median, nse_obs, predictability_horizon, HorizonReport, ModelSpaceStats};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Samples used for the model-space covariance estimate.
const STATS_SAMPLES: usize = 100_000;

/// Everything recorded about one run; reproducible from
/// `(config, run_id)` alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: u64,
    pub truth_seed: u64,
    pub noise_seed: u64,
    pub guess_seed: u64,
    pub truth_start: Vec<f64>,
    pub truth_present: Vec<f64>,
    pub result: InitializationResult,
    /// Normalized squared observation error for k = -T..=window, against
    /// the clean ground-truth observations.
    pub nse_obs: Vec<f64>,
    /// Mahalanobis-normalized model-space error over the same span.
    pub nse_mod: Vec<f64>,
    /// First prediction step with observation NSE >= 2 (window + 1 when
    /// censored).
    pub horizon: usize,
    pub censored: bool,
}

/// One ensemble's records plus aggregates.
#[derive(Debug, Clone)]
pub struct EnsembleOutput {
    pub noisy: bool,
    pub t_count: usize,
    pub window: usize,
    pub records: Vec<RunRecord>,
    /// Failed runs as `(run_id, reason)`; excluded from every aggregate.
    pub failures: Vec<(u64, String)>,
    pub horizon: HorizonReport,
    /// Rows `(k, median nse_obs, median nse_mod)` for k = -T..=window.
    pub median_profile: Vec<(i64, f64, f64)>,
    pub mean_nse0_mod: f64,
    pub median_nse0_mod: f64,
}

/// Runs the configured ensemble in one noise mode.
pub fn run_ensemble(cfg: &ExperimentConfig, noisy: bool) -> anyhow::Result<EnsembleOutput> {
    let model = cfg.model()?;
    let stats = model_stats(cfg, &model)?;
    run_ensemble_with_stats(cfg, noisy, &model, &stats)
}

/// Attractor statistics for the configured system, seeded from the master
/// seed so both noise variants share them.
pub fn model_stats(cfg: &ExperimentConfig, model: &Model) -> anyhow::Result<ModelSpaceStats> {
    let mut rng = ChaCha12Rng::seed_from_u64(derive(cfg.seed, 0, Stage::Stats));
    Ok(ModelSpaceStats::estimate(model, &mut rng, STATS_SAMPLES)?)
}

/// Ensemble run against precomputed statistics (shared across variants and
/// sweep points).
pub fn run_ensemble_with_stats(
    cfg: &ExperimentConfig,
    noisy: bool,
    model: &Model,
    stats: &ModelSpaceStats,
) -> anyhow::Result<EnsembleOutput> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .context("building worker pool")?;
    let outcomes: Vec<Result<RunRecord, (u64, String)>> = pool.install(|| {
        (0..cfg.ensemble_size as u64)
            .into_par_iter()
            .map(|run_id| {
                one_run(cfg, noisy, model, stats, run_id).map_err(|e| (run_id, e.to_string()))
            })
            .collect()
    });

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(r) => records.push(r),
            Err(f) => failures.push(f),
        }
    }
    Ok(aggregate(cfg, noisy, records, failures))
}

/// Executes one seeded run end to end.
pub fn one_run(
    cfg: &ExperimentConfig,
    noisy: bool,
    model: &Model,
    stats: &ModelSpaceStats,
    run_id: u64,
) -> anyhow::Result<RunRecord> {
    let t_count = cfg.t_count();
    let m = cfg.m();
    let window = cfg.window();
    let op = cfg.operator();

    let truth_seed = derive(cfg.seed, run_id, Stage::Truth);
    let noise_seed = derive(cfg.seed, run_id, Stage::Noise);
    let guess_seed = derive(cfg.seed, run_id, Stage::Guess);

    let mut truth_rng = ChaCha12Rng::seed_from_u64(truth_seed);
    let x_start = model.sample_attractor(&mut truth_rng, 5000)?;
    let clean = generate_series(model, op, &x_start, t_count, m)?;
    let series: ObservationSeries = if noisy {
        let mut noise_rng = ChaCha12Rng::seed_from_u64(noise_seed);
        add_noise(
            &clean,
            cfg.noise.ratio,
            cfg.noise.distribution(),
            &mut noise_rng,
        )?
    } else {
        clean.clone()
    };

    let mut pipeline_cfg = cfg.pipeline_config(noisy)?;
    pipeline_cfg.seed = guess_seed;
    let result = initialize(model, op, &series, &pipeline_cfg)?;

    let span = t_count + window + 1;
    let truth_states = model.trajectory(&x_start, span, m)?;
    let est_states = model.trajectory(&result.assimilated, span, m)?;
    let sigma = series.sigma_y();
    let mut obs_errors = Vec::with_capacity(span);
    let mut mod_errors = Vec::with_capacity(span);
    for (t, e) in truth_states.iter().zip(&est_states) {
        obs_errors.push(nse_obs(op.observe(t), op.observe(e), sigma));
        mod_errors.push(stats.nse_mod(t, e)?);
    }
    let prediction = &obs_errors[t_count..];
    let (horizon, censored) = match prediction.iter().position(|&v| v >= 2.0) {
        Some(k) => (k, false),
        None => (window + 1, true),
    };

    Ok(RunRecord {
        run_id,
        truth_seed,
        noise_seed,
        guess_seed,
        truth_start: x_start.to_vec(),
        truth_present: truth_states[t_count].to_vec(),
        result,
        nse_obs: obs_errors,
        nse_mod: mod_errors,
        horizon,
        censored,
    })
}

fn aggregate(
    cfg: &ExperimentConfig,
    noisy: bool,
    records: Vec<RunRecord>,
    failures: Vec<(u64, String)>,
) -> EnsembleOutput {
    let t_count = cfg.t_count();
    let window = cfg.window();
    let span = t_count + window + 1;
    let mut median_profile = Vec::with_capacity(span);
    if !records.is_empty() {
        let mut obs_column = Vec::with_capacity(records.len());
        let mut mod_column = Vec::with_capacity(records.len());
        for i in 0..span {
            obs_column.clear();
            mod_column.clear();
            for r in &records {
                obs_column.push(r.nse_obs[i]);
                mod_column.push(r.nse_mod[i]);
            }
            median_profile.push((
                i as i64 - t_count as i64,
                median(&obs_column),
                median(&mod_column),
            ));
        }
    }
    let prediction_nse: Vec<Vec<f64>> = records
        .iter()
        .map(|r| r.nse_obs[t_count..].to_vec())
        .collect();
    let horizon = predictability_horizon(&prediction_nse);
    let nse0: Vec<f64> = records.iter().map(|r| r.nse_mod[t_count]).collect();
    let mean_nse0_mod = if nse0.is_empty() {
        f64::NAN
    } else {
        nse0.iter().sum::<f64>() / nse0.len() as f64
    };
    let median_nse0_mod = if nse0.is_empty() {
        f64::NAN
    } else {
        median(&nse0)
    };
    EnsembleOutput {
        noisy,
        t_count,
        window,
        records,
        failures,
        horizon,
        median_profile,
        mean_nse0_mod,
        median_nse0_mod,
    }
}

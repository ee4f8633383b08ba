//! Experiment recipes: each function reproduces the data behind one family
//! of figures (error profiles, horizon and discrepancy sweeps over the
//! series length, the critical-transition heatmap, optimizer comparison,
//! filtered-noise distributions, and the bounding-threshold sweep).

use crate::config::ExperimentConfig;
use crate::ensemble::{model_stats, run_ensemble_with_stats, EnsembleOutput};
use anyhow::Result;
use minit::dynamics::SystemModel;
use minit::filter::{lpma, lpma_once};
use minit::observation::{add_noise, generate_series};
use minit::optim::OptimizerKind;
use minit::pipeline::{bound, initial_guess, refine};
use minit::seed::{derive, Stage};
use minit::validation::median;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Error profiles of both noise variants (the noisy one only when the
/// configured ratio is positive), sharing ground truths.
pub struct ProfilePair {
    pub noiseless: EnsembleOutput,
    pub noisy: Option<EnsembleOutput>,
}

pub fn error_profile(cfg: &ExperimentConfig) -> Result<ProfilePair> {
    let model = cfg.model()?;
    let stats = model_stats(cfg, &model)?;
    let noiseless = run_ensemble_with_stats(cfg, false, &model, &stats)?;
    let noisy = if cfg.noise.ratio > 0.0 {
        Some(run_ensemble_with_stats(cfg, true, &model, &stats)?)
    } else {
        None
    };
    Ok(ProfilePair { noiseless, noisy })
}

/// One row of a horizon-vs-observations sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HorizonPoint {
    pub t_count: usize,
    pub noisy: bool,
    pub k_max: f64,
    pub censored_runs: usize,
}

pub fn horizon_vs_t(cfg: &ExperimentConfig, t_list: &[usize]) -> Result<Vec<HorizonPoint>> {
    let model = cfg.model()?;
    let stats = model_stats(cfg, &model)?;
    let mut rows = Vec::new();
    for &t_count in t_list {
        let mut point_cfg = cfg.clone();
        point_cfg.observation.t_count = Some(t_count);
        for noisy in modes(cfg) {
            let out = run_ensemble_with_stats(&point_cfg, noisy, &model, &stats)?;
            rows.push(HorizonPoint {
                t_count,
                noisy,
                k_max: out.horizon.k_max,
                censored_runs: out.horizon.censored.iter().filter(|&&c| c).count(),
            });
        }
    }
    Ok(rows)
}

/// One row of an initialized-discrepancy sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nse0Point {
    pub t_count: usize,
    pub noisy: bool,
    pub mean_nse0_mod: f64,
    pub median_nse0_mod: f64,
}

pub fn nse0_vs_t(cfg: &ExperimentConfig, t_list: &[usize]) -> Result<Vec<Nse0Point>> {
    let model = cfg.model()?;
    let stats = model_stats(cfg, &model)?;
    let mut rows = Vec::new();
    for &t_count in t_list {
        let mut point_cfg = cfg.clone();
        point_cfg.observation.t_count = Some(t_count);
        for noisy in modes(cfg) {
            let out = run_ensemble_with_stats(&point_cfg, noisy, &model, &stats)?;
            rows.push(Nse0Point {
                t_count,
                noisy,
                mean_nse0_mod: out.mean_nse0_mod,
                median_nse0_mod: out.median_nse0_mod,
            });
        }
    }
    Ok(rows)
}

/// One cell of the noiseless critical-transition heatmap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatCell {
    pub t_count: usize,
    pub m: usize,
    pub log10_median_nse0_mod: f64,
}

/// Noiseless discrepancy grid over series length and sampling interval.
pub fn heatmap(
    cfg: &ExperimentConfig,
    t_list: &[usize],
    m_list: &[usize],
) -> Result<Vec<HeatCell>> {
    let model = cfg.model()?;
    let stats = model_stats(cfg, &model)?;
    let mut cells = Vec::new();
    for &t_count in t_list {
        for &m in m_list {
            let mut cell_cfg = cfg.clone();
            cell_cfg.observation.t_count = Some(t_count);
            cell_cfg.observation.m = m;
            let out = run_ensemble_with_stats(&cell_cfg, false, &model, &stats)?;
            cells.push(HeatCell {
                t_count,
                m,
                log10_median_nse0_mod: out.median_nse0_mod.log10(),
            });
        }
    }
    Ok(cells)
}

/// Mean initialized discrepancy of one optimizer variant in one noise mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerRow {
    pub optimizer: OptimizerKind,
    pub noisy: bool,
    pub mean_nse0_mod: f64,
    pub median_nse0_mod: f64,
    pub failed_runs: usize,
}

/// Paired comparison: every variant sees the same truths and noise draws.
pub fn optimizer_comparison(
    cfg: &ExperimentConfig,
    variants: &[OptimizerKind],
) -> Result<Vec<OptimizerRow>> {
    let model = cfg.model()?;
    let stats = model_stats(cfg, &model)?;
    let mut rows = Vec::new();
    for &kind in variants {
        let mut variant_cfg = cfg.clone();
        variant_cfg.pipeline.optimizer = kind.name().to_string();
        for noisy in modes(cfg) {
            let out = run_ensemble_with_stats(&variant_cfg, noisy, &model, &stats)?;
            rows.push(OptimizerRow {
                optimizer: kind,
                noisy,
                mean_nse0_mod: out.mean_nse0_mod,
                median_nse0_mod: out.median_nse0_mod,
                failed_runs: out.failures.len(),
            });
        }
    }
    Ok(rows)
}

/// Residual histograms and variances of the filtered-noise study.
pub struct FilterStudy {
    /// `(q, histogram)` with bins as `(center, density)`.
    pub histograms: Vec<(usize, Vec<(f64, f64)>)>,
    /// `(q, residual variance, residual skewness)`.
    pub residual_stats: Vec<(usize, f64, f64)>,
    /// `(k, raw, filtered)` sample at the configured q for inspection.
    pub series_sample: Vec<(i64, f64, f64)>,
}

/// Corrupts one long series with the configured distribution and filters
/// it with increasing strength; the residual against the clean signal
/// shows how the noise distribution reshapes.
pub fn filter_study(
    cfg: &ExperimentConfig,
    q_list: &[usize],
    length: usize,
) -> Result<FilterStudy> {
    let model = cfg.model()?;
    let op = cfg.operator();
    let mut rng = ChaCha12Rng::seed_from_u64(derive(cfg.seed, 0, Stage::Truth));
    let start = model.sample_attractor(&mut rng, 5000)?;
    let clean = generate_series(&model, op, &start, length, cfg.m())?;
    let mut noise_rng = ChaCha12Rng::seed_from_u64(derive(cfg.seed, 0, Stage::Noise));
    let noisy = add_noise(
        &clean,
        cfg.noise.ratio,
        cfg.noise.distribution(),
        &mut noise_rng,
    )?;

    let sigma_n = cfg.noise.ratio * clean.sigma_y();
    let mut histograms = Vec::new();
    let mut residual_stats = Vec::new();
    for &q in q_list {
        let mut values = noisy.values().to_vec();
        for _ in 0..q {
            values = lpma_once(&values)?;
        }
        let residuals: Vec<f64> = values
            .iter()
            .zip(clean.values())
            .map(|(f, c)| f - c)
            .collect();
        histograms.push((q, histogram(&residuals, 80, 5.0 * sigma_n)));
        let mean = residuals.iter().sum::<f64>() / residuals.len() as f64;
        let var = residuals.iter().map(|r| (r - mean).powi(2)).sum::<f64>()
            / residuals.len() as f64;
        let skew = residuals
            .iter()
            .map(|r| ((r - mean) / var.sqrt()).powi(3))
            .sum::<f64>()
            / residuals.len() as f64;
        residual_stats.push((q, var, skew));
    }

    let filtered = lpma(&noisy, cfg.pipeline.q.expect("resolved"))?;
    let t = length as i64;
    let series_sample = noisy
        .values()
        .iter()
        .zip(filtered.values())
        .enumerate()
        .take(500)
        .map(|(i, (r, f))| (i as i64 - t, *r, *f))
        .collect();
    Ok(FilterStudy {
        histograms,
        residual_stats,
        series_sample,
    })
}

fn histogram(values: &[f64], bins: usize, half_width: f64) -> Vec<(f64, f64)> {
    let lo = -half_width;
    let width = 2.0 * half_width / bins as f64;
    let mut counts = vec![0usize; bins];
    let mut kept = 0usize;
    for &v in values {
        if v >= lo && v < half_width {
            counts[((v - lo) / width) as usize] += 1;
            kept += 1;
        }
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            (
                lo + (i as f64 + 0.5) * width,
                c as f64 / (kept.max(1) as f64 * width),
            )
        })
        .collect()
}

/// One run of the bounding-threshold sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub delta_rough: f64,
    pub noisy: bool,
    pub run_id: u64,
    /// Discrepancy of the bound-stage candidate propagated to the present.
    pub nse0_rough: f64,
    /// Discrepancy of the refined state propagated to the present.
    pub nse0_refined: f64,
}

/// Repeats the bound and refine stages from a shared guess at several
/// bounding thresholds, recording how much refinement improves the
/// present-time discrepancy.
pub fn bounding_sweep(cfg: &ExperimentConfig, deltas: &[f64]) -> Result<Vec<SweepRow>> {
    let model = cfg.model()?;
    let stats = model_stats(cfg, &model)?;
    let op = cfg.operator();
    let t_count = cfg.t_count();
    let m = cfg.m();
    let mut rows = Vec::new();
    for noisy in modes(cfg) {
        for run_id in 0..cfg.ensemble_size as u64 {
            let mut truth_rng =
                ChaCha12Rng::seed_from_u64(derive(cfg.seed, run_id, Stage::Truth));
            let x_start = model.sample_attractor(&mut truth_rng, 5000)?;
            let clean = generate_series(&model, op, &x_start, t_count, m)?;
            let series = if noisy {
                let mut nrng =
                    ChaCha12Rng::seed_from_u64(derive(cfg.seed, run_id, Stage::Noise));
                add_noise(&clean, cfg.noise.ratio, cfg.noise.distribution(), &mut nrng)?
            } else {
                clean.clone()
            };
            let base = cfg.pipeline_config(noisy)?;
            let filtered = lpma(&series, base.q)?;
            let mut guess_rng =
                ChaCha12Rng::seed_from_u64(derive(cfg.seed, run_id, Stage::Guess));
            let guess = initial_guess(
                op,
                &filtered,
                model.dimension(),
                base.guess_retries,
                None,
                &mut guess_rng,
            )?;
            let truth_present = model.iterate(&x_start, m * t_count)?;

            for &delta in deltas {
                let mut sweep_cfg = base.clone();
                // pin the bounding threshold to the sweep value exactly
                sweep_cfg.alpha_rough = delta;
                sweep_cfg.beta_rough = 1e-12;
                sweep_cfg.validate(filtered.noise_ratio())?;
                let rough = bound(&model, op, &filtered, &guess, &sweep_cfg)?;
                let run = refine(&model, op, &filtered, &rough.state, &sweep_cfg);
                let rough_present = model.iterate(&rough.state, m * t_count)?;
                let refined_state =
                    minit::dynamics::Microstate::new(run.best_point.clone())?;
                let refined_present = model.iterate(&refined_state, m * t_count)?;
                rows.push(SweepRow {
                    delta_rough: delta,
                    noisy,
                    run_id,
                    nse0_rough: stats.nse_mod(&truth_present, &rough_present)?,
                    nse0_refined: stats.nse_mod(&truth_present, &refined_present)?,
                });
            }
        }
    }
    Ok(rows)
}

/// Median refined-vs-rough improvement per threshold, derived from sweep
/// rows.
pub fn sweep_summary(rows: &[SweepRow], noisy: bool) -> Vec<(f64, f64, f64)> {
    let mut deltas: Vec<f64> = rows
        .iter()
        .filter(|r| r.noisy == noisy)
        .map(|r| r.delta_rough)
        .collect();
    deltas.sort_by(f64::total_cmp);
    deltas.dedup();
    deltas
        .into_iter()
        .map(|d| {
            let rough: Vec<f64> = rows
                .iter()
                .filter(|r| r.noisy == noisy && r.delta_rough == d)
                .map(|r| r.nse0_rough)
                .collect();
            let refined: Vec<f64> = rows
                .iter()
                .filter(|r| r.noisy == noisy && r.delta_rough == d)
                .map(|r| r.nse0_refined)
                .collect();
            (d, median(&rough), median(&refined))
        })
        .collect()
}

/// Noise modes an experiment covers: the noiseless variant always, the
/// noisy one when the configured ratio is positive.
fn modes(cfg: &ExperimentConfig) -> Vec<bool> {
    if cfg.noise.ratio > 0.0 {
        vec![false, true]
    } else {
        vec![false]
    }
}

//! Out-of-sample validation metrics: normalized squared errors in
//! observation and model space, predictability horizons, the Lyapunov
//! 10-fold time, and ensemble power spectra.

use crate::dynamics::{Microstate, SystemModel};
use crate::observation::ObservationOperator;
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

/// Squared observation residual normalized by the data variance.
pub fn nse_obs(y: f64, yhat: f64, sigma_y: f64) -> f64 {
    ((y - yhat) / sigma_y).powi(2)
}

/// Attractor statistics used by the model-space error: the microstate
/// covariance with a small ridge, its inverse, and the attractor mean.
#[derive(Debug, Clone)]
pub struct ModelSpaceStats {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    inverse: DMatrix<f64>,
    ridge: f64,
}

impl ModelSpaceStats {
    /// Estimates the covariance from a long in-attractor trajectory
    /// (burn-in 5000 steps, then `samples` consecutive states). A ridge of
    /// `1e-8 trace / N_x` keeps near-singular covariances invertible; the
    /// Mackey-Glass attractor has far lower dimension than its state space.
    pub fn estimate<R: Rng + ?Sized>(
        model: &impl SystemModel,
        rng: &mut R,
        samples: usize,
    ) -> Result<Self> {
        let dim = model.dimension();
        let start = model.sample_attractor(rng, 5000)?;
        let track = model.trajectory(&start, samples, 1)?;

        let mut mean = DVector::zeros(dim);
        for s in &track {
            for i in 0..dim {
                mean[i] += s[i];
            }
        }
        mean /= samples as f64;

        let mut cov = DMatrix::zeros(dim, dim);
        let mut centered = DVector::zeros(dim);
        for s in &track {
            for i in 0..dim {
                centered[i] = s[i] - mean[i];
            }
            cov.ger(1.0, &centered, &centered, 1.0);
        }
        cov /= samples as f64;
        Self::from_moments(mean, cov)
    }

    /// Builds the statistics from externally supplied moments.
    pub fn from_moments(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let dim = covariance.nrows();
        if covariance.ncols() != dim || mean.len() != dim {
            return Err(Error::DimensionMismatch(
                "covariance must be square and match the mean".into(),
            ));
        }
        let ridge = 1e-8 * covariance.trace() / dim as f64;
        let mut regularized = covariance.clone();
        for i in 0..dim {
            regularized[(i, i)] += ridge;
        }
        let inverse = regularized
            .clone()
            .cholesky()
            .ok_or(Error::SingularCovariance)?
            .inverse();
        Ok(Self {
            mean,
            covariance: regularized,
            inverse,
            ridge,
        })
    }

    pub fn dim(&self) -> usize {
        self.covariance.nrows()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    /// Mahalanobis-normalized squared model-space error between two states.
    pub fn nse_mod(&self, x: &Microstate, xhat: &Microstate) -> Result<f64> {
        let dim = self.dim();
        if x.dim() != dim || xhat.dim() != dim {
            return Err(Error::DimensionMismatch(format!(
                "states of dim {}/{} against stats of dim {dim}",
                x.dim(),
                xhat.dim()
            )));
        }
        let d = DVector::from_fn(dim, |i, _| x[i] - xhat[i]);
        Ok((&self.inverse * &d).dot(&d) / dim as f64)
    }
}

/// Per-run first-crossing indices of the NSE >= 2 threshold and their
/// ensemble aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonReport {
    /// First prediction step with NSE >= 2 per run; `window + 1` when the
    /// run never crossed inside the simulated window.
    pub first_crossings: Vec<usize>,
    /// Runs that never crossed; they enter the mean at the window length.
    pub censored: Vec<bool>,
    /// Mean first-crossing step.
    pub k_max: f64,
    /// Fraction of runs that crossed by step k, for k = 0..=window.
    pub cdf: Vec<f64>,
}

/// Computes the predictability horizon from per-run NSE sequences over the
/// prediction window (`k = 0..=window`).
pub fn predictability_horizon(nse_per_run: &[Vec<f64>]) -> HorizonReport {
    let window = nse_per_run
        .iter()
        .map(|r| r.len().saturating_sub(1))
        .max()
        .unwrap_or(0);
    let mut first_crossings = Vec::with_capacity(nse_per_run.len());
    let mut censored = Vec::with_capacity(nse_per_run.len());
    let mut sum = 0.0;
    for run in nse_per_run {
        match run.iter().position(|&nse| nse >= 2.0) {
            Some(k) => {
                first_crossings.push(k);
                censored.push(false);
                sum += k as f64;
            }
            None => {
                first_crossings.push(window + 1);
                censored.push(true);
                sum += window as f64;
            }
        }
    }
    let runs = nse_per_run.len().max(1);
    let mut cdf = vec![0.0; window + 1];
    for (&k, &c) in first_crossings.iter().zip(&censored) {
        if !c {
            for slot in cdf.iter_mut().skip(k) {
                *slot += 1.0;
            }
        }
    }
    for slot in cdf.iter_mut() {
        *slot /= runs as f64;
    }
    HorizonReport {
        first_crossings,
        censored,
        k_max: sum / runs as f64,
        cdf,
    }
}

/// Largest Lyapunov exponent per unit time by the two-particle method:
/// track a trajectory and an offset copy, accumulate the log separation
/// growth over renormalization epochs, and rescale the offset back to its
/// initial magnitude after each epoch. The first tenth of the epochs is
/// discarded as transient.
pub fn lyapunov_exponent<R: Rng + ?Sized>(
    model: &impl SystemModel,
    rng: &mut R,
    renorm_interval: usize,
    total_steps: usize,
) -> Result<f64> {
    if renorm_interval < 1 || total_steps < 10 * renorm_interval {
        return Err(Error::InvalidConfig(
            "need total_steps >= 10 * renorm_interval >= 10".into(),
        ));
    }
    const OFFSET: f64 = 1e-8;
    let dim = model.dimension();
    let mut x = model.sample_attractor(rng, 5000)?.into_vec();

    let direction: Vec<f64> = (0..dim)
        .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
        .collect();
    let norm = direction.iter().map(|c| c * c).sum::<f64>().sqrt();
    let mut p: Vec<f64> = x
        .iter()
        .zip(&direction)
        .map(|(xi, di)| xi + OFFSET * di / norm)
        .collect();

    let epochs = total_steps / renorm_interval;
    let discard = epochs / 10;
    let mut acc = 0.0;
    let mut counted = 0usize;
    let mut buf = vec![0.0; dim];
    for epoch in 0..epochs {
        for s in 0..renorm_interval {
            model.step_into(&x, &mut buf);
            std::mem::swap(&mut x, &mut buf);
            model.step_into(&p, &mut buf);
            std::mem::swap(&mut p, &mut buf);
            if !x.iter().all(|c| c.is_finite()) || !p.iter().all(|c| c.is_finite()) {
                return Err(Error::Diverged {
                    step: epoch * renorm_interval + s + 1,
                });
            }
        }
        let d = x
            .iter()
            .zip(&p)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        if d == 0.0 {
            return Err(Error::InvalidState(
                "separation underflowed to zero".into(),
            ));
        }
        if epoch >= discard {
            acc += (d / OFFSET).ln();
            counted += 1;
        }
        let rescale = OFFSET / d;
        for i in 0..dim {
            p[i] = x[i] + rescale * (p[i] - x[i]);
        }
    }
    Ok(acc / (counted as f64 * renorm_interval as f64 * model.dt()))
}

/// Lyapunov 10-fold time in units of observation samples: the number of
/// samples over which neighboring trajectories diverge by one decade.
pub fn ten_fold_time(lambda: f64, m: usize, dt: f64) -> Result<f64> {
    if lambda <= 0.0 {
        return Err(Error::NonPositiveExponent(lambda));
    }
    Ok(10.0_f64.ln() / (m as f64 * dt * lambda))
}

/// Ensemble-averaged normalized periodogram of a scalar track along
/// in-attractor trajectories: `n_runs` random starts, `n_points` samples
/// each (a power of two), mean removed, per-run power normalized to one and
/// averaged. The track is the first state component unless an observation
/// operator is supplied.
///
/// Returns `(frequency in cycles per sample, mean power)` for the one-sided
/// bins `0..=n_points/2`.
pub fn power_spectrum<R: Rng + ?Sized>(
    model: &impl SystemModel,
    op: Option<ObservationOperator>,
    rng: &mut R,
    n_runs: usize,
    n_points: usize,
) -> Result<Vec<(f64, f64)>> {
    if n_runs < 1 || n_points < 2 || !n_points.is_power_of_two() {
        return Err(Error::InvalidConfig(format!(
            "spectrum needs runs >= 1 and a power-of-two point count, got {n_runs}, {n_points}"
        )));
    }
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n_points);
    let half = n_points / 2;
    let mut mean_power = vec![0.0; half + 1];
    let mut buffer = vec![Complex::new(0.0, 0.0); n_points];

    for _ in 0..n_runs {
        let start = model.sample_attractor(rng, 5000)?;
        let states = model.trajectory(&start, n_points, 1)?;
        let track: Vec<f64> = states
            .iter()
            .map(|s| match op {
                Some(o) => o.observe(s),
                None => s[0],
            })
            .collect();
        let mean = track.iter().sum::<f64>() / n_points as f64;
        for (slot, &v) in buffer.iter_mut().zip(&track) {
            *slot = Complex::new(v - mean, 0.0);
        }
        fft.process(&mut buffer);
        let power: Vec<f64> = buffer[..=half].iter().map(|c| c.norm_sqr()).collect();
        let total: f64 = power.iter().sum();
        if total > 0.0 {
            for (acc, p) in mean_power.iter_mut().zip(&power) {
                *acc += p / total;
            }
        }
    }
    Ok(mean_power
        .into_iter()
        .enumerate()
        .map(|(j, p)| (j as f64 / n_points as f64, p / n_runs as f64))
        .collect())
}

/// Median of a sample; even-sized samples average the two central order
/// statistics. NaNs are rejected by construction of the inputs.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty sample");
    let mut v = values.to_vec();
    let n = v.len();
    let (_, mid, _) = v.select_nth_unstable_by(n / 2, f64::total_cmp);
    let upper = *mid;
    if n % 2 == 1 {
        upper
    } else {
        let (_, lower, _) = v.select_nth_unstable_by(n / 2 - 1, f64::total_cmp);
        0.5 * (*lower + upper)
    }
}

//! The three-stage initialization procedure: preprocess, bound, refine.
//!
//! A run smooths the observed series, draws a guess on the level set of the
//! first observation, walks the guess along its own orbit until its
//! simulated observations roughly match the smoothed data, then minimizes
//! the cost from there with a gradient-based optimizer. The refined state at
//! the window start is the assimilated microstate; propagated to the
//! present it becomes the initialized microstate.

use crate::dynamics::{Microstate, SystemModel};
use crate::filter::lpma;
use crate::objective::{cost, cost_gradient, cost_of_predictions};
use crate::observation::{ObservationOperator, ObservationSeries};
use crate::optim::{minimize, OptRun, OptimizerKind, OptimizerSpec, StopRule};
use crate::{Error, Result};
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

/// Thresholds, budgets and optimizer choice of one initialization run.
///
/// `beta_refine` is the refinement noise-tolerance coefficient in units of
/// `r0^-2`: the effective tolerance entering the refinement threshold is
/// `beta_refine / r0^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Error-free tolerance of the bounding stage.
    pub alpha_rough: f64,
    /// Noise tolerance of the bounding stage.
    pub beta_rough: f64,
    /// Error-free tolerance of the refinement stage.
    pub alpha_refine: f64,
    /// Refinement noise-tolerance coefficient (scaled by `r0^-2`).
    pub beta_refine: f64,
    /// Signal-to-noise gain assumed for the filtered series.
    pub r0: f64,
    /// LPMA passes applied in the preprocess stage.
    pub q: usize,
    pub optimizer: OptimizerSpec,
    /// Maximum model steps the bound-stage candidate may travel.
    pub bound_budget: usize,
    /// Maximum optimizer iterations in the refinement stage.
    pub refine_budget: usize,
    /// Plateau patience of the refinement stage.
    pub patience: usize,
    /// Fresh guess draws allowed on level-set or overflow failures.
    pub guess_retries: usize,
    pub seed: u64,
    /// Guess-direction boxes, one per basin of attraction; empty means a
    /// single isotropic direction draw.
    pub basins: Vec<Vec<(f64, f64)>>,
}

impl PipelineConfig {
    /// Table defaults for the Lorenz system.
    pub fn lorenz_defaults() -> Self {
        Self {
            alpha_rough: 0.05,
            beta_rough: 0.5,
            alpha_refine: 1e-4,
            beta_refine: 0.8,
            r0: 2.02,
            q: 4,
            optimizer: OptimizerSpec::defaults(OptimizerKind::Adam),
            bound_budget: 200_000,
            refine_budget: 30_000,
            patience: 200,
            guess_retries: 10,
            seed: 0,
            basins: Vec::new(),
        }
    }

    /// Table defaults for the Mackey-Glass system.
    pub fn mackey_glass_defaults() -> Self {
        Self {
            alpha_rough: 0.05,
            beta_rough: 0.5,
            alpha_refine: 1e-5,
            beta_refine: 0.2,
            r0: 2.41,
            q: 5,
            ..Self::lorenz_defaults()
        }
    }

    /// Bounding threshold at the given noise ratio.
    pub fn delta_rough(&self, noise_ratio: f64) -> f64 {
        self.alpha_rough + noise_ratio.powi(2) * self.beta_rough
    }

    /// Refinement threshold at the given noise ratio.
    pub fn delta_refine(&self, noise_ratio: f64) -> f64 {
        self.alpha_refine + noise_ratio.powi(2) * self.beta_refine / self.r0.powi(2)
    }

    /// Validates tolerances, ordering and budgets for a series with the
    /// given noise ratio.
    pub fn validate(&self, noise_ratio: f64) -> Result<()> {
        for (name, v) in [
            ("alpha_rough", self.alpha_rough),
            ("beta_rough", self.beta_rough),
            ("alpha_refine", self.alpha_refine),
            ("beta_refine", self.beta_refine),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.r0 < 1.0 {
            return Err(Error::InvalidConfig(format!(
                "r0 must be at least 1, got {}",
                self.r0
            )));
        }
        if self.alpha_refine >= self.alpha_rough {
            return Err(Error::InvalidConfig(format!(
                "alpha_refine {} must be below alpha_rough {}",
                self.alpha_refine, self.alpha_rough
            )));
        }
        if self.delta_refine(noise_ratio) >= self.delta_rough(noise_ratio) {
            return Err(Error::InvalidConfig(format!(
                "refinement threshold {} not below bounding threshold {}",
                self.delta_refine(noise_ratio),
                self.delta_rough(noise_ratio)
            )));
        }
        if self.bound_budget < 1 || self.refine_budget < 1 {
            return Err(Error::InvalidConfig("budgets must be at least 1".into()));
        }
        self.optimizer.validate()
    }
}

/// Stage flags of one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineFlags {
    /// Bound stage met its threshold within budget.
    pub bounded: bool,
    /// Refinement converged below its threshold.
    pub refined: bool,
}

/// Outcome of one initialization run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitializationResult {
    /// Cost-minimizing state at the first observation time.
    pub assimilated: Microstate,
    /// The assimilated state propagated to the present time.
    pub initialized: Microstate,
    /// Cost of the assimilated state against the filtered series.
    pub cost_assimilated: f64,
    /// Model steps the bound-stage candidate traveled.
    pub bound_steps_used: usize,
    pub refine_trace: OptRun,
    pub r0_used: f64,
    pub flags: PipelineFlags,
}

/// Draws a state on the level set of the first observation: a random
/// direction scaled so the operator reproduces `y_{-T}`, verified
/// numerically and resampled on failure (an even-signed operator cannot
/// flip sign by scaling alone).
pub fn initial_guess<R: Rng + ?Sized>(
    op: ObservationOperator,
    series: &ObservationSeries,
    dim: usize,
    retries: usize,
    basin: Option<&[(f64, f64)]>,
    rng: &mut R,
) -> Result<Microstate> {
    let target = series.values()[0];
    let mut reason = String::from("no direction attempted");
    for _ in 0..=retries {
        let direction: Vec<f64> = match basin {
            Some(bounds) => bounds.iter().map(|&(lo, hi)| rng.gen_range(lo..hi)).collect(),
            None => (0..dim)
                .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
                .collect(),
        };
        let d = match Microstate::new(direction) {
            Ok(d) => d,
            Err(_) => continue,
        };
        let h = op.observe(&d);
        if h == 0.0 || !h.is_finite() {
            reason = "operator vanished on the sampled direction".into();
            continue;
        }
        let lambda = target / h;
        let scaled: Vec<f64> = d.as_slice().iter().map(|c| lambda * c).collect();
        let guess = Microstate::new(scaled)?;
        let achieved = op.observe(&guess);
        if (achieved - target).abs() <= 1e-10 * target.abs().max(1.0) {
            return Ok(guess);
        }
        reason = format!("level-set scaling reached {achieved} instead of {target}");
    }
    Err(Error::GuessFailed { retries, reason })
}

/// Bound-stage outcome: the candidate, how far it traveled, its cost.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundResult {
    pub state: Microstate,
    pub steps_used: usize,
    pub cost: f64,
    pub bounded: bool,
}

/// Walks the guess along its orbit, checking the cost of each
/// sample-aligned candidate until it drops below the bounding threshold.
/// On budget exhaustion the lowest-cost candidate seen is returned.
///
/// The observation window rolls with the candidate, so each advance costs
/// `2 m` model steps instead of a full window re-simulation; the resulting
/// costs are bit-identical to evaluating each candidate from scratch.
pub fn bound(
    model: &impl SystemModel,
    op: ObservationOperator,
    filtered: &ObservationSeries,
    guess: &Microstate,
    config: &PipelineConfig,
) -> Result<BoundResult> {
    let m = filtered.m();
    let t_count = filtered.horizon();
    let delta = config.delta_rough(filtered.noise_ratio());

    let window = model.trajectory(guess, t_count + 1, m)?;
    let mut predictions: VecDeque<f64> = window.iter().map(|s| op.observe(s)).collect();
    let mut tail = guess.clone();
    let mut head = window.into_iter().last().expect("window is non-empty");

    let mut steps_used = 0usize;
    let eval = |preds: &mut VecDeque<f64>| -> Result<f64> {
        Ok(cost_of_predictions(filtered, preds.make_contiguous())?.value)
    };
    let mut current = eval(&mut predictions)?;
    let mut best = BoundResult {
        state: tail.clone(),
        steps_used,
        cost: current,
        bounded: current <= delta,
    };

    while current > delta && steps_used + m <= config.bound_budget {
        tail = model.iterate(&tail, m)?;
        head = model.iterate(&head, m)?;
        steps_used += m;
        predictions.pop_front();
        predictions.push_back(op.observe(&head));
        current = eval(&mut predictions)?;
        if current < best.cost {
            best = BoundResult {
                state: tail.clone(),
                steps_used,
                cost: current,
                bounded: false,
            };
        }
        if current <= delta {
            return Ok(BoundResult {
                state: tail,
                steps_used,
                cost: current,
                bounded: true,
            });
        }
    }
    Ok(best)
}

/// Minimizes the cost from the bounded candidate until the refinement
/// threshold is met or the budget runs out.
pub fn refine(
    model: &impl SystemModel,
    op: ObservationOperator,
    filtered: &ObservationSeries,
    x_rough: &Microstate,
    config: &PipelineConfig,
) -> OptRun {
    let delta = config.delta_refine(filtered.noise_ratio());
    let objective = |x: &[f64]| -> Result<f64> {
        Ok(cost(model, op, filtered, &Microstate::new(x.to_vec())?)?.value)
    };
    let gradient = |x: &[f64]| -> Result<Vec<f64>> {
        cost_gradient(model, op, filtered, &Microstate::new(x.to_vec())?)
    };
    minimize(
        objective,
        gradient,
        x_rough.as_slice(),
        &config.optimizer,
        &StopRule::new(delta, config.refine_budget, config.patience),
    )
}

/// Runs the full procedure on a raw series. With several basins configured,
/// one guess is taken per basin and the lowest-cost result wins.
///
/// Stage shortfalls (budget exhausted, refinement not converged) are
/// recorded in the flags of a still-complete result; hard errors are
/// reserved for invalid inputs and unrecoverable divergence.
pub fn initialize(
    model: &impl SystemModel,
    op: ObservationOperator,
    raw: &ObservationSeries,
    config: &PipelineConfig,
) -> Result<InitializationResult> {
    config.validate(raw.noise_ratio())?;
    let filtered = lpma(raw, config.q)?;
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);

    let basins: Vec<Option<&[(f64, f64)]>> = if config.basins.is_empty() {
        vec![None]
    } else {
        config.basins.iter().map(|b| Some(b.as_slice())).collect()
    };

    let mut best: Option<InitializationResult> = None;
    for basin in basins {
        let result = run_single_basin(model, op, &filtered, config, basin, &mut rng)?;
        let better = match &best {
            Some(b) => result.cost_assimilated < b.cost_assimilated,
            None => true,
        };
        if better {
            best = Some(result);
        }
    }
    Ok(best.expect("at least one basin is always attempted"))
}

fn run_single_basin(
    model: &impl SystemModel,
    op: ObservationOperator,
    filtered: &ObservationSeries,
    config: &PipelineConfig,
    basin: Option<&[(f64, f64)]>,
    rng: &mut ChaCha12Rng,
) -> Result<InitializationResult> {
    // Guesses whose orbits overflow are replaced by a fresh draw.
    let mut bounded = None;
    for attempt in 0..=config.guess_retries {
        let guess = initial_guess(
            op,
            filtered,
            model.dimension(),
            config.guess_retries,
            basin,
            rng,
        )?;
        match bound(model, op, filtered, &guess, config) {
            Ok(b) => {
                bounded = Some(b);
                break;
            }
            Err(Error::Diverged { .. }) if attempt < config.guess_retries => continue,
            Err(e) => return Err(e),
        }
    }
    let rough = bounded.expect("loop either breaks with a result or returns");

    let run = refine(model, op, filtered, &rough.state, config);
    let assimilated = Microstate::new(run.best_point.clone())?;
    let initialized = model.iterate(&assimilated, filtered.m() * filtered.horizon())?;
    let flags = PipelineFlags {
        bounded: rough.bounded,
        refined: run.converged && !run.failed,
    };
    Ok(InitializationResult {
        assimilated,
        initialized,
        cost_assimilated: run.best_value,
        bound_steps_used: rough.steps_used,
        refine_trace: run,
        r0_used: config.r0,
        flags,
    })
}

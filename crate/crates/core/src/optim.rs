//! First-order optimizers driven by an objective/gradient callable pair.
//!
//! All nine variants carry the hyperparameters given in their source
//! literature as defaults. The driver records the objective value at every
//! iteration, keeps the best point seen (not necessarily the last one), and
//! stops on threshold, budget, plateau, or evaluation failure.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Names of the supported optimizer variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Momentum,
    Nesterov,
    Adagrad,
    Adadelta,
    RmsProp,
    Adam,
    /// Adam with a max-normalized second moment (the AMSGrad correction).
    AmsGrad,
    /// Hyperparameter-free moment adaptation.
    YamAdam,
}

impl OptimizerKind {
    pub const ALL: [OptimizerKind; 9] = [
        OptimizerKind::Sgd,
        OptimizerKind::Momentum,
        OptimizerKind::Nesterov,
        OptimizerKind::Adagrad,
        OptimizerKind::Adadelta,
        OptimizerKind::RmsProp,
        OptimizerKind::Adam,
        OptimizerKind::AmsGrad,
        OptimizerKind::YamAdam,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Momentum => "momentum",
            OptimizerKind::Nesterov => "nesterov",
            OptimizerKind::Adagrad => "adagrad",
            OptimizerKind::Adadelta => "adadelta",
            OptimizerKind::RmsProp => "rmsprop",
            OptimizerKind::Adam => "adam",
            OptimizerKind::AmsGrad => "amsgrad",
            OptimizerKind::YamAdam => "yamadam",
        }
    }
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        OptimizerKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown optimizer '{s}'")))
    }
}

/// An optimizer variant with its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerSpec {
    Sgd { eta: f64 },
    Momentum { eta: f64, gamma: f64 },
    Nesterov { eta: f64, gamma: f64 },
    Adagrad { eta: f64, eps: f64 },
    Adadelta { rho: f64, eps: f64 },
    RmsProp { eta: f64, rho: f64, eps: f64 },
    Adam { eta: f64, beta1: f64, beta2: f64, eps: f64 },
    AmsGrad { eta: f64, beta1: f64, beta2: f64, eps: f64 },
    YamAdam { eps: f64 },
}

impl OptimizerSpec {
    /// Literature defaults per variant. SGD has no canonical rate; 0.01 is
    /// the recorded artifact choice.
    pub fn defaults(kind: OptimizerKind) -> Self {
        match kind {
            OptimizerKind::Sgd => OptimizerSpec::Sgd { eta: 0.01 },
            OptimizerKind::Momentum => OptimizerSpec::Momentum {
                eta: 0.01,
                gamma: 0.9,
            },
            OptimizerKind::Nesterov => OptimizerSpec::Nesterov {
                eta: 0.01,
                gamma: 0.9,
            },
            OptimizerKind::Adagrad => OptimizerSpec::Adagrad {
                eta: 0.01,
                eps: 1e-8,
            },
            OptimizerKind::Adadelta => OptimizerSpec::Adadelta {
                rho: 0.95,
                eps: 1e-6,
            },
            OptimizerKind::RmsProp => OptimizerSpec::RmsProp {
                eta: 0.001,
                rho: 0.9,
                eps: 1e-8,
            },
            OptimizerKind::Adam => OptimizerSpec::Adam {
                eta: 0.001,
                beta1: 0.9,
                beta2: 0.999,
                eps: 1e-8,
            },
            OptimizerKind::AmsGrad => OptimizerSpec::AmsGrad {
                eta: 0.001,
                beta1: 0.9,
                beta2: 0.999,
                eps: 1e-8,
            },
            OptimizerKind::YamAdam => OptimizerSpec::YamAdam { eps: 1e-6 },
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        match self {
            OptimizerSpec::Sgd { .. } => OptimizerKind::Sgd,
            OptimizerSpec::Momentum { .. } => OptimizerKind::Momentum,
            OptimizerSpec::Nesterov { .. } => OptimizerKind::Nesterov,
            OptimizerSpec::Adagrad { .. } => OptimizerKind::Adagrad,
            OptimizerSpec::Adadelta { .. } => OptimizerKind::Adadelta,
            OptimizerSpec::RmsProp { .. } => OptimizerKind::RmsProp,
            OptimizerSpec::Adam { .. } => OptimizerKind::Adam,
            OptimizerSpec::AmsGrad { .. } => OptimizerKind::AmsGrad,
            OptimizerSpec::YamAdam { .. } => OptimizerKind::YamAdam,
        }
    }

    /// Checks rates and decay factors against their valid ranges.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        let rate = |eta: f64| eta > 0.0 && eta.is_finite();
        let decay = |d: f64| (0.0..1.0).contains(&d);
        let stab = |e: f64| e > 0.0 && e.is_finite();
        match *self {
            OptimizerSpec::Sgd { eta } if !rate(eta) => bad(format!("sgd eta {eta}")),
            OptimizerSpec::Momentum { eta, gamma } | OptimizerSpec::Nesterov { eta, gamma }
                if !rate(eta) || !decay(gamma) =>
            {
                bad(format!("momentum eta {eta}, gamma {gamma}"))
            }
            OptimizerSpec::Adagrad { eta, eps } if !rate(eta) || !stab(eps) => {
                bad(format!("adagrad eta {eta}, eps {eps}"))
            }
            OptimizerSpec::Adadelta { rho, eps } if !decay(rho) || !stab(eps) => {
                bad(format!("adadelta rho {rho}, eps {eps}"))
            }
            OptimizerSpec::RmsProp { eta, rho, eps } if !rate(eta) || !decay(rho) || !stab(eps) => {
                bad(format!("rmsprop eta {eta}, rho {rho}, eps {eps}"))
            }
            OptimizerSpec::Adam { eta, beta1, beta2, eps }
            | OptimizerSpec::AmsGrad { eta, beta1, beta2, eps }
                if !rate(eta) || !decay(beta1) || !decay(beta2) || !stab(eps) =>
            {
                bad(format!("adam eta {eta}, betas {beta1}/{beta2}, eps {eps}"))
            }
            OptimizerSpec::YamAdam { eps } if !stab(eps) => bad(format!("yamadam eps {eps}")),
            _ => Ok(()),
        }
    }
}

/// Termination policy of a minimization run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    /// Converged once the objective drops to this value or below.
    pub threshold: f64,
    /// Hard budget of update iterations.
    pub max_iters: usize,
    /// Stop early once the best value has not improved by at least 1e-12
    /// (relative) for this many iterations.
    pub patience: usize,
}

impl StopRule {
    pub fn new(threshold: f64, max_iters: usize, patience: usize) -> Self {
        Self {
            threshold,
            max_iters,
            patience,
        }
    }
}

/// Relative improvement below which the plateau counter keeps running.
const PLATEAU_RELATIVE: f64 = 1e-12;

/// Outcome of one minimization run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptRun {
    /// Iterate with the lowest objective seen.
    pub best_point: Vec<f64>,
    pub best_value: f64,
    /// Objective value at every iteration, starting with the initial point.
    pub trace: Vec<f64>,
    /// True iff `best_value <= threshold`.
    pub converged: bool,
    pub iterations_used: usize,
    /// True when an objective or gradient evaluation failed and the run
    /// was aborted with the trace collected so far.
    pub failed: bool,
}

/// Per-variant update state.
enum OptimizerState {
    Sgd {
        eta: f64,
    },
    Momentum {
        eta: f64,
        gamma: f64,
        v: Vec<f64>,
        nesterov: bool,
    },
    Adagrad {
        eta: f64,
        eps: f64,
        g2: Vec<f64>,
    },
    Adadelta {
        rho: f64,
        eps: f64,
        eg2: Vec<f64>,
        edx2: Vec<f64>,
    },
    RmsProp {
        eta: f64,
        rho: f64,
        eps: f64,
        eg2: Vec<f64>,
    },
    Adam {
        eta: f64,
        beta1: f64,
        beta2: f64,
        eps: f64,
        m: Vec<f64>,
        v: Vec<f64>,
        vmax: Option<Vec<f64>>,
    },
    YamAdam {
        eps: f64,
        m: Vec<f64>,
        v: Vec<f64>,
        s: Vec<f64>,
        beta: f64,
        dx_prev: Vec<f64>,
    },
}

impl OptimizerState {
    fn new(spec: &OptimizerSpec, dim: usize) -> Self {
        let z = || vec![0.0; dim];
        match *spec {
            OptimizerSpec::Sgd { eta } => OptimizerState::Sgd { eta },
            OptimizerSpec::Momentum { eta, gamma } => OptimizerState::Momentum {
                eta,
                gamma,
                v: z(),
                nesterov: false,
            },
            OptimizerSpec::Nesterov { eta, gamma } => OptimizerState::Momentum {
                eta,
                gamma,
                v: z(),
                nesterov: true,
            },
            OptimizerSpec::Adagrad { eta, eps } => OptimizerState::Adagrad { eta, eps, g2: z() },
            OptimizerSpec::Adadelta { rho, eps } => OptimizerState::Adadelta {
                rho,
                eps,
                eg2: z(),
                edx2: z(),
            },
            OptimizerSpec::RmsProp { eta, rho, eps } => OptimizerState::RmsProp {
                eta,
                rho,
                eps,
                eg2: z(),
            },
            OptimizerSpec::Adam {
                eta,
                beta1,
                beta2,
                eps,
            } => OptimizerState::Adam {
                eta,
                beta1,
                beta2,
                eps,
                m: z(),
                v: z(),
                vmax: None,
            },
            OptimizerSpec::AmsGrad {
                eta,
                beta1,
                beta2,
                eps,
            } => OptimizerState::Adam {
                eta,
                beta1,
                beta2,
                eps,
                m: z(),
                v: z(),
                vmax: Some(z()),
            },
            OptimizerSpec::YamAdam { eps } => OptimizerState::YamAdam {
                eps,
                m: z(),
                v: z(),
                s: z(),
                beta: 0.0,
                dx_prev: z(),
            },
        }
    }

    /// Point at which the gradient of this iteration is evaluated.
    fn gradient_point(&self, x: &[f64]) -> Vec<f64> {
        match self {
            OptimizerState::Momentum {
                gamma,
                v,
                nesterov: true,
                ..
            } => x.iter().zip(v).map(|(xi, vi)| xi - gamma * vi).collect(),
            _ => x.to_vec(),
        }
    }

    /// Applies one update in place; `t` counts from 1.
    fn update(&mut self, t: usize, x: &mut [f64], g: &[f64]) {
        match self {
            OptimizerState::Sgd { eta } => {
                for (xi, gi) in x.iter_mut().zip(g) {
                    *xi -= *eta * gi;
                }
            }
            OptimizerState::Momentum { eta, gamma, v, .. } => {
                for i in 0..x.len() {
                    v[i] = *gamma * v[i] + *eta * g[i];
                    x[i] -= v[i];
                }
            }
            OptimizerState::Adagrad { eta, eps, g2 } => {
                for i in 0..x.len() {
                    g2[i] += g[i] * g[i];
                    x[i] -= *eta * g[i] / (g2[i] + *eps).sqrt();
                }
            }
            OptimizerState::Adadelta {
                rho,
                eps,
                eg2,
                edx2,
            } => {
                for i in 0..x.len() {
                    eg2[i] = *rho * eg2[i] + (1.0 - *rho) * g[i] * g[i];
                    let dx = -((edx2[i] + *eps).sqrt() / (eg2[i] + *eps).sqrt()) * g[i];
                    edx2[i] = *rho * edx2[i] + (1.0 - *rho) * dx * dx;
                    x[i] += dx;
                }
            }
            OptimizerState::RmsProp { eta, rho, eps, eg2 } => {
                for i in 0..x.len() {
                    eg2[i] = *rho * eg2[i] + (1.0 - *rho) * g[i] * g[i];
                    x[i] -= *eta * g[i] / (eg2[i] + *eps).sqrt();
                }
            }
            OptimizerState::Adam {
                eta,
                beta1,
                beta2,
                eps,
                m,
                v,
                vmax,
            } => {
                let bc1 = 1.0 - beta1.powi(t as i32);
                let bc2 = 1.0 - beta2.powi(t as i32);
                for i in 0..x.len() {
                    m[i] = *beta1 * m[i] + (1.0 - *beta1) * g[i];
                    v[i] = *beta2 * v[i] + (1.0 - *beta2) * g[i] * g[i];
                    let mhat = m[i] / bc1;
                    let vhat = v[i] / bc2;
                    let denom = match vmax {
                        Some(vm) => {
                            vm[i] = vm[i].max(vhat);
                            vm[i]
                        }
                        None => vhat,
                    };
                    x[i] -= *eta * mhat / (denom.sqrt() + *eps);
                }
            }
            OptimizerState::YamAdam {
                eps,
                m,
                v,
                s,
                beta,
                dx_prev,
            } => {
                let b = *beta;
                let mut abs_sum = 0.0;
                let mut prev_abs_sum = 0.0;
                for i in 0..x.len() {
                    let m_old = m[i];
                    m[i] = b * m[i] + (1.0 - b) * g[i];
                    v[i] = b * v[i] + (1.0 - b) * (g[i] - m_old).powi(2);
                    s[i] = b * s[i] + (1.0 - b) * dx_prev[i] * dx_prev[i];
                    let dx = -((s[i] + *eps).sqrt() / (v[i] + *eps).sqrt()) * m[i];
                    x[i] += dx;
                    abs_sum += dx.abs();
                    prev_abs_sum += dx_prev[i].abs();
                    dx_prev[i] = dx;
                }
                let n = x.len() as f64;
                let h = (abs_sum / n) / (prev_abs_sum / n + *eps);
                *beta = 1.0 / (1.0 + (-h).exp()) - *eps;
            }
        }
    }
}

/// Minimizes `objective` from `x0`, reporting the best iterate seen.
///
/// An evaluation failure aborts the run and returns the trace collected so
/// far with `failed` set; convergence means the best value reached the
/// stop threshold.
pub fn minimize<O, G>(
    objective: O,
    gradient: G,
    x0: &[f64],
    spec: &OptimizerSpec,
    stop: &StopRule,
) -> OptRun
where
    O: Fn(&[f64]) -> Result<f64>,
    G: Fn(&[f64]) -> Result<Vec<f64>>,
{
    debug_assert!(stop.max_iters >= 1);
    let mut x = x0.to_vec();
    let mut state = OptimizerState::new(spec, x.len());
    let mut trace = Vec::with_capacity(stop.max_iters + 1);

    let f0 = match objective(&x) {
        Ok(f) => f,
        Err(_) => {
            return OptRun {
                best_point: x,
                best_value: f64::INFINITY,
                trace,
                converged: false,
                iterations_used: 0,
                failed: true,
            }
        }
    };
    trace.push(f0);
    let mut best_point = x.clone();
    let mut best_value = f0;
    let mut failed = false;
    let mut iterations = 0;
    let mut last_gain = 0usize;

    if best_value > stop.threshold {
        for t in 1..=stop.max_iters {
            iterations = t;
            let g = match gradient(&state.gradient_point(&x)) {
                Ok(g) => g,
                Err(_) => {
                    failed = true;
                    break;
                }
            };
            state.update(t, &mut x, &g);
            let f = match objective(&x) {
                Ok(f) => f,
                Err(_) => {
                    failed = true;
                    break;
                }
            };
            trace.push(f);
            if f < best_value {
                if best_value - f >= PLATEAU_RELATIVE * best_value.abs().max(f64::MIN_POSITIVE) {
                    last_gain = t;
                }
                best_value = f;
                best_point.copy_from_slice(&x);
            }
            if best_value <= stop.threshold {
                break;
            }
            if t - last_gain >= stop.patience {
                break;
            }
        }
    }

    OptRun {
        best_point,
        best_value,
        trace,
        converged: !failed && best_value <= stop.threshold,
        iterations_used: iterations,
        failed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn quadratic_1d() -> (
        impl Fn(&[f64]) -> Result<f64>,
        impl Fn(&[f64]) -> Result<Vec<f64>>,
    ) {
        (
            |x: &[f64]| Ok((x[0] - 3.0).powi(2)),
            |x: &[f64]| Ok(vec![2.0 * (x[0] - 3.0)]),
        )
    }

    #[test]
    fn sgd_hand_arithmetic_and_convergence() {
        let (f, g) = quadratic_1d();
        let run = minimize(
            &f,
            &g,
            &[0.0],
            &OptimizerSpec::Sgd { eta: 0.1 },
            &StopRule::new(1e-12, 200, 200),
        );
        // first update: 0 - 0.1 * (-6) = 0.6
        assert_relative_eq!(run.trace[1], (0.6_f64 - 3.0).powi(2), epsilon = 1e-12);
        assert!(run.converged);
        assert!((run.best_point[0] - 3.0).abs() <= 1e-6);
        assert!(run.iterations_used <= 200);
    }

    #[test]
    fn adam_first_step_has_learning_rate_magnitude() {
        // With bias correction, the first update is eta * g / (|g| + eps)
        // regardless of the gradient scale.
        let spec = OptimizerSpec::defaults(OptimizerKind::Adam);
        let mut state = OptimizerState::new(&spec, 3);
        let mut x = vec![0.0; 3];
        let g = [0.37, -140.0, 2e-3];
        state.update(1, &mut x, &g);
        for (xi, gi) in x.iter().zip(g) {
            assert!(
                (xi.abs() - 0.001).abs() <= 1e-4,
                "first Adam step {xi} not ~eta"
            );
            assert_eq!(xi.signum(), -gi.signum());
        }
    }

    #[test]
    fn all_variants_solve_the_sphere() {
        // Convex sanity oracle. Adagrad's 1/sqrt(t) rate schedule needs
        // ~15k iterations at its literature rate of 0.01; the budget leaves
        // room for it.
        let f = |x: &[f64]| Ok(x.iter().map(|c| c * c).sum::<f64>());
        let g = |x: &[f64]| Ok(x.iter().map(|c| 2.0 * c).collect());
        for kind in OptimizerKind::ALL {
            let run = minimize(
                &f,
                &g,
                &[1.0; 10],
                &OptimizerSpec::defaults(kind),
                &StopRule::new(1e-8, 50_000, 50_000),
            );
            assert!(
                run.converged,
                "{} failed the sphere: best {} after {} iters",
                kind.name(),
                run.best_value,
                run.iterations_used
            );
        }
    }

    #[test]
    fn best_value_is_min_of_trace_and_runs_are_deterministic() {
        let f = |x: &[f64]| {
            Ok((1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2))
        };
        let g = |x: &[f64]| {
            Ok(vec![
                -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]),
                200.0 * (x[1] - x[0] * x[0]),
            ])
        };
        let spec = OptimizerSpec::defaults(OptimizerKind::Adam);
        let stop = StopRule::new(1e-10, 500, 500);
        let a = minimize(&f, &g, &[-1.2, 1.0], &spec, &stop);
        let b = minimize(&f, &g, &[-1.2, 1.0], &spec, &stop);
        assert_eq!(a, b);
        let min = a.trace.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(a.best_value, min);
        assert_eq!(a.trace.len(), a.iterations_used + 1);
    }

    #[test]
    fn translation_equivariance_on_a_quadratic() {
        // Shift chosen as a power of two so the shifted arithmetic stays
        // exactly representable.
        let c = 2.0;
        let f0 = |x: &[f64]| Ok(x.iter().map(|v| v * v).sum::<f64>());
        let g0 = |x: &[f64]| Ok(x.iter().map(|v| 2.0 * v).collect::<Vec<_>>());
        let fc = move |x: &[f64]| Ok(x.iter().map(|v| (v - c) * (v - c)).sum::<f64>());
        let gc = move |x: &[f64]| Ok(x.iter().map(|v| 2.0 * (v - c)).collect::<Vec<_>>());
        for kind in OptimizerKind::ALL {
            let spec = OptimizerSpec::defaults(kind);
            let stop = StopRule::new(-1.0, 300, 300);
            let plain = minimize(&f0, &g0, &[1.0, -0.5, 0.25], &spec, &stop);
            let shifted = minimize(&fc, &gc, &[1.0 + c, -0.5 + c, 0.25 + c], &spec, &stop);
            for (a, b) in plain.trace.iter().zip(&shifted.trace) {
                assert_relative_eq!(a, b, epsilon = 1e-9, max_relative = 1e-9);
            }
            for i in 0..3 {
                assert_relative_eq!(
                    plain.best_point[i] + c,
                    shifted.best_point[i],
                    epsilon = 1e-9
                );
            }
        }
    }

    #[test]
    fn evaluation_failure_aborts_with_partial_trace() {
        let f = |x: &[f64]| {
            if x[0] < -0.5 {
                Err(Error::Diverged { step: 0 })
            } else {
                Ok(x[0] * x[0])
            }
        };
        let g = |_: &[f64]| Ok(vec![4.0]); // constant push to the left
        let run = minimize(
            &f,
            &g,
            &[0.4],
            &OptimizerSpec::Sgd { eta: 0.1 },
            &StopRule::new(-1.0, 100, 100),
        );
        assert!(run.failed);
        assert!(!run.converged);
        assert!(!run.trace.is_empty());
    }

    #[test]
    fn plateau_rule_stops_early() {
        // Objective independent of x: no improvement is ever possible.
        let f = |_: &[f64]| Ok(5.0);
        let g = |_: &[f64]| Ok(vec![0.0]);
        let run = minimize(
            &f,
            &g,
            &[1.0],
            &OptimizerSpec::defaults(OptimizerKind::Adam),
            &StopRule::new(0.0, 100_000, 50),
        );
        assert!(!run.converged);
        assert_eq!(run.iterations_used, 50);
    }

    #[test]
    fn documented_defaults() {
        assert_eq!(
            OptimizerSpec::defaults(OptimizerKind::Adam),
            OptimizerSpec::Adam {
                eta: 0.001,
                beta1: 0.9,
                beta2: 0.999,
                eps: 1e-8
            }
        );
        assert_eq!(
            OptimizerSpec::defaults(OptimizerKind::Adadelta),
            OptimizerSpec::Adadelta {
                rho: 0.95,
                eps: 1e-6
            }
        );
        assert_eq!(
            OptimizerSpec::defaults(OptimizerKind::Sgd),
            OptimizerSpec::Sgd { eta: 0.01 }
        );
        for kind in OptimizerKind::ALL {
            OptimizerSpec::defaults(kind).validate().unwrap();
            assert_eq!(OptimizerSpec::defaults(kind).kind(), kind);
        }
        assert!(OptimizerSpec::Sgd { eta: -1.0 }.validate().is_err());
        assert!(OptimizerSpec::Adadelta {
            rho: 1.0,
            eps: 1e-6
        }
        .validate()
        .is_err());
    }
}

//! Discrete-time deterministic system models and trajectory utilities.
//!
//! Both reference systems are fixed-step discretizations that are treated as
//! the ground-truth dynamics: the Lorenz equations under a classic 4th-order
//! Runge-Kutta update and the Mackey-Glass delay equation under an Euler
//! delay-line update. One `step` advances the internal time step `dt`.

use crate::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Number of fresh draws `sample_attractor` makes before giving up when
/// trajectories keep escaping to non-finite values.
const SAMPLE_RETRY_CAP: usize = 16;

/// A point in model space: the full latent state vector of a system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Microstate {
    components: Vec<f64>,
}

impl Microstate {
    /// Builds a state, rejecting NaN or infinite components.
    pub fn new(components: Vec<f64>) -> Result<Self> {
        if let Some(i) = components.iter().position(|c| !c.is_finite()) {
            return Err(Error::InvalidState(format!(
                "non-finite component at index {i}"
            )));
        }
        Ok(Self { components })
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.components
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.components.clone()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.components
    }
}

impl std::ops::Index<usize> for Microstate {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.components[i]
    }
}

/// A deterministic discrete-time map on model space.
///
/// `step_into` writes the successor of `x` (one `dt` update) without
/// checking finiteness; the provided methods layer validation, iteration
/// and attractor sampling on top of it.
pub trait SystemModel: Sync {
    /// Dimension of the model space.
    fn dimension(&self) -> usize;

    /// Internal time step advanced by one application of the map.
    fn dt(&self) -> f64;

    /// Writes the successor state of `x` into `out`. Both slices have
    /// length `dimension()`.
    fn step_into(&self, x: &[f64], out: &mut [f64]);

    /// Axis-aligned box from which attractor sampling draws its start,
    /// as per-component `(low, high)` ranges.
    fn sample_box(&self) -> Vec<(f64, f64)>;

    /// One `dt` update of `x`; the input is left unmodified.
    fn step(&self, x: &Microstate) -> Result<Microstate> {
        self.check_dim(x)?;
        let mut out = vec![0.0; self.dimension()];
        self.step_into(x.as_slice(), &mut out);
        if !all_finite(&out) {
            return Err(Error::Diverged { step: 1 });
        }
        Ok(Microstate { components: out })
    }

    /// `n`-fold composition of the map with itself; `n = 0` returns `x`.
    fn iterate(&self, x: &Microstate, n: usize) -> Result<Microstate> {
        self.check_dim(x)?;
        let mut cur = x.to_vec();
        let mut next = vec![0.0; self.dimension()];
        for i in 0..n {
            self.step_into(&cur, &mut next);
            if !all_finite(&next) {
                return Err(Error::Diverged { step: i + 1 });
            }
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(Microstate { components: cur })
    }

    /// Materializes `count` states starting at `x`, one every `stride` steps.
    fn trajectory(&self, x: &Microstate, count: usize, stride: usize) -> Result<Vec<Microstate>> {
        if count < 1 || stride < 1 {
            return Err(Error::InvalidConfig(format!(
                "trajectory needs count >= 1 and stride >= 1, got {count}, {stride}"
            )));
        }
        self.check_dim(x)?;
        let mut out = Vec::with_capacity(count);
        out.push(x.clone());
        let mut cur = x.to_vec();
        let mut next = vec![0.0; self.dimension()];
        for j in 1..count {
            for s in 0..stride {
                self.step_into(&cur, &mut next);
                if !all_finite(&next) {
                    return Err(Error::Diverged {
                        step: (j - 1) * stride + s + 1,
                    });
                }
                std::mem::swap(&mut cur, &mut next);
            }
            out.push(Microstate {
                components: cur.clone(),
            });
        }
        Ok(out)
    }

    /// Draws a random state in the sampling box and relaxes it onto the
    /// attractor by iterating `burn_in` steps. Escaping draws are retried
    /// with the next random draw, up to a fixed cap.
    fn sample_attractor<R: Rng + ?Sized>(&self, rng: &mut R, burn_in: usize) -> Result<Microstate>
    where
        Self: Sized,
    {
        if burn_in < 1 {
            return Err(Error::InvalidConfig(
                "sample_attractor needs burn_in >= 1".into(),
            ));
        }
        let bx = self.sample_box();
        let mut last = Err(Error::Diverged { step: 0 });
        for _ in 0..SAMPLE_RETRY_CAP {
            let draw: Vec<f64> = bx.iter().map(|&(lo, hi)| rng.gen_range(lo..hi)).collect();
            let start = Microstate { components: draw };
            match self.iterate(&start, burn_in) {
                Ok(x) => return Ok(x),
                Err(e) => last = Err(e),
            }
        }
        last
    }

    #[doc(hidden)]
    fn check_dim(&self, x: &Microstate) -> Result<()> {
        if x.dim() != self.dimension() {
            return Err(Error::DimensionMismatch(format!(
                "state has {} components, model expects {}",
                x.dim(),
                self.dimension()
            )));
        }
        Ok(())
    }
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|c| c.is_finite())
}

/// Lorenz equations advanced by one classic Runge-Kutta step per `dt`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LorenzModel {
    pub sigma: f64,
    pub rho: f64,
    pub beta: f64,
    pub dt: f64,
}

impl Default for LorenzModel {
    fn default() -> Self {
        Self {
            sigma: 10.0,
            rho: 28.0,
            beta: 8.0 / 3.0,
            dt: 0.01,
        }
    }
}

impl LorenzModel {
    pub fn new(sigma: f64, rho: f64, beta: f64, dt: f64) -> Result<Self> {
        if dt <= 0.0 || !dt.is_finite() {
            return Err(Error::InvalidConfig(format!("dt must be positive, got {dt}")));
        }
        Ok(Self { sigma, rho, beta, dt })
    }

    #[inline]
    fn rhs(&self, u: [f64; 3]) -> [f64; 3] {
        let [x, y, z] = u;
        [
            self.sigma * (y - x),
            x * (self.rho - z) - y,
            x * y - self.beta * z,
        ]
    }
}

impl SystemModel for LorenzModel {
    fn dimension(&self) -> usize {
        3
    }

    fn dt(&self) -> f64 {
        self.dt
    }

    fn step_into(&self, x: &[f64], out: &mut [f64]) {
        let h = self.dt;
        let u = [x[0], x[1], x[2]];
        let k1 = self.rhs(u);
        let k2 = self.rhs([
            u[0] + 0.5 * h * k1[0],
            u[1] + 0.5 * h * k1[1],
            u[2] + 0.5 * h * k1[2],
        ]);
        let k3 = self.rhs([
            u[0] + 0.5 * h * k2[0],
            u[1] + 0.5 * h * k2[1],
            u[2] + 0.5 * h * k2[2],
        ]);
        let k4 = self.rhs([u[0] + h * k3[0], u[1] + h * k3[1], u[2] + h * k3[2]]);
        for i in 0..3 {
            out[i] = u[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }

    fn sample_box(&self) -> Vec<(f64, f64)> {
        vec![(-20.0, 20.0), (-25.0, 25.0), (0.0, 45.0)]
    }
}

/// Mackey-Glass delay equation discretized as an Euler delay line.
///
/// The state holds `n_x` consecutive samples at spacing `dt = t_d / n_x`,
/// oldest first: component 1 is the delayed sample near `x(t - t_d)` and
/// component `n_x` is the present value `x(t)`. One step shifts the line by
/// one slot and appends the Euler update of the present value, which uses
/// the oldest slot as the delayed argument.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MackeyGlassModel {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub t_d: f64,
    pub n_x: usize,
    dt: f64,
    c_int: Option<i32>,
}

impl Default for MackeyGlassModel {
    fn default() -> Self {
        Self::new(0.2, 0.1, 10.0, 25.0, 50).expect("default parameters are valid")
    }
}

impl MackeyGlassModel {
    pub fn new(a: f64, b: f64, c: f64, t_d: f64, n_x: usize) -> Result<Self> {
        if t_d <= 0.0 || !t_d.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "delay must be positive, got {t_d}"
            )));
        }
        if n_x < 1 {
            return Err(Error::InvalidConfig("n_x must be at least 1".into()));
        }
        // Integer exponents take the exact powi path (x^10 stays defined
        // for transiently negative states).
        let c_int = (c.fract() == 0.0 && c.abs() <= 64.0).then_some(c as i32);
        Ok(Self {
            a,
            b,
            c,
            t_d,
            n_x,
            dt: t_d / n_x as f64,
            c_int,
        })
    }

    /// Growth-decay rate of the delay equation: `F(x, x_d)`.
    #[inline]
    fn rate(&self, x: f64, x_delayed: f64) -> f64 {
        let pc = match self.c_int {
            Some(p) => x_delayed.powi(p),
            None => x_delayed.powf(self.c),
        };
        self.a * x_delayed / (1.0 + pc) - self.b * x
    }
}

impl SystemModel for MackeyGlassModel {
    fn dimension(&self) -> usize {
        self.n_x
    }

    fn dt(&self) -> f64 {
        self.dt
    }

    fn step_into(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n_x;
        let current = x[n - 1];
        let delayed = x[0];
        out[..n - 1].copy_from_slice(&x[1..]);
        out[n - 1] = current + self.dt * self.rate(current, delayed);
    }

    fn sample_box(&self) -> Vec<(f64, f64)> {
        vec![(0.4, 1.4); self.n_x]
    }
}

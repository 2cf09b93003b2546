//! Seeded simulators for the diffusive (Ornstein-Uhlenbeck) and persistent
//! (Kac, telegraph) processes, together with their closed-form correlation laws.
//!
//! Both simulators are pure functions of `(params, grid, seed)`. Ensembles
//! give trial `i` the stream `trial_rng(seed, i)`, so results do not depend on
//! how trials are spread over worker threads.

use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_input, invalid_param, Result};
use crate::rng::{trial_rng, TrialRng};
use crate::scalar::{near_integer, Real};

/// Uniform sampling grid `t0 + k * dt` for `k = 0..=n_steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid<T> {
    t0: T,
    dt: T,
    n_steps: usize,
}

impl<T: Real> TimeGrid<T> {
    pub fn new(t0: T, dt: T, n_steps: usize) -> Result<Self> {
        if !t0.is_finite() || !dt.is_finite() {
            return Err(invalid_param("time grid origin and step must be finite"));
        }
        if dt <= T::zero() {
            return Err(invalid_param(format!("time step must be positive, got {dt}")));
        }
        if n_steps == 0 {
            return Err(invalid_param("time grid needs at least one step"));
        }
        Ok(Self { t0, dt, n_steps })
    }

    pub fn t0(&self) -> T {
        self.t0
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Number of sample points, `n_steps + 1`.
    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn time(&self, k: usize) -> T {
        self.t0 + T::from_usize(k).unwrap() * self.dt
    }

    pub fn end(&self) -> T {
        self.time(self.n_steps)
    }

    pub fn times(&self) -> impl Iterator<Item = T> + '_ {
        (0..self.len()).map(move |k| self.time(k))
    }

    /// Index of the grid point at time `t`. Times off the grid are rejected.
    pub fn index_of(&self, t: T) -> Result<usize> {
        let pos = (t - self.t0) / self.dt;
        match near_integer(pos, T::lit(1e-9)) {
            Some(k) if k <= self.n_steps => Ok(k),
            _ => Err(invalid_input(format!(
                "time {t} is not a grid point of t0={}, dt={}, n_steps={}",
                self.t0, self.dt, self.n_steps
            ))),
        }
    }

    /// Number of whole steps covering a duration, rounded to the nearest step.
    pub fn steps_for(&self, duration: T) -> Result<usize> {
        near_integer(duration / self.dt, T::lit(1e-9)).ok_or_else(|| {
            invalid_input(format!("duration {duration} is not a multiple of dt={}", self.dt))
        })
    }
}

/// Parameters of `du = -gamma u dt + sigma dW` with `V = v_rest + u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OUParams<T> {
    pub gamma: T,
    pub sigma: T,
    pub v_rest: T,
    pub v_init: T,
}

impl<T: Real> OUParams<T> {
    pub fn validate(&self) -> Result<()> {
        let all = [self.gamma, self.sigma, self.v_rest, self.v_init];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(invalid_param("OU parameters must be finite"));
        }
        if self.gamma <= T::zero() {
            return Err(invalid_param(format!(
                "OU relaxation rate must be positive (no stationary state otherwise), got {}",
                self.gamma
            )));
        }
        if self.sigma < T::zero() {
            return Err(invalid_param(format!("OU noise amplitude must be nonnegative, got {}", self.sigma)));
        }
        Ok(())
    }

    /// Stationary variance `sigma^2 / (2 gamma)`.
    pub fn stationary_variance(&self) -> T {
        self.sigma * self.sigma / (T::lit(2.0) * self.gamma)
    }

    /// Ten relaxation times.
    pub fn default_burn_in(&self) -> T {
        T::lit(10.0) / self.gamma
    }
}

/// Parameters of `dX/dt = mu + v s(t)` where `s` flips at Poisson rate `lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KacParams<T> {
    pub mu: T,
    pub v: T,
    pub lambda: T,
    pub x_init: T,
    pub s_init: i8,
}

impl<T: Real> KacParams<T> {
    pub fn validate(&self) -> Result<()> {
        let all = [self.mu, self.v, self.lambda, self.x_init];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(invalid_param("Kac parameters must be finite"));
        }
        if self.v <= T::zero() {
            return Err(invalid_param(format!("Kac speed must be positive, got {}", self.v)));
        }
        if self.lambda < T::zero() {
            return Err(invalid_param(format!("switching rate must be nonnegative, got {}", self.lambda)));
        }
        if self.s_init != 1 && self.s_init != -1 {
            return Err(invalid_param(format!("initial state must be +1 or -1, got {}", self.s_init)));
        }
        Ok(())
    }

    /// Velocity in state `s`.
    #[inline]
    pub fn velocity(&self, s: i8) -> T {
        self.mu + self.v * T::from_i8(s).unwrap()
    }

    /// Ten correlation times `1 / (2 lambda)`; zero for the frozen process.
    pub fn default_burn_in(&self) -> T {
        if self.lambda > T::zero() {
            T::lit(10.0) / (T::lit(2.0) * self.lambda)
        } else {
            T::zero()
        }
    }
}

/// How the internal state is chosen at `t0` for each trial of an ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KacInitialState {
    /// Every trial starts in `KacParams::s_init`.
    Fixed,
    /// `s(t0) = +1` or `-1` with probability 1/2 (the stationary law).
    Symmetric,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory<T> {
    pub grid: TimeGrid<T>,
    pub values: Vec<T>,
}

impl<T: Real> Trajectory<T> {
    pub fn new(grid: TimeGrid<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(invalid_input(format!(
                "trajectory has {} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid_input("trajectory values must be finite"));
        }
        Ok(Self { grid, values })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KacTrajectory<T> {
    pub grid: TimeGrid<T>,
    pub x: Vec<T>,
    pub s: Vec<i8>,
}

impl<T: Real> KacTrajectory<T> {
    pub fn new(grid: TimeGrid<T>, x: Vec<T>, s: Vec<i8>) -> Result<Self> {
        if x.len() != grid.len() || s.len() != grid.len() {
            return Err(invalid_input("Kac trajectory length does not match its grid"));
        }
        if s.iter().any(|&q| q != 1 && q != -1) {
            return Err(invalid_input("Kac internal state must be +1 or -1"));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(invalid_input("Kac positions must be finite"));
        }
        Ok(Self { grid, x, s })
    }

    /// Position as a plain trajectory (for threshold observables).
    pub fn position(&self) -> Trajectory<T> {
        Trajectory { grid: self.grid, values: self.x.clone() }
    }
}

/// Exact OU transition: `u' = a u + b xi` with `a = e^{-gamma dt}`,
/// `b = sigma sqrt((1 - a^2) / (2 gamma))`.
fn ou_path<T: Real>(params: &OUParams<T>, grid: &TimeGrid<T>, rng: &mut TrialRng) -> Trajectory<T> {
    let decay = (-params.gamma * grid.dt).exp();
    let two_gamma = T::lit(2.0) * params.gamma;
    let kick = params.sigma * (-(-two_gamma * grid.dt).exp_m1() / two_gamma).sqrt();
    let mut u = params.v_init - params.v_rest;
    let mut values = Vec::with_capacity(grid.len());
    values.push(params.v_rest + u);
    for _ in 0..grid.n_steps {
        let xi: f64 = StandardNormal.sample(rng);
        u = u * decay + kick * T::lit(xi);
        values.push(params.v_rest + u);
    }
    Trajectory { grid: *grid, values }
}

/// One OU path sampled with the exact Gaussian kernel.
pub fn simulate_ou<T: Real>(params: &OUParams<T>, grid: &TimeGrid<T>, seed: u64) -> Result<Trajectory<T>> {
    params.validate()?;
    Ok(ou_path(params, grid, &mut trial_rng(seed, 0)))
}

/// `trials` independent OU paths; trial `i` equals what a lone run on stream `i` yields.
pub fn simulate_ou_ensemble<T: Real>(
    params: &OUParams<T>,
    grid: &TimeGrid<T>,
    seed: u64,
    trials: usize,
) -> Result<Vec<Trajectory<T>>> {
    params.validate()?;
    Ok((0..trials as u64)
        .into_par_iter()
        .map(|i| ou_path(params, grid, &mut trial_rng(seed, i)))
        .collect())
}

/// Poisson clock producing successive flip times after `start`.
struct FlipClock {
    waiting: Option<Exp<f64>>,
}

impl FlipClock {
    fn new<T: Real>(lambda: T) -> Self {
        let waiting = if lambda > T::zero() { Some(Exp::new(lambda.as_f64()).unwrap()) } else { None };
        Self { waiting }
    }

    fn next_after<T: Real>(&self, t: T, rng: &mut TrialRng) -> T {
        match &self.waiting {
            Some(exp) => t + T::lit(exp.sample(rng)),
            None => T::infinity(),
        }
    }
}

fn kac_path<T: Real>(params: &KacParams<T>, s_init: i8, grid: &TimeGrid<T>, rng: &mut TrialRng) -> KacTrajectory<T> {
    let clock = FlipClock::new(params.lambda);
    let mut s = s_init;
    // Position is integrated exactly from the last flip (the anchor).
    let mut anchor_t = grid.t0;
    let mut anchor_x = params.x_init;
    let mut next_flip = clock.next_after(grid.t0, rng);
    let mut x = Vec::with_capacity(grid.len());
    let mut states = Vec::with_capacity(grid.len());
    for k in 0..grid.len() {
        let t = grid.time(k);
        while next_flip <= t {
            anchor_x = anchor_x + params.velocity(s) * (next_flip - anchor_t);
            anchor_t = next_flip;
            s = -s;
            next_flip = clock.next_after(next_flip, rng);
        }
        x.push(anchor_x + params.velocity(s) * (t - anchor_t));
        states.push(s);
    }
    KacTrajectory { grid: *grid, x, s: states }
}

/// One Kac path with exponential waiting times between flips.
pub fn simulate_kac<T: Real>(params: &KacParams<T>, grid: &TimeGrid<T>, seed: u64) -> Result<KacTrajectory<T>> {
    params.validate()?;
    Ok(kac_path(params, params.s_init, grid, &mut trial_rng(seed, 0)))
}

pub fn simulate_kac_ensemble<T: Real>(
    params: &KacParams<T>,
    grid: &TimeGrid<T>,
    seed: u64,
    trials: usize,
    initial: KacInitialState,
) -> Result<Vec<KacTrajectory<T>>> {
    params.validate()?;
    Ok((0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i);
            let s0 = match initial {
                KacInitialState::Fixed => params.s_init,
                KacInitialState::Symmetric => {
                    if rng.random::<bool>() {
                        1
                    } else {
                        -1
                    }
                }
            };
            kac_path(params, s0, grid, &mut rng)
        })
        .collect())
}

/// Flip times of a rate-`lambda` Poisson clock on `(0, horizon]`.
pub fn kac_flip_times<T: Real>(lambda: T, horizon: T, seed: u64) -> Result<Vec<T>> {
    if !(lambda >= T::zero()) || !horizon.is_finite() {
        return Err(invalid_param("flip clock needs lambda >= 0 and a finite horizon"));
    }
    let clock = FlipClock::new(lambda);
    let mut rng = trial_rng(seed, 0);
    let mut out = Vec::new();
    let mut t = clock.next_after(T::zero(), &mut rng);
    while t <= horizon {
        out.push(t);
        t = clock.next_after(t, &mut rng);
    }
    Ok(out)
}

/// Stationary OU autocovariance `sigma^2/(2 gamma) e^{-gamma |tau|}`.
pub fn ou_autocorrelation<T: Real>(params: &OUParams<T>, tau: T) -> Result<T> {
    if !(params.gamma > T::zero()) {
        return Err(invalid_param(format!("gamma must be positive, got {}", params.gamma)));
    }
    Ok(params.stationary_variance() * (-params.gamma * tau.abs()).exp())
}

/// `<s(t) s(0)> = e^{-2 lambda |tau|}`.
pub fn kac_state_autocorrelation<T: Real>(lambda: T, tau: T) -> T {
    (-T::lit(2.0) * lambda * tau.abs()).exp()
}

/// Mean squared displacement of the driftless Kac walk,
/// `(v^2 / (2 lambda^2)) (2 lambda t - 1 + e^{-2 lambda t})`.
pub fn kac_position_variance<T: Real>(v: T, lambda: T, t: T) -> T {
    let z = T::lit(2.0) * lambda * t;
    // v^2 t^2 * g(z) with g(z) = 2 (z - 1 + e^{-z}) / z^2, series near zero.
    let g = if z < T::lit(1e-4) {
        T::one() - z / T::lit(3.0) + z * z / T::lit(12.0)
    } else {
        T::lit(2.0) * (z + (-z).exp_m1()) / (z * z)
    };
    v * v * t * t * g
}

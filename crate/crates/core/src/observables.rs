//! Dichotomic observables `Q(t) in {+1, -1}` built from trajectories,
//! spike lists or the Kac internal state.

use serde::{Deserialize, Serialize};

use crate::error::{invalid_input, invalid_param, Result};
use crate::scalar::{near_integer, Real};
use crate::stochastic::{KacTrajectory, TimeGrid, Trajectory};

/// A `+1/-1` series on a time grid, tagged with its trial.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinarySeries<T> {
    pub grid: TimeGrid<T>,
    pub q: Vec<i8>,
    pub trial_id: i64,
}

impl<T: Real> BinarySeries<T> {
    pub fn new(grid: TimeGrid<T>, q: Vec<i8>, trial_id: i64) -> Result<Self> {
        if q.len() != grid.len() {
            return Err(invalid_input(format!(
                "binary series has {} entries for a grid of {} points",
                q.len(),
                grid.len()
            )));
        }
        if let Some(bad) = q.iter().find(|&&v| v != 1 && v != -1) {
            return Err(invalid_input(format!("binary series entries must be +1 or -1, found {bad}")));
        }
        Ok(Self { grid, q, trial_id })
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }
}

/// Threshold readout. Exact ties `V == v_th` map to `+1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSpec<T> {
    pub v_th: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpikeBinSpec<T> {
    pub bin_width: T,
}

/// `q_k = +1` if `V_k >= v_th`, else `-1`.
pub fn binarize_threshold<T: Real>(traj: &Trajectory<T>, spec: &ThresholdSpec<T>, trial_id: i64) -> Result<BinarySeries<T>> {
    if !spec.v_th.is_finite() {
        return Err(invalid_param("threshold must be finite"));
    }
    let q = traj.values.iter().map(|&v| if v >= spec.v_th { 1 } else { -1 }).collect();
    Ok(BinarySeries { grid: traj.grid, q, trial_id })
}

/// `q = +1` at grid time `t` iff some spike lies in `[t - w/2, t + w/2)`.
pub fn binarize_spikes<T: Real>(
    spike_times: &[T],
    grid: &TimeGrid<T>,
    spec: &SpikeBinSpec<T>,
    trial_id: i64,
) -> Result<BinarySeries<T>> {
    let w = spec.bin_width;
    if !(w > T::zero()) || !w.is_finite() {
        return Err(invalid_param(format!("bin width must be positive, got {w}")));
    }
    if near_integer(w / grid.dt(), T::lit(1e-9)).is_none_or(|m| m == 0) {
        return Err(invalid_param(format!("bin width {w} is not a multiple of dt={}", grid.dt())));
    }
    if spike_times.iter().any(|t| !t.is_finite()) {
        return Err(invalid_input("spike times must be finite"));
    }
    if spike_times.windows(2).any(|p| p[1] < p[0]) {
        return Err(invalid_input("spike times must be sorted ascending"));
    }
    let (lo, hi) = (grid.t0(), grid.end());
    let slack = grid.dt() * T::lit(1e-9);
    if let (Some(&first), Some(&last)) = (spike_times.first(), spike_times.last()) {
        if first < lo - slack || last > hi + slack {
            return Err(invalid_input(format!("spike times must lie within [{lo}, {hi}]")));
        }
    }
    let half = w / T::lit(2.0);
    let q = grid
        .times()
        .map(|t| {
            let start = spike_times.partition_point(|&s| s < t - half);
            match spike_times.get(start) {
                Some(&s) if s < t + half => 1,
                _ => -1,
            }
        })
        .collect();
    Ok(BinarySeries { grid: *grid, q, trial_id })
}

/// `Q(t) = s(t)`.
pub fn kac_internal_state<T: Real>(traj: &KacTrajectory<T>, trial_id: i64) -> BinarySeries<T> {
    BinarySeries { grid: traj.grid, q: traj.s.clone(), trial_id }
}

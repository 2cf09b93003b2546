//! Two-time correlation estimators and the Leggett-Garg combination
//! `K = C12 + C23 - C13`.
//!
//! Products of `+1/-1` values are tallied as integers, so partial tallies
//! merge exactly and the result does not depend on how trials were split
//! across workers.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid_input, Error, Result};
use crate::observables::BinarySeries;
use crate::scalar::Real;
use crate::stochastic::{TimeGrid, Trajectory};

/// Label attached to every K reported with a propagated error.
pub const ERROR_MODEL: &str =
    "std errors of C12, C23, C13 combined in quadrature as if independent (they share trials)";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrelationEstimate<T> {
    pub value: T,
    pub std_error: T,
    pub n_samples: u64,
}

/// Running count and sum of `+1/-1` products. The sum of squares equals the count.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ProductTally {
    pub count: u64,
    pub sum: i64,
}

impl ProductTally {
    #[inline]
    pub fn push(&mut self, product: i8) {
        self.count += 1;
        self.sum += product as i64;
    }

    pub fn merge(self, other: Self) -> Self {
        Self { count: self.count + other.count, sum: self.sum + other.sum }
    }

    pub fn mean<T: Real>(&self) -> T {
        T::from_i64(self.sum).unwrap() / T::from_u64(self.count).unwrap()
    }

    /// Unbiased sample variance of the products, computed exactly in integers.
    pub fn sample_variance<T: Real>(&self) -> T {
        if self.count < 2 {
            return T::zero();
        }
        let n = self.count as i128;
        let s = self.sum as i128;
        let num = n * n - s * s;
        T::from_i128(num).unwrap() / T::from_i128(n * (n - 1)).unwrap()
    }

    /// Estimate whose standard error uses `effective` samples in place of the raw count.
    pub fn estimate_with<T: Real>(&self, effective: T) -> CorrelationEstimate<T> {
        CorrelationEstimate {
            value: self.mean(),
            std_error: (self.sample_variance::<T>() / effective).sqrt(),
            n_samples: self.count,
        }
    }

    pub fn estimate<T: Real>(&self) -> CorrelationEstimate<T> {
        self.estimate_with(T::from_u64(self.count).unwrap())
    }
}

fn check_common_grid<T: Real>(series_set: &[BinarySeries<T>]) -> Result<TimeGrid<T>> {
    let first = series_set.first().ok_or_else(|| Error::InsufficientData("no series given".into()))?;
    for s in series_set {
        if s.grid != first.grid || s.q.len() != first.grid.len() {
            return Err(invalid_input(format!(
                "trial {} is on a different grid from trial {}",
                s.trial_id, first.trial_id
            )));
        }
    }
    Ok(first.grid)
}

/// Ensemble average of `q_i q_j` over trials.
pub fn correlate_ensemble<T: Real>(series_set: &[BinarySeries<T>], i: usize, j: usize) -> Result<CorrelationEstimate<T>> {
    if series_set.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "ensemble correlation needs at least 2 trials, got {}",
            series_set.len()
        )));
    }
    let grid = check_common_grid(series_set)?;
    if i >= grid.len() || j >= grid.len() {
        return Err(invalid_input(format!("grid index out of range: ({i}, {j}) for {} points", grid.len())));
    }
    let tally = series_set
        .par_iter()
        .map(|s| ProductTally { count: 1, sum: (s.q[i] * s.q[j]) as i64 })
        .reduce(ProductTally::default, ProductTally::merge);
    Ok(tally.estimate())
}

/// Mean of a real-valued statistic with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanEstimate<T> {
    pub mean: T,
    pub std_error: T,
    pub n_samples: u64,
}

impl<T: Real> MeanEstimate<T> {
    pub fn from_samples(samples: &[T]) -> Result<Self> {
        let n = samples.len();
        if n < 2 {
            return Err(Error::InsufficientData("need at least 2 samples".into()));
        }
        let nf = T::from_usize(n).unwrap();
        let mean = samples.iter().copied().sum::<T>() / nf;
        let ss = samples.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>();
        let var = ss / (nf - T::one());
        Ok(Self { mean, std_error: (var / nf).sqrt(), n_samples: n as u64 })
    }
}

/// Ensemble mean of `(V_i - center)(V_j - center)`, e.g. the OU autocovariance about `v_rest`.
pub fn cross_moment_ensemble<T: Real>(trajs: &[Trajectory<T>], i: usize, j: usize, center: T) -> Result<MeanEstimate<T>> {
    let products: Vec<T> = trajs
        .iter()
        .map(|tr| {
            let (a, b) = tr
                .values
                .get(i)
                .zip(tr.values.get(j))
                .ok_or_else(|| invalid_input(format!("grid index out of range: ({i}, {j})")))?;
            Ok((*a - center) * (*b - center))
        })
        .collect::<Result<_>>()?;
    MeanEstimate::from_samples(&products)
}

/// Time-average correlation from one stationary series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StationaryCorrelation<T> {
    pub estimate: CorrelationEstimate<T>,
    /// Sample size used for the standard error.
    pub effective_samples: T,
    /// Set when no decorrelation rate was supplied and the raw pair count was used.
    pub optimistic_error: bool,
}

fn effective_count<T: Real>(pairs: u64, dt: T, decorrelation_rate: Option<T>) -> (T, bool) {
    let n = T::from_u64(pairs).unwrap();
    match decorrelation_rate {
        Some(rate) => ((n * dt * rate).min(n).max(T::one()), false),
        None => (n, true),
    }
}

fn stationary_tally(q: &[i8], lag: usize, from: usize, to: usize) -> ProductTally {
    let mut t = ProductTally::default();
    for k in from..to {
        t.push(q[k] * q[k + lag]);
    }
    t
}

/// Mean of `q_k q_{k+lag}` over `k >= burn_in_steps`.
///
/// With a decorrelation rate `r` (for example `2 lambda` or `gamma`) the
/// standard error uses `N_eff = N dt r`, capped at `N`.
pub fn correlate_stationary<T: Real>(
    series: &BinarySeries<T>,
    lag_steps: usize,
    burn_in_steps: usize,
    decorrelation_rate: Option<T>,
) -> Result<StationaryCorrelation<T>> {
    let len = series.q.len();
    if len <= burn_in_steps + lag_steps + 1 {
        return Err(Error::InsufficientData(format!(
            "series of {len} points is too short for burn-in {burn_in_steps} and lag {lag_steps}"
        )));
    }
    let tally = stationary_tally(&series.q, lag_steps, burn_in_steps, len - lag_steps);
    let (n_eff, optimistic) = effective_count(tally.count, series.grid.dt(), decorrelation_rate);
    Ok(StationaryCorrelation { estimate: tally.estimate_with(n_eff), effective_samples: n_eff, optimistic_error: optimistic })
}

/// `K = c12 + c23 - c13` for correlations in `[-1, 1]`.
pub fn lg_statistic<T: Real>(c12: T, c23: T, c13: T) -> Result<T> {
    for (name, c) in [("c12", c12), ("c23", c23), ("c13", c13)] {
        if !(c >= -T::one() && c <= T::one()) {
            return Err(invalid_input(format!("{name} = {c} is outside [-1, 1]")));
        }
    }
    Ok(c12 + c23 - c13)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    /// `K > 1 + 3 se`.
    Violating,
    /// `K <= 1`.
    NonViolating,
    /// `1 < K <= 1 + 3 se`.
    Inconclusive,
}

impl Verdict {
    pub fn classify<T: Real>(k: T, std_error: T) -> Self {
        if k <= T::one() {
            Verdict::NonViolating
        } else if k > T::one() + T::lit(3.0) * std_error {
            Verdict::Violating
        } else {
            Verdict::Inconclusive
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LGResult<T> {
    pub t1: T,
    pub t2: T,
    pub t3: T,
    pub c12: CorrelationEstimate<T>,
    pub c23: CorrelationEstimate<T>,
    pub c13: CorrelationEstimate<T>,
    pub k: T,
    pub k_std_error: T,
    pub verdict: Verdict,
    pub error_model: &'static str,
}

fn quadrature<T: Real>(errors: [T; 3]) -> T {
    errors.iter().map(|&e| e * e).sum::<T>().sqrt()
}

/// Ensemble `C12, C23, C13` at grid times `t1 < t2 < t3` and the resulting K.
pub fn lg_from_trials<T: Real>(series_set: &[BinarySeries<T>], t1: T, t2: T, t3: T) -> Result<LGResult<T>> {
    if !(t1 < t2 && t2 < t3) {
        return Err(invalid_input(format!("measurement times must satisfy t1 < t2 < t3, got {t1}, {t2}, {t3}")));
    }
    let grid = check_common_grid(series_set)?;
    let (i1, i2, i3) = (grid.index_of(t1)?, grid.index_of(t2)?, grid.index_of(t3)?);
    let c12 = correlate_ensemble(series_set, i1, i2)?;
    let c23 = correlate_ensemble(series_set, i2, i3)?;
    let c13 = correlate_ensemble(series_set, i1, i3)?;
    let k = lg_statistic(c12.value, c23.value, c13.value)?;
    let k_std_error = quadrature([c12.std_error, c23.std_error, c13.std_error]);
    Ok(LGResult { t1, t2, t3, c12, c23, c13, k, k_std_error, verdict: Verdict::classify(k, k_std_error), error_model: ERROR_MODEL })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanPoint<T> {
    pub tau: T,
    pub k: T,
    pub std_error: T,
    pub verdict: Verdict,
}

/// Stationary `K(tau)` for equally spaced times, pooled over every series given.
///
/// For each lag the three correlations `C(t, t+tau)`, `C(t+tau, t+2tau)` and
/// `C(t, t+2tau)` are averaged over one common window of start times, which
/// is `2 C(tau) - C(2 tau)` for a stationary series.
pub fn lg_scan_pooled<T: Real>(
    series_set: &[BinarySeries<T>],
    tau_steps_list: &[usize],
    burn_in_steps: usize,
    decorrelation_rate: Option<T>,
) -> Result<Vec<ScanPoint<T>>> {
    let grid = check_common_grid(series_set)?;
    let len = grid.len();
    tau_steps_list
        .iter()
        .map(|&lag| {
            if len <= burn_in_steps + 2 * lag + 1 {
                return Err(Error::InsufficientData(format!(
                    "series of {len} points cannot fit burn-in {burn_in_steps} and lag 2 x {lag}"
                )));
            }
            let end = len - 2 * lag;
            let (mut t12, mut t23, mut t13) = (ProductTally::default(), ProductTally::default(), ProductTally::default());
            for s in series_set {
                let q = &s.q;
                for k in burn_in_steps..end {
                    t12.push(q[k] * q[k + lag]);
                    t23.push(q[k + lag] * q[k + 2 * lag]);
                    t13.push(q[k] * q[k + 2 * lag]);
                }
            }
            let (n_eff, _) = effective_count(t12.count, grid.dt(), decorrelation_rate);
            let (c12, c23, c13) = (t12.estimate_with(n_eff), t23.estimate_with(n_eff), t13.estimate_with(n_eff));
            let k = lg_statistic(c12.value, c23.value, c13.value)?;
            let se = quadrature([c12.std_error, c23.std_error, c13.std_error]);
            Ok(ScanPoint { tau: T::from_usize(lag).unwrap() * grid.dt(), k, std_error: se, verdict: Verdict::classify(k, se) })
        })
        .collect()
}

pub fn lg_scan_stationary<T: Real>(
    series: &BinarySeries<T>,
    tau_steps_list: &[usize],
    burn_in_steps: usize,
    decorrelation_rate: Option<T>,
) -> Result<Vec<ScanPoint<T>>> {
    lg_scan_pooled(std::slice::from_ref(series), tau_steps_list, burn_in_steps, decorrelation_rate)
}

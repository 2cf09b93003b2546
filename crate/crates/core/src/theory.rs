//! Closed-form Leggett-Garg predictions: the per-realization bound, the
//! exponential (diffusive) case and the damped oscillatory case, plus a
//! scanner that locates where `K(tau) > 1`.
//!
//! Correlations are normalized so that `C(0) = 1`, hence `K(0+) = 1`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid_input, Result};
use crate::scalar::Real;

/// Largest and smallest `Q1 Q2 + Q2 Q3 - Q1 Q3` over all eight `+1/-1` assignments.
pub fn enumerate_lg_bound() -> (i32, i32) {
    let signs = [1i32, -1];
    let mut k_max = i32::MIN;
    let mut k_min = i32::MAX;
    for &q1 in &signs {
        for &q2 in &signs {
            for &q3 in &signs {
                let k = q1 * q2 + q2 * q3 - q1 * q3;
                k_max = k_max.max(k);
                k_min = k_min.min(k);
            }
        }
    }
    (k_max, k_min)
}

/// `K(tau) = 2 e^{-gamma tau} - e^{-2 gamma tau} = 1 - (1 - e^{-gamma tau})^2`.
pub fn k_exponential<T: Real>(gamma: T, tau: T) -> T {
    let x = (-gamma * tau).exp();
    T::lit(2.0) * x - x * x
}

/// Frequency and damping of `C(dt) = cos(omega dt) e^{-gamma |dt|}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillatoryModel<T> {
    pub omega: T,
    pub gamma: T,
}

impl<T: Real> OscillatoryModel<T> {
    pub fn new(omega: T, gamma: T) -> Result<Self> {
        if !(omega >= T::zero()) || !(gamma >= T::zero()) || !omega.is_finite() || !gamma.is_finite() {
            return Err(crate::error::invalid_param(format!(
                "oscillatory model needs finite omega >= 0 and gamma >= 0, got omega={omega}, gamma={gamma}"
            )));
        }
        Ok(Self { omega, gamma })
    }

    /// Two-time correlation at separation `dt`.
    pub fn correlation(&self, dt: T) -> T {
        (self.omega * dt).cos() * (-self.gamma * dt.abs()).exp()
    }
}

/// `2 cos(omega tau) e^{-gamma tau} - cos(2 omega tau) e^{-2 gamma tau}`.
pub fn k_damped_oscillatory<T: Real>(model: &OscillatoryModel<T>, tau: T) -> T {
    let two = T::lit(2.0);
    let theta = model.omega * tau;
    let decay = (-model.gamma * tau).exp();
    two * theta.cos() * decay - (two * theta).cos() * decay * decay
}

/// Undamped form `1 + 2 cos(theta) (1 - cos(theta))`.
pub fn k_undamped_identity<T: Real>(theta: T) -> T {
    let c = theta.cos();
    T::one() + T::lit(2.0) * c * (T::one() - c)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViolationReport<T> {
    pub tau_star: T,
    pub k_max: T,
    /// Open intervals on which `K > 1`. Interior endpoints are roots of `K = 1`;
    /// an endpoint may also be the edge of the scanned range.
    pub violating_intervals: Vec<(T, T)>,
}

/// Root tolerance on tau.
pub const ROOT_TOL: f64 = 1e-10;
/// A refined local minimum of `K - 1` below this counts as a touching root.
const TOUCH_TOL: f64 = 1e-13;

fn bisect<T: Real, F: Fn(T) -> bool>(mut a: T, mut b: T, above: F) -> T {
    // Invariant: above(a) != above(b).
    let side_a = above(a);
    let tol = T::lit(ROOT_TOL);
    while (b - a).abs() > tol {
        let m = a + (b - a) / T::lit(2.0);
        if m <= a || m >= b {
            break;
        }
        if above(m) == side_a {
            a = m;
        } else {
            b = m;
        }
    }
    a + (b - a) / T::lit(2.0)
}

/// Golden-section search for the minimizer of `f` on `[a, b]`.
pub fn golden_min<T: Real, F: Fn(T) -> T>(mut a: T, mut b: T, f: F, tol: T) -> T {
    let inv_phi = (T::lit(5.0).sqrt() - T::one()) / T::lit(2.0);
    let mut c = b - (b - a) * inv_phi;
    let mut d = a + (b - a) * inv_phi;
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) * inv_phi;
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) * inv_phi;
            fd = f(d);
        }
    }
    (a + b) / T::lit(2.0)
}

/// Dense scan of `K(tau)` on `[lo, hi]` with bisection refinement of every
/// `K = 1` crossing and golden-section refinement of the maximum.
pub fn violation_region<T: Real>(model: &OscillatoryModel<T>, tau_range: (T, T), grid_points: usize) -> Result<ViolationReport<T>> {
    let (lo, hi) = tau_range;
    if !(lo > T::zero()) || !(hi > lo) || !hi.is_finite() {
        return Err(invalid_input(format!("tau range must satisfy 0 < lo < hi, got ({lo}, {hi})")));
    }
    if grid_points < 100 {
        return Err(invalid_input(format!("need at least 100 scan points, got {grid_points}")));
    }
    let k = |tau: T| k_damped_oscillatory(model, tau);
    let excess = |tau: T| k(tau) - T::one();
    let step = (hi - lo) / T::from_usize(grid_points - 1).unwrap();
    let taus: Vec<T> = (0..grid_points)
        .map(|i| if i + 1 == grid_points { hi } else { lo + T::from_usize(i).unwrap() * step })
        .collect();
    let vals: Vec<T> = taus.iter().map(|&t| excess(t)).collect();

    // Maximum.
    let (imax, _) = vals
        .iter()
        .enumerate()
        .fold((0, T::neg_infinity()), |best, (i, &v)| if v > best.1 { (i, v) } else { best });
    let a = taus[imax.saturating_sub(1)];
    let b = taus[(imax + 1).min(grid_points - 1)];
    let tau_star = golden_min(a, b, |t| -k(t), T::epsilon().sqrt() * T::lit(1e-4) * b.abs().max(T::one()));
    let tau_star = if k(tau_star) >= k(taus[imax]) { tau_star } else { taus[imax] };
    let k_max = k(tau_star);

    // Boundaries of the set {K > 1}: sign changes and touching zeros.
    let above = |t: T| excess(t) > T::zero();
    let mut cuts: Vec<(T, bool)> = Vec::new();
    for i in 0..grid_points - 1 {
        let (p, q) = (vals[i] > T::zero(), vals[i + 1] > T::zero());
        if p != q {
            cuts.push((bisect(taus[i], taus[i + 1], above), false));
        } else if p && i > 0 && vals[i] <= vals[i - 1] && vals[i] <= vals[i + 1] {
            let m = golden_min(taus[i - 1], taus[i + 1], excess, T::lit(ROOT_TOL));
            if excess(m) <= T::lit(TOUCH_TOL) {
                cuts.push((m, true));
            }
        }
    }
    let mut intervals = Vec::new();
    let mut start = if vals[0] > T::zero() { Some(lo) } else { None };
    for &(c, touching) in &cuts {
        match start {
            Some(s) => {
                intervals.push((s, c));
                // A touching zero closes one interval and opens the next.
                start = if touching { Some(c) } else { None };
            }
            None => start = Some(c),
        }
    }
    if let Some(s) = start {
        intervals.push((s, hi));
    }
    intervals.retain(|(a, b)| b > a);
    Ok(ViolationReport { tau_star, k_max, violating_intervals: intervals })
}

//! Periodic 1D lattice shared by the telegraph and Dirac solvers: the grid,
//! the two split sub-steps (advection and two-state mixing), and the
//! semi-discrete generator used by the matrix-exponential oracles.

use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, Scalar};
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_param, Error, Result};
use crate::scalar::{near_integer, Real};

/// Nodes `x0 + i dx` for `i in 0..n_cells`, periodic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceGrid<T> {
    x0: T,
    dx: T,
    n_cells: usize,
}

/// Largest grid the dense matrix oracles accept.
pub const MAX_ORACLE_CELLS: usize = 256;

impl<T: Real> SpaceGrid<T> {
    pub fn new(x0: T, dx: T, n_cells: usize) -> Result<Self> {
        if !x0.is_finite() || !dx.is_finite() || dx <= T::zero() {
            return Err(invalid_param(format!("space grid needs finite x0 and dx > 0, got x0={x0}, dx={dx}")));
        }
        if n_cells < 8 {
            return Err(invalid_param(format!("space grid needs at least 8 cells, got {n_cells}")));
        }
        Ok(Self { x0, dx, n_cells })
    }

    /// Grid covering `[x_min, x_max)` with spacing `dx`; the span must be a whole number of cells.
    pub fn from_range(x_min: T, x_max: T, dx: T) -> Result<Self> {
        if !(x_max > x_min) {
            return Err(invalid_param(format!("x range must satisfy x_min < x_max, got ({x_min}, {x_max})")));
        }
        let n = near_integer((x_max - x_min) / dx, T::lit(1e-9))
            .ok_or_else(|| invalid_param(format!("range ({x_min}, {x_max}) is not a whole number of cells of {dx}")))?;
        Self::new(x_min, dx, n)
    }

    pub fn x0(&self) -> T {
        self.x0
    }

    pub fn dx(&self) -> T {
        self.dx
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn length(&self) -> T {
        self.dx * T::from_usize(self.n_cells).unwrap()
    }

    #[inline]
    pub fn x(&self, i: usize) -> T {
        self.x0 + T::from_usize(i).unwrap() * self.dx
    }

    pub fn xs(&self) -> impl Iterator<Item = T> + '_ {
        (0..self.n_cells).map(move |i| self.x(i))
    }

    /// Node nearest to `x`, if it lies on the grid.
    pub fn nearest(&self, x: T) -> Option<usize> {
        let pos = ((x - self.x0) / self.dx).round();
        pos.to_usize().filter(|&i| i < self.n_cells)
    }
}

/// Steps needed to reach `t_final` with step `dt`; `t_final` must be a multiple of `dt`.
pub fn step_count<T: Real>(t_final: T, dt: T) -> Result<usize> {
    if !(t_final >= T::zero()) {
        return Err(invalid_param(format!("final time must be nonnegative, got {t_final}")));
    }
    near_integer(t_final / dt, T::lit(1e-9))
        .ok_or_else(|| invalid_param(format!("final time {t_final} is not a multiple of dt={dt}")))
}

/// Courant numbers within this distance of +-1 are advected by an exact shift.
const EXACT_SHIFT_TOL: f64 = 1e-9;

/// Signed Courant number `speed dt / dx`, refusing anything beyond 1 in magnitude.
pub fn courant<T: Real>(speed: T, dt: T, dx: T) -> Result<T> {
    let c = speed * dt / dx;
    if !c.is_finite() || c.abs() > T::one() + T::lit(EXACT_SHIFT_TOL) {
        return Err(Error::Configuration(format!(
            "CFL condition violated: |{speed}| * {dt} / {dx} = {} > 1",
            c.abs()
        )));
    }
    Ok(c)
}

/// One advection sub-step on a periodic lattice.
///
/// `|c| = 1` is an exact one-cell shift; otherwise first-order upwind, which
/// is a convex combination of neighbours and so conserves the sum and (for
/// real data) positivity.
pub fn advect<T, E>(values: &[E], c: T) -> Vec<E>
where
    T: Real,
    E: Copy + Add<Output = E> + Mul<T, Output = E>,
{
    let n = values.len();
    let one = T::one();
    if c == T::zero() {
        return values.to_vec();
    }
    if (c.abs() - one).abs() <= T::lit(EXACT_SHIFT_TOL) {
        let mut out = values.to_vec();
        if c > T::zero() {
            out.rotate_right(1);
        } else {
            out.rotate_left(1);
        }
        return out;
    }
    let w = c.abs();
    let stay = one - w;
    (0..n)
        .map(|i| {
            let upwind = if c > T::zero() { values[(i + n - 1) % n] } else { values[(i + 1) % n] };
            values[i] * stay + upwind * w
        })
        .collect()
}

/// Pointwise `(p, m) -> (a p + b m, b p + a m)`.
pub fn mix<E>(plus: &mut [E], minus: &mut [E], a: E, b: E)
where
    E: Copy + Add<Output = E> + Mul<Output = E>,
{
    for (p, m) in plus.iter_mut().zip(minus.iter_mut()) {
        let (op, om) = (*p, *m);
        *p = a * op + b * om;
        *m = b * op + a * om;
    }
}

/// Semi-discrete generator on the stacked state `[plus; minus]`:
/// upwind advection at `speed_plus` / `speed_minus` and the flip coupling
/// `-rate (p_s - p_{-s})`. `rate` may be complex.
pub fn two_state_generator<T, E>(speed_plus: T, speed_minus: T, rate: E, grid: &SpaceGrid<T>) -> Result<DMatrix<E>>
where
    T: Real,
    E: Scalar + Copy + Zero + Add<Output = E> + Sub<Output = E> + From<T>,
{
    let n = grid.n_cells();
    if n > MAX_ORACLE_CELLS {
        return Err(Error::Configuration(format!(
            "dense generator is limited to {MAX_ORACLE_CELLS} cells, got {n}"
        )));
    }
    let mut g = DMatrix::<E>::zeros(2 * n, 2 * n);
    for (block, speed) in [(0usize, speed_plus), (1, speed_minus)] {
        let off = block * n;
        let rate_adv = speed.abs() / grid.dx();
        if rate_adv == T::zero() {
            continue;
        }
        for i in 0..n {
            let up = if speed > T::zero() { (i + n - 1) % n } else { (i + 1) % n };
            g[(off + i, off + i)] = g[(off + i, off + i)] - E::from(rate_adv);
            g[(off + i, off + up)] = g[(off + i, off + up)] + E::from(rate_adv);
        }
    }
    for i in 0..n {
        let (p, m) = (i, n + i);
        g[(p, p)] = g[(p, p)] - rate;
        g[(p, m)] = g[(p, m)] + rate;
        g[(m, m)] = g[(m, m)] - rate;
        g[(m, p)] = g[(m, p)] + rate;
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn grid_construction() {
        let g = SpaceGrid::from_range(-1.0, 1.0, 0.25).unwrap();
        assert_eq!(g.n_cells(), 8);
        assert_eq!(g.x(4), 0.0);
        assert_eq!(g.nearest(0.1), Some(4));
        assert_eq!(g.nearest(5.0), None);
        assert!(SpaceGrid::from_range(-1.0, 1.0, 0.3).is_err());
        assert!(SpaceGrid::new(0.0, 0.1, 7).is_err());
        assert!(SpaceGrid::new(0.0, -0.1, 10).is_err());
    }

    #[test]
    fn exact_shift_and_upwind() {
        let v = vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        assert_eq!(advect(&v, 1.0), vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(advect(&v, -1.0), vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(advect(&v, 0.25), vec![0.0, 0.75, 0.25, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(advect(&v, -0.5), vec![0.5, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let z: Vec<Complex64> = v.iter().map(|&x| Complex64::new(0.0, x)).collect();
        assert_eq!(advect(&z, 1.0)[2], Complex64::new(0.0, 1.0));
    }

    #[test]
    fn courant_limit() {
        assert!(courant(1.0, 0.1, 0.1).is_ok());
        assert!(courant(-1.0, 0.1, 0.1).is_ok());
        assert!(matches!(courant(1.5, 0.1, 0.1), Err(Error::Configuration(_))));
    }

    #[test]
    fn generator_columns_sum_to_zero() {
        let grid = SpaceGrid::new(0.0, 0.5, 16).unwrap();
        let g: DMatrix<f64> = two_state_generator(2.0, -2.0, 1.0, &grid).unwrap();
        for j in 0..32 {
            assert_eq!(g.column(j).sum(), 0.0);
        }
        assert!(two_state_generator::<f64, f64>(1.0, -1.0, 1.0, &SpaceGrid::new(0.0, 0.1, 257).unwrap()).is_err());
    }
}

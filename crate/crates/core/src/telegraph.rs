//! Two-component Kac balance equations
//!
//! ```text
//! dP+/dt = -(mu + v) dP+/dx - lambda P+ + lambda P-
//! dP-/dt = -(mu - v) dP-/dx - lambda P- + lambda P+
//! ```
//!
//! whose total density `P = P+ + P-` obeys the telegrapher's equation. Each
//! step advects both components (exact shift at unit Courant number, upwind
//! otherwise) and then mixes them exactly over `dt` with `r = e^{-2 lambda dt}`.
//! Both sub-steps conserve probability and positivity.

use nalgebra::{DMatrix, DVector, RealField};
use serde::{Deserialize, Serialize};

use crate::error::{invalid_param, Error, Result};
use crate::lattice::{advect, courant, mix, step_count, two_state_generator, SpaceGrid};
use crate::scalar::Real;
use crate::stochastic::{simulate_kac_ensemble, KacInitialState, KacParams, TimeGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TelegraphParams<T> {
    pub mu: T,
    pub v: T,
    pub lambda: T,
    pub dt: T,
}

impl<T: Real> TelegraphParams<T> {
    /// Checks the parameters and the CFL condition `(|mu| + v) dt / dx <= 1`.
    pub fn validate(&self, grid: &SpaceGrid<T>) -> Result<()> {
        if [self.mu, self.v, self.lambda, self.dt].iter().any(|x| !x.is_finite()) {
            return Err(invalid_param("telegraph parameters must be finite"));
        }
        if self.v <= T::zero() || self.lambda < T::zero() || self.dt <= T::zero() {
            return Err(invalid_param(format!(
                "telegraph needs v > 0, lambda >= 0, dt > 0; got v={}, lambda={}, dt={}",
                self.v, self.lambda, self.dt
            )));
        }
        courant(self.mu.abs() + self.v, self.dt, grid.dx())?;
        Ok(())
    }

    /// Largest characteristic speed `|mu| + v`.
    pub fn max_speed(&self) -> T {
        self.mu.abs() + self.v
    }
}

/// Partial densities `P+`, `P-` on a periodic grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Field1D<T> {
    pub grid: SpaceGrid<T>,
    pub p_plus: Vec<T>,
    pub p_minus: Vec<T>,
}

impl<T: Real> Field1D<T> {
    pub fn new(grid: SpaceGrid<T>, p_plus: Vec<T>, p_minus: Vec<T>) -> Result<Self> {
        if p_plus.len() != grid.n_cells() || p_minus.len() != grid.n_cells() {
            return Err(invalid_param("field length does not match its grid"));
        }
        let slack = T::lit(-1e-12);
        if p_plus.iter().chain(&p_minus).any(|&p| !p.is_finite() || p < slack) {
            return Err(invalid_param("densities must be finite and nonnegative"));
        }
        Ok(Self { grid, p_plus, p_minus })
    }

    /// Unit mass in the cell nearest `x`, split equally between the two states.
    pub fn delta(grid: SpaceGrid<T>, x: T) -> Result<Self> {
        let i = grid.nearest(x).ok_or_else(|| invalid_param(format!("delta position {x} is off the grid")))?;
        let mut p_plus = vec![T::zero(); grid.n_cells()];
        let mut p_minus = p_plus.clone();
        let h = T::lit(0.5) / grid.dx();
        p_plus[i] = h;
        p_minus[i] = h;
        Ok(Self { grid, p_plus, p_minus })
    }

    pub fn total(&self) -> Vec<T> {
        self.p_plus.iter().zip(&self.p_minus).map(|(a, b)| *a + *b).collect()
    }

    pub fn min_entry(&self) -> T {
        self.p_plus.iter().chain(&self.p_minus).fold(T::infinity(), |m, &p| m.min(p))
    }
}

/// Mixing coefficients `((1 + r)/2, (1 - r)/2)` with `r = e^{-2 lambda dt}`.
pub fn relaxation_weights<T: Real>(lambda: T, dt: T) -> (T, T) {
    let flip = -(-T::lit(2.0) * lambda * dt).exp_m1() / T::lit(2.0);
    (T::one() - flip, flip)
}

fn step_unchecked<T: Real>(field: &Field1D<T>, c_plus: T, c_minus: T, weights: (T, T)) -> Field1D<T> {
    let mut p_plus = advect(&field.p_plus, c_plus);
    let mut p_minus = advect(&field.p_minus, c_minus);
    mix(&mut p_plus, &mut p_minus, weights.0, weights.1);
    Field1D { grid: field.grid, p_plus, p_minus }
}

/// One split step: advect, then relax the two states exactly over `dt`.
pub fn step_telegraph<T: Real>(field: &Field1D<T>, params: &TelegraphParams<T>) -> Result<Field1D<T>> {
    params.validate(&field.grid)?;
    let dx = field.grid.dx();
    let c_plus = courant(params.mu + params.v, params.dt, dx)?;
    let c_minus = courant(params.mu - params.v, params.dt, dx)?;
    Ok(step_unchecked(field, c_plus, c_minus, relaxation_weights(params.lambda, params.dt)))
}

/// Evolves to `t_final`, calling `observe(step_index, field)` after every step
/// (and once for the initial field with index 0).
pub fn evolve_telegraph_with<T: Real, F: FnMut(usize, &Field1D<T>)>(
    field: &Field1D<T>,
    params: &TelegraphParams<T>,
    t_final: T,
    mut observe: F,
) -> Result<Field1D<T>> {
    params.validate(&field.grid)?;
    let n = step_count(t_final, params.dt)?;
    let dx = field.grid.dx();
    let c_plus = courant(params.mu + params.v, params.dt, dx)?;
    let c_minus = courant(params.mu - params.v, params.dt, dx)?;
    let weights = relaxation_weights(params.lambda, params.dt);
    let mut current = field.clone();
    observe(0, &current);
    for k in 1..=n {
        current = step_unchecked(&current, c_plus, c_minus, weights);
        observe(k, &current);
    }
    Ok(current)
}

pub fn evolve_telegraph<T: Real>(field: &Field1D<T>, params: &TelegraphParams<T>, t_final: T) -> Result<Field1D<T>> {
    evolve_telegraph_with(field, params, t_final, |_, _| {})
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moments<T> {
    pub mass: T,
    pub mean: T,
    pub variance: T,
}

/// Mass, mean and variance of the total density (node positions, no unwrapping).
pub fn telegraph_moments<T: Real>(field: &Field1D<T>) -> Result<Moments<T>> {
    let dx = field.grid.dx();
    let total = field.total();
    let mass = total.iter().copied().sum::<T>() * dx;
    if !(mass > T::zero()) {
        return Err(Error::Degenerate("field has zero mass".into()));
    }
    let mean = field.grid.xs().zip(&total).map(|(x, &p)| x * p).sum::<T>() * dx / mass;
    let variance = field.grid.xs().zip(&total).map(|(x, &p)| (x - mean) * (x - mean) * p).sum::<T>() * dx / mass;
    Ok(Moments { mass, mean, variance })
}

/// Dense generator of the semi-discrete (upwind) balance equations on `[P+; P-]`.
/// Columns sum to zero.
pub fn telegraph_generator_matrix<T: Real + RealField>(params: &TelegraphParams<T>, grid: &SpaceGrid<T>) -> Result<DMatrix<T>> {
    params.validate(grid)?;
    two_state_generator(params.mu + params.v, params.mu - params.v, params.lambda, grid)
}

/// `exp(G t) [P+; P-]` for the semi-discrete generator.
pub fn expm_evolve<T: Real + RealField>(field: &Field1D<T>, params: &TelegraphParams<T>, t: T) -> Result<Field1D<T>> {
    let g = telegraph_generator_matrix(params, &field.grid)?;
    let n = field.grid.n_cells();
    let p0 = DVector::from_iterator(2 * n, field.p_plus.iter().chain(&field.p_minus).copied());
    let p = (g * t).exp() * p0;
    Ok(Field1D { grid: field.grid, p_plus: p.rows(0, n).iter().copied().collect(), p_minus: p.rows(n, n).iter().copied().collect() })
}

/// Binned PDE and Monte Carlo endpoint distributions and their L1 distance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PdeMcComparison<T> {
    pub l1_distance: T,
    /// `n_bins + 1` edges.
    pub bin_edges: Vec<T>,
    pub pde_mass: Vec<T>,
    pub mc_mass: Vec<T>,
}

/// Evolves a delta at `x = 0` (both states equally likely) to `t_final` and
/// compares it with a histogram of `n_traj` simulated Kac endpoints.
///
/// The lattice spacing is `(|mu| + v) dt`, so the faster component moves by
/// exact shifts; bin edges coincide with cell boundaries and each bin
/// spans an even number of cells.
pub fn compare_pde_mc<T: Real>(params: &TelegraphParams<T>, t_final: T, n_traj: usize, seed: u64, n_bins: usize) -> Result<PdeMcComparison<T>> {
    if n_traj < 10_000 {
        return Err(invalid_param(format!("PDE/MC comparison needs at least 10^4 trajectories, got {n_traj}")));
    }
    if n_bins == 0 {
        return Err(invalid_param("need at least one bin"));
    }
    let steps = step_count(t_final, params.dt)?;
    if steps == 0 {
        return Err(invalid_param("final time must be positive"));
    }
    let dx = params.max_speed() * params.dt;
    let support = 2 * steps + 1;
    // At unit Courant number the lattice walk occupies cells of one parity
    // only, so bins must span an even number of cells.
    let per_bin = support.div_ceil(n_bins).next_multiple_of(2);
    let extra = n_bins * per_bin - support;
    let left_extra = extra / 2;
    let pad = left_extra.max(extra - left_extra) + 4;
    let half = steps + pad;
    let grid = SpaceGrid::new(-T::from_usize(half).unwrap() * dx, dx, 2 * half + 1)?;
    let first_cell = pad - left_extra;

    let evolved = evolve_telegraph(&Field1D::delta(grid, T::zero())?, params, t_final)?;
    let total = evolved.total();
    let mut pde_mass = vec![T::zero(); n_bins];
    let mut pde_outside = T::zero();
    for (j, &p) in total.iter().enumerate() {
        match j.checked_sub(first_cell).map(|o| o / per_bin).filter(|&b| b < n_bins) {
            Some(b) => pde_mass[b] = pde_mass[b] + p * dx,
            None => pde_outside = pde_outside + p * dx,
        }
    }

    let kac = KacParams { mu: params.mu, v: params.v, lambda: params.lambda, x_init: T::zero(), s_init: 1 };
    let tgrid = TimeGrid::new(T::zero(), t_final, 1)?;
    let paths = simulate_kac_ensemble(&kac, &tgrid, seed, n_traj, KacInitialState::Symmetric)?;
    let mut counts = vec![0u64; n_bins];
    let mut outside = 0u64;
    let x0 = grid.x0();
    for path in &paths {
        let x = path.x[1];
        let cell = ((x - x0) / dx + T::lit(0.5)).floor();
        let bin = cell
            .to_i64()
            .and_then(|c| c.checked_sub(first_cell as i64))
            .filter(|&o| o >= 0)
            .map(|o| o as usize / per_bin)
            .filter(|&b| b < n_bins);
        match bin {
            Some(b) => counts[b] += 1,
            None => outside += 1,
        }
    }
    let norm = T::from_usize(n_traj).unwrap();
    let mc_mass: Vec<T> = counts.iter().map(|&c| T::from_u64(c).unwrap() / norm).collect();
    let l1 = pde_mass.iter().zip(&mc_mass).map(|(a, b)| (*a - *b).abs()).sum::<T>()
        + pde_outside
        + T::from_u64(outside).unwrap() / norm;
    let edge = |b: usize| grid.x(first_cell + b * per_bin) - dx / T::lit(2.0);
    Ok(PdeMcComparison { l1_distance: l1, bin_edges: (0..=n_bins).map(edge).collect(), pde_mass, mc_mass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grid(n: usize, dx: f64) -> SpaceGrid<f64> {
        SpaceGrid::new(-(n as f64 / 2.0) * dx, dx, n).unwrap()
    }

    #[test]
    fn free_transport_moves_one_cell_per_step() {
        let g = grid(32, 0.1);
        let mut f = Field1D::delta(g, 0.0).unwrap();
        f.p_minus = vec![0.0; 32];
        let p = TelegraphParams { mu: 0.0, v: 1.0, lambda: 0.0, dt: 0.1 };
        let start = g.nearest(0.0).unwrap();
        let mut cur = f;
        for k in 1..=5 {
            cur = step_telegraph(&cur, &p).unwrap();
            let peak = cur.p_plus.iter().position(|&x| x > 0.0).unwrap();
            assert_eq!(peak, start + k);
            assert_eq!(cur.p_plus[peak], 5.0);
            assert_eq!(cur.p_plus.iter().filter(|&&x| x != 0.0).count(), 1);
        }
    }

    #[test]
    fn fast_switching_equalizes_states() {
        let (a, b) = relaxation_weights(1e9, 1.0);
        assert_eq!((a, b), (0.5, 0.5));
        let (a, b) = relaxation_weights(0.0, 1.0);
        assert_eq!((a, b), (1.0, 0.0));
        let g = grid(16, 0.1);
        let f = Field1D::new(g, vec![2.0; 16], vec![0.0; 16]).unwrap();
        let p = TelegraphParams { mu: 0.0, v: 1.0, lambda: 1e9, dt: 0.1 };
        let out = step_telegraph(&f, &p).unwrap();
        assert!(out.p_plus.iter().chain(&out.p_minus).all(|&x| (x - 1.0).abs() < 1e-12));
    }

    #[test]
    fn cfl_violation_is_refused() {
        let g = grid(16, 0.1);
        let f = Field1D::delta(g, 0.0).unwrap();
        let p = TelegraphParams { mu: 0.5, v: 1.0, lambda: 1.0, dt: 0.1 };
        assert!(matches!(step_telegraph(&f, &p), Err(Error::Configuration(_))));
        assert!(matches!(evolve_telegraph(&f, &p, 1.0), Err(Error::Configuration(_))));
    }

    #[test]
    fn zero_time_is_identity() {
        let g = grid(16, 0.1);
        let f = Field1D::delta(g, 0.3).unwrap();
        let p = TelegraphParams { mu: 0.2, v: 1.0, lambda: 3.0, dt: 0.05 };
        assert_eq!(evolve_telegraph(&f, &p, 0.0).unwrap(), f);
        assert!(evolve_telegraph(&f, &p, 0.07).is_err());
    }

    #[test]
    fn symmetric_data_stays_symmetric() {
        let n = 100;
        let g = grid(n, 0.02);
        let f = Field1D::delta(g, 0.0).unwrap();
        let p = TelegraphParams { mu: 0.0, v: 1.0, lambda: 2.0, dt: 0.01 };
        let out = evolve_telegraph(&f, &p, 0.5).unwrap();
        let total = out.total();
        for i in 0..n {
            // x = 0 sits at index n / 2, so the mirror of i is n - i (mod n).
            let j = (n - i) % n;
            assert_abs_diff_eq!(total[i], total[j], epsilon = 1e-12);
            assert_abs_diff_eq!(out.p_plus[i], out.p_minus[j], epsilon = 1e-12);
        }
    }

    #[test]
    fn drift_moves_the_mean() {
        let g = grid(400, 0.015);
        let f = Field1D::delta(g, 0.0).unwrap();
        let p = TelegraphParams { mu: 0.5, v: 1.0, lambda: 1.0, dt: 0.01 };
        let m0 = telegraph_moments(&f).unwrap();
        let out = evolve_telegraph(&f, &p, 1.0).unwrap();
        let m = telegraph_moments(&out).unwrap();
        assert_abs_diff_eq!(m.mean - m0.mean, 0.5, epsilon = 1e-8);
        assert_abs_diff_eq!(m.mass, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn moments_of_delta_and_zero_field() {
        let g = grid(16, 0.25);
        let m = telegraph_moments(&Field1D::delta(g, 0.0).unwrap()).unwrap();
        assert_abs_diff_eq!(m.mass, 1.0, epsilon = 1e-15);
        assert_eq!(m.mean, 0.0);
        assert_eq!(m.variance, 0.0);
        let z = Field1D::new(g, vec![0.0; 16], vec![0.0; 16]).unwrap();
        assert!(matches!(telegraph_moments(&z), Err(Error::Degenerate(_))));
    }

    #[test]
    fn generator_structure() {
        let g = grid(16, 0.25);
        let p = TelegraphParams { mu: 0.0, v: 1.0, lambda: 0.5, dt: 0.25 };
        let m = telegraph_generator_matrix(&p, &g).unwrap();
        for j in 0..32 {
            assert_eq!(m.column(j).sum(), 0.0);
        }
        let p0 = TelegraphParams { lambda: 0.0, ..p };
        let m0 = telegraph_generator_matrix(&p0, &g).unwrap();
        assert!(m0.view((0, 16), (16, 16)).iter().all(|&x| x == 0.0));
        assert!(m0.view((16, 0), (16, 16)).iter().all(|&x| x == 0.0));
        // General parameters still conserve up to rounding.
        let q = TelegraphParams { mu: 0.3, v: 0.7, lambda: 1.3, dt: 0.1 };
        let mq = telegraph_generator_matrix(&q, &g).unwrap();
        for j in 0..32 {
            assert!(mq.column(j).sum().abs() < 1e-14);
        }
    }

    #[test]
    fn ballistic_pde_matches_mc() {
        let p = TelegraphParams { mu: 0.0, v: 1.0, lambda: 0.0, dt: 0.01 };
        let r = compare_pde_mc(&p, 1.0, 10_000, 3, 64).unwrap();
        assert!(r.l1_distance < 0.02, "l1={}", r.l1_distance);
        assert_eq!(r.bin_edges.len(), 65);
        assert!(compare_pde_mc(&p, 1.0, 9_999, 3, 64).is_err());
    }
}

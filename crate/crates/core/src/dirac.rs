//! Chiral 1D Dirac-like system
//!
//! ```text
//! du+/dt = i m (u+ - u-) - c du+/dx
//! du-/dt = i m (u- - u+) + c du-/dx
//! ```
//!
//! with `m` the mass rate (the combination `m c^2 / hbar`). This is the
//! telegraph balance system with `v -> c` and `lambda -> -i m`. The split
//! step mirrors the telegraph scheme: shift `u+` right and `u-` left, then
//! apply `exp(i m dt (I - sigma_x))` pointwise. At unit Courant number both
//! sub-steps are unitary. Below it the advection falls back to upwind, which
//! matches the telegraph scheme but damps the norm.

use nalgebra::{DMatrix, DVector, RealField};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_param, Error, Result};
use crate::lattice::{advect, courant, mix, step_count, two_state_generator, SpaceGrid, MAX_ORACLE_CELLS};
use crate::scalar::Real;
use crate::telegraph::{evolve_telegraph, Field1D, TelegraphParams};
use crate::theory::golden_min;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiracParams<T> {
    pub c_speed: T,
    pub m_tilde: T,
    pub dt: T,
}

impl<T: Real> DiracParams<T> {
    pub fn validate(&self, grid: &SpaceGrid<T>) -> Result<()> {
        if [self.c_speed, self.m_tilde, self.dt].iter().any(|x| !x.is_finite()) {
            return Err(invalid_param("Dirac parameters must be finite"));
        }
        if self.c_speed <= T::zero() || self.m_tilde < T::zero() || self.dt <= T::zero() {
            return Err(invalid_param(format!(
                "Dirac system needs c > 0, m >= 0, dt > 0; got c={}, m={}, dt={}",
                self.c_speed, self.m_tilde, self.dt
            )));
        }
        courant(self.c_speed, self.dt, grid.dx())?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpinorField<T> {
    pub grid: SpaceGrid<T>,
    pub u_plus: Vec<Complex<T>>,
    pub u_minus: Vec<Complex<T>>,
}

impl<T: Real> SpinorField<T> {
    pub fn new(grid: SpaceGrid<T>, u_plus: Vec<Complex<T>>, u_minus: Vec<Complex<T>>) -> Result<Self> {
        if u_plus.len() != grid.n_cells() || u_minus.len() != grid.n_cells() {
            return Err(invalid_param("spinor length does not match its grid"));
        }
        if u_plus.iter().chain(&u_minus).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(invalid_param("spinor amplitudes must be finite"));
        }
        Ok(Self { grid, u_plus, u_minus })
    }

    /// `sum (|u+|^2 + |u-|^2) dx`.
    pub fn norm_sq(&self) -> T {
        self.u_plus.iter().chain(&self.u_minus).map(|z| z.norm_sqr()).sum::<T>() * self.grid.dx()
    }

    /// Pointwise `|u+|^2 + |u-|^2`.
    pub fn density(&self) -> Vec<T> {
        self.u_plus.iter().zip(&self.u_minus).map(|(a, b)| a.norm_sqr() + b.norm_sqr()).collect()
    }

    /// `<self, other> = sum conj(self) other dx`.
    pub fn inner(&self, other: &Self) -> Complex<T> {
        let s = self
            .u_plus
            .iter()
            .zip(&other.u_plus)
            .chain(self.u_minus.iter().zip(&other.u_minus))
            .fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| acc + a.conj() * b);
        s * self.grid.dx()
    }

    /// Largest pointwise modulus of the difference of two spinors.
    pub fn max_deviation(&self, other: &Self) -> T {
        self.u_plus
            .iter()
            .zip(&other.u_plus)
            .chain(self.u_minus.iter().zip(&other.u_minus))
            .map(|(a, b)| (a - b).norm())
            .fold(T::zero(), T::max)
    }
}

/// The 2x2 mixing unitary `exp(i theta (I - sigma_x))`, `theta = m dt`, as
/// `(diagonal, off_diagonal)`. Built from the eigenpairs of `I - sigma_x`:
/// eigenvalue 0 on `(1, 1)` and 2 on `(1, -1)`.
pub fn dirac_mixing<T: Real>(m_tilde: T, dt: T) -> (Complex<T>, Complex<T>) {
    let theta = m_tilde * dt;
    // e^{i theta} (cos theta I - i sin theta sigma_x)
    let phase = Complex::from_polar(T::one(), theta);
    let diag = phase * theta.cos();
    let off = phase * Complex::new(T::zero(), -theta.sin());
    (diag, off)
}

fn step_unchecked<T: Real>(field: &SpinorField<T>, courant_number: T, mixing: (Complex<T>, Complex<T>)) -> SpinorField<T> {
    let mut u_plus = advect(&field.u_plus, courant_number);
    let mut u_minus = advect(&field.u_minus, -courant_number);
    mix(&mut u_plus, &mut u_minus, mixing.0, mixing.1);
    SpinorField { grid: field.grid, u_plus, u_minus }
}

pub fn step_dirac<T: Real>(field: &SpinorField<T>, params: &DiracParams<T>) -> Result<SpinorField<T>> {
    params.validate(&field.grid)?;
    let c = courant(params.c_speed, params.dt, field.grid.dx())?;
    Ok(step_unchecked(field, c, dirac_mixing(params.m_tilde, params.dt)))
}

pub fn evolve_dirac_with<T: Real, F: FnMut(usize, &SpinorField<T>)>(
    field: &SpinorField<T>,
    params: &DiracParams<T>,
    t_final: T,
    mut observe: F,
) -> Result<SpinorField<T>> {
    params.validate(&field.grid)?;
    let n = step_count(t_final, params.dt)?;
    let c = courant(params.c_speed, params.dt, field.grid.dx())?;
    let mixing = dirac_mixing(params.m_tilde, params.dt);
    let mut current = field.clone();
    observe(0, &current);
    for k in 1..=n {
        current = step_unchecked(&current, c, mixing);
        observe(k, &current);
    }
    Ok(current)
}

pub fn evolve_dirac<T: Real>(field: &SpinorField<T>, params: &DiracParams<T>, t_final: T) -> Result<SpinorField<T>> {
    evolve_dirac_with(field, params, t_final, |_, _| {})
}

/// One-step update of the plane wave `e^{i k x}` as a 2x2 matrix `M A(k)`,
/// with `A(k)` the advection amplification of each chirality.
pub fn one_step_symbol<T: Real>(params: &DiracParams<T>, dx: T, k: T) -> [[Complex<T>; 2]; 2] {
    let c = params.c_speed * params.dt / dx;
    let amp = |sign: T| {
        // Upwind: (1 - |c|) + |c| e^{-i sign k dx}; an exact shift at |c| = 1.
        Complex::new(T::one() - c, T::zero()) + Complex::from_polar(c, -sign * k * dx)
    };
    let (a_plus, a_minus) = (amp(T::one()), amp(-T::one()));
    let (d, o) = dirac_mixing(params.m_tilde, params.dt);
    [[d * a_plus, o * a_minus], [o * a_plus, d * a_minus]]
}

/// Normalized overlap `<u(0), u(t)> / |u(0)|^2` for the uniform spinor `(1, 0)`,
/// which the mixing sends to `((1 + e^{2 i m t}) / 2, (1 - e^{2 i m t}) / 2)`.
pub fn envelope_correlation<T: Real>(params: &DiracParams<T>, t: T) -> Complex<T> {
    let (diag, _) = dirac_mixing(params.m_tilde, t);
    diag
}

/// `|<u(0), u(t)>| / |u(0)|^2` for the uniform spinor `(1, 0)`, obtained by
/// running the split scheme with `substeps` steps of `t / substeps`.
pub fn simulated_uniform_overlap<T: Real>(m_tilde: T, t: T, substeps: usize) -> Result<T> {
    if substeps == 0 {
        return Err(invalid_param("need at least one substep"));
    }
    if t == T::zero() {
        return Ok(T::one());
    }
    let dt = t / T::from_usize(substeps).unwrap();
    let grid = SpaceGrid::new(T::zero(), dt, 8)?;
    let one = Complex::new(T::one(), T::zero());
    let zero = Complex::new(T::zero(), T::zero());
    let u0 = SpinorField { grid, u_plus: vec![one; 8], u_minus: vec![zero; 8] };
    let ut = evolve_dirac(&u0, &DiracParams { c_speed: T::one(), m_tilde, dt }, t)?;
    Ok(u0.inner(&ut).norm() / u0.norm_sq())
}

/// First `count` zeros of the simulated uniform-mode overlap, each found by
/// golden-section minimization inside a bracket of half-width `1 / (2 m)`
/// around a coarse scan minimum.
pub fn locate_overlap_zeros<T: Real>(m_tilde: T, count: usize, substeps: usize) -> Result<Vec<T>> {
    if !(m_tilde > T::zero()) {
        return Err(invalid_param("overlap zeros need m > 0"));
    }
    let f = |t: T| simulated_uniform_overlap(m_tilde, t, substeps).unwrap_or(T::infinity());
    let period = T::PI() / m_tilde;
    let scan = 64usize;
    let mut zeros = Vec::with_capacity(count);
    for n in 0..count {
        let start = T::from_usize(n).unwrap() * period;
        let h = period / T::from_usize(scan).unwrap();
        let best = (1..scan)
            .map(|i| start + T::from_usize(i).unwrap() * h)
            .min_by(|a, b| f(*a).partial_cmp(&f(*b)).unwrap())
            .unwrap();
        let tol = T::epsilon().sqrt() * T::lit(1e-3) * period;
        zeros.push(golden_min(best - h, best + h, f, tol));
    }
    Ok(zeros)
}

/// Generator of the Dirac system written directly from its equations.
pub fn dirac_generator_matrix<T: Real + RealField>(params: &DiracParams<T>, grid: &SpaceGrid<T>) -> Result<DMatrix<Complex<T>>> {
    let n = grid.n_cells();
    if n > MAX_ORACLE_CELLS {
        return Err(Error::Configuration(format!("dense generator is limited to {MAX_ORACLE_CELLS} cells, got {n}")));
    }
    let zero = Complex::new(T::zero(), T::zero());
    let im = Complex::new(T::zero(), params.m_tilde);
    let hop = params.c_speed / grid.dx();
    let mut g = DMatrix::from_element(2 * n, 2 * n, zero);
    for i in 0..n {
        let (p, m) = (i, n + i);
        // -c d/dx u+ (upwind from the left), +c d/dx u- (upwind from the right)
        g[(p, p)] -= Complex::from(hop);
        g[(p, (i + n - 1) % n)] += Complex::from(hop);
        g[(m, m)] -= Complex::from(hop);
        g[(m, n + (i + 1) % n)] += Complex::from(hop);
        // i m (u_s - u_{-s})
        g[(p, p)] += im;
        g[(p, m)] -= im;
        g[(m, m)] += im;
        g[(m, p)] -= im;
    }
    Ok(g)
}

/// Telegraph generator with the switching rate continued to `lambda = -i m`.
pub fn continued_telegraph_generator<T: Real + RealField>(v: T, m_tilde: T, grid: &SpaceGrid<T>) -> Result<DMatrix<Complex<T>>> {
    two_state_generator(v, -v, Complex::new(T::zero(), -m_tilde), grid)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuationReport<T> {
    /// Max pointwise `|exp(G t) u0 - evolve_dirac(u0)|`, with `G` the continued telegraph generator.
    pub max_deviation: T,
    /// Max entry of `G_continued - G_dirac`.
    pub generator_mismatch: T,
    /// Telegraph split scheme run with the complex rate `-i m` against `evolve_dirac`.
    pub scheme_mismatch: T,
    /// Real telegraph evolution at `lambda = 0` against the Dirac scheme at `m = 0`.
    pub massless_agreement: T,
    pub steps: usize,
}

fn test_spinor<T: Real>(grid: &SpaceGrid<T>) -> SpinorField<T> {
    let len = grid.length();
    let centre = grid.x0() + len / T::lit(2.0);
    let width = len / T::lit(10.0);
    let k = T::lit(2.0) * T::PI() / len;
    let bump = |x: T, shift: T| (-((x - centre - shift) / width).powi(2) / T::lit(2.0)).exp();
    let u_plus = grid.xs().map(|x| Complex::from_polar(bump(x, T::zero()), k * x)).collect();
    let u_minus = grid.xs().map(|x| Complex::new(T::zero(), T::lit(0.5) * bump(x, width))).collect();
    SpinorField { grid: *grid, u_plus, u_minus }
}

/// Compares the matrix exponential of the continued telegraph generator
/// with the Dirac split scheme on a smooth test spinor.
pub fn continuation_check<T: Real + RealField>(v_or_c: T, m_tilde: T, grid: &SpaceGrid<T>, dt: T, t_final: T) -> Result<ContinuationReport<T>> {
    let params = DiracParams { c_speed: v_or_c, m_tilde, dt };
    params.validate(grid)?;
    let steps = step_count(t_final, dt)?;
    let n = grid.n_cells();
    let u0 = test_spinor(grid);

    let g_cont = continued_telegraph_generator(v_or_c, m_tilde, grid)?;
    let g_dirac = dirac_generator_matrix(&params, grid)?;
    let generator_mismatch = (&g_cont - &g_dirac).iter().map(|z| z.norm()).fold(T::zero(), num_traits::Float::max);

    let state = DVector::from_iterator(2 * n, u0.u_plus.iter().chain(&u0.u_minus).copied());
    let exact = (g_cont * Complex::from(t_final)).exp() * state;
    let oracle = SpinorField { grid: *grid, u_plus: exact.rows(0, n).iter().copied().collect(), u_minus: exact.rows(n, n).iter().copied().collect() };
    let split = evolve_dirac(&u0, &params, t_final)?;
    let max_deviation = oracle.max_deviation(&split);

    // The telegraph mixing weights with lambda -> -i m.
    let r = (Complex::new(T::zero(), -m_tilde) * Complex::from(-T::lit(2.0) * dt)).exp();
    let half = Complex::from(T::lit(0.5));
    let weights = ((Complex::from(T::one()) + r) * half, (Complex::from(T::one()) - r) * half);
    let c = courant(v_or_c, dt, grid.dx())?;
    let mut continued = u0.clone();
    for _ in 0..steps {
        continued = step_unchecked(&continued, c, weights);
    }
    let scheme_mismatch = continued.max_deviation(&split);

    let massless_agreement = massless_agreement(v_or_c, grid, dt, t_final)?;
    Ok(ContinuationReport { max_deviation, generator_mismatch, scheme_mismatch, massless_agreement, steps })
}

/// Pure advection limit: telegraph at `lambda = 0` versus Dirac at `m = 0`
/// on the same nonnegative data.
pub fn massless_agreement<T: Real>(speed: T, grid: &SpaceGrid<T>, dt: T, t_final: T) -> Result<T> {
    let u0 = test_spinor(grid);
    let p_plus: Vec<T> = u0.u_plus.iter().map(|z| z.norm()).collect();
    let p_minus: Vec<T> = u0.u_minus.iter().map(|z| z.norm()).collect();
    let field = Field1D::new(*grid, p_plus.clone(), p_minus.clone())?;
    let tel = evolve_telegraph(&field, &TelegraphParams { mu: T::zero(), v: speed, lambda: T::zero(), dt }, t_final)?;
    let spinor = SpinorField {
        grid: *grid,
        u_plus: p_plus.into_iter().map(Complex::from).collect(),
        u_minus: p_minus.into_iter().map(Complex::from).collect(),
    };
    let dirac = evolve_dirac(&spinor, &DiracParams { c_speed: speed, m_tilde: T::zero(), dt }, t_final)?;
    let as_spinor = SpinorField {
        grid: *grid,
        u_plus: tel.p_plus.into_iter().map(Complex::from).collect(),
        u_minus: tel.p_minus.into_iter().map(Complex::from).collect(),
    };
    Ok(as_spinor.max_deviation(&dirac))
}

//! Mean-field PDE–ODE system
//!
//! ```text
//! ∂u/∂t = ν Δu - div(u b(u, m)),   ∂m/∂t = -λ u m^ζ
//! ```
//!
//! on a periodic grid large enough that `u` never reaches the boundary.
//! Each step applies the explicit nonlocal flux and then the exact heat
//! propagator `exp(-ν |k|^2 dt)`:
//!
//! ```text
//! u <- e^{dt ν Δ} (u - dt div(u b))
//! ```

use rustfft::num_complex::Complex64;

use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::grid::{DensityField, GridGeometry, ScalarField, VectorField};
use crate::interaction::{DriftOperator, InteractionKernel};
use crate::matrix::MatrixFieldState;
use crate::spectral::{derivative_wavenumbers, to_complex, wavenumbers, FftNd};

/// Cells per axis, from each side, checked for mass before a periodic
/// transform.
pub const BOUNDARY_BAND_CELLS: usize = 2;
pub const BOUNDARY_MASS_TOLERANCE: f64 = 1e-6;

/// Mass of `|f|` in the outer band of the grid.
pub fn boundary_band_mass(field: &ScalarField) -> f64 {
    let g = &field.geometry;
    let mut total = 0.0;
    for (i, v) in field.values.iter().enumerate() {
        let idx = g.multi_index(i);
        let edge = idx
            .iter()
            .zip(&g.cells)
            .any(|(&j, &n)| j < BOUNDARY_BAND_CELLS || j + BOUNDARY_BAND_CELLS >= n);
        if edge {
            total += v.abs();
        }
    }
    total * g.cell_volume()
}

fn check_boundary(field: &ScalarField) -> Result<()> {
    let mass = boundary_band_mass(field);
    if mass < BOUNDARY_MASS_TOLERANCE {
        Ok(())
    } else {
        Err(Error::BoundaryMassLeak { mass })
    }
}

/// `|k|^2` on the FFT lattice of `geometry`.
fn wavenumber_squares(geometry: &GridGeometry) -> Vec<f64> {
    let axes: Vec<Vec<f64>> = (0..geometry.dim())
        .map(|a| wavenumbers(geometry.cells[a], geometry.extent[a]))
        .collect();
    (0..geometry.len())
        .map(|i| {
            geometry
                .multi_index(i)
                .iter()
                .enumerate()
                .map(|(a, &j)| axes[a][j] * axes[a][j])
                .sum()
        })
        .collect()
}

fn heat_multiplier(geometry: &GridGeometry, nu: f64, tau: f64) -> Vec<f64> {
    wavenumber_squares(geometry)
        .into_iter()
        .map(|k2| (-nu * k2 * tau).exp())
        .collect()
}

/// Exact heat semigroup `e^{τ ν Δ}` applied per Fourier mode.
pub fn heat_propagate(field: &ScalarField, tau: f64, nu: f64) -> Result<ScalarField> {
    check_boundary(field)?;
    let g = &field.geometry;
    let fft = FftNd::new(&g.cells);
    let multiplier = heat_multiplier(g, nu, tau);
    let mut data = to_complex(&field.values);
    fft.forward(&mut data);
    data.iter_mut().zip(&multiplier).for_each(|(v, m)| *v *= m);
    fft.inverse(&mut data);
    Ok(ScalarField {
        geometry: g.clone(),
        values: data.iter().map(|v| v.re).collect(),
    })
}

/// Spectral `div(u b)`.
pub fn divergence_flux(u: &ScalarField, b: &VectorField) -> Result<ScalarField> {
    u.ensure_same_grid(&b.geometry)?;
    let g = &u.geometry;
    let fft = FftNd::new(&g.cells);
    let kaxes = derivative_axes(g);
    let mut total = vec![Complex64::default(); g.len()];
    for (a, comp) in b.components.iter().enumerate() {
        let mut flux: Vec<Complex64> = u
            .values
            .iter()
            .zip(comp)
            .map(|(&uv, &bv)| Complex64::new(uv * bv, 0.0))
            .collect();
        fft.forward(&mut flux);
        accumulate_derivative(g, &kaxes[a], a, &flux, &mut total);
    }
    fft.inverse(&mut total);
    Ok(ScalarField {
        geometry: g.clone(),
        values: total.iter().map(|v| v.re).collect(),
    })
}

fn derivative_axes(g: &GridGeometry) -> Vec<Vec<f64>> {
    (0..g.dim())
        .map(|a| derivative_wavenumbers(g.cells[a], g.extent[a]))
        .collect()
}

/// `total += i k_axis * spectrum`.
fn accumulate_derivative(
    g: &GridGeometry,
    k_axis: &[f64],
    axis: usize,
    spectrum: &[Complex64],
    total: &mut [Complex64],
) {
    let stride = g.strides()[axis];
    let n = g.cells[axis];
    for (i, (t, s)) in total.iter_mut().zip(spectrum).enumerate() {
        let k = k_axis[(i / stride) % n];
        *t += Complex64::new(-k * s.im, k * s.re);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdeState {
    pub u: DensityField,
    pub matrix: MatrixFieldState,
    pub time: f64,
    pub step: usize,
    pub nu: f64,
}

impl PdeState {
    pub fn new(u: DensityField, matrix: MatrixFieldState, nu: f64) -> Result<Self> {
        u.ensure_same_grid(&matrix.m0.geometry)?;
        Ok(Self {
            u,
            matrix,
            time: 0.0,
            step: 0,
            nu,
        })
    }
}

/// Stepper with precomputed transforms for a fixed grid, kernel and `dt`.
#[derive(Debug)]
pub struct PdeSolver {
    geometry: GridGeometry,
    dt: f64,
    fft: FftNd,
    heat: Vec<f64>,
    kaxes: Vec<Vec<f64>>,
    drift: DriftOperator,
}

impl PdeSolver {
    pub fn new(geometry: &GridGeometry, kernel: &InteractionKernel, nu: f64, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Config(format!("dt = {dt} must be positive")));
        }
        Ok(Self {
            geometry: geometry.clone(),
            dt,
            fft: FftNd::new(&geometry.cells),
            heat: heat_multiplier(geometry, nu, dt),
            kaxes: derivative_axes(geometry),
            drift: DriftOperator::new(kernel, geometry)?,
        })
    }

    pub fn drift_operator(&self) -> &DriftOperator {
        &self.drift
    }

    /// Advances `state` by one step and returns the drift used.
    pub fn step(&self, state: &mut PdeState) -> Result<VectorField> {
        let g = &self.geometry;
        state.u.ensure_same_grid(g)?;
        check_boundary(&state.u)?;
        let m = state.matrix.current();
        let b = self.drift.apply(&state.u, &m)?;

        let mut flux_div = vec![Complex64::default(); g.len()];
        for (a, comp) in b.components.iter().enumerate() {
            let mut flux: Vec<Complex64> = state
                .u
                .values
                .iter()
                .zip(comp)
                .map(|(&uv, &bv)| Complex64::new(uv * bv, 0.0))
                .collect();
            self.fft.forward(&mut flux);
            accumulate_derivative(g, &self.kaxes[a], a, &flux, &mut flux_div);
        }
        let mut spectrum = to_complex(&state.u.values);
        self.fft.forward(&mut spectrum);
        for ((s, f), h) in spectrum.iter_mut().zip(&flux_div).zip(&self.heat) {
            *s = (*s - f * self.dt) * h;
        }
        self.fft.inverse(&mut spectrum);
        let next: Vec<f64> = spectrum.iter().map(|v| v.re).collect();
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteField("density"));
        }
        state.matrix.update(&state.u, self.dt)?;
        state.u.values = next;
        state.step += 1;
        state.time = state.step as f64 * self.dt;
        Ok(b)
    }
}

/// Single splitting step; builds the transforms on every call.
pub fn pde_step(state: &PdeState, kernel: &InteractionKernel, dt: f64) -> Result<PdeState> {
    let solver = PdeSolver::new(&state.u.geometry, kernel, state.nu, dt)?;
    let mut next = state.clone();
    solver.step(&mut next)?;
    Ok(next)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdeSnapshot {
    pub step: usize,
    pub time: f64,
    pub u: DensityField,
    pub matrix: ScalarField,
    pub exposure: ScalarField,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdeRecord {
    pub config: SimConfig,
    pub snapshots: Vec<PdeSnapshot>,
}

impl PdeRecord {
    pub fn last(&self) -> &PdeSnapshot {
        self.snapshots.last().expect("a run records at least one snapshot")
    }

    /// Snapshot closest to time `t`.
    pub fn at_time(&self, t: f64) -> &PdeSnapshot {
        self.snapshots
            .iter()
            .min_by(|a, b| (a.time - t).abs().total_cmp(&(b.time - t).abs()))
            .expect("a run records at least one snapshot")
    }
}

/// Initial PDE state for `config` with density `u0` and uniform `m0`.
pub fn initial_state(config: &SimConfig, u0: DensityField) -> Result<PdeState> {
    u0.ensure_same_grid(&config.geometry)?;
    let matrix = MatrixFieldState::new(
        ScalarField::constant(&config.geometry, config.m0),
        config.lambda,
        config.zeta,
        config.bound_m,
    )?;
    PdeState::new(u0, matrix, config.nu())
}

pub fn solve_pde(config: &SimConfig, u0: DensityField) -> Result<PdeRecord> {
    solve_pde_with(config, u0, |_| {})
}

/// Like [`solve_pde`], calling `observe` with the state before every step
/// and after the last one.
pub fn solve_pde_with(
    config: &SimConfig,
    u0: DensityField,
    mut observe: impl FnMut(&PdeState),
) -> Result<PdeRecord> {
    config.validate()?;
    let mut state = initial_state(config, u0)?;
    let solver = PdeSolver::new(&config.geometry, &config.kernel()?, config.nu(), config.dt)?;
    let snapshot_steps = config.snapshot_steps();
    let n_steps = config.n_steps();
    let mut snapshots = Vec::with_capacity(snapshot_steps.len());
    for step in 0..=n_steps {
        observe(&state);
        if snapshot_steps.binary_search(&step).is_ok() {
            snapshots.push(PdeSnapshot {
                step,
                time: state.time,
                u: state.u.clone(),
                matrix: state.matrix.current(),
                exposure: state.matrix.exposure.clone(),
            });
        }
        if step == n_steps {
            break;
        }
        solver.step(&mut state).map_err(|e| e.at_step(step))?;
    }
    Ok(PdeRecord {
        config: config.clone(),
        snapshots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(g: &GridGeometry, var: f64, center: &[f64]) -> ScalarField {
        let d = g.dim() as i32;
        ScalarField::from_fn(g, |x| {
            let r2: f64 = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
            (-r2 / (2.0 * var)).exp() / (std::f64::consts::TAU * var).powf(d as f64 / 2.0)
        })
    }

    #[test]
    fn zero_time_is_identity() {
        let g = GridGeometry::cube(2, -4.0, 4.0, 64).unwrap();
        let f = gaussian(&g, 0.2, &[0.3, -0.1]);
        let out = heat_propagate(&f, 0.0, 0.7).unwrap();
        for (a, b) in out.values.iter().zip(&f.values) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn gaussian_spreads_by_two_nu_tau() {
        let g = GridGeometry::cube(1, -8.0, 8.0, 256).unwrap();
        let (v, nu, tau) = (0.1, 0.3, 0.5);
        let out = heat_propagate(&gaussian(&g, v, &[0.5]), tau, nu).unwrap();
        let exact = gaussian(&g, v + 2.0 * nu * tau, &[0.5]);
        let err = out.values.iter().zip(&exact.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn boundary_mass_is_rejected() {
        let g = GridGeometry::cube(1, 0.0, 1.0, 32).unwrap();
        let f = ScalarField::constant(&g, 1.0);
        assert!(matches!(heat_propagate(&f, 0.1, 1.0), Err(Error::BoundaryMassLeak { .. })));
    }

    #[test]
    fn divergence_of_zero_flux_vanishes() {
        let g = GridGeometry::cube(2, -2.0, 2.0, 32).unwrap();
        let u = gaussian(&g, 0.1, &[0.0, 0.0]);
        let div = divergence_flux(&u, &VectorField::zeros(&g)).unwrap();
        assert!(div.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn divergence_matches_analytic_derivative() {
        // u b = (e^{-|x|^2}, 0) has divergence -2 x e^{-|x|^2}
        let g = GridGeometry::cube(2, -6.0, 6.0, 96).unwrap();
        let u = ScalarField::from_fn(&g, |x| (-(x[0] * x[0] + x[1] * x[1])).exp());
        let b = VectorField::constant(&g, &[1.0, 0.0]);
        let div = divergence_flux(&u, &b).unwrap();
        for (i, x) in g.centers().enumerate() {
            let exact = -2.0 * x[0] * (-(x[0] * x[0] + x[1] * x[1])).exp();
            assert!((div.values[i] - exact).abs() < 1e-10);
        }
    }
}

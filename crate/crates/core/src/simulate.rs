//! Time stepping of the coupled particle / environmental-field system.

use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::grid::{DensityField, GridGeometry, ScalarField, VectorField};
use crate::interaction::DriftOperator;
use crate::matrix::MatrixFieldState;
use crate::particles::{sample_initial, step_with_velocity, ParticleState};
use crate::smoothing::{build_scaled_kernel, deposit_density};

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSnapshot {
    pub step: usize,
    pub time: f64,
    pub particles: ParticleState,
    pub density: DensityField,
    pub matrix: ScalarField,
    pub exposure: ScalarField,
    pub drift: VectorField,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleRecord {
    pub config: SimConfig,
    pub snapshots: Vec<ParticleSnapshot>,
}

impl ParticleRecord {
    pub fn last(&self) -> &ParticleSnapshot {
        self.snapshots.last().expect("a run records at least one snapshot")
    }
}

/// Per-step view handed to observers, taken right after deposition.
pub struct StepView<'a> {
    pub step: usize,
    pub time: f64,
    pub particles: &'a ParticleState,
    pub density: &'a DensityField,
    pub matrix: &'a MatrixFieldState,
}

pub fn simulate(config: &SimConfig) -> Result<ParticleRecord> {
    simulate_with(config, |_| {})
}

/// Like [`simulate`], calling `observe` once per step (including step 0 and
/// the final step).
pub fn simulate_with(config: &SimConfig, mut observe: impl FnMut(&StepView)) -> Result<ParticleRecord> {
    config.validate()?;
    let initial = sample_initial(&config.initial, config.n_particles, config.seed)?;
    run_from(config, initial, &mut observe)
}

/// Runs from explicit initial positions; `config.initial` is ignored.
pub fn simulate_from(config: &SimConfig, initial: ParticleState) -> Result<ParticleRecord> {
    config.validate()?;
    run_from(config, initial, &mut |_| {})
}

fn run_from(
    config: &SimConfig,
    mut state: ParticleState,
    observe: &mut dyn FnMut(&StepView),
) -> Result<ParticleRecord> {
    let geometry = &config.geometry;
    if state.dim != geometry.dim() {
        return Err(Error::GeometryMismatch);
    }
    let stencil = build_scaled_kernel(&config.mollifier()?, geometry)?;
    let operator = DriftOperator::new(&config.kernel()?, geometry)?;
    let mut matrix = MatrixFieldState::new(
        ScalarField::constant(geometry, config.m0),
        config.lambda,
        config.zeta,
        config.bound_m,
    )?;
    let snapshot_steps = config.snapshot_steps();
    let n_steps = config.n_steps();
    let mut snapshots = Vec::with_capacity(snapshot_steps.len());
    let mut drift = LazyDrift::new(geometry);

    for step in 0..=n_steps {
        let density = deposit_density(&state.positions, &stencil, geometry).map_err(|e| e.at_step(step))?;
        observe(&StepView {
            step,
            time: state.time,
            particles: &state,
            density: &density,
            matrix: &matrix,
        });
        if snapshot_steps.binary_search(&step).is_ok() {
            let m = matrix.current();
            let field = operator.apply(&density, &m).map_err(|e| e.at_step(step))?;
            snapshots.push(ParticleSnapshot {
                step,
                time: state.time,
                particles: state.clone(),
                density: density.clone(),
                matrix: m,
                exposure: matrix.exposure.clone(),
                drift: field,
            });
        }
        if step == n_steps {
            break;
        }
        if step % config.drift_refresh_every == 0 {
            drift.refresh(&operator, &density, &matrix.current()).map_err(|e| e.at_step(step))?;
        }
        let velocity = drift.at_particles(&operator, &state).map_err(|e| e.at_step(step))?;
        state = step_with_velocity(&state, &velocity, config.sigma, config.dt, geometry)
            .map_err(|e| e.at_step(step))?;
        matrix.update(&density, config.dt).map_err(|e| e.at_step(step))?;
    }
    Ok(ParticleRecord {
        config: config.clone(),
        snapshots,
    })
}

/// Drift field that is either fully evaluated (FFT path) or filled in on
/// demand at the cells particles actually touch (direct path). Either way the
/// values read are those of the full field for the stored `(u, m)`.
struct LazyDrift {
    field: VectorField,
    known: Vec<bool>,
    sources: Option<(DensityField, ScalarField)>,
}

impl LazyDrift {
    fn new(geometry: &GridGeometry) -> Self {
        Self {
            field: VectorField::zeros(geometry),
            known: vec![false; geometry.len()],
            sources: None,
        }
    }

    fn refresh(&mut self, op: &DriftOperator, u: &DensityField, m: &ScalarField) -> Result<()> {
        if op.uses_fft() {
            self.field = op.apply(u, m)?;
            self.known.iter_mut().for_each(|k| *k = true);
            self.sources = None;
        } else {
            self.known.iter_mut().for_each(|k| *k = false);
            self.sources = Some((u.clone(), m.clone()));
        }
        Ok(())
    }

    fn at_particles(&mut self, op: &DriftOperator, state: &ParticleState) -> Result<Vec<f64>> {
        if let Some((u, m)) = &self.sources {
            let g = &self.field.geometry;
            let mut missing: Vec<usize> = Vec::new();
            for p in state.iter() {
                for cell in interpolation_cells(g, p) {
                    if !self.known[cell] {
                        self.known[cell] = true;
                        missing.push(cell);
                    }
                }
            }
            if !missing.is_empty() {
                missing.sort_unstable();
                let values = op.apply_at(u, m, &missing)?;
                for (cell, v) in missing.into_iter().zip(values) {
                    for (a, c) in v.into_iter().enumerate() {
                        self.field.components[a][cell] = c;
                    }
                }
            }
        }
        Ok(crate::particles::interpolate_drift(state, &self.field))
    }
}

/// Cells read by [`VectorField::interpolate`] at `p`.
fn interpolation_cells(g: &GridGeometry, p: &[f64]) -> Vec<usize> {
    let d = g.dim();
    let strides = g.strides();
    let (base, _) = g.interpolation_base(p);
    (0..(1usize << d))
        .map(|corner| (0..d).map(|a| (base[a] + ((corner >> a) & 1)) * strides[a]).sum())
        .collect()
}

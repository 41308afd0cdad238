//! Particle ensemble, initial laws and the Euler–Maruyama step
//!
//! ```text
//! X_i <- X_i + b(X_i) dt + sigma sqrt(dt) xi_i
//! ```
//!
//! with `b(X_i)` interpolated from the grid drift and `xi_i` drawn from the
//! counter-addressed noise stream.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DensityField, GridGeometry, ScalarField, VectorField};
use crate::rng::NoiseStream;
use crate::smoothing::unit_sphere_area;

/// Law of the i.i.d. initial positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialLaw {
    /// Uniform on the box `[lo, hi]`.
    UniformBox { lo: Vec<f64>, hi: Vec<f64> },
    /// Density proportional to `(1 - |x - center|^2 / radius^2)^2` on the
    /// ball; continuously differentiable with compact support.
    Bump { center: Vec<f64>, radius: f64 },
}

impl InitialLaw {
    pub fn uniform_square(lo: f64, hi: f64, dim: usize) -> Self {
        InitialLaw::UniformBox {
            lo: vec![lo; dim],
            hi: vec![hi; dim],
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            InitialLaw::UniformBox { lo, .. } => lo.len(),
            InitialLaw::Bump { center, .. } => center.len(),
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(format!("initial: {msg}")));
        match self {
            InitialLaw::UniformBox { lo, hi } => {
                if lo.len() != dim || hi.len() != dim {
                    return bad("box dimension differs from the grid");
                }
                if lo.iter().zip(hi).any(|(a, b)| !(a.is_finite() && b.is_finite() && a < b)) {
                    return bad("box needs lo < hi on every axis");
                }
            }
            InitialLaw::Bump { center, radius } => {
                if center.len() != dim {
                    return bad("bump centre dimension differs from the grid");
                }
                if !(radius.is_finite() && *radius > 0.0) {
                    return bad("bump radius must be positive");
                }
            }
        }
        Ok(())
    }

    /// Mean of the law.
    pub fn centroid(&self) -> Vec<f64> {
        match self {
            InitialLaw::UniformBox { lo, hi } => lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect(),
            InitialLaw::Bump { center, .. } => center.clone(),
        }
    }

    /// Probability density at `x`.
    pub fn density(&self, x: &[f64]) -> f64 {
        match self {
            InitialLaw::UniformBox { lo, hi } => {
                let inside = x.iter().zip(lo.iter().zip(hi)).all(|(v, (a, b))| v >= a && v <= b);
                if inside {
                    1.0 / lo.iter().zip(hi).map(|(a, b)| b - a).product::<f64>()
                } else {
                    0.0
                }
            }
            InitialLaw::Bump { center, radius } => {
                let s2 = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum::<f64>()
                    / (radius * radius);
                if s2 >= 1.0 {
                    return 0.0;
                }
                let t = 1.0 - s2;
                t * t / bump_normalisation(center.len(), *radius)
            }
        }
    }

    /// Density sampled at cell centres and renormalised to unit discrete mass.
    pub fn density_field(&self, geometry: &GridGeometry) -> Result<DensityField> {
        self.validate(geometry.dim())?;
        let mut field = ScalarField::from_fn(geometry, |x| self.density(x));
        if field.mass() <= 0.0 {
            return Err(Error::Config("initial law has no mass on the grid".into()));
        }
        field.normalize_mass(1.0);
        Ok(field)
    }

    fn sample(&self, rng: &mut impl Rng, out: &mut [f64]) {
        match self {
            InitialLaw::UniformBox { lo, hi } => {
                for (a, v) in out.iter_mut().enumerate() {
                    *v = lo[a] + (hi[a] - lo[a]) * rng.random::<f64>();
                }
            }
            InitialLaw::Bump { center, radius } => {
                // rejection from the bounding cube; acceptance prob = density / sup
                loop {
                    let mut s2 = 0.0;
                    for v in out.iter_mut() {
                        *v = 2.0 * rng.random::<f64>() - 1.0;
                        s2 += *v * *v;
                    }
                    if s2 >= 1.0 {
                        continue;
                    }
                    let t = 1.0 - s2;
                    if rng.random::<f64>() < t * t {
                        for (a, v) in out.iter_mut().enumerate() {
                            *v = center[a] + radius * *v;
                        }
                        return;
                    }
                }
            }
        }
    }
}

/// `∫ (1 - |x|^2/ρ^2)^2 dx = |S^{d-1}| ρ^d · 8 / (d (d+2) (d+4))`.
fn bump_normalisation(dim: usize, radius: f64) -> f64 {
    let d = dim as f64;
    unit_sphere_area(dim) * radius.powi(dim as i32) * 8.0 / (d * (d + 2.0) * (d + 4.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleState {
    pub dim: usize,
    /// Flat `N × d` array.
    pub positions: Vec<f64>,
    pub time: f64,
    /// Number of completed steps; also the noise stream id of the next step.
    pub step: u64,
    pub noise: NoiseStream,
}

impl ParticleState {
    pub fn new(dim: usize, positions: Vec<f64>, seed: u64) -> Self {
        assert_eq!(positions.len() % dim, 0);
        Self {
            dim,
            positions,
            time: 0.0,
            step: 0,
            noise: NoiseStream::new(seed),
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.positions.chunks_exact(self.dim)
    }
}

pub fn sample_initial(law: &InitialLaw, n: usize, seed: u64) -> Result<ParticleState> {
    let dim = law.dim();
    law.validate(dim)?;
    if n == 0 {
        return Err(Error::Config("at least one particle is required".into()));
    }
    let noise = NoiseStream::new(seed);
    let mut rng = noise.initial_rng();
    let mut positions = vec![0.0; n * dim];
    for p in positions.chunks_exact_mut(dim) {
        law.sample(&mut rng, p);
    }
    Ok(ParticleState::new(dim, positions, seed))
}

/// Drift sampled at particle positions, one vector per particle.
pub fn interpolate_drift(state: &ParticleState, drift: &VectorField) -> Vec<f64> {
    let d = state.dim;
    let mut out = vec![0.0; state.positions.len()];
    out.par_chunks_mut(d)
        .zip(state.positions.par_chunks(d))
        .for_each(|(o, p)| o.copy_from_slice(&drift.interpolate(p)));
    out
}

/// One Euler–Maruyama step. Fails if a particle leaves the grid.
pub fn step_em(state: &ParticleState, drift: &VectorField, sigma: f64, dt: f64) -> Result<ParticleState> {
    if drift.geometry.dim() != state.dim {
        return Err(Error::GeometryMismatch);
    }
    let velocity = interpolate_drift(state, drift);
    step_with_velocity(state, &velocity, sigma, dt, &drift.geometry)
}

pub(crate) fn step_with_velocity(
    state: &ParticleState,
    velocity: &[f64],
    sigma: f64,
    dt: f64,
    geometry: &GridGeometry,
) -> Result<ParticleState> {
    let d = state.dim;
    let noise = state.noise;
    let step = state.step;
    let amp = sigma * dt.sqrt();
    let mut next = state.clone();
    next.positions
        .par_chunks_mut(d)
        .zip(velocity.par_chunks(d))
        .enumerate()
        .for_each(|(i, (p, v))| {
            let mut xi = [0.0; 3];
            if amp != 0.0 {
                noise.gaussians(step, i, &mut xi[..d]);
            }
            for a in 0..d {
                p[a] += v[a] * dt + amp * xi[a];
            }
        });
    next.step = step + 1;
    next.time = next.step as f64 * dt;
    if let Some((i, p)) = next
        .iter()
        .enumerate()
        .find(|(_, p)| !(p.iter().all(|v| v.is_finite()) && geometry.contains(p)))
    {
        return Err(Error::ParticleOutOfDomain {
            index: i,
            position: p.to_vec(),
        });
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_samples_stay_in_the_box() {
        let law = InitialLaw::uniform_square(0.0, 2.0, 2);
        let one = sample_initial(&law, 1, 5).unwrap();
        assert_eq!(one.len(), 1);
        assert!(one.position(0).iter().all(|v| (0.0..=2.0).contains(v)));
    }

    #[test]
    fn bump_samples_stay_in_the_support() {
        let law = InitialLaw::Bump {
            center: vec![1.0, -1.0],
            radius: 0.4,
        };
        let s = sample_initial(&law, 5000, 9).unwrap();
        for p in s.iter() {
            let r = ((p[0] - 1.0).powi(2) + (p[1] + 1.0).powi(2)).sqrt();
            assert!(r < 0.4);
        }
    }

    #[test]
    fn bump_density_integrates_to_one() {
        for dim in 1..=3 {
            let law = InitialLaw::Bump {
                center: vec![0.0; dim],
                radius: 0.7,
            };
            let n = [2000, 400, 80][dim - 1];
            let g = GridGeometry::cube(dim, -1.0, 1.0, n).unwrap();
            let raw: f64 = g.centers().map(|x| law.density(&x)).sum::<f64>() * g.cell_volume();
            assert!((raw - 1.0).abs() < 1e-3, "dim {dim}: {raw}");
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let law = InitialLaw::uniform_square(0.0, 2.0, 2);
        assert_eq!(
            sample_initial(&law, 100, 11).unwrap(),
            sample_initial(&law, 100, 11).unwrap()
        );
        assert_ne!(
            sample_initial(&law, 100, 11).unwrap().positions,
            sample_initial(&law, 100, 12).unwrap().positions
        );
    }

    #[test]
    fn deterministic_motion_without_noise() {
        let g = GridGeometry::cube(2, -1.0, 3.0, 32).unwrap();
        let law = InitialLaw::uniform_square(0.0, 2.0, 2);
        let s = sample_initial(&law, 20, 1).unwrap();
        let still = step_em(&s, &VectorField::zeros(&g), 0.0, 0.01).unwrap();
        assert_eq!(still.positions, s.positions);
        let v = [0.3, -0.2];
        let moved = step_em(&s, &VectorField::constant(&g, &v), 0.0, 0.01).unwrap();
        for (p, q) in s.iter().zip(moved.iter()) {
            assert_eq!(q[0], p[0] + v[0] * 0.01);
            assert_eq!(q[1], p[1] + v[1] * 0.01);
        }
        assert_eq!(moved.step, 1);
    }

    #[test]
    fn leaving_the_grid_is_an_error() {
        let g = GridGeometry::cube(2, 0.0, 1.0, 8).unwrap();
        let s = ParticleState::new(2, vec![0.5, 0.5, 0.99, 0.5], 0);
        let err = step_em(&s, &VectorField::constant(&g, &[1.0, 0.0]), 0.0, 0.1).unwrap_err();
        assert!(matches!(err, Error::ParticleOutOfDomain { index: 1, .. }));
    }
}

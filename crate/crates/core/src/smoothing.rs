//! Scaled mollifier `W_N(x) = N^beta W(N^(beta/d) x)` and deposition of the
//! empirical measure onto the grid.
//!
//! The discrete stencil is evaluated at the particle's sub-cell offset and
//! renormalised so that every particle deposits exactly `1/N` of mass. A
//! particle sitting on a cell centre therefore deposits the centred stencil,
//! and shifting particles by whole cells shifts the field bit-for-bit.

use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DensityField, GridGeometry, ScalarField, MAX_DIM};

/// Radial shape of the unscaled mollifier `W`, supported on the unit ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MollifierProfile {
    /// `exp(-1/(1-|x|^2))`, smooth.
    #[default]
    Bump,
    /// `(1-|x|^2)^3`, twice continuously differentiable.
    Triweight,
}

impl MollifierProfile {
    /// Unnormalised radial profile as a function of `|x|^2`.
    fn shape(self, r2: f64) -> f64 {
        if r2 >= 1.0 {
            return 0.0;
        }
        match self {
            MollifierProfile::Bump => (-1.0 / (1.0 - r2)).exp(),
            MollifierProfile::Triweight => {
                let t = 1.0 - r2;
                t * t * t
            }
        }
    }

    /// `∫_{R^d} shape(|x|^2) dx`, cached per profile and dimension.
    fn raw_mass(self, dim: usize) -> f64 {
        static TABLE: OnceLock<[[f64; MAX_DIM]; 2]> = OnceLock::new();
        let table = TABLE.get_or_init(|| {
            let row = |p: MollifierProfile| [1, 2, 3].map(|d| p.integrate_shape(d));
            [row(MollifierProfile::Bump), row(MollifierProfile::Triweight)]
        });
        let i = match self {
            MollifierProfile::Bump => 0,
            MollifierProfile::Triweight => 1,
        };
        table[i][dim - 1]
    }

    /// Composite Simpson on the radial integral.
    fn integrate_shape(self, dim: usize) -> f64 {
        let n = 20_000;
        let h = 1.0 / n as f64;
        let f = |r: f64| self.shape(r * r) * r.powi(dim as i32 - 1);
        let mut acc = f(0.0) + f(1.0);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(i as f64 * h);
        }
        unit_sphere_area(dim) * acc * h / 3.0
    }
}

/// Surface area of the unit sphere in `R^d`.
pub fn unit_sphere_area(dim: usize) -> f64 {
    use std::f64::consts::PI;
    match dim {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => panic!("unsupported dimension {dim}"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MollifierSpec {
    pub profile: MollifierProfile,
    pub dim: usize,
    pub beta: f64,
    pub n_particles: usize,
}

impl MollifierSpec {
    pub fn new(profile: MollifierProfile, dim: usize, beta: f64, n_particles: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::Config(format!("mollifier dimension {dim} unsupported")));
        }
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::Config(format!("beta = {beta} must lie in (0, 1)")));
        }
        if n_particles == 0 {
            return Err(Error::Config("n_particles must be positive".into()));
        }
        Ok(Self {
            profile,
            dim,
            beta,
            n_particles,
        })
    }

    /// `N^(beta/d)`, the factor by which `W_N` is narrower than `W`.
    pub fn contraction(&self) -> f64 {
        (self.n_particles as f64).powf(self.beta / self.dim as f64)
    }

    pub fn support_radius(&self) -> f64 {
        1.0 / self.contraction()
    }

    /// Unscaled `W`, normalised to unit mass.
    pub fn base_value(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        self.profile.shape(r2) / self.profile.raw_mass(self.dim)
    }

    /// Analytic `W_N(x)`.
    pub fn value(&self, x: &[f64]) -> f64 {
        let c = self.contraction();
        let scaled: Vec<f64> = x.iter().map(|v| v * c).collect();
        (self.n_particles as f64).powf(self.beta) * self.base_value(&scaled)
    }
}

/// Lattice samples of `W_N`, normalised to unit discrete mass.
#[derive(Debug, Clone)]
pub struct KernelStencil {
    spec: MollifierSpec,
    spacing: Vec<f64>,
    cell_volume: f64,
    /// Offsets reach `-reach..=reach` cells along every axis.
    reach: usize,
    /// Inverse of the squared support radius, in physical units.
    inv_support2: f64,
    /// Centred stencil, row-major over `(2 reach + 1)^d`.
    centered: Vec<f64>,
}

impl KernelStencil {
    pub fn spec(&self) -> &MollifierSpec {
        &self.spec
    }

    pub fn reach(&self) -> usize {
        self.reach
    }

    pub fn width(&self) -> usize {
        2 * self.reach + 1
    }

    pub fn support_radius(&self) -> f64 {
        self.spec.support_radius()
    }

    /// Values for a kernel centred exactly on a cell centre.
    pub fn centered(&self) -> &[f64] {
        &self.centered
    }

    /// Discrete mass of the centred stencil.
    pub fn mass(&self) -> f64 {
        self.centered.iter().sum::<f64>() * self.cell_volume
    }

    /// Fills `out` with the stencil for a kernel centred at sub-cell offset
    /// `frac` (each component in `[0, 1)`, 0.5 = cell centre) and returns the
    /// raw sum before normalisation. Values are left unnormalised.
    fn raw_weights(&self, frac: &[f64], out: &mut [f64]) -> f64 {
        let d = self.spec.dim;
        let w = self.width();
        let reach = self.reach as f64;
        // squared distance contributions per axis, per offset
        let mut axis_d2 = [[0.0f64; 64]; MAX_DIM];
        for a in 0..d {
            for o in 0..w {
                let dx = ((o as f64 - reach + 0.5) - frac[a]) * self.spacing[a];
                axis_d2[a][o] = dx * dx;
            }
        }
        let mut sum = 0.0;
        let mut idx = [0usize; MAX_DIM];
        for v in out.iter_mut() {
            let mut r2 = 0.0;
            for a in 0..d {
                r2 += axis_d2[a][idx[a]];
            }
            let value = self.spec.profile.shape(r2 * self.inv_support2);
            *v = value;
            sum += value;
            for a in (0..d).rev() {
                idx[a] += 1;
                if idx[a] < w {
                    break;
                }
                idx[a] = 0;
            }
        }
        sum
    }
}

/// Samples `W_N` on the grid lattice around a cell centre.
pub fn build_scaled_kernel(spec: &MollifierSpec, geometry: &GridGeometry) -> Result<KernelStencil> {
    if spec.dim != geometry.dim() {
        return Err(Error::GeometryMismatch);
    }
    let radius = spec.support_radius();
    let cells_across = 2.0 * radius / geometry.min_spacing();
    let max_spacing = geometry.spacings().into_iter().fold(0.0, f64::max);
    let worst = 2.0 * radius / max_spacing;
    if worst < 3.0 {
        return Err(Error::UnresolvableKernel {
            cells: worst.min(cells_across),
        });
    }
    let reach = (radius / geometry.min_spacing()).ceil() as usize + 1;
    if 2 * reach + 1 > 64 {
        return Err(Error::InvalidGeometry(format!(
            "kernel stencil of {} cells per axis exceeds the supported 63",
            2 * reach + 1
        )));
    }
    let mut stencil = KernelStencil {
        spec: spec.clone(),
        spacing: geometry.spacings(),
        cell_volume: geometry.cell_volume(),
        reach,
        inv_support2: 1.0 / (radius * radius),
        centered: Vec::new(),
    };
    let mut centered = vec![0.0; stencil.width().pow(spec.dim as u32)];
    let sum = stencil.raw_weights(&[0.5; MAX_DIM][..spec.dim], &mut centered);
    let scale = 1.0 / (sum * stencil.cell_volume);
    centered.iter_mut().for_each(|v| *v *= scale);
    stencil.centered = centered;
    Ok(stencil)
}

/// Closest distance a particle may keep from the grid boundary so that its
/// stencil stays inside the grid.
pub fn deposition_margin(stencil: &KernelStencil, axis: usize) -> f64 {
    (stencil.reach as f64 + 0.5) * stencil.spacing[axis]
}

/// Checks that every particle keeps the deposition margin.
pub fn check_positions(
    positions: &[f64],
    stencil: &KernelStencil,
    geometry: &GridGeometry,
) -> Result<()> {
    let d = geometry.dim();
    for (i, p) in positions.chunks_exact(d).enumerate() {
        for a in 0..d {
            let m = deposition_margin(stencil, a);
            let ok = p[a].is_finite() && p[a] >= geometry.origin[a] + m && p[a] <= geometry.upper(a) - m;
            if !ok {
                return Err(Error::ParticleOutOfDomain {
                    index: i,
                    position: p.to_vec(),
                });
            }
        }
    }
    Ok(())
}

const DEPOSIT_CHUNK: usize = 512;

/// `u^N(x) = (1/N) Σ_i W_N(x - X_i)` on the grid.
///
/// `positions` is the flat `N × d` particle array. Particles are accumulated
/// in fixed chunks whose partial fields are merged in chunk order, so the
/// result does not depend on the rayon thread count.
pub fn deposit_density(
    positions: &[f64],
    stencil: &KernelStencil,
    geometry: &GridGeometry,
) -> Result<DensityField> {
    let d = geometry.dim();
    if stencil.spec.dim != d || !positions.len().is_multiple_of(d) {
        return Err(Error::GeometryMismatch);
    }
    check_positions(positions, stencil, geometry)?;
    let n = positions.len() / d;
    let inv_n = 1.0 / n as f64;

    let accumulate = |chunk: &[f64]| -> Vec<f64> {
        let mut field = vec![0.0; geometry.len()];
        let mut weights = vec![0.0; stencil.centered.len()];
        for p in chunk.chunks_exact(d) {
            scatter_one(p, stencil, geometry, inv_n, &mut weights, &mut field);
        }
        field
    };

    let chunks: Vec<&[f64]> = positions.chunks(DEPOSIT_CHUNK * d).collect();
    let values = if chunks.len() <= 1 {
        chunks.first().map(|c| accumulate(c)).unwrap_or_else(|| vec![0.0; geometry.len()])
    } else {
        let partials: Vec<Vec<f64>> = chunks.par_iter().map(|c| accumulate(c)).collect();
        let mut iter = partials.into_iter();
        let mut total = iter.next().unwrap_or_default();
        for part in iter {
            total.iter_mut().zip(part).for_each(|(t, v)| *t += v);
        }
        total
    };
    Ok(ScalarField {
        geometry: geometry.clone(),
        values,
    })
}

fn scatter_one(
    p: &[f64],
    stencil: &KernelStencil,
    geometry: &GridGeometry,
    mass: f64,
    weights: &mut [f64],
    field: &mut [f64],
) {
    let d = geometry.dim();
    let mut base = [0usize; MAX_DIM];
    let mut frac = [0.0; MAX_DIM];
    for a in 0..d {
        let s = (p[a] - geometry.origin[a]) / geometry.spacing(a);
        let j = s.floor();
        frac[a] = s - j;
        // margin check guarantees j >= reach
        base[a] = j as usize - stencil.reach;
    }
    let sum = stencil.raw_weights(&frac[..d], weights);
    let scale = mass / (sum * stencil.cell_volume);
    let w = stencil.width();
    let strides = geometry.strides();
    let mut idx = [0usize; MAX_DIM];
    for &value in weights.iter() {
        if value != 0.0 {
            let mut flat = 0;
            for a in 0..d {
                flat += (base[a] + idx[a]) * strides[a];
            }
            field[flat] += value * scale;
        }
        for a in (0..d).rev() {
            idx[a] += 1;
            if idx[a] < w {
                break;
            }
            idx[a] = 0;
        }
    }
}

/// `sqrt(Σ v^2 · cell_volume)`.
pub fn l2_norm(field: &ScalarField) -> f64 {
    (field.values.iter().map(|v| v * v).sum::<f64>() * field.geometry.cell_volume()).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(dim: usize, beta: f64, n: usize) -> MollifierSpec {
        MollifierSpec::new(MollifierProfile::Bump, dim, beta, n).unwrap()
    }

    #[test]
    fn base_kernel_has_unit_mass() {
        for dim in 1..=3 {
            for profile in [MollifierProfile::Bump, MollifierProfile::Triweight] {
                let s = MollifierSpec::new(profile, dim, 0.5, 1).unwrap();
                // independent cartesian midpoint quadrature
                let n: usize = match dim {
                    1 => 4000,
                    2 => 600,
                    _ => 120,
                };
                let h = 2.0 / n as f64;
                let mut total = 0.0;
                let count = n.pow(dim as u32);
                for flat in 0..count {
                    let mut rem = flat;
                    let mut x = [0.0; 3];
                    for a in 0..dim {
                        x[a] = -1.0 + ((rem % n) as f64 + 0.5) * h;
                        rem /= n;
                    }
                    total += s.base_value(&x[..dim]);
                }
                total *= h.powi(dim as i32);
                assert!((total - 1.0).abs() < 2e-3, "dim {dim} {profile:?}: {total}");
            }
        }
    }

    #[test]
    fn unit_particle_count_leaves_kernel_unscaled() {
        let s = spec(2, 0.5, 1);
        assert_eq!(s.contraction(), 1.0);
        let x = [0.3, -0.2];
        assert_eq!(s.value(&x), s.base_value(&x));
    }

    #[test]
    fn support_shrinks_with_particle_count() {
        let s = spec(2, 0.9, 100);
        let expected = 100f64.powf(0.45);
        assert!((s.contraction() - expected).abs() < 1e-12);
        assert!((s.contraction() - 7.943).abs() < 1e-3);
        assert!((s.support_radius() * expected - 1.0).abs() < 1e-15);
    }

    #[test]
    fn stencil_has_exact_unit_mass() {
        for (n, cells) in [(1usize, 16usize), (100, 128), (1000, 200)] {
            let s = spec(2, 0.5, n);
            let g = GridGeometry::cube(2, -2.0, 2.0, cells).unwrap();
            let st = build_scaled_kernel(&s, &g).unwrap();
            assert!((st.mass() - 1.0).abs() < 1e-14);
            assert!(st.centered().iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let s = spec(2, 0.9, 100);
        let g = GridGeometry::cube(2, 0.0, 10.0, 64).unwrap();
        assert!(matches!(
            build_scaled_kernel(&s, &g),
            Err(Error::UnresolvableKernel { .. })
        ));
    }

    #[test]
    fn single_centred_particle_reproduces_stencil() {
        let s = spec(2, 0.5, 1);
        let g = GridGeometry::cube(2, -2.0, 2.0, 32).unwrap();
        let st = build_scaled_kernel(&s, &g).unwrap();
        let centre = g.center(g.flat_index(&[16, 16]));
        let u = deposit_density(&centre, &st, &g).unwrap();
        let w = st.width();
        for (k, &v) in st.centered().iter().enumerate() {
            let (oi, oj) = (k / w, k % w);
            let flat = g.flat_index(&[16 + oi - st.reach(), 16 + oj - st.reach()]);
            assert_eq!(u.values[flat], v);
        }
        assert!((u.mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn coincident_particles_match_single_particle() {
        let g = GridGeometry::cube(2, -2.0, 2.0, 40).unwrap();
        let p = [0.123, -0.456];
        let st = build_scaled_kernel(&spec(2, 0.5, 2), &g).unwrap();
        let two = deposit_density(&[p[0], p[1], p[0], p[1]], &st, &g).unwrap();
        let one = deposit_density(&p, &st, &g).unwrap();
        assert_eq!(two.values, one.values);
        assert!((one.mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn out_of_margin_particle_is_reported() {
        let s = spec(2, 0.5, 2);
        let g = GridGeometry::cube(2, 0.0, 4.0, 40).unwrap();
        let st = build_scaled_kernel(&s, &g).unwrap();
        let err = deposit_density(&[2.0, 2.0, 0.01, 2.0], &st, &g).unwrap_err();
        assert!(matches!(err, Error::ParticleOutOfDomain { index: 1, .. }));
    }

    #[test]
    fn l2_norm_closed_forms() {
        let g = GridGeometry::new(vec![0.0, 0.0], vec![2.0, 3.0], vec![10, 12]).unwrap();
        assert_eq!(l2_norm(&ScalarField::zeros(&g)), 0.0);
        let c = 1.7;
        assert!((l2_norm(&ScalarField::constant(&g, c)) - c * 6f64.sqrt()).abs() < 1e-12);
    }
}

//! Uniform cell-centred grids and the scalar/vector fields that live on them.
//!
//! Values are stored row-major: the last axis varies fastest. Cell `j` along
//! axis `a` has its centre at `origin[a] + (j + 0.5) * spacing[a]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridGeometry {
    pub origin: Vec<f64>,
    pub extent: Vec<f64>,
    pub cells: Vec<usize>,
}

impl GridGeometry {
    pub fn new(origin: Vec<f64>, extent: Vec<f64>, cells: Vec<usize>) -> Result<Self> {
        let geometry = Self {
            origin,
            extent,
            cells,
        };
        geometry.validate()?;
        Ok(geometry)
    }

    /// Square (cubic) grid `[lo, hi]^dim` with `n` cells per axis.
    pub fn cube(dim: usize, lo: f64, hi: f64, n: usize) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi - lo; dim], vec![n; dim])
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.origin.len();
        if d == 0 || d > MAX_DIM {
            return Err(Error::InvalidGeometry(format!(
                "dimension {d} not in 1..={MAX_DIM}"
            )));
        }
        if self.extent.len() != d || self.cells.len() != d {
            return Err(Error::InvalidGeometry(
                "origin, extent and cells must have the same length".into(),
            ));
        }
        if self.origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidGeometry("origin must be finite".into()));
        }
        if self.extent.iter().any(|&e| !(e.is_finite() && e > 0.0)) {
            return Err(Error::InvalidGeometry("extent must be positive".into()));
        }
        if self.cells.iter().any(|&n| n < 2) {
            return Err(Error::InvalidGeometry(
                "at least 2 cells per axis are required".into(),
            ));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    pub fn len(&self) -> usize {
        self.cells.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.extent[axis] / self.cells[axis] as f64
    }

    pub fn spacings(&self) -> Vec<f64> {
        (0..self.dim()).map(|a| self.spacing(a)).collect()
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacings().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.spacing(a)).product()
    }

    pub fn domain_volume(&self) -> f64 {
        self.extent.iter().product()
    }

    pub fn upper(&self, axis: usize) -> f64 {
        self.origin[axis] + self.extent[axis]
    }

    /// Row-major strides.
    pub fn strides(&self) -> Vec<usize> {
        let d = self.dim();
        let mut strides = vec![1; d];
        for a in (0..d.saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * self.cells[a + 1];
        }
        strides
    }

    pub fn flat_index(&self, index: &[usize]) -> usize {
        index
            .iter()
            .zip(&self.cells)
            .fold(0, |acc, (&i, &n)| acc * n + i)
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut index = vec![0; self.dim()];
        for a in (0..self.dim()).rev() {
            index[a] = flat % self.cells[a];
            flat /= self.cells[a];
        }
        index
    }

    pub fn center_coord(&self, axis: usize, j: usize) -> f64 {
        self.origin[axis] + (j as f64 + 0.5) * self.spacing(axis)
    }

    pub fn center(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat)
            .iter()
            .enumerate()
            .map(|(a, &j)| self.center_coord(a, j))
            .collect()
    }

    /// Iterator over all cell centres in storage order.
    pub fn centers(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.len()).map(move |i| self.center(i))
    }

    /// Position expressed in cell units relative to the origin, so that the
    /// centre of cell `j` sits at `j + 0.5`.
    pub fn to_cell_units(&self, point: &[f64]) -> Vec<f64> {
        point
            .iter()
            .enumerate()
            .map(|(a, &x)| (x - self.origin[a]) / self.spacing(a))
            .collect()
    }

    pub fn centroid(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|a| self.origin[a] + 0.5 * self.extent[a])
            .collect()
    }

    /// Lower corner cell and fractional offsets for multilinear
    /// interpolation between cell centres; corners are `base + {0,1}^d`.
    pub fn interpolation_base(&self, point: &[f64]) -> ([usize; MAX_DIM], [f64; MAX_DIM]) {
        let mut base = [0usize; MAX_DIM];
        let mut frac = [0.0f64; MAX_DIM];
        for a in 0..self.dim() {
            let mut s = (point[a] - self.origin[a]) / self.spacing(a) - 0.5;
            // snap round-off so that centres reproduce stored values exactly
            if (s - s.round()).abs() < 1e-9 {
                s = s.round();
            }
            let max_base = self.cells[a] - 2;
            let j = s.floor();
            let (j, f) = if j < 0.0 {
                (0, 0.0)
            } else if j as usize > max_base {
                (max_base, 1.0)
            } else {
                (j as usize, s - j)
            };
            base[a] = j;
            frac[a] = f;
        }
        (base, frac)
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        point
            .iter()
            .enumerate()
            .all(|(a, &x)| x >= self.origin[a] && x <= self.upper(a))
    }
}

/// Samples of a scalar quantity, one per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub geometry: GridGeometry,
    pub values: Vec<f64>,
}

/// Smoothed particle density or PDE density. Same storage as [`ScalarField`].
pub type DensityField = ScalarField;

impl ScalarField {
    pub fn zeros(geometry: &GridGeometry) -> Self {
        Self::constant(geometry, 0.0)
    }

    pub fn constant(geometry: &GridGeometry, value: f64) -> Self {
        Self {
            geometry: geometry.clone(),
            values: vec![value; geometry.len()],
        }
    }

    pub fn from_fn(geometry: &GridGeometry, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = geometry.centers().map(|x| f(&x)).collect();
        Self {
            geometry: geometry.clone(),
            values,
        }
    }

    pub fn from_values(geometry: &GridGeometry, values: Vec<f64>) -> Result<Self> {
        if values.len() != geometry.len() {
            return Err(Error::GeometryMismatch);
        }
        Ok(Self {
            geometry: geometry.clone(),
            values,
        })
    }

    /// Sum of values times cell volume.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.geometry.cell_volume()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn ensure_same_grid(&self, other: &GridGeometry) -> Result<()> {
        if &self.geometry == other {
            Ok(())
        } else {
            Err(Error::GeometryMismatch)
        }
    }

    /// Rescales so that `mass() == target` up to rounding.
    pub fn normalize_mass(&mut self, target: f64) {
        let mass = self.mass();
        if mass > 0.0 {
            let scale = target / mass;
            self.values.iter_mut().for_each(|v| *v *= scale);
        }
    }

    pub fn sub(&self, other: &ScalarField) -> Result<ScalarField> {
        other.ensure_same_grid(&self.geometry)?;
        Ok(ScalarField {
            geometry: self.geometry.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }
}

/// Vector-valued samples, stored one component array per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub geometry: GridGeometry,
    pub components: Vec<Vec<f64>>,
}

impl VectorField {
    pub fn zeros(geometry: &GridGeometry) -> Self {
        Self {
            geometry: geometry.clone(),
            components: vec![vec![0.0; geometry.len()]; geometry.dim()],
        }
    }

    pub fn constant(geometry: &GridGeometry, value: &[f64]) -> Self {
        Self {
            geometry: geometry.clone(),
            components: value.iter().map(|&v| vec![v; geometry.len()]).collect(),
        }
    }

    pub fn at(&self, flat: usize) -> Vec<f64> {
        self.components.iter().map(|c| c[flat]).collect()
    }

    pub fn norm_at(&self, flat: usize) -> f64 {
        self.components
            .iter()
            .map(|c| c[flat] * c[flat])
            .sum::<f64>()
            .sqrt()
    }

    /// Largest Euclidean length over all cells.
    pub fn sup_norm(&self) -> f64 {
        (0..self.geometry.len())
            .map(|i| self.norm_at(i))
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.components.iter().flatten().all(|v| v.is_finite())
    }

    /// Multilinear interpolation between cell centres. Points closer to the
    /// boundary than half a cell are clamped onto the outermost centres.
    pub fn interpolate(&self, point: &[f64]) -> Vec<f64> {
        let g = &self.geometry;
        let d = g.dim();
        let strides = g.strides();
        let (base, frac) = g.interpolation_base(point);
        let mut out = vec![0.0; d];
        for corner in 0..(1usize << d) {
            let mut weight = 1.0;
            let mut flat = 0;
            for a in 0..d {
                let bit = (corner >> a) & 1;
                weight *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
                flat += (base[a] + bit) * strides[a];
            }
            if weight == 0.0 {
                continue;
            }
            for (k, comp) in self.components.iter().enumerate() {
                out[k] += weight * comp[flat];
            }
        }
        out
    }
}

//! The degradable environmental field `m`.
//!
//! `∂m/∂t = -λ u m^ζ` has the closed-form solution `m_t = F_ζ(m_0, ∫_0^t u ds)`,
//! so the state keeps `m_0` and the running exposure `∫ u ds` per cell and
//! materialises `m` on demand.

use crate::error::{Error, Result};
use crate::grid::ScalarField;

/// `F_ζ(a, b) = a e^{-λ b}` for `ζ = 1` and
/// `a / [a^{ζ-1} (ζ-1) λ b + 1]^{1/(ζ-1)}` for `ζ >= 2`.
pub fn f_zeta(a: f64, b: f64, lambda: f64, zeta: u32) -> f64 {
    match zeta {
        0 => panic!("zeta must be at least 1"),
        1 => a * (-lambda * b).exp(),
        2 => a / (a * lambda * b + 1.0),
        z => {
            let k = (z - 1) as f64;
            a / (a.powf(k) * k * lambda * b + 1.0).powf(1.0 / k)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixFieldState {
    pub m0: ScalarField,
    /// Accumulated `∫_0^t u ds` per cell.
    pub exposure: ScalarField,
    pub lambda: f64,
    pub zeta: u32,
    pub bound_m: f64,
}

impl MatrixFieldState {
    pub fn new(m0: ScalarField, lambda: f64, zeta: u32, bound_m: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::Config(format!("lambda = {lambda} must be nonnegative")));
        }
        if zeta < 1 {
            return Err(Error::Config("zeta must be at least 1".into()));
        }
        if !(bound_m.is_finite() && bound_m > 0.0) {
            return Err(Error::Config(format!("bound_m = {bound_m} must be positive")));
        }
        if let Some(bad) = m0.values.iter().find(|&&v| !(0.0..=bound_m).contains(&v)) {
            return Err(Error::Config(format!(
                "initial field value {bad} outside [0, {bound_m}]"
            )));
        }
        let exposure = ScalarField::zeros(&m0.geometry);
        Ok(Self {
            m0,
            exposure,
            lambda,
            zeta,
            bound_m,
        })
    }

    /// Adds `u dt` to the exposure of every cell.
    pub fn update(&mut self, u: &ScalarField, dt: f64) -> Result<()> {
        u.ensure_same_grid(&self.m0.geometry)?;
        // exposure must not decrease, so negative PDE undershoot counts as 0
        for (e, &v) in self.exposure.values.iter_mut().zip(&u.values) {
            *e += v.max(0.0) * dt;
        }
        Ok(())
    }

    /// Current `m = F_ζ(m_0, exposure)`.
    pub fn current(&self) -> ScalarField {
        let values = self
            .m0
            .values
            .iter()
            .zip(&self.exposure.values)
            .map(|(&a, &b)| f_zeta(a, b, self.lambda, self.zeta))
            .collect();
        ScalarField {
            geometry: self.m0.geometry.clone(),
            values,
        }
    }
}

/// Functional form of [`MatrixFieldState::update`].
pub fn update_m(state: &MatrixFieldState, u: &ScalarField, dt: f64) -> Result<MatrixFieldState> {
    let mut next = state.clone();
    next.update(u, dt)?;
    Ok(next)
}

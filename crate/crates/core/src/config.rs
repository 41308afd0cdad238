//! Run configuration. TOML is the canonical file format; JSON is accepted.
//! Unknown keys are rejected at every level.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridGeometry;
use crate::interaction::{InteractionKernel, KernelConfig};
use crate::particles::InitialLaw;
use crate::smoothing::{MollifierProfile, MollifierSpec};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MollifierConfig {
    #[serde(default)]
    pub profile: MollifierProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub n_particles: usize,
    pub beta: f64,
    /// Noise amplitude; the limiting PDE has diffusivity `sigma^2 / 2`.
    pub sigma: f64,
    pub dt: f64,
    pub t_end: f64,
    /// Empty means four evenly spaced times from 0 to `t_end`.
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_refresh")]
    pub drift_refresh_every: usize,
    pub lambda: f64,
    pub zeta: u32,
    pub bound_m: f64,
    /// Uniform initial value of the environmental field.
    #[serde(default = "default_m0")]
    pub m0: f64,
    pub geometry: GridGeometry,
    pub kernel: KernelConfig,
    #[serde(default)]
    pub mollifier: MollifierConfig,
    pub initial: InitialLaw,
}

fn default_refresh() -> usize {
    10
}

fn default_m0() -> f64 {
    1.0
}

impl SimConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: SimConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let config: SimConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads `.json` files as JSON and everything else as TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Self::from_json_str(&text),
            _ => Self::from_toml_str(&text),
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration serializes to TOML")
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        self.geometry
            .validate()
            .map_err(|e| Error::Config(format!("geometry: {e}")))?;
        let d = self.geometry.dim();
        if self.n_particles == 0 {
            return fail("n_particles must be positive".into());
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return fail(format!("beta = {} must lie in (0, 1)", self.beta));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return fail(format!("sigma = {} must be positive", self.sigma));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return fail(format!("dt = {} must be positive", self.dt));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return fail(format!("t_end = {} must be nonnegative", self.t_end));
        }
        if let Some(t) = self
            .snapshot_times
            .iter()
            .find(|t| !(t.is_finite() && **t >= 0.0 && **t <= self.t_end * (1.0 + 1e-9) + 1e-12))
        {
            return fail(format!("snapshot_times: {t} outside [0, t_end = {}]", self.t_end));
        }
        if self.drift_refresh_every == 0 {
            return fail("drift_refresh_every must be at least 1".into());
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return fail(format!("lambda = {} must be nonnegative", self.lambda));
        }
        if self.zeta == 0 {
            return fail("zeta must be at least 1".into());
        }
        if !(self.bound_m.is_finite() && self.bound_m > 0.0) {
            return fail(format!("bound_m = {} must be positive", self.bound_m));
        }
        if !(self.m0 >= 0.0 && self.m0 <= self.bound_m) {
            return fail(format!("m0 = {} outside [0, bound_m]", self.m0));
        }
        InteractionKernel::from_config(&self.kernel)?;
        self.initial.validate(d)?;
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.geometry.dim()
    }

    /// Diffusivity of the limiting PDE.
    pub fn nu(&self) -> f64 {
        0.5 * self.sigma * self.sigma
    }

    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    pub fn kernel(&self) -> Result<InteractionKernel> {
        InteractionKernel::from_config(&self.kernel)
    }

    pub fn mollifier(&self) -> Result<MollifierSpec> {
        MollifierSpec::new(self.mollifier.profile, self.dim(), self.beta, self.n_particles)
    }

    pub fn effective_snapshot_times(&self) -> Vec<f64> {
        if !self.snapshot_times.is_empty() {
            return self.snapshot_times.clone();
        }
        if self.t_end == 0.0 {
            return vec![0.0];
        }
        (0..4).map(|k| self.t_end * k as f64 / 3.0).collect()
    }

    /// Sorted, deduplicated step indices at which snapshots are taken.
    pub fn snapshot_steps(&self) -> Vec<usize> {
        let n = self.n_steps();
        let mut steps: Vec<usize> = self
            .effective_snapshot_times()
            .iter()
            .map(|t| ((t / self.dt).round() as usize).min(n))
            .collect();
        steps.sort_unstable();
        steps.dedup();
        steps
    }

    /// Applies a `dotted.key=value` override. The value is parsed as a TOML
    /// literal when possible and as a bare string otherwise.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{assignment}` is not key=value")))?;
        let key = key.trim();
        let value = parse_literal(raw.trim());
        let mut root = toml::Value::try_from(&*self).map_err(|e| Error::Config(e.to_string()))?;
        let mut cursor = &mut root;
        let parts: Vec<&str> = key.split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            let table = cursor
                .as_table_mut()
                .ok_or_else(|| Error::Config(format!("`{key}`: `{part}` is not a table")))?;
            if i + 1 == parts.len() {
                table.insert(part.to_string(), value.clone());
                break;
            }
            cursor = table
                .entry(part.to_string())
                .or_insert_with(|| toml::Value::Table(Default::default()));
        }
        let updated: SimConfig = root
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("`{key}`: {e}")))?;
        updated.validate()?;
        *self = updated;
        Ok(())
    }
}

fn parse_literal(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&doc) {
        Ok(mut table) => table.remove("v").unwrap_or(toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::ScenarioPreset;

    fn base() -> SimConfig {
        ScenarioPreset::Degenerate.config()
    }

    #[test]
    fn toml_and_json_round_trip() {
        let config = base();
        let text = config.to_toml_string();
        assert_eq!(SimConfig::from_toml_str(&text).unwrap(), config);
        let json = serde_json::to_string(&config).unwrap();
        assert_eq!(SimConfig::from_json_str(&json).unwrap(), config);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut text = base().to_toml_string();
        text.insert_str(0, "bogus = 3\n");
        let err = SimConfig::from_toml_str(&text).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn overrides_reach_nested_tables() {
        let mut config = base();
        config.apply_override("t_end=1.0").unwrap();
        config.apply_override("kernel.kind = cluster").unwrap();
        config.apply_override("geometry.cells=[96, 96]").unwrap();
        config.apply_override("seed=7").unwrap();
        assert_eq!(config.t_end, 1.0);
        assert_eq!(config.kernel.kind, crate::interaction::KernelKind::Cluster);
        assert_eq!(config.geometry.cells, vec![96, 96]);
        assert_eq!(config.seed, 7);
    }

    #[test]
    fn bad_overrides_name_the_field() {
        let mut config = base();
        let err = config.apply_override("kernel.kind=spiral").unwrap_err();
        assert!(err.to_string().contains("kernel.kind"), "{err}");
        let err = config.apply_override("not_a_field=1").unwrap_err();
        assert!(err.to_string().contains("not_a_field"), "{err}");
        assert!(config.apply_override("dt=-1").is_err());
        assert!(config.apply_override("novalue").is_err());
        // a failed override leaves the configuration untouched
        assert_eq!(config, base());
    }

    #[test]
    fn snapshot_steps_cover_the_horizon() {
        let mut config = base();
        config.t_end = 0.3;
        config.dt = 0.01;
        config.snapshot_times.clear();
        assert_eq!(config.snapshot_steps(), vec![0, 10, 20, 30]);
        config.t_end = 0.0;
        assert_eq!(config.snapshot_steps(), vec![0]);
        config.t_end = 1.0;
        config.snapshot_times = vec![1.0, 0.0, 0.5, 0.5];
        assert_eq!(config.snapshot_steps(), vec![0, 50, 100]);
        config.snapshot_times = vec![2.0];
        assert!(config.validate().is_err());
    }
}

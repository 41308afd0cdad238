//! Named scenarios: N=100, sigma^2=0.1, dt=1e-4, beta=0.9, alpha=1.3, R=0.3.

use std::fmt;
use std::str::FromStr;

use crate::config::{MollifierConfig, SimConfig};
use crate::error::Error;
use crate::grid::GridGeometry;
use crate::interaction::{KernelConfig, KernelKind};
use crate::particles::InitialLaw;

/// Snapshot times of the long runs.
pub const LONG_TIMES: [f64; 4] = [0.0, 50.0, 100.0, 150.0];

/// Default horizon; the long horizon needs ~10^6 steps.
pub const DESK_T_END: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioPreset {
    Degenerate,
    DegenerateTanh,
    ModerateLog,
    ModerateAlpha,
    Cluster,
    ClusterModerate,
}

impl ScenarioPreset {
    pub const ALL: [ScenarioPreset; 6] = [
        ScenarioPreset::Degenerate,
        ScenarioPreset::DegenerateTanh,
        ScenarioPreset::ModerateLog,
        ScenarioPreset::ModerateAlpha,
        ScenarioPreset::Cluster,
        ScenarioPreset::ClusterModerate,
    ];

    pub fn kind(self) -> KernelKind {
        match self {
            ScenarioPreset::Degenerate => KernelKind::Degenerate,
            ScenarioPreset::DegenerateTanh => KernelKind::DegenerateTanh,
            ScenarioPreset::ModerateLog => KernelKind::ModerateLog,
            ScenarioPreset::ModerateAlpha => KernelKind::ModerateAlpha,
            ScenarioPreset::Cluster => KernelKind::Cluster,
            ScenarioPreset::ClusterModerate => KernelKind::ClusterModerate,
        }
    }

    pub fn name(self) -> &'static str {
        self.kind().name()
    }

    /// Desk-scale configuration: `t_end = 2`, four evenly spaced snapshots.
    ///
    /// N = 100, σ² = 0.1, dt = 1e-4, β = 0.9, uniform law on [0,2]²,
    /// R = 0.3, α = 1.3. The grid is 128² on [-2,4]². The kernels do not
    /// depend on m, so λ = 1, ζ = 1, m0 = M = 1.
    pub fn config(self) -> SimConfig {
        SimConfig {
            n_particles: 100,
            beta: 0.9,
            sigma: 0.1f64.sqrt(),
            dt: 1e-4,
            t_end: DESK_T_END,
            snapshot_times: Vec::new(),
            seed: 0,
            drift_refresh_every: 10,
            lambda: 1.0,
            zeta: 1,
            bound_m: 1.0,
            m0: 1.0,
            geometry: GridGeometry::cube(2, -2.0, 4.0, 128).expect("preset grid is valid"),
            kernel: KernelConfig {
                kind: self.kind(),
                alpha: 1.3,
                range_r: 0.3,
            },
            mollifier: MollifierConfig::default(),
            initial: InitialLaw::uniform_square(0.0, 2.0, 2),
        }
    }

    /// Same scenario with the long horizon and snapshot times.
    pub fn long_config(self) -> SimConfig {
        with_long_times(self.config())
    }
}

/// Sets `t_end = 150` and snapshots at {0, 50, 100, 150}.
pub fn with_long_times(mut config: SimConfig) -> SimConfig {
    config.t_end = LONG_TIMES[3];
    config.snapshot_times = LONG_TIMES.to_vec();
    config
}

impl fmt::Display for ScenarioPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Self::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Self::ALL.iter().map(|p| p.name()).collect();
            Error::Config(format!("unknown preset `{s}` (expected one of {})", names.join(", ")))
        })
    }
}

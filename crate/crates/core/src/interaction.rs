//! Interaction strengths `g(r, u, m)` and the nonlocal drift
//!
//! ```text
//! b(u, m)(x) = ∫ (y - x)/|y - x| g(|y - x|, u(y), m(y)) dy
//! ```
//!
//! evaluated by cell-centre quadrature. Kernels that factor as
//! `radial(r) * amplitude(u, m)` are evaluated as a zero-padded FFT
//! convolution, which is the same lattice sum without wrap-around. All
//! other kernels go through a direct sum over the cells where `u > 0`.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridGeometry, ScalarField, VectorField, MAX_DIM};
use crate::smoothing::unit_sphere_area;
use crate::spectral::FftNd;

/// Tail mass beyond the truncation radius.
pub const TRUNCATION_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Degenerate,
    DegenerateTanh,
    ModerateLog,
    ModerateAlpha,
    Cluster,
    ClusterModerate,
    Custom,
}

impl KernelKind {
    pub const NAMED: [KernelKind; 6] = [
        KernelKind::Degenerate,
        KernelKind::DegenerateTanh,
        KernelKind::ModerateLog,
        KernelKind::ModerateAlpha,
        KernelKind::Cluster,
        KernelKind::ClusterModerate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Degenerate => "degenerate",
            KernelKind::DegenerateTanh => "degenerate_tanh",
            KernelKind::ModerateLog => "moderate_log",
            KernelKind::ModerateAlpha => "moderate_alpha",
            KernelKind::Cluster => "cluster",
            KernelKind::ClusterModerate => "cluster_moderate",
            KernelKind::Custom => "custom",
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Decay of the radial factor, used to choose the truncation radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadialDecay {
    /// `e^{-r}`
    Exponential,
    /// `e^{-r^2 / range}`
    Gaussian { range: f64 },
    /// No integrable decay; the sum runs over the whole grid.
    None,
}

impl RadialDecay {
    fn profile(self, r: f64) -> f64 {
        match self {
            RadialDecay::Exponential => (-r).exp(),
            RadialDecay::Gaussian { range } => (-r * r / range).exp(),
            RadialDecay::None => 1.0,
        }
    }

    /// `|S^{d-1}| ∫_r^∞ profile(s) s^{d-1} ds`, by Simpson's rule.
    fn tail(self, r: f64, dim: usize) -> f64 {
        let scale = match self {
            RadialDecay::Exponential => 1.0,
            RadialDecay::Gaussian { range } => range.sqrt(),
            RadialDecay::None => return f64::INFINITY,
        };
        let upper = r + 60.0 * scale;
        let n = 4000;
        let h = (upper - r) / n as f64;
        let f = |s: f64| self.profile(s) * s.powi(dim as i32 - 1);
        let mut acc = f(r) + f(upper);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(r + i as f64 * h);
        }
        unit_sphere_area(dim) * acc * h / 3.0
    }

    /// Smallest radius (on a 0.01 lattice) whose tail is below `tol`.
    pub fn cutoff(self, dim: usize, tol: f64) -> f64 {
        if matches!(self, RadialDecay::None) {
            return f64::INFINITY;
        }
        let step = match self {
            RadialDecay::Gaussian { range } => 0.01 * range.sqrt().min(1.0),
            _ => 0.01,
        };
        let mut r = 0.0;
        while self.tail(r, dim) >= tol {
            r += step;
        }
        r
    }
}

pub type GFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;
pub type RadialFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type AmplitudeFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// A user-supplied interaction strength. Only constructible in code.
#[derive(Clone)]
pub struct CustomKernel {
    pub name: String,
    g: GFn,
    factors: Option<(RadialFn, AmplitudeFn)>,
    pub decay: RadialDecay,
    pub decay_bound: Option<f64>,
    /// Whether `g(r, 0, m) == 0`, which lets the direct sum skip empty cells.
    pub zero_at_zero_density: bool,
}

impl fmt::Debug for CustomKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomKernel")
            .field("name", &self.name)
            .field("separable", &self.factors.is_some())
            .field("decay", &self.decay)
            .field("decay_bound", &self.decay_bound)
            .finish()
    }
}

#[derive(Debug, Clone)]
pub struct InteractionKernel {
    pub kind: KernelKind,
    pub alpha: f64,
    pub range_r: f64,
    custom: Option<CustomKernel>,
}

/// Serializable kernel selection, as it appears in run configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub kind: KernelKind,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_range")]
    pub range_r: f64,
}

fn default_alpha() -> f64 {
    1.3
}

fn default_range() -> f64 {
    0.3
}

impl KernelConfig {
    pub fn new(kind: KernelKind) -> Self {
        Self {
            kind,
            alpha: default_alpha(),
            range_r: default_range(),
        }
    }
}

impl InteractionKernel {
    pub fn named(kind: KernelKind, alpha: f64, range_r: f64) -> Result<Self> {
        if kind == KernelKind::Custom {
            return Err(Error::Config(
                "kernel.kind: custom kernels can only be constructed programmatically".into(),
            ));
        }
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::Config(format!("kernel.alpha = {alpha} must be positive")));
        }
        if !(range_r.is_finite() && range_r > 0.0) {
            return Err(Error::Config(format!("kernel.range_r = {range_r} must be positive")));
        }
        Ok(Self {
            kind,
            alpha,
            range_r,
            custom: None,
        })
    }

    pub fn from_config(config: &KernelConfig) -> Result<Self> {
        Self::named(config.kind, config.alpha, config.range_r)
    }

    pub fn degenerate() -> Self {
        Self::named(KernelKind::Degenerate, default_alpha(), default_range()).unwrap()
    }

    /// Arbitrary `g(r, u, m)`, evaluated by direct summation.
    pub fn custom(
        name: &str,
        g: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
        decay: RadialDecay,
        decay_bound: Option<f64>,
        zero_at_zero_density: bool,
    ) -> Self {
        Self {
            kind: KernelKind::Custom,
            alpha: default_alpha(),
            range_r: default_range(),
            custom: Some(CustomKernel {
                name: name.to_string(),
                g: Arc::new(g),
                factors: None,
                decay,
                decay_bound,
                zero_at_zero_density,
            }),
        }
    }

    /// `g(r, u, m) = radial(r) * amplitude(u, m)`, evaluated by FFT convolution.
    pub fn custom_separable(
        name: &str,
        radial: impl Fn(f64) -> f64 + Send + Sync + 'static,
        amplitude: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        decay: RadialDecay,
        decay_bound: Option<f64>,
    ) -> Self {
        let radial: RadialFn = Arc::new(radial);
        let amplitude: AmplitudeFn = Arc::new(amplitude);
        let (r2, a2) = (radial.clone(), amplitude.clone());
        let zero = amplitude(0.0, 0.0) == 0.0 && amplitude(0.0, 1.0) == 0.0;
        Self {
            kind: KernelKind::Custom,
            alpha: default_alpha(),
            range_r: default_range(),
            custom: Some(CustomKernel {
                name: name.to_string(),
                g: Arc::new(move |r, u, m| r2(r) * a2(u, m)),
                factors: Some((radial, amplitude)),
                decay,
                decay_bound,
                zero_at_zero_density: zero,
            }),
        }
    }

    /// `g ≡ 0`.
    pub fn zero() -> Self {
        Self::custom_separable(
            "zero",
            |_| 0.0,
            |_, _| 0.0,
            RadialDecay::Exponential,
            Some(0.0),
        )
    }

    pub fn name(&self) -> String {
        match &self.custom {
            Some(c) => format!("custom:{}", c.name),
            None => self.kind.name().to_string(),
        }
    }

    pub fn config(&self) -> Option<KernelConfig> {
        self.custom.is_none().then_some(KernelConfig {
            kind: self.kind,
            alpha: self.alpha,
            range_r: self.range_r,
        })
    }

    /// Interaction strength; positive values attract towards `y`.
    pub fn eval_g(&self, r: f64, u: f64, m: f64) -> Result<f64> {
        let value = self.raw_g(r, u, m);
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::NonFiniteResult {
                kernel: self.name(),
                r,
                u,
                m,
            })
        }
    }

    fn raw_g(&self, r: f64, u: f64, m: f64) -> f64 {
        match self.kind {
            KernelKind::ModerateLog => moderate_log(r, u),
            KernelKind::Custom => (self.custom.as_ref().expect("custom kernel").g)(r, u, m),
            _ => self.radial(r) * self.amplitude(u, m),
        }
    }

    /// Radial factor of a separable kernel.
    fn radial(&self, r: f64) -> f64 {
        match self.kind {
            KernelKind::Degenerate | KernelKind::DegenerateTanh | KernelKind::ModerateAlpha => {
                (-r).exp()
            }
            KernelKind::Cluster | KernelKind::ClusterModerate => (-r * r / self.range_r).exp(),
            KernelKind::ModerateLog => f64::NAN,
            KernelKind::Custom => match &self.custom.as_ref().expect("custom kernel").factors {
                Some((radial, _)) => radial(r),
                None => f64::NAN,
            },
        }
    }

    /// Density/field factor of a separable kernel.
    fn amplitude(&self, u: f64, m: f64) -> f64 {
        match self.kind {
            KernelKind::Degenerate | KernelKind::Cluster => u / (1.0 + u),
            KernelKind::DegenerateTanh => u.tanh(),
            KernelKind::ModerateAlpha | KernelKind::ClusterModerate => {
                u * (self.alpha - u) / (1.0 + u)
            }
            KernelKind::ModerateLog => f64::NAN,
            KernelKind::Custom => match &self.custom.as_ref().expect("custom kernel").factors {
                Some((_, amplitude)) => amplitude(u, m),
                None => f64::NAN,
            },
        }
    }

    pub fn is_separable(&self) -> bool {
        match self.kind {
            KernelKind::ModerateLog => false,
            KernelKind::Custom => self.custom.as_ref().is_some_and(|c| c.factors.is_some()),
            _ => true,
        }
    }

    pub fn decay(&self) -> RadialDecay {
        match self.kind {
            KernelKind::Degenerate | KernelKind::DegenerateTanh | KernelKind::ModerateAlpha => {
                RadialDecay::Exponential
            }
            KernelKind::Cluster | KernelKind::ClusterModerate => RadialDecay::Gaussian {
                range: self.range_r,
            },
            KernelKind::ModerateLog => RadialDecay::None,
            KernelKind::Custom => self.custom.as_ref().expect("custom kernel").decay,
        }
    }

    /// Constant `C` with `|g(r, u, m)| <= C e^{-r}` for all arguments, when
    /// one exists.
    pub fn decay_bound(&self) -> Option<f64> {
        match self.kind {
            KernelKind::Degenerate | KernelKind::DegenerateTanh => Some(1.0),
            // sup_r exp(r - r^2/R) = exp(R/4)
            KernelKind::Cluster => Some((self.range_r / 4.0).exp()),
            // the amplitude u(α-u)/(1+u) grows linearly in u; the log kernel
            // tends to -1 at large r
            KernelKind::ModerateAlpha | KernelKind::ClusterModerate | KernelKind::ModerateLog => {
                None
            }
            KernelKind::Custom => self.custom.as_ref().expect("custom kernel").decay_bound,
        }
    }

    pub fn zero_at_zero_density(&self) -> bool {
        match self.kind {
            KernelKind::Custom => self.custom.as_ref().expect("custom kernel").zero_at_zero_density,
            _ => true,
        }
    }

    /// Truncation radius for the drift integral on `geometry`, clamped to
    /// the grid diagonal.
    pub fn cutoff_radius(&self, geometry: &GridGeometry) -> f64 {
        let diagonal = geometry.extent.iter().map(|e| e * e).sum::<f64>().sqrt();
        self.decay()
            .cutoff(geometry.dim(), TRUNCATION_TOLERANCE)
            .min(diagonal)
    }
}

/// `u log(r/u) / (1 - u log(r/u))`, extended by 0 at `u = 0` and by -1 at
/// `r = 0`.
fn moderate_log(r: f64, u: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    if r <= 0.0 {
        return -1.0;
    }
    // ln r - ln u stays finite for subnormal u, where r / u overflows
    let x = u * (r.ln() - u.ln());
    x / (1.0 - x)
}

/// `C ∫_{R^d} e^{-|y|} dy = C |S^{d-1}| (d-1)!`.
pub fn bounded_drift(kernel: &InteractionKernel, dim: usize) -> Result<f64> {
    let c = kernel
        .decay_bound()
        .ok_or_else(|| Error::NoDecayBound(kernel.name()))?;
    let gamma = (1..dim).product::<usize>() as f64;
    Ok(c * unit_sphere_area(dim) * gamma)
}

enum Plan {
    Fft {
        fft: FftNd,
        padded: Vec<usize>,
        /// Transformed kernel components, one per axis.
        kernel_hat: Vec<Vec<Complex64>>,
    },
    Direct,
}

/// Drift evaluator bound to a kernel and a grid. Construction precomputes
/// the kernel transform, so reuse one operator across time steps.
pub struct DriftOperator {
    kernel: InteractionKernel,
    geometry: GridGeometry,
    cutoff: f64,
    plan: Plan,
}

impl fmt::Debug for DriftOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DriftOperator")
            .field("kernel", &self.kernel.name())
            .field("cutoff", &self.cutoff)
            .field("fft", &matches!(self.plan, Plan::Fft { .. }))
            .finish()
    }
}

impl DriftOperator {
    pub fn new(kernel: &InteractionKernel, geometry: &GridGeometry) -> Result<Self> {
        geometry.validate()?;
        let cutoff = kernel.cutoff_radius(geometry);
        let plan = if kernel.is_separable() {
            Self::fft_plan(kernel, geometry, cutoff)?
        } else {
            Plan::Direct
        };
        Ok(Self {
            kernel: kernel.clone(),
            geometry: geometry.clone(),
            cutoff,
            plan,
        })
    }

    fn fft_plan(kernel: &InteractionKernel, geometry: &GridGeometry, cutoff: f64) -> Result<Plan> {
        let d = geometry.dim();
        let padded: Vec<usize> = geometry.cells.iter().map(|&n| 2 * n).collect();
        let len: usize = padded.iter().product();
        let h = geometry.spacings();
        let mut comps = vec![vec![Complex64::default(); len]; d];
        let mut idx = vec![0usize; d];
        for flat in 0..len {
            let mut rem = flat;
            for a in (0..d).rev() {
                idx[a] = rem % padded[a];
                rem /= padded[a];
            }
            // lattice offset o in (-n, n); this slot holds K(-o)
            let mut z = [0.0; MAX_DIM];
            let mut skip = false;
            for a in 0..d {
                let n = geometry.cells[a] as isize;
                let p = idx[a] as isize;
                let o = if p < n { p } else { p - 2 * n };
                if o == -n {
                    skip = true;
                }
                z[a] = -(o as f64) * h[a];
            }
            if skip {
                continue;
            }
            let r = z[..d].iter().map(|v| v * v).sum::<f64>().sqrt();
            if r == 0.0 || r > cutoff {
                continue;
            }
            let radial = kernel.radial(r);
            if !radial.is_finite() {
                return Err(Error::NonFiniteResult {
                    kernel: kernel.name(),
                    r,
                    u: f64::NAN,
                    m: f64::NAN,
                });
            }
            for a in 0..d {
                comps[a][flat] = Complex64::new(z[a] / r * radial, 0.0);
            }
        }
        let fft = FftNd::new(&padded);
        for c in comps.iter_mut() {
            fft.forward(c);
        }
        Ok(Plan::Fft {
            fft,
            padded,
            kernel_hat: comps,
        })
    }

    pub fn kernel(&self) -> &InteractionKernel {
        &self.kernel
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    /// Drift at every cell centre.
    pub fn apply(&self, u: &ScalarField, m: &ScalarField) -> Result<VectorField> {
        u.ensure_same_grid(&self.geometry)?;
        m.ensure_same_grid(&self.geometry)?;
        match &self.plan {
            Plan::Fft {
                fft,
                padded,
                kernel_hat,
            } => self.apply_fft(u, m, fft, padded, kernel_hat),
            Plan::Direct => {
                let cells: Vec<usize> = (0..self.geometry.len()).collect();
                let values = self.direct_at(u, m, &cells)?;
                let mut field = VectorField::zeros(&self.geometry);
                for (i, v) in values.into_iter().enumerate() {
                    for (a, c) in v.into_iter().enumerate() {
                        field.components[a][i] = c;
                    }
                }
                Ok(field)
            }
        }
    }

    /// Drift at the listed cells only. Cheaper than [`apply`](Self::apply)
    /// for kernels without an FFT plan.
    pub fn apply_at(&self, u: &ScalarField, m: &ScalarField, cells: &[usize]) -> Result<Vec<Vec<f64>>> {
        u.ensure_same_grid(&self.geometry)?;
        m.ensure_same_grid(&self.geometry)?;
        match &self.plan {
            Plan::Fft { .. } => {
                let field = self.apply(u, m)?;
                Ok(cells.iter().map(|&c| field.at(c)).collect())
            }
            Plan::Direct => self.direct_at(u, m, cells),
        }
    }

    pub fn uses_fft(&self) -> bool {
        matches!(self.plan, Plan::Fft { .. })
    }

    fn apply_fft(
        &self,
        u: &ScalarField,
        m: &ScalarField,
        fft: &FftNd,
        padded: &[usize],
        kernel_hat: &[Vec<Complex64>],
    ) -> Result<VectorField> {
        let g = &self.geometry;
        let d = g.dim();
        let vol = g.cell_volume();
        let len = fft.len();
        let mut source = vec![Complex64::default(); len];
        for i in 0..g.len() {
            let a = self.kernel.amplitude(u.values[i], m.values[i]);
            if !a.is_finite() {
                return Err(Error::NonFiniteResult {
                    kernel: self.kernel.name(),
                    r: f64::NAN,
                    u: u.values[i],
                    m: m.values[i],
                });
            }
            source[padded_index(g, padded, i)] = Complex64::new(a * vol, 0.0);
        }
        fft.forward(&mut source);

        let mut field = VectorField::zeros(g);
        let mut axis = 0;
        while axis < d {
            // two real outputs share one inverse transform
            let pair = axis + 1 < d;
            let mut spectrum: Vec<Complex64> = if pair {
                source
                    .iter()
                    .zip(&kernel_hat[axis])
                    .zip(&kernel_hat[axis + 1])
                    .map(|((s, kx), ky)| s * (kx + Complex64::i() * ky))
                    .collect()
            } else {
                source.iter().zip(&kernel_hat[axis]).map(|(s, k)| s * k).collect()
            };
            fft.inverse(&mut spectrum);
            for i in 0..g.len() {
                let v = spectrum[padded_index(g, padded, i)];
                field.components[axis][i] = v.re;
                if pair {
                    field.components[axis + 1][i] = v.im;
                }
            }
            axis += if pair { 2 } else { 1 };
        }
        Ok(field)
    }

    fn direct_at(&self, u: &ScalarField, m: &ScalarField, cells: &[usize]) -> Result<Vec<Vec<f64>>> {
        let g = &self.geometry;
        let d = g.dim();
        let vol = g.cell_volume();
        let skip_empty = self.kernel.zero_at_zero_density();
        let sources: Vec<(Vec<f64>, f64, f64)> = (0..g.len())
            .filter(|&j| !(skip_empty && u.values[j] == 0.0))
            .map(|j| (g.center(j), u.values[j], m.values[j]))
            .collect();
        let cutoff = self.cutoff;
        cells
            .par_iter()
            .map(|&cell| {
                let x = g.center(cell);
                let mut acc = vec![0.0; d];
                for (y, uy, my) in &sources {
                    let mut r2 = 0.0;
                    for a in 0..d {
                        let dz = y[a] - x[a];
                        r2 += dz * dz;
                    }
                    if r2 == 0.0 {
                        continue;
                    }
                    let r = r2.sqrt();
                    if r > cutoff {
                        continue;
                    }
                    let gval = self.kernel.eval_g(r, *uy, *my)?;
                    let w = gval * vol / r;
                    for a in 0..d {
                        acc[a] += (y[a] - x[a]) * w;
                    }
                }
                Ok(acc)
            })
            .collect()
    }
}

fn padded_index(g: &GridGeometry, padded: &[usize], flat: usize) -> usize {
    let idx = g.multi_index(flat);
    idx.iter().zip(padded).fold(0, |acc, (&i, &p)| acc * p + i)
}

/// Drift field `b(u, m)` on the grid of `u`.
pub fn drift_field(u: &ScalarField, m: &ScalarField, kernel: &InteractionKernel) -> Result<VectorField> {
    if u.geometry != m.geometry {
        return Err(Error::GeometryMismatch);
    }
    DriftOperator::new(kernel, &u.geometry)?.apply(u, m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_kernel_values() {
        let deg = InteractionKernel::degenerate();
        assert_eq!(deg.eval_g(0.0, 1.0, 0.0).unwrap(), 0.5);
        for kind in KernelKind::NAMED {
            let k = InteractionKernel::named(kind, 1.3, 0.3).unwrap();
            for r in [0.0, 0.1, 1.0, 5.0] {
                assert_eq!(k.eval_g(r, 0.0, 0.7).unwrap(), 0.0, "{kind}");
            }
        }
        let log = InteractionKernel::named(KernelKind::ModerateLog, 1.3, 0.3).unwrap();
        assert_eq!(log.eval_g(0.7, 0.7, 0.0).unwrap(), 0.0);
        assert_eq!(log.eval_g(0.0, 0.7, 0.0).unwrap(), -1.0);
        // the r -> 0 extension is the limit of the formula
        assert!((log.eval_g(1e-300, 0.7, 0.0).unwrap() + 1.0).abs() < 1e-2);
        // subnormal densities stay finite and vanish like u ln(1/u)
        let tiny = log.eval_g(0.4, 1.1e-309, 0.0).unwrap();
        assert!(tiny > 0.0 && tiny < 1e-305);
        let alpha = InteractionKernel::named(KernelKind::ModerateAlpha, 1.3, 0.3).unwrap();
        assert_eq!(alpha.eval_g(0.4, 1.3, 0.0).unwrap(), 0.0);
        let cm = InteractionKernel::named(KernelKind::ClusterModerate, 1.3, 0.3).unwrap();
        assert_eq!(cm.eval_g(0.4, 1.3, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn log_kernel_pole_is_reported() {
        let log = InteractionKernel::named(KernelKind::ModerateLog, 1.3, 0.3).unwrap();
        // u log(r/u) = 1 at u = 1, r = e
        let err = log.eval_g(std::f64::consts::E, 1.0, 0.0);
        match err {
            Ok(v) => assert!(v.abs() > 1e12),
            Err(e) => assert!(matches!(e, Error::NonFiniteResult { .. })),
        }
    }

    #[test]
    fn custom_kind_is_rejected_by_name() {
        assert!(InteractionKernel::named(KernelKind::Custom, 1.0, 1.0).is_err());
    }

    #[test]
    fn drift_bound_closed_forms() {
        let deg = InteractionKernel::degenerate();
        assert!((bounded_drift(&deg, 1).unwrap() - 2.0).abs() < 1e-15);
        assert!((bounded_drift(&deg, 2).unwrap() - std::f64::consts::TAU).abs() < 1e-15);
        assert_eq!(bounded_drift(&InteractionKernel::zero(), 2).unwrap(), 0.0);
        let log = InteractionKernel::named(KernelKind::ModerateLog, 1.3, 0.3).unwrap();
        assert!(matches!(bounded_drift(&log, 2), Err(Error::NoDecayBound(_))));
    }

    #[test]
    fn cutoff_radius_meets_tail_tolerance() {
        let r = RadialDecay::Exponential.cutoff(2, TRUNCATION_TOLERANCE);
        // 2π (r + 1) e^{-r} in closed form
        let tail = std::f64::consts::TAU * (r + 1.0) * (-r).exp();
        assert!(tail < TRUNCATION_TOLERANCE);
        assert!((23.0..24.0).contains(&r), "{r}");
        let rg = RadialDecay::Gaussian { range: 0.3 }.cutoff(2, TRUNCATION_TOLERANCE);
        // π R e^{-r^2/R}
        let tail = std::f64::consts::PI * 0.3 * (-rg * rg / 0.3).exp();
        assert!(tail < TRUNCATION_TOLERANCE && tail > TRUNCATION_TOLERANCE / 2.0);
    }

    #[test]
    fn zero_kernel_gives_zero_field() {
        let g = GridGeometry::cube(2, 0.0, 1.0, 12).unwrap();
        let u = ScalarField::from_fn(&g, |x| x[0] + x[1]);
        let m = ScalarField::constant(&g, 1.0);
        let b = drift_field(&u, &m, &InteractionKernel::zero()).unwrap();
        assert_eq!(b.sup_norm(), 0.0);
    }

    #[test]
    fn constant_fields_give_null_drift_at_the_centre() {
        // odd cell count puts a cell centre on the symmetry point
        let g = GridGeometry::cube(2, -1.0, 1.0, 21).unwrap();
        let u = ScalarField::constant(&g, 0.8);
        let m = ScalarField::constant(&g, 1.0);
        for kind in KernelKind::NAMED {
            let k = InteractionKernel::named(kind, 1.3, 0.3).unwrap();
            let b = drift_field(&u, &m, &k).unwrap();
            let centre = g.flat_index(&[10, 10]);
            assert!(b.norm_at(centre) < 1e-10, "{kind}: {:?}", b.at(centre));
        }
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let g1 = GridGeometry::cube(2, 0.0, 1.0, 8).unwrap();
        let g2 = GridGeometry::cube(2, 0.0, 1.0, 9).unwrap();
        let err = drift_field(
            &ScalarField::zeros(&g1),
            &ScalarField::zeros(&g2),
            &InteractionKernel::degenerate(),
        );
        assert!(matches!(err, Err(Error::GeometryMismatch)));
    }

    #[test]
    fn one_dimensional_drift_matches_direct_sum() {
        let g = GridGeometry::cube(1, -3.0, 3.0, 60).unwrap();
        let u = ScalarField::from_fn(&g, |x| (-(x[0] - 0.5).powi(2)).exp());
        let m = ScalarField::constant(&g, 1.0);
        let k = InteractionKernel::degenerate();
        let b = drift_field(&u, &m, &k).unwrap();
        let h = g.spacing(0);
        for i in 0..60 {
            let x = g.center_coord(0, i);
            let mut acc = 0.0;
            for j in 0..60 {
                if j == i {
                    continue;
                }
                let y = g.center_coord(0, j);
                acc += (y - x).signum() * k.eval_g((y - x).abs(), u.values[j], 1.0).unwrap() * h;
            }
            assert!((acc - b.components[0][i]).abs() < 1e-12);
        }
    }
}

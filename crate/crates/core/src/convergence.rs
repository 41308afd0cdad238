//! Particle-to-PDE convergence diagnostics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::grid::{GridGeometry, ScalarField};
use crate::interaction::{DriftOperator, InteractionKernel};
use crate::matrix::f_zeta;
use crate::pde::PdeRecord;
use crate::simulate::simulate;

/// L² norm of `f - g` over the cells whose centres lie in the closed ball.
pub fn l2_ball(f: &ScalarField, g: &ScalarField, radius: f64, center: &[f64]) -> Result<f64> {
    f.ensure_same_grid(&g.geometry)?;
    let geom = &f.geometry;
    check_ball(geom, radius, center)?;
    let r2 = radius * radius;
    let mut acc = 0.0;
    for (i, (a, b)) in f.values.iter().zip(&g.values).enumerate() {
        let x = geom.center(i);
        let d2: f64 = x.iter().zip(center).map(|(p, c)| (p - c) * (p - c)).sum();
        if d2 <= r2 {
            acc += (a - b) * (a - b);
        }
    }
    Ok((acc * geom.cell_volume()).sqrt())
}

fn check_ball(geom: &GridGeometry, radius: f64, center: &[f64]) -> Result<()> {
    let inside = center.len() == geom.dim()
        && radius >= 0.0
        && (0..geom.dim()).all(|a| {
            center[a] - radius >= geom.origin[a] && center[a] + radius <= geom.upper(a)
        });
    if inside {
        Ok(())
    } else {
        Err(Error::BallOutsideDomain {
            radius,
            center: center.to_vec(),
        })
    }
}

/// `Σ_{n=1}^{n_max} 2^{-n} min(‖f - g‖_{L²(B(center, n))}, 1)`.
///
/// The omitted tail is at most `2^{-n_max}`.
pub fn d_l2loc(f: &ScalarField, g: &ScalarField, n_max: u32, center: &[f64]) -> Result<f64> {
    Ok(ball_norms(f, g, n_max, center)?
        .iter()
        .enumerate()
        .map(|(k, v)| 0.5f64.powi(k as i32 + 1) * v.min(1.0))
        .sum())
}

/// `‖f - g‖` on the balls of radius `1..=n_max`.
pub fn ball_norms(f: &ScalarField, g: &ScalarField, n_max: u32, center: &[f64]) -> Result<Vec<f64>> {
    (1..=n_max).map(|n| l2_ball(f, g, n as f64, center)).collect()
}

/// Largest `n` such that the ball of radius `n` around `center` fits the grid.
pub fn max_ball_radius(geom: &GridGeometry, center: &[f64]) -> u32 {
    (0..geom.dim())
        .map(|a| (center[a] - geom.origin[a]).min(geom.upper(a) - center[a]))
        .fold(f64::INFINITY, f64::min)
        .floor()
        .max(0.0) as u32
}

/// Smooth compactly supported bump `exp(-1/(1 - |x-c|^2/ρ^2))` with
/// closed-form gradient and Laplacian.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl TestFunction {
    pub fn new(center: Vec<f64>, radius: f64) -> Self {
        Self { center, radius }
    }

    fn q(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.center).map(|(a, c)| (a - c) * (a - c)).sum::<f64>() / (self.radius * self.radius)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let q = self.q(x);
        if q >= 1.0 {
            0.0
        } else {
            (-1.0 / (1.0 - q)).exp()
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let q = self.q(x);
        if q >= 1.0 {
            return vec![0.0; x.len()];
        }
        let s = 1.0 - q;
        let dphi_dq = -(-1.0 / s).exp() / (s * s);
        let r2 = self.radius * self.radius;
        x.iter()
            .zip(&self.center)
            .map(|(a, c)| dphi_dq * 2.0 * (a - c) / r2)
            .collect()
    }

    pub fn laplacian(&self, x: &[f64]) -> f64 {
        let q = self.q(x);
        if q >= 1.0 {
            return 0.0;
        }
        let s = 1.0 - q;
        let phi = (-1.0 / s).exp();
        let d1 = -phi / (s * s);
        let d2 = phi / s.powi(4) - 2.0 * phi / s.powi(3);
        let r2 = self.radius * self.radius;
        let d = x.len() as f64;
        d2 * 4.0 * q / r2 + d1 * 2.0 * d / r2
    }

    /// `max(sup|φ|, sup|∇φ|, sup|Δφ|)` over the cell centres of `geom`.
    pub fn c2_norm(&self, geom: &GridGeometry) -> f64 {
        geom.centers()
            .map(|x| {
                let g = self.gradient(&x).iter().map(|v| v * v).sum::<f64>().sqrt();
                self.value(&x).abs().max(g).max(self.laplacian(&x).abs())
            })
            .fold(0.0, f64::max)
    }
}

/// One time sample of a `(u, m)` trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample {
    pub time: f64,
    pub u: ScalarField,
    pub m: ScalarField,
}

impl PdeRecord {
    pub fn trajectory(&self) -> Vec<TrajectorySample> {
        self.snapshots
            .iter()
            .map(|s| TrajectorySample {
                time: s.time,
                u: s.u.clone(),
                m: s.matrix.clone(),
            })
            .collect()
    }
}

/// Parameters of the weak identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakParams {
    pub nu: f64,
    pub lambda: f64,
    pub zeta: u32,
}

/// `sup_t |⟨u_t - u_0, φ⟩ - ν ∫⟨u_s, Δφ⟩ ds - ∫⟨u_s, b(u_s, m_s)·∇φ⟩ ds|
///  + sup_t |⟨m_t - F_ζ(m_0, ∫ u ds), φ⟩|`
///
/// with trapezoidal time quadrature over the samples; `m_0` is the first
/// sample's field.
pub fn weak_residual(
    samples: &[TrajectorySample],
    phi: &TestFunction,
    kernel: &InteractionKernel,
    params: WeakParams,
) -> Result<f64> {
    let Some(first) = samples.first() else {
        return Ok(0.0);
    };
    let geom = &first.u.geometry;
    for s in samples {
        s.u.ensure_same_grid(geom)?;
        s.m.ensure_same_grid(geom)?;
    }
    let vol = geom.cell_volume();
    let centers: Vec<Vec<f64>> = geom.centers().collect();
    let phi_v: Vec<f64> = centers.iter().map(|x| phi.value(x)).collect();
    let lap: Vec<f64> = centers.iter().map(|x| phi.laplacian(x)).collect();
    let grad: Vec<Vec<f64>> = centers.iter().map(|x| phi.gradient(x)).collect();
    let drift = DriftOperator::new(kernel, geom)?;

    // integrand ν⟨u, Δφ⟩ + ⟨u, b·∇φ⟩ at every sample
    let integrand: Vec<f64> = samples
        .iter()
        .map(|s| {
            let b = drift.apply(&s.u, &s.m)?;
            let mut acc = 0.0;
            for i in 0..geom.len() {
                let bg: f64 = b.components.iter().zip(&grad[i]).map(|(c, g)| c[i] * g).sum();
                acc += s.u.values[i] * (params.nu * lap[i] + bg);
            }
            Ok(acc * vol)
        })
        .collect::<Result<_>>()?;

    let pair = |f: &ScalarField| -> f64 { f.values.iter().zip(&phi_v).map(|(a, b)| a * b).sum::<f64>() * vol };
    let u0_phi = pair(&first.u);
    let m0 = &first.m;

    let mut sup_u: f64 = 0.0;
    let mut sup_m: f64 = 0.0;
    let mut integral = 0.0;
    let mut exposure = vec![0.0; geom.len()];
    for k in 0..samples.len() {
        if k > 0 {
            let dt = samples[k].time - samples[k - 1].time;
            integral += 0.5 * dt * (integrand[k] + integrand[k - 1]);
            for (e, (a, b)) in exposure
                .iter_mut()
                .zip(samples[k].u.values.iter().zip(&samples[k - 1].u.values))
            {
                *e += 0.5 * dt * (a.max(0.0) + b.max(0.0));
            }
        }
        let lhs = pair(&samples[k].u) - u0_phi;
        sup_u = sup_u.max((lhs - integral).abs());
        let mut m_term = 0.0;
        for i in 0..geom.len() {
            let predicted = f_zeta(m0.values[i], exposure[i], params.lambda, params.zeta);
            m_term += (samples[k].m.values[i] - predicted) * phi_v[i];
        }
        sup_m = sup_m.max((m_term * vol).abs());
    }
    Ok(sup_u + sup_m)
}

/// Averages a fine field onto a coarser grid whose cells are unions of
/// `factor^d` fine cells.
pub fn restrict(field: &ScalarField, coarse: &GridGeometry) -> Result<ScalarField> {
    let fine = &field.geometry;
    if fine == coarse {
        return Ok(field.clone());
    }
    if fine.dim() != coarse.dim() || fine.origin != coarse.origin || fine.extent != coarse.extent {
        return Err(Error::GeometryMismatch);
    }
    let factors: Vec<usize> = fine
        .cells
        .iter()
        .zip(&coarse.cells)
        .map(|(&f, &c)| if f % c == 0 { f / c } else { 0 })
        .collect();
    if factors.contains(&0) {
        return Err(Error::GeometryMismatch);
    }
    let mut values = vec![0.0; coarse.len()];
    for (i, v) in field.values.iter().enumerate() {
        let idx: Vec<usize> = fine.multi_index(i).iter().zip(&factors).map(|(j, f)| j / f).collect();
        values[coarse.flat_index(&idx)] += v;
    }
    let per_cell: usize = factors.iter().product();
    values.iter_mut().for_each(|v| *v /= per_cell as f64);
    ScalarField::from_values(coarse, values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub n: usize,
    pub seed: u64,
    pub time: f64,
    pub d_l2loc_u: f64,
    pub d_l2loc_m: f64,
    /// `‖u^N - u‖` on the balls of radius `1..=n_max`.
    pub l2_ball_u: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub n: usize,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub n: usize,
    pub runs: usize,
    pub mean_u: f64,
    pub stderr_u: f64,
    pub mean_m: f64,
    pub stderr_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub n_max: u32,
    pub center: Vec<f64>,
    pub final_time: f64,
    pub entries: Vec<ReportEntry>,
    pub failures: Vec<RunFailure>,
    /// Final-time statistics per particle count, in the order requested.
    pub summary: Vec<SummaryRow>,
}

impl ConvergenceReport {
    pub fn row(&self, n: usize) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| r.n == n)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,seed,time,d_l2loc_u,d_l2loc_m");
        for k in 1..=self.n_max {
            out.push_str(&format!(",l2_ball_{k}"));
        }
        out.push('\n');
        for e in &self.entries {
            out.push_str(&format!("{},{},{},{},{}", e.n, e.seed, e.time, e.d_l2loc_u, e.d_l2loc_m));
            for v in &e.l2_ball_u {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyOptions {
    pub n_max: u32,
    /// Ball centre; defaults to the centroid of the initial law.
    pub center: Option<Vec<f64>>,
    /// Worker threads for independent runs; `None` uses the ambient pool.
    pub jobs: Option<usize>,
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self {
            n_max: 2,
            center: None,
            jobs: None,
        }
    }
}

/// Metrics comparing one particle snapshot with the reference.
pub fn compare(
    u_particles: &ScalarField,
    m_particles: &ScalarField,
    u_ref: &ScalarField,
    m_ref: &ScalarField,
    n_max: u32,
    center: &[f64],
) -> Result<(f64, f64, Vec<f64>)> {
    let u_ref = restrict(u_ref, &u_particles.geometry)?;
    let m_ref = restrict(m_ref, &m_particles.geometry)?;
    Ok((
        d_l2loc(u_particles, &u_ref, n_max, center)?,
        d_l2loc(m_particles, &m_ref, n_max, center)?,
        ball_norms(u_particles, &u_ref, n_max, center)?,
    ))
}

/// Runs the particle system for every `(N, seed)` and compares each snapshot
/// with the reference PDE solution at the same time. The drift is refreshed
/// every step regardless of `base.drift_refresh_every`.
pub fn convergence_study(
    base: &SimConfig,
    ns: &[usize],
    seeds: &[u64],
    reference: &PdeRecord,
    options: &StudyOptions,
) -> Result<ConvergenceReport> {
    let center = options
        .center
        .clone()
        .unwrap_or_else(|| base.initial.centroid());
    check_ball(&base.geometry, options.n_max as f64, &center)?;
    let times: Vec<f64> = reference.snapshots.iter().map(|s| s.time).collect();
    let final_time = times.last().copied().unwrap_or(0.0);

    let jobs: Vec<(usize, u64)> = ns.iter().flat_map(|&n| seeds.iter().map(move |&s| (n, s))).collect();
    let run_one = |&(n, seed): &(usize, u64)| -> std::result::Result<Vec<ReportEntry>, RunFailure> {
        let fail = |e: Error| RunFailure {
            n,
            seed,
            error: e.to_string(),
        };
        let mut config = base.clone();
        config.n_particles = n;
        config.seed = seed;
        config.snapshot_times = times.clone();
        config.drift_refresh_every = 1;
        let record = simulate(&config).map_err(fail)?;
        record
            .snapshots
            .iter()
            .map(|snap| {
                let reference = reference.at_time(snap.time);
                let (du, dm, balls) = compare(
                    &snap.density,
                    &snap.matrix,
                    &reference.u,
                    &reference.matrix,
                    options.n_max,
                    &center,
                )
                .map_err(fail)?;
                Ok(ReportEntry {
                    n,
                    seed,
                    time: snap.time,
                    d_l2loc_u: du,
                    d_l2loc_m: dm,
                    l2_ball_u: balls,
                })
            })
            .collect()
    };

    let results: Vec<_> = match options.jobs {
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(|| jobs.par_iter().map(run_one).collect()),
        None => jobs.par_iter().map(run_one).collect(),
    };

    let mut entries = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(e) => entries.extend(e),
            Err(f) => failures.push(f),
        }
    }
    let summary = ns
        .iter()
        .map(|&n| {
            let finals: Vec<&ReportEntry> = entries
                .iter()
                .filter(|e| e.n == n && (e.time - final_time).abs() < 1e-9)
                .collect();
            let (mean_u, stderr_u) = mean_stderr(finals.iter().map(|e| e.d_l2loc_u));
            let (mean_m, stderr_m) = mean_stderr(finals.iter().map(|e| e.d_l2loc_m));
            SummaryRow {
                n,
                runs: finals.len(),
                mean_u,
                stderr_u,
                mean_m,
                stderr_m,
            }
        })
        .collect();
    Ok(ConvergenceReport {
        n_max: options.n_max,
        center,
        final_time,
        entries,
        failures,
        summary,
    })
}

/// Sample mean and standard error of the mean.
pub fn mean_stderr(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.collect();
    let n = v.len() as f64;
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

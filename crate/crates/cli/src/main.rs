use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use aggrsim::convergence::{
    convergence_study, max_ball_radius, weak_residual, StudyOptions, TestFunction, TrajectorySample, WeakParams,
};
use aggrsim::output::{RunDir, RunKind};
use aggrsim::presets::with_long_times;
use aggrsim::{
    cluster_count, mean_pairwise_distance, simulate, solve_pde, Error, Result, ScenarioPreset, SimConfig,
};

mod render;

#[derive(Parser)]
#[command(name = "aggrsim", version, about = "Aggregation particle systems and their mean-field limit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario
    Run {
        #[command(subcommand)]
        what: RunCommand,
    },
}

#[derive(Subcommand)]
enum RunCommand {
    /// Particle system with snapshots
    Particles(Common),
    /// Limiting PDE started from the initial law
    Pde(Common),
    /// Particle-to-PDE convergence study over N and seeds
    Study {
        #[command(flatten)]
        common: Common,
        /// Particle counts
        #[arg(long, value_delimiter = ',', default_value = "50,200,800")]
        ns: Vec<usize>,
        /// Number of seeds per particle count, starting at the base seed
        #[arg(long, default_value_t = 8)]
        n_seeds: u64,
        /// Largest ball radius in the local L2 metric
        #[arg(long)]
        n_max: Option<u32>,
    },
    /// Weak-form residual of the PDE solution against bump test functions
    Residual {
        #[command(flatten)]
        common: Common,
        /// Steps between trajectory samples
        #[arg(long, default_value_t = 1)]
        sample_every: usize,
    },
}

#[derive(Args)]
struct Common {
    /// Preset name or configuration file
    target: Option<String>,
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// TOML or JSON configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration value, e.g. `kernel.kind=cluster`
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output root; the run directory is created inside it
    #[arg(long, env = "AGGRSIM_OUT", default_value = "runs")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads
    #[arg(long)]
    jobs: Option<usize>,
    /// Long horizon: t_end = 150 with snapshots at {0, 50, 100, 150}
    #[arg(long)]
    paper_times: bool,
    /// Also render PNG heatmaps and scatter plots
    #[arg(long)]
    png: bool,
    /// Link radius for cluster counts; defaults to twice the mollifier support radius
    #[arg(long)]
    link_radius: Option<f64>,
}

impl Common {
    fn resolve(&self) -> Result<(String, SimConfig)> {
        let (name, mut config) = match (&self.target, &self.preset, &self.config) {
            (None, Some(p), None) | (Some(p), None, None) if !Path::new(p).is_file() => {
                let preset: ScenarioPreset = p.parse()?;
                (preset.name().to_string(), preset.config())
            }
            (Some(p), None, None) => (stem(Path::new(p)), SimConfig::load(Path::new(p))?),
            (None, None, Some(path)) => (stem(path), SimConfig::load(path)?),
            (None, None, None) => return Err(Error::Config("a preset name or --config path is required".into())),
            _ => return Err(Error::Config("give exactly one of <TARGET>, --preset, --config".into())),
        };
        if self.paper_times {
            config = with_long_times(config);
        }
        for o in &self.overrides {
            config.apply_override(o)?;
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        config.validate()?;
        Ok((name, config))
    }

    fn link_radius(&self, config: &SimConfig) -> Result<f64> {
        match self.link_radius {
            Some(r) if r > 0.0 => Ok(r),
            Some(r) => Err(Error::Config(format!("link radius {r} must be positive"))),
            None => Ok(aggrsim::clusters::default_link_radius(&config.mollifier()?)),
        }
    }
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "config".into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Command::Run { what } = cli.command;
    match execute(what) {
        Ok(dir) => {
            println!("{}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            let report = json!({
                "error": e.kind(),
                "message": e.to_string(),
                "step": e.step(),
            });
            eprintln!("{report}");
            if matches!(e.root(), Error::Config(_)) {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

fn execute(what: RunCommand) -> Result<PathBuf> {
    let common = match &what {
        RunCommand::Particles(c) | RunCommand::Pde(c) => c,
        RunCommand::Study { common, .. } | RunCommand::Residual { common, .. } => common,
    };
    let (name, config) = common.resolve()?;
    if let Some(jobs) = common.jobs {
        // the global pool can only be configured once per process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global();
    }
    match &what {
        RunCommand::Particles(c) => run_particles(c, &name, &config),
        RunCommand::Pde(c) => run_pde(c, &name, &config),
        RunCommand::Study {
            common,
            ns,
            n_seeds,
            n_max,
        } => run_study(common, &name, &config, ns, *n_seeds, *n_max),
        RunCommand::Residual { common, sample_every } => run_residual(common, &name, &config, *sample_every),
    }
}

fn run_particles(c: &Common, name: &str, config: &SimConfig) -> Result<PathBuf> {
    let link = c.link_radius(config)?;
    let record = simulate(config)?;
    let mut dir = RunDir::create(&c.out, RunKind::Particles, name, config)?;
    let mut rows = Vec::new();
    for snap in &record.snapshots {
        dir.particle_snapshot(snap)?;
        if c.png {
            let t = aggrsim::output::time_label(snap.time);
            dir.write_bytes(&format!("density_t{t}.png"), &render::heatmap(&snap.density)?)?;
            dir.write_bytes(
                &format!("particles_t{t}.png"),
                &render::scatter(&snap.particles, &config.geometry)?,
            )?;
        }
        rows.push(json!({
            "time": snap.time,
            "step": snap.step,
            "density_mass": snap.density.mass(),
            "mean_pairwise_distance": mean_pairwise_distance(&snap.particles),
            "cluster_count": cluster_count(&snap.particles, link),
        }));
    }
    dir.set_results(json!({ "link_radius": link, "snapshots": rows }));
    dir.finish()
}

fn run_pde(c: &Common, name: &str, config: &SimConfig) -> Result<PathBuf> {
    let u0 = config.initial.density_field(&config.geometry)?;
    let record = solve_pde(config, u0)?;
    let mut dir = RunDir::create(&c.out, RunKind::Pde, name, config)?;
    let mut rows = Vec::new();
    for snap in &record.snapshots {
        dir.pde_snapshot(snap)?;
        if c.png {
            let t = aggrsim::output::time_label(snap.time);
            dir.write_bytes(&format!("u_t{t}.png"), &render::heatmap(&snap.u)?)?;
        }
        rows.push(json!({ "time": snap.time, "step": snap.step, "mass": snap.u.mass() }));
    }
    dir.set_results(json!({ "snapshots": rows }));
    dir.finish()
}

fn run_study(
    c: &Common,
    name: &str,
    config: &SimConfig,
    ns: &[usize],
    n_seeds: u64,
    n_max: Option<u32>,
) -> Result<PathBuf> {
    if ns.is_empty() || n_seeds == 0 {
        return Err(Error::Config("study needs at least one N and one seed".into()));
    }
    let center = config.initial.centroid();
    let n_max = n_max.unwrap_or_else(|| max_ball_radius(&config.geometry, &center).clamp(1, 2));
    let u0 = config.initial.density_field(&config.geometry)?;
    let mut reference_config = config.clone();
    reference_config.snapshot_times = config.effective_snapshot_times();
    let reference = solve_pde(&reference_config, u0)?;
    let seeds: Vec<u64> = (0..n_seeds).map(|k| config.seed + k).collect();
    let options = StudyOptions {
        n_max,
        center: Some(center),
        jobs: c.jobs,
    };
    let report = convergence_study(config, ns, &seeds, &reference, &options)?;
    let mut dir = RunDir::create(&c.out, RunKind::Study, name, config)?;
    dir.write_text("report.csv", &report.to_csv())?;
    dir.write_text("report.json", &serde_json::to_string_pretty(&report)?)?;
    dir.set_results(json!({
        "report_csv": "report.csv",
        "report_json": "report.json",
        "summary": report.summary,
        "failures": report.failures,
    }));
    dir.finish()
}

/// Bumps centred on the initial centroid and shifted by half their radius.
fn residual_test_functions(config: &SimConfig) -> Vec<TestFunction> {
    let center = config.initial.centroid();
    let radius = 1.5;
    [(0, 0.0), (0, 0.5), (1, -0.5)]
        .into_iter()
        .map(|(axis, shift)| {
            let mut c = center.clone();
            c[axis.min(center.len() - 1)] += shift * radius;
            TestFunction::new(c, radius)
        })
        .collect()
}

fn run_residual(c: &Common, name: &str, config: &SimConfig, sample_every: usize) -> Result<PathBuf> {
    let every = sample_every.max(1);
    let u0 = config.initial.density_field(&config.geometry)?;
    let n_steps = config.n_steps();
    let mut samples = Vec::new();
    let mut step = 0usize;
    aggrsim::pde::solve_pde_with(config, u0, |state| {
        if step.is_multiple_of(every) || step == n_steps {
            samples.push(TrajectorySample {
                time: state.time,
                u: state.u.clone(),
                m: state.matrix.current(),
            });
        }
        step += 1;
    })?;
    let kernel = config.kernel()?;
    let params = WeakParams {
        nu: config.nu(),
        lambda: config.lambda,
        zeta: config.zeta,
    };
    let mut rows = Vec::new();
    for phi in residual_test_functions(config) {
        let r = weak_residual(&samples, &phi, &kernel, params)?;
        rows.push(json!({
            "center": phi.center,
            "radius": phi.radius,
            "c2_norm": phi.c2_norm(&config.geometry),
            "residual": r,
        }));
    }
    let mut dir = RunDir::create(&c.out, RunKind::Residual, name, config)?;
    let body = json!({ "dt": config.dt, "samples": samples.len(), "test_functions": rows });
    dir.write_text("residual.json", &serde_json::to_string_pretty(&body)?)?;
    dir.set_results(body);
    dir.finish()
}

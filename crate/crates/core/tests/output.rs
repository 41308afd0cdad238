use aggrsim::output::{read_manifest, read_scalar_field, read_vector_field, RunDir, RunKind};
use aggrsim::{simulate, solve_pde, GridGeometry, InitialLaw, KernelKind, ScenarioPreset, SimConfig};

fn small() -> SimConfig {
    let mut c = ScenarioPreset::Degenerate.config();
    c.kernel.kind = KernelKind::Cluster;
    c.n_particles = 50;
    c.geometry = GridGeometry::cube(2, -1.0, 3.0, 64).unwrap();
    c.initial = InitialLaw::Bump {
        center: vec![1.0, 1.0],
        radius: 0.6,
    };
    c.beta = 0.5;
    c.dt = 0.01;
    c.t_end = 0.1;
    c.snapshot_times = vec![0.0, 0.05, 0.1];
    c
}

#[test]
fn particle_run_directory_round_trips() {
    let root = tempfile::tempdir().unwrap();
    let c = small();
    let rec = simulate(&c).unwrap();
    let mut dir = RunDir::create(root.path(), RunKind::Particles, "small", &c).unwrap();
    for snap in &rec.snapshots {
        dir.particle_snapshot(snap).unwrap();
    }
    dir.set_results(serde_json::json!({"ok": true}));
    let path = dir.finish().unwrap();
    assert_eq!(path, root.path().join("particles_small_seed0"));

    let manifest = read_manifest(&path).unwrap();
    assert_eq!(manifest.config, c);
    assert_eq!(manifest.results["ok"], true);
    // fractional time labels keep their own files
    for f in &manifest.files {
        assert!(path.join(f).is_file(), "missing {f}");
    }
    assert_eq!(manifest.files.len(), 3 * 10);

    for (snap, t) in rec.snapshots.iter().zip(["0", "0.05", "0.1"]) {
        let density = read_scalar_field(&path.join(format!("density_t{t}"))).unwrap();
        assert_eq!(density, snap.density);
        let drift = read_vector_field(&path.join(format!("drift_t{t}"))).unwrap();
        assert_eq!(drift, snap.drift);
        let csv = std::fs::read_to_string(path.join(format!("particles_t{t}.csv"))).unwrap();
        assert_eq!(csv.lines().count(), 1 + c.n_particles);
    }
}

#[test]
fn pde_run_directory_round_trips() {
    let root = tempfile::tempdir().unwrap();
    let c = small();
    let rec = solve_pde(&c, c.initial.density_field(&c.geometry).unwrap()).unwrap();
    let mut dir = RunDir::create(root.path(), RunKind::Pde, "small", &c).unwrap();
    for snap in &rec.snapshots {
        dir.pde_snapshot(snap).unwrap();
    }
    let path = dir.finish().unwrap();
    for (snap, t) in rec.snapshots.iter().zip(["0", "0.05", "0.1"]) {
        assert_eq!(read_scalar_field(&path.join(format!("u_t{t}"))).unwrap(), snap.u);
        assert_eq!(read_scalar_field(&path.join(format!("matrix_t{t}"))).unwrap(), snap.matrix);
    }
}

//! On-disk formats and run directories.
//!
//! Fields are stored as `<stem>.bin` (little-endian f64, row-major, one block
//! per component) with a `<stem>.json` sidecar, plus `<stem>.csv` with one
//! row per cell: coordinates of the cell centre followed by the values.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::grid::{GridGeometry, ScalarField, VectorField};
use crate::particles::ParticleState;
use crate::pde::PdeSnapshot;
use crate::simulate::ParticleSnapshot;

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldHeader {
    pub geometry: GridGeometry,
    pub components: usize,
    pub dtype: String,
    pub byte_order: String,
}

fn header(geometry: &GridGeometry, components: usize) -> FieldHeader {
    FieldHeader {
        geometry: geometry.clone(),
        components,
        dtype: "f64".into(),
        byte_order: "little".into(),
    }
}

const AXES: [&str; 3] = ["x", "y", "z"];

fn write_components(stem: &Path, geometry: &GridGeometry, components: &[&[f64]]) -> Result<()> {
    let mut bytes = Vec::with_capacity(8 * geometry.len() * components.len());
    for c in components {
        for v in c.iter() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(with_ext(stem, "bin"), bytes)?;
    fs::write(
        with_ext(stem, "json"),
        serde_json::to_string_pretty(&header(geometry, components.len()))?,
    )?;
    fs::write(with_ext(stem, "csv"), field_csv(geometry, components))?;
    Ok(())
}

/// CSV with columns `x[,y[,z]],value` (scalar) or `...,v1..vd` (vector).
pub fn field_csv(geometry: &GridGeometry, components: &[&[f64]]) -> String {
    let d = geometry.dim();
    let mut cols: Vec<String> = AXES[..d].iter().map(|s| s.to_string()).collect();
    if components.len() == 1 {
        cols.push("value".into());
    } else {
        cols.extend((1..=components.len()).map(|k| format!("v{k}")));
    }
    let mut out = cols.join(",");
    out.push('\n');
    for (i, x) in geometry.centers().enumerate() {
        let row: Vec<String> = x
            .iter()
            .map(|v| v.to_string())
            .chain(components.iter().map(|c| c[i].to_string()))
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn write_scalar_field(stem: &Path, field: &ScalarField) -> Result<()> {
    write_components(stem, &field.geometry, &[&field.values])
}

pub fn write_vector_field(stem: &Path, field: &VectorField) -> Result<()> {
    let comps: Vec<&[f64]> = field.components.iter().map(|c| c.as_slice()).collect();
    write_components(stem, &field.geometry, &comps)
}

fn read_components(stem: &Path) -> Result<(FieldHeader, Vec<Vec<f64>>)> {
    let header: FieldHeader = serde_json::from_str(&fs::read_to_string(with_ext(stem, "json"))?)?;
    header
        .geometry
        .validate()
        .map_err(|e| Error::Config(format!("{}: {e}", stem.display())))?;
    let bytes = fs::read(with_ext(stem, "bin"))?;
    let n = header.geometry.len();
    if bytes.len() != 8 * n * header.components {
        return Err(Error::Config(format!(
            "{}: expected {} bytes, found {}",
            stem.display(),
            8 * n * header.components,
            bytes.len()
        )));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("chunk of 8")))
        .collect();
    let comps = values.chunks(n).map(|c| c.to_vec()).collect();
    Ok((header, comps))
}

pub fn read_scalar_field(stem: &Path) -> Result<ScalarField> {
    let (h, mut comps) = read_components(stem)?;
    if comps.len() != 1 {
        return Err(Error::Config(format!("{}: not a scalar field", stem.display())));
    }
    ScalarField::from_values(&h.geometry, comps.remove(0))
}

pub fn read_vector_field(stem: &Path) -> Result<VectorField> {
    let (h, comps) = read_components(stem)?;
    if comps.len() != h.geometry.dim() {
        return Err(Error::Config(format!("{}: not a vector field", stem.display())));
    }
    Ok(VectorField {
        geometry: h.geometry,
        components: comps,
    })
}

/// `id,x1..xd`.
pub fn particles_csv(state: &ParticleState) -> String {
    let mut out = String::from("id");
    for a in 1..=state.dim {
        out.push_str(&format!(",x{a}"));
    }
    out.push('\n');
    for (i, p) in state.iter().enumerate() {
        out.push_str(&i.to_string());
        for v in p {
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    out
}

/// Compact time label for file names: six decimals, trailing zeros removed.
/// Appends an extension; stems such as `u_t0.05` already contain a dot.
fn with_ext(stem: &Path, ext: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

pub fn time_label(t: f64) -> String {
    let s = format!("{t:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunKind {
    Particles,
    Pde,
    Study,
    Residual,
}

impl RunKind {
    pub fn name(self) -> &'static str {
        match self {
            RunKind::Particles => "particles",
            RunKind::Pde => "pde",
            RunKind::Study => "study",
            RunKind::Residual => "residual",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub kind: RunKind,
    pub name: String,
    pub seed: u64,
    pub code_version: String,
    pub config: SimConfig,
    /// Files in the run directory, relative to it, in write order.
    pub files: Vec<String>,
    /// Kind-specific data (cluster counts, report summaries, ...).
    #[serde(default)]
    pub results: serde_json::Value,
}

/// A run directory being filled. The manifest is written by [`RunDir::finish`].
pub struct RunDir {
    pub path: PathBuf,
    manifest: Manifest,
}

impl RunDir {
    /// Creates (or reuses) `root/<kind>_<name>_seed<seed>`.
    pub fn create(root: &Path, kind: RunKind, name: &str, config: &SimConfig) -> Result<Self> {
        let path = root.join(format!("{}_{}_seed{}", kind.name(), name, config.seed));
        fs::create_dir_all(&path)?;
        Ok(Self {
            path,
            manifest: Manifest {
                kind,
                name: name.to_string(),
                seed: config.seed,
                code_version: CODE_VERSION.to_string(),
                config: config.clone(),
                files: Vec::new(),
                results: serde_json::Value::Null,
            },
        })
    }

    fn record(&mut self, file: String) {
        if !self.manifest.files.contains(&file) {
            self.manifest.files.push(file);
        }
    }

    pub fn write_text(&mut self, file: &str, contents: &str) -> Result<PathBuf> {
        let p = self.path.join(file);
        let mut f = fs::File::create(&p)?;
        f.write_all(contents.as_bytes())?;
        self.record(file.to_string());
        Ok(p)
    }

    pub fn write_bytes(&mut self, file: &str, contents: &[u8]) -> Result<PathBuf> {
        let p = self.path.join(file);
        fs::write(&p, contents)?;
        self.record(file.to_string());
        Ok(p)
    }

    pub fn scalar(&mut self, stem: &str, field: &ScalarField) -> Result<()> {
        write_scalar_field(&self.path.join(stem), field)?;
        self.record_field(stem);
        Ok(())
    }

    pub fn vector(&mut self, stem: &str, field: &VectorField) -> Result<()> {
        write_vector_field(&self.path.join(stem), field)?;
        self.record_field(stem);
        Ok(())
    }

    fn record_field(&mut self, stem: &str) {
        for ext in ["bin", "json", "csv"] {
            self.record(format!("{stem}.{ext}"));
        }
    }

    pub fn particle_snapshot(&mut self, snap: &ParticleSnapshot) -> Result<()> {
        let t = time_label(snap.time);
        self.write_text(&format!("particles_t{t}.csv"), &particles_csv(&snap.particles))?;
        self.scalar(&format!("density_t{t}"), &snap.density)?;
        self.scalar(&format!("matrix_t{t}"), &snap.matrix)?;
        self.vector(&format!("drift_t{t}"), &snap.drift)?;
        Ok(())
    }

    pub fn pde_snapshot(&mut self, snap: &PdeSnapshot) -> Result<()> {
        let t = time_label(snap.time);
        self.scalar(&format!("u_t{t}"), &snap.u)?;
        self.scalar(&format!("matrix_t{t}"), &snap.matrix)?;
        Ok(())
    }

    pub fn set_results(&mut self, results: serde_json::Value) {
        self.manifest.results = results;
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    /// Writes `manifest.json` and returns the directory.
    pub fn finish(self) -> Result<PathBuf> {
        fs::write(
            self.path.join("manifest.json"),
            serde_json::to_string_pretty(&self.manifest)?,
        )?;
        Ok(self.path)
    }
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    Ok(serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?)
}

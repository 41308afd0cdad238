//! PNG rendering of 2D fields and particle positions.

use std::io::Cursor;

use image::{ImageBuffer, ImageFormat, Rgb, RgbImage};

use aggrsim::{Error, GridGeometry, ParticleState, Result, ScalarField};

const SIZE: u32 = 512;

fn encode(img: RgbImage) -> Result<Vec<u8>> {
    let mut bytes = Cursor::new(Vec::new());
    img.write_to(&mut bytes, ImageFormat::Png)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    Ok(bytes.into_inner())
}

fn require_2d(geometry: &GridGeometry) -> Result<()> {
    if geometry.dim() == 2 {
        Ok(())
    } else {
        Err(Error::Config("PNG rendering needs a 2D grid".into()))
    }
}

/// Dark blue through yellow.
fn ramp(t: f64) -> Rgb<u8> {
    let t = t.clamp(0.0, 1.0);
    let lerp = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    Rgb([lerp(20.0, 250.0), lerp(20.0, 230.0), lerp(90.0, 30.0)])
}

/// One pixel per cell, first axis horizontal, second axis pointing up.
pub fn heatmap(field: &ScalarField) -> Result<Vec<u8>> {
    let g = &field.geometry;
    require_2d(g)?;
    let (nx, ny) = (g.cells[0], g.cells[1]);
    let max = field.max().max(f64::MIN_POSITIVE);
    let img = ImageBuffer::from_fn(nx as u32, ny as u32, |px, py| {
        let j = ny - 1 - py as usize;
        ramp(field.values[g.flat_index(&[px as usize, j])] / max)
    });
    encode(img)
}

pub fn scatter(particles: &ParticleState, geometry: &GridGeometry) -> Result<Vec<u8>> {
    require_2d(geometry)?;
    let mut img: RgbImage = ImageBuffer::from_pixel(SIZE, SIZE, Rgb([255, 255, 255]));
    let scale = |v: f64, a: usize| (v - geometry.origin[a]) / geometry.extent[a] * SIZE as f64;
    for p in particles.iter() {
        let cx = scale(p[0], 0) as i64;
        let cy = SIZE as i64 - 1 - scale(p[1], 1) as i64;
        for dx in -1..=1 {
            for dy in -1..=1 {
                let (x, y) = (cx + dx, cy + dy);
                if (0..SIZE as i64).contains(&x) && (0..SIZE as i64).contains(&y) {
                    img.put_pixel(x as u32, y as u32, Rgb([0, 0, 0]));
                }
            }
        }
    }
    encode(img)
}

use aggrsim::smoothing::{l2_norm, MollifierProfile};
use aggrsim::{build_scaled_kernel, deposit_density, GridGeometry, MollifierSpec};
use proptest::prelude::*;

#[test]
fn squared_norm_scales_like_n_to_the_beta() {
    let geom = GridGeometry::cube(2, -1.0, 1.0, 100).unwrap();
    let beta = 0.5;
    let ns = [10usize, 30, 100, 300, 1000];
    let points: Vec<(f64, f64)> = ns
        .iter()
        .map(|&n| {
            let spec = MollifierSpec::new(MollifierProfile::Bump, 2, beta, n).unwrap();
            let stencil = build_scaled_kernel(&spec, &geom).unwrap();
            // one position, so the deposited field is W_N itself
            let field = deposit_density(&[0.01, 0.01], &stencil, &geom).unwrap();
            ((n as f64).ln(), (l2_norm(&field)).powi(2).ln())
        })
        .collect();
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let slope = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / points.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!((slope - beta).abs() < 0.05, "slope {slope}");
}

#[test]
fn single_particle_stencil_samples_w_at_n_equal_one() {
    let geom = GridGeometry::cube(2, -2.0, 2.0, 64).unwrap();
    let spec = MollifierSpec::new(MollifierProfile::Bump, 2, 0.5, 1).unwrap();
    let stencil = build_scaled_kernel(&spec, &geom).unwrap();
    let centre = geom.center(geom.flat_index(&[32, 32]));
    let field = deposit_density(&centre, &stencil, &geom).unwrap();
    // discrete renormalisation rescales W by one common factor
    let raw: Vec<f64> = geom
        .centers()
        .map(|x| spec.base_value(&[x[0] - centre[0], x[1] - centre[1]]))
        .collect();
    let ratio = field.values[geom.flat_index(&[32, 32])] / raw[geom.flat_index(&[32, 32])];
    assert!((ratio - 1.0).abs() < 1e-3, "{ratio}");
    for (f, r) in field.values.iter().zip(&raw) {
        assert!((f - ratio * r).abs() < 1e-12);
    }
}

/// Grid with spacing 1/16 on [0, 4]²; positions are multiples of 2^-20, so
/// shifting by whole cells is exact in floating point.
fn dyadic_grid() -> GridGeometry {
    GridGeometry::cube(2, 0.0, 4.0, 64).unwrap()
}

fn dyadic(v: u32) -> f64 {
    v as f64 / (1u64 << 20) as f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn deposited_mass_is_one(
        coords in proptest::collection::vec(1.2f64..2.8, 2..80),
        beta in 0.3f64..0.9,
    ) {
        let geom = dyadic_grid();
        let n = coords.len() / 2;
        let spec = MollifierSpec::new(MollifierProfile::Bump, 2, beta, n.max(1)).unwrap();
        let Ok(stencil) = build_scaled_kernel(&spec, &geom) else { return Ok(()); };
        let field = deposit_density(&coords[..2 * n], &stencil, &geom).unwrap();
        prop_assert!((field.mass() - 1.0).abs() < 1e-12);
        prop_assert!(field.values.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn integer_cell_shifts_are_exact(
        raw in proptest::collection::vec((1_200_000u32..2_000_000, 1_200_000u32..2_000_000), 1..40),
        sx in 0usize..10,
        sy in 0usize..10,
    ) {
        let geom = dyadic_grid();
        let h = geom.spacing(0);
        let spec = MollifierSpec::new(MollifierProfile::Bump, 2, 0.5, raw.len()).unwrap();
        let stencil = build_scaled_kernel(&spec, &geom).unwrap();
        let base: Vec<f64> = raw.iter().flat_map(|&(x, y)| [dyadic(x), dyadic(y)]).collect();
        let moved: Vec<f64> = base
            .chunks(2)
            .flat_map(|p| [p[0] + sx as f64 * h, p[1] + sy as f64 * h])
            .collect();
        let a = deposit_density(&base, &stencil, &geom).unwrap();
        let b = deposit_density(&moved, &stencil, &geom).unwrap();
        for i in 0..64 - sx {
            for j in 0..64 - sy {
                prop_assert_eq!(
                    a.values[geom.flat_index(&[i, j])],
                    b.values[geom.flat_index(&[i + sx, j + sy])]
                );
            }
        }
    }
}

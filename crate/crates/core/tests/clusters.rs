use aggrsim::{cluster_count, sample_initial, InitialLaw, ParticleState};
use proptest::prelude::*;

/// Connected components by breadth-first search over all pairs.
fn oracle(points: &[[f64; 2]], link: f64) -> usize {
    let n = points.len();
    let mut seen = vec![false; n];
    let mut components = 0;
    for start in 0..n {
        if seen[start] {
            continue;
        }
        components += 1;
        seen[start] = true;
        let mut queue = vec![start];
        while let Some(i) = queue.pop() {
            for j in 0..n {
                let d = ((points[i][0] - points[j][0]).powi(2) + (points[i][1] - points[j][1]).powi(2)).sqrt();
                if !seen[j] && d <= link {
                    seen[j] = true;
                    queue.push(j);
                }
            }
        }
    }
    components
}

fn as_points(s: &ParticleState) -> Vec<[f64; 2]> {
    s.iter().map(|p| [p[0], p[1]]).collect()
}

#[test]
fn uniform_cloud_matches_the_pairwise_oracle() {
    for seed in 0..20 {
        let s = sample_initial(&InitialLaw::uniform_square(0.0, 2.0, 2), 100, seed).unwrap();
        for link in [0.05, 0.1, 0.2, 0.4] {
            assert_eq!(cluster_count(&s, link), oracle(&as_points(&s), link), "seed {seed} link {link}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn invariant_under_reordering_and_translation(
        pts in proptest::collection::vec((0.0f64..2.0, 0.0f64..2.0), 1..120),
        link in 0.02f64..0.5,
        shift in (-50.0f64..50.0, -50.0f64..50.0),
        rotate in 0usize..120,
    ) {
        let flat: Vec<f64> = pts.iter().flat_map(|&(x, y)| [x, y]).collect();
        let base = cluster_count(&ParticleState::new(2, flat, 0), link);
        let points: Vec<[f64; 2]> = pts.iter().map(|&(x, y)| [x, y]).collect();
        prop_assert_eq!(base, oracle(&points, link));

        let k = rotate % pts.len();
        let mut reordered: Vec<(f64, f64)> = pts[k..].to_vec();
        reordered.extend_from_slice(&pts[..k]);
        reordered.reverse();
        let flat: Vec<f64> = reordered.iter().flat_map(|&(x, y)| [x, y]).collect();
        prop_assert_eq!(base, cluster_count(&ParticleState::new(2, flat, 0), link));

        // translation by a power of two keeps pair distances exact enough to
        // compare with the oracle on the moved cloud
        let moved: Vec<[f64; 2]> = points.iter().map(|p| [p[0] + shift.0, p[1] + shift.1]).collect();
        let flat: Vec<f64> = moved.iter().flatten().copied().collect();
        prop_assert_eq!(cluster_count(&ParticleState::new(2, flat, 0), link), oracle(&moved, link));
    }
}

//! Single-linkage threshold clustering of particle positions.

use std::collections::HashMap;

use petgraph::unionfind::UnionFind;

use crate::particles::ParticleState;
use crate::smoothing::MollifierSpec;

/// Number of connected components of the graph joining particles at
/// distance `<= link_radius`. Returns 0 for an empty ensemble.
pub fn cluster_count(particles: &ParticleState, link_radius: f64) -> usize {
    assert!(link_radius > 0.0, "link_radius must be positive");
    let n = particles.len();
    if n == 0 {
        return 0;
    }
    let d = particles.dim;
    let key = |p: &[f64]| -> Vec<i64> { p.iter().map(|v| (v / link_radius).floor() as i64).collect() };
    let mut buckets: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    for (i, p) in particles.iter().enumerate() {
        buckets.entry(key(p)).or_default().push(i);
    }
    let r2 = link_radius * link_radius;
    let mut uf = UnionFind::<usize>::new(n);
    let offsets: Vec<Vec<i64>> = (0..3usize.pow(d as u32))
        .map(|mut c| {
            (0..d)
                .map(|_| {
                    let o = (c % 3) as i64 - 1;
                    c /= 3;
                    o
                })
                .collect()
        })
        .collect();
    for (i, p) in particles.iter().enumerate() {
        let base = key(p);
        for off in &offsets {
            let k: Vec<i64> = base.iter().zip(off).map(|(b, o)| b + o).collect();
            let Some(list) = buckets.get(&k) else { continue };
            for &j in list.iter().filter(|&&j| j > i) {
                let q = particles.position(j);
                let dist2: f64 = p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
                if dist2 <= r2 {
                    uf.union(i, j);
                }
            }
        }
    }
    let mut labels = uf.into_labeling();
    labels.sort_unstable();
    labels.dedup();
    labels.len()
}

/// Twice the mollifier support radius.
pub fn default_link_radius(spec: &MollifierSpec) -> f64 {
    2.0 * spec.support_radius()
}

/// Mean distance over all unordered particle pairs.
pub fn mean_pairwise_distance(particles: &ParticleState) -> f64 {
    let n = particles.len();
    if n < 2 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        let p = particles.position(i);
        for j in i + 1..n {
            let q = particles.position(j);
            acc += p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        }
    }
    acc / (n * (n - 1) / 2) as f64
}

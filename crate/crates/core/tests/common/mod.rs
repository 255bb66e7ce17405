//! Reference implementations written straight from the definitions, used as
//! oracles against the library. They work on raw coordinates and recompute
//! every distance instead of reading the library's distance matrix.

#![allow(dead_code)]

use rand::Rng;

pub fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn distinct(labels: &[usize]) -> Vec<usize> {
    let mut ids: Vec<usize> = labels.to_vec();
    ids.sort_unstable();
    ids.dedup();
    ids
}

/// Mean silhouette: -1 for one cluster, 0 for points alone in their cluster.
pub fn naive_silhouette(points: &[Vec<f64>], labels: &[usize]) -> f64 {
    let ids = distinct(labels);
    if ids.len() < 2 {
        return -1.0;
    }
    let n = points.len();
    let mut total = 0.0;
    for i in 0..n {
        let own = labels[i];
        let mut same = 0.0;
        let mut same_count = 0usize;
        for j in 0..n {
            if j != i && labels[j] == own {
                same += euclid(&points[i], &points[j]);
                same_count += 1;
            }
        }
        if same_count == 0 {
            continue;
        }
        let a = same / same_count as f64;
        let mut b = f64::INFINITY;
        for &other in &ids {
            if other == own {
                continue;
            }
            let members: Vec<usize> = (0..n).filter(|&j| labels[j] == other).collect();
            let mean = members.iter().map(|&j| euclid(&points[i], &points[j])).sum::<f64>() / members.len() as f64;
            b = b.min(mean);
        }
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    total / n as f64
}

/// Minimum cross-cluster distance over maximum within-cluster diameter
/// (floored at 1e-12); 0 for one cluster.
pub fn naive_dunn(points: &[Vec<f64>], labels: &[usize]) -> f64 {
    if distinct(labels).len() < 2 {
        return 0.0;
    }
    let n = points.len();
    let mut separation = f64::INFINITY;
    let mut diameter: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let dist = euclid(&points[i], &points[j]);
            if labels[i] == labels[j] {
                diameter = diameter.max(dist);
            } else {
                separation = separation.min(dist);
            }
        }
    }
    separation / diameter.max(1e-12)
}

/// Points on a coarse grid in [0, 1]^p so that ties and duplicates occur.
pub fn grid_points<R: Rng>(rng: &mut R, n: usize, p: usize, levels: u32) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..p).map(|_| rng.gen_range(0..=levels) as f64 / levels as f64).collect())
        .collect()
}

/// Random instance whose every column spans [0, 1], so normalization is the identity.
pub fn normalized_instance<R: Rng>(rng: &mut R, n: usize, p: usize) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| rng.gen::<f64>()).collect()).collect();
    for j in 0..p {
        let lo = rows.iter().map(|r| r[j]).fold(f64::INFINITY, f64::min);
        let hi = rows.iter().map(|r| r[j]).fold(f64::NEG_INFINITY, f64::max);
        for r in rows.iter_mut() {
            r[j] = (r[j] - lo) / (hi - lo);
        }
    }
    rows
}

/// Small random instance for exact-optimum comparisons: n <= 16, p <= 2,
/// values on a grid so there are few candidate thresholds.
pub fn small_instance<R: Rng>(rng: &mut R) -> (Vec<Vec<f64>>, usize) {
    loop {
        let n = rng.gen_range(6..=16);
        let p = rng.gen_range(1..=2);
        let rows = grid_points(rng, n, p, 9);
        let spans_all = (0..p).all(|j| {
            let lo = rows.iter().map(|r| r[j]).fold(f64::INFINITY, f64::min);
            let hi = rows.iter().map(|r| r[j]).fold(f64::NEG_INFINITY, f64::max);
            hi > lo
        });
        if spans_all {
            let depth = rng.gen_range(1..=2);
            return (rows, depth);
        }
    }
}

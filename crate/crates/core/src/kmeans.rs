//! Lloyd's k-means with seeded initialization, used to place prototypes.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index;
use rand::Rng;

use crate::linalg::{axpy, squared_distance};
use crate::{Error, Result};

pub const DEFAULT_MAX_ITER: usize = 50;

/// Magnitude bound of the per-component jitter used when a level has fewer
/// samples than requested clusters.
pub const REPLICA_JITTER: f64 = 1e-3;

/// Clusters `points` into `k` centroids under squared Euclidean distance.
///
/// Centroids start at `k` distinct samples drawn from `rng`. Empty clusters
/// keep their previous centroid. With fewer than `k` points the overall mean
/// is replicated `k` times with uniform jitter in `±REPLICA_JITTER`.
pub fn kmeans<R: Rng + ?Sized>(
    points: &[Vec<f64>],
    k: usize,
    max_iter: usize,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    if k == 0 {
        return Err(Error::InvalidParameter("k-means needs k >= 1".into()));
    }
    let first = points.first().ok_or(Error::Empty("k-means points"))?;
    let dim = first.len();

    if points.len() < k {
        let mean = mean_of(points.iter().map(Vec::as_slice), dim);
        return Ok((0..k)
            .map(|_| {
                mean.iter()
                    .map(|m| m + rng.random_range(-REPLICA_JITTER..=REPLICA_JITTER))
                    .collect()
            })
            .collect());
    }

    let mut centroids: Vec<Vec<f64>> = index::sample(rng, points.len(), k)
        .into_iter()
        .map(|i| points[i].clone())
        .collect();
    let mut assignment = vec![usize::MAX; points.len()];

    for _ in 0..max_iter {
        let mut changed = false;
        for (slot, p) in assignment.iter_mut().zip(points) {
            let nearest = nearest(&centroids, p);
            if *slot != nearest {
                *slot = nearest;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        for (c, centroid) in centroids.iter_mut().enumerate() {
            let members = points
                .iter()
                .zip(&assignment)
                .filter(|(_, &a)| a == c)
                .map(|(p, _)| p.as_slice());
            let mut acc = vec![0.0; dim];
            let mut n = 0usize;
            for m in members {
                axpy(1.0, m, &mut acc);
                n += 1;
            }
            if n > 0 {
                acc.iter_mut().for_each(|v| *v /= n as f64);
                *centroid = acc;
            }
        }
    }
    Ok(centroids)
}

fn nearest(centroids: &[Vec<f64>], p: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centroids.iter().enumerate() {
        let d = squared_distance(c, p);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

fn mean_of<'a>(points: impl Iterator<Item = &'a [f64]>, dim: usize) -> Vec<f64> {
    let mut acc = vec![0.0; dim];
    let mut n = 0usize;
    for p in points {
        axpy(1.0, p, &mut acc);
        n += 1;
    }
    acc.iter_mut().for_each(|v| *v /= n as f64);
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_cluster_is_mean() {
        let pts = vec![vec![1.0, 2.0], vec![3.0, -2.0], vec![5.0, 3.0]];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = kmeans(&pts, 1, DEFAULT_MAX_ITER, &mut rng).unwrap();
        assert!((c[0][0] - 3.0).abs() < 1e-12);
        assert!((c[0][1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn separates_two_blobs() {
        let mut pts = Vec::new();
        for i in 0..10 {
            pts.push(vec![i as f64 * 0.01, 0.0]);
            pts.push(vec![10.0 + i as f64 * 0.01, 0.0]);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut c = kmeans(&pts, 2, DEFAULT_MAX_ITER, &mut rng).unwrap();
        c.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap());
        assert!((c[0][0] - 0.045).abs() < 1e-9);
        assert!((c[1][0] - 10.045).abs() < 1e-9);
    }

    #[test]
    fn fewer_points_than_clusters_replicates_mean() {
        let pts = vec![vec![1.0, 1.0], vec![3.0, 1.0]];
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let c = kmeans(&pts, 3, DEFAULT_MAX_ITER, &mut rng).unwrap();
        assert_eq!(c.len(), 3);
        for centroid in c {
            assert!((centroid[0] - 2.0).abs() <= REPLICA_JITTER);
            assert!((centroid[1] - 1.0).abs() <= REPLICA_JITTER);
        }
    }

    #[test]
    fn empty_input_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(kmeans(&[], 2, 10, &mut rng).is_err());
    }
}

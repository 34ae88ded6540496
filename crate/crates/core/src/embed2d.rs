//! Deterministic 2-D linear view of embeddings: projection onto the top two
//! principal directions, found by seeded power iteration with deflation.

use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Distribution as _, StandardNormal};

use crate::linalg::{axpy, dot, norm, Matrix};
use crate::rng::{self, Stream};
use crate::{Error, Result};

const MAX_ITER: usize = 1000;
const TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalPlane {
    pub mean: Vec<f64>,
    /// Unit directions, largest variance first. A direction is all zeros
    /// when the data has no variance left to explain.
    pub axes: [Vec<f64>; 2],
}

impl PrincipalPlane {
    pub fn fit(points: &[Vec<f64>], seed: u64) -> Result<Self> {
        let data = Matrix::from_rows(points)?;
        if data.rows() == 0 {
            return Err(Error::Empty("points to project"));
        }
        let d = data.cols();
        let mean = data.row_mean();
        let mut cov = Matrix::zeros(d, d);
        for i in 0..data.rows() {
            let centred: Vec<f64> = data.row(i).iter().zip(&mean).map(|(x, m)| x - m).collect();
            for (a, &ca) in centred.iter().enumerate() {
                axpy(ca, &centred, cov.row_mut(a));
            }
        }
        let n = data.rows() as f64;
        cov.as_mut_slice().iter_mut().for_each(|v| *v /= n);

        let mut rng = rng::stream(seed, Stream::Projection2d);
        let mut axes: [Vec<f64>; 2] = [vec![0.0; d], vec![0.0; d]];
        for axis in 0..2.min(d) {
            let start: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
            let (v, lambda) = power_iteration(&cov, start);
            if lambda <= TOL {
                break;
            }
            // Deflate: cov -= λ v vᵀ
            for a in 0..d {
                axpy(-lambda * v[a], &v, cov.row_mut(a));
            }
            axes[axis] = v;
        }
        Ok(PrincipalPlane { mean, axes })
    }

    pub fn transform(&self, x: &[f64]) -> [f64; 2] {
        let centred: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        [dot(&centred, &self.axes[0]), dot(&centred, &self.axes[1])]
    }
}

/// Dominant eigenpair of a symmetric PSD matrix. The returned vector's
/// largest-magnitude component is positive.
fn power_iteration(m: &Matrix, mut v: Vec<f64>) -> (Vec<f64>, f64) {
    let n0 = norm(&v);
    v.iter_mut().for_each(|x| *x /= n0);
    for _ in 0..MAX_ITER {
        let mut w = m.matvec(&v);
        let nw = norm(&w);
        if nw <= TOL {
            return (v, 0.0);
        }
        w.iter_mut().for_each(|x| *x /= nw);
        let delta: f64 = w.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = w;
        if delta < 1e-13 {
            break;
        }
    }
    let pivot = v
        .iter()
        .copied()
        .fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
    if pivot < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    let rayleigh = dot(&v, &m.matvec(&v)).max(0.0);
    (v, rayleigh)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_axis_aligned_spread() {
        let mut pts = Vec::new();
        for i in -5..=5 {
            for j in -2..=2 {
                pts.push(vec![0.1 * j as f64, 3.0 * i as f64, 1.0]);
            }
        }
        let plane = PrincipalPlane::fit(&pts, 42).unwrap();
        assert!((plane.axes[0][1] - 1.0).abs() < 1e-9);
        assert!((plane.axes[1][0].abs() - 1.0).abs() < 1e-9);
        let p = plane.transform(&[0.0, 3.0, 1.0]);
        assert!((p[0] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn constant_points_give_zero_axes() {
        let pts = vec![vec![1.0, 2.0]; 4];
        let plane = PrincipalPlane::fit(&pts, 1).unwrap();
        assert_eq!(plane.transform(&[1.0, 2.0]), [0.0, 0.0]);
    }
}

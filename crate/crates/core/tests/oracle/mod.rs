//! Slow, independent reference implementations used by the integration and
//! acceptance tests.
#![allow(dead_code)]

use aurora_qd::dimred::AutoEncoder;
use aurora_qd::metrics::TaskPoint;
use ndarray::ArrayView2;
use rand::Rng;

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues in descending order with matching unit eigenvectors.
pub fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| (i == j) as u8 as f64).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let scale: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum::<f64>().max(1e-300);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]));
    let values = order.iter().map(|&i| a[i][i]).collect();
    let vectors = order.iter().map(|&i| v.iter().map(|row| row[i]).collect()).collect();
    (values, vectors)
}

pub fn mean_row(rows: &[Vec<f64>]) -> Vec<f64> {
    let dim = rows[0].len();
    let mut m = vec![0.0; dim];
    for r in rows {
        for (a, b) in m.iter_mut().zip(r) {
            *a += b;
        }
    }
    m.iter().map(|x| x / rows.len() as f64).collect()
}

/// Covariance with 1/n normalisation.
pub fn covariance(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = mean_row(rows);
    let dim = m.len();
    let mut c = vec![vec![0.0; dim]; dim];
    for r in rows {
        for i in 0..dim {
            let di = r[i] - m[i];
            for j in i..dim {
                c[i][j] += di * (r[j] - m[j]);
            }
        }
    }
    for i in 0..dim {
        for j in i..dim {
            c[i][j] /= rows.len() as f64;
            c[j][i] = c[i][j];
        }
    }
    c
}

/// Gram-Schmidt orthonormalisation of `d` Gaussian-ish random vectors.
pub fn random_orthonormal<R: Rng>(d: usize, dim: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    while basis.len() < d {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        for b in &basis {
            let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            basis.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    basis
}

/// Mean squared per-coordinate error of projecting centred rows onto `basis`.
pub fn projection_mse(rows: &[Vec<f64>], basis: &[Vec<f64>]) -> f64 {
    let m = mean_row(rows);
    let mut total = 0.0;
    for r in rows {
        let c: Vec<f64> = r.iter().zip(&m).map(|(x, m)| x - m).collect();
        let mut rec = vec![0.0; c.len()];
        for b in basis {
            let z: f64 = c.iter().zip(b).map(|(x, y)| x * y).sum();
            rec.iter_mut().zip(b).for_each(|(o, y)| *o += z * y);
        }
        total += c.iter().zip(&rec).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    total / (rows.len() * m.len()) as f64
}

/// Mean distance to the `k` closest points by exhaustive search.
pub fn brute_novelty(points: &[Vec<f64>], query: &[f64], k: usize) -> f64 {
    if points.is_empty() {
        return f64::INFINITY;
    }
    let mut d: Vec<f64> = points
        .iter()
        .map(|p| p.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
        .collect();
    d.sort_by(f64::total_cmp);
    let k = k.min(d.len());
    d[..k].iter().sum::<f64>() / k as f64
}

/// Distinct 50x50 cells among points scoring above `f_min`, by sorting cell ids.
pub fn recount_coverage(points: &[TaskPoint], f_min: f64) -> usize {
    let cell = |b: f64| {
        let mut i = 0usize;
        while i + 1 < 50 && b >= (i + 1) as f64 / 50.0 {
            i += 1;
        }
        i
    };
    let mut ids: Vec<usize> = points
        .iter()
        .filter(|p| p.score > f_min)
        .map(|p| cell(p.bd[0]) * 50 + cell(p.bd[1]))
        .collect();
    ids.sort_unstable();
    ids.dedup();
    ids.len()
}

/// Central finite-difference gradient of the reconstruction loss, flattened
/// in `param_slices` order.
pub fn finite_difference_grad(model: &AutoEncoder, batch: ArrayView2<f64>, h: f64) -> Vec<f64> {
    let mut probe = model.clone();
    let sizes: Vec<usize> = model.param_slices().iter().map(|s| s.len()).collect();
    let mut grad = Vec::new();
    for (s, &len) in sizes.iter().enumerate() {
        for i in 0..len {
            let orig = probe.param_slices_mut()[s][i];
            probe.param_slices_mut()[s][i] = orig + h;
            let up = probe.loss(batch);
            probe.param_slices_mut()[s][i] = orig - h;
            let down = probe.loss(batch);
            probe.param_slices_mut()[s][i] = orig;
            grad.push((up - down) / (2.0 * h));
        }
    }
    grad
}

/// Largest relative error over all coordinates, ignoring pairs that are both tiny.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .filter(|(a, n)| a.abs().max(n.abs()) >= 1e-8)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()))
        .fold(0.0, f64::max)
}

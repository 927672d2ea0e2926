use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Top principal directions of a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// Orthonormal rows, ordered by descending variance.
    pub components: Vec<Vec<f64>>,
    /// All covariance eigenvalues (population normalisation), descending.
    pub eigenvalues: Vec<f64>,
    /// Set when the data had no variance and the basis is arbitrary.
    pub degenerate: bool,
}

pub fn pca_fit(rows: &[&[f64]], d: usize) -> Result<Pca> {
    let n = rows.len();
    if d == 0 || n < d {
        return Err(Error::NotEnoughSamples {
            samples: n,
            components: d,
        });
    }
    let dim = rows[0].len();
    if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: bad.len(),
        });
    }
    if d > dim {
        return Err(Error::Config(format!("cannot extract {d} components from {dim}-dimensional data")));
    }

    let mut mean = vec![0.0; dim];
    for r in rows {
        for (m, x) in mean.iter_mut().zip(r.iter()) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let centered = DMatrix::from_fn(n, dim, |i, j| rows[i][j] - mean[j]);
    let cov = centered.tr_mul(&centered) / n as f64;
    let degenerate = cov.iter().all(|&c| c == 0.0);

    let eigen = cov.symmetric_eigen();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eigen.eigenvalues[b].total_cmp(&eigen.eigenvalues[a]).then(a.cmp(&b)));

    let components = if degenerate {
        (0..d)
            .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect()
    } else {
        order[..d]
            .iter()
            .map(|&c| {
                let mut v: Vec<f64> = eigen.eigenvectors.column(c).iter().copied().collect();
                let lead = v
                    .iter()
                    .enumerate()
                    .fold(0, |best, (i, x)| if x.abs() > v[best].abs() { i } else { best });
                if v[lead] < 0.0 {
                    v.iter_mut().for_each(|x| *x = -*x);
                }
                v
            })
            .collect()
    };
    let eigenvalues = order.iter().map(|&c| eigen.eigenvalues[c].max(0.0)).collect();
    Ok(Pca {
        mean,
        components,
        eigenvalues,
        degenerate,
    })
}

impl Pca {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn latent_dim(&self) -> usize {
        self.components.len()
    }

    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| c.iter().zip(x).zip(&self.mean).map(|((c, x), m)| c * (x - m)).sum())
            .collect()
    }

    pub fn reconstruct(&self, latent: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (c, z) in self.components.iter().zip(latent) {
            for (o, ci) in out.iter_mut().zip(c) {
                *o += z * ci;
            }
        }
        out
    }

    /// Mean squared reconstruction error of one row.
    pub fn reconstruction_error(&self, x: &[f64]) -> f64 {
        let r = self.reconstruct(&self.project(x));
        r.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / x.len() as f64
    }
}

//! Descriptor learners: PCA and an MLP autoencoder, a min-max latent
//! normalisation layer, and the encoder-update schedule.

mod autoencoder;
mod pca;

pub use autoencoder::{ae_train_step, AdamState, AutoEncoder, Dense, LEAKY_SLOPE};
pub use pca::{pca_fit, Pca};

use std::path::Path;

use ndarray::Array2;
use rand::Rng;

use crate::config::{EncoderConfig, EncoderKind};
use crate::error::{Error, Result};

/// Width added on both sides of a latent dimension with no spread.
pub const NORM_EPSILON: f64 = 1e-9;

/// Iteration of the `k`-th encoder update (1-based): `first * k (k + 1) / 2`.
pub fn schedule_next_update(k: usize, first: usize) -> usize {
    assert!(k >= 1);
    first * k * (k + 1) / 2
}

/// Tracks which encoder update comes next.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncoderSchedule {
    first: usize,
    done: usize,
}

impl EncoderSchedule {
    pub fn new(first: usize) -> Self {
        Self { first, done: 0 }
    }

    pub fn next_iteration(&self) -> usize {
        schedule_next_update(self.done + 1, self.first)
    }

    pub fn advance(&mut self) {
        self.done += 1;
    }

    pub fn completed(&self) -> usize {
        self.done
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Reducer {
    /// `None` until the first fit.
    Pca(Option<Pca>),
    Ae { net: AutoEncoder, adam: AdamState },
}

/// Training-loss summary of one encoder fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitReport {
    /// Dataset reconstruction error before the fit (absent for a first PCA fit).
    pub loss_before: Option<ReconstructionStats>,
    pub loss_after: ReconstructionStats,
    pub degenerate: bool,
}

/// Per-sample reconstruction MSE statistics over a dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructionStats {
    pub mean: f64,
    pub median: f64,
}

impl ReconstructionStats {
    fn from_errors(mut errors: Vec<f64>) -> Self {
        let mean = errors.iter().sum::<f64>() / errors.len() as f64;
        errors.sort_by(f64::total_cmp);
        let n = errors.len();
        let median = if n % 2 == 1 {
            errors[n / 2]
        } else {
            0.5 * (errors[n / 2 - 1] + errors[n / 2])
        };
        Self { mean, median }
    }
}

/// A dimensionality-reduction map plus the latent normalisation into `[0, 1]^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderModel {
    pub reducer: Reducer,
    input_dim: usize,
    latent_dim: usize,
    /// Per-dimension `(min, max)` of raw latents; `min < max` always.
    norm: Option<Vec<(f64, f64)>>,
    train_steps: usize,
    batch_size: usize,
}

impl EncoderModel {
    pub fn new<R: Rng + ?Sized>(input_dim: usize, latent_dim: usize, config: &EncoderConfig, rng: &mut R) -> Self {
        let reducer = match config.kind {
            EncoderKind::Pca => Reducer::Pca(None),
            EncoderKind::Ae => {
                let net = AutoEncoder::random(input_dim, config.hidden, latent_dim, rng);
                let adam = AdamState::for_model(&net, config.learning_rate, config.beta1, config.beta2, config.epsilon);
                Reducer::Ae { net, adam }
            }
        };
        Self {
            reducer,
            input_dim,
            latent_dim,
            norm: None,
            train_steps: config.train_steps,
            batch_size: config.batch_size,
        }
    }

    /// Wraps an existing autoencoder (fresh Adam state, given training budget).
    pub fn from_autoencoder(net: AutoEncoder, config: &EncoderConfig) -> Self {
        let adam = AdamState::for_model(&net, config.learning_rate, config.beta1, config.beta2, config.epsilon);
        Self {
            input_dim: net.input_dim(),
            latent_dim: net.latent_dim(),
            reducer: Reducer::Ae { net, adam },
            norm: None,
            train_steps: config.train_steps,
            batch_size: config.batch_size,
        }
    }

    pub fn kind(&self) -> EncoderKind {
        match self.reducer {
            Reducer::Pca(_) => EncoderKind::Pca,
            Reducer::Ae { .. } => EncoderKind::Ae,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn norm(&self) -> Option<&[(f64, f64)]> {
        self.norm.as_deref()
    }

    pub fn is_fitted(&self) -> bool {
        self.norm.is_some()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                actual: x.len(),
            });
        }
        Ok(())
    }

    /// Unnormalised latent code.
    pub fn raw_latent(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        match &self.reducer {
            Reducer::Pca(Some(p)) => Ok(p.project(x)),
            Reducer::Pca(None) => Err(Error::NotFitted),
            Reducer::Ae { net, .. } => Ok(net.forward(ndarray::ArrayView1::from(x)).0.to_vec()),
        }
    }

    fn raw_latents(&self, rows: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
        match &self.reducer {
            Reducer::Ae { net, .. } => {
                let batch = stack(rows, self.input_dim)?;
                Ok(net.encode_batch(batch.view()).outer_iter().map(|r| r.to_vec()).collect())
            }
            Reducer::Pca(_) => rows.iter().map(|r| self.raw_latent(r)).collect(),
        }
    }

    /// Descriptor in `[0, 1]^d`.
    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        let norm = self.norm.as_ref().ok_or(Error::NotFitted)?;
        let z = self.raw_latent(x)?;
        Ok(z.iter()
            .zip(norm)
            .map(|(z, (lo, hi))| ((z - lo) / (hi - lo)).clamp(0.0, 1.0))
            .collect())
    }

    /// Recomputes the latent bounds over `rows`.
    pub fn fit_norm(&mut self, rows: &[&[f64]]) -> Result<()> {
        if rows.is_empty() {
            return Err(Error::EmptyContainer);
        }
        let latents = self.raw_latents(rows)?;
        let norm = (0..self.latent_dim)
            .map(|j| {
                let (lo, hi) = latents
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), z| (lo.min(z[j]), hi.max(z[j])));
                if hi - lo < NORM_EPSILON {
                    (lo - NORM_EPSILON, hi + NORM_EPSILON)
                } else {
                    (lo, hi)
                }
            })
            .collect();
        self.norm = Some(norm);
        Ok(())
    }

    /// Per-sample reconstruction error statistics over `rows`.
    pub fn reconstruction_stats(&self, rows: &[&[f64]]) -> Result<ReconstructionStats> {
        if rows.is_empty() {
            return Err(Error::EmptyContainer);
        }
        let errors = match &self.reducer {
            Reducer::Pca(Some(p)) => rows.iter().map(|r| p.reconstruction_error(r)).collect(),
            Reducer::Pca(None) => return Err(Error::NotFitted),
            Reducer::Ae { net, .. } => {
                let batch = stack(rows, self.input_dim)?;
                let recon = net.reconstruct_batch(batch.view());
                (&recon - &batch)
                    .outer_iter()
                    .map(|r| r.iter().map(|e| e * e).sum::<f64>() / self.input_dim as f64)
                    .collect()
            }
        };
        Ok(ReconstructionStats::from_errors(errors))
    }

    /// Trains on `rows` (PCA: refit; AE: warm-started Adam steps on
    /// minibatches drawn with replacement), then renormalises over `rows`.
    pub fn fit<R: Rng + ?Sized>(&mut self, rows: &[&[f64]], rng: &mut R) -> Result<FitReport> {
        if rows.is_empty() {
            return Err(Error::EmptyContainer);
        }
        for r in rows {
            self.check_input(r)?;
        }
        let loss_before = match &self.reducer {
            Reducer::Pca(None) => None,
            _ => Some(self.reconstruction_stats(rows)?),
        };
        let mut degenerate = false;
        match &mut self.reducer {
            Reducer::Pca(slot) => {
                let p = pca_fit(rows, self.latent_dim)?;
                degenerate = p.degenerate;
                *slot = Some(p);
            }
            Reducer::Ae { net, adam } => {
                let m = self.batch_size.min(rows.len());
                let mut batch = Array2::zeros((m, self.input_dim));
                for _ in 0..self.train_steps {
                    for mut row in batch.outer_iter_mut() {
                        let pick = rows[rng.random_range(0..rows.len())];
                        row.assign(&ndarray::ArrayView1::from(pick));
                    }
                    ae_train_step(net, adam, batch.view())?;
                }
            }
        }
        self.fit_norm(rows)?;
        let loss_after = self.reconstruction_stats(rows)?;
        Ok(FitReport {
            loss_before,
            loss_after,
            degenerate,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        let (tag, hidden) = match &self.reducer {
            Reducer::Pca(_) => (0u8, 0usize),
            Reducer::Ae { net, .. } => (1u8, net.hidden_dim()),
        };
        out.push(tag);
        for v in [self.input_dim, self.latent_dim, hidden] {
            out.extend_from_slice(&(v as u64).to_le_bytes());
        }
        let mut put = |xs: &[f64]| xs.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes()));
        match &self.reducer {
            Reducer::Pca(p) => match p {
                Some(p) => {
                    put(&[1.0]);
                    put(&p.mean);
                    p.components.iter().for_each(|c| put(c));
                }
                None => put(&[0.0]),
            },
            Reducer::Ae { net, .. } => net.param_slices().iter().for_each(|s| put(s)),
        }
        match &self.norm {
            Some(norm) => {
                put(&[1.0]);
                norm.iter().for_each(|(lo, hi)| put(&[*lo, *hi]));
            }
            None => put(&[0.0]),
        }
        out
    }

    /// Restores a model written by [`EncoderModel::to_bytes`]. The training
    /// settings come from `config`; Adam moments start fresh.
    pub fn from_bytes(bytes: &[u8], config: &EncoderConfig) -> Result<Self> {
        let bad = |msg: &str| Error::ModelFormat(msg.to_string());
        if bytes.len() < MAGIC.len() + 1 + 24 || &bytes[..MAGIC.len()] != MAGIC {
            return Err(bad("missing header"));
        }
        let tag = bytes[MAGIC.len()];
        let mut pos = MAGIC.len() + 1;
        let mut dims = [0usize; 3];
        for d in &mut dims {
            *d = u64::from_le_bytes(bytes[pos..pos + 8].try_into().unwrap()) as usize;
            pos += 8;
        }
        let [input_dim, latent_dim, hidden] = dims;
        let body = &bytes[pos..];
        if !body.len().is_multiple_of(8) {
            return Err(bad("truncated payload"));
        }
        let mut values = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let mut take = |n: usize| -> Result<Vec<f64>> {
            let v: Vec<f64> = values.by_ref().take(n).collect();
            if v.len() == n {
                Ok(v)
            } else {
                Err(bad("truncated payload"))
            }
        };
        let reducer = match tag {
            0 => {
                if take(1)?[0] == 1.0 {
                    let mean = take(input_dim)?;
                    let components = (0..latent_dim).map(|_| take(input_dim)).collect::<Result<_>>()?;
                    Reducer::Pca(Some(Pca {
                        mean,
                        components,
                        eigenvalues: Vec::new(),
                        degenerate: false,
                    }))
                } else {
                    Reducer::Pca(None)
                }
            }
            1 => {
                let mut net = AutoEncoder::zeros(input_dim, hidden, latent_dim);
                for s in net.param_slices_mut() {
                    let n = s.len();
                    s.copy_from_slice(&take(n)?);
                }
                let adam = AdamState::for_model(&net, config.learning_rate, config.beta1, config.beta2, config.epsilon);
                Reducer::Ae { net, adam }
            }
            _ => return Err(bad("unknown kind tag")),
        };
        let norm = if take(1)?[0] == 1.0 {
            let flat = take(2 * latent_dim)?;
            Some(flat.chunks_exact(2).map(|c| (c[0], c[1])).collect())
        } else {
            None
        };
        if values.next().is_some() {
            return Err(bad("trailing data"));
        }
        Ok(Self {
            reducer,
            input_dim,
            latent_dim,
            norm,
            train_steps: config.train_steps,
            batch_size: config.batch_size,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path, config: &EncoderConfig) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, config)
    }
}

const MAGIC: &[u8; 8] = b"AURENC\x00\x01";

fn stack(rows: &[&[f64]], dim: usize) -> Result<Array2<f64>> {
    let mut flat = Vec::with_capacity(rows.len() * dim);
    for r in rows {
        if r.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: r.len(),
            });
        }
        flat.extend_from_slice(r);
    }
    Ok(Array2::from_shape_vec((rows.len(), dim), flat).expect("shape checked"))
}

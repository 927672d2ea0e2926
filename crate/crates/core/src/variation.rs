//! Uniform parent selection and bounded polynomial mutation.

use rand::Rng;

use crate::container::Container;
use crate::error::{Error, Result};
use crate::genotype::{check_bounds, Genotype, GENE_MAX, GENE_MIN};

#[derive(Debug, Clone, PartialEq)]
pub struct MutationParams {
    /// Distribution index; larger values keep offspring closer to the parent.
    pub eta: f64,
    /// Per-gene mutation probability.
    pub rate: f64,
    pub bounds: Vec<(f64, f64)>,
}

impl MutationParams {
    pub fn new(eta: f64, rate: f64, bounds: Vec<(f64, f64)>) -> Result<Self> {
        if !(eta > 0.0) {
            return Err(Error::Config(format!("mutation eta must be > 0, got {eta}")));
        }
        if !(0.0..=1.0).contains(&rate) {
            return Err(Error::Config(format!("mutation rate must lie in [0, 1], got {rate}")));
        }
        if let Some(i) = bounds.iter().position(|(lo, hi)| !(lo < hi)) {
            return Err(Error::Config(format!("gene {i}: lower bound must be below upper bound")));
        }
        Ok(Self { eta, rate, bounds })
    }

    /// Same bounds `[-1, 1]` on each of `len` genes.
    pub fn for_genotype(eta: f64, rate: f64, len: usize) -> Result<Self> {
        Self::new(eta, rate, vec![(GENE_MIN, GENE_MAX); len])
    }
}

pub fn polynomial_delta(u: f64, eta: f64) -> f64 {
    let exponent = 1.0 / (eta + 1.0);
    if u < 0.5 {
        (2.0 * u).powf(exponent) - 1.0
    } else {
        1.0 - (2.0 * (1.0 - u)).powf(exponent)
    }
}

pub fn polynomial_mutate<R: Rng + ?Sized>(
    genotype: &Genotype,
    params: &MutationParams,
    rng: &mut R,
) -> Result<Genotype> {
    if genotype.len() != params.bounds.len() {
        return Err(Error::GenotypeLength {
            expected: params.bounds.len(),
            actual: genotype.len(),
        });
    }
    let mut genes = genotype.params().to_vec();
    for (i, (x, &(low, high))) in genes.iter_mut().zip(&params.bounds).enumerate() {
        check_bounds(std::slice::from_ref(x), low, high).map_err(|_| Error::GeneOutOfBounds {
            index: i,
            value: *x,
            low,
            high,
        })?;
        if rng.random::<f64>() < params.rate {
            let delta = polynomial_delta(rng.random::<f64>(), params.eta);
            *x = (*x + delta * (high - low)).clamp(low, high);
        }
    }
    Genotype::new(genes)
}

/// Indices of `n` entries drawn uniformly with replacement.
pub fn select_uniform_indices<R: Rng + ?Sized>(container: &Container, n: usize, rng: &mut R) -> Result<Vec<usize>> {
    if container.is_empty() {
        return Err(Error::EmptyContainer);
    }
    Ok((0..n).map(|_| rng.random_range(0..container.len())).collect())
}

pub fn select_uniform<R: Rng + ?Sized>(container: &Container, n: usize, rng: &mut R) -> Result<Vec<Genotype>> {
    Ok(select_uniform_indices(container, n, rng)?
        .into_iter()
        .map(|i| container.entries()[i].genotype.clone())
        .collect())
}

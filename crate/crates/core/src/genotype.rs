use crate::error::{Error, Result};

/// Lower bound of every gene.
pub const GENE_MIN: f64 = -1.0;
/// Upper bound of every gene.
pub const GENE_MAX: f64 = 1.0;

/// Number of weights and biases in a fully connected network with one hidden layer.
pub const fn controller_param_count(n_in: usize, n_hidden: usize, n_out: usize) -> usize {
    (n_in + 1) * n_hidden + (n_hidden + 1) * n_out
}

/// Flat parameter vector of a policy network, every gene in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Genotype(Vec<f64>);

impl Genotype {
    pub fn new(params: Vec<f64>) -> Result<Self> {
        check_bounds(&params, GENE_MIN, GENE_MAX)?;
        Ok(Self(params))
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn params(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for Genotype {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

pub(crate) fn check_bounds(params: &[f64], low: f64, high: f64) -> Result<()> {
    match params
        .iter()
        .position(|x| !(low..=high).contains(x))
    {
        Some(index) => Err(Error::GeneOutOfBounds {
            index,
            value: params[index],
            low,
            high,
        }),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn param_counts() {
        assert_eq!(controller_param_count(24, 8, 12), 308);
        assert_eq!(controller_param_count(1, 1, 1), 4);
        assert_eq!(controller_param_count(6, 8, 2), 74);
    }

    #[test]
    fn rejects_out_of_bounds_and_nan() {
        assert!(Genotype::new(vec![0.0, 1.0, -1.0]).is_ok());
        assert!(matches!(
            Genotype::new(vec![0.0, 1.5]),
            Err(Error::GeneOutOfBounds { index: 1, .. })
        ));
        assert!(Genotype::new(vec![f64::NAN]).is_err());
    }
}

//! Trait residual vectors.

use crate::error::{Error, Result};

/// Trait residuals with their mean and maximum-likelihood variance.
///
/// `variance` uses denominator `N`, not `N - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhenotypeVector {
    values: Vec<f64>,
    mean: f64,
    variance: f64,
}

impl PhenotypeVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("empty phenotype vector".into()));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite trait value {bad}")));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let variance = values.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n;
        Ok(Self {
            values,
            mean,
            variance,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    /// Zero variance: the trait carries no information.
    pub fn is_degenerate(&self) -> bool {
        self.variance == 0.0
    }
}

//! Per-study genotype storage.

use crate::error::{Error, Result};
use crate::variant::VariantKey;

/// Marker for a missing dosage.
pub const MISSING: f64 = f64::NAN;

/// An `N × J` matrix of alternative-allele dosages in `[0, 2]`.
///
/// Stored column-major; a missing call is [`MISSING`] (NaN). Column `j`
/// holds the dosages for `variants[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GenotypeMatrix {
    n_samples: usize,
    variants: Vec<VariantKey>,
    dosages: Vec<f64>,
}

impl GenotypeMatrix {
    /// Builds a matrix from one dosage column per variant.
    pub fn from_columns(variants: Vec<VariantKey>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if variants.len() != columns.len() {
            return Err(Error::LengthMismatch(format!(
                "{} variants but {} genotype columns",
                variants.len(),
                columns.len()
            )));
        }
        let n_samples = columns.first().map_or(0, Vec::len);
        let mut dosages = Vec::with_capacity(n_samples * columns.len());
        for (key, col) in variants.iter().zip(&columns) {
            if col.len() != n_samples {
                return Err(Error::LengthMismatch(format!(
                    "column {key} has {} entries, expected {n_samples}",
                    col.len()
                )));
            }
            for &x in col {
                if !x.is_nan() && !(0.0..=2.0).contains(&x) {
                    return Err(Error::InvalidInput(format!(
                        "dosage {x} for {key} is outside [0, 2]"
                    )));
                }
            }
            dosages.extend_from_slice(col);
        }
        Ok(Self {
            n_samples,
            variants,
            dosages,
        })
    }

    /// A matrix with no variants over `n_samples` samples.
    pub fn empty(n_samples: usize) -> Self {
        Self {
            n_samples,
            variants: Vec::new(),
            dosages: Vec::new(),
        }
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_variants(&self) -> usize {
        self.variants.len()
    }

    pub fn variants(&self) -> &[VariantKey] {
        &self.variants
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.dosages[j * self.n_samples..(j + 1) * self.n_samples]
    }

    pub fn get(&self, sample: usize, variant: usize) -> Option<f64> {
        let x = self.dosages[variant * self.n_samples + sample];
        (!x.is_nan()).then_some(x)
    }

    pub fn missing_count(&self, j: usize) -> usize {
        self.column(j).iter().filter(|x| x.is_nan()).count()
    }

    pub fn is_complete(&self) -> bool {
        !self.dosages.iter().any(|x| x.is_nan())
    }

    /// Mean of the observed dosages of each column (NaN for a fully missing column).
    pub fn column_means(&self) -> Vec<f64> {
        (0..self.n_variants())
            .map(|j| {
                let (sum, n) = self
                    .column(j)
                    .iter()
                    .filter(|x| !x.is_nan())
                    .fold((0.0, 0usize), |(s, n), &x| (s + x, n + 1));
                if n == 0 {
                    f64::NAN
                } else {
                    sum / n as f64
                }
            })
            .collect()
    }

    /// Keeps the listed columns, in the listed order.
    pub fn select_columns(&self, columns: &[usize]) -> Self {
        let mut dosages = Vec::with_capacity(columns.len() * self.n_samples);
        for &j in columns {
            dosages.extend_from_slice(self.column(j));
        }
        Self {
            n_samples: self.n_samples,
            variants: columns.iter().map(|&j| self.variants[j].clone()).collect(),
            dosages,
        }
    }

    /// Keeps the listed samples (rows), in the listed order.
    pub fn select_samples(&self, samples: &[usize]) -> Self {
        let mut dosages = Vec::with_capacity(samples.len() * self.n_variants());
        for j in 0..self.n_variants() {
            let col = self.column(j);
            dosages.extend(samples.iter().map(|&i| col[i]));
        }
        Self {
            n_samples: samples.len(),
            variants: self.variants.clone(),
            dosages,
        }
    }

    pub(crate) fn column_mut(&mut self, j: usize) -> &mut [f64] {
        let n = self.n_samples;
        &mut self.dosages[j * n..(j + 1) * n]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn keys(n: usize) -> Vec<VariantKey> {
        (0..n)
            .map(|j| VariantKey::new("1", 100 + j as u64, "A", "G").unwrap())
            .collect()
    }

    #[test]
    fn rejects_out_of_range_dosage() {
        assert!(GenotypeMatrix::from_columns(keys(1), vec![vec![0.0, 2.5]]).is_err());
        assert!(GenotypeMatrix::from_columns(keys(1), vec![vec![0.0, -0.1]]).is_err());
    }

    #[test]
    fn rejects_ragged_columns() {
        assert!(GenotypeMatrix::from_columns(keys(2), vec![vec![0.0, 1.0], vec![1.0]]).is_err());
    }

    #[test]
    fn column_means_skip_missing() {
        let g = GenotypeMatrix::from_columns(keys(2), vec![vec![0.0, MISSING, 2.0, 0.0], vec![MISSING; 4]])
            .unwrap();
        let m = g.column_means();
        assert!((m[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!(m[1].is_nan());
        assert_eq!(g.get(1, 0), None);
        assert_eq!(g.get(2, 0), Some(2.0));
        assert!(!g.is_complete());
    }

    proptest::proptest! {
        #[test]
        fn column_means_match_recomputation(cols in proptest::collection::vec(proptest::collection::vec(0u8..3, 5), 1..6)) {
            let columns: Vec<Vec<f64>> = cols.iter().map(|c| c.iter().map(|&x| x as f64).collect()).collect();
            let g = GenotypeMatrix::from_columns(keys(columns.len()), columns.clone()).unwrap();
            for (j, m) in g.column_means().into_iter().enumerate() {
                let direct: f64 = columns[j].iter().sum::<f64>() / 5.0;
                proptest::prop_assert!((m - direct).abs() <= 1e-12 * direct.abs().max(1.0));
            }
        }
    }
}

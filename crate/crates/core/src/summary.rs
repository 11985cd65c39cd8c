//! The shareable per-study summary: scores, banded covariance and QC.

use crate::error::{Error, Result};
use crate::variant::VariantKey;

/// Upper-triangular band of a symmetric matrix over position-sorted variants.
///
/// `rows[i][d]` holds entry `(i, i + d)`; `rows[i][0]` is the diagonal. Rows
/// cover a contiguous run of partners, which is what a position window over
/// sorted variants produces.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BandedCov {
    rows: Vec<Vec<f64>>,
}

impl BandedCov {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        for (i, row) in rows.iter().enumerate() {
            if row.is_empty() {
                return Err(Error::InvalidInput(format!("covariance row {i} lacks a diagonal")));
            }
            if i + row.len() > n {
                return Err(Error::InvalidInput(format!(
                    "covariance row {i} extends past the last variant"
                )));
            }
        }
        Ok(Self { rows })
    }

    /// Zero matrix with the given number of partners (including the diagonal) per row.
    pub fn zeros(widths: &[usize]) -> Self {
        Self {
            rows: widths.iter().map(|&w| vec![0.0; w.max(1)]).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.rows[i][0]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// Entry `(i, j)` if it lies inside the stored band.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        self.rows.get(lo)?.get(hi - lo).copied()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.get(i, j).is_some()
    }

    pub(crate) fn add(&mut self, i: usize, j: usize, value: f64) {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        self.rows[lo][hi - lo] += value;
    }

    pub(crate) fn rows_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.rows
    }
}

/// Per-variant shared statistics of one study.
#[derive(Debug, Clone, PartialEq)]
pub struct VariantSummary {
    pub key: VariantKey,
    /// Samples with an observed (non-missing) genotype.
    pub n_informative: u64,
    /// Alternative-allele frequency `ΣX / 2N` after mean imputation.
    pub alt_af: f64,
    pub call_rate: f64,
    pub hwe_p: f64,
    /// Score `Σ (X - X̄) Y`.
    pub u: f64,
}

/// Everything one study shares for meta-analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryBlock {
    pub study_id: String,
    pub n_samples: u64,
    /// Sorted by [`VariantKey`] order.
    pub variants: Vec<VariantSummary>,
    /// `σ̂² (X - X̄)ᵀ(X - X̄)` for pairs closer than `window_bp`.
    pub cov: BandedCov,
    pub trait_mean: f64,
    pub trait_variance: f64,
    pub window_bp: u64,
}

impl SummaryBlock {
    pub fn len(&self) -> usize {
        self.variants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variants.is_empty()
    }

    pub fn keys(&self) -> impl Iterator<Item = &VariantKey> {
        self.variants.iter().map(|v| &v.key)
    }

    /// Index of the record at `key`'s site and whether its alleles are
    /// swapped relative to `key`.
    pub fn find(&self, key: &VariantKey) -> Option<(usize, bool)> {
        let start = self
            .variants
            .partition_point(|v| (cmp_site(&v.key, key)) == std::cmp::Ordering::Less);
        self.variants[start..]
            .iter()
            .take_while(|v| v.key.same_site(key))
            .enumerate()
            .find_map(|(off, v)| key.orientation_of(&v.key).map(|flip| (start + off, flip)))
    }

    /// Centered genotype cross-product `(X - X̄)ᵀ(X - X̄)` at `(i, j)`, recovered
    /// by dividing out the trait variance.
    pub fn gram(&self, i: usize, j: usize) -> Option<f64> {
        self.cov.get(i, j).map(|v| v / self.trait_variance)
    }

    /// Checks the structural and numeric invariants of a block.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(format!("study {}: {msg}", self.study_id)));
        if self.cov.dim() != self.variants.len() {
            return bad(format!(
                "{} variants but covariance of dimension {}",
                self.variants.len(),
                self.cov.dim()
            ));
        }
        if !(self.trait_variance.is_finite() && self.trait_variance >= 0.0) {
            return bad(format!("trait variance {} is invalid", self.trait_variance));
        }
        for w in self.variants.windows(2) {
            if w[0].key >= w[1].key {
                return bad(format!("variants not strictly sorted at {}", w[1].key));
            }
        }
        let keys: Vec<VariantKey> = self.keys().cloned().collect();
        let widths = crate::summarize::band_widths(&keys, self.window_bp);
        if let Some(i) = (0..keys.len()).find(|&i| self.cov.row(i).len() != widths[i]) {
            return bad(format!(
                "covariance row of {} holds {} entries but the {} bp window implies {}",
                keys[i],
                self.cov.row(i).len(),
                self.window_bp,
                widths[i]
            ));
        }
        for (i, v) in self.variants.iter().enumerate() {
            if !(0.0..=1.0).contains(&v.alt_af) {
                return bad(format!("{}: allele frequency {} outside [0, 1]", v.key, v.alt_af));
            }
            if !(0.0..=1.0).contains(&v.call_rate) {
                return bad(format!("{}: call rate {} outside [0, 1]", v.key, v.call_rate));
            }
            if !(v.hwe_p > 0.0 && v.hwe_p <= 1.0) {
                return bad(format!("{}: HWE p-value {} outside (0, 1]", v.key, v.hwe_p));
            }
            if !v.u.is_finite() {
                return bad(format!("{}: non-finite score", v.key));
            }
            let row = self.cov.row(i);
            if !(row[0].is_finite() && row[0] >= 0.0) {
                return bad(format!("{}: variance {} is negative", v.key, row[0]));
            }
            for (d, &c) in row.iter().enumerate().skip(1) {
                let partner = &self.variants[i + d].key;
                if partner.chrom != v.key.chrom || partner.pos - v.key.pos >= self.window_bp {
                    return bad(format!(
                        "covariance pair {} / {} lies outside the {} bp window",
                        v.key, partner, self.window_bp
                    ));
                }
                let bound = (row[0] * self.cov.diag(i + d)).sqrt() + 1e-9;
                if !c.is_finite() || c.abs() > bound * (1.0 + 1e-12) {
                    return bad(format!("covariance {} / {} = {c} violates Cauchy-Schwarz", v.key, partner));
                }
            }
        }
        Ok(())
    }
}

fn cmp_site(a: &VariantKey, b: &VariantKey) -> std::cmp::Ordering {
    crate::variant::cmp_chrom(&a.chrom, &b.chrom).then(a.pos.cmp(&b.pos))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block() -> SummaryBlock {
        let v = |pos: u64, r: &str, a: &str| VariantSummary {
            key: VariantKey::new("1", pos, r, a).unwrap(),
            n_informative: 4,
            alt_af: 0.25,
            call_rate: 1.0,
            hwe_p: 1.0,
            u: 0.5,
        };
        SummaryBlock {
            study_id: "s".into(),
            n_samples: 4,
            variants: vec![v(10, "A", "G"), v(20, "C", "T"), v(30, "G", "T")],
            cov: BandedCov::from_rows(vec![vec![2.0, 1.0], vec![2.0, -1.0], vec![1.0]]).unwrap(),
            trait_mean: 0.0,
            trait_variance: 0.5,
            window_bp: 15,
        }
    }

    #[test]
    fn band_lookup_is_symmetric() {
        let b = block();
        assert_eq!(b.cov.get(0, 1), Some(1.0));
        assert_eq!(b.cov.get(1, 0), Some(1.0));
        assert_eq!(b.cov.get(0, 2), None);
        assert_eq!(b.gram(1, 2), Some(-2.0));
        b.validate().unwrap();
    }

    #[test]
    fn find_reports_flips() {
        let b = block();
        assert_eq!(b.find(&VariantKey::new("1", 20, "C", "T").unwrap()), Some((1, false)));
        assert_eq!(b.find(&VariantKey::new("1", 20, "T", "C").unwrap()), Some((1, true)));
        assert_eq!(b.find(&VariantKey::new("1", 20, "C", "G").unwrap()), None);
        assert_eq!(b.find(&VariantKey::new("2", 20, "C", "T").unwrap()), None);
    }

    #[test]
    fn validate_rejects_out_of_window_pair() {
        let mut b = block();
        b.window_bp = 5;
        assert!(b.validate().is_err());
    }

    #[test]
    fn validate_rejects_incomplete_band() {
        let mut b = block();
        b.window_bp = 25;
        assert!(b.validate().is_err());
    }

    #[test]
    fn validate_rejects_cauchy_schwarz_violation() {
        let mut b = block();
        b.cov = BandedCov::from_rows(vec![vec![1.0, 3.0], vec![1.0, 0.0], vec![1.0]]).unwrap();
        assert!(b.validate().is_err());
    }
}

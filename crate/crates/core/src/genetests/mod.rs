//! Gene-level tests on pooled scores: burden, variable threshold (VT),
//! SKAT, and the Fisher / minimum-p baselines that combine per-study
//! p-values.
//!
//! Every test works on a [`GeneScores`]: the pooled score vector and dense
//! covariance of one gene's qualifying variants. The same type carries
//! conditional scores, so conditional tests reuse these functions.

mod baseline;
mod burden;
pub mod empirical;
pub mod mixchisq;
pub mod mvn;
mod skat;
mod vt;

use std::fmt;

use nalgebra::{DMatrix, DVector};

pub use baseline::{fisher_burden, fisher_combine, min_p, minp_burden, per_study_burden_pvalues};
pub use burden::{burden, burden_test};
pub use empirical::{empirical, with_empirical, Statistic};
pub use mixchisq::{mixture_chisq_tail, MixtureTail, TailMethod};
pub use mvn::{mvn_rectangle, mvn_rectangle_with, MvnOptions, MvnResult};
pub use skat::{skat, skat_test, KernelSpec};
pub use vt::{threshold_design, vt, vt_test, ThresholdDesign, ThresholdMode, VtOptions};

use crate::error::{Error, Result};
use crate::formats::GroupDefinition;
use crate::meta::MetaScoreSet;
use crate::variant::VariantKey;

/// Scores and covariance of one gene's selected variants.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneScores {
    pub gene: String,
    pub keys: Vec<VariantKey>,
    pub u: DVector<f64>,
    pub v: DMatrix<f64>,
    /// Pooled alternative-allele frequencies.
    pub alt_af: Vec<f64>,
    /// Samples contributing to each variant.
    pub n_samples: Vec<u64>,
    /// Total samples across studies; sets the weight pseudocount.
    pub n_total: u64,
    pub maf_cap: f64,
    pub notes: Vec<String>,
}

impl GeneScores {
    /// Gene members present in `set` with pooled MAF at most `maf_cap` and
    /// positive pooled variance.
    pub fn from_meta(set: &MetaScoreSet, group: &GroupDefinition, maf_cap: f64) -> Result<Self> {
        let mut notes = Vec::new();
        let mut found: Vec<usize> = group.members.iter().filter_map(|k| set.find(k).map(|f| f.0)).collect();
        found.sort_unstable();
        found.dedup();
        let missing = group.members.len() - found.len();
        if missing > 0 {
            notes.push(format!("{missing} of {} members absent from the pooled data", group.members.len()));
        }
        let selected: Vec<usize> = found
            .into_iter()
            .filter(|&i| set.variants[i].maf() <= maf_cap && set.cov.diag(i) > 0.0)
            .collect();
        let v = set.dense_cov(&selected)?;
        Ok(Self {
            gene: group.gene.clone(),
            keys: selected.iter().map(|&i| set.variants[i].key.clone()).collect(),
            u: DVector::from_iterator(selected.len(), selected.iter().map(|&i| set.variants[i].u)),
            v,
            alt_af: selected.iter().map(|&i| set.variants[i].alt_af).collect(),
            n_samples: selected.iter().map(|&i| set.variants[i].n_samples).collect(),
            n_total: set.n_total,
            maf_cap,
            notes,
        })
    }

    /// Applies the same selection rule to already assembled scores.
    pub fn select(mut self, maf_cap: f64) -> Self {
        let keep: Vec<usize> = (0..self.len())
            .filter(|&j| self.maf(j) <= maf_cap && self.v[(j, j)] > 0.0)
            .collect();
        self.keys = keep.iter().map(|&j| self.keys[j].clone()).collect();
        self.u = DVector::from_iterator(keep.len(), keep.iter().map(|&j| self.u[j]));
        self.v = self.v.select_rows(&keep).select_columns(&keep);
        self.alt_af = keep.iter().map(|&j| self.alt_af[j]).collect();
        self.n_samples = keep.iter().map(|&j| self.n_samples[j]).collect();
        self.maf_cap = maf_cap;
        self
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn maf(&self, j: usize) -> f64 {
        self.alt_af[j].min(1.0 - self.alt_af[j])
    }

    /// Estimated minor-allele count of variant `j`.
    pub fn mac(&self, j: usize) -> f64 {
        2.0 * self.n_samples[j] as f64 * self.maf(j)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum WeightScheme {
    Uniform,
    /// `1 / sqrt(p̃(1 - p̃))` with the pooled frequency clamped to
    /// `[1/(2N+2), 1 - 1/(2N+2)]`.
    MadsenBrowning,
    /// One weight per selected variant.
    Custom(Vec<f64>),
}

impl WeightScheme {
    pub fn weights(&self, g: &GeneScores) -> Result<Vec<f64>> {
        let w = match self {
            WeightScheme::Uniform => vec![1.0; g.len()],
            WeightScheme::MadsenBrowning => {
                let eps = 1.0 / (2.0 * g.n_total as f64 + 2.0);
                g.alt_af
                    .iter()
                    .map(|&p| {
                        let p = p.clamp(eps, 1.0 - eps);
                        1.0 / (p * (1.0 - p)).sqrt()
                    })
                    .collect()
            }
            WeightScheme::Custom(w) => {
                if w.len() != g.len() {
                    return Err(Error::LengthMismatch(format!(
                        "{} weights for {} variants",
                        w.len(),
                        g.len()
                    )));
                }
                w.clone()
            }
        };
        if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::InvalidInput("weights must be finite and non-negative".into()));
        }
        Ok(w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TestKind {
    Burden,
    Vt,
    Skat,
    Fisher,
    MinP,
}

impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TestKind::Burden => "burden",
            TestKind::Vt => "vt",
            TestKind::Skat => "skat",
            TestKind::Fisher => "fisher",
            TestKind::MinP => "minp",
        })
    }
}

impl std::str::FromStr for TestKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "burden" => Ok(TestKind::Burden),
            "vt" => Ok(TestKind::Vt),
            "skat" => Ok(TestKind::Skat),
            "fisher" => Ok(TestKind::Fisher),
            "minp" | "min-p" => Ok(TestKind::MinP),
            other => Err(Error::InvalidInput(format!("unknown test `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Positive,
    Negative,
}

impl Direction {
    pub fn of(x: f64) -> Self {
        if x < 0.0 {
            Direction::Negative
        } else {
            Direction::Positive
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Positive => "+",
            Direction::Negative => "-",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalP {
    pub p: f64,
    pub exceedances: u64,
    pub draws: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneTestResult {
    pub gene: String,
    pub test: TestKind,
    /// `None` when the test could not be formed.
    pub statistic: Option<f64>,
    pub p_analytic: Option<f64>,
    pub p_empirical: Option<EmpiricalP>,
    pub maf_cutoff: f64,
    pub direction: Option<Direction>,
    pub effect: Option<f64>,
    pub n_variants: usize,
    pub diagnostics: Vec<String>,
}

impl GeneTestResult {
    /// A result with no statistic, carrying `reason` as a diagnostic.
    pub fn absent(g: &GeneScores, test: TestKind, reason: &str) -> Self {
        let mut diagnostics = g.notes.clone();
        diagnostics.push(reason.to_string());
        Self {
            gene: g.gene.clone(),
            test,
            statistic: None,
            p_analytic: None,
            p_empirical: None,
            maf_cutoff: g.maf_cap,
            direction: None,
            effect: None,
            n_variants: g.len(),
            diagnostics,
        }
    }

    /// Empirical p if present, else analytic.
    pub fn best_p(&self) -> Option<f64> {
        self.p_empirical.map(|e| e.p).or(self.p_analytic)
    }
}

/// Per-gene seed: FNV-1a of the label mixed with the global seed.
pub fn gene_seed(gene: &str, global: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in gene.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    // splitmix64 finalizer over the combination
    let mut z = h ^ global.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn toy(u: &[f64], v: &[f64], af: &[f64]) -> GeneScores {
        let n = u.len();
        GeneScores {
            gene: "G".into(),
            keys: (0..n).map(|j| VariantKey::new("1", 10 + j as u64, "A", "C").unwrap()).collect(),
            u: DVector::from_column_slice(u),
            v: DMatrix::from_row_slice(n, n, v),
            alt_af: af.to_vec(),
            n_samples: vec![1000; n],
            n_total: 1000,
            maf_cap: 0.05,
            notes: Vec::new(),
        }
    }

    #[test]
    fn madsen_browning_weights() {
        let g = toy(&[1.0, 1.0], &[1.0, 0.0, 0.0, 1.0], &[0.0, 0.2]);
        let w = WeightScheme::MadsenBrowning.weights(&g).unwrap();
        let eps: f64 = 1.0 / 2002.0;
        assert!((w[0] - 1.0 / (eps * (1.0 - eps)).sqrt()).abs() < 1e-9);
        assert!((w[1] - 1.0 / (0.2f64 * 0.8).sqrt()).abs() < 1e-12);
        assert!(WeightScheme::Custom(vec![1.0]).weights(&g).is_err());
    }

    #[test]
    fn selection_filters_by_maf_and_variance() {
        let g = toy(&[1.0, 2.0, 3.0], &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 2.0], &[0.01, 0.001, 0.98]);
        let s = g.select(0.015);
        assert_eq!(s.len(), 1);
        assert_eq!(s.u[0], 1.0);
    }

    #[test]
    fn gene_seed_depends_on_label_and_seed() {
        assert_ne!(gene_seed("A", 1), gene_seed("B", 1));
        assert_ne!(gene_seed("A", 1), gene_seed("A", 2));
        assert_eq!(gene_seed("LPL", 7), gene_seed("LPL", 7));
    }
}

//! SKAT with a diagonal kernel: `Q = UᵀKU` against a chi-square mixture.

use nalgebra::DMatrix;

use super::mixchisq::{mixture_chisq_tail, TailMethod};
use super::{GeneScores, GeneTestResult, TestKind, WeightScheme};
use crate::error::{Error, Result};
use crate::formats::GroupDefinition;
use crate::linalg::{psd_sqrt, symmetric_eigen};
use crate::meta::MetaScoreSet;

/// Kernel `K = diag(ω)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    pub diagonal: Vec<f64>,
}

impl KernelSpec {
    pub fn new(diagonal: Vec<f64>) -> Result<Self> {
        if diagonal.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || diagonal.iter().all(|&w| w == 0.0) {
            return Err(Error::InvalidInput("kernel weights must be non-negative and not all zero".into()));
        }
        Ok(Self { diagonal })
    }
}

const CLIP: f64 = 1e-10;

/// Mixture weights: eigenvalues of `V^{1/2} K V^{1/2}` above the clip.
pub(crate) fn skat_lambdas(v: &DMatrix<f64>, kernel: &[f64]) -> Vec<f64> {
    let root = psd_sqrt(v, CLIP);
    let k = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(kernel));
    let m = &root * k * &root;
    let (values, _) = symmetric_eigen(&m);
    let max = values.iter().fold(0.0f64, |a, &b| a.max(b));
    values.iter().copied().filter(|&l| l > CLIP * max).collect()
}

pub fn skat(g: &GeneScores, kernel: &KernelSpec) -> GeneTestResult {
    if g.is_empty() {
        return GeneTestResult::absent(g, TestKind::Skat, "no qualifying variants");
    }
    if kernel.diagonal.len() != g.len() {
        return GeneTestResult::absent(g, TestKind::Skat, "kernel length does not match the variants");
    }
    let q: f64 = g.u.iter().zip(&kernel.diagonal).map(|(u, k)| k * u * u).sum();
    let lambdas = skat_lambdas(&g.v, &kernel.diagonal);
    if lambdas.is_empty() {
        return GeneTestResult::absent(g, TestKind::Skat, "all mixture eigenvalues vanish");
    }
    let tail = mixture_chisq_tail(&lambdas, q);
    let mut diagnostics = g.notes.clone();
    if lambdas.len() < g.len() {
        diagnostics.push(format!("covariance rank {} of {}", lambdas.len(), g.len()));
    }
    if tail.method == TailMethod::Liu {
        diagnostics.push(match tail.davies_fault {
            Some(code) => format!("Davies fault {code}; Liu approximation used"),
            None => "p below Davies accuracy; Liu approximation used".to_string(),
        });
    }
    GeneTestResult {
        gene: g.gene.clone(),
        test: TestKind::Skat,
        statistic: Some(q),
        p_analytic: Some(tail.p),
        p_empirical: None,
        maf_cutoff: g.maf_cap,
        direction: None,
        effect: None,
        n_variants: g.len(),
        diagnostics,
    }
}

pub fn skat_test(
    set: &MetaScoreSet,
    group: &GroupDefinition,
    scheme: &WeightScheme,
    maf_cap: f64,
) -> Result<GeneTestResult> {
    let g = GeneScores::from_meta(set, group, maf_cap)?;
    if g.is_empty() {
        return Ok(GeneTestResult::absent(&g, TestKind::Skat, "no qualifying variants"));
    }
    let kernel = KernelSpec::new(scheme.weights(&g)?)?;
    Ok(skat(&g, &kernel))
}

//! Baselines that combine per-study p-values instead of pooling scores.

use nalgebra::{DMatrix, DVector};

use super::{GeneScores, GeneTestResult, TestKind};
use crate::dist::two_sided_p;
use crate::error::{Error, Result};
use crate::summary::SummaryBlock;

fn check(p_values: &[f64]) -> Result<()> {
    if p_values.is_empty() {
        return Err(Error::InvalidInput("no p-values to combine".into()));
    }
    if let Some(p) = p_values.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
        return Err(Error::InvalidInput(format!("p-value {p} outside (0, 1]")));
    }
    Ok(())
}

/// Fisher's method: `-2 Σ ln p` against `χ²_{2m}`, via the closed-form tail
/// `e^{-x/2} Σ_{k<m} (x/2)^k / k!`.
pub fn fisher_combine(p_values: &[f64]) -> Result<f64> {
    check(p_values)?;
    let half = -p_values.iter().map(|p| p.ln()).sum::<f64>();
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..p_values.len() {
        term *= half / k as f64;
        sum += term;
    }
    Ok(((-half).exp() * sum).min(1.0))
}

/// Šidák-corrected minimum: `1 - (1 - min p)^m`.
pub fn min_p(p_values: &[f64], m_effective: usize) -> Result<f64> {
    check(p_values)?;
    if m_effective == 0 {
        return Err(Error::InvalidInput("effective number of tests must be positive".into()));
    }
    let p = p_values.iter().copied().fold(1.0f64, f64::min);
    Ok((-(m_effective as f64 * (-p).ln_1p()).exp_m1()).min(1.0))
}

/// Burden p-value of the gene's selected variants within each study that
/// carries a testable subset, with weights taken from the pooled selection.
pub fn per_study_burden_pvalues(blocks: &[SummaryBlock], g: &GeneScores, weights: &[f64]) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for block in blocks {
        let mut present = Vec::new();
        for (j, key) in g.keys.iter().enumerate() {
            if let Some((i, flip)) = block.find(key) {
                if block.cov.diag(i) > 0.0 {
                    present.push((j, i, if flip { -1.0 } else { 1.0 }));
                }
            }
        }
        if present.is_empty() {
            continue;
        }
        let n = present.len();
        let u = DVector::from_iterator(n, present.iter().map(|&(_, i, s)| s * block.variants[i].u));
        let mut v = DMatrix::zeros(n, n);
        for a in 0..n {
            for b in a..n {
                let (_, ia, sa) = present[a];
                let (_, ib, sb) = present[b];
                let c = block.cov.get(ia, ib).ok_or_else(|| {
                    Error::MissingCovariance(block.variants[ia].key.to_string(), block.variants[ib].key.to_string())
                })?;
                v[(a, b)] = sa * sb * c;
                v[(b, a)] = v[(a, b)];
            }
        }
        let w = DVector::from_iterator(n, present.iter().map(|&(j, _, _)| weights[j]));
        let vb = (&v * &w).dot(&w);
        if vb > 0.0 {
            out.push(two_sided_p(w.dot(&u) / vb.sqrt()));
        }
    }
    Ok(out)
}

fn combined(g: &GeneScores, test: TestKind, p: Result<f64>, m: usize) -> GeneTestResult {
    match p {
        Ok(p) => GeneTestResult {
            gene: g.gene.clone(),
            test,
            statistic: Some(p),
            p_analytic: Some(p),
            p_empirical: None,
            maf_cutoff: g.maf_cap,
            direction: None,
            effect: None,
            n_variants: g.len(),
            diagnostics: {
                let mut d = g.notes.clone();
                d.push(format!("{m} studies combined"));
                d
            },
        },
        Err(_) => GeneTestResult::absent(g, test, "no study has a testable burden"),
    }
}

/// Fisher combination of per-study burden p-values.
pub fn fisher_burden(blocks: &[SummaryBlock], g: &GeneScores, weights: &[f64]) -> Result<GeneTestResult> {
    let ps = per_study_burden_pvalues(blocks, g, weights)?;
    Ok(combined(g, TestKind::Fisher, fisher_combine(&ps), ps.len()))
}

/// Minimum per-study burden p-value, corrected for the number of studies.
pub fn minp_burden(blocks: &[SummaryBlock], g: &GeneScores, weights: &[f64]) -> Result<GeneTestResult> {
    let ps = per_study_burden_pvalues(blocks, g, weights)?;
    Ok(combined(g, TestKind::MinP, min_p(&ps, ps.len().max(1)), ps.len()))
}

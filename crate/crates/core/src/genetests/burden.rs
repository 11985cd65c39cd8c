//! Weighted burden test `ωᵀU / sqrt(ωᵀVω)`.

use nalgebra::DVector;

use super::{Direction, GeneScores, GeneTestResult, TestKind, WeightScheme};
use crate::dist::two_sided_p;
use crate::error::Result;
use crate::formats::GroupDefinition;
use crate::meta::MetaScoreSet;

pub fn burden(g: &GeneScores, weights: &[f64]) -> GeneTestResult {
    if g.is_empty() {
        return GeneTestResult::absent(g, TestKind::Burden, "no qualifying variants");
    }
    let w = DVector::from_column_slice(weights);
    if w.iter().all(|&x| x == 0.0) {
        return GeneTestResult::absent(g, TestKind::Burden, "all weights are zero");
    }
    let ub = w.dot(&g.u);
    let vb = (&g.v * &w).dot(&w);
    if !(vb > 0.0) {
        return GeneTestResult::absent(g, TestKind::Burden, "burden variance is not positive");
    }
    let t = ub / vb.sqrt();
    GeneTestResult {
        gene: g.gene.clone(),
        test: TestKind::Burden,
        statistic: Some(t),
        p_analytic: Some(two_sided_p(t)),
        p_empirical: None,
        maf_cutoff: g.maf_cap,
        direction: Some(Direction::of(ub)),
        effect: Some(ub / vb),
        n_variants: g.len(),
        diagnostics: g.notes.clone(),
    }
}

/// Burden test of `group` on pooled scores.
pub fn burden_test(
    set: &MetaScoreSet,
    group: &GroupDefinition,
    scheme: &WeightScheme,
    maf_cap: f64,
) -> Result<GeneTestResult> {
    let g = GeneScores::from_meta(set, group, maf_cap)?;
    let w = scheme.weights(&g)?;
    Ok(burden(&g, &w))
}

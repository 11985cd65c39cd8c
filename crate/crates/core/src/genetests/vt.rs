//! Variable-threshold burden test: the largest standardized burden over all
//! observed frequency cutoffs, referred to the joint normal null of the
//! per-threshold statistics.

use nalgebra::{DMatrix, DVector};

use super::mvn::{mvn_rectangle_with, MvnOptions};
use super::{Direction, GeneScores, GeneTestResult, TestKind};
use crate::dist::{normal_sf, two_sided_p};
use crate::error::Result;
use crate::formats::GroupDefinition;
use crate::meta::MetaScoreSet;

/// Which per-variant quantity defines the cutoffs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdMode {
    /// Pooled minor-allele frequency.
    Frequency,
    /// Estimated pooled minor-allele count.
    Count,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VtOptions {
    /// Maximize `|T|` rather than `T`.
    pub two_sided: bool,
    pub mode: ThresholdMode,
    /// Seed for the integrator's randomization.
    pub seed: u64,
    /// Target error of the p-value relative to itself.
    pub rel_tol: f64,
}

impl Default for VtOptions {
    fn default() -> Self {
        Self {
            two_sided: true,
            mode: ThresholdMode::Frequency,
            seed: 0,
            rel_tol: 0.01,
        }
    }
}

/// Ascending cutoffs and the `J × M` indicator matrix whose column `m`
/// selects the variants at or below cutoff `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdDesign {
    pub thresholds: Vec<f64>,
    pub indicators: DMatrix<f64>,
}

/// Values within `1e-12` relative of each other form one cutoff.
pub fn threshold_design(g: &GeneScores, mode: ThresholdMode) -> ThresholdDesign {
    let values: Vec<f64> = (0..g.len())
        .map(|j| match mode {
            ThresholdMode::Frequency => g.maf(j),
            ThresholdMode::Count => g.mac(j),
        })
        .collect();
    let mut sorted = values.clone();
    sorted.sort_by(f64::total_cmp);
    let mut thresholds: Vec<f64> = Vec::new();
    for v in sorted {
        match thresholds.last_mut() {
            Some(last) if v <= *last + 1e-12 * last.abs() => *last = v,
            _ => thresholds.push(v),
        }
    }
    let indicators = DMatrix::from_fn(g.len(), thresholds.len(), |j, m| {
        if values[j] <= thresholds[m] {
            1.0
        } else {
            0.0
        }
    });
    ThresholdDesign { thresholds, indicators }
}

const DUPLICATE_CORR: f64 = 1.0 - 1e-10;
/// Relative error beyond which the integrated p-value is withheld.
const MAX_REL_ERROR: f64 = 0.05;

/// Design, per-threshold burdens `Φᵀ U`, their covariance `Φᵀ V Φ`, and the
/// thresholds that survive collapsing.
pub(crate) fn reduced_thresholds(
    g: &GeneScores,
    mode: ThresholdMode,
) -> (ThresholdDesign, DVector<f64>, DMatrix<f64>, Vec<usize>) {
    let design = threshold_design(g, mode);
    let phi = &design.indicators;
    let b: DVector<f64> = phi.transpose() * &g.u;
    let s: DMatrix<f64> = phi.transpose() * &g.v * phi;
    let scale = (0..g.len()).map(|j| g.v[(j, j)]).fold(0.0f64, f64::max);
    let mut kept: Vec<usize> = Vec::new();
    for m in 0..design.thresholds.len() {
        if s[(m, m)] <= 1e-12 * scale {
            continue;
        }
        if let Some(&p) = kept.last() {
            if s[(p, m)] / (s[(p, p)] * s[(m, m)]).sqrt() >= DUPLICATE_CORR {
                continue;
            }
        }
        kept.push(m);
    }
    (design, b, s, kept)
}

/// Correlation of the standardized burdens at the kept thresholds.
pub(crate) fn threshold_correlation(s: &DMatrix<f64>, kept: &[usize]) -> DMatrix<f64> {
    let k = kept.len();
    DMatrix::from_fn(k, k, |i, j| {
        let (a, c) = (kept[i], kept[j]);
        if i == j {
            1.0
        } else {
            s[(a, c)] / (s[(a, a)] * s[(c, c)]).sqrt()
        }
    })
}

pub fn vt(g: &GeneScores, opts: &VtOptions) -> GeneTestResult {
    if g.is_empty() {
        return GeneTestResult::absent(g, TestKind::Vt, "no qualifying variants");
    }
    let (design, b, s, kept) = reduced_thresholds(g, opts.mode);
    if kept.is_empty() {
        return GeneTestResult::absent(g, TestKind::Vt, "all threshold burdens have zero variance");
    }
    let t: Vec<f64> = kept.iter().map(|&m| b[m] / s[(m, m)].sqrt()).collect();
    let score = |x: f64| if opts.two_sided { x.abs() } else { x };
    let best = (0..t.len()).fold(0, |a, i| if score(t[i]) > score(t[a]) { i } else { a });
    let stat = score(t[best]);
    let mbest = kept[best];

    let mut diagnostics = g.notes.clone();
    if kept.len() < design.thresholds.len() {
        diagnostics.push(format!(
            "{} of {} thresholds collapsed",
            design.thresholds.len() - kept.len(),
            design.thresholds.len()
        ));
    }
    let single = if opts.two_sided { two_sided_p(stat) } else { normal_sf(stat) };
    let p = if kept.len() == 1 {
        Some(single)
    } else {
        let k = kept.len();
        let r = threshold_correlation(&s, &kept);
        let lower = vec![if opts.two_sided { -stat } else { f64::NEG_INFINITY }; k];
        let upper = vec![stat; k];
        let mvn_opts = MvnOptions {
            abs_tol: 0.0,
            rel_tol_complement: opts.rel_tol,
            seed: opts.seed,
            ..MvnOptions::default()
        };
        match mvn_rectangle_with(&lower, &upper, &r, &mvn_opts) {
            Ok(res) => {
                // the union bound brackets the true value
                let p = res.complement.clamp(single, (k as f64 * single).min(1.0));
                if res.error > MAX_REL_ERROR * p {
                    diagnostics.push(format!(
                        "integration error {:.3e} too large for p {:.3e}",
                        res.error, p
                    ));
                    None
                } else {
                    Some(p)
                }
            }
            Err(e) => {
                diagnostics.push(format!("integration failed: {e}"));
                None
            }
        }
    };
    let included_maf = (0..g.len())
        .filter(|&j| design.indicators[(j, mbest)] > 0.0)
        .map(|j| g.maf(j))
        .fold(0.0f64, f64::max);
    GeneTestResult {
        gene: g.gene.clone(),
        test: TestKind::Vt,
        statistic: Some(stat),
        p_analytic: p,
        p_empirical: None,
        maf_cutoff: included_maf,
        direction: Some(Direction::of(b[mbest])),
        effect: Some(b[mbest] / s[(mbest, mbest)]),
        n_variants: g.len(),
        diagnostics,
    }
}

pub fn vt_test(set: &MetaScoreSet, group: &GroupDefinition, maf_cap: f64, opts: &VtOptions) -> Result<GeneTestResult> {
    let g = GeneScores::from_meta(set, group, maf_cap)?;
    Ok(vt(&g, opts))
}

#[cfg(test)]
mod tests {
    use super::super::burden::burden;
    use super::super::tests::toy;
    use super::*;

    #[test]
    fn single_frequency_reduces_to_burden() {
        let g = toy(&[2.0, 1.0], &[2.0, 0.5, 0.5, 1.0], &[0.004, 0.004]);
        let r = vt(&g, &VtOptions::default());
        let b = burden(&g, &[1.0, 1.0]);
        assert!((r.p_analytic.unwrap() - b.p_analytic.unwrap()).abs() < 1e-15);
        assert!((r.statistic.unwrap() - b.statistic.unwrap().abs()).abs() < 1e-12);
    }

    #[test]
    fn design_is_nested() {
        let g = toy(&[1.0, 1.0, 1.0], &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0], &[0.003, 0.001, 0.003]);
        let d = threshold_design(&g, ThresholdMode::Frequency);
        assert_eq!(d.thresholds.len(), 2);
        assert_eq!(d.indicators.column(0).as_slice(), &[0.0, 1.0, 0.0]);
        assert_eq!(d.indicators.column(1).as_slice(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn perfectly_correlated_thresholds_collapse() {
        // the second variant adds nothing: zero score and zero variance
        let mut g = toy(&[2.0, 0.0], &[2.0, 0.0, 0.0, 0.0], &[0.001, 0.004]);
        g.v[(1, 1)] = 0.0;
        let r = vt(&g, &VtOptions::default());
        assert!(r.diagnostics.iter().any(|d| d.contains("collapsed")));
        assert!((r.p_analytic.unwrap() - two_sided_p(2.0 / 2f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn bonferroni_sandwich() {
        let g = toy(
            &[3.0, 1.0, -0.5],
            &[2.0, 0.2, 0.1, 0.2, 1.5, 0.3, 0.1, 0.3, 1.0],
            &[0.001, 0.003, 0.008],
        );
        let r = vt(&g, &VtOptions::default());
        let best = two_sided_p(r.statistic.unwrap());
        let p = r.p_analytic.unwrap();
        assert!(p >= best && p <= 3.0 * best);
    }
}

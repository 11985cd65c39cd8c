//! Monte-Carlo p-values for the pooled-score tests.
//!
//! Each test samples the smallest vector whose null law it needs: the
//! standardized burden is a single standard normal, VT uses the correlation of
//! the kept threshold burdens, and SKAT uses `K^{1/2} U ~ MVN(0, K^{1/2} V K^{1/2})`
//! with statistic `‖K^{1/2} U‖²`.

use nalgebra::{DMatrix, DVector};

use super::skat::KernelSpec;
use super::vt::{reduced_thresholds, threshold_correlation, VtOptions};
use super::{EmpiricalP, GeneScores, GeneTestResult, TestKind};
use crate::error::{Error, Result};
use crate::montecarlo::{empirical_pvalue, McConfig};

/// The statistic whose null distribution is sampled.
#[derive(Debug, Clone, Copy)]
pub enum Statistic<'a> {
    Burden(&'a [f64]),
    Vt(&'a VtOptions),
    Skat(&'a KernelSpec),
}

impl Statistic<'_> {
    fn kind(&self) -> TestKind {
        match self {
            Statistic::Burden(_) => TestKind::Burden,
            Statistic::Vt(_) => TestKind::Vt,
            Statistic::Skat(_) => TestKind::Skat,
        }
    }
}

/// `None` when the statistic cannot be formed for `g`.
pub fn empirical(g: &GeneScores, stat: Statistic<'_>, cfg: &McConfig) -> Result<Option<EmpiricalP>> {
    if g.is_empty() {
        return Ok(None);
    }
    match stat {
        Statistic::Burden(w) => {
            if w.len() != g.len() {
                return Err(Error::LengthMismatch(format!("{} weights for {} variants", w.len(), g.len())));
            }
            let w = DVector::from_column_slice(w);
            let vb = (&g.v * &w).dot(&w);
            if !(vb > 0.0) {
                return Ok(None);
            }
            let observed = (w.dot(&g.u) / vb.sqrt()).abs();
            empirical_pvalue(observed, &|x| x[0].abs(), &DMatrix::identity(1, 1), cfg).map(Some)
        }
        Statistic::Vt(opts) => {
            let (_, b, s, kept) = reduced_thresholds(g, opts.mode);
            if kept.is_empty() {
                return Ok(None);
            }
            let two_sided = opts.two_sided;
            let score = move |x: f64| if two_sided { x.abs() } else { x };
            let observed = kept
                .iter()
                .map(|&m| score(b[m] / s[(m, m)].sqrt()))
                .fold(f64::NEG_INFINITY, f64::max);
            let r = threshold_correlation(&s, &kept);
            let f = move |x: &[f64]| x.iter().map(|&t| score(t)).fold(f64::NEG_INFINITY, f64::max);
            empirical_pvalue(observed, &f, &r, cfg).map(Some)
        }
        Statistic::Skat(kernel) => {
            if kernel.diagonal.len() != g.len() {
                return Err(Error::LengthMismatch(format!(
                    "{} kernel weights for {} variants",
                    kernel.diagonal.len(),
                    g.len()
                )));
            }
            let root: Vec<f64> = kernel.diagonal.iter().map(|k| k.sqrt()).collect();
            let n = g.len();
            let m = DMatrix::from_fn(n, n, |i, j| root[i] * g.v[(i, j)] * root[j]);
            let observed: f64 = g.u.iter().zip(&kernel.diagonal).map(|(u, k)| k * u * u).sum();
            empirical_pvalue(observed, &|x| x.iter().map(|v| v * v).sum(), &m, cfg).map(Some)
        }
    }
}

/// Fills `result.p_empirical` when the analytic test produced a statistic.
pub fn with_empirical(
    mut result: GeneTestResult,
    g: &GeneScores,
    stat: Statistic<'_>,
    cfg: &McConfig,
) -> Result<GeneTestResult> {
    if result.test != stat.kind() {
        return Err(Error::InvalidInput(format!(
            "{} result paired with a {} statistic",
            result.test,
            stat.kind()
        )));
    }
    if result.statistic.is_some() {
        result.p_empirical = empirical(g, stat, cfg)?;
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::super::tests::toy;
    use super::super::{burden, skat, vt};
    use super::*;

    fn cfg(seed: u64) -> McConfig {
        McConfig {
            target_exceedances: 1_000_000,
            max_draws: 400_000,
            seed,
            batch: 10_000,
        }
    }

    fn three() -> GeneScores {
        toy(
            &[2.1, -1.0, 1.6],
            &[2.0, 0.4, 0.1, 0.4, 1.5, -0.2, 0.1, -0.2, 1.0],
            &[0.002, 0.004, 0.009],
        )
    }

    fn close(analytic: f64, e: EmpiricalP) {
        let se = (analytic * (1.0 - analytic) / e.draws as f64).sqrt();
        assert!((analytic - e.p).abs() < 3.0 * se, "{analytic} vs {}", e.p);
    }

    #[test]
    fn burden_agrees() {
        let g = three();
        let w = [1.0, 1.0, 1.0];
        let r = with_empirical(burden(&g, &w), &g, Statistic::Burden(&w), &cfg(1)).unwrap();
        close(r.p_analytic.unwrap(), r.p_empirical.unwrap());
    }

    #[test]
    fn vt_agrees() {
        let g = three();
        let opts = VtOptions::default();
        let r = with_empirical(vt(&g, &opts), &g, Statistic::Vt(&opts), &cfg(2)).unwrap();
        close(r.p_analytic.unwrap(), r.p_empirical.unwrap());
    }

    #[test]
    fn skat_agrees() {
        let g = three();
        let k = KernelSpec::new(vec![1.0, 2.0, 0.5]).unwrap();
        let r = with_empirical(skat(&g, &k), &g, Statistic::Skat(&k), &cfg(3)).unwrap();
        close(r.p_analytic.unwrap(), r.p_empirical.unwrap());
    }

    #[test]
    fn mismatched_kind_rejected() {
        let g = three();
        let w = [1.0; 3];
        let k = KernelSpec::new(w.to_vec()).unwrap();
        assert!(with_empirical(burden(&g, &w), &g, Statistic::Skat(&k), &cfg(0)).is_err());
    }
}

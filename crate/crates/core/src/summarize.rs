//! Per-study reduction of individual-level data to a [`SummaryBlock`].

use crate::dist::normal_quantile;
use crate::error::{Error, Result, Warning};
use crate::genotype::GenotypeMatrix;
use crate::phenotype::PhenotypeVector;
use crate::summary::{BandedCov, SummaryBlock, VariantSummary};
use crate::variant::VariantKey;

/// Covariates for residualization. The intercept is implicit and never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateMatrix {
    n_samples: usize,
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl CovariateMatrix {
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>, n_samples: usize) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::LengthMismatch(format!(
                "{} covariate names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        for (name, col) in names.iter().zip(&columns) {
            if col.len() != n_samples {
                return Err(Error::LengthMismatch(format!(
                    "covariate {name} has {} values, expected {n_samples}",
                    col.len()
                )));
            }
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!("covariate {name} has non-finite values")));
            }
        }
        Ok(Self {
            n_samples,
            names,
            columns,
        })
    }

    /// Intercept only.
    pub fn intercept_only(n_samples: usize) -> Self {
        Self {
            n_samples,
            names: Vec::new(),
            columns: Vec::new(),
        }
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_covariates(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn project_out(v: &mut [f64], basis: &[Vec<f64>]) {
    // two passes of modified Gram-Schmidt keep the residual orthogonal to
    // working precision
    for _ in 0..2 {
        for q in basis {
            let c = dot(v, q);
            for (x, qi) in v.iter_mut().zip(q) {
                *x -= c * qi;
            }
        }
    }
}

/// Least-squares residuals of `raw_trait` on an intercept plus `covariates`.
pub fn residualize(raw_trait: &[f64], covariates: &CovariateMatrix) -> Result<Vec<f64>> {
    let n = raw_trait.len();
    if n != covariates.n_samples {
        return Err(Error::LengthMismatch(format!(
            "trait has {n} values but covariates cover {} samples",
            covariates.n_samples
        )));
    }
    if n == 0 {
        return Err(Error::InvalidInput("empty trait vector".into()));
    }
    if raw_trait.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("trait has non-finite values".into()));
    }
    let mut basis = vec![vec![1.0 / (n as f64).sqrt(); n]];
    let mut collinear = Vec::new();
    for (name, col) in covariates.names.iter().zip(&covariates.columns) {
        let scale = dot(col, col).sqrt();
        let mut v = col.clone();
        project_out(&mut v, &basis);
        let norm = dot(&v, &v).sqrt();
        if norm <= 1e-10 * scale.max(f64::MIN_POSITIVE) * (n as f64).sqrt() || norm == 0.0 {
            collinear.push(name.clone());
            continue;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        basis.push(v);
    }
    if !collinear.is_empty() {
        return Err(Error::RankDeficient(collinear));
    }
    let mut r = raw_trait.to_vec();
    project_out(&mut r, &basis);
    Ok(r)
}

/// Rank-based inverse normal transform `Φ⁻¹((r - 0.5) / N)` with average ranks for ties.
pub fn inverse_normal_transform(values: &[f64]) -> Result<Vec<f64>> {
    let n = values.len();
    if n < 2 {
        return Err(Error::InvalidInput("inverse normal transform needs at least 2 values".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("inverse normal transform of non-finite values".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    if values[order[0]] == values[order[n - 1]] {
        return Err(Error::Degenerate("all values are identical".into()));
    }
    let mut out = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // 1-based ranks start+1 ..= end share their average
        let rank = (start + 1 + end) as f64 / 2.0;
        let z = normal_quantile((rank - 0.5) / n as f64);
        for &i in &order[start..end] {
            out[i] = z;
        }
        start = end;
    }
    Ok(out)
}

/// Replaces missing dosages by the observed column mean. Fully missing
/// columns are dropped, each with a warning.
pub fn impute_missing(genotypes: &GenotypeMatrix) -> (GenotypeMatrix, Vec<Warning>) {
    let means = genotypes.column_means();
    let mut warnings = Vec::new();
    let keep: Vec<usize> = (0..genotypes.n_variants())
        .filter(|&j| {
            let ok = !means[j].is_nan() || genotypes.n_samples() == 0;
            if !ok {
                warnings.push(Warning::new(
                    genotypes.variants()[j].to_string(),
                    "all genotypes missing; variant dropped",
                ));
            }
            ok
        })
        .collect();
    let mut out = genotypes.select_columns(&keep);
    for (c, &j) in keep.iter().enumerate() {
        let m = means[j];
        for x in out.column_mut(c).iter_mut().filter(|x| x.is_nan()) {
            *x = m;
        }
    }
    (out, warnings)
}

/// Number of partners (diagonal included) of each variant inside the window;
/// `keys` must be sorted.
pub(crate) fn band_widths(keys: &[VariantKey], window_bp: u64) -> Vec<usize> {
    let mut widths = Vec::with_capacity(keys.len());
    let mut end = 0;
    for (i, k) in keys.iter().enumerate() {
        end = end.max(i + 1);
        while end < keys.len() && keys[end].chrom == k.chrom && keys[end].pos - k.pos < window_bp {
            end += 1;
        }
        widths.push(end - i);
    }
    widths
}

/// Scores `U_j = Σ_i (X_ij - X̄_j) Y_i` and banded `V = σ² (X - X̄)ᵀ(X - X̄)`.
///
/// `genotypes` must be complete and sorted by key. Each column is shifted by
/// its rounded mean before accumulation so rare-variant columns stay sparse
/// and common ones avoid cancellation; the cost is `Σ_samples nnz²` within
/// the band rather than `N · J²`.
pub fn score_and_covariance(
    genotypes: &GenotypeMatrix,
    y: &[f64],
    sigma2: f64,
    window_bp: u64,
) -> Result<(Vec<f64>, BandedCov)> {
    let n = genotypes.n_samples();
    let j_count = genotypes.n_variants();
    if y.len() != n {
        return Err(Error::LengthMismatch(format!(
            "{} trait values for {n} genotyped samples",
            y.len()
        )));
    }
    if !genotypes.is_complete() {
        return Err(Error::InvalidInput("genotypes must be imputed before scoring".into()));
    }
    let keys = genotypes.variants();
    if keys.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput("genotype columns must be strictly sorted by variant".into()));
    }
    let nf = n as f64;
    let y_mean = if n == 0 { 0.0 } else { y.iter().sum::<f64>() / nf };
    let yc: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
    let yc_sum: f64 = yc.iter().sum();

    let widths = band_widths(keys, window_bp);
    let mut cov = BandedCov::zeros(&widths);
    let mut u = vec![0.0; j_count];
    let mut offset = vec![0.0; j_count];
    // per-sample lists of (column, shifted dosage)
    let mut by_sample: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for j in 0..j_count {
        let col = genotypes.column(j);
        let mean = if n == 0 { 0.0 } else { col.iter().sum::<f64>() / nf };
        let shift = mean.round();
        offset[j] = mean - shift;
        let mut s = 0.0;
        for (i, &x) in col.iter().enumerate() {
            let z = x - shift;
            if z != 0.0 {
                s += z * yc[i];
                by_sample[i].push((j, z));
            }
        }
        u[j] = s - offset[j] * yc_sum;
    }
    let rows = cov.rows_mut();
    for entries in &by_sample {
        for (p, &(a, za)) in entries.iter().enumerate() {
            let row = &mut rows[a];
            for &(b, zb) in &entries[p..] {
                let d = b - a;
                if d >= row.len() {
                    break;
                }
                row[d] += za * zb;
            }
        }
    }
    for (a, row) in rows.iter_mut().enumerate() {
        for (d, v) in row.iter_mut().enumerate() {
            let mut s = *v - nf * offset[a] * offset[a + d];
            if d == 0 {
                s = s.max(0.0);
            }
            *v = sigma2 * s;
        }
    }
    Ok((u, cov))
}

/// Exact two-sided Hardy-Weinberg test from genotype counts.
///
/// Sums the probabilities of all heterozygote counts (given the allele
/// counts) that are no more likely than the observed one.
pub fn hwe_exact_pvalue(n_hom_ref: u64, n_het: u64, n_hom_alt: u64) -> f64 {
    let n = n_hom_ref + n_het + n_hom_alt;
    let rare = (2 * n_hom_ref + n_het).min(2 * n_hom_alt + n_het);
    if n == 0 || rare == 0 {
        return 1.0;
    }
    let rare = rare as usize;
    let n = n as usize;
    let mut probs = vec![0.0f64; rare + 1];
    // start near the mode with the right parity
    let mut mid = ((rare as f64) * (2 * n - rare) as f64 / (2 * n) as f64) as usize;
    if mid % 2 != rare % 2 {
        mid += 1;
    }
    mid = mid.min(rare);
    probs[mid] = 1.0;
    let mut het = mid;
    while het >= 2 {
        let hom_r = (rare - het) / 2;
        let hom_c = n - het - hom_r;
        probs[het - 2] =
            probs[het] * (het * (het - 1)) as f64 / (4.0 * (hom_r + 1) as f64 * (hom_c + 1) as f64);
        het -= 2;
    }
    het = mid;
    while het + 2 <= rare {
        let hom_r = (rare - het) / 2;
        let hom_c = n - het - hom_r;
        probs[het + 2] = probs[het] * 4.0 * hom_r as f64 * hom_c as f64 / ((het + 1) * (het + 2)) as f64;
        het += 2;
    }
    let total: f64 = probs.iter().sum();
    let observed = probs[n_het as usize];
    let p: f64 = probs
        .iter()
        .filter(|&&q| q > 0.0 && q <= observed * (1.0 + 1e-7))
        .sum::<f64>()
        / total;
    p.min(1.0)
}

fn hwe_from_column(col: &[f64]) -> f64 {
    let mut counts = [0u64; 3];
    for &x in col.iter().filter(|x| !x.is_nan()) {
        counts[(x.round() as usize).min(2)] += 1;
    }
    hwe_exact_pvalue(counts[0], counts[1], counts[2])
}

/// Builds the shareable summary of one study from raw (possibly missing)
/// genotypes and trait residuals.
///
/// Call rate, informative count and HWE are taken before imputation
/// (dosages rounded to the nearest genotype for HWE); frequencies, scores and
/// covariances after mean imputation. Columns are reordered by variant key.
pub fn compute_summary(
    study_id: &str,
    genotypes: &GenotypeMatrix,
    residuals: &PhenotypeVector,
    window_bp: u64,
) -> Result<(SummaryBlock, Vec<Warning>)> {
    let n = genotypes.n_samples();
    if n < 2 {
        return Err(Error::InvalidInput(format!("study {study_id}: need at least 2 samples, got {n}")));
    }
    if residuals.len() != n {
        return Err(Error::LengthMismatch(format!(
            "study {study_id}: {} residuals for {n} genotyped samples",
            residuals.len()
        )));
    }
    if residuals.is_degenerate() {
        return Err(Error::Degenerate(format!("study {study_id}: trait residuals have zero variance")));
    }
    let mut order: Vec<usize> = (0..genotypes.n_variants()).collect();
    order.sort_by(|&a, &b| genotypes.variants()[a].cmp(&genotypes.variants()[b]));
    if let Some(w) = order
        .windows(2)
        .find(|w| genotypes.variants()[w[0]] == genotypes.variants()[w[1]])
    {
        return Err(Error::InvalidInput(format!(
            "study {study_id}: duplicate variant {}",
            genotypes.variants()[w[0]]
        )));
    }
    let sorted = genotypes.select_columns(&order);
    let qc: Vec<(u64, f64, f64)> = (0..sorted.n_variants())
        .map(|j| {
            let observed = (n - sorted.missing_count(j)) as u64;
            (observed, observed as f64 / n as f64, hwe_from_column(sorted.column(j)))
        })
        .collect();
    let (imputed, mut warnings) = impute_missing(&sorted);
    for w in &mut warnings {
        w.message = format!("study {study_id}: {}", w.message);
    }
    let qc: Vec<_> = qc.into_iter().filter(|q| q.0 > 0).collect();
    let (u, cov) = score_and_covariance(&imputed, residuals.values(), residuals.variance(), window_bp)?;
    let variants = imputed
        .variants()
        .iter()
        .enumerate()
        .map(|(j, key)| {
            let af = imputed.column(j).iter().sum::<f64>() / (2 * n) as f64;
            VariantSummary {
                key: key.clone(),
                n_informative: qc[j].0,
                alt_af: af.clamp(0.0, 1.0),
                call_rate: qc[j].1,
                hwe_p: qc[j].2,
                u: u[j],
            }
        })
        .collect();
    Ok((
        SummaryBlock {
            study_id: study_id.to_string(),
            n_samples: n as u64,
            variants,
            cov,
            trait_mean: residuals.mean(),
            trait_variance: residuals.variance(),
            window_bp,
        },
        warnings,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genotype::MISSING;
    use statrs::function::factorial::ln_factorial;

    fn keys(positions: &[u64]) -> Vec<VariantKey> {
        positions
            .iter()
            .map(|&p| VariantKey::new("1", p, "A", "G").unwrap())
            .collect()
    }

    #[test]
    fn residualize_centers_with_intercept_only() {
        let r = residualize(&[1.0, 2.0, 3.0, 4.0], &CovariateMatrix::intercept_only(4)).unwrap();
        for (a, b) in r.iter().zip([-1.5, -0.5, 0.5, 1.5]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn residualize_matches_normal_equations() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [2.0, 4.0, 5.0, 7.0];
        let cov = CovariateMatrix::new(vec!["x".into()], vec![x.to_vec()], 4).unwrap();
        let r = residualize(&y, &cov).unwrap();
        // normal equations [n Σx; Σx Σx²][a b]ᵀ = [Σy Σxy]ᵀ
        let (n, sx, sxx, sy, sxy): (f64, f64, f64, f64, f64) = (4.0, 10.0, 30.0, 18.0, 53.0);
        let det = n * sxx - sx * sx;
        let b = (n * sxy - sx * sy) / det;
        let a = (sxx * sy - sx * sxy) / det;
        assert!((b - 1.6).abs() < 1e-12 && (a - 0.5).abs() < 1e-12);
        for i in 0..4 {
            assert!((r[i] - (y[i] - a - b * x[i])).abs() < 1e-12);
        }
        assert!(dot(&r, &x).abs() < 1e-8 * 4.0);
    }

    #[test]
    fn residualize_perfect_fit_and_collinearity() {
        let x = vec![0.3, -1.0, 2.0, 5.0];
        let cov = CovariateMatrix::new(vec!["x".into()], vec![x.clone()], 4).unwrap();
        assert!(residualize(&x, &cov).unwrap().iter().all(|r| r.abs() < 1e-12));
        let twice: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let bad = CovariateMatrix::new(vec!["x".into(), "x2".into()], vec![x, twice], 4).unwrap();
        match residualize(&[1.0, 2.0, 3.0, 4.0], &bad) {
            Err(Error::RankDeficient(cols)) => assert_eq!(cols, vec!["x2".to_string()]),
            other => panic!("expected rank deficiency, got {other:?}"),
        }
        assert!(residualize(&[1.0, 2.0], &CovariateMatrix::intercept_only(3)).is_err());
    }

    #[test]
    fn inverse_normal_quantiles() {
        let out = inverse_normal_transform(&[3.0, -1.0, 10.0, 0.5, 7.0]).unwrap();
        let mut sorted = out.clone();
        sorted.sort_by(f64::total_cmp);
        for (a, b) in sorted.iter().zip([-1.2816, -0.5244, 0.0, 0.5244, 1.2816]) {
            assert!((a - b).abs() < 1e-4);
        }
        assert!((out[1] + 1.2816).abs() < 1e-4);
    }

    #[test]
    fn inverse_normal_ties_and_errors() {
        let out = inverse_normal_transform(&[1.0, 3.0, 3.0, 5.0]).unwrap();
        assert_eq!(out[1], out[2]);
        assert!(out[0] < out[1] && out[2] < out[3]);
        assert!(inverse_normal_transform(&[2.0, 2.0]).is_err());
        assert!(inverse_normal_transform(&[2.0]).is_err());
    }

    #[test]
    fn imputation() {
        let g = GenotypeMatrix::from_columns(
            keys(&[1, 2, 3]),
            vec![vec![0.0, MISSING, 2.0, 0.0], vec![1.0, 0.0, 0.0, 1.0], vec![MISSING; 4]],
        )
        .unwrap();
        let (out, warnings) = impute_missing(&g);
        assert_eq!(out.n_variants(), 2);
        assert_eq!(warnings.len(), 1);
        assert_eq!(out.column(0), &[0.0, 2.0 / 3.0, 2.0, 0.0]);
        assert_eq!(out.column(1), g.column(1));
    }

    fn naive(x: &[Vec<f64>], y: &[f64], sigma2: f64) -> (Vec<f64>, Vec<Vec<f64>>) {
        let n = y.len() as f64;
        let means: Vec<f64> = x.iter().map(|c| c.iter().sum::<f64>() / n).collect();
        let u = x
            .iter()
            .zip(&means)
            .map(|(c, m)| c.iter().zip(y).map(|(xi, yi)| (xi - m) * yi).sum())
            .collect();
        let mut v = vec![vec![0.0; x.len()]; x.len()];
        for a in 0..x.len() {
            for b in 0..x.len() {
                for s in 0..y.len() {
                    v[a][b] += (x[a][s] - means[a]) * (x[b][s] - means[b]);
                }
                v[a][b] *= sigma2;
            }
        }
        (u, v)
    }

    #[test]
    fn toy_summary_matches_double_loop() {
        let cols = vec![vec![0.0, 1.0, 0.0, 2.0], vec![1.0, 0.0, 0.0, 1.0]];
        let g = GenotypeMatrix::from_columns(keys(&[100, 200]), cols.clone()).unwrap();
        let y = PhenotypeVector::new(vec![1.0, -1.0, 0.5, -0.5]).unwrap();
        assert!((y.variance() - 0.625).abs() < 1e-15);
        let (block, warnings) = compute_summary("toy", &g, &y, 1_000_000).unwrap();
        assert!(warnings.is_empty());
        assert!((block.variants[0].u + 2.0).abs() < 1e-12);
        assert!((block.variants[1].u - 0.5).abs() < 1e-12);
        let (u, v) = naive(&cols, y.values(), 0.625);
        for a in 0..2 {
            assert!((block.variants[a].u - u[a]).abs() < 1e-12);
            for b in 0..2 {
                assert!((block.cov.get(a, b).unwrap() - v[a][b]).abs() < 1e-12);
            }
        }
        assert!((block.variants[0].alt_af - 3.0 / 8.0).abs() < 1e-15);
        block.validate().unwrap();
    }

    #[test]
    fn zero_trait_gives_zero_statistics() {
        let g = GenotypeMatrix::from_columns(keys(&[1, 2]), vec![vec![0.0, 1.0, 2.0], vec![1.0, 1.0, 0.0]])
            .unwrap();
        let (u, cov) = score_and_covariance(&g, &[0.0; 3], 0.0, 100).unwrap();
        assert!(u.iter().all(|&x| x == 0.0));
        assert!(cov.rows().iter().flatten().all(|&x| x == 0.0));
        let y = PhenotypeVector::new(vec![0.0; 3]).unwrap();
        assert!(compute_summary("s", &g, &y, 100).is_err());
    }

    #[test]
    fn monomorphic_column() {
        let g = GenotypeMatrix::from_columns(keys(&[1, 2]), vec![vec![1.0; 4], vec![0.0, 1.0, 2.0, 0.0]])
            .unwrap();
        let y = PhenotypeVector::new(vec![0.3, -1.0, 2.0, 0.1]).unwrap();
        let (b, _) = compute_summary("s", &g, &y, 10).unwrap();
        assert_eq!(b.variants[0].u, 0.0);
        assert_eq!(b.cov.diag(0), 0.0);
        assert!(b.cov.diag(1) > 0.0);
    }

    #[test]
    fn band_respects_window_and_chromosome() {
        let k = vec![
            VariantKey::new("1", 10, "A", "C").unwrap(),
            VariantKey::new("1", 15, "A", "C").unwrap(),
            VariantKey::new("1", 30, "A", "C").unwrap(),
            VariantKey::new("2", 31, "A", "C").unwrap(),
        ];
        assert_eq!(band_widths(&k, 20), vec![2, 2, 1, 1]);
        assert_eq!(band_widths(&k, 21), vec![3, 2, 1, 1]);
    }

    #[test]
    fn qc_uses_pre_imputation_genotypes() {
        let g = GenotypeMatrix::from_columns(keys(&[5]), vec![vec![0.0, MISSING, 2.0, 0.0]]).unwrap();
        let y = PhenotypeVector::new(vec![1.0, 2.0, 3.0, 5.0]).unwrap();
        let (b, _) = compute_summary("s", &g, &y, 10).unwrap();
        assert_eq!(b.variants[0].n_informative, 3);
        assert!((b.variants[0].call_rate - 0.75).abs() < 1e-15);
        assert!((b.variants[0].hwe_p - hwe_exact_pvalue(2, 0, 1)).abs() < 1e-15);
    }

    fn hwe_oracle(aa: u64, ab: u64, bb: u64) -> f64 {
        let n = aa + ab + bb;
        let na = 2 * aa + ab;
        let nb = 2 * bb + ab;
        let prob = |het: u64| -> f64 {
            let haa = (na - het) / 2;
            let hbb = (nb - het) / 2;
            (ln_factorial(n) - ln_factorial(haa) - ln_factorial(het) - ln_factorial(hbb)
                + het as f64 * 2f64.ln()
                + ln_factorial(na)
                + ln_factorial(nb)
                - ln_factorial(2 * n))
            .exp()
        };
        let hets: Vec<u64> = (0..=na.min(nb)).filter(|h| (na - h) % 2 == 0).collect();
        let obs = prob(ab);
        let total: f64 = hets.iter().map(|&h| prob(h)).sum();
        hets.iter().map(|&h| prob(h)).filter(|&p| p <= obs * (1.0 + 1e-7)).sum::<f64>() / total
    }

    #[test]
    fn hwe_matches_enumeration() {
        assert_eq!(hwe_exact_pvalue(10, 0, 0), 1.0);
        assert!((hwe_exact_pvalue(0, 2, 0) - hwe_oracle(0, 2, 0)).abs() < 1e-12);
        assert!((hwe_exact_pvalue(25, 50, 25) - hwe_oracle(25, 50, 25)).abs() < 1e-10);
        for &(a, b, c) in &[(90, 9, 1), (50, 10, 40), (3, 0, 7), (0, 12, 0), (400, 1, 0)] {
            let p = hwe_exact_pvalue(a, b, c);
            assert!((p - hwe_oracle(a, b, c)).abs() < 1e-10, "{a} {b} {c}");
            assert!(p > 0.0 && p <= 1.0);
        }
    }

    proptest::proptest! {
        #[test]
        fn scores_invariant_to_trait_shift(
            cols in proptest::collection::vec(proptest::collection::vec(0u8..3, 12), 1..5),
            y in proptest::collection::vec(-3.0f64..3.0, 12),
            c in -50.0f64..50.0,
        ) {
            let positions: Vec<u64> = (1..=cols.len() as u64).collect();
            let cols: Vec<Vec<f64>> = cols.iter().map(|c| c.iter().map(|&x| x as f64).collect()).collect();
            let g = GenotypeMatrix::from_columns(keys(&positions), cols.clone()).unwrap();
            let shifted: Vec<f64> = y.iter().map(|v| v + c).collect();
            let (u1, v1) = score_and_covariance(&g, &y, 1.3, 100).unwrap();
            let (u2, _) = score_and_covariance(&g, &shifted, 1.3, 100).unwrap();
            let (un, vn) = naive(&cols, &y, 1.3);
            let scale = un.iter().fold(1.0f64, |m, x| m.max(x.abs()));
            for j in 0..u1.len() {
                proptest::prop_assert!((u1[j] - u2[j]).abs() <= 1e-10 * scale);
                proptest::prop_assert!((u1[j] - un[j]).abs() <= 1e-10 * scale);
                for k in j..u1.len() {
                    proptest::prop_assert!((v1.get(j, k).unwrap() - vn[j][k]).abs() <= 1e-10 * (1.0 + vn[j][j].max(vn[k][k])));
                }
            }
        }
    }
}

//! Conditional scores from shared summaries.
//!
//! Within study `k`, with raw centered Gram blocks `C = V_k / σ̂_k²`:
//!
//! ```text
//! α̂_k  = C_ZZ⁺ U_Z
//! Ũ_k  = U_X − C_XZ α̂_k
//! φ̂²_k = σ̂_k² − U_Zᵀ C_ZZ⁺ U_Z / N_k        (clipped at 0)
//! Ṽ_k  = φ̂²_k (C_XX − C_XZ C_ZZ⁺ C_ZX)
//! ```
//!
//! These are exactly the scores and null covariance obtained by regressing
//! the trait on `Z` and recomputing the scores of `X` on the residuals. The
//! pooled values are `Ũ = Σ Ũ_k` and `Ṽ = Σ Ṽ_k`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result, Warning};
use crate::genetests::{
    burden, skat, GeneScores, GeneTestResult, KernelSpec, TestKind, WeightScheme,
};
use crate::linalg::symmetric_pinv;
use crate::summary::SummaryBlock;
use crate::variant::VariantKey;

/// Eigenvalues of `C_ZZ` at or below this fraction of its largest diagonal
/// entry are dropped from the inverse.
const PINV_CLIP: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConditionalOptions {
    /// Remove conditioning variants from the test set (with a warning).
    pub drop_overlap: bool,
}

impl Default for ConditionalOptions {
    fn default() -> Self {
        Self { drop_overlap: true }
    }
}

/// Per-study regression of the trait on the conditioning variants.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyConditioning {
    pub study_id: String,
    /// Conditioning variants present in this study, in the caller's orientation.
    pub present: Vec<VariantKey>,
    pub alpha_hat: Vec<f64>,
    pub phi2: f64,
    /// `φ̂²` came out negative and was set to 0.
    pub phi2_clipped: bool,
    /// `C_ZZ` was singular and a pseudo-inverse was used.
    pub pinv_clipped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalBlock {
    pub test_variants: Vec<VariantKey>,
    pub cond_variants: Vec<VariantKey>,
    pub u_tilde: DVector<f64>,
    pub v_tilde: DMatrix<f64>,
    pub studies: Vec<StudyConditioning>,
    /// Sample-weighted alternative-allele frequency of each test variant over
    /// the studies that carry it.
    pub alt_af: Vec<f64>,
    pub n_samples: Vec<u64>,
    pub n_total: u64,
}

impl ConditionalBlock {
    /// Conditional scores as a gene for the ordinary tests, keeping variants
    /// with MAF at most `maf_cap` and positive conditional variance.
    pub fn gene_scores(&self, gene: &str, maf_cap: f64) -> GeneScores {
        let mut notes = Vec::new();
        let n_cond = self.cond_variants.len();
        if n_cond > 0 {
            notes.push(format!("conditioned on {n_cond} variants"));
        }
        if self.studies.iter().any(|s| s.phi2_clipped) {
            notes.push("residual variance clipped at zero in some study".into());
        }
        if self.studies.iter().any(|s| s.pinv_clipped) {
            notes.push("singular conditioning Gram matrix; pseudo-inverse used".into());
        }
        GeneScores {
            gene: gene.to_string(),
            keys: self.test_variants.clone(),
            u: self.u_tilde.clone(),
            v: self.v_tilde.clone(),
            alt_af: self.alt_af.clone(),
            n_samples: self.n_samples.clone(),
            n_total: self.n_total,
            maf_cap,
            notes,
        }
        .select(maf_cap)
    }
}

/// Index, sign and key of each requested variant present in `block`.
fn locate(block: &SummaryBlock, keys: &[VariantKey]) -> Vec<(usize, usize, f64)> {
    keys.iter()
        .enumerate()
        .filter_map(|(r, k)| block.find(k).map(|(i, flip)| (r, i, if flip { -1.0 } else { 1.0 })))
        .collect()
}

fn gram_block(
    block: &SummaryBlock,
    rows: &[(usize, usize, f64)],
    cols: &[(usize, usize, f64)],
) -> Result<DMatrix<f64>> {
    let mut m = DMatrix::zeros(rows.len(), cols.len());
    for (a, &(_, i, si)) in rows.iter().enumerate() {
        for (b, &(_, j, sj)) in cols.iter().enumerate() {
            let g = block.gram(i, j).ok_or_else(|| {
                Error::MissingCovariance(block.variants[i].key.to_string(), block.variants[j].key.to_string())
            })?;
            m[(a, b)] = si * sj * g;
        }
    }
    Ok(m)
}

/// Conditions the test variants on `cond` with the default options.
pub fn condition(
    blocks: &[SummaryBlock],
    test: &[VariantKey],
    cond: &[VariantKey],
) -> Result<(ConditionalBlock, Vec<Warning>)> {
    condition_with(blocks, test, cond, &ConditionalOptions::default())
}

pub fn condition_with(
    blocks: &[SummaryBlock],
    test: &[VariantKey],
    cond: &[VariantKey],
    opts: &ConditionalOptions,
) -> Result<(ConditionalBlock, Vec<Warning>)> {
    let mut warnings = Vec::new();
    let mut cond_keys: Vec<VariantKey> = Vec::new();
    for k in cond {
        if !cond_keys.iter().any(|c| c.same_site(k) && c.orientation_of(k).is_some()) {
            cond_keys.push(k.clone());
        }
    }
    let mut test_keys: Vec<VariantKey> = Vec::new();
    for k in test {
        if test_keys.iter().any(|c| c.same_site(k) && c.orientation_of(k).is_some()) {
            continue;
        }
        if opts.drop_overlap && cond_keys.iter().any(|c| c.same_site(k) && c.orientation_of(k).is_some()) {
            warnings.push(Warning::new(k.to_string(), "conditioning variant removed from the test set"));
            continue;
        }
        test_keys.push(k.clone());
    }

    let nx = test_keys.len();
    let mut u_tilde = DVector::zeros(nx);
    let mut v_tilde = DMatrix::zeros(nx, nx);
    let mut af_num = vec![0.0; nx];
    let mut n_samples = vec![0u64; nx];
    let mut studies = Vec::new();
    let mut n_total = 0;
    for block in blocks {
        block.validate()?;
        n_total += block.n_samples;
        let xs = locate(block, &test_keys);
        if xs.is_empty() {
            continue;
        }
        if !(block.trait_variance > 0.0) {
            return Err(Error::Degenerate(format!("study {} has zero trait variance", block.study_id)));
        }
        let zs = locate(block, &cond_keys);
        let u = |loc: &[(usize, usize, f64)]| {
            DVector::from_iterator(loc.len(), loc.iter().map(|&(_, i, s)| s * block.variants[i].u))
        };
        let ux = u(&xs);
        let uz = u(&zs);
        let cxx = gram_block(block, &xs, &xs)?;
        let cxz = gram_block(block, &xs, &zs)?;
        let czz = gram_block(block, &zs, &zs)?;
        let scale = (0..zs.len()).map(|a| czz[(a, a)]).fold(0.0f64, f64::max);
        let (czz_inv, pinv_clipped) = symmetric_pinv(&czz, scale, PINV_CLIP);
        let alpha = &czz_inv * &uz;
        let raw_phi2 = block.trait_variance - uz.dot(&alpha) / block.n_samples as f64;
        let phi2 = raw_phi2.max(0.0);
        if raw_phi2 < 0.0 {
            warnings.push(Warning::new(
                block.study_id.clone(),
                "conditioning variants explain all trait variance; residual variance set to 0",
            ));
        }
        let ut = &ux - &cxz * &alpha;
        let schur = &cxx - &cxz * &czz_inv * cxz.transpose();
        for (a, &(ra, i, _)) in xs.iter().enumerate() {
            u_tilde[ra] += ut[a];
            n_samples[ra] += block.n_samples;
            let af = block.variants[i].alt_af;
            af_num[ra] += block.n_samples as f64 * if xs[a].2 < 0.0 { 1.0 - af } else { af };
            for (b, &(rb, _, _)) in xs.iter().enumerate() {
                v_tilde[(ra, rb)] += phi2 * 0.5 * (schur[(a, b)] + schur[(b, a)]);
            }
        }
        studies.push(StudyConditioning {
            study_id: block.study_id.clone(),
            present: zs.iter().map(|&(r, _, _)| cond_keys[r].clone()).collect(),
            alpha_hat: alpha.iter().copied().collect(),
            phi2,
            phi2_clipped: raw_phi2 < 0.0,
            pinv_clipped,
        });
    }
    let mut keep = Vec::new();
    for (r, k) in test_keys.iter().enumerate() {
        if n_samples[r] == 0 {
            warnings.push(Warning::new(k.to_string(), "test variant absent from every study"));
        } else {
            keep.push(r);
        }
    }
    let block = ConditionalBlock {
        test_variants: keep.iter().map(|&r| test_keys[r].clone()).collect(),
        cond_variants: cond_keys,
        u_tilde: DVector::from_iterator(keep.len(), keep.iter().map(|&r| u_tilde[r])),
        v_tilde: v_tilde.select_rows(&keep).select_columns(&keep),
        studies,
        alt_af: keep.iter().map(|&r| af_num[r] / n_samples[r] as f64).collect(),
        n_samples: keep.iter().map(|&r| n_samples[r]).collect(),
        n_total,
    };
    Ok((block, warnings))
}

/// Burden test on conditional scores.
pub fn conditional_burden(
    cb: &ConditionalBlock,
    gene: &str,
    scheme: &WeightScheme,
    maf_cap: f64,
) -> Result<GeneTestResult> {
    let g = cb.gene_scores(gene, maf_cap);
    let w = scheme.weights(&g)?;
    Ok(burden(&g, &w))
}

/// SKAT on conditional scores, kernel from `scheme`.
pub fn conditional_skat(
    cb: &ConditionalBlock,
    gene: &str,
    scheme: &WeightScheme,
    maf_cap: f64,
) -> Result<GeneTestResult> {
    let g = cb.gene_scores(gene, maf_cap);
    if g.is_empty() {
        return Ok(GeneTestResult::absent(&g, TestKind::Skat, "no qualifying variants"));
    }
    let kernel = KernelSpec::new(scheme.weights(&g)?)?;
    Ok(skat(&g, &kernel))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genotype::GenotypeMatrix;
    use crate::phenotype::PhenotypeVector;
    use crate::summarize::compute_summary;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn keys(positions: &[u64]) -> Vec<VariantKey> {
        positions.iter().map(|&p| VariantKey::new("1", p, "A", "G").unwrap()).collect()
    }

    fn study(id: &str, cols: Vec<Vec<f64>>, y: Vec<f64>, positions: &[u64], window: u64) -> SummaryBlock {
        let g = GenotypeMatrix::from_columns(keys(positions), cols).unwrap();
        compute_summary(id, &g, &PhenotypeVector::new(y).unwrap(), window).unwrap().0
    }

    /// Residuals of each column of `m` after least squares on `[1, z]`.
    fn residuals(m: &DMatrix<f64>, z: &DMatrix<f64>) -> DMatrix<f64> {
        let n = m.nrows();
        let mut d = DMatrix::from_element(n, z.ncols() + 1, 1.0);
        d.columns_mut(1, z.ncols()).copy_from(z);
        let coef = d.clone().svd(true, true).solve(m, 1e-14).unwrap();
        m - d * coef
    }

    fn random_study(seed: u64, n: usize, mafs: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let cols: Vec<Vec<f64>> = mafs
            .iter()
            .map(|&p| (0..n).map(|_| (r.gen::<f64>() < p) as u8 as f64 + (r.gen::<f64>() < p) as u8 as f64).collect())
            .collect();
        let y = (0..n).map(|i| 0.4 * cols[0][i] - 0.3 * cols[2][i] + r.gen::<f64>() * 2.0 - 1.0).collect();
        (cols, y)
    }

    fn close(a: f64, b: f64, rel: f64, scale: f64) -> bool {
        (a - b).abs() <= rel * scale.max(f64::MIN_POSITIVE)
    }

    #[test]
    fn empty_conditioning_set_is_identity() {
        let (cols, y) = random_study(1, 60, &[0.3, 0.2, 0.1]);
        let b = study("a", cols, y, &[100, 200, 300], 1000);
        let x = keys(&[100, 200, 300]);
        let (cb, w) = condition(std::slice::from_ref(&b), &x, &[]).unwrap();
        assert!(w.is_empty());
        for i in 0..3 {
            assert_eq!(cb.u_tilde[i], b.variants[i].u);
            for j in 0..3 {
                assert_eq!(cb.v_tilde[(i, j)], b.cov.get(i, j).unwrap());
            }
        }
        assert_eq!(cb.studies[0].phi2, b.trait_variance);
    }

    #[test]
    fn conditioning_on_itself_annihilates() {
        let (cols, y) = random_study(2, 80, &[0.3, 0.2, 0.25]);
        let b = study("a", cols, y, &[100, 200, 300], 1000);
        let x = keys(&[100, 200]);
        let opts = ConditionalOptions { drop_overlap: false };
        let (cb, _) = condition_with(std::slice::from_ref(&b), &x, &x, &opts).unwrap();
        let scale_u = b.variants[0].u.abs().max(b.variants[1].u.abs());
        let scale_v = b.cov.diag(0).max(b.cov.diag(1));
        for i in 0..2 {
            assert!(cb.u_tilde[i].abs() <= 1e-8 * scale_u, "{}", cb.u_tilde[i]);
            for j in 0..2 {
                assert!(cb.v_tilde[(i, j)].abs() <= 1e-8 * scale_v);
            }
        }
    }

    #[test]
    fn matches_individual_level_residual_regression() {
        let n = 200;
        let (cols, y) = random_study(3, n, &[0.2, 0.15, 0.3]);
        let b = study("a", cols.clone(), y.clone(), &[100, 200, 300], 1000);
        let x = DMatrix::from_fn(n, 2, |i, j| cols[j][i]);
        let z = DMatrix::from_fn(n, 1, |i, _| cols[2][i]);
        let yv = DMatrix::from_column_slice(n, 1, &y);
        let xr = residuals(&x, &z);
        let r = residuals(&yv, &z);
        let phi2 = r.norm_squared() / n as f64;
        let u_oracle = xr.transpose() * &r;
        let v_oracle = xr.transpose() * &xr * phi2;

        let (cb, _) = condition(std::slice::from_ref(&b), &keys(&[100, 200]), &keys(&[300])).unwrap();
        assert!(close(cb.studies[0].phi2, phi2, 1e-8, phi2));
        for i in 0..2 {
            assert!(close(cb.u_tilde[i], u_oracle[i], 1e-8, u_oracle[i].abs()), "{} {}", cb.u_tilde[i], u_oracle[i]);
            for j in 0..2 {
                let s = v_oracle[(i, i)].max(v_oracle[(j, j)]);
                assert!(close(cb.v_tilde[(i, j)], v_oracle[(i, j)], 1e-8, s));
            }
        }
    }

    #[test]
    fn orthogonal_uninformative_conditioning_changes_nothing() {
        // Centered X ⟂ centered Z, and the trait carries no score at Z.
        let xcol = vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0];
        let zcol = vec![0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0];
        let y = vec![1.0, 2.0, 1.0, 2.0, 3.0, 1.0, 3.0, 1.0];
        let b = study("a", vec![xcol, zcol], y, &[100, 200], 1000);
        assert_eq!(b.variants[1].u, 0.0);
        assert_eq!(b.cov.get(0, 1), Some(0.0));
        let (cb, _) = condition(std::slice::from_ref(&b), &keys(&[100]), &keys(&[200])).unwrap();
        assert_eq!(cb.u_tilde[0], b.variants[0].u);
        assert_eq!(cb.v_tilde[(0, 0)], b.cov.diag(0));
        let cond = conditional_burden(&cb, "G", &WeightScheme::Uniform, 0.5).unwrap();
        let g = GeneScores {
            gene: "G".into(),
            keys: keys(&[100]),
            u: DVector::from_element(1, b.variants[0].u),
            v: DMatrix::from_element(1, 1, b.cov.diag(0)),
            alt_af: vec![b.variants[0].alt_af],
            n_samples: vec![8],
            n_total: 8,
            maf_cap: 0.5,
            notes: vec![],
        };
        let plain = burden(&g, &[1.0]);
        assert_eq!(cond.statistic, plain.statistic);
        assert_eq!(cond.p_analytic, plain.p_analytic);
    }

    #[test]
    fn conditioning_outside_the_band_is_an_error() {
        let (cols, y) = random_study(4, 50, &[0.3, 0.2, 0.25]);
        let b = study("a", cols, y, &[100, 200, 5000], 1000);
        let err = condition(std::slice::from_ref(&b), &keys(&[100]), &keys(&[5000])).unwrap_err();
        assert!(matches!(err, Error::MissingCovariance(..)), "{err}");
    }

    #[test]
    fn overlap_is_dropped_with_a_warning() {
        let (cols, y) = random_study(5, 50, &[0.3, 0.2, 0.25]);
        let b = study("a", cols, y, &[100, 200, 300], 1000);
        let (cb, w) = condition(std::slice::from_ref(&b), &keys(&[100, 300]), &keys(&[300])).unwrap();
        assert_eq!(cb.test_variants, keys(&[100]));
        assert_eq!(w.len(), 1);
    }

    #[test]
    fn flipped_conditioning_key_gives_the_same_result() {
        let (cols, y) = random_study(6, 70, &[0.3, 0.2, 0.25]);
        let b = study("a", cols, y, &[100, 200, 300], 1000);
        let z = keys(&[300]);
        let zf = vec![z[0].flipped()];
        let (a, _) = condition(std::slice::from_ref(&b), &keys(&[100, 200]), &z).unwrap();
        let (c, _) = condition(std::slice::from_ref(&b), &keys(&[100, 200]), &zf).unwrap();
        for i in 0..2 {
            assert!((a.u_tilde[i] - c.u_tilde[i]).abs() <= 1e-12 * a.u_tilde[i].abs().max(1.0));
        }
        assert!((&a.v_tilde - &c.v_tilde).abs().max() <= 1e-10 * a.v_tilde.abs().max());
    }

    #[test]
    fn trait_fully_explained_clips_residual_variance() {
        let z: Vec<f64> = (0..20).map(|i| (i % 3) as f64).collect();
        let x: Vec<f64> = (0..20).map(|i| (i % 2) as f64).collect();
        let y: Vec<f64> = z.iter().map(|v| 2.0 * v).collect();
        let b = study("a", vec![x, z], y, &[100, 200], 1000);
        let (cb, _) = condition(std::slice::from_ref(&b), &keys(&[100]), &keys(&[200])).unwrap();
        assert!(cb.studies[0].phi2 <= 1e-9 * b.trait_variance);
        assert!(cb.v_tilde[(0, 0)].abs() <= 1e-8 * b.cov.diag(0));
    }
}

//! Cross-study allele harmonization and pooling of scores and covariances.
//!
//! Pooling treats every study as an independent stratum: scores and
//! covariances add, and a variant missing from a study contributes zero.
//! No cross-study covariance is ever created.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::dist::{chisq1_upper_quantile, two_sided_p};
use crate::error::{Error, Result, Warning};
use crate::formats::{format_real, NA};
use crate::summarize::band_widths;
use crate::summary::{BandedCov, SummaryBlock};
use crate::variant::{cmp_chrom, VariantKey};

/// Median of the chi-square distribution with one degree of freedom.
pub const CHISQ1_MEDIAN: f64 = 0.454936423119572;

#[derive(Debug, Clone, PartialEq)]
pub struct MetaStudy {
    pub id: String,
    pub n_samples: u64,
    pub window_bp: u64,
}

/// One pooled variant.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaVariant {
    pub key: VariantKey,
    /// `Σ 2N_k p_k / Σ 2N_k` over the studies carrying the variant.
    pub alt_af: f64,
    pub n_informative: u64,
    /// `Σ N_k` over the studies carrying the variant.
    pub n_samples: u64,
    pub u: f64,
    /// Indices into [`MetaScoreSet::studies`], ascending.
    pub studies: Vec<usize>,
    /// Studies recorded in `key` orientation and in the flipped orientation.
    votes: [u32; 2],
    /// Whether the earliest contributing study had the flipped orientation.
    first_flipped: bool,
}

impl MetaVariant {
    /// Minor-allele frequency `min(p, 1 - p)`.
    pub fn maf(&self) -> f64 {
        self.alt_af.min(1.0 - self.alt_af)
    }

    /// Estimated minor-allele count `2 · Σ N_k · MAF`.
    pub fn mac(&self) -> f64 {
        2.0 * self.n_samples as f64 * self.maf()
    }
}

/// Pooled scores `U = Σ U_k` and banded covariance `V = Σ V_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaScoreSet {
    pub variants: Vec<MetaVariant>,
    pub cov: BandedCov,
    pub studies: Vec<MetaStudy>,
    pub n_total: u64,
    /// Largest study window; bounds the stored band.
    pub window_bp: u64,
    /// Sites dropped for allele conflicts, kept so later merges drop them too.
    excluded: BTreeSet<(String, u64)>,
}

fn site_cmp(a: &VariantKey, b: &VariantKey) -> std::cmp::Ordering {
    cmp_chrom(&a.chrom, &b.chrom).then(a.pos.cmp(&b.pos))
}

fn site(k: &VariantKey) -> (String, u64) {
    (k.chrom.clone(), k.pos)
}

impl MetaScoreSet {
    /// Pools a single study. Sites carrying more than one record are dropped.
    pub fn from_block(block: &SummaryBlock) -> (Self, Vec<Warning>) {
        let mut warnings = Vec::new();
        let mut excluded = BTreeSet::new();
        let vs = &block.variants;
        let mut keep = Vec::new();
        let mut i = 0;
        while i < vs.len() {
            let mut j = i + 1;
            while j < vs.len() && vs[j].key.same_site(&vs[i].key) {
                j += 1;
            }
            if j - i > 1 {
                warnings.push(Warning::new(
                    block.study_id.clone(),
                    format!(
                        "{} records at {}:{}; site excluded",
                        j - i,
                        vs[i].key.chrom,
                        vs[i].key.pos
                    ),
                ));
                excluded.insert(site(&vs[i].key));
            } else {
                keep.push(i);
            }
            i = j;
        }
        let variants: Vec<MetaVariant> = keep
            .iter()
            .map(|&i| MetaVariant {
                key: vs[i].key.clone(),
                alt_af: vs[i].alt_af,
                n_informative: vs[i].n_informative,
                n_samples: block.n_samples,
                u: vs[i].u,
                studies: vec![0],
                votes: [1, 0],
                first_flipped: false,
            })
            .collect();
        let keys: Vec<VariantKey> = variants.iter().map(|v| v.key.clone()).collect();
        let mut cov = BandedCov::zeros(&band_widths(&keys, block.window_bp));
        let mut pos_of = vec![usize::MAX; vs.len()];
        for (new, &old) in keep.iter().enumerate() {
            pos_of[old] = new;
        }
        for (old, row) in block.cov.rows().iter().enumerate() {
            let a = pos_of[old];
            if a == usize::MAX {
                continue;
            }
            for (d, &value) in row.iter().enumerate() {
                let b = pos_of[old + d];
                if b != usize::MAX {
                    cov.add(a, b, value);
                }
            }
        }
        let set = Self {
            variants,
            cov,
            studies: vec![MetaStudy {
                id: block.study_id.clone(),
                n_samples: block.n_samples,
                window_bp: block.window_bp,
            }],
            n_total: block.n_samples,
            window_bp: block.window_bp,
            excluded,
        };
        (set, warnings)
    }

    pub fn len(&self) -> usize {
        self.variants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variants.is_empty()
    }

    /// Index of `key`'s site and whether `key` is flipped relative to it.
    pub fn find(&self, key: &VariantKey) -> Option<(usize, bool)> {
        let i = self
            .variants
            .binary_search_by(|v| site_cmp(&v.key, key))
            .ok()?;
        key.orientation_of(&self.variants[i].key).map(|f| (i, f))
    }

    /// Whether every study carrying both variants shared their covariance.
    /// Variants with no study in common are independent and always available.
    pub fn pair_available(&self, i: usize, j: usize) -> bool {
        let (a, b) = (&self.variants[i], &self.variants[j]);
        let same_chrom = a.key.chrom == b.key.chrom;
        let dist = a.key.pos.abs_diff(b.key.pos);
        let (mut x, mut y) = (a.studies.iter().peekable(), b.studies.iter().peekable());
        while let (Some(&&s), Some(&&t)) = (x.peek(), y.peek()) {
            match s.cmp(&t) {
                std::cmp::Ordering::Less => {
                    x.next();
                }
                std::cmp::Ordering::Greater => {
                    y.next();
                }
                std::cmp::Ordering::Equal => {
                    if i != j && (!same_chrom || dist >= self.studies[s].window_bp) {
                        return false;
                    }
                    x.next();
                    y.next();
                }
            }
        }
        true
    }

    /// Pooled covariance entry, or an error if some study did not share it.
    pub fn cov_entry(&self, i: usize, j: usize) -> Result<f64> {
        if !self.pair_available(i, j) {
            return Err(Error::MissingCovariance(
                self.variants[i].key.to_string(),
                self.variants[j].key.to_string(),
            ));
        }
        Ok(self.cov.get(i, j).unwrap_or(0.0))
    }

    /// Dense pooled covariance over the given variant indices.
    pub fn dense_cov(&self, indices: &[usize]) -> Result<DMatrix<f64>> {
        let n = indices.len();
        let mut m = DMatrix::zeros(n, n);
        for a in 0..n {
            for b in a..n {
                let v = self.cov_entry(indices[a], indices[b])?;
                m[(a, b)] = v;
                m[(b, a)] = v;
            }
        }
        Ok(m)
    }

    /// Pools two sets; `self`'s studies come first. Equivalent to pooling
    /// all underlying studies at once.
    pub fn merge(&self, other: &MetaScoreSet) -> (MetaScoreSet, Vec<Warning>) {
        let mut warnings = Vec::new();
        let offset = self.studies.len();
        let excluded: BTreeSet<(String, u64)> = self.excluded.union(&other.excluded).cloned().collect();
        let mut excluded_now = excluded.clone();

        // (source index in self, source index in other, output key)
        let mut plan: Vec<(Option<usize>, Option<usize>, MetaVariant)> = Vec::new();
        let (mut i, mut j) = (0, 0);
        let (xs, ys) = (&self.variants, &other.variants);
        while i < xs.len() || j < ys.len() {
            let ord = match (xs.get(i), ys.get(j)) {
                (Some(a), Some(b)) => site_cmp(&a.key, &b.key),
                (Some(_), None) => std::cmp::Ordering::Less,
                _ => std::cmp::Ordering::Greater,
            };
            let (a, b) = match ord {
                std::cmp::Ordering::Less => {
                    i += 1;
                    (Some(i - 1), None)
                }
                std::cmp::Ordering::Greater => {
                    j += 1;
                    (None, Some(j - 1))
                }
                std::cmp::Ordering::Equal => {
                    i += 1;
                    j += 1;
                    (Some(i - 1), Some(j - 1))
                }
            };
            let key = a.map(|a| &xs[a].key).unwrap_or_else(|| &ys[b.unwrap()].key);
            if excluded.contains(&site(key)) {
                continue;
            }
            match (a, b) {
                (Some(a), Some(b)) => match xs[a].key.orientation_of(&ys[b].key) {
                    None => {
                        warnings.push(Warning::new(
                            format!("{}:{}", key.chrom, key.pos),
                            format!(
                                "alleles {}/{} and {}/{} cannot be reconciled; site excluded",
                                xs[a].key.ref_allele, xs[a].key.alt, ys[b].key.ref_allele, ys[b].key.alt
                            ),
                        ));
                        excluded_now.insert(site(key));
                    }
                    Some(flip) => {
                        let (x, y) = (&xs[a], &ys[b]);
                        let yv = if flip { [y.votes[1], y.votes[0]] } else { y.votes };
                        let votes = [x.votes[0] + yv[0], x.votes[1] + yv[1]];
                        let keep_x = votes[0] > votes[1] || (votes[0] == votes[1] && !x.first_flipped);
                        let key = if keep_x { x.key.clone() } else { x.key.flipped() };
                        let sx = if keep_x { 1.0 } else { -1.0 };
                        let sy = if flip { -sx } else { sx };
                        let ax = if keep_x { x.alt_af } else { 1.0 - x.alt_af };
                        let ay = if sy > 0.0 { y.alt_af } else { 1.0 - y.alt_af };
                        let (wx, wy) = (x.n_samples as f64, y.n_samples as f64);
                        let mut studies = x.studies.clone();
                        studies.extend(y.studies.iter().map(|s| s + offset));
                        let out = MetaVariant {
                            key,
                            alt_af: ((wx * ax + wy * ay) / (wx + wy)).clamp(0.0, 1.0),
                            n_informative: x.n_informative + y.n_informative,
                            n_samples: x.n_samples + y.n_samples,
                            u: sx * x.u + sy * y.u,
                            studies,
                            votes: if keep_x { votes } else { [votes[1], votes[0]] },
                            first_flipped: x.first_flipped != !keep_x,
                        };
                        plan.push((Some(a), Some(b), out));
                    }
                },
                (Some(a), None) => plan.push((Some(a), None, xs[a].clone())),
                (None, Some(b)) => {
                    let mut v = ys[b].clone();
                    v.studies.iter_mut().for_each(|s| *s += offset);
                    plan.push((None, Some(b), v));
                }
                (None, None) => unreachable!(),
            }
        }

        let window_bp = self.window_bp.max(other.window_bp);
        let keys: Vec<VariantKey> = plan.iter().map(|p| p.2.key.clone()).collect();
        let mut cov = BandedCov::zeros(&band_widths(&keys, window_bp));
        let mut map_x = vec![(usize::MAX, 1.0); xs.len()];
        let mut map_y = vec![(usize::MAX, 1.0); ys.len()];
        for (n, (a, b, v)) in plan.iter().enumerate() {
            if let Some(a) = a {
                map_x[*a] = (n, if v.key == xs[*a].key { 1.0 } else { -1.0 });
            }
            if let Some(b) = b {
                map_y[*b] = (n, if v.key == ys[*b].key { 1.0 } else { -1.0 });
            }
        }
        for (src, map) in [(self, &map_x), (other, &map_y)] {
            for (r, row) in src.cov.rows().iter().enumerate() {
                let (a, sa) = map[r];
                if a == usize::MAX {
                    continue;
                }
                for (d, &value) in row.iter().enumerate() {
                    let (b, sb) = map[r + d];
                    if b != usize::MAX {
                        cov.add(a, b, sa * sb * value);
                    }
                }
            }
        }
        let variants: Vec<MetaVariant> = plan.into_iter().map(|p| p.2).collect();
        let mut studies = self.studies.clone();
        studies.extend(other.studies.iter().cloned());
        (
            MetaScoreSet {
                variants,
                cov,
                studies,
                n_total: self.n_total + other.n_total,
                window_bp,
                excluded: excluded_now,
            },
            warnings,
        )
    }
}

/// Pools per-study summaries into one score set.
///
/// Variants are matched by site. A study whose alleles are swapped relative
/// to the majority orientation (ties go to the first study carrying the
/// variant) has its score negated, its off-diagonal covariances with other
/// variants negated and its frequency mirrored. Sites whose alleles disagree
/// beyond a swap are dropped with a warning.
pub fn harmonize(blocks: &[SummaryBlock]) -> Result<(MetaScoreSet, Vec<Warning>)> {
    harmonize_sets(
        blocks
            .iter()
            .map(|b| {
                b.validate()?;
                Ok(MetaScoreSet::from_block(b))
            })
            .collect::<Result<Vec<_>>>()?,
    )
}

/// Pools already-pooled sets in order.
pub fn harmonize_sets(sets: Vec<(MetaScoreSet, Vec<Warning>)>) -> Result<(MetaScoreSet, Vec<Warning>)> {
    let mut iter = sets.into_iter();
    let (mut acc, mut warnings) = iter
        .next()
        .ok_or_else(|| Error::InvalidInput("meta-analysis needs at least one study".into()))?;
    for (set, w) in iter {
        warnings.extend(w);
        let (merged, w) = acc.merge(&set);
        warnings.extend(w);
        acc = merged;
    }
    Ok((acc, warnings))
}

/// Single-variant meta-analysis result. Statistic fields are `None` when
/// the pooled variance is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleVariantResult {
    pub key: VariantKey,
    pub n_informative: u64,
    pub alt_af: f64,
    pub u: f64,
    pub v: f64,
    pub t: Option<f64>,
    pub p: Option<f64>,
    /// `U / V`, in trait standard deviations per alternative allele.
    pub beta: Option<f64>,
    pub se: Option<f64>,
}

impl SingleVariantResult {
    pub fn testable(&self) -> bool {
        self.t.is_some()
    }
}

impl SingleVariantResult {
    /// Score test of one variant from its score and null variance.
    pub fn from_score(key: VariantKey, n_informative: u64, alt_af: f64, u: f64, v: f64) -> Self {
        let ok = v > 0.0;
        let t = ok.then(|| u / v.sqrt());
        Self {
            key,
            n_informative,
            alt_af,
            u,
            v,
            t,
            p: t.map(two_sided_p),
            beta: ok.then(|| u / v),
            se: ok.then(|| 1.0 / v.sqrt()),
        }
    }
}

pub fn single_variant_meta(set: &MetaScoreSet) -> Vec<SingleVariantResult> {
    set.variants
        .iter()
        .enumerate()
        .map(|(i, var)| SingleVariantResult::from_score(var.key.clone(), var.n_informative, var.alt_af, var.u, set.cov.diag(i)))
        .collect()
}

/// `median(χ²₁ quantile of each p) / median(χ²₁)`; NaN without finite
/// p-values.
pub fn genomic_control_lambda(p_values: &[f64]) -> f64 {
    let mut stats: Vec<f64> = p_values
        .iter()
        .filter(|p| p.is_finite())
        .map(|&p| chisq1_upper_quantile(p.clamp(0.0, 1.0)))
        .collect();
    if stats.is_empty() {
        return f64::NAN;
    }
    stats.sort_by(f64::total_cmp);
    let n = stats.len();
    let median = if n % 2 == 1 {
        stats[n / 2]
    } else {
        0.5 * (stats[n / 2 - 1] + stats[n / 2])
    };
    median / CHISQ1_MEDIAN
}

/// `CHROM POS REF ALT N AF U V T P BETA SE`, `NA` for untestable fields.
pub fn write_single_variant_results(results: &[SingleVariantResult]) -> String {
    let opt = |x: Option<f64>| x.map_or_else(|| NA.to_string(), format_real);
    let mut s = String::from("CHROM\tPOS\tREF\tALT\tN\tAF\tU\tV\tT\tP\tBETA\tSE\n");
    for r in results {
        writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.key.chrom,
            r.key.pos,
            r.key.ref_allele,
            r.key.alt,
            r.n_informative,
            format_real(r.alt_af),
            format_real(r.u),
            format_real(r.v),
            opt(r.t),
            opt(r.p),
            opt(r.beta),
            opt(r.se)
        )
        .unwrap();
    }
    s
}

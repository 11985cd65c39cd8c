//! Seeded synthetic genotypes and traits.
//!
//! Sites are independent unless generated as an LD block. Every generator
//! takes an explicit seed and is bit-reproducible.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::genotype::GenotypeMatrix;
use crate::variant::VariantKey;

/// Demographic model of the reference coalescent simulations. Recorded for
/// completeness; the generators here do not use it.
pub mod demography {
    pub const BOTTLENECK_SIZE: u64 = 75;
    pub const BOTTLENECK_GENERATIONS_AGO: u64 = 3000;
    pub const PRESENT_SIZE: u64 = 1_000_000;
    pub const MIGRATION_RATE: f64 = 5e-4;
    pub const MUTATION_RATE: f64 = 2.5e-8;
}

/// Distribution of per-variant minor-allele frequencies.
#[derive(Debug, Clone, PartialEq)]
pub enum MafSpectrum {
    /// Every variant at this frequency.
    Constant(f64),
    /// Uniform on `[lo, hi]`.
    Uniform { lo: f64, hi: f64 },
    /// Sequencing-like spectrum for a sample of `n`: a fraction
    /// `singleton` at `1/(2n)`, a further `rare` log-uniform up to 1%, the
    /// rest log-uniform on `[1%, 50%]`.
    RareHeavy { singleton: f64, rare: f64 },
}

impl Default for MafSpectrum {
    fn default() -> Self {
        // 49% singletons, 80% below 1%
        MafSpectrum::RareHeavy { singleton: 0.49, rare: 0.31 }
    }
}

impl MafSpectrum {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            MafSpectrum::Constant(p) => (0.0..=0.5).contains(&p),
            MafSpectrum::Uniform { lo, hi } => 0.0 <= lo && lo <= hi && hi <= 0.5,
            MafSpectrum::RareHeavy { singleton, rare } => {
                singleton >= 0.0 && rare >= 0.0 && singleton + rare <= 1.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid MAF spectrum {self:?}")))
        }
    }

    pub fn draw<R: Rng>(&self, n_samples: usize, rng: &mut R) -> f64 {
        let log_uniform = |rng: &mut R, lo: f64, hi: f64| (lo.ln() + rng.gen::<f64>() * (hi / lo).ln()).exp();
        match *self {
            MafSpectrum::Constant(p) => p,
            MafSpectrum::Uniform { lo, hi } => lo + rng.gen::<f64>() * (hi - lo),
            MafSpectrum::RareHeavy { singleton, rare } => {
                let floor = (1.0 / (2.0 * n_samples.max(1) as f64)).min(0.01);
                let u: f64 = rng.gen();
                if u < singleton {
                    floor
                } else if u < singleton + rare {
                    log_uniform(rng, floor, 0.01)
                } else {
                    log_uniform(rng, 0.01, 0.5)
                }
            }
        }
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed for replicate `index`, a splitmix64 step away from `seed`.
pub fn replicate_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `n` biallelic sites on chromosome 1, 100 bp apart from `start`.
pub fn synthetic_keys(n: usize, start: u64) -> Vec<VariantKey> {
    (0..n)
        .map(|j| VariantKey::new("1", start + 100 * j as u64, "A", "G").expect("valid synthetic key"))
        .collect()
}

/// Per-variant frequencies drawn from `spectrum`.
pub fn draw_mafs(spectrum: &MafSpectrum, n_samples: usize, n_variants: usize, seed: u64) -> Result<Vec<f64>> {
    spectrum.validate()?;
    let mut r = rng(seed);
    Ok((0..n_variants).map(|_| spectrum.draw(n_samples, &mut r)).collect())
}

/// Independent `Binomial(2, p_j)` dosages at the given keys.
pub fn gen_genotypes_with(keys: Vec<VariantKey>, mafs: &[f64], n_samples: usize, seed: u64) -> Result<GenotypeMatrix> {
    if keys.len() != mafs.len() {
        return Err(Error::LengthMismatch(format!("{} keys for {} frequencies", keys.len(), mafs.len())));
    }
    if let Some(p) = mafs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::InvalidInput(format!("allele frequency {p} outside [0, 1]")));
    }
    let mut r = rng(seed);
    let columns = mafs
        .iter()
        .map(|&p| {
            let b = Binomial::new(2, p).expect("p checked");
            (0..n_samples).map(|_| b.sample(&mut r) as f64).collect()
        })
        .collect();
    GenotypeMatrix::from_columns(keys, columns)
}

/// `n_variants` independent sites with frequencies from `spectrum`.
pub fn gen_genotypes(n_samples: usize, n_variants: usize, spectrum: &MafSpectrum, seed: u64) -> Result<GenotypeMatrix> {
    let mafs = draw_mafs(spectrum, n_samples, n_variants, replicate_seed(seed, 0))?;
    gen_genotypes_with(synthetic_keys(n_variants, 1000), &mafs, n_samples, replicate_seed(seed, 1))
}

/// One common anchor site followed by rare sites carried on its haplotypes.
///
/// Per haplotype, the anchor allele is `Bernoulli(anchor_maf)`; linked site
/// `j` copies the anchor allele thinned to frequency `linked_mafs[j]`, then
/// each copied allele is flipped with probability `noise`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockLd {
    pub anchor_maf: f64,
    pub linked_mafs: Vec<f64>,
    pub noise: f64,
}

pub fn gen_block_ld(keys: Vec<VariantKey>, ld: &BlockLd, n_samples: usize, seed: u64) -> Result<GenotypeMatrix> {
    if keys.len() != ld.linked_mafs.len() + 1 {
        return Err(Error::LengthMismatch(format!(
            "{} keys for an anchor and {} linked sites",
            keys.len(),
            ld.linked_mafs.len()
        )));
    }
    if !(ld.anchor_maf > 0.0 && ld.anchor_maf <= 1.0)
        || ld.linked_mafs.iter().any(|&q| !(0.0..=ld.anchor_maf).contains(&q))
        || !(0.0..=1.0).contains(&ld.noise)
    {
        return Err(Error::InvalidInput(format!("invalid LD block {ld:?}")));
    }
    let mut r = rng(seed);
    let m = ld.linked_mafs.len();
    let mut columns = vec![vec![0.0; n_samples]; m + 1];
    for i in 0..n_samples {
        for _ in 0..2 {
            let anchor = r.gen::<f64>() < ld.anchor_maf;
            columns[0][i] += anchor as u8 as f64;
            for (j, &q) in ld.linked_mafs.iter().enumerate() {
                let mut allele = anchor && r.gen::<f64>() < q / ld.anchor_maf;
                if r.gen::<f64>() < ld.noise {
                    allele = !allele;
                }
                columns[j + 1][i] += allele as u8 as f64;
            }
        }
    }
    GenotypeMatrix::from_columns(keys, columns)
}

/// Per-variant effect sizes in trait standard-deviation units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EffectMode {
    Fixed { delta: f64 },
    /// `+delta` with probability `fraction_positive`, else `-delta`.
    Mixed { delta: f64, fraction_positive: f64 },
    Random { mean: f64, sd: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhenoModel {
    pub causal_fraction: f64,
    /// Only variants with sample MAF below this may be causal.
    pub maf_restriction: Option<f64>,
    pub effect: EffectMode,
    pub seed: u64,
}

impl PhenoModel {
    /// No genetic effect: the trait is standard normal noise.
    pub fn null(seed: u64) -> Self {
        Self {
            causal_fraction: 1.0,
            maf_restriction: None,
            effect: EffectMode::Fixed { delta: 0.0 },
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        let effect_ok = match self.effect {
            EffectMode::Fixed { delta } => delta.is_finite(),
            EffectMode::Mixed { delta, fraction_positive } => {
                delta.is_finite() && (0.0..=1.0).contains(&fraction_positive)
            }
            EffectMode::Random { mean, sd } => mean.is_finite() && sd.is_finite() && sd >= 0.0,
        };
        if !(self.causal_fraction > 0.0 && self.causal_fraction <= 1.0) || !effect_ok {
            return Err(Error::InvalidInput(format!("invalid phenotype model {self:?}")));
        }
        if let Some(m) = self.maf_restriction {
            if !(m > 0.0) {
                return Err(Error::InvalidInput(format!("MAF restriction {m} must be positive")));
            }
        }
        Ok(())
    }
}

/// Causal variants and their effects.
#[derive(Debug, Clone, PartialEq)]
pub struct Effects {
    pub causal: Vec<usize>,
    pub betas: Vec<f64>,
}

/// Picks `round(fraction · eligible)` causal variants (at least one) among
/// those whose MAF is below the restriction, uniformly without replacement.
pub fn draw_effects(mafs: &[f64], model: &PhenoModel) -> Result<Effects> {
    model.validate()?;
    let eligible: Vec<usize> = (0..mafs.len())
        .filter(|&j| model.maf_restriction.map_or(true, |m| mafs[j].min(1.0 - mafs[j]) < m))
        .collect();
    if eligible.is_empty() {
        return Err(Error::InvalidInput("no variant satisfies the MAF restriction".into()));
    }
    let mut r = rng(replicate_seed(model.seed, 0));
    let k = ((model.causal_fraction * eligible.len() as f64).round() as usize).clamp(1, eligible.len());
    let mut causal: Vec<usize> = sample(&mut r, eligible.len(), k).into_iter().map(|i| eligible[i]).collect();
    causal.sort_unstable();
    let betas = causal
        .iter()
        .map(|_| match model.effect {
            EffectMode::Fixed { delta } => delta,
            EffectMode::Mixed { delta, fraction_positive } => {
                if r.gen::<f64>() < fraction_positive {
                    delta
                } else {
                    -delta
                }
            }
            EffectMode::Random { mean, sd } => Normal::new(mean, sd).expect("sd checked").sample(&mut r),
        })
        .collect();
    Ok(Effects { causal, betas })
}

/// `Y_i = Σ_j β_j X_ij + ε_i`, `ε ~ N(0, 1)`.
pub fn apply_effects(g: &GenotypeMatrix, effects: &Effects, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    let mut y: Vec<f64> = (0..g.n_samples()).map(|_| StandardNormal.sample(&mut r)).collect();
    for (&j, &b) in effects.causal.iter().zip(&effects.betas) {
        for (yi, x) in y.iter_mut().zip(g.column(j)) {
            *yi += b * x;
        }
    }
    y
}

/// A generated trait with the effects that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedTrait {
    pub values: Vec<f64>,
    pub effects: Effects,
}

pub fn gen_trait(g: &GenotypeMatrix, model: &PhenoModel) -> Result<SimulatedTrait> {
    let mafs: Vec<f64> = g.column_means().iter().map(|m| m / 2.0).collect();
    let effects = draw_effects(&mafs, model)?;
    let values = apply_effects(g, &effects, replicate_seed(model.seed, 1));
    Ok(SimulatedTrait { values, effects })
}

pub fn gen_phenotypes(g: &GenotypeMatrix, model: &PhenoModel) -> Result<Vec<f64>> {
    gen_trait(g, model).map(|t| t.values)
}

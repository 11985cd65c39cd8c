//! Synthetic studies sharing one set of genes, frequencies and effects.

use raremeta::datagen::{
    apply_effects, draw_effects, draw_mafs, gen_genotypes_with, replicate_seed, synthetic_keys, EffectMode, Effects,
    MafSpectrum, PhenoModel,
};
use raremeta::formats::{write_genotypes, write_group_file, write_phenotypes, GroupDefinition, PhenotypeTable};

use crate::args::{Effect, SimulateArgs};
use crate::io::{data, with_suffix, write, Failure, Log, Outcome};

/// Genes start this far apart so no covariance band spans two genes.
const GENE_SPACING_BP: u64 = 2_000_000;

pub fn simulate(a: &SimulateArgs, log: &mut Log) -> Outcome<()> {
    if a.studies == 0 || a.genes == 0 || a.variants == 0 {
        return Err(Failure::Usage("--studies, --genes and --variants must be positive".into()));
    }
    let sizes = match a.samples.len() {
        1 => vec![a.samples[0]; a.studies],
        n if n == a.studies => a.samples.clone(),
        n => return Err(Failure::Usage(format!("{n} sample sizes for {} studies", a.studies))),
    };
    if sizes.iter().any(|&n| n < 2) {
        return Err(Failure::Usage("each study needs at least 2 samples".into()));
    }
    let effect = match a.effect {
        Effect::Fixed => EffectMode::Fixed { delta: a.delta },
        Effect::Mixed => EffectMode::Mixed { delta: a.delta, fraction_positive: a.fraction_positive },
        Effect::Random => EffectMode::Random { mean: a.delta, sd: a.effect_sd },
    };
    let total: usize = sizes.iter().sum();
    let spectrum = MafSpectrum::default();

    let mut keys = Vec::new();
    let mut mafs = Vec::new();
    let mut effects = Effects { causal: Vec::new(), betas: Vec::new() };
    let mut groups = Vec::new();
    for gene in 0..a.genes {
        let gene_keys = synthetic_keys(a.variants, 1_000_000 + gene as u64 * GENE_SPACING_BP);
        let gene_mafs = draw_mafs(&spectrum, total, a.variants, replicate_seed(a.seed, 3 * gene as u64)).map_err(data)?;
        let model = PhenoModel {
            causal_fraction: a.causal_fraction,
            maf_restriction: a.maf_restriction,
            effect,
            seed: replicate_seed(a.seed, 3 * gene as u64 + 1),
        };
        let e = draw_effects(&gene_mafs, &model).map_err(|e| Failure::Usage(e.to_string()))?;
        let offset = keys.len();
        effects.causal.extend(e.causal.iter().map(|j| j + offset));
        effects.betas.extend(e.betas);
        groups.push(GroupDefinition::new(format!("GENE{}", gene + 1), gene_keys.clone()).map_err(data)?);
        keys.extend(gene_keys);
        mafs.extend(gene_mafs);
    }

    for (k, &n) in sizes.iter().enumerate() {
        let study = k as u64 + 1;
        let g = gen_genotypes_with(keys.clone(), &mafs, n, replicate_seed(a.seed, 1 << 32 | 2 * study)).map_err(data)?;
        let y = apply_effects(&g, &effects, replicate_seed(a.seed, 1 << 32 | (2 * study + 1)));
        let ids: Vec<String> = (1..=n).map(|i| format!("S{study}_{i}")).collect();
        let table = PhenotypeTable {
            sample_ids: ids.clone(),
            trait_name: "TRAIT".into(),
            trait_values: y,
            covariate_names: Vec::new(),
            covariates: Vec::new(),
        };
        write(&with_suffix(&a.out, &format!(".study{study}.geno.tsv")), &write_genotypes(&g, &ids))?;
        write(&with_suffix(&a.out, &format!(".study{study}.pheno.tsv")), &write_phenotypes(&table))?;
    }
    write(&with_suffix(&a.out, ".groups.tsv"), &write_group_file(&groups))?;
    log.note(format!(
        "{} studies, {} genes x {} variants, {} causal variants",
        a.studies,
        a.genes,
        a.variants,
        effects.causal.len()
    ));
    Ok(())
}

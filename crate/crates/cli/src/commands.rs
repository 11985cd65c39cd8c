use std::path::Path;

use rayon::prelude::*;

use raremeta::conditional::condition;
use raremeta::formats::{
    parse_genotypes, parse_group_file, parse_phenotypes, parse_summary, write_cov_file, write_gene_table,
    write_score_file, GenotypeFormat, GroupDefinition,
};
use raremeta::genetests::{GeneScores, TestKind, WeightScheme};
use raremeta::meta::{genomic_control_lambda, harmonize, single_variant_meta, write_single_variant_results, SingleVariantResult};
use raremeta::montecarlo::McConfig;
use raremeta::summarize::{compute_summary, inverse_normal_transform, residualize, CovariateMatrix};
use raremeta::{Error, PhenotypeVector, SummaryBlock, VariantKey, Warning};

use crate::args::{Cli, Command, CondArgs, MetaArgs, SummarizeArgs, Weights};
use crate::genes::{run_gene, TestPlan};
use crate::io::{data, data_at, read, with_suffix, write, Failure, Log, Outcome};
use crate::simulate::simulate;

pub fn run(cli: Cli) -> Outcome<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Usage(format!("cannot start {n} threads: {e}")))?;
    }
    let (prefix, mut log) = (out_prefix(&cli.command).to_path_buf(), Log::default());
    let result = match cli.command {
        Command::Summarize(a) => summarize(&a, &mut log),
        Command::Meta(a) => meta(&a, None, &mut log),
        Command::Cond(a) => cond(&a, &mut log),
        Command::Simulate(a) => simulate(&a, &mut log),
    };
    if let Err(Failure::Data(msg)) = &result {
        log.note(format!("error: {msg}"));
    }
    if !matches!(result, Err(Failure::Usage(_))) {
        write(&with_suffix(&prefix, ".log"), &log.render())?;
    }
    result
}

fn out_prefix(c: &Command) -> &Path {
    match c {
        Command::Summarize(a) => &a.out,
        Command::Meta(a) => &a.out,
        Command::Cond(a) => &a.meta.out,
        Command::Simulate(a) => &a.out,
    }
}

fn summarize(a: &SummarizeArgs, log: &mut Log) -> Outcome<()> {
    let geno_text = read(&a.genotypes)?;
    let (g, ids) = parse_genotypes(&geno_text, GenotypeFormat::detect(&geno_text)).map_err(data_at(&a.genotypes))?;
    let table = parse_phenotypes(&read(&a.phenotypes)?).map_err(data_at(&a.phenotypes))?;
    let study = a.study.clone().unwrap_or_else(|| default_study(&a.genotypes));

    let mut rows = Vec::with_capacity(ids.len());
    for id in &ids {
        let r = table.sample_ids.iter().position(|s| s == id).ok_or_else(|| {
            Failure::Data(format!("{}: genotyped sample {id} has no phenotype row", a.phenotypes.display()))
        })?;
        rows.push(r);
    }
    let unused = table.sample_ids.len() - rows.len();
    if unused > 0 {
        log.warn(&Warning::new(study.clone(), format!("{unused} phenotyped samples without genotypes ignored")));
    }
    let raw: Vec<f64> = rows.iter().map(|&r| table.trait_values[r]).collect();
    let columns = table.covariates.iter().map(|c| rows.iter().map(|&r| c[r]).collect()).collect();
    let covariates = CovariateMatrix::new(table.covariate_names.clone(), columns, rows.len()).map_err(data)?;
    let mut residuals = residualize(&raw, &covariates).map_err(data)?;
    if a.inverse_normal {
        residuals = inverse_normal_transform(&residuals).map_err(data)?;
    }
    let pv = PhenotypeVector::new(residuals).map_err(data)?;
    let (block, warnings) = compute_summary(&study, &g, &pv, a.window).map_err(data)?;
    log.warn_all(&warnings);
    log.note(format!("study {study}: {} samples, {} variants", block.n_samples, block.len()));
    write(&with_suffix(&a.out, ".score.tsv"), &write_score_file(&block))?;
    write(&with_suffix(&a.out, ".cov.tsv"), &write_cov_file(&block))
}

fn default_study(path: &Path) -> String {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    match name.split('.').next() {
        Some(s) if !s.is_empty() => s.to_string(),
        _ => "study".to_string(),
    }
}

struct Inputs {
    blocks: Vec<SummaryBlock>,
    groups: Option<Vec<GroupDefinition>>,
    plan: TestPlan,
}

fn load(a: &MetaArgs) -> Outcome<Inputs> {
    if a.scores.is_empty() {
        return Err(Failure::Usage("no input studies; pass at least one file with --scores".into()));
    }
    if !a.covs.is_empty() && a.covs.len() != a.scores.len() {
        return Err(Failure::Usage(format!(
            "{} covariance files for {} score files",
            a.covs.len(),
            a.scores.len()
        )));
    }
    let mut tests = Vec::new();
    for t in &a.tests {
        let kind: TestKind = t.parse().map_err(|e: Error| Failure::Usage(e.to_string()))?;
        if !tests.contains(&kind) {
            tests.push(kind);
        }
    }
    if tests.is_empty() {
        return Err(Failure::Usage("select at least one test with --tests".into()));
    }
    if a.maf_cap.is_empty() || a.maf_cap.iter().any(|c| !(*c > 0.0 && *c <= 0.5)) {
        return Err(Failure::Usage("--maf-cap values must lie in (0, 0.5]".into()));
    }
    let mc = if a.empirical {
        let cfg = McConfig {
            target_exceedances: a.exceedances,
            max_draws: a.max_draws,
            seed: a.seed,
            batch: McConfig::default().batch.min(a.max_draws.max(1)),
        };
        cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
        Some(cfg)
    } else {
        None
    };
    let plan = TestPlan {
        tests,
        maf_caps: a.maf_cap.clone(),
        scheme: match a.weights {
            Weights::Uniform => WeightScheme::Uniform,
            Weights::Mb => WeightScheme::MadsenBrowning,
        },
        mc,
        seed: a.seed,
    };

    let mut blocks = Vec::with_capacity(a.scores.len());
    for (i, score_path) in a.scores.iter().enumerate() {
        let scores = read(score_path)?;
        let block = match a.covs.get(i) {
            Some(cov_path) => {
                let covs = read(cov_path)?;
                parse_summary(&scores, Some(&covs))
                    .map_err(|e| Failure::Data(format!("{} / {}: {e}", score_path.display(), cov_path.display())))?
            }
            None => parse_summary(&scores, None).map_err(data_at(score_path))?,
        };
        blocks.push(block);
    }
    let groups = match &a.groups {
        Some(p) => Some(parse_group_file(&read(p)?).map_err(data_at(p))?),
        None => None,
    };
    Ok(Inputs { blocks, groups, plan })
}

fn parse_condition(keys: &[String]) -> Outcome<Vec<VariantKey>> {
    let keys = keys
        .iter()
        .filter(|k| !k.trim().is_empty())
        .map(|k| k.parse::<VariantKey>().map_err(|e| Failure::Usage(e.to_string())))
        .collect::<Outcome<Vec<_>>>()?;
    if keys.is_empty() {
        return Err(Failure::Usage("--condition needs at least one variant".into()));
    }
    Ok(keys)
}

fn cond(a: &CondArgs, log: &mut Log) -> Outcome<()> {
    let z = parse_condition(&a.condition)?;
    meta(&a.meta, Some(&z), log)
}

/// Unconditional when `z` is `None`.
fn meta(a: &MetaArgs, z: Option<&[VariantKey]>, log: &mut Log) -> Outcome<()> {
    let inputs = load(a)?;
    let (set, warnings) = harmonize(&inputs.blocks).map_err(data)?;
    log.warn_all(&warnings);
    log.note(format!("{} studies, {} pooled variants", inputs.blocks.len(), set.len()));

    let single = match z {
        None => single_variant_meta(&set),
        Some(z) => conditional_single(&inputs.blocks, &set, z, log)?,
    };
    let ps: Vec<f64> = single.iter().filter_map(|r| r.p).collect();
    if !ps.is_empty() {
        log.note(format!("genomic control lambda: {}", genomic_control_lambda(&ps)));
    }
    write(&with_suffix(&a.out, ".single.tsv"), &write_single_variant_results(&single))?;

    let Some(groups) = &inputs.groups else {
        return Ok(());
    };
    let blocks = &inputs.blocks;
    let plan = &inputs.plan;
    let per_gene: Vec<_> = groups
        .par_iter()
        .map(|group| match z {
            None => (run_gene(plan, &group.gene, |cap| GeneScores::from_meta(&set, group, cap), Some(blocks)), Vec::new()),
            Some(z) => match condition(blocks, &group.members, z) {
                Ok((cb, w)) => (run_gene(plan, &group.gene, |cap| Ok(cb.gene_scores(&group.gene, cap)), None), w),
                Err(e) => {
                    let w = vec![Warning::new(group.gene.clone(), format!("conditioning failed: {e}"))];
                    let err = e.to_string();
                    (run_gene(plan, &group.gene, |_| Err(Error::InvalidInput(err.clone())), None), w)
                }
            },
        })
        .collect();
    let mut rows = Vec::new();
    for (r, w) in per_gene {
        log.warn_all(&w);
        rows.extend(r);
    }
    write(&with_suffix(&a.out, ".genes.tsv"), &write_gene_table(&rows))
}

/// Each pooled variant outside `z`, conditioned on `z` separately. Variants
/// whose covariance with `z` is not shared in some study are skipped.
fn conditional_single(
    blocks: &[SummaryBlock],
    set: &raremeta::meta::MetaScoreSet,
    z: &[VariantKey],
    log: &mut Log,
) -> Outcome<Vec<SingleVariantResult>> {
    let mut out = Vec::new();
    let mut skipped = 0usize;
    for var in &set.variants {
        if z.iter().any(|k| k.same_site(&var.key) && k.orientation_of(&var.key).is_some()) {
            continue;
        }
        match condition(blocks, std::slice::from_ref(&var.key), z) {
            Ok((cb, w)) => {
                log.warn_all(&w);
                if cb.test_variants.is_empty() {
                    continue;
                }
                out.push(SingleVariantResult::from_score(
                    var.key.clone(),
                    var.n_informative,
                    cb.alt_af[0],
                    cb.u_tilde[0],
                    cb.v_tilde[(0, 0)],
                ));
            }
            Err(Error::MissingCovariance(..)) => skipped += 1,
            Err(e) => return Err(data(e)),
        }
    }
    if skipped > 0 {
        log.note(format!(
            "{skipped} variants skipped: covariance with the conditioning variants is not shared"
        ));
    }
    Ok(out)
}

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "raremeta", version, about = "Rare-variant meta-analysis from shared summary statistics")]
pub struct Cli {
    /// Worker threads for gene-level tests (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute one study's score and covariance files.
    Summarize(SummarizeArgs),
    /// Pool study summaries; single-variant and gene-level tests.
    Meta(MetaArgs),
    /// As `meta`, conditioning on given variants.
    Cond(CondArgs),
    /// Write synthetic studies and a matching group file.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct SummarizeArgs {
    /// Dosage table (CHROM POS REF ALT sample...) or VCF.
    #[arg(long)]
    pub genotypes: PathBuf,

    /// SAMPLE, trait, then optional covariate columns.
    #[arg(long)]
    pub phenotypes: PathBuf,

    /// Study label (default: genotype file name up to the first dot).
    #[arg(long)]
    pub study: Option<String>,

    /// Covariance band width in base pairs.
    #[arg(long, default_value_t = raremeta::DEFAULT_WINDOW_BP)]
    pub window: u64,

    /// Rank-based inverse normal transform of the trait residuals.
    #[arg(long)]
    pub inverse_normal: bool,

    /// Output prefix; writes <prefix>.score.tsv, <prefix>.cov.tsv, <prefix>.log.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Weights {
    Uniform,
    /// Madsen-Browning frequency weights.
    Mb,
}

#[derive(Debug, Args)]
pub struct MetaArgs {
    /// Score files, one per study.
    #[arg(long, num_args = 1..)]
    pub scores: Vec<PathBuf>,

    /// Covariance files, in the same order as --scores.
    #[arg(long, num_args = 1..)]
    pub covs: Vec<PathBuf>,

    /// Gene group file; gene-level tests are run only when given.
    #[arg(long)]
    pub groups: Option<PathBuf>,

    /// Comma-separated subset of burden, vt, skat, fisher, minp.
    #[arg(long, value_delimiter = ',', default_value = "burden,vt,skat")]
    pub tests: Vec<String>,

    /// Comma-separated MAF cutoffs for variant inclusion.
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.05")]
    pub maf_cap: Vec<f64>,

    #[arg(long, value_enum, default_value_t = Weights::Uniform)]
    pub weights: Weights,

    /// Add Monte-Carlo p-values for burden, VT and SKAT.
    #[arg(long)]
    pub empirical: bool,

    #[arg(long, default_value_t = 40_000_000)]
    pub max_draws: u64,

    /// Stop sampling after this many draws reach the observed statistic.
    #[arg(long, default_value_t = 100)]
    pub exceedances: u64,

    #[arg(long, env = "RAREMETA_SEED", default_value_t = 0)]
    pub seed: u64,

    /// Output prefix; writes <prefix>.single.tsv, <prefix>.genes.tsv, <prefix>.log.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CondArgs {
    /// Comma-separated conditioning variants, chrom:pos:ref:alt.
    #[arg(long, value_delimiter = ',', required = true)]
    pub condition: Vec<String>,

    #[command(flatten)]
    pub meta: MetaArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Effect {
    Fixed,
    /// `+delta` for a fraction of causal variants, `-delta` for the rest.
    Mixed,
    /// Normal effects with mean `delta` and sd `--effect-sd`.
    Random,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 3)]
    pub studies: usize,

    /// Samples per study; one value for all studies or one per study.
    #[arg(long, value_delimiter = ',', default_value = "1000")]
    pub samples: Vec<usize>,

    #[arg(long, default_value_t = 10)]
    pub genes: usize,

    /// Variants per gene.
    #[arg(long, default_value_t = 20)]
    pub variants: usize,

    /// Fraction of each gene's eligible variants that are causal.
    #[arg(long, default_value_t = 0.5)]
    pub causal_fraction: f64,

    /// Effect size in trait standard deviations.
    #[arg(long, default_value_t = 0.125)]
    pub delta: f64,

    #[arg(long, value_enum, default_value_t = Effect::Fixed)]
    pub effect: Effect,

    #[arg(long, default_value_t = 0.8)]
    pub fraction_positive: f64,

    #[arg(long, default_value_t = 0.5)]
    pub effect_sd: f64,

    /// Only variants with MAF below this may be causal.
    #[arg(long)]
    pub maf_restriction: Option<f64>,

    #[arg(long, env = "RAREMETA_SEED", default_value_t = 0)]
    pub seed: u64,

    /// Output prefix; writes <prefix>.study<k>.geno.tsv, <prefix>.study<k>.pheno.tsv
    /// and <prefix>.groups.tsv.
    #[arg(long)]
    pub out: PathBuf,
}

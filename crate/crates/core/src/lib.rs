//! Rare-variant association meta-analysis from shareable summary statistics.
//!
//! Each study reduces its individual-level data to single-variant score
//! statistics, a banded covariance matrix of those scores, allele
//! frequencies and a handful of QC metrics ([`summarize`]). A central analyst
//! pools the per-study summaries ([`meta`]) and builds gene-level burden,
//! variable-threshold and SKAT tests on top of the pooled scores
//! ([`genetests`]), with Monte-Carlo p-values ([`montecarlo`]) and
//! conditional analysis ([`conditional`]) computed from the same summaries.
//!
//! Genotypes are coded as alternative-allele dosages and trait variances use
//! the maximum-likelihood denominator `N` throughout.

pub mod conditional;
pub mod datagen;
pub mod dist;
pub mod error;
pub mod formats;
pub mod genetests;
pub mod genotype;
pub mod linalg;
pub mod meta;
pub mod montecarlo;
pub mod phenotype;
pub mod summarize;
pub mod summary;
pub mod variant;

pub use error::{Error, Result, Warning};
pub use genotype::{GenotypeMatrix, MISSING};
pub use phenotype::PhenotypeVector;
pub use summary::{BandedCov, SummaryBlock, VariantSummary};
pub use variant::{order_variants, VariantKey};

/// Default covariance band width shared by studies, in base pairs.
pub const DEFAULT_WINDOW_BP: u64 = 1_000_000;

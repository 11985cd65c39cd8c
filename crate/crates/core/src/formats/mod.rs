//! Text wire formats: score and covariance files, gene groups, genotypes,
//! phenotypes and result tables.
//!
//! All formats are UTF-8, tab-separated, with `#`-prefixed header lines.
//! Reals are written with 17 significant digits, which round-trips every
//! `f64` exactly; the score and covariance parsers insist on that canonical
//! spelling so that anything they accept is reproduced byte for byte.

mod genotypes;
mod groups;
mod phenotypes;
mod scores;
mod tables;

pub use genotypes::{parse_genotypes, write_genotypes, GenotypeFormat};
pub use groups::{parse_group_file, write_group_file, GroupDefinition};
pub use phenotypes::{parse_phenotypes, write_phenotypes, PhenotypeTable};
pub use scores::{
    assemble_block, parse_cov_file, parse_score_file, parse_summary, write_cov_file,
    write_score_file, CovFile, CovRow, ScoreFile,
};
pub use tables::{write_gene_table, GENE_TABLE_HEADER, NA};

use crate::error::{Error, Result};

/// Canonical spelling of a real: 17 significant digits, scientific notation.
pub fn format_real(x: f64) -> String {
    format!("{x:.16e}")
}

pub(crate) fn parse_canonical_real(field: &str, line: usize, what: &str) -> Result<f64> {
    let v: f64 = field
        .parse()
        .map_err(|_| Error::parse(line, format!("{what}: `{field}` is not a number")))?;
    if format_real(v) != field {
        return Err(Error::parse(
            line,
            format!("{what}: `{field}` is not in canonical form (expected `{}`)", format_real(v)),
        ));
    }
    Ok(v)
}

pub(crate) fn parse_canonical_uint(field: &str, line: usize, what: &str) -> Result<u64> {
    let v: u64 = field
        .parse()
        .map_err(|_| Error::parse(line, format!("{what}: `{field}` is not a non-negative integer")))?;
    if v.to_string() != field {
        return Err(Error::parse(line, format!("{what}: `{field}` is not in canonical form")));
    }
    Ok(v)
}

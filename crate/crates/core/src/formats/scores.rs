//! Score files (one row per variant) and covariance files (one row per
//! anchor variant listing its in-window partners).

use std::fmt::Write as _;

use super::{format_real, parse_canonical_real, parse_canonical_uint};
use crate::error::{Error, Result};
use crate::summary::{BandedCov, SummaryBlock, VariantSummary};
use crate::variant::VariantKey;

const SCORE_COLUMNS: &str = "#CHROM\tPOS\tREF\tALT\tN_INFORMATIVE\tALT_AF\tCALL_RATE\tHWE_P\tU\tSQRT_V";
const COV_COLUMNS: &str = "#CHROM\tPOS\tREF\tALT\tPARTNER_POS\tCOV";

/// Parsed contents of a score file.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreFile {
    pub study_id: String,
    pub n_samples: u64,
    pub trait_mean: f64,
    pub trait_variance: f64,
    pub variants: Vec<VariantSummary>,
    pub sqrt_v: Vec<f64>,
}

/// One covariance-file row: the anchor, its partners' positions (anchor
/// first) and `V(anchor, partner)` for each.
#[derive(Debug, Clone, PartialEq)]
pub struct CovRow {
    pub key: VariantKey,
    pub partners: Vec<u64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovFile {
    pub study_id: String,
    pub window_bp: u64,
    pub rows: Vec<CovRow>,
}

pub fn write_score_file(block: &SummaryBlock) -> String {
    let mut s = String::new();
    writeln!(s, "#STUDY\t{}", block.study_id).unwrap();
    writeln!(s, "#N\t{}", block.n_samples).unwrap();
    writeln!(s, "#TRAIT_MEAN\t{}", format_real(block.trait_mean)).unwrap();
    writeln!(s, "#TRAIT_VAR\t{}", format_real(block.trait_variance)).unwrap();
    writeln!(s, "{SCORE_COLUMNS}").unwrap();
    for (i, v) in block.variants.iter().enumerate() {
        writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            v.key.chrom,
            v.key.pos,
            v.key.ref_allele,
            v.key.alt,
            v.n_informative,
            format_real(v.alt_af),
            format_real(v.call_rate),
            format_real(v.hwe_p),
            format_real(v.u),
            format_real(block.cov.diag(i).sqrt()),
        )
        .unwrap();
    }
    s
}

pub fn write_cov_file(block: &SummaryBlock) -> String {
    let mut s = String::new();
    writeln!(s, "#STUDY\t{}", block.study_id).unwrap();
    writeln!(s, "#WINDOW_BP\t{}", block.window_bp).unwrap();
    writeln!(s, "{COV_COLUMNS}").unwrap();
    for (i, v) in block.variants.iter().enumerate() {
        let row = block.cov.row(i);
        let partners: Vec<String> = (0..row.len())
            .map(|d| block.variants[i + d].key.pos.to_string())
            .collect();
        let values: Vec<String> = row.iter().map(|&x| format_real(x)).collect();
        writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}",
            v.key.chrom,
            v.key.pos,
            v.key.ref_allele,
            v.key.alt,
            partners.join(","),
            values.join(",")
        )
        .unwrap();
    }
    s
}

fn header_value<'a>(line: Option<(usize, &'a str)>, tag: &str, expected_line: usize) -> Result<(usize, &'a str)> {
    let (no, text) = line.ok_or_else(|| Error::parse(expected_line, format!("missing `{tag}` header")))?;
    let rest = text
        .strip_prefix(tag)
        .and_then(|r| r.strip_prefix('\t'))
        .ok_or_else(|| Error::parse(no, format!("expected `{tag}<TAB>value` header")))?;
    if rest.is_empty() || rest.contains('\t') {
        return Err(Error::parse(no, format!("`{tag}` header needs exactly one value")));
    }
    Ok((no, rest))
}

fn parse_key(fields: &[&str], line: usize) -> Result<VariantKey> {
    let pos = parse_canonical_uint(fields[1], line, "POS")?;
    let key = VariantKey::new(fields[0], pos, fields[2], fields[3])
        .map_err(|e| Error::parse(line, e.to_string()))?;
    if key.ref_allele != fields[2] || key.alt != fields[3] {
        return Err(Error::parse(line, "alleles must be upper case"));
    }
    Ok(key)
}

fn numbered(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l))
}

pub fn parse_score_file(text: &str) -> Result<ScoreFile> {
    let mut lines = numbered(text);
    let (_, study_id) = header_value(lines.next(), "#STUDY", 1)?;
    let (no, n) = header_value(lines.next(), "#N", 2)?;
    let n_samples = parse_canonical_uint(n, no, "#N")?;
    let (no, m) = header_value(lines.next(), "#TRAIT_MEAN", 3)?;
    let trait_mean = parse_canonical_real(m, no, "#TRAIT_MEAN")?;
    let (no, v) = header_value(lines.next(), "#TRAIT_VAR", 4)?;
    let trait_variance = parse_canonical_real(v, no, "#TRAIT_VAR")?;
    match lines.next() {
        Some((_, l)) if l == SCORE_COLUMNS => {}
        Some((no, _)) => return Err(Error::parse(no, "expected the score column header")),
        None => return Err(Error::parse(5, "missing score column header")),
    }
    let mut variants = Vec::new();
    let mut sqrt_v = Vec::new();
    for (no, line) in lines {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 10 {
            return Err(Error::parse(no, format!("expected 10 columns, found {}", fields.len())));
        }
        let key = parse_key(&fields, no)?;
        let n_informative = parse_canonical_uint(fields[4], no, "N_INFORMATIVE")?;
        let alt_af = parse_canonical_real(fields[5], no, "ALT_AF")?;
        if !(0.0..=1.0).contains(&alt_af) {
            return Err(Error::parse(no, format!("ALT_AF {alt_af} outside [0, 1]")));
        }
        let call_rate = parse_canonical_real(fields[6], no, "CALL_RATE")?;
        if !(0.0..=1.0).contains(&call_rate) {
            return Err(Error::parse(no, format!("CALL_RATE {call_rate} outside [0, 1]")));
        }
        let hwe_p = parse_canonical_real(fields[7], no, "HWE_P")?;
        if !(hwe_p > 0.0 && hwe_p <= 1.0) {
            return Err(Error::parse(no, format!("HWE_P {hwe_p} outside (0, 1]")));
        }
        let u = parse_canonical_real(fields[8], no, "U")?;
        if !u.is_finite() {
            return Err(Error::parse(no, "U is not finite"));
        }
        let sv = parse_canonical_real(fields[9], no, "SQRT_V")?;
        if !(sv.is_finite() && sv >= 0.0) {
            return Err(Error::parse(no, format!("SQRT_V {sv} is not a non-negative number")));
        }
        variants.push(VariantSummary {
            key,
            n_informative,
            alt_af,
            call_rate,
            hwe_p,
            u,
        });
        sqrt_v.push(sv);
    }
    Ok(ScoreFile {
        study_id: study_id.to_string(),
        n_samples,
        trait_mean,
        trait_variance,
        variants,
        sqrt_v,
    })
}

pub fn parse_cov_file(text: &str) -> Result<CovFile> {
    let mut lines = numbered(text);
    let (_, study_id) = header_value(lines.next(), "#STUDY", 1)?;
    let (no, w) = header_value(lines.next(), "#WINDOW_BP", 2)?;
    let window_bp = parse_canonical_uint(w, no, "#WINDOW_BP")?;
    match lines.next() {
        Some((_, l)) if l == COV_COLUMNS => {}
        Some((no, _)) => return Err(Error::parse(no, "expected the covariance column header")),
        None => return Err(Error::parse(3, "missing covariance column header")),
    }
    let mut rows = Vec::new();
    for (no, line) in lines {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 6 {
            return Err(Error::parse(no, format!("expected 6 columns, found {}", fields.len())));
        }
        let key = parse_key(&fields, no)?;
        let partners = fields[4]
            .split(',')
            .map(|p| parse_canonical_uint(p, no, "PARTNER_POS"))
            .collect::<Result<Vec<_>>>()?;
        let values = fields[5]
            .split(',')
            .map(|v| parse_canonical_real(v, no, "COV"))
            .collect::<Result<Vec<_>>>()?;
        if partners.len() != values.len() {
            return Err(Error::parse(
                no,
                format!("{} partner positions but {} covariance values", partners.len(), values.len()),
            ));
        }
        if partners[0] != key.pos {
            return Err(Error::parse(no, "the first partner must be the anchor itself"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::parse(no, "covariance values must be finite"));
        }
        rows.push(CovRow { key, partners, values });
    }
    Ok(CovFile {
        study_id: study_id.to_string(),
        window_bp,
        rows,
    })
}

/// Joins a score file with its covariance file into a validated block.
///
/// Partners are resolved against the score rows that follow the anchor. A
/// block without a covariance file keeps only the diagonal `SQRT_V²` and a
/// zero window.
pub fn assemble_block(scores: ScoreFile, cov: Option<CovFile>) -> Result<SummaryBlock> {
    let ctx = |msg: String| Error::InvalidInput(format!("study {}: {msg}", scores.study_id));
    let (window_bp, banded) = match cov {
        None => (
            0,
            BandedCov::from_rows(scores.sqrt_v.iter().map(|s| vec![s * s]).collect())?,
        ),
        Some(cov) => {
            if cov.study_id != scores.study_id {
                return Err(ctx(format!("covariance file belongs to study {}", cov.study_id)));
            }
            if cov.rows.len() != scores.variants.len() {
                return Err(ctx(format!(
                    "{} covariance rows for {} score rows",
                    cov.rows.len(),
                    scores.variants.len()
                )));
            }
            let mut rows = Vec::with_capacity(cov.rows.len());
            for (i, (row, v)) in cov.rows.iter().zip(&scores.variants).enumerate() {
                if row.key != v.key {
                    return Err(ctx(format!("covariance row {} does not match score row {}", row.key, v.key)));
                }
                for (d, &p) in row.partners.iter().enumerate() {
                    match scores.variants.get(i + d) {
                        Some(partner) if partner.key.pos == p && partner.key.chrom == v.key.chrom => {}
                        _ => {
                            return Err(ctx(format!(
                                "partner position {p} of {} has no matching score row",
                                v.key
                            )))
                        }
                    }
                }
                if row.values[0].sqrt() != scores.sqrt_v[i] {
                    return Err(ctx(format!("SQRT_V of {} disagrees with its covariance diagonal", v.key)));
                }
                rows.push(row.values.clone());
            }
            (cov.window_bp, BandedCov::from_rows(rows)?)
        }
    };
    let block = SummaryBlock {
        study_id: scores.study_id,
        n_samples: scores.n_samples,
        variants: scores.variants,
        cov: banded,
        trait_mean: scores.trait_mean,
        trait_variance: scores.trait_variance,
        window_bp,
    };
    block.validate()?;
    Ok(block)
}

/// Parses a score file and optional covariance file into a block.
pub fn parse_summary(score_text: &str, cov_text: Option<&str>) -> Result<SummaryBlock> {
    let scores = parse_score_file(score_text)?;
    let cov = cov_text.map(parse_cov_file).transpose()?;
    assemble_block(scores, cov)
}

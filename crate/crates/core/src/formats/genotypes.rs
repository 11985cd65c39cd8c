//! Genotype input: a tabular dosage layout and a minimal VCF subset.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::genotype::{GenotypeMatrix, MISSING};
use crate::variant::VariantKey;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenotypeFormat {
    /// Header `CHROM POS REF ALT id...`, then dosages with `.` for missing.
    Tabular,
    /// VCF 4.x records; only the `GT` field is read.
    Vcf,
}

impl GenotypeFormat {
    /// VCF if the text begins with a `##fileformat=VCF` meta line.
    pub fn detect(text: &str) -> Self {
        if text.starts_with("##fileformat=VCF") {
            GenotypeFormat::Vcf
        } else {
            GenotypeFormat::Tabular
        }
    }
}

/// Returns the genotype matrix (columns in file order) and the sample ids.
pub fn parse_genotypes(text: &str, format: GenotypeFormat) -> Result<(GenotypeMatrix, Vec<String>)> {
    match format {
        GenotypeFormat::Tabular => parse_tabular(text),
        GenotypeFormat::Vcf => parse_vcf(text),
    }
}

fn key_from(fields: &[&str], no: usize) -> Result<VariantKey> {
    let pos = fields[1]
        .parse::<u64>()
        .map_err(|_| Error::parse(no, format!("position `{}` is not an integer", fields[1])))?;
    VariantKey::new(fields[0], pos, fields[2], fields[3]).map_err(|e| Error::parse(no, e.to_string()))
}

fn parse_tabular(text: &str) -> Result<(GenotypeMatrix, Vec<String>)> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l)).filter(|(_, l)| !l.trim().is_empty());
    let (hno, header) = lines.next().ok_or_else(|| Error::parse(1, "missing header row"))?;
    let head: Vec<&str> = header.split('\t').collect();
    if head.len() < 4 || head[0].trim_start_matches('#') != "CHROM" || head[1..4] != ["POS", "REF", "ALT"] {
        return Err(Error::parse(hno, "header must start with CHROM POS REF ALT"));
    }
    let ids: Vec<String> = head[4..].iter().map(|s| s.to_string()).collect();
    let mut keys = Vec::new();
    let mut columns = Vec::new();
    for (no, line) in lines {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != head.len() {
            return Err(Error::parse(
                no,
                format!("expected {} columns, found {}", head.len(), fields.len()),
            ));
        }
        keys.push(key_from(&fields, no)?);
        let col = fields[4..]
            .iter()
            .enumerate()
            .map(|(s, f)| {
                if *f == "." {
                    return Ok(MISSING);
                }
                match f.parse::<f64>() {
                    Ok(x) if (0.0..=2.0).contains(&x) => Ok(x),
                    _ => Err(Error::parse(
                        no,
                        format!("dosage `{f}` for sample {} is not in [0, 2]", ids[s]),
                    )),
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        columns.push(col);
    }
    let g = if columns.is_empty() {
        GenotypeMatrix::empty(ids.len())
    } else {
        GenotypeMatrix::from_columns(keys, columns)?
    };
    Ok((g, ids))
}

fn gt_dosage(gt: &str, no: usize) -> Result<f64> {
    let alleles: Vec<&str> = gt.split(['/', '|']).collect();
    if alleles.len() != 2 {
        return Err(Error::parse(no, format!("genotype `{gt}` is not diploid")));
    }
    let mut dosage = 0.0;
    for a in alleles {
        match a {
            "0" => {}
            "1" => dosage += 1.0,
            "." => return Ok(MISSING),
            _ => return Err(Error::parse(no, format!("unsupported allele index in `{gt}`"))),
        }
    }
    Ok(dosage)
}

fn parse_vcf(text: &str) -> Result<(GenotypeMatrix, Vec<String>)> {
    let mut ids: Option<Vec<String>> = None;
    let mut keys = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let no = i + 1;
        if line.starts_with("##") || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if line.starts_with("#CHROM") {
            if fields.len() < 8 {
                return Err(Error::parse(no, "VCF header has fewer than 8 columns"));
            }
            ids = Some(fields.get(9..).unwrap_or(&[]).iter().map(|s| s.to_string()).collect());
            continue;
        }
        let ids = ids.as_ref().ok_or_else(|| Error::parse(no, "record before the #CHROM header"))?;
        let expected = if ids.is_empty() { 8 } else { 9 + ids.len() };
        if fields.len() != expected && !(ids.is_empty() && fields.len() == 9) {
            return Err(Error::parse(no, format!("expected {expected} columns, found {}", fields.len())));
        }
        if fields[4].contains(',') {
            return Err(Error::parse(no, format!("multi-allelic ALT `{}` is not supported", fields[4])));
        }
        keys.push(key_from(&[fields[0], fields[1], fields[3], fields[4]], no)?);
        if ids.is_empty() {
            columns.push(Vec::new());
            continue;
        }
        let gt_index = fields[8]
            .split(':')
            .position(|f| f == "GT")
            .ok_or_else(|| Error::parse(no, "FORMAT lacks GT"))?;
        let col = fields[9..]
            .iter()
            .map(|sample| match sample.split(':').nth(gt_index) {
                Some(gt) if gt == "." => Ok(MISSING),
                Some(gt) => gt_dosage(gt, no),
                None => Err(Error::parse(no, "sample lacks a GT value")),
            })
            .collect::<Result<Vec<f64>>>()?;
        columns.push(col);
    }
    let ids = ids.ok_or_else(|| Error::parse(1, "missing #CHROM header"))?;
    let g = if keys.is_empty() {
        GenotypeMatrix::empty(ids.len())
    } else {
        GenotypeMatrix::from_columns(keys, columns)?
    };
    Ok((g, ids))
}

/// Writes the tabular layout. Dosages use the shortest exact decimal.
pub fn write_genotypes(g: &GenotypeMatrix, ids: &[String]) -> String {
    let mut s = String::from("CHROM\tPOS\tREF\tALT");
    for id in ids {
        s.push('\t');
        s.push_str(id);
    }
    s.push('\n');
    for (j, key) in g.variants().iter().enumerate() {
        write!(s, "{}\t{}\t{}\t{}", key.chrom, key.pos, key.ref_allele, key.alt).unwrap();
        for &x in g.column(j) {
            if x.is_nan() {
                s.push_str("\t.");
            } else {
                write!(s, "\t{x}").unwrap();
            }
        }
        s.push('\n');
    }
    s
}

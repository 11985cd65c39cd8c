//! Phenotype files: `SAMPLE<TAB>TRAIT[<TAB>covariate...]` with a header row.

use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PhenotypeTable {
    pub sample_ids: Vec<String>,
    pub trait_name: String,
    pub trait_values: Vec<f64>,
    pub covariate_names: Vec<String>,
    /// One column per covariate.
    pub covariates: Vec<Vec<f64>>,
}

pub fn parse_phenotypes(text: &str) -> Result<PhenotypeTable> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l)).filter(|(_, l)| !l.trim().is_empty());
    let (hno, header) = lines.next().ok_or_else(|| Error::parse(1, "missing header row"))?;
    let head: Vec<&str> = header.trim_start_matches('#').split('\t').collect();
    if head.len() < 2 {
        return Err(Error::parse(hno, "header needs SAMPLE and a trait column"));
    }
    let mut table = PhenotypeTable {
        sample_ids: Vec::new(),
        trait_name: head[1].to_string(),
        trait_values: Vec::new(),
        covariate_names: head[2..].iter().map(|s| s.to_string()).collect(),
        covariates: vec![Vec::new(); head.len() - 2],
    };
    for (no, line) in lines {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != head.len() {
            return Err(Error::parse(no, format!("expected {} columns, found {}", head.len(), fields.len())));
        }
        let value = |f: &str| -> Result<f64> {
            f.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse(no, format!("`{f}` is not a finite number")))
        };
        table.sample_ids.push(fields[0].to_string());
        table.trait_values.push(value(fields[1])?);
        for (c, f) in fields[2..].iter().enumerate() {
            table.covariates[c].push(value(f)?);
        }
    }
    Ok(table)
}

pub fn write_phenotypes(table: &PhenotypeTable) -> String {
    let mut s = format!("SAMPLE\t{}", table.trait_name);
    for name in &table.covariate_names {
        write!(s, "\t{name}").unwrap();
    }
    s.push('\n');
    for (i, id) in table.sample_ids.iter().enumerate() {
        write!(s, "{id}\t{}", table.trait_values[i]).unwrap();
        for col in &table.covariates {
            write!(s, "\t{}", col[i]).unwrap();
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_with_covariates() {
        let text = "SAMPLE\tLDL\tage\ns1\t1.25\t40\ns2\t-0.5\t51.5\n";
        let t = parse_phenotypes(text).unwrap();
        assert_eq!(t.trait_values, [1.25, -0.5]);
        assert_eq!(t.covariates, vec![vec![40.0, 51.5]]);
        assert_eq!(write_phenotypes(&t), text);
    }

    #[test]
    fn rejects_non_numeric() {
        assert!(matches!(
            parse_phenotypes("SAMPLE\tY\ns1\tNA\n"),
            Err(Error::Parse { line: 2, .. })
        ));
    }
}

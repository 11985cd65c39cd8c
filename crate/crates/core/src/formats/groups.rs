//! Gene grouping files: `GENE<TAB>key,key,...` per line.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::variant::VariantKey;

/// A gene and its member variants, deduplicated and sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupDefinition {
    pub gene: String,
    pub members: Vec<VariantKey>,
}

impl GroupDefinition {
    pub fn new(gene: impl Into<String>, members: impl IntoIterator<Item = VariantKey>) -> Result<Self> {
        let gene = gene.into();
        let mut members: Vec<VariantKey> = members.into_iter().collect();
        members.sort();
        members.dedup();
        if members.is_empty() {
            return Err(Error::InvalidInput(format!("gene {gene} has no members")));
        }
        Ok(Self { gene, members })
    }
}

/// Blank lines and lines starting with `#` are skipped.
pub fn parse_group_file(text: &str) -> Result<Vec<GroupDefinition>> {
    let mut seen = HashSet::new();
    let mut groups = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let no = i + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (gene, members) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(no, "expected GENE<TAB>members"))?;
        if gene.is_empty() || members.contains('\t') {
            return Err(Error::parse(no, "expected exactly two tab-separated fields"));
        }
        let keys = members
            .split(',')
            .map(|k| k.parse::<VariantKey>().map_err(|e| Error::parse(no, e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        if !seen.insert(gene.to_string()) {
            return Err(Error::parse(no, format!("gene {gene} defined more than once")));
        }
        groups.push(GroupDefinition::new(gene, keys).map_err(|e| Error::parse(no, e.to_string()))?);
    }
    Ok(groups)
}

pub fn write_group_file(groups: &[GroupDefinition]) -> String {
    groups
        .iter()
        .map(|g| {
            let keys: Vec<String> = g.members.iter().map(ToString::to_string).collect();
            format!("{}\t{}\n", g.gene, keys.join(","))
        })
        .collect()
}

//! Variant identity and ordering.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// A biallelic site: chromosome, 1-based position and the two alleles.
///
/// Keys order by `(chrom, pos, ref, alt)`. Chromosome labels that parse as
/// integers sort numerically and ahead of all other labels, which sort
/// lexicographically, so `"2" < "10" < "X" < "Y"`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VariantKey {
    pub chrom: String,
    pub pos: u64,
    pub ref_allele: String,
    pub alt: String,
}

fn valid_allele(a: &str) -> bool {
    !a.is_empty() && a.bytes().all(|b| matches!(b, b'A' | b'C' | b'G' | b'T'))
}

impl VariantKey {
    pub fn new(
        chrom: impl Into<String>,
        pos: u64,
        ref_allele: impl Into<String>,
        alt: impl Into<String>,
    ) -> Result<Self> {
        let chrom = chrom.into();
        let ref_allele = ref_allele.into().to_ascii_uppercase();
        let alt = alt.into().to_ascii_uppercase();
        let key = format!("{chrom}:{pos}:{ref_allele}:{alt}");
        let invalid = |reason: &str| Error::InvalidVariant {
            key: key.clone(),
            reason: reason.to_string(),
        };
        if chrom.is_empty() || chrom.contains(|c: char| c.is_whitespace() || c == ':') {
            return Err(invalid("chromosome label must be non-empty without ':' or whitespace"));
        }
        if pos == 0 {
            return Err(invalid("positions are 1-based"));
        }
        if !valid_allele(&ref_allele) || !valid_allele(&alt) {
            return Err(invalid("alleles must be non-empty ACGT strings"));
        }
        if ref_allele == alt {
            return Err(invalid("reference and alternative alleles are identical"));
        }
        Ok(Self {
            chrom,
            pos,
            ref_allele,
            alt,
        })
    }

    /// The same site with reference and alternative alleles exchanged.
    pub fn flipped(&self) -> Self {
        Self {
            chrom: self.chrom.clone(),
            pos: self.pos,
            ref_allele: self.alt.clone(),
            alt: self.ref_allele.clone(),
        }
    }

    pub fn same_site(&self, other: &VariantKey) -> bool {
        self.pos == other.pos && self.chrom == other.chrom
    }

    /// `Some(false)` if `other` is the same variant, `Some(true)` if it is the
    /// same variant with alleles swapped, `None` otherwise.
    pub fn orientation_of(&self, other: &VariantKey) -> Option<bool> {
        if !self.same_site(other) {
            return None;
        }
        if self.ref_allele == other.ref_allele && self.alt == other.alt {
            Some(false)
        } else if self.ref_allele == other.alt && self.alt == other.ref_allele {
            Some(true)
        } else {
            None
        }
    }
}

/// Chromosome comparison: integers numerically and before everything else.
pub fn cmp_chrom(a: &str, b: &str) -> Ordering {
    match (a.parse::<u64>(), b.parse::<u64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y).then_with(|| a.cmp(b)),
        (Ok(_), Err(_)) => Ordering::Less,
        (Err(_), Ok(_)) => Ordering::Greater,
        (Err(_), Err(_)) => a.cmp(b),
    }
}

impl Ord for VariantKey {
    fn cmp(&self, other: &Self) -> Ordering {
        cmp_chrom(&self.chrom, &other.chrom)
            .then(self.pos.cmp(&other.pos))
            .then_with(|| self.ref_allele.cmp(&other.ref_allele))
            .then_with(|| self.alt.cmp(&other.alt))
    }
}

impl PartialOrd for VariantKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for VariantKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}:{}", self.chrom, self.pos, self.ref_allele, self.alt)
    }
}

impl FromStr for VariantKey {
    type Err = Error;

    /// Parses `chrom:pos:ref:alt`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let invalid = |reason: &str| Error::InvalidVariant {
            key: s.to_string(),
            reason: reason.to_string(),
        };
        if parts.len() != 4 {
            return Err(invalid("expected chrom:pos:ref:alt"));
        }
        let pos = parts[1]
            .parse::<u64>()
            .map_err(|_| invalid("position is not a positive integer"))?;
        VariantKey::new(parts[0], pos, parts[2], parts[3])
    }
}

/// Returns the keys in their total order. Stable and idempotent.
pub fn order_variants(keys: &[VariantKey]) -> Vec<VariantKey> {
    let mut out = keys.to_vec();
    out.sort();
    out
}

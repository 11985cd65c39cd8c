//! Gene-level result table.

use super::format_real;
use crate::genetests::GeneTestResult;

/// Placeholder for a value that could not be computed.
pub const NA: &str = "NA";

pub const GENE_TABLE_HEADER: &str =
    "GENE\tTEST\tN_VARIANTS\tMAF_CUTOFF\tSTAT\tDIRECTION\tP_ANALYTIC\tP_EMPIRICAL\tEXCEEDANCES\tDRAWS\tEFFECT";

/// One row per result, in the given order.
pub fn write_gene_table(results: &[GeneTestResult]) -> String {
    let opt = |x: Option<f64>| x.map_or_else(|| NA.to_string(), format_real);
    let mut out = String::from(GENE_TABLE_HEADER);
    out.push('\n');
    for r in results {
        let fields = [
            r.gene.clone(),
            r.test.to_string(),
            r.n_variants.to_string(),
            format_real(r.maf_cutoff),
            opt(r.statistic),
            r.direction.map_or_else(|| NA.to_string(), |d| d.to_string()),
            opt(r.p_analytic),
            opt(r.p_empirical.map(|e| e.p)),
            r.p_empirical.map_or_else(|| NA.to_string(), |e| e.exceedances.to_string()),
            r.p_empirical.map_or_else(|| NA.to_string(), |e| e.draws.to_string()),
            opt(r.effect),
        ];
        out.push_str(&fields.join("\t"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genetests::{Direction, EmpiricalP, TestKind};

    #[test]
    fn rows_and_placeholders() {
        let ok = GeneTestResult {
            gene: "LPL".into(),
            test: TestKind::Burden,
            statistic: Some(2.0),
            p_analytic: Some(0.0455),
            p_empirical: Some(EmpiricalP { p: 0.05, exceedances: 100, draws: 1999 }),
            maf_cutoff: 0.01,
            direction: Some(Direction::Negative),
            effect: Some(-0.1),
            n_variants: 4,
            diagnostics: vec![],
        };
        let absent = GeneTestResult {
            gene: "APOB".into(),
            test: TestKind::Skat,
            statistic: None,
            p_analytic: None,
            p_empirical: None,
            maf_cutoff: 0.05,
            direction: None,
            effect: None,
            n_variants: 0,
            diagnostics: vec!["no qualifying variants".into()],
        };
        let t = write_gene_table(&[ok, absent]);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines[0], GENE_TABLE_HEADER);
        let a: Vec<&str> = lines[1].split('\t').collect();
        assert_eq!(a[..3], ["LPL", "burden", "4"]);
        assert_eq!(a[5], "-");
        assert_eq!(a[8..10], ["100", "1999"]);
        assert_eq!(lines[2], "APOB\tskat\t0\t5.0000000000000003e-2\tNA\tNA\tNA\tNA\tNA\tNA\tNA");
    }
}

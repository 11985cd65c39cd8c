//! Gene-level tests for one gene across MAF cutoffs and test kinds.

use raremeta::datagen::replicate_seed;
use raremeta::genetests::{
    burden, fisher_burden, gene_seed, minp_burden, skat, vt, with_empirical, GeneScores, GeneTestResult,
    KernelSpec, Statistic, TestKind, VtOptions, WeightScheme,
};
use raremeta::montecarlo::McConfig;
use raremeta::{Result, SummaryBlock};

#[derive(Debug, Clone)]
pub struct TestPlan {
    pub tests: Vec<TestKind>,
    pub maf_caps: Vec<f64>,
    pub scheme: WeightScheme,
    /// Monte-Carlo settings when empirical p-values are requested; the seed
    /// field is replaced per gene and test.
    pub mc: Option<McConfig>,
    pub seed: u64,
}

fn failed(gene: &str, test: TestKind, maf_cap: f64, reason: String) -> GeneTestResult {
    GeneTestResult {
        gene: gene.to_string(),
        test,
        statistic: None,
        p_analytic: None,
        p_empirical: None,
        maf_cutoff: maf_cap,
        direction: None,
        effect: None,
        n_variants: 0,
        diagnostics: vec![reason],
    }
}

/// Rows ordered by cutoff, then by test in plan order. `blocks` is `None`
/// for conditional scores, where the per-study baselines are unavailable.
pub fn run_gene(
    plan: &TestPlan,
    gene: &str,
    scores: impl Fn(f64) -> Result<GeneScores>,
    blocks: Option<&[SummaryBlock]>,
) -> Vec<GeneTestResult> {
    let base_seed = gene_seed(gene, plan.seed);
    let mut rows = Vec::new();
    for (c, &cap) in plan.maf_caps.iter().enumerate() {
        let g = match scores(cap) {
            Ok(g) => g,
            Err(e) => {
                rows.extend(plan.tests.iter().map(|&t| failed(gene, t, cap, e.to_string())));
                continue;
            }
        };
        for (t, &test) in plan.tests.iter().enumerate() {
            let seed = replicate_seed(base_seed, (c * 8 + t) as u64);
            let row = one_test(plan, &g, test, seed, blocks)
                .unwrap_or_else(|e| failed(gene, test, cap, e.to_string()));
            rows.push(row);
        }
    }
    rows
}

fn one_test(
    plan: &TestPlan,
    g: &GeneScores,
    test: TestKind,
    seed: u64,
    blocks: Option<&[SummaryBlock]>,
) -> Result<GeneTestResult> {
    let mc = plan.mc.map(|cfg| McConfig { seed, ..cfg });
    let weights = plan.scheme.weights(g)?;
    let with_mc = |r: GeneTestResult, stat: Statistic<'_>| match &mc {
        Some(cfg) => with_empirical(r, g, stat, cfg),
        None => Ok(r),
    };
    match test {
        TestKind::Burden => with_mc(burden(g, &weights), Statistic::Burden(&weights)),
        TestKind::Vt => {
            let opts = VtOptions { seed, ..VtOptions::default() };
            with_mc(vt(g, &opts), Statistic::Vt(&opts))
        }
        TestKind::Skat => {
            if g.is_empty() {
                return Ok(GeneTestResult::absent(g, test, "no qualifying variants"));
            }
            let kernel = KernelSpec::new(weights)?;
            with_mc(skat(g, &kernel), Statistic::Skat(&kernel))
        }
        TestKind::Fisher | TestKind::MinP => match blocks {
            None => Ok(GeneTestResult::absent(g, test, "per-study baselines need unconditional scores")),
            Some(blocks) if test == TestKind::Fisher => fisher_burden(blocks, g, &weights),
            Some(blocks) => minp_burden(blocks, g, &weights),
        },
    }
}

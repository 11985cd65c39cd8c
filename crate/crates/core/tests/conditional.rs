//! Properties of conditional scores on random multi-study data.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use raremeta::conditional::condition;
use raremeta::linalg::{symmetric_eigen, trace};
use raremeta::summarize::compute_summary;
use raremeta::{GenotypeMatrix, PhenotypeVector, SummaryBlock, VariantKey};

const POSITIONS: [u64; 5] = [100, 200, 300, 400, 500];

fn keys(p: &[u64]) -> Vec<VariantKey> {
    p.iter().map(|&p| VariantKey::new("1", p, "A", "G").unwrap()).collect()
}

fn columns(seed: u64, n: usize) -> Vec<Vec<f64>> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mafs: Vec<f64> = (0..POSITIONS.len()).map(|_| r.gen_range(0.05..0.45)).collect();
    // A shared latent draw induces LD between sites.
    let latent: Vec<f64> = (0..n).map(|_| r.gen::<f64>()).collect();
    mafs.iter()
        .map(|&p| {
            (0..n)
                .map(|i| {
                    let u = if r.gen::<f64>() < 0.5 { latent[i] } else { r.gen::<f64>() };
                    let a = (u < p) as u8;
                    let b = (r.gen::<f64>() < p) as u8;
                    (a + b) as f64
                })
                .collect()
        })
        .collect()
}

fn block(id: &str, cols: Vec<Vec<f64>>, y: Vec<f64>) -> SummaryBlock {
    let g = GenotypeMatrix::from_columns(keys(&POSITIONS), cols).unwrap();
    compute_summary(id, &g, &PhenotypeVector::new(y).unwrap(), 10_000).unwrap().0
}

fn trait_for(cols: &[Vec<f64>], seed: u64) -> Vec<f64> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    (0..cols[0].len())
        .map(|i| 0.5 * cols[3][i] + 0.2 * cols[0][i] + r.gen_range(-1.5..1.5))
        .collect()
}

fn studies(seed: u64, sizes: &[usize]) -> Vec<SummaryBlock> {
    sizes
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let cols = columns(seed * 31 + k as u64, n);
            let y = trait_for(&cols, seed * 37 + k as u64);
            block(&format!("s{k}"), cols, y)
        })
        .collect()
}

fn dense(b: &SummaryBlock, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |a, c| b.cov.get(idx[a], idx[c]).unwrap())
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, &b| a.max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn conditioning_never_increases_variance(seed in 0u64..10_000, n in 30usize..120) {
        let b = studies(seed, &[n]);
        let (cb, _) = condition(&b, &keys(&[100, 200, 300]), &keys(&[400, 500])).unwrap();
        let v = dense(&b[0], &[0, 1, 2]);
        let (eig, _) = symmetric_eigen(&(&v - &cb.v_tilde));
        prop_assert!(eig[0] >= -1e-8 * trace(&v), "{}", eig[0]);
    }

    #[test]
    fn meta_then_condition_equals_sum_of_per_study_conditioning(
        seed in 0u64..10_000,
        sizes in proptest::collection::vec(25usize..80, 1..4),
    ) {
        let b = studies(seed, &sizes);
        let (x, z) = (keys(&[100, 300]), keys(&[200, 400]));
        let (pooled, _) = condition(&b, &x, &z).unwrap();
        let mut u = DVector::zeros(2);
        let mut v = DMatrix::zeros(2, 2);
        for s in &b {
            let (one, _) = condition(std::slice::from_ref(s), &x, &z).unwrap();
            u += one.u_tilde;
            v += one.v_tilde;
        }
        let su = pooled.u_tilde.amax().max(1.0);
        prop_assert!((&pooled.u_tilde - &u).amax() <= 1e-10 * su);
        prop_assert!(max_abs(&(&pooled.v_tilde - &v)) <= 1e-10 * max_abs(&v));
    }

    /// Summaries of the trait already adjusted for Z carry no Z signal, so
    /// conditioning them on Z again reproduces the single conditioning.
    #[test]
    fn conditioning_is_idempotent(seed in 0u64..10_000, n in 40usize..120) {
        let cols = columns(seed, n);
        let y = trait_for(&cols, seed + 1);
        let original = block("s", cols.clone(), y.clone());
        let zd = DMatrix::from_fn(n, 3, |i, c| if c == 0 { 1.0 } else { cols[2 + c][i] });
        let yv = DMatrix::from_column_slice(n, 1, &y);
        let coef = zd.clone().svd(true, true).solve(&yv, 1e-14).unwrap();
        let resid: Vec<f64> = (yv - &zd * coef).iter().copied().collect();
        let adjusted = block("s", cols, resid);

        let (x, z) = (keys(&[100, 200, 300]), keys(&[400, 500]));
        let (once, _) = condition(std::slice::from_ref(&original), &x, &z).unwrap();
        let (twice, _) = condition(std::slice::from_ref(&adjusted), &x, &z).unwrap();
        let su = once.u_tilde.amax().max(1.0);
        prop_assert!((&once.u_tilde - &twice.u_tilde).amax() <= 1e-10 * su);
        prop_assert!(max_abs(&(&once.v_tilde - &twice.v_tilde)) <= 1e-10 * max_abs(&once.v_tilde));
        prop_assert!((once.studies[0].phi2 - twice.studies[0].phi2).abs() <= 1e-10 * once.studies[0].phi2);
    }
}

//! Empirical p-values by sampling score vectors from `MVN(0, V)`.
//!
//! Draws come in fixed-size batches. Batch `b` uses the ChaCha8 stream `b`
//! of the configured seed, so a batch's draws depend only on `(seed, b)`.
//! Batches are evaluated in parallel waves and consumed in index order, which
//! keeps the stopping point and the result independent of the thread count.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::genetests::EmpiricalP;
use crate::linalg::{check_psd, pivoted_cholesky};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    /// Stop once this many draws reach the observed statistic.
    pub target_exceedances: u64,
    pub max_draws: u64,
    pub seed: u64,
    pub batch: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            target_exceedances: 100,
            max_draws: 40_000_000,
            seed: 0,
            batch: 10_000,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.target_exceedances == 0 {
            return Err(Error::InvalidInput("target exceedances must be at least 1".into()));
        }
        if self.batch == 0 || self.max_draws < self.batch {
            return Err(Error::InvalidInput(format!(
                "max draws {} must be at least the batch size {}",
                self.max_draws, self.batch
            )));
        }
        Ok(())
    }
}

const PSD_TOL: f64 = 1e-8;
const RANK_TOL: f64 = 1e-12;

/// `x = L z` with `L` a pivoted Cholesky factor of `V`; directions with no
/// variance are absent from `L` and contribute nothing.
#[derive(Debug, Clone)]
pub struct Sampler {
    factor: DMatrix<f64>,
}

impl Sampler {
    pub fn new(v: &DMatrix<f64>) -> Result<Self> {
        if v.nrows() != v.ncols() {
            return Err(Error::InvalidInput("covariance must be square".into()));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("covariance has non-finite entries".into()));
        }
        check_psd(v, PSD_TOL)?;
        Ok(Self {
            factor: pivoted_cholesky(v, RANK_TOL),
        })
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    pub fn rank(&self) -> usize {
        self.factor.ncols()
    }

    /// Writes one draw into `out`, using `z` as scratch of length `rank`.
    fn draw(&self, rng: &mut ChaCha8Rng, z: &mut [f64], out: &mut [f64]) {
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(rng);
        }
        out.fill(0.0);
        for (k, &zk) in z.iter().enumerate() {
            let col = self.factor.column(k);
            for (o, l) in out.iter_mut().zip(col.iter()) {
                *o += l * zk;
            }
        }
    }

    fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        rng
    }
}

/// `n` draws from `MVN(0, V)`.
pub fn sample_scores(v: &DMatrix<f64>, n: usize, seed: u64) -> Result<Vec<DVector<f64>>> {
    let sampler = Sampler::new(v)?;
    let mut rng = Sampler::rng(seed, 0);
    let mut z = vec![0.0; sampler.rank()];
    let mut out = vec![0.0; sampler.dim()];
    Ok((0..n)
        .map(|_| {
            sampler.draw(&mut rng, &mut z, &mut out);
            DVector::from_column_slice(&out)
        })
        .collect())
}

/// Adaptive empirical p-value `(h + 1) / (n + 1)`, where `h` counts draws with
/// `stat_fn(x) >= observed` among the `n` drawn.
pub fn empirical_pvalue(
    observed: f64,
    stat_fn: &(dyn Fn(&[f64]) -> f64 + Sync),
    v: &DMatrix<f64>,
    cfg: &McConfig,
) -> Result<EmpiricalP> {
    cfg.validate()?;
    if observed.is_nan() {
        return Err(Error::InvalidInput("observed statistic is NaN".into()));
    }
    let sampler = Sampler::new(v)?;
    let n_batches = cfg.max_draws.div_ceil(cfg.batch);
    let wave = rayon::current_num_threads().max(1) as u64;
    let run_batch = |b: u64| -> u64 {
        let size = cfg.batch.min(cfg.max_draws - b * cfg.batch);
        let mut rng = Sampler::rng(cfg.seed, b);
        let mut z = vec![0.0; sampler.rank()];
        let mut out = vec![0.0; sampler.dim()];
        let mut hits = 0;
        for _ in 0..size {
            sampler.draw(&mut rng, &mut z, &mut out);
            if stat_fn(&out) >= observed {
                hits += 1;
            }
        }
        hits
    };
    let (mut hits, mut draws) = (0u64, 0u64);
    let mut next = 0;
    'outer: while next < n_batches {
        let end = (next + wave).min(n_batches);
        let counts: Vec<u64> = (next..end).into_par_iter().map(run_batch).collect();
        for (b, h) in (next..end).zip(counts) {
            hits += h;
            draws += cfg.batch.min(cfg.max_draws - b * cfg.batch);
            if hits >= cfg.target_exceedances {
                break 'outer;
            }
        }
        next = end;
    }
    Ok(EmpiricalP {
        p: (hits + 1) as f64 / (draws + 1) as f64,
        exceedances: hits,
        draws,
    })
}

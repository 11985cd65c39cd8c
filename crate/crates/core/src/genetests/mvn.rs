//! Rectangle probabilities of correlated normals by randomized lattice
//! quasi-Monte-Carlo over Genz's separation-of-variables transform, with
//! mixture importance sampling for small complements.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dist::{normal_cdf, normal_pdf, normal_quantile, normal_sf};
use crate::error::{Error, Result};

/// Largest dimension the integrator accepts.
pub const MAX_DIM: usize = 1000;
const SINGULAR: f64 = 1e-8;
const SHIFTS: usize = 12;
/// Union bounds below this go straight to the mixture estimator.
const MIXTURE_BELOW: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MvnOptions {
    /// Stop once the error estimate is at most this.
    pub abs_tol: f64,
    /// Or once it is at most this fraction of the complement `1 - P`.
    pub rel_tol_complement: f64,
    pub min_points: usize,
    /// Lattice points per random shift, at most.
    pub max_points: usize,
    pub seed: u64,
}

impl Default for MvnOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-5,
            rel_tol_complement: 0.0,
            min_points: 64,
            max_points: 1 << 17,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MvnResult {
    pub probability: f64,
    /// `1 - probability`, estimated directly so small values keep precision.
    pub complement: f64,
    /// Three standard errors of the randomized estimate; 0 when exact.
    pub error: f64,
    pub points: usize,
}

impl MvnResult {
    fn exact(p: f64) -> Self {
        Self {
            probability: p,
            complement: 1.0 - p,
            error: 0.0,
            points: 0,
        }
    }
}

/// `Pr(lower < Z < upper)` for `Z ~ N(0, corr)` with absolute tolerance `tol`.
pub fn mvn_rectangle(lower: &[f64], upper: &[f64], corr: &DMatrix<f64>, tol: f64, seed: u64) -> Result<MvnResult> {
    mvn_rectangle_with(
        lower,
        upper,
        corr,
        &MvnOptions {
            abs_tol: tol,
            seed,
            ..MvnOptions::default()
        },
    )
}

fn tail_mass(lo: f64, hi: f64) -> (f64, f64) {
    let (inside, outside, _) = tails(lo, hi);
    (inside, outside)
}

/// (inside, outside, start) of (lo, hi) under N(0, 1), each computed from
/// tails. `start` is the lower tail below `lo`, or the upper tail above `hi`
/// when `lo > 0`, as [`truncated_quantile`] expects.
fn tails(lo: f64, hi: f64) -> (f64, f64, f64) {
    // a tail of mass at least 1/2 loses nothing to a complement
    let (below, above, inside, start);
    if lo > 0.0 {
        let sf_lo = normal_sf(lo);
        above = normal_sf(hi);
        below = 1.0 - sf_lo;
        (inside, start) = (sf_lo - above, above);
    } else if hi < 0.0 {
        let cdf_hi = normal_cdf(hi);
        below = normal_cdf(lo);
        above = 1.0 - cdf_hi;
        (inside, start) = (cdf_hi - below, below);
    } else {
        below = normal_cdf(lo);
        above = normal_sf(hi);
        (inside, start) = (1.0 - below - above, below);
    }
    (inside.max(0.0), (below + above).min(1.0), start)
}

/// Draw from N(0,1) truncated to (lo, hi) at uniform `w`, by inversion on
/// the tail that keeps precision.
fn truncated_quantile(lo: f64, hi: f64, inside: f64, start: f64, w: f64) -> f64 {
    if lo > 0.0 {
        -normal_quantile(start + (1.0 - w) * inside)
    } else {
        normal_quantile(start + w * inside)
    }
    .clamp(lo.max(-40.0), hi.min(40.0))
}

struct Prepared {
    lower: Vec<f64>,
    upper: Vec<f64>,
    /// Lower-triangular factor in the pivoted order.
    chol: Vec<Vec<f64>>,
    /// Number of leading dimensions with a positive pivot.
    regular: usize,
}

fn prepare(lower: &[f64], upper: &[f64], corr: &DMatrix<f64>) -> Result<std::result::Result<Prepared, f64>> {
    let n = lower.len();
    let mut a = lower.to_vec();
    let mut b = upper.to_vec();
    let mut r = corr.clone();
    let mut c = vec![vec![0.0; n]; n];
    let mut y = vec![0.0; n];
    let mut regular = 0;
    for k in 0..n {
        // pick the remaining variable with the smallest conditional interval mass
        let mut best = None;
        for i in k..n {
            let s: f64 = (0..k).map(|m| c[i][m] * y[m]).sum();
            let d = r[(i, i)] - (0..k).map(|m| c[i][m] * c[i][m]).sum::<f64>();
            if d < -SINGULAR {
                return Err(Error::NotPositiveSemidefinite(d));
            }
            if d <= SINGULAR {
                continue;
            }
            let sd = d.sqrt();
            let (mass, _) = tail_mass((a[i] - s) / sd, (b[i] - s) / sd);
            if best.map_or(true, |(_, m)| mass < m) {
                best = Some((i, mass));
            }
        }
        let Some((p, _)) = best else { break };
        if p != k {
            a.swap(p, k);
            b.swap(p, k);
            c.swap(p, k);
            r.swap_rows(p, k);
            r.swap_columns(p, k);
        }
        let d = r[(k, k)] - (0..k).map(|m| c[k][m] * c[k][m]).sum::<f64>();
        let ckk = d.sqrt();
        c[k][k] = ckk;
        for i in k + 1..n {
            let s = r[(i, k)] - (0..k).map(|m| c[i][m] * c[k][m]).sum::<f64>();
            c[i][k] = s / ckk;
        }
        let s: f64 = (0..k).map(|m| c[k][m] * y[m]).sum();
        let (lo, hi) = ((a[k] - s) / ckk, (b[k] - s) / ckk);
        let (mass, _) = tail_mass(lo, hi);
        y[k] = if mass > 1e-300 {
            (normal_pdf(lo) - normal_pdf(hi)) / mass
        } else if lo > 0.0 {
            lo
        } else if hi < 0.0 {
            hi
        } else {
            0.0
        };
        if mass == 0.0 {
            return Ok(Err(0.0));
        }
        regular += 1;
    }
    // the remaining dimensions are deterministic given the regular ones
    for i in regular..n {
        let d = r[(i, i)] - (0..regular).map(|m| c[i][m] * c[i][m]).sum::<f64>();
        if d < -SINGULAR {
            return Err(Error::NotPositiveSemidefinite(d));
        }
    }
    Ok(Ok(Prepared {
        lower: a,
        upper: b,
        chol: c,
        regular,
    }))
}

impl Prepared {
    /// Integrand at `w` as (inside, outside).
    fn eval(&self, w: &[f64], y: &mut [f64]) -> (f64, f64) {
        let n = self.lower.len();
        let mut product = 1.0;
        let mut log_inside = 0.0;
        for k in 0..n {
            let row = &self.chol[k];
            let s: f64 = row[..k.min(self.regular)].iter().zip(y.iter()).map(|(c, y)| c * y).sum();
            if k >= self.regular {
                if !(self.lower[k] - SINGULAR < s && s < self.upper[k] + SINGULAR) {
                    return (0.0, 1.0);
                }
                continue;
            }
            let ckk = row[k];
            let (lo, hi) = ((self.lower[k] - s) / ckk, (self.upper[k] - s) / ckk);
            let (inside, outside, start) = tails(lo, hi);
            if inside <= 0.0 {
                return (0.0, 1.0);
            }
            product *= inside;
            log_inside += (-outside).ln_1p();
            if k < w.len() {
                y[k] = truncated_quantile(lo, hi, inside, start, w[k]);
            }
        }
        (product, -log_inside.exp_m1())
    }
}

fn primes(count: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(count);
    let mut candidate = 2u64;
    while out.len() < count {
        if out.iter().take_while(|&&p| p * p <= candidate).all(|&p| candidate % p != 0) {
            out.push(candidate);
        }
        candidate += 1;
    }
    out
}

/// As [`mvn_rectangle`] with full control over stopping and randomization.
///
/// Dimensions bounded by `(-∞, ∞)` are dropped; one remaining dimension is
/// evaluated exactly. When the union bound on the complement is small the
/// complement is estimated by mixture importance sampling. Otherwise the
/// estimate averages `SHIFTS` randomly shifted Richtmyer lattices with the
/// tent transform and antithetic pairs, doubling the point count until the
/// tolerance is met, and falls back to the mixture estimate if it is not.
pub fn mvn_rectangle_with(lower: &[f64], upper: &[f64], corr: &DMatrix<f64>, opts: &MvnOptions) -> Result<MvnResult> {
    let n = lower.len();
    if upper.len() != n || corr.nrows() != n || corr.ncols() != n {
        return Err(Error::LengthMismatch(format!(
            "bounds of length {n} and {} with a {}×{} correlation matrix",
            upper.len(),
            corr.nrows(),
            corr.ncols()
        )));
    }
    if lower.iter().zip(upper).any(|(a, b)| a.is_nan() || b.is_nan() || a > b) {
        return Err(Error::InvalidInput("rectangle bounds must satisfy lower <= upper".into()));
    }
    let keep: Vec<usize> = (0..n)
        .filter(|&i| !(lower[i] == f64::NEG_INFINITY && upper[i] == f64::INFINITY))
        .collect();
    if keep.len() > MAX_DIM {
        return Err(Error::DimensionTooLarge(keep.len(), MAX_DIM));
    }
    if keep.is_empty() {
        return Ok(MvnResult::exact(1.0));
    }
    // standardize to unit variances; zero-variance dimensions are indicators at 0
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut idx = Vec::new();
    for &i in &keep {
        let v = corr[(i, i)];
        if v < -SINGULAR {
            return Err(Error::NotPositiveSemidefinite(v));
        }
        if v <= SINGULAR {
            if !(lower[i] < 0.0 && 0.0 < upper[i]) {
                return Ok(MvnResult::exact(0.0));
            }
            continue;
        }
        let sd = v.sqrt();
        a.push(lower[i] / sd);
        b.push(upper[i] / sd);
        idx.push(i);
    }
    let m = idx.len();
    if m == 0 {
        return Ok(MvnResult::exact(1.0));
    }
    let r = DMatrix::from_fn(m, m, |p, q| {
        let (i, j) = (idx[p], idx[q]);
        corr[(i, j)] / (corr[(i, i)] * corr[(j, j)]).sqrt()
    });
    if m == 1 {
        let (inside, outside) = tail_mass(a[0], b[0]);
        return Ok(MvnResult {
            probability: inside,
            complement: outside,
            error: 0.0,
            points: 0,
        });
    }
    let prep = match prepare(&a, &b, &r)? {
        Ok(p) => p,
        Err(p) => return Ok(MvnResult::exact(p)),
    };
    let dims = if prep.regular == m { prep.regular - 1 } else { prep.regular };
    if dims == 0 {
        let mut y = vec![0.0; m];
        let (inside, outside) = prep.eval(&[], &mut y);
        return Ok(MvnResult {
            probability: inside,
            complement: outside,
            error: 0.0,
            points: 1,
        });
    }
    let union: f64 = a.iter().zip(&b).map(|(&lo, &hi)| normal_cdf(lo) + normal_sf(hi)).sum();
    if union < MIXTURE_BELOW {
        return Ok(complement_by_mixture(&prep, opts, opts.max_points * SHIFTS * 2));
    }
    let q: Vec<f64> = primes(dims).iter().map(|&p| (p as f64).sqrt().fract()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let shifts: Vec<Vec<f64>> = (0..SHIFTS).map(|_| (0..dims).map(|_| rng.gen::<f64>()).collect()).collect();
    let mut y = vec![0.0; m];
    let mut w = vec![0.0; dims];
    let mut w_anti = vec![0.0; dims];
    let mut points = opts.min_points.max(1);
    // the lattice is a prefix sequence, so each doubling extends the sums
    let mut sum_in = [0.0; SHIFTS];
    let mut sum_out = [0.0; SHIFTS];
    let mut done_points = 0;
    loop {
        for (s, shift) in shifts.iter().enumerate() {
            for j in done_points + 1..=points {
                for d in 0..dims {
                    let x = (j as f64 * q[d] + shift[d]).fract();
                    let t = (2.0 * x - 1.0).abs();
                    w[d] = t;
                    w_anti[d] = 1.0 - t;
                }
                let (i1, o1) = prep.eval(&w, &mut y);
                let (i2, o2) = prep.eval(&w_anti, &mut y);
                sum_in[s] += 0.5 * (i1 + i2);
                sum_out[s] += 0.5 * (o1 + o2);
            }
        }
        done_points = points;
        let est_in = sum_in.map(|v| v / points as f64);
        let est_out = sum_out.map(|v| v / points as f64);
        let mean_in = est_in.iter().sum::<f64>() / SHIFTS as f64;
        let mean_out = est_out.iter().sum::<f64>() / SHIFTS as f64;
        let var = est_out.iter().map(|e| (e - mean_out).powi(2)).sum::<f64>() / (SHIFTS - 1) as f64;
        let error = 3.0 * (var / SHIFTS as f64).sqrt();
        let done = error <= opts.abs_tol || error <= opts.rel_tol_complement * mean_out;
        if done || points * 2 > opts.max_points {
            let direct = MvnResult {
                probability: mean_in.clamp(0.0, 1.0),
                complement: mean_out.clamp(0.0, 1.0),
                error,
                points: points * SHIFTS * 2,
            };
            if done {
                return Ok(direct);
            }
            let mixed = complement_by_mixture(&prep, opts, opts.max_points * SHIFTS * 2);
            return Ok(if mixed.error < direct.error { mixed } else { direct });
        }
        points *= 2;
    }
}

/// Complement by mixture importance sampling over the violated bounds.
///
/// With `S` the sum of the masses of the `2n` half-spaces outside the
/// rectangle, draw a half-space with probability proportional to its mass,
/// then `Z` conditional on lying in it; `S / N(Z)` is unbiased for the
/// complement, where `N(Z) ≥ 1` counts violated bounds. Its relative
/// variance is bounded however small the complement is.
fn complement_by_mixture(prep: &Prepared, opts: &MvnOptions, max_draws: usize) -> MvnResult {
    let n = prep.lower.len();
    let rank = prep.regular;
    let c = &prep.chol;
    let cov_col = |i: usize| -> Vec<f64> {
        (0..n).map(|j| (0..rank).map(|m| c[j][m] * c[i][m]).sum()).collect()
    };
    // (index, upper side, mass)
    let mut events = Vec::with_capacity(2 * n);
    let mut cols = Vec::with_capacity(n);
    for i in 0..n {
        let col = cov_col(i);
        let sd = col[i].max(0.0).sqrt();
        if sd > SINGULAR {
            if prep.lower[i] > f64::NEG_INFINITY {
                events.push((i, false, normal_cdf(prep.lower[i] / sd)));
            }
            if prep.upper[i] < f64::INFINITY {
                events.push((i, true, normal_sf(prep.upper[i] / sd)));
            }
        }
        cols.push(col);
    }
    let union: f64 = events.iter().map(|e| e.2).sum();
    if union <= 0.0 {
        return MvnResult::exact(1.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x6d69_7874_7572_6521);
    let mut eps = vec![0.0; rank];
    let mut z = vec![0.0; n];
    let (mut sum, mut sum_sq, mut draws) = (0.0, 0.0, 0usize);
    let mut target = 4096.min(max_draws.max(1));
    loop {
        while draws < target {
            let mut u = rng.gen::<f64>() * union;
            let mut pick = events.len() - 1;
            for (e, ev) in events.iter().enumerate() {
                if u < ev.2 {
                    pick = e;
                    break;
                }
                u -= ev.2;
            }
            let (i, up, mass) = events[pick];
            for e in eps.iter_mut() {
                *e = StandardNormal.sample(&mut rng);
            }
            for (j, zj) in z.iter_mut().enumerate() {
                *zj = c[j][..rank].iter().zip(&eps).map(|(a, b)| a * b).sum();
            }
            let var = cols[i][i];
            let sd = var.sqrt();
            // a draw from the chosen tail, then Z shifted to match it
            let w = (1.0 - rng.gen::<f64>()) * mass;
            let zi = if up { -sd * normal_quantile(w) } else { sd * normal_quantile(w) };
            let shift = (zi - z[i]) / var;
            let mut violated = 0usize;
            for j in 0..n {
                let zj = if j == i { zi } else { z[j] + cols[i][j] * shift };
                violated += (zj <= prep.lower[j] || zj >= prep.upper[j]) as usize;
            }
            let x = 1.0 / violated.max(1) as f64;
            sum += x;
            sum_sq += x * x;
            draws += 1;
        }
        let mean = sum / draws as f64;
        let var = (sum_sq / draws as f64 - mean * mean).max(0.0) / (draws - 1).max(1) as f64;
        let complement = (union * mean).min(1.0);
        let error = 3.0 * union * var.sqrt();
        let done = error <= opts.abs_tol || error <= opts.rel_tol_complement * complement;
        if done || target >= max_draws {
            return MvnResult {
                probability: 1.0 - complement,
                complement,
                error,
                points: draws,
            };
        }
        target = (2 * target).min(max_draws);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimension_is_exact() {
        let r = mvn_rectangle(&[-1.96], &[1.96], &DMatrix::identity(1, 1), 1e-6, 1).unwrap();
        assert!((r.probability - 0.950004209703559).abs() < 1e-12);
        assert_eq!(r.error, 0.0);
    }

    #[test]
    fn unbounded_is_one() {
        let inf = f64::INFINITY;
        let corr = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.2, 0.5, 1.0, 0.3, 0.2, 0.3, 1.0]);
        let r = mvn_rectangle(&[-inf; 3], &[inf; 3], &corr, 1e-6, 1).unwrap();
        assert_eq!(r.probability, 1.0);
    }

    #[test]
    fn independent_orthant() {
        let inf = f64::INFINITY;
        let r = mvn_rectangle(&[-inf, -inf], &[0.0, 0.0], &DMatrix::identity(2, 2), 1e-6, 3).unwrap();
        assert!((r.probability - 0.25).abs() < 1e-6);
    }

    #[test]
    fn bivariate_orthant_closed_form() {
        // Pr(Z1 < 0, Z2 < 0) = 1/4 + asin(ρ) / 2π
        let inf = f64::INFINITY;
        for &rho in &[-0.7, 0.3, 0.9] {
            let corr = DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0]);
            let r = mvn_rectangle(&[-inf, -inf], &[0.0, 0.0], &corr, 1e-6, 9).unwrap();
            let exact = 0.25 + f64::asin(rho) / (2.0 * std::f64::consts::PI);
            assert!((r.probability - exact).abs() < 1e-5, "rho={rho}");
            assert!((r.complement - (1.0 - exact)).abs() < 1e-5);
        }
    }

    #[test]
    fn trivariate_equicorrelated_orthant() {
        // Pr(all Z_i < 0) with common ρ = 1/8 + 3 asin(ρ) / 4π
        let inf = f64::INFINITY;
        let rho = 0.5;
        let corr = DMatrix::from_fn(3, 3, |i, j| if i == j { 1.0 } else { rho });
        let r = mvn_rectangle(&[-inf; 3], &[0.0; 3], &corr, 1e-6, 4).unwrap();
        let exact = 0.125 + 3.0 * f64::asin(rho) / (4.0 * std::f64::consts::PI);
        assert!((r.probability - exact).abs() < 1e-5);
    }

    #[test]
    fn perfectly_correlated_reduces_to_one_dimension() {
        let corr = DMatrix::from_element(3, 3, 1.0);
        let r = mvn_rectangle(&[-1.0; 3], &[2.0; 3], &corr, 1e-6, 5).unwrap();
        assert!((r.probability - (normal_cdf(2.0) - normal_cdf(-1.0))).abs() < 1e-10);
    }

    #[test]
    fn small_complement_keeps_relative_precision() {
        let rho = 0.6;
        let corr = DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0]);
        let t = 5.0;
        let opts = MvnOptions {
            abs_tol: 0.0,
            rel_tol_complement: 1e-3,
            seed: 2,
            ..MvnOptions::default()
        };
        let r = mvn_rectangle_with(&[-t, -t], &[t, t], &corr, &opts).unwrap();
        let single = 2.0 * normal_sf(t);
        assert!(r.complement > single && r.complement < 2.0 * single);
        assert!(r.error <= 1e-3 * r.complement * 1.0001);
    }

    #[test]
    fn deterministic_given_seed_and_rejects_bad_input() {
        let corr = DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, 1.0]);
        let a = mvn_rectangle(&[-1.0, -0.5], &[1.0, 2.0], &corr, 1e-4, 11).unwrap();
        let b = mvn_rectangle(&[-1.0, -0.5], &[1.0, 2.0], &corr, 1e-4, 11).unwrap();
        assert_eq!(a, b);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(mvn_rectangle(&[-1.0, -1.0], &[1.0, 1.0], &bad, 1e-4, 0).is_err());
        let big = DMatrix::identity(1001, 1001);
        assert!(matches!(
            mvn_rectangle(&vec![-1.0; 1001], &vec![1.0; 1001], &big, 1e-4, 0),
            Err(Error::DimensionTooLarge(1001, MAX_DIM))
        ));
    }

    /// `Pr(|Z_i| < t ∀i)` for equicorrelated `Z` by one-dimensional Simpson
    /// quadrature over the shared factor.
    fn equicorrelated_box(n: usize, rho: f64, t: f64) -> f64 {
        let steps = 4000;
        let h = 20.0 / steps as f64;
        let f = |x: f64| {
            let (c, s) = (rho.sqrt() * x, (1.0 - rho).sqrt());
            normal_pdf(x) * (normal_cdf((t - c) / s) - normal_cdf((-t - c) / s)).powi(n as i32)
        };
        let mut acc = f(-10.0) + f(10.0);
        for i in 1..steps {
            acc += f(-10.0 + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc * h / 3.0
    }

    #[test]
    fn small_complements_match_quadrature() {
        for &(n, rho, t) in &[(4, 0.0, 3.0), (6, 0.5, 3.2), (10, 0.8, 2.5), (3, 0.3, 4.5)] {
            let corr = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { rho });
            let opts = MvnOptions {
                abs_tol: 0.0,
                rel_tol_complement: 2e-3,
                seed: 4,
                ..MvnOptions::default()
            };
            let r = mvn_rectangle_with(&vec![-t; n], &vec![t; n], &corr, &opts).unwrap();
            let exact = 1.0 - equicorrelated_box(n, rho, t);
            assert!((r.complement - exact).abs() < 4e-3 * exact, "n={n} rho={rho}: {} vs {exact}", r.complement);
        }
    }

    #[test]
    fn one_sided_small_complement() {
        // independent: 1 - Φ(t)^n
        let inf = f64::INFINITY;
        let t = 3.5;
        let r = mvn_rectangle(&[-inf; 5], &[t; 5], &DMatrix::identity(5, 5), 1e-8, 6).unwrap();
        let exact = 1.0 - normal_cdf(t).powi(5);
        assert!((r.complement - exact).abs() < 1e-7, "{} vs {exact}", r.complement);
    }
}

//! Upper tail of `Σ λ_i χ²₁` quadratic forms.
//!
//! The primary method inverts the characteristic function (Davies' algorithm,
//! AS 155); Liu's moment-matching approximation is the fallback.

use std::f64::consts::PI;

use crate::dist::chisq_sf;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailMethod {
    /// Closed form: trivial input or equal weights.
    Exact,
    Davies,
    Liu,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureTail {
    pub p: f64,
    pub method: TailMethod,
    /// Davies fault code when the fallback was used for that reason.
    pub davies_fault: Option<i32>,
}

const DAVIES_ACC: f64 = 1e-9;
const DAVIES_LIM: usize = 1_000_000;
/// Retry limit after a fault; needed by near-degenerate mixtures.
const DAVIES_RETRY_LIM: usize = 10_000_000;
/// Davies results below this are dominated by its absolute accuracy.
const DAVIES_FLOOR: f64 = 1e-8;

/// `Pr(Σ λ_i χ²₁,i > q)`. Non-positive weights are ignored.
pub fn mixture_chisq_tail(lambdas: &[f64], q: f64) -> MixtureTail {
    let lam: Vec<f64> = lambdas.iter().copied().filter(|&l| l > 0.0).collect();
    if q <= 0.0 || lam.is_empty() {
        return MixtureTail {
            p: 1.0,
            method: TailMethod::Exact,
            davies_fault: None,
        };
    }
    let max = lam.iter().copied().fold(0.0f64, f64::max);
    let min = lam.iter().copied().fold(f64::INFINITY, f64::min);
    if max - min <= 1e-12 * max {
        // λ χ²_k
        return MixtureTail {
            p: chisq_sf(lam.len() as f64, q / max),
            method: TailMethod::Exact,
            davies_fault: None,
        };
    }
    let (mut p, mut fault) = davies_tail(&lam, q);
    if fault != 0 {
        (p, fault) = davies_tail_with(&lam, q, DAVIES_RETRY_LIM);
    }
    if fault == 0 && p > DAVIES_FLOOR && p <= 1.0 {
        return MixtureTail {
            p,
            method: TailMethod::Davies,
            davies_fault: None,
        };
    }
    MixtureTail {
        p: liu_tail(&lam, q),
        method: TailMethod::Liu,
        davies_fault: (fault != 0).then_some(fault),
    }
}

/// Davies' upper tail with unit degrees of freedom and no non-centrality.
/// Returns `(p, fault)`; fault 0 means the requested accuracy was reached.
pub fn davies_tail(lambdas: &[f64], q: f64) -> (f64, i32) {
    davies_tail_with(lambdas, q, DAVIES_LIM)
}

fn davies_tail_with(lambdas: &[f64], q: f64, lim: usize) -> (f64, i32) {
    let n = vec![1i32; lambdas.len()];
    let nc = vec![0.0; lambdas.len()];
    let (cdf, fault) = qfc(lambdas, &nc, &n, 0.0, q, lim, DAVIES_ACC);
    (1.0 - cdf, fault)
}

/// Liu, Tang and Zhang's four-cumulant chi-square approximation.
pub fn liu_tail(lambdas: &[f64], q: f64) -> f64 {
    let c: Vec<f64> = (1..=4).map(|k| lambdas.iter().map(|l| l.powi(k)).sum()).collect();
    let s1 = c[2] / c[1].powf(1.5);
    let s2 = c[3] / (c[1] * c[1]);
    let mu_q = c[0];
    let sigma_q = (2.0 * c[1]).sqrt();
    let (a, delta, l) = if s1 * s1 > s2 {
        let a = 1.0 / (s1 - (s1 * s1 - s2).sqrt());
        let delta = s1 * a.powi(3) - a * a;
        (a, delta, a * a - 2.0 * delta)
    } else {
        // central quadratic forms always land here: l = c2³ / c3²
        (1.0 / s1, 0.0, 1.0 / (s1 * s1))
    };
    let mu_x = l + delta;
    let sigma_x = std::f64::consts::SQRT_2 * a;
    let q_star = (q - mu_q) / sigma_q * sigma_x + mu_x;
    if delta == 0.0 {
        chisq_sf(l, q_star)
    } else {
        noncentral_chisq_sf(l, delta, q_star)
    }
}

/// Poisson mixture of central tails; only reached for non-central input.
fn noncentral_chisq_sf(df: f64, nc: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let half = nc / 2.0;
    let mut weight = (-half).exp();
    let mut total = 0.0;
    let mut k = 0.0;
    while k < 10_000.0 {
        total += weight * chisq_sf(df + 2.0 * k, x);
        k += 1.0;
        weight *= half / k;
        if k > half && weight < 1e-17 {
            break;
        }
    }
    total.min(1.0)
}

struct LimitExceeded;

/// State of one AS 155 evaluation.
struct Qf<'a> {
    lb: &'a [f64],
    nc: &'a [f64],
    n: &'a [i32],
    lim: usize,
    count: usize,
    sigsq: f64,
    lmax: f64,
    lmin: f64,
    mean: f64,
    c: f64,
    intl: f64,
    ersm: f64,
    sorted: bool,
    fail: bool,
    th: Vec<usize>,
}

fn exp1(x: f64) -> f64 {
    if x < -50.0 {
        0.0
    } else {
        x.exp()
    }
}

/// `ln(1 + x)` if `first`, else `ln(1 + x) - x`, accurate near 0.
fn log1(x: f64, first: bool) -> f64 {
    if x.abs() > 0.1 {
        if first {
            (1.0 + x).ln()
        } else {
            (1.0 + x).ln() - x
        }
    } else {
        let mut y = x / (2.0 + x);
        let mut term = 2.0 * y * y * y;
        let mut k = 3.0;
        let mut s = if first { 2.0 } else { -x } * y;
        y *= y;
        let mut s1 = s + term / k;
        while s1 != s {
            k += 2.0;
            term *= y;
            s = s1;
            s1 = s + term / k;
        }
        s
    }
}

impl Qf<'_> {
    fn counter(&mut self) -> Result<(), LimitExceeded> {
        self.count += 1;
        if self.count > self.lim {
            Err(LimitExceeded)
        } else {
            Ok(())
        }
    }

    fn order(&mut self) {
        let mut th: Vec<usize> = (0..self.lb.len()).collect();
        th.sort_by(|&a, &b| self.lb[b].abs().total_cmp(&self.lb[a].abs()));
        self.th = th;
        self.sorted = true;
    }

    /// Bound on the tail probability from the mgf; also returns the cutoff.
    fn errbd(&mut self, u: f64) -> Result<(f64, f64), LimitExceeded> {
        self.counter()?;
        let mut xconst = u * self.sigsq;
        let mut sum1 = u * xconst;
        let u = 2.0 * u;
        for j in (0..self.lb.len()).rev() {
            let (nj, lj, ncj) = (self.n[j] as f64, self.lb[j], self.nc[j]);
            let x = u * lj;
            let y = 1.0 - x;
            xconst += lj * (ncj / y + nj) / y;
            sum1 += ncj * (x / y).powi(2) + nj * (x * x / y + log1(-x, false));
        }
        Ok((exp1(-0.5 * sum1), xconst))
    }

    /// Cutoff beyond which the tail mass is below `accx`; `upn` is updated.
    fn ctff(&mut self, accx: f64, upn: &mut f64) -> Result<f64, LimitExceeded> {
        let mut u2 = *upn;
        let mut u1 = 0.0;
        let mut c1 = self.mean;
        let rb = 2.0 * if u2 > 0.0 { self.lmax } else { self.lmin };
        let mut c2;
        loop {
            let (bound, cx) = self.errbd(u2 / (1.0 + u2 * rb))?;
            c2 = cx;
            if bound <= accx {
                break;
            }
            u1 = u2;
            c1 = c2;
            u2 *= 2.0;
        }
        while (c1 - self.mean) / (c2 - self.mean) < 0.9 {
            let u = (u1 + u2) / 2.0;
            let (bound, xconst) = self.errbd(u / (1.0 + u * rb))?;
            if bound > accx {
                u1 = u;
                c1 = xconst;
            } else {
                u2 = u;
                c2 = xconst;
            }
        }
        *upn = u2;
        Ok(c2)
    }

    /// Bound on the integration error from truncating at `u`.
    fn truncation(&mut self, u: f64, tausq: f64) -> Result<f64, LimitExceeded> {
        self.counter()?;
        let mut sum1 = 0.0;
        let mut prod2 = 0.0;
        let mut prod3 = 0.0;
        let mut s = 0.0;
        let sum2 = (self.sigsq + tausq) * u * u;
        let mut prod1 = 2.0 * sum2;
        let u = 2.0 * u;
        for j in 0..self.lb.len() {
            let (lj, ncj, nj) = (self.lb[j], self.nc[j], self.n[j] as f64);
            let x = (u * lj).powi(2);
            sum1 += ncj * x / (1.0 + x);
            if x > 1.0 {
                prod2 += nj * x.ln();
                prod3 += nj * log1(x, true);
                s += nj;
            } else {
                prod1 += nj * log1(x, true);
            }
        }
        sum1 *= 0.5;
        prod2 += prod1;
        prod3 += prod1;
        let x = exp1(-sum1 - 0.25 * prod2) / PI;
        let y = exp1(-sum1 - 0.25 * prod3) / PI;
        let mut err1 = if s == 0.0 { 1.0 } else { x * 2.0 / s };
        let err2 = if prod3 > 1.0 { 2.5 * y } else { 1.0 };
        if err2 < err1 {
            err1 = err2;
        }
        let x = 0.5 * sum2;
        let err2 = if x <= y { 1.0 } else { y / x };
        Ok(err1.min(err2))
    }

    /// Finds `u` with `truncation(u) <= accx` and `truncation(u / 1.2) > accx`.
    fn findu(&mut self, utx: &mut f64, accx: f64) -> Result<(), LimitExceeded> {
        let mut ut = *utx;
        let mut u = ut / 4.0;
        if self.truncation(u, 0.0)? > accx {
            u = ut;
            while self.truncation(u, 0.0)? > accx {
                ut *= 4.0;
                u = ut;
            }
        } else {
            ut = u;
            u /= 4.0;
            while self.truncation(u, 0.0)? <= accx {
                ut = u;
                u /= 4.0;
            }
        }
        for divis in [2.0, 1.4, 1.2, 1.1] {
            let u = ut / divis;
            if self.truncation(u, 0.0)? <= accx {
                ut = u;
            }
        }
        *utx = ut;
        Ok(())
    }

    /// Adds `nterm + 1` terms at step `interv`; the auxiliary pass multiplies
    /// the integrand by `1 - exp(-tausq u² / 2)`.
    fn integrate(&mut self, nterm: usize, interv: f64, tausq: f64, main: bool) {
        let inpi = interv / PI;
        for k in (0..=nterm).rev() {
            let u = (k as f64 + 0.5) * interv;
            let mut sum1 = -2.0 * u * self.c;
            let mut sum2 = sum1.abs();
            let mut sum3 = -0.5 * self.sigsq * u * u;
            for j in (0..self.lb.len()).rev() {
                let nj = self.n[j] as f64;
                let x = 2.0 * self.lb[j] * u;
                let mut y = x * x;
                sum3 -= 0.25 * nj * log1(y, true);
                y = self.nc[j] * x / (1.0 + y);
                let z = nj * x.atan() + y;
                sum1 += z;
                sum2 += z.abs();
                sum3 -= 0.5 * x * y;
            }
            let mut x = inpi * exp1(sum3) / u;
            if !main {
                x *= 1.0 - exp1(-0.5 * tausq * u * u);
            }
            self.intl += (0.5 * sum1).sin() * x;
            self.ersm += 0.5 * sum2 * x;
        }
    }

    /// Coefficient of `tausq` in the error of the convergence factor at `x`.
    fn cfe(&mut self, x: f64) -> Result<f64, LimitExceeded> {
        const LOG28: f64 = 0.0866;
        self.counter()?;
        if !self.sorted {
            self.order();
        }
        let mut axl = x.abs();
        let sxl = if x > 0.0 { 1.0 } else { -1.0 };
        let mut sum1 = 0.0;
        for j in (0..self.lb.len()).rev() {
            let t = self.th[j];
            if self.lb[t] * sxl > 0.0 {
                let lj = self.lb[t].abs();
                let axl1 = axl - lj * (self.n[t] as f64 + self.nc[t]);
                let axl2 = lj / LOG28;
                if axl1 > axl2 {
                    axl = axl1;
                } else {
                    if axl > axl2 {
                        axl = axl2;
                    }
                    sum1 = (axl - axl1) / lj;
                    for k in (0..j).rev() {
                        sum1 += self.n[self.th[k]] as f64 + self.nc[self.th[k]];
                    }
                    break;
                }
            }
        }
        if sum1 > 100.0 {
            self.fail = true;
            return Ok(1.0);
        }
        Ok(2f64.powf(sum1 / 4.0) / (PI * axl * axl))
    }

    fn run(&mut self, sigma: f64, acc: f64) -> Result<(f64, i32), LimitExceeded> {
        let mut acc1 = acc;
        let mut xlim = self.lim as f64;
        self.sigsq = sigma * sigma;
        let mut sd = self.sigsq;
        for j in 0..self.lb.len() {
            let (nj, lj, ncj) = (self.n[j], self.lb[j], self.nc[j]);
            if nj < 0 || ncj < 0.0 {
                return Ok((-1.0, 3));
            }
            sd += lj * lj * (2.0 * nj as f64 + 4.0 * ncj);
            self.mean += lj * (nj as f64 + ncj);
            if self.lmax < lj {
                self.lmax = lj;
            } else if self.lmin > lj {
                self.lmin = lj;
            }
        }
        if sd == 0.0 {
            return Ok((if self.c > 0.0 { 1.0 } else { 0.0 }, 0));
        }
        if self.lmin == 0.0 && self.lmax == 0.0 && sigma == 0.0 {
            return Ok((-1.0, 3));
        }
        let sd = sd.sqrt();
        let almx = if self.lmax < -self.lmin { -self.lmin } else { self.lmax };

        let mut utx = 16.0 / sd;
        let mut up = 4.5 / sd;
        let mut un = -up;
        self.findu(&mut utx, 0.5 * acc1)?;
        if self.c != 0.0 && almx > 0.07 * sd {
            let tausq = 0.25 * acc1 / self.cfe(self.c)?;
            if self.fail {
                self.fail = false;
            } else if self.truncation(utx, tausq)? < 0.2 * acc1 {
                self.sigsq += tausq;
                self.findu(&mut utx, 0.25 * acc1)?;
            }
        }
        acc1 *= 0.5;

        let (intv, xnt) = loop {
            let d1 = self.ctff(acc1, &mut up)? - self.c;
            if d1 < 0.0 {
                return Ok((1.0, 0));
            }
            let d2 = self.c - self.ctff(acc1, &mut un)?;
            if d2 < 0.0 {
                return Ok((0.0, 0));
            }
            let intv = 2.0 * PI / d1.max(d2);
            let xnt = utx / intv;
            let xntm = 3.0 / acc1.sqrt();
            if xnt <= xntm * 1.5 {
                break (intv, xnt);
            }
            if xntm > xlim {
                return Ok((-1.0, 1));
            }
            let ntm = (xntm + 0.5).floor() as usize;
            let intv1 = utx / ntm as f64;
            let x = 2.0 * PI / intv1;
            if x <= self.c.abs() {
                break (intv, xnt);
            }
            let tausq = 0.33 * acc1 / (1.1 * (self.cfe(self.c - x)? + self.cfe(self.c + x)?));
            if self.fail {
                break (intv, xnt);
            }
            acc1 *= 0.67;
            self.integrate(ntm, intv1, tausq, false);
            xlim -= xntm;
            self.sigsq += tausq;
            self.findu(&mut utx, 0.25 * acc1)?;
            acc1 *= 0.75;
        };

        if xnt > xlim {
            return Ok((-1.0, 1));
        }
        let nt = (xnt + 0.5).floor() as usize;
        self.integrate(nt, intv, 0.0, true);
        let qfval = 0.5 - self.intl;
        let mut fault = 0;
        let up = self.ersm;
        let x = up + acc / 10.0;
        for rats in [1.0, 2.0, 4.0, 8.0] {
            if rats * x == rats * up {
                fault = 2;
            }
        }
        Ok((qfval, fault))
    }
}

/// Distribution function `Pr(Σ lb_j χ²(n_j, nc_j) + sigma·N(0,1) < c)`.
///
/// Fault codes: 1 accuracy not reached within `lim` terms, 2 round-off may
/// be significant, 3 invalid parameters, 4 integration parameters not found.
pub fn qfc(lb: &[f64], nc: &[f64], n: &[i32], sigma: f64, c: f64, lim: usize, acc: f64) -> (f64, i32) {
    let mut st = Qf {
        lb,
        nc,
        n,
        lim,
        count: 0,
        sigsq: 0.0,
        lmax: 0.0,
        lmin: 0.0,
        mean: 0.0,
        c,
        intl: 0.0,
        ersm: 0.0,
        sorted: false,
        fail: false,
        th: Vec::new(),
    };
    st.run(sigma, acc).unwrap_or((-1.0, 4))
}

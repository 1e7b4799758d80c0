//! Tail fits for activity and degree data.
//!
//! Four families are fitted to the tail `x >= x_min` by maximum likelihood:
//! power law, power law with exponential cutoff, lognormal and exponential.
//! Each has a discrete (integer support) and a continuous variant; both are
//! conditioned on the tail so their log-likelihoods are directly comparable.
//! `x_min` is chosen by minimising the Kolmogorov-Smirnov distance of the
//! power-law fit over candidate tail starts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::numeric::{
    golden_max, hurwitz_zeta, integrate, ln_norm_cdf, nelder_mead_max, two_sided_p,
};
use crate::par;

/// Fewest tail points any fit accepts.
pub const MIN_TAIL: usize = 10;
/// Significance level for declaring one family preferred.
pub const SIGNIFICANCE: f64 = 0.05;
/// Tail starts are scanned up to this quantile of the sample.
pub const XMIN_QUANTILE: f64 = 0.9;

const NORM_REL_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("sample is empty")]
    Empty,
    #[error("sample value {0} is outside the support")]
    BadValue(f64),
    #[error("tail has {got} points, need at least {MIN_TAIL}")]
    InsufficientTail { got: usize },
    #[error("all tail values are equal")]
    Degenerate,
    #[error("{family:?} fit failed: {detail}")]
    FitFailed { family: Family, detail: String },
    #[error("fits were made on different tails")]
    TailMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    PowerLaw,
    TruncatedPowerLaw,
    Lognormal,
    Exponential,
}

impl Family {
    pub const ALL: [Family; 4] = [
        Family::PowerLaw,
        Family::TruncatedPowerLaw,
        Family::Lognormal,
        Family::Exponential,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::PowerLaw => "power_law",
            Family::TruncatedPowerLaw => "truncated_power_law",
            Family::Lognormal => "lognormal",
            Family::Exponential => "exponential",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| format!("unknown family `{s}`"))
    }
}

/// Sorted positive sample. Discrete samples hold integers `>= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TailSample {
    values: Vec<f64>,
    discrete: bool,
}

impl TailSample {
    pub fn discrete(values: &[u64]) -> Result<Self, FitError> {
        if values.is_empty() {
            return Err(FitError::Empty);
        }
        if values.contains(&0) {
            return Err(FitError::BadValue(0.0));
        }
        let mut v: Vec<f64> = values.iter().map(|&x| x as f64).collect();
        v.sort_by(f64::total_cmp);
        Ok(TailSample {
            values: v,
            discrete: true,
        })
    }

    pub fn continuous(values: &[f64]) -> Result<Self, FitError> {
        if values.is_empty() {
            return Err(FitError::Empty);
        }
        if let Some(&bad) = values.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
            return Err(FitError::BadValue(bad));
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Ok(TailSample {
            values: v,
            discrete: false,
        })
    }

    pub fn is_discrete(&self) -> bool {
        self.discrete
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    /// Values `>= x_min`, ascending.
    pub fn tail(&self, x_min: f64) -> &[f64] {
        let start = self.values.partition_point(|&x| x < x_min);
        &self.values[start..]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Params {
    PowerLaw { gamma: f64 },
    TruncatedPowerLaw { gamma: f64, lambda: f64 },
    Lognormal { mu: f64, sigma: f64 },
    Exponential { rate: f64 },
}

impl Params {
    pub fn family(&self) -> Family {
        match self {
            Params::PowerLaw { .. } => Family::PowerLaw,
            Params::TruncatedPowerLaw { .. } => Family::TruncatedPowerLaw,
            Params::Lognormal { .. } => Family::Lognormal,
            Params::Exponential { .. } => Family::Exponential,
        }
    }
}

/// `ln sum_{k >= a} k^-gamma e^{-lambda k}` (discrete) or
/// `ln int_a^inf x^-gamma e^{-lambda x} dx` (continuous).
pub fn ln_tail_mass(gamma: f64, lambda: f64, a: f64, discrete: bool) -> f64 {
    if discrete {
        ln_tail_sum(gamma, lambda, a)
    } else {
        ln_tail_integral(gamma, lambda, a)
    }
}

fn ln_tail_integral(gamma: f64, lambda: f64, a: f64) -> f64 {
    if lambda == 0.0 {
        return if gamma > 1.0 {
            (1.0 - gamma) * a.ln() - (gamma - 1.0).ln()
        } else {
            f64::INFINITY
        };
    }
    // x = a e^t:  int = a^{1-g} e^{-la} int_0^inf exp((1-g) t - la (e^t - 1)) dt
    let la = lambda * a;
    let lng = |t: f64| (1.0 - gamma) * t - la * (t.exp() - 1.0);
    let peak_t = if gamma < 1.0 {
        ((1.0 - gamma) / la).ln().max(0.0)
    } else {
        0.0
    };
    let peak = lng(peak_t);
    let mut hi = peak_t + 1.0;
    while lng(hi) > peak - 46.0 {
        hi = peak_t + 2.0 * (hi - peak_t);
    }
    let body = |t: f64| (lng(t) - peak).exp();
    let mut total = 0.0;
    if peak_t > 0.0 {
        total += integrate(body, 0.0, peak_t, NORM_REL_TOL);
    }
    total += integrate(body, peak_t, hi, NORM_REL_TOL);
    (1.0 - gamma) * a.ln() - la + peak + total.ln()
}

const DIRECT_TERMS: usize = 2000;

fn ln_tail_sum(gamma: f64, lambda: f64, a: f64) -> f64 {
    if lambda == 0.0 {
        return if gamma > 1.0 {
            hurwitz_zeta(gamma, a).ln()
        } else {
            f64::INFINITY
        };
    }
    // Terms relative to the first: f(a + j) / f(a).
    let ln_fa = -gamma * a.ln() - lambda * a;
    let rel = |x: f64| (-gamma * (x / a).ln() - lambda * (x - a)).exp();
    let mut sum = 0.0;
    for j in 0..DIRECT_TERMS {
        let t = rel(a + j as f64);
        sum += t;
        if t < 1e-18 * sum {
            return ln_fa + sum.ln();
        }
    }
    // Euler-Maclaurin remainder from b: int_b^inf f + f(b)/2 - f'(b)/12.
    let b = a + DIRECT_TERMS as f64;
    let fb = rel(b);
    let dfb = fb * (-gamma / b - lambda);
    let integral = (ln_tail_integral(gamma, lambda, b) - ln_fa).exp();
    ln_fa + (sum + integral + 0.5 * fb - dfb / 12.0).ln()
}

/// A fitted family on the tail `x >= x_min`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailModel {
    pub params: Params,
    pub x_min: f64,
    pub discrete: bool,
    ln_norm: f64,
}

fn ln_diff_exp(a: f64, b: f64) -> f64 {
    // ln(e^a - e^b) for a >= b
    a + (-(b - a).exp_m1()).ln()
}

impl TailModel {
    pub fn new(params: Params, x_min: f64, discrete: bool) -> Self {
        let ln_norm = match params {
            Params::PowerLaw { gamma } => {
                if discrete {
                    hurwitz_zeta(gamma, x_min).ln()
                } else {
                    0.0
                }
            }
            Params::TruncatedPowerLaw { gamma, lambda } => {
                ln_tail_mass(gamma, lambda, x_min, discrete)
            }
            Params::Lognormal { mu, sigma } => ln_norm_cdf(-(x_min.ln() - mu) / sigma),
            Params::Exponential { .. } => 0.0,
        };
        TailModel {
            params,
            x_min,
            discrete,
            ln_norm,
        }
    }

    /// Log density (continuous) or log mass (discrete) at a tail point.
    pub fn ln_pdf(&self, x: f64) -> f64 {
        match self.params {
            Params::PowerLaw { gamma } => {
                if self.discrete {
                    -gamma * x.ln() - self.ln_norm
                } else {
                    (gamma - 1.0).ln() - self.x_min.ln() - gamma * (x / self.x_min).ln()
                }
            }
            Params::TruncatedPowerLaw { gamma, lambda } => {
                -gamma * x.ln() - lambda * x - self.ln_norm
            }
            Params::Lognormal { mu, sigma } => {
                let z = (x.ln() - mu) / sigma;
                if self.discrete {
                    let z1 = ((x + 1.0).ln() - mu) / sigma;
                    let ln_mass = if z1 < 0.0 {
                        ln_diff_exp(ln_norm_cdf(z1), ln_norm_cdf(z))
                    } else {
                        ln_diff_exp(ln_norm_cdf(-z), ln_norm_cdf(-z1))
                    };
                    ln_mass - self.ln_norm
                } else {
                    -x.ln() - sigma.ln() - 0.918_938_533_204_672_8 - 0.5 * z * z - self.ln_norm
                }
            }
            Params::Exponential { rate } => {
                if self.discrete {
                    (-(-rate).exp_m1()).ln() - rate * (x - self.x_min)
                } else {
                    rate.ln() - rate * (x - self.x_min)
                }
            }
        }
    }

    /// `P(X >= x)` within the tail.
    pub fn survival(&self, x: f64) -> f64 {
        if x <= self.x_min {
            return 1.0;
        }
        let s = match self.params {
            Params::PowerLaw { gamma } => {
                if self.discrete {
                    hurwitz_zeta(gamma, x) / hurwitz_zeta(gamma, self.x_min)
                } else {
                    (x / self.x_min).powf(1.0 - gamma)
                }
            }
            Params::TruncatedPowerLaw { gamma, lambda } => {
                (ln_tail_mass(gamma, lambda, x, self.discrete) - self.ln_norm).exp()
            }
            Params::Lognormal { mu, sigma } => {
                (ln_norm_cdf(-(x.ln() - mu) / sigma) - self.ln_norm).exp()
            }
            Params::Exponential { rate } => (-rate * (x - self.x_min)).exp(),
        };
        s.clamp(0.0, 1.0)
    }

    /// Kolmogorov-Smirnov distance to an ascending tail sample.
    pub fn ks_distance(&self, tail: &[f64]) -> f64 {
        ks_distance(tail, self.discrete, |x| self.survival(x))
    }
}

/// KS distance between the empirical tail and a model survival function.
/// For integer data the supremum is taken over every integer, which only
/// requires checking each distinct value `v` and `v + 1`.
fn ks_distance(tail: &[f64], discrete: bool, survival: impl Fn(f64) -> f64) -> f64 {
    let n = tail.len() as f64;
    let mut d = 0.0f64;
    let mut i = 0;
    while i < tail.len() {
        let v = tail[i];
        let mut j = i;
        while j < tail.len() && tail[j] == v {
            j += 1;
        }
        let emp_ge = (tail.len() - i) as f64 / n;
        let emp_gt = (tail.len() - j) as f64 / n;
        if discrete {
            d = d.max((emp_ge - survival(v)).abs());
            d = d.max((emp_gt - survival(v + 1.0)).abs());
        } else {
            let s = survival(v);
            d = d.max((emp_ge - s).abs()).max((emp_gt - s).abs());
        }
        i = j;
    }
    d
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub family: Family,
    pub params: Params,
    pub x_min: f64,
    pub n_tail: usize,
    pub loglik: f64,
    pub ks: f64,
    /// Standard error of the exponent (power-law families only).
    pub gamma_se: Option<f64>,
}

impl FitResult {
    pub fn model(&self, discrete: bool) -> TailModel {
        TailModel::new(self.params, self.x_min, discrete)
    }

    pub fn gamma(&self) -> Option<f64> {
        match self.params {
            Params::PowerLaw { gamma } | Params::TruncatedPowerLaw { gamma, .. } => Some(gamma),
            _ => None,
        }
    }
}

fn checked_tail(sample: &TailSample, x_min: f64) -> Result<&[f64], FitError> {
    let tail = sample.tail(x_min);
    if tail.len() < MIN_TAIL {
        return Err(FitError::InsufficientTail { got: tail.len() });
    }
    if tail[0] == tail[tail.len() - 1] {
        return Err(FitError::Degenerate);
    }
    Ok(tail)
}

fn finish(
    family: Family,
    params: Params,
    sample: &TailSample,
    x_min: f64,
    tail: &[f64],
    gamma_se: Option<f64>,
) -> FitResult {
    let model = TailModel::new(params, x_min, sample.discrete);
    let loglik = tail.iter().map(|&x| model.ln_pdf(x)).sum();
    FitResult {
        family,
        params,
        x_min,
        n_tail: tail.len(),
        loglik,
        ks: model.ks_distance(tail),
        gamma_se,
    }
}

const GAMMA_MAX: f64 = 50.0;

/// Power-law exponent by maximum likelihood on a tail with known sum of logs.
fn power_law_gamma(n: usize, sum_ln: f64, x_min: f64, discrete: bool) -> f64 {
    let nf = n as f64;
    if discrete {
        let ll = |g: f64| -nf * hurwitz_zeta(g, x_min).ln() - g * sum_ln;
        golden_max(ll, 1.0 + 1e-9, GAMMA_MAX, 1e-11).0
    } else {
        1.0 + nf / (sum_ln - nf * x_min.ln())
    }
}

/// Power-law fit. Without `x_min` the tail start is chosen by [`select_xmin`].
pub fn fit_power_law(sample: &TailSample, x_min: Option<f64>) -> Result<FitResult, FitError> {
    let x_min = match x_min {
        Some(x) => x,
        None => select_xmin(sample)?.x_min,
    };
    let tail = checked_tail(sample, x_min)?;
    let sum_ln: f64 = tail.iter().map(|x| x.ln()).sum();
    let gamma = power_law_gamma(tail.len(), sum_ln, x_min, sample.discrete);
    if !(gamma > 1.0) || gamma >= GAMMA_MAX - 1e-6 {
        return Err(FitError::FitFailed {
            family: Family::PowerLaw,
            detail: format!("exponent {gamma} at search bound"),
        });
    }
    let se = (gamma - 1.0) / (tail.len() as f64).sqrt();
    Ok(finish(
        Family::PowerLaw,
        Params::PowerLaw { gamma },
        sample,
        x_min,
        tail,
        Some(se),
    ))
}

pub fn fit_exponential(sample: &TailSample, x_min: f64) -> Result<FitResult, FitError> {
    let tail = checked_tail(sample, x_min)?;
    let excess = tail.iter().map(|&x| x - x_min).sum::<f64>() / tail.len() as f64;
    // Memorylessness gives closed forms: geometric for integers, exponential otherwise.
    let rate = if sample.discrete {
        (1.0 / excess).ln_1p()
    } else {
        1.0 / excess
    };
    Ok(finish(
        Family::Exponential,
        Params::Exponential { rate },
        sample,
        x_min,
        tail,
        None,
    ))
}

pub fn fit_lognormal(sample: &TailSample, x_min: f64) -> Result<FitResult, FitError> {
    let tail = checked_tail(sample, x_min)?;
    let discrete = sample.discrete;
    let n = tail.len() as f64;
    let logs: Vec<f64> = tail.iter().map(|x| x.ln()).collect();
    let mean = logs.iter().sum::<f64>() / n;
    let sd = (logs.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / n)
        .sqrt()
        .max(1e-3);
    let ll = |p: &[f64]| {
        let params = Params::Lognormal {
            mu: p[0],
            sigma: p[1].exp(),
        };
        let m = TailModel::new(params, x_min, discrete);
        let v: f64 = tail.iter().map(|&x| m.ln_pdf(x)).sum();
        if v.is_finite() {
            v
        } else {
            f64::NEG_INFINITY
        }
    };
    let mut best = nelder_mead_max(ll, &[mean, sd.ln()], &[sd.max(0.5), 0.5], 1e-12, 4000);
    // Restart once from the incumbent to escape premature collapse.
    let again = nelder_mead_max(ll, &best.x, &[0.1 * sd.max(0.5), 0.1], 1e-12, 4000);
    if again.value >= best.value {
        best = again;
    }
    if !best.converged || !best.value.is_finite() {
        return Err(FitError::FitFailed {
            family: Family::Lognormal,
            detail: format!(
                "simplex did not converge after {} steps at {:?}",
                best.iterations, best.x
            ),
        });
    }
    let params = Params::Lognormal {
        mu: best.x[0],
        sigma: best.x[1].exp(),
    };
    Ok(finish(Family::Lognormal, params, sample, x_min, tail, None))
}

/// Power law with exponential cutoff, density proportional to `x^-gamma e^{-lambda x}`.
///
/// The log-likelihood is jointly concave in `(gamma, lambda)`, so the
/// exponent is profiled out by a golden search for each cutoff and the
/// concave profile is searched over `ln lambda`; `lambda = 0` (a pure power
/// law) is compared explicitly.
pub fn fit_truncated_power_law(sample: &TailSample, x_min: f64) -> Result<FitResult, FitError> {
    let tail = checked_tail(sample, x_min)?;
    let discrete = sample.discrete;
    let n = tail.len() as f64;
    let sum_ln: f64 = tail.iter().map(|x| x.ln()).sum();
    let sum_x: f64 = tail.iter().sum();
    let x_max = tail[tail.len() - 1];
    let ll = |g: f64, l: f64| {
        let v = -g * sum_ln - l * sum_x - n * ln_tail_mass(g, l, x_min, discrete);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };
    const G_LO: f64 = -10.0;
    let profile = |l: f64| {
        golden_max(
            |g| ll(g, l),
            if l == 0.0 { 1.0 + 1e-9 } else { G_LO },
            GAMMA_MAX,
            1e-10,
        )
    };
    let eta_lo = (1e-4 / x_max).ln();
    let eta_hi = (10.0 / x_min).ln();
    let (eta, _) = golden_max(|e| profile(e.exp()).1, eta_lo, eta_hi, 1e-9);
    let mut lambda = eta.exp();
    let (mut gamma, mut best) = profile(lambda);
    let (g0, v0) = profile(0.0);
    if v0.is_finite() && v0 >= best {
        lambda = 0.0;
        gamma = g0;
        best = v0;
    }
    let fail = |detail: String| FitError::FitFailed {
        family: Family::TruncatedPowerLaw,
        detail,
    };
    if !best.is_finite() {
        return Err(fail("log-likelihood is not finite".into()));
    }
    if gamma <= G_LO + 1e-6 || gamma >= GAMMA_MAX - 1e-6 {
        return Err(fail(format!("exponent {gamma} at search bound")));
    }
    if lambda > 0.0 && eta >= eta_hi - 1e-6 {
        return Err(fail(format!("cutoff rate {lambda} at search bound")));
    }
    let se = if lambda > 0.0 {
        truncated_gamma_se(&ll, gamma, lambda)
    } else {
        Some((gamma - 1.0) / n.sqrt())
    };
    Ok(finish(
        Family::TruncatedPowerLaw,
        Params::TruncatedPowerLaw { gamma, lambda },
        sample,
        x_min,
        tail,
        se,
    ))
}

/// Exponent standard error from the inverse of the observed information,
/// with a central-difference Hessian in `(gamma, lambda)`.
fn truncated_gamma_se(ll: &impl Fn(f64, f64) -> f64, g: f64, l: f64) -> Option<f64> {
    let hg = 1e-4 * (1.0 + g.abs());
    let hl = 1e-4 * l;
    let f0 = ll(g, l);
    let hgg = (ll(g + hg, l) - 2.0 * f0 + ll(g - hg, l)) / (hg * hg);
    let hll = (ll(g, l + hl) - 2.0 * f0 + ll(g, l - hl)) / (hl * hl);
    let hgl = (ll(g + hg, l + hl) - ll(g + hg, l - hl) - ll(g - hg, l + hl) + ll(g - hg, l - hl))
        / (4.0 * hg * hl);
    let det = hgg * hll - hgl * hgl;
    let var = -hll / det;
    (det > 0.0 && var > 0.0).then(|| var.sqrt())
}

pub fn fit_family(sample: &TailSample, family: Family, x_min: f64) -> Result<FitResult, FitError> {
    match family {
        Family::PowerLaw => fit_power_law(sample, Some(x_min)),
        Family::TruncatedPowerLaw => fit_truncated_power_law(sample, x_min),
        Family::Lognormal => fit_lognormal(sample, x_min),
        Family::Exponential => fit_exponential(sample, x_min),
    }
}

/// One scanned tail start.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct XminCandidate {
    pub x_min: f64,
    pub n_tail: usize,
    pub gamma: f64,
    pub ks: f64,
}

/// Power-law fit and KS distance at every admissible tail start: distinct
/// sample values up to the 90th percentile that leave at least
/// [`MIN_TAIL`] points and more than one distinct value.
pub fn scan_xmin(sample: &TailSample) -> Vec<XminCandidate> {
    let v = &sample.values;
    let n = v.len();
    let cap = v[((XMIN_QUANTILE * (n - 1) as f64).floor()) as usize];
    let logs: Vec<f64> = v.iter().map(|x| x.ln()).collect();
    let mut suffix_ln = vec![0.0; n + 1];
    for i in (0..n).rev() {
        suffix_ln[i] = suffix_ln[i + 1] + logs[i];
    }
    let starts: Vec<usize> = (0..n)
        .filter(|&i| {
            (i == 0 || v[i] != v[i - 1]) && v[i] <= cap && n - i >= MIN_TAIL && v[i] != v[n - 1]
        })
        .collect();
    let discrete = sample.discrete;
    let scanned = par::map_slice(&starts, |&i| {
        let x_min = v[i];
        let tail = &v[i..];
        let gamma = power_law_gamma(tail.len(), suffix_ln[i], x_min, discrete);
        let ks = if discrete {
            let z0 = hurwitz_zeta(gamma, x_min);
            ks_distance(tail, true, |x| {
                if x <= x_min {
                    1.0
                } else {
                    hurwitz_zeta(gamma, x) / z0
                }
            })
        } else {
            ks_power_continuous(tail, &logs[i..], gamma)
        };
        XminCandidate {
            x_min,
            n_tail: tail.len(),
            gamma,
            ks,
        }
    });
    scanned
        .into_iter()
        .filter(|c| c.gamma > 1.0 && c.gamma < GAMMA_MAX - 1e-6 && c.ks.is_finite())
        .collect()
}

/// Continuous power-law KS distance from precomputed logs; same supremum as [`ks_distance`].
fn ks_power_continuous(tail: &[f64], logs: &[f64], gamma: f64) -> f64 {
    let n = tail.len();
    let nf = n as f64;
    let ln_min = logs[0];
    let mut d = 0.0f64;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && tail[j] == tail[i] {
            j += 1;
        }
        let s = ((1.0 - gamma) * (logs[i] - ln_min)).exp();
        d = d
            .max(((n - i) as f64 / nf - s).abs())
            .max(((n - j) as f64 / nf - s).abs());
        i = j;
    }
    d
}

/// Tail start minimising the KS distance; ties go to the smaller value.
pub fn select_xmin(sample: &TailSample) -> Result<XminCandidate, FitError> {
    let candidates = scan_xmin(sample);
    let mut best: Option<XminCandidate> = None;
    for c in candidates {
        if best.is_none_or(|b| c.ks < b.ks) {
            best = Some(c);
        }
    }
    best.ok_or(FitError::InsufficientTail {
        got: sample.tail(sample.min()).len().min(MIN_TAIL - 1),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonResult {
    pub family_a: Family,
    pub family_b: Family,
    /// `sum_i (l_a,i - l_b,i)`; positive favours `family_a`.
    pub loglik_ratio: f64,
    /// `R / (s sqrt(n))` with `s` the standard deviation of the pointwise differences.
    pub normalized_ratio: f64,
    pub p_value: f64,
    pub preferred: Option<Family>,
    /// Pointwise differences had zero variance.
    pub zero_variance: bool,
}

/// Vuong-style normalised likelihood ratio between two fits on one tail.
pub fn compare_fits(
    sample: &TailSample,
    a: &FitResult,
    b: &FitResult,
) -> Result<ComparisonResult, FitError> {
    if a.x_min != b.x_min || a.n_tail != b.n_tail {
        return Err(FitError::TailMismatch);
    }
    let tail = sample.tail(a.x_min);
    if tail.len() != a.n_tail {
        return Err(FitError::TailMismatch);
    }
    let (ma, mb) = (a.model(sample.discrete), b.model(sample.discrete));
    let diffs: Vec<f64> = tail.iter().map(|&x| ma.ln_pdf(x) - mb.ln_pdf(x)).collect();
    let n = diffs.len() as f64;
    let ratio: f64 = diffs.iter().sum();
    let mean = ratio / n;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n;
    if !(var > 0.0) || var.sqrt() <= 1e-12 * mean.abs().max(1e-300) {
        return Ok(ComparisonResult {
            family_a: a.family,
            family_b: b.family,
            loglik_ratio: ratio,
            normalized_ratio: 0.0,
            p_value: 1.0,
            preferred: None,
            zero_variance: true,
        });
    }
    let normalized = ratio / (var.sqrt() * n.sqrt());
    let p = two_sided_p(normalized);
    let preferred = (p < SIGNIFICANCE).then_some(if ratio > 0.0 { a.family } else { b.family });
    Ok(ComparisonResult {
        family_a: a.family,
        family_b: b.family,
        loglik_ratio: ratio,
        normalized_ratio: normalized,
        p_value: p,
        preferred,
        zero_variance: false,
    })
}

pub fn compare(
    sample: &TailSample,
    x_min: f64,
    a: Family,
    b: Family,
) -> Result<ComparisonResult, FitError> {
    let fa = fit_family(sample, a, x_min)?;
    let fb = if a == b {
        fa.clone()
    } else {
        fit_family(sample, b, x_min)?
    };
    compare_fits(sample, &fa, &fb)
}

/// Bootstrap standard deviation of the power-law exponent with `x_min` held
/// fixed. Resample `i` draws from its own ChaCha stream, so the result does
/// not depend on scheduling.
pub fn bootstrap_gamma_se(
    sample: &TailSample,
    x_min: f64,
    resamples: usize,
    seed: u64,
) -> Option<f64> {
    let v = &sample.values;
    let gammas: Vec<f64> = par::map_range(resamples, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let mut tail_n = 0usize;
        let mut sum_ln = 0.0;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for _ in 0..v.len() {
            let x = v[rng.random_range(0..v.len())];
            if x >= x_min {
                tail_n += 1;
                sum_ln += x.ln();
                lo = lo.min(x);
                hi = hi.max(x);
            }
        }
        if tail_n < MIN_TAIL || lo == hi {
            return f64::NAN;
        }
        power_law_gamma(tail_n, sum_ln, x_min, sample.discrete)
    })
    .into_iter()
    .filter(|g| g.is_finite())
    .collect();
    if gammas.len() < 2 {
        return None;
    }
    let m = gammas.iter().sum::<f64>() / gammas.len() as f64;
    Some((gammas.iter().map(|g| (g - m).powi(2)).sum::<f64>() / (gammas.len() - 1) as f64).sqrt())
}

/// `(value, P(X >= value))` at each distinct value, ascending.
pub fn ccdf(sample: &TailSample) -> Vec<(f64, f64)> {
    let v = &sample.values;
    let n = v.len() as f64;
    let mut out = Vec::new();
    for (i, &x) in v.iter().enumerate() {
        if i == 0 || x != v[i - 1] {
            out.push((x, (v.len() - i) as f64 / n));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitFailure {
    pub family: Family,
    pub error: String,
}

/// Everything reported for one dataset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub dataset: String,
    pub n: usize,
    pub discrete: bool,
    pub x_min: f64,
    pub n_tail: usize,
    pub fits: Vec<FitResult>,
    pub failures: Vec<FitFailure>,
    pub comparisons: Vec<ComparisonResult>,
    pub bootstrap_gamma_se: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bootstrap {
    pub resamples: usize,
    pub seed: u64,
}

/// Fits every requested family on one tail and compares all pairs.
pub fn fit_report(
    dataset: &str,
    sample: &TailSample,
    families: &[Family],
    x_min: Option<f64>,
    bootstrap: Option<Bootstrap>,
) -> Result<FitReport, FitError> {
    let x_min = match x_min {
        Some(x) => x,
        None => select_xmin(sample)?.x_min,
    };
    let tail = checked_tail(sample, x_min)?;
    let mut fits = Vec::new();
    let mut failures = Vec::new();
    for &f in families {
        match fit_family(sample, f, x_min) {
            Ok(r) => fits.push(r),
            Err(e) => failures.push(FitFailure {
                family: f,
                error: e.to_string(),
            }),
        }
    }
    let mut comparisons = Vec::new();
    for i in 0..fits.len() {
        for j in i + 1..fits.len() {
            comparisons.push(compare_fits(sample, &fits[i], &fits[j])?);
        }
    }
    let bootstrap_gamma_se =
        bootstrap.and_then(|b| bootstrap_gamma_se(sample, x_min, b.resamples, b.seed));
    Ok(FitReport {
        dataset: dataset.to_string(),
        n: sample.len(),
        discrete: sample.discrete,
        x_min,
        n_tail: tail.len(),
        fits,
        failures,
        comparisons,
        bootstrap_gamma_se,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Exp};

    fn pareto(n: usize, gamma: f64, x_min: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| x_min * (1.0 - rng.random::<f64>()).powf(-1.0 / (gamma - 1.0)))
            .collect()
    }

    #[test]
    fn continuous_closed_form_recovers_exponent() {
        let s = TailSample::continuous(&pareto(50_000, 2.5, 5.0, 1)).unwrap();
        let f = fit_power_law(&s, Some(5.0)).unwrap();
        let g = f.gamma().unwrap();
        assert!((2.45..=2.55).contains(&g), "{g}");
        assert!((f.gamma_se.unwrap() - (g - 1.0) / (50_000f64).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn degenerate_and_short_tails() {
        let s = TailSample::discrete(&[7; 40]).unwrap();
        assert_eq!(
            fit_power_law(&s, Some(7.0)).unwrap_err(),
            FitError::Degenerate
        );
        let s = TailSample::discrete(&[1, 2, 3, 4, 5]).unwrap();
        assert!(matches!(
            fit_power_law(&s, Some(1.0)),
            Err(FitError::InsufficientTail { got: 5 })
        ));
        assert!(TailSample::discrete(&[0, 1]).is_err());
        assert!(TailSample::continuous(&[]).is_err());
    }

    #[test]
    fn two_value_sample_selects_the_smaller() {
        let mut v = vec![1u64; 30];
        v.extend(vec![2u64; 30]);
        let s = TailSample::discrete(&v).unwrap();
        assert_eq!(select_xmin(&s).unwrap().x_min, 1.0);
    }

    #[test]
    fn exponential_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let e = Exp::new(0.1).unwrap();
        let v: Vec<f64> = (0..50_000).map(|_| 1.0 + e.sample(&mut rng)).collect();
        let s = TailSample::continuous(&v).unwrap();
        let f = fit_exponential(&s, 1.0).unwrap();
        let Params::Exponential { rate } = f.params else {
            unreachable!()
        };
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        assert!((rate - 1.0 / (mean - 1.0)).abs() < 1e-12);
        assert!((0.097..=0.103).contains(&rate), "{rate}");
    }

    #[test]
    fn ccdf_examples() {
        let s = TailSample::discrete(&[1, 1, 2]).unwrap();
        assert_eq!(ccdf(&s), vec![(1.0, 1.0), (2.0, 1.0 / 3.0)]);
        let s = TailSample::discrete(&[4]).unwrap();
        assert_eq!(ccdf(&s), vec![(4.0, 1.0)]);
    }

    #[test]
    fn same_family_comparison_is_indistinguishable() {
        let s = TailSample::continuous(&pareto(2000, 2.2, 1.0, 3)).unwrap();
        let c = compare(&s, 1.0, Family::PowerLaw, Family::PowerLaw).unwrap();
        assert_eq!(c.loglik_ratio, 0.0);
        assert!(c.preferred.is_none() && c.zero_variance);
    }

    #[test]
    fn tail_mass_sum_matches_direct_summation() {
        for &(g, l, a) in &[
            (2.5, 1e-4, 3.0),
            (1.5, 1e-3, 1.0),
            (0.5, 0.01, 10.0),
            (3.0, 0.2, 39.0),
        ] {
            let direct: f64 = (0..2_000_000u64)
                .map(|k| (a + k as f64).powf(-g) * (-l * (a + k as f64)).exp())
                .sum();
            let got = ln_tail_mass(g, l, a, true).exp();
            assert!(
                ((got - direct) / direct).abs() < 1e-9,
                "{g} {l} {a}: {got} vs {direct}"
            );
        }
    }

    #[test]
    fn tail_integral_matches_closed_forms() {
        // gamma = 0: int_a^inf e^{-lx} = e^{-la}/l
        let got = ln_tail_mass(0.0, 0.5, 2.0, false);
        assert!((got - ((-1.0f64).exp() / 0.5).ln()).abs() < 1e-10);
        // lambda = 0 closed form equals the limit of tiny lambda.
        let a = ln_tail_mass(2.5, 1e-12, 3.0, false);
        let b = ln_tail_mass(2.5, 0.0, 3.0, false);
        assert!((a - b).abs() < 1e-8);
    }
}

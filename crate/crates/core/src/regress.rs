//! Polynomial activity models with confidence bands, and left-censored
//! (tobit) regression.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::numeric::{inv_mills, ln_norm_cdf, ln_norm_pdf, two_sided_p};
use crate::par;

/// Normal quantile used for 95% intervals.
pub const Z95: f64 = 1.959964;
pub const TOBIT_GRAD_TOL: f64 = 1e-8;
pub const TOBIT_MAX_ITER: usize = 200;
const LR_SIGNIFICANCE: f64 = 0.05;
const CHUNK: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegressError {
    #[error("need more than {needed} observations, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("input lengths differ")]
    LengthMismatch,
    #[error("design matrix is singular")]
    SingularDesign,
    #[error("order must be 1 or 2")]
    BadOrder,
    #[error("non-finite value in input")]
    NonFinite,
    #[error("every observation is censored")]
    AllCensored,
    #[error("tobit did not converge after {iterations} iterations (max |gradient| {grad:.3e})")]
    NoConvergence {
        iterations: usize,
        grad: f64,
        trace: Vec<TobitStep>,
    },
}

/// Gaussian least-squares fit of `y` on `1, x[, x^2]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnivariateFit {
    pub order: usize,
    /// `theta_0..=theta_order` on the original scale of `x`.
    pub coefficients: Vec<f64>,
    /// Residual scale `sqrt(RSS / (n - p))`.
    pub sigma: f64,
    /// Covariance of `coefficients`, row-major, `sigma^2 (X'X)^-1`.
    pub covariance: Vec<Vec<f64>>,
    pub n: usize,
    pub rss: f64,
    pub loglik: f64,
    #[serde(skip)]
    basis: Basis,
}

/// The fit is held in `u = (x - shift) / scale`; `alpha` and `cov_alpha`
/// live in that basis and are what predictions use.
#[derive(Debug, Clone, PartialEq, Default)]
struct Basis {
    shift: f64,
    scale: f64,
    alpha: Vec<f64>,
    cov_alpha: Vec<Vec<f64>>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sd_population(v: &[f64], m: f64) -> f64 {
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

fn from_rows(r: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(r.len(), r.len(), |i, j| r[i][j])
}

pub fn fit_polynomial(y: &[f64], x: &[f64], order: usize) -> Result<UnivariateFit, RegressError> {
    if !(1..=2).contains(&order) {
        return Err(RegressError::BadOrder);
    }
    if y.len() != x.len() {
        return Err(RegressError::LengthMismatch);
    }
    let n = y.len();
    let p = order + 1;
    if n <= p {
        return Err(RegressError::TooFew { needed: p, got: n });
    }
    if y.iter().chain(x).any(|v| !v.is_finite()) {
        return Err(RegressError::NonFinite);
    }
    let shift = mean(x);
    let scale = sd_population(x, shift);
    if !(scale > 0.0) {
        return Err(RegressError::SingularDesign);
    }
    let design = DMatrix::from_fn(n, p, |i, j| ((x[i] - shift) / scale).powi(j as i32));
    let qr = design.clone().qr();
    let r = qr.r();
    let rmax = (0..p).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if (0..p).any(|i| r[(i, i)].abs() <= 1e-10 * rmax) {
        return Err(RegressError::SingularDesign);
    }
    let yv = DVector::from_column_slice(y);
    let qty = qr.q().transpose() * &yv;
    let alpha = r
        .solve_upper_triangular(&qty.rows(0, p).into_owned())
        .ok_or(RegressError::SingularDesign)?;
    let resid = &yv - &design * &alpha;
    let ym = mean(y);
    let tss: f64 = y.iter().map(|v| (v - ym).powi(2)).sum();
    let mut rss = resid.norm_squared();
    // Rounding residue of an exact fit.
    if rss <= 1e-24 * tss.max(ym * ym * n as f64) {
        rss = 0.0;
    }
    let nf = n as f64;
    let loglik = if rss == 0.0 {
        f64::INFINITY
    } else {
        -0.5 * nf * ((2.0 * std::f64::consts::PI * rss / nf).ln() + 1.0)
    };
    let s2 = rss / (n - p) as f64;
    let r_inv = r.try_inverse().ok_or(RegressError::SingularDesign)?;
    let cov_alpha = (&r_inv * r_inv.transpose()) * s2;
    // theta = T alpha, from expanding the powers of (x - shift) / scale.
    let mut t = DMatrix::zeros(p, p);
    for j in 0..p {
        // alpha_j u^j = alpha_j scale^-j sum_k C(j,k) x^k (-shift)^{j-k}
        for k in 0..=j {
            let binom = [[1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [1.0, 2.0, 1.0]][j][k];
            t[(k, j)] = binom * (-shift).powi((j - k) as i32) / scale.powi(j as i32);
        }
    }
    let theta = &t * &alpha;
    let cov_theta = &t * &cov_alpha * t.transpose();
    Ok(UnivariateFit {
        order,
        coefficients: theta.iter().copied().collect(),
        sigma: s2.sqrt(),
        covariance: to_rows(&cov_theta),
        n,
        rss,
        loglik,
        basis: Basis {
            shift,
            scale,
            alpha: alpha.iter().copied().collect(),
            cov_alpha: to_rows(&cov_alpha),
        },
    })
}

impl UnivariateFit {
    fn basis_at(&self, x: f64) -> Vec<f64> {
        let u = (x - self.basis.shift) / self.basis.scale;
        (0..=self.order).map(|j| u.powi(j as i32)).collect()
    }

    pub fn predict(&self, x: f64) -> f64 {
        self.basis_at(x)
            .iter()
            .zip(&self.basis.alpha)
            .map(|(g, a)| g * a)
            .sum()
    }

    /// Standard error of the mean response at `x`.
    pub fn mean_se(&self, x: f64) -> f64 {
        let g = DVector::from_vec(self.basis_at(x));
        let cov = from_rows(&self.basis.cov_alpha);
        g.dot(&(cov * &g)).max(0.0).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelChoice {
    pub chosen_order: usize,
    /// `n ln(RSS_1 / RSS_2)`, chi-square with one degree of freedom under the linear model.
    pub statistic: f64,
    pub p_value: f64,
}

/// Likelihood-ratio test of the quadratic against the linear fit.
pub fn select_model(linear: &UnivariateFit, quadratic: &UnivariateFit) -> ModelChoice {
    let (r1, r2) = (linear.rss, quadratic.rss);
    let (statistic, p_value) = if r2 == 0.0 {
        if r1 == 0.0 {
            (0.0, 1.0)
        } else {
            (f64::INFINITY, 0.0)
        }
    } else {
        let s = (linear.n as f64 * (r1 / r2).ln()).max(0.0);
        // chi2_1 survival: P(Z^2 > s) = erfc(sqrt(s/2))
        (s, two_sided_p(s.sqrt()))
    };
    let chosen_order = if p_value < LR_SIGNIFICANCE { 2 } else { 1 };
    ModelChoice {
        chosen_order,
        statistic,
        p_value,
    }
}

pub fn choose<'a>(linear: &'a UnivariateFit, quadratic: &'a UnivariateFit) -> &'a UnivariateFit {
    if select_model(linear, quadratic).chosen_order == 2 {
        quadratic
    } else {
        linear
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionBand {
    pub x: Vec<f64>,
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl PredictionBand {
    pub const CSV_HEADER: &'static str = "x,mean,lo,hi";

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for i in 0..self.x.len() {
            writeln!(
                w,
                "{},{},{},{}",
                self.x[i], self.mean[i], self.lower[i], self.upper[i]
            )?;
        }
        Ok(())
    }
}

/// Two-sided normal quantile for a central `level` interval.
pub fn normal_quantile(level: f64) -> f64 {
    Normal::standard().inverse_cdf(0.5 + 0.5 * level)
}

/// Confidence band for the mean response.
pub fn prediction_band(fit: &UnivariateFit, grid: &[f64], level: f64) -> PredictionBand {
    let z = if level == 0.95 {
        Z95
    } else {
        normal_quantile(level)
    };
    let mean: Vec<f64> = grid.iter().map(|&x| fit.predict(x)).collect();
    let half: Vec<f64> = grid.iter().map(|&x| z * fit.mean_se(x)).collect();
    PredictionBand {
        x: grid.to_vec(),
        lower: mean.iter().zip(&half).map(|(m, h)| m - h).collect(),
        upper: mean.iter().zip(&half).map(|(m, h)| m + h).collect(),
        mean,
    }
}

/// Evenly spaced grid over the observed range of `x`.
pub fn grid_over(x: &[f64], points: usize) -> Vec<f64> {
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if points < 2 || lo == hi {
        return vec![lo];
    }
    (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect()
}

/// Tobit log-likelihood in the `(delta, h) = (beta / sigma, 1 / sigma)`
/// parameterisation, in which it is globally concave.
///
/// `x` is row-major `n x k` and must include any intercept column.
/// Rows with `y <= censor` are censored.
pub struct TobitProblem<'a> {
    pub y: &'a [f64],
    pub x: &'a [f64],
    pub k: usize,
    pub censor: f64,
}

/// Log-likelihood, gradient and Hessian at a parameter vector `[delta.., h]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TobitEval {
    pub loglik: f64,
    pub gradient: Vec<f64>,
    pub hessian: Vec<f64>,
}

impl TobitProblem<'_> {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn loglik(&self, theta: &[f64]) -> f64 {
        self.evaluate(theta, false).loglik
    }

    pub fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        self.evaluate(theta, false).gradient
    }

    pub fn evaluate(&self, theta: &[f64], with_hessian: bool) -> TobitEval {
        let k = self.k;
        let d = k + 1;
        let h = theta[k];
        let n = self.n();
        let hsize = if with_hessian { d * d } else { 0 };
        let partials = par::map_range(n.div_ceil(CHUNK), |c| {
            let mut ll = 0.0;
            let mut g = vec![0.0; d];
            let mut hess = vec![0.0; hsize];
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                let row = &self.x[i * k..(i + 1) * k];
                let xd: f64 = row.iter().zip(theta).map(|(a, b)| a * b).sum();
                let yi = self.y[i];
                // Per-row gradient is w * [x, v]; Hessian is -a [x, v][x, v]' plus a diagonal term in h.
                let (w, v, a, hh);
                if yi <= self.censor {
                    let c = h * self.censor - xd;
                    let m = inv_mills(c);
                    ll += ln_norm_cdf(c);
                    w = -m;
                    v = -self.censor;
                    a = m * (c + m);
                    hh = 0.0;
                } else {
                    let r = h * yi - xd;
                    ll += h.ln() + ln_norm_pdf(r);
                    w = r;
                    v = -yi;
                    a = 1.0;
                    hh = -1.0 / (h * h);
                    g[k] += 1.0 / h;
                }
                for j in 0..k {
                    g[j] += w * row[j];
                }
                g[k] += w * v;
                if with_hessian {
                    for p in 0..d {
                        let zp = if p < k { row[p] } else { v };
                        for q in p..d {
                            let zq = if q < k { row[q] } else { v };
                            hess[p * d + q] -= a * zp * zq;
                        }
                    }
                    hess[d * d - 1] += hh;
                }
            }
            (ll, g, hess)
        });
        let mut loglik = 0.0;
        let mut gradient = vec![0.0; d];
        let mut hessian = vec![0.0; hsize];
        for (ll, g, hs) in partials {
            loglik += ll;
            for (a, b) in gradient.iter_mut().zip(&g) {
                *a += b;
            }
            for (a, b) in hessian.iter_mut().zip(&hs) {
                *a += b;
            }
        }
        if with_hessian {
            for p in 0..d {
                for q in 0..p {
                    hessian[p * d + q] = hessian[q * d + p];
                }
            }
        }
        if !(h > 0.0) {
            loglik = f64::NEG_INFINITY;
        }
        TobitEval {
            loglik,
            gradient,
            hessian,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TobitStep {
    pub iteration: usize,
    pub loglik: f64,
    pub max_abs_gradient: f64,
    pub step_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub se: f64,
    pub t: f64,
    pub p_value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TobitModel {
    pub censor_point: f64,
    /// Intercept first, named `const`, then one per regressor.
    pub coefficients: Vec<Coefficient>,
    pub sigma: f64,
    pub sigma_se: f64,
    pub loglik: f64,
    pub loglik_null: f64,
    pub pseudo_r2: f64,
    pub n: usize,
    pub n_censored: usize,
    pub iterations: usize,
    pub trace: Vec<TobitStep>,
}

impl TobitModel {
    pub fn beta(&self) -> Vec<f64> {
        self.coefficients.iter().map(|c| c.estimate).collect()
    }

    pub fn se(&self) -> Vec<f64> {
        self.coefficients.iter().map(|c| c.se).collect()
    }
}

struct NewtonOutcome {
    theta: Vec<f64>,
    eval: TobitEval,
    iterations: usize,
    trace: Vec<TobitStep>,
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Damped Newton ascent from `start`; no accepted step lowers the likelihood
/// by more than its rounding error.
fn newton(problem: &TobitProblem, start: Vec<f64>) -> Result<NewtonOutcome, RegressError> {
    let d = problem.k + 1;
    let mut theta = start;
    let mut eval = problem.evaluate(&theta, true);
    let mut trace = vec![TobitStep {
        iteration: 0,
        loglik: eval.loglik,
        max_abs_gradient: max_abs(&eval.gradient),
        step_scale: 0.0,
    }];
    for it in 1..=TOBIT_MAX_ITER {
        if max_abs(&eval.gradient) < TOBIT_GRAD_TOL {
            return Ok(NewtonOutcome {
                theta,
                eval,
                iterations: it - 1,
                trace,
            });
        }
        let neg_h = DMatrix::from_fn(d, d, |i, j| -eval.hessian[i * d + j]);
        let g = DVector::from_column_slice(&eval.gradient);
        let dir = match neg_h.clone().cholesky() {
            Some(ch) => ch.solve(&g),
            // Fall back to gradient ascent scaled by the Hessian diagonal.
            None => DVector::from_fn(d, |i, _| g[i] / neg_h[(i, i)].abs().max(1e-12)),
        };
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let cand: Vec<f64> = theta
                .iter()
                .zip(dir.iter())
                .map(|(t, s)| t + scale * s)
                .collect();
            if cand[d - 1] > 0.0 {
                let e = problem.evaluate(&cand, true);
                // Near the optimum the gain falls below the rounding of the sum itself.
                if e.loglik >= eval.loglik - 1e-13 * (1.0 + eval.loglik.abs()) {
                    accepted = Some((cand, e));
                    break;
                }
            }
            scale *= 0.5;
        }
        let Some((cand, e)) = accepted else {
            break;
        };
        theta = cand;
        eval = e;
        trace.push(TobitStep {
            iteration: it,
            loglik: eval.loglik,
            max_abs_gradient: max_abs(&eval.gradient),
            step_scale: scale,
        });
    }
    let grad = max_abs(&eval.gradient);
    if grad < TOBIT_GRAD_TOL {
        let iterations = trace.len() - 1;
        return Ok(NewtonOutcome {
            theta,
            eval,
            iterations,
            trace,
        });
    }
    Err(RegressError::NoConvergence {
        iterations: trace.len() - 1,
        grad,
        trace,
    })
}

/// OLS start on standardised data: `delta = beta / s`, `h = 1 / s`.
fn ols_start(y: &[f64], x: &[f64], k: usize) -> Result<Vec<f64>, RegressError> {
    let n = y.len();
    let a = DMatrix::from_row_slice(n, k, x);
    let b = DVector::from_column_slice(y);
    let ata = a.transpose() * &a;
    let beta = ata
        .clone()
        .cholesky()
        .ok_or(RegressError::SingularDesign)?
        .solve(&(a.transpose() * &b));
    let resid = &b - &a * &beta;
    let s = (resid.norm_squared() / n as f64).sqrt().max(1e-3);
    let mut theta: Vec<f64> = beta.iter().map(|v| v / s).collect();
    theta.push(1.0 / s);
    Ok(theta)
}

/// Left-censored regression of `y` on the columns of `regressors` plus an intercept.
pub fn fit_tobit(
    y: &[f64],
    regressors: &[Vec<f64>],
    names: &[String],
    censor: f64,
) -> Result<TobitModel, RegressError> {
    let n = y.len();
    let r = regressors.len();
    if regressors.iter().any(|c| c.len() != n) || names.len() != r {
        return Err(RegressError::LengthMismatch);
    }
    if n <= r + 3 {
        return Err(RegressError::TooFew {
            needed: r + 3,
            got: n,
        });
    }
    if y.iter()
        .chain(regressors.iter().flatten())
        .any(|v| !v.is_finite())
    {
        return Err(RegressError::NonFinite);
    }
    let n_censored = y.iter().filter(|&&v| v <= censor).count();
    if n_censored == n {
        return Err(RegressError::AllCensored);
    }
    // Standardise y and each regressor.
    let my = mean(y);
    let sy = {
        let s = sd_population(y, my);
        if s > 0.0 {
            s
        } else {
            1.0
        }
    };
    let ys: Vec<f64> = y.iter().map(|v| (v - my) / sy).collect();
    let ls = (censor - my) / sy;
    let mut centers = Vec::with_capacity(r);
    let mut scales = Vec::with_capacity(r);
    for c in regressors {
        let m = mean(c);
        let s = sd_population(c, m);
        if !(s > 0.0) {
            return Err(RegressError::SingularDesign);
        }
        centers.push(m);
        scales.push(s);
    }
    let k = r + 1;
    let mut xs = vec![0.0; n * k];
    for i in 0..n {
        xs[i * k] = 1.0;
        for j in 0..r {
            xs[i * k + j + 1] = (regressors[j][i] - centers[j]) / scales[j];
        }
    }
    let problem = TobitProblem {
        y: &ys,
        x: &xs,
        k,
        censor: ls,
    };
    let fit = newton(&problem, ols_start(&ys, &xs, k)?)?;
    let null = {
        let ones = vec![1.0; n];
        let p0 = TobitProblem {
            y: &ys,
            x: &ones,
            k: 1,
            censor: ls,
        };
        newton(&p0, ols_start(&ys, &ones, 1)?)?
    };
    let n_unc = (n - n_censored) as f64;
    // Densities pick up 1/sy per uncensored row under y -> (y - my) / sy.
    let loglik = fit.eval.loglik - n_unc * sy.ln();
    let loglik_null = null.eval.loglik - n_unc * sy.ln();

    let d = k + 1;
    let neg_h = DMatrix::from_fn(d, d, |i, j| -fit.eval.hessian[i * d + j]);
    let cov_theta = neg_h.try_inverse().ok_or(RegressError::SingularDesign)?;
    let delta = &fit.theta[..k];
    let h = fit.theta[k];
    // Output (beta_0, beta_1.., sigma) as a function of (delta, h).
    // Standardised beta' = delta / h, sigma' = 1 / h.
    let mut dstd = DMatrix::zeros(d, d);
    for j in 0..k {
        dstd[(j, j)] = 1.0 / h;
        dstd[(j, k)] = -delta[j] / (h * h);
    }
    dstd[(k, k)] = -1.0 / (h * h);
    // Original: beta_j = sy b'_j / s_j; beta_0 = my + sy (b'_0 - sum b'_j m_j / s_j); sigma = sy sigma'.
    let mut lin = DMatrix::zeros(d, d);
    lin[(0, 0)] = sy;
    for j in 0..r {
        lin[(j + 1, j + 1)] = sy / scales[j];
        lin[(0, j + 1)] = -sy * centers[j] / scales[j];
    }
    lin[(k, k)] = sy;
    let jac = &lin * &dstd;
    let cov = &jac * cov_theta * jac.transpose();
    let std_est: Vec<f64> = (0..k).map(|j| delta[j] / h).chain([1.0 / h]).collect();
    let est = &lin * DVector::from_vec(std_est);
    let est0 = est[0] + my;

    let mut coefficients = Vec::with_capacity(k);
    for j in 0..k {
        let estimate = if j == 0 { est0 } else { est[j] };
        let se = cov[(j, j)].max(0.0).sqrt();
        let t = estimate / se;
        coefficients.push(Coefficient {
            name: if j == 0 {
                "const".to_string()
            } else {
                names[j - 1].clone()
            },
            estimate,
            se,
            t,
            p_value: two_sided_p(t),
            ci_low: estimate - Z95 * se,
            ci_high: estimate + Z95 * se,
        });
    }
    let pseudo_r2 = 1.0 - loglik / loglik_null;
    Ok(TobitModel {
        censor_point: censor,
        coefficients,
        sigma: est[k],
        sigma_se: cov[(k, k)].max(0.0).sqrt(),
        loglik,
        loglik_null,
        pseudo_r2,
        n,
        n_censored,
        iterations: fit.iterations,
        trace: fit.trace,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Describe {
    pub name: String,
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

/// Summary statistics; the standard deviation uses `n - 1` (zero for one value).
pub fn describe(name: &str, v: &[f64]) -> Option<Describe> {
    if v.is_empty() {
        return None;
    }
    let m = mean(v);
    let sd = if v.len() > 1 {
        (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
    } else {
        0.0
    };
    Some(Describe {
        name: name.to_string(),
        n: v.len(),
        mean: m,
        sd,
        min: v.iter().copied().fold(f64::INFINITY, f64::min),
        max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

//! Special functions, quadrature and small optimisers shared by the fitting code.

use libm::erfc;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// `B_{2j} / (2j)!` for j = 1..=8.
const EM_COEFFS: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 720.0,
    1.0 / 30_240.0,
    -1.0 / 1_209_600.0,
    1.0 / 47_900_160.0,
    -691.0 / 1_307_674_368_000.0,
    1.0 / 74_724_249_600.0,
    -3617.0 / 10_670_622_842_880_000.0,
];

/// Hurwitz zeta `sum_{k>=0} (k + q)^{-s}` for `s > 1`, `q > 0`, by Euler-Maclaurin.
pub fn hurwitz_zeta(s: f64, q: f64) -> f64 {
    debug_assert!(s > 1.0 && q > 0.0);
    let direct = if q < 12.0 {
        (12.0 - q).ceil() as usize
    } else {
        0
    };
    let mut sum = 0.0;
    for k in 0..direct {
        sum += (q + k as f64).powf(-s);
    }
    let a = q + direct as f64;
    let a_s = a.powf(-s);
    sum += a * a_s / (s - 1.0) + 0.5 * a_s;
    // Rising factorial s (s+1) ... (s+2j-2) times a^{-s-2j+1}.
    let mut term = s * a_s / a;
    let inv_a2 = 1.0 / (a * a);
    for (j, c) in EM_COEFFS.iter().enumerate() {
        let add = c * term;
        sum += add;
        if add.abs() < 1e-17 * sum.abs() {
            break;
        }
        let k = 2 * j + 1;
        term *= (s + k as f64) * (s + k as f64 + 1.0) * inv_a2;
    }
    sum
}

/// `ln Phi(z)` for the standard normal CDF, accurate far into the lower tail.
pub fn ln_norm_cdf(z: f64) -> f64 {
    if z > -30.0 {
        (0.5 * erfc(-z / std::f64::consts::SQRT_2)).ln()
    } else {
        let z2 = z * z;
        let series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2);
        -0.5 * z2 - (-z).ln() - LN_SQRT_2PI + series.ln()
    }
}

/// `ln phi(z)`.
pub fn ln_norm_pdf(z: f64) -> f64 {
    -0.5 * z * z - LN_SQRT_2PI
}

/// Standard normal CDF.
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Inverse Mills ratio `phi(z) / Phi(z)`.
pub fn inv_mills(z: f64) -> f64 {
    if z > -30.0 {
        (ln_norm_pdf(z) - ln_norm_cdf(z)).exp()
    } else {
        // phi/Phi ~ -z / (1 - 1/z^2 + 3/z^4 - ...)
        let z2 = z * z;
        -z / (1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2))
    }
}

/// Two-sided p-value of a standard normal statistic.
pub fn two_sided_p(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0)
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const G_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One Gauss-Kronrod 7/15 panel: `(kronrod estimate, |kronrod - gauss|)`.
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = GK_WEIGHTS[7] * fc;
    let mut g = G_WEIGHTS[3] * fc;
    for i in 0..7 {
        let dx = h * GK_NODES[i];
        let s = f(c - dx) + f(c + dx);
        k += GK_WEIGHTS[i] * s;
        if i % 2 == 1 {
            g += G_WEIGHTS[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss-Kronrod quadrature on `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> f64 {
    let mut panels = vec![(a, b, gk15(&f, a, b))];
    for _ in 0..2000 {
        let total: f64 = panels.iter().map(|p| p.2 .0).sum();
        let err: f64 = panels.iter().map(|p| p.2 .1).sum();
        if err <= rel_tol * total.abs() || err < 1e-300 {
            break;
        }
        let (i, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2 .1.total_cmp(&y.1 .2 .1))
            .expect("non-empty");
        let (lo, hi, _) = panels.swap_remove(i);
        let mid = 0.5 * (lo + hi);
        panels.push((lo, mid, gk15(&f, lo, mid)));
        panels.push((mid, hi, gk15(&f, mid, hi)));
    }
    panels.iter().map(|p| p.2 .0).sum()
}

/// Maximiser of a unimodal function on `[lo, hi]` by golden-section search.
/// Returns `(argmax, max)`.
pub fn golden_max<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    const R: f64 = 0.618_033_988_749_894_9;
    let mut x1 = hi - R * (hi - lo);
    let mut x2 = lo + R * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while (hi - lo) > tol * (1.0 + x1.abs().max(x2.abs())) {
        // NaN compares false, so a NaN at x1 moves the bracket away from it.
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - R * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + R * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

#[derive(Debug, Clone)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Nelder-Mead maximisation from `start` with initial step `step` per axis.
pub fn nelder_mead_max<F: Fn(&[f64]) -> f64>(
    f: F,
    start: &[f64],
    step: &[f64],
    tol: f64,
    max_iter: usize,
) -> NelderMeadResult {
    let d = start.len();
    let eval = |x: &[f64]| {
        let v = -f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
    simplex.push((start.to_vec(), eval(start)));
    for i in 0..d {
        let mut x = start.to_vec();
        x[i] += step[i];
        let v = eval(&x);
        simplex.push((x, v));
    }
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[d].1;
        let spread = simplex
            .iter()
            .map(|p| {
                (0..d)
                    .map(|k| (p.0[k] - simplex[0].0[k]).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if (worst - best).abs() <= tol * (best.abs() + tol) && spread < tol.sqrt() {
            converged = true;
            break;
        }
        let centroid: Vec<f64> = (0..d)
            .map(|k| simplex[..d].iter().map(|p| p.0[k]).sum::<f64>() / d as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            (0..d)
                .map(|k| centroid[k] + t * (simplex[d].0[k] - centroid[k]))
                .collect()
        };
        let xr = along(-1.0);
        let fr = eval(&xr);
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = eval(&xe);
            simplex[d] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[d - 1].1 {
            simplex[d] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[d].1 {
                let x = along(-0.5);
                let v = eval(&x);
                (x, v)
            } else {
                let x = along(0.5);
                let v = eval(&x);
                (x, v)
            };
            if fc < simplex[d].1.min(fr) {
                simplex[d] = (xc, fc);
            } else {
                let x0 = simplex[0].0.clone();
                for p in simplex.iter_mut().skip(1) {
                    for k in 0..d {
                        p.0[k] = x0[k] + 0.5 * (p.0[k] - x0[k]);
                    }
                    p.1 = eval(&p.0);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    NelderMeadResult {
        x: simplex[0].0.clone(),
        value: -simplex[0].1,
        iterations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zeta_brute(s: f64, q: f64) -> f64 {
        // Direct partial sum plus the integral and midpoint corrections of the remainder.
        let n = 200_000usize;
        let mut sum = 0.0;
        for k in (0..n).rev() {
            sum += (q + k as f64).powf(-s);
        }
        let a = q + n as f64;
        sum + a.powf(1.0 - s) / (s - 1.0) + 0.5 * a.powf(-s)
    }

    #[test]
    fn zeta_matches_brute_force() {
        for &(s, q) in &[
            (1.5, 1.0),
            (2.0, 1.0),
            (2.71, 39.0),
            (3.5, 2.0),
            (1.05, 7.0),
            (8.0, 1.0),
            (2.2, 3000.0),
        ] {
            let a = hurwitz_zeta(s, q);
            let b = zeta_brute(s, q);
            assert!(((a - b) / b).abs() < 1e-11, "s={s} q={q}: {a} vs {b}");
        }
        assert!((hurwitz_zeta(2.0, 1.0) - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-14);
    }

    #[test]
    fn normal_tail_functions() {
        assert!((norm_cdf(0.0) - 0.5).abs() < 1e-16);
        let d = ln_norm_cdf(-1.959963984540054) - 0.025f64.ln();
        assert!(d.abs() < 1e-12, "{d}");
        // Branches agree around the switch point.
        let a = ln_norm_cdf(-29.999_999);
        let z: f64 = -29.999_999;
        let z2 = z * z;
        let asym = -0.5 * z2 - (-z).ln() - LN_SQRT_2PI
            + (1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2)).ln();
        assert!((a - asym).abs() < 1e-9);
        assert!(((inv_mills(-40.0) - 40.0) / 40.0).abs() < 1e-3);
        assert!((inv_mills(0.0) - 2.0 * (-LN_SQRT_2PI).exp()).abs() < 1e-15);
    }

    #[test]
    fn quadrature_and_optimisers() {
        let v = integrate(|x| (-x).exp(), 0.0, 30.0, 1e-12);
        assert!((v - (1.0 - (-30f64).exp())).abs() < 1e-12);
        let (x, _) = golden_max(|x| -(x - 1.3).powi(2), -5.0, 5.0, 1e-12);
        assert!((x - 1.3).abs() < 1e-8);
        let r = nelder_mead_max(
            |p| -(p[0] - 1.0).powi(2) - 3.0 * (p[1] + 2.0).powi(2),
            &[0.0, 0.0],
            &[0.5, 0.5],
            1e-14,
            5000,
        );
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-5 && (r.x[1] + 2.0).abs() < 1e-5);
    }
}

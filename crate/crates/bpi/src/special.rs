//! Special-function kernels behind power-law offspring tails.
//!
//! A tail `w_i = A·i^{-(1+α)}` contributes sums of the form
//! `Σ_{k≥m} k^{-s}`, `Σ_{k≥m} k^{-s} u^k` and Hurwitz-zeta tail masses.
//! Near `u = 1` direct summation needs ~`1/(1-u)` terms, so the series are
//! evaluated with Euler–Maclaurin plus an upper incomplete gamma for the
//! integral part. These kernels stay accurate down to `1 - u ≈ 2^{-46}`,
//! which the endpoint refinement in `functionals::limit_at` relies on.

use statrs::function::gamma::gamma;

/// Euler–Maclaurin tail `Σ_{n≥0} (a+n)^{-s}` for `s > 1`, `a > 0`.
pub fn hurwitz_zeta(s: f64, a: f64) -> f64 {
    assert!(s > 1.0, "hurwitz_zeta requires s > 1, got {s}");
    assert!(a > 0.0);
    let cut = 32.0f64.max(a);
    let mut sum = 0.0;
    let mut k = a;
    while k < cut {
        sum += k.powf(-s);
        k += 1.0;
    }
    sum + em_tail(s, k, 0.0)
}

/// `Σ_{k≥m} k^{-s} e^{-λk}`; for `λ = 0` requires `s > 1`.
pub fn power_sum_exp(s: f64, m: u64, lambda: f64) -> f64 {
    assert!(lambda >= 0.0);
    let m = m.max(1) as f64;
    if lambda == 0.0 {
        return hurwitz_zeta(s, m);
    }
    if lambda * m > 745.0 {
        return 0.0;
    }
    if lambda >= 0.05 {
        // Direct summation, geometric e-folding every 1/λ terms.
        let mut sum = 0.0;
        let mut k = m;
        loop {
            let term = k.powf(-s) * (-lambda * k).exp();
            sum += term;
            if term < 1e-18 * (sum.abs() + 1e-300) || lambda * k > 745.0 {
                return sum;
            }
            k += 1.0;
        }
    }
    // Direct head, then Euler–Maclaurin from a safely large index.
    let cut = m + 200.0;
    let mut sum = 0.0;
    let mut k = m;
    while k < cut {
        sum += k.powf(-s) * (-lambda * k).exp();
        k += 1.0;
    }
    sum + em_tail(s, k, lambda)
}

/// Euler–Maclaurin estimate of `Σ_{k≥a} k^{-s} e^{-λk}` for large `a`.
fn em_tail(s: f64, a: f64, lambda: f64) -> f64 {
    let f = |x: f64| x.powf(-s) * (-lambda * x).exp();
    let integral = if lambda == 0.0 {
        a.powf(1.0 - s) / (s - 1.0)
    } else {
        // ∫_a^∞ x^{-s} e^{-λx} dx = λ^{s-1} Γ(1-s, λa)
        lambda.powf(s - 1.0) * upper_gamma(1.0 - s, lambda * a)
    };
    let fa = f(a);
    let g1 = -s / a - lambda; // (ln f)'
    let g2 = s / (a * a);
    let g3 = -2.0 * s / (a * a * a);
    let g4 = 6.0 * s / (a * a * a * a);
    let g5 = -24.0 * s / (a.powi(5));
    let d1 = g1 * fa;
    let d3 = (g3 + 3.0 * g1 * g2 + g1 * g1 * g1) * fa;
    let d5 = (g5 + 5.0 * g1 * g4 + 10.0 * g2 * g3 + 10.0 * g1 * g1 * g3
        + 15.0 * g1 * g2 * g2 + 10.0 * g1 * g1 * g1 * g2
        + g1.powi(5))
        * fa;
    integral + 0.5 * fa - d1 / 12.0 + d3 / 720.0 - d5 / 30240.0
}

/// Upper incomplete gamma `Γ(a, x)` for real `a` (any sign) and `x > 0`.
pub fn upper_gamma(a: f64, x: f64) -> f64 {
    assert!(x > 0.0, "upper_gamma requires x > 0");
    if x >= 1.5 {
        return upper_gamma_cf(a, x);
    }
    // Raise the order into [2, 3), evaluate by series, then step back down
    // with Γ(a, x) = (Γ(a+1, x) − x^a e^{-x}) / a.
    let n = (2.0 - a).ceil().max(0.0);
    let top = a + n;
    let mut g = gamma(top) - lower_gamma_series(top, x);
    let mut j = n as i64;
    while j > 0 {
        j -= 1;
        let aj = a + j as f64;
        if aj == 0.0 {
            g = exp_integral_e1(x);
        } else {
            g = (g - x.powf(aj) * (-x).exp()) / aj;
        }
    }
    g
}

/// Lentz continued fraction for `Γ(a, x)`; stable for `x ≳ a + 1`.
fn upper_gamma_cf(a: f64, x: f64) -> f64 {
    const FPMIN: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / FPMIN;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..400 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = b + an / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x + a * x.ln()).exp() * h
}

/// Series for the lower incomplete gamma `γ(a, x)`, `a > 0`.
fn lower_gamma_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut sum = 1.0 / a;
    let mut del = sum;
    for _ in 0..500 {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * 1e-17 {
            break;
        }
    }
    sum * (-x + a * x.ln()).exp()
}

/// Exponential integral `E₁(x) = Γ(0, x)` for `0 < x < 1.5`.
fn exp_integral_e1(x: f64) -> f64 {
    const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
    let mut sum = 0.0;
    let mut term = 1.0;
    for k in 1..200 {
        term *= -x / k as f64;
        let add = term / k as f64;
        sum += add;
        if add.abs() < 1e-18 {
            break;
        }
    }
    -EULER_GAMMA - x.ln() - sum
}

//! Adaptive Gauss–Kronrod quadrature and Chebyshev panel interpolants.
//!
//! The boundary functionals integrate ratios of mechanism series whose only
//! singularities sit at the interval endpoints `0` and `1`. Gauss–Kronrod
//! nodes are interior, so integrands may blow up at the endpoints as long
//! as the integral itself converges; the adaptive bisection concentrates
//! panels near the singular end.

/// 15-point Kronrod nodes on [0, 1] side (symmetric), from the QUADPACK tables.
const XGK15: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.000000000000000,
];

/// Kronrod weights matching `XGK15`.
const WGK15: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];

/// 7-point Gauss weights embedded in the 15-point rule.
const WG7: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

/// One Gauss–Kronrod 15 panel: returns (estimate, error estimate).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kron = WGK15[7] * fc;
    let mut gauss = WG7[3] * fc;
    let mut resabs = kron.abs();
    let mut fv = [0.0f64; 15];
    fv[7] = fc;
    for j in 0..7 {
        let x = half * XGK15[j];
        let f1 = f(center - x);
        let f2 = f(center + x);
        fv[j] = f1;
        fv[14 - j] = f2;
        kron += WGK15[j] * (f1 + f2);
        resabs += WGK15[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG7[j / 2] * (f1 + f2);
        }
    }
    let mean = kron * 0.5;
    let mut resasc = WGK15[7] * (fc - mean).abs();
    for j in 0..7 {
        resasc += WGK15[j] * ((fv[j] - mean).abs() + (fv[14 - j] - mean).abs());
    }
    resasc *= half.abs();
    let result = kron * half;
    let mut err = ((kron - gauss) * half).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    let round = 50.0 * f64::EPSILON * resabs * half.abs();
    (result, err.max(round))
}

/// Outcome of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
}

/// Adaptive integral of `f` over `[a, b]` (signed if `a > b`).
///
/// Splits the worst panel until `abs_tol + rel_tol * |I|` is met or the
/// panel budget is exhausted. Non-finite panel values poison the result,
/// which callers interpret as divergence.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> QuadResult {
    if a == b {
        return QuadResult { value: 0.0, error: 0.0, converged: true };
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    // (neg error priority, lo, hi, value, err)
    let mut panels: Vec<(f64, f64, f64, f64)> = Vec::with_capacity(64);
    let (v, e) = gk15(&f, lo, hi);
    panels.push((lo, hi, v, e));
    let mut total = v;
    let mut total_err = e;
    let max_panels = 4096;
    for _ in 0..max_panels {
        if !total.is_finite() {
            return QuadResult { value: sign * total, error: f64::INFINITY, converged: false };
        }
        let tol = abs_tol + rel_tol * total.abs();
        if total_err <= tol {
            break;
        }
        // Split the panel with the largest error.
        let (idx, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.partial_cmp(&y.1 .3).unwrap_or(std::cmp::Ordering::Equal))
            .expect("nonempty");
        let (pa, pb, pv, pe) = panels.swap_remove(idx);
        let mid = 0.5 * (pa + pb);
        if mid <= pa || mid >= pb {
            // Panel at floating-point resolution; keep as is.
            panels.push((pa, pb, pv, pe));
            break;
        }
        let (v1, e1) = gk15(&f, pa, mid);
        let (v2, e2) = gk15(&f, mid, pb);
        total += v1 + v2 - pv;
        total_err += e1 + e2 - pe;
        panels.push((pa, mid, v1, e1));
        panels.push((mid, pb, v2, e2));
    }
    // Recompute totals in deterministic order to shed accumulated drift.
    panels.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap_or(std::cmp::Ordering::Equal));
    total = panels.iter().map(|p| p.2).sum();
    total_err = panels.iter().map(|p| p.3).sum();
    let tol = abs_tol + rel_tol * total.abs();
    QuadResult {
        value: sign * total,
        error: total_err,
        converged: total.is_finite() && total_err <= tol,
    }
}

/// Chebyshev interpolant of a smooth function on `[a, b]`.
#[derive(Debug, Clone)]
pub struct Cheb {
    pub a: f64,
    pub b: f64,
    /// Chebyshev-T coefficients, `c0/2 + sum c_k T_k`.
    pub coef: Vec<f64>,
}

impl Cheb {
    /// Fits `n`-point Chebyshev coefficients of `f`.
    pub fn fit<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> Self {
        let mut fx = vec![0.0; n];
        let nf = n as f64;
        for (k, v) in fx.iter_mut().enumerate() {
            let theta = std::f64::consts::PI * (k as f64 + 0.5) / nf;
            let x = 0.5 * (a + b) + 0.5 * (b - a) * theta.cos();
            *v = f(x);
        }
        let mut coef = vec![0.0; n];
        for (j, c) in coef.iter_mut().enumerate() {
            let mut s = 0.0;
            for (k, &v) in fx.iter().enumerate() {
                s += v * (std::f64::consts::PI * j as f64 * (k as f64 + 0.5) / nf).cos();
            }
            *c = 2.0 * s / nf;
        }
        Cheb { a, b, coef }
    }

    /// Clenshaw evaluation.
    pub fn eval(&self, x: f64) -> f64 {
        let t = (2.0 * x - self.a - self.b) / (self.b - self.a);
        let t2 = 2.0 * t;
        let mut d = 0.0;
        let mut dd = 0.0;
        for &c in self.coef.iter().skip(1).rev() {
            let sv = d;
            d = t2 * d - dd + c;
            dd = sv;
        }
        t * d - dd + 0.5 * self.coef[0]
    }

    /// Antiderivative with value 0 at `a`.
    pub fn antiderivative(&self) -> Cheb {
        let n = self.coef.len();
        let scale = 0.25 * (self.b - self.a);
        let mut out = vec![0.0; n + 1];
        for j in 1..n {
            let next = if j + 1 < n { self.coef[j + 1] } else { 0.0 };
            out[j] = scale * (self.coef[j - 1] - next) / j as f64;
        }
        if n >= 1 {
            // j = n term from c_{n-1}
            out[n] = scale * self.coef[n - 1] / n as f64;
        }
        let mut cheb = Cheb { a: self.a, b: self.b, coef: out };
        // Normalise so the antiderivative vanishes at the left endpoint.
        let at_a = cheb.eval(self.a);
        cheb.coef[0] -= 2.0 * at_a;
        cheb
    }

    /// Magnitude of the trailing coefficients, a convergence proxy.
    pub fn tail_magnitude(&self) -> f64 {
        let n = self.coef.len();
        self.coef[n.saturating_sub(3)..]
            .iter()
            .fold(0.0f64, |m, c| m.max(c.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomial_exactly() {
        let r = integrate(|x| 3.0 * x * x, 0.0, 2.0, 1e-12, 1e-14);
        assert!(r.converged);
        assert!((r.value - 8.0).abs() < 1e-12);
    }

    #[test]
    fn handles_integrable_endpoint_singularity() {
        // ∫_0^1 u^{-1/2} du = 2
        let r = integrate(|x| x.powf(-0.5), 0.0, 1.0, 1e-10, 1e-12);
        assert!(r.converged, "err = {}", r.error);
        assert!((r.value - 2.0).abs() < 1e-8, "value = {}", r.value);
    }

    #[test]
    fn signed_orientation() {
        let f = |x: f64| x.cos();
        let fwd = integrate(f, 0.0, 1.0, 1e-12, 1e-14).value;
        let back = integrate(f, 1.0, 0.0, 1e-12, 1e-14).value;
        assert!((fwd + back).abs() < 1e-14);
    }

    #[test]
    fn cheb_antiderivative_matches_closed_form() {
        let c = Cheb::fit(|x| x.exp(), -0.5, 1.5, 24);
        let anti = c.antiderivative();
        for &x in &[-0.5f64, -0.1, 0.3, 0.9, 1.5] {
            let expect = x.exp() - (-0.5f64).exp();
            assert!((anti.eval(x) - expect).abs() < 1e-12, "x={x}");
        }
    }
}

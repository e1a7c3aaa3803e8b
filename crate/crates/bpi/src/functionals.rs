//! The boundary functionals `Q, J, S, R, E, I`, the time-change map `Υ`,
//! and certified limits at the endpoints 0 and 1.
//!
//! For a fixed anchor `θ ∈ (0,1)` let `A(x) = Q(θ;x) = ∫_θ^x Ψ/(wΦ) dw`.
//! Every functional reduces to combinations of four cumulative integrals
//! anchored at `θ`:
//!
//! ```text
//! A(x)  = ∫_θ^x ψ(w) dw                    ψ = Ψ/(wΦ), cancelled form
//! S̃(x) = ∫_θ^x e^{-A(u)} du               so S(y;x) = e^{A(y)} (S̃x − S̃y)
//! R̃(x) = ∫_θ^x e^{A(u)} / (uΦ(u)) du      so R(y;x) = e^{-A(y)} (R̃x − R̃y)
//! Ĩ(x) = ∫_θ^x R̃(u) e^{-A(u)} du          so I(y;x) = (Ĩx − Ĩy) − R̃y (S̃x − S̃y)
//! ```
//!
//! and `E(y;x) = R̃(x)(S̃x − S̃y) − (Ĩx − Ĩy)`. Each cumulative integral is
//! tabulated once per `(mechanism, θ)` on a dyadic grid refined toward both
//! endpoints, with per-panel Chebyshev interpolants built lazily for
//! pointwise queries; nested integrals therefore cost one inner evaluation,
//! not one inner quadrature.
//!
//! Endpoint limits are decided by refinement at `x = boundary ∓ 2^{-k}`:
//! geometrically decaying shell increments mean convergence (plus an
//! extrapolated tail bound), sign-consistent non-decaying increments mean
//! divergence, and everything else is reported as `Inconclusive` with the
//! refinement trace attached. Analytic verdicts proved for this mechanism
//! class override the numerics where they apply.

use crate::mechanisms::{Mechanism, Regime};
use crate::quad::{integrate, Cheb};
use crate::{BpiError, Result};
use serde::Serialize;
use std::sync::Mutex;

/// Verdict kind of an improper-integral evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExtKind {
    Finite,
    PlusInf,
    MinusInf,
    Inconclusive,
}

/// One refinement shell: distance to the boundary and the functional value.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Refinement {
    pub eps: f64,
    pub value: f64,
}

/// Result of an improper-integral evaluation.
#[derive(Debug, Clone, Serialize)]
pub struct ExtendedReal {
    pub kind: ExtKind,
    /// Meaningful only when `kind == Finite`.
    pub value: f64,
    pub error_bound: f64,
    pub diagnostics: Vec<Refinement>,
}

impl ExtendedReal {
    pub fn finite(value: f64, error_bound: f64, diagnostics: Vec<Refinement>) -> Self {
        ExtendedReal { kind: ExtKind::Finite, value, error_bound, diagnostics }
    }

    pub fn infinite(positive: bool, diagnostics: Vec<Refinement>) -> Self {
        ExtendedReal {
            kind: if positive { ExtKind::PlusInf } else { ExtKind::MinusInf },
            value: if positive { f64::INFINITY } else { f64::NEG_INFINITY },
            error_bound: f64::INFINITY,
            diagnostics,
        }
    }

    fn inconclusive(diagnostics: Vec<Refinement>) -> Self {
        ExtendedReal {
            kind: ExtKind::Inconclusive,
            value: f64::NAN,
            error_bound: f64::INFINITY,
            diagnostics,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.kind == ExtKind::Finite
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self.kind, ExtKind::PlusInf | ExtKind::MinusInf)
    }
}

/// Tolerances and budgets for the improper-integral machinery.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct QuadratureConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_refinements: u32,
    pub divergence_threshold: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            rel_tol: 1e-8,
            abs_tol: 1e-12,
            max_refinements: 40,
            divergence_threshold: 1e12,
        }
    }
}

/// The six boundary functionals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Functional {
    Q,
    J,
    S,
    R,
    E,
    I,
}

/// Endpoint selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Boundary {
    Zero,
    One,
}

/// Dyadic shell depth of the cumulative grids (ε down to 2^-48).
const MAX_DEPTH: u32 = 48;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Kernel {
    Ratio,
    ExpNegA,
    RKernel,
    IKernel,
    InvPhi,
}

struct CumGrid {
    /// Ascending breakpoints; `theta` sits at index `MAX_DEPTH`.
    bps: Vec<f64>,
    /// Signed cumulative integral from `theta` to each breakpoint.
    cum: Vec<f64>,
    /// Lazily built per-panel interpolants of the kernel antiderivative.
    interp: Vec<Option<Cheb>>,
}

/// Per-`(mechanism, θ)` evaluation context for the boundary functionals.
///
/// Shareable across threads; the cumulative grids behind the cache are
/// deterministic functions of `(mechanism, θ, cfg)`, so last-writer-wins
/// rebuilds cannot change any result.
pub struct Functionals {
    pub mech: Mechanism,
    pub theta: f64,
    pub cfg: QuadratureConfig,
    grids: [Mutex<Option<CumGrid>>; 5],
}

impl Functionals {
    pub fn new(mech: &Mechanism, theta: f64, cfg: QuadratureConfig) -> Result<Self> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(BpiError::PreconditionViolated(format!(
                "theta must lie in (0,1), got {theta}"
            )));
        }
        if !mech.hypothesis_h() {
            return Err(BpiError::Regime {
                varsigma: mech.varsigma(),
                context: "boundary functionals need competition with dominated cooperation",
            });
        }
        Ok(Functionals { mech: mech.clone(), theta, cfg, grids: Default::default() })
    }

    /// Convenience constructor with the default anchor `θ = 0.5`.
    pub fn with_default_theta(mech: &Mechanism) -> Result<Self> {
        Self::new(mech, 0.5, QuadratureConfig::default())
    }

    fn kernel_value(&self, which: Kernel, u: f64) -> f64 {
        match which {
            Kernel::Ratio => self.mech.ratio(u),
            Kernel::ExpNegA => (-self.a_of(u)).exp(),
            Kernel::RKernel => {
                let phi = self.mech.phi(u);
                (self.a_of(u) - (u * phi).ln()).exp()
            }
            Kernel::IKernel => self.r_tilde(u) * (-self.a_of(u)).exp(),
            Kernel::InvPhi => 1.0 / self.mech.phi(u),
        }
    }

    fn with_grid<T>(&self, which: Kernel, f: impl FnOnce(&mut CumGrid) -> T) -> T {
        let idx = match which {
            Kernel::Ratio => 0,
            Kernel::ExpNegA => 1,
            Kernel::RKernel => 2,
            Kernel::IKernel => 3,
            Kernel::InvPhi => 4,
        };
        let built = { self.grids[idx].lock().expect("grid lock").is_some() };
        if !built {
            // Build outside the lock: kernels for the derived grids call
            // back into `a_of`/`r_tilde`, which take the Ratio/RKernel locks.
            let grid = self.build_grid(which);
            let mut guard = self.grids[idx].lock().expect("grid lock");
            if guard.is_none() {
                *guard = Some(grid);
            }
        }
        let mut guard = self.grids[idx].lock().expect("grid lock");
        f(guard.as_mut().expect("grid present"))
    }

    fn build_grid(&self, which: Kernel) -> CumGrid {
        let theta = self.theta;
        let mut bps = Vec::with_capacity(2 * MAX_DEPTH as usize + 1);
        for j in (1..=MAX_DEPTH).rev() {
            bps.push(theta * 0.5f64.powi(j as i32));
        }
        bps.push(theta);
        for j in 1..=MAX_DEPTH {
            bps.push(1.0 - (1.0 - theta) * 0.5f64.powi(j as i32));
        }
        let zero_idx = MAX_DEPTH as usize;
        let mut cum = vec![0.0f64; bps.len()];
        // Outward from theta in both directions; a panel that has gone
        // non-finite poisons everything beyond it.
        for i in (zero_idx + 1)..bps.len() {
            let prev = cum[i - 1];
            cum[i] = if prev.is_finite() {
                prev + self.panel_integral(which, bps[i - 1], bps[i])
            } else {
                prev
            };
        }
        for i in (0..zero_idx).rev() {
            let prev = cum[i + 1];
            cum[i] = if prev.is_finite() {
                prev - self.panel_integral(which, bps[i], bps[i + 1])
            } else {
                prev
            };
        }
        let interp = bps.iter().map(|_| None).collect::<Vec<_>>();
        CumGrid { bps, cum, interp }
    }

    fn panel_integral(&self, which: Kernel, a: f64, b: f64) -> f64 {
        integrate(
            |u| self.kernel_value(which, u),
            a,
            b,
            self.cfg.rel_tol * 1e-2,
            self.cfg.abs_tol * 1e-2,
        )
        .value
    }

    /// Breakpoint and cumulative value at dyadic shell `k` toward a boundary.
    fn cum_at_shell(&self, which: Kernel, boundary: Boundary, k: u32) -> (f64, f64) {
        self.with_grid(which, |g| {
            let zero_idx = MAX_DEPTH as usize;
            let idx = match boundary {
                Boundary::One => zero_idx + k as usize,
                Boundary::Zero => zero_idx - k as usize,
            };
            (g.bps[idx], g.cum[idx])
        })
    }

    /// Pointwise cumulative `∫_θ^u kernel` via the panel interpolants.
    fn cum_point(&self, which: Kernel, u: f64) -> f64 {
        // Interpolant construction calls the kernel, which for derived grids
        // re-enters `with_grid` on *other* kernels; compute lazily outside
        // the lock when a panel is missing.
        loop {
            enum Probe {
                Value(f64),
                NeedPanel(usize, f64, f64),
            }
            let probe = self.with_grid(which, |g| {
                if u <= g.bps[0] || u >= *g.bps.last().expect("nonempty") {
                    let idx = if u <= g.bps[0] { 0 } else { g.bps.len() - 1 };
                    return Probe::Value(g.cum[idx]);
                }
                let i = match g.bps.binary_search_by(|p| p.partial_cmp(&u).expect("ordered")) {
                    Ok(exact) => return Probe::Value(g.cum[exact]),
                    Err(ins) => ins - 1,
                };
                if !g.cum[i].is_finite() {
                    return Probe::Value(g.cum[i]);
                }
                match &g.interp[i] {
                    Some(cheb) => Probe::Value(g.cum[i] + cheb.eval(u)),
                    None => Probe::NeedPanel(i, g.bps[i], g.bps[i + 1]),
                }
            });
            match probe {
                Probe::Value(v) => return v,
                Probe::NeedPanel(i, a, b) => {
                    let anti = Cheb::fit(|x| self.kernel_value(which, x), a, b, 48)
                        .antiderivative();
                    self.with_grid(which, |g| {
                        if g.interp[i].is_none() {
                            g.interp[i] = Some(anti.clone());
                        }
                    });
                }
            }
        }
    }

    /// `A(u) = Q(θ; u)` through the cache.
    pub(crate) fn a_of(&self, u: f64) -> f64 {
        self.cum_point(Kernel::Ratio, u)
    }

    pub(crate) fn s_tilde(&self, u: f64) -> f64 {
        self.cum_point(Kernel::ExpNegA, u)
    }

    pub(crate) fn r_tilde(&self, u: f64) -> f64 {
        self.cum_point(Kernel::RKernel, u)
    }

    pub(crate) fn i_tilde(&self, u: f64) -> f64 {
        self.cum_point(Kernel::IKernel, u)
    }

    fn require_interior(&self, v: f64, name: &'static str) -> Result<()> {
        if v > 0.0 && v < 1.0 {
            Ok(())
        } else {
            Err(BpiError::PreconditionViolated(format!(
                "{name} = {v} must lie in (0,1)"
            )))
        }
    }

    /// `Q(y;x) = ∫_y^x Ψ/(wΦ) dw` by direct adaptive quadrature.
    pub fn q_func(&self, y: f64, x: f64) -> Result<f64> {
        self.require_interior(y, "y")?;
        self.require_interior(x, "x")?;
        let r = integrate(|u| self.mech.ratio(u), y, x, self.cfg.rel_tol, self.cfg.abs_tol);
        if !r.converged {
            return Err(BpiError::ToleranceNotMet {
                context: "Q",
                error: r.error,
                tol: self.cfg.abs_tol + self.cfg.rel_tol * r.value.abs(),
            });
        }
        Ok(r.value)
    }

    /// `J(y;x) = exp Q(y;x)`.
    pub fn j_func(&self, y: f64, x: f64) -> Result<f64> {
        Ok(self.q_func(y, x)?.exp())
    }

    /// `S(y;x) = ∫_y^x du / J(y;u)`; signed for `x < y`.
    pub fn s_func(&self, y: f64, x: f64) -> Result<f64> {
        self.require_interior(y, "y")?;
        self.require_interior(x, "x")?;
        Ok(self.a_of(y).exp() * (self.s_tilde(x) - self.s_tilde(y)))
    }

    /// `R(y;x) = ∫_y^x J(y;u)/(uΦ(u)) du`.
    pub fn r_func(&self, y: f64, x: f64) -> Result<f64> {
        self.require_interior(y, "y")?;
        self.require_interior(x, "x")?;
        Ok((-self.a_of(y)).exp() * (self.r_tilde(x) - self.r_tilde(y)))
    }

    /// `E(y;x) = ∫_y^x R(u;x) du` in the swapped-order form
    /// `∫_y^x [∫_u^x J(u;w)/(wΦ(w)) dw] du` with `J(u;w) = J(θ;w)/J(θ;u)`.
    pub fn e_func(&self, y: f64, x: f64) -> Result<f64> {
        self.require_interior(y, "y")?;
        self.require_interior(x, "x")?;
        let s_span = self.s_tilde(x) - self.s_tilde(y);
        Ok(self.r_tilde(x) * s_span - (self.i_tilde(x) - self.i_tilde(y)))
    }

    /// `I(y;x) = ∫_y^x R(y;u)/J(y;u) du`.
    pub fn i_func(&self, y: f64, x: f64) -> Result<f64> {
        self.require_interior(y, "y")?;
        self.require_interior(x, "x")?;
        let s_span = self.s_tilde(x) - self.s_tilde(y);
        Ok((self.i_tilde(x) - self.i_tilde(y)) - self.r_tilde(y) * s_span)
    }

    fn functional_at_shell(&self, which: Functional, boundary: Boundary, k: u32) -> (f64, f64) {
        match which {
            Functional::Q | Functional::J => self.cum_at_shell(Kernel::Ratio, boundary, k),
            Functional::S => self.cum_at_shell(Kernel::ExpNegA, boundary, k),
            Functional::R => self.cum_at_shell(Kernel::RKernel, boundary, k),
            Functional::I => {
                let (x, it) = self.cum_at_shell(Kernel::IKernel, boundary, k);
                (x, it)
            }
            Functional::E => {
                let (x, rt) = self.cum_at_shell(Kernel::RKernel, boundary, k);
                let (_, st) = self.cum_at_shell(Kernel::ExpNegA, boundary, k);
                let (_, it) = self.cum_at_shell(Kernel::IKernel, boundary, k);
                (x, rt * st - it)
            }
        }
    }

    /// Analytic verdicts proved for this mechanism class; `None` defers to
    /// the numerics.
    fn analytic_shortcut(&self, which: Functional, boundary: Boundary) -> Option<ExtKind> {
        let m = &self.mech;
        let sub = m.regime() == Regime::SubcriticalCooperative;
        let critical = m.regime() == Regime::CriticalCooperative;
        match (which, boundary) {
            // Subcritical with a log-moment: |Q(θ;1)| < ∞.
            (Functional::Q, Boundary::One) if sub && m.log_moment_holds() => Some(ExtKind::Finite),
            // Critical, no deaths: the ratio numerator stays ≤ −ρθ while
            // the cancelled denominator decays linearly whenever the
            // cooperation law has a finite second moment, so Q(θ;1) = −∞.
            (Functional::Q, Boundary::One)
                if critical && m.d == 0.0 && m.rho() > 0.0 && m.bb.second_moment_finite() =>
            {
                Some(ExtKind::MinusInf)
            }
            // Critical with a finite branching mean and linear denominator
            // decay: R(u;1) grows like 1/(1−u), so E(θ;1) = ∞ for every
            // d ≥ 0. (R(θ;1) itself may still be finite here: the two do
            // not share finiteness in the critical regime.)
            (Functional::E, Boundary::One)
                if critical
                    && m.rho() > 0.0
                    && m.pi.first_moment().is_some()
                    && m.bb.second_moment_finite() =>
            {
                Some(ExtKind::PlusInf)
            }
            // Subcritical: I(θ;1) is always finite.
            (Functional::I, Boundary::One) if sub => Some(ExtKind::Finite),
            // d > 0 keeps |R(θ;0)| finite; d = 0 keeps |S(θ;0)| finite.
            (Functional::R, Boundary::Zero) if m.d > 0.0 => Some(ExtKind::Finite),
            (Functional::S, Boundary::Zero) if m.d == 0.0 => Some(ExtKind::Finite),
            _ => None,
        }
    }

    /// Evaluates `which(θ; boundary)` as a limit along `ε_k = 2^{-k}` shells.
    pub fn limit_at(&self, which: Functional, boundary: Boundary) -> ExtendedReal {
        if which == Functional::J {
            let q = self.limit_at(Functional::Q, boundary);
            return match q.kind {
                ExtKind::Finite => {
                    let v = q.value.exp();
                    ExtendedReal::finite(v, v * q.error_bound.min(1e3), q.diagnostics)
                }
                ExtKind::PlusInf => ExtendedReal::infinite(true, q.diagnostics),
                ExtKind::MinusInf => ExtendedReal::finite(0.0, 0.0, q.diagnostics),
                ExtKind::Inconclusive => q,
            };
        }
        let shortcut = self.analytic_shortcut(which, boundary);
        match shortcut {
            Some(ExtKind::PlusInf) => return ExtendedReal::infinite(true, Vec::new()),
            Some(ExtKind::MinusInf) => return ExtendedReal::infinite(false, Vec::new()),
            _ => {}
        }
        let force_finite = shortcut == Some(ExtKind::Finite);

        // Shells are reads off the pre-built cumulative grid, so walk the
        // whole refinement budget and decide on the full trace.
        let mut shells = Vec::with_capacity(self.cfg.max_refinements as usize);
        let k_max = self.cfg.max_refinements.min(MAX_DEPTH);
        for k in 1..=k_max {
            let (x, v) = self.functional_at_shell(which, boundary, k);
            let eps = match boundary {
                Boundary::One => 1.0 - x,
                Boundary::Zero => x,
            };
            shells.push(Refinement { eps, value: v });
            if !v.is_finite() {
                break;
            }
        }
        self.decide(shells, force_finite)
    }

    /// Shell decision rule. Refinement alone can never prove divergence, so
    /// sign-consistent non-decaying increments and threshold trips are the
    /// operational stand-in; `Inconclusive` is an honest outcome.
    fn decide(&self, shells: Vec<Refinement>, force_finite: bool) -> ExtendedReal {
        let n = shells.len();
        let v = shells[n - 1].value;
        if !v.is_finite() {
            let positive = if v.is_nan() {
                shells[..n - 1].last().map(|r| r.value > 0.0).unwrap_or(true)
            } else {
                v > 0.0
            };
            return ExtendedReal::infinite(positive, shells);
        }
        if v.abs() > self.cfg.divergence_threshold
            && n >= 3
            && shells[n - 2].value.abs() < v.abs()
            && shells[n - 3].value.abs() < shells[n - 2].value.abs()
        {
            return ExtendedReal::infinite(v > 0.0, shells);
        }
        if n < 5 {
            return ExtendedReal::inconclusive(shells);
        }
        let deltas: Vec<f64> = shells.windows(2).map(|w| w[1].value - w[0].value).collect();
        let window = deltas.len().min(8);
        let recent = &deltas[deltas.len() - window..];
        let scale = self.cfg.abs_tol + self.cfg.rel_tol * v.abs();
        if recent.iter().rev().take(3).all(|d| d.abs() < scale) {
            return ExtendedReal::finite(v, 3.0 * scale, shells);
        }
        let mut ratios = Vec::with_capacity(window);
        for w in recent.windows(2) {
            if w[0].abs() > 0.0 {
                ratios.push((w[1].abs() / w[0].abs()).max(1e-6));
            }
        }
        if ratios.len() < 3 {
            return ExtendedReal::inconclusive(shells);
        }
        let log_mean = ratios.iter().map(|r| r.ln()).sum::<f64>() / ratios.len() as f64;
        let spread = ratios
            .iter()
            .map(|r| (r.ln() - log_mean).abs())
            .fold(0.0f64, f64::max);
        let rbar = log_mean.exp();
        let last_delta = *recent.last().expect("window nonempty");
        let same_sign = recent.iter().all(|d| d.signum() == last_delta.signum());
        if rbar <= 0.90 && spread < 0.5 && same_sign {
            // Geometric tail: extrapolate, with the bound driven by the
            // observed ratio scatter.
            let tail = last_delta * rbar / (1.0 - rbar);
            let ratio_err = (spread.exp() - 1.0).min(1.0);
            let bound = tail.abs() * ratio_err / (1.0 - rbar) + 3.0 * scale;
            return ExtendedReal::finite(v + tail, bound, shells);
        }
        if rbar >= 0.97 && same_sign && !force_finite {
            return ExtendedReal::infinite(last_delta > 0.0, shells);
        }
        if force_finite || (rbar < 0.97 && spread < 1.0 && same_sign) {
            // Tail model from the fitted leading-order decay.
            let tail = if rbar < 1.0 { last_delta * rbar / (1.0 - rbar) } else { 0.0 };
            let bound = tail.abs() * 4.0 + scale + last_delta.abs();
            return ExtendedReal::finite(v + tail, bound, shells);
        }
        ExtendedReal::inconclusive(shells)
    }

    /// `Υ(u) = ∫_0^u dw/Φ(w)`; `+∞` at `u = 1` under hypothesis (H).
    pub fn upsilon(&self, u: f64) -> ExtendedReal {
        if u == 1.0 {
            return ExtendedReal::infinite(true, Vec::new());
        }
        ExtendedReal::finite(self.upsilon_val(u), self.cfg.abs_tol, Vec::new())
    }

    /// Finite-argument `Υ`; closed forms when cooperation is absent or the
    /// cooperation law is a point mass at 1.
    pub(crate) fn upsilon_val(&self, u: f64) -> f64 {
        debug_assert!((0.0..1.0).contains(&u));
        let m = &self.mech;
        if let Some(kind) = self.upsilon_closed_form() {
            return match kind {
                UpsilonForm::NoCooperation => -(1.0 - u).ln() / m.c,
                UpsilonForm::PointMassBelow => {
                    let b = m.b();
                    ((m.c - b * u) / (m.c * (1.0 - u))).ln() / (m.c - b)
                }
                UpsilonForm::PointMassEqual => u / (m.c * (1.0 - u)),
            };
        }
        self.upsilon_theta0() + self.cum_point(Kernel::InvPhi, u)
    }

    fn upsilon_theta0(&self) -> f64 {
        // ∫_0^θ dw/Φ(w); Φ(0) = c keeps the integrand regular at 0.
        integrate(
            |w| 1.0 / self.mech.phi(w),
            0.0,
            self.theta,
            self.cfg.rel_tol,
            self.cfg.abs_tol,
        )
        .value
    }

    fn upsilon_closed_form(&self) -> Option<UpsilonForm> {
        let m = &self.mech;
        if m.b() == 0.0 {
            return Some(UpsilonForm::NoCooperation);
        }
        let w = m.bb.weights();
        let point_mass_one = m.bb.tail().is_none()
            && w.first().copied().unwrap_or(0.0) > 0.0
            && w.iter().skip(1).all(|&x| x == 0.0);
        if point_mass_one {
            if m.b() < m.c {
                return Some(UpsilonForm::PointMassBelow);
            }
            if (m.b() - m.c).abs() <= 1e-15 * m.c {
                return Some(UpsilonForm::PointMassEqual);
            }
        }
        None
    }

    /// Inverse time-change `Ῡ`: the unique `u ∈ [0,1)` with `Υ(u) = w`.
    pub fn upsilon_inv(&self, w: f64) -> f64 {
        assert!(w >= 0.0, "upsilon_inv needs w >= 0");
        if w == 0.0 {
            return 0.0;
        }
        let m = &self.mech;
        if let Some(kind) = self.upsilon_closed_form() {
            return match kind {
                UpsilonForm::NoCooperation => -(-m.c * w).exp_m1(),
                UpsilonForm::PointMassBelow => {
                    let b = m.b();
                    m.c * ((m.c - b) * w).exp_m1() / (m.c * ((m.c - b) * w).exp() - b)
                }
                UpsilonForm::PointMassEqual => m.c * w / (1.0 + m.c * w),
            };
        }
        let (mut lo, mut hi) = (0.0f64, 1.0 - 1e-15);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.upsilon_val(mid) < w {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-13 {
                break;
            }
        }
        // Newton polish with Υ' = 1/Φ.
        let mut u = 0.5 * (lo + hi);
        for _ in 0..4 {
            let f = self.upsilon_val(u) - w;
            let next = (u - f * self.mech.phi(u)).clamp(lo, hi);
            if (next - u).abs() < 1e-15 {
                break;
            }
            u = next;
        }
        u
    }

    /// Laplace transform `E_z[e^{-μ σ_a}]` of the first passage of the
    /// immigration chain to level `a`, as a ratio of two integrals over
    /// the unit interval (substitution `u = e^{-x}` applied analytically).
    pub fn sigma_a_laplace(&self, z: u64, a: u64, mu: f64) -> Result<f64> {
        if !(self.mech.d > 0.0) || self.mech.regime() != Regime::SubcriticalCooperative {
            return Err(BpiError::PreconditionViolated(
                "sigma_a Laplace transform needs d > 0 and varsigma < 0".into(),
            ));
        }
        if z < a {
            return Err(BpiError::PreconditionViolated(format!("need z ≥ a, got z={z} a={a}")));
        }
        if !(mu > 0.0) {
            return Err(BpiError::PreconditionViolated("need mu > 0".into()));
        }
        if z == a {
            return Ok(1.0);
        }
        let ups_theta = self.upsilon_val(self.theta);
        let kernel = |u: f64, level: u64| -> f64 {
            let phi = self.mech.phi(u);
            let expo = self.a_of(u) - mu * (self.upsilon_val(u) - ups_theta);
            ((level as f64 - 1.0) * u.ln() + expo).exp() / phi
        };
        // Near 0 the integrand behaves like u^{level−1+d/c}; integrate the
        // leading power analytically below u_lo instead of asking the
        // quadrature to resolve it.
        let u_lo = 1e-6;
        let side = |level: u64| -> f64 {
            let stub = (self.a_of(u_lo) - mu * (self.upsilon_val(u_lo) - ups_theta)).exp()
                * u_lo.powi(level as i32)
                / (self.mech.c * (level as f64 + self.mech.d / self.mech.c));
            let body =
                integrate(|u| kernel(u, level), u_lo, 1.0, self.cfg.rel_tol, self.cfg.abs_tol);
            stub + body.value
        };
        let num = side(z);
        let den = side(a);
        if !num.is_finite() || !den.is_finite() || den <= 0.0 {
            return Err(BpiError::ToleranceNotMet {
                context: "sigma_a_laplace",
                error: f64::INFINITY,
                tol: self.cfg.abs_tol,
            });
        }
        Ok((num / den).clamp(0.0, 1.0))
    }
}

enum UpsilonForm {
    NoCooperation,
    PointMassBelow,
    PointMassEqual,
}

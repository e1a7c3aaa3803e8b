//! BPI parameter sets and numerically stable mechanism evaluation.
//!
//! A mechanism bundles the death rate `d`, the competition rate `c` and two
//! offspring laws: `pi` for branching births (per-capita) and `bb` for
//! cooperative births (per ordered pair). The branching mechanism is
//!
//! ```text
//! Ψ(u) = d − (ρ + d) u + Σ π_i u^{i+1},      ρ = Σ π_i,
//! ```
//!
//! and the interaction mechanism `Φ(u) = c − (c + b) u + Σ b_i u^{i+1}` with
//! `b = Σ b_i`. Both vanish at `u = 1`, so near that endpoint they are
//! evaluated through the factored forms
//!
//! ```text
//! Ψ(u) = (1−u)(d − Σ π̄_i u^i),   Φ(u) = (1−u)(c − Σ b̄_i u^i),
//! ```
//!
//! where `π̄_k`, `b̄_k` are tail sums. The crossover sits at `u = 0.5`,
//! where either form is accurate.

use crate::special::{hurwitz_zeta, power_sum_exp};
use crate::{BpiError, Result};
use serde::{Deserialize, Serialize};

/// Analytic power-law tail `w_i = amp · i^{-(1+alpha)}` for `i > cutoff`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct PowerTail {
    pub amp: f64,
    pub alpha: f64,
    pub cutoff: u64,
}

/// A summable nonnegative offspring-size law: explicit head weights
/// `w_1..w_L` plus an optional analytic power-law tail.
#[derive(Debug, Clone)]
pub struct OffspringLaw {
    weights: Vec<f64>,
    tail: Option<PowerTail>,
    suffix: Vec<f64>,
    tail_mass: f64,
    /// ζ(1+α, k) for k in cutoff+1 ..= zeta_head_end, the direct part of the
    /// tail-sum series.
    zeta_head: Vec<f64>,
}

/// Index of the first tail-sum evaluated by Euler–Maclaurin rather than a
/// cached Hurwitz value.
const ZETA_DIRECT: u64 = 33;

impl OffspringLaw {
    pub fn empty() -> Self {
        Self::new(vec![], None).expect("empty law is valid")
    }

    /// Point mass `w_k = w` at size `k`.
    pub fn point_mass(k: usize, w: f64) -> Self {
        let mut weights = vec![0.0; k];
        weights[k - 1] = w;
        Self::new(weights, None).expect("point mass is valid")
    }

    pub fn new(weights: Vec<f64>, tail: Option<PowerTail>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(BpiError::InvalidMechanism(
                "offspring weights must be finite and nonnegative".into(),
            ));
        }
        let tail = match tail {
            Some(t) if t.amp > 0.0 => {
                if !(t.alpha > 0.0) || !t.amp.is_finite() {
                    return Err(BpiError::InvalidMechanism(
                        "power tail needs amp >= 0 and alpha > 0".into(),
                    ));
                }
                if (t.cutoff as usize) < weights.len() {
                    return Err(BpiError::InvalidMechanism(format!(
                        "tail cutoff {} must cover the {} explicit weights",
                        t.cutoff,
                        weights.len()
                    )));
                }
                Some(t)
            }
            _ => None,
        };
        let mut suffix = vec![0.0; weights.len() + 1];
        for i in (0..weights.len()).rev() {
            suffix[i] = suffix[i + 1] + weights[i];
        }
        let tail_mass = match tail {
            Some(t) => t.amp * hurwitz_zeta(1.0 + t.alpha, (t.cutoff + 1) as f64),
            None => 0.0,
        };
        let zeta_head = match tail {
            Some(t) => ((t.cutoff + 1)..(t.cutoff + 1).max(ZETA_DIRECT))
                .map(|k| hurwitz_zeta(1.0 + t.alpha, k as f64))
                .collect(),
            None => Vec::new(),
        };
        Ok(OffspringLaw { weights, tail, suffix, tail_mass, zeta_head })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn tail(&self) -> Option<PowerTail> {
        self.tail
    }

    /// Total mass `Σ w_i`.
    pub fn total(&self) -> f64 {
        self.suffix[0] + self.tail_mass
    }

    /// `w_i` for `i >= 1`.
    pub fn mass(&self, i: u64) -> f64 {
        debug_assert!(i >= 1);
        let head = if (i as usize) <= self.weights.len() {
            self.weights[i as usize - 1]
        } else {
            0.0
        };
        match self.tail {
            Some(t) if i > t.cutoff => head + t.amp * (i as f64).powf(-(1.0 + t.alpha)),
            _ => head,
        }
    }

    /// Tail sum `w̄_k = Σ_{i ≥ k} w_i`, nonincreasing in `k`.
    pub fn tail_sum(&self, k: u64) -> f64 {
        debug_assert!(k >= 1);
        let head = if (k as usize) <= self.weights.len() {
            self.suffix[k as usize - 1]
        } else {
            0.0
        };
        let tail = match self.tail {
            Some(t) => {
                if k <= t.cutoff + 1 {
                    self.tail_mass
                } else {
                    t.amp * hurwitz_zeta(1.0 + t.alpha, k as f64)
                }
            }
            None => 0.0,
        };
        head + tail
    }

    /// First moment `Σ i·w_i`; `None` when the tail makes it infinite (α ≤ 1).
    pub fn first_moment(&self) -> Option<f64> {
        let head: f64 = self
            .weights
            .iter()
            .enumerate()
            .map(|(j, w)| (j + 1) as f64 * w)
            .sum();
        match self.tail {
            Some(t) => {
                if t.alpha > 1.0 {
                    Some(head + t.amp * hurwitz_zeta(t.alpha, (t.cutoff + 1) as f64))
                } else {
                    None
                }
            }
            None => Some(head),
        }
    }

    /// Whether `Σ i² w_i < ∞` (α > 2 for tails, always for finite support).
    pub fn second_moment_finite(&self) -> bool {
        match self.tail {
            Some(t) => t.alpha > 2.0,
            None => true,
        }
    }

    /// Whether `Σ ln(i) w_i < ∞`; true for finite support and for any
    /// power-law tail (the log grows slower than every positive power).
    pub fn log_moment_finite(&self) -> bool {
        true
    }

    /// `Σ_i w_i u^{i+1}` — the series entering the direct mechanism form.
    pub fn series_direct(&self, u: f64) -> f64 {
        let mut head = 0.0;
        for (j, &w) in self.weights.iter().enumerate().rev() {
            head = head * u + w;
            let _ = j;
        }
        head *= u * u; // lowest explicit power is u^2 (i = 1)
        let tail = match self.tail {
            Some(t) if u > 0.0 => {
                let lambda = -u.ln();
                t.amp * u * power_sum_exp(1.0 + t.alpha, t.cutoff + 1, lambda)
            }
            _ => 0.0,
        };
        head + tail
    }

    /// `D(u) = Σ_k w̄_k u^k` — the series entering the factored form.
    ///
    /// Heads are summed directly; for a power-law tail the sum of Hurwitz
    /// tails is expanded by Euler–Maclaurin into damped power sums, which
    /// stays accurate for `u` within `2^{-46}` of 1.
    pub fn series_tail_sums(&self, u: f64) -> f64 {
        if u == 0.0 {
            return 0.0;
        }
        let head_n = match self.tail {
            Some(t) => t.cutoff,
            None => self.weights.len() as u64,
        };
        let mut acc = 0.0;
        let mut upow = 1.0;
        for k in 1..=head_n {
            upow *= u;
            let head = if (k as usize) <= self.weights.len() {
                self.suffix[k as usize - 1]
            } else {
                0.0
            };
            let tm = if self.tail.is_some() { self.tail_mass } else { 0.0 };
            acc += (head + tm) * upow;
        }
        if let Some(t) = self.tail {
            let lambda = -u.ln();
            let start = t.cutoff + 1;
            let em_start = start.max(ZETA_DIRECT);
            // direct cached ζ terms
            for (off, &z) in self.zeta_head.iter().enumerate() {
                let k = start + off as u64;
                if k >= em_start {
                    break;
                }
                acc += t.amp * z * u.powi(k as i32);
            }
            // Euler–Maclaurin: ζ(1+α,k) ≈ k^{-α}/α + k^{-(1+α)}/2 + ...
            let a = t.alpha;
            let t0 = power_sum_exp(a, em_start, lambda) / a;
            let t1 = 0.5 * power_sum_exp(1.0 + a, em_start, lambda);
            let t2 = (1.0 + a) / 12.0 * power_sum_exp(2.0 + a, em_start, lambda);
            let t4 = (1.0 + a) * (2.0 + a) * (3.0 + a) / 720.0
                * power_sum_exp(4.0 + a, em_start, lambda);
            let t6 = (1.0 + a) * (2.0 + a) * (3.0 + a) * (4.0 + a) * (5.0 + a) / 30240.0
                * power_sum_exp(6.0 + a, em_start, lambda);
            acc += t.amp * (t0 + t1 + t2 - t4 + t6);
        }
        acc
    }

    /// Tail sums `w̄_1 .. w̄_n` as plain coefficients (for series work).
    pub fn tail_sum_coeffs(&self, n: usize) -> Vec<f64> {
        (1..=n as u64).map(|k| self.tail_sum(k)).collect()
    }
}

/// Cooperative regime by the sign of `ς = −c + Σ i·b_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    SubcriticalCooperative,
    CriticalCooperative,
    SupercriticalCooperative,
}

/// Immutable BPI parameter set with derived quantities.
#[derive(Debug, Clone)]
pub struct Mechanism {
    pub d: f64,
    pub c: f64,
    pub pi: OffspringLaw,
    pub bb: OffspringLaw,
    rho: f64,
    b: f64,
    varsigma: f64,
}

/// Tolerance under which the exactly-summed `ς` counts as zero.
pub const VARSIGMA_TOL: f64 = 1e-12;

impl Mechanism {
    pub fn new(d: f64, c: f64, pi: OffspringLaw, bb: OffspringLaw) -> Result<Self> {
        if !(d >= 0.0) || !(c >= 0.0) || !d.is_finite() || !c.is_finite() {
            return Err(BpiError::InvalidMechanism("need d ≥ 0 and c ≥ 0".into()));
        }
        let rho = pi.total();
        let b = bb.total();
        let varsigma = match bb.first_moment() {
            Some(m1) => -c + m1,
            None => f64::INFINITY,
        };
        Ok(Mechanism { d, c, pi, bb, rho, b, varsigma })
    }

    /// Kingman case: pure pairwise competition (`d = ρ = b = 0`).
    pub fn kingman(c: f64) -> Self {
        Mechanism::new(0.0, c, OffspringLaw::empty(), OffspringLaw::empty()).expect("valid")
    }

    /// Logistic-branching instance: competition only, point-mass births.
    pub fn logistic(d: f64, c: f64, pi1: f64) -> Self {
        Mechanism::new(d, c, OffspringLaw::point_mass(1, pi1), OffspringLaw::empty())
            .expect("valid")
    }

    /// The critical cooperative instance with `Φ(u) = c(1−u)²` and a
    /// Sibuya stationary law when `d = 0`.
    pub fn sibuya(rho: f64) -> Self {
        Mechanism::new(
            0.0,
            1.0,
            OffspringLaw::point_mass(1, rho),
            OffspringLaw::point_mass(1, 1.0),
        )
        .expect("valid")
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// `ς = −c + Σ i·b_i` (may be `+∞`).
    pub fn varsigma(&self) -> f64 {
        self.varsigma
    }

    /// Hypothesis (H): competition present and cooperation mean dominated.
    pub fn hypothesis_h(&self) -> bool {
        self.c > 0.0 && self.varsigma <= VARSIGMA_TOL
    }

    pub fn regime(&self) -> Regime {
        if self.varsigma < -VARSIGMA_TOL {
            Regime::SubcriticalCooperative
        } else if self.varsigma <= VARSIGMA_TOL {
            Regime::CriticalCooperative
        } else {
            Regime::SupercriticalCooperative
        }
    }

    pub fn log_moment_holds(&self) -> bool {
        self.pi.log_moment_finite()
    }

    /// Branching mechanism `Ψ(u)`; factored form past the crossover.
    pub fn psi(&self, u: f64) -> f64 {
        debug_assert!((0.0..=1.0).contains(&u));
        if u == 1.0 {
            return 0.0;
        }
        if u > 0.5 {
            (1.0 - u) * (self.d - self.pi.series_tail_sums(u))
        } else {
            self.d - (self.rho + self.d) * u + self.pi.series_direct(u)
        }
    }

    /// Interaction mechanism `Φ(u)`; factored form past the crossover.
    pub fn phi(&self, u: f64) -> f64 {
        debug_assert!((0.0..=1.0).contains(&u));
        if u == 1.0 {
            return 0.0;
        }
        if u > 0.5 {
            (1.0 - u) * (self.c - self.bb.series_tail_sums(u))
        } else {
            self.c - (self.c + self.b) * u + self.bb.series_direct(u)
        }
    }

    /// `Ψ(u) / (u Φ(u))` with the `(1−u)` factors cancelled analytically,
    /// so the quadrature integrand carries no artificial 0/0 at `u = 1`.
    pub fn ratio_integrand(&self, u: f64) -> Result<f64> {
        let den = self.c - self.bb.series_tail_sums(u);
        if den.abs() < 1e-14 && self.varsigma > VARSIGMA_TOL {
            return Err(BpiError::DegenerateDenominator { u, value: den });
        }
        Ok((self.d - self.pi.series_tail_sums(u)) / (u * den))
    }

    /// Infallible ratio for quadrature; under hypothesis (H) the denominator
    /// `c − Σ b̄_i u^i ≥ c(1−u)` stays positive on (0,1).
    pub(crate) fn ratio(&self, u: f64) -> f64 {
        (self.d - self.pi.series_tail_sums(u)) / (u * (self.c - self.bb.series_tail_sums(u)))
    }

    /// `(Ψ(u) − Φ(u)) / (u Φ(u))` in cancelled form (used by the closed-form
    /// generating function of the immigration chain).
    pub(crate) fn ratio_minus_one_over_u(&self, u: f64) -> f64 {
        let num = (self.d - self.c) - (self.pi.series_tail_sums(u) - self.bb.series_tail_sums(u));
        num / (u * (self.c - self.bb.series_tail_sums(u)))
    }

    /// Variant with different `d`/`c` and optionally the cooperation law
    /// dropped; used by the explosion tests, which compare against
    /// logistic-type reference mechanisms.
    pub fn reparam(&self, d: f64, c: f64, keep_b: bool) -> Mechanism {
        let bb = if keep_b { self.bb.clone() } else { OffspringLaw::empty() };
        Mechanism::new(d, c, self.pi.clone(), bb).expect("reparam of valid mechanism")
    }

    /// Stable identity for interpolant caches.
    pub fn cache_key(&self) -> String {
        format!(
            "d={:.17e};c={:.17e};pi={:?}/{:?};b={:?}/{:?}",
            self.d,
            self.c,
            self.pi.weights(),
            self.pi.tail(),
            self.bb.weights(),
            self.bb.tail()
        )
    }
}

/// Wire format for mechanisms (field names are fixed).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MechanismSpec {
    pub d: f64,
    pub c: f64,
    pub pi: LawSpec,
    pub b: LawSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi_tail: Option<PowerTail>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_tail: Option<PowerTail>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LawSpec {
    pub weights: Vec<f64>,
}

impl MechanismSpec {
    pub fn build(&self) -> Result<Mechanism> {
        let pi = OffspringLaw::new(self.pi.weights.clone(), self.pi_tail)?;
        let bb = OffspringLaw::new(self.b.weights.clone(), self.b_tail)?;
        Mechanism::new(self.d, self.c, pi, bb)
    }

    pub fn from_mechanism(m: &Mechanism) -> Self {
        MechanismSpec {
            d: m.d,
            c: m.c,
            pi: LawSpec { weights: m.pi.weights().to_vec() },
            b: LawSpec { weights: m.bb.weights().to_vec() },
            pi_tail: m.pi.tail(),
            b_tail: m.bb.tail(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lb() -> Mechanism {
        Mechanism::logistic(0.5, 1.0, 1.0)
    }

    #[test]
    fn psi_direct_value() {
        // d=0.5, c=1, π₁=1: Ψ(0.25) = 0.5 − 1.5·0.25 + 0.25² = 0.1875
        assert!((lb().psi(0.25) - 0.1875).abs() < 1e-15);
    }

    #[test]
    fn psi_vanishes_at_one_and_equals_d_at_zero() {
        for m in [lb(), Mechanism::sibuya(0.5), Mechanism::kingman(1.0)] {
            assert_eq!(m.psi(1.0), 0.0);
            assert!((m.psi(0.0) - m.d).abs() < 1e-15);
            assert_eq!(m.phi(1.0), 0.0);
            assert!((m.phi(0.0) - m.c).abs() < 1e-15);
        }
    }

    #[test]
    fn phi_factored_square_for_sibuya() {
        // (d=0, c=1, π₁=0.5, b₁=1): Φ(u) = (1−u)²
        let m = Mechanism::sibuya(0.5);
        assert!((m.phi(0.5) - 0.25).abs() < 1e-14);
        for &u in &[0.1, 0.3, 0.6, 0.9, 0.99] {
            assert!((m.phi(u) - (1.0 - u) * (1.0 - u)).abs() < 1e-12, "u={u}");
        }
    }

    #[test]
    fn ratio_integrand_examples() {
        // LB: (0.5 − u)/u vanishes at u = 0.5
        assert!(lb().ratio_integrand(0.5).unwrap().abs() < 1e-14);
        // Sibuya: −0.5/(1−u) = −1 at u = 0.5
        assert!((Mechanism::sibuya(0.5).ratio_integrand(0.5).unwrap() + 1.0).abs() < 1e-13);
        // Kingman: Ψ ≡ 0
        assert_eq!(Mechanism::kingman(1.0).ratio_integrand(0.3).unwrap(), 0.0);
    }

    #[test]
    fn regime_classification() {
        let critical = Mechanism::new(
            0.0,
            1.0,
            OffspringLaw::empty(),
            OffspringLaw::point_mass(1, 1.0),
        )
        .unwrap();
        assert_eq!(critical.regime(), Regime::CriticalCooperative);
        assert_eq!(Mechanism::kingman(1.0).regime(), Regime::SubcriticalCooperative);
        let sup = Mechanism::new(
            0.0,
            1.0,
            OffspringLaw::empty(),
            OffspringLaw::point_mass(2, 1.0),
        )
        .unwrap();
        assert_eq!(sup.regime(), Regime::SupercriticalCooperative);
        assert!((sup.varsigma() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn log_moment_always_holds_for_supported_laws() {
        assert!(lb().log_moment_holds());
        let heavy = Mechanism::new(
            0.0,
            1.0,
            OffspringLaw::new(vec![], Some(PowerTail { amp: 1.0, alpha: 0.5, cutoff: 0 }))
                .unwrap(),
            OffspringLaw::empty(),
        )
        .unwrap();
        assert!(heavy.log_moment_holds());
        assert!(heavy.pi.first_moment().is_none());
    }

    #[test]
    fn direct_and_factored_forms_agree() {
        let heavy_pi =
            OffspringLaw::new(vec![0.2, 0.1], Some(PowerTail { amp: 0.3, alpha: 1.2, cutoff: 4 }))
                .unwrap();
        let m = Mechanism::new(0.7, 2.0, heavy_pi, OffspringLaw::point_mass(1, 1.5)).unwrap();
        for k in 1..1000 {
            let u = k as f64 / 1000.0;
            let direct = m.d - (m.rho() + m.d) * u + m.pi.series_direct(u);
            let factored = (1.0 - u) * (m.d - m.pi.series_tail_sums(u));
            let scale = direct.abs().max(factored.abs()).max(1e-3);
            assert!(
                (direct - factored).abs() / scale < 1e-10,
                "u={u}: {direct} vs {factored}"
            );
        }
    }

    #[test]
    fn tail_sums_nonincreasing_and_consistent() {
        let law =
            OffspringLaw::new(vec![0.5, 0.25], Some(PowerTail { amp: 1.0, alpha: 0.7, cutoff: 6 }))
                .unwrap();
        let mut prev = f64::INFINITY;
        for k in 1..200 {
            let ts = law.tail_sum(k);
            assert!(ts <= prev + 1e-15);
            // w̄_k − w̄_{k+1} = w_k
            assert!((ts - law.tail_sum(k + 1) - law.mass(k)).abs() < 1e-12, "k={k}");
            prev = ts;
        }
        assert!((law.tail_sum(1) - law.total()).abs() < 1e-12);
    }

    #[test]
    fn series_tail_sums_matches_brute_force_near_one() {
        let law =
            OffspringLaw::new(vec![0.4], Some(PowerTail { amp: 0.8, alpha: 0.5, cutoff: 3 }))
                .unwrap();
        for &eps in &[1e-2, 1e-4, 1e-6] {
            let u: f64 = 1.0 - eps;
            let fast = law.series_tail_sums(u);
            let mut brute = 0.0;
            let mut k = 1u64;
            loop {
                let term = law.tail_sum(k) * u.powi(k as i32);
                brute += term;
                if term < 1e-16 * brute && k > 10 {
                    break;
                }
                k += 1;
            }
            assert!(
                ((fast - brute) / brute).abs() < 1e-8,
                "eps={eps}: fast={fast} brute={brute}"
            );
        }
    }

    #[test]
    fn json_round_trip_fixed_field_names() {
        let text = r#"{"d":0.5,"c":1.0,"pi":{"weights":[1.0]},"b":{"weights":[]},"pi_tail":{"amp":0,"alpha":1,"cutoff":0}}"#;
        let spec: MechanismSpec = serde_json::from_str(text).unwrap();
        let m = spec.build().unwrap();
        assert_eq!(m.d, 0.5);
        assert_eq!(m.rho(), 1.0);
        assert_eq!(m.b(), 0.0);
        let back = serde_json::to_string(&MechanismSpec::from_mechanism(&m)).unwrap();
        assert!(back.contains("\"pi\""));
        assert!(back.contains("\"weights\""));
    }
}

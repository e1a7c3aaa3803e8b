//! Exact event-driven simulation of the interaction chain `Z` and the
//! immigration-type chain `X`, the Lamperti time change between them,
//! closed-form generating functions, and truncated-generator oracles.
//!
//! From state `i ≥ 1` the chain `Z` moves
//!
//! * down to `i−1` at rate `d·i + c·i(i−1)` (all downward jumps have size 1),
//! * up to `i+k` at rate `i·π_k + i(i−1)·b_k`.
//!
//! The chain `X` replaces the factors `i` and `i(i−1)` by `1` and `i−1`
//! and immigrates from 0 at rates `π_k`. Simulation is the competing-
//! exponential (Gillespie) scheme: exponential holding time at total rate,
//! then a categorical jump draw, so one-step transition frequencies match
//! the generator weights exactly in distribution.

use crate::functionals::Functionals;
use crate::mechanisms::{Mechanism, OffspringLaw};
use crate::quad::integrate;
use crate::rng;
use crate::{BpiError, Result};
use rand::distributions::Open01;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::io::{Read as IoRead, Write as IoWrite};

/// Terminal status of a simulated path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Terminal {
    /// Hit the absorbing state 0 at the recorded time.
    Extinct(f64),
    /// Hit the absorbing state 1 at the recorded time (`d = ρ = 0` chains).
    AbsorbedOne(f64),
    /// Crossed the finite ceiling: the explosion proxy.
    Ceiling { level: u64, time: f64 },
    /// Still alive at the horizon.
    HorizonReached(f64),
}

/// Piecewise-constant chain path: `states[k]` holds from `times[k]` on.
#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub initial: u64,
    /// Strictly increasing event times (the initial state sits at t = 0).
    pub times: Vec<f64>,
    /// State after each event; `states[k] != states[k-1]`.
    pub states: Vec<u64>,
    pub terminal: Terminal,
    pub seed: u64,
}

impl Trajectory {
    /// State at time `t` (left-continuous convention not needed: paths are
    /// càdlàg, we return the value of the last event at or before `t`).
    pub fn state_at(&self, t: f64) -> u64 {
        match self.times.partition_point(|&s| s <= t) {
            0 => self.initial,
            k => self.states[k - 1],
        }
    }

    /// First time the path is at or below `level`, if any.
    pub fn first_passage_below(&self, level: u64) -> Option<f64> {
        if self.initial <= level {
            return Some(0.0);
        }
        self.times
            .iter()
            .zip(&self.states)
            .find(|(_, &s)| s <= level)
            .map(|(&t, _)| t)
    }

    /// First time the path is at or above `level`, if any.
    pub fn first_passage_above(&self, level: u64) -> Option<f64> {
        if self.initial >= level {
            return Some(0.0);
        }
        self.times
            .iter()
            .zip(&self.states)
            .find(|(_, &s)| s >= level)
            .map(|(&t, _)| t)
    }
}

/// Simulation bounds and reproducibility token.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SimConfig {
    /// Finite proxy for the explosion cemetery.
    pub ceiling: u64,
    pub horizon: f64,
    pub seed: u64,
    pub event_cap: u64,
    /// Stop `X` on its first visit to 0 (the random clock closes there).
    pub x_absorb_at_zero: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            ceiling: 1_000_000,
            horizon: f64::INFINITY,
            seed: 0,
            event_cap: 100_000_000,
            x_absorb_at_zero: false,
        }
    }
}

/// One-state rate decomposition; the up-jump size law is the mixture of the
/// two offspring laws weighted by `up_branching : up_cooperation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates {
    pub total: f64,
    pub down: f64,
    pub up_branching: f64,
    pub up_cooperation: f64,
}

/// Generator row of `Z` at state `i ≥ 1` (states 0 — and 1 when
/// `d = ρ = 0` — have total rate 0).
pub fn rates_z(mech: &Mechanism, i: u64) -> Rates {
    if i == 0 {
        return Rates { total: 0.0, down: 0.0, up_branching: 0.0, up_cooperation: 0.0 };
    }
    let fi = i as f64;
    let pair = fi * (fi - 1.0);
    let down = mech.d * fi + mech.c * pair;
    let up_branching = mech.rho() * fi;
    let up_cooperation = mech.b() * pair;
    Rates { total: down + up_branching + up_cooperation, down, up_branching, up_cooperation }
}

/// Generator row of `X` at state `i ≥ 0`.
pub fn rates_x(mech: &Mechanism, i: u64) -> Rates {
    if i == 0 {
        return Rates {
            total: mech.rho(),
            down: 0.0,
            up_branching: mech.rho(),
            up_cooperation: 0.0,
        };
    }
    let im1 = (i - 1) as f64;
    let down = mech.d + mech.c * im1;
    let up_branching = mech.rho();
    let up_cooperation = mech.b() * im1;
    Rates { total: down + up_branching + up_cooperation, down, up_branching, up_cooperation }
}

/// Alias-table sampler for an offspring law, with analytic inverse-CDF
/// sampling on the power tail past the switch point.
pub struct JumpSampler {
    /// Alias table over sizes 1..=head_n plus one tail slot at index 0.
    prob: Vec<f64>,
    alias: Vec<usize>,
    head_n: u64,
    tail_total: f64,
    law: OffspringLaw,
}

/// Default alias-table extent.
const ALIAS_SWITCH: u64 = 64;

impl JumpSampler {
    pub fn new(law: &OffspringLaw) -> Option<Self> {
        let total = law.total();
        if total <= 0.0 {
            return None;
        }
        let head_n = match law.tail() {
            Some(t) => ALIAS_SWITCH.max(law.weights().len() as u64).max(t.cutoff),
            None => law.weights().len() as u64,
        };
        let tail_total = law.tail_sum(head_n + 1);
        // Slot 0 is the tail branch; slots 1..=head_n are explicit sizes.
        let mut weights = vec![tail_total];
        weights.extend((1..=head_n).map(|i| law.mass(i)));
        let (prob, alias) = vose_alias(&weights);
        Some(JumpSampler { prob, alias, head_n, tail_total, law: law.clone() })
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> u64 {
        let n = self.prob.len();
        let x: f64 = rng.sample(Open01);
        let scaled = x * n as f64;
        let mut slot = scaled as usize;
        if slot >= n {
            slot = n - 1;
        }
        let frac = scaled - slot as f64;
        let pick = if frac < self.prob[slot] { slot } else { self.alias[slot] };
        if pick > 0 {
            return pick as u64;
        }
        self.sample_tail(rng)
    }

    fn sample_tail(&self, rng: &mut ChaCha8Rng) -> u64 {
        // Inverse CDF on the analytic tail: smallest i > head_n with
        // w̄_{i+1} ≤ (1−V)·w̄_{head_n+1}.
        let v: f64 = rng.sample(Open01);
        let target = (1.0 - v) * self.tail_total;
        let mut lo = self.head_n + 1;
        let mut hi = lo * 2 + 8;
        while self.law.tail_sum(hi + 1) > target {
            lo = hi + 1;
            hi *= 2;
            if hi > 1 << 60 {
                break;
            }
        }
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if self.law.tail_sum(mid + 1) <= target {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        lo
    }
}

fn vose_alias(weights: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let n = weights.len();
    let total: f64 = weights.iter().sum();
    let mut prob = vec![0.0; n];
    let mut alias = vec![0usize; n];
    let mut scaled: Vec<f64> = weights.iter().map(|w| w * n as f64 / total).collect();
    let mut small: Vec<usize> = (0..n).filter(|&i| scaled[i] < 1.0).collect();
    let mut large: Vec<usize> = (0..n).filter(|&i| scaled[i] >= 1.0).collect();
    while let (Some(&s), Some(&l)) = (small.last(), large.last()) {
        small.pop();
        large.pop();
        prob[s] = scaled[s];
        alias[s] = l;
        scaled[l] = (scaled[l] + scaled[s]) - 1.0;
        if scaled[l] < 1.0 {
            small.push(l);
        } else {
            large.push(l);
        }
    }
    for &i in small.iter().chain(large.iter()) {
        prob[i] = 1.0;
    }
    (prob, alias)
}

/// Which chain a simulation context drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Chain {
    Interaction,
    Immigration,
}

/// Reusable per-mechanism simulation context (alias tables built once).
pub struct SimContext {
    mech: Mechanism,
    pi_sampler: Option<JumpSampler>,
    bb_sampler: Option<JumpSampler>,
}

impl SimContext {
    pub fn new(mech: &Mechanism) -> Self {
        SimContext {
            mech: mech.clone(),
            pi_sampler: JumpSampler::new(&mech.pi),
            bb_sampler: JumpSampler::new(&mech.bb),
        }
    }

    pub fn mechanism(&self) -> &Mechanism {
        &self.mech
    }

    fn run(&self, chain: Chain, z0: u64, cfg: &SimConfig) -> Result<Trajectory> {
        let mut rng = rng::stream(cfg.seed, 0);
        self.run_with_rng(chain, z0, cfg, &mut rng, cfg.seed)
    }

    fn run_with_rng(
        &self,
        chain: Chain,
        z0: u64,
        cfg: &SimConfig,
        rng: &mut ChaCha8Rng,
        seed: u64,
    ) -> Result<Trajectory> {
        let mut t = 0.0f64;
        let mut state = z0;
        let mut times = Vec::new();
        let mut states = Vec::new();
        let mut events = 0u64;
        let terminal = loop {
            if let Some(done) = self.absorbed(chain, state, cfg, t) {
                break done;
            }
            let rates = match chain {
                Chain::Interaction => rates_z(&self.mech, state),
                Chain::Immigration => rates_x(&self.mech, state),
            };
            debug_assert!(rates.total > 0.0);
            let u: f64 = rng.sample(Open01);
            t += -u.ln() / rates.total;
            if t >= cfg.horizon {
                break Terminal::HorizonReached(cfg.horizon);
            }
            let draw: f64 = rng.sample(Open01);
            let pick = draw * rates.total;
            state = if pick < rates.down {
                state - 1
            } else if pick < rates.down + rates.up_branching {
                state + self.pi_sampler.as_ref().expect("branching rate > 0").sample(rng)
            } else {
                state + self.bb_sampler.as_ref().expect("cooperation rate > 0").sample(rng)
            };
            times.push(t);
            states.push(state);
            events += 1;
            if state >= cfg.ceiling {
                break Terminal::Ceiling { level: state, time: t };
            }
            if events >= cfg.event_cap {
                return Err(BpiError::EventCapExceeded { cap: cfg.event_cap, t, state });
            }
        };
        Ok(Trajectory { initial: z0, times, states, terminal, seed })
    }

    fn absorbed(&self, chain: Chain, state: u64, cfg: &SimConfig, t: f64) -> Option<Terminal> {
        match chain {
            Chain::Interaction => {
                if state == 0 {
                    return Some(Terminal::Extinct(t));
                }
                if rates_z(&self.mech, state).total == 0.0 {
                    return Some(if state == 1 {
                        Terminal::AbsorbedOne(t)
                    } else {
                        Terminal::HorizonReached(t)
                    });
                }
                None
            }
            Chain::Immigration => {
                if state == 0 && (cfg.x_absorb_at_zero || rates_x(&self.mech, 0).total == 0.0) {
                    return Some(Terminal::Extinct(t));
                }
                if state > 0 && rates_x(&self.mech, state).total == 0.0 {
                    return Some(if state == 1 {
                        Terminal::AbsorbedOne(t)
                    } else {
                        Terminal::HorizonReached(t)
                    });
                }
                None
            }
        }
    }

    /// Path of `Z` from `z0` with the stream derived from `(cfg.seed, index)`.
    pub fn simulate_z_indexed(&self, z0: u64, cfg: &SimConfig, index: u64) -> Result<Trajectory> {
        let mut rng = rng::stream(cfg.seed, index);
        self.run_with_rng(Chain::Interaction, z0, cfg, &mut rng, cfg.seed)
    }

    /// Path of `X` from `x0` with the stream derived from `(cfg.seed, index)`.
    pub fn simulate_x_indexed(&self, x0: u64, cfg: &SimConfig, index: u64) -> Result<Trajectory> {
        let mut rng = rng::stream(cfg.seed, index);
        self.run_with_rng(Chain::Immigration, x0, cfg, &mut rng, cfg.seed)
    }
}

/// Exact Gillespie path of the interaction chain `Z` from `z0`.
pub fn simulate_z(mech: &Mechanism, z0: u64, cfg: &SimConfig) -> Result<Trajectory> {
    SimContext::new(mech).run(Chain::Interaction, z0, cfg)
}

/// Exact Gillespie path of the immigration chain `X` from `x0`.
pub fn simulate_x(mech: &Mechanism, x0: u64, cfg: &SimConfig) -> Result<Trajectory> {
    SimContext::new(mech).run(Chain::Immigration, x0, cfg)
}

/// Lamperti time change: on each constant segment of `X` at level `x` with
/// duration `Δ`, the clock advances by `Δ/x`. The state sequence is kept,
/// event times are rescaled, and the terminal is mapped through the clock.
pub fn lamperti_transform(xtraj: &Trajectory) -> Result<Trajectory> {
    if xtraj.initial == 0 {
        return Err(BpiError::ZeroState(0.0));
    }
    let mut clock = 0.0f64;
    let mut level = xtraj.initial;
    let mut prev_t = 0.0f64;
    let mut times = Vec::with_capacity(xtraj.times.len());
    for (&t, &s) in xtraj.times.iter().zip(&xtraj.states) {
        if level == 0 {
            return Err(BpiError::ZeroState(prev_t));
        }
        clock += (t - prev_t) / level as f64;
        times.push(clock);
        prev_t = t;
        level = s;
    }
    let terminal = match xtraj.terminal {
        Terminal::Extinct(_) => Terminal::Extinct(clock),
        Terminal::AbsorbedOne(_) => Terminal::AbsorbedOne(clock),
        Terminal::Ceiling { level, .. } => Terminal::Ceiling { level, time: clock },
        Terminal::HorizonReached(t_end) => {
            if level == 0 {
                return Err(BpiError::ZeroState(prev_t));
            }
            Terminal::HorizonReached(clock + (t_end - prev_t) / level as f64)
        }
    };
    Ok(Trajectory {
        initial: xtraj.initial,
        times,
        states: xtraj.states.clone(),
        terminal,
        seed: xtraj.seed,
    })
}

/// Closed-form generating function `G_z(u,t) = E_z[u^{X_t}]`, valid when
/// `d = 0` or (`c = d` and `b = 0`):
///
/// `G_z(u,t) = v^z · exp ∫_u^v (Ψ−Φ)/(wΦ) dw`, `v = Ῡ(t + Υ(u))`.
pub fn pgf_x_closed_form(fns: &Functionals, z: u64, u: f64, t: f64) -> Result<f64> {
    let m = &fns.mech;
    let applies = m.d == 0.0 || ((m.c - m.d).abs() < 1e-14 && m.b() == 0.0);
    if !applies {
        return Err(BpiError::PreconditionViolated(
            "closed-form pgf needs d = 0, or c = d with b = 0".into(),
        ));
    }
    if !(ate_domain(u) && t >= 0.0) {
        return Err(BpiError::DomainError(format!("need u ∈ [0,1], t ≥ 0; got u={u} t={t}")));
    }
    if t == 0.0 {
        return Ok(u.powi(z as i32));
    }
    if u == 1.0 {
        return Ok(1.0);
    }
    if u == 0.0 && m.d == 0.0 {
        // X never reaches 0 when d = 0.
        return Ok(if z == 0 { 1.0 } else { 0.0 });
    }
    let v = fns.upsilon_inv(t + fns.upsilon_val(u));
    let expo = integrate(
        |w| m.ratio(w) - 1.0 / w,
        u.max(1e-300),
        v,
        fns.cfg.rel_tol,
        fns.cfg.abs_tol,
    );
    Ok((z as f64 * v.ln() + expo.value).exp())
}

fn ate_domain(u: f64) -> bool {
    (0.0..=1.0).contains(&u)
}

/// Brute-force truncated-generator oracle: absorption probability at
/// `target` and expected absorption time for the chain `Z` restricted to
/// `{target..=n}`, with all mass above `n` lumped into a killing state.
/// Values are Richardson-extrapolated over truncations `n, 2n, 4n`.
pub struct Absorption {
    pub target: u64,
    /// `p[z]` for `z ∈ 0..=n` (entries below `target` equal 1 at `target`
    /// and are unreachable otherwise).
    pub p: Vec<f64>,
    /// Expected time to absorption (meaningful where `p ≈ 1`).
    pub mean: Vec<f64>,
}

pub fn absorption_oracle(mech: &Mechanism, target: u64, n: usize) -> Result<Absorption> {
    if n < 10 {
        return Err(BpiError::PreconditionViolated("truncation must be ≥ 10".into()));
    }
    let solves: Vec<(Vec<f64>, Vec<f64>)> = [n, 2 * n, 4 * n]
        .iter()
        .map(|&nn| truncated_solve(mech, target, nn))
        .collect::<Result<_>>()?;
    let mut p = vec![0.0; n + 1];
    let mut mean = vec![0.0; n + 1];
    for z in 0..=n {
        p[z] = richardson3(solves[0].0[z], solves[1].0[z], solves[2].0[z]).clamp(0.0, 1.0);
        mean[z] = richardson3(solves[0].1[z], solves[1].1[z], solves[2].1[z]).max(0.0);
    }
    Ok(Absorption { target, p, mean })
}

/// Limit estimate from values at truncations n, 2n, 4n assuming an error
/// expansion in 1/n.
fn richardson3(v1: f64, v2: f64, v4: f64) -> f64 {
    // Neville on h = 1, 1/2, 1/4.
    let p12 = 2.0 * v2 - v1;
    let p24 = 2.0 * v4 - v2;
    (4.0 * p24 - p12) / 3.0
}

/// Direct elimination on the lower-Hessenberg truncated generator: every
/// state has exactly one downward transition, so `f(s) = a_s f(s−1) + b_s`
/// propagates from the top of the truncation.
fn truncated_solve(mech: &Mechanism, target: u64, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let n_u64 = n as u64;
    let lo = target + 1;
    // coeff[s] = (a_s, b_s for probability, b_s for mean)
    let mut a = vec![0.0f64; n + 1];
    let mut bp = vec![0.0f64; n + 1];
    let mut bm = vec![0.0f64; n + 1];
    for s in (lo..=n_u64).rev() {
        let su = s as usize;
        let r = rates_z(mech, s);
        if r.total <= 0.0 {
            return Err(BpiError::SolverDiverged(format!("state {s} has zero total rate")));
        }
        let fs = s as f64;
        let pair = fs * (fs - 1.0);
        // Fold the affine chain f(s+k) = A_k f(s) + B_k into the row.
        let mut sum_wa = 0.0;
        let mut sum_wbp = 0.0;
        let mut sum_wbm = 0.0;
        let mut chain_a = 1.0;
        let mut chain_bp = 0.0;
        let mut chain_bm = 0.0;
        let kmax = n_u64 - s;
        for k in 1..=kmax {
            let idx = su + k as usize;
            chain_bp = a[idx].mul_add(chain_bp, bp[idx]);
            chain_bm = a[idx].mul_add(chain_bm, bm[idx]);
            chain_a *= a[idx];
            let w = fs * mech.pi.mass(k) + pair * mech.bb.mass(k);
            if w > 0.0 {
                sum_wa += w * chain_a;
                sum_wbp += w * chain_bp;
                sum_wbm += w * chain_bm;
            }
        }
        let denom = r.total - sum_wa;
        if !(denom > 0.0) {
            return Err(BpiError::SolverDiverged(format!("non-positive pivot at state {s}")));
        }
        a[su] = r.down / denom;
        bp[su] = sum_wbp / denom;
        bm[su] = (sum_wbm + 1.0) / denom;
    }
    let mut p = vec![0.0; n + 1];
    let mut mean = vec![0.0; n + 1];
    if (target as usize) <= n {
        p[target as usize] = 1.0;
    }
    for s in lo..=n_u64 {
        let su = s as usize;
        p[su] = a[su] * p[su - 1] + bp[su];
        mean[su] = a[su] * mean[su - 1] + bm[su];
    }
    Ok((p, mean))
}

/// Streams a trajectory as JSONL, one event per record, initial state first.
pub fn write_jsonl<W: IoWrite>(traj: &Trajectory, w: &mut W) -> Result<()> {
    writeln!(w, "{{\"t\":{},\"x\":{}}}", 0.0, traj.initial)?;
    for (t, x) in traj.times.iter().zip(&traj.states) {
        writeln!(w, "{{\"t\":{t},\"x\":{x}}}")?;
    }
    Ok(())
}

const BINARY_MAGIC: &[u8; 4] = b"BPI1";

/// Compact framing: magic "BPI1", then per event little-endian f64 time and
/// u64 state (16 bytes per event, initial state first at t = 0).
pub fn write_binary<W: IoWrite>(traj: &Trajectory, w: &mut W) -> Result<()> {
    w.write_all(BINARY_MAGIC)?;
    w.write_all(&0.0f64.to_le_bytes())?;
    w.write_all(&traj.initial.to_le_bytes())?;
    for (t, x) in traj.times.iter().zip(&traj.states) {
        w.write_all(&t.to_le_bytes())?;
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

/// Reads the binary framing back into (times, states) pairs.
pub fn read_binary<R: IoRead>(r: &mut R) -> Result<Vec<(f64, u64)>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != BINARY_MAGIC {
        return Err(BpiError::DomainError("bad trajectory magic".into()));
    }
    let mut out = Vec::new();
    let mut rec = [0u8; 16];
    loop {
        match r.read_exact(&mut rec) {
            Ok(()) => {
                let t = f64::from_le_bytes(rec[..8].try_into().expect("8 bytes"));
                let x = u64::from_le_bytes(rec[8..].try_into().expect("8 bytes"));
                out.push((t, x));
            }
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(e.into()),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms::{OffspringLaw, PowerTail};

    #[test]
    fn rates_z_sibuya_example() {
        let m = Mechanism::sibuya(0.5);
        let r = rates_z(&m, 3);
        assert!((r.total - 13.5).abs() < 1e-12);
        assert!((r.down - 6.0).abs() < 1e-12);
        // up weight of size 1 = i·π₁ + i(i−1)·b₁ = 1.5 + 6 = 7.5
        assert!((r.up_branching + r.up_cooperation - 7.5).abs() < 1e-12);
    }

    #[test]
    fn rates_absorbing_states() {
        let kingman = Mechanism::kingman(1.0);
        assert_eq!(rates_z(&kingman, 1).total, 0.0);
        let lb = Mechanism::logistic(0.5, 1.0, 1.0);
        assert_eq!(rates_z(&lb, 0).total, 0.0);
        assert!(rates_z(&lb, 1).total > 0.0);
    }

    #[test]
    fn rates_x_sibuya_example() {
        let m = Mechanism::sibuya(0.5);
        let r = rates_x(&m, 3);
        assert!((r.up_branching + r.up_cooperation - 2.5).abs() < 1e-12);
        assert!((r.down - 2.0).abs() < 1e-12);
        // i = 1 kills the interaction terms
        let r1 = rates_x(&m, 1);
        assert_eq!(r1.down, 0.0);
        assert!((r1.up_branching - 0.5).abs() < 1e-12);
        // i = 0 with ρ = 0 is absorbing
        let r0 = rates_x(&Mechanism::kingman(1.0), 0);
        assert_eq!(r0.total, 0.0);
    }

    #[test]
    fn simulate_from_absorbing_state() {
        let lb = Mechanism::logistic(0.5, 1.0, 1.0);
        let traj = simulate_z(&lb, 0, &SimConfig::default()).unwrap();
        assert!(traj.times.is_empty());
        assert_eq!(traj.terminal, Terminal::Extinct(0.0));
    }

    #[test]
    fn trajectory_invariants_hold() {
        let m = Mechanism::sibuya(0.5);
        for seed in 0..20 {
            let cfg = SimConfig { horizon: 5.0, seed, ..SimConfig::default() };
            let traj = simulate_z(&m, 3, &cfg).unwrap();
            let mut prev_t = 0.0;
            let mut prev_s = traj.initial;
            for (&t, &s) in traj.times.iter().zip(&traj.states) {
                assert!(t > prev_t);
                assert_ne!(s, prev_s);
                if s < prev_s {
                    assert_eq!(prev_s - s, 1, "downward jumps have size one");
                }
                prev_t = t;
                prev_s = s;
            }
        }
    }

    #[test]
    fn reproducible_given_seed() {
        let m = Mechanism::sibuya(0.5);
        let cfg = SimConfig { horizon: 3.0, seed: 42, ..SimConfig::default() };
        let a = simulate_z(&m, 2, &cfg).unwrap();
        let b = simulate_z(&m, 2, &cfg).unwrap();
        assert_eq!(a.times, b.times);
        assert_eq!(a.states, b.states);
    }

    #[test]
    fn one_step_frequencies_match_generator() {
        // Chi-squared on first jumps out of state 3 of the Sibuya chain.
        let m = Mechanism::sibuya(0.5);
        let ctx = SimContext::new(&m);
        let r = rates_z(&m, 3);
        let n = 200_000u64;
        let mut down = 0u64;
        let mut up = 0u64;
        // Horizon long enough that the first jump has fired (rate 13.5).
        let cfg = SimConfig { horizon: 3.0, ..SimConfig::default() };
        for i in 0..n {
            let mut rng = rng::stream(7, i);
            let traj = ctx.run_with_rng(Chain::Interaction, 3, &cfg, &mut rng, 7).unwrap();
            match traj.states.first() {
                Some(2) => down += 1,
                Some(4) => up += 1,
                other => panic!("unexpected first state {other:?}"),
            }
        }
        let p_down = r.down / r.total;
        let expect_down = n as f64 * p_down;
        let expect_up = n as f64 * (1.0 - p_down);
        let chi2 = (down as f64 - expect_down).powi(2) / expect_down
            + (up as f64 - expect_up).powi(2) / expect_up;
        // 1 dof: chi2 < 10.83 is p > 0.001
        assert!(chi2 < 10.83, "chi2 = {chi2}, down = {down}");
    }

    #[test]
    fn holding_time_matches_total_rate() {
        let m = Mechanism::sibuya(0.5);
        let r = rates_z(&m, 3);
        let n = 100_000;
        let mut sum = 0.0;
        let ctx = SimContext::new(&m);
        let cfg = SimConfig { seed: 11, horizon: 3.0, ..SimConfig::default() };
        for i in 0..n {
            let mut rng = rng::stream(cfg.seed, i);
            let traj = ctx.run_with_rng(Chain::Interaction, 3, &cfg, &mut rng, 11).unwrap();
            sum += traj.times[0];
        }
        let mean = sum / n as f64;
        let expect = 1.0 / r.total;
        let sigma = expect / (n as f64).sqrt();
        assert!((mean - expect).abs() < 3.0 * sigma, "mean {mean} vs {expect}");
    }

    #[test]
    fn lamperti_clock_is_exact_on_segments() {
        // constant path X ≡ 5 for duration 1 → clock advances 0.2
        let xtraj = Trajectory {
            initial: 5,
            times: vec![1.0],
            states: vec![6],
            terminal: Terminal::HorizonReached(1.0),
            seed: 0,
        };
        let z = lamperti_transform(&xtraj).unwrap();
        assert!((z.times[0] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn pgf_x_closed_form_kingman_value() {
        let f = Functionals::with_default_theta(&Mechanism::kingman(1.0)).unwrap();
        // z=2, u=0.5, t=ln2: Υ(0.5)=ln2, Ῡ(2ln2)=0.75, G = u·v = 0.375
        let g = pgf_x_closed_form(&f, 2, 0.5, std::f64::consts::LN_2).unwrap();
        assert!((g - 0.375).abs() < 1e-9, "g = {g}");
        // t = 0 → u^z
        assert_eq!(pgf_x_closed_form(&f, 3, 0.7, 0.0).unwrap(), 0.7f64.powi(3));
    }

    #[test]
    fn pgf_x_rejected_outside_its_cases() {
        let lb = Mechanism::logistic(0.5, 1.0, 1.0);
        let f = Functionals::with_default_theta(&lb).unwrap();
        assert!(pgf_x_closed_form(&f, 1, 0.5, 1.0).is_err());
    }

    #[test]
    fn kingman_absorption_oracle_exact() {
        // mean ζ₁ from z=5 at c=1: Σ_{k=2}^5 1/(k(k−1)) = 0.8, pure
        // lower-triangular solve, exact to rounding.
        let m = Mechanism::kingman(1.0);
        let oracle = absorption_oracle(&m, 1, 50).unwrap();
        assert!((oracle.p[5] - 1.0).abs() < 1e-12);
        assert!((oracle.mean[5] - 0.8).abs() < 1e-10, "mean {}", oracle.mean[5]);
        assert_eq!(oracle.p[1], 1.0);
        assert_eq!(oracle.mean[1], 0.0);
    }

    #[test]
    fn lb_extinction_oracle_probability_one() {
        let m = Mechanism::logistic(0.5, 1.0, 1.0);
        let oracle = absorption_oracle(&m, 0, 60).unwrap();
        for z in 1..=20 {
            assert!((oracle.p[z] - 1.0).abs() < 1e-10, "z={z} p={}", oracle.p[z]);
        }
        assert!(oracle.mean[3] > 0.0);
    }

    #[test]
    fn binary_round_trip() {
        let m = Mechanism::sibuya(0.5);
        let cfg = SimConfig { horizon: 2.0, seed: 5, ..SimConfig::default() };
        let traj = simulate_z(&m, 2, &cfg).unwrap();
        let mut buf = Vec::new();
        write_binary(&traj, &mut buf).unwrap();
        let events = read_binary(&mut buf.as_slice()).unwrap();
        assert_eq!(events.len(), traj.times.len() + 1);
        assert_eq!(events[0], (0.0, 2));
        for (k, (t, x)) in events.iter().skip(1).enumerate() {
            assert_eq!(*t, traj.times[k]);
            assert_eq!(*x, traj.states[k]);
        }
    }

    #[test]
    fn heavy_tail_sampler_matches_tail_masses() {
        let law =
            OffspringLaw::new(vec![0.5], Some(PowerTail { amp: 1.0, alpha: 0.5, cutoff: 1 }))
                .unwrap();
        let sampler = JumpSampler::new(&law).unwrap();
        let n = 300_000;
        let mut over_64 = 0u64;
        let mut rng = rng::stream(3, 0);
        for _ in 0..n {
            if sampler.sample(&mut rng) > 64 {
                over_64 += 1;
            }
        }
        let p_tail = law.tail_sum(65) / law.total();
        let freq = over_64 as f64 / n as f64;
        let sigma = (p_tail * (1.0 - p_tail) / n as f64).sqrt();
        assert!((freq - p_tail).abs() < 4.0 * sigma, "freq {freq} vs {p_tail}");
    }
}

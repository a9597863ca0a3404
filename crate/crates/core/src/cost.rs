//! Overlap costs and their gradients.
//!
//! With `|φ⟩ = V(θ)†|ψ⟩` and `A_s = ⟨s|φ⟩`, the truncated local cost is
//!
//! ```text
//! C = (1 − |A_0|²) − Σ_{m=1..k} α_m Σ_{|s|=m} |A_s|²
//! ```
//!
//! where `|s|` is the Hamming weight of the basis string `s`.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::{apply_ansatz_adjoint, sv_apply_ansatz_adjoint, Ansatz};
use crate::circuit::{self, Gate};
use crate::error::{Error, Result};
use crate::linalg::{C64, ZERO};
use crate::mps::{contract2, contract4, Mps, TransitionEnv, TruncationPolicy};
use crate::statevector::DenseState;

/// Upper bound on the number of amplitudes read for one cost value.
pub const MAX_FLIP_STRINGS: usize = 1 << 20;
/// Largest `n` for the exhaustive local cost.
pub const MAX_BRUTEFORCE_QUBITS: usize = 14;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaPhase {
    /// Share of the iteration budget spent in this phase.
    pub fraction: f64,
    /// `α_1 … α_k`; empty means the global cost.
    pub alphas: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaSchedule {
    pub phases: Vec<AlphaPhase>,
}

impl AlphaSchedule {
    /// Half the budget at `k = 1`, `α_1 = (n−1)/n`, then the global cost.
    pub fn two_phase(n: usize) -> Self {
        AlphaSchedule {
            phases: vec![
                AlphaPhase {
                    fraction: 0.5,
                    alphas: vec![(n as f64 - 1.0) / n as f64],
                },
                AlphaPhase {
                    fraction: 0.5,
                    alphas: Vec::new(),
                },
            ],
        }
    }

    pub fn global() -> Self {
        AlphaSchedule {
            phases: vec![AlphaPhase {
                fraction: 1.0,
                alphas: Vec::new(),
            }],
        }
    }

    /// Parse `two-phase`, `global`, or explicit phases such as
    /// `0.5:0.875,0.5:` (fraction, then `/`-separated weights).
    pub fn parse(text: &str, n: usize) -> Result<Self> {
        let s = match text.trim() {
            "two-phase" | "default" => Self::two_phase(n),
            "global" => Self::global(),
            spec => {
                let mut phases = Vec::new();
                for part in spec.split(',') {
                    let (frac, rest) = part.split_once(':').ok_or_else(|| {
                        Error::Config(format!("alpha phase {part:?} lacks a ':'"))
                    })?;
                    let fraction = f64::from_str(frac.trim())
                        .map_err(|e| Error::Config(format!("bad phase fraction {frac:?}: {e}")))?;
                    let alphas = rest
                        .split('/')
                        .map(str::trim)
                        .filter(|x| !x.is_empty())
                        .map(|x| {
                            f64::from_str(x)
                                .map_err(|e| Error::Config(format!("bad alpha {x:?}: {e}")))
                        })
                        .collect::<Result<Vec<f64>>>()?;
                    phases.push(AlphaPhase { fraction, alphas });
                }
                AlphaSchedule { phases }
            }
        };
        s.validate(n)?;
        Ok(s)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.phases.is_empty() {
            return Err(Error::Config("alpha schedule has no phases".into()));
        }
        for p in &self.phases {
            if !(p.fraction > 0.0 && p.fraction.is_finite()) {
                return Err(Error::Config("phase fractions must be positive".into()));
            }
            if p.alphas.len() > n {
                return Err(Error::Config(format!(
                    "truncation order {} exceeds n = {n}",
                    p.alphas.len()
                )));
            }
            if p.alphas.iter().any(|a| !a.is_finite() || *a < 0.0) {
                return Err(Error::Config("alpha weights must be finite and ≥ 0".into()));
            }
        }
        Ok(())
    }

    /// `(first iteration, alphas)` per phase for a given budget; the last
    /// phase always runs to the end of the budget.
    pub fn boundaries(&self, max_iter: usize) -> Vec<(usize, Vec<f64>)> {
        let total: f64 = self.phases.iter().map(|p| p.fraction).sum();
        let mut acc = 0.0;
        let mut out: Vec<(usize, Vec<f64>)> = Vec::new();
        for p in &self.phases {
            let start = ((acc / total) * max_iter as f64).round() as usize;
            acc += p.fraction;
            if out.last().is_some_and(|(s, _)| *s == start) {
                out.pop();
            }
            out.push((start.min(max_iter), p.alphas.clone()));
        }
        out
    }

    /// Weights in force at a given iteration.
    pub fn alphas_at(&self, iter: usize, max_iter: usize) -> Vec<f64> {
        let b = self.boundaries(max_iter);
        b.iter()
            .rev()
            .find(|(s, _)| *s <= iter)
            .map(|(_, a)| a.clone())
            .unwrap_or_default()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostConfig {
    /// `α_1 … α_k` used by [`cost_local_truncated`]; `k = alphas.len()`.
    pub alphas: Vec<f64>,
    pub schedule: AlphaSchedule,
    pub policy: TruncationPolicy,
}

impl CostConfig {
    pub fn new(alphas: Vec<f64>, policy: TruncationPolicy) -> Self {
        CostConfig {
            alphas,
            schedule: AlphaSchedule::global(),
            policy,
        }
    }

    /// Weights `(n−m)/n` for `m = 1..k`.
    pub fn local_weights(n: usize, k: usize) -> Vec<f64> {
        (1..=k).map(|m| (n - m) as f64 / n as f64).collect()
    }

    pub fn k(&self) -> usize {
        self.alphas.len()
    }

    pub fn with_alphas(&self, alphas: Vec<f64>) -> Self {
        CostConfig {
            alphas,
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostValue {
    pub total: f64,
    /// `1 − |⟨0|φ⟩|²`
    pub infidelity_term: f64,
    /// `Σ_{|s|=m} |⟨s|φ⟩|²` for `m = 1..k`.
    pub flip_terms: Vec<f64>,
}

fn flip_string_count(n: usize, k: usize) -> usize {
    let mut total = 0usize;
    let mut binom = 1usize;
    for m in 0..=k {
        total = total.saturating_add(binom);
        binom = binom.saturating_mul(n - m) / (m + 1);
    }
    total
}

fn check_order(n: usize, k: usize) -> Result<()> {
    if k > n {
        return Err(Error::invalid(format!(
            "truncation order {k} exceeds n = {n}"
        )));
    }
    let count = flip_string_count(n, k);
    if count > MAX_FLIP_STRINGS {
        return Err(Error::SizeLimit {
            what: "bit-flip amplitude enumeration",
            requested: n,
            limit: MAX_FLIP_STRINGS,
        });
    }
    Ok(())
}

/// Evaluate the cost terms from an already computed `|φ⟩`.
pub fn cost_from_phi(phi: &Mps, alphas: &[f64]) -> Result<CostValue> {
    check_order(phi.n(), alphas.len())?;
    let groups = phi.low_weight_amplitudes(alphas.len());
    Ok(cost_from_groups(&groups, alphas))
}

fn cost_from_groups(groups: &[Vec<(Vec<usize>, C64)>], alphas: &[f64]) -> CostValue {
    let a0 = groups[0][0].1;
    let infidelity_term = 1.0 - a0.norm_sqr();
    let flip_terms: Vec<f64> = groups[1..]
        .iter()
        .map(|g| g.iter().map(|(_, a)| a.norm_sqr()).sum())
        .collect();
    let total = infidelity_term
        - alphas
            .iter()
            .zip(&flip_terms)
            .map(|(a, f)| a * f)
            .sum::<f64>();
    CostValue {
        total,
        infidelity_term,
        flip_terms,
    }
}

/// `1 − |⟨0|V(θ)†|ψ⟩|²`.
pub fn cost_global(
    a: &Ansatz,
    theta: &[f64],
    target: &Mps,
    policy: &TruncationPolicy,
) -> Result<CostValue> {
    let phi = apply_ansatz_adjoint(a, theta, target, policy)?;
    cost_from_phi(&phi, &[])
}

pub fn cost_local_truncated(
    a: &Ansatz,
    theta: &[f64],
    target: &Mps,
    cfg: &CostConfig,
) -> Result<CostValue> {
    check_order(a.n, cfg.k())?;
    let phi = apply_ansatz_adjoint(a, theta, target, &cfg.policy)?;
    cost_from_phi(&phi, &cfg.alphas)
}

/// Untruncated local cost `1 − Σ_s (n−|s|)/n · |⟨s|φ⟩|²` by dense enumeration.
pub fn cost_full_local_bruteforce(a: &Ansatz, theta: &[f64], target: &Mps) -> Result<f64> {
    let n = a.n;
    if n > MAX_BRUTEFORCE_QUBITS {
        return Err(Error::SizeLimit {
            what: "exhaustive local cost",
            requested: n,
            limit: MAX_BRUTEFORCE_QUBITS,
        });
    }
    let psi = DenseState::from_mps(target)?;
    let phi = sv_apply_ansatz_adjoint(a, theta, &psi)?;
    let mut acc = 0.0;
    for (idx, amp) in phi.amplitudes().iter().enumerate() {
        let w = (n - idx.count_ones() as usize) as f64 / n as f64;
        acc += w * amp.norm_sqr();
    }
    Ok(1.0 - acc)
}

/// Parameter-shift gradient: `(C(θ_j + π/2) − C(θ_j − π/2)) / 2` for every
/// trainable parameter, evaluated in parallel.
pub fn gradient(a: &Ansatz, theta: &[f64], target: &Mps, cfg: &CostConfig) -> Result<Vec<f64>> {
    a.check_params(theta)?;
    check_order(a.n, cfg.k())?;
    let shift = std::f64::consts::FRAC_PI_2;
    (0..theta.len())
        .into_par_iter()
        .map(|j| {
            let mut t = theta.to_vec();
            t[j] = theta[j] + shift;
            let plus = cost_local_truncated(a, &t, target, cfg)?.total;
            t[j] = theta[j] - shift;
            let minus = cost_local_truncated(a, &t, target, cfg)?.total;
            Ok((plus - minus) / 2.0)
        })
        .collect()
}

/// Central finite differences with step `h`.
pub fn gradient_fd(
    a: &Ansatz,
    theta: &[f64],
    target: &Mps,
    cfg: &CostConfig,
    h: f64,
) -> Result<Vec<f64>> {
    a.check_params(theta)?;
    (0..theta.len())
        .into_par_iter()
        .map(|j| {
            let mut t = theta.to_vec();
            t[j] = theta[j] + h;
            let plus = cost_local_truncated(a, &t, target, cfg)?.total;
            t[j] = theta[j] - h;
            let minus = cost_local_truncated(a, &t, target, cfg)?.total;
            Ok((plus - minus) / (2.0 * h))
        })
        .collect()
}

/// `Σ_s w_s A_s |s⟩` over strings of weight ≤ 1 as a bond-2 MPS
/// (`w_0 = 1`, `w_1 = α_1`).
fn weighted_flip_state(n: usize, a0: C64, flips: &[C64], alpha1: f64) -> Result<Mps> {
    use faer::Mat;
    // bond index 0: no one seen yet, 1: the single one has been placed
    let bulk = |i: usize| -> [Mat<C64>; 2] {
        let mut m0 = Mat::zeros(2, 2);
        m0[(0, 0)] = C64::new(1.0, 0.0);
        m0[(1, 1)] = C64::new(1.0, 0.0);
        let mut m1 = Mat::zeros(2, 2);
        if let Some(f) = flips.get(i) {
            m1[(0, 1)] = f * alpha1;
        }
        [m0, m1]
    };
    let mut left = Mat::zeros(1, 2);
    left[(0, 0)] = C64::new(1.0, 0.0);
    let mut right = Mat::zeros(2, 1);
    right[(0, 0)] = a0;
    right[(1, 0)] = C64::new(1.0, 0.0);
    let mut sites: Vec<[Mat<C64>; 2]> = (0..n).map(bulk).collect();
    for s in sites[0].iter_mut() {
        *s = &left * &*s;
    }
    for s in sites[n - 1].iter_mut() {
        *s = &*s * &right;
    }
    Mps::from_sites(sites)
}

/// Cost and gradient from one backward and one forward sweep over the
/// circuit columns. Exact for unbounded bond dimension; with truncation it
/// differentiates the truncated circuit approximately. Orders `k ≥ 2` fall
/// back to the parameter-shift rule.
pub fn gradient_adjoint(
    a: &Ansatz,
    theta: &[f64],
    target: &Mps,
    cfg: &CostConfig,
) -> Result<(CostValue, Vec<f64>)> {
    if cfg.k() >= 2 {
        let value = cost_local_truncated(a, theta, target, cfg)?;
        return Ok((value, gradient(a, theta, target, cfg)?));
    }
    if target.n() != a.n {
        return Err(Error::invalid("state size differs from the ansatz"));
    }
    let cols = a.columns(theta)?;
    let ncol = cols.len();

    // xs[c] = C_c† … C_{K-1}† |ψ⟩, xs[K] = |ψ⟩
    let mut xs: Vec<Mps> = Vec::with_capacity(ncol + 1);
    let mut x = target.clone();
    xs.push(x.clone());
    for col in cols.iter().rev() {
        circuit::apply_column_adjoint(&mut x, &col.gates, &cfg.policy)?;
        xs.push(x.clone());
    }
    xs.reverse();
    x.normalize();
    let phi = x;

    let alpha1 = cfg.alphas.first().copied().unwrap_or(0.0);
    let groups = phi.low_weight_amplitudes(cfg.k());
    let value = cost_from_groups(&groups, &cfg.alphas);
    let a0 = groups[0][0].1;
    let flips: Vec<C64> = if cfg.k() == 1 {
        groups[1].iter().map(|(_, amp)| *amp).collect()
    } else {
        Vec::new()
    };
    let mut omega = weighted_flip_state(a.n, a0, &flips, alpha1)?;
    let scale = omega.norm();
    let mut grad = vec![0.0; theta.len()];
    if scale == 0.0 {
        return Ok((value, grad));
    }
    omega.normalize();

    let mut by_column: Vec<Vec<usize>> = vec![Vec::new(); ncol];
    for j in 0..theta.len() {
        by_column[a.owner_of(j).0].push(j);
    }
    for (c, col) in cols.iter().enumerate() {
        if !by_column[c].is_empty() {
            let env = TransitionEnv::new(&xs[c], &omega)?;
            for &j in &by_column[c] {
                let (_, gi) = a.owner_of(j);
                let overlap = match (&col.gates[gi], a.gate_derivative(theta, j)) {
                    (Gate::Two { left, u }, Gate::Two { u: du, .. }) => {
                        contract4(&(u.adjoint() * du), &env.reduced_two_site(*left))
                    }
                    (Gate::Single { site, u }, Gate::Single { u: du, .. }) => {
                        contract2(&(u.adjoint() * du), &env.reduced_one_site(*site))
                    }
                    _ => ZERO,
                };
                grad[j] = -2.0 * scale * overlap.re;
            }
        }
        circuit::apply_column(&mut omega, &col.gates, &cfg.policy)?;
    }
    Ok((value, grad))
}

/// Monte-Carlo variance of `∂C/∂θ_0` for the product ansatz
/// `V(θ) = ⊗_j exp(-iθ_j X/2)` against `|0…0⟩`, with weights `(n−m)/n`
/// truncated at order `k`.
pub fn variance_probe(n: usize, k: usize, samples: usize, seed: u64) -> Result<f64> {
    if n == 0 || k > n {
        return Err(Error::invalid("variance probe needs 0 ≤ k ≤ n and n ≥ 1"));
    }
    if samples < 2 {
        return Err(Error::invalid("variance probe needs at least two samples"));
    }
    let weights: Vec<f64> = std::iter::once(1.0)
        .chain(CostConfig::local_weights(n, k))
        .collect();
    // C = 1 − Σ_m w_m e_m(p), with e_m the elementary symmetric polynomial
    // of the per-site probabilities of reading a one
    let cost = |theta: &[f64]| -> f64 {
        let mut e = vec![0.0; k + 1];
        e[0] = 1.0;
        for &t in theta {
            let p1 = (t / 2.0).sin().powi(2);
            let p0 = 1.0 - p1;
            for m in (0..=k).rev() {
                e[m] = e[m] * p0 + if m > 0 { e[m - 1] * p1 } else { 0.0 };
            }
        }
        1.0 - weights.iter().zip(&e).map(|(w, x)| w * x).sum::<f64>()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut theta = vec![0.0; n];
    let (mut mean, mut m2) = (0.0, 0.0);
    for i in 0..samples {
        for t in theta.iter_mut() {
            *t = rng.gen_range(0.0..std::f64::consts::TAU);
        }
        let t0 = theta[0];
        theta[0] = t0 + std::f64::consts::FRAC_PI_2;
        let plus = cost(&theta);
        theta[0] = t0 - std::f64::consts::FRAC_PI_2;
        let minus = cost(&theta);
        let g = (plus - minus) / 2.0;
        // Welford update
        let d = g - mean;
        mean += d / (i + 1) as f64;
        m2 += d * (g - mean);
    }
    Ok(m2 / (samples - 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::{apply_ansatz, build_brickwork_ansatz, trotter_initialize};
    use crate::hamiltonian::XyzHamiltonian;
    use crate::linalg::ONE;

    fn setup(n: usize, l: usize, seed: u64) -> (Ansatz, Vec<f64>, Mps) {
        let h = XyzHamiltonian::uniform(n, 0.7, 0.9, 1.1).unwrap();
        let a = build_brickwork_ansatz(n, l, &h, 0.25).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let theta: Vec<f64> = (0..a.n_params())
            .map(|_| rng.gen_range(-3.0..3.0))
            .collect();
        let target = Mps::random(n, 4, &mut rng).unwrap();
        (a, theta, target)
    }

    #[test]
    fn schedule_boundaries() {
        let s = AlphaSchedule::two_phase(8);
        assert_eq!(s.boundaries(30), vec![(0, vec![0.875]), (15, vec![])]);
        assert_eq!(s.alphas_at(14, 30), vec![0.875]);
        assert!(s.alphas_at(15, 30).is_empty());
        let p = AlphaSchedule::parse("1:0.5/0.25,3:", 4).unwrap();
        assert_eq!(p.boundaries(8), vec![(0, vec![0.5, 0.25]), (2, vec![])]);
        assert!(AlphaSchedule::parse("0.5", 4).is_err());
        assert!(AlphaSchedule::parse("1:0.1/0.1/0.1", 2).is_err());
        assert_eq!(
            AlphaSchedule::parse("global", 4).unwrap(),
            AlphaSchedule::global()
        );
    }

    #[test]
    fn zero_cost_at_the_prepared_state() {
        let (a, theta, _) = setup(5, 1, 2);
        let policy = TruncationPolicy::unbounded();
        let target = apply_ansatz(&a, &theta, &Mps::zeros(5).unwrap(), &policy).unwrap();
        let cfg = CostConfig::new(CostConfig::local_weights(5, 2), policy);
        let v = cost_local_truncated(&a, &theta, &target, &cfg).unwrap();
        assert!(v.total.abs() < 1e-10);
        assert!(v.flip_terms.iter().all(|f| f.abs() < 1e-10));
    }

    #[test]
    fn zero_alpha_equals_global() {
        let (a, theta, target) = setup(4, 1, 3);
        let policy = TruncationPolicy::unbounded();
        let g = cost_global(&a, &theta, &target, &policy).unwrap();
        let l =
            cost_local_truncated(&a, &theta, &target, &CostConfig::new(vec![0.0], policy)).unwrap();
        assert_eq!(g.total, l.total);
    }

    #[test]
    fn truncation_order_is_monotone() {
        let (a, theta, target) = setup(5, 1, 4);
        let policy = TruncationPolicy::unbounded();
        let mut prev = f64::INFINITY;
        for k in 0..=5 {
            let cfg = CostConfig::new(vec![0.5; k], policy);
            let v = cost_local_truncated(&a, &theta, &target, &cfg)
                .unwrap()
                .total;
            assert!(v <= prev + 1e-14);
            prev = v;
        }
        assert!(
            cost_local_truncated(&a, &theta, &target, &CostConfig::new(vec![0.5; 6], policy))
                .is_err()
        );
    }

    #[test]
    fn single_qubit_bruteforce_is_global() {
        let h = XyzHamiltonian::xxx(2).unwrap();
        let a = build_brickwork_ansatz(2, 1, &h, 0.3).unwrap();
        let theta = trotter_initialize(&a, &h, 0.3, "10").unwrap();
        let target = Mps::from_product_state("01").unwrap();
        let full = cost_full_local_bruteforce(&a, &theta, &target).unwrap();
        let cfg = CostConfig::new(
            CostConfig::local_weights(2, 2),
            TruncationPolicy::unbounded(),
        );
        let trunc = cost_local_truncated(&a, &theta, &target, &cfg)
            .unwrap()
            .total;
        assert!((full - trunc).abs() < 1e-12);
    }

    #[test]
    fn adjoint_gradient_matches_parameter_shift() {
        for k in [0, 1] {
            let (a, theta, target) = setup(4, 1, 10 + k as u64);
            let cfg = CostConfig::new(
                CostConfig::local_weights(4, k),
                TruncationPolicy::unbounded(),
            );
            let ps = gradient(&a, &theta, &target, &cfg).unwrap();
            let (value, adj) = gradient_adjoint(&a, &theta, &target, &cfg).unwrap();
            let direct = cost_local_truncated(&a, &theta, &target, &cfg).unwrap();
            assert!((value.total - direct.total).abs() < 1e-12);
            for (x, y) in ps.iter().zip(&adj) {
                assert!((x - y).abs() < 1e-9, "k={k}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn weighted_flip_state_amplitudes() {
        let flips = [C64::new(0.1, 0.2), C64::new(-0.3, 0.0), C64::new(0.0, 0.4)];
        let psi = weighted_flip_state(3, ONE * 0.5, &flips, 0.75).unwrap();
        assert!((psi.amplitude("000").unwrap() - 0.5).norm() < 1e-15);
        assert!((psi.amplitude("010").unwrap() - flips[1] * 0.75).norm() < 1e-15);
        assert!(psi.amplitude("011").unwrap().norm() < 1e-15);
        let single = weighted_flip_state(1, ONE * 0.5, &flips[..1], 2.0).unwrap();
        assert!((single.amplitude("1").unwrap() - flips[0] * 2.0).norm() < 1e-15);
    }

    #[test]
    fn variance_probe_is_deterministic() {
        let a = variance_probe(4, 1, 1000, 7).unwrap();
        assert_eq!(a, variance_probe(4, 1, 1000, 7).unwrap());
        assert!(a > 0.0);
        assert!(variance_probe(4, 5, 10, 0).is_err());
    }
}

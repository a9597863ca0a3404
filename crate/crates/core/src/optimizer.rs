//! Limited-memory BFGS with Armijo backtracking and phase-wise cost weights.

use std::collections::VecDeque;
use std::io::Write;
use std::time::Instant;

use log::{debug, info};
use serde::{Deserialize, Serialize};

use crate::cost::{AlphaSchedule, CostValue};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub max_iter: usize,
    /// Number of stored `(s, y)` pairs.
    pub memory: usize,
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Curvature constant; pairs failing `yᵀs ≥ (1 − c2)·|gᵀs|` are not stored.
    pub c2: f64,
    pub max_backtracks: usize,
    /// Stop once `‖g‖∞` drops below this.
    pub grad_tol: f64,
    /// Stop once an accepted step lowers the cost by less than this
    /// fraction of its previous value.
    pub cost_tol: f64,
    /// Largest single-angle change of the first (unscaled) step.
    pub initial_step: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            max_iter: 30,
            memory: 10,
            c1: 1e-4,
            c2: 0.9,
            max_backtracks: 30,
            grad_tol: 1e-8,
            cost_tol: 1e-12,
            initial_step: 0.1,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter < 1 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        if self.memory < 1 {
            return Err(Error::Config("memory must be at least 1".into()));
        }
        if !(0.0 < self.c1 && self.c1 < self.c2 && self.c2 < 1.0) {
            return Err(Error::Config("need 0 < c1 < c2 < 1".into()));
        }
        if !(self.grad_tol > 0.0 && self.cost_tol > 0.0 && self.initial_step > 0.0) {
            return Err(Error::Config(
                "tolerances and step size must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Cost and gradient at `θ` under weights `α`.
pub trait Evaluator {
    fn evaluate(&self, theta: &[f64], alphas: &[f64]) -> Result<(CostValue, Vec<f64>)>;

    /// Cost only; used by the line search.
    fn value(&self, theta: &[f64], alphas: &[f64]) -> Result<CostValue> {
        Ok(self.evaluate(theta, alphas)?.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepKind {
    Start,
    QuasiNewton,
    GradientFallback,
    PhaseChange,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub cost: f64,
    pub infidelity: f64,
    pub grad_norm: f64,
    pub alpha1: f64,
    pub seconds: f64,
    pub phase: usize,
    pub step: StepKind,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OptimizationTrace {
    pub records: Vec<TraceRecord>,
}

impl OptimizationTrace {
    /// True when the cost never rises between consecutive records of the same phase.
    pub fn is_monotone(&self) -> bool {
        self.records
            .windows(2)
            .all(|w| w[0].phase != w[1].phase || w[1].cost <= w[0].cost)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "iter",
            "cost",
            "infidelity",
            "grad_norm",
            "alpha1",
            "seconds",
        ])?;
        for r in &self.records {
            out.write_record([
                r.iter.to_string(),
                format!("{:e}", r.cost),
                format!("{:e}", r.infidelity),
                format!("{:e}", r.grad_norm),
                r.alpha1.to_string(),
                format!("{:.3}", r.seconds),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    MaxIter,
    GradTol,
    CostTol,
    LineSearchFailed,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OptimizationResult {
    /// Best point under the infidelity term.
    pub theta: Vec<f64>,
    pub best_infidelity: f64,
    pub initial_infidelity: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub stop_reason: StopReason,
    pub trace: OptimizationTrace,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Two-loop recursion: `-H·g`.
fn lbfgs_direction(g: &[f64], mem: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Option<Vec<f64>> {
    let (s_last, y_last, _) = mem.back()?;
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(mem.len());
    for (s, y, rho) in mem.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    let gamma = dot(s_last, y_last) / dot(y_last, y_last);
    for qi in q.iter_mut() {
        *qi *= gamma;
    }
    for ((s, y, rho), a) in mem.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    Some(q.into_iter().map(|x| -x).collect())
}

/// Minimize over `θ`, switching weights according to `schedule`.
pub fn minimize<E: Evaluator + ?Sized>(
    eval: &E,
    theta0: &[f64],
    cfg: &OptimizerConfig,
    schedule: &AlphaSchedule,
) -> Result<OptimizationResult> {
    cfg.validate()?;
    let start = Instant::now();
    let phases = schedule.boundaries(cfg.max_iter);
    let mut phase = 0;
    let mut alphas = phases[0].1.clone();
    let alpha1 = |a: &[f64]| a.first().copied().unwrap_or(0.0);

    let mut theta = theta0.to_vec();
    let (mut val, mut grad) = eval.evaluate(&theta, &alphas)?;
    let mut evaluations = 1;
    let initial_infidelity = val.infidelity_term;
    let mut best = (val.infidelity_term, theta.clone());
    let mut trace = OptimizationTrace::default();
    let record = |trace: &mut OptimizationTrace,
                  iter: usize,
                  v: &CostValue,
                  g: &[f64],
                  a: &[f64],
                  phase: usize,
                  step: StepKind| {
        trace.records.push(TraceRecord {
            iter,
            cost: v.total,
            infidelity: v.infidelity_term,
            grad_norm: inf_norm(g),
            alpha1: alpha1(a),
            seconds: start.elapsed().as_secs_f64(),
            phase,
            step,
        });
    };
    record(&mut trace, 0, &val, &grad, &alphas, phase, StepKind::Start);

    let mut mem: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut stop = StopReason::MaxIter;
    let mut iter = 0;
    while iter < cfg.max_iter {
        // advance the phase on schedule, or early when the current one converged
        let converged = inf_norm(&grad) < cfg.grad_tol;
        let due = phases.get(phase + 1).is_some_and(|(s, _)| iter >= *s);
        if due || (converged && phase + 1 < phases.len()) {
            phase += 1;
            alphas = phases[phase].1.clone();
            let (v, g) = eval.evaluate(&theta, &alphas)?;
            evaluations += 1;
            val = v;
            grad = g;
            mem.clear();
            debug!(
                "phase {phase} starts at iteration {iter}, alpha1 = {}",
                alpha1(&alphas)
            );
            record(
                &mut trace,
                iter,
                &val,
                &grad,
                &alphas,
                phase,
                StepKind::PhaseChange,
            );
            continue;
        }
        if converged {
            stop = StopReason::GradTol;
            break;
        }

        let mut kind = StepKind::QuasiNewton;
        let mut dir = lbfgs_direction(&grad, &mem).filter(|d| dot(d, &grad) < 0.0);
        if dir.is_none() {
            kind = if mem.is_empty() {
                StepKind::QuasiNewton
            } else {
                StepKind::GradientFallback
            };
        }
        let mut accepted = None;
        for attempt in 0..2 {
            let d = match (attempt, dir.take()) {
                (0, Some(d)) => d,
                _ => {
                    if attempt == 1 {
                        kind = StepKind::GradientFallback;
                    }
                    let scale = cfg.initial_step / inf_norm(&grad);
                    grad.iter().map(|g| -g * scale).collect()
                }
            };
            let slope = dot(&grad, &d);
            let mut t = 1.0;
            for _ in 0..cfg.max_backtracks {
                let trial: Vec<f64> = theta.iter().zip(&d).map(|(x, di)| x + t * di).collect();
                let v = eval.value(&trial, &alphas)?;
                evaluations += 1;
                if v.total <= val.total + cfg.c1 * t * slope {
                    accepted = Some((trial, v));
                    break;
                }
                t *= 0.5;
            }
            if accepted.is_some() || attempt == 1 {
                break;
            }
        }
        let Some((new_theta, _)) = accepted else {
            info!("line search failed at iteration {iter}");
            stop = StopReason::LineSearchFailed;
            break;
        };
        let (new_val, new_grad) = eval.evaluate(&new_theta, &alphas)?;
        evaluations += 1;
        iter += 1;
        let s: Vec<f64> = new_theta.iter().zip(&theta).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = new_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > (1.0 - cfg.c2) * dot(&grad, &s).abs() && sy > 0.0 {
            if mem.len() == cfg.memory {
                mem.pop_front();
            }
            mem.push_back((s, y, 1.0 / sy));
        }
        let decrease = (val.total - new_val.total) / val.total.abs().max(f64::MIN_POSITIVE);
        theta = new_theta;
        val = new_val;
        grad = new_grad;
        if val.infidelity_term < best.0 {
            best = (val.infidelity_term, theta.clone());
        }
        record(&mut trace, iter, &val, &grad, &alphas, phase, kind);
        debug!(
            "iter {iter}: cost {:.6e}, infidelity {:.6e}, |g| {:.3e}",
            val.total,
            val.infidelity_term,
            inf_norm(&grad)
        );
        if decrease < cfg.cost_tol {
            if phase + 1 < phases.len() {
                // let the next phase start immediately
                phase += 1;
                alphas = phases[phase].1.clone();
                let (v, g) = eval.evaluate(&theta, &alphas)?;
                evaluations += 1;
                val = v;
                grad = g;
                mem.clear();
                record(
                    &mut trace,
                    iter,
                    &val,
                    &grad,
                    &alphas,
                    phase,
                    StepKind::PhaseChange,
                );
            } else {
                stop = StopReason::CostTol;
                break;
            }
        }
    }
    Ok(OptimizationResult {
        theta: best.1,
        best_infidelity: best.0,
        initial_infidelity,
        iterations: iter,
        evaluations,
        stop_reason: stop,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Quadratic {
        diag: Vec<f64>,
        center: Vec<f64>,
    }

    impl Evaluator for Quadratic {
        fn evaluate(&self, theta: &[f64], _alphas: &[f64]) -> Result<(CostValue, Vec<f64>)> {
            let mut f = 0.0;
            let mut g = vec![0.0; theta.len()];
            for i in 0..theta.len() {
                let d = theta[i] - self.center[i];
                f += 0.5 * self.diag[i] * d * d;
                g[i] = self.diag[i] * d;
            }
            Ok((
                CostValue {
                    total: f,
                    infidelity_term: f,
                    flip_terms: vec![],
                },
                g,
            ))
        }
    }

    #[test]
    fn solves_a_convex_quadratic() {
        let q = Quadratic {
            diag: (1..=10).map(|i| i as f64).collect(),
            center: (0..10).map(|i| (i as f64 * 0.37).sin()).collect(),
        };
        let cfg = OptimizerConfig {
            grad_tol: 1e-9,
            ..OptimizerConfig::default()
        };
        let res = minimize(&q, &[0.0; 10], &cfg, &AlphaSchedule::global()).unwrap();
        let (_, g) = q.evaluate(&res.theta, &[]).unwrap();
        assert!(inf_norm(&g) <= 1e-8, "{}", inf_norm(&g));
        assert!(res.trace.is_monotone());
    }

    #[test]
    fn stops_immediately_at_a_minimum() {
        let q = Quadratic {
            diag: vec![1.0; 3],
            center: vec![0.5; 3],
        };
        let res = minimize(
            &q,
            &[0.5; 3],
            &OptimizerConfig::default(),
            &AlphaSchedule::global(),
        )
        .unwrap();
        assert_eq!(res.iterations, 0);
        assert_eq!(res.stop_reason, StopReason::GradTol);
    }

    #[test]
    fn trace_csv_has_the_expected_header() {
        let q = Quadratic {
            diag: vec![2.0],
            center: vec![1.0],
        };
        let res = minimize(
            &q,
            &[0.0],
            &OptimizerConfig::default(),
            &AlphaSchedule::global(),
        )
        .unwrap();
        let mut buf = Vec::new();
        res.trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("iter,cost,infidelity,grad_norm,alpha1,seconds\n"));
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = OptimizerConfig {
            max_iter: 0,
            ..OptimizerConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}

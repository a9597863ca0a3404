//! End-to-end compilation runs and the fidelity-versus-time experiments.
//!
//! A run evolves the initial product state with fine-step TEBD to obtain the
//! target, fits the Trotter-initialized ansatz to it, optionally appends
//! further Trotter steps, and compares every circuit against a finer,
//! higher-bond-dimension reference.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::{apply_ansatz, build_ansatz, trotter_initialize, Ansatz};
use crate::circuit::{self, GateList};
use crate::cost::{
    cost_local_truncated, gradient, gradient_adjoint, AlphaSchedule, CostConfig, CostValue,
};
use crate::error::{Error, Result};
use crate::hamiltonian::{Preset, XyzHamiltonian};
use crate::mps::{Mps, TruncationPolicy};
use crate::optimizer::{
    minimize, Evaluator, OptimizationResult, OptimizerConfig, StopReason, TraceRecord,
};
use crate::trotter::{build_trotter_schedule, tebd_evolve};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Which Hamiltonian to use: a named preset or explicit couplings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HamiltonianSpec {
    pub preset: Option<Preset>,
    /// Seed of the random-coupling preset.
    pub seed: u64,
    pub alpha: Option<Vec<f64>>,
    pub beta: Option<Vec<f64>>,
    pub delta: Option<Vec<f64>>,
    /// Longitudinal fields; zero when absent.
    pub h: Option<Vec<f64>>,
}

impl Default for HamiltonianSpec {
    fn default() -> Self {
        HamiltonianSpec {
            preset: Some(Preset::Xxx),
            seed: 0,
            alpha: None,
            beta: None,
            delta: None,
            h: None,
        }
    }
}

impl HamiltonianSpec {
    pub fn build(&self, n: usize) -> Result<XyzHamiltonian> {
        let explicit = [&self.alpha, &self.beta, &self.delta];
        let ham = match (self.preset, explicit.iter().any(|x| x.is_some())) {
            (Some(_), true) => {
                return Err(Error::Config(
                    "give either a preset or explicit couplings, not both".into(),
                ))
            }
            (Some(p), false) => XyzHamiltonian::preset(p, n, self.seed)?,
            (None, _) => {
                let get = |v: &Option<Vec<f64>>, name: &str| {
                    v.clone()
                        .ok_or_else(|| Error::Config(format!("explicit Hamiltonian lacks {name}")))
                };
                XyzHamiltonian::new(
                    get(&self.alpha, "alpha")?,
                    get(&self.beta, "beta")?,
                    get(&self.delta, "delta")?,
                    vec![0.0; n],
                )
                .map_err(|e| Error::Config(e.to_string()))?
            }
        };
        let ham = match &self.h {
            Some(h) => ham.with_fields(h.clone()),
            None => Ok(ham),
        }
        .map_err(|e| Error::Config(e.to_string()))?;
        if ham.n != n {
            return Err(Error::Config(format!(
                "Hamiltonian has {} sites but n = {n}",
                ham.n
            )));
        }
        Ok(ham)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicySpec {
    pub chi_max: Option<usize>,
    pub cutoff: f64,
}

impl Default for PolicySpec {
    fn default() -> Self {
        PolicySpec {
            chi_max: Some(64),
            cutoff: 1e-12,
        }
    }
}

impl PolicySpec {
    pub fn policy(&self) -> Result<TruncationPolicy> {
        TruncationPolicy::new(self.chi_max, self.cutoff, true)
            .map_err(|e| Error::Config(e.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientMethod {
    /// Backward/forward sweep, about three circuit applications per gradient.
    Adjoint,
    /// Two cost evaluations per parameter.
    ParameterShift,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub times: Vec<f64>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            times: vec![0.4, 0.8, 1.2, 1.6, 2.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub n: usize,
    pub hamiltonian: HamiltonianSpec,
    /// Basis string of the initial product state; alternating `1010…` when absent.
    pub initial_state: Option<String>,
    /// Total evolution time compiled into the circuit.
    pub time: f64,
    /// Ansatz layers, also the number of Trotter steps it replaces (`dt = time / layers`).
    pub layers: usize,
    /// Trotter steps appended after the optimized circuit.
    pub append_steps: usize,
    /// Time step of the appended steps; the compile `dt` when absent.
    pub append_dt: Option<f64>,
    /// TEBD substeps per `dt` when generating the target.
    pub target_substeps: usize,
    /// TEBD substeps per `dt` for the reference state.
    pub reference_substeps: usize,
    pub evolution: PolicySpec,
    /// Truncation inside cost evaluation; the evolution policy when absent.
    pub cost_truncation: Option<PolicySpec>,
    /// Reference truncation; four times the evolution bond cap when absent.
    pub reference_truncation: Option<PolicySpec>,
    /// Appended-step fidelities are marked unverified above this reference discarded weight.
    pub reference_discard_budget: f64,
    /// `two-phase`, `global`, or explicit phases (see [`AlphaSchedule::parse`]).
    pub alpha_schedule: String,
    pub gradient: GradientMethod,
    pub trainable_fields: bool,
    pub optimizer: OptimizerConfig,
    pub sweep: SweepSpec,
    pub out_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n: 8,
            hamiltonian: HamiltonianSpec::default(),
            initial_state: None,
            time: 2.0,
            layers: 4,
            append_steps: 0,
            append_dt: None,
            target_substeps: 10,
            reference_substeps: 10,
            evolution: PolicySpec::default(),
            cost_truncation: None,
            reference_truncation: None,
            reference_discard_budget: 1e-6,
            alpha_schedule: "two-phase".into(),
            gradient: GradientMethod::Adjoint,
            trainable_fields: false,
            optimizer: OptimizerConfig::default(),
            sweep: SweepSpec::default(),
            out_dir: None,
        }
    }
}

pub fn neel_string(n: usize) -> String {
    (0..n).map(|i| if i % 2 == 0 { '1' } else { '0' }).collect()
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn dt(&self) -> f64 {
        self.time / self.layers as f64
    }

    pub fn initial_bits(&self) -> String {
        self.initial_state
            .clone()
            .unwrap_or_else(|| neel_string(self.n))
    }

    pub fn append_dt(&self) -> f64 {
        self.append_dt.unwrap_or_else(|| self.dt())
    }

    pub fn evolution_policy(&self) -> Result<TruncationPolicy> {
        self.evolution.policy()
    }

    pub fn cost_policy(&self) -> Result<TruncationPolicy> {
        self.cost_truncation.unwrap_or(self.evolution).policy()
    }

    pub fn reference_policy(&self) -> Result<TruncationPolicy> {
        match self.reference_truncation {
            Some(p) => p.policy(),
            None => PolicySpec {
                chi_max: self.evolution.chi_max.map(|c| 4 * c),
                cutoff: self.evolution.cutoff,
            }
            .policy(),
        }
    }

    pub fn schedule(&self) -> Result<AlphaSchedule> {
        AlphaSchedule::parse(&self.alpha_schedule, self.n)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.n < 2 {
            return bad("n must be at least 2");
        }
        if !(self.time > 0.0 && self.time.is_finite()) {
            return bad("time must be positive");
        }
        if self.layers < 1 {
            return bad("layers must be at least 1");
        }
        if self.target_substeps < 1 || self.reference_substeps < 1 {
            return bad("substep counts must be at least 1");
        }
        if let Some(d) = self.append_dt {
            if !(d > 0.0 && d.is_finite()) {
                return bad("append_dt must be positive");
            }
        }
        if self.reference_discard_budget.is_nan() || self.reference_discard_budget < 0.0 {
            return bad("reference_discard_budget must be non-negative");
        }
        let bits = self.initial_bits();
        if bits.len() != self.n || bits.chars().any(|c| c != '0' && c != '1') {
            return bad("initial_state must be a 0/1 string of length n");
        }
        if self
            .sweep
            .times
            .iter()
            .any(|t| !(*t > 0.0 && t.is_finite()))
        {
            return bad("sweep times must be positive");
        }
        self.evolution_policy()?;
        self.cost_policy()?;
        self.reference_policy()?;
        self.schedule()?;
        self.optimizer.validate()?;
        self.hamiltonian.build(self.n)?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AppendedFidelities {
    pub steps: usize,
    pub dt: f64,
    pub total_time: f64,
    /// Optimized circuit plus appended steps against the extended reference.
    pub final_gt: f64,
    /// The same number of plain Trotter steps (`layers + steps`).
    pub trotter_gt: f64,
    /// False when the reference exceeded its discarded-weight budget.
    pub verified: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Fidelities {
    pub a1_gt: Option<f64>,
    pub t1_gt: Option<f64>,
    pub t1double_gt: Option<f64>,
    pub a1_target: Option<f64>,
    pub t1_target: Option<f64>,
    pub appended: Option<AppendedFidelities>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Depths {
    pub ansatz: usize,
    pub trotter: usize,
    pub trotter_double: usize,
    pub appended_circuit: Option<usize>,
    pub appended_trotter: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OptimizationSummary {
    pub iterations: usize,
    pub evaluations: usize,
    pub stop_reason: Option<StopReason>,
    pub initial_infidelity: f64,
    pub best_infidelity: f64,
    pub trace: Vec<TraceRecord>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Ok,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub status: RunStatus,
    pub failed_stage: Option<String>,
    pub error: Option<String>,
    pub config: RunConfig,
    pub hamiltonian: Option<XyzHamiltonian>,
    pub initial_state: String,
    /// How the initial state enters the circuit.
    pub state_preparation: String,
    pub dt: f64,
    pub fidelities: Fidelities,
    pub depths: Depths,
    pub max_bond: BTreeMap<String, usize>,
    pub discarded_weight: BTreeMap<String, f64>,
    pub optimization: Option<OptimizationSummary>,
    pub n_params: usize,
    pub theta: Vec<f64>,
    pub timings: BTreeMap<String, f64>,
    pub seeds: BTreeMap<String, u64>,
}

impl RunReport {
    fn new(cfg: &RunConfig) -> Self {
        let mut seeds = BTreeMap::new();
        if cfg.hamiltonian.preset == Some(Preset::RandomXyz) {
            seeds.insert("hamiltonian".into(), cfg.hamiltonian.seed);
        }
        RunReport {
            schema_version: REPORT_SCHEMA_VERSION,
            status: RunStatus::Ok,
            failed_stage: None,
            error: None,
            config: cfg.clone(),
            hamiltonian: None,
            initial_state: cfg.initial_bits(),
            state_preparation:
                "initial Rz.Ry.Rz rotations acting on |0...0>, Ry(pi) on every 1 bit".into(),
            dt: cfg.dt(),
            fidelities: Fidelities::default(),
            depths: Depths::default(),
            max_bond: BTreeMap::new(),
            discarded_weight: BTreeMap::new(),
            optimization: None,
            n_params: 0,
            theta: Vec::new(),
            timings: BTreeMap::new(),
            seeds,
        }
    }

    /// Structural checks on a finished report.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != REPORT_SCHEMA_VERSION {
            return Err(Error::Serde("unknown report schema version".into()));
        }
        let f = &self.fidelities;
        let mut all = vec![f.a1_gt, f.t1_gt, f.t1double_gt, f.a1_target, f.t1_target];
        if let Some(a) = &f.appended {
            all.push(Some(a.final_gt));
            all.push(Some(a.trotter_gt));
        }
        for v in all.into_iter().flatten() {
            if !(0.0..=1.0 + 1e-9).contains(&v) {
                return Err(Error::Serde(format!("fidelity {v} outside [0, 1]")));
            }
        }
        if self.status == RunStatus::Ok {
            if self.theta.len() != self.n_params || self.hamiltonian.is_none() {
                return Err(Error::Serde("completed report lacks parameters".into()));
            }
        } else if self.failed_stage.is_none() {
            return Err(Error::Serde("failed report lacks a stage marker".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Rebuild the ansatz this report was produced with.
    pub fn ansatz(&self) -> Result<Ansatz> {
        let h = self
            .hamiltonian
            .as_ref()
            .ok_or_else(|| Error::invalid("report has no Hamiltonian"))?;
        let cfg = &self.config;
        build_ansatz(cfg.n, cfg.layers, 3, h, cfg.dt(), cfg.trainable_fields)
    }

    /// Gate list of the final circuit: the optimized ansatz followed by any
    /// appended Trotter steps.
    pub fn circuit(&self) -> Result<GateList> {
        let a = self.ansatz()?;
        let mut list = a.to_gate_list(&self.theta)?;
        if self.config.append_steps > 0 {
            let h = self.hamiltonian.as_ref().expect("checked by ansatz()");
            let sched =
                build_trotter_schedule(h, self.config.append_dt(), self.config.append_steps)?;
            list.gates.extend(sched.to_gate_list().gates);
        }
        Ok(list)
    }
}

/// Cost and gradient of the ansatz against a fixed target.
pub struct AnsatzEvaluator<'a> {
    pub ansatz: &'a Ansatz,
    pub target: &'a Mps,
    pub cost: CostConfig,
    pub method: GradientMethod,
}

impl Evaluator for AnsatzEvaluator<'_> {
    fn evaluate(&self, theta: &[f64], alphas: &[f64]) -> Result<(CostValue, Vec<f64>)> {
        let cfg = self.cost.with_alphas(alphas.to_vec());
        match self.method {
            GradientMethod::Adjoint => gradient_adjoint(self.ansatz, theta, self.target, &cfg),
            GradientMethod::ParameterShift => Ok((
                cost_local_truncated(self.ansatz, theta, self.target, &cfg)?,
                gradient(self.ansatz, theta, self.target, &cfg)?,
            )),
        }
    }

    fn value(&self, theta: &[f64], alphas: &[f64]) -> Result<CostValue> {
        let cfg = self.cost.with_alphas(alphas.to_vec());
        cost_local_truncated(self.ansatz, theta, self.target, &cfg)
    }
}

/// Reference state: TEBD with `substeps` times as many steps as the compiled circuit.
pub fn ground_truth(
    h: &XyzHamiltonian,
    psi0: &Mps,
    t: f64,
    layers: usize,
    substeps: usize,
    policy: &TruncationPolicy,
) -> Result<Mps> {
    let steps = layers * substeps;
    tebd_evolve(psi0, h, t / steps as f64, steps, policy)
}

/// Result of the compile stage.
pub struct Compiled {
    pub hamiltonian: XyzHamiltonian,
    pub psi0: Mps,
    pub target: Mps,
    pub ansatz: Ansatz,
    pub theta0: Vec<f64>,
    pub result: OptimizationResult,
}

struct Stages<'a> {
    report: &'a mut RunReport,
    stage: &'static str,
    clock: Instant,
}

impl<'a> Stages<'a> {
    fn begin(&mut self, stage: &'static str) {
        self.stage = stage;
        self.clock = Instant::now();
        info!("stage {stage}");
    }

    fn end(&mut self) {
        let secs = self.clock.elapsed().as_secs_f64();
        info!("stage {} done in {secs:.2} s", self.stage);
        self.report.timings.insert(self.stage.to_string(), secs);
    }
}

fn compile_into(cfg: &RunConfig, st: &mut Stages<'_>) -> Result<Compiled> {
    let h = cfg.hamiltonian.build(cfg.n)?;
    st.report.hamiltonian = Some(h.clone());
    let psi0 = Mps::from_product_state(&cfg.initial_bits())?;
    let dt = cfg.dt();
    let evo = cfg.evolution_policy()?;

    st.begin("target");
    let sub = cfg.target_substeps;
    let target = tebd_evolve(&psi0, &h, dt / sub as f64, cfg.layers * sub, &evo)?;
    st.report
        .max_bond
        .insert("target".into(), target.max_bond());
    st.report
        .discarded_weight
        .insert("target".into(), target.discarded_weight());
    st.end();

    st.begin("optimize");
    let ansatz = build_ansatz(cfg.n, cfg.layers, 3, &h, dt, cfg.trainable_fields)?;
    let theta0 = trotter_initialize(&ansatz, &h, dt, &cfg.initial_bits())?;
    st.report.n_params = ansatz.n_params();
    let eval = AnsatzEvaluator {
        ansatz: &ansatz,
        target: &target,
        cost: CostConfig {
            alphas: Vec::new(),
            schedule: cfg.schedule()?,
            policy: cfg.cost_policy()?,
        },
        method: cfg.gradient,
    };
    let result = minimize(&eval, &theta0, &cfg.optimizer, &eval.cost.schedule)?;
    st.report.theta = result.theta.clone();
    st.report.optimization = Some(OptimizationSummary {
        iterations: result.iterations,
        evaluations: result.evaluations,
        stop_reason: Some(result.stop_reason),
        initial_infidelity: result.initial_infidelity,
        best_infidelity: result.best_infidelity,
        trace: result.trace.records.clone(),
    });
    info!(
        "infidelity {:.4e} -> {:.4e} in {} iterations",
        result.initial_infidelity, result.best_infidelity, result.iterations
    );
    st.end();
    Ok(Compiled {
        hamiltonian: h,
        psi0,
        target,
        ansatz,
        theta0,
        result,
    })
}

fn compare_into(cfg: &RunConfig, c: &Compiled, st: &mut Stages<'_>) -> Result<()> {
    let h = &c.hamiltonian;
    let dt = cfg.dt();
    let evo = cfg.evolution_policy()?;
    let zeros = Mps::zeros(cfg.n)?;

    st.begin("circuits");
    let a1 = apply_ansatz(&c.ansatz, &c.result.theta, &zeros, &cfg.cost_policy()?)?;
    let t1 = tebd_evolve(&c.psi0, h, dt, cfg.layers, &evo)?;
    let t1d = tebd_evolve(&c.psi0, h, dt / 2.0, 2 * cfg.layers, &evo)?;
    let f = &mut st.report.fidelities;
    f.a1_target = Some(a1.fidelity(&c.target)?);
    f.t1_target = Some(t1.fidelity(&c.target)?);
    let d = &mut st.report.depths;
    let trotter = build_trotter_schedule(h, dt, cfg.layers)?;
    d.ansatz = c.ansatz.cnot_depth();
    d.trotter = trotter.cnot_depth();
    d.trotter_double = build_trotter_schedule(h, dt / 2.0, 2 * cfg.layers)?.cnot_depth();
    for (k, psi) in [("a1", &a1), ("t1", &t1), ("t1double", &t1d)] {
        st.report.max_bond.insert(k.into(), psi.max_bond());
    }
    st.end();

    st.begin("reference");
    let gt_policy = cfg.reference_policy()?;
    let gt = ground_truth(
        h,
        &c.psi0,
        cfg.time,
        cfg.layers,
        cfg.reference_substeps,
        &gt_policy,
    )?;
    let f = &mut st.report.fidelities;
    f.a1_gt = Some(a1.fidelity(&gt)?);
    f.t1_gt = Some(t1.fidelity(&gt)?);
    f.t1double_gt = Some(t1d.fidelity(&gt)?);
    st.report.max_bond.insert("reference".into(), gt.max_bond());
    st.report
        .discarded_weight
        .insert("reference".into(), gt.discarded_weight());
    st.end();

    if cfg.append_steps > 0 {
        st.begin("append");
        let k = cfg.append_steps;
        let dta = cfg.append_dt();
        let appended = build_trotter_schedule(h, dta, k)?;
        let mut a_final = a1.clone();
        appended.apply(&mut a_final, &evo)?;
        a_final.normalize();
        let mut t_final = t1.clone();
        appended.apply(&mut t_final, &evo)?;
        t_final.normalize();
        let sub = cfg.reference_substeps;
        let gt_ext = tebd_evolve(&gt, h, dta / sub as f64, k * sub, &gt_policy)?;
        let verified = gt_ext.discarded_weight() <= cfg.reference_discard_budget;
        st.report.fidelities.appended = Some(AppendedFidelities {
            steps: k,
            dt: dta,
            total_time: cfg.time + k as f64 * dta,
            final_gt: a_final.fidelity(&gt_ext)?,
            trotter_gt: t_final.fidelity(&gt_ext)?,
            verified,
        });
        let depth = |first: Vec<(usize, usize, usize)>| {
            circuit::cnot_depth(cfg.n, first.into_iter().chain(appended.cnot_ops()))
        };
        st.report.depths.appended_circuit = Some(depth(c.ansatz.cnot_ops()));
        st.report.depths.appended_trotter = Some(depth(trotter.cnot_ops()));
        st.report
            .discarded_weight
            .insert("reference_extended".into(), gt_ext.discarded_weight());
        st.end();
    }
    Ok(())
}

fn finish<T>(report: &mut RunReport, stage: &str, r: Result<T>) -> Option<T> {
    match r {
        Ok(v) => Some(v),
        Err(e) => {
            report.status = RunStatus::Failed;
            report.failed_stage = Some(stage.to_string());
            report.error = Some(format!("{}: {e}", e.category()));
            None
        }
    }
}

/// Target generation and optimization only.
pub fn compile(cfg: &RunConfig) -> Result<(RunReport, Option<Compiled>)> {
    cfg.validate()?;
    let mut report = RunReport::new(cfg);
    let mut st = Stages {
        report: &mut report,
        stage: "setup",
        clock: Instant::now(),
    };
    let r = compile_into(cfg, &mut st);
    let stage = st.stage;
    let compiled = finish(&mut report, stage, r);
    Ok((report, compiled))
}

/// The full run: compile, then compare against the reference and append
/// Trotter steps. Configuration errors are returned as `Err`; failures in
/// later stages produce a report with `status = failed` and the stage name.
pub fn run_aqctensor(cfg: &RunConfig) -> Result<RunReport> {
    let (mut report, compiled) = compile(cfg)?;
    if let Some(c) = compiled {
        let mut st = Stages {
            report: &mut report,
            stage: "circuits",
            clock: Instant::now(),
        };
        let r = compare_into(cfg, &c, &mut st);
        let stage = st.stage;
        finish(&mut report, stage, r);
    }
    Ok(report)
}

/// Write `report.json`, `trace.csv`, `circuit.txt` and `manifest.json` into `dir`.
pub fn write_run_outputs(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let path = dir.join("report.json");
    fs::write(&path, report.to_json()?)?;
    written.push(path);
    if let Some(opt) = &report.optimization {
        let path = dir.join("trace.csv");
        let trace = crate::optimizer::OptimizationTrace {
            records: opt.trace.clone(),
        };
        trace.write_csv(fs::File::create(&path)?)?;
        written.push(path);
    }
    if report.status == RunStatus::Ok {
        let path = dir.join("circuit.txt");
        fs::write(&path, report.circuit()?.to_text())?;
        written.push(path);
    }
    written.push(write_manifest(dir, &written)?);
    Ok(written)
}

/// `manifest.json` listing the given artifacts by file name.
pub fn write_manifest(dir: &Path, artifacts: &[PathBuf]) -> Result<PathBuf> {
    let names: Vec<String> = artifacts
        .iter()
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect();
    let path = dir.join("manifest.json");
    fs::write(
        &path,
        serde_json::to_string_pretty(&serde_json::json!({ "artifacts": names }))?,
    )?;
    Ok(path)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub t: f64,
    pub depth_ansatz: usize,
    pub depth_trotter: usize,
    pub f_a1_gt: f64,
    pub f_t1_gt: f64,
    pub f_t1double_gt: f64,
    pub max_chi: usize,
    pub iters: usize,
    pub seconds: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Comparison {
    /// `l`-layer ansatz against the `l`-step Trotter circuit.
    EqualDepth,
    /// `l`-layer ansatz against the `2l`-step Trotter circuit.
    HalfDepth,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub comparison: Comparison,
    pub rows: Vec<SweepRow>,
    pub runs: Vec<RunReport>,
}

impl SweepReport {
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.rows {
            out.serialize(r)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn sweep(cfg: &RunConfig, comparison: Comparison) -> Result<SweepReport> {
    cfg.validate()?;
    let runs: Vec<(RunReport, f64)> = cfg
        .sweep
        .times
        .par_iter()
        .map(|&t| {
            let c = RunConfig {
                time: t,
                append_steps: 0,
                ..cfg.clone()
            };
            let clock = Instant::now();
            let r = run_aqctensor(&c)?;
            Ok((r, clock.elapsed().as_secs_f64()))
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (r, secs) in &runs {
        if r.status != RunStatus::Ok {
            return Err(Error::Numerical(format!(
                "sweep run at t = {} failed in stage {}: {}",
                r.config.time,
                r.failed_stage.as_deref().unwrap_or("?"),
                r.error.as_deref().unwrap_or("")
            )));
        }
        let f = &r.fidelities;
        rows.push(SweepRow {
            t: r.config.time,
            depth_ansatz: r.depths.ansatz,
            depth_trotter: match comparison {
                Comparison::EqualDepth => r.depths.trotter,
                Comparison::HalfDepth => r.depths.trotter_double,
            },
            f_a1_gt: f.a1_gt.unwrap_or(f64::NAN),
            f_t1_gt: f.t1_gt.unwrap_or(f64::NAN),
            f_t1double_gt: f.t1double_gt.unwrap_or(f64::NAN),
            max_chi: r.max_bond.values().copied().max().unwrap_or(0),
            iters: r.optimization.as_ref().map_or(0, |o| o.iterations),
            seconds: *secs,
        });
    }
    if comparison == Comparison::EqualDepth {
        if let Some(r) = rows.iter().find(|r| r.depth_ansatz != r.depth_trotter) {
            return Err(Error::Numerical(format!(
                "depth mismatch at t = {}: {} vs {}",
                r.t, r.depth_ansatz, r.depth_trotter
            )));
        }
    }
    Ok(SweepReport {
        comparison,
        rows,
        runs: runs.into_iter().map(|(r, _)| r).collect(),
    })
}

pub fn experiment_equal_depth(cfg: &RunConfig) -> Result<SweepReport> {
    sweep(cfg, Comparison::EqualDepth)
}

pub fn experiment_half_depth(cfg: &RunConfig) -> Result<SweepReport> {
    sweep(cfg, Comparison::HalfDepth)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips_through_toml() {
        let cfg = RunConfig::default();
        let text = cfg.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
        cfg.validate().unwrap();
    }

    #[test]
    fn preset_configs_are_one_liners() {
        let cfg = RunConfig::from_toml("[hamiltonian]\npreset = \"xxz\"\n").unwrap();
        let h = cfg.hamiltonian.build(cfg.n).unwrap();
        assert_eq!(h.delta[0], 1.5);
        assert_eq!(h.alpha[0], 0.75);
        assert!(RunConfig::from_toml("bogus = 1\n").is_err());
    }

    #[test]
    fn explicit_and_preset_conflict() {
        let spec = HamiltonianSpec {
            alpha: Some(vec![1.0]),
            ..HamiltonianSpec::default()
        };
        assert!(spec.build(2).is_err());
        let spec = HamiltonianSpec {
            preset: None,
            alpha: Some(vec![1.0]),
            beta: Some(vec![0.5]),
            delta: Some(vec![0.2]),
            ..HamiltonianSpec::default()
        };
        assert_eq!(spec.build(2).unwrap().beta, vec![0.5]);
        assert!(spec.build(3).is_err());
    }

    #[test]
    fn reference_policy_defaults_to_four_times_chi() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.reference_policy().unwrap().chi_max, Some(256));
    }

    #[test]
    fn trivial_hamiltonian_prepares_the_initial_state() {
        let cfg = RunConfig {
            n: 4,
            layers: 1,
            time: 0.5,
            hamiltonian: HamiltonianSpec {
                preset: None,
                alpha: Some(vec![0.0; 3]),
                beta: Some(vec![0.0; 3]),
                delta: Some(vec![0.0; 3]),
                ..HamiltonianSpec::default()
            },
            ..RunConfig::default()
        };
        let report = run_aqctensor(&cfg).unwrap();
        report.validate().unwrap();
        assert!((report.fidelities.a1_gt.unwrap() - 1.0).abs() < 1e-10);
    }
}

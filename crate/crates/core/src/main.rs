use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mpsaqc::ansatz::{apply_ansatz, build_brickwork_ansatz, sv_apply_ansatz, trotter_initialize};
use mpsaqc::circuit::GateList;
use mpsaqc::cost::{cost_global, gradient, gradient_fd, CostConfig};
use mpsaqc::hamiltonian::{total_sz, Preset, XyzHamiltonian};
use mpsaqc::pipeline::{
    compile, experiment_equal_depth, experiment_half_depth, run_aqctensor, write_manifest,
    write_run_outputs, RunConfig, RunReport, RunStatus,
};
use mpsaqc::statevector::DenseState;
use mpsaqc::trotter::tebd_evolve;
use mpsaqc::{Error, Mps, TruncationPolicy};

/// Exit code for bad flags or configuration files.
const EXIT_USAGE: u8 = 2;
/// Exit code for failures while running.
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(
    name = "mpsaqc",
    version,
    about = "Compile spin-chain time evolution into short parametric circuits"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve the initial product state with TEBD and save the MPS.
    Evolve(Common),
    /// Generate the target and optimize the circuit, without the reference comparison.
    Compile(Common),
    /// Full run: compile, compare against the reference, append Trotter steps.
    Run(Common),
    /// Fidelity-versus-time sweep over the configured time grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Comparison::Both)]
        comparison: Comparison,
    },
    /// Quick self-check of the simulators and gradients.
    Verify(Common),
    /// Write the circuit of a finished run as a gate list.
    ExportCircuit {
        #[command(flatten)]
        common: Common,
        /// Report to read; defaults to `<out>/report.json`.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Export the equal-depth Trotter circuit instead of the optimized one.
        #[arg(long)]
        trotter: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Comparison {
    EqualDepth,
    HalfDepth,
    Both,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed of the random-coupling Hamiltonian.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    time: Option<f64>,
    /// Bond dimension cap of the evolution (0 for unbounded).
    #[arg(long)]
    chi_max: Option<usize>,
    #[arg(long)]
    cutoff: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// `two-phase`, `global`, or phases like `0.5:0.875,0.5:`.
    #[arg(long)]
    alpha_schedule: Option<String>,
    #[arg(long, value_parser = parse_preset)]
    preset: Option<Preset>,
    #[arg(long)]
    append_steps: Option<usize>,
}

fn parse_preset(s: &str) -> Result<Preset, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

struct Failure {
    code: u8,
    category: String,
    message: String,
}

impl Failure {
    fn usage(e: Error) -> Self {
        Failure {
            code: EXIT_USAGE,
            category: format!("usage/{}", e.category()),
            message: e.to_string(),
        }
    }

    fn runtime(stage: &str, e: Error) -> Self {
        Failure {
            code: EXIT_RUNTIME,
            category: format!("runtime/{stage}/{}", e.category()),
            message: e.to_string(),
        }
    }
}

type CliResult<T> = Result<T, Failure>;

impl Common {
    fn load(&self) -> CliResult<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p).map_err(Failure::usage)?,
            None => RunConfig::default(),
        };
        if let Some(n) = self.n {
            cfg.n = n;
        }
        if let Some(s) = self.seed {
            cfg.hamiltonian.seed = s;
        }
        if let Some(p) = self.preset {
            cfg.hamiltonian.preset = Some(p);
            cfg.hamiltonian.alpha = None;
            cfg.hamiltonian.beta = None;
            cfg.hamiltonian.delta = None;
        }
        if let Some(l) = self.layers {
            cfg.layers = l;
        }
        if let Some(t) = self.time {
            cfg.time = t;
        }
        if let Some(c) = self.chi_max {
            cfg.evolution.chi_max = (c > 0).then_some(c);
        }
        if let Some(c) = self.cutoff {
            cfg.evolution.cutoff = c;
        }
        if let Some(m) = self.max_iter {
            cfg.optimizer.max_iter = m;
        }
        if let Some(a) = &self.alpha_schedule {
            cfg.alpha_schedule = a.clone();
        }
        if let Some(k) = self.append_steps {
            cfg.append_steps = k;
        }
        if let Some(o) = &self.out {
            cfg.out_dir = Some(o.clone());
        }
        cfg.validate().map_err(Failure::usage)?;
        Ok(cfg)
    }
}

fn out_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn io_fail(stage: &'static str) -> impl Fn(std::io::Error) -> Failure {
    move |e| Failure::runtime(stage, Error::Io(e))
}

/// Write the effective configuration next to the other outputs.
fn echo_config(cfg: &RunConfig, dir: &Path) -> CliResult<PathBuf> {
    fs::create_dir_all(dir).map_err(io_fail("output"))?;
    let path = dir.join("config.toml");
    let text = cfg.to_toml().map_err(|e| Failure::runtime("output", e))?;
    fs::write(&path, text).map_err(io_fail("output"))?;
    Ok(path)
}

fn finish_report(report: &RunReport, cfg: &RunConfig) -> CliResult<()> {
    let dir = out_dir(cfg);
    let cfg_path = echo_config(cfg, &dir)?;
    let mut written = write_run_outputs(report, &dir).map_err(|e| Failure::runtime("output", e))?;
    written.pop();
    written.push(cfg_path);
    write_manifest(&dir, &written).map_err(|e| Failure::runtime("output", e))?;
    report
        .validate()
        .map_err(|e| Failure::runtime("report", e))?;
    if report.status == RunStatus::Failed {
        return Err(Failure {
            code: EXIT_RUNTIME,
            category: format!(
                "runtime/{}",
                report.failed_stage.as_deref().unwrap_or("unknown")
            ),
            message: report.error.clone().unwrap_or_default(),
        });
    }
    Ok(())
}

fn cmd_evolve(c: &Common) -> CliResult<()> {
    let cfg = c.load()?;
    let h = cfg.hamiltonian.build(cfg.n).map_err(Failure::usage)?;
    let psi0 = Mps::from_product_state(&cfg.initial_bits()).map_err(Failure::usage)?;
    let steps = cfg.layers * cfg.target_substeps;
    let policy = cfg.evolution_policy().map_err(Failure::usage)?;
    let psi = tebd_evolve(&psi0, &h, cfg.time / steps as f64, steps, &policy)
        .map_err(|e| Failure::runtime("evolve", e))?;
    let summary = serde_json::json!({
        "n": cfg.n,
        "time": cfg.time,
        "steps": steps,
        "energy_initial": h.energy(&psi0).map_err(|e| Failure::runtime("evolve", e))?,
        "energy_final": h.energy(&psi).map_err(|e| Failure::runtime("evolve", e))?,
        "total_sz": total_sz(&psi).map_err(|e| Failure::runtime("evolve", e))?,
        "max_bond": psi.max_bond(),
        "discarded_weight": psi.discarded_weight(),
        "hamiltonian": h,
    });
    let dir = out_dir(&cfg);
    let cfg_path = echo_config(&cfg, &dir)?;
    let state_path = dir.join("state.json");
    let summary_path = dir.join("evolve.json");
    let dump = |p: &Path, v: String| fs::write(p, v).map_err(io_fail("output"));
    dump(
        &state_path,
        serde_json::to_string(&psi.to_data()).expect("plain data"),
    )?;
    dump(
        &summary_path,
        serde_json::to_string_pretty(&summary).expect("plain data"),
    )?;
    write_manifest(&dir, &[state_path, summary_path, cfg_path])
        .map_err(|e| Failure::runtime("output", e))?;
    info!(
        "max bond {}, discarded {:.3e}",
        psi.max_bond(),
        psi.discarded_weight()
    );
    Ok(())
}

fn cmd_compile(c: &Common) -> CliResult<()> {
    let cfg = c.load()?;
    let (report, _) = compile(&cfg).map_err(Failure::usage)?;
    finish_report(&report, &cfg)
}

fn cmd_run(c: &Common) -> CliResult<()> {
    let cfg = c.load()?;
    let report = run_aqctensor(&cfg).map_err(Failure::usage)?;
    if let (Some(a), Some(t)) = (report.fidelities.a1_gt, report.fidelities.t1_gt) {
        info!("fidelity to reference: optimized {a:.6}, trotter {t:.6}");
    }
    finish_report(&report, &cfg)
}

fn cmd_sweep(c: &Common, which: Comparison) -> CliResult<()> {
    let cfg = c.load()?;
    let dir = out_dir(&cfg);
    let mut written = vec![echo_config(&cfg, &dir)?];
    let mut kinds = Vec::new();
    if matches!(which, Comparison::EqualDepth | Comparison::Both) {
        kinds.push(("equal_depth", experiment_equal_depth as fn(&RunConfig) -> _));
    }
    if matches!(which, Comparison::HalfDepth | Comparison::Both) {
        kinds.push(("half_depth", experiment_half_depth));
    }
    for (name, f) in kinds {
        let sweep = f(&cfg).map_err(|e| Failure::runtime("sweep", e))?;
        let csv_path = dir.join(format!("sweep_{name}.csv"));
        let file = fs::File::create(&csv_path).map_err(io_fail("output"))?;
        sweep
            .write_csv(file)
            .map_err(|e| Failure::runtime("output", e))?;
        let json_path = dir.join(format!("sweep_{name}.json"));
        fs::write(
            &json_path,
            serde_json::to_string_pretty(&sweep).expect("plain data"),
        )
        .map_err(io_fail("output"))?;
        written.push(csv_path);
        written.push(json_path);
    }
    write_manifest(&dir, &written).map_err(|e| Failure::runtime("output", e))?;
    Ok(())
}

/// Small versions of the oracle and gradient checks, one line per check.
fn cmd_verify(c: &Common) -> CliResult<()> {
    let cfg = c.load()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.hamiltonian.seed);
    let mut lines = Vec::new();
    let mut ok_all = true;
    let fail = |e: Error| Failure::runtime("verify", e);

    // MPS against the dense simulator on random ansatz circuits
    let mut worst: f64 = 0.0;
    for trial in 0..5 {
        let n = 4 + trial % 3;
        let h = XyzHamiltonian::xxx(n).map_err(fail)?;
        let a = build_brickwork_ansatz(n, 2, &h, 0.3).map_err(fail)?;
        let theta: Vec<f64> = (0..a.n_params())
            .map(|_| rng.gen_range(-3.0..3.0))
            .collect();
        let psi = apply_ansatz(
            &a,
            &theta,
            &Mps::zeros(n).map_err(fail)?,
            &TruncationPolicy::unbounded(),
        )
        .map_err(fail)?
        .to_dense()
        .map_err(fail)?;
        let dense =
            sv_apply_ansatz(&a, &theta, &DenseState::zeros(n).map_err(fail)?).map_err(fail)?;
        for (x, y) in psi.iter().zip(dense.amplitudes()) {
            worst = worst.max((x - y).norm());
        }
    }
    let ok = worst < 1e-10;
    ok_all &= ok;
    lines.push(format!(
        "oracle-equivalence {} max_amp_err={worst:.2e}",
        pass(ok)
    ));

    // parameter shift against finite differences
    let n = 5;
    let h = XyzHamiltonian::preset(Preset::RandomXyz, n, cfg.hamiltonian.seed).map_err(fail)?;
    let a = build_brickwork_ansatz(n, 1, &h, 0.2).map_err(fail)?;
    let theta: Vec<f64> = (0..a.n_params())
        .map(|_| rng.gen_range(-3.0..3.0))
        .collect();
    let target = Mps::random(n, 4, &mut rng).map_err(fail)?;
    let cc = CostConfig::new(
        CostConfig::local_weights(n, 1),
        TruncationPolicy::unbounded(),
    );
    let ps = gradient(&a, &theta, &target, &cc).map_err(fail)?;
    let fd = gradient_fd(&a, &theta, &target, &cc, 1e-5).map_err(fail)?;
    let gerr = ps
        .iter()
        .zip(&fd)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    let ok = gerr < 1e-6;
    ok_all &= ok;
    lines.push(format!(
        "gradient-shift-vs-fd {} max_abs_err={gerr:.2e}",
        pass(ok)
    ));

    // Trotter initialization reproduces the Trotter state
    let h = XyzHamiltonian::xxz(6).map_err(fail)?;
    let a = build_brickwork_ansatz(6, 3, &h, 0.25).map_err(fail)?;
    let theta0 = trotter_initialize(&a, &h, 0.25, "101010").map_err(fail)?;
    let policy = TruncationPolicy::unbounded();
    let psi0 = Mps::from_product_state("101010").map_err(fail)?;
    let trot = tebd_evolve(&psi0, &h, 0.25, 3, &policy).map_err(fail)?;
    let c0 = cost_global(&a, &theta0, &trot, &policy)
        .map_err(fail)?
        .total;
    let ok = c0.abs() < 1e-8;
    ok_all &= ok;
    lines.push(format!("trotter-initialization {} cost={c0:.2e}", pass(ok)));

    for l in &lines {
        println!("{l}");
    }
    let dir = out_dir(&cfg);
    fs::create_dir_all(&dir).map_err(io_fail("output"))?;
    let path = dir.join("verify.txt");
    fs::write(&path, lines.join("\n") + "\n").map_err(io_fail("output"))?;
    write_manifest(&dir, &[path]).map_err(|e| Failure::runtime("output", e))?;
    if ok_all {
        Ok(())
    } else {
        Err(Failure::runtime(
            "verify",
            Error::Numerical("a check failed".into()),
        ))
    }
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn cmd_export(c: &Common, report: Option<&Path>, trotter: bool) -> CliResult<()> {
    let cfg = c.load()?;
    let dir = out_dir(&cfg);
    let path = report.map_or_else(|| dir.join("report.json"), Path::to_path_buf);
    let text = fs::read_to_string(&path).map_err(|e| {
        Failure::usage(Error::Config(format!(
            "cannot read {}: {e}",
            path.display()
        )))
    })?;
    let rep = RunReport::from_json(&text).map_err(Failure::usage)?;
    let fail = |e: Error| Failure::runtime("export", e);
    let list = if trotter {
        let h = rep
            .hamiltonian
            .as_ref()
            .ok_or_else(|| fail(Error::Config("report has no Hamiltonian".into())))?;
        let bits: Vec<usize> = rep
            .initial_state
            .bytes()
            .map(|b| usize::from(b == b'1'))
            .collect();
        let sched = mpsaqc::trotter::build_trotter_schedule(h, rep.config.dt(), rep.config.layers)
            .map_err(fail)?;
        let mut gates = mpsaqc::trotter::prepare_bits(&bits);
        gates.extend(sched.to_gate_list().gates);
        GateList { n: h.n, gates }
    } else {
        rep.circuit().map_err(fail)?
    };
    let text = list.to_text();
    // the written file must parse back to the same circuit
    if GateList::parse(&text).map_err(fail)? != list {
        return Err(fail(Error::Numerical(
            "gate list did not round-trip".into(),
        )));
    }
    fs::create_dir_all(&dir).map_err(io_fail("output"))?;
    let name = if trotter {
        "trotter_circuit.txt"
    } else {
        "circuit.txt"
    };
    let out = dir.join(name);
    fs::write(&out, text).map_err(io_fail("output"))?;
    write_manifest(&dir, &[out]).map_err(|e| Failure::runtime("output", e))?;
    info!("{} gates, {} CNOTs", list.gates.len(), list.cnot_count());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    let r = match &cli.command {
        Command::Evolve(c) => cmd_evolve(c),
        Command::Compile(c) => cmd_compile(c),
        Command::Run(c) => cmd_run(c),
        Command::Sweep { common, comparison } => cmd_sweep(common, *comparison),
        Command::Verify(c) => cmd_verify(c),
        Command::ExportCircuit {
            common,
            report,
            trotter,
        } => cmd_export(common, report.as_deref(), *trotter),
    };
    match r {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            // keep the report to one line even for multi-line parser messages
            let msg: Vec<&str> = f
                .message
                .lines()
                .map(str::trim)
                .filter(|l| l.chars().any(char::is_alphabetic))
                .collect();
            eprintln!("error[{}]: {}", f.category, msg.join(" "));
            ExitCode::from(f.code)
        }
    }
}

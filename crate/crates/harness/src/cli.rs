//! Command-line interface. Every subcommand reads the config (the bundled
//! default when `--config` is absent) and works inside the output
//! directory, so the stages can be chained:
//!
//! ```text
//! rosc collect → trajectories.csv
//! rosc identify → model_set.json
//! rosc offline → family.json, oracle.json
//! rosc simulate → simulation.json, plot.csv
//! rosc compare → everything above plus report.json, timing.json
//! rosc audit → re-checks whatever is in the directory
//! ```

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ndarray::Array1;
use rosc_core::{ControllerState, ModelSet, RoscFamily};
use serde::Serialize;

use crate::artifacts::{self, ensure_dir, read_trajectories};
use crate::config::ExperimentConfig;
use crate::experiment::{self, rng_for, ClosedLoop, RunRecord};
use crate::json::{read_json, write_canonical};
use crate::plant::collect_trajectories;
use crate::HarnessError;

#[derive(Debug, Parser)]
#[command(name = "rosc", version, about = "Data-driven ROSC sets and set-theoretic MPC")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// Experiment config (TOML); defaults to the bundled reference config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the config output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate the plant under random excitation and store the data.
    Collect(Common),
    /// Build the model set from stored trajectories.
    Identify(Common),
    /// Compute the data-driven and model-based families.
    Offline(Common),
    /// Run the data-driven controller from x0 on a stored family.
    Simulate(Common),
    /// Full pipeline with paired closed loops, audits and report.
    Compare(Common),
    /// Verify the invariants of the stored artifacts.
    Audit(Common),
}

struct Ctx {
    cfg: ExperimentConfig,
    out: PathBuf,
}

fn context(c: &Common) -> Result<Ctx, HarnessError> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::reference(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    let out = c.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    Ok(Ctx { cfg, out })
}

/// Parses `argv` and runs it; returns the process exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command) -> Result<i32, HarnessError> {
    match cmd {
        Command::Collect(c) => collect(&context(&c)?),
        Command::Identify(c) => identify(&context(&c)?),
        Command::Offline(c) => offline(&context(&c)?),
        Command::Simulate(c) => simulate(&context(&c)?),
        Command::Compare(c) => compare(&context(&c)?),
        Command::Audit(c) => audit(&context(&c)?),
    }
}

fn require(path: &Path, producer: &str) -> Result<(), HarnessError> {
    if path.exists() {
        Ok(())
    } else {
        Err(HarnessError::Io(format!("{} not found; run `rosc {producer}` first", path.display())))
    }
}

fn collect(ctx: &Ctx) -> Result<i32, HarnessError> {
    let plant = ctx.cfg.plant.build()?;
    let trajs = collect_trajectories(&plant, &ctx.cfg.data, &mut rng_for(ctx.cfg.seed, 0))?;
    ensure_dir(&ctx.out)?;
    let path = artifacts::write_trajectories(&ctx.out, &trajs)?;
    println!("wrote {} trajectories to {}", trajs.len(), path.display());
    Ok(0)
}

fn identify(ctx: &Ctx) -> Result<i32, HarnessError> {
    let plant = ctx.cfg.plant.build()?;
    let path = ctx.out.join(artifacts::TRAJECTORIES);
    require(&path, "collect")?;
    let trajs = read_trajectories(&path)?;
    let (ms, _, summary) = experiment::identify(&trajs, &plant, ctx.cfg.identification.max_generators)?;
    write_canonical(&ctx.out.join(artifacts::MODEL_SET), &ms)?;
    println!(
        "{} samples, rank condition {}, {} generators, {} vertex models, true model inside: {}",
        summary.samples,
        if summary.rank_ok { "met" } else { "NOT met" },
        summary.generators,
        summary.vertices,
        summary.true_model_contained
    );
    Ok(0)
}

fn offline(ctx: &Ctx) -> Result<i32, HarnessError> {
    let plant = ctx.cfg.plant.build()?;
    let path = ctx.out.join(artifacts::MODEL_SET);
    require(&path, "identify")?;
    let ms: ModelSet = read_json(&path)?;
    let vm = rosc_core::sysid::extract_vertex_models(&ms, ctx.cfg.identification.max_generators)?;
    let (fam, summary) = experiment::offline(&ctx.cfg, &plant, &vm)?;
    write_canonical(&ctx.out.join(artifacts::FAMILY), &fam)?;
    let (of, osum) = experiment::oracle(&ctx.cfg, &plant, &fam.terminal)?;
    write_canonical(&ctx.out.join(artifacts::ORACLE), &of)?;
    println!(
        "{} data-driven levels (terminal advanced {} level(s)), {} model-based levels; x0 index {:?} / {:?}",
        summary.levels, summary.terminal_shift, osum.levels, summary.x0_index, osum.x0_index
    );
    Ok(0)
}

#[derive(Serialize)]
struct Simulation<'a> {
    seed: u64,
    data_driven: &'a RunRecord,
}

fn simulate(ctx: &Ctx) -> Result<i32, HarnessError> {
    let plant = ctx.cfg.plant.build()?;
    let path = ctx.out.join(artifacts::FAMILY);
    require(&path, "offline")?;
    let fam: RoscFamily = read_json(&path)?;
    let state = ControllerState::new(fam, ctx.cfg.online.cost()?, ctx.cfg.online.terminal_mode()?)?;
    let ws = experiment::disturbance_sequence(&plant, ctx.cfg.online.disturbance, ctx.cfg.online.horizon, ctx.cfg.seed, 0);
    let run = experiment::data_driven_run(&state, &plant, &Array1::from(ctx.cfg.online.x0.clone()), &ws);
    write_canonical(&ctx.out.join(artifacts::SIMULATION), &Simulation { seed: ctx.cfg.seed, data_driven: &run })?;
    artifacts::write_plot(&ctx.out.join(artifacts::PLOT), Some(&state.family), None, &[("data_driven", &run)])?;
    print_run("D-ST-MPC", &run);
    Ok(if run.ok() { 0 } else { 3 })
}

fn print_run(name: &str, run: &RunRecord) {
    let js: Vec<String> = run.steps.iter().map(|s| s.j.to_string()).collect();
    println!(
        "{name}: initial index {:?}, terminal set reached at step {:?}, indices [{}]{}",
        run.initial_index,
        run.converged_at,
        js.join(" "),
        run.error.as_ref().map(|e| format!(", error: {e}")).unwrap_or_default()
    );
}

fn compare(ctx: &Ctx) -> Result<i32, HarnessError> {
    let ex = experiment::run_experiment(&ctx.cfg);
    artifacts::write_experiment(&ctx.out, &ex)?;
    if let Some(ClosedLoop { data_driven, model_based }) = &ex.report.closed_loop {
        print_run("D-ST-MPC", data_driven);
        print_run("ST-MPC", model_based);
    }
    if let Some(a) = &ex.report.audits {
        println!(
            "{} paired runs: data-driven ok {}, model-based ok {}, data-driven count >= model-based count in {}",
            a.runs.runs, a.runs.data_driven_ok, a.runs.model_based_ok, a.runs.dominance
        );
    }
    println!("artifacts in {}", ctx.out.display());
    match &ex.report.failure {
        Some(f) => {
            eprintln!("error: stage {} failed: {}", f.stage, f.message);
            Ok(3)
        }
        None => Ok(0),
    }
}

fn audit(ctx: &Ctx) -> Result<i32, HarnessError> {
    require(&ctx.out.join(artifacts::FAMILY), "offline")?;
    let checks = crate::audit::audit_dir(&ctx.out, ctx.cfg.identification.max_generators)?;
    let mut failed = 0;
    for c in &checks {
        let tag = if c.passed { "ok  " } else { "FAIL" };
        if c.detail.is_empty() {
            println!("{tag} {}", c.name);
        } else {
            println!("{tag} {} ({})", c.name, c.detail);
        }
        failed += usize::from(!c.passed);
    }
    println!("{} checks, {failed} failed", checks.len());
    Ok(if failed == 0 { 0 } else { 3 })
}

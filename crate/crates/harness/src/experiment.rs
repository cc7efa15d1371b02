//! End-to-end pipeline: collect → identify → vertices → family → terminal
//! check → closed loop, with the model-based oracle run on the same
//! disturbance realizations for comparison, plus the audits.

use std::collections::BTreeMap;
use std::time::Instant;

use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rosc_core::controller::{self, ModelBasedController};
use rosc_core::rosc::{check_terminal_feasibility, compute_family, compute_oracle_family, settle_terminal, FamilyConfig, OracleFamily};
use rosc_core::sysid::{assemble_data, check_rank, compute_model_set, extract_vertex_models, model_set_contains};
use rosc_core::{ControllerState, ModelSet, RoscFamily, Trajectory, VertexModels, Zonotope};
use serde::{Deserialize, Serialize};

use crate::config::{DisturbanceMode, ExperimentConfig, Plant};
use crate::plant::{collect_trajectories, sample_disturbance, simulate_plant};
use crate::HarnessError;

/// Residual allowed when checking the true model against the model set.
pub const MODEL_MEMBERSHIP_TOL: f64 = 1e-8;
/// Inner-zonotope samples must satisfy the exact polytope within this.
pub const INNER_AUDIT_TOL: f64 = 1e-8;
/// Support-function tolerance of the oracle-dominance audit.
pub const DOMINANCE_TOL: f64 = 1e-7;
/// Constraint tolerance along closed-loop runs.
pub const CONSTRAINT_TOL: f64 = 1e-9;

// RNG streams derived from the experiment seed.
const STREAM_DATA: u64 = 0;
const STREAM_AUDIT: u64 = 1;
const STREAM_RUNS: u64 = 1000;

pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageFailure {
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentificationSummary {
    pub samples: usize,
    pub rank_ok: bool,
    pub true_model_contained: bool,
    pub generators: usize,
    pub vertices: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySummary {
    pub levels: usize,
    /// Levels the seed set was advanced before it became terminal.
    pub terminal_shift: usize,
    /// Terminal set contained in the first level's projection.
    pub terminal_in_level1: bool,
    pub truncated_at: Option<usize>,
    pub exact_rows: Vec<usize>,
    pub generators: Vec<usize>,
    pub x0_index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSummary {
    pub levels: usize,
    pub rows: Vec<usize>,
    pub x0_index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub k: usize,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub j: usize,
}

/// One closed-loop run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub steps: Vec<StepRecord>,
    pub final_state: Vec<f64>,
    pub initial_index: Option<usize>,
    /// First step at which the index is 0.
    pub converged_at: Option<usize>,
    /// Index drops by at least one per step until it reaches 0.
    pub index_decreasing: bool,
    /// Index stays 0 once reached.
    pub terminal_invariant: bool,
    pub state_violations: usize,
    pub input_violations: usize,
    pub error: Option<String>,
}

impl RunRecord {
    pub fn ok(&self) -> bool {
        self.error.is_none()
            && self.converged_at.is_some()
            && self.index_decreasing
            && self.terminal_invariant
            && self.state_violations == 0
            && self.input_violations == 0
            && self.converged_at <= self.initial_index
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedLoop {
    pub data_driven: RunRecord,
    pub model_based: RunRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelAudit {
    pub level: usize,
    pub samples: usize,
    pub violations: usize,
    pub max_violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceAudit {
    pub level: usize,
    pub contained: bool,
    /// `max_r support(T̂ʲ, C_r) − d_r`; non-positive when contained.
    pub max_excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityAudit {
    pub samples: usize,
    pub infeasible: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiRunAudit {
    pub runs: usize,
    pub data_driven_steps: Vec<Option<usize>>,
    pub model_based_steps: Vec<Option<usize>>,
    pub data_driven_ok: usize,
    pub model_based_ok: usize,
    /// Runs where the data-driven step count is at least the model-based one.
    pub dominance: usize,
}

impl MultiRunAudit {
    pub fn all_ok(&self) -> bool {
        self.data_driven_ok == self.runs && self.model_based_ok == self.runs && self.dominance == self.runs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Audits {
    pub inner_soundness: Vec<LevelAudit>,
    pub oracle_dominance: Vec<DominanceAudit>,
    pub recursive_feasibility: FeasibilityAudit,
    pub runs: MultiRunAudit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub seed: u64,
    /// Stages that completed, in order.
    pub stages: Vec<String>,
    pub failure: Option<StageFailure>,
    pub identification: Option<IdentificationSummary>,
    pub family: Option<FamilySummary>,
    pub oracle: Option<OracleSummary>,
    pub closed_loop: Option<ClosedLoop>,
    pub audits: Option<Audits>,
}

/// Everything a run produces. Fields are filled as stages complete.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub report: ExperimentReport,
    pub trajectories: Option<Vec<Trajectory>>,
    pub model_set: Option<ModelSet>,
    pub family: Option<RoscFamily>,
    pub oracle: Option<OracleFamily<f64>>,
    /// Wall-clock seconds per stage; kept out of the report so that the
    /// report is reproducible.
    pub timing: BTreeMap<String, f64>,
}

impl Experiment {
    pub fn succeeded(&self) -> bool {
        self.report.failure.is_none()
    }
}

pub fn family_config(cfg: &ExperimentConfig, plant: &Plant) -> Result<FamilyConfig<f64>, HarnessError> {
    let mut fc = FamilyConfig::new(plant.x.clone(), plant.u.clone(), plant.w.clone())?;
    fc.template = cfg.offline.template;
    fc.weights = cfg.offline.weights.clone();
    Ok(fc)
}

pub fn identify(trajs: &[Trajectory], plant: &Plant, max_generators: usize) -> Result<(ModelSet, VertexModels, IdentificationSummary), HarnessError> {
    let d = assemble_data(trajs)?;
    let rank_ok = check_rank(&d);
    let ms = compute_model_set(&d, &plant.w)?;
    let contained = model_set_contains(&ms, &plant.ab(), MODEL_MEMBERSHIP_TOL)?;
    let vm = extract_vertex_models(&ms, max_generators)?;
    let summary = IdentificationSummary {
        samples: d.num_samples(),
        rank_ok,
        true_model_contained: contained,
        generators: ms.mz.num_generators(),
        vertices: vm.len(),
    };
    Ok((ms, vm, summary))
}

/// Settles the terminal set from the configured seed and computes the
/// data-driven family from it.
pub fn offline(cfg: &ExperimentConfig, plant: &Plant, vm: &VertexModels) -> Result<(RoscFamily, FamilySummary), HarnessError> {
    let fc = family_config(cfg, plant)?;
    let seed = Zonotope::from_box(Array1::zeros(plant.n()), &Array1::from_elem(plant.n(), cfg.offline.terminal_scale))?;
    let (terminal, shift) = settle_terminal(vm, &seed, &fc, cfg.offline.terminal_max_shift)?;
    if shift > 0 {
        log::info!("seed terminal set fails the level-1 containment check; advanced {shift} level(s)");
    }
    let fam = compute_family(vm, &terminal, &fc, cfg.offline.levels)?;
    let x0 = Array1::from(cfg.online.x0.clone());
    let summary = FamilySummary {
        levels: fam.len(),
        terminal_shift: shift,
        terminal_in_level1: check_terminal_feasibility(&fam.terminal, &fam.levels[0])?,
        truncated_at: fam.truncated_at,
        exact_rows: fam.levels.iter().map(|l| l.diagnostics.exact_rows).collect(),
        generators: fam.levels.iter().map(|l| l.inner.num_generators()).collect(),
        x0_index: controller::membership_index(&x0, &fam).ok(),
    };
    Ok((fam, summary))
}

/// The exact family for the true model, from the same terminal set.
pub fn oracle(cfg: &ExperimentConfig, plant: &Plant, terminal: &Zonotope) -> Result<(OracleFamily<f64>, OracleSummary), HarnessError> {
    let of = compute_oracle_family(&plant.a, &plant.b, &terminal.to_hpoly()?, &plant.x, &plant.u, &plant.w, cfg.offline.oracle_levels)?;
    let x0 = Array1::from(cfg.online.x0.clone());
    let summary = OracleSummary {
        levels: of.len(),
        rows: of.levels.iter().map(|p| p.num_rows()).collect(),
        x0_index: (0..=of.len()).find(|&j| of.set(j).is_some_and(|p| p.contains_point(x0.view(), controller::MEMBERSHIP_TOL).unwrap_or(false))),
    };
    Ok((of, summary))
}

pub fn disturbance_sequence(plant: &Plant, mode: DisturbanceMode, horizon: usize, seed: u64, run: usize) -> Vec<Array1<f64>> {
    let mut rng = rng_for(seed, STREAM_RUNS + run as u64);
    (0..horizon).map(|_| sample_disturbance(&plant.w, mode, &mut rng)).collect()
}

/// Simulates `horizon` steps of the true plant under `policy`.
pub fn closed_loop<F>(plant: &Plant, x0: &Array1<f64>, ws: &[Array1<f64>], mut policy: F) -> RunRecord
where
    F: FnMut(&Array1<f64>) -> rosc_core::Result<(Array1<f64>, usize)>,
{
    let mut x = x0.clone();
    let mut steps = Vec::with_capacity(ws.len());
    let mut error = None;
    let (mut sv, mut iv) = (0, 0);
    for (k, w) in ws.iter().enumerate() {
        if !plant.x.contains_point(x.view(), CONSTRAINT_TOL).unwrap_or(false) {
            sv += 1;
        }
        let (u, j) = match policy(&x) {
            Ok(r) => r,
            Err(e) => {
                error = Some(format!("step {k}: {e}"));
                break;
            }
        };
        if !plant.u.contains_point(u.view(), CONSTRAINT_TOL).unwrap_or(false) {
            iv += 1;
        }
        let next = simulate_plant(plant, &x, &u, w);
        steps.push(StepRecord {
            k,
            x: x.to_vec(),
            u: u.to_vec(),
            j,
        });
        x = next;
    }
    if error.is_none() && !plant.x.contains_point(x.view(), CONSTRAINT_TOL).unwrap_or(false) {
        sv += 1;
    }
    let js: Vec<usize> = steps.iter().map(|s| s.j).collect();
    let converged_at = js.iter().position(|&j| j == 0);
    let prefix = &js[..converged_at.map_or(js.len(), |c| c + 1)];
    let index_decreasing = prefix.windows(2).all(|p| p[1] < p[0]);
    let terminal_invariant = converged_at.is_none_or(|c| js[c..].iter().all(|&j| j == 0));
    RunRecord {
        initial_index: js.first().copied(),
        steps,
        final_state: x.to_vec(),
        converged_at,
        index_decreasing,
        terminal_invariant,
        state_violations: sv,
        input_violations: iv,
        error,
    }
}

pub fn data_driven_run(state: &ControllerState, plant: &Plant, x0: &Array1<f64>, ws: &[Array1<f64>]) -> RunRecord {
    let mut st = state.clone();
    closed_loop(plant, x0, ws, |x| controller::step(x, &mut st))
}

pub fn model_based_run(ctrl: &ModelBasedController<f64>, plant: &Plant, x0: &Array1<f64>, ws: &[Array1<f64>]) -> RunRecord {
    let mut c = ctrl.clone();
    closed_loop(plant, x0, ws, |x| c.step(x))
}

pub fn inner_soundness_audit<R: Rng>(fam: &RoscFamily, samples: usize, rng: &mut R) -> Result<Vec<LevelAudit>, HarnessError> {
    let mut out = Vec::with_capacity(fam.len());
    for level in &fam.levels {
        let exact = level.hpoly.as_ref().ok_or_else(|| HarnessError::Pipeline {
            stage: "audit",
            message: "family has no exact polytopes (loaded from disk?)".into(),
        })?;
        let mut worst = f64::NEG_INFINITY;
        let mut violations = 0;
        for _ in 0..samples {
            let v = exact.max_violation(level.inner.sample(rng).view())?;
            worst = worst.max(v);
            if v > INNER_AUDIT_TOL {
                violations += 1;
            }
        }
        out.push(LevelAudit {
            level: level.index,
            samples,
            violations,
            max_violation: worst,
        });
    }
    Ok(out)
}

pub fn dominance_audit(fam: &RoscFamily, of: &OracleFamily<f64>) -> Result<Vec<DominanceAudit>, HarnessError> {
    let upto = fam.len().min(of.len());
    (1..=upto)
        .map(|j| {
            let z = fam.projected(j).expect("in range");
            let p = of.set(j).expect("in range");
            let mut excess = f64::NEG_INFINITY;
            for (row, &d) in p.normals().rows().into_iter().zip(p.offsets().iter()) {
                excess = excess.max(z.support(row)? - d);
            }
            Ok(DominanceAudit {
                level: j,
                contained: excess <= DOMINANCE_TOL,
                max_excess: excess,
            })
        })
        .collect()
}

/// Samples states in the nonterminal levels (half uniform, half on vertices
/// of the projected zonotope) and solves the online QP at that level.
pub fn feasibility_audit<R: Rng>(state: &ControllerState, samples: usize, rng: &mut R) -> FeasibilityAudit {
    let n_levels = state.family.len();
    let mut infeasible = 0;
    for i in 0..samples {
        let j = rng.gen_range(1..=n_levels);
        let z = state.family.projected(j).expect("in range");
        let x = if i % 2 == 0 { z.sample(rng) } else { z.sample_vertex(rng) };
        if let Err(e) = controller::compute_control(&x, j, state) {
            log::warn!("online QP failed at level {j}, x = {x}: {e}");
            infeasible += 1;
        }
    }
    FeasibilityAudit { samples, infeasible }
}

pub fn multi_run_audit(cfg: &ExperimentConfig, plant: &Plant, state: &ControllerState, mb: &ModelBasedController<f64>) -> MultiRunAudit {
    let x0 = Array1::from(cfg.online.x0.clone());
    let pairs: Vec<(RunRecord, RunRecord)> = (0..cfg.audit.runs)
        .into_par_iter()
        .map(|r| {
            let ws = disturbance_sequence(plant, cfg.online.disturbance, cfg.online.horizon, cfg.seed, r);
            (data_driven_run(state, plant, &x0, &ws), model_based_run(mb, plant, &x0, &ws))
        })
        .collect();
    MultiRunAudit {
        runs: pairs.len(),
        data_driven_steps: pairs.iter().map(|p| p.0.converged_at).collect(),
        model_based_steps: pairs.iter().map(|p| p.1.converged_at).collect(),
        data_driven_ok: pairs.iter().filter(|p| p.0.ok()).count(),
        model_based_ok: pairs.iter().filter(|p| p.1.ok()).count(),
        dominance: pairs
            .iter()
            .filter(|p| matches!((p.0.converged_at, p.1.converged_at), (Some(d), Some(m)) if d >= m))
            .count(),
    }
}

/// Runs the whole pipeline. Never fails as such: a failing stage is
/// recorded in the report, and whatever was computed before it is kept.
pub fn run_experiment(cfg: &ExperimentConfig) -> Experiment {
    let mut ex = Experiment {
        report: ExperimentReport {
            schema_version: crate::config::SCHEMA_VERSION,
            seed: cfg.seed,
            stages: Vec::new(),
            failure: None,
            identification: None,
            family: None,
            oracle: None,
            closed_loop: None,
            audits: None,
        },
        trajectories: None,
        model_set: None,
        family: None,
        oracle: None,
        timing: BTreeMap::new(),
    };
    let total = Instant::now();
    if let Err((stage, e)) = pipeline(cfg, &mut ex) {
        log::error!("stage {stage} failed: {e}");
        ex.report.failure = Some(StageFailure {
            stage: stage.to_string(),
            message: e.to_string(),
        });
    }
    ex.timing.insert("total".into(), total.elapsed().as_secs_f64());
    ex
}

fn pipeline(cfg: &ExperimentConfig, ex: &mut Experiment) -> Result<(), (&'static str, HarnessError)> {
    fn timed<T>(ex: &mut Experiment, stage: &'static str, f: impl FnOnce() -> Result<T, HarnessError>) -> Result<T, (&'static str, HarnessError)> {
        let t = Instant::now();
        let r = f().map_err(|e| (stage, e))?;
        ex.timing.insert(stage.to_string(), t.elapsed().as_secs_f64());
        ex.report.stages.push(stage.to_string());
        Ok(r)
    }

    let plant = cfg.plant.build().map_err(|e| ("config", e))?;
    let x0 = Array1::from(cfg.online.x0.clone());

    let trajs = timed(ex, "collect", || collect_trajectories(&plant, &cfg.data, &mut rng_for(cfg.seed, STREAM_DATA)))?;
    ex.trajectories = Some(trajs.clone());

    let (ms, vm, ident) = timed(ex, "identify", || identify(&trajs, &plant, cfg.identification.max_generators))?;
    ex.model_set = Some(ms);
    ex.report.identification = Some(ident);

    let (fam, fsum) = timed(ex, "offline", || offline(cfg, &plant, &vm))?;
    ex.family = Some(fam.clone());
    ex.report.family = Some(fsum);

    let (of, osum) = timed(ex, "oracle", || oracle(cfg, &plant, &fam.terminal))?;
    ex.oracle = Some(of.clone());
    ex.report.oracle = Some(osum);

    let state = ControllerState::new(fam.clone(), cfg.online.cost().map_err(|e| ("online", e))?, cfg.online.terminal_mode().map_err(|e| ("online", e))?)
        .map_err(|e| ("online", e.into()))?;
    let mb = ModelBasedController::new(
        plant.a.clone(),
        plant.b.clone(),
        of.clone(),
        plant.u.clone(),
        &plant.w,
        state.cost.clone(),
        state.terminal_mode.clone(),
    )
    .map_err(|e| ("online", e.into()))?;

    let cl = timed(ex, "closed_loop", || {
        let ws = disturbance_sequence(&plant, cfg.online.disturbance, cfg.online.horizon, cfg.seed, 0);
        Ok(ClosedLoop {
            data_driven: data_driven_run(&state, &plant, &x0, &ws),
            model_based: model_based_run(&mb, &plant, &x0, &ws),
        })
    })?;
    let cl_err = [&cl.data_driven, &cl.model_based].iter().find_map(|r| r.error.clone());
    ex.report.closed_loop = Some(cl);
    if let Some(msg) = cl_err {
        return Err(("closed_loop", HarnessError::Pipeline { stage: "closed_loop", message: msg }));
    }

    let audits = timed(ex, "audit", || {
        let mut rng = rng_for(cfg.seed, STREAM_AUDIT);
        Ok(Audits {
            inner_soundness: inner_soundness_audit(&fam, cfg.audit.inner_samples, &mut rng)?,
            oracle_dominance: dominance_audit(&fam, &of)?,
            recursive_feasibility: feasibility_audit(&state, cfg.audit.feasibility_samples, &mut rng),
            runs: multi_run_audit(cfg, &plant, &state, &mb),
        })
    })?;
    ex.report.audits = Some(audits);
    Ok(())
}

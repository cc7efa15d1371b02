//! Re-verifies the invariants of stored artifacts without trusting the
//! process that wrote them.

use std::path::Path;

use rosc_core::rosc::{exact_level, OracleFamily};
use rosc_core::sysid::extract_vertex_models;
use rosc_core::{ModelSet, RoscFamily, DEFAULT_TOL};

use crate::artifacts::{FAMILY, MODEL_SET, ORACLE, REPORT};
use crate::experiment::{dominance_audit, ExperimentReport, INNER_AUDIT_TOL};
use crate::json::read_json;
use crate::HarnessError;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

/// Audits the family (and, when present, the model set, oracle family and
/// report) stored in `dir`.
pub fn audit_dir(dir: &Path, max_generators: usize) -> Result<Vec<Check>, HarnessError> {
    let fam: RoscFamily = read_json(&dir.join(FAMILY))?;
    let mut checks = audit_family(&fam)?;

    let ms_path = dir.join(MODEL_SET);
    if ms_path.exists() {
        let ms: ModelSet = read_json(&ms_path)?;
        let vm = extract_vertex_models(&ms, max_generators)?;
        for j in 1..=fam.len() {
            let prev = fam.projected(j - 1).expect("in range").to_hpoly()?;
            let (exact, _) = exact_level(&vm, &prev, &fam.config)?;
            let inner = &fam.levels[j - 1].inner;
            checks.push(Check::new(
                format!("level {j} inner zonotope inside exact augmented set"),
                inner.is_subset_of(&exact, INNER_AUDIT_TOL)?,
                format!("{} exact rows", exact.num_rows()),
            ));
        }
    }

    let oracle_path = dir.join(ORACLE);
    if oracle_path.exists() {
        let of: OracleFamily<f64> = read_json(&oracle_path)?;
        for d in dominance_audit(&fam, &of)? {
            checks.push(Check::new(
                format!("level {} inside model-based level", d.level),
                d.contained,
                format!("max excess {:e}", d.max_excess),
            ));
        }
    }

    let report_path = dir.join(REPORT);
    if report_path.exists() {
        let r: ExperimentReport = read_json(&report_path)?;
        checks.extend(audit_report(&r));
    }
    Ok(checks)
}

pub fn audit_family(fam: &RoscFamily) -> Result<Vec<Check>, HarnessError> {
    let n = fam.config.state_dim();
    let mut out = vec![Check::new(
        "terminal set inside state constraints",
        fam.terminal.is_subset_of(&fam.config.state_constraints, DEFAULT_TOL)?,
        "",
    )];
    if let Some(l1) = fam.level(1) {
        out.push(Check::new(
            "terminal set inside level 1",
            fam.terminal.is_subset_of(&l1.projected.to_hpoly()?, DEFAULT_TOL)?,
            "",
        ));
    }
    let dims: Vec<usize> = (0..n).collect();
    for l in &fam.levels {
        let proj = l.inner.project(&dims)?;
        let same = proj.center().len() == l.projected.center().len()
            && proj.generators().dim() == l.projected.generators().dim()
            && (proj.center() - l.projected.center()).iter().chain((proj.generators() - l.projected.generators()).iter()).all(|v| v.abs() <= 1e-12);
        out.push(Check::new(format!("level {} projection matches inner zonotope", l.index), same, ""));
        let u_dims: Vec<usize> = (n..l.inner.dim()).collect();
        let u_part = l.inner.project(&u_dims)?;
        out.push(Check::new(
            format!("level {} inputs inside input constraints", l.index),
            u_part.is_subset_of(&fam.config.input_constraints, DEFAULT_TOL)?,
            "",
        ));
        let center_ok = l.inner.center().iter().all(|v| v.is_finite()) && l.inner.generators().iter().all(|v| v.is_finite());
        out.push(Check::new(format!("level {} is finite", l.index), center_ok, ""));
    }
    Ok(out)
}

pub fn audit_report(r: &ExperimentReport) -> Vec<Check> {
    let mut out = vec![Check::new(
        "pipeline completed",
        r.failure.is_none(),
        r.failure.as_ref().map(|f| format!("{}: {}", f.stage, f.message)).unwrap_or_default(),
    )];
    if let Some(id) = &r.identification {
        out.push(Check::new("true model inside the model set", id.true_model_contained, ""));
    }
    if let Some(cl) = &r.closed_loop {
        for (name, run) in [("data-driven", &cl.data_driven), ("model-based", &cl.model_based)] {
            out.push(Check::new(
                format!("{name} closed loop converges within its initial index"),
                run.ok(),
                format!("converged at {:?}, initial index {:?}", run.converged_at, run.initial_index),
            ));
        }
    }
    if let Some(a) = &r.audits {
        let bad: usize = a.inner_soundness.iter().map(|l| l.violations).sum();
        out.push(Check::new("inner zonotope samples inside exact sets", bad == 0, format!("{bad} violations")));
        out.push(Check::new(
            "data-driven family inside model-based family",
            a.oracle_dominance.iter().all(|d| d.contained),
            "",
        ));
        out.push(Check::new(
            "online QP feasible on sampled states",
            a.recursive_feasibility.infeasible == 0,
            format!("{}/{} infeasible", a.recursive_feasibility.infeasible, a.recursive_feasibility.samples),
        ));
        out.push(Check::new(
            "paired closed-loop runs",
            a.runs.all_ok(),
            format!(
                "{} runs: data-driven ok {}, model-based ok {}, dominance {}",
                a.runs.runs, a.runs.data_driven_ok, a.runs.model_based_ok, a.runs.dominance
            ),
        ));
    }
    out
}

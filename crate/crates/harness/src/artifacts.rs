//! Files written to the output directory.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rosc_core::rosc::OracleFamily;
use rosc_core::sysid::write_trajectories_csv;
use rosc_core::{RoscFamily, Trajectory};

use crate::experiment::{Experiment, RunRecord};
use crate::json::write_canonical;
use crate::HarnessError;

pub const TRAJECTORIES: &str = "trajectories.csv";
pub const MODEL_SET: &str = "model_set.json";
pub const FAMILY: &str = "family.json";
pub const ORACLE: &str = "oracle.json";
pub const REPORT: &str = "report.json";
pub const SIMULATION: &str = "simulation.json";
pub const PLOT: &str = "plot.csv";
pub const TIMING: &str = "timing.json";

pub fn ensure_dir(dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::Io(format!("{}: {e}", dir.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>, HarnessError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))
}

pub fn write_trajectories(dir: &Path, trajs: &[Trajectory]) -> Result<PathBuf, HarnessError> {
    let path = dir.join(TRAJECTORIES);
    write_trajectories_csv(trajs, create(&path)?)?;
    Ok(path)
}

pub fn read_trajectories(path: &Path) -> Result<Vec<Trajectory>, HarnessError> {
    let f = File::open(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
    Ok(rosc_core::sysid::read_trajectories_csv(f)?)
}

/// Polylines of the family boundaries and the closed-loop traces, for
/// planar systems: `series,index,x1,x2`. Each polygon is closed (first
/// vertex repeated). Higher-dimensional systems get the traces only, in
/// their first two coordinates.
pub fn write_plot(
    path: &Path,
    family: Option<&RoscFamily>,
    oracle: Option<&OracleFamily<f64>>,
    runs: &[(&str, &RunRecord)],
) -> Result<(), HarnessError> {
    let mut out = create(path)?;
    let io = |e: std::io::Error| HarnessError::Io(format!("{}: {e}", path.display()));
    writeln!(out, "series,index,x1,x2").map_err(io)?;
    let poly = |out: &mut BufWriter<File>, series: &str, idx: usize, pts: Vec<[f64; 2]>| -> Result<(), HarnessError> {
        for p in pts.iter().chain(pts.first()) {
            writeln!(out, "{series},{idx},{:e},{:e}", p[0], p[1]).map_err(io)?;
        }
        Ok(())
    };
    if let Some(f) = family.filter(|f| f.terminal.dim() == 2) {
        for j in 0..=f.len() {
            poly(&mut out, "data_driven_level", j, f.projected(j).expect("in range").polygon_2d()?)?;
        }
    }
    if let Some(o) = oracle.filter(|o| o.terminal.dim() == 2) {
        for j in 0..=o.len() {
            poly(&mut out, "model_based_level", j, o.set(j).expect("in range").polygon_2d()?)?;
        }
    }
    for (name, run) in runs {
        let states = run.steps.iter().map(|s| &s.x).chain(std::iter::once(&run.final_state));
        for (k, x) in states.enumerate() {
            if x.len() >= 2 {
                writeln!(out, "{name}_trace,{k},{:e},{:e}", x[0], x[1]).map_err(io)?;
            }
        }
    }
    out.flush().map_err(io)
}

/// Writes every artifact the experiment produced; missing stages are
/// skipped. The report is always written.
pub fn write_experiment(dir: &Path, ex: &Experiment) -> Result<(), HarnessError> {
    ensure_dir(dir)?;
    if let Some(t) = &ex.trajectories {
        write_trajectories(dir, t)?;
    }
    if let Some(ms) = &ex.model_set {
        write_canonical(&dir.join(MODEL_SET), ms)?;
    }
    if let Some(f) = &ex.family {
        write_canonical(&dir.join(FAMILY), f)?;
    }
    if let Some(o) = &ex.oracle {
        write_canonical(&dir.join(ORACLE), o)?;
    }
    write_canonical(&dir.join(REPORT), &ex.report)?;
    write_canonical(&dir.join(TIMING), &ex.timing)?;
    let runs: Vec<(&str, &RunRecord)> = ex
        .report
        .closed_loop
        .as_ref()
        .map(|c| vec![("data_driven", &c.data_driven), ("model_based", &c.model_based)])
        .unwrap_or_default();
    write_plot(&dir.join(PLOT), ex.family.as_ref(), ex.oracle.as_ref(), &runs)
}

//! Experiment configuration (TOML). See `configs/default.toml` for the
//! reference file; every section except `[plant]` has defaults matching the
//! reference experiment.

use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use rosc_core::controller::{QuadraticCost, TerminalMode};
use rosc_core::rosc::TemplatePolicy;
use rosc_core::{HPolytope, Zonotope};
use serde::{Deserialize, Serialize};

use crate::HarnessError;

pub const SCHEMA_VERSION: u32 = 1;

/// A convex set given either as a box or as `C x ≤ d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SetSpec {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    HRep { #[serde(rename = "C")] c: Vec<Vec<f64>>, d: Vec<f64> },
}

impl SetSpec {
    pub fn to_hpoly(&self) -> Result<HPolytope, HarnessError> {
        match self {
            SetSpec::Box { lo, hi } => Ok(HPolytope::from_box(&Array1::from(lo.clone()), &Array1::from(hi.clone()))?),
            SetSpec::HRep { c, d } => Ok(HPolytope::new(matrix(c, "C")?, Array1::from(d.clone()))?),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZonotopeSpec {
    pub center: Vec<f64>,
    /// `n × p`, row-major.
    pub generators: Vec<Vec<f64>>,
}

impl ZonotopeSpec {
    pub fn to_zonotope(&self) -> Result<Zonotope, HarnessError> {
        let g = if self.generators.iter().all(Vec::is_empty) {
            Array2::zeros((self.center.len(), 0))
        } else {
            matrix(&self.generators, "disturbance generators")?
        };
        Ok(Zonotope::new(Array1::from(self.center.clone()), g)?)
    }
}

pub(crate) fn matrix(rows: &[Vec<f64>], what: &str) -> Result<Array2<f64>, HarnessError> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(HarnessError::Config(format!("{what}: ragged matrix")));
    }
    Array2::from_shape_vec((rows.len(), ncols), rows.concat()).map_err(|e| HarnessError::Config(format!("{what}: {e}")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantConfig {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "X")]
    pub x: SetSpec,
    #[serde(rename = "U")]
    pub u: SetSpec,
    #[serde(rename = "W")]
    pub w: ZonotopeSpec,
}

/// `PlantConfig` in matrix form, validated.
#[derive(Debug, Clone)]
pub struct Plant {
    pub a: Array2<f64>,
    pub b: Array2<f64>,
    pub x: HPolytope,
    pub u: HPolytope,
    pub w: Zonotope,
}

impl Plant {
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    /// `[A B]`.
    pub fn ab(&self) -> Array2<f64> {
        ndarray::concatenate![ndarray::Axis(1), self.a, self.b]
    }
}

impl PlantConfig {
    pub fn build(&self) -> Result<Plant, HarnessError> {
        let a = matrix(&self.a, "A")?;
        let b = matrix(&self.b, "B")?;
        let (x, u, w) = (self.x.to_hpoly()?, self.u.to_hpoly()?, self.w.to_zonotope()?);
        let n = a.nrows();
        let ok = a.ncols() == n && b.nrows() == n && x.dim() == n && w.dim() == n && u.dim() == b.ncols();
        if !ok || n == 0 || b.ncols() == 0 {
            return Err(HarnessError::Config(format!(
                "inconsistent plant dimensions: A {:?}, B {:?}, X {}, U {}, W {}",
                a.dim(),
                b.dim(),
                x.dim(),
                u.dim(),
                w.dim()
            )));
        }
        Ok(Plant { a, b, x, u, w })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Excitation {
    /// i.i.d. uniform over `U`.
    #[default]
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// `N_t`.
    pub trajectories: usize,
    /// `N_s`, inputs per trajectory.
    pub samples: usize,
    /// Initial states are uniform in this box (clipped to `X` by rejection).
    pub initial_lo: Vec<f64>,
    pub initial_hi: Vec<f64>,
    #[serde(default)]
    pub excitation: Excitation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentificationConfig {
    /// Matrix-zonotope order before vertex enumeration (`2^k` vertices).
    pub max_generators: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OfflineConfig {
    /// `N`, data-driven levels.
    pub levels: usize,
    /// Levels of the exact model-based family.
    pub oracle_levels: usize,
    /// Half-width of the axis-aligned seed `T⁰` around the origin.
    pub terminal_scale: f64,
    /// How many levels the seed may be advanced until one contains its
    /// predecessor; `0` requires the seed itself to pass.
    pub terminal_max_shift: usize,
    #[serde(default)]
    pub template: TemplatePolicy,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalModeSpec {
    Gain,
    #[default]
    QpLevel1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisturbanceMode {
    /// `β` uniform on the unit box.
    #[default]
    Uniform,
    /// `β` a random sign vector: vertices of `W`.
    Vertex,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OnlineConfig {
    pub x0: Vec<f64>,
    /// Closed-loop steps simulated per run.
    pub horizon: usize,
    /// `R` of `J = ½ uᵀRu + qᵀu`.
    pub cost_r: Vec<Vec<f64>>,
    #[serde(default)]
    pub cost_linear: Option<Vec<f64>>,
    #[serde(default)]
    pub terminal_mode: TerminalModeSpec,
    /// `K` for `u = −Kx`; required in gain mode.
    #[serde(default)]
    pub gain: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub disturbance: DisturbanceMode,
}

impl OnlineConfig {
    pub fn cost(&self) -> Result<QuadraticCost<f64>, HarnessError> {
        let c = QuadraticCost::new(matrix(&self.cost_r, "cost_r")?)?;
        Ok(match &self.cost_linear {
            Some(q) => c.with_linear(Array1::from(q.clone()))?,
            None => c,
        })
    }

    pub fn terminal_mode(&self) -> Result<TerminalMode<f64>, HarnessError> {
        match (self.terminal_mode, &self.gain) {
            (TerminalModeSpec::QpLevel1, _) => Ok(TerminalMode::QpLevel1),
            (TerminalModeSpec::Gain, Some(k)) => Ok(TerminalMode::Gain(matrix(k, "gain")?)),
            (TerminalModeSpec::Gain, None) => Err(HarnessError::Config("terminal_mode = \"gain\" needs `gain`".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditConfig {
    /// Paired closed-loop runs, each with its own disturbance realization.
    pub runs: usize,
    /// Samples per level in the inner-soundness audit.
    pub inner_samples: usize,
    /// States sampled in nonterminal levels for the feasibility audit.
    pub feasibility_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub seed: u64,
    pub plant: PlantConfig,
    pub data: DataConfig,
    pub identification: IdentificationConfig,
    pub offline: OfflineConfig,
    pub online: OnlineConfig,
    pub audit: AuditConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

/// The reference experiment; identical to `configs/default.toml`.
pub const DEFAULT_CONFIG: &str = include_str!("../../../configs/default.toml");

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn reference() -> Self {
        Self::from_toml(DEFAULT_CONFIG).expect("bundled config is valid")
    }

    /// Core-library errors raised while building sets count as config
    /// errors here.
    pub fn validate(&self) -> Result<(), HarnessError> {
        self.check().map_err(|e| match e {
            HarnessError::Core(c) => HarnessError::Config(c.to_string()),
            other => other,
        })
    }

    fn check(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(m.to_string()));
        if self.schema_version != SCHEMA_VERSION {
            return bad(&format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", self.schema_version));
        }
        let plant = self.plant.build()?;
        let d = &self.data;
        if d.trajectories == 0 || d.samples == 0 {
            return bad("data.trajectories and data.samples must be at least 1");
        }
        if d.initial_lo.len() != plant.n() || d.initial_hi.len() != plant.n() || d.initial_lo.iter().zip(&d.initial_hi).any(|(l, h)| !(l <= h)) {
            return bad("data.initial_lo / initial_hi must be an n-dimensional box");
        }
        if self.identification.max_generators == 0 {
            return bad("identification.max_generators must be at least 1");
        }
        let o = &self.offline;
        if o.levels == 0 || o.oracle_levels == 0 {
            return bad("offline.levels and offline.oracle_levels must be at least 1");
        }
        if !(o.terminal_scale > 0.0 && o.terminal_scale.is_finite()) {
            return bad("offline.terminal_scale must be positive");
        }
        let on = &self.online;
        if on.x0.len() != plant.n() || on.x0.iter().any(|v| !v.is_finite()) {
            return bad("online.x0 must be a finite n-vector");
        }
        if on.horizon == 0 {
            return bad("online.horizon must be at least 1");
        }
        if on.cost()?.dim() != plant.m() {
            return bad("online.cost_r must be m × m");
        }
        if let TerminalMode::Gain(k) = on.terminal_mode()? {
            if k.dim() != (plant.m(), plant.n()) {
                return bad("online.gain must be m × n");
            }
        }
        if self.audit.runs == 0 {
            return bad("audit.runs must be at least 1");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_parses() {
        let cfg = ExperimentConfig::reference();
        assert_eq!(cfg.data.trajectories, 2);
        assert_eq!(cfg.data.samples, 10);
        assert_eq!(cfg.offline.levels, 15);
        assert_eq!(cfg.online.x0, vec![-2.0, 1.1]);
        let p = cfg.plant.build().unwrap();
        assert_eq!(p.ab().dim(), (2, 3));
    }

    #[test]
    fn wrong_schema_version() {
        let text = DEFAULT_CONFIG.replace("schema_version = 1", "schema_version = 7");
        assert!(matches!(ExperimentConfig::from_toml(&text), Err(HarnessError::Config(_))));
    }

    #[test]
    fn hrep_sets() {
        let s: SetSpec = toml::from_str("C = [[1.0], [-1.0]]\nd = [3.0, 3.0]").unwrap();
        assert_eq!(s.to_hpoly().unwrap().num_rows(), 2);
    }

    #[test]
    fn gain_mode_needs_gain() {
        let mut cfg = ExperimentConfig::reference();
        cfg.online.terminal_mode = TerminalModeSpec::Gain;
        assert!(cfg.validate().is_err());
        cfg.online.gain = Some(vec![vec![-0.47, -0.19]]);
        cfg.validate().unwrap();
    }
}

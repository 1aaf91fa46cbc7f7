//! Run configuration shared by every subcommand.
//!
//! A config is a single JSON document. Unknown keys are rejected at every level so
//! that typos fail loudly instead of silently falling back to defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::asymptotics::ClassifyOptions;
use crate::ensemble::{EnsembleSpec, MomentRegime};
use crate::error::{Error, Result};
use crate::negativity::Binning;
use crate::resolvent::{CubicGrid, FixedPointOptions};
use crate::sectors::{SectorGeometry, Symmetry, SymmetryKind};

pub const ENV_OUT: &str = "SYMNEG_OUT";
pub const ENV_WORKERS: &str = "SYMNEG_WORKERS";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub symmetry: SymmetryConfig,
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub ensemble: EnsembleConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub outputs: OutputConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymmetryConfig {
    pub kind: SymmetryKind,
    /// Local dimension for ℤ_R; ignored (and forced to 2) for U(1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<u32>,
}

/// `q_a` is either one charge or the keyword "all" for the unprojected state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ChargeSelection {
    Sector(i64),
    All(AllSectors),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AllSectors {
    All,
}

impl ChargeSelection {
    pub fn is_all(&self) -> bool {
        matches!(self, ChargeSelection::All(_))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub n_a1: usize,
    pub n_a2: usize,
    pub n_b: usize,
    /// Total charge Q of the whole system.
    #[serde(alias = "q")]
    pub total_charge: i64,
    pub q_a: ChargeSelection,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleConfig {
    pub samples: u64,
    pub seed: u64,
    /// 0 uses every available core.
    pub workers: usize,
    pub normalize: bool,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self { samples: 1000, seed: 1, workers: 1, normalize: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub binning: Binning,
    /// Points of the tabulated theory curves.
    pub grid_points: usize,
    /// Theory model name; chosen from the symmetry and `q_a` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theory: Option<String>,
    pub cubic_points_per_decade: usize,
    pub fixed_point: FixedPointOptions,
    pub tolerances: Tolerances,
    pub moments: MomentsConfig,
    pub phase: PhaseConfig,
    pub mutual_info: MutualInfoConfig,
    pub circuit: CircuitConfig,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            binning: Binning::default(),
            grid_points: 400,
            theory: None,
            cubic_points_per_decade: 120,
            fixed_point: FixedPointOptions::default(),
            tolerances: Tolerances::default(),
            moments: MomentsConfig::default(),
            phase: PhaseConfig::default(),
            mutual_info: MutualInfoConfig::default(),
            circuit: CircuitConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Largest accepted L1 distance between normalized MC and theory bin masses.
    pub l1: f64,
    /// Largest accepted KS distance; unchecked when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ks: Option<f64>,
    /// Relative tolerance on theory sum rules.
    pub sum_rule: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { l1: 0.05, ks: None, sum_rule: 1e-5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MomentsConfig {
    pub orders: Vec<u32>,
    /// Leading-order regime to compare against; the exact finite-size moments when
    /// absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regime: Option<MomentRegime>,
}

impl Default for MomentsConfig {
    fn default() -> Self {
        Self { orders: vec![2, 3], regime: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhaseConfig {
    pub nu_a: f64,
    pub nu_b: f64,
    pub r1_points: usize,
    pub ratio_points: usize,
    /// Largest N_B/N_A on the vertical axis.
    pub ratio_max: f64,
    pub classify: ClassifyOptions,
}

impl Default for PhaseConfig {
    fn default() -> Self {
        Self { nu_a: 0.5, nu_b: 0.5, r1_points: 50, ratio_points: 50, ratio_max: 2.0, classify: ClassifyOptions::default() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MutualInfoConfig {
    /// N_B values to tabulate; 1..=2N_A when empty.
    pub n_b: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CircuitConfig {
    pub shots: u64,
    /// Random inputs checked against the reference projector.
    pub fidelity_inputs: u64,
}

impl Default for CircuitConfig {
    fn default() -> Self {
        Self { shots: 10_000, fidelity_inputs: 10 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

/// Units of reported entropies.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum LogBase {
    #[default]
    #[serde(rename = "2")]
    Two,
    #[serde(rename = "e")]
    E,
}

impl LogBase {
    pub fn from_nats(self, nats: f64) -> f64 {
        match self {
            LogBase::Two => nats / std::f64::consts::LN_2,
            LogBase::E => nats,
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            LogBase::Two => "bits",
            LogBase::E => "nats",
        }
    }
}

impl std::str::FromStr for LogBase {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "2" => Ok(LogBase::Two),
            "e" => Ok(LogBase::E),
            _ => Err(Error::Invalid(format!("log base must be 2 or e, got `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub formats: Vec<OutputFormat>,
    pub log_base: LogBase,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { directory: PathBuf::from("symneg-out"), formats: vec![OutputFormat::Csv, OutputFormat::Json], log_base: LogBase::Two }
    }
}

impl OutputConfig {
    pub fn wants(&self, f: OutputFormat) -> bool {
        self.formats.contains(&f)
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)
            .map_err(|e| Error::Invalid(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Invalid(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// A minimal ℤ_R / U(1) configuration, mostly for tests.
    pub fn new(symmetry: Symmetry, n_a1: usize, n_a2: usize, n_b: usize, total_charge: i64, q_a: ChargeSelection) -> Self {
        let r = (symmetry.kind() == SymmetryKind::Zr).then(|| symmetry.r());
        Self {
            symmetry: SymmetryConfig { kind: symmetry.kind(), r },
            geometry: GeometryConfig { n_a1, n_a2, n_b, total_charge, q_a },
            ensemble: EnsembleConfig::default(),
            analysis: AnalysisConfig::default(),
            outputs: OutputConfig::default(),
        }
    }

    /// Apply `SYMNEG_OUT` and `SYMNEG_WORKERS` if set.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(dir) = std::env::var(ENV_OUT) {
            if !dir.is_empty() {
                self.outputs.directory = PathBuf::from(dir);
            }
        }
        if let Ok(w) = std::env::var(ENV_WORKERS) {
            self.ensemble.workers = w
                .trim()
                .parse()
                .map_err(|_| Error::Invalid(format!("{ENV_WORKERS} must be a non-negative integer, got `{w}`")))?;
        }
        Ok(())
    }

    pub fn symmetry(&self) -> Result<Symmetry> {
        match self.symmetry.kind {
            SymmetryKind::U1 => Ok(Symmetry::u1()),
            SymmetryKind::Zr => {
                let r = self
                    .symmetry
                    .r
                    .ok_or_else(|| Error::Invalid("symmetry.r is required for kind \"zr\"".into()))?;
                Symmetry::zr(r)
            }
        }
    }

    /// The block geometry. With `q_a = "all"` this is the first nonempty sector,
    /// which the unprojected paths use only as a template.
    pub fn geometry(&self) -> Result<SectorGeometry> {
        let sym = self.symmetry()?;
        let g = &self.geometry;
        let hint = |e: Error| {
            Error::Geometry(format!(
                "{e} (N_A1 = {}, N_A2 = {}, N_B = {}, Q = {}); pick charges with nonempty A and B sectors",
                g.n_a1, g.n_a2, g.n_b, g.total_charge
            ))
        };
        match g.q_a {
            ChargeSelection::Sector(q) => {
                SectorGeometry::new(sym, g.n_a1, g.n_a2, g.n_b, g.total_charge, q).map_err(hint)
            }
            ChargeSelection::All(_) => sym
                .charges(g.n_a1 + g.n_a2)
                .into_iter()
                .find_map(|q| SectorGeometry::new(sym, g.n_a1, g.n_a2, g.n_b, g.total_charge, q).ok())
                .ok_or_else(|| hint(Error::EmptySector { what: "every q_A".into() })),
        }
    }

    pub fn workers(&self) -> usize {
        if self.ensemble.workers == 0 {
            std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
        } else {
            self.ensemble.workers
        }
    }

    pub fn ensemble_spec(&self) -> EnsembleSpec {
        EnsembleSpec::new(self.ensemble.samples, self.ensemble.seed)
            .workers(self.workers())
            .normalize(self.ensemble.normalize)
    }

    pub fn cubic_grid(&self) -> CubicGrid {
        CubicGrid::Auto { points_per_decade: self.analysis.cubic_points_per_decade }
    }

    /// Theory model used when none is configured.
    pub fn theory_name(&self) -> String {
        if let Some(t) = &self.analysis.theory {
            return t.clone();
        }
        match (self.symmetry.kind, self.geometry.q_a.is_all()) {
            (SymmetryKind::Zr, false) => "zr-semicircle",
            (SymmetryKind::U1, false) => "semicircle",
            (SymmetryKind::Zr, true) => "unprojected-zr",
            (SymmetryKind::U1, true) => "unprojected-fixed-point",
        }
        .to_string()
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry()?;
        let a = &self.analysis;
        if self.ensemble.samples == 0 {
            return Err(Error::Invalid("ensemble.samples must be at least 1".into()));
        }
        if a.grid_points < 2 {
            return Err(Error::Invalid("analysis.grid_points must be at least 2".into()));
        }
        if !(a.tolerances.l1 > 0.0) {
            return Err(Error::Invalid("analysis.tolerances.l1 must be positive".into()));
        }
        if a.moments.orders.iter().any(|&n| n < 1) {
            return Err(Error::Invalid("analysis.moments.orders must be at least 1".into()));
        }
        let p = &a.phase;
        if !(0.0..=1.0).contains(&p.nu_a) || !(0.0..=1.0).contains(&p.nu_b) {
            return Err(Error::Invalid("analysis.phase fillings must lie in [0, 1]".into()));
        }
        if p.r1_points < 2 || p.ratio_points < 2 || !(p.ratio_max > 0.0) {
            return Err(Error::Invalid("analysis.phase needs at least a 2x2 grid and ratio_max > 0".into()));
        }
        if self.outputs.formats.is_empty() {
            return Err(Error::Invalid("outputs.formats must name at least one of csv, json".into()));
        }
        Ok(())
    }
}

//! The subcommands behind the `symneg` binary.
//!
//! Every command takes a validated [`RunConfig`], writes its files into the
//! configured output directory together with `manifest.json`, and returns an
//! [`Outcome`] the caller can print.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use faer::c64;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{mutual_information, phase_scan, MutualInfoInput, PhaseDiagramGrid, PhaseTemplate, ThermoPoint};
use crate::circuits::{
    measure_charge_u1, measure_charge_zr, project_reference, run_shots, u1_rounds, write_shot_csv, Round, StateVector,
    MAX_STATE_DIM,
};
use crate::config::{GeometryConfig, LogBase, OutputFormat, RunConfig};
use crate::ensemble::{
    block_moments, ensemble_map_blocks, exact_moment, mean_stderr, predicted_moment, renyi_moment, sample_unprojected,
};
use crate::error::{Error, Result};
use crate::linalg::hermitian_eigenvalues;
use crate::negativity::{assemble_full, partial_transpose_dense, pt_spectrum, Component, NegativitySpectrum, PtSpectrum};
use crate::resolvent::{ComponentTag, SpectralModel, TheoryRegistry, TheorySpectrum};
use crate::rng::sample_rng;
use crate::sectors::{SectorGeometry, SymmetryKind};

pub const MANIFEST: &str = "manifest.json";

/// Largest full A space the unprojected sampler will diagonalize.
const MAX_UNPROJECTED_DIM: usize = 4096;

/// `v<crate version>-g<git describe>` of the build.
pub fn version() -> String {
    let describe = env!("SYMNEG_GIT_DESCRIBE");
    if describe.is_empty() {
        format!("v{}", env!("CARGO_PKG_VERSION"))
    } else {
        format!("v{}-g{}", env!("CARGO_PKG_VERSION"), describe)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    SampleSpectrum,
    TheorySpectrum,
    Compare,
    PhaseDiagram,
    Moments,
    MutualInfo,
    CircuitDemo,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::SampleSpectrum,
        Command::TheorySpectrum,
        Command::Compare,
        Command::PhaseDiagram,
        Command::Moments,
        Command::MutualInfo,
        Command::CircuitDemo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::SampleSpectrum => "sample-spectrum",
            Command::TheorySpectrum => "theory-spectrum",
            Command::Compare => "compare",
            Command::PhaseDiagram => "phase-diagram",
            Command::Moments => "moments",
            Command::MutualInfo => "mutual-info",
            Command::CircuitDemo => "circuit-demo",
        }
    }
}

/// What a command produced.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    /// False when a comparison or check fell outside its tolerance.
    pub passed: bool,
    /// Human-readable report lines.
    pub lines: Vec<String>,
}

/// Resolved config, version and seed of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config: RunConfig,
    pub files: Vec<String>,
}

pub fn run(cmd: Command, cfg: &RunConfig) -> Result<Outcome> {
    cfg.validate()?;
    match cmd {
        Command::SampleSpectrum => cmd_sample_spectrum(cfg),
        Command::TheorySpectrum => cmd_theory_spectrum(cfg),
        Command::Compare => cmd_compare(cfg),
        Command::PhaseDiagram => cmd_phase_diagram(cfg),
        Command::Moments => cmd_moments(cfg),
        Command::MutualInfo => cmd_mutual_info(cfg),
        Command::CircuitDemo => cmd_circuit_demo(cfg),
    }
}

struct OutputDir<'a> {
    cfg: &'a RunConfig,
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl<'a> OutputDir<'a> {
    fn create(cfg: &'a RunConfig) -> Result<Self> {
        let dir = cfg.outputs.directory.clone();
        fs::create_dir_all(&dir)
            .map_err(|e| Error::Invalid(format!("cannot create output directory {}: {e}", dir.display())))?;
        Ok(Self { cfg, dir, files: Vec::new() })
    }

    fn write(&mut self, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
        let path = self.dir.join(name);
        let mut w = BufWriter::new(File::create(&path)?);
        f(&mut w)?;
        w.flush()?;
        self.files.push(path);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        if !self.cfg.outputs.wants(OutputFormat::Json) {
            return Ok(());
        }
        self.write(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)?;
            Ok(())
        })
    }

    fn csv(&mut self, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
        if !self.cfg.outputs.wants(OutputFormat::Csv) {
            return Ok(());
        }
        self.write(name, f)
    }

    fn finish(mut self, cmd: Command, passed: bool, lines: Vec<String>) -> Result<Outcome> {
        let mut config = self.cfg.clone();
        config.ensemble.workers = self.cfg.workers();
        let names = self
            .files
            .iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect();
        let manifest = Manifest {
            command: cmd.name().into(),
            version: version(),
            seed: self.cfg.ensemble.seed,
            config,
            files: names,
        };
        let path = self.dir.join(MANIFEST);
        let mut w = BufWriter::new(File::create(&path)?);
        serde_json::to_writer_pretty(&mut w, &manifest)?;
        writeln!(w)?;
        w.flush()?;
        self.files.push(path);
        Ok(Outcome { files: self.files, passed, lines })
    }
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(dir.join(MANIFEST))?;
    Ok(serde_json::from_str(&text)?)
}

/// Rows of `T` as CSV with a header taken from the field names.
pub fn write_table<T: Serialize, W: Write>(w: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_table<T: DeserializeOwned, R: Read>(r: R) -> Result<Vec<T>> {
    csv::Reader::from_reader(r).deserialize().map(|r| r.map_err(Error::from)).collect()
}

fn worker_pool(cfg: &RunConfig) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers())
        .build()
        .map_err(|e| Error::Invalid(format!("worker pool: {e}")))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    fn of(values: &[f64]) -> Self {
        let (mean, stderr) = mean_stderr(values);
        Self { mean, stderr }
    }

    fn scaled(self, f: impl Fn(f64) -> f64) -> Self {
        Self { mean: f(self.mean), stderr: f(self.stderr) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub order: u32,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub symmetry: String,
    pub geometry: GeometryConfig,
    pub samples: u64,
    pub seed: u64,
    pub normalized: bool,
    /// False for the unprojected state, whose eigenvalues are all filed under P2.
    pub components_resolved: bool,
    pub eigenvalues_per_sample: f64,
    pub zero_modes_per_sample: f64,
    pub negativity: Estimate,
    pub log_negativity: Estimate,
    pub log_negativity_nats: Estimate,
    pub log_unit: String,
    pub histogram_negativity: f64,
    pub histogram_bias_bound: f64,
    pub moments: Vec<MomentEstimate>,
}

/// Pooled spectra and per-sample statistics of an ensemble run.
pub struct SampleRun {
    pub spectrum: NegativitySpectrum,
    pub summary: SampleSummary,
}


fn unprojected_one(geom: &SectorGeometry, index: u64, cfg: &RunConfig) -> Result<(PtSpectrum, Vec<f64>)> {
    let mut blocks = sample_unprojected(geom, index, cfg.ensemble.seed)?;
    if cfg.ensemble.normalize {
        let tr: f64 = blocks.iter().map(|b| b.trace()).sum();
        for b in &mut blocks {
            b.rho = &b.rho * faer::Scale(c64::new(1.0 / tr, 0.0));
        }
    }
    let r = geom.symmetry().r() as usize;
    let (d1, d2) = (r.pow(geom.n_a1() as u32), r.pow(geom.n_a2() as u32));
    let full = assemble_full(&blocks)?;
    let pt = partial_transpose_dense(full.as_ref(), d1, d2)?;
    let eigenvalues = hermitian_eigenvalues(pt.as_ref())?.into_iter().map(|x| (x, Component::P2)).collect();
    let moments = cfg
        .analysis
        .moments
        .orders
        .iter()
        .map(|&n| blocks.iter().map(|b| renyi_moment(b, n)).sum::<Result<f64>>())
        .collect::<Result<Vec<_>>>()?;
    Ok((PtSpectrum { eigenvalues, zero_modes: 0 }, moments))
}

/// Draw the configured ensemble and pool its partial-transpose spectra.
pub fn sample_spectrum(cfg: &RunConfig) -> Result<SampleRun> {
    let geom = cfg.geometry()?;
    let orders = &cfg.analysis.moments.orders;
    let results: Vec<(PtSpectrum, Vec<f64>)> = if cfg.geometry.q_a.is_all() {
        let d = (geom.symmetry().r() as usize).checked_pow(geom.n_a() as u32).unwrap_or(usize::MAX);
        if d > MAX_UNPROJECTED_DIM {
            return Err(Error::Overflow(format!(
                "unprojected A space of dimension {d} exceeds {MAX_UNPROJECTED_DIM}; choose a single q_a"
            )));
        }
        let pool = worker_pool(cfg)?;
        pool.install(|| {
            (0..cfg.ensemble.samples)
                .into_par_iter()
                .map(|i| unprojected_one(&geom, i, cfg).map_err(|e| Error::Sample { index: i, source: Box::new(e) }))
                .collect::<Result<Vec<_>>>()
        })?
    } else {
        let normalize = cfg.ensemble.normalize;
        ensemble_map_blocks(&geom, &cfg.ensemble_spec(), |block, rho| {
            Ok((pt_spectrum(rho)?, block_moments(block, normalize, orders)?))
        })?
    };
    let neg: Vec<f64> = results.iter().map(|r| r.0.negativity()).collect();
    let logneg: Vec<f64> = results.iter().map(|r| r.0.log_negativity()).collect();
    let moments = orders
        .iter()
        .enumerate()
        .map(|(k, &order)| {
            let e = Estimate::of(&results.iter().map(|r| r.1[k]).collect::<Vec<_>>());
            MomentEstimate { order, mean: e.mean, stderr: e.stderr }
        })
        .collect();
    let spectra: Vec<PtSpectrum> = results.into_iter().map(|r| r.0).collect();
    let per_sample = spectra.iter().map(|s| s.eigenvalues.len()).sum::<usize>() as f64 / spectra.len() as f64;
    let spectrum = NegativitySpectrum::pooled(&spectra, &cfg.analysis.binning, Some(geom))?;
    let base = cfg.outputs.log_base;
    let logneg_nats = Estimate::of(&logneg);
    let summary = SampleSummary {
        symmetry: geom.symmetry().to_string(),
        geometry: cfg.geometry,
        samples: cfg.ensemble.samples,
        seed: cfg.ensemble.seed,
        normalized: cfg.ensemble.normalize,
        components_resolved: !cfg.geometry.q_a.is_all(),
        eigenvalues_per_sample: per_sample,
        zero_modes_per_sample: spectrum.zero_modes,
        negativity: Estimate::of(&neg),
        log_negativity: logneg_nats.scaled(|x| base.from_nats(x)),
        log_negativity_nats: logneg_nats,
        log_unit: base.unit().into(),
        histogram_negativity: spectrum.histogram.negativity(),
        histogram_bias_bound: spectrum.histogram.negativity_bias_bound(),
        moments,
    };
    Ok(SampleRun { spectrum, summary })
}

pub fn cmd_sample_spectrum(cfg: &RunConfig) -> Result<Outcome> {
    let run = sample_spectrum(cfg)?;
    let mut out = OutputDir::create(cfg)?;
    out.csv("histogram.csv", |w| run.spectrum.histogram.write_csv(w))?;
    out.json("summary.json", &run.summary)?;
    let s = &run.summary;
    let lines = vec![
        format!("{} samples, {:.1} eigenvalues per sample", s.samples, s.eigenvalues_per_sample),
        format!("negativity      = {:.6e} ± {:.2e}", s.negativity.mean, s.negativity.stderr),
        format!("log-negativity  = {:.6e} ± {:.2e} {}", s.log_negativity.mean, s.log_negativity.stderr, s.log_unit),
        format!("histogram       = {:.6e} (bias ≤ {:.2e})", s.histogram_negativity, s.histogram_bias_bound),
    ];
    out.finish(Command::SampleSpectrum, true, lines)
}

/// Theory prediction selected by the config.
pub fn theory_spectrum(cfg: &RunConfig) -> Result<TheorySpectrum> {
    let reg = TheoryRegistry::default()
        .with_cubic_grid(cfg.cubic_grid())
        .with_fixed_point(cfg.analysis.fixed_point, cfg.analysis.grid_points);
    reg.get(&cfg.theory_name())?.spectrum(&cfg.geometry()?)
}

/// Tabulated theory curves, columns (xi, density, component).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub xi: f64,
    pub density: f64,
    pub component: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentSummary {
    pub component: String,
    pub normalization: f64,
    pub mass: f64,
    pub trace: f64,
    pub first_moment: f64,
    pub negativity: f64,
    pub mass_error: f64,
    pub trace_error: f64,
    pub support: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheorySummary {
    pub model: String,
    pub components: Vec<ComponentSummary>,
    pub log_negativity: f64,
    pub log_unit: String,
    pub sum_rules_hold: bool,
    pub warnings: Vec<String>,
    pub flagged_intervals: Vec<(f64, f64)>,
}

fn reported_models(t: &TheorySpectrum) -> Vec<&SpectralModel> {
    let mut v: Vec<&SpectralModel> = t.p1.iter().chain(t.p2.iter()).collect();
    if v.is_empty() {
        v.extend(t.components.iter().filter(|m| matches!(m.component, ComponentTag::DeltaQ(_))));
    }
    v.push(&t.total);
    v
}

fn summarize_theory(t: &TheorySpectrum, cfg: &RunConfig) -> TheorySummary {
    let tol = cfg.analysis.tolerances.sum_rule;
    let components: Vec<ComponentSummary> = reported_models(t)
        .into_iter()
        .map(|m| {
            let (mass_error, trace_error) = m.sum_rule_errors();
            ComponentSummary {
                component: m.component.to_string(),
                normalization: m.normalization,
                mass: m.mass(),
                trace: m.trace,
                first_moment: m.first_moment(),
                negativity: m.negativity(),
                mass_error,
                trace_error,
                support: m.support.clone(),
            }
        })
        .collect();
    let total = components.last().expect("total is always reported");
    let logneg = (total.first_moment + 2.0 * total.negativity).ln();
    let sum_rules_hold = components.iter().all(|c| c.mass_error <= tol && c.trace_error <= tol);
    let mut warnings = t.total.warnings.clone();
    if !sum_rules_hold {
        warnings.push(format!("a sum rule is violated beyond {tol:e}"));
    }
    TheorySummary {
        model: t.model.clone(),
        components,
        log_negativity: cfg.outputs.log_base.from_nats(logneg),
        log_unit: cfg.outputs.log_base.unit().into(),
        sum_rules_hold,
        warnings,
        flagged_intervals: t.diagnostics.flagged_intervals.clone(),
    }
}

pub fn cmd_theory_spectrum(cfg: &RunConfig) -> Result<Outcome> {
    let t = theory_spectrum(cfg)?;
    let grid = t.total.default_grid(cfg.analysis.grid_points);
    let pool = worker_pool(cfg)?;
    let rows: Vec<CurveRow> = pool.install(|| {
        reported_models(&t)
            .into_iter()
            .flat_map(|m| {
                let tag = m.component.to_string();
                grid.par_iter()
                    .map(|&xi| CurveRow { xi, density: m.density(xi), component: tag.clone() })
                    .collect::<Vec<_>>()
            })
            .collect()
    });
    let summary = summarize_theory(&t, cfg);
    let mut out = OutputDir::create(cfg)?;
    out.csv("theory.csv", |w| write_table(w, &rows))?;
    out.json("theory.json", &summary)?;
    let mut lines = vec![format!("model {}", summary.model)];
    for c in &summary.components {
        lines.push(format!(
            "{:>8}: mass {:.6e} (expected {:.6e}), negativity {:.6e}",
            c.component, c.mass, c.normalization, c.negativity
        ));
    }
    lines.extend(summary.warnings.iter().map(|w| format!("warning: {w}")));
    out.finish(Command::TheorySpectrum, true, lines)
}

/// One component of a theory-vs-MC comparison. Distances are between the bin
/// masses of both sides, each normalized to unit mass over the binned range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub component: String,
    pub l1: Option<f64>,
    pub ks: Option<f64>,
    /// Binned MC eigenvalues per sample.
    pub mc_mass: f64,
    /// Theory mass inside the binned range.
    pub theory_mass: Option<f64>,
    pub theory_normalization: Option<f64>,
    pub pass: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub model: String,
    pub samples: u64,
    pub l1_tolerance: f64,
    pub ks_tolerance: Option<f64>,
    pub rows: Vec<ComparisonRow>,
    /// Decided by the total row.
    pub pass: bool,
    pub warnings: Vec<String>,
}

impl ComparisonReport {
    pub fn row(&self, component: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.component == component)
    }
}

/// Histogram and theory bin masses side by side.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlayRow {
    pub bin_left: f64,
    pub bin_right: f64,
    pub mc_density: f64,
    pub theory_density: Option<f64>,
    pub component: String,
}

/// L1 and KS distances between two sets of bin masses after normalizing each.
pub fn binned_distances(a: &[f64], b: &[f64]) -> Option<(f64, f64)> {
    let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
    if a.len() != b.len() || !(sa > 0.0) || !(sb > 0.0) {
        return None;
    }
    let (mut l1, mut ks, mut ca, mut cb) = (0.0f64, 0.0f64, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        l1 += (x / sa - y / sb).abs();
        ca += x / sa;
        cb += y / sb;
        ks = ks.max((ca - cb).abs());
    }
    Some((l1, ks))
}

/// Compare a pooled histogram with a theory prediction on the histogram's bins.
pub fn compare_spectra(
    spectrum: &NegativitySpectrum,
    theory: &TheorySpectrum,
    l1_tol: f64,
    ks_tol: Option<f64>,
) -> (ComparisonReport, Vec<OverlayRow>) {
    let h = &spectrum.histogram;
    let edges = &h.edges;
    let mut rows = Vec::new();
    let mut overlay = Vec::new();
    let mut warnings = theory.total.warnings.clone();
    for (name, c) in [("P1", Some(Component::P1)), ("P2", Some(Component::P2)), ("total", None)] {
        let density = h.density(c);
        let mc: Vec<f64> = (0..h.bins()).map(|i| density[i] * h.width(i)).collect();
        let model = theory.component(c);
        let th = model.map(|m| m.bin_masses(edges));
        let dist = th.as_ref().and_then(|t| binned_distances(&mc, t));
        let pass = dist.map(|(l1, ks)| l1 < l1_tol && ks_tol.is_none_or(|k| ks < k));
        for i in 0..h.bins() {
            overlay.push(OverlayRow {
                bin_left: edges[i],
                bin_right: edges[i + 1],
                mc_density: density[i],
                theory_density: th.as_ref().map(|t| t[i] / h.width(i)),
                component: name.into(),
            });
        }
        if let (Some(m), Some(t)) = (model, th.as_ref()) {
            let inside: f64 = t.iter().sum();
            if m.normalization > 0.0 && inside < 0.99 * m.normalization {
                warnings.push(format!(
                    "{name}: {:.1}% of the theory mass lies outside the sampled range",
                    100.0 * (1.0 - inside / m.normalization)
                ));
            }
        } else if model.is_none() {
            warnings.push(format!("{name}: the {} model does not resolve this component", theory.model));
        }
        rows.push(ComparisonRow {
            component: name.into(),
            l1: dist.map(|d| d.0),
            ks: dist.map(|d| d.1),
            mc_mass: mc.iter().sum(),
            theory_mass: th.as_ref().map(|t| t.iter().sum()),
            theory_normalization: model.map(|m| m.normalization),
            pass,
        });
    }
    if !theory.diagnostics.flagged_intervals.is_empty() {
        warnings.push(format!(
            "cubic root tracking disagreed on {} interval(s)",
            theory.diagnostics.flagged_intervals.len()
        ));
    }
    let pass = rows.last().and_then(|r| r.pass).unwrap_or(false);
    let report = ComparisonReport {
        model: theory.model.clone(),
        samples: spectrum.samples as u64,
        l1_tolerance: l1_tol,
        ks_tolerance: ks_tol,
        rows,
        pass,
        warnings,
    };
    (report, overlay)
}

pub fn compare(cfg: &RunConfig) -> Result<(ComparisonReport, Vec<OverlayRow>)> {
    let run = sample_spectrum(cfg)?;
    let theory = theory_spectrum(cfg)?;
    let tol = &cfg.analysis.tolerances;
    Ok(compare_spectra(&run.spectrum, &theory, tol.l1, tol.ks))
}

pub fn cmd_compare(cfg: &RunConfig) -> Result<Outcome> {
    let (report, overlay) = compare(cfg)?;
    let mut out = OutputDir::create(cfg)?;
    out.csv("comparison.csv", |w| write_table(w, &report.rows))?;
    out.csv("overlay.csv", |w| write_table(w, &overlay))?;
    out.json("comparison.json", &report)?;
    let fmt = |x: Option<f64>| x.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
    let mut lines = vec![format!("model {} vs {} samples", report.model, report.samples)];
    for r in &report.rows {
        lines.push(format!("{:>6}: L1 {:>8}  KS {:>8}", r.component, fmt(r.l1), fmt(r.ks)));
    }
    lines.extend(report.warnings.iter().map(|w| format!("warning: {w}")));
    lines.push(format!("{} (L1 tolerance {})", if report.pass { "PASS" } else { "FAIL" }, report.l1_tolerance));
    out.finish(Command::Compare, report.pass, lines)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseSummary {
    pub template: PhaseTemplate,
    pub r1_points: usize,
    pub ratio_points: usize,
    pub counts: BTreeMap<String, usize>,
}

fn midpoints(n: usize, hi: f64) -> Vec<f64> {
    (0..n).map(|i| hi * (i as f64 + 0.5) / n as f64).collect()
}

pub fn phase_diagram(cfg: &RunConfig) -> Result<PhaseDiagramGrid> {
    let p = &cfg.analysis.phase;
    let template = PhaseTemplate { nu_a: p.nu_a, nu_b: p.nu_b };
    let r1 = midpoints(p.r1_points, 1.0);
    let ratio = midpoints(p.ratio_points, p.ratio_max);
    worker_pool(cfg)?.install(|| phase_scan(&r1, &ratio, template, &p.classify))
}

pub fn cmd_phase_diagram(cfg: &RunConfig) -> Result<Outcome> {
    let grid = phase_diagram(cfg)?;
    let mut counts = BTreeMap::new();
    for c in &grid.cells {
        *counts.entry(c.label.to_string()).or_insert(0) += 1;
    }
    let summary = PhaseSummary {
        template: grid.template,
        r1_points: grid.r1.len(),
        ratio_points: grid.nb_over_na.len(),
        counts,
    };
    let mut out = OutputDir::create(cfg)?;
    out.csv("phase.csv", |w| grid.write_csv(w))?;
    out.json("phase.json", &summary)?;
    let mut lines = vec![format!("{}x{} cells", summary.r1_points, summary.ratio_points)];
    lines.extend(summary.counts.iter().map(|(k, v)| format!("{k:>22}: {v}")));
    out.finish(Command::PhaseDiagram, true, lines)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub order: u32,
    pub mc_mean: f64,
    pub mc_stderr: f64,
    pub predicted: f64,
    /// "exact" or the leading-order regime used.
    pub prediction: String,
    pub z_score: f64,
    pub warning: Option<String>,
}

pub fn moments_table(cfg: &RunConfig) -> Result<Vec<MomentRow>> {
    if cfg.geometry.q_a.is_all() {
        return Err(Error::Invalid("moments need a single q_a sector".into()));
    }
    let geom = cfg.geometry()?;
    let orders = &cfg.analysis.moments.orders;
    let normalize = cfg.ensemble.normalize;
    let values = ensemble_map_blocks(&geom, &cfg.ensemble_spec(), |block, _| block_moments(block, normalize, orders))?;
    let (la, lb) = (geom.l_qa()? as f64, geom.l_qb()? as f64);
    orders
        .iter()
        .enumerate()
        .map(|(k, &order)| {
            let e = Estimate::of(&values.iter().map(|v| v[k]).collect::<Vec<_>>());
            let (predicted, prediction, warning) = match cfg.analysis.moments.regime {
                Some(regime) => {
                    let p = predicted_moment(&geom, order, regime)?;
                    let name = serde_json::to_value(regime)?.as_str().unwrap_or_default().to_string();
                    (p.value, name, p.warning)
                }
                None => match exact_moment(la, lb, order) {
                    Some(v) => (v, "exact".to_string(), None),
                    None => {
                        return Err(Error::Invalid(format!(
                            "no exact moment of order {order}; set analysis.moments.regime"
                        )))
                    }
                },
            };
            Ok(MomentRow {
                order,
                mc_mean: e.mean,
                mc_stderr: e.stderr,
                predicted,
                prediction,
                z_score: (e.mean - predicted) / e.stderr,
                warning,
            })
        })
        .collect()
}

pub fn cmd_moments(cfg: &RunConfig) -> Result<Outcome> {
    let rows = moments_table(cfg)?;
    let mut out = OutputDir::create(cfg)?;
    out.csv("moments.csv", |w| write_table(w, &rows))?;
    out.json("moments.json", &rows)?;
    let lines = rows
        .iter()
        .map(|r| {
            format!(
                "n={}: MC {:.6e} ± {:.2e}, {} {:.6e}, z = {:+.2}",
                r.order, r.mc_mean, r.mc_stderr, r.prediction, r.predicted, r.z_score
            )
        })
        .collect();
    out.finish(Command::Moments, true, lines)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MutualInfoRow {
    pub n_a1: usize,
    pub n_a2: usize,
    pub n_b: usize,
    pub value: f64,
    pub unit: String,
    pub regime: String,
    pub boundary: bool,
    pub clamped: bool,
}

pub fn mutual_info_table(cfg: &RunConfig) -> Result<(Vec<MutualInfoRow>, Vec<String>)> {
    let geom = cfg.geometry()?;
    let g = &cfg.geometry;
    let n_a = g.n_a1 + g.n_a2;
    let n_bs: Vec<usize> =
        if cfg.analysis.mutual_info.n_b.is_empty() { (1..=2 * n_a).collect() } else { cfg.analysis.mutual_info.n_b.clone() };
    let base: LogBase = cfg.outputs.log_base;
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for n_b in n_bs {
        let mi = match geom.symmetry().kind() {
            SymmetryKind::Zr => SectorGeometry::new(geom.symmetry(), g.n_a1, g.n_a2, n_b, geom.total_charge(), geom.q_a())
                .and_then(|h| mutual_information(MutualInfoInput::Zr(&h))),
            SymmetryKind::U1 => {
                // Fillings of the configured geometry are held fixed as N_B varies.
                let nu_b = geom.q_b() as f64 / g.n_b.max(1) as f64;
                let q_a = match g.q_a {
                    crate::config::ChargeSelection::Sector(q) => q,
                    crate::config::ChargeSelection::All(_) => {
                        (g.total_charge as f64 * n_a as f64 / (n_a + g.n_b) as f64).round() as i64
                    }
                };
                let q_b = (nu_b * n_b as f64).round() as i64;
                ThermoPoint::from_sizes(g.n_a1, g.n_a2, n_b, q_a, q_b)
                    .and_then(|p| mutual_information(MutualInfoInput::U1(&p)))
            }
        };
        match mi {
            Ok(mi) => rows.push(MutualInfoRow {
                n_a1: g.n_a1,
                n_a2: g.n_a2,
                n_b,
                value: base.from_nats(mi.value),
                unit: base.unit().into(),
                regime: serde_json::to_value(mi.regime)?.as_str().unwrap_or_default().to_string(),
                boundary: mi.boundary,
                clamped: mi.clamped,
            }),
            Err(e) => warnings.push(format!("N_B = {n_b}: {e}")),
        }
    }
    Ok((rows, warnings))
}

pub fn cmd_mutual_info(cfg: &RunConfig) -> Result<Outcome> {
    let (rows, warnings) = mutual_info_table(cfg)?;
    let mut out = OutputDir::create(cfg)?;
    out.csv("mutual_info.csv", |w| write_table(w, &rows))?;
    out.json("mutual_info.json", &serde_json::json!({ "rows": rows, "warnings": warnings }))?;
    let mut lines: Vec<String> = rows
        .iter()
        .map(|r| format!("N_B={:>3}: I = {:.6} {} ({}{})", r.n_b, r.value, r.unit, r.regime, if r.clamped { ", clamped" } else { "" }))
        .collect();
    lines.extend(warnings.iter().map(|w| format!("warning: {w}")));
    out.finish(Command::MutualInfo, true, lines)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BornRow {
    pub charge: i64,
    pub expected: f64,
    pub observed: u64,
    pub z_score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitReport {
    pub symmetry: String,
    pub n_a: usize,
    pub n_b: usize,
    pub rounds: usize,
    /// Readouts of the first checked input.
    pub example_rounds: Vec<Round>,
    pub example_charge: i64,
    pub fidelities: Vec<f64>,
    pub min_fidelity: f64,
    pub max_probability_error: f64,
    pub shots: u64,
    pub born: Vec<BornRow>,
    pub pass: bool,
}

/// Inputs of the fidelity check draw from their own key so they never share a
/// stream with the shots.
fn input_rng(seed: u64, i: u64) -> rand_chacha::ChaCha8Rng {
    sample_rng(seed ^ 0x9e37_79b9_7f4a_7c15, i)
}

pub fn circuit_demo(cfg: &RunConfig) -> Result<(CircuitReport, StateVector, Vec<crate::circuits::MeasurementRecord>)> {
    let sym = cfg.symmetry()?;
    let g = &cfg.geometry;
    let (n_a, n_b) = (g.n_a1 + g.n_a2, g.n_b);
    let d = sym.r();
    let total = (d as u128).checked_pow((n_a + n_b + 1) as u32).unwrap_or(u128::MAX);
    if total > MAX_STATE_DIM as u128 {
        return Err(Error::Overflow(format!("{} sites plus ancilla exceed the state-vector limit", n_a + n_b)));
    }
    let dims = vec![d; n_a + n_b];
    let b_sites: Vec<usize> = (n_a..n_a + n_b).collect();
    let measure = |s: &StateVector, rng: &mut rand_chacha::ChaCha8Rng| match sym.kind() {
        SymmetryKind::Zr => measure_charge_zr(s, &b_sites, d, None, rng),
        SymmetryKind::U1 => measure_charge_u1(s, &b_sites, &[], rng),
    };
    let inputs = cfg.analysis.circuit.fidelity_inputs.max(1);
    let mut fidelities = Vec::new();
    let mut prob_err = 0f64;
    let mut example = None;
    let mut first_input = None;
    for i in 0..inputs {
        let mut rng = input_rng(cfg.ensemble.seed, i);
        let state = StateVector::random(dims.clone(), &mut rng)?;
        let rec = measure(&state, &mut rng)?;
        let (reference, p) = project_reference(&state, &b_sites, rec.final_charge, sym)?;
        fidelities.push(rec.post_state.fidelity(&reference)?);
        prob_err = prob_err.max((rec.probability() - p).abs());
        if i == 0 {
            example = Some(rec);
            first_input = Some(state);
        }
    }
    let example = example.expect("at least one input");
    let state = first_input.expect("at least one input");
    let shots = cfg.analysis.circuit.shots;
    let records = if shots > 0 {
        worker_pool(cfg)?.install(|| run_shots(&state, &b_sites, sym, shots, cfg.ensemble.seed))?
    } else {
        Vec::new()
    };
    let mut counts: BTreeMap<i64, u64> = BTreeMap::new();
    for r in &records {
        *counts.entry(r.final_charge).or_insert(0) += 1;
    }
    let charges: Vec<i64> = match sym.kind() {
        SymmetryKind::Zr => (0..d as i64).collect(),
        SymmetryKind::U1 => (0..=n_b as i64).collect(),
    };
    let mut born = Vec::new();
    for q in charges {
        let p = project_reference(&state, &b_sites, q, sym).map(|(_, p)| p).unwrap_or(0.0);
        let observed = counts.get(&q).copied().unwrap_or(0);
        let n = shots as f64;
        let sd = (n * p * (1.0 - p)).sqrt();
        let z = if sd > 0.0 { (observed as f64 - n * p) / sd } else if observed == 0 { 0.0 } else { f64::INFINITY };
        born.push(BornRow { charge: q, expected: p, observed, z_score: z });
    }
    let min_fidelity = fidelities.iter().copied().fold(f64::INFINITY, f64::min);
    let rounds = match sym.kind() {
        SymmetryKind::Zr => 1,
        SymmetryKind::U1 => u1_rounds(n_b),
    };
    let pass = min_fidelity >= 1.0 - 1e-10
        && example.rounds.len() == rounds
        && (shots == 0 || born.iter().all(|b| b.z_score.abs() <= 5.0));
    let report = CircuitReport {
        symmetry: sym.to_string(),
        n_a,
        n_b,
        rounds,
        example_rounds: example.rounds.clone(),
        example_charge: example.final_charge,
        fidelities,
        min_fidelity,
        max_probability_error: prob_err,
        shots,
        born,
        pass,
    };
    Ok((report, example.post_state, records))
}

pub fn cmd_circuit_demo(cfg: &RunConfig) -> Result<Outcome> {
    let (report, post, records) = circuit_demo(cfg)?;
    let mut out = OutputDir::create(cfg)?;
    out.csv("shots.csv", |w| write_shot_csv(w, &records))?;
    out.csv("born.csv", |w| write_table(w, &report.born))?;
    out.write("post_state.bin", |w| post.write_binary(w, report.example_charge))?;
    out.json("circuit.json", &report)?;
    let mut lines = vec![format!("{} on N_A = {}, N_B = {}: {} round(s)", report.symmetry, report.n_a, report.n_b, report.rounds)];
    for r in &report.example_rounds {
        lines.push(format!(
            "round {}: outcome {} (charge mod {}), p = {:.6}",
            r.index + 1,
            r.outcome,
            r.modulus,
            r.probability
        ));
    }
    lines.push(format!("measured charge {}", report.example_charge));
    lines.push(format!(
        "projector fidelity over {} input(s): min 1 - {:.2e}",
        report.fidelities.len(),
        1.0 - report.min_fidelity
    ));
    for b in &report.born {
        lines.push(format!("q={:>2}: Born {:.4}, observed {:>6}, z = {:+.2}", b.charge, b.expected, b.observed, b.z_score));
    }
    let pass = report.pass;
    out.finish(Command::CircuitDemo, pass, lines)
}

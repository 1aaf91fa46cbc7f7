use std::fs::File;
use std::path::Path;

use symneg_core::asymptotics::{PhaseDiagramGrid, PhaseTemplate};
use symneg_core::circuits::{read_shot_csv, StateVector};
use symneg_core::commands::{
    self, read_manifest, read_table, BornRow, Command, ComparisonRow, CurveRow, MomentRow, MutualInfoRow, OverlayRow,
};
use symneg_core::config::{ChargeSelection, RunConfig};
use symneg_core::negativity::Histogram;
use symneg_core::resolvent::TheoryRegistry;
use symneg_core::sectors::Symmetry;

fn small(sym: Symmetry, dir: &Path) -> RunConfig {
    let (total, q_a) = if sym.r() == 2 && sym.kind() == symneg_core::sectors::SymmetryKind::U1 { (4, 2) } else { (0, 0) };
    let mut cfg = RunConfig::new(sym, 2, 2, 3, total, ChargeSelection::Sector(q_a));
    cfg.ensemble.samples = 40;
    cfg.ensemble.seed = 5;
    cfg.outputs.directory = dir.to_path_buf();
    cfg
}

fn open(dir: &Path, name: &str) -> File {
    File::open(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn every_command_writes_its_files_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    for cmd in Command::ALL {
        let dir = tmp.path().join(cmd.name());
        let mut cfg = small(Symmetry::zr(2).unwrap(), &dir);
        cfg.analysis.phase.r1_points = 8;
        cfg.analysis.phase.ratio_points = 8;
        cfg.analysis.circuit.shots = 200;
        let outcome = commands::run(cmd, &cfg).unwrap();
        let manifest = read_manifest(&dir).unwrap();
        assert_eq!(manifest.command, cmd.name());
        assert_eq!(manifest.seed, 5);
        assert!(manifest.version.starts_with('v'));
        for f in &manifest.files {
            assert!(dir.join(f).is_file(), "{f} listed but missing");
        }
        assert_eq!(outcome.files.len(), manifest.files.len() + 1);
    }
}

#[test]
fn tables_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let mut cfg = small(Symmetry::zr(2).unwrap(), dir);
    cfg.analysis.phase.r1_points = 6;
    cfg.analysis.phase.ratio_points = 5;
    cfg.analysis.circuit.shots = 100;

    commands::run(Command::SampleSpectrum, &cfg).unwrap();
    let h = Histogram::read_csv(open(dir, "histogram.csv")).unwrap();
    let run = commands::sample_spectrum(&cfg).unwrap();
    assert_eq!(h, run.spectrum.histogram);

    commands::run(Command::TheorySpectrum, &cfg).unwrap();
    let curves: Vec<CurveRow> = read_table(open(dir, "theory.csv")).unwrap();
    assert_eq!(curves.len() % cfg.analysis.grid_points, 0);
    assert!(curves.iter().any(|r| r.component == "total"));

    commands::run(Command::Compare, &cfg).unwrap();
    let rows: Vec<ComparisonRow> = read_table(open(dir, "comparison.csv")).unwrap();
    let (report, overlay) = commands::compare(&cfg).unwrap();
    assert_eq!(rows, report.rows);
    let back: Vec<OverlayRow> = read_table(open(dir, "overlay.csv")).unwrap();
    assert_eq!(back, overlay);

    commands::run(Command::Moments, &cfg).unwrap();
    let m: Vec<MomentRow> = read_table(open(dir, "moments.csv")).unwrap();
    assert_eq!(m, commands::moments_table(&cfg).unwrap());

    commands::run(Command::MutualInfo, &cfg).unwrap();
    let mi: Vec<MutualInfoRow> = read_table(open(dir, "mutual_info.csv")).unwrap();
    assert_eq!(mi, commands::mutual_info_table(&cfg).unwrap().0);

    commands::run(Command::PhaseDiagram, &cfg).unwrap();
    let p = &cfg.analysis.phase;
    let grid = PhaseDiagramGrid::read_csv(open(dir, "phase.csv"), PhaseTemplate { nu_a: p.nu_a, nu_b: p.nu_b }).unwrap();
    assert_eq!(grid, commands::phase_diagram(&cfg).unwrap());

    commands::run(Command::CircuitDemo, &cfg).unwrap();
    let (report, post, records) = commands::circuit_demo(&cfg).unwrap();
    let born: Vec<BornRow> = read_table(open(dir, "born.csv")).unwrap();
    assert_eq!(born, report.born);
    let shots = read_shot_csv(open(dir, "shots.csv")).unwrap();
    let rounds: usize = records.iter().map(|r| r.rounds.len()).sum();
    assert_eq!(shots.len(), rounds);
    let (state, charge) = StateVector::read_binary(open(dir, "post_state.bin")).unwrap();
    assert_eq!(charge, report.example_charge);
    assert!((state.fidelity(&post).unwrap() - 1.0).abs() < 1e-15);
}

#[test]
fn reruns_are_identical_and_independent_of_workers() {
    let tmp = tempfile::tempdir().unwrap();
    let read = |name: &str, workers: usize| {
        let dir = tmp.path().join(name);
        let mut cfg = small(Symmetry::u1(), &dir);
        cfg.ensemble.workers = workers;
        let outcome = commands::run(Command::SampleSpectrum, &cfg).unwrap();
        assert_eq!(outcome.files.len(), 3);
        (std::fs::read(dir.join("summary.json")).unwrap(), std::fs::read(dir.join("histogram.csv")).unwrap())
    };
    let a = read("a", 1);
    assert_eq!(a, read("b", 1));
    assert_eq!(a, read("c", 3));
}

#[test]
fn mismatched_theory_fails_the_comparison() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(Symmetry::zr(2).unwrap(), tmp.path());
    // The unprojected density describes a different matrix altogether.
    cfg.analysis.theory = Some("unprojected-zr".into());
    cfg.ensemble.samples = 200;
    let outcome = commands::run(Command::Compare, &cfg).unwrap();
    assert!(!outcome.passed);
}

#[test]
fn fixed_point_model_carries_its_mass() {
    let g = symneg_core::sectors::SectorGeometry::new(Symmetry::zr(2).unwrap(), 2, 2, 4, 0, 0).unwrap();
    let t = TheoryRegistry::default()
        .with_fixed_point(Default::default(), 600)
        .get("unprojected-fixed-point")
        .unwrap()
        .spectrum(&g)
        .unwrap();
    let (em, _) = t.total.sum_rule_errors();
    assert!(em < 0.02, "mass error {em}");
}

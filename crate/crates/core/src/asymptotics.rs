//! Thermodynamic-limit formulas for U(1): saddle-point negativities, the
//! entanglement phase diagram and mutual information.
//!
//! All logarithms are natural.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sectors::{shannon_f, SectorGeometry, SymmetryKind};

/// ln L for N sites at filling ν, with the Stirling prefactor.
pub fn thermo_dim(n: f64, nu: f64) -> Result<f64> {
    if !(nu > 0.0 && nu < 1.0) || n <= 0.0 {
        return Err(Error::Domain { value: nu, domain: "0 < nu < 1, N > 0" });
    }
    Ok(n * shannon_f(nu)? - 0.5 * (2.0 * PI * n * nu * (1.0 - nu)).ln())
}

/// f that tolerates the closed endpoints, where it vanishes.
fn f0(nu: f64) -> f64 {
    shannon_f(nu.clamp(0.0, 1.0)).unwrap_or(0.0)
}

/// A geometry in the thermodynamic limit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermoPoint {
    /// N_A1 / N_A.
    pub r1: f64,
    /// N_A / N.
    pub r_a: f64,
    /// Filling of A.
    pub nu_a: f64,
    /// Total filling.
    pub nu: f64,
    /// Total number of sites, needed only for prefactors.
    pub n: Option<f64>,
}

impl ThermoPoint {
    pub fn new(r1: f64, r_a: f64, nu_a: f64, nu: f64) -> Result<Self> {
        let p = Self { r1, r_a, nu_a, nu, n: None };
        for (v, what) in [(r1, "r1 in (0,1)"), (r_a, "r_A in (0,1)"), (nu_a, "nu_A in (0,1)"), (nu, "nu in (0,1)")] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Domain { value: v, domain: what });
            }
        }
        let nb = p.nu_b();
        if !(0.0..=1.0).contains(&nb) {
            return Err(Error::Domain { value: nb, domain: "nu_B in [0,1]" });
        }
        Ok(p)
    }

    /// Point with fixed subsystem fillings; the total filling follows.
    pub fn from_fillings(r1: f64, r_a: f64, nu_a: f64, nu_b: f64) -> Result<Self> {
        Self::new(r1, r_a, nu_a, nu_a * r_a + nu_b * (1.0 - r_a))
    }

    /// Point from absolute sizes and charges.
    pub fn from_sizes(n_a1: usize, n_a2: usize, n_b: usize, q_a: i64, q_b: i64) -> Result<Self> {
        let na = (n_a1 + n_a2) as f64;
        let n = na + n_b as f64;
        let mut p = Self::new(n_a1 as f64 / na, na / n, q_a as f64 / na, (q_a + q_b) as f64 / n)?;
        p.n = Some(n);
        Ok(p)
    }

    pub fn with_n(mut self, n: f64) -> Self {
        self.n = Some(n);
        self
    }

    pub fn nu_b(&self) -> f64 {
        (self.nu - self.nu_a * self.r_a) / (1.0 - self.r_a)
    }

    /// (N_A1, N_A2, N_B) when an absolute size is set.
    pub fn sizes(&self) -> Result<(f64, f64, f64)> {
        let n = self.n.ok_or_else(|| Error::Invalid("this quantity needs an absolute system size".into()))?;
        let na = self.r_a * n;
        Ok((self.r1 * na, (1.0 - self.r1) * na, n - na))
    }

    /// Same point with the roles of A1 and A2 exchanged.
    pub fn swapped(&self) -> Self {
        Self { r1: 1.0 - self.r1, ..*self }
    }

    /// [f(ν_A) − (1/r_A − 1) f(ν_B)], the per-site volume-law balance of A against B.
    pub fn balance(&self) -> f64 {
        f0(self.nu_a) - (1.0 / self.r_a - 1.0) * f0(self.nu_b())
    }
}

/// Volume-law negativity estimates on the semicircle side of the phase diagram.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RsbNegativity {
    /// Paired-block contribution with the ν_A = ½ prefactor.
    pub n1_half_filling: f64,
    /// Paired-block contribution with the general-ν_A prefactor.
    pub n1: f64,
    /// Charge-diagonal contribution; zero when the exponent is negative.
    pub n2: f64,
    /// ½[N_A f(ν_A) − N_B f(ν_B)].
    pub exponent: f64,
    /// ln(1 + 2(𝒩₁ + 𝒩₂)).
    pub logneg: f64,
    /// The two 𝒩₁ prefactors differ by more than 5%.
    pub prefactor_disagreement: bool,
    /// The point is on the suppressed side or at the boundary.
    pub outside_regime: bool,
}

pub fn rsb_negativity_u1(p: &ThermoPoint) -> Result<RsbNegativity> {
    let (na1, na2, nb) = p.sizes()?;
    let na = na1 + na2;
    let (nu_a, nu_b) = (p.nu_a, p.nu_b());
    if !(nu_b > 0.0 && nu_b < 1.0) {
        return Err(Error::Domain { value: nu_b, domain: "nu_B strictly inside (0,1)" });
    }
    let exponent = 0.5 * (na * f0(nu_a) - nb * f0(nu_b));
    let pref1 = 16.0 / 9.0 * (2.0 / PI).powf(0.75) * (na1 * na2 * nb).powf(0.25) / na.sqrt()
        * (nu_b * (1.0 - nu_b)).powf(0.25);
    let l = ((1.0 - nu_a) / nu_a).ln();
    let corr = (1.0 + 4.0 / 3.0 * na1 * na2 / na * (1.0 - nu_a) * nu_a * l * l).sqrt();
    let n1_half_filling = pref1 * exponent.exp();
    let n1 = n1_half_filling / corr;
    let n2 = if exponent > 0.0 {
        4.0 / (3.0 * 3f64.sqrt() * PI) * (2.0 / PI).powf(0.25) * (nb / (na1 * na2)).powf(0.25)
            * (nu_b * (1.0 - nu_b)).powf(0.25)
            / (nu_a * (1.0 - nu_a)).sqrt()
            * exponent.exp()
    } else {
        0.0
    };
    Ok(RsbNegativity {
        n1_half_filling,
        n1,
        n2,
        exponent,
        logneg: (1.0 + 2.0 * (n1 + n2)).ln(),
        prefactor_disagreement: (n1_half_filling / n1 - 1.0).abs() > 0.05,
        outside_regime: exponent <= 0.0,
    })
}

/// Leading log-negativity in the maximally entangled corner.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxEntLogneg {
    /// N_A2 f(ν_A) plus the saddle correction, as in the closed form.
    pub logneg: f64,
    /// Perturbative saddle ν₁*.
    pub nu1_star: f64,
    /// Exponent N_A1 f(ν₁) + 2N_A2 f(ν̄₁) − N_A f(ν_A) maximized numerically.
    pub logneg_numeric: f64,
    pub nu1_numeric: f64,
}

/// N_A1 f(ν₁) + 2 N_A2 f(ν̄₁) − N_A f(ν_A) per site of A.
fn maxent_exponent(p: &ThermoPoint, nu1: f64) -> f64 {
    let r1 = p.r1;
    let bar = (p.nu_a - r1 * nu1) / (1.0 - r1);
    r1 * f0(nu1) + 2.0 * (1.0 - r1) * f0(bar) - f0(p.nu_a)
}

pub fn maxent_logneg_u1(p: &ThermoPoint) -> Result<MaxEntLogneg> {
    let (na1, na2, _) = p.sizes()?;
    let nu = p.nu_a;
    if !(nu > 0.0 && nu < 1.0) {
        return Err(Error::Domain { value: nu, domain: "0 < nu_A < 1" });
    }
    let l = ((1.0 - nu) / nu).ln();
    let var = nu * (1.0 - nu);
    let logneg = na2 * f0(nu) + na1 * var * l * l / (1.0 + 2.0 * na1 / na2);
    let nu1_star = nu - (1.0 - p.r1) / (1.0 + p.r1) * var * l;

    // ν̄₁ ∈ [0,1] bounds ν₁.
    let lo = ((nu - (1.0 - p.r1)) / p.r1).max(0.0);
    let hi = (nu / p.r1).min(1.0);
    let (mut a, mut b) = (lo, hi);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if maxent_exponent(p, c) > maxent_exponent(p, d) {
            b = d;
        } else {
            a = c;
        }
    }
    let nu1_numeric = 0.5 * (a + b);
    let na = na1 + na2;
    Ok(MaxEntLogneg { logneg, nu1_star, logneg_numeric: na * maxent_exponent(p, nu1_numeric), nu1_numeric })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseLabel {
    Suppressed,
    ReplicaSymmetryBreaking,
    MaximalEntanglement,
    CriticalRegion,
}

impl PhaseLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            PhaseLabel::Suppressed => "suppressed",
            PhaseLabel::ReplicaSymmetryBreaking => "replica-symmetry-breaking",
            PhaseLabel::MaximalEntanglement => "maximal-entanglement",
            PhaseLabel::CriticalRegion => "critical-region",
        }
    }
}

impl fmt::Display for PhaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PhaseLabel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        [
            PhaseLabel::Suppressed,
            PhaseLabel::ReplicaSymmetryBreaking,
            PhaseLabel::MaximalEntanglement,
            PhaseLabel::CriticalRegion,
        ]
        .into_iter()
        .find(|l| l.as_str() == s)
        .ok_or_else(|| Error::Invalid(format!("unknown phase label '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifyOptions {
    /// Sign-scan resolution of the criticality equation.
    pub scan_points: usize,
    /// Bisection tolerance on ν₁.
    pub root_tol: f64,
    /// |balance| below this is treated as the boundary itself.
    pub dead_band: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self { scan_points: 512, root_tol: 1e-10, dead_band: 1e-9 }
    }
}

/// Label plus the quantities that decided it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub label: PhaseLabel,
    /// f(ν_A) − (1/r_A − 1) f(ν_B); negative means suppressed.
    pub balance: f64,
    /// Root of the criticality equation, if one was found.
    pub critical_nu1: Option<f64>,
    /// Left-minus-right of the criticality equation at ν₁ = ν_A (A1 large).
    pub saddle_gap: f64,
    /// Same with A2 in the large role.
    pub saddle_gap_swapped: f64,
}

/// r₁f(ν₁) − (1−r₁)f((ν_A − ν₁r₁)/(1−r₁)) − (1/r_A − 1)f(ν_B).
fn criticality_gap(p: &ThermoPoint, nu1: f64) -> f64 {
    let r1 = p.r1;
    r1 * f0(nu1) - (1.0 - r1) * f0((p.nu_a - nu1 * r1) / (1.0 - r1)) - (1.0 / p.r_a - 1.0) * f0(p.nu_b())
}

fn critical_root(p: &ThermoPoint, opts: &ClassifyOptions) -> Option<f64> {
    let lo = ((p.nu_a - (1.0 - p.r1)) / p.r1).max(0.0);
    let hi = (p.nu_a / p.r1).min(1.0);
    if !(hi > lo) {
        return None;
    }
    let n = opts.scan_points.max(2);
    let xs: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
    let vals: Vec<f64> = xs.iter().map(|&x| criticality_gap(p, x)).collect();
    for i in 0..n {
        if vals[i] == 0.0 {
            return Some(xs[i]);
        }
        if vals[i].signum() != vals[i + 1].signum() {
            let (mut a, mut b, fa) = (xs[i], xs[i + 1], vals[i]);
            while b - a > opts.root_tol {
                let m = 0.5 * (a + b);
                if criticality_gap(p, m).signum() == fa.signum() {
                    a = m;
                } else {
                    b = m;
                }
            }
            return Some(0.5 * (a + b));
        }
    }
    if vals[n] == 0.0 {
        Some(xs[n])
    } else {
        None
    }
}

/// Phase of a point. The criticality equation is tested with either half of A
/// in the large role, so the label is invariant under A1 ↔ A2.
pub fn classify_phase(p: &ThermoPoint, opts: &ClassifyOptions) -> Classification {
    let balance = p.balance();
    let q = p.swapped();
    let saddle_gap = criticality_gap(p, p.nu_a);
    let saddle_gap_swapped = criticality_gap(&q, q.nu_a);
    let mut c = Classification { label: PhaseLabel::Suppressed, balance, critical_nu1: None, saddle_gap, saddle_gap_swapped };
    if balance.abs() < opts.dead_band {
        c.label = PhaseLabel::CriticalRegion;
        return c;
    }
    if balance < 0.0 {
        return c;
    }
    c.critical_nu1 = critical_root(p, opts).or_else(|| critical_root(&q, opts));
    c.label = if c.critical_nu1.is_some() {
        PhaseLabel::CriticalRegion
    } else if saddle_gap > 0.0 || saddle_gap_swapped > 0.0 {
        PhaseLabel::MaximalEntanglement
    } else {
        PhaseLabel::ReplicaSymmetryBreaking
    };
    c
}

/// Finite-size label from Stirling log-dimensions: scan every charge split of A
/// and apply the G₂ criticality comparison L_{A1,q1} vs L_{A2,q̄₁}L_B (either
/// half large) to each.
pub fn finite_size_label(p: &ThermoPoint, n_a: usize) -> Result<PhaseLabel> {
    let na = n_a as f64;
    let n = na / p.r_a;
    let nb = n - na;
    let na1 = (p.r1 * na).round();
    let na2 = na - na1;
    if na1 < 1.0 || na2 < 1.0 || nb < 1.0 {
        return Err(Error::Geometry("finite-size label needs at least one site per part".into()));
    }
    let ln_la = thermo_dim(na, p.nu_a)?;
    let ln_lb = thermo_dim(nb, p.nu_b())?;
    if ln_la < ln_lb {
        return Ok(PhaseLabel::Suppressed);
    }
    let qa = p.nu_a * na;
    let ln_l = |sites: f64, q: f64| if q <= 0.0 || q >= sites { 0.0 } else { thermo_dim(sites, q / sites).unwrap_or(0.0) };
    // Continuous charge of A1, fine enough to resolve sign changes.
    let steps = 2000;
    let lo = (qa - na2).max(0.0);
    let hi = qa.min(na1);
    let mut signs = Vec::with_capacity(steps + 1);
    for i in 0..=steps {
        let q1 = lo + (hi - lo) * i as f64 / steps as f64;
        let a1 = ln_l(na1, q1);
        let a2 = ln_l(na2, qa - q1);
        signs.push(((a1 - a2 - ln_lb).signum(), (a2 - a1 - ln_lb).signum()));
    }
    let changes = signs.windows(2).any(|w| w[0].0 != w[1].0 || w[0].1 != w[1].1);
    if changes {
        return Ok(PhaseLabel::CriticalRegion);
    }
    let mid = ln_l(na1, p.nu_a * na1);
    let mid2 = ln_l(na2, p.nu_a * na2);
    Ok(if mid - mid2 - ln_lb > 0.0 || mid2 - mid - ln_lb > 0.0 {
        PhaseLabel::MaximalEntanglement
    } else {
        PhaseLabel::ReplicaSymmetryBreaking
    })
}

/// Fillings shared by every cell of a phase scan.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseTemplate {
    pub nu_a: f64,
    pub nu_b: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseCell {
    pub r1: f64,
    pub nb_over_na: f64,
    pub label: PhaseLabel,
    /// N_B/N_A on the dashed line N_A f(ν_A) = N_B f(ν_B).
    pub dashed_value: f64,
    /// N_B/N_A on the nonsymmetric critical line N_A1 = N_A2 + N_B (0 when r₁ ≤ ½).
    pub red_curve_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagramGrid {
    pub template: PhaseTemplate,
    pub r1: Vec<f64>,
    pub nb_over_na: Vec<f64>,
    /// Row-major: cells[i_ratio * r1.len() + i_r1].
    pub cells: Vec<PhaseCell>,
}

impl PhaseDiagramGrid {
    pub fn cell(&self, i_r1: usize, i_ratio: usize) -> &PhaseCell {
        &self.cells[i_ratio * self.r1.len() + i_r1]
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["r1", "NB_over_NA", "label", "dashed_value", "red_curve_value"])?;
        for c in &self.cells {
            w.write_record([
                format!("{}", c.r1),
                format!("{}", c.nb_over_na),
                c.label.to_string(),
                format!("{}", c.dashed_value),
                format!("{}", c.red_curve_value),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(r: R, template: PhaseTemplate) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let mut cells = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let num = |i: usize| -> Result<f64> {
                rec.get(i)
                    .ok_or_else(|| Error::Invalid("short phase-diagram row".into()))?
                    .parse::<f64>()
                    .map_err(|e| Error::Invalid(e.to_string()))
            };
            cells.push(PhaseCell {
                r1: num(0)?,
                nb_over_na: num(1)?,
                label: rec.get(2).unwrap_or("").parse()?,
                dashed_value: num(3)?,
                red_curve_value: num(4)?,
            });
        }
        let mut r1: Vec<f64> = cells.iter().map(|c| c.r1).collect();
        r1.dedup();
        r1.sort_by(f64::total_cmp);
        r1.dedup();
        let mut ratio: Vec<f64> = cells.iter().map(|c| c.nb_over_na).collect();
        ratio.sort_by(f64::total_cmp);
        ratio.dedup();
        Ok(Self { template, r1, nb_over_na: ratio, cells })
    }
}

/// Classify every (r₁, N_B/N_A) cell.
pub fn phase_scan(
    r1: &[f64],
    nb_over_na: &[f64],
    template: PhaseTemplate,
    opts: &ClassifyOptions,
) -> Result<PhaseDiagramGrid> {
    if r1.len() < 2 || nb_over_na.len() < 2 {
        return Err(Error::Invalid("phase scan needs at least a 2x2 grid".into()));
    }
    let fa = f0(template.nu_a);
    let fb = f0(template.nu_b);
    let dashed = if fb > 0.0 { fa / fb } else { f64::INFINITY };
    let coords: Vec<(f64, f64)> = nb_over_na.iter().flat_map(|&k| r1.iter().map(move |&r| (r, k))).collect();
    let cells = coords
        .par_iter()
        .map(|&(r, k)| {
            let r_a = 1.0 / (1.0 + k);
            let p = ThermoPoint::from_fillings(r, r_a, template.nu_a, template.nu_b)?;
            Ok(PhaseCell {
                r1: r,
                nb_over_na: k,
                label: classify_phase(&p, opts).label,
                dashed_value: dashed,
                red_curve_value: red_curve(r),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PhaseDiagramGrid { template, r1: r1.to_vec(), nb_over_na: nb_over_na.to_vec(), cells })
}

/// N_B/N_A on the nonsymmetric critical line N_{A,large} = N_{A,small} + N_B.
pub fn red_curve(r1: f64) -> f64 {
    (2.0 * r1 - 1.0).abs()
}

/// Regime used for a mutual-information estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MutualInfoRegime {
    /// N_A < N_B.
    SmallA,
    ReplicaSymmetryBreaking,
    MaximalEntanglement,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MutualInfo {
    /// Nats.
    pub value: f64,
    pub regime: MutualInfoRegime,
    /// Exactly on a regime boundary.
    pub boundary: bool,
    /// The leading-order expression was negative and has been clamped to 0.
    pub clamped: bool,
}

/// Where to evaluate the mutual information.
#[derive(Clone, Copy, Debug)]
pub enum MutualInfoInput<'a> {
    Zr(&'a SectorGeometry),
    U1(&'a ThermoPoint),
}

pub fn mutual_information(input: MutualInfoInput<'_>) -> Result<MutualInfo> {
    match input {
        MutualInfoInput::Zr(g) => mutual_information_zr(g),
        MutualInfoInput::U1(p) => mutual_information_u1(p),
    }
}

/// ℤ_R mutual information between A1 and A2 in the three size regimes.
pub fn mutual_information_zr(g: &SectorGeometry) -> Result<MutualInfo> {
    if g.symmetry().kind() != SymmetryKind::Zr {
        return Err(Error::Symmetry("expected a Z_R geometry".into()));
    }
    let lr = (g.symmetry().r() as f64).ln();
    let (na, nb) = (g.n_a() as i64, g.n_b() as i64);
    let (large, small) = (g.n_a1().max(g.n_a2()) as i64, g.n_a1().min(g.n_a2()) as i64);
    let (value, regime, boundary) = if na < nb {
        (lr, MutualInfoRegime::SmallA, false)
    } else if large < nb + small - 1 {
        ((na - nb - 1) as f64 * lr, MutualInfoRegime::ReplicaSymmetryBreaking, na == nb)
    } else {
        (g.n_a2() as f64 * lr, MutualInfoRegime::MaximalEntanglement, na == nb || large == nb + small - 1)
    };
    Ok(MutualInfo { value: value.max(0.0), regime, boundary, clamped: value < 0.0 })
}

/// U(1) mutual information from the saddle-point entropies.
pub fn mutual_information_u1(p: &ThermoPoint) -> Result<MutualInfo> {
    let (na1, na2, nb) = p.sizes()?;
    let na = na1 + na2;
    let (nu_a, nu_b) = (p.nu_a, p.nu_b());
    let gauss = 0.5 * (2.0 * PI * nu_a * (1.0 - nu_a)).ln();
    let (large, small) = (na1.max(na2), na1.min(na2));
    let (value, regime, boundary) = if na < nb {
        (-0.5 * (na / (na1 * na2)).ln() + gauss, MutualInfoRegime::SmallA, false)
    } else if large < nb + small {
        (
            na * f0(nu_a) - nb * f0(nu_b) - 0.5 * (na * na / (na1 * na2 * nb)).ln() + gauss,
            MutualInfoRegime::ReplicaSymmetryBreaking,
            na == nb,
        )
    } else {
        // The larger half plays the role of A1.
        (2.0 * small * f0(nu_a) - 0.5 * (na / large).ln(), MutualInfoRegime::MaximalEntanglement, large == nb + small)
    };
    Ok(MutualInfo { value: value.max(0.0), regime, boundary, clamped: value < 0.0 })
}

//! Random-matrix predictions for the spectrum of ρ^{T₂}.
//!
//! Every prediction is a [`SpectralModel`]: a density on a union of intervals that
//! knows how many eigenvalues it should carry and what their sum should be. Closed
//! forms cover the semicircle regime; the general case solves the cubic
//! Schwinger–Dyson equations pointwise in ξ and reads the density off the imaginary
//! part of the physical root.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::sync::Arc;

use faer::c64;
use serde::{Deserialize, Serialize};

use crate::cubic::{lower_half_root, solve_cubic};
use crate::error::{Error, Result};
use crate::quadrature::{integrate_endpoints, Tolerance};
use crate::sectors::{
    alpha, enumerate_pt_pairs, enumerate_splits, ln_alpha, Part, SectorGeometry, SymmetryKind,
};

/// Which part of the spectrum a model describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComponentTag {
    /// Paired block (q1, q2) with q2 ≠ q̄₁.
    P1 { q1: i64, q2: i64 },
    /// Charge-diagonal block (q1, q̄₁).
    P2 { q1: i64 },
    /// All paired blocks together.
    P1Sum,
    /// All charge-diagonal blocks together.
    P2Sum,
    /// Unprojected spectrum restricted to charge imbalance q1 − q2.
    DeltaQ(i64),
    Total,
}

impl fmt::Display for ComponentTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ComponentTag::P1 { q1, q2 } => write!(f, "P1({q1},{q2})"),
            ComponentTag::P2 { q1 } => write!(f, "P2({q1})"),
            ComponentTag::P1Sum => write!(f, "P1"),
            ComponentTag::P2Sum => write!(f, "P2"),
            ComponentTag::DeltaQ(d) => write!(f, "dq={d}"),
            ComponentTag::Total => write!(f, "total"),
        }
    }
}

type DensityFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// An analytic spectral density.
#[derive(Clone)]
pub struct SpectralModel {
    pub component: ComponentTag,
    /// Disjoint intervals, ascending.
    pub support: Vec<(f64, f64)>,
    /// Expected ∫P dξ.
    pub normalization: f64,
    /// Expected ∫ξP dξ.
    pub trace: f64,
    /// Point mass at ξ = 0 (rank-deficient blocks), included in `normalization`.
    pub zero_modes: f64,
    /// Points inside the support where the density may diverge.
    pub singular_points: Vec<f64>,
    pub warnings: Vec<String>,
    /// Intervals where the branch continuation disagreed with the root rule.
    pub flagged: Vec<(f64, f64)>,
    density: DensityFn,
}

impl fmt::Debug for SpectralModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralModel")
            .field("component", &self.component)
            .field("support", &self.support)
            .field("normalization", &self.normalization)
            .field("trace", &self.trace)
            .finish_non_exhaustive()
    }
}

fn merge_intervals(mut v: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    v.retain(|(a, b)| b > a);
    v.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (a, b) in v {
        match out.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

impl SpectralModel {
    pub fn new<F>(component: ComponentTag, support: Vec<(f64, f64)>, normalization: f64, trace: f64, f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            component,
            support: merge_intervals(support),
            normalization,
            trace,
            zero_modes: 0.0,
            singular_points: Vec::new(),
            warnings: Vec::new(),
            flagged: Vec::new(),
            density: Arc::new(f),
        }
    }

    pub fn with_singular_points(mut self, pts: Vec<f64>) -> Self {
        self.singular_points = pts;
        self
    }

    pub fn with_warnings(mut self, w: Vec<String>) -> Self {
        self.warnings = w;
        self
    }

    pub fn density(&self, xi: f64) -> f64 {
        if self.support.iter().any(|&(a, b)| xi >= a && xi <= b) {
            (self.density)(xi).max(0.0)
        } else {
            0.0
        }
    }

    pub fn tabulate(&self, grid: &[f64]) -> Vec<f64> {
        grid.iter().map(|&x| self.density(x)).collect()
    }

    /// Support pieces cut at singular points and at 0.
    fn pieces(&self, lo: f64, hi: f64) -> Vec<(f64, f64)> {
        let mut cuts: Vec<f64> = self.singular_points.clone();
        cuts.push(0.0);
        let mut out = Vec::new();
        for &(a, b) in &self.support {
            let (a, b) = (a.max(lo), b.min(hi));
            if b <= a {
                continue;
            }
            let mut pts = vec![a];
            pts.extend(cuts.iter().copied().filter(|&c| c > a && c < b));
            pts.push(b);
            pts.sort_by(f64::total_cmp);
            pts.dedup();
            out.extend(pts.windows(2).map(|w| (w[0], w[1])));
        }
        out
    }

    /// ∫_{lo}^{hi} g(ξ) P(ξ) dξ.
    pub fn integrate_between<G: Fn(f64) -> f64>(&self, g: G, lo: f64, hi: f64) -> f64 {
        let scale = self.normalization.abs().max(1.0);
        let tol = Tolerance { abs: 1e-12 * scale, rel: 1e-11, max_pieces: 4000 };
        let atom = if self.zero_modes > 0.0 && lo <= 0.0 && 0.0 < hi { g(0.0) * self.zero_modes } else { 0.0 };
        atom + self
            .pieces(lo, hi)
            .into_iter()
            .map(|(a, b)| integrate_endpoints(|x| g(x) * (self.density)(x).max(0.0), a, b, tol).0)
            .sum::<f64>()
    }

    pub fn integrate<G: Fn(f64) -> f64>(&self, g: G) -> f64 {
        self.integrate_between(g, f64::NEG_INFINITY, f64::INFINITY)
    }

    /// ∫P dξ by quadrature.
    pub fn mass(&self) -> f64 {
        self.integrate(|_| 1.0)
    }

    /// ∫ξP dξ by quadrature.
    pub fn first_moment(&self) -> f64 {
        self.integrate(|x| x)
    }

    /// −∫_{ξ<0} ξ P dξ.
    pub fn negativity(&self) -> f64 {
        self.integrate_between(|x| -x, f64::NEG_INFINITY, 0.0)
    }

    /// Mass in each bin of `edges`.
    pub fn bin_masses(&self, edges: &[f64]) -> Vec<f64> {
        edges.windows(2).map(|w| self.integrate_between(|_| 1.0, w[0], w[1])).collect()
    }

    /// Pointwise sum of models.
    pub fn sum(models: &[SpectralModel], component: ComponentTag) -> SpectralModel {
        let parts: Vec<SpectralModel> = models.to_vec();
        let support = merge_intervals(models.iter().flat_map(|m| m.support.iter().copied()).collect());
        let normalization = models.iter().map(|m| m.normalization).sum();
        let trace = models.iter().map(|m| m.trace).sum();
        // Component edges are kinks of the sum; cutting there keeps the quadrature accurate.
        let mut singular: Vec<f64> = models
            .iter()
            .flat_map(|m| m.singular_points.iter().copied().chain(m.support.iter().flat_map(|&(a, b)| [a, b])))
            .collect();
        singular.sort_by(f64::total_cmp);
        singular.dedup();
        let mut out = SpectralModel::new(component, support, normalization, trace, move |x| {
            parts.iter().map(|m| m.density(x)).sum()
        });
        out.singular_points = singular;
        out.zero_modes = models.iter().map(|m| m.zero_modes).sum();
        out.warnings = models.iter().flat_map(|m| m.warnings.iter().cloned()).collect();
        out.warnings.sort();
        out.warnings.dedup();
        out.flagged = models.iter().flat_map(|m| m.flagged.iter().copied()).collect();
        out
    }

    /// Relative deviations of the two sum rules from their expected values.
    pub fn sum_rule_errors(&self) -> (f64, f64) {
        let m = self.mass();
        let t = self.first_moment();
        let rel = |a: f64, b: f64, scale: f64| (a - b).abs() / scale.max(f64::MIN_POSITIVE);
        // A traceless model is judged against the scale of its first absolute moment.
        let tscale = if self.trace.abs() > 0.0 { self.trace.abs() } else { self.integrate(f64::abs) };
        (rel(m, self.normalization, self.normalization.abs()), rel(t, self.trace, tscale))
    }

    /// CSV with columns (xi, density, component).
    pub fn write_csv<W: Write>(&self, w: W, grid: &[f64]) -> Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["xi", "density", "component"])?;
        let tag = self.component.to_string();
        for &x in grid {
            w.write_record([format!("{x:e}"), format!("{:e}", self.density(x)), tag.clone()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Evenly spaced grid across the support with a margin of 5% on each side.
    pub fn default_grid(&self, points: usize) -> Vec<f64> {
        let lo = self.support.first().map(|s| s.0).unwrap_or(-1.0);
        let hi = self.support.last().map(|s| s.1).unwrap_or(1.0);
        let pad = 0.05 * (hi - lo);
        let (lo, hi) = (lo - pad, hi + pad);
        (0..points).map(|i| lo + (hi - lo) * i as f64 / (points.max(2) - 1) as f64).collect()
    }
}

fn require_zr(geom: &SectorGeometry) -> Result<u32> {
    match geom.symmetry().kind() {
        SymmetryKind::Zr => Ok(geom.symmetry().r()),
        SymmetryKind::U1 => Err(Error::Symmetry("this prediction is specific to Z_R".into())),
    }
}

fn ln_pref(geom: &SectorGeometry) -> f64 {
    // ln(L_qA² L_qB / 2)
    2.0 * geom.ln_l_qa() + geom.ln_l_qb() - 2f64.ln()
}

fn rsb_warnings(geom: &SectorGeometry, q1: i64, q2: i64) -> Vec<String> {
    let l1 = geom.ln_dim(Part::A1, q1);
    let l2 = geom.ln_dim(Part::A2, q2);
    let lb = geom.ln_l_qb();
    let m = 4f64.ln();
    let mut w = Vec::new();
    if l1 - l2 - lb > -m || l2 - l1 - lb > -m {
        w.push(format!("({q1},{q2}): semicircle regime needs L_A1 << L_A2 L_B and L_A2 << L_A1 L_B"));
    }
    w
}

/// Charge-diagonal component: semicircle centered at 1/L_{q_A} of radius
/// 2√(α_{q1 q̄₁}/L_{q_A}) carrying L_{A1,q1} L_{A2,q̄₁} eigenvalues.
pub fn semicircle_p2(q1: i64, geom: &SectorGeometry) -> Result<SpectralModel> {
    let q2 = geom.bar(q1);
    let la = ln_alpha(q1, q2, geom)?;
    let inv_l = (-geom.ln_l_qa()).exp();
    let r2 = 4.0 * (la - geom.ln_l_qa()).exp();
    let r = r2.sqrt();
    let pref = (ln_pref(geom)).exp() / PI;
    let weight = (geom.ln_dim(Part::A1, q1) + geom.ln_dim(Part::A2, q2)).exp();
    Ok(SpectralModel::new(
        ComponentTag::P2 { q1 },
        vec![(inv_l - r, inv_l + r)],
        weight,
        weight * inv_l,
        move |x| pref * (r2 - (x - inv_l).powi(2)).max(0.0).sqrt(),
    )
    .with_warnings(rsb_warnings(geom, q1, q2)))
}

/// Paired component: even density on |√α − √α'| < |ξ|√L_{q_A} < √α + √α'.
pub fn semicircle_p1(q1: i64, q2: i64, geom: &SectorGeometry) -> Result<SpectralModel> {
    if q2 == geom.bar(q1) {
        return Err(Error::Invalid(format!("({q1},{q2}) is charge-diagonal")));
    }
    let (p1, p2) = (geom.bar(q2), geom.bar(q1));
    let a = alpha(q1, q2, geom)?.sqrt();
    let ap = alpha(p1, p2, geom)?.sqrt();
    let sl = (0.5 * geom.ln_l_qa()).exp();
    let inner = (a - ap).abs() / sl;
    let outer = (a + ap) / sl;
    let pref = ln_pref(geom).exp() / PI;
    let d = (geom.ln_dim(Part::A1, q1) + geom.ln_dim(Part::A2, q2)).exp();
    let dp = (geom.ln_dim(Part::A1, p1) + geom.ln_dim(Part::A2, p2)).exp();
    let (i2, o2) = (inner * inner, outer * outer);
    let gapless = inner == 0.0;
    let f = move |x: f64| {
        let x2 = x * x;
        if gapless {
            pref * (o2 - x2).max(0.0).sqrt()
        } else {
            pref * ((o2 - x2) * (x2 - i2)).max(0.0).sqrt() / x.abs()
        }
    };
    let support = if gapless { vec![(-outer, outer)] } else { vec![(-outer, -inner), (inner, outer)] };
    let mut w = rsb_warnings(geom, q1, q2);
    w.extend(rsb_warnings(geom, p1, p2));
    Ok(SpectralModel::new(ComponentTag::P1 { q1, q2 }, support, d.min(dp), 0.0, f).with_warnings(w))
}

/// Every P1 and P2 semicircle of the block.
pub fn semicircle_components(geom: &SectorGeometry) -> Result<Vec<SpectralModel>> {
    let mut out = Vec::new();
    for s in enumerate_splits(geom)? {
        out.push(semicircle_p2(s.q1, geom)?);
    }
    for p in enumerate_pt_pairs(geom)? {
        if !p.is_diagonal(geom) {
            out.push(semicircle_p1(p.q1, p.q2, geom)?);
        }
    }
    Ok(out)
}

/// ℤ_R closed form: (R−1)-weighted semicircle at 0 plus one at 1/R^{N_A−1}, both
/// of radius 2R^{−(N−1)/2}, with prefactor R^{2N_A+N_B−2}/2π.
pub fn zr_semicircle_density(geom: &SectorGeometry) -> Result<SpectralModel> {
    let (p1, p2) = zr_semicircle_parts(geom)?;
    Ok(SpectralModel::sum(&[p1, p2], ComponentTag::Total))
}

/// The two semicircles of [`zr_semicircle_density`] separately (P1 sum, P2 sum).
pub fn zr_semicircle_parts(geom: &SectorGeometry) -> Result<(SpectralModel, SpectralModel)> {
    let r = require_zr(geom)? as f64;
    let (na, nb, n) = (geom.n_a() as f64, geom.n_b() as f64, geom.n() as f64);
    let lr = r.ln();
    let pref = ((2.0 * na + nb - 2.0) * lr).exp() / (2.0 * PI);
    let rad2 = 4.0 * (-(n - 1.0) * lr).exp();
    let rad = rad2.sqrt();
    let c = (-(na - 1.0) * lr).exp();
    let mass = (na * lr).exp();
    let m1 = mass * (r - 1.0) / r;
    let m2 = mass / r;
    let p1 = SpectralModel::new(ComponentTag::P1Sum, vec![(-rad, rad)], m1, 0.0, move |x| {
        (r - 1.0) * pref * (rad2 - x * x).max(0.0).sqrt()
    });
    let p2 = SpectralModel::new(ComponentTag::P2Sum, vec![(c - rad, c + rad)], m2, m2 * c, move |x| {
        pref * (rad2 - (x - c).powi(2)).max(0.0).sqrt()
    });
    Ok((p1, p2))
}

/// Negativity of the ℤ_R semicircle regime in closed form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZrNegativity {
    /// Residual contribution from the zero-centered semicircle.
    pub n1: f64,
    /// Contribution of the shifted semicircle; zero when R^{N_A−N_B−1} ≤ ¼.
    pub n2: f64,
    /// Log-negativity in bits from the two-branch asymptotic formula.
    pub logneg_bits: f64,
    /// ln(1 + 2(n1 + n2)).
    pub logneg_nats: f64,
}

pub fn zr_closed_negativity(geom: &SectorGeometry) -> Result<ZrNegativity> {
    let r = require_zr(geom)? as f64;
    let e = geom.n_a() as f64 - geom.n_b() as f64 - 1.0;
    let x = r.powf(e / 2.0);
    let n1 = 2.0 / (3.0 * PI) * (r - 1.0) * x;
    let n2 = if r.powf(e) > 0.25 {
        let y = r.powf(-e / 2.0);
        (1.0 / (2.0 * PI)) * (8.0 / 3.0 * x + y / 3.0) * (1.0 - 0.25 * r.powf(-e)).sqrt()
            - (0.5 * y).acos() / PI
    } else {
        0.0
    };
    let logneg_bits = if r.powf(e) > 0.25 {
        (4.0 / (3.0 * PI) * (r + 1.0)).log2() + 0.5 * e * r.log2()
    } else {
        4.0 / (3.0 * PI) * (r - 1.0) * x / 2f64.ln()
    };
    Ok(ZrNegativity { n1, n2, logneg_bits, logneg_nats: (1.0 + 2.0 * (n1 + n2)).ln() })
}

/// Which equation a set of cubic coefficients comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CubicKind {
    G2General,
    G1General,
    ZrG1,
    ZrG2,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubicCoefficients {
    pub c3: f64,
    pub c2: f64,
    pub c1: f64,
    pub c0: f64,
    pub kind: CubicKind,
}

impl CubicCoefficients {
    pub fn roots(&self) -> Vec<c64> {
        solve_cubic(self.c3, self.c2, self.c1, self.c0)
    }
}

/// A cubic whose coefficients are quadratic polynomials in ξ, together with the
/// bookkeeping that turns its physical root into a density.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubicFamily {
    /// c_k(ξ) = poly[k][0] + poly[k][1] ξ + poly[k][2] ξ², for k = c3, c2, c1, c0.
    pub poly: [[f64; 3]; 4],
    pub kind: CubicKind,
    pub component: ComponentTag,
    /// Density = weight · |Im g| / π.
    pub weight: f64,
    pub normalization: f64,
    pub trace: f64,
    /// Eigenvalues forced to 0 by the rank of the block.
    pub zero_modes: f64,
    /// Characteristic width of the spectrum, used to place search grids.
    pub scale: f64,
    /// Point around which the spectrum is expected.
    pub center: f64,
}

impl CubicFamily {
    pub fn at(&self, xi: f64) -> CubicCoefficients {
        let e = |p: &[f64; 3]| p[0] + xi * (p[1] + xi * p[2]);
        CubicCoefficients {
            c3: e(&self.poly[0]),
            c2: e(&self.poly[1]),
            c1: e(&self.poly[2]),
            c0: e(&self.poly[3]),
            kind: self.kind,
        }
    }

    /// weight·|Im g|/π for the root in the lower half plane, 0 if all roots are real.
    pub fn density(&self, xi: f64) -> f64 {
        match physical_root(&self.at(xi).roots()) {
            Some(g) => self.weight * g.im.abs() / PI,
            None => 0.0,
        }
    }
}

/// Large subsystem assumed by the cubic equations: the printed form takes A1 large.
/// `oriented` swaps roles when A2 dominates.
fn g2_family(q1: i64, geom: &SectorGeometry, oriented: bool) -> Result<CubicFamily> {
    let q2 = geom.bar(q1);
    let a = alpha(q1, q2, geom)?;
    let (l1, l2) = (geom.ln_dim(Part::A1, q1), geom.ln_dim(Part::A2, q2));
    let lb = if oriented { l1.max(l2) } else { l1 };
    let beta = (lb - geom.ln_l_qa() - geom.ln_l_qb()).exp();
    let inv_l = (-geom.ln_l_qa()).exp();
    let weight = (l1 + l2).exp();
    let rank = (geom.ln_l_qb() + 2.0 * l1.min(l2)).exp();
    let b2 = beta * beta;
    Ok(CubicFamily {
        poly: [[0.0, b2, 0.0], [a * inv_l - b2, 0.0, 0.0], [inv_l, -1.0, 0.0], [1.0, 0.0, 0.0]],
        kind: CubicKind::G2General,
        component: ComponentTag::P2 { q1 },
        weight,
        normalization: weight,
        trace: weight * inv_l,
        zero_modes: (weight - rank).max(0.0),
        scale: 2.0 * (a * inv_l).sqrt(),
        center: inv_l,
    })
}

fn g1_family(q1: i64, q2: i64, geom: &SectorGeometry, oriented: bool) -> Result<CubicFamily> {
    if q2 == geom.bar(q1) {
        return Err(Error::Invalid(format!("({q1},{q2}) is charge-diagonal")));
    }
    let (p1, p2) = (geom.bar(q2), geom.bar(q1));
    let a = alpha(q1, q2, geom)?;
    let mut ap = alpha(p1, p2, geom)?;
    // Equal couplings computed along different log paths: make the gapless case exact.
    if (a - ap).abs() <= 1e-12 * a.max(ap) {
        ap = a;
    }
    let a1 = geom.ln_dim(Part::A1, q1) + geom.ln_dim(Part::A1, p1);
    let a2 = geom.ln_dim(Part::A2, q2) + geom.ln_dim(Part::A2, p2);
    let lnb = if oriented { a1.max(a2) } else { a1 };
    let mut b = (lnb - 2.0 * (geom.ln_l_qa() + geom.ln_l_qb())).exp();
    let inv_l = (-geom.ln_l_qa()).exp();
    // The spectrum reaches ξ = 0 exactly when b = α/L_{q_A}; rounding either way
    // would open a spurious gap or leave noise at the origin.
    if (b - a * inv_l).abs() <= 1e-12 * b.max(a * inv_l) {
        b = a * inv_l;
    }
    let d = (geom.ln_dim(Part::A1, q1) + geom.ln_dim(Part::A2, q2)).exp();
    let dp = (geom.ln_dim(Part::A1, p1) + geom.ln_dim(Part::A2, p2)).exp();
    let rank = (geom.ln_l_qb()
        + geom.ln_dim(Part::A1, q1).min(geom.ln_dim(Part::A2, p2))
        + geom.ln_dim(Part::A1, p1).min(geom.ln_dim(Part::A2, q2)))
    .exp();
    Ok(CubicFamily {
        poly: [
            [0.0, 0.0, -a * b],
            [0.0, -(a * (ap * inv_l - 2.0 * b) + ap * b), 0.0],
            [(a - ap) * (ap * inv_l - b), 0.0, ap],
            [0.0, -ap, 0.0],
        ],
        kind: CubicKind::G1General,
        component: ComponentTag::P1 { q1, q2 },
        weight: d,
        normalization: d.min(dp),
        trace: 0.0,
        zero_modes: (d.min(dp) - rank).max(0.0),
        scale: (a.sqrt() + ap.sqrt()) * inv_l.sqrt(),
        center: 0.0,
    })
}

/// G₂ cubic at ξ with the coefficients as printed (A1 taken as the large side).
pub fn sd_cubic_g2(q1: i64, geom: &SectorGeometry, xi: f64) -> Result<CubicCoefficients> {
    Ok(g2_family(q1, geom, false)?.at(xi))
}

/// Single-component G₁ cubic at ξ, as printed.
pub fn sd_cubic_g1(q1: i64, q2: i64, geom: &SectorGeometry, xi: f64) -> Result<CubicCoefficients> {
    Ok(g1_family(q1, q2, geom, false)?.at(xi))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ZrResolvent {
    G1,
    G2,
}

fn zr_family(geom: &SectorGeometry, which: ZrResolvent) -> Result<CubicFamily> {
    let r = require_zr(geom)? as f64;
    let lr = r.ln();
    let (na, na2, nb, n) = (geom.n_a() as f64, geom.n_a2() as f64, geom.n_b() as f64, geom.n() as f64);
    let b = (-2.0 * (na2 + nb - 1.0) * lr).exp();
    let c2 = (-(n - 1.0) * lr).exp() - b;
    let shift = match which {
        ZrResolvent::G1 => 0.0,
        ZrResolvent::G2 => (-(na - 1.0) * lr).exp(),
    };
    let per = ((na - 2.0) * lr).exp();
    let small = na2.min(na - na2);
    let rank = ((nb - 1.0 + 2.0 * (small - 1.0)) * lr).exp();
    let (kind, component, weight, trace) = match which {
        ZrResolvent::G1 => (CubicKind::ZrG1, ComponentTag::P1Sum, per * r * (r - 1.0), 0.0),
        ZrResolvent::G2 => (CubicKind::ZrG2, ComponentTag::P2Sum, per * r, 1.0),
    };
    Ok(CubicFamily {
        poly: [[0.0, b, 0.0], [c2, 0.0, 0.0], [shift, -1.0, 0.0], [1.0, 0.0, 0.0]],
        kind,
        component,
        weight,
        normalization: weight,
        trace,
        zero_modes: (weight / per) * (per - rank).max(0.0),
        scale: 2.0 * (-(n - 1.0) / 2.0 * lr).exp(),
        center: shift,
    })
}

/// ℤ_R cubic for G₁ or G₂ at ξ (A1 taken as the large side).
pub fn sd_cubic_zr(geom: &SectorGeometry, xi: f64, which: ZrResolvent) -> Result<CubicCoefficients> {
    Ok(zr_family(geom, which)?.at(xi))
}

/// Where to look for the support of a cubic-derived density.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CubicGrid {
    /// Log-spaced in |ξ| on both sides of 0 plus a fine uniform grid around the
    /// family's expected center.
    Auto { points_per_decade: usize },
    Points(Vec<f64>),
}

impl Default for CubicGrid {
    fn default() -> Self {
        Self::Auto { points_per_decade: 120 }
    }
}

impl CubicGrid {
    fn points(&self, fam: &CubicFamily) -> Vec<f64> {
        let mut pts = match self {
            CubicGrid::Points(p) => p.clone(),
            CubicGrid::Auto { points_per_decade } => {
                let s = fam.scale.max(fam.center.abs()).max(f64::MIN_POSITIVE);
                // |ρ^{T₂}| eigenvalues cannot exceed the trace by much; 1e3·s is a loose cap.
                let hi = (1e3 * s).max(4.0 * fam.center.abs());
                let lo = s * 1e-12;
                let decades = (hi / lo).log10();
                let n = (decades * *points_per_decade as f64).ceil() as usize;
                let mut v = Vec::with_capacity(2 * n + 4001);
                for i in 0..=n {
                    let x = lo * 10f64.powf(decades * i as f64 / n as f64);
                    v.push(x);
                    v.push(-x);
                }
                let w = 3.0 * fam.scale;
                for i in 0..=4000 {
                    v.push(fam.center - w + 2.0 * w * i as f64 / 4000.0);
                }
                v
            }
        };
        pts.retain(|x| x.is_finite() && *x != 0.0);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }
}

/// Diagnostics of a cubic or fixed-point solve.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    pub grid_points: usize,
    pub iterations: Vec<usize>,
    pub residuals: Vec<f64>,
    pub flagged_intervals: Vec<(f64, f64)>,
}

/// Lower-half-plane root, treating pairs whose imaginary part is at rounding
/// level relative to the root as real.
fn physical_root(roots: &[c64]) -> Option<c64> {
    lower_half_root(roots).filter(|g| g.im.abs() > 1e-9 * g.norm())
}

fn has_pair(fam: &CubicFamily, xi: f64) -> bool {
    physical_root(&fam.at(xi).roots()).is_some()
}

/// Turn a cubic family into a density: locate the support where the cubic has a
/// complex pair, refine each edge by bisection, and check branch continuity by
/// tracking the root that behaves as 1/ξ at large |ξ|.
pub fn density_from_cubic(fam: &CubicFamily, grid: &CubicGrid) -> Result<(SpectralModel, SolverDiagnostics)> {
    let pts = grid.points(fam);
    if pts.len() < 2 {
        return Err(Error::Invalid("cubic search grid needs at least two points".into()));
    }
    let inside: Vec<bool> = pts.iter().map(|&x| has_pair(fam, x)).collect();
    let refine = |mut a: f64, mut b: f64, a_in: bool| {
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            if has_pair(fam, m) == a_in {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    };
    let mut support = Vec::new();
    let mut start: Option<f64> = if inside[0] { Some(pts[0]) } else { None };
    for i in 1..pts.len() {
        if inside[i] != inside[i - 1] {
            let edge = refine(pts[i - 1], pts[i], inside[i - 1]);
            if inside[i] {
                start = Some(edge);
            } else if let Some(s) = start.take() {
                support.push((s, edge));
            }
        }
        // The grid skips ξ = 0 itself; bridge supports that straddle it.
        if pts[i - 1] < 0.0 && pts[i] > 0.0 && inside[i - 1] && inside[i] {
            continue;
        }
    }
    if let Some(s) = start {
        support.push((s, *pts.last().expect("nonempty grid")));
    }
    let support = close_slivers(merge_intervals(support), 1e-6 * fam.scale);
    let touches_zero = support.iter().any(|&(a, b)| a <= 0.0 && b >= 0.0)
        || support.iter().any(|&(a, b)| a.abs() < 1e-9 * fam.scale || b.abs() < 1e-9 * fam.scale);

    let flagged = continuation_check(fam, &pts);
    let f = fam.clone();
    // Below |ξ| ~ 1e-5 scale the discriminant of the large roots cancels to
    // rounding; continue the density there by the power law seen just outside.
    let xc = 1e-5 * fam.scale;
    let near_zero = touches_zero;
    let density = move |x: f64| {
        if !near_zero || x.abs() >= xc {
            return f.density(x);
        }
        let edge = if x == 0.0 { xc } else { xc.copysign(x) };
        let (d1, d2) = (f.density(edge), f.density(2.0 * edge));
        if d1 <= 0.0 || d2 <= 0.0 {
            return f.density(x);
        }
        let gamma = (d2 / d1).log2();
        d1 * (x.abs().max(1e-12 * xc) / xc).powf(gamma)
    };
    let mut model = SpectralModel::new(fam.component, support, fam.normalization, fam.trace, density);
    model.zero_modes = fam.zero_modes;
    if touches_zero {
        model.singular_points.push(0.0);
    }
    model.flagged = flagged.clone();
    if !flagged.is_empty() {
        model.warnings.push(format!("{} interval(s) failed the branch continuation check", flagged.len()));
    }
    let diag = SolverDiagnostics { grid_points: pts.len(), flagged_intervals: flagged, ..Default::default() };
    Ok((model, diag))
}

/// Root-finding noise near a vanishing density shows up as hair-thin gaps and
/// islands; fill gaps and drop islands narrower than `eps`.
fn close_slivers(v: Vec<(f64, f64)>, eps: f64) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (a, b) in v {
        match out.last_mut() {
            Some(last) if a - last.1 < eps => last.1 = b,
            _ => out.push((a, b)),
        }
    }
    out.retain(|&(a, b)| b - a >= eps);
    out
}

fn continuation_check(fam: &CubicFamily, pts: &[f64]) -> Vec<(f64, f64)> {
    let track = |order: &mut dyn Iterator<Item = usize>| -> Vec<bool> {
        let mut ok = vec![true; pts.len()];
        let mut prev: Option<c64> = None;
        for i in order {
            let x = pts[i];
            let roots = fam.at(x).roots();
            if roots.is_empty() {
                continue;
            }
            let target = prev.unwrap_or(c64::new(1.0 / x, 0.0));
            let pick = roots
                .iter()
                .copied()
                .min_by(|a, b| {
                    let da = (a - target).norm().min((a.conj() - target).norm());
                    let db = (b - target).norm().min((b.conj() - target).norm());
                    da.total_cmp(&db)
                })
                .expect("nonempty");
            let rule = physical_root(&roots).map(|g| g.im.abs()).unwrap_or(0.0);
            let tol = 1e-6 * (rule.abs().max(pick.im.abs())) + 1e-12 * pick.norm();
            ok[i] = (pick.im.abs() - rule).abs() <= tol;
            prev = Some(if pick.im > 0.0 { pick.conj() } else { pick });
        }
        ok
    };
    let from_right = track(&mut (0..pts.len()).rev());
    let from_left = track(&mut (0..pts.len()));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for i in 0..pts.len() {
        if !from_right[i] && !from_left[i] {
            let lo = if i > 0 { pts[i - 1] } else { pts[i] };
            let hi = if i + 1 < pts.len() { pts[i + 1] } else { pts[i] };
            match out.last_mut() {
                Some(last) if lo <= last.1 => last.1 = hi,
                _ => out.push((lo, hi)),
            }
        }
    }
    out
}

/// Cubic-resolvent model of the P₂(q1) component.
pub fn cubic_p2(q1: i64, geom: &SectorGeometry, grid: &CubicGrid) -> Result<(SpectralModel, SolverDiagnostics)> {
    density_from_cubic(&g2_family(q1, geom, true)?, grid)
}

/// Cubic-resolvent model of the P₁(q1, q2) component.
pub fn cubic_p1(q1: i64, q2: i64, geom: &SectorGeometry, grid: &CubicGrid) -> Result<(SpectralModel, SolverDiagnostics)> {
    density_from_cubic(&g1_family(q1, q2, geom, true)?, grid)
}

/// Every cubic-resolvent component of the block.
pub fn cubic_components(geom: &SectorGeometry, grid: &CubicGrid) -> Result<(Vec<SpectralModel>, SolverDiagnostics)> {
    let mut out = Vec::new();
    let mut diag = SolverDiagnostics::default();
    let mut push = |(m, d): (SpectralModel, SolverDiagnostics)| {
        diag.grid_points += d.grid_points;
        diag.flagged_intervals.extend(d.flagged_intervals);
        out.push(m);
    };
    for s in enumerate_splits(geom)? {
        push(cubic_p2(s.q1, geom, grid)?);
    }
    for p in enumerate_pt_pairs(geom)? {
        if !p.is_diagonal(geom) {
            push(cubic_p1(p.q1, p.q2, geom, grid)?);
        }
    }
    Ok((out, diag))
}

/// Whether the G₂ / G₁ densities of a component diverge at ξ = 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriticalityFlags {
    pub g2_critical: bool,
    pub g1_critical: bool,
}

/// Exact integer criticality test. Each "large subsystem" condition is accepted
/// with either A1 or A2 in the large role, which keeps the flags invariant under
/// relabeling the two halves of A.
pub fn criticality_flags(q1: i64, q2: i64, geom: &SectorGeometry) -> Result<CriticalityFlags> {
    let d = |part, q| geom.dim(part, q).map(u128::from);
    let lb = d(Part::B, geom.q_b())?;
    let qb1 = geom.bar(q1);
    let (a1, a2b) = (d(Part::A1, q1)?, d(Part::A2, qb1)?);
    let g2 = a1 > 0 && a2b > 0 && (a1 == a2b * lb || a2b == a1 * lb);
    let g1 = if q2 == qb1 {
        false
    } else {
        let (a2, a1b) = (d(Part::A2, q2)?, d(Part::A1, geom.bar(q2))?);
        a1 * a2 > 0 && a1 * a2 == a1b * a2b && (a1 == a2 * lb || a2 == a1 * lb)
    };
    Ok(CriticalityFlags { g2_critical: g2, g1_critical: g1 })
}

/// Leading-order negativities deep in the maximally entangled regime.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxEntForms {
    /// Paired-block contribution 𝔫₁(q1, q2).
    pub n1: f64,
    /// Charge-diagonal contribution 𝔫₂(q1).
    pub n2: f64,
    /// ℤ_R total ½R^{N_A2}, when the symmetry is ℤ_R.
    pub zr_total: Option<f64>,
    /// 𝔫₂ on the semicircle-regime plateau, for comparison.
    pub rsb_plateau_n2: f64,
    /// The geometry is not deep in the regime (L_A1 ≥ 4 L_A2 L_B fails).
    pub outside_regime: bool,
}

pub fn max_ent_closed_forms(q1: i64, q2: i64, geom: &SectorGeometry) -> Result<MaxEntForms> {
    let qb1 = geom.bar(q1);
    let qb2 = geom.bar(q2);
    let l = |part, q| -> Result<f64> {
        let v = geom.ln_dim(part, q);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::EmptySector { what: format!("{part:?} with charge {q}") })
        }
    };
    let (a1, a1b, a2, a2b) = (l(Part::A1, q1)?, l(Part::A1, qb2)?, l(Part::A2, q2)?, l(Part::A2, qb1)?);
    let la = geom.ln_l_qa();
    let lb = geom.ln_l_qb();
    let n1 = (0.5 * (a1 + a1b) + a2 + a2b - la).exp() / 2.0;
    let n2 = (a1 + 2.0 * a2b - la).exp() / 2.0;
    let zr_total = match geom.symmetry().kind() {
        SymmetryKind::Zr => Some(0.5 * (geom.symmetry().r() as f64).powi(geom.n_a2() as i32)),
        SymmetryKind::U1 => None,
    };
    let rsb_plateau_n2 = 4.0 / (3.0 * PI) * (1.5 * (a1 + a2b) - la - 0.5 * lb).exp();
    let outside_regime = a1 - a2 - lb < 4f64.ln();
    Ok(MaxEntForms { n1, n2, zr_total, rsb_plateau_n2, outside_regime })
}

/// Im G₁ = Im G₂ deep in the ℤ_R maximally entangled regime:
/// R^{N_A1}(γ²/2)√(2/γ − (R^{N_A1}ξ + 1/γ)²).
pub fn zr_max_ent_im_g(geom: &SectorGeometry, xi: f64) -> Result<f64> {
    let r = require_zr(geom)? as f64;
    let g = crate::sectors::gamma_zr(geom)?;
    let rn = r.powi(geom.n_a1() as i32);
    Ok(rn * g * g / 2.0 * (2.0 / g - (rn * xi + 1.0 / g).powi(2)).max(0.0).sqrt())
}

/// Unprojected ℤ_R spectrum: one semicircle at R^{−N_A} of radius 2R^{−N/2}.
pub fn unprojected_zr_density(geom: &SectorGeometry) -> Result<SpectralModel> {
    let r = require_zr(geom)? as f64;
    let lr = r.ln();
    let (na, nb, n) = (geom.n_a() as f64, geom.n_b() as f64, geom.n() as f64);
    let pref = ((2.0 * na + nb) * lr).exp() / (2.0 * PI);
    let rad2 = 4.0 * (-n * lr).exp();
    let rad = rad2.sqrt();
    let c = (-na * lr).exp();
    let mass = (na * lr).exp();
    Ok(SpectralModel::new(ComponentTag::Total, vec![(c - rad, c + rad)], mass, 1.0, move |x| {
        pref * (rad2 - (x - c).powi(2)).max(0.0).sqrt()
    }))
}

/// Whether the unprojected ℤ_R negativity has a volume-law plateau.
pub fn unprojected_zr_plateau(geom: &SectorGeometry) -> Result<bool> {
    let r = require_zr(geom)? as f64;
    Ok(r.powf(geom.n_a() as f64 - geom.n_b() as f64) > 0.25)
}

/// Which self-energy the unprojected fixed-point solver iterates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelfEnergy {
    /// Semicircle-regime self-energy (linear in G).
    Rsb,
    /// General self-energy with the geometric resummations.
    #[default]
    General,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FixedPointOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
    /// ε relative to the spectral scale R^{−N/2}-like width of the problem.
    pub epsilon: f64,
    pub self_energy: SelfEnergy,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 200_000, damping: 0.5, epsilon: 1e-6, self_energy: SelfEnergy::General }
    }
}

/// Result of the unprojected fixed-point solve on a grid.
#[derive(Clone, Debug)]
pub struct UnprojectedSpectrum {
    pub grid: Vec<f64>,
    /// One tabulated model per charge imbalance Δq = q1 − q2.
    pub components: BTreeMap<i64, SpectralModel>,
    pub total: SpectralModel,
    pub diagnostics: SolverDiagnostics,
}

fn tabulated(component: ComponentTag, grid: Vec<f64>, values: Vec<f64>, normalization: f64, trace: f64) -> SpectralModel {
    let lo = grid.first().copied().unwrap_or(0.0);
    let hi = grid.last().copied().unwrap_or(0.0);
    SpectralModel::new(component, vec![(lo, hi)], normalization, trace, move |x| {
        let i = grid.partition_point(|&g| g <= x);
        if i == 0 || i >= grid.len() {
            return if i > 0 && x == grid[grid.len() - 1] { values[values.len() - 1] } else { 0.0 };
        }
        let t = (x - grid[i - 1]) / (grid[i] - grid[i - 1]);
        values[i - 1] * (1.0 - t) + values[i] * t
    })
}

/// Solve the coupled self-energy equations of the unprojected ρ_A^{T₂} at
/// ξ + iε for every grid point, with damped fixed-point iteration.
pub fn unprojected_fixed_point(
    geom: &SectorGeometry,
    grid: &[f64],
    opts: &FixedPointOptions,
) -> Result<UnprojectedSpectrum> {
    let sym = geom.symmetry();
    let q = geom.total_charge();
    let ln = |part: Part, c: i64| geom.ln_dim(part, c);
    // S = Σ_{q_A} L_{q_A} L_{q_B}
    let ln_terms: Vec<f64> = sym
        .charges(geom.n_a())
        .into_iter()
        .map(|qa| ln(Part::A, qa) + ln(Part::B, sym.sub(q, qa)))
        .filter(|l| l.is_finite())
        .collect();
    let lmax = ln_terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ln_s = lmax + ln_terms.iter().map(|l| (l - lmax).exp()).sum::<f64>().ln();

    // Unknowns: every (q1, q2) with both factors nonempty.
    let mut pairs = Vec::new();
    for q1 in sym.charges(geom.n_a1()) {
        for q2 in sym.charges(geom.n_a2()) {
            if ln(Part::A1, q1).is_finite() && ln(Part::A2, q2).is_finite() {
                pairs.push((q1, q2));
            }
        }
    }
    let index: BTreeMap<(i64, i64), usize> = pairs.iter().enumerate().map(|(i, &p)| (p, i)).collect();
    let qbs = sym.charges(geom.n_b());

    // Precomputed couplings for each unknown.
    struct Term {
        coeff: f64,
        partner: usize,
        ratio: f64,
    }
    struct Row {
        first: f64,
        first_ratio: f64,
        terms: Vec<Term>,
    }
    let mut rows = Vec::with_capacity(pairs.len());
    for &(q1, q2) in &pairs {
        let lbq = ln(Part::B, sym.sub(q, sym.add(q1, q2)));
        let first = if lbq.is_finite() { (lbq - ln_s).exp() } else { 0.0 };
        let first_ratio = (ln(Part::A1, q1) - ln_s).exp();
        let mut terms = Vec::new();
        for &qb in &qbs {
            let c1 = sym.sub(sym.sub(q, q2), qb);
            let c2 = sym.sub(sym.sub(q, q1), qb);
            let l = ln(Part::B, qb) + ln(Part::A2, c2) + ln(Part::A1, c1);
            if !l.is_finite() {
                continue;
            }
            let Some(&partner) = index.get(&(c1, c2)) else { continue };
            terms.push(Term {
                coeff: (l - 2.0 * ln_s).exp(),
                partner,
                ratio: (ln(Part::A1, q1) + ln(Part::A1, c1) - 2.0 * ln_s).exp(),
            });
        }
        rows.push(Row { first, first_ratio, terms });
    }
    let general = opts.self_energy == SelfEnergy::General;
    let sigma = |g: &[c64], k: usize| -> c64 {
        let row = &rows[k];
        let one = c64::new(1.0, 0.0);
        let mut s = if general {
            let t = g[k] * row.first_ratio;
            one * row.first / (one - t * t)
        } else {
            one * row.first
        };
        for t in &row.terms {
            let v = g[t.partner] * t.coeff;
            s += if general { v / (one - g[k] * g[t.partner] * t.ratio) } else { v };
        }
        s
    };

    let eps = opts.epsilon * spectral_width(geom, ln_s);
    let weights: Vec<f64> = pairs.iter().map(|&(a, b)| (ln(Part::A1, a) + ln(Part::A2, b)).exp()).collect();
    let mut dq_values: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
    let mut diag = SolverDiagnostics { grid_points: grid.len(), ..Default::default() };
    let mut g: Vec<c64> = Vec::new();
    for &x in grid {
        let z = c64::new(x, eps);
        if g.is_empty() {
            g = vec![c64::new(1.0, 0.0) / z; pairs.len()];
        }
        let mut history = Vec::new();
        let mut iters = 0;
        let mut converged = false;
        while iters < opts.max_iter {
            iters += 1;
            let next: Vec<c64> = (0..pairs.len())
                .map(|k| {
                    let new = c64::new(1.0, 0.0) / (z - sigma(&g, k));
                    g[k] * (1.0 - opts.damping) + new * opts.damping
                })
                .collect();
            let change = next.iter().zip(&g).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            let size = next.iter().map(|a| a.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
            g = next;
            let res = change / size;
            if history.len() < 64 || iters % 1000 == 0 {
                history.push(res);
            }
            if !res.is_finite() {
                break;
            }
            if res < opts.tol {
                converged = true;
                break;
            }
        }
        if !converged || g.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NoConvergence {
                iterations: iters,
                residual: history.last().copied().unwrap_or(f64::NAN),
                history,
            });
        }
        diag.iterations.push(iters);
        diag.residuals.push(history.last().copied().unwrap_or(0.0));
        for (k, &(q1, q2)) in pairs.iter().enumerate() {
            let dq = q1 - q2;
            let dq = match sym.kind() {
                SymmetryKind::Zr => sym.canonical(dq),
                SymmetryKind::U1 => dq,
            };
            let v = dq_values.entry(dq).or_insert_with(|| vec![0.0; grid.len()]);
            let i = diag.iterations.len() - 1;
            v[i] += weights[k] * (-g[k].im).max(0.0) / PI;
        }
    }
    let mut components = BTreeMap::new();
    let mut norms: BTreeMap<i64, f64> = BTreeMap::new();
    for (k, &(q1, q2)) in pairs.iter().enumerate() {
        let dq = match sym.kind() {
            SymmetryKind::Zr => sym.canonical(q1 - q2),
            SymmetryKind::U1 => q1 - q2,
        };
        *norms.entry(dq).or_default() += weights[k];
    }
    let mut all = Vec::new();
    for (dq, vals) in dq_values {
        let m = tabulated(ComponentTag::DeltaQ(dq), grid.to_vec(), vals, norms[&dq], f64::NAN);
        all.push(m.clone());
        components.insert(dq, m);
    }
    let mut total = SpectralModel::sum(&all, ComponentTag::Total);
    total.trace = 1.0;
    Ok(UnprojectedSpectrum { grid: grid.to_vec(), components, total, diagnostics: diag })
}

/// 1/√S, the scale of the semicircle radius.
fn spectral_width(_geom: &SectorGeometry, ln_s: f64) -> f64 {
    (-0.5 * ln_s).exp()
}

/// A complete theory prediction for one charge block.
#[derive(Clone, Debug)]
pub struct TheorySpectrum {
    pub model: String,
    pub components: Vec<SpectralModel>,
    pub p1: Option<SpectralModel>,
    pub p2: Option<SpectralModel>,
    pub total: SpectralModel,
    pub diagnostics: SolverDiagnostics,
}

impl TheorySpectrum {
    pub fn component(&self, c: Option<crate::negativity::Component>) -> Option<&SpectralModel> {
        match c {
            Some(crate::negativity::Component::P1) => self.p1.as_ref(),
            Some(crate::negativity::Component::P2) => self.p2.as_ref(),
            None => Some(&self.total),
        }
    }
}

fn assemble(model: &str, components: Vec<SpectralModel>, diagnostics: SolverDiagnostics) -> TheorySpectrum {
    let p1: Vec<SpectralModel> =
        components.iter().filter(|m| matches!(m.component, ComponentTag::P1 { .. })).cloned().collect();
    let p2: Vec<SpectralModel> =
        components.iter().filter(|m| matches!(m.component, ComponentTag::P2 { .. })).cloned().collect();
    let total = SpectralModel::sum(&components, ComponentTag::Total);
    TheorySpectrum {
        model: model.to_string(),
        p1: (!p1.is_empty()).then(|| SpectralModel::sum(&p1, ComponentTag::P1Sum)),
        p2: (!p2.is_empty()).then(|| SpectralModel::sum(&p2, ComponentTag::P2Sum)),
        components,
        total,
        diagnostics,
    }
}

/// A way of predicting the spectrum of a block, selectable by name.
pub trait TheoryModel: Send + Sync {
    fn name(&self) -> &str;
    fn description(&self) -> &str;
    fn spectrum(&self, geom: &SectorGeometry) -> Result<TheorySpectrum>;
}

struct Semicircle;
impl TheoryModel for Semicircle {
    fn name(&self) -> &str {
        "semicircle"
    }
    fn description(&self) -> &str {
        "closed-form P1/P2 semicircles of the replica-symmetry-breaking regime"
    }
    fn spectrum(&self, geom: &SectorGeometry) -> Result<TheorySpectrum> {
        Ok(assemble(self.name(), semicircle_components(geom)?, SolverDiagnostics::default()))
    }
}

struct Cubic {
    grid: CubicGrid,
}
impl TheoryModel for Cubic {
    fn name(&self) -> &str {
        "cubic"
    }
    fn description(&self) -> &str {
        "pointwise solution of the cubic Schwinger-Dyson equations for every component"
    }
    fn spectrum(&self, geom: &SectorGeometry) -> Result<TheorySpectrum> {
        let (c, d) = cubic_components(geom, &self.grid)?;
        Ok(assemble(self.name(), c, d))
    }
}

struct ZrSemicircle;
impl TheoryModel for ZrSemicircle {
    fn name(&self) -> &str {
        "zr-semicircle"
    }
    fn description(&self) -> &str {
        "Z_R two-semicircle closed form"
    }
    fn spectrum(&self, geom: &SectorGeometry) -> Result<TheorySpectrum> {
        let (p1, p2) = zr_semicircle_parts(geom)?;
        let total = SpectralModel::sum(&[p1.clone(), p2.clone()], ComponentTag::Total);
        Ok(TheorySpectrum {
            model: self.name().into(),
            components: vec![p1.clone(), p2.clone()],
            p1: Some(p1),
            p2: Some(p2),
            total,
            diagnostics: SolverDiagnostics::default(),
        })
    }
}

struct ZrCubic {
    grid: CubicGrid,
}
impl TheoryModel for ZrCubic {
    fn name(&self) -> &str {
        "zr-cubic"
    }
    fn description(&self) -> &str {
        "Z_R pair of cubic resolvent equations"
    }
    fn spectrum(&self, geom: &SectorGeometry) -> Result<TheorySpectrum> {
        // The printed equations take A1 as the large side.
        let g = if geom.n_a2() > geom.n_a1() { geom.swapped() } else { *geom };
        let (p1, d1) = density_from_cubic(&zr_family(&g, ZrResolvent::G1)?, &self.grid)?;
        let (p2, d2) = density_from_cubic(&zr_family(&g, ZrResolvent::G2)?, &self.grid)?;
        let total = SpectralModel::sum(&[p1.clone(), p2.clone()], ComponentTag::Total);
        let mut diagnostics = d1;
        diagnostics.grid_points += d2.grid_points;
        diagnostics.flagged_intervals.extend(d2.flagged_intervals);
        Ok(TheorySpectrum {
            model: self.name().into(),
            components: vec![p1.clone(), p2.clone()],
            p1: Some(p1),
            p2: Some(p2),
            total,
            diagnostics,
        })
    }
}

struct UnprojectedZr;
impl TheoryModel for UnprojectedZr {
    fn name(&self) -> &str {
        "unprojected-zr"
    }
    fn description(&self) -> &str {
        "Z_R spectrum of the partial transpose of the full block-diagonal state"
    }
    fn spectrum(&self, geom: &SectorGeometry) -> Result<TheorySpectrum> {
        let total = unprojected_zr_density(geom)?;
        Ok(TheorySpectrum {
            model: self.name().into(),
            components: vec![total.clone()],
            p1: None,
            p2: None,
            total,
            diagnostics: SolverDiagnostics::default(),
        })
    }
}

struct UnprojectedFixedPoint {
    opts: FixedPointOptions,
    points: usize,
}
impl TheoryModel for UnprojectedFixedPoint {
    fn name(&self) -> &str {
        "unprojected-fixed-point"
    }
    fn description(&self) -> &str {
        "damped fixed-point solution of the coupled unprojected self-energy equations"
    }
    fn spectrum(&self, geom: &SectorGeometry) -> Result<TheorySpectrum> {
        let grid = unprojected_grid(geom, self.points)?;
        let s = unprojected_fixed_point(geom, &grid, &self.opts)?;
        Ok(TheorySpectrum {
            model: self.name().into(),
            components: s.components.into_values().collect(),
            p1: None,
            p2: None,
            total: s.total,
            diagnostics: s.diagnostics,
        })
    }
}

/// A grid that covers the unprojected spectrum: |ξ| up to a few times the largest
/// of the mean eigenvalue and the semicircle width.
pub fn unprojected_grid(geom: &SectorGeometry, points: usize) -> Result<Vec<f64>> {
    let sym = geom.symmetry();
    let mut ln_terms = Vec::new();
    let mut ln_dim_a = f64::NEG_INFINITY;
    for qa in sym.charges(geom.n_a()) {
        let l = geom.ln_dim(Part::A, qa) + geom.ln_dim(Part::B, sym.sub(geom.total_charge(), qa));
        if l.is_finite() {
            ln_terms.push(l);
        }
        let la = geom.ln_dim(Part::A, qa);
        if la.is_finite() {
            ln_dim_a = if ln_dim_a.is_finite() { ln_dim_a + (1.0 + (la - ln_dim_a).exp()).ln() } else { la };
        }
    }
    let lmax = ln_terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ln_s = lmax + ln_terms.iter().map(|l| (l - lmax).exp()).sum::<f64>().ln();
    let mean = (-ln_dim_a).exp();
    let width = 2.0 * (-0.5 * ln_s).exp();
    let hi = 3.0 * mean.max(width) + mean;
    let lo = -3.0 * mean.max(width);
    let n = points.max(16);
    Ok((0..n).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / n as f64).collect())
}

/// Theory models addressable by name.
pub struct TheoryRegistry {
    entries: BTreeMap<String, Arc<dyn TheoryModel>>,
}

impl Default for TheoryRegistry {
    fn default() -> Self {
        let mut r = Self { entries: BTreeMap::new() };
        r.register(Arc::new(Semicircle));
        r.register(Arc::new(Cubic { grid: CubicGrid::default() }));
        r.register(Arc::new(ZrSemicircle));
        r.register(Arc::new(ZrCubic { grid: CubicGrid::default() }));
        r.register(Arc::new(UnprojectedZr));
        r.register(Arc::new(UnprojectedFixedPoint { opts: FixedPointOptions::default(), points: 400 }));
        r
    }
}

impl TheoryRegistry {
    pub fn register(&mut self, model: Arc<dyn TheoryModel>) {
        self.entries.insert(model.name().to_string(), model);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn TheoryModel>> {
        self.entries
            .get(name)
            .cloned()
            .ok_or_else(|| Error::UnknownStrategy { kind: "theory model", name: name.into() })
    }

    /// (name, description) pairs.
    pub fn list(&self) -> Vec<(String, String)> {
        self.entries.values().map(|m| (m.name().to_string(), m.description().to_string())).collect()
    }

    /// Register a fixed-point model with custom options under its standard name.
    pub fn with_fixed_point(mut self, opts: FixedPointOptions, points: usize) -> Self {
        self.register(Arc::new(UnprojectedFixedPoint { opts, points }));
        self
    }

    pub fn with_cubic_grid(mut self, grid: CubicGrid) -> Self {
        self.register(Arc::new(Cubic { grid: grid.clone() }));
        self.register(Arc::new(ZrCubic { grid }));
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sectors::Symmetry;

    fn z(r: u32, a1: usize, a2: usize, b: usize, qa: i64) -> SectorGeometry {
        SectorGeometry::new(Symmetry::zr(r).unwrap(), a1, a2, b, qa, qa).unwrap()
    }

    #[test]
    fn p2_center_radius_and_mass() {
        let g = z(2, 3, 3, 7, 0);
        let m = semicircle_p2(0, &g).unwrap();
        let (a, b) = m.support[0];
        assert!(((a + b) / 2.0 - 1.0 / 32.0).abs() < 1e-15);
        assert!(((b - a) / 2.0 - 2f64.powi(-5)).abs() < 1e-15);
        let (em, et) = m.sum_rule_errors();
        assert!(em < 1e-8 && et < 1e-8, "{em} {et}");
        let m1 = semicircle_p2(1, &g).unwrap();
        assert_eq!(m.support, m1.support);
    }

    #[test]
    fn p1_gap_and_symmetry() {
        let u1 = Symmetry::u1();
        let g = SectorGeometry::new(u1, 5, 5, 12, 11, 4).unwrap();
        let m = semicircle_p1(0, 3, &g).unwrap();
        assert_eq!(m.support.len(), 2);
        assert!(m.support[1].0 > 0.0);
        for i in 1..50 {
            let x = m.support[1].1 * i as f64 / 50.0;
            assert_eq!(m.density(x), m.density(-x));
        }
        let (em, _) = m.sum_rule_errors();
        assert!(em < 1e-7, "{em}");
        let zr = z(3, 2, 2, 4, 1);
        let m = semicircle_p1(0, 0, &zr).unwrap();
        assert_eq!(m.support.len(), 1);
        assert!(m.support[0].0 < 0.0 && m.support[0].1 > 0.0);
    }

    #[test]
    fn zr_two_semicircles() {
        let g = z(3, 3, 3, 5, 0);
        let m = zr_semicircle_density(&g).unwrap();
        assert!(m.support[0].0 < 0.0);
        assert!((m.mass() / 729.0 - 1.0).abs() < 1e-7);
        assert!((m.first_moment() - 1.0).abs() < 1e-7);
    }

    #[test]
    fn zr_closed_negativity_threshold() {
        // R^{N_A - N_B - 1} = 1/4 exactly.
        let g = z(2, 2, 2, 7, 0);
        assert_eq!(zr_closed_negativity(&g).unwrap().n2, 0.0);
        let g = z(2, 3, 3, 12, 0);
        let n = zr_closed_negativity(&g).unwrap();
        assert!((n.n1 - 2.0 / (3.0 * PI) * 2f64.powf(-3.5)).abs() < 1e-15);
    }

    #[test]
    fn cubic_coefficients() {
        let g = z(2, 3, 3, 7, 0);
        let c = sd_cubic_g2(0, &g, 0.0).unwrap();
        assert_eq!(c.c3, 0.0);
        assert_eq!(c.c0, 1.0);
        // Critical line N_A1 = N_A2 + N_B - 1.
        let g = z(3, 6, 2, 5, 0);
        let c = sd_cubic_zr(&g, 0.01, ZrResolvent::G1).unwrap();
        assert!(c.c2.abs() < 1e-18, "{}", c.c2);
    }

    #[test]
    fn zr_g1_cubic_is_general_cubic_rescaled() {
        let g = z(3, 4, 2, 3, 1);
        for &x in &[-0.01, 0.003, 0.02] {
            let a = sd_cubic_zr(&g, x, ZrResolvent::G1).unwrap();
            let b = sd_cubic_g1(0, 0, &g, x).unwrap();
            let k = -x * alpha(0, 0, &g).unwrap();
            let scale = [b.c3, b.c2, b.c1, b.c0].iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (u, v) in [(a.c3, b.c3), (a.c2, b.c2), (a.c1, b.c1), (a.c0, b.c0)] {
                assert!((u * k - v).abs() <= 1e-12 * scale, "{u} {v}");
            }
        }
    }

    #[test]
    fn criticality() {
        let g = z(3, 2, 6, 5, 0);
        let f = criticality_flags(0, 1, &g).unwrap();
        assert!(f.g2_critical && f.g1_critical);
        let g = z(3, 2, 5, 5, 0);
        let f = criticality_flags(0, 1, &g).unwrap();
        assert!(!f.g2_critical && !f.g1_critical);
        let u1 = Symmetry::u1();
        let g = SectorGeometry::new(u1, 4, 3, 3, 4, 3).unwrap();
        assert!(!criticality_flags(0, 0, &g).unwrap().g1_critical);
    }

    #[test]
    fn max_ent_zr_values() {
        let g = z(2, 8, 2, 3, 0);
        let f = max_ent_closed_forms(0, 1, &g).unwrap();
        assert_eq!(f.zr_total, Some(2.0));
        assert!((f.n1 - 0.5).abs() < 1e-12 && (f.n2 - 0.5).abs() < 1e-12);
        assert!(!f.outside_regime);
    }

    #[test]
    fn cubic_reproduces_semicircle_in_rsb_limit() {
        let g = z(2, 3, 3, 24, 0);
        let (m, _) = cubic_p2(0, &g, &CubicGrid::default()).unwrap();
        let s = semicircle_p2(0, &g).unwrap();
        let grid = s.default_grid(400);
        let peak = s.tabulate(&grid).into_iter().fold(0.0, f64::max);
        for &x in &grid {
            assert!((m.density(x) - s.density(x)).abs() < 1e-2 * peak, "{x}");
        }
        let (em, et) = m.sum_rule_errors();
        assert!(em < 1e-5 && et < 1e-5, "{em} {et}");
    }

    #[test]
    fn unprojected_closed_form_sum_rules() {
        let g = z(2, 3, 3, 6, 0);
        let m = unprojected_zr_density(&g).unwrap();
        let (em, et) = m.sum_rule_errors();
        assert!(em < 1e-8 && et < 1e-8);
        assert!(unprojected_zr_plateau(&z(2, 4, 4, 9, 0)).unwrap());
        assert!(!unprojected_zr_plateau(&z(2, 2, 2, 7, 0)).unwrap());
    }

    #[test]
    fn registry() {
        let r = TheoryRegistry::default();
        assert!(r.get("semicircle").is_ok());
        assert!(matches!(r.get("nope"), Err(Error::UnknownStrategy { .. })));
        assert_eq!(r.list().len(), 6);
    }
}

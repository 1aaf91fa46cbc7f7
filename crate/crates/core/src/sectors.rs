//! Charge bookkeeping for the two Abelian symmetries: ℤ_R qudits and U(1) qubits.
//!
//! Every sector dimension is available both as an exact integer (for sampling and
//! layout) and as a natural logarithm (for the parameter families and asymptotics).

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which group acts on the sites.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SymmetryKind {
    Zr,
    U1,
}

/// An on-site Abelian symmetry together with its local dimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Symmetry {
    kind: SymmetryKind,
    r: u32,
}

impl Symmetry {
    /// ℤ_R acting on qudits of dimension `r` through the digit sum.
    pub fn zr(r: u32) -> Result<Self> {
        if r < 2 {
            return Err(Error::Geometry(format!("Z_R needs R >= 2, got {r}")));
        }
        Ok(Self { kind: SymmetryKind::Zr, r })
    }

    /// Particle-number conservation on qubits.
    pub fn u1() -> Self {
        Self { kind: SymmetryKind::U1, r: 2 }
    }

    pub fn new(kind: SymmetryKind, r: u32) -> Result<Self> {
        match kind {
            SymmetryKind::Zr => Self::zr(r),
            SymmetryKind::U1 if r == 2 => Ok(Self::u1()),
            SymmetryKind::U1 => Err(Error::Geometry(format!(
                "U(1) is defined on qubits, got local dimension {r}"
            ))),
        }
    }

    pub fn kind(&self) -> SymmetryKind {
        self.kind
    }

    /// Local Hilbert-space dimension of one site.
    pub fn r(&self) -> u32 {
        self.r
    }

    /// Reduce a charge to its canonical representative.
    pub fn canonical(&self, q: i64) -> i64 {
        match self.kind {
            SymmetryKind::Zr => q.rem_euclid(self.r as i64),
            SymmetryKind::U1 => q,
        }
    }

    pub fn add(&self, a: i64, b: i64) -> i64 {
        self.canonical(a + b)
    }

    pub fn sub(&self, a: i64, b: i64) -> i64 {
        self.canonical(a - b)
    }

    /// Charges that an `n`-site region can carry, in ascending order.
    pub fn charges(&self, n: usize) -> Vec<i64> {
        match self.kind {
            SymmetryKind::Zr if n == 0 => vec![0],
            SymmetryKind::Zr => (0..self.r as i64).collect(),
            SymmetryKind::U1 => (0..=n as i64).collect(),
        }
    }

    /// Charge of a basis string given as base-R digits.
    pub fn string_charge(&self, digits: &[u32]) -> i64 {
        self.canonical(digits.iter().map(|&d| d as i64).sum())
    }
}

impl fmt::Display for Symmetry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            SymmetryKind::Zr => write!(f, "Z{}", self.r),
            SymmetryKind::U1 => write!(f, "U(1)"),
        }
    }
}

fn binomial(n: u64, k: u64) -> Option<u64> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        // c * (n - i) is divisible by (i + 1) at every step.
        c = c.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    u64::try_from(c).ok()
}

fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    (0..k).map(|i| ((n - i) as f64 / (i + 1) as f64).ln()).sum()
}

/// Dimension of the charge-`q` sector of an `n`-site region.
///
/// ℤ_R gives R^{n−1} for n ≥ 1 and treats the empty region as carrying only charge 0;
/// U(1) gives C(n, q) and 0 outside 0..=n. Fails only when the value exceeds `u64`.
pub fn sector_dim(sym: Symmetry, n: usize, q: i64) -> Result<u64> {
    match sym.kind {
        SymmetryKind::Zr => {
            if n == 0 {
                return Ok(u64::from(sym.canonical(q) == 0));
            }
            (sym.r as u64)
                .checked_pow((n - 1) as u32)
                .ok_or_else(|| Error::Overflow(format!("{sym} sector of {n} sites")))
        }
        SymmetryKind::U1 => {
            if q < 0 || q as u64 > n as u64 {
                return Ok(0);
            }
            binomial(n as u64, q as u64)
                .ok_or_else(|| Error::Overflow(format!("C({n}, {q})")))
        }
    }
}

/// Natural logarithm of [`sector_dim`]; `-inf` for empty sectors. Never overflows.
pub fn ln_sector_dim(sym: Symmetry, n: usize, q: i64) -> f64 {
    match sym.kind {
        SymmetryKind::Zr => {
            if n == 0 {
                if sym.canonical(q) == 0 {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            } else {
                (n - 1) as f64 * (sym.r as f64).ln()
            }
        }
        SymmetryKind::U1 => {
            if q < 0 || q as u64 > n as u64 {
                f64::NEG_INFINITY
            } else {
                ln_binomial(n as u64, q as u64)
            }
        }
    }
}

/// The regions of the tripartition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Part {
    A1,
    A2,
    /// A = A1 ∪ A2.
    A,
    B,
}

/// A tripartite system A1 ∪ A2 ∪ B in a fixed global charge sector, with the
/// charge of A pinned to `q_a`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectorGeometry {
    sym: Symmetry,
    n_a1: usize,
    n_a2: usize,
    n_b: usize,
    total_charge: i64,
    q_a: i64,
    q_b: i64,
}

impl SectorGeometry {
    /// Validates that both the A and B sectors are nonempty.
    pub fn new(
        sym: Symmetry,
        n_a1: usize,
        n_a2: usize,
        n_b: usize,
        total_charge: i64,
        q_a: i64,
    ) -> Result<Self> {
        let total_charge = sym.canonical(total_charge);
        let q_a = sym.canonical(q_a);
        let q_b = sym.sub(total_charge, q_a);
        let geom = Self { sym, n_a1, n_a2, n_b, total_charge, q_a, q_b };
        if geom.ln_dim(Part::B, q_b) == f64::NEG_INFINITY {
            return Err(Error::EmptySector { what: format!("B (q_B = {q_b}, N_B = {n_b})") });
        }
        if geom.ln_dim(Part::A, q_a) == f64::NEG_INFINITY {
            return Err(Error::EmptySector {
                what: format!("A (q_A = {q_a}, N_A = {})", n_a1 + n_a2),
            });
        }
        Ok(geom)
    }

    pub fn symmetry(&self) -> Symmetry {
        self.sym
    }
    pub fn n_a1(&self) -> usize {
        self.n_a1
    }
    pub fn n_a2(&self) -> usize {
        self.n_a2
    }
    pub fn n_b(&self) -> usize {
        self.n_b
    }
    pub fn n_a(&self) -> usize {
        self.n_a1 + self.n_a2
    }
    pub fn n(&self) -> usize {
        self.n_a() + self.n_b
    }
    pub fn total_charge(&self) -> i64 {
        self.total_charge
    }
    pub fn q_a(&self) -> i64 {
        self.q_a
    }
    pub fn q_b(&self) -> i64 {
        self.q_b
    }

    pub fn sites(&self, part: Part) -> usize {
        match part {
            Part::A1 => self.n_a1,
            Part::A2 => self.n_a2,
            Part::A => self.n_a(),
            Part::B => self.n_b,
        }
    }

    /// The complementary charge q̄ = q_A − q.
    pub fn bar(&self, q: i64) -> i64 {
        self.sym.sub(self.q_a, q)
    }

    pub fn dim(&self, part: Part, q: i64) -> Result<u64> {
        sector_dim(self.sym, self.sites(part), q)
    }

    pub fn ln_dim(&self, part: Part, q: i64) -> f64 {
        ln_sector_dim(self.sym, self.sites(part), q)
    }

    /// L_{q_A}.
    pub fn l_qa(&self) -> Result<u64> {
        self.dim(Part::A, self.q_a)
    }

    /// L_{q_B}.
    pub fn l_qb(&self) -> Result<u64> {
        self.dim(Part::B, self.q_b)
    }

    pub fn ln_l_qa(&self) -> f64 {
        self.ln_dim(Part::A, self.q_a)
    }

    pub fn ln_l_qb(&self) -> f64 {
        self.ln_dim(Part::B, self.q_b)
    }

    /// The same system with the roles of A1 and A2 exchanged.
    pub fn swapped(&self) -> Self {
        Self { n_a1: self.n_a2, n_a2: self.n_a1, ..*self }
    }

    /// Same sites and total charge, different charge of A.
    pub fn with_q_a(&self, q_a: i64) -> Result<Self> {
        Self::new(self.sym, self.n_a1, self.n_a2, self.n_b, self.total_charge, q_a)
    }

    fn require(&self, part: Part, q: i64) -> Result<f64> {
        let l = self.ln_dim(part, q);
        if l == f64::NEG_INFINITY {
            return Err(Error::EmptySector { what: format!("{part:?} with charge {q}") });
        }
        Ok(l)
    }
}

/// One way of distributing q_A between A1 and A2.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectorSplit {
    pub q1: i64,
    /// Charge of A2, equal to q̄₁ = q_A − q1.
    pub q2: i64,
    /// (L_{A1,q1}, L_{A2,q2}).
    pub dims: (u64, u64),
}

impl SectorSplit {
    pub fn dim(&self) -> u64 {
        self.dims.0 * self.dims.1
    }
}

/// All splits of q_A with both factors nonempty, ascending in q1.
pub fn enumerate_splits(geom: &SectorGeometry) -> Result<Vec<SectorSplit>> {
    let mut out = Vec::new();
    for q1 in geom.sym.charges(geom.n_a1) {
        let q2 = geom.bar(q1);
        let d1 = geom.dim(Part::A1, q1)?;
        let d2 = geom.dim(Part::A2, q2)?;
        if d1 > 0 && d2 > 0 {
            d1.checked_mul(d2)
                .ok_or_else(|| Error::Overflow(format!("split ({q1}, {q2})")))?;
            out.push(SectorSplit { q1, q2, dims: (d1, d2) });
        }
    }
    Ok(out)
}

/// A pair of A1/A2 charges (q1, q2) that can appear as a row or column label of the
/// partially transposed block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PtPair {
    pub q1: i64,
    pub q2: i64,
    /// (L_{A1,q1}, L_{A2,q2}).
    pub dims: (u64, u64),
}

impl PtPair {
    pub fn dim(&self) -> u64 {
        self.dims.0 * self.dims.1
    }

    /// The pair (q̄₂, q̄₁) this one is coupled to by the partial transpose.
    pub fn partner(&self, geom: &SectorGeometry) -> (i64, i64) {
        (geom.bar(self.q2), geom.bar(self.q1))
    }

    /// Charge-diagonal pairs (q2 = q̄₁) are their own partners.
    pub fn is_diagonal(&self, geom: &SectorGeometry) -> bool {
        self.q2 == geom.bar(self.q1)
    }
}

/// Every (q1, q2) such that both (q1, q2) and (q̄₂, q̄₁) are nonempty, ordered by q1
/// then q2. The list is closed under the partner map and its dimensions add up to
/// the size of the space on which the partial transpose of a q_A block acts.
pub fn enumerate_pt_pairs(geom: &SectorGeometry) -> Result<Vec<PtPair>> {
    let mut out = Vec::new();
    for q1 in geom.sym.charges(geom.n_a1) {
        for q2 in geom.sym.charges(geom.n_a2) {
            let d1 = geom.dim(Part::A1, q1)?;
            let d2 = geom.dim(Part::A2, q2)?;
            let p1 = geom.dim(Part::A1, geom.bar(q2))?;
            let p2 = geom.dim(Part::A2, geom.bar(q1))?;
            if d1 > 0 && d2 > 0 && p1 > 0 && p2 > 0 {
                d1.checked_mul(d2)
                    .ok_or_else(|| Error::Overflow(format!("pair ({q1}, {q2})")))?;
                out.push(PtPair { q1, q2, dims: (d1, d2) });
            }
        }
    }
    Ok(out)
}

/// α_{q1 q2} = L_{A1,q1} L_{A2,q2} / (L_{q_A} L_{q_B}).
pub fn alpha(q1: i64, q2: i64, geom: &SectorGeometry) -> Result<f64> {
    Ok(ln_alpha(q1, q2, geom)?.exp())
}

pub fn ln_alpha(q1: i64, q2: i64, geom: &SectorGeometry) -> Result<f64> {
    Ok(geom.require(Part::A1, q1)? + geom.require(Part::A2, q2)? - geom.ln_l_qa() - geom.ln_l_qb())
}

/// β_{q1} = L_{A1,q1} / (L_{q_A} L_{q_B}).
pub fn beta(q1: i64, geom: &SectorGeometry) -> Result<f64> {
    Ok(ln_beta(q1, geom)?.exp())
}

pub fn ln_beta(q1: i64, geom: &SectorGeometry) -> Result<f64> {
    Ok(geom.require(Part::A1, q1)? - geom.ln_l_qa() - geom.ln_l_qb())
}

/// γ = R^{−N_A1 + N_A2 + N_B − 1}, the ℤ_R control parameter of the maximally
/// entangled regime.
pub fn gamma_zr(geom: &SectorGeometry) -> Result<f64> {
    if geom.sym.kind != SymmetryKind::Zr {
        return Err(Error::Symmetry("gamma is defined for Z_R only".into()));
    }
    let e = -(geom.n_a1 as f64) + geom.n_a2 as f64 + geom.n_b as f64 - 1.0;
    Ok((e * (geom.sym.r as f64).ln()).exp())
}

/// Binary Shannon entropy in nats.
pub fn shannon_f(nu: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&nu) {
        return Err(Error::Domain { value: nu, domain: "[0, 1]" });
    }
    let h = |p: f64| if p > 0.0 { -p * p.ln() } else { 0.0 };
    Ok(h(nu) + h(1.0 - nu))
}

/// Probability p_{q_A} ∝ L_{q_A} L_{Q−q_A} of finding A in each charge sector
/// when the whole system carries charge `total_charge`.
pub fn born_weights(
    sym: Symmetry,
    n_a: usize,
    n_b: usize,
    total_charge: i64,
) -> Result<BTreeMap<i64, f64>> {
    let logs: Vec<(i64, f64)> = sym
        .charges(n_a)
        .into_iter()
        .map(|qa| {
            let qb = sym.sub(total_charge, qa);
            (qa, ln_sector_dim(sym, n_a, qa) + ln_sector_dim(sym, n_b, qb))
        })
        .filter(|(_, l)| l.is_finite())
        .collect();
    let max = logs.iter().map(|(_, l)| *l).fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::EmptySector { what: format!("every A/B sector at Q = {total_charge}") });
    }
    let z: f64 = logs.iter().map(|(_, l)| (l - max).exp()).sum();
    Ok(logs.into_iter().map(|(q, l)| (q, (l - max).exp() / z)).collect())
}

/// Basis strings of an `n`-site region with charge `q`, encoded as base-R integers
/// (first site most significant) in ascending order.
pub fn basis_strings(sym: Symmetry, n: usize, q: i64) -> Result<Vec<u64>> {
    let r = sym.r as u64;
    let total = r
        .checked_pow(n as u32)
        .filter(|&t| t <= 1 << 30)
        .ok_or_else(|| Error::Overflow(format!("{sym} basis of {n} sites")))?;
    let q = sym.canonical(q);
    let mut out = Vec::with_capacity(sector_dim(sym, n, q)? as usize);
    let mut digits = vec![0u32; n];
    for code in 0..total {
        let mut c = code;
        for d in digits.iter_mut().rev() {
            *d = (c % r) as u32;
            c /= r;
        }
        if sym.string_charge(&digits) == q {
            out.push(code);
        }
    }
    Ok(out)
}

/// Base-R digits of `code` over `n` sites, first site first.
pub fn digits_of(code: u64, r: u32, n: usize) -> Vec<u32> {
    let mut digits = vec![0u32; n];
    let mut c = code;
    for d in digits.iter_mut().rev() {
        *d = (c % r as u64) as u32;
        c /= r as u64;
    }
    digits
}

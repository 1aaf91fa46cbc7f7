//! Statevector simulation of charge measurements that leave the state on A intact.
//!
//! Sites are ordered big-endian: site 0 is the most significant digit of the basis
//! index. An ancilla is prepended as a new site 0 for each measurement round and
//! removed after its readout.

use std::f64::consts::PI;
use std::io::{Read, Write};

use faer::{c64, Mat};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::sample_rng;
use crate::sectors::{Symmetry, SymmetryKind};

/// Largest statevector, ancilla excluded.
pub const MAX_STATE_DIM: usize = 1 << 24;

const NORM_TOL: f64 = 1e-12;

/// H_R with entries ω^{jk}/√R.
pub fn hadamard_r(r: u32) -> Mat<c64> {
    let s = 1.0 / (r as f64).sqrt();
    Mat::from_fn(r as usize, r as usize, |j, k| {
        let phase = 2.0 * PI * ((j * k) % r as usize) as f64 / r as f64;
        c64::new(phase.cos() * s, phase.sin() * s)
    })
}

/// Σ_j |j⟩⟨j| ⊗ Z^j with Z = diag(1, ω, …, ω^{R−1}); control is the first factor.
pub fn cz_r(r: u32) -> Mat<c64> {
    let r = r as usize;
    Mat::from_fn(r * r, r * r, |a, b| {
        if a != b {
            return c64::new(0.0, 0.0);
        }
        let (j, k) = (a / r, a % r);
        let phase = 2.0 * PI * ((j * k) % r) as f64 / r as f64;
        c64::new(phase.cos(), phase.sin())
    })
}

/// Z^t = diag(1, e^{iπt}).
pub fn z_power(t: f64) -> Mat<c64> {
    let mut m = Mat::<c64>::zeros(2, 2);
    m[(0, 0)] = c64::new(1.0, 0.0);
    m[(1, 1)] = c64::new((PI * t).cos(), (PI * t).sin());
    m
}

/// |0⟩⟨0| ⊗ 1 + |1⟩⟨1| ⊗ U.
pub fn controlled(u: &Mat<c64>) -> Mat<c64> {
    let d = u.nrows();
    Mat::from_fn(2 * d, 2 * d, |a, b| match (a < d, b < d) {
        (true, true) => c64::new(if a == b { 1.0 } else { 0.0 }, 0.0),
        (false, false) => u[(a - d, b - d)],
        _ => c64::new(0.0, 0.0),
    })
}

/// A pure state on a register of qudits.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    dims: Vec<u32>,
    amps: Vec<c64>,
}

impl StateVector {
    /// Wrap amplitudes that are already normalized.
    pub fn new(dims: Vec<u32>, amps: Vec<c64>) -> Result<Self> {
        let s = Self::unchecked(dims, amps)?;
        let n = s.norm();
        if (n - 1.0).abs() > NORM_TOL {
            return Err(Error::Numerical(format!("state norm {n} differs from 1")));
        }
        Ok(s)
    }

    /// Normalize the given amplitudes.
    pub fn normalized(dims: Vec<u32>, mut amps: Vec<c64>) -> Result<Self> {
        let n = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(n > 0.0) {
            return Err(Error::Numerical("cannot normalize the zero vector".into()));
        }
        amps.iter_mut().for_each(|a| *a /= n);
        Self::unchecked(dims, amps)
    }

    fn unchecked(dims: Vec<u32>, amps: Vec<c64>) -> Result<Self> {
        let mut total: usize = 1;
        for &d in &dims {
            if d < 2 {
                return Err(Error::Invalid("every site needs dimension at least 2".into()));
            }
            total = total
                .checked_mul(d as usize)
                .filter(|&t| t <= MAX_STATE_DIM)
                .ok_or_else(|| Error::Overflow(format!("statevector larger than {MAX_STATE_DIM}")))?;
        }
        if amps.len() != total {
            return Err(Error::Layout(format!("{} amplitudes for dimension {total}", amps.len())));
        }
        Ok(Self { dims, amps })
    }

    /// Computational basis state with the given digits.
    pub fn basis(dims: Vec<u32>, digits: &[u32]) -> Result<Self> {
        if digits.len() != dims.len() || digits.iter().zip(&dims).any(|(x, d)| x >= d) {
            return Err(Error::Invalid("digits do not fit the register".into()));
        }
        let total = dims.iter().map(|&d| d as usize).product();
        let mut amps = vec![c64::new(0.0, 0.0); total];
        let idx = digits.iter().zip(&dims).fold(0usize, |acc, (&x, &d)| acc * d as usize + x as usize);
        amps[idx] = c64::new(1.0, 0.0);
        Self::new(dims, amps)
    }

    /// Haar-like random state from independent complex Gaussians.
    pub fn random<R: Rng>(dims: Vec<u32>, rng: &mut R) -> Result<Self> {
        use rand_distr::{Distribution, StandardNormal};
        let total = dims.iter().map(|&d| d as usize).product();
        let amps = (0..total)
            .map(|_| c64::new(StandardNormal.sample(rng), StandardNormal.sample(rng)))
            .collect();
        Self::normalized(dims, amps)
    }

    pub fn dims(&self) -> &[u32] {
        &self.dims
    }

    pub fn amplitudes(&self) -> &[c64] {
        &self.amps
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    fn strides(&self) -> Vec<usize> {
        let mut s = vec![1usize; self.dims.len()];
        for k in (0..self.dims.len().saturating_sub(1)).rev() {
            s[k] = s[k + 1] * self.dims[k + 1] as usize;
        }
        s
    }

    /// Digits of a basis index.
    pub fn digits(&self, mut idx: usize) -> Vec<u32> {
        let mut out = vec![0u32; self.dims.len()];
        for k in (0..self.dims.len()).rev() {
            out[k] = (idx % self.dims[k] as usize) as u32;
            idx /= self.dims[k] as usize;
        }
        out
    }

    /// Apply a gate acting on `sites` (first site most significant in the gate's basis).
    pub fn apply(&mut self, sites: &[usize], u: &Mat<c64>) -> Result<()> {
        let strides = self.strides();
        let mut sub = 1usize;
        for &s in sites {
            let d = *self.dims.get(s).ok_or_else(|| Error::Invalid(format!("no site {s}")))? as usize;
            sub *= d;
        }
        if u.nrows() != sub || u.ncols() != sub {
            return Err(Error::Layout(format!("gate of size {} on sites of dimension {sub}", u.nrows())));
        }
        let offsets: Vec<usize> = (0..sub)
            .map(|mut s| {
                let mut off = 0;
                for &site in sites.iter().rev() {
                    let d = self.dims[site] as usize;
                    off += (s % d) * strides[site];
                    s /= d;
                }
                off
            })
            .collect();
        let mut buf = vec![c64::new(0.0, 0.0); sub];
        for base in 0..self.amps.len() {
            if sites.iter().any(|&s| (base / strides[s]) % self.dims[s] as usize != 0) {
                continue;
            }
            for (b, &o) in buf.iter_mut().zip(&offsets) {
                *b = self.amps[base + o];
            }
            for (i, &o) in offsets.iter().enumerate() {
                let mut acc = c64::new(0.0, 0.0);
                for (j, b) in buf.iter().enumerate() {
                    acc += u[(i, j)] * b;
                }
                self.amps[base + o] = acc;
            }
        }
        Ok(())
    }

    fn with_ancilla(&self, d: u32) -> Result<Self> {
        let mut dims = vec![d];
        dims.extend_from_slice(&self.dims);
        let mut amps = self.amps.clone();
        amps.resize(self.amps.len() * d as usize, c64::new(0.0, 0.0));
        Self::unchecked(dims, amps)
    }

    /// |⟨a|b⟩|².
    pub fn fidelity(&self, other: &Self) -> Result<f64> {
        if self.dims != other.dims {
            return Err(Error::Layout("fidelity between different registers".into()));
        }
        let ip: c64 = self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum();
        Ok(ip.norm_sqr())
    }

    /// Little-endian dump: u64 site count, u64 per site dimension, i64 charge, then
    /// interleaved (re, im) f64 pairs.
    pub fn write_binary<W: Write>(&self, mut w: W, charge: i64) -> Result<()> {
        w.write_all(&(self.dims.len() as u64).to_le_bytes())?;
        for &d in &self.dims {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        w.write_all(&charge.to_le_bytes())?;
        for a in &self.amps {
            w.write_all(&a.re.to_le_bytes())?;
            w.write_all(&a.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<(Self, i64)> {
        let mut b8 = [0u8; 8];
        let mut u64_ = |r: &mut R| -> Result<u64> {
            r.read_exact(&mut b8)?;
            Ok(u64::from_le_bytes(b8))
        };
        let n = u64_(&mut r)? as usize;
        if n > 64 {
            return Err(Error::Invalid(format!("implausible site count {n}")));
        }
        let dims = (0..n).map(|_| u64_(&mut r).map(|d| d as u32)).collect::<Result<Vec<_>>>()?;
        let charge = u64_(&mut r)? as i64;
        let total: usize = dims.iter().map(|&d| d as usize).product();
        if total > MAX_STATE_DIM {
            return Err(Error::Overflow(format!("statevector larger than {MAX_STATE_DIM}")));
        }
        let mut amps = Vec::with_capacity(total);
        for _ in 0..total {
            let re = f64::from_le_bytes({
                r.read_exact(&mut b8)?;
                b8
            });
            let im = f64::from_le_bytes({
                r.read_exact(&mut b8)?;
                b8
            });
            amps.push(c64::new(re, im));
        }
        Ok((Self::unchecked(dims, amps)?, charge))
    }
}

/// How the ancilla readout is decided.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutcomeMode {
    /// Born-rule sampling.
    Sampled,
    /// Post-select these outcomes (one per round); rounds beyond the list are sampled.
    Forced,
}

/// One ancilla readout.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Round {
    pub index: usize,
    /// The charge is learned modulo this.
    pub modulus: u64,
    pub outcome: u32,
    /// Probability of this outcome given the previous rounds.
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementRecord {
    pub rounds: Vec<Round>,
    pub final_charge: i64,
    pub post_state: StateVector,
}

impl MeasurementRecord {
    /// Product of the per-round probabilities.
    pub fn probability(&self) -> f64 {
        self.rounds.iter().map(|r| r.probability).product()
    }
}

fn check_b_sites(state: &StateVector, b_sites: &[usize], d: u32) -> Result<()> {
    if b_sites.is_empty() {
        return Err(Error::Invalid("B must contain at least one site".into()));
    }
    let mut seen = b_sites.to_vec();
    seen.sort_unstable();
    seen.dedup();
    if seen.len() != b_sites.len() {
        return Err(Error::Invalid("repeated B site".into()));
    }
    for &s in b_sites {
        match state.dims.get(s) {
            Some(&x) if x == d => {}
            Some(&x) => return Err(Error::Invalid(format!("site {s} has dimension {x}, expected {d}"))),
            None => return Err(Error::Invalid(format!("no site {s}"))),
        }
    }
    Ok(())
}

/// Read out ancilla site 0, returning (outcome, probability, remaining state).
fn read_ancilla<R: Rng>(s: &StateVector, forced: Option<u32>, rng: &mut R) -> Result<(u32, f64, StateVector)> {
    let n = (s.norm() - 1.0).abs();
    if n > NORM_TOL {
        return Err(Error::Numerical(format!("circuit changed the norm by {n:e}")));
    }
    let d = s.dims[0] as usize;
    let block = s.amps.len() / d;
    let probs: Vec<f64> = (0..d).map(|k| s.amps[k * block..(k + 1) * block].iter().map(|a| a.norm_sqr()).sum()).collect();
    let k = match forced {
        Some(k) if (k as usize) < d => k as usize,
        Some(k) => return Err(Error::Invalid(format!("forced outcome {k} out of range"))),
        None => {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = d - 1;
            for (i, p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    pick = i;
                    break;
                }
            }
            while probs[pick] == 0.0 && pick > 0 {
                pick -= 1;
            }
            pick
        }
    };
    let p = probs[k];
    if !(p > 1e-300) {
        return Err(Error::Numerical(format!("outcome {k} has zero probability")));
    }
    // The readout leaves the ancilla in |k⟩; its conditional state on the rest
    // is the slice below, so the ancilla factors out exactly.
    let rest = StateVector::normalized(s.dims[1..].to_vec(), s.amps[k * block..(k + 1) * block].to_vec())?;
    Ok((k as u32, p, rest))
}

/// One-round ℤ_R charge measurement of the B sites.
pub fn measure_charge_zr<R: Rng>(
    state: &StateVector,
    b_sites: &[usize],
    r: u32,
    forced: Option<u32>,
    rng: &mut R,
) -> Result<MeasurementRecord> {
    check_b_sites(state, b_sites, r)?;
    let mut s = state.with_ancilla(r)?;
    let h = hadamard_r(r);
    let cz = cz_r(r);
    s.apply(&[0], &h)?;
    for &b in b_sites {
        s.apply(&[0, b + 1], &cz)?;
    }
    s.apply(&[0], &h.adjoint().to_owned())?;
    let (k, p, post) = read_ancilla(&s, forced, rng)?;
    Ok(MeasurementRecord {
        rounds: vec![Round { index: 0, modulus: r as u64, outcome: k, probability: p }],
        final_charge: k as i64,
        post_state: post,
    })
}

/// ⌈log₂(N_B + 1)⌉.
pub fn u1_rounds(n_b: usize) -> usize {
    let mut k = 0;
    while (1usize << k) < n_b + 1 {
        k += 1;
    }
    k
}

/// Binary-ladder U(1) charge measurement. Round n (from 1) learns the charge of B
/// modulo 2ⁿ; the ancilla phase is corrected by Z^{−c/2^{n−1}} where c is the
/// residue modulo 2^{n−1} found so far.
pub fn measure_charge_u1<R: Rng>(
    state: &StateVector,
    b_sites: &[usize],
    forced: &[u32],
    rng: &mut R,
) -> Result<MeasurementRecord> {
    check_b_sites(state, b_sites, 2)?;
    if state.dims.iter().any(|&d| d != 2) {
        return Err(Error::Invalid("U(1) measurement expects a qubit register".into()));
    }
    let rounds = u1_rounds(b_sites.len());
    let h = hadamard_r(2);
    let mut current = state.clone();
    let mut residue: u64 = 0;
    let mut record = Vec::with_capacity(rounds);
    for n in 1..=rounds {
        let half = 1u64 << (n - 1);
        let mut s = current.with_ancilla(2)?;
        s.apply(&[0], &h)?;
        let cz = controlled(&z_power(1.0 / half as f64));
        for &b in b_sites {
            s.apply(&[0, b + 1], &cz)?;
        }
        s.apply(&[0], &z_power(-(residue as f64) / half as f64))?;
        s.apply(&[0], &h)?;
        let (bit, p, post) = read_ancilla(&s, forced.get(n - 1).copied(), rng)?;
        residue += bit as u64 * half;
        record.push(Round { index: n - 1, modulus: 2 * half, outcome: bit, probability: p });
        current = post;
    }
    Ok(MeasurementRecord { rounds: record, final_charge: residue as i64, post_state: current })
}

/// Diagonal of the projector onto B strings of charge q (B basis big-endian).
pub fn reference_projector_diagonal(n_b: usize, q: i64, sym: Symmetry) -> Result<Vec<f64>> {
    let d = match sym.kind() {
        SymmetryKind::Zr => sym.r() as usize,
        SymmetryKind::U1 => 2,
    };
    let total = (d as u128).checked_pow(n_b as u32).filter(|&t| t <= MAX_STATE_DIM as u128);
    let total = total.ok_or_else(|| Error::Overflow("projector too large".into()))? as usize;
    let target = sym.canonical(q);
    Ok((0..total)
        .map(|mut idx| {
            let mut digits = Vec::with_capacity(n_b);
            for _ in 0..n_b {
                digits.push((idx % d) as u32);
                idx /= d;
            }
            if sym.string_charge(&digits) == target {
                1.0
            } else {
                0.0
            }
        })
        .collect())
}

/// The projector as a dense matrix.
pub fn reference_projector(n_b: usize, q: i64, sym: Symmetry) -> Result<Mat<f64>> {
    let diag = reference_projector_diagonal(n_b, q, sym)?;
    Ok(Mat::from_fn(diag.len(), diag.len(), |i, j| if i == j { diag[i] } else { 0.0 }))
}

/// (Π_B^{(q)} ⊗ 1)|ψ⟩ normalized, and its squared norm.
pub fn project_reference(state: &StateVector, b_sites: &[usize], q: i64, sym: Symmetry) -> Result<(StateVector, f64)> {
    let target = sym.canonical(q);
    let mut amps = state.amps.clone();
    for (i, a) in amps.iter_mut().enumerate() {
        let digits = state.digits(i);
        let b: Vec<u32> = b_sites.iter().map(|&s| digits[s]).collect();
        if sym.string_charge(&b) != target {
            *a = c64::new(0.0, 0.0);
        }
    }
    let p = amps.iter().map(|a| a.norm_sqr()).sum::<f64>();
    Ok((StateVector::normalized(state.dims.clone(), amps)?, p))
}

/// Which protocol a shot runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    Zr,
    U1,
}

/// Repeat a measurement with one RNG stream per shot.
pub fn run_shots(
    state: &StateVector,
    b_sites: &[usize],
    sym: Symmetry,
    shots: u64,
    seed: u64,
) -> Result<Vec<MeasurementRecord>> {
    (0..shots)
        .into_par_iter()
        .map(|shot| {
            let mut rng = sample_rng(seed, shot);
            match sym.kind() {
                SymmetryKind::Zr => measure_charge_zr(state, b_sites, sym.r(), None, &mut rng),
                SymmetryKind::U1 => measure_charge_u1(state, b_sites, &[], &mut rng),
            }
        })
        .collect()
}

/// CSV with columns (shot, round, modulus, outcome, probability).
pub fn write_shot_csv<W: Write>(w: W, records: &[MeasurementRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["shot", "round", "modulus", "outcome", "probability"])?;
    for (shot, rec) in records.iter().enumerate() {
        for r in &rec.rounds {
            w.write_record([
                shot.to_string(),
                r.index.to_string(),
                r.modulus.to_string(),
                r.outcome.to_string(),
                format!("{:e}", r.probability),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Rows of a shot CSV as (shot, round).
pub fn read_shot_csv<R: Read>(r: R) -> Result<Vec<(u64, Round)>> {
    let mut rd = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for rec in rd.deserialize::<(u64, usize, u64, u32, f64)>() {
        let (shot, index, modulus, outcome, probability) = rec?;
        out.push((shot, Round { index, modulus, outcome, probability }));
    }
    Ok(out)
}

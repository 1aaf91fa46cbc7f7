//! Partial transpose of charge blocks and the negativity measures built on it.
//!
//! Transposing A2 inside a q_A block produces an operator that no longer lives in
//! the q_A sector: its row and column labels are pairs (q1, q2) whose partner
//! (q̄₂, q̄₁) is also nonempty (see [`enumerate_pt_pairs`]). In that basis ρ^{T₂} is
//! a direct sum of
//!
//! * charge-diagonal blocks on (q1, q̄₁), whose eigenvalues form the P₂ component;
//! * off-diagonal pairs (q1, q2) ⊕ (q̄₂, q̄₁) of the form [[0, M], [M†, 0]], whose
//!   eigenvalues ±σ(M) form the P₁ component. When the two sides differ in size the
//!   surplus directions are exact zero modes.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::sync::Arc;

use faer::{c64, Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::ensemble::BlockDensityMatrix;
use crate::error::{Error, Result};
use crate::linalg::{self, pairwise_sum};
use crate::sectors::{basis_strings, enumerate_pt_pairs, Part, PtPair, SectorGeometry};

/// Eigenvalues this small are treated as exact zeros.
pub const ZERO_CLAMP: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Component {
    P1,
    P2,
}

/// Basis of the space the partial transpose of one q_A block acts on.
#[derive(Clone, Debug)]
pub struct PtLayout {
    geom: SectorGeometry,
    pairs: Vec<PtPair>,
    offsets: Vec<usize>,
    lookup: HashMap<(i64, i64), usize>,
    dim: usize,
}

impl PtLayout {
    pub fn new(geom: &SectorGeometry) -> Result<Self> {
        let pairs = enumerate_pt_pairs(geom)?;
        let mut offsets = Vec::with_capacity(pairs.len());
        let mut lookup = HashMap::new();
        let mut dim = 0usize;
        for (k, p) in pairs.iter().enumerate() {
            offsets.push(dim);
            lookup.insert((p.q1, p.q2), k);
            dim += p.dim() as usize;
        }
        Ok(Self { geom: *geom, pairs, offsets, lookup, dim })
    }

    pub fn pairs(&self) -> &[PtPair] {
        &self.pairs
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn find(&self, q1: i64, q2: i64) -> Option<usize> {
        self.lookup.get(&(q1, q2)).copied()
    }

    pub fn index(&self, pair: usize, i1: usize, i2: usize) -> usize {
        self.offsets[pair] + i1 * self.pairs[pair].dims.1 as usize + i2
    }

    /// (pair, i1, i2) of a row index.
    pub fn locate(&self, row: usize) -> (usize, usize, usize) {
        let k = self.offsets.partition_point(|&o| o <= row) - 1;
        let local = row - self.offsets[k];
        let d2 = self.pairs[k].dims.1 as usize;
        (k, local / d2, local % d2)
    }
}

/// An operator on the partial-transpose space of a q_A block.
#[derive(Clone, Debug)]
pub struct PtOperator {
    pub layout: Arc<PtLayout>,
    pub matrix: Mat<c64>,
}

impl PtOperator {
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        linalg::hermitian_eigenvalues(self.matrix.as_ref())
    }

    pub fn trace(&self) -> f64 {
        linalg::trace(self.matrix.as_ref()).re
    }
}

/// ρ placed on the partial-transpose space (zero outside the charge-diagonal pairs).
pub fn embed(rho: &BlockDensityMatrix) -> Result<PtOperator> {
    let layout = Arc::new(PtLayout::new(&rho.geom)?);
    let src = &rho.layout;
    let mut map = Vec::with_capacity(src.dim());
    for (s, split) in src.splits().iter().enumerate() {
        let k = layout
            .find(split.q1, split.q2)
            .ok_or_else(|| Error::Layout(format!("split ({}, {}) missing", split.q1, split.q2)))?;
        for i1 in 0..split.dims.0 as usize {
            for i2 in 0..split.dims.1 as usize {
                debug_assert_eq!(map.len(), src.index(s, i1, i2));
                map.push(layout.index(k, i1, i2));
            }
        }
    }
    let mut m = Mat::<c64>::zeros(layout.dim(), layout.dim());
    for (c, &tc) in map.iter().enumerate() {
        for (r, &tr) in map.iter().enumerate() {
            m[(tr, tc)] = rho.rho[(r, c)];
        }
    }
    Ok(PtOperator { layout, matrix: m })
}

/// Transpose the A2 indices: ⟨i₁ i₂|O^{T₂}|j₁ j₂⟩ = ⟨i₁ j₂|O|j₁ i₂⟩.
pub fn transpose_a2(op: &PtOperator) -> Result<PtOperator> {
    let layout = &op.layout;
    let n = layout.dim();
    let mut out = Mat::<c64>::zeros(n, n);
    let rows: Vec<(usize, usize, usize)> = (0..n).map(|r| layout.locate(r)).collect();
    let pairs = layout.pairs();
    for c in 0..n {
        let (pc, j1, j2) = rows[c];
        for r in 0..n {
            let v = op.matrix[(r, c)];
            if v == c64::new(0.0, 0.0) {
                continue;
            }
            let (pr, i1, i2) = rows[r];
            let (a, b) = (pairs[pr], pairs[pc]);
            let (Some(nr), Some(nc)) = (layout.find(a.q1, b.q2), layout.find(b.q1, a.q2)) else {
                return Err(Error::Layout(format!(
                    "entry couples ({}, {}) to ({}, {}) outside the transposed layout",
                    a.q1, a.q2, b.q1, b.q2
                )));
            };
            out[(layout.index(nr, i1, j2), layout.index(nc, j1, i2))] = v;
        }
    }
    Ok(PtOperator { layout: layout.clone(), matrix: out })
}

/// ρ^{T₂} as a dense operator on the partial-transpose space.
pub fn partial_transpose(rho: &BlockDensityMatrix) -> Result<PtOperator> {
    transpose_a2(&embed(rho)?)
}

#[derive(Clone, Debug)]
pub struct DiagonalBlock {
    pub q1: i64,
    pub matrix: Mat<c64>,
}

#[derive(Clone, Debug)]
pub struct PairedBlock {
    pub pair: (i64, i64),
    pub partner: (i64, i64),
    /// Rows over `pair`, columns over `partner`.
    pub coupling: Mat<c64>,
}

#[derive(Clone, Debug)]
pub struct PTBlockDecomposition {
    pub diagonal_blocks: Vec<DiagonalBlock>,
    pub paired_blocks: Vec<PairedBlock>,
    /// (master seed, sample index) of the source block, if sampled.
    pub provenance: Option<(u64, u64)>,
}

/// Eigenvalues of ρ^{T₂} tagged by component. Zero modes forced by unequal partner
/// dimensions are counted separately.
#[derive(Clone, Debug, Default)]
pub struct PtSpectrum {
    pub eigenvalues: Vec<(f64, Component)>,
    pub zero_modes: usize,
}

impl PtSpectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len() + self.zero_modes
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn clamped(&self) -> impl Iterator<Item = f64> + '_ {
        self.eigenvalues.iter().map(|&(x, _)| if x.abs() < ZERO_CLAMP { 0.0 } else { x })
    }

    /// −Σ_{ξ<0} ξ.
    pub fn negativity(&self) -> f64 {
        let neg: Vec<f64> = self.clamped().filter(|&x| x < 0.0).map(|x| -x).collect();
        pairwise_sum(&neg)
    }

    /// ‖ρ^{T₂}‖₁.
    pub fn trace_norm(&self) -> f64 {
        let abs: Vec<f64> = self.clamped().map(f64::abs).collect();
        pairwise_sum(&abs)
    }

    pub fn log_negativity(&self) -> f64 {
        self.trace_norm().ln()
    }

    pub fn component(&self, c: Component) -> impl Iterator<Item = f64> + '_ {
        self.eigenvalues.iter().filter(move |e| e.1 == c).map(|e| e.0)
    }
}

/// Split ρ^{T₂} into its charge-diagonal and paired sub-blocks without forming it.
pub fn decompose_pt(rho: &BlockDensityMatrix) -> Result<PTBlockDecomposition> {
    let geom = &rho.geom;
    let src = &rho.layout;
    let m = &rho.rho;
    let mut diagonal_blocks = Vec::new();
    for (s, split) in src.splits().iter().enumerate() {
        let (d1, d2) = (split.dims.0 as usize, split.dims.1 as usize);
        let mut d = Mat::<c64>::zeros(d1 * d2, d1 * d2);
        for j1 in 0..d1 {
            for j2 in 0..d2 {
                for i1 in 0..d1 {
                    for i2 in 0..d2 {
                        d[(i1 * d2 + i2, j1 * d2 + j2)] =
                            m[(src.index(s, i1, j2), src.index(s, j1, i2))];
                    }
                }
            }
        }
        diagonal_blocks.push(DiagonalBlock { q1: split.q1, matrix: d });
    }

    let layout = PtLayout::new(geom)?;
    let mut paired_blocks = Vec::new();
    for (k, p) in layout.pairs().iter().enumerate() {
        if p.is_diagonal(geom) {
            continue;
        }
        let (pq1, pq2) = p.partner(geom);
        let kp = layout.find(pq1, pq2).expect("pair layout is closed under partners");
        if kp < k {
            continue;
        }
        // Rows (i1 ∈ q1, i2 ∈ q2), columns (j1 ∈ q̄₂, j2 ∈ q̄₁); entry ρ[(i1, j2), (j1, i2)]
        // with the row in split q1 and the column in split q̄₂.
        let row_split = src.split_of_q1(p.q1).expect("q1 split exists");
        let col_split = src.split_of_q1(pq1).expect("q̄₂ split exists");
        let (d1, d2) = (p.dims.0 as usize, p.dims.1 as usize);
        let q = &layout.pairs()[kp];
        let (e1, e2) = (q.dims.0 as usize, q.dims.1 as usize);
        let mut c = Mat::<c64>::zeros(d1 * d2, e1 * e2);
        for j1 in 0..e1 {
            for j2 in 0..e2 {
                for i1 in 0..d1 {
                    for i2 in 0..d2 {
                        c[(i1 * d2 + i2, j1 * e2 + j2)] =
                            m[(src.index(row_split, i1, j2), src.index(col_split, j1, i2))];
                    }
                }
            }
        }
        paired_blocks.push(PairedBlock { pair: (p.q1, p.q2), partner: (pq1, pq2), coupling: c });
    }
    Ok(PTBlockDecomposition { diagonal_blocks, paired_blocks, provenance: rho.lineage })
}

impl PTBlockDecomposition {
    pub fn spectrum(&self) -> Result<PtSpectrum> {
        let mut out = PtSpectrum::default();
        for b in &self.diagonal_blocks {
            out.eigenvalues
                .extend(linalg::hermitian_eigenvalues(b.matrix.as_ref())?.into_iter().map(|x| (x, Component::P2)));
        }
        for b in &self.paired_blocks {
            let (sv, zeros) = linalg::singular_values_gram(b.coupling.as_ref())?;
            for s in sv {
                out.eigenvalues.push((s, Component::P1));
                out.eigenvalues.push((-s, Component::P1));
            }
            out.zero_modes += zeros;
        }
        Ok(out)
    }

    /// ρ^{T₂} rebuilt from the sub-blocks, in the ordering of `layout`.
    pub fn reassemble(&self, layout: &PtLayout) -> Result<Mat<c64>> {
        let n = layout.dim();
        let mut out = Mat::<c64>::zeros(n, n);
        let start = |q1: i64, q2: i64| {
            layout
                .find(q1, q2)
                .map(|k| layout.index(k, 0, 0))
                .ok_or_else(|| Error::Layout(format!("pair ({q1}, {q2}) missing")))
        };
        let geom = &layout.geom;
        for b in &self.diagonal_blocks {
            let o = start(b.q1, geom.bar(b.q1))?;
            copy_into(&mut out, o, o, b.matrix.as_ref(), false);
        }
        for b in &self.paired_blocks {
            let r = start(b.pair.0, b.pair.1)?;
            let c = start(b.partner.0, b.partner.1)?;
            copy_into(&mut out, r, c, b.coupling.as_ref(), false);
            copy_into(&mut out, c, r, b.coupling.as_ref(), true);
        }
        Ok(out)
    }
}

fn copy_into(dst: &mut Mat<c64>, r0: usize, c0: usize, src: MatRef<'_, c64>, adjoint: bool) {
    let (rows, cols) = if adjoint { (src.ncols(), src.nrows()) } else { (src.nrows(), src.ncols()) };
    for j in 0..cols {
        for i in 0..rows {
            dst[(r0 + i, c0 + j)] = if adjoint { src[(j, i)].conj() } else { src[(i, j)] };
        }
    }
}

fn check_hermitian(rho: &BlockDensityMatrix) -> Result<()> {
    let dev = linalg::hermitian_deviation(rho.rho.as_ref());
    if dev > 1e-10 * linalg::max_abs(rho.rho.as_ref()).max(f64::MIN_POSITIVE) {
        return Err(Error::NotHermitian(dev));
    }
    Ok(())
}

/// Spectrum of ρ^{T₂} via the block decomposition.
pub fn pt_spectrum(rho: &BlockDensityMatrix) -> Result<PtSpectrum> {
    check_hermitian(rho)?;
    decompose_pt(rho)?.spectrum()
}

/// 𝒩 = −Σ_{ξ<0} ξ over the spectrum of ρ^{T₂}; equals (‖ρ^{T₂}‖₁ − 1)/2 at unit trace.
pub fn negativity(rho: &BlockDensityMatrix) -> Result<f64> {
    Ok(pt_spectrum(rho)?.negativity())
}

/// ℰ = ln ‖ρ^{T₂}‖₁ in nats.
pub fn log_negativity(rho: &BlockDensityMatrix) -> Result<f64> {
    Ok(pt_spectrum(rho)?.log_negativity())
}

/// Σ_{q_A} p_{q_A} ℰ(ρ^{(q_A)}).
pub fn symmetry_averaged_logneg(per_sector: &BTreeMap<i64, f64>, weights: &BTreeMap<i64, f64>) -> Result<f64> {
    let total: f64 = weights.values().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Invalid(format!("Born weights sum to {total}")));
    }
    let mut acc = 0.0;
    for (q, &p) in weights {
        if p == 0.0 {
            continue;
        }
        let e = per_sector
            .get(q)
            .ok_or_else(|| Error::EmptySector { what: format!("log-negativity for q_A = {q}") })?;
        acc += p * e;
    }
    Ok(acc)
}

/// Dense ρ_A on the full product space A1 ⊗ A2 (index = a1 · R^{N_A2} + a2, with
/// a1, a2 the base-R codes of the site strings) assembled from charge blocks.
pub fn assemble_full(blocks: &[BlockDensityMatrix]) -> Result<Mat<c64>> {
    let first = blocks.first().ok_or_else(|| Error::Invalid("no blocks".into()))?;
    let g = first.geom;
    let sym = g.symmetry();
    let d2 = (sym.r() as usize).pow(g.n_a2() as u32);
    let d = (sym.r() as usize).pow(g.n_a() as u32);
    let mut out = Mat::<c64>::zeros(d, d);
    for b in blocks {
        let map = full_index_map(b)?;
        for (c, &tc) in map.iter().enumerate() {
            for (r, &tr) in map.iter().enumerate() {
                out[(tr, tc)] = b.rho[(r, c)];
            }
        }
    }
    debug_assert!(d2 > 0);
    Ok(out)
}

/// Position of every block row in the full product basis.
pub fn full_index_map(b: &BlockDensityMatrix) -> Result<Vec<usize>> {
    let g = &b.geom;
    let sym = g.symmetry();
    let d2 = (sym.r() as usize).pow(g.n_a2() as u32);
    let mut map = Vec::with_capacity(b.layout.dim());
    for split in b.layout.splits() {
        let s1 = basis_strings(sym, g.sites(Part::A1), split.q1)?;
        let s2 = basis_strings(sym, g.sites(Part::A2), split.q2)?;
        for &a1 in &s1 {
            for &a2 in &s2 {
                map.push(a1 as usize * d2 + a2 as usize);
            }
        }
    }
    Ok(map)
}

/// Partial transpose on a plain d1·d2 product space.
pub fn partial_transpose_dense(m: MatRef<'_, c64>, d1: usize, d2: usize) -> Result<Mat<c64>> {
    if m.nrows() != d1 * d2 || m.ncols() != d1 * d2 {
        return Err(Error::Layout(format!("expected {0}x{0} matrix", d1 * d2)));
    }
    Ok(Mat::from_fn(d1 * d2, d1 * d2, |r, c| {
        let (i1, i2) = (r / d2, r % d2);
        let (j1, j2) = (c / d2, c % d2);
        m[(i1 * d2 + j2, j1 * d2 + i2)]
    }))
}

/// How to bin a spectrum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum Binning {
    FreedmanDiaconis,
    Bins(usize),
    Range { lo: f64, hi: f64, bins: usize },
    Edges(Vec<f64>),
}

impl Default for Binning {
    fn default() -> Self {
        Self::FreedmanDiaconis
    }
}

impl Binning {
    pub fn edges(&self, values: &[f64]) -> Result<Vec<f64>> {
        let finite = |e: &[f64]| e.iter().all(|x| x.is_finite());
        let edges = match self {
            Binning::Edges(e) => e.clone(),
            Binning::Range { lo, hi, bins } => uniform_edges(*lo, *hi, *bins)?,
            Binning::Bins(bins) => {
                let (lo, hi) = min_max(values)?;
                if lo == hi {
                    return single_bin(lo);
                }
                uniform_edges(lo, hi, *bins)?
            }
            Binning::FreedmanDiaconis => {
                let (lo, hi) = min_max(values)?;
                if lo == hi {
                    return single_bin(lo);
                }
                let mut sorted = values.to_vec();
                sorted.sort_by(f64::total_cmp);
                let q = |p: f64| sorted[((sorted.len() - 1) as f64 * p).round() as usize];
                let iqr = q(0.75) - q(0.25);
                let n = sorted.len() as f64;
                let bins = if iqr > 0.0 {
                    ((hi - lo) / (2.0 * iqr * n.powf(-1.0 / 3.0))).ceil() as usize
                } else {
                    (n.log2().ceil() as usize) + 1
                };
                uniform_edges(lo, hi, bins.clamp(1, 100_000))?
            }
        };
        if edges.len() < 2 || !finite(&edges) || edges.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Invalid("bin edges must be finite and strictly increasing".into()));
        }
        Ok(edges)
    }
}

fn min_max(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::Invalid("cannot bin an empty spectrum".into()));
    }
    Ok(values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x))))
}

fn single_bin(x: f64) -> Result<Vec<f64>> {
    let h = x.abs().max(1e-300) * 1e-6;
    Ok(vec![x - h, x + h])
}

pub fn uniform_edges(lo: f64, hi: f64, bins: usize) -> Result<Vec<f64>> {
    if bins == 0 || !(hi > lo) {
        return Err(Error::Invalid(format!("zero-width binning [{lo}, {hi}] with {bins} bins")));
    }
    let w = (hi - lo) / bins as f64;
    Ok((0..=bins).map(|i| if i == bins { hi } else { lo + w * i as f64 }).collect())
}

/// Densities per bin; ∫ over all bins equals the number of binned eigenvalues per
/// sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
}

impl Histogram {
    pub fn bins(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn width(&self, i: usize) -> f64 {
        self.edges[i + 1] - self.edges[i]
    }

    pub fn total(&self) -> Vec<f64> {
        self.p1.iter().zip(&self.p2).map(|(a, b)| a + b).collect()
    }

    pub fn density(&self, c: Option<Component>) -> Vec<f64> {
        match c {
            Some(Component::P1) => self.p1.clone(),
            Some(Component::P2) => self.p2.clone(),
            None => self.total(),
        }
    }

    /// Σ density · width.
    pub fn integral(&self, c: Option<Component>) -> f64 {
        let d = self.density(c);
        (0..self.bins()).map(|i| d[i] * self.width(i)).sum()
    }

    /// Negativity estimated from bin centers.
    pub fn negativity(&self) -> f64 {
        let d = self.total();
        (0..self.bins())
            .map(|i| {
                let c = 0.5 * (self.edges[i] + self.edges[i + 1]);
                if c < 0.0 {
                    -c * d[i] * self.width(i)
                } else {
                    0.0
                }
            })
            .sum()
    }

    /// Upper bound on |negativity() − exact negativity| from binning alone.
    pub fn negativity_bias_bound(&self) -> f64 {
        let d = self.total();
        (0..self.bins())
            .filter(|&i| self.edges[i] < 0.0)
            .map(|i| d[i] * self.width(i) * self.width(i))
            .sum()
    }

    /// CSV with columns (bin_left, bin_right, density, component).
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["bin_left", "bin_right", "density", "component"])?;
        let total = self.total();
        for (name, d) in [("P1", &self.p1), ("P2", &self.p2), ("total", &total)] {
            for i in 0..self.bins() {
                w.write_record([
                    format!("{:e}", self.edges[i]),
                    format!("{:e}", self.edges[i + 1]),
                    format!("{:e}", d[i]),
                    name.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let mut rows: BTreeMap<String, Vec<(f64, f64, f64)>> = BTreeMap::new();
        for rec in rd.records() {
            let rec = rec?;
            let num = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::Invalid(format!("bad histogram row {rec:?}")))
            };
            rows.entry(rec.get(3).unwrap_or("").to_string()).or_default().push((num(0)?, num(1)?, num(2)?));
        }
        let p1 = rows.remove("P1").ok_or_else(|| Error::Invalid("no P1 rows".into()))?;
        let p2 = rows.remove("P2").ok_or_else(|| Error::Invalid("no P2 rows".into()))?;
        let mut edges: Vec<f64> = p1.iter().map(|r| r.0).collect();
        edges.push(p1.last().map(|r| r.1).unwrap_or(0.0));
        Ok(Self { edges, p1: p1.iter().map(|r| r.2).collect(), p2: p2.iter().map(|r| r.2).collect() })
    }
}

/// A pooled partial-transpose spectrum with its histogram.
#[derive(Clone, Debug)]
pub struct NegativitySpectrum {
    pub eigenvalues: Vec<(f64, Component)>,
    /// Forced zero modes per sample (not binned).
    pub zero_modes: f64,
    pub samples: usize,
    pub histogram: Histogram,
    pub geometry: Option<SectorGeometry>,
}

impl NegativitySpectrum {
    /// Pool spectra from `samples` draws; densities are per sample.
    pub fn pooled(
        spectra: &[PtSpectrum],
        binning: &Binning,
        geometry: Option<SectorGeometry>,
    ) -> Result<Self> {
        if spectra.is_empty() {
            return Err(Error::Invalid("no spectra to pool".into()));
        }
        let eigenvalues: Vec<(f64, Component)> =
            spectra.iter().flat_map(|s| s.eigenvalues.iter().copied()).collect();
        let zero_modes = spectra.iter().map(|s| s.zero_modes).sum::<usize>() as f64 / spectra.len() as f64;
        let histogram = histogram_of(&eigenvalues, binning, spectra.len())?;
        Ok(Self { eigenvalues, zero_modes, samples: spectra.len(), histogram, geometry })
    }

    /// Exact negativity per sample from the pooled eigenvalues.
    pub fn negativity(&self) -> f64 {
        let neg: Vec<f64> = self
            .eigenvalues
            .iter()
            .map(|e| e.0)
            .filter(|&x| x < -ZERO_CLAMP)
            .map(|x| -x)
            .collect();
        pairwise_sum(&neg) / self.samples as f64
    }
}

/// Histogram of one spectrum, ∫P dξ = number of eigenvalues inside the bins.
pub fn spectrum_histogram(eigs: &[(f64, Component)], binning: &Binning) -> Result<Histogram> {
    histogram_of(eigs, binning, 1)
}

fn histogram_of(eigs: &[(f64, Component)], binning: &Binning, samples: usize) -> Result<Histogram> {
    let values: Vec<f64> = eigs.iter().map(|e| e.0).collect();
    let edges = binning.edges(&values)?;
    let bins = edges.len() - 1;
    let mut p1 = vec![0.0; bins];
    let mut p2 = vec![0.0; bins];
    let (lo, hi) = (edges[0], edges[bins]);
    for &(x, c) in eigs {
        if x < lo || x > hi {
            continue;
        }
        let i = (edges.partition_point(|&e| e <= x)).clamp(1, bins) - 1;
        match c {
            Component::P1 => p1[i] += 1.0,
            Component::P2 => p2[i] += 1.0,
        }
    }
    for i in 0..bins {
        let norm = samples as f64 * (edges[i + 1] - edges[i]);
        p1[i] /= norm;
        p2[i] /= norm;
    }
    Ok(Histogram { edges, p1, p2 })
}

//! Random charge-fixed pure states and the projected reduced density matrices they
//! induce on A.
//!
//! A sample of the block ρ_A^{(q_A)} is X X† with X an L_{q_A} × L_{q_B} matrix of
//! i.i.d. circular complex Gaussians of variance 1/(L_{q_A} L_{q_B}). Rows of X run
//! over the A-sector basis: splits ascending in q1, then row-major over
//! (A1 index, A2 index) with each factor's strings in lexicographic order.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use faer::{c64, Mat};
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, pairwise_sum};
use crate::rng::sample_rng;
use crate::sectors::{enumerate_pt_pairs, enumerate_splits, Part, SectorGeometry, SectorSplit};

/// Largest number of matrix entries a single sampled block may hold.
const MAX_ENTRIES: u64 = 1 << 27;

/// Offsets of the (q1, q̄₁) sub-blocks inside a q_A block.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockLayout {
    splits: Vec<SectorSplit>,
    offsets: Vec<usize>,
    dim: usize,
}

impl BlockLayout {
    pub fn new(geom: &SectorGeometry) -> Result<Self> {
        let splits = enumerate_splits(geom)?;
        let mut offsets = Vec::with_capacity(splits.len());
        let mut dim = 0usize;
        for s in &splits {
            offsets.push(dim);
            dim += s.dim() as usize;
        }
        Ok(Self { splits, offsets, dim })
    }

    pub fn splits(&self) -> &[SectorSplit] {
        &self.splits
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Row of basis state (i1, i2) within split number `split`.
    pub fn index(&self, split: usize, i1: usize, i2: usize) -> usize {
        self.offsets[split] + i1 * self.splits[split].dims.1 as usize + i2
    }

    pub fn split_of_q1(&self, q1: i64) -> Option<usize> {
        self.splits.iter().position(|s| s.q1 == q1)
    }
}

#[derive(Clone, Debug)]
pub struct GaussianBlock {
    pub geom: SectorGeometry,
    pub layout: Arc<BlockLayout>,
    /// L_{q_A} × L_{q_B} coefficients.
    pub x: Mat<c64>,
    /// (master seed, sample index).
    pub lineage: (u64, u64),
}

/// One charge block of a reduced density matrix, in the layout of [`BlockLayout`].
#[derive(Clone, Debug)]
pub struct BlockDensityMatrix {
    pub geom: SectorGeometry,
    pub layout: Arc<BlockLayout>,
    pub rho: Mat<c64>,
    pub normalized: bool,
    pub lineage: Option<(u64, u64)>,
}

impl BlockDensityMatrix {
    /// Wrap a hand-built matrix; it must be square of size L_{q_A} and Hermitian.
    pub fn from_matrix(geom: SectorGeometry, rho: Mat<c64>) -> Result<Self> {
        let layout = Arc::new(BlockLayout::new(&geom)?);
        if rho.nrows() != layout.dim() || rho.ncols() != layout.dim() {
            return Err(Error::Layout(format!(
                "matrix is {}x{}, block needs {}",
                rho.nrows(),
                rho.ncols(),
                layout.dim()
            )));
        }
        let dev = linalg::hermitian_deviation(rho.as_ref());
        if dev > 1e-12 * linalg::max_abs(rho.as_ref()).max(1.0) {
            return Err(Error::NotHermitian(dev));
        }
        let normalized = (linalg::trace(rho.as_ref()).re - 1.0).abs() < 1e-12;
        Ok(Self { geom, layout, rho, normalized, lineage: None })
    }

    pub fn trace(&self) -> f64 {
        linalg::trace(self.rho.as_ref()).re
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        linalg::hermitian_eigenvalues(self.rho.as_ref())
    }
}

fn block_dims(geom: &SectorGeometry, layout: &BlockLayout) -> Result<(usize, usize)> {
    let l_qa = layout.dim() as u64;
    let l_qb = geom.l_qb()?;
    match l_qa.checked_mul(l_qb) {
        Some(n) if n <= MAX_ENTRIES => Ok((l_qa as usize, l_qb as usize)),
        _ => Err(Error::Overflow(format!(
            "sampled block {l_qa} x {l_qb} exceeds {MAX_ENTRIES} entries"
        ))),
    }
}

/// Draw sample `sample_index` of the Gaussian coefficient matrix.
pub fn sample_block(geom: &SectorGeometry, sample_index: u64, master_seed: u64) -> Result<GaussianBlock> {
    let layout = Arc::new(BlockLayout::new(geom)?);
    sample_block_with(geom, layout, sample_index, master_seed)
}

fn sample_block_with(
    geom: &SectorGeometry,
    layout: Arc<BlockLayout>,
    sample_index: u64,
    master_seed: u64,
) -> Result<GaussianBlock> {
    let (rows, cols) = block_dims(geom, &layout)?;
    let x = gaussian_matrix(rows, cols, 1.0 / (rows as f64 * cols as f64), master_seed, sample_index);
    Ok(GaussianBlock { geom: *geom, layout, x, lineage: (master_seed, sample_index) })
}

/// Row-major fill so the draw order is fixed independently of faer's storage.
fn gaussian_matrix(rows: usize, cols: usize, variance: f64, seed: u64, index: u64) -> Mat<c64> {
    let mut rng = sample_rng(seed, index);
    let normal = Normal::new(0.0, (variance / 2.0).sqrt()).expect("finite variance");
    let mut x = Mat::<c64>::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            x[(i, j)] = c64::new(normal.sample(&mut rng), normal.sample(&mut rng));
        }
    }
    x
}

/// ρ = X X†, symmetrized; divided by its trace when `normalize` is set.
pub fn build_rho(block: &GaussianBlock, normalize: bool) -> Result<BlockDensityMatrix> {
    let mut rho = &block.x * block.x.adjoint();
    linalg::symmetrize(&mut rho);
    let tr = linalg::trace(rho.as_ref()).re;
    if !(tr > 0.0 && tr.is_finite()) {
        return Err(Error::Numerical(format!("sample has trace {tr}")));
    }
    if normalize {
        rho = rho * faer::Scale(c64::new(1.0 / tr, 0.0));
    }
    Ok(BlockDensityMatrix {
        geom: block.geom,
        layout: block.layout.clone(),
        rho,
        normalized: normalize,
        lineage: Some(block.lineage),
    })
}

/// Tr ρⁿ from the eigenvalues.
pub fn renyi_moment(rho: &BlockDensityMatrix, n: u32) -> Result<f64> {
    if n < 1 {
        return Err(Error::Invalid("Renyi index must be at least 1".into()));
    }
    let ev = rho.eigenvalues()?;
    let powers: Vec<f64> = ev.iter().map(|&l| l.powi(n as i32)).collect();
    Ok(pairwise_sum(&powers))
}

/// Tr ρⁿ for each order from the nonzero eigenvalues of ρ = X X†, taken from the
/// smaller of the two Gram matrices of X.
pub fn block_moments(block: &GaussianBlock, normalize: bool, orders: &[u32]) -> Result<Vec<f64>> {
    if orders.iter().any(|&n| n < 1) {
        return Err(Error::Invalid("Renyi index must be at least 1".into()));
    }
    let (sv, _) = linalg::singular_values_gram(block.x.as_ref())?;
    let mut ev: Vec<f64> = sv.iter().map(|s| s * s).collect();
    if normalize {
        let tr = pairwise_sum(&ev);
        ev.iter_mut().for_each(|l| *l /= tr);
    }
    Ok(orders
        .iter()
        .map(|&n| pairwise_sum(&ev.iter().map(|&l| l.powi(n as i32)).collect::<Vec<_>>()))
        .collect())
}

/// ⟨Tr ρⁿ⟩ for n = 2, 3 from the exact Gaussian averages.
pub fn exact_moment(l_qa: f64, l_qb: f64, n: u32) -> Option<f64> {
    match n {
        1 => Some(1.0),
        2 => Some(1.0 / l_qa + 1.0 / l_qb),
        3 => Some(1.0 / (l_qb * l_qb) + 3.0 / (l_qa * l_qb) + 1.0 / (l_qa * l_qa)),
        _ => None,
    }
}

/// Which family of dominant diagrams to use for a moment prediction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MomentRegime {
    /// L_{q_A} ≫ L_{q_B}: ⟨Tr ρⁿ⟩ ≈ L_{q_B}^{1−n}.
    ADominant,
    /// L_{q_A} ≪ L_{q_B}: ⟨Tr ρⁿ⟩ ≈ L_{q_A}^{1−n}.
    BDominant,
    /// Partially transposed moments for large B.
    PtLargeB,
    /// Partially transposed moments for large A1 (even n).
    PtLargeA1,
    /// The cyclic-symmetry-breaking diagram of the semicircle regime.
    PtRsbCandidate,
}

impl FromStr for MomentRegime {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "a-dominant" => Self::ADominant,
            "b-dominant" => Self::BDominant,
            "pt-large-b" => Self::PtLargeB,
            "pt-large-a1" => Self::PtLargeA1,
            "pt-rsb-candidate" => Self::PtRsbCandidate,
            _ => return Err(Error::UnknownStrategy { kind: "moment regime", name: s.into() }),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentPrediction {
    pub value: f64,
    /// Set when the geometry violates the regime's size ordering by more than a
    /// factor of two.
    pub warning: Option<String>,
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// Leading-order value of ⟨Tr ρⁿ⟩ or ⟨Tr (ρ^{T₂})ⁿ⟩ in the given regime.
pub fn predicted_moment(geom: &SectorGeometry, n: u32, regime: MomentRegime) -> Result<MomentPrediction> {
    if n < 1 {
        return Err(Error::Invalid("moment order must be at least 1".into()));
    }
    let nf = n as f64;
    let la = geom.ln_l_qa();
    let lb = geom.ln_l_qb();
    let margin = 2f64.ln();
    let mut warning = None;
    let mut warn = |ok: bool, msg: &str| {
        if !ok && warning.is_none() {
            warning = Some(msg.to_string());
        }
    };
    let ln_value = match regime {
        MomentRegime::ADominant => {
            warn(la - lb >= margin, "requires L_qA >> L_qB");
            (1.0 - nf) * lb
        }
        MomentRegime::BDominant => {
            warn(lb - la >= margin, "requires L_qB >> L_qA");
            (1.0 - nf) * la
        }
        MomentRegime::PtLargeB => {
            let terms: Vec<f64> = enumerate_splits(geom)?
                .iter()
                .map(|s| {
                    let l = (s.dims.0 as f64).ln() + (s.dims.1 as f64).ln();
                    warn(lb - l >= margin, "requires L_qB >> L_{A1,q1} L_{A2,q2}");
                    l - nf * la
                })
                .collect();
            log_sum_exp(&terms)
        }
        MomentRegime::PtLargeA1 => {
            let mut terms = Vec::new();
            for p in enumerate_pt_pairs(geom)? {
                let (pb1, pb2) = p.partner(geom);
                let l1 = geom.ln_dim(Part::A1, p.q1);
                let l1b = geom.ln_dim(Part::A1, pb1);
                let l2 = geom.ln_dim(Part::A2, p.q2);
                let l2b = geom.ln_dim(Part::A2, pb2);
                warn(l1 - l2 - lb >= margin, "requires L_{A1,q1} >> L_{A2,q2} L_qB");
                terms.push(0.5 * nf * (l1 + l1b) + l2 + l2b - nf * la - (nf - 1.0) * lb);
            }
            log_sum_exp(&terms)
        }
        MomentRegime::PtRsbCandidate => {
            let mut terms = Vec::new();
            for p in enumerate_pt_pairs(geom)? {
                let (pb1, pb2) = p.partner(geom);
                let l1 = geom.ln_dim(Part::A1, p.q1);
                let l1b = geom.ln_dim(Part::A1, pb1);
                let l2 = geom.ln_dim(Part::A2, p.q2);
                let l2b = geom.ln_dim(Part::A2, pb2);
                warn(
                    l2 + lb - l1 >= margin && l1 + lb - l2 >= margin && l1 + l2 - lb >= margin,
                    "requires L_A1 << L_A2 L_B, L_A2 << L_A1 L_B and L_B << L_A1 L_A2",
                );
                terms.push(l1 + l2 + 0.5 * nf * (l1b + l2b) - nf * la - 0.5 * nf * lb);
            }
            log_sum_exp(&terms)
        }
    };
    Ok(MomentPrediction { value: ln_value.exp(), warning })
}

/// A scalar evaluated on every sample of an ensemble.
pub trait Statistic: Send + Sync {
    fn name(&self) -> &str;
    fn evaluate(&self, rho: &BlockDensityMatrix) -> Result<f64>;
}

struct Trace;
impl Statistic for Trace {
    fn name(&self) -> &str {
        "trace"
    }
    fn evaluate(&self, rho: &BlockDensityMatrix) -> Result<f64> {
        Ok(rho.trace())
    }
}

struct Renyi {
    n: u32,
    name: String,
}
impl Statistic for Renyi {
    fn name(&self) -> &str {
        &self.name
    }
    fn evaluate(&self, rho: &BlockDensityMatrix) -> Result<f64> {
        renyi_moment(rho, self.n)
    }
}

struct Negativity;
impl Statistic for Negativity {
    fn name(&self) -> &str {
        "negativity"
    }
    fn evaluate(&self, rho: &BlockDensityMatrix) -> Result<f64> {
        crate::negativity::negativity(rho)
    }
}

struct LogNegativity;
impl Statistic for LogNegativity {
    fn name(&self) -> &str {
        "log-negativity"
    }
    fn evaluate(&self, rho: &BlockDensityMatrix) -> Result<f64> {
        crate::negativity::log_negativity(rho)
    }
}

/// Statistics addressable by name. `renyi-<n>` resolves to Tr ρⁿ for any n ≥ 1.
pub struct StatisticRegistry {
    entries: BTreeMap<String, Arc<dyn Statistic>>,
}

impl Default for StatisticRegistry {
    fn default() -> Self {
        let mut r = Self { entries: BTreeMap::new() };
        r.register(Arc::new(Trace));
        r.register(Arc::new(Renyi { n: 2, name: "purity".into() }));
        r.register(Arc::new(Negativity));
        r.register(Arc::new(LogNegativity));
        r
    }
}

impl StatisticRegistry {
    pub fn register(&mut self, stat: Arc<dyn Statistic>) {
        self.entries.insert(stat.name().to_string(), stat);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Statistic>> {
        if let Some(s) = self.entries.get(name) {
            return Ok(s.clone());
        }
        if let Some(n) = name.strip_prefix("renyi-").and_then(|n| n.parse::<u32>().ok()) {
            if n >= 1 {
                return Ok(Arc::new(Renyi { n, name: name.to_string() }));
            }
        }
        Err(Error::UnknownStrategy { kind: "statistic", name: name.into() })
    }

    pub fn names(&self) -> Vec<String> {
        let mut v: Vec<String> = self.entries.keys().cloned().collect();
        v.push("renyi-<n>".into());
        v
    }
}

/// How an ensemble is drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub samples: u64,
    pub seed: u64,
    pub workers: usize,
    pub normalize: bool,
}

impl EnsembleSpec {
    pub fn new(samples: u64, seed: u64) -> Self {
        Self { samples, seed, workers: 1, normalize: false }
    }

    pub fn workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn normalize(mut self, normalize: bool) -> Self {
        self.normalize = normalize;
        self
    }
}

/// Run `f` on every sample and collect the results in sample order.
pub fn ensemble_map<T, F>(geom: &SectorGeometry, spec: &EnsembleSpec, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&BlockDensityMatrix) -> Result<T> + Sync,
{
    ensemble_map_blocks(geom, spec, |_, rho| f(rho))
}

/// Like [`ensemble_map`], with the Gaussian coefficients passed alongside ρ.
pub fn ensemble_map_blocks<T, F>(geom: &SectorGeometry, spec: &EnsembleSpec, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&GaussianBlock, &BlockDensityMatrix) -> Result<T> + Sync,
{
    if spec.samples == 0 {
        return Err(Error::Invalid("at least one sample is required".into()));
    }
    let layout = Arc::new(BlockLayout::new(geom)?);
    block_dims(geom, &layout)?;
    let one = |i: u64| -> Result<T> {
        let block = sample_block_with(geom, layout.clone(), i, spec.seed)?;
        let rho = build_rho(&block, spec.normalize)?;
        f(&block, &rho).map_err(|e| Error::Sample { index: i, source: Box::new(e) })
    };
    if spec.workers <= 1 {
        return (0..spec.samples).map(one).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .map_err(|e| Error::Invalid(format!("worker pool: {e}")))?;
    pool.install(|| (0..spec.samples).into_par_iter().map(one).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub statistic: String,
    pub samples: u64,
    pub mean: f64,
    pub stderr: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stream: Option<Vec<f64>>,
}

impl EnsembleStats {
    pub fn from_values(statistic: &str, values: Vec<f64>, keep_stream: bool) -> Self {
        let (mean, stderr) = mean_stderr(&values);
        Self {
            statistic: statistic.to_string(),
            samples: values.len() as u64,
            mean,
            stderr,
            stream: keep_stream.then_some(values),
        }
    }

    /// Within `k` standard errors of `target`.
    pub fn agrees_with(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.stderr
    }

    /// Per-sample values as CSV with columns (sample_index, value).
    pub fn write_stream_csv(&self, path: &Path) -> Result<()> {
        let stream = self
            .stream
            .as_ref()
            .ok_or_else(|| Error::Invalid("per-sample stream was not kept".into()))?;
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["sample_index", "value"])?;
        for (i, v) in stream.iter().enumerate() {
            w.write_record([i.to_string(), format!("{v:e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Sample mean and its standard error, both from pairwise sums.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = pairwise_sum(values) / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    (mean, (pairwise_sum(&sq) / (n - 1.0) / n).sqrt())
}

pub fn ensemble_run(
    geom: &SectorGeometry,
    spec: &EnsembleSpec,
    statistic: &dyn Statistic,
    keep_stream: bool,
) -> Result<EnsembleStats> {
    let values = ensemble_map(geom, spec, |rho| statistic.evaluate(rho))?;
    Ok(EnsembleStats::from_values(statistic.name(), values, keep_stream))
}

/// All charge blocks of ρ_A drawn from a single random state of the whole charge-Q
/// sector, so E|X|² = 1/Σ_{q_A} L_{q_A}L_{q_B} and ⟨Tr ρ_A⟩ = 1.
pub fn sample_unprojected(
    any_block: &SectorGeometry,
    sample_index: u64,
    master_seed: u64,
) -> Result<Vec<BlockDensityMatrix>> {
    let sym = any_block.symmetry();
    let mut geoms = Vec::new();
    for q_a in sym.charges(any_block.n_a()) {
        if let Ok(g) = any_block.with_q_a(q_a) {
            geoms.push(g);
        }
    }
    let mut total = 0f64;
    let mut layouts = Vec::new();
    for g in &geoms {
        let layout = Arc::new(BlockLayout::new(g)?);
        let (r, c) = block_dims(g, &layout)?;
        total += (r * c) as f64;
        layouts.push(layout);
    }
    let mut out = Vec::new();
    for (k, (g, layout)) in geoms.iter().zip(layouts).enumerate() {
        let (r, c) = (layout.dim(), g.l_qb()? as usize);
        // Distinct streams per block: the sample index is spread over the charge slots.
        let stream = sample_index * geoms.len() as u64 + k as u64;
        let x = gaussian_matrix(r, c, 1.0 / total, master_seed, stream);
        let block = GaussianBlock { geom: *g, layout, x, lineage: (master_seed, stream) };
        out.push(build_rho(&block, false)?);
    }
    Ok(out)
}

impl fmt::Display for EnsembleStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {:.6e} ± {:.2e} ({} samples)", self.statistic, self.mean, self.stderr, self.samples)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sectors::Symmetry;

    fn z2(n_a1: usize, n_a2: usize, n_b: usize) -> SectorGeometry {
        SectorGeometry::new(Symmetry::zr(2).unwrap(), n_a1, n_a2, n_b, 0, 0).unwrap()
    }

    #[test]
    fn layout_offsets() {
        let g = SectorGeometry::new(Symmetry::u1(), 2, 2, 2, 3, 2).unwrap();
        let l = BlockLayout::new(&g).unwrap();
        // splits (0,2): 1x1, (1,1): 2x2, (2,0): 1x1
        assert_eq!(l.offsets(), &[0, 1, 5]);
        assert_eq!(l.dim(), 6);
        assert_eq!(l.index(1, 1, 0), 3);
    }

    #[test]
    fn sampling_is_deterministic() {
        let g = z2(2, 2, 3);
        let a = sample_block(&g, 5, 11).unwrap();
        let b = sample_block(&g, 5, 11).unwrap();
        let c = sample_block(&g, 6, 11).unwrap();
        assert_eq!(a.x, b.x);
        assert_ne!(a.x, c.x);
    }

    #[test]
    fn entry_variance() {
        // L_qA = L_qB = 8
        let g = z2(2, 2, 4);
        let mut sum = 0.0;
        let mut count = 0usize;
        for i in 0..1600 {
            let b = sample_block(&g, i, 3).unwrap();
            for r in 0..8 {
                for c in 0..8 {
                    sum += b.x[(r, c)].norm_sqr();
                    count += 1;
                }
            }
        }
        let var = sum / count as f64;
        assert!((var * 64.0 - 1.0).abs() < 0.05, "variance {var}");
    }

    #[test]
    fn rho_is_hermitian_psd_and_normalizable() {
        let g = z2(2, 1, 3);
        let b = sample_block(&g, 0, 1).unwrap();
        let rho = build_rho(&b, true).unwrap();
        assert_eq!(linalg::hermitian_deviation(rho.rho.as_ref()), 0.0);
        assert!((rho.trace() - 1.0).abs() < 1e-12);
        assert!(rho.eigenvalues().unwrap().iter().all(|&l| l >= -1e-12));
    }

    #[test]
    fn projector_moments() {
        let g = z2(1, 1, 0);
        let mut m = Mat::<c64>::zeros(2, 2);
        m[(0, 0)] = c64::new(1.0, 0.0);
        let rho = BlockDensityMatrix::from_matrix(g, m).unwrap();
        for n in 1..5 {
            assert!((renyi_moment(&rho, n).unwrap() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn dominant_diagram_limits() {
        let u1 = Symmetry::u1();
        // A with 32 states against a much larger B.
        let g = SectorGeometry::new(u1, 3, 3, 14, 10, 3).unwrap();
        let p = predicted_moment(&g, 3, MomentRegime::BDominant).unwrap();
        let l = g.l_qa().unwrap() as f64;
        assert!((p.value - l.powi(-2)).abs() < 1e-15);
        assert!(p.warning.is_none());
        let a = predicted_moment(&g, 3, MomentRegime::ADominant).unwrap();
        assert!(a.warning.is_some());

        let g = z2(3, 3, 7);
        for n in 1..6 {
            let p = predicted_moment(&g, n, MomentRegime::PtLargeB).unwrap();
            assert!((p.value / 32f64.powi(1 - n as i32) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let g = z2(2, 2, 3);
        let reg = StatisticRegistry::default();
        let stat = reg.get("purity").unwrap();
        let a = ensemble_run(&g, &EnsembleSpec::new(40, 9), stat.as_ref(), false).unwrap();
        let b = ensemble_run(&g, &EnsembleSpec::new(40, 9).workers(3), stat.as_ref(), false).unwrap();
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
    }

    #[test]
    fn registry_lookup() {
        let reg = StatisticRegistry::default();
        assert_eq!(reg.get("renyi-3").unwrap().name(), "renyi-3");
        assert!(matches!(reg.get("renyi-0"), Err(Error::UnknownStrategy { .. })));
        assert!(reg.get("entropy").is_err());
    }

    #[test]
    fn unprojected_blocks_have_unit_mean_trace() {
        let g = z2(1, 2, 3);
        let mut tr = Vec::new();
        for i in 0..400 {
            let blocks = sample_unprojected(&g, i, 2).unwrap();
            assert_eq!(blocks.len(), 2);
            tr.push(blocks.iter().map(BlockDensityMatrix::trace).sum::<f64>());
        }
        let (m, s) = mean_stderr(&tr);
        assert!((m - 1.0).abs() < 4.0 * s, "{m} ± {s}");
    }
}

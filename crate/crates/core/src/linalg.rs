//! Thin wrappers over faer's dense kernels.

use faer::{c64, Mat, MatRef, Side};

use crate::error::{Error, Result};

pub fn hermitian_eigenvalues(m: MatRef<'_, c64>) -> Result<Vec<f64>> {
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    m.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Numerical(format!("Hermitian eigensolver failed: {e:?}")))
}

/// Largest |m_ij − conj(m_ji)|.
pub fn hermitian_deviation(m: MatRef<'_, c64>) -> f64 {
    let mut dev = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..=j.min(m.nrows().saturating_sub(1)) {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

pub fn max_abs(m: MatRef<'_, c64>) -> f64 {
    let mut mx = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            mx = mx.max(m[(i, j)].norm());
        }
    }
    mx
}

/// Replace `m` by (m + m†)/2.
pub fn symmetrize(m: &mut Mat<c64>) {
    let n = m.nrows();
    for j in 0..n {
        m[(j, j)] = c64::new(m[(j, j)].re, 0.0);
        for i in 0..j {
            let v = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = v;
            m[(j, i)] = v.conj();
        }
    }
}

pub fn trace(m: MatRef<'_, c64>) -> c64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).sum()
}

/// Singular values of `m` as square roots of the eigenvalues of the smaller Gram
/// matrix, plus the count of structurally zero singular directions of the larger
/// side, |rows − cols|.
pub fn singular_values_gram(m: MatRef<'_, c64>) -> Result<(Vec<f64>, usize)> {
    let (r, c) = (m.nrows(), m.ncols());
    let gram = if r <= c { m * m.adjoint() } else { m.adjoint() * m };
    let ev = hermitian_eigenvalues(gram.as_ref())?;
    Ok((ev.into_iter().map(|l| l.max(0.0).sqrt()).collect(), r.abs_diff(c)))
}

/// Numerically stable sum of a slice in index order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gram_singular_values_of_diagonal() {
        let m = Mat::<c64>::from_fn(3, 2, |i, j| if i == j { c64::new((i + 1) as f64, 0.0) } else { c64::new(0.0, 0.0) });
        let (mut s, zeros) = singular_values_gram(m.as_ref()).unwrap();
        s.sort_by(f64::total_cmp);
        assert_eq!(zeros, 1);
        assert!((s[0] - 1.0).abs() < 1e-14 && (s[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn pairwise_matches_naive() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64).sin()).collect();
        assert!((pairwise_sum(&xs) - xs.iter().sum::<f64>()).abs() < 1e-10);
    }
}

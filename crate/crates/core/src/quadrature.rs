//! Globally adaptive 15-point Gauss–Kronrod quadrature.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for i in 0..7 {
        let x = h * XGK[i];
        let s = f(c - x) + f(c + x);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_pieces: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { abs: 1e-8, rel: 1e-10, max_pieces: 4000 }
    }
}

/// ∫_a^b f with an error estimate. Stops at the piece budget rather than failing;
/// callers compare the estimate with their own tolerance.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> (f64, f64) {
    if a == b {
        return (0.0, 0.0);
    }
    let (v, e) = gk15(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Piece { a, b, value: v, error: e });
    let mut total = v;
    let mut err = e;
    while err > tol.abs.max(tol.rel * total.abs()) && heap.len() < tol.max_pieces {
        let p = heap.pop().expect("heap is never empty");
        let m = 0.5 * (p.a + p.b);
        if m <= p.a || m >= p.b {
            heap.push(p);
            break;
        }
        let (v1, e1) = gk15(&f, p.a, m);
        let (v2, e2) = gk15(&f, m, p.b);
        total += v1 + v2 - p.value;
        err += e1 + e2 - p.error;
        heap.push(Piece { a: p.a, b: m, value: v1, error: e1 });
        heap.push(Piece { a: m, b: p.b, value: v2, error: e2 });
    }
    // Re-sum to shed the drift of the running updates.
    let pieces = heap.into_vec();
    (pieces.iter().map(|p| p.value).sum(), pieces.iter().map(|p| p.error).sum())
}

/// ∫_a^b f for integrands with integrable power-law behaviour at either end.
///
/// Each half is mapped with ξ = a + t² (resp. b − t²), which removes square-root
/// edges and tames |ξ − a|^{−1/2} and |ξ − a|^{−1/3} singularities.
pub fn integrate_endpoints<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> (f64, f64) {
    if a == b {
        return (0.0, 0.0);
    }
    let m = 0.5 * (a + b);
    let half = Tolerance { abs: tol.abs / 2.0, ..tol };
    let (l, le) = integrate(|t| 2.0 * t * f(a + t * t), 0.0, (m - a).sqrt(), half);
    let (r, re) = integrate(|t| 2.0 * t * f(b - t * t), 0.0, (b - m).sqrt(), half);
    (l + r, le + re)
}

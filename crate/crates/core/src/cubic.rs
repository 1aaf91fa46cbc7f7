//! Roots of real cubics, robust to wildly different coefficient magnitudes.
//!
//! The resolvent equations routinely have a leading coefficient many orders of
//! magnitude below the others. Roots are computed in closed form for both the
//! polynomial and its reversal after rescaling the variable, Newton-polished on
//! the original polynomial, and the better-conditioned set is kept.

use faer::c64;

fn cbrt_real(x: f64) -> f64 {
    x.cbrt()
}

/// Roots of the monic depressed-or-not cubic x³ + a x² + b x + c.
fn monic_roots(a: f64, b: f64, c: f64) -> [c64; 3] {
    let shift = a / 3.0;
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    let half_q = q / 2.0;
    let third_p = p / 3.0;
    let disc = half_q * half_q + third_p * third_p * third_p;
    let re = |t: f64| c64::new(t - shift, 0.0);
    if p == 0.0 {
        let t = cbrt_real(-q);
        let w = c64::new(-0.5, 3f64.sqrt() / 2.0);
        let s = c64::new(-shift, 0.0);
        return [re(t), w * t + s, w.conj() * t + s];
    }
    if disc > 0.0 {
        let sd = disc.sqrt();
        // Pick the sign that avoids cancellation.
        let u = cbrt_real(-half_q - half_q.signum() * sd);
        let u = if half_q == 0.0 { cbrt_real(sd) } else { u };
        let v = -third_p / u;
        let t1 = u + v;
        let im = 3f64.sqrt() / 2.0 * (u - v);
        let rp = -t1 / 2.0 - shift;
        [re(t1), c64::new(rp, im), c64::new(rp, -im)]
    } else {
        let r = 2.0 * (-third_p).sqrt();
        let arg = (half_q / third_p * (-1.0 / third_p).sqrt()).clamp(-1.0, 1.0);
        let phi = arg.acos() / 3.0;
        let tau = 2.0 * std::f64::consts::PI / 3.0;
        [re(r * phi.cos()), re(r * (phi - tau).cos()), re(r * (phi - 2.0 * tau).cos())]
    }
}

fn eval(c: &[f64; 4], x: c64) -> (c64, c64, f64) {
    let v = ((x * c[0] + c[1]) * x + c[2]) * x + c[3];
    let d = (x * (3.0 * c[0]) + 2.0 * c[1]) * x + c[2];
    let n = x.norm();
    let scale = ((c[0].abs() * n + c[1].abs()) * n + c[2].abs()) * n + c[3].abs();
    (v, d, scale)
}

fn polish(c: &[f64; 4], mut x: c64) -> (c64, f64) {
    let (mut v, mut d, mut scale) = eval(c, x);
    for _ in 0..12 {
        if v.norm() == 0.0 || d.norm() == 0.0 {
            break;
        }
        let nx = x - v / d;
        let (nv, nd, ns) = eval(c, nx);
        if !(nv.norm() < v.norm()) {
            break;
        }
        x = nx;
        v = nv;
        d = nd;
        scale = ns;
    }
    let res = if scale > 0.0 { v.norm() / scale } else { 0.0 };
    (x, res)
}

fn quadratic(a: f64, b: f64, c: f64) -> Vec<c64> {
    if a == 0.0 {
        if b == 0.0 {
            return Vec::new();
        }
        return vec![c64::new(-c / b, 0.0)];
    }
    let disc = b * b - 4.0 * a * c;
    if disc >= 0.0 {
        let q = -0.5 * (b + b.signum() * disc.sqrt());
        let q = if b == 0.0 { -0.5 * disc.sqrt() } else { q };
        if q == 0.0 {
            return vec![c64::new(0.0, 0.0), c64::new(0.0, 0.0)];
        }
        vec![c64::new(q / a, 0.0), c64::new(c / q, 0.0)]
    } else {
        let re = -b / (2.0 * a);
        let im = (-disc).sqrt() / (2.0 * a.abs());
        vec![c64::new(re, im), c64::new(re, -im)]
    }
}

/// All roots of c3 x³ + c2 x² + c1 x + c0 (fewer than three when the leading
/// coefficients vanish exactly).
pub fn solve_cubic(c3: f64, c2: f64, c1: f64, c0: f64) -> Vec<c64> {
    let c = [c3, c2, c1, c0];
    if c3 == 0.0 {
        return quadratic(c2, c1, c0);
    }
    if c0 == 0.0 {
        let mut r = quadratic(c3, c2, c1);
        r.push(c64::new(0.0, 0.0));
        return r;
    }
    // x = s·u balances the outer coefficients: |c3 s³| = |c0|.
    let s = (c0.abs() / c3.abs()).cbrt();
    let a = [c3 * s * s * s, c2 * s * s, c1 * s, c0];
    let direct = monic_roots(a[1] / a[0], a[2] / a[0], a[3] / a[0]);
    let reversed = monic_roots(a[2] / a[3], a[1] / a[3], a[0] / a[3]).map(|v| c64::new(1.0, 0.0) / v);
    let pick = |roots: [c64; 3]| {
        let mut worst = 0.0f64;
        let out: Vec<c64> = roots
            .iter()
            .map(|&u| {
                let (x, res) = polish(&c, u * s);
                worst = worst.max(res);
                x
            })
            .collect();
        (out, worst)
    };
    let (d, dr) = pick(direct);
    let (r, rr) = pick(reversed);
    let approx = if rr < dr { r } else { d };
    let mut roots = deflated(&c, &approx);
    // A conjugate pair must stay conjugate after independent polishing.
    enforce_conjugacy(&mut roots);
    roots
}

/// Newton on the real line, kept only while the residual decreases.
fn polish_real(c: &[f64; 4], mut x: f64) -> f64 {
    let f = |x: f64| ((c[0] * x + c[1]) * x + c[2]) * x + c[3];
    let df = |x: f64| (3.0 * c[0] * x + 2.0 * c[1]) * x + c[2];
    let mut v = f(x);
    for _ in 0..40 {
        let d = df(x);
        if v == 0.0 || d == 0.0 {
            break;
        }
        let nx = x - v / d;
        let nv = f(nx);
        if !(nv.abs() < v.abs()) {
            break;
        }
        x = nx;
        v = nv;
    }
    x
}

/// Split off the most reliable real root and solve the remaining quadratic, so
/// that whether the other two roots are complex is decided by a well-conditioned
/// discriminant rather than by cancellation inside the closed form.
fn deflated(c: &[f64; 4], approx: &[c64]) -> Vec<c64> {
    let real = approx
        .iter()
        .min_by(|a, b| {
            let ra = a.im.abs() / a.norm().max(f64::MIN_POSITIVE);
            let rb = b.im.abs() / b.norm().max(f64::MIN_POSITIVE);
            ra.total_cmp(&rb)
        })
        .expect("three candidate roots");
    let r = polish_real(c, real.re);
    if r == 0.0 || !r.is_finite() {
        return approx.to_vec();
    }
    // c3 x³ + c2 x² + c1 x + c0 = (x − r)(a x² + b x + k)
    let a = c[0];
    let fwd_b = c[1] + r * a;
    let fwd_k = c[2] + r * fwd_b;
    let fwd_miss = (c[3] + r * fwd_k).abs() / (c[3].abs() + (r * fwd_k).abs()).max(f64::MIN_POSITIVE);
    let bwd_k = -c[3] / r;
    let bwd_b = (bwd_k - c[2]) / r;
    let bwd_miss = (bwd_b - r * a - c[1]).abs() / (bwd_b.abs() + (r * a).abs() + c[1].abs()).max(f64::MIN_POSITIVE);
    let (b, k) = if fwd_miss <= bwd_miss { (fwd_b, fwd_k) } else { (bwd_b, bwd_k) };
    let mut out = vec![c64::new(r, 0.0)];
    for q in quadratic(a, b, k) {
        if q.im == 0.0 {
            out.push(c64::new(polish_real(c, q.re), 0.0));
        } else {
            out.push(polish(c, q).0);
        }
    }
    if out.len() < 3 {
        return approx.to_vec();
    }
    out
}

fn enforce_conjugacy(roots: &mut [c64]) {
    let complex: Vec<usize> = (0..roots.len()).filter(|&i| roots[i].im != 0.0).collect();
    if complex.len() == 2 {
        let (i, j) = (complex[0], complex[1]);
        let re = 0.5 * (roots[i].re + roots[j].re);
        let im = 0.5 * (roots[i].im.abs() + roots[j].im.abs());
        let si = roots[i].im.signum();
        roots[i] = c64::new(re, si * im);
        roots[j] = c64::new(re, -si * im);
    }
}

/// The root with negative imaginary part from the complex-conjugate pair, if the
/// cubic has one.
pub fn lower_half_root(roots: &[c64]) -> Option<c64> {
    roots.iter().copied().filter(|r| r.im < 0.0).min_by(|a, b| a.im.total_cmp(&b.im))
}

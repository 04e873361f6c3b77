//! Brute-force curvature of a radial graph from its embedding in the
//! hyperboloid, using finite-difference fundamental forms. Independent of the
//! closed-form expressions in the parent module.

use nalgebra::Matrix2;

use crate::hypgeom::minkowski_dot;

fn embed(u: f64, phi: f64, eta: f64) -> [f64; 4] {
    let s = u.sinh();
    let (sp, cp) = phi.sin_cos();
    let (se, ce) = eta.sin_cos();
    [s * sp * ce, s * sp * se, s * cp, u.cosh()]
}

fn det3(m: [[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Vector Minkowski-orthogonal to `a`, `b`, `c`.
fn lorentz_cross(a: &[f64; 4], b: &[f64; 4], c: &[f64; 4]) -> [f64; 4] {
    let mut n = [0.0; 4];
    for (i, ni) in n.iter_mut().enumerate() {
        let cols: Vec<usize> = (0..4).filter(|&k| k != i).collect();
        let minor = [
            [a[cols[0]], a[cols[1]], a[cols[2]]],
            [b[cols[0]], b[cols[1]], b[cols[2]]],
            [c[cols[0]], c[cols[1]], c[cols[2]]],
        ];
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        *ni = sign * det3(minor);
    }
    // lower the index so that <N, w> equals the Euclidean cofactor pairing
    n[3] = -n[3];
    n
}

fn comb(a: &[f64; 4], ca: f64, b: &[f64; 4], cb: f64) -> [f64; 4] {
    [
        ca * a[0] + cb * b[0],
        ca * a[1] + cb * b[1],
        ca * a[2] + cb * b[2],
        ca * a[3] + cb * b[3],
    ]
}

/// Shifted principal curvatures (ascending) of the graph of `u(phi, eta)` at
/// `(phi, eta)`, from second-order finite differences with step `h`.
pub fn embedding_oracle(u: &dyn Fn(f64, f64) -> f64, phi: f64, eta: f64, h: f64) -> [f64; 2] {
    let x = |p: f64, e: f64| embed(u(p, e), p, e);
    let x0 = x(phi, eta);
    let (xp, xm) = (x(phi + h, eta), x(phi - h, eta));
    let (xe, xw) = (x(phi, eta + h), x(phi, eta - h));
    let xpe = x(phi + h, eta + h);
    let xpw = x(phi + h, eta - h);
    let xme = x(phi - h, eta + h);
    let xmw = x(phi - h, eta - h);

    let d = |a: &[f64; 4], b: &[f64; 4], s: f64| comb(a, s, b, -s);
    let x_p = d(&xp, &xm, 0.5 / h);
    let x_e = d(&xe, &xw, 0.5 / h);
    let second = |a: &[f64; 4], b: &[f64; 4]| {
        let mut r = [0.0; 4];
        for k in 0..4 {
            r[k] = (a[k] - 2.0 * x0[k] + b[k]) / (h * h);
        }
        r
    };
    let x_pp = second(&xp, &xm);
    let x_ee = second(&xe, &xw);
    let mut x_pe = [0.0; 4];
    for k in 0..4 {
        x_pe[k] = (xpe[k] - xpw[k] - xme[k] + xmw[k]) / (4.0 * h * h);
    }

    let mut n = lorentz_cross(&x0, &x_p, &x_e);
    let nn = minkowski_dot(&n, &n).sqrt();
    n.iter_mut().for_each(|c| *c /= nn);
    // outward: positive pairing with the radial direction
    let s = u(phi, eta);
    let radial = {
        let (sp, cp) = phi.sin_cos();
        let (se, ce) = eta.sin_cos();
        let c = s.cosh();
        [c * sp * ce, c * sp * se, c * cp, s.sinh()]
    };
    if minkowski_dot(&n, &radial) < 0.0 {
        n.iter_mut().for_each(|c| *c = -*c);
    }

    let first = Matrix2::new(
        minkowski_dot(&x_p, &x_p),
        minkowski_dot(&x_p, &x_e),
        minkowski_dot(&x_e, &x_p),
        minkowski_dot(&x_e, &x_e),
    );
    let sec = Matrix2::new(
        -minkowski_dot(&x_pp, &n),
        -minkowski_dot(&x_pe, &n),
        -minkowski_dot(&x_pe, &n),
        -minkowski_dot(&x_ee, &n),
    );
    let w = first.try_inverse().expect("degenerate first fundamental form") * sec;
    // real eigenvalues of a 2x2 matrix
    let tr = w.trace();
    let det = w.determinant();
    let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
    [0.5 * tr - disc - 1.0, 0.5 * tr + disc - 1.0]
}

/// Meridian and parallel shifted curvatures of an axisymmetric graph
/// `u(phi)` at polar angle `phi`.
pub fn embedding_oracle_axisym(u: &dyn Fn(f64) -> f64, phi: f64, h: f64) -> (f64, f64) {
    let x = |p: f64| embed(u(p), p, 0.0);
    let x0 = x(phi);
    let (xp, xm) = (x(phi + h), x(phi - h));
    let xe = embed(u(phi), phi, h);
    let xw = embed(u(phi), phi, -h);
    let x_p = comb(&xp, 0.5 / h, &xm, -0.5 / h);
    let x_e = comb(&xe, 0.5 / h, &xw, -0.5 / h);
    let mut x_pp = [0.0; 4];
    let mut x_ee = [0.0; 4];
    for k in 0..4 {
        x_pp[k] = (xp[k] - 2.0 * x0[k] + xm[k]) / (h * h);
        x_ee[k] = (xe[k] - 2.0 * x0[k] + xw[k]) / (h * h);
    }
    let mut n = lorentz_cross(&x0, &x_p, &x_e);
    let nn = minkowski_dot(&n, &n).sqrt();
    n.iter_mut().for_each(|c| *c /= nn);
    let s = u(phi);
    let radial = [s.cosh() * phi.sin(), 0.0, s.cosh() * phi.cos(), s.sinh()];
    if minkowski_dot(&n, &radial) < 0.0 {
        n.iter_mut().for_each(|c| *c = -*c);
    }
    // the frame (x_p, x_e) is orthogonal by symmetry
    let km = -minkowski_dot(&x_pp, &n) / minkowski_dot(&x_p, &x_p) - 1.0;
    let kp = -minkowski_dot(&x_ee, &n) / minkowski_dot(&x_e, &x_e) - 1.0;
    (km, kp)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_oracle() {
        for r in [0.3, 1.0, 2.5] {
            let exact = 1.0 / f64::tanh(r) - 1.0;
            let k = embedding_oracle(&|_, _| r, 0.9, 0.4, 1e-4);
            assert!((k[0] - exact).abs() < 1e-6 && (k[1] - exact).abs() < 1e-6);
            let (a, b) = embedding_oracle_axisym(&|_| r, 0.9, 1e-4);
            assert!((a - exact).abs() < 1e-6 && (b - exact).abs() < 1e-6);
        }
    }

    #[test]
    fn oracle_is_second_order() {
        let uf = |phi: f64| 1.0 + 0.3 * phi.cos();
        let reference = embedding_oracle_axisym(&uf, 0.8, 1e-4).0;
        let e1 = (embedding_oracle_axisym(&uf, 0.8, 2e-2).0 - reference).abs();
        let e2 = (embedding_oracle_axisym(&uf, 0.8, 1e-2).0 - reference).abs();
        let ratio = e1 / e2;
        assert!((ratio - 4.0).abs() < 0.3, "ratio {ratio}");
    }
}

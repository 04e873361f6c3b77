//! Small numerical kernels shared by the geometric modules: the cell-centred
//! polar grid and its stencils, Fejér quadrature, Legendre polynomials,
//! monotone cubic interpolation, golden-section search and log-linear fits.

use std::f64::consts::PI;

use crate::{Error, Result};

/// Cell-centred polar angles `phi_j = (j + 1/2) pi / n`.
pub fn cell_angles(n: usize) -> Vec<f64> {
    let h = PI / n as f64;
    (0..n).map(|j| (j as f64 + 0.5) * h).collect()
}

/// Index of the mirror cell for even reflection across `phi = 0` and
/// `phi = pi`. Valid for `-n <= j < 2n`.
#[inline]
pub fn reflect(j: isize, n: usize) -> usize {
    let n = n as isize;
    let k = if j < 0 {
        -j - 1
    } else if j >= n {
        2 * n - j - 1
    } else {
        j
    };
    k as usize
}

/// Fourth-order central first and second derivatives at cell `j` of an
/// even-reflected cell-centred profile with spacing `h`.
#[inline]
pub fn derivs4(values: &[f64], j: usize, h: f64) -> (f64, f64) {
    let n = values.len();
    let at = |o: isize| values[reflect(j as isize + o, n)];
    let (m2, m1, c, p1, p2) = (at(-2), at(-1), at(0), at(1), at(2));
    let d1 = (m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * h);
    let d2 = (-m2 + 16.0 * m1 - 30.0 * c + 16.0 * p1 - p2) / (12.0 * h * h);
    (d1, d2)
}

/// Weights of Fejér's first rule on the nodes `x_j = cos(phi_j)`, i.e.
/// `sum_j w_j g(cos phi_j) ~ int_{-1}^{1} g(x) dx`. Spectrally accurate for
/// smooth `g`.
pub fn fejer_weights(n: usize) -> Vec<f64> {
    let phis = cell_angles(n);
    phis.iter()
        .map(|&phi| {
            let tail: f64 = (1..=n / 2)
                .map(|m| {
                    let m = m as f64;
                    (2.0 * m * phi).cos() / (4.0 * m * m - 1.0)
                })
                .sum();
            2.0 / n as f64 * (1.0 - 2.0 * tail)
        })
        .collect()
}

/// Legendre polynomials `P_0(x) ..= P_k(x)`.
pub fn legendre_all(k: usize, x: f64) -> Vec<f64> {
    let mut p = Vec::with_capacity(k + 1);
    p.push(1.0);
    if k >= 1 {
        p.push(x);
    }
    for l in 1..k {
        let lf = l as f64;
        let next = ((2.0 * lf + 1.0) * x * p[l] - lf * p[l - 1]) / (lf + 1.0);
        p.push(next);
    }
    p
}

/// `P_k(x)`.
pub fn legendre(k: usize, x: f64) -> f64 {
    legendre_all(k, x)[k]
}

/// `P_k(x)` together with `dP_k/dx`, valid on the closed interval.
pub fn legendre_with_derivative(k: usize, x: f64) -> (f64, f64) {
    // derivative recurrence P'_{l+1} = P'_{l-1} + (2l+1) P_l avoids the
    // (1 - x^2) division at the endpoints
    let p = legendre_all(k + 1, x);
    let mut dp = vec![0.0; k + 2];
    for l in 1..=k {
        let prev = if l >= 2 { dp[l - 2] } else { 0.0 };
        dp[l] = prev + (2.0 * (l as f64) - 1.0) * p[l - 1];
    }
    (p[k], dp[k])
}

/// Band-limited even interpolant `Σ c_m cos(mφ)` through a cell-centred
/// profile. Smooth axisymmetric functions extend to smooth even periodic
/// functions of `φ`, so this converges spectrally.
#[derive(Debug, Clone)]
pub struct CosineSeries {
    c: Vec<f64>,
}

impl CosineSeries {
    pub fn from_cells(values: &[f64]) -> Self {
        let n = values.len();
        let phis = cell_angles(n);
        let c = (0..n)
            .map(|m| {
                let s: f64 = values.iter().zip(&phis).map(|(v, p)| v * (m as f64 * p).cos()).sum();
                if m == 0 {
                    s / n as f64
                } else {
                    2.0 * s / n as f64
                }
            })
            .collect();
        Self { c }
    }

    pub fn eval(&self, phi: f64) -> f64 {
        // Clenshaw recurrence for the Chebyshev sum in x = cos(phi)
        let x = phi.cos();
        let (mut b1, mut b2) = (0.0, 0.0);
        for &ck in self.c.iter().skip(1).rev() {
            let b0 = ck + 2.0 * x * b1 - b2;
            b2 = b1;
            b1 = b0;
        }
        self.c[0] + x * b1 - b2
    }
}

/// Golden-section minimisation of a unimodal function on `[a, b]`.
/// Returns `(argmin, min)`.
pub fn golden_section<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    let fx = f(x);
    [(x, fx), (c, fc), (d, fd)]
        .into_iter()
        .fold((x, fx), |best, cand| if cand.1 < best.1 { cand } else { best })
}

/// Ordinary least-squares line `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return Err(Error::InvalidArgument("line fit needs two or more points".into()));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LineFit {
        slope,
        intercept: my - slope * mx,
        r2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_series_interpolates() {
        let f = |p: f64| (1.0 + 0.3 * p.cos()).ln() + 0.1 * (2.0 * p).cos();
        let n = 64;
        let vals: Vec<f64> = cell_angles(n).into_iter().map(f).collect();
        let cs = CosineSeries::from_cells(&vals);
        for (p, v) in cell_angles(n).iter().zip(&vals) {
            assert!((cs.eval(*p) - v).abs() < 1e-13);
        }
        for p in [0.0, 0.013, 1.0, 2.9, PI] {
            assert!((cs.eval(p) - f(p)).abs() < 1e-12, "{p}");
        }
    }

    #[test]
    fn reflection_indices() {
        assert_eq!(reflect(-1, 8), 0);
        assert_eq!(reflect(-2, 8), 1);
        assert_eq!(reflect(8, 8), 7);
        assert_eq!(reflect(9, 8), 6);
        assert_eq!(reflect(3, 8), 3);
    }

    #[test]
    fn stencils_are_fourth_order() {
        let f = |phi: f64| (2.0 * phi).cos() + 0.3 * phi.cos().powi(3);
        let df = |phi: f64| -2.0 * (2.0 * phi).sin() - 0.9 * phi.cos().powi(2) * phi.sin();
        let err = |n: usize| {
            let phis = cell_angles(n);
            let vals: Vec<f64> = phis.iter().map(|&p| f(p)).collect();
            let h = PI / n as f64;
            (0..n)
                .map(|j| (derivs4(&vals, j, h).0 - df(phis[j])).abs())
                .fold(0.0, f64::max)
        };
        let order = (err(32) / err(64)).log2();
        assert!(order > 3.7, "order {order}");
    }

    #[test]
    fn fejer_integrates_polynomials_exactly() {
        let w = fejer_weights(33);
        let phis = cell_angles(33);
        for k in 0..20 {
            let q: f64 = w.iter().zip(&phis).map(|(w, p)| w * p.cos().powi(k)).sum();
            let exact = if k % 2 == 0 { 2.0 / (k as f64 + 1.0) } else { 0.0 };
            assert!((q - exact).abs() < 1e-13, "k={k}: {q} vs {exact}");
        }
    }

    #[test]
    fn legendre_values_and_derivatives() {
        let x = 0.3;
        assert!((legendre(2, x) - 0.5 * (3.0 * x * x - 1.0)).abs() < 1e-15);
        assert!((legendre(3, x) - 0.5 * (5.0 * x.powi(3) - 3.0 * x)).abs() < 1e-15);
        let (p4, dp4) = legendre_with_derivative(4, x);
        assert!((p4 - (35.0 * x.powi(4) - 30.0 * x * x + 3.0) / 8.0).abs() < 1e-15);
        assert!((dp4 - (140.0 * x.powi(3) - 60.0 * x) / 8.0).abs() < 1e-14);
        let (_, d_end) = legendre_with_derivative(5, 1.0);
        assert!((d_end - 15.0).abs() < 1e-12);
    }

    #[test]
    fn golden_section_finds_kink() {
        let (x, fx) = golden_section(|t| (t - 0.123).abs(), -1.0, 1.0, 1e-12);
        assert!((x - 0.123).abs() < 1e-11);
        assert!(fx < 1e-11);
    }
}

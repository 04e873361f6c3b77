//! Radial graphs `{(u(xi), xi)}` over the unit sphere in geodesic polar
//! coordinates: gradient function, induced metric and shifted Weingarten map,
//! plus the axisymmetric grid version used by the solver.

mod oracle;

pub use oracle::{embedding_oracle, embedding_oracle_axisym};

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::exec::Exec;
use crate::numerics::{cell_angles, derivs4};
use crate::{Error, Result};

/// Smallest grid accepted by the axisymmetric curvature routines.
pub const MIN_GRID: usize = 16;

/// Pointwise geometry of a radial graph.
#[derive(Debug, Clone)]
pub struct ShiftBundle {
    pub v: f64,
    pub g: DMatrix<f64>,
    pub w_shift: DMatrix<f64>,
    /// Ascending.
    pub kappa: Vec<f64>,
}

/// `coth u - 1` without cancellation.
#[inline]
pub fn coth_minus_one(u: f64) -> f64 {
    2.0 / (2.0 * u).exp_m1()
}

/// Shifted Weingarten map of the graph at one point. `grad_u` and `hess_u`
/// are the gradient and covariant Hessian of `u` on the unit sphere, in an
/// orthonormal frame of the sphere at that point.
pub fn shift_weingarten(u: f64, grad_u: &[f64], hess_u: &DMatrix<f64>) -> Result<ShiftBundle> {
    let n = grad_u.len();
    if !(u > 0.0) {
        return Err(Error::InvalidArgument(format!("radial value {u} must be positive")));
    }
    if hess_u.nrows() != n || hess_u.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: hess_u.nrows(),
        });
    }
    let asym = (hess_u - hess_u.transpose()).abs().max();
    if asym > 1e-12 * hess_u.abs().max().max(1.0) {
        return Err(Error::NotSymmetric(asym));
    }
    let (s, ch) = (u.sinh(), u.cosh());
    let dphi: Vec<f64> = grad_u.iter().map(|x| x / s).collect();
    let q: f64 = dphi.iter().map(|x| x * x).sum();
    let v = (1.0 + q).sqrt();
    let mut g = DMatrix::identity(n, n);
    for i in 0..n {
        for j in 0..n {
            g[(i, j)] += dphi[i] * dphi[j];
        }
    }
    g *= s * s;
    // second covariant derivative of phi = int du/sinh u
    let mut phi2 = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            phi2[(i, j)] = hess_u[(i, j)] / s - ch * grad_u[i] * grad_u[j] / (s * s);
        }
    }
    // h_ij - g_ij = c g_ij - (sinh u / v) phi_ij
    let c = coth_minus_one(u) / v - q / (v * (1.0 + v));
    let chol = g
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical("induced metric not positive definite".into()))?;
    let g_inv = chol.inverse();
    let w_shift = DMatrix::identity(n, n) * c - (&phi2 * &g_inv) * (s / v);
    let l_inv = chol
        .l()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("singular metric factor".into()))?;
    let sym = DMatrix::identity(n, n) * c - (&l_inv * &phi2 * l_inv.transpose()) * (s / v);
    let sym = (&sym + sym.transpose()) * 0.5;
    let mut kappa: Vec<f64> = sym.symmetric_eigen().eigenvalues.iter().cloned().collect();
    kappa.sort_by(|a, b| a.total_cmp(b));
    Ok(ShiftBundle { v, g, w_shift, kappa })
}

/// Shifted curvatures of an axisymmetric graph at one cell, given
/// `u`, `u_phi`, `u_phiphi` and the polar angle. Returns
/// `(kappa_meridian, kappa_parallel, v)`.
#[inline]
pub fn axisym_cell(u: f64, du: f64, d2u: f64, phi: f64) -> (f64, f64, f64) {
    let s = u.sinh();
    let ch = u.cosh();
    let q = (du / s).powi(2);
    let v = (1.0 + q).sqrt();
    let base = coth_minus_one(u) / v - q / (v * (1.0 + v));
    let v3 = v * v * v;
    let km = base + ch * du * du / (v3 * s * s * s) - d2u / (v3 * s * s);
    let kp = base - du / (phi.tan() * v * s * s);
    (km, kp, v)
}

/// Axisymmetric radial graph sampled at cell centres
/// `phi_j = (j + 1/2) pi / n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisymProfile {
    pub u: Vec<f64>,
    pub t: f64,
    pub tau: f64,
}

/// Shifted curvatures and gradient function over the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisymCurvatures {
    pub kappa_meridian: Vec<f64>,
    pub kappa_parallel: Vec<f64>,
    pub v: Vec<f64>,
}

impl AxisymCurvatures {
    pub fn min_kappa(&self) -> f64 {
        self.kappa_meridian
            .iter()
            .chain(&self.kappa_parallel)
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    /// Cell index and value of the smallest shifted curvature.
    pub fn argmin_kappa(&self) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (j, (a, b)) in self.kappa_meridian.iter().zip(&self.kappa_parallel).enumerate() {
            let m = a.min(*b);
            if m < best.1 {
                best = (j, m);
            }
        }
        best
    }
}

impl AxisymProfile {
    pub fn new(u: Vec<f64>) -> Result<Self> {
        if u.len() < MIN_GRID {
            return Err(Error::InvalidArgument(format!(
                "grid of {} cells is too coarse (minimum {MIN_GRID})",
                u.len()
            )));
        }
        if let Some(bad) = u.iter().find(|x| !(**x > 0.0)) {
            return Err(Error::InvalidArgument(format!("radial value {bad} must be positive")));
        }
        Ok(Self { u, t: 0.0, tau: 0.0 })
    }

    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(cell_angles(n).into_iter().map(f).collect())
    }

    pub fn n_grid(&self) -> usize {
        self.u.len()
    }

    pub fn angles(&self) -> Vec<f64> {
        cell_angles(self.n_grid())
    }

    pub fn spacing(&self) -> f64 {
        PI / self.n_grid() as f64
    }

    pub fn oscillation(&self) -> f64 {
        oscillation(&self.u)
    }

    pub fn curvatures(&self, exec: Exec) -> AxisymCurvatures {
        axisym_curvatures_of(&self.u, exec)
    }

    /// `max (v - 1) e^{2u}` over the grid.
    pub fn gradient_bound_check(&self) -> f64 {
        let c = self.curvatures(Exec::Sequential);
        self.u
            .iter()
            .zip(&c.v)
            .map(|(u, v)| (v - 1.0) * (2.0 * u).exp())
            .fold(0.0, f64::max)
    }

    /// CSV with header `phi,u,kappa_meridian,kappa_parallel,v`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let c = self.curvatures(Exec::Sequential);
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["phi", "u", "kappa_meridian", "kappa_parallel", "v"])?;
        for (j, phi) in self.angles().iter().enumerate() {
            w.write_record(&[
                phi.to_string(),
                self.u[j].to_string(),
                c.kappa_meridian[j].to_string(),
                c.kappa_parallel[j].to_string(),
                c.v[j].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn oscillation(u: &[f64]) -> f64 {
    let (lo, hi) = u
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    hi - lo
}

/// Shifted curvatures of an axisymmetric graph with fourth-order stencils
/// and even reflection at the poles.
pub fn axisym_curvatures(p: &AxisymProfile) -> Result<AxisymCurvatures> {
    if p.n_grid() < MIN_GRID {
        return Err(Error::InvalidArgument("grid too coarse".into()));
    }
    Ok(axisym_curvatures_of(&p.u, Exec::Auto))
}

pub(crate) fn axisym_curvatures_of(u: &[f64], exec: Exec) -> AxisymCurvatures {
    let n = u.len();
    let h = PI / n as f64;
    let cells = exec.map(n, |j| {
        let (d1, d2) = derivs4(u, j, h);
        axisym_cell(u[j], d1, d2, (j as f64 + 0.5) * h)
    });
    let mut out = AxisymCurvatures {
        kappa_meridian: Vec::with_capacity(n),
        kappa_parallel: Vec::with_capacity(n),
        v: Vec::with_capacity(n),
    };
    for (a, b, c) in cells {
        out.kappa_meridian.push(a);
        out.kappa_parallel.push(b);
        out.v.push(c);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_graph_is_umbilic() {
        let r = 0.5 * 3f64.ln();
        let b = shift_weingarten(r, &[0.0, 0.0], &DMatrix::zeros(2, 2)).unwrap();
        assert_eq!(b.v, 1.0);
        for k in &b.kappa {
            assert!((k - 1.0).abs() < 1e-14);
        }
        let b = shift_weingarten(10.0, &[0.0; 3], &DMatrix::zeros(3, 3)).unwrap();
        let exact = 2.0 / (20f64.exp() - 1.0);
        for k in &b.kappa {
            assert!((k - exact).abs() < 1e-12 * exact);
        }
    }

    #[test]
    fn shift_weingarten_rejects_bad_input() {
        assert!(shift_weingarten(0.0, &[0.0, 0.0], &DMatrix::zeros(2, 2)).is_err());
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(
            shift_weingarten(1.0, &[0.0, 0.0], &h),
            Err(Error::NotSymmetric(_))
        ));
    }

    #[test]
    fn eigenvalues_of_stored_map() {
        let h = DMatrix::from_row_slice(2, 2, &[0.3, -0.1, -0.1, 0.2]);
        let b = shift_weingarten(1.2, &[0.2, -0.1], &h).unwrap();
        let ev = b.w_shift.clone().complex_eigenvalues();
        let mut re: Vec<f64> = ev.iter().map(|z| z.re).collect();
        re.sort_by(|a, b| a.total_cmp(b));
        for (a, b) in re.iter().zip(&b.kappa) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn general_path_matches_oracle_off_axis() {
        // non-axisymmetric graph, derivatives in an orthonormal frame
        let uf = |phi: f64, eta: f64| 1.5 + 0.1 * phi.cos() + 0.05 * phi.sin().powi(2) * (2.0 * eta).cos();
        for &(phi, eta) in &[(0.7, 0.3), (1.9, 2.0), (2.5, 4.0)] {
            let e = 1e-4;
            let u = uf(phi, eta);
            let up = (uf(phi + e, eta) - uf(phi - e, eta)) / (2.0 * e);
            let ue = (uf(phi, eta + e) - uf(phi, eta - e)) / (2.0 * e);
            let upp = (uf(phi + e, eta) - 2.0 * u + uf(phi - e, eta)) / (e * e);
            let uee = (uf(phi, eta + e) - 2.0 * u + uf(phi, eta - e)) / (e * e);
            let upe = (uf(phi + e, eta + e) - uf(phi + e, eta - e) - uf(phi - e, eta + e) + uf(phi - e, eta - e))
                / (4.0 * e * e);
            let (sp, cot) = (phi.sin(), 1.0 / phi.tan());
            let grad = [up, ue / sp];
            let h12 = (upe - cot * ue) / sp;
            let hess = DMatrix::from_row_slice(2, 2, &[upp, h12, h12, uee / (sp * sp) + cot * up]);
            let b = shift_weingarten(u, &grad, &hess).unwrap();
            let o = embedding_oracle(&uf, phi, eta, 1e-4);
            assert!((b.kappa[0] - o[0]).abs() < 1e-5, "{:?} vs {:?}", b.kappa, o);
            assert!((b.kappa[1] - o[1]).abs() < 1e-5, "{:?} vs {:?}", b.kappa, o);
        }
    }

    #[test]
    fn random_axisym_profile_matches_oracle_at_50_points() {
        let uf = |phi: f64| 1.2 + 0.15 * phi.cos() - 0.05 * (2.0 * phi).cos() + 0.02 * (3.0 * phi).cos();
        for j in 0..50 {
            let phi = (j as f64 + 0.5) * PI / 50.0;
            let e = 1e-4;
            let u = uf(phi);
            let d1 = (uf(phi + e) - uf(phi - e)) / (2.0 * e);
            let d2 = (uf(phi + e) - 2.0 * u + uf(phi - e)) / (e * e);
            let hess = DMatrix::from_row_slice(2, 2, &[d2, 0.0, 0.0, d1 / phi.tan()]);
            let b = shift_weingarten(u, &[d1, 0.0], &hess).unwrap();
            let (km, kp) = embedding_oracle_axisym(&uf, phi, 1e-4);
            let mut o = [km, kp];
            o.sort_by(|a, b| a.total_cmp(b));
            assert!((b.kappa[0] - o[0]).abs() < 1e-5 && (b.kappa[1] - o[1]).abs() < 1e-5);
        }
    }

    #[test]
    fn constant_profile_curvatures() {
        let p = AxisymProfile::from_fn(64, |_| 2.0).unwrap();
        let c = axisym_curvatures(&p).unwrap();
        let exact = 1.0 / 2f64.tanh() - 1.0;
        for j in 0..64 {
            assert!((c.kappa_meridian[j] - exact).abs() < 1e-12);
            assert!((c.kappa_parallel[j] - exact).abs() < 1e-12);
            assert_eq!(c.v[j], 1.0);
        }
        assert_eq!(p.oscillation(), 0.0);
        assert_eq!(p.gradient_bound_check(), 0.0);
        assert!(AxisymProfile::from_fn(8, |_| 1.0).is_err());
        assert!(AxisymProfile::new(vec![1.0; 15]).is_err());
        assert!(AxisymProfile::new(vec![-1.0; 32]).is_err());
    }

    #[test]
    fn grid_matches_oracle() {
        let uf = |phi: f64| 2.0 + 0.01 * phi.cos();
        let p = AxisymProfile::from_fn(256, uf).unwrap();
        let c = axisym_curvatures(&p).unwrap();
        for (j, phi) in p.angles().iter().enumerate().step_by(7) {
            let (km, kp) = embedding_oracle_axisym(&uf, *phi, 1e-4);
            assert!((c.kappa_meridian[j] - km).abs() < 1e-6, "{j}");
            assert!((c.kappa_parallel[j] - kp).abs() < 1e-6, "{j}");
        }
    }

    fn analytic_error(n: usize) -> f64 {
        let uf = |phi: f64| 1.0 + 0.2 * phi.cos() + 0.1 * (2.0 * phi).cos();
        let d1 = |phi: f64| -0.2 * phi.sin() - 0.2 * (2.0 * phi).sin();
        let d2 = |phi: f64| -0.2 * phi.cos() - 0.4 * (2.0 * phi).cos();
        let p = AxisymProfile::from_fn(n, uf).unwrap();
        let c = axisym_curvatures(&p).unwrap();
        p.angles()
            .iter()
            .enumerate()
            .map(|(j, &phi)| {
                let (km, kp, _) = axisym_cell(uf(phi), d1(phi), d2(phi), phi);
                (c.kappa_meridian[j] - km).abs().max((c.kappa_parallel[j] - kp).abs())
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn grid_refinement_order() {
        let (e64, e128, e256) = (analytic_error(64), analytic_error(128), analytic_error(256));
        let o1 = (e64 / e128).log2();
        let o2 = (e128 / e256).log2();
        assert!(o1 >= 3.5 && o2 >= 3.5, "orders {o1} {o2}");
    }

    #[test]
    fn isotropy_at_poles() {
        let p = AxisymProfile::from_fn(128, |phi| 1.0 + 0.2 * phi.cos() + 0.1 * (2.0 * phi).cos()).unwrap();
        let c = axisym_curvatures(&p).unwrap();
        let gap = |j: usize| (c.kappa_meridian[j] - c.kappa_parallel[j]).abs();
        let phis = p.angles();
        // gap / phi^2 stays bounded near both poles
        for j in [0, 1, 2] {
            assert!(gap(j) / phis[j].powi(2) < 2.0);
            assert!(gap(127 - j) / phis[j].powi(2) < 2.0);
        }
        assert!(gap(0) < gap(3));
    }

    #[test]
    fn oscillation_of_cosine() {
        let p = AxisymProfile::from_fn(64, |phi| 2.0 + 0.1 * phi.cos()).unwrap();
        // cell centres miss the poles
        let expected = 0.2 * (PI / 128.0).cos();
        assert!((p.oscillation() - expected).abs() < 1e-14);
        assert!(p.gradient_bound_check() > 0.0);
    }

    #[test]
    fn spheres_are_horoconvex() {
        for r in [0.01, 0.5, 3.0, 15.0] {
            let p = AxisymProfile::from_fn(32, |_| r).unwrap();
            assert!(axisym_curvatures(&p).unwrap().min_kappa() > 0.0);
        }
    }

    #[test]
    fn profile_csv() {
        let p = AxisymProfile::from_fn(16, |_| 1.0).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("phi,u,kappa_meridian,kappa_parallel,v\n"));
        assert_eq!(text.lines().count(), 17);
    }
}

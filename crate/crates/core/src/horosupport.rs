//! Horospherical support functions of axisymmetric horo-convex surfaces:
//! embedding into the hyperboloid, the matrix `A[s]`, curvatures and the
//! scalar flow speed, plus a cross-check against the radial-graph route.

use std::f64::consts::PI;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::curvfun::CurvatureFunction;
use crate::graphcurv::{axisym_curvatures, AxisymProfile};
use crate::hypgeom::{minkowski_dot, HyperboloidPoint};
use crate::numerics::{cell_angles, derivs4, fejer_weights, legendre_all, legendre_with_derivative};
use crate::{Error, Result};

/// Axisymmetric support function sampled at cell centres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportProfile {
    pub s: Vec<f64>,
}

impl SupportProfile {
    pub fn new(s: Vec<f64>) -> Result<Self> {
        if s.len() < crate::graphcurv::MIN_GRID {
            return Err(Error::InvalidArgument(format!(
                "support grid of {} cells is too coarse",
                s.len()
            )));
        }
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite support value".into()));
        }
        Ok(Self { s })
    }

    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(cell_angles(n).into_iter().map(f).collect())
    }

    pub fn n_grid(&self) -> usize {
        self.s.len()
    }

    pub fn angles(&self) -> Vec<f64> {
        cell_angles(self.n_grid())
    }

    /// `(s, s_phi, s_phiphi)` at cell `j`.
    pub fn jet(&self, j: usize) -> (f64, f64, f64) {
        let (d1, d2) = derivs4(&self.s, j, PI / self.n_grid() as f64);
        (self.s[j], d1, d2)
    }

    /// CSV with header `phi,s`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["phi", "s"])?;
        for (phi, s) in self.angles().iter().zip(&self.s) {
            w.write_record(&[phi.to_string(), s.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads `phi,s` rows; the angles must be the cell centres of the grid.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            phi: f64,
            s: f64,
        }
        let mut rdr = csv::Reader::from_reader(reader);
        let rows: Vec<Row> = rdr.deserialize().collect::<std::result::Result<_, _>>()?;
        let expected = cell_angles(rows.len());
        for (r, e) in rows.iter().zip(&expected) {
            if (r.phi - e).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "support samples must sit at cell centres (j + 1/2) pi / n; got phi = {} where {e} was expected",
                    r.phi
                )));
            }
        }
        Self::new(rows.into_iter().map(|r| r.s).collect())
    }
}

/// Point of the hyperboloid with support data `(s, s_phi)` in the direction
/// at polar angle `phi` (in the `x-z` plane).
pub fn support_point(s: f64, ds: f64, phi: f64) -> [f64; 4] {
    let (sp, cp) = phi.sin_cos();
    let es = s.exp();
    let b = 0.5 * es * ds * ds - s.sinh();
    let a = -es * ds;
    // a e_phi + b z with e_phi = (cos, 0, -sin), z = (sin, 0, cos)
    [a * cp + b * sp, 0.0, -a * sp + b * cp, 0.5 * es * ds * ds + s.cosh()]
}

/// Diagonal entries `(A_phiphi, A_etaeta)` of `A[s]` in an orthonormal frame.
#[inline]
pub fn a_diag(s: f64, ds: f64, d2s: f64, phi: f64) -> (f64, f64) {
    let es = s.exp();
    let sh = s.sinh();
    let a11 = es * (0.5 * ds * ds + d2s) + sh;
    let a22 = es * (ds / phi.tan() - 0.5 * ds * ds) + sh;
    (a11, a22)
}

/// Embeds every cell, checking that the result lies on the hyperboloid.
pub fn embed_support(sp: &SupportProfile) -> Result<Vec<HyperboloidPoint>> {
    let phis = sp.angles();
    (0..sp.n_grid())
        .map(|j| {
            let (s, ds, _) = sp.jet(j);
            let x = support_point(s, ds, phis[j]);
            let defect = minkowski_dot(&x, &x) + 1.0;
            if defect.abs() > 1e-8 * x[3] * x[3] {
                return Err(Error::Numerical(format!(
                    "embedded cell {j} off the hyperboloid by {defect}"
                )));
            }
            Ok(HyperboloidPoint { x })
        })
        .collect()
}

/// Per-cell `(A_phiphi, A_etaeta)`.
pub fn a_matrix(sp: &SupportProfile) -> Vec<[f64; 2]> {
    let phis = sp.angles();
    (0..sp.n_grid())
        .map(|j| {
            let (s, ds, d2s) = sp.jet(j);
            let (a, b) = a_diag(s, ds, d2s, phis[j]);
            [a, b]
        })
        .collect()
}

pub fn is_horoconvex(sp: &SupportProfile) -> bool {
    a_matrix(sp).iter().all(|a| a[0] > 0.0 && a[1] > 0.0)
}

fn first_indefinite(a: &[[f64; 2]]) -> Option<(usize, f64)> {
    a.iter()
        .enumerate()
        .find(|(_, a)| !(a[0] > 0.0 && a[1] > 0.0))
        .map(|(j, a)| (j, a[0].min(a[1])))
}

/// Shifted principal curvatures `e^{-s} / A_ii` per cell, as
/// `[meridian, parallel]`.
pub fn curvature_from_support(sp: &SupportProfile) -> Result<Vec<[f64; 2]>> {
    let a = a_matrix(sp);
    if let Some((cell, val)) = first_indefinite(&a) {
        return Err(Error::HoroConvexityLost {
            cell,
            tau: 0.0,
            kappa: val,
        });
    }
    Ok(a.iter()
        .zip(&sp.s)
        .map(|(a, s)| {
            let e = (-s).exp();
            [e / a[0], e / a[1]]
        })
        .collect())
}

/// `ds/dt = e^{ps} F_*(A)^p` per cell, with the index of `A` raised by the
/// round metric.
pub fn support_flow_rhs(sp: &SupportProfile, f: &CurvatureFunction, p: f64) -> Result<Vec<f64>> {
    if !(p > 0.0) {
        return Err(Error::InvalidArgument(format!("power p = {p} must be positive")));
    }
    if f.n() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: f.n(),
        });
    }
    let a = a_matrix(sp);
    if let Some((cell, val)) = first_indefinite(&a) {
        return Err(Error::HoroConvexityLost {
            cell,
            tau: 0.0,
            kappa: val,
        });
    }
    let fstar = f.dual();
    a.iter()
        .zip(&sp.s)
        .map(|(a, s)| Ok((p * s).exp() * fstar.eval(a)?.powf(p)))
        .collect()
}

/// Support function given by a Legendre series in `cos(phi)`, evaluable with
/// exact derivatives anywhere on `[0, pi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegendreSupport {
    pub coeffs: Vec<f64>,
}

impl LegendreSupport {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidArgument("empty Legendre series".into()));
        }
        Ok(Self { coeffs })
    }

    /// Projects grid samples onto degrees `0..=degree` with Fejér quadrature.
    pub fn from_grid(sp: &SupportProfile, degree: usize) -> Result<Self> {
        if degree > sp.n_grid() / 4 {
            return Err(Error::InvalidArgument("degree too high for the grid".into()));
        }
        let w = fejer_weights(sp.n_grid());
        let mut coeffs = vec![0.0; degree + 1];
        for (j, phi) in sp.angles().iter().enumerate() {
            let p = legendre_all(degree, phi.cos());
            for k in 0..=degree {
                coeffs[k] += (2.0 * k as f64 + 1.0) / 2.0 * w[j] * sp.s[j] * p[k];
            }
        }
        Self::new(coeffs)
    }

    /// `(s, s_phi, s_phiphi)` at `phi`.
    pub fn jet(&self, phi: f64) -> (f64, f64, f64) {
        let (sn, cs) = phi.sin_cos();
        let mut out = (0.0, 0.0, 0.0);
        for (k, c) in self.coeffs.iter().enumerate() {
            let (p, dp) = legendre_with_derivative(k, cs);
            let kk = (k * (k + 1)) as f64;
            out.0 += c * p;
            out.1 -= c * sn * dp;
            // Legendre's equation removes the second derivative in x
            out.2 += c * (cs * dp - kk * p);
        }
        out
    }

    pub fn sample(&self, n: usize) -> Result<SupportProfile> {
        SupportProfile::from_fn(n, |phi| self.jet(phi).0)
    }

    fn point(&self, zeta: f64) -> [f64; 4] {
        let (s, ds, _) = self.jet(zeta);
        support_point(s, ds, zeta)
    }

    /// Polar angle, seen from the origin, of the embedded point for support
    /// direction `zeta`. Decreasing from `pi` to `0`.
    fn image_angle(&self, zeta: f64) -> f64 {
        let x = self.point(zeta);
        (-x[0]).atan2(x[2])
    }

    /// Support direction whose embedded point has polar angle `phi`.
    pub fn preimage(&self, phi: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, PI);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.image_angle(mid) > phi {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-15 {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    /// Radial graph of the embedded surface on `n` cells, together with the
    /// support direction behind each cell.
    pub fn radial_profile(&self, n: usize) -> Result<(AxisymProfile, Vec<f64>)> {
        let phis = cell_angles(n);
        let zetas: Vec<f64> = phis.iter().map(|&p| self.preimage(p)).collect();
        for (p, z) in phis.iter().zip(&zetas) {
            if (self.image_angle(*z) - p).abs() > 1e-9 {
                return Err(Error::Degenerate("support image is not a radial graph".into()));
            }
        }
        let u: Vec<f64> = zetas
            .iter()
            .map(|&z| {
                let x = self.point(z);
                (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt().asinh()
            })
            .collect();
        Ok((AxisymProfile::new(u)?, zetas))
    }

    /// `[meridian, parallel]` shifted curvatures at support direction `zeta`.
    pub fn curvatures_at(&self, zeta: f64) -> Result<[f64; 2]> {
        let (s, ds, d2s) = self.jet(zeta);
        let (a, b) = a_diag(s, ds, d2s, zeta);
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::HoroConvexityLost {
                cell: 0,
                tau: 0.0,
                kappa: a.min(b),
            });
        }
        let e = (-s).exp();
        Ok([e / a, e / b])
    }
}

/// Agreement between the support route and the radial-graph route.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrossCheck {
    pub n_grid: usize,
    pub fn_id: String,
    pub p: f64,
    pub horoconvex: bool,
    pub max_kappa_diff: f64,
    pub max_speed_diff: f64,
    pub min_kappa: f64,
}

/// Compares curvatures and normal speed of the surface with support `series`
/// computed (a) pointwise from `A[s]` and (b) from its radial graph on an
/// `n`-cell grid. Cells within two cells of a pole are included.
pub fn cross_check(series: &LegendreSupport, n: usize, f: &CurvatureFunction, p: f64) -> Result<CrossCheck> {
    let sp = series.sample(n)?;
    let horoconvex = is_horoconvex(&sp);
    if !horoconvex {
        return Err(Error::HoroConvexityLost {
            cell: first_indefinite(&a_matrix(&sp)).map_or(0, |x| x.0),
            tau: 0.0,
            kappa: 0.0,
        });
    }
    let (graph, zetas) = series.radial_profile(n)?;
    let gc = axisym_curvatures(&graph)?;
    let fstar = f.dual();
    let mut max_k: f64 = 0.0;
    let mut max_v: f64 = 0.0;
    let mut min_k = f64::INFINITY;
    for (j, &z) in zetas.iter().enumerate() {
        let k = series.curvatures_at(z)?;
        max_k = max_k
            .max((k[0] - gc.kappa_meridian[j]).abs())
            .max((k[1] - gc.kappa_parallel[j]).abs());
        min_k = min_k.min(k[0]).min(k[1]);
        let (s, ds, d2s) = series.jet(z);
        let (a, b) = a_diag(s, ds, d2s, z);
        let support_speed = (p * s).exp() * fstar.eval(&[a, b])?.powf(p);
        let graph_speed = f.eval(&[gc.kappa_meridian[j], gc.kappa_parallel[j]])?.powf(-p);
        max_v = max_v.max((support_speed - graph_speed).abs() / graph_speed.abs());
    }
    Ok(CrossCheck {
        n_grid: n,
        fn_id: f.id(),
        p,
        horoconvex,
        max_kappa_diff: max_k,
        max_speed_diff: max_v,
        min_kappa: min_k,
    })
}

/// Support series used for cross-checks and as "support" initial data.
pub fn catalog_profiles() -> Vec<(&'static str, LegendreSupport)> {
    vec![
        (
            "oblate",
            LegendreSupport {
                coeffs: vec![1.0, 0.0, 0.03],
            },
        ),
        (
            "pear",
            LegendreSupport {
                coeffs: vec![0.8, 0.03, 0.0, 0.02],
            },
        ),
        (
            "wavy",
            LegendreSupport {
                coeffs: vec![1.5, 0.0, -0.03, 0.0, 0.01],
            },
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypgeom::{geodesic_distance, hyperboloid_to_polar};

    #[test]
    fn constant_support_is_a_sphere() {
        let rho = 1.3;
        let sp = SupportProfile::from_fn(32, |_| rho).unwrap();
        let pts = embed_support(&sp).unwrap();
        for (p, phi) in pts.iter().zip(sp.angles()) {
            assert!((p.x[0] + rho.sinh() * phi.sin()).abs() < 1e-14);
            assert!((p.x[2] + rho.sinh() * phi.cos()).abs() < 1e-14);
            assert!((p.x[3] - rho.cosh()).abs() < 1e-14);
            assert!((geodesic_distance(p, &HyperboloidPoint::origin()) - rho).abs() < 1e-12);
        }
        for a in a_matrix(&sp) {
            assert!((a[0] - rho.sinh()).abs() < 1e-12 && (a[1] - rho.sinh()).abs() < 1e-12);
        }
        assert!(is_horoconvex(&sp));
        let exact = 1.0 / rho.tanh() - 1.0;
        for k in curvature_from_support(&sp).unwrap() {
            assert!((k[0] - exact).abs() < 1e-12 && (k[1] - exact).abs() < 1e-12);
            // principal radii from A
            assert!((1.0 / k[0] - rho.exp() * rho.sinh()).abs() < 1e-10);
        }
    }

    #[test]
    fn random_support_embeds_on_hyperboloid() {
        let sp = SupportProfile::from_fn(128, |phi| 0.7 + 0.2 * phi.cos() - 0.1 * (3.0 * phi).cos()).unwrap();
        for p in embed_support(&sp).unwrap() {
            assert!(p.norm_defect().abs() < 1e-8 * p.x[3] * p.x[3]);
        }
    }

    #[test]
    fn large_oscillation_loses_positivity() {
        let sp = SupportProfile::from_fn(128, |phi| 1.0 + 2.0 * phi.cos()).unwrap();
        assert!(!is_horoconvex(&sp));
        assert!(matches!(
            curvature_from_support(&sp),
            Err(Error::HoroConvexityLost { .. })
        ));
    }

    #[test]
    fn sphere_speed_matches_spherical_ode() {
        for id in ["shifted-mean", "gauss-root", "power-mean:r=-1", "power-mean:r=2"] {
            let f = CurvatureFunction::from_id(id, 2).unwrap();
            for p in [0.5, 1.0, 2.0] {
                for rho in [0.2, 1.0, 3.0] {
                    let sp = SupportProfile::from_fn(16, |_| rho).unwrap();
                    let rhs = support_flow_rhs(&sp, &f, p).unwrap();
                    let exact = 0.5f64.powf(p) * ((2.0 * rho).exp_m1() / 2.0).powf(p);
                    for r in rhs {
                        assert!((r - exact).abs() < 1e-10 * exact, "{id} p={p} rho={rho}");
                    }
                }
            }
        }
        let f = CurvatureFunction::shifted_mean(2);
        let sp = SupportProfile::from_fn(16, |_| 1.0).unwrap();
        assert!(support_flow_rhs(&sp, &f, 0.0).is_err());
    }

    #[test]
    fn sphere_speed_increases_with_radius() {
        let f = CurvatureFunction::shifted_mean(2);
        let speed = |rho: f64| support_flow_rhs(&SupportProfile::from_fn(16, |_| rho).unwrap(), &f, 1.0).unwrap()[0];
        assert!(speed(0.5) < speed(0.6) && speed(0.6) < speed(2.0));
    }

    #[test]
    fn legendre_series_jet() {
        let ls = LegendreSupport::new(vec![0.3, 0.2, -0.1, 0.05]).unwrap();
        let f = |phi: f64| ls.jet(phi).0;
        for phi in [0.3, 1.2, 2.8] {
            let h = 1e-4;
            let (_, d1, d2) = ls.jet(phi);
            assert!((d1 - (f(phi + h) - f(phi - h)) / (2.0 * h)).abs() < 1e-7);
            assert!((d2 - (f(phi + h) - 2.0 * f(phi) + f(phi - h)) / (h * h)).abs() < 1e-5);
        }
        let back = LegendreSupport::from_grid(&ls.sample(64).unwrap(), 8).unwrap();
        for k in 0..9 {
            let c = ls.coeffs.get(k).cloned().unwrap_or(0.0);
            assert!((back.coeffs[k] - c).abs() < 1e-13);
        }
    }

    #[test]
    fn radial_profile_reproduces_embedded_points() {
        let ls = LegendreSupport::new(vec![1.0, 0.0, 0.1]).unwrap();
        let (graph, zetas) = ls.radial_profile(64).unwrap();
        for (j, phi) in graph.angles().iter().enumerate() {
            let x = HyperboloidPoint { x: ls.point(zetas[j]) };
            let pol = hyperboloid_to_polar(&x);
            assert!((pol.r - graph.u[j]).abs() < 1e-12);
            assert!((pol.dir[2] - phi.cos()).abs() < 1e-9);
        }
    }

    #[test]
    fn support_and_graph_routes_agree() {
        let f = CurvatureFunction::shifted_mean(2);
        for (name, ls) in catalog_profiles() {
            let c = cross_check(&ls, 256, &f, 1.0).unwrap();
            assert!(c.horoconvex && c.min_kappa > 0.0, "{name}");
            assert!(c.max_kappa_diff < 1e-5, "{name}: {}", c.max_kappa_diff);
            assert!(c.max_speed_diff < 1e-5, "{name}: {}", c.max_speed_diff);
        }
    }

    #[test]
    fn support_csv_round_trip() {
        let sp = SupportProfile::from_fn(32, |phi| 1.0 + 0.1 * phi.cos()).unwrap();
        let mut buf = Vec::new();
        sp.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("phi,s\n"));
        let back = SupportProfile::read_csv(buf.as_slice()).unwrap();
        for (a, b) in back.s.iter().zip(&sp.s) {
            assert!((a - b).abs() < 1e-15);
        }
        let bad = "phi,s\n0.1,1.0\n";
        assert!(SupportProfile::read_csv(bad.as_bytes()).is_err());
    }
}

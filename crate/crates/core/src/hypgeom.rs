//! Models of hyperbolic 3-space: geodesic polar coordinates about an origin,
//! the Poincaré ball and the Minkowski hyperboloid, with distances and a
//! sphere fit through the ball model.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Lorentzian inner product with signature `(+, +, +, -)`.
#[inline]
pub fn minkowski_dot(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2] - a[3] * b[3]
}

fn norm3(x: &[f64; 3]) -> f64 {
    (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
}

/// Geodesic polar coordinates `(r, dir)` about the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarPoint {
    pub r: f64,
    pub dir: [f64; 3],
}

impl PolarPoint {
    pub fn new(r: f64, dir: [f64; 3]) -> Result<Self> {
        if !(r >= 0.0) {
            return Err(Error::InvalidArgument(format!("polar radius {r} < 0")));
        }
        if (norm3(&dir) - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument("direction is not a unit vector".into()));
        }
        Ok(Self { r, dir })
    }

    /// Point at distance `r` in the direction with polar angle `phi` and
    /// azimuth `eta` measured from the `+z` axis.
    pub fn from_angles(r: f64, phi: f64, eta: f64) -> Result<Self> {
        let (sp, cp) = phi.sin_cos();
        let (se, ce) = eta.sin_cos();
        Self::new(r, [sp * ce, sp * se, cp])
    }
}

/// A point of the open unit ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallPoint {
    pub x: [f64; 3],
}

impl BallPoint {
    pub fn new(x: [f64; 3]) -> Result<Self> {
        if !(norm3(&x) < 1.0) {
            return Err(Error::InvalidArgument("ball point outside the unit ball".into()));
        }
        Ok(Self { x })
    }

    pub fn radius(&self) -> f64 {
        norm3(&self.x)
    }
}

/// A point on the upper sheet of `<X, X> = -1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperboloidPoint {
    pub x: [f64; 4],
}

impl HyperboloidPoint {
    pub fn new(x: [f64; 4]) -> Result<Self> {
        let q = minkowski_dot(&x, &x);
        if !(x[3] > 0.0) || (q + 1.0).abs() > 1e-10 * x[3] * x[3] {
            return Err(Error::InvalidArgument(format!(
                "not on the hyperboloid: <X,X> = {q}, X_t = {}",
                x[3]
            )));
        }
        Ok(Self { x })
    }

    pub fn origin() -> Self {
        Self {
            x: [0.0, 0.0, 0.0, 1.0],
        }
    }

    pub fn norm_defect(&self) -> f64 {
        minkowski_dot(&self.x, &self.x) + 1.0
    }

    /// Isometry along the z axis taking the axis point at signed distance `d`
    /// to the origin.
    pub fn boost_z(&self, d: f64) -> Self {
        let (s, c) = (d.sinh(), d.cosh());
        let [x, y, z, t] = self.x;
        Self {
            x: [x, y, c * z - s * t, -s * z + c * t],
        }
    }
}

/// Euclidean sphere fitted in the ball model and read back as a geodesic
/// sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphereFit {
    pub center: HyperboloidPoint,
    pub radius: f64,
    pub hausdorff: f64,
}

/// Ball radius `tanh(u/2)` and conformal factor `e^psi` of the point at
/// geodesic distance `u` from the origin.
pub fn polar_to_ball(u: f64) -> (f64, f64) {
    let r = (0.5 * u).tanh();
    let eu = u.exp();
    let epsi = if u > 700.0 {
        0.5 * eu
    } else {
        (eu + 1.0).powi(2) / (2.0 * eu)
    };
    (r, epsi)
}

/// Geodesic distance from the origin of a ball point at Euclidean radius `r`.
pub fn ball_to_polar(r: f64) -> f64 {
    2.0 * r.atanh()
}

/// Euclidean principal curvature in the ball of a hypersurface point with
/// shifted hyperbolic curvature `kappa`, radial distance `u` and gradient
/// function `v`.
pub fn ball_curvature(kappa: f64, u: f64, v: f64) -> f64 {
    let (_, epsi) = polar_to_ball(u);
    epsi * (kappa + (1.0 - 1.0 / v) + 2.0 / ((u.exp() + 1.0) * v))
}

/// Inverse of [`ball_curvature`].
pub fn kappa_from_ball(lambda_ball: f64, u: f64, v: f64) -> f64 {
    let (_, epsi) = polar_to_ball(u);
    lambda_ball / epsi - (1.0 - 1.0 / v) - 2.0 / ((u.exp() + 1.0) * v)
}

pub fn polar_to_hyperboloid(p: &PolarPoint) -> HyperboloidPoint {
    let s = p.r.sinh();
    HyperboloidPoint {
        x: [s * p.dir[0], s * p.dir[1], s * p.dir[2], p.r.cosh()],
    }
}

pub fn hyperboloid_to_polar(h: &HyperboloidPoint) -> PolarPoint {
    let s = norm3(&[h.x[0], h.x[1], h.x[2]]);
    let r = s.asinh();
    let dir = if s > 0.0 {
        [h.x[0] / s, h.x[1] / s, h.x[2] / s]
    } else {
        [0.0, 0.0, 1.0]
    };
    PolarPoint { r, dir }
}

pub fn ball_to_hyperboloid(b: &BallPoint) -> HyperboloidPoint {
    let q = b.x[0] * b.x[0] + b.x[1] * b.x[1] + b.x[2] * b.x[2];
    let den = 1.0 - q;
    HyperboloidPoint {
        x: [
            2.0 * b.x[0] / den,
            2.0 * b.x[1] / den,
            2.0 * b.x[2] / den,
            (1.0 + q) / den,
        ],
    }
}

pub fn hyperboloid_to_ball(h: &HyperboloidPoint) -> BallPoint {
    let d = 1.0 + h.x[3];
    BallPoint {
        x: [h.x[0] / d, h.x[1] / d, h.x[2] / d],
    }
}

/// Hyperbolic distance, evaluated through the chord `<a-b, a-b>` to keep
/// precision for nearby points.
pub fn geodesic_distance(a: &HyperboloidPoint, b: &HyperboloidPoint) -> f64 {
    let d = [a.x[0] - b.x[0], a.x[1] - b.x[1], a.x[2] - b.x[2], a.x[3] - b.x[3]];
    let chord2 = minkowski_dot(&d, &d).max(0.0);
    2.0 * (0.5 * chord2.sqrt()).asinh()
}

/// Distance from the axis point at signed distance `d` to the point at
/// distance `u` and polar angle `phi`.
pub fn axis_offset_distance(d: f64, u: f64, phi: f64) -> f64 {
    let c = d.cosh() * u.cosh() - d.sinh() * u.sinh() * phi.cos();
    c.max(1.0).acosh()
}

/// Algebraic least-squares sphere through the cloud in the ball model,
/// converted to a geodesic sphere, with the one-sided Hausdorff distance of
/// the cloud to it.
pub fn fit_sphere(points: &[HyperboloidPoint]) -> Result<SphereFit> {
    if points.len() < 4 {
        return Err(Error::Degenerate(format!("{} points, need at least 4", points.len())));
    }
    let ball: Vec<BallPoint> = points.iter().map(hyperboloid_to_ball).collect();
    // |x|^2 = 2 c.x + k with k = rho^2 - |c|^2
    let m = ball.len();
    let mut a = DMatrix::zeros(m, 4);
    let mut rhs = DVector::zeros(m);
    for (i, b) in ball.iter().enumerate() {
        a[(i, 0)] = 2.0 * b.x[0];
        a[(i, 1)] = 2.0 * b.x[1];
        a[(i, 2)] = 2.0 * b.x[2];
        a[(i, 3)] = 1.0;
        rhs[i] = b.x[0] * b.x[0] + b.x[1] * b.x[1] + b.x[2] * b.x[2];
    }
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-12 * smax) {
        return Err(Error::Degenerate("point set does not determine a sphere".into()));
    }
    let sol = svd
        .solve(&rhs, 1e-14 * smax)
        .map_err(|e| Error::Numerical(e.to_string()))?;
    let c = [sol[0], sol[1], sol[2]];
    let cn = norm3(&c);
    let rho2 = sol[3] + cn * cn;
    if !(rho2 > 0.0) {
        return Err(Error::Degenerate("fitted sphere has no real radius".into()));
    }
    let rho = rho2.sqrt();
    let axis = if cn > 1e-15 {
        [c[0] / cn, c[1] / cn, c[2] / cn]
    } else {
        [0.0, 0.0, 1.0]
    };
    let (near, far) = (cn - rho, cn + rho);
    if !(near > -1.0 && far < 1.0) {
        return Err(Error::Degenerate("fitted Euclidean sphere leaves the ball".into()));
    }
    let (d_near, d_far) = (2.0 * near.atanh(), 2.0 * far.atanh());
    let radius = 0.5 * (d_far - d_near);
    let center = polar_to_hyperboloid(&PolarPoint {
        r: 0.5 * (d_far + d_near),
        dir: axis,
    });
    let hausdorff = points
        .iter()
        .map(|p| (geodesic_distance(p, &center) - radius).abs())
        .fold(0.0, f64::max);
    Ok(SphereFit {
        center,
        radius,
        hausdorff,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Polar,
    Ball,
    Hyperboloid,
}

#[derive(Debug, Serialize, Deserialize)]
struct CloudRow {
    model: Model,
    x0: f64,
    x1: f64,
    x2: f64,
    x3: f64,
}

/// Reads a point cloud with header `model,x0,x1,x2,x3`. Polar rows hold
/// `r, dir`; ball rows leave `x3` unused.
pub fn read_cloud_csv<R: Read>(reader: R) -> Result<Vec<HyperboloidPoint>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.deserialize::<CloudRow>() {
        let row = row?;
        let p = match row.model {
            Model::Polar => polar_to_hyperboloid(&PolarPoint::new(row.x0, [row.x1, row.x2, row.x3])?),
            Model::Ball => ball_to_hyperboloid(&BallPoint::new([row.x0, row.x1, row.x2])?),
            Model::Hyperboloid => HyperboloidPoint::new([row.x0, row.x1, row.x2, row.x3])?,
        };
        out.push(p);
    }
    Ok(out)
}

/// Writes a cloud in the requested model.
pub fn write_cloud_csv<W: Write>(writer: W, points: &[HyperboloidPoint], model: Model) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for p in points {
        let row = match model {
            Model::Hyperboloid => CloudRow {
                model,
                x0: p.x[0],
                x1: p.x[1],
                x2: p.x[2],
                x3: p.x[3],
            },
            Model::Ball => {
                let b = hyperboloid_to_ball(p);
                CloudRow {
                    model,
                    x0: b.x[0],
                    x1: b.x[1],
                    x2: b.x[2],
                    x3: 0.0,
                }
            }
            Model::Polar => {
                let q = hyperboloid_to_polar(p);
                CloudRow {
                    model,
                    x0: q.r,
                    x1: q.dir[0],
                    x2: q.dir[1],
                    x3: q.dir[2],
                }
            }
        };
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sphere_cloud(center_d: f64, radius: f64, dir: [f64; 3]) -> Vec<HyperboloidPoint> {
        // geodesic sphere about the origin, then boosted along z and rotated
        // so its centre sits at distance center_d in direction dir
        let mut pts = Vec::new();
        for i in 0..12 {
            for j in 0..8 {
                let phi = (i as f64 + 0.5) * PI / 12.0;
                let eta = j as f64 * PI / 4.0;
                let p = polar_to_hyperboloid(&PolarPoint::from_angles(radius, phi, eta).unwrap());
                let q = p.boost_z(-center_d);
                // rotate +z onto dir (dir lies in the x-z plane here)
                let (s, c) = (dir[0], dir[2]);
                pts.push(HyperboloidPoint {
                    x: [c * q.x[0] + s * q.x[2], q.x[1], -s * q.x[0] + c * q.x[2], q.x[3]],
                });
            }
        }
        pts
    }

    #[test]
    fn ball_conversions() {
        let (r, e) = polar_to_ball(0.0);
        assert_eq!((r, e), (0.0, 2.0));
        let (r, e) = polar_to_ball(3f64.ln());
        assert!((r - 0.5).abs() < 1e-15 && (e - 8.0 / 3.0).abs() < 1e-14);
        for u in [0.1, 1.0, 10.0] {
            let (r, e) = polar_to_ball(u);
            assert!((ball_to_polar(r) - u).abs() < 1e-12 * u.max(1.0), "{u}");
            assert!((e - 2.0 / (1.0 - r * r)).abs() < 1e-12 * e);
        }
    }

    #[test]
    fn ball_curvature_relation() {
        let u = 3f64.ln();
        assert!((ball_curvature(0.0, u, 1.0) - 4.0 / 3.0).abs() < 1e-14);
        for u in [0.3f64, 1.0, 2.5] {
            let kappa = 1.0 / u.tanh() - 1.0;
            let image_radius = (0.5 * u).tanh();
            assert!((ball_curvature(kappa, u, 1.0) - 1.0 / image_radius).abs() < 1e-12);
        }
        for (k, u, v) in [(0.3, 0.7, 1.2), (2.0, 3.0, 1.0), (0.01, 0.1, 5.0)] {
            let l = ball_curvature(k, u, v);
            assert!((kappa_from_ball(l, u, v) - k).abs() < 1e-12);
        }
    }

    #[test]
    fn hyperboloid_basics() {
        let o = polar_to_hyperboloid(&PolarPoint::new(0.0, [1.0, 0.0, 0.0]).unwrap());
        assert_eq!(o.x, [0.0, 0.0, 0.0, 1.0]);
        let p = polar_to_hyperboloid(&PolarPoint::new(1.0, [1.0, 0.0, 0.0]).unwrap());
        assert!((p.x[0] - 1f64.sinh()).abs() < 1e-15 && (p.x[3] - 1f64.cosh()).abs() < 1e-15);
        assert!(p.norm_defect().abs() < 1e-14);
        assert!((geodesic_distance(&p, &o) - 1.0).abs() < 1e-12);
        assert_eq!(geodesic_distance(&p, &p), 0.0);
        let a = polar_to_hyperboloid(&PolarPoint::new(0.7, [0.0, 0.0, 1.0]).unwrap());
        let b = polar_to_hyperboloid(&PolarPoint::new(1.9, [0.0, 0.0, -1.0]).unwrap());
        assert!((geodesic_distance(&a, &b) - 2.6).abs() < 1e-12);
        assert!(HyperboloidPoint::new([0.0, 0.0, 0.0, -1.0]).is_err());
        assert!(HyperboloidPoint::new([1.0, 0.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn law_of_cosines_matches_minkowski() {
        for (d, u, phi) in [(0.3f64, 2.0f64, 0.4f64), (-1.2, 0.5, 2.9), (2.0, 3.0, PI / 2.0)] {
            let p = polar_to_hyperboloid(&PolarPoint::from_angles(u, phi, 0.7).unwrap());
            let y = polar_to_hyperboloid(&PolarPoint::new(d.abs(), [0.0, 0.0, d.signum()]).unwrap());
            let direct = geodesic_distance(&p, &y);
            assert!((axis_offset_distance(d, u, phi) - direct).abs() < 1e-10);
            let moved = p.boost_z(d);
            assert!((hyperboloid_to_polar(&moved).r - direct).abs() < 1e-10);
        }
    }

    #[test]
    fn model_round_trips() {
        let p = PolarPoint::from_angles(1.3, 0.8, 2.2).unwrap();
        let h = polar_to_hyperboloid(&p);
        let b = hyperboloid_to_ball(&h);
        assert!((b.radius() - polar_to_ball(1.3).0).abs() < 1e-14);
        let h2 = ball_to_hyperboloid(&b);
        assert!(geodesic_distance(&h, &h2) < 1e-10);
        let p2 = hyperboloid_to_polar(&h2);
        assert!((p2.r - 1.3).abs() < 1e-12);
    }

    #[test]
    fn fit_recovers_exact_sphere() {
        let cloud = sphere_cloud(0.8, 2.0, [0.6, 0.0, 0.8]);
        let fit = fit_sphere(&cloud).unwrap();
        assert!(fit.hausdorff < 1e-8, "{}", fit.hausdorff);
        assert!((fit.radius - 2.0).abs() < 1e-8);
        let c = hyperboloid_to_polar(&fit.center);
        assert!((c.r - 0.8).abs() < 1e-8);
        assert!((c.dir[0] - 0.6).abs() < 1e-8 && (c.dir[2] - 0.8).abs() < 1e-8);
    }

    #[test]
    fn fit_is_rotation_equivariant() {
        let a = fit_sphere(&sphere_cloud(0.5, 1.0, [0.0, 0.0, 1.0])).unwrap();
        let b = fit_sphere(&sphere_cloud(0.5, 1.0, [1.0, 0.0, 0.0])).unwrap();
        assert!((a.radius - b.radius).abs() < 1e-10);
        assert!((a.center.x[2] - b.center.x[0]).abs() < 1e-10);
    }

    #[test]
    fn fit_single_point_perturbation() {
        let mut cloud = sphere_cloud(0.0, 2.0, [0.0, 0.0, 1.0]);
        let delta = 0.01;
        let p = hyperboloid_to_polar(&cloud[5]);
        cloud[5] = polar_to_hyperboloid(&PolarPoint {
            r: p.r + delta,
            dir: p.dir,
        });
        let fit = fit_sphere(&cloud).unwrap();
        // independent evaluation of the same quantity
        let worst = cloud
            .iter()
            .map(|q| (geodesic_distance(q, &fit.center) - fit.radius).abs())
            .fold(0.0, f64::max);
        assert_eq!(worst, fit.hausdorff);
        assert!(
            fit.hausdorff > 0.5 * delta && fit.hausdorff <= delta,
            "{}",
            fit.hausdorff
        );
    }

    #[test]
    fn fit_of_perturbed_profile_is_below_oscillation() {
        let mut cloud = Vec::new();
        for i in 0..40 {
            for j in 0..6 {
                let phi = (i as f64 + 0.5) * PI / 40.0;
                let u = 2.0 + 0.1 * (2.0 * phi).cos();
                cloud.push(polar_to_hyperboloid(
                    &PolarPoint::from_angles(u, phi, j as f64 * PI / 3.0).unwrap(),
                ));
            }
        }
        let fit = fit_sphere(&cloud).unwrap();
        assert!(fit.hausdorff > 0.0 && fit.hausdorff < 0.2);
    }

    #[test]
    fn fit_rejects_degenerate_sets() {
        let o = HyperboloidPoint::origin();
        assert!(matches!(fit_sphere(&[o, o, o]), Err(Error::Degenerate(_))));
        let flat: Vec<_> = (0..10)
            .map(|i| polar_to_hyperboloid(&PolarPoint::from_angles(0.5 + 0.1 * i as f64, PI / 2.0, 0.0).unwrap()))
            .collect();
        assert!(fit_sphere(&flat).is_err());
    }

    #[test]
    fn cloud_csv_round_trip() {
        let cloud = sphere_cloud(0.3, 1.0, [0.0, 0.0, 1.0]);
        for model in [Model::Polar, Model::Ball, Model::Hyperboloid] {
            let mut buf = Vec::new();
            write_cloud_csv(&mut buf, &cloud, model).unwrap();
            let text = String::from_utf8(buf.clone()).unwrap();
            assert!(text.starts_with("model,x0,x1,x2,x3"));
            let back = read_cloud_csv(buf.as_slice()).unwrap();
            for (a, b) in cloud.iter().zip(&back) {
                assert!(geodesic_distance(a, b) < 1e-10);
            }
        }
    }
}

//! Reductions over an evolving profile: Legendre modes, pinching, rescaled
//! curvature bands, roundness in the ball model, the oscillation-minimising
//! centre on the symmetry axis, and exponential decay fits.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::curvfun::CurvatureFunction;
use crate::graphcurv::{oscillation, AxisymCurvatures, AxisymProfile};
use crate::hypgeom::{fit_sphere, hyperboloid_to_polar, polar_to_hyperboloid, HyperboloidPoint, PolarPoint};
use crate::numerics::{cell_angles, fejer_weights, fit_line, golden_section, legendre_all, CosineSeries};
use crate::{Error, Result};

/// Legendre coefficients `a_0..=a_K` of a cell-centred axisymmetric function,
/// `a_k = (2k+1)/2 ∫ σ P_k(cos φ) sin φ dφ` by Fejér quadrature.
pub fn mode_amplitudes(sigma: &[f64], k_max: usize) -> Result<Vec<f64>> {
    let n = sigma.len();
    if n < 4 || k_max > n / 4 {
        return Err(Error::InvalidArgument(format!(
            "degree {k_max} needs at least {} cells, got {n}",
            4 * k_max.max(1)
        )));
    }
    let w = fejer_weights(n);
    let mut a = vec![0.0; k_max + 1];
    for ((phi, s), wj) in cell_angles(n).iter().zip(sigma).zip(&w) {
        let pk = legendre_all(k_max, phi.cos());
        for (k, ak) in a.iter_mut().enumerate() {
            *ak += wj * s * pk[k];
        }
    }
    for (k, ak) in a.iter_mut().enumerate() {
        *ak *= (2 * k + 1) as f64 / 2.0;
    }
    Ok(a)
}

/// Sum of a Legendre series at the cell centres of an `n`-cell grid.
pub fn reconstruct(coeffs: &[f64], n: usize) -> Vec<f64> {
    let k_max = coeffs.len().saturating_sub(1);
    cell_angles(n)
        .iter()
        .map(|phi| {
            let pk = legendre_all(k_max, phi.cos());
            coeffs.iter().zip(&pk).map(|(a, p)| a * p).sum()
        })
        .collect()
}

/// Largest ratio of principal curvatures over the grid.
pub fn pinch_ratio(c: &AxisymCurvatures) -> f64 {
    c.kappa_meridian
        .iter()
        .zip(&c.kappa_parallel)
        .map(|(a, b)| a.max(*b) / a.min(*b))
        .fold(1.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RescaledRange {
    pub kappa_q_min: f64,
    pub kappa_q_max: f64,
    pub fq_min: f64,
    pub fq_max: f64,
}

/// Extremes of `κ_i Q` and `F(κ)Q` over the grid.
pub fn rescaled_curvature_range(c: &AxisymCurvatures, q: f64, f: &CurvatureFunction) -> Result<RescaledRange> {
    let mut r = RescaledRange {
        kappa_q_min: f64::INFINITY,
        kappa_q_max: f64::NEG_INFINITY,
        fq_min: f64::INFINITY,
        fq_max: f64::NEG_INFINITY,
    };
    for (a, b) in c.kappa_meridian.iter().zip(&c.kappa_parallel) {
        let kq = [a * q, b * q];
        r.kappa_q_min = r.kappa_q_min.min(kq[0].min(kq[1]));
        r.kappa_q_max = r.kappa_q_max.max(kq[0].max(kq[1]));
        let fq = f.eval(&kq)?;
        r.fq_min = r.fq_min.min(fq);
        r.fq_max = r.fq_max.max(fq);
    }
    Ok(r)
}

/// Points of the surface of revolution on `slices` meridians.
pub fn surface_cloud(p: &AxisymProfile, slices: usize) -> Vec<HyperboloidPoint> {
    let phis = p.angles();
    let mut out = Vec::with_capacity(slices * phis.len());
    for m in 0..slices {
        let eta = 2.0 * PI * m as f64 / slices as f64;
        for (u, phi) in p.u.iter().zip(&phis) {
            let (sp, cp) = phi.sin_cos();
            let (se, ce) = eta.sin_cos();
            out.push(polar_to_hyperboloid(&PolarPoint {
                r: *u,
                dir: [sp * ce, sp * se, cp],
            }));
        }
    }
    out
}

/// Hausdorff distance from the surface to its best-fit geodesic sphere.
pub fn hausdorff_roundness(p: &AxisymProfile, slices: usize) -> Result<f64> {
    Ok(fit_sphere(&surface_cloud(p, slices))?.hausdorff)
}

fn seen_from(r: f64, phi: f64, d: f64) -> (f64, f64) {
    let x = polar_to_hyperboloid(&PolarPoint {
        r,
        dir: [phi.sin(), 0.0, phi.cos()],
    })
    .boost_z(d);
    let pp = hyperboloid_to_polar(&x);
    (pp.r, pp.dir[0].atan2(pp.dir[2]))
}

/// Radial distances of the cells and both poles as seen from the axis point
/// at signed distance `d`.
fn recentred_radii(u: &[f64], pole_values: (f64, f64), d: f64) -> Vec<f64> {
    let h = PI / u.len() as f64;
    let mut out = Vec::with_capacity(u.len() + 2);
    out.push(seen_from(pole_values.0, 0.0, d).0);
    out.extend(
        u.iter()
            .enumerate()
            .map(|(j, &r)| seen_from(r, (j as f64 + 0.5) * h, d).0),
    );
    out.push(seen_from(pole_values.1, PI, d).0);
    out
}

/// The profile as a radial graph about the axis point at signed distance `d`.
/// Each new cell direction is traced back to the surface, which is
/// interpolated by its cosine series.
pub fn recentre(p: &AxisymProfile, d: f64) -> Result<AxisymProfile> {
    let series = CosineSeries::from_cells(&p.u);
    let angle = |phi: f64| seen_from(series.eval(phi), phi, d).1;
    // star-shapedness about the new centre: image angles increase
    let probe: Vec<f64> = (0..=4 * p.n_grid())
        .map(|i| angle(PI * i as f64 / (4 * p.n_grid()) as f64))
        .collect();
    if probe.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Degenerate(format!(
            "surface is not a radial graph about the axis point {d}"
        )));
    }
    let u = p
        .angles()
        .iter()
        .map(|&target| {
            let (mut lo, mut hi) = (0.0, PI);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if angle(mid) < target {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo < 1e-15 {
                    break;
                }
            }
            let phi = 0.5 * (lo + hi);
            seen_from(series.eval(phi), phi, d).0
        })
        .collect();
    let mut out = AxisymProfile::new(u)?;
    out.t = p.t;
    out.tau = p.tau;
    Ok(out)
}

/// Axis offset minimising the oscillation of the recentred radial graph,
/// searched on `[-osc, osc]`, and the recentred profile.
pub fn optimal_center(p: &AxisymProfile) -> Result<(f64, AxisymProfile)> {
    let osc = p.oscillation();
    if osc < 1e-14 {
        return Ok((0.0, p.clone()));
    }
    let series = CosineSeries::from_cells(&p.u);
    let poles = (series.eval(0.0), series.eval(PI));
    let (d, _) = golden_section(|d| oscillation(&recentred_radii(&p.u, poles, d)), -osc, osc, 1e-11);
    Ok((d, recentre(p, d)?))
}

/// Exponent `γ` of `value ≈ C e^{-γτ}` fitted on the trailing `window`
/// fraction of the series, with the `r²` of the log-linear fit.
pub fn fit_decay(series: &[(f64, f64)], window: f64) -> Result<(f64, f64)> {
    if series.len() < 2 {
        return Err(Error::InvalidArgument("decay fit needs two or more samples".into()));
    }
    if !(window > 0.0 && window <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "window fraction {window} outside (0, 1]"
        )));
    }
    let t0 = series.first().unwrap().0;
    let t1 = series.last().unwrap().0;
    let start = t1 - window * (t1 - t0);
    let tail: Vec<&(f64, f64)> = series
        .iter()
        .filter(|(t, _)| *t >= start - 1e-12 * (t1 - t0).abs())
        .collect();
    if let Some((t, v)) = tail.iter().find(|(_, v)| !(*v > 0.0)) {
        return Err(Error::InvalidArgument(format!("nonpositive value {v} at tau = {t}")));
    }
    let x: Vec<f64> = tail.iter().map(|(t, _)| *t).collect();
    let y: Vec<f64> = tail.iter().map(|(_, v)| v.ln()).collect();
    let fit = fit_line(&x, &y)?;
    Ok((-fit.slope, fit.r2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Exec;
    use crate::numerics::legendre;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn legendre_modes() {
        let n = 128;
        let s: Vec<f64> = cell_angles(n).iter().map(|p| legendre(2, p.cos())).collect();
        let a = mode_amplitudes(&s, 8).unwrap();
        for (k, ak) in a.iter().enumerate() {
            let want = if k == 2 { 1.0 } else { 0.0 };
            assert!((ak - want).abs() < 1e-10, "a{k} = {ak}");
        }
        let c = mode_amplitudes(&vec![0.37; n], 3).unwrap();
        assert!((c[0] - 0.37).abs() < 1e-14);
        assert!(mode_amplitudes(&s, 40).is_err());
    }

    #[test]
    fn smooth_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 128;
        let coeffs: Vec<f64> = (0..=6)
            .map(|k| rng.random_range(-1.0..1.0) / (1 + k * k) as f64)
            .collect();
        let sigma = reconstruct(&coeffs, n);
        let a = mode_amplitudes(&sigma, 16).unwrap();
        let back = reconstruct(&a, n);
        for (x, y) in sigma.iter().zip(&back) {
            assert!((x - y).abs() < 1e-8);
        }
        // Parseval
        let w = fejer_weights(n);
        let l2: f64 = sigma.iter().zip(&w).map(|(s, w)| w * s * s).sum();
        let modal: f64 = a
            .iter()
            .enumerate()
            .map(|(k, a)| a * a * 2.0 / (2 * k + 1) as f64)
            .sum();
        assert!(modal <= l2 * (1.0 + 1e-12));
    }

    #[test]
    fn sphere_reductions() {
        let p = AxisymProfile::from_fn(64, |_| 2.0).unwrap();
        let c = p.curvatures(Exec::Sequential);
        assert_eq!(pinch_ratio(&c), 1.0);
        let q = crate::flow::spherical::q_of_theta(2.0);
        let r = rescaled_curvature_range(&c, q, &CurvatureFunction::shifted_mean(2)).unwrap();
        assert!((r.kappa_q_min - 1.0).abs() < 1e-14 && (r.kappa_q_max - 1.0).abs() < 1e-14);
        assert!((r.fq_min - 2.0).abs() < 1e-14);
        assert!(hausdorff_roundness(&p, 6).unwrap() < 1e-10);
    }

    #[test]
    fn perturbed_sphere_pinches() {
        let p = AxisymProfile::from_fn(128, |ph| 1.5 + 0.05 * legendre(2, ph.cos())).unwrap();
        assert!(pinch_ratio(&p.curvatures(Exec::Sequential)) > 1.0);
        assert!(hausdorff_roundness(&p, 6).unwrap() > 1e-3);
    }

    #[test]
    fn centred_sphere() {
        let p = AxisymProfile::from_fn(64, |_| 1.0).unwrap();
        let (d, q) = optimal_center(&p).unwrap();
        assert_eq!(d, 0.0);
        assert_eq!(q.oscillation(), 0.0);
    }

    #[test]
    fn recovers_offset() {
        let sphere = AxisymProfile::from_fn(128, |_| 2.0).unwrap();
        let moved = recentre(&sphere, 0.3).unwrap();
        assert!(moved.oscillation() > 0.5);
        let (d, back) = optimal_center(&moved).unwrap();
        assert!((d + 0.3).abs() < 1e-6, "d = {d}");
        assert!(back.oscillation() < 1e-8, "osc {:e}", back.oscillation());
    }

    #[test]
    fn removes_first_harmonic() {
        for eps in [0.02, 0.01] {
            let p = AxisymProfile::from_fn(128, |ph| 1.5 + eps * ph.cos()).unwrap();
            let (_, r) = optimal_center(&p).unwrap();
            assert!(r.oscillation() < 5.0 * eps * eps, "eps {eps}: {}", r.oscillation());
        }
    }

    #[test]
    fn decay_fits() {
        let s: Vec<(f64, f64)> = (0..=100)
            .map(|i| i as f64 * 0.08)
            .map(|t| (t, (-2.0 * t).exp()))
            .collect();
        let (g, r2) = fit_decay(&s, 0.5).unwrap();
        assert!((g - 2.0).abs() < 1e-6 && r2 > 0.999999);
        let s: Vec<(f64, f64)> = (0..=100)
            .map(|i| i as f64 * 0.08)
            .map(|t| (t, (-2.0 * t).exp() * (1.0 + 0.1 * (-t).exp())))
            .collect();
        let (g, _) = fit_decay(&s, 0.5).unwrap();
        // the correction decays too, which steepens the log slope
        assert!((2.0..=2.05).contains(&g), "{g}");
        let c: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 3.0)).collect();
        assert_eq!(fit_decay(&c, 0.5).unwrap().0, 0.0);
        assert!(fit_decay(&[(0.0, 1.0), (1.0, 0.0)], 1.0).is_err());
    }
}

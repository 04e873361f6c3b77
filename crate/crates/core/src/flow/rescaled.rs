//! Method-of-lines solver for `σ = u - θ` in rescaled time:
//! `∂σ/∂τ = v / F(κQ)^p - n^{-p}`.

use std::f64::consts::PI;

use crate::curvfun::CurvatureFunction;
use crate::exec::Exec;
use crate::flow::spherical::{q_of_theta, remaining_time, SphericalState};
use crate::graphcurv::{axisym_cell, AxisymProfile, MIN_GRID};
use crate::numerics::derivs4;
use crate::{Error, Result};

/// `A(θ) = 2p / (n^{p+1} (1 - e^{-2θ}))`, the coefficient of the linearized
/// rescaled equation around the sphere.
pub fn a_coefficient(n: usize, p: f64, theta: f64) -> f64 {
    2.0 * p / ((n as f64).powf(p + 1.0) * -(-2.0 * theta).exp_m1())
}

/// Limit of [`a_coefficient`] as `θ → ∞`.
pub fn a_infinity(n: usize, p: f64) -> f64 {
    2.0 * p / (n as f64).powf(p + 1.0)
}

/// Growth rate of the degree-`k` spherical harmonic mode: `A(θ)(n - k(n-1+k))`.
pub fn linearized_rate(n: usize, p: f64, theta: f64, k: usize) -> f64 {
    let (nf, kf) = (n as f64, k as f64);
    a_coefficient(n, p, theta) * (nf - kf * (nf - 1.0 + kf))
}

/// Decay rate `2(n+2)A(θ)` of the squared L² norm of the part of `σ`
/// orthogonal to constants and first harmonics.
pub fn l2_bulk_rate(n: usize, p: f64, theta: f64) -> f64 {
    2.0 * (n as f64 + 2.0) * a_coefficient(n, p, theta)
}

/// Right-hand side together with the smallest rescaled curvature `κQ` seen
/// and the cell where it occurs.
#[derive(Debug, Clone)]
pub struct RhsEval {
    pub rate: Vec<f64>,
    pub min_kappa_q: f64,
    pub argmin: usize,
}

/// Evaluates the rescaled equation on the cell grid for the graph
/// `u = σ + θ`.
pub fn rescaled_rhs_at(
    sigma: &[f64],
    theta: f64,
    tau: f64,
    f: &CurvatureFunction,
    p: f64,
    exec: Exec,
) -> Result<RhsEval> {
    let n_cells = sigma.len();
    if n_cells < MIN_GRID {
        return Err(Error::InvalidArgument(format!("grid of {n_cells} cells is too coarse")));
    }
    if f.n() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: f.n(),
        });
    }
    let q = q_of_theta(theta);
    let target = 2f64.powf(-p);
    let h = PI / n_cells as f64;
    let unit_power = p == 1.0;
    let u: Vec<f64> = sigma.iter().map(|s| s + theta).collect();
    let cells: Vec<std::result::Result<(f64, f64), (f64, f64)>> = exec.map(n_cells, |j| {
        let (d1, d2) = derivs4(&u, j, h);
        let (km, kp, v) = axisym_cell(u[j], d1, d2, (j as f64 + 0.5) * h);
        let kq = [km * q, kp * q];
        let kmin = kq[0].min(kq[1]);
        if !(kmin > 0.0) {
            return Err((kmin, 0.0));
        }
        match f.eval(&kq) {
            Ok(fv) if fv > 0.0 => {
                let speed = if unit_power { v / fv } else { v * fv.powf(-p) };
                Ok((speed - target, kmin))
            }
            _ => Err((kmin, 0.0)),
        }
    });
    let mut rate = Vec::with_capacity(n_cells);
    let mut min_kappa_q = f64::INFINITY;
    let mut argmin = 0;
    for (j, c) in cells.into_iter().enumerate() {
        match c {
            Ok((r, k)) => {
                rate.push(r);
                if k < min_kappa_q {
                    min_kappa_q = k;
                    argmin = j;
                }
            }
            Err((k, _)) => {
                return Err(Error::HoroConvexityLost {
                    cell: j,
                    tau,
                    kappa: k / q,
                });
            }
        }
    }
    Ok(RhsEval {
        rate,
        min_kappa_q,
        argmin,
    })
}

/// Evolving surface in rescaled variables.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub spherical: SphericalState,
    /// `σ = u - θ` on cell centres.
    pub sigma: Vec<f64>,
    pub f: CurvatureFunction,
    pub p: f64,
    /// Radius of the reference sphere at `τ = 0`.
    pub theta0: f64,
    /// Sum of the constant modes moved from `σ` into the reference sphere.
    pub theta_shift: f64,
    pub exec: Exec,
}

impl FlowState {
    /// Starts from a radial graph, matching the reference sphere to the
    /// Legendre mean of `u`.
    pub fn new(u0: &AxisymProfile, f: CurvatureFunction, p: f64, exec: Exec) -> Result<Self> {
        if !(p > 0.0 && p.is_finite()) {
            return Err(Error::InvalidArgument(format!("power p = {p} must be positive")));
        }
        if f.n() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                got: f.n(),
            });
        }
        let mean = crate::flow::diagnostics::mode_amplitudes(&u0.u, 0)?[0];
        if !(mean > 0.0) {
            return Err(Error::InvalidArgument(format!("mean radius {mean} must be positive")));
        }
        let curv = u0.curvatures(exec);
        let (cell, kmin) = curv.argmin_kappa();
        if !(kmin > 0.0) {
            return Err(Error::Degenerate(format!(
                "initial surface is not horo-convex: shifted curvature {kmin:e} at cell {cell}"
            )));
        }
        Ok(Self {
            spherical: SphericalState::initial(mean),
            sigma: u0.u.iter().map(|x| x - mean).collect(),
            f,
            p,
            theta0: mean,
            theta_shift: 0.0,
            exec,
        })
    }

    pub fn n_grid(&self) -> usize {
        self.sigma.len()
    }

    pub fn theta(&self) -> f64 {
        self.spherical.theta
    }

    pub fn tau(&self) -> f64 {
        self.spherical.tau
    }

    /// Radius of the reference sphere at rescaled time `tau`.
    pub fn theta_at(&self, tau: f64) -> f64 {
        self.theta0 + self.theta_shift + 2f64.powf(-self.p) * tau
    }

    /// Current radial graph `u = σ + θ`.
    pub fn u(&self) -> Vec<f64> {
        let th = self.theta();
        self.sigma.iter().map(|s| s + th).collect()
    }

    pub fn profile(&self) -> Result<AxisymProfile> {
        let mut prof = AxisymProfile::new(self.u())?;
        prof.t = self.spherical.t;
        prof.tau = self.spherical.tau;
        Ok(prof)
    }

    pub fn rhs(&self) -> Result<RhsEval> {
        rescaled_rhs_at(&self.sigma, self.theta(), self.tau(), &self.f, self.p, self.exec)
    }

    /// Largest stable step: `c_cfl (Δφ)² / D_max` with `D` the coefficient of
    /// the second derivatives, `p Q (Ḟ¹ + Ḟ²) / (F^{p+1} v² sinh² u)`.
    pub fn cfl_step(&self, c_cfl: f64) -> Result<f64> {
        if !(c_cfl > 0.0) {
            return Err(Error::InvalidArgument(format!("CFL factor {c_cfl} must be positive")));
        }
        let u = self.u();
        let n = u.len();
        let h = PI / n as f64;
        let q = self.spherical.q;
        let mut d_max: f64 = 0.0;
        for j in 0..n {
            let (d1, d2) = derivs4(&u, j, h);
            let (km, kp, v) = axisym_cell(u[j], d1, d2, (j as f64 + 0.5) * h);
            let kq = [km * q, kp * q];
            if !(kq[0] > 0.0 && kq[1] > 0.0) {
                return Err(Error::HoroConvexityLost {
                    cell: j,
                    tau: self.tau(),
                    kappa: km.min(kp),
                });
            }
            let b = self.f.derivatives(&kq)?;
            let s = u[j].sinh();
            let d = self.p * q * (b.grad[0] + b.grad[1]) / (b.value.powf(self.p + 1.0) * v * v * s * s);
            d_max = d_max.max(d);
        }
        Ok(c_cfl * h * h / d_max)
    }

    /// One classical RK4 step of length `dtau`. Returns the smallest `κQ` at
    /// the start of the step. The state is left untouched on error.
    pub fn step(&mut self, dtau: f64) -> Result<RhsEval> {
        if !(dtau > 0.0 && dtau.is_finite()) {
            return Err(Error::InvalidArgument(format!("step {dtau} must be positive")));
        }
        let tau0 = self.tau();
        let (f, p, exec) = (&self.f, self.p, self.exec);
        let eval = |s: &[f64], tau: f64| rescaled_rhs_at(s, self.theta_at(tau), tau, f, p, exec);
        let axpy = |a: f64, k: &[f64]| -> Vec<f64> { self.sigma.iter().zip(k).map(|(s, k)| s + a * k).collect() };
        let k1 = eval(&self.sigma, tau0)?;
        let k2 = eval(&axpy(0.5 * dtau, &k1.rate), tau0 + 0.5 * dtau)?;
        let k3 = eval(&axpy(0.5 * dtau, &k2.rate), tau0 + 0.5 * dtau)?;
        let k4 = eval(&axpy(dtau, &k3.rate), tau0 + dtau)?;
        let next: Vec<f64> = (0..self.sigma.len())
            .map(|j| self.sigma[j] + dtau / 6.0 * (k1.rate[j] + 2.0 * k2.rate[j] + 2.0 * k3.rate[j] + k4.rate[j]))
            .collect();
        if next.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical(format!("non-finite value after step at tau = {tau0}")));
        }
        let theta_old = self.theta();
        let tau1 = tau0 + dtau;
        let theta_new = self.theta_at(tau1);
        let n = self.f.n();
        // t advances by the existence time the reference sphere used up
        self.spherical.t += remaining_time(theta_old, p, n) - remaining_time(theta_new, p, n);
        self.spherical.tau = tau1;
        self.spherical.theta = theta_new;
        self.spherical.q = q_of_theta(theta_new);
        self.sigma = next;
        Ok(k1)
    }

    /// Moves the constant Legendre mode of `σ` into the reference sphere.
    /// The surface itself does not change.
    pub fn rematch_mean(&mut self) -> Result<f64> {
        let a0 = crate::flow::diagnostics::mode_amplitudes(&self.sigma, 0)?[0];
        self.sigma.iter_mut().for_each(|s| *s -= a0);
        self.theta_shift += a0;
        self.spherical.theta = self.theta_at(self.spherical.tau);
        self.spherical.q = q_of_theta(self.spherical.theta);
        Ok(a0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::diagnostics::mode_amplitudes;
    use crate::numerics::{cell_angles, legendre};

    fn sphere_state(theta: f64, n: usize, p: f64) -> FlowState {
        let prof = AxisymProfile::from_fn(n, |_| theta).unwrap();
        FlowState::new(&prof, CurvatureFunction::shifted_mean(2), p, Exec::Sequential).unwrap()
    }

    #[test]
    fn rates() {
        assert_eq!(linearized_rate(2, 1.0, 2.0, 1), 0.0);
        assert!((a_infinity(2, 1.0) - 0.5).abs() < 1e-15);
        assert!((l2_bulk_rate(2, 1.0, 1e3) - 4.0).abs() < 1e-12);
        assert!(linearized_rate(2, 1.0, 1.0, 0) > 0.0);
        assert!((linearized_rate(2, 1.0, 40.0, 2) + 2.0).abs() < 1e-12);
    }

    #[test]
    fn sphere_is_fixed_point() {
        for p in [0.5, 1.0, 2.0] {
            let r = rescaled_rhs_at(
                &[0.0; 64],
                1.3,
                0.0,
                &CurvatureFunction::shifted_mean(2),
                p,
                Exec::Sequential,
            )
            .unwrap();
            let worst = r.rate.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            assert!(worst < 1e-13, "p {p}: {worst:e}");
            assert!((r.min_kappa_q - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn constant_offset_sign() {
        for p in [0.5, 1.0] {
            for c in [-0.01, 0.01] {
                let theta = 4.0;
                let sigma = vec![c; 64];
                let r = rescaled_rhs_at(
                    &sigma,
                    theta,
                    0.0,
                    &CurvatureFunction::shifted_mean(2),
                    p,
                    Exec::Sequential,
                )
                .unwrap();
                // a larger sphere sees smaller curvature and runs ahead
                let ratio = q_of_theta(theta) / q_of_theta(theta + c);
                let want = 2f64.powf(-p) * (ratio.powf(-p) - 1.0);
                assert!(r.rate.iter().all(|x| (x - want).abs() < 1e-12));
                assert_eq!(r.rate[0].signum(), c.signum());
            }
        }
    }

    #[test]
    fn mode_rates_from_linearization() {
        let n = 256;
        let theta = 3.0;
        let eps = 1e-6;
        let f = CurvatureFunction::shifted_mean(2);
        for p in [0.5, 1.0, 1.7] {
            for k in 0..=4 {
                let sigma: Vec<f64> = cell_angles(n).iter().map(|&ph| eps * legendre(k, ph.cos())).collect();
                let r = rescaled_rhs_at(&sigma, theta, 0.0, &f, p, Exec::Sequential).unwrap();
                let got = mode_amplitudes(&r.rate, k).unwrap()[k] / eps;
                let want = linearized_rate(2, p, theta, k);
                let err = if want == 0.0 {
                    got.abs()
                } else {
                    (got / want - 1.0).abs()
                };
                assert!(err < 1e-3, "p {p} k {k}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn sphere_stays_round() {
        let mut s = sphere_state(1.0, 32, 1.0);
        let dt = s.cfl_step(0.2).unwrap();
        for _ in 0..2000 {
            s.step(dt).unwrap();
        }
        let m = s.sigma.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        assert!(m < 1e-12, "{m:e}");
        let bookkeeping = s.theta() - s.theta0 - s.theta_shift - 0.5 * s.tau();
        assert!(bookkeeping.abs() < 1e-12);
        // t tracks the reference sphere exactly
        let exact = crate::flow::spherical::spherical_p1(1.0, 2, s.spherical.t).unwrap();
        assert!((exact.theta - s.theta()).abs() < 1e-9);
    }

    #[test]
    fn rejects_non_horoconvex_start() {
        // a deep dent has negative meridian curvature
        let prof = AxisymProfile::from_fn(64, |ph| 1.0 + 0.4 * legendre(6, ph.cos())).unwrap();
        assert!(FlowState::new(&prof, CurvatureFunction::shifted_mean(2), 1.0, Exec::Sequential).is_err());
    }

    #[test]
    fn rematch_keeps_surface() {
        let prof = AxisymProfile::from_fn(64, |ph| 1.2 + 0.02 * legendre(2, ph.cos()) + 0.01).unwrap();
        let mut s = FlowState::new(&prof, CurvatureFunction::shifted_mean(2), 1.0, Exec::Sequential).unwrap();
        s.sigma.iter_mut().for_each(|x| *x += 0.003);
        let before = s.u();
        let a0 = s.rematch_mean().unwrap();
        assert!((a0 - 0.003).abs() < 1e-12);
        for (a, b) in before.iter().zip(s.u()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn fourth_order_in_time() {
        let run = |dt: f64, steps: usize| {
            let prof = AxisymProfile::from_fn(32, |ph| 1.5 + 0.05 * legendre(2, ph.cos())).unwrap();
            let mut s = FlowState::new(&prof, CurvatureFunction::shifted_mean(2), 1.0, Exec::Sequential).unwrap();
            for _ in 0..steps {
                s.step(dt).unwrap();
            }
            s.sigma
        };
        let dt = 4e-3;
        let a = run(dt, 50);
        let b = run(dt / 2.0, 100);
        let c = run(dt / 4.0, 200);
        let e1 = a.iter().zip(&b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        let e2 = b.iter().zip(&c).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        let ratio = e1 / e2;
        assert!((ratio - 16.0).abs() < 2.0, "ratio {ratio}");
    }
}

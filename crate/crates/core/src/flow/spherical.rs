//! The round solution: a geodesic sphere whose radius obeys
//! `dθ/dt = n^{-p} Q^p` with `Q = (e^{2θ} - 1)/2`, together with the
//! rescaled time `dτ/dt = Q^p` in which the radius grows linearly.

use ode_solvers::{Dopri5, OutputType, System, Vector2};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// `(e^{2θ} - 1)/2` without cancellation for small `θ`.
#[inline]
pub fn q_of_theta(theta: f64) -> f64 {
    0.5 * (2.0 * theta).exp_m1()
}

pub fn theta_of_q(q: f64) -> f64 {
    0.5 * (2.0 * q).ln_1p()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphericalState {
    pub t: f64,
    pub tau: f64,
    pub theta: f64,
    pub q: f64,
}

impl SphericalState {
    pub fn initial(theta0: f64) -> Self {
        Self {
            t: 0.0,
            tau: 0.0,
            theta: theta0,
            q: q_of_theta(theta0),
        }
    }
}

/// Which clock a requested time refers to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Clock {
    Original(f64),
    Rescaled(f64),
}

fn check_args(theta0: f64, p: f64, n: usize) -> Result<()> {
    if !(theta0 > 0.0 && theta0.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "initial radius {theta0} must be positive"
        )));
    }
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::InvalidArgument(format!("power p = {p} must be positive")));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("dimension must be at least 1".into()));
    }
    Ok(())
}

/// Remaining existence time of the sphere of radius `theta0`:
/// `∫_{Q₀}^∞ n^p Q^{-p} (2Q+1)^{-1} dQ`, evaluated after the substitution
/// `y = Q^{-p}` as `(n^p/p) ∫_0^{Q₀^{-p}} dy / (2 + y^{1/p})`.
pub fn maximal_time(theta0: f64, p: f64, n: usize) -> Result<f64> {
    check_args(theta0, p, n)?;
    Ok(remaining_time(theta0, p, n))
}

pub(crate) fn remaining_time(theta0: f64, p: f64, n: usize) -> f64 {
    let upper = q_of_theta(theta0).powf(-p);
    let scale = (n as f64).powf(p) / p;
    let inv_p = 1.0 / p;
    let out = quadrature::double_exponential::integrate(|y| 1.0 / (2.0 + y.powf(inv_p)), 0.0, upper, 1e-16 * upper);
    scale * out.integral
}

/// Closed-form existence time for `p = 1`: `n ln((2Q₀+1)/(2Q₀))`.
pub fn maximal_time_p1(theta0: f64, n: usize) -> f64 {
    let q0 = q_of_theta(theta0);
    n as f64 * (1.0 / (2.0 * q0)).ln_1p()
}

/// Exact `p = 1` solution: `Q/(2Q+1) = Q₀/(2Q₀+1) e^{t/n}`.
pub fn spherical_p1(theta0: f64, n: usize, t: f64) -> Result<SphericalState> {
    check_args(theta0, 1.0, n)?;
    let t_max = maximal_time_p1(theta0, n);
    if t >= t_max {
        return Err(Error::BeyondMaximalTime { t, t_max });
    }
    let q0 = q_of_theta(theta0);
    let r = q0 / (2.0 * q0 + 1.0) * (t / n as f64).exp();
    let q = r / (1.0 - 2.0 * r);
    let theta = theta_of_q(q);
    Ok(SphericalState {
        t,
        tau: (theta - theta0) * n as f64,
        theta,
        q,
    })
}

struct RadiusOde {
    p: f64,
    scale: f64,
}

impl System<f64, Vector2<f64>> for RadiusOde {
    fn system(&self, _t: f64, y: &Vector2<f64>, dy: &mut Vector2<f64>) {
        let qp = q_of_theta(y[0]).powf(self.p);
        dy[0] = self.scale * qp;
        dy[1] = qp;
    }
}

/// State of the round solution started at radius `theta0` after the given
/// time. The original clock is integrated with an adaptive Dormand–Prince
/// scheme; the rescaled clock is exact.
pub fn spherical_solve(theta0: f64, p: f64, n: usize, time: Clock) -> Result<SphericalState> {
    check_args(theta0, p, n)?;
    let nf = n as f64;
    match time {
        Clock::Rescaled(tau) => {
            if !(tau >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "rescaled time {tau} must be nonnegative"
                )));
            }
            let theta = theta0 + nf.powf(-p) * tau;
            let t = remaining_time(theta0, p, n) - remaining_time(theta, p, n);
            Ok(SphericalState {
                t,
                tau,
                theta,
                q: q_of_theta(theta),
            })
        }
        Clock::Original(t) => {
            if !(t >= 0.0) {
                return Err(Error::InvalidArgument(format!("time {t} must be nonnegative")));
            }
            let t_max = remaining_time(theta0, p, n);
            if t >= t_max {
                return Err(Error::BeyondMaximalTime { t, t_max });
            }
            if t == 0.0 {
                return Ok(SphericalState::initial(theta0));
            }
            let ode = RadiusOde { p, scale: nf.powf(-p) };
            // sparse output keeps the step endpoint instead of the lower-order dense interpolant
            let mut solver = Dopri5::from_param(
                ode,
                0.0,
                t,
                t,
                Vector2::new(theta0, 0.0),
                1e-13,
                1e-14,
                0.9,
                0.04,
                0.2,
                10.0,
                t,
                0.0,
                1_000_000,
                1000,
                OutputType::Sparse,
            );
            solver.integrate().map_err(|e| Error::Numerical(format!("{e:?}")))?;
            let y = solver
                .y_out()
                .last()
                .ok_or_else(|| Error::Numerical("integrator produced no output".into()))?;
            Ok(SphericalState {
                t,
                tau: y[1],
                theta: y[0],
                q: q_of_theta(y[0]),
            })
        }
    }
}

/// Samples of the round solution at `samples` equally spaced original times
/// in `[0, horizon]`.
pub fn spherical_trajectory(
    theta0: f64,
    p: f64,
    n: usize,
    horizon: f64,
    samples: usize,
) -> Result<Vec<SphericalState>> {
    let samples = samples.max(2);
    (0..samples)
        .map(|i| spherical_solve(theta0, p, n, Clock::Original(horizon * i as f64 / (samples - 1) as f64)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_q_existence_time() {
        let theta0 = theta_of_q(1.0);
        let want = 2.0 * 1.5f64.ln();
        assert!((maximal_time_p1(theta0, 2) - want).abs() < 1e-15);
        assert!((maximal_time(theta0, 1.0, 2).unwrap() / want - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quadrature_matches_closed_form() {
        for theta0 in [0.05, 0.5, 1.0, 3.0, 8.0] {
            for n in [1, 2, 3] {
                let a = maximal_time(theta0, 1.0, n).unwrap();
                let b = maximal_time_p1(theta0, n);
                assert!((a / b - 1.0).abs() < 1e-12, "{theta0} {n}: {a} {b}");
            }
        }
    }

    #[test]
    fn existence_time_decreases_with_radius() {
        for p in [0.5, 1.0, 2.0] {
            let t: Vec<f64> = [0.5, 1.0, 2.0]
                .iter()
                .map(|&th| maximal_time(th, p, 2).unwrap())
                .collect();
            assert!(t[0] > t[1] && t[1] > t[2]);
        }
    }

    #[test]
    fn existence_time_grows_for_small_radius() {
        for p in [1.0, 1.5, 3.0] {
            let a = maximal_time(0.1, p, 2).unwrap();
            let b = maximal_time(0.01, p, 2).unwrap();
            assert!(b > a && b.is_finite(), "p {p}: {a} {b}");
        }
    }

    #[test]
    fn integrator_matches_closed_form() {
        let theta0 = 1.0;
        let tmax = maximal_time_p1(theta0, 2);
        for frac in [0.1, 0.5, 0.9, 0.99] {
            let t = frac * tmax;
            let a = spherical_solve(theta0, 1.0, 2, Clock::Original(t)).unwrap();
            let b = spherical_p1(theta0, 2, t).unwrap();
            assert!((a.q / b.q - 1.0).abs() < 1e-8, "{frac}: {} {}", a.q, b.q);
            assert!((a.tau / b.tau - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn rescaled_clock_is_linear_in_radius() {
        for p in [0.5, 1.0, 2.0] {
            for tau in [0.0, 0.3, 4.0] {
                let s = spherical_solve(1.2, p, 2, Clock::Rescaled(tau)).unwrap();
                assert!((s.theta - 1.2 - 2f64.powf(-p) * tau).abs() < 1e-12);
                assert!((s.q - q_of_theta(s.theta)).abs() <= 1e-12 * s.q);
            }
        }
    }

    #[test]
    fn clocks_agree() {
        for p in [0.5, 2.0] {
            let s = spherical_solve(0.8, p, 2, Clock::Rescaled(1.5)).unwrap();
            let o = spherical_solve(0.8, p, 2, Clock::Original(s.t)).unwrap();
            assert!((o.theta - s.theta).abs() < 1e-9, "p {p}: {} {}", o.theta, s.theta);
            assert!((o.tau - s.tau).abs() < 1e-8);
        }
    }

    #[test]
    fn beyond_existence_time() {
        let tmax = maximal_time(1.0, 1.0, 2).unwrap();
        assert!(matches!(
            spherical_solve(1.0, 1.0, 2, Clock::Original(tmax * 1.01)),
            Err(Error::BeyondMaximalTime { .. })
        ));
    }

    #[test]
    fn initial_q() {
        let s = spherical_solve(0.7, 1.3, 2, Clock::Original(0.0)).unwrap();
        assert!((s.q / (0.5 * ((1.4f64).exp() - 1.0)) - 1.0).abs() < 1e-15);
    }
}

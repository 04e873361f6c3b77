//! Seeded numerical certification of the structural flags of a catalog entry.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::CurvatureFunction;
use crate::{Error, Result};

const TOL: f64 = 1e-8;
const BOUNDARY_EPS: [f64; 7] = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8];
/// Log-log slope above which a function is judged to vanish on the boundary.
const VANISH_SLOPE: f64 = 0.05;
const BOUNDARY_BASES: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Largest normalised violation seen; nonpositive means no violation.
    pub worst_violation: f64,
    pub witness: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificationReport {
    pub id: String,
    pub checks: Vec<CheckResult>,
}

impl CertificationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Tracks the worst normalised violation of an inequality `lhs >= rhs`.
struct Worst {
    value: f64,
    witness: Option<Vec<f64>>,
}

impl Worst {
    fn new() -> Self {
        Self {
            value: f64::NEG_INFINITY,
            witness: None,
        }
    }

    /// Records `excess = (rhs - lhs)/scale`.
    fn record(&mut self, excess: f64, at: &[f64]) {
        if excess > self.value || self.witness.is_none() {
            self.value = excess;
            self.witness = Some(at.to_vec());
        }
    }

    fn ge(&mut self, lhs: f64, rhs: f64, scale: f64, at: &[f64]) {
        let s = scale.abs().max(lhs.abs()).max(rhs.abs()).max(f64::MIN_POSITIVE);
        self.record((rhs - lhs) / s, at);
    }

    fn into_check(self, name: &str) -> CheckResult {
        self.into_check_tol(name, TOL)
    }

    fn into_check_tol(self, name: &str, tol: f64) -> CheckResult {
        let passed = self.value <= tol;
        self.into_check_with(name, passed)
    }

    fn into_check_with(self, name: &str, passed: bool) -> CheckResult {
        CheckResult {
            name: name.to_string(),
            passed,
            worst_violation: if self.value.is_finite() { self.value } else { 0.0 },
            witness: if passed { None } else { self.witness },
        }
    }
}

fn log_uniform(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let (lo, hi) = (1e-3f64.ln(), 1e3f64.ln());
    (0..n).map(|_| rng.random_range(lo..hi).exp()).collect()
}

/// Least-squares log-log slope of `g(eps, rest)` as `eps -> 0`.
fn boundary_slope(g: impl Fn(&[f64]) -> Result<f64>, base: &[f64]) -> Result<f64> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &eps in &BOUNDARY_EPS {
        let mut k = base.to_vec();
        k[0] = eps;
        let v = g(&k)?;
        if !(v > 0.0) {
            return Ok(f64::INFINITY);
        }
        xs.push(eps.ln());
        ys.push(v.ln());
    }
    Ok(crate::numerics::fit_line(&xs, &ys)?.slope)
}

/// Samples the open cone log-uniformly in `[1e-3, 1e3]` and checks every
/// structural property implied by the entry's flags. Failures are reported in
/// the returned structure rather than as errors.
pub fn certify_structure(f: &CurvatureFunction, sample_count: usize, seed: u64) -> Result<CertificationReport> {
    if sample_count == 0 {
        return Err(Error::InvalidArgument("sample_count must be at least 1".into()));
    }
    let n = f.n();
    let flags = f.flags();
    let f_one = f.eval(&vec![1.0; n])?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut symmetry = Worst::new();
    let mut homogeneity = Worst::new();
    let mut monotone = Worst::new();
    let mut euler = Worst::new();
    let mut hess_max = Worst::new();
    let mut lemma_pairs = Worst::new();
    let mut sum_grad = Worst::new();
    let mut mean_bound = Worst::new();
    let mut inv_quadratic = Worst::new();
    let mut inv_pairs = Worst::new();
    let mut inv_square = Worst::new();
    let mut inv_weighted_pairs = Worst::new();

    for _ in 0..sample_count {
        let k = log_uniform(&mut rng, n);
        let d = f.derivatives(&k)?;
        let fv = d.value;

        let mut rev = k.clone();
        rev.rotate_left(1);
        let fr = f.eval(&rev)?;
        symmetry.record((fr - fv).abs() / fv, &k);

        for s in [1e-3, 1e3] {
            let ks: Vec<f64> = k.iter().map(|x| x * s).collect();
            let fs = f.eval(&ks)?;
            homogeneity.record((fs - s * fv).abs() / (s * fv), &k);
        }

        let gscale: f64 = d.grad.iter().map(|g| g.abs()).fold(0.0, f64::max);
        for g in &d.grad {
            monotone.record(-g / gscale.max(f64::MIN_POSITIVE), &k);
        }

        let e: f64 = d.grad.iter().zip(&k).map(|(g, x)| g * x).sum();
        euler.record((e - fv).abs() / fv, &k);

        let kmin = k.iter().cloned().fold(f64::INFINITY, f64::min);
        let hscale = d.hess.abs().max() + gscale / kmin;
        let top = d.hess.clone().symmetric_eigen().eigenvalues.max();
        hess_max.record(top / hscale, &k);

        if flags.concave {
            for i in 0..n {
                for j in 0..i {
                    let prod = (d.grad[i] - d.grad[j]) * (k[i] - k[j]);
                    let scale = (d.grad[i].abs() + d.grad[j].abs()) * (k[i].abs() + k[j].abs());
                    lemma_pairs.ge(0.0, prod, scale, &k);
                }
            }
            let sg: f64 = d.grad.iter().sum();
            sum_grad.ge(sg, f_one, f_one, &k);
            let sk: f64 = k.iter().sum();
            mean_bound.ge(f_one / n as f64 * sk, fv, fv, &k);
        }

        if flags.inverse_concave {
            let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let yv = nalgebra::DVector::from_vec(y.clone());
            let quad = (yv.transpose() * &d.hess * &yv)[(0, 0)];
            let diag: f64 = (0..n).map(|i| 2.0 * d.grad[i] / k[i] * y[i] * y[i]).sum();
            let lin: f64 = (0..n).map(|i| d.grad[i] * y[i]).sum();
            let rhs = 2.0 / fv * lin * lin;
            let scale = quad.abs() + diag.abs() + rhs.abs();
            inv_quadratic.ge(quad + diag, rhs, scale, &k);

            for i in 0..n {
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    let q = CurvatureFunction::gradient_quotient(&d, i, j);
                    let a = d.grad[i] / k[j];
                    let b = d.grad[j] / k[i];
                    inv_pairs.ge(q + a + b, 0.0, q.abs() + a.abs() + b.abs(), &k);

                    let w = (d.grad[i] * k[i] * k[i] - d.grad[j] * k[j] * k[j]) * (k[i] - k[j]);
                    let ws = (d.grad[i] * k[i] * k[i] + d.grad[j] * k[j] * k[j]) * (k[i] - k[j]).abs();
                    inv_weighted_pairs.ge(w, 0.0, ws, &k);
                }
            }
            let s2: f64 = (0..n).map(|i| d.grad[i] * k[i] * k[i]).sum();
            inv_square.ge(s2, fv * fv / f_one, s2, &k);
        }
    }

    let mut checks = vec![
        symmetry.into_check_tol("symmetry", 1e-13),
        homogeneity.into_check_tol("homogeneity", 1e-12),
        monotone.into_check_tol("monotone", -f64::MIN_POSITIVE),
        euler.into_check_tol("euler_identity", 1e-10),
    ];
    // Hessian NSD everywhere iff the entry is flagged concave.
    let nsd = hess_max.value <= TOL;
    checks.push(hess_max.into_check_with("hessian_nsd_iff_concave", nsd == flags.concave));
    if flags.concave {
        checks.push(lemma_pairs.into_check("gradient_ordering"));
        checks.push(sum_grad.into_check("sum_gradient_lower_bound"));
        checks.push(mean_bound.into_check("mean_upper_bound"));
    }
    if flags.inverse_concave {
        checks.push(inv_quadratic.into_check("inverse_concave_quadratic"));
        checks.push(inv_pairs.into_check("inverse_concave_pairs"));
        checks.push(inv_square.into_check("inverse_concave_square_sum"));
        checks.push(inv_weighted_pairs.into_check("inverse_concave_weighted_ordering"));
    }

    let fstar = f.dual();
    let mut f_slope = Worst::new();
    let mut fstar_slope = Worst::new();
    let mut f_all_vanish = true;
    let mut fstar_all_vanish = true;
    for _ in 0..BOUNDARY_BASES {
        let base = log_uniform(&mut rng, n);
        let s = boundary_slope(|k| f.eval(k), &base)?;
        let ss = boundary_slope(|k| fstar.eval(k), &base)?;
        f_all_vanish &= s > VANISH_SLOPE;
        fstar_all_vanish &= ss > VANISH_SLOPE;
        // report the slope farthest on the wrong side of the threshold
        let fx = if flags.f_vanishes_on_boundary {
            VANISH_SLOPE - s
        } else {
            s - VANISH_SLOPE
        };
        f_slope.record(fx, &base);
        let sx = if flags.fstar_vanishes_on_boundary {
            VANISH_SLOPE - ss
        } else {
            ss - VANISH_SLOPE
        };
        fstar_slope.record(sx, &base);
    }
    checks.push(f_slope.into_check_with("f_vanishes_on_boundary", f_all_vanish == flags.f_vanishes_on_boundary));
    checks.push(fstar_slope.into_check_with(
        "fstar_vanishes_on_boundary",
        fstar_all_vanish == flags.fstar_vanishes_on_boundary,
    ));

    Ok(CertificationReport { id: f.id(), checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shifted_mean_certifies() {
        let r = certify_structure(&CurvatureFunction::shifted_mean(2), 200, 1).unwrap();
        assert!(r.all_passed(), "{r:?}");
        assert!(r.check("gradient_ordering").is_some());
    }

    #[test]
    fn whole_catalog_and_duals_certify() {
        for n in [2, 3, 4] {
            for f in CurvatureFunction::catalog(n) {
                for g in [f.clone(), f.dual()] {
                    let r = certify_structure(&g, 1000, 42).unwrap();
                    let bad: Vec<_> = r.checks.iter().filter(|c| !c.passed).collect();
                    assert!(bad.is_empty(), "n={n} {}: {bad:?}", g.id());
                }
            }
        }
    }

    #[test]
    fn h2_is_flagged_non_concave_and_detected() {
        let f = CurvatureFunction::power_mean(2, 2.0).unwrap();
        let r = certify_structure(&f, 200, 2).unwrap();
        assert!(r.all_passed(), "{r:?}");
        assert!(r.check("hessian_nsd_iff_concave").unwrap().worst_violation > TOL);
    }

    #[test]
    fn wrong_flag_is_reported_with_witness() {
        let mut f = CurvatureFunction::power_mean(2, 2.0).unwrap();
        f.flags.concave = true;
        let r = certify_structure(&f, 200, 3).unwrap();
        assert!(!r.all_passed());
        let failed: Vec<_> = r.checks.iter().filter(|c| !c.passed).collect();
        assert!(failed.iter().all(|c| c.witness.is_some()));
    }

    #[test]
    fn wrong_boundary_flag_is_reported() {
        let mut f = CurvatureFunction::shifted_mean(2);
        f.flags.f_vanishes_on_boundary = true;
        let r = certify_structure(&f, 10, 4).unwrap();
        assert!(!r.check("f_vanishes_on_boundary").unwrap().passed);
    }

    #[test]
    fn report_serializes() {
        let r = certify_structure(&CurvatureFunction::shifted_mean(2), 5, 1).unwrap();
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        assert_eq!(v["id"], "shifted-mean");
        assert!(v["checks"][0]["name"].is_string());
        assert!(v["checks"][0]["passed"].is_boolean());
    }
}

//! Symmetric, 1-homogeneous curvature functions of the shifted principal
//! curvatures, normalised so that `f(1, ..., 1) = n`.
//!
//! Entries are addressed by string ids:
//!
//! | id | function |
//! |----|----------|
//! | `shifted-mean` | `sum k_i` |
//! | `ek-root:k=K` | `n E_K^{1/K}` |
//! | `gauss-root` | `n E_n^{1/n}` |
//! | `power-mean:r=R` | `n^{1-1/R} (sum k_i^R)^{1/R}` |
//! | `harmonic-mean` | `power-mean:r=-1` |
//! | `quotient` | `n E_2/E_1` (n >= 3) |
//! | `dual:<id>` | `1/f(1/k)` without renormalisation |

mod certify;

pub use certify::{certify_structure, CertificationReport, CheckResult};

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Absolute gap below which two curvatures are treated as equal when forming
/// difference quotients of the gradient.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// A vector of shifted principal curvatures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvaturePoint {
    pub kappa: Vec<f64>,
}

impl CurvaturePoint {
    pub fn new(kappa: Vec<f64>) -> Result<Self> {
        if kappa.len() < 2 {
            return Err(Error::InvalidArgument("need at least two curvatures".into()));
        }
        Ok(Self { kappa })
    }

    pub fn dim(&self) -> usize {
        self.kappa.len()
    }

    /// All entries strictly positive.
    pub fn in_positive_cone(&self) -> bool {
        self.kappa.iter().all(|&k| k > 0.0)
    }

    /// All entries nonnegative.
    pub fn in_closed_cone(&self) -> bool {
        self.kappa.iter().all(|&k| k >= 0.0)
    }

    /// Unshifted principal curvatures `lambda_i = kappa_i + 1`.
    pub fn lambda(&self) -> Vec<f64> {
        self.kappa.iter().map(|k| k + 1.0).collect()
    }
}

/// Structural properties asserted for a catalog entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flags {
    pub concave: bool,
    pub inverse_concave: bool,
    pub f_vanishes_on_boundary: bool,
    pub fstar_vanishes_on_boundary: bool,
}

impl Flags {
    fn swapped(self) -> Self {
        Self {
            concave: self.inverse_concave,
            inverse_concave: self.concave,
            f_vanishes_on_boundary: self.fstar_vanishes_on_boundary,
            fstar_vanishes_on_boundary: self.f_vanishes_on_boundary,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    ShiftedMean,
    EkRoot { k: usize },
    PowerMean { r: f64 },
    Quotient,
    Dual(Box<CurvatureFunction>),
}

/// A catalog curvature function in a fixed dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureFunction {
    kind: Kind,
    n: usize,
    c: f64,
    flags: Flags,
}

/// Value, gradient and Hessian of `f` at a point.
#[derive(Debug, Clone)]
pub struct DerivativeBundle {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess: DMatrix<f64>,
    pub at: Vec<f64>,
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Elementary symmetric polynomials `sigma_0 ..= sigma_k` of `x`.
fn elementary(x: &[f64], k: usize, out: &mut [f64]) {
    out[..=k].iter_mut().for_each(|v| *v = 0.0);
    out[0] = 1.0;
    for &xi in x {
        for j in (1..=k).rev() {
            out[j] += xi * out[j - 1];
        }
    }
}

fn sigma(x: &[f64], k: usize) -> f64 {
    let mut buf = [0.0; 17];
    if k < buf.len() {
        elementary(x, k, &mut buf);
        buf[k]
    } else {
        let mut v = vec![0.0; k + 1];
        elementary(x, k, &mut v);
        v[k]
    }
}

fn sigma_without(x: &[f64], skip: &[usize], k: usize) -> f64 {
    let rest: Vec<f64> = x
        .iter()
        .enumerate()
        .filter(|(i, _)| !skip.contains(i))
        .map(|(_, &v)| v)
        .collect();
    sigma(&rest, k)
}

impl CurvatureFunction {
    /// Parses a catalog id for dimension `n`.
    pub fn from_id(id: &str, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!("dimension {n} < 2")));
        }
        let id = id.trim();
        if let Some(inner) = id.strip_prefix("dual:") {
            return Ok(Self::from_id(inner, n)?.dual());
        }
        let (name, param) = match id.split_once(':') {
            Some((a, b)) => (a, Some(b)),
            None => (id, None),
        };
        let value = |key: &str| -> Result<f64> {
            let p = param.ok_or_else(|| Error::UnknownFunction(format!("{id}: missing {key}=")))?;
            let v = p
                .strip_prefix(key)
                .and_then(|s| s.strip_prefix('='))
                .ok_or_else(|| Error::UnknownFunction(format!("{id}: expected {key}=<value>")))?;
            v.parse::<f64>()
                .map_err(|_| Error::UnknownFunction(format!("{id}: bad number {v}")))
        };
        match name {
            "shifted-mean" if param.is_none() => Ok(Self::shifted_mean(n)),
            "gauss-root" if param.is_none() => Self::ek_root(n, n),
            "harmonic-mean" if param.is_none() => Self::power_mean(n, -1.0),
            "quotient" if param.is_none() => Self::quotient(n),
            "ek-root" => {
                let k = value("k")?;
                if k.fract() != 0.0 || k < 1.0 {
                    return Err(Error::UnknownFunction(format!("{id}: k must be a positive integer")));
                }
                Self::ek_root(n, k as usize)
            }
            "power-mean" => Self::power_mean(n, value("r")?),
            _ => Err(Error::UnknownFunction(id.to_string())),
        }
    }

    pub fn shifted_mean(n: usize) -> Self {
        Self {
            kind: Kind::ShiftedMean,
            n,
            c: 1.0,
            flags: Flags {
                concave: true,
                inverse_concave: true,
                f_vanishes_on_boundary: false,
                fstar_vanishes_on_boundary: true,
            },
        }
    }

    pub fn ek_root(n: usize, k: usize) -> Result<Self> {
        if k == 0 || k > n {
            return Err(Error::InvalidArgument(format!(
                "ek-root needs 1 <= k <= n, got k={k}, n={n}"
            )));
        }
        Ok(Self {
            kind: Kind::EkRoot { k },
            n,
            c: n as f64,
            flags: Flags {
                concave: true,
                inverse_concave: true,
                f_vanishes_on_boundary: k == n,
                fstar_vanishes_on_boundary: true,
            },
        })
    }

    pub fn power_mean(n: usize, r: f64) -> Result<Self> {
        if r == 0.0 || !r.is_finite() {
            return Err(Error::InvalidArgument(format!("power mean exponent {r} not supported")));
        }
        let nf = n as f64;
        Ok(Self {
            kind: Kind::PowerMean { r },
            n,
            c: nf.powf(1.0 - 1.0 / r),
            flags: Flags {
                concave: r <= 1.0,
                inverse_concave: r >= -1.0,
                f_vanishes_on_boundary: r < 0.0,
                fstar_vanishes_on_boundary: r > 0.0,
            },
        })
    }

    pub fn quotient(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidArgument("quotient E2/E1 needs n >= 3".into()));
        }
        Ok(Self {
            kind: Kind::Quotient,
            n,
            c: n as f64,
            flags: Flags {
                concave: true,
                inverse_concave: true,
                f_vanishes_on_boundary: false,
                fstar_vanishes_on_boundary: false,
            },
        })
    }

    /// The minimum catalog in dimension `n`.
    pub fn catalog(n: usize) -> Vec<Self> {
        let mut out = vec![Self::shifted_mean(n)];
        for k in 1..=n {
            out.push(Self::ek_root(n, k).expect("valid k"));
        }
        for r in [-1.0, 0.5, 2.0] {
            out.push(Self::power_mean(n, r).expect("valid r"));
        }
        if n >= 3 {
            out.push(Self::quotient(n).expect("n >= 3"));
        }
        out
    }

    /// `f_*(k) = 1 / f(1/k)`.
    pub fn dual(&self) -> Self {
        Self {
            kind: Kind::Dual(Box::new(self.clone())),
            n: self.n,
            c: 1.0,
            flags: self.flags.swapped(),
        }
    }

    pub fn id(&self) -> String {
        self.to_string()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn flags(&self) -> Flags {
        self.flags
    }

    /// Multiplicative constant applied to the raw expression.
    pub fn normalization(&self) -> f64 {
        self.c
    }

    fn check_dim(&self, kappa: &[f64]) -> Result<()> {
        if kappa.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: kappa.len(),
            });
        }
        Ok(())
    }

    /// `f(kappa)` on the closed positive cone.
    pub fn eval(&self, kappa: &[f64]) -> Result<f64> {
        self.check_dim(kappa)?;
        if let Some(bad) = kappa.iter().find(|k| !(**k >= 0.0)) {
            return Err(Error::OutsideDomain {
                id: self.id(),
                reason: format!("entry {bad} outside the closed positive cone"),
            });
        }
        let has_zero = kappa.contains(&0.0);
        match &self.kind {
            Kind::ShiftedMean => Ok(kappa.iter().sum()),
            Kind::EkRoot { k } => {
                let e = sigma(kappa, *k) / binomial(self.n, *k);
                Ok(self.c * e.powf(1.0 / *k as f64))
            }
            Kind::PowerMean { r } => {
                if *r < 0.0 && has_zero {
                    return Err(Error::OutsideDomain {
                        id: self.id(),
                        reason: "negative power at a zero entry".into(),
                    });
                }
                let s: f64 = kappa.iter().map(|k| k.powf(*r)).sum();
                Ok(self.c * s.powf(1.0 / r))
            }
            Kind::Quotient => {
                let s1: f64 = kappa.iter().sum();
                if s1 == 0.0 {
                    return Err(Error::OutsideDomain {
                        id: self.id(),
                        reason: "E1 vanishes".into(),
                    });
                }
                let s2 = sigma(kappa, 2);
                Ok(self.c * 2.0 / (self.n as f64 - 1.0) * s2 / s1)
            }
            Kind::Dual(inner) => {
                if has_zero {
                    return Err(Error::OutsideDomain {
                        id: self.id(),
                        reason: "dual needs strictly positive entries".into(),
                    });
                }
                let inv: Vec<f64> = kappa.iter().map(|k| 1.0 / k).collect();
                Ok(1.0 / inner.eval(&inv)?)
            }
        }
    }

    /// Value, gradient and Hessian at a point of the open cone.
    pub fn derivatives(&self, kappa: &[f64]) -> Result<DerivativeBundle> {
        self.check_dim(kappa)?;
        if kappa.iter().any(|&k| !(k > 0.0)) {
            return Err(Error::OutsideDomain {
                id: self.id(),
                reason: "derivatives need a point of the open positive cone".into(),
            });
        }
        let n = self.n;
        let nf = n as f64;
        let value = self.eval(kappa)?;
        let mut grad = vec![0.0; n];
        let mut hess = DMatrix::zeros(n, n);
        match &self.kind {
            Kind::ShiftedMean => grad.iter_mut().for_each(|g| *g = 1.0),
            Kind::EkRoot { k } => {
                let k = *k;
                let kf = k as f64;
                let g = sigma(kappa, k);
                let dg: Vec<f64> = (0..n).map(|i| sigma_without(kappa, &[i], k - 1)).collect();
                for i in 0..n {
                    grad[i] = value / (kf * g) * dg[i];
                }
                for i in 0..n {
                    for j in 0..n {
                        let d2g = if i != j && k >= 2 {
                            sigma_without(kappa, &[i, j], k - 2)
                        } else {
                            0.0
                        };
                        hess[(i, j)] = value / kf * ((1.0 / kf - 1.0) * dg[i] * dg[j] / (g * g) + d2g / g);
                    }
                }
            }
            Kind::PowerMean { r } => {
                let r = *r;
                let s: f64 = kappa.iter().map(|k| k.powf(r)).sum();
                let c = self.c;
                for i in 0..n {
                    grad[i] = c * s.powf(1.0 / r - 1.0) * kappa[i].powf(r - 1.0);
                }
                for i in 0..n {
                    for j in 0..n {
                        let mut h =
                            c * (1.0 - r) * s.powf(1.0 / r - 2.0) * kappa[i].powf(r - 1.0) * kappa[j].powf(r - 1.0);
                        if i == j {
                            h += c * (r - 1.0) * s.powf(1.0 / r - 1.0) * kappa[i].powf(r - 2.0);
                        }
                        hess[(i, j)] = h;
                    }
                }
            }
            Kind::Quotient => {
                let k = self.c * 2.0 / (nf - 1.0);
                let s1: f64 = kappa.iter().sum();
                let s2 = sigma(kappa, 2);
                for i in 0..n {
                    grad[i] = k * ((s1 - kappa[i]) / s1 - s2 / (s1 * s1));
                }
                for i in 0..n {
                    for j in 0..n {
                        let off = if i == j { 0.0 } else { 1.0 };
                        hess[(i, j)] = k
                            * (off / s1 - (s1 - kappa[i]) / (s1 * s1) - (s1 - kappa[j]) / (s1 * s1)
                                + 2.0 * s2 / (s1 * s1 * s1));
                    }
                }
            }
            Kind::Dual(inner) => {
                let y: Vec<f64> = kappa.iter().map(|k| 1.0 / k).collect();
                let b = inner.derivatives(&y)?;
                let f = b.value;
                let a: Vec<f64> = (0..n).map(|i| b.grad[i] * y[i] * y[i]).collect();
                for i in 0..n {
                    grad[i] = a[i] / (f * f);
                }
                for i in 0..n {
                    for j in 0..n {
                        let mut h =
                            2.0 * a[i] * a[j] / (f * f * f) - b.hess[(i, j)] * y[i] * y[i] * y[j] * y[j] / (f * f);
                        if i == j {
                            h -= 2.0 * b.grad[i] * y[i].powi(3) / (f * f);
                        }
                        hess[(i, j)] = h;
                    }
                }
            }
        }
        Ok(DerivativeBundle {
            value,
            grad,
            hess,
            at: kappa.to_vec(),
        })
    }

    /// `(fdot_i - fdot_k)/(kappa_i - kappa_k)`, replaced by its limit
    /// `(fddot_ii + fddot_kk)/2 - fddot_ik` near ties.
    pub fn gradient_quotient(bundle: &DerivativeBundle, i: usize, k: usize) -> f64 {
        let dk = bundle.at[i] - bundle.at[k];
        if dk.abs() < TIE_TOLERANCE {
            0.5 * (bundle.hess[(i, i)] + bundle.hess[(k, k)]) - bundle.hess[(i, k)]
        } else {
            (bundle.grad[i] - bundle.grad[k]) / dk
        }
    }

    /// Second derivative of `F(A) = f(eig A)` at `A = diag(kappa)` in the
    /// symmetric direction `b`.
    pub fn matrix_second_derivative(&self, kappa: &[f64], b: &DMatrix<f64>) -> Result<f64> {
        let n = self.n;
        if b.nrows() != n || b.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: b.nrows(),
            });
        }
        let asym = (b - b.transpose()).abs().max();
        if asym > 1e-12 * b.abs().max().max(1.0) {
            return Err(Error::NotSymmetric(asym));
        }
        let d = self.derivatives(kappa)?;
        let mut total = 0.0;
        for i in 0..n {
            for k in 0..n {
                total += d.hess[(i, k)] * b[(i, i)] * b[(k, k)];
            }
        }
        for i in 0..n {
            for k in 0..i {
                total += 2.0 * Self::gradient_quotient(&d, i, k) * b[(i, k)].powi(2);
            }
        }
        Ok(total)
    }
}

impl fmt::Display for CurvatureFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            Kind::ShiftedMean => write!(f, "shifted-mean"),
            Kind::EkRoot { k } if *k == self.n => write!(f, "gauss-root"),
            Kind::EkRoot { k } => write!(f, "ek-root:k={k}"),
            Kind::PowerMean { r } => write!(f, "power-mean:r={r}"),
            Kind::Quotient => write!(f, "quotient"),
            Kind::Dual(inner) => write!(f, "dual:{inner}"),
        }
    }
}

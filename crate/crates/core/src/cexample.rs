//! A horo-convex quartic graph patch in the upper half-space model whose
//! shifted second fundamental form entry `ĥ₁₁` starts to decrease under the
//! shifted inverse mean curvature flow once `p` is large enough.
//!
//! Everything here is evaluated at `t = 0`; no time stepping happens.

use nalgebra::{DMatrix, DVector, Matrix2};
use serde::{Deserialize, Serialize};

use crate::graphcurv::ShiftBundle;
use crate::{Error, Result};

/// Largest patch radius for which the local quadratic expansion is trusted.
pub const MAX_PATCH_RADIUS: f64 = 0.1;

/// Free parameters of the quartic graph. `c1` and `c2` are derived.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuarticParams {
    pub a2: f64,
    pub b2: f64,
    pub c3: f64,
}

impl QuarticParams {
    pub fn new(a2: f64, b2: f64, c3: f64) -> Result<Self> {
        for (name, x) in [("a2", a2), ("b2", b2), ("c3", c3)] {
            if !(x > 0.0 && x.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} = {x} must be positive")));
            }
        }
        Ok(Self { a2, b2, c3 })
    }

    pub fn c1(&self) -> f64 {
        0.25
    }

    pub fn c2(&self) -> f64 {
        2.0 * self.b2 * self.b2 / self.a2 + 0.25
    }

    /// Whether `c3 > 4 a2²`, the sufficient condition for local horo-convexity.
    pub fn in_window(&self) -> bool {
        self.c3 > 4.0 * self.a2 * self.a2
    }

    /// Exponent above which `ĥ₁₁` decreases at the origin.
    pub fn critical_p(&self) -> f64 {
        1.0 + self.a2 / (2.0 * self.b2 * self.b2)
    }

    fn monomials(&self) -> [(f64, u32, u32); 5] {
        [
            (self.c1() / 24.0, 4, 0),
            (0.5 * self.a2, 0, 2),
            (0.5 * self.b2, 1, 2),
            (0.25 * self.c2(), 2, 2),
            (self.c3, 0, 0),
        ]
    }
}

/// All partial derivatives of `ŭ` up to some order at one point.
#[derive(Debug, Clone)]
pub struct PolyJet {
    order: usize,
    // d[a][b] = ∂₁^a ∂₂^b ŭ
    d: Vec<Vec<f64>>,
}

impl PolyJet {
    pub fn order(&self) -> usize {
        self.order
    }

    /// Derivative with respect to `x₁` `a` times and `x₂` `b` times.
    pub fn partial(&self, a: usize, b: usize) -> f64 {
        assert!(
            a + b <= self.order,
            "derivative order {} beyond jet order {}",
            a + b,
            self.order
        );
        self.d[a][b]
    }

    /// Derivative along a list of zero-based coordinate indices, e.g. `[1, 1, 0]`
    /// for `ŭ,₂₂₁`.
    pub fn at(&self, idx: &[usize]) -> f64 {
        let b = idx.iter().filter(|&&i| i == 1).count();
        self.partial(idx.len() - b, b)
    }

    pub fn value(&self) -> f64 {
        self.d[0][0]
    }

    pub fn grad(&self) -> [f64; 2] {
        [self.partial(1, 0), self.partial(0, 1)]
    }

    pub fn hess(&self) -> Matrix2<f64> {
        let m = self.partial(1, 1);
        Matrix2::new(self.partial(2, 0), m, m, self.partial(0, 2))
    }
}

fn falling(e: u32, k: usize) -> f64 {
    (0..k as u32).map(|i| e as f64 - i as f64).product()
}

/// Value and analytic partial derivatives of the quartic up to `order` (at most 4;
/// higher derivatives vanish but are still reported).
pub fn u_breve(params: &QuarticParams, x1: f64, x2: f64, order: usize) -> PolyJet {
    let mut d = vec![vec![0.0; order + 1]; order + 1];
    for a in 0..=order {
        for b in 0..=order - a {
            d[a][b] = params
                .monomials()
                .iter()
                .filter(|&&(_, e1, e2)| a as u32 <= e1 && b as u32 <= e2)
                .map(|&(c, e1, e2)| {
                    c * falling(e1, a)
                        * falling(e2, b)
                        * x1.powi((e1 - a as u32) as i32)
                        * x2.powi((e2 - b as u32) as i32)
                })
                .sum();
        }
    }
    PolyJet { order, d }
}

fn metric(j: &PolyJet) -> Matrix2<f64> {
    let [p, q] = j.grad();
    let u2 = j.value() * j.value();
    Matrix2::new(1.0 + p * p, p * q, p * q, 1.0 + q * q) / u2
}

/// Covariant second fundamental form in the hyperbolic metric.
fn second_form(j: &PolyJet) -> Matrix2<f64> {
    let [p, q] = j.grad();
    let u = j.value();
    let v = (1.0 + p * p + q * q).sqrt();
    j.hess() / (v * u) + Matrix2::new(1.0 + p * p, p * q, p * q, 1.0 + q * q) / (v * u * u)
}

fn sorted_eigenvalues(m: &Matrix2<f64>) -> [f64; 2] {
    // similar to a symmetric matrix, so the spectrum is real
    let tr = m.trace();
    let disc = (0.25 * (m[(0, 0)] - m[(1, 1)]).powi(2) + m[(0, 1)] * m[(1, 0)])
        .max(0.0)
        .sqrt();
    [0.5 * tr - disc, 0.5 * tr + disc]
}

/// Induced metric, shifted Weingarten map `hᵢʲ - δ` and shifted principal
/// curvatures of the graph at `(x₁, x₂)`.
pub fn halfspace_shift_weingarten(params: &QuarticParams, x1: f64, x2: f64) -> ShiftBundle {
    let j = u_breve(params, x1, x2, 2);
    let [p, q] = j.grad();
    let v = (1.0 + p * p + q * q).sqrt();
    let g = metric(&j);
    let g_inv = g.try_inverse().expect("conformal metric is invertible");
    let w = second_form(&j) * g_inv - Matrix2::identity();
    let kappa = sorted_eigenvalues(&w).to_vec();
    ShiftBundle {
        v,
        g: DMatrix::from_iterator(2, 2, g.iter().copied()),
        w_shift: DMatrix::from_iterator(2, 2, w.iter().copied()),
        kappa,
    }
}

/// Covariant shifted second fundamental form `h_ij - g_ij`.
pub fn halfspace_hhat(params: &QuarticParams, x1: f64, x2: f64) -> Matrix2<f64> {
    let j = u_breve(params, x1, x2, 2);
    second_form(&j) - metric(&j)
}

/// Christoffel symbols `Γ[k][i][j]` of the induced metric, from the analytic
/// metric derivatives.
pub fn christoffel(params: &QuarticParams, x1: f64, x2: f64) -> [[[f64; 2]; 2]; 2] {
    let j = u_breve(params, x1, x2, 2);
    let u = j.value();
    let du = j.grad();
    let h = j.hess();
    let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    // dg[m][i][j] = ∂_m g_ij
    let mut dg = [[[0.0; 2]; 2]; 2];
    for m in 0..2 {
        for a in 0..2 {
            for b in 0..2 {
                dg[m][a][b] = (h[(a, m)] * du[b] + du[a] * h[(b, m)]) / (u * u)
                    - 2.0 * du[m] * (du[a] * du[b] + delta(a, b)) / (u * u * u);
            }
        }
    }
    let g_inv = metric(&j).try_inverse().expect("conformal metric is invertible");
    let mut gamma = [[[0.0; 2]; 2]; 2];
    for k in 0..2 {
        for a in 0..2 {
            for b in 0..2 {
                gamma[k][a][b] = (0..2)
                    .map(|l| 0.5 * g_inv[(k, l)] * (dg[a][b][l] + dg[b][a][l] - dg[l][a][b]))
                    .sum();
            }
        }
    }
    gamma
}

/// `∂_m Γ^k_ij` at the origin in closed form, indexed `[m][k][i][j]`.
pub fn christoffel_derivative_at_origin(params: &QuarticParams) -> [[[[f64; 2]; 2]; 2]; 2] {
    let j = u_breve(params, 0.0, 0.0, 2);
    let c3 = params.c3;
    let u2 = |a: usize, b: usize| j.at(&[a, b]);
    let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    let mut out = [[[[0.0; 2]; 2]; 2]; 2];
    for m in 0..2 {
        for k in 0..2 {
            for a in 0..2 {
                for b in 0..2 {
                    out[m][k][a][b] = u2(k, m) * u2(a, b)
                        - (delta(k, b) * u2(a, m) + delta(a, k) * u2(b, m) - delta(a, b) * u2(k, m)) / c3;
                }
            }
        }
    }
    out
}

/// Geometric data at the origin needed by the evolution equation.
#[derive(Debug, Clone, PartialEq)]
pub struct OriginJet {
    /// `ĥ_ij`.
    pub hhat: [[f64; 2]; 2],
    /// `g^{ij}`.
    pub g_inv: [[f64; 2]; 2],
    /// `∇_k h_ij`, indexed `[k][i][j]`.
    pub dh: [[[f64; 2]; 2]; 2],
    /// `∇_l ∇_k h_ij`, indexed `[l][k][i][j]`.
    pub ddh: [[[[f64; 2]; 2]; 2]; 2],
}

/// Closed-form covariant derivatives at the origin.
pub fn origin_jet(params: &QuarticParams) -> OriginJet {
    let j = u_breve(params, 0.0, 0.0, 4);
    let c3 = params.c3;
    let u = |idx: &[usize]| j.at(idx);
    let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    let mut hhat = [[0.0; 2]; 2];
    let mut g_inv = [[0.0; 2]; 2];
    let mut dh = [[[0.0; 2]; 2]; 2];
    let mut ddh = [[[[0.0; 2]; 2]; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            hhat[a][b] = u(&[a, b]) / c3;
            g_inv[a][b] = c3 * c3 * delta(a, b);
            for k in 0..2 {
                dh[k][a][b] = u(&[a, b, k]) / c3;
            }
        }
    }
    let sum = |f: &dyn Fn(usize) -> f64| f(0) + f(1);
    for l in 0..2 {
        for k in 0..2 {
            for i in 0..2 {
                for jj in 0..2 {
                    let cubic = u(&[i, jj, k, l])
                        - sum(&|m| u(&[k, i]) * u(&[jj, m]) * u(&[m, l]))
                        - sum(&|m| u(&[k, jj]) * u(&[i, m]) * u(&[m, l]))
                        - sum(&|m| u(&[i, jj]) * u(&[k, m]) * u(&[m, l]));
                    let contracted = sum(&|m| u(&[m, k]) * u(&[m, l])) * delta(i, jj)
                        + sum(&|m| u(&[l, m]) * u(&[m, jj])) * delta(i, k)
                        + sum(&|m| u(&[l, m]) * u(&[i, m])) * delta(jj, k);
                    let products = u(&[k, l]) * u(&[i, jj]) + u(&[k, jj]) * u(&[i, l]) + u(&[l, jj]) * u(&[i, k]);
                    ddh[l][k][i][jj] = cubic / c3 - contracted / (c3 * c3) + products / (c3 * c3);
                }
            }
        }
    }
    OriginJet { hhat, g_inv, dh, ddh }
}

fn five_point(f: &dyn Fn(f64) -> f64, h: f64) -> f64 {
    (f(-2.0 * h) - 8.0 * f(-h) + 8.0 * f(h) - f(2.0 * h)) / (12.0 * h)
}

/// `∇_k h_ij` at `(x₁, x₂)` with five-point partials and analytic Christoffel symbols.
fn covariant_dh_fd(params: &QuarticParams, x: [f64; 2], step: f64) -> [[[f64; 2]; 2]; 2] {
    let h_at = |y: [f64; 2]| second_form(&u_breve(params, y[0], y[1], 2));
    let h0 = h_at(x);
    let gamma = christoffel(params, x[0], x[1]);
    let mut out = [[[0.0; 2]; 2]; 2];
    for k in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                let partial = five_point(
                    &|t| {
                        let mut y = x;
                        y[k] += t;
                        h_at(y)[(i, j)]
                    },
                    step,
                );
                let corr: f64 = (0..2)
                    .map(|m| gamma[m][k][i] * h0[(m, j)] + gamma[m][k][j] * h0[(i, m)])
                    .sum();
                out[k][i][j] = partial - corr;
            }
        }
    }
    out
}

/// Finite-difference covariant derivatives at the origin, independent of the
/// closed-form expressions in [`origin_jet`].
pub fn origin_jet_fd(params: &QuarticParams, step: f64) -> OriginJet {
    let j = u_breve(params, 0.0, 0.0, 2);
    let h = second_form(&j);
    let g = metric(&j);
    let g_inv = g.try_inverse().expect("conformal metric is invertible");
    let dh = covariant_dh_fd(params, [0.0, 0.0], step);
    // Christoffel symbols vanish at the origin, so the outer derivative is a plain partial
    let mut ddh = [[[[0.0; 2]; 2]; 2]; 2];
    for l in 0..2 {
        let at = |t: f64| {
            let mut y = [0.0, 0.0];
            y[l] += t;
            covariant_dh_fd(params, y, step)
        };
        let samples = [at(-2.0 * step), at(-step), at(step), at(2.0 * step)];
        for k in 0..2 {
            for a in 0..2 {
                for b in 0..2 {
                    ddh[l][k][a][b] = (samples[0][k][a][b] - 8.0 * samples[1][k][a][b] + 8.0 * samples[2][k][a][b]
                        - samples[3][k][a][b])
                        / (12.0 * step);
                }
            }
        }
    }
    let to_arr = |m: Matrix2<f64>| [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]];
    OriginJet {
        hhat: to_arr(h - g),
        g_inv: to_arr(g_inv),
        dh,
        ddh,
    }
}

/// Rate of `ĥ₁₁` at the origin under speed `Ĥ^{-p}`: the closed form, and the
/// value assembled from the general evolution equation of `ĥ_ij` with
/// `Φ = -Ĥ^{-p}`.
pub fn dh11_rate(params: &QuarticParams, p: f64) -> Result<(f64, f64)> {
    if !(p > 0.0) {
        return Err(Error::InvalidArgument(format!("p = {p} must be positive")));
    }
    if !(params.a2 > 0.0) {
        return Err(Error::Degenerate(
            "a2 = 0 makes the shifted mean curvature vanish".into(),
        ));
    }
    let QuarticParams { a2, b2, c3 } = *params;
    let closed = p / (c3.powf(p) * a2.powf(p + 2.0)) * (0.5 * a2 + (1.0 - p) * b2 * b2);
    Ok((closed, assemble_rate(&origin_jet(params), p)))
}

/// Contracts the evolution equation of `ĥ₁₁` for `Φ = -Ĥ^{-p}` against the
/// given origin data.
pub fn assemble_rate(jet: &OriginJet, p: f64) -> f64 {
    let gi = &jet.g_inv;
    let hh = &jet.hhat;
    let mut big_h = 0.0;
    for k in 0..2 {
        for l in 0..2 {
            big_h += gi[k][l] * hh[k][l];
        }
    }
    let phi = -big_h.powf(-p);
    // Φ̇^{kl} = p Ĥ^{-p-1} g^{kl}, Φ̈^{kl,rs} = -p(p+1) Ĥ^{-p-2} g^{kl} g^{rs}
    let d1 = p * big_h.powf(-p - 1.0);
    let d2 = -p * (p + 1.0) * big_h.powf(-p - 2.0);
    // (ĥ²)_ij = ĥ_ik g^{kl} ĥ_lj
    let mut sq = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    sq[i][j] += hh[i][k] * gi[k][l] * hh[l][j];
                }
            }
        }
    }
    let (mut diffusion, mut tr_sq, mut tr_g) = (0.0, 0.0, 0.0);
    let mut trace_dh = 0.0;
    for k in 0..2 {
        for l in 0..2 {
            diffusion += d1 * gi[k][l] * jet.ddh[k][l][0][0];
            tr_sq += d1 * gi[k][l] * sq[k][l];
            tr_g += d1 * gi[k][l] * if k == l { 1.0 / gi[k][k] } else { 0.0 };
            trace_dh += gi[k][l] * jet.dh[0][k][l];
        }
    }
    let g11 = 1.0 / gi[0][0];
    let gradient = d2 * trace_dh * trace_dh;
    diffusion + gradient + tr_sq * (hh[0][0] + g11) + ((p - 1.0) * phi - tr_g) * sq[0][0]
}

/// Outcome of scanning a disk around the origin.
#[derive(Debug, Clone, Serialize)]
pub struct WindowReport {
    pub radius: f64,
    /// Minimum of `λ_min(hᵢʲ) - 1` over grid points other than the origin.
    pub min_margin: f64,
    pub argmin: [f64; 2],
    /// `λ_min(hᵢʲ) - 1` at the origin.
    pub origin_margin: f64,
    /// Fitted coefficients of `x₁²` and `x₂²` in the smallest eigenvalue of `h̆ᵢʲ ŭ v`.
    pub quad_coeffs: [f64; 2],
}

fn euclidean_scaled(params: &QuarticParams, x1: f64, x2: f64) -> (f64, Matrix2<f64>) {
    // h̆ᵢʲ ŭ v = ŭ ŭ_ik ḡ^{kj}, with ḡ the Euclidean graph metric
    let j = u_breve(params, x1, x2, 2);
    let [p, q] = j.grad();
    let v = (1.0 + p * p + q * q).sqrt();
    let gbar_inv = Matrix2::new(1.0 + q * q, -p * q, -p * q, 1.0 + p * p) / (v * v);
    (v, j.hess() * gbar_inv * j.value())
}

/// Smallest shifted principal curvature `λ_min(hᵢʲ) - 1` at a point.
pub fn horo_margin(params: &QuarticParams, x1: f64, x2: f64) -> f64 {
    halfspace_shift_weingarten(params, x1, x2).kappa[0]
}

/// Scans the disk of radius `r` on a `grid × grid` lattice for the smallest
/// shifted curvature and fits the quadratic part of `λ₁(h̆ᵢʲ ŭ v)`.
pub fn horoconvexity_window(params: &QuarticParams, r: f64, grid: usize) -> Result<WindowReport> {
    if !(r > 0.0) || r > MAX_PATCH_RADIUS {
        return Err(Error::InvalidArgument(format!(
            "patch radius {r} outside (0, {MAX_PATCH_RADIUS}]; the local expansion is not valid there"
        )));
    }
    if grid < 5 {
        return Err(Error::InvalidArgument(format!("grid {grid} too coarse")));
    }
    let mut min_margin = f64::INFINITY;
    let mut argmin = [0.0, 0.0];
    let mut rows: Vec<[f64; 10]> = Vec::new();
    let mut rhs = Vec::new();
    for a in 0..grid {
        for b in 0..grid {
            let x1 = -r + 2.0 * r * a as f64 / (grid - 1) as f64;
            let x2 = -r + 2.0 * r * b as f64 / (grid - 1) as f64;
            if x1 * x1 + x2 * x2 > r * r * (1.0 + 1e-12) {
                continue;
            }
            if x1 != 0.0 || x2 != 0.0 {
                let m = horo_margin(params, x1, x2);
                if m < min_margin {
                    min_margin = m;
                    argmin = [x1, x2];
                }
            }
            let (_, e) = euclidean_scaled(params, x1, x2);
            rows.push([
                1.0,
                x1,
                x2,
                x1 * x1,
                x1 * x2,
                x2 * x2,
                x1 * x1 * x1,
                x1 * x1 * x2,
                x1 * x2 * x2,
                x2 * x2 * x2,
            ]);
            rhs.push(sorted_eigenvalues(&e)[0]);
        }
    }
    let design = DMatrix::from_fn(rows.len(), 10, |i, j| rows[i][j]);
    let coeffs = design
        .svd(true, true)
        .solve(&DVector::from_vec(rhs), 1e-14)
        .map_err(|e| Error::Numerical(e.to_string()))?;
    Ok(WindowReport {
        radius: r,
        min_margin,
        argmin,
        origin_margin: horo_margin(params, 0.0, 0.0),
        quad_coeffs: [coeffs[3], coeffs[5]],
    })
}

/// Lower bound `β c₃ + 1/v` on the hyperbolic Weingarten map of a cap whose
/// Euclidean Weingarten map is at least `β`, after lifting by `c₃`.
pub fn cap_lower_bound(beta: f64, c3: f64, v: f64) -> f64 {
    beta * c3 + 1.0 / v
}

/// Smallest lift `c₃` that makes such a cap strictly horo-convex when its
/// gradient factor is at most `v_max`.
pub fn cap_min_lift(beta: f64, v_max: f64) -> Result<f64> {
    if !(beta > 0.0) || !(v_max >= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "need beta > 0 and v_max >= 1, got {beta}, {v_max}"
        )));
    }
    Ok((1.0 - 1.0 / v_max) / beta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateSign {
    Negative,
    Zero,
    Positive,
}

impl RateSign {
    fn predict(params: &QuarticParams, p: f64) -> Self {
        let pc = params.critical_p();
        if p > pc {
            RateSign::Negative
        } else if p < pc {
            RateSign::Positive
        } else {
            RateSign::Zero
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ParamsReport {
    pub a2: f64,
    pub b2: f64,
    pub c3: f64,
    pub c1: f64,
    pub c2: f64,
    pub p: f64,
    pub in_window: bool,
    pub critical_p: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CounterexampleReport {
    pub params: ParamsReport,
    pub rate_closed: f64,
    pub rate_assembled: f64,
    /// Smallest `λ_min - 1` away from the origin on the disk of radius 0.05.
    pub horoconvex_min: f64,
    /// Quadratic coefficients of `λ₁(h̆ᵢʲ ŭ v)`, fitted on the disk of radius 0.02.
    pub quad_coeffs: [f64; 2],
    pub sign_prediction: RateSign,
}

/// Everything the construction predicts at `t = 0` for one parameter set.
pub fn counterexample(params: &QuarticParams, p: f64) -> Result<CounterexampleReport> {
    let (rate_closed, rate_assembled) = dh11_rate(params, p)?;
    let wide = horoconvexity_window(params, 0.05, 41)?;
    let narrow = horoconvexity_window(params, 0.02, 41)?;
    Ok(CounterexampleReport {
        params: ParamsReport {
            a2: params.a2,
            b2: params.b2,
            c3: params.c3,
            c1: params.c1(),
            c2: params.c2(),
            p,
            in_window: params.in_window(),
            critical_p: params.critical_p(),
        },
        rate_closed,
        rate_assembled,
        horoconvex_min: wide.min_margin,
        quad_coeffs: narrow.quad_coeffs,
        sign_prediction: RateSign::predict(params, p),
    })
}

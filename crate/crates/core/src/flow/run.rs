//! Whole runs: configuration, initial data, the stepping loop with its
//! runtime checks, and the emitted artifacts.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::curvfun::CurvatureFunction;
use crate::exec::Exec;
use crate::flow::diagnostics::{
    fit_decay, hausdorff_roundness, mode_amplitudes, optimal_center, pinch_ratio, rescaled_curvature_range,
};
use crate::flow::rescaled::FlowState;
use crate::flow::spherical::{q_of_theta, remaining_time};
use crate::graphcurv::AxisymProfile;
use crate::horosupport::{catalog_profiles, LegendreSupport};
use crate::numerics::legendre;
use crate::{Error, Result};

/// Smallest `κQ` tolerated before the guard fires.
pub const GUARD_BAND: f64 = 1e-3;
/// Slack, in units of radius, for the spherical barrier comparison.
pub const BARRIER_SLACK: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurfaceKind {
    Sphere,
    Legendre,
    Support,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Perturbation {
    pub mode: usize,
    pub amplitude: f64,
}

fn default_theta0() -> f64 {
    1.0
}
fn default_n_grid() -> usize {
    256
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceConfig {
    #[serde(rename = "type")]
    pub kind: SurfaceKind,
    #[serde(default = "default_theta0")]
    pub theta0: f64,
    #[serde(default = "default_n_grid")]
    pub n_grid: usize,
    /// Legendre modes added to `theta0` for `type = "legendre"`.
    #[serde(default)]
    pub perturbation: Vec<Perturbation>,
    /// Name of a catalog support profile for `type = "support"`.
    #[serde(default)]
    pub support: Option<String>,
    /// Explicit Legendre coefficients of the support function.
    #[serde(default)]
    pub support_coeffs: Option<Vec<f64>>,
}

/// What happens when the rescaled curvature drops into the guard band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GuardMode {
    /// Stop the run.
    Strict,
    /// Log the event and keep going while the speed is defined.
    Record,
}

fn default_fn() -> String {
    "shifted-mean".into()
}
fn default_cfl() -> f64 {
    0.2
}
fn default_diag() -> f64 {
    0.1
}
fn default_true() -> bool {
    true
}
fn default_modes() -> usize {
    8
}
fn default_slices() -> usize {
    6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowParams {
    #[serde(rename = "fn", default = "default_fn")]
    pub fn_id: String,
    pub p: f64,
    pub tau_end: f64,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default = "default_diag")]
    pub diag_interval: f64,
    #[serde(default)]
    pub exec: Exec,
    /// Defaults to strict for `p <= 1` and record otherwise.
    #[serde(default)]
    pub guard: Option<GuardMode>,
    /// Compute the oscillation-minimising centre at each record.
    #[serde(default = "default_true")]
    pub recenter: bool,
    /// Move the constant mode of `σ` into the reference sphere at each record.
    #[serde(default = "default_true")]
    pub rematch_mean: bool,
    #[serde(default = "default_modes")]
    pub modes: usize,
    #[serde(default = "default_slices")]
    pub hausdorff_slices: usize,
}

impl FlowParams {
    pub fn guard_mode(&self) -> GuardMode {
        self.guard.unwrap_or(if self.p <= 1.0 {
            GuardMode::Strict
        } else {
            GuardMode::Record
        })
    }
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_true")]
    pub csv: bool,
    #[serde(default = "default_true")]
    pub json_summary: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            csv: true,
            json_summary: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub surface: SurfaceConfig,
    pub flow: FlowParams,
    #[serde(default)]
    pub output: OutputConfig,
}

impl SimulationConfig {
    /// Checks ranges that serde cannot express.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        let s = &self.surface;
        let f = &self.flow;
        if s.n_grid < crate::graphcurv::MIN_GRID {
            return bad(format!(
                "n_grid = {} below the minimum {}",
                s.n_grid,
                crate::graphcurv::MIN_GRID
            ));
        }
        if !(s.theta0 > 0.0 && s.theta0.is_finite()) {
            return bad(format!("theta0 = {} must be positive", s.theta0));
        }
        match s.kind {
            SurfaceKind::Support if s.support.is_none() && s.support_coeffs.is_none() => {
                return bad("type = \"support\" needs `support` or `support_coeffs`".into())
            }
            SurfaceKind::Sphere if !s.perturbation.is_empty() => {
                return bad("a sphere takes no perturbation; use type = \"legendre\"".into())
            }
            _ => {}
        }
        if !(f.p > 0.0 && f.p.is_finite()) {
            return bad(format!("p = {} must be positive", f.p));
        }
        if !(f.tau_end > 0.0 && f.tau_end.is_finite()) {
            return bad(format!("tau_end = {} must be positive", f.tau_end));
        }
        if !(f.cfl > 0.0 && f.cfl <= 1.0) {
            return bad(format!("cfl = {} outside (0, 1]", f.cfl));
        }
        if !(f.diag_interval > 0.0) {
            return bad(format!("diag_interval = {} must be positive", f.diag_interval));
        }
        if f.modes > s.n_grid / 4 {
            return bad(format!("modes = {} exceeds n_grid / 4", f.modes));
        }
        if f.hausdorff_slices < 3 {
            return bad("hausdorff_slices must be at least 3".into());
        }
        CurvatureFunction::from_id(&f.fn_id, 2)?;
        Ok(())
    }
}

/// Radial graph described by the surface section of a config.
pub fn initial_profile(s: &SurfaceConfig) -> Result<AxisymProfile> {
    match s.kind {
        SurfaceKind::Sphere => AxisymProfile::from_fn(s.n_grid, |_| s.theta0),
        SurfaceKind::Legendre => AxisymProfile::from_fn(s.n_grid, |phi| {
            let x = phi.cos();
            s.theta0
                + s.perturbation
                    .iter()
                    .map(|m| m.amplitude * legendre(m.mode, x))
                    .sum::<f64>()
        }),
        SurfaceKind::Support => {
            let series = if let Some(c) = &s.support_coeffs {
                LegendreSupport::new(c.clone())?
            } else {
                let name = s.support.as_deref().unwrap_or_default();
                catalog_profiles()
                    .into_iter()
                    .find(|(n, _)| *n == name)
                    .map(|(_, p)| p)
                    .ok_or_else(|| Error::InvalidArgument(format!("unknown support profile `{name}`")))?
            };
            Ok(series.radial_profile(s.n_grid)?.0)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub tau: f64,
    pub t: f64,
    pub theta: f64,
    pub theta_shift: f64,
    pub osc_u: f64,
    /// Oscillation about the oscillation-minimising axis point.
    pub osc_centered: f64,
    pub center_offset: f64,
    pub pinch_ratio: f64,
    pub kappa_q_min: f64,
    pub kappa_q_max: f64,
    pub fq_min: f64,
    pub fq_max: f64,
    pub hausdorff: f64,
    pub v_minus_1_max: f64,
    pub max_abs_sigma: f64,
    /// Legendre coefficients of `σ` before the constant mode is rematched.
    pub mode_amps: Vec<f64>,
}

/// Reductions of the current state.
pub fn diagnose(state: &FlowState, params: &FlowParams) -> Result<DiagnosticsRecord> {
    let prof = state.profile()?;
    let curv = prof.curvatures(state.exec);
    let range = rescaled_curvature_range(&curv, state.spherical.q, &state.f)?;
    let (center_offset, osc_centered) = if params.recenter {
        let (d, r) = optimal_center(&prof)?;
        (d, r.oscillation())
    } else {
        (0.0, prof.oscillation())
    };
    Ok(DiagnosticsRecord {
        tau: state.tau(),
        t: state.spherical.t,
        theta: state.theta(),
        theta_shift: state.theta_shift,
        osc_u: prof.oscillation(),
        osc_centered,
        center_offset,
        pinch_ratio: pinch_ratio(&curv),
        kappa_q_min: range.kappa_q_min,
        kappa_q_max: range.kappa_q_max,
        fq_min: range.fq_min,
        fq_max: range.fq_max,
        hausdorff: hausdorff_roundness(&prof, params.hausdorff_slices)?,
        v_minus_1_max: curv.v.iter().map(|v| v - 1.0).fold(0.0, f64::max),
        max_abs_sigma: state.sigma.iter().fold(0.0, |m, x| m.max(x.abs())),
        mode_amps: mode_amplitudes(&state.sigma, params.modes)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    /// `κQ` fell below the guard band.
    HoroConvexityGuard {
        tau: f64,
        cell: usize,
        kappa_q: f64,
        stopped: bool,
    },
    /// A shifted curvature reached zero; the speed is undefined from here on.
    HoroConvexityLost {
        tau: f64,
        cell: usize,
        kappa: f64,
    },
    BarrierViolation {
        tau: f64,
        side: String,
        margin: f64,
    },
    OscillationBound {
        tau: f64,
        osc: f64,
        bound: f64,
    },
}

impl Event {
    pub fn is_horo_convexity(&self) -> bool {
        matches!(self, Event::HoroConvexityGuard { .. } | Event::HoroConvexityLost { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub exponent: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub fn_id: String,
    pub p: f64,
    pub n_grid: usize,
    pub steps: usize,
    pub tau_final: f64,
    pub t_final: f64,
    pub theta_final: f64,
    pub theta_shift: f64,
    /// `max |u - θ|` against the rematched reference sphere, over the run.
    pub max_abs_sigma: f64,
    /// Same against `θ₀ + n^{-p} τ` without rematching, at the end.
    pub max_abs_sigma_unshifted: f64,
    pub initial_pinch: f64,
    pub final_pinch: f64,
    pub pinch_decay: Option<DecayFit>,
    pub osc_centered_decay: Option<DecayFit>,
    pub osc_initial: f64,
    pub osc_max: f64,
    /// Smallest barrier margins seen, in units of radius.
    pub barrier_margin_lower: f64,
    pub barrier_margin_upper: f64,
    pub barrier_ok: bool,
    pub osc_bound_ok: bool,
    pub horo_convexity_preserved: bool,
    pub stopped_early: bool,
    pub events: Vec<Event>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub records: Vec<DiagnosticsRecord>,
    pub summary: RunSummary,
    pub final_profile: AxisymProfile,
}

fn decay_of(series: Vec<(f64, f64)>) -> Option<DecayFit> {
    if series.len() < 4 || series.iter().any(|(_, v)| !(*v > 0.0)) {
        return None;
    }
    fit_decay(&series, 0.5)
        .ok()
        .map(|(exponent, r2)| DecayFit { exponent, r2 })
}

/// Spherical barriers through the extremes of the initial radius, compared
/// through existence times: the sphere of radius `r` at time `t` has
/// remaining time `T(r) - t`.
struct Barriers {
    p: f64,
    t_lower: f64,
    t_upper: f64,
}

impl Barriers {
    fn new(u0: &[f64], p: f64) -> Self {
        let lo = u0.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = u0.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Self {
            p,
            t_lower: remaining_time(lo, p, 2),
            t_upper: remaining_time(hi, p, 2),
        }
    }

    /// Margins `(inner, outer)` in units of radius; negative means violated.
    fn margins(&self, u_min: f64, u_max: f64, t: f64) -> (f64, f64) {
        let scale = |u: f64| 2f64.powf(self.p) * q_of_theta(u).powf(-self.p);
        let inner = (self.t_lower - t - remaining_time(u_min, self.p, 2)) / scale(u_min);
        let left = self.t_upper - t;
        let outer = if left <= 0.0 {
            f64::INFINITY
        } else {
            (remaining_time(u_max, self.p, 2) - left) / scale(u_max)
        };
        (inner, outer)
    }
}

/// Runs a configured simulation without writing anything.
pub fn run(cfg: &SimulationConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let params = &cfg.flow;
    let u0 = initial_profile(&cfg.surface)?;
    let f = CurvatureFunction::from_id(&params.fn_id, 2)?;
    let mut state = FlowState::new(&u0, f, params.p, params.exec)?;
    let guard = params.guard_mode();
    let barriers = Barriers::new(&u0.u, params.p);
    let osc0 = u0.oscillation();
    let osc_bound = osc0 + std::f64::consts::LN_2;

    let mut events = Vec::new();
    let mut records = vec![diagnose(&state, params)?];
    let mut steps = 0usize;
    let mut stopped = false;
    let mut guard_logged = false;
    let mut margin_lo = f64::INFINITY;
    let mut margin_hi = f64::INFINITY;
    let mut osc_max = osc0;
    let mut barrier_logged = false;
    let mut osc_logged = false;
    let mut max_abs_sigma = records[0].max_abs_sigma;
    let mut next_record = 0usize;

    'outer: while state.tau() < params.tau_end * (1.0 - 1e-14) {
        next_record += 1;
        let target = (next_record as f64 * params.diag_interval).min(params.tau_end);
        let span = target - state.tau();
        if span <= 0.0 {
            continue;
        }
        let dt_max = match state.cfl_step(params.cfl) {
            Ok(d) => d,
            Err(Error::HoroConvexityLost { cell, tau, kappa }) => {
                events.push(Event::HoroConvexityLost { tau, cell, kappa });
                stopped = true;
                break;
            }
            Err(e) => return Err(e),
        };
        let n_steps = (span / dt_max).ceil().max(1.0) as usize;
        let dt = span / n_steps as f64;
        for _ in 0..n_steps {
            let start = match state.step(dt) {
                Ok(r) => r,
                Err(Error::HoroConvexityLost { cell, tau, kappa }) => {
                    events.push(Event::HoroConvexityLost { tau, cell, kappa });
                    stopped = true;
                    break 'outer;
                }
                Err(e) => return Err(e),
            };
            steps += 1;
            if start.min_kappa_q < GUARD_BAND && !guard_logged {
                guard_logged = true;
                let stop = guard == GuardMode::Strict;
                events.push(Event::HoroConvexityGuard {
                    tau: state.tau() - dt,
                    cell: start.argmin,
                    kappa_q: start.min_kappa_q,
                    stopped: stop,
                });
                if stop {
                    stopped = true;
                    break 'outer;
                }
            }
            let th = state.theta();
            let (lo, hi) = state
                .sigma
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &s| {
                    (a.min(s + th), b.max(s + th))
                });
            let (mi, mo) = barriers.margins(lo, hi, state.spherical.t);
            margin_lo = margin_lo.min(mi);
            margin_hi = margin_hi.min(mo);
            if (mi < -BARRIER_SLACK || mo < -BARRIER_SLACK) && !barrier_logged {
                barrier_logged = true;
                let (side, margin) = if mi < mo { ("inner", mi) } else { ("outer", mo) };
                events.push(Event::BarrierViolation {
                    tau: state.tau(),
                    side: side.into(),
                    margin,
                });
            }
            let osc = hi - lo;
            osc_max = osc_max.max(osc);
            if osc > osc_bound && !osc_logged {
                osc_logged = true;
                events.push(Event::OscillationBound {
                    tau: state.tau(),
                    osc,
                    bound: osc_bound,
                });
            }
            max_abs_sigma = state.sigma.iter().fold(max_abs_sigma, |m, x| m.max(x.abs()));
        }
        let rec = diagnose(&state, params)?;
        records.push(rec);
        if params.rematch_mean {
            state.rematch_mean()?;
        }
    }

    let last = records.last().unwrap();
    let first = &records[0];
    let pinch_decay = decay_of(records.iter().map(|r| (r.tau, r.pinch_ratio - 1.0)).collect());
    let osc_centered_decay = decay_of(records.iter().map(|r| (r.tau, r.osc_centered)).collect());
    let summary = RunSummary {
        fn_id: state.f.id(),
        p: params.p,
        n_grid: state.n_grid(),
        steps,
        tau_final: state.tau(),
        t_final: state.spherical.t,
        theta_final: state.theta(),
        theta_shift: state.theta_shift,
        max_abs_sigma,
        max_abs_sigma_unshifted: state
            .sigma
            .iter()
            .fold(0.0, |m, x| m.max((x + state.theta_shift).abs())),
        initial_pinch: first.pinch_ratio,
        final_pinch: last.pinch_ratio,
        pinch_decay,
        osc_centered_decay,
        osc_initial: osc0,
        osc_max,
        barrier_margin_lower: margin_lo,
        barrier_margin_upper: margin_hi,
        barrier_ok: !barrier_logged,
        osc_bound_ok: !osc_logged,
        horo_convexity_preserved: !events.iter().any(Event::is_horo_convexity),
        stopped_early: stopped,
        events,
    };
    Ok(RunOutcome {
        records,
        summary,
        final_profile: state.profile()?,
    })
}

/// Writes `diagnostics.csv`, with one column per Legendre coefficient.
pub fn write_diagnostics_csv<W: Write>(writer: W, records: &[DiagnosticsRecord]) -> Result<()> {
    let k = records.first().map_or(0, |r| r.mode_amps.len());
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = [
        "tau",
        "t",
        "theta",
        "theta_shift",
        "osc_u",
        "osc_centered",
        "center_offset",
        "pinch_ratio",
        "kappaQ_min",
        "kappaQ_max",
        "FQ_min",
        "FQ_max",
        "hausdorff",
        "v_minus_1_max",
        "max_abs_sigma",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((0..k).map(|i| format!("a{i}")));
    w.write_record(&header)?;
    for r in records {
        let mut row: Vec<String> = [
            r.tau,
            r.t,
            r.theta,
            r.theta_shift,
            r.osc_u,
            r.osc_centered,
            r.center_offset,
            r.pinch_ratio,
            r.kappa_q_min,
            r.kappa_q_max,
            r.fq_min,
            r.fq_max,
            r.hausdorff,
            r.v_minus_1_max,
            r.max_abs_sigma,
        ]
        .iter()
        .map(|x| format!("{x:e}"))
        .collect();
        row.extend(r.mode_amps.iter().map(|x| format!("{x:e}")));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the configured artifacts into `dir`.
pub fn write_outputs(outcome: &RunOutcome, output: &OutputConfig, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    if output.csv {
        write_diagnostics_csv(
            BufWriter::new(File::create(dir.join("diagnostics.csv"))?),
            &outcome.records,
        )?;
        outcome
            .final_profile
            .write_csv(BufWriter::new(File::create(dir.join("profile_final.csv"))?))?;
    }
    Ok(())
}

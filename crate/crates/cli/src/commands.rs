use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;

use horoflow::cexample::{counterexample, QuarticParams, RateSign};
use horoflow::curvfun::{certify_structure, CertificationReport, CurvatureFunction};
use horoflow::exec::{par_map, Exec};
use horoflow::flow::{
    maximal_time, maximal_time_p1, run, spherical_p1, spherical_trajectory, write_outputs, RunOutcome, RunSummary,
    SimulationConfig, SphericalState, SurfaceKind,
};
use horoflow::horosupport::{catalog_profiles, cross_check, CrossCheck, LegendreSupport, SupportProfile};

use crate::config::CliConfig;
use crate::{Cli, CliError, Command, GlobalArgs};

/// Agreement demanded of the two curvature routes in `--check` mode.
const CROSS_CHECK_TOL: f64 = 1e-5;

pub fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let cfg = CliConfig::load(cli.global.config.as_deref())?;
    let g = &cli.global;
    match &cli.command {
        Command::Simulate => simulate(g, &cfg),
        Command::Spherical(a) => spherical(g, &cfg, a),
        Command::Counterexample(a) => cexample(g, &cfg, a),
        Command::CurvfunCheck(a) => curvfun_check(g, &cfg, a),
        Command::SupportCheck(a) => support_check(g, &cfg, a),
        Command::Sweep => sweep(g, &cfg),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    serde_json::to_writer_pretty(BufWriter::new(File::create(path)?), value).map_err(|e| CliError::Io(e.to_string()))
}

fn print_json<T: Serialize>(value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        // a closed pipe (`| head`) is not an error of ours
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

/// Prints each check and fails with the names of those that did not hold.
fn enforce(checks: Vec<(String, bool)>) -> Result<(), CliError> {
    let mut failed = Vec::new();
    for (name, ok) in checks {
        eprintln!("check {}: {name}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            failed.push(name);
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Check(failed))
    }
}

#[derive(Serialize)]
struct SummaryFile<'a> {
    seed: Option<u64>,
    config: &'a SimulationConfig,
    #[serde(flatten)]
    summary: &'a RunSummary,
}

fn save_run(outcome: &RunOutcome, sim: &SimulationConfig, seed: Option<u64>) -> Result<(), CliError> {
    let dir = &sim.output.dir;
    write_outputs(outcome, &sim.output, dir)?;
    if sim.output.json_summary {
        write_json(
            &dir.join("summary.json"),
            &SummaryFile {
                seed,
                config: sim,
                summary: &outcome.summary,
            },
        )?;
    }
    Ok(())
}

/// Losing horo-convexity is a numerical event unless `p > 1`, where the
/// flow is known not to preserve it.
fn unexpected_loss(s: &RunSummary) -> Option<String> {
    if s.p > 1.0 {
        return None;
    }
    s.events
        .iter()
        .find(|e| e.is_horo_convexity())
        .map(|e| format!("horo-convexity event at p = {}: {e:?}", s.p))
}

fn simulation_checks(sim: &SimulationConfig, s: &RunSummary) -> Vec<(String, bool)> {
    let mut out = vec![
        (
            format!(
                "spherical barriers contain the surface (margins {:.2e}, {:.2e})",
                s.barrier_margin_lower, s.barrier_margin_upper
            ),
            s.barrier_ok,
        ),
        (
            format!("oscillation {:.3e} stays below osc0 + ln 2", s.osc_max),
            s.osc_bound_ok,
        ),
        (format!("reached tau_end = {}", sim.flow.tau_end), !s.stopped_early),
    ];
    if s.p <= 1.0 {
        out.push(("horo-convexity preserved".into(), s.horo_convexity_preserved));
        let perturbed = sim.surface.kind != SurfaceKind::Sphere;
        if perturbed {
            out.push((
                format!(
                    "pinching decreases ({:.3e} -> {:.3e})",
                    s.initial_pinch - 1.0,
                    s.final_pinch - 1.0
                ),
                s.final_pinch <= s.initial_pinch,
            ));
        }
    }
    if sim.surface.kind == SurfaceKind::Sphere {
        out.push((
            format!("sphere stays round (max |sigma| = {:.2e})", s.max_abs_sigma),
            s.max_abs_sigma <= 1e-9,
        ));
    }
    out
}

fn simulate(g: &GlobalArgs, cfg: &CliConfig) -> Result<(), CliError> {
    let mut sim = cfg.simulation()?;
    if let Some(dir) = &g.out {
        sim.output.dir = dir.clone();
    }
    let outcome = run(&sim)?;
    save_run(&outcome, &sim, g.seed.or(cfg.seed))?;
    let s = &outcome.summary;
    println!(
        "{} steps to tau = {:.4} (t = {:.6e}); pinch - 1: {:.3e} -> {:.3e}; max |sigma| = {:.3e}; outputs in {}",
        s.steps,
        s.tau_final,
        s.t_final,
        s.initial_pinch - 1.0,
        s.final_pinch - 1.0,
        s.max_abs_sigma,
        sim.output.dir.display()
    );
    if let Some(m) = unexpected_loss(s) {
        return Err(CliError::Numerical(m));
    }
    if g.check {
        enforce(simulation_checks(&sim, s))?;
    }
    Ok(())
}

#[derive(Debug, Clone, Args)]
pub struct SphericalArgs {
    #[arg(long)]
    pub theta0: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    /// Dimension of the evolving hypersurface.
    #[arg(long)]
    pub n: Option<usize>,
    /// Last original time sampled; defaults to 99% of the existence time.
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Serialize)]
struct SphericalReport {
    theta0: f64,
    p: f64,
    n: usize,
    maximal_time: f64,
    maximal_time_closed_form: Option<f64>,
    trajectory: Vec<SphericalState>,
}

fn spherical(g: &GlobalArgs, cfg: &CliConfig, a: &SphericalArgs) -> Result<(), CliError> {
    let sec = cfg.spherical.clone().unwrap_or_default();
    let theta0 = a.theta0.or(sec.theta0).unwrap_or(1.0);
    let p = a.p.or(sec.p).unwrap_or(1.0);
    let n = a.n.or(sec.n).unwrap_or(2);
    let samples = a.samples.or(sec.samples).unwrap_or(101);
    let t_max = maximal_time(theta0, p, n)?;
    let horizon = a.horizon.or(sec.horizon).unwrap_or(0.99 * t_max);
    if !(horizon > 0.0 && horizon < t_max) {
        return Err(CliError::Validation(format!(
            "horizon {horizon} must lie in (0, T* = {t_max})"
        )));
    }
    let report = SphericalReport {
        theta0,
        p,
        n,
        maximal_time: t_max,
        maximal_time_closed_form: (p == 1.0).then(|| maximal_time_p1(theta0, n)),
        trajectory: spherical_trajectory(theta0, p, n, horizon, samples)?,
    };
    let dir = g.out.clone().or_else(|| cfg.output.as_ref().map(|o| o.dir.clone()));
    match &dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let mut w = csv::Writer::from_writer(BufWriter::new(File::create(dir.join("spherical.csv"))?));
            for s in &report.trajectory {
                w.serialize(s).map_err(|e| CliError::Io(e.to_string()))?;
            }
            w.flush()?;
            write_json(&dir.join("spherical.json"), &report)?;
            println!(
                "T* = {t_max:.15e}; {} samples written to {}",
                report.trajectory.len(),
                dir.display()
            );
        }
        None => print_json(&report)?,
    }
    if g.check {
        let nf = n as f64;
        let mut checks = Vec::new();
        let drift = report
            .trajectory
            .iter()
            .map(|s| (s.theta - theta0 - nf.powf(-p) * s.tau).abs() / (1.0 + s.theta))
            .fold(0.0, f64::max);
        checks.push((
            format!("theta - theta0 = n^(-p) tau (drift {drift:.2e})"),
            drift <= 1e-8,
        ));
        if p == 1.0 {
            let e_t = (t_max / maximal_time_p1(theta0, n) - 1.0).abs();
            checks.push((format!("quadrature T* matches closed form ({e_t:.2e})"), e_t <= 1e-8));
            let mut e_q: f64 = 0.0;
            for s in &report.trajectory {
                let exact = spherical_p1(theta0, n, s.t)?;
                e_q = e_q.max((s.q / exact.q - 1.0).abs());
            }
            checks.push((format!("integrated Q matches closed form ({e_q:.2e})"), e_q <= 1e-8));
        }
        enforce(checks)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Args)]
pub struct CounterexampleArgs {
    #[arg(long)]
    pub a2: Option<f64>,
    #[arg(long)]
    pub b2: Option<f64>,
    #[arg(long)]
    pub c3: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
}

fn cexample(g: &GlobalArgs, cfg: &CliConfig, a: &CounterexampleArgs) -> Result<(), CliError> {
    let sec = cfg.counterexample.clone().unwrap_or_default();
    let params = QuarticParams::new(
        a.a2.or(sec.a2).unwrap_or(1.0),
        a.b2.or(sec.b2).unwrap_or(1.0),
        a.c3.or(sec.c3).unwrap_or(10.0),
    )?;
    let p = a.p.or(sec.p).unwrap_or(2.0);
    let report = counterexample(&params, p)?;
    print_json(&report)?;
    if let Some(dir) = &g.out {
        write_json(&dir.join("counterexample.json"), &report)?;
    }
    if g.check {
        let r = &report;
        let agree = (r.rate_closed - r.rate_assembled).abs() <= 1e-12 * r.rate_closed.abs().max(1.0);
        let sign = match r.sign_prediction {
            RateSign::Negative => r.rate_closed < 0.0,
            RateSign::Positive => r.rate_closed > 0.0,
            RateSign::Zero => r.rate_closed.abs() <= 1e-12,
        };
        enforce(vec![
            (
                format!("closed {} vs assembled {}", r.rate_closed, r.rate_assembled),
                agree,
            ),
            (
                format!("rate sign matches the critical power {}", r.params.critical_p),
                sign,
            ),
        ])?;
    }
    Ok(())
}

#[derive(Debug, Clone, Args)]
pub struct CurvfunArgs {
    /// Catalog id, or `all` for every entry of the dimension.
    #[arg(long = "fn")]
    pub fn_id: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
}

fn curvfun_check(g: &GlobalArgs, cfg: &CliConfig, a: &CurvfunArgs) -> Result<(), CliError> {
    let sec = cfg.curvfun_check.clone().unwrap_or_default();
    let id = a.fn_id.clone().or(sec.fn_id).unwrap_or_else(|| "all".into());
    let n = a.n.or(sec.n).unwrap_or(2);
    let samples = a.samples.or(sec.samples).unwrap_or(1000);
    let seed = g
        .seed
        .or(cfg.seed)
        .ok_or_else(|| CliError::Validation("sampling needs a seed: pass --seed or set `seed` in the config".into()))?;
    let entries = if id == "all" {
        CurvatureFunction::catalog(n)
    } else {
        vec![CurvatureFunction::from_id(&id, n)?]
    };
    let reports: Vec<CertificationReport> = par_map(&entries, |f| certify_structure(f, samples, seed))
        .into_iter()
        .collect::<Result<_, _>>()?;
    print_json(&reports)?;
    if let Some(dir) = &g.out {
        write_json(&dir.join("curvfun_check.json"), &reports)?;
    }
    if g.check {
        enforce(
            reports
                .iter()
                .flat_map(|r| r.checks.iter().map(move |c| (format!("{} {}", r.id, c.name), c.passed)))
                .collect(),
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Args)]
pub struct SupportArgs {
    /// CSV file with columns `phi,s`, or the name of a built-in profile.
    #[arg(long)]
    pub profile: Option<String>,
    #[arg(long = "fn")]
    pub fn_id: Option<String>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub n_grid: Option<usize>,
    /// Legendre degree used to smooth a sampled profile.
    #[arg(long)]
    pub degree: Option<usize>,
}

#[derive(Serialize)]
struct SupportReport {
    profile: String,
    coeffs: Vec<f64>,
    #[serde(flatten)]
    cross: CrossCheck,
}

fn support_series(profile: &str, degree: usize) -> Result<LegendreSupport, CliError> {
    let path = PathBuf::from(profile);
    if path.is_file() {
        let sp = SupportProfile::read_csv(File::open(&path)?)?;
        return Ok(LegendreSupport::from_grid(&sp, degree)?);
    }
    catalog_profiles()
        .into_iter()
        .find(|(name, _)| *name == profile)
        .map(|(_, s)| s)
        .ok_or_else(|| {
            let names: Vec<&str> = catalog_profiles().iter().map(|(n, _)| *n).collect();
            CliError::Validation(format!("`{profile}` is neither a file nor one of {names:?}"))
        })
}

fn support_check(g: &GlobalArgs, cfg: &CliConfig, a: &SupportArgs) -> Result<(), CliError> {
    let sec = cfg.support_check.clone().unwrap_or_default();
    let profile = a
        .profile
        .clone()
        .or(sec.profile)
        .ok_or_else(|| CliError::Validation("support-check needs --profile".into()))?;
    let f = CurvatureFunction::from_id(
        &a.fn_id.clone().or(sec.fn_id).unwrap_or_else(|| "shifted-mean".into()),
        2,
    )?;
    let p = a.p.or(sec.p).unwrap_or(1.0);
    let n_grid = a.n_grid.or(sec.n_grid).unwrap_or(256);
    let degree = a.degree.or(sec.degree).unwrap_or(16);
    let series = support_series(&profile, degree)?;
    let cross = cross_check(&series, n_grid, &f, p).map_err(|e| match e {
        horoflow::Error::HoroConvexityLost { .. } => {
            CliError::Validation(format!("profile `{profile}` is not horo-convex"))
        }
        other => other.into(),
    })?;
    let report = SupportReport {
        profile,
        coeffs: series.coeffs.clone(),
        cross,
    };
    print_json(&report)?;
    if let Some(dir) = &g.out {
        write_json(&dir.join("support_check.json"), &report)?;
    }
    if g.check {
        let c = &report.cross;
        enforce(vec![
            (
                format!("curvatures agree ({:.2e})", c.max_kappa_diff),
                c.max_kappa_diff <= CROSS_CHECK_TOL,
            ),
            (
                format!("normal speeds agree ({:.2e})", c.max_speed_diff),
                c.max_speed_diff <= CROSS_CHECK_TOL,
            ),
        ])?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SweepRow {
    index: usize,
    p: f64,
    theta0: f64,
    amplitude: Option<f64>,
    steps: usize,
    tau_final: f64,
    initial_pinch: f64,
    final_pinch: f64,
    pinch_exponent: Option<f64>,
    osc_centered_exponent: Option<f64>,
    barrier_ok: bool,
    osc_bound_ok: bool,
    horo_convexity_preserved: bool,
    error: Option<String>,
}

fn sweep(g: &GlobalArgs, cfg: &CliConfig) -> Result<(), CliError> {
    let mut base = cfg.simulation()?;
    if let Some(dir) = &g.out {
        base.output.dir = dir.clone();
    }
    let sec = cfg
        .sweep
        .clone()
        .ok_or_else(|| CliError::Validation("sweep needs a [sweep] section".into()))?;
    if sec.p.is_empty() {
        return Err(CliError::Validation("[sweep] p must list at least one power".into()));
    }
    if !sec.amplitude.is_empty() && base.surface.perturbation.is_empty() {
        return Err(CliError::Validation(
            "[sweep] amplitude needs a perturbation entry in [surface]".into(),
        ));
    }
    let thetas = if sec.theta0.is_empty() {
        vec![base.surface.theta0]
    } else {
        sec.theta0.clone()
    };
    let amps: Vec<Option<f64>> = if sec.amplitude.is_empty() {
        vec![None]
    } else {
        sec.amplitude.iter().map(|a| Some(*a)).collect()
    };
    let mut jobs = Vec::new();
    for &p in &sec.p {
        for &theta0 in &thetas {
            for &amp in &amps {
                let mut c = base.clone();
                c.flow.p = p;
                c.flow.exec = Exec::Sequential;
                c.surface.theta0 = theta0;
                if let Some(a) = amp {
                    c.surface.perturbation[0].amplitude = a;
                }
                c.output.dir = base.output.dir.join(format!("run_{:03}", jobs.len()));
                c.validate()?;
                jobs.push((c, amp));
            }
        }
    }
    let outcomes = par_map(&jobs, |(c, _)| run(c));
    let seed = g.seed.or(cfg.seed);
    let mut rows = Vec::new();
    let mut numerical = Vec::new();
    let mut checks = Vec::new();
    for (index, ((c, amp), outcome)) in jobs.iter().zip(outcomes).enumerate() {
        let mut row = SweepRow {
            index,
            p: c.flow.p,
            theta0: c.surface.theta0,
            amplitude: *amp,
            steps: 0,
            tau_final: 0.0,
            initial_pinch: f64::NAN,
            final_pinch: f64::NAN,
            pinch_exponent: None,
            osc_centered_exponent: None,
            barrier_ok: false,
            osc_bound_ok: false,
            horo_convexity_preserved: false,
            error: None,
        };
        match outcome {
            Ok(o) => {
                save_run(&o, c, seed)?;
                let s = &o.summary;
                row.steps = s.steps;
                row.tau_final = s.tau_final;
                row.initial_pinch = s.initial_pinch;
                row.final_pinch = s.final_pinch;
                row.pinch_exponent = s.pinch_decay.map(|d| d.exponent);
                row.osc_centered_exponent = s.osc_centered_decay.map(|d| d.exponent);
                row.barrier_ok = s.barrier_ok;
                row.osc_bound_ok = s.osc_bound_ok;
                row.horo_convexity_preserved = s.horo_convexity_preserved;
                if let Some(m) = unexpected_loss(s) {
                    numerical.push(format!("run {index}: {m}"));
                }
                checks.extend(
                    simulation_checks(c, s)
                        .into_iter()
                        .map(|(n, ok)| (format!("run {index}: {n}"), ok)),
                );
            }
            Err(e) => {
                row.error = Some(e.to_string());
                match CliError::from(e) {
                    CliError::Numerical(m) => numerical.push(format!("run {index}: {m}")),
                    other => return Err(other),
                }
            }
        }
        rows.push(row);
    }
    std::fs::create_dir_all(&base.output.dir)?;
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(base.output.dir.join("sweep.csv"))?));
    for r in &rows {
        w.serialize(r).map_err(|e| CliError::Io(e.to_string()))?;
    }
    w.flush()?;
    println!("{} runs written to {}", rows.len(), base.output.dir.display());
    if !numerical.is_empty() {
        return Err(CliError::Numerical(numerical.join("; ")));
    }
    if g.check {
        enforce(checks)?;
    }
    Ok(())
}

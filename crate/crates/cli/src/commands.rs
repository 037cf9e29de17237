//! The four commands. Each returns its files and a JSON summary without
//! touching the file system; [`run`] commits them.

use std::path::Path;

use serde::Serialize;

use pointstab::closed_loop::{build_model, energy_series, envelope_constant, fit_decay_rate, integrate, resolve_sign};
use pointstab::gramian::{assemble_gramian, block_inverse, hum_control, observability_constants};
use pointstab::modal::{degeneracy_profile, trace};
use pointstab::{
    ClosedLoop, Dd, DecayFit, DegeneracyReport, FeedbackOperator, FeedbackSign, Gramian, Real, SystemConfig,
    TrajectoryRecord,
};

use crate::config::{RunConfig, SignChoice};
use crate::error::CliError;
use crate::output::{csv, matrix_dump, num, read_trajectory_csv, trajectory_csv, Outputs};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Synthesize,
    Simulate,
    Control,
    Observability,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Synthesize => "synthesize",
            Command::Simulate => "simulate",
            Command::Control => "control",
            Command::Observability => "observability",
        }
    }
}

/// Files produced by one command, plus warnings for the terminal.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub outputs: Outputs,
    pub summary: serde_json::Value,
    pub warnings: Vec<String>,
}

impl Report {
    fn new(json_name: &str, summary: impl Serialize, mut outputs: Outputs, warnings: Vec<String>) -> Self {
        let mut text = serde_json::to_string_pretty(&summary).expect("summary serializes");
        let summary = serde_json::to_value(summary).expect("summary serializes");
        text.push('\n');
        outputs.add(json_name, text);
        Report { outputs, summary, warnings }
    }
}

pub fn execute(cmd: Command, cfg: &RunConfig) -> Result<Report, CliError> {
    match cmd {
        Command::Synthesize => synthesize(cfg),
        Command::Simulate => simulate(cfg),
        Command::Control => control(cfg),
        Command::Observability => observability(cfg),
    }
}

/// Runs `cmd` and writes its files into `dir`. Nothing is written on error.
pub fn run(cmd: Command, cfg: &RunConfig, dir: &Path) -> Result<Report, CliError> {
    let report = execute(cmd, cfg)?;
    report.outputs.commit(dir)?;
    Ok(report)
}

/// Condition numbers beyond the working precision are reported as `1/eps`
/// of double-double arithmetic, with `numerically_singular` set.
fn reported_condition(c: f64) -> (f64, bool) {
    let cap = 1.0 / <Dd as Real>::epsilon();
    if c.is_finite() && c < cap {
        (c, false)
    } else {
        (cap, true)
    }
}

fn check_degeneracy(cfg: &SystemConfig) -> Result<DegeneracyReport, CliError> {
    let report = degeneracy_profile(cfg);
    match report.to_error() {
        Some(e) => Err(e.into()),
        None => Ok(report),
    }
}

#[derive(Serialize)]
struct ModeWeightsJson {
    mode: usize,
    xi: f64,
    eta: f64,
}

#[derive(Serialize)]
struct DegeneracyJson {
    min_xi: f64,
    min_eta: f64,
    flagged_xi: Vec<usize>,
    flagged_eta: Vec<usize>,
    modes: Vec<ModeWeightsJson>,
}

impl From<&DegeneracyReport> for DegeneracyJson {
    fn from(r: &DegeneracyReport) -> Self {
        DegeneracyJson {
            min_xi: r.min_xi,
            min_eta: r.min_eta,
            flagged_xi: r.flagged_xi.clone(),
            flagged_eta: r.flagged_eta.clone(),
            modes: r.modes.iter().map(|m| ModeWeightsJson { mode: m.mode, xi: m.xi, eta: m.eta }).collect(),
        }
    }
}

/// Gramian, feedback with its resolved sign, and the closed loop.
struct Synthesis {
    gramian: Gramian,
    feedback: FeedbackOperator,
    system: ClosedLoop,
    abscissa: f64,
    warnings: Vec<String>,
}

fn synthesis(cfg: &RunConfig) -> Result<Synthesis, CliError> {
    let spec = cfg.gramian_spec()?;
    let gramian = assemble_gramian(&cfg.system, &spec, cfg.adjoint_mode)?;
    let fb = block_inverse(&gramian)?;
    let model = build_model(&cfg.system);
    let (feedback, abscissa) = match cfg.sign {
        SignChoice::Auto => resolve_sign(&model, &fb)?,
        fixed => {
            let sign = if fixed == SignChoice::Positive { FeedbackSign::Positive } else { FeedbackSign::Negative };
            let fb = fb.with_sign(sign);
            let a = ClosedLoop::from_feedback(&model, &fb)?.spectral_abscissa()?;
            (fb, a)
        }
    };
    let system = ClosedLoop::from_feedback(&model, &feedback)?;
    let mut warnings = gramian.warnings().to_vec();
    if abscissa >= 0.0 {
        warnings.push(format!("closed loop is not stable: spectral abscissa {abscissa:e}"));
    }
    Ok(Synthesis { gramian, feedback, system, abscissa, warnings })
}

#[derive(Serialize)]
struct SynthesizeJson {
    command: &'static str,
    #[serde(rename = "N")]
    n: usize,
    omega: f64,
    #[serde(rename = "S")]
    s: f64,
    kind: &'static str,
    adjoint_mode: &'static str,
    condition: f64,
    numerically_singular: bool,
    min_eigenvalue: f64,
    max_eigenvalue: f64,
    asymmetry: f64,
    inverse_residual: f64,
    sign: i32,
    sign_choice: &'static str,
    abscissa: f64,
    max_gain: f64,
    degeneracy: DegeneracyJson,
    warnings: Vec<String>,
}

pub fn synthesize(cfg: &RunConfig) -> Result<Report, CliError> {
    let degeneracy = check_degeneracy(&cfg.system)?;
    let syn = synthesis(cfg)?;
    let g = &syn.gramian;
    let spec = g.spec();
    let n = cfg.system.modes();

    let mut out = Outputs::default();
    let header = format!("gramian N={n} omega={} S={} kind={}", num(spec.omega), num(spec.horizon), spec.kind.name());
    out.add("gramian.txt", matrix_dump(&header, g.matrix()));

    let sign = syn.feedback.sign().value() as i32;
    let mut fb_text = String::new();
    for (name, block) in [
        ("K11", syn.feedback.k11()),
        ("K12", syn.feedback.k12()),
        ("K23", syn.feedback.k23()),
        ("K24", syn.feedback.k24()),
    ] {
        fb_text.push_str(&matrix_dump(&format!("{name} N={n}"), &block));
    }
    fb_text.push_str(&matrix_dump(&format!("gains rows=2 cols={} sign={sign}", 4 * n), &syn.feedback.gains()));
    out.add("feedback.txt", fb_text);

    let summary = SynthesizeJson {
        command: "synthesize",
        n,
        omega: spec.omega,
        s: spec.horizon,
        kind: spec.kind.name(),
        adjoint_mode: cfg.adjoint_mode.name(),
        condition: reported_condition(g.condition()).0,
        numerically_singular: reported_condition(g.condition()).1,
        min_eigenvalue: g.min_eigenvalue(),
        max_eigenvalue: g.max_eigenvalue(),
        asymmetry: g.asymmetry(),
        inverse_residual: syn.feedback.residual(),
        sign,
        sign_choice: sign_choice_name(cfg.sign),
        abscissa: syn.abscissa,
        max_gain: syn.feedback.gains().amax(),
        degeneracy: (&degeneracy).into(),
        warnings: syn.warnings.clone(),
    };
    Ok(Report::new("synthesize.json", summary, out, syn.warnings))
}

fn sign_choice_name(s: SignChoice) -> &'static str {
    match s {
        SignChoice::Auto => "auto",
        SignChoice::Negative => "negative",
        SignChoice::Positive => "positive",
    }
}

#[derive(Serialize)]
struct SimulateJson {
    command: &'static str,
    #[serde(rename = "N")]
    n: usize,
    omega: f64,
    #[serde(rename = "S")]
    s: f64,
    kind: &'static str,
    sign: i32,
    abscissa: f64,
    integrator: &'static str,
    t_end: f64,
    dt: f64,
    energy_space: &'static str,
    initial: String,
    fit_start: f64,
    fit_end: f64,
    /// `None` when the weighted energy vanishes identically or the run ends
    /// before the fit window.
    fitted_rate: Option<f64>,
    fit_intercept: Option<f64>,
    fit_residual: Option<f64>,
    natural_fitted_rate: Option<f64>,
    #[serde(rename = "envelope_M")]
    envelope_m: Option<f64>,
    initial_weighted_energy: f64,
    initial_natural_energy: f64,
    final_weighted_energy: f64,
    final_natural_energy: f64,
    warnings: Vec<String>,
}

/// Energy series and decay fits of a trajectory under `cfg`.
pub struct Scores {
    pub weighted: Vec<f64>,
    pub natural: Vec<f64>,
    pub fit: Option<DecayFit>,
    pub natural_fit: Option<DecayFit>,
    pub envelope: Option<f64>,
}

pub fn score(cfg: &RunConfig, rec: &TrajectoryRecord) -> Result<Scores, CliError> {
    let space = cfg.energy_space.spec(&cfg.system);
    let e = energy_series(rec, &space, &cfg.system, cfg.natural_form)?;
    let end = cfg.fit_end.min(*rec.times.last().unwrap_or(&0.0));
    let fit_if_nonzero = |vals: &[f64]| -> Result<Option<DecayFit>, CliError> {
        if end <= cfg.fit_start || vals.iter().all(|&v| v == 0.0) {
            Ok(None)
        } else {
            Ok(Some(fit_decay_rate(&rec.times, vals, cfg.fit_start, end)?))
        }
    };
    let fit = fit_if_nonzero(&e.weighted)?;
    let natural_fit = fit_if_nonzero(&e.natural)?;
    let envelope = match &fit {
        Some(f) => Some(envelope_constant(&rec.times, &e.weighted, f.rate)?),
        None => None,
    };
    Ok(Scores { weighted: e.weighted, natural: e.natural, fit, natural_fit, envelope })
}

/// Re-reads a trajectory CSV and scores it as [`simulate`] does.
pub fn rescore_trajectory(cfg: &RunConfig, text: &str) -> Result<Scores, CliError> {
    let rec = read_trajectory_csv(text)?;
    if rec.states.first().map(|s| s.modes()) != Some(cfg.system.modes()) {
        return Err(CliError::Config("trajectory and configuration disagree on N".into()));
    }
    score(cfg, &rec)
}

pub fn simulate(cfg: &RunConfig) -> Result<Report, CliError> {
    check_degeneracy(&cfg.system)?;
    let syn = synthesis(cfg)?;
    let rec = integrate(&syn.system, &cfg.initial, cfg.t_end, cfg.dt, cfg.integrator)?;
    let scores = score(cfg, &rec)?;

    let mut out = Outputs::default();
    out.add("trajectory.csv", trajectory_csv(&rec));
    let header = ["time", "E_weighted", "E_natural"].map(String::from);
    let rows = (0..rec.len()).map(|i| vec![rec.times[i], scores.weighted[i], scores.natural[i]]);
    out.add("energy.csv", csv(&header, rows));
    let header = ["time", "string_mid", "beam_mid"].map(String::from);
    let half = std::f64::consts::FRAC_PI_2;
    let rows = rec.times.iter().zip(&rec.states).map(|(&t, s)| vec![t, trace(&s.a, half), trace(&s.b, half)]);
    out.add("midpoint.csv", csv(&header, rows));

    let spec = syn.gramian.spec();
    let last = rec.len() - 1;
    let summary = SimulateJson {
        command: "simulate",
        n: cfg.system.modes(),
        omega: spec.omega,
        s: spec.horizon,
        kind: spec.kind.name(),
        sign: syn.feedback.sign().value() as i32,
        abscissa: syn.abscissa,
        integrator: cfg.integrator.name(),
        t_end: rec.times[last],
        dt: cfg.dt,
        energy_space: cfg.energy_space.name(),
        initial: cfg.initial_name.clone(),
        fit_start: cfg.fit_start,
        fit_end: cfg.fit_end.min(rec.times[last]),
        fitted_rate: scores.fit.map(|f| f.rate),
        fit_intercept: scores.fit.map(|f| f.intercept),
        fit_residual: scores.fit.map(|f| f.residual),
        natural_fitted_rate: scores.natural_fit.map(|f| f.rate),
        envelope_m: scores.envelope,
        initial_weighted_energy: scores.weighted[0],
        initial_natural_energy: scores.natural[0],
        final_weighted_energy: scores.weighted[last],
        final_natural_energy: scores.natural[last],
        warnings: syn.warnings.clone(),
    };
    Ok(Report::new("simulate.json", summary, out, syn.warnings))
}

#[derive(Serialize)]
struct ControlJson {
    command: &'static str,
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "T")]
    t: f64,
    residual: f64,
    relative_residual: f64,
    control_energy: f64,
    condition: f64,
    numerically_singular: bool,
    min_eigenvalue: f64,
    samples: usize,
    warnings: Vec<String>,
}

pub fn control(cfg: &RunConfig) -> Result<Report, CliError> {
    check_degeneracy(&cfg.system)?;
    let hum = hum_control(&cfg.system, cfg.t, &cfg.initial, &cfg.target_state(), cfg.dt)?;
    let mut out = Outputs::default();
    let header = ["time", "v1", "v2"].map(String::from);
    let rows = (0..hum.times.len()).map(|i| vec![hum.times[i], hum.v1[i], hum.v2[i]]);
    out.add("control.csv", csv(&header, rows));
    let summary = ControlJson {
        command: "control",
        n: cfg.system.modes(),
        t: cfg.t,
        residual: hum.residual,
        relative_residual: hum.relative_residual,
        control_energy: hum.control_energy,
        condition: reported_condition(hum.condition).0,
        numerically_singular: reported_condition(hum.condition).1,
        min_eigenvalue: hum.min_eigenvalue,
        samples: hum.times.len(),
        warnings: hum.warnings.clone(),
    };
    Ok(Report::new("control.json", summary, out, hum.warnings))
}

#[derive(Serialize)]
struct ObservabilityJson {
    command: &'static str,
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "T")]
    t: f64,
    adjoint_mode: &'static str,
    c_min: f64,
    c_max: f64,
    off_diagonal: f64,
}

pub fn observability(cfg: &RunConfig) -> Result<Report, CliError> {
    check_degeneracy(&cfg.system)?;
    let r = observability_constants(&cfg.system, cfg.t, cfg.adjoint_mode)?;
    let summary = ObservabilityJson {
        command: "observability",
        n: cfg.system.modes(),
        t: r.horizon,
        adjoint_mode: cfg.adjoint_mode.name(),
        c_min: r.c_min,
        c_max: r.c_max,
        off_diagonal: r.off_diagonal,
    };
    let mut warnings = Vec::new();
    if r.c_min <= 0.0 || r.c_min.is_nan() {
        warnings.push(format!("lower observability constant {:e} is not positive", r.c_min));
    }
    Ok(Report::new("observability.json", summary, Outputs::default(), warnings))
}

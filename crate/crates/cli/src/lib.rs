//! Configuration, orchestration and report formatting behind the `idstab` binary.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;

use idstab::cutoff_check::{InconclusiveReason, RootCount, Verdict};
use idstab::encirclement::{
    full_pipeline, start_value, CountOptions, CountingRule, PipelineError, PipelineOptions,
};
use idstab::freq_transform::build_frequency_model;
use idstab::inclusion_band::sweep;
use idstab::kernel_model::{
    validate, ConcreteSplineKernel, KernelDescription, ModelError, SplineKernelBounds,
};
use idstab::oracle::{nyquist_winding, simulate, verify_inclusions, InclusionReport, OracleError};
use idstab::trig_roots::{f_coefficients, roots_in_0_pi, RootError, RootOptions, RootSet};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const EXIT_STABLE: i32 = 0;
pub const EXIT_UNSTABLE: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_ERROR: i32 = 4;

pub const MIN_GRID_POINTS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub tol_circle: f64,
    pub tol_cluster: f64,
    pub tol_coeff: f64,
    pub tol_v: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let r = RootOptions::default();
        Self {
            tol_circle: r.tol_circle,
            tol_cluster: r.tol_cluster,
            tol_coeff: r.tol_coeff,
            tol_v: CountOptions::default().tol_v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Text,
    Structured,
}

fn default_grid_points() -> usize {
    idstab::cutoff_check::DEFAULT_GRID_POINTS
}

fn default_true() -> bool {
    true
}

/// Everything one invocation needs. `system` is kept as the raw description so
/// that a config serializes back to itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: KernelDescription,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    #[serde(default = "default_true")]
    pub cluster: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_format: OutputFormat,
    #[serde(default)]
    pub rule: CountingRule,
}

impl RunConfig {
    pub fn new(system: KernelDescription) -> Self {
        Self {
            system,
            tolerances: Tolerances::default(),
            grid_points: default_grid_points(),
            cluster: true,
            seed: 0,
            output_format: OutputFormat::Text,
            rule: CountingRule::Distinct,
        }
    }

    pub fn from_model(model: &SplineKernelBounds) -> Self {
        Self::new(model.to_description())
    }

    pub fn model(&self) -> Result<SplineKernelBounds, ConfigError> {
        validate(&self.system).map_err(ConfigError::Validation)
    }

    pub fn root_options(&self) -> RootOptions {
        RootOptions {
            tol_circle: self.tolerances.tol_circle,
            tol_cluster: self.tolerances.tol_cluster,
            tol_coeff: self.tolerances.tol_coeff,
            cluster: self.cluster,
        }
    }

    pub fn pipeline_options(&self) -> PipelineOptions {
        PipelineOptions {
            grid_points: self.grid_points,
            roots: self.root_options(),
            count: CountOptions {
                rule: self.rule,
                tol_v: self.tolerances.tol_v,
                ..CountOptions::default()
            },
            ..PipelineOptions::default()
        }
    }

    fn check_ranges(&self) -> Result<(), ConfigError> {
        let t = &self.tolerances;
        for (name, v) in [
            ("tol_circle", t.tol_circle),
            ("tol_cluster", t.tol_cluster),
            ("tol_coeff", t.tol_coeff),
            ("tol_v", t.tol_v),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ConfigError::Invalid(format!(
                    "tolerances.{name} must be positive (got {v})"
                )));
            }
        }
        if self.grid_points < MIN_GRID_POINTS {
            return Err(ConfigError::Invalid(format!(
                "grid_points must be at least {MIN_GRID_POINTS} (got {})",
                self.grid_points
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid system: {0}")]
    Validation(ModelError),
    #[error("{0}")]
    Invalid(String),
}

/// Parses and validates a config document.
pub fn parse_config_str(text: &str) -> Result<RunConfig, ConfigError> {
    let cfg: RunConfig = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    cfg.check_ranges()?;
    cfg.model()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config_str(&text)
}

pub fn serialize(cfg: &RunConfig) -> String {
    serde_json::to_string_pretty(cfg).expect("configs always serialize")
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            _ => EXIT_ERROR,
        }
    }
}

pub fn exit_code(v: &Verdict) -> i32 {
    match v {
        Verdict::RobustStable => EXIT_STABLE,
        Verdict::Unstable { .. } => EXIT_UNSTABLE,
        Verdict::Inconclusive { .. } => EXIT_INCONCLUSIVE,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RootRow {
    pub x: f64,
    pub multiplicity: usize,
    pub value: f64,
    pub appended: bool,
}

/// Structured result of `check`. Every key is always present; absent values are null.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub verdict: &'static str,
    /// Number of unstable roots when known exactly.
    pub zeta: Option<usize>,
    /// Set when only "an odd multiple of n" is known.
    pub zeta_odd_multiple_of: Option<usize>,
    pub reason: Option<&'static str>,
    pub decided_at_step: u32,
    pub n: usize,
    pub rho_t: f64,
    pub omega_bar: Option<f64>,
    pub min_margin: Option<f64>,
    pub worst_omega: Option<f64>,
    pub grid_points: usize,
    pub trace_m_hat_zero: f64,
    pub alpha: Option<usize>,
    pub roots: Vec<RootRow>,
    pub zeta_closed_form: Option<usize>,
    pub zeta_iterative: Option<usize>,
    pub rounds: Option<usize>,
    pub updates: Option<usize>,
    pub degenerate_polynomial: bool,
    pub rule: CountingRule,
}

fn reason_label(r: InconclusiveReason) -> &'static str {
    match r {
        InconclusiveReason::RhoTooLarge => "rho-too-large",
        InconclusiveReason::PlusOneInBand => "plus-one-in-band",
        InconclusiveReason::CriticalTangency => "critical-tangency",
    }
}

pub fn run_check(cfg: &RunConfig) -> Result<(CheckReport, i32), CliError> {
    let model = cfg.model()?;
    let out = full_pipeline(&model, &cfg.pipeline_options())?;
    let d = &out.diagnostics;
    let (zeta, odd, reason) = match out.verdict {
        Verdict::RobustStable => (Some(0), None, None),
        Verdict::Unstable {
            zeta: RootCount::Exact(z),
        } => (Some(z), None, None),
        Verdict::Unstable {
            zeta: RootCount::OddMultipleOf(n),
        } => (None, Some(n), None),
        Verdict::Inconclusive { reason } => (None, None, Some(reason_label(reason))),
    };
    let roots = match &d.roots {
        Some(set) => {
            let fm = build_frequency_model(&model);
            root_rows(&fm, set)
        }
        None => Vec::new(),
    };
    let report = CheckReport {
        verdict: out.verdict.label(),
        zeta,
        zeta_odd_multiple_of: odd,
        reason,
        decided_at_step: d.decided_at.number(),
        n: model.n(),
        rho_t: d.rho_t,
        omega_bar: d.cutoff.as_ref().map(|c| c.omega_bar),
        min_margin: d.cutoff.as_ref().map(|c| c.min_margin),
        worst_omega: d.cutoff.as_ref().map(|c| c.worst_omega),
        grid_points: cfg.grid_points,
        trace_m_hat_zero: d.trace_m_hat_zero,
        alpha: d.roots.as_ref().map(|r| r.alpha()),
        roots,
        zeta_closed_form: d.zeta_theorem3,
        zeta_iterative: d.zeta_iterative,
        rounds: d.algorithm.as_ref().map(|a| a.rounds.len()),
        updates: d.algorithm.as_ref().map(|a| a.total_updates()),
        degenerate_polynomial: d.degenerate_polynomial,
        rule: cfg.rule,
    };
    Ok((report, exit_code(&out.verdict)))
}

fn root_rows(fm: &idstab::freq_transform::FrequencyModel, set: &RootSet) -> Vec<RootRow> {
    let h = fm.source().step();
    let n = fm.n() as f64;
    set.roots
        .iter()
        .map(|r| RootRow {
            x: r.x,
            multiplicity: r.multiplicity,
            value: if r.x == 0.0 {
                start_value(fm)
            } else {
                fm.m_hat_at(r.x / h).trace().re / n
            },
            appended: r.appended,
        })
        .collect()
}

pub fn render_text(r: &CheckReport) -> String {
    let mut s = String::new();
    let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.6}"));
    let _ = writeln!(s, "verdict: {}", r.verdict);
    match (r.zeta, r.zeta_odd_multiple_of, r.reason) {
        (Some(z), _, _) if r.verdict == "unstable" => {
            let _ = writeln!(s, "unstable roots: {z}");
        }
        (_, Some(n), _) => {
            let _ = writeln!(s, "unstable roots: an odd multiple of {n}");
        }
        (_, _, Some(reason)) => {
            let _ = writeln!(s, "reason: {reason}");
        }
        _ => {}
    }
    match r.alpha {
        Some(a) if r.decided_at_step == 5 => {
            let _ = writeln!(s, "decided at step 5 (alpha = {a})");
        }
        _ => {
            let _ = writeln!(s, "decided at step {}", r.decided_at_step);
        }
    }
    let _ = writeln!(s, "rho(T): {:.6}", r.rho_t);
    let _ = writeln!(s, "omega_bar: {}", opt(r.omega_bar));
    let _ = writeln!(
        s,
        "min margin: {} (grid {})",
        opt(r.min_margin),
        r.grid_points
    );
    let _ = writeln!(s, "tr M(0): {:.6}", r.trace_m_hat_zero);
    if let Some(a) = r.alpha {
        let _ = writeln!(s, "alpha: {a}");
        for row in &r.roots {
            let _ = writeln!(
                s,
                "  x = {:.9}  multiplicity {}  X = {:.9}{}",
                row.x,
                row.multiplicity,
                row.value,
                if row.appended { "  (appended)" } else { "" }
            );
        }
    }
    if let (Some(a), Some(b)) = (r.zeta_closed_form, r.zeta_iterative) {
        let _ = writeln!(s, "zeta: closed form {a}, iterative {b}");
    }
    if let (Some(rounds), Some(u)) = (r.rounds, r.updates) {
        let _ = writeln!(s, "rounds: {rounds}, updates: {u}");
    }
    s
}

/// One rectangle per frequency, uniformly spaced over `[omega_min, omega_max]`.
pub fn emit_band(
    cfg: &RunConfig,
    omega_min: f64,
    omega_max: f64,
    samples: usize,
    out: &mut impl Write,
) -> Result<usize, CliError> {
    let fm = build_frequency_model(&cfg.model()?);
    let omegas: Vec<f64> = match samples {
        0 => Vec::new(),
        1 => vec![omega_min],
        k => (0..k)
            .map(|i| omega_min + (omega_max - omega_min) * i as f64 / (k - 1) as f64)
            .collect(),
    };
    writeln!(out, "omega,re_center,im_center,half_width_re,half_width_im")?;
    for r in sweep(&fm, &omegas) {
        writeln!(
            out,
            "{:.14e},{:.14e},{:.14e},{:.14e},{:.14e}",
            r.omega, r.center.re, r.center.im, r.half_width_re, r.half_width_im
        )?;
    }
    Ok(omegas.len())
}

/// Crossover roots with their values, the appended origin included.
pub fn emit_roots(cfg: &RunConfig, out: &mut impl Write) -> Result<usize, CliError> {
    let fm = build_frequency_model(&cfg.model()?);
    let set = match roots_in_0_pi(&f_coefficients(&fm), &cfg.root_options()) {
        Ok(s) => s,
        Err(RootError::DegenerateZeroPolynomial) => RootSet::origin_only(),
    };
    let rows = root_rows(&fm, &set);
    writeln!(out, "x,multiplicity,X,source")?;
    for r in &rows {
        writeln!(
            out,
            "{:.14e},{},{:.14e},{}",
            r.x,
            r.multiplicity,
            r.value,
            if r.appended { "appended" } else { "companion" }
        )?;
    }
    Ok(rows.len())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    /// Clockwise encirclements by the midpoint kernel's loci; null when degenerate.
    pub midpoint_winding: Option<i64>,
    pub midpoint_min_distance: Option<f64>,
    pub midpoint_growth_rate: f64,
    pub inclusions: InclusionReport,
    pub seed: u64,
}

pub fn run_oracle(
    cfg: &RunConfig,
    kernels: usize,
    frequencies: usize,
) -> Result<(OracleReport, i32), CliError> {
    let model = cfg.model()?;
    let mid = ConcreteSplineKernel::new(model.degree(), model.step(), model.midpoint())
        .map_err(ConfigError::Validation)?;
    let (winding, dist) = match nyquist_winding(&mid, 0.0, cfg.grid_points) {
        Ok(w) => (Some(w.winding), Some(w.min_distance_to_one)),
        Err(OracleError::Degenerate { distance, .. }) => (None, Some(distance)),
        Err(e) => return Err(e.into()),
    };
    let n = model.n();
    let t = simulate(
        &mid,
        |_| vec![1.0; n],
        model.step() / 16.0,
        40.0 * model.tau_bar(),
    )?;
    let inclusions = verify_inclusions(&model, kernels, frequencies, cfg.seed);
    let clean = inclusions.square_violations == 0 && inclusions.rectangle_violations == 0;
    Ok((
        OracleReport {
            midpoint_winding: winding,
            midpoint_min_distance: dist,
            midpoint_growth_rate: t.growth_rate,
            inclusions,
            seed: cfg.seed,
        },
        if clean { EXIT_STABLE } else { EXIT_UNSTABLE },
    ))
}

pub fn render_oracle_text(r: &OracleReport) -> String {
    let mut s = String::new();
    match r.midpoint_winding {
        Some(w) => {
            let _ = writeln!(s, "midpoint winding about +1: {w}");
        }
        None => {
            let _ = writeln!(s, "midpoint winding about +1: degenerate (locus meets +1)");
        }
    }
    let _ = writeln!(s, "midpoint growth rate: {:.6}", r.midpoint_growth_rate);
    let i = &r.inclusions;
    let _ = writeln!(
        s,
        "kernels: {}, frequencies: {} (seed {})",
        i.kernels, i.frequencies, r.seed
    );
    let _ = writeln!(s, "square violations: {}", i.square_violations);
    let _ = writeln!(s, "rectangle violations: {}", i.rectangle_violations);
    let _ = writeln!(s, "eigen box violations: {}", i.eigen_box_violations);
    s
}

/// JSON for structured output; non-finite numbers become null.
pub fn to_structured<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("reports always serialize")
}

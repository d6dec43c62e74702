//! Counting encirclements of `+1` by the band centers from their real-axis
//! crossovers, and the end-to-end certification pipeline.
//!
//! Two counting rules are offered. [`CountingRule::Distinct`] walks the crossover
//! abscissae as a set: coincident consecutive abscissae (a root reflecting onto
//! itself at `π`, or the copies `2π - 0` and `2π + 0`) are one crossing, the
//! alternating sign runs over distinct crossings, the curve starts at the true
//! `Q_C(0)` and ends at the origin. [`CountingRule::Literal`] keeps every
//! duplicate and the `X_0 = 0` start exactly as the sequences are written down,
//! which reproduces the classic step-by-step traces but can drop encirclements
//! when duplicates shift the sign alternation.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cutoff_check::{
    check_plus_one_excluded, omega_bar, theorem2_trace_test, CutoffError, CutoffReport,
    InconclusiveReason, RootCount, TraceTest, Verdict, DEFAULT_GRID_POINTS,
};
use crate::freq_transform::{build_frequency_model, FrequencyModel};
use crate::kernel_model::SplineKernelBounds;
use crate::trig_roots::{f_coefficients, roots_in_0_pi, RootError, RootOptions, RootSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CountingRule {
    #[default]
    Distinct,
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CountOptions {
    pub rule: CountingRule,
    /// Relative threshold for `v_i < 0`; scaled by `1 + max X²`.
    pub tol_v: f64,
    /// Relative distance under which two abscissae coincide.
    pub tol_merge: f64,
}

impl Default for CountOptions {
    fn default() -> Self {
        Self {
            rule: CountingRule::Distinct,
            tol_v: 1e-9,
            tol_merge: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EncirclementError {
    #[error("jump counting did not terminate within {rounds} rounds")]
    NonTermination { rounds: usize },
    #[error("crossover value {value} at x = {x} lies on +1")]
    CriticalTangency { x: f64, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Cutoff(#[from] CutoffError),
    #[error(transparent)]
    Encirclement(#[from] EncirclementError),
    #[error("the kernel bounds' midpoint does not vanish past τ̄ (relative size {ratio:e}); the closed-form crossover analysis does not apply")]
    NonVanishingTail { ratio: f64 },
    #[error(
        "the two encirclement counters disagree: closed formula {theorem3}, iterative {iterative}"
    )]
    CounterDisagreement { theorem3: usize, iterative: usize },
    #[error(
        "trace test reports an odd multiple of n = {n} unstable roots but the count is {zeta}"
    )]
    TraceContradiction { zeta: usize, n: usize },
}

fn same_abscissa(a: f64, b: f64, tol: f64) -> bool {
    a.is_finite() && b.is_finite() && (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

/// `X_i = Re tr M̂(j x_i / h) / n` for the companion roots, in the given order.
pub fn base_values(fm: &FrequencyModel, roots: &RootSet) -> Vec<f64> {
    values_at(fm, &roots.crossings())
}

fn values_at(fm: &FrequencyModel, xs: &[f64]) -> Vec<f64> {
    let h = fm.source().step();
    let n = fm.n() as f64;
    xs.iter()
        .map(|&x| fm.m_hat_at(x / h).trace().re / n)
        .collect()
}

/// Value of the band center at `ω = 0`.
pub fn start_value(fm: &FrequencyModel) -> f64 {
    fm.m_hat_zero().trace() / fm.n() as f64
}

/// Extended crossover sequences and the terms of the signed sum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossoverData {
    pub rule: CountingRule,
    pub x: Vec<f64>,
    pub values: Vec<f64>,
    /// Base-root index (1-based) behind each extended entry; 0 for the start point.
    pub g: Vec<usize>,
    pub v: Vec<f64>,
    pub mu: Vec<f64>,
    /// Parity index used for each transition (equal to `i` under the literal rule).
    pub parity: Vec<usize>,
    /// Transitions that were skipped because both ends share an abscissa.
    pub merged: Vec<bool>,
    pub horizon: usize,
    pub alpha: usize,
    pub signed_sum: i64,
    /// Literal rule only: the sum differs when the `i = 0` term is dropped.
    pub range_disagreement: bool,
}

/// `J = 2α ⌈(max|X|^{1/(n0+1)} + 1) / 2⌉ + α`.
pub fn horizon(alpha: usize, values: &[f64], degree: u32) -> usize {
    if alpha == 0 {
        return 0;
    }
    let max = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let periods = ((max.powf(1.0 / (degree as f64 + 1.0)) + 1.0) / 2.0).ceil() as usize;
    2 * alpha * periods + alpha
}

/// Entries `1..=count` of the reflected and shifted root sequence.
pub fn extend(
    xs: &[f64],
    values: &[f64],
    degree: u32,
    count: usize,
) -> (Vec<f64>, Vec<f64>, Vec<usize>) {
    let alpha = xs.len();
    let mut x = Vec::with_capacity(count);
    let mut val = Vec::with_capacity(count);
    let mut gs = Vec::with_capacity(count);
    for i in 1..=count {
        let p = (i - 1) / alpha;
        let r = i - p * alpha;
        let odd = p % 2 == 1;
        let g = if odd { alpha + 1 - r } else { r };
        let xg = xs[g - 1];
        let sign = if odd { -1.0 } else { 1.0 };
        let xi = sign * xg + 2.0 * PI * p.div_ceil(2) as f64;
        let vi = if p == 0 {
            values[g - 1]
        } else if xg == 0.0 {
            0.0
        } else {
            (sign * xg / xi).powi(degree as i32 + 1) * values[g - 1]
        };
        x.push(xi);
        val.push(vi);
        gs.push(g);
    }
    (x, val, gs)
}

fn check_tangency(
    xs: &[f64],
    values: &[f64],
    start: f64,
    tol: f64,
) -> Result<(), EncirclementError> {
    let near = |v: f64| (v - 1.0).abs() <= tol * (1.0 + v.abs());
    if near(start) {
        return Err(EncirclementError::CriticalTangency {
            x: 0.0,
            value: start,
        });
    }
    for (&x, &v) in xs.iter().zip(values) {
        if near(v) {
            return Err(EncirclementError::CriticalTangency { x, value: v });
        }
    }
    Ok(())
}

fn sorted_pairs(xs: &[f64], values: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    (
        idx.iter().map(|&i| xs[i]).collect(),
        idx.iter().map(|&i| values[i]).collect(),
    )
}

fn sgn(v: f64) -> i64 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

/// Closed-form count over explicit crossovers (any order; sorted internally).
pub fn theorem3_zeta_at(
    fm: &FrequencyModel,
    xs: &[f64],
    values: &[f64],
    opts: &CountOptions,
) -> Result<(usize, CrossoverData), EncirclementError> {
    let n = fm.n();
    let degree = fm.source().degree();
    let start = match opts.rule {
        CountingRule::Distinct => start_value(fm),
        CountingRule::Literal => 0.0,
    };
    check_tangency(xs, values, start_value(fm), opts.tol_v)?;
    let (xs, values) = sorted_pairs(xs, values);
    let alpha = xs.len();
    let horizon = horizon(alpha, &values, degree);

    let mut x = vec![0.0];
    let mut val = vec![start];
    let mut g = vec![0];
    if alpha > 0 {
        let (ex, ev, eg) = extend(&xs, &values, degree, horizon + 1);
        x.extend(ex);
        val.extend(ev);
        g.extend(eg);
    }
    if opts.rule == CountingRule::Distinct {
        // the centers return to the origin as ω → ∞
        x.push(f64::INFINITY);
        val.push(0.0);
        g.push(0);
    }
    let max_sq = val.iter().fold(0.0f64, |m, v| m.max(v * v));
    let tol_v = opts.tol_v * (1.0 + max_sq);

    let terms = x.len() - 1;
    let mut v = Vec::with_capacity(terms);
    let mut mu = Vec::with_capacity(terms);
    let mut parity = Vec::with_capacity(terms);
    let mut merged = Vec::with_capacity(terms);
    let mut sum = 0i64;
    let mut sum_from_one = 0i64;
    let mut k = 0usize;
    for i in 0..terms {
        let vi = (val[i] - 1.0) * (val[i + 1] - 1.0);
        let mi = val[i + 1] - val[i];
        v.push(vi);
        mu.push(mi);
        let skip =
            opts.rule == CountingRule::Distinct && same_abscissa(x[i], x[i + 1], opts.tol_merge);
        merged.push(skip);
        let idx = match opts.rule {
            CountingRule::Distinct => k,
            CountingRule::Literal => i,
        };
        parity.push(idx);
        if skip {
            continue;
        }
        if vi < -tol_v {
            let term = if idx % 2 == 0 { sgn(mi) } else { -sgn(mi) };
            sum += term;
            if i >= 1 {
                sum_from_one += term;
            }
        }
        k += 1;
    }
    let range_disagreement =
        opts.rule == CountingRule::Literal && sum.abs() != sum_from_one.abs();
    let zeta = n * sum.unsigned_abs() as usize;
    Ok((
        zeta,
        CrossoverData {
            rule: opts.rule,
            x,
            values: val,
            g,
            v,
            mu,
            parity,
            merged,
            horizon,
            alpha,
            signed_sum: sum,
            range_disagreement,
        },
    ))
}

/// Closed-form count over the roots of a [`RootSet`].
pub fn theorem3_zeta(
    fm: &FrequencyModel,
    roots: &RootSet,
    opts: &CountOptions,
) -> Result<(usize, CrossoverData), EncirclementError> {
    let xs = roots.crossings();
    theorem3_zeta_at(fm, &xs, &values_at(fm, &xs), opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Jump {
    /// Position `i` of the transition `Z_i → Z_{i+1}` within the round.
    pub index: usize,
    pub ascent: bool,
    pub sign: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Round {
    /// `Z_0 … Z_α` as seen by the jump count of this round.
    pub z: Vec<f64>,
    pub abscissae: Vec<f64>,
    pub jumps: Vec<Jump>,
    /// `β` and `J'` in effect during the round.
    pub beta: i32,
    pub j_prime: usize,
    pub updates: usize,
    pub gamma_minus: bool,
    pub gamma_plus: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlgorithmTrace {
    pub rule: CountingRule,
    pub rounds: Vec<Round>,
    pub total_jumps: i64,
    /// Settled by the `α = 0` / `max|X| < 1` shortcut before any round.
    pub decided_early: bool,
}

impl AlgorithmTrace {
    pub fn total_updates(&self) -> usize {
        self.rounds.iter().map(|r| r.updates).sum()
    }
}

/// Iterative jump counting over crossovers in the order given. The literal rule
/// keeps that order; the distinct rule sorts first.
pub fn section4_algorithm_at(
    fm: &FrequencyModel,
    xs: &[f64],
    values: &[f64],
    opts: &CountOptions,
) -> Result<(usize, AlgorithmTrace), EncirclementError> {
    let n = fm.n();
    let degree = fm.source().degree();
    let exponent = degree as i32 + 1;
    let distinct = opts.rule == CountingRule::Distinct;
    check_tangency(xs, values, start_value(fm), opts.tol_v)?;
    let (xs, values) = if distinct {
        sorted_pairs(xs, values)
    } else {
        (xs.to_vec(), values.to_vec())
    };
    let alpha = xs.len();
    let start = if distinct { start_value(fm) } else { 0.0 };
    let base_max = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    let mut trace = AlgorithmTrace {
        rule: opts.rule,
        rounds: Vec::new(),
        total_jumps: 0,
        decided_early: false,
    };
    // step 5
    if alpha == 0 || base_max < 1.0 {
        if !distinct || start < 1.0 {
            trace.decided_early = true;
            return Ok((0, trace));
        }
        if alpha == 0 {
            // a start right of +1 and no crossing until the origin: one half-turn
            trace.total_jumps = -1;
            trace.decided_early = true;
            return Ok((n, trace));
        }
    }

    let max_sq = values
        .iter()
        .chain(std::iter::once(&start))
        .fold(0.0f64, |m, v| m.max(v * v));
    let tol_v = opts.tol_v * (1.0 + max_sq);
    let limit = 10 * horizon(alpha, &values, degree).max(1);

    let mut z = Vec::with_capacity(alpha + 1);
    z.push(start);
    z.extend_from_slice(&values);
    let mut a = Vec::with_capacity(alpha + 1);
    a.push(0.0);
    a.extend_from_slice(&xs);
    let mut beta: i32 = 1;
    let mut j_prime: usize = 1;
    let (mut gamma_minus, mut gamma_plus) = (false, false);
    let mut k = 0usize;

    loop {
        if trace.rounds.len() >= limit {
            return Err(EncirclementError::NonTermination { rounds: limit });
        }
        let snapshot = z.clone();
        let snapshot_a = a.clone();
        let (round_beta, round_j) = (beta, j_prime);
        // step 7
        let mut jumps = Vec::new();
        for i in 0..alpha {
            if distinct && same_abscissa(a[i], a[i + 1], opts.tol_merge) {
                continue;
            }
            let idx = if distinct {
                k
            } else {
                i + if beta == -1 { alpha } else { 0 }
            };
            if (z[i] - 1.0) * (z[i + 1] - 1.0) < -tol_v {
                let ascent = z[i + 1] > z[i];
                let even = idx % 2 == 0;
                let sign = if ascent == even { 1 } else { -1 };
                jumps.push(Jump {
                    index: i,
                    ascent,
                    sign,
                });
            }
            k += 1;
        }
        trace.total_jumps += jumps.iter().map(|j| j.sign).sum::<i64>();
        // step 8
        z[0] = z[alpha];
        a[0] = a[alpha];
        // step 9
        if beta == -1 {
            z[1..].reverse();
            a[1..].reverse();
        }
        // step 10
        let mut updates = 0;
        for i in 1..=alpha {
            let xi = xs[i - 1];
            let shifted = xi - 2.0 * PI * beta as f64 * j_prime as f64;
            a[i] = shifted.abs();
            if z[i].abs() > 1.0 {
                z[i] = if xi == 0.0 {
                    0.0
                } else {
                    values[i - 1] * (xi / shifted).powi(exponent)
                };
                updates += 1;
            }
        }
        // step 11
        if beta == 1 {
            z[1..].reverse();
            a[1..].reverse();
        }
        // steps 12-13
        beta = -beta;
        j_prime += ((1 + beta) / 2) as usize;
        // step 14
        if !z.iter().any(|&v| v > 1.0) {
            if beta == -1 {
                gamma_minus = true;
            } else {
                gamma_plus = true;
            }
        }
        trace.rounds.push(Round {
            z: snapshot,
            abscissae: snapshot_a,
            jumps,
            beta: round_beta,
            j_prime: round_j,
            updates,
            gamma_minus,
            gamma_plus,
        });
        // step 15
        if gamma_minus && gamma_plus {
            break;
        }
    }
    Ok((n * trace.total_jumps.unsigned_abs() as usize, trace))
}

/// Iterative jump counting over the roots of a [`RootSet`].
pub fn section4_algorithm(
    fm: &FrequencyModel,
    roots: &RootSet,
    opts: &CountOptions,
) -> Result<(usize, AlgorithmTrace), EncirclementError> {
    let xs = roots.crossings();
    section4_algorithm_at(fm, &xs, &values_at(fm, &xs), opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PipelineOptions {
    pub grid_points: usize,
    pub roots: RootOptions,
    pub count: CountOptions,
    /// Overrides the transform's low-frequency switch point.
    pub omega_switch: Option<f64>,
    /// After a positive trace test, continue to the exact count (distinct rule only).
    pub continue_after_trace_test: bool,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            grid_points: DEFAULT_GRID_POINTS,
            roots: RootOptions::default(),
            count: CountOptions::default(),
            omega_switch: None,
            continue_after_trace_test: true,
        }
    }
}

/// Where the verdict was settled, numbered after the algorithm's steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DecidedAt {
    /// `ρ{T}` gate.
    Step1,
    /// Exclusion of `+1` on `[0, ω̄]`.
    Step2,
    /// Trace test.
    Step3,
    /// No crossover beyond `+1` (`α = 0` or all `|X_i| < 1`).
    Step5,
    /// Full jump counting.
    Step15,
}

impl DecidedAt {
    pub fn number(&self) -> u32 {
        match self {
            DecidedAt::Step1 => 1,
            DecidedAt::Step2 => 2,
            DecidedAt::Step3 => 3,
            DecidedAt::Step5 => 5,
            DecidedAt::Step15 => 15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub rho_t: f64,
    pub cutoff: Option<CutoffReport>,
    pub trace_m_hat_zero: f64,
    pub trace_test: Option<TraceTest>,
    pub roots: Option<RootSet>,
    /// `y ≡ 0`: the centers never leave the real axis.
    pub degenerate_polynomial: bool,
    pub base_values: Vec<f64>,
    pub zeta_theorem3: Option<usize>,
    pub zeta_iterative: Option<usize>,
    pub crossover: Option<CrossoverData>,
    pub algorithm: Option<AlgorithmTrace>,
    pub decided_at: DecidedAt,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineOutcome {
    pub verdict: Verdict,
    pub diagnostics: Diagnostics,
}

/// The whole certification chain for a validated model.
pub fn full_pipeline(
    model: &SplineKernelBounds,
    opts: &PipelineOptions,
) -> Result<PipelineOutcome, PipelineError> {
    let mut fm = build_frequency_model(model);
    if let Some(w) = opts.omega_switch {
        fm = fm.with_omega_switch(w);
    }
    let mut diag = Diagnostics {
        rho_t: fm.rho_t(),
        cutoff: None,
        trace_m_hat_zero: fm.m_hat_zero().trace(),
        trace_test: None,
        roots: None,
        degenerate_polynomial: false,
        base_values: Vec::new(),
        zeta_theorem3: None,
        zeta_iterative: None,
        crossover: None,
        algorithm: None,
        decided_at: DecidedAt::Step1,
    };
    let done = |verdict, diagnostics| {
        Ok(PipelineOutcome {
            verdict,
            diagnostics,
        })
    };

    // step 1
    let report = match omega_bar(&fm) {
        Ok(r) => r,
        Err(CutoffError::RhoTooLarge { .. }) => {
            return done(
                Verdict::Inconclusive {
                    reason: InconclusiveReason::RhoTooLarge,
                },
                diag,
            )
        }
        Err(e) => return Err(e.into()),
    };
    if !fm.tail_vanishes() {
        return Err(PipelineError::NonVanishingTail {
            ratio: fm.tail_ratio(),
        });
    }
    // step 2
    let report = check_plus_one_excluded(&fm, report, opts.grid_points);
    let passed = report.passed;
    diag.cutoff = Some(report);
    diag.decided_at = DecidedAt::Step2;
    if !passed {
        return done(
            Verdict::Inconclusive {
                reason: InconclusiveReason::PlusOneInBand,
            },
            diag,
        );
    }
    // step 3
    let tt = theorem2_trace_test(&fm)?;
    diag.trace_test = Some(tt);
    diag.decided_at = DecidedAt::Step3;
    let n = fm.n();
    if tt == TraceTest::Unstable
        && !(opts.continue_after_trace_test && opts.count.rule == CountingRule::Distinct)
    {
        return done(
            Verdict::Unstable {
                zeta: RootCount::OddMultipleOf(n),
            },
            diag,
        );
    }
    // steps 4-5
    let poly = f_coefficients(&fm);
    let roots = match roots_in_0_pi(&poly, &opts.roots) {
        Ok(r) => r,
        Err(RootError::DegenerateZeroPolynomial) => {
            diag.degenerate_polynomial = true;
            RootSet::origin_only()
        }
    };
    let xs = roots.crossings();
    let values = values_at(&fm, &xs);
    diag.base_values = values.clone();
    diag.roots = Some(roots);

    let t3 = theorem3_zeta_at(&fm, &xs, &values, &opts.count);
    let it = section4_algorithm_at(&fm, &xs, &values, &opts.count);
    let ((z3, data), (z4, trace)) = match (t3, it) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(EncirclementError::CriticalTangency { .. }), _)
        | (_, Err(EncirclementError::CriticalTangency { .. })) => {
            diag.decided_at = DecidedAt::Step5;
            return done(
                Verdict::Inconclusive {
                    reason: InconclusiveReason::CriticalTangency,
                },
                diag,
            );
        }
        (Err(e), _) | (_, Err(e)) => return Err(e.into()),
    };
    diag.zeta_theorem3 = Some(z3);
    diag.zeta_iterative = Some(z4);
    diag.decided_at = if trace.decided_early {
        DecidedAt::Step5
    } else {
        DecidedAt::Step15
    };
    diag.crossover = Some(data);
    diag.algorithm = Some(trace);
    if z3 != z4 {
        return Err(PipelineError::CounterDisagreement {
            theorem3: z3,
            iterative: z4,
        });
    }
    if tt == TraceTest::Unstable && (z3 / n).is_multiple_of(2) {
        return Err(PipelineError::TraceContradiction { zeta: z3, n });
    }
    let verdict = if z3 == 0 {
        Verdict::RobustStable
    } else {
        Verdict::Unstable {
            zeta: RootCount::Exact(z3),
        }
    };
    done(verdict, diag)
}

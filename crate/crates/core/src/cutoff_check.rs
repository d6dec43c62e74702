//! Finite frequency cutoff, exclusion of `+1` from the band, the trace test
//! and the Gershgorin-type odd-count instability test.

use nalgebra::{Complex, DMatrix, SVD};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::freq_transform::{FrequencyModel, C64};
use crate::inclusion_band::band_rectangle;

pub const DEFAULT_GRID_POINTS: usize = 4096;

/// Relative tolerance for declaring `tr M̂(0) = n`.
const TRACE_TIE_RTOL: f64 = 1e-9;

/// Default eigenvector condition number above which the odd-count test declines.
pub const DEFAULT_DEFECTIVE_THRESHOLD: f64 = 1e8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CutoffError {
    #[error("ρ{{T}} = {rho_t} is not below 2: the uncertainty is too large for a conclusion")]
    RhoTooLarge { rho_t: f64 },
    #[error("tr M̂(0) = {trace} equals n = {n} although +1 was excluded from the band")]
    InconsistentState { trace: f64, n: usize },
    #[error("M̂(0) is numerically defective (eigenvector condition number {condition:e})")]
    Defective { condition: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum InconclusiveReason {
    /// `ρ{T} ≥ 2`.
    RhoTooLarge,
    /// `+1` is inside some inclusion rectangle on `[0, ω̄]`.
    PlusOneInBand,
    /// A crossover value sits on `+1` itself within tolerance.
    CriticalTangency,
}

/// Number of unstable roots attached to an `Unstable` verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RootCount {
    Exact(usize),
    /// Known only to be an odd multiple of the given `n`.
    OddMultipleOf(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    RobustStable,
    Unstable { zeta: RootCount },
    Inconclusive { reason: InconclusiveReason },
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::RobustStable => "robust-stable",
            Verdict::Unstable { .. } => "unstable",
            Verdict::Inconclusive { .. } => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CutoffReport {
    pub omega_bar: f64,
    #[serde(skip)]
    pub d_bar: DMatrix<f64>,
    #[serde(skip)]
    pub d_under: DMatrix<f64>,
    #[serde(skip)]
    pub d_tilde: DMatrix<f64>,
    pub d_scalar: f64,
    pub passed: bool,
    pub min_margin: f64,
    /// Grid frequency where `min_margin` was attained.
    pub worst_omega: f64,
    pub grid_points: usize,
}

fn factorial(n: u32) -> f64 {
    (1..=n).fold(1.0, |acc, i| acc * i as f64)
}

/// `ω̄` of the finite-range lemma; the grid fields are left unset.
pub fn omega_bar(fm: &FrequencyModel) -> Result<CutoffReport, CutoffError> {
    let rho_t = fm.rho_t();
    if rho_t >= 2.0 {
        return Err(CutoffError::RhoTooLarge { rho_t });
    }
    let n = fm.n();
    let nf = n as f64;
    let d = fm.d_seq();
    let d_bar = DMatrix::from_fn(n, n, |i, j| {
        d.iter()
            .map(|m| m[(i, j)])
            .fold(f64::NEG_INFINITY, f64::max)
    });
    let d_under = DMatrix::from_fn(n, n, |i, j| {
        d.iter().map(|m| m[(i, j)]).fold(f64::INFINITY, f64::min)
    });
    let d_tilde = &d_bar - &d_under;
    let traces = fm.d_traces();
    let tr_max = traces.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let tr_min = traces.iter().cloned().fold(f64::INFINITY, f64::min);
    let d_scalar = (tr_max - tr_min) / (2.0 * nf);
    let radicand = (&d_tilde * &d_tilde + d_tilde.transpose() * &d_tilde).trace();
    let degree = fm.source().degree();
    let knots = fm.source().knots() as f64;
    let inner = factorial(degree) * (1.0 + knots) / (4.0 - 2.0 * rho_t)
        * (2.0 * d_scalar + ((2.0 * nf - 1.0) / nf * radicand).max(0.0).sqrt());
    let omega_bar = inner.powf(1.0 / (degree as f64 + 1.0));
    Ok(CutoffReport {
        omega_bar,
        d_bar,
        d_under,
        d_tilde,
        d_scalar,
        passed: false,
        min_margin: f64::NAN,
        worst_omega: f64::NAN,
        grid_points: 0,
    })
}

/// Samples the exclusion conditions on a uniform endpoint-inclusive grid over `[0, ω̄]`.
pub fn check_plus_one_excluded(
    fm: &FrequencyModel,
    report: CutoffReport,
    grid_points: usize,
) -> CutoffReport {
    let g = grid_points.max(2);
    let step = report.omega_bar / (g - 1) as f64;
    let (min_margin, worst_omega) = (0..g)
        .into_par_iter()
        .map(|i| {
            let w = if i == g - 1 {
                report.omega_bar
            } else {
                i as f64 * step
            };
            (band_rectangle(fm, w).exclusion_margin(), w)
        })
        .reduce(
            || (f64::INFINITY, f64::NAN),
            |a, b| {
                if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) {
                    b
                } else {
                    a
                }
            },
        );
    CutoffReport {
        passed: min_margin > 0.0,
        min_margin,
        worst_omega,
        grid_points: g,
        ..report
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TraceTest {
    /// `tr M̂(0) > n`: an odd multiple of `n` unstable roots.
    Unstable,
    Proceed,
}

pub fn theorem2_trace_test(fm: &FrequencyModel) -> Result<TraceTest, CutoffError> {
    let n = fm.n();
    let trace = fm.m_hat_zero().trace();
    let nf = n as f64;
    if (trace - nf).abs() <= TRACE_TIE_RTOL * nf {
        Err(CutoffError::InconsistentState { trace, n })
    } else if trace > nf {
        Ok(TraceTest::Unstable)
    } else {
        Ok(TraceTest::Proceed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RadiusRule {
    RowSums,
    ColumnSums,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GershgorinCircle {
    pub center: C64,
    pub radius: f64,
}

impl GershgorinCircle {
    /// Half-width of the chord the circle cuts on the real axis, if any.
    fn chord(&self) -> Option<f64> {
        let d = self.radius * self.radius - self.center.im * self.center.im;
        (d >= 0.0).then(|| d.sqrt())
    }

    fn meets_right_ray(&self) -> bool {
        self.chord().is_some_and(|c| self.center.re + c > 1.0)
    }

    fn meets_closed_left_ray(&self) -> bool {
        self.chord().is_some_and(|c| self.center.re - c <= 1.0)
    }

    fn overlaps(&self, other: &Self) -> bool {
        (self.center - other.center).norm() <= self.radius + other.radius
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Theorem1Outcome {
    Unstable,
    NoConclusion,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Theorem1Report {
    pub outcome: Theorem1Outcome,
    pub circles: Vec<GershgorinCircle>,
    /// Circles in the connected union that touches `{x > 1}`.
    pub joined: Vec<usize>,
    pub condition: f64,
}

/// Eigenvalues and eigenvectors of a real matrix with the condition number of the
/// eigenvector matrix; repeated eigenvalues take a basis of the numerical null space.
fn eigen_decomposition(a: &DMatrix<f64>) -> (Vec<C64>, DMatrix<C64>, f64) {
    let n = a.nrows();
    let ac = a.map(|v| Complex::new(v, 0.0));
    let mut vals: Vec<C64> = a.complex_eigenvalues().iter().cloned().collect();
    vals.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    let scale = a.norm().max(1.0);
    let mut v = DMatrix::<C64>::zeros(n, n);
    let mut col = 0;
    let mut i = 0;
    let mut defective = false;
    while i < n {
        // group numerically equal eigenvalues
        let mut g = 1;
        while i + g < n && (vals[i + g] - vals[i]).norm() <= 1e-8 * scale {
            g += 1;
        }
        let lambda = vals[i..i + g].iter().sum::<C64>() / g as f64;
        let shifted = &ac - DMatrix::<C64>::identity(n, n) * lambda;
        let svd = SVD::new(shifted, false, true);
        let v_t = svd.v_t.expect("right singular vectors requested");
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&p, &q| svd.singular_values[p].total_cmp(&svd.singular_values[q]));
        // fewer null directions than the multiplicity: a Jordan block
        if svd.singular_values[order[g - 1]] > 1e-8 * scale {
            defective = true;
        }
        for &r in order.iter().take(g) {
            let row = v_t.row(r);
            for k in 0..n {
                v[(k, col)] = row[k].conj();
            }
            col += 1;
        }
        i += g;
    }
    let sv = SVD::new(v.clone(), false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let condition = if smin > 0.0 && !defective {
        smax / smin
    } else {
        f64::INFINITY
    };
    (vals, v, condition)
}

/// Odd-count instability test at `ω = 0`. Off the main algorithm.
///
/// The circles that form a connected union touching the ray `{x > 1}` must not
/// reach `{x ≤ 1}` on the real axis; their number (one per eigenvalue) must be odd.
pub fn theorem1_odd_instability(
    fm: &FrequencyModel,
    rule: RadiusRule,
    defective_threshold: f64,
) -> Result<Theorem1Report, CutoffError> {
    let n = fm.n();
    let (vals, v, condition) = eigen_decomposition(fm.m_hat_zero());
    if !(condition <= defective_threshold) {
        return Err(CutoffError::Defective { condition });
    }
    let v_inv = v
        .clone()
        .try_inverse()
        .ok_or(CutoffError::Defective { condition })?;
    let abs_inv = v_inv.map(|z| z.norm());
    let abs_v = v.map(|z| z.norm());
    // the Jordan part minus the diagonal vanishes for a diagonalizable matrix
    let r = &abs_inv * fm.m_tilde() * &abs_v;
    let circles: Vec<GershgorinCircle> = (0..n)
        .map(|i| GershgorinCircle {
            center: vals[i],
            radius: match rule {
                RadiusRule::RowSums => r.row(i).sum(),
                RadiusRule::ColumnSums => r.column(i).sum(),
            },
        })
        .collect();

    // connected components of overlapping circles
    let mut comp: Vec<usize> = (0..n).collect();
    fn find(c: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while c[r] != r {
            r = c[r];
        }
        c[i] = r;
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            if circles[i].overlaps(&circles[j]) {
                let (a, b) = (find(&mut comp, i), find(&mut comp, j));
                comp[a] = b;
            }
        }
    }
    let roots: Vec<usize> = (0..n).map(|i| find(&mut comp, i)).collect();
    let touching: Vec<usize> = (0..n)
        .filter(|&i| circles[i].meets_right_ray())
        .map(|i| roots[i])
        .collect();
    let joined: Vec<usize> = (0..n).filter(|&i| touching.contains(&roots[i])).collect();
    let disjoint = joined.iter().all(|&i| !circles[i].meets_closed_left_ray());
    let outcome = if disjoint && joined.len() % 2 == 1 {
        Theorem1Outcome::Unstable
    } else {
        Theorem1Outcome::NoConclusion
    };
    Ok(Theorem1Report {
        outcome,
        circles,
        joined,
        condition,
    })
}

//! Uncertain kernel description: spline bound tensors, the truncated-power
//! basis and validation of untrusted input.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance used when a caller supplies the delay horizon explicitly.
const HORIZON_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("knot spacing h must be positive and finite (got {0})")]
    NonPositiveStep(f64),
    #[error("number of knots N must be at least 1")]
    ZeroKnots,
    #[error("shape mismatch in `{field}`: {detail}")]
    ShapeMismatch { field: &'static str, detail: String },
    #[error("non-finite coefficient in `{field}` at ({i}, {j}, {k})")]
    NonFinite {
        field: &'static str,
        i: usize,
        j: usize,
        k: usize,
    },
    #[error("b_lower > b_upper at ({i}, {j}, {k}): {lower} > {upper}")]
    BoundOrderViolation {
        i: usize,
        j: usize,
        k: usize,
        lower: f64,
        upper: f64,
    },
    #[error("delay horizon {given} differs from N*h = {derived}")]
    HorizonMismatch { given: f64, derived: f64 },
    #[error("entry ({i}, {j}) out of range for dimension {n}")]
    IndexOutOfRange { i: usize, j: usize, n: usize },
    #[error("time {tau} outside the kernel support [0, {tau_bar}]")]
    TimeOutOfRange { tau: f64, tau_bar: f64 },
}

/// Which bounding spline to read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Upper,
    Lower,
}

/// Untrusted system description as it arrives from a config file.
///
/// Tensors are indexed `[row][col][knot]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelDescription {
    pub n: usize,
    pub n0: u32,
    pub h: f64,
    #[serde(rename = "N")]
    pub knots: usize,
    pub b_upper: Vec<Vec<Vec<f64>>>,
    pub b_lower: Vec<Vec<Vec<f64>>>,
    /// Optional explicit horizon, checked against `N*h`. Never serialized.
    #[serde(skip)]
    pub tau_bar: Option<f64>,
}

/// Dense `n x n x N` coefficient tensor, knot index fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    n: usize,
    knots: usize,
    data: Vec<f64>,
}

impl Coefficients {
    pub fn zeros(n: usize, knots: usize) -> Self {
        Self {
            n,
            knots,
            data: vec![0.0; n * n * knots],
        }
    }

    /// Builds a tensor from `f(i, j, k)`.
    pub fn from_fn(n: usize, knots: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n * knots);
        for i in 0..n {
            for j in 0..n {
                for k in 0..knots {
                    data.push(f(i, j, k));
                }
            }
        }
        Self { n, knots, data }
    }

    fn from_nested(
        field: &'static str,
        n: usize,
        knots: usize,
        t: &[Vec<Vec<f64>>],
    ) -> Result<Self, ModelError> {
        if t.len() != n {
            return Err(ModelError::ShapeMismatch {
                field,
                detail: format!("expected {n} rows, found {}", t.len()),
            });
        }
        let mut data = Vec::with_capacity(n * n * knots);
        for (i, row) in t.iter().enumerate() {
            if row.len() != n {
                return Err(ModelError::ShapeMismatch {
                    field,
                    detail: format!("row {i}: expected {n} columns, found {}", row.len()),
                });
            }
            for (j, entry) in row.iter().enumerate() {
                if entry.len() != knots {
                    return Err(ModelError::ShapeMismatch {
                        field,
                        detail: format!(
                            "entry ({i}, {j}): expected {knots} knot coefficients, found {}",
                            entry.len()
                        ),
                    });
                }
                for (k, &v) in entry.iter().enumerate() {
                    if !v.is_finite() {
                        return Err(ModelError::NonFinite { field, i, j, k });
                    }
                    data.push(v);
                }
            }
        }
        Ok(Self { n, knots, data })
    }

    pub fn to_nested(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.entry(i, j).to_vec()).collect())
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn knots(&self) -> usize {
        self.knots
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.n + j) * self.knots + k]
    }

    /// The knot coefficients of entry `(i, j)`.
    pub fn entry(&self, i: usize, j: usize) -> &[f64] {
        let start = (i * self.n + j) * self.knots;
        &self.data[start..start + self.knots]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Elementwise combination of two tensors of equal shape.
    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!((self.n, self.knots), (other.n, other.knots));
        Self {
            n: self.n,
            knots: self.knots,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            n: self.n,
            knots: self.knots,
            data: self.data.iter().map(|&a| f(a)).collect(),
        }
    }
}

/// `u^p H(u)` with `0^0 = 1` (right-continuous jump).
#[inline]
fn truncated_power(u: f64, degree: u32) -> f64 {
    if u < 0.0 {
        0.0
    } else if degree == 0 {
        1.0
    } else {
        u.powi(degree as i32)
    }
}

/// `a^p - b^p` for `a >= b >= 0` without subtractive cancellation.
pub(crate) fn power_difference(a: f64, b: f64, p: u32) -> f64 {
    if p == 0 {
        return 0.0;
    }
    let d = a - b;
    let mut s = 0.0;
    for m in 0..p {
        s += a.powi(m as i32) * b.powi((p - 1 - m) as i32);
    }
    d * s
}

/// Truncated-power basis function `p_{n0,k}(τ)`.
pub fn eval_basis(degree: u32, k: usize, h: f64, tau: f64) -> f64 {
    let a = tau - k as f64 * h;
    let b = a - h;
    if b >= 0.0 {
        // both powers active: use the cancellation-free difference
        if degree == 0 {
            0.0
        } else {
            power_difference(a, b, degree)
        }
    } else {
        truncated_power(a, degree)
    }
}

/// Exact integral of `p_{n0,k}` over `[0, N h]`.
pub fn integrate_basis(degree: u32, k: usize, h: f64, knots: usize) -> f64 {
    debug_assert!(k < knots);
    let p = degree + 1;
    let a = (knots - k) as f64;
    let b = (knots - k - 1) as f64;
    h.powi(p as i32) * power_difference(a, b, p) / p as f64
}

/// Validated uncertain system: spline bounds on every kernel entry.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineKernelBounds {
    degree: u32,
    step: f64,
    upper: Coefficients,
    lower: Coefficients,
}

impl SplineKernelBounds {
    /// Checks shapes, finiteness and coefficientwise ordering.
    pub fn new(
        degree: u32,
        step: f64,
        upper: Coefficients,
        lower: Coefficients,
    ) -> Result<Self, ModelError> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(ModelError::NonPositiveStep(step));
        }
        if upper.knots == 0 || lower.knots == 0 {
            return Err(ModelError::ZeroKnots);
        }
        if upper.n == 0 {
            return Err(ModelError::ShapeMismatch {
                field: "n",
                detail: "state dimension must be at least 1".into(),
            });
        }
        if (upper.n, upper.knots) != (lower.n, lower.knots) {
            return Err(ModelError::ShapeMismatch {
                field: "b_lower",
                detail: format!(
                    "upper is {}x{}x{}, lower is {}x{}x{}",
                    upper.n, upper.n, upper.knots, lower.n, lower.n, lower.knots
                ),
            });
        }
        for (field, t) in [("b_upper", &upper), ("b_lower", &lower)] {
            if let Some(pos) = t.data.iter().position(|v| !v.is_finite()) {
                let (i, j, k) = unflatten(pos, t.n, t.knots);
                return Err(ModelError::NonFinite { field, i, j, k });
            }
        }
        for (pos, (&lo, &up)) in lower.data.iter().zip(&upper.data).enumerate() {
            if lo > up {
                let (i, j, k) = unflatten(pos, upper.n, upper.knots);
                return Err(ModelError::BoundOrderViolation {
                    i,
                    j,
                    k,
                    lower: lo,
                    upper: up,
                });
            }
        }
        Ok(Self {
            degree,
            step,
            upper,
            lower,
        })
    }

    /// A system without uncertainty (`b_lower = b_upper = b`).
    pub fn exact(degree: u32, step: f64, coeffs: Coefficients) -> Result<Self, ModelError> {
        Self::new(degree, step, coeffs.clone(), coeffs)
    }

    pub fn n(&self) -> usize {
        self.upper.n
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn knots(&self) -> usize {
        self.upper.knots
    }

    pub fn tau_bar(&self) -> f64 {
        self.knots() as f64 * self.step
    }

    pub fn upper(&self) -> &Coefficients {
        &self.upper
    }

    pub fn lower(&self) -> &Coefficients {
        &self.lower
    }

    pub fn side(&self, side: Side) -> &Coefficients {
        match side {
            Side::Upper => &self.upper,
            Side::Lower => &self.lower,
        }
    }

    /// `(b_lower + b_upper) / 2`, the coefficients of the midpoint kernel.
    pub fn midpoint(&self) -> Coefficients {
        self.lower.zip_with(&self.upper, |a, b| 0.5 * (a + b))
    }

    /// Value of a bounding spline entry at time `tau`.
    pub fn eval_bound(&self, side: Side, i: usize, j: usize, tau: f64) -> Result<f64, ModelError> {
        let n = self.n();
        if i >= n || j >= n {
            return Err(ModelError::IndexOutOfRange { i, j, n });
        }
        let tau_bar = self.tau_bar();
        if !(0.0..=tau_bar * (1.0 + HORIZON_RTOL)).contains(&tau) {
            return Err(ModelError::TimeOutOfRange { tau, tau_bar });
        }
        Ok(spline_value(
            self.side(side).entry(i, j),
            self.degree,
            self.step,
            tau,
        ))
    }

    pub fn to_description(&self) -> KernelDescription {
        KernelDescription {
            n: self.n(),
            n0: self.degree,
            h: self.step,
            knots: self.knots(),
            b_upper: self.upper.to_nested(),
            b_lower: self.lower.to_nested(),
            tau_bar: None,
        }
    }
}

fn unflatten(pos: usize, n: usize, knots: usize) -> (usize, usize, usize) {
    let k = pos % knots;
    let ij = pos / knots;
    (ij / n, ij % n, k)
}

/// `Σ_k b_k p_{n0,k}(τ)` for one entry; only knots left of `τ` contribute.
pub(crate) fn spline_value(coeffs: &[f64], degree: u32, h: f64, tau: f64) -> f64 {
    let last = ((tau / h).floor().max(0.0) as usize).min(coeffs.len() - 1);
    coeffs[..=last]
        .iter()
        .enumerate()
        .map(|(k, &b)| b * eval_basis(degree, k, h, tau))
        .sum()
}

/// Turns an untrusted description into a validated model.
pub fn validate(raw: &KernelDescription) -> Result<SplineKernelBounds, ModelError> {
    if !(raw.h > 0.0 && raw.h.is_finite()) {
        return Err(ModelError::NonPositiveStep(raw.h));
    }
    if raw.knots < 1 {
        return Err(ModelError::ZeroKnots);
    }
    if raw.n < 1 {
        return Err(ModelError::ShapeMismatch {
            field: "n",
            detail: "state dimension must be at least 1".into(),
        });
    }
    if let Some(tb) = raw.tau_bar {
        let derived = raw.knots as f64 * raw.h;
        if !((tb - derived).abs() <= HORIZON_RTOL * derived.abs().max(tb.abs())) {
            return Err(ModelError::HorizonMismatch { given: tb, derived });
        }
    }
    let upper = Coefficients::from_nested("b_upper", raw.n, raw.knots, &raw.b_upper)?;
    let lower = Coefficients::from_nested("b_lower", raw.n, raw.knots, &raw.b_lower)?;
    SplineKernelBounds::new(raw.n0, raw.h, upper, lower)
}

/// One admissible realization of the uncertain kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcreteSplineKernel {
    degree: u32,
    step: f64,
    coeffs: Coefficients,
}

impl ConcreteSplineKernel {
    pub fn new(degree: u32, step: f64, coeffs: Coefficients) -> Result<Self, ModelError> {
        // reuse the bound checks with a zero-width band
        SplineKernelBounds::exact(degree, step, coeffs.clone())?;
        Ok(Self {
            degree,
            step,
            coeffs,
        })
    }

    pub fn n(&self) -> usize {
        self.coeffs.n
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn knots(&self) -> usize {
        self.coeffs.knots
    }

    pub fn tau_bar(&self) -> f64 {
        self.knots() as f64 * self.step
    }

    pub fn coefficients(&self) -> &Coefficients {
        &self.coeffs
    }

    /// Kernel entry `a_{ij}(τ)`; zero outside `[0, τ̄]`.
    pub fn eval(&self, i: usize, j: usize, tau: f64) -> f64 {
        if tau < 0.0 || tau > self.tau_bar() {
            return 0.0;
        }
        spline_value(self.coeffs.entry(i, j), self.degree, self.step, tau)
    }

    /// The kernel seen as a bound pair with no gap.
    pub fn as_bounds(&self) -> SplineKernelBounds {
        SplineKernelBounds {
            degree: self.degree,
            step: self.step,
            upper: self.coeffs.clone(),
            lower: self.coeffs.clone(),
        }
    }

    pub fn lies_within(&self, bounds: &SplineKernelBounds) -> bool {
        self.degree == bounds.degree
            && self.step == bounds.step
            && self.coeffs.n == bounds.n()
            && self.coeffs.knots == bounds.knots()
            && self
                .coeffs
                .data
                .iter()
                .zip(bounds.lower.data.iter().zip(&bounds.upper.data))
                .all(|(&b, (&lo, &up))| lo <= b && b <= up)
    }
}

//! Reference systems used by the tests, the acceptance run and the CLI.

use rand::Rng;

use crate::kernel_model::{Coefficients, SplineKernelBounds};

/// Two states, piecewise-constant bounds on five cells of width 0.1.
///
/// Diagonal entries lie in `[0.8, 1.2]`, `a_21` in `[-0.2, 0.2]` and `a_12`
/// steps down by `h` per cell with a band of width `h`.
pub fn example1() -> SplineKernelBounds {
    let h = 0.1;
    let upper = Coefficients::from_fn(2, 5, |i, j, k| match (i, j) {
        (0, 0) | (1, 1) => 1.2,
        (1, 0) => 0.2,
        _ => -(k as f64) * h,
    });
    let lower = Coefficients::from_fn(2, 5, |i, j, k| match (i, j) {
        (0, 0) | (1, 1) => 0.8,
        (1, 0) => -0.2,
        _ => -((k + 1) as f64) * h,
    });
    SplineKernelBounds::new(0, h, upper, lower).unwrap()
}

/// The same system with the off-diagonal levels taken literally as `-k`, `-(k+1)`.
pub fn example1_unit_levels() -> SplineKernelBounds {
    let e = example1();
    let upper = Coefficients::from_fn(2, 5, |i, j, k| {
        if (i, j) == (0, 1) {
            -(k as f64)
        } else {
            e.upper().get(i, j, k)
        }
    });
    let lower = Coefficients::from_fn(2, 5, |i, j, k| {
        if (i, j) == (0, 1) {
            -((k + 1) as f64)
        } else {
            e.lower().get(i, j, k)
        }
    });
    SplineKernelBounds::new(0, 0.1, upper, lower).unwrap()
}

/// Scalar kernel around `-c1 τ + c2` with a perturbation band of radius
/// `r_c sqrt(τ² + 1)`, sampled at the right end of each cell.
pub fn example2(tau_bar: f64, h: f64, r_c: f64) -> SplineKernelBounds {
    let knots = (tau_bar / h).round() as usize;
    let (c1, c2) = (-0.0005, -0.0267);
    let bound = |t: f64, s: f64| -c1 * t + c2 + s * r_c * (t * t + 1.0).sqrt();
    let upper = Coefficients::from_fn(1, knots, |_, _, k| bound((k + 1) as f64 * h, 1.0));
    let lower = Coefficients::from_fn(1, knots, |_, _, k| bound((k + 1) as f64 * h, -1.0));
    SplineKernelBounds::new(0, h, upper, lower).unwrap()
}

/// `τ̄ = 2`, `h = 2/3`, `r_c = 0.1439`.
pub fn example2_base() -> SplineKernelBounds {
    example2(2.0, 2.0 / 3.0, 0.1439)
}

/// `(τ̄, r'_c)` rows of the perturbation sweep at `h = 0.1`.
pub const TABLE1: [(f64, f64); 3] = [(2.0, 0.16), (5.0, 0.035), (10.0, 0.0095)];

/// Scalar hat kernel with no uncertainty: `n0 = 1`, `h = 0.5`, `b = (-30, 30)`.
pub fn example3() -> SplineKernelBounds {
    let c = Coefficients::from_fn(1, 2, |_, _, k| if k == 0 { -30.0 } else { 30.0 });
    SplineKernelBounds::exact(1, 0.5, c).unwrap()
}

/// Two states, `n0 = 1`, `h = 0.5`, lower bounds `0.2` under the upper ones.
pub fn figure1() -> SplineKernelBounds {
    let up = [[[7.6, -7.4], [1.1, -0.9]], [[1.6, -1.4], [7.1, -6.9]]];
    let upper = Coefficients::from_fn(2, 2, |i, j, k| up[i][j][k]);
    let lower = upper.map(|v| v - 0.2);
    SplineKernelBounds::new(1, 0.5, upper, lower).unwrap()
}

/// Random kernel with no uncertainty; coefficients uniform in `[-scale, scale]`.
///
/// For `degree = 1` the last coefficient of each entry is set so the entry sums
/// to zero, which makes the spline vanish past `τ̄`. Higher degrees are not
/// generated.
pub fn random_exact(
    rng: &mut impl Rng,
    n: usize,
    degree: u32,
    knots: usize,
    h: f64,
    scale: f64,
) -> SplineKernelBounds {
    SplineKernelBounds::exact(degree, h, random_midpoint(rng, n, degree, knots, scale)).unwrap()
}

/// Random bounds: a midpoint as in [`random_exact`] widened by independent
/// half-widths uniform in `[0, width]`.
pub fn random_bounds(
    rng: &mut impl Rng,
    n: usize,
    degree: u32,
    knots: usize,
    h: f64,
    scale: f64,
    width: f64,
) -> SplineKernelBounds {
    let mid = random_midpoint(rng, n, degree, knots, scale);
    let half = Coefficients::from_fn(n, knots, |_, _, _| rng.random_range(0.0..=width));
    SplineKernelBounds::new(
        degree,
        h,
        mid.zip_with(&half, |m, w| m + w),
        mid.zip_with(&half, |m, w| m - w),
    )
    .unwrap()
}

fn random_midpoint(
    rng: &mut impl Rng,
    n: usize,
    degree: u32,
    knots: usize,
    scale: f64,
) -> Coefficients {
    assert!(degree <= 1, "only degrees 0 and 1 are generated");
    let mut raw = Coefficients::from_fn(n, knots, |_, _, _| rng.random_range(-scale..=scale));
    if degree == 1 {
        let sums: Vec<f64> = (0..n * n)
            .map(|e| raw.entry(e / n, e % n)[..knots - 1].iter().sum())
            .collect();
        raw = Coefficients::from_fn(n, knots, |i, j, k| {
            if k + 1 == knots {
                -sums[i * n + j]
            } else {
                raw.get(i, j, k)
            }
        });
    }
    raw
}

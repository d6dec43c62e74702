//! Independent checks for the certifier: kernel transforms by Gauss-Legendre
//! quadrature, seeded sampling of admissible kernels, Nyquist winding counts from
//! dense eigenlocus sweeps, time-domain simulation and Monte Carlo inclusion tests.
//!
//! Nothing here uses the closed-form transform of [`crate::freq_transform`]
//! except where a comparison against it is the point.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::freq_transform::{build_frequency_model, C64};
use crate::inclusion_band::{band_rectangle, eigen_box};
use crate::kernel_model::{eval_basis, Coefficients, ConcreteSplineKernel, SplineKernelBounds};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("a locus passes within {distance:e} of +1 near ω = {omega}")]
    Degenerate { omega: f64, distance: f64 },
    #[error("eigenvalue branches cannot be paired near ω = {omega}")]
    PairingAmbiguity { omega: f64 },
    #[error("eigenvalue computation failed at ω = {omega}")]
    Eigen { omega: f64 },
    #[error("step {dt} does not divide h = {h} into at least 8 parts")]
    StepTooCoarse { dt: f64, h: f64 },
    #[error("horizon {t_end} is shorter than 20 τ̄ = {min}")]
    HorizonTooShort { t_end: f64, min: f64 },
}

const NODES: usize = 16;

fn rule() -> GaussLegendre {
    GaussLegendre::new(NonZeroUsize::new(NODES).unwrap())
}

/// `∫ f(τ) e^{-jωτ} dτ` over `[a, b]` for a smooth `f`, in panels short enough
/// that the oscillation is resolved.
fn oscillatory(gl: &GaussLegendre, a: f64, b: f64, omega: f64, f: impl Fn(f64) -> f64) -> C64 {
    let panels = ((omega.abs() * (b - a) / 2.0).ceil() as usize).max(1);
    let w = (b - a) / panels as f64;
    let mut acc = C64::new(0.0, 0.0);
    for p in 0..panels {
        let lo = a + p as f64 * w;
        let mid = lo + w / 2.0;
        for (x, wt) in gl.as_node_weight_pairs() {
            let t = mid + x * w / 2.0;
            acc += C64::from_polar(f(t) * wt * w / 2.0, -omega * t);
        }
    }
    acc
}

/// `∫ p_k(τ) dτ` over `[0, N h]` by quadrature.
pub fn basis_integral_quadrature(degree: u32, k: usize, h: f64, knots: usize) -> f64 {
    let gl = rule();
    (k..knots)
        .map(|m| {
            let (a, b) = (m as f64 * h, (m + 1) as f64 * h);
            gl.integrate(a, b, |t| eval_basis(degree, k, h, t))
        })
        .sum()
}

/// `P_k(ω) = ∫₀^τ̄ p_k(τ) e^{-jωτ} dτ` for every `k`.
pub fn basis_transforms(degree: u32, h: f64, knots: usize, omega: f64) -> Vec<C64> {
    let gl = rule();
    (0..knots)
        .map(|k| {
            (k..knots)
                .map(|m| {
                    let (a, b) = (m as f64 * h, (m + 1) as f64 * h);
                    oscillatory(&gl, a, b, omega, |t| eval_basis(degree, k, h, t))
                })
                .sum()
        })
        .collect()
}

fn combine(coeffs: &Coefficients, p: &[C64]) -> DMatrix<C64> {
    let n = coeffs.dim();
    DMatrix::from_fn(n, n, |i, j| {
        coeffs
            .entry(i, j)
            .iter()
            .zip(p)
            .map(|(b, pk)| pk * *b)
            .sum()
    })
}

/// Transform of a concrete kernel at `jω`.
pub fn kernel_transform(kernel: &ConcreteSplineKernel, omega: f64) -> DMatrix<C64> {
    let p = basis_transforms(kernel.degree(), kernel.step(), kernel.knots(), omega);
    combine(kernel.coefficients(), &p)
}

/// Transform of the midpoint kernel `(upper + lower) / 2` at `jω`.
pub fn midpoint_transform(bounds: &SplineKernelBounds, omega: f64) -> DMatrix<C64> {
    let p = basis_transforms(bounds.degree(), bounds.step(), bounds.knots(), omega);
    combine(&bounds.midpoint(), &p)
}

/// Each coefficient uniform in its bound interval; deterministic per seed.
pub fn sample_admissible_kernel(bounds: &SplineKernelBounds, seed: u64) -> ConcreteSplineKernel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_with(bounds, &mut rng)
}

fn sample_with(bounds: &SplineKernelBounds, rng: &mut ChaCha8Rng) -> ConcreteSplineKernel {
    let (lo, up) = (bounds.lower(), bounds.upper());
    let coeffs = Coefficients::from_fn(bounds.n(), bounds.knots(), |i, j, k| {
        let (a, b) = (lo.get(i, j, k), up.get(i, j, k));
        if a == b {
            a
        } else {
            rng.random_range(a..=b)
        }
    });
    ConcreteSplineKernel::new(bounds.degree(), bounds.step(), coeffs)
        .expect("sampled coefficients are finite")
}

fn eigenvalues(m: DMatrix<C64>, omega: f64) -> Result<Vec<C64>, OracleError> {
    if m.nrows() == 1 {
        return Ok(vec![m[(0, 0)]]);
    }
    m.eigenvalues()
        .map(|v| v.iter().copied().collect())
        .ok_or(OracleError::Eigen { omega })
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindingReport {
    pub grid: Vec<f64>,
    /// One path per eigenvalue branch over `grid` (non-negative frequencies).
    pub loci: Vec<Vec<C64>>,
    /// Clockwise encirclements of `+1` over `ω ∈ (-∞, ∞)`.
    pub winding: i64,
    pub min_distance_to_one: f64,
    pub omega_max: f64,
}

/// Frequency past which every eigenvalue of the kernel transform has modulus
/// at most 1/2: entrywise `|â(jω)| ≤ (|a(0)| + TV(a) + |a(τ̄)|) / ω`.
pub fn decay_frequency(kernel: &ConcreteSplineKernel) -> f64 {
    let n = kernel.n();
    let h = kernel.step();
    let per_cell = 64;
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let mut v = 0.0;
            for m in 0..kernel.knots() {
                let a = m as f64 * h;
                let eps = 1e-9 * h;
                let mut prev = kernel.eval(i, j, a + eps);
                v += if m == 0 {
                    prev.abs()
                } else {
                    (prev - kernel.eval(i, j, a - eps)).abs()
                };
                for s in 1..=per_cell {
                    let t = if s == per_cell {
                        a + h - eps
                    } else {
                        a + h * s as f64 / per_cell as f64
                    };
                    let cur = kernel.eval(i, j, t);
                    v += (cur - prev).abs();
                    prev = cur;
                }
                if m + 1 == kernel.knots() {
                    v += prev.abs();
                }
            }
            worst = worst.max(v);
        }
    }
    // TV by sampling may undershoot slightly; the factor 2 covers it and the 1/2 target
    2.0 * 2.0 * n as f64 * worst
}

/// Greedy nearest-neighbour matching of `next` onto the branches ending in `prev`.
fn pair(prev: &[C64], next: &[C64]) -> Vec<C64> {
    let n = prev.len();
    let mut used_p = vec![false; n];
    let mut used_n = vec![false; n];
    let mut out = vec![C64::new(0.0, 0.0); n];
    let mut dists: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
    for (a, p) in prev.iter().enumerate() {
        for (b, q) in next.iter().enumerate() {
            dists.push(((p - q).norm(), a, b));
        }
    }
    dists.sort_by(|x, y| x.0.total_cmp(&y.0));
    for (_, a, b) in dists {
        if !used_p[a] && !used_n[b] {
            used_p[a] = true;
            used_n[b] = true;
            out[a] = next[b];
        }
    }
    out
}

/// A move is resolved when it is short against the distance to `+1`, so the
/// angle it sweeps about `+1` is below 30°. Swapped branches then still add up
/// to the right total.
fn resolved(a: C64, b: C64) -> bool {
    (b - a).norm() <= 0.5 * (a - 1.0).norm().min((b - 1.0).norm())
}

fn arg_step(a: C64, b: C64) -> f64 {
    let one = C64::new(1.0, 0.0);
    ((b - one) / (a - one)).arg()
}

/// Winding count of the eigenloci of `A(jω)` about `+1`.
pub fn nyquist_winding(
    kernel: &ConcreteSplineKernel,
    omega_max: f64,
    grid_points: usize,
) -> Result<WindingReport, OracleError> {
    const MAX_DEPTH: u32 = 14;
    let omega_max = omega_max.max(decay_frequency(kernel));
    let gp = grid_points.max(16);
    let base: Vec<f64> = (0..gp)
        .map(|i| omega_max * i as f64 / (gp - 1) as f64)
        .collect();
    let samples: Vec<Vec<C64>> = base
        .par_iter()
        .map(|&w| eigenvalues(kernel_transform(kernel, w), w))
        .collect::<Result<_, _>>()?;

    let n = kernel.n();
    let mut grid = vec![0.0];
    let mut loci: Vec<Vec<C64>> = (0..n).map(|b| vec![samples[0][b]]).collect();
    let mut current = samples[0].clone();
    let mut total = 0.0;
    let mut min_dist = current
        .iter()
        .map(|z| (z - 1.0).norm())
        .fold(f64::INFINITY, f64::min);

    for k in 1..gp {
        // intervals still to walk, nearest first
        let mut stack = vec![(base[k - 1], base[k], samples[k].clone(), 0u32)];
        while let Some((w0, w1, next, depth)) = stack.pop() {
            let p = pair(&current, &next);
            if !current.iter().zip(&p).all(|(a, b)| resolved(*a, *b)) {
                if depth >= MAX_DEPTH {
                    let distance = p.iter().map(|z| (z - 1.0).norm()).fold(min_dist, f64::min);
                    if distance < 1e-6 {
                        return Err(OracleError::Degenerate {
                            omega: w0,
                            distance,
                        });
                    }
                    return Err(OracleError::PairingAmbiguity { omega: w0 });
                }
                let mid = 0.5 * (w0 + w1);
                let mid_eigs = eigenvalues(kernel_transform(kernel, mid), mid)?;
                stack.push((mid, w1, next, depth + 1));
                stack.push((w0, mid, mid_eigs, depth + 1));
                continue;
            }
            for b in 0..n {
                total += arg_step(current[b], p[b]);
                loci[b].push(p[b]);
                min_dist = min_dist.min((p[b] - 1.0).norm());
            }
            grid.push(w1);
            current = p;
        }
    }
    let tol = 1e-8;
    if min_dist < tol {
        let at = loci
            .iter()
            .flat_map(|l| l.iter().zip(&grid))
            .min_by(|a, b| (a.0 - 1.0).norm().total_cmp(&(b.0 - 1.0).norm()))
            .map(|(_, w)| *w)
            .unwrap_or(0.0);
        return Err(OracleError::Degenerate {
            omega: at,
            distance: min_dist,
        });
    }
    // past omega_max each locus stays in |λ| ≤ 1/2 and ends at the origin
    for z in &current {
        total += arg_step(*z, C64::new(0.0, 0.0));
    }
    // ω < 0 contributes the same angle by conjugate symmetry
    let turns = 2.0 * total / (2.0 * PI);
    Ok(WindingReport {
        grid,
        loci,
        winding: -turns.round() as i64,
        min_distance_to_one: min_dist,
        omega_max,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub dt: f64,
    /// States on the time grid, each scaled by `exp(-log_scale[i])`.
    pub samples: Vec<Vec<f64>>,
    pub log_scale: Vec<f64>,
    /// `log ‖x(t_i)‖`, unscaled; `-∞` where the state vanishes.
    pub log_norm: Vec<f64>,
    pub growth_rate: f64,
}

impl Trajectory {
    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }
}

/// Advances `x(t) = ∫₀^τ̄ A(τ) x(t-τ) dτ` from `x = φ` on `[0, τ̄]`.
///
/// The trapezoid weights use one-sided kernel values at cell boundaries; the
/// `τ = 0` node is moved to the left-hand side and solved for.
pub fn simulate(
    kernel: &ConcreteSplineKernel,
    phi: impl Fn(f64) -> Vec<f64>,
    dt: f64,
    t_end: f64,
) -> Result<Trajectory, OracleError> {
    let h = kernel.step();
    let ratio = h / dt;
    let m = ratio.round();
    if m < 8.0 || (ratio - m).abs() > 1e-12 * ratio.max(1.0) {
        return Err(OracleError::StepTooCoarse { dt, h });
    }
    let dt = h / m;
    let tau_bar = kernel.tau_bar();
    if t_end < 20.0 * tau_bar * (1.0 - 1e-12) {
        return Err(OracleError::HorizonTooShort {
            t_end,
            min: 20.0 * tau_bar,
        });
    }
    let n = kernel.n();
    let q_max = m as usize * kernel.knots();
    let eps = 1e-9 * dt;
    let value = |tau: f64| DMatrix::from_fn(n, n, |i, j| kernel.eval(i, j, tau));
    let weights: Vec<DMatrix<f64>> = (0..=q_max)
        .map(|q| {
            let t = q as f64 * dt;
            let right = if q < q_max {
                value(t + eps)
            } else {
                DMatrix::zeros(n, n)
            };
            let left = if q > 0 {
                value(t - eps)
            } else {
                DMatrix::zeros(n, n)
            };
            (right + left) * (dt / 2.0)
        })
        .collect();
    let lhs = DMatrix::identity(n, n) - &weights[0];
    let lu = lhs.lu();

    let steps = (t_end / dt).round() as usize;
    let mut xs: Vec<DVector<f64>> = Vec::with_capacity(steps + 1);
    let mut log_scale = Vec::with_capacity(steps + 1);
    for s in 0..=q_max {
        xs.push(DVector::from_vec(phi(s as f64 * dt)));
        log_scale.push(0.0);
    }
    let mut offset = 0.0f64;
    for s in q_max + 1..=steps {
        let mut rhs = DVector::zeros(n);
        for q in 1..=q_max {
            rhs += &weights[q] * &xs[s - q];
        }
        let x = lu
            .solve(&rhs)
            .unwrap_or_else(|| DVector::from_element(n, f64::NAN));
        xs.push(x);
        log_scale.push(offset);
        let big = xs[s].amax();
        if big > 1e100 || (big > 0.0 && big < 1e-100) {
            // rescale the window the recursion still reads
            let f = 1.0 / big;
            for v in &mut xs[s - q_max..=s] {
                *v *= f;
            }
            offset += big.ln();
            for l in &mut log_scale[s - q_max..=s] {
                *l = offset;
            }
        }
    }
    let log_norm: Vec<f64> = xs
        .iter()
        .zip(&log_scale)
        .map(|(x, l)| {
            let nrm = x.norm();
            if nrm > 0.0 {
                nrm.ln() + l
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let growth_rate = fit_rate(&log_norm, dt, steps / 2);
    Ok(Trajectory {
        dt,
        samples: xs.iter().map(|x| x.iter().copied().collect()).collect(),
        log_scale,
        log_norm,
        growth_rate,
    })
}

fn fit_rate(log_norm: &[f64], dt: f64, from: usize) -> f64 {
    let pts: Vec<(f64, f64)> = log_norm[from..]
        .iter()
        .enumerate()
        .filter(|(_, l)| l.is_finite())
        .map(|(i, l)| ((from + i) as f64 * dt, *l))
        .collect();
    if pts.len() < 2 {
        return f64::NEG_INFINITY;
    }
    let k = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let ml = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let cov: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - ml)).sum();
    let var: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    cov / var
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct InclusionReport {
    pub kernels: usize,
    pub frequencies: usize,
    /// Entries outside their square around the midpoint transform.
    pub square_violations: usize,
    /// Eigenvalues outside the inclusion rectangle.
    pub rectangle_violations: usize,
    /// Eigenvalues outside the box from the partition-matrix spectra.
    pub eigen_box_violations: usize,
}

/// Monte Carlo check of the entrywise squares and the eigenvalue rectangles.
///
/// Frequencies are uniform on `[0, 8π/h]`; kernel `s` draws from stream `s` of the
/// seeded generator, so the counts do not depend on scheduling.
pub fn verify_inclusions(
    bounds: &SplineKernelBounds,
    n_samples: usize,
    n_freqs: usize,
    seed: u64,
) -> InclusionReport {
    let fm = build_frequency_model(bounds);
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let top = 8.0 * PI / bounds.step();
    let omegas: Vec<f64> = (0..n_freqs)
        .map(|_| master.random_range(0.0..top))
        .collect();
    let basis: Vec<Vec<C64>> = omegas
        .par_iter()
        .map(|&w| basis_transforms(bounds.degree(), bounds.step(), bounds.knots(), w))
        .collect();
    let centers: Vec<DMatrix<C64>> = omegas.iter().map(|&w| fm.m_hat_at(w).value).collect();
    let rects: Vec<_> = omegas.iter().map(|&w| band_rectangle(&fm, w)).collect();
    let boxes: Vec<_> = omegas.iter().map(|&w| eigen_box(&fm, w)).collect();
    let half = fm.m_tilde().clone();
    let n = bounds.n();
    let tol = 1e-9;

    (0..n_samples)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(s as u64 + 1);
            let kernel = sample_with(bounds, &mut rng);
            let mut r = InclusionReport {
                kernels: 1,
                ..InclusionReport::default()
            };
            for (f, &w) in omegas.iter().enumerate() {
                let m = combine(kernel.coefficients(), &basis[f]);
                for i in 0..n {
                    for j in 0..n {
                        let d = m[(i, j)] - centers[f][(i, j)];
                        let slack = half[(i, j)] + tol * (1.0 + centers[f][(i, j)].norm());
                        if d.re.abs() > slack || d.im.abs() > slack {
                            r.square_violations += 1;
                        }
                    }
                }
                let scale = tol * (1.0 + m.norm());
                match eigenvalues(m, w) {
                    Ok(eigs) => {
                        for z in eigs {
                            if !rects[f].contains(z, scale) {
                                r.rectangle_violations += 1;
                            }
                            if !boxes[f].contains(z, scale) {
                                r.eigen_box_violations += 1;
                            }
                        }
                    }
                    Err(_) => {
                        r.rectangle_violations += n;
                        r.eigen_box_violations += n;
                    }
                }
            }
            r
        })
        .reduce(InclusionReport::default, |a, b| InclusionReport {
            kernels: a.kernels + b.kernels,
            frequencies: n_freqs,
            square_violations: a.square_violations + b.square_violations,
            rectangle_violations: a.rectangle_violations + b.rectangle_violations,
            eigen_box_violations: a.eigen_box_violations + b.eigen_box_violations,
        })
}

//! Eigenvalue inclusion band: `ρ{T}`, the per-frequency rectangles and the
//! partition matrices they are derived from.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::freq_transform::{FrequencyModel, C64};

/// Spectral radius of `T = [[1,1],[1,1]] ⊗ (M̃ + M̃ᵀ)` from a full symmetric eigensolve.
pub fn spectral_radius_t(m_tilde: &DMatrix<f64>) -> f64 {
    let n = m_tilde.nrows();
    let s = m_tilde + m_tilde.transpose();
    let t = DMatrix::from_fn(2 * n, 2 * n, |i, j| s[(i % n, j % n)]);
    let full = spectral_radius_sym(t);
    debug_assert!({
        let half = 2.0 * spectral_radius_sym(s);
        (full - half).abs() <= 1e-10 * full.max(1.0)
    });
    full
}

fn spectral_radius_sym(m: DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m)
        .eigenvalues
        .iter()
        .fold(0.0, |acc: f64, v| acc.max(v.abs()))
}

/// `ρ{T}` of a built model.
pub fn rho_t(fm: &FrequencyModel) -> f64 {
    fm.rho_t()
}

/// `(ρ{T}, 2ρ{M̃ + M̃ᵀ})`; the two agree by the Kronecker eigenvalue identity.
pub fn kronecker_identity(fm: &FrequencyModel) -> (f64, f64) {
    let m = fm.m_tilde();
    (
        spectral_radius_t(m),
        2.0 * spectral_radius_sym(m + m.transpose()),
    )
}

/// Inclusion rectangle at one frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandRectangle {
    pub omega: f64,
    pub center: C64,
    pub half_width_re: f64,
    pub half_width_im: f64,
}

impl BandRectangle {
    pub fn contains(&self, z: C64, tol: f64) -> bool {
        (z.re - self.center.re).abs() <= self.half_width_re + tol
            && (z.im - self.center.im).abs() <= self.half_width_im + tol
    }

    /// Positive when `+1` lies outside the rectangle.
    pub fn exclusion_margin(&self) -> f64 {
        ((self.center.re - 1.0).abs() - self.half_width_re)
            .max(self.center.im.abs() - self.half_width_im)
    }

    /// Slack of the real-axis condition alone.
    pub fn real_margin(&self) -> f64 {
        (self.center.re - 1.0).abs() - self.half_width_re
    }
}

/// `(δ_R, δ_I)` for a midpoint matrix `M̂ = R + jI`.
fn deltas(m: &DMatrix<C64>, rho_t: f64) -> (f64, f64) {
    let n = m.nrows() as f64;
    let r = m.map(|z| z.re);
    let im = m.map(|z| z.im);
    let width = |a: &DMatrix<f64>, b: &DMatrix<f64>| {
        let sym = a + a.transpose();
        let skew = b - b.transpose();
        let radicand = (&sym * &sym - &skew * &skew).trace() - 4.0 * a.trace().powi(2) / n;
        rho_t + ((2.0 * n - 1.0) / n).sqrt() * radicand.max(0.0).sqrt()
    };
    (width(&r, &im), width(&im, &r))
}

pub fn band_rectangle(fm: &FrequencyModel, omega: f64) -> BandRectangle {
    let sample = fm.m_hat_at(omega);
    let n = fm.n() as f64;
    let (dr, di) = deltas(&sample.value, fm.rho_t());
    BandRectangle {
        omega,
        center: sample.trace() / n,
        half_width_re: dr / 2.0,
        half_width_im: di / 2.0,
    }
}

/// Rectangles over a frequency list, evaluated in parallel, in input order.
pub fn sweep(fm: &FrequencyModel, omegas: &[f64]) -> Vec<BandRectangle> {
    omegas.par_iter().map(|&w| band_rectangle(fm, w)).collect()
}

/// Center from the trigonometric sums in `tr D_k` (valid away from `ω = 0`).
pub fn center_trig_form(fm: &FrequencyModel, omega: f64) -> C64 {
    let n = fm.n() as f64;
    let degree = fm.source().degree();
    let h = fm.source().step();
    let fact: f64 = (1..=degree).map(|i| i as f64).product();
    let tr = fm.d_traces();
    let cos: f64 = tr
        .iter()
        .enumerate()
        .map(|(k, t)| t * (k as f64 * h * omega).cos())
        .sum();
    let sin: f64 = tr
        .iter()
        .enumerate()
        .map(|(k, t)| t * (k as f64 * h * omega).sin())
        .sum();
    let base = fact / (2.0 * n * omega.powi(degree as i32 + 1));
    if degree.is_multiple_of(2) {
        let sign = if (1 + degree / 2).is_multiple_of(2) { 1.0 } else { -1.0 };
        C64::new(base * sign * sin, base * sign * cos)
    } else {
        let re_sign = if degree.div_ceil(2).is_multiple_of(2) {
            1.0
        } else {
            -1.0
        };
        let im_sign = if ((degree - 1) / 2).is_multiple_of(2) {
            1.0
        } else {
            -1.0
        };
        C64::new(base * re_sign * cos, base * im_sign * sin)
    }
}

/// Real symmetric embeddings `S_R`, `S_I` of the Hermitian and skew-Hermitian parts.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionMatrices {
    pub s_r: DMatrix<f64>,
    pub s_i: DMatrix<f64>,
}

pub fn partition_matrices(fm: &FrequencyModel, omega: f64) -> PartitionMatrices {
    partition_of(&fm.m_hat_at(omega).value)
}

fn partition_of(m: &DMatrix<C64>) -> PartitionMatrices {
    let n = m.nrows();
    let r = m.map(|z| z.re);
    let i = m.map(|z| z.im);
    let block = |a: DMatrix<f64>, b: DMatrix<f64>| {
        // [[a, -b], [b, a]]
        DMatrix::from_fn(2 * n, 2 * n, |p, q| match (p < n, q < n) {
            (true, true) => a[(p, q)],
            (true, false) => -b[(p, q - n)],
            (false, true) => b[(p - n, q)],
            (false, false) => a[(p - n, q - n)],
        })
    };
    PartitionMatrices {
        s_r: block(&r + r.transpose(), &i - i.transpose()),
        s_i: block(&i + i.transpose(), r.transpose() - &r),
    }
}

/// Center and radius of the disk holding every eigenvalue of a partition matrix.
pub fn partition_disk(s: &DMatrix<f64>, half_trace: f64, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let center = 2.0 * half_trace / nf;
    let radicand =
        (2.0 * nf - 1.0) / (2.0 * nf) * (s.norm_squared() - 8.0 * half_trace.powi(2) / nf);
    (center, radicand.max(0.0).sqrt())
}

/// Axis-aligned box from the extreme eigenvalues of `S_R`, `S_I` widened by `ρ{T}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenBox {
    pub re: (f64, f64),
    pub im: (f64, f64),
}

impl EigenBox {
    pub fn contains(&self, z: C64, tol: f64) -> bool {
        z.re >= self.re.0 - tol
            && z.re <= self.re.1 + tol
            && z.im >= self.im.0 - tol
            && z.im <= self.im.1 + tol
    }

    pub fn inside(&self, rect: &BandRectangle, tol: f64) -> bool {
        let c = rect.center;
        self.re.0 >= c.re - rect.half_width_re - tol
            && self.re.1 <= c.re + rect.half_width_re + tol
            && self.im.0 >= c.im - rect.half_width_im - tol
            && self.im.1 <= c.im + rect.half_width_im + tol
    }
}

pub fn eigen_box(fm: &FrequencyModel, omega: f64) -> EigenBox {
    let p = partition_matrices(fm, omega);
    let rho = fm.rho_t();
    let range = |s: DMatrix<f64>| {
        let e = SymmetricEigen::new(s).eigenvalues;
        let lo = e.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        ((lo - rho) / 2.0, (hi + rho) / 2.0)
    };
    EigenBox {
        re: range(p.s_r),
        im: range(p.s_i),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freq_transform::build_frequency_model;
    use crate::kernel_model::{Coefficients, SplineKernelBounds};

    fn fig1() -> FrequencyModel {
        let up = [[[7.6, -7.4], [1.1, -0.9]], [[1.6, -1.4], [7.1, -6.9]]];
        let upper = Coefficients::from_fn(2, 2, |i, j, k| up[i][j][k]);
        let lower = upper.map(|v| v - 0.2);
        build_frequency_model(&SplineKernelBounds::new(1, 0.5, upper, lower).unwrap())
    }

    #[test]
    fn scalar_half_widths_equal_half_rho() {
        let upper = Coefficients::from_fn(1, 3, |_, _, k| [1.0, -0.5, 0.2][k]);
        let lower = upper.map(|v| v - 0.3);
        let fm = build_frequency_model(&SplineKernelBounds::new(0, 0.4, upper, lower).unwrap());
        for w in [0.0, 0.3, 2.0, 17.0] {
            let b = band_rectangle(&fm, w);
            assert_eq!(b.half_width_re, fm.rho_t() / 2.0);
            assert_eq!(b.half_width_im, fm.rho_t() / 2.0);
        }
    }

    #[test]
    fn partition_structure() {
        let fm = fig1();
        let p = partition_matrices(&fm, 0.0);
        let r = fm.m_hat_zero();
        let two_r = r + r.transpose();
        for a in 0..2 {
            for b in 0..2 {
                assert!((p.s_r[(a, b)] - two_r[(a, b)]).abs() < 1e-12);
                assert!((p.s_r[(a + 2, b + 2)] - two_r[(a, b)]).abs() < 1e-12);
                assert!(p.s_r[(a, b + 2)].abs() < 1e-12);
            }
        }
        let p = partition_matrices(&fm, 1.0);
        let tr_r = fm.m_hat_at(1.0).trace().re;
        assert!((p.s_r.trace() - 4.0 * tr_r).abs() < 1e-12);
        assert_eq!(p.s_r, p.s_r.transpose());
        assert_eq!(p.s_i, p.s_i.transpose());
    }

    #[test]
    fn partition_disk_holds_eigenvalues() {
        let fm = fig1();
        let p = partition_matrices(&fm, 1.0);
        let tr = fm.m_hat_at(1.0).trace();
        for (s, t) in [(p.s_r, tr.re), (p.s_i, tr.im)] {
            let (c, r) = partition_disk(&s, t, 2);
            for e in SymmetricEigen::new(s).eigenvalues.iter() {
                assert!((e - c).abs() <= r + 1e-12);
            }
        }
    }

    #[test]
    fn trig_center_matches_trace() {
        let fm = fig1();
        for w in [0.9, 3.7, 12.0, 55.5] {
            let a = band_rectangle(&fm, w).center;
            let b = center_trig_form(&fm, w);
            assert!(
                (a - b).norm() <= 1e-10 * a.norm().max(1e-3),
                "{w}: {a} vs {b}"
            );
        }
    }

    #[test]
    fn kronecker_identity_holds() {
        let (a, b) = kronecker_identity(&fig1());
        assert!((a - b).abs() < 1e-12);
        assert!((a - 0.4).abs() < 1e-12);
    }
}

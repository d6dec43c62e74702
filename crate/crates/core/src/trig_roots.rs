//! Real-axis crossovers of the band centers: the trigonometric polynomial in
//! `x = hω`, its Fourier companion matrix, and the odd-multiplicity roots in `[0, π]`.

use std::f64::consts::PI;

use nalgebra::{Complex, DMatrix};
use serde::Serialize;
use thiserror::Error;

use crate::freq_transform::FrequencyModel;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RootError {
    #[error("the crossover polynomial vanishes identically")]
    DegenerateZeroPolynomial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Parity {
    /// `y(x) = Σ f_k cos(kx)`
    Even,
    /// `y(x) = Σ f_k sin(kx)`
    Odd,
}

/// `y(x)`, proportional to `x^{n0+1} Im Q_C(x/h)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigPolynomial {
    pub f: Vec<f64>,
    pub parity: Parity,
    pub h: f64,
    /// Magnitude the coefficients would have without cancellation, for degeneracy tests.
    pub scale: f64,
}

impl TrigPolynomial {
    pub fn eval(&self, x: f64) -> f64 {
        self.f
            .iter()
            .enumerate()
            .map(|(k, &c)| match self.parity {
                Parity::Even => c * (k as f64 * x).cos(),
                Parity::Odd => c * (k as f64 * x).sin(),
            })
            .sum()
    }

    /// Largest coefficient that actually enters `y`.
    pub fn max_abs(&self) -> f64 {
        let skip = usize::from(self.parity == Parity::Odd);
        self.f.iter().skip(skip).fold(0.0, |m, c| m.max(c.abs()))
    }
}

fn factorial(n: u32) -> f64 {
    (1..=n).fold(1.0, |acc, i| acc * i as f64)
}

pub fn f_coefficients(fm: &FrequencyModel) -> TrigPolynomial {
    let degree = fm.source().degree();
    let h = fm.source().step();
    let n = fm.n() as f64;
    let (parity, sign) = if degree.is_multiple_of(2) {
        (
            Parity::Even,
            if (1 + degree / 2).is_multiple_of(2) { 1.0 } else { -1.0 },
        )
    } else {
        (
            Parity::Odd,
            if ((degree - 1) / 2).is_multiple_of(2) {
                1.0
            } else {
                -1.0
            },
        )
    };
    let c = factorial(degree) * h.powi(degree as i32 + 1) / (2.0 * n);
    let f = fm.d_traces().iter().map(|t| t * c * sign).collect();
    let dmax = fm
        .d_seq()
        .iter()
        .flat_map(|d| d.iter().map(|v| v.abs()))
        .fold(0.0, f64::max);
    TrigPolynomial {
        f,
        parity,
        h,
        scale: dmax * c * n,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RootOptions {
    pub tol_circle: f64,
    pub tol_cluster: f64,
    pub tol_coeff: f64,
    pub cluster: bool,
}

impl Default for RootOptions {
    fn default() -> Self {
        Self {
            tol_circle: 1e-6,
            tol_cluster: 1e-4,
            tol_coeff: 1e-12,
            cluster: true,
        }
    }
}

/// Coefficients after dropping negligible trailing terms; error if nothing is left.
fn trimmed(p: &TrigPolynomial, tol_coeff: f64) -> Result<Vec<f64>, RootError> {
    let max = p.max_abs();
    if max == 0.0 || max <= tol_coeff * p.scale {
        return Err(RootError::DegenerateZeroPolynomial);
    }
    let mut f = p.f.clone();
    if p.parity == Parity::Odd {
        f[0] = 0.0;
    }
    while f.len() > 1 && f[f.len() - 1].abs() < tol_coeff * max {
        f.pop();
    }
    Ok(f)
}

/// Companion matrix whose eigenvalues `z` satisfy `y(arg z) = 0` on the unit circle.
pub fn companion_matrix(p: &TrigPolynomial, tol_coeff: f64) -> Result<DMatrix<f64>, RootError> {
    let f = trimmed(p, tol_coeff)?;
    let deg = f.len() - 1;
    let size = 2 * deg;
    let mut m = DMatrix::zeros(size, size);
    if size == 0 {
        return Ok(m);
    }
    for i in 0..size - 1 {
        m[(i, i + 1)] = 1.0;
    }
    let lead = f[deg];
    let last = size - 1;
    match p.parity {
        Parity::Odd => {
            for j in 0..deg {
                m[(last, j)] = f[deg - j] / lead;
            }
            m[(last, deg)] = 0.0;
            for j in 1..deg {
                m[(last, deg + j)] = -f[j] / lead;
            }
        }
        Parity::Even => {
            for j in 0..deg {
                m[(last, j)] = -f[deg - j] / lead;
            }
            m[(last, deg)] = -2.0 * f[0] / lead;
            for j in 1..deg {
                m[(last, deg + j)] = -f[j] / lead;
            }
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Root {
    pub x: f64,
    /// Algebraic multiplicity of the eigenvalue cluster (1 for each raw member when
    /// clustering is off; for the appended origin, the cluster size found there or 0).
    pub multiplicity: usize,
    /// True for the origin added because it always counts as a crossover.
    pub appended: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RootSet {
    /// Ascending by `x`.
    pub roots: Vec<Root>,
    pub includes_zero: bool,
}

impl RootSet {
    /// Roots coming from the companion matrix (the appended origin excluded).
    pub fn crossings(&self) -> Vec<f64> {
        self.roots
            .iter()
            .filter(|r| !r.appended)
            .map(|r| r.x)
            .collect()
    }

    pub fn alpha(&self) -> usize {
        self.roots.iter().filter(|r| !r.appended).count()
    }

    /// The set used when `y` vanishes identically: only the origin.
    pub fn origin_only() -> Self {
        Self {
            roots: vec![Root {
                x: 0.0,
                multiplicity: 0,
                appended: true,
            }],
            includes_zero: true,
        }
    }
}

type C64 = Complex<f64>;

/// Single-linkage grouping of eigenvalues closer than `tol`.
fn clusters(vals: &[C64], tol: f64) -> Vec<Vec<C64>> {
    let n = vals.len();
    let mut label: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in 0..i {
            if (vals[i] - vals[j]).norm() < tol {
                let (a, b) = (label[i], label[j]);
                if a != b {
                    for l in label.iter_mut() {
                        if *l == a {
                            *l = b;
                        }
                    }
                }
            }
        }
    }
    let mut out: Vec<(usize, Vec<C64>)> = Vec::new();
    for (i, &l) in label.iter().enumerate() {
        match out.iter_mut().find(|(k, _)| *k == l) {
            Some((_, v)) => v.push(vals[i]),
            None => out.push((l, vec![vals[i]])),
        }
    }
    out.into_iter().map(|(_, v)| v).collect()
}

/// Angle in `[-π, π]` with values within `snap` of `0` or `±π` pulled onto them.
fn snapped_angle(z: C64, snap: f64) -> f64 {
    let a = z.im.atan2(z.re);
    if a.abs() <= snap {
        0.0
    } else if PI - a.abs() <= snap {
        PI
    } else {
        a
    }
}

pub fn roots_in_0_pi(p: &TrigPolynomial, opts: &RootOptions) -> Result<RootSet, RootError> {
    let f = companion_matrix(p, opts.tol_coeff)?;
    let vals: Vec<C64> = if f.nrows() == 0 {
        Vec::new()
    } else {
        f.complex_eigenvalues().iter().cloned().collect()
    };
    let mut roots = Vec::new();
    let mut zero_cluster = 0;
    for c in clusters(&vals, opts.tol_cluster) {
        let mean = c.iter().sum::<C64>() / c.len() as f64;
        if (mean.norm() - 1.0).abs() >= opts.tol_circle {
            continue;
        }
        let angle = snapped_angle(mean, opts.tol_cluster);
        if angle < 0.0 {
            continue;
        }
        if angle == 0.0 {
            zero_cluster = c.len();
        }
        if opts.cluster {
            if c.len() % 2 == 1 {
                roots.push(Root {
                    x: angle,
                    multiplicity: c.len(),
                    appended: false,
                });
            }
        } else {
            // raw members as a plain eigensolve reports them; lower half-plane
            // members are the conjugate images and are dropped
            for z in c.iter().filter(|z| z.im >= 0.0) {
                roots.push(Root {
                    x: z.im.abs().atan2(z.re),
                    multiplicity: 1,
                    appended: false,
                });
            }
        }
    }
    roots.sort_by(|a, b| a.x.total_cmp(&b.x));
    if !roots.iter().any(|r| r.x == 0.0) {
        roots.insert(
            0,
            Root {
                x: 0.0,
                multiplicity: zero_cluster,
                appended: true,
            },
        );
    }
    Ok(RootSet {
        roots,
        includes_zero: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly(f: &[f64], parity: Parity) -> TrigPolynomial {
        TrigPolynomial {
            f: f.to_vec(),
            parity,
            h: 1.0,
            scale: f.iter().fold(0.0, |m: f64, c| m.max(c.abs())),
        }
    }

    #[test]
    fn example3_companion() {
        let p = poly(&[-7.5, 15.0, -7.5], Parity::Odd);
        let m = companion_matrix(&p, 1e-12).unwrap();
        assert_eq!(m.nrows(), 4);
        let row: Vec<f64> = m.row(3).iter().cloned().collect();
        assert_eq!(row, vec![1.0, -2.0, 0.0, 2.0]);
        let set = roots_in_0_pi(&p, &RootOptions::default()).unwrap();
        let xs: Vec<(f64, usize)> = set.roots.iter().map(|r| (r.x, r.multiplicity)).collect();
        assert_eq!(xs.len(), 2);
        assert_eq!(xs[0], (0.0, 3));
        assert!((xs[1].0 - PI).abs() < 1e-12 && xs[1].1 == 1);
        assert_eq!(set.alpha(), 2);
    }

    #[test]
    fn example3_raw_roots() {
        let p = poly(&[-7.5, 15.0, -7.5], Parity::Odd);
        let opts = RootOptions {
            cluster: false,
            ..RootOptions::default()
        };
        let set = roots_in_0_pi(&p, &opts).unwrap();
        assert_eq!(set.alpha(), 3);
        let xs = set.crossings();
        assert!(xs[0].abs() < 1e-12);
        assert!(xs[1] > 0.0 && xs[1] < 1e-4);
        assert!((xs[2] - PI).abs() < 1e-12);
    }

    #[test]
    fn cosine_and_sine() {
        let set = roots_in_0_pi(&poly(&[0.0, 1.0], Parity::Even), &RootOptions::default()).unwrap();
        assert_eq!(set.alpha(), 1);
        assert!((set.crossings()[0] - PI / 2.0).abs() < 1e-12);
        assert!(set.roots[0].appended && set.roots[0].x == 0.0);
        let set = roots_in_0_pi(&poly(&[0.0, 1.0], Parity::Odd), &RootOptions::default()).unwrap();
        let xs = set.crossings();
        assert_eq!(xs.len(), 2);
        assert_eq!(xs[0], 0.0);
        assert!((xs[1] - PI).abs() < 1e-12);
        assert!(set.roots.iter().all(|r| r.multiplicity == 1));
    }

    #[test]
    fn degenerate_polynomial() {
        let p = poly(&[0.0, 0.0, 0.0], Parity::Odd);
        assert_eq!(
            companion_matrix(&p, 1e-12),
            Err(RootError::DegenerateZeroPolynomial)
        );
        // only f_0 is irrelevant for sines
        let p = poly(&[3.0, 0.0], Parity::Odd);
        assert_eq!(
            roots_in_0_pi(&p, &RootOptions::default()),
            Err(RootError::DegenerateZeroPolynomial)
        );
    }

    #[test]
    fn constant_cosine_has_no_roots() {
        let set = roots_in_0_pi(&poly(&[2.0, 0.0], Parity::Even), &RootOptions::default()).unwrap();
        assert_eq!(set.alpha(), 0);
        assert_eq!(set.roots.len(), 1);
    }

    #[test]
    fn trailing_trim() {
        let p = poly(&[0.0, 1.0, 1e-20], Parity::Odd);
        assert_eq!(companion_matrix(&p, 1e-12).unwrap().nrows(), 2);
    }
}

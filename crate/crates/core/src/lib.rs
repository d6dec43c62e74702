//! Robust stability certification for linear integral delay systems
//! `ẋ(t) = ∫₀^τ̄ K(τ) x(t-τ) dτ` whose kernel entries are only known to lie
//! between two piecewise-polynomial bounds.
//!
//! The chain runs: [`kernel_model`] validates the bounds, [`freq_transform`]
//! builds the midpoint transform and the uncertainty matrix, [`inclusion_band`]
//! encloses the eigenvalue loci, [`cutoff_check`] excludes `+1` on a finite band
//! and applies the trace test, [`trig_roots`] finds the real-axis crossovers and
//! [`encirclement`] counts encirclements. [`oracle`] holds independent
//! cross-checks (quadrature transforms, Nyquist winding, time simulation).

pub mod cutoff_check;
pub mod encirclement;
pub mod fixtures;
pub mod freq_transform;
pub mod inclusion_band;
pub mod kernel_model;
pub mod oracle;
pub mod trig_roots;

pub use encirclement::{full_pipeline, PipelineOptions, PipelineOutcome};
pub use kernel_model::{ConcreteSplineKernel, SplineKernelBounds};

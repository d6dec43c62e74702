use std::f64::consts::PI;

use idstab::cutoff_check::{
    omega_bar, theorem1_odd_instability, RadiusRule, RootCount, Theorem1Outcome, Verdict,
};
use idstab::encirclement::{
    full_pipeline, section4_algorithm_at, CountOptions, CountingRule, DecidedAt, PipelineOptions,
};
use idstab::fixtures::*;
use idstab::freq_transform::build_frequency_model;
use idstab::kernel_model::{Coefficients, ConcreteSplineKernel, Side, SplineKernelBounds};
use idstab::oracle::{nyquist_winding, simulate};
use idstab::trig_roots::RootOptions;

#[test]
fn two_state_piecewise_constant_is_certified() {
    let out = full_pipeline(&example1(), &PipelineOptions::default()).unwrap();
    let d = &out.diagnostics;
    assert!((d.rho_t - 0.65).abs() < 0.01);
    let c = d.cutoff.as_ref().unwrap();
    assert!((c.omega_bar - 30.87).abs() < 0.05);
    assert!(c.passed);
    assert_eq!(out.verdict, Verdict::RobustStable);
    assert_eq!(d.algorithm.as_ref().unwrap().total_updates(), 0);
}

#[test]
fn literal_unit_levels_give_the_quoted_bound_values() {
    let m = example1_unit_levels();
    assert_eq!(m.eval_bound(Side::Upper, 0, 1, 0.25).unwrap(), -2.0);
    assert_eq!(m.eval_bound(Side::Lower, 0, 1, 0.25).unwrap(), -3.0);
    let fm = build_frequency_model(&m);
    assert!((fm.m_tilde()[(0, 0)] - 0.1).abs() < 1e-12);
    assert!((fm.m_tilde()[(0, 1)] - 0.25).abs() < 1e-12);
}

#[test]
fn scalar_band_at_the_base_radius() {
    let out = full_pipeline(&example2_base(), &PipelineOptions::default()).unwrap();
    let d = &out.diagnostics;
    assert!((d.rho_t - 1.96).abs() < 0.02);
    assert!((d.cutoff.as_ref().unwrap().omega_bar - 12.2).abs() < 0.1);
    assert_eq!(d.roots.as_ref().unwrap().alpha(), 0);
    assert_eq!(out.verdict, Verdict::RobustStable);
    assert_eq!(d.decided_at, DecidedAt::Step5);
}

#[test]
fn shortest_sweep_row_is_certified() {
    let (tau_bar, r) = TABLE1[0];
    let out = full_pipeline(&example2(tau_bar, 0.1, r), &PipelineOptions::default()).unwrap();
    assert_eq!(out.verdict, Verdict::RobustStable);
    assert_eq!(out.diagnostics.decided_at, DecidedAt::Step5);
}

// The longer rows fail the grid exclusion at the quoted radii; the largest
// certifiable radii are slightly smaller.
#[test]
fn longer_sweep_rows_certify_just_below_the_quoted_radii() {
    for (tau_bar, r, below) in [(5.0, 0.035, 0.0345), (10.0, 0.0095, 0.0091)] {
        let quoted =
            full_pipeline(&example2(tau_bar, 0.1, r), &PipelineOptions::default()).unwrap();
        let c = quoted.diagnostics.cutoff.as_ref().unwrap();
        assert!(
            !c.passed && c.min_margin > -0.03,
            "{tau_bar}: {}",
            c.min_margin
        );
        let smaller =
            full_pipeline(&example2(tau_bar, 0.1, below), &PipelineOptions::default()).unwrap();
        assert_eq!(smaller.verdict, Verdict::RobustStable, "{tau_bar}");
    }
}

#[test]
fn hat_kernel_quantities() {
    let m = example3();
    let fm = build_frequency_model(&m);
    assert!((omega_bar(&fm).unwrap().omega_bar - 18.05).abs() < 0.05);
    assert!((fm.m_hat_zero().trace() + 7.5).abs() < 1e-9);

    let raw = PipelineOptions {
        roots: RootOptions {
            cluster: false,
            ..RootOptions::default()
        },
        ..PipelineOptions::default()
    };
    let out = full_pipeline(&m, &raw).unwrap();
    let roots = out.diagnostics.roots.as_ref().unwrap();
    assert_eq!(roots.alpha(), 3);
    let xs = roots.crossings();
    assert!(xs.iter().any(|x| (x - PI).abs() < 1e-9));
    assert!(xs.iter().any(|x| *x < 1e-9));
    assert!(xs.iter().any(|x| *x > 1e-7 && *x < 1e-5));
    let mut values = out.diagnostics.base_values.clone();
    values.sort_by(f64::total_cmp);
    assert!((values[0] + 7.5).abs() < 1e-6 && (values[1] + 7.5).abs() < 1e-6);
    assert!((values[2] - 3.0396).abs() < 1e-3);
}

// Two right-half-plane roots at s ≈ 1.5163 ± 7.5475j; winding and simulation agree.
#[test]
fn hat_kernel_is_unstable_with_two_roots() {
    let m = example3();
    for cluster in [true, false] {
        let opts = PipelineOptions {
            roots: RootOptions {
                cluster,
                ..RootOptions::default()
            },
            ..PipelineOptions::default()
        };
        let out = full_pipeline(&m, &opts).unwrap();
        assert_eq!(
            out.verdict,
            Verdict::Unstable {
                zeta: RootCount::Exact(2)
            }
        );
    }
    let k = ConcreteSplineKernel::new(1, 0.5, m.upper().clone()).unwrap();
    assert_eq!(nyquist_winding(&k, 20.0, 2048).unwrap().winding, 2);
    let t = simulate(&k, |_| vec![1.0], 0.5 / 16.0, 30.0).unwrap();
    assert!((t.growth_rate - 1.5163).abs() < 0.05, "{}", t.growth_rate);
}

#[test]
fn hat_kernel_literal_trace() {
    let fm = build_frequency_model(&example3());
    let xs = [PI, 0.0, 2.8e-6];
    let values: Vec<f64> = xs.iter().map(|x| fm.m_hat_at(x / 0.5).trace().re).collect();
    let opts = CountOptions {
        rule: CountingRule::Literal,
        ..CountOptions::default()
    };
    let (zeta, trace) = section4_algorithm_at(&fm, &xs, &values, &opts).unwrap();
    let updates: Vec<usize> = trace.rounds.iter().map(|r| r.updates).collect();
    assert_eq!(updates, vec![3, 1, 0, 0]);
    let first: Vec<i64> = trace.rounds[0].jumps.iter().map(|j| j.sign).collect();
    assert_eq!(first, vec![1, 1]);
    // the second round's ascent sits at an odd index, which the rule counts negative
    let second = &trace.rounds[1].jumps;
    assert_eq!(second.len(), 1);
    assert!(second[0].ascent && second[0].sign == -1);
    assert_eq!(zeta, 0);
}

#[test]
fn two_state_band_example_is_unstable() {
    let out = full_pipeline(&figure1(), &PipelineOptions::default()).unwrap();
    assert!((out.diagnostics.rho_t - 0.4).abs() < 1e-12);
    assert!(out.diagnostics.trace_m_hat_zero > 2.0);
    assert_eq!(
        out.verdict,
        Verdict::Unstable {
            zeta: RootCount::Exact(2)
        }
    );
}

#[test]
fn constant_kernel_three() {
    let m = SplineKernelBounds::exact(0, 1.0, Coefficients::from_fn(1, 1, |_, _, _| 3.0)).unwrap();
    let out = full_pipeline(&m, &PipelineOptions::default()).unwrap();
    assert_eq!(
        out.verdict,
        Verdict::Unstable {
            zeta: RootCount::Exact(1)
        }
    );
    let k = ConcreteSplineKernel::new(0, 1.0, m.upper().clone()).unwrap();
    assert_eq!(nyquist_winding(&k, 10.0, 1024).unwrap().winding, 1);
}

#[test]
fn scalar_gershgorin_instability() {
    let upper = Coefficients::from_fn(1, 1, |_, _, _| 3.5);
    let lower = Coefficients::from_fn(1, 1, |_, _, _| 2.5);
    let fm = build_frequency_model(&SplineKernelBounds::new(0, 1.0, upper, lower).unwrap());
    let r = theorem1_odd_instability(&fm, RadiusRule::RowSums, 1e8).unwrap();
    assert_eq!(r.outcome, Theorem1Outcome::Unstable);
    assert!(
        (r.circles[0].center.re - 3.0).abs() < 1e-12 && (r.circles[0].radius - 0.5).abs() < 1e-12
    );
}

//! One PASS/FAIL line per acceptance criterion; exits nonzero if any fails.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use idstab::cutoff_check::{omega_bar, RootCount, Verdict};
use idstab::encirclement::{
    full_pipeline, section4_algorithm_at, CountOptions, CountingRule, DecidedAt, PipelineError,
    PipelineOptions,
};
use idstab::fixtures::*;
use idstab::freq_transform::build_frequency_model;
use idstab::inclusion_band::{band_rectangle, kronecker_identity};
use idstab::kernel_model::{integrate_basis, ConcreteSplineKernel};
use idstab::oracle::{
    basis_integral_quadrature, midpoint_transform, nyquist_winding, simulate, verify_inclusions,
};
use idstab::trig_roots::RootOptions;
use idstab::SplineKernelBounds;
use idstab_cli::{emit_band, RunConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn random_model(seed: u64, exact: bool) -> SplineKernelBounds {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=2);
    let degree = rng.random_range(0..=1);
    let knots = rng.random_range(if exact { 1 } else { 2 }..=6);
    let h = rng.random_range(0.2..1.0);
    let scale = rng.random_range(0.5..6.0) / (knots as f64 * h).powi(degree as i32 + 1);
    if exact {
        random_exact(&mut rng, n, degree, knots, h, scale)
    } else {
        let width = rng.random_range(0.0..0.05) * scale;
        random_bounds(&mut rng, n, degree, knots, h, scale, width)
    }
}

fn raw_roots() -> PipelineOptions {
    PipelineOptions {
        roots: RootOptions {
            cluster: false,
            ..RootOptions::default()
        },
        ..PipelineOptions::default()
    }
}

fn zeta_of(v: &Verdict) -> Option<usize> {
    match v {
        Verdict::RobustStable => Some(0),
        Verdict::Unstable {
            zeta: RootCount::Exact(z),
        } => Some(*z),
        _ => None,
    }
}

fn criterion1() -> Outcome {
    let t = Instant::now();
    let out = full_pipeline(&example1(), &PipelineOptions::default()).unwrap();
    let elapsed = t.elapsed();
    let d = &out.diagnostics;
    let c = d.cutoff.as_ref().unwrap();
    let updates = d.algorithm.as_ref().map_or(0, |a| a.total_updates());
    let beyond = (1..=100).all(|q| {
        band_rectangle(
            &build_frequency_model(&example1()),
            c.omega_bar * (1.0 + 0.09 * q as f64),
        )
        .real_margin()
            > 0.0
    });
    let pass = (d.rho_t - 0.65).abs() <= 0.01
        && (c.omega_bar - 30.87).abs() <= 0.05
        && c.passed
        && beyond
        && out.verdict == Verdict::RobustStable
        && updates == 0
        && elapsed < Duration::from_secs(1);
    outcome(
        pass,
        format!(
            "rho(T) {:.4}, omega_bar {:.3}, exclusion {}, verdict {}, updates {updates}",
            d.rho_t,
            c.omega_bar,
            c.passed,
            out.verdict.label()
        ),
    )
}

fn criterion2() -> Outcome {
    let t = Instant::now();
    let base = full_pipeline(&example2_base(), &PipelineOptions::default()).unwrap();
    let d = &base.diagnostics;
    let omega = d.cutoff.as_ref().unwrap().omega_bar;
    let alpha = d.roots.as_ref().map_or(usize::MAX, |r| r.alpha());
    let mut pass = (d.rho_t - 1.96).abs() <= 0.02
        && (omega - 12.2).abs() <= 0.1
        && alpha == 0
        && base.verdict == Verdict::RobustStable
        && d.decided_at == DecidedAt::Step5;
    let mut detail = format!(
        "base: rho(T) {:.4}, omega_bar {omega:.3}, alpha {alpha}, {}",
        d.rho_t,
        base.verdict.label()
    );
    for (tau_bar, r) in TABLE1 {
        let out = full_pipeline(&example2(tau_bar, 0.1, r), &PipelineOptions::default()).unwrap();
        let d = &out.diagnostics;
        let row_ok = out.verdict == Verdict::RobustStable
            && if tau_bar < 10.0 {
                d.decided_at == DecidedAt::Step5
            } else {
                d.algorithm.as_ref().map_or(0, |a| a.total_updates()) == 0
            };
        pass &= row_ok;
        let margin = d.cutoff.as_ref().map_or(f64::NAN, |c| c.min_margin);
        detail += &format!(
            "; tau_bar {tau_bar}: {} (margin {margin:.4})",
            out.verdict.label()
        );
    }
    let elapsed = t.elapsed();
    pass &= elapsed < Duration::from_secs(10);
    outcome(pass, detail)
}

fn criterion3() -> Outcome {
    let t = Instant::now();
    let m = example3();
    let fm = build_frequency_model(&m);
    let w = omega_bar(&fm).unwrap().omega_bar;
    let tr = fm.m_hat_zero().trace();
    let raw = full_pipeline(&m, &raw_roots()).unwrap();
    let clustered = full_pipeline(&m, &PipelineOptions::default()).unwrap();
    let xs = raw.diagnostics.roots.as_ref().unwrap().crossings();
    let alpha_raw = raw.diagnostics.roots.as_ref().unwrap().alpha();
    let alpha_cl = clustered.diagnostics.roots.as_ref().unwrap().alpha();
    let mut values = raw.diagnostics.base_values.clone();
    values.sort_by(f64::total_cmp);
    let roots_ok = alpha_raw == 3
        && xs.iter().any(|x| (x - PI).abs() < 1e-9)
        && xs.iter().any(|x| *x < 1e-9)
        && xs.iter().any(|x| *x > 1e-7 && *x < 1e-5)
        && values.len() == 3
        && (values[0] + 7.5).abs() <= 1e-6
        && (values[1] + 7.5).abs() <= 1e-6
        && (values[2] - 3.0396).abs() <= 1e-3;

    // jump narrative under the rule as written, on the reference root order
    let order = [PI, 0.0, 2.8e-6];
    let vals: Vec<f64> = order
        .iter()
        .map(|x| fm.m_hat_at(x / m.step()).trace().re)
        .collect();
    let opts = CountOptions {
        rule: CountingRule::Literal,
        ..CountOptions::default()
    };
    let (literal_zeta, trace) = section4_algorithm_at(&fm, &order, &vals, &opts).unwrap();
    let signs: Vec<Vec<i64>> = trace
        .rounds
        .iter()
        .map(|r| r.jumps.iter().map(|j| j.sign).collect())
        .collect();
    let narrative = signs
        .iter()
        .filter(|s| !s.is_empty())
        .cloned()
        .collect::<Vec<_>>()
        == vec![vec![1, 1], vec![1], vec![-1]];

    let zeta_raw = zeta_of(&raw.verdict);
    let zeta_cl = zeta_of(&clustered.verdict);
    let elapsed = t.elapsed();
    let pass = (w - 18.05).abs() <= 0.05
        && (tr + 7.5).abs() <= 1e-9
        && roots_ok
        && alpha_cl == 2
        && narrative
        && zeta_raw == Some(0)
        && zeta_cl == Some(0)
        && elapsed < Duration::from_secs(1);
    outcome(
        pass,
        format!(
            "omega_bar {w:.3}, tr {tr:.9}, roots ok {roots_ok} (alpha {alpha_raw}/{alpha_cl}), jumps {signs:?} (literal zeta {literal_zeta}), zeta {zeta_raw:?}/{zeta_cl:?}, verdict {}",
            raw.verdict.label()
        ),
    )
}

fn criterion4() -> Outcome {
    let mut disagreements = Vec::new();
    let mut checked = 0;
    let named = [example1(), example2_base(), example3(), figure1()];
    let tables = TABLE1.iter().map(|&(t, r)| example2(t, 0.1, r));
    for (i, m) in named.into_iter().chain(tables).enumerate() {
        for opts in [PipelineOptions::default(), raw_roots()] {
            match full_pipeline(&m, &opts) {
                Ok(out) => {
                    let d = &out.diagnostics;
                    if d.zeta_theorem3 != d.zeta_iterative {
                        disagreements.push(format!("fixture {i}"));
                    }
                }
                Err(PipelineError::CounterDisagreement { .. }) => {
                    disagreements.push(format!("fixture {i}"))
                }
                Err(_) => {}
            }
        }
    }
    let mut seed = 0;
    while checked < 200 && seed < 4000 {
        match full_pipeline(&random_model(seed, false), &PipelineOptions::default()) {
            Ok(out) if out.diagnostics.trace_test.is_some() => {
                checked += 1;
                if out.diagnostics.zeta_theorem3 != out.diagnostics.zeta_iterative {
                    disagreements.push(format!("seed {seed}"));
                }
            }
            Err(PipelineError::CounterDisagreement { .. }) => {
                checked += 1;
                disagreements.push(format!("seed {seed}"));
            }
            _ => {}
        }
        seed += 1;
    }
    outcome(
        checked >= 200 && disagreements.is_empty(),
        format!("{checked} random models, disagreements {disagreements:?}"),
    )
}

fn criterion5() -> Outcome {
    let (mut compared, mut unstable, mut sim_checked) = (0, 0, 0);
    let mut failures = Vec::new();
    let mut seed = 0;
    while compared < 60 && seed < 1000 {
        let m = random_model(seed, true);
        seed += 1;
        let Ok(out) = full_pipeline(&m, &PipelineOptions::default()) else {
            continue;
        };
        if out.diagnostics.trace_test.is_none() {
            continue;
        }
        let Some(zeta) = zeta_of(&out.verdict) else {
            continue;
        };
        let k = ConcreteSplineKernel::new(m.degree(), m.step(), m.upper().clone()).unwrap();
        let w = match nyquist_winding(&k, out.diagnostics.cutoff.as_ref().unwrap().omega_bar, 2048)
        {
            Ok(w) => w.winding,
            Err(e) => {
                failures.push(format!("seed {}: {e}", seed - 1));
                continue;
            }
        };
        if w != zeta as i64 {
            failures.push(format!("seed {}: zeta {zeta}, winding {w}", seed - 1));
        }
        let n = m.n();
        let t = simulate(
            &k,
            |s| vec![1.0 + 0.3 * s; n],
            m.step() / 16.0,
            40.0 * m.tau_bar(),
        )
        .unwrap();
        if t.growth_rate.abs() >= 1e-2 {
            sim_checked += 1;
            if (zeta == 0) != (t.growth_rate < 0.0) {
                failures.push(format!(
                    "seed {}: zeta {zeta}, growth {:.4}",
                    seed - 1,
                    t.growth_rate
                ));
            }
        }
        compared += 1;
        unstable += (zeta > 0) as usize;
    }
    outcome(
        compared >= 50 && failures.is_empty(),
        format!("{compared} kernels ({unstable} unstable, {sim_checked} simulated outside the margin), mismatches {failures:?}"),
    )
}

fn criterion6() -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, m) in [("example1", example1()), ("figure1", figure1())] {
        let r = verify_inclusions(&m, 1000, 50, 7);
        pass &= r.kernels == 1000
            && r.frequencies == 50
            && r.square_violations == 0
            && r.rectangle_violations == 0;
        detail.push(format!(
            "{name}: {} square, {} rectangle violations",
            r.square_violations, r.rectangle_violations
        ));
    }
    outcome(pass, detail.join("; "))
}

fn criterion7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut worst_transform, mut worst_basis, mut worst_kron) = (0.0f64, 0.0f64, 0.0f64);
    for seed in 0..100 {
        let m = random_model(10_000 + seed, false);
        let fm = build_frequency_model(&m);
        let lo = fm.omega_switch();
        for _ in 0..10 {
            let w = lo * (100.0 / lo).max(1.0).powf(rng.random_range(0.0..=1.0));
            let q = midpoint_transform(&m, w);
            let e = (&fm.m_hat_at(w).value - &q).norm() / q.norm().max(1e-300);
            worst_transform = worst_transform.max(e);
        }
        let (a, b) = kronecker_identity(&fm);
        worst_kron = worst_kron.max((a - b).abs() / a.max(1.0));
    }
    for degree in 0..=4 {
        for knots in 1..=10 {
            let h = rng.random_range(0.05..2.0);
            for k in 0..knots {
                let a = integrate_basis(degree, k, h, knots);
                let b = basis_integral_quadrature(degree, k, h, knots);
                worst_basis = worst_basis.max((a - b).abs() / b.abs().max(1e-300));
            }
        }
    }
    outcome(
        worst_transform < 1e-8 && worst_basis < 1e-8 && worst_kron <= 1e-10,
        format!("transform {worst_transform:.2e}, basis integral {worst_basis:.2e}, Kronecker {worst_kron:.2e}"),
    )
}

fn criterion8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let (mut models, mut violations) = (0, 0);
    let mut seed = 0;
    while models < 50 && seed < 2000 {
        let m = random_model(20_000 + seed, false);
        seed += 1;
        let Ok(out) = full_pipeline(&m, &PipelineOptions::default()) else {
            continue;
        };
        let Some(c) = out.diagnostics.cutoff.as_ref().filter(|c| c.passed) else {
            continue;
        };
        let fm = build_frequency_model(&m);
        for _ in 0..100 {
            let w = c.omega_bar * (1.0 + 9.0 * (1.0 - rng.random_range(0.0..1.0)));
            violations += (band_rectangle(&fm, w).real_margin() <= 0.0) as usize;
        }
        models += 1;
    }
    outcome(
        models >= 50 && violations == 0,
        format!("{models} models, {violations} violations"),
    )
}

fn criterion9() -> Outcome {
    let m = figure1();
    let fm = build_frequency_model(&m);
    let cfg = RunConfig::from_model(&m);
    let mut buf = Vec::new();
    let rows_written = emit_band(&cfg, 1e-6, 60.0, 600, &mut buf).unwrap();
    let rows: Vec<[f64; 5]> = String::from_utf8(buf)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let v: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            [v[0], v[1], v[2], v[3], v[4]]
        })
        .collect();
    let q0 = fm.m_hat_zero().trace() / fm.n() as f64;
    let start = (rows[0][1] - q0).hypot(rows[0][2]);
    let modulus: Vec<f64> = rows.iter().map(|r| r[1].hypot(r[2])).collect();
    // the center decays in lobes, so compare suffix maxima against the start
    let tail_max = modulus[540..].iter().cloned().fold(0.0, f64::max);
    let half_max = modulus[300..].iter().cloned().fold(0.0, f64::max);
    let decays = half_max < 0.02 * q0.abs() && tail_max < 0.01 * q0.abs();
    let floor = fm.rho_t() / 2.0;
    let floored = rows
        .iter()
        .all(|r| r[3] >= floor - 1e-12 && r[4] >= floor - 1e-12);
    outcome(
        rows_written == 600 && start < 1e-4 && decays && floored,
        format!("start offset {start:.2e} from {q0:.4}, second-half max |center| {half_max:.4}, last-tenth max |center| {tail_max:.4}, half-width floor {floor:.3} held {floored}"),
    )
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 9] = [
        ("two-state piecewise-constant example", criterion1),
        ("scalar band example and radius sweep", criterion2),
        ("hat kernel example", criterion3),
        ("counter equivalence", criterion4),
        ("oracle equivalence", criterion5),
        ("inclusion soundness", criterion6),
        ("numerical consistency", criterion7),
        ("finite-range guarantee", criterion8),
        ("band emission", criterion9),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = f();
        let secs = t.elapsed().as_secs_f64();
        failed += !o.pass as usize;
        println!(
            "{} {}: {name} [{secs:.2} s] {}",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

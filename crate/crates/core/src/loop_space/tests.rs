use std::f64::consts::PI;
use std::sync::Arc;

use proptest::prelude::*;

use super::*;
use crate::surface::{Family, Profile};

fn metric(f: Family) -> Arc<Metric<f64>> {
    Arc::new(Metric::intrinsic(Profile::family_default(f)))
}

fn opts() -> ConnectOptions<f64> {
    ConnectOptions {
        segment_cap: 5.0,
        ..Default::default()
    }
}

fn parallel(f: Family, z: f64, degree: i64, j: usize) -> BrokenLoop<f64> {
    BrokenLoop::parallel(metric(f), z, degree, j, opts()).unwrap()
}

/// Central differences of the energy over every node coordinate.
fn fd_covector(l: &BrokenLoop<f64>, h: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for k in 0..l.len() {
        for a in 0..2 {
            let mut p = l.nodes().to_vec();
            p[k][a] += h;
            let ep = l.with_nodes(p).unwrap().energy().unwrap();
            let mut m = l.nodes().to_vec();
            m[k][a] -= h;
            let em = l.with_nodes(m).unwrap().energy().unwrap();
            out.push((ep - em) / (2.0 * h));
        }
    }
    out
}

fn wavy(f: Family, z0: f64, amp: f64, j: usize) -> BrokenLoop<f64> {
    let nodes = (0..j)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / j as f64;
            [
                t + 0.05 * (3.0 * t).sin(),
                z0 + amp * (2.0 * t).cos() + 0.3 * amp * t.sin(),
            ]
        })
        .collect();
    BrokenLoop::new(metric(f), nodes, 1, opts()).unwrap()
}

#[test]
fn flat_parallel_energy_and_zero_gradient() {
    let l = parallel(Family::Flat, 0.0, 1, 32);
    assert!((l.energy().unwrap() - 4.0 * PI * PI).abs() < 1e-12);
    for g in l.gradient().unwrap() {
        assert!(g.dtheta.abs() < 1e-12 && g.dz.abs() < 1e-12);
    }
}

#[test]
fn constant_loop_has_zero_energy_and_degree() {
    let l = BrokenLoop::new(metric(Family::CoshWaist), vec![[0.4, 0.2]; 5], 0, opts()).unwrap();
    assert_eq!(l.energy().unwrap(), 0.0);
    assert_eq!(l.degree(), 0);
    assert_eq!(l.relative_gradient_norm().unwrap(), 0.0);
}

#[test]
fn iterate_scales_energy_and_degree() {
    let l = wavy(Family::GaussianBump, 0.2, 0.1, 24);
    let e = l.energy().unwrap();
    let l1 = l.iterate(1).unwrap();
    assert_eq!(l1.nodes(), l.nodes());
    assert_eq!(l1.energy().unwrap(), e);
    let l3 = l.iterate(3).unwrap();
    assert_eq!(l3.energy().unwrap(), 9.0 * e);
    assert_eq!(l3.degree(), 3);
    assert_eq!(l3.len(), 72);
    let waist = parallel(Family::CoshWaist, 0.0, 1, 32).iterate(3).unwrap();
    assert!((waist.energy().unwrap() - 9.0 * 4.0 * PI * PI).abs() < 1e-10);
    assert!(l.iterate(0).is_err());
}

#[test]
fn iterate_matches_reconnected_energy() {
    let l = wavy(Family::DoubleWell, 0.5, 0.1, 20).iterate(2).unwrap();
    let fresh = l.reconnect().unwrap();
    assert!((l.energy().unwrap() - fresh.energy().unwrap()).abs() < 1e-10 * fresh.energy().unwrap());
}

#[test]
fn degree_examples() {
    assert_eq!(parallel(Family::Flat, 0.0, 2, 16).degree(), 2);
    let pts: Vec<Point<f64>> = [0.0, 1.0, 2.0, 3.0, 2.0, 1.0]
        .iter()
        .map(|t| Point::new(*t, 0.1 * t))
        .collect();
    let l = BrokenLoop::from_points(metric(Family::Flat), &pts, opts()).unwrap();
    assert_eq!(l.degree(), 0);
    let around: Vec<Point<f64>> = (0..12).map(|i| Point::new(i as f64 * PI / 6.0, 0.0)).collect();
    assert_eq!(
        BrokenLoop::from_points(metric(Family::Flat), &around, opts())
            .unwrap()
            .degree(),
        1
    );
}

#[test]
fn gradient_on_cosh_parallel_points_to_larger_z() {
    // descent direction (−G) points toward the waist
    let l = parallel(Family::CoshWaist, 0.5, 1, 16);
    for g in l.gradient().unwrap() {
        assert!(g.dz > 0.0, "{}", g.dz);
    }
    let fd = fd_covector(&l, 1e-6);
    let c = l.covector().unwrap();
    for k in 0..l.len() {
        assert!(fd[2 * k + 1] > 0.0);
        assert!((fd[2 * k + 1] - c[2 * k + 1]).abs() < 1e-5 * c[2 * k + 1].abs());
    }
}

#[test]
fn gradient_matches_finite_differences() {
    for (f, z) in [
        (Family::GaussianBump, 0.3),
        (Family::DoubleWell, -0.6),
        (Family::TanhCubedInflection, 0.2),
    ] {
        let l = wavy(f, z, 0.15, 18);
        let c = l.covector().unwrap();
        let fd = fd_covector(&l, 1e-6);
        let scale = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let err = c.iter().zip(&fd).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-4 * scale, "{f:?}: {err} vs {scale}");
    }
}

#[test]
fn parallels_critical_iff_profile_is_stationary() {
    for j in [5, 7, 32] {
        assert!(parallel(Family::DoubleWell, 0.0, 1, j).gradient_norm().unwrap() < 1e-9);
        let zm = -(0.5f64).sqrt();
        assert!(parallel(Family::DoubleWell, zm, 1, j).relative_gradient_norm().unwrap() < 1e-9);
        assert!(
            parallel(Family::DoubleWell, 0.3, 1, j)
                .relative_gradient_norm()
                .unwrap()
                > 1e-3
        );
    }
}

#[test]
fn stale_segments_are_reported() {
    let l = BrokenLoop::unconnected(
        metric(Family::Flat),
        vec![[0.0, 0.0], [2.0, 0.0], [4.0, 0.0]],
        1,
        opts(),
    )
    .unwrap();
    assert_eq!(l.gradient().unwrap_err(), Error::StaleSegments);
    assert!(l.reconnect().unwrap().gradient().is_ok());
}

#[test]
fn rejects_short_loops_and_out_of_domain_nodes() {
    assert!(BrokenLoop::new(metric(Family::Flat), vec![[0.0, 0.0], [1.0, 0.0]], 0, opts()).is_err());
    let plane = metric(Family::PlaneTanh);
    let e = BrokenLoop::parallel(plane, 0.005, 1, 8, opts()).unwrap_err();
    assert!(matches!(e, Error::PoleExclusion { .. }));
}

#[test]
fn resample_examples() {
    let l = parallel(Family::Flat, 0.3, 1, 32);
    let r = l.resample(64).unwrap();
    assert!((r.energy().unwrap() - l.energy().unwrap()).abs() < 1e-12);
    assert_eq!(r.degree(), 1);
    assert!(l.resample(2).is_err());
    let w = wavy(Family::GaussianBump, 0.0, 0.1, 20);
    let e = w.energy().unwrap();
    let r = w.resample(40).unwrap();
    assert!(r.energy().unwrap() <= e * (1.0 + 1e-12));
    let odd = w.resample(33).unwrap();
    assert!(odd.energy().unwrap() <= e * (1.0 + 1e-9));
}

#[test]
fn descent_examples() {
    let p = DescentParams::default();
    let seed = parallel(Family::CoshWaist, 1.0, 1, 64);
    let r = descend(&seed, &p).unwrap();
    assert_eq!(
        r.outcome,
        DescentOutcome::Converged,
        "{:?} {:?}",
        r.diagnostic,
        r.gradient_norm
    );
    assert!(r.final_loop.nodes().iter().all(|x| x[1].abs() < 1e-5));
    let e = r.final_loop.energy().unwrap();
    assert!((e - 4.0 * PI * PI).abs() < 1e-6 * 4.0 * PI * PI);
    assert!(r.energy_trace.windows(2).all(|w| w[1] <= w[0]));

    let flat = descend(&parallel(Family::Flat, 2.0, 1, 32), &p).unwrap();
    assert_eq!(flat.outcome, DescentOutcome::Converged);
    assert_eq!(flat.iterations, 0);

    let esc = descend(&wavy(Family::ExpMonotone, 0.0, 0.1, 32), &p).unwrap();
    assert_eq!(esc.outcome, DescentOutcome::Escaped);
    assert_eq!(esc.final_loop.degree(), 1);
}

#[test]
fn steepest_rule_also_descends() {
    let p = DescentParams {
        step_rule: StepRule::Steepest,
        max_iter: 50,
        ..Default::default()
    };
    let r = descend(&wavy(Family::CoshWaist, 0.4, 0.1, 16), &p).unwrap();
    assert!(r.energy_trace.windows(2).all(|w| w[1] <= w[0]));
    assert!(r.energy_trace.last().unwrap() < &r.energy_trace[0]);
}

#[test]
fn distinctness_examples() {
    let waist = parallel(Family::CoshWaist, 0.0, 1, 32);
    let rotated = waist.rotate(16).unwrap();
    assert!(!geometric_distinct(&waist, &rotated, 1e-3).unwrap());
    assert!(!geometric_distinct(&waist, &waist.iterate(2).unwrap(), 1e-3).unwrap());
    let half = waist.resample(45).unwrap();
    assert!(!geometric_distinct(&waist, &half, 1e-3).unwrap());

    let zm = 0.5f64.sqrt();
    let a = parallel(Family::DoubleWell, -zm, 1, 32);
    let b = parallel(Family::DoubleWell, zm, 1, 32);
    assert!(geometric_distinct(&a, &b, 1e-3).unwrap());
    let d = hausdorff_distance(&a, &b).unwrap();
    assert!((d - 2.0f64.sqrt()).abs() < 1e-9);
}

#[test]
fn text_format_roundtrip() {
    let l = wavy(Family::GaussianBump, 0.1, 0.2, 12);
    let text = l.to_text();
    assert!(text.starts_with("# degree=1 j=12\n"));
    let back = parse_loop_text::<f64>(&text)
        .unwrap()
        .into_loop(metric(Family::GaussianBump), opts())
        .unwrap();
    assert_eq!(back.nodes(), l.nodes());
    assert!(parse_loop_text::<f64>("# degree=1 j=4\n0 0\n1 0\n").is_err());
    assert!(parse_loop_text::<f64>("0 0\n").is_err());
}

#[test]
fn hessian_is_symmetric_and_matches_gradient_differences() {
    let l = wavy(Family::GaussianBump, 0.0, 0.1, 12);
    let h = l.hessian(1e-5).unwrap();
    // column 5 against differences of the full covector
    let mut p = l.nodes().to_vec();
    p[2][1] += 1e-5;
    let cp = l.with_nodes(p).unwrap().covector().unwrap();
    let mut m = l.nodes().to_vec();
    m[2][1] -= 1e-5;
    let cm = l.with_nodes(m).unwrap().covector().unwrap();
    for r in 0..h.dim() {
        let fd = (cp[r] - cm[r]) / 2e-5;
        assert!(
            (h.get(r, 5) - fd).abs() < 1e-4 * (1.0 + fd.abs()),
            "row {r}: {} vs {fd}",
            h.get(r, 5)
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn rotation_and_reversal_invariance(k in 0usize..20, amp in 0.0f64..0.2, z in -0.5f64..0.5) {
        let l = wavy(Family::GaussianBump, z, amp, 20);
        let r = l.rotate(k).unwrap();
        prop_assert_eq!(r.energy().unwrap(), l.energy().unwrap());
        let (g0, g1) = (l.gradient_norm().unwrap(), r.gradient_norm().unwrap());
        prop_assert!((g0 - g1).abs() <= 1e-12 * (1.0 + g0));
        let rev = l.reversed().unwrap();
        prop_assert_eq!(rev.degree(), -1);
        let (e0, e1) = (l.energy().unwrap(), rev.energy().unwrap());
        prop_assert!((e0 - e1).abs() <= 1e-10 * e0);
    }

    #[test]
    fn iterate_energy_is_exactly_quadratic(m in 1usize..5, amp in 0.0f64..0.2) {
        let l = wavy(Family::DoubleWell, 0.6, amp, 16);
        let e = l.energy().unwrap();
        prop_assert_eq!(l.iterate(m).unwrap().energy().unwrap(), (m * m) as f64 * e);
        prop_assert_eq!(l.iterate(m).unwrap().degree(), m as i64);
    }

    #[test]
    fn descent_is_monotone_and_keeps_degree(amp in 0.0f64..0.3, z in -1.0f64..1.0) {
        let p = DescentParams { max_iter: 30, ..Default::default() };
        let r = descend(&wavy(Family::CoshWaist, z, amp, 16), &p).unwrap();
        prop_assert!(r.energy_trace.windows(2).all(|w| w[1] <= w[0]));
        prop_assert_eq!(r.final_loop.degree(), 1);
    }
}

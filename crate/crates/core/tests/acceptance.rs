#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use geocensus::census::{self, CensusConfig, CensusReport, Provenance};
use geocensus::geodesic_flow::{integrate, momentum_at, shoot_closed, ConnectOptions, ShootOptions};
use geocensus::index::{analyze, discrete_hessian, Classification, IndexOptions};
use geocensus::loop_space::{descend, geometric_distinct, BrokenLoop, DescentOutcome, DescentParams};
use geocensus::minimax::{mountain_pass, MinimaxParams, MinimaxStatus};
use geocensus::surface::{Family, Metric, Point, Profile, Tangent};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

const FOUR_PI_SQ: f64 = 4.0 * PI * PI;

/// Energy of the tilted (1, 1) Clairaut geodesic of r = 2 − z² + z⁴, from an
/// independent quadrature of the θ advance and the oscillation length.
const DOUBLE_WELL_SADDLE_ORACLE: f64 = 142.43928720855683;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn metric(f: Family) -> Arc<Metric<f64>> {
    Arc::new(Metric::intrinsic(Profile::family_default(f)))
}

fn scenario(name: &str) -> CensusConfig {
    let s = census::builtin_scenarios()
        .into_iter()
        .find(|s| s.name == name)
        .expect("scenario exists");
    s.config().expect("frozen config parses")
}

fn run(cfg: &CensusConfig) -> Result<CensusReport, String> {
    census::run_census(cfg).map_err(|e| e.to_string())
}

fn within(t: Duration, limit: f64, what: &str) -> Result<(), String> {
    if t.as_secs_f64() < limit {
        Ok(())
    } else {
        Err(format!("{what} took {:.1} s, limit {limit} s", t.as_secs_f64()))
    }
}

fn gradient_exactness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20_261_014);
    let surfaces = [
        Family::CoshWaist,
        Family::DoubleWell,
        Family::GaussianBump,
        Family::TanhCubedInflection,
    ];
    let mut worst = 0.0f64;
    for k in 0..50 {
        let m = metric(surfaces[k % 4]);
        let z0 = rng.gen_range(-1.0..1.0);
        let circumference = 2.0 * PI * m.warp(z0).map_err(|e| e.to_string())?.s;
        let j = rng.gen_range(12..=24).max((1.6 * circumference).ceil() as usize);
        let base = BrokenLoop::parallel(m, z0, 1, j, ConnectOptions::default()).map_err(|e| e.to_string())?;
        let nodes: Vec<[f64; 2]> = base
            .nodes()
            .iter()
            .map(|x| [x[0] + rng.gen_range(-0.05..0.05), x[1] + rng.gen_range(-0.2..0.2)])
            .collect();
        let lp = base.with_nodes(nodes.clone()).map_err(|e| e.to_string())?;
        let grad = lp.covector().map_err(|e| e.to_string())?;
        let h = 1e-6;
        let mut fd = Vec::with_capacity(grad.len());
        for i in 0..grad.len() {
            let energy_at = |d: f64| {
                let mut n = nodes.clone();
                n[i / 2][i % 2] += d;
                lp.with_nodes(n).and_then(|l| l.energy()).map_err(|e| e.to_string())
            };
            fd.push((energy_at(h)? - energy_at(-h)?) / (2.0 * h));
        }
        let scale = fd.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
        let err = grad.iter().zip(&fd).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale;
        worst = worst.max(err);
    }
    ensure!(worst <= 1e-4, "max relative gradient error {worst:e}");
    within(start.elapsed(), 10.0, "gradient check")?;
    Ok(format!(
        "max relative error {worst:.2e} over 50 loops in {:.2} s",
        start.elapsed().as_secs_f64()
    ))
}

fn flat_cylinder() -> Outcome {
    let m = metric(Family::Flat);
    let base = BrokenLoop::parallel(m, 0.3, 1, 32, ConnectOptions::default()).map_err(|e| e.to_string())?;
    let tilted = base.nodes().iter().map(|x| [x[0], x[1] + 0.05 * x[0].cos()]).collect();
    let start = base.with_nodes(tilted).map_err(|e| e.to_string())?;
    let r = descend(&start, &DescentParams::default()).map_err(|e| e.to_string())?;
    ensure!(r.outcome == DescentOutcome::Converged, "descent {}", r.outcome.name());
    let e = r.final_loop.energy().map_err(|e| e.to_string())?;
    ensure!((e - FOUR_PI_SQ).abs() <= 1e-9, "energy {e:?}");
    let rep = analyze(&r.final_loop, &IndexOptions::default()).map_err(|e| e.to_string())?;
    ensure!(rep.ind_omega() == 0, "ind_omega {}", rep.ind_omega());
    ensure!(rep.nullity() == 1, "nullity {}", rep.nullity());
    Ok(format!("E - 4π² = {:.1e}, ind_omega 0, nullity 1", e - FOUR_PI_SQ))
}

fn unique_waist() -> Outcome {
    let cfg = scenario("unique-waist");
    ensure!(cfg.search.seeds.len() >= 4, "fewer than 4 seeds");
    let report = run(&cfg)?;
    ensure!(report.groups.len() == 1, "{} groups", report.groups.len());
    let converged = report
        .records
        .iter()
        .filter(|r| r.provenance == Provenance::Descent)
        .count();
    ensure!(converged >= 4, "{converged} descents converged");
    let g = &report.groups[0];
    ensure!(
        ((g.energy - FOUR_PI_SQ) / FOUR_PI_SQ).abs() <= 1e-6,
        "group energy {:?}",
        g.energy
    );
    ensure!(
        g.classification == Classification::NondegenerateMinimum,
        "class {}",
        g.classification.name()
    );
    for r in &report.records {
        ensure!(r.index.iterates.len() >= 16, "only {} iterates", r.index.iterates.len());
        for it in &r.index.iterates {
            ensure!(
                it.ind_omega == 0 && it.nullity == 0,
                "record {} iterate {}: {:?}",
                r.id,
                it.k,
                it
            );
        }
        ensure!(r.index.mind == 0.0, "record {} mind {:?}", r.id, r.index.mind);
    }
    Ok(format!("1 group of {} records at E = {:?}", g.members.len(), g.energy))
}

fn no_geodesic() -> Outcome {
    let start = Instant::now();
    let cfg = scenario("monotone");
    let window = cfg.window(&*cfg.metric_arc::<f64>().map_err(|e| e.to_string())?);
    let levels = census::parallel_levels(&cfg.metric::<f64>().map_err(|e| e.to_string())?, window, 2401)
        .map_err(|e| e.to_string())?;
    ensure!(levels.is_empty(), "scan found {levels:?}");
    let report = run(&cfg)?;
    ensure!(report.records.is_empty(), "{} records", report.records.len());
    let descents: Vec<_> = report.tasks.iter().filter(|t| t.task.starts_with("descend")).collect();
    ensure!(!descents.is_empty(), "no descents ran");
    for t in &descents {
        ensure!(t.status == "escaped", "{}: {}", t.task, t.status);
    }
    within(start.elapsed(), 60.0, "monotone census")?;
    Ok(format!(
        "{} descents escaped, 0 records, {:.2} s",
        descents.len(),
        start.elapsed().as_secs_f64()
    ))
}

fn invisible_candidate() -> Outcome {
    let report = run(&scenario("inflection"))?;
    ensure!(report.groups.len() == 1, "{} groups", report.groups.len());
    let g = &report.groups[0];
    ensure!(
        g.classification == Classification::DegenerateFlat,
        "class {}",
        g.classification.name()
    );
    let r = &report.records[g.representative];
    ensure!(r.index.iterates.len() >= 16, "only {} iterates", r.index.iterates.len());
    ensure!(r.index.iterates.iter().all(|i| i.ind_omega == 0), "nonzero ind_omega");
    ensure!(r.index.nullity() == 1, "nullity {}", r.index.nullity());
    Ok("1 group, degenerate_flat, ind_omega 0 for k <= 16, nullity 1".into())
}

fn bulge_closed_forms() -> Outcome {
    let m = metric(Family::GaussianBump);
    let waist = BrokenLoop::parallel(m, 0.0, 1, 128, ConnectOptions::default()).map_err(|e| e.to_string())?;
    let opts = IndexOptions {
        hessian: true,
        ..IndexOptions::default()
    };
    let rep = analyze(&waist, &opts).map_err(|e| e.to_string())?;
    let om = |k: usize| rep.iterates[k - 1].ind_omega;
    ensure!(om(1) == 3, "ind_omega(c) = {}", om(1));
    ensure!(om(3) == 11, "ind_omega(c³) = {}", om(3));
    ensure!((rep.mind - 4.0).abs() <= 0.01, "mind {:?}", rep.mind);
    let neg = rep.hessian.as_ref().map(|h| h.negatives).ok_or("no Hessian")?;
    ensure!(neg == 3 || neg == 4, "Hessian negatives {neg}");
    for it in &rep.iterates {
        ensure!(it.index + 1 >= 4 * it.k, "ind(c^{}) = {} < 4k - 1", it.k, it.index);
    }
    Ok(format!(
        "ind_omega 3 / 11, mind {:.4}, Hessian negatives {neg}, Bott holds to k = 16",
        rep.mind
    ))
}

fn mountain_pass_double_well() -> Outcome {
    let start = Instant::now();
    let m = metric(Family::DoubleWell);
    // independent in-process oracle: the tilted (1, 1) Clairaut geodesic
    let shot = shoot_closed(&*m, 1, 1, (1.7501, 1.9999), &ShootOptions::default())
        .map_err(|e| e.to_string())?
        .ok_or("no (1, 1) geodesic between the wells")?;
    let oracle = shot.length * shot.length;
    ensure!(
        (oracle - DOUBLE_WELL_SADDLE_ORACLE).abs() <= 1e-6 * DOUBLE_WELL_SADDLE_ORACLE,
        "shooting oracle {oracle:?} vs quadrature {DOUBLE_WELL_SADDLE_ORACLE:?}"
    );
    let z = 0.5f64.sqrt();
    let a = BrokenLoop::parallel(m.clone(), -z, 1, 64, ConnectOptions::default()).map_err(|e| e.to_string())?;
    let b = BrokenLoop::parallel(m, z, 1, 64, ConnectOptions::default()).map_err(|e| e.to_string())?;
    let params = MinimaxParams {
        stages: 33,
        ..MinimaxParams::default()
    };
    let r = mountain_pass(&a, &b, &params).map_err(|e| e.to_string())?;
    ensure!(r.status == MinimaxStatus::SaddleFound, "status {}", r.status.name());
    let lo = (2.0 * PI * 1.75).powi(2);
    let hi = 16.0 * PI * PI + 1e-3;
    ensure!(
        r.kappa > lo && r.kappa <= hi,
        "kappa {:?} outside ({lo}, {hi}]",
        r.kappa
    );
    ensure!(
        r.saddle.is_critical(1e-8).map_err(|e| e.to_string())?,
        "saddle not critical at 1e-8"
    );
    let h = discrete_hessian(&r.saddle, 1e-5, 1e-6).map_err(|e| e.to_string())?;
    ensure!(h.negatives >= 1, "no negative Hessian eigenvalue");
    ensure!(
        (r.kappa - DOUBLE_WELL_SADDLE_ORACLE).abs() <= 1e-6 * DOUBLE_WELL_SADDLE_ORACLE,
        "kappa {:?} is not the frozen saddle {DOUBLE_WELL_SADDLE_ORACLE:?}",
        r.kappa
    );
    within(start.elapsed(), 300.0, "mountain pass")?;
    Ok(format!(
        "kappa {:?} (oracle {oracle:?}), {} negative(s), {:.1} s",
        r.kappa,
        h.negatives,
        start.elapsed().as_secs_f64()
    ))
}

fn intersecting_geodesics() -> Outcome {
    let m = metric(Family::GaussianBump);
    let opts = ShootOptions::default();
    let shot = shoot_closed(&*m, 2, 1, (1.01, 1.99), &opts)
        .map_err(|e| e.to_string())?
        .ok_or("shoot_closed(n_osc = 2, q = 1) found no closed geodesic")?;
    ensure!(shot.closure_defect < 1e-6, "closure defect {:e}", shot.closure_defect);
    ensure!(
        shot.z_range.0 < 0.0 && shot.z_range.1 > 0.0,
        "does not cross the waist: {:?}",
        shot.z_range
    );
    let j = 64.max((1.25 * shot.length).ceil() as usize);
    let nodes = shot.nodes(&*m, j, opts.h).map_err(|e| e.to_string())?;
    let lp = BrokenLoop::new(m.clone(), nodes, shot.degree(), ConnectOptions::default()).map_err(|e| e.to_string())?;
    let waist = BrokenLoop::parallel(m, 0.0, 1, 64, ConnectOptions::default()).map_err(|e| e.to_string())?;
    ensure!(
        geometric_distinct(&lp, &waist, 1e-3).map_err(|e| e.to_string())?,
        "not distinct from the waist"
    );
    Ok(format!("closure defect {:.1e}, crosses z = 0", shot.closure_defect))
}

fn drifts(m: &Metric<f64>, h: f64) -> Result<(f64, f64), String> {
    let x = [0.0, 0.4];
    let r = m.warp(x[1]).map_err(|e| e.to_string())?.s;
    let phi = 1.1f64;
    let v = [phi.cos() / r, phi.sin()];
    let traj = integrate(
        m,
        Point::new(x[0], x[1]),
        Tangent::new(Point::new(x[0], x[1]), v[0], v[1]),
        50.0,
        h,
    )
    .map_err(|e| e.to_string())?;
    let p0 = momentum_at(m, x, v).map_err(|e| e.to_string())?;
    let mut speed = 0.0f64;
    let mut clairaut = 0.0f64;
    for s in &traj.samples {
        speed = speed.max((m.norm_sq(s.x, s.v).map_err(|e| e.to_string())? - 1.0).abs());
        clairaut = clairaut.max((momentum_at(m, s.x, s.v).map_err(|e| e.to_string())? - p0).abs());
    }
    ensure!(
        (traj.samples.last().map_or(0.0, |s| s.t) - 50.0).abs() < 1e-9,
        "trajectory stopped early"
    );
    Ok((speed, clairaut))
}

fn integrator_order() -> Outcome {
    let m = metric(Family::GaussianBump);
    let (s1, c1) = drifts(&m, 0.1)?;
    let (s2, c2) = drifts(&m, 0.05)?;
    let (rs, rc) = (s1 / s2, c1 / c2);
    ensure!(rs >= 12.0, "speed drift ratio {rs:.2} ({s1:e} -> {s2:e})");
    ensure!(rc >= 12.0, "Clairaut drift ratio {rc:.2} ({c1:e} -> {c2:e})");
    Ok(format!("speed drift ratio {rs:.1}, Clairaut drift ratio {rc:.1}"))
}

fn determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_geocensus");
    let root = env!("CARGO_MANIFEST_DIR");
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut checked = Vec::new();
    for name in ["unique-waist", "inflection", "double-well"] {
        let cfg = format!("{root}/scenarios/{name}.toml");
        let mut outputs = Vec::new();
        for run in 0..2 {
            let out = tmp.path().join(format!("{name}-{run}"));
            let status = Command::new(bin)
                .args(["census", "--config", &cfg, "--out"])
                .arg(&out)
                .status()
                .map_err(|e| e.to_string())?;
            ensure!(status.success(), "{name} run {run} exited with {status}");
            let json = std::fs::read(out.join("census.json")).map_err(|e| e.to_string())?;
            let csv = std::fs::read(out.join("census.csv")).map_err(|e| e.to_string())?;
            outputs.push((json, csv));
        }
        ensure!(outputs[0] == outputs[1], "{name}: reports differ between runs");
        checked.push(name);
    }
    Ok(format!("byte-identical reports for {}", checked.join(", ")))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("gradient exactness", gradient_exactness),
        ("flat cylinder ground truth", flat_cylinder),
        ("unique waist", unique_waist),
        ("no geodesic", no_geodesic),
        ("invisible candidate", invisible_candidate),
        ("bulge index closed forms", bulge_closed_forms),
        ("mountain pass", mountain_pass_double_well),
        ("intersecting geodesics", intersecting_geodesics),
        ("integrator order", integrator_order),
        ("determinism", determinism),
    ];
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !only.is_empty() && !only.iter().any(|o| o == &n.to_string() || name.contains(o.as_str())) {
            continue;
        }
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        match result {
            Ok(detail) => println!("criterion {n:>2} {name:<28} PASS  {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n:>2} {name:<28} FAIL  {detail}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion/criteria failed");
        ExitCode::FAILURE
    }
}

//! Closed-geodesic census: parallel scans, descents, minimax searches and
//! Clairaut shooting on one configured surface, merged into a single
//! deterministic report.

pub mod config;
pub mod report;
pub mod scenarios;

use std::path::PathBuf;
use std::sync::Arc;

use rayon::prelude::*;

pub use config::{CensusConfig, OutputFormat};
pub use report::{CensusReport, GeodesicRecord, GroupSummary, Provenance, SurfaceSummary, TaskLog, UnionFind};
pub use scenarios::{builtin_scenarios, verify_scenarios, Scenario, ScenarioCheck};

use crate::error::{Error, Result};
use crate::geodesic_flow::shoot_closed;
use crate::index::{analyze, Classification};
use crate::loop_space::{descend, geometric_distinct, refine_critical, BrokenLoop, DescentOutcome};
use crate::minimax::{mountain_pass, sweep, write_trace, MinimaxResult, MinimaxStatus};
use crate::surface::Metric;

/// Which census stages to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TaskSet {
    pub scan: bool,
    pub descend: bool,
    pub pass: bool,
    pub sweep: bool,
    pub shoot: bool,
}

impl TaskSet {
    pub const ALL: TaskSet = TaskSet {
        scan: true,
        descend: true,
        pass: true,
        sweep: true,
        shoot: true,
    };
    pub const NONE: TaskSet = TaskSet {
        scan: false,
        descend: false,
        pass: false,
        sweep: false,
        shoot: false,
    };
}

/// Side outputs of a run.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Directory for minimax traces and shooting trajectories.
    pub trace_dir: Option<PathBuf>,
}

/// A loop produced by some task, before index analysis.
#[derive(Clone, Debug)]
struct Candidate {
    provenance: Provenance,
    source: String,
    lp: BrokenLoop<f64>,
}

struct Analyzed {
    cand: Candidate,
    index: crate::index::IndexReport,
}

type TaskOutput = (Vec<Candidate>, TaskLog);

fn log(task: impl Into<String>, status: impl Into<String>, detail: Option<String>) -> TaskLog {
    TaskLog {
        task: task.into(),
        status: status.into(),
        detail,
    }
}

/// z-levels in `window` where `s′ = 0`, i.e. where the parallels are geodesics.
///
/// Sign changes are bisected to 1e-10; interior local minima of `|s′|` that
/// reach zero catch tangential roots such as inflection levels.
pub fn parallel_levels(m: &Metric<f64>, window: (f64, f64), points: usize) -> Result<Vec<f64>> {
    let (lo, hi) = window;
    let n = points.max(3) - 1;
    let ds = |z: f64| m.warp(z).map(|w| w.s1);
    let zs: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
    let vals: Vec<f64> = zs.iter().map(|&z| ds(z)).collect::<Result<_>>()?;
    let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let mut roots = Vec::new();
    // runs of exact zeros (a flat stretch) contribute their midpoint
    let mut i = 0;
    while i <= n {
        if vals[i] == 0.0 {
            let start = i;
            while i < n && vals[i + 1] == 0.0 {
                i += 1;
            }
            roots.push(0.5 * (zs[start] + zs[i]));
        }
        i += 1;
    }
    for i in 0..n {
        let (a, b) = (vals[i], vals[i + 1]);
        if a * b < 0.0 {
            let (mut l, mut r, mut fl) = (zs[i], zs[i + 1], a);
            while r - l > 1e-10 {
                let mid = 0.5 * (l + r);
                let fm = ds(mid)?;
                if fm == 0.0 {
                    l = mid;
                    r = mid;
                    break;
                }
                if (fm < 0.0) == (fl < 0.0) {
                    l = mid;
                    fl = fm;
                } else {
                    r = mid;
                }
            }
            roots.push(0.5 * (l + r));
        }
    }
    // tangential roots: |s′| has an interior local minimum without a sign change
    for i in 1..n {
        let (a, b, c) = (vals[i - 1], vals[i], vals[i + 1]);
        if b == 0.0 || a * b <= 0.0 || b * c <= 0.0 || !(b.abs() <= a.abs() && b.abs() <= c.abs()) {
            continue;
        }
        let f = |z: f64| ds(z).map(f64::abs);
        let (mut l, mut r) = (zs[i - 1], zs[i + 1]);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let (mut x1, mut x2) = (r - g * (r - l), l + g * (r - l));
        let (mut f1, mut f2) = (f(x1)?, f(x2)?);
        while r - l > 1e-10 {
            if f1 < f2 {
                r = x2;
                x2 = x1;
                f2 = f1;
                x1 = r - g * (r - l);
                f1 = f(x1)?;
            } else {
                l = x1;
                x1 = x2;
                f1 = f2;
                x2 = l + g * (r - l);
                f2 = f(x2)?;
            }
        }
        let z = 0.5 * (l + r);
        if f(z)? <= 1e-12 * scale {
            roots.push(z);
        }
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-8);
    Ok(roots)
}

/// Largest loop discretization the census will build.
pub const MAX_NODES: usize = 20_000;

/// Node count giving segments well under the cap for a loop of length `length`.
fn nodes_for(length: f64, eps: f64, j: usize) -> Result<usize> {
    let n = 1.25 * length / eps;
    if !(n <= MAX_NODES as f64) {
        return Err(Error::Precondition(format!(
            "a loop of length {length:e} needs more than {MAX_NODES} nodes"
        )));
    }
    Ok(j.max(n.ceil() as usize))
}

fn parallel_loop(cfg: &CensusConfig, m: &Arc<Metric<f64>>, z: f64, degree: i64) -> Result<BrokenLoop<f64>> {
    let length = m.parallel_data(z, degree)?.length;
    let j = nodes_for(length, cfg.discretization.epsilon, cfg.discretization.j)?;
    BrokenLoop::parallel(m.clone(), z, degree, j, cfg.connect_options())
}

fn scan_task(cfg: &CensusConfig, m: &Arc<Metric<f64>>) -> TaskOutput {
    if !m.is_revolution() {
        return (
            Vec::new(),
            log("scan", "skipped", Some("metric is not a surface of revolution".into())),
        );
    }
    let window = cfg.window(m);
    let levels = match parallel_levels(m, window, cfg.search.scan_points) {
        Ok(l) => l,
        Err(e) => return (Vec::new(), log("scan", "failed", Some(e.to_string()))),
    };
    let mut out = Vec::new();
    let mut failures = Vec::new();
    for &z in &levels {
        for &d in &cfg.search.degrees {
            match parallel_loop(cfg, m, z, d) {
                Ok(lp) => out.push(Candidate {
                    provenance: Provenance::ParallelScan,
                    source: format!("scan z={z:.10} degree={d}"),
                    lp,
                }),
                Err(e) => failures.push(format!("z={z}: {e}")),
            }
        }
    }
    let detail = format!(
        "{} level(s){}{}",
        levels.len(),
        if levels.is_empty() { "" } else { ": " },
        levels.iter().map(|z| format!("{z:.10}")).collect::<Vec<_>>().join(", ")
    );
    let status = if failures.is_empty() { "ok" } else { "partial" };
    let detail = if failures.is_empty() {
        detail
    } else {
        format!("{detail}; {}", failures.join("; "))
    };
    (out, log("scan", status, Some(detail)))
}

fn seed_loop(cfg: &CensusConfig, m: &Arc<Metric<f64>>, z: f64, degree: i64) -> Result<BrokenLoop<f64>> {
    let base = parallel_loop(cfg, m, z, degree)?;
    if cfg.search.seed_tilt == 0.0 {
        return Ok(base);
    }
    let tilt = cfg.search.seed_tilt;
    let nodes = base.nodes().iter().map(|x| [x[0], x[1] + tilt * x[0].cos()]).collect();
    base.with_nodes(nodes)
}

fn descent_task(cfg: &CensusConfig, m: &Arc<Metric<f64>>, z: f64, degree: i64) -> TaskOutput {
    let task = format!("descend z={z} degree={degree}");
    let start = match seed_loop(cfg, m, z, degree) {
        Ok(l) => l,
        Err(e) => return (Vec::new(), log(task, "seed_failed", Some(e.to_string()))),
    };
    match descend(&start, &cfg.descent_params()) {
        Ok(r) => {
            let detail = format!(
                "{} iterations, energy {:?}, relative gradient {:e}{}",
                r.iterations,
                r.energy_trace.last().copied().unwrap_or(f64::NAN),
                r.gradient_norm,
                r.diagnostic.as_ref().map(|d| format!("; {d}")).unwrap_or_default()
            );
            let cands = if r.outcome == DescentOutcome::Converged {
                vec![Candidate {
                    provenance: Provenance::Descent,
                    source: task.clone(),
                    lp: r.final_loop,
                }]
            } else {
                Vec::new()
            };
            (cands, log(task, r.outcome.name(), Some(detail)))
        }
        Err(e) => (Vec::new(), log(task, "error", Some(e.to_string()))),
    }
}

fn minimax_output(
    task: String,
    provenance: Provenance,
    r: Result<MinimaxResult<f64>>,
    trace: Option<PathBuf>,
) -> TaskOutput {
    match r {
        Ok(r) => {
            let mut detail = format!("kappa {:?}, {} rounds", r.kappa, r.trace.len());
            if let Some(d) = &r.diagnostic {
                detail.push_str("; ");
                detail.push_str(d);
            }
            if let Some(p) = trace {
                if let Err(e) = write_trace(&p, &r.trace) {
                    detail.push_str(&format!("; trace not written: {e}"));
                }
            }
            let cands = if r.status == MinimaxStatus::SaddleFound {
                vec![Candidate {
                    provenance,
                    source: task.clone(),
                    lp: r.saddle,
                }]
            } else {
                Vec::new()
            };
            (cands, log(task, r.status.name(), Some(detail)))
        }
        Err(e) => (Vec::new(), log(task, "error", Some(e.to_string()))),
    }
}

fn sweep_task(cfg: &CensusConfig, m: &Arc<Metric<f64>>, w: &config::SweepConfig, opts: &RunOptions) -> TaskOutput {
    let task = format!("sweep degree={} z=[{}, {}]", w.degree, w.z_minus, w.z_plus);
    let length = [w.z_minus, w.z_plus]
        .iter()
        .filter_map(|&z| m.parallel_data(z, w.degree).ok().map(|p| p.length))
        .fold(0.0, f64::max);
    let j = match nodes_for(length, cfg.discretization.epsilon, cfg.discretization.j) {
        Ok(j) => j,
        Err(e) => return (Vec::new(), log(task, "error", Some(e.to_string()))),
    };
    let r = sweep(
        m.clone(),
        w.degree,
        w.z_minus,
        w.z_plus,
        j,
        cfg.connect_options(),
        &cfg.minimax_params(),
    );
    let trace = opts
        .trace_dir
        .as_ref()
        .map(|d| d.join(format!("sweep_d{}_{}_{}.tsv", w.degree, w.z_minus, w.z_plus)));
    minimax_output(task, Provenance::Sweep, r, trace)
}

fn shoot_task(cfg: &CensusConfig, m: &Arc<Metric<f64>>, n_osc: u32, q: u32, opts: &RunOptions) -> TaskOutput {
    let task = format!("shoot n_osc={n_osc} q={q}");
    let Some(sh) = &cfg.search.shooting else {
        return (Vec::new(), log(task, "skipped", None));
    };
    let so = cfg.shoot_options(m);
    let shot = match shoot_closed(m, n_osc, q, (sh.bracket[0], sh.bracket[1]), &so) {
        Ok(Some(g)) => g,
        Ok(None) => {
            let detail = "the θ advance never reaches the target on the bracket".to_string();
            return (Vec::new(), log(task, "none", Some(detail)));
        }
        Err(e) => return (Vec::new(), log(task, "error", Some(e.to_string()))),
    };
    if let Some(dir) = &opts.trace_dir {
        if let Ok(tr) = shot.trajectory(m, so.h) {
            let _ = std::fs::write(dir.join(format!("shot_{n_osc}_{q}.txt")), tr.to_text());
        }
    }
    let built = nodes_for(shot.length, cfg.discretization.epsilon, cfg.discretization.j)
        .and_then(|j| shot.nodes(m, j, so.h))
        .and_then(|nodes| BrokenLoop::new(m.clone(), nodes, shot.degree(), cfg.connect_options()));
    let lp = match built {
        Ok(l) => l,
        Err(e) => return (Vec::new(), log(task, "error", Some(e.to_string()))),
    };
    let refined = match refine_critical(&lp, &cfg.descent_params(), 50) {
        Ok(r) => r,
        Err(e) => return (Vec::new(), log(task, "error", Some(e.to_string()))),
    };
    let detail = format!(
        "momentum {:?}, length {:?}, closure defect {:e}, refined to relative gradient {:e}",
        shot.momentum, shot.length, shot.closure_defect, refined.gradient_norm
    );
    if refined.outcome != DescentOutcome::Converged {
        return (Vec::new(), log(task, "not_refined", Some(detail)));
    }
    let c = Candidate {
        provenance: Provenance::Shooting,
        source: task.clone(),
        lp: refined.final_loop,
    };
    (vec![c], log(task, "found", Some(detail)))
}

fn analyze_all(cfg: &CensusConfig, cands: Vec<Candidate>, logs: &mut Vec<TaskLog>) -> Vec<Analyzed> {
    let opts = cfg.index_options::<f64>();
    let results: Vec<(Candidate, Result<crate::index::IndexReport>)> = cands
        .into_par_iter()
        .map(|c| {
            let r = analyze(&c.lp, &opts);
            (c, r)
        })
        .collect();
    let mut out = Vec::new();
    for (cand, r) in results {
        match r {
            Ok(index) => out.push(Analyzed { cand, index }),
            Err(e) => logs.push(log(format!("index {}", cand.source), "rejected", Some(e.to_string()))),
        }
    }
    out
}

/// Runs the selected census stages; numeric failures are logged per task.
pub fn run_tasks(cfg: &CensusConfig, tasks: TaskSet, opts: &RunOptions) -> Result<CensusReport> {
    cfg.validate()?;
    let m = cfg.metric_arc::<f64>()?;
    if let Some(d) = &opts.trace_dir {
        std::fs::create_dir_all(d)?;
    }

    enum Job<'a> {
        Scan,
        Descend(f64, i64),
        Sweep(&'a config::SweepConfig),
        Shoot(u32, u32),
    }
    let mut jobs = Vec::new();
    if tasks.scan || tasks.pass {
        jobs.push(Job::Scan);
    }
    if tasks.descend {
        for &d in &cfg.search.degrees {
            for &z in &cfg.search.seeds {
                jobs.push(Job::Descend(z, d));
            }
        }
    }
    if tasks.sweep {
        jobs.extend(cfg.search.sweeps.iter().map(Job::Sweep));
    }
    if tasks.shoot {
        if let Some(sh) = &cfg.search.shooting {
            jobs.extend(sh.targets.iter().map(|t| Job::Shoot(t[0], t[1])));
        }
    }
    let outputs: Vec<TaskOutput> = jobs
        .par_iter()
        .map(|job| match job {
            Job::Scan => scan_task(cfg, &m),
            Job::Descend(z, d) => descent_task(cfg, &m, *z, *d),
            Job::Sweep(w) => sweep_task(cfg, &m, w, opts),
            Job::Shoot(n, q) => shoot_task(cfg, &m, *n, *q, opts),
        })
        .collect();

    let mut logs = Vec::new();
    let mut cands = Vec::new();
    for (c, l) in outputs {
        cands.extend(c);
        logs.push(l);
    }
    let mut analyzed = analyze_all(cfg, cands, &mut logs);

    if tasks.pass && cfg.search.mountain_pass {
        let mut pairs = Vec::new();
        for &d in &cfg.search.degrees {
            let mut minima: Vec<&Analyzed> = analyzed
                .iter()
                .filter(|a| {
                    a.cand.provenance == Provenance::ParallelScan
                        && a.cand.lp.degree() == d
                        && a.index.classification == Classification::NondegenerateMinimum
                })
                .collect();
            minima.sort_by(|a, b| a.cand.lp.mean_z().total_cmp(&b.cand.lp.mean_z()));
            for w in minima.windows(2) {
                pairs.push((d, w[0].cand.lp.clone(), w[1].cand.lp.clone()));
            }
        }
        let params = cfg.minimax_params();
        let outputs: Vec<TaskOutput> = pairs
            .par_iter()
            .map(|(d, a, b)| {
                let (za, zb) = (a.mean_z(), b.mean_z());
                let task = format!("pass degree={d} z=[{za:.6}, {zb:.6}]");
                let trace = opts
                    .trace_dir
                    .as_ref()
                    .map(|dir| dir.join(format!("pass_d{d}_{za:.4}_{zb:.4}.tsv")));
                minimax_output(task, Provenance::MountainPass, mountain_pass(a, b, &params), trace)
            })
            .collect();
        let mut new = Vec::new();
        for (c, l) in outputs {
            new.extend(c);
            logs.push(l);
        }
        analyzed.extend(analyze_all(cfg, new, &mut logs));
    }
    if !tasks.scan {
        analyzed.retain(|a| a.cand.provenance != Provenance::ParallelScan);
        logs.retain(|l| l.task != "scan");
    }
    assemble(cfg, &m, analyzed, logs)
}

fn assemble(
    cfg: &CensusConfig,
    m: &Metric<f64>,
    mut analyzed: Vec<Analyzed>,
    tasks: Vec<TaskLog>,
) -> Result<CensusReport> {
    let keyed: Vec<(f64, f64)> = analyzed
        .iter()
        .map(|a| Ok((a.cand.lp.energy()?, a.cand.lp.mean_z())))
        .collect::<Result<_>>()?;
    let mut order: Vec<usize> = (0..analyzed.len()).collect();
    order.sort_by(|&i, &j| {
        keyed[i]
            .0
            .total_cmp(&keyed[j].0)
            .then(keyed[i].1.total_cmp(&keyed[j].1))
            .then(analyzed[i].cand.provenance.cmp(&analyzed[j].cand.provenance))
            .then(analyzed[i].cand.source.cmp(&analyzed[j].cand.source))
    });
    let mut slots: Vec<Option<Analyzed>> = analyzed.drain(..).map(Some).collect();
    let sorted: Vec<Analyzed> = order
        .iter()
        .map(|&i| slots[i].take().expect("each index once"))
        .collect();

    let n = sorted.len();
    let tol = cfg.search.distinct_tol;
    let mut uf = UnionFind::new(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if !geometric_distinct(&sorted[i].cand.lp, &sorted[j].cand.lp, tol)? {
                uf.union(i, j);
            }
        }
    }
    let mut group_of_root = std::collections::BTreeMap::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let gid: Vec<usize> = (0..n)
        .map(|i| {
            let r = uf.find(i);
            *group_of_root.entry(r).or_insert_with(|| {
                groups.push(Vec::new());
                groups.len() - 1
            })
        })
        .collect();
    for (i, g) in gid.iter().enumerate() {
        groups[*g].push(i);
    }

    let mut records = Vec::with_capacity(n);
    for (i, a) in sorted.iter().enumerate() {
        let lp = &a.cand.lp;
        let s = lp.summary()?;
        let (zlo, zhi) = lp.nodes().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), x| {
            (l.min(x[1]), h.max(x[1]))
        });
        records.push(GeodesicRecord {
            id: i,
            provenance: a.cand.provenance,
            source: a.cand.source.clone(),
            degree: lp.degree(),
            nodes: lp.nodes().to_vec(),
            length: s.length,
            energy: s.energy,
            mean_z: lp.mean_z(),
            z_range: [zlo, zhi],
            relative_gradient: s.relative_gradient,
            index: a.index.clone(),
            group: gid[i],
            image: lp.image(8)?,
        });
    }
    let groups = groups
        .into_iter()
        .enumerate()
        .map(|(id, members)| {
            let rep = members
                .iter()
                .copied()
                .min_by(|&x, &y| {
                    let scan = |k: usize| records[k].provenance != Provenance::ParallelScan;
                    scan(x)
                        .cmp(&scan(y))
                        .then(records[x].relative_gradient.total_cmp(&records[y].relative_gradient))
                        .then(x.cmp(&y))
                })
                .expect("groups are nonempty");
            GroupSummary {
                id,
                representative: rep,
                energy: records[rep].energy,
                degree: records[rep].degree,
                classification: records[rep].index.classification,
                members,
            }
        })
        .collect();
    let window = cfg.window(m);
    Ok(CensusReport {
        surface: SurfaceSummary {
            description: m.to_string(),
            mode: m.mode().name().to_string(),
            window: [window.0, window.1],
        },
        records,
        groups,
        tasks,
    })
}

/// Parallel scan only.
pub fn scan_parallels(cfg: &CensusConfig) -> Result<Vec<GeodesicRecord>> {
    let tasks = TaskSet {
        scan: true,
        ..TaskSet::NONE
    };
    Ok(run_tasks(cfg, tasks, &RunOptions::default())?.records)
}

/// Every census stage.
pub fn run_census(cfg: &CensusConfig) -> Result<CensusReport> {
    run_tasks(cfg, TaskSet::ALL, &RunOptions::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::{Family, Profile};

    fn levels(f: Family) -> Vec<f64> {
        let m = Metric::intrinsic(Profile::family_default(f));
        parallel_levels(&m, (-6.0, 6.0), 2401).unwrap()
    }

    #[test]
    fn parallel_levels_of_the_families() {
        assert!(levels(Family::ExpMonotone).is_empty());
        let dw = levels(Family::DoubleWell);
        assert_eq!(dw.len(), 3);
        let z = 0.5f64.sqrt();
        for (a, b) in dw.iter().zip([-z, 0.0, z]) {
            assert!((a - b).abs() < 1e-9, "{dw:?}");
        }
        let infl = levels(Family::TanhCubedInflection);
        assert_eq!(infl.len(), 1);
        assert!(infl[0].abs() < 1e-6);
        let bump = levels(Family::GaussianBump);
        assert_eq!(bump.len(), 1);
        assert!(bump[0].abs() < 1e-9);
    }

    #[test]
    fn tangential_root_off_the_grid() {
        let m = Metric::intrinsic(Profile::family_default(Family::TanhCubedInflection));
        let l = parallel_levels(&m, (-6.0, 6.0037), 1000).unwrap();
        assert_eq!(l.len(), 1, "{l:?}");
        assert!(l[0].abs() < 1e-4, "{l:?}");
    }

    #[test]
    fn scan_records_for_double_well() {
        let cfg = CensusConfig::parse(
            "[surface]\nfamily = \"double-well\"\n[discretization]\nj = 32\n[search]\nfamily_probe = false\n",
        )
        .unwrap();
        let recs = scan_parallels(&cfg).unwrap();
        assert_eq!(recs.len(), 3);
        let mut by_z = recs.clone();
        by_z.sort_by(|a, b| a.mean_z.total_cmp(&b.mean_z));
        let classes: Vec<_> = by_z.iter().map(|r| r.index.classification).collect();
        assert_eq!(
            classes,
            [
                Classification::NondegenerateMinimum,
                Classification::Saddle,
                Classification::NondegenerateMinimum
            ]
        );
        assert!(recs.windows(2).all(|w| w[0].energy <= w[1].energy));
        assert!(recs.iter().all(|r| r.relative_gradient < 1e-8));
    }
}

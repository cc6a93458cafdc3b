//! Minimax searches over discrete families of loops.
//!
//! A [`LoopPath`] is a string of broken loops. Each round pushes every free
//! stage down the energy flow for a few steps and then redistributes the
//! stages at equal spacing in node space. Once the highest stage settles it is
//! refined to a critical loop by minimizing the squared gradient.

use std::io::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loop_space::{descend, geometric_distinct, refine_critical, BrokenLoop, DescentOutcome, DescentParams};
use crate::scalar::{lit, to_f64, Real, V2};
use crate::surface::Metric;

/// Constraint on an endpoint stage of a path.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Endpoint<T> {
    /// The stage never moves.
    FixedMinimum,
    /// The stage may slide but every node keeps `lo ≤ z ≤ hi`.
    FreeRegion { lo: T, hi: T },
}

impl<T: Real> Endpoint<T> {
    fn admits(&self, l: &BrokenLoop<T>) -> bool {
        match *self {
            Endpoint::FixedMinimum => false,
            Endpoint::FreeRegion { lo, hi } => l.nodes().iter().all(|x| x[1] >= lo && x[1] <= hi),
        }
    }
}

/// A discrete homotopy of loops sharing degree and node count.
#[derive(Clone, Debug)]
pub struct LoopPath<T: Real> {
    stages: Vec<BrokenLoop<T>>,
    start: Endpoint<T>,
    end: Endpoint<T>,
}

fn flat<T: Real>(l: &BrokenLoop<T>) -> Vec<T> {
    l.nodes().iter().flat_map(|x| [x[0], x[1]]).collect()
}

fn distance<T: Real>(a: &BrokenLoop<T>, b: &BrokenLoop<T>) -> T {
    flat(a)
        .iter()
        .zip(flat(b))
        .map(|(x, y)| (*x - y) * (*x - y))
        .sum::<T>()
        .sqrt()
}

fn lerp_nodes<T: Real>(a: &[V2<T>], b: &[V2<T>], t: T) -> Vec<V2<T>> {
    a.iter()
        .zip(b)
        .map(|(p, q)| [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])])
        .collect()
}

impl<T: Real> LoopPath<T> {
    pub fn new(stages: Vec<BrokenLoop<T>>, start: Endpoint<T>, end: Endpoint<T>) -> Result<Self> {
        if stages.len() < 2 {
            return Err(Error::Precondition("a path needs at least two stages".into()));
        }
        let (d, j) = (stages[0].degree(), stages[0].len());
        if stages.iter().any(|s| s.degree() != d || s.len() != j) {
            return Err(Error::Precondition(
                "path stages must share degree and node count".into(),
            ));
        }
        Ok(LoopPath { stages, start, end })
    }

    /// Node-wise interpolation from `a` to `b` with `n` stages.
    ///
    /// `b` is re-indexed and shifted by whole turns to minimize the total node
    /// displacement; interior stages get `tilt·sin(πt)·cos θ` added to z.
    pub fn interpolate(a: &BrokenLoop<T>, b: &BrokenLoop<T>, n: usize, tilt: T) -> Result<Self> {
        if a.degree() != b.degree() {
            return Err(Error::Precondition("endpoints have different degrees".into()));
        }
        let b = if b.len() == a.len() {
            b.clone()
        } else {
            b.resample(a.len())?
        };
        let target = best_alignment(a, &b)?;
        let n = n.max(2);
        let mut stages = Vec::with_capacity(n);
        stages.push(a.clone());
        for i in 1..n - 1 {
            let t = lit::<T>(i as f64) / lit((n - 1) as f64);
            let bend = tilt * (T::PI() * t).sin();
            let nodes = lerp_nodes(a.nodes(), &target, t)
                .into_iter()
                .map(|x| [x[0], x[1] + bend * x[0].cos()])
                .collect();
            let warm = stages.last().expect("nonempty");
            stages.push(warm.with_nodes(nodes)?);
        }
        stages.push(b.with_nodes(target)?);
        Self::new(stages, Endpoint::FixedMinimum, Endpoint::FixedMinimum)
    }

    pub fn with_endpoints(mut self, start: Endpoint<T>, end: Endpoint<T>) -> Self {
        self.start = start;
        self.end = end;
        self
    }

    pub fn stages(&self) -> &[BrokenLoop<T>] {
        &self.stages
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    pub fn energies(&self) -> Result<Vec<T>> {
        self.stages.iter().map(|s| s.energy()).collect()
    }

    /// Index and energy of the highest stage among those accepted by `filter`.
    fn max_stage_where(&self, filter: impl Fn(&BrokenLoop<T>) -> bool) -> Result<Option<(usize, T)>> {
        let mut best: Option<(usize, T)> = None;
        for (i, s) in self.stages.iter().enumerate() {
            if !filter(s) {
                continue;
            }
            let e = s.energy()?;
            if best.is_none_or(|(_, b)| e > b) {
                best = Some((i, e));
            }
        }
        Ok(best)
    }

    pub fn max_stage(&self) -> Result<(usize, T)> {
        Ok(self.max_stage_where(|_| true)?.expect("path has stages"))
    }

    /// Largest chart displacement of a single node between consecutive stages.
    pub fn max_gap(&self) -> T {
        self.stages
            .windows(2)
            .flat_map(|w| {
                w[0].nodes()
                    .iter()
                    .zip(w[1].nodes())
                    .map(|(p, q)| (p[0] - q[0]).hypot(p[1] - q[1]))
                    .collect::<Vec<_>>()
            })
            .fold(T::zero(), T::max)
    }

    /// Redistributes interior stages at equal spacing along the polyline
    /// through the stages' node vectors.
    fn reparametrized(&self, n: usize) -> Result<Self> {
        let m = self.stages.len();
        let mut cum = vec![T::zero(); m];
        for i in 1..m {
            cum[i] = cum[i - 1] + distance(&self.stages[i - 1], &self.stages[i]);
        }
        let total = cum[m - 1];
        if !(total > T::zero()) {
            return Ok(self.clone());
        }
        let mut stages = Vec::with_capacity(n);
        stages.push(self.stages[0].clone());
        let mut seg = 0;
        for k in 1..n - 1 {
            let s = total * lit::<T>(k as f64) / lit((n - 1) as f64);
            while seg + 2 < m && cum[seg + 1] < s {
                seg += 1;
            }
            let width = cum[seg + 1] - cum[seg];
            let t = if width > T::zero() {
                ((s - cum[seg]) / width).max(T::zero()).min(T::one())
            } else {
                T::zero()
            };
            let (a, b) = (&self.stages[seg], &self.stages[seg + 1]);
            let nodes = lerp_nodes(a.nodes(), b.nodes(), t);
            let warm = if t < lit(0.5) { a } else { b };
            stages.push(warm.with_nodes(nodes)?);
        }
        stages.push(self.stages[m - 1].clone());
        Ok(LoopPath {
            stages,
            start: self.start,
            end: self.end,
        })
    }
}

/// Lift of `b`'s nodes (cyclic re-indexing plus whole turns) closest to `a`.
fn best_alignment<T: Real>(a: &BrokenLoop<T>, b: &BrokenLoop<T>) -> Result<Vec<V2<T>>> {
    let tau = T::TAU();
    let mut best: Option<(T, Vec<V2<T>>)> = None;
    for k in 0..b.len() {
        let r = b.rotate(k)?;
        let mean: T = a.nodes().iter().zip(r.nodes()).map(|(p, q)| p[0] - q[0]).sum::<T>() / lit(a.len() as f64);
        let turns = (mean / tau).round();
        let nodes: Vec<V2<T>> = r.nodes().iter().map(|q| [q[0] + turns * tau, q[1]]).collect();
        let cost: T = a
            .nodes()
            .iter()
            .zip(&nodes)
            .map(|(p, q)| (p[0] - q[0]).abs() + (p[1] - q[1]).abs())
            .sum();
        if best.as_ref().is_none_or(|(c, _)| cost < *c) {
            best = Some((cost, nodes));
        }
    }
    Ok(best.expect("loop has nodes").1)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MinimaxStatus {
    SaddleFound,
    Collapsed,
    BudgetExhausted,
}

impl MinimaxStatus {
    pub fn name(self) -> &'static str {
        match self {
            MinimaxStatus::SaddleFound => "saddle_found",
            MinimaxStatus::Collapsed => "collapsed",
            MinimaxStatus::BudgetExhausted => "budget_exhausted",
        }
    }
}

/// One line of the per-round trace.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundTrace {
    pub round: usize,
    pub stages: usize,
    pub max_stage: usize,
    pub max_energy: f64,
}

#[derive(Clone, Debug)]
pub struct MinimaxResult<T: Real> {
    pub status: MinimaxStatus,
    /// Critical value estimate.
    pub kappa: T,
    /// Refined highest stage (the saddle when `status` is `SaddleFound`).
    pub saddle: BrokenLoop<T>,
    /// Best path maximum after each round; never increases.
    pub history: Vec<T>,
    pub trace: Vec<RoundTrace>,
    pub path: LoopPath<T>,
    pub diagnostic: Option<String>,
}

#[derive(Clone, Copy, Debug)]
pub struct MinimaxParams<T> {
    pub stages: usize,
    pub max_stages: usize,
    pub max_rounds: usize,
    /// Descent iterations per stage and round.
    pub steps_per_round: usize,
    /// Relative spread of the path maximum regarded as settled.
    pub settle_tol: T,
    /// Window of rounds over which the spread is measured.
    pub patience: usize,
    pub climb_budget: usize,
    /// Barrier-free when the maximum is within `collapse_tol·(1 + scale)` of
    /// the higher endpoint.
    pub collapse_tol: T,
    /// Neighbor energy gap that triggers doubling the stage count.
    pub gap_ratio: T,
    pub tilt: T,
    /// Chart Hausdorff distance below which loops count as the same geodesic.
    pub distinct_tol: T,
    pub descent: DescentParams<T>,
}

impl<T: Real> Default for MinimaxParams<T> {
    fn default() -> Self {
        MinimaxParams {
            stages: 33,
            max_stages: 129,
            max_rounds: 300,
            steps_per_round: 3,
            settle_tol: lit(1e-4),
            patience: 10,
            climb_budget: 500,
            collapse_tol: lit(1e-6),
            gap_ratio: lit(0.05),
            tilt: lit(0.05),
            distinct_tol: lit(1e-3),
            descent: DescentParams::default(),
        }
    }
}

enum StageStep<T: Real> {
    Moved(BrokenLoop<T>),
    Kept,
    Failed(String),
}

fn push_stage<T: Real>(s: &BrokenLoop<T>, role: Option<Endpoint<T>>, params: &DescentParams<T>) -> StageStep<T> {
    if matches!(role, Some(Endpoint::FixedMinimum)) {
        return StageStep::Kept;
    }
    let r = match descend(s, params) {
        Ok(r) => r,
        Err(e) => return StageStep::Failed(e.to_string()),
    };
    match (role, r.outcome) {
        // a sliding endpoint that cannot move within its region stays put
        (Some(_), DescentOutcome::Escaped | DescentOutcome::ConnectionFailure) => StageStep::Kept,
        (None, DescentOutcome::Escaped | DescentOutcome::ConnectionFailure) => StageStep::Failed(format!(
            "stage {}: {}",
            r.outcome.name(),
            r.diagnostic.unwrap_or_default()
        )),
        (Some(region), _) if !region.admits(&r.final_loop) => StageStep::Kept,
        _ => StageStep::Moved(r.final_loop),
    }
}

/// Runs pushdown rounds on `path` and refines the settled maximum.
///
/// `band` restricts the maximum to stages with a node strictly inside the
/// z-interval; `endpoints` are the reference loops for distinctness and the
/// collapse test.
fn run<T: Real>(mut path: LoopPath<T>, band: Option<(T, T)>, params: &MinimaxParams<T>) -> Result<MinimaxResult<T>> {
    let stage_params = DescentParams {
        max_iter: params.steps_per_round.max(1),
        ..params.descent
    };
    let in_band = |l: &BrokenLoop<T>| match band {
        Some((lo, hi)) => l.nodes().iter().any(|x| x[1] > lo && x[1] < hi),
        None => true,
    };
    let endpoint_energy =
        |p: &LoopPath<T>| -> Result<T> { Ok(p.stages[0].energy()?.max(p.stages[p.len() - 1].energy()?)) };
    let mut history: Vec<T> = Vec::new();
    let mut trace = Vec::new();
    let mut recent: Vec<T> = Vec::new();
    let mut diagnostic = None;
    let mut exhausted = true;
    for round in 0..params.max_rounds {
        let n = path.len();
        let steps: Vec<StageStep<T>> = path
            .stages
            .par_iter()
            .enumerate()
            .map(|(i, s)| {
                let role = if i == 0 {
                    Some(path.start)
                } else if i + 1 == n {
                    Some(path.end)
                } else {
                    None
                };
                push_stage(s, role, &stage_params)
            })
            .collect();
        let mut stages = Vec::with_capacity(n);
        for (s, step) in path.stages.iter().zip(steps) {
            match step {
                StageStep::Moved(l) => stages.push(l),
                StageStep::Kept => stages.push(s.clone()),
                StageStep::Failed(msg) => {
                    diagnostic = Some(format!("round {round}: {msg}"));
                    break;
                }
            }
        }
        if diagnostic.is_some() {
            break;
        }
        path.stages = stages;
        let mut target = path.len();
        if let Some((i, e)) = path.max_stage_where(in_band)? {
            let nb = [i.checked_sub(1), (i + 1 < path.len()).then_some(i + 1)];
            let mut gap = T::zero();
            for k in nb.into_iter().flatten() {
                gap = gap.max((path.stages[k].energy()? - e).abs() / e.abs().max(T::min_positive_value()));
            }
            if gap > params.gap_ratio && 2 * path.len() - 1 <= params.max_stages {
                target = 2 * path.len() - 1;
            }
        }
        path = match path.reparametrized(target) {
            Ok(p) => p,
            Err(e) => {
                diagnostic = Some(format!("round {round}: reparametrization failed: {e}"));
                break;
            }
        };
        let Some((imax, emax)) = path.max_stage_where(in_band)? else {
            diagnostic = Some(format!("round {round}: no stage meets the middle band"));
            break;
        };
        let best = history.last().map_or(emax, |b: &T| b.min(emax));
        history.push(best);
        trace.push(RoundTrace {
            round,
            stages: path.len(),
            max_stage: imax,
            max_energy: to_f64(emax),
        });
        tracing::debug!(round, stages = path.len(), imax, emax = to_f64(emax), "minimax round");
        if best <= endpoint_energy(&path)? + params.collapse_tol * (T::one() + best.abs()) {
            exhausted = false;
            break;
        }
        recent.push(emax);
        let w = params.patience.max(2);
        if recent.len() >= w {
            let tail = &recent[recent.len() - w..];
            let hi = tail.iter().copied().fold(T::neg_infinity(), T::max);
            let lo = tail.iter().copied().fold(T::infinity(), T::min);
            if hi - lo < params.settle_tol * emax.abs().max(T::one()) {
                exhausted = false;
                break;
            }
        }
    }

    let (imax, emax) = path.max_stage_where(in_band)?.unwrap_or(path.max_stage()?);
    let top = path.stages[imax].clone();
    let e_end = endpoint_energy(&path)?;
    let scale = e_end.abs().max(emax.abs());
    let estimate = history.last().copied().unwrap_or(emax);
    let result = |status, kappa, saddle, diagnostic| MinimaxResult {
        status,
        kappa,
        saddle,
        history: history.clone(),
        trace: trace.clone(),
        path: path.clone(),
        diagnostic,
    };
    if let Some(msg) = diagnostic {
        return Ok(result(MinimaxStatus::BudgetExhausted, estimate, top, Some(msg)));
    }
    if estimate <= e_end + params.collapse_tol * (T::one() + scale) {
        return Ok(result(MinimaxStatus::Collapsed, estimate, top, None));
    }
    let climb = refine_critical(&top, &params.descent, params.climb_budget)?;
    let saddle = climb.final_loop;
    if climb.outcome != DescentOutcome::Converged {
        let msg = format!(
            "climb ended {} at relative gradient {:e}{}",
            climb.outcome.name(),
            to_f64(climb.gradient_norm),
            if exhausted { " after the round budget" } else { "" }
        );
        return Ok(result(MinimaxStatus::BudgetExhausted, estimate, saddle, Some(msg)));
    }
    let kappa = saddle.energy()?;
    for end in [&path.stages[0], &path.stages[path.len() - 1]] {
        if !geometric_distinct(&saddle, end, params.distinct_tol)? {
            let msg = "climb returned to an endpoint".to_string();
            return Ok(result(MinimaxStatus::Collapsed, kappa, saddle, Some(msg)));
        }
    }
    Ok(result(MinimaxStatus::SaddleFound, kappa, saddle, None))
}

/// Min-max between two critical loops of the same degree.
pub fn mountain_pass<T: Real>(
    min_a: &BrokenLoop<T>,
    min_b: &BrokenLoop<T>,
    params: &MinimaxParams<T>,
) -> Result<MinimaxResult<T>> {
    if min_a.degree() != min_b.degree() {
        return Err(Error::Precondition("endpoints have different degrees".into()));
    }
    let tol = params.descent.tol;
    for (name, l) in [("first", min_a), ("second", min_b)] {
        let g = l.relative_gradient_norm()?;
        if !(g < tol) {
            return Err(Error::Precondition(format!(
                "{name} endpoint is not critical ({:e})",
                to_f64(g)
            )));
        }
    }
    if !geometric_distinct(min_a, min_b, params.distinct_tol)? {
        return Err(Error::Precondition("endpoints are not geometrically distinct".into()));
    }
    let path = LoopPath::interpolate(min_a, min_b, params.stages, params.tilt)?;
    run(path, None, params)
}

/// Sweep of degree-`n` loops from the region `z ≤ z_minus` to `z ≥ z_plus`,
/// starting from the parallels at the two levels.
pub fn sweep<T: Real>(
    metric: std::sync::Arc<Metric<T>>,
    degree: i64,
    z_minus: T,
    z_plus: T,
    j: usize,
    opts: crate::geodesic_flow::ConnectOptions<T>,
    params: &MinimaxParams<T>,
) -> Result<MinimaxResult<T>> {
    if !(z_minus < z_plus) {
        return Err(Error::Precondition("sweep needs z_minus < z_plus".into()));
    }
    let a = BrokenLoop::parallel(metric.clone(), z_minus, degree, j, opts)?;
    let b = BrokenLoop::parallel(metric, z_plus, degree, j, opts)?;
    let path = LoopPath::interpolate(&a, &b, params.stages, params.tilt)?.with_endpoints(
        Endpoint::FreeRegion {
            lo: T::neg_infinity(),
            hi: z_minus,
        },
        Endpoint::FreeRegion {
            lo: z_plus,
            hi: T::infinity(),
        },
    );
    run(path, Some((z_minus, z_plus)), params)
}

/// Writes `round stages max_stage max_energy` rows.
pub fn write_trace(path: &Path, trace: &[RoundTrace]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "# round\tstages\tmax_stage\tmax_energy")?;
    for r in trace {
        writeln!(f, "{}\t{}\t{}\t{:?}", r.round, r.stages, r.max_stage, r.max_energy)?;
    }
    f.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;
    use std::sync::Arc;

    use super::*;
    use crate::geodesic_flow::ConnectOptions;
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

    #[test]
    fn flat_cylinder_has_no_barrier() {
        let m = metric(Family::Flat);
        let a = BrokenLoop::parallel(m.clone(), 0.0, 1, 16, opts()).unwrap();
        let b = BrokenLoop::parallel(m, 1.0, 1, 16, opts()).unwrap();
        let p = MinimaxParams {
            stages: 9,
            ..Default::default()
        };
        let r = mountain_pass(&a, &b, &p).unwrap();
        assert_eq!(r.status, MinimaxStatus::Collapsed);
        assert!((r.kappa - 4.0 * PI * PI).abs() < 1e-6);
    }

    #[test]
    fn equal_endpoints_are_rejected() {
        let m = metric(Family::CoshWaist);
        let a = BrokenLoop::parallel(m, 0.0, 1, 16, opts()).unwrap();
        assert!(matches!(
            mountain_pass(&a, &a, &MinimaxParams::default()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn interpolation_is_a_fine_homotopy() {
        let m = metric(Family::DoubleWell);
        let z = 0.5f64.sqrt();
        let a = BrokenLoop::parallel(m.clone(), -z, 1, 16, opts()).unwrap();
        let b = BrokenLoop::parallel(m, z, 1, 16, opts()).unwrap().rotate(5).unwrap();
        let p = LoopPath::interpolate(&a, &b, 33, 0.05).unwrap();
        assert_eq!(p.len(), 33);
        assert!(p.max_gap() < 0.5 * opts().segment_cap);
        assert!(p.max_gap() < 0.1);
        assert!(p.stages().iter().all(|s| s.degree() == 1));
    }

    #[test]
    fn trace_file_rows() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("trace.tsv");
        let rows = [RoundTrace {
            round: 0,
            stages: 33,
            max_stage: 16,
            max_energy: 150.5,
        }];
        write_trace(&f, &rows).unwrap();
        let text = std::fs::read_to_string(&f).unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), "0\t33\t16\t150.5");
    }

    #[test]
    fn double_well_pass_invariants() {
        let m = metric(Family::DoubleWell);
        let z = 0.5f64.sqrt();
        let a = BrokenLoop::parallel(m.clone(), -z, 1, 32, opts()).unwrap();
        let b = BrokenLoop::parallel(m, z, 1, 32, opts()).unwrap();
        let p = MinimaxParams {
            stages: 17,
            ..Default::default()
        };
        let r = mountain_pass(&a, &b, &p).unwrap();
        assert_eq!(r.status, MinimaxStatus::SaddleFound, "{:?}", r.diagnostic);
        assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
        let stages = r.path.stages();
        assert_eq!(stages[0].nodes(), a.nodes());
        assert_eq!(stages[stages.len() - 1].energy().unwrap(), b.energy().unwrap());
        let e_min = a.energy().unwrap().max(b.energy().unwrap());
        assert!(r.kappa > e_min && r.kappa <= 16.0 * PI * PI + 1e-3);
        assert!(r.saddle.is_critical(1e-8).unwrap());
        assert!(geometric_distinct(&r.saddle, &a, 1e-3).unwrap());
        let hs = crate::index::discrete_hessian(&r.saddle, 1e-5, 1e-6).unwrap();
        assert!(hs.negatives >= 1);
    }

    #[test]
    fn exp_sweep_finds_no_critical_value() {
        let r = sweep(
            metric(Family::ExpMonotone),
            1,
            -1.0,
            1.0,
            32,
            opts(),
            &MinimaxParams::default(),
        )
        .unwrap();
        assert_ne!(r.status, MinimaxStatus::SaddleFound);
    }

    #[test]
    fn flat_sweep_stays_at_parallels() {
        let p = MinimaxParams {
            stages: 9,
            ..Default::default()
        };
        let r = sweep(metric(Family::Flat), 1, -1.0, 1.0, 16, opts(), &p).unwrap();
        assert!((r.kappa - 4.0 * PI * PI).abs() < 1e-9);
        for s in r.path.stages() {
            assert!((s.energy().unwrap() - 4.0 * PI * PI).abs() < 1e-9);
        }
    }
}

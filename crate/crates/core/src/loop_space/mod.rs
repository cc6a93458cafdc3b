//! Broken-geodesic loops: `j` nodes joined by short time-1 geodesics.
//!
//! Nodes are stored as lifts to the universal cover. The closing segment runs
//! from the last node to `node[0] + (2π·degree, 0)`, so the degree is part of
//! the loop's identity and is preserved by every operation here.

mod descent;
mod io;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use descent::{descend, refine_critical, DescentOutcome, DescentParams, DescentResult, StepRule};
pub use io::{parse_loop_text, read_loop, write_loop, LoopText};

use crate::error::{Error, Result};
use crate::geodesic_flow::{connect_lifted, flow, ConnectOptions, GeodesicSegment};
use crate::linalg::SymMatrix;
use crate::scalar::{add, lit, sub, to_f64, Real, V2};
use crate::surface::{Metric, Point, Tangent};

/// Default relative gradient tolerance of [`BrokenLoop::is_critical`].
pub const DEFAULT_CRITICAL_TOL: f64 = 1e-8;

/// Node count recommended for a loop of energy at most `kappa` with segment cap
/// `eps`: `max(32, ceil(8 √κ / ε))`.
pub fn recommended_nodes(kappa: f64, eps: f64) -> usize {
    let j = (8.0 * kappa.max(0.0).sqrt() / eps).ceil();
    if j.is_finite() {
        (j as usize).max(32)
    } else {
        32
    }
}

/// Previous nodes and segments used to seed reconnection.
type WarmStart<'a, T> = (&'a [V2<T>], &'a [GeodesicSegment<T>]);

#[derive(Clone, Debug)]
pub struct BrokenLoop<T: Real> {
    metric: Arc<Metric<T>>,
    nodes: Vec<V2<T>>,
    degree: i64,
    opts: ConnectOptions<T>,
    segments: Vec<GeodesicSegment<T>>,
    energy: T,
}

impl<T: Real> BrokenLoop<T> {
    /// Builds and connects a loop from lifted nodes.
    pub fn new(metric: Arc<Metric<T>>, nodes: Vec<V2<T>>, degree: i64, opts: ConnectOptions<T>) -> Result<Self> {
        Self::connected(metric, nodes, degree, opts, None)
    }

    /// Builds a loop without connecting; segment-dependent queries fail with
    /// [`Error::StaleSegments`] until [`reconnect`](Self::reconnect).
    pub fn unconnected(
        metric: Arc<Metric<T>>,
        nodes: Vec<V2<T>>,
        degree: i64,
        opts: ConnectOptions<T>,
    ) -> Result<Self> {
        validate_nodes(&metric, &nodes)?;
        Ok(BrokenLoop {
            metric,
            nodes,
            degree,
            opts,
            segments: Vec::new(),
            energy: T::nan(),
        })
    }

    /// `j` equally spaced nodes on the parallel `z = z0`, traversed `degree` times.
    pub fn parallel(metric: Arc<Metric<T>>, z0: T, degree: i64, j: usize, opts: ConnectOptions<T>) -> Result<Self> {
        let step = T::TAU() * lit(degree as f64) / lit(j as f64);
        let nodes = (0..j).map(|i| [step * lit(i as f64), z0]).collect();
        Self::new(metric, nodes, degree, opts)
    }

    /// Builds a loop from reduced points, lifting each step to the nearest
    /// θ-representative; the degree is the resulting winding.
    pub fn from_points(metric: Arc<Metric<T>>, points: &[Point<T>], opts: ConnectOptions<T>) -> Result<Self> {
        let (nodes, degree) = unwrap_points(points)?;
        Self::new(metric, nodes, degree, opts)
    }

    pub(crate) fn connected(
        metric: Arc<Metric<T>>,
        nodes: Vec<V2<T>>,
        degree: i64,
        opts: ConnectOptions<T>,
        warm: Option<WarmStart<'_, T>>,
    ) -> Result<Self> {
        validate_nodes(&metric, &nodes)?;
        let j = nodes.len();
        let shift = shift_for(degree);
        let mut segments = Vec::with_capacity(j);
        for i in 0..j {
            let p = nodes[i];
            let q = if i + 1 == j { add(nodes[0], shift) } else { nodes[i + 1] };
            let guess = warm.map(|(old, segs)| {
                let op = old[i];
                let oq = if i + 1 == j { add(old[0], shift) } else { old[i + 1] };
                add(segs[i].v0, sub(sub(q, oq), sub(p, op)))
            });
            segments.push(connect_lifted(&metric, p, q, guess, &opts)?);
        }
        let energy = lit::<T>(j as f64) * segments.iter().map(|s| s.energy).sum::<T>();
        Ok(BrokenLoop {
            metric,
            nodes,
            degree,
            opts,
            segments,
            energy,
        })
    }

    /// Re-connects every segment from scratch.
    pub fn reconnect(&self) -> Result<Self> {
        Self::connected(self.metric.clone(), self.nodes.clone(), self.degree, self.opts, None)
    }

    /// Same degree and options, new node positions; warm-starts from `self`.
    pub fn with_nodes(&self, nodes: Vec<V2<T>>) -> Result<Self> {
        let warm = (self.is_connected() && nodes.len() == self.nodes.len())
            .then_some((self.nodes.as_slice(), self.segments.as_slice()));
        Self::connected(self.metric.clone(), nodes, self.degree, self.opts, warm)
    }

    pub fn metric(&self) -> &Metric<T> {
        &self.metric
    }

    pub fn metric_arc(&self) -> &Arc<Metric<T>> {
        &self.metric
    }

    pub fn options(&self) -> &ConnectOptions<T> {
        &self.opts
    }

    pub fn nodes(&self) -> &[V2<T>] {
        &self.nodes
    }

    pub fn points(&self) -> Vec<Point<T>> {
        self.nodes.iter().map(|x| Point::new(x[0], x[1])).collect()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn degree(&self) -> i64 {
        self.degree
    }

    pub fn is_connected(&self) -> bool {
        self.segments.len() == self.nodes.len()
    }

    pub fn segments(&self) -> Result<&[GeodesicSegment<T>]> {
        if self.is_connected() {
            Ok(&self.segments)
        } else {
            Err(Error::StaleSegments)
        }
    }

    /// `j · Σ e_i`, where `e_i` is the time-1 energy of segment `i`.
    pub fn energy(&self) -> Result<T> {
        self.segments()?;
        Ok(self.energy)
    }

    /// Total metric length of the broken geodesic.
    pub fn length(&self) -> Result<T> {
        Ok(self.segments()?.iter().map(|s| s.length).sum())
    }

    /// Lifted endpoint of the closing segment.
    pub fn closure_node(&self) -> V2<T> {
        add(self.nodes[0], shift_for(self.degree))
    }

    pub fn mean_z(&self) -> T {
        self.nodes.iter().map(|x| x[1]).sum::<T>() / lit(self.nodes.len() as f64)
    }

    /// Metric gradient at each node, `2j (v_in − v_out)`.
    pub fn gradient(&self) -> Result<Vec<Tangent<T>>> {
        Ok(self
            .gradient_vectors()?
            .into_iter()
            .zip(&self.nodes)
            .map(|(g, x)| Tangent::new(Point::new(x[0], x[1]), g[0], g[1]))
            .collect())
    }

    pub fn gradient_vectors(&self) -> Result<Vec<V2<T>>> {
        let segs = self.segments()?;
        let j = segs.len();
        let two_j = lit::<T>(2.0 * j as f64);
        Ok((0..j)
            .map(|i| {
                let vin = segs[(i + j - 1) % j].v1;
                let vout = segs[i].v0;
                [two_j * (vin[0] - vout[0]), two_j * (vin[1] - vout[1])]
            })
            .collect())
    }

    /// Derivative of the energy in chart node coordinates, flattened
    /// `[∂θ₀, ∂z₀, ∂θ₁, …]`.
    pub fn covector(&self) -> Result<Vec<T>> {
        let g = self.gradient_vectors()?;
        let mut out = Vec::with_capacity(2 * g.len());
        for (x, v) in self.nodes.iter().zip(g) {
            let c = self.metric.lower(*x, v)?;
            out.extend_from_slice(&c);
        }
        Ok(out)
    }

    /// `sqrt(Σ g(G_i, G_i))` of the metric gradient.
    pub fn gradient_norm(&self) -> Result<T> {
        let g = self.gradient_vectors()?;
        let mut s = T::zero();
        for (x, v) in self.nodes.iter().zip(g) {
            s += self.metric.norm_sq(*x, v)?;
        }
        Ok(s.sqrt())
    }

    /// Gradient norm divided by the energy (scale-free criticality measure).
    pub fn relative_gradient_norm(&self) -> Result<T> {
        let g = self.gradient_norm()?;
        let e = self.energy()?;
        Ok(if e > T::zero() {
            g / e
        } else if g == T::zero() {
            T::zero()
        } else {
            T::infinity()
        })
    }

    /// True iff the relative gradient norm is below `tol`.
    pub fn is_critical(&self, tol: T) -> Result<bool> {
        Ok(self.relative_gradient_norm()? < tol)
    }

    /// The `m`-fold iterate: `j·m` nodes, degree `m·degree`, energy `m²·E`.
    pub fn iterate(&self, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::Precondition("iterate count must be >= 1".into()));
        }
        let segs = self.segments()?;
        let shift = shift_for::<T>(self.degree);
        let mut nodes = Vec::with_capacity(self.len() * m);
        let mut segments = Vec::with_capacity(self.len() * m);
        for k in 0..m {
            let s = [shift[0] * lit(k as f64), T::zero()];
            for (x, seg) in self.nodes.iter().zip(segs) {
                nodes.push(add(*x, s));
                let mut seg = *seg;
                seg.start = add(seg.start, s);
                seg.end = add(seg.end, s);
                segments.push(seg);
            }
        }
        let mm = lit::<T>((m * m) as f64);
        Ok(BrokenLoop {
            metric: self.metric.clone(),
            nodes,
            degree: self.degree * m as i64,
            opts: self.opts,
            segments,
            energy: mm * self.energy,
        })
    }

    /// Cyclic relabelling: node `k` becomes node 0.
    pub fn rotate(&self, k: usize) -> Result<Self> {
        let j = self.len();
        let k = k % j;
        let shift = shift_for(self.degree);
        let mut nodes = Vec::with_capacity(j);
        let mut segments = Vec::with_capacity(j);
        let segs = self.segments()?;
        for i in 0..j {
            let src = (i + k) % j;
            let wrap = i + k >= j;
            let s = if wrap { shift } else { [T::zero(); 2] };
            nodes.push(add(self.nodes[src], s));
            let mut seg = segs[src];
            seg.start = add(seg.start, s);
            seg.end = add(seg.end, s);
            segments.push(seg);
        }
        Ok(BrokenLoop {
            metric: self.metric.clone(),
            nodes,
            degree: self.degree,
            opts: self.opts,
            segments,
            energy: self.energy,
        })
    }

    /// Same image traversed backwards; the winding changes sign.
    pub fn reversed(&self) -> Result<Self> {
        let j = self.len();
        let shift = shift_for::<T>(self.degree);
        let mut nodes: Vec<V2<T>> = Vec::with_capacity(j);
        nodes.push(self.nodes[0]);
        for i in (1..j).rev() {
            nodes.push(sub(self.nodes[i], shift));
        }
        Self::new(self.metric.clone(), nodes, -self.degree, self.opts)
    }

    /// Position at loop parameter `t ∈ [0, 1)` along the broken parametrization.
    pub fn position(&self, t: T) -> Result<V2<T>> {
        let segs = self.segments()?;
        let j = segs.len();
        let tj = t * lit(j as f64);
        let i = tj.floor().to_usize().unwrap_or(0).min(j - 1);
        let s = tj - lit(i as f64);
        let seg = &segs[i];
        if s <= T::zero() || seg.steps == 0 {
            return Ok(seg.start);
        }
        let steps = (lit::<T>(seg.steps as f64) * s).ceil().to_usize().unwrap_or(1).max(1);
        Ok(flow(&self.metric, seg.start, seg.v0, s, steps)?.0)
    }

    /// Re-discretizes with `j_new` nodes at equal parameter fractions.
    pub fn resample(&self, j_new: usize) -> Result<Self> {
        if j_new < 3 {
            return Err(Error::InvalidLoop(format!("need at least 3 nodes, got {j_new}")));
        }
        let j = self.len();
        let mut nodes = Vec::with_capacity(j_new);
        for k in 0..j_new {
            // exact rational position k/j_new to avoid drifting segment indices
            let num = k * j;
            let i = num / j_new;
            let rem = num % j_new;
            if rem == 0 {
                nodes.push(self.nodes[i]);
            } else {
                let s = lit::<T>(rem as f64) / lit(j_new as f64);
                let seg = &self.segments()?[i];
                let steps = (lit::<T>(seg.steps.max(1) as f64) * s)
                    .ceil()
                    .to_usize()
                    .unwrap_or(1)
                    .max(1);
                nodes.push(flow(&self.metric, seg.start, seg.v0, s, steps)?.0);
            }
        }
        Self::new(self.metric.clone(), nodes, self.degree, self.opts)
    }

    /// Densely sampled image, `per_segment` points per segment, θ lifted.
    pub fn image(&self, per_segment: usize) -> Result<Vec<V2<T>>> {
        let mut pts = Vec::with_capacity(self.len() * per_segment + 1);
        for seg in self.segments()? {
            let s = seg.sample(&self.metric, per_segment)?;
            pts.extend(s[..per_segment].iter().map(|p| p.x));
        }
        pts.push(self.closure_node());
        Ok(pts)
    }

    /// Finite-difference Hessian of the energy in chart node coordinates.
    ///
    /// Node `k` only enters segments `k-1` and `k`, so each column needs two
    /// reconnections per side; the matrix is cyclic block-tridiagonal.
    pub fn hessian(&self, step: T) -> Result<SymMatrix<T>> {
        let segs = self.segments()?.to_vec();
        let j = self.len();
        let n = 2 * j;
        let shift = shift_for(self.degree);
        let two_j = lit::<T>(2.0 * j as f64);
        let node_at = |nodes: &[V2<T>], i: usize| if i == j { add(nodes[0], shift) } else { nodes[i] };
        let mut h = SymMatrix::zeros(n);
        let mut cols = vec![vec![T::zero(); 6]; n];
        for k in 0..j {
            let km = (k + j - 1) % j;
            let kp = (k + 1) % j;
            for a in 0..2 {
                let mut covs = [[[T::zero(); 2]; 3]; 2];
                for (side, sign) in [(0usize, T::one()), (1usize, -T::one())] {
                    let mut nodes = self.nodes.clone();
                    nodes[k][a] += sign * step;
                    // segment k-1 ends at node k (or its lift when k = 0)
                    let p_m = nodes[km];
                    let q_m = if k == 0 { node_at(&nodes, j) } else { nodes[k] };
                    let s_m = connect_lifted(&self.metric, p_m, q_m, Some(segs[km].v0), &self.opts)?;
                    let p_k = nodes[k];
                    let q_k = node_at(&nodes, k + 1);
                    let s_k = connect_lifted(&self.metric, p_k, q_k, Some(segs[k].v0), &self.opts)?;
                    let v1_prev = segs[(km + j - 1) % j].v1;
                    let v0_next = segs[kp].v0;
                    let g = |i: usize, vin: V2<T>, vout: V2<T>| {
                        let v = [two_j * (vin[0] - vout[0]), two_j * (vin[1] - vout[1])];
                        self.metric.lower(nodes[i], v)
                    };
                    covs[side][0] = g(km, v1_prev, s_m.v0)?;
                    covs[side][1] = g(k, s_m.v1, s_k.v0)?;
                    covs[side][2] = g(kp, s_k.v1, v0_next)?;
                }
                let col = 2 * k + a;
                let inv = T::one() / (step + step);
                for (slot, _) in [km, k, kp].iter().enumerate() {
                    for b in 0..2 {
                        cols[col][2 * slot + b] = (covs[0][slot][b] - covs[1][slot][b]) * inv;
                    }
                }
            }
        }
        // accumulate (j >= 3 keeps km, k, kp distinct) and symmetrize
        let mut full = vec![T::zero(); n * n];
        for k in 0..j {
            let rows = [(k + j - 1) % j, k, (k + 1) % j];
            for a in 0..2 {
                let col = 2 * k + a;
                for (slot, &r) in rows.iter().enumerate() {
                    for b in 0..2 {
                        full[(2 * r + b) * n + col] += cols[col][2 * slot + b];
                    }
                }
            }
        }
        let half = lit::<T>(0.5);
        for r in 0..n {
            for c in 0..=r {
                h.set(r, c, half * (full[r * n + c] + full[c * n + r]));
            }
        }
        Ok(h)
    }
}

pub(crate) fn shift_for<T: Real>(degree: i64) -> V2<T> {
    [T::TAU() * lit(degree as f64), T::zero()]
}

fn validate_nodes<T: Real>(metric: &Metric<T>, nodes: &[V2<T>]) -> Result<()> {
    if nodes.len() < 3 {
        return Err(Error::InvalidLoop(format!(
            "need at least 3 nodes, got {}",
            nodes.len()
        )));
    }
    for x in nodes {
        if !(x[0].is_finite() && x[1].is_finite()) {
            return Err(Error::InvalidLoop("non-finite node".into()));
        }
        metric.check_loop_point(x[1])?;
    }
    Ok(())
}

/// Lifts reduced points by nearest-representative steps; returns the nodes and
/// the winding number of the closed polygon.
pub fn unwrap_points<T: Real>(points: &[Point<T>]) -> Result<(Vec<V2<T>>, i64)> {
    if points.len() < 3 {
        return Err(Error::InvalidLoop(format!(
            "need at least 3 nodes, got {}",
            points.len()
        )));
    }
    let tau = T::TAU();
    let near = |d: T| d - tau * (d / tau).round();
    let mut nodes = Vec::with_capacity(points.len());
    let mut theta = points[0].theta;
    nodes.push([theta, points[0].z]);
    for w in points.windows(2) {
        theta += near(w[1].theta - w[0].theta);
        nodes.push([theta, w[1].z]);
    }
    let last = points[points.len() - 1].theta;
    let total = theta + near(points[0].theta - last) - points[0].theta;
    let degree = (total / tau).round().to_i64().unwrap_or(0);
    Ok((nodes, degree))
}

/// Shortest chart distance with θ taken modulo 2π.
fn periodic_distance<T: Real>(a: V2<T>, b: V2<T>) -> T {
    let tau = T::TAU();
    let d = a[0] - b[0];
    let dt = d - tau * (d / tau).round();
    dt.hypot(a[1] - b[1])
}

fn point_segment_distance<T: Real>(p: V2<T>, a: V2<T>, b: V2<T>) -> T {
    // lift the segment next to p first
    let tau = T::TAU();
    let off = tau * ((p[0] - a[0]) / tau).round();
    let a = [a[0] + off, a[1]];
    let b = [b[0] + off, b[1]];
    let ab = sub(b, a);
    let ap = sub(p, a);
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > T::zero() {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).max(T::zero()).min(T::one())
    } else {
        T::zero()
    };
    let c = [a[0] + t * ab[0], a[1] + t * ab[1]];
    periodic_distance(p, c)
}

fn directed_hausdorff<T: Real>(from: &[V2<T>], to: &[V2<T>]) -> T {
    let mut worst = T::zero();
    for &p in from {
        let mut best = T::infinity();
        for w in to.windows(2) {
            let zlo = w[0][1].min(w[1][1]);
            let zhi = w[0][1].max(w[1][1]);
            let gap = (zlo - p[1]).max(p[1] - zhi).max(T::zero());
            if gap >= best {
                continue;
            }
            best = best.min(point_segment_distance(p, w[0], w[1]));
        }
        worst = worst.max(best);
    }
    worst
}

/// Symmetric chart Hausdorff distance between the images, θ reduced.
pub fn hausdorff_distance<T: Real>(a: &BrokenLoop<T>, b: &BrokenLoop<T>) -> Result<T> {
    let per = 12;
    let ia = a.image(per)?;
    let ib = b.image(per)?;
    Ok(directed_hausdorff(&ia, &ib).max(directed_hausdorff(&ib, &ia)))
}

/// Whether the images differ by more than `tol` in chart Hausdorff distance.
pub fn geometric_distinct<T: Real>(a: &BrokenLoop<T>, b: &BrokenLoop<T>, tol: T) -> Result<bool> {
    let range = |l: &BrokenLoop<T>| {
        l.nodes()
            .iter()
            .fold((T::infinity(), T::neg_infinity()), |(lo, hi), x| {
                (lo.min(x[1]), hi.max(x[1]))
            })
    };
    let (alo, ahi) = range(a);
    let (blo, bhi) = range(b);
    // node z-ranges bound the image ranges up to segment sag
    if (alo - blo).abs() > lit::<T>(4.0) * tol + lit(0.5) || (ahi - bhi).abs() > lit::<T>(4.0) * tol + lit(0.5) {
        return Ok(true);
    }
    Ok(hausdorff_distance(a, b)? > tol)
}

/// Summary numbers of a loop, for records and reports.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopSummary {
    pub nodes: usize,
    pub degree: i64,
    pub length: f64,
    pub energy: f64,
    pub relative_gradient: f64,
}

impl<T: Real> BrokenLoop<T> {
    pub fn summary(&self) -> Result<LoopSummary> {
        Ok(LoopSummary {
            nodes: self.len(),
            degree: self.degree,
            length: to_f64(self.length()?),
            energy: to_f64(self.energy()?),
            relative_gradient: to_f64(self.relative_gradient_norm()?),
        })
    }
}

#[cfg(test)]
mod tests;

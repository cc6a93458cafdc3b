//! Geodesic ODE integration, two-point connection and Clairaut shooting.
//!
//! All routines work in the universal cover of the chart: θ is never reduced
//! while integrating, so a trajectory carries its own winding.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{add, axpy, lit, norm, scale, sub, to_f64, Real, V2};
use crate::surface::{Metric, MetricMode, Point, Tangent};

/// One recorded state of a trajectory; `x[0]` is the θ-lift.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample<T> {
    pub t: T,
    pub x: V2<T>,
    pub v: V2<T>,
}

impl<T: Real> Sample<T> {
    pub fn point(&self) -> Point<T> {
        Point::new(self.x[0], self.x[1])
    }

    pub fn tangent(&self) -> Tangent<T> {
        Tangent::new(self.point(), self.v[0], self.v[1])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TurnKind {
    /// `dz/dt` changes from positive to negative (local max of z).
    Upper,
    /// `dz/dt` changes from negative to positive.
    Lower,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TurningEvent<T> {
    pub t: T,
    pub x: V2<T>,
    pub v: V2<T>,
    pub kind: TurnKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FlowStatus {
    Completed,
    /// Left the domain, crossed `|z| = escape_z`, or entered the pole disc.
    Escaped,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<T> {
    pub samples: Vec<Sample<T>>,
    pub turning: Vec<TurningEvent<T>>,
    pub status: FlowStatus,
    /// Step size actually used (halved once if the first attempt blew up).
    pub step: T,
}

impl<T: Real> Trajectory<T> {
    pub fn last(&self) -> &Sample<T> {
        self.samples.last().expect("trajectory has at least the initial sample")
    }

    /// Accumulated θ advance along the whole trajectory.
    pub fn theta_lift(&self) -> T {
        self.last().x[0] - self.samples[0].x[0]
    }

    /// `t θ z` rows, θ unreduced.
    pub fn to_text(&self) -> String {
        let mut s = String::from("# t theta z\n");
        for p in &self.samples {
            let _ = writeln!(s, "{} {} {}", p.t, p.x[0], p.x[1]);
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowOptions<T> {
    pub escape_z: T,
    /// Record every `sample_stride`-th step (the final state is always kept).
    pub sample_stride: usize,
    /// Stop once this many turning events were seen (0: never).
    pub stop_after_turns: usize,
}

impl<T: Real> Default for FlowOptions<T> {
    fn default() -> Self {
        FlowOptions {
            escape_z: lit(50.0),
            sample_stride: 1,
            stop_after_turns: 0,
        }
    }
}

#[inline]
fn rk4_step<T: Real>(m: &Metric<T>, x: V2<T>, v: V2<T>, h: T) -> Result<(V2<T>, V2<T>)> {
    let half = h * lit(0.5);
    let a1 = m.geodesic_acceleration(x, v)?;
    let x2 = axpy(x, half, v);
    let v2 = axpy(v, half, a1);
    let a2 = m.geodesic_acceleration(x2, v2)?;
    let x3 = axpy(x, half, v2);
    let v3 = axpy(v, half, a2);
    let a3 = m.geodesic_acceleration(x3, v3)?;
    let x4 = axpy(x, h, v3);
    let v4 = axpy(v, h, a3);
    let a4 = m.geodesic_acceleration(x4, v4)?;
    let sixth = h / lit(6.0);
    let two = lit::<T>(2.0);
    let xn = [
        x[0] + sixth * (v[0] + two * v2[0] + two * v3[0] + v4[0]),
        x[1] + sixth * (v[1] + two * v2[1] + two * v3[1] + v4[1]),
    ];
    let vn = [
        v[0] + sixth * (a1[0] + two * a2[0] + two * a3[0] + a4[0]),
        v[1] + sixth * (a1[1] + two * a2[1] + two * a3[1] + a4[1]),
    ];
    Ok((xn, vn))
}

/// Time-`duration` flow with `steps` uniform RK4 steps; no events, no samples.
pub fn flow<T: Real>(m: &Metric<T>, x: V2<T>, v: V2<T>, duration: T, steps: usize) -> Result<(V2<T>, V2<T>)> {
    let h = duration / lit(steps as f64);
    let (mut x, mut v) = (x, v);
    for _ in 0..steps {
        (x, v) = rk4_step(m, x, v, h)?;
    }
    if !(x[0].is_finite() && x[1].is_finite() && v[0].is_finite() && v[1].is_finite()) {
        return Err(Error::Integration("non-finite state".into()));
    }
    Ok((x, v))
}

/// Like [`flow`] but returns the displacement from `base`, accumulated in
/// local coordinates so large θ-lifts do not cost precision.
pub fn flow_displacement<T: Real>(
    m: &Metric<T>,
    base: V2<T>,
    v: V2<T>,
    duration: T,
    steps: usize,
) -> Result<(V2<T>, V2<T>)> {
    let h = duration / lit(steps as f64);
    let half = h * lit(0.5);
    let sixth = h / lit(6.0);
    let two = lit::<T>(2.0);
    let acc = |y: V2<T>, v: V2<T>| m.geodesic_acceleration(add(base, y), v);
    let (mut y, mut v) = ([T::zero(); 2], v);
    for _ in 0..steps {
        let a1 = acc(y, v)?;
        let y2 = axpy(y, half, v);
        let v2 = axpy(v, half, a1);
        let a2 = acc(y2, v2)?;
        let y3 = axpy(y, half, v2);
        let v3 = axpy(v, half, a2);
        let a3 = acc(y3, v3)?;
        let y4 = axpy(y, h, v3);
        let v4 = axpy(v, h, a3);
        let a4 = acc(y4, v4)?;
        for k in 0..2 {
            y[k] += sixth * (v[k] + two * v2[k] + two * v3[k] + v4[k]);
            v[k] += sixth * (a1[k] + two * a2[k] + two * a3[k] + a4[k]);
        }
    }
    if !(y[0].is_finite() && y[1].is_finite() && v[0].is_finite() && v[1].is_finite()) {
        return Err(Error::Integration("non-finite state".into()));
    }
    Ok((y, v))
}

enum Attempt<T> {
    Done(Trajectory<T>),
    Blowup,
}

fn outside<T: Real>(m: &Metric<T>, x: V2<T>, escape_z: T) -> bool {
    let z = x[1];
    !m.domain().contains(z) || z.abs() > escape_z || (m.is_plane() && z < m.pole_exclusion())
}

fn integrate_once<T: Real>(
    m: &Metric<T>,
    x0: V2<T>,
    v0: V2<T>,
    duration: T,
    h_req: T,
    opts: &FlowOptions<T>,
) -> Attempt<T> {
    let steps = (duration / h_req).ceil().to_usize().unwrap_or(1).max(1);
    let h = duration / lit(steps as f64);
    let stride = opts.sample_stride.max(1);
    let mut samples = vec![Sample {
        t: T::zero(),
        x: x0,
        v: v0,
    }];
    let mut turning = Vec::new();
    let (mut x, mut v) = (x0, v0);
    let mut status = FlowStatus::Completed;
    let mut t_cur = T::zero();
    for i in 0..steps {
        let t = h * lit(i as f64);
        let (xn, vn) = match rk4_step(m, x, v, h) {
            Ok(s) => s,
            Err(_) => {
                status = FlowStatus::Escaped;
                break;
            }
        };
        if !(xn[0].is_finite() && xn[1].is_finite() && vn[0].is_finite() && vn[1].is_finite()) {
            return Attempt::Blowup;
        }
        if outside(m, xn, opts.escape_z) {
            status = FlowStatus::Escaped;
            break;
        }
        if let Some(kind) = turn_kind(v[1], vn[1]) {
            if let Some(ev) = locate_turn(m, x, v, h, t, kind) {
                turning.push(ev);
            }
        }
        x = xn;
        v = vn;
        t_cur = h * lit((i + 1) as f64);
        let stop = opts.stop_after_turns > 0 && turning.len() >= opts.stop_after_turns;
        if (i + 1) % stride == 0 || i + 1 == steps || stop {
            samples.push(Sample { t: t_cur, x, v });
        }
        if stop {
            break;
        }
    }
    if status == FlowStatus::Escaped && samples.last().map(|s| s.x) != Some(x) {
        samples.push(Sample { t: t_cur, x, v });
    }
    Attempt::Done(Trajectory {
        samples,
        turning,
        status,
        step: h,
    })
}

fn turn_kind<T: Real>(w0: T, w1: T) -> Option<TurnKind> {
    let z = T::zero();
    if w0 > z && w1 <= z {
        Some(TurnKind::Upper)
    } else if w0 < z && w1 >= z {
        Some(TurnKind::Lower)
    } else {
        None
    }
}

/// Bisects the sub-step `τ ∈ (0, h]` where `dz/dt` vanishes.
fn locate_turn<T: Real>(m: &Metric<T>, x: V2<T>, v: V2<T>, h: T, t0: T, kind: TurnKind) -> Option<TurningEvent<T>> {
    let w0 = v[1];
    let (mut lo, mut hi) = (T::zero(), h);
    for _ in 0..80 {
        let mid = (lo + hi) * lit(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        let (_, vm) = rk4_step(m, x, v, mid).ok()?;
        if (vm[1] > T::zero()) == (w0 > T::zero()) && vm[1] != T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau = (lo + hi) * lit(0.5);
    let (xe, ve) = rk4_step(m, x, v, tau).ok()?;
    Some(TurningEvent {
        t: t0 + tau,
        x: xe,
        v: ve,
        kind,
    })
}

/// Integrates the geodesic through `p` with initial velocity `v` for time
/// `duration` using fixed RK4 steps of size at most `h`.
///
/// Escapes are not errors: the partial trajectory comes back with
/// [`FlowStatus::Escaped`]. A numerical blow-up is retried once at `h/2`.
pub fn integrate<T: Real>(m: &Metric<T>, p: Point<T>, v: Tangent<T>, duration: T, h: T) -> Result<Trajectory<T>> {
    integrate_lifted(m, p.coords(), v.components(), duration, h, &FlowOptions::default())
}

pub fn integrate_lifted<T: Real>(
    m: &Metric<T>,
    x0: V2<T>,
    v0: V2<T>,
    duration: T,
    h: T,
    opts: &FlowOptions<T>,
) -> Result<Trajectory<T>> {
    if !(h > T::zero()) || !(duration >= T::zero()) {
        return Err(Error::Precondition("integration needs h > 0 and duration >= 0".into()));
    }
    m.check_loop_point(x0[1])?;
    match integrate_once(m, x0, v0, duration, h, opts) {
        Attempt::Done(t) => Ok(t),
        Attempt::Blowup => match integrate_once(m, x0, v0, duration, h * lit(0.5), opts) {
            Attempt::Done(t) => Ok(t),
            Attempt::Blowup => Err(Error::Integration(format!(
                "non-finite state after step halving (h={})",
                to_f64(h)
            ))),
        },
    }
}

/// Clairaut momentum `g_θθ θ′`, conserved on revolution metrics.
pub fn clairaut_momentum<T: Real>(m: &Metric<T>, v: &Tangent<T>) -> Result<T> {
    momentum_at(m, v.base.coords(), v.components())
}

pub fn momentum_at<T: Real>(m: &Metric<T>, x: V2<T>, v: V2<T>) -> Result<T> {
    if !m.is_revolution() {
        return Err(Error::UnsupportedMode(m.mode().name()));
    }
    let g = m.components(x)?;
    Ok(g[0] * v[0])
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConnectOptions<T> {
    /// Segment cap ε on the metric length.
    pub segment_cap: T,
    pub max_iter: usize,
    /// Newton target on the chart endpoint residual.
    pub tol: T,
    /// Residual above which the connection is reported as failed.
    pub fail_tol: T,
    /// RK4 resolution: `steps ≈ |v|·(1 + |Γ|) / resolution`.
    pub resolution: T,
}

impl<T: Real> Default for ConnectOptions<T> {
    fn default() -> Self {
        ConnectOptions {
            segment_cap: lit(1.0),
            max_iter: 50,
            tol: T::tol(1e-13, 8.0),
            fail_tol: T::tol(1e-10, 512.0),
            resolution: lit(0.01),
        }
    }
}

/// Time-1 geodesic from `start` towards `end`, the building block of broken loops.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeodesicSegment<T> {
    pub start: V2<T>,
    pub end: V2<T>,
    /// Velocity at `t = 0`.
    pub v0: V2<T>,
    /// Velocity at `t = 1`.
    pub v1: V2<T>,
    /// `end` minus the numerically reached endpoint.
    pub miss: V2<T>,
    pub length: T,
    /// Time-1 energy `g(v0, v0)` corrected to first order for `miss`.
    pub energy: T,
    pub steps: usize,
    pub iterations: usize,
}

impl<T: Real> GeodesicSegment<T> {
    pub fn zero(at: V2<T>) -> Self {
        let z = [T::zero(); 2];
        GeodesicSegment {
            start: at,
            end: at,
            v0: z,
            v1: z,
            miss: z,
            length: T::zero(),
            energy: T::zero(),
            steps: 0,
            iterations: 0,
        }
    }

    pub fn duration(&self) -> T {
        T::one()
    }

    pub fn initial_tangent(&self) -> Tangent<T> {
        Tangent::new(Point::new(self.start[0], self.start[1]), self.v0[0], self.v0[1])
    }

    /// `n + 1` equally spaced states along the segment, re-integrated from `start`.
    pub fn sample(&self, m: &Metric<T>, n: usize) -> Result<Vec<Sample<T>>> {
        let n = n.max(1);
        let per = self.steps.max(n).div_ceil(n);
        let h = T::one() / lit((n * per) as f64);
        let mut out = Vec::with_capacity(n + 1);
        let (mut x, mut v) = (self.start, self.v0);
        out.push(Sample { t: T::zero(), x, v });
        for i in 0..n {
            for _ in 0..per {
                (x, v) = rk4_step(m, x, v, h)?;
            }
            out.push(Sample {
                t: lit::<T>((i + 1) as f64) / lit(n as f64),
                x,
                v,
            });
        }
        Ok(out)
    }
}

fn step_count<T: Real>(m: &Metric<T>, p: V2<T>, q: V2<T>, resolution: T) -> Result<usize> {
    let gamma = m.christoffel(p)?.max_abs().max(m.christoffel(q)?.max_abs());
    let lambda = norm(sub(q, p)) * (T::one() + gamma) / resolution;
    let n = lambda.ceil().to_f64().unwrap_or(4096.0);
    Ok(n.clamp(4.0, 4096.0) as usize)
}

fn solve2<T: Real>(j: [[T; 2]; 2], r: V2<T>) -> Option<V2<T>> {
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    if det == T::zero() || !det.is_finite() {
        return None;
    }
    Some([
        (j[1][1] * r[0] - j[0][1] * r[1]) / det,
        (j[0][0] * r[1] - j[1][0] * r[0]) / det,
    ])
}

/// Connects the lifted chart points `p` and `q` by a time-1 geodesic.
///
/// Damped Newton on the initial velocity with a forward-difference Jacobian;
/// the default guess is the chart straight line `q - p`.
pub fn connect_lifted<T: Real>(
    m: &Metric<T>,
    p: V2<T>,
    q: V2<T>,
    guess: Option<V2<T>>,
    opts: &ConnectOptions<T>,
) -> Result<GeodesicSegment<T>> {
    m.domain().check(p[1])?;
    m.domain().check(q[1])?;
    if p == q {
        return Ok(GeodesicSegment::zero(p));
    }
    let steps = step_count(m, p, q, opts.resolution)?;
    let scale_q = T::one() + norm(sub(q, p));
    let tol = opts.tol * scale_q;
    let fail = opts.fail_tol * scale_q;
    let d = sub(q, p);
    let shoot = |v: V2<T>| flow_displacement(m, p, v, T::one(), steps);
    let residual = |v: V2<T>| -> Option<(V2<T>, V2<T>, V2<T>)> {
        let (y, v1) = shoot(v).ok()?;
        Some((sub(y, d), y, v1))
    };

    let mut v = guess.unwrap_or_else(|| sub(q, p));
    let (mut r, mut reach, mut v1) = match residual(v) {
        Some(s) => s,
        None => {
            v = sub(q, p);
            residual(v).ok_or(Error::Connection {
                iterations: 0,
                residual: f64::INFINITY,
            })?
        }
    };
    let mut rn = norm(r);
    let mut iterations = 0;
    let fd = T::epsilon().sqrt();
    while rn > tol && iterations < opts.max_iter {
        iterations += 1;
        let mut jac = [[T::zero(); 2]; 2];
        for k in 0..2 {
            let d = fd * (T::one() + v[k].abs());
            let mut vp = v;
            vp[k] += d;
            let (rp, _, _) = residual(vp).ok_or(Error::Connection {
                iterations,
                residual: to_f64(rn),
            })?;
            jac[0][k] = (rp[0] - r[0]) / d;
            jac[1][k] = (rp[1] - r[1]) / d;
        }
        let Some(delta) = solve2(jac, scale(-T::one(), r)) else {
            break;
        };
        let mut lambda = T::one();
        let mut improved = false;
        for _ in 0..30 {
            let vt = axpy(v, lambda, delta);
            if let Some((rt, xt, v1t)) = residual(vt) {
                let rtn = norm(rt);
                if rtn < rn {
                    v = vt;
                    r = rt;
                    reach = xt;
                    v1 = v1t;
                    rn = rtn;
                    improved = true;
                    break;
                }
            }
            lambda *= lit(0.5);
        }
        if !improved {
            break;
        }
    }
    if !(rn <= fail) {
        return Err(Error::Connection {
            iterations,
            residual: to_f64(rn),
        });
    }
    let g0 = m.norm_sq(p, v)?;
    let length = g0.sqrt();
    if length > opts.segment_cap {
        return Err(Error::SegmentTooLong {
            length: to_f64(length),
            cap: to_f64(opts.segment_cap),
        });
    }
    let miss = sub(d, reach);
    let energy = g0 + lit::<T>(2.0) * m.inner(q, v1, miss)?;
    Ok(GeodesicSegment {
        start: p,
        end: q,
        v0: v,
        v1,
        miss,
        length,
        energy,
        steps,
        iterations,
    })
}

/// Connects two points, lifting `q` to the θ-representative nearest `p`.
pub fn connect<T: Real>(
    m: &Metric<T>,
    p: Point<T>,
    q: Point<T>,
    guess: Option<Tangent<T>>,
) -> Result<GeodesicSegment<T>> {
    let tau = T::TAU();
    let mut qt = q.theta;
    while qt - p.theta > T::PI() {
        qt -= tau;
    }
    while qt - p.theta < -T::PI() {
        qt += tau;
    }
    connect_lifted(
        m,
        p.coords(),
        [qt, q.z],
        guess.map(|g| g.components()),
        &ConnectOptions::default(),
    )
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShootOptions<T> {
    pub h: T,
    /// Window searched for the trapping maximum of the profile.
    pub z_window: (T, T),
    /// Uniform samples of the momentum bracket used to look for a sign change.
    pub bracket_samples: usize,
    /// Longest integration allowed for one full oscillation.
    pub max_time: T,
    pub escape_z: T,
}

impl<T: Real> Default for ShootOptions<T> {
    fn default() -> Self {
        ShootOptions {
            h: lit(1e-3),
            z_window: (lit(-10.0), lit(10.0)),
            bracket_samples: 64,
            max_time: lit(400.0),
            escape_z: lit(50.0),
        }
    }
}

/// A closed geodesic found by Clairaut shooting, unit speed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShotGeodesic<T> {
    pub momentum: T,
    pub oscillations: u32,
    pub windings: u32,
    /// θ advance over one full z-oscillation.
    pub delta_theta: T,
    /// Time of one full z-oscillation.
    pub oscillation_time: T,
    /// Total length of the closed geodesic (unit speed, so also its period).
    pub length: T,
    /// State at an upper turning point; the geodesic is closed from here.
    pub start: V2<T>,
    pub start_velocity: V2<T>,
    /// Chart mismatch of position and velocity after one period.
    pub closure_defect: T,
    pub z_range: (T, T),
}

impl<T: Real> ShotGeodesic<T> {
    pub fn degree(&self) -> i64 {
        self.windings as i64
    }

    /// Node positions at `j` equal time fractions of the period.
    pub fn nodes(&self, m: &Metric<T>, j: usize, h: T) -> Result<Vec<V2<T>>> {
        let per = ((self.length / lit(j as f64)) / h)
            .ceil()
            .to_usize()
            .unwrap_or(1)
            .max(1);
        let dt = self.length / lit((j * per) as f64);
        let (mut x, mut v) = (self.start, self.start_velocity);
        let mut out = Vec::with_capacity(j);
        for _ in 0..j {
            out.push(x);
            for _ in 0..per {
                (x, v) = rk4_step(m, x, v, dt)?;
            }
        }
        Ok(out)
    }

    /// Densely sampled trajectory over one period.
    pub fn trajectory(&self, m: &Metric<T>, h: T) -> Result<Trajectory<T>> {
        let opts = FlowOptions {
            escape_z: T::max_value(),
            sample_stride: 1,
            stop_after_turns: 0,
        };
        integrate_lifted(m, self.start, self.start_velocity, self.length, h, &opts)
    }
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Interior local maximum of `√g_θθ` with the largest value, if any.
fn trapping_level<T: Real>(m: &Metric<T>, window: (T, T)) -> Result<Option<T>> {
    let d = m.domain();
    let lo = window.0.max(d.lo);
    let hi = window.1.min(d.hi);
    let n = 4000;
    let dz = (hi - lo) / lit(n as f64);
    let s = |z: T| m.warp(z).map(|w| w.s);
    let mut best: Option<(T, T)> = None;
    let mut prev = s(lo + dz)?;
    let mut cur = s(lo + dz + dz)?;
    for i in 3..n {
        let z = lo + dz * lit(i as f64);
        let next = s(z)?;
        if cur > prev && cur >= next && cur > next.min(prev) {
            // refine by golden section on [z - 2dz, z]
            let (mut a, mut b) = (z - dz - dz, z);
            let g = lit::<T>(0.618_033_988_749_894_8);
            for _ in 0..100 {
                let c = b - g * (b - a);
                let e = a + g * (b - a);
                if s(c)? > s(e)? {
                    b = e;
                } else {
                    a = c;
                }
            }
            let zm = (a + b) * lit(0.5);
            let sm = s(zm)?;
            if best.is_none_or(|(_, v)| sm > v) {
                best = Some((zm, sm));
            }
        }
        prev = cur;
        cur = next;
    }
    Ok(best.map(|b| b.0))
}

struct Oscillation<T> {
    delta_theta: T,
    time: T,
    start: V2<T>,
    start_velocity: V2<T>,
    z_range: (T, T),
}

/// Unit-speed geodesic from the trapping level with Clairaut momentum `p`;
/// measures θ advance and time between the first two upper turning points.
fn oscillation<T: Real>(m: &Metric<T>, z_star: T, p: T, opts: &ShootOptions<T>) -> Result<Option<Oscillation<T>>> {
    let w = m.warp(z_star)?;
    let c = p / w.s;
    if !(c.abs() < T::one()) {
        return Ok(None);
    }
    let v0 = [p / (w.s * w.s), (T::one() - c * c).sqrt() / w.a];
    let fo = FlowOptions {
        escape_z: opts.escape_z,
        sample_stride: usize::MAX,
        stop_after_turns: 3,
    };
    let tr = integrate_lifted(m, [T::zero(), z_star], v0, opts.max_time, opts.h, &fo)?;
    let uppers: Vec<_> = tr.turning.iter().filter(|e| e.kind == TurnKind::Upper).collect();
    if uppers.len() < 2 {
        return Ok(None);
    }
    let (a, b) = (uppers[0], uppers[1]);
    let mut zr = (a.x[1], a.x[1]);
    for e in tr.turning.iter().filter(|e| e.t <= b.t) {
        zr.0 = zr.0.min(e.x[1]);
        zr.1 = zr.1.max(e.x[1]);
    }
    Ok(Some(Oscillation {
        delta_theta: b.x[0] - a.x[0],
        time: b.t - a.t,
        start: a.x,
        start_velocity: [a.v[0], T::zero()],
        z_range: zr,
    }))
}

/// Searches for a closed geodesic making `n_osc` full z-oscillations while
/// winding `q` times around the cylinder.
///
/// Returns `Ok(None)` when the metric has no trapping region or the θ advance
/// per oscillation never crosses `2πq/n_osc` on the momentum bracket.
pub fn shoot_closed<T: Real>(
    m: &Metric<T>,
    n_osc: u32,
    q: u32,
    bracket: (T, T),
    opts: &ShootOptions<T>,
) -> Result<Option<ShotGeodesic<T>>> {
    if m.mode() == MetricMode::Chart {
        return Err(Error::UnsupportedMode("chart"));
    }
    if n_osc == 0 || q == 0 || gcd(n_osc, q) != 1 {
        return Err(Error::Precondition(format!(
            "need n_osc >= 1, q >= 1 coprime (got {n_osc}, {q})"
        )));
    }
    if !(bracket.0 < bracket.1) {
        return Err(Error::Precondition("empty momentum bracket".into()));
    }
    let Some(z_star) = trapping_level(m, opts.z_window)? else {
        return Ok(None);
    };
    let target = T::TAU() * lit(q as f64) / lit(n_osc as f64);
    let f = |p: T| -> Result<Option<T>> { Ok(oscillation(m, z_star, p, opts)?.map(|o| o.delta_theta - target)) };

    let n = opts.bracket_samples.max(2);
    let mut prev: Option<(T, T)> = None;
    let mut found = None;
    for i in 0..=n {
        let p = bracket.0 + (bracket.1 - bracket.0) * lit(i as f64) / lit(n as f64);
        let Some(v) = f(p)? else {
            prev = None;
            continue;
        };
        if let Some((pp, pv)) = prev {
            if (pv <= T::zero()) != (v <= T::zero()) {
                found = Some(((pp, pv), (p, v)));
                break;
            }
        }
        prev = Some((p, v));
    }
    let Some(((mut a, mut fa), (mut b, _))) = found else {
        return Ok(None);
    };
    for _ in 0..200 {
        let mid = (a + b) * lit(0.5);
        if mid <= a || mid >= b || (b - a) < T::tol(1e-13, 4.0) {
            break;
        }
        let Some(fm) = f(mid)? else { break };
        if (fm <= T::zero()) == (fa <= T::zero()) {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    let p = (a + b) * lit(0.5);
    let Some(osc) = oscillation(m, z_star, p, opts)? else {
        return Ok(None);
    };
    let length = osc.time * lit(n_osc as f64);
    let fo = FlowOptions {
        escape_z: opts.escape_z,
        sample_stride: usize::MAX,
        stop_after_turns: 0,
    };
    let tr = integrate_lifted(m, osc.start, osc.start_velocity, length, opts.h, &fo)?;
    let end = tr.last();
    let shift = [T::TAU() * lit(q as f64), T::zero()];
    let dx = sub(end.x, add(osc.start, shift));
    let dv = sub(end.v, osc.start_velocity);
    let closure_defect = norm(dx).max(norm(dv));
    Ok(Some(ShotGeodesic {
        momentum: p,
        oscillations: n_osc,
        windings: q,
        delta_theta: osc.delta_theta,
        oscillation_time: osc.time,
        length,
        start: osc.start,
        start_velocity: osc.start_velocity,
        closure_defect,
        z_range: osc.z_range,
    }))
}

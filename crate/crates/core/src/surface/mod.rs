//! Chart metrics on `(θ, z)`: revolution surfaces (intrinsic, embedded,
//! Tannery) and pluggable chart fields.
//!
//! Loops and geodesics live in the universal cover of the chart, i.e. θ is
//! carried as an unreduced lift; [`Point`] is the reduced representative.

pub mod chart;
pub mod profile;

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Real, V2};
pub use chart::{brioschi_fd, ChartField, ConformalCosine};
pub use profile::{CubicSpline, Domain, Family, Jet, Profile};

/// A point of the cylinder, θ reduced to `[0, 2π)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point<T> {
    pub theta: T,
    pub z: T,
}

impl<T: Real> Point<T> {
    pub fn new(theta: T, z: T) -> Self {
        Point {
            theta: reduce_angle(theta),
            z,
        }
    }

    pub fn coords(&self) -> V2<T> {
        [self.theta, self.z]
    }
}

/// Reduces an angle into `[0, 2π)`.
pub fn reduce_angle<T: Real>(theta: T) -> T {
    let tau = T::TAU();
    let r = theta % tau;
    let r = if r < T::zero() { r + tau } else { r };
    if r >= tau {
        T::zero()
    } else {
        r
    }
}

/// Tangent vector with its base point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tangent<T> {
    pub dtheta: T,
    pub dz: T,
    pub base: Point<T>,
}

impl<T: Real> Tangent<T> {
    pub fn new(base: Point<T>, dtheta: T, dz: T) -> Self {
        Tangent { dtheta, dz, base }
    }

    pub fn components(&self) -> V2<T> {
        [self.dtheta, self.dz]
    }
}

/// Which geometry a [`Metric`] represents.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricMode {
    /// `dz² + r(z)² dθ²`.
    Intrinsic,
    /// `(1 + r′²) dz² + r² dθ²`, the induced metric of `(r cos θ, r sin θ, z)`.
    Embedded,
    /// `[α + h(cos ρ)]² dρ² + sin²ρ dθ²` with `z` playing the role of ρ.
    Tannery,
    /// Arbitrary [`ChartField`].
    Chart,
}

impl MetricMode {
    pub fn name(self) -> &'static str {
        match self {
            MetricMode::Intrinsic => "intrinsic",
            MetricMode::Embedded => "embedded",
            MetricMode::Tannery => "tannery",
            MetricMode::Chart => "chart",
        }
    }
}

/// Tannery-type metric data: `α` and the odd polynomial `h(x) = Σ c_k x^(2k+1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tannery<T> {
    alpha: T,
    odd_coeffs: Vec<T>,
}

impl<T: Real> Tannery<T> {
    /// Requires `|h(x)| < α` on `(-1, 1)`.
    pub fn new(alpha: T, odd_coeffs: &[T]) -> Result<Self> {
        let t = Tannery {
            alpha,
            odd_coeffs: odd_coeffs.to_vec(),
        };
        if !(alpha > T::zero()) {
            return Err(Error::InvalidProfile("tannery alpha must be positive".into()));
        }
        let n = 4096;
        for i in 0..=n {
            let x = lit::<T>(i as f64 / n as f64);
            if !(t.h(x).0.abs() < alpha) {
                return Err(Error::InvalidProfile(format!(
                    "tannery condition |h(cos ρ)| < α fails near x={}",
                    to_f64(x)
                )));
            }
        }
        Ok(t)
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    /// `(h(x), h′(x))`.
    fn h(&self, x: T) -> (T, T) {
        let x2 = x * x;
        let mut pow = x; // x^(2k+1)
        let mut dpow = T::one(); // x^(2k)
        let mut v = T::zero();
        let mut d = T::zero();
        for (k, &c) in self.odd_coeffs.iter().enumerate() {
            v += c * pow;
            d += c * lit::<T>((2 * k + 1) as f64) * dpow;
            pow *= x2;
            dpow *= x2;
        }
        (v, d)
    }
}

/// Warped-product data `g = a(z)² dz² + s(z)² dθ²` of a revolution metric.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Warp<T> {
    pub s: T,
    pub s1: T,
    pub s2: T,
    pub a: T,
    pub a1: T,
}

impl<T: Real> Warp<T> {
    pub fn curvature(&self) -> T {
        -(self.s2 * self.a - self.s1 * self.a1) / (self.s * self.a * self.a * self.a)
    }
}

/// Christoffel symbols `Γ[a][b][c] = Γ^a_{bc}`, index 0 = θ, 1 = z.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Christoffel<T> {
    pub gamma: [[[T; 2]; 2]; 2],
}

impl<T: Real> Christoffel<T> {
    /// `-Γ^a_{bc} v^b v^c`.
    pub fn acceleration(&self, v: V2<T>) -> V2<T> {
        let mut out = [T::zero(); 2];
        for (a, o) in out.iter_mut().enumerate() {
            let g = &self.gamma[a];
            *o = -(g[0][0] * v[0] * v[0] + lit::<T>(2.0) * g[0][1] * v[0] * v[1] + g[1][1] * v[1] * v[1]);
        }
        out
    }

    pub fn max_abs(&self) -> T {
        let mut m = T::zero();
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    m = m.max(self.gamma[a][b][c].abs());
                }
            }
        }
        m
    }
}

#[derive(Clone, Debug)]
enum Geometry<T> {
    Intrinsic(Profile<T>),
    Embedded(Profile<T>),
    Tannery(Tannery<T>),
    Chart(Arc<dyn ChartField<T>>),
}

/// Default pole-exclusion radius on planes of revolution.
pub const DEFAULT_POLE_EXCLUSION: f64 = 1e-2;

/// A Riemannian metric on the `(θ, z)` chart.
#[derive(Clone, Debug)]
pub struct Metric<T> {
    geometry: Geometry<T>,
    pole_exclusion: T,
}

impl<T: Real> Metric<T> {
    pub fn intrinsic(profile: Profile<T>) -> Self {
        Self::from_geometry(Geometry::Intrinsic(profile))
    }

    pub fn embedded(profile: Profile<T>) -> Self {
        Self::from_geometry(Geometry::Embedded(profile))
    }

    pub fn tannery(tannery: Tannery<T>) -> Self {
        Self::from_geometry(Geometry::Tannery(tannery))
    }

    pub fn chart(field: Arc<dyn ChartField<T>>) -> Self {
        Self::from_geometry(Geometry::Chart(field))
    }

    /// Revolution metric of the given mode; `Tannery`/`Chart` need their own constructors.
    pub fn revolution(profile: Profile<T>, mode: MetricMode) -> Result<Self> {
        match mode {
            MetricMode::Intrinsic => Ok(Self::intrinsic(profile)),
            MetricMode::Embedded => Ok(Self::embedded(profile)),
            _ => Err(Error::UnsupportedMode(mode.name())),
        }
    }

    fn from_geometry(geometry: Geometry<T>) -> Self {
        Metric {
            geometry,
            pole_exclusion: lit(DEFAULT_POLE_EXCLUSION),
        }
    }

    pub fn with_pole_exclusion(mut self, z_pole: T) -> Self {
        self.pole_exclusion = z_pole;
        self
    }

    pub fn mode(&self) -> MetricMode {
        match self.geometry {
            Geometry::Intrinsic(_) => MetricMode::Intrinsic,
            Geometry::Embedded(_) => MetricMode::Embedded,
            Geometry::Tannery(_) => MetricMode::Tannery,
            Geometry::Chart(_) => MetricMode::Chart,
        }
    }

    pub fn profile(&self) -> Option<&Profile<T>> {
        match &self.geometry {
            Geometry::Intrinsic(p) | Geometry::Embedded(p) => Some(p),
            _ => None,
        }
    }

    pub fn is_revolution(&self) -> bool {
        !matches!(self.geometry, Geometry::Chart(_))
    }

    /// Plane of revolution: the chart has a pole at `z = 0`.
    pub fn is_plane(&self) -> bool {
        self.profile().is_some_and(|p| p.is_plane())
    }

    pub fn pole_exclusion(&self) -> T {
        self.pole_exclusion
    }

    pub fn domain(&self) -> Domain<T> {
        match &self.geometry {
            Geometry::Intrinsic(p) | Geometry::Embedded(p) => p.domain(),
            Geometry::Tannery(_) => Domain {
                lo: T::zero(),
                hi: T::PI(),
            },
            Geometry::Chart(f) => f.domain(),
        }
    }

    /// Whether a point may carry loop nodes: inside the domain, off the chart
    /// singularities, and outside the pole disc on planes.
    pub fn check_loop_point(&self, z: T) -> Result<()> {
        let d = self.domain();
        d.check(z)?;
        if self.is_plane() && z < self.pole_exclusion {
            return Err(Error::PoleExclusion {
                z: to_f64(z),
                z_pole: to_f64(self.pole_exclusion),
            });
        }
        if self.mode() == MetricMode::Tannery && (z <= T::zero() || z >= T::PI()) {
            return Err(Error::Domain {
                z: to_f64(z),
                lo: 0.0,
                hi: PI,
            });
        }
        Ok(())
    }

    /// Warped-product data; revolution modes only.
    pub fn warp(&self, z: T) -> Result<Warp<T>> {
        self.domain().check(z)?;
        self.warp_unchecked(z)
    }

    fn warp_unchecked(&self, z: T) -> Result<Warp<T>> {
        match &self.geometry {
            Geometry::Intrinsic(p) => {
                let j = p.jet_unchecked(z);
                Ok(Warp {
                    s: j.v,
                    s1: j.d1,
                    s2: j.d2,
                    a: T::one(),
                    a1: T::zero(),
                })
            }
            Geometry::Embedded(p) => {
                let j = p.jet_unchecked(z);
                let a = (T::one() + j.d1 * j.d1).sqrt();
                Ok(Warp {
                    s: j.v,
                    s1: j.d1,
                    s2: j.d2,
                    a,
                    a1: j.d1 * j.d2 / a,
                })
            }
            Geometry::Tannery(t) => {
                let (sin, cos) = z.sin_cos();
                let (h, dh) = t.h(cos);
                Ok(Warp {
                    s: sin,
                    s1: cos,
                    s2: -sin,
                    a: t.alpha + h,
                    a1: -dh * sin,
                })
            }
            Geometry::Chart(_) => Err(Error::UnsupportedMode("chart")),
        }
    }

    /// `[g_θθ, g_θz, g_zz]` at a chart point (θ may be a lift).
    pub fn components(&self, x: V2<T>) -> Result<[T; 3]> {
        self.domain().check(x[1])?;
        let g = self.components_unchecked(x);
        debug_assert!(
            g[0] > T::zero() && g[2] > T::zero() && g[0] * g[2] - g[1] * g[1] > T::zero()
                || (self.is_plane() && x[1] == T::zero()),
            "metric not positive definite at {:?}",
            (to_f64(x[0]), to_f64(x[1]))
        );
        Ok(g)
    }

    fn components_unchecked(&self, x: V2<T>) -> [T; 3] {
        match &self.geometry {
            Geometry::Chart(f) => f.components(x[0], x[1]),
            _ => {
                let w = self.warp_unchecked(x[1]).unwrap();
                [w.s * w.s, T::zero(), w.a * w.a]
            }
        }
    }

    pub fn is_positive_definite(&self, x: V2<T>) -> bool {
        match self.components(x) {
            Ok(g) => g[0] > T::zero() && g[2] > T::zero() && g[0] * g[2] - g[1] * g[1] > T::zero(),
            Err(_) => false,
        }
    }

    pub fn inner(&self, x: V2<T>, u: V2<T>, v: V2<T>) -> Result<T> {
        let g = self.components(x)?;
        Ok(g[0] * u[0] * v[0] + g[1] * (u[0] * v[1] + u[1] * v[0]) + g[2] * u[1] * v[1])
    }

    pub fn norm_sq(&self, x: V2<T>, v: V2<T>) -> Result<T> {
        self.inner(x, v, v)
    }

    /// Index lowering: tangent vector to covector.
    pub fn lower(&self, x: V2<T>, v: V2<T>) -> Result<V2<T>> {
        let g = self.components(x)?;
        Ok([g[0] * v[0] + g[1] * v[1], g[1] * v[0] + g[2] * v[1]])
    }

    /// Index raising: covector to tangent vector.
    pub fn raise(&self, x: V2<T>, c: V2<T>) -> Result<V2<T>> {
        let g = self.components(x)?;
        let det = g[0] * g[2] - g[1] * g[1];
        Ok([(g[2] * c[0] - g[1] * c[1]) / det, (g[0] * c[1] - g[1] * c[0]) / det])
    }

    /// Gaussian curvature at a point.
    pub fn curvature_at(&self, p: Point<T>) -> Result<T> {
        self.curvature(p.coords())
    }

    pub fn curvature(&self, x: V2<T>) -> Result<T> {
        self.domain().check(x[1])?;
        match &self.geometry {
            Geometry::Chart(f) => Ok(f.curvature(x[0], x[1])),
            _ => Ok(self.warp_unchecked(x[1])?.curvature()),
        }
    }

    pub fn christoffel_at(&self, p: Point<T>) -> Result<Christoffel<T>> {
        self.christoffel(p.coords())
    }

    /// Christoffel symbols, closed form for revolution modes.
    pub fn christoffel(&self, x: V2<T>) -> Result<Christoffel<T>> {
        self.domain().check(x[1])?;
        Ok(self.christoffel_unchecked(x))
    }

    fn christoffel_unchecked(&self, x: V2<T>) -> Christoffel<T> {
        let z0 = T::zero();
        match &self.geometry {
            Geometry::Chart(f) => chart_christoffel(f.as_ref(), x),
            _ => {
                let w = self.warp_unchecked(x[1]).unwrap();
                let t_tz = w.s1 / w.s;
                let z_tt = -w.s * w.s1 / (w.a * w.a);
                let z_zz = w.a1 / w.a;
                Christoffel {
                    gamma: [[[z0, t_tz], [t_tz, z0]], [[z_tt, z0], [z0, z_zz]]],
                }
            }
        }
    }

    /// Right-hand side of the geodesic equation `ẍ = -Γ(ẋ, ẋ)`.
    #[inline]
    pub fn geodesic_acceleration(&self, x: V2<T>, v: V2<T>) -> Result<V2<T>> {
        if !self.domain().contains(x[1]) || !x[1].is_finite() {
            return Err(Error::Domain {
                z: to_f64(x[1]),
                lo: to_f64(self.domain().lo),
                hi: to_f64(self.domain().hi),
            });
        }
        match &self.geometry {
            Geometry::Chart(_) => Ok(self.christoffel_unchecked(x).acceleration(v)),
            _ => {
                let w = self.warp_unchecked(x[1]).unwrap();
                let two = lit::<T>(2.0);
                Ok([
                    -two * (w.s1 / w.s) * v[0] * v[1],
                    (w.s * w.s1 * v[0] * v[0] - w.a * w.a1 * v[1] * v[1]) / (w.a * w.a),
                ])
            }
        }
    }

    /// Length and energy of the parallel `z = z0` traversed `degree` times at
    /// constant speed.
    pub fn parallel_data(&self, z0: T, degree: i64) -> Result<ParallelData<T>> {
        let w = self.warp(z0)?;
        let length = T::TAU() * lit::<T>(degree.unsigned_abs() as f64) * w.s;
        Ok(ParallelData {
            length,
            energy: length * length,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParallelData<T> {
    pub length: T,
    pub energy: T,
}

fn chart_christoffel<T: Real>(f: &dyn ChartField<T>, x: V2<T>) -> Christoffel<T> {
    let g = f.components(x[0], x[1]);
    let (dt, dz) = f.first_derivatives(x[0], x[1]);
    let det = g[0] * g[2] - g[1] * g[1];
    let inv = [[g[2] / det, -g[1] / det], [-g[1] / det, g[0] / det]];
    // metric component and derivative as 2x2 arrays
    let gm = |a: usize, b: usize, d: &[T; 3]| match (a, b) {
        (0, 0) => d[0],
        (1, 1) => d[2],
        _ => d[1],
    };
    let dg = |k: usize, a: usize, b: usize| if k == 0 { gm(a, b, &dt) } else { gm(a, b, &dz) };
    let half = lit::<T>(0.5);
    let mut gamma = [[[T::zero(); 2]; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            for c in 0..2 {
                let mut s = T::zero();
                for d in 0..2 {
                    s += inv[a][d] * (dg(b, d, c) + dg(c, d, b) - dg(d, b, c));
                }
                gamma[a][b][c] = half * s;
            }
        }
    }
    Christoffel { gamma }
}

impl<T: Real> std::fmt::Display for Metric<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.geometry {
            Geometry::Intrinsic(p) | Geometry::Embedded(p) => {
                write!(f, "{} ({})", p.family().name(), self.mode().name())
            }
            Geometry::Tannery(t) => write!(f, "tannery (alpha={})", t.alpha),
            Geometry::Chart(c) => write!(f, "chart {c:?}"),
        }
    }
}

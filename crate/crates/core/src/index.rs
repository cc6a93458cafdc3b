//! Jacobi-field index theory along closed geodesics.
//!
//! On a surface the normal Jacobi equation along a closed geodesic of length
//! `L`, parametrized over `[0, 1]`, is the scalar Hill equation
//! `u'' + K(c(t)) L² u = 0`. Everything below works with it in the
//! coordinates `(u, w) = (u, u'/L)` and the Prüfer phase `φ = atan2(u, w)`,
//! which obeys `φ' = L (cos²φ + K sin²φ)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loop_space::{descend, geometric_distinct, BrokenLoop, DescentOutcome, DescentParams, DEFAULT_CRITICAL_TOL};
use crate::scalar::{lit, to_f64, Real};

/// Iterate cap for average-index estimates and Bott checks.
pub const DEFAULT_ITERATE_CAP: usize = 16;
/// RK4 steps per period of the Jacobi equation.
pub const STEPS_PER_PERIOD: usize = 1000;

pub type Mat2<T> = [[T; 2]; 2];

fn mat_mul<T: Real>(a: Mat2<T>, b: Mat2<T>) -> Mat2<T> {
    [
        [
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
        ],
        [
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        ],
    ]
}

fn mat_pow<T: Real>(a: Mat2<T>, k: usize) -> Mat2<T> {
    let mut out = [[T::one(), T::zero()], [T::zero(), T::one()]];
    for _ in 0..k {
        out = mat_mul(out, a);
    }
    out
}

fn mat_max_abs<T: Real>(a: Mat2<T>) -> T {
    a.iter().flatten().fold(T::zero(), |m, v| m.max(v.abs()))
}

fn critical_tol<T: Real>() -> T {
    T::tol(DEFAULT_CRITICAL_TOL, 64.0)
}

/// Normal Jacobi equation of one closed geodesic, with `K` sampled at half
/// steps over one period.
#[derive(Clone, Debug)]
pub struct JacobiEquation<T> {
    length: T,
    steps: usize,
    /// `K(i / (2·steps))` for `i = 0..=2·steps`.
    curvature: Vec<T>,
}

impl<T: Real> JacobiEquation<T> {
    /// From a curvature function of the period parameter `t ∈ [0, 1]`.
    pub fn new(length: T, steps: usize, k: impl Fn(T) -> T) -> Self {
        let steps = steps.max(1);
        let n = 2 * steps;
        let curvature = (0..=n).map(|i| k(lit::<T>(i as f64) / lit(n as f64))).collect();
        JacobiEquation {
            length,
            steps,
            curvature,
        }
    }

    /// Samples `K` along a critical broken geodesic.
    pub fn from_loop(c: &BrokenLoop<T>) -> Result<Self> {
        Self::from_loop_with_tol(c, critical_tol())
    }

    pub fn from_loop_with_tol(c: &BrokenLoop<T>, tol: T) -> Result<Self> {
        let rel = c.relative_gradient_norm()?;
        if !(rel < tol) {
            return Err(Error::NotCritical(to_f64(rel)));
        }
        let length = c.length()?;
        if !(length > T::zero()) {
            return Err(Error::Precondition("constant loop has no Jacobi equation".into()));
        }
        let j = c.len();
        let per = STEPS_PER_PERIOD.div_ceil(j);
        let m = c.metric();
        let mut curvature = Vec::with_capacity(2 * per * j + 1);
        for seg in c.segments()? {
            let samples = seg.sample(m, 2 * per)?;
            for s in &samples[..2 * per] {
                curvature.push(m.curvature(s.x)?);
            }
        }
        curvature.push(curvature[0]);
        Ok(JacobiEquation {
            length,
            steps: per * j,
            curvature,
        })
    }

    pub fn length(&self) -> T {
        self.length
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    fn h(&self) -> T {
        T::one() / lit(self.steps as f64)
    }

    fn phase_rate(&self, phi: T, k: T) -> T {
        let (s, c) = phi.sin_cos();
        self.length * (c * c + k * s * s)
    }

    /// Integrates the phase over `periods` periods; `visit(step, φ_before, φ_after)`
    /// sees every step.
    fn integrate_phase(&self, phi0: T, periods: usize, mut visit: impl FnMut(usize, T, T)) -> T {
        let h = self.h();
        let half = h * lit(0.5);
        let sixth = h / lit(6.0);
        let mut phi = phi0;
        for p in 0..periods {
            for i in 0..self.steps {
                let (k0, k1, k2) = (
                    self.curvature[2 * i],
                    self.curvature[2 * i + 1],
                    self.curvature[2 * i + 2],
                );
                let a = self.phase_rate(phi, k0);
                let b = self.phase_rate(phi + half * a, k1);
                let c = self.phase_rate(phi + half * b, k1);
                let d = self.phase_rate(phi + h * c, k2);
                let next = phi + sixth * (a + lit::<T>(2.0) * (b + c) + d);
                visit(p * self.steps + i, phi, next);
                phi = next;
            }
        }
        phi
    }

    /// Phase after `periods` periods starting from `phi0`.
    pub fn phase(&self, phi0: T, periods: usize) -> T {
        self.integrate_phase(phi0, periods, |_, _, _| {})
    }

    /// Phase slack below which a zero is attributed to the endpoint.
    fn endpoint_slack(phi_end: T) -> T {
        T::tol(1e-6, 1e4) * (T::one() + phi_end.abs())
    }

    /// Zeros in `(0, k)` of the solution with `u(0) = 0`, `u'(0) = 1`.
    pub fn conjugate_points(&self, k: usize) -> Vec<T> {
        let pi = T::PI();
        let h = self.h();
        let mut crossings = Vec::new();
        let mut next_m = 1usize;
        let end = self.integrate_phase(T::zero(), k, |i, a, b| {
            // φ' = L > 0 at multiples of π, so each is crossed once
            while lit::<T>(next_m as f64) * pi <= b {
                let target = lit::<T>(next_m as f64) * pi;
                let frac = if b > a { (target - a) / (b - a) } else { T::zero() };
                crossings.push((lit::<T>(i as f64) + frac) * h);
                next_m += 1;
            }
        });
        let limit = end - Self::endpoint_slack(end);
        let count = if limit > T::zero() {
            to_f64(limit / pi).floor() as usize
        } else {
            0
        };
        crossings.truncate(count);
        crossings
    }

    /// Morse index of the `k`-th iterate with fixed endpoints.
    pub fn index_omega(&self, k: usize) -> usize {
        self.conjugate_points(k).len()
    }

    /// `ind_Ω(c^k)` for every `k = 1..=cap` from one integration.
    pub fn index_omega_table(&self, cap: usize) -> Vec<usize> {
        let pi = T::PI();
        let mut ends = Vec::with_capacity(cap);
        let per = self.steps;
        self.integrate_phase(T::zero(), cap, |i, _, b| {
            if (i + 1) % per == 0 {
                ends.push(b);
            }
        });
        ends.into_iter()
            .map(|end| {
                let limit = end - Self::endpoint_slack(end);
                if limit > T::zero() {
                    to_f64(limit / pi).floor() as usize
                } else {
                    0
                }
            })
            .collect()
    }

    /// Fundamental matrix over one period in `(u, u'/L)` coordinates.
    pub fn monodromy(&self) -> Monodromy<T> {
        let h = self.h();
        let half = h * lit(0.5);
        let sixth = h / lit(6.0);
        let l = self.length;
        let rhs = |y: [T; 2], k: T| [l * y[1], -l * k * y[0]];
        let mut cols = [[T::one(), T::zero()], [T::zero(), T::one()]];
        for y in cols.iter_mut() {
            for i in 0..self.steps {
                let (k0, k1, k2) = (
                    self.curvature[2 * i],
                    self.curvature[2 * i + 1],
                    self.curvature[2 * i + 2],
                );
                let a = rhs(*y, k0);
                let b = rhs([y[0] + half * a[0], y[1] + half * a[1]], k1);
                let c = rhs([y[0] + half * b[0], y[1] + half * b[1]], k1);
                let d = rhs([y[0] + h * c[0], y[1] + h * c[1]], k2);
                for n in 0..2 {
                    y[n] += sixth * (a[n] + lit::<T>(2.0) * (b[n] + c[n]) + d[n]);
                }
            }
        }
        let matrix = [[cols[0][0], cols[1][0]], [cols[0][1], cols[1][1]]];
        let determinant = matrix[0][0] * matrix[1][1] - matrix[0][1] * matrix[1][0];
        let phase_advance = self.rotation(matrix);
        Monodromy {
            matrix,
            determinant,
            phase_advance,
        }
    }

    /// Mean phase advance per period (the rotation number times the period).
    ///
    /// With real eigenvalues the eigen-direction returns to its own line, so
    /// its advance is an exact multiple of π. Otherwise the monodromy fixes the
    /// advance modulo 2π and one trajectory fixes the branch.
    fn rotation(&self, p: Mat2<T>) -> T {
        let pi = T::PI();
        let two = lit::<T>(2.0);
        let tr = p[0][0] + p[1][1];
        let tol = T::tol(1e-9, 64.0) * (T::one() + mat_max_abs(p));
        if tr.abs() >= two - tol {
            let disc = (tr * tr - lit(4.0)).max(T::zero()).sqrt();
            let lambda = (tr + tr.signum() * disc) / two;
            let a = [p[0][1], lambda - p[0][0]];
            let b = [lambda - p[1][1], p[1][0]];
            let na = a[0].hypot(a[1]);
            let nb = b[0].hypot(b[1]);
            let v = if na.max(nb) <= tol {
                [T::zero(), T::one()]
            } else if na >= nb {
                a
            } else {
                b
            };
            let phi0 = v[0].atan2(v[1]);
            let adv = self.phase(phi0, 1) - phi0;
            (adv / pi).round() * pi
        } else {
            let base = (tr / two).acos();
            let alpha = if p[0][1] > T::zero() { base } else { two * pi - base };
            let adv = self.phase(T::zero(), 1);
            let n = ((adv - alpha) / (two * pi)).round();
            alpha + n * two * pi
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MonodromyKind {
    Elliptic,
    Parabolic,
    Hyperbolic,
}

/// Linearized normal return map over one period.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Monodromy<T> {
    pub matrix: Mat2<T>,
    pub determinant: T,
    /// Continuous mean Prüfer phase advance per period.
    pub phase_advance: T,
}

impl<T: Real> Monodromy<T> {
    pub fn trace(&self) -> T {
        self.matrix[0][0] + self.matrix[1][1]
    }

    pub fn power(&self, k: usize) -> Mat2<T> {
        mat_pow(self.matrix, k)
    }

    pub fn kind(&self, tol: T) -> MonodromyKind {
        let gap = self.trace().abs() - lit(2.0);
        let scale = tol * (T::one() + mat_max_abs(self.matrix));
        if gap.abs() <= scale {
            MonodromyKind::Parabolic
        } else if gap < T::zero() {
            MonodromyKind::Elliptic
        } else {
            MonodromyKind::Hyperbolic
        }
    }

    /// `dim ker(P^k − I)`, with entries below `tol·(1 + ‖P^k‖)` treated as zero.
    pub fn nullity(&self, k: usize, tol: T) -> usize {
        let pk = self.power(k);
        let scale = tol * (T::one() + mat_max_abs(pk));
        let m = [[pk[0][0] - T::one(), pk[0][1]], [pk[1][0], pk[1][1] - T::one()]];
        if mat_max_abs(m) <= scale {
            2
        } else if (pk[0][0] + pk[1][1] - lit(2.0)).abs() <= scale {
            1
        } else {
            0
        }
    }

    /// Difference `ind(c^k) − ind_Ω(c^k) ∈ {0, 1}` read off the monodromy.
    ///
    /// The periodic problem gains the extra negative direction exactly when
    /// `(tr P^k − 2) / (P^k)₀₁ < 0`.
    pub fn periodic_correction(&self, k: usize, tol: T) -> usize {
        let pk = self.power(k);
        let scale = tol * (T::one() + mat_max_abs(pk));
        let gap = pk[0][0] + pk[1][1] - lit(2.0);
        if gap.abs() <= scale {
            return 0;
        }
        let b = pk[0][1];
        if b.abs() <= scale {
            return usize::from(gap < T::zero());
        }
        usize::from(gap / b < T::zero())
    }

    /// The average index `mind = Δφ / π`.
    pub fn average_index(&self) -> T {
        self.phase_advance / T::PI()
    }
}

/// Eigenvalue counts of the discrete Hessian of the broken-loop energy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HessianSummary {
    pub dim: usize,
    pub negatives: usize,
    pub near_zeros: usize,
    pub threshold: f64,
    /// Near-zero count minus the rotation mode.
    pub nullity: usize,
    /// The lowest few eigenvalues, ascending.
    pub lowest: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    NondegenerateMinimum,
    Saddle,
    DegenerateFlat,
    DegenerateOther,
    FamilySuspected,
}

impl Classification {
    pub fn name(self) -> &'static str {
        match self {
            Classification::NondegenerateMinimum => "nondegenerate_minimum",
            Classification::Saddle => "saddle",
            Classification::DegenerateFlat => "degenerate_flat",
            Classification::DegenerateOther => "degenerate_other",
            Classification::FamilySuspected => "family_suspected",
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct IndexOptions<T> {
    pub iterate_cap: usize,
    /// Relative tolerance for `ker(P^k − I)`.
    pub nullity_tol: T,
    pub critical_tol: T,
    /// Compute the discrete Hessian and let it resolve `ind(c)`.
    pub hessian: bool,
    pub hessian_step: T,
    /// Eigenvalues within this fraction of the largest magnitude count as zero.
    pub near_zero_ratio: T,
    /// Look for a nearby continuum of critical loops when the nullity is positive.
    pub family_probe: bool,
    pub family_shift: T,
    pub probe: DescentParams<T>,
}

impl<T: Real> Default for IndexOptions<T> {
    fn default() -> Self {
        IndexOptions {
            iterate_cap: DEFAULT_ITERATE_CAP,
            nullity_tol: T::tol(1e-6, 1e3),
            critical_tol: critical_tol(),
            hessian: false,
            hessian_step: lit::<T>(1e-5).max(T::epsilon().cbrt()),
            near_zero_ratio: T::tol(1e-6, 1e3),
            family_probe: true,
            family_shift: lit(0.05),
            probe: DescentParams {
                max_iter: 200,
                ..DescentParams::default()
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterateIndex {
    pub k: usize,
    pub ind_omega: usize,
    pub bracket: (usize, usize),
    /// Periodic index resolved inside the bracket.
    pub index: usize,
    pub nullity: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonodromySummary {
    pub matrix: [[f64; 2]; 2],
    pub determinant: f64,
    pub trace: f64,
    pub phase_advance: f64,
    pub kind: MonodromyKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexReport {
    pub length: f64,
    pub iterates: Vec<IterateIndex>,
    /// Rotation-number average index.
    pub mind: f64,
    /// `ind_Ω(c^K) / K` at the iterate cap.
    pub mind_estimate: f64,
    pub monodromy: MonodromySummary,
    pub hessian: Option<HessianSummary>,
    pub classification: Classification,
}

impl IndexReport {
    pub fn ind_omega(&self) -> usize {
        self.iterates[0].ind_omega
    }

    pub fn index(&self) -> usize {
        self.iterates[0].index
    }

    pub fn nullity(&self) -> usize {
        self.iterates[0].nullity
    }

    pub fn bracket(&self) -> (usize, usize) {
        self.iterates[0].bracket
    }

    /// `ind_Ω(c^k) + 1 ≥ ind(c^k) ≥ k·mind − 1` for every tabulated `k`.
    pub fn bott_holds(&self) -> bool {
        self.iterates.iter().all(|it| {
            let lower = it.k as f64 * self.mind - 1.0;
            it.ind_omega + 1 >= it.index && it.index as f64 >= lower - 1e-9
        })
    }

    pub fn omega_monotone(&self) -> bool {
        self.iterates.windows(2).all(|w| w[0].ind_omega <= w[1].ind_omega)
    }
}

pub fn monodromy<T: Real>(c: &BrokenLoop<T>) -> Result<Monodromy<T>> {
    Ok(JacobiEquation::from_loop(c)?.monodromy())
}

pub fn conjugate_points<T: Real>(c: &BrokenLoop<T>, k: usize) -> Result<Vec<T>> {
    check_iterate(k)?;
    Ok(JacobiEquation::from_loop(c)?.conjugate_points(k))
}

pub fn index_omega<T: Real>(c: &BrokenLoop<T>, k: usize) -> Result<usize> {
    check_iterate(k)?;
    Ok(JacobiEquation::from_loop(c)?.index_omega(k))
}

/// `(ind_Ω(c^k), ind_Ω(c^k) + 1)`, which contains the periodic index.
pub fn index_bracket<T: Real>(c: &BrokenLoop<T>, k: usize) -> Result<(usize, usize)> {
    let lo = index_omega(c, k)?;
    Ok((lo, lo + 1))
}

pub fn average_index<T: Real>(c: &BrokenLoop<T>) -> Result<T> {
    Ok(monodromy(c)?.average_index())
}

pub fn nullity<T: Real>(c: &BrokenLoop<T>, k: usize) -> Result<usize> {
    check_iterate(k)?;
    Ok(monodromy(c)?.nullity(k, IndexOptions::<T>::default().nullity_tol))
}

fn check_iterate(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::Precondition("iterate count must be >= 1".into()));
    }
    Ok(())
}

/// Spectrum summary of the finite-difference Hessian in chart node coordinates.
pub fn discrete_hessian<T: Real>(c: &BrokenLoop<T>, step: T, near_zero_ratio: T) -> Result<HessianSummary> {
    let rel = c.relative_gradient_norm()?;
    if !(rel < critical_tol()) {
        return Err(Error::NotCritical(to_f64(rel)));
    }
    let h = c.hessian(step)?;
    let ev = h.eigenvalues();
    let scale = ev.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let threshold = near_zero_ratio * scale;
    let negatives = ev.iter().filter(|v| **v < -threshold).count();
    let near_zeros = ev.iter().filter(|v| v.abs() <= threshold).count();
    Ok(HessianSummary {
        dim: ev.len(),
        negatives,
        near_zeros,
        threshold: to_f64(threshold),
        nullity: near_zeros.saturating_sub(1),
        lowest: ev.iter().take(8).map(|v| to_f64(*v)).collect(),
    })
}

/// Whether loops shifted by `±shift` in z descend to distinct critical loops
/// of the same energy.
fn family_nearby<T: Real>(c: &BrokenLoop<T>, opts: &IndexOptions<T>) -> Result<bool> {
    let e = c.energy()?;
    for sign in [T::one(), -T::one()] {
        let nodes = c
            .nodes()
            .iter()
            .map(|x| [x[0], x[1] + sign * opts.family_shift])
            .collect();
        let Ok(shifted) = c.with_nodes(nodes) else { continue };
        let r = descend(&shifted, &opts.probe)?;
        if r.outcome != DescentOutcome::Converged {
            continue;
        }
        let ef = r.final_loop.energy()?;
        let same = (ef - e).abs() <= lit::<T>(1e-6) * e.abs().max(T::one());
        if same && geometric_distinct(&r.final_loop, c, opts.family_shift * lit(0.25))? {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Full index analysis of a critical loop.
pub fn analyze<T: Real>(c: &BrokenLoop<T>, opts: &IndexOptions<T>) -> Result<IndexReport> {
    let eq = JacobiEquation::from_loop_with_tol(c, opts.critical_tol)?;
    let mono = eq.monodromy();
    let cap = opts.iterate_cap.max(1);
    let omega = eq.index_omega_table(cap);
    let hessian = if opts.hessian {
        Some(discrete_hessian(c, opts.hessian_step, opts.near_zero_ratio)?)
    } else {
        None
    };
    let iterates: Vec<IterateIndex> = omega
        .iter()
        .enumerate()
        .map(|(i, &lo)| {
            let k = i + 1;
            let index = match (&hessian, k) {
                (Some(hs), 1) => hs.negatives.clamp(lo, lo + 1),
                _ => lo + mono.periodic_correction(k, opts.nullity_tol),
            };
            IterateIndex {
                k,
                ind_omega: lo,
                bracket: (lo, lo + 1),
                index,
                nullity: mono.nullity(k, opts.nullity_tol),
            }
        })
        .collect();
    let first = iterates[0];
    let classification = if first.index >= 1 {
        Classification::Saddle
    } else if first.nullity == 0 {
        Classification::NondegenerateMinimum
    } else if opts.family_probe && family_nearby(c, opts)? {
        Classification::FamilySuspected
    } else if iterates.iter().all(|it| it.ind_omega == 0) {
        Classification::DegenerateFlat
    } else {
        Classification::DegenerateOther
    };
    Ok(IndexReport {
        length: to_f64(eq.length()),
        mind: to_f64(mono.average_index()),
        mind_estimate: omega[cap - 1] as f64 / cap as f64,
        monodromy: MonodromySummary {
            matrix: [
                [to_f64(mono.matrix[0][0]), to_f64(mono.matrix[0][1])],
                [to_f64(mono.matrix[1][0]), to_f64(mono.matrix[1][1])],
            ],
            determinant: to_f64(mono.determinant),
            trace: to_f64(mono.trace()),
            phase_advance: to_f64(mono.phase_advance),
            kind: mono.kind(opts.nullity_tol),
        },
        iterates,
        hessian,
        classification,
    })
}

pub fn classify<T: Real>(c: &BrokenLoop<T>, opts: &IndexOptions<T>) -> Result<Classification> {
    Ok(analyze(c, opts)?.classification)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;
    use std::sync::Arc;

    use proptest::prelude::*;

    use super::*;
    use crate::geodesic_flow::ConnectOptions;
    use crate::surface::{Family, Metric, Profile};

    fn parallel(f: Family, z: f64, j: usize) -> BrokenLoop<f64> {
        let m = Arc::new(Metric::intrinsic(Profile::family_default(f)));
        let opts = ConnectOptions {
            segment_cap: 5.0,
            ..Default::default()
        };
        BrokenLoop::parallel(m, z, 1, j, opts).unwrap()
    }

    fn constant(k: f64, l: f64) -> JacobiEquation<f64> {
        JacobiEquation::new(l, STEPS_PER_PERIOD, |_| k)
    }

    #[test]
    fn unit_curvature_closed_forms() {
        let eq = constant(1.0, 4.0 * PI);
        let z = eq.conjugate_points(1);
        assert_eq!(z.len(), 3);
        for (t, expect) in z.iter().zip([0.25, 0.5, 0.75]) {
            assert!((t - expect).abs() < 1e-6, "{t}");
        }
        let z3 = eq.conjugate_points(3);
        assert_eq!(z3.len(), 11);
        for (m, t) in z3.iter().enumerate() {
            assert!((t - (m + 1) as f64 / 4.0).abs() < 1e-6);
        }
        let mono = eq.monodromy();
        assert!((mono.determinant - 1.0).abs() < 1e-10);
        assert_eq!(mono.nullity(1, 1e-6), 2);
        assert!((mono.average_index() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn hyperbolic_and_parabolic_branches_are_exact() {
        let cosh = constant(-1.0, 2.0 * PI).monodromy();
        assert!((cosh.trace() - 2.0 * (2.0 * PI).cosh()).abs() < 1e-6 * cosh.trace());
        assert_eq!(cosh.average_index(), 0.0);
        assert_eq!(cosh.kind(1e-6), MonodromyKind::Hyperbolic);
        let flat = constant(0.0, 2.0 * PI).monodromy();
        assert_eq!(flat.average_index(), 0.0);
        assert_eq!(flat.nullity(5, 1e-6), 1);
        assert!((flat.matrix[0][1] - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn elliptic_rotation_matches_frequency() {
        // u'' + a² u = 0 with a = 2.5π: mean advance a per period
        let a = 2.5 * PI;
        let mono = constant(1.0, a).monodromy();
        assert_eq!(mono.kind(1e-6), MonodromyKind::Elliptic);
        assert!((mono.phase_advance - a).abs() < 1e-8);
        // periodic index: m = 0, ±1 are negative
        let eq = constant(1.0, a);
        assert_eq!(eq.index_omega(1) + mono.periodic_correction(1, 1e-6), 3);
    }

    #[test]
    fn flat_parallel() {
        let c = parallel(Family::Flat, 0.0, 32);
        assert!(conjugate_points(&c, 4).unwrap().is_empty());
        assert_eq!(index_omega(&c, 5).unwrap(), 0);
        assert_eq!(index_bracket(&c, 1).unwrap(), (0, 1));
        assert_eq!(nullity(&c, 3).unwrap(), 1);
        assert_eq!(average_index(&c).unwrap(), 0.0);
        let hs = discrete_hessian(&parallel(Family::Flat, 0.0, 64), 1e-5, 1e-6).unwrap();
        assert_eq!((hs.negatives, hs.near_zeros, hs.nullity), (0, 2, 1));
    }

    #[test]
    fn cosh_waist() {
        let c = parallel(Family::CoshWaist, 0.0, 64);
        let opts = IndexOptions {
            hessian: true,
            ..Default::default()
        };
        let r = analyze(&c, &opts).unwrap();
        assert!(r
            .iterates
            .iter()
            .all(|it| it.ind_omega == 0 && it.nullity == 0 && it.index == 0));
        assert_eq!(r.mind, 0.0);
        assert_eq!(r.monodromy.kind, MonodromyKind::Hyperbolic);
        let hs = r.hessian.as_ref().unwrap();
        assert_eq!((hs.negatives, hs.near_zeros, hs.nullity), (0, 1, 0));
        assert_eq!(r.classification, Classification::NondegenerateMinimum);
        assert!(r.bott_holds());
    }

    #[test]
    fn bump_waist() {
        let c = parallel(Family::GaussianBump, 0.0, 64);
        let r = analyze(&c, &IndexOptions::default()).unwrap();
        assert_eq!(r.ind_omega(), 3);
        assert_eq!(r.iterates[2].ind_omega, 11);
        assert!((r.mind - 4.0).abs() < 0.01);
        assert!((r.mind - r.mind_estimate).abs() <= 2.0 / 16.0);
        assert_eq!(r.classification, Classification::Saddle);
        assert!(r.bott_holds() && r.omega_monotone());
        for it in &r.iterates {
            assert!(it.index >= 4 * it.k - 1);
        }
        let z = conjugate_points(&c, 1).unwrap();
        for (t, expect) in z.iter().zip([0.25, 0.5, 0.75]) {
            assert!((t - expect).abs() < 1e-5);
        }
    }

    #[test]
    fn bump_waist_hessian_count() {
        let c = parallel(Family::GaussianBump, 0.0, 128);
        let hs = discrete_hessian(&c, 1e-5, 1e-6).unwrap();
        assert_eq!(hs.negatives, 3, "{hs:?}");
    }

    #[test]
    fn inflection_parallel_is_degenerate_flat() {
        let c = parallel(Family::TanhCubedInflection, 0.0, 64);
        let r = analyze(&c, &IndexOptions::default()).unwrap();
        assert!(r.iterates.iter().all(|it| it.ind_omega == 0 && it.nullity == 1));
        assert_eq!(r.classification, Classification::DegenerateFlat);
    }

    #[test]
    fn non_critical_loop_is_rejected() {
        let c = parallel(Family::CoshWaist, 0.5, 32);
        assert!(matches!(conjugate_points(&c, 1), Err(Error::NotCritical(_))));
        assert!(matches!(index_omega(&c, 0), Err(Error::Precondition(_))));
    }

    proptest! {
        #[test]
        fn hill_equation_invariants(a in -1.5f64..2.0, b in -1.0f64..1.0, l in 1.0f64..8.0) {
            let eq = JacobiEquation::new(l, STEPS_PER_PERIOD, |t| a + b * (2.0 * PI * t).cos());
            let mono = eq.monodromy();
            // ad − bc cancels to rounding of ‖P‖² when strongly hyperbolic
            let floor = 64.0 * f64::EPSILON * mat_max_abs(mono.matrix).powi(2);
            prop_assert!((mono.determinant - 1.0).abs() < 1e-8 + floor);
            let table = eq.index_omega_table(16);
            prop_assert!(table.windows(2).all(|w| w[0] <= w[1]));
            let mind = mono.average_index();
            prop_assert!((mind - table[15] as f64 / 16.0).abs() <= 2.0 / 16.0 + 1e-9);
            for (i, lo) in table.iter().enumerate() {
                let k = i + 1;
                let ind = lo + mono.periodic_correction(k, 1e-6);
                prop_assert!(ind as f64 >= k as f64 * mind - 1.0 - 1e-9);
            }
            if a - b.abs() >= 0.0 {
                prop_assert!(mono.phase_advance >= 0.0);
            }
        }
    }
}

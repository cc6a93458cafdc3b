//! Revolution radius functions `r(z)` with two derivatives.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Real};

/// Built-in profile families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// `r = c`.
    Flat,
    /// `r = a·exp(b z)`.
    ExpMonotone,
    /// `r = a·cosh(z/a)`.
    CoshWaist,
    /// `r = base + height·exp(-(z/width)²)`.
    GaussianBump,
    /// `r = c0 - c2 z² + c4 z⁴`.
    DoubleWell,
    /// `r = a + tanh³ z`.
    TanhCubedInflection,
    /// `r = s·tanh(z/s)` on `z ≥ 0`; a plane with its pole at `z = 0`.
    PlaneTanh,
    /// Natural cubic spline through sample pairs.
    Tabulated,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Flat => "flat",
            Family::ExpMonotone => "exp-monotone",
            Family::CoshWaist => "cosh-waist",
            Family::GaussianBump => "gaussian-bump",
            Family::DoubleWell => "double-well",
            Family::TanhCubedInflection => "tanh-cubed-inflection",
            Family::PlaneTanh => "plane-tanh",
            Family::Tabulated => "tabulated",
        }
    }

    fn default_params(self) -> &'static [f64] {
        match self {
            Family::Flat => &[1.0],
            Family::ExpMonotone => &[1.0, 1.0],
            Family::CoshWaist => &[1.0],
            Family::GaussianBump => &[1.0, 1.0, 1.0],
            Family::DoubleWell => &[2.0, 1.0, 1.0],
            Family::TanhCubedInflection => &[2.0],
            Family::PlaneTanh => &[1.0],
            Family::Tabulated => &[],
        }
    }
}

/// Closed interval of admissible `z`; either end may be infinite.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Domain<T> {
    pub lo: T,
    pub hi: T,
}

impl<T: Real> Domain<T> {
    pub fn real_line() -> Self {
        Domain {
            lo: T::neg_infinity(),
            hi: T::infinity(),
        }
    }

    pub fn contains(&self, z: T) -> bool {
        z >= self.lo && z <= self.hi
    }

    pub fn check(&self, z: T) -> Result<()> {
        if self.contains(z) {
            Ok(())
        } else {
            Err(Error::Domain {
                z: to_f64(z),
                lo: to_f64(self.lo),
                hi: to_f64(self.hi),
            })
        }
    }
}

/// Value and first two derivatives of a scalar function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet<T> {
    pub v: T,
    pub d1: T,
    pub d2: T,
}

/// Natural C² cubic spline.
#[derive(Clone, Debug)]
pub struct CubicSpline<T> {
    z: Vec<T>,
    r: Vec<T>,
    m: Vec<T>,
}

impl<T: Real> CubicSpline<T> {
    pub fn natural(z: &[T], r: &[T]) -> Result<Self> {
        let n = z.len();
        if n < 3 || r.len() != n {
            return Err(Error::InvalidProfile(
                "tabulated profile needs at least 3 (z, r) pairs".into(),
            ));
        }
        if z.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidProfile(
                "tabulated z samples must be strictly increasing".into(),
            ));
        }
        // Thomas algorithm on the interior second-derivative system.
        let mut m = vec![T::zero(); n];
        let mut c_prime = vec![T::zero(); n];
        let mut d_prime = vec![T::zero(); n];
        let two = lit::<T>(2.0);
        let six = lit::<T>(6.0);
        for i in 1..n - 1 {
            let h0 = z[i] - z[i - 1];
            let h1 = z[i + 1] - z[i];
            let a = h0;
            let b = two * (h0 + h1);
            let c = h1;
            let d = six * ((r[i + 1] - r[i]) / h1 - (r[i] - r[i - 1]) / h0);
            let denom = b - a * c_prime[i - 1];
            c_prime[i] = c / denom;
            d_prime[i] = (d - a * d_prime[i - 1]) / denom;
        }
        for i in (1..n - 1).rev() {
            m[i] = d_prime[i] - c_prime[i] * m[i + 1];
        }
        let spline = CubicSpline {
            z: z.to_vec(),
            r: r.to_vec(),
            m,
        };
        spline.check_positive()?;
        Ok(spline)
    }

    pub fn domain(&self) -> Domain<T> {
        Domain {
            lo: self.z[0],
            hi: *self.z.last().unwrap(),
        }
    }

    fn interval(&self, z: T) -> usize {
        let n = self.z.len();
        match self.z.binary_search_by(|probe| probe.partial_cmp(&z).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        }
    }

    pub fn eval(&self, z: T) -> Jet<T> {
        let i = self.interval(z);
        let (z0, z1) = (self.z[i], self.z[i + 1]);
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let h = z1 - z0;
        let a = (z1 - z) / h;
        let b = (z - z0) / h;
        let six = lit::<T>(6.0);
        let three = lit::<T>(3.0);
        let v = a * self.r[i] + b * self.r[i + 1] + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / six;
        let d1 = (self.r[i + 1] - self.r[i]) / h - (three * a * a - T::one()) / six * h * m0
            + (three * b * b - T::one()) / six * h * m1;
        let d2 = a * m0 + b * m1;
        Jet { v, d1, d2 }
    }

    /// Minimum of each cubic piece is attained at an endpoint or at a root of
    /// the (quadratic) derivative; all candidates are checked.
    fn check_positive(&self) -> Result<()> {
        for i in 0..self.z.len() - 1 {
            let (z0, z1) = (self.z[i], self.z[i + 1]);
            let mut candidates = vec![z0, z1];
            // r'(z) on the piece is quadratic in z: sample three points and fit.
            let zm = (z0 + z1) / lit(2.0);
            let (f0, fm, f1) = (self.eval(z0).d1, self.eval(zm).d1, self.eval(z1).d1);
            let h = (z1 - z0) / lit(2.0);
            let qa = (f0 - lit::<T>(2.0) * fm + f1) / (lit::<T>(2.0) * h * h);
            let qb = (f1 - f0) / (lit::<T>(2.0) * h);
            let qc = fm;
            // roots in s = z - zm of qa s² + qb s + qc
            if qa.abs() > T::epsilon() {
                let disc = qb * qb - lit::<T>(4.0) * qa * qc;
                if disc >= T::zero() {
                    let sq = disc.sqrt();
                    for s in [(-qb + sq) / (lit::<T>(2.0) * qa), (-qb - sq) / (lit::<T>(2.0) * qa)] {
                        candidates.push(zm + s);
                    }
                }
            } else if qb.abs() > T::epsilon() {
                candidates.push(zm - qc / qb);
            }
            for c in candidates {
                if c >= z0 && c <= z1 && !(self.eval(c).v > T::zero()) {
                    return Err(Error::InvalidProfile(format!(
                        "tabulated interpolant is not positive near z={}",
                        to_f64(c)
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A revolution profile `r(z)`.
#[derive(Clone, Debug)]
pub struct Profile<T> {
    family: Family,
    params: Vec<T>,
    spline: Option<CubicSpline<T>>,
}

impl<T: Real> Profile<T> {
    /// Analytic family; an empty `params` slice selects the family defaults.
    pub fn new(family: Family, params: &[T]) -> Result<Self> {
        if family == Family::Tabulated {
            return Err(Error::InvalidProfile(
                "use Profile::tabulated for tabulated profiles".into(),
            ));
        }
        let defaults = family.default_params();
        let params: Vec<T> = if params.is_empty() {
            defaults.iter().map(|&x| lit(x)).collect()
        } else {
            params.to_vec()
        };
        if params.len() != defaults.len() {
            return Err(Error::InvalidProfile(format!(
                "{} takes {} parameters, got {}",
                family.name(),
                defaults.len(),
                params.len()
            )));
        }
        let profile = Profile {
            family,
            params,
            spline: None,
        };
        profile.validate()?;
        Ok(profile)
    }

    pub fn flat() -> Self {
        Self::new(Family::Flat, &[]).unwrap()
    }

    pub fn family_default(family: Family) -> Self {
        Self::new(family, &[]).expect("family defaults are valid")
    }

    pub fn tabulated(z: &[T], r: &[T]) -> Result<Self> {
        Ok(Profile {
            family: Family::Tabulated,
            params: Vec::new(),
            spline: Some(CubicSpline::natural(z, r)?),
        })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn is_plane(&self) -> bool {
        self.family == Family::PlaneTanh
    }

    pub fn domain(&self) -> Domain<T> {
        match self.family {
            Family::PlaneTanh => Domain {
                lo: T::zero(),
                hi: T::infinity(),
            },
            Family::Tabulated => self.spline.as_ref().unwrap().domain(),
            _ => Domain::real_line(),
        }
    }

    fn validate(&self) -> Result<()> {
        let p = &self.params;
        let bad = |msg: &str| Err(Error::InvalidProfile(format!("{}: {msg}", self.family.name())));
        let zero = T::zero();
        match self.family {
            Family::Flat if p[0] <= zero => bad("radius must be positive"),
            Family::ExpMonotone if p[0] <= zero => bad("amplitude must be positive"),
            Family::CoshWaist if p[0] <= zero => bad("waist radius must be positive"),
            Family::GaussianBump if p[0] <= zero || p[0] + p[1] <= zero || p[2] <= zero => {
                bad("need base > 0, base + height > 0, width > 0")
            }
            Family::DoubleWell => {
                if p[2] < zero || (p[2] == zero && p[1] > zero) {
                    return bad("quartic coefficient must keep r bounded below");
                }
                let min = if p[2] > zero && p[1] > zero {
                    p[0] - p[1] * p[1] / (lit::<T>(4.0) * p[2])
                } else {
                    p[0]
                };
                if min <= zero {
                    bad("profile is not positive")
                } else {
                    Ok(())
                }
            }
            Family::TanhCubedInflection if p[0] <= T::one() => bad("offset must exceed 1"),
            Family::PlaneTanh if p[0] <= zero => bad("scale must be positive"),
            _ => Ok(()),
        }
    }

    /// `r`, `r′`, `r″` at `z`.
    pub fn jet(&self, z: T) -> Result<Jet<T>> {
        self.domain().check(z)?;
        Ok(self.jet_unchecked(z))
    }

    pub(crate) fn jet_unchecked(&self, z: T) -> Jet<T> {
        let p = &self.params;
        let two = lit::<T>(2.0);
        match self.family {
            Family::Flat => Jet {
                v: p[0],
                d1: T::zero(),
                d2: T::zero(),
            },
            Family::ExpMonotone => {
                let e = p[0] * (p[1] * z).exp();
                Jet {
                    v: e,
                    d1: p[1] * e,
                    d2: p[1] * p[1] * e,
                }
            }
            Family::CoshWaist => {
                let a = p[0];
                let u = z / a;
                Jet {
                    v: a * u.cosh(),
                    d1: u.sinh(),
                    d2: u.cosh() / a,
                }
            }
            Family::GaussianBump => {
                let (base, height, width) = (p[0], p[1], p[2]);
                let u = z / width;
                let e = height * (-u * u).exp();
                Jet {
                    v: base + e,
                    d1: -two * u * e / width,
                    d2: (lit::<T>(4.0) * u * u - two) * e / (width * width),
                }
            }
            Family::DoubleWell => {
                let (c0, c2, c4) = (p[0], p[1], p[2]);
                let z2 = z * z;
                Jet {
                    v: c0 - c2 * z2 + c4 * z2 * z2,
                    d1: -two * c2 * z + lit::<T>(4.0) * c4 * z2 * z,
                    d2: -two * c2 + lit::<T>(12.0) * c4 * z2,
                }
            }
            Family::TanhCubedInflection => {
                let t = z.tanh();
                let s2 = T::one() - t * t;
                Jet {
                    v: p[0] + t * t * t,
                    d1: lit::<T>(3.0) * t * t * s2,
                    d2: lit::<T>(6.0) * t * s2 * (s2 - t * t),
                }
            }
            Family::PlaneTanh => {
                let s = p[0];
                let t = (z / s).tanh();
                let s2 = T::one() - t * t;
                Jet {
                    v: s * t,
                    d1: s2,
                    d2: -two * t * s2 / s,
                }
            }
            Family::Tabulated => self.spline.as_ref().unwrap().eval(z),
        }
    }

    pub fn r(&self, z: T) -> Result<T> {
        Ok(self.jet(z)?.v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FAMILIES: [Family; 7] = [
        Family::Flat,
        Family::ExpMonotone,
        Family::CoshWaist,
        Family::GaussianBump,
        Family::DoubleWell,
        Family::TanhCubedInflection,
        Family::PlaneTanh,
    ];

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        for family in FAMILIES {
            let p = Profile::<f64>::family_default(family);
            for k in 0..60 {
                let z = if p.is_plane() {
                    0.05 + 0.07 * k as f64
                } else {
                    -3.0 + 0.1 * k as f64
                };
                let h = 1e-5;
                let jp = p.jet(z + h).unwrap();
                let jm = p.jet(z - h).unwrap();
                let j = p.jet(z).unwrap();
                let d1 = (jp.v - jm.v) / (2.0 * h);
                let d2 = (jp.d1 - jm.d1) / (2.0 * h);
                assert!((d1 - j.d1).abs() < 1e-6 * (1.0 + j.d1.abs()), "{family:?} r' at {z}");
                assert!((d2 - j.d2).abs() < 1e-6 * (1.0 + j.d2.abs()), "{family:?} r'' at {z}");
                assert!(j.v > 0.0);
            }
        }
    }

    #[test]
    fn plane_has_pole_at_origin() {
        let p = Profile::<f64>::family_default(Family::PlaneTanh);
        assert_eq!(p.r(0.0).unwrap(), 0.0);
        assert!(p.r(-0.1).is_err());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(Profile::<f64>::new(Family::Flat, &[-1.0]).is_err());
        assert!(Profile::<f64>::new(Family::DoubleWell, &[0.2, 1.0, 1.0]).is_err());
        assert!(Profile::<f64>::new(Family::TanhCubedInflection, &[0.5]).is_err());
        assert!(Profile::<f64>::new(Family::GaussianBump, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn spline_reproduces_samples_and_is_c2() {
        let z: Vec<f64> = (0..21).map(|i| -2.0 + 0.2 * i as f64).collect();
        let r: Vec<f64> = z.iter().map(|z| 1.0 + (-z * z).exp()).collect();
        let p = Profile::tabulated(&z, &r).unwrap();
        for (zi, ri) in z.iter().zip(&r) {
            assert!((p.r(*zi).unwrap() - ri).abs() < 1e-12);
        }
        // continuity of r'' across an interior knot
        let a = p.jet(0.4 - 1e-9).unwrap();
        let b = p.jet(0.4 + 1e-9).unwrap();
        assert!((a.d2 - b.d2).abs() < 1e-6);
        assert!((a.d1 - b.d1).abs() < 1e-6);
        assert!(p.jet(2.5).is_err());
        let mid = p.jet(0.1).unwrap();
        assert!((mid.v - (1.0 + (-0.01f64).exp())).abs() < 1e-3);
    }

    #[test]
    fn spline_rejects_nonpositive_interpolant() {
        let z = [0.0, 1.0, 2.0, 3.0];
        let r = [1.0, 0.01, 0.01, 1.0];
        assert!(Profile::tabulated(&z, &r).is_err());
        assert!(Profile::tabulated(&[0.0, 0.0, 1.0], &[1.0, 1.0, 1.0]).is_err());
    }
}

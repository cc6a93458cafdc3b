//! Generic chart metrics on `(θ, z)` and coordinate-free curvature formulas.

use std::fmt::Debug;

use crate::scalar::{lit, Real};
use crate::surface::profile::{Domain, Profile};

/// A user-supplied metric `g_θθ dθ² + 2 g_θz dθ dz + g_zz dz²` on the chart.
///
/// Implementations must be 2π-periodic in θ. Derivatives default to central
/// differences; override them when closed forms are available.
pub trait ChartField<T: Real>: Send + Sync + Debug {
    /// `[g_θθ, g_θz, g_zz]`.
    fn components(&self, theta: T, z: T) -> [T; 3];

    fn domain(&self) -> Domain<T> {
        Domain::real_line()
    }

    /// `(∂_θ g, ∂_z g)`, each in the component order of [`components`](Self::components).
    fn first_derivatives(&self, theta: T, z: T) -> ([T; 3], [T; 3]) {
        let h = fd_step::<T>(3.0);
        let two_h = h + h;
        let gp = self.components(theta + h, z);
        let gm = self.components(theta - h, z);
        let gzp = self.components(theta, z + h);
        let gzm = self.components(theta, z - h);
        let mut dt = [T::zero(); 3];
        let mut dz = [T::zero(); 3];
        for k in 0..3 {
            dt[k] = (gp[k] - gm[k]) / two_h;
            dz[k] = (gzp[k] - gzm[k]) / two_h;
        }
        (dt, dz)
    }

    /// Gaussian curvature via the Brioschi formula.
    fn curvature(&self, theta: T, z: T) -> T {
        brioschi_fd(|t, z| self.components(t, z), theta, z)
    }
}

fn fd_step<T: Real>(root: f64) -> T {
    // ε^(1/root) balances truncation against rounding for the stencils below.
    T::epsilon().powf(lit(1.0 / root)) * lit(4.0)
}

/// Brioschi formula with all metric derivatives taken by central differences.
///
/// Coordinates are `(u, v) = (θ, z)`, `E = g_θθ`, `F = g_θz`, `G = g_zz`.
pub fn brioschi_fd<T: Real>(g: impl Fn(T, T) -> [T; 3], u: T, v: T) -> T {
    let h = fd_step::<T>(4.0);
    let half = lit::<T>(0.5);
    let c = g(u, v);
    let (e, f, gg) = (c[0], c[1], c[2]);
    let d = |du: T, dv: T| g(u + du, v + dv);
    let up = d(h, T::zero());
    let um = d(-h, T::zero());
    let vp = d(T::zero(), h);
    let vm = d(T::zero(), -h);
    let pp = d(h, h);
    let pm = d(h, -h);
    let mp = d(-h, h);
    let mm = d(-h, -h);
    let two_h = h + h;
    let hh = h * h;
    let du = |k: usize| (up[k] - um[k]) / two_h;
    let dv = |k: usize| (vp[k] - vm[k]) / two_h;
    let duu = |k: usize| (up[k] - lit::<T>(2.0) * c[k] + um[k]) / hh;
    let dvv = |k: usize| (vp[k] - lit::<T>(2.0) * c[k] + vm[k]) / hh;
    let duv = |k: usize| (pp[k] - pm[k] - mp[k] + mm[k]) / (lit::<T>(4.0) * hh);

    let (e_u, e_v, e_vv) = (du(0), dv(0), dvv(0));
    let (f_u, f_v, f_uv) = (du(1), dv(1), duv(1));
    let (g_u, g_v, g_uu) = (du(2), dv(2), duu(2));

    let det3 = |m: [[T; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let a = det3([
        [-half * e_vv + f_uv - half * g_uu, half * e_u, f_u - half * e_v],
        [f_v - half * g_u, e, f],
        [half * g_v, f, gg],
    ]);
    let b = det3([
        [T::zero(), half * e_v, half * g_u],
        [half * e_v, e, f],
        [half * g_u, f, gg],
    ]);
    let w = e * gg - f * f;
    (a - b) / (w * w)
}

/// Conformal deformation `exp(2φ)(r(z)² dθ² + dz²)` with
/// `φ = amplitude · cos θ · exp(-decay · z²)`; breaks the rotational symmetry.
#[derive(Clone, Debug)]
pub struct ConformalCosine<T> {
    pub profile: Profile<T>,
    pub amplitude: T,
    pub decay: T,
}

impl<T: Real> ConformalCosine<T> {
    fn phi(&self, theta: T, z: T) -> T {
        self.amplitude * theta.cos() * (-self.decay * z * z).exp()
    }
}

impl<T: Real> ChartField<T> for ConformalCosine<T> {
    fn components(&self, theta: T, z: T) -> [T; 3] {
        let w = (lit::<T>(2.0) * self.phi(theta, z)).exp();
        let r = self.profile.jet_unchecked(z).v;
        [w * r * r, T::zero(), w]
    }

    fn domain(&self) -> Domain<T> {
        self.profile.domain()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::profile::Family;

    #[test]
    fn brioschi_on_round_sphere_chart() {
        // dz² + sin²z dθ² has K = 1.
        let k = brioschi_fd(|_t: f64, z: f64| [z.sin().powi(2), 0.0, 1.0], 0.3, 1.1);
        assert!((k - 1.0).abs() < 1e-5, "{k}");
    }

    #[test]
    fn conformal_flat_curvature_matches_laplacian() {
        // On the flat cylinder, K = -exp(-2φ) Δφ for the conformal factor.
        let f = ConformalCosine {
            profile: Profile::<f64>::new(Family::Flat, &[1.0]).unwrap(),
            amplitude: 0.2,
            decay: 0.5,
        };
        let (t, z) = (0.7, 0.4);
        let phi = |t: f64, z: f64| 0.2 * t.cos() * (-0.5 * z * z).exp();
        let h = 1e-4;
        let lap = (phi(t + h, z) + phi(t - h, z) + phi(t, z + h) + phi(t, z - h) - 4.0 * phi(t, z)) / (h * h);
        let expect = -(-2.0 * phi(t, z)).exp() * lap;
        let k = f.curvature(t, z);
        assert!((k - expect).abs() < 1e-4, "{k} vs {expect}");
    }
}

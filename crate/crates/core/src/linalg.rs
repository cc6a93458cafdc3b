//! Small dense symmetric linear algebra: Householder tridiagonalization,
//! Sturm-sequence eigenvalues and Cholesky solves.

use crate::scalar::{lit, Real};

/// Dense symmetric matrix, full row-major storage.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Real> SymMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        SymMatrix {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    /// Sets both `(i, j)` and `(j, i)`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    /// Replaces the matrix by `(A + Aᵀ)/2`.
    pub fn symmetrize(&mut self) {
        let half = lit::<T>(0.5);
        for i in 0..self.n {
            for j in 0..i {
                let v = half * (self.get(i, j) + self.get(j, i));
                self.set(i, j, v);
            }
        }
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.data[i * n + j] = f(i, j);
            }
        }
        m
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) * x[j]).sum())
            .collect()
    }

    /// `A·A + shift·I`.
    pub fn square_shifted(&self, shift: T) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let mut s: T = (0..n).map(|k| self.get(i, k) * self.get(k, j)).sum();
                if i == j {
                    s += shift;
                }
                out.set(i, j, s);
            }
        }
        out
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Reduces to tridiagonal form `(diagonal, off-diagonal)` by Householder
    /// reflections; the spectrum is preserved.
    pub fn tridiagonalize(&self) -> (Vec<T>, Vec<T>) {
        let n = self.n;
        let mut a = self.data.clone();
        let idx = |i: usize, j: usize| i * n + j;
        let mut off = Vec::with_capacity(n.saturating_sub(1));
        for k in 0..n.saturating_sub(2) {
            let alpha_sq: T = ((k + 1)..n).map(|i| a[idx(i, k)] * a[idx(i, k)]).sum();
            let norm = alpha_sq.sqrt();
            if norm == T::zero() {
                off.push(T::zero());
                continue;
            }
            let x0 = a[idx(k + 1, k)];
            let alpha = if x0 > T::zero() { -norm } else { norm };
            let mut v = vec![T::zero(); n];
            v[k + 1] = x0 - alpha;
            for i in (k + 2)..n {
                v[i] = a[idx(i, k)];
            }
            let vnorm_sq: T = v.iter().map(|x| *x * *x).sum();
            if vnorm_sq == T::zero() {
                off.push(x0);
                continue;
            }
            let beta = lit::<T>(2.0) / vnorm_sq;
            // p = β A v, w = p - (β/2)(vᵀp) v, A ← A - v wᵀ - w vᵀ
            let mut p = vec![T::zero(); n];
            for i in k..n {
                let mut s = T::zero();
                for j in (k + 1)..n {
                    s += a[idx(i, j)] * v[j];
                }
                p[i] = beta * s;
            }
            let vp: T = ((k + 1)..n).map(|i| v[i] * p[i]).sum();
            let c = beta * lit::<T>(0.5) * vp;
            let w: Vec<T> = (0..n).map(|i| p[i] - c * v[i]).collect();
            for i in k..n {
                for j in k..n {
                    a[idx(i, j)] -= v[i] * w[j] + w[i] * v[j];
                }
            }
            off.push(alpha);
        }
        if n >= 2 {
            off.push(a[idx(n - 1, n - 2)]);
        }
        let diag = (0..n).map(|i| a[idx(i, i)]).collect();
        (diag, off)
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<T> {
        let (d, e) = self.tridiagonalize();
        tridiagonal_eigenvalues(&d, &e)
    }

    /// Solves `A x = b` for symmetric positive definite `A`.
    pub fn cholesky_solve(&self, b: &[T]) -> Option<Vec<T>> {
        let n = self.n;
        let mut l = vec![T::zero(); n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if !(s > T::zero()) {
                        return None;
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                let t = l[i * n + k] * y[k];
                y[i] -= t;
            }
            y[i] /= l[i * n + i];
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                let t = l[k * n + i] * y[k];
                y[i] -= t;
            }
            y[i] /= l[i * n + i];
        }
        Some(y)
    }
}

/// Number of eigenvalues strictly below `x` of the tridiagonal matrix
/// with diagonal `d` and off-diagonal `e`.
pub fn sturm_count<T: Real>(d: &[T], e: &[T], x: T) -> usize {
    let tiny = T::min_positive_value().sqrt();
    let mut count = 0;
    let mut q = T::one();
    for i in 0..d.len() {
        let e2 = if i == 0 { T::zero() } else { e[i - 1] * e[i - 1] };
        q = if i == 0 { d[0] - x } else { d[i] - x - e2 / q };
        if q == T::zero() {
            q = -tiny;
        }
        if q < T::zero() {
            count += 1;
        }
    }
    count
}

pub fn tridiagonal_eigenvalues<T: Real>(d: &[T], e: &[T]) -> Vec<T> {
    let n = d.len();
    if n == 0 {
        return Vec::new();
    }
    // Gershgorin bounds
    let mut lo = T::infinity();
    let mut hi = T::neg_infinity();
    for i in 0..n {
        let r = if i > 0 { e[i - 1].abs() } else { T::zero() } + if i + 1 < n { e[i].abs() } else { T::zero() };
        lo = lo.min(d[i] - r);
        hi = hi.max(d[i] + r);
    }
    let pad = (hi - lo).abs().max(T::one()) * T::epsilon() * lit(4.0);
    lo -= pad;
    hi += pad;
    (0..n)
        .map(|k| {
            // k-th smallest: count(x) > k
            let (mut a, mut b) = (lo, hi);
            for _ in 0..200 {
                let mid = (a + b) * lit(0.5);
                if mid <= a || mid >= b {
                    break;
                }
                if sturm_count(d, e, mid) > k {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            (a + b) * lit(0.5)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn known_spectrum() {
        // path-graph Laplacian: eigenvalues 2 - 2cos(kπ/(n+1))
        let n = 12;
        let a = SymMatrix::from_fn(n, |i, j| {
            if i == j {
                2.0
            } else if i.abs_diff(j) == 1 {
                -1.0
            } else {
                0.0
            }
        });
        let ev = a.eigenvalues();
        for (k, l) in ev.iter().enumerate() {
            let expect = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!((l - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn cholesky_solves_spd_and_rejects_indefinite() {
        let a = SymMatrix::<f64>::from_fn(3, |i, j| if i == j { 4.0 } else { 1.0 });
        let x = a.cholesky_solve(&[1.0, 2.0, 3.0]).unwrap();
        let b = a.mul_vec(&x);
        assert!((b[0] - 1.0).abs() < 1e-14 && (b[2] - 3.0).abs() < 1e-14);
        let bad = SymMatrix::from_fn(2, |i, j| if i == j { 1.0 } else { 2.0 });
        assert!(bad.cholesky_solve(&[1.0, 1.0]).is_none());
    }

    proptest! {
        #[test]
        fn trace_and_frobenius_preserved(vals in proptest::collection::vec(-3.0f64..3.0, 36)) {
            let a = SymMatrix::from_fn(6, |i, j| vals[i.min(j) * 6 + i.max(j)]);
            let ev = a.eigenvalues();
            let tr: f64 = (0..6).map(|i| a.get(i, i)).sum();
            let fro: f64 = (0..6).flat_map(|i| (0..6).map(move |j| (i, j))).map(|(i, j)| a.get(i, j).powi(2)).sum();
            prop_assert!((ev.iter().sum::<f64>() - tr).abs() < 1e-9);
            prop_assert!((ev.iter().map(|x| x * x).sum::<f64>() - fro).abs() < 1e-8);
            prop_assert!(ev.windows(2).all(|w| w[0] <= w[1]));
        }
    }
}

use serde::{Deserialize, Serialize};

use super::BrokenLoop;
use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::scalar::{lit, to_f64, Real, V2};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepRule {
    /// Metric steepest descent, every trial starting at `1/(2j)`.
    Steepest,
    /// Limited-memory BFGS preconditioned by the node metric.
    Lbfgs { memory: usize },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DescentParams<T> {
    /// Threshold on the relative gradient norm `|∇E| / E`.
    pub tol: T,
    pub max_iter: usize,
    pub escape_z: T,
    pub step_rule: StepRule,
    pub armijo_c: T,
    pub shrink: T,
    pub max_backtracks: usize,
    /// Cap on the chart displacement of any node in one step.
    pub max_node_step: T,
    /// Relative energy resolution; decreases below it only need `E' ≤ E`.
    pub noise: T,
    /// Loops whose energy fell by this factor are reported collapsed (degree 0)
    /// or escaped into a cusp (nonzero degree).
    pub collapse_ratio: T,
    /// Double `j` once and retry when a step cannot be connected.
    pub refine_on_failure: bool,
}

impl<T: Real> Default for DescentParams<T> {
    fn default() -> Self {
        DescentParams {
            tol: T::tol(1e-8, 64.0),
            max_iter: 4000,
            escape_z: lit(50.0),
            step_rule: StepRule::Lbfgs { memory: 8 },
            armijo_c: lit(1e-4),
            shrink: lit(0.5),
            max_backtracks: 40,
            max_node_step: lit(0.25),
            noise: T::tol(1e-13, 64.0),
            collapse_ratio: lit(1e-14),
            refine_on_failure: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DescentOutcome {
    Converged,
    Escaped,
    MaxIter,
    ConnectionFailure,
    /// A contractible loop shrank to a point.
    Collapsed,
    /// No admissible step lowers the energy although the gradient test fails.
    Stalled,
}

impl DescentOutcome {
    pub fn name(self) -> &'static str {
        match self {
            DescentOutcome::Converged => "converged",
            DescentOutcome::Escaped => "escaped",
            DescentOutcome::MaxIter => "max_iter",
            DescentOutcome::ConnectionFailure => "connection_failure",
            DescentOutcome::Collapsed => "collapsed",
            DescentOutcome::Stalled => "stalled",
        }
    }
}

#[derive(Clone, Debug)]
pub struct DescentResult<T: Real> {
    pub outcome: DescentOutcome,
    pub final_loop: BrokenLoop<T>,
    pub iterations: usize,
    /// Relative gradient norm of `final_loop`.
    pub gradient_norm: T,
    pub energy_trace: Vec<T>,
    pub diagnostic: Option<String>,
}

fn flatten<T: Real>(nodes: &[V2<T>]) -> Vec<T> {
    nodes.iter().flat_map(|x| [x[0], x[1]]).collect()
}

fn unflatten<T: Real>(x: &[T]) -> Vec<V2<T>> {
    x.chunks_exact(2).map(|c| [c[0], c[1]]).collect()
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}

fn raise<T: Real>(l: &BrokenLoop<T>, c: &[T]) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(c.len());
    for (x, ci) in l.nodes().iter().zip(c.chunks_exact(2)) {
        out.extend_from_slice(&l.metric().raise(*x, [ci[0], ci[1]])?);
    }
    Ok(out)
}

fn escaped<T: Real>(l: &BrokenLoop<T>, escape_z: T) -> bool {
    l.nodes().iter().any(|x| x[1].abs() > escape_z)
}

/// Largest step factor keeping every node move within `cap`.
fn clamp_factor<T: Real>(d: &[T], cap: T) -> T {
    let m = d.chunks_exact(2).fold(T::zero(), |m, c| m.max(c[0].hypot(c[1])));
    if m > cap {
        cap / m
    } else {
        T::infinity()
    }
}

struct Memory<T> {
    s: Vec<Vec<T>>,
    y: Vec<Vec<T>>,
    cap: usize,
}

impl<T: Real> Memory<T> {
    fn new(cap: usize) -> Self {
        Memory {
            s: Vec::new(),
            y: Vec::new(),
            cap,
        }
    }

    fn clear(&mut self) {
        self.s.clear();
        self.y.clear();
    }

    fn push(&mut self, s: Vec<T>, y: Vec<T>) {
        if self.cap == 0 || !(dot(&s, &y) > T::zero()) {
            return;
        }
        if self.s.len() == self.cap {
            self.s.remove(0);
            self.y.remove(0);
        }
        self.s.push(s);
        self.y.push(y);
    }

    /// Two-loop recursion; `h0` applies the initial inverse Hessian.
    fn direction(&self, c: &[T], h0: impl Fn(&[T]) -> Result<Vec<T>>) -> Result<Vec<T>> {
        let k = self.s.len();
        let mut q = c.to_vec();
        let mut alpha = vec![T::zero(); k];
        for i in (0..k).rev() {
            let rho = T::one() / dot(&self.y[i], &self.s[i]);
            alpha[i] = rho * dot(&self.s[i], &q);
            for (qq, yy) in q.iter_mut().zip(&self.y[i]) {
                *qq -= alpha[i] * *yy;
            }
        }
        let mut r = h0(&q)?;
        if let (Some(s), Some(y)) = (self.s.last(), self.y.last()) {
            let hy = h0(y)?;
            let gamma = dot(s, y) / dot(y, &hy);
            r.iter_mut().for_each(|v| *v *= gamma);
        }
        for i in 0..k {
            let rho = T::one() / dot(&self.y[i], &self.s[i]);
            let beta = rho * dot(&self.y[i], &r);
            for (rr, ss) in r.iter_mut().zip(&self.s[i]) {
                *rr += (alpha[i] - beta) * *ss;
            }
        }
        Ok(r.into_iter().map(|v| -v).collect())
    }
}

enum Search<T: Real> {
    Accepted(BrokenLoop<T>, T),
    /// Every trial was feasible but none lowered the energy.
    NoDecrease,
    Infeasible(Error),
}

fn line_search<T: Real>(l: &BrokenLoop<T>, e: T, c: &[T], d: &[T], alpha0: T, p: &DescentParams<T>) -> Search<T> {
    let slope = dot(c, d);
    let x = flatten(l.nodes());
    let noise = p.noise * e.abs();
    let mut alpha = alpha0.min(clamp_factor(d, p.max_node_step));
    let mut last_err = None;
    let mut any_feasible = false;
    for _ in 0..=p.max_backtracks {
        let trial: Vec<T> = x.iter().zip(d).map(|(xi, di)| *xi + alpha * *di).collect();
        match l.with_nodes(unflatten(&trial)) {
            Ok(nl) => {
                any_feasible = true;
                let en = nl.energy;
                let predicted = p.armijo_c * alpha * slope;
                if en <= e && (en - e <= predicted || -predicted <= noise) {
                    return Search::Accepted(nl, alpha);
                }
            }
            Err(err) => last_err = Some(err),
        }
        alpha *= p.shrink;
    }
    match (any_feasible, last_err) {
        (false, Some(err)) => Search::Infeasible(err),
        (true, _) => Search::NoDecrease,
        (false, None) => Search::NoDecrease,
    }
}

/// Negative-gradient descent of the broken-loop energy.
///
/// The energy trace never increases and the degree is fixed. Outcomes other
/// than `Converged` are ordinary results, not errors.
pub fn descend<T: Real>(start: &BrokenLoop<T>, params: &DescentParams<T>) -> Result<DescentResult<T>> {
    let mut l = if start.is_connected() {
        start.clone()
    } else {
        start.reconnect()?
    };
    let e0 = l.energy()?;
    let mut trace = vec![e0];
    let mut refined = false;
    let memory = match params.step_rule {
        StepRule::Lbfgs { memory } => memory,
        StepRule::Steepest => 0,
    };
    let mut mem = Memory::new(memory);
    let mut c = l.covector()?;
    let finish = |outcome, l: BrokenLoop<T>, it, trace, diag: Option<String>| -> Result<DescentResult<T>> {
        let g = l.relative_gradient_norm()?;
        Ok(DescentResult {
            outcome,
            final_loop: l,
            iterations: it,
            gradient_norm: g,
            energy_trace: trace,
            diagnostic: diag,
        })
    };
    for it in 0..params.max_iter {
        let e = l.energy()?;
        if l.relative_gradient_norm()? < params.tol {
            return finish(DescentOutcome::Converged, l, it, trace, None);
        }
        if e <= params.collapse_ratio * e0 {
            if l.degree() == 0 {
                return finish(DescentOutcome::Collapsed, l, it, trace, None);
            }
            let msg = format!(
                "energy fell below {:e} of its start value",
                to_f64(params.collapse_ratio)
            );
            return finish(DescentOutcome::Escaped, l, it, trace, Some(msg));
        }
        let j = lit::<T>(l.len() as f64);
        let steepest_step = T::one() / (j + j);
        let mut d = mem.direction(&c, |v| raise(&l, v))?;
        let mut alpha0 = if mem.s.is_empty() { steepest_step } else { T::one() };
        if !(dot(&c, &d) < T::zero()) {
            mem.clear();
            d = mem.direction(&c, |v| raise(&l, v))?;
            alpha0 = steepest_step;
        }
        let mut outcome = line_search(&l, e, &c, &d, alpha0, params);
        if !matches!(outcome, Search::Accepted(..)) && !mem.s.is_empty() {
            mem.clear();
            d = mem.direction(&c, |v| raise(&l, v))?;
            outcome = line_search(&l, e, &c, &d, steepest_step, params);
        }
        match outcome {
            Search::Accepted(nl, _) => {
                let nc = nl.covector()?;
                let s: Vec<T> = flatten(nl.nodes())
                    .iter()
                    .zip(flatten(l.nodes()))
                    .map(|(a, b)| *a - b)
                    .collect();
                let y: Vec<T> = nc.iter().zip(&c).map(|(a, b)| *a - *b).collect();
                mem.push(s, y);
                c = nc;
                l = nl;
                trace.push(l.energy()?);
                if escaped(&l, params.escape_z) {
                    return finish(DescentOutcome::Escaped, l, it + 1, trace, None);
                }
            }
            Search::NoDecrease => {
                // energy is at rounding resolution; finish on the gradient norm
                let g = l.relative_gradient_norm()?;
                if g < lit::<T>(100.0) * params.tol {
                    let e0 = l.energy()?;
                    let p = refine_critical(&l, params, 20)?;
                    let e1 = p.final_loop.energy()?;
                    if p.outcome == DescentOutcome::Converged && e1 <= e0 + T::tol(lit(1e-12), lit(64.0)) * e0.abs() {
                        // a rise within rounding is not recorded, keeping the trace monotone
                        if e1 < e0 {
                            trace.push(e1);
                        }
                        return finish(DescentOutcome::Converged, p.final_loop, it + p.iterations, trace, None);
                    }
                }
                let msg = format!(
                    "no energy decrease at relative gradient {:e}",
                    to_f64(l.relative_gradient_norm()?)
                );
                return finish(DescentOutcome::Stalled, l, it, trace, Some(msg));
            }
            Search::Infeasible(err) => match err {
                Error::PoleExclusion { .. } | Error::Domain { .. } => {
                    return finish(DescentOutcome::Escaped, l, it, trace, Some(err.to_string()));
                }
                _ if params.refine_on_failure && !refined => {
                    refined = true;
                    match l.resample(2 * l.len()) {
                        Ok(nl) => {
                            l = nl;
                            c = l.covector()?;
                            mem.clear();
                            trace.push(l.energy()?);
                        }
                        Err(e2) => {
                            return finish(DescentOutcome::ConnectionFailure, l, it, trace, Some(e2.to_string()));
                        }
                    }
                }
                _ => {
                    return finish(DescentOutcome::ConnectionFailure, l, it, trace, Some(err.to_string()));
                }
            },
        }
    }
    let outcome = if l.relative_gradient_norm()? < params.tol {
        DescentOutcome::Converged
    } else {
        DescentOutcome::MaxIter
    };
    let it = params.max_iter;
    finish(outcome, l, it, trace, None)
}

/// Drives a loop to a critical point of any index by damped Gauss-Newton on
/// the squared gradient, `(H² + μI) δ = −H c`, with an Armijo test on `|c|²`.
///
/// The energy trace of the result is not monotone.
pub fn refine_critical<T: Real>(
    start: &BrokenLoop<T>,
    params: &DescentParams<T>,
    budget: usize,
) -> Result<DescentResult<T>> {
    let mut l = if start.is_connected() {
        start.clone()
    } else {
        start.reconnect()?
    };
    let mut trace = vec![l.energy()?];
    let fd_step = lit::<T>(1e-5);
    let mut mu = T::zero();
    let mut c = l.covector()?;
    let mut phi = dot(&c, &c);
    let finish = |outcome, l: BrokenLoop<T>, it, trace, diag: Option<String>| -> Result<DescentResult<T>> {
        let g = l.relative_gradient_norm()?;
        Ok(DescentResult {
            outcome,
            final_loop: l,
            iterations: it,
            gradient_norm: g,
            energy_trace: trace,
            diagnostic: diag,
        })
    };
    for it in 0..budget {
        if l.relative_gradient_norm()? < params.tol {
            return finish(DescentOutcome::Converged, l, it, trace, None);
        }
        let h = match l.hessian(fd_step) {
            Ok(h) => h,
            Err(e) => return finish(DescentOutcome::ConnectionFailure, l, it, trace, Some(e.to_string())),
        };
        let hc = h.mul_vec(&c);
        let scale = h.max_abs();
        if mu == T::zero() {
            mu = lit::<T>(1e-8) * scale * scale;
        }
        let x = flatten(l.nodes());
        let mut accepted = None;
        let mut last_err = None;
        for _ in 0..40 {
            let a: SymMatrix<T> = h.square_shifted(mu);
            let rhs: Vec<T> = hc.iter().map(|v| -*v).collect();
            let Some(mut delta) = a.cholesky_solve(&rhs) else {
                mu = mu * lit(4.0) + T::epsilon() * scale * scale;
                continue;
            };
            let f = clamp_factor(&delta, params.max_node_step);
            if f < T::one() {
                delta.iter_mut().for_each(|v| *v *= f);
            }
            let trial: Vec<T> = x.iter().zip(&delta).map(|(a, b)| *a + *b).collect();
            match l.with_nodes(unflatten(&trial)) {
                Ok(nl) => {
                    let nc = nl.covector()?;
                    let nphi = dot(&nc, &nc);
                    let predicted = lit::<T>(2.0) * params.armijo_c * dot(&hc, &delta);
                    if nphi <= phi + predicted.min(T::zero()) || (nphi < phi && -predicted <= T::epsilon() * phi) {
                        accepted = Some((nl, nc, nphi));
                        break;
                    }
                }
                Err(e) => last_err = Some(e),
            }
            mu *= lit(4.0);
        }
        match accepted {
            Some((nl, nc, nphi)) => {
                l = nl;
                c = nc;
                phi = nphi;
                mu = (mu / lit(9.0)).max(T::epsilon() * scale * scale);
                trace.push(l.energy()?);
                if escaped(&l, params.escape_z) {
                    return finish(DescentOutcome::Escaped, l, it + 1, trace, None);
                }
            }
            None => {
                let outcome = if last_err.is_some() {
                    DescentOutcome::ConnectionFailure
                } else {
                    DescentOutcome::Stalled
                };
                return finish(outcome, l, it, trace, last_err.map(|e| e.to_string()));
            }
        }
    }
    let outcome = if l.relative_gradient_norm()? < params.tol {
        DescentOutcome::Converged
    } else {
        DescentOutcome::MaxIter
    };
    finish(outcome, l, budget, trace, None)
}

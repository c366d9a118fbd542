//! Feasible-start logarithmic-barrier maximizer for smooth convex subproblems.
//!
//! Maximizes `f(x)` subject to `g_j(x) <= 0` from a strictly feasible start by
//! ascending `phi_t(x) = t f(x) + sum_j ln(-g_j(x))` for an increasing barrier
//! weight `t`. The inner ascent is L-BFGS-preconditioned gradient ascent with
//! Armijo backtracking; iterates never leave the strict interior because the
//! line search rejects any point where a constraint is nonnegative or a
//! callback returns a non-finite value.
//!
//! Complex decision variables enter as interleaved real/imaginary
//! coordinates; callers supply Wirtinger-consistent real gradients, which the
//! finite-difference harness [`check_gradients`] validates.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

/// Objective or constraint callback: returns the value at `x` and, when a
/// buffer is supplied, writes the gradient into it. Constraint callbacks may
/// return `+inf`/NaN to mark points outside their domain; such points are
/// treated as infeasible by the line search.
pub type ValueGrad<'a> = Box<dyn Fn(&[f64], Option<&mut [f64]>) -> f64 + 'a>;

/// A smooth maximization problem with inequality constraints `g_j(x) <= 0`
/// and a strictly feasible starting point.
pub struct SmoothProblem<'a> {
    pub dim: usize,
    pub objective: ValueGrad<'a>,
    pub constraints: Vec<ValueGrad<'a>>,
    pub x0: Vec<f64>,
}

/// Barrier schedule and termination thresholds.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    /// Target duality-gap estimate m/t and scaled stationarity residual.
    pub kkt_tol: f64,
    /// Multiplicative barrier-weight growth per stage.
    pub barrier_mu: f64,
    /// Initial barrier weight.
    pub barrier_t0: f64,
    /// Inner ascent iteration cap per barrier stage.
    pub max_newton_iters: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { kkt_tol: 1e-6, barrier_mu: 10.0, barrier_t0: 1.0, max_newton_iters: 200 }
    }
}

/// Solve metadata: iteration counts, barrier state and quality estimates.
#[derive(Debug, Clone, Default)]
pub struct Diagnostics {
    /// Number of barrier stages run.
    pub stages: usize,
    /// Total inner ascent iterations.
    pub inner_iterations: usize,
    /// Final barrier weight t.
    pub final_barrier_weight: f64,
    /// Duality-gap estimate m/t at termination.
    pub duality_gap: f64,
    /// `||grad phi_t|| / max(t, 1)` at the final barrier iterate.
    pub kkt_residual: f64,
    /// Objective value at the end of each barrier stage.
    pub stage_objectives: Vec<f64>,
    /// Line search could not make progress; best iterate returned.
    pub stalled: bool,
    /// Final iterate was no better than the start, so the start was returned.
    pub reverted_to_start: bool,
}

struct BarrierEval {
    phi: f64,
    objective: f64,
}

/// Evaluates phi_t (and optionally its gradient); returns -inf when `x` is
/// infeasible or a callback value is non-finite.
fn eval_barrier(p: &SmoothProblem, t: f64, x: &[f64], mut grad: Option<&mut [f64]>) -> BarrierEval {
    let mut scratch = grad.as_ref().map(|_| vec![0.0; p.dim]);
    let f = (p.objective)(x, scratch.as_deref_mut());
    if !f.is_finite() {
        return BarrierEval { phi: f64::NEG_INFINITY, objective: f };
    }
    if let (Some(g), Some(s)) = (grad.as_deref_mut(), scratch.as_ref()) {
        for (gi, si) in g.iter_mut().zip(s) {
            *gi = t * si;
        }
    }
    let mut phi = t * f;
    for c in &p.constraints {
        let v = (c)(x, scratch.as_deref_mut());
        if !v.is_finite() || v >= 0.0 {
            return BarrierEval { phi: f64::NEG_INFINITY, objective: f };
        }
        phi += (-v).ln();
        if let (Some(g), Some(s)) = (grad.as_deref_mut(), scratch.as_ref()) {
            // d/dx ln(-g_j) = g_j' / g_j with g_j < 0.
            for (gi, si) in g.iter_mut().zip(s) {
                *gi += si / v;
            }
        }
    }
    BarrierEval { phi, objective: f }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// L-BFGS two-loop recursion producing an ascent direction from curvature
/// pairs of the (concave) barrier function. Falls back to the raw gradient
/// when no usable curvature is stored.
struct LbfgsMemory {
    pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)>, // (s, y, 1/(s.y)) for the minimization form
    capacity: usize,
}

impl LbfgsMemory {
    fn new(capacity: usize) -> Self {
        LbfgsMemory { pairs: VecDeque::new(), capacity }
    }

    fn clear(&mut self) {
        self.pairs.clear();
    }

    /// `s = x_new - x_old`, `y = grad_min_new - grad_min_old` where grad_min
    /// is the gradient of the minimized function -phi.
    fn push(&mut self, s: Vec<f64>, y: Vec<f64>) {
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) && sy.is_finite() {
            if self.pairs.len() == self.capacity {
                self.pairs.pop_front();
            }
            self.pairs.push_back((s, y, 1.0 / sy));
        }
    }

    /// Direction for minimizing -phi given its gradient; returned already
    /// negated into an ascent direction for phi.
    fn ascent_direction(&self, grad_phi: &[f64]) -> Vec<f64> {
        let mut q: Vec<f64> = grad_phi.iter().map(|v| -v).collect(); // grad of -phi
        let mut alphas = Vec::with_capacity(self.pairs.len());
        for (s, y, rho) in self.pairs.iter().rev() {
            let a = rho * dot(s, &q);
            for (qi, yi) in q.iter_mut().zip(y) {
                *qi -= a * yi;
            }
            alphas.push(a);
        }
        let scale = self
            .pairs
            .back()
            .map(|(s, y, _)| dot(s, y) / dot(y, y))
            .filter(|g| g.is_finite() && *g > 0.0)
            .unwrap_or(1.0);
        for qi in q.iter_mut() {
            *qi *= scale;
        }
        for ((s, y, rho), a) in self.pairs.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            for (qi, si) in q.iter_mut().zip(s) {
                *qi += (a - b) * si;
            }
        }
        // q approximates (-hess phi)^-1 * grad(-phi) = -(-hess phi)^-1 grad phi;
        // negate to ascend phi.
        q.iter().map(|v| -v).collect()
    }
}

/// Maximizes the problem from its strictly feasible start.
///
/// The returned point satisfies every constraint (iterates never leave the
/// strict interior) and its objective is never below the start's. Line-search
/// stalls are reported through [`Diagnostics::stalled`] rather than an error,
/// leaving the decision to the caller.
pub fn maximize(p: &SmoothProblem, opts: &SolveOptions) -> Result<(Vec<f64>, Diagnostics)> {
    if p.x0.len() != p.dim {
        return Err(Error::Dimension(format!(
            "start has length {}, problem dimension is {}",
            p.x0.len(),
            p.dim
        )));
    }
    for (j, c) in p.constraints.iter().enumerate() {
        let v = (c)(&p.x0, None);
        if !v.is_finite() || v >= 0.0 {
            return Err(Error::Infeasible(format!(
                "constraint {j} at the starting point is {v:.3e} (needs < 0)"
            )));
        }
    }
    let f0 = (p.objective)(&p.x0, None);
    if !f0.is_finite() {
        return Err(Error::Infeasible("objective is not finite at the starting point".into()));
    }

    let m = p.constraints.len();
    let mut diag = Diagnostics::default();
    let mut x = p.x0.clone();
    let mut t = opts.barrier_t0;
    let mut grad = vec![0.0; p.dim];

    loop {
        diag.stages += 1;
        let stage_tol = opts.kkt_tol * t.max(1.0);
        let mut memory = LbfgsMemory::new(8);
        let mut cur = eval_barrier(p, t, &x, Some(&mut grad));
        debug_assert!(cur.phi.is_finite(), "stage started at an infeasible point");

        for _ in 0..opts.max_newton_iters {
            let gnorm = norm(&grad);
            diag.kkt_residual = gnorm / t.max(1.0);
            if gnorm <= stage_tol {
                break;
            }
            diag.inner_iterations += 1;

            let mut dir = memory.ascent_direction(&grad);
            let mut slope = dot(&grad, &dir);
            if !(slope > 0.0) || !slope.is_finite() {
                // Unusable curvature; restart from the raw gradient.
                memory.clear();
                dir = grad.clone();
                slope = gnorm * gnorm;
            }

            // Armijo backtracking; infeasible or non-finite trial points fail
            // the test because their phi is -inf.
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let trial: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + alpha * di).collect();
                let te = eval_barrier(p, t, &trial, None);
                if te.phi >= cur.phi + 1e-4 * alpha * slope {
                    let mut new_grad = vec![0.0; p.dim];
                    let te = eval_barrier(p, t, &trial, Some(&mut new_grad));
                    let s: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
                    // y for the minimization form -phi.
                    let y: Vec<f64> = grad.iter().zip(&new_grad).map(|(old, new)| old - new).collect();
                    memory.push(s, y);
                    x = trial;
                    grad = new_grad;
                    cur = te;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted {
                diag.stalled = true;
                break;
            }
        }

        diag.kkt_residual = norm(&grad) / t.max(1.0);
        diag.stage_objectives.push(cur.objective);
        diag.final_barrier_weight = t;
        diag.duality_gap = m as f64 / t;
        if diag.stalled || m == 0 || diag.duality_gap < opts.kkt_tol {
            break;
        }
        t *= opts.barrier_mu;
    }

    // Never hand back something worse than the start (can only trigger when
    // the start is already optimal to within solver tolerance).
    let final_objective = diag.stage_objectives.last().copied().unwrap_or(f0);
    if final_objective < f0 - 1e-12 {
        diag.reverted_to_start = true;
        return Ok((p.x0.clone(), diag));
    }
    Ok((x, diag))
}

/// Central finite-difference validation of the objective and constraint
/// gradients at `x`. Returns the worst relative error, where each gradient's
/// error is `||g_fd - g|| / max(1, ||g||)`.
pub fn check_gradients(p: &SmoothProblem, x: &[f64], step: f64) -> f64 {
    let mut worst = 0.0f64;
    let mut callbacks: Vec<&ValueGrad> = vec![&p.objective];
    callbacks.extend(p.constraints.iter());
    for cb in callbacks {
        let mut analytic = vec![0.0; p.dim];
        (cb)(x, Some(&mut analytic));
        let mut fd = vec![0.0; p.dim];
        let mut xp = x.to_vec();
        for i in 0..p.dim {
            let h = step * (1.0 + x[i].abs());
            xp[i] = x[i] + h;
            let up = (cb)(&xp, None);
            xp[i] = x[i] - h;
            let dn = (cb)(&xp, None);
            xp[i] = x[i];
            fd[i] = (up - dn) / (2.0 * h);
        }
        let diff: f64 = analytic.iter().zip(&fd).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let rel = diff / norm(&analytic).max(1.0);
        worst = worst.max(rel);
    }
    worst
}

//! Box-projected BFGS with Armijo backtracking.

use crate::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfgsOptions {
    pub max_iter: usize,
    pub grad_tol: f64,
    pub f_tol: f64,
    /// Largest allowed step length in parameter space.
    pub max_step: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self { max_iter: 200, grad_tol: 1e-6, f_tol: 1e-11, max_step: 3.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BfgsResult {
    pub x: Vec<f64>,
    pub f: f64,
    /// Objective after every accepted step, starting at `x0`.
    pub trajectory: Vec<f64>,
}

fn project(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((v, lo), hi) in x.iter_mut().zip(lower).zip(upper) {
        *v = v.clamp(*lo, *hi);
    }
}

/// Minimises `f` starting from `x0`. `f` returns the value and gradient, or
/// `None` where the objective cannot be evaluated. Returns `None` only when
/// `x0` itself cannot be evaluated.
pub fn minimize<F>(mut f: F, x0: &[f64], lower: &[f64], upper: &[f64], opts: &BfgsOptions) -> Option<BfgsResult>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let f = core::cell::RefCell::new(&mut f);
    minimize_with_value(|x| f.borrow_mut()(x), |x| f.borrow_mut()(x).map(|r| r.0), x0, lower, upper, opts)
}

/// As [`minimize`], with a cheaper value-only objective `value` for line
/// search trials. `value` must agree with the value returned by `f`.
pub fn minimize_with_value<F, V>(
    mut f: F,
    mut value: V,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    opts: &BfgsOptions,
) -> Option<BfgsResult>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
    V: FnMut(&[f64]) -> Option<f64>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    project(&mut x, lower, upper);
    let (mut fx, mut g) = f(&x)?;
    if !fx.is_finite() {
        return None;
    }
    let mut trajectory = vec![fx];
    let mut h = identity(n);
    for _ in 0..opts.max_iter {
        // Components pressing against an active bound are frozen: they
        // neither count towards convergence nor enter the search direction.
        let free: Vec<bool> =
            (0..n).map(|i| !((x[i] <= lower[i] && g[i] > 0.0) || (x[i] >= upper[i] && g[i] < 0.0))).collect();
        let pg: Vec<f64> = g.iter().zip(&free).map(|(v, &f)| if f { *v } else { 0.0 }).collect();
        if pg.iter().fold(0.0f64, |m, v| m.max(v.abs())) < opts.grad_tol {
            break;
        }
        let mut d: Vec<f64> = mat_vec(&h, &pg).iter().zip(&free).map(|(v, &f)| if f { -v } else { 0.0 }).collect();
        let mut slope: f64 = d.iter().zip(&g).map(|(a, b)| a * b).sum();
        if !(slope < 0.0) {
            h = identity(n);
            d = pg.iter().map(|v| -v).collect();
            slope = -pg.iter().map(|v| v * v).sum::<f64>();
        }
        let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut t = if norm > opts.max_step { opts.max_step / norm } else { 1.0 };
        let mut accepted = None;
        for _ in 0..40 {
            let mut xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + t * b).collect();
            project(&mut xn, lower, upper);
            if let Some(fn_) = value(&xn) {
                if fn_.is_finite() && fn_ < fx && fn_ <= fx + 1e-4 * t * slope.min(0.0) {
                    if let Some((fn_, gn)) = f(&xn) {
                        accepted = Some((xn, fn_, gn));
                    }
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((xn, fn_, gn)) = accepted else { break };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        let df = fx - fn_;
        x = xn;
        fx = fn_;
        g = gn;
        trajectory.push(fx);
        if sy > 1e-12 {
            bfgs_update(&mut h, &s, &y, sy);
        }
        if df < opts.f_tol * (1.0 + fx.abs()) {
            break;
        }
    }
    Some(BfgsResult { x, f: fx, trajectory })
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

fn mat_vec(h: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    h.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

/// Inverse-Hessian update `H ← (I − ρsyᵀ) H (I − ρysᵀ) + ρssᵀ`.
fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy = mat_vec(h, y);
    let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
    for i in 0..n {
        for j in 0..n {
            h[i][j] += -rho * (s[i] * hy[j] + hy[i] * s[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}

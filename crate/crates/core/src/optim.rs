//! Small dense BFGS for the two-parameter registration problem.
//!
//! The objective may refuse a point (returns `None`), which the line search
//! treats as an infinite value. Box constraints are handled by the caller
//! through a reparameterization, so the solver itself is unconstrained.

/// Termination settings.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BfgsOptions {
    /// Stop when the sup-norm of the gradient falls below this.
    pub grad_tol: f64,
    /// Stop when a step moves every coordinate less than this.
    pub step_tol: f64,
    pub max_iter: usize,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self { grad_tol: 1e-8, step_tol: 1e-10, max_iter: 500 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Gradient,
    Step,
    /// The line search could not decrease the objective any further.
    Stalled,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct BfgsOutcome<const D: usize> {
    pub x: [f64; D],
    pub value: f64,
    pub grad: [f64; D],
    pub iterations: usize,
    pub termination: Termination,
}

impl<const D: usize> BfgsOutcome<D> {
    pub fn converged(&self) -> bool {
        !matches!(self.termination, Termination::MaxIterations)
    }
}

fn dot<const D: usize>(a: &[f64; D], b: &[f64; D]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sup<const D: usize>(a: &[f64; D]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Minimizes `f` from `x0`. `f` returns the value and gradient, or `None`
/// where it is undefined. Returns `None` if `x0` itself is infeasible.
pub fn minimize<const D: usize, F>(mut f: F, x0: [f64; D], opts: &BfgsOptions) -> Option<BfgsOutcome<D>>
where
    F: FnMut(&[f64; D]) -> Option<(f64, [f64; D])>,
{
    let (mut fx, mut g) = f(&x0)?;
    let mut x = x0;
    // inverse Hessian approximation, row-major
    let mut h = [[0.0; D]; D];
    let init_scale = 1.0 / sup(&g).max(1.0);
    for (i, row) in h.iter_mut().enumerate() {
        row[i] = init_scale;
    }
    let mut first = true;

    for iter in 0..opts.max_iter {
        if sup(&g) <= opts.grad_tol {
            return Some(BfgsOutcome { x, value: fx, grad: g, iterations: iter, termination: Termination::Gradient });
        }
        let mut dir = [0.0; D];
        for i in 0..D {
            dir[i] = -dot(&h[i], &g);
        }
        let mut slope = dot(&g, &dir);
        if slope >= 0.0 {
            // lost positive definiteness; fall back to steepest descent
            for i in 0..D {
                for j in 0..D {
                    h[i][j] = if i == j { init_scale } else { 0.0 };
                }
                dir[i] = -init_scale * g[i];
            }
            slope = dot(&g, &dir);
        }

        // backtracking Armijo with safeguarded quadratic interpolation
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let mut trial = x;
            for i in 0..D {
                trial[i] += t * dir[i];
            }
            match f(&trial) {
                Some((ft, gt)) if ft.is_finite() && ft <= fx + 1e-4 * t * slope => {
                    accepted = Some((trial, ft, gt));
                    break;
                }
                Some((ft, _)) if ft.is_finite() => {
                    let denom = 2.0 * (ft - fx - t * slope);
                    let t_q = if denom > 0.0 { -slope * t * t / denom } else { 0.5 * t };
                    t = t_q.clamp(0.1 * t, 0.5 * t);
                }
                _ => t *= 0.25,
            }
        }
        let Some((xn, fxn, gn)) = accepted else {
            return Some(BfgsOutcome { x, value: fx, grad: g, iterations: iter, termination: Termination::Stalled });
        };

        let mut s = [0.0; D];
        let mut y = [0.0; D];
        for i in 0..D {
            s[i] = xn[i] - x[i];
            y[i] = gn[i] - g[i];
        }
        let step = sup(&s);
        x = xn;
        let decrease = fx - fxn;
        fx = fxn;
        g = gn;
        if step <= opts.step_tol || (decrease == 0.0 && step <= 1e-8) {
            let termination = if sup(&g) <= opts.grad_tol { Termination::Gradient } else { Termination::Step };
            return Some(BfgsOutcome { x, value: fx, grad: g, iterations: iter + 1, termination });
        }

        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if first {
                let scale = sy / dot(&y, &y);
                for (i, row) in h.iter_mut().enumerate() {
                    for (j, v) in row.iter_mut().enumerate() {
                        *v = if i == j { scale } else { 0.0 };
                    }
                }
                first = false;
            }
            let rho = 1.0 / sy;
            let mut hy = [0.0; D];
            for i in 0..D {
                hy[i] = dot(&h[i], &y);
            }
            let yhy = dot(&y, &hy);
            for i in 0..D {
                for j in 0..D {
                    h[i][j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
                }
            }
        }
    }
    Some(BfgsOutcome { x, value: fx, grad: g, iterations: opts.max_iter, termination: Termination::MaxIterations })
}

//! The plane-similarity deformation `T = H_lambda o S_theta o R_theta`.
//!
//! `R_theta` rotates the graph of a curve about `(1, 0)`, `S_theta` maps the
//! rotated abscissae back onto `[0, 1]`, and `H_lambda` scales ordinates.
//! Because the deformation moves abscissae, comparing a deformed reference
//! with data observed at `x` requires the design preimage: the `u` whose
//! transformed abscissa equals `x`.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::curve::{AdmissibleFunction, ADMISSIBILITY_TOL};
use crate::error::{Error, Result};

/// Target accuracy of the preimage solve, in transformed-abscissa units.
pub const ROOT_TOL: f64 = 1e-12;

/// Deformation parameters `alpha = (theta, lambda)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformParams {
    pub theta: f64,
    pub lambda: f64,
}

impl TransformParams {
    pub const IDENTITY: Self = Self { theta: 0.0, lambda: 1.0 };

    pub fn new(theta: f64, lambda: f64) -> Self {
        Self { theta, lambda }
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.theta, self.lambda]
    }
}

/// Compact parameter set `[-theta0, theta1] x [lambda_min, lambda_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamBox {
    pub theta0: f64,
    pub theta1: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

impl Default for ParamBox {
    fn default() -> Self {
        Self { theta0: PI / 3.0, theta1: PI / 30.0, lambda_min: 0.05, lambda_max: 20.0 }
    }
}

impl ParamBox {
    pub fn new(theta0: f64, theta1: f64, lambda_min: f64, lambda_max: f64) -> Result<Self> {
        let b = Self { theta0, theta1, lambda_min, lambda_max };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let angle_ok = |t: f64| t > 0.0 && t < FRAC_PI_2;
        if !angle_ok(self.theta0) || !angle_ok(self.theta1) {
            return Err(Error::Config(format!(
                "theta bounds ({}, {}) must lie in (0, pi/2)",
                self.theta0, self.theta1
            )));
        }
        if !(self.lambda_min > 0.0 && self.lambda_min < self.lambda_max && self.lambda_max.is_finite()) {
            return Err(Error::Config(format!(
                "need 0 < lambda_min < lambda_max, got [{}, {}]",
                self.lambda_min, self.lambda_max
            )));
        }
        Ok(())
    }

    pub fn theta_range(&self) -> (f64, f64) {
        (-self.theta0, self.theta1)
    }

    pub fn lambda_range(&self) -> (f64, f64) {
        (self.lambda_min, self.lambda_max)
    }

    pub fn contains(&self, alpha: TransformParams) -> bool {
        alpha.theta >= -self.theta0
            && alpha.theta <= self.theta1
            && alpha.lambda >= self.lambda_min
            && alpha.lambda <= self.lambda_max
    }

    pub fn clamp(&self, alpha: TransformParams) -> TransformParams {
        TransformParams {
            theta: alpha.theta.clamp(-self.theta0, self.theta1),
            lambda: alpha.lambda.clamp(self.lambda_min, self.lambda_max),
        }
    }

    /// Whether `alpha` lies within `rel` (relative to the side length) of a face.
    pub fn on_boundary(&self, alpha: TransformParams, rel: f64) -> bool {
        let tw = self.theta0 + self.theta1;
        let lw = (self.lambda_max / self.lambda_min).ln();
        let lt = (alpha.theta + self.theta0) / tw;
        let ll = (alpha.lambda / self.lambda_min).ln() / lw;
        lt <= rel || lt >= 1.0 - rel || ll <= rel || ll >= 1.0 - rel
    }
}

/// `T_alpha` with its trigonometry and normalization precomputed for one
/// reference.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Similarity {
    cos: f64,
    sin: f64,
    lambda: f64,
    /// `1 - a`, with `a` the rotated image of the curve's left end.
    span: f64,
    theta: f64,
}

impl Similarity {
    pub(crate) fn new(alpha: TransformParams, f0: f64) -> Self {
        let (sin, cos) = alpha.theta.sin_cos();
        Self { cos, sin, lambda: alpha.lambda, span: cos + f0 * sin, theta: alpha.theta }
    }

    /// First coordinate of `T_alpha(u, fu)`.
    #[inline]
    pub(crate) fn abscissa(&self, u: f64, fu: f64) -> f64 {
        ((u - 1.0) * self.cos - fu * self.sin) / self.span + 1.0
    }

    /// `d/du` of [`Self::abscissa`] along the curve.
    #[inline]
    pub(crate) fn abscissa_slope(&self, dfu: f64) -> f64 {
        (self.cos - dfu * self.sin) / self.span
    }

    /// Second coordinate of the rotation, before scaling.
    #[inline]
    pub(crate) fn rotated_ordinate(&self, u: f64, fu: f64) -> f64 {
        (u - 1.0) * self.sin + fu * self.cos
    }

    #[inline]
    pub(crate) fn ordinate(&self, u: f64, fu: f64) -> f64 {
        self.lambda * self.rotated_ordinate(u, fu)
    }

    /// Fails unless `u -> abscissa(u, f(u))` is strictly increasing on `[0, 1]`.
    pub(crate) fn check_monotone(&self, f: &AdmissibleFunction) -> Result<()> {
        if self.span <= 0.0 {
            return Err(Error::ModelViolation {
                theta: self.theta,
                reason: format!("degenerate abscissa normalization (1 - a = {:e})", self.span),
            });
        }
        let (lo, hi) = f.slope_range();
        let worst = (self.cos - lo * self.sin).min(self.cos - hi * self.sin);
        if worst <= 0.0 {
            return Err(Error::ModelViolation {
                theta: self.theta,
                reason: format!(
                    "transformed abscissa not increasing (cos - f' sin reaches {worst:e})"
                ),
            });
        }
        Ok(())
    }

    /// Solves `abscissa(u, f(u)) = x` for `u` in `[lo, hi]`, a bracket known to
    /// contain the root. Newton steps are taken when they stay inside the
    /// bracket; otherwise the bracket is bisected.
    pub(crate) fn solve(&self, f: &AdmissibleFunction, x: f64, mut lo: f64, mut hi: f64, guess: f64) -> Result<f64> {
        let mut u = guess.clamp(lo, hi);
        for _ in 0..200 {
            let fu = f.value(u);
            let r = self.abscissa(u, fu) - x;
            if !r.is_finite() {
                return Err(Error::Evaluation { x: u });
            }
            if r.abs() <= 1e-14 {
                return Ok(u);
            }
            if r < 0.0 {
                lo = u;
            } else {
                hi = u;
            }
            if hi - lo <= 1e-14 {
                return Ok(0.5 * (lo + hi));
            }
            let d = self.abscissa_slope(f.derivative(u));
            let newton = u - r / d;
            let next = if d > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            if (next - u).abs() <= 1e-16 {
                return Ok(next);
            }
            u = next;
        }
        Err(Error::Numerical(format!("preimage solve for x = {x} did not converge")))
    }

    /// Preimage with the end-point image check; out-of-image points either
    /// error or snap to the nearer end.
    pub(crate) fn preimage(&self, f: &AdmissibleFunction, x: f64, lo: f64, guess: f64, clamp: bool) -> Result<f64> {
        let left = self.abscissa(0.0, f.value(0.0));
        let right = self.abscissa(1.0, f.value(1.0));
        if x <= left || x >= right {
            let tol = ROOT_TOL;
            if clamp || x >= left - tol && x <= right + tol {
                return Ok(if x <= left { 0.0 } else { 1.0 });
            }
            return Err(Error::Range { x, lo: left, hi: right });
        }
        self.solve(f, x, lo, 1.0, guess)
    }

    /// `d u / d theta` at a preimage, holding the observed abscissa fixed.
    fn preimage_theta_derivative(&self, u: f64, fu: f64, dfu: f64, f0: f64) -> f64 {
        let num = (u - 1.0) * self.cos - fu * self.sin;
        let dnum = -(u - 1.0) * self.sin - fu * self.cos;
        let dspan = -self.sin + f0 * self.cos;
        let d_theta = (dnum * self.span - num * dspan) / (self.span * self.span);
        -d_theta / self.abscissa_slope(dfu)
    }

    /// Exact gradient of the transformed value at preimage `u` with respect
    /// to `(theta, lambda)`.
    pub(crate) fn value_gradient(&self, u: f64, fu: f64, dfu: f64, f0: f64) -> [f64; 2] {
        let du = if u <= 0.0 || u >= 1.0 { 0.0 } else { self.preimage_theta_derivative(u, fu, dfu, f0) };
        let direct = (u - 1.0) * self.cos - fu * self.sin;
        let through_u = (self.sin + dfu * self.cos) * du;
        [self.lambda * (direct + through_u), self.rotated_ordinate(u, fu)]
    }
}

/// Applies `T_alpha` to the point `(x, f(x))`.
///
/// Fails when the rotated ordinate is negative beyond tolerance (A2).
pub fn transform_point(alpha: TransformParams, x: f64, f: &AdmissibleFunction) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("x = {x} outside [0, 1]")));
    }
    let fx = f.value(x);
    if !fx.is_finite() {
        return Err(Error::Evaluation { x });
    }
    let t = Similarity::new(alpha, f.value(0.0));
    let rotated = t.rotated_ordinate(x, fx);
    if rotated < -f.boundary_tol(ADMISSIBILITY_TOL) {
        return Err(Error::A2Violation { x, theta: alpha.theta, value: rotated });
    }
    Ok((t.abscissa(x, fx), alpha.lambda * rotated))
}

/// Checks A2 for `(f, theta)` on an `n`-point grid.
pub fn check_a2(f: &AdmissibleFunction, theta: f64, n: usize) -> Result<()> {
    let alpha = TransformParams::new(theta, 1.0);
    for i in 0..n {
        let x = i as f64 / (n - 1) as f64;
        transform_point(alpha, x, f)?;
    }
    Ok(())
}

/// Solves `T^1_alpha(u, g(u)) = x` for `u`.
pub fn solve_design_preimage(alpha: TransformParams, x: f64, g: &AdmissibleFunction) -> Result<f64> {
    let t = Similarity::new(alpha, g.value(0.0));
    t.check_monotone(g)?;
    t.preimage(g, x, 0.0, x, false)
}

/// Deformed reference value observed at design point `x`.
pub fn transformed_value(alpha: TransformParams, x: f64, g: &AdmissibleFunction) -> Result<f64> {
    let u = solve_design_preimage(alpha, x, g)?;
    let t = Similarity::new(alpha, g.value(0.0));
    Ok(t.ordinate(u, g.value(u)))
}

/// Central-difference gradient of [`transformed_value`] in `(theta, lambda)`
/// with step `1e-6 * max(1, |param|)`.
pub fn grad_transformed_value(alpha: TransformParams, x: f64, g: &AdmissibleFunction) -> Result<[f64; 2]> {
    grad_transformed_value_step(alpha, x, g, 1e-6)
}

/// [`grad_transformed_value`] with a custom relative step.
pub fn grad_transformed_value_step(
    alpha: TransformParams,
    x: f64,
    g: &AdmissibleFunction,
    rel_step: f64,
) -> Result<[f64; 2]> {
    let ht = rel_step * alpha.theta.abs().max(1.0);
    let hl = rel_step * alpha.lambda.abs().max(1.0);
    let v = |theta: f64, lambda: f64| transformed_value(TransformParams { theta, lambda }, x, g);
    let dt = (v(alpha.theta + ht, alpha.lambda)? - v(alpha.theta - ht, alpha.lambda)?) / (2.0 * ht);
    let dl = (v(alpha.theta, alpha.lambda + hl)? - v(alpha.theta, alpha.lambda - hl)?) / (2.0 * hl);
    if !dt.is_finite() || !dl.is_finite() {
        return Err(Error::Numerical(format!("non-finite difference at x = {x}")));
    }
    Ok([dt, dl])
}

/// Gradient of [`transformed_value`] by implicit differentiation of the
/// preimage equation. Uses the reference's derivative.
pub fn grad_transformed_value_exact(alpha: TransformParams, x: f64, g: &AdmissibleFunction) -> Result<[f64; 2]> {
    let u = solve_design_preimage(alpha, x, g)?;
    let f0 = g.value(0.0);
    let t = Similarity::new(alpha, f0);
    Ok(t.value_gradient(u, g.value(u), g.derivative(u), f0))
}

/// Maps a point of the deformed graph back onto the reference graph.
pub fn inverse_transform_point(
    alpha: TransformParams,
    point: (f64, f64),
    g: &AdmissibleFunction,
) -> Result<(f64, f64)> {
    let (u, v) = point;
    let f0 = g.value(0.0);
    let t = Similarity::new(alpha, f0);
    // undo H_lambda, then S_theta, then the rotation about (1, 0)
    let yr = v / alpha.lambda;
    let xr = (1.0 - t.span) + u * t.span;
    let x = 1.0 + (xr - 1.0) * t.cos + yr * t.sin;
    let y = -(xr - 1.0) * t.sin + yr * t.cos;
    let tol = 1e-8 * f0.abs().max(1.0);
    if !(-1e-12..=1.0 + 1e-12).contains(&x) {
        return Err(Error::Range { x, lo: 0.0, hi: 1.0 });
    }
    let on_graph = g.value(x.clamp(0.0, 1.0));
    if (y - on_graph).abs() > tol {
        return Err(Error::Domain(format!(
            "point ({u}, {v}) is not on the deformed curve (off by {:e})",
            y - on_graph
        )));
    }
    Ok((x.clamp(0.0, 1.0), y))
}

/// Lower angle limit above which the transformed abscissa of `f` is increasing.
pub fn monotone_theta_floor(f: &AdmissibleFunction) -> f64 {
    let (lo, _) = f.slope_range();
    let steepest = (-lo).max(0.0);
    let f0 = f.value(0.0);
    // span = cos + f0 sin > 0 also needs theta > -atan(1 / f0)
    let from_slope = if steepest > 0.0 { -(1.0 / steepest).atan() } else { -FRAC_PI_2 };
    let from_span = if f0 > 0.0 { -(1.0 / f0).atan() } else { -FRAC_PI_2 };
    from_slope.max(from_span)
}

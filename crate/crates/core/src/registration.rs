//! Least-squares registration of one observed curve onto a reference.
//!
//! The contrast is the mean squared difference between the observed values
//! and the deformed reference read off at the same design points. Its
//! minimizer over the parameter box is the registration estimate; the
//! residual variance and the outer product of the deformation gradient give
//! a plug-in covariance for `sqrt(N) (alpha_hat - alpha)`.

use serde::{Deserialize, Serialize};

use crate::curve::{linear_interpolate, max_spacing, AdmissibleFunction, Provenance, SampledCurve};
use crate::error::{Error, Result};
use crate::optim::{minimize, BfgsOptions, BfgsOutcome};
use crate::transform::{check_a2, ParamBox, Similarity, TransformParams};

/// Condition number above which the information matrix is rejected.
pub const MAX_CONDITION: f64 = 1e12;

/// Reference spacing above which an interpolated fit is flagged.
pub const HIGH_INTERPOLATION_GAP: f64 = 0.1;

/// Relative distance to a box face that counts as "on the boundary".
const BOUNDARY_REL: f64 = 1e-6;

pub type Matrix2 = [[f64; 2]; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceMode {
    ExactReference,
    InterpolatedReference,
}

impl From<Provenance> for ReferenceMode {
    fn from(p: Provenance) -> Self {
        match p {
            Provenance::Analytic => ReferenceMode::ExactReference,
            Provenance::Interpolated => ReferenceMode::InterpolatedReference,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Starting point, pulled into the box if needed.
    pub init: TransformParams,
    pub bfgs: BfgsOptions,
    /// Retry from a 3x3 grid when the first run fails or ends on the boundary.
    pub multistart: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { init: TransformParams::IDENTITY, bfgs: BfgsOptions::default(), multistart: true }
    }
}

/// One curve to register against a reference.
#[derive(Debug, Clone)]
pub struct RegistrationProblem {
    target: SampledCurve,
    reference: AdmissibleFunction,
    bounds: ParamBox,
    options: SolverOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegistrationResult {
    pub alpha_hat: TransformParams,
    pub contrast_value: f64,
    pub sigma2_hat: f64,
    /// `None` when the information matrix is near-singular.
    pub gamma_hat: Option<Matrix2>,
    pub converged: bool,
    pub iterations: usize,
    pub mode: ReferenceMode,
    pub on_boundary: bool,
    /// Number of optimizer starts used.
    pub starts: usize,
    /// Whether the rotated reference stays nonnegative at `theta_hat`.
    pub a2_satisfied: bool,
    /// Largest spacing of the reference knots (interpolated mode only).
    pub interpolation_gap: Option<f64>,
    pub high_interpolation_gap: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CovarianceEstimate {
    pub gamma: Matrix2,
    /// Information matrix `V = 2 E[grad grad^T]`.
    pub information: Matrix2,
    pub condition: f64,
    pub on_boundary: bool,
}

/// Logistic map of `R^2` onto the parameter box (log scale for lambda).
#[derive(Debug, Clone, Copy)]
struct BoxMap {
    theta_lo: f64,
    theta_width: f64,
    log_lambda_lo: f64,
    log_lambda_width: f64,
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    (p / (1.0 - p)).ln()
}

impl BoxMap {
    fn new(b: &ParamBox) -> Self {
        Self {
            theta_lo: -b.theta0,
            theta_width: b.theta0 + b.theta1,
            log_lambda_lo: b.lambda_min.ln(),
            log_lambda_width: (b.lambda_max / b.lambda_min).ln(),
        }
    }

    fn to_params(&self, z: &[f64; 2]) -> (TransformParams, [f64; 2]) {
        let (p, q) = (logistic(z[0]), logistic(z[1]));
        let theta = self.theta_lo + self.theta_width * p;
        let lambda = (self.log_lambda_lo + self.log_lambda_width * q).exp();
        let jac = [self.theta_width * p * (1.0 - p), lambda * self.log_lambda_width * q * (1.0 - q)];
        (TransformParams { theta, lambda }, jac)
    }

    fn to_latent(&self, a: TransformParams) -> [f64; 2] {
        [
            logit((a.theta - self.theta_lo) / self.theta_width),
            logit((a.lambda.ln() - self.log_lambda_lo) / self.log_lambda_width),
        ]
    }
}

impl RegistrationProblem {
    pub fn new(
        target: SampledCurve,
        reference: AdmissibleFunction,
        bounds: ParamBox,
        options: SolverOptions,
    ) -> Result<Self> {
        bounds.validate()?;
        let f0 = reference.value(0.0);
        if !(f0.is_finite() && f0 > 0.0) {
            return Err(Error::Domain(format!("reference must satisfy f(0) > 0, got {f0}")));
        }
        Ok(Self { target, reference, bounds, options })
    }

    pub fn target(&self) -> &SampledCurve {
        &self.target
    }

    pub fn reference(&self) -> &AdmissibleFunction {
        &self.reference
    }

    pub fn bounds(&self) -> &ParamBox {
        &self.bounds
    }

    pub fn options(&self) -> &SolverOptions {
        &self.options
    }

    pub fn mode(&self) -> ReferenceMode {
        self.reference.provenance().into()
    }

    /// Walks the target's design points in order, handing each preimage to `visit`.
    fn model_values(&self, alpha: TransformParams, mut visit: impl FnMut(usize, f64, f64, f64)) -> Result<()> {
        let f = &self.reference;
        let f0 = f.value(0.0);
        let t = Similarity::new(alpha, f0);
        t.check_monotone(f)?;
        let mut lo = 0.0;
        for (i, &x) in self.target.xs().iter().enumerate() {
            let u = t.preimage(f, x, lo, x.max(lo), true)?;
            lo = u;
            visit(i, u, f.value(u), f0);
        }
        Ok(())
    }

    /// Deformed reference at each target design point.
    pub fn fitted_values(&self, alpha: TransformParams) -> Result<Vec<f64>> {
        let t = Similarity::new(alpha, self.reference.value(0.0));
        let mut out = Vec::with_capacity(self.target.len());
        self.model_values(alpha, |_, u, fu, _| out.push(t.ordinate(u, fu)))?;
        Ok(out)
    }

    pub fn contrast(&self, alpha: TransformParams) -> Result<f64> {
        let ys = self.target.values();
        let mut sum = 0.0;
        let t = Similarity::new(alpha, self.reference.value(0.0));
        self.model_values(alpha, |i, u, fu, _| {
            let r = ys[i] - t.ordinate(u, fu);
            sum += r * r;
        })?;
        Ok(sum / ys.len() as f64)
    }

    /// Contrast and its exact gradient in `(theta, lambda)`.
    pub fn contrast_and_gradient(&self, alpha: TransformParams) -> Result<(f64, [f64; 2])> {
        let ys = self.target.values();
        let f = &self.reference;
        let t = Similarity::new(alpha, f.value(0.0));
        let mut sum = 0.0;
        let mut grad = [0.0; 2];
        self.model_values(alpha, |i, u, fu, f0| {
            let r = ys[i] - t.ordinate(u, fu);
            sum += r * r;
            let d = t.value_gradient(u, fu, f.derivative(u), f0);
            grad[0] -= 2.0 * r * d[0];
            grad[1] -= 2.0 * r * d[1];
        })?;
        let n = ys.len() as f64;
        Ok((sum / n, [grad[0] / n, grad[1] / n]))
    }

    /// Per-point gradients of the deformed reference value.
    pub fn value_gradients(&self, alpha: TransformParams) -> Result<Vec<[f64; 2]>> {
        let f = &self.reference;
        let t = Similarity::new(alpha, f.value(0.0));
        let mut out = Vec::with_capacity(self.target.len());
        self.model_values(alpha, |_, u, fu, f0| out.push(t.value_gradient(u, fu, f.derivative(u), f0)))?;
        Ok(out)
    }

    fn run_from(&self, init: TransformParams) -> Option<(BfgsOutcome<2>, TransformParams)> {
        let map = BoxMap::new(&self.bounds);
        let objective = |z: &[f64; 2]| {
            let (alpha, jac) = map.to_params(z);
            let (v, g) = self.contrast_and_gradient(alpha).ok()?;
            Some((v, [g[0] * jac[0], g[1] * jac[1]]))
        };
        let out = minimize(objective, map.to_latent(init), &self.options.bfgs)?;
        let alpha = map.to_params(&out.x).0;
        Some((out, alpha))
    }

    fn multistart_points(&self) -> Vec<TransformParams> {
        let b = &self.bounds;
        let mut pts = Vec::with_capacity(9);
        for i in 1..=3 {
            let theta = -b.theta0 + (b.theta0 + b.theta1) * i as f64 / 4.0;
            for j in 1..=3 {
                let lambda = b.lambda_min * (b.lambda_max / b.lambda_min).powf(j as f64 / 4.0);
                pts.push(TransformParams { theta, lambda });
            }
        }
        pts
    }

    /// Minimizes the contrast over the box.
    pub fn estimate(&self) -> Result<RegistrationResult> {
        let init = self.bounds.clamp(self.options.init);
        let first = self.run_from(init);
        let mut starts = 1;
        let needs_more = match &first {
            Some((out, a)) => !out.converged() || self.bounds.on_boundary(*a, BOUNDARY_REL),
            None => true,
        };
        let mut candidates: Vec<(BfgsOutcome<2>, TransformParams)> = first.into_iter().collect();
        if needs_more && self.options.multistart {
            for p in self.multistart_points() {
                starts += 1;
                candidates.extend(self.run_from(p));
            }
        }
        let best = candidates
            .into_iter()
            .filter(|(out, _)| out.converged())
            .min_by(|(oa, a), (ob, b)| {
                oa.value
                    .total_cmp(&ob.value)
                    .then(a.theta.total_cmp(&b.theta))
                    .then(a.lambda.total_cmp(&b.lambda))
            });
        let Some((out, alpha)) = best else {
            return Err(Error::NonConvergence(format!(
                "{starts} start(s) failed for a curve of {} points",
                self.target.len()
            )));
        };

        let contrast_value = self.contrast(alpha)?;
        let sigma2_hat = contrast_value;
        let gamma_hat = asymptotic_covariance(self, alpha, sigma2_hat).ok().map(|c| c.gamma);
        Ok(RegistrationResult {
            alpha_hat: alpha,
            contrast_value,
            sigma2_hat,
            gamma_hat,
            converged: true,
            iterations: out.iterations,
            mode: self.mode(),
            on_boundary: self.bounds.on_boundary(alpha, BOUNDARY_REL),
            starts,
            a2_satisfied: check_a2(&self.reference, alpha.theta, 256).is_ok(),
            interpolation_gap: None,
            high_interpolation_gap: false,
        })
    }
}

/// Empirical contrast at `alpha`.
pub fn contrast(alpha: TransformParams, problem: &RegistrationProblem) -> Result<f64> {
    problem.contrast(alpha)
}

pub fn estimate(problem: &RegistrationProblem) -> Result<RegistrationResult> {
    problem.estimate()
}

/// Registers `target` against the linear interpolate of a reference observed
/// on the same design grid.
pub fn estimate_interpolated(
    target: &SampledCurve,
    reference_samples: &SampledCurve,
    bounds: ParamBox,
    options: SolverOptions,
) -> Result<RegistrationResult> {
    let (a, b) = (target.xs(), reference_samples.xs());
    if a.len() != b.len() || a.iter().zip(b).any(|(x, y)| (x - y).abs() > 1e-12) {
        return Err(Error::GridMismatch(format!(
            "target has {} points, reference {}",
            a.len(),
            b.len()
        )));
    }
    let reference = linear_interpolate(reference_samples)?;
    let problem = RegistrationProblem::new(target.clone(), reference, bounds, options)?;
    let mut result = problem.estimate()?;
    let gap = max_spacing(reference_samples.grid());
    result.interpolation_gap = Some(gap);
    result.high_interpolation_gap = gap > HIGH_INTERPOLATION_GAP;
    Ok(result)
}

/// Mean squared residual at `alpha_hat`.
pub fn residual_variance(problem: &RegistrationProblem, alpha_hat: TransformParams) -> Result<f64> {
    problem.contrast(alpha_hat)
}

fn outer_mean(grads: impl Iterator<Item = [f64; 2]>) -> Matrix2 {
    let mut m = [[0.0; 2]; 2];
    let mut n = 0usize;
    for g in grads {
        m[0][0] += g[0] * g[0];
        m[0][1] += g[0] * g[1];
        m[1][1] += g[1] * g[1];
        n += 1;
    }
    let n = n as f64;
    [[m[0][0] / n, m[0][1] / n], [m[0][1] / n, m[1][1] / n]]
}

/// `Gamma = V^-1 * 2 sigma^2` for `V = 2 * mean(grad grad^T)`.
fn gamma_from_outer(mean_outer: Matrix2, sigma2: f64) -> Result<(Matrix2, Matrix2, f64)> {
    let v = [
        [2.0 * mean_outer[0][0], 2.0 * mean_outer[0][1]],
        [2.0 * mean_outer[1][0], 2.0 * mean_outer[1][1]],
    ];
    let tr = v[0][0] + v[1][1];
    let det = v[0][0] * v[1][1] - v[0][1] * v[1][0];
    let disc = ((v[0][0] - v[1][1]).powi(2) + 4.0 * v[0][1] * v[1][0]).max(0.0).sqrt();
    let (hi, lo) = (0.5 * (tr + disc), 0.5 * (tr - disc));
    let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(cond <= MAX_CONDITION) || !det.is_finite() {
        return Err(Error::NearSingular { cond });
    }
    let s = 2.0 * sigma2 / det;
    let gamma = [[s * v[1][1], -s * v[0][1]], [-s * v[1][0], s * v[0][0]]];
    Ok((gamma, v, cond))
}

/// Plug-in asymptotic covariance of `sqrt(N) (alpha_hat - alpha)`.
pub fn asymptotic_covariance(
    problem: &RegistrationProblem,
    alpha_hat: TransformParams,
    sigma2_hat: f64,
) -> Result<CovarianceEstimate> {
    let grads = problem.value_gradients(alpha_hat)?;
    let (gamma, information, condition) = gamma_from_outer(outer_mean(grads.into_iter()), sigma2_hat)?;
    Ok(CovarianceEstimate {
        gamma,
        information,
        condition,
        on_boundary: problem.bounds.on_boundary(alpha_hat, BOUNDARY_REL),
    })
}

/// Population covariance at `alpha` for a uniform design, with the
/// expectation computed by the midpoint rule on `nodes` points.
pub fn population_covariance(
    alpha: TransformParams,
    reference: &AdmissibleFunction,
    sigma2: f64,
    nodes: usize,
) -> Result<Matrix2> {
    let xs: Vec<f64> = (0..nodes).map(|i| (i as f64 + 0.5) / nodes as f64).collect();
    let ys = vec![0.0; nodes];
    let target = SampledCurve::from_points(&xs, &ys)?;
    let problem = RegistrationProblem::new(
        target,
        reference.clone(),
        ParamBox::default(),
        SolverOptions::default(),
    )?;
    let grads = problem.value_gradients(alpha)?;
    Ok(gamma_from_outer(outer_mean(grads.into_iter()), sigma2)?.0)
}

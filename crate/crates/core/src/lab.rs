//! Synthetic toy data and Monte Carlo checks of the estimator's
//! large-sample behaviour.
//!
//! All randomness flows through [`substream`]: replicate `r` of a run with
//! seed `s` always sees the same stream, whatever the thread count.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{max_spacing, AdmissibleFunction, DesignGrid, SampledCurve};
use crate::error::{Error, Result};
use crate::registration::{
    estimate_interpolated, population_covariance, Matrix2, RegistrationProblem, SolverOptions,
};
use crate::stats::{covariance2, frobenius, frobenius_rel_err, substream, Moments};
use crate::transform::{monotone_theta_floor, ParamBox, TransformParams};

/// Angular margin kept from the monotonicity limit when drawing angles.
pub const WELL_POSED_MARGIN: f64 = 0.05;

/// Quadrature nodes for population covariances.
const QUADRATURE_NODES: usize = 20_000;

/// Maximum tolerated fraction of failed replicates.
const MAX_FAILURE_RATE: f64 = 0.05;

/// The toy reference curve `2(cos(pi x) + 1)`, raw or rescaled to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ToyReference {
    Raw,
    #[default]
    Rescaled,
}

impl ToyReference {
    pub fn function(&self) -> AdmissibleFunction {
        match self {
            ToyReference::Raw => AdmissibleFunction::cosine_bump(2.0),
            ToyReference::Rescaled => AdmissibleFunction::cosine_bump(0.5),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToySpec {
    pub n_points: usize,
    pub n_curves: usize,
    pub sigma: f64,
    pub bounds: ParamBox,
    pub seed: u64,
    /// Uniform law for theta, before intersecting with the box.
    pub theta_range: (f64, f64),
    /// Uniform law for lambda; draws are clamped into the box.
    pub lambda_range: (f64, f64),
    pub reference: ToyReference,
    /// One design grid for all curves, or a fresh grid per curve.
    pub shared_design: bool,
}

impl Default for ToySpec {
    fn default() -> Self {
        Self {
            n_points: 100,
            n_curves: 25,
            sigma: 0.1,
            bounds: ParamBox::default(),
            seed: 0,
            theta_range: (-PI / 3.0, PI / 30.0),
            lambda_range: (0.0, 15.0),
            reference: ToyReference::Rescaled,
            shared_design: true,
        }
    }
}

impl ToySpec {
    pub fn validate(&self) -> Result<()> {
        self.bounds.validate()?;
        if self.n_points < 10 {
            return Err(Error::Config(format!("n_points = {} (need >= 10)", self.n_points)));
        }
        if self.n_curves == 0 {
            return Err(Error::Config("n_curves = 0".into()));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!("sigma = {} must be finite and >= 0", self.sigma)));
        }
        let ok = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo <= hi;
        if !ok(self.theta_range) || !ok(self.lambda_range) {
            return Err(Error::Config("parameter ranges must be finite with lo <= hi".into()));
        }
        self.effective_theta_range()?;
        Ok(())
    }

    /// The theta law intersected with the box and the reference's
    /// well-posed angles.
    pub fn effective_theta_range(&self) -> Result<(f64, f64)> {
        let floor = monotone_theta_floor(&self.reference.function()) + WELL_POSED_MARGIN;
        let lo = self.theta_range.0.max(-self.bounds.theta0).max(floor);
        let hi = self.theta_range.1.min(self.bounds.theta1);
        if lo > hi {
            return Err(Error::Config(format!(
                "theta law {:?} has no well-posed angles inside the box (floor {floor:.4})",
                self.theta_range
            )));
        }
        Ok((lo, hi))
    }
}

#[derive(Debug, Clone)]
pub struct ToyDataset {
    pub reference: AdmissibleFunction,
    pub curves: Vec<SampledCurve>,
    pub true_params: Vec<TransformParams>,
    /// Whether the drawn lambda had to be clamped into the box.
    pub clamped: Vec<bool>,
}

fn uniform_grid_draw(n: usize, rng: &mut ChaCha8Rng) -> Result<DesignGrid> {
    DesignGrid::new((0..n).map(|_| rng.random::<f64>()).collect())
}

/// Noiseless model values of `reference` deformed by `alpha` on `grid`.
pub fn model_curve(reference: &AdmissibleFunction, alpha: TransformParams, grid: &DesignGrid) -> Result<SampledCurve> {
    let zeros = SampledCurve::new(grid.clone(), vec![0.0; grid.len()])?;
    let problem = RegistrationProblem::new(zeros, reference.clone(), ParamBox::default(), SolverOptions::default())?;
    SampledCurve::new(grid.clone(), problem.fitted_values(alpha)?)
}

fn add_noise(curve: SampledCurve, sigma: f64, rng: &mut ChaCha8Rng) -> Result<SampledCurve> {
    if sigma == 0.0 {
        return Ok(curve);
    }
    let ys = curve
        .values()
        .iter()
        .map(|y| y + sigma * rng.sample::<f64, _>(StandardNormal))
        .collect();
    SampledCurve::new(curve.grid().clone(), ys)
}

/// Draws a toy dataset: a shared uniform design, one `(theta, lambda)` per
/// curve, model values plus Gaussian noise.
pub fn generate_toy(spec: &ToySpec) -> Result<ToyDataset> {
    spec.validate()?;
    let reference = spec.reference.function();
    let (tlo, thi) = spec.effective_theta_range()?;
    let mut design_rng = substream(spec.seed, 0);
    let shared = uniform_grid_draw(spec.n_points, &mut design_rng)?;

    let mut curves = Vec::with_capacity(spec.n_curves);
    let mut true_params = Vec::with_capacity(spec.n_curves);
    let mut clamped = Vec::with_capacity(spec.n_curves);
    for j in 0..spec.n_curves {
        let mut rng = substream(spec.seed, 1 + j as u64);
        let theta = tlo + (thi - tlo) * rng.random::<f64>();
        let (llo, lhi) = spec.lambda_range;
        let raw_lambda = llo + (lhi - llo) * rng.random::<f64>();
        let lambda = raw_lambda.clamp(spec.bounds.lambda_min, spec.bounds.lambda_max);
        if lambda != raw_lambda {
            log::info!("curve {j}: lambda {raw_lambda:.4} clamped to {lambda}");
        }
        let grid = if spec.shared_design { shared.clone() } else { uniform_grid_draw(spec.n_points, &mut rng)? };
        let alpha = TransformParams { theta, lambda };
        let curve = add_noise(model_curve(&reference, alpha, &grid)?, spec.sigma, &mut rng)?;
        curves.push(curve);
        true_params.push(alpha);
        clamped.push(lambda != raw_lambda);
    }
    Ok(ToyDataset { reference, curves, true_params, clamped })
}

/// Settings shared by the Monte Carlo harnesses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McConfig {
    pub alpha_star: TransformParams,
    pub sigma: f64,
    pub bounds: ParamBox,
    pub reference: ToyReference,
    pub seed: u64,
    pub solver: SolverOptions,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            alpha_star: TransformParams::new(-0.3, 2.5),
            sigma: 0.1,
            bounds: ParamBox::default(),
            reference: ToyReference::Rescaled,
            seed: 2024,
            solver: SolverOptions::default(),
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        self.bounds.validate()?;
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!("sigma = {}", self.sigma)));
        }
        if !self.bounds.contains(self.alpha_star) || self.bounds.on_boundary(self.alpha_star, 1e-6) {
            return Err(Error::Config(format!("alpha* = {:?} is not interior to the box", self.alpha_star)));
        }
        Ok(())
    }

    /// One replicate's fresh design and noisy observations of size `n`.
    fn draw(&self, reference: &AdmissibleFunction, n: usize, rng: &mut ChaCha8Rng) -> Result<SampledCurve> {
        let grid = uniform_grid_draw(n, rng)?;
        add_noise(model_curve(reference, self.alpha_star, &grid)?, self.sigma, rng)
    }

    fn fit(&self, reference: &AdmissibleFunction, target: SampledCurve) -> Result<TransformParams> {
        let problem = RegistrationProblem::new(target, reference.clone(), self.bounds, self.solver)?;
        Ok(problem.estimate()?.alpha_hat)
    }
}

fn check_replicates(what: &str, replicates: usize, recommended: usize) -> Result<()> {
    if replicates == 0 {
        return Err(Error::Config(format!("{what}: zero replicates")));
    }
    if replicates < recommended {
        log::warn!("{what}: {replicates} replicates is below the recommended {recommended}");
    }
    Ok(())
}

/// Runs `job` for every replicate in parallel, keeping replicate order.
/// Fails if more than 5% of replicates fail.
fn replicate<T, F>(what: &str, replicates: usize, job: F) -> Result<(Vec<T>, usize)>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    let results: Vec<Result<T>> = (0..replicates).into_par_iter().map(&job).collect();
    let mut ok = Vec::with_capacity(replicates);
    let mut failures = 0;
    for (r, res) in results.into_iter().enumerate() {
        match res {
            Ok(v) => ok.push(v),
            Err(e) => {
                log::warn!("{what}: replicate {r} failed: {e}");
                failures += 1;
            }
        }
    }
    if failures as f64 > MAX_FAILURE_RATE * replicates as f64 {
        return Err(Error::Harness(format!("{what}: {failures} of {replicates} replicates failed")));
    }
    Ok((ok, failures))
}

fn stream_id(n: usize, r: usize) -> u64 {
    ((n as u64) << 32) | r as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmseRow {
    pub n: usize,
    pub rmse_theta: f64,
    pub rmse_lambda: f64,
    pub replicates: usize,
    pub failures: usize,
}

/// RMSE of the estimator at fixed `alpha*` for each sample size.
pub fn run_consistency_sweep(cfg: &McConfig, n_list: &[usize], replicates: usize) -> Result<Vec<RmseRow>> {
    cfg.validate()?;
    check_replicates("consistency sweep", replicates, 50)?;
    let reference = cfg.reference.function();
    let mut ns = n_list.to_vec();
    ns.sort_unstable();
    ns.iter()
        .map(|&n| {
            let (fits, failures) = replicate("consistency sweep", replicates, |r| {
                let mut rng = substream(cfg.seed, stream_id(n, r));
                cfg.fit(&reference, cfg.draw(&reference, n, &mut rng)?)
            })?;
            let m = fits.len() as f64;
            let mse = |k: usize| {
                fits.iter().map(|a| (a.as_array()[k] - cfg.alpha_star.as_array()[k]).powi(2)).sum::<f64>() / m
            };
            Ok(RmseRow { n, rmse_theta: mse(0).sqrt(), rmse_lambda: mse(1).sqrt(), replicates, failures })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub n: usize,
    pub sigma: f64,
    pub alpha_star: TransformParams,
    pub replicates: usize,
    pub failures: usize,
    /// Covariance of `sqrt(N) (alpha_hat - alpha*)` over replicates.
    pub empirical_cov: Matrix2,
    /// Plug-in covariance at `alpha*` with the true noise variance.
    pub gamma_reference: Matrix2,
    /// `None` when the reference covariance is zero.
    pub frobenius_rel_err: Option<f64>,
    pub frobenius_abs_err: f64,
    pub mean_scaled_error: [f64; 2],
    pub skewness: [f64; 2],
    pub excess_kurtosis: [f64; 2],
    #[serde(default)]
    pub rmse_by_n: Vec<RmseRow>,
}

impl MonteCarloReport {
    /// Whether the normal approximation holds within the given tolerances.
    pub fn passes(&self, frobenius_tol: f64, skew_tol: f64, kurtosis_tol: f64) -> bool {
        self.frobenius_rel_err.is_some_and(|e| e <= frobenius_tol)
            && self.skewness.iter().all(|s| s.abs() <= skew_tol)
            && self.excess_kurtosis.iter().all(|k| k.abs() <= kurtosis_tol)
    }
}

/// Compares the spread of `sqrt(N) (alpha_hat - alpha*)` with the plug-in
/// asymptotic covariance.
pub fn run_clt_check(cfg: &McConfig, n: usize, replicates: usize) -> Result<MonteCarloReport> {
    cfg.validate()?;
    check_replicates("CLT check", replicates, 500)?;
    let reference = cfg.reference.function();
    let root_n = (n as f64).sqrt();
    let (scaled, failures) = replicate("CLT check", replicates, |r| {
        let mut rng = substream(cfg.seed, stream_id(n, r));
        let a = cfg.fit(&reference, cfg.draw(&reference, n, &mut rng)?)?;
        Ok([root_n * (a.theta - cfg.alpha_star.theta), root_n * (a.lambda - cfg.alpha_star.lambda)])
    })?;
    if scaled.len() < 2 {
        return Err(Error::Harness("CLT check: fewer than two successful replicates".into()));
    }
    let empirical_cov = covariance2(&scaled);
    let gamma_reference = population_covariance(cfg.alpha_star, &reference, cfg.sigma * cfg.sigma, QUADRATURE_NODES)?;
    let mut diff = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            diff[i][j] = empirical_cov[i][j] - gamma_reference[i][j];
        }
    }
    let frobenius_rel_err =
        (frobenius(&gamma_reference) > 0.0).then(|| frobenius_rel_err(&empirical_cov, &gamma_reference));
    let m: [Moments; 2] = [0, 1].map(|k| scaled.iter().map(|s| s[k]).collect());
    Ok(MonteCarloReport {
        n,
        sigma: cfg.sigma,
        alpha_star: cfg.alpha_star,
        replicates,
        failures,
        empirical_cov,
        gamma_reference,
        frobenius_rel_err,
        frobenius_abs_err: frobenius(&diff),
        mean_scaled_error: [m[0].mean(), m[1].mean()],
        skewness: [m[0].skewness(), m[1].skewness()],
        excess_kurtosis: [m[0].excess_kurtosis(), m[1].excess_kurtosis()],
        rmse_by_n: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub n: usize,
    /// Mean of `sqrt(N) |alpha_hat_interp - alpha_hat_exact|`.
    pub mean_scaled_gap: f64,
    pub mean_max_spacing: f64,
    pub replicates: usize,
    pub failures: usize,
}

/// Distance between the exact-reference and interpolated-reference
/// estimates on the same data, scaled by `sqrt(N)`.
pub fn run_interp_gap_check(cfg: &McConfig, n_list: &[usize], replicates: usize) -> Result<Vec<GapRow>> {
    cfg.validate()?;
    check_replicates("interpolation gap check", replicates, 100)?;
    let reference = cfg.reference.function();
    let mut ns = n_list.to_vec();
    ns.sort_unstable();
    ns.iter()
        .map(|&n| {
            let (rows, failures) = replicate("interpolation gap check", replicates, |r| {
                let mut rng = substream(cfg.seed, stream_id(n, r));
                let target = cfg.draw(&reference, n, &mut rng)?;
                let samples = SampledCurve::sample(&reference, target.grid())?;
                let exact = cfg.fit(&reference, target.clone())?;
                let interp = estimate_interpolated(&target, &samples, cfg.bounds, cfg.solver)?.alpha_hat;
                let gap = (interp.theta - exact.theta).hypot(interp.lambda - exact.lambda);
                Ok(((n as f64).sqrt() * gap, max_spacing(target.grid())))
            })?;
            let m = rows.len() as f64;
            Ok(GapRow {
                n,
                mean_scaled_gap: rows.iter().map(|r| r.0).sum::<f64>() / m,
                mean_max_spacing: rows.iter().map(|r| r.1).sum::<f64>() / m,
                replicates,
                failures,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpacingRow {
    pub n: usize,
    pub epsilon: f64,
    pub replicates: usize,
    pub exceedances: usize,
    pub frequency: f64,
    pub bound: f64,
    /// Three binomial standard errors of the frequency.
    pub slack: f64,
    pub passed: bool,
}

/// Empirical frequency of `max spacing >= eps` for uniform samples against
/// the bound `N (1 - eps)^(N - 1)`.
pub fn run_spacing_check(n_list: &[usize], epsilons: &[f64], replicates: usize, seed: u64) -> Result<Vec<SpacingRow>> {
    check_replicates("spacing check", replicates, 1000)?;
    let mut rows = Vec::new();
    for &n in n_list {
        let spacings: Vec<f64> = (0..replicates)
            .into_par_iter()
            .map(|r| {
                let mut rng = substream(seed, stream_id(n, r));
                uniform_grid_draw(n, &mut rng).map(|g| max_spacing(&g))
            })
            .collect::<Result<_>>()?;
        for &epsilon in epsilons {
            let bound = crate::curve::spacing_tail_bound(n, epsilon)?;
            let exceedances = spacings.iter().filter(|&&s| s >= epsilon).count();
            let frequency = exceedances as f64 / replicates as f64;
            let slack = 3.0 * (frequency * (1.0 - frequency) / replicates as f64).sqrt();
            rows.push(SpacingRow {
                n,
                epsilon,
                replicates,
                exceedances,
                frequency,
                bound,
                slack,
                passed: frequency <= bound + slack,
            });
        }
    }
    Ok(rows)
}

/// Whether `values` decreases, tolerating at most `inversions` increases.
pub fn is_decreasing_allowing(values: &[f64], inversions: usize) -> bool {
    values.windows(2).filter(|w| w[1] >= w[0]).count() <= inversions
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::check_admissibility;

    #[test]
    fn identity_toy_curve_is_the_reference() {
        let spec = ToySpec {
            n_curves: 1,
            sigma: 0.0,
            theta_range: (0.0, 0.0),
            lambda_range: (1.0, 1.0),
            ..Default::default()
        };
        let data = generate_toy(&spec).unwrap();
        let c = &data.curves[0];
        for (&x, &y) in c.xs().iter().zip(c.values()) {
            assert!((y - data.reference.value(x)).abs() < 1e-15);
        }
    }

    #[test]
    fn toy_regime_shapes_and_determinism() {
        let spec = ToySpec { seed: 7, ..Default::default() };
        let a = generate_toy(&spec).unwrap();
        let b = generate_toy(&spec).unwrap();
        assert_eq!(a.curves.len(), 25);
        assert!(a.curves.iter().all(|c| c.len() == 100));
        assert_eq!(a.curves, b.curves);
        assert_eq!(a.true_params, b.true_params);
        let (lo, hi) = spec.effective_theta_range().unwrap();
        assert!(a.true_params.iter().all(|p| p.theta >= lo && p.theta <= hi));
        assert!(a.true_params.iter().all(|p| spec.bounds.contains(*p)));
        // one shared grid
        assert!(a.curves.iter().all(|c| c.grid() == a.curves[0].grid()));
    }

    #[test]
    fn fresh_designs_option() {
        let spec = ToySpec { shared_design: false, n_curves: 3, ..Default::default() };
        let d = generate_toy(&spec).unwrap();
        assert_ne!(d.curves[0].grid(), d.curves[1].grid());
    }

    #[test]
    fn values_vanish_at_right_end() {
        let g = DesignGrid::new(vec![0.0, 0.3, 0.7, 1.0]).unwrap();
        let reference = ToyReference::Rescaled.function();
        for &(t, l) in &[(-0.4, 3.0), (0.1, 12.0), (0.0, 0.05)] {
            let c = model_curve(&reference, TransformParams::new(t, l), &g).unwrap();
            assert!(c.values()[3].abs() < 1e-15);
        }
    }

    #[test]
    fn noiseless_curves_decrease_to_zero() {
        let reference = ToyReference::Rescaled.function();
        let g = DesignGrid::uniform(401).unwrap();
        for (t, l) in [(-0.3, 2.5), (-0.05, 10.0)] {
            let c = model_curve(&reference, TransformParams::new(t, l), &g).unwrap();
            assert!(c.values().windows(2).all(|w| w[1] <= w[0] + 1e-12));
            assert!(c.values()[0] > 0.0);
            assert!(c.values()[400].abs() < 1e-15);
        }
        assert!(check_admissibility(&reference, PI / 3.0, 101).unwrap().passed);
    }

    #[test]
    fn invalid_specs() {
        assert!(generate_toy(&ToySpec { sigma: -1.0, ..Default::default() }).is_err());
        assert!(generate_toy(&ToySpec { n_points: 5, ..Default::default() }).is_err());
        let raw = ToySpec { reference: ToyReference::Raw, theta_range: (-1.0, -0.5), ..Default::default() };
        assert!(matches!(generate_toy(&raw), Err(Error::Config(_))));
    }

    #[test]
    fn noiseless_sweep_is_exact() {
        let cfg = McConfig { sigma: 0.0, ..Default::default() };
        let rows = run_consistency_sweep(&cfg, &[200, 100], 50).unwrap();
        assert_eq!(rows[0].n, 100);
        for row in rows {
            assert!(row.rmse_theta <= 1e-5 && row.rmse_lambda <= 1e-5, "{row:?}");
        }
    }

    #[test]
    fn noiseless_clt_has_zero_spread() {
        let cfg = McConfig { sigma: 0.0, ..Default::default() };
        let rep = run_clt_check(&cfg, 200, 20).unwrap();
        assert!(frobenius(&rep.empirical_cov) < 1e-8);
        assert!(rep.frobenius_rel_err.is_none());
    }

    #[test]
    fn covariance_doubles_with_sigma() {
        // same seeds, so the noise doubles pathwise and the estimates move
        // almost linearly; compare at sampling-error scale
        let base = McConfig { sigma: 0.05, ..Default::default() };
        let twice = McConfig { sigma: 0.1, ..base.clone() };
        let a = run_clt_check(&base, 400, 200).unwrap();
        let b = run_clt_check(&twice, 400, 200).unwrap();
        let ratio = b.empirical_cov[0][0] / a.empirical_cov[0][0];
        assert!((ratio - 4.0).abs() < 0.4, "variance ratio {ratio}");
        let ratio = b.empirical_cov[1][1] / a.empirical_cov[1][1];
        assert!((ratio - 4.0).abs() < 0.4, "variance ratio {ratio}");
    }

    #[test]
    fn piecewise_linear_reference_has_no_gap() {
        // when the reference is itself an interpolant with knots on the grid,
        // both estimators see the same function
        let cfg = McConfig::default();
        let grid = DesignGrid::uniform(60).unwrap();
        let samples = SampledCurve::sample(&cfg.reference.function(), &grid).unwrap();
        let pl = crate::curve::linear_interpolate(&samples).unwrap();
        let mut rng = substream(3, 0);
        let target = add_noise(model_curve(&pl, cfg.alpha_star, &grid).unwrap(), 0.05, &mut rng).unwrap();
        let exact = cfg.fit(&pl, target.clone()).unwrap();
        let interp = estimate_interpolated(&target, &samples, cfg.bounds, cfg.solver).unwrap().alpha_hat;
        assert!((exact.theta - interp.theta).abs() < 1e-12);
        assert!((exact.lambda - interp.lambda).abs() < 1e-12);
    }

    #[test]
    fn spacing_rows() {
        let rows = run_spacing_check(&[2, 100], &[0.1, 0.5], 2000, 1).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().all(|r| r.passed), "{rows:?}");
        let r = rows.iter().find(|r| r.n == 2 && r.epsilon == 0.5).unwrap();
        assert_eq!(r.bound, 1.0);
    }

    #[test]
    fn decreasing_helper() {
        assert!(is_decreasing_allowing(&[3.0, 2.0, 1.0], 0));
        assert!(is_decreasing_allowing(&[3.0, 2.0, 2.5, 1.0], 1));
        assert!(!is_decreasing_allowing(&[1.0, 2.0, 3.0], 1));
    }
}

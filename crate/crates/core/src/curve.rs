//! Curve representations on the unit design interval.
//!
//! A [`SampledCurve`] is what we observe: values of an unknown function on a
//! sorted design grid. An [`AdmissibleFunction`] is something we can evaluate
//! anywhere on `[0, 1]`, either a closed form or the piecewise-linear
//! interpolate of a sampled curve.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Relative tolerance for the boundary equalities `f(1) = 0` and `f'(1) = 0`.
pub const ADMISSIBILITY_TOL: f64 = 1e-8;

/// Number of points on which derivative bounds of analytic functions are scanned.
const SLOPE_SCAN_POINTS: usize = 1025;

/// Sorted, deduplicated design points in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignGrid {
    points: Vec<f64>,
}

impl DesignGrid {
    /// Sorts and deduplicates `points`. Fails on non-finite or out-of-range
    /// points, or when fewer than two distinct points remain.
    pub fn new(mut points: Vec<f64>) -> Result<Self> {
        if let Some(&x) = points.iter().find(|x| !x.is_finite() || **x < 0.0 || **x > 1.0) {
            return Err(Error::Domain(format!("design point {x} outside [0, 1]")));
        }
        points.sort_by(f64::total_cmp);
        points.dedup();
        if points.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "design grid needs at least 2 distinct points, got {}",
                points.len()
            )));
        }
        Ok(Self { points })
    }

    /// `n` equally spaced points including both endpoints.
    pub fn uniform(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InsufficientData(format!("uniform grid of size {n}")));
        }
        let step = 1.0 / (n - 1) as f64;
        let mut points: Vec<f64> = (0..n).map(|i| i as f64 * step).collect();
        points[n - 1] = 1.0;
        Ok(Self { points })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Observed values of one curve on a design grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledCurve {
    grid: DesignGrid,
    values: Vec<f64>,
}

impl SampledCurve {
    /// Builds a curve from unsorted `(x, y)` samples. Duplicate abscissae are
    /// merged and their values averaged.
    pub fn from_points(xs: &[f64], ys: &[f64]) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::Data(format!(
                "abscissa/value length mismatch: {} vs {}",
                xs.len(),
                ys.len()
            )));
        }
        if let Some((&x, _)) = xs.iter().zip(ys).find(|(_, y)| !y.is_finite()) {
            return Err(Error::Evaluation { x });
        }
        let mut pairs: Vec<(f64, f64)> = xs.iter().copied().zip(ys.iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut merged_x: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut merged_y: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut count = 0usize;
        for (x, y) in pairs {
            if merged_x.last() == Some(&x) {
                let last = merged_y.last_mut().unwrap();
                *last = (*last * count as f64 + y) / (count + 1) as f64;
                count += 1;
            } else {
                merged_x.push(x);
                merged_y.push(y);
                count = 1;
            }
        }
        let grid = DesignGrid::new(merged_x)?;
        Ok(Self { grid, values: merged_y })
    }

    /// Pairs an existing grid with values, one per grid point.
    pub fn new(grid: DesignGrid, values: Vec<f64>) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::Data(format!(
                "grid has {} points but {} values were given",
                grid.len(),
                values.len()
            )));
        }
        if let Some((&x, _)) = grid.points().iter().zip(&values).find(|(_, y)| !y.is_finite()) {
            return Err(Error::Evaluation { x });
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` on `grid`.
    pub fn sample(f: &AdmissibleFunction, grid: &DesignGrid) -> Result<Self> {
        let values = grid.points().iter().map(|&x| f.value(x)).collect();
        Self::new(grid.clone(), values)
    }

    pub fn grid(&self) -> &DesignGrid {
        &self.grid
    }

    pub fn xs(&self) -> &[f64] {
        self.grid.points()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Piecewise-linear interpolant through sorted knots, constant outside them.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear {
    knots: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl PiecewiseLinear {
    fn from_curve(curve: &SampledCurve) -> Self {
        let knots = curve.xs().to_vec();
        let values = curve.values().to_vec();
        let slopes = knots
            .windows(2)
            .zip(values.windows(2))
            .map(|(x, y)| (y[1] - y[0]) / (x[1] - x[0]))
            .collect();
        Self { knots, values, slopes }
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn knot_values(&self) -> &[f64] {
        &self.values
    }

    /// Index of the segment `[knots[k], knots[k + 1])` containing `x`, if any.
    fn segment(&self, x: f64) -> Option<usize> {
        let n = self.knots.len();
        if x < self.knots[0] || x >= self.knots[n - 1] {
            return None;
        }
        // first knot strictly greater than x, minus one
        Some(self.knots.partition_point(|&k| k <= x) - 1)
    }

    pub fn value(&self, x: f64) -> f64 {
        let n = self.knots.len();
        if x <= self.knots[0] {
            return self.values[0];
        }
        if x >= self.knots[n - 1] {
            return self.values[n - 1];
        }
        let k = self.segment(x).expect("x is strictly inside the knot range");
        self.values[k] + self.slopes[k] * (x - self.knots[k])
    }

    /// Left-limit derivative; zero on the constant extensions.
    pub fn derivative(&self, x: f64) -> f64 {
        let n = self.knots.len();
        if x <= self.knots[0] || x > self.knots[n - 1] {
            return 0.0;
        }
        // segment whose right end is the first knot >= x
        let right = self.knots.partition_point(|&k| k < x);
        self.slopes[right - 1]
    }

    fn slope_range(&self) -> (f64, f64) {
        let has_extension = self.knots[0] > 0.0 || self.knots[self.knots.len() - 1] < 1.0;
        let init = if has_extension { (0.0, 0.0) } else { (f64::INFINITY, f64::NEG_INFINITY) };
        self.slopes
            .iter()
            .fold(init, |(lo, hi), &s| (lo.min(s), hi.max(s)))
    }
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Kind {
    Analytic {
        name: String,
        value: ScalarFn,
        derivative: Option<ScalarFn>,
    },
    Interpolated(PiecewiseLinear),
}

/// Where an [`AdmissibleFunction`] came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Analytic,
    Interpolated,
}

/// A function on `[0, 1]` usable as a registration reference.
///
/// Derivative bounds over `[0, 1]` are computed once at construction: exact
/// for interpolants, scanned on a fine grid for closed forms. They decide for
/// which angles the transformed abscissa stays monotone.
#[derive(Clone)]
pub struct AdmissibleFunction {
    kind: Kind,
    slope_min: f64,
    slope_max: f64,
}

impl fmt::Debug for AdmissibleFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match &self.kind {
            Kind::Analytic { name, .. } => name.as_str(),
            Kind::Interpolated(_) => "interpolated",
        };
        f.debug_struct("AdmissibleFunction")
            .field("name", &name)
            .field("slope_min", &self.slope_min)
            .field("slope_max", &self.slope_max)
            .finish()
    }
}

impl AdmissibleFunction {
    /// Wraps a closed-form function. Without `derivative`, derivatives are
    /// central finite differences.
    pub fn analytic<F>(name: impl Into<String>, value: F, derivative: Option<ScalarFn>) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let mut out = Self {
            kind: Kind::Analytic { name: name.into(), value: Arc::new(value), derivative },
            slope_min: 0.0,
            slope_max: 0.0,
        };
        let (lo, hi) = (0..SLOPE_SCAN_POINTS)
            .map(|i| out.derivative(i as f64 / (SLOPE_SCAN_POINTS - 1) as f64))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| (lo.min(d), hi.max(d)));
        out.slope_min = lo;
        out.slope_max = hi;
        out
    }

    /// The toy reference `scale * (cos(pi x) + 1)`. `scale = 2` is the raw
    /// toy curve `2(cos(pi x) + 1)`; `scale = 0.5` is its rescaling to `[0, 1]`.
    pub fn cosine_bump(scale: f64) -> Self {
        Self::analytic(
            format!("{scale}*(cos(pi x)+1)"),
            move |x| scale * ((PI * x).cos() + 1.0),
            Some(Arc::new(move |x| -scale * PI * (PI * x).sin())),
        )
    }

    pub fn interpolated(pl: PiecewiseLinear) -> Self {
        let (slope_min, slope_max) = pl.slope_range();
        Self { kind: Kind::Interpolated(pl), slope_min, slope_max }
    }

    pub fn value(&self, x: f64) -> f64 {
        match &self.kind {
            Kind::Analytic { value, .. } => value(x),
            Kind::Interpolated(pl) => pl.value(x),
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match &self.kind {
            Kind::Analytic { derivative: Some(d), .. } => d(x),
            Kind::Analytic { value, .. } => {
                let h = 1e-6;
                let lo = (x - h).max(0.0);
                let hi = (x + h).min(1.0);
                (value(hi) - value(lo)) / (hi - lo)
            }
            Kind::Interpolated(pl) => pl.derivative(x),
        }
    }

    pub fn provenance(&self) -> Provenance {
        match self.kind {
            Kind::Analytic { .. } => Provenance::Analytic,
            Kind::Interpolated(_) => Provenance::Interpolated,
        }
    }

    /// Knots of an interpolated function.
    pub fn knots(&self) -> Option<&[f64]> {
        match &self.kind {
            Kind::Interpolated(pl) => Some(pl.knots()),
            Kind::Analytic { .. } => None,
        }
    }

    /// `(min f', max f')` over `[0, 1]`.
    pub fn slope_range(&self) -> (f64, f64) {
        (self.slope_min, self.slope_max)
    }

    /// Absolute tolerance used for boundary equalities.
    pub fn boundary_tol(&self, tol: f64) -> f64 {
        tol * self.value(0.0).abs().max(1.0)
    }
}

/// Piecewise-linear interpolate of a sampled curve, constant outside
/// `[X_(1), X_(N)]`.
pub fn linear_interpolate(curve: &SampledCurve) -> Result<AdmissibleFunction> {
    if curve.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "interpolation needs 2 points, got {}",
            curve.len()
        )));
    }
    Ok(AdmissibleFunction::interpolated(PiecewiseLinear::from_curve(curve)))
}

/// The constraints defining the admissible class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    /// `f(0) > 0`
    PositiveAtZero,
    /// `f(1) = 0`
    VanishesAtOne,
    /// `f' <= 0` on the validation grid
    Decreasing,
    /// `f'(1) = 0`
    FlatAtOne,
    /// `f'(0) > -cot(theta0)`
    SlopeAtZero,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ConstraintCheck {
    pub constraint: Constraint,
    pub measured: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct AdmissibilityReport {
    pub checks: Vec<ConstraintCheck>,
    pub passed: bool,
}

impl AdmissibilityReport {
    pub fn violations(&self) -> impl Iterator<Item = Constraint> + '_ {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.constraint)
    }

    pub fn check(&self, constraint: Constraint) -> &ConstraintCheck {
        self.checks
            .iter()
            .find(|c| c.constraint == constraint)
            .expect("every constraint is checked")
    }
}

/// Checks the five admissibility constraints on a `grid_size`-point grid with
/// the default tolerance.
pub fn check_admissibility(
    f: &AdmissibleFunction,
    theta0: f64,
    grid_size: usize,
) -> Result<AdmissibilityReport> {
    check_admissibility_with_tol(f, theta0, grid_size, ADMISSIBILITY_TOL)
}

pub fn check_admissibility_with_tol(
    f: &AdmissibleFunction,
    theta0: f64,
    grid_size: usize,
    tol: f64,
) -> Result<AdmissibilityReport> {
    if grid_size < 3 {
        return Err(Error::Domain(format!("validation grid of size {grid_size} (need >= 3)")));
    }
    if !(theta0 > 0.0 && theta0 < PI / 2.0) {
        return Err(Error::Domain(format!("theta0 = {theta0} outside (0, pi/2)")));
    }
    let eval = |x: f64, v: f64| if v.is_finite() { Ok(v) } else { Err(Error::Evaluation { x }) };

    let f0 = eval(0.0, f.value(0.0))?;
    let f1 = eval(1.0, f.value(1.0))?;
    let df0 = eval(0.0, f.derivative(0.0))?;
    let df1 = eval(1.0, f.derivative(1.0))?;
    let scale = f0.abs().max(1.0);
    let mut max_slope = f64::NEG_INFINITY;
    let xs: Vec<f64> = (0..grid_size).map(|i| i as f64 / (grid_size - 1) as f64).collect();
    for &x in &xs {
        eval(x, f.value(x))?;
    }
    for &x in &xs {
        max_slope = max_slope.max(eval(x, f.derivative(x))?);
    }
    let slope_floor = -1.0 / theta0.tan();

    let checks = vec![
        ConstraintCheck { constraint: Constraint::PositiveAtZero, measured: f0, passed: f0 > 0.0 },
        ConstraintCheck {
            constraint: Constraint::VanishesAtOne,
            measured: f1,
            passed: f1.abs() <= tol * scale,
        },
        ConstraintCheck {
            constraint: Constraint::Decreasing,
            measured: max_slope,
            passed: max_slope <= tol * scale,
        },
        ConstraintCheck {
            constraint: Constraint::FlatAtOne,
            measured: df1,
            passed: df1.abs() <= tol * scale,
        },
        ConstraintCheck {
            constraint: Constraint::SlopeAtZero,
            measured: df0,
            passed: df0 > slope_floor,
        },
    ];
    let passed = checks.iter().all(|c| c.passed);
    Ok(AdmissibilityReport { checks, passed })
}

/// Largest gap between consecutive design points. The boundary gaps
/// `[0, X_(1)]` and `[X_(N), 1]` are not included.
pub fn max_spacing(grid: &DesignGrid) -> f64 {
    grid.points()
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(0.0, f64::max)
}

/// Tail bound `N (1 - eps)^(N - 1)` on `P(max spacing >= eps)` for uniform
/// order statistics.
pub fn spacing_tail_bound(n: usize, epsilon: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::Domain(format!("spacing bound needs n >= 2, got {n}")));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Domain(format!("epsilon = {epsilon} outside (0, 1)")));
    }
    // log form keeps large n well-behaved
    Ok(n as f64 * ((n - 1) as f64 * (-epsilon).ln_1p()).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SpacingReport {
    pub max_spacing: f64,
    pub epsilon: f64,
    pub tail_bound: f64,
    pub n: usize,
}

pub fn spacing_report(grid: &DesignGrid, epsilon: f64) -> Result<SpacingReport> {
    Ok(SpacingReport {
        max_spacing: max_spacing(grid),
        epsilon,
        tail_bound: spacing_tail_bound(grid.len(), epsilon)?,
        n: grid.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_3;
    use std::f64::consts::FRAC_PI_4;

    fn toy() -> AdmissibleFunction {
        AdmissibleFunction::cosine_bump(2.0)
    }

    #[test]
    fn toy_reference_is_admissible() {
        let report = check_admissibility(&toy(), FRAC_PI_3, 201).unwrap();
        assert!(report.passed, "{report:?}");
        assert_eq!(report.check(Constraint::PositiveAtZero).measured, 4.0);
        assert!(report.check(Constraint::VanishesAtOne).measured.abs() < 1e-15);
    }

    #[test]
    fn linear_function_fails_flat_right_end() {
        let f = AdmissibleFunction::analytic("1-x", |x| 1.0 - x, Some(Arc::new(|_| -1.0)));
        let report = check_admissibility(&f, FRAC_PI_4, 11).unwrap();
        let failed: Vec<_> = report.violations().collect();
        assert_eq!(failed, vec![Constraint::FlatAtOne]);
        assert_eq!(report.check(Constraint::FlatAtOne).measured, -1.0);
    }

    #[test]
    fn increasing_function_fails() {
        let f = AdmissibleFunction::analytic("x", |x| x, Some(Arc::new(|_| 1.0)));
        let report = check_admissibility(&f, FRAC_PI_4, 11).unwrap();
        assert!(!report.passed);
        let failed: Vec<_> = report.violations().collect();
        assert!(failed.contains(&Constraint::VanishesAtOne));
        assert!(failed.contains(&Constraint::Decreasing));
    }

    #[test]
    fn admissibility_reports_non_finite_point() {
        let f = AdmissibleFunction::analytic("bad", |x| if x > 0.4 && x < 0.6 { f64::NAN } else { 1.0 - x }, None);
        match check_admissibility(&f, FRAC_PI_4, 11) {
            Err(Error::Evaluation { x }) => assert!((x - 0.5).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
        assert!(check_admissibility(&toy(), FRAC_PI_4, 2).is_err());
    }

    #[test]
    fn interpolate_midpoint() {
        let grid = DesignGrid::new(vec![0.0, 0.5, 1.0]).unwrap();
        let g = toy();
        let curve = SampledCurve::sample(&g, &grid).unwrap();
        let f = linear_interpolate(&curve).unwrap();
        // g(0) = 4, g(0.5) = 2
        assert!((f.value(0.25) - 3.0).abs() < 1e-15);
        assert_eq!(f.provenance(), Provenance::Interpolated);
        for (&x, &y) in curve.xs().iter().zip(curve.values()) {
            assert_eq!(f.value(x), y);
        }
    }

    #[test]
    fn interpolant_extends_constantly_and_uses_left_limits() {
        let curve = SampledCurve::from_points(&[0.2, 0.6, 0.8], &[3.0, 1.0, 0.0]).unwrap();
        let f = linear_interpolate(&curve).unwrap();
        assert_eq!(f.value(0.0), 3.0);
        assert_eq!(f.value(0.95), 0.0);
        assert_eq!(f.derivative(0.1), 0.0);
        for x in [0.6, 0.7, 0.8] {
            assert!((f.derivative(x) + 5.0).abs() < 1e-12);
        }
        assert_eq!(f.derivative(0.9), 0.0);
        let (lo, hi) = f.slope_range();
        assert!((lo + 5.0).abs() < 1e-12 && hi == 0.0);
    }

    #[test]
    fn single_point_cannot_be_interpolated() {
        let err = SampledCurve::from_points(&[0.3], &[1.0]).unwrap_err();
        assert!(matches!(err, Error::InsufficientData(_)));
    }

    #[test]
    fn duplicates_are_merged() {
        let c = SampledCurve::from_points(&[0.5, 0.1, 0.5, 0.9], &[2.0, 3.0, 4.0, 0.0]).unwrap();
        assert_eq!(c.xs(), &[0.1, 0.5, 0.9]);
        assert_eq!(c.values(), &[3.0, 3.0, 0.0]);
    }

    #[test]
    fn design_grid_validation() {
        assert!(DesignGrid::new(vec![0.2, 1.5]).is_err());
        assert!(DesignGrid::new(vec![0.2, f64::NAN]).is_err());
        assert!(DesignGrid::new(vec![0.2, 0.2]).is_err());
        let g = DesignGrid::new(vec![0.9, 0.1, 0.4]).unwrap();
        assert_eq!(g.points(), &[0.1, 0.4, 0.9]);
        assert_eq!(g.len(), 3);
    }

    #[test]
    fn max_spacing_examples() {
        let g = DesignGrid::new(vec![0.1, 0.4, 0.9]).unwrap();
        assert!((max_spacing(&g) - 0.5).abs() < 1e-15);
        let g = DesignGrid::uniform(11).unwrap();
        assert!((max_spacing(&g) - 0.1).abs() < 1e-12);
        let g = DesignGrid::new(vec![0.5, 0.5 + 1e-9]).unwrap();
        assert!((max_spacing(&g) - 1e-9).abs() < 1e-16);
    }

    #[test]
    fn tail_bound_examples() {
        assert!((spacing_tail_bound(2, 0.5).unwrap() - 1.0).abs() < 1e-15);
        // 1000 * 0.98^999, 50-digit reference
        let b = spacing_tail_bound(1000, 0.02).unwrap();
        assert!((b - 1.717_313_629_812_199_6e-6).abs() < 1e-17);
        // 100 * 0.9^99
        let b = spacing_tail_bound(100, 0.1).unwrap();
        assert!((b - 2.951_266_543_065_275e-3).abs() < 1e-15);
        assert!((spacing_tail_bound(10, 1e-12).unwrap() - 10.0).abs() < 1e-9);
        assert!(spacing_tail_bound(10, 0.0).is_err());
        assert!(spacing_tail_bound(10, 1.0).is_err());
        assert!(spacing_tail_bound(1, 0.5).is_err());
    }

    #[test]
    fn spacing_report_fields() {
        let g = DesignGrid::uniform(5).unwrap();
        let r = spacing_report(&g, 0.3).unwrap();
        assert_eq!(r.n, 5);
        assert!((r.max_spacing - 0.25).abs() < 1e-15);
        assert!(r.tail_bound >= 0.0 && r.tail_bound <= 5.0);
    }
}

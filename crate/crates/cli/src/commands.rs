use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use simcurve::io::{self, RegistrationRecord};
use simcurve::lab::{is_decreasing_allowing, GapRow, RmseRow, SpacingRow};
use simcurve::pipeline::synth::{generate_loads, SectionLaws};
use simcurve::pipeline::ErrorSummary;
use simcurve::*;

use crate::config::{Check, RunConfig};

/// Thresholds the CLT report is judged against.
const CLT_FROBENIUS_TOL: f64 = 0.2;
const CLT_SKEW_TOL: f64 = 0.3;
const CLT_KURTOSIS_TOL: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimulateKind {
    Toy,
    Loads,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ToyTruth {
    pub spec: ToySpec,
    pub curves: Vec<TrueParams>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TrueParams {
    pub curve_id: String,
    pub theta: f64,
    pub lambda: f64,
    pub clamped: bool,
}

/// Station axis and section breakpoints of a sectioned dataset.
#[derive(Debug, Serialize, Deserialize)]
pub struct Layout {
    pub station_axis: Vec<f64>,
    pub breakpoints: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LoadsTruth {
    pub spec: simcurve::pipeline::synth::LoadsSpec,
    pub laws: Vec<SectionLaws>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RegistrationOutput {
    pub reference: String,
    pub results: Vec<RegistrationRecord>,
    pub failures: Vec<CurveFailure>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CurveFailure {
    pub curve_id: String,
    pub error: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ConsistencyOutput {
    pub rows: Vec<RmseRow>,
    /// `RMSE(n[k+1]) / RMSE(n[k])` for theta and lambda; `None` when the
    /// smaller sample size already has zero error.
    pub ratios: Vec<[Option<f64>; 2]>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CltOutput {
    pub report: MonteCarloReport,
    pub frobenius_tol: f64,
    pub skew_tol: f64,
    pub kurtosis_tol: f64,
    pub passed: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct GapOutput {
    pub rows: Vec<GapRow>,
    /// Scaled gaps decrease with at most one inversion.
    pub decreasing: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SpacingOutput {
    pub rows: Vec<SpacingRow>,
    pub passed: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ModelsOutput {
    pub output_names: Vec<String>,
    pub input_names: Vec<String>,
    pub models: Vec<SparseLinearModel>,
}

fn curve_id(i: usize) -> String {
    format!("c{i:04}")
}

fn ratio(a: f64, b: f64) -> Option<f64> {
    (b > 0.0).then(|| a / b)
}

fn out(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

pub fn simulate(cfg: &RunConfig, kind: SimulateKind, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    match kind {
        SimulateKind::Toy => {
            let spec = &cfg.simulate.toy;
            let data = generate_toy(spec)?;
            let curves: Vec<(String, SampledCurve)> =
                data.curves.iter().enumerate().map(|(i, c)| (curve_id(i), c.clone())).collect();
            io::write_curves_long(&out(dir, "curves.csv"), &curves)?;
            let truth = ToyTruth {
                spec: spec.clone(),
                curves: data
                    .true_params
                    .iter()
                    .zip(&data.clamped)
                    .enumerate()
                    .map(|(i, (a, &clamped))| TrueParams { curve_id: curve_id(i), theta: a.theta, lambda: a.lambda, clamped })
                    .collect(),
            };
            io::write_json(&out(dir, "truth.json"), &truth)?;
            if spec.shared_design {
                let reference = SampledCurve::sample(&data.reference, data.curves[0].grid())?;
                io::write_curves_long(&out(dir, "reference.csv"), &[("reference".to_string(), reference)])?;
            }
            log::info!("wrote {} toy curves of {} points to {}", spec.n_curves, spec.n_points, dir.display());
        }
        SimulateKind::Loads => {
            let spec = &cfg.simulate.loads;
            let data = generate_loads(spec)?;
            io::write_sectioned(&out(dir, "loads_inputs.csv"), &out(dir, "loads_curves.csv"), &data.set)?;
            let layout = Layout { station_axis: data.set.station_axis.clone(), breakpoints: data.set.breakpoints.clone() };
            io::write_json(&out(dir, "loads_layout.json"), &layout)?;
            io::write_json(&out(dir, "loads_truth.json"), &LoadsTruth { spec: spec.clone(), laws: data.laws.clone() })?;
            let n_sections = data.set.breakpoints.len() + 1;
            let rows: Vec<f64> = data.truth.iter().flat_map(FeatureVector::to_row).collect();
            let features = DMatrix::from_row_slice(data.truth.len(), 4 * n_sections, &rows);
            io::write_wide(&out(dir, "loads_features.csv"), &data.set.curve_ids, &FeatureVector::names(n_sections), &features)?;
            log::info!("wrote {} loads curves of {} stations to {}", spec.n_curves, spec.n_stations, dir.display());
        }
    }
    Ok(())
}

enum Reference {
    Analytic(AdmissibleFunction),
    Sampled(SampledCurve),
}

fn load_reference(name: &str) -> Result<Reference> {
    match name {
        "toy" => Ok(Reference::Analytic(ToyReference::Rescaled.function())),
        "toy-raw" => Ok(Reference::Analytic(ToyReference::Raw.function())),
        path => {
            let p = Path::new(path);
            if !p.is_file() {
                return Err(Error::Config(format!(
                    "reference {path:?} is neither a known name (toy, toy-raw) nor an existing file"
                )));
            }
            let mut curves = io::read_curves_long(p)?;
            if curves.len() != 1 {
                return Err(Error::Data(format!("{path}: expected one reference curve, found {}", curves.len())));
            }
            Ok(Reference::Sampled(curves.remove(0).1))
        }
    }
}

fn register_one(
    target: &SampledCurve,
    reference: &Reference,
    bounds: ParamBox,
    solver: SolverOptions,
) -> Result<(RegistrationResult, SampledCurve)> {
    let (result, problem) = match reference {
        Reference::Analytic(f) => {
            let problem = RegistrationProblem::new(target.clone(), f.clone(), bounds, solver)?;
            (problem.estimate()?, problem)
        }
        Reference::Sampled(s) => {
            let result = estimate_interpolated(target, s, bounds, solver)?;
            (result, RegistrationProblem::new(target.clone(), linear_interpolate(s)?, bounds, solver)?)
        }
    };
    let fitted = SampledCurve::new(target.grid().clone(), problem.fitted_values(result.alpha_hat)?)?;
    Ok((result, fitted))
}

pub fn register(cfg: &RunConfig, dir: &Path) -> Result<()> {
    let rc = &cfg.register;
    let input = rc.input.as_ref().ok_or_else(|| Error::Config("register needs an input curves file".into()))?;
    let name = rc.reference.as_deref().ok_or_else(|| Error::Config("register needs a reference".into()))?;
    let reference = load_reference(name)?;
    let curves = io::read_curves_long(input)?;
    std::fs::create_dir_all(dir)?;

    let outcomes: Vec<Result<(RegistrationResult, SampledCurve)>> =
        curves.par_iter().map(|(_, c)| register_one(c, &reference, rc.bounds, rc.solver)).collect();
    let mut results = Vec::new();
    let mut fitted = Vec::new();
    let mut failures = Vec::new();
    for ((id, _), outcome) in curves.iter().zip(outcomes) {
        match outcome {
            Ok((r, f)) => {
                results.push(RegistrationRecord::new(id.clone(), &r));
                fitted.push((id.clone(), f));
            }
            // bad input aborts the run, numerical trouble only flags the curve
            Err(e) if e.exit_code() != 4 => return Err(e),
            Err(e) => {
                log::warn!("curve {id}: {e}");
                failures.push(CurveFailure { curve_id: id.clone(), error: e.to_string() });
            }
        }
    }
    if results.is_empty() {
        return Err(Error::NonConvergence(format!("all {} registrations failed", curves.len())));
    }
    io::write_json(&out(dir, "registration.json"), &RegistrationOutput { reference: name.to_string(), results, failures })?;
    io::write_curves_long(&out(dir, "fitted.csv"), &fitted)?;
    log::info!("registered {} curves against {name}", fitted.len());
    Ok(())
}

pub fn validate(cfg: &RunConfig, dir: &Path) -> Result<()> {
    let v = &cfg.validate;
    std::fs::create_dir_all(dir)?;
    for check in &v.checks {
        match check {
            Check::Sweep => {
                let rows = run_consistency_sweep(&v.mc, &v.sweep_n, v.sweep_replicates)?;
                let ratios = rows
                    .windows(2)
                    .map(|w| [ratio(w[1].rmse_theta, w[0].rmse_theta), ratio(w[1].rmse_lambda, w[0].rmse_lambda)])
                    .collect();
                let table: Vec<Vec<f64>> = rows
                    .iter()
                    .map(|r| vec![r.n as f64, r.rmse_theta, r.rmse_lambda, r.replicates as f64, r.failures as f64])
                    .collect();
                io::write_table(&out(dir, "consistency.csv"), &["n", "rmse_theta", "rmse_lambda", "replicates", "failures"], &table)?;
                io::write_json(&out(dir, "consistency.json"), &ConsistencyOutput { rows, ratios })?;
            }
            Check::Clt => {
                let report = run_clt_check(&v.mc, v.clt_n, v.clt_replicates)?;
                let passed = report.passes(CLT_FROBENIUS_TOL, CLT_SKEW_TOL, CLT_KURTOSIS_TOL);
                if !passed {
                    log::warn!("CLT check outside tolerance: {:?}", report.frobenius_rel_err);
                }
                let c = report.empirical_cov;
                let g = report.gamma_reference;
                let table = vec![
                    vec![0.0, c[0][0], c[0][1], c[1][1], report.skewness[0], report.excess_kurtosis[0]],
                    vec![1.0, g[0][0], g[0][1], g[1][1], report.skewness[1], report.excess_kurtosis[1]],
                ];
                io::write_table(&out(dir, "clt.csv"), &["row", "c00", "c01", "c11", "skewness", "excess_kurtosis"], &table)?;
                let output = CltOutput {
                    report,
                    frobenius_tol: CLT_FROBENIUS_TOL,
                    skew_tol: CLT_SKEW_TOL,
                    kurtosis_tol: CLT_KURTOSIS_TOL,
                    passed,
                };
                io::write_json(&out(dir, "clt.json"), &output)?;
            }
            Check::Gap => {
                let rows = run_interp_gap_check(&v.mc, &v.gap_n, v.gap_replicates)?;
                let gaps: Vec<f64> = rows.iter().map(|r| r.mean_scaled_gap).collect();
                let table: Vec<Vec<f64>> =
                    rows.iter().map(|r| vec![r.n as f64, r.mean_scaled_gap, r.mean_max_spacing, r.failures as f64]).collect();
                io::write_table(&out(dir, "interp_gap.csv"), &["n", "mean_scaled_gap", "mean_max_spacing", "failures"], &table)?;
                io::write_json(&out(dir, "interp_gap.json"), &GapOutput { rows, decreasing: is_decreasing_allowing(&gaps, 1) })?;
            }
            Check::Spacing => {
                let rows = run_spacing_check(&v.spacing_n, &v.spacing_eps, v.spacing_replicates, v.mc.seed)?;
                let table: Vec<Vec<f64>> = rows
                    .iter()
                    .map(|r| vec![r.n as f64, r.epsilon, r.frequency, r.bound, r.slack, f64::from(u8::from(r.passed))])
                    .collect();
                io::write_table(&out(dir, "spacing.csv"), &["n", "epsilon", "frequency", "bound", "slack", "passed"], &table)?;
                let passed = rows.iter().all(|r| r.passed);
                io::write_json(&out(dir, "spacing.json"), &SpacingOutput { rows, passed })?;
            }
        }
        log::info!("{check:?} check written to {}", dir.display());
    }
    Ok(())
}

fn load_sectioned(cfg: &RunConfig) -> Result<SectionedCurveSet> {
    let p = &cfg.pipeline;
    match (&p.inputs, &p.curves, &p.layout) {
        (Some(inputs), Some(curves), Some(layout)) => {
            let layout: Layout = io::read_json(layout)?;
            io::read_sectioned(inputs, curves, layout.station_axis, layout.breakpoints)
        }
        (None, None, None) => {
            log::info!("no dataset given, generating the synthetic loads analog");
            Ok(generate_loads(&cfg.simulate.loads)?.set)
        }
        _ => Err(Error::Config("pipeline needs inputs, curves and layout together".into())),
    }
}

pub fn pipeline(cfg: &RunConfig, dir: &Path) -> Result<()> {
    let set = load_sectioned(cfg)?;
    let trained = train_pipeline(&set, &cfg.pipeline.settings)?;
    std::fs::create_dir_all(dir)?;
    let models = ModelsOutput {
        output_names: trained.output_names.clone(),
        input_names: set.input_names.clone(),
        models: trained.models.clone(),
    };
    io::write_json(&out(dir, "models.json"), &models)?;
    io::write_json(&out(dir, "report.json"), &trained.report)?;
    let per_curve = &trained.report.per_curve;
    let ids: Vec<String> = per_curve.iter().map(|c| c.curve_id.clone()).collect();
    let values = DMatrix::from_fn(per_curve.len(), 2, |i, j| match j {
        0 => per_curve[i].error,
        _ => per_curve[i].oracle_error.unwrap_or(f64::NAN),
    });
    io::write_wide(&out(dir, "per_curve.csv"), &ids, &["error".into(), "oracle_error".into()], &values)?;
    log::info!(
        "pipeline: {} train / {} test curves, mean test error {:.4}",
        trained.report.n_train,
        trained.report.n_test,
        trained.report.summary.mean_error
    );
    Ok(())
}

fn summary_table(s: &ErrorSummary) -> String {
    format!(
        "G(1%)\tG(2%)\tG(5%)\tG(10%)\tmean_error\n{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.6}\n",
        s.g1, s.g2, s.g5, s.g10, s.mean_error
    )
}

/// Renders whatever result files are present in `dir`.
pub fn report(dir: &Path) -> Result<String> {
    let mut text = String::new();
    let found = |name: &str| Some(out(dir, name)).filter(|p| p.is_file());
    if let Some(p) = found("report.json") {
        let r: PipelineReport = io::read_json(&p)?;
        let _ = writeln!(text, "pipeline ({} train, {} test curves)", r.n_train, r.n_test);
        text.push_str(&summary_table(&r.summary));
        let _ = writeln!(text, "oracle mean error {:.6}, flagged curves {}", r.oracle_mean_error, r.flagged_curves.len());
    }
    if let Some(p) = found("registration.json") {
        let r: RegistrationOutput = io::read_json(&p)?;
        let _ = writeln!(text, "registration against {}: {} curves, {} failures", r.reference, r.results.len(), r.failures.len());
        let _ = writeln!(text, "curve_id\ttheta\tlambda\tcontrast");
        for rec in &r.results {
            let _ = writeln!(text, "{}\t{:.6}\t{:.6}\t{:.3e}", rec.curve_id, rec.theta_hat, rec.lambda_hat, rec.contrast);
        }
    }
    if let Some(p) = found("consistency.json") {
        let c: ConsistencyOutput = io::read_json(&p)?;
        let _ = writeln!(text, "consistency\nn\trmse_theta\trmse_lambda");
        for r in &c.rows {
            let _ = writeln!(text, "{}\t{:.4e}\t{:.4e}", r.n, r.rmse_theta, r.rmse_lambda);
        }
        for r in &c.ratios {
            let show = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.3}"));
            let _ = writeln!(text, "ratio\t{}\t{}", show(r[0]), show(r[1]));
        }
    }
    if let Some(p) = found("clt.json") {
        let c: CltOutput = io::read_json(&p)?;
        let _ = writeln!(
            text,
            "clt n={} replicates={}: frobenius {:?}, skewness {:.3?}, excess kurtosis {:.3?}, passed {}",
            c.report.n, c.report.replicates, c.report.frobenius_rel_err, c.report.skewness, c.report.excess_kurtosis, c.passed
        );
    }
    if let Some(p) = found("interp_gap.json") {
        let g: GapOutput = io::read_json(&p)?;
        let _ = writeln!(text, "interpolation gap\nn\tmean_scaled_gap");
        for r in &g.rows {
            let _ = writeln!(text, "{}\t{:.4e}", r.n, r.mean_scaled_gap);
        }
        let _ = writeln!(text, "decreasing {}", g.decreasing);
    }
    if let Some(p) = found("spacing.json") {
        let s: SpacingOutput = io::read_json(&p)?;
        let _ = writeln!(text, "spacing\nn\tepsilon\tfrequency\tbound\tpassed");
        for r in &s.rows {
            let _ = writeln!(text, "{}\t{}\t{:.4e}\t{:.4e}\t{}", r.n, r.epsilon, r.frequency, r.bound, r.passed);
        }
    }
    if text.is_empty() {
        return Err(Error::Data(format!("no result files in {}", dir.display())));
    }
    Ok(text)
}


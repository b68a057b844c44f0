//! Sectioned curve families: deformation features per section, sparse
//! linear prediction of the features from configuration inputs, and
//! reconstruction of predicted curves.

pub mod features;
pub mod oga;
pub mod sections;
pub mod synth;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::registration::SolverOptions;
use crate::stats::substream;
use crate::transform::ParamBox;

pub use features::{
    curve_features, extract_features, reconstruct_curve, CurveFeatures, FeatureExtraction, FeatureVector,
    ReferencePolicy, SectionFeatures, SectionReferences,
};
pub use oga::{oga_fit, OgaOptions, SparseLinearModel};
pub use sections::{normalize_section, split_sections, Section, SectionNormalization, SectionedCurveSet};

/// Thresholds of the summary error distribution.
pub const REPORT_THRESHOLDS: [f64; 4] = [0.01, 0.02, 0.05, 0.10];

/// Fewest curves a training run accepts.
pub const MIN_CURVES: usize = 40;

/// Relative L2 distance `||predicted - actual|| / ||actual||`.
pub fn error_rate(predicted: &[f64], actual: &[f64]) -> Result<f64> {
    if predicted.len() != actual.len() {
        return Err(Error::Data(format!(
            "{} predicted stations against {} actual",
            predicted.len(),
            actual.len()
        )));
    }
    let den: f64 = actual.iter().map(|y| y * y).sum();
    if den == 0.0 {
        return Err(Error::UndefinedMetric);
    }
    let num: f64 = predicted.iter().zip(actual).map(|(p, y)| (p - y) * (p - y)).sum();
    Ok((num / den).sqrt())
}

/// Fraction of `errors` at or below each threshold.
pub fn empirical_cdf(errors: &[f64], thresholds: &[f64]) -> Result<Vec<f64>> {
    if errors.is_empty() {
        return Err(Error::InsufficientData("empty error list".into()));
    }
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(thresholds.iter().map(|&a| sorted.partition_point(|&e| e <= a) as f64 / n).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub train_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
    pub oga: OgaOptions,
    pub bounds: ParamBox,
    pub solver: SolverOptions,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            train_fraction: 0.75,
            test_fraction: 0.25,
            seed: 0,
            oga: OgaOptions::default(),
            bounds: ParamBox::new(std::f64::consts::FRAC_PI_4, std::f64::consts::FRAC_PI_4, 0.05, 20.0)
                .expect("valid default box"),
            solver: SolverOptions::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.bounds.validate()?;
        let (a, b) = (self.train_fraction, self.test_fraction);
        if !(a > 0.0 && a < 1.0 && b > 0.0 && b < 1.0) {
            return Err(Error::Config(format!("split fractions ({a}, {b}) must lie in (0, 1)")));
        }
        if (a + b - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split fractions sum to {}", a + b)));
        }
        Ok(())
    }
}

/// Error distribution summary in the usual reporting layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    #[serde(rename = "G(1%)")]
    pub g1: f64,
    #[serde(rename = "G(2%)")]
    pub g2: f64,
    #[serde(rename = "G(5%)")]
    pub g5: f64,
    #[serde(rename = "G(10%)")]
    pub g10: f64,
    pub mean_error: f64,
}

impl ErrorSummary {
    pub fn from_errors(errors: &[f64]) -> Result<Self> {
        let g = empirical_cdf(errors, &REPORT_THRESHOLDS)?;
        Ok(Self { g1: g[0], g2: g[1], g5: g[2], g10: g[3], mean_error: errors.iter().sum::<f64>() / errors.len() as f64 })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveError {
    pub curve_id: String,
    /// Error of the curve rebuilt from predicted features.
    pub error: f64,
    /// Error of the curve rebuilt from its own fitted features.
    pub oracle_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub summary: ErrorSummary,
    pub oracle_mean_error: f64,
    pub n_train: usize,
    pub n_test: usize,
    /// Largest feature round-trip error over training curves.
    pub train_roundtrip_max_error: f64,
    pub train_roundtrip_mean_error: f64,
    /// Curves whose registration failed.
    pub flagged_curves: Vec<String>,
    pub reference_projection_shift: Vec<f64>,
    pub output_names: Vec<String>,
    pub model_sizes: Vec<usize>,
    pub per_curve: Vec<CurveError>,
    /// `(threshold, G)` on a fine grid.
    pub cdf_grid: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct TrainedPipeline {
    pub references: SectionReferences,
    pub output_names: Vec<String>,
    pub models: Vec<SparseLinearModel>,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub report: PipelineReport,
}

impl TrainedPipeline {
    pub fn predict_features(&self, inputs: &[f64]) -> Result<FeatureVector> {
        let row: Vec<f64> = self.models.iter().map(|m| m.predict_row(inputs)).collect();
        FeatureVector::from_row(&row)
    }
}

/// Seeded train/test split of `n` items.
pub fn split_indices(n: usize, test_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut substream(seed, 0));
    let n_test = (n as f64 * test_fraction).round() as usize;
    let mut test = idx.split_off(n - n_test.min(n));
    idx.sort_unstable();
    test.sort_unstable();
    (idx, test)
}

/// Fits one sparse model per feature on the training curves and scores
/// curves rebuilt from predicted features on the test curves.
pub fn train_pipeline(set: &SectionedCurveSet, config: &PipelineConfig) -> Result<TrainedPipeline> {
    config.validate()?;
    set.validate()?;
    if set.n_curves() < MIN_CURVES {
        return Err(Error::InsufficientData(format!("{} curves (need >= {MIN_CURVES})", set.n_curves())));
    }
    let (train, test) = split_indices(set.n_curves(), config.test_fraction, config.seed);
    if test.is_empty() || train.is_empty() {
        return Err(Error::Config("split leaves an empty train or test set".into()));
    }

    let references = SectionReferences::from_curves(set, &train)?;
    let extraction = extract_features(set, ReferencePolicy::Fixed(references.clone()), config.bounds, config.solver)?;
    let n_sections = references.sections.len();
    let output_names = FeatureVector::names(n_sections);
    let mut flagged_curves: Vec<String> = extraction.flagged().iter().map(|&i| set.curve_ids[i].clone()).collect();

    // training rows whose features are available
    let fitted: Vec<(usize, Vec<f64>)> = train
        .iter()
        .filter_map(|&i| extraction.curves[i].as_ref().ok().map(|c| (i, c.features.to_row())))
        .collect();
    if fitted.len() <= config.oga.cv_folds {
        return Err(Error::InsufficientData(format!("{} registered training curves", fitted.len())));
    }
    let rows: Vec<usize> = fitted.iter().map(|(i, _)| *i).collect();
    let x_train = set.inputs.select_rows(&rows);
    let models = (0..output_names.len())
        .into_par_iter()
        .map(|k| {
            let y: Vec<f64> = fitted.iter().map(|(_, f)| f[k]).collect();
            oga_fit(&x_train, &y, config.oga)
        })
        .collect::<Result<Vec<_>>>()?;

    let roundtrip: Vec<f64> = fitted
        .par_iter()
        .map(|(i, f)| {
            let rebuilt = reconstruct_curve(&FeatureVector::from_row(f)?, &references, &config.bounds)?;
            error_rate(&rebuilt, &set.curve(*i))
        })
        .collect::<Result<_>>()?;

    let per_curve: Vec<CurveError> = test
        .par_iter()
        .map(|&i| {
            let inputs: Vec<f64> = set.inputs.row(i).iter().copied().collect();
            let row: Vec<f64> = models.iter().map(|m| m.predict_row(&inputs)).collect();
            let actual = set.curve(i);
            let predicted = reconstruct_curve(&FeatureVector::from_row(&row)?, &references, &config.bounds)?;
            let oracle_error = match &extraction.curves[i] {
                Ok(c) => Some(error_rate(&reconstruct_curve(&c.features, &references, &config.bounds)?, &actual)?),
                Err(_) => None,
            };
            Ok(CurveError { curve_id: set.curve_ids[i].clone(), error: error_rate(&predicted, &actual)?, oracle_error })
        })
        .collect::<Result<_>>()?;

    let errors: Vec<f64> = per_curve.iter().map(|c| c.error).collect();
    let oracle: Vec<f64> = per_curve.iter().filter_map(|c| c.oracle_error).collect();
    let grid: Vec<f64> = (0..=200).map(|k| 0.001 * k as f64).collect();
    let cdf_grid = grid.iter().copied().zip(empirical_cdf(&errors, &grid)?).collect();
    flagged_curves.sort();

    let report = PipelineReport {
        summary: ErrorSummary::from_errors(&errors)?,
        oracle_mean_error: if oracle.is_empty() { f64::NAN } else { oracle.iter().sum::<f64>() / oracle.len() as f64 },
        n_train: train.len(),
        n_test: test.len(),
        train_roundtrip_max_error: roundtrip.iter().copied().fold(0.0, f64::max),
        train_roundtrip_mean_error: roundtrip.iter().sum::<f64>() / roundtrip.len() as f64,
        flagged_curves,
        reference_projection_shift: references.references.iter().map(|r| r.projection_shift).collect(),
        output_names: output_names.clone(),
        model_sizes: models.iter().map(|m| m.cv_size).collect(),
        per_curve,
        cdf_grid,
    };
    Ok(TrainedPipeline { references, output_names, models, train, test, report })
}

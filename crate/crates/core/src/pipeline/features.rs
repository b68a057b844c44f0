//! Per-section deformation features and curve reconstruction from them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sections::{mean_reference, normalize_section, split_sections, Section, SectionNormalization, SectionReference, SectionedCurveSet};
use crate::curve::linear_interpolate;
use crate::error::{Error, Result};
use crate::lab::model_curve;
use crate::registration::{estimate_interpolated, SolverOptions};
use crate::transform::{ParamBox, TransformParams};

/// Deformation and range of one section of one curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionFeatures {
    pub theta: f64,
    pub lambda: f64,
    pub min: f64,
    pub max: f64,
}

/// Features of every section of one curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub sections: Vec<SectionFeatures>,
}

impl FeatureVector {
    /// Output names in row order for `n_sections` sections.
    pub fn names(n_sections: usize) -> Vec<String> {
        ["theta", "lambda", "min", "max"]
            .iter()
            .flat_map(|k| (1..=n_sections).map(move |s| format!("{k}{s}")))
            .collect()
    }

    /// Flattens to all angles, then scales, then minima, then maxima.
    pub fn to_row(&self) -> Vec<f64> {
        let s = &self.sections;
        s.iter()
            .map(|f| f.theta)
            .chain(s.iter().map(|f| f.lambda))
            .chain(s.iter().map(|f| f.min))
            .chain(s.iter().map(|f| f.max))
            .collect()
    }

    pub fn from_row(row: &[f64]) -> Result<Self> {
        if row.is_empty() || row.len() % 4 != 0 {
            return Err(Error::Data(format!("feature row of length {}", row.len())));
        }
        let k = row.len() / 4;
        Ok(Self {
            sections: (0..k)
                .map(|s| SectionFeatures { theta: row[s], lambda: row[k + s], min: row[2 * k + s], max: row[3 * k + s] })
                .collect(),
        })
    }
}

/// Section layout and references shared by all curves of a family.
#[derive(Debug, Clone, PartialEq)]
pub struct SectionReferences {
    pub sections: Vec<Section>,
    pub references: Vec<SectionReference>,
}

impl SectionReferences {
    /// Mean-and-project references built from the curves in `rows`.
    pub fn from_curves(set: &SectionedCurveSet, rows: &[usize]) -> Result<Self> {
        let sections = split_sections(set)?;
        if rows.is_empty() {
            return Err(Error::InsufficientData("no curves for the section references".into()));
        }
        let references = sections
            .iter()
            .map(|sec| {
                let normalized = rows
                    .iter()
                    .map(|&i| normalize_section(sec, sec.slice(&set.curve(i)), i))
                    .collect::<Result<Vec<_>>>()?;
                let r = mean_reference(&normalized)?;
                if r.projection_shift > 0.0 {
                    log::info!("section {}: reference projection moved values by {:.3e}", sec.index, r.projection_shift);
                }
                Ok(r)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { sections, references })
    }
}

#[derive(Debug, Clone)]
pub enum ReferencePolicy {
    /// Pointwise mean of all normalized curves, projected to be admissible.
    MeanProjected,
    Fixed(SectionReferences),
}

/// Registration diagnostics for one section of one curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SectionFit {
    pub contrast: f64,
    pub converged: bool,
    pub on_boundary: bool,
    pub normalization: SectionNormalization,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveFeatures {
    pub features: FeatureVector,
    pub fits: Vec<SectionFit>,
}

/// Outcome for one curve; failures keep their reason.
pub type CurveOutcome = std::result::Result<CurveFeatures, String>;

#[derive(Debug, Clone)]
pub struct FeatureExtraction {
    pub references: SectionReferences,
    pub curves: Vec<CurveOutcome>,
}

impl FeatureExtraction {
    /// Indices of curves whose registration failed.
    pub fn flagged(&self) -> Vec<usize> {
        self.curves.iter().enumerate().filter(|(_, c)| c.is_err()).map(|(i, _)| i).collect()
    }
}

/// Registers every section of curve `i` against its reference.
pub fn curve_features(
    set: &SectionedCurveSet,
    i: usize,
    refs: &SectionReferences,
    bounds: ParamBox,
    solver: SolverOptions,
) -> Result<CurveFeatures> {
    let row = set.curve(i);
    let mut sections = Vec::with_capacity(refs.sections.len());
    let mut fits = Vec::with_capacity(refs.sections.len());
    for (sec, reference) in refs.sections.iter().zip(&refs.references) {
        let (target, normalization) = normalize_section(sec, sec.slice(&row), i)?;
        if normalization.flipped != reference.flipped {
            log::warn!("curve {i} section {}: orientation differs from the section reference", sec.index);
        }
        let fit = estimate_interpolated(&target, &reference.samples, bounds, solver)?;
        sections.push(SectionFeatures {
            theta: fit.alpha_hat.theta,
            lambda: fit.alpha_hat.lambda,
            min: normalization.y_min,
            max: normalization.y_max,
        });
        fits.push(SectionFit {
            contrast: fit.contrast_value,
            converged: fit.converged,
            on_boundary: fit.on_boundary,
            normalization,
        });
    }
    Ok(CurveFeatures { features: FeatureVector { sections }, fits })
}

/// Deformation features of every curve, in parallel over curves.
pub fn extract_features(
    set: &SectionedCurveSet,
    policy: ReferencePolicy,
    bounds: ParamBox,
    solver: SolverOptions,
) -> Result<FeatureExtraction> {
    let references = match policy {
        ReferencePolicy::MeanProjected => {
            SectionReferences::from_curves(set, &(0..set.n_curves()).collect::<Vec<_>>())?
        }
        ReferencePolicy::Fixed(r) => r,
    };
    let curves = (0..set.n_curves())
        .into_par_iter()
        .map(|i| {
            curve_features(set, i, &references, bounds, solver).map_err(|e| {
                log::warn!("curve {}: feature extraction failed: {e}", set.curve_ids[i]);
                e.to_string()
            })
        })
        .collect();
    Ok(FeatureExtraction { references, curves })
}

/// Rebuilds a full-station curve from its features.
///
/// Parameters outside `bounds` are clamped with a warning.
pub fn reconstruct_curve(features: &FeatureVector, refs: &SectionReferences, bounds: &ParamBox) -> Result<Vec<f64>> {
    if features.sections.len() != refs.sections.len() {
        return Err(Error::Data(format!(
            "{} feature sections for {} reference sections",
            features.sections.len(),
            refs.sections.len()
        )));
    }
    let mut out = Vec::new();
    for ((f, sec), reference) in features.sections.iter().zip(&refs.sections).zip(&refs.references) {
        let raw = TransformParams::new(f.theta, f.lambda);
        let alpha = bounds.clamp(raw);
        if alpha != raw {
            log::warn!("section {}: features {raw:?} clamped to {alpha:?}", sec.index);
        }
        let g = linear_interpolate(&reference.samples)?;
        let normalized = model_curve(&g, alpha, &sec.grid)?;
        let norm = SectionNormalization {
            x_range: (sec.stations[0], sec.stations[sec.len() - 1]),
            y_min: f.min,
            y_max: f.max,
            flipped: reference.flipped,
        };
        out.extend(norm.denormalize(normalized.values()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{AdmissibleFunction, DesignGrid};
    use nalgebra::DMatrix;

    fn shape(u: f64) -> f64 {
        (1.0 - u) * (1.0 - u)
    }

    /// Curves on two sections whose normalized parts are deformations of
    /// `shape` with the given parameters.
    fn family(params: &[(f64, f64)]) -> SectionedCurveSet {
        let n = 20;
        let axis: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let g = AdmissibleFunction::analytic("shape", shape, None);
        let left = DesignGrid::uniform(8).unwrap();
        let right = DesignGrid::uniform(12).unwrap();
        let rows: Vec<Vec<f64>> = params
            .iter()
            .map(|&(theta, _)| {
                let lambda = 1.0 / (theta.cos() - theta.sin());
                let a = TransformParams::new(theta, lambda);
                let l = model_curve(&g, a, &left).unwrap();
                let r = model_curve(&g, a, &right).unwrap();
                l.values().iter().map(|v| 10.0 + 5.0 * v).chain(r.values().iter().map(|v| 1.0 + 3.0 * v)).collect()
            })
            .collect();
        SectionedCurveSet {
            station_axis: axis,
            breakpoints: vec![7],
            curves: DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]),
            inputs: DMatrix::zeros(rows.len(), 1),
            input_names: vec!["x".into()],
            curve_ids: (0..rows.len()).map(|i| i.to_string()).collect(),
        }
    }

    #[test]
    fn feature_row_order() {
        let names = FeatureVector::names(3);
        assert_eq!(names[0], "theta1");
        assert_eq!(names[3], "lambda1");
        assert_eq!(names[11], "max3");
        let fv = FeatureVector {
            sections: (0..3).map(|s| SectionFeatures { theta: s as f64, lambda: 10.0, min: 20.0, max: 30.0 }).collect(),
        };
        let row = fv.to_row();
        assert_eq!(row.len(), 12);
        assert_eq!(&row[..3], &[0.0, 1.0, 2.0]);
        assert_eq!(FeatureVector::from_row(&row).unwrap(), fv);
    }

    #[test]
    fn curve_equal_to_reference_gets_identity_features() {
        let set = family(&[(-0.2, 0.0)]);
        let ext = extract_features(&set, ReferencePolicy::MeanProjected, ParamBox::new(0.8, 0.8, 0.05, 20.0).unwrap(), SolverOptions::default()).unwrap();
        let f = &ext.curves[0].as_ref().unwrap().features;
        for s in &f.sections {
            assert!(s.theta.abs() < 1e-6 && (s.lambda - 1.0).abs() < 1e-6, "{s:?}");
        }
        assert_eq!((f.sections[0].min, f.sections[0].max), (10.0, 15.0));
    }

    #[test]
    fn reference_reconstructs_exactly() {
        let set = family(&[(-0.3, 0.0), (-0.1, 0.0), (-0.2, 0.0)]);
        let bounds = ParamBox::new(0.8, 0.8, 0.05, 20.0).unwrap();
        let refs = SectionReferences::from_curves(&set, &[0, 1, 2]).unwrap();
        let fv = FeatureVector {
            sections: vec![
                SectionFeatures { theta: 0.0, lambda: 1.0, min: 0.0, max: 1.0 },
                SectionFeatures { theta: 0.0, lambda: 1.0, min: 2.0, max: 4.0 },
            ],
        };
        let c = reconstruct_curve(&fv, &refs, &bounds).unwrap();
        let r0 = refs.references[0].samples.values();
        let r1 = refs.references[1].samples.values();
        for (a, b) in c[..8].iter().zip(r0) {
            assert!((a - b).abs() < 1e-14);
        }
        for (a, b) in c[8..].iter().zip(r1) {
            assert!((a - (2.0 + 2.0 * b)).abs() < 1e-14);
        }
    }

    #[test]
    fn round_trip_through_features() {
        let params: Vec<(f64, f64)> = (0..9).map(|k| (-0.3 + 0.025 * k as f64, 0.0)).collect();
        let set = family(&params);
        let bounds = ParamBox::new(0.8, 0.8, 0.05, 20.0).unwrap();
        let ext = extract_features(&set, ReferencePolicy::MeanProjected, bounds, SolverOptions::default()).unwrap();
        assert!(ext.flagged().is_empty());
        for (i, c) in ext.curves.iter().enumerate() {
            let rec = reconstruct_curve(&c.as_ref().unwrap().features, &ext.references, &bounds).unwrap();
            let err = super::super::error_rate(&rec, &set.curve(i)).unwrap();
            assert!(err < 0.02, "curve {i}: {err}");
        }
    }

    #[test]
    fn out_of_box_features_are_clamped() {
        let set = family(&[(-0.2, 0.0), (-0.1, 0.0)]);
        let bounds = ParamBox::new(0.8, 0.8, 0.05, 20.0).unwrap();
        let refs = SectionReferences::from_curves(&set, &[0, 1]).unwrap();
        let wild = FeatureVector {
            sections: vec![SectionFeatures { theta: 0.0, lambda: 100.0, min: 0.0, max: 1.0 }; 2],
        };
        let capped = FeatureVector {
            sections: vec![SectionFeatures { theta: 0.0, lambda: 20.0, min: 0.0, max: 1.0 }; 2],
        };
        assert_eq!(reconstruct_curve(&wild, &refs, &bounds).unwrap(), reconstruct_curve(&capped, &refs, &bounds).unwrap());
    }
}

//! Synthetic wing-load analog: sectioned decreasing curves whose
//! deformations and ranges are sparse linear functions of uniform inputs.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::features::{FeatureVector, SectionFeatures};
use super::sections::SectionedCurveSet;
use crate::curve::{AdmissibleFunction, DesignGrid};
use crate::error::{Error, Result};
use crate::lab::model_curve;
use crate::stats::substream;
use crate::transform::TransformParams;

const THETA_CENTRE: f64 = -0.2;
const THETA_HALF_WIDTH: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoadsSpec {
    pub n_curves: usize,
    pub n_inputs: usize,
    pub n_stations: usize,
    pub breakpoints: Vec<usize>,
    /// Noise standard deviation relative to each section's amplitude.
    pub relative_noise: f64,
    /// Active inputs per generated quantity.
    pub active_inputs: usize,
    pub seed: u64,
}

impl Default for LoadsSpec {
    fn default() -> Self {
        Self {
            n_curves: 1152,
            n_inputs: 28,
            n_stations: 45,
            breakpoints: vec![3, 20],
            relative_noise: 1e-3,
            active_inputs: 4,
            seed: 0,
        }
    }
}

/// A linear function of a few inputs, centred on the unit cube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseLaw {
    pub centre: f64,
    pub terms: Vec<(usize, f64)>,
}

impl SparseLaw {
    /// Draws `k` active inputs with coefficients spreading the law over
    /// about `centre +- half_width`.
    fn draw(centre: f64, half_width: f64, n_inputs: usize, k: usize, rng: &mut impl Rng) -> Self {
        let picks = sample(rng, n_inputs, k.min(n_inputs));
        let raw: Vec<f64> = (0..picks.len()).map(|_| rng.random_range(0.5..1.0)).collect();
        // (x - 1/2) has range 1, so the weights' absolute sum is the full width
        let total: f64 = raw.iter().sum();
        let terms = picks
            .iter()
            .zip(raw)
            .map(|(j, w)| {
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                (j, sign * 2.0 * half_width * w / total)
            })
            .collect();
        Self { centre, terms }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.centre + self.terms.iter().map(|&(j, b)| b * (x[j] - 0.5)).sum::<f64>()
    }
}

/// The laws generating each section's angle, minimum and maximum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionLaws {
    pub theta: SparseLaw,
    pub min: SparseLaw,
    pub max: SparseLaw,
}

#[derive(Debug, Clone)]
pub struct LoadsDataset {
    pub set: SectionedCurveSet,
    pub laws: Vec<SectionLaws>,
    /// Generating features per curve, with the scale that fixes each
    /// normalized section's left end at one.
    pub truth: Vec<FeatureVector>,
}

/// Base shape of each section, decreasing from one to zero.
pub fn section_shape(section: usize) -> AdmissibleFunction {
    match section % 3 {
        0 => AdmissibleFunction::cosine_bump(0.5),
        1 => AdmissibleFunction::analytic(
            "cubic-flat",
            |u| (1.0 - u) * (1.0 - u) * (1.0 + 2.0 * u),
            Some(Arc::new(|u| -6.0 * u * (1.0 - u))),
        ),
        _ => AdmissibleFunction::analytic("quadratic", |u| (1.0 - u) * (1.0 - u), Some(Arc::new(|u| -2.0 * (1.0 - u)))),
    }
}

/// Centres of (max, min) per section; later sections sit lower, as loads
/// shrink towards the tip.
fn range_centres(section: usize, n_sections: usize) -> (f64, f64) {
    const TABLE: [(f64, f64); 3] = [(110.0, 70.0), (54.0, 20.0), (12.0, 1.0)];
    if n_sections <= 3 {
        TABLE[section]
    } else {
        let hi = 110.0 * (1.0 - section as f64 / n_sections as f64);
        (hi, 0.5 * hi)
    }
}

pub fn generate_loads(spec: &LoadsSpec) -> Result<LoadsDataset> {
    if spec.n_curves == 0 || spec.n_inputs == 0 || spec.n_stations < 2 {
        return Err(Error::Config("loads analog needs curves, inputs and at least two stations".into()));
    }
    if spec.active_inputs > spec.n_inputs {
        return Err(Error::Config(format!("{} active inputs out of {}", spec.active_inputs, spec.n_inputs)));
    }
    if !(spec.relative_noise >= 0.0 && spec.relative_noise.is_finite()) {
        return Err(Error::Config(format!("relative_noise = {}", spec.relative_noise)));
    }
    let axis: Vec<f64> = (0..spec.n_stations).map(|i| i as f64 / (spec.n_stations - 1).max(1) as f64).collect();
    let mut layout = SectionedCurveSet {
        station_axis: axis,
        breakpoints: spec.breakpoints.clone(),
        curves: DMatrix::zeros(spec.n_curves, spec.n_stations),
        inputs: DMatrix::zeros(spec.n_curves, spec.n_inputs),
        input_names: (1..=spec.n_inputs).map(|j| format!("x{j}")).collect(),
        curve_ids: (0..spec.n_curves).map(|i| format!("c{i:04}")).collect(),
    };
    let sections = super::sections::split_sections(&layout)?;
    let n_sections = sections.len();

    let mut law_rng = substream(spec.seed, 0);
    let laws: Vec<SectionLaws> = (0..n_sections)
        .map(|s| {
            let (hi, lo) = range_centres(s, n_sections);
            SectionLaws {
                theta: SparseLaw::draw(THETA_CENTRE, THETA_HALF_WIDTH, spec.n_inputs, spec.active_inputs, &mut law_rng),
                max: SparseLaw::draw(hi, 0.12 * hi, spec.n_inputs, spec.active_inputs, &mut law_rng),
                min: SparseLaw::draw(lo, 0.12 * lo, spec.n_inputs, spec.active_inputs, &mut law_rng),
            }
        })
        .collect();
    let shapes: Vec<AdmissibleFunction> = (0..n_sections).map(section_shape).collect();
    let grids: Vec<DesignGrid> = sections.iter().map(|s| s.grid.clone()).collect();

    let mut truth = Vec::with_capacity(spec.n_curves);
    for i in 0..spec.n_curves {
        let mut rng = substream(spec.seed, 1 + i as u64);
        let x: Vec<f64> = (0..spec.n_inputs).map(|_| rng.random::<f64>()).collect();
        let mut feats = Vec::with_capacity(n_sections);
        for (s, sec) in sections.iter().enumerate() {
            let theta = laws[s].theta.eval(&x);
            let lambda = 1.0 / (theta.cos() - theta.sin());
            let (min, max) = (laws[s].min.eval(&x), laws[s].max.eval(&x));
            let v = model_curve(&shapes[s], TransformParams::new(theta, lambda), &grids[s])?;
            let amp = max - min;
            for (k, vk) in v.values().iter().enumerate() {
                let noise = spec.relative_noise * amp * rng.sample::<f64, _>(StandardNormal);
                layout.curves[(i, sec.start + k)] = min + amp * vk + noise;
            }
            feats.push(SectionFeatures { theta, lambda, min, max });
        }
        for (j, xj) in x.iter().enumerate() {
            layout.inputs[(i, j)] = *xj;
        }
        truth.push(FeatureVector { sections: feats });
    }
    Ok(LoadsDataset { set: layout, laws, truth })
}

/// Range of the generated section angles.
pub fn theta_extent() -> (f64, f64) {
    (THETA_CENTRE - THETA_HALF_WIDTH, THETA_CENTRE + THETA_HALF_WIDTH)
}

//! Sectioned curve families: splitting at breakpoints, per-section
//! normalization and section references.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::curve::{DesignGrid, SampledCurve};
use crate::error::{Error, Result};

/// Fewest stations a section may have.
pub const MIN_SECTION_STATIONS: usize = 4;

/// Curves sampled on a common station axis, with the configuration inputs
/// that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct SectionedCurveSet {
    pub station_axis: Vec<f64>,
    /// Station indices closing each section but the last.
    pub breakpoints: Vec<usize>,
    /// One row per curve, one column per station.
    pub curves: DMatrix<f64>,
    /// One row per curve, one column per input.
    pub inputs: DMatrix<f64>,
    pub input_names: Vec<String>,
    pub curve_ids: Vec<String>,
}

impl SectionedCurveSet {
    pub fn n_curves(&self) -> usize {
        self.curves.nrows()
    }

    pub fn n_stations(&self) -> usize {
        self.station_axis.len()
    }

    pub fn curve(&self, i: usize) -> Vec<f64> {
        self.curves.row(i).iter().copied().collect()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_curves();
        if self.curves.ncols() != self.n_stations() {
            return Err(Error::Data(format!(
                "{} station columns for a {}-station axis",
                self.curves.ncols(),
                self.n_stations()
            )));
        }
        if self.inputs.nrows() != n || self.curve_ids.len() != n {
            return Err(Error::Data(format!(
                "{n} curves but {} input rows and {} ids",
                self.inputs.nrows(),
                self.curve_ids.len()
            )));
        }
        if self.input_names.len() != self.inputs.ncols() {
            return Err(Error::Data("input names do not match input columns".into()));
        }
        if !self.station_axis.windows(2).all(|w| w[0] < w[1]) || self.station_axis.iter().any(|x| !x.is_finite()) {
            return Err(Error::Data("station axis must be finite and strictly increasing".into()));
        }
        if !self.breakpoints.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config(format!("breakpoints {:?} not strictly increasing", self.breakpoints)));
        }
        if let Some(&b) = self.breakpoints.last() {
            if b + 1 >= self.n_stations() {
                return Err(Error::Config(format!(
                    "breakpoint {b} leaves an empty last section ({} stations)",
                    self.n_stations()
                )));
            }
        }
        if self.curves.iter().chain(self.inputs.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Data("missing or non-finite values".into()));
        }
        Ok(())
    }
}

/// A run of consecutive stations with its own axis rescaled to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub index: usize,
    /// First station index.
    pub start: usize,
    /// Last station index, inclusive.
    pub end: usize,
    /// Original station positions.
    pub stations: Vec<f64>,
    /// Stations mapped affinely onto `[0, 1]`.
    pub grid: DesignGrid,
}

impl Section {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn slice<'a>(&self, row: &'a [f64]) -> &'a [f64] {
        &row[self.start..=self.end]
    }

    /// Whether the normalized axis is symmetric about `1/2`.
    fn symmetric(&self) -> bool {
        let p = self.grid.points();
        p.iter().zip(p.iter().rev()).all(|(a, b)| (a + b - 1.0).abs() <= 1e-12)
    }
}

/// Splits the station axis at the breakpoints. A breakpoint station closes
/// the section on its left.
pub fn split_sections(set: &SectionedCurveSet) -> Result<Vec<Section>> {
    set.validate()?;
    let n = set.n_stations();
    let mut bounds: Vec<(usize, usize)> = Vec::with_capacity(set.breakpoints.len() + 1);
    let mut start = 0;
    for &b in &set.breakpoints {
        bounds.push((start, b));
        start = b + 1;
    }
    bounds.push((start, n - 1));

    bounds
        .into_iter()
        .enumerate()
        .map(|(index, (start, end))| {
            let len = end + 1 - start;
            if len < MIN_SECTION_STATIONS {
                return Err(Error::TooFewPoints { section: index, len, min: MIN_SECTION_STATIONS });
            }
            let stations = set.station_axis[start..=end].to_vec();
            let (a, b) = (stations[0], stations[len - 1]);
            let mut scaled: Vec<f64> = stations.iter().map(|x| (x - a) / (b - a)).collect();
            scaled[0] = 0.0;
            scaled[len - 1] = 1.0;
            Ok(Section { index, start, end, stations, grid: DesignGrid::new(scaled)? })
        })
        .collect()
}

/// Concatenates per-section values back onto the full station axis.
pub fn reassemble(sections: &[Section], parts: &[Vec<f64>]) -> Vec<f64> {
    sections.iter().zip(parts).flat_map(|(s, p)| p[..s.len()].iter().copied()).collect()
}

/// How one curve's section was mapped onto the unit square.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionNormalization {
    pub x_range: (f64, f64),
    pub y_min: f64,
    pub y_max: f64,
    /// The section increased along the stations and was mirrored.
    pub flipped: bool,
}

impl SectionNormalization {
    /// Maps values on the normalized grid back to the original stations.
    pub fn denormalize(&self, normalized: &[f64]) -> Vec<f64> {
        let span = self.y_max - self.y_min;
        let mut out: Vec<f64> = normalized.iter().map(|v| self.y_min + span * v).collect();
        if self.flipped {
            out.reverse();
        }
        out
    }
}

/// Maps one section of one curve onto `[0, 1] x [0, 1]`, decreasing to zero
/// at the right end.
pub fn normalize_section(section: &Section, values: &[f64], curve: usize) -> Result<(SampledCurve, SectionNormalization)> {
    if values.len() != section.len() {
        return Err(Error::Data(format!(
            "section {} has {} stations, got {} values",
            section.index,
            section.len(),
            values.len()
        )));
    }
    let (y_min, y_max) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if y_max - y_min <= 1e-12 * y_max.abs().max(y_min.abs()).max(1.0) {
        return Err(Error::DegenerateSection { section: section.index, curve });
    }
    let flipped = values[0] < values[values.len() - 1];
    if flipped && !section.symmetric() {
        return Err(Error::Data(format!(
            "section {} increases along an asymmetric station axis and cannot be mirrored",
            section.index
        )));
    }
    let span = y_max - y_min;
    let mut normalized: Vec<f64> = values.iter().map(|v| (v - y_min) / span).collect();
    if flipped {
        normalized.reverse();
    }
    let norm = SectionNormalization {
        x_range: (section.stations[0], section.stations[section.len() - 1]),
        y_min,
        y_max,
        flipped,
    };
    Ok((SampledCurve::new(section.grid.clone(), normalized)?, norm))
}

/// Least-squares projection onto nonincreasing sequences (pool adjacent
/// violators).
pub fn decreasing_projection(values: &[f64]) -> Vec<f64> {
    // blocks of (mean, weight)
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (m2, w2) = blocks[blocks.len() - 1];
            let (m1, w1) = blocks[blocks.len() - 2];
            if m1 >= m2 {
                break;
            }
            blocks.pop();
            let w = w1 + w2;
            *blocks.last_mut().unwrap() = ((m1 * w1 as f64 + m2 * w2 as f64) / w as f64, w);
        }
    }
    blocks.into_iter().flat_map(|(m, w)| std::iter::repeat_n(m, w)).collect()
}

/// Reference for one section: the pointwise mean of normalized curves made
/// decreasing and pinned to zero at the right end.
#[derive(Debug, Clone, PartialEq)]
pub struct SectionReference {
    pub samples: SampledCurve,
    /// Largest change made by the projection and the pinning.
    pub projection_shift: f64,
    /// Most curves in this section were mirrored.
    pub flipped: bool,
}

pub fn mean_reference(normalized: &[(SampledCurve, SectionNormalization)]) -> Result<SectionReference> {
    let Some((first, _)) = normalized.first() else {
        return Err(Error::InsufficientData("no curves to average".into()));
    };
    let n = normalized.len() as f64;
    let mut mean = vec![0.0; first.len()];
    for (c, _) in normalized {
        for (m, v) in mean.iter_mut().zip(c.values()) {
            *m += v / n;
        }
    }
    let mut projected = decreasing_projection(&mean);
    *projected.last_mut().unwrap() = 0.0;
    let projection_shift = mean.iter().zip(&projected).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let flips = normalized.iter().filter(|(_, s)| s.flipped).count();
    Ok(SectionReference {
        samples: SampledCurve::new(first.grid().clone(), projected)?,
        projection_shift,
        flipped: 2 * flips > normalized.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(n_stations: usize, breakpoints: Vec<usize>) -> SectionedCurveSet {
        let axis: Vec<f64> = (0..n_stations).map(|i| i as f64 / (n_stations - 1) as f64).collect();
        let curves = DMatrix::from_fn(2, n_stations, |r, c| (n_stations - c) as f64 + r as f64);
        SectionedCurveSet {
            station_axis: axis,
            breakpoints,
            curves,
            inputs: DMatrix::zeros(2, 1),
            input_names: vec!["x0".into()],
            curve_ids: vec!["a".into(), "b".into()],
        }
    }

    #[test]
    fn wing_layout_sizes() {
        let sections = split_sections(&set(45, vec![3, 20])).unwrap();
        let sizes: Vec<usize> = sections.iter().map(Section::len).collect();
        assert_eq!(sizes, vec![4, 17, 24]);
        for s in &sections {
            assert_eq!(s.grid.points()[0], 0.0);
            assert_eq!(*s.grid.points().last().unwrap(), 1.0);
        }
    }

    #[test]
    fn no_breakpoints_is_one_section() {
        let sections = split_sections(&set(10, vec![])).unwrap();
        assert_eq!(sections.len(), 1);
        assert_eq!(sections[0].len(), 10);
    }

    #[test]
    fn bad_layouts() {
        assert!(split_sections(&set(45, vec![44])).is_err());
        assert!(matches!(
            split_sections(&set(45, vec![2, 20])),
            Err(Error::TooFewPoints { section: 0, len: 3, .. })
        ));
        assert!(matches!(split_sections(&set(45, vec![20, 3])), Err(Error::Config(_))));
    }

    #[test]
    fn already_normalized_is_identity() {
        let sections = split_sections(&set(5, vec![])).unwrap();
        let values = [1.0, 0.75, 0.5, 0.25, 0.0];
        let (c, norm) = normalize_section(&sections[0], &values, 0).unwrap();
        assert_eq!(c.values(), &values);
        assert_eq!((norm.y_min, norm.y_max, norm.flipped), (0.0, 1.0, false));
    }

    #[test]
    fn affine_normalization() {
        let sections = split_sections(&set(5, vec![])).unwrap();
        let values = [10.0, 6.0, 4.0, 3.0, 2.0];
        let (c, norm) = normalize_section(&sections[0], &values, 0).unwrap();
        assert_eq!((norm.y_min, norm.y_max), (2.0, 10.0));
        assert_eq!(c.values()[1], 0.5);
        assert_eq!(norm.denormalize(c.values()), values);
    }

    #[test]
    fn increasing_section_is_mirrored() {
        let sections = split_sections(&set(5, vec![])).unwrap();
        let values = [0.0, 1.0, 3.0, 4.0, 8.0];
        let (c, norm) = normalize_section(&sections[0], &values, 0).unwrap();
        assert!(norm.flipped);
        assert_eq!(c.values()[0], 1.0);
        assert_eq!(c.values()[4], 0.0);
        assert_eq!(norm.denormalize(c.values()), values);
    }

    #[test]
    fn constant_section_is_degenerate() {
        let sections = split_sections(&set(5, vec![])).unwrap();
        assert!(matches!(
            normalize_section(&sections[0], &[2.0; 5], 7),
            Err(Error::DegenerateSection { section: 0, curve: 7 })
        ));
    }

    #[test]
    fn projection_examples() {
        assert_eq!(decreasing_projection(&[3.0, 2.0, 1.0]), vec![3.0, 2.0, 1.0]);
        assert_eq!(decreasing_projection(&[1.0, 3.0, 0.0]), vec![2.0, 2.0, 0.0]);
        assert_eq!(decreasing_projection(&[1.0, 2.0, 3.0]), vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn reference_is_pinned_mean() {
        let sections = split_sections(&set(4, vec![])).unwrap();
        let a = normalize_section(&sections[0], &[1.0, 0.6, 0.2, 0.0], 0).unwrap();
        let b = normalize_section(&sections[0], &[1.0, 0.8, 0.4, 0.0], 1).unwrap();
        let r = mean_reference(&[a, b]).unwrap();
        let want = [1.0, 0.7, 0.3, 0.0];
        for (v, w) in r.samples.values().iter().zip(want) {
            assert!((v - w).abs() < 1e-15);
        }
        assert!(r.projection_shift < 1e-15);
    }

    proptest! {
        #[test]
        fn sections_reassemble_the_axis(n in 12usize..80, cuts in prop::collection::btree_set(3usize..70, 0..4)) {
            let mut bps = Vec::new();
            let mut last: Option<usize> = None;
            for c in cuts {
                let ok = match last { None => c >= 3, Some(l) => c >= l + 4 };
                if ok && c + 4 < n {
                    bps.push(c);
                    last = Some(c);
                }
            }
            let s = set(n, bps);
            let sections = split_sections(&s).unwrap();
            let parts: Vec<Vec<f64>> = sections.iter().map(|sec| sec.stations.clone()).collect();
            prop_assert_eq!(reassemble(&sections, &parts), s.station_axis);
        }

        #[test]
        fn normalization_round_trips(values in prop::collection::vec(-50.0f64..50.0, 6)) {
            let sections = split_sections(&set(6, vec![])).unwrap();
            prop_assume!(values.iter().any(|v| (v - values[0]).abs() > 1e-6));
            let (c, norm) = normalize_section(&sections[0], &values, 0).unwrap();
            prop_assert!(c.values().iter().all(|v| (0.0..=1.0).contains(v)));
            for (a, b) in norm.denormalize(c.values()).iter().zip(&values) {
                prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
            }
        }

        #[test]
        fn projection_is_nonincreasing(values in prop::collection::vec(-5.0f64..5.0, 1..30)) {
            let p = decreasing_projection(&values);
            prop_assert_eq!(p.len(), values.len());
            prop_assert!(p.windows(2).all(|w| w[0] >= w[1]));
            let (s1, s2): (f64, f64) = (values.iter().sum(), p.iter().sum());
            prop_assert!((s1 - s2).abs() < 1e-9);
        }
    }
}

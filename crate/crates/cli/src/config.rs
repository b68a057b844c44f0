//! Run configuration read from a TOML file.
//!
//! Every table is optional; missing keys take their library defaults.
//!
//! ```toml
//! seed = 7
//! threads = 1
//! out_dir = "runs/a"
//!
//! [simulate.toy]
//! n_points = 100
//! n_curves = 25
//! sigma = 0.1
//!
//! [register]
//! input = "runs/a/curves.csv"
//! reference = "toy"          # "toy", "toy-raw" or a CSV of x,y samples
//!
//! [validate]
//! checks = ["sweep", "clt"]
//! sweep_n = [100, 400, 1600]
//!
//! [pipeline.settings]
//! test_fraction = 0.25
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use simcurve::pipeline::synth::LoadsSpec;
use simcurve::{Error, McConfig, ParamBox, PipelineConfig, Result, SolverOptions, ToySpec};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub simulate: SimulateConfig,
    pub register: RegisterConfig,
    pub validate: ValidateConfig,
    pub pipeline: PipelineSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub toy: ToySpec,
    pub loads: LoadsSpec,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegisterConfig {
    pub input: Option<PathBuf>,
    pub reference: Option<String>,
    pub bounds: ParamBox,
    pub solver: SolverOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Check {
    Sweep,
    Clt,
    Gap,
    Spacing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateConfig {
    pub mc: McConfig,
    pub checks: Vec<Check>,
    pub sweep_n: Vec<usize>,
    pub sweep_replicates: usize,
    pub clt_n: usize,
    pub clt_replicates: usize,
    pub gap_n: Vec<usize>,
    pub gap_replicates: usize,
    pub spacing_n: Vec<usize>,
    pub spacing_eps: Vec<f64>,
    pub spacing_replicates: usize,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        Self {
            mc: McConfig::default(),
            checks: vec![Check::Sweep, Check::Clt, Check::Gap, Check::Spacing],
            sweep_n: vec![100, 400, 1600],
            sweep_replicates: 200,
            clt_n: 2000,
            clt_replicates: 500,
            gap_n: vec![100, 400, 1600],
            gap_replicates: 100,
            spacing_n: vec![100, 1000],
            spacing_eps: vec![0.02, 0.05, 0.1],
            spacing_replicates: 10_000,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSection {
    pub inputs: Option<PathBuf>,
    pub curves: Option<PathBuf>,
    pub layout: Option<PathBuf>,
    pub settings: PipelineConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Pushes a global seed into every seeded section.
    pub fn apply_seed(&mut self, seed: u64) {
        self.seed = Some(seed);
        self.simulate.toy.seed = seed;
        self.simulate.loads.seed = seed;
        self.validate.mc.seed = seed;
        self.pipeline.settings.seed = seed;
    }

    pub fn validate(&self) -> Result<()> {
        self.simulate.toy.validate()?;
        let loads = &self.simulate.loads;
        if !(loads.relative_noise >= 0.0 && loads.relative_noise.is_finite()) {
            return Err(Error::Config(format!("simulate.loads.relative_noise = {}", loads.relative_noise)));
        }
        self.register.bounds.validate()?;
        self.pipeline.settings.validate()?;
        let v = &self.validate;
        v.mc.validate()?;
        let sizes_ok = |ns: &[usize]| !ns.is_empty() && ns.iter().all(|&n| n >= 10);
        if !sizes_ok(&v.sweep_n) || !sizes_ok(&v.gap_n) || !sizes_ok(&v.spacing_n) || v.clt_n < 10 {
            return Err(Error::Config("validate: sample sizes must be >= 10".into()));
        }
        if [v.sweep_replicates, v.clt_replicates, v.gap_replicates, v.spacing_replicates].contains(&0) {
            return Err(Error::Config("validate: replicate counts must be positive".into()));
        }
        if v.spacing_eps.is_empty() || v.spacing_eps.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
            return Err(Error::Config("validate.spacing_eps must lie in (0, 1)".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be positive".into()));
        }
        Ok(())
    }
}

use std::path::{Path, PathBuf};

use lurye_ozf::multiplier_search::{ClassMode, FirMultiplier, FrequencyGrid, ProbeConfig, DEFAULT_MARGIN};
use lurye_ozf::nonlinearity::PiecewiseLinearMonotone;
use lurye_ozf::plant::RationalPlant;
use lurye_ozf::signals::Signal;
use lurye_ozf::simulator::{FeedthroughPolicy, InputFamily, ProbeFamily};
use lurye_ozf::sprocedure::CertificateConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// A plant given inline or as a path to a `{num, den}` file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PlantSpec {
    Inline(RationalPlant),
    Path(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchParams {
    pub band: usize,
    pub mode: ClassMode,
    /// Defaults to `max(512, 16 B)`.
    pub grid_points: Option<usize>,
    pub margin: f64,
}

impl Default for SearchParams {
    fn default() -> Self {
        SearchParams {
            band: 1,
            mode: ClassMode::Hyperdominant,
            grid_points: None,
            margin: DEFAULT_MARGIN,
        }
    }
}

impl SearchParams {
    pub fn grid(&self) -> FrequencyGrid {
        let points = self.grid_points.unwrap_or(FrequencyGrid::default_for(self.band).points);
        FrequencyGrid::new(points, self.margin)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertificateParams {
    #[serde(rename = "T")]
    pub period: usize,
    #[serde(rename = "B")]
    pub band: usize,
    pub gamma: f64,
    #[serde(rename = "H")]
    pub horizon: usize,
    pub search: CertificateConfig,
}

impl Default for CertificateParams {
    fn default() -> Self {
        CertificateParams {
            period: 3,
            band: 1,
            gamma: 10.0,
            horizon: 6,
            search: CertificateConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationParams {
    pub nonlinearity: PiecewiseLinearMonotone,
    pub input: Signal,
    pub horizon: usize,
    pub feedthrough: FeedthroughPolicy,
    pub allow_unstable: bool,
    /// Family for the gain estimate reported next to the single run.
    pub family: InputFamily,
}

impl Default for SimulationParams {
    fn default() -> Self {
        SimulationParams {
            nonlinearity: PiecewiseLinearMonotone::linear(1.0).expect("slope 1 is monotone"),
            input: Signal::impulse(0),
            horizon: 64,
            feedthrough: FeedthroughPolicy::Solve,
            allow_unstable: false,
            family: InputFamily::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HuntParams {
    pub family: ProbeFamily,
    /// Random nonlinearities drawn before refinement.
    pub budget: usize,
    /// Probes for the multiplier inequality on the incumbent nonlinearity.
    pub probe: ProbeConfig,
}

impl Default for HuntParams {
    fn default() -> Self {
        HuntParams {
            family: ProbeFamily::default(),
            budget: 64,
            probe: ProbeConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub plant: Option<PlantSpec>,
    pub search: SearchParams,
    /// Multiplier checked by `verify` and `hunt`; `hunt` searches for one when absent.
    pub multiplier: Option<FirMultiplier>,
    pub certificate: CertificateParams,
    pub simulation: SimulationParams,
    pub hunt: HuntParams,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

impl AnalysisConfig {
    /// Reads a config and inlines a plant given by path (relative to the config file).
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: AnalysisConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))?;
        if let Some(PlantSpec::Path(p)) = &cfg.plant {
            let full = path.parent().map_or_else(|| p.clone(), |dir| dir.join(p));
            cfg.plant = Some(PlantSpec::Inline(read_json(&full)?));
        }
        Ok(cfg)
    }

    /// Forces every seeded component to follow `seed`.
    pub fn apply_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.simulation.family.seed = seed;
        self.hunt.family.seed = seed;
        self.hunt.family.inputs.seed = seed;
        self.hunt.probe.seed = seed;
    }

    pub fn plant(&self) -> Result<RationalPlant, CliError> {
        match &self.plant {
            Some(PlantSpec::Inline(g)) => Ok(g.clone()),
            Some(PlantSpec::Path(p)) => read_json(p),
            None => Err(CliError::Usage("config has no plant".into())),
        }
    }
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("invalid JSON in {}: {e}", path.display())))
}

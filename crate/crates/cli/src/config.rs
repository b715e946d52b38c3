use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use roskit::hybrid::EventScenario;
use roskit::study::{PlantConfig, StudySettings};

/// Everything a command needs. Unknown keys are rejected and every field
/// has a default, so `{}` is the default configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Plant data given inline.
    pub plant: PlantConfig,
    /// Plant data read from a separate JSON file, relative to the config.
    pub plant_file: Option<PathBuf>,
    /// Load-step schedule and simulation grid.
    pub scenario: EventScenario,
    /// Barrier degrees, margins, domain box, algorithm settings and seed.
    pub study: StudySettings,
    pub out: PathBuf,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).with_context(|| format!("invalid configuration {}", path.display()))?;
        if let Some(file) = cfg.plant_file.take() {
            let file = path.parent().unwrap_or(Path::new(".")).join(file);
            let text = std::fs::read_to_string(&file).with_context(|| format!("reading {}", file.display()))?;
            cfg.plant =
                serde_json::from_str(&text).with_context(|| format!("invalid plant file {}", file.display()))?;
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        let s = &self.study;
        if !(2..=12).contains(&s.degree) || s.degree % 2 != 0 {
            bail!("degree must be even and between 2 and 12");
        }
        if s.lo.len() != 4 || s.hi.len() != 4 || s.lo.iter().zip(&s.hi).any(|(l, h)| !(l < h)) {
            bail!("the domain box needs four intervals lo < hi");
        }
        if !(s.disturbance.is_finite() && s.epsilon > 0.0) {
            bail!("disturbance must be finite and epsilon positive");
        }
        if self.out.as_os_str().is_empty() {
            bail!("empty output directory");
        }
        Ok(())
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            plant: PlantConfig::default(),
            plant_file: None,
            scenario: EventScenario::default(),
            study: StudySettings::default(),
            out: PathBuf::from("out"),
        }
    }
}

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::denoiser::{ModelConfig, TrainConfig};
use crate::diffusion::{LossConfig, ScheduleConfig};
use crate::error::{io_error, Error, Result};
use crate::evaluation::MatchSettings;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Types fixed; lattice and coordinates generated.
    #[default]
    Csp,
    /// Types generated too.
    AbInitio,
    /// Noise a given structure part-way and denoise it.
    Refine,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Csp => "csp",
            Mode::AbInitio => "ab-initio",
            Mode::Refine => "refine",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Mode::Csp, Mode::AbInitio, Mode::Refine]
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown mode `{s}` (csp, ab-initio, refine)")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SampleConfig {
    pub count: usize,
    /// Starting step for refinement.
    pub refine_t: usize,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self { count: 20, refine_t: 100 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    pub checkpoint: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub templates: Option<PathBuf>,
    /// Directory of extra space-group files.
    pub groups: Option<PathBuf>,
    /// Cache of the λ tables.
    pub lambda_cache: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub mode: Mode,
    pub schedule: ScheduleConfig,
    pub model: ModelConfig,
    pub loss: LossConfig,
    pub train: TrainConfig,
    pub sample: SampleConfig,
    #[serde(rename = "match")]
    pub matching: MatchSettings,
    pub paths: Paths,
}

impl RunConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map_or(0, |s| text[..s.start.min(text.len())].matches('\n').count() + 1);
            Error::Parse { path: path.into(), line, msg: e.message().to_string() }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Relative entries of `[paths]` are taken relative to the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::parse(&std::fs::read_to_string(path).map_err(io_error(path))?, path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let p = &mut cfg.paths;
        for slot in [&mut p.checkpoint, &mut p.output, &mut p.templates, &mut p.groups, &mut p.lambda_cache] {
            if let Some(rel) = slot.as_ref().filter(|q| q.is_relative()) {
                *slot = Some(base.join(rel));
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule.validate().map_err(|e| Error::Config(format!("schedule: {e}")))?;
        self.model.validate()?;
        self.train.validate()?;
        let l = &self.loss;
        if [l.k, l.coord, l.types].iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Config("loss weights must be finite and non-negative".into()));
        }
        let m = &self.matching;
        if [m.stol, m.angle_tol, m.ltol].iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(Error::Config("match tolerances must be positive".into()));
        }
        if self.sample.count == 0 {
            return Err(Error::Config("sample.count must be positive".into()));
        }
        if self.sample.refine_t > self.schedule.steps {
            return Err(Error::Config(format!(
                "sample.refine_t = {} exceeds schedule.steps = {}",
                self.sample.refine_t, self.schedule.steps
            )));
        }
        Ok(())
    }
}

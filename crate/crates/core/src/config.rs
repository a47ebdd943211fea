//! Experiment configuration: the single JSON document every CLI run is
//! driven by. Its canonical serialization is hashed and stamped into all
//! outputs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fractal::{GlueSet, IfsDescription, IfsSpec, VertexGraph};
use crate::window::Window;

/// A catalog name (`"sierpinski"`) or `{"spec_path": "..."}` pointing at an
/// IFS description in JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FractalSource {
    Catalog(String),
    File { spec_path: PathBuf },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GlueChoice {
    #[default]
    Identity,
    Blowup(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaMode {
    Critical,
}

/// `"critical"` for `σ_p^#`, or a number.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SigmaChoice {
    Mode(SigmaMode),
    Value(f64),
}

impl Default for SigmaChoice {
    fn default() -> Self {
        SigmaChoice::Mode(SigmaMode::Critical)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelChoice {
    #[default]
    Subgaussian,
    GaussWeierstrass,
    GraphSpectral,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Grids {
    /// Deepest radius/time index; `None` uses the deepest one the level allows.
    pub n_max: Option<usize>,
    /// `σ_target − σ` values for BBM sweeps.
    pub bbm_gaps: Vec<f64>,
    /// Graph level used for dense spectral kernels.
    pub spectral_level: Option<usize>,
    /// Number of seeded functions in test families.
    pub family_size: usize,
}

impl Default for Grids {
    fn default() -> Self {
        Grids { n_max: None, bbm_gaps: vec![0.1, 0.05, 0.02], spectral_level: None, family_size: 10 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Outputs {
    /// Directory for CSV/JSON artifacts; stdout when absent.
    pub dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub fractal: FractalSource,
    #[serde(default)]
    pub glue: GlueChoice,
    pub level: usize,
    pub p: f64,
    #[serde(default)]
    pub sigma: SigmaChoice,
    #[serde(default)]
    pub kernel: KernelChoice,
    #[serde(default)]
    pub grids: Grids,
    #[serde(default)]
    pub window: Window,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub outputs: Outputs,
}

/// Deepest level accepted from a config; keeps dense work at desk scale.
pub const MAX_LEVEL: usize = 16;

impl ExperimentConfig {
    pub fn new(fractal: &str, level: usize, p: f64) -> Self {
        ExperimentConfig {
            fractal: FractalSource::Catalog(fractal.into()),
            glue: GlueChoice::Identity,
            level,
            p,
            sigma: SigmaChoice::default(),
            kernel: KernelChoice::default(),
            grids: Grids::default(),
            window: Window::default(),
            seed: 0,
            outputs: Outputs::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        // spec paths are relative to the config file
        if let FractalSource::File { spec_path } = &mut cfg.fractal {
            if spec_path.is_relative() {
                if let Some(dir) = path.parent() {
                    *spec_path = dir.join(&*spec_path);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.p > 1.0 && self.p.is_finite()) {
            return bad(format!("p must be a finite number above 1, got {}", self.p));
        }
        if self.level > MAX_LEVEL {
            return bad(format!("level {} exceeds the maximum {MAX_LEVEL}", self.level));
        }
        if let SigmaChoice::Value(s) = self.sigma {
            if !(s > 0.0 && s.is_finite()) {
                return bad(format!("sigma must be positive, got {s}"));
            }
        }
        if self.window.len == 0 || !(self.window.min_resolved_fraction > 0.0 && self.window.min_resolved_fraction < 1.0) {
            return bad("window needs len >= 1 and a resolved fraction in (0, 1)".into());
        }
        if self.grids.bbm_gaps.iter().any(|g| !(*g > 0.0)) {
            return bad("bbm gaps must be positive".into());
        }
        if let Some(n) = self.grids.n_max {
            if n > self.level {
                return Err(Error::LevelTooDeep { requested: n, built: self.level });
            }
        }
        Ok(())
    }

    /// Compact JSON with fields in declaration order.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config is always serializable")
    }

    /// Hex SHA-256 of [`Self::canonical_json`] with the output location
    /// cleared, so moving artifacts does not change the stamp.
    pub fn hash(&self) -> String {
        let stamped = ExperimentConfig { outputs: Outputs::default(), ..self.clone() };
        hex::encode(Sha256::digest(stamped.canonical_json().as_bytes()))
    }

    pub fn ifs(&self) -> Result<IfsSpec> {
        match &self.fractal {
            FractalSource::Catalog(name) => IfsSpec::catalog(name),
            FractalSource::File { spec_path } => {
                let text = std::fs::read_to_string(spec_path)
                    .map_err(|e| Error::Parse(format!("{}: {e}", spec_path.display())))?;
                let d: IfsDescription = serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
                IfsSpec::from_description(&d)
            }
        }
    }

    pub fn glue_set(&self, ifs: &IfsSpec) -> Result<GlueSet> {
        match self.glue {
            GlueChoice::Identity => Ok(GlueSet::identity(ifs.dim())),
            GlueChoice::Blowup(l) => GlueSet::blowup(ifs, l),
        }
    }

    pub fn graph(&self) -> Result<VertexGraph> {
        let ifs = self.ifs()?;
        VertexGraph::build(&ifs, &self.glue_set(&ifs)?, self.level)
    }
}

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::error::CliError;
use derender_core::datagen::{CogentConfig, Dot2dConfig, Scene6dofConfig, So3Config};
use derender_core::toynet::{EncoderConfig, ModelConfig, TrainConfig};

/// Architecture overrides; unset fields keep the defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelOverrides {
    pub embed_dim: Option<usize>,
    pub decoder_layers: Option<usize>,
    pub heads: Option<usize>,
    pub mlp_ratio: Option<usize>,
    pub context_len: Option<usize>,
    pub numeric_head_hidden: Option<usize>,
    pub encoder_hidden: Option<usize>,
}

impl ModelOverrides {
    pub fn apply(&self, cfg: &mut ModelConfig) {
        let set = |dst: &mut usize, v: Option<usize>| {
            if let Some(v) = v {
                *dst = v;
            }
        };
        set(&mut cfg.embed_dim, self.embed_dim);
        set(&mut cfg.decoder_layers, self.decoder_layers);
        set(&mut cfg.heads, self.heads);
        set(&mut cfg.mlp_ratio, self.mlp_ratio);
        set(&mut cfg.context_len, self.context_len);
        set(&mut cfg.numeric_head_hidden, self.numeric_head_hidden);
        if let Some(h) = self.encoder_hidden {
            let EncoderConfig::RasterMlp { hidden, .. } = &mut cfg.encoder;
            *hidden = h;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    pub points_per_object: usize,
    /// Position scored for a dot2d generation that fails to parse.
    pub fallback_position: [f64; 2],
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            points_per_object: derender_core::eval::DEFAULT_POINTS_PER_OBJECT,
            fallback_position: [0.5, 0.5],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub cogent: CogentConfig,
    pub dot2d: Dot2dConfig,
    pub so3: So3Config,
    pub scene6dof: Scene6dofConfig,
    pub model: ModelOverrides,
    pub train: TrainConfig,
    pub eval: EvalSettings,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(anyhow::anyhow!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::config(anyhow::anyhow!("{}: {e}", path.display())))
    }
}

/// Resolves a relative path that does not exist against `DERENDER_DATA_DIR`.
pub fn data_path(p: &Path) -> PathBuf {
    if p.is_relative() && !p.exists() {
        if let Some(root) = std::env::var_os("DERENDER_DATA_DIR") {
            return PathBuf::from(root).join(p);
        }
    }
    p.to_path_buf()
}

pub fn data_root() -> PathBuf {
    std::env::var_os("DERENDER_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("data"))
}

//! Pipeline configuration: one TOML document covering every stage.
//!
//! Values are layered: built-in defaults, then an optional config file, then
//! `--set key.path=value` overrides. Unknown keys are rejected at every
//! layer so that a typo never silently falls back to a default.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use talkface_core::data_prep::{PrepConfig, LIP_SNAP_RADIUS};
use talkface_models::blink::{BlinkModelConfig, BlinkTrainConfig};
use talkface_models::speech::{SpeechModelConfig, SpeechTrainConfig};
use talkface_models::texture::{DiscriminatorConfig, MaskConfig, TextureModelConfig, TextureTrainConfig};
use toml::{Table, Value};

use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Video frame rate every clip and feature track must share.
    pub fps: f64,
    /// Square frame size in pixels.
    pub resolution: usize,
    pub data: DataConfig,
    pub landmark: LandmarkStage,
    pub blink: BlinkStage,
    pub texture: TextureStage,
    pub generate: GenerateConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataConfig {
    /// Length in frames of the blink training sequences.
    pub blink_len: usize,
    pub test_fraction: f64,
    /// Seed of the subject split.
    pub seed: u64,
    pub lip_radius: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LandmarkStage {
    pub model: SpeechModelConfig,
    pub train: SpeechTrainConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BlinkStage {
    /// When false, generation imposes no blinks.
    pub enabled: bool,
    pub model: BlinkModelConfig,
    pub train: BlinkTrainConfig,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TextureStage {
    pub model: TextureModelConfig,
    pub discriminator: DiscriminatorConfig,
    pub train: TextureTrainConfig,
    pub mask: MaskConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerateConfig {
    /// Seed of the blink noise sequence.
    pub blink_seed: u64,
    /// Frames per texture generator call.
    pub batch: usize,
    /// Also write attention and color maps under `maps/`.
    pub dump_maps: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            fps: 25.0,
            resolution: 128,
            data: DataConfig::default(),
            landmark: LandmarkStage::default(),
            blink: BlinkStage::default(),
            texture: TextureStage::default(),
            generate: GenerateConfig::default(),
        }
    }
}

impl Default for DataConfig {
    fn default() -> Self {
        let prep = PrepConfig::default();
        Self {
            blink_len: prep.blink_len,
            test_fraction: prep.test_fraction,
            seed: prep.seed,
            lip_radius: LIP_SNAP_RADIUS,
        }
    }
}

impl Default for BlinkStage {
    fn default() -> Self {
        Self {
            enabled: true,
            model: BlinkModelConfig::default(),
            train: BlinkTrainConfig::default(),
        }
    }
}

impl Default for GenerateConfig {
    fn default() -> Self {
        Self {
            blink_seed: 0,
            batch: 8,
            dump_maps: false,
        }
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

/// Rejects keys of `overlay` that do not exist in `base`, then merges.
fn merge(base: &mut Table, overlay: Table, prefix: &str) -> Result<()> {
    for (key, value) in overlay {
        let path = if prefix.is_empty() { key.clone() } else { format!("{prefix}.{key}") };
        match (base.get_mut(&key), value) {
            (None, _) => return Err(invalid(format!("unknown config key `{path}`"))),
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o, &path)?,
            (Some(Value::Table(_)), _) => return Err(invalid(format!("config key `{path}` is a section"))),
            (Some(slot), v) => *slot = v,
        }
    }
    Ok(())
}

/// Parses `a.b.c=value`. The value is read as a TOML literal when it is
/// one (numbers, booleans, arrays, quoted strings) and as a bare string
/// otherwise.
fn parse_override(s: &str) -> Result<(Vec<String>, Value)> {
    let (key, raw) = s
        .split_once('=')
        .ok_or_else(|| invalid(format!("override `{s}` is not of the form key=value")))?;
    let path: Vec<String> = key.trim().split('.').map(str::to_owned).collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(invalid(format!("override `{s}` has an empty key segment")));
    }
    let raw = raw.trim();
    let value = match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => Value::String(raw.to_owned()),
    };
    Ok((path, value))
}

fn nest(path: &[String], value: Value) -> Table {
    let mut t = Table::new();
    match path {
        [last] => {
            t.insert(last.clone(), value);
        }
        [first, rest @ ..] => {
            t.insert(first.clone(), Value::Table(nest(rest, value)));
        }
        [] => {}
    }
    t
}

impl PipelineConfig {
    /// Defaults, then the file at `path`, then each `key=value` override.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut table = Table::try_from(Self::default()).expect("default config serializes");
        if let Some(path) = path {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            let file: Table = text
                .parse()
                .map_err(|e| invalid(format!("config {}: {e}", path.display())))?;
            merge(&mut table, file, "")?;
        }
        for o in overrides {
            let (key, value) = parse_override(o)?;
            merge(&mut table, nest(&key, value), "")?;
        }
        let config: Self = Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| invalid(format!("config: {}", e.message())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return Err(invalid("fps must be positive"));
        }
        if self.resolution == 0 {
            return Err(invalid("resolution must be positive"));
        }
        if self.texture.model.size != self.resolution {
            return Err(invalid(format!(
                "texture.model.size ({}) differs from resolution ({})",
                self.texture.model.size, self.resolution
            )));
        }
        let factor = 1usize << self.texture.model.downsamplings;
        if self.resolution % factor != 0 {
            return Err(invalid(format!(
                "resolution {} is not divisible by 2^{} downsamplings",
                self.resolution, self.texture.model.downsamplings
            )));
        }
        if !(0.0..1.0).contains(&self.data.test_fraction) {
            return Err(invalid("data.test_fraction must lie in [0, 1)"));
        }
        if self.generate.batch == 0 {
            return Err(invalid("generate.batch must be positive"));
        }
        let lrs = [
            ("landmark.train.lr", self.landmark.train.lr),
            ("blink.train.lr", self.blink.train.lr),
            ("texture.train.lr", self.texture.train.lr),
        ];
        for (name, lr) in lrs {
            if !(lr >= 0.0 && lr.is_finite()) {
                return Err(invalid(format!("{name} must be a non-negative number")));
            }
        }
        Ok(())
    }

    pub fn prep_config(&self) -> PrepConfig {
        PrepConfig {
            blink_len: self.data.blink_len,
            test_fraction: self.data.test_fraction,
            seed: self.data.seed,
            lip_radius: self.data.lip_radius,
            split: None,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// sha256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }
}

//! Procedural adverse-weather synthesis.
//!
//! Each condition is a [`WeatherModel`] strategy registered by name in a
//! [`WeatherRegistry`]; callers pick one at runtime with a condition string
//! or a [`WeatherSpec`]. All models are pure functions of
//! `(image, intensity, seed)` and are the identity at intensity zero.

mod fog;
pub mod noise;
mod rain;
mod snow;

pub use fog::FogModel;
pub use rain::{RainModel, Streak};
pub use snow::{Flake, SnowModel};

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::rng::{unit_f64, CounterRng};
use crate::{ColorSpace, Error, Image, Result};

pub trait WeatherModel: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    /// Applies the condition at intensity `t` in `[0, 1]`.
    fn apply(&self, img: &Image, t: f64, seed: u64) -> Result<Image>;
}

/// The clear-weather strategy.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoWeather;

impl WeatherModel for NoWeather {
    fn name(&self) -> &'static str {
        "none"
    }

    fn apply(&self, img: &Image, t: f64, _seed: u64) -> Result<Image> {
        check_input(img, t)?;
        Ok(img.clone())
    }
}

pub(crate) fn check_input(img: &Image, t: f64) -> Result<()> {
    img.require_space(ColorSpace::Rgb, "weather augmentation")?;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Contract(format!("intensity {t} outside [0, 1]")));
    }
    Ok(())
}

/// `round(density * t * w * h / 128000)`.
pub(crate) fn density_count(density: f64, width: usize, height: usize, t: f64) -> usize {
    (density * t * (width * height) as f64 / 128_000.0).round() as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    None,
    Fog,
    Rain,
    Snow,
}

impl Condition {
    pub const ADVERSE: [Condition; 3] = [Condition::Fog, Condition::Rain, Condition::Snow];

    pub fn name(self) -> &'static str {
        match self {
            Condition::None => "none",
            Condition::Fog => "fog",
            Condition::Rain => "rain",
            Condition::Snow => "snow",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" | "clear" => Ok(Condition::None),
            "fog" => Ok(Condition::Fog),
            "rain" => Ok(Condition::Rain),
            "snow" => Ok(Condition::Snow),
            other => Err(Error::Config(format!("unknown weather condition {other:?}"))),
        }
    }
}

/// Fully determines one augmentation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeatherSpec {
    pub condition: Condition,
    pub intensity: f64,
    pub seed: u64,
}

impl WeatherSpec {
    pub fn new(condition: Condition, intensity: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&intensity) {
            return Err(Error::Contract(format!("intensity {intensity} outside [0, 1]")));
        }
        if condition == Condition::None && intensity != 0.0 {
            return Err(Error::Contract("condition none requires intensity 0".into()));
        }
        Ok(Self {
            condition,
            intensity,
            seed,
        })
    }

    pub fn clear() -> Self {
        Self {
            condition: Condition::None,
            intensity: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdversityTier {
    Low,
    Medium,
    High,
}

impl AdversityTier {
    pub const ALL: [AdversityTier; 3] = [AdversityTier::Low, AdversityTier::Medium, AdversityTier::High];

    /// `[lo, hi)`, except High which also admits 1.0.
    pub fn range(self) -> (f64, f64) {
        match self {
            AdversityTier::Low => (0.2, 0.4),
            AdversityTier::Medium => (0.4, 0.7),
            AdversityTier::High => (0.7, 1.0),
        }
    }

    pub fn contains(self, t: f64) -> bool {
        let (lo, hi) = self.range();
        t >= lo && (t < hi || (self == AdversityTier::High && t <= hi))
    }

    pub fn name(self) -> &'static str {
        match self {
            AdversityTier::Low => "low",
            AdversityTier::Medium => "medium",
            AdversityTier::High => "high",
        }
    }
}

/// Where an intensity is drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntensityRange {
    Tier(AdversityTier),
    /// `[0.2, 1.0]`, used for training-set generation.
    Train,
}

impl IntensityRange {
    pub fn bounds(self) -> (f64, f64) {
        match self {
            IntensityRange::Tier(tier) => tier.range(),
            IntensityRange::Train => (0.2, 1.0),
        }
    }
}

impl From<AdversityTier> for IntensityRange {
    fn from(t: AdversityTier) -> Self {
        IntensityRange::Tier(t)
    }
}

/// Uniform draw from `range`, a pure function of `seed`.
pub fn sample_intensity(range: impl Into<IntensityRange>, seed: u64) -> f64 {
    let (lo, hi) = range.into().bounds();
    lo + (hi - lo) * unit_f64(CounterRng::at(seed, 0))
}

/// Tunable constants of every built-in model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WeatherConfig {
    pub fog: FogModel,
    pub rain: RainModel,
    pub snow: SnowModel,
}

#[derive(Debug, Clone)]
pub struct WeatherRegistry {
    models: BTreeMap<String, Arc<dyn WeatherModel>>,
}

impl WeatherRegistry {
    pub fn empty() -> Self {
        Self {
            models: BTreeMap::new(),
        }
    }

    pub fn from_config(cfg: &WeatherConfig) -> Self {
        let mut reg = Self::empty();
        reg.register(Arc::new(NoWeather));
        reg.register(Arc::new(cfg.fog.clone()));
        reg.register(Arc::new(cfg.rain.clone()));
        reg.register(Arc::new(cfg.snow.clone()));
        reg
    }

    /// Registers under the model's own name, replacing any previous entry.
    pub fn register(&mut self, model: Arc<dyn WeatherModel>) {
        self.models.insert(model.name().to_string(), model);
    }

    pub fn get(&self, name: &str) -> Option<Arc<dyn WeatherModel>> {
        self.models.get(name).cloned()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.models.keys().map(String::as_str)
    }

    pub fn apply(&self, img: &Image, spec: &WeatherSpec) -> Result<Image> {
        let model = self
            .get(spec.condition.name())
            .ok_or_else(|| Error::Config(format!("no weather model registered for {}", spec.condition)))?;
        model.apply(img, spec.intensity, spec.seed)
    }
}

impl Default for WeatherRegistry {
    fn default() -> Self {
        Self::from_config(&WeatherConfig::default())
    }
}

fn defaults() -> &'static WeatherRegistry {
    static REGISTRY: OnceLock<WeatherRegistry> = OnceLock::new();
    REGISTRY.get_or_init(WeatherRegistry::default)
}

/// Applies `spec` with the default model constants.
pub fn apply_weather(img: &Image, spec: &WeatherSpec) -> Result<Image> {
    defaults().apply(img, spec)
}

pub fn apply_fog(img: &Image, t: f64, seed: u64) -> Result<Image> {
    FogModel::default().apply(img, t, seed)
}

pub fn apply_rain(img: &Image, t: f64, seed: u64) -> Result<Image> {
    RainModel::default().apply(img, t, seed)
}

pub fn apply_snow(img: &Image, t: f64, seed: u64) -> Result<Image> {
    SnowModel::default().apply(img, t, seed)
}

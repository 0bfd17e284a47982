//! Run configuration: a TOML file mapped onto the core pipeline config.
//!
//! Every key is optional; omitted keys keep the stock defaults for the
//! chosen seed. Unknown keys are rejected up front with the offending key
//! named, so typos fail before any compute starts. The material table can
//! be swapped wholesale through `materials_path`, resolved relative to the
//! config file.

use std::path::{Path, PathBuf};

use hydrovibe_core::em::MediumSpec;
use hydrovibe_core::eval::{PipelineConfig, FEATURE_RANK};
use hydrovibe_core::learn::RatioLoss;
use hydrovibe_core::synth::{DatasetManifest, PollutantModel};
use serde::Deserialize;

/// Configuration errors.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    /// Filesystem failure, with the path that caused it.
    #[error("{}: {source}", path.display())]
    Io {
        /// Offending path.
        path: PathBuf,
        /// Underlying error.
        #[source]
        source: std::io::Error,
    },
    /// TOML syntax or schema violation.
    #[error("{}: {message}", path.display())]
    Parse {
        /// Offending file.
        path: PathBuf,
        /// Parser message; names unknown keys.
        message: String,
    },
    /// Structurally valid TOML with out-of-range or inconsistent values.
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Parsed run configuration plus the directory it was loaded from.
#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    file: RunFile,
    base_dir: PathBuf,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunFile {
    /// Root seed; the `--seed` flag wins over this.
    seed: Option<u64>,
    /// Output directory; the `--out` flag wins over this.
    out_dir: Option<PathBuf>,
    /// Path to a material table file replacing the stock catalog.
    materials_path: Option<PathBuf>,
    #[serde(default)]
    dataset: DatasetSection,
    #[serde(default)]
    sweep: SweepSection,
    #[serde(default)]
    radar: RadarSection,
    #[serde(default)]
    scene: SceneSection,
    #[serde(default)]
    noise: NoiseSection,
    #[serde(default)]
    perturb: PerturbSection,
    #[serde(default)]
    tensor: TensorSection,
    #[serde(default)]
    parafac: ParafacSection,
    #[serde(default)]
    forest: ForestSection,
    #[serde(default)]
    train: TrainSection,
    #[serde(default)]
    eval: EvalSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetSection {
    replicates: Option<u32>,
    concentration_range: Option<[f64; 2]>,
    binary_ratios: Option<Vec<[f64; 2]>>,
    ternary_ratios: Option<Vec<[f64; 3]>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepSection {
    tone_start: Option<f64>,
    tone_end: Option<f64>,
    tone_step: Option<f64>,
    tone_duration: Option<f64>,
    frame_rate: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RadarSection {
    carrier_freq: Option<f64>,
    bandwidth: Option<f64>,
    chirp_duration: Option<f64>,
    chirp_interval: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneSection {
    surface_range_m: Option<f64>,
    liquid_depth_m: Option<f64>,
    water_permittivity: Option<f64>,
    antennas: Option<usize>,
    fast_time_samples: Option<usize>,
    scatterers_per_material: Option<usize>,
    backing_permittivity: Option<f64>,
    backing_attenuation: Option<f64>,
    backing_thickness: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct NoiseSection {
    /// SNR in dB; `inf` disables noise.
    snr_db: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PerturbSection {
    tilt_deg: Option<f64>,
    excitation_scale: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorSection {
    use_phase: Option<bool>,
    use_power: Option<bool>,
    use_aoa: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParafacSection {
    max_iters: Option<usize>,
    tol: Option<f64>,
    restarts: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ForestSection {
    tree_count: Option<usize>,
    max_depth: Option<usize>,
    min_leaf: Option<usize>,
    feature_subsample: Option<usize>,
    bootstrap: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainSection {
    hidden: Option<Vec<usize>>,
    residual: Option<bool>,
    /// `huber` or `mse`.
    ratio_loss: Option<String>,
    alpha: Option<f64>,
    beta: Option<f64>,
    huber_delta: Option<f64>,
    dropout: Option<f64>,
    peak_lr: Option<f64>,
    epochs: Option<usize>,
    batch_size: Option<usize>,
    weight_decay: Option<f64>,
    grad_clip_norm: Option<f64>,
    val_fraction: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct EvalSection {
    /// Ratio share at which a component counts as detected.
    presence_threshold: Option<f64>,
    /// Principal components kept by the projection baseline.
    pca_components: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct MaterialsFile {
    material: Vec<MaterialEntry>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct MaterialEntry {
    name: String,
    permittivity_delta: f64,
    attenuation_coeff: f64,
    resonance_freq: f64,
    damping_ratio: f64,
    displacement_gain: f64,
    angle_mean: f64,
    angle_spread: f64,
}

macro_rules! set {
    ($dst:expr, $src:expr) => {
        if let Some(v) = $src {
            $dst = v;
        }
    };
}

impl RunConfig {
    /// Loads and schema-checks a config file.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        let file: RunFile = toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.message().to_string(),
        })?;
        let base_dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        Ok(RunConfig { file, base_dir })
    }

    /// The built-in configuration, as if an empty file had been loaded.
    pub fn stock() -> Self {
        RunConfig::default()
    }

    /// Root seed after the command-line override.
    pub fn seed(&self, flag: Option<u64>) -> u64 {
        flag.or(self.file.seed).unwrap_or(0)
    }

    /// Output directory after the command-line override.
    pub fn out_dir(&self, flag: Option<&Path>) -> PathBuf {
        match (flag, &self.file.out_dir) {
            (Some(f), _) => f.to_path_buf(),
            (None, Some(d)) => self.base_dir.join(d),
            (None, None) => PathBuf::from("out"),
        }
    }

    /// Ratio share at which a component counts as detected.
    pub fn presence_threshold(&self) -> f64 {
        self.file.eval.presence_threshold.unwrap_or(0.1)
    }

    /// Principal components kept by the projection baseline.
    pub fn pca_components(&self) -> usize {
        self.file.eval.pca_components.unwrap_or(10)
    }

    /// Assembles the core pipeline config for the resolved seed.
    pub fn pipeline(&self, seed_flag: Option<u64>) -> Result<PipelineConfig, ConfigError> {
        let seed = self.seed(seed_flag);
        let mut cfg = PipelineConfig::with_seed(seed);
        let f = &self.file;

        set!(cfg.manifest.replicates, f.dataset.replicates);
        if let Some([lo, hi]) = f.dataset.concentration_range {
            cfg.manifest.concentration_range = (lo, hi);
        }
        set!(cfg.manifest.binary_ratios, f.dataset.binary_ratios.clone());
        set!(cfg.manifest.ternary_ratios, f.dataset.ternary_ratios.clone());
        if let Some(path) = &f.materials_path {
            cfg.manifest.materials = self.load_materials(&self.base_dir.join(path))?;
        }

        let sweep = &mut cfg.manifest.capture.sweep;
        set!(sweep.tone_start, f.sweep.tone_start);
        set!(sweep.tone_end, f.sweep.tone_end);
        set!(sweep.tone_step, f.sweep.tone_step);
        set!(sweep.tone_duration, f.sweep.tone_duration);
        set!(sweep.frame_rate, f.sweep.frame_rate);

        let radar = &mut cfg.manifest.capture.radar;
        set!(radar.carrier_freq, f.radar.carrier_freq);
        set!(radar.bandwidth, f.radar.bandwidth);
        set!(radar.chirp_duration, f.radar.chirp_duration);
        set!(radar.chirp_interval, f.radar.chirp_interval);

        let scene = &mut cfg.manifest.capture.scene;
        set!(scene.surface_range_m, f.scene.surface_range_m);
        set!(scene.liquid_depth_m, f.scene.liquid_depth_m);
        set!(scene.water_permittivity, f.scene.water_permittivity);
        set!(scene.antennas, f.scene.antennas);
        set!(scene.fast_time_samples, f.scene.fast_time_samples);
        set!(scene.scatterers_per_material, f.scene.scatterers_per_material);
        scene.backing = self.backing(scene.backing)?;

        set!(cfg.manifest.capture.noise_snr_db, f.noise.snr_db);
        set!(cfg.manifest.capture.perturb.tilt_deg, f.perturb.tilt_deg);
        set!(cfg.manifest.capture.perturb.excitation_scale, f.perturb.excitation_scale);

        set!(cfg.tensor.use_phase, f.tensor.use_phase);
        set!(cfg.tensor.use_power, f.tensor.use_power);
        set!(cfg.tensor.use_aoa, f.tensor.use_aoa);

        set!(cfg.parafac.max_iters, f.parafac.max_iters);
        set!(cfg.parafac.tol, f.parafac.tol);
        set!(cfg.parafac.restarts, f.parafac.restarts);

        set!(cfg.forest.tree_count, f.forest.tree_count);
        set!(cfg.forest.max_depth, f.forest.max_depth);
        set!(cfg.forest.min_leaf, f.forest.min_leaf);
        if f.forest.feature_subsample.is_some() {
            cfg.forest.feature_subsample = f.forest.feature_subsample;
        }
        set!(cfg.forest.bootstrap, f.forest.bootstrap);

        set!(cfg.train.arch.hidden, f.train.hidden.clone());
        set!(cfg.train.arch.residual, f.train.residual);
        if let Some(loss) = &f.train.ratio_loss {
            cfg.train.ratio_loss = match loss.as_str() {
                "huber" => RatioLoss::Huber,
                "mse" => RatioLoss::Mse,
                other => {
                    return Err(ConfigError::Invalid(format!(
                        "train.ratio_loss must be `huber` or `mse`, got `{other}`"
                    )))
                }
            };
        }
        set!(cfg.train.alpha, f.train.alpha);
        set!(cfg.train.beta, f.train.beta);
        set!(cfg.train.huber_delta, f.train.huber_delta);
        set!(cfg.train.dropout, f.train.dropout);
        set!(cfg.train.peak_lr, f.train.peak_lr);
        set!(cfg.train.epochs, f.train.epochs);
        set!(cfg.train.batch_size, f.train.batch_size);
        set!(cfg.train.weight_decay, f.train.weight_decay);
        set!(cfg.train.grad_clip_norm, f.train.grad_clip_norm);
        set!(cfg.train.val_fraction, f.train.val_fraction);
        set!(cfg.presence_threshold, f.eval.presence_threshold);

        validate(&mut cfg)?;
        Ok(cfg)
    }

    fn backing(&self, current: MediumSpec) -> Result<MediumSpec, ConfigError> {
        let s = &self.file.scene;
        if s.backing_permittivity.is_none()
            && s.backing_attenuation.is_none()
            && s.backing_thickness.is_none()
        {
            return Ok(current);
        }
        let eps = s.backing_permittivity.ok_or_else(|| {
            ConfigError::Invalid("overriding the backing needs scene.backing_permittivity".into())
        })?;
        let alpha = s.backing_attenuation.unwrap_or(0.0);
        let spec = match s.backing_thickness {
            Some(d) => MediumSpec::slab(eps, alpha, d),
            None => MediumSpec::new(eps, alpha),
        };
        spec.map_err(|e| ConfigError::Invalid(format!("scene backing: {e}")))
    }

    fn load_materials(&self, path: &Path) -> Result<Vec<PollutantModel>, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        let table: MaterialsFile = toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.message().to_string(),
        })?;
        if table.material.is_empty() {
            return Err(ConfigError::Invalid("material table is empty".into()));
        }
        Ok(table
            .material
            .into_iter()
            .map(|m| PollutantModel {
                name: m.name,
                permittivity_delta: m.permittivity_delta,
                attenuation_coeff: m.attenuation_coeff,
                resonance_freq: m.resonance_freq,
                damping_ratio: m.damping_ratio,
                displacement_gain: m.displacement_gain,
                angle_mean: m.angle_mean,
                angle_spread: m.angle_spread,
            })
            .collect())
    }
}

/// Range bins the tensor keeps around the surface return.
const RANGE_BINS: usize = 3;

/// Network input length for the fingerprints a manifest will produce.
fn feature_input_len(manifest: &DatasetManifest) -> usize {
    let tones = manifest.capture.sweep.tones();
    let angles = hydrovibe_core::dsp::default_angle_grid().len();
    FEATURE_RANK * (tones + RANGE_BINS + angles)
}

/// Cross-field checks plus the derived network shape.
fn validate(cfg: &mut PipelineConfig) -> Result<(), ConfigError> {
    cfg.manifest.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
    cfg.train.arch.input_len = feature_input_len(&cfg.manifest);
    cfg.train.arch.outputs = cfg.manifest.materials.len();
    if !(cfg.presence_threshold > 0.0 && cfg.presence_threshold < 1.0) {
        return Err(ConfigError::Invalid("eval.presence_threshold must lie in (0, 1)".into()));
    }
    cfg.train
        .validate()
        .map_err(|e| ConfigError::Invalid(format!("train: {e}")))?;
    Ok(())
}

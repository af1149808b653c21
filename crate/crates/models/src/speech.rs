//! Per-frame audio-window to canonical-displacement regressor.
//!
//! Encoder: the 16×29 window is a 16-channel signal over the 29 feature
//! bins. Three stride-2 convolutions (kernel 3, padding 1) reduce the width
//! 29 → 15 → 8 → 4, a final kernel-4 convolution collapses it to 1. Each
//! convolution is followed by a leaky rectifier (slope 0.2). Decoder: a
//! linear map from the code to K PCA coefficients and a linear map from the
//! coefficients to the 136 displacement coordinates, the latter initialised
//! with the PCA components and mean.

use std::path::Path;

use candle_core::{DType, Device, Tensor};
use candle_nn::{AdamW, Optimizer, ParamsAdamW};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use talkface_core::audio::{AudioFeatureWindow, FEATURE_DIM, WINDOW_LEN};
use talkface_core::pca::{pca_fit, PcaBasis};
use talkface_core::CanonicalDisplacement;

use crate::error::{Error, Result};
use crate::layers::{leaky_relu, Conv1d, Linear};
use crate::params::{Checkpoint, ParamStore};

pub const OUTPUT_DIM: usize = 136;
pub const CHECKPOINT_KIND: &str = "speech2landmark";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpeechModelConfig {
    pub channels: [usize; 4],
    pub pca_k: usize,
    pub leak: f64,
}

impl Default for SpeechModelConfig {
    fn default() -> Self {
        Self {
            channels: [32, 64, 128, 256],
            pca_k: 16,
            leak: 0.2,
        }
    }
}

pub struct Speech2Landmark {
    config: SpeechModelConfig,
    store: ParamStore,
    convs: Vec<Conv1d>,
    to_coeffs: Linear,
    to_output: Linear,
    basis: Option<PcaBasis>,
}

impl Speech2Landmark {
    pub fn new(config: SpeechModelConfig, seed: u64, dtype: DType) -> Result<Self> {
        if config.pca_k == 0 || config.channels.contains(&0) {
            return Err(Error::InvalidArgument("speech model sizes must be positive".into()));
        }
        let mut store = ParamStore::new(seed, dtype);
        let c = config.channels;
        let convs = vec![
            Conv1d::new(&mut store, "enc.0", WINDOW_LEN, c[0], 3, 2, 1)?,
            Conv1d::new(&mut store, "enc.1", c[0], c[1], 3, 2, 1)?,
            Conv1d::new(&mut store, "enc.2", c[1], c[2], 3, 2, 1)?,
            Conv1d::new(&mut store, "enc.3", c[2], c[3], 4, 1, 0)?,
        ];
        let to_coeffs = Linear::new(&mut store, "dec.0", c[3], config.pca_k)?;
        let to_output = Linear::new(&mut store, "dec.1", config.pca_k, OUTPUT_DIM)?;
        Ok(Self {
            config,
            store,
            convs,
            to_coeffs,
            to_output,
            basis: None,
        })
    }

    /// Builds a model whose PCA width matches `basis` and initialises its
    /// output layer from it.
    pub fn with_pca(mut config: SpeechModelConfig, basis: &PcaBasis, seed: u64, dtype: DType) -> Result<Self> {
        config.pca_k = basis.k();
        let mut model = Self::new(config, seed, dtype)?;
        model.init_from_pca(basis)?;
        Ok(model)
    }

    pub fn config(&self) -> &SpeechModelConfig {
        &self.config
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn basis(&self) -> Option<&PcaBasis> {
        self.basis.as_ref()
    }

    /// Output weight = componentsᵀ (136×K), output bias = PCA mean.
    pub fn init_from_pca(&mut self, basis: &PcaBasis) -> Result<()> {
        if basis.k() != self.config.pca_k || basis.dim() != OUTPUT_DIM {
            return Err(Error::InvalidArgument(format!(
                "PCA basis is {}×{}, model expects {}×{OUTPUT_DIM}",
                basis.k(),
                basis.dim(),
                self.config.pca_k
            )));
        }
        let dev = self.store.device().clone();
        let rows: Vec<f64> = (0..basis.k())
            .flat_map(|i| basis.components().row(i).iter().copied().collect::<Vec<_>>())
            .collect();
        let w = Tensor::from_vec(rows, (basis.k(), OUTPUT_DIM), &dev)?.t()?.contiguous()?;
        self.store.assign(&self.to_output.weight_name, &w)?;
        let b = Tensor::from_vec(basis.mean().iter().copied().collect::<Vec<f64>>(), OUTPUT_DIM, &dev)?;
        self.store.assign(&self.to_output.bias_name, &b)?;
        self.basis = Some(basis.clone());
        Ok(())
    }

    pub fn zero_output_layer(&self) -> Result<()> {
        let dev = self.store.device();
        self.store.assign(
            &self.to_output.weight_name,
            &Tensor::zeros((OUTPUT_DIM, self.config.pca_k), DType::F64, dev)?,
        )?;
        self.store
            .assign(&self.to_output.bias_name, &Tensor::zeros(OUTPUT_DIM, DType::F64, dev)?)
    }

    /// (N, 16, 29) → (N, 136).
    pub fn forward_tensor(&self, x: &Tensor) -> Result<Tensor> {
        let mut h = x.clone();
        for conv in &self.convs {
            h = leaky_relu(&conv.forward(&h)?, self.config.leak)?;
        }
        let code = h.flatten_from(1)?;
        self.to_output.forward(&self.to_coeffs.forward(&code)?)
    }

    pub fn windows_tensor(&self, windows: &[AudioFeatureWindow]) -> Result<Tensor> {
        windows_tensor(windows, self.store.dtype())
    }

    pub fn predict(&self, windows: &[AudioFeatureWindow]) -> Result<Vec<CanonicalDisplacement>> {
        if windows.is_empty() {
            return Ok(Vec::new());
        }
        let out = self
            .forward_tensor(&self.windows_tensor(windows)?)?
            .to_dtype(DType::F64)?
            .to_vec2::<f64>()?;
        out.iter()
            .map(|row| Ok(CanonicalDisplacement::from_flat(row)?))
            .collect()
    }

    pub fn forward(&self, window: &AudioFeatureWindow) -> Result<CanonicalDisplacement> {
        Ok(self.predict(std::slice::from_ref(window))?.remove(0))
    }

    pub fn save(&self, path: impl AsRef<Path>, training: serde_json::Value) -> Result<()> {
        let mut tensors = self.store.tensors();
        if let Some(basis) = &self.basis {
            tensors.extend(basis_tensors(basis)?);
        }
        Checkpoint {
            kind: CHECKPOINT_KIND.into(),
            config: serde_json::json!({ "model": self.config, "training": training }),
            tensors,
        }
        .save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let ckpt = Checkpoint::load(path.as_ref(), CHECKPOINT_KIND)?;
        let config: SpeechModelConfig = serde_json::from_value(ckpt.config["model"].clone())
            .map_err(|e| Error::checkpoint(path.as_ref(), e.to_string()))?;
        let dtype = ckpt.tensor("dec.1.weight")?.dtype();
        let mut model = Self::new(config, 0, dtype)?;
        model.store.load(&ckpt.tensors)?;
        model.basis = basis_from_tensors(&ckpt)?;
        Ok(model)
    }
}

pub fn windows_tensor(windows: &[AudioFeatureWindow], dtype: DType) -> Result<Tensor> {
    let flat: Vec<f32> = windows.iter().flat_map(|w| w.to_flat()).collect();
    Ok(Tensor::from_vec(flat, (windows.len(), WINDOW_LEN, FEATURE_DIM), &Device::Cpu)?.to_dtype(dtype)?)
}

pub fn displacements_tensor(deltas: &[CanonicalDisplacement], dtype: DType) -> Result<Tensor> {
    let flat: Vec<f64> = deltas.iter().flat_map(|d| d.to_flat()).collect();
    Ok(Tensor::from_vec(flat, (deltas.len(), OUTPUT_DIM), &Device::Cpu)?.to_dtype(dtype)?)
}

pub(crate) fn basis_tensors(basis: &PcaBasis) -> Result<Vec<(String, Tensor)>> {
    let dev = Device::Cpu;
    let (k, d) = (basis.k(), basis.dim());
    let rows: Vec<f64> = (0..k).flat_map(|i| basis.components().row(i).iter().copied().collect::<Vec<_>>()).collect();
    Ok(vec![
        ("pca.components".into(), Tensor::from_vec(rows, (k, d), &dev)?),
        ("pca.mean".into(), Tensor::from_vec(basis.mean().as_slice().to_vec(), d, &dev)?),
        (
            "pca.explained_variance_ratio".into(),
            Tensor::from_vec(basis.explained_variance_ratio().to_vec(), k, &dev)?,
        ),
    ])
}

pub(crate) fn basis_from_tensors(ckpt: &Checkpoint) -> Result<Option<PcaBasis>> {
    let Some(comps) = ckpt.tensors.get("pca.components") else {
        return Ok(None);
    };
    let (k, d) = comps.dims2()?;
    let rows = comps.to_dtype(DType::F64)?.flatten_all()?.to_vec1::<f64>()?;
    let mean = ckpt.tensor("pca.mean")?.to_dtype(DType::F64)?.to_vec1::<f64>()?;
    let ratio = ckpt
        .tensor("pca.explained_variance_ratio")?
        .to_dtype(DType::F64)?
        .to_vec1::<f64>()?;
    Ok(Some(PcaBasis::from_parts(
        DMatrix::from_row_slice(k, d, &rows),
        DVector::from_vec(mean),
        ratio,
    )?))
}

// ---- losses -----------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpeechLossWeights {
    pub lmark: f64,
    pub temp: f64,
}

impl Default for SpeechLossWeights {
    fn default() -> Self {
        Self { lmark: 1.0, temp: 0.5 }
    }
}

/// Squared Euclidean distance between two displacement fields.
pub fn loss_lmark(pred: &CanonicalDisplacement, truth: &CanonicalDisplacement) -> f64 {
    pred.deltas()
        .iter()
        .zip(truth.deltas())
        .map(|(p, t)| (p - t).norm_squared())
        .sum()
}

/// Squared norm of the difference between predicted and true frame-to-frame motion.
pub fn loss_temp(
    pred_t: &CanonicalDisplacement,
    pred_t1: &CanonicalDisplacement,
    truth_t: &CanonicalDisplacement,
    truth_t1: &CanonicalDisplacement,
) -> f64 {
    (0..pred_t.deltas().len())
        .map(|i| {
            let dp = pred_t1.delta(i) - pred_t.delta(i);
            let dt = truth_t1.delta(i) - truth_t.delta(i);
            (dp - dt).norm_squared()
        })
        .sum()
}

pub fn loss_total(lmark: f64, temp: f64, weights: SpeechLossWeights) -> f64 {
    weights.lmark * lmark + weights.temp * temp
}

/// Mean over frames of the per-frame landmark loss; inputs (N, 136).
pub fn lmark_loss_tensor(pred: &Tensor, truth: &Tensor) -> Result<Tensor> {
    Ok((pred - truth)?.sqr()?.sum(1)?.mean(0)?)
}

/// Mean over adjacent pairs of one contiguous (L, 136) subsequence; zero for L < 2.
pub fn temp_loss_tensor(pred: &Tensor, truth: &Tensor) -> Result<Tensor> {
    let l = pred.dim(0)?;
    if l < 2 {
        return Ok(Tensor::zeros((), pred.dtype(), pred.device())?);
    }
    let motion = |x: &Tensor| -> Result<Tensor> { Ok((x.narrow(0, 1, l - 1)? - x.narrow(0, 0, l - 1)?)?) };
    Ok((motion(pred)? - motion(truth)?)?.sqr()?.sum(1)?.mean(0)?)
}

// ---- training ---------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpeechTrainConfig {
    pub steps: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Subsequences per step.
    pub batch: usize,
    /// Frames per subsequence.
    pub seq_len: usize,
    pub weights: SpeechLossWeights,
    pub pca_variance: f64,
    pub seed: u64,
}

impl Default for SpeechTrainConfig {
    fn default() -> Self {
        Self {
            steps: 2000,
            lr: 1e-4,
            beta1: 0.5,
            beta2: 0.999,
            batch: 4,
            seq_len: 16,
            weights: SpeechLossWeights::default(),
            pca_variance: 0.99,
            seed: 0,
        }
    }
}

/// One clip's per-frame windows and target displacements.
#[derive(Clone, Debug)]
pub struct SpeechSequence {
    pub windows: Vec<AudioFeatureWindow>,
    pub targets: Vec<CanonicalDisplacement>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeechLossRecord {
    pub total: f64,
    pub lmark: f64,
    pub temp: f64,
}

pub struct TrainedSpeech {
    pub model: Speech2Landmark,
    pub history: Vec<SpeechLossRecord>,
}

/// Fits the displacement PCA on the training targets, builds a
/// PCA-initialised model and optimises it.
pub fn train_speech(
    data: &[SpeechSequence],
    model_config: SpeechModelConfig,
    config: &SpeechTrainConfig,
    dtype: DType,
) -> Result<TrainedSpeech> {
    let targets: Vec<Vec<f64>> = data
        .iter()
        .flat_map(|s| s.targets.iter().map(|d| d.to_flat()))
        .collect();
    if targets.is_empty() {
        return Err(Error::Empty("speech training set"));
    }
    let basis = pca_fit(&targets, config.pca_variance)?;
    let mut model = Speech2Landmark::with_pca(model_config, &basis, config.seed, dtype)?;
    let history = train_speech_model(&mut model, data, config)?;
    Ok(TrainedSpeech { model, history })
}

pub fn train_speech_model(
    model: &mut Speech2Landmark,
    data: &[SpeechSequence],
    config: &SpeechTrainConfig,
) -> Result<Vec<SpeechLossRecord>> {
    let dtype = model.store.dtype();
    let mut clips = Vec::new();
    for seq in data {
        if seq.windows.len() != seq.targets.len() {
            return Err(Error::InvalidArgument(format!(
                "{} windows for {} targets",
                seq.windows.len(),
                seq.targets.len()
            )));
        }
        if !seq.windows.is_empty() {
            clips.push((
                windows_tensor(&seq.windows, dtype)?,
                displacements_tensor(&seq.targets, dtype)?,
            ));
        }
    }
    if clips.is_empty() {
        return Err(Error::Empty("speech training set"));
    }
    if config.batch == 0 || config.seq_len == 0 {
        return Err(Error::InvalidArgument("batch and seq_len must be positive".into()));
    }
    let mut opt = AdamW::new(
        model.store.vars().to_vec(),
        ParamsAdamW {
            lr: config.lr,
            beta1: config.beta1,
            beta2: config.beta2,
            eps: 1e-8,
            weight_decay: 0.0,
        },
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_5eec);
    let mut history = Vec::with_capacity(config.steps);
    for _ in 0..config.steps {
        let mut inputs = Vec::with_capacity(config.batch);
        let mut truths = Vec::with_capacity(config.batch);
        let mut lens = Vec::with_capacity(config.batch);
        for _ in 0..config.batch {
            let (x, y) = &clips[rng.random_range(0..clips.len())];
            let n = x.dim(0)?;
            let len = config.seq_len.min(n);
            let start = rng.random_range(0..=n - len);
            inputs.push(x.narrow(0, start, len)?);
            truths.push(y.narrow(0, start, len)?);
            lens.push(len);
        }
        let pred = model.forward_tensor(&Tensor::cat(&inputs, 0)?)?;
        let truth = Tensor::cat(&truths, 0)?;
        let lmark = lmark_loss_tensor(&pred, &truth)?;
        let mut temp_terms = Vec::new();
        let mut offset = 0;
        for &len in &lens {
            if len >= 2 {
                let p = pred.narrow(0, offset, len)?;
                let t = truth.narrow(0, offset, len)?;
                temp_terms.push((temp_loss_tensor(&p, &t)? * (len - 1) as f64)?);
            }
            offset += len;
        }
        let pairs: usize = lens.iter().map(|&l| l.saturating_sub(1)).sum();
        let temp = if pairs == 0 {
            Tensor::zeros((), dtype, pred.device())?
        } else {
            (Tensor::stack(&temp_terms, 0)?.sum(0)? / pairs as f64)?
        };
        let total = ((&lmark * config.weights.lmark)? + (&temp * config.weights.temp)?)?;
        let scalar = |t: &Tensor| -> Result<f64> { Ok(t.to_dtype(DType::F64)?.to_scalar::<f64>()?) };
        history.push(SpeechLossRecord {
            total: scalar(&total)?,
            lmark: scalar(&lmark)?,
            temp: scalar(&temp)?,
        });
        opt.backward_step(&total)?;
    }
    Ok(history)
}

//! Noise-driven recurrent generator of eye-region displacement sequences,
//! trained without a discriminator by kernel MMD plus a min-max range
//! penalty.

use std::path::Path;

use candle_core::{DType, Device, Tensor};
use candle_nn::{AdamW, Optimizer, ParamsAdamW};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use talkface_core::blink::{BlinkFrame, BlinkSequence, BLINK_DIM};
use talkface_core::pca::{pca_fit, PcaBasis};

use crate::error::{Error, Result};
use crate::layers::{GruCell, Linear};
use crate::params::{Checkpoint, ParamStore};
use crate::speech::{basis_from_tensors, basis_tensors};

pub const CHECKPOINT_KIND: &str = "blink";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BlinkModelConfig {
    pub noise_dim: usize,
    pub hidden: usize,
    pub pca_k: usize,
}

impl Default for BlinkModelConfig {
    fn default() -> Self {
        Self {
            noise_dim: 10,
            hidden: 64,
            pca_k: 4,
        }
    }
}

pub struct BlinkGenerator {
    config: BlinkModelConfig,
    store: ParamStore,
    gru: GruCell,
    to_coeffs: Linear,
    to_output: Linear,
    basis: Option<PcaBasis>,
}

impl BlinkGenerator {
    pub fn new(config: BlinkModelConfig, seed: u64, dtype: DType) -> Result<Self> {
        if config.noise_dim == 0 || config.hidden == 0 || config.pca_k == 0 {
            return Err(Error::InvalidArgument("blink model sizes must be positive".into()));
        }
        let mut store = ParamStore::new(seed, dtype);
        let gru = GruCell::new(&mut store, "rnn", config.noise_dim, config.hidden)?;
        let to_coeffs = Linear::new(&mut store, "dec.0", config.hidden, config.pca_k)?;
        let to_output = Linear::new(&mut store, "dec.1", config.pca_k, BLINK_DIM)?;
        Ok(Self {
            config,
            store,
            gru,
            to_coeffs,
            to_output,
            basis: None,
        })
    }

    pub fn with_pca(mut config: BlinkModelConfig, basis: &PcaBasis, seed: u64, dtype: DType) -> Result<Self> {
        config.pca_k = basis.k();
        let mut gen = Self::new(config, seed, dtype)?;
        gen.init_from_pca(basis)?;
        Ok(gen)
    }

    pub fn config(&self) -> &BlinkModelConfig {
        &self.config
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn basis(&self) -> Option<&PcaBasis> {
        self.basis.as_ref()
    }

    pub fn init_from_pca(&mut self, basis: &PcaBasis) -> Result<()> {
        if basis.k() != self.config.pca_k || basis.dim() != BLINK_DIM {
            return Err(Error::InvalidArgument(format!(
                "PCA basis is {}×{}, blink generator expects {}×{BLINK_DIM}",
                basis.k(),
                basis.dim(),
                self.config.pca_k
            )));
        }
        let dev = self.store.device().clone();
        let rows: Vec<f64> = (0..basis.k())
            .flat_map(|i| basis.components().row(i).iter().copied().collect::<Vec<_>>())
            .collect();
        let w = Tensor::from_vec(rows, (basis.k(), BLINK_DIM), &dev)?.t()?.contiguous()?;
        self.store.assign(&self.to_output.weight_name, &w)?;
        let b = Tensor::from_vec(basis.mean().as_slice().to_vec(), BLINK_DIM, &dev)?;
        self.store.assign(&self.to_output.bias_name, &b)?;
        self.basis = Some(basis.clone());
        Ok(())
    }

    /// Standard normal noise of shape (B, T, noise_dim).
    pub fn noise(&self, batch: usize, len: usize, rng: &mut ChaCha8Rng) -> Result<Tensor> {
        let n = batch * len * self.config.noise_dim;
        let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        Ok(Tensor::from_vec(z, (batch, len, self.config.noise_dim), &Device::Cpu)?.to_dtype(self.store.dtype())?)
    }

    /// (B, T, noise_dim) → (B, T, 44).
    pub fn forward_tensor(&self, z: &Tensor) -> Result<Tensor> {
        let (b, t, _) = z.dims3()?;
        let h = self.gru.forward_sequence(z)?.reshape((b * t, self.config.hidden))?;
        let out = self.to_output.forward(&self.to_coeffs.forward(&h)?)?;
        Ok(out.reshape((b, t, BLINK_DIM))?)
    }

    pub fn generate_batch(&self, count: usize, len: usize, seed: u64) -> Result<Vec<BlinkSequence>> {
        if len == 0 {
            return Err(Error::InvalidArgument("blink sequence length must be at least 1".into()));
        }
        if count == 0 {
            return Ok(Vec::new());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let out = self.forward_tensor(&self.noise(count, len, &mut rng)?)?;
        tensor_to_sequences(&out)
    }

    pub fn generate(&self, len: usize, seed: u64) -> Result<BlinkSequence> {
        Ok(self.generate_batch(1, len, seed)?.remove(0))
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
        let config: BlinkModelConfig = serde_json::from_value(ckpt.config["model"].clone())
            .map_err(|e| Error::checkpoint(path.as_ref(), e.to_string()))?;
        let dtype = ckpt.tensor("dec.1.weight")?.dtype();
        let mut gen = Self::new(config, 0, dtype)?;
        gen.store.load(&ckpt.tensors)?;
        gen.basis = basis_from_tensors(&ckpt)?;
        Ok(gen)
    }
}

pub fn sequences_tensor(seqs: &[BlinkSequence], dtype: DType) -> Result<Tensor> {
    let len = seqs.first().map_or(0, |s| s.len());
    if seqs.iter().any(|s| s.len() != len) {
        return Err(Error::InvalidArgument("blink sequences differ in length".into()));
    }
    let flat: Vec<f64> = seqs.iter().flat_map(|s| s.to_flat()).collect();
    Ok(Tensor::from_vec(flat, (seqs.len(), len, BLINK_DIM), &Device::Cpu)?.to_dtype(dtype)?)
}

pub fn tensor_to_sequences(t: &Tensor) -> Result<Vec<BlinkSequence>> {
    let (b, len, _) = t.dims3()?;
    let flat = t.to_dtype(DType::F64)?.flatten_all()?.to_vec1::<f64>()?;
    let per = len * BLINK_DIM;
    (0..b)
        .map(|i| Ok(BlinkSequence::from_flat(&flat[i * per..(i + 1) * per])?))
        .collect()
}

// ---- MMD ----------------------------------------------------------------------

/// Biased MMD² between rows of `real` (N, D) and `fake` (M, D) under the
/// Gaussian kernel exp(−|x−y|²/(2σ)):
/// mean k(r, r') − 2 mean k(r, f) + mean k(f, f').
pub fn mmd_tensor(real: &Tensor, fake: &Tensor, sigma: f64) -> Result<Tensor> {
    mmd_multi_tensor(real, fake, &[sigma])
}

/// Sum of MMD² terms over several kernel widths.
pub fn mmd_multi_tensor(real: &Tensor, fake: &Tensor, sigmas: &[f64]) -> Result<Tensor> {
    if sigmas.is_empty() || sigmas.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::InvalidArgument("kernel widths must be positive".into()));
    }
    let sq = |a: &Tensor, b: &Tensor| -> Result<Tensor> {
        let d = a.unsqueeze(1)?.broadcast_sub(&b.unsqueeze(0)?)?;
        Ok(d.sqr()?.sum(2)?)
    };
    let (rr, rf, ff) = (sq(real, real)?, sq(real, fake)?, sq(fake, fake)?);
    let mut total: Option<Tensor> = None;
    for &sigma in sigmas {
        let k = |d: &Tensor| -> Result<Tensor> { Ok((d * (-1.0 / (2.0 * sigma)))?.exp()?.mean_all()?) };
        let term = ((k(&rr)? - (k(&rf)? * 2.0)?)? + k(&ff)?)?;
        total = Some(match total {
            None => term,
            Some(t) => (t + term)?,
        });
    }
    Ok(total.expect("at least one width"))
}

fn flatten_batch(seqs: &[BlinkSequence]) -> Result<Tensor> {
    let t = sequences_tensor(seqs, DType::F64)?;
    let (b, len, d) = t.dims3()?;
    Ok(t.reshape((b, len * d))?)
}

pub fn mmd_loss(real: &[BlinkSequence], fake: &[BlinkSequence], sigma: f64) -> Result<f64> {
    if real.is_empty() || fake.is_empty() {
        return Err(Error::Empty("MMD batch"));
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!("kernel width must be positive, got {sigma}")));
    }
    if real[0].len() != fake[0].len() {
        return Err(Error::InvalidArgument("real and fake sequences differ in length".into()));
    }
    Ok(mmd_tensor(&flatten_batch(real)?, &flatten_batch(fake)?, sigma)?.to_scalar::<f64>()?)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn pairwise_sq(rows: &[Vec<f64>]) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            out.push(rows[i].iter().zip(&rows[j]).map(|(a, b)| (a - b) * (a - b)).sum());
        }
    }
    out
}

/// Median pairwise squared distance of the real batch; falls back to the
/// pooled real+fake batch, then to 1, when that median is zero.
pub fn median_sigma(real: &[Vec<f64>], fake: &[Vec<f64>]) -> f64 {
    let own = pairwise_sq(real);
    if !own.is_empty() {
        let m = median(own);
        if m > 0.0 {
            return m;
        }
    }
    let pooled: Vec<Vec<f64>> = real.iter().chain(fake).cloned().collect();
    let all = pairwise_sq(&pooled);
    if !all.is_empty() {
        let m = median(all);
        if m > 0.0 {
            return m;
        }
    }
    1.0
}

// ---- range penalty -------------------------------------------------------------

/// Sum of squared excursions outside [lo, hi] over every frame and coordinate.
pub fn range_regularizer(fake: &BlinkSequence, lo: &BlinkFrame, hi: &BlinkFrame) -> f64 {
    fake.frames()
        .iter()
        .flat_map(|f| f.iter().enumerate())
        .map(|(i, &v)| {
            let over = (v - hi[i]).max(0.0);
            let under = (lo[i] - v).max(0.0);
            over * over + under * under
        })
        .sum()
}

/// Tensor form over (B, T, 44), averaged over the batch.
pub fn range_regularizer_tensor(fake: &Tensor, lo: &Tensor, hi: &Tensor) -> Result<Tensor> {
    let b = fake.dim(0)?;
    let over = fake.broadcast_sub(hi)?.relu()?.sqr()?;
    let under = fake.broadcast_sub(lo)?.neg()?.relu()?.sqr()?;
    Ok(((over + under)?.sum_all()? / b as f64)?)
}

// ---- training --------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BlinkTrainConfig {
    pub steps: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub real_batch: usize,
    pub fake_batch: usize,
    pub lambda_range: f64,
    /// Kernel widths used, as multiples of the median-heuristic width.
    pub bandwidth_scales: Vec<f64>,
    /// Anneal the learning rate to zero along a half cosine instead of
    /// keeping it constant.
    pub cosine_decay: bool,
    pub pca_variance: f64,
    pub seed: u64,
}

impl Default for BlinkTrainConfig {
    fn default() -> Self {
        Self {
            steps: 1500,
            lr: 1e-3,
            beta1: 0.5,
            beta2: 0.999,
            real_batch: 32,
            fake_batch: 32,
            lambda_range: 1.0,
            bandwidth_scales: vec![0.2, 0.5, 1.0, 2.0],
            cosine_decay: false,
            pca_variance: 0.99,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlinkLossRecord {
    pub total: f64,
    pub mmd: f64,
    pub range: f64,
    pub sigma: f64,
}

pub struct TrainedBlink {
    pub generator: BlinkGenerator,
    pub history: Vec<BlinkLossRecord>,
    pub lo: BlinkFrame,
    pub hi: BlinkFrame,
}

pub fn train_blink(
    real: &[BlinkSequence],
    model_config: BlinkModelConfig,
    config: &BlinkTrainConfig,
    dtype: DType,
) -> Result<TrainedBlink> {
    if real.is_empty() {
        return Err(Error::Empty("blink training set"));
    }
    let frames: Vec<Vec<f64>> = real.iter().flat_map(|s| s.frames().iter().map(|f| f.to_vec())).collect();
    let basis = pca_fit(&frames, config.pca_variance)?;
    let mut gen = BlinkGenerator::with_pca(model_config, &basis, config.seed, dtype)?;
    let (history, lo, hi) = train_blink_model(&mut gen, real, config)?;
    Ok(TrainedBlink {
        generator: gen,
        history,
        lo,
        hi,
    })
}

pub fn train_blink_model(
    gen: &mut BlinkGenerator,
    real: &[BlinkSequence],
    config: &BlinkTrainConfig,
) -> Result<(Vec<BlinkLossRecord>, BlinkFrame, BlinkFrame)> {
    let (lo, hi) = BlinkSequence::range(real).ok_or(Error::Empty("blink training set"))?;
    let len = real[0].len();
    if len == 0 || real.iter().any(|s| s.len() != len) {
        return Err(Error::InvalidArgument("blink training sequences must share a positive length".into()));
    }
    if config.real_batch == 0 || config.fake_batch == 0 {
        return Err(Error::InvalidArgument("batch sizes must be positive".into()));
    }
    let dtype = gen.store.dtype();
    let flat_real: Vec<Vec<f64>> = real.iter().map(|s| s.to_flat()).collect();
    let lo_t = Tensor::from_vec(lo.to_vec(), BLINK_DIM, &Device::Cpu)?.to_dtype(dtype)?;
    let hi_t = Tensor::from_vec(hi.to_vec(), BLINK_DIM, &Device::Cpu)?.to_dtype(dtype)?;
    let mut opt = AdamW::new(
        gen.store.vars().to_vec(),
        ParamsAdamW {
            lr: config.lr,
            beta1: config.beta1,
            beta2: config.beta2,
            eps: 1e-8,
            weight_decay: 0.0,
        },
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0xb11c_0000);
    let mut history = Vec::with_capacity(config.steps);
    for step in 0..config.steps {
        if config.cosine_decay {
            let progress = step as f64 / config.steps as f64;
            opt.set_learning_rate(config.lr * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos()));
        }
        let picks: Vec<Vec<f64>> = (0..config.real_batch)
            .map(|_| flat_real[rng.random_range(0..flat_real.len())].clone())
            .collect();
        let real_t = Tensor::from_vec(
            picks.iter().flatten().copied().collect::<Vec<f64>>(),
            (picks.len(), len * BLINK_DIM),
            &Device::Cpu,
        )?
        .to_dtype(dtype)?;
        let fake = gen.forward_tensor(&gen.noise(config.fake_batch, len, &mut rng)?)?;
        let fake_flat = fake.reshape((config.fake_batch, len * BLINK_DIM))?;
        let fake_rows = fake_flat.to_dtype(DType::F64)?.to_vec2::<f64>()?;
        let sigma = median_sigma(&picks, &fake_rows);
        let sigmas: Vec<f64> = config.bandwidth_scales.iter().map(|s| s * sigma).collect();
        let mmd = mmd_multi_tensor(&real_t, &fake_flat, &sigmas)?;
        let range = range_regularizer_tensor(&fake, &lo_t, &hi_t)?;
        let total = (&mmd + (&range * config.lambda_range)?)?;
        let scalar = |t: &Tensor| -> Result<f64> { Ok(t.to_dtype(DType::F64)?.to_scalar::<f64>()?) };
        history.push(BlinkLossRecord {
            total: scalar(&total)?,
            mmd: scalar(&mmd)?,
            range: scalar(&range)?,
            sigma,
        });
        opt.backward_step(&total)?;
    }
    Ok((history, lo, hi))
}

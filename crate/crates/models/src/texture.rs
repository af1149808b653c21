//! Landmark-conditioned face generator with attention compositing, and a
//! patch discriminator.
//!
//! Generator: a shared landmark encoder embeds the current and the identity
//! landmark images; their feature difference is concatenated with the
//! identity image and passed through a 7×7 stem, stride-2 downsampling,
//! residual blocks and nearest-neighbour upsampling. Two 7×7 heads with
//! sigmoid outputs give the colour map and the attention map, and the frame
//! is `(1 − att)·C + att·I_id`.

use std::path::Path;

use candle_core::{DType, Device, Tensor};
use candle_nn::{AdamW, Optimizer, ParamsAdamW};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use talkface_core::image::{FaceImage, GrayImage};
use talkface_core::landmarks::{LEFT_EYE, MOUTH, RIGHT_EYE};
use talkface_core::raster::{render_landmark_image, LandmarkImage};
use talkface_core::{LandmarkSet, Point};

use crate::error::{Error, Result};
use crate::layers::{leaky_relu, sigmoid, Conv2d, InstanceNorm};
use crate::params::{Checkpoint, ParamStore};

pub const GENERATOR_KIND: &str = "texture-generator";
pub const DISCRIMINATOR_KIND: &str = "texture-discriminator";

pub type AttentionMap = GrayImage;
pub type ColorMap = FaceImage;

// ---- compositing and losses ----------------------------------------------------

pub fn compose(att: &AttentionMap, color: &ColorMap, identity: &FaceImage) -> Result<FaceImage> {
    color.same_size(identity)?;
    if att.height() != identity.height() || att.width() != identity.width() {
        return Err(Error::InvalidArgument(format!(
            "attention map is {}×{}, images are {}×{}",
            att.height(),
            att.width(),
            identity.height(),
            identity.width()
        )));
    }
    let plane = att.data().len();
    let data = color
        .data()
        .iter()
        .zip(identity.data())
        .enumerate()
        .map(|(i, (&c, &id))| {
            let a = att.data()[i % plane];
            (1.0 - a) * c + a * id
        })
        .collect();
    Ok(FaceImage::from_planar(identity.height(), identity.width(), data)?)
}

/// (B,1,H,W), (B,3,H,W), (B,3,H,W) → (B,3,H,W).
pub fn compose_tensor(att: &Tensor, color: &Tensor, identity: &Tensor) -> Result<Tensor> {
    let keep = att.affine(-1.0, 1.0)?;
    Ok((color.broadcast_mul(&keep)? + identity.broadcast_mul(att)?)?)
}

fn check_mask(img: &FaceImage, mask: &GrayImage) -> Result<()> {
    if mask.height() != img.height() || mask.width() != img.width() {
        return Err(Error::InvalidArgument("mask size does not match image".into()));
    }
    Ok(())
}

/// Σ mask·|pred − truth| over channels and pixels.
pub fn pixel_loss_sum(pred: &FaceImage, truth: &FaceImage, mask: &GrayImage) -> Result<f64> {
    pred.same_size(truth)?;
    check_mask(pred, mask)?;
    let plane = mask.data().len();
    Ok(pred
        .data()
        .iter()
        .zip(truth.data())
        .enumerate()
        .map(|(i, (&p, &t))| mask.data()[i % plane] as f64 * (p as f64 - t as f64).abs())
        .sum())
}

/// Mean of mask·|pred − truth| over batch, channels and pixels.
pub fn pixel_loss_tensor(pred: &Tensor, truth: &Tensor, mask: &Tensor) -> Result<Tensor> {
    Ok((pred - truth)?.abs()?.broadcast_mul(mask)?.mean_all()?)
}

pub fn lsgan_d_loss(real_scores: &Tensor, fake_scores: &Tensor) -> Result<Tensor> {
    let real = ((real_scores - 1.0)?.sqr()?.mean_all()? * 0.5)?;
    let fake = (fake_scores.sqr()?.mean_all()? * 0.5)?;
    Ok((real + fake)?)
}

pub fn lsgan_g_loss(fake_scores: &Tensor) -> Result<Tensor> {
    Ok(((fake_scores - 1.0)?.sqr()?.mean_all()? * 0.5)?)
}

const NORM_EPS: f64 = 1e-20;

/// Per-sample L2 norms of a (B, ...) tensor; smoothed at zero so the
/// gradient stays finite.
fn sample_norms(x: &Tensor) -> Result<Tensor> {
    Ok((x.flatten_from(1)?.sqr()?.sum(1)? + NORM_EPS)?.sqrt()?)
}

/// Σ_t ‖1 − att_t‖₂ over a (T, 1, H, W) sequence.
pub fn attention_reg_tensor(att: &Tensor) -> Result<Tensor> {
    Ok(sample_norms(&att.affine(-1.0, 1.0)?)?.sum(0)?)
}

/// Σ_t ‖att_t − att_{t−1}‖₂ + ‖C_t − C_{t−1}‖₂ for paired (B, ...) tensors of
/// previous and current frames.
pub fn temporal_reg_pairs_tensor(
    att_prev: &Tensor,
    att_cur: &Tensor,
    color_prev: &Tensor,
    color_cur: &Tensor,
) -> Result<Tensor> {
    let a = sample_norms(&(att_cur - att_prev)?)?.sum(0)?;
    let c = sample_norms(&(color_cur - color_prev)?)?.sum(0)?;
    Ok((a + c)?)
}

pub fn attention_reg(att: &[AttentionMap]) -> Result<f64> {
    if att.is_empty() {
        return Err(Error::Empty("attention sequence"));
    }
    Ok(att
        .iter()
        .map(|a| a.data().iter().map(|&v| (1.0 - v as f64).powi(2)).sum::<f64>().sqrt())
        .sum())
}

pub fn temporal_reg(att: &[AttentionMap], color: &[ColorMap]) -> Result<f64> {
    if att.len() < 2 || att.len() != color.len() {
        return Err(Error::InvalidArgument(
            "temporal regularisation needs equally long sequences of at least 2 frames".into(),
        ));
    }
    let norm = |a: &[f32], b: &[f32]| -> f64 {
        a.iter().zip(b).map(|(&x, &y)| (x as f64 - y as f64).powi(2)).sum::<f64>().sqrt()
    };
    Ok((1..att.len())
        .map(|t| norm(att[t].data(), att[t - 1].data()) + norm(color[t].data(), color[t - 1].data()))
        .sum())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TextureLossWeights {
    pub pix: f64,
    pub adv: f64,
    pub reg: f64,
}

impl Default for TextureLossWeights {
    fn default() -> Self {
        Self {
            pix: 100.0,
            adv: 0.5,
            reg: 0.2,
        }
    }
}

pub fn generator_objective(pix: f64, adv: f64, reg: f64, w: TextureLossWeights) -> f64 {
    w.pix * pix + w.adv * adv + w.reg * reg
}

// ---- spatial mask ------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaskConfig {
    pub baseline: f32,
    pub emphasis: f32,
    /// Dilation radius in pixels at 128×128; scaled with the image width.
    pub radius: f64,
}

impl Default for MaskConfig {
    fn default() -> Self {
        Self {
            baseline: 1.0,
            emphasis: 5.0,
            radius: 5.0,
        }
    }
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Monotone-chain convex hull, counter-clockwise in a y-up frame.
fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

fn segment_distance(a: Point, b: Point, p: Point) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 == 0.0 { 0.0 } else { ((p - a).dot(&ab) / len2).clamp(0.0, 1.0) };
    (a + ab * t - p).norm()
}

fn near_hull(hull: &[Point], p: Point, radius: f64) -> bool {
    match hull.len() {
        0 => false,
        1 => (hull[0] - p).norm() <= radius,
        n => {
            let inside = n >= 3 && (0..n).all(|i| cross(hull[i], hull[(i + 1) % n], p) >= 0.0);
            inside || (0..n).any(|i| segment_distance(hull[i], hull[(i + 1) % n], p) <= radius)
        }
    }
}

/// Loss weights: `emphasis` within the dilated convex hulls of the mouth and
/// of each eye, `baseline` elsewhere. Pixel (x, y) is sampled at its centre
/// (x, y) in landmark coordinates.
pub fn spatial_mask(lm: &LandmarkSet, height: usize, width: usize, config: &MaskConfig) -> GrayImage {
    let radius = config.radius * width as f64 / 128.0;
    let hulls: Vec<Vec<Point>> = [MOUTH, LEFT_EYE, RIGHT_EYE]
        .into_iter()
        .map(|r| convex_hull(&lm.points()[r]))
        .collect();
    GrayImage::from_fn(height, width, |x, y| {
        let p = Point::new(x as f64, y as f64);
        if hulls.iter().any(|h| near_hull(h, p, radius)) {
            config.emphasis
        } else {
            config.baseline
        }
    })
}

// ---- networks ------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TextureModelConfig {
    pub size: usize,
    pub base_channels: usize,
    pub landmark_channels: usize,
    pub downsamplings: usize,
    pub residual_blocks: usize,
}

impl Default for TextureModelConfig {
    fn default() -> Self {
        Self {
            size: 128,
            base_channels: 32,
            landmark_channels: 16,
            downsamplings: 2,
            residual_blocks: 4,
        }
    }
}

struct ConvNorm {
    conv: Conv2d,
    norm: InstanceNorm,
}

impl ConvNorm {
    #[allow(clippy::too_many_arguments)]
    fn new(
        store: &mut ParamStore,
        name: &str,
        cin: usize,
        cout: usize,
        k: usize,
        stride: usize,
        pad: usize,
    ) -> Result<Self> {
        Ok(Self {
            conv: Conv2d::new(store, &format!("{name}.conv"), cin, cout, k, stride, pad)?,
            norm: InstanceNorm::new(store, &format!("{name}.norm"), cout)?,
        })
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.norm.forward(&self.conv.forward(x)?)
    }
}

pub struct TextureGenerator {
    config: TextureModelConfig,
    store: ParamStore,
    lm_encoder: [Conv2d; 2],
    stem: ConvNorm,
    down: Vec<ConvNorm>,
    res: Vec<(ConvNorm, ConvNorm)>,
    up: Vec<ConvNorm>,
    color_head: Conv2d,
    att_head: Conv2d,
}

/// Generator outputs for a batch, all (B, C, H, W).
pub struct GeneratorOutput {
    pub att: Tensor,
    pub color: Tensor,
    pub frame: Tensor,
}

impl TextureGenerator {
    pub fn new(config: TextureModelConfig, seed: u64, dtype: DType) -> Result<Self> {
        let scale = 1usize << config.downsamplings;
        if config.size == 0 || config.size % scale != 0 || config.base_channels == 0 || config.landmark_channels == 0 {
            return Err(Error::InvalidArgument(format!(
                "texture size {} must be a positive multiple of {scale} and channel counts positive",
                config.size
            )));
        }
        let mut store = ParamStore::new(seed, dtype);
        let lc = config.landmark_channels;
        let lm_encoder = [
            Conv2d::new(&mut store, "lm.0", 1, lc, 3, 1, 1)?,
            Conv2d::new(&mut store, "lm.1", lc, lc, 3, 1, 1)?,
        ];
        let b = config.base_channels;
        let stem = ConvNorm::new(&mut store, "stem", lc + 3, b, 7, 1, 3)?;
        let mut ch = b;
        let mut down = Vec::new();
        for i in 0..config.downsamplings {
            down.push(ConvNorm::new(&mut store, &format!("down.{i}"), ch, ch * 2, 4, 2, 1)?);
            ch *= 2;
        }
        let mut res = Vec::new();
        for i in 0..config.residual_blocks {
            res.push((
                ConvNorm::new(&mut store, &format!("res.{i}.0"), ch, ch, 3, 1, 1)?,
                ConvNorm::new(&mut store, &format!("res.{i}.1"), ch, ch, 3, 1, 1)?,
            ));
        }
        let mut up = Vec::new();
        for i in 0..config.downsamplings {
            up.push(ConvNorm::new(&mut store, &format!("up.{i}"), ch, ch / 2, 3, 1, 1)?);
            ch /= 2;
        }
        let color_head = Conv2d::new(&mut store, "color", ch, 3, 7, 1, 3)?;
        let att_head = Conv2d::new(&mut store, "att", ch, 1, 7, 1, 3)?;
        Ok(Self {
            config,
            store,
            lm_encoder,
            stem,
            down,
            res,
            up,
            color_head,
            att_head,
        })
    }

    pub fn config(&self) -> &TextureModelConfig {
        &self.config
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    fn encode_landmarks(&self, lm: &Tensor) -> Result<Tensor> {
        let h = leaky_relu(&self.lm_encoder[0].forward(lm)?, 0.2)?;
        leaky_relu(&self.lm_encoder[1].forward(&h)?, 0.2)
    }

    /// identity (B,3,H,W), landmark images (B,1,H,W).
    pub fn forward_tensor(&self, identity: &Tensor, lm_current: &Tensor, lm_identity: &Tensor) -> Result<GeneratorOutput> {
        let diff = (self.encode_landmarks(lm_current)? - self.encode_landmarks(lm_identity)?)?;
        let mut h = self.stem.forward(&Tensor::cat(&[&diff, identity], 1)?)?.relu()?;
        for d in &self.down {
            h = d.forward(&h)?.relu()?;
        }
        for (a, b) in &self.res {
            h = (&h + b.forward(&a.forward(&h)?.relu()?)?)?;
        }
        for u in &self.up {
            let (_, _, hh, ww) = h.dims4()?;
            h = u.forward(&h.upsample_nearest2d(hh * 2, ww * 2)?)?.relu()?;
        }
        let color = sigmoid(&self.color_head.forward(&h)?)?;
        let att = sigmoid(&self.att_head.forward(&h)?)?;
        let frame = compose_tensor(&att, &color, identity)?;
        Ok(GeneratorOutput { att, color, frame })
    }

    fn check_size(&self, h: usize, w: usize) -> Result<()> {
        if h != self.config.size || w != self.config.size {
            return Err(Error::InvalidArgument(format!(
                "input is {h}×{w}, generator works at {0}×{0}",
                self.config.size
            )));
        }
        Ok(())
    }

    /// Generates a batch of frames sharing one identity. The frame is
    /// composited outside the network so it equals `compose(att, C, I_id)`.
    pub fn generate_frames(
        &self,
        identity: &FaceImage,
        lm_identity: &LandmarkImage,
        lm_current: &[LandmarkImage],
    ) -> Result<Vec<(AttentionMap, ColorMap, FaceImage)>> {
        self.check_size(identity.height(), identity.width())?;
        self.check_size(lm_identity.height(), lm_identity.width())?;
        for lm in lm_current {
            self.check_size(lm.height(), lm.width())?;
        }
        let n = lm_current.len();
        if n == 0 {
            return Ok(Vec::new());
        }
        let dtype = self.store.dtype();
        let id = face_tensor(identity, dtype)?.repeat((n, 1, 1, 1))?;
        let lm_id = gray_tensor(lm_identity.raster(), dtype)?.repeat((n, 1, 1, 1))?;
        let cur = Tensor::cat(
            &lm_current
                .iter()
                .map(|l| gray_tensor(l.raster(), dtype))
                .collect::<Result<Vec<_>>>()?,
            0,
        )?;
        let out = self.forward_tensor(&id, &cur, &lm_id)?;
        let s = self.config.size;
        let att = out.att.to_dtype(DType::F32)?.flatten_all()?.to_vec1::<f32>()?;
        let color = out.color.to_dtype(DType::F32)?.flatten_all()?.to_vec1::<f32>()?;
        let mut frames = Vec::with_capacity(n);
        for i in 0..n {
            let a = GrayImage::from_vec(s, s, att[i * s * s..(i + 1) * s * s].to_vec())?;
            let c = FaceImage::from_planar(s, s, color[i * 3 * s * s..(i + 1) * 3 * s * s].to_vec())?;
            let f = compose(&a, &c, identity)?;
            frames.push((a, c, f));
        }
        Ok(frames)
    }

    pub fn generate_frame(
        &self,
        identity: &FaceImage,
        lm_current: &LandmarkImage,
        lm_identity: &LandmarkImage,
    ) -> Result<(AttentionMap, ColorMap, FaceImage)> {
        Ok(self
            .generate_frames(identity, lm_identity, std::slice::from_ref(lm_current))?
            .remove(0))
    }

    pub fn save(&self, path: impl AsRef<Path>, training: serde_json::Value) -> Result<()> {
        Checkpoint {
            kind: GENERATOR_KIND.into(),
            config: serde_json::json!({ "model": self.config, "training": training }),
            tensors: self.store.tensors(),
        }
        .save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let ckpt = Checkpoint::load(path.as_ref(), GENERATOR_KIND)?;
        let config: TextureModelConfig = serde_json::from_value(ckpt.config["model"].clone())
            .map_err(|e| Error::checkpoint(path.as_ref(), e.to_string()))?;
        let dtype = ckpt.tensor("att.weight")?.dtype();
        let gen = Self::new(config, 0, dtype)?;
        gen.store.load(&ckpt.tensors)?;
        Ok(gen)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiscriminatorConfig {
    pub base_channels: usize,
    /// Stride-2 layers before the two stride-1 layers.
    pub downsamplings: usize,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        Self {
            base_channels: 32,
            downsamplings: 3,
        }
    }
}

/// Conditional patch discriminator over (image, landmark image) pairs:
/// 4×4 convolutions, stride 2 then stride 1, instance normalisation after
/// all but the first and last layers, leaky rectifiers (0.2).
pub struct PatchDiscriminator {
    config: DiscriminatorConfig,
    store: ParamStore,
    layers: Vec<(Conv2d, Option<InstanceNorm>)>,
    head: Conv2d,
}

impl PatchDiscriminator {
    pub fn new(config: DiscriminatorConfig, seed: u64, dtype: DType) -> Result<Self> {
        if config.base_channels == 0 {
            return Err(Error::InvalidArgument("discriminator channels must be positive".into()));
        }
        let mut store = ParamStore::new(seed, dtype);
        let mut layers = Vec::new();
        let mut cin = 4;
        let mut cout = config.base_channels;
        for i in 0..=config.downsamplings {
            let stride = if i < config.downsamplings { 2 } else { 1 };
            let conv = Conv2d::new(&mut store, &format!("d.{i}.conv"), cin, cout, 4, stride, 1)?;
            let norm = if i == 0 {
                None
            } else {
                Some(InstanceNorm::new(&mut store, &format!("d.{i}.norm"), cout)?)
            };
            layers.push((conv, norm));
            cin = cout;
            cout *= 2;
        }
        let head = Conv2d::new(&mut store, "d.head", cin, 1, 4, 1, 1)?;
        Ok(Self {
            config,
            store,
            layers,
            head,
        })
    }

    pub fn config(&self) -> &DiscriminatorConfig {
        &self.config
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    /// image (B,3,H,W), landmarks (B,1,H,W) → score grid (B,1,h,w).
    pub fn forward_tensor(&self, image: &Tensor, landmarks: &Tensor) -> Result<Tensor> {
        let mut h = Tensor::cat(&[image, landmarks], 1)?;
        for (conv, norm) in &self.layers {
            h = conv.forward(&h)?;
            if let Some(n) = norm {
                h = n.forward(&h)?;
            }
            h = leaky_relu(&h, 0.2)?;
        }
        self.head.forward(&h)
    }

    pub fn save(&self, path: impl AsRef<Path>, training: serde_json::Value) -> Result<()> {
        Checkpoint {
            kind: DISCRIMINATOR_KIND.into(),
            config: serde_json::json!({ "model": self.config, "training": training }),
            tensors: self.store.tensors(),
        }
        .save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let ckpt = Checkpoint::load(path.as_ref(), DISCRIMINATOR_KIND)?;
        let config: DiscriminatorConfig = serde_json::from_value(ckpt.config["model"].clone())
            .map_err(|e| Error::checkpoint(path.as_ref(), e.to_string()))?;
        let dtype = ckpt.tensor("d.head.weight")?.dtype();
        let disc = Self::new(config, 0, dtype)?;
        disc.store.load(&ckpt.tensors)?;
        Ok(disc)
    }
}

pub fn face_tensor(img: &FaceImage, dtype: DType) -> Result<Tensor> {
    Ok(Tensor::from_vec(img.data().to_vec(), (1, 3, img.height(), img.width()), &Device::Cpu)?.to_dtype(dtype)?)
}

pub fn gray_tensor(img: &GrayImage, dtype: DType) -> Result<Tensor> {
    Ok(Tensor::from_vec(img.data().to_vec(), (1, 1, img.height(), img.width()), &Device::Cpu)?.to_dtype(dtype)?)
}

// ---- training --------------------------------------------------------------------------

/// One target frame with its landmark raster and loss mask.
#[derive(Clone, Debug)]
pub struct TextureFrame {
    pub image: FaceImage,
    pub landmarks: LandmarkImage,
    pub mask: GrayImage,
}

/// Consecutive frames of one clip plus the clip's identity frame.
#[derive(Clone, Debug)]
pub struct TextureClip {
    pub identity: FaceImage,
    pub identity_landmarks: LandmarkImage,
    pub frames: Vec<TextureFrame>,
}

impl TextureClip {
    /// Rasterises the landmark sets at the frame resolution and derives each
    /// frame's loss mask from its landmarks.
    pub fn from_landmarks(
        identity: FaceImage,
        identity_landmarks: &LandmarkSet,
        frames: Vec<FaceImage>,
        landmarks: &[LandmarkSet],
        mask: &MaskConfig,
    ) -> Result<Self> {
        if frames.len() != landmarks.len() {
            return Err(Error::InvalidArgument(format!(
                "{} frames for {} landmark sets",
                frames.len(),
                landmarks.len()
            )));
        }
        let (h, w) = (identity.height(), identity.width());
        let frames = frames
            .into_iter()
            .zip(landmarks)
            .map(|(image, lm)| {
                image.same_size(&identity)?;
                Ok(TextureFrame {
                    landmarks: render_landmark_image(lm, h, w)?,
                    mask: spatial_mask(lm, h, w, mask),
                    image,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            identity_landmarks: render_landmark_image(identity_landmarks, h, w)?,
            identity,
            frames,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TextureTrainConfig {
    pub steps: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Frames per step, drawn as consecutive pairs.
    pub batch: usize,
    pub weights: TextureLossWeights,
    pub seed: u64,
}

impl Default for TextureTrainConfig {
    fn default() -> Self {
        Self {
            steps: 2000,
            lr: 1e-4,
            beta1: 0.5,
            beta2: 0.999,
            batch: 16,
            weights: TextureLossWeights::default(),
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TextureLossRecord {
    pub generator: f64,
    pub pix: f64,
    pub adv: f64,
    pub reg: f64,
    pub discriminator: f64,
    pub mean_attention: f64,
}

struct ClipTensors {
    identity: Tensor,
    identity_lm: Tensor,
    images: Vec<Tensor>,
    landmarks: Vec<Tensor>,
    masks: Vec<Tensor>,
}

/// A training batch of B consecutive pairs: previous frames occupy rows
/// 0..B and current frames rows B..2B.
pub struct TextureBatch {
    pub identity: Tensor,
    pub identity_lm: Tensor,
    pub target: Tensor,
    pub target_lm: Tensor,
    pub mask: Tensor,
    pub pairs: usize,
}

/// Generator-side losses for one batch. The pixel loss is a mean over frames,
/// channels and pixels; both regularisers are divided by the same element
/// count per frame (per pair for the temporal term), which keeps the weighting
/// between the summed pixel loss and the summed norms unchanged.
pub struct GeneratorLosses {
    pub total: Tensor,
    pub pix: Tensor,
    pub adv: Tensor,
    pub reg: Tensor,
    pub output: GeneratorOutput,
}

pub fn generator_losses(
    gen: &TextureGenerator,
    disc: Option<&PatchDiscriminator>,
    batch: &TextureBatch,
    weights: TextureLossWeights,
) -> Result<GeneratorLosses> {
    let out = gen.forward_tensor(&batch.identity, &batch.target_lm, &batch.identity_lm)?;
    let pix = pixel_loss_tensor(&out.frame, &batch.target, &batch.mask)?;
    let zero = Tensor::zeros((), pix.dtype(), pix.device())?;
    let adv = match disc {
        Some(d) if weights.adv != 0.0 => lsgan_g_loss(&d.forward_tensor(&out.frame, &batch.target_lm)?)?,
        _ => zero.clone(),
    };
    let reg = if weights.reg != 0.0 {
        let (n, _, h, w) = out.att.dims4()?;
        let b = batch.pairs;
        let per_frame = (3 * h * w) as f64;
        let att_term = (attention_reg_tensor(&out.att)? / (n as f64 * per_frame))?;
        let temp_term = if b > 0 && n == 2 * b {
            let raw = temporal_reg_pairs_tensor(
                &out.att.narrow(0, 0, b)?,
                &out.att.narrow(0, b, b)?,
                &out.color.narrow(0, 0, b)?,
                &out.color.narrow(0, b, b)?,
            )?;
            (raw / (b as f64 * per_frame))?
        } else {
            zero.clone()
        };
        (att_term + temp_term)?
    } else {
        zero
    };
    let total = (((&pix * weights.pix)? + (&adv * weights.adv)?)? + (&reg * weights.reg)?)?;
    Ok(GeneratorLosses {
        total,
        pix,
        adv,
        reg,
        output: out,
    })
}

pub struct TrainedTexture {
    pub generator: TextureGenerator,
    pub discriminator: PatchDiscriminator,
    pub history: Vec<TextureLossRecord>,
}

fn sample_batch(clips: &[ClipTensors], pairs: usize, rng: &mut ChaCha8Rng) -> Result<TextureBatch> {
    let mut prev = Vec::with_capacity(pairs);
    let mut cur = Vec::with_capacity(pairs);
    let mut which = Vec::with_capacity(pairs);
    for _ in 0..pairs {
        let c = rng.random_range(0..clips.len());
        let n = clips[c].images.len();
        let t = if n >= 2 { rng.random_range(1..n) } else { 0 };
        prev.push((c, t.saturating_sub(1)));
        cur.push((c, t));
        which.push(c);
    }
    let order: Vec<(usize, usize)> = prev.into_iter().chain(cur).collect();
    let gather = |f: &dyn Fn(&ClipTensors, usize) -> Tensor| -> Result<Tensor> {
        Ok(Tensor::cat(&order.iter().map(|&(c, t)| f(&clips[c], t)).collect::<Vec<_>>(), 0)?)
    };
    let ids: Vec<usize> = which.iter().chain(which.iter()).copied().collect();
    Ok(TextureBatch {
        identity: Tensor::cat(&ids.iter().map(|&c| clips[c].identity.clone()).collect::<Vec<_>>(), 0)?,
        identity_lm: Tensor::cat(&ids.iter().map(|&c| clips[c].identity_lm.clone()).collect::<Vec<_>>(), 0)?,
        target: gather(&|c, t| c.images[t].clone())?,
        target_lm: gather(&|c, t| c.landmarks[t].clone())?,
        mask: gather(&|c, t| c.masks[t].clone())?,
        pairs,
    })
}

pub fn train_texture(
    data: &[TextureClip],
    model_config: TextureModelConfig,
    disc_config: DiscriminatorConfig,
    config: &TextureTrainConfig,
    dtype: DType,
) -> Result<TrainedTexture> {
    let mut gen = TextureGenerator::new(model_config, config.seed, dtype)?;
    let mut disc = PatchDiscriminator::new(disc_config, config.seed.wrapping_add(1), dtype)?;
    let history = train_texture_models(&mut gen, &mut disc, data, config)?;
    Ok(TrainedTexture {
        generator: gen,
        discriminator: disc,
        history,
    })
}

pub fn train_texture_models(
    gen: &mut TextureGenerator,
    disc: &mut PatchDiscriminator,
    data: &[TextureClip],
    config: &TextureTrainConfig,
) -> Result<Vec<TextureLossRecord>> {
    let dtype = gen.store.dtype();
    let mut clips = Vec::new();
    for clip in data {
        if clip.frames.is_empty() {
            continue;
        }
        gen.check_size(clip.identity.height(), clip.identity.width())?;
        let mut images = Vec::new();
        let mut landmarks = Vec::new();
        let mut masks = Vec::new();
        for f in &clip.frames {
            gen.check_size(f.image.height(), f.image.width())?;
            check_mask(&f.image, &f.mask)?;
            images.push(face_tensor(&f.image, dtype)?);
            landmarks.push(gray_tensor(f.landmarks.raster(), dtype)?);
            masks.push(gray_tensor(&f.mask, dtype)?);
        }
        clips.push(ClipTensors {
            identity: face_tensor(&clip.identity, dtype)?,
            identity_lm: gray_tensor(clip.identity_landmarks.raster(), dtype)?,
            images,
            landmarks,
            masks,
        });
    }
    if clips.is_empty() {
        return Err(Error::Empty("texture training set"));
    }
    let params = ParamsAdamW {
        lr: config.lr,
        beta1: config.beta1,
        beta2: config.beta2,
        eps: 1e-8,
        weight_decay: 0.0,
    };
    let mut g_opt = AdamW::new(gen.store.vars().to_vec(), params.clone())?;
    let mut d_opt = AdamW::new(disc.store.vars().to_vec(), params)?;
    let adversarial = config.weights.adv != 0.0;
    let pairs = (config.batch / 2).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x7e47_0000);
    let scalar = |t: &Tensor| -> Result<f64> { Ok(t.to_dtype(DType::F64)?.to_scalar::<f64>()?) };
    let mut history = Vec::with_capacity(config.steps);
    for _ in 0..config.steps {
        let batch = sample_batch(&clips, pairs, &mut rng)?;
        let losses = generator_losses(gen, adversarial.then_some(&*disc), &batch, config.weights)?;
        let mut record = TextureLossRecord {
            generator: scalar(&losses.total)?,
            pix: scalar(&losses.pix)?,
            adv: scalar(&losses.adv)?,
            reg: scalar(&losses.reg)?,
            discriminator: 0.0,
            mean_attention: scalar(&losses.output.att.mean_all()?)?,
        };
        if adversarial {
            let fake = losses.output.frame.detach();
            let d_loss = lsgan_d_loss(
                &disc.forward_tensor(&batch.target, &batch.target_lm)?,
                &disc.forward_tensor(&fake, &batch.target_lm)?,
            )?;
            record.discriminator = scalar(&d_loss)?;
            d_opt.backward_step(&d_loss)?;
        }
        g_opt.backward_step(&losses.total)?;
        history.push(record);
    }
    Ok(history)
}

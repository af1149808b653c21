//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Runs as a plain binary (no test harness) so that the criteria execute in
//! order on one thread and their wall-clock times are meaningful. Failures
//! are reported, not fatal, so the rest of `cargo test` still runs; set
//! `ACCEPTANCE_STRICT=1` to exit non-zero when any criterion fails.

use std::time::{Duration, Instant};

use candle_core::{DType, Device, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use talkface_core::audio::{FEATURE_DIM, WINDOW_LEN};
use talkface_core::blink::{detect_blinks, impose_blinks, BlinkSequence, BlinkStats};
use talkface_core::geometry::{compute_scale, extract_canonical, retarget_sequence};
use talkface_core::image::{FaceImage, GrayImage};
use talkface_core::landmarks::{LandmarkSet, Point, MOUTH, NOSE_TIP};
use talkface_core::metrics::{cpbd_gray, lmd, psnr, ssim, HUMAN_BLINK_RATE};
use talkface_core::pca::pca_fit;
use talkface_core::raster::render_landmark_image;
use talkface_core::synthetic::{
    blink_corpus, mean_face, mouth_motion, render_face, scale_to, synthetic_clip, RenderedClip,
    SyntheticIdentity, SyntheticPerson,
};
use talkface_models::blink::{mmd_loss, train_blink, BlinkModelConfig, BlinkTrainConfig};
use talkface_models::gradcheck::check_gradients;
use talkface_models::speech::{
    lmark_loss_tensor, loss_lmark, temp_loss_tensor, train_speech, Speech2Landmark, SpeechModelConfig,
    SpeechSequence, SpeechTrainConfig,
};
use talkface_models::texture::{
    compose, generator_losses, train_texture, DiscriminatorConfig, MaskConfig, PatchDiscriminator, TextureBatch,
    TextureClip, TextureGenerator, TextureLossWeights, TextureModelConfig, TextureTrainConfig,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_image(r: &mut ChaCha8Rng, h: usize, w: usize) -> FaceImage {
    FaceImage::from_planar(h, w, (0..3 * h * w).map(|_| r.random_range(0.0f32..1.0)).collect()).unwrap()
}

// 1 ------------------------------------------------------------------------------------

fn compositing() -> Outcome {
    let mut r = rng(1);
    let mut worst = 0.0f32;
    for _ in 0..20 {
        let (identity, color) = (random_image(&mut r, 64, 64), random_image(&mut r, 64, 64));
        let ones = GrayImage::from_fn(64, 64, |_, _| 1.0);
        let zeros = GrayImage::zeros(64, 64);
        let a = compose(&ones, &color, &identity).unwrap();
        let b = compose(&zeros, &color, &identity).unwrap();
        for (x, y) in a.data().iter().zip(identity.data()).chain(b.data().iter().zip(color.data())) {
            worst = worst.max((x - y).abs());
        }
    }
    outcome(worst == 0.0, format!("max deviation {worst:e} over 20 random image pairs"))
}

// 2 ------------------------------------------------------------------------------------

fn round_trip() -> Outcome {
    let m = mean_face();
    let mut r = rng(2);
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let person = SyntheticPerson {
            angle: r.random_range(-0.6..0.6),
            translation: Point::new(r.random_range(-40.0..40.0), r.random_range(-40.0..40.0)),
            sx: r.random_range(0.6..1.6),
            sy: r.random_range(0.6..1.6),
        };
        let neutral = person.face(&Default::default());
        let seq: Vec<LandmarkSet> = synthetic_clip(25, case).displacements.iter().map(|d| person.face(d)).collect();
        let deltas = extract_canonical(&seq, &neutral, &m).unwrap();
        let scale = compute_scale(&neutral, &m).unwrap();
        let back = retarget_sequence(&deltas, scale, &neutral, &m).unwrap();
        for (a, b) in back.iter().zip(&seq) {
            for (p, q) in a.points().iter().zip(b.points()) {
                worst = worst.max((p - q).amax());
            }
        }
    }
    outcome(worst < 1e-4, format!("max coordinate error {worst:.2e} over 100 cases (tol 1e-4)"))
}

// 3 ------------------------------------------------------------------------------------

fn gaussian(a: &[f64], b: &[f64], sigma: f64) -> f64 {
    (-a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / (2.0 * sigma)).exp()
}

/// The three double sums of the estimator written out term by term.
fn mmd_brute(x: &[Vec<f64>], y: &[Vec<f64>], sigma: f64) -> f64 {
    let (n, m) = (x.len() as f64, y.len() as f64);
    let mut xx = 0.0;
    for a in x {
        for b in x {
            xx += gaussian(a, b, sigma);
        }
    }
    let mut xy = 0.0;
    for a in x {
        for b in y {
            xy += gaussian(a, b, sigma);
        }
    }
    let mut yy = 0.0;
    for a in y {
        for b in y {
            yy += gaussian(a, b, sigma);
        }
    }
    xx / (n * n) - 2.0 * xy / (n * m) + yy / (m * m)
}

fn mmd_oracle() -> Outcome {
    let mut r = rng(3);
    let (mut worst, mut worst_self) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let (n, m, len) = (r.random_range(1..=8), r.random_range(1..=8), r.random_range(1..=4));
        let mut batch = |k: usize| -> Vec<BlinkSequence> {
            (0..k)
                .map(|_| BlinkSequence::from_flat(&(0..len * 44).map(|_| r.random_range(-0.5..0.5)).collect::<Vec<_>>()).unwrap())
                .collect()
        };
        let (x, y) = (batch(n), batch(m));
        let sigma = r.random_range(0.5..20.0);
        let flat = |s: &[BlinkSequence]| s.iter().map(|q| q.to_flat()).collect::<Vec<_>>();
        let got = mmd_loss(&x, &y, sigma).unwrap();
        worst = worst.max((got - mmd_brute(&flat(&x), &flat(&y), sigma)).abs());
        worst_self = worst_self.max(mmd_loss(&x, &x, sigma).unwrap().abs());
    }
    outcome(
        worst < 1e-9 && worst_self < 1e-9,
        format!("max |mmd - triple sum| {worst:.1e}, max |mmd(X,X)| {worst_self:.1e} over 50 pairs (tol 1e-9)"),
    )
}

// 4 ------------------------------------------------------------------------------------

fn random_tensor(shape: &[usize], seed: u64, lo: f64, hi: f64) -> Tensor {
    let mut r = rng(seed);
    let v: Vec<f64> = (0..shape.iter().product()).map(|_| r.random_range(lo..hi)).collect();
    Tensor::from_vec(v, shape, &Device::Cpu).unwrap()
}

fn gradients() -> Outcome {
    let speech = Speech2Landmark::new(
        SpeechModelConfig {
            channels: [3, 4, 4, 5],
            pca_k: 3,
            leak: 0.2,
        },
        11,
        DType::F64,
    )
    .unwrap();
    let x = random_tensor(&[6, WINDOW_LEN, FEATURE_DIM], 1, -1.0, 1.0);
    let y = random_tensor(&[6, 136], 2, -0.5, 0.5);
    let speech_loss = || {
        let p = speech.forward_tensor(&x)?;
        Ok((lmark_loss_tensor(&p, &y)? + (temp_loss_tensor(&p, &y)? * 0.5)?)?)
    };
    let s = check_gradients(speech.store().vars(), speech_loss, 40, 1e-6, 1e-6, 3).unwrap();

    let gen = TextureGenerator::new(
        TextureModelConfig {
            size: 8,
            base_channels: 2,
            landmark_channels: 2,
            downsamplings: 1,
            residual_blocks: 1,
        },
        5,
        DType::F64,
    )
    .unwrap();
    let disc = PatchDiscriminator::new(
        DiscriminatorConfig {
            base_channels: 2,
            downsamplings: 1,
        },
        6,
        DType::F64,
    )
    .unwrap();
    let batch = TextureBatch {
        identity: random_tensor(&[2, 3, 8, 8], 20, 0.0, 1.0),
        identity_lm: random_tensor(&[2, 1, 8, 8], 21, 0.0, 1.0),
        target: random_tensor(&[2, 3, 8, 8], 22, 0.0, 1.0),
        target_lm: random_tensor(&[2, 1, 8, 8], 23, 0.0, 1.0),
        mask: random_tensor(&[2, 1, 8, 8], 24, 1.0, 5.0),
        pairs: 1,
    };
    let tex_loss = || Ok(generator_losses(&gen, Some(&disc), &batch, TextureLossWeights::default())?.total);
    let t = check_gradients(gen.store().vars(), tex_loss, 12, 1e-5, 1e-5, 7).unwrap();
    let params = speech.store().num_params().max(gen.store().num_params() + disc.store().num_params());
    outcome(
        s.max_relative_error < 1e-3 && t.max_relative_error < 1e-3 && params <= 10_000,
        format!(
            "max relative error: landmark loss {:.1e} ({} entries), generator objective {:.1e} ({} entries); largest model {params} parameters (tol 1e-3)",
            s.max_relative_error, s.checked, t.max_relative_error, t.checked
        ),
    )
}

// 5 ------------------------------------------------------------------------------------

fn edge_rich_image() -> GrayImage {
    let mut r = rng(5);
    let mut img = GrayImage::from_fn(128, 128, |_, _| 0.5);
    for _ in 0..40 {
        let (x0, y0) = (r.random_range(0..120), r.random_range(0..120));
        let (w, h) = (r.random_range(4..30), r.random_range(4..30));
        let v = r.random_range(0.0f32..1.0);
        for y in y0..(y0 + h).min(128) {
            for x in x0..(x0 + w).min(128) {
                img.set(x, y, v);
            }
        }
    }
    img
}

/// Separable Gaussian with clamped borders, written out here so the check
/// does not lean on the crate's own filters.
fn gaussian_blur(img: &GrayImage, sigma: f64) -> GrayImage {
    let r = (3.0 * sigma).ceil() as isize;
    let k: Vec<f64> = (-r..=r).map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp()).collect();
    let z: f64 = k.iter().sum();
    let (h, w) = (img.height() as isize, img.width() as isize);
    let pass = |src: &GrayImage, horizontal: bool| {
        GrayImage::from_fn(h as usize, w as usize, |x, y| {
            let mut acc = 0.0;
            for (j, kv) in k.iter().enumerate() {
                let o = j as isize - r;
                let (xx, yy) = if horizontal {
                    ((x as isize + o).clamp(0, w - 1), y as isize)
                } else {
                    (x as isize, (y as isize + o).clamp(0, h - 1))
                };
                acc += kv * src.get(xx as usize, yy as usize) as f64;
            }
            (acc / z) as f32
        })
    };
    pass(&pass(img, true), false)
}

fn lmd_brute(a: &[LandmarkSet], b: &[LandmarkSet]) -> f64 {
    let mut total = 0.0;
    let mut count = 0.0;
    for (p, q) in a.iter().zip(b) {
        for i in MOUTH {
            let dx = (p.point(i).x - p.point(NOSE_TIP).x) - (q.point(i).x - q.point(NOSE_TIP).x);
            let dy = (p.point(i).y - p.point(NOSE_TIP).y) - (q.point(i).y - q.point(NOSE_TIP).y);
            total += (dx * dx + dy * dy).sqrt();
            count += 1.0;
        }
    }
    total / count
}

fn metric_oracles() -> Outcome {
    let mut r = rng(6);
    let truth = FaceImage::from_planar(64, 64, (0..3 * 64 * 64).map(|_| r.random_range(0.2f32..0.8)).collect()).unwrap();
    let shifted = FaceImage::from_planar(64, 64, truth.data().iter().map(|v| v + 0.1).collect()).unwrap();
    let self_psnr = psnr(&truth, &truth).unwrap();
    let self_ssim = ssim(&truth, &truth).unwrap();
    let offset_psnr = psnr(&shifted, &truth).unwrap();

    let mut worst_lmd: f64 = 0.0;
    for seed in 0..10 {
        let a: Vec<_> = synthetic_clip(12, seed).displacements.iter().map(|d| SyntheticPerson::random(seed).face(d)).collect();
        let b: Vec<_> = synthetic_clip(12, seed + 50).displacements.iter().map(|d| SyntheticPerson::random(seed + 9).face(d)).collect();
        worst_lmd = worst_lmd.max((lmd(&a, &b).unwrap() - lmd_brute(&a, &b)).abs());
    }

    let img = edge_rich_image();
    let mut smoothed = img.clone();
    let mut scores = vec![cpbd_gray(&img)];
    for _ in 0..3 {
        smoothed = gaussian_blur(&smoothed, 0.5);
        scores.push(cpbd_gray(&smoothed));
    }
    let monotone = scores.windows(2).all(|w| w[0] > w[1]);
    let pass = self_psnr.is_infinite()
        && (self_ssim - 1.0).abs() < 1e-4
        && (offset_psnr - 20.0).abs() < 1e-4
        && worst_lmd < 1e-9
        && monotone;
    outcome(
        pass,
        format!(
            "PSNR self {self_psnr}, offset 0.1 {offset_psnr:.6} dB; SSIM self {self_ssim:.6}; LMD vs double loop {worst_lmd:.1e}; CPBD sharp then 3 smoothing passes {:?}",
            scores.iter().map(|s| format!("{s:.4}")).collect::<Vec<_>>()
        ),
    )
}

// 6 (landmark part) --------------------------------------------------------------------

fn speech_overfit() -> (bool, String) {
    let clip = synthetic_clip(50, 3);
    let track = talkface_core::audio::FeatureTrack::new(clip.features.clone(), 400.0, 25.0).unwrap();
    let seq = SpeechSequence {
        windows: talkface_core::audio::window_track(&track, 50).unwrap(),
        targets: clip.displacements.clone(),
    };
    let data = vec![seq];
    let lmark = |m: &Speech2Landmark| -> f64 {
        let pred = m.predict(&data[0].windows).unwrap();
        pred.iter().zip(&data[0].targets).map(|(p, t)| loss_lmark(p, t)).sum::<f64>() / 50.0
    };
    let untrained = SpeechTrainConfig {
        steps: 0,
        ..Default::default()
    };
    let before = lmark(&train_speech(&data, SpeechModelConfig::default(), &untrained, DType::F32).unwrap().model);
    let config = SpeechTrainConfig {
        steps: 3000,
        lr: 1e-3,
        beta1: 0.9,
        batch: 1,
        seq_len: 50,
        ..Default::default()
    };
    let after = lmark(&train_speech(&data, SpeechModelConfig::default(), &config, DType::F32).unwrap().model);
    (
        after < 1e-3 * before,
        format!("landmark L_lmark {before:.4} -> {after:.2e} (ratio {:.1e}, need < 1e-3)", after / before),
    )
}

// 6 (texture part) and 7 ---------------------------------------------------------------

/// Micro-set: one synthetic identity whose mouth opens and closes with a
/// period of 6.3 frames, so every frame carries mouth texture the identity
/// frame lacks and held-out frames fall between trained phases. Frames
/// 0..20 train (frame 0, mouth closed, is the identity frame); 20..30 are
/// held out. At 32 px the synthetic mouth spans one or two pixels and copying
/// the identity frame is already optimal, hence 64 px.
const TEX_SIZE: usize = 64;
const TEX_FRAMES: usize = 30;
const TEX_TRAIN: usize = 20;

fn mouth_sweep_clip() -> RenderedClip {
    let person = SyntheticPerson::random(7);
    let identity = SyntheticIdentity::new(7);
    let landmarks: Vec<LandmarkSet> = (0..TEX_FRAMES)
        .map(|t| {
            let phase = 2.0 * std::f64::consts::PI * t as f64 / 6.3;
            let open = if t == 0 { 0.0 } else { 6.0 * (0.5 - 0.5 * phase.cos()) };
            scale_to(&person.face(&mouth_motion(open, 0.3 * open)), TEX_SIZE)
        })
        .collect();
    let frames = landmarks.iter().map(|lm| render_face(&identity, lm, TEX_SIZE)).collect();
    RenderedClip { landmarks, frames }
}

struct TextureScores {
    train_mae: f64,
    psnr: f64,
    ssim: f64,
    cpbd: f64,
}

fn texture_variant(weights: TextureLossWeights) -> TextureScores {
    let clip = mouth_sweep_clip();
    let identity = clip.frames[0].clone();
    let train = TextureClip::from_landmarks(
        identity.clone(),
        &clip.landmarks[0],
        clip.frames[..TEX_TRAIN].to_vec(),
        &clip.landmarks[..TEX_TRAIN],
        &MaskConfig::default(),
    )
    .unwrap();
    let model = TextureModelConfig {
        size: TEX_SIZE,
        base_channels: 16,
        landmark_channels: 8,
        downsamplings: 2,
        residual_blocks: 2,
    };
    let disc = DiscriminatorConfig {
        base_channels: 16,
        downsamplings: 2,
    };
    let config = TextureTrainConfig {
        steps: 300,
        lr: 1e-3,
        batch: 8,
        weights,
        ..Default::default()
    };
    let gen = train_texture(&[train], model, disc, &config, DType::F32).unwrap().generator;
    let lm_id = render_landmark_image(&clip.landmarks[0], TEX_SIZE, TEX_SIZE).unwrap();
    let run = |range: std::ops::Range<usize>| {
        let lms: Vec<_> = range
            .clone()
            .map(|t| render_landmark_image(&clip.landmarks[t], TEX_SIZE, TEX_SIZE).unwrap())
            .collect();
        gen.generate_frames(&identity, &lm_id, &lms)
            .unwrap()
            .into_iter()
            .map(|(_, _, f)| f)
            .zip(range)
            .collect::<Vec<_>>()
    };
    let train_out = run(0..TEX_TRAIN);
    let train_mae = train_out.iter().map(|(f, t)| f.mean_abs_diff(&clip.frames[*t]).unwrap()).sum::<f64>() / TEX_TRAIN as f64;
    let held = run(TEX_TRAIN..TEX_FRAMES);
    let n = held.len() as f64;
    TextureScores {
        train_mae,
        psnr: held.iter().map(|(f, t)| psnr(f, &clip.frames[*t]).unwrap()).sum::<f64>() / n,
        ssim: held.iter().map(|(f, t)| ssim(f, &clip.frames[*t]).unwrap()).sum::<f64>() / n,
        cpbd: held.iter().map(|(f, _)| talkface_core::metrics::cpbd(f)).sum::<f64>() / n,
    }
}

fn ablation() -> (TextureScores, TextureScores, TextureScores) {
    let full = texture_variant(TextureLossWeights::default());
    let pix_adv = texture_variant(TextureLossWeights {
        reg: 0.0,
        ..Default::default()
    });
    let pix = texture_variant(TextureLossWeights {
        adv: 0.0,
        reg: 0.0,
        ..Default::default()
    });
    (full, pix_adv, pix)
}

// 8 ------------------------------------------------------------------------------------

fn blink_stats(seqs: &[BlinkSequence]) -> BlinkStats {
    let face = mean_face();
    let per: Vec<BlinkStats> = seqs
        .iter()
        .map(|s| detect_blinks(&impose_blinks(&vec![face.clone(); s.len()], s).unwrap(), 25.0).unwrap())
        .collect();
    BlinkStats::aggregate(&per)
}

fn blink_machinery() -> Outcome {
    let real = blink_corpus(200, 75, 5, 1);
    let rs = blink_stats(&real);
    let config = BlinkTrainConfig {
        steps: 3000,
        lr: 3e-3,
        beta1: 0.9,
        bandwidth_scales: vec![0.2, 0.5, 1.0, 2.0],
        cosine_decay: true,
        ..Default::default()
    };
    let trained = train_blink(&real, BlinkModelConfig::default(), &config, DType::F32).unwrap();
    let gs = blink_stats(&trained.generator.generate_batch(200, 75, 99).unwrap());
    let rate_ok = (gs.blink_rate - 0.33).abs() <= 0.08;
    let dur_ok = (gs.mean_blink_duration - 0.2).abs() <= 0.07;
    outcome(
        rate_ok && dur_ok,
        format!(
            "corpus {:.3} blinks/s, {:.3} s; generated {:.3} blinks/s (target 0.33 ± 0.08), {:.3} s (target 0.2 ± 0.07); human band {:?}: {}",
            rs.blink_rate,
            rs.mean_blink_duration,
            gs.blink_rate,
            gs.mean_blink_duration,
            HUMAN_BLINK_RATE,
            if HUMAN_BLINK_RATE.contains(&gs.blink_rate) { "inside" } else { "outside" }
        ),
    )
}

// 9 ------------------------------------------------------------------------------------

fn pca_contract() -> Outcome {
    let mut r = rng(9);
    let samples: Vec<Vec<f64>> = (0..8)
        .flat_map(|s| synthetic_clip(40, s).displacements)
        .map(|d| d.to_flat().into_iter().map(|v| v + r.random_range(-0.01..0.01)).collect())
        .collect();
    let basis = pca_fit(&samples, 0.99).unwrap();
    let c = basis.components();
    let gram = c * c.transpose();
    let mut worst: f64 = 0.0;
    for i in 0..basis.k() {
        for j in 0..basis.k() {
            worst = worst.max((gram[(i, j)] - if i == j { 1.0 } else { 0.0 }).abs());
        }
    }
    let captured = basis.cumulative_variance();
    outcome(
        captured >= 0.99 && worst < 1e-6,
        format!("K = {} of 136 captures {:.4} of the variance; max |CCᵀ − I| {worst:.1e}", basis.k(), captured),
    )
}

// --------------------------------------------------------------------------------------

fn report(id: &str, name: &str, budget: Duration, elapsed: Duration, o: &Outcome) -> bool {
    let in_time = elapsed <= budget;
    let pass = o.pass && in_time;
    println!(
        "[{}] {id}. {name}: {} ({:.1} s, budget {:.0} s{})",
        if pass { "PASS" } else { "FAIL" },
        o.detail,
        elapsed.as_secs_f64(),
        budget.as_secs_f64(),
        if in_time { "" } else { ", over budget" }
    );
    pass
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

fn main() {
    // `cargo test` passes harness flags such as `--nocapture`; a filter
    // argument that names no criterion id skips the run.
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        return;
    }
    let filters: Vec<String> = args.into_iter().filter(|a| !a.starts_with('-')).collect();
    let wanted = |id: &str| filters.is_empty() || filters.iter().any(|f| f == id || f == "acceptance");
    if ["1", "2", "3", "4", "5", "6", "7", "8", "9"].iter().all(|id| !wanted(id)) {
        return;
    }

    let secs = Duration::from_secs;
    let mut all = true;
    let simple: [(&str, &str, u64, fn() -> Outcome); 5] = [
        ("1", "compositing identities", 1, compositing),
        ("2", "canonical round trip", 10, round_trip),
        ("3", "MMD oracle", 10, mmd_oracle),
        ("4", "gradient checks", 120, gradients),
        ("5", "metric oracles", 60, metric_oracles),
    ];
    for (id, name, budget, f) in simple {
        if wanted(id) {
            let (o, t) = timed(f);
            all &= report(id, name, secs(budget), t, &o);
        }
    }

    if wanted("6") || wanted("7") {
        let ((full, pix_adv, pix), t_tex) = timed(ablation);
        if wanted("6") {
            let ((ok, detail), t_speech) = timed(speech_overfit);
            // The texture share of the time is the full-objective run alone.
            let t = t_speech + t_tex / 3;
            let o = outcome(
                ok && full.train_mae < 0.02,
                format!("{detail}; texture self-reconstruction MAE {:.4} (need < 0.02)", full.train_mae),
            );
            all &= report("6", "overfit smoke tests", secs(3 * 3600), t, &o);
        }
        if wanted("7") {
            let ordered = |a: &TextureScores, b: &TextureScores| a.psnr >= b.psnr && a.ssim >= b.ssim && a.cpbd >= b.cpbd;
            let row = |s: &TextureScores| format!("PSNR {:.3} SSIM {:.4} CPBD {:.4}", s.psnr, s.ssim, s.cpbd);
            let o = outcome(
                ordered(&full, &pix_adv) && ordered(&pix_adv, &pix),
                format!(
                    "held-out frames: full {}; pix+adv {}; pix {}",
                    row(&full),
                    row(&pix_adv),
                    row(&pix)
                ),
            );
            all &= report("7", "ablation ordering", secs(2 * 3600), t_tex, &o);
        }
    }

    if wanted("8") {
        let (o, t) = timed(blink_machinery);
        all &= report("8", "blink machinery", secs(20 * 60), t, &o);
    }
    if wanted("9") {
        let (o, t) = timed(pca_contract);
        all &= report("9", "PCA contract", secs(10), t, &o);
    }
    println!("acceptance: {}", if all { "all criteria passed" } else { "some criteria FAILED" });
    if !all && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}

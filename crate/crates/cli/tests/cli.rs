use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;

use talkface_cli::evaluate::run_evaluate;
use talkface_cli::generate::{
    run_generate, GenerateInputs, Stage, BLINKS_FILE, CANONICAL_FILE, FRAMES_DIR, LANDMARKS_FILE, SPEECH_FILE,
    STAGES_DIR,
};
use talkface_cli::train::{preprocess, train_blink_stage, train_landmark, train_texture_stage};
use talkface_cli::{CliError, PipelineConfig};
use talkface_core::audio::FeatureTrack;
use talkface_core::data_prep::{list_pngs, save_manifest, ClipManifest};
use talkface_core::image::FaceImage;
use talkface_core::landmark_io::{load_landmarks, save_landmarks};
use talkface_core::landmarks::MOUTH;
use talkface_core::metrics::{box_blur_rgb, report::COLUMNS};
use talkface_core::synthetic::{write_corpus, CorpusSpec};
use tempfile::TempDir;

const OVERRIDES: &[&str] = &[
    "resolution=32",
    "texture.model.size=32",
    "texture.model.base_channels=8",
    "texture.model.landmark_channels=4",
    "texture.model.residual_blocks=1",
    "texture.discriminator.base_channels=8",
    "texture.discriminator.downsamplings=2",
    "texture.train.steps=3",
    "texture.train.batch=4",
    "landmark.model.channels=[8, 8, 8, 8]",
    "landmark.train.steps=5",
    "blink.model.hidden=8",
    "blink.train.steps=3",
    "blink.train.real_batch=4",
    "blink.train.fake_batch=4",
    "data.blink_len=20",
    "data.test_fraction=0.34",
];

struct Fixture {
    _dir: TempDir,
    root: PathBuf,
    config: PipelineConfig,
    clips: Vec<ClipManifest>,
    landmark: PathBuf,
    blink: PathBuf,
    texture: PathBuf,
}

fn config() -> PipelineConfig {
    let sets: Vec<String> = OVERRIDES.iter().map(|s| s.to_string()).collect();
    PipelineConfig::load(None, &sets).unwrap()
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let corpus = root.join("corpus");
        let spec = CorpusSpec {
            subjects: 3,
            clips_per_subject: 1,
            frames: 40,
            frame_size: Some(32),
            blink_rate: 0.5,
            seed: 3,
            ..Default::default()
        };
        let clips = write_corpus(&corpus, &spec).unwrap();
        let config = config();
        let data = root.join("data");
        preprocess(&config, &corpus, &data).unwrap();
        let (landmark, blink, texture) = (root.join("lm.safetensors"), root.join("blink.safetensors"), root.join("tex.safetensors"));
        train_landmark(&config, &data, &landmark).unwrap();
        train_blink_stage(&config, &data, &blink).unwrap();
        train_texture_stage(&config, &data, &texture, None).unwrap();
        for c in &clips {
            let id_lm = root.join(format!("{}_identity.csv", c.clip_id));
            save_landmarks(&id_lm, &load_landmarks(&c.landmarks).unwrap()[..1]).unwrap();
        }
        Fixture {
            _dir: dir,
            root,
            config,
            clips,
            landmark,
            blink,
            texture,
        }
    })
}

/// Inputs that animate the neutral frame of `clip` with its own audio.
fn inputs(f: &Fixture, clip: usize) -> GenerateInputs {
    let c = &f.clips[clip];
    let frames = list_pngs(c.frames.as_ref().unwrap()).unwrap();
    let id_lm = f.root.join(format!("{}_identity.csv", c.clip_id));
    GenerateInputs {
        identity_image: Some(frames[0].clone()),
        identity_landmarks: Some(id_lm),
        audio: Some(c.features.clone()),
        landmark_checkpoint: Some(f.landmark.clone()),
        blink_checkpoint: Some(f.blink.clone()),
        texture_checkpoint: Some(f.texture.clone()),
    }
}

fn fresh(name: &str) -> PathBuf {
    let p = fixture().root.join(name);
    let _ = std::fs::remove_dir_all(&p);
    p
}

/// Every file below `dir` as (relative path, bytes), sorted.
fn files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    for sub in [STAGES_DIR, FRAMES_DIR] {
        let d = dir.join(sub);
        let mut names: Vec<_> = std::fs::read_dir(&d).unwrap().map(|e| e.unwrap().path()).collect();
        names.sort();
        for p in names {
            out.push((p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
        }
    }
    out
}

#[test]
fn generation_is_deterministic() {
    let f = fixture();
    let (a, b) = (fresh("det_a"), fresh("det_b"));
    let ra = run_generate(&f.config, &inputs(f, 0), &a, Stage::Speech, Stage::Texture).unwrap();
    run_generate(&f.config, &inputs(f, 0), &b, Stage::Speech, Stage::Texture).unwrap();
    assert_eq!(ra.frames, 40);
    assert_eq!(list_pngs(a.join(FRAMES_DIR)).unwrap().len(), 40);
    assert_eq!(files(&a), files(&b));
    assert_eq!(ra.config_hash, f.config.hash());
    assert_eq!(ra.checkpoints.len(), 3);
}

#[test]
fn chained_stages_equal_the_monolithic_run() {
    let f = fixture();
    let (mono, chain) = (fresh("mono"), fresh("chain"));
    run_generate(&f.config, &inputs(f, 1), &mono, Stage::Speech, Stage::Texture).unwrap();
    for s in Stage::ALL {
        run_generate(&f.config, &inputs(f, 1), &chain, s, s).unwrap();
    }
    assert_eq!(files(&mono), files(&chain));
    for name in [SPEECH_FILE, BLINKS_FILE, CANONICAL_FILE, LANDMARKS_FILE] {
        assert!(chain.join(STAGES_DIR).join(name).is_file(), "{name}");
    }
}

#[test]
fn a_stage_without_its_input_is_rejected() {
    let f = fixture();
    let out = fresh("orphan");
    let err = run_generate(&f.config, &inputs(f, 0), &out, Stage::Retarget, Stage::Texture).unwrap_err();
    assert!(matches!(err, CliError::Validation(_)), "{err}");
}

#[test]
fn speech_motion_does_not_depend_on_the_identity() {
    let f = fixture();
    let (a, b) = (fresh("id_a"), fresh("id_b"));
    let mut second = inputs(f, 1);
    second.audio = inputs(f, 0).audio;
    run_generate(&f.config, &inputs(f, 0), &a, Stage::Speech, Stage::Retarget).unwrap();
    run_generate(&f.config, &second, &b, Stage::Speech, Stage::Retarget).unwrap();
    let read = |d: &Path, n: &str| std::fs::read(d.join(STAGES_DIR).join(n)).unwrap();
    assert_eq!(read(&a, SPEECH_FILE), read(&b, SPEECH_FILE));
    assert_eq!(read(&a, CANONICAL_FILE), read(&b, CANONICAL_FILE));
    assert_ne!(read(&a, LANDMARKS_FILE), read(&b, LANDMARKS_FILE));
}

#[test]
fn constant_audio_keeps_the_mouth_still() {
    let f = fixture();
    let audio = f.root.join("silence.tfaf");
    FeatureTrack::new(vec![[-3.0f32; 29]; 40 * 16], 400.0, 25.0).unwrap().save(&audio).unwrap();
    let mut inp = inputs(f, 0);
    inp.audio = Some(audio);
    let out = fresh("silence");
    run_generate(&f.config, &inp, &out, Stage::Speech, Stage::Retarget).unwrap();
    let lm = load_landmarks(out.join(STAGES_DIR).join(LANDMARKS_FILE)).unwrap();
    // Mouth motion between consecutive frames, in pixels.
    let mut worst: f64 = 0.0;
    for w in lm.windows(2) {
        for i in MOUTH {
            worst = worst.max((w[1].point(i) - w[0].point(i)).norm());
        }
    }
    assert!(worst < 0.05, "mouth moved {worst} px on constant input");
}

#[test]
fn generation_validates_inputs() {
    let f = fixture();
    let out = fresh("invalid");
    let mut missing = inputs(f, 0);
    missing.texture_checkpoint = Some(f.root.join("nope.safetensors"));
    let err = run_generate(&f.config, &missing, &out, Stage::Speech, Stage::Texture).unwrap_err();
    assert!(matches!(err, CliError::Validation(_)), "{err}");

    let audio = f.root.join("30fps.tfaf");
    FeatureTrack::new(vec![[0.0f32; 29]; 300], 300.0, 30.0).unwrap().save(&audio).unwrap();
    let mut fps = inputs(f, 0);
    fps.audio = Some(audio);
    let err = run_generate(&f.config, &fps, &out, Stage::Speech, Stage::Speech).unwrap_err();
    assert!(matches!(err, CliError::Validation(_)), "{err}");

    let big = f.root.join("big.png");
    FaceImage::filled(64, 64, [0.5; 3]).save_png(&big).unwrap();
    let mut res = inputs(f, 0);
    res.identity_image = Some(big);
    let err = run_generate(&f.config, &res, &out, Stage::Speech, Stage::Texture).unwrap_err();
    assert!(matches!(err, CliError::Validation(_)), "{err}");
}

/// A generated-output tree holding the ground truth itself, optionally blurred.
fn ground_truth_tree(name: &str, blur: usize) -> PathBuf {
    let f = fixture();
    let out = fresh(name);
    for c in &f.clips {
        let dir = out.join(&c.clip_id);
        std::fs::create_dir_all(dir.join(FRAMES_DIR)).unwrap();
        std::fs::create_dir_all(dir.join(STAGES_DIR)).unwrap();
        for p in list_pngs(c.frames.as_ref().unwrap()).unwrap() {
            let mut img = FaceImage::load_png(&p).unwrap();
            if blur > 0 {
                img = box_blur_rgb(&img, blur);
            }
            img.save_png(dir.join(FRAMES_DIR).join(p.file_name().unwrap())).unwrap();
        }
        std::fs::copy(&c.landmarks, dir.join(STAGES_DIR).join(LANDMARKS_FILE)).unwrap();
    }
    out
}

#[test]
fn ground_truth_scores_perfectly_against_itself() {
    let f = fixture();
    let manifest = f.root.join("corpus");
    let report = run_evaluate(&f.config, &ground_truth_tree("gt_self", 0), &manifest).unwrap();
    assert_eq!(report.clips.len(), 3);
    assert!(report.aggregate.psnr.is_infinite());
    assert!((report.aggregate.ssim - 1.0).abs() < 1e-12);
    assert_eq!(report.aggregate.lmd, 0.0);
    let blink = report.blink.as_ref().unwrap();
    assert_eq!(blink.rate_difference, 0.0);

    let blurred = run_evaluate(&f.config, &ground_truth_tree("gt_blur", 2), &manifest).unwrap();
    assert!(blurred.aggregate.cpbd < report.aggregate.cpbd);
    assert!(blurred.aggregate.psnr.is_finite());
}

#[test]
fn report_columns_follow_the_table_layout() {
    assert_eq!(COLUMNS, ["PSNR", "SSIM", "CPBD", "LMD"]);
    let f = fixture();
    let report = run_evaluate(&f.config, &ground_truth_tree("gt_table", 0), &f.root.join("corpus")).unwrap();
    let table = report.to_table();
    let header = table.lines().find(|l| l.contains("PSNR")).unwrap();
    let pos: Vec<usize> = COLUMNS.iter().map(|c| header.find(c).unwrap()).collect();
    assert!(pos.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn evaluation_rejects_a_clip_mismatch() {
    let f = fixture();
    let tree = ground_truth_tree("gt_subset", 0);
    let manifest = f.root.join("subset.jsonl");
    save_manifest(&manifest, &f.clips[..2]).unwrap();
    let err = run_evaluate(&f.config, &tree, &manifest).unwrap_err();
    assert!(matches!(err, CliError::Validation(_)), "{err}");
}

fn talkface(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_talkface")).args(args).output().unwrap()
}

#[test]
fn exit_codes_separate_validation_from_runtime_errors() {
    let f = fixture();
    let out = talkface(&["show-config", "--set", "texture.train.lr=1e-3"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("lr = 0.001"));

    assert_eq!(talkface(&["show-config", "--set", "no.such.key=1"]).status.code(), Some(2));
    assert_eq!(talkface(&["evaluate", "--generated", "x"]).status.code(), Some(2));

    // A checkpoint file that exists but is not a checkpoint fails at run time.
    let junk = f.root.join("junk.safetensors");
    std::fs::write(&junk, b"not a checkpoint").unwrap();
    let inp = inputs(f, 0);
    let out_dir = fresh("junk_out");
    let status = talkface(&[
        "generate",
        "--audio",
        inp.audio.as_ref().unwrap().to_str().unwrap(),
        "--landmark-ckpt",
        junk.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--to",
        "speech",
    ])
    .status;
    assert_eq!(status.code(), Some(1));
}

#[test]
fn the_binary_runs_the_pipeline_from_a_config_file() {
    let f = fixture();
    let cfg = f.root.join("pipeline.toml");
    std::fs::write(&cfg, f.config.to_toml()).unwrap();
    let inp = inputs(f, 2);
    let out = fresh("bin_out");
    let s = |p: &Option<PathBuf>| p.as_ref().unwrap().to_str().unwrap().to_string();
    let args = [
        "--config".to_string(),
        cfg.to_str().unwrap().into(),
        "--set".into(),
        "generate.dump_maps=true".into(),
        "generate".into(),
        "--identity-image".into(),
        s(&inp.identity_image),
        "--identity-landmarks".into(),
        s(&inp.identity_landmarks),
        "--audio".into(),
        s(&inp.audio),
        "--landmark-ckpt".into(),
        s(&inp.landmark_checkpoint),
        "--blink-ckpt".into(),
        s(&inp.blink_checkpoint),
        "--texture-ckpt".into(),
        s(&inp.texture_checkpoint),
        "--out".into(),
        out.to_str().unwrap().into(),
    ];
    let output = Command::new(env!("CARGO_BIN_EXE_talkface")).args(&args).output().unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    assert_eq!(list_pngs(out.join("maps")).unwrap().len(), 80);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("reports/generate.json")).unwrap()).unwrap();
    let mut with_maps = f.config.clone();
    with_maps.generate.dump_maps = true;
    assert_eq!(report["config_hash"], with_maps.hash());
}

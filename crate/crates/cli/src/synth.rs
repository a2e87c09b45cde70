use std::path::PathBuf;

use anyhow::{Context, Result};
use fusemap::detections::{payload_file_name, DetectionPayload};
use fusemap::eval::{write_labeled_points, GROUND_TRUTH_FILE};
use fusemap::label_fusion::{AnnotatedLogFile, LikelihoodMatrix};
use fusemap::pipeline::{
    run_sequence, write_sequence, PipelineConfig, CLOSED_LABELS_FILE, DEFAULT_VOXEL_LENGTH, OPEN_LABELS_FILE,
    PREDICTION_DIR,
};
use fusemap::synth::{
    default_trajectory, detect_sequence, generate_scene, render_frames, synthetic_intrinsics, synthetic_label_space,
    NoiseModel, PlantedConfusion, SceneSpec, SyntheticDetector,
};

pub const ANNOTATIONS_FILE: &str = "annotations.json";
pub const CONFIG_FILE: &str = "fusemap.toml";

#[derive(clap::Args)]
pub struct Args {
    /// Directory to write the sequence to.
    #[arg(long)]
    output: PathBuf,
    /// Scene and detector noise seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of boxes in the room.
    #[arg(long, default_value_t = 5)]
    objects: usize,
    /// Frames on the orbit around the room.
    #[arg(long, default_value_t = 100)]
    frames: usize,
    /// Write detections every this many frames.
    #[arg(long, default_value_t = 10)]
    stride: u64,
    /// Prompt memory the emulated detector uses, in detection frames.
    #[arg(long, default_value_t = 5)]
    prompt_window: usize,
    /// Probability that a detection carries a wrong label, spread uniformly.
    #[arg(long, default_value_t = 0.0)]
    label_noise: f64,
    /// Probability of splitting a mask into left and right halves.
    #[arg(long, default_value_t = 0.0)]
    split_prob: f64,
    /// Probability of dropping an object's label from the prompt.
    #[arg(long, default_value_t = 0.0)]
    missed_tag_prob: f64,
    /// Probability of dropping a detection.
    #[arg(long, default_value_t = 0.0)]
    dropout: f64,
    /// Probability of eroding or dilating a mask by two pixels.
    #[arg(long, default_value_t = 0.0)]
    morph_prob: f64,
    /// Voxel edge length written to the generated config (m).
    #[arg(long, default_value_t = DEFAULT_VOXEL_LENGTH)]
    voxel_length: f64,
    /// Depth cutoff written to the generated config (m).
    #[arg(long, default_value_t = 3.5)]
    max_depth: f64,
}

fn check_prob(name: &str, p: f64) -> Result<()> {
    anyhow::ensure!((0.0..=1.0).contains(&p), "--{name} must be within [0, 1], got {p}");
    Ok(())
}

pub fn run(args: Args) -> Result<()> {
    for (n, p) in [
        ("label-noise", args.label_noise),
        ("split-prob", args.split_prob),
        ("missed-tag-prob", args.missed_tag_prob),
        ("dropout", args.dropout),
        ("morph-prob", args.morph_prob),
    ] {
        check_prob(n, p)?;
    }
    anyhow::ensure!(args.stride > 0, "--stride must be at least 1");
    let out = &args.output;
    let space = synthetic_label_space();
    let n = space.closed_set.len();
    let canonical: Vec<usize> = (0..n).collect();

    let scene = generate_scene(&SceneSpec { n_objects: args.objects, ..Default::default() }, args.seed)?;
    let frames = render_frames(&scene, &default_trajectory(args.frames), &synthetic_intrinsics())?;
    write_sequence(out, &frames)?;

    let noise = NoiseModel {
        missed_tag_prob: args.missed_tag_prob,
        dropout_prob: args.dropout,
        split_prob: args.split_prob,
        morph_prob: args.morph_prob,
        ..NoiseModel::none()
    };
    let confusion = PlantedConfusion::uniform_noise(&canonical, n, args.label_noise)?;
    let mut detector = SyntheticDetector::new(scene.clone(), confusion, noise, args.seed)?;
    let payloads = detect_sequence(&mut detector, &frames, args.stride, args.prompt_window);
    let pred_dir = out.join(PREDICTION_DIR);
    std::fs::create_dir_all(&pred_dir).with_context(|| pred_dir.display().to_string())?;
    for p in &payloads {
        let path = pred_dir.join(payload_file_name(p.frame));
        std::fs::write(&path, DetectionPayload::from_frame(p, &space).to_json())
            .with_context(|| path.display().to_string())?;
    }
    space.open_set.write(&out.join(OPEN_LABELS_FILE))?;
    space.closed_set.write(&out.join(CLOSED_LABELS_FILE))?;
    AnnotatedLogFile::from_frames(detector.annotations(), &space).write(&out.join(ANNOTATIONS_FILE))?;

    let config = PipelineConfig {
        voxel_length: args.voxel_length,
        max_depth: args.max_depth,
        detection_stride: args.stride,
        prompt_window: args.prompt_window,
        ..Default::default()
    };
    let config_path = out.join(CONFIG_FILE);
    std::fs::write(&config_path, config.to_toml_string()).with_context(|| config_path.display().to_string())?;

    // Ground truth lives on the reconstructed surface so that IoU compares like with like.
    let placeholder = LikelihoodMatrix::manual(
        &fusemap::label_fusion::HardAssociation::by_name(&space)?,
        config.manual_likelihood,
    )?;
    let geometry = run_sequence(&config, &placeholder, frames.into_iter().map(Ok), None)?;
    let gt = scene.label_points(&geometry.points.points, 1.5 * args.voxel_length);
    write_labeled_points(&out.join(GROUND_TRUTH_FILE), &gt)?;

    println!(
        "{} objects, {} frames, {} detection payloads, {} ground-truth points -> {}",
        scene.objects.len(),
        args.frames,
        payloads.len(),
        gt.len(),
        out.display()
    );
    Ok(())
}

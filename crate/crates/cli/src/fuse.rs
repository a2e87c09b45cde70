use std::path::PathBuf;

use anyhow::{Context, Result};
use fusemap::pipeline::{
    export_map, run_sequence, DetectorSource, DirectorySource, FusionModel, PipelineConfig, SequenceDir,
};

#[derive(clap::Args)]
pub struct Args {
    /// TOML configuration; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Sequence directory.
    #[arg(long)]
    input: PathBuf,
    /// Export directory.
    #[arg(long)]
    output: PathBuf,
    /// Voxel edge length in meters
    #[arg(long)]
    voxel_length: Option<f64>,
    /// Fuse detections every this many frames.
    #[arg(long)]
    stride: Option<u64>,
    /// Detection frames remembered for prompt augmentation; 0 disables it.
    #[arg(long)]
    prompt_window: Option<usize>,
    /// Ignore depth beyond this many meters; 0 keeps all
    #[arg(long)]
    max_depth: Option<f64>,
    /// Likelihood matrix CSV.
    #[arg(long)]
    likelihood_matrix: Option<PathBuf>,
    /// Detector service URL, used instead of payload files.
    #[arg(long)]
    remote_url: Option<String>,
    /// Integrate geometry only.
    #[arg(long)]
    no_detections: bool,
    /// Skip instance merging.
    #[arg(long)]
    no_merge: bool,
    /// Skip instance-geometry fusion.
    #[arg(long)]
    no_geometry_fusion: bool,
}

impl Args {
    fn config(&self) -> Result<PipelineConfig> {
        let mut c = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        if let Some(v) = self.voxel_length {
            c.voxel_length = v;
        }
        if let Some(v) = self.stride {
            c.detection_stride = v;
        }
        if let Some(v) = self.prompt_window {
            c.prompt_window = v;
        }
        if let Some(v) = self.max_depth {
            c.max_depth = v;
        }
        if let Some(v) = &self.likelihood_matrix {
            c.likelihood_matrix = Some(v.clone());
        }
        if let Some(v) = &self.remote_url {
            c.remote_url = Some(v.clone());
        }
        if self.no_merge {
            c.merge_period = 0;
        }
        if self.no_geometry_fusion {
            c.geometry_fusion = false;
        }
        c.validate()?;
        Ok(c)
    }
}

#[cfg(feature = "remote")]
fn remote_source(
    url: &str,
    space: fusemap::detections::LabelSpace,
    timeout_ms: u64,
) -> Result<Box<dyn DetectorSource>> {
    Ok(Box::new(fusemap::pipeline::RemoteSource::new(
        url,
        space,
        std::time::Duration::from_millis(timeout_ms),
    )?))
}

#[cfg(not(feature = "remote"))]
fn remote_source(
    url: &str,
    _space: fusemap::detections::LabelSpace,
    _timeout_ms: u64,
) -> Result<Box<dyn DetectorSource>> {
    anyhow::bail!("{url}: built without the `remote` feature")
}

pub fn run(args: Args) -> Result<()> {
    let config = args.config()?;
    let seq = SequenceDir::open(&args.input)?;
    let model = FusionModel::from_config(&config, &args.input)?;
    let mut source: Option<Box<dyn DetectorSource>> = if args.no_detections {
        None
    } else if let Some(url) = &config.remote_url {
        Some(remote_source(url, model.space.clone(), config.remote_timeout_ms)?)
    } else {
        Some(Box::new(DirectorySource::new(seq.prediction_dir(), model.space.clone())))
    };
    let source = source.as_mut().map(|s| s.as_mut() as &mut dyn DetectorSource);
    let output = run_sequence(&config, &model.matrix, seq.frames(), source)?;
    export_map(&args.output, &output, &model.space)
        .with_context(|| format!("exporting to {}", args.output.display()))?;
    let r = &output.report;
    println!(
        "{} frames ({} skipped), {} detection frames, {} instances, {} surface points -> {}",
        r.frames_integrated,
        r.frames_skipped,
        r.detection_frames,
        r.final_instances,
        r.surface_points,
        args.output.display()
    );
    Ok(())
}

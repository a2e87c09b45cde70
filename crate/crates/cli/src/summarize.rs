use std::path::PathBuf;

use anyhow::Result;
use fusemap::detections::{LabelList, LabelSpace};
use fusemap::label_fusion::{build_statistical_matrix, summarize_evidence, AnnotatedLogFile};
use fusemap::pipeline::{CLOSED_LABELS_FILE, OPEN_LABELS_FILE};

#[derive(clap::Args)]
pub struct Args {
    /// Annotated detection log (JSON).
    #[arg(long)]
    log: PathBuf,
    /// Open-set label list; defaults to open_labels.txt next to the log.
    #[arg(long)]
    open_labels: Option<PathBuf>,
    /// Closed-set class list; defaults to closed_labels.txt next to the log.
    #[arg(long)]
    closed_labels: Option<PathBuf>,
    /// Likelihood matrix CSV to write.
    #[arg(long)]
    output: PathBuf,
    /// Also write the raw evidence counts.
    #[arg(long)]
    evidence: Option<PathBuf>,
}

pub fn run(args: Args) -> Result<()> {
    let dir = args.log.parent().map(PathBuf::from).unwrap_or_default();
    let open = args.open_labels.unwrap_or_else(|| dir.join(OPEN_LABELS_FILE));
    let closed = args.closed_labels.unwrap_or_else(|| dir.join(CLOSED_LABELS_FILE));
    let space = LabelSpace::new(LabelList::read(&open)?, LabelList::read(&closed)?);
    let frames = AnnotatedLogFile::read(&args.log)?.resolve(&space)?;
    let summary = summarize_evidence(&frames, space.open_set.len(), space.closed_set.len())?;
    if let Some(p) = &args.evidence {
        summary.evidence.write_csv(p, &space)?;
    }
    let stat = build_statistical_matrix(&summary.evidence)?;
    stat.matrix.write_csv(&args.output, &space)?;
    println!(
        "{} frames ({} without ground truth), {} cells without evidence -> {}",
        frames.len(),
        summary.skipped_frames,
        stat.no_evidence.len(),
        args.output.display()
    );
    Ok(())
}

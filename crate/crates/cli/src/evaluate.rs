use std::path::PathBuf;

use anyhow::{bail, Result};
use fusemap::eval::{
    cluster_all, evaluate_ap, group_ground_truth, read_labeled_points, ApReport, InstancePrediction, GROUND_TRUTH_FILE,
    NO_CLASS,
};
use fusemap::geometry::ply::read_ply;
use fusemap::pipeline::{load_predictions, read_instances, CLOUD_FILE, DEFAULT_VOXEL_LENGTH, INSTANCES_FILE};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
enum Method {
    /// Instances as exported by `fuse`.
    Map,
    /// Connected components of same-class points in the exported cloud.
    ClusterAll,
}

#[derive(clap::Args)]
pub struct Args {
    /// Export directory written by `fuse`.
    #[arg(long)]
    pred: PathBuf,
    /// Labeled point list, or a directory holding gt.txt.
    #[arg(long)]
    gt: PathBuf,
    /// IoU thresholds.
    #[arg(long, num_args = 1.., default_values_t = [0.5, 0.25])]
    iou: Vec<f64>,
    /// Voxelization cell for point-set IoU (m).
    #[arg(long, default_value_t = DEFAULT_VOXEL_LENGTH)]
    cell: f64,
    #[arg(long, value_enum, default_value_t = Method::Map)]
    method: Method,
    /// Cluster-All neighbor radius; defaults to twice the cell.
    #[arg(long)]
    radius: Option<f64>,
    /// Print the report as JSON.
    #[arg(long)]
    json: bool,
}

fn predictions(args: &Args) -> Result<Vec<InstancePrediction>> {
    match args.method {
        Method::Map => Ok(load_predictions(&args.pred)?),
        Method::ClusterAll => {
            let cloud = read_ply(&args.pred.join(CLOUD_FILE))?;
            let Some(classes) = &cloud.class_ids else {
                bail!("{}: cloud has no class ids", args.pred.join(CLOUD_FILE).display());
            };
            let (points, classes): (Vec<_>, Vec<_>) = cloud
                .points
                .iter()
                .zip(classes)
                .filter(|(_, c)| **c != NO_CLASS)
                .map(|(p, c)| (*p, *c as usize))
                .unzip();
            Ok(cluster_all(&points, &classes, args.radius.unwrap_or(2.0 * args.cell)))
        }
    }
}

fn print_table(report: &ApReport, names: &[String]) {
    let header: Vec<String> = report.thresholds.iter().map(|t| format!("AP{:.0}", t * 100.0)).collect();
    println!("{:<16} {}", "class", header.iter().map(|h| format!("{h:>7}")).collect::<String>());
    for (c, aps) in &report.per_class {
        let name = names.get(*c).cloned().unwrap_or_else(|| c.to_string());
        println!("{name:<16} {}", aps.iter().map(|a| format!("{a:>7.1}")).collect::<String>());
    }
    println!("{:<16} {}", "mean", report.mean.iter().map(|a| format!("{a:>7.1}")).collect::<String>());
}

pub fn run(args: Args) -> Result<()> {
    if args.cell <= 0.0 || args.iou.iter().any(|t| !(0.0..=1.0).contains(t)) {
        bail!("--cell must be positive and --iou values within [0, 1]");
    }
    let gt_path = if args.gt.is_dir() { args.gt.join(GROUND_TRUTH_FILE) } else { args.gt.clone() };
    let gt = group_ground_truth(&read_labeled_points(&gt_path)?);
    let preds = predictions(&args)?;
    let report = evaluate_ap(&preds, &gt, &args.iou, args.cell);
    if args.json {
        let mut v = serde_json::to_value(&report)?;
        v["predictions"] = preds.len().into();
        v["ground_truth"] = gt.len().into();
        println!("{}", serde_json::to_string_pretty(&v)?);
        return Ok(());
    }
    let names = read_instances(&args.pred.join(INSTANCES_FILE)).map(|f| f.classes).unwrap_or_default();
    println!("{} predictions, {} ground-truth instances", preds.len(), gt.len());
    print_table(&report, &names);
    Ok(())
}

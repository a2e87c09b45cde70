use std::time::Instant;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::config::PipelineConfig;
use super::source::DetectorSource;
use crate::association::{
    apply_frame, associate, instance_geometry_fusion, merge_pass, visible_instances, InstanceMap, MapEvent,
    MapEventKind,
};
use crate::detections::{PromptState, SkipCounts};
use crate::error::Result;
use crate::geometry::{Frame, GlobalTsdf, PointCloud};
use crate::label_fusion::LikelihoodMatrix;

/// Wall-clock time of one detection frame, by stage, in milliseconds.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DetectionFrameTiming {
    pub frame: u64,
    pub projection_ms: f64,
    pub association_ms: f64,
    pub integration_ms: f64,
    pub merge_ms: f64,
}

impl DetectionFrameTiming {
    /// Projection, association and instance integration.
    pub fn fusion_ms(&self) -> f64 {
        self.projection_ms + self.association_ms + self.integration_ms
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub mean_ms: f64,
    pub max_ms: f64,
}

impl StageSummary {
    fn of(values: impl Iterator<Item = f64>) -> Self {
        let (mut n, mut sum, mut max) = (0usize, 0.0, 0.0f64);
        for v in values {
            n += 1;
            sum += v;
            max = max.max(v);
        }
        Self {
            mean_ms: if n == 0 { 0.0 } else { sum / n as f64 },
            max_ms: max,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub frames_total: usize,
    pub frames_integrated: usize,
    pub frames_skipped: usize,
    pub detection_frames: usize,
    /// Detection frames without a payload; these update geometry only.
    pub detection_frames_without_payload: usize,
    pub detections: usize,
    pub detections_skipped: SkipCounts,
    pub detections_ignored: usize,
    pub matches: usize,
    pub instances_created: usize,
    pub merges: usize,
    pub voxels_pruned: usize,
    pub instances_deleted: usize,
    pub final_instances: usize,
    pub surface_points: usize,
    pub tsdf_ms: StageSummary,
    pub projection_ms: StageSummary,
    pub association_ms: StageSummary,
    pub integration_ms: StageSummary,
    pub merge_ms: StageSummary,
    /// Projection + association + integration per detection frame.
    pub fusion_ms: StageSummary,
    pub refinement_ms: f64,
    pub per_detection_frame: Vec<DetectionFrameTiming>,
}

pub struct RunOutput {
    pub tsdf: GlobalTsdf,
    pub map: InstanceMap,
    /// Surface points of the final global map.
    pub points: PointCloud,
    pub report: RunReport,
    pub events: Vec<MapEvent>,
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Runs the per-frame loop. The global TSDF integrates every frame; every
/// `detection_stride`-th frame also fuses detections from `source`. Without a
/// source the run is geometry-only. Frames given as errors are skipped.
pub fn run_sequence(
    config: &PipelineConfig,
    matrix: &LikelihoodMatrix,
    frames: impl IntoIterator<Item = Result<Frame>>,
    mut source: Option<&mut dyn DetectorSource>,
) -> Result<RunOutput> {
    config.validate()?;
    let mut tsdf = GlobalTsdf::new(config.voxel_length, config.truncation())?;
    let mut map = InstanceMap::with_band(config.voxel_length, config.instance_band(), matrix.n_closed());
    let mut prompt = PromptState::new(config.prompt_window);
    let merge = config.merge_params();
    let mode = config.combine();
    let mut report = RunReport::default();
    let mut events = Vec::new();
    let mut tsdf_times = Vec::new();

    for item in frames {
        report.frames_total += 1;
        let mut frame = match item {
            Ok(f) => f,
            Err(e) => {
                warn!("skipping frame: {e}");
                report.frames_skipped += 1;
                continue;
            }
        };
        if config.max_depth > 0.0 {
            frame.clip_depth(config.max_depth);
        }
        let t = Instant::now();
        tsdf.integrate(&frame)?;
        tsdf_times.push(ms(t));
        report.frames_integrated += 1;

        let Some(src) = source.as_deref_mut() else { continue };
        if frame.index % config.detection_stride != 0 {
            continue;
        }
        report.detection_frames += 1;
        let Some(dets) = src.fetch(&frame, &prompt.memory())? else {
            report.detection_frames_without_payload += 1;
            continue;
        };
        prompt.record_frame(&dets.detections);
        report.detections += dets.detections.len();
        report.detections_skipped.add(&dets.skipped);

        let mut timing = DetectionFrameTiming {
            frame: frame.index,
            ..Default::default()
        };
        let t = Instant::now();
        let visible = visible_instances(&map, &frame, config.min_visible_pixels);
        timing.projection_ms = ms(t);

        let t = Instant::now();
        let assoc = associate(&dets.detections, &visible, config.tau_2d)?;
        timing.association_ms = ms(t);

        let t = Instant::now();
        let update = apply_frame(&mut map, &frame, &dets.detections, &assoc, matrix, mode)?;
        timing.integration_ms = ms(t);
        report.matches += assoc.matches.len();
        report.instances_created += update.created.len();
        report.detections_ignored += update.ignored;
        events.extend(update.events);

        if config.merge_period > 0 && (report.detection_frames as u64 - 1) % config.merge_period == 0 {
            let t = Instant::now();
            let merged = merge_pass(&mut map, &merge, Some(frame.index))?;
            timing.merge_ms = ms(t);
            report.merges += merged.len();
            events.extend(merged);
        }
        report.per_detection_frame.push(timing);
    }

    let t = Instant::now();
    let points = tsdf.extract_points();
    if config.geometry_fusion {
        let pruned = instance_geometry_fusion(&mut map, &points);
        report.voxels_pruned = pruned.iter().filter_map(|e| e.removed_voxels).sum();
        report.instances_deleted = pruned.iter().filter(|e| e.event == MapEventKind::Delete).count();
        events.extend(pruned);
    }
    report.refinement_ms = ms(t);
    report.final_instances = map.len();
    report.surface_points = points.len();

    let per = std::mem::take(&mut report.per_detection_frame);
    report.tsdf_ms = StageSummary::of(tsdf_times.into_iter());
    report.projection_ms = StageSummary::of(per.iter().map(|t| t.projection_ms));
    report.association_ms = StageSummary::of(per.iter().map(|t| t.association_ms));
    report.integration_ms = StageSummary::of(per.iter().map(|t| t.integration_ms));
    report.merge_ms = StageSummary::of(per.iter().map(|t| t.merge_ms));
    report.fusion_ms = StageSummary::of(per.iter().map(DetectionFrameTiming::fusion_ms));
    report.per_detection_frame = per;
    info!(
        "{} frames, {} detection frames, {} instances",
        report.frames_integrated, report.detection_frames, report.final_instances
    );
    Ok(RunOutput {
        tsdf,
        map,
        points,
        report,
        events,
    })
}

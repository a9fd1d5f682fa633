//! Localization pipeline on top of the plane-based registration: relative
//! pose tracking, global optimization against a prior vision-built map,
//! metascan relative optimization for map dropouts, and the structural
//! initial-pose cell search.

use std::collections::{HashMap, HashSet, VecDeque};
use std::sync::{Arc, Mutex};

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::geometry::{
    apply_transform, transform_extent, PlanarSegment, Point3, PointCloud, Pose, RigidTransform,
    SourceTag,
};
use crate::registration::register_segments;
use crate::segmentation::segment_planes;

/// Poses closer than this are treated as the same localization hypothesis
/// when ranking cell-search results (overlapping cells that localize the
/// scan at the same place are one candidate, not two).
const POSE_CLUSTER_DIST: f64 = 1.0;
const POSE_CLUSTER_ANGLE: f64 = 10.0 * std::f64::consts::PI / 180.0;

/// Parameters of the initial-pose cell search.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSearchParams {
    /// Added to the scan bounding box to size the cells, meters.
    pub cell_tolerance: f64,
    /// Minimum inlier ratio the best cell must reach.
    pub alpha: f64,
    /// Required ratio between the best and second-best cell.
    pub beta: f64,
}

impl Default for CellSearchParams {
    fn default() -> Self {
        Self {
            cell_tolerance: 5.0,
            alpha: 0.3,
            beta: 1.5,
        }
    }
}

impl CellSearchParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.cell_tolerance >= 0.0) {
            return Err(Error::InvalidParam("cell_tolerance must be >= 0".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParam(format!(
                "alpha must be in (0,1), got {}",
                self.alpha
            )));
        }
        if !(self.beta > 1.0) {
            return Err(Error::InvalidParam(format!(
                "beta must be > 1, got {}",
                self.beta
            )));
        }
        Ok(())
    }
}

/// Parameters of the metascan relative optimization.
#[derive(Debug, Clone, PartialEq)]
pub struct MetascanParams {
    /// Surfaces that must overlap for two scans to count as neighbors.
    pub min_overlapping_surfaces: usize,
    /// Pose change (radians, meters) below which neighbors are not
    /// re-examined.
    pub min_pose_change: (f64, f64),
}

impl Default for MetascanParams {
    fn default() -> Self {
        Self {
            min_overlapping_surfaces: 3,
            min_pose_change: (0.5f64.to_radians(), 0.05),
        }
    }
}

impl MetascanParams {
    pub fn validate(&self) -> Result<()> {
        if self.min_overlapping_surfaces < 1 {
            return Err(Error::InvalidParam(
                "min_overlapping_surfaces must be >= 1".into(),
            ));
        }
        if !(self.min_pose_change.0 > 0.0 && self.min_pose_change.1 > 0.0) {
            return Err(Error::InvalidParam(
                "min_pose_change components must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// A cached section of the global map: extracted cloud plus its segments.
#[derive(Debug)]
pub struct Section {
    pub cloud: PointCloud,
    pub segments: Vec<PlanarSegment>,
}

/// The prior global map (vision-derived, scaled), with
/// a cache of segmented sections keyed by the section box.
#[derive(Debug)]
pub struct GlobalMap {
    pub cloud: PointCloud,
    cache: Mutex<HashMap<[i64; 6], Arc<Section>>>,
}

impl GlobalMap {
    /// Wraps a vision-derived cloud. The cloud must carry the vision tag.
    pub fn new(cloud: PointCloud) -> Result<Self> {
        if cloud.source_tag != SourceTag::Vision {
            return Err(Error::InvalidInput(
                "global map cloud must be vision-derived".into(),
            ));
        }
        Ok(Self {
            cloud,
            cache: Mutex::new(HashMap::new()),
        })
    }

    fn section_for(&self, min: Point3, max: Point3, cfg: &Config) -> Arc<Section> {
        let q = |v: f64| (v / 0.25).round() as i64;
        let key = [q(min.x), q(min.y), q(min.z), q(max.x), q(max.y), q(max.z)];
        if let Some(hit) = self.cache.lock().unwrap().get(&key) {
            return hit.clone();
        }
        let cloud = points_in_box(&self.cloud, min, max);
        let segments = if cloud.len() >= cfg.segmentation.min_inliers {
            segment_planes(&cloud, &cfg.segmentation).unwrap_or_default()
        } else {
            Vec::new()
        };
        let section = Arc::new(Section { cloud, segments });
        self.cache
            .lock()
            .unwrap()
            .insert(key, section.clone());
        section
    }
}

/// All points of `cloud` inside the closed box `[min, max]`.
pub fn points_in_box(cloud: &PointCloud, min: Point3, max: Point3) -> PointCloud {
    let mut points = Vec::new();
    let mut colors = cloud.colors.as_ref().map(|_| Vec::new());
    for (i, p) in cloud.points.iter().enumerate() {
        if p.x >= min.x
            && p.x <= max.x
            && p.y >= min.y
            && p.y <= max.y
            && p.z >= min.z
            && p.z <= max.z
        {
            points.push(*p);
            if let (Some(colors), Some(src)) = (&mut colors, &cloud.colors) {
                colors.push(src[i]);
            }
        }
    }
    PointCloud {
        points,
        colors,
        source_tag: cloud.source_tag,
    }
}

/// Map points inside the scan's bounding box transformed to map frame by
/// `pose` and grown by `tolerance` on every side.
pub fn extract_section(
    map: &GlobalMap,
    pose: &RigidTransform,
    scan_extent: (Point3, Point3),
    tolerance: f64,
) -> PointCloud {
    let (min, max) = section_box(pose, scan_extent, tolerance);
    points_in_box(&map.cloud, min, max)
}

fn section_box(
    pose: &RigidTransform,
    scan_extent: (Point3, Point3),
    tolerance: f64,
) -> (Point3, Point3) {
    let (bmin, bmax) = transform_extent(pose, scan_extent.0, scan_extent.1);
    (
        Point3::new(bmin.x - tolerance, bmin.y - tolerance, bmin.z - tolerance),
        Point3::new(bmax.x + tolerance, bmax.y + tolerance, bmax.z + tolerance),
    )
}

/// Transforms a scan and its segments exactly: plane parameters are mapped
/// analytically while extents and centroids are recomputed from the
/// transformed inlier points.
pub fn transform_scan(
    t: &RigidTransform,
    cloud: &PointCloud,
    segments: &[PlanarSegment],
) -> (PointCloud, Vec<PlanarSegment>) {
    let moved = apply_transform(t, cloud);
    let segs = segments
        .iter()
        .map(|s| {
            let normal = t.rotation * s.normal;
            let distance = s.distance + normal.dot(&t.translation);
            let mut min = [f64::INFINITY; 3];
            let mut max = [f64::NEG_INFINITY; 3];
            let mut centroid = Vector3::zeros();
            for &i in &s.inliers {
                let p: [f64; 3] = moved.points[i].into();
                for a in 0..3 {
                    min[a] = min[a].min(p[a]);
                    max[a] = max[a].max(p[a]);
                }
                centroid += moved.points[i].to_vector();
            }
            let centroid = if s.inliers.is_empty() {
                t.apply(s.centroid).to_vector()
            } else {
                centroid / s.inliers.len() as f64
            };
            PlanarSegment {
                normal,
                distance,
                inliers: s.inliers.clone(),
                area: s.area,
                extent_min: if s.inliers.is_empty() {
                    s.extent_min
                } else {
                    Point3::from(min)
                },
                extent_max: if s.inliers.is_empty() {
                    s.extent_max
                } else {
                    Point3::from(max)
                },
                centroid: Point3::from_vector(centroid),
            }
        })
        .collect();
    (moved, segs)
}

/// A successful global optimization step.
#[derive(Debug, Clone)]
pub struct GlobalCorrection {
    pub pose: RigidTransform,
    pub pairs: usize,
}

/// Aligns a scan (with current pose estimate) against the section of the
/// global map it should occupy. Returns the corrected pose, or `None` when
/// the section is empty, registration fails, or the correction is larger
/// than the search window supports (treated as a mismatch).
pub fn global_optimize(
    map: &GlobalMap,
    current: &RigidTransform,
    scan: &PointCloud,
    scan_segments: &[PlanarSegment],
    cfg: &Config,
) -> Option<GlobalCorrection> {
    let extent = scan.bounds()?;
    let (smin, smax) = section_box(current, extent, cfg.section_tolerance);
    let section = map.section_for(smin, smax, cfg);
    if section.segments.is_empty() {
        return None;
    }
    let (_, scan_segs_m) = transform_scan(current, scan, scan_segments);
    let res = register_segments(
        &scan_segs_m,
        &section.segments,
        &cfg.matching,
        cfg.rank_tol,
        &RigidTransform::identity(),
        None,
        current.translation,
    );
    if res.failed {
        return None;
    }
    let max_edge = (smax.x - smin.x).max(smax.y - smin.y).max(smax.z - smin.z);
    if res.transform.rotation_angle() > cfg.max_correction_angle
        || res.transform.translation.norm() > 0.5 * max_edge
    {
        return None;
    }
    Some(GlobalCorrection {
        pose: res.transform.compose(current),
        pairs: res.correspondences.len(),
    })
}

/// Tracking mode: globally anchored, or relative (metascan fallback).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackingMode {
    Global,
    Relative,
}

/// A tracked scan: preprocessed cloud, its segments (sensor frame), and
/// the current map-frame pose.
#[derive(Debug, Clone)]
pub struct ScanRecord {
    pub cloud: PointCloud,
    pub segments: Vec<PlanarSegment>,
    pub pose: Pose,
}

/// State of the localization pipeline.
#[derive(Debug)]
pub struct TrackerState {
    pub history: Vec<ScanRecord>,
    pub current_pose: Pose,
    pub mode: TrackingMode,
    /// Index of the metascan master cloud; set iff `mode == Relative`.
    pub master_index: Option<usize>,
}

/// What happened during one tracking step.
#[derive(Debug, Clone)]
pub struct StepReport {
    pub scan_index: usize,
    pub relative: RigidTransform,
    pub registration_failed: bool,
    /// Set when the pose had to be propagated without plane support.
    pub low_confidence: bool,
    pub pairs: usize,
    pub translation_rank: usize,
    pub globally_corrected: bool,
    pub mode: TrackingMode,
    pub metascan: Option<MetascanReport>,
}

/// Outcome of the initial-pose cell search.
#[derive(Debug, Clone)]
pub enum PoseSearch {
    Found {
        pose: RigidTransform,
        r1: f64,
        r2: f64,
    },
    Ambiguous {
        r1: f64,
        r2: f64,
    },
    NotFound,
}

/// Inlier ratio: matched planes over the larger of the two segment counts.
pub fn inlier_ratio(matches: usize, scan_planes: usize, cell_planes: usize) -> f64 {
    matches as f64 / scan_planes.max(cell_planes).max(1) as f64
}

/// Seeds the tracker with the first scan.
///
/// When no initial pose is given the structural cell search runs against
/// the map; an ambiguous or failed search is an initialization error. The
/// seeded pose is immediately refined by a global optimization attempt; if
/// that is not possible the tracker starts in relative mode with this scan
/// as the metascan master.
pub fn initialize(
    map: Option<&GlobalMap>,
    first_scan: PointCloud,
    timestamp: f64,
    initial_pose: Option<RigidTransform>,
    cfg: &Config,
) -> Result<TrackerState> {
    let segments = segment_planes(&first_scan, &cfg.segmentation)?;
    let pose0 = match initial_pose {
        Some(p) => p,
        None => {
            let map = map.ok_or_else(|| {
                Error::Initialization("initial pose search requires a global map".into())
            })?;
            match initial_pose_search(map, &first_scan, cfg)? {
                PoseSearch::Found { pose, .. } => pose,
                PoseSearch::Ambiguous { r1, r2 } => {
                    return Err(Error::Initialization(format!(
                        "initial pose ambiguous (r1={r1:.4}, r2={r2:.4}); collect further scans"
                    )))
                }
                PoseSearch::NotFound => {
                    return Err(Error::Initialization("initial pose not found".into()))
                }
            }
        }
    };

    let (pose, mode, master) = match map.and_then(|m| {
        global_optimize(m, &pose0, &first_scan, &segments, cfg)
    }) {
        Some(c) => (c.pose, TrackingMode::Global, None),
        None => (pose0, TrackingMode::Relative, Some(0)),
    };
    let pose = Pose::new(timestamp, pose);
    Ok(TrackerState {
        history: vec![ScanRecord {
            cloud: first_scan,
            segments,
            pose: pose.clone(),
        }],
        current_pose: pose,
        mode,
        master_index: master,
    })
}

/// Processes one new scan: registers it against the previous scan (with
/// odometry as the external translation estimate), accumulates the
/// relative transform, then attempts global optimization; on failure the
/// tracker switches to (or continues in) relative mode and runs the
/// metascan optimization.
pub fn track_step(
    state: &mut TrackerState,
    map: Option<&GlobalMap>,
    new_scan: PointCloud,
    timestamp: f64,
    odometry: Option<Vector3<f64>>,
    cfg: &Config,
) -> Result<StepReport> {
    if state.history.is_empty() {
        return Err(Error::InvalidInput(
            "tracker not initialized with a first scan".into(),
        ));
    }
    let segments = segment_planes(&new_scan, &cfg.segmentation)?;
    let prev = state.history.last().unwrap();
    let reg = register_segments(
        &segments,
        &prev.segments,
        &cfg.matching,
        cfg.rank_tol,
        &RigidTransform::identity(),
        odometry,
        Vector3::zeros(),
    );
    let (relative, low_confidence) = if reg.failed {
        // no plane support: propagate by odometry if present, else stay
        let t = odometry.unwrap_or_else(Vector3::zeros);
        (RigidTransform::new(nalgebra::Matrix3::identity(), t), true)
    } else {
        (reg.transform.clone(), reg.transform.translation_rank < 3 && odometry.is_none())
    };

    let new_pose = prev.pose.transform.compose(&relative);
    let index = state.history.len();
    state.history.push(ScanRecord {
        cloud: new_scan,
        segments,
        pose: Pose::new(timestamp, new_pose.clone()),
    });

    let mut globally_corrected = false;
    let mut metascan = None;

    let correction = map.and_then(|m| {
        let rec = &state.history[index];
        global_optimize(m, &rec.pose.transform, &rec.cloud, &rec.segments, cfg)
    });
    match correction {
        Some(c) => {
            globally_corrected = true;
            if state.mode == TrackingMode::Relative {
                // re-anchor the whole metascan chain by the new correction
                let master = state.master_index.unwrap_or(index);
                let g = c.pose.compose(&state.history[index].pose.transform.invert());
                for rec in &mut state.history[master..] {
                    rec.pose.transform = g.compose(&rec.pose.transform);
                }
            } else {
                state.history[index].pose.transform = c.pose;
            }
            state.mode = TrackingMode::Global;
            state.master_index = None;
        }
        None => {
            if state.mode == TrackingMode::Global {
                // first scan that could not be optimized globally becomes
                // the master and defines the coordinate system
                state.mode = TrackingMode::Relative;
                state.master_index = Some(index);
            }
            metascan = Some(metascan_optimize(state, index, cfg)?);
        }
    }

    state.current_pose = state.history[index].pose.clone();
    Ok(StepReport {
        scan_index: index,
        relative,
        registration_failed: reg.failed,
        low_confidence,
        pairs: reg.correspondences.len(),
        translation_rank: if reg.failed {
            0
        } else {
            reg.transform.translation_rank
        },
        globally_corrected,
        mode: state.mode,
        metascan,
    })
}

/// Result of a metascan optimization run.
#[derive(Debug, Clone, Default)]
pub struct MetascanReport {
    /// Worklist pops performed.
    pub iterations: usize,
    /// True when the safety bound of `10 * history len` pops was hit.
    pub exceeded_bound: bool,
    /// Scan indices whose pose was updated.
    pub updated: Vec<usize>,
    /// Scan indices popped without usable neighbors.
    pub isolated: Vec<usize>,
}

fn segments_in_map_frame(rec: &ScanRecord) -> Vec<PlanarSegment> {
    transform_scan(&rec.pose.transform, &rec.cloud, &rec.segments).1
}

/// Counts segments of `a` overlapping at least one segment of `b`, both
/// already in the map frame.
fn overlap_count(a: &[PlanarSegment], b: &[PlanarSegment], epsilon: f64) -> usize {
    let id = RigidTransform::identity();
    a.iter()
        .filter(|sa| {
            b.iter()
                .any(|sb| crate::registration::check_overlap(sa, sb, &id, epsilon))
        })
        .count()
}

/// Simultaneous matching over the relative chain: re-registers scans
/// against the merged segments of their overlapping neighbors until poses
/// stabilize. The master pose is never modified.
pub fn metascan_optimize(
    state: &mut TrackerState,
    start_index: usize,
    cfg: &Config,
) -> Result<MetascanReport> {
    let master = state.master_index.ok_or_else(|| {
        Error::InvalidInput("metascan requires relative mode with a master scan".into())
    })?;
    let mut report = MetascanReport::default();
    let bound = 10 * state.history.len();

    let mut queue = VecDeque::from([start_index]);
    let mut queued: HashSet<usize> = HashSet::from([start_index]);

    while let Some(current) = queue.pop_front() {
        queued.remove(&current);
        if report.iterations >= bound {
            report.exceeded_bound = true;
            break;
        }
        report.iterations += 1;
        if current == master {
            continue;
        }

        let current_segs = segments_in_map_frame(&state.history[current]);
        let mut neighbors = Vec::new();
        let mut merged: Vec<PlanarSegment> = Vec::new();
        for (j, rec) in state.history.iter().enumerate() {
            if j == current {
                continue;
            }
            let segs = segments_in_map_frame(rec);
            if overlap_count(&current_segs, &segs, cfg.matching.overlap_epsilon)
                >= cfg.metascan.min_overlapping_surfaces
            {
                neighbors.push(j);
                merged.extend(segs);
            }
        }
        if neighbors.is_empty() {
            report.isolated.push(current);
            continue;
        }

        let res = register_segments(
            &current_segs,
            &merged,
            &cfg.matching,
            cfg.rank_tol,
            &RigidTransform::identity(),
            None,
            state.history[current].pose.transform.translation,
        );
        if res.failed {
            report.isolated.push(current);
            continue;
        }
        let change_angle = res.transform.rotation_angle();
        let change_trans = res.transform.translation.norm();
        let rec = &mut state.history[current];
        rec.pose.transform = res.transform.compose(&rec.pose.transform);
        report.updated.push(current);

        if change_angle > cfg.metascan.min_pose_change.0
            || change_trans > cfg.metascan.min_pose_change.1
        {
            for j in neighbors {
                if j != master && queued.insert(j) {
                    queue.push_back(j);
                }
            }
        }
    }
    if let Some(last) = state.history.last() {
        state.current_pose = last.pose.clone();
    }
    Ok(report)
}

#[derive(Debug, Clone)]
struct CellCandidate {
    r: f64,
    pose: RigidTransform,
    cell_index: usize,
}

/// Structural initial-pose search (no prior pose): the map is tiled into
/// overlapping cells sized by the scan's bounding box plus a tolerance;
/// each cell is segmented and registered against the scan, and the inlier
/// ratios of the resulting pose hypotheses decide between a unique match,
/// ambiguity, and failure.
pub fn initial_pose_search(
    map: &GlobalMap,
    scan: &PointCloud,
    cfg: &Config,
) -> Result<PoseSearch> {
    cfg.cell.validate()?;
    let scan_segments = segment_planes(scan, &cfg.segmentation)?;
    if scan_segments.is_empty() {
        return Err(Error::InvalidInput(
            "scan yields no planar segments; cannot search for a pose".into(),
        ));
    }
    let (scan_min, scan_max) = scan.bounds().expect("segmented scan is non-empty");
    let (map_min, map_max) = map
        .bounds()
        .ok_or_else(|| Error::InvalidInput("global map is empty".into()))?;

    // cell size = scan bbox + tolerance, tiled with 50% stride overlap
    let cell = [
        scan_max.x - scan_min.x + cfg.cell.cell_tolerance,
        scan_max.y - scan_min.y + cfg.cell.cell_tolerance,
        scan_max.z - scan_min.z + cfg.cell.cell_tolerance,
    ];
    let map_size = [
        map_max.x - map_min.x,
        map_max.y - map_min.y,
        map_max.z - map_min.z,
    ];
    let counts: Vec<usize> = (0..3)
        .map(|a| {
            if map_size[a] <= cell[a] {
                1
            } else {
                ((map_size[a] - cell[a]) / (cell[a] / 2.0)).ceil() as usize + 1
            }
        })
        .collect();
    let origin = |axis: usize, k: usize| -> f64 {
        let start = [map_min.x, map_min.y, map_min.z][axis];
        start + k as f64 * cell[axis] / 2.0
    };

    let mut boxes = Vec::new();
    for kx in 0..counts[0] {
        for ky in 0..counts[1] {
            for kz in 0..counts[2] {
                let min = Point3::new(origin(0, kx), origin(1, ky), origin(2, kz));
                let max = Point3::new(min.x + cell[0], min.y + cell[1], min.z + cell[2]);
                boxes.push((min, max));
            }
        }
    }

    // Translation hints per cell: the scan box center mapped onto the cell
    // box center, plus a grid of offsets wide enough to cover the tiling
    // quantization at steps the distance gate can absorb.
    let scan_box_center = Vector3::new(
        (scan_min.x + scan_max.x) / 2.0,
        (scan_min.y + scan_max.y) / 2.0,
        (scan_min.z + scan_max.z) / 2.0,
    );
    let spacing = 1.5 * cfg.matching.distance_tol;
    let steps: Vec<i32> = (0..3)
        .map(|a| ((cell[a] / 4.0) / spacing).ceil().min(3.0) as i32)
        .collect();

    let candidates: Vec<Option<CellCandidate>> = boxes
        .par_iter()
        .enumerate()
        .map(|(cell_index, &(min, max))| {
            let cell_cloud = points_in_box(&map.cloud, min, max);
            if cell_cloud.len() < cfg.segmentation.min_inliers {
                return None;
            }
            let cell_segments = segment_planes(&cell_cloud, &cfg.segmentation).ok()?;
            if cell_segments.is_empty() {
                return None;
            }
            let base = Vector3::new(
                (min.x + max.x) / 2.0,
                (min.y + max.y) / 2.0,
                (min.z + max.z) / 2.0,
            ) - scan_box_center;
            let mut best: Option<(usize, f64, crate::registration::RegistrationResult)> = None;
            for ix in -steps[0]..=steps[0] {
                for iy in -steps[1]..=steps[1] {
                    for iz in -steps[2]..=steps[2] {
                        let hint = RigidTransform::new(
                            nalgebra::Matrix3::identity(),
                            base + Vector3::new(
                                ix as f64 * spacing,
                                iy as f64 * spacing,
                                iz as f64 * spacing,
                            ),
                        );
                        let res = register_segments(
                            &scan_segments,
                            &cell_segments,
                            &cfg.matching,
                            cfg.rank_tol,
                            &hint,
                            Some(hint.translation),
                            Vector3::zeros(),
                        );
                        if res.failed {
                            continue;
                        }
                        let better = match &best {
                            None => true,
                            Some((pairs, residual, _)) => {
                                res.correspondences.len() > *pairs
                                    || (res.correspondences.len() == *pairs
                                        && res.translation_residual < *residual)
                            }
                        };
                        if better {
                            best = Some((
                                res.correspondences.len(),
                                res.translation_residual,
                                res,
                            ));
                        }
                    }
                }
            }
            let (pairs, _, res) = best?;
            let r = inlier_ratio(pairs, scan_segments.len(), cell_segments.len());
            Some(CellCandidate {
                r,
                pose: res.transform,
                cell_index,
            })
        })
        .collect();

    let mut candidates: Vec<CellCandidate> = candidates.into_iter().flatten().collect();
    if candidates.is_empty() {
        return Ok(PoseSearch::NotFound);
    }
    candidates.sort_by(|a, b| {
        b.r.partial_cmp(&a.r)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cell_index.cmp(&b.cell_index))
    });

    // overlapping cells that localize the scan at the same pose are one
    // hypothesis; keep the best representative of each cluster
    let mut reps: Vec<CellCandidate> = Vec::new();
    for c in candidates {
        let dup = reps.iter().any(|r| {
            (r.pose.translation - c.pose.translation).norm() < POSE_CLUSTER_DIST
                && r.pose.rotation_angle_to(&c.pose) < POSE_CLUSTER_ANGLE
        });
        if !dup {
            reps.push(c);
        }
    }

    let r1 = reps[0].r;
    let r2 = reps.get(1).map(|c| c.r).unwrap_or(0.0);
    if r1 > cfg.cell.alpha && r1 > cfg.cell.beta * r2 {
        Ok(PoseSearch::Found {
            pose: reps[0].pose.clone(),
            r1,
            r2,
        })
    } else {
        Ok(PoseSearch::Ambiguous { r1, r2 })
    }
}

impl GlobalMap {
    pub fn bounds(&self) -> Option<(Point3, Point3)> {
        self.cloud.bounds()
    }
}

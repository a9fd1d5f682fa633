//! Point-cloud conditioning (voxel grid downsampling, statistical outlier
//! removal) and monocular-scale recovery from a GPS track.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud, Trajectory};
use crate::spatial::KdTree;

/// Parameters for the two preprocessing filters.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterParams {
    /// Voxel edge length in meters.
    pub voxel_leaf: f64,
    /// Neighbor count k for the mean-distance statistic.
    pub outlier_neighbors: usize,
    /// Removal threshold in standard deviations above the global mean.
    pub outlier_stddev_mult: f64,
}

impl Default for FilterParams {
    fn default() -> Self {
        Self {
            voxel_leaf: 0.1,
            outlier_neighbors: 16,
            outlier_stddev_mult: 1.5,
        }
    }
}

impl FilterParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.voxel_leaf > 0.0) {
            return Err(Error::InvalidParam(format!(
                "voxel_leaf must be positive, got {}",
                self.voxel_leaf
            )));
        }
        if self.outlier_neighbors < 1 {
            return Err(Error::InvalidParam("outlier_neighbors must be >= 1".into()));
        }
        if !(self.outlier_stddev_mult > 0.0) {
            return Err(Error::InvalidParam(format!(
                "outlier_stddev_mult must be positive, got {}",
                self.outlier_stddev_mult
            )));
        }
        Ok(())
    }
}

fn voxel_key(p: Point3, leaf: f64) -> (i64, i64, i64) {
    (
        (p.x / leaf).floor() as i64,
        (p.y / leaf).floor() as i64,
        (p.z / leaf).floor() as i64,
    )
}

/// Voxel grid downsampling: at most one point per occupied voxel, placed at
/// the centroid of that voxel's points. Colors, when present, are averaged
/// per voxel. Output voxels appear in first-seen input order.
pub fn voxel_filter(cloud: &PointCloud, leaf: f64) -> Result<PointCloud> {
    if !(leaf > 0.0) {
        return Err(Error::InvalidParam(format!(
            "voxel leaf must be positive, got {leaf}"
        )));
    }
    struct Acc {
        sum: [f64; 3],
        color_sum: [u64; 3],
        count: u64,
    }
    let mut voxels: HashMap<(i64, i64, i64), Acc> = HashMap::new();
    let mut order: Vec<(i64, i64, i64)> = Vec::new();
    for (i, p) in cloud.points.iter().enumerate() {
        let key = voxel_key(*p, leaf);
        let acc = voxels.entry(key).or_insert_with(|| {
            order.push(key);
            Acc {
                sum: [0.0; 3],
                color_sum: [0; 3],
                count: 0,
            }
        });
        acc.sum[0] += p.x;
        acc.sum[1] += p.y;
        acc.sum[2] += p.z;
        if let Some(colors) = &cloud.colors {
            for c in 0..3 {
                acc.color_sum[c] += colors[i][c] as u64;
            }
        }
        acc.count += 1;
    }
    let mut points = Vec::with_capacity(order.len());
    let mut colors = cloud.colors.as_ref().map(|_| Vec::with_capacity(order.len()));
    for key in order {
        let acc = &voxels[&key];
        let n = acc.count as f64;
        points.push(Point3::new(acc.sum[0] / n, acc.sum[1] / n, acc.sum[2] / n));
        if let Some(colors) = &mut colors {
            colors.push([
                (acc.color_sum[0] / acc.count) as u8,
                (acc.color_sum[1] / acc.count) as u8,
                (acc.color_sum[2] / acc.count) as u8,
            ]);
        }
    }
    Ok(PointCloud {
        points,
        colors,
        source_tag: cloud.source_tag,
    })
}

/// Statistical outlier removal: a point is dropped when its mean distance
/// to its `k` nearest neighbors exceeds `mean + mult * stddev` of that
/// statistic over the whole cloud.
pub fn outlier_filter(cloud: &PointCloud, k: usize, mult: f64) -> Result<PointCloud> {
    if k < 1 || !(mult > 0.0) {
        return Err(Error::InvalidParam(format!(
            "outlier filter needs k >= 1 and mult > 0, got k={k} mult={mult}"
        )));
    }
    let n = cloud.len();
    if n <= k {
        return Err(Error::InvalidParam(format!(
            "outlier filter needs more than k={k} points, cloud has {n}"
        )));
    }
    let tree = KdTree::build(&cloud.points);
    let mut mean_dists = Vec::with_capacity(n);
    for p in &cloud.points {
        // k+1 because the query point itself is its own nearest neighbor
        let nn = tree.k_nearest(*p, k + 1);
        let sum: f64 = nn.iter().skip(1).map(|(_, d)| d.sqrt()).sum();
        mean_dists.push(sum / k as f64);
    }
    let mean: f64 = mean_dists.iter().sum::<f64>() / n as f64;
    let var: f64 = mean_dists.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n as f64;
    let threshold = mean + mult * var.sqrt();

    let keep: Vec<usize> = (0..n).filter(|&i| mean_dists[i] <= threshold).collect();
    let points = keep.iter().map(|&i| cloud.points[i]).collect();
    let colors = cloud
        .colors
        .as_ref()
        .map(|c| keep.iter().map(|&i| c[i]).collect());
    Ok(PointCloud {
        points,
        colors,
        source_tag: cloud.source_tag,
    })
}

/// Standard conditioning pipeline: voxel downsampling followed by
/// statistical outlier removal. The outlier stage is skipped when the
/// downsampled cloud is too small for its k-neighborhood statistic.
pub fn apply_filters(cloud: &PointCloud, params: &FilterParams) -> Result<PointCloud> {
    params.validate()?;
    let voxeled = voxel_filter(cloud, params.voxel_leaf)?;
    if voxeled.len() <= params.outlier_neighbors {
        return Ok(voxeled);
    }
    outlier_filter(
        &voxeled,
        params.outlier_neighbors,
        params.outlier_stddev_mult,
    )
}

/// Recovers the metric scale of a monocular trajectory from a GPS track.
///
/// Every vision pose is assigned its nearest GPS pose (by timestamp when
/// both trajectories carry real stamps, by index-proportional resampling
/// otherwise); the scale is the ratio of mean adjacent-step lengths,
/// GPS over vision.
pub fn estimate_scale(vision: &Trajectory, gps: &Trajectory) -> Result<f64> {
    if vision.len() < 2 || gps.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "scale estimation needs >= 2 poses in both trajectories, got {} and {}",
            vision.len(),
            gps.len()
        )));
    }
    let gps_positions = gps.positions();
    let assigned: Vec<Point3> = vision
        .poses()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let j = nearest_gps_index(p.timestamp, i, vision, gps);
            gps_positions[j]
        })
        .collect();

    let mean_step = |pts: &[Point3]| -> f64 {
        let total: f64 = pts
            .windows(2)
            .map(|w| (w[1].to_vector() - w[0].to_vector()).norm())
            .sum();
        total / (pts.len() - 1) as f64
    };
    let vision_mean = mean_step(&vision.positions());
    let gps_mean = mean_step(&assigned);
    if vision_mean <= 0.0 {
        return Err(Error::Scale(
            "vision trajectory has zero mean step length".into(),
        ));
    }
    Ok(gps_mean / vision_mean)
}

fn nearest_gps_index(timestamp: f64, index: usize, vision: &Trajectory, gps: &Trajectory) -> usize {
    let by_time = vision.poses().iter().any(|p| p.timestamp != 0.0)
        || gps.poses().iter().any(|p| p.timestamp != 0.0);
    if by_time {
        let mut best = 0;
        let mut best_dt = f64::INFINITY;
        for (j, g) in gps.poses().iter().enumerate() {
            let dt = (g.timestamp - timestamp).abs();
            if dt < best_dt {
                best_dt = dt;
                best = j;
            }
        }
        best
    } else {
        // index-proportional resampling
        let num = index * (gps.len() - 1);
        let den = (vision.len() - 1).max(1);
        (num as f64 / den as f64).round() as usize
    }
}

/// Multiplies every coordinate by `s`.
pub fn scale_cloud(cloud: &PointCloud, s: f64) -> Result<PointCloud> {
    if !(s > 0.0) {
        return Err(Error::InvalidParam(format!(
            "scale factor must be positive, got {s}"
        )));
    }
    Ok(PointCloud {
        points: cloud
            .points
            .iter()
            .map(|p| Point3::new(p.x * s, p.y * s, p.z * s))
            .collect(),
        colors: cloud.colors.clone(),
        source_tag: cloud.source_tag,
    })
}

/// Multiplies every pose position by `s`; rotations and timestamps are
/// unchanged.
pub fn scale_trajectory(traj: &Trajectory, s: f64) -> Result<Trajectory> {
    if !(s > 0.0) {
        return Err(Error::InvalidParam(format!(
            "scale factor must be positive, got {s}"
        )));
    }
    let poses = traj
        .poses()
        .iter()
        .map(|p| {
            let mut t = p.transform.clone();
            t.translation *= s;
            crate::geometry::Pose::new(p.timestamp, t)
        })
        .collect();
    Trajectory::from_poses(poses)
}

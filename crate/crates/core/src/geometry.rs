//! Core value types: points, clouds, planar segments, rigid transforms,
//! poses and trajectories. All types are immutable values and safe to share
//! across threads.

use nalgebra::{Matrix3, UnitQuaternion, Vector3};

use crate::error::{Error, Result};

/// A 3D point, coordinates in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn from_vector(v: Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn coord(self, axis: usize) -> f64 {
        match axis {
            0 => self.x,
            1 => self.y,
            2 => self.z,
            _ => panic!("axis out of range: {axis}"),
        }
    }
}

impl From<[f64; 3]> for Point3 {
    fn from(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

impl From<Point3> for [f64; 3] {
    fn from(p: Point3) -> [f64; 3] {
        [p.x, p.y, p.z]
    }
}

/// Which sensor family produced a cloud. Laser scans are precise and
/// radially sampled; vision clouds are denser but noisier and unevenly
/// distributed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceTag {
    Laser,
    Vision,
}

impl SourceTag {
    pub fn as_str(self) -> &'static str {
        match self {
            SourceTag::Laser => "laser",
            SourceTag::Vision => "vision",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "laser" => Some(SourceTag::Laser),
            "vision" => Some(SourceTag::Vision),
            _ => None,
        }
    }
}

/// An unorganized bag of 3D points with optional per-point RGB color.
///
/// Invariant: `colors`, when present, holds exactly one entry per point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3>,
    pub colors: Option<Vec<[u8; 3]>>,
    pub source_tag: SourceTag,
}

impl PointCloud {
    pub fn new(source_tag: SourceTag) -> Self {
        Self {
            points: Vec::new(),
            colors: None,
            source_tag,
        }
    }

    pub fn from_points(points: Vec<Point3>, source_tag: SourceTag) -> Self {
        Self {
            points,
            colors: None,
            source_tag,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Axis-aligned bounds of all points, or `None` for an empty cloud.
    pub fn bounds(&self) -> Option<(Point3, Point3)> {
        let first = *self.points.first()?;
        let mut min = first;
        let mut max = first;
        for p in &self.points[1..] {
            min.x = min.x.min(p.x);
            min.y = min.y.min(p.y);
            min.z = min.z.min(p.z);
            max.x = max.x.max(p.x);
            max.y = max.y.max(p.y);
            max.z = max.z.max(p.z);
        }
        Some((min, max))
    }

    /// Checks the color invariant; call after bulk construction.
    pub fn validate(&self) -> Result<()> {
        if let Some(c) = &self.colors {
            if c.len() != self.points.len() {
                return Err(Error::InvalidInput(format!(
                    "color count {} does not match point count {}",
                    c.len(),
                    self.points.len()
                )));
            }
        }
        if let Some(p) = self.points.iter().find(|p| !p.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite coordinate ({}, {}, {})",
                p.x, p.y, p.z
            )));
        }
        Ok(())
    }
}

/// An oriented plane with its supporting point set.
///
/// The plane satisfies `normal . p = distance` for points `p` on it; the
/// normal is unit length and oriented toward the viewpoint of the owning
/// cloud (its content centroid). `inliers` index into the owning cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarSegment {
    pub normal: Vector3<f64>,
    pub distance: f64,
    pub inliers: Vec<usize>,
    pub area: f64,
    pub extent_min: Point3,
    pub extent_max: Point3,
    pub centroid: Point3,
}

impl PlanarSegment {
    /// Axis of the largest normal component. Extent comparisons skip this
    /// axis when the segment plays the target role in the overlap test.
    pub fn dominant_axis(&self) -> usize {
        let a = [
            self.normal.x.abs(),
            self.normal.y.abs(),
            self.normal.z.abs(),
        ];
        if a[0] >= a[1] && a[0] >= a[2] {
            0
        } else if a[1] >= a[2] {
            1
        } else {
            2
        }
    }
}

/// A rigid body transform `p' = R p + t`, annotated with how many
/// translation directions were actually observable when it was estimated.
///
/// `translation_rank` is in `{0,1,2,3}`; `null_directions` holds the
/// `3 - rank` mutually orthogonal unit vectors along which the translation
/// was unconstrained by the matched planes.
#[derive(Debug, Clone, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    pub translation_rank: usize,
    pub null_directions: Vec<Vector3<f64>>,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self::new(Matrix3::identity(), Vector3::zeros())
    }

    /// Full-rank transform from rotation matrix and translation vector.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
            translation_rank: 3,
            null_directions: Vec::new(),
        }
    }

    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64, translation: Vector3<f64>) -> Self {
        let rotation = match nalgebra::Unit::try_new(axis, 1e-12) {
            Some(u) => nalgebra::Rotation3::from_axis_angle(&u, angle).into_inner(),
            None => Matrix3::identity(),
        };
        Self::new(rotation, translation)
    }

    pub fn apply(&self, p: Point3) -> Point3 {
        Point3::from_vector(self.rotation * p.to_vector() + self.translation)
    }

    pub fn apply_vector(&self, v: Vector3<f64>) -> Vector3<f64> {
        self.rotation * v + self.translation
    }

    /// Composition: `self.compose(&b)` maps `p` to `self(b(p))`.
    ///
    /// Rank annotations are not propagated; the result is full rank.
    pub fn compose(&self, b: &RigidTransform) -> RigidTransform {
        RigidTransform::new(
            self.rotation * b.rotation,
            self.rotation * b.translation + self.translation,
        )
    }

    /// Inverse transform. Rank annotations are dropped, as for `compose`.
    pub fn invert(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform::new(rt, -(rt * self.translation))
    }

    /// Rotation angle in radians (geodesic distance from the identity).
    pub fn rotation_angle(&self) -> f64 {
        rotation_angle_of(&self.rotation)
    }

    /// Geodesic rotation distance to another transform.
    pub fn rotation_angle_to(&self, other: &RigidTransform) -> f64 {
        rotation_angle_of(&(self.rotation.transpose() * other.rotation))
    }

    pub fn unit_quaternion(&self) -> UnitQuaternion<f64> {
        UnitQuaternion::from_matrix(&self.rotation)
    }

    pub fn from_quaternion(q: UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        Self::new(q.to_rotation_matrix().into_inner(), translation)
    }

    /// Row-major 4x4 homogeneous matrix.
    pub fn to_homogeneous_rows(&self) -> [[f64; 4]; 4] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            [r[(0, 0)], r[(0, 1)], r[(0, 2)], t.x],
            [r[(1, 0)], r[(1, 1)], r[(1, 2)], t.y],
            [r[(2, 0)], r[(2, 1)], r[(2, 2)], t.z],
            [0.0, 0.0, 0.0, 1.0],
        ]
    }

    pub fn from_homogeneous_rows(rows: &[[f64; 4]; 4]) -> Self {
        let rotation = Matrix3::new(
            rows[0][0], rows[0][1], rows[0][2], rows[1][0], rows[1][1], rows[1][2], rows[2][0],
            rows[2][1], rows[2][2],
        );
        let translation = Vector3::new(rows[0][3], rows[1][3], rows[2][3]);
        Self::new(rotation, translation)
    }
}

/// Angle of a rotation matrix via `atan2(|skew part|, (trace-1)/2)`;
/// accurate for small angles where the acos form loses precision.
pub fn rotation_angle_of(r: &Matrix3<f64>) -> f64 {
    let sin_vec = Vector3::new(
        r[(2, 1)] - r[(1, 2)],
        r[(0, 2)] - r[(2, 0)],
        r[(1, 0)] - r[(0, 1)],
    ) / 2.0;
    let cos = (r.trace() - 1.0) / 2.0;
    sin_vec.norm().atan2(cos)
}

/// Transforms every point of a cloud; colors and source tag are preserved.
pub fn apply_transform(t: &RigidTransform, cloud: &PointCloud) -> PointCloud {
    PointCloud {
        points: cloud.points.iter().map(|&p| t.apply(p)).collect(),
        colors: cloud.colors.clone(),
        source_tag: cloud.source_tag,
    }
}

/// Transforms plane parameters and extent of a segment.
///
/// `normal' = R n`, `distance' = d + normal' . t`. The extent is the
/// axis-aligned box of the eight transformed corners of the stored extent;
/// this bounds the transformed inliers exactly under axis-aligned rotations
/// and conservatively otherwise (the inlier coordinates themselves are not
/// carried by the segment).
pub fn transform_plane(t: &RigidTransform, seg: &PlanarSegment) -> PlanarSegment {
    let normal = t.rotation * seg.normal;
    let distance = seg.distance + normal.dot(&t.translation);
    let (extent_min, extent_max) = transform_extent(t, seg.extent_min, seg.extent_max);
    PlanarSegment {
        normal,
        distance,
        inliers: seg.inliers.clone(),
        area: seg.area,
        extent_min,
        extent_max,
        centroid: t.apply(seg.centroid),
    }
}

/// Axis-aligned box of the eight transformed corners of `(min, max)`.
pub fn transform_extent(
    t: &RigidTransform,
    min: Point3,
    max: Point3,
) -> (Point3, Point3) {
    let mut out_min = [f64::INFINITY; 3];
    let mut out_max = [f64::NEG_INFINITY; 3];
    for ix in 0..2 {
        for iy in 0..2 {
            for iz in 0..2 {
                let corner = Point3::new(
                    if ix == 0 { min.x } else { max.x },
                    if iy == 0 { min.y } else { max.y },
                    if iz == 0 { min.z } else { max.z },
                );
                let q = t.apply(corner);
                let qa: [f64; 3] = q.into();
                for a in 0..3 {
                    out_min[a] = out_min[a].min(qa[a]);
                    out_max[a] = out_max[a].max(qa[a]);
                }
            }
        }
    }
    (Point3::from(out_min), Point3::from(out_max))
}

/// A timestamped map-from-body pose.
#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    pub timestamp: f64,
    pub transform: RigidTransform,
}

impl Pose {
    pub fn new(timestamp: f64, transform: RigidTransform) -> Self {
        Self {
            timestamp,
            transform,
        }
    }

    pub fn position(&self) -> Point3 {
        Point3::from_vector(self.transform.translation)
    }
}

/// A time-ordered pose sequence with strictly increasing timestamps.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    poses: Vec<Pose>,
}

impl Trajectory {
    pub fn new() -> Self {
        Self { poses: Vec::new() }
    }

    pub fn from_poses(poses: Vec<Pose>) -> Result<Self> {
        for w in poses.windows(2) {
            if !(w[1].timestamp > w[0].timestamp) {
                return Err(Error::InvalidInput(format!(
                    "trajectory timestamps not strictly increasing: {} then {}",
                    w[0].timestamp, w[1].timestamp
                )));
            }
        }
        if let Some(p) = poses.iter().find(|p| !p.timestamp.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite timestamp {}",
                p.timestamp
            )));
        }
        Ok(Self { poses })
    }

    pub fn push(&mut self, pose: Pose) -> Result<()> {
        if let Some(last) = self.poses.last() {
            if !(pose.timestamp > last.timestamp) {
                return Err(Error::InvalidInput(format!(
                    "timestamp {} does not increase past {}",
                    pose.timestamp, last.timestamp
                )));
            }
        }
        if !pose.timestamp.is_finite() {
            return Err(Error::InvalidInput("non-finite timestamp".into()));
        }
        self.poses.push(pose);
        Ok(())
    }

    pub fn poses(&self) -> &[Pose] {
        &self.poses
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn positions(&self) -> Vec<Point3> {
        self.poses.iter().map(|p| p.position()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_2;

    fn cloud_of(points: &[[f64; 3]]) -> PointCloud {
        PointCloud::from_points(
            points.iter().map(|&p| Point3::from(p)).collect(),
            SourceTag::Laser,
        )
    }

    #[test]
    fn identity_transform_preserves_cloud() {
        let c = cloud_of(&[[1.0, 2.0, 3.0], [-4.0, 0.5, 9.0]]);
        let out = apply_transform(&RigidTransform::identity(), &c);
        assert_eq!(out, c);
    }

    #[test]
    fn pure_translation_moves_origin() {
        let t = RigidTransform::new(Matrix3::identity(), Vector3::new(1.0, 0.0, 0.0));
        let out = apply_transform(&t, &cloud_of(&[[0.0, 0.0, 0.0]]));
        assert_eq!(out.points[0], Point3::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn rotation_about_z_maps_x_to_y() {
        // Hand check: R = [[0,-1,0],[1,0,0],[0,0,1]] applied to (1,0,0).
        let t = RigidTransform::from_axis_angle(Vector3::z(), FRAC_PI_2, Vector3::zeros());
        let p = t.apply(Point3::new(1.0, 0.0, 0.0));
        assert_abs_diff_eq!(p.x, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.y, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.z, 0.0, epsilon = 1e-12);
    }

    fn square_segment() -> PlanarSegment {
        PlanarSegment {
            normal: Vector3::z(),
            distance: 0.0,
            inliers: vec![0, 1, 2, 3],
            area: 1.0,
            extent_min: Point3::new(0.0, 0.0, 0.0),
            extent_max: Point3::new(1.0, 1.0, 0.0),
            centroid: Point3::new(0.5, 0.5, 0.0),
        }
    }

    #[test]
    fn transform_plane_identity_is_noop() {
        let s = square_segment();
        let out = transform_plane(&RigidTransform::identity(), &s);
        assert_eq!(out, s);
    }

    #[test]
    fn transform_plane_offset_along_normal() {
        let s = square_segment();
        let t = RigidTransform::new(Matrix3::identity(), Vector3::new(0.0, 0.0, 2.0));
        let out = transform_plane(&t, &s);
        assert_abs_diff_eq!(out.distance, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.normal.z, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn transform_plane_rotation_about_z() {
        // Plane x = 1 rotated 90 deg about z becomes y = 1; an inlier
        // p = (1, 0.3, 0.7) maps to (-0.3, 1, 0.7) and must satisfy
        // n' . p' = d'.
        let s = PlanarSegment {
            normal: Vector3::x(),
            distance: 1.0,
            inliers: vec![0],
            area: 1.0,
            extent_min: Point3::new(1.0, -1.0, -1.0),
            extent_max: Point3::new(1.0, 1.0, 1.0),
            centroid: Point3::new(1.0, 0.0, 0.0),
        };
        let t = RigidTransform::from_axis_angle(Vector3::z(), FRAC_PI_2, Vector3::zeros());
        let out = transform_plane(&t, &s);
        assert_abs_diff_eq!(out.normal.x, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.normal.y, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.distance, 1.0, epsilon = 1e-12);
        let p = t.apply(Point3::new(1.0, 0.3, 0.7)).to_vector();
        assert_abs_diff_eq!(out.normal.dot(&p), out.distance, epsilon = 1e-12);
    }

    #[test]
    fn compose_with_inverse_is_identity() {
        let t = RigidTransform::from_axis_angle(
            Vector3::new(1.0, 2.0, -0.5),
            0.83,
            Vector3::new(4.0, -2.0, 1.5),
        );
        let id = t.compose(&t.invert());
        assert_abs_diff_eq!(id.rotation_angle(), 0.0, epsilon = 1e-9);
        assert!(id.translation.norm() < 1e-9);
        assert_eq!(id.translation_rank, 3);
        assert!(id.null_directions.is_empty());
    }

    #[test]
    fn compose_identity_left() {
        let t = RigidTransform::from_axis_angle(Vector3::y(), 0.4, Vector3::new(1.0, 2.0, 3.0));
        let out = RigidTransform::identity().compose(&t);
        assert_abs_diff_eq!(out.rotation_angle_to(&t), 0.0, epsilon = 1e-12);
        assert!((out.translation - t.translation).norm() < 1e-12);
    }

    #[test]
    fn compose_pure_translations_adds() {
        let a = RigidTransform::new(Matrix3::identity(), Vector3::new(1.0, 0.0, 0.0));
        let b = RigidTransform::new(Matrix3::identity(), Vector3::new(0.0, 2.0, 0.0));
        let out = a.compose(&b);
        assert_eq!(out.translation, Vector3::new(1.0, 2.0, 0.0));
    }

    #[test]
    fn trajectory_rejects_non_increasing_timestamps() {
        let p0 = Pose::new(0.0, RigidTransform::identity());
        let p1 = Pose::new(0.0, RigidTransform::identity());
        assert!(Trajectory::from_poses(vec![p0, p1]).is_err());
    }

    #[test]
    fn homogeneous_roundtrip() {
        let t = RigidTransform::from_axis_angle(
            Vector3::new(0.3, -1.0, 0.2),
            1.2,
            Vector3::new(-4.0, 0.25, 8.0),
        );
        let back = RigidTransform::from_homogeneous_rows(&t.to_homogeneous_rows());
        assert!(back.rotation_angle_to(&t) < 1e-12);
        assert!((back.translation - t.translation).norm() < 1e-12);
    }
}

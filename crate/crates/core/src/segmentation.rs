//! Planar segment extraction from unorganized point clouds by region
//! growing, plus plane fitting and segment area computation.
//!
//! Seeds are picked in ascending order of local curvature (from k-NN PCA).
//! A region grows through neighbors within `neighbor_radius` whose
//! estimated normals deviate at most `angle_threshold` from the current
//! plane and whose point-to-plane residual stays within
//! `distance_threshold`; the plane is refit every 50 additions. After
//! growth the plane is refit and inliers violating the distance threshold
//! are pruned until the stored parameters satisfy the segment invariants
//! exactly.

use std::collections::VecDeque;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{PlanarSegment, Point3, PointCloud};
use crate::hull::hull_area;
use crate::spatial::KdTree;

/// Neighbor count used for per-point normal and curvature estimation.
const NORMAL_NEIGHBORS: usize = 16;
/// Plane refit cadence during growth.
const REFIT_INTERVAL: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationParams {
    /// Growth neighborhood radius in meters.
    pub neighbor_radius: f64,
    /// Maximum point-to-plane residual in meters.
    pub distance_threshold: f64,
    /// Maximum deviation between a point normal and the plane normal,
    /// radians.
    pub angle_threshold: f64,
    /// Minimum inlier count per segment.
    pub min_inliers: usize,
    /// Minimum segment area in square meters.
    pub min_area: f64,
}

impl Default for SegmentationParams {
    fn default() -> Self {
        Self {
            neighbor_radius: 0.3,
            distance_threshold: 0.05,
            angle_threshold: 10f64.to_radians(),
            min_inliers: 100,
            min_area: 0.5,
        }
    }
}

impl SegmentationParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("neighbor_radius", self.neighbor_radius),
            ("distance_threshold", self.distance_threshold),
            ("angle_threshold", self.angle_threshold),
            ("min_area", self.min_area),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::InvalidParam(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.min_inliers < 3 {
            return Err(Error::InvalidParam(format!(
                "min_inliers must be >= 3, got {}",
                self.min_inliers
            )));
        }
        Ok(())
    }
}

/// Least-squares plane through a point set: unit normal and signed distance
/// with `normal . p = distance`. Requires at least 3 points.
pub fn fit_plane(points: &[Vector3<f64>]) -> Option<(Vector3<f64>, f64)> {
    if points.len() < 3 {
        return None;
    }
    let n = points.len() as f64;
    let centroid = points.iter().sum::<Vector3<f64>>() / n;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - centroid;
        cov += d * d.transpose();
    }
    let eigen = nalgebra::SymmetricEigen::new(cov);
    // smallest eigenvalue's eigenvector is the normal
    let mut min_i = 0;
    for i in 1..3 {
        if eigen.eigenvalues[i] < eigen.eigenvalues[min_i] {
            min_i = i;
        }
    }
    let normal = eigen.eigenvectors.column(min_i).into_owned();
    let norm = normal.norm();
    if norm < 1e-12 {
        return None;
    }
    let normal = normal / norm;
    Some((normal, normal.dot(&centroid)))
}

/// Flips `(normal, distance)` so the normal points toward the viewpoint.
/// Planes through the viewpoint get a deterministic sign instead.
pub fn orient_toward(
    normal: Vector3<f64>,
    distance: f64,
    viewpoint: Vector3<f64>,
) -> (Vector3<f64>, f64) {
    let side = normal.dot(&viewpoint) - distance;
    if side < -1e-12 {
        return (-normal, -distance);
    }
    if side > 1e-12 {
        return (normal, distance);
    }
    // viewpoint lies on the plane: make the largest-magnitude component positive
    let a = [normal.x.abs(), normal.y.abs(), normal.z.abs()];
    let dom = if a[0] >= a[1] && a[0] >= a[2] {
        0
    } else if a[1] >= a[2] {
        1
    } else {
        2
    };
    if normal[dom] < 0.0 {
        (-normal, -distance)
    } else {
        (normal, distance)
    }
}

/// Orthonormal in-plane basis `(e1, e2)` with `e1 x e2 = normal`.
pub fn plane_basis(normal: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let a = [normal.x.abs(), normal.y.abs(), normal.z.abs()];
    // seed with the axis least aligned with the normal
    let seed = if a[0] <= a[1] && a[0] <= a[2] {
        Vector3::x()
    } else if a[1] <= a[2] {
        Vector3::y()
    } else {
        Vector3::z()
    };
    let e1 = normal.cross(&seed).normalize();
    let e2 = normal.cross(&e1);
    (e1, e2)
}

/// Per-point normal and curvature from k-NN PCA. Points with too few
/// neighbors get `None`.
fn estimate_normals(
    points: &[Point3],
    tree: &KdTree,
) -> Vec<Option<(Vector3<f64>, f64)>> {
    let k = NORMAL_NEIGHBORS.min(points.len());
    points
        .iter()
        .map(|p| {
            let nn = tree.k_nearest(*p, k);
            if nn.len() < 3 {
                return None;
            }
            let pts: Vec<Vector3<f64>> =
                nn.iter().map(|(i, _)| points[*i].to_vector()).collect();
            let n = pts.len() as f64;
            let centroid = pts.iter().sum::<Vector3<f64>>() / n;
            let mut cov = Matrix3::zeros();
            for q in &pts {
                let d = q - centroid;
                cov += d * d.transpose();
            }
            let eigen = nalgebra::SymmetricEigen::new(cov);
            let mut order = [0usize, 1, 2];
            order.sort_by(|&a, &b| {
                eigen.eigenvalues[a]
                    .partial_cmp(&eigen.eigenvalues[b])
                    .unwrap_or(std::cmp::Ordering::Equal)
            });
            let normal = eigen.eigenvectors.column(order[0]).into_owned();
            let norm = normal.norm();
            if norm < 1e-12 {
                return None;
            }
            let total: f64 = eigen.eigenvalues.iter().sum();
            let curvature = if total > 0.0 {
                eigen.eigenvalues[order[0]] / total
            } else {
                0.0
            };
            Some((normal / norm, curvature))
        })
        .collect()
}

/// Extracts planar segments from a cloud by region growing.
///
/// Segments are disjoint, each has at least `min_inliers` points and
/// `min_area` of projected hull area, and every inlier satisfies the
/// distance threshold against the stored plane parameters. Normals are
/// oriented toward the cloud's content centroid, which stands in for the
/// viewpoint the cloud was acquired from.
pub fn segment_planes(
    cloud: &PointCloud,
    params: &SegmentationParams,
) -> Result<Vec<PlanarSegment>> {
    params.validate()?;
    if cloud.is_empty() {
        return Err(Error::InvalidInput("cannot segment an empty cloud".into()));
    }
    let points = &cloud.points;
    let n = points.len();
    let tree = KdTree::build(points);
    let normals = estimate_normals(points, &tree);

    let mut seed_order: Vec<usize> = (0..n).filter(|&i| normals[i].is_some()).collect();
    seed_order.sort_by(|&a, &b| {
        let ca = normals[a].unwrap().1;
        let cb = normals[b].unwrap().1;
        ca.partial_cmp(&cb).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });

    let cos_tol = params.angle_threshold.cos();
    let mut assigned = vec![false; n];
    let mut segments = Vec::new();

    // viewpoint for normal orientation: the content centroid. A sensor
    // origin would not be meaningful for map sections or cells, and the
    // centroid keeps orientations consistent between clouds of the same
    // scene regardless of their frame.
    let viewpoint = points.iter().map(|p| p.to_vector()).sum::<Vector3<f64>>() / n as f64;

    for &seed in &seed_order {
        if assigned[seed] {
            continue;
        }
        let (seed_normal, _) = normals[seed].unwrap();
        let mut plane_n = seed_normal;
        let mut plane_d = seed_normal.dot(&points[seed].to_vector());

        let mut members = vec![seed];
        assigned[seed] = true;
        let mut queue = VecDeque::from([seed]);
        let mut since_refit = 0usize;

        while let Some(q) = queue.pop_front() {
            for nb in tree.within_radius(points[q], params.neighbor_radius) {
                if assigned[nb] {
                    continue;
                }
                let Some((nb_normal, _)) = normals[nb] else {
                    continue;
                };
                if nb_normal.dot(&plane_n).abs() < cos_tol {
                    continue;
                }
                let residual = (plane_n.dot(&points[nb].to_vector()) - plane_d).abs();
                if residual > params.distance_threshold {
                    continue;
                }
                assigned[nb] = true;
                members.push(nb);
                queue.push_back(nb);
                since_refit += 1;
                if since_refit >= REFIT_INTERVAL {
                    since_refit = 0;
                    let pts: Vec<Vector3<f64>> =
                        members.iter().map(|&i| points[i].to_vector()).collect();
                    if let Some((nn, nd)) = fit_plane(&pts) {
                        plane_n = nn;
                        plane_d = nd;
                    }
                }
            }
        }

        // final refit with pruning until the distance invariant holds
        loop {
            if members.len() < params.min_inliers {
                members.clear();
                break;
            }
            let pts: Vec<Vector3<f64>> =
                members.iter().map(|&i| points[i].to_vector()).collect();
            let Some((nn, nd)) = fit_plane(&pts) else {
                members.clear();
                break;
            };
            plane_n = nn;
            plane_d = nd;
            let before = members.len();
            members.retain(|&i| {
                (plane_n.dot(&points[i].to_vector()) - plane_d).abs()
                    <= params.distance_threshold
            });
            if members.len() == before {
                break;
            }
        }
        // discarded clusters keep their points consumed so growth terminates
        if members.len() < params.min_inliers {
            continue;
        }

        let (normal, distance) = orient_toward(plane_n, plane_d, viewpoint);
        members.sort_unstable();
        let seg = build_segment(normal, distance, members, points);
        if seg.area < params.min_area {
            continue;
        }
        segments.push(seg);
    }
    Ok(segments)
}

fn build_segment(
    normal: Vector3<f64>,
    distance: f64,
    inliers: Vec<usize>,
    points: &[Point3],
) -> PlanarSegment {
    let mut min = [f64::INFINITY; 3];
    let mut max = [f64::NEG_INFINITY; 3];
    let mut centroid = Vector3::zeros();
    for &i in &inliers {
        let p: [f64; 3] = points[i].into();
        for a in 0..3 {
            min[a] = min[a].min(p[a]);
            max[a] = max[a].max(p[a]);
        }
        centroid += points[i].to_vector();
    }
    centroid /= inliers.len() as f64;
    let mut seg = PlanarSegment {
        normal,
        distance,
        inliers,
        area: 0.0,
        extent_min: Point3::from(min),
        extent_max: Point3::from(max),
        centroid: Point3::from_vector(centroid),
    };
    seg.area = segment_area(&seg, points);
    seg
}

/// Area of the 2D convex hull of the segment's inliers projected onto its
/// plane. Degenerate (collinear) inlier sets give zero.
pub fn segment_area(seg: &PlanarSegment, points: &[Point3]) -> f64 {
    if seg.inliers.len() < 3 {
        return 0.0;
    }
    let (e1, e2) = plane_basis(&seg.normal);
    let projected: Vec<[f64; 2]> = seg
        .inliers
        .iter()
        .map(|&i| {
            let p = points[i].to_vector();
            [e1.dot(&p), e2.dot(&p)]
        })
        .collect();
    hull_area(&projected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SourceTag;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn cloud(points: Vec<Point3>) -> PointCloud {
        PointCloud::from_points(points, SourceTag::Laser)
    }

    fn sample_rect(
        rng: &mut StdRng,
        n: usize,
        origin: [f64; 3],
        u: [f64; 3],
        v: [f64; 3],
    ) -> Vec<Point3> {
        (0..n)
            .map(|_| {
                let a = rng.random_range(0.0..1.0);
                let b = rng.random_range(0.0..1.0);
                Point3::new(
                    origin[0] + a * u[0] + b * v[0],
                    origin[1] + a * u[1] + b * v[1],
                    origin[2] + a * u[2] + b * v[2],
                )
            })
            .collect()
    }

    fn default_params() -> SegmentationParams {
        SegmentationParams {
            min_inliers: 50,
            min_area: 0.2,
            ..SegmentationParams::default()
        }
    }

    #[test]
    fn single_perfect_plane() {
        let mut rng = StdRng::seed_from_u64(17);
        // z = 0 square, 2 m x 2 m, offset from the origin so orientation is
        // well defined
        let pts = sample_rect(
            &mut rng,
            10_000,
            [-1.0, -1.0, -2.0],
            [2.0, 0.0, 0.0],
            [0.0, 2.0, 0.0],
        );
        let segs = segment_planes(&cloud(pts), &default_params()).unwrap();
        assert_eq!(segs.len(), 1);
        let s = &segs[0];
        assert!((s.normal.z.abs() - 1.0).abs() < 1e-9);
        assert!((s.distance.abs() - 2.0).abs() < 1e-9);
        assert!((s.normal.norm() - 1.0).abs() < 1e-9);
        // single plane: the viewpoint lies on it, so the deterministic sign
        // rule applies (largest normal component positive)
        assert!(s.normal.z > 0.0);
        assert!((s.distance + 2.0).abs() < 1e-9);
    }

    #[test]
    fn box_corner_gives_three_orthogonal_segments() {
        let mut rng = StdRng::seed_from_u64(23);
        let mut pts = Vec::new();
        // three 1 m^2 faces meeting at (2,2,2), sensor at origin
        pts.extend(sample_rect(
            &mut rng,
            3000,
            [2.0, 2.0, 2.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
        )); // x = 2 face
        pts.extend(sample_rect(
            &mut rng,
            3000,
            [2.0, 2.0, 2.0],
            [1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0],
        )); // y = 2 face
        pts.extend(sample_rect(
            &mut rng,
            3000,
            [2.0, 2.0, 2.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
        )); // z = 2 face
        // tight thresholds: points from a neighboring face would bias the
        // noiseless fits
        let params = SegmentationParams {
            distance_threshold: 0.015,
            angle_threshold: 5f64.to_radians(),
            min_inliers: 50,
            min_area: 0.2,
            ..SegmentationParams::default()
        };
        let segs = segment_planes(&cloud(pts), &params).unwrap();
        assert_eq!(segs.len(), 3);
        for i in 0..3 {
            for j in (i + 1)..3 {
                let dot = segs[i].normal.dot(&segs[j].normal).abs();
                // angle from 90 degrees within 1e-6 rad
                assert!(dot < 1e-6, "normals {i},{j} not orthogonal: dot={dot}");
            }
        }
    }

    #[test]
    fn empty_cloud_is_an_error() {
        let c = cloud(vec![]);
        assert!(segment_planes(&c, &default_params()).is_err());
    }

    #[test]
    fn inlier_residuals_respect_threshold_exactly() {
        let mut rng = StdRng::seed_from_u64(29);
        let mut pts = sample_rect(
            &mut rng,
            4000,
            [0.0, 0.0, -1.5],
            [3.0, 0.0, 0.0],
            [0.0, 2.0, 0.0],
        );
        // add noise
        for p in &mut pts {
            p.z += rng.random_range(-0.04..0.04);
        }
        let params = default_params();
        let segs = segment_planes(&cloud(pts.clone()), &params).unwrap();
        assert!(!segs.is_empty());
        for s in &segs {
            for &i in &s.inliers {
                let r = (s.normal.dot(&pts[i].to_vector()) - s.distance).abs();
                assert!(r <= params.distance_threshold);
            }
        }
    }

    #[test]
    fn segments_are_disjoint() {
        let mut rng = StdRng::seed_from_u64(31);
        let mut pts = sample_rect(
            &mut rng,
            2500,
            [0.0, 0.0, 1.0],
            [2.0, 0.0, 0.0],
            [0.0, 2.0, 0.0],
        );
        pts.extend(sample_rect(
            &mut rng,
            2500,
            [0.0, 0.0, 1.0],
            [0.0, 2.0, 0.0],
            [0.0, 0.0, 2.0],
        ));
        let segs = segment_planes(&cloud(pts), &default_params()).unwrap();
        let mut seen = std::collections::HashSet::new();
        for s in &segs {
            for &i in &s.inliers {
                assert!(seen.insert(i), "inlier {i} in two segments");
            }
        }
    }

    #[test]
    fn rotation_covariance_of_normals() {
        use crate::geometry::{apply_transform, RigidTransform};
        let mut rng = StdRng::seed_from_u64(37);
        // two disjoint rects so segment identity is unambiguous
        let mut pts = sample_rect(
            &mut rng,
            2000,
            [0.5, -1.0, 1.0],
            [2.0, 0.0, 0.0],
            [0.0, 2.0, 0.0],
        );
        pts.extend(sample_rect(
            &mut rng,
            2000,
            [4.0, -1.0, 2.0],
            [0.0, 0.0, 2.0],
            [0.0, 2.0, 0.0],
        ));
        let c = cloud(pts);
        let r = RigidTransform::from_axis_angle(
            Vector3::new(0.2, 1.0, -0.4),
            0.7,
            Vector3::zeros(),
        );
        let base = segment_planes(&c, &default_params()).unwrap();
        let rotated = segment_planes(&apply_transform(&r, &c), &default_params()).unwrap();
        assert_eq!(base.len(), rotated.len());
        assert!(base.len() >= 2);
        // segment extraction order may change under rotation; match each
        // base segment to the closest rotated normal
        for b in &base {
            let expect = r.rotation * b.normal;
            let best = rotated
                .iter()
                .map(|t| expect.dot(&t.normal).abs().clamp(-1.0, 1.0).acos())
                .fold(f64::INFINITY, f64::min);
            assert!(best < 1e-3, "normal rotated off by {best} rad");
        }
    }

    #[test]
    fn area_unit_square_from_corners() {
        let pts = vec![
            Point3::new(0.0, 0.0, 1.0),
            Point3::new(1.0, 0.0, 1.0),
            Point3::new(1.0, 1.0, 1.0),
            Point3::new(0.0, 1.0, 1.0),
        ];
        let seg = build_segment(Vector3::z(), 1.0, vec![0, 1, 2, 3], &pts);
        assert!((seg.area - 1.0).abs() < 1e-12);
    }

    #[test]
    fn area_collinear_is_zero() {
        let pts = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(2.0, 0.0, 0.0),
        ];
        let seg = build_segment(Vector3::z(), 0.0, vec![0, 1, 2], &pts);
        assert_eq!(seg.area, 0.0);
    }

    #[test]
    fn area_of_sampled_rectangle_bounds() {
        let mut rng = StdRng::seed_from_u64(41);
        let pts = sample_rect(
            &mut rng,
            1000,
            [0.0, 0.0, 0.5],
            [2.0, 0.0, 0.0],
            [0.0, 3.0, 0.0],
        );
        let inliers: Vec<usize> = (0..pts.len()).collect();
        let seg = build_segment(Vector3::z(), 0.5, inliers, &pts);
        assert!(seg.area <= 6.0 && seg.area >= 5.5, "area {}", seg.area);
    }

    #[test]
    fn area_is_rigid_invariant() {
        use crate::geometry::RigidTransform;
        let mut rng = StdRng::seed_from_u64(43);
        let pts = sample_rect(
            &mut rng,
            500,
            [0.0, 0.0, 0.5],
            [1.5, 0.0, 0.0],
            [0.0, 2.0, 0.0],
        );
        let inliers: Vec<usize> = (0..pts.len()).collect();
        let seg = build_segment(Vector3::z(), 0.5, inliers.clone(), &pts);
        let t = RigidTransform::from_axis_angle(
            Vector3::new(1.0, -0.3, 0.7),
            1.1,
            Vector3::new(4.0, 5.0, -1.0),
        );
        let moved: Vec<Point3> = pts.iter().map(|&p| t.apply(p)).collect();
        let n2 = t.rotation * Vector3::z();
        let d2 = 0.5 + n2.dot(&t.translation);
        let seg2 = build_segment(n2, d2, inliers, &moved);
        assert!(
            ((seg2.area - seg.area) / seg.area).abs() < 1e-6,
            "area changed: {} vs {}",
            seg.area,
            seg2.area
        );
    }

    #[test]
    fn fit_plane_commutes_with_transform() {
        use crate::geometry::{transform_plane, RigidTransform};
        let mut rng = StdRng::seed_from_u64(47);
        let pts: Vec<Vector3<f64>> = (0..100)
            .map(|_| {
                Vector3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    0.25 * rng.random_range(-1.0..1.0) * 0.0,
                ) + Vector3::new(0.3, -0.2, 1.7)
            })
            .collect();
        let (n0, d0) = fit_plane(&pts).unwrap();
        let t = RigidTransform::from_axis_angle(
            Vector3::new(0.5, 0.5, -1.0),
            0.9,
            Vector3::new(1.0, 2.0, 3.0),
        );
        let moved: Vec<Vector3<f64>> = pts.iter().map(|p| t.rotation * p + t.translation).collect();
        let (n1, d1) = fit_plane(&moved).unwrap();
        let seg = PlanarSegment {
            normal: n0,
            distance: d0,
            inliers: vec![],
            area: 0.0,
            extent_min: Point3::new(0.0, 0.0, 0.0),
            extent_max: Point3::new(0.0, 0.0, 0.0),
            centroid: Point3::new(0.0, 0.0, 0.0),
        };
        let mapped = transform_plane(&t, &seg);
        // sign of the fit is arbitrary: compare up to simultaneous flip
        let (n1, d1) = if mapped.normal.dot(&n1) < 0.0 {
            (-n1, -d1)
        } else {
            (n1, d1)
        };
        assert!((mapped.normal - n1).norm() < 1e-6);
        assert!((mapped.distance - d1).abs() < 1e-6);
    }
}

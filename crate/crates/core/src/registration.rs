//! Plane-correspondence registration: overlap verification, greedy
//! matching, closed-form rotation from corresponding normals, rank-aware
//! translation from the plane-distance system `N t = d`, and point-level
//! ICP refinement.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{transform_plane, PlanarSegment, PointCloud, RigidTransform};
use crate::segmentation::{segment_planes, SegmentationParams};
use crate::spatial::KdTree;

/// Relative singular-value cutoff for the translation rank decision.
pub const DEFAULT_RANK_TOL: f64 = 1e-3;

/// Tolerances for the plane correspondence search.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchParams {
    /// Maximum angle between (hint-transformed) source and target normals,
    /// radians.
    pub angle_tol: f64,
    /// Maximum difference of plane distances, meters.
    pub distance_tol: f64,
    /// Minimum area ratio min(a1,a2)/max(a1,a2) in (0, 1].
    pub area_ratio_tol: f64,
    /// Extent tolerance for the overlap test, meters.
    pub overlap_epsilon: f64,
}

impl Default for MatchParams {
    fn default() -> Self {
        Self {
            angle_tol: 15f64.to_radians(),
            distance_tol: 2.0,
            area_ratio_tol: 0.25,
            overlap_epsilon: 0.5,
        }
    }
}

impl MatchParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("angle_tol", self.angle_tol),
            ("distance_tol", self.distance_tol),
            ("overlap_epsilon", self.overlap_epsilon),
        ] {
            if !(v > 0.0) {
                return Err(Error::InvalidParam(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(self.area_ratio_tol > 0.0 && self.area_ratio_tol <= 1.0) {
            return Err(Error::InvalidParam(format!(
                "area_ratio_tol must be in (0,1], got {}",
                self.area_ratio_tol
            )));
        }
        Ok(())
    }
}

/// One-to-one pairing of source segments to target segments.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorrespondenceSet {
    /// `(source index, target index)` pairs.
    pub pairs: Vec<(usize, usize)>,
}

impl CorrespondenceSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Outcome of a plane-based registration.
#[derive(Debug, Clone)]
pub struct RegistrationResult {
    /// Maps the source frame into the target frame.
    pub transform: RigidTransform,
    pub correspondences: CorrespondenceSet,
    /// Value of the rotation objective `1/2 sum ||R n_d - n_m||^2` at the
    /// optimum.
    pub rotation_residual: f64,
    /// `||N t - d||` of the translation system.
    pub translation_residual: f64,
    /// True when no correspondences were found; the transform is then the
    /// identity.
    pub failed: bool,
}

impl RegistrationResult {
    fn failure() -> Self {
        Self {
            transform: RigidTransform::identity(),
            correspondences: CorrespondenceSet::default(),
            rotation_residual: 0.0,
            translation_residual: 0.0,
            failed: true,
        }
    }
}

/// Extent-overlap test between a source segment (transformed by `t` first)
/// and a target segment.
///
/// The boxes overlap when `min_m < max_d + eps` and `min_d < max_m + eps`
/// hold componentwise; the component along the target plane's dominant
/// normal axis is skipped.
pub fn check_overlap(
    source: &PlanarSegment,
    target: &PlanarSegment,
    t: &RigidTransform,
    epsilon: f64,
) -> bool {
    let moved = transform_plane(t, source);
    let skip = target.dominant_axis();
    let d_min: [f64; 3] = moved.extent_min.into();
    let d_max: [f64; 3] = moved.extent_max.into();
    let m_min: [f64; 3] = target.extent_min.into();
    let m_max: [f64; 3] = target.extent_max.into();
    for axis in 0..3 {
        if axis == skip {
            continue;
        }
        if !(m_min[axis] < d_max[axis] + epsilon && d_min[axis] < m_max[axis] + epsilon) {
            return false;
        }
    }
    true
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    score: f64,
    src_area: f64,
    src: usize,
    tgt: usize,
}

/// Re-orients plane parameters toward a viewpoint (flips the sign so the
/// viewpoint lies on the positive side).
fn orient_pair(normal: Vector3<f64>, distance: f64, viewpoint: Vector3<f64>) -> (Vector3<f64>, f64) {
    crate::segmentation::orient_toward(normal, distance, viewpoint)
}

/// Greedy one-to-one matching of source to target segments.
///
/// Plane orientations of both clouds are normalized toward a common
/// viewpoint (the source viewpoint mapped by the hint) before comparison,
/// so stored per-cloud orientation conventions never have to agree across
/// frames. Candidates must then agree in normal direction, plane distance
/// and area ratio; they are ranked by a combined similarity score. The
/// transform estimated from the tentative matches is applied to every
/// source segment and pairs failing the extent-overlap test are dropped.
pub fn match_planes(
    source: &[PlanarSegment],
    target: &[PlanarSegment],
    params: &MatchParams,
    hint: &RigidTransform,
    source_viewpoint: Vector3<f64>,
) -> CorrespondenceSet {
    let target_viewpoint = hint.apply_vector(source_viewpoint);
    let oriented_tgt: Vec<(Vector3<f64>, f64)> = target
        .iter()
        .map(|t| orient_pair(t.normal, t.distance, target_viewpoint))
        .collect();
    let oriented_src_hinted: Vec<(Vector3<f64>, f64)> = source
        .iter()
        .map(|s| {
            let sh = transform_plane(hint, s);
            orient_pair(sh.normal, sh.distance, target_viewpoint)
        })
        .collect();

    let mut candidates = Vec::new();
    for (i, s) in source.iter().enumerate() {
        let (sn, sd) = oriented_src_hinted[i];
        for (j, t) in target.iter().enumerate() {
            let (tn, td) = oriented_tgt[j];
            let angle = sn.dot(&tn).clamp(-1.0, 1.0).acos();
            if angle > params.angle_tol {
                continue;
            }
            let dd = (sd - td).abs();
            if dd > params.distance_tol {
                continue;
            }
            let (lo, hi) = if s.area <= t.area {
                (s.area, t.area)
            } else {
                (t.area, s.area)
            };
            let ratio = if hi > 0.0 { lo / hi } else { 0.0 };
            if ratio < params.area_ratio_tol {
                continue;
            }
            let score = 0.5 * (1.0 - angle / params.angle_tol)
                + 0.3 * (1.0 - dd / params.distance_tol)
                + 0.2 * ratio;
            candidates.push(Candidate {
                score,
                src_area: s.area,
                src: i,
                tgt: j,
            });
        }
    }
    candidates.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(
                b.src_area
                    .partial_cmp(&a.src_area)
                    .unwrap_or(std::cmp::Ordering::Equal),
            )
            .then(a.src.cmp(&b.src))
            .then(a.tgt.cmp(&b.tgt))
    });

    let mut src_used = vec![false; source.len()];
    let mut tgt_used = vec![false; target.len()];
    let mut tentative = Vec::new();
    for c in &candidates {
        if src_used[c.src] || tgt_used[c.tgt] {
            continue;
        }
        src_used[c.src] = true;
        tgt_used[c.tgt] = true;
        tentative.push((c.src, c.tgt));
    }
    if tentative.is_empty() {
        return CorrespondenceSet::default();
    }

    // Estimate a transform from the tentative set and keep only pairs whose
    // extents overlap under it. Unconstrained translation directions fall
    // back to the hint.
    let (rotation, _residual, trans) = estimate_from_pairs(
        source,
        target,
        &tentative,
        hint,
        source_viewpoint,
        DEFAULT_RANK_TOL,
        Some(hint.translation),
    );
    let tentative_transform = RigidTransform::new(rotation, trans.translation);

    let pairs = tentative
        .into_iter()
        .filter(|&(i, j)| {
            check_overlap(
                &source[i],
                &target[j],
                &tentative_transform,
                params.overlap_epsilon,
            )
        })
        .collect();
    CorrespondenceSet { pairs }
}

/// Rotation and translation over explicit pairs with viewpoint-normalized
/// orientations: source planes are oriented toward the source viewpoint in
/// their own frame, target planes toward the hint-mapped viewpoint.
fn estimate_from_pairs(
    source: &[PlanarSegment],
    target: &[PlanarSegment],
    pairs: &[(usize, usize)],
    hint: &RigidTransform,
    source_viewpoint: Vector3<f64>,
    rank_tol: f64,
    external: Option<Vector3<f64>>,
) -> (Matrix3<f64>, f64, TranslationEstimate) {
    let target_viewpoint = hint.apply_vector(source_viewpoint);
    let oriented: Vec<((Vector3<f64>, f64), (Vector3<f64>, f64))> = pairs
        .iter()
        .map(|&(i, j)| {
            (
                orient_pair(source[i].normal, source[i].distance, source_viewpoint),
                orient_pair(target[j].normal, target[j].distance, target_viewpoint),
            )
        })
        .collect();
    let normal_pairs: Vec<(Vector3<f64>, Vector3<f64>)> =
        oriented.iter().map(|((sn, _), (tn, _))| (*sn, *tn)).collect();
    let rotation = rotation_from_normal_pairs(&normal_pairs);
    let residual: f64 = normal_pairs
        .iter()
        .map(|(s, t)| (rotation * s - t).norm_squared())
        .sum::<f64>()
        / 2.0;
    // rotation leaves plane distances unchanged, so the deltas use the
    // oriented source distances directly
    let rows: Vec<(Vector3<f64>, f64)> = oriented
        .iter()
        .map(|((_, sd), (tn, td))| (*tn, td - sd))
        .collect();
    let trans = solve_translation(&rows, rank_tol, external);
    (rotation, residual, trans)
}

/// Sorted (descending) singular value decomposition of a 3x3 matrix.
fn svd3_sorted(m: &Matrix3<f64>) -> (Matrix3<f64>, [f64; 3], Matrix3<f64>) {
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd requested u");
    let vt = svd.v_t.expect("svd requested v_t");
    let v = vt.transpose();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut us = Matrix3::zeros();
    let mut vs = Matrix3::zeros();
    let mut s = [0.0; 3];
    for (dst, &src) in order.iter().enumerate() {
        us.set_column(dst, &u.column(src));
        vs.set_column(dst, &v.column(src));
        s[dst] = svd.singular_values[src];
    }
    (us, s, vs)
}

/// Minimal-angle rotation taking unit vector `a` to unit vector `b`.
fn minimal_rotation(a: Vector3<f64>, b: Vector3<f64>) -> Matrix3<f64> {
    let cross = a.cross(&b);
    let sin = cross.norm();
    let cos = a.dot(&b).clamp(-1.0, 1.0);
    if sin < 1e-12 {
        if cos > 0.0 {
            return Matrix3::identity();
        }
        // antipodal: rotate pi about a deterministic axis orthogonal to a
        let (e1, _) = crate::segmentation::plane_basis(&a);
        return nalgebra::Rotation3::from_axis_angle(
            &nalgebra::Unit::new_normalize(e1),
            std::f64::consts::PI,
        )
        .into_inner();
    }
    nalgebra::Rotation3::from_axis_angle(
        &nalgebra::Unit::new_normalize(cross),
        sin.atan2(cos),
    )
    .into_inner()
}

/// Optimal rotation for pairs `(source normal, target normal)`, minimizing
/// `1/2 sum ||R n_src - n_tgt||^2`.
///
/// Solved from the SVD of the correlation matrix `sum n_tgt n_src^T` with
/// determinant correction. When all pairs span a single direction the
/// problem is degenerate and the minimal-angle rotation between the
/// principal directions is returned.
pub fn rotation_from_normal_pairs(pairs: &[(Vector3<f64>, Vector3<f64>)]) -> Matrix3<f64> {
    let mut h = Matrix3::zeros();
    for (src, tgt) in pairs {
        h += tgt * src.transpose();
    }
    let (u, s, v) = svd3_sorted(&h);
    if s[0] <= 1e-12 {
        return Matrix3::identity();
    }
    if s[1] <= 1e-9 * s[0] {
        // all normals parallel: rank-1 correlation
        return minimal_rotation(v.column(0).into_owned(), u.column(0).into_owned());
    }
    let det = (u * v.transpose()).determinant();
    let d = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, if det < 0.0 { -1.0 } else { 1.0 }));
    u * d * v.transpose()
}

/// Rotation estimate over a correspondence set; errors on an empty set.
pub fn estimate_rotation(
    source: &[PlanarSegment],
    target: &[PlanarSegment],
    corr: &CorrespondenceSet,
) -> Result<(Matrix3<f64>, f64)> {
    if corr.is_empty() {
        return Err(Error::InvalidInput(
            "rotation estimation needs a non-empty correspondence set".into(),
        ));
    }
    let pairs: Vec<(Vector3<f64>, Vector3<f64>)> = corr
        .pairs
        .iter()
        .map(|&(i, j)| (source[i].normal, target[j].normal))
        .collect();
    let r = rotation_from_normal_pairs(&pairs);
    let residual: f64 = pairs
        .iter()
        .map(|(s, t)| (r * s - t).norm_squared())
        .sum::<f64>()
        / 2.0;
    Ok((r, residual))
}

/// Rank-aware translation estimate.
#[derive(Debug, Clone)]
pub struct TranslationEstimate {
    pub translation: Vector3<f64>,
    pub rank: usize,
    pub null_directions: Vec<Vector3<f64>>,
    /// `||N t - d||` at the returned translation.
    pub residual: f64,
}

/// Solves `N t = d` where row `i` of `N` is the target normal and `d_i`
/// the plane distance difference, via SVD with an explicit rank decision.
///
/// `rank = |{sigma_i > rank_tol * sigma_max}|`; the solution is the
/// minimum-norm least-squares estimate over the observed row space. When
/// `external` (odometry) is given, its projection onto the null directions
/// fills the unobserved components.
pub fn solve_translation(
    rows: &[(Vector3<f64>, f64)],
    rank_tol: f64,
    external: Option<Vector3<f64>>,
) -> TranslationEstimate {
    let k = rows.len();
    let mut n_mat = DMatrix::zeros(k, 3);
    let mut d_vec = DVector::zeros(k);
    for (i, (normal, delta)) in rows.iter().enumerate() {
        n_mat[(i, 0)] = normal.x;
        n_mat[(i, 1)] = normal.y;
        n_mat[(i, 2)] = normal.z;
        d_vec[i] = *delta;
    }
    let svd = n_mat.clone().svd(true, true);
    let u = svd.u.expect("svd requested u");
    let vt = svd.v_t.expect("svd requested v_t");
    let cols = svd.singular_values.len();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let sigma_max = order
        .first()
        .map(|&i| svd.singular_values[i])
        .unwrap_or(0.0);
    let mut rank = 0;
    let mut translation = Vector3::zeros();
    let mut observed: Vec<Vector3<f64>> = Vec::new();
    for &i in &order {
        let sigma = svd.singular_values[i];
        if sigma_max <= 0.0 || sigma <= rank_tol * sigma_max {
            break;
        }
        let u_i = u.column(i);
        let v_i = Vector3::new(vt[(i, 0)], vt[(i, 1)], vt[(i, 2)]);
        let coeff = u_i.dot(&d_vec) / sigma;
        translation += coeff * v_i;
        observed.push(v_i);
        rank += 1;
    }

    // unobserved directions: remaining right singular vectors, completed to
    // a full orthonormal basis when fewer than 3 exist
    let mut null_directions: Vec<Vector3<f64>> = Vec::new();
    for &i in order.iter().skip(rank) {
        let v_i = Vector3::new(vt[(i, 0)], vt[(i, 1)], vt[(i, 2)]);
        if v_i.norm() > 0.5 {
            null_directions.push(v_i.normalize());
        }
    }
    complete_basis(&observed, &mut null_directions);

    if let Some(ext) = external {
        for v in &null_directions {
            translation += ext.dot(v) * v;
        }
    }

    let residual = (&n_mat * translation - d_vec).norm();
    TranslationEstimate {
        translation,
        rank,
        null_directions,
        residual,
    }
}

/// Extends `observed ++ extra` to an orthonormal basis of R^3 by
/// Gram-Schmidt over the coordinate axes, appending to `extra`.
fn complete_basis(observed: &[Vector3<f64>], extra: &mut Vec<Vector3<f64>>) {
    let axes = [Vector3::x(), Vector3::y(), Vector3::z()];
    let mut have: Vec<Vector3<f64>> = observed.iter().chain(extra.iter()).cloned().collect();
    for axis in axes {
        if have.len() >= 3 {
            break;
        }
        let mut v = axis;
        for b in &have {
            v -= b.dot(&axis) * b;
        }
        if v.norm() > 1e-8 {
            let v = v.normalize();
            have.push(v);
            extra.push(v);
        }
    }
}

/// Translation estimate over a correspondence set with the rotation already
/// decided; errors on an empty set.
pub fn estimate_translation(
    source: &[PlanarSegment],
    target: &[PlanarSegment],
    corr: &CorrespondenceSet,
    rank_tol: f64,
    external: Option<Vector3<f64>>,
) -> Result<TranslationEstimate> {
    if corr.is_empty() {
        return Err(Error::InvalidInput(
            "translation estimation needs a non-empty correspondence set".into(),
        ));
    }
    // source planes are pre-rotated; rotation leaves plane distances
    // unchanged, so the deltas use the stored source distances directly
    let rows: Vec<(Vector3<f64>, f64)> = corr
        .pairs
        .iter()
        .map(|&(i, j)| (target[j].normal, target[j].distance - source[i].distance))
        .collect();
    Ok(solve_translation(&rows, rank_tol, external))
}

/// Registers source segments onto target segments: matching, rotation,
/// rank-aware translation. Returns a flagged failure result when no
/// correspondences survive.
///
/// `source_viewpoint` is the acquisition viewpoint of the source cloud in
/// its own frame (the origin for a raw sensor scan, the estimated sensor
/// position for a scan already expressed in the map frame).
pub fn register_segments(
    source: &[PlanarSegment],
    target: &[PlanarSegment],
    params: &MatchParams,
    rank_tol: f64,
    hint: &RigidTransform,
    odometry: Option<Vector3<f64>>,
    source_viewpoint: Vector3<f64>,
) -> RegistrationResult {
    let corr = match_planes(source, target, params, hint, source_viewpoint);
    if corr.is_empty() {
        return RegistrationResult::failure();
    }
    let (rotation, rotation_residual, trans) = estimate_from_pairs(
        source,
        target,
        &corr.pairs,
        hint,
        source_viewpoint,
        rank_tol,
        odometry,
    );
    let transform = RigidTransform {
        rotation,
        translation: trans.translation,
        translation_rank: trans.rank,
        null_directions: trans.null_directions,
    };
    RegistrationResult {
        transform,
        correspondences: corr,
        rotation_residual,
        translation_residual: trans.residual,
        failed: false,
    }
}

/// Full plane-based registration of two clouds: segmentation of both,
/// matching, rotation and translation estimation. The result maps the
/// source frame into the target frame.
pub fn register(
    source: &PointCloud,
    target: &PointCloud,
    seg_params: &SegmentationParams,
    match_params: &MatchParams,
    rank_tol: f64,
    hint: &RigidTransform,
    odometry: Option<Vector3<f64>>,
) -> Result<RegistrationResult> {
    match_params.validate()?;
    if source.is_empty() || target.is_empty() {
        return Err(Error::InvalidInput(
            "registration needs two non-empty clouds".into(),
        ));
    }
    let src_segs = segment_planes(source, seg_params)?;
    let tgt_segs = segment_planes(target, seg_params)?;
    // raw sensor scans are sensor-centered: viewpoint = frame origin
    Ok(register_segments(
        &src_segs,
        &tgt_segs,
        match_params,
        rank_tol,
        hint,
        odometry,
        Vector3::zeros(),
    ))
}

/// Result of point-to-point ICP refinement.
#[derive(Debug, Clone)]
pub struct IcpResult {
    pub transform: RigidTransform,
    pub iterations: usize,
    /// Mean nearest-neighbor distance of the final pairing.
    pub mean_residual: f64,
    /// True when no point pairs were found within `max_corr_dist`; the
    /// initial transform is returned unchanged.
    pub no_overlap: bool,
}

/// Closed-form alignment of paired points minimizing
/// `sum ||R p + t - q||^2`.
pub fn align_point_pairs(pairs: &[(Vector3<f64>, Vector3<f64>)]) -> RigidTransform {
    let n = pairs.len() as f64;
    let cp: Vector3<f64> = pairs.iter().map(|(p, _)| p).sum::<Vector3<f64>>() / n;
    let cq: Vector3<f64> = pairs.iter().map(|(_, q)| q).sum::<Vector3<f64>>() / n;
    let mut h = Matrix3::zeros();
    for (p, q) in pairs {
        h += (q - cq) * (p - cp).transpose();
    }
    let (u, _s, v) = svd3_sorted(&h);
    let det = (u * v.transpose()).determinant();
    let d = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, if det < 0.0 { -1.0 } else { 1.0 }));
    let r = u * d * v.transpose();
    RigidTransform::new(r, cq - r * cp)
}

/// Iterative closest point refinement between two clouds, seeded with
/// `t_init`. Pairing uses nearest neighbors within `max_corr_dist`; the
/// returned transform never has a larger mean pairing residual than the
/// best iterate seen (including the seed).
pub fn icp_refine(
    source: &PointCloud,
    target: &PointCloud,
    t_init: &RigidTransform,
    max_iter: usize,
    max_corr_dist: f64,
) -> Result<IcpResult> {
    if source.is_empty() || target.is_empty() {
        return Err(Error::InvalidInput("icp needs two non-empty clouds".into()));
    }
    if !(max_corr_dist > 0.0) {
        return Err(Error::InvalidParam(format!(
            "max_corr_dist must be positive, got {max_corr_dist}"
        )));
    }
    let tree = KdTree::build(&target.points);
    let max_sq = max_corr_dist * max_corr_dist;

    let pair_up = |t: &RigidTransform| -> (Vec<(Vector3<f64>, Vector3<f64>)>, f64) {
        let mut pairs = Vec::new();
        let mut total = 0.0;
        for p in &source.points {
            let moved = t.apply(*p);
            if let Some((j, d_sq)) = tree.nearest(moved) {
                if d_sq <= max_sq {
                    pairs.push((p.to_vector(), target.points[j].to_vector()));
                    total += d_sq.sqrt();
                }
            }
        }
        let mean = if pairs.is_empty() {
            f64::INFINITY
        } else {
            total / pairs.len() as f64
        };
        (pairs, mean)
    };

    let (init_pairs, init_res) = pair_up(t_init);
    if init_pairs.is_empty() {
        return Ok(IcpResult {
            transform: t_init.clone(),
            iterations: 0,
            mean_residual: f64::INFINITY,
            no_overlap: true,
        });
    }

    let mut current = t_init.clone();
    let mut best = t_init.clone();
    let mut best_res = init_res;
    let mut iterations = 0;
    let mut pairs = init_pairs;
    for it in 0..max_iter {
        if pairs.len() < 3 {
            break;
        }
        let next = align_point_pairs(&pairs);
        let rot_change = next.rotation_angle_to(&current);
        let trans_change = (next.translation - current.translation).norm();
        current = next;
        iterations = it + 1;
        let (new_pairs, res) = pair_up(&current);
        if res < best_res {
            best_res = res;
            best = current.clone();
        }
        pairs = new_pairs;
        if rot_change < 1e-6 && trans_change < 1e-6 {
            break;
        }
    }
    Ok(IcpResult {
        transform: best,
        iterations,
        mean_residual: best_res,
        no_overlap: false,
    })
}

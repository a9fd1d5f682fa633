//! Trajectory accuracy metrics: relative pose error (per-step drift) and
//! absolute trajectory error (position error after closed-form rigid
//! alignment). Estimated and reference poses are associated by nearest
//! timestamp.

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::geometry::{RigidTransform, Trajectory};
use crate::registration::align_point_pairs;

/// Maximum timestamp difference for pose association, seconds.
pub const ASSOCIATION_WINDOW: f64 = 0.02;

/// Error statistics over a trajectory comparison, meters.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorStats {
    pub rmse: f64,
    pub min: f64,
    pub max: f64,
    pub per_pose: Vec<f64>,
}

impl ErrorStats {
    fn from_errors(per_pose: Vec<f64>) -> Self {
        let n = per_pose.len() as f64;
        let rmse = (per_pose.iter().map(|e| e * e).sum::<f64>() / n).sqrt();
        let min = per_pose.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = per_pose.iter().cloned().fold(0.0, f64::max);
        Self {
            rmse,
            min,
            max,
            per_pose,
        }
    }
}

/// Pairs of (est index, ref index) associated by nearest timestamp within
/// [`ASSOCIATION_WINDOW`]; each reference pose is used at most once.
pub fn associate(est: &Trajectory, reference: &Trajectory) -> Vec<(usize, usize)> {
    let mut used = vec![false; reference.len()];
    let mut out = Vec::new();
    for (i, p) in est.poses().iter().enumerate() {
        let mut best: Option<(usize, f64)> = None;
        for (j, q) in reference.poses().iter().enumerate() {
            if used[j] {
                continue;
            }
            let dt = (q.timestamp - p.timestamp).abs();
            if dt <= ASSOCIATION_WINDOW && best.map_or(true, |(_, b)| dt < b) {
                best = Some((j, dt));
            }
        }
        if let Some((j, _)) = best {
            used[j] = true;
            out.push((i, j));
        }
    }
    out
}

/// Relative pose error over steps of `delta` associated poses.
///
/// Per step `i` the error is the translation norm of
/// `(ref_i^-1 ref_{i+delta})^-1 (est_i^-1 est_{i+delta})`.
pub fn compute_rpe(est: &Trajectory, reference: &Trajectory, delta: usize) -> Result<ErrorStats> {
    if delta < 1 {
        return Err(Error::InvalidParam("rpe delta must be >= 1".into()));
    }
    let assoc = associate(est, reference);
    if assoc.len() < delta + 1 {
        return Err(Error::InvalidInput(format!(
            "rpe needs at least delta+1={} associated poses, got {}",
            delta + 1,
            assoc.len()
        )));
    }
    let mut errors = Vec::with_capacity(assoc.len() - delta);
    for w in 0..(assoc.len() - delta) {
        let (ei, ri) = assoc[w];
        let (ej, rj) = assoc[w + delta];
        let est_step = est.poses()[ei]
            .transform
            .invert()
            .compose(&est.poses()[ej].transform);
        let ref_step = reference.poses()[ri]
            .transform
            .invert()
            .compose(&reference.poses()[rj].transform);
        let residual = ref_step.invert().compose(&est_step);
        errors.push(residual.translation.norm());
    }
    Ok(ErrorStats::from_errors(errors))
}

/// Closed-form rigid alignment of the estimated positions onto the
/// reference positions.
#[derive(Debug, Clone)]
pub struct AteAlignment {
    pub transform: RigidTransform,
    /// True when the associated positions are (near) collinear; the
    /// rotation about the common line is then arbitrary but the residuals
    /// are unaffected.
    pub degenerate: bool,
}

/// Aligns `est` onto `reference` over associated positions.
pub fn align_trajectories(est: &Trajectory, reference: &Trajectory) -> Result<AteAlignment> {
    let assoc = associate(est, reference);
    if assoc.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "ate needs at least 3 associated poses, got {}",
            assoc.len()
        )));
    }
    let pairs: Vec<(Vector3<f64>, Vector3<f64>)> = assoc
        .iter()
        .map(|&(i, j)| {
            (
                est.poses()[i].position().to_vector(),
                reference.poses()[j].position().to_vector(),
            )
        })
        .collect();
    let transform = align_point_pairs(&pairs);

    // collinearity check on the centered estimate positions
    let n = pairs.len() as f64;
    let centroid: Vector3<f64> = pairs.iter().map(|(p, _)| p).sum::<Vector3<f64>>() / n;
    let mut cov = nalgebra::Matrix3::zeros();
    for (p, _) in &pairs {
        let d = p - centroid;
        cov += d * d.transpose();
    }
    let svd = cov.svd(false, false);
    let mut s: Vec<f64> = svd.singular_values.iter().cloned().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let degenerate = s[0] <= 0.0 || s[1] / s[0] < 1e-9;

    Ok(AteAlignment {
        transform,
        degenerate,
    })
}

/// Absolute trajectory error: position residuals after rigid alignment.
pub fn compute_ate(est: &Trajectory, reference: &Trajectory) -> Result<ErrorStats> {
    let alignment = align_trajectories(est, reference)?;
    let assoc = associate(est, reference);
    let errors: Vec<f64> = assoc
        .iter()
        .map(|&(i, j)| {
            let aligned = alignment
                .transform
                .apply(est.poses()[i].position())
                .to_vector();
            (reference.poses()[j].position().to_vector() - aligned).norm()
        })
        .collect();
    Ok(ErrorStats::from_errors(errors))
}

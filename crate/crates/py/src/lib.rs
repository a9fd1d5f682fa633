//! Python bindings: the core types and the registration/localization
//! operations, driven in-process.

use nalgebra::Vector3;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use planeloc_core::config::Config;
use planeloc_core::error::Error;
use planeloc_core::evaluation;
use planeloc_core::geometry::{
    apply_transform, PlanarSegment, Point3, PointCloud, Pose, RigidTransform, SourceTag,
    Trajectory,
};
use planeloc_core::io::{self, CloudFormat};
use planeloc_core::preprocess;
use planeloc_core::registration;
use planeloc_core::segmentation::{self, SegmentationParams};
use planeloc_core::synth;

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::Io(inner) => PyIOError::new_err(inner.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn parse_tag(s: &str) -> PyResult<SourceTag> {
    SourceTag::parse(s)
        .ok_or_else(|| PyValueError::new_err(format!("source must be `laser` or `vision`, got `{s}`")))
}

/// A 3D point cloud with optional per-point RGB colors.
#[pyclass(name = "PointCloud", skip_from_py_object)]
#[derive(Clone)]
struct PyPointCloud {
    inner: PointCloud,
}

#[pymethods]
impl PyPointCloud {
    #[new]
    #[pyo3(signature = (points, colors=None, source="laser"))]
    fn new(
        points: Vec<(f64, f64, f64)>,
        colors: Option<Vec<(u8, u8, u8)>>,
        source: &str,
    ) -> PyResult<Self> {
        let cloud = PointCloud {
            points: points
                .into_iter()
                .map(|(x, y, z)| Point3::new(x, y, z))
                .collect(),
            colors: colors.map(|c| c.into_iter().map(|(r, g, b)| [r, g, b]).collect()),
            source_tag: parse_tag(source)?,
        };
        cloud.validate().map_err(to_py_err)?;
        Ok(Self { inner: cloud })
    }

    fn points(&self) -> Vec<(f64, f64, f64)> {
        self.inner.points.iter().map(|p| (p.x, p.y, p.z)).collect()
    }

    fn colors(&self) -> Option<Vec<(u8, u8, u8)>> {
        self.inner
            .colors
            .as_ref()
            .map(|c| c.iter().map(|&[r, g, b]| (r, g, b)).collect())
    }

    #[getter]
    fn source(&self) -> &'static str {
        self.inner.source_tag.as_str()
    }

    fn bounds(&self) -> Option<((f64, f64, f64), (f64, f64, f64))> {
        self.inner
            .bounds()
            .map(|(lo, hi)| ((lo.x, lo.y, lo.z), (hi.x, hi.y, hi.z)))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "PointCloud({} points, {})",
            self.inner.len(),
            self.inner.source_tag.as_str()
        )
    }
}

/// A rigid transform `p' = R p + t` with translation rank annotations.
#[pyclass(name = "RigidTransform", skip_from_py_object)]
#[derive(Clone)]
struct PyRigidTransform {
    inner: RigidTransform,
}

#[pymethods]
impl PyRigidTransform {
    #[staticmethod]
    fn identity() -> Self {
        Self {
            inner: RigidTransform::identity(),
        }
    }

    #[staticmethod]
    fn from_matrix(rows: [[f64; 4]; 4]) -> Self {
        Self {
            inner: RigidTransform::from_homogeneous_rows(&rows),
        }
    }

    #[staticmethod]
    #[pyo3(signature = (axis, angle, translation=(0.0, 0.0, 0.0)))]
    fn from_axis_angle(axis: (f64, f64, f64), angle: f64, translation: (f64, f64, f64)) -> Self {
        Self {
            inner: RigidTransform::from_axis_angle(
                Vector3::new(axis.0, axis.1, axis.2),
                angle,
                Vector3::new(translation.0, translation.1, translation.2),
            ),
        }
    }

    fn matrix(&self) -> [[f64; 4]; 4] {
        self.inner.to_homogeneous_rows()
    }

    fn translation(&self) -> (f64, f64, f64) {
        let t = &self.inner.translation;
        (t.x, t.y, t.z)
    }

    #[getter]
    fn translation_rank(&self) -> usize {
        self.inner.translation_rank
    }

    fn null_directions(&self) -> Vec<(f64, f64, f64)> {
        self.inner
            .null_directions
            .iter()
            .map(|v| (v.x, v.y, v.z))
            .collect()
    }

    fn rotation_angle(&self) -> f64 {
        self.inner.rotation_angle()
    }

    fn apply(&self, p: (f64, f64, f64)) -> (f64, f64, f64) {
        let q = self.inner.apply(Point3::new(p.0, p.1, p.2));
        (q.x, q.y, q.z)
    }

    fn apply_cloud(&self, cloud: &PyPointCloud) -> PyPointCloud {
        PyPointCloud {
            inner: apply_transform(&self.inner, &cloud.inner),
        }
    }

    fn compose(&self, other: &PyRigidTransform) -> Self {
        Self {
            inner: self.inner.compose(&other.inner),
        }
    }

    fn invert(&self) -> Self {
        Self {
            inner: self.inner.invert(),
        }
    }

    fn __repr__(&self) -> String {
        let t = &self.inner.translation;
        format!(
            "RigidTransform(angle={:.4} rad, t=({:.4}, {:.4}, {:.4}), rank={})",
            self.inner.rotation_angle(),
            t.x,
            t.y,
            t.z,
            self.inner.translation_rank
        )
    }
}

/// An extracted planar segment.
#[pyclass(name = "PlanarSegment", skip_from_py_object)]
#[derive(Clone)]
struct PyPlanarSegment {
    inner: PlanarSegment,
}

#[pymethods]
impl PyPlanarSegment {
    #[getter]
    fn normal(&self) -> (f64, f64, f64) {
        let n = &self.inner.normal;
        (n.x, n.y, n.z)
    }

    #[getter]
    fn distance(&self) -> f64 {
        self.inner.distance
    }

    #[getter]
    fn area(&self) -> f64 {
        self.inner.area
    }

    #[getter]
    fn inlier_count(&self) -> usize {
        self.inner.inliers.len()
    }

    fn inliers(&self) -> Vec<usize> {
        self.inner.inliers.clone()
    }

    fn extent(&self) -> ((f64, f64, f64), (f64, f64, f64)) {
        let lo = self.inner.extent_min;
        let hi = self.inner.extent_max;
        ((lo.x, lo.y, lo.z), (hi.x, hi.y, hi.z))
    }

    fn __repr__(&self) -> String {
        let n = &self.inner.normal;
        format!(
            "PlanarSegment(n=({:.3}, {:.3}, {:.3}), d={:.3}, area={:.2}, inliers={})",
            n.x,
            n.y,
            n.z,
            self.inner.distance,
            self.inner.area,
            self.inner.inliers.len()
        )
    }
}

/// Registration outcome: transform, correspondences, residuals.
#[pyclass(name = "RegistrationResult")]
struct PyRegistrationResult {
    #[pyo3(get)]
    failed: bool,
    #[pyo3(get)]
    rotation_residual: f64,
    #[pyo3(get)]
    translation_residual: f64,
    transform: RigidTransform,
    pairs: Vec<(usize, usize)>,
}

#[pymethods]
impl PyRegistrationResult {
    #[getter]
    fn transform(&self) -> PyRigidTransform {
        PyRigidTransform {
            inner: self.transform.clone(),
        }
    }

    fn pairs(&self) -> Vec<(usize, usize)> {
        self.pairs.clone()
    }

    fn __repr__(&self) -> String {
        format!(
            "RegistrationResult(pairs={}, rank={}, failed={})",
            self.pairs.len(),
            self.transform.translation_rank,
            self.failed
        )
    }
}

#[pyfunction]
fn load_cloud(path: &str) -> PyResult<PyPointCloud> {
    Ok(PyPointCloud {
        inner: io::load_cloud(path).map_err(to_py_err)?,
    })
}

#[pyfunction]
#[pyo3(signature = (cloud, path, format="ply"))]
fn save_cloud(cloud: &PyPointCloud, path: &str, format: &str) -> PyResult<()> {
    let format = match format {
        "ply" => CloudFormat::AsciiPly,
        "xyz" => CloudFormat::Xyz,
        other => {
            return Err(PyValueError::new_err(format!(
                "format must be `ply` or `xyz`, got `{other}`"
            )))
        }
    };
    io::save_cloud(&cloud.inner, path, format).map_err(to_py_err)
}

#[pyfunction]
fn voxel_filter(cloud: &PyPointCloud, leaf: f64) -> PyResult<PyPointCloud> {
    Ok(PyPointCloud {
        inner: preprocess::voxel_filter(&cloud.inner, leaf).map_err(to_py_err)?,
    })
}

#[pyfunction]
fn outlier_filter(cloud: &PyPointCloud, k: usize, mult: f64) -> PyResult<PyPointCloud> {
    Ok(PyPointCloud {
        inner: preprocess::outlier_filter(&cloud.inner, k, mult).map_err(to_py_err)?,
    })
}

fn seg_params(
    neighbor_radius: f64,
    distance_threshold: f64,
    angle_threshold_deg: f64,
    min_inliers: usize,
    min_area: f64,
) -> SegmentationParams {
    SegmentationParams {
        neighbor_radius,
        distance_threshold,
        angle_threshold: angle_threshold_deg.to_radians(),
        min_inliers,
        min_area,
    }
}

#[pyfunction]
#[pyo3(signature = (cloud, neighbor_radius=0.3, distance_threshold=0.05,
                    angle_threshold_deg=10.0, min_inliers=100, min_area=0.5))]
fn segment_planes(
    cloud: &PyPointCloud,
    neighbor_radius: f64,
    distance_threshold: f64,
    angle_threshold_deg: f64,
    min_inliers: usize,
    min_area: f64,
) -> PyResult<Vec<PyPlanarSegment>> {
    let params = seg_params(
        neighbor_radius,
        distance_threshold,
        angle_threshold_deg,
        min_inliers,
        min_area,
    );
    Ok(segmentation::segment_planes(&cloud.inner, &params)
        .map_err(to_py_err)?
        .into_iter()
        .map(|inner| PyPlanarSegment { inner })
        .collect())
}

#[pyfunction]
#[pyo3(signature = (source, target, hint=None, odometry=None, neighbor_radius=0.3,
                    distance_threshold=0.05, angle_threshold_deg=10.0, min_inliers=100,
                    min_area=0.5))]
#[allow(clippy::too_many_arguments)]
fn register(
    source: &PyPointCloud,
    target: &PyPointCloud,
    hint: Option<&PyRigidTransform>,
    odometry: Option<(f64, f64, f64)>,
    neighbor_radius: f64,
    distance_threshold: f64,
    angle_threshold_deg: f64,
    min_inliers: usize,
    min_area: f64,
) -> PyResult<PyRegistrationResult> {
    let cfg = Config::default();
    let params = seg_params(
        neighbor_radius,
        distance_threshold,
        angle_threshold_deg,
        min_inliers,
        min_area,
    );
    let hint = hint
        .map(|h| h.inner.clone())
        .unwrap_or_else(RigidTransform::identity);
    let odometry = odometry.map(|(x, y, z)| Vector3::new(x, y, z));
    let res = registration::register(
        &source.inner,
        &target.inner,
        &params,
        &cfg.matching,
        cfg.rank_tol,
        &hint,
        odometry,
    )
    .map_err(to_py_err)?;
    Ok(PyRegistrationResult {
        failed: res.failed,
        rotation_residual: res.rotation_residual,
        translation_residual: res.translation_residual,
        transform: res.transform,
        pairs: res.correspondences.pairs,
    })
}

#[pyfunction]
#[pyo3(signature = (source, target, init=None, max_iter=50, max_corr_dist=0.5))]
fn icp_refine(
    source: &PyPointCloud,
    target: &PyPointCloud,
    init: Option<&PyRigidTransform>,
    max_iter: usize,
    max_corr_dist: f64,
) -> PyResult<PyRigidTransform> {
    let init = init
        .map(|t| t.inner.clone())
        .unwrap_or_else(RigidTransform::identity);
    let res = registration::icp_refine(&source.inner, &target.inner, &init, max_iter, max_corr_dist)
        .map_err(to_py_err)?;
    Ok(PyRigidTransform {
        inner: res.transform,
    })
}

/// Rows are `(timestamp, tx, ty, tz, qx, qy, qz, qw)`.
fn trajectory_from_rows(rows: Vec<[f64; 8]>) -> PyResult<Trajectory> {
    let mut poses = Vec::with_capacity(rows.len());
    for r in rows {
        let quat = nalgebra::Quaternion::new(r[7], r[4], r[5], r[6]);
        if quat.norm() < 1e-9 {
            return Err(PyValueError::new_err("zero-norm quaternion in trajectory"));
        }
        let rotation = nalgebra::UnitQuaternion::from_quaternion(quat);
        poses.push(Pose::new(
            r[0],
            RigidTransform::from_quaternion(rotation, Vector3::new(r[1], r[2], r[3])),
        ));
    }
    Trajectory::from_poses(poses).map_err(to_py_err)
}

#[pyfunction]
#[pyo3(signature = (est, reference, delta=1))]
fn compute_rpe(
    est: Vec<[f64; 8]>,
    reference: Vec<[f64; 8]>,
    delta: usize,
) -> PyResult<(f64, f64, f64)> {
    let stats = evaluation::compute_rpe(
        &trajectory_from_rows(est)?,
        &trajectory_from_rows(reference)?,
        delta,
    )
    .map_err(to_py_err)?;
    Ok((stats.rmse, stats.min, stats.max))
}

#[pyfunction]
fn compute_ate(est: Vec<[f64; 8]>, reference: Vec<[f64; 8]>) -> PyResult<(f64, f64, f64)> {
    let stats = evaluation::compute_ate(
        &trajectory_from_rows(est)?,
        &trajectory_from_rows(reference)?,
    )
    .map_err(to_py_err)?;
    Ok((stats.rmse, stats.min, stats.max))
}

#[pyfunction]
fn estimate_scale(vision: Vec<[f64; 8]>, gps: Vec<[f64; 8]>) -> PyResult<f64> {
    preprocess::estimate_scale(&trajectory_from_rows(vision)?, &trajectory_from_rows(gps)?)
        .map_err(to_py_err)
}

#[pyfunction]
fn scale_cloud(cloud: &PyPointCloud, s: f64) -> PyResult<PyPointCloud> {
    Ok(PyPointCloud {
        inner: preprocess::scale_cloud(&cloud.inner, s).map_err(to_py_err)?,
    })
}

/// Renders the synthetic closed-room scene (six faces) for quick tests.
#[pyfunction]
#[pyo3(signature = (noise=0.01, seed=42, sensor="laser", density=150.0))]
fn synth_room(noise: f64, seed: u64, sensor: &str, density: f64) -> PyResult<PyPointCloud> {
    let model = match parse_tag(sensor)? {
        SourceTag::Laser => synth::SensorModel::laser(),
        SourceTag::Vision => synth::SensorModel::vision(),
    };
    let spec = synth::SceneSpec {
        rects: synth::room_rects(density),
        noise_sigma: noise,
        sensor: model,
    };
    Ok(PyPointCloud {
        inner: synth::render_scan(&spec, &RigidTransform::identity(), seed).map_err(to_py_err)?,
    })
}

#[pymodule]
fn planeloc_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPointCloud>()?;
    m.add_class::<PyRigidTransform>()?;
    m.add_class::<PyPlanarSegment>()?;
    m.add_class::<PyRegistrationResult>()?;
    m.add_function(wrap_pyfunction!(load_cloud, m)?)?;
    m.add_function(wrap_pyfunction!(save_cloud, m)?)?;
    m.add_function(wrap_pyfunction!(voxel_filter, m)?)?;
    m.add_function(wrap_pyfunction!(outlier_filter, m)?)?;
    m.add_function(wrap_pyfunction!(segment_planes, m)?)?;
    m.add_function(wrap_pyfunction!(register, m)?)?;
    m.add_function(wrap_pyfunction!(icp_refine, m)?)?;
    m.add_function(wrap_pyfunction!(compute_rpe, m)?)?;
    m.add_function(wrap_pyfunction!(compute_ate, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_scale, m)?)?;
    m.add_function(wrap_pyfunction!(scale_cloud, m)?)?;
    m.add_function(wrap_pyfunction!(synth_room, m)?)?;
    Ok(())
}

//! Synthetic scene generation for desk-scale verification: axis-aligned
//! surface primitives sampled under laser-like or vision-like sensor
//! models, with deterministic seeding.
//!
//! Laser-like sampling applies radial point dropout and additive
//! along-normal noise; vision-like sampling applies texture-weighted
//! density and multiplicative (range-proportional) depth noise, and
//! synthesizes per-point colors.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud, Pose, RigidTransform, SourceTag, Trajectory};

/// A sampled surface patch: `origin + a*edge_u + b*edge_v`, `a,b` in [0,1].
#[derive(Debug, Clone)]
pub struct Rect {
    pub origin: Point3,
    pub edge_u: Vector3<f64>,
    pub edge_v: Vector3<f64>,
    /// Sampling density, points per square meter.
    pub density: f64,
}

impl Rect {
    pub fn area(&self) -> f64 {
        self.edge_u.cross(&self.edge_v).norm()
    }

    pub fn normal(&self) -> Vector3<f64> {
        self.edge_u.cross(&self.edge_v).normalize()
    }
}

/// Sensor model applied during sampling.
#[derive(Debug, Clone, Copy)]
pub enum SensorModel {
    /// Radial dropout `min(1, (ref_range/r)^2)`, hard cutoff at
    /// `max_range`, additive along-normal noise.
    LaserLike { max_range: f64, ref_range: f64 },
    /// Texture-weighted density and multiplicative depth noise growing
    /// with range; emits per-point colors.
    VisionLike { ref_range: f64 },
}

impl SensorModel {
    pub fn laser() -> Self {
        SensorModel::LaserLike {
            max_range: 10.0,
            ref_range: 5.0,
        }
    }

    pub fn vision() -> Self {
        SensorModel::VisionLike { ref_range: 5.0 }
    }

    pub fn tag(&self) -> SourceTag {
        match self {
            SensorModel::LaserLike { .. } => SourceTag::Laser,
            SensorModel::VisionLike { .. } => SourceTag::Vision,
        }
    }
}

/// A synthetic scene: surface patches, noise level and sensor model.
#[derive(Debug, Clone)]
pub struct SceneSpec {
    pub rects: Vec<Rect>,
    /// Noise sigma in meters (along-normal for laser, depth at the
    /// reference range for vision).
    pub noise_sigma: f64,
    pub sensor: SensorModel,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.rects.is_empty() {
            return Err(Error::InvalidParam("scene has no primitives".into()));
        }
        for r in &self.rects {
            if !(r.density > 0.0) {
                return Err(Error::InvalidParam(format!(
                    "rect density must be positive, got {}",
                    r.density
                )));
            }
        }
        if self.noise_sigma < 0.0 {
            return Err(Error::InvalidParam(format!(
                "noise sigma must be >= 0, got {}",
                self.noise_sigma
            )));
        }
        Ok(())
    }
}

/// The six faces of an axis-aligned box shell.
pub fn box_shell(min: Point3, max: Point3, density: f64) -> Vec<Rect> {
    let dx = Vector3::new(max.x - min.x, 0.0, 0.0);
    let dy = Vector3::new(0.0, max.y - min.y, 0.0);
    let dz = Vector3::new(0.0, 0.0, max.z - min.z);
    let lo = min;
    let hi_z = Point3::new(min.x, min.y, max.z);
    let hi_y = Point3::new(min.x, max.y, min.z);
    let hi_x = Point3::new(max.x, min.y, min.z);
    vec![
        Rect { origin: lo, edge_u: dx, edge_v: dy, density },   // floor
        Rect { origin: hi_z, edge_u: dx, edge_v: dy, density }, // ceiling
        Rect { origin: lo, edge_u: dy, edge_v: dz, density },   // x = min
        Rect { origin: hi_x, edge_u: dy, edge_v: dz, density }, // x = max
        Rect { origin: lo, edge_u: dx, edge_v: dz, density },   // y = min
        Rect { origin: hi_y, edge_u: dx, edge_v: dz, density }, // y = max
    ]
}

/// Four walls of a room footprint (no floor or ceiling).
pub fn walls(min: Point3, max: Point3, density: f64) -> Vec<Rect> {
    box_shell(min, max, density)[2..].to_vec()
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.random_range(f64::EPSILON..1.0);
    let u2: f64 = rng.random_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Pseudo-texture weight in [0.3, 1.0], a deterministic patchy function of
/// the surface coordinates.
fn texture_weight(su: f64, sv: f64) -> f64 {
    0.3 + 0.7 * (0.5 + 0.5 * (2.1 * su + 0.7).sin() * (1.7 * sv + 1.9).cos())
}

/// Renders a scan of the scene as seen from `sensor_pose` (map-from-body);
/// the returned cloud is in the sensor (body) frame. Deterministic for a
/// fixed seed.
pub fn render_scan(
    spec: &SceneSpec,
    sensor_pose: &RigidTransform,
    seed: u64,
) -> Result<PointCloud> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sensor_pos = sensor_pose.translation;
    let inverse = sensor_pose.invert();

    let mut points = Vec::new();
    let mut colors = Vec::new();
    let is_vision = matches!(spec.sensor, SensorModel::VisionLike { .. });

    for rect in &spec.rects {
        let count = (rect.area() * rect.density).round() as usize;
        let normal = rect.normal();
        let len_u = rect.edge_u.norm();
        let len_v = rect.edge_v.norm();
        for _ in 0..count {
            let a: f64 = rng.random_range(0.0..1.0);
            let b: f64 = rng.random_range(0.0..1.0);
            // one gaussian draw per sample keeps the stream aligned across
            // sensor models
            let noise = gaussian(&mut rng);
            let keep: f64 = rng.random_range(0.0..1.0);
            let world =
                rect.origin.to_vector() + a * rect.edge_u + b * rect.edge_v;
            let offset = world - sensor_pos;
            let range = offset.norm();

            let sampled = match spec.sensor {
                SensorModel::LaserLike {
                    max_range,
                    ref_range,
                } => {
                    if range > max_range {
                        continue;
                    }
                    let p_keep = (ref_range / range.max(1e-6)).powi(2).min(1.0);
                    if keep > p_keep {
                        continue;
                    }
                    world + normal * (spec.noise_sigma * noise)
                }
                SensorModel::VisionLike { ref_range } => {
                    if keep > texture_weight(a * len_u, b * len_v) {
                        continue;
                    }
                    if range < 1e-6 {
                        continue;
                    }
                    let dir = offset / range;
                    let depth_sigma = spec.noise_sigma * range / ref_range;
                    sensor_pos + dir * (range + depth_sigma * noise)
                }
            };
            points.push(Point3::from_vector(inverse.apply_vector(sampled)));
            if is_vision {
                let t = texture_weight(a * len_u, b * len_v);
                let h = ((world.z * 60.0) as i64).rem_euclid(160) as u8;
                colors.push([
                    (60.0 + 150.0 * t) as u8,
                    80u8.saturating_add(h),
                    (200.0 - 120.0 * t) as u8,
                ]);
            }
        }
    }
    Ok(PointCloud {
        points,
        colors: is_vision.then_some(colors),
        source_tag: spec.sensor.tag(),
    })
}

/// Renders a sequence of scans along a trajectory; the per-scan seed is
/// derived from `seed` and the pose index so each scan has an independent
/// sampling pattern.
pub fn render_sequence(
    spec: &SceneSpec,
    trajectory: &Trajectory,
    seed: u64,
) -> Result<Vec<PointCloud>> {
    trajectory
        .poses()
        .iter()
        .enumerate()
        .map(|(i, pose)| render_scan(spec, &pose.transform, seed.wrapping_add(1 + i as u64)))
        .collect()
}

// ---------------------------------------------------------------------------
// scene presets

/// A closed 4 x 5 x 3 m room around the origin: exactly six faces.
pub fn room_rects(density: f64) -> Vec<Rect> {
    box_shell(
        Point3::new(-2.0, -2.5, -1.5),
        Point3::new(2.0, 2.5, 1.5),
        density,
    )
}

/// Two adjoining rooms of different size plus a shared floor, used for
/// tracking sequences. Spans roughly 11 x 5 x 3 m; floor at z = 0.
pub fn two_room_rects(density: f64) -> Vec<Rect> {
    let mut rects = vec![Rect {
        origin: Point3::new(0.0, 0.0, 0.0),
        edge_u: Vector3::new(11.0, 0.0, 0.0),
        edge_v: Vector3::new(0.0, 5.0, 0.0),
        density,
    }];
    // room A: 5 x 4, shares the x = 5 wall with room B
    rects.extend(walls(
        Point3::new(0.0, 0.0, 0.0),
        Point3::new(5.0, 4.0, 3.0),
        density,
    ));
    // room B: 6 x 5
    rects.extend(walls(
        Point3::new(5.0, 0.0, 0.0),
        Point3::new(11.0, 5.0, 3.0),
        density,
    ));
    rects
}

/// A corridor: two long parallel walls and a floor. Planes constrain only
/// the cross axis and height; motion along the corridor is unobservable.
pub fn corridor_rects(density: f64) -> Vec<Rect> {
    vec![
        Rect {
            origin: Point3::new(0.0, -1.0, 0.0),
            edge_u: Vector3::new(20.0, 0.0, 0.0),
            edge_v: Vector3::new(0.0, 0.0, 2.5),
            density,
        },
        Rect {
            origin: Point3::new(0.0, 1.0, 0.0),
            edge_u: Vector3::new(20.0, 0.0, 0.0),
            edge_v: Vector3::new(0.0, 0.0, 2.5),
            density,
        },
        Rect {
            origin: Point3::new(0.0, -1.0, 0.0),
            edge_u: Vector3::new(20.0, 0.0, 0.0),
            edge_v: Vector3::new(0.0, 2.0, 0.0),
            density,
        },
    ]
}

/// Room walls plus two free-standing feature walls.
///
/// The feature walls sit at in-plane offsets the room walls never reach,
/// so a sliding (mirror) placement of the room cannot match them and the
/// cell search can tell the true placement from partial self-overlaps.
pub fn room_cluster_rects(density: f64, center: [f64; 2]) -> Vec<Rect> {
    let (cx, cy) = (center[0], center[1]);
    let mut rects = walls(
        Point3::new(cx - 3.0, cy - 2.0, 0.0),
        Point3::new(cx + 3.0, cy + 2.0, 2.5),
        density,
    );
    // y-normal feature wall north-east of the room
    rects.push(Rect {
        origin: Point3::new(cx + 4.5, cy + 5.5, 0.0),
        edge_u: Vector3::new(2.0, 0.0, 0.0),
        edge_v: Vector3::new(0.0, 0.0, 2.2),
        density,
    });
    // x-normal feature wall west of the room
    rects.push(Rect {
        origin: Point3::new(cx - 6.5, cy + 3.5, 0.0),
        edge_u: Vector3::new(0.0, 2.0, 0.0),
        edge_v: Vector3::new(0.0, 0.0, 2.2),
        density,
    });
    rects
}

/// A 40 x 40 m ground plane with one unique room cluster at `center`.
pub fn unique_map_rects(density: f64, center: [f64; 2]) -> Vec<Rect> {
    let mut rects = vec![Rect {
        origin: Point3::new(-20.0, -20.0, 0.0),
        edge_u: Vector3::new(40.0, 0.0, 0.0),
        edge_v: Vector3::new(0.0, 40.0, 0.0),
        density: density * 0.5,
    }];
    rects.extend(room_cluster_rects(density, center));
    rects
}

/// A 40 x 40 m ground plane with two identical room clusters.
pub fn twin_map_rects(density: f64) -> Vec<Rect> {
    let mut rects = vec![Rect {
        origin: Point3::new(-20.0, -20.0, 0.0),
        edge_u: Vector3::new(40.0, 0.0, 0.0),
        edge_v: Vector3::new(0.0, 40.0, 0.0),
        density: density * 0.5,
    }];
    for cx in [-10.0, 10.0] {
        rects.extend(room_cluster_rects(density, [cx, 0.0]));
    }
    rects
}

/// A straight-line trajectory of `n` poses with per-step yaw, starting at
/// `start`, stepping by `step`.
pub fn line_trajectory(
    start: Vector3<f64>,
    step: Vector3<f64>,
    yaw_step: f64,
    n: usize,
) -> Trajectory {
    let mut poses = Vec::with_capacity(n);
    for i in 0..n {
        let t = RigidTransform::from_axis_angle(
            Vector3::z(),
            yaw_step * i as f64,
            start + step * i as f64,
        );
        poses.push(Pose::new(i as f64, t));
    }
    Trajectory::from_poses(poses).expect("strictly increasing synthetic timestamps")
}

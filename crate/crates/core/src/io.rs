//! File ingestion and emission: ASCII PLY and XYZ point clouds, trajectory
//! files (`timestamp tx ty tz qx qy qz qw`), 4x4 transform files and plain
//! segment listings.
//!
//! All floating output is printed with 7 significant digits, which defines
//! the round-trip tolerance of the formats.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, UnitQuaternion, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{
    PlanarSegment, Point3, PointCloud, Pose, RigidTransform, SourceTag, Trajectory,
};

/// Supported point cloud file formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    AsciiPly,
    Xyz,
}

/// Metadata of a parsed cloud file.
#[derive(Debug, Clone)]
pub struct CloudFile {
    pub path: PathBuf,
    pub format: CloudFormat,
    pub point_count: usize,
}

/// Formats a float with 7 significant digits in plain decimal notation,
/// always keeping at least one digit after the point.
pub fn format_g7(v: f64) -> String {
    if v == 0.0 {
        return "0.0".to_string();
    }
    let exp = v.abs().log10().floor() as i32;
    let decimals = (6 - exp).clamp(1, 17) as usize;
    let mut s = format!("{:.*}", decimals, v);
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.push('0');
        }
    }
    s
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

fn parse_float(path: &Path, line: usize, tok: &str, what: &str) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| parse_err(path, line, format!("invalid {what} `{tok}`")))?;
    if !v.is_finite() {
        return Err(parse_err(path, line, format!("non-finite {what} `{tok}`")));
    }
    Ok(v)
}

fn parse_color(path: &Path, line: usize, tok: &str) -> Result<u8> {
    tok.parse()
        .map_err(|_| parse_err(path, line, format!("invalid color value `{tok}`")))
}

/// Loads a cloud, detecting the format from the extension or the `ply`
/// magic line. Clouds default to the laser tag; ASCII PLY files written by
/// [`save_cloud`] carry the tag in a comment and restore it.
pub fn load_cloud(path: impl AsRef<Path>) -> Result<PointCloud> {
    Ok(load_cloud_file(path)?.0)
}

/// As [`load_cloud`], also returning file metadata.
pub fn load_cloud_file(path: impl AsRef<Path>) -> Result<(PointCloud, CloudFile)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let is_ply = path
        .extension()
        .map(|e| e.eq_ignore_ascii_case("ply"))
        .unwrap_or(false)
        || text.lines().next().map(str::trim) == Some("ply");
    let cloud = if is_ply {
        parse_ply(path, &text)?
    } else {
        parse_xyz(path, &text)?
    };
    cloud.validate()?;
    let info = CloudFile {
        path: path.to_path_buf(),
        format: if is_ply {
            CloudFormat::AsciiPly
        } else {
            CloudFormat::Xyz
        },
        point_count: cloud.len(),
    };
    Ok((cloud, info))
}

fn parse_ply(path: &Path, text: &str) -> Result<PointCloud> {
    let mut lines = text.lines().enumerate();

    let (_, first) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "empty file"))?;
    if first.trim() != "ply" {
        return Err(parse_err(path, 1, "missing `ply` magic line"));
    }

    let mut format_seen = false;
    let mut vertex_count: Option<usize> = None;
    let mut properties: Vec<String> = Vec::new();
    let mut source_tag = SourceTag::Laser;
    let mut header_end = 0usize;

    for (idx, raw) in lines.by_ref() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let mut tok = line.split_whitespace();
        match tok.next().unwrap() {
            "format" => {
                let rest: Vec<&str> = tok.collect();
                if rest != ["ascii", "1.0"] {
                    return Err(parse_err(path, lineno, "only `format ascii 1.0` supported"));
                }
                format_seen = true;
            }
            "comment" => {
                let rest: Vec<&str> = tok.collect();
                if rest.len() == 2 && rest[0] == "source" {
                    if let Some(tag) = SourceTag::parse(rest[1]) {
                        source_tag = tag;
                    }
                }
            }
            "element" => {
                let name = tok
                    .next()
                    .ok_or_else(|| parse_err(path, lineno, "element without name"))?;
                let count: usize = tok
                    .next()
                    .ok_or_else(|| parse_err(path, lineno, "element without count"))?
                    .parse()
                    .map_err(|_| parse_err(path, lineno, "invalid element count"))?;
                if name == "vertex" {
                    if vertex_count.is_some() {
                        return Err(parse_err(path, lineno, "duplicate vertex element"));
                    }
                    vertex_count = Some(count);
                } else if count != 0 {
                    return Err(parse_err(
                        path,
                        lineno,
                        format!("unsupported element `{name}`"),
                    ));
                }
            }
            "property" => {
                let kind = tok
                    .next()
                    .ok_or_else(|| parse_err(path, lineno, "property without type"))?;
                if kind == "list" {
                    return Err(parse_err(path, lineno, "list properties unsupported"));
                }
                let name = tok
                    .next()
                    .ok_or_else(|| parse_err(path, lineno, "property without name"))?;
                if vertex_count.is_some() {
                    properties.push(name.to_string());
                }
            }
            "end_header" => {
                header_end = lineno;
                break;
            }
            other => {
                return Err(parse_err(
                    path,
                    lineno,
                    format!("unexpected header token `{other}`"),
                ));
            }
        }
    }
    if header_end == 0 {
        return Err(parse_err(path, 1, "header not terminated by end_header"));
    }
    if !format_seen {
        return Err(parse_err(path, header_end, "missing format declaration"));
    }
    let vertex_count =
        vertex_count.ok_or_else(|| parse_err(path, header_end, "missing vertex element"))?;

    let find = |name: &str| properties.iter().position(|p| p == name);
    let (xi, yi, zi) = match (find("x"), find("y"), find("z")) {
        (Some(x), Some(y), Some(z)) => (x, y, z),
        _ => {
            return Err(parse_err(
                path,
                header_end,
                "vertex element must carry x, y, z properties",
            ))
        }
    };
    let color_idx = match (find("red"), find("green"), find("blue")) {
        (Some(r), Some(g), Some(b)) => Some((r, g, b)),
        (None, None, None) => None,
        _ => {
            return Err(parse_err(
                path,
                header_end,
                "red/green/blue must be present together",
            ))
        }
    };

    let mut points = Vec::with_capacity(vertex_count);
    let mut colors = color_idx.map(|_| Vec::with_capacity(vertex_count));
    for (idx, raw) in lines.by_ref() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if points.len() == vertex_count {
            return Err(parse_err(path, lineno, "trailing data after vertex records"));
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != properties.len() {
            return Err(parse_err(
                path,
                lineno,
                format!(
                    "expected {} fields, got {}",
                    properties.len(),
                    fields.len()
                ),
            ));
        }
        let p = Point3::new(
            parse_float(path, lineno, fields[xi], "coordinate")?,
            parse_float(path, lineno, fields[yi], "coordinate")?,
            parse_float(path, lineno, fields[zi], "coordinate")?,
        );
        points.push(p);
        if let (Some(colors), Some((r, g, b))) = (&mut colors, color_idx) {
            colors.push([
                parse_color(path, lineno, fields[r])?,
                parse_color(path, lineno, fields[g])?,
                parse_color(path, lineno, fields[b])?,
            ]);
        }
    }
    if points.len() != vertex_count {
        return Err(parse_err(
            path,
            header_end,
            format!(
                "vertex element declares {} points, file has {}",
                vertex_count,
                points.len()
            ),
        ));
    }
    Ok(PointCloud {
        points,
        colors,
        source_tag,
    })
}

fn parse_xyz(path: &Path, text: &str) -> Result<PointCloud> {
    let mut points = Vec::new();
    let mut colors: Option<Vec<[u8; 3]>> = None;
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 && fields.len() != 6 {
            return Err(parse_err(
                path,
                lineno,
                format!("expected 3 or 6 fields, got {}", fields.len()),
            ));
        }
        let has_color = fields.len() == 6;
        if points.is_empty() {
            colors = has_color.then(Vec::new);
        } else if colors.is_some() != has_color {
            return Err(parse_err(path, lineno, "inconsistent color columns"));
        }
        points.push(Point3::new(
            parse_float(path, lineno, fields[0], "coordinate")?,
            parse_float(path, lineno, fields[1], "coordinate")?,
            parse_float(path, lineno, fields[2], "coordinate")?,
        ));
        if let Some(colors) = &mut colors {
            colors.push([
                parse_color(path, lineno, fields[3])?,
                parse_color(path, lineno, fields[4])?,
                parse_color(path, lineno, fields[5])?,
            ]);
        }
    }
    Ok(PointCloud {
        points,
        colors,
        source_tag: SourceTag::Laser,
    })
}

/// Writes a cloud in the chosen format. Colors are written iff present;
/// point order is preserved.
pub fn save_cloud(cloud: &PointCloud, path: impl AsRef<Path>, format: CloudFormat) -> Result<()> {
    cloud.validate()?;
    let path = path.as_ref();
    let mut out = String::new();
    match format {
        CloudFormat::Xyz => {
            for (i, p) in cloud.points.iter().enumerate() {
                out.push_str(&format_g7(p.x));
                out.push(' ');
                out.push_str(&format_g7(p.y));
                out.push(' ');
                out.push_str(&format_g7(p.z));
                if let Some(colors) = &cloud.colors {
                    let c = colors[i];
                    out.push_str(&format!(" {} {} {}", c[0], c[1], c[2]));
                }
                out.push('\n');
            }
        }
        CloudFormat::AsciiPly => {
            out.push_str("ply\nformat ascii 1.0\n");
            out.push_str(&format!("comment source {}\n", cloud.source_tag.as_str()));
            out.push_str(&format!("element vertex {}\n", cloud.len()));
            out.push_str("property float x\nproperty float y\nproperty float z\n");
            if cloud.colors.is_some() {
                out.push_str(
                    "property uchar red\nproperty uchar green\nproperty uchar blue\n",
                );
            }
            out.push_str("end_header\n");
            for (i, p) in cloud.points.iter().enumerate() {
                out.push_str(&format_g7(p.x));
                out.push(' ');
                out.push_str(&format_g7(p.y));
                out.push(' ');
                out.push_str(&format_g7(p.z));
                if let Some(colors) = &cloud.colors {
                    let c = colors[i];
                    out.push_str(&format!(" {} {} {}", c[0], c[1], c[2]));
                }
                out.push('\n');
            }
        }
    }
    let mut f = fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}

/// Loads a trajectory file: one pose per line as
/// `timestamp tx ty tz qx qy qz qw`, `#` comments ignored.
pub fn load_trajectory(path: impl AsRef<Path>) -> Result<Trajectory> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut poses = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 8 {
            return Err(parse_err(
                path,
                lineno,
                format!("expected 8 fields, got {}", fields.len()),
            ));
        }
        let mut v = [0.0f64; 8];
        for (k, tok) in fields.iter().enumerate() {
            v[k] = parse_float(path, lineno, tok, "value")?;
        }
        let quat = nalgebra::Quaternion::new(v[7], v[4], v[5], v[6]); // w, x, y, z
        if quat.norm() < 1e-9 {
            return Err(parse_err(path, lineno, "zero-norm quaternion"));
        }
        let rotation = UnitQuaternion::from_quaternion(quat);
        poses.push(Pose::new(
            v[0],
            RigidTransform::from_quaternion(rotation, Vector3::new(v[1], v[2], v[3])),
        ));
    }
    Trajectory::from_poses(poses)
}

/// Writes a trajectory in the `timestamp tx ty tz qx qy qz qw` format.
pub fn save_trajectory(traj: &Trajectory, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::from("# timestamp tx ty tz qx qy qz qw\n");
    for pose in traj.poses() {
        let t = &pose.transform.translation;
        let q = pose.transform.unit_quaternion();
        out.push_str(&format!(
            "{} {} {} {} {} {} {} {}\n",
            format_g7(pose.timestamp),
            format_g7(t.x),
            format_g7(t.y),
            format_g7(t.z),
            format_g7(q.i),
            format_g7(q.j),
            format_g7(q.k),
            format_g7(q.w),
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Loads a 4x4 row-major homogeneous transform file (4 lines of 4 numbers,
/// `#` comments ignored).
pub fn load_transform(path: impl AsRef<Path>) -> Result<RigidTransform> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut rows: Vec<[f64; 4]> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(parse_err(
                path,
                lineno,
                format!("expected 4 fields, got {}", fields.len()),
            ));
        }
        let mut row = [0.0f64; 4];
        for (k, tok) in fields.iter().enumerate() {
            row[k] = parse_float(path, lineno, tok, "matrix entry")?;
        }
        if rows.len() == 4 {
            return Err(parse_err(path, lineno, "more than 4 matrix rows"));
        }
        rows.push(row);
    }
    if rows.len() != 4 {
        return Err(parse_err(
            path,
            1,
            format!("expected 4 matrix rows, got {}", rows.len()),
        ));
    }
    let bottom = rows[3];
    if (bottom[0]).abs() > 1e-9
        || (bottom[1]).abs() > 1e-9
        || (bottom[2]).abs() > 1e-9
        || (bottom[3] - 1.0).abs() > 1e-9
    {
        return Err(parse_err(path, 4, "bottom row must be 0 0 0 1"));
    }
    let rows4: [[f64; 4]; 4] = [rows[0], rows[1], rows[2], rows[3]];
    let t = RigidTransform::from_homogeneous_rows(&rows4);
    let r = t.rotation;
    if ((r.transpose() * r) - Matrix3::identity()).norm() > 1e-6 || (r.determinant() - 1.0).abs() > 1e-6
    {
        return Err(parse_err(path, 1, "rotation block is not orthonormal"));
    }
    Ok(t)
}

/// Writes a transform as 4 lines of 4 row-major numbers.
pub fn save_transform(t: &RigidTransform, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, transform_to_string(t))?;
    Ok(())
}

/// The transform file payload as a string (also used for stdout).
pub fn transform_to_string(t: &RigidTransform) -> String {
    let mut out = String::new();
    for row in t.to_homogeneous_rows() {
        out.push_str(&format!(
            "{} {} {} {}\n",
            format_g7(row[0]),
            format_g7(row[1]),
            format_g7(row[2]),
            format_g7(row[3]),
        ));
    }
    out
}

/// Writes planar segments as plain text, one line per segment:
/// `nx ny nz d area n_inliers minx miny minz maxx maxy maxz`.
pub fn save_segments(segments: &[PlanarSegment], path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, segments_to_string(segments))?;
    Ok(())
}

pub fn segments_to_string(segments: &[PlanarSegment]) -> String {
    let mut out = String::new();
    for s in segments {
        out.push_str(&format!(
            "{} {} {} {} {} {} {} {} {} {} {} {}\n",
            format_g7(s.normal.x),
            format_g7(s.normal.y),
            format_g7(s.normal.z),
            format_g7(s.distance),
            format_g7(s.area),
            s.inliers.len(),
            format_g7(s.extent_min.x),
            format_g7(s.extent_min.y),
            format_g7(s.extent_min.z),
            format_g7(s.extent_max.x),
            format_g7(s.extent_max.y),
            format_g7(s.extent_max.z),
        ));
    }
    out
}

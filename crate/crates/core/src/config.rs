//! Toolkit configuration: one struct bundling every module's parameter
//! set, loadable from a plain `key = value` file with per-module section
//! headers. A missing file yields the defaults; unknown keys are errors.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::SourceTag;
use crate::localization::{CellSearchParams, MetascanParams};
use crate::preprocess::FilterParams;
use crate::registration::{MatchParams, DEFAULT_RANK_TOL};
use crate::segmentation::SegmentationParams;

/// All tunable parameters with their defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    /// Filters applied to laser clouds (voxel leaf 0.1 m).
    pub laser_filter: FilterParams,
    /// Filters applied to vision clouds (voxel leaf 0.05 m).
    pub vision_filter: FilterParams,
    pub segmentation: SegmentationParams,
    pub matching: MatchParams,
    /// Relative singular-value cutoff for the translation rank decision.
    pub rank_tol: f64,
    /// Growth of the global map section around the scan box, meters.
    pub section_tolerance: f64,
    /// Global corrections with a larger rotation are treated as
    /// mismatches.
    pub max_correction_angle: f64,
    pub cell: CellSearchParams,
    pub metascan: MetascanParams,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            laser_filter: FilterParams {
                voxel_leaf: 0.1,
                ..FilterParams::default()
            },
            vision_filter: FilterParams {
                voxel_leaf: 0.05,
                ..FilterParams::default()
            },
            segmentation: SegmentationParams::default(),
            matching: MatchParams::default(),
            rank_tol: DEFAULT_RANK_TOL,
            section_tolerance: 3.0,
            max_correction_angle: 30f64.to_radians(),
            cell: CellSearchParams::default(),
            metascan: MetascanParams::default(),
        }
    }
}

impl Config {
    pub fn filter_for(&self, tag: SourceTag) -> &FilterParams {
        match tag {
            SourceTag::Laser => &self.laser_filter,
            SourceTag::Vision => &self.vision_filter,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.laser_filter.validate()?;
        self.vision_filter.validate()?;
        self.segmentation.validate()?;
        self.matching.validate()?;
        self.cell.validate()?;
        self.metascan.validate()?;
        if !(self.rank_tol > 0.0 && self.rank_tol < 1.0) {
            return Err(Error::InvalidParam(format!(
                "rank_tol must be in (0,1), got {}",
                self.rank_tol
            )));
        }
        if !(self.section_tolerance >= 0.0) {
            return Err(Error::InvalidParam(
                "section_tolerance must be >= 0".into(),
            ));
        }
        if !(self.max_correction_angle > 0.0) {
            return Err(Error::InvalidParam(
                "max_correction_angle must be positive".into(),
            ));
        }
        Ok(())
    }
}

const SECTIONS: [&str; 5] = [
    "preprocessing",
    "segmentation",
    "matching",
    "registration",
    "localization",
];

/// Loads a configuration file; `None` (or a missing optional path) gives
/// the defaults.
pub fn load_config(path: Option<&Path>) -> Result<Config> {
    let Some(path) = path else {
        return Ok(Config::default());
    };
    let text = fs::read_to_string(path)?;
    parse_config(&text)
}

fn config_err(key: &str, msg: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        msg: msg.into(),
    }
}

/// Parses config text. Section headers group keys per module but key names
/// are globally unique, so stray context never changes a value's meaning.
pub fn parse_config(text: &str) -> Result<Config> {
    let mut cfg = Config::default();
    let mut unknown: BTreeSet<String> = BTreeSet::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') && line.ends_with(']') {
            let name = &line[1..line.len() - 1];
            if !SECTIONS.contains(&name) {
                return Err(config_err(name, "unknown section"));
            }
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(config_err(
                line,
                format!("line {} is not `key = value`", idx + 1),
            ));
        };
        let key = key.trim();
        let value = value.trim();
        if !apply_key(&mut cfg, key, value)? {
            unknown.insert(key.to_string());
        }
    }
    if !unknown.is_empty() {
        let list: Vec<String> = unknown.into_iter().collect();
        return Err(config_err(&list.join(", "), "unknown configuration keys"));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    value
        .parse::<f64>()
        .map_err(|_| config_err(key, format!("invalid number `{value}`")))
}

fn parse_usize(key: &str, value: &str) -> Result<usize> {
    value
        .parse::<usize>()
        .map_err(|_| config_err(key, format!("invalid count `{value}`")))
}

fn positive(key: &str, v: f64) -> Result<f64> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err(config_err(key, format!("must be positive, got {v}")))
    }
}

fn apply_key(cfg: &mut Config, key: &str, value: &str) -> Result<bool> {
    match key {
        // preprocessing
        "voxel_leaf" => {
            let v = positive(key, parse_f64(key, value)?)?;
            cfg.laser_filter.voxel_leaf = v;
            cfg.vision_filter.voxel_leaf = v;
        }
        "voxel_leaf_laser" => {
            cfg.laser_filter.voxel_leaf = positive(key, parse_f64(key, value)?)?
        }
        "voxel_leaf_vision" => {
            cfg.vision_filter.voxel_leaf = positive(key, parse_f64(key, value)?)?
        }
        "outlier_neighbors" => {
            let v = parse_usize(key, value)?;
            if v < 1 {
                return Err(config_err(key, "must be >= 1"));
            }
            cfg.laser_filter.outlier_neighbors = v;
            cfg.vision_filter.outlier_neighbors = v;
        }
        "outlier_stddev_mult" => {
            let v = positive(key, parse_f64(key, value)?)?;
            cfg.laser_filter.outlier_stddev_mult = v;
            cfg.vision_filter.outlier_stddev_mult = v;
        }
        // segmentation
        "neighbor_radius" => {
            cfg.segmentation.neighbor_radius = positive(key, parse_f64(key, value)?)?
        }
        "distance_threshold" => {
            cfg.segmentation.distance_threshold = positive(key, parse_f64(key, value)?)?
        }
        "angle_threshold_deg" => {
            cfg.segmentation.angle_threshold =
                positive(key, parse_f64(key, value)?)?.to_radians()
        }
        "min_inliers" => {
            let v = parse_usize(key, value)?;
            if v < 3 {
                return Err(config_err(key, "must be >= 3"));
            }
            cfg.segmentation.min_inliers = v;
        }
        "min_area" => cfg.segmentation.min_area = positive(key, parse_f64(key, value)?)?,
        // matching
        "angle_tol_deg" => {
            cfg.matching.angle_tol = positive(key, parse_f64(key, value)?)?.to_radians()
        }
        "distance_tol" => cfg.matching.distance_tol = positive(key, parse_f64(key, value)?)?,
        "area_ratio_tol" => {
            let v = parse_f64(key, value)?;
            if !(v > 0.0 && v <= 1.0) {
                return Err(config_err(key, format!("must be in (0,1], got {v}")));
            }
            cfg.matching.area_ratio_tol = v;
        }
        "overlap_epsilon" => {
            cfg.matching.overlap_epsilon = positive(key, parse_f64(key, value)?)?
        }
        // registration
        "rank_tol" => {
            let v = parse_f64(key, value)?;
            if !(v > 0.0 && v < 1.0) {
                return Err(config_err(key, format!("must be in (0,1), got {v}")));
            }
            cfg.rank_tol = v;
        }
        // localization
        "section_tolerance" => {
            let v = parse_f64(key, value)?;
            if v < 0.0 {
                return Err(config_err(key, "must be >= 0"));
            }
            cfg.section_tolerance = v;
        }
        "max_correction_angle_deg" => {
            cfg.max_correction_angle = positive(key, parse_f64(key, value)?)?.to_radians()
        }
        "cell_tolerance" => {
            let v = parse_f64(key, value)?;
            if v < 0.0 {
                return Err(config_err(key, "must be >= 0"));
            }
            cfg.cell.cell_tolerance = v;
        }
        "alpha" => {
            let v = parse_f64(key, value)?;
            if !(v > 0.0 && v < 1.0) {
                return Err(config_err(key, format!("must be in (0,1), got {v}")));
            }
            cfg.cell.alpha = v;
        }
        "beta" => {
            let v = parse_f64(key, value)?;
            if !(v > 1.0) {
                return Err(config_err(key, format!("must be > 1, got {v}")));
            }
            cfg.cell.beta = v;
        }
        "min_overlapping_surfaces" => {
            let v = parse_usize(key, value)?;
            if v < 1 {
                return Err(config_err(key, "must be >= 1"));
            }
            cfg.metascan.min_overlapping_surfaces = v;
        }
        "min_pose_change_deg" => {
            cfg.metascan.min_pose_change.0 =
                positive(key, parse_f64(key, value)?)?.to_radians()
        }
        "min_pose_change_m" => {
            cfg.metascan.min_pose_change.1 = positive(key, parse_f64(key, value)?)?
        }
        _ => return Ok(false),
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_file_gives_defaults() {
        let cfg = load_config(None).unwrap();
        assert_eq!(cfg, Config::default());
        assert!((cfg.laser_filter.voxel_leaf - 0.1).abs() < 1e-12);
        assert!((cfg.vision_filter.voxel_leaf - 0.05).abs() < 1e-12);
        assert!((cfg.cell.alpha - 0.3).abs() < 1e-12);
        assert!((cfg.cell.beta - 1.5).abs() < 1e-12);
    }

    #[test]
    fn key_override_applies() {
        let cfg = parse_config("[localization]\nalpha = 0.4\n").unwrap();
        assert!((cfg.cell.alpha - 0.4).abs() < 1e-12);
    }

    #[test]
    fn invariant_violation_names_the_key() {
        let err = parse_config("voxel_leaf = -1\n").unwrap_err();
        match err {
            Error::Config { key, .. } => assert_eq!(key, "voxel_leaf"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_listed() {
        let err = parse_config("alpha = 0.4\nbogus_key = 1\nanother = 2\n").unwrap_err();
        match err {
            Error::Config { key, msg } => {
                assert!(key.contains("bogus_key") && key.contains("another"), "{key}");
                assert!(msg.contains("unknown"));
            }
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_section_is_an_error() {
        assert!(parse_config("[nonsense]\n").is_err());
    }

    #[test]
    fn comments_and_sections_parse() {
        let text = "
# toolkit overrides
[preprocessing]
voxel_leaf_laser = 0.2  # coarser
[matching]
angle_tol_deg = 20
";
        let cfg = parse_config(text).unwrap();
        assert!((cfg.laser_filter.voxel_leaf - 0.2).abs() < 1e-12);
        assert!((cfg.vision_filter.voxel_leaf - 0.05).abs() < 1e-12);
        assert!((cfg.matching.angle_tol - 20f64.to_radians()).abs() < 1e-12);
    }
}

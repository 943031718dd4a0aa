//! Pipeline configuration: a plain `key=value` text file with `#` comments,
//! every knob defaulted to the toolkit's reference values.

use std::path::Path;

use lasernav_core::costmap::{EmbodimentSpec, GaussianParams};
use lasernav_core::registration::{CoarseAlignParams, IcpParams};
use lasernav_core::Vec3;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected key=value, got {text:?}")]
    MissingEquals { line: usize, text: String },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value for {key}: {message}")]
    InvalidValue {
        line: usize,
        key: String,
        message: String,
    },
    #[error("{name} must be positive (got {value})")]
    NonPositive { name: &'static str, value: f64 },
    #[error("{name} must be at least {minimum} (got {value})")]
    TooSmall {
        name: &'static str,
        minimum: usize,
        value: usize,
    },
    #[error("inlier fraction must lie in (0, 1] (got {0})")]
    BadFraction(f64),
    #[error("ground band must satisfy low < high < ceiling (got {low}, {high}, {ceiling})")]
    BadBand { low: f64, high: f64, ceiling: f64 },
    #[error("failed to read config: {0}")]
    Io(#[from] std::io::Error),
}

/// Vertical axis candidates for the ground-plane search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn vector(self) -> Vec3 {
        match self {
            Axis::X => Vec3::new(1.0, 0.0, 0.0),
            Axis::Y => Vec3::new(0.0, 1.0, 0.0),
            Axis::Z => Vec3::new(0.0, 0.0, 1.0),
        }
    }
}

/// Every tunable of the register→map→inflate→plan chain.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub voxel_size: f64,
    pub fpfh_radius: f64,
    pub normal_k: usize,
    pub consensus_iterations: usize,
    pub consensus_inlier_threshold: f64,
    pub consensus_min_inlier_fraction: f64,
    pub consensus_max_correspondences: usize,
    pub consensus_seed: u64,
    pub icp_max_iterations: usize,
    pub icp_max_correspondence_distance: f64,
    pub icp_translation_epsilon: f64,
    pub icp_rotation_epsilon: f64,
    pub ransac_distance_threshold: f64,
    pub ransac_iterations: usize,
    pub ransac_seed: u64,
    pub ransac_axis: Axis,
    pub max_tilt_degrees: f64,
    pub ground_band_low: f64,
    pub ground_band_high: f64,
    pub ceiling: f64,
    pub resolution: f64,
    pub embodiment_length: f64,
    pub embodiment_width: f64,
    pub sigma_x: f64,
    pub sigma_y: f64,
    /// Cleared by `--no-embodiment`: keeps the lethal dilation but zeroes
    /// every Gaussian penalty, so only geometry steers the planner.
    pub embodiment_enabled: bool,
    pub start: Option<(usize, usize)>,
    pub goal: Option<(usize, usize)>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            voxel_size: 0.01,
            fpfh_radius: 0.10,
            normal_k: 12,
            consensus_iterations: 400,
            consensus_inlier_threshold: 0.05,
            consensus_min_inlier_fraction: 0.25,
            consensus_max_correspondences: 800,
            consensus_seed: 0,
            icp_max_iterations: 50,
            icp_max_correspondence_distance: 0.25,
            icp_translation_epsilon: 1e-7,
            icp_rotation_epsilon: 1e-7,
            ransac_distance_threshold: 0.02,
            ransac_iterations: 200,
            ransac_seed: 0,
            ransac_axis: Axis::Z,
            max_tilt_degrees: 15.0,
            ground_band_low: -0.01,
            ground_band_high: 0.03,
            ceiling: 1.5,
            resolution: 0.01,
            embodiment_length: 0.40,
            embodiment_width: 0.41,
            sigma_x: 1.0,
            sigma_y: 1.0,
            embodiment_enabled: true,
            start: None,
            goal: None,
        }
    }
}

impl PipelineConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Parses `key=value` lines on top of the defaults; `#` starts a
    /// comment, blank lines are skipped, later duplicates win, and unknown
    /// keys are errors.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut config = Self::default();
        for (index, raw) in text.lines().enumerate() {
            let line = index + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError::MissingEquals {
                    line,
                    text: content.to_string(),
                });
            };
            config.apply(line, key.trim(), value.trim())?;
        }
        config.validate()?;
        Ok(config)
    }

    fn apply(&mut self, line: usize, key: &str, value: &str) -> Result<(), ConfigError> {
        fn num<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T, ConfigError>
        where
            T::Err: std::fmt::Display,
        {
            value
                .parse()
                .map_err(|e: T::Err| ConfigError::InvalidValue {
                    line,
                    key: key.to_string(),
                    message: e.to_string(),
                })
        }
        fn cell(line: usize, key: &str, value: &str) -> Result<(usize, usize), ConfigError> {
            let bad = || ConfigError::InvalidValue {
                line,
                key: key.to_string(),
                message: format!("expected ROW,COL, got {value:?}"),
            };
            let (r, c) = value.split_once(',').ok_or_else(bad)?;
            Ok((
                r.trim().parse().map_err(|_| bad())?,
                c.trim().parse().map_err(|_| bad())?,
            ))
        }
        match key {
            "voxel_size" => self.voxel_size = num(line, key, value)?,
            "fpfh_radius" => self.fpfh_radius = num(line, key, value)?,
            "normal_k" => self.normal_k = num(line, key, value)?,
            "consensus_iterations" => self.consensus_iterations = num(line, key, value)?,
            "consensus_inlier_threshold" => {
                self.consensus_inlier_threshold = num(line, key, value)?
            }
            "consensus_min_inlier_fraction" => {
                self.consensus_min_inlier_fraction = num(line, key, value)?
            }
            "consensus_max_correspondences" => {
                self.consensus_max_correspondences = num(line, key, value)?
            }
            "consensus_seed" => self.consensus_seed = num(line, key, value)?,
            "icp_max_iterations" => self.icp_max_iterations = num(line, key, value)?,
            "icp_max_correspondence_distance" => {
                self.icp_max_correspondence_distance = num(line, key, value)?
            }
            "icp_translation_epsilon" => self.icp_translation_epsilon = num(line, key, value)?,
            "icp_rotation_epsilon" => self.icp_rotation_epsilon = num(line, key, value)?,
            "ransac_distance_threshold" => self.ransac_distance_threshold = num(line, key, value)?,
            "ransac_iterations" => self.ransac_iterations = num(line, key, value)?,
            "ransac_seed" => self.ransac_seed = num(line, key, value)?,
            "ransac_axis" => {
                self.ransac_axis = match value {
                    "x" | "X" => Axis::X,
                    "y" | "Y" => Axis::Y,
                    "z" | "Z" => Axis::Z,
                    other => {
                        return Err(ConfigError::InvalidValue {
                            line,
                            key: key.to_string(),
                            message: format!("expected x, y, or z, got {other:?}"),
                        })
                    }
                }
            }
            "max_tilt_degrees" => self.max_tilt_degrees = num(line, key, value)?,
            "ground_band_low" => self.ground_band_low = num(line, key, value)?,
            "ground_band_high" => self.ground_band_high = num(line, key, value)?,
            "ceiling" => self.ceiling = num(line, key, value)?,
            "resolution" => self.resolution = num(line, key, value)?,
            "embodiment_length" => self.embodiment_length = num(line, key, value)?,
            "embodiment_width" => self.embodiment_width = num(line, key, value)?,
            "sigma_x" => self.sigma_x = num(line, key, value)?,
            "sigma_y" => self.sigma_y = num(line, key, value)?,
            "start" => self.start = Some(cell(line, key, value)?),
            "goal" => self.goal = Some(cell(line, key, value)?),
            other => {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: other.to_string(),
                })
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("voxel_size", self.voxel_size),
            ("fpfh_radius", self.fpfh_radius),
            (
                "consensus_inlier_threshold",
                self.consensus_inlier_threshold,
            ),
            (
                "icp_max_correspondence_distance",
                self.icp_max_correspondence_distance,
            ),
            ("ransac_distance_threshold", self.ransac_distance_threshold),
            ("max_tilt_degrees", self.max_tilt_degrees),
            ("ceiling", self.ceiling),
            ("resolution", self.resolution),
            ("embodiment_length", self.embodiment_length),
            ("embodiment_width", self.embodiment_width),
            ("sigma_x", self.sigma_x),
            ("sigma_y", self.sigma_y),
        ];
        for (name, value) in positive {
            if value.is_nan() || value <= 0.0 {
                return Err(ConfigError::NonPositive { name, value });
            }
        }
        let minimums = [
            ("normal_k", 3, self.normal_k),
            ("consensus_iterations", 1, self.consensus_iterations),
            (
                "consensus_max_correspondences",
                3,
                self.consensus_max_correspondences,
            ),
            ("icp_max_iterations", 1, self.icp_max_iterations),
            ("ransac_iterations", 1, self.ransac_iterations),
        ];
        for (name, minimum, value) in minimums {
            if value < minimum {
                return Err(ConfigError::TooSmall {
                    name,
                    minimum,
                    value,
                });
            }
        }
        if !(self.consensus_min_inlier_fraction > 0.0 && self.consensus_min_inlier_fraction <= 1.0)
        {
            return Err(ConfigError::BadFraction(self.consensus_min_inlier_fraction));
        }
        if !(self.ground_band_low < self.ground_band_high && self.ground_band_high < self.ceiling) {
            return Err(ConfigError::BadBand {
                low: self.ground_band_low,
                high: self.ground_band_high,
                ceiling: self.ceiling,
            });
        }
        Ok(())
    }

    pub fn coarse_params(&self) -> CoarseAlignParams {
        CoarseAlignParams {
            feature_radius: self.fpfh_radius,
            consensus_iterations: self.consensus_iterations,
            inlier_threshold: self.consensus_inlier_threshold,
            min_inlier_fraction: self.consensus_min_inlier_fraction,
            max_correspondences: self.consensus_max_correspondences,
            seed: self.consensus_seed,
        }
    }

    pub fn icp_params(&self) -> IcpParams {
        IcpParams {
            max_iterations: self.icp_max_iterations,
            max_correspondence_distance: self.icp_max_correspondence_distance,
            translation_epsilon: self.icp_translation_epsilon,
            rotation_epsilon: self.icp_rotation_epsilon,
            surface_gating: None,
        }
    }

    pub fn band(&self) -> (f64, f64) {
        (self.ground_band_low, self.ground_band_high)
    }

    pub fn embodiment(&self) -> EmbodimentSpec {
        EmbodimentSpec::new(self.embodiment_length, self.embodiment_width)
            .expect("validated positive")
    }

    pub fn gaussian(&self) -> GaussianParams {
        GaussianParams::new(self.sigma_x, self.sigma_y).expect("validated positive")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_pass_validation() {
        PipelineConfig::default().validate().unwrap();
    }

    #[test]
    fn parses_overrides_comments_and_duplicates() {
        let config = PipelineConfig::parse(
            "# tuned for a sparse outdoor scene\n\
             voxel_size = 0.02   # coarser merge\n\
             ransac_axis=y\n\
             start = 3, 7\n\
             consensus_seed = 9\n\
             consensus_seed = 11\n",
        )
        .unwrap();
        assert_eq!(config.voxel_size, 0.02);
        assert_eq!(config.ransac_axis, Axis::Y);
        assert_eq!(config.start, Some((3, 7)));
        assert_eq!(config.goal, None);
        assert_eq!(config.consensus_seed, 11);
        assert_eq!(config.fpfh_radius, PipelineConfig::default().fpfh_radius);
    }

    #[test]
    fn unknown_key_is_an_error_with_line_number() {
        let err = PipelineConfig::parse("voxel_size=0.01\nvoxel_sze=0.01\n").unwrap_err();
        match err {
            ConfigError::UnknownKey { line, key } => {
                assert_eq!(line, 2);
                assert_eq!(key, "voxel_sze");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn missing_equals_and_bad_values_are_rejected() {
        assert!(matches!(
            PipelineConfig::parse("voxel_size 0.01\n"),
            Err(ConfigError::MissingEquals { line: 1, .. })
        ));
        assert!(matches!(
            PipelineConfig::parse("normal_k=twelve\n"),
            Err(ConfigError::InvalidValue { line: 1, .. })
        ));
        assert!(matches!(
            PipelineConfig::parse("goal=4\n"),
            Err(ConfigError::InvalidValue { line: 1, .. })
        ));
    }

    #[test]
    fn band_ordering_is_enforced() {
        assert!(matches!(
            PipelineConfig::parse("ground_band_low=0.05\n"),
            Err(ConfigError::BadBand { .. })
        ));
        assert!(matches!(
            PipelineConfig::parse("ceiling=0.02\n"),
            Err(ConfigError::BadBand { .. })
        ));
    }

    #[test]
    fn lengths_must_be_positive() {
        assert!(matches!(
            PipelineConfig::parse("resolution=0\n"),
            Err(ConfigError::NonPositive {
                name: "resolution",
                ..
            })
        ));
        assert!(matches!(
            PipelineConfig::parse("embodiment_width=-0.4\n"),
            Err(ConfigError::NonPositive {
                name: "embodiment_width",
                ..
            })
        ));
    }
}

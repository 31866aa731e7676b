//! Flat TOML pipeline configuration. Every key is optional; missing keys take
//! the defaults printed by [`PipelineConfig::dump`].

use std::collections::BTreeSet;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::decision::DEFAULT_TOWARD_MIN_COMPONENT;
use crate::detection_io::{FilterConfig, DEFAULT_ANIMAL_CLASSES, DEFAULT_MIN_SCORE};
use crate::direction::{DEFAULT_DIRECTION_TTL, DEFAULT_MIN_MAGNITUDE};
use crate::lane::{LaneParams, RoiFractions, DEFAULT_HOLD_LIMIT};
use crate::tracker::{TrackerConfig, DEFAULT_HISTORY_LEN, DEFAULT_MAX_DISAPPEARED};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Tracker match gate.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub enum MatchGate {
    /// A quarter of the frame diagonal once the frame size is known, otherwise unbounded.
    #[default]
    Auto,
    Unbounded,
    Fixed(f64),
}

impl Serialize for MatchGate {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            MatchGate::Auto => s.serialize_str("auto"),
            MatchGate::Unbounded => s.serialize_str("none"),
            MatchGate::Fixed(d) => s.serialize_f64(*d),
        }
    }
}

impl<'de> Deserialize<'de> for MatchGate {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Name(String),
            Int(i64),
            Float(f64),
        }
        match Raw::deserialize(d)? {
            Raw::Name(n) if n == "auto" => Ok(MatchGate::Auto),
            Raw::Name(n) if n == "none" => Ok(MatchGate::Unbounded),
            Raw::Name(n) => Err(serde::de::Error::custom(format!(
                "max_match_distance: expected \"auto\", \"none\" or a number, got {n:?}"
            ))),
            Raw::Int(v) => Ok(MatchGate::Fixed(v as f64)),
            Raw::Float(v) => Ok(MatchGate::Fixed(v)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub animal_classes: BTreeSet<String>,
    pub min_score: f64,

    pub max_disappeared: u32,
    pub max_match_distance: MatchGate,
    pub history_len: usize,

    pub min_magnitude: f64,
    pub direction_ttl: u64,
    pub toward_min_component: f64,

    pub hold_limit: u32,
    pub blur_kernel: usize,
    pub blur_sigma: f64,
    pub edge_low: f64,
    pub edge_high: f64,
    pub roi_bottom_left_x: f64,
    pub roi_bottom_right_x: f64,
    pub roi_top_left_x: f64,
    pub roi_top_right_x: f64,
    pub roi_top_y: f64,
    pub hough_rho: f64,
    pub hough_theta_deg: f64,
    pub hough_threshold: u32,
    pub min_segment_len: f64,
    pub max_line_gap: usize,
    pub min_abs_slope: f64,
    pub horizon_frac: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let lane = LaneParams::default();
        Self {
            animal_classes: DEFAULT_ANIMAL_CLASSES
                .iter()
                .map(|s| s.to_string())
                .collect(),
            min_score: DEFAULT_MIN_SCORE,
            max_disappeared: DEFAULT_MAX_DISAPPEARED,
            max_match_distance: MatchGate::Auto,
            history_len: DEFAULT_HISTORY_LEN,
            min_magnitude: DEFAULT_MIN_MAGNITUDE,
            direction_ttl: DEFAULT_DIRECTION_TTL,
            toward_min_component: DEFAULT_TOWARD_MIN_COMPONENT,
            hold_limit: DEFAULT_HOLD_LIMIT,
            blur_kernel: lane.blur_kernel,
            blur_sigma: lane.blur_sigma,
            edge_low: lane.edge_low,
            edge_high: lane.edge_high,
            roi_bottom_left_x: lane.roi.bottom_left_x,
            roi_bottom_right_x: lane.roi.bottom_right_x,
            roi_top_left_x: lane.roi.top_left_x,
            roi_top_right_x: lane.roi.top_right_x,
            roi_top_y: lane.roi.top_y,
            hough_rho: lane.rho_res,
            hough_theta_deg: lane.theta_res_deg,
            hough_threshold: lane.vote_threshold,
            min_segment_len: lane.min_segment_len,
            max_line_gap: lane.max_line_gap,
            min_abs_slope: lane.min_abs_slope,
            horizon_frac: lane.horizon_frac,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: PipelineConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// The configuration as TOML, every key present.
    pub fn dump(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn filter(&self) -> FilterConfig {
        FilterConfig {
            animal_classes: self.animal_classes.clone(),
            min_score: self.min_score,
        }
    }

    /// Tracker settings; an `auto` gate starts unbounded and is set once the frame size is known.
    pub fn tracker(&self) -> TrackerConfig {
        TrackerConfig {
            max_disappeared: self.max_disappeared,
            max_match_distance: match self.max_match_distance {
                MatchGate::Fixed(d) => Some(d),
                MatchGate::Auto | MatchGate::Unbounded => None,
            },
            history_len: self.history_len,
        }
    }

    pub fn lane_params(&self) -> LaneParams {
        LaneParams {
            blur_kernel: self.blur_kernel,
            blur_sigma: self.blur_sigma,
            edge_low: self.edge_low,
            edge_high: self.edge_high,
            roi: RoiFractions {
                bottom_left_x: self.roi_bottom_left_x,
                bottom_right_x: self.roi_bottom_right_x,
                top_left_x: self.roi_top_left_x,
                top_right_x: self.roi_top_right_x,
                top_y: self.roi_top_y,
            },
            rho_res: self.hough_rho,
            theta_res_deg: self.hough_theta_deg,
            vote_threshold: self.hough_threshold,
            min_segment_len: self.min_segment_len,
            max_line_gap: self.max_line_gap,
            min_abs_slope: self.min_abs_slope,
            horizon_frac: self.horizon_frac,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let check = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(ConfigError::Invalid(msg.into()))
            }
        };
        let frac = |v: f64| (0.0..=1.0).contains(&v);
        check(
            self.animal_classes.iter().all(|c| !c.is_empty()),
            "animal_classes entries must be non-empty",
        )?;
        check(frac(self.min_score), "min_score must lie in [0, 1]")?;
        self.tracker().validate().map_err(ConfigError::Invalid)?;
        check(
            self.min_magnitude >= 0.0,
            "min_magnitude must be non-negative",
        )?;
        check(self.direction_ttl >= 1, "direction_ttl must be at least 1")?;
        check(
            frac(self.toward_min_component),
            "toward_min_component must lie in [0, 1]",
        )?;
        check(self.blur_kernel % 2 == 1, "blur_kernel must be odd")?;
        check(self.blur_sigma > 0.0, "blur_sigma must be positive")?;
        check(
            self.edge_low >= 0.0 && self.edge_low <= self.edge_high,
            "edge thresholds must satisfy 0 <= edge_low <= edge_high",
        )?;
        check(
            [
                self.roi_bottom_left_x,
                self.roi_bottom_right_x,
                self.roi_top_left_x,
                self.roi_top_right_x,
                self.roi_top_y,
                self.horizon_frac,
            ]
            .into_iter()
            .all(frac),
            "roi fractions and horizon_frac must lie in [0, 1]",
        )?;
        check(
            self.roi_bottom_left_x < self.roi_bottom_right_x
                && self.roi_top_left_x < self.roi_top_right_x
                && self.roi_top_y < 1.0,
            "roi corners out of order",
        )?;
        check(
            self.hough_rho > 0.0 && self.hough_theta_deg > 0.0,
            "hough resolutions must be positive",
        )?;
        check(
            self.min_segment_len >= 0.0 && self.min_abs_slope >= 0.0,
            "segment limits must be non-negative",
        )?;
        Ok(())
    }
}

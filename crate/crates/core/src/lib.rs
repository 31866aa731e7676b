//! Vehicle-to-animal collision avoidance engine.
//!
//! Consumes per-frame animal detections and road frames (or precomputed lane
//! files), tracks animals by centroid, estimates their direction of travel and
//! emits STOP alerts when an animal is inside the ego lane or is about to enter
//! it. Also carries the evaluation metrics (AP, PADR, FAR) and a deterministic
//! scenario simulator used to exercise the whole chain without real footage.

pub mod config;
pub mod decision;
pub mod detection_io;
pub mod direction;
pub mod evaluation;
pub mod frame_io;
pub mod geometry;
pub mod lane;
pub mod pipeline;
pub mod sim;
pub mod tracker;

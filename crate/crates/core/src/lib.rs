//! Detection and identity tracking of ground robots from event-camera
//! streams.
//!
//! The pipeline accumulates events into trailing windows, clusters them
//! with DBSCAN (all events, positives only, negatives only), and keeps
//! persistent robot identities with a nearest-neighbour search over a 2-d
//! k-d tree. Headings come from the vector between the positive and the
//! negative cluster centroids. A deterministic arena simulator produces
//! event streams with exact ground truth, and [`metrics`] scores tracker
//! output with precision/recall, MAE and CLEAR MOTA.

pub mod dbscan;
pub mod error;
pub mod event;
pub mod experiment;
pub mod formats;
pub mod homography;
pub mod kdtree;
pub mod metrics;
pub mod render;
pub mod sim;
pub mod tracker;

pub use dbscan::{BBox, Cluster, Clustering, DbscanParams, Label};
pub use error::{Error, Result};
pub use event::{Event, EventWindow, Polarity, SensorGeometry};
pub use homography::Homography;
pub use kdtree::KdTree2;
pub use metrics::{ClusterQualityReport, EvalReport, FrameHypothesis, FrameTruth, MatchConfig};
pub use tracker::{StepResult, Track, TrackerConfig, TrackerState};

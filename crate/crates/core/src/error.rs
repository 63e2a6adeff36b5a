//! Error types, one enum per subsystem plus a crate-level wrapper.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EventError {
    #[error("missing header line `t_us,x,y,p`")]
    MissingHeader,
    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("coordinate out of range at line {line}: ({x}, {y})")]
    CoordinateOutOfRange { line: usize, x: i64, y: i64 },
    #[error("non-monotonic timestamp at line {line}: {current} < {previous}")]
    NonMonotonicTimestamp { line: usize, previous: u64, current: u64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClusterError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("cluster has no members")]
    EmptyCluster,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KdTreeError {
    #[error("duplicate track id {0}")]
    DuplicateId(u64),
    #[error("nearest-neighbour query on an empty tree")]
    EmptyTree,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HeadingError {
    #[error("coincident polarity centroids, heading undefined")]
    DegenerateHeading,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("frame alignment error at index {index}: truth t={truth_t_us} vs hypothesis t={hyp_t_us}")]
    FrameAlignmentError { index: usize, truth_t_us: u64, hyp_t_us: u64 },
    #[error("duplicate id {id} in frame t={t_us}")]
    DuplicateId { t_us: u64, id: u64 },
    #[error("no matched pairs")]
    NoMatches,
    #[error("no matched pairs carry a heading on both sides")]
    NoHeadings,
    #[error("no ground-truth objects")]
    NoGroundTruth,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("robot footprints {a} and {b} overlap at t=0")]
    OverlapAtStart { a: u32, b: u32 },
    #[error("path of robot {robot_id} leaves the mat")]
    PathOutOfBounds { robot_id: u32 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HomographyError {
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),
    #[error("point maps to infinity")]
    PointAtInfinity,
}

/// Errors raised by the CSV readers/writers of tracks, ground truth and
/// correspondence files.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FormatError {
    #[error("{file}: missing or wrong header, expected `{expected}`")]
    BadHeader { file: &'static str, expected: &'static str },
    #[error("{file}: malformed record at line {line}: {reason}")]
    MalformedRecord { file: &'static str, line: usize, reason: String },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("event_core: {0}")]
    Event(#[from] EventError),
    #[error("dbscan: {0}")]
    Cluster(#[from] ClusterError),
    #[error("spatial_index: {0}")]
    KdTree(#[from] KdTreeError),
    #[error("metrics: {0}")]
    Metrics(#[from] MetricsError),
    #[error("simulator: {0}")]
    Sim(#[from] SimError),
    #[error("homography: {0}")]
    Homography(#[from] HomographyError),
    #[error("format: {0}")]
    Format(#[from] FormatError),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

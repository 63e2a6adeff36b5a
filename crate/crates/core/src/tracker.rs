//! Identity tracking over DBSCAN detections.
//!
//! Every window is split by polarity and clustered three times. Full-event
//! cluster centroids are matched to persistent tracks by nearest-neighbour
//! search in a k-d tree: a centroid farther than `sigma_px` from every
//! track starts a new identity, otherwise it overwrites the nearest
//! track's centroid. Polarity centroids are then attached to the nearest
//! track and the heading is the direction from the positive centroid to
//! the negative one.
//!
//! Tracks are never deleted (unless an explicit `max_age_us` is set), so a
//! robot that stops producing events keeps its id and last position.

use std::collections::{BTreeMap, HashSet};

use crate::dbscan::{self, BBox, Clustering, DbscanParams, Point};
use crate::error::{ClusterError, HeadingError};
use crate::event::{split_by_polarity, Event, EventWindow, SensorGeometry};
use crate::kdtree::{sq_dist, KdTree2};

pub const DEFAULT_SIGMA_PX: f64 = 30.0;
pub const DEFAULT_EPS_PX: f64 = 15.0;
pub const DEFAULT_MIN_PTS_FULL: usize = 225;
pub const DEFAULT_MIN_PTS_PARTIAL_FULL_SPEED: usize = 45;
pub const DEFAULT_MIN_PTS_PARTIAL_HALF_SPEED: usize = 35;

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    /// New-robot distance threshold, roughly the chassis width in pixels.
    pub sigma_px: f64,
    pub params_full: DbscanParams,
    pub params_partial: DbscanParams,
    pub geometry: SensorGeometry,
    /// Drop tracks not refreshed for this long. `None` keeps them forever.
    pub max_age_us: Option<u64>,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            sigma_px: DEFAULT_SIGMA_PX,
            params_full: DbscanParams { eps: DEFAULT_EPS_PX, min_pts: DEFAULT_MIN_PTS_FULL },
            params_partial: DbscanParams { eps: DEFAULT_EPS_PX, min_pts: DEFAULT_MIN_PTS_PARTIAL_FULL_SPEED },
            geometry: SensorGeometry::default(),
            max_age_us: None,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<(), ClusterError> {
        if !(self.sigma_px.is_finite() && self.sigma_px > 0.0) {
            return Err(ClusterError::InvalidParameter(format!("sigma_px must be positive, got {}", self.sigma_px)));
        }
        self.params_full.validate()?;
        self.params_partial.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: u64,
    pub centroid: (f64, f64),
    pub pos_centroid: Option<(f64, f64)>,
    pub neg_centroid: Option<(f64, f64)>,
    /// Heading in degrees, `[-180, 180)`; 0 points to +x, 90 to +y (down).
    pub theta_deg: Option<f64>,
    pub last_seen_us: u64,
    pub hits: u64,
}

/// One full-event cluster matched to a track during a step.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub track_id: u64,
    pub centroid: (f64, f64),
    pub theta_deg: Option<f64>,
    pub cluster_size: usize,
    pub bbox: BBox,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepResult {
    pub t_us: u64,
    pub detections: Vec<Detection>,
    pub created_ids: Vec<u64>,
    /// Number of full / positive / negative clusters found in the window.
    pub n_full_clusters: usize,
    pub n_pos_clusters: usize,
    pub n_neg_clusters: usize,
}

impl StepResult {
    pub fn detection_for(&self, track_id: u64) -> Option<&Detection> {
        self.detections.iter().find(|d| d.track_id == track_id)
    }
}

#[derive(Debug, Clone)]
pub struct TrackerState {
    tracks: BTreeMap<u64, Track>,
    next_id: u64,
    index: KdTree2,
    /// Tracks already matched or created in the current step.
    claimed: HashSet<u64>,
}

impl Default for TrackerState {
    fn default() -> Self {
        Self { tracks: BTreeMap::new(), next_id: 1, index: KdTree2::new(), claimed: HashSet::new() }
    }
}

impl PartialEq for TrackerState {
    fn eq(&self, other: &Self) -> bool {
        self.tracks == other.tracks && self.next_id == other.next_id
    }
}

impl TrackerState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn tracks(&self) -> impl Iterator<Item = &Track> {
        self.tracks.values()
    }

    pub fn track(&self, id: u64) -> Option<&Track> {
        self.tracks.get(&id)
    }

    pub fn len(&self) -> usize {
        self.tracks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tracks.is_empty()
    }

    pub fn next_id(&self) -> u64 {
        self.next_id
    }

    pub fn index(&self) -> &KdTree2 {
        &self.index
    }

    /// Processes one window. Tracks without a matching cluster are left
    /// exactly as they were.
    pub fn step(&mut self, window: &EventWindow<'_>, config: &TrackerConfig) -> Result<StepResult, ClusterError> {
        config.validate()?;
        let split = split_by_polarity(window);
        let (full, (pos, neg)) = rayon::join(
            || cluster_events(&split.all, config.params_full),
            || {
                rayon::join(
                    || cluster_events(&split.positives, config.params_partial),
                    || cluster_events(&split.negatives, config.params_partial),
                )
            },
        );
        let (full, pos, neg) = (full?, pos?, neg?);

        self.claimed.clear();
        let t_us = window.t_end_us;
        let mut result = StepResult {
            t_us,
            n_full_clusters: full.clusters.len(),
            n_pos_clusters: pos.clusters.len(),
            n_neg_clusters: neg.clusters.len(),
            ..StepResult::default()
        };

        let mut order: Vec<usize> = (0..full.clusters.len()).collect();
        order.sort_by(|&a, &b| {
            let (ca, cb) = (&full.clusters[a], &full.clusters[b]);
            cb.size()
                .cmp(&ca.size())
                .then(ca.centroid.0.total_cmp(&cb.centroid.0))
                .then(ca.centroid.1.total_cmp(&cb.centroid.1))
        });
        for k in order {
            let c = &full.clusters[k];
            let (track_id, created) = self.match_or_create(c.centroid, config.sigma_px, t_us);
            if created {
                result.created_ids.push(track_id);
            }
            result.detections.push(Detection {
                track_id,
                centroid: c.centroid,
                theta_deg: None,
                cluster_size: c.size(),
                bbox: c.bbox,
            });
        }
        self.rebuild_index();

        let pos_c: Vec<(f64, f64)> = pos.clusters.iter().map(|c| c.centroid).collect();
        let neg_c: Vec<(f64, f64)> = neg.clusters.iter().map(|c| c.centroid).collect();
        let touched = self.associate_polarity(&pos_c, &neg_c, config.sigma_px);
        for id in touched {
            let t = self.tracks.get_mut(&id).expect("associated track exists");
            if let (Some(p), Some(n)) = (t.pos_centroid, t.neg_centroid) {
                if let Ok(theta) = heading(p, n) {
                    t.theta_deg = Some(theta);
                }
            }
        }
        for d in &mut result.detections {
            d.theta_deg = self.tracks[&d.track_id].theta_deg;
        }

        if let Some(max_age) = config.max_age_us {
            let before = self.tracks.len();
            self.tracks.retain(|_, t| t_us.saturating_sub(t.last_seen_us) <= max_age);
            if self.tracks.len() != before {
                self.rebuild_index();
            }
        }
        Ok(result)
    }

    /// Matches a full-cluster centroid to the nearest unclaimed track within
    /// `sigma_px`, or mints a new id. Returns `(track_id, created)`.
    pub fn match_or_create(&mut self, centroid: (f64, f64), sigma_px: f64, t_us: u64) -> (u64, bool) {
        let claimed = &self.claimed;
        let nearest = self.index.nearest_where(centroid.0, centroid.1, |id| !claimed.contains(&id));
        match nearest {
            Some(n) if n.distance <= sigma_px => {
                let t = self.tracks.get_mut(&n.id).expect("indexed track exists");
                t.centroid = centroid;
                t.last_seen_us = t_us;
                t.hits += 1;
                self.claimed.insert(n.id);
                (n.id, false)
            }
            _ => {
                let id = self.next_id;
                self.next_id += 1;
                self.tracks.insert(
                    id,
                    Track {
                        id,
                        centroid,
                        pos_centroid: None,
                        neg_centroid: None,
                        theta_deg: None,
                        last_seen_us: t_us,
                        hits: 1,
                    },
                );
                self.index.insert(centroid.0, centroid.1, id).expect("fresh id is unique");
                self.claimed.insert(id);
                (id, true)
            }
        }
    }

    /// Attaches each polarity centroid to its nearest track within
    /// `sigma_px`. Per track and polarity only the closest centroid wins.
    /// Returns the ids of tracks that received at least one centroid.
    pub fn associate_polarity(&mut self, pos: &[(f64, f64)], neg: &[(f64, f64)], sigma_px: f64) -> Vec<u64> {
        let best_pos = self.closest_per_track(pos, sigma_px);
        let best_neg = self.closest_per_track(neg, sigma_px);
        let mut touched: Vec<u64> = best_pos.keys().chain(best_neg.keys()).copied().collect();
        touched.sort_unstable();
        touched.dedup();
        for (id, (_, c)) in best_pos {
            self.tracks.get_mut(&id).expect("track exists").pos_centroid = Some(c);
        }
        for (id, (_, c)) in best_neg {
            self.tracks.get_mut(&id).expect("track exists").neg_centroid = Some(c);
        }
        touched
    }

    fn closest_per_track(&self, centroids: &[(f64, f64)], sigma_px: f64) -> BTreeMap<u64, (f64, (f64, f64))> {
        let mut best: BTreeMap<u64, (f64, (f64, f64))> = BTreeMap::new();
        for &c in centroids {
            let Ok(n) = self.index.nearest(c.0, c.1) else { break };
            if n.distance > sigma_px {
                continue;
            }
            let d2 = sq_dist(c, n.point);
            match best.get(&n.id) {
                Some(&(bd, _)) if bd <= d2 => {}
                _ => {
                    best.insert(n.id, (d2, c));
                }
            }
        }
        best
    }

    fn rebuild_index(&mut self) {
        let pts: Vec<(f64, f64, u64)> = self.tracks.values().map(|t| (t.centroid.0, t.centroid.1, t.id)).collect();
        self.index = KdTree2::rebuild(&pts).expect("track ids are unique");
    }
}

/// Heading from the positive-event centroid towards the negative-event
/// centroid, in degrees within `[-180, 180)`.
pub fn heading(pos: (f64, f64), neg: (f64, f64)) -> Result<f64, HeadingError> {
    let dx = neg.0 - pos.0;
    let dy = neg.1 - pos.1;
    if dx == 0.0 && dy == 0.0 {
        return Err(HeadingError::DegenerateHeading);
    }
    let deg = dy.atan2(dx).to_degrees();
    Ok(if deg >= 180.0 { deg - 360.0 } else { deg })
}

fn cluster_events(events: &[Event], params: DbscanParams) -> Result<Clustering, ClusterError> {
    let pts: Vec<Point> = events.iter().map(Event::xy).collect();
    dbscan::cluster(&pts, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::Polarity;

    /// Dense square blob of `side x side` pixels, two events per pixel.
    fn blob(cx: u16, cy: u16, side: u16, polarity: Polarity, t: u64, out: &mut Vec<Event>) {
        let h = side / 2;
        for y in cy - h..cy - h + side {
            for x in cx - h..cx - h + side {
                out.push(Event::new(t, x, y, polarity));
                out.push(Event::new(t, x, y, polarity));
            }
        }
    }

    fn config(sigma: f64) -> TrackerConfig {
        TrackerConfig {
            sigma_px: sigma,
            params_full: DbscanParams { eps: 3.0, min_pts: 20 },
            params_partial: DbscanParams { eps: 3.0, min_pts: 10 },
            ..TrackerConfig::default()
        }
    }

    fn run(state: &mut TrackerState, events: &[Event], t: u64, cfg: &TrackerConfig) -> StepResult {
        state.step(&EventWindow::new(t, 100_000, events), cfg).unwrap()
    }

    #[test]
    fn heading_examples() {
        assert_eq!(heading((0.0, 0.0), (1.0, 0.0)).unwrap(), 0.0);
        assert_eq!(heading((0.0, 0.0), (0.0, 1.0)).unwrap(), 90.0);
        assert_eq!(heading((2.0, 2.0), (1.0, 1.0)).unwrap(), -135.0);
        assert_eq!(heading((0.0, 0.0), (-1.0, 0.0)).unwrap(), -180.0);
        assert_eq!(heading((1.0, 1.0), (1.0, 1.0)), Err(HeadingError::DegenerateHeading));
    }

    #[test]
    fn match_or_create_branches() {
        let mut s = TrackerState::new();
        assert_eq!(s.match_or_create((50.0, 50.0), 30.0, 0), (1, true));

        let mut s = TrackerState::new();
        s.match_or_create((0.0, 0.0), 30.0, 0);
        s.rebuild_index();
        s.claimed.clear();
        assert_eq!(s.match_or_create((0.0, 29.0), 30.0, 1), (1, false));
        assert_eq!(s.track(1).unwrap().centroid, (0.0, 29.0));

        let mut s = TrackerState::new();
        s.match_or_create((0.0, 0.0), 30.0, 0);
        s.claimed.clear();
        assert_eq!(s.match_or_create((0.0, 31.0), 30.0, 1), (2, true));
        assert_eq!(s.next_id(), 3);
    }

    #[test]
    fn claimed_track_is_not_reused_within_a_step() {
        let mut s = TrackerState::new();
        s.match_or_create((0.0, 0.0), 30.0, 0);
        s.claimed.clear();
        assert_eq!(s.match_or_create((1.0, 0.0), 30.0, 1), (1, false));
        assert_eq!(s.match_or_create((2.0, 0.0), 30.0, 1), (2, true));
    }

    #[test]
    fn empty_window_leaves_state_untouched() {
        let cfg = config(30.0);
        let mut s = TrackerState::new();
        let mut ev = Vec::new();
        blob(100, 100, 6, Polarity::Positive, 0, &mut ev);
        blob(300, 200, 6, Polarity::Negative, 0, &mut ev);
        run(&mut s, &ev, 1000, &cfg);
        assert_eq!(s.len(), 2);
        let before = s.clone();
        for k in 0..5 {
            let r = run(&mut s, &[], 2000 + k, &cfg);
            assert!(r.detections.is_empty() && r.created_ids.is_empty());
        }
        assert_eq!(s, before);
    }

    #[test]
    fn first_cluster_creates_track_one() {
        let cfg = config(30.0);
        let mut s = TrackerState::new();
        let mut ev = Vec::new();
        blob(100, 100, 5, Polarity::Positive, 0, &mut ev);
        let r = run(&mut s, &ev, 10, &cfg);
        assert_eq!(r.created_ids, vec![1]);
        assert_eq!(s.track(1).unwrap().centroid, (100.0, 100.0));
        assert_eq!(s.next_id(), 2);
    }

    #[test]
    fn update_and_discover_in_one_step() {
        let cfg = config(30.0);
        let mut s = TrackerState::new();
        let mut ev = Vec::new();
        blob(100, 100, 5, Polarity::Positive, 0, &mut ev);
        run(&mut s, &ev, 10, &cfg);

        let mut ev = Vec::new();
        blob(105, 100, 5, Polarity::Positive, 20, &mut ev);
        blob(200, 200, 5, Polarity::Positive, 20, &mut ev);
        let r = run(&mut s, &ev, 30, &cfg);
        assert_eq!(r.created_ids, vec![2]);
        assert_eq!(s.track(1).unwrap().centroid, (105.0, 100.0));
        assert_eq!(s.track(1).unwrap().last_seen_us, 30);
        assert_eq!(s.track(2).unwrap().centroid, (200.0, 200.0));
        assert_eq!(s.index().len(), 2);
    }

    #[test]
    fn larger_cluster_claims_first() {
        let cfg = config(30.0);
        let mut s = TrackerState::new();
        s.match_or_create((100.0, 100.0), 30.0, 0);
        s.rebuild_index();
        let mut ev = Vec::new();
        blob(110, 100, 4, Polarity::Positive, 0, &mut ev);
        blob(95, 100, 5, Polarity::Positive, 0, &mut ev);
        let r = run(&mut s, &ev, 10, &cfg);
        // The 5x5 blob is processed first even though the 4x4 one is listed first.
        assert_eq!(r.detections[0].track_id, 1);
        assert_eq!(r.detections[0].cluster_size, 50);
        assert_eq!(s.track(1).unwrap().centroid, (95.0, 100.0));
        assert_eq!(r.created_ids, vec![2]);
    }

    #[test]
    fn polarity_association_examples() {
        let mut s = TrackerState::new();
        s.match_or_create((100.0, 100.0), 30.0, 0);
        s.rebuild_index();
        let touched = s.associate_polarity(&[(95.0, 100.0)], &[(110.0, 100.0)], 30.0);
        assert_eq!(touched, vec![1]);
        let t = s.track(1).unwrap();
        assert_eq!((t.pos_centroid, t.neg_centroid), (Some((95.0, 100.0)), Some((110.0, 100.0))));

        assert!(s.associate_polarity(&[(300.0, 300.0)], &[], 30.0).is_empty());
        assert_eq!(s.track(1).unwrap().pos_centroid, Some((95.0, 100.0)));

        s.associate_polarity(&[(112.0, 100.0), (105.0, 100.0)], &[], 30.0);
        assert_eq!(s.track(1).unwrap().pos_centroid, Some((105.0, 100.0)));
    }

    #[test]
    fn heading_needs_both_polarities() {
        let cfg = config(30.0);
        let mut s = TrackerState::new();
        let mut ev = Vec::new();
        blob(100, 100, 6, Polarity::Positive, 0, &mut ev);
        run(&mut s, &ev, 10, &cfg);
        assert!(s.track(1).unwrap().theta_deg.is_none());

        // Trailing positive band at x=97, leading negative band at x=102.
        let mut ev = Vec::new();
        blob(97, 100, 5, Polarity::Positive, 20, &mut ev);
        blob(102, 100, 5, Polarity::Negative, 20, &mut ev);
        let r = run(&mut s, &ev, 30, &cfg);
        assert_eq!(r.detections.len(), 1);
        assert_eq!(r.detections[0].theta_deg, Some(0.0));
        assert_eq!(s.track(1).unwrap().theta_deg, Some(0.0));
    }

    #[test]
    fn max_age_purges_when_enabled() {
        let mut cfg = config(30.0);
        cfg.max_age_us = Some(50);
        let mut s = TrackerState::new();
        let mut ev = Vec::new();
        blob(100, 100, 5, Polarity::Positive, 0, &mut ev);
        run(&mut s, &ev, 10, &cfg);
        run(&mut s, &[], 40, &cfg);
        assert_eq!(s.len(), 1);
        run(&mut s, &[], 100, &cfg);
        assert!(s.is_empty());
        assert_eq!(s.next_id(), 2);
    }

    #[test]
    fn invalid_sigma_rejected() {
        let mut s = TrackerState::new();
        let cfg = config(0.0);
        assert!(s.step(&EventWindow::empty(1, 1), &cfg).is_err());
    }
}

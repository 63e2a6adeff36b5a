//! Detection and tracking evaluation.
//!
//! Frames of ground truth and tracker hypotheses are put in correspondence
//! following the CLEAR MOT procedure: last frame's pairs are carried over
//! while they stay within the match distance, remaining pairs are matched
//! greedily by ascending distance, and a ground-truth object that changes
//! hypothesis id counts as one mismatch. Precision, recall, distance and
//! heading MAE and MOTA are computed from that correspondence.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::MetricsError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthObject {
    pub gt_id: u64,
    pub x_px: f64,
    pub y_px: f64,
    pub theta_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameTruth {
    pub t_us: u64,
    pub objects: Vec<TruthObject>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypObject {
    pub track_id: u64,
    pub x_px: f64,
    pub y_px: f64,
    pub theta_deg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameHypothesis {
    pub t_us: u64,
    pub objects: Vec<HypObject>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchConfig {
    /// Maximum truth-to-hypothesis distance for a correct detection.
    pub t_match_px: f64,
    pub px_per_cm: f64,
    /// Frames before this timestamp are ignored (tracker warm-up).
    pub eval_start_us: u64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self { t_match_px: 30.0, px_per_cm: 2.46, eval_start_us: 0 }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<(), MetricsError> {
        if !(self.t_match_px > 0.0 && self.t_match_px.is_finite()) {
            return Err(MetricsError::InvalidParameter(format!("t_match_px must be positive, got {}", self.t_match_px)));
        }
        if !(self.px_per_cm > 0.0 && self.px_per_cm.is_finite()) {
            return Err(MetricsError::InvalidParameter(format!("px_per_cm must be positive, got {}", self.px_per_cm)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchedPair {
    pub t_us: u64,
    pub gt_id: u64,
    pub track_id: u64,
    pub gt_xy: (f64, f64),
    pub hyp_xy: (f64, f64),
    pub gt_theta_deg: f64,
    pub hyp_theta_deg: Option<f64>,
}

impl MatchedPair {
    pub fn distance_px(&self) -> f64 {
        (self.gt_xy.0 - self.hyp_xy.0).hypot(self.gt_xy.1 - self.hyp_xy.1)
    }
}

/// Per-frame CLEAR event counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FrameCounts {
    pub t_us: u64,
    /// Ground-truth objects in the frame.
    pub gt: usize,
    pub hyp: usize,
    pub tp: usize,
    pub fp: usize,
    pub misses: usize,
    pub mismatches: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Correspondence {
    pub frames: Vec<FrameCounts>,
    pub matches: Vec<MatchedPair>,
}

/// Summed counts over a sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Totals {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub mismatches: usize,
    pub gt_total: usize,
}

impl Correspondence {
    pub fn totals(&self) -> Totals {
        self.frames.iter().fold(Totals::default(), |t, f| Totals {
            tp: t.tp + f.tp,
            fp: t.fp + f.fp,
            fn_: t.fn_ + f.misses,
            mismatches: t.mismatches + f.mismatches,
            gt_total: t.gt_total + f.gt,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub mae_distance_cm: Option<f64>,
    pub mae_theta_deg: Option<f64>,
    pub mota: Option<f64>,
    pub misses: usize,
    pub false_positives: usize,
    pub mismatches: usize,
    pub gt_total: usize,
    pub n_frames: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterQualityReport {
    pub n_avg_clusters: f64,
    pub a_ratio: f64,
}

/// Puts truth and hypothesis frames in correspondence. Both sequences must
/// carry the same timestamps in the same order.
pub fn correspond(
    truth: &[FrameTruth],
    hyp: &[FrameHypothesis],
    cfg: &MatchConfig,
) -> Result<Correspondence, MetricsError> {
    cfg.validate()?;
    if truth.len() != hyp.len() {
        let index = truth.len().min(hyp.len());
        return Err(MetricsError::FrameAlignmentError {
            index,
            truth_t_us: truth.get(index).map_or(u64::MAX, |f| f.t_us),
            hyp_t_us: hyp.get(index).map_or(u64::MAX, |f| f.t_us),
        });
    }
    let mut out = Correspondence::default();
    let mut previous: Vec<(u64, u64)> = Vec::new();
    let mut last_assigned: HashMap<u64, u64> = HashMap::new();

    for (index, (tf, hf)) in truth.iter().zip(hyp).enumerate() {
        if tf.t_us != hf.t_us {
            return Err(MetricsError::FrameAlignmentError { index, truth_t_us: tf.t_us, hyp_t_us: hf.t_us });
        }
        check_unique(tf.t_us, tf.objects.iter().map(|o| o.gt_id))?;
        check_unique(hf.t_us, hf.objects.iter().map(|o| o.track_id))?;
        if tf.t_us < cfg.eval_start_us {
            continue;
        }

        let gt_pos: HashMap<u64, usize> = tf.objects.iter().enumerate().map(|(i, o)| (o.gt_id, i)).collect();
        let hyp_pos: HashMap<u64, usize> = hf.objects.iter().enumerate().map(|(i, o)| (o.track_id, i)).collect();
        let dist = |g: usize, h: usize| {
            let (a, b) = (&tf.objects[g], &hf.objects[h]);
            (a.x_px - b.x_px).hypot(a.y_px - b.y_px)
        };

        let mut pairs: Vec<(usize, usize)> = Vec::new();
        let mut used_g = HashSet::new();
        let mut used_h = HashSet::new();
        for &(g_id, h_id) in &previous {
            if let (Some(&g), Some(&h)) = (gt_pos.get(&g_id), hyp_pos.get(&h_id)) {
                if dist(g, h) <= cfg.t_match_px {
                    pairs.push((g, h));
                    used_g.insert(g);
                    used_h.insert(h);
                }
            }
        }

        let mut candidates: Vec<(f64, u64, u64, usize, usize)> = Vec::new();
        for (g, go) in tf.objects.iter().enumerate() {
            if used_g.contains(&g) {
                continue;
            }
            for (h, ho) in hf.objects.iter().enumerate() {
                if used_h.contains(&h) {
                    continue;
                }
                let d = dist(g, h);
                if d <= cfg.t_match_px {
                    candidates.push((d, go.gt_id, ho.track_id, g, h));
                }
            }
        }
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut mismatches = 0;
        for (_, g_id, h_id, g, h) in candidates {
            if used_g.contains(&g) || used_h.contains(&h) {
                continue;
            }
            used_g.insert(g);
            used_h.insert(h);
            pairs.push((g, h));
            if last_assigned.get(&g_id).is_some_and(|&prev| prev != h_id) {
                mismatches += 1;
            }
        }

        pairs.sort_by_key(|&(g, _)| tf.objects[g].gt_id);
        previous.clear();
        for &(g, h) in &pairs {
            let (go, ho) = (&tf.objects[g], &hf.objects[h]);
            last_assigned.insert(go.gt_id, ho.track_id);
            previous.push((go.gt_id, ho.track_id));
            out.matches.push(MatchedPair {
                t_us: tf.t_us,
                gt_id: go.gt_id,
                track_id: ho.track_id,
                gt_xy: (go.x_px, go.y_px),
                hyp_xy: (ho.x_px, ho.y_px),
                gt_theta_deg: go.theta_deg,
                hyp_theta_deg: ho.theta_deg,
            });
        }
        out.frames.push(FrameCounts {
            t_us: tf.t_us,
            gt: tf.objects.len(),
            hyp: hf.objects.len(),
            tp: pairs.len(),
            fp: hf.objects.len() - pairs.len(),
            misses: tf.objects.len() - pairs.len(),
            mismatches,
        });
    }
    Ok(out)
}

fn check_unique(t_us: u64, ids: impl Iterator<Item = u64>) -> Result<(), MetricsError> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(MetricsError::DuplicateId { t_us, id });
        }
    }
    Ok(())
}

/// `TP / (TP + FP)` and `TP / (TP + FN)`; an empty denominator gives 1.0.
pub fn precision_recall(tp: usize, fp: usize, fn_: usize) -> (f64, f64) {
    let ratio = |num: usize, den: usize| if den == 0 { 1.0 } else { num as f64 / den as f64 };
    (ratio(tp, tp + fp), ratio(tp, tp + fn_))
}

/// Mean Euclidean distance over matched pairs, in centimetres.
pub fn mae_distance(matches: &[MatchedPair], px_per_cm: f64) -> Result<f64, MetricsError> {
    if matches.is_empty() {
        return Err(MetricsError::NoMatches);
    }
    let sum: f64 = matches.iter().map(MatchedPair::distance_px).sum();
    Ok(sum / matches.len() as f64 / px_per_cm)
}

/// Absolute angular difference wrapped into `[0, 180]`.
pub fn wrapped_abs_diff_deg(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    if d > 180.0 {
        360.0 - d
    } else {
        d
    }
}

/// Mean wrapped heading error over pairs where the hypothesis has a heading.
pub fn mae_theta(matches: &[MatchedPair]) -> Result<f64, MetricsError> {
    let errs: Vec<f64> = matches
        .iter()
        .filter_map(|m| m.hyp_theta_deg.map(|h| wrapped_abs_diff_deg(h, m.gt_theta_deg)))
        .collect();
    if errs.is_empty() {
        return Err(MetricsError::NoHeadings);
    }
    Ok(errs.iter().sum::<f64>() / errs.len() as f64)
}

/// `1 - sum(misses + fp + mismatches) / sum(gt)`.
pub fn mota(frames: &[FrameCounts]) -> Result<f64, MetricsError> {
    let gt: usize = frames.iter().map(|f| f.gt).sum();
    if gt == 0 {
        return Err(MetricsError::NoGroundTruth);
    }
    let errors: usize = frames.iter().map(|f| f.misses + f.fp + f.mismatches).sum();
    Ok(1.0 - errors as f64 / gt as f64)
}

/// Mean over frames of clusters detected per robot.
pub fn n_avg_clusters(cluster_counts: &[usize], n_robots: usize) -> Result<f64, MetricsError> {
    if n_robots == 0 {
        return Err(MetricsError::InvalidParameter("n_robots must be at least 1".into()));
    }
    if cluster_counts.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = cluster_counts.iter().map(|&c| c as f64 / n_robots as f64).sum();
    Ok(sum / cluster_counts.len() as f64)
}

/// Detected bounding-box area over the true chassis area.
pub fn a_ratio(detected_area_px2: f64, actual_area_px2: f64) -> Result<f64, MetricsError> {
    if !(actual_area_px2 > 0.0) {
        return Err(MetricsError::InvalidParameter(format!("actual area must be positive, got {actual_area_px2}")));
    }
    Ok(detected_area_px2 / actual_area_px2)
}

/// Correspondence plus every detection and tracking metric.
pub fn evaluate(truth: &[FrameTruth], hyp: &[FrameHypothesis], cfg: &MatchConfig) -> Result<EvalReport, MetricsError> {
    let corr = correspond(truth, hyp, cfg)?;
    Ok(report_from(&corr, cfg))
}

pub fn report_from(corr: &Correspondence, cfg: &MatchConfig) -> EvalReport {
    let t = corr.totals();
    let (precision, recall) = precision_recall(t.tp, t.fp, t.fn_);
    EvalReport {
        precision,
        recall,
        tp: t.tp,
        fp: t.fp,
        fn_: t.fn_,
        mae_distance_cm: mae_distance(&corr.matches, cfg.px_per_cm).ok(),
        mae_theta_deg: mae_theta(&corr.matches).ok(),
        mota: mota(&corr.frames).ok(),
        misses: t.fn_,
        false_positives: t.fp,
        mismatches: t.mismatches,
        gt_total: t.gt_total,
        n_frames: corr.frames.len(),
    }
}

/// Aligns hypothesis frames onto the truth timeline: truth timestamps with
/// no hypothesis become empty frames. A hypothesis timestamp absent from
/// the truth is an alignment error.
pub fn align_to_truth(truth: &[FrameTruth], hyp: Vec<FrameHypothesis>) -> Result<Vec<FrameHypothesis>, MetricsError> {
    let index_of: BTreeMap<u64, usize> = truth.iter().enumerate().map(|(i, f)| (f.t_us, i)).collect();
    let mut out: Vec<FrameHypothesis> =
        truth.iter().map(|f| FrameHypothesis { t_us: f.t_us, objects: Vec::new() }).collect();
    for (i, h) in hyp.into_iter().enumerate() {
        let Some(&k) = index_of.get(&h.t_us) else {
            return Err(MetricsError::FrameAlignmentError { index: i, truth_t_us: u64::MAX, hyp_t_us: h.t_us });
        };
        out[k].objects.extend(h.objects);
    }
    Ok(out)
}

//! CSV formats for tracker output and ground truth.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::FormatError;
use crate::metrics::{FrameHypothesis, FrameTruth, HypObject, TruthObject};
use crate::tracker::{StepResult, TrackerState};

pub const TRACKS_CSV_HEADER: &str = "t_us,track_id,x_px,y_px,theta_deg,cluster_size";
pub const GT_CSV_HEADER: &str = "t_us,robot_id,x_px,y_px,theta_deg";

/// One row of the tracks CSV. `cluster_size` is 0 for a track that was
/// not observed in this window and is reported at its held position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackRow {
    pub t_us: u64,
    pub track_id: u64,
    pub x_px: f64,
    pub y_px: f64,
    pub theta_deg: Option<f64>,
    pub cluster_size: usize,
}

/// Rows for every live track after a step, in id order.
pub fn track_rows(result: &StepResult, state: &TrackerState) -> Vec<TrackRow> {
    state
        .tracks()
        .map(|t| TrackRow {
            t_us: result.t_us,
            track_id: t.id,
            x_px: t.centroid.0,
            y_px: t.centroid.1,
            theta_deg: t.theta_deg,
            cluster_size: result.detection_for(t.id).map_or(0, |d| d.cluster_size),
        })
        .collect()
}

pub fn write_track_row(out: &mut String, r: &TrackRow) {
    let theta = r.theta_deg.map(|t| t.to_string()).unwrap_or_default();
    let _ = writeln!(out, "{},{},{},{},{},{}", r.t_us, r.track_id, r.x_px, r.y_px, theta, r.cluster_size);
}

pub fn write_tracks_csv(rows: &[TrackRow]) -> String {
    let mut out = String::with_capacity(32 + rows.len() * 48);
    out.push_str(TRACKS_CSV_HEADER);
    out.push('\n');
    for r in rows {
        write_track_row(&mut out, r);
    }
    out
}

pub fn parse_tracks_csv(text: &str) -> Result<Vec<TrackRow>, FormatError> {
    const FILE: &str = "tracks";
    let fields = records(text, FILE, TRACKS_CSV_HEADER, 6)?;
    fields
        .into_iter()
        .map(|(line, f)| {
            let bad = |reason: String| FormatError::MalformedRecord { file: FILE, line, reason };
            Ok(TrackRow {
                t_us: num(f[0], &bad)?,
                track_id: num(f[1], &bad)?,
                x_px: num(f[2], &bad)?,
                y_px: num(f[3], &bad)?,
                theta_deg: if f[4].is_empty() { None } else { Some(num(f[4], &bad)?) },
                cluster_size: num(f[5], &bad)?,
            })
        })
        .collect()
}

/// Groups rows into one hypothesis frame per distinct timestamp.
pub fn rows_to_hypotheses(rows: &[TrackRow]) -> Vec<FrameHypothesis> {
    let mut frames: BTreeMap<u64, Vec<HypObject>> = BTreeMap::new();
    for r in rows {
        frames.entry(r.t_us).or_default().push(HypObject {
            track_id: r.track_id,
            x_px: r.x_px,
            y_px: r.y_px,
            theta_deg: r.theta_deg,
        });
    }
    frames.into_iter().map(|(t_us, objects)| FrameHypothesis { t_us, objects }).collect()
}

pub fn write_gt_csv(frames: &[FrameTruth]) -> String {
    let mut out = String::with_capacity(32 + frames.len() * 40);
    out.push_str(GT_CSV_HEADER);
    out.push('\n');
    for f in frames {
        for o in &f.objects {
            let _ = writeln!(out, "{},{},{},{},{}", f.t_us, o.gt_id, o.x_px, o.y_px, o.theta_deg);
        }
    }
    out
}

/// Parses ground truth into frames, one per distinct timestamp.
pub fn parse_gt_csv(text: &str) -> Result<Vec<FrameTruth>, FormatError> {
    const FILE: &str = "ground truth";
    let mut frames: BTreeMap<u64, Vec<TruthObject>> = BTreeMap::new();
    for (line, f) in records(text, FILE, GT_CSV_HEADER, 5)? {
        let bad = |reason: String| FormatError::MalformedRecord { file: FILE, line, reason };
        let t_us: u64 = num(f[0], &bad)?;
        frames.entry(t_us).or_default().push(TruthObject {
            gt_id: num(f[1], &bad)?,
            x_px: num(f[2], &bad)?,
            y_px: num(f[3], &bad)?,
            theta_deg: num(f[4], &bad)?,
        });
    }
    Ok(frames.into_iter().map(|(t_us, objects)| FrameTruth { t_us, objects }).collect())
}

fn records<'a>(
    text: &'a str,
    file: &'static str,
    header: &'static str,
    width: usize,
) -> Result<Vec<(usize, Vec<&'a str>)>, FormatError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == header => {}
        _ => return Err(FormatError::BadHeader { file, expected: header }),
    }
    let mut out = Vec::new();
    for (i, l) in lines {
        let l = l.trim();
        if l.is_empty() {
            continue;
        }
        let f: Vec<&str> = l.split(',').map(str::trim).collect();
        if f.len() != width {
            return Err(FormatError::MalformedRecord {
                file,
                line: i + 1,
                reason: format!("expected {width} fields, found {}", f.len()),
            });
        }
        out.push((i + 1, f));
    }
    Ok(out)
}

fn num<T: std::str::FromStr>(s: &str, bad: &impl Fn(String) -> FormatError) -> Result<T, FormatError>
where
    T::Err: std::fmt::Display,
{
    s.parse::<T>().map_err(|e| bad(format!("`{s}`: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tracks_round_trip() {
        let rows = vec![
            TrackRow { t_us: 41_667, track_id: 1, x_px: 100.5, y_px: 99.25, theta_deg: None, cluster_size: 300 },
            TrackRow { t_us: 41_667, track_id: 2, x_px: 0.1, y_px: 7.0, theta_deg: Some(-135.0), cluster_size: 0 },
        ];
        let text = write_tracks_csv(&rows);
        assert!(text.starts_with("t_us,track_id,x_px,y_px,theta_deg,cluster_size\n41667,1,100.5,99.25,,300\n"));
        assert_eq!(parse_tracks_csv(&text).unwrap(), rows);
        let h = rows_to_hypotheses(&rows);
        assert_eq!(h.len(), 1);
        assert_eq!(h[0].objects.len(), 2);
    }

    #[test]
    fn gt_round_trip() {
        let frames = vec![
            FrameTruth { t_us: 10, objects: vec![TruthObject { gt_id: 1, x_px: 1.5, y_px: 2.0, theta_deg: 90.0 }] },
            FrameTruth { t_us: 20, objects: vec![TruthObject { gt_id: 1, x_px: 1.75, y_px: 2.0, theta_deg: 89.5 }] },
        ];
        let text = write_gt_csv(&frames);
        assert_eq!(parse_gt_csv(&text).unwrap(), frames);
    }

    #[test]
    fn bad_inputs() {
        assert!(matches!(parse_tracks_csv("x\n"), Err(FormatError::BadHeader { .. })));
        assert!(matches!(
            parse_gt_csv("t_us,robot_id,x_px,y_px,theta_deg\n1,2,3\n"),
            Err(FormatError::MalformedRecord { line: 2, .. })
        ));
        assert!(matches!(
            parse_tracks_csv("t_us,track_id,x_px,y_px,theta_deg,cluster_size\n1,a,3,4,,5\n"),
            Err(FormatError::MalformedRecord { line: 2, .. })
        ));
        assert_eq!(parse_tracks_csv(&write_tracks_csv(&[])).unwrap(), vec![]);
    }
}

//! Run configuration, the windowed tracking pipeline, scenario evaluation
//! and parameter sweeps.

use std::io::Write;
use std::str::FromStr;
use std::sync::mpsc::sync_channel;
use std::time::Instant;

use rayon::prelude::*;

use crate::dbscan::DbscanParams;
use crate::error::{Error, Result};
use crate::event::{
    window_events_until, Event, EventWindow, SensorGeometry, DEFAULT_ACCUMULATION_US, DEFAULT_STEP_US,
};
use crate::formats::{track_rows, write_track_row, TrackRow, TRACKS_CSV_HEADER};
use crate::metrics::{self, align_to_truth, ClusterQualityReport, EvalReport, FrameHypothesis, MatchConfig};
use crate::sim::{default_scenario, Pattern, Power, Scenario};
use crate::tracker::{
    StepResult, TrackerConfig, TrackerState, DEFAULT_EPS_PX, DEFAULT_MIN_PTS_FULL,
    DEFAULT_MIN_PTS_PARTIAL_FULL_SPEED, DEFAULT_MIN_PTS_PARTIAL_HALF_SPEED, DEFAULT_SIGMA_PX,
};

/// Every tunable of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub t_a_us: u64,
    pub step_us: u64,
    pub eps: f64,
    pub min_pts_full: usize,
    pub min_pts_partial: usize,
    pub sigma_px: f64,
    pub t_match_px: f64,
    pub px_per_cm: f64,
    pub geometry: SensorGeometry,
    pub seed: u64,
    /// Frames before this time are left out of scoring.
    pub eval_start_us: u64,
    /// Capacity of each bounded queue between pipeline stages.
    pub queue_depth: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            t_a_us: DEFAULT_ACCUMULATION_US,
            step_us: DEFAULT_STEP_US,
            eps: DEFAULT_EPS_PX,
            min_pts_full: DEFAULT_MIN_PTS_FULL,
            min_pts_partial: DEFAULT_MIN_PTS_PARTIAL_FULL_SPEED,
            sigma_px: DEFAULT_SIGMA_PX,
            t_match_px: DEFAULT_SIGMA_PX,
            px_per_cm: crate::sim::DEFAULT_PX_PER_CM,
            geometry: SensorGeometry::default(),
            seed: 0,
            eval_start_us: 250_000,
            queue_depth: 8,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.trim().parse::<T>().map_err(|e| Error::Config(format!("{key} = `{}`: {e}", value.trim())))
}

impl RunConfig {
    /// Sets one field by name.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key.trim() {
            "t_a_us" => self.t_a_us = parse_value(key, value)?,
            "step_us" => self.step_us = parse_value(key, value)?,
            "eps" => self.eps = parse_value(key, value)?,
            "min_pts_full" => self.min_pts_full = parse_value(key, value)?,
            "min_pts_partial" => self.min_pts_partial = parse_value(key, value)?,
            "sigma_px" => self.sigma_px = parse_value(key, value)?,
            "t_match_px" => self.t_match_px = parse_value(key, value)?,
            "px_per_cm" => self.px_per_cm = parse_value(key, value)?,
            "geometry" => self.geometry = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "eval_start_us" => self.eval_start_us = parse_value(key, value)?,
            "queue_depth" => self.queue_depth = parse_value(key, value)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Applies flat `key = value` lines; `#` starts a comment.
    pub fn apply_config_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Config(format!("line {}: expected `key = value`, got `{line}`", i + 1)));
            };
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_a_us == 0 || self.step_us == 0 {
            return Err(Error::Config("t_a_us and step_us must be positive".into()));
        }
        if self.queue_depth == 0 {
            return Err(Error::Config("queue_depth must be positive".into()));
        }
        self.tracker_config().validate()?;
        self.match_config().validate()?;
        Ok(())
    }

    /// Switches the polarity min_pts to its half-speed default when the
    /// robots run at half power and the value was left at the full-speed
    /// default.
    pub fn tuned_for(mut self, power: Power) -> Self {
        if power == Power::Half && self.min_pts_partial == DEFAULT_MIN_PTS_PARTIAL_FULL_SPEED {
            self.min_pts_partial = DEFAULT_MIN_PTS_PARTIAL_HALF_SPEED;
        }
        self
    }

    pub fn tracker_config(&self) -> TrackerConfig {
        TrackerConfig {
            sigma_px: self.sigma_px,
            params_full: DbscanParams { eps: self.eps, min_pts: self.min_pts_full },
            params_partial: DbscanParams { eps: self.eps, min_pts: self.min_pts_partial },
            geometry: self.geometry,
            max_age_us: None,
        }
    }

    pub fn match_config(&self) -> MatchConfig {
        MatchConfig { t_match_px: self.t_match_px, px_per_cm: self.px_per_cm, eval_start_us: self.eval_start_us }
    }
}

/// Per-window bookkeeping from a tracking run.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowStat {
    pub t_us: u64,
    pub n_events: usize,
    /// Wall time spent in the tracker step.
    pub latency_us: f64,
}

#[derive(Debug, Clone, Default)]
pub struct TrackRun {
    pub rows: Vec<TrackRow>,
    pub steps: Vec<StepResult>,
    pub stats: Vec<WindowStat>,
    pub state: TrackerState,
}

impl TrackRun {
    /// Hypothesis frames, one per window, holding every live track.
    pub fn hypotheses(&self) -> Vec<FrameHypothesis> {
        let mut frames: Vec<FrameHypothesis> =
            self.steps.iter().map(|s| FrameHypothesis { t_us: s.t_us, objects: Vec::new() }).collect();
        let mut k = 0;
        for r in &self.rows {
            while frames[k].t_us != r.t_us {
                k += 1;
            }
            frames[k].objects.push(metrics::HypObject {
                track_id: r.track_id,
                x_px: r.x_px,
                y_px: r.y_px,
                theta_deg: r.theta_deg,
            });
        }
        frames
    }

    /// Ids of all tracks alive after the last window closing at or before `t_us`.
    pub fn ids_at(&self, t_us: u64) -> Vec<u64> {
        let Some(last) = self.steps.iter().rev().find(|s| s.t_us <= t_us) else {
            return Vec::new();
        };
        self.rows.iter().filter(|r| r.t_us == last.t_us).map(|r| r.track_id).collect()
    }
}

/// Latency percentiles over a run, in microseconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencySummary {
    pub p50_us: f64,
    pub p95_us: f64,
    pub max_us: f64,
}

pub fn latency_summary(stats: &[WindowStat]) -> Option<LatencySummary> {
    if stats.is_empty() {
        return None;
    }
    let mut l: Vec<f64> = stats.iter().map(|s| s.latency_us).collect();
    l.sort_by(f64::total_cmp);
    // Nearest-rank percentile.
    let pct = |p: f64| l[((p * l.len() as f64).ceil() as usize).clamp(1, l.len()) - 1];
    Some(LatencySummary { p50_us: pct(0.50), p95_us: pct(0.95), max_us: l[l.len() - 1] })
}

fn step_window(state: &mut TrackerState, w: &EventWindow<'_>, tc: &TrackerConfig) -> Result<(StepResult, WindowStat)> {
    let start = Instant::now();
    let result = state.step(w, tc)?;
    let latency_us = start.elapsed().as_secs_f64() * 1e6;
    Ok((result, WindowStat { t_us: w.t_end_us, n_events: w.len(), latency_us }))
}

/// Tracks a whole stream in the calling thread. Windows keep coming until
/// `t_until_us` (if given) even after the stream ends.
pub fn track_stream(events: &[Event], cfg: &RunConfig, t_until_us: Option<u64>) -> Result<TrackRun> {
    cfg.validate()?;
    let tc = cfg.tracker_config();
    let until = t_until_us.unwrap_or(0).max(events.last().map_or(0, |e| e.t_us));
    if events.is_empty() && t_until_us.is_none() {
        return Ok(TrackRun::default());
    }
    let windows = window_events_until(events, cfg.t_a_us, cfg.step_us, 0, until)?;
    let mut run = TrackRun::default();
    for w in &windows {
        let (result, stat) = step_window(&mut run.state, w, &tc)?;
        run.rows.extend(track_rows(&result, &run.state));
        run.steps.push(result);
        run.stats.push(stat);
    }
    Ok(run)
}

/// Bounded producer/consumer pipeline: a windowing stage feeds the
/// tracker, which feeds a writer emitting the tracks CSV to `out`.
/// Windows are tracked strictly in close-time order.
pub fn run_pipeline<W: Write>(events: &[Event], cfg: &RunConfig, out: &mut W) -> Result<Vec<WindowStat>> {
    cfg.validate()?;
    let tc = cfg.tracker_config();
    let windows = if events.is_empty() {
        Vec::new()
    } else {
        window_events_until(events, cfg.t_a_us, cfg.step_us, 0, 0)?
    };
    let (win_tx, win_rx) = sync_channel::<EventWindow<'_>>(cfg.queue_depth);
    let (row_tx, row_rx) = sync_channel::<Vec<TrackRow>>(cfg.queue_depth);

    std::thread::scope(|scope| -> Result<Vec<WindowStat>> {
        scope.spawn(move || {
            for w in windows {
                if win_tx.send(w).is_err() {
                    break;
                }
            }
        });
        let tracker = scope.spawn(move || -> Result<Vec<WindowStat>> {
            let mut state = TrackerState::new();
            let mut stats = Vec::new();
            for w in win_rx {
                let (result, stat) = step_window(&mut state, &w, &tc)?;
                stats.push(stat);
                if row_tx.send(track_rows(&result, &state)).is_err() {
                    break;
                }
            }
            Ok(stats)
        });

        let mut buf = String::with_capacity(4096);
        buf.push_str(TRACKS_CSV_HEADER);
        buf.push('\n');
        let mut write_err = None;
        for rows in row_rx {
            for r in &rows {
                write_track_row(&mut buf, r);
            }
            if buf.len() > 1 << 16 {
                if let Err(e) = out.write_all(buf.as_bytes()) {
                    write_err = Some(e);
                    break;
                }
                buf.clear();
            }
        }
        let stats = tracker.join().expect("tracker thread panicked")?;
        if let Some(e) = write_err {
            return Err(e.into());
        }
        out.write_all(buf.as_bytes())?;
        out.flush()?;
        Ok(stats)
    })
}

/// Everything measured on one simulated scenario.
#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub report: EvalReport,
    pub quality: ClusterQualityReport,
    pub run: TrackRun,
}

/// Simulates, tracks and scores one scenario against its own ground truth.
pub fn evaluate_scenario(scenario: &Scenario, cfg: &RunConfig) -> Result<ScenarioOutcome> {
    if scenario.gt_period_us != cfg.step_us {
        return Err(Error::Config(format!(
            "ground-truth period {} us must equal the tracker step {} us",
            scenario.gt_period_us, cfg.step_us
        )));
    }
    let sim = scenario.simulate()?;
    let t_until = sim.truth.last().map(|f| f.t_us);
    let run = track_stream(&sim.events, cfg, t_until)?;
    let end = t_until.unwrap_or(0);
    let hyp: Vec<FrameHypothesis> = run.hypotheses().into_iter().filter(|f| f.t_us <= end).collect();
    let hyp = align_to_truth(&sim.truth, hyp)?;
    let report = metrics::evaluate(&sim.truth, &hyp, &cfg.match_config())?;

    let scored: Vec<&StepResult> = run.steps.iter().filter(|s| s.t_us >= cfg.eval_start_us && s.t_us <= end).collect();
    let counts: Vec<usize> = scored.iter().map(|s| s.n_full_clusters).collect();
    let n_avg = metrics::n_avg_clusters(&counts, scenario.robots.len().max(1))?;
    let areas: Vec<f64> = scored.iter().flat_map(|s| s.detections.iter().map(|d| d.bbox.area() as f64)).collect();
    let a_ratio = if areas.is_empty() {
        0.0
    } else {
        metrics::a_ratio(areas.iter().sum::<f64>() / areas.len() as f64, scenario.mean_robot_area_px2())?
    };
    Ok(ScenarioOutcome { report, quality: ClusterQualityReport { n_avg_clusters: n_avg, a_ratio }, run })
}

/// Parameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    MinPtsFull,
    MinPtsPartial,
    TaUs,
    Eps,
    SigmaPx,
    NoiseRate,
    /// Global lighting multiplier on event yield.
    Lighting,
}

impl FromStr for SweepParam {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "min_pts_full" => SweepParam::MinPtsFull,
            "min_pts_partial" => SweepParam::MinPtsPartial,
            "t_a_us" => SweepParam::TaUs,
            "eps" => SweepParam::Eps,
            "sigma_px" => SweepParam::SigmaPx,
            "noise_rate" => SweepParam::NoiseRate,
            "lighting" => SweepParam::Lighting,
            _ => return Err(Error::Config(format!("unknown sweep parameter `{s}`"))),
        })
    }
}

/// Parses `a,b,c` or an inclusive `start:stop:step` range.
pub fn parse_values(spec: &str) -> Result<Vec<f64>> {
    let bad = |m: String| Error::Config(format!("sweep values `{spec}`: {m}"));
    let values: Vec<f64> = if spec.contains(':') {
        let parts: Vec<f64> = spec
            .split(':')
            .map(|p| p.trim().parse::<f64>().map_err(|e| bad(e.to_string())))
            .collect::<Result<_>>()?;
        let [start, stop, step] = parts[..] else {
            return Err(bad("expected start:stop:step".into()));
        };
        if !(step > 0.0) || stop < start {
            return Err(bad("need step > 0 and stop >= start".into()));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        (0..=n).map(|i| start + step * i as f64).collect()
    } else {
        spec.split(',').map(|p| p.trim().parse::<f64>().map_err(|e| bad(e.to_string()))).collect::<Result<_>>()?
    };
    if values.is_empty() {
        return Err(bad("no values".into()));
    }
    Ok(values)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<f64>,
    pub n_robots: usize,
    pub pattern: Pattern,
    pub power: Power,
    pub repeats: u32,
    pub duration_us: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub param_value: f64,
    pub repeat: u32,
    pub metric: &'static str,
    pub value: f64,
}

pub const SWEEP_CSV_HEADER: &str = "param_value,repeat,metric,value";

fn cell(spec: &SweepSpec, base: &RunConfig, value: f64, repeat: u32) -> Result<ScenarioOutcome> {
    let seed = base.seed.wrapping_add(u64::from(repeat));
    let mut scenario = default_scenario(spec.n_robots, spec.pattern, spec.power, seed)?;
    if let Some(d) = spec.duration_us {
        scenario.duration_us = d;
    }
    let mut cfg = base.clone().tuned_for(spec.power);
    cfg.seed = seed;
    let as_count = |v: f64| -> Result<usize> {
        if v >= 1.0 && v.fract() == 0.0 {
            Ok(v as usize)
        } else {
            Err(Error::Config(format!("{v} is not a positive integer")))
        }
    };
    match spec.param {
        SweepParam::MinPtsFull => cfg.min_pts_full = as_count(value)?,
        SweepParam::MinPtsPartial => cfg.min_pts_partial = as_count(value)?,
        SweepParam::TaUs => cfg.t_a_us = as_count(value)? as u64,
        SweepParam::Eps => cfg.eps = value,
        SweepParam::SigmaPx => cfg.sigma_px = value,
        SweepParam::NoiseRate => scenario.noise.rate_hz_per_px = value,
        SweepParam::Lighting => scenario.arena.lighting = value,
    }
    evaluate_scenario(&scenario, &cfg)
}

fn outcome_rows(value: f64, repeat: u32, o: &Result<ScenarioOutcome>) -> Vec<SweepRow> {
    let row = |metric: &'static str, v: f64| SweepRow { param_value: value, repeat, metric, value: v };
    let Ok(o) = o else {
        return vec![row("error", 1.0)];
    };
    let r = &o.report;
    let opt = |v: Option<f64>| v.unwrap_or(f64::NAN);
    vec![
        row("precision", r.precision),
        row("recall", r.recall),
        row("tp", r.tp as f64),
        row("fp", r.fp as f64),
        row("fn", r.fn_ as f64),
        row("mae_distance_cm", opt(r.mae_distance_cm)),
        row("mae_theta_deg", opt(r.mae_theta_deg)),
        row("mota", opt(r.mota)),
        row("misses", r.misses as f64),
        row("false_positives", r.false_positives as f64),
        row("mismatches", r.mismatches as f64),
        row("gt_total", r.gt_total as f64),
        row("n_frames", r.n_frames as f64),
        row("n_avg_clusters", o.quality.n_avg_clusters),
        row("a_ratio", o.quality.a_ratio),
        row("error", 0.0),
    ]
}

/// Runs every (value, repeat) cell, at most `jobs` at a time. Rows come
/// back ordered by value then repeat regardless of scheduling. A failing
/// cell yields a single `error = 1` row.
pub fn run_sweep(spec: &SweepSpec, base: &RunConfig, jobs: usize) -> Result<Vec<SweepRow>> {
    if spec.values.is_empty() || spec.repeats == 0 {
        return Err(Error::Config("a sweep needs at least one value and one repeat".into()));
    }
    let cells: Vec<(f64, u32)> =
        spec.values.iter().flat_map(|&v| (0..spec.repeats).map(move |r| (v, r))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let per_cell: Vec<Vec<SweepRow>> = pool.install(|| {
        cells.par_iter().map(|&(v, r)| outcome_rows(v, r, &cell(spec, base, v, r))).collect()
    });
    Ok(per_cell.into_iter().flatten().collect())
}

pub fn write_sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!("{},{},{},{}\n", r.param_value, r.repeat, r.metric, r.value));
    }
    out
}

//! `evtrack`: simulate event streams, track robots, score the tracks,
//! sweep parameters and replay windows as images.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use evtrack_core::dbscan::cluster;
use evtrack_core::event::{parse_event_stream, window_events, write_event_csv, Event};
use evtrack_core::experiment::{
    latency_summary, parse_values, run_pipeline, run_sweep, write_sweep_csv, RunConfig, SweepParam, SweepSpec,
};
use evtrack_core::formats::{parse_gt_csv, parse_tracks_csv, rows_to_hypotheses, write_gt_csv, TrackRow};
use evtrack_core::homography::{parse_correspondences, Homography};
use evtrack_core::metrics::{align_to_truth, evaluate};
use evtrack_core::render::{render_window, Annotation};
use evtrack_core::sim::{default_scenario, Pattern, Power};
use evtrack_core::{Error, Result, SensorGeometry};

#[derive(Parser)]
#[command(name = "evtrack", version, about = "Event-camera robot detection and tracking")]
struct Cli {
    #[command(flatten)]
    shared: Shared,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Shared {
    /// Flat `key = value` file overriding the built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Sensor size as WxH.
    #[arg(long, global = true)]
    geometry: Option<SensorGeometry>,
}

/// Tracker tunables that may be set on the command line.
#[derive(Args, Default)]
struct TrackerFlags {
    /// Accumulation time of each window.
    #[arg(long)]
    t_a_us: Option<u64>,
    /// Interval between window closes.
    #[arg(long)]
    step_us: Option<u64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    min_pts_full: Option<usize>,
    #[arg(long)]
    min_pts_partial: Option<usize>,
    /// New-track distance threshold.
    #[arg(long)]
    sigma_px: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an event stream and its ground truth for a default scenario.
    Simulate {
        #[arg(long, default_value_t = 1)]
        robots: usize,
        #[arg(long, default_value = "circle")]
        pattern: Pattern,
        #[arg(long, default_value = "full")]
        power: Power,
        #[arg(long, default_value_t = 30.0)]
        duration_s: f64,
        /// Background events per pixel per second.
        #[arg(long)]
        noise_rate: Option<f64>,
        /// Global contrast multiplier in [0, 1].
        #[arg(long)]
        lighting: Option<f64>,
        /// Stop every robot over START:END seconds.
        #[arg(long, value_name = "START:END")]
        pause: Option<String>,
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        gt: PathBuf,
    },
    /// Track an event CSV and write the tracks CSV.
    Track {
        #[arg(long)]
        events: PathBuf,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print per-window event counts and latency percentiles to stderr.
        #[arg(long)]
        stats: bool,
        #[command(flatten)]
        tracker: TrackerFlags,
    },
    /// Score a tracks CSV against ground truth and write the metrics JSON.
    Evaluate {
        #[arg(long)]
        tracks: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        match_dist_px: Option<f64>,
        #[arg(long)]
        px_per_cm: Option<f64>,
        /// Correspondence file; the fitted homography is applied to the
        /// ground-truth coordinates.
        #[arg(long)]
        homography: Option<PathBuf>,
        /// Frames before this time are not scored.
        #[arg(long)]
        eval_start_us: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run simulate, track and evaluate over a range of one parameter.
    Sweep {
        /// min_pts_full, min_pts_partial, t_a_us, eps, sigma_px, noise_rate or lighting.
        #[arg(long)]
        param: SweepParam,
        /// `a,b,c` or `start:stop:step`.
        #[arg(long)]
        values: String,
        #[arg(long, default_value_t = 1)]
        robots: usize,
        #[arg(long, default_value = "circle")]
        pattern: Pattern,
        #[arg(long, default_value = "full")]
        power: Power,
        #[arg(long, default_value_t = 3)]
        repeats: u32,
        #[arg(long)]
        duration_s: Option<f64>,
        /// Cells run at the same time.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        tracker: TrackerFlags,
    },
    /// Render every window with its tracked detections as PPM frames.
    Replay {
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        tracks: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        tracker: TrackerFlags,
    },
}

fn run_config(shared: &Shared, flags: &TrackerFlags) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &shared.config {
        cfg.apply_config_text(&read(path)?)?;
    }
    if let Some(seed) = shared.seed {
        cfg.seed = seed;
    }
    if let Some(g) = shared.geometry {
        cfg.geometry = g;
    }
    let f = flags;
    cfg.t_a_us = f.t_a_us.unwrap_or(cfg.t_a_us);
    cfg.step_us = f.step_us.unwrap_or(cfg.step_us);
    cfg.eps = f.eps.unwrap_or(cfg.eps);
    cfg.min_pts_full = f.min_pts_full.unwrap_or(cfg.min_pts_full);
    cfg.min_pts_partial = f.min_pts_partial.unwrap_or(cfg.min_pts_partial);
    cfg.sigma_px = f.sigma_px.unwrap_or(cfg.sigma_px);
    cfg.validate()?;
    Ok(cfg)
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn output(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => write(p, bytes),
        None => Ok(io::stdout().lock().write_all(bytes)?),
    }
}

fn seconds_to_us(s: f64) -> Result<u64> {
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::Config(format!("duration {s} s must be non-negative")));
    }
    Ok((s * 1e6).round() as u64)
}

/// An empty file stands for an empty stream.
fn load_events(path: &Path, geometry: SensorGeometry) -> Result<Vec<Event>> {
    let text = read(path)?;
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    Ok(parse_event_stream(&text, geometry)?)
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    cfg: &RunConfig,
    robots: usize,
    pattern: Pattern,
    power: Power,
    duration_s: f64,
    noise_rate: Option<f64>,
    lighting: Option<f64>,
    pause: Option<&str>,
    events: &Path,
    gt: &Path,
) -> Result<()> {
    let mut s = default_scenario(robots, pattern, power, cfg.seed)?;
    if cfg.geometry != s.arena.geometry {
        s = s.recentred(cfg.geometry)?;
    }
    s.duration_us = seconds_to_us(duration_s)?;
    s.gt_period_us = cfg.step_us;
    s.arena.px_per_cm = cfg.px_per_cm;
    if let Some(r) = noise_rate {
        s.noise.rate_hz_per_px = r;
    }
    if let Some(l) = lighting {
        s.arena.lighting = l;
    }
    if let Some(p) = pause {
        let (a, b) = p
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("pause `{p}` is not START:END")))?;
        let secs = |v: &str| {
            v.trim().parse::<f64>().map_err(|e| Error::Config(format!("pause `{p}`: {e}"))).and_then(seconds_to_us)
        };
        s = s.with_pause(secs(a)?, secs(b)?);
    }
    let out = s.simulate()?;
    write(events, write_event_csv(&out.events).as_bytes())?;
    write(gt, write_gt_csv(&out.truth).as_bytes())?;
    eprintln!("{} events, {} ground-truth frames", out.events.len(), out.truth.len());
    Ok(())
}

fn track(cfg: &RunConfig, events: &Path, out: Option<&Path>, stats: bool) -> Result<()> {
    let events = load_events(events, cfg.geometry)?;
    let window_stats = match out {
        Some(p) => {
            let file = fs::File::create(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            run_pipeline(&events, cfg, &mut BufWriter::new(file))?
        }
        None => run_pipeline(&events, cfg, &mut BufWriter::new(io::stdout().lock()))?,
    };
    if stats {
        let mut err = io::stderr().lock();
        writeln!(err, "t_us,n_events,latency_us")?;
        for s in &window_stats {
            writeln!(err, "{},{},{:.1}", s.t_us, s.n_events, s.latency_us)?;
        }
        match latency_summary(&window_stats) {
            Some(l) => writeln!(
                err,
                "windows {} latency_us p50 {:.1} p95 {:.1} max {:.1}",
                window_stats.len(),
                l.p50_us,
                l.p95_us,
                l.max_us
            )?,
            None => writeln!(err, "windows 0")?,
        }
    }
    Ok(())
}

fn evaluate_files(cfg: &RunConfig, tracks: &Path, gt: &Path, homography: Option<&Path>, out: Option<&Path>) -> Result<()> {
    let rows = parse_tracks_csv(&read(tracks)?)?;
    let mut truth = parse_gt_csv(&read(gt)?)?;
    if let Some(path) = homography {
        let (src, dst) = parse_correspondences(&read(path)?)?;
        let h = Homography::solve(&src, &dst)?;
        for o in truth.iter_mut().flat_map(|f| f.objects.iter_mut()) {
            (o.x_px, o.y_px) = h.apply((o.x_px, o.y_px))?;
        }
    }
    // Windows keep closing until the stream drains, which can run past the
    // last ground-truth frame.
    let end = truth.last().map_or(0, |f| f.t_us);
    let hyp = rows_to_hypotheses(&rows).into_iter().filter(|f| f.t_us <= end).collect();
    let hyp = align_to_truth(&truth, hyp)?;
    let report = evaluate(&truth, &hyp, &cfg.match_config())?;
    let mut json = serde_json::to_string_pretty(&report).map_err(|e| Error::Config(e.to_string()))?;
    json.push('\n');
    output(out, json.as_bytes())
}

fn replay(cfg: &RunConfig, events: &Path, tracks: &Path, out_dir: &Path) -> Result<()> {
    let events = load_events(events, cfg.geometry)?;
    let rows = parse_tracks_csv(&read(tracks)?)?;
    fs::create_dir_all(out_dir)?;
    let windows = window_events(&events, cfg.t_a_us, cfg.step_us, 0)?;
    let tc = cfg.tracker_config();
    let mut k = 0;
    for (i, w) in windows.iter().enumerate() {
        while k < rows.len() && rows[k].t_us < w.t_end_us {
            k += 1;
        }
        let start = k;
        while k < rows.len() && rows[k].t_us == w.t_end_us {
            k += 1;
        }
        let observed: Vec<&TrackRow> = rows[start..k].iter().filter(|r| r.cluster_size > 0).collect();
        let points: Vec<(i32, i32)> = w.events.iter().map(Event::xy).collect();
        let clusters = cluster(&points, tc.params_full)?.clusters;
        // Each observed track sits exactly on the centroid of its cluster.
        let annotations: Vec<Annotation> = observed
            .iter()
            .filter_map(|r| {
                clusters
                    .iter()
                    .filter(|c| c.size() == r.cluster_size)
                    .min_by(|a, b| {
                        let d = |c: &&evtrack_core::Cluster| (c.centroid.0 - r.x_px).hypot(c.centroid.1 - r.y_px);
                        d(a).total_cmp(&d(b))
                    })
                    .map(|c| Annotation { bbox: c.bbox, id: r.track_id })
            })
            .collect();
        let frame = render_window(cfg.geometry, w.events, &annotations);
        write(&out_dir.join(format!("frame_{:06}.ppm", i + 1)), &frame.to_ppm())?;
    }
    eprintln!("{} frames", windows.len());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let shared = &cli.shared;
    match cli.command {
        Command::Simulate { robots, pattern, power, duration_s, noise_rate, lighting, pause, events, gt } => {
            let cfg = run_config(shared, &TrackerFlags::default())?;
            simulate(&cfg, robots, pattern, power, duration_s, noise_rate, lighting, pause.as_deref(), &events, &gt)
        }
        Command::Track { events, out, stats, tracker } => {
            track(&run_config(shared, &tracker)?, &events, out.as_deref(), stats)
        }
        Command::Evaluate { tracks, gt, match_dist_px, px_per_cm, homography, eval_start_us, out } => {
            let mut cfg = run_config(shared, &TrackerFlags::default())?;
            cfg.t_match_px = match_dist_px.unwrap_or(cfg.t_match_px);
            cfg.px_per_cm = px_per_cm.unwrap_or(cfg.px_per_cm);
            cfg.eval_start_us = eval_start_us.unwrap_or(cfg.eval_start_us);
            cfg.validate()?;
            evaluate_files(&cfg, &tracks, &gt, homography.as_deref(), out.as_deref())
        }
        Command::Sweep { param, values, robots, pattern, power, repeats, duration_s, jobs, out, tracker } => {
            let cfg = run_config(shared, &tracker)?;
            let spec = SweepSpec {
                param,
                values: parse_values(&values)?,
                n_robots: robots,
                pattern,
                power,
                repeats,
                duration_us: duration_s.map(seconds_to_us).transpose()?,
            };
            let rows = run_sweep(&spec, &cfg, jobs)?;
            output(out.as_deref(), write_sweep_csv(&rows).as_bytes())
        }
        Command::Replay { events, tracks, out_dir, tracker } => {
            replay(&run_config(shared, &tracker)?, &events, &tracks, &out_dir)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            eprintln!("  {e:?}");
            ExitCode::from(2)
        }
    }
}

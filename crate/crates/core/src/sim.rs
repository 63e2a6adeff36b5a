//! Deterministic arena simulator.
//!
//! Dark rectangular robots drive circle or square paths over a light mat.
//! Time advances in 1 ms micro-steps; a pixel whose centre becomes covered
//! by a robot emits Negative events (light to dark) and a pixel that
//! becomes uncovered emits Positive events. Each transition fires
//! `edge_burst` independent events, each kept with probability
//! `contrast * lighting`. Background noise is Poisson in time and uniform
//! over the mat. Every random draw comes from a seeded ChaCha stream, one
//! per robot plus one for noise, so output depends only on the inputs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use rayon::prelude::*;

use crate::error::SimError;
use crate::event::{Event, Polarity, SensorGeometry, DEFAULT_STEP_US};
use crate::metrics::{FrameTruth, TruthObject};

pub const MICRO_STEP_US: u64 = 1_000;
pub const DEFAULT_PX_PER_CM: f64 = 2.46;
pub const DEFAULT_EDGE_BURST: u32 = 4;
pub const FULL_POWER_MPS: f64 = 0.46;
pub const HALF_POWER_MPS: f64 = 0.23;
/// In-place turn rate at square corners.
pub const TURN_RATE_DEG_PER_S: f64 = 90.0;
pub const DEFAULT_ROBOT_WIDTH_PX: f64 = 20.0;
pub const DEFAULT_ROBOT_LENGTH_PX: f64 = 20.0;
/// Background noise used by the default scenarios, events per pixel per second.
pub const DEFAULT_NOISE_HZ_PER_PX: f64 = 0.5;
pub const DEFAULT_DURATION_US: u64 = 30_000_000;
const CONTRASTS: [f64; 4] = [1.0, 0.9, 0.8, 0.7];

/// Inclusive pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelRect {
    pub min_x: i32,
    pub min_y: i32,
    pub max_x: i32,
    pub max_y: i32,
}

impl PixelRect {
    pub fn width(&self) -> u32 {
        (self.max_x - self.min_x + 1) as u32
    }

    pub fn height(&self) -> u32 {
        (self.max_y - self.min_y + 1) as u32
    }

    pub fn area(&self) -> u64 {
        u64::from(self.width()) * u64::from(self.height())
    }

    pub fn center(&self) -> (f64, f64) {
        (f64::from(self.min_x + self.max_x) / 2.0, f64::from(self.min_y + self.max_y) / 2.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArenaConfig {
    pub geometry: SensorGeometry,
    /// Image footprint of the mat.
    pub mat_rect: PixelRect,
    pub px_per_cm: f64,
    /// Events fired per pixel transition before thinning by contrast.
    pub edge_burst: u32,
    /// Global multiplier on every robot's contrast (1 = nominal light).
    pub lighting: f64,
}

impl Default for ArenaConfig {
    fn default() -> Self {
        let geometry = SensorGeometry::default();
        let side = 450;
        let min_x = (geometry.width_px as i32 - side) / 2;
        let min_y = (geometry.height_px as i32 - side) / 2;
        Self {
            geometry,
            mat_rect: PixelRect { min_x, min_y, max_x: min_x + side - 1, max_y: min_y + side - 1 },
            px_per_cm: DEFAULT_PX_PER_CM,
            edge_burst: DEFAULT_EDGE_BURST,
            lighting: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotSpec {
    pub robot_id: u32,
    pub width_px: f64,
    /// Extent along the direction of travel.
    pub length_px: f64,
    /// Event yield in (0, 1]; lighter shells give fewer events.
    pub contrast: f64,
}

impl RobotSpec {
    pub fn area_px2(&self) -> f64 {
        self.width_px * self.length_px
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PathKind {
    /// Travel with increasing polar angle. Zero radius keeps the robot still.
    Circle { center: (f64, f64), radius_px: f64 },
    /// Edges driven +x, +y, -x, -y from `corner`, with a 90 degree in-place
    /// turn at every corner.
    Square { corner: (f64, f64), side_px: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathSpec {
    pub kind: PathKind,
    pub speed_mps: f64,
    /// Start offset as a fraction of one lap, in [0, 1).
    pub phase: f64,
    /// Half-open `[start, end)` intervals in microseconds during which the
    /// robot stands still.
    pub pauses: Vec<(u64, u64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub rate_hz_per_px: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading_rad: f64,
}

impl Pose {
    /// Heading in degrees, wrapped to [-180, 180).
    pub fn theta_deg(&self) -> f64 {
        wrap_deg(self.heading_rad.to_degrees())
    }
}

pub fn wrap_deg(d: f64) -> f64 {
    let w = (d + 180.0).rem_euclid(360.0) - 180.0;
    if w >= 180.0 {
        w - 360.0
    } else {
        w
    }
}

impl PathSpec {
    /// Moving time elapsed by `t_us`, excluding pauses.
    fn moving_us(&self, t_us: u64) -> u64 {
        let paused: u64 = self
            .pauses
            .iter()
            .map(|&(a, b)| b.min(t_us).saturating_sub(a.min(t_us)))
            .sum();
        t_us - paused.min(t_us)
    }

    pub fn pose_at(&self, t_us: u64, px_per_cm: f64) -> Pose {
        let v = self.speed_mps * 100.0 * px_per_cm;
        let t = self.moving_us(t_us) as f64 * 1e-6;
        match self.kind {
            PathKind::Circle { center, radius_px } => {
                if radius_px <= 0.0 {
                    return Pose { x: center.0, y: center.1, heading_rad: 0.0 };
                }
                let a = std::f64::consts::TAU * self.phase + v * t / radius_px;
                Pose {
                    x: center.0 + radius_px * a.cos(),
                    y: center.1 + radius_px * a.sin(),
                    heading_rad: a + std::f64::consts::FRAC_PI_2,
                }
            }
            PathKind::Square { corner, side_px } => {
                let edge_s = side_px / v;
                let turn_s = 90.0 / TURN_RATE_DEG_PER_S;
                let lap = 4.0 * (edge_s + turn_s);
                let s = (self.phase * lap + t).rem_euclid(lap);
                let leg = ((s / (edge_s + turn_s)).floor() as usize).min(3);
                let r = s - leg as f64 * (edge_s + turn_s);
                let corners = [
                    corner,
                    (corner.0 + side_px, corner.1),
                    (corner.0 + side_px, corner.1 + side_px),
                    (corner.0, corner.1 + side_px),
                ];
                let base = leg as f64 * std::f64::consts::FRAC_PI_2;
                let (a, b) = (corners[leg], corners[(leg + 1) % 4]);
                if r < edge_s {
                    let f = r / edge_s;
                    Pose { x: a.0 + (b.0 - a.0) * f, y: a.1 + (b.1 - a.1) * f, heading_rad: base }
                } else {
                    let f = (r - edge_s) / turn_s;
                    Pose { x: b.0, y: b.1, heading_rad: base + f * std::f64::consts::FRAC_PI_2 }
                }
            }
        }
    }

    /// Axis-aligned extent of the centre's trajectory.
    fn extent(&self) -> (f64, f64, f64, f64) {
        match self.kind {
            PathKind::Circle { center, radius_px } => {
                let r = radius_px.max(0.0);
                (center.0 - r, center.1 - r, center.0 + r, center.1 + r)
            }
            PathKind::Square { corner, side_px } => (corner.0, corner.1, corner.0 + side_px, corner.1 + side_px),
        }
    }
}

/// Pixels whose centres lie inside the robot footprint, in row-major order.
pub fn footprint(pose: &Pose, robot: &RobotSpec, out: &mut Vec<(i32, i32)>) {
    out.clear();
    let (s, c) = pose.heading_rad.sin_cos();
    let hl = robot.length_px / 2.0;
    let hw = robot.width_px / 2.0;
    let reach = hl.hypot(hw);
    let (x0, x1) = ((pose.x - reach).floor() as i32, (pose.x + reach).ceil() as i32);
    let (y0, y1) = ((pose.y - reach).floor() as i32, (pose.y + reach).ceil() as i32);
    for py in y0..=y1 {
        let dy = f64::from(py) - pose.y;
        for px in x0..=x1 {
            let dx = f64::from(px) - pose.x;
            let along = dx * c + dy * s;
            let across = -dx * s + dy * c;
            if along.abs() <= hl && across.abs() <= hw {
                out.push((px, py));
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimOutput {
    pub events: Vec<Event>,
    pub truth: Vec<FrameTruth>,
}

pub fn simulate(
    arena: &ArenaConfig,
    robots: &[(RobotSpec, PathSpec)],
    noise: &NoiseModel,
    duration_us: u64,
    gt_period_us: u64,
) -> Result<SimOutput, SimError> {
    validate(arena, robots, noise, gt_period_us)?;

    let per_source: Vec<Vec<Event>> = robots
        .par_iter()
        .enumerate()
        .map(|(i, (robot, path))| robot_events(arena, robot, path, noise.seed, i as u64 + 1, duration_us))
        .chain(rayon::iter::once(noise_events(arena, noise, duration_us)))
        .collect();
    let mut events: Vec<Event> = Vec::with_capacity(per_source.iter().map(Vec::len).sum());
    for src in per_source {
        events.extend(src);
    }
    // Each source is already ordered; a stable sort merges them so that
    // equal timestamps keep robot order with noise last.
    events.sort_by_key(|e| e.t_us);

    let frames = duration_us.div_ceil(gt_period_us);
    let truth = (1..=frames)
        .map(|k| {
            let t_us = k * gt_period_us;
            FrameTruth {
                t_us,
                objects: robots
                    .iter()
                    .map(|(r, p)| {
                        let pose = p.pose_at(t_us, arena.px_per_cm);
                        TruthObject { gt_id: u64::from(r.robot_id), x_px: pose.x, y_px: pose.y, theta_deg: pose.theta_deg() }
                    })
                    .collect(),
            }
        })
        .collect();
    Ok(SimOutput { events, truth })
}

fn validate(
    arena: &ArenaConfig,
    robots: &[(RobotSpec, PathSpec)],
    noise: &NoiseModel,
    gt_period_us: u64,
) -> Result<(), SimError> {
    let bad = |m: String| Err(SimError::InvalidParameter(m));
    let m = arena.mat_rect;
    if m.min_x < 0
        || m.min_y < 0
        || m.max_x < m.min_x
        || m.max_y < m.min_y
        || !arena.geometry.contains(i64::from(m.max_x), i64::from(m.max_y))
    {
        return bad(format!("mat rectangle {m:?} is not inside the sensor"));
    }
    if !(arena.px_per_cm > 0.0 && arena.px_per_cm.is_finite()) {
        return bad(format!("px_per_cm must be positive, got {}", arena.px_per_cm));
    }
    if arena.edge_burst == 0 {
        return bad("edge_burst must be at least 1".into());
    }
    if !(0.0..=1.0).contains(&arena.lighting) {
        return bad(format!("lighting must lie in [0, 1], got {}", arena.lighting));
    }
    if !(noise.rate_hz_per_px >= 0.0 && noise.rate_hz_per_px.is_finite()) {
        return bad(format!("noise rate must be non-negative, got {}", noise.rate_hz_per_px));
    }
    if gt_period_us == 0 {
        return bad("gt_period_us must be positive".into());
    }
    let mut ids: Vec<u32> = robots.iter().map(|(r, _)| r.robot_id).collect();
    ids.sort_unstable();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        return bad("robot ids must be unique".into());
    }
    for (r, p) in robots {
        if !(r.width_px >= 4.0 && r.length_px >= 4.0) {
            return bad(format!("robot {} must be at least 4 px on each side", r.robot_id));
        }
        if !(r.contrast > 0.0 && r.contrast <= 1.0) {
            return bad(format!("robot {} contrast must lie in (0, 1], got {}", r.robot_id, r.contrast));
        }
        if !(p.speed_mps > 0.0 && p.speed_mps.is_finite()) {
            return bad(format!("robot {} speed must be positive, got {}", r.robot_id, p.speed_mps));
        }
        if !(0.0..1.0).contains(&p.phase) {
            return bad(format!("robot {} phase must lie in [0, 1), got {}", r.robot_id, p.phase));
        }
        if let PathKind::Square { side_px, .. } = p.kind {
            if !(side_px > 0.0) {
                return bad(format!("robot {} square side must be positive", r.robot_id));
            }
        }
        if p.pauses.iter().any(|&(a, b)| b < a) {
            return bad(format!("robot {} has a pause ending before it starts", r.robot_id));
        }
        let reach = r.length_px.hypot(r.width_px) / 2.0;
        let (x0, y0, x1, y1) = p.extent();
        if x0 - reach < f64::from(m.min_x)
            || y0 - reach < f64::from(m.min_y)
            || x1 + reach > f64::from(m.max_x)
            || y1 + reach > f64::from(m.max_y)
        {
            return Err(SimError::PathOutOfBounds { robot_id: r.robot_id });
        }
    }
    let mut covers: Vec<Vec<(i32, i32)>> = Vec::with_capacity(robots.len());
    for (r, p) in robots {
        let mut c = Vec::new();
        footprint(&p.pose_at(0, arena.px_per_cm), r, &mut c);
        covers.push(c);
    }
    for i in 0..robots.len() {
        for j in i + 1..robots.len() {
            if sorted_intersect(&covers[i], &covers[j]) {
                return Err(SimError::OverlapAtStart { a: robots[i].0.robot_id, b: robots[j].0.robot_id });
            }
        }
    }
    Ok(())
}

fn row_major(p: &(i32, i32)) -> (i32, i32) {
    (p.1, p.0)
}

fn sorted_intersect(a: &[(i32, i32)], b: &[(i32, i32)]) -> bool {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match row_major(&a[i]).cmp(&row_major(&b[j])) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => return true,
        }
    }
    false
}

fn robot_events(
    arena: &ArenaConfig,
    robot: &RobotSpec,
    path: &PathSpec,
    seed: u64,
    stream: u64,
    duration_us: u64,
) -> Vec<Event> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let p = (robot.contrast * arena.lighting).clamp(0.0, 1.0);
    let burst = Binomial::new(u64::from(arena.edge_burst), p).expect("probability clamped to [0, 1]");
    let mut prev = Vec::new();
    let mut next = Vec::new();
    footprint(&path.pose_at(0, arena.px_per_cm), robot, &mut prev);
    let mut out = Vec::new();
    let mut step_events: Vec<Event> = Vec::new();
    let steps = duration_us / MICRO_STEP_US;
    for k in 0..steps {
        let t0 = k * MICRO_STEP_US;
        footprint(&path.pose_at(t0 + MICRO_STEP_US, arena.px_per_cm), robot, &mut next);
        step_events.clear();
        let mut emit = |(x, y): (i32, i32), polarity: Polarity, rng: &mut ChaCha8Rng| {
            if !arena.geometry.contains(i64::from(x), i64::from(y)) {
                return;
            }
            for _ in 0..burst.sample(rng) {
                let t = t0 + 1 + rng.random_range(0..MICRO_STEP_US);
                step_events.push(Event::new(t, x as u16, y as u16, polarity));
            }
        };
        // Merge the two row-major pixel lists.
        let (mut i, mut j) = (0, 0);
        while i < prev.len() || j < next.len() {
            let ord = match (prev.get(i), next.get(j)) {
                (Some(a), Some(b)) => row_major(a).cmp(&row_major(b)),
                (Some(_), None) => std::cmp::Ordering::Less,
                _ => std::cmp::Ordering::Greater,
            };
            match ord {
                std::cmp::Ordering::Less => {
                    emit(prev[i], Polarity::Positive, &mut rng);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    emit(next[j], Polarity::Negative, &mut rng);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    i += 1;
                    j += 1;
                }
            }
        }
        step_events.sort_by_key(|e| e.t_us);
        out.extend_from_slice(&step_events);
        std::mem::swap(&mut prev, &mut next);
    }
    out
}

fn noise_events(arena: &ArenaConfig, noise: &NoiseModel, duration_us: u64) -> Vec<Event> {
    let m = arena.mat_rect;
    let lambda = noise.rate_hz_per_px * m.area() as f64 * MICRO_STEP_US as f64 * 1e-6;
    if lambda <= 0.0 {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    rng.set_stream(0);
    let poisson = Poisson::new(lambda).expect("positive finite rate");
    let steps = duration_us / MICRO_STEP_US;
    let mut out = Vec::with_capacity((lambda * steps as f64 * 1.01) as usize);
    let mut step_events = Vec::new();
    for k in 0..steps {
        let t0 = k * MICRO_STEP_US;
        let n = poisson.sample(&mut rng) as u64;
        step_events.clear();
        for _ in 0..n {
            let x = rng.random_range(m.min_x..=m.max_x) as u16;
            let y = rng.random_range(m.min_y..=m.max_y) as u16;
            let polarity = if rng.random_bool(0.5) { Polarity::Positive } else { Polarity::Negative };
            let t = t0 + 1 + rng.random_range(0..MICRO_STEP_US);
            step_events.push(Event::new(t, x, y, polarity));
        }
        step_events.sort_by_key(|e| e.t_us);
        out.extend_from_slice(&step_events);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pattern {
    Circle,
    Square,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Power {
    Full,
    Half,
}

impl Power {
    pub fn speed_mps(self) -> f64 {
        match self {
            Power::Full => FULL_POWER_MPS,
            Power::Half => HALF_POWER_MPS,
        }
    }
}

impl std::str::FromStr for Pattern {
    type Err = SimError;
    fn from_str(s: &str) -> Result<Self, SimError> {
        match s.to_ascii_lowercase().as_str() {
            "circle" => Ok(Pattern::Circle),
            "square" => Ok(Pattern::Square),
            _ => Err(SimError::InvalidParameter(format!("unknown pattern `{s}` (circle|square)"))),
        }
    }
}

impl std::str::FromStr for Power {
    type Err = SimError;
    fn from_str(s: &str) -> Result<Self, SimError> {
        match s.to_ascii_lowercase().as_str() {
            "full" | "100" => Ok(Power::Full),
            "half" | "50" => Ok(Power::Half),
            _ => Err(SimError::InvalidParameter(format!("unknown power `{s}` (full|half)"))),
        }
    }
}

/// Complete simulator inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub arena: ArenaConfig,
    pub robots: Vec<(RobotSpec, PathSpec)>,
    pub noise: NoiseModel,
    pub duration_us: u64,
    pub gt_period_us: u64,
}

impl Scenario {
    pub fn simulate(&self) -> Result<SimOutput, SimError> {
        simulate(&self.arena, &self.robots, &self.noise, self.duration_us, self.gt_period_us)
    }

    /// Mean chassis area over robots, for the area ratio.
    pub fn mean_robot_area_px2(&self) -> f64 {
        if self.robots.is_empty() {
            return 0.0;
        }
        self.robots.iter().map(|(r, _)| r.area_px2()).sum::<f64>() / self.robots.len() as f64
    }

    /// Moves the scenario onto a sensor of another size, keeping the mat and
    /// every path centred. Fails when the mat no longer fits.
    pub fn recentred(mut self, geometry: SensorGeometry) -> Result<Self, SimError> {
        let m = self.arena.mat_rect;
        let dx = (geometry.width_px as i32 - m.width() as i32) / 2 - m.min_x;
        let dy = (geometry.height_px as i32 - m.height() as i32) / 2 - m.min_y;
        self.arena.geometry = geometry;
        self.arena.mat_rect =
            PixelRect { min_x: m.min_x + dx, min_y: m.min_y + dy, max_x: m.max_x + dx, max_y: m.max_y + dy };
        let (fx, fy) = (f64::from(dx), f64::from(dy));
        for (_, path) in &mut self.robots {
            path.kind = match path.kind {
                PathKind::Circle { center, radius_px } => PathKind::Circle { center: (center.0 + fx, center.1 + fy), radius_px },
                PathKind::Square { corner, side_px } => PathKind::Square { corner: (corner.0 + fx, corner.1 + fy), side_px },
            };
        }
        validate(&self.arena, &self.robots, &self.noise, self.gt_period_us)?;
        Ok(self)
    }

    /// Pauses every robot over `[start_us, end_us)`.
    pub fn with_pause(mut self, start_us: u64, end_us: u64) -> Self {
        for (_, p) in &mut self.robots {
            p.pauses.push((start_us, end_us));
        }
        self
    }
}

/// Radius (half side) of the outermost and innermost paths; the lanes in
/// between are evenly spaced.
const OUTER_PX: f64 = 205.0;
const INNER_PX: f64 = 40.0;

/// Up to four robots on concentric circles or nested squares centred on
/// the mat, with shell contrasts 1.0, 0.9, 0.8, 0.7 and start phases
/// spread evenly around the lap (squares start mid-edge).
pub fn default_scenario(n_robots: usize, pattern: Pattern, power: Power, seed: u64) -> Result<Scenario, SimError> {
    if !(1..=4).contains(&n_robots) {
        return Err(SimError::InvalidParameter(format!("n_robots must be 1..=4, got {n_robots}")));
    }
    let arena = ArenaConfig::default();
    let c = arena.mat_rect.center();
    let robots = (0..n_robots)
        .map(|i| {
            let r = if n_robots == 1 { OUTER_PX } else { OUTER_PX - (OUTER_PX - INNER_PX) * i as f64 / (n_robots - 1) as f64 };
            let (kind, phase) = match pattern {
                Pattern::Circle => (PathKind::Circle { center: c, radius_px: r }, i as f64 / n_robots as f64),
                Pattern::Square => {
                    // Start halfway along an edge; a robot turning in place
                    // at a corner is nearly invisible until it sets off.
                    let edge_s = 2.0 * r / (power.speed_mps() * 100.0 * arena.px_per_cm);
                    let turn_s = 90.0 / TURN_RATE_DEG_PER_S;
                    let leg = (4 * i / n_robots) as f64;
                    let phase = (leg + 0.5 * edge_s / (edge_s + turn_s)) / 4.0;
                    (PathKind::Square { corner: (c.0 - r, c.1 - r), side_px: 2.0 * r }, phase)
                }
            };
            (
                RobotSpec {
                    robot_id: i as u32 + 1,
                    width_px: DEFAULT_ROBOT_WIDTH_PX,
                    length_px: DEFAULT_ROBOT_LENGTH_PX,
                    contrast: CONTRASTS[i],
                },
                PathSpec { kind, speed_mps: power.speed_mps(), phase, pauses: Vec::new() },
            )
        })
        .collect();
    let s = Scenario {
        arena,
        robots,
        noise: NoiseModel { rate_hz_per_px: DEFAULT_NOISE_HZ_PER_PX, seed },
        duration_us: DEFAULT_DURATION_US,
        gt_period_us: DEFAULT_STEP_US,
    };
    validate(&s.arena, &s.robots, &s.noise, s.gt_period_us)?;
    Ok(s)
}

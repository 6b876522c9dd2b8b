//! Parametric four-arm intersection generator.
//!
//! Tracks follow piecewise templates (straight lines, quarter-circle turns,
//! half-circle U-turns, stop-and-go at a signalised stop line) with optional
//! Gaussian speed and heading perturbations. Two knobs, `speed_scale` and the
//! noise levels, are enough to build dataset families with controlled shift.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::{FRAC_PI_2, PI};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{
    AgentType, MapRegion, MapSpec, PhaseInterval, Scene, SignalPhase, SignalTimeline, StopLine,
    Track, TrackPoint,
};
use crate::geometry::{add, rotate, scale, Vec2};

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("a dataset family needs at least 2 members, got {0}")]
    TooFewMembers(usize),
    #[error("duplicate dataset name `{0}`")]
    DuplicateName(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Template {
    Straight,
    Left,
    Right,
    UTurn,
    StopAndGo,
}

impl Template {
    pub const ALL: [Template; 5] =
        [Template::Straight, Template::Left, Template::Right, Template::UTurn, Template::StopAndGo];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BehaviorMix {
    pub straight: f64,
    pub left: f64,
    pub right: f64,
    pub u_turn: f64,
    pub stop_and_go: f64,
}

impl Default for BehaviorMix {
    fn default() -> Self {
        Self { straight: 0.4, left: 0.2, right: 0.2, u_turn: 0.05, stop_and_go: 0.15 }
    }
}

impl BehaviorMix {
    fn weights(&self) -> [f64; 5] {
        [self.straight, self.left, self.right, self.u_turn, self.stop_and_go]
    }

    pub fn only(t: Template) -> Self {
        let mut w = [0.0; 5];
        w[Template::ALL.iter().position(|x| *x == t).unwrap()] = 1.0;
        Self { straight: w[0], left: w[1], right: w[2], u_turn: w[3], stop_and_go: w[4] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentMix {
    pub small_vehicle: f64,
    pub large_vehicle: f64,
    pub two_wheeler: f64,
    pub pedestrian: f64,
}

impl Default for AgentMix {
    fn default() -> Self {
        Self { small_vehicle: 0.7, large_vehicle: 0.1, two_wheeler: 0.15, pedestrian: 0.05 }
    }
}

impl AgentMix {
    fn weights(&self) -> [f64; 4] {
        [self.small_vehicle, self.large_vehicle, self.two_wheeler, self.pedestrian]
    }

    pub fn only(a: AgentType) -> Self {
        let mut w = [0.0; 4];
        w[AgentType::ALL.iter().position(|x| *x == a).unwrap()] = 1.0;
        Self { small_vehicle: w[0], large_vehicle: w[1], two_wheeler: w[2], pedestrian: w[3] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SignalCycle {
    pub green_s: f64,
    pub yellow_s: f64,
    pub red_s: f64,
}

impl Default for SignalCycle {
    fn default() -> Self {
        Self { green_s: 27.0, yellow_s: 3.0, red_s: 30.0 }
    }
}

impl SignalCycle {
    fn period(&self) -> f64 {
        self.green_s + self.yellow_s + self.red_s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntersectionGeometry {
    pub arm_length_m: f64,
    pub lane_offset_m: f64,
    pub box_half_width_m: f64,
    pub crosswalk_width_m: f64,
    pub gap_length_m: f64,
}

impl Default for IntersectionGeometry {
    fn default() -> Self {
        Self {
            arm_length_m: 60.0,
            lane_offset_m: 2.0,
            box_half_width_m: 10.0,
            crosswalk_width_m: 4.0,
            gap_length_m: 4.0,
        }
    }
}

impl IntersectionGeometry {
    fn road_half_width(&self) -> f64 {
        2.0 * self.lane_offset_m
    }

    fn stop_line_u(&self) -> f64 {
        self.box_half_width_m + self.crosswalk_width_m
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub n_tracks: usize,
    /// Tracks spawn on a 0.5 s grid inside `[0, duration_s)`.
    pub duration_s: f64,
    pub sample_rate_hz: f64,
    pub speed_scale: f64,
    /// Per-track uniform speed jitter, as a fraction of nominal speed.
    pub speed_jitter: f64,
    pub accel_noise_std: f64,
    pub heading_noise_std: f64,
    pub behavior_mix: BehaviorMix,
    pub agent_mix: AgentMix,
    pub signal: SignalCycle,
    pub geometry: IntersectionGeometry,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_tracks: 120,
            duration_s: 240.0,
            sample_rate_hz: 10.0,
            speed_scale: 1.0,
            speed_jitter: 0.2,
            accel_noise_std: 0.3,
            heading_noise_std: 0.02,
            behavior_mix: BehaviorMix::default(),
            agent_mix: AgentMix::default(),
            signal: SignalCycle::default(),
            geometry: IntersectionGeometry::default(),
        }
    }
}

/// Deceleration and departure acceleration of stop-and-go tracks.
pub const STOP_ACCEL: f64 = 2.0;

fn check_mix(name: &str, w: &[f64]) -> Result<(), SynthError> {
    if w.iter().any(|x| !(*x >= 0.0)) {
        return Err(SynthError::InvalidConfig(format!("{name} weights must be non-negative")));
    }
    let s: f64 = w.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(SynthError::InvalidConfig(format!("{name} weights sum to {s}, not 1")));
    }
    Ok(())
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidConfig(m.to_string()));
        if !(self.accel_noise_std >= 0.0 && self.heading_noise_std >= 0.0) {
            return bad("noise standard deviations must be >= 0");
        }
        if !(self.speed_scale > 0.0) {
            return bad("speed_scale must be > 0");
        }
        if !(0.0..1.0).contains(&self.speed_jitter) {
            return bad("speed_jitter must lie in [0, 1)");
        }
        if !(self.duration_s > 0.0) {
            return bad("duration_s must be > 0");
        }
        let ticks = self.sample_rate_hz * 0.5;
        if !(ticks >= 1.0 && (ticks - ticks.round()).abs() < 1e-9) {
            return bad("sample_rate_hz must be a positive even integer");
        }
        let s = &self.signal;
        if !(s.green_s > 0.0 && s.yellow_s > 0.0 && s.red_s > 0.0) {
            return bad("signal durations must be > 0");
        }
        let g = &self.geometry;
        if !(g.lane_offset_m > 0.0 && g.box_half_width_m > g.road_half_width()) {
            return bad("box_half_width_m must exceed twice lane_offset_m");
        }
        if !(g.crosswalk_width_m > 0.0
            && g.gap_length_m > 0.0
            && g.arm_length_m > g.stop_line_u() + g.gap_length_m)
        {
            return bad("arm too short for crosswalk and gap");
        }
        check_mix("behavior_mix", &self.behavior_mix.weights())?;
        check_mix("agent_mix", &self.agent_mix.weights())?;
        Ok(())
    }
}

/// Nominal free-flow speed per agent type, m/s, before `speed_scale`.
pub fn nominal_speed(agent: AgentType) -> f64 {
    match agent {
        AgentType::SmallVehicle => 8.0,
        AgentType::LargeVehicle => 6.0,
        AgentType::TwoWheeler => 5.0,
        AgentType::Pedestrian => 1.4,
    }
}

#[derive(Clone, Copy, Debug)]
enum Segment {
    Line { start: Vec2, dir: Vec2, len: f64 },
    Arc { center: Vec2, radius: f64, start_angle: f64, sweep: f64 },
}

impl Segment {
    fn len(&self) -> f64 {
        match *self {
            Segment::Line { len, .. } => len,
            Segment::Arc { radius, sweep, .. } => radius * sweep.abs(),
        }
    }

    /// Position and unit heading at arc length `s` along the segment.
    fn eval(&self, s: f64) -> (Vec2, Vec2) {
        match *self {
            Segment::Line { start, dir, .. } => (add(start, scale(dir, s)), dir),
            Segment::Arc { center, radius, start_angle, sweep } => {
                let sign = sweep.signum();
                let ang = start_angle + sign * s / radius;
                let (sn, cs) = ang.sin_cos();
                let pos = [center[0] + radius * cs, center[1] + radius * sn];
                (pos, [-sign * sn, sign * cs])
            }
        }
    }
}

/// Arc-length parameterised path in the canonical frame: the vehicle enters
/// from the west travelling +x on the right-hand lane (y = -lane_offset).
struct Path {
    segments: Vec<Segment>,
}

impl Path {
    fn len(&self) -> f64 {
        self.segments.iter().map(Segment::len).sum()
    }

    fn eval(&self, mut s: f64) -> (Vec2, Vec2) {
        for (k, seg) in self.segments.iter().enumerate() {
            let l = seg.len();
            if s <= l || k + 1 == self.segments.len() {
                return seg.eval(s.min(l));
            }
            s -= l;
        }
        unreachable!("path has at least one segment")
    }

    fn line(a: Vec2, b: Vec2) -> Segment {
        let d = [b[0] - a[0], b[1] - a[1]];
        let len = d[0].hypot(d[1]);
        Segment::Line { start: a, dir: [d[0] / len, d[1] / len], len }
    }

    fn vehicle(g: &IntersectionGeometry, template: Template) -> Path {
        let (l, b, o) = (g.arm_length_m, g.box_half_width_m, g.lane_offset_m);
        let entry = Self::line([-l, -o], [-b, -o]);
        let segments = match template {
            Template::Straight | Template::StopAndGo => vec![Self::line([-l, -o], [l, -o])],
            Template::Left => vec![
                entry,
                Segment::Arc { center: [-b, b], radius: b + o, start_angle: -FRAC_PI_2, sweep: FRAC_PI_2 },
                Self::line([o, b], [o, l]),
            ],
            Template::Right => vec![
                entry,
                Segment::Arc { center: [-b, -b], radius: b - o, start_angle: FRAC_PI_2, sweep: -FRAC_PI_2 },
                Self::line([-o, -b], [-o, -l]),
            ],
            Template::UTurn => vec![
                entry,
                Segment::Arc { center: [-b, 0.0], radius: o, start_angle: -FRAC_PI_2, sweep: PI },
                Self::line([-b, o], [-l, o]),
            ],
        };
        Path { segments }
    }

    fn pedestrian(g: &IntersectionGeometry) -> Path {
        let x = -(g.box_half_width_m + 0.5 * g.crosswalk_width_m);
        let half = g.road_half_width() + 3.0;
        Path { segments: vec![Self::line([x, -half], [x, half])] }
    }
}

/// Counts per category by largest remainder, ties to the lower index.
fn allocate(n: usize, weights: &[f64]) -> Vec<usize> {
    let raw: Vec<f64> = weights.iter().map(|w| w * n as f64).collect();
    let mut counts: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
    let mut rest: Vec<usize> = (0..weights.len()).collect();
    rest.sort_by(|&a, &b| (raw[b] - raw[b].floor()).total_cmp(&(raw[a] - raw[a].floor())).then(a.cmp(&b)));
    let mut left = n - counts.iter().sum::<usize>();
    for i in rest {
        if left == 0 {
            break;
        }
        if weights[i] > 0.0 {
            counts[i] += 1;
            left -= 1;
        }
    }
    counts
}

/// Rotation taking the canonical west arm onto arm `arm` (0 = east, CCW).
fn arm_rotation(arm: u32) -> f64 {
    arm as f64 * FRAC_PI_2 + PI
}

fn phase_offset(arm: u32, cycle: &SignalCycle) -> f64 {
    if arm % 2 == 0 {
        0.0
    } else {
        cycle.green_s + cycle.yellow_s
    }
}

fn build_signals(cycle: &SignalCycle, horizon: f64) -> SignalTimeline {
    let period = cycle.period();
    let mut approaches = BTreeMap::new();
    for arm in 0..4u32 {
        let offset = phase_offset(arm, cycle);
        // phase boundaries in local cycle time
        let bounds = [
            (SignalPhase::Green, 0.0, cycle.green_s),
            (SignalPhase::Yellow, cycle.green_s, cycle.green_s + cycle.yellow_s),
            (SignalPhase::Red, cycle.green_s + cycle.yellow_s, period),
        ];
        let mut intervals: Vec<PhaseInterval> = Vec::new();
        let mut k = -1.0f64;
        loop {
            let base = offset + k * period;
            if base >= horizon {
                break;
            }
            for (phase, a, b) in bounds {
                let (s, e) = ((base + a).max(0.0), (base + b).min(horizon));
                if e > s {
                    intervals.push(PhaseInterval { phase, start_s: s, end_s: e });
                }
            }
            k += 1.0;
        }
        approaches.insert(arm, intervals);
    }
    SignalTimeline { approaches }
}

fn rect(x0: f64, x1: f64, y0: f64, y1: f64) -> Vec<Vec2> {
    vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]]
}

/// Six passage-stage polygons per arm and one stop line per approach.
pub fn build_map(g: &IntersectionGeometry) -> MapSpec {
    let (l, b, w) = (g.arm_length_m, g.box_half_width_m, g.road_half_width());
    let (cw, gap) = (g.crosswalk_width_m, g.gap_length_m);
    let canonical: [(u8, Vec<Vec2>); 6] = [
        (1, rect(-l, -(b + cw + gap), -w, 0.0)),
        (2, rect(-(b + cw + gap), -(b + cw), -w, 0.0)),
        (3, rect(-(b + cw), -b, -w, 0.0)),
        (4, vec![[0.0, 0.0], [-b, -b], [-b, b]]),
        (5, rect(-(b + cw), -b, 0.0, w)),
        (6, rect(-l, -(b + cw), 0.0, w)),
    ];
    let mut regions = Vec::new();
    let mut stop_lines = Vec::new();
    for arm in 0..4u32 {
        let rot = arm_rotation(arm);
        for (label, poly) in &canonical {
            regions.push(MapRegion {
                label: *label,
                approach_id: arm,
                polygon: poly.iter().map(|p| rotate(*p, rot)).collect(),
            });
        }
        let u = g.stop_line_u();
        stop_lines.push(StopLine { approach_id: arm, a: rotate([-u, -w], rot), b: rotate([-u, 0.0], rot) });
    }
    MapSpec { regions, stop_lines }
}

struct TrackPlan {
    agent: AgentType,
    template: Template,
    arm: u32,
    spawn_tick: i64,
    speed: f64,
}

fn is_green(signals: &SignalTimeline, arm: u32, t: f64) -> bool {
    matches!(signals.phase_at(arm, t), Some(SignalPhase::Green) | None)
}

fn simulate(
    plan: &TrackPlan,
    cfg: &GeneratorConfig,
    signals: &SignalTimeline,
    rng: &mut ChaCha8Rng,
    track_id: u64,
) -> Track {
    let g = &cfg.geometry;
    let path = if plan.agent == AgentType::Pedestrian {
        Path::pedestrian(g)
    } else {
        Path::vehicle(g, plan.template)
    };
    let total = path.len();
    let dt = 1.0 / cfg.sample_rate_hz;
    let stop_s = g.arm_length_m - g.stop_line_u();
    let stop_and_go = plan.template == Template::StopAndGo && plan.agent != AgentType::Pedestrian;
    let rot = arm_rotation(plan.arm);

    let (mut s, mut v, mut lateral, mut drift) = (0.0f64, plan.speed, 0.0f64, 0.0f64);
    let mut points = Vec::new();
    let mut tick = plan.spawn_tick;
    let max_ticks = 100_000;
    for _ in 0..max_ticks {
        let t = tick as f64 / cfg.sample_rate_hz;
        let (p, heading) = path.eval(s);
        let normal = [-heading[1], heading[0]];
        let world = rotate(add(p, scale(normal, lateral)), rot);
        points.push(TrackPoint::new(t, world[0], world[1]));

        let noise_a: f64 = if cfg.accel_noise_std > 0.0 {
            cfg.accel_noise_std * { let z: f64 = StandardNormal.sample(rng); z }
        } else {
            0.0
        };
        let mut accel = 0.5 * (plan.speed - v) + noise_a;
        if stop_and_go {
            let d = stop_s - s;
            let green = is_green(signals, plan.arm, t);
            if d > 0.0 && !green {
                if v <= 0.05 && d < 1.0 {
                    v = 0.0;
                    accel = 0.0;
                } else if v * v / (2.0 * STOP_ACCEL) >= d - v * dt {
                    accel = -v * v / (2.0 * d.max(1e-3));
                }
            } else if v < plan.speed {
                accel = STOP_ACCEL.min((plan.speed - v) / dt) + noise_a;
            }
        }
        v = (v + accel * dt).max(0.0);
        s += v * dt;
        if cfg.heading_noise_std > 0.0 {
            let n: f64 = StandardNormal.sample(rng);
            drift = 0.9 * drift - 0.02 * lateral + cfg.heading_noise_std * n;
            lateral += v * drift.sin() * dt;
        }
        tick += 1;
        if s > total + 1e-9 {
            break;
        }
    }
    Track { track_id, agent_type: plan.agent, points }
}

/// Generates one scene; identical configs give identical scenes.
pub fn generate_scene(config: &GeneratorConfig) -> Result<Scene, SynthError> {
    generate_named_scene(config, "synthetic")
}

fn generate_named_scene(config: &GeneratorConfig, name: &str) -> Result<Scene, SynthError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let cycle = &config.signal;
    let period = cycle.period();
    let horizon = config.duration_s + 4.0 * config.geometry.arm_length_m + 2.0 * period;
    let signals = build_signals(cycle, horizon);
    let map = build_map(&config.geometry);
    let ticks_per_slot = (config.sample_rate_hz * 0.5).round() as i64;
    let n_slots = ((config.duration_s / 0.5).floor() as i64).max(1);

    let behaviors = allocate(config.n_tracks, &config.behavior_mix.weights());
    let agents = allocate(config.n_tracks, &config.agent_mix.weights());
    let mut templates: Vec<Template> = Template::ALL
        .iter()
        .zip(&behaviors)
        .flat_map(|(t, &c)| std::iter::repeat(*t).take(c))
        .collect();
    let mut agent_list: Vec<AgentType> = AgentType::ALL
        .iter()
        .zip(&agents)
        .flat_map(|(a, &c)| std::iter::repeat(*a).take(c))
        .collect();
    templates.shuffle(&mut rng);
    agent_list.shuffle(&mut rng);

    let mut plans = Vec::with_capacity(config.n_tracks);
    for (template, agent) in templates.into_iter().zip(agent_list) {
        let arm = rng.gen_range(0..4u32);
        let jitter = if config.speed_jitter > 0.0 {
            rng.gen_range(-config.speed_jitter..config.speed_jitter)
        } else {
            0.0
        };
        let mut speed = nominal_speed(agent) * config.speed_scale * (1.0 + jitter);
        if template == Template::UTurn && agent != AgentType::Pedestrian {
            speed *= 0.5;
        }
        let mut slot = rng.gen_range(0..n_slots);
        if template == Template::StopAndGo && agent != AgentType::Pedestrian {
            // time the arrival at the stop line into a red phase
            let travel = (config.geometry.arm_length_m - config.geometry.stop_line_u()) / speed;
            let red_start = phase_offset(arm, cycle) + cycle.green_s + cycle.yellow_s;
            let n_cycles = (config.duration_s / period).ceil().max(1.0) as i64;
            let c = rng.gen_range(0..n_cycles) as f64;
            let arrival = red_start + c * period + rng.gen_range(0.0..0.5) * cycle.red_s;
            let mut spawn = arrival - travel;
            while spawn < 0.0 {
                spawn += period;
            }
            slot = (spawn / 0.5).floor() as i64;
        }
        plans.push(TrackPlan { agent, template, arm, spawn_tick: slot * ticks_per_slot, speed });
    }
    plans.sort_by_key(|p| p.spawn_tick);

    let tracks = plans
        .iter()
        .enumerate()
        .map(|(i, plan)| simulate(plan, config, &signals, &mut rng, i as u64 + 1))
        .collect();

    Ok(Scene { scene_id: name.to_string(), tracks, map: Some(map), signals: Some(signals) })
}

/// Partial config applied on top of a base config for one family member.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConfigOverride {
    pub name: Option<String>,
    pub seed: Option<u64>,
    pub n_tracks: Option<usize>,
    pub speed_scale: Option<f64>,
    pub speed_jitter: Option<f64>,
    pub accel_noise_std: Option<f64>,
    pub heading_noise_std: Option<f64>,
    pub behavior_mix: Option<BehaviorMix>,
    pub agent_mix: Option<AgentMix>,
}

impl ConfigOverride {
    pub fn apply(&self, base: &GeneratorConfig, index: usize) -> GeneratorConfig {
        let mut c = base.clone();
        c.seed = self.seed.unwrap_or(base.seed.wrapping_add(index as u64));
        if let Some(v) = self.n_tracks {
            c.n_tracks = v;
        }
        if let Some(v) = self.speed_scale {
            c.speed_scale = v;
        }
        if let Some(v) = self.speed_jitter {
            c.speed_jitter = v;
        }
        if let Some(v) = self.accel_noise_std {
            c.accel_noise_std = v;
        }
        if let Some(v) = self.heading_noise_std {
            c.heading_noise_std = v;
        }
        if let Some(v) = &self.behavior_mix {
            c.behavior_mix = v.clone();
        }
        if let Some(v) = &self.agent_mix {
            c.agent_mix = v.clone();
        }
        c
    }

    pub fn name_or(&self, index: usize) -> String {
        self.name.clone().unwrap_or_else(|| format!("d{index}"))
    }
}

/// Member `i` is `base` with `shifts[i]` applied and seed `base.seed + i`
/// unless the override pins one.
pub fn generate_dataset_family(
    base: &GeneratorConfig,
    shifts: &[ConfigOverride],
) -> Result<Vec<(String, Scene)>, SynthError> {
    if shifts.len() < 2 {
        return Err(SynthError::TooFewMembers(shifts.len()));
    }
    let mut names = BTreeSet::new();
    let named: Vec<(String, GeneratorConfig)> = shifts
        .iter()
        .enumerate()
        .map(|(i, o)| (o.name_or(i), o.apply(base, i)))
        .collect();
    for (n, _) in &named {
        if !names.insert(n.clone()) {
            return Err(SynthError::DuplicateName(n.clone()));
        }
    }
    named
        .par_iter()
        .map(|(name, cfg)| generate_named_scene(cfg, name).map(|s| (name.clone(), s)))
        .collect()
}

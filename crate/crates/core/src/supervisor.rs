//! Online verification of the learned controller and the switching logic
//! between it and the avoidance controller.

use std::f64::consts::PI;
use std::fmt::{self, Write as _};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::controllers::{kb_control, AvoidanceConfig, GoalZone, Obstacle, TangentialSource};
use crate::dynamics::{closed_form_unicycle, ControlInput, Pose, OMEGA_MAX, V_MAX};
use crate::error::{Error, Result};
use crate::flowpipe::{flow_control_period, flow_control_period_model, ControlBox, ControlModel, FlowSettings, Flowpipe};
use crate::interval::Interval;
use crate::network::NetworkSpec;
use crate::nn_reach::{nn_tm_propagate, PropagationSettings};
use crate::taylor::{TaylorModel, TaylorModelVector};
use crate::world::{detect_obstacles, raycast_scan, LocalizationEstimate, Localizer, WorldMap};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerificationSettings {
    pub steps: usize,
    /// Control period, seconds.
    pub delta: f64,
    pub tm_degree: u32,
    pub bp_order: usize,
    pub symbolic_remainder: bool,
    /// Flowpipe segments per control period.
    pub substeps: usize,
}

impl Default for VerificationSettings {
    fn default() -> Self {
        VerificationSettings {
            steps: 10,
            delta: 0.2,
            tm_degree: 2,
            bp_order: 2,
            symbolic_remainder: true,
            substeps: 10,
        }
    }
}

impl VerificationSettings {
    fn flow(&self) -> FlowSettings {
        FlowSettings {
            substeps: self.substeps,
            ..FlowSettings::with_degree(self.tm_degree)
        }
    }

    fn propagation(&self) -> PropagationSettings {
        PropagationSettings {
            bp_order: self.bp_order,
            tm_degree: self.tm_degree,
            symbolic_remainder: self.symbolic_remainder,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ViolationKind {
    /// Index into the obstacle list that was checked.
    Obstacle(usize),
    Wall,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Violation {
    /// Control period (0-based) in which the flowpipe first hit.
    pub step: usize,
    pub kind: ViolationKind,
}

#[derive(Clone, Debug)]
pub struct SafetyVerdict {
    pub safe: bool,
    /// The flowpipe could not be certified; treated as unsafe.
    pub failure: bool,
    pub flowpipe: Flowpipe,
    pub first_violation: Option<Violation>,
    pub runtime_seconds: f64,
}

impl SafetyVerdict {
    pub fn label(&self) -> &'static str {
        match (self.safe, self.failure) {
            (true, _) => "safe",
            (false, false) => "unsafe",
            (false, true) => "failure",
        }
    }
}

/// True when the box `x × y` comes within `r` of `(cx, cy)`.
pub fn box_meets_disk(x: Interval, y: Interval, cx: f64, cy: f64, r: f64) -> bool {
    let dx = (x.lo() - cx).max(cx - x.hi()).max(0.0);
    let dy = (y.lo() - cy).max(cy - y.hi()).max(0.0);
    // small slack keeps the test conservative under rounding
    dx.hypot(dy) <= r * (1.0 + 1e-12) + 1e-12
}

fn first_hit(x: Interval, y: Interval, obstacles: &[Obstacle], world: &WorldMap) -> Option<ViolationKind> {
    let rr = world.robot_radius;
    for (id, o) in obstacles.iter().enumerate() {
        if box_meets_disk(x, y, o.x, o.y, o.radius + rr) {
            return Some(ViolationKind::Obstacle(id));
        }
    }
    if x.lo() < rr || y.lo() < rr || x.hi() > world.width - rr || y.hi() > world.height - rr {
        return Some(ViolationKind::Wall);
    }
    None
}

/// Initial set `estimate ± uncertainty` as a Taylor-model vector.
pub fn initial_set(estimate: &LocalizationEstimate) -> Result<TaylorModelVector> {
    let p = estimate.pose.as_array();
    let mut b = [Interval::ZERO; 3];
    for k in 0..3 {
        let u = estimate.uncertainty[k];
        if !(u >= 0.0) || !p[k].is_finite() {
            return Err(Error::InvalidInterval { lo: p[k] - u, hi: p[k] + u });
        }
        // one ulp outward covers the rounding of the subtraction and sum
        b[k] = Interval::new((p[k] - u).next_down(), (p[k] + u).next_up())?;
    }
    Ok(TaylorModelVector::from_box(&b))
}

/// Largest domain scaling accepted when absorbing remainders between
/// control periods.
const SHRINK_WRAP_LIMIT: f64 = 2.0;

/// Encloses the closed loop under the learned controller for
/// `settings.steps` control periods and checks it against the obstacles
/// (inflated by the robot radius) and the walls. A heading set that reaches
/// ±π at a control update is reported as a failure.
pub fn verify_nn_safe(
    estimate: &LocalizationEstimate,
    net: &NetworkSpec,
    obstacles: &[Obstacle],
    world: &WorldMap,
    settings: &VerificationSettings,
) -> Result<SafetyVerdict> {
    verify_nn_safe_until(estimate, net, obstacles, world, settings, None)
}

/// [`verify_nn_safe`] for a task that ends in `goal`: once the whole set is
/// inside the goal zone at a control update the episode is over, and the
/// rest of the horizon is not checked.
pub fn verify_nn_safe_until(
    estimate: &LocalizationEstimate,
    net: &NetworkSpec,
    obstacles: &[Obstacle],
    world: &WorldMap,
    settings: &VerificationSettings,
    goal: Option<&GoalZone>,
) -> Result<SafetyVerdict> {
    if settings.steps == 0 {
        return Err(Error::Config("verification needs at least one step".into()));
    }
    let started = Instant::now();
    let flow = settings.flow();
    let prop = settings.propagation();
    let mut state = initial_set(estimate)?;
    let mut pipe = Flowpipe::default();
    let finish = |pipe: Flowpipe, violation: Option<Violation>, failure: bool| SafetyVerdict {
        safe: violation.is_none() && !failure,
        failure,
        flowpipe: pipe,
        first_violation: violation,
        runtime_seconds: started.elapsed().as_secs_f64(),
    };
    for step in 0..settings.steps {
        let out = nn_tm_propagate(net, &state, &prop)?;
        let t0 = step as f64 * settings.delta;
        // The first control is computed from the estimate, not the true
        // state, so only its range is known. Later ones keep their
        // dependence on the state unless the actuator caps cut in.
        let flowed = if step == 0 {
            let r = out.ranges();
            let control = ControlBox {
                v: r[0].clamp_to(-V_MAX, V_MAX),
                omega: r[1].clamp_to(-OMEGA_MAX, OMEGA_MAX),
            };
            flow_control_period(&state, &control, settings.delta, t0, &flow)
        } else {
            let capped = |tm: &TaylorModel, cap: f64| {
                let r = tm.range();
                if r.lo() >= -cap && r.hi() <= cap {
                    tm.clone()
                } else {
                    TaylorModel::from_interval(r.clamp_to(-cap, cap), tm.domain)
                }
            };
            let control = ControlModel {
                v: capped(&out.components[0], V_MAX),
                omega: capped(&out.components[1], OMEGA_MAX),
            };
            flow_control_period_model(&state, &control, settings.delta, t0, &flow)
        };
        let (segments, next) = match flowed {
            Ok(v) => v,
            Err(Error::ContractionFailure { .. }) => return Ok(finish(pipe, None, true)),
            Err(e) => return Err(e),
        };
        for seg in segments {
            let hit = first_hit(seg.x_range, seg.y_range, obstacles, world);
            pipe.segments.push(seg);
            if let Some(kind) = hit {
                return Ok(finish(pipe, Some(Violation { step, kind }), false));
            }
        }
        // the executed loop feeds the network a wrapped heading; past ±π the
        // verified inputs no longer match it
        let r = next.ranges();
        if goal.is_some_and(|g| r[1].lo() >= g.y_min && r[0].lo() >= g.x_min && r[0].hi() <= g.x_max) {
            break;
        }
        let theta = r[2];
        if step + 1 < settings.steps && !(theta.lo() > -PI && theta.hi() < PI) {
            return Ok(finish(pipe, None, true));
        }
        // the next period only depends on the set, not on which initial
        // state maps where, so the remainders can move into the polynomial
        state = next.shrink_wrap(SHRINK_WRAP_LIMIT).unwrap_or(next);
    }
    Ok(finish(pipe, None, false))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Nn,
    Backup,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Nn => "NN",
            Mode::Backup => "BACKUP",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SupervisorMode {
    pub mode: Mode,
    /// The obstacle κ_b was steering around, in BACKUP.
    pub active_obstacle: Option<Obstacle>,
}

impl SupervisorMode {
    pub const NN: SupervisorMode = SupervisorMode {
        mode: Mode::Nn,
        active_obstacle: None,
    };
}

/// The mode transition, a function of the current mode and verdict only.
pub fn next_mode(_mode: Mode, safe: bool) -> Mode {
    if safe {
        Mode::Nn
    } else {
        Mode::Backup
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AvoidanceSettings {
    /// Standoff beyond the detected obstacle's surface, metres.
    pub clearance: f64,
    pub tangential_source: TangentialSource,
}

impl Default for AvoidanceSettings {
    fn default() -> Self {
        AvoidanceSettings {
            clearance: 0.35,
            tangential_source: TangentialSource::UM,
        }
    }
}

fn backup_target(verdict: &SafetyVerdict, pose: &Pose, obstacles: &[Obstacle]) -> Option<Obstacle> {
    if let Some(Violation {
        kind: ViolationKind::Obstacle(id),
        ..
    }) = verdict.first_violation
    {
        if let Some(o) = obstacles.get(id) {
            return Some(*o);
        }
    }
    obstacles
        .iter()
        .min_by(|a, b| a.clearance(pose.x, pose.y).total_cmp(&b.clearance(pose.x, pose.y)))
        .copied()
}

/// Gap kept between the avoidance orbit and the walls.
const WALL_MARGIN: f64 = 0.05;

/// Standoff for circling `o`: its radius plus the clearance, shortened when
/// the orbit would reach a wall, but never closer than the robot radius.
pub fn standoff(o: &Obstacle, world: &WorldMap, avoidance: &AvoidanceSettings) -> f64 {
    let rr = world.robot_radius;
    let wall_room = world.distance_to_walls(o.x, o.y) - rr - WALL_MARGIN;
    (o.radius + avoidance.clearance)
        .min(wall_room)
        .max(o.radius + rr + 0.02)
}

/// Turns in place instead when driving for `delta` would bring the robot
/// closer to a wall than the robot radius plus [`WALL_MARGIN`]. The
/// avoidance law itself ignores walls, and its approach spiral from afar
/// can cross one.
fn wall_guard(pose: &Pose, control: ControlInput, world: &WorldMap, delta: f64) -> ControlInput {
    let limit = world.robot_radius + WALL_MARGIN;
    let now = world.distance_to_walls(pose.x, pose.y);
    let approaches = (1..=4).any(|k| {
        let p = closed_form_unicycle(*pose, control, delta * k as f64 / 4.0);
        let d = world.distance_to_walls(p.x, p.y);
        d < limit && d < now
    });
    if approaches {
        ControlInput { v: 0.0, ..control }
    } else {
        control
    }
}

/// One tick of the switching logic. In BACKUP the avoidance controller
/// circles the violating obstacle (or the nearest one) at the
/// [`standoff`], held back from the walls for the coming period of length
/// `delta`; with nothing to circle it stops.
#[allow(clippy::too_many_arguments)]
pub fn supervisor_step(
    mode: &SupervisorMode,
    verdict: &SafetyVerdict,
    estimate: &LocalizationEstimate,
    obstacles: &[Obstacle],
    net: &NetworkSpec,
    world: &WorldMap,
    avoidance: &AvoidanceSettings,
    delta: f64,
) -> Result<(SupervisorMode, ControlInput)> {
    let pose = estimate.pose;
    match next_mode(mode.mode, verdict.safe) {
        Mode::Nn => {
            let out = net.eval(&pose.as_array())?;
            Ok((SupervisorMode::NN, ControlInput::new(out[0], out[1]).clamped()))
        }
        Mode::Backup => {
            let target = backup_target(verdict, &pose, obstacles);
            let control = match target {
                Some(o) => {
                    let cfg = AvoidanceConfig {
                        tangential_source: avoidance.tangential_source,
                        ..AvoidanceConfig::new(standoff(&o, world, avoidance))
                    };
                    match kb_control(&pose, &o, &cfg) {
                        Ok(c) => wall_guard(&pose, c.clamped(), world, delta),
                        Err(Error::CoincidentObstacle) => ControlInput::ZERO,
                        Err(e) => return Err(e),
                    }
                }
                None => ControlInput::ZERO,
            };
            Ok((
                SupervisorMode {
                    mode: Mode::Backup,
                    active_obstacle: target,
                },
                control,
            ))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeConfig {
    pub world: WorldMap,
    pub start: Pose,
    pub goal: GoalZone,
    /// Localization half-widths (x, y, θ).
    pub noise: [f64; 3],
    pub timeout: f64,
    /// Wall-clock budget per verification, seconds.
    pub deadline: f64,
    pub verification: VerificationSettings,
    pub avoidance: AvoidanceSettings,
    /// Collision checks per control period.
    pub collision_samples: usize,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig {
            world: WorldMap::default(),
            start: Pose::new(0.5, 1.0, 0.0),
            goal: GoalZone::default(),
            noise: [0.01, 0.01, 0.01],
            timeout: 200.0,
            deadline: 0.2,
            verification: VerificationSettings::default(),
            avoidance: AvoidanceSettings::default(),
            collision_samples: 20,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EpisodeStatus {
    GoalReached,
    Collision,
    Timeout,
}

impl fmt::Display for EpisodeStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EpisodeStatus::GoalReached => "goal",
            EpisodeStatus::Collision => "collision",
            EpisodeStatus::Timeout => "timeout",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TickRecord {
    pub t: f64,
    pub pose: Pose,
    pub mode: Mode,
    pub control: ControlInput,
    pub verdict: &'static str,
    pub runtime_seconds: f64,
    pub deadline_miss: bool,
    /// Hull of each control period's flowpipe: `[x_lo, x_hi, y_lo, y_hi]`.
    pub boxes: Vec<[f64; 4]>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeLog {
    pub ticks: Vec<TickRecord>,
    pub status: EpisodeStatus,
    pub final_pose: Pose,
    pub end_time: f64,
    pub delta: f64,
}

impl EpisodeLog {
    pub const HEADER: &'static str = "t,x,y,theta,mode,v,omega,verdict,verify_runtime_s,deadline_miss";

    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::HEADER);
        s.push('\n');
        for r in &self.ticks {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{}",
                r.t,
                r.pose.x,
                r.pose.y,
                r.pose.theta,
                r.mode,
                r.control.v,
                r.control.omega,
                r.verdict,
                r.runtime_seconds,
                r.deadline_miss
            );
        }
        s
    }

    /// Flowpipe boxes: `t,period,x_lo,x_hi,y_lo,y_hi,mode`.
    pub fn boxes_csv(&self) -> String {
        let mut s = String::from("t,period,x_lo,x_hi,y_lo,y_hi,mode\n");
        for r in &self.ticks {
            for (k, b) in r.boxes.iter().enumerate() {
                let _ = writeln!(s, "{},{},{},{},{},{},{}", r.t, k, b[0], b[1], b[2], b[3], r.mode);
            }
        }
        s
    }

    pub fn total_time(&self) -> f64 {
        self.end_time
    }

    pub fn backup_time(&self) -> f64 {
        self.ticks.iter().filter(|r| r.mode == Mode::Backup).count() as f64 * self.delta
    }

    /// Number of NN → BACKUP → NN round trips.
    pub fn switch_cycles(&self) -> usize {
        let mut cycles = 0;
        let mut in_backup = false;
        for r in &self.ticks {
            match (in_backup, r.mode) {
                (false, Mode::Backup) => in_backup = true,
                (true, Mode::Nn) => {
                    in_backup = false;
                    cycles += 1;
                }
                _ => {}
            }
        }
        cycles
    }

    pub fn mean_runtime(&self) -> f64 {
        if self.ticks.is_empty() {
            return 0.0;
        }
        self.ticks.iter().map(|r| r.runtime_seconds).sum::<f64>() / self.ticks.len() as f64
    }

    pub fn deadline_misses(&self) -> usize {
        self.ticks.iter().filter(|r| r.deadline_miss).count()
    }

    /// Smallest true clearance between robot footprint and any obstacle
    /// over the logged ticks.
    pub fn min_clearance(&self, world: &WorldMap) -> f64 {
        self.ticks
            .iter()
            .flat_map(|r| world.obstacles.iter().map(move |o| o.clearance(r.pose.x, r.pose.y)))
            .fold(f64::INFINITY, f64::min)
            - world.robot_radius
    }
}

/// Fixed-step closed-loop simulation: sense, localize, detect, verify,
/// switch, then integrate the true dynamics over one period.
pub fn run_episode(cfg: &EpisodeConfig, net: &NetworkSpec, seed: u64) -> Result<EpisodeLog> {
    cfg.world.validate()?;
    let delta = cfg.verification.delta;
    let mut localizer = Localizer::new(cfg.noise, seed);
    let mut pose = cfg.start.wrapped();
    let mut mode = SupervisorMode::NN;
    let mut ticks = Vec::new();
    let max_ticks = (cfg.timeout / delta).round() as usize;
    let samples = cfg.collision_samples.max(1);
    for tick in 0..max_ticks {
        let t = tick as f64 * delta;
        if cfg.goal.contains(&pose) {
            return Ok(EpisodeLog {
                ticks,
                status: EpisodeStatus::GoalReached,
                final_pose: pose,
                end_time: t,
                delta,
            });
        }
        let scan = raycast_scan(&pose, &cfg.world)?;
        let estimate = localizer.localize(&pose);
        let detected = detect_obstacles(&scan, &estimate, &cfg.world);
        let verdict = verify_nn_safe_until(&estimate, net, &detected, &cfg.world, &cfg.verification, Some(&cfg.goal))?;
        let (next, control) = supervisor_step(&mode, &verdict, &estimate, &detected, net, &cfg.world, &cfg.avoidance, delta)?;
        mode = next;
        let boxes = period_hulls(&verdict.flowpipe, delta);
        ticks.push(TickRecord {
            t,
            pose,
            mode: mode.mode,
            control,
            verdict: verdict.label(),
            runtime_seconds: verdict.runtime_seconds,
            deadline_miss: verdict.runtime_seconds > cfg.deadline,
            boxes,
        });
        for k in 1..=samples {
            let p = closed_form_unicycle(pose, control, delta * k as f64 / samples as f64);
            if cfg.world.in_collision(p.x, p.y) {
                return Ok(EpisodeLog {
                    ticks,
                    status: EpisodeStatus::Collision,
                    final_pose: p,
                    end_time: t + delta * k as f64 / samples as f64,
                    delta,
                });
            }
        }
        pose = closed_form_unicycle(pose, control, delta).wrapped();
    }
    Ok(EpisodeLog {
        ticks,
        status: EpisodeStatus::Timeout,
        final_pose: pose,
        end_time: max_ticks as f64 * delta,
        delta,
    })
}

fn period_hulls(pipe: &Flowpipe, delta: f64) -> Vec<[f64; 4]> {
    let mut out: Vec<[f64; 4]> = Vec::new();
    for seg in &pipe.segments {
        let k = ((seg.t_start / delta) + 1e-9).floor() as usize;
        if out.len() <= k {
            out.push([seg.x_range.lo(), seg.x_range.hi(), seg.y_range.lo(), seg.y_range.hi()]);
        } else {
            let b = &mut out[k];
            b[0] = b[0].min(seg.x_range.lo());
            b[1] = b[1].max(seg.x_range.hi());
            b[2] = b[2].min(seg.y_range.lo());
            b[3] = b[3].max(seg.y_range.hi());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Activation, Layer};

    /// `v = 0.22`, `ω = 0` everywhere.
    fn straight_net() -> NetworkSpec {
        NetworkSpec::new(vec![
            Layer::new(2, 3, vec![0.0; 6], vec![0.0; 2], Activation::Relu).unwrap(),
            Layer::new(2, 2, vec![0.0; 4], vec![0.22, 0.0], Activation::Identity).unwrap(),
        ])
        .unwrap()
    }

    fn estimate(x: f64, y: f64, th: f64) -> LocalizationEstimate {
        LocalizationEstimate {
            pose: Pose::new(x, y, th),
            uncertainty: [0.01; 3],
        }
    }

    #[test]
    fn wall_guard_stops_only_toward_the_wall() {
        let world = WorldMap::default();
        let c = ControlInput { v: 0.22, omega: 0.3 };
        // 0.2 m from the right wall, heading into it
        let stopped = wall_guard(&Pose::new(4.8, 2.5, 0.0), c, &world, 0.2);
        assert_eq!(stopped, ControlInput { v: 0.0, omega: 0.3 });
        // same spot heading away
        assert_eq!(wall_guard(&Pose::new(4.8, 2.5, PI), c, &world, 0.2), c);
        // open space
        assert_eq!(wall_guard(&Pose::new(2.5, 2.5, 0.0), c, &world, 0.2), c);
    }

    #[test]
    fn open_space_is_safe() {
        let v = verify_nn_safe(&estimate(2.5, 2.5, 0.0), &straight_net(), &[], &WorldMap::default(), &VerificationSettings::default()).unwrap();
        assert!(v.safe && !v.failure);
        assert_eq!(v.flowpipe.segments.len(), 100);
        assert!((v.flowpipe.end_time() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn obstacle_ahead_is_unsafe() {
        let o = Obstacle::new(2.8, 2.5, 0.2).unwrap();
        let v = verify_nn_safe(&estimate(2.5, 2.5, 0.0), &straight_net(), &[o], &WorldMap::default(), &VerificationSettings::default()).unwrap();
        assert!(!v.safe);
        let hit = v.first_violation.unwrap();
        assert_eq!(hit.kind, ViolationKind::Obstacle(0));
        assert!(hit.step < 10);
    }

    #[test]
    fn obstacle_behind_is_safe() {
        let o = Obstacle::new(2.5 - 3.0 * 0.5f64.sqrt(), 2.5 - 3.0 * 0.5f64.sqrt(), 0.2).unwrap();
        let v = verify_nn_safe(&estimate(2.5, 2.5, std::f64::consts::FRAC_PI_4), &straight_net(), &[o], &WorldMap::default(), &VerificationSettings::default()).unwrap();
        assert!(v.safe);
    }

    /// `v = 0`, constant turn rate `omega`.
    fn spin_net(omega: f64) -> NetworkSpec {
        NetworkSpec::new(vec![Layer::new(2, 3, vec![0.0; 6], vec![0.0, omega], Activation::Identity).unwrap()]).unwrap()
    }

    #[test]
    fn heading_through_pi_is_not_certified() {
        let settings = VerificationSettings::default();
        let v = verify_nn_safe(&estimate(2.5, 2.5, 3.0), &spin_net(1.0), &[], &WorldMap::default(), &settings).unwrap();
        assert!(!v.safe && v.failure && v.first_violation.is_none());
        assert_eq!(v.label(), "failure");
        let v = verify_nn_safe(&estimate(2.5, 2.5, 3.0), &spin_net(-1.0), &[], &WorldMap::default(), &settings).unwrap();
        assert!(v.safe);
    }

    #[test]
    fn horizon_ends_inside_the_goal() {
        let settings = VerificationSettings { steps: 30, ..Default::default() };
        let est = estimate(2.5, 3.9, std::f64::consts::FRAC_PI_2);
        let world = WorldMap::default();
        let v = verify_nn_safe(&est, &straight_net(), &[], &world, &settings).unwrap();
        assert_eq!(v.first_violation.map(|h| h.kind), Some(ViolationKind::Wall));
        let goal = GoalZone::default();
        let v = verify_nn_safe_until(&est, &straight_net(), &[], &world, &settings, Some(&goal)).unwrap();
        assert!(v.safe);
        assert!(v.flowpipe.end_time() < 1.0);
    }

    #[test]
    fn walls_are_unsafe() {
        let v = verify_nn_safe(&estimate(4.6, 2.5, 0.0), &straight_net(), &[], &WorldMap::default(), &VerificationSettings::default()).unwrap();
        assert_eq!(v.first_violation.map(|h| h.kind), Some(ViolationKind::Wall));
    }

    #[test]
    fn mode_machine() {
        let net = straight_net();
        let est = estimate(2.0, 2.5, 0.0);
        let o = Obstacle::new(3.0, 2.5, 0.2).unwrap();
        let safe = verify_nn_safe(&est, &net, &[], &WorldMap::default(), &VerificationSettings::default()).unwrap();
        let unsafe_ = verify_nn_safe(&estimate(2.5, 2.5, 0.0), &net, &[o], &WorldMap::default(), &VerificationSettings::default()).unwrap();
        assert!(safe.safe && !unsafe_.safe);
        let avoid = AvoidanceSettings::default();

        let (m, c) = supervisor_step(&SupervisorMode::NN, &safe, &est, &[o], &net, &WorldMap::default(), &avoid, 0.2).unwrap();
        assert_eq!(m.mode, Mode::Nn);
        assert_eq!(c, ControlInput::new(0.22, 0.0));

        let (m, c) = supervisor_step(&SupervisorMode::NN, &unsafe_, &est, &[o], &net, &WorldMap::default(), &avoid, 0.2).unwrap();
        assert_eq!(m.mode, Mode::Backup);
        let cfg = AvoidanceConfig::new(0.2 + avoid.clearance);
        assert_eq!(c, kb_control(&est.pose, &o, &cfg).unwrap());

        let (m2, _) = supervisor_step(&m, &unsafe_, &est, &[o], &net, &WorldMap::default(), &avoid, 0.2).unwrap();
        assert_eq!(m2.mode, Mode::Backup);
        let (m3, _) = supervisor_step(&m2, &safe, &est, &[o], &net, &WorldMap::default(), &avoid, 0.2).unwrap();
        assert_eq!(m3.mode, Mode::Nn);

        for mode in [Mode::Nn, Mode::Backup] {
            assert_eq!(next_mode(mode, true), Mode::Nn);
            assert_eq!(next_mode(mode, false), Mode::Backup);
        }
    }

    #[test]
    fn straight_net_episode_in_open_world() {
        // drives straight north into the goal zone
        let cfg = EpisodeConfig {
            start: Pose::new(0.5, 3.5, std::f64::consts::FRAC_PI_2),
            ..EpisodeConfig::default()
        };
        let log = run_episode(&cfg, &straight_net(), 1).unwrap();
        assert_eq!(log.status, EpisodeStatus::GoalReached);
        assert!(log.ticks.iter().all(|r| r.mode == Mode::Nn));
        assert_eq!(log.switch_cycles(), 0);
    }
}

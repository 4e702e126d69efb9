//! The geometric obstacle-avoidance controller, the scripted expert that
//! produces demonstrations, and the reference path it follows.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::dynamics::{wrap_to_pi, ControlInput, Pose, OMEGA_MAX, V_MAX};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub x: f64,
    pub y: f64,
    pub radius: f64,
}

impl Obstacle {
    pub fn new(x: f64, y: f64, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !x.is_finite() || !y.is_finite() {
            return Err(Error::Config(format!("invalid obstacle ({x}, {y}) r={radius}")));
        }
        Ok(Obstacle { x, y, radius })
    }

    pub fn inflated(&self, by: f64) -> Obstacle {
        Obstacle {
            radius: self.radius + by,
            ..*self
        }
    }

    /// Distance from `(x, y)` to the obstacle's surface (negative inside).
    pub fn clearance(&self, x: f64, y: f64) -> f64 {
        (x - self.x).hypot(y - self.y) - self.radius
    }
}

/// Which vector is rotated by +90° to produce the tangential component.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TangentialSource {
    /// The robot-to-obstacle vector.
    #[default]
    UM,
    /// The standoff-corrected vector; stalls exactly at distance `d`.
    UP,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AvoidanceConfig {
    /// Standoff distance from the obstacle centre, metres.
    pub d: f64,
    pub v_cap: f64,
    pub omega_cap: f64,
    pub tangential_source: TangentialSource,
}

impl AvoidanceConfig {
    pub fn new(d: f64) -> Self {
        AvoidanceConfig {
            d,
            v_cap: V_MAX,
            omega_cap: OMEGA_MAX,
            tangential_source: TangentialSource::UM,
        }
    }
}

/// Intermediate vectors of the avoidance law, exposed for inspection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AvoidanceTerms {
    pub u_m: [f64; 2],
    pub u_p: [f64; 2],
    pub u_v: [f64; 2],
    pub u: [f64; 2],
    pub heading: f64,
}

pub fn kb_terms(pose: &Pose, obstacle: &Obstacle, cfg: &AvoidanceConfig) -> Result<AvoidanceTerms> {
    let u_m = [obstacle.x - pose.x, obstacle.y - pose.y];
    let norm = u_m[0].hypot(u_m[1]);
    if norm <= 1e-9 {
        return Err(Error::CoincidentObstacle);
    }
    let u_p = [u_m[0] - u_m[0] / norm * cfg.d, u_m[1] - u_m[1] / norm * cfg.d];
    let src = match cfg.tangential_source {
        TangentialSource::UM => u_m,
        TangentialSource::UP => u_p,
    };
    // R = [[0, -1], [1, 0]]
    let u_v = [-src[1], src[0]];
    let u = [u_p[0] + u_v[0], u_p[1] + u_v[1]];
    Ok(AvoidanceTerms {
        u_m,
        u_p,
        u_v,
        u,
        heading: u[1].atan2(u[0]),
    })
}

/// `(v, ω) = (min(v_cap, ‖u‖), clamp(wrap(φ − θ)))`.
pub fn kb_control(pose: &Pose, obstacle: &Obstacle, cfg: &AvoidanceConfig) -> Result<ControlInput> {
    let terms = kb_terms(pose, obstacle, cfg)?;
    let speed = terms.u[0].hypot(terms.u[1]);
    Ok(ControlInput {
        v: cfg.v_cap.min(speed),
        omega: wrap_to_pi(terms.heading - pose.theta).clamp(-cfg.omega_cap, cfg.omega_cap),
    })
}

/// Polyline approximation of a reference path with cumulative arc length.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferencePath {
    points: Vec<[f64; 2]>,
    arc: Vec<f64>,
}

/// Geometry of the default left-turn path: straight, quarter arc, straight.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LeftTurnPath {
    pub start: [f64; 2],
    /// Where the first straight ends and the arc begins.
    pub corner: [f64; 2],
    pub radius: f64,
    /// y coordinate where the final straight ends.
    pub end_y: f64,
}

impl Default for LeftTurnPath {
    fn default() -> Self {
        LeftTurnPath {
            start: [0.5, 1.0],
            corner: [3.0, 1.0],
            radius: 1.0,
            end_y: 4.5,
        }
    }
}

const PATH_RESOLUTION: f64 = 0.005;

impl ReferencePath {
    pub fn from_points(points: Vec<[f64; 2]>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Config("reference path needs at least two points".into()));
        }
        let mut arc = vec![0.0];
        for w in points.windows(2) {
            let last = *arc.last().expect("non-empty");
            arc.push(last + (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]));
        }
        Ok(ReferencePath { points, arc })
    }

    pub fn left_turn(g: &LeftTurnPath) -> Result<Self> {
        let mut pts = Vec::new();
        let push_line = |pts: &mut Vec<[f64; 2]>, a: [f64; 2], b: [f64; 2]| {
            let len = (b[0] - a[0]).hypot(b[1] - a[1]);
            let n = (len / PATH_RESOLUTION).ceil().max(1.0) as usize;
            for k in 0..n {
                let s = k as f64 / n as f64;
                pts.push([a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]);
            }
        };
        push_line(&mut pts, g.start, g.corner);
        let center = [g.corner[0], g.corner[1] + g.radius];
        let n = ((FRAC_PI_2 * g.radius) / PATH_RESOLUTION).ceil() as usize;
        for k in 0..n {
            let a = -FRAC_PI_2 + FRAC_PI_2 * k as f64 / n as f64;
            pts.push([center[0] + g.radius * a.cos(), center[1] + g.radius * a.sin()]);
        }
        let arc_end = [center[0] + g.radius, center[1]];
        push_line(&mut pts, arc_end, [arc_end[0], g.end_y]);
        pts.push([arc_end[0], g.end_y]);
        ReferencePath::from_points(pts)
    }

    pub fn length(&self) -> f64 {
        *self.arc.last().expect("non-empty")
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    /// Index of the closest polyline vertex and the distance to it.
    pub fn nearest(&self, x: f64, y: f64) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (i, p) in self.points.iter().enumerate() {
            let d = (p[0] - x).hypot(p[1] - y);
            if d < best.1 {
                best = (i, d);
            }
        }
        (best.0, best.1)
    }

    pub fn arc_length_at(&self, index: usize) -> f64 {
        self.arc[index]
    }

    /// Point at arc length `s`, clamped to the path ends.
    pub fn point_at(&self, s: f64) -> [f64; 2] {
        if s <= 0.0 {
            return self.points[0];
        }
        if s >= self.length() {
            return *self.points.last().expect("non-empty");
        }
        let i = self.arc.partition_point(|&a| a <= s).max(1) - 1;
        let seg = self.arc[i + 1] - self.arc[i];
        let f = if seg > 0.0 { (s - self.arc[i]) / seg } else { 0.0 };
        let (a, b) = (self.points[i], self.points[i + 1]);
        [a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1])]
    }

    /// Unit tangent at arc length `s`.
    pub fn tangent_at(&self, s: f64) -> [f64; 2] {
        let a = self.point_at(s - PATH_RESOLUTION);
        let b = self.point_at(s + PATH_RESOLUTION);
        let n = (b[0] - a[0]).hypot(b[1] - a[1]);
        [(b[0] - a[0]) / n, (b[1] - a[1]) / n]
    }
}

/// Goal region `x ∈ [x_min, x_max], y ≥ y_min`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GoalZone {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
}

impl Default for GoalZone {
    fn default() -> Self {
        GoalZone {
            x_min: 0.0,
            x_max: 5.0,
            y_min: 4.0,
        }
    }
}

impl GoalZone {
    pub fn contains(&self, pose: &Pose) -> bool {
        pose.y >= self.y_min && pose.x >= self.x_min && pose.x <= self.x_max
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExpertConfig {
    pub lookahead: f64,
    pub v_cap: f64,
    pub omega_cap: f64,
    pub goal: GoalZone,
}

impl Default for ExpertConfig {
    fn default() -> Self {
        ExpertConfig {
            lookahead: 0.4,
            v_cap: V_MAX,
            omega_cap: OMEGA_MAX,
            goal: GoalZone::default(),
        }
    }
}

/// Pure pursuit on `path`: steer toward the point `lookahead` metres of arc
/// ahead of the closest path point, at full speed. Returns zero once the
/// goal zone or the path end is reached.
pub fn expert_control(pose: &Pose, path: &ReferencePath, cfg: &ExpertConfig) -> ControlInput {
    if cfg.goal.contains(pose) {
        return ControlInput::ZERO;
    }
    let (idx, _) = path.nearest(pose.x, pose.y);
    let s = path.arc_length_at(idx);
    if idx + 1 == path.points().len() {
        return ControlInput::ZERO;
    }
    let target = path.point_at(s + cfg.lookahead);
    let dx = target[0] - pose.x;
    let dy = target[1] - pose.y;
    let dist = dx.hypot(dy).max(1e-6);
    let alpha = wrap_to_pi(dy.atan2(dx) - pose.theta);
    // curvature 2 sin(α) / L_d, times forward speed; past ±90° the turn
    // saturates at the tightest pursuit arc
    let steer = if alpha.abs() > FRAC_PI_2 { alpha.signum() } else { alpha.sin() };
    let omega = (2.0 * cfg.v_cap * steer / dist).clamp(-cfg.omega_cap, cfg.omega_cap);
    ControlInput {
        v: cfg.v_cap,
        omega,
    }
}

/// Polar angle of `(x, y)` about the obstacle centre.
pub fn polar_angle(obstacle: &Obstacle, x: f64, y: f64) -> f64 {
    (y - obstacle.y).atan2(x - obstacle.x)
}

/// Signed smallest difference `b - a` between two angles.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = wrap_to_pi(b - a);
    if d == PI {
        -PI
    } else {
        d
    }
}

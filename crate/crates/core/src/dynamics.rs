//! Unicycle kinematics `ẋ = v cos θ, ẏ = v sin θ, θ̇ = ω`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

/// Translational speed cap, m/s.
pub const V_MAX: f64 = 0.22;
/// Angular speed cap, rad/s.
pub const OMEGA_MAX: f64 = 2.84;

/// Below this angular rate the straight-line solution is used.
const STRAIGHT_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Pose { x, y, theta }
    }

    /// Same pose with the heading wrapped to `(-π, π]`.
    pub fn wrapped(self) -> Self {
        Pose {
            theta: wrap_to_pi(self.theta),
            ..self
        }
    }

    pub fn distance_to(&self, x: f64, y: f64) -> f64 {
        (self.x - x).hypot(self.y - y)
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.x, self.y, self.theta]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlInput {
    pub v: f64,
    pub omega: f64,
}

impl ControlInput {
    pub const ZERO: ControlInput = ControlInput { v: 0.0, omega: 0.0 };

    pub fn new(v: f64, omega: f64) -> Self {
        ControlInput { v, omega }
    }

    /// Clamps both components into the actuator caps.
    pub fn clamped(self) -> Self {
        ControlInput {
            v: self.v.clamp(-V_MAX, V_MAX),
            omega: self.omega.clamp(-OMEGA_MAX, OMEGA_MAX),
        }
    }

    pub fn within_caps(&self) -> bool {
        self.v.abs() <= V_MAX && self.omega.abs() <= OMEGA_MAX
    }
}

/// Wraps an angle to `(-π, π]`.
pub fn wrap_to_pi(a: f64) -> f64 {
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// Exact solution under a constant control.
pub fn closed_form_unicycle(pose: Pose, control: ControlInput, t: f64) -> Pose {
    let ControlInput { v, omega } = control;
    let th1 = pose.theta + omega * t;
    if omega.abs() < STRAIGHT_EPS {
        return Pose {
            x: pose.x + v * t * pose.theta.cos(),
            y: pose.y + v * t * pose.theta.sin(),
            theta: th1,
        };
    }
    let k = v / omega;
    Pose {
        x: pose.x + k * (th1.sin() - pose.theta.sin()),
        y: pose.y - k * (th1.cos() - pose.theta.cos()),
        theta: th1,
    }
}

fn derivative(s: [f64; 3], c: ControlInput) -> [f64; 3] {
    [c.v * s[2].cos(), c.v * s[2].sin(), c.omega]
}

/// One classical Runge–Kutta step.
pub fn rk4_step(pose: Pose, control: ControlInput, h: f64) -> Pose {
    let s = pose.as_array();
    let add = |a: [f64; 3], b: [f64; 3], k: f64| [a[0] + k * b[0], a[1] + k * b[1], a[2] + k * b[2]];
    let k1 = derivative(s, control);
    let k2 = derivative(add(s, k1, h / 2.0), control);
    let k3 = derivative(add(s, k2, h / 2.0), control);
    let k4 = derivative(add(s, k3, h), control);
    let mut out = s;
    for i in 0..3 {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Pose::new(out[0], out[1], out[2])
}

/// Fixed-step RK4 over `[0, t]`, calling `visit(time, pose)` after every
/// step (and once at time 0).
pub fn rk4_trajectory(pose: Pose, control: ControlInput, t: f64, h: f64, mut visit: impl FnMut(f64, Pose)) -> Pose {
    let n = (t / h).round().max(1.0) as usize;
    let h = t / n as f64;
    let mut p = pose;
    visit(0.0, p);
    for k in 1..=n {
        p = rk4_step(p, control, h);
        visit(k as f64 * h, p);
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    fn close(a: Pose, b: Pose, tol: f64) -> bool {
        (a.x - b.x).abs() < tol && (a.y - b.y).abs() < tol && (a.theta - b.theta).abs() < tol
    }

    #[test]
    fn closed_form_examples() {
        let o = Pose::new(0.0, 0.0, 0.0);
        let p = closed_form_unicycle(o, ControlInput::new(0.22, 0.0), 1.0);
        assert!(close(p, Pose::new(0.22, 0.0, 0.0), 1e-15));

        // quarter circle of radius v/ω = 0.22
        let p = closed_form_unicycle(o, ControlInput::new(0.22, 1.0), FRAC_PI_2);
        assert!(close(p, Pose::new(0.22, 0.22, FRAC_PI_2), 1e-12), "{p:?}");

        let s = Pose::new(1.3, -0.4, 0.7);
        let p = closed_form_unicycle(s, ControlInput::new(0.0, 2.0), 0.8);
        assert_eq!((p.x, p.y), (s.x, s.y));
        assert!((p.theta - (0.7 + 1.6)).abs() < 1e-15);
    }

    #[test]
    fn rk4_agrees_with_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let pose = Pose::new(rng.gen_range(0.0..5.0), rng.gen_range(0.0..5.0), rng.gen_range(-PI..PI));
            let c = ControlInput::new(rng.gen_range(-V_MAX..V_MAX), rng.gen_range(-OMEGA_MAX..OMEGA_MAX));
            let exact = closed_form_unicycle(pose, c, 0.2);
            let num = rk4_trajectory(pose, c, 0.2, 1e-4, |_, _| {});
            assert!(close(exact, num, 1e-8), "{exact:?} vs {num:?}");
        }
    }

    #[test]
    fn wrap_examples() {
        assert_eq!(wrap_to_pi(PI), PI);
        assert!((wrap_to_pi(-PI) - PI).abs() < 1e-15);
        assert!((wrap_to_pi(3.0 * PI / 2.0) + FRAC_PI_2).abs() < 1e-15);
        assert_eq!(wrap_to_pi(0.25), 0.25);
    }

    #[test]
    fn clamp_respects_caps() {
        let c = ControlInput::new(1.0, -9.0).clamped();
        assert_eq!(c, ControlInput::new(V_MAX, -OMEGA_MAX));
        assert!(c.within_caps());
    }
}

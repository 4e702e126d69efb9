//! Taylor-model flowpipes of the unicycle under a constant control, given
//! either as an interval box or as Taylor models in the initial-state
//! symbols (a feedback law sampled at the start of the period).
//!
//! A flow step over `[0, h]` builds a polynomial candidate by Picard
//! iteration `P(X)(t) = X₀ + ∫₀ᵗ f(X(s), a) ds` and then certifies an
//! interval remainder `I` with `P(p + I) ⊆ p + I`. `cos θ` and `sin θ` are
//! expanded around the midpoint of the θ range with a Lagrange remainder.

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::taylor::{Domain, TaylorModel, TaylorModelVector, SYM_T};

/// Geometric inflations tried before a step is declared too large.
pub const MAX_INFLATIONS: usize = 20;
/// Coefficients smaller than this are swept into the remainder when a
/// period ends.
pub const RECENTER_SWEEP: f64 = 1e-13;

/// Interval-valued constant control `(v, ω)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControlBox {
    pub v: Interval,
    pub omega: Interval,
}

impl ControlBox {
    pub fn point(v: f64, omega: f64) -> Self {
        ControlBox {
            v: Interval::point(v),
            omega: Interval::point(omega),
        }
    }
}

/// Constant control that depends on the initial state: `v(z)` and `ω(z)`
/// over the same domain as the state, without a time term.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlModel {
    pub v: TaylorModel,
    pub omega: TaylorModel,
}

#[derive(Clone, Copy)]
enum Control<'a> {
    Box(&'a ControlBox),
    Model(&'a TaylorModel, &'a TaylorModel),
}

#[derive(Clone, Debug)]
pub struct FlowSegment {
    pub t_start: f64,
    pub t_end: f64,
    /// Valid for local time `t ∈ [0, t_end - t_start]`.
    pub state: TaylorModelVector,
    pub x_range: Interval,
    pub y_range: Interval,
    pub theta_range: Interval,
}

#[derive(Clone, Debug, Default)]
pub struct Flowpipe {
    pub segments: Vec<FlowSegment>,
}

impl Flowpipe {
    pub fn end_time(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.t_end)
    }

    pub fn xy_boxes(&self) -> impl Iterator<Item = (Interval, Interval)> + '_ {
        self.segments.iter().map(|s| (s.x_range, s.y_range))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowSettings {
    pub tm_degree: u32,
    pub picard_iters: usize,
    pub substeps: usize,
}

impl FlowSettings {
    pub fn with_degree(tm_degree: u32) -> Self {
        FlowSettings {
            tm_degree,
            picard_iters: tm_degree as usize + 1,
            substeps: 10,
        }
    }
}

impl Default for FlowSettings {
    fn default() -> Self {
        FlowSettings::with_degree(2)
    }
}

/// Taylor expansions of `cos θ` and `sin θ` of order `order`.
fn cos_sin(theta: &TaylorModel, order: u32, max_degree: u32) -> (TaylorModel, TaylorModel) {
    let range = theta.range();
    let m = range.mid();
    let delta = theta.add_constant(-m);
    let dmag = (range - Interval::point(m)).mag();
    let mi = Interval::point(m);
    let (c0, s0) = (mi.cos(), mi.sin());
    // k-th derivatives at m: cos -> [c, -s, -c, s], sin -> [s, c, -s, -c]
    let dcos = [c0, -s0, -c0, s0];
    let dsin = [s0, c0, -s0, -c0];
    let domain = theta.domain;
    let mut cos_tm = TaylorModel::from_interval(c0, domain);
    let mut sin_tm = TaylorModel::from_interval(s0, domain);
    let mut power = TaylorModel::constant(1.0, domain);
    let mut factorial = 1.0;
    for k in 1..=order {
        power = power.mul(&delta, max_degree).expect("same domain");
        factorial *= k as f64;
        let kk = (k % 4) as usize;
        let ck = dcos[kk].div_scalar(factorial);
        let sk = dsin[kk].div_scalar(factorial);
        cos_tm = cos_tm.add(&power.mul_interval(ck)).expect("same domain");
        sin_tm = sin_tm.add(&power.mul_interval(sk)).expect("same domain");
    }
    // Lagrange remainder: |δ|^(n+1) / (n+1)! with all derivatives bounded by 1
    let lagrange = Interval::point(dmag)
        .powi(order + 1)
        .div_scalar(factorial * (order as f64 + 1.0));
    let lag = Interval::symmetric(lagrange.hi());
    (cos_tm.add_interval(lag), sin_tm.add_interval(lag))
}

/// Applies the Picard operator once: `x0 + ∫ f(x, control)`.
fn picard(x0: &[TaylorModel; 3], x: &[TaylorModel; 3], control: Control, settings: &FlowSettings) -> [TaylorModel; 3] {
    let degree = settings.tm_degree;
    let domain = x0[0].domain;
    let (c, s) = cos_sin(&x[2], degree, degree);
    let (dx, dy, dth) = match control {
        Control::Box(b) => (
            c.mul_interval(b.v),
            s.mul_interval(b.v),
            TaylorModel::from_interval(b.omega, domain),
        ),
        Control::Model(v, omega) => (
            c.mul(v, degree).expect("same domain"),
            s.mul(v, degree).expect("same domain"),
            omega.clone(),
        ),
    };
    let step = |base: &TaylorModel, d: &TaylorModel| base.add(&d.integrate_time(degree)).expect("same domain");
    [step(&x0[0], &dx), step(&x0[1], &dy), step(&x0[2], &dth)]
}

fn strip_remainder(tm: &TaylorModel) -> TaylorModel {
    TaylorModel::new(tm.poly.clone(), Interval::ZERO, tm.domain)
}

/// Remainder needed for `y` to be enclosed by `p + rem`.
fn residual(y: &TaylorModel, p: &TaylorModel) -> Interval {
    y.sub(&strip_remainder(p)).expect("same domain").range()
}

/// One certified flow step of length `h`.
pub fn picard_flow_step(
    state: &TaylorModelVector,
    control: &ControlBox,
    h: f64,
    settings: &FlowSettings,
) -> Result<TaylorModelVector> {
    flow_step(state, Control::Box(control), h, settings)
}

fn flow_step(state: &TaylorModelVector, control: Control, h: f64, settings: &FlowSettings) -> Result<TaylorModelVector> {
    if state.dim() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            got: state.dim(),
        });
    }
    if !(h > 0.0) {
        return Err(Error::Config(format!("flow step must be positive, got {h}")));
    }
    let domain = Domain::normalized(h);
    let lift = |tm: &TaylorModel| tm.with_time_domain(domain);
    let x0: [TaylorModel; 3] = [lift(&state.components[0])?, lift(&state.components[1])?, lift(&state.components[2])?];

    let lifted = match control {
        Control::Box(_) => None,
        Control::Model(v, omega) => Some((lift(v)?, lift(omega)?)),
    };
    let control = match (&lifted, control) {
        (Some((v, omega)), _) => Control::Model(v, omega),
        (None, c) => c,
    };

    // polynomial candidate: Picard iterates on remainder-free models with
    // the control at its midpoint (or its polynomial part)
    let mid_box;
    let mid_model;
    let mid_control = match control {
        Control::Box(b) => {
            mid_box = ControlBox::point(b.v.mid(), b.omega.mid());
            Control::Box(&mid_box)
        }
        Control::Model(v, omega) => {
            mid_model = (strip_remainder(v), strip_remainder(omega));
            Control::Model(&mid_model.0, &mid_model.1)
        }
    };
    let x0_poly = x0.clone().map(|tm| strip_remainder(&tm));
    let mut p = x0_poly.clone();
    for _ in 0..settings.picard_iters.max(1) {
        p = picard(&x0_poly, &p, mid_control, settings).map(|tm| strip_remainder(&tm));
    }

    let with_rem = |rem: &[Interval; 3]| -> [TaylorModel; 3] {
        [0, 1, 2].map(|i| TaylorModel::new(p[i].poly.clone(), rem[i], domain))
    };
    let apply = |rem: &[Interval; 3]| -> [Interval; 3] {
        let y = picard(&x0, &with_rem(rem), control, settings);
        [0, 1, 2].map(|i| residual(&y[i], &p[i]))
    };

    let first = apply(&[Interval::ZERO; 3]);
    let mut guess = first.map(|r| r.blow_up(2.0, 1e-12));
    for _ in 0..MAX_INFLATIONS {
        let next = apply(&guess);
        if next.iter().zip(&guess).all(|(n, g)| g.contains_interval(n)) {
            // the true flow lies in p + next; one more application tightens
            let refined = apply(&next);
            let rem = if refined.iter().zip(&next).all(|(r, n)| n.contains_interval(r)) {
                refined
            } else {
                next
            };
            return TaylorModelVector::new(with_rem(&rem).to_vec());
        }
        guess = [0, 1, 2].map(|i| guess[i].hull(&next[i]).blow_up(2.0, 1e-12));
    }
    Err(Error::ContractionFailure {
        inflations: MAX_INFLATIONS,
        step_size: h,
    })
}

/// Chains `settings.substeps` flow steps over one control period `delta`.
/// Returns the segments (with absolute times offset by `t_offset`) and the
/// state at the end of the period.
pub fn flow_control_period(
    state: &TaylorModelVector,
    control: &ControlBox,
    delta: f64,
    t_offset: f64,
    settings: &FlowSettings,
) -> Result<(Vec<FlowSegment>, TaylorModelVector)> {
    flow_period(state, Control::Box(control), delta, t_offset, settings)
}

/// [`flow_control_period`] under a state-dependent control. The control
/// models are over the domain of `state`; they are carried along every
/// substep as functions of the period's initial state.
pub fn flow_control_period_model(
    state: &TaylorModelVector,
    control: &ControlModel,
    delta: f64,
    t_offset: f64,
    settings: &FlowSettings,
) -> Result<(Vec<FlowSegment>, TaylorModelVector)> {
    flow_period(state, Control::Model(&control.v, &control.omega), delta, t_offset, settings)
}

fn flow_period(
    state: &TaylorModelVector,
    control: Control,
    delta: f64,
    t_offset: f64,
    settings: &FlowSettings,
) -> Result<(Vec<FlowSegment>, TaylorModelVector)> {
    let n = settings.substeps.max(1);
    let h = delta / n as f64;
    let point_domain = Domain::normalized(0.0);
    let mut current = state.clone();
    let mut segments = Vec::with_capacity(n);
    for k in 0..n {
        let seg = flow_step(&current, control, h, settings)?;
        let ranges = seg.ranges();
        let t_start = t_offset + k as f64 * h;
        current = TaylorModelVector::new(
            seg.components
                .iter()
                .map(|tm| tm.substitute_time(h, point_domain))
                .collect(),
        )?;
        segments.push(FlowSegment {
            t_start,
            t_end: if k + 1 == n { t_offset + delta } else { t_offset + (k + 1) as f64 * h },
            state: seg,
            x_range: ranges[0],
            y_range: ranges[1],
            theta_range: ranges[2],
        });
    }
    debug_assert!(current.components.iter().all(|c| !c.poly.depends_on(SYM_T)));
    let end = TaylorModelVector::new(
        current
            .components
            .iter()
            .map(|tm| tm.recenter(RECENTER_SWEEP))
            .collect(),
    )?;
    Ok((segments, end))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{closed_form_unicycle, rk4_trajectory, ControlInput, Pose, OMEGA_MAX, V_MAX};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    fn point_state(p: [f64; 3]) -> TaylorModelVector {
        TaylorModelVector::from_box(&p.map(Interval::point))
    }

    fn contains_pose(tmv: &TaylorModelVector, p: Pose, tol: f64) -> bool {
        let r = tmv.ranges();
        r[0].inflate(tol).contains(p.x) && r[1].inflate(tol).contains(p.y) && r[2].inflate(tol).contains(p.theta)
    }

    #[test]
    fn straight_line_step() {
        let s = point_state([0.0, 0.0, 0.0]);
        let out = picard_flow_step(&s, &ControlBox::point(0.22, 0.0), 0.02, &FlowSettings::default()).unwrap();
        let end: Vec<Interval> = out.components.iter().map(|c| c.substitute_time(0.02, Domain::normalized(0.0)).range()).collect();
        assert!(end[0].contains(0.0044), "{end:?}");
        assert!(end[1].contains(0.0) && end[2].contains(0.0));
        assert!(end[0].width() < 1e-9);
    }

    #[test]
    fn zero_dynamics_is_a_fixed_point() {
        let b = [Interval::new(1.0, 1.2).unwrap(), Interval::new(2.0, 2.1).unwrap(), Interval::new(-0.1, 0.3).unwrap()];
        let s = TaylorModelVector::from_box(&b);
        let (segs, end) = flow_control_period(&s, &ControlBox::point(0.0, 0.0), 0.2, 0.0, &FlowSettings::default()).unwrap();
        for (a, e) in s.ranges().iter().zip(end.ranges()) {
            assert!((a.lo() - e.lo()).abs() < 1e-12 && (a.hi() - e.hi()).abs() < 1e-12, "{a:?} {e:?}");
        }
        for seg in &segs {
            assert!((seg.x_range.lo() - 1.0).abs() < 1e-12 && (seg.x_range.hi() - 1.2).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_width_zero_control_period_is_identity() {
        let s = point_state([2.5, 1.0, 0.3]);
        let (_, end) = flow_control_period(&s, &ControlBox::point(0.0, 0.0), 0.2, 0.0, &FlowSettings::default()).unwrap();
        let r = end.ranges();
        assert!(r[0].contains(2.5) && r[1].contains(1.0) && r[2].contains(0.3));
        assert!(r.iter().all(|i| i.width() < 1e-12));
    }

    #[test]
    fn straight_line_period() {
        let s = point_state([0.0, 0.0, 0.0]);
        let (segs, end) = flow_control_period(&s, &ControlBox::point(0.22, 0.0), 0.2, 0.0, &FlowSettings::default()).unwrap();
        assert_eq!(segs.len(), 10);
        assert!(end.ranges()[0].contains(0.044));
        // segments tile [0, 0.2]
        assert_eq!(segs[0].t_start, 0.0);
        for w in segs.windows(2) {
            assert_eq!(w[0].t_end, w[1].t_start);
        }
        assert_eq!(segs.last().unwrap().t_end, 0.2);
    }

    #[test]
    fn quarter_arc_matches_closed_form() {
        let n = 80;
        let h = FRAC_PI_2 / n as f64;
        let mut s = point_state([0.0, 0.0, 0.0]);
        let settings = FlowSettings { substeps: 1, ..FlowSettings::default() };
        for _ in 0..n {
            let (_, end) = flow_control_period(&s, &ControlBox::point(0.22, 1.0), h, 0.0, &settings).unwrap();
            s = end;
        }
        let exact = closed_form_unicycle(Pose::new(0.0, 0.0, 0.0), ControlInput::new(0.22, 1.0), FRAC_PI_2);
        assert!(contains_pose(&s, Pose::new(0.22, 0.22, FRAC_PI_2), 1e-12), "{:?}", s.ranges());
        assert!(contains_pose(&s, exact, 0.0));
    }

    #[test]
    fn widths_do_not_shrink_across_substeps() {
        let b = [Interval::new(1.0, 1.05).unwrap(), Interval::new(1.0, 1.05).unwrap(), Interval::new(0.1, 0.12).unwrap()];
        let s = TaylorModelVector::from_box(&b);
        let ctl = ControlBox { v: Interval::new(0.2, 0.22).unwrap(), omega: Interval::new(-0.1, 0.2).unwrap() };
        let (segs, _) = flow_control_period(&s, &ctl, 0.2, 0.0, &FlowSettings::default()).unwrap();
        let mut prev = 0.0;
        for seg in &segs {
            let end: Vec<Interval> = seg.state.components.iter().map(|c| c.substitute_time(seg.t_end - seg.t_start, Domain::normalized(0.0)).range()).collect();
            let w = end[2].width();
            assert!(w + 1e-15 >= prev, "theta width shrank: {w} < {prev}");
            prev = w;
        }
    }

    #[test]
    fn too_large_step_fails_to_contract() {
        let s = TaylorModelVector::from_box(&[Interval::UNIT, Interval::UNIT, Interval::new(-3.0, 3.0).unwrap()]);
        let ctl = ControlBox { v: Interval::new(-1e6, 1e6).unwrap(), omega: Interval::new(-1e6, 1e6).unwrap() };
        let r = picard_flow_step(&s, &ctl, 50.0, &FlowSettings::default());
        assert!(matches!(r, Err(Error::ContractionFailure { .. })), "{r:?}");
    }

    /// Every fine RK4 trajectory from the box under a constant control in the
    /// control box stays inside the segment enclosures, pointwise in the
    /// initial-state symbols.
    #[test]
    fn flowpipe_soundness_sampled() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let c = [rng.gen_range(0.5..4.5), rng.gen_range(0.5..4.5), rng.gen_range(-3.0..3.0)];
            let r = [rng.gen_range(0.0..0.05), rng.gen_range(0.0..0.05), rng.gen_range(0.0..0.05)];
            let b = [0, 1, 2].map(|i| Interval::new(c[i] - r[i], c[i] + r[i]).unwrap());
            let v0 = rng.gen_range(-V_MAX..V_MAX);
            let w0 = rng.gen_range(-OMEGA_MAX..OMEGA_MAX);
            let ctl = ControlBox {
                v: Interval::new(v0, (v0 + 0.02).min(V_MAX)).unwrap(),
                omega: Interval::new(w0, (w0 + 0.1).min(OMEGA_MAX)).unwrap(),
            };
            let s = TaylorModelVector::from_box(&b);
            let (segs, _) = flow_control_period(&s, &ctl, 0.2, 0.0, &FlowSettings::default()).unwrap();
            for _ in 0..10 {
                let z = [rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)];
                let init: Vec<f64> = s.components.iter().map(|tm| tm.poly.eval(&[z[0], z[1], z[2], 0.0])).collect();
                let u = ControlInput::new(rng.gen_range(ctl.v.lo()..=ctl.v.hi()), rng.gen_range(ctl.omega.lo()..=ctl.omega.hi()));
                rk4_trajectory(Pose::new(init[0], init[1], init[2]), u, 0.2, 1e-3, |t, p| {
                    for seg in segs.iter().filter(|sg| sg.t_start <= t + 1e-12 && t <= sg.t_end + 1e-12) {
                        let tau = (t - seg.t_start).clamp(0.0, seg.t_end - seg.t_start);
                        let pt = [z[0], z[1], z[2], tau];
                        let vals = [p.x, p.y, p.theta];
                        for (tm, v) in seg.state.components.iter().zip(vals) {
                            assert!(tm.eval_interval(&pt).inflate(1e-9).contains(v), "t={t} {v} not in {:?}", tm.eval_interval(&pt));
                        }
                    }
                });
            }
        }
    }
}

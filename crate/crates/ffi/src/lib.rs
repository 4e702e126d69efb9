//! C interface to the reachguard library.
//!
//! Networks are opaque handles created by `rg_network_load` or
//! `rg_network_from_json` and released with `rg_network_free`. Every
//! fallible function returns an [`RgStatus`]; on failure the message is
//! available from `rg_last_error` on the same thread. Panics never cross
//! the boundary; they surface as `RG_STATUS_INTERNAL`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use reachguard::bernstein::bernstein_enclose_relu;
use reachguard::controllers::{kb_control, AvoidanceConfig, Obstacle, TangentialSource};
use reachguard::dynamics::Pose;
use reachguard::network::NetworkSpec;
use reachguard::supervisor::{verify_nn_safe, VerificationSettings, ViolationKind};
use reachguard::world::{LocalizationEstimate, WorldMap};
use reachguard::{Error, Interval};

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    InvalidNetwork = 5,
    Verification = 6,
    BufferTooSmall = 7,
    Internal = 8,
}

/// Opaque network handle.
pub struct RgNetwork {
    net: NetworkSpec,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RgPose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RgObstacle {
    pub x: f64,
    pub y: f64,
    pub radius: f64,
}

/// Rectangular world `[0, width] x [0, height]`.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RgWorld {
    pub width: f64,
    pub height: f64,
    pub robot_radius: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RgVerificationSettings {
    pub steps: usize,
    pub delta: f64,
    pub tm_degree: u32,
    pub bp_order: usize,
    pub symbolic_remainder: bool,
    pub substeps: usize,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RgVerdictKind {
    Safe = 0,
    Unsafe = 1,
    /// The flowpipe could not be computed; treat as unsafe.
    Failure = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RgVerdict {
    pub kind: RgVerdictKind,
    /// Control period of the first violation, -1 if none.
    pub violation_step: i64,
    /// Index of the violated obstacle, -1 for a wall or no violation.
    pub violation_obstacle: i64,
    pub runtime_seconds: f64,
    /// Flowpipe segments computed.
    pub segments: usize,
}

/// Axis-aligned x-y hull of one flowpipe segment.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RgBox {
    pub t_start: f64,
    pub t_end: f64,
    pub x_lo: f64,
    pub x_hi: f64,
    pub y_lo: f64,
    pub y_hi: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RgTangentialSource {
    /// Rotate the robot-to-obstacle vector.
    Um = 0,
    /// Rotate the vector to the standoff point.
    Up = 1,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> RgStatus {
    match e {
        Error::Io { .. } => RgStatus::Io,
        Error::Parse { .. } => RgStatus::Parse,
        Error::InvalidNetwork(_) | Error::UnsupportedActivation(_) => RgStatus::InvalidNetwork,
        Error::PoseOutOfBounds { .. } | Error::ContractionFailure { .. } => RgStatus::Verification,
        _ => RgStatus::InvalidArgument,
    }
}

/// Runs `f`, recording any error or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), (RgStatus, String)>) -> RgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RgStatus::Ok,
        Ok(Err((status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(&format!("internal error: {msg}"));
            RgStatus::Internal
        }
    }
}

fn lib(e: Error) -> (RgStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (RgStatus, String) {
    (RgStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> (RgStatus, String) {
    (RgStatus::InvalidArgument, msg.into())
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (RgStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], (RgStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// Message of the last failed call on this thread, empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

fn box_network(net: NetworkSpec, out: *mut *mut RgNetwork) {
    // SAFETY: callers check `out` for null first
    unsafe { *out = Box::into_raw(Box::new(RgNetwork { net })) };
}

/// Loads a JSON weight file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn rg_network_load(path: *const c_char, out: *mut *mut RgNetwork) -> RgStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = c_str(path, "path")?;
        box_network(NetworkSpec::load(path).map_err(lib)?, out);
        Ok(())
    })
}

/// Parses a weight document held in memory.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn rg_network_from_json(json: *const c_char, out: *mut *mut RgNetwork) -> RgStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = c_str(json, "json")?;
        box_network(NetworkSpec::from_json(text).map_err(lib)?, out);
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `net` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rg_network_free(net: *mut RgNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Input dimension, 0 for a null handle.
///
/// # Safety
/// `net` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rg_network_input_dim(net: *const RgNetwork) -> usize {
    net.as_ref().map_or(0, |n| n.net.input_dim())
}

/// Output dimension, 0 for a null handle.
///
/// # Safety
/// `net` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rg_network_output_dim(net: *const RgNetwork) -> usize {
    net.as_ref().map_or(0, |n| n.net.output_dim())
}

/// Exact forward pass.
///
/// # Safety
/// `input` must hold `n_input` doubles and `output` room for `n_output`.
#[no_mangle]
pub unsafe extern "C" fn rg_network_eval(
    net: *const RgNetwork,
    input: *const f64,
    n_input: usize,
    output: *mut f64,
    n_output: usize,
) -> RgStatus {
    guard(|| {
        let net = &net.as_ref().ok_or_else(|| null("net"))?.net;
        let x = slice(input, n_input, "input")?;
        let y = net.eval(x).map_err(lib)?;
        if n_output < y.len() {
            return Err((
                RgStatus::BufferTooSmall,
                format!("output holds {n_output} values, network produces {}", y.len()),
            ));
        }
        if output.is_null() {
            return Err(null("output"));
        }
        ptr::copy_nonoverlapping(y.as_ptr(), output, y.len());
        Ok(())
    })
}

/// The default verification settings: 10 steps of 0.2 s, TM degree 2,
/// Bernstein order 2, symbolic remainders, 10 segments per step.
#[no_mangle]
pub extern "C" fn rg_verification_default() -> RgVerificationSettings {
    let v = VerificationSettings::default();
    RgVerificationSettings {
        steps: v.steps,
        delta: v.delta,
        tm_degree: v.tm_degree,
        bp_order: v.bp_order,
        symbolic_remainder: v.symbolic_remainder,
        substeps: v.substeps,
    }
}

/// Checks whether the network keeps every pose in the estimate box clear of
/// the obstacles and walls over the verification horizon.
///
/// `boxes` may be null when `box_capacity` is 0. When non-null, up to
/// `box_capacity` segment hulls are written and `n_boxes` (if non-null)
/// receives the number written.
///
/// # Safety
/// Pointers must be valid for the stated lengths; `uncertainty` holds 3
/// doubles (x, y, theta half-widths).
#[no_mangle]
pub unsafe extern "C" fn rg_verify(
    net: *const RgNetwork,
    estimate: RgPose,
    uncertainty: *const f64,
    obstacles: *const RgObstacle,
    n_obstacles: usize,
    world: RgWorld,
    settings: RgVerificationSettings,
    verdict: *mut RgVerdict,
    boxes: *mut RgBox,
    box_capacity: usize,
    n_boxes: *mut usize,
) -> RgStatus {
    guard(|| {
        let net = &net.as_ref().ok_or_else(|| null("net"))?.net;
        if verdict.is_null() {
            return Err(null("verdict"));
        }
        let u = slice(uncertainty, 3, "uncertainty")?;
        let obstacles = slice(obstacles, n_obstacles, "obstacles")?
            .iter()
            .map(|o| Obstacle::new(o.x, o.y, o.radius))
            .collect::<Result<Vec<_>, _>>()
            .map_err(lib)?;
        let world = WorldMap::new(world.width, world.height, Vec::new(), world.robot_radius).map_err(lib)?;
        let settings = VerificationSettings {
            steps: settings.steps,
            delta: settings.delta,
            tm_degree: settings.tm_degree,
            bp_order: settings.bp_order,
            symbolic_remainder: settings.symbolic_remainder,
            substeps: settings.substeps,
        };
        if settings.substeps == 0 || !(settings.delta > 0.0) {
            return Err(invalid("substeps and delta must be positive"));
        }
        let est = LocalizationEstimate {
            pose: Pose::new(estimate.x, estimate.y, estimate.theta),
            uncertainty: [u[0], u[1], u[2]],
        };
        let v = verify_nn_safe(&est, net, &obstacles, &world, &settings).map_err(lib)?;
        let (step, obstacle) = match v.first_violation {
            Some(viol) => (
                viol.step as i64,
                match viol.kind {
                    ViolationKind::Obstacle(i) => i as i64,
                    ViolationKind::Wall => -1,
                },
            ),
            None => (-1, -1),
        };
        *verdict = RgVerdict {
            kind: if v.failure {
                RgVerdictKind::Failure
            } else if v.safe {
                RgVerdictKind::Safe
            } else {
                RgVerdictKind::Unsafe
            },
            violation_step: step,
            violation_obstacle: obstacle,
            runtime_seconds: v.runtime_seconds,
            segments: v.flowpipe.segments.len(),
        };
        let mut written = 0;
        if !boxes.is_null() {
            for (k, seg) in v.flowpipe.segments.iter().take(box_capacity).enumerate() {
                *boxes.add(k) = RgBox {
                    t_start: seg.t_start,
                    t_end: seg.t_end,
                    x_lo: seg.x_range.lo(),
                    x_hi: seg.x_range.hi(),
                    y_lo: seg.y_range.lo(),
                    y_hi: seg.y_range.hi(),
                };
                written += 1;
            }
        }
        if !n_boxes.is_null() {
            *n_boxes = written;
        }
        Ok(())
    })
}

/// Geometric avoidance control with standoff distance `d`.
///
/// # Safety
/// `v` and `omega` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rg_kb_control(
    pose: RgPose,
    obstacle: RgObstacle,
    d: f64,
    source: RgTangentialSource,
    v: *mut f64,
    omega: *mut f64,
) -> RgStatus {
    guard(|| {
        if v.is_null() || omega.is_null() {
            return Err(null("v or omega"));
        }
        let o = Obstacle::new(obstacle.x, obstacle.y, obstacle.radius).map_err(lib)?;
        let cfg = AvoidanceConfig {
            tangential_source: match source {
                RgTangentialSource::Um => TangentialSource::UM,
                RgTangentialSource::Up => TangentialSource::UP,
            },
            ..AvoidanceConfig::new(d)
        };
        let c = kb_control(&Pose::new(pose.x, pose.y, pose.theta), &o, &cfg).map_err(lib)?;
        *v = c.v;
        *omega = c.omega;
        Ok(())
    })
}

/// Certified bound on `max |ReLU(y) - B(y)|` over `[lo, hi]` for the
/// Bernstein interpolant `B` of the given order.
///
/// # Safety
/// `error_bound` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rg_bernstein_relu_error(lo: f64, hi: f64, order: usize, error_bound: *mut f64) -> RgStatus {
    guard(|| {
        if error_bound.is_null() {
            return Err(null("error_bound"));
        }
        let range = Interval::new(lo, hi).map_err(lib)?;
        let enc = bernstein_enclose_relu(range, order).map_err(lib)?;
        *error_bound = enc.error_bound.hi();
        Ok(())
    })
}

use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use reachguard::network::{Activation, Layer, NetworkSpec};
use reachguard_ffi::*;

/// 3 -> 2 network: v = relu(x)/2 + 0.1 (capped at the speed limit), omega = -relu(y)/4.
fn small_net() -> NetworkSpec {
    let hidden = Layer::new(2, 3, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0], vec![0.0, 0.0], Activation::Relu).unwrap();
    let out = Layer::new(2, 2, vec![0.5, 0.0, 0.0, -0.25], vec![0.1, 0.0], Activation::Identity).unwrap();
    NetworkSpec::new(vec![hidden, out]).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(rg_last_error()) }.to_string_lossy().into_owned()
}

fn load(net: &NetworkSpec) -> *mut RgNetwork {
    let json = CString::new(net.to_json()).unwrap();
    let mut handle = ptr::null_mut();
    assert_eq!(unsafe { rg_network_from_json(json.as_ptr(), &mut handle) }, RgStatus::Ok);
    assert!(!handle.is_null());
    handle
}

#[test]
fn network_round_trip_and_eval() {
    let net = small_net();
    let h = load(&net);
    unsafe {
        assert_eq!(rg_network_input_dim(h), 3);
        assert_eq!(rg_network_output_dim(h), 2);
        let x = [0.4, 2.0, -1.0];
        let mut y = [0.0; 2];
        assert_eq!(rg_network_eval(h, x.as_ptr(), 3, y.as_mut_ptr(), 2), RgStatus::Ok);
        assert_eq!(y.to_vec(), net.eval(&x).unwrap());

        assert_eq!(rg_network_eval(h, x.as_ptr(), 3, y.as_mut_ptr(), 1), RgStatus::BufferTooSmall);
        assert!(last_error().contains("holds 1"));
        assert_eq!(rg_network_eval(h, x.as_ptr(), 2, y.as_mut_ptr(), 2), RgStatus::InvalidArgument);
        assert!(last_error().contains("dimension"), "{}", last_error());
        assert_eq!(rg_network_eval(ptr::null(), x.as_ptr(), 3, y.as_mut_ptr(), 2), RgStatus::NullPointer);
        rg_network_free(h);
        rg_network_free(ptr::null_mut());
    }
}

#[test]
fn load_errors_are_reported() {
    let mut h = ptr::null_mut();
    let missing = CString::new("/nonexistent/weights.json").unwrap();
    assert_eq!(unsafe { rg_network_load(missing.as_ptr(), &mut h) }, RgStatus::Io);
    assert!(last_error().contains("/nonexistent/weights.json"));
    assert!(h.is_null());

    let garbage = CString::new("{ not json").unwrap();
    assert_eq!(unsafe { rg_network_from_json(garbage.as_ptr(), &mut h) }, RgStatus::Parse);
    assert_eq!(unsafe { rg_network_from_json(ptr::null(), &mut h) }, RgStatus::NullPointer);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.json");
    small_net().save(&path).unwrap();
    let p = CString::new(path.to_str().unwrap()).unwrap();
    assert_eq!(unsafe { rg_network_load(p.as_ptr(), &mut h) }, RgStatus::Ok);
    unsafe { rg_network_free(h) };
}

#[test]
fn verify_reports_verdicts_and_boxes() {
    let h = load(&small_net());
    let world = RgWorld { width: 5.0, height: 5.0, robot_radius: 0.11 };
    let settings = rg_verification_default();
    assert_eq!(settings.steps, 10);
    let pose = RgPose { x: 1.0, y: 1.0, theta: 0.0 };
    let u = [0.01, 0.01, 0.01];
    let mut verdict = RgVerdict {
        kind: RgVerdictKind::Failure,
        violation_step: 0,
        violation_obstacle: 0,
        runtime_seconds: 0.0,
        segments: 0,
    };
    let mut boxes = [RgBox::default(); 200];
    let mut n = 0usize;
    unsafe {
        // capped forward speed from x = 1: free space is safe
        let st = rg_verify(h, pose, u.as_ptr(), ptr::null(), 0, world, settings, &mut verdict, boxes.as_mut_ptr(), boxes.len(), &mut n);
        assert_eq!(st, RgStatus::Ok, "{}", last_error());
        assert_eq!(verdict.kind, RgVerdictKind::Safe);
        assert_eq!(verdict.violation_step, -1);
        assert_eq!(n, verdict.segments);
        assert!(n > 0);
        assert!(boxes[0].x_lo <= 0.99 && boxes[0].x_hi >= 1.01);
        assert!(boxes[n - 1].x_hi > 1.3);

        // obstacle dead ahead
        let obs = [RgObstacle { x: 1.5, y: 1.0, radius: 0.2 }];
        let st = rg_verify(h, pose, u.as_ptr(), obs.as_ptr(), 1, world, settings, &mut verdict, ptr::null_mut(), 0, &mut n);
        assert_eq!(st, RgStatus::Ok);
        assert_eq!(verdict.kind, RgVerdictKind::Unsafe);
        assert_eq!(verdict.violation_obstacle, 0);
        assert!(verdict.violation_step >= 0);
        assert_eq!(n, 0);

        let outside = RgPose { x: 9.0, y: 1.0, theta: 0.0 };
        let st = rg_verify(h, outside, u.as_ptr(), ptr::null(), 0, world, settings, &mut verdict, ptr::null_mut(), 0, ptr::null_mut());
        assert!(matches!(st, RgStatus::Ok | RgStatus::Verification));
        if st == RgStatus::Ok {
            assert_ne!(verdict.kind, RgVerdictKind::Safe);
        }

        let bad = RgVerificationSettings { steps: 0, ..settings };
        let st = rg_verify(h, pose, u.as_ptr(), ptr::null(), 0, world, bad, &mut verdict, ptr::null_mut(), 0, ptr::null_mut());
        assert_eq!(st, RgStatus::InvalidArgument);
        let st = rg_verify(h, pose, ptr::null(), ptr::null(), 0, world, settings, &mut verdict, ptr::null_mut(), 0, ptr::null_mut());
        assert_eq!(st, RgStatus::NullPointer);
        rg_network_free(h);
    }
}

#[test]
fn kb_control_and_bernstein() {
    let (mut v, mut w) = (0.0, 0.0);
    let pose = RgPose { x: 0.0, y: 0.0, theta: 0.0 };
    let obs = RgObstacle { x: 1.0, y: 0.0, radius: 0.2 };
    unsafe {
        assert_eq!(rg_kb_control(pose, obs, 0.5, RgTangentialSource::Um, &mut v, &mut w), RgStatus::Ok);
        let c = reachguard::controllers::kb_control(
            &reachguard::dynamics::Pose::new(0.0, 0.0, 0.0),
            &reachguard::controllers::Obstacle::new(1.0, 0.0, 0.2).unwrap(),
            &reachguard::controllers::AvoidanceConfig::new(0.5),
        )
        .unwrap();
        assert_eq!((v, w), (c.v, c.omega));
        let at = RgObstacle { x: 0.0, y: 0.0, radius: 0.2 };
        assert_eq!(rg_kb_control(pose, at, 0.5, RgTangentialSource::Up, &mut v, &mut w), RgStatus::InvalidArgument);
        assert!(last_error().contains("coincide"));

        let mut e = -1.0;
        assert_eq!(rg_bernstein_relu_error(-1.0, 1.0, 2, &mut e), RgStatus::Ok);
        assert!((0.25..=0.26).contains(&e));
        assert_eq!(rg_bernstein_relu_error(0.5, 2.0, 3, &mut e), RgStatus::Ok);
        assert_eq!(e, 0.0);
        assert_eq!(rg_bernstein_relu_error(1.0, -1.0, 2, &mut e), RgStatus::InvalidArgument);
        assert_eq!(rg_bernstein_relu_error(-1.0, 1.0, 0, &mut e), RgStatus::InvalidArgument);
    }
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(rg_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include")
}

/// Compiles a C program against the generated header and, when the static
/// library is next to the test binary, links and runs it.
#[test]
fn header_compiles_and_links_from_c() {
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("no C compiler; skipping");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include <string.h>
#include "reachguard.h"
int main(void) {
    double e = 0.0;
    if (rg_bernstein_relu_error(-1.0, 1.0, 2, &e) != RG_STATUS_OK) return 1;
    if (e < 0.25 || e > 0.26) return 2;
    RgNetwork *net = NULL;
    if (rg_network_from_json("{", &net) != RG_STATUS_PARSE) return 3;
    if (strlen(rg_last_error()) == 0) return 4;
    RgVerificationSettings s = rg_verification_default();
    if (s.steps != 10 || s.tm_degree != 2) return 5;
    printf("%s\n", rg_version());
    return 0;
}
"#,
    )
    .unwrap();
    let syntax = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(header())
        .arg(&src)
        .status()
        .unwrap();
    assert!(syntax.success(), "generated header does not compile");

    let target_dir = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    let lib = target_dir.join("libreachguard_ffi.a");
    if !lib.exists() {
        eprintln!("{} not built; skipping link step", lib.display());
        return;
    }
    let exe = dir.path().join("smoke");
    let link = Command::new("cc")
        .arg("-I")
        .arg(header())
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(link.success(), "linking against the static library failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "C smoke test exited with {:?}", out.status);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), env!("CARGO_PKG_VERSION"));
}

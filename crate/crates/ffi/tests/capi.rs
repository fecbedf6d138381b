use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use scnopt_ffi::*;

fn load(json: &str) -> *mut ScnProblem {
    let text = CString::new(json).unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(
        unsafe { scn_problem_from_json(text.as_ptr(), &mut p) },
        ScnStatus::Ok
    );
    p
}

fn last_error() -> String {
    let e = scn_last_error();
    assert!(!e.is_null());
    unsafe { CStr::from_ptr(e) }.to_string_lossy().into_owned()
}

#[test]
fn solve_round_trip() {
    let p = load(r#"{"problem": {"catalog": "dc"}, "start": [3, 0]}"#);
    let (mut n, mut m1, mut m2) = (0, 0, 0);
    assert_eq!(
        unsafe { scn_problem_dims(p, &mut n, &mut m1, &mut m2) },
        ScnStatus::Ok
    );
    assert_eq!((n, m1, m2), (1, 0, 1));

    let mut r = ptr::null_mut();
    assert_eq!(unsafe { scn_solve(p, &mut r) }, ScnStatus::Ok);
    let mut status = ScnSolveStatus::InnerFailure;
    assert_eq!(unsafe { scn_result_status(r, &mut status) }, ScnStatus::Ok);
    assert_eq!(status, ScnSolveStatus::EpsFeasibleConverged);
    assert!(unsafe { scn_result_iterations(r) } >= 1);

    let mut point = [f64::NAN; 2];
    let mut written = 0;
    assert_eq!(
        unsafe { scn_result_point(r, point.as_mut_ptr(), 2, &mut written) },
        ScnStatus::Ok
    );
    assert_eq!(written, 2);
    assert!(point[0].abs() < 1e-3);

    let json = unsafe { CStr::from_ptr(scn_result_json(r)) }
        .to_str()
        .unwrap();
    let v: serde_json::Value = serde_json::from_str(json).unwrap();
    assert_eq!(v["status"], "eps_feasible_converged");

    unsafe {
        scn_result_free(r);
        scn_problem_free(p);
    }
}

#[test]
fn witness_matches_the_reference() {
    let p = load(r#"{"problem": {"catalog": "dc"}}"#);
    let x = [2.0];
    let (mut g, mut out, mut written) = (f64::NAN, [0.0; 2], 0);
    let s = unsafe { scn_witness(p, x.as_ptr(), 1, &mut g, out.as_mut_ptr(), 2, &mut written) };
    assert_eq!(s, ScnStatus::Ok);
    assert_eq!(g, 4.0);
    assert_eq!(out, [2.0, 4.0]);
    unsafe { scn_problem_free(p) };
}

#[test]
fn small_buffer_reports_the_needed_length() {
    let p = load(r#"{"problem": {"catalog": "dc"}}"#);
    let (mut out, mut written) = ([0.0; 1], 0);
    let s = unsafe {
        scn_witness(
            p,
            [1.0].as_ptr(),
            1,
            ptr::null_mut(),
            out.as_mut_ptr(),
            1,
            &mut written,
        )
    };
    assert_eq!(s, ScnStatus::BufferTooSmall);
    assert_eq!(written, 2);
    assert!(last_error().contains("2 needed"));
    unsafe { scn_problem_free(p) };
}

#[test]
fn errors_map_to_codes_and_messages() {
    let mut p = ptr::null_mut();
    assert_eq!(
        unsafe { scn_problem_from_json(ptr::null(), &mut p) },
        ScnStatus::NullPointer
    );
    assert!(last_error().contains("json"));

    let bad = CString::new("{\"problem\": {\"catalog\": \"dc\"},\n \"start\": [1,]}").unwrap();
    assert_eq!(
        unsafe { scn_problem_from_json(bad.as_ptr(), &mut p) },
        ScnStatus::Parse
    );
    assert!(last_error().contains("line 2"));
    assert!(p.is_null());

    let wrong = CString::new(r#"{"problem": {"catalog": "dc"}, "start": [1, 2, 3]}"#).unwrap();
    assert_eq!(
        unsafe { scn_problem_from_json(wrong.as_ptr(), &mut p) },
        ScnStatus::Dimension
    );

    let sigmoid = load(r#"{"problem": {"catalog": "sigmoid"}}"#);
    let s = unsafe {
        scn_witness(
            sigmoid,
            [1.0].as_ptr(),
            1,
            ptr::null_mut(),
            ptr::null_mut(),
            0,
            ptr::null_mut(),
        )
    };
    assert_eq!(s, ScnStatus::Infeasible);
    unsafe { scn_problem_free(sigmoid) };

    let ok = load(r#"{"problem": {"catalog": "dc"}}"#);
    assert!(scn_last_error().is_null());
    unsafe { scn_problem_free(ok) };
}

#[test]
fn null_handles_are_tolerated() {
    unsafe {
        scn_problem_free(ptr::null_mut());
        scn_result_free(ptr::null_mut());
        assert_eq!(scn_result_iterations(ptr::null()), 0);
        assert!(scn_result_json(ptr::null()).is_null());
        let mut s = ScnSolveStatus::InnerFailure;
        assert_eq!(
            scn_result_status(ptr::null(), &mut s),
            ScnStatus::NullPointer
        );
    }
}

#[test]
fn header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/scnopt.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in [
        "scn_problem_from_json",
        "scn_solve",
        "scn_result_point",
        "scn_last_error",
        "SCN_STATUS_BUFFER_TOO_SMALL",
    ] {
        assert!(text.contains(name), "{name}");
    }
    let Ok(out) = Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c"])
        .arg(&header)
        .output()
    else {
        return;
    };
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

use std::ffi::{CStr, CString};
use std::ptr;

use cone_sobolev_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(cs_last_error_message()).to_string_lossy().into_owned() }
}

fn builtin(name: &str) -> *mut CsCone {
    let name = CString::new(name).unwrap();
    let mut cone = ptr::null_mut();
    assert_eq!(unsafe { cs_cone_new_builtin(name.as_ptr(), &mut cone) }, CsStatus::Ok);
    cone
}

#[test]
fn cone_accessors_and_constant() {
    let cone = builtin("halfplane-x1");
    let (mut d, mut big_d, mut c, mut norm) = (0usize, 0.0, 0.0, 0.0);
    unsafe {
        assert_eq!(cs_cone_dimension(cone, &mut d), CsStatus::Ok);
        assert_eq!(cs_cone_homogeneous_dimension(cone, &mut big_d), CsStatus::Ok);
        assert_eq!(cs_cone_ball_constant(cone, &mut c), CsStatus::Ok);
        assert_eq!(cs_embedding_norm(cone, 1.0, 1.0, &mut norm), CsStatus::Ok);
        cs_cone_free(cone);
    }
    assert_eq!((d, big_d), (2, 3.0));
    assert!((c - 2.0 / 3.0).abs() < 1e-14);
    assert!((norm - 0.5 * 1.5f64.powf(1.0 / 3.0)).abs() < 1e-12);
}

#[test]
fn errors_carry_codes_and_messages() {
    let bad = CString::new("cylinder").unwrap();
    let mut cone = ptr::null_mut();
    let status = unsafe { cs_cone_new_builtin(bad.as_ptr(), &mut cone) };
    assert_ne!(status, CsStatus::Ok);
    assert!(cone.is_null());
    assert!(last_error().contains("cylinder"));

    assert_eq!(unsafe { cs_cone_new_builtin(ptr::null(), &mut cone) }, CsStatus::NullArgument);

    let cone = builtin("halfplane-x1");
    let mut norm = 0.0;
    assert_eq!(unsafe { cs_embedding_norm(cone, 3.5, 1.0, &mut norm) }, CsStatus::Domain);
    assert_eq!(unsafe { cs_embedding_norm(cone, 1.0, 1.0, ptr::null_mut()) }, CsStatus::NullArgument);
    let mut sys = ptr::null_mut();
    let status = unsafe { cs_system_construct(cone, 1.5, 1.0, 2, 1.0, 0.05, 0.05, &mut sys) };
    assert_eq!(status, CsStatus::Infeasible);
    unsafe { cs_cone_free(cone) };
    assert!(last_error().contains("λ"));
}

#[test]
fn cone_from_json_matches_builtin() {
    let json = CString::new(r#"{"d":2,"exponents":[{"axis":1,"power":1.0},{"axis":2,"power":1.0}]}"#).unwrap();
    let mut cone = ptr::null_mut();
    let mut c = 0.0;
    unsafe {
        assert_eq!(cs_cone_from_json(json.as_ptr(), &mut cone), CsStatus::Ok);
        assert_eq!(cs_cone_ball_constant(cone, &mut c), CsStatus::Ok);
        cs_cone_free(cone);
    }
    assert!((c - 0.125).abs() < 1e-14);
    let broken = CString::new("{").unwrap();
    assert_eq!(unsafe { cs_cone_from_json(broken.as_ptr(), &mut cone) }, CsStatus::Json);
}

#[test]
fn profile_quotients() {
    let cone = builtin("quadrant-x1x2");
    let t = [0.0, 0.5, 2.0];
    let v = [3.0, 1.0, 0.0];
    let mut profile = ptr::null_mut();
    let mut report = CsQuotientReport::default();
    unsafe {
        assert_eq!(cs_profile_from_knots(cone, t.as_ptr(), v.as_ptr(), 3, &mut profile), CsStatus::Ok);
        assert_eq!(cs_quotient(profile, 2.0, 1.0, &mut report), CsStatus::Ok);
        cs_profile_free(profile);
    }
    assert!(report.within_bound && report.ratio < 1.0);

    let increasing = [0.0, 1.0, 0.0];
    let status = unsafe { cs_profile_from_knots(cone, t.as_ptr(), increasing.as_ptr(), 3, &mut profile) };
    assert_eq!(status, CsStatus::Validation);

    let mut alvino = ptr::null_mut();
    unsafe {
        assert_eq!(cs_profile_alvino(cone, 2.0, 2.0, 1e12, 1.0, &mut alvino), CsStatus::Ok);
        assert_eq!(cs_quotient(alvino, 2.0, 2.0, &mut report), CsStatus::Ok);
        cs_profile_free(alvino);
        cs_cone_free(cone);
    }
    assert!(report.ratio > 0.9 && report.within_bound);
}

#[test]
fn system_round_trip() {
    let cone = builtin("halfplane-x1");
    let mut sys = ptr::null_mut();
    let mut m = 0usize;
    let mut lb = CsLowerBound::default();
    let mut json = ptr::null_mut();
    unsafe {
        assert_eq!(cs_system_construct(cone, 1.5, 1.0, 3, 0.9, 0.05, 0.05, &mut sys), CsStatus::Ok);
        assert_eq!(cs_system_shell_count(sys, &mut m), CsStatus::Ok);
        assert_eq!(cs_system_lower_bound(sys, 200, 1, &mut lb), CsStatus::Ok);
        assert_eq!(cs_system_to_json(sys, &mut json), CsStatus::Ok);
    }
    assert_eq!(m, 3);
    assert!(lb.pass && lb.empirical_min >= lb.bound && lb.directions == 200);
    let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_owned();
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(value["shells"].as_array().unwrap().len(), 3);
    unsafe {
        cs_string_free(json);
        cs_system_free(sys);
        cs_cone_free(cone);
        cs_cone_free(ptr::null_mut());
    }
}

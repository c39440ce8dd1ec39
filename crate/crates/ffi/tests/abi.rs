use std::ffi::{CStr, CString};
use std::ptr;

use spinchaos_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 256];
    unsafe { spinchaos_last_error(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

#[test]
fn energy_is_conserved_through_the_handle_api() {
    unsafe {
        let mut sys = ptr::null_mut();
        let mut st = ptr::null_mut();
        assert_eq!(spinchaos_system_default(&mut sys), SpinchaosStatus::Ok);
        let name = CString::new("xC").unwrap();
        assert_eq!(spinchaos_state_from_name(name.as_ptr(), &mut st), SpinchaosStatus::Ok);
        let (mut e0, mut e1, mut t) = (0.0, 0.0, 0.0);
        spinchaos_energy(sys, st, &mut e0);
        assert!((e0 - 1.0).abs() < 0.01);
        assert_eq!(spinchaos_evolve(sys, st, 50_000), SpinchaosStatus::Ok);
        spinchaos_energy(sys, st, &mut e1);
        spinchaos_state_time(st, &mut t);
        assert!((e1 - e0).abs() < 1e-9);
        assert!((t - 0.5).abs() < 1e-12);
        let mut amps = [0.0; 6];
        spinchaos_state_amplitudes(st, amps.as_mut_ptr());
        let norm: f64 = amps.iter().map(|x| x * x).sum();
        assert!((norm - 1.0).abs() < 1e-12);
        spinchaos_state_free(st);
        spinchaos_system_free(sys);
    }
}

#[test]
fn errors_map_to_codes_and_messages() {
    unsafe {
        let mut st = ptr::null_mut();
        assert_eq!(spinchaos_state_from_phase(0.9, 0.5, 0.0, 0.0, &mut st), SpinchaosStatus::OutOfRange);
        assert!(st.is_null());
        assert!(last_error().contains("outside"));
        let bad = CString::new("xQ").unwrap();
        assert_eq!(spinchaos_state_from_name(bad.as_ptr(), &mut st), SpinchaosStatus::Parse);
        let mut sys = ptr::null_mut();
        let dir = [0.0, 0.0, 0.0];
        let s = spinchaos_system_new(45.0, 45.0, 22.5, 1.0, 60.0, dir.as_ptr(), 1e-5, &mut sys);
        assert_eq!(s, SpinchaosStatus::InvalidArgument);
        let dir = [0.0, 0.0, 1.0];
        let s = spinchaos_system_new(45.0, 45.0, 22.5, 1.0, 60.0, dir.as_ptr(), 1.0, &mut sys);
        assert_eq!(s, SpinchaosStatus::InvalidArgument);
        assert!(last_error().contains("dt"));
        let mut out = 0.0;
        assert_eq!(spinchaos_energy(ptr::null(), ptr::null(), &mut out), SpinchaosStatus::NullPointer);
        assert_eq!(spinchaos_bessel_j(101, 1.0, &mut out), SpinchaosStatus::OutOfRange);
        // freeing null is a no-op
        spinchaos_state_free(ptr::null_mut());
        spinchaos_system_free(ptr::null_mut());
    }
}

#[test]
fn diagnostics_through_the_abi() {
    unsafe {
        let mut sys = ptr::null_mut();
        let dir = [0.0, 0.0, 1.0];
        assert_eq!(spinchaos_system_new(45.0, 45.0, 22.5, 2.2, 60.0, dir.as_ptr(), 1e-5, &mut sys), SpinchaosStatus::Ok);
        let mut dips = [0.0; 4];
        assert_eq!(spinchaos_predict_dips(sys, 4, dips.as_mut_ptr()), SpinchaosStatus::Ok);
        for (d, want) in dips.iter().zip([5.11, 9.35, 13.56, 17.76]) {
            assert!((d - want).abs() < 0.01, "{dips:?}");
        }
        let mut st = ptr::null_mut();
        spinchaos_state_haar(1, 2, &mut st);
        let (mut lambda, mut err) = (0.0, 0.0);
        assert_eq!(spinchaos_lle(sys, st, 1e-6, 0.05, 40, 7, &mut lambda, &mut err), SpinchaosStatus::Ok);
        assert!(lambda.is_finite() && err >= 0.0);
        let (mut floor, mut r, mut tau) = (0.0, 0.0, 0.0);
        assert_eq!(spinchaos_randomize(sys, st, 64, 5e-3, 0.5, 3, &mut floor, &mut r, &mut tau), SpinchaosStatus::Ok);
        assert_eq!(floor, 0.125);
        assert!(r > 0.0 && tau.is_infinite());
        let mut j0 = 0.0;
        spinchaos_bessel_j(0, 2.404_825_557_695_773, &mut j0);
        assert!(j0.abs() < 1e-12);
        let v = CStr::from_ptr(spinchaos_version()).to_str().unwrap();
        assert_eq!(v, env!("CARGO_PKG_VERSION"));
        spinchaos_state_free(st);
        spinchaos_system_free(sys);
    }
}

#[test]
fn header_declares_the_api() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/spinchaos.h")).unwrap();
    for sym in [
        "SpinchaosStatus",
        "SPINCHAOS_STATUS_NULL_POINTER",
        "typedef struct SpinchaosSystem SpinchaosSystem",
        "spinchaos_system_new",
        "spinchaos_evolve",
        "spinchaos_lle",
        "spinchaos_randomize",
        "spinchaos_last_error",
    ] {
        assert!(h.contains(sym), "header lacks {sym}");
    }
}

use std::ffi::CStr;
use std::mem::MaybeUninit;
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use dmme_ffi::*;

fn defaults() -> (DmmeProtocolParams, DmmeBathParams) {
    let mut p = MaybeUninit::uninit();
    let mut b = MaybeUninit::uninit();
    unsafe {
        assert_eq!(dmme_protocol_params_default(p.as_mut_ptr()), DmmeStatus::Ok);
        assert_eq!(dmme_bath_params_default(b.as_mut_ptr()), DmmeStatus::Ok);
        (p.assume_init(), b.assume_init())
    }
}

fn last_error() -> String {
    let p = dmme_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn protocol_round_trip() {
    let (params, _) = defaults();
    let mut h = ptr::null_mut();
    unsafe {
        assert_eq!(dmme_protocol_new(&params, &mut h), DmmeStatus::Ok);
        let (mut dur, mut f, mut j) = (0.0, 0.0, 0.0);
        assert_eq!(dmme_protocol_duration(h, &mut dur), DmmeStatus::Ok);
        assert!(dur > 0.0);
        assert_eq!(dmme_protocol_fields(h, 0.5 * dur, &mut f, &mut j), DmmeStatus::Ok);
        assert!(f.is_finite() && j.is_finite());
        let mut g = [0.0; 6];
        assert_eq!(dmme_protocol_g(h, 0.0, g.as_mut_ptr()), DmmeStatus::Ok);
        assert!(g.iter().any(|x| *x != 0.0));
        assert_eq!(dmme_protocol_fields(h, 2.0 * dur, &mut f, &mut j), DmmeStatus::InvalidArgument);
        assert!(last_error().contains("outside"));
        dmme_protocol_free(h);
    }
}

#[test]
fn error_codes() {
    let (mut params, _) = defaults();
    let mut h = ptr::null_mut();
    unsafe {
        assert_eq!(dmme_protocol_new(ptr::null(), &mut h), DmmeStatus::NullPointer);
        assert!(h.is_null());
        params.g2m = 2.0;
        assert_eq!(dmme_protocol_new(&params, &mut h), DmmeStatus::Inadmissible);
        assert!(last_error().contains("t ="));
        params.g2m = 0.02;
        params.delta = 1.5;
        assert_eq!(dmme_protocol_new(&params, &mut h), DmmeStatus::InvalidArgument);
        let mut x = 0.0;
        assert_eq!(dmme_exp_integral_ei(0.0, &mut x), DmmeStatus::InvalidArgument);
        assert_eq!(dmme_exp_integral_ei(1.0, ptr::null_mut()), DmmeStatus::NullPointer);
        dmme_protocol_free(ptr::null_mut());
        dmme_trajectory_free(ptr::null_mut());
    }
}

#[test]
fn evolve_closed_benchmark() {
    let (params, bath) = defaults();
    let mut h = ptr::null_mut();
    let mut tr = ptr::null_mut();
    let ket00 = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
    let opts = DmmeEvolveOptions { points: 101, closed_system: true, target_level: 3 };
    unsafe {
        assert_eq!(dmme_protocol_new(&params, &mut h), DmmeStatus::Ok);
        assert_eq!(dmme_evolve(h, &bath, ket00.as_ptr(), &opts, &mut tr), DmmeStatus::Ok);
        let mut n = 0;
        assert_eq!(dmme_trajectory_len(tr, &mut n), DmmeStatus::Ok);
        assert_eq!(n, 101);
        let mut short = vec![0.0; 10];
        assert_eq!(dmme_trajectory_times(tr, short.as_mut_ptr(), 10), DmmeStatus::BufferTooSmall);
        let mut fid = vec![0.0; n];
        assert_eq!(dmme_trajectory_fidelity(tr, fid.as_mut_ptr(), n), DmmeStatus::Ok);
        // psi3(T) is the target Bell state, reached with fidelity 0.9 from |00>
        assert!((fid[n - 1] - 0.9).abs() < 5e-3, "{}", fid[n - 1]);
        let mut rho = [0.0; 32];
        assert_eq!(dmme_trajectory_state(tr, n - 1, rho.as_mut_ptr()), DmmeStatus::Ok);
        let trace: f64 = (0..4).map(|k| rho[2 * 5 * k]).sum();
        assert!((trace - 1.0).abs() < 1e-8);
        assert_eq!(dmme_trajectory_state(tr, n, rho.as_mut_ptr()), DmmeStatus::InvalidArgument);
        dmme_trajectory_free(tr);
        dmme_protocol_free(h);
    }
}

#[test]
fn lamb_shift_needs_zero_temperature() {
    let (params, mut bath) = defaults();
    bath.temperature = 1.0;
    bath.include_lamb_shift = true;
    let mut h = ptr::null_mut();
    let mut tr = ptr::null_mut();
    let amps = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0];
    let opts = DmmeEvolveOptions { points: 11, closed_system: false, target_level: 0 };
    unsafe {
        assert_eq!(dmme_protocol_new(&params, &mut h), DmmeStatus::Ok);
        assert_eq!(dmme_evolve(h, &bath, amps.as_ptr(), &opts, &mut tr), DmmeStatus::Unsupported);
        assert!(tr.is_null());
        dmme_protocol_free(h);
    }
}

#[test]
fn scalar_helpers() {
    let (params, _) = defaults();
    let mut x = 0.0;
    let mut pops = [0.0; 3];
    unsafe {
        assert_eq!(dmme_exp_integral_ei(1.0, &mut x), DmmeStatus::Ok);
        assert!((x - 1.895_117_816_355_936_8).abs() < 1e-13);
        assert_eq!(dmme_steady_populations(0.0, 0.0, pops.as_mut_ptr()), DmmeStatus::Ok);
        assert_eq!(pops, [0.0, 1.0, 0.0]);
        assert_eq!(dmme_threshold_g2m(&params, 0.1, 1.0, 19, &mut x), DmmeStatus::Ok);
        assert!((x - (8.0f64 / 9.0).sqrt()).abs() < 1e-6);
        assert_eq!(dmme_threshold_g2m(&params, 0.1, 0.3, 5, &mut x), DmmeStatus::NoSignChange);
    }
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include "dmme.h"

int main(void) {
    DmmeProtocolParams p;
    DmmeProtocol *h = NULL;
    double ei = 0.0, dur = 0.0;
    if (dmme_protocol_params_default(&p) != DMME_STATUS_OK) return 1;
    if (dmme_protocol_new(&p, &h) != DMME_STATUS_OK) return 2;
    if (dmme_protocol_duration(h, &dur) != DMME_STATUS_OK || dur <= 0.0) return 3;
    dmme_protocol_free(h);
    p.g2m = 2.0;
    if (dmme_protocol_new(&p, &h) != DMME_STATUS_INADMISSIBLE || h != NULL) return 4;
    if (dmme_last_error() == NULL) return 5;
    if (dmme_exp_integral_ei(1.0, &ei) != DMME_STATUS_OK) return 6;
    printf("%.12f\n", ei);
    return 0;
}
"#;

#[test]
fn header_compiles_from_c() {
    let crate_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let include = crate_dir.join("include");
    assert!(include.join("dmme.h").exists());
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler found; header check skipped");
        return;
    };
    let tmp = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    let src = tmp.join("dmme_abi.c");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let syntax = Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(&include)
        .arg(&src)
        .status()
        .unwrap();
    assert!(syntax.success());
    // link and run when the static library from this build is available
    let profile_dir = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    let lib = profile_dir.join("libdmme_ffi.a");
    if !lib.exists() {
        eprintln!("{} missing; link step skipped", lib.display());
        return;
    }
    let exe = tmp.join("dmme_abi");
    let link = Command::new(&cc)
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(link.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "1.895117816356");
}

fn which_cc() -> Result<String, ()> {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    match Command::new(&cc).arg("--version").output() {
        Ok(o) if o.status.success() => Ok(cc),
        _ => Err(()),
    }
}

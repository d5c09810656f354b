use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use phasescout::ae::{checkpoint, AeModel, ArchConfig};
use phasescout::pipeline::{extract_input, InputKind};
use phasescout_ffi::*;

fn last_error() -> String {
    let p = ps_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn mott_params() -> PsChainParams {
    PsChainParams { t: 0.0, u: 2.0, length: 6, chi_max: 8, ..ps_chain_params_default() }
}

fn compute(p: &PsChainParams) -> *mut PsGroundState {
    let mut gs = ptr::null_mut();
    assert_eq!(unsafe { ps_ground_state_compute(p, &mut gs) }, PsStatus::Ok);
    assert!(!gs.is_null());
    gs
}

#[test]
fn ground_state_handle_round_trip() {
    let gs = compute(&mott_params());
    let mut o = PsObservables::default();
    assert_eq!(unsafe { ps_ground_state_observables(gs, &mut o) }, PsStatus::Ok);
    assert!(o.energy.abs() < 1e-10);
    assert_eq!(o.converged, 1);
    assert!(o.central_entropy.abs() < 1e-12);

    let mut n = 0usize;
    assert_eq!(unsafe { ps_ground_state_spectrum(gs, 3, ptr::null_mut(), 0, &mut n) }, PsStatus::Ok);
    assert_eq!(n, 1);
    let mut buf = [0.0; 1];
    assert_eq!(unsafe { ps_ground_state_spectrum(gs, 3, buf.as_mut_ptr(), 1, &mut n) }, PsStatus::Ok);
    assert!((buf[0] - 1.0).abs() < 1e-12);
    assert_eq!(unsafe { ps_ground_state_spectrum(gs, 6, buf.as_mut_ptr(), 1, &mut n) }, PsStatus::InvalidArgument);
    assert!(last_error().contains("bond 6"));

    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("a.gsr").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { ps_ground_state_save(gs, path.as_ptr()) }, PsStatus::Ok);
    let mut back = ptr::null_mut();
    assert_eq!(unsafe { ps_ground_state_load(path.as_ptr(), &mut back) }, PsStatus::Ok);
    let mut o2 = PsObservables::default();
    assert_eq!(unsafe { ps_ground_state_observables(back, &mut o2) }, PsStatus::Ok);
    assert_eq!(o, o2);
    unsafe {
        ps_ground_state_free(gs);
        ps_ground_state_free(back);
        ps_ground_state_free(ptr::null_mut());
    }
}

#[test]
fn errors_map_to_status_codes() {
    let mut gs = ptr::null_mut();
    let bad = PsChainParams { length: 1, ..mott_params() };
    assert_eq!(unsafe { ps_ground_state_compute(&bad, &mut gs) }, PsStatus::InvalidArgument);
    assert!(gs.is_null());
    assert_eq!(unsafe { ps_ground_state_compute(ptr::null(), &mut gs) }, PsStatus::NullPointer);
    assert!(last_error().contains("params"));

    let missing = CString::new("/nonexistent/x.gsr").unwrap();
    assert_eq!(unsafe { ps_ground_state_load(missing.as_ptr(), &mut gs) }, PsStatus::Io);

    let dir = tempfile::tempdir().unwrap();
    let junk = dir.path().join("junk.gsr");
    std::fs::write(&junk, b"EBHGS1 but not really").unwrap();
    let junk = CString::new(junk.to_str().unwrap()).unwrap();
    assert_eq!(unsafe { ps_ground_state_load(junk.as_ptr(), &mut gs) }, PsStatus::Format);
    let mut ae = ptr::null_mut();
    assert_eq!(unsafe { ps_autoencoder_load(junk.as_ptr(), &mut ae) }, PsStatus::Format);
}

#[test]
fn autoencoder_losses_agree_with_the_library() {
    let gs = compute(&mott_params());
    let model = AeModel::standard(vec![1, 8], &ArchConfig { filters: 3, ..ArchConfig::default() }, 5).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ae");
    checkpoint::save(&model, &path).unwrap();
    let cpath = CString::new(path.to_str().unwrap()).unwrap();
    let mut ae = ptr::null_mut();
    assert_eq!(unsafe { ps_autoencoder_load(cpath.as_ptr(), &mut ae) }, PsStatus::Ok);

    let (mut dims, mut rank) = ([0usize; 3], 0usize);
    assert_eq!(unsafe { ps_autoencoder_input_shape(ae, dims.as_mut_ptr(), &mut rank) }, PsStatus::Ok);
    assert_eq!(&dims[..rank], &[1, 8]);

    let x: Vec<f64> = (0..8).map(|i| 0.1 * i as f64).collect();
    let mut loss = f64::NAN;
    assert_eq!(unsafe { ps_autoencoder_loss(ae, x.as_ptr(), 8, &mut loss) }, PsStatus::Ok);
    let want = model.loss(&phasescout::ae::TensorBuffer::new(vec![1, 8], x.clone()).unwrap()).unwrap();
    assert_eq!(loss.to_bits(), want.to_bits());
    assert_eq!(unsafe { ps_autoencoder_loss(ae, x.as_ptr(), 7, &mut loss) }, PsStatus::Shape);

    // chi = 8 exports a (1, 8) spectrum
    assert_eq!(unsafe { ps_autoencoder_record_loss(ae, gs, PsInputKind::Es, &mut loss) }, PsStatus::Ok);
    let rec_in = {
        let mut p = ptr::null_mut();
        let f = CString::new(dir.path().join("r.gsr").to_str().unwrap()).unwrap();
        assert_eq!(unsafe { ps_ground_state_save(gs, f.as_ptr()) }, PsStatus::Ok);
        assert_eq!(unsafe { ps_ground_state_load(f.as_ptr(), &mut p) }, PsStatus::Ok);
        unsafe { ps_ground_state_free(p) };
        let bytes = std::fs::read(dir.path().join("r.gsr")).unwrap();
        extract_input(&phasescout::pipeline::GroundStateRecord::from_bytes(&bytes).unwrap(), InputKind::Es).unwrap()
    };
    assert_eq!(loss.to_bits(), model.loss(&rec_in).unwrap().to_bits());
    assert_eq!(unsafe { ps_autoencoder_record_loss(ae, gs, PsInputKind::Csf, &mut loss) }, PsStatus::Shape);
    unsafe {
        ps_autoencoder_free(ae);
        ps_ground_state_free(gs);
    }
}

fn target_profile_dir() -> PathBuf {
    // CARGO_TARGET_TMPDIR is <target>/tmp; test builds land in <target>/debug
    Path::new(env!("CARGO_TARGET_TMPDIR")).parent().unwrap().join("debug")
}

#[test]
fn c_program_links_against_the_header() {
    let inc = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let src = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/c/smoke.c");
    let lib = target_profile_dir().join("libphasescout_ffi.a");
    assert!(inc.join("phasescout.h").exists());
    assert!(lib.exists(), "static library missing at {}", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(&inc)
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .arg("-o")
        .arg(&exe)
        .status()
        .expect("C compiler");
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}: {}", out.status, String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok 0.1.0"));
}

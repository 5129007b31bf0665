use std::ffi::{CStr, CString};
use std::ptr;

use octmargin::nn::{checkpoint, tumor_scores, ArchitectureSpec, NetworkParams, PoolKind};
use octmargin::rng::{stream, Stream};
use octmargin::synth::{generate, PhantomConfig};
use octmargin_ffi::*;

fn cpath(p: &std::path::Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    let p = oct_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn model_round_trip_and_scores_match_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let params = NetworkParams::init(&ArchitectureSpec::standard(PoolKind::Max), &mut stream(3, Stream::Init)).unwrap();
    let path = dir.path().join("m.octm");
    checkpoint::save(&params, &path).unwrap();

    let mut model: *mut OctModel = ptr::null_mut();
    assert_eq!(unsafe { oct_model_load(cpath(&path).as_ptr(), &mut model) }, OctStatus::Ok);
    assert!(!model.is_null());
    let len = unsafe { oct_model_input_len(model) };
    assert_eq!(len, 3 * 32 * 32);

    let inputs: Vec<f64> = (0..2 * len).map(|i| (i % 17) as f64 / 17.0).collect();
    let mut scores = [0.0; 2];
    assert_eq!(unsafe { oct_model_tumor_scores(model, inputs.as_ptr(), 2, scores.as_mut_ptr()) }, OctStatus::Ok);
    // Checkpoints hold f32 values, so compare against the reloaded parameters.
    let reloaded = checkpoint::load(&path).unwrap();
    let expect = tumor_scores(&reloaded, &[&inputs[..len], &inputs[len..]]).unwrap();
    assert_eq!(scores.to_vec(), expect);

    let copy = dir.path().join("copy.octm");
    assert_eq!(unsafe { oct_model_save(model, cpath(&copy).as_ptr()) }, OctStatus::Ok);
    assert_eq!(std::fs::read(&copy).unwrap(), std::fs::read(&path).unwrap());
    unsafe { oct_model_free(model) };
}

#[test]
fn volume_dims_and_surface() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = PhantomConfig { rows: 128, cols: 96, frames: 3, ..Default::default() };
    let path = dir.path().join("v.octv");
    generate(&cfg).unwrap().save(&path).unwrap();

    let mut vol: *mut OctVolume = ptr::null_mut();
    assert_eq!(unsafe { oct_volume_load(cpath(&path).as_ptr(), &mut vol) }, OctStatus::Ok);
    let (mut r, mut c, mut f) = (0usize, 0usize, 0usize);
    assert_eq!(unsafe { oct_volume_dims(vol, &mut r, &mut c, &mut f) }, OctStatus::Ok);
    assert_eq!((r, c, f), (128, 96, 3));

    let mut rows = vec![0.0; c];
    assert_eq!(unsafe { oct_volume_detect_surface(vol, 1, rows.as_mut_ptr()) }, OctStatus::Ok);
    assert!(rows.iter().all(|&x| (x - 90.0).abs() <= 5.0), "{rows:?}");
    assert_eq!(unsafe { oct_volume_detect_surface(vol, 3, rows.as_mut_ptr()) }, OctStatus::Usage);
    assert!(last_error().contains("frame 3"));
    unsafe { oct_volume_free(vol) };
}

#[test]
fn errors_carry_codes_and_messages() {
    let mut model: *mut OctModel = ptr::null_mut();
    let missing = CString::new("/nonexistent/m.octm").unwrap();
    assert_eq!(unsafe { oct_model_load(missing.as_ptr(), &mut model) }, OctStatus::Io);
    assert!(model.is_null());
    assert!(!last_error().is_empty());

    let dir = tempfile::tempdir().unwrap();
    let junk = dir.path().join("junk.octm");
    std::fs::write(&junk, b"not a checkpoint").unwrap();
    assert_eq!(unsafe { oct_model_load(cpath(&junk).as_ptr(), &mut model) }, OctStatus::Format);

    assert_eq!(unsafe { oct_model_load(ptr::null(), &mut model) }, OctStatus::NullPointer);
    assert_eq!(unsafe { oct_model_input_len(ptr::null()) }, 0);
    unsafe { oct_model_free(ptr::null_mut()) };
    unsafe { oct_volume_free(ptr::null_mut()) };
}

#[test]
fn roc_auc_through_the_abi() {
    let scores = [0.9, 0.8, 0.3, 0.1];
    let labels = [1u8, 0, 1, 0];
    let mut auc = 0.0;
    assert_eq!(unsafe { oct_roc_auc(scores.as_ptr(), labels.as_ptr(), 4, &mut auc) }, OctStatus::Ok);
    assert!((auc - 0.75).abs() < 1e-12);
    let one_class = [1u8; 4];
    assert_eq!(unsafe { oct_roc_auc(scores.as_ptr(), one_class.as_ptr(), 4, &mut auc) }, OctStatus::Empty);
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(oct_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn generated_header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/octmargin.h")).unwrap();
    for name in [
        "oct_last_error",
        "oct_version",
        "oct_model_load",
        "oct_model_save",
        "oct_model_free",
        "oct_model_input_len",
        "oct_model_tumor_scores",
        "oct_volume_load",
        "oct_volume_free",
        "oct_volume_dims",
        "oct_volume_detect_surface",
        "oct_roc_auc",
        "typedef struct OctModel OctModel",
        "OCT_STATUS_NULL_POINTER = 9",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}

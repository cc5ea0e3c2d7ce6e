use std::ffi::CStr;
use std::ptr;

use doalab_ffi::*;

const FS: f64 = 16_000.0;

fn last_error() -> String {
    unsafe { CStr::from_ptr(doa_last_error_message()) }
        .to_string_lossy()
        .into_owned()
}

/// Broadside white noise: every channel identical.
fn broadside(channels: usize, length: usize) -> Vec<f64> {
    let mut state = 0x2545_f491_4f6c_dd1du64;
    let mono: Vec<f64> = (0..length)
        .map(|_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .collect();
    (0..channels).flat_map(|_| mono.iter().cloned()).collect()
}

unsafe fn spectrogram(samples: &[f64], channels: usize) -> *mut DoaSpectrogram {
    let mut spec = ptr::null_mut();
    let st = doa_stft(
        samples.as_ptr(),
        channels,
        samples.len() / channels,
        FS,
        512,
        256,
        0,
        &mut spec,
    );
    assert_eq!(st, DoaStatus::Ok, "{}", last_error());
    spec
}

unsafe fn estimator() -> *mut DoaEstimator {
    let mut est = ptr::null_mut();
    let st = doa_estimator_new(4, 0.08, 343.0, 37, FS, 512, 1, &mut est);
    assert_eq!(st, DoaStatus::Ok, "{}", last_error());
    est
}

#[test]
fn flops_and_version() {
    let mut n = 0u64;
    assert_eq!(unsafe { doa_srp_flops(257, 37, 4, &mut n) }, DoaStatus::Ok);
    assert_eq!(n, 183_241);
    assert_eq!(
        unsafe { doa_srp_flops(257, 37, 0, &mut n) },
        DoaStatus::InvalidArgument
    );
    assert!(last_error().contains("Q=0"));
    assert_eq!(
        unsafe { doa_srp_flops(1, 1, 2, ptr::null_mut()) },
        DoaStatus::NullPointer
    );
    let v = unsafe { CStr::from_ptr(doa_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn stft_dimensions() {
    unsafe {
        let spec = spectrogram(&broadside(4, 512 + 9 * 256), 4);
        let (mut q, mut k, mut n) = (0, 0, 0);
        assert_eq!(
            doa_spectrogram_dims(spec, &mut q, &mut k, &mut n),
            DoaStatus::Ok
        );
        assert_eq!((q, k, n), (4, 257, 10));
        doa_spectrogram_free(spec);
    }
}

#[test]
fn broadside_srp_phat_picks_90() {
    unsafe {
        let spec = spectrogram(&broadside(4, 512 + 39 * 256), 4);
        let est = estimator();
        assert_eq!(doa_estimator_grid_size(est), 37);
        let mut sps = vec![0.0; 37];
        let mut doa = -1.0;
        let st = doa_estimate(
            est,
            DoaMethod::SrpPhat,
            spec,
            ptr::null(),
            0,
            40,
            sps.as_mut_ptr(),
            sps.len(),
            &mut doa,
        );
        assert_eq!(st, DoaStatus::Ok, "{}", last_error());
        assert_eq!(doa, 90.0);
        assert_eq!(sps[18], 1.0);
        assert!(sps.iter().all(|&v| v <= 1.0));
        doa_estimator_free(est);
        doa_spectrogram_free(spec);
    }
}

#[test]
fn ones_mask_matches_no_mask() {
    unsafe {
        let spec = spectrogram(&broadside(4, 512 + 19 * 256), 4);
        let est = estimator();
        let ones = vec![1.0; 257 * 20];
        let mut mask = ptr::null_mut();
        assert_eq!(
            doa_mask_new(ones.as_ptr(), 257, 20, &mut mask),
            DoaStatus::Ok
        );
        let mut a = vec![0.0; 37];
        let mut b = vec![0.0; 37];
        let st_a = doa_estimate(
            est,
            DoaMethod::SrpPhat,
            spec,
            ptr::null(),
            0,
            20,
            a.as_mut_ptr(),
            37,
            ptr::null_mut(),
        );
        let st_b = doa_estimate(
            est,
            DoaMethod::SrpMp,
            spec,
            mask,
            0,
            20,
            b.as_mut_ptr(),
            37,
            ptr::null_mut(),
        );
        assert_eq!((st_a, st_b), (DoaStatus::Ok, DoaStatus::Ok));
        assert_eq!(a, b);
        doa_mask_free(mask);
        doa_estimator_free(est);
        doa_spectrogram_free(spec);
    }
}

#[test]
fn psm_of_clean_signal_is_all_ones() {
    unsafe {
        let spec = spectrogram(&broadside(4, 512 + 4 * 256), 4);
        let mut mask = ptr::null_mut();
        assert_eq!(doa_mask_psm(spec, spec, 0, &mut mask), DoaStatus::Ok);
        let est = estimator();
        let mut doa = 0.0;
        let st = doa_estimate(
            est,
            DoaMethod::SrpMp,
            spec,
            mask,
            0,
            5,
            ptr::null_mut(),
            0,
            &mut doa,
        );
        assert_eq!(st, DoaStatus::Ok, "{}", last_error());
        assert_eq!(doa, 90.0);
        doa_mask_free(mask);
        doa_estimator_free(est);
        doa_spectrogram_free(spec);
    }
}

#[test]
fn error_codes() {
    unsafe {
        let spec = spectrogram(&broadside(4, 512 + 4 * 256), 4);
        let est = estimator();
        let mut sps = vec![0.0; 10];
        let st = doa_estimate(
            est,
            DoaMethod::SrpPhat,
            spec,
            ptr::null(),
            0,
            5,
            sps.as_mut_ptr(),
            10,
            ptr::null_mut(),
        );
        assert_eq!(st, DoaStatus::ShapeMismatch);
        let st = doa_estimate(
            est,
            DoaMethod::SrpPhat,
            spec,
            ptr::null(),
            3,
            3,
            ptr::null_mut(),
            0,
            ptr::null_mut(),
        );
        assert_eq!(st, DoaStatus::Empty);
        let zeros = vec![0.0; 257 * 5];
        let mut mask = ptr::null_mut();
        assert_eq!(
            doa_mask_new(zeros.as_ptr(), 257, 5, &mut mask),
            DoaStatus::Ok
        );
        let st = doa_estimate(
            est,
            DoaMethod::SrpMp,
            spec,
            mask,
            0,
            5,
            ptr::null_mut(),
            0,
            ptr::null_mut(),
        );
        assert_eq!(st, DoaStatus::Empty);
        assert!(last_error().contains("empty attention"), "{}", last_error());
        let bad = vec![1.5; 4];
        let mut m2 = ptr::null_mut();
        assert_eq!(
            doa_mask_new(bad.as_ptr(), 2, 2, &mut m2),
            DoaStatus::InvalidArgument
        );
        assert!(m2.is_null());
        let st = doa_estimate(
            ptr::null(),
            DoaMethod::SrpPhat,
            spec,
            ptr::null(),
            0,
            5,
            ptr::null_mut(),
            0,
            ptr::null_mut(),
        );
        assert_eq!(st, DoaStatus::NullPointer);
        let short = vec![0.0; 4 * 100];
        let mut s2 = ptr::null_mut();
        assert_eq!(
            doa_stft(short.as_ptr(), 4, 100, FS, 512, 256, 0, &mut s2),
            DoaStatus::InvalidArgument
        );
        assert_eq!(
            doa_stft(short.as_ptr(), 4, 100, FS, 512, 256, 9, &mut s2),
            DoaStatus::InvalidArgument
        );
        doa_mask_free(mask);
        doa_estimator_free(est);
        doa_spectrogram_free(spec);
        doa_spectrogram_free(ptr::null_mut());
    }
}

#[test]
fn header_declares_the_api() {
    let header =
        std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/doalab.h")).unwrap();
    for name in [
        "doa_last_error_message",
        "doa_version",
        "doa_srp_flops",
        "doa_stft",
        "doa_spectrogram_dims",
        "doa_spectrogram_free",
        "doa_mask_new",
        "doa_mask_psm",
        "doa_mask_free",
        "doa_estimator_new",
        "doa_estimator_free",
        "doa_estimator_grid_size",
        "doa_estimate",
        "DOA_STATUS_EMPTY",
        "DOA_METHOD_NORM_MUSIC",
        "typedef struct DoaEstimator DoaEstimator;",
    ] {
        assert!(header.contains(name), "missing {name}");
    }
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/doalab.h");
    let Ok(status) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c", header])
        .status()
    else {
        eprintln!("no C compiler available; skipping");
        return;
    };
    assert!(status.success());
}

//! Randomized invariants shared by the property and acceptance suites.

use approx::relative_eq;
use ndarray::{Array2, Array3};
use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::{TestCaseError, TestRunner};

use doalab::attention::{
    binarize, magnitude_ratio_mask, psm_mask, random_band_mask, AttentionMask,
};
use doalab::estimate::{
    cross_spectral_tensor, mask_weighting, narrowband_srp, normalize_sps, output_masking,
    phat_weighting, pick_doa, srp, Estimator, EstimatorConfig, SpatialPowerSpectrum,
};
use doalab::eval::{summarize_errors, Thresholds};
use doalab::simulate::{
    image_method_rir_with_reflection, mix_scene, Propagation, RirOptions, RoomSpec, SceneSpec,
    SourceSignal, SourceSpec,
};
use doalab::{
    istft, stft, ArrayConfig, ArrayGeometry, DoaGrid, Spectrogram, SteeringMatrix, StftConfig,
    TimeSignal, Window,
};

const FS: f64 = 16_000.0;

pub const CASES: u32 = 1000;

pub type Outcome = std::result::Result<(), String>;

fn check<S: Strategy>(
    strategy: S,
    test: impl Fn(S::Value) -> std::result::Result<(), TestCaseError>,
) -> Outcome {
    let config = ProptestConfig {
        cases: CASES,
        failure_persistence: None,
        ..ProptestConfig::default()
    };
    TestRunner::new(config)
        .run(&strategy, test)
        .map_err(|e| e.to_string())
}

fn small_stft() -> StftConfig {
    StftConfig {
        window_length: 16,
        hop: 8,
        window: Window::Hann,
    }
}

fn signal_strategy(
    channels: usize,
    len: std::ops::Range<usize>,
) -> impl Strategy<Value = TimeSignal> {
    len.prop_flat_map(move |l| prop::collection::vec(-1.0f64..1.0, channels * l))
        .prop_map(move |v| {
            let l = v.len() / channels;
            TimeSignal::new(Array2::from_shape_vec((channels, l), v).unwrap(), FS).unwrap()
        })
}

fn complex_strategy() -> impl Strategy<Value = Complex64> {
    (-10.0f64..10.0, -10.0f64..10.0).prop_map(|(re, im)| Complex64::new(re, im))
}

/// Random spectrogram `Q × K × N` with `K = 9` (16-point FFT).
fn spectrogram_strategy(
    q: usize,
    frames: std::ops::Range<usize>,
) -> impl Strategy<Value = Spectrogram> {
    frames
        .prop_flat_map(move |n| prop::collection::vec(complex_strategy(), q * 9 * n))
        .prop_map(move |v| {
            let n = v.len() / (q * 9);
            Spectrogram::new(Array3::from_shape_vec((q, 9, n), v).unwrap(), FS, 8, 16).unwrap()
        })
}

fn mask_for(y: &Spectrogram, values: &[f64]) -> AttentionMask {
    let (k, n) = (y.num_bins(), y.num_frames());
    AttentionMask::new(Array2::from_shape_fn((k, n), |(a, b)| {
        values[(a * n + b) % values.len()]
    }))
    .unwrap()
}

fn ula(q: usize) -> ArrayGeometry {
    ArrayGeometry::uniform(q, 0.08, 343.0).unwrap()
}

fn steering(grid: usize, q: usize) -> SteeringMatrix {
    SteeringMatrix::new(&DoaGrid::uniform(grid).unwrap(), &ula(q), 9, FS, 16).unwrap()
}

pub fn stft_frames_satisfy_parseval() -> Outcome {
    check((signal_strategy(2, 16..80),), |(x,)| {
        let cfg = small_stft();
        let y = stft(&x, &cfg).unwrap();
        let w = Window::Hann.coefficients(16);
        for q in 0..2 {
            for n in 0..y.num_frames() {
                let time: f64 = (0..16)
                    .map(|i| (x.samples()[[q, n * 8 + i]] * w[i]).powi(2))
                    .sum();
                let b = y.bins();
                let mut spec = b[[q, 0, n]].norm_sqr() + b[[q, 8, n]].norm_sqr();
                for k in 1..8 {
                    spec += 2.0 * b[[q, k, n]].norm_sqr();
                }
                prop_assert!(relative_eq!(
                    spec / 16.0,
                    time,
                    max_relative = 1e-6,
                    epsilon = 1e-300
                ));
            }
        }
        Ok(())
    })
}

pub fn stft_is_linear() -> Outcome {
    check(
        (
            (16usize..64)
                .prop_flat_map(|l| (signal_strategy(2, l..l + 1), signal_strategy(2, l..l + 1))),
            -3.0f64..3.0,
            -3.0f64..3.0,
        ),
        |((x, z), a, b)| {
            let cfg = small_stft();
            let combo = TimeSignal::new(&x.samples() * a + &z.samples() * b, FS).unwrap();
            let lhs = stft(&combo, &cfg).unwrap();
            let sx = stft(&x, &cfg).unwrap();
            let sz = stft(&z, &cfg).unwrap();
            let scale = lhs.bins().iter().map(|c| c.norm()).fold(1e-12, f64::max);
            for ((l, p), r) in lhs
                .bins()
                .iter()
                .zip(sx.bins().iter())
                .zip(sz.bins().iter())
            {
                prop_assert!((l - (p * a + r * b)).norm() <= 1e-9 * scale);
            }
            Ok(())
        },
    )
}

pub fn istft_inverts_stft_on_interior() -> Outcome {
    check((signal_strategy(1, 40..120),), |(x,)| {
        let cfg = small_stft();
        let y = stft(&x, &cfg).unwrap();
        let back = istft(&y, Window::Hann).unwrap();
        let interior = doalab::signal::interior_range(16, 8, y.num_frames());
        for t in interior {
            prop_assert!((back.samples()[[0, t]] - x.samples()[[0, t]]).abs() < 1e-12);
        }
        Ok(())
    })
}

pub fn steering_is_unit_modulus_and_mirror_conjugate() -> Outcome {
    check(
        (2usize..200, 2usize..6, 0.01f64..0.3),
        |(grid, q, spacing)| {
            let geom = ArrayGeometry::uniform(q, spacing, 343.0).unwrap();
            let g = DoaGrid::uniform(grid).unwrap();
            let d = SteeringMatrix::new(&g, &geom, 9, FS, 16).unwrap();
            let v = d.values();
            for c in 0..grid {
                for k in 0..9 {
                    prop_assert_eq!(v[[c, k, 0]], Complex64::new(1.0, 0.0));
                    for m in 0..q {
                        prop_assert!((v[[c, k, m]].norm() - 1.0).abs() < 1e-12);
                        let mirror = v[[grid - 1 - c, k, m]];
                        prop_assert!((mirror - v[[c, k, m]].conj()).norm() < 1e-9);
                    }
                }
            }
            Ok(())
        },
    )
}

pub fn masks_stay_in_unit_interval() -> Outcome {
    check(
        (
            (1usize..6).prop_flat_map(|n| {
                (
                    spectrogram_strategy(2, n..n + 1),
                    spectrogram_strategy(2, n..n + 1),
                )
            }),
            0usize..10,
            any::<u64>(),
        ),
        |((d, y), bands, seed)| {
            for m in [
                psm_mask(&d, &y, 1).unwrap(),
                magnitude_ratio_mask(&d, &y, 0).unwrap(),
            ] {
                prop_assert!(m.weights().iter().all(|&w| (0.0..=1.0).contains(&w)));
            }
            let r = random_band_mask(9, y.num_frames(), bands.min(9), seed).unwrap();
            prop_assert!(r.weights().iter().all(|&w| w == 0.0 || w == 1.0));
            Ok(())
        },
    )
}

pub fn binarize_is_idempotent() -> Outcome {
    check(
        (prop::collection::vec(0.0f64..=1.0, 1..60), 0.0f64..=1.0),
        |(values, t)| {
            let m = AttentionMask::new(Array2::from_shape_vec((1, values.len()), values).unwrap())
                .unwrap();
            let once = binarize(&m, t).unwrap();
            prop_assert_eq!(binarize(&once, t).unwrap(), once);
            Ok(())
        },
    )
}

pub fn psm_bounded_by_magnitude_ratio_term() -> Outcome {
    check(
        ((1usize..6).prop_flat_map(|n| {
            (
                spectrogram_strategy(1, n..n + 1),
                spectrogram_strategy(1, n..n + 1),
            )
        }),),
        |((d, y),)| {
            let m = psm_mask(&d, &y, 0).unwrap();
            for ((k, n), &w) in m.weights().indexed_iter() {
                let xd = d.bins()[[0, k, n]];
                let yy = y.bins()[[0, k, n]];
                let den = xd.norm_sqr() + (yy - xd).norm_sqr();
                let bound = if den == 0.0 {
                    0.0
                } else {
                    (xd.norm_sqr() / den).sqrt()
                };
                prop_assert!(w <= bound + 1e-15);
            }
            Ok(())
        },
    )
}

pub fn ratio_mask_of_clean_signal_reconstructs_it() -> Outcome {
    check((spectrogram_strategy(1, 1..6),), |(d,)| {
        let m = magnitude_ratio_mask(&d, &d, 0).unwrap();
        for ((k, n), &w) in m.weights().indexed_iter() {
            let mag = d.bins()[[0, k, n]].norm();
            prop_assert!(w * mag == mag);
        }
        Ok(())
    })
}

pub fn srp_phat_equals_srp_mp_with_ones() -> Outcome {
    check((spectrogram_strategy(3, 1..6), 2usize..40), |(y, grid)| {
        let est = Estimator::new(
            DoaGrid::uniform(grid).unwrap(),
            ula(3),
            FS,
            16,
            EstimatorConfig::default(),
        )
        .unwrap();
        let n = y.num_frames();
        let ones = AttentionMask::ones(9, n);
        let a = est.srp_mp_raw(&y, None, 0..n).unwrap();
        let b = est.srp_mp_raw(&y, Some(&ones), 0..n).unwrap();
        prop_assert_eq!(a.values().to_vec(), b.values().to_vec());
        Ok(())
    })
}

pub fn cross_spectra_are_hermitian_and_srp_is_real() -> Outcome {
    check(
        (
            spectrogram_strategy(4, 1..5),
            prop::collection::vec(0.0f64..=1.0, 1..20),
        ),
        |(y, mvals)| {
            let m = mask_for(&y, &mvals);
            let w = mask_weighting(&phat_weighting(&y, 1e-8).unwrap(), &m).unwrap();
            let phi = cross_spectral_tensor(&y, &w).unwrap();
            let v = phi.values();
            let (k, n, q, _) = v.dim();
            for kk in 0..k {
                for nn in 0..n {
                    for a in 0..q {
                        prop_assert!(v[[kk, nn, a, a]].im == 0.0 && v[[kk, nn, a, a]].re >= 0.0);
                        for b in 0..q {
                            prop_assert_eq!(v[[kk, nn, a, b]], v[[kk, nn, b, a]].conj());
                        }
                    }
                }
            }
            // the full quadratic form over all ordered pairs is real for Hermitian Φ
            let d = steering(19, 4);
            for c in 0..19 {
                let mut acc = Complex64::new(0.0, 0.0);
                for kk in 0..k {
                    for nn in 0..n {
                        for a in 0..q {
                            for b in 0..q {
                                if a != b {
                                    acc += d.values()[[c, kk, a]].conj()
                                        * v[[kk, nn, a, b]]
                                        * d.values()[[c, kk, b]];
                                }
                            }
                        }
                    }
                }
                prop_assert!(acc.im.abs() < 1e-12 * acc.norm().max(1.0));
                let s = srp(&phi, &d, 0..n).unwrap();
                let scale = (n * k * (q - 1) * (q - 1)) as f64;
                prop_assert!((s.values()[c] - acc.re / scale).abs() < 1e-12 * acc.norm().max(1.0));
            }
            Ok(())
        },
    )
}

pub fn narrowband_sums_and_output_masking_consistency() -> Outcome {
    check(
        (
            spectrogram_strategy(3, 1..5),
            prop::collection::vec(0.01f64..=1.0, 1..20),
            0.01f64..=1.0,
        ),
        |(y, mvals, scale)| {
            let n = y.num_frames();
            let w = phat_weighting(&y, 1e-8).unwrap();
            let phi = cross_spectral_tensor(&y, &w).unwrap();
            let d = steering(13, 3);
            let total = srp(&phi, &d, 0..n).unwrap();
            let nb = narrowband_srp(&phi, &d, 0..n).unwrap();
            let ones = output_masking(&nb, &AttentionMask::ones(9, n)).unwrap();
            for c in 0..13 {
                let sum: f64 = nb.values().slice(ndarray::s![c, .., ..]).sum();
                prop_assert!((sum - total.values()[c]).abs() < 1e-12);
                let mean = sum / (9 * n) as f64;
                prop_assert!((ones.values()[c] - mean).abs() < 1e-12);
            }
            // a global rescaling of the mask cancels in the weighted average
            let m = mask_for(&y, &mvals);
            let scaled = AttentionMask::new(m.weights() * scale).unwrap();
            let a = output_masking(&nb, &m).unwrap();
            let b = output_masking(&nb, &scaled).unwrap();
            for c in 0..13 {
                prop_assert!(relative_eq!(
                    a.values()[c],
                    b.values()[c],
                    max_relative = 1e-12,
                    epsilon = 1e-15
                ));
            }
            Ok(())
        },
    )
}

pub fn normalization_and_pick_invariance() -> Outcome {
    check(
        (
            prop::collection::vec(-1.0f64..10.0, 37),
            0.01f64..100.0,
            -5.0f64..5.0,
        ),
        |(values, a, b)| {
            let raw = SpatialPowerSpectrum::unnormalized(values.clone());
            let grid = DoaGrid::uniform(37).unwrap();
            if let Ok(n) = normalize_sps(&raw) {
                let max = n.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                prop_assert_eq!(max, 1.0);
                prop_assert_eq!(normalize_sps(&n).unwrap(), n.clone());
                prop_assert_eq!(pick_doa(&n, &grid).unwrap(), pick_doa(&raw, &grid).unwrap());
            }
            let affine =
                SpatialPowerSpectrum::unnormalized(values.iter().map(|v| a * v + b).collect());
            let cubic =
                SpatialPowerSpectrum::unnormalized(values.iter().map(|v| v.powi(3) + v).collect());
            let expected = pick_doa(&raw, &grid).unwrap();
            prop_assert_eq!(pick_doa(&affine, &grid).unwrap(), expected);
            prop_assert_eq!(pick_doa(&cubic, &grid).unwrap(), expected);
            Ok(())
        },
    )
}

pub fn reversing_channels_mirrors_the_spectrum() -> Outcome {
    check((spectrogram_strategy(4, 1..5),), |(y,)| {
        let est = Estimator::new(
            DoaGrid::uniform(37).unwrap(),
            ula(4),
            FS,
            16,
            EstimatorConfig::default(),
        )
        .unwrap();
        let n = y.num_frames();
        let reversed = y
            .with_bins(Array3::from_shape_fn(y.bins().dim(), |(q, k, t)| {
                y.bins()[[3 - q, k, t]]
            }))
            .unwrap();
        let a = est.srp_mp_raw(&y, None, 0..n).unwrap();
        let b = est.srp_mp_raw(&reversed, None, 0..n).unwrap();
        for c in 0..37 {
            prop_assert!((a.values()[c] - b.values()[36 - c]).abs() < 1e-9);
        }
        Ok(())
    })
}

pub fn scene_decomposition_and_levels() -> Outcome {
    check(
        (
            0.0f64..=180.0,
            0.0f64..=180.0,
            -10.0f64..10.0,
            -5.0f64..40.0,
            any::<u64>(),
        ),
        |(doa, doa2, sir, snr, seed)| {
            let spec = SceneSpec {
                room: RoomSpec {
                    dimensions: [6.0, 5.0, 3.0],
                    t60: 0.0,
                },
                array: ArrayConfig::default(),
                sources: vec![
                    SourceSpec {
                        doa,
                        smd: 1.5,
                        signal: SourceSignal::WhiteNoise,
                    },
                    SourceSpec {
                        doa: doa2,
                        smd: 1.5,
                        signal: SourceSignal::WhiteNoise,
                    },
                ],
                snr_db: Some(snr),
                sir_db: sir,
                seed,
                duration_frames: 2,
                sample_rate: FS,
                stft: StftConfig::default(),
                propagation: Propagation::PlaneWave,
                wall_margin_m: 1.0,
            };
            let t = mix_scene(&spec).unwrap();
            let mut sum = t.noise.samples().to_owned();
            for i in 0..2 {
                sum = sum + &t.direct[i].samples() + &t.reverb[i].samples();
            }
            let scale = t
                .mixture
                .samples()
                .iter()
                .fold(1.0f64, |m, v| m.max(v.abs()));
            for (m, s) in t.mixture.samples().iter().zip(sum.iter()) {
                prop_assert!((m - s).abs() <= 4.0 * f64::EPSILON * scale);
            }
            prop_assert!((t.measured_sir_db().unwrap() - sir).abs() < 0.1);
            prop_assert!((t.measured_snr_db() - snr).abs() < 0.1);
            Ok(())
        },
    )
}

pub fn rir_energy_decreases_with_absorption() -> Outcome {
    check(
        (0.0f64..=1.0, 0.0f64..=1.0, 0.5f64..3.5, 0.5f64..2.5),
        |(beta_hi, drop, x, y)| {
            let room = RoomSpec {
                dimensions: [4.0, 3.0, 2.5],
                t60: 0.2,
            };
            let src = [x, y, 1.2];
            let mics = [[2.0, 1.5, 1.3], [2.08, 1.5, 1.3]];
            let opts = RirOptions {
                length: Some(600),
                max_order: Some(4),
            };
            let beta_lo = beta_hi * drop;
            let e = |beta: f64| -> f64 {
                let r = image_method_rir_with_reflection(&room, &src, &mics, FS, 343.0, beta, opts)
                    .unwrap();
                r.taps.iter().map(|v| v * v).sum()
            };
            // lower reflection coefficient means higher absorption
            prop_assert!(e(beta_lo) <= e(beta_hi) * (1.0 + 1e-12));
            Ok(())
        },
    )
}

pub fn report_invariants() -> Outcome {
    check(
        (prop::collection::vec(0.0f64..=180.0, 1..50),),
        |(errors,)| {
            let r = summarize_errors(&errors, Thresholds::default()).unwrap();
            prop_assert!(r.psacc >= r.acc);
            prop_assert!(r.mae >= 0.0);
            prop_assert!(r.medae <= errors.iter().cloned().fold(0.0, f64::max));
            prop_assert!((0.0..=100.0).contains(&r.acc) && (0.0..=100.0).contains(&r.psacc));
            let single = summarize_errors(&errors[..1], Thresholds::default()).unwrap();
            prop_assert_eq!((single.mae, single.medae), (errors[0], errors[0]));
            Ok(())
        },
    )
}

/// Every invariant, by name.
pub const ALL: &[(&str, fn() -> Outcome)] = &[
    ("stft_frames_satisfy_parseval", stft_frames_satisfy_parseval),
    ("stft_is_linear", stft_is_linear),
    (
        "istft_inverts_stft_on_interior",
        istft_inverts_stft_on_interior,
    ),
    (
        "steering_is_unit_modulus_and_mirror_conjugate",
        steering_is_unit_modulus_and_mirror_conjugate,
    ),
    ("masks_stay_in_unit_interval", masks_stay_in_unit_interval),
    ("binarize_is_idempotent", binarize_is_idempotent),
    (
        "psm_bounded_by_magnitude_ratio_term",
        psm_bounded_by_magnitude_ratio_term,
    ),
    (
        "ratio_mask_of_clean_signal_reconstructs_it",
        ratio_mask_of_clean_signal_reconstructs_it,
    ),
    (
        "srp_phat_equals_srp_mp_with_ones",
        srp_phat_equals_srp_mp_with_ones,
    ),
    (
        "cross_spectra_are_hermitian_and_srp_is_real",
        cross_spectra_are_hermitian_and_srp_is_real,
    ),
    (
        "narrowband_sums_and_output_masking_consistency",
        narrowband_sums_and_output_masking_consistency,
    ),
    (
        "normalization_and_pick_invariance",
        normalization_and_pick_invariance,
    ),
    (
        "reversing_channels_mirrors_the_spectrum",
        reversing_channels_mirrors_the_spectrum,
    ),
    (
        "scene_decomposition_and_levels",
        scene_decomposition_and_levels,
    ),
    (
        "rir_energy_decreases_with_absorption",
        rir_energy_decreases_with_absorption,
    ),
    ("report_invariants", report_invariants),
];

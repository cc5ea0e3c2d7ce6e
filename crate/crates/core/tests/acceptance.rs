//! Acceptance criteria, one PASS/FAIL line each. Exits non-zero if any fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use doalab::estimate::{srp_flops, Method};
use doalab::eval::{
    run_experiment, summarize_errors, ExperimentConfig, ExperimentOutput, MaskKind,
};

use common::invariants;

const JOBS: usize = 4;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn experiment(json: &str) -> (ExperimentOutput, Duration) {
    let config = ExperimentConfig::from_json(json).expect("valid acceptance config");
    let start = Instant::now();
    let out = run_experiment(&config, JOBS).expect("experiment runs");
    (out, start.elapsed())
}

fn errors(out: &ExperimentOutput, method: Method, mask: &str) -> Vec<f64> {
    out.records
        .iter()
        .filter(|r| r.method == method && r.mask == mask)
        .map(|r| r.ae)
        .collect()
}

fn percent(hits: usize, total: usize) -> f64 {
    100.0 * hits as f64 / total as f64
}

/// Plane-wave white noise at every grid DOA in [10°, 170°], SRP-PHAT and NormMUSIC.
fn on_grid_scenes() -> (ExperimentOutput, Duration) {
    experiment(
        r#"{"version": 1, "master_seed": 11,
            "scenes": {"rooms": [[6.0, 5.0, 3.0]], "t60": [0.0], "doas": 37,
                       "doa_range": [10.0, 170.0], "target": {"kind": "white_noise"},
                       "snr_db": [30.0, 30.0], "propagation": "plane_wave",
                       "duration_frames": 100},
            "methods": ["srp-p", "music"], "eval_frames": [100]}"#,
    )
}

fn criterion_1(out: &ExperimentOutput, elapsed: Duration) -> Verdict {
    let ae = errors(out, Method::SrpP, "none");
    let exact = ae.iter().filter(|&&e| e == 0.0).count();
    verdict(
        ae.len() == 33 && exact == ae.len() && elapsed < Duration::from_secs(10),
        format!(
            "SRP-PHAT AE = 0 on {exact}/{} on-grid DOAs, {:.2} s (needs all, < 10 s)",
            ae.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_2() -> Verdict {
    let config = |grid: usize| {
        format!(
            r#"{{"version": 1, "master_seed": 12,
                "scenes": {{"rooms": [[6.0, 5.0, 3.0]], "t60": [0.0], "doas": 180,
                           "doa_range": [30.0, 150.0], "target": {{"kind": "white_noise"}},
                           "snr_db": [30.0, 30.0], "propagation": "plane_wave",
                           "duration_frames": 100}},
                "grid_size": {grid}, "methods": ["srp-p"], "eval_frames": [100]}}"#
        )
    };
    let (coarse, _) = experiment(&config(37));
    let (fine, _) = experiment(&config(180));
    let ae = errors(&coarse, Method::SrpP, "none");
    let within = ae.iter().filter(|&&e| e <= 2.5 + 1e-9).count();
    let frac = percent(within, ae.len());
    let med_coarse = summarize_errors(&ae, Default::default()).unwrap().medae;
    let med_fine = summarize_errors(&errors(&fine, Method::SrpP, "none"), Default::default())
        .unwrap()
        .medae;
    verdict(
        frac >= 95.0 && med_fine < med_coarse,
        format!(
            "AE <= 2.5° on {frac:.1}% of {} off-grid DOAs (needs >= 95%); MedAE {med_coarse:.3}° on 37 points vs {med_fine:.3}° on 180 (needs strictly lower)",
            ae.len()
        ),
    )
}

const SWEEP: [f64; 10] = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

/// Two speech-like sources at 0 dB SIR in a T60 = 0.3 s room, 5 seeds × 37 DOAs.
fn interference_scenes() -> (ExperimentOutput, Duration) {
    let mut masks = vec!["\"oracle-psm\"".to_string()];
    masks.extend(
        SWEEP
            .iter()
            .map(|&t| format!("\"{}\"", MaskKind::OracleRatioBin(t))),
    );
    experiment(&format!(
        r#"{{"version": 1, "master_seed": 13,
            "scenes": {{"rooms": [[7.0, 6.0, 3.0]], "t60": [0.3], "doas": 37,
                       "seeds_per_doa": 5, "target": {{"kind": "speech_like"}},
                       "interferer": {{"kind": "speech_like"}}, "sir_db": [0.0, 0.0],
                       "snr_db": [30.0, 30.0], "duration_frames": 100}},
            "methods": ["srp-p", "srp-mp"], "masks": [{}], "eval_frames": [50]}}"#,
        masks.join(", ")
    ))
}

fn criterion_3(out: &ExperimentOutput, elapsed: Duration) -> Verdict {
    let th = out.config.metrics;
    let p = summarize_errors(&errors(out, Method::SrpP, "none"), th).unwrap();
    let mp = summarize_errors(&errors(out, Method::SrpMp, "oracle-psm"), th).unwrap();
    verdict(
        p.count == 185
            && mp.mae < p.mae
            && mp.psacc - p.psacc >= 10.0
            && elapsed < Duration::from_secs(300),
        format!(
            "{} scenes: oracle-PSM SRP-MP MAE {:.2}° psACC {:.1}% vs SRP-P MAE {:.2}° psACC {:.1}% (gap needs >= 10 points), {:.1} s (needs < 300 s)",
            p.count,
            mp.mae,
            mp.psacc,
            p.mae,
            p.psacc,
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_4() -> Verdict {
    let (out, _) = experiment(
        r#"{"version": 1, "master_seed": 14,
            "scenes": {"rooms": [[7.0, 6.0, 3.0]], "t60": [0.3], "doas": 37,
                       "seeds_per_doa": 4, "target": {"kind": "speech_like"},
                       "snr_db": [30.0, 30.0], "duration_frames": 100},
            "methods": ["srp-p", "srp-mp"],
            "masks": ["random-bands:50", "band-range:100:150"], "eval_frames": [50]}"#,
    );
    let th = out.config.metrics;
    let p = summarize_errors(&errors(&out, Method::SrpP, "none"), th).unwrap();
    let rb = summarize_errors(&errors(&out, Method::SrpMp, "random-bands:50"), th).unwrap();
    let db = summarize_errors(&errors(&out, Method::SrpMp, "band-range:100:150"), th).unwrap();
    verdict(
        (rb.psacc - p.psacc).abs() <= 5.0 && db.mae <= 3.0 * rb.mae,
        format!(
            "{} scenes: psACC unmasked {:.1}% vs rB {:.1}% (needs within 5 points); MAE dB {:.2}° vs rB {:.2}° (needs <= 3×)",
            p.count, p.psacc, rb.psacc, db.mae, rb.mae
        ),
    )
}

fn criterion_5() -> Verdict {
    let (k, c, q) = (257u64, 37u64, 4u64);
    let derived = (q - 1) * (q - 1) * (2 * k * c + 3 * k) + 5 * k * q;
    let got = srp_flops(k, c, q).unwrap();
    verdict(
        got == derived && derived == 183_241 && got < 200_000,
        format!("srp_flops(257, 37, 4) = {got} (derived {derived}, needs < 200000)"),
    )
}

fn criterion_6(out: &ExperimentOutput) -> Verdict {
    let loss = |method, mask: &str| -> Vec<(usize, f64)> {
        out.records
            .iter()
            .filter(|r| r.method == method && r.mask == mask)
            .map(|r| (r.scene_id, r.sps_loss))
            .collect()
    };
    let masked = loss(Method::SrpMp, "oracle-psm");
    let plain = loss(Method::SrpP, "none");
    let wins = masked
        .iter()
        .zip(&plain)
        .filter(|(m, p)| {
            assert_eq!(m.0, p.0);
            m.1 < p.1
        })
        .count();
    let frac = percent(wins, plain.len());
    verdict(
        !plain.is_empty() && masked.len() == plain.len() && frac >= 80.0,
        format!(
            "masked SPS loss below unmasked on {wins}/{} scenes = {frac:.1}% (needs >= 80%)",
            plain.len()
        ),
    )
}

fn criterion_7(out: &ExperimentOutput) -> Verdict {
    let th = out.config.metrics;
    let mae: Vec<f64> = SWEEP
        .iter()
        .map(|&t| {
            let label = MaskKind::OracleRatioBin(t).to_string();
            summarize_errors(&errors(out, Method::SrpMp, &label), th)
                .unwrap()
                .mae
        })
        .collect();
    let (best_i, best) =
        mae[1..mae.len() - 1]
            .iter()
            .enumerate()
            .fold(
                (0, f64::INFINITY),
                |b, (i, &v)| if v < b.1 { (i + 1, v) } else { b },
            );
    let curve: Vec<String> = SWEEP
        .iter()
        .zip(&mae)
        .map(|(t, m)| format!("{t}:{m:.2}"))
        .collect();
    verdict(
        best < mae[0] && best < mae[mae.len() - 1],
        format!(
            "MAE by v_thr [{}], best interior {} at {best:.2}° (needs below both ends)",
            curve.join(" "),
            SWEEP[best_i]
        ),
    )
}

fn criterion_8() -> Verdict {
    let start = Instant::now();
    let failed: Vec<String> = invariants::ALL
        .iter()
        .filter_map(|(name, run)| run().err().map(|e| format!("{name}: {e}")))
        .collect();
    let elapsed = start.elapsed();
    verdict(
        failed.is_empty() && elapsed < Duration::from_secs(120),
        format!(
            "{}/{} invariants hold over {} cases each, {:.1} s (needs < 120 s){}",
            invariants::ALL.len() - failed.len(),
            invariants::ALL.len(),
            invariants::CASES,
            elapsed.as_secs_f64(),
            if failed.is_empty() {
                String::new()
            } else {
                format!("; failed: {}", failed.join("; "))
            }
        ),
    )
}

fn criterion_9(out: &ExperimentOutput) -> Verdict {
    let ae = errors(out, Method::Music, "none");
    let exact = ae.iter().filter(|&&e| e == 0.0).count();
    let frac = percent(exact, ae.len());
    verdict(
        !ae.is_empty() && frac >= 95.0,
        format!(
            "NormMUSIC AE = 0 on {exact}/{} on-grid DOAs = {frac:.1}% (needs >= 95%)",
            ae.len()
        ),
    )
}

fn main() -> ExitCode {
    let report = |n: usize, v: Verdict| -> bool {
        println!(
            "criterion {n}: {} | {}",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
        v.pass
    };
    let mut ok = true;
    let (grid_out, grid_time) = on_grid_scenes();
    ok &= report(1, criterion_1(&grid_out, grid_time));
    ok &= report(2, criterion_2());
    let (mix_out, mix_time) = interference_scenes();
    ok &= report(3, criterion_3(&mix_out, mix_time));
    ok &= report(4, criterion_4());
    ok &= report(5, criterion_5());
    ok &= report(6, criterion_6(&mix_out));
    ok &= report(7, criterion_7(&mix_out));
    ok &= report(8, criterion_8());
    ok &= report(9, criterion_9(&grid_out));
    if ok {
        ExitCode::SUCCESS
    } else {
        println!("acceptance: some criteria failed");
        ExitCode::FAILURE
    }
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use doalab::attention::{
    band_range_mask, binarize, magnitude_ratio_mask, psm_mask, random_band_mask, read_mask_file,
    AttentionMask,
};
use doalab::estimate::{srp_flops, Estimator, EstimatorConfig, Method};
use doalab::eval::{grid_scenes, run_experiment, write_outputs, ExperimentConfig, MaskKind};
use doalab::signal::wav::read_wav;
use doalab::simulate::{direct_file_name, export_bundle, mix_scene, MIXTURE_FILE};
use doalab::{stft, ArrayConfig, DoaGrid, Error, Result, Spectrogram, StftConfig};

#[derive(Parser)]
#[command(
    name = "doalab",
    version,
    about = "Signal-aware DOA estimation for linear microphone arrays"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate every scene of a config's grid into WAV + truth.json bundles.
    Simulate(SimulateArgs),
    /// Estimate the DOA of a multichannel WAV file.
    Estimate(EstimateArgs),
    /// Run an evaluation experiment and write reports.
    Eval(EvalArgs),
    /// Print the per-frame SRP-PHAT flop count for K bins, C directions, Q mics.
    Flops {
        bins: u64,
        directions: u64,
        mics: u64,
    },
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Override the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct EstimateArgs {
    /// Multichannel mixture WAV.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "srp-p")]
    method: String,
    /// none, oracle-psm, oracle-ratio, oracle-ratio-bin:<thr>, random-bands:<n>,
    /// band-range:<lo>:<hi>, or a mask file.
    #[arg(long, default_value = "none")]
    mask: String,
    /// Direct-path target WAV for oracle masks [default: source1_direct.wav next to the input].
    #[arg(long)]
    direct: Option<PathBuf>,
    /// Number of DOA grid points over [0°, 180°].
    #[arg(long, default_value_t = 37)]
    grid: usize,
    /// Frame range as START:END (end exclusive) [default: all frames].
    #[arg(long)]
    frames: Option<String>,
    #[arg(long, default_value_t = 0.08)]
    mic_spacing: f64,
    #[arg(long, default_value_t = 16_000)]
    sample_rate: u32,
    #[arg(long, default_value_t = 1)]
    num_sources: usize,
    /// Seed for random band masks.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the result here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Worker threads; results do not depend on it.
    #[arg(long, env = "DOALAB_JOBS", default_value_t = 1)]
    jobs: usize,
    /// Override the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated methods overriding the config.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    /// Add binarized oracle ratio masks for thresholds LO:HI:STEP.
    #[arg(long)]
    vthr_sweep: Option<String>,
}

fn parse_frames(s: &str) -> Result<std::ops::Range<usize>> {
    let bad = || Error::InvalidParameter(format!("--frames expects START:END, got '{s}'"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    Ok(a.parse().map_err(|_| bad())?..b.parse().map_err(|_| bad())?)
}

fn parse_sweep(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidParameter(format!("--vthr-sweep expects LO:HI:STEP, got '{s}'"));
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    let [lo, hi, step] = parts[..] else {
        return Err(bad());
    };
    if !(step > 0.0) || lo > hi || lo < 0.0 || hi > 1.0 {
        return Err(bad());
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    // round away accumulated binary error so labels read 0.3, not 0.30000000000000004
    Ok((0..count)
        .map(|i| ((lo + i as f64 * step) * 1e9).round() / 1e9)
        .collect())
}

fn write_text(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|source| Error::File {
            path: p.to_path_buf(),
            source,
        }),
        None => {
            println!("{}", text.trim_end());
            Ok(())
        }
    }
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let mut config = ExperimentConfig::from_file(&args.config)?;
    if let Some(seed) = args.seed {
        config.master_seed = seed;
    }
    let scenes = grid_scenes(&config)?;
    for scene in &scenes {
        let truth = mix_scene(&scene.spec)?;
        export_bundle(
            &args.out_dir.join(format!("scene_{:05}", scene.id)),
            &scene.spec,
            &truth,
        )?;
    }
    eprintln!(
        "wrote {} scene bundles to {}",
        scenes.len(),
        args.out_dir.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct EstimateOutput<'a> {
    method: Method,
    mask: &'a str,
    frames: [usize; 2],
    grid: &'a [f64],
    doa: f64,
    sps: Vec<f64>,
    /// Per-frame DOAs and unnormalized spectra (SRP methods only).
    frame_doas: Option<Vec<f64>>,
    frame_sps: Option<Vec<Vec<f64>>>,
}

fn estimate_mask(
    args: &EstimateArgs,
    mixture: &Spectrogram,
    stft_config: &StftConfig,
) -> Result<Option<AttentionMask>> {
    let (k, n) = (mixture.num_bins(), mixture.num_frames());
    let direct = || -> Result<Spectrogram> {
        let path = match &args.direct {
            Some(p) => p.clone(),
            None => args.input.with_file_name(direct_file_name(0)),
        };
        stft(&read_wav(&path, Some(args.sample_rate))?, stft_config)
    };
    let kind = match args.mask.parse::<MaskKind>() {
        Ok(kind) => kind,
        Err(parse_err) => {
            let path = Path::new(&args.mask);
            if !path.exists() {
                return Err(parse_err);
            }
            return Ok(Some(read_mask_file(path)?));
        }
    };
    Ok(match kind {
        MaskKind::None => None,
        MaskKind::OraclePsm => Some(psm_mask(&direct()?, mixture, 0)?),
        MaskKind::OracleRatio => Some(magnitude_ratio_mask(&direct()?, mixture, 0)?),
        MaskKind::OracleRatioBin(t) => {
            Some(binarize(&magnitude_ratio_mask(&direct()?, mixture, 0)?, t)?)
        }
        MaskKind::RandomBands(b) => Some(random_band_mask(k, n, b, args.seed)?),
        MaskKind::BandRange(lo, hi) => Some(band_range_mask(k, n, lo, hi)?),
    })
}

fn estimate(args: EstimateArgs) -> Result<()> {
    let method: Method = args.method.parse()?;
    let input = if args.input.is_dir() {
        args.input.join(MIXTURE_FILE)
    } else {
        args.input.clone()
    };
    let args = EstimateArgs { input, ..args };
    let signal = read_wav(&args.input, Some(args.sample_rate))?;
    let stft_config = StftConfig::default();
    let y = stft(&signal, &stft_config)?;
    let geometry = ArrayConfig {
        num_mics: signal.num_channels(),
        mic_spacing_m: args.mic_spacing,
        ..ArrayConfig::default()
    }
    .to_geometry()?;
    let grid = DoaGrid::uniform(args.grid)?;
    let config = EstimatorConfig {
        music_sources: args.num_sources,
        ..EstimatorConfig::default()
    };
    let estimator = Estimator::for_spectrogram(grid.clone(), geometry, &y, config)?;
    let frames = match &args.frames {
        Some(s) => parse_frames(s)?,
        None => 0..y.num_frames(),
    };
    let mask = estimate_mask(&args, &y, &stft_config)?;
    let sps = estimator.estimate(method, &y, mask.as_ref(), frames.clone())?;
    let (frame_doas, frame_sps) = match method {
        Method::SrpP | Method::SrpMp => {
            let m = if method == Method::SrpP {
                None
            } else {
                mask.as_ref()
            };
            let e = estimator.frame_spectra(&y, m, frames.clone())?;
            let cols: Vec<Vec<f64>> = e
                .values()
                .columns()
                .into_iter()
                .map(|c| c.to_vec())
                .collect();
            let doas = cols
                .iter()
                .map(|c| {
                    let best = (0..c.len()).fold(0, |b, i| if c[i] > c[b] { i } else { b });
                    grid.angle(best)
                })
                .collect();
            (Some(doas), Some(cols))
        }
        _ => (None, None),
    };
    let out = EstimateOutput {
        method,
        mask: &args.mask,
        frames: [frames.start, frames.end],
        grid: grid.angles(),
        doa: estimator.pick(&sps)?,
        sps: sps.values().to_vec(),
        frame_doas,
        frame_sps,
    };
    write_text(
        args.out.as_deref(),
        &(serde_json::to_string_pretty(&out)? + "\n"),
    )
}

fn eval(args: EvalArgs) -> Result<()> {
    let mut config = ExperimentConfig::from_file(&args.config)?;
    if let Some(seed) = args.seed {
        config.master_seed = seed;
    }
    if let Some(methods) = &args.methods {
        config.methods = methods.iter().map(|m| m.parse()).collect::<Result<_>>()?;
    }
    if let Some(sweep) = &args.vthr_sweep {
        for t in parse_sweep(sweep)? {
            let kind = MaskKind::OracleRatioBin(t);
            if !config.masks.contains(&kind) {
                config.masks.push(kind);
            }
        }
    }
    config.validate()?;
    let output = run_experiment(&config, args.jobs)?;
    let files = write_outputs(&args.out_dir, &output)?;
    for g in &output.groups {
        eprintln!(
            "{:<7} {:<24} N_e={:<4} MAE {:7.2}  MedAE {:6.2}  ACC {:5.1}%  psACC {:5.1}%",
            g.method.to_string(),
            g.mask,
            g.frames_used,
            g.report.mae,
            g.report.medae,
            g.report.acc,
            g.report.psacc
        );
    }
    eprintln!("wrote {} files to {}", files.len(), args.out_dir.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Estimate(a) => estimate(a),
        Command::Eval(a) => eval(a),
        Command::Flops {
            bins,
            directions,
            mics,
        } => {
            println!("{}", srp_flops(bins, directions, mics)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("doalab: error[{}]: {msg}", e.kind());
            ExitCode::from(2)
        }
    }
}

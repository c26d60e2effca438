//! Subcommand definitions and dispatch.

use std::fs;
use std::path::PathBuf;

use ampud_core::amp::run_amp_ud;
use ampud_core::metrics::{sdr_db, sigma_z_sq_for_snr};
use ampud_core::rng::Stream;
use ampud_core::se::verify_tracking;
use ampud_core::sensing::{MatrixOperator, MeasurementSystem};
use ampud_core::source::{MarkovSourceSpec, SignalModel};
use ampud_core::ud::denoise_ud;
use ampud_core::window::WindowDenoiser;
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use crate::config::{
    echo_ud_amp, matrix_budget_bytes, out_dir, resolve_source, resolve_ud_amp,
    ConfigMap,
};
use crate::iofmt::{fmt_db, read_f64le, write_f64le, write_gm};
use crate::runner::{run_experiment, write_results_csv, Experiment, ExperimentInput};
use crate::stdct::{DctComposedOperator, ShortTimeDct};
use crate::wav::read_wav_mono16;

#[derive(Parser)]
#[command(
    name = "ampud",
    about = "Compressed-sensing reconstruction with AMP and a universal denoiser",
    version
)]
pub struct CliArgs {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a test signal and write it as raw little-endian f64.
    Generate(GenerateArgs),
    /// Denoise a scalar-channel observation file with the universal denoiser.
    Denoise(DenoiseArgs),
    /// Measure a signal and reconstruct it with AMP-UD.
    Reconstruct(ReconstructArgs),
    /// Compare empirical AMP error against the state-evolution prediction.
    SeVerify(SeVerifyArgs),
    /// Run a (rate x SNR x trial) reconstruction grid and emit CSV.
    Benchmark(BenchmarkArgs),
}

/// Flags shared by every subcommand that reads a config file.
#[derive(Args)]
struct CommonArgs {
    /// Flat key = value config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Source kind: mgauss | munif | mrad | m4 | sparse-laplace | gm:<path>.
    #[arg(long)]
    source: Option<String>,
    /// Dense-matrix cache budget in MiB; larger systems regenerate columns.
    #[arg(long)]
    matrix_budget_mb: Option<usize>,
}

impl CommonArgs {
    fn load(&self) -> Result<ConfigMap> {
        let mut map = match &self.config {
            Some(path) => ConfigMap::from_file(path)?,
            None => ConfigMap::default(),
        };
        map.set_opt("seed", &self.seed);
        map.set_opt("source", &self.source);
        map.set_opt("matrix_budget_mb", &self.matrix_budget_mb);
        Ok(map)
    }
}

#[derive(Args)]
struct UdFlags {
    /// Denoiser variant: ud1 (borrow members) or ud2 (KL/MDL merging).
    #[arg(long)]
    variant: Option<String>,
    /// Context half-width (context length is 2k).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    b1: Option<f64>,
    #[arg(long)]
    b2: Option<f64>,
    /// Initial cluster count.
    #[arg(long)]
    l_init: Option<usize>,
    /// Minimum symbols per mixture fit (ud1).
    #[arg(long)]
    min_fit: Option<usize>,
    /// Merge-stop threshold on the symmetrized KL distance (ud2).
    #[arg(long)]
    kl_stop: Option<f64>,
    /// Damping: a weight in (0,1] or `adaptive`.
    #[arg(long)]
    damping: Option<String>,
    /// AMP iteration count.
    #[arg(long)]
    t_max: Option<usize>,
}

impl UdFlags {
    fn apply(&self, map: &mut ConfigMap) {
        map.set_opt("variant", &self.variant);
        map.set_opt("k", &self.k);
        map.set_opt("b1", &self.b1);
        map.set_opt("b2", &self.b2);
        map.set_opt("l_init", &self.l_init);
        map.set_opt("min_fit", &self.min_fit);
        map.set_opt("kl_stop", &self.kl_stop);
        map.set_opt("damping", &self.damping);
        map.set_opt("t_max", &self.t_max);
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Signal length.
    #[arg(long)]
    n: Option<usize>,
    /// Output raw-f64 path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DenoiseArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    ud: UdFlags,
    /// Noisy observation file (raw f64).
    #[arg(long)]
    input: PathBuf,
    /// Scalar-channel noise variance.
    #[arg(long)]
    sigma_v_sq: f64,
    /// Denoised output path.
    #[arg(long)]
    out: PathBuf,
    /// Optional derivative output path.
    #[arg(long)]
    deriv_out: Option<PathBuf>,
    /// Clean signal for SDR reporting.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Directory for cluster-size / mixture / MDL diagnostics.
    #[arg(long)]
    diag_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ReconstructArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    ud: UdFlags,
    /// Clean signal file (raw f64) to measure and reconstruct; the default
    /// is a synthetic draw from --source.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Mono 16-bit PCM WAV input, reconstructed in the short-time DCT
    /// domain.
    #[arg(long)]
    wav: Option<PathBuf>,
    /// Truncate file inputs to this many samples.
    #[arg(long)]
    length: Option<usize>,
    /// Short-time DCT window (= points = hop) for WAV inputs.
    #[arg(long)]
    stdct_window: Option<usize>,
    /// Synthetic signal length.
    #[arg(long)]
    n: Option<usize>,
    /// Measurement rate R = M/N.
    #[arg(long)]
    rate: Option<f64>,
    /// Measurement SNR in dB (alternative to --sigma-z-sq).
    #[arg(long)]
    snr_db: Option<f64>,
    /// Measurement noise variance.
    #[arg(long)]
    sigma_z_sq: Option<f64>,
    /// Reconstruction output path (raw f64).
    #[arg(long)]
    out: PathBuf,
    /// Iteration trace CSV path.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct SeVerifyArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Sliding-window length (odd) of the reference denoiser.
    #[arg(long, default_value_t = 3)]
    window: usize,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    snr_db: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    t_max: Option<usize>,
    /// Monte-Carlo samples per recursion step.
    #[arg(long)]
    n_mc: Option<usize>,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchmarkArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    ud: UdFlags,
    /// Clean signal file (raw f64) instead of a synthetic source.
    #[arg(long)]
    input: Option<PathBuf>,
    /// WAV input benchmarked in the short-time DCT domain.
    #[arg(long)]
    wav: Option<PathBuf>,
    #[arg(long)]
    length: Option<usize>,
    #[arg(long)]
    stdct_window: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    /// Comma-separated measurement rates.
    #[arg(long)]
    rates: Option<String>,
    /// Comma-separated SNR values in dB.
    #[arg(long)]
    snrs_db: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    /// Output directory for results.csv and the echoed config.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

pub fn main_with_args(args: CliArgs) -> Result<()> {
    match args.command {
        Command::Generate(a) => generate(a),
        Command::Denoise(a) => denoise(a),
        Command::Reconstruct(a) => reconstruct(a),
        Command::SeVerify(a) => se_verify(a),
        Command::Benchmark(a) => benchmark(a),
    }
}

fn generate(args: GenerateArgs) -> Result<()> {
    let mut map = args.common.load()?;
    map.set_opt("n", &args.n);
    let n: usize = map.get("n", 10_000)?;
    let seed: u64 = map.get("seed", 0)?;
    let src = resolve_source(&map)?;
    let x = src.model.generate(n, seed).map_err(anyhow::Error::msg)?;
    write_f64le(&args.out, &x)?;
    println!(
        "wrote {} samples of {} (seed {seed}) to {}",
        n,
        src.name,
        args.out.display()
    );
    Ok(())
}

fn denoise(args: DenoiseArgs) -> Result<()> {
    let mut map = args.common.load()?;
    args.ud.apply(&mut map);
    let cfg = resolve_ud_amp(&map)?;
    let seed: u64 = map.get("seed", 0)?;
    let q = read_f64le(&args.input)?;
    anyhow::ensure!(args.sigma_v_sq >= 0.0, "sigma_v_sq must be >= 0");

    let out = denoise_ud(&q, args.sigma_v_sq, &cfg.ud, &Stream::new(seed))
        .map_err(anyhow::Error::msg)?;
    write_f64le(&args.out, &out.estimate)?;
    if let Some(path) = &args.deriv_out {
        write_f64le(path, &out.derivative)?;
    }
    if let Some(truth_path) = &args.truth {
        let truth = read_f64le(truth_path)?;
        let sdr = sdr_db(&truth, &out.estimate).map_err(anyhow::Error::msg)?;
        println!("sdr_db = {}", fmt_db(sdr));
    }
    if let Some(dir) = &args.diag_dir {
        fs::create_dir_all(dir)?;
        let d = &out.diagnostics;
        let mut sizes = String::from("cluster,initial_size\n");
        for (l, s) in d.initial_cluster_sizes.iter().enumerate() {
            sizes.push_str(&format!("{l},{s}\n"));
        }
        fs::write(dir.join("cluster_sizes.csv"), sizes)?;
        let mut mdl = String::from("step,mdl_cost\n");
        for (i, c) in d.mdl_trace.iter().enumerate() {
            mdl.push_str(&format!("{i},{c}\n"));
        }
        fs::write(dir.join("mdl_trace.csv"), mdl)?;
        for (l, gm) in d.final_models.iter().enumerate() {
            write_gm(&dir.join(format!("cluster_{l:03}.gm")), gm)?;
        }
        println!("diagnostics in {} (beta = {:.4})", dir.display(), d.beta);
    }
    println!("denoised {} symbols -> {}", q.len(), args.out.display());
    Ok(())
}

fn write_trace_csv(path: &std::path::Path, trace: &[ampud_core::amp::TraceRow]) -> Result<()> {
    let mut text = String::from("t,sigma_hat_sq,sdr_db,lambda\n");
    for row in trace {
        let sdr = row.sdr_db.map(fmt_db).unwrap_or_default();
        text.push_str(&format!(
            "{},{},{},{}\n",
            row.t, row.sigma_hat_sq, sdr, row.lambda
        ));
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn reconstruct(args: ReconstructArgs) -> Result<()> {
    let mut map = args.common.load()?;
    args.ud.apply(&mut map);
    map.set_opt("n", &args.n);
    map.set_opt("rate", &args.rate);
    map.set_opt("snr_db", &args.snr_db);
    map.set_opt("sigma_z_sq", &args.sigma_z_sq);
    map.set_opt("stdct_window", &args.stdct_window);
    map.set_opt("length", &args.length);
    let cfg = resolve_ud_amp(&map)?;
    let seed: u64 = map.get("seed", 0)?;
    let rate: f64 = map.get("rate", 0.4)?;
    anyhow::ensure!(rate > 0.0, "rate must be positive");
    let budget = matrix_budget_bytes(&map)?;
    let stream = Stream::new(seed);

    // Assemble the clean signal (and its analytic energy when synthetic).
    let truncate = |mut v: Vec<f64>| -> Vec<f64> {
        if let Ok(Some(len)) = map.get_opt::<usize>("length") {
            v.truncate(len);
        }
        v
    };
    let (x, analytic_energy, label): (Vec<f64>, Option<f64>, String) =
        if let Some(path) = &args.wav {
            (truncate(read_wav_mono16(path)?), None, format!("wav:{}", path.display()))
        } else if let Some(path) = &args.input {
            (truncate(read_f64le(path)?), None, format!("file:{}", path.display()))
        } else {
            let n: usize = map.get("n", 10_000)?;
            let src = resolve_source(&map)?;
            let x = src
                .model
                .generate(n, stream.derive(0).rng().next_u64())
                .map_err(anyhow::Error::msg)?;
            (x, Some(src.model.second_moment()), src.name)
        };
    anyhow::ensure!(!x.is_empty(), "empty input signal");

    // WAV inputs are reconstructed in the coefficient domain.
    let dct = args
        .wav
        .as_ref()
        .map(|_| -> Result<ShortTimeDct> {
            let w: usize = map.get("stdct_window", 32)?;
            ShortTimeDct::new(w, w, w)
        })
        .transpose()?;
    let (measured, coef_dim): (Vec<f64>, usize) = match &dct {
        Some(d) => {
            let theta = d.forward(&x)?;
            let len = theta.len();
            (theta, len)
        }
        None => (x.clone(), x.len()),
    };

    let energy = analytic_energy
        .unwrap_or_else(|| measured.iter().map(|v| v * v).sum::<f64>() / coef_dim as f64);
    let m = (rate * coef_dim as f64).round() as usize;
    let sigma_z_sq = match map.get_opt::<f64>("sigma_z_sq")? {
        Some(v) => v,
        None => {
            let snr: f64 = map.get("snr_db", 10.0)?;
            sigma_z_sq_for_snr(energy, m as f64 / coef_dim as f64, snr)
        }
    };
    let sys = MeasurementSystem::new(m, coef_dim, sigma_z_sq, stream.derive(1).rng().next_u64())
        .map_err(anyhow::Error::msg)?;
    let y = sys
        .measure(&measured, stream.derive(2).rng().next_u64())
        .map_err(anyhow::Error::msg)?;
    let algo_seed = stream.derive(3).rng().next_u64();

    let run = match &dct {
        Some(_) => {
            let op = DctComposedOperator {
                a: MatrixOperator::new(sys, budget),
                dct: {
                    let w: usize = map.get("stdct_window", 32)?;
                    ShortTimeDct::new(w, w, w)?
                },
            };
            run_amp_ud(&op, &y, &cfg, algo_seed, Some(&measured))
        }
        None => {
            let op = MatrixOperator::new(sys, budget);
            run_amp_ud(&op, &y, &cfg, algo_seed, Some(&measured))
        }
    }
    .map_err(|f| anyhow::anyhow!("{f}"))?;

    let x_hat = match &dct {
        Some(d) => d.inverse(&run.x_hat, x.len())?,
        None => run.x_hat.clone(),
    };
    write_f64le(&args.out, &x_hat)?;
    if let Some(path) = &args.trace {
        write_trace_csv(path, &run.trace)?;
    }
    let sdr = sdr_db(&x, &x_hat).map_err(anyhow::Error::msg)?;
    println!(
        "{label}: N={coef_dim} M={m} R={rate} sigma_z_sq={sigma_z_sq:.6e} iters={} sdr_db={}",
        run.iterations,
        fmt_db(sdr)
    );
    Ok(())
}

fn se_verify(args: SeVerifyArgs) -> Result<()> {
    let mut map = args.common.load()?;
    map.set_opt("n", &args.n);
    map.set_opt("rate", &args.rate);
    map.set_opt("snr_db", &args.snr_db);
    map.set_opt("trials", &args.trials);
    map.set_opt("t_max", &args.t_max);
    map.set_opt("n_mc", &args.n_mc);

    anyhow::ensure!(args.window % 2 == 1, "window length must be odd");
    let k = args.window / 2;
    let src = resolve_source(&map)?;
    let SignalModel::Markov(spec) = &src.model else {
        bail!("se-verify needs a Markov source (mgauss or m4)");
    };
    if matches!(
        spec,
        MarkovSourceSpec::TwoState { nonzero, .. } if !matches!(nonzero, ampud_core::source::NonzeroDist::Gauss { .. })
    ) {
        bail!("the exact window denoiser covers mgauss and m4 sources only");
    }

    let n: usize = map.get("n", 20_000)?;
    let rate: f64 = map.get("rate", 0.4)?;
    let snr: f64 = map.get("snr_db", 10.0)?;
    let trials: usize = map.get("trials", 10)?;
    let t_max: usize = map.get("t_max", 10)?;
    let n_mc: usize = map.get("n_mc", 100_000)?;
    let seed: u64 = map.get("seed", 0)?;
    let budget = matrix_budget_bytes(&map)?;

    let m = (rate * n as f64).round() as usize;
    let sigma_z_sq = sigma_z_sq_for_snr(src.model.second_moment(), m as f64 / n as f64, snr);
    let sys =
        MeasurementSystem::new(m, n, sigma_z_sq, 0).map_err(anyhow::Error::msg)?;
    let mut denoiser = WindowDenoiser {
        spec: spec.clone(),
        k,
    };
    let trace = verify_tracking(
        &src.model,
        &mut denoiser,
        &sys,
        trials,
        t_max,
        n_mc,
        budget,
        seed,
    )
    .map_err(anyhow::Error::msg)?;

    let mut text = String::from("t,sigma_sq_predicted,mse_empirical_mean,mse_empirical_stderr\n");
    for t in 0..trace.mse_empirical_mean.len() {
        let pred = trace
            .sigma_sq_predicted
            .get(t)
            .map(|v| v.to_string())
            .unwrap_or_default();
        text.push_str(&format!(
            "{t},{pred},{},{}\n",
            trace.mse_empirical_mean[t], trace.mse_empirical_stderr[t]
        ));
    }
    fs::write(&args.out, text).with_context(|| format!("writing {}", args.out.display()))?;
    println!(
        "{} window {}: max deviation {} dB over {} iterations -> {}",
        src.name,
        args.window,
        fmt_db(trace.max_deviation_db),
        trace.mse_empirical_mean.len() - 1,
        args.out.display()
    );
    Ok(())
}

fn benchmark(args: BenchmarkArgs) -> Result<()> {
    let mut map = args.common.load()?;
    args.ud.apply(&mut map);
    map.set_opt("n", &args.n);
    map.set_opt("rates", &args.rates);
    map.set_opt("snrs_db", &args.snrs_db);
    map.set_opt("trials", &args.trials);
    map.set_opt("length", &args.length);
    map.set_opt("stdct_window", &args.stdct_window);
    map.set_opt(
        "out_dir",
        &args.out_dir.as_ref().map(|p| p.display().to_string()),
    );
    if let Some(p) = &args.input {
        map.set("input", p.display().to_string());
    }
    if let Some(p) = &args.wav {
        map.set("wav", p.display().to_string());
    }

    let amp = resolve_ud_amp(&map)?;
    let rates = map.get_list_f64("rates", &[0.4])?;
    let snrs = map.get_list_f64("snrs_db", &[10.0])?;
    let trials: usize = map.get("trials", 50)?;
    let seed: u64 = map.get("seed", 0)?;
    let budget = matrix_budget_bytes(&map)?;

    let truncate = |mut v: Vec<f64>| -> Vec<f64> {
        if let Ok(Some(len)) = map.get_opt::<usize>("length") {
            v.truncate(len);
        }
        v
    };
    let (input, n) = if let Some(path) = map.raw("wav").map(PathBuf::from) {
        let signal = truncate(read_wav_mono16(&path)?);
        let window: usize = map.get("stdct_window", 32)?;
        let n = signal.len();
        (
            ExperimentInput::FixedDct {
                name: format!("wav:{}", path.display()),
                signal,
                window,
            },
            n,
        )
    } else if let Some(path) = map.raw("input").map(PathBuf::from) {
        let signal = truncate(read_f64le(&path)?);
        let n = signal.len();
        (
            ExperimentInput::Fixed {
                name: format!("file:{}", path.display()),
                signal,
            },
            n,
        )
    } else {
        let n: usize = map.get("n", 10_000)?;
        (ExperimentInput::Synthetic(resolve_source(&map)?), n)
    };

    let exp = Experiment {
        input,
        n,
        rates: rates.clone(),
        snrs_db: snrs.clone(),
        trials,
        master_seed: seed,
        amp,
        matrix_budget_bytes: budget,
    };

    let dir = out_dir(&map, "bench-out");
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;

    // Echo the fully resolved configuration for provenance.
    echo_ud_amp(&mut map, &exp.amp);
    map.echo_back("n", n.to_string());
    map.echo_back(
        "rates",
        rates.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(","),
    );
    map.echo_back(
        "snrs_db",
        snrs.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(","),
    );
    map.echo_back("trials", trials.to_string());
    map.echo_back("seed", seed.to_string());
    map.echo_back("source", exp.input.source_name().to_string());
    map.echo_back("out_dir", dir.display().to_string());
    fs::write(dir.join("config.txt"), map.render())?;

    let rows = run_experiment(&exp);
    let csv_path = dir.join("results.csv");
    write_results_csv(&csv_path, &rows)?;
    println!("{} rows -> {}", rows.len(), csv_path.display());
    Ok(())
}

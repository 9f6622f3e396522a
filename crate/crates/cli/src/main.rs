//! `mmf`: command line front end for the mode decomposition toolkit.
//!
//! Exit codes: 0 success, 2 validation error, 3 I/O error.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use mmf_core::config::{fiber_preset, Config};
use mmf_core::dataset::{gen_prmc, gen_smc, split, write_basis, DatasetReader, SmcGridSpec, SmcMode, SplitSpec};
use mmf_core::fiber::{build_basis, FiberSpec, ModeBasis, Parity};
use mmf_core::field::RoiMask;
use mmf_core::harness::{
    compare_resolutions, emit_report, gs_score_dataset, holo_roundtrip, score_predictions, simulate_mdm, write_constant_predictions,
    write_exact_predictions, write_magnitude_grid, HoloSettings, NoiseSpec,
};
use mmf_core::holography::Carrier;
use mmf_core::intensity_md::GsConfig;
use mmf_core::{Error, Result};

#[derive(Parser)]
#[command(name = "mmf", version, about = "Multimode fiber mode decomposition toolkit")]
struct Cli {
    /// Plain-text `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random draw (overrides the `seed` config key).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output path.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the guided modes and dump the sampled basis plus a mode listing.
    Modes,
    /// Generate an SMC or PRMC dataset, optionally split into train/val/test.
    GenDataset,
    /// Hologram record/reconstruct/decompose round trips (CSV per trial).
    HoloRoundtrip,
    /// Intensity-only decomposition of every record of a dataset.
    GsDecompose {
        /// Fiber preset (`mmf10` or `mmf55`).
        #[arg(long)]
        basis: Option<String>,
        #[arg(long)]
        dataset: PathBuf,
        /// Score at most this many records.
        #[arg(long)]
        limit: Option<u64>,
    },
    /// Score a prediction file against the dataset it was made for.
    Score {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        /// Fiber preset (`mmf10` or `mmf55`).
        #[arg(long)]
        basis: Option<String>,
        /// Method tag written to the report.
        #[arg(long, default_value = "predictions")]
        method: String,
    },
    /// Full resolution against downsampled holographic decomposition.
    CompareResolutions,
    /// Channel measurement, inverse precoding and known-mode detection.
    SimulateMdm {
        /// Mode count of the channel fiber (10 or 55).
        #[arg(long, default_value_t = 55)]
        n: usize,
        /// Measurement noise relative to the output norm.
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
    },
    /// Prediction files from the toolkit itself, for scoring bounds.
    MakePredictions {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum)]
        kind: PredictionKind,
        /// Value of every entry for `--kind constant`.
        #[arg(long, default_value_t = 0.5)]
        value: f32,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PredictionKind {
    /// The dataset's own labels.
    Exact,
    /// One constant for every entry.
    Constant,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) => 3,
        Error::Csv(c) if matches!(c.kind(), csv::ErrorKind::Io(_)) => 3,
        _ => 2,
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(invalid("--threads must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| invalid(e.to_string()))?;
    }
    let mut cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    let config_seed: u64 = cfg.take_or("seed", 0)?;
    let seed = cli.seed.unwrap_or(config_seed);
    let out = cli.out.as_deref();
    match cli.command {
        Command::Modes => modes(cfg, out),
        Command::GenDataset => gen_dataset(cfg, seed, out),
        Command::HoloRoundtrip => holo(cfg, seed, out),
        Command::GsDecompose { basis, dataset, limit } => gs(cfg, seed, out, basis, &dataset, limit),
        Command::Score { dataset, predictions, basis, method } => score(cfg, out, basis, &dataset, &predictions, &method),
        Command::CompareResolutions => compare(cfg, seed, out),
        Command::SimulateMdm { n, sigma } => mdm(cfg, seed, out, n, sigma),
        Command::MakePredictions { dataset, kind, value } => {
            cfg.finish()?;
            let out = require_out(out)?;
            let header = match kind {
                PredictionKind::Exact => write_exact_predictions(&dataset, out)?,
                PredictionKind::Constant => write_constant_predictions(&dataset, value, out)?,
            };
            eprintln!("wrote {} predictions (N = {}) to {}", header.count, header.n_modes, out.display());
            Ok(())
        }
    }
}

fn require_out(out: Option<&Path>) -> Result<&Path> {
    out.ok_or_else(|| invalid("--out is required"))
}

/// CSV sink: the `--out` file, or stdout.
fn sink(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

/// Basis from the config fiber keys, truncated to `n_modes` when set.
fn take_basis(cfg: &mut Config, default_grid: usize) -> Result<ModeBasis<f64>> {
    let spec = cfg.take_fiber("", "mmf10", default_grid)?;
    let n: Option<usize> = cfg.take("n_modes")?;
    truncate(build_basis(&spec)?, n)
}

fn truncate(basis: ModeBasis<f64>, n: Option<usize>) -> Result<ModeBasis<f64>> {
    match n {
        Some(n) if n != basis.len() => basis.truncated(n),
        _ => Ok(basis),
    }
}

/// Basis matching a dataset's grid and mode count.
fn basis_for_dataset(cfg: &mut Config, preset: Option<String>, dataset: &Path) -> Result<ModeBasis<f64>> {
    let header = *DatasetReader::open(dataset)?.header();
    if header.height != header.width {
        return Err(invalid(format!("dataset images are {}x{}, expected square", header.height, header.width)));
    }
    let grid = header.height as usize;
    let spec = match preset {
        Some(name) => {
            if cfg.take::<String>("fiber")?.is_some() {
                eprintln!("note: --basis overrides the `fiber` config key");
            }
            let mut spec = fiber_preset(&name, grid)?;
            if let Some(side) = cfg.take::<f64>("window_side")? {
                spec = spec.with_window(side)?;
            }
            spec
        }
        None => cfg.take_fiber("", "mmf10", grid)?,
    };
    if spec.grid_size != grid {
        return Err(Error::GridMismatch { expected: (grid, grid), actual: (spec.grid_size, spec.grid_size) });
    }
    truncate(build_basis(&spec)?, Some(header.n_modes as usize))
}

fn take_roi(cfg: &mut Config, basis: &ModeBasis<f64>) -> Result<RoiMask> {
    match cfg.take::<f64>("roi_core_factor")? {
        Some(f) => RoiMask::core(basis, f),
        None => Ok(RoiMask::full(basis.grid_size())),
    }
}

fn take_holo(cfg: &mut Config) -> Result<HoloSettings> {
    let d = HoloSettings::default();
    let carrier = match cfg.take::<f64>("carrier")? {
        Some(m) => Carrier::diagonal(m)?,
        None => d.carrier,
    };
    Ok(HoloSettings {
        carrier,
        reference_factor: cfg.take_or("reference_factor", d.reference_factor)?,
        noise: NoiseSpec { sigma: cfg.take_or("noise_sigma", 0.0)?, quantize: cfg.take_or("quantize", false)? },
    })
}

fn modes(mut cfg: Config, out: Option<&Path>) -> Result<()> {
    let basis = take_basis(&mut cfg, 64)?;
    cfg.finish()?;
    let mut listing = String::from("index\tl\tm\tparity\tu\tw\n");
    for (i, m) in basis.modes.iter().enumerate() {
        let parity = match m.parity {
            Parity::Even => "even",
            Parity::Odd => "odd",
        };
        listing.push_str(&format!("{i}\t{}\t{}\t{parity}\t{}\t{}\n", m.l, m.m, m.u, m.w));
    }
    match out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            write_basis(&basis, &mut w)?;
            w.flush()?;
            std::fs::write(sidecar(path, "modes.txt"), listing)?;
            eprintln!("{} modes, V = {:.4}", basis.len(), basis.spec.v_number());
        }
        None => print!("{listing}"),
    }
    Ok(())
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

fn gen_dataset(mut cfg: Config, seed: u64, out: Option<&Path>) -> Result<()> {
    let out = require_out(out)?;
    let basis = take_basis(&mut cfg, 64)?;
    let generator: String = cfg.take_or("generator", "prmc".to_string())?;
    let split_spec = take_split(&mut cfg)?;
    let header = match generator.as_str() {
        "prmc" => {
            let count: u64 = cfg.take("count")?.ok_or_else(|| Error::Config("prmc needs `count`".into()))?;
            cfg.finish()?;
            let mut w = BufWriter::new(File::create(out)?);
            let h = gen_prmc(count, &basis, seed, &mut w)?;
            w.flush()?;
            h
        }
        "smc" => {
            let mode = match cfg.take_or("smc_mode", "full".to_string())?.as_str() {
                "full" => SmcMode::FullGrid,
                "extremes" => SmcMode::Extremes,
                other => return Err(Error::Config(format!("unknown smc_mode `{other}` (expected full or extremes)"))),
            };
            let spec = SmcGridSpec { s_amp: cfg.take_or("s_amp", 0.25)?, s_phase: cfg.take_or("s_phase", 0.25)?, mode };
            let cap: u128 = cfg.take_or("cap", 10_000_000)?;
            cfg.finish()?;
            // refuse before creating the file
            let count = spec.record_count(basis.len())?;
            if count > cap {
                return Err(Error::CountCapExceeded { count, cap });
            }
            let mut w = BufWriter::new(File::create(out)?);
            let h = gen_smc(&spec, &basis, cap, &mut w)?;
            w.flush()?;
            h
        }
        other => return Err(Error::Config(format!("unknown generator `{other}` (expected smc or prmc)"))),
    };
    eprintln!("wrote {} records (N = {}, {}x{}) to {}", header.count, header.n_modes, header.height, header.width, out.display());
    if let Some(spec) = split_spec {
        let paths = ["train", "val", "test"].map(|s| sidecar(out, s));
        let parts = split(out, &spec, seed, [&paths[0], &paths[1], &paths[2]])?;
        for (p, h) in paths.iter().zip(parts) {
            eprintln!("  {}: {} records", p.display(), h.count);
        }
    }
    Ok(())
}

fn take_split(cfg: &mut Config) -> Result<Option<SplitSpec>> {
    let fractions: Option<String> = cfg.take("split")?;
    let val: Option<u64> = cfg.take("holdout_val")?;
    let test: Option<u64> = cfg.take("holdout_test")?;
    match (fractions, val, test) {
        (None, None, None) => Ok(None),
        (Some(f), None, None) => {
            let parts: Vec<f64> = f
                .split(',')
                .map(|p| p.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Config(format!("split `{f}`: {e}")))?;
            let [a, b, c] = parts[..] else {
                return Err(Error::Config(format!("split `{f}` needs three comma separated weights")));
            };
            let total = a + b + c;
            if !(total > 0.0) {
                return Err(Error::Config(format!("split `{f}` weights must sum to > 0")));
            }
            Ok(Some(SplitSpec::Fractions { train: a / total, val: b / total, test: c / total }))
        }
        (None, Some(val), Some(test)) => Ok(Some(SplitSpec::Holdout { val, test })),
        _ => Err(Error::Config("use either `split` or both `holdout_val` and `holdout_test`".into())),
    }
}

fn holo(mut cfg: Config, seed: u64, out: Option<&Path>) -> Result<()> {
    let basis = take_basis(&mut cfg, 64)?;
    let trials: u64 = cfg.take_or("trials", 200)?;
    let settings = take_holo(&mut cfg)?;
    let roi = take_roi(&mut cfg, &basis)?;
    cfg.finish()?;
    let rows = holo_roundtrip(trials, &basis, &settings, &roi, seed)?;
    let mut w = csv::Writer::from_writer(sink(out)?);
    w.write_record(["trial", "gamma", "max_coeff_error"])?;
    for (k, r) in rows.iter().enumerate() {
        w.write_record([k.to_string(), r.gamma.to_string(), r.max_error.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn gs(mut cfg: Config, seed: u64, out: Option<&Path>, preset: Option<String>, dataset: &Path, limit: Option<u64>) -> Result<()> {
    let basis = basis_for_dataset(&mut cfg, preset, dataset)?;
    let d = GsConfig::default();
    let gs_cfg = GsConfig {
        max_iters: cfg.take_or("max_iters", d.max_iters)?,
        restarts: cfg.take_or("restarts", d.restarts)?,
        tol: cfg.take_or("tol", d.tol)?,
        seed,
    };
    let roi = take_roi(&mut cfg, &basis)?;
    cfg.finish()?;
    let report = gs_score_dataset(dataset, &basis, &gs_cfg, &roi, limit)?;
    summarize(&report);
    emit_report(&[report], None, sink(out)?)
}

fn score(mut cfg: Config, out: Option<&Path>, preset: Option<String>, dataset: &Path, predictions: &Path, method: &str) -> Result<()> {
    let basis = basis_for_dataset(&mut cfg, preset, dataset)?;
    let roi = take_roi(&mut cfg, &basis)?;
    cfg.finish()?;
    let report = score_predictions(dataset, predictions, &basis, &roi, method)?;
    summarize(&report);
    emit_report(&[report], None, sink(out)?)
}

fn summarize(r: &mmf_core::harness::ScoreReport) {
    eprintln!(
        "{} @ {}: {} records, mean Γ {:.6}, std {:.6}, min {:.6}",
        r.method,
        r.resolution,
        r.count(),
        r.mean(),
        r.std(),
        r.min()
    );
}

fn compare(mut cfg: Config, seed: u64, out: Option<&Path>) -> Result<()> {
    let preset: String = cfg.take_or("fiber", "mmf10".to_string())?;
    let full_grid: usize = cfg.take_or("full_grid", 183)?;
    let low_grid: usize = cfg.take_or("low_grid", 64)?;
    let trials: u64 = cfg.take_or("trials", 200)?;
    let mut settings = take_holo(&mut cfg)?;
    if settings.noise == NoiseSpec::NONE && cfg.take::<bool>("noise_free")? != Some(true) {
        settings.noise = NoiseSpec { sigma: 0.01, quantize: true };
    }
    let core: Option<f64> = cfg.take("roi_core_factor")?;
    cfg.finish()?;
    let spec: FiberSpec = fiber_preset(&preset, full_grid)?;
    let full = build_basis::<f64>(&spec)?;
    let low = build_basis::<f64>(&spec.clone().with_grid(low_grid)?)?;
    let roi = |b: &ModeBasis<f64>| match core {
        Some(f) => RoiMask::core(b, f),
        None => Ok(RoiMask::full(b.grid_size())),
    };
    let cmp = compare_resolutions(trials, &full, &low, &settings, &roi(&full)?, &roi(&low)?, seed)?;
    for r in [&cmp.full, &cmp.downsampled, &cmp.downsampled_native] {
        summarize(r);
    }
    eprintln!("ratio {:.6}", cmp.ratio());
    emit_report(&[cmp.full, cmp.downsampled, cmp.downsampled_native], Some((1, 0)), sink(out)?)
}

fn mdm(mut cfg: Config, seed: u64, out: Option<&Path>, n: usize, sigma: f64) -> Result<()> {
    let grid: usize = cfg.take_or("grid_size", 64)?;
    cfg.finish()?;
    let preset = match n {
        10 => "mmf10",
        55 => "mmf55",
        other => return Err(invalid(format!("--n must be 10 or 55, got {other}"))),
    };
    let fiber = build_basis::<f64>(&fiber_preset(preset, grid)?)?;
    let receiver = build_basis::<f64>(&FiberSpec::mmf10(grid)?)?;
    let report = simulate_mdm(&fiber, &receiver, sigma, seed)?;
    eprintln!("diag fraction before {:.6}, after precoding {:.6}", report.diag_before, report.diag_after);

    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("mdm"));
    std::fs::create_dir_all(&dir)?;
    write_magnitude_grid(&report.measured.entries, dir.join("t_measured.csv"))?;
    write_magnitude_grid(&report.effective.entries, dir.join("t_precoded.csv"))?;
    let mut w = csv::Writer::from_path(dir.join("detection.csv"))?;
    let mut head = vec!["label".to_string(), "expected".to_string(), "detected".to_string()];
    head.extend(receiver.modes.iter().map(|m| m.label().to_string()));
    w.write_record(&head)?;
    for row in &report.detections {
        let mut rec = vec![row.label.to_string(), row.expected.to_string(), row.detected.to_string()];
        rec.extend(row.amplitudes.iter().map(|a| a.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    let mut s = csv::Writer::from_path(dir.join("summary.csv"))?;
    s.write_record(["quantity", "value"])?;
    s.write_record(["diag_fraction_measured".to_string(), report.diag_before.to_string()])?;
    s.write_record(["diag_fraction_precoded".to_string(), report.diag_after.to_string()])?;
    let hits = report.detections.iter().filter(|r| r.detected == r.expected).count();
    s.write_record(["detected".to_string(), format!("{hits}/{}", report.detections.len())])?;
    s.flush()?;
    Ok(())
}

//! `eosi`: simulate EOSI measurements of a biphoton source, reconstruct the
//! joint spectral amplitude from event logs, and analyse/report the result.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use eosi_core::interferometer::{histogram, EventStream, Interferogram};
use eosi_core::io::{
    self, emit_report, load_config, read_events, read_result, read_state, write_analysis,
    write_events, write_result, write_state, RunConfig, CONFIG_FILE, IDLER_EVENTS_FILE,
    RESULT_FILE, SIGNAL_EVENTS_FILE, STATE_FILE,
};
use eosi_core::reconstruct::{analyze, analyze_state, reconstruct, FitDegree, ReconstructOptions};

#[derive(Parser)]
#[command(
    name = "eosi",
    version,
    about = "Biphoton spectral-shearing simulation and reconstruction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate both measurement configurations from a run configuration.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override `acquisition.seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Override `acquisition.subset_size` (recorded for reconstruction).
        #[arg(long)]
        subset_size: Option<usize>,
        /// Override `acquisition.contrast_threshold` (recorded for reconstruction).
        #[arg(long)]
        contrast_threshold: Option<f64>,
    },
    /// Reconstruct the JSA from the two configurations' event logs.
    Reconstruct {
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        events_swapped: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        subset_size: Option<usize>,
        #[arg(long)]
        contrast_threshold: Option<f64>,
        #[arg(long, value_parser = parse_degree)]
        degree: Option<FitDegree>,
    },
    /// Schmidt analysis and time-frequency views of a result or state.
    Analyze {
        /// Directory holding `result.json` or `state.json` (or either file).
        #[arg(long)]
        state: PathBuf,
    },
    /// Regenerate the report files from `result.json`.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

fn parse_degree(s: &str) -> Result<FitDegree, String> {
    match s {
        "quadratic" => Ok(FitDegree::Quadratic),
        "cubic" => Ok(FitDegree::Cubic),
        _ => Err(format!("expected `quadratic` or `cubic`, got `{s}`")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate {
            config,
            out,
            seed,
            subset_size,
            contrast_threshold,
        } => simulate(&config, &out, seed, subset_size, contrast_threshold),
        Command::Reconstruct {
            events,
            events_swapped,
            out,
            subset_size,
            contrast_threshold,
            degree,
        } => run_reconstruct(
            &events,
            &events_swapped,
            &out,
            subset_size,
            contrast_threshold,
            degree,
        ),
        Command::Analyze { state } => run_analyze(&state),
        Command::Report { input } => run_report(&input),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("eosi: {}", error_chain(&e));
            ExitCode::FAILURE
        }
    }
}

/// The error and its causes, skipping causes already quoted by their parent.
fn error_chain(e: &anyhow::Error) -> String {
    let mut text = e.to_string();
    let mut last = text.clone();
    for cause in e.chain().skip(1) {
        let c = cause.to_string();
        if !last.contains(&c) {
            text.push_str(": ");
            text.push_str(&c);
        }
        last = c;
    }
    text
}

fn simulate(
    config: &Path,
    out: &Path,
    seed: Option<u64>,
    subset_size: Option<usize>,
    contrast_threshold: Option<f64>,
) -> Result<()> {
    let mut cfg = load_config(config)?;
    if let Some(seed) = seed {
        cfg.acquisition.seed = seed;
    }
    if let Some(n) = subset_size {
        cfg.acquisition.subset_size = n;
    }
    if let Some(t) = contrast_threshold {
        cfg.acquisition.contrast_threshold = t;
    }
    cfg.output.directory = out.to_path_buf();
    cfg.validate()?;

    let run = cfg.simulate()?;
    create_dir(out)?;
    std::fs::write(out.join(CONFIG_FILE), cfg.to_toml())
        .with_context(|| format!("file-access: {}", out.join(CONFIG_FILE).display()))?;
    write_events(&run.signal, out.join(SIGNAL_EVENTS_FILE))?;
    write_events(&run.idler, out.join(IDLER_EVENTS_FILE))?;
    write_state(&run.state, out.join(STATE_FILE))?;
    println!("config_digest = {}", cfg.digest());
    println!("events_signal_in_eosi = {}", run.signal.len());
    println!("events_idler_in_eosi = {}", run.idler.len());
    Ok(())
}

/// Options recorded next to the event logs by `simulate`, if the config's
/// digest matches the logs; the defaults otherwise.
fn recorded_options(events: &Path, stream: &EventStream) -> Result<ReconstructOptions> {
    let candidate = events.parent().unwrap_or(Path::new(".")).join(CONFIG_FILE);
    if !candidate.is_file() {
        return Ok(ReconstructOptions::default());
    }
    let cfg: RunConfig = load_config(&candidate)?;
    if cfg.digest() == stream.header.config_digest {
        Ok(cfg.reconstruct_options())
    } else {
        Ok(ReconstructOptions::default())
    }
}

fn run_reconstruct(
    events: &Path,
    events_swapped: &Path,
    out: &Path,
    subset_size: Option<usize>,
    contrast_threshold: Option<f64>,
    degree: Option<FitDegree>,
) -> Result<()> {
    let a = read_events(events)?;
    let b = read_events(events_swapped)?;
    let mut opts = recorded_options(events, &a)?;
    if let Some(n) = subset_size {
        opts.subset_size = n;
    }
    if let Some(t) = contrast_threshold {
        opts.contrast_threshold = t;
    }
    if let Some(d) = degree {
        opts.degree = d;
    }
    let result = reconstruct(&a, &b, &opts)?;
    create_dir(out)?;
    write_result(&result, out.join(RESULT_FILE))?;
    let pooled: Vec<Interferogram> = [&a, &b]
        .into_iter()
        .filter_map(|s| {
            histogram(s, opts.subset_size)
                .ok()
                .and_then(|g| Interferogram::pooled(&g))
        })
        .collect();
    emit_report(&result, &pooled, out)?;
    let phi11 = result.phi11();
    println!("phi11_fs2 = {:.6e} +- {:.2e}", phi11.value, phi11.sigma);
    println!(
        "k_full = {:.4} +- {:.4}",
        result.k_full.value, result.k_full.sigma
    );
    println!(
        "k_modulus = {:.4} +- {:.4}",
        result.k_modulus.value, result.k_modulus.sigma
    );
    if result.inconsistent {
        eprintln!(
            "eosi: warning: phi11 estimates of the two configurations disagree beyond 3 sigma"
        );
    }
    Ok(())
}

fn run_analyze(target: &Path) -> Result<()> {
    let (dir, summary) = if target.is_dir() {
        let (result, state) = (target.join(RESULT_FILE), target.join(STATE_FILE));
        let summary = if result.is_file() {
            analyze(&read_result(&result)?)
        } else if state.is_file() {
            analyze_state(&read_state(&state)?)?
        } else {
            bail!(
                "input-missing: {} holds neither {RESULT_FILE} nor {STATE_FILE}",
                target.display()
            );
        };
        (target.to_path_buf(), summary)
    } else {
        let summary = match read_result(target) {
            Ok(result) => analyze(&result),
            Err(_) => analyze_state(&read_state(target)?)?,
        };
        (
            target.parent().unwrap_or(Path::new(".")).to_path_buf(),
            summary,
        )
    };
    write_analysis(&summary, &dir)?;
    println!(
        "k_full = {:.4} +- {:.4}",
        summary.k_full.value, summary.k_full.sigma
    );
    println!(
        "k_modulus = {:.4} +- {:.4}",
        summary.k_modulus.value, summary.k_modulus.sigma
    );
    for (k, v) in summary.schmidt_values.iter().take(5).enumerate() {
        println!("lambda_{} = {:.6}", k + 1, v);
    }
    Ok(())
}

fn run_report(dir: &Path) -> Result<()> {
    let path = dir.join(RESULT_FILE);
    if !path.is_file() {
        bail!("input-missing: {} not found", path.display());
    }
    let result = read_result(&path)?;
    let files = emit_report(&result, &[], dir)?;
    print!("{}", io::fit_summary_text(&result));
    println!("files_written = {}", files.len());
    Ok(())
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("file-access: cannot create {}", dir.display()))
}

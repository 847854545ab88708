use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use hyperobs::certify::{self, DEFAULT_TOL};
use hyperobs::lyap::{self, DEFAULT_ENVELOPE_SLACK};
use hyperobs::model::{self, reference, Certificate, PdeOdeSystem};
use hyperobs::sim::{self, InitSpec, Scheme, SimConfig, PAPER_EXAMPLE};
use hyperobs::synth::{self, SynthConfig};

#[derive(Parser)]
#[command(name = "hyperobs", version, about = "Boundary observer certificates for transport PDEs with ODE boundary dynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a certificate and print the verification report.
    Verify {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        certificate: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
    /// Search for a certificate, gain included.
    Design {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated ascending values.
        #[arg(long, value_delimiter = ',')]
        mu_grid: Option<Vec<f64>>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        restarts: Option<usize>,
    },
    /// Simulate plant and observer; write the trajectory and diagnostics.
    Simulate {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        certificate: PathBuf,
        #[arg(long)]
        t_end: f64,
        #[arg(long)]
        cells: usize,
        #[arg(long, default_value_t = 0.9)]
        cfl: f64,
        #[arg(long, default_value = "upwind")]
        scheme: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = TrajFormat::Csv)]
        format: TrajFormat,
        #[arg(long)]
        diag: Option<PathBuf>,
        /// `paper-example` or a JSON file with x, xhat, chi, chihat.
        #[arg(long, default_value = PAPER_EXAMPLE)]
        init: String,
        #[arg(long, default_value_t = 1)]
        record_every: usize,
    },
    /// Fit the decay of V from a diagnostics file and check the envelope.
    Decay {
        #[arg(long)]
        diag: PathBuf,
        #[arg(long)]
        certificate: PathBuf,
        #[arg(long)]
        system: PathBuf,
        /// `lo,hi`
        #[arg(long, value_parser = parse_window)]
        window: Option<(f64, f64)>,
        #[arg(long, default_value_t = DEFAULT_ENVELOPE_SLACK)]
        slack: f64,
    },
    /// Write a built-in example system and certificate.
    Example {
        #[arg(value_enum)]
        name: ExampleName,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum TrajFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExampleName {
    Paper,
}

fn parse_window(s: &str) -> std::result::Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    let [lo, hi] = parts[..] else {
        return Err(format!("expected lo,hi, got {s:?}"));
    };
    let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}"));
    Ok((num(lo)?, num(hi)?))
}

/// Outcome of a well-formed run: `true` for success, `false` for a negative
/// verdict.
type Verdict = bool;

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load_system(path: &Path) -> Result<PdeOdeSystem> {
    model::load_system(&read(path)?).with_context(|| format!("invalid system {}", path.display()))
}

fn load_certificate(path: &Path) -> Result<Certificate> {
    model::load_certificate(&read(path)?).with_context(|| format!("invalid certificate {}", path.display()))
}

/// Writes next to the target, then renames over it.
fn write_atomic(path: &Path, contents: impl FnOnce(&mut fs::File) -> Result<()>) -> Result<()> {
    let name = path
        .file_name()
        .with_context(|| format!("{} is not a file path", path.display()))?;
    let tmp = path.with_file_name(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp).with_context(|| format!("cannot create {}", tmp.display()))?;
        contents(&mut f)?;
        f.flush()?;
        f.sync_all()?;
        fs::rename(&tmp, path).with_context(|| format!("cannot write {}", path.display()))
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, |f| Ok(f.write_all(text.as_bytes())?))
}

fn print_json(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("json value serializes"));
}

fn verify(system: &Path, certificate: &Path, tol: f64) -> Result<Verdict> {
    let sys = load_system(system)?;
    // structural problems are part of the verdict, not a load error
    let cert = model::parse_certificate(&read(certificate)?)
        .with_context(|| format!("invalid certificate {}", certificate.display()))?;
    let report = certify::verify(&sys, &cert, tol)?;
    print_json(&serde_json::to_value(report)?);
    Ok(report.feasible)
}

fn design(
    system: &Path,
    out: &Path,
    mu_grid: Option<Vec<f64>>,
    seed: Option<u64>,
    restarts: Option<usize>,
) -> Result<Verdict> {
    let sys = load_system(system)?;
    let mut cfg = SynthConfig::default();
    if let Some(g) = mu_grid {
        cfg.mu_grid = g;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(r) = restarts {
        cfg.restarts = r;
    }
    let res = synth::synthesize(&sys, &cfg)?;
    if let Some(cert) = &res.certificate {
        write_text(out, &model::save_certificate(cert))?;
    } else {
        log::warn!("no certificate found; {} not written", out.display());
    }
    print_json(&res.to_json());
    Ok(res.found())
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    system: &Path,
    certificate: &Path,
    t_end: f64,
    cells: usize,
    cfl: f64,
    scheme: &str,
    out: &Path,
    format: TrajFormat,
    diag: Option<&Path>,
    init: &str,
    record_every: usize,
) -> Result<Verdict> {
    let sys = load_system(system)?;
    let cert = load_certificate(certificate)?;
    cert.check_dims(&sys)?;
    let cfg = SimConfig {
        n_cells: cells,
        cfl,
        t_end,
        scheme: scheme.parse::<Scheme>()?,
        record_every,
    };
    cfg.validate()?;
    let spec = if init == PAPER_EXAMPLE {
        InitSpec::paper_example()
    } else {
        let path = Path::new(init);
        InitSpec::from_json(&read(path)?).with_context(|| format!("invalid initial state {init}"))?
    };
    let x0 = sim::make_initial(&sys, &spec, cells)?;
    let traj = sim::simulate(&sys, &cert.l_gain, &x0, &cfg)?;
    match format {
        TrajFormat::Csv => write_atomic(out, |f| {
            let mut w = std::io::BufWriter::new(f);
            traj.write_csv(&mut w)?;
            Ok(w.flush()?)
        })?,
        TrajFormat::Json => write_text(out, &(serde_json::to_string(&traj.to_json())? + "\n"))?,
    }
    if let Some(diag) = diag {
        let decay = match certify::decay_estimate(&sys, &cert) {
            Ok(d) => d,
            Err(e) => {
                log::warn!("no guaranteed envelope: {e}");
                certify::DecayEstimate::from_alphas(f64::NAN, f64::NAN, f64::NAN)
            }
        };
        let rows = lyap::diagnostics(&traj, &cert, &decay)?;
        write_atomic(diag, |f| {
            let mut w = std::io::BufWriter::new(f);
            lyap::write_diagnostics(&rows, &mut w)?;
            Ok(w.flush()?)
        })?;
    }
    log::info!("{} snapshots up to t = {}", traj.snapshots.len(), traj.last().t);
    Ok(true)
}

fn decay(diag: &Path, certificate: &Path, system: &Path, window: Option<(f64, f64)>, slack: f64) -> Result<Verdict> {
    let sys = load_system(system)?;
    let cert = load_certificate(certificate)?;
    let file = fs::File::open(diag).with_context(|| format!("cannot read {}", diag.display()))?;
    let rows = lyap::read_diagnostics(BufReader::new(file)).with_context(|| format!("invalid diagnostics {}", diag.display()))?;
    let v: Vec<(f64, f64)> = rows.iter().map(|r| (r.t, r.v)).collect();
    let fit = lyap::fit_log_linear(&v, window)?;
    let estimate = certify::decay_estimate(&sys, &cert)?;
    let dist: Vec<(f64, f64)> = rows.iter().map(|r| (r.t, r.dist)).collect();
    if slack.is_nan() || slack < 0.0 {
        bail!("slack must be nonnegative, got {slack}");
    }
    let envelope = lyap::envelope_check(&dist, &estimate, slack);
    print_json(&json!({
        "fit": fit,
        "guaranteed": estimate,
        "guaranteed_v_rate": 2.0 * estimate.lambda_rate,
        "envelope": envelope,
    }));
    Ok(envelope.holds)
}

fn example(out_dir: &Path) -> Result<Verdict> {
    fs::create_dir_all(out_dir).with_context(|| format!("cannot create {}", out_dir.display()))?;
    write_text(&out_dir.join("system.json"), &model::save_system(&reference::system()))?;
    write_text(
        &out_dir.join("certificate.json"),
        &model::save_certificate(&reference::published_certificate()),
    )?;
    Ok(true)
}

fn run(cli: Cli) -> Result<Verdict> {
    match cli.command {
        Command::Verify { system, certificate, tol } => verify(&system, &certificate, tol),
        Command::Design { system, out, mu_grid, seed, restarts } => design(&system, &out, mu_grid, seed, restarts),
        Command::Simulate {
            system,
            certificate,
            t_end,
            cells,
            cfl,
            scheme,
            out,
            format,
            diag,
            init,
            record_every,
        } => simulate(
            &system,
            &certificate,
            t_end,
            cells,
            cfl,
            &scheme,
            &out,
            format,
            diag.as_deref(),
            &init,
            record_every,
        ),
        Command::Decay { diag, certificate, system, window, slack } => decay(&diag, &certificate, &system, window, slack),
        Command::Example { name: ExampleName::Paper, out_dir } => example(&out_dir),
    }
}

fn init_logging() -> Result<()> {
    let level = match std::env::var("HYPEROBS_LOG").as_deref() {
        Err(_) | Ok("") => log::LevelFilter::Warn,
        Ok("quiet") => log::LevelFilter::Off,
        Ok("info") => log::LevelFilter::Info,
        Ok("debug") => log::LevelFilter::Debug,
        Ok(other) => bail!("HYPEROBS_LOG must be quiet, info or debug, got {other:?}"),
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = init_logging().and_then(|()| run(cli));
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

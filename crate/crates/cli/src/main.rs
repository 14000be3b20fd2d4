//! `vesseltree`: batch driver for phantom generation, filtering, tree
//! extraction and evaluation.
//!
//! Exit status is 0 on success, 2 for a bad configuration or command line,
//! 3 for a missing input file and 1 for anything else. Failures print one
//! line to stderr: `error code=<n> kind=<kind> field=<field> message=<text>`.
//! Library log messages are off unless `RUST_LOG` asks for them.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vesseltree::config::{NoiseLevel, PhantomSource, PipelineConfig};
use vesseltree::eval::{csv_row, CSV_HEADER};
use vesseltree::pipeline::{self, volume_id, GT_FILE, TREE_FILE};
use vesseltree::selftest::run_selftest;
use vesseltree::Error;

const DEFAULT_OUTPUT_DIR: &str = "out";

#[derive(Parser, Debug)]
#[command(name = "vesseltree", version, about = "Vascular tree extraction from 3D volumes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a phantom volume and its ground-truth graph.
    Phantom {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        phantom: PhantomArgs,
    },
    /// Synthesize the vesselness map, tensor field and seeds of a volume.
    Filter {
        #[command(flatten)]
        common: Common,
    },
    /// Extract the geodesic tree from a filter output directory.
    Extract {
        #[command(flatten)]
        common: Common,
    },
    /// Score a tree graph (--input) against a ground-truth graph (--gt).
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        gt: Option<PathBuf>,
    },
    /// Run every stage; without --input the configured phantom is generated.
    Pipeline {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        phantom: PhantomArgs,
        #[arg(long)]
        gt: Option<PathBuf>,
    },
    /// Run the built-in invariant checks.
    Selftest,
}

#[derive(Args, Debug, Default)]
struct Common {
    /// TOML configuration file; `VESSELTREE_<SECTION>__<KEY>` variables override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Filtering threads; outputs do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Also write per-scale maps and the distance and region volumes.
    #[arg(long)]
    debug_dumps: bool,
}

#[derive(Args, Debug, Default)]
struct PhantomArgs {
    /// tube, helix, bifurcation, kissing, hcp or tree.
    #[arg(long)]
    kind: Option<String>,
    /// none, N1 or N2.
    #[arg(long)]
    noise: Option<String>,
    #[arg(long)]
    n_terminals: Option<usize>,
}

fn config_error(field: &str, reason: impl Into<String>) -> Error {
    Error::Config { field: field.into(), reason: reason.into() }
}

fn load(common: &Common, phantom: Option<&PhantomArgs>, gt: Option<&PathBuf>) -> Result<PipelineConfig, Error> {
    let mut cfg = PipelineConfig::load(common.config.as_deref())?;
    if let Some(w) = common.workers {
        cfg.workers = w;
    }
    if let Some(s) = common.seed {
        cfg.rng_seed = s;
    }
    if common.debug_dumps {
        cfg.io.debug_dumps = true;
    }
    if let Some(p) = &common.input {
        cfg.io.input = Some(p.clone());
    }
    if let Some(p) = &common.output_dir {
        cfg.io.output_dir = Some(p.clone());
    }
    if let Some(p) = gt {
        cfg.io.gt = Some(p.clone());
    }
    if let Some(ph) = phantom {
        if let Some(k) = &ph.kind {
            cfg.phantom.kind = k.parse::<PhantomSource>()?;
        }
        if let Some(n) = &ph.noise {
            cfg.phantom.noise = match n.to_ascii_lowercase().as_str() {
                "none" => NoiseLevel::None,
                "n1" => NoiseLevel::N1,
                "n2" => NoiseLevel::N2,
                _ => return Err(config_error("phantom.noise", format!("unknown noise level `{n}`"))),
            };
        }
        if let Some(n) = ph.n_terminals {
            cfg.phantom.n_terminals = n;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn output_dir(cfg: &PipelineConfig) -> PathBuf {
    cfg.io.output_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
}

fn input<'a>(cfg: &'a PipelineConfig, what: &str) -> Result<&'a Path, Error> {
    cfg.io.input.as_deref().ok_or_else(|| config_error("io.input", format!("--input ({what}) is required")))
}

fn print_paths(paths: &[PathBuf]) {
    for p in paths {
        println!("{}", p.display());
    }
}

fn run(command: Command) -> Result<ExitCode, Error> {
    match command {
        Command::Phantom { common, phantom } => {
            let cfg = load(&common, Some(&phantom), None)?;
            print_paths(&pipeline::run_phantom(&cfg, &output_dir(&cfg))?);
        }
        Command::Filter { common } => {
            let cfg = load(&common, None, None)?;
            print_paths(&pipeline::run_filter(&cfg, input(&cfg, "a volume")?, &output_dir(&cfg))?);
        }
        Command::Extract { common } => {
            let cfg = load(&common, None, None)?;
            print_paths(&pipeline::run_extract(&cfg, input(&cfg, "a filter output directory")?, &output_dir(&cfg))?);
        }
        Command::Eval { common, gt } => {
            let cfg = load(&common, None, gt.as_ref())?;
            let tree = input(&cfg, &format!("a {TREE_FILE} file"))?;
            let gt = cfg.io.gt.as_deref().ok_or_else(|| config_error("io.gt", format!("--gt (a {GT_FILE} file) is required")))?;
            let (m, _) = pipeline::run_eval(&cfg, tree, gt, &output_dir(&cfg))?;
            println!("{CSV_HEADER}\n{}", csv_row(&volume_id(&cfg), cfg.phantom.noise.name(), &m));
        }
        Command::Pipeline { common, phantom, gt } => {
            let cfg = load(&common, Some(&phantom), gt.as_ref())?;
            let out = output_dir(&cfg);
            if let Some(m) = pipeline::run_pipeline(&cfg, &out)? {
                println!("{CSV_HEADER}\n{}", csv_row(&volume_id(&cfg), cfg.phantom.noise.name(), &m));
            }
            println!("{}", out.display());
        }
        Command::Selftest => {
            let checks = run_selftest();
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if checks.iter().any(|c| !c.passed) {
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

/// Exit code, kind and field of an error.
fn classify(e: &Error) -> (u8, &'static str, String) {
    match e {
        Error::Config { field, .. } => (2, "config", field.clone()),
        Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => (3, "missing-input", String::new()),
        Error::Io { .. } => (1, "io", String::new()),
        Error::InvalidParameter { field, .. } => (1, "parameter", field.clone()),
        Error::Format { .. } => (1, "format", String::new()),
        _ => (1, "runtime", String::new()),
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    // warnings from the library show with RUST_LOG=warn
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or_default().trim_start_matches("error: ");
            eprintln!("error code=2 kind=usage field= message={}", one_line(first));
            return ExitCode::from(2);
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            let (code, kind, field) = classify(&e);
            eprintln!("error code={code} kind={kind} field={field} message={}", one_line(&e.to_string()));
            ExitCode::from(code)
        }
    }
}

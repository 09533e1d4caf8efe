use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use psihilfer::cli::config::parse_pairs;
use psihilfer::cli::run::{exit_code, EXIT_CONFIG};
use psihilfer::cli::{run, Command, ExperimentConfig};
use psihilfer::Error;

#[derive(Parser)]
#[command(name = "psihilfer", version, about = "Ψ-Hilfer fractional Volterra equations: solve, check, stability experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Common {
    /// Experiment config (`key = value` lines).
    #[arg(long)]
    config: PathBuf,
    /// Output prefix; writes <prefix>.csv and <prefix>.report.txt.
    #[arg(long)]
    out: Option<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Picard solve on a uniform Ψ-grid.
    Solve(Common),
    /// Contraction factor and random-pair operator ratios.
    Check(Common),
    /// Ulam–Hyers experiment.
    Uh(Common),
    /// Ulam–Hyers–Rassias experiment.
    Uhr(Common),
    /// Discrete Gronwall-inequality check.
    Gronwall(Common),
    /// Evaluate E_μ(z).
    Ml {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<String>,
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        z: Option<f64>,
        /// Use the plain series instead of the fast path.
        #[arg(long)]
        oracle: bool,
        /// Minimum series terms for --oracle.
        #[arg(long)]
        terms: Option<usize>,
    },
}

fn stem_prefix(path: &Path) -> String {
    path.with_extension("").to_string_lossy().into_owned()
}

fn report(e: &Error) -> i32 {
    eprintln!("error: {e}");
    exit_code(e)
}

fn init_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("PSIHILFER_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("PSIHILFER_THREADS = {v:?} is not a positive integer"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn ml_config(
    config: Option<&Path>,
    mu: Option<f64>,
    z: Option<f64>,
    oracle: bool,
    terms: Option<usize>,
) -> psihilfer::Result<ExperimentConfig> {
    let mut pairs = match config {
        Some(p) => parse_pairs(&std::fs::read_to_string(p)?)?
            .into_iter()
            .map(|(k, (_, v))| (k, v))
            .collect(),
        None => std::collections::BTreeMap::new(),
    };
    if let Some(mu) = mu {
        pairs.insert("mu".into(), mu.to_string());
    }
    if let Some(z) = z {
        pairs.insert("z".into(), z.to_string());
    }
    if oracle {
        pairs.insert("oracle".into(), "true".into());
    }
    if let Some(t) = terms {
        pairs.insert("terms".into(), t.to_string());
    }
    let text: String = pairs.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
    ExperimentConfig::parse(&text, Command::Ml)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    if let Err(msg) = init_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(EXIT_CONFIG as u8);
    }

    let code = match cli.command {
        Cmd::Ml { config, out, mu, z, oracle, terms } => match ml_config(config.as_deref(), mu, z, oracle, terms) {
            Ok(cfg) => {
                let prefix = out.or_else(|| cfg.out.clone()).or_else(|| config.as_deref().map(stem_prefix));
                run(&cfg, Command::Ml, prefix.as_deref())
            }
            Err(e) => report(&e),
        },
        cmd => {
            let (command, common) = match cmd {
                Cmd::Solve(c) => (Command::Solve, c),
                Cmd::Check(c) => (Command::Check, c),
                Cmd::Uh(c) => (Command::Uh, c),
                Cmd::Uhr(c) => (Command::Uhr, c),
                Cmd::Gronwall(c) => (Command::Gronwall, c),
                Cmd::Ml { .. } => unreachable!(),
            };
            match ExperimentConfig::from_path(&common.config, command) {
                Ok(cfg) => {
                    let prefix = common.out.or_else(|| cfg.out.clone()).unwrap_or_else(|| stem_prefix(&common.config));
                    run(&cfg, command, Some(&prefix))
                }
                Err(e @ Error::Io(_)) => {
                    eprintln!("error: {e}");
                    EXIT_CONFIG
                }
                Err(e) => report(&e),
            }
        }
    };
    ExitCode::from(code as u8)
}

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lgbb84::commands::execute;
use lgbb84::config::RunConfig;
use lgbb84::manifest::{Invocation, RunManifest};
use lgbb84::{CliError, Format, EXIT_OK, EXIT_USAGE};
use lgbb84_core::attacks::CheatPolicy;

#[derive(Parser)]
#[command(
    name = "lgbb84",
    version,
    about = "LG-BB84 key distribution simulator and analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Write the primary output here (and a manifest next to it).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; outputs do not depend on this.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo simulation and print its summary.
    Simulate {
        /// JSON config; flags override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, allow_hyphen_values = true)]
        theta: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        f: Option<f64>,
        #[arg(long)]
        rounds: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_parser = parse_policy)]
        policy: Option<CheatPolicy>,
        /// Bob's weights for X,Y,M+,M- as four comma-separated numbers.
        #[arg(long, value_delimiter = ',', num_args = 4)]
        weights: Option<Vec<f64>>,
        #[arg(long)]
        disclose_fraction: Option<f64>,
        /// Read --theta in degrees.
        #[arg(long)]
        degrees: bool,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        /// Exit with status 2 unless the verdict is secure.
        #[arg(long)]
        assert_secure: bool,
        /// Write every round as one JSON object per line.
        #[arg(long)]
        transcript: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Compare Monte Carlo with closed forms over the θ × f grid.
    Verify {
        #[arg(long, default_value_t = 1_000_000)]
        rounds: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[command(flatten)]
        common: Common,
    },
    /// Secure-threshold table as CSV.
    Thresholds {
        #[arg(long = "f", default_values_t = [0.0, 0.2])]
        f: Vec<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Error rate, Λ and key rate curves as CSV.
    Fig2 {
        #[arg(long = "f", default_values_t = [0.0, 0.2])]
        f: Vec<f64>,
        #[arg(long, default_value_t = 201)]
        points: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Search for the largest monogamy sums.
    Monogamy {
        /// Coarse grid step in degrees.
        #[arg(long, default_value_t = 10.0)]
        grid_step: f64,
        /// Extra uniformly random configurations to try.
        #[arg(long, default_value_t = 2000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[command(flatten)]
        common: Common,
    },
    /// Re-run the command recorded in a manifest.
    Replay {
        manifest: PathBuf,
        /// Write the primary output here instead of the recorded path.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the transcript here instead of the recorded path.
        #[arg(long)]
        transcript: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn parse_policy(s: &str) -> Result<CheatPolicy, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| "expected one of unwired_random, measure_x_pair, measure_y_pair".to_string())
}

/// Primary output path (if any), resolved invocation, threads.
type Plan = (Option<PathBuf>, Invocation, Option<usize>);

fn plan(command: Command) -> Result<Plan, CliError> {
    Ok(match command {
        Command::Simulate {
            config,
            theta,
            f,
            rounds,
            seed,
            policy,
            weights,
            disclose_fraction,
            degrees,
            format,
            assert_secure,
            transcript,
            common,
        } => {
            let mut cfg = match &config {
                Some(path) => RunConfig::load(path)?,
                None => RunConfig::default(),
            };
            if let Some(t) = theta {
                cfg.theta = if degrees { t.to_radians() } else { t };
            }
            if let Some(v) = f {
                cfg.f = v;
            }
            if let Some(v) = rounds {
                cfg.rounds = v;
            }
            if let Some(v) = seed {
                cfg.seed = v;
            }
            if let Some(v) = policy {
                cfg.policy = v;
            }
            if let Some(w) = weights {
                cfg.bob_basis_weights = [w[0], w[1], w[2], w[3]];
            }
            if let Some(v) = disclose_fraction {
                cfg.disclose_fraction = v;
            }
            cfg.protocol()?;
            let inv = Invocation::Simulate {
                config: cfg,
                format,
                assert_secure,
                transcript,
            };
            (common.out, inv, common.threads)
        }
        Command::Verify {
            rounds,
            seed,
            format,
            common,
        } => {
            if rounds == 0 {
                return Err(CliError::Usage("--rounds must be at least 1".into()));
            }
            (
                common.out,
                Invocation::Verify {
                    rounds,
                    seed,
                    format,
                },
                common.threads,
            )
        }
        Command::Thresholds { f, common } => {
            if let Some(bad) = f.iter().find(|v| !(0.0..1.0).contains(*v)) {
                return Err(CliError::Usage(format!("--f {bad} outside [0, 1)")));
            }
            (common.out, Invocation::Thresholds { f }, common.threads)
        }
        Command::Fig2 { f, points, common } => {
            if points < 2 {
                return Err(CliError::Usage("--points must be at least 2".into()));
            }
            if let Some(bad) = f.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(CliError::Usage(format!("--f {bad} outside [0, 1]")));
            }
            (common.out, Invocation::Fig2 { f, points }, common.threads)
        }
        Command::Monogamy {
            grid_step,
            samples,
            seed,
            format,
            common,
        } => {
            let inv = Invocation::Monogamy {
                grid_step_deg: grid_step,
                samples,
                seed,
                format,
            };
            (common.out, inv, common.threads)
        }
        Command::Replay {
            manifest,
            out,
            transcript,
            threads,
        } => {
            let m = RunManifest::load(&manifest)?;
            let mut inv = m.invocation;
            if let (Invocation::Simulate { transcript: t, .. }, Some(p)) = (&mut inv, transcript) {
                *t = Some(p);
            }
            (out.or_else(|| m.outputs.first().cloned()), inv, threads)
        }
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn run(cli: Cli) -> Result<u8, CliError> {
    let is_replay = matches!(cli.command, Command::Replay { .. });
    let (out, inv, threads) = plan(cli.command)?;
    let result = execute(&inv, threads)?;
    match &out {
        Some(path) => {
            write_file(path, &result.bytes)?;
            if !is_replay {
                let mut outputs = vec![path.clone()];
                if let Invocation::Simulate {
                    transcript: Some(t),
                    ..
                } = &inv
                {
                    outputs.push(t.clone());
                }
                RunManifest::new(inv.clone(), outputs).write(&RunManifest::path_for(path))?;
            }
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(&result.bytes)
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::Io {
                    path: "stdout".into(),
                    source: e,
                })?;
        }
    }
    Ok(result.exit_code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("lgbb84: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

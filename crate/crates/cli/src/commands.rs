//! Subcommand bodies. Each renders its primary output to bytes and reports
//! the exit code it wants; writing files is left to the caller, except for
//! the optional simulation transcript.

use std::fs::File;
use std::io::BufWriter;

use lgbb84_core::analysis::{fig2_data, security_threshold};
use lgbb84_core::protocol::{SimulationSummary, Verdict};
use lgbb84_core::qmath::DensityMatrix;
use lgbb84_core::temporal::{
    random_monogamy_maxima, MonogamyConfig, MonogamySearch, ANCHORED_MONOGAMY,
    NO_SIGNALING_MONOGAMY, SEQUENTIAL_MONOGAMY,
};
use serde::Serialize;

use crate::config::RunConfig;
use crate::manifest::Invocation;
use crate::runner::{run_parallel, write_transcript};
use crate::verify::verify_grid;
use crate::{to_json_bytes, CliError, Format, EXIT_CHECK_FAILED, EXIT_INSECURE, EXIT_OK};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandOutput {
    pub bytes: Vec<u8>,
    pub exit_code: u8,
}

impl CommandOutput {
    fn ok(bytes: Vec<u8>) -> Self {
        Self {
            bytes,
            exit_code: EXIT_OK,
        }
    }
}

pub fn execute(inv: &Invocation, threads: Option<usize>) -> Result<CommandOutput, CliError> {
    match inv {
        Invocation::Simulate {
            config,
            format,
            assert_secure,
            transcript,
        } => {
            if let Some(path) = transcript {
                let cfg = config.protocol()?;
                let file =
                    File::create(path).map_err(|e| CliError::io(path.display().to_string(), e))?;
                write_transcript(&cfg, &mut BufWriter::new(file))?;
            }
            simulate(config, *format, *assert_secure, threads)
        }
        Invocation::Verify {
            rounds,
            seed,
            format,
        } => verify(*rounds, *seed, *format, threads),
        Invocation::Thresholds { f } => thresholds(f).map(CommandOutput::ok),
        Invocation::Fig2 { f, points } => fig2(f, *points).map(CommandOutput::ok),
        Invocation::Monogamy {
            grid_step_deg,
            samples,
            seed,
            format,
        } => monogamy(*grid_step_deg, *samples, *seed, *format).map(CommandOutput::ok),
    }
}

#[derive(Serialize)]
struct SimulateJson<'a> {
    schema_version: u32,
    command: &'static str,
    config: &'a RunConfig,
    summary: &'a SimulationSummary,
}

pub fn simulate(
    config: &RunConfig,
    format: Format,
    assert_secure: bool,
    threads: Option<usize>,
) -> Result<CommandOutput, CliError> {
    let summary = run_parallel(&config.protocol()?, threads)?;
    let bytes = match format {
        Format::Json => to_json_bytes(&SimulateJson {
            schema_version: crate::SCHEMA_VERSION,
            command: "simulate",
            config,
            summary: &summary,
        })?,
        Format::Csv => summary_csv(config, &summary)?,
    };
    let exit_code = if assert_secure && summary.verdict != Verdict::Secure {
        EXIT_INSECURE
    } else {
        EXIT_OK
    };
    Ok(CommandOutput { bytes, exit_code })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn summary_csv(config: &RunConfig, s: &SimulationSummary) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "theta",
        "f",
        "rounds",
        "seed",
        "n_key",
        "n_lgi",
        "n_discard",
        "n_cheat",
        "e_obs",
        "e_obs_se",
        "lambda_obs",
        "lambda_obs_se",
        "eve_agreement",
        "eve_agreement_se",
        "theta_hat",
        "f_hat",
        "key_rate",
        "verdict",
    ])?;
    let verdict = match s.verdict {
        Verdict::Secure => "secure",
        Verdict::Insecure => "insecure",
        Verdict::Inconsistent => "inconsistent",
        Verdict::Untested => "untested",
    };
    w.write_record([
        config.theta.to_string(),
        config.f.to_string(),
        s.rounds.to_string(),
        config.seed.to_string(),
        s.n_key.to_string(),
        s.n_lgi.to_string(),
        s.n_discard.to_string(),
        s.n_cheat.to_string(),
        opt(s.e_obs.map(|e| e.value)),
        opt(s.e_obs.map(|e| e.std_error)),
        opt(s.lambda_obs.map(|l| l.value)),
        opt(s.lambda_obs.map(|l| l.std_error)),
        opt(s.eve_agreement.map(|e| e.value)),
        opt(s.eve_agreement.map(|e| e.std_error)),
        opt(s.estimate.map(|e| e.theta)),
        opt(s.estimate.map(|e| e.f)),
        opt(s.key_rate()),
        verdict.to_string(),
    ])?;
    finish_csv(w)
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>, CliError> {
    w.into_inner()
        .map_err(|e| CliError::io("csv buffer", e.into_error()))
}

pub fn verify(
    rounds: u64,
    seed: u64,
    format: Format,
    threads: Option<usize>,
) -> Result<CommandOutput, CliError> {
    let report = verify_grid(rounds, seed, threads)?;
    let bytes = match format {
        Format::Json => to_json_bytes(&report)?,
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record([
                "theta",
                "f",
                "quantity",
                "analytic",
                "empirical",
                "std_error",
                "z",
                "status",
            ])?;
            for r in &report.rows {
                let quantity = match r.quantity {
                    crate::verify::Quantity::EObs => "e_obs",
                    crate::verify::Quantity::Lambda => "lambda",
                };
                w.write_record([
                    r.theta.to_string(),
                    r.f.to_string(),
                    quantity.to_string(),
                    r.analytic.to_string(),
                    opt(r.empirical),
                    opt(r.std_error),
                    opt(r.z),
                    r.status.as_str().to_string(),
                ])?;
            }
            finish_csv(w)?
        }
    };
    Ok(CommandOutput {
        bytes,
        exit_code: if report.passed {
            EXIT_OK
        } else {
            EXIT_CHECK_FAILED
        },
    })
}

pub fn thresholds(f_values: &[f64]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["f", "theta", "e_ab", "e_prime_ab", "lambda_ab"])?;
    for &f in f_values {
        let t = security_threshold(f)?;
        w.write_record([
            f.to_string(),
            t.theta.to_string(),
            t.e_ab.to_string(),
            t.e_prime_ab.to_string(),
            t.lambda_ab.to_string(),
        ])?;
    }
    finish_csv(w)
}

pub fn fig2(f_values: &[f64], points: usize) -> Result<Vec<u8>, CliError> {
    let rows = fig2_data(f_values, points)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["f", "theta", "e", "e_ab", "lambda", "K"])?;
    for r in rows {
        w.write_record([
            r.f.to_string(),
            r.theta.to_string(),
            r.e.to_string(),
            r.e_ab.to_string(),
            r.lambda.to_string(),
            r.k.to_string(),
        ])?;
    }
    finish_csv(w)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub best: f64,
    pub target: f64,
    pub config: MonogamyConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonogamyReport {
    pub schema_version: u32,
    pub command: &'static str,
    pub sequential: BoundReport,
    pub anchored: BoundReport,
    pub no_signaling_bound: f64,
    pub sequential_exceeds_no_signaling: bool,
    pub random_samples: usize,
    pub random_sequential_best: f64,
    pub random_anchored_best: f64,
}

/// Saturation search on a maximally mixed qubit (the correlators involved
/// do not depend on the state).
pub fn monogamy_report(
    grid_step_deg: f64,
    samples: usize,
    seed: u64,
) -> Result<MonogamyReport, CliError> {
    if !(grid_step_deg > 0.0 && grid_step_deg <= 90.0) {
        return Err(CliError::Usage(format!(
            "grid step {grid_step_deg} must lie in (0, 90] degrees"
        )));
    }
    let rho = DensityMatrix::maximally_mixed(2).expect("qubit");
    let search = MonogamySearch {
        grid_step_deg,
        ..MonogamySearch::default()
    };
    let seq = search.max_sequential(&rho);
    let anc = search.max_anchored(&rho);
    let (rseq, ranc) = random_monogamy_maxima(&rho, samples, seed);
    Ok(MonogamyReport {
        schema_version: crate::SCHEMA_VERSION,
        command: "monogamy",
        sequential: BoundReport {
            best: seq.value,
            target: SEQUENTIAL_MONOGAMY,
            config: seq.config,
        },
        anchored: BoundReport {
            best: anc.value,
            target: ANCHORED_MONOGAMY,
            config: anc.config,
        },
        no_signaling_bound: NO_SIGNALING_MONOGAMY,
        sequential_exceeds_no_signaling: seq.value > NO_SIGNALING_MONOGAMY,
        random_samples: samples,
        random_sequential_best: rseq.value,
        random_anchored_best: ranc.value,
    })
}

pub fn monogamy(
    grid_step_deg: f64,
    samples: usize,
    seed: u64,
    format: Format,
) -> Result<Vec<u8>, CliError> {
    let r = monogamy_report(grid_step_deg, samples, seed)?;
    match format {
        Format::Json => to_json_bytes(&r),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["quantity", "value", "target"])?;
            let rows = [
                ("sequential_max", r.sequential.best, r.sequential.target),
                ("anchored_max", r.anchored.best, r.anchored.target),
                (
                    "random_sequential_max",
                    r.random_sequential_best,
                    r.sequential.target,
                ),
                (
                    "random_anchored_max",
                    r.random_anchored_best,
                    r.anchored.target,
                ),
                (
                    "no_signaling_bound",
                    r.no_signaling_bound,
                    r.no_signaling_bound,
                ),
            ];
            for (name, v, t) in rows {
                w.write_record([name.to_string(), v.to_string(), t.to_string()])?;
            }
            finish_csv(w)
        }
    }
}

//! Monte Carlo against closed forms over the standard `θ × f` grid.

use core::f64::consts::PI;

use lgbb84_core::analysis::closed_form_rates;
use lgbb84_core::attacks::{AttackConfig, CheatPolicy};
use lgbb84_core::protocol::{ProtocolConfig, SimulationSummary};
use serde::Serialize;

use crate::runner::run_parallel;
use crate::CliError;

pub const GRID_THETA: [f64; 4] = [0.0, PI / 8.0, PI / 4.0, 3.0 * PI / 8.0];
pub const GRID_F: [f64; 4] = [0.0, 0.2, 0.5, 1.0];

/// `|z|` above this fails the report.
pub const Z_FAIL: f64 = 4.0;
/// Fewer samples than this behind an estimate marks it as insufficient.
pub const MIN_SAMPLES: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    EObs,
    Lambda,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Status {
    #[serde(rename = "ok")]
    Ok,
    #[serde(rename = "fail")]
    Fail,
    #[serde(rename = "insufficient statistics")]
    Insufficient,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::Fail => "fail",
            Status::Insufficient => "insufficient statistics",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifyRow {
    pub theta: f64,
    pub f: f64,
    pub quantity: Quantity,
    pub analytic: f64,
    pub empirical: Option<f64>,
    pub std_error: Option<f64>,
    /// `None` when undefined (no data, or zero spread with a mismatch).
    pub z: Option<f64>,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub schema_version: u32,
    pub command: &'static str,
    pub rounds: u64,
    pub seed: u64,
    pub rows: Vec<VerifyRow>,
    pub passed: bool,
}

impl VerifyReport {
    /// Pairs of rows `(e_obs, lambda)` per grid cell.
    pub fn cells(&self) -> impl Iterator<Item = (&VerifyRow, &VerifyRow)> {
        self.rows.chunks(2).map(|c| (&c[0], &c[1]))
    }
}

/// `z` from an estimate and its spread. Zero spread counts as agreement
/// only when the values coincide.
fn z_score(empirical: f64, analytic: f64, sigma: f64) -> Option<f64> {
    let diff = empirical - analytic;
    if sigma > 0.0 {
        Some(diff / sigma)
    } else if diff.abs() < 1e-12 {
        Some(0.0)
    } else {
        None
    }
}

fn status(z: Option<f64>) -> Status {
    match z {
        Some(z) if z.abs() <= Z_FAIL => Status::Ok,
        _ => Status::Fail,
    }
}

/// Compares one simulated cell with the closed forms. The error rate uses
/// the binomial spread at the analytic value; `Λ̂` its own standard error.
pub fn compare(theta: f64, f: f64, s: &SimulationSummary) -> Result<[VerifyRow; 2], CliError> {
    let r = closed_form_rates(theta, f)?;
    let row = |quantity, analytic| VerifyRow {
        theta,
        f,
        quantity,
        analytic,
        empirical: None,
        std_error: None,
        z: None,
        status: Status::Insufficient,
    };

    let mut e_row = row(Quantity::EObs, r.e_prime_ab);
    if let (Some(e), true) = (s.e_obs, s.n_disclosed >= MIN_SAMPLES) {
        let p = r.e_prime_ab;
        let sigma = (p * (1.0 - p) / s.n_disclosed as f64).sqrt();
        e_row.empirical = Some(e.value);
        e_row.std_error = Some(sigma);
        e_row.z = z_score(e.value, p, sigma);
        e_row.status = status(e_row.z);
    }

    let mut l_row = row(Quantity::Lambda, r.lambda_ab);
    let enough = (0..4).all(|p| s.lgi_table.pair_total(p) >= MIN_SAMPLES as f64);
    if let (Some(l), true) = (s.lambda_obs, enough) {
        l_row.empirical = Some(l.value);
        l_row.std_error = Some(l.std_error);
        l_row.z = z_score(l.value, r.lambda_ab, l.std_error);
        l_row.status = status(l_row.z);
    }
    Ok([e_row, l_row])
}

pub fn verify_grid(
    rounds: u64,
    seed: u64,
    threads: Option<usize>,
) -> Result<VerifyReport, CliError> {
    let mut rows = Vec::with_capacity(32);
    for &theta in &GRID_THETA {
        for &f in &GRID_F {
            let cfg = ProtocolConfig {
                rounds,
                attack: AttackConfig::new(theta, f, CheatPolicy::UnwiredRandom)
                    .expect("grid is in range"),
                seed,
                ..ProtocolConfig::default()
            };
            let s = run_parallel(&cfg, threads)?;
            rows.extend(compare(theta, f, &s)?);
        }
    }
    let passed = rows.iter().all(|r| r.status != Status::Fail);
    Ok(VerifyReport {
        schema_version: crate::SCHEMA_VERSION,
        command: "verify",
        rounds,
        seed,
        rows,
        passed,
    })
}

//! Chunked parallel execution of a simulation.
//!
//! Round `i` always uses stream `i` of the seeded generator and tallies
//! are integer sums, so the summary does not depend on the chunk size or
//! on the number of worker threads.

use std::io::Write;

use lgbb84_core::protocol::{ProtocolConfig, SimulationSummary, Simulator, Tally};
use rayon::prelude::*;

use crate::CliError;

/// Rounds per work item.
pub const CHUNK: u64 = 1 << 15;

/// Runs all rounds of `cfg` on `threads` workers (`None`: rayon default).
pub fn run_parallel(
    cfg: &ProtocolConfig,
    threads: Option<usize>,
) -> Result<SimulationSummary, CliError> {
    let sim = Simulator::new(*cfg)?;
    let tally = run_tally(&sim, threads)?;
    Ok(sim.summarize(&tally))
}

pub fn run_tally(sim: &Simulator, threads: Option<usize>) -> Result<Tally, CliError> {
    let rounds = sim.config().rounds;
    let chunks = rounds.div_ceil(CHUNK);
    let work = || {
        (0..chunks)
            .into_par_iter()
            .map(|c| sim.run_range(c * CHUNK, ((c + 1) * CHUNK).min(rounds)))
            .reduce(Tally::default, |mut a, b| {
                a.merge(&b);
                a
            })
    };
    match threads {
        None => Ok(work()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Usage(format!("cannot start {n} threads: {e}")))?;
            Ok(pool.install(work))
        }
    }
}

/// Writes one JSON object per round, in index order.
pub fn write_transcript<W: Write>(cfg: &ProtocolConfig, out: &mut W) -> Result<(), CliError> {
    let sim = Simulator::new(*cfg)?;
    for i in 0..cfg.rounds {
        serde_json::to_writer(&mut *out, &sim.round(i))?;
        out.write_all(b"\n")
            .map_err(|e| CliError::io("transcript", e))?;
    }
    Ok(())
}

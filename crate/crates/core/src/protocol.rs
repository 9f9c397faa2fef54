//! Round-by-round Monte Carlo of LG-BB84, the plain BB84 baseline and the
//! pure Leggett-Garg key protocol.
//!
//! Every round draws from its own ChaCha8 stream keyed by `(seed, index)`
//! and rounds are folded into an integer [`Tally`], so any partition of the
//! round range merged in any order gives the same summary.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::analysis::{closed_form_rates, estimate_attack_noisy, AttackEstimate, RatePoint};
use crate::attacks::{
    build_cheat_state, channel_unitary, eve_optimal_probe_basis, sample_joint, AttackConfig,
    AttackError, CheatPolicy,
};
use crate::basis::{Basis, BasisPair};
use crate::math::{abs, sqrt};
use crate::qmath::{
    projector_of, sequence_probability, BlochVector, DensityMatrix, Outcome, QmathError,
};
use crate::temporal::{
    lgi_from_counts, pair_index, CorrelationTable, LgiEstimate, SettingsQuad, TemporalError,
};

/// Bob's settings in LG-BB84, in the order of `bob_basis_weights`.
pub const BOB_BASES: [Basis; 4] = [Basis::X, Basis::Y, Basis::MPlus, Basis::MMinus];

/// Width of the consistency window used to turn `(e, Λ)` into a verdict.
pub const VERDICT_Z: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("rounds must be at least 1")]
    NoRounds,
    #[error("basis weights must be non-negative and sum to 1, got sum {0}")]
    BadWeights(f64),
    #[error("disclose fraction {0} outside (0, 1]")]
    BadDiscloseFraction(f64),
    #[error(transparent)]
    Attack(#[from] AttackError),
    #[error(transparent)]
    Temporal(#[from] TemporalError),
    #[error(transparent)]
    Qmath(#[from] QmathError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProtocolConfig {
    pub rounds: u64,
    pub attack: AttackConfig,
    /// Probabilities of Bob choosing `X`, `Y`, `M+`, `M−`.
    pub bob_basis_weights: [f64; 4],
    pub seed: u64,
    /// Fraction of key rounds publicly compared to estimate the error rate.
    pub disclose_fraction: f64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            rounds: 100_000,
            attack: AttackConfig::default(),
            bob_basis_weights: [0.25; 4],
            seed: 0,
            disclose_fraction: 1.0,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        if self.rounds == 0 {
            return Err(ProtocolError::NoRounds);
        }
        check_weights(&self.bob_basis_weights)?;
        if !(self.disclose_fraction > 0.0 && self.disclose_fraction <= 1.0) {
            return Err(ProtocolError::BadDiscloseFraction(self.disclose_fraction));
        }
        self.attack.validate()?;
        Ok(())
    }
}

fn check_weights(w: &[f64]) -> Result<(), ProtocolError> {
    let sum: f64 = w.iter().sum();
    if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || abs(sum - 1.0) > 1e-9 {
        return Err(ProtocolError::BadWeights(sum));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "SCREAMING_SNAKE_CASE"))]
pub enum RoundKind {
    Key,
    LgiTest,
    Discard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "SCREAMING_SNAKE_CASE"))]
pub enum AttackBranch {
    Legit,
    Cheat,
}

/// Matched bases give key, `M±` against a preparation basis gives a test
/// round, anything else is thrown away.
pub fn classify(alice: Basis, bob: Basis) -> RoundKind {
    if alice == bob {
        RoundKind::Key
    } else if bob.is_lgi_test() {
        RoundKind::LgiTest
    } else {
        RoundKind::Discard
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RoundRecord {
    pub index: u64,
    pub alice_basis: Basis,
    pub alice_bit: u8,
    pub bob_basis: Basis,
    pub bob_outcome: Outcome,
    pub round_kind: RoundKind,
    pub attack_branch: AttackBranch,
    pub eve_bit_known: bool,
    pub eve_guess: u8,
    /// Key round whose bit was publicly compared.
    pub disclosed: bool,
}

impl RoundRecord {
    pub fn bob_bit(&self) -> u8 {
        self.bob_outcome.bit()
    }

    pub fn alice_outcome(&self) -> Outcome {
        Outcome::from_bit(self.alice_bit)
    }
}

/// Stream `index` of the ChaCha8 generator seeded with `seed`.
pub fn round_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Which settings each party draws from.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Layout {
    alice: [Basis; 2],
    bob: [Basis; 4],
    bob_weights: [f64; 4],
}

/// `cells[α][β]` of a 2×2 joint distribution.
type Joint = [[f64; 2]; 2];

/// Precomputed outcome distributions for one configuration, so that each
/// round needs only a handful of uniform draws.
#[derive(Debug, Clone)]
pub struct Simulator {
    cfg: ProtocolConfig,
    layout: Layout,
    base_rng: ChaCha8Rng,
    /// `legit[alice basis][bit][bob setting]`: joint law of Bob's outcome
    /// and Eve's probe outcome in Alice's basis.
    legit: [[[Joint; 4]; 2]; 2],
    /// `cheat[alice basis][bob setting]`: joint law of the device outputs.
    cheat: [[Joint; 4]; 2],
}

impl Simulator {
    pub fn new(cfg: ProtocolConfig) -> Result<Self, ProtocolError> {
        cfg.validate()?;
        let layout = Layout {
            alice: BasisPair::XY.bases(),
            bob: BOB_BASES,
            bob_weights: cfg.bob_basis_weights,
        };
        Self::with_layout(cfg, layout, BasisPair::XY)
    }

    fn with_layout(
        cfg: ProtocolConfig,
        layout: Layout,
        pair: BasisPair,
    ) -> Result<Self, ProtocolError> {
        let attack = channel_unitary(cfg.attack.theta)?;
        let cheat_state = build_cheat_state(pair).with_policy(cfg.attack.cheat_policy);
        let mut legit = [[[[[0.0; 2]; 2]; 4]; 2]; 2];
        let mut cheat = [[[[0.0; 2]; 2]; 4]; 2];
        for (ia, &a) in layout.alice.iter().enumerate() {
            let eve_dir = eve_optimal_probe_basis(a)?;
            for bit in 0..2u8 {
                let input = DensityMatrix::eigenstate(&a.bloch(), Outcome::from_bit(bit));
                let joint = attack.joint_state(&input)?;
                for (ib, &b) in layout.bob.iter().enumerate() {
                    let cell = &mut legit[ia][bit as usize][ib];
                    for beta in Outcome::BOTH {
                        let pb = projector_of(&b.bloch(), beta).embed(0, 2)?;
                        for eps in Outcome::BOTH {
                            let pe = projector_of(&eve_dir, eps).embed(1, 2)?;
                            cell[beta.index()][eps.index()] =
                                sequence_probability(joint.matrix(), &[&pb, &pe]).max(0.0);
                        }
                    }
                }
            }
            for (ib, &b) in layout.bob.iter().enumerate() {
                if layout.bob_weights[ib] > 0.0 {
                    cheat[ia][ib] = cheat_state.joint_distribution(a, b)?;
                }
            }
        }
        Ok(Self {
            cfg,
            layout,
            base_rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            legit,
            cheat,
        })
    }

    pub fn config(&self) -> &ProtocolConfig {
        &self.cfg
    }

    fn rng(&self, index: u64) -> ChaCha8Rng {
        let mut rng = self.base_rng.clone();
        rng.set_stream(index);
        rng.set_word_pos(0);
        rng
    }

    /// Plays round `index`.
    pub fn round(&self, index: u64) -> RoundRecord {
        let mut rng = self.rng(index);
        self.round_with(index, &mut rng)
    }

    fn round_with<R: Rng + ?Sized>(&self, index: u64, rng: &mut R) -> RoundRecord {
        // fixed draw order keeps every round on the same stream layout
        let u_branch: f64 = rng.gen();
        let u_alice: f64 = rng.gen();
        let u_bit: f64 = rng.gen();
        let u_bob: f64 = rng.gen();
        let u_joint: f64 = rng.gen();
        let u_disclose: f64 = rng.gen();

        let ia = usize::from(u_alice >= 0.5);
        let ib = pick(&self.layout.bob_weights, u_bob);
        let alice_basis = self.layout.alice[ia];
        let bob_basis = self.layout.bob[ib];
        let cheat = u_branch < self.cfg.attack.f;

        let (alice_bit, bob_outcome, eve_guess, branch) = if cheat {
            let (a, b) = sample_joint(&self.cheat[ia][ib], u_joint);
            (a.bit(), b, a.bit(), AttackBranch::Cheat)
        } else {
            let bit = u8::from(u_bit >= 0.5);
            let (b, e) = sample_joint(&self.legit[ia][bit as usize][ib], u_joint);
            (bit, b, e.bit(), AttackBranch::Legit)
        };
        let round_kind = classify(alice_basis, bob_basis);
        RoundRecord {
            index,
            alice_basis,
            alice_bit,
            bob_basis,
            bob_outcome,
            round_kind,
            attack_branch: branch,
            eve_bit_known: cheat,
            eve_guess,
            disclosed: round_kind == RoundKind::Key && u_disclose < self.cfg.disclose_fraction,
        }
    }

    /// Tally of rounds `start..end`.
    pub fn run_range(&self, start: u64, end: u64) -> Tally {
        let mut t = Tally::default();
        for i in start..end {
            t.record(&self.round(i), &self.layout.alice);
        }
        t
    }

    /// Aggregated statistics plus the inferred attack and verdict.
    pub fn summarize(&self, tally: &Tally) -> SimulationSummary {
        summarize(tally)
    }
}

/// Index into `weights` selected by `u ∈ [0,1)`, skipping zero weights.
fn pick(weights: &[f64; 4], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// Integer counts behind a [`SimulationSummary`]. Merging is plain
/// addition, so it is associative and commutative.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Tally {
    pub rounds: u64,
    pub n_key: u64,
    pub n_lgi: u64,
    pub n_discard: u64,
    pub n_cheat: u64,
    pub key_errors: u64,
    pub n_disclosed: u64,
    pub disclosed_errors: u64,
    pub eve_correct: u64,
    pub discard_agree: u64,
    /// `[pair][α][β]` in the layout of [`CorrelationTable`].
    pub lgi_counts: [[[u64; 2]; 2]; 4],
}

impl Tally {
    /// Adds one round; `alice_bases` fixes the table row of each basis.
    pub fn record(&mut self, r: &RoundRecord, alice_bases: &[Basis; 2]) {
        self.rounds += 1;
        if r.attack_branch == AttackBranch::Cheat {
            self.n_cheat += 1;
        }
        let agree = r.alice_bit == r.bob_bit();
        match r.round_kind {
            RoundKind::Key => {
                self.n_key += 1;
                self.key_errors += u64::from(!agree);
                if r.disclosed {
                    self.n_disclosed += 1;
                    self.disclosed_errors += u64::from(!agree);
                }
                self.eve_correct += u64::from(r.eve_guess == r.alice_bit);
            }
            RoundKind::LgiTest => {
                self.n_lgi += 1;
                let i = if r.alice_basis == alice_bases[0] {
                    0
                } else {
                    1
                };
                let j = if r.bob_basis == Basis::MPlus { 0 } else { 1 };
                self.lgi_counts[pair_index(i, j)][r.alice_outcome().index()]
                    [r.bob_outcome.index()] += 1;
            }
            RoundKind::Discard => {
                self.n_discard += 1;
                self.discard_agree += u64::from(agree);
            }
        }
    }

    pub fn merge(&mut self, o: &Tally) {
        self.rounds += o.rounds;
        self.n_key += o.n_key;
        self.n_lgi += o.n_lgi;
        self.n_discard += o.n_discard;
        self.n_cheat += o.n_cheat;
        self.key_errors += o.key_errors;
        self.n_disclosed += o.n_disclosed;
        self.disclosed_errors += o.disclosed_errors;
        self.eve_correct += o.eve_correct;
        self.discard_agree += o.discard_agree;
        for p in 0..4 {
            for a in 0..2 {
                for b in 0..2 {
                    self.lgi_counts[p][a][b] += o.lgi_counts[p][a][b];
                }
            }
        }
    }

    pub fn lgi_table(&self) -> CorrelationTable {
        CorrelationTable::from_counts(self.lgi_counts)
    }
}

/// A sample proportion or mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

impl Estimate {
    /// Binomial proportion `k/n`; `None` when `n = 0`.
    pub fn proportion(k: u64, n: u64) -> Option<Self> {
        if n == 0 {
            return None;
        }
        let p = k as f64 / n as f64;
        Some(Self {
            value: p,
            std_error: sqrt(p * (1.0 - p) / n as f64),
        })
    }

    /// `(value − expected) / σ`, with `σ` floored at `floor`.
    pub fn z_score(&self, expected: f64, floor: f64) -> f64 {
        (self.value - expected) / self.std_error.max(floor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Verdict {
    /// Inferred attack leaves a positive key rate even with `f̂` raised by
    /// `VERDICT_Z` standard errors.
    Secure,
    Insecure,
    /// `(e, Λ)` cannot come from the attack model.
    Inconsistent,
    /// No LGI test rounds to infer the attack from.
    Untested,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimulationSummary {
    pub rounds: u64,
    pub n_key: u64,
    pub n_lgi: u64,
    pub n_discard: u64,
    pub n_cheat: u64,
    /// Key rounds publicly compared.
    pub n_disclosed: u64,
    /// Error rate over the disclosed key rounds.
    pub e_obs: Option<Estimate>,
    pub lambda_obs: Option<LgiEstimate>,
    /// Fraction of key rounds where Eve's guess equals Alice's bit.
    pub eve_agreement: Option<Estimate>,
    /// `P(a = b)` over all key rounds.
    pub matched_agreement: Option<Estimate>,
    /// `P(a = b)` over discarded mismatched rounds.
    pub mismatched_agreement: Option<Estimate>,
    pub lgi_table: CorrelationTable,
    pub estimate: Option<AttackEstimate>,
    /// Closed-form rates at the inferred attack.
    pub rates: Option<RatePoint>,
    /// `K` with `f̂` raised by `VERDICT_Z` standard errors; its sign is
    /// the verdict.
    pub key_rate_pessimistic: Option<f64>,
    pub verdict: Verdict,
}

impl SimulationSummary {
    pub fn key_rate(&self) -> Option<f64> {
        self.rates.map(|r| r.k)
    }
}

pub fn summarize(t: &Tally) -> SimulationSummary {
    let e_obs = Estimate::proportion(t.disclosed_errors, t.n_disclosed);
    let lambda_obs = lgi_from_counts(&t.lgi_table()).ok();
    let (estimate, rates, key_rate_pessimistic, verdict) = match (e_obs, lambda_obs) {
        (Some(e), Some(l)) => {
            match estimate_attack_noisy(e.value, e.std_error, l.value, l.std_error, VERDICT_Z) {
                Ok(est) => {
                    let rates = closed_form_rates(est.theta, est.f.clamp(0.0, 1.0)).ok();
                    let g_std =
                        sqrt(4.0 * e.std_error * e.std_error + l.std_error * l.std_error / 8.0);
                    let f_hi = (est.f + VERDICT_Z * g_std).min(1.0);
                    let k_hi = closed_form_rates(est.theta, f_hi).ok().map(|r| r.k);
                    let verdict = match k_hi {
                        Some(k) if k > 0.0 => Verdict::Secure,
                        _ => Verdict::Insecure,
                    };
                    (Some(est), rates, k_hi, verdict)
                }
                Err(_) => (None, None, None, Verdict::Inconsistent),
            }
        }
        _ => (None, None, None, Verdict::Untested),
    };
    SimulationSummary {
        rounds: t.rounds,
        n_key: t.n_key,
        n_lgi: t.n_lgi,
        n_discard: t.n_discard,
        n_cheat: t.n_cheat,
        n_disclosed: t.n_disclosed,
        e_obs,
        lambda_obs,
        eve_agreement: Estimate::proportion(t.eve_correct, t.n_key),
        matched_agreement: Estimate::proportion(t.n_key - t.key_errors, t.n_key),
        mismatched_agreement: Estimate::proportion(t.discard_agree, t.n_discard),
        lgi_table: t.lgi_table(),
        estimate,
        rates,
        key_rate_pessimistic,
        verdict,
    }
}

/// Plays one LG-BB84 round with a fresh simulator. Prefer [`Simulator`]
/// when running many rounds.
pub fn run_round<R: Rng + ?Sized>(
    cfg: &ProtocolConfig,
    index: u64,
    rng: &mut R,
) -> Result<RoundRecord, ProtocolError> {
    Ok(Simulator::new(*cfg)?.round_with(index, rng))
}

/// Sequential run over all rounds.
pub fn run_simulation(cfg: &ProtocolConfig) -> Result<SimulationSummary, ProtocolError> {
    let sim = Simulator::new(*cfg)?;
    Ok(sim.summarize(&sim.run_range(0, cfg.rounds)))
}

/// Every round record, in index order.
pub fn transcript(cfg: &ProtocolConfig) -> Result<Vec<RoundRecord>, ProtocolError> {
    let sim = Simulator::new(*cfg)?;
    Ok((0..cfg.rounds).map(|i| sim.round(i)).collect())
}

/// Output of [`sift`].
#[derive(Debug, Clone, PartialEq)]
pub struct Sifted {
    /// `(alice_bit, bob_bit)` of each key round.
    pub raw_key: Vec<(u8, u8)>,
    pub lgi_table: CorrelationTable,
    pub discards: u64,
}

/// Splits LG-BB84 records into key pairs, test statistics and discards.
pub fn sift(records: &[RoundRecord]) -> Sifted {
    let alice = BasisPair::XY.bases();
    let mut raw_key = Vec::new();
    let mut tally = Tally::default();
    for r in records {
        debug_assert_eq!(r.round_kind, classify(r.alice_basis, r.bob_basis));
        if r.round_kind == RoundKind::Key {
            raw_key.push((r.alice_bit, r.bob_bit()));
        }
        tally.record(r, &alice);
    }
    Sifted {
        raw_key,
        lgi_table: tally.lgi_table(),
        discards: tally.n_discard,
    }
}

/// `Λ̂` and its standard error from a test table, `(Y, M−)` entering with
/// a minus sign.
pub fn estimate_lambda(table: &CorrelationTable) -> Result<(f64, f64), TemporalError> {
    let est = lgi_from_counts(table)?;
    Ok((est.value, est.std_error))
}

/// Exact `P(α, β | x, y)` of the LG-BB84 test rounds under `(θ, f)`.
pub fn exact_protocol_table(
    theta: f64,
    f: f64,
    policy: CheatPolicy,
) -> Result<CorrelationTable, ProtocolError> {
    let attack = AttackConfig::new(theta, f, policy)?;
    let sim = Simulator::new(ProtocolConfig {
        attack,
        ..ProtocolConfig::default()
    })?;
    let mut cells = [[[0.0; 2]; 2]; 4];
    for i in 0..2 {
        for j in 0..2 {
            let ib = 2 + j;
            let block = &mut cells[pair_index(i, j)];
            for bit in 0..2 {
                for beta in 0..2 {
                    let legit: f64 = sim.legit[i][bit][ib][beta].iter().sum();
                    block[bit][beta] += (1.0 - f) * 0.5 * legit;
                }
            }
            for a in 0..2 {
                for b in 0..2 {
                    block[a][b] += f * sim.cheat[i][ib][a][b];
                }
            }
        }
    }
    Ok(CorrelationTable::from_probabilities(cells)?)
}

/// Plain BB84 in the bases of `pair`: Bob picks uniformly between the same
/// two bases and never runs a test.
pub fn bb84_baseline(
    cfg: &ProtocolConfig,
    pair: BasisPair,
) -> Result<SimulationSummary, ProtocolError> {
    let mut cfg = *cfg;
    cfg.bob_basis_weights = [0.5, 0.5, 0.0, 0.0];
    cfg.validate()?;
    let [b0, b1] = pair.bases();
    let layout = Layout {
        alice: [b0, b1],
        bob: [b0, b1, Basis::MPlus, Basis::MMinus],
        bob_weights: cfg.bob_basis_weights,
    };
    let sim = Simulator::with_layout(cfg, layout, pair)?;
    let mut t = Tally::default();
    for i in 0..cfg.rounds {
        t.record(&sim.round(i), &layout.alice);
    }
    Ok(summarize(&t))
}

/// Configuration of the pure Leggett-Garg key protocol: Alice measures
/// the system at `t₁`, Bob at `t₂`, optionally with Eve in between.
#[derive(Debug, Clone, PartialEq)]
pub struct LgConfig {
    pub rounds: u64,
    pub seed: u64,
    pub settings: SettingsQuad,
    /// State the first measurement acts on.
    pub initial: DensityMatrix,
    /// Direction of an intermediate measurement by Eve.
    pub eve: Option<BlochVector>,
}

impl LgConfig {
    /// Optimal coplanar settings on a maximally mixed qubit, no Eve.
    pub fn optimal(rounds: u64, seed: u64) -> Self {
        Self {
            rounds,
            seed,
            settings: SettingsQuad::tsirelson(),
            initial: DensityMatrix::maximally_mixed(2).expect("qubit"),
            eve: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LgRoundRecord {
    pub index: u64,
    /// 0 for `x`, 1 for `x′`.
    pub alice_setting: u8,
    /// 0 for `y`, 1 for `y′`.
    pub bob_setting: u8,
    pub alice_outcome: Outcome,
    /// Bob's raw outcome, before reconciliation.
    pub bob_outcome: Outcome,
    /// Bob's key bit after flipping on `(x′, y′)`.
    pub bob_bit: u8,
    pub eve_outcome: Option<Outcome>,
}

impl LgRoundRecord {
    pub fn agree(&self) -> bool {
        self.alice_outcome.bit() == self.bob_bit
    }
}

/// Exact joint laws `[pair][α][ε][β]` of the three-time sequence.
struct LgTables {
    cells: [[[[f64; 2]; 2]; 2]; 4],
}

impl LgTables {
    fn new(cfg: &LgConfig) -> Result<Self, ProtocolError> {
        let mut cells = [[[[0.0; 2]; 2]; 2]; 4];
        let rho = cfg.initial.matrix();
        for (p, (x, y)) in cfg.settings.pairs().iter().enumerate() {
            for a in Outcome::BOTH {
                let pa = projector_of(x, a);
                for b in Outcome::BOTH {
                    let pb = projector_of(y, b);
                    match cfg.eve {
                        None => {
                            cells[p][a.index()][0][b.index()] =
                                sequence_probability(rho, &[&pa, &pb]).max(0.0);
                        }
                        Some(e) => {
                            for eps in Outcome::BOTH {
                                let pe = projector_of(&e, eps);
                                cells[p][a.index()][eps.index()][b.index()] =
                                    sequence_probability(rho, &[&pa, &pe, &pb]).max(0.0);
                            }
                        }
                    }
                }
            }
        }
        Ok(Self { cells })
    }

    fn sample(&self, pair: usize, u: f64) -> (Outcome, Outcome, Outcome) {
        let mut acc = 0.0;
        let mut last = (Outcome::Plus, Outcome::Plus, Outcome::Plus);
        for a in Outcome::BOTH {
            for e in Outcome::BOTH {
                for b in Outcome::BOTH {
                    let p = self.cells[pair][a.index()][e.index()][b.index()];
                    if p > 0.0 {
                        acc += p;
                        last = (a, e, b);
                        if u < acc {
                            return last;
                        }
                    }
                }
            }
        }
        last
    }
}

fn lg_round_with<R: Rng + ?Sized>(
    cfg: &LgConfig,
    tables: &LgTables,
    index: u64,
    rng: &mut R,
) -> LgRoundRecord {
    let i = usize::from(rng.gen::<f64>() >= 0.5);
    let j = usize::from(rng.gen::<f64>() >= 0.5);
    let (a, e, b) = tables.sample(pair_index(i, j), rng.gen());
    let flip = i == 1 && j == 1;
    LgRoundRecord {
        index,
        alice_setting: i as u8,
        bob_setting: j as u8,
        alice_outcome: a,
        bob_outcome: b,
        bob_bit: if flip { b.flipped().bit() } else { b.bit() },
        eve_outcome: cfg.eve.map(|_| e),
    }
}

/// One round of the pure LG protocol on stream `index`.
pub fn lg_protocol_round<R: Rng + ?Sized>(
    cfg: &LgConfig,
    index: u64,
    rng: &mut R,
) -> Result<LgRoundRecord, ProtocolError> {
    Ok(lg_round_with(cfg, &LgTables::new(cfg)?, index, rng))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LgSummary {
    pub rounds: u64,
    /// Agreement after reconciliation over all rounds.
    pub agreement: Estimate,
    /// Agreement per setting pair, in [`pair_index`] order.
    pub pair_agreement: [Option<Estimate>; 4],
    /// `Λ̂` between Alice's and Bob's raw outcomes.
    pub lambda: Option<LgiEstimate>,
}

pub fn run_lg_protocol(cfg: &LgConfig) -> Result<LgSummary, ProtocolError> {
    if cfg.rounds == 0 {
        return Err(ProtocolError::NoRounds);
    }
    let tables = LgTables::new(cfg)?;
    let mut agree = [0u64; 4];
    let mut total = [0u64; 4];
    let mut table = CorrelationTable::new_counts();
    for index in 0..cfg.rounds {
        let mut rng = round_rng(cfg.seed, index);
        let r = lg_round_with(cfg, &tables, index, &mut rng);
        let p = pair_index(r.alice_setting as usize, r.bob_setting as usize);
        total[p] += 1;
        agree[p] += u64::from(r.agree());
        table.record(p, r.alice_outcome, r.bob_outcome);
    }
    let all: u64 = agree.iter().sum();
    Ok(LgSummary {
        rounds: cfg.rounds,
        agreement: Estimate::proportion(all, cfg.rounds).expect("rounds > 0"),
        pair_agreement: core::array::from_fn(|p| Estimate::proportion(agree[p], total[p])),
        lambda: lgi_from_counts(&table).ok(),
    })
}

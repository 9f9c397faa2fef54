//! Sequential (temporal) measurement statistics on a single qubit.
//!
//! Two parties measure the same system one after the other; the joint
//! statistics follow from chaining Lüders updates. On top of that this
//! module evaluates the Leggett-Garg combination
//!
//! ```text
//! Λ = |E(x,y) + E(x,y') + E(x',y) − E(x',y')|
//! ```
//!
//! its monogamy trade-offs when a third party measures in between, and an
//! estimator of `Λ` from tallied outcomes.
//!
//! Where a quantity has a closed form it is computed both ways and the two
//! routes are returned side by side in a [`TwoRoute`].

use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::math::{abs, cos, sin, sqrt, SQRT_2, TWO_SQRT_2};
use crate::qmath::{
    bloch_to_observable, expectation, projector_of, sequence_probability, BlochVector,
    DensityMatrix, Outcome,
};

/// Sign of each correlator in `Λ`, in [`SettingsQuad::pairs`] order.
pub const LGI_SIGNS: [f64; 4] = [1.0, 1.0, 1.0, -1.0];

/// Classical (noninvasive-realist) bound on `Λ`.
pub const CLASSICAL_BOUND: f64 = 2.0;
/// Quantum maximum of `Λ`.
pub const TSIRELSON_BOUND: f64 = TWO_SQRT_2;
/// Maximum of `Λ` once an intermediate projective measurement has
/// disentangled the first and last measurements.
pub const SEPARABLE_BOUND: f64 = SQRT_2;
/// `Λ_AE + Λ_AB` bound for non-signaling correlations.
pub const NO_SIGNALING_MONOGAMY: f64 = 4.0;
/// `Λ_AE + Λ_AB` bound for the sequence Alice → Eve → Bob.
pub const SEQUENTIAL_MONOGAMY: f64 = 3.0 * SQRT_2;
/// `Λ_AE + Λ_EB` bound when both pairs share Eve's measurement.
pub const ANCHORED_MONOGAMY: f64 = 4.0 * SQRT_2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TemporalError {
    #[error("insufficient statistics: setting pair {pair} has no counts")]
    InsufficientStatistics { pair: usize },
    #[error("probabilities for setting pair {pair} sum to {sum}, expected 1")]
    NotNormalized { pair: usize, sum: f64 },
    #[error("negative or non-finite table entry")]
    InvalidEntry,
    #[error("cannot merge a count table with a probability table")]
    KindMismatch,
}

/// Two settings available to one party.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SettingsPair {
    pub first: BlochVector,
    pub second: BlochVector,
}

impl SettingsPair {
    pub fn new(first: BlochVector, second: BlochVector) -> Self {
        Self { first, second }
    }

    pub fn get(&self, i: usize) -> &BlochVector {
        match i {
            0 => &self.first,
            1 => &self.second,
            _ => panic!("setting index {i} out of range"),
        }
    }

    pub fn as_array(&self) -> [BlochVector; 2] {
        [self.first, self.second]
    }
}

/// Settings `x, x'` at the first time and `y, y'` at the second.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SettingsQuad {
    pub x: BlochVector,
    pub x_prime: BlochVector,
    pub y: BlochVector,
    pub y_prime: BlochVector,
}

impl SettingsQuad {
    pub fn from_pairs(first: SettingsPair, second: SettingsPair) -> Self {
        Self {
            x: first.first,
            x_prime: first.second,
            y: second.first,
            y_prime: second.second,
        }
    }

    /// `(x,y), (x,y'), (x',y), (x',y')`.
    pub fn pairs(&self) -> [(BlochVector, BlochVector); 4] {
        [
            (self.x, self.y),
            (self.x, self.y_prime),
            (self.x_prime, self.y),
            (self.x_prime, self.y_prime),
        ]
    }

    /// Coplanar settings `x', y, x, y'` at successive `π/4` steps in the
    /// equatorial plane, which reach the quantum maximum.
    pub fn tsirelson() -> Self {
        use core::f64::consts::FRAC_PI_4;
        Self {
            x_prime: BlochVector::equatorial(0.0),
            y: BlochVector::equatorial(FRAC_PI_4),
            x: BlochVector::equatorial(2.0 * FRAC_PI_4),
            y_prime: BlochVector::equatorial(3.0 * FRAC_PI_4),
        }
    }
}

/// Index of a setting pair in `Λ`: first-time setting `i`, second-time `j`.
#[inline]
pub fn pair_index(i: usize, j: usize) -> usize {
    debug_assert!(i < 2 && j < 2);
    2 * i + j
}

/// A value computed along two independent routes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoRoute {
    /// Explicit sum over outcome sequences weighted by chained Born rules.
    pub sequential: f64,
    /// Closed-form expression.
    pub closed_form: f64,
}

impl TwoRoute {
    pub fn value(&self) -> f64 {
        self.sequential
    }

    pub fn discrepancy(&self) -> f64 {
        abs(self.sequential - self.closed_form)
    }
}

/// `P(α, β | x, y)` for measuring `x` then `y`, via the projector chain.
pub fn seq_joint_prob(
    rho: &DensityMatrix,
    x: &BlochVector,
    y: &BlochVector,
    alpha: Outcome,
    beta: Outcome,
) -> f64 {
    let px = projector_of(x, alpha);
    let py = projector_of(y, beta);
    sequence_probability(rho.matrix(), &[&px, &py])
}

/// Expanded form of [`seq_joint_prob`]:
/// `¼ + (α/4)⟨x⟩ + (β/8)⟨y⟩ + (β/8)⟨xyx⟩ + (αβ/8)⟨{x,y}⟩`.
pub fn seq_joint_prob_expanded(
    rho: &DensityMatrix,
    x: &BlochVector,
    y: &BlochVector,
    alpha: Outcome,
    beta: Outcome,
) -> f64 {
    let (a, b) = (alpha.sign(), beta.sign());
    let xo = bloch_to_observable(x);
    let yo = bloch_to_observable(y);
    let ex = expectation(rho, &xo).expect("qubit observable");
    let ey = expectation(rho, &yo).expect("qubit observable");
    let xyx = &(&xo * &yo) * &xo;
    let exyx = expectation(rho, &xyx).expect("hermitian");
    let eanti = expectation(rho, &xo.anticommutator(&yo)).expect("hermitian");
    0.25 + a / 4.0 * ex + b / 8.0 * ey + b / 8.0 * exyx + a * b / 8.0 * eanti
}

/// `⟨x_{t1} y_{t2}⟩`: summed over outcomes, and as the dot product `x·y`
/// (it does not depend on the state).
pub fn temporal_correlator(rho: &DensityMatrix, x: &BlochVector, y: &BlochVector) -> TwoRoute {
    let mut sum = 0.0;
    for a in Outcome::BOTH {
        for b in Outcome::BOTH {
            sum += a.sign() * b.sign() * seq_joint_prob(rho, x, y, a, b);
        }
    }
    TwoRoute {
        sequential: sum,
        closed_form: x.dot(y),
    }
}

fn lgi_combination(correlators: [f64; 4]) -> f64 {
    correlators.iter().zip(LGI_SIGNS).map(|(e, s)| s * e).sum()
}

/// `Λ` from sequential two-time correlators.
pub fn lgi_value(rho: &DensityMatrix, s: &SettingsQuad) -> f64 {
    let c = s
        .pairs()
        .map(|(x, y)| temporal_correlator(rho, &x, &y).sequential);
    abs(lgi_combination(c))
}

/// Bob's marginal `P(β | x, y)` after Alice measured `x`. It depends on `x`,
/// which is what makes temporal correlations signaling.
///
/// The closed form is `½ + (β/4)(⟨y⟩ + ⟨xyx⟩)`.
pub fn bob_marginal(
    rho: &DensityMatrix,
    x: &BlochVector,
    y: &BlochVector,
    beta: Outcome,
) -> TwoRoute {
    let sequential = Outcome::BOTH
        .iter()
        .map(|&a| seq_joint_prob(rho, x, y, a, beta))
        .sum();
    let xo = bloch_to_observable(x);
    let yo = bloch_to_observable(y);
    let ey = expectation(rho, &yo).expect("qubit observable");
    let exyx = expectation(rho, &(&(&xo * &yo) * &xo)).expect("hermitian");
    TwoRoute {
        sequential,
        closed_form: 0.5 + beta.sign() / 4.0 * (ey + exyx),
    }
}

/// `⟨x, y⟩` with a projective measurement along `e` in between:
/// chained Lüders sum over all 8 outcome triples, and `(x·e)(e·y)`.
pub fn three_time_correlator(
    rho: &DensityMatrix,
    x: &BlochVector,
    e: &BlochVector,
    y: &BlochVector,
) -> TwoRoute {
    let mut sum = 0.0;
    for m in Outcome::BOTH {
        let px = projector_of(x, m);
        for n in Outcome::BOTH {
            let pe = projector_of(e, n);
            for o in Outcome::BOTH {
                let py = projector_of(y, o);
                sum += m.sign() * o.sign() * sequence_probability(rho.matrix(), &[&px, &pe, &py]);
            }
        }
    }
    TwoRoute {
        sequential: sum,
        closed_form: x.dot(e) * e.dot(y),
    }
}

/// Correlator between the second and third of three sequential
/// measurements, marginalising the first.
fn later_pair_correlator(
    rho: &DensityMatrix,
    x: &BlochVector,
    e: &BlochVector,
    y: &BlochVector,
) -> f64 {
    let mut sum = 0.0;
    for m in Outcome::BOTH {
        let px = projector_of(x, m);
        for n in Outcome::BOTH {
            let pe = projector_of(e, n);
            for o in Outcome::BOTH {
                let py = projector_of(y, o);
                sum += n.sign() * o.sign() * sequence_probability(rho.matrix(), &[&px, &pe, &py]);
            }
        }
    }
    sum
}

/// Settings of the three parties in an Alice → Eve → Bob sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MonogamyConfig {
    pub alice: SettingsPair,
    pub eve: SettingsPair,
    pub bob: SettingsPair,
}

impl MonogamyConfig {
    /// Eve at Tsirelson angles to Alice and Bob at Tsirelson angles to
    /// Alice, all equatorial. Saturates the sequential bound `3√2` (and
    /// so exceeds the non-signaling bound 4).
    pub fn sequential_saturating() -> Self {
        use core::f64::consts::FRAC_PI_4;
        Self {
            alice: SettingsPair::new(
                BlochVector::equatorial(0.0),
                BlochVector::equatorial(2.0 * FRAC_PI_4),
            ),
            eve: SettingsPair::new(
                BlochVector::equatorial(FRAC_PI_4),
                BlochVector::equatorial(-FRAC_PI_4),
            ),
            bob: SettingsPair::new(
                BlochVector::equatorial(FRAC_PI_4),
                BlochVector::equatorial(-FRAC_PI_4),
            ),
        }
    }

    /// Alice–Eve and Eve–Bob both at Tsirelson angles: `4√2`.
    pub fn anchored_saturating() -> Self {
        use core::f64::consts::FRAC_PI_4;
        Self {
            alice: SettingsPair::new(
                BlochVector::equatorial(0.0),
                BlochVector::equatorial(2.0 * FRAC_PI_4),
            ),
            eve: SettingsPair::new(
                BlochVector::equatorial(FRAC_PI_4),
                BlochVector::equatorial(-FRAC_PI_4),
            ),
            bob: SettingsPair::new(
                BlochVector::equatorial(0.0),
                BlochVector::equatorial(2.0 * FRAC_PI_4),
            ),
        }
    }
}

/// `Λ_AE` and `Λ_AB` for the sequence Alice → Eve → Bob.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SequentialMonogamy {
    pub lambda_ae: f64,
    /// `Λ_AB` with Eve's two settings weighted equally.
    pub lambda_ab: f64,
    /// `Λ_AB` with Eve fixed to each of her settings.
    pub lambda_ab_per_eve_setting: [f64; 2],
}

impl SequentialMonogamy {
    pub fn sum(&self) -> f64 {
        self.lambda_ae + self.lambda_ab
    }
}

/// `Λ_AE` and `Λ_EB` when both are read off the same Eve outcomes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchoredMonogamy {
    pub lambda_ae: f64,
    pub lambda_eb: f64,
}

impl AnchoredMonogamy {
    pub fn sum(&self) -> f64 {
        self.lambda_ae + self.lambda_eb
    }
}

fn lambda_between(rho: &DensityMatrix, first: &SettingsPair, second: &SettingsPair) -> f64 {
    lgi_value(rho, &SettingsQuad::from_pairs(*first, *second))
}

/// Alice measures at `t1`, Eve at `t1'`, Bob at `t2`.
pub fn monogamy_sum_sequential(
    rho: &DensityMatrix,
    alice: &SettingsPair,
    eve: &SettingsPair,
    bob: &SettingsPair,
) -> SequentialMonogamy {
    let lambda_ae = lambda_between(rho, alice, eve);
    let quad = SettingsQuad::from_pairs(*alice, *bob);
    let mut per_setting = [[0.0; 4]; 2];
    for (j, e) in eve.as_array().iter().enumerate() {
        for (k, (x, y)) in quad.pairs().iter().enumerate() {
            per_setting[j][k] = three_time_correlator(rho, x, e, y).sequential;
        }
    }
    let averaged: [f64; 4] =
        core::array::from_fn(|k| 0.5 * (per_setting[0][k] + per_setting[1][k]));
    SequentialMonogamy {
        lambda_ae,
        lambda_ab: abs(lgi_combination(averaged)),
        lambda_ab_per_eve_setting: [
            abs(lgi_combination(per_setting[0])),
            abs(lgi_combination(per_setting[1])),
        ],
    }
}

/// Alice → Eve → Bob with `Λ_EB` taken between Eve's and Bob's outcomes.
/// Alice's setting is marginalised with equal weight when computing `Λ_EB`.
pub fn anchored_monogamy_sum(
    rho: &DensityMatrix,
    alice: &SettingsPair,
    eve: &SettingsPair,
    bob: &SettingsPair,
) -> AnchoredMonogamy {
    let lambda_ae = lambda_between(rho, alice, eve);
    let quad = SettingsQuad::from_pairs(*eve, *bob);
    let c = quad.pairs().map(|(e, y)| {
        0.5 * alice
            .as_array()
            .iter()
            .map(|x| later_pair_correlator(rho, x, &e, &y))
            .sum::<f64>()
    });
    AnchoredMonogamy {
        lambda_ae,
        lambda_eb: abs(lgi_combination(c)),
    }
}

/// Best configuration found by a saturation search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchResult {
    pub value: f64,
    pub config: MonogamyConfig,
}

/// Coarse coplanar grid followed by local pattern-search refinement over
/// all six Bloch directions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonogamySearch {
    pub grid_step_deg: f64,
    /// Refinement stops once the step falls below this (radians).
    pub min_step: f64,
}

impl Default for MonogamySearch {
    fn default() -> Self {
        Self {
            grid_step_deg: 10.0,
            min_step: 1e-8,
        }
    }
}

#[derive(Clone, Copy)]
enum Objective {
    Sequential,
    Anchored,
}

impl MonogamySearch {
    pub fn max_sequential(&self, rho: &DensityMatrix) -> SearchResult {
        self.run(rho, Objective::Sequential)
    }

    pub fn max_anchored(&self, rho: &DensityMatrix) -> SearchResult {
        self.run(rho, Objective::Anchored)
    }

    fn run(&self, rho: &DensityMatrix, objective: Objective) -> SearchResult {
        let angles = self.coarse_grid(objective);
        // (polar, azimuth) for alice.0, alice.1, eve.0, eve.1, bob.0, bob.1
        let mut params = [0.0f64; 12];
        for (i, &phi) in angles.iter().enumerate() {
            params[2 * i] = core::f64::consts::FRAC_PI_2;
            params[2 * i + 1] = phi;
        }
        let eval = |p: &[f64; 12]| evaluate(rho, &config_from_params(p), objective);
        let mut best = eval(&params);
        let mut step = self.grid_step_deg.to_radians() / 2.0;
        while step >= self.min_step {
            let mut improved = false;
            for i in 0..12 {
                for dir in [1.0, -1.0] {
                    let mut trial = params;
                    trial[i] += dir * step;
                    let v = eval(&trial);
                    if v > best + 1e-15 {
                        best = v;
                        params = trial;
                        improved = true;
                    }
                }
            }
            if !improved {
                step /= 2.0;
            }
        }
        SearchResult {
            value: best,
            config: config_from_params(&params),
        }
    }

    /// Returns the six equatorial angles of the best grid configuration.
    ///
    /// Alice's first setting is pinned at angle 0 (rotation invariance).
    /// The inner maximisation over Bob's pair is separable:
    /// `|u(b) + v(b')|` is maximised by extremising `u` and `v` independently.
    fn coarse_grid(&self, objective: Objective) -> [f64; 6] {
        let n = libm::round(360.0 / self.grid_step_deg) as usize;
        let n = n.max(4);
        let step = 2.0 * core::f64::consts::PI / n as f64;
        let cos_table: Vec<f64> = (0..n).map(|k| cos(k as f64 * step)).collect();
        let c = |a: usize, b: usize| cos_table[(a + n - b) % n];

        let mut best = (f64::NEG_INFINITY, [0usize; 6]);
        let a0 = 0usize;
        for a1 in 0..n {
            for e0 in 0..n {
                for e1 in 0..n {
                    let lambda_ae = abs(c(a0, e0) + c(a0, e1) + c(a1, e0) - c(a1, e1));
                    // u(b) pairs b with sign + for both alice settings, v(b') with (+, -)
                    let corr = |x: usize, b: usize| -> f64 {
                        match objective {
                            Objective::Sequential => {
                                0.5 * (c(x, e0) * c(e0, b) + c(x, e1) * c(e1, b))
                            }
                            Objective::Anchored => c(x, b),
                        }
                    };
                    let (f0, f1) = match objective {
                        Objective::Sequential => (a0, a1),
                        Objective::Anchored => (e0, e1),
                    };
                    let mut u_max = (f64::NEG_INFINITY, 0);
                    let mut u_min = (f64::INFINITY, 0);
                    let mut v_max = (f64::NEG_INFINITY, 0);
                    let mut v_min = (f64::INFINITY, 0);
                    for b in 0..n {
                        let u = corr(f0, b) + corr(f1, b);
                        let v = corr(f0, b) - corr(f1, b);
                        if u > u_max.0 {
                            u_max = (u, b);
                        }
                        if u < u_min.0 {
                            u_min = (u, b);
                        }
                        if v > v_max.0 {
                            v_max = (v, b);
                        }
                        if v < v_min.0 {
                            v_min = (v, b);
                        }
                    }
                    let (second, b0, b1) = if u_max.0 + v_max.0 >= -(u_min.0 + v_min.0) {
                        (u_max.0 + v_max.0, u_max.1, v_max.1)
                    } else {
                        (-(u_min.0 + v_min.0), u_min.1, v_min.1)
                    };
                    let total = lambda_ae + second;
                    if total > best.0 {
                        best = (total, [a0, a1, e0, e1, b0, b1]);
                    }
                }
            }
        }
        best.1.map(|k| k as f64 * step)
    }
}

fn evaluate(rho: &DensityMatrix, cfg: &MonogamyConfig, objective: Objective) -> f64 {
    match objective {
        Objective::Sequential => monogamy_sum_sequential(rho, &cfg.alice, &cfg.eve, &cfg.bob).sum(),
        Objective::Anchored => anchored_monogamy_sum(rho, &cfg.alice, &cfg.eve, &cfg.bob).sum(),
    }
}

fn config_from_params(p: &[f64; 12]) -> MonogamyConfig {
    let v = |i: usize| BlochVector::spherical(p[2 * i], p[2 * i + 1]);
    MonogamyConfig {
        alice: SettingsPair::new(v(0), v(1)),
        eve: SettingsPair::new(v(2), v(3)),
        bob: SettingsPair::new(v(4), v(5)),
    }
}

/// Uniformly distributed direction on the sphere.
pub fn random_bloch<R: Rng + ?Sized>(rng: &mut R) -> BlochVector {
    let z: f64 = rng.gen_range(-1.0..=1.0);
    let phi: f64 = rng.gen_range(0.0..(2.0 * core::f64::consts::PI));
    let r = sqrt((1.0 - z * z).max(0.0));
    BlochVector::normalized(r * cos(phi), r * sin(phi), z).expect("nonzero")
}

/// Random search over `samples` configurations; returns the largest
/// sequential and anchored sums seen, in that order.
pub fn random_monogamy_maxima(
    rho: &DensityMatrix,
    samples: usize,
    seed: u64,
) -> (SearchResult, SearchResult) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best_seq: Option<SearchResult> = None;
    let mut best_anc: Option<SearchResult> = None;
    for _ in 0..samples {
        let mut pair = || SettingsPair::new(random_bloch(&mut rng), random_bloch(&mut rng));
        let cfg = MonogamyConfig {
            alice: pair(),
            eve: pair(),
            bob: pair(),
        };
        let s = evaluate(rho, &cfg, Objective::Sequential);
        let a = evaluate(rho, &cfg, Objective::Anchored);
        if best_seq.map_or(true, |b| s > b.value) {
            best_seq = Some(SearchResult {
                value: s,
                config: cfg,
            });
        }
        if best_anc.map_or(true, |b| a > b.value) {
            best_anc = Some(SearchResult {
                value: a,
                config: cfg,
            });
        }
    }
    let empty = SearchResult {
        value: 0.0,
        config: MonogamyConfig::sequential_saturating(),
    };
    (best_seq.unwrap_or(empty), best_anc.unwrap_or(empty))
}

/// Whether a table holds raw counts or exact probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum TableKind {
    Counts,
    Probabilities,
}

/// Outcome tallies `cells[pair][α][β]` for the four setting pairs of `Λ`,
/// indexed as in [`pair_index`]; `α`, `β` use [`Outcome::index`].
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CorrelationTable {
    kind: TableKind,
    cells: [[[f64; 2]; 2]; 4],
}

impl Default for CorrelationTable {
    fn default() -> Self {
        Self::new_counts()
    }
}

/// One estimated correlator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlator {
    pub value: f64,
    pub std_error: f64,
    /// Number of counts behind the estimate (0 for exact tables).
    pub samples: f64,
}

/// Estimated `Λ` before taking the absolute value, with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LgiEstimate {
    pub value: f64,
    pub std_error: f64,
    pub correlators: [f64; 4],
    pub correlator_std_errors: [f64; 4],
}

impl LgiEstimate {
    pub fn magnitude(&self) -> f64 {
        abs(self.value)
    }
}

impl CorrelationTable {
    pub fn new_counts() -> Self {
        Self {
            kind: TableKind::Counts,
            cells: [[[0.0; 2]; 2]; 4],
        }
    }

    /// Exact table of conditional probabilities `P(α, β | pair)`.
    pub fn from_probabilities(cells: [[[f64; 2]; 2]; 4]) -> Result<Self, TemporalError> {
        for (pair, block) in cells.iter().enumerate() {
            let mut sum = 0.0;
            for row in block {
                for &p in row {
                    if !(p.is_finite() && p >= 0.0) {
                        return Err(TemporalError::InvalidEntry);
                    }
                    sum += p;
                }
            }
            if abs(sum - 1.0) > 1e-9 {
                return Err(TemporalError::NotNormalized { pair, sum });
            }
        }
        Ok(Self {
            kind: TableKind::Probabilities,
            cells,
        })
    }

    pub fn from_counts(cells: [[[u64; 2]; 2]; 4]) -> Self {
        let mut t = Self::new_counts();
        for (p, block) in cells.iter().enumerate() {
            for a in 0..2 {
                for b in 0..2 {
                    t.cells[p][a][b] = block[a][b] as f64;
                }
            }
        }
        t
    }

    pub fn kind(&self) -> TableKind {
        self.kind
    }

    pub fn cells(&self) -> &[[[f64; 2]; 2]; 4] {
        &self.cells
    }

    /// Adds one count. Panics on a probability table.
    pub fn record(&mut self, pair: usize, alpha: Outcome, beta: Outcome) {
        assert_eq!(
            self.kind,
            TableKind::Counts,
            "cannot record into a probability table"
        );
        self.cells[pair][alpha.index()][beta.index()] += 1.0;
    }

    /// Elementwise sum of two count tables. Counts are integers below
    /// 2^53, so the result does not depend on merge order.
    pub fn merge(&mut self, other: &Self) -> Result<(), TemporalError> {
        if self.kind != TableKind::Counts || other.kind != TableKind::Counts {
            return Err(TemporalError::KindMismatch);
        }
        for p in 0..4 {
            for a in 0..2 {
                for b in 0..2 {
                    self.cells[p][a][b] += other.cells[p][a][b];
                }
            }
        }
        Ok(())
    }

    pub fn pair_total(&self, pair: usize) -> f64 {
        self.cells[pair].iter().flatten().sum()
    }

    pub fn total(&self) -> f64 {
        (0..4).map(|p| self.pair_total(p)).sum()
    }

    /// `⟨αβ⟩` for one setting pair, with a binomial standard error
    /// `√((1 − E²)/N)` for count tables.
    pub fn correlator(&self, pair: usize) -> Result<Correlator, TemporalError> {
        let n = self.pair_total(pair);
        if !(n > 0.0) {
            return Err(TemporalError::InsufficientStatistics { pair });
        }
        let c = &self.cells[pair];
        let value = (c[0][0] + c[1][1] - c[0][1] - c[1][0]) / n;
        let (std_error, samples) = match self.kind {
            TableKind::Counts => (sqrt((1.0 - value * value).max(0.0) / n), n),
            TableKind::Probabilities => (0.0, 0.0),
        };
        Ok(Correlator {
            value,
            std_error,
            samples,
        })
    }
}

/// Empirical `Λ` from a table, signs per [`LGI_SIGNS`]; correlator
/// errors are independent and added in quadrature.
pub fn lgi_from_counts(table: &CorrelationTable) -> Result<LgiEstimate, TemporalError> {
    let mut correlators = [0.0; 4];
    let mut errors = [0.0; 4];
    for p in 0..4 {
        let c = table.correlator(p)?;
        correlators[p] = c.value;
        errors[p] = c.std_error;
    }
    let var: f64 = errors.iter().map(|e| e * e).sum();
    Ok(LgiEstimate {
        value: lgi_combination(correlators),
        std_error: sqrt(var),
        correlators,
        correlator_std_errors: errors,
    })
}

/// Exact table of sequential statistics `P(α, β | x, y)` for a quad.
pub fn exact_table(rho: &DensityMatrix, s: &SettingsQuad) -> CorrelationTable {
    let mut cells = [[[0.0; 2]; 2]; 4];
    for (p, (x, y)) in s.pairs().iter().enumerate() {
        for a in Outcome::BOTH {
            for b in Outcome::BOTH {
                cells[p][a.index()][b.index()] = seq_joint_prob(rho, x, y, a, b);
            }
        }
    }
    CorrelationTable::from_probabilities(cells).expect("Born probabilities are normalised")
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};

    fn zero() -> DensityMatrix {
        DensityMatrix::eigenstate(&BlochVector::Z, Outcome::Plus)
    }

    fn mixed() -> DensityMatrix {
        DensityMatrix::maximally_mixed(2).unwrap()
    }

    #[test]
    fn joint_prob_examples() {
        let z = BlochVector::Z;
        let p = seq_joint_prob(&zero(), &z, &z, Outcome::Plus, Outcome::Plus);
        assert!((p - 1.0).abs() < 1e-15);
        for a in Outcome::BOTH {
            for b in Outcome::BOTH {
                let p = seq_joint_prob(&mixed(), &z, &BlochVector::X, a, b);
                assert!((p - 0.25).abs() < 1e-15);
            }
        }
        let p = seq_joint_prob(&mixed(), &z, &z, Outcome::Plus, Outcome::Plus);
        assert!((p - 0.5).abs() < 1e-15);
        let p = seq_joint_prob_expanded(&mixed(), &z, &z, Outcome::Plus, Outcome::Plus);
        assert!((p - 0.5).abs() < 1e-15);
    }

    #[test]
    fn correlator_examples() {
        let rho = DensityMatrix::from_bloch([0.2, 0.1, -0.6]).unwrap();
        let same = temporal_correlator(&rho, &BlochVector::X, &BlochVector::X);
        assert!((same.sequential - 1.0).abs() < 1e-14);
        let perp = temporal_correlator(&rho, &BlochVector::X, &BlochVector::Y);
        assert!(perp.sequential.abs() < 1e-14);
        let diag = temporal_correlator(&rho, &BlochVector::X, &BlochVector::M_PLUS);
        assert!((diag.sequential - FRAC_1_SQRT_2).abs() < 1e-14);
        assert!(diag.discrepancy() < 1e-14);
    }

    #[test]
    fn lgi_examples() {
        let rho = mixed();
        let z = BlochVector::Z;
        let all_z = SettingsQuad {
            x: z,
            x_prime: z,
            y: z,
            y_prime: z,
        };
        assert!((lgi_value(&rho, &all_z) - 2.0).abs() < 1e-14);
        assert!((lgi_value(&rho, &SettingsQuad::tsirelson()) - 2.0 * 2f64.sqrt()).abs() < 1e-12);
        let perp = SettingsQuad {
            x: BlochVector::Z,
            x_prime: BlochVector::Z,
            y: BlochVector::X,
            y_prime: BlochVector::Y,
        };
        assert!(lgi_value(&rho, &perp).abs() < 1e-14);
    }

    #[test]
    fn marginal_depends_on_first_setting() {
        let z = BlochVector::Z;
        let a = bob_marginal(&zero(), &z, &z, Outcome::Plus);
        let b = bob_marginal(&zero(), &BlochVector::X, &z, Outcome::Plus);
        assert!((a.sequential - 1.0).abs() < 1e-15);
        assert!((b.sequential - 0.5).abs() < 1e-15);
        assert!(a.discrepancy() < 1e-15 && b.discrepancy() < 1e-15);
        assert!((a.sequential - b.sequential - 0.5).abs() < 1e-15);
    }

    #[test]
    fn three_time_examples() {
        let rho = DensityMatrix::from_bloch([0.1, 0.5, 0.3]).unwrap();
        let x = BlochVector::spherical(0.4, 1.0);
        let y = BlochVector::spherical(2.0, -0.3);
        let t = three_time_correlator(&rho, &x, &x, &y);
        assert!((t.sequential - x.dot(&y)).abs() < 1e-14);

        let perp = BlochVector::spherical(0.4 + core::f64::consts::FRAC_PI_2, 1.0);
        assert!(x.dot(&perp).abs() < 1e-15);
        assert!(three_time_correlator(&rho, &x, &perp, &y).sequential.abs() < 1e-14);

        let e = BlochVector::xz_plane(FRAC_PI_4);
        let t = three_time_correlator(&rho, &BlochVector::Z, &e, &BlochVector::X);
        assert!((t.sequential - 0.5).abs() < 1e-14);
    }

    #[test]
    fn saturating_fixtures() {
        let rho = mixed();
        let s = MonogamyConfig::sequential_saturating();
        let m = monogamy_sum_sequential(&rho, &s.alice, &s.eve, &s.bob);
        assert!((m.lambda_ae - TSIRELSON_BOUND).abs() < 1e-12);
        assert!((m.lambda_ab - SEPARABLE_BOUND).abs() < 1e-12);
        assert!(m.sum() > NO_SIGNALING_MONOGAMY);

        let a = MonogamyConfig::anchored_saturating();
        let m = anchored_monogamy_sum(&rho, &a.alice, &a.eve, &a.bob);
        assert!((m.sum() - ANCHORED_MONOGAMY).abs() < 1e-12);
    }

    #[test]
    fn eve_on_bob_setting_gives_separable_lambda() {
        // Eve fixed along y in the Tsirelson quad: Λ_AB = √2
        let q = SettingsQuad::tsirelson();
        let alice = SettingsPair::new(q.x, q.x_prime);
        let bob = SettingsPair::new(q.y, q.y_prime);
        let eve = SettingsPair::new(q.y, q.y);
        let m = monogamy_sum_sequential(&mixed(), &alice, &eve, &bob);
        assert!((m.lambda_ab_per_eve_setting[0] - SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn all_equal_anchored_is_four() {
        let z = SettingsPair::new(BlochVector::Z, BlochVector::Z);
        let m = anchored_monogamy_sum(&mixed(), &z, &z, &z);
        assert!((m.sum() - 4.0).abs() < 1e-14);
    }

    #[test]
    fn table_estimator() {
        let exact = exact_table(&mixed(), &SettingsQuad::tsirelson());
        let est = lgi_from_counts(&exact).unwrap();
        assert!((est.magnitude() - TSIRELSON_BOUND).abs() < 1e-12);
        assert_eq!(est.std_error, 0.0);

        let uniform = CorrelationTable::from_counts([[[25, 25], [25, 25]]; 4]);
        let est = lgi_from_counts(&uniform).unwrap();
        assert_eq!(est.value, 0.0);
        // four correlators, each √(1/100)
        assert!((est.std_error - 0.2).abs() < 1e-15);
    }

    #[test]
    fn table_errors() {
        let mut t = CorrelationTable::new_counts();
        t.record(0, Outcome::Plus, Outcome::Plus);
        t.record(1, Outcome::Plus, Outcome::Plus);
        t.record(2, Outcome::Plus, Outcome::Plus);
        assert_eq!(
            lgi_from_counts(&t),
            Err(TemporalError::InsufficientStatistics { pair: 3 })
        );
        let bad = CorrelationTable::from_probabilities([[[0.5, 0.0], [0.0, 0.0]]; 4]);
        assert!(matches!(bad, Err(TemporalError::NotNormalized { .. })));
        let mut exact = exact_table(&mixed(), &SettingsQuad::tsirelson());
        assert_eq!(exact.merge(&t), Err(TemporalError::KindMismatch));
    }
}

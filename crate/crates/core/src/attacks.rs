//! Adversary models.
//!
//! * Device attack: Eve ships a separable four-qubit "cheat state" and
//!   wires the devices so that Alice and Bob measure different particles
//!   of correlated pairs. Matched-basis statistics look exactly like BB84
//!   while Eve holds the hidden variable that fixes the key bit.
//! * Channel attack: each transmitted qubit interacts with a probe through
//!   a partial-swap unitary of strength `θ`; Eve measures the probe after
//!   the public basis announcement.

use rand::Rng;
use thiserror::Error;

use crate::basis::{Basis, BasisPair};
use crate::math::{abs, cos, sin, sqrt};
use crate::qmath::{
    partial_trace, projector_of, sequence_probability, tensor, BlochVector, ComplexMatrix,
    DensityMatrix, Outcome, QmathError, C64,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AttackError {
    #[error("attack angle {0} outside [0, π/2]")]
    ThetaOutOfRange(f64),
    #[error("cheat fraction {0} outside [0, 1]")]
    FractionOutOfRange(f64),
    #[error("cheat device has no wiring for {party} setting {basis}")]
    Unwired { party: &'static str, basis: Basis },
    #[error("Eve cannot be told basis {0}")]
    NotAnnounceable(Basis),
    #[error(transparent)]
    Qmath(#[from] QmathError),
}

/// What the cheat device does when Bob picks a setting outside the two
/// designed bases (the `M±` test settings).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum CheatPolicy {
    /// Output a fresh uniformly random bit.
    #[default]
    UnwiredRandom,
    /// Measure Bob's particle of the X-correlated pair along the setting.
    MeasureXPair,
    /// Measure Bob's particle of the Y-correlated pair along the setting.
    MeasureYPair,
}

/// Eve's mixed strategy: channel strength `θ` on legitimate rounds and a
/// fraction `f` of rounds served by cheat devices.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AttackConfig {
    pub theta: f64,
    pub f: f64,
    pub cheat_policy: CheatPolicy,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            theta: 0.0,
            f: 0.0,
            cheat_policy: CheatPolicy::UnwiredRandom,
        }
    }
}

impl AttackConfig {
    pub fn new(theta: f64, f: f64, cheat_policy: CheatPolicy) -> Result<Self, AttackError> {
        let cfg = Self {
            theta,
            f,
            cheat_policy,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), AttackError> {
        check_theta(self.theta)?;
        if !(0.0..=1.0).contains(&self.f) {
            return Err(AttackError::FractionOutOfRange(self.f));
        }
        Ok(())
    }
}

pub(crate) fn check_theta(theta: f64) -> Result<(), AttackError> {
    if !(0.0..=core::f64::consts::FRAC_PI_2).contains(&theta) {
        return Err(AttackError::ThetaOutOfRange(theta));
    }
    Ok(())
}

/// Separable four-qubit state `¼ (Π_{aa} + Π_{āā})^{(12)} ⊗ (Π_{bb} + Π_{b̄b̄})^{(34)}`
/// plus the device wiring: Alice holds particles 1 and 3, Bob 2 and 4;
/// the first designed basis is read from pair (1,2), the second from (3,4).
#[derive(Debug, Clone, PartialEq)]
pub struct CheatState {
    state: DensityMatrix,
    basis_pair: BasisPair,
    policy: CheatPolicy,
}

/// Qubit sites (0-based) of particles 1..4.
const ALICE_SITES: [usize; 2] = [0, 2];
const BOB_SITES: [usize; 2] = [1, 3];

/// Builds the cheat state for the given pair of designed bases.
pub fn build_cheat_state(basis_pair: BasisPair) -> CheatState {
    let [first, second] = basis_pair.bases();
    let pair_mix = |b: Basis| {
        let plus = projector_of(&b.bloch(), Outcome::Plus);
        let minus = projector_of(&b.bloch(), Outcome::Minus);
        &tensor(plus.matrix(), plus.matrix()) + &tensor(minus.matrix(), minus.matrix())
    };
    let m = tensor(&pair_mix(first), &pair_mix(second)).scale_real(0.25);
    CheatState {
        state: DensityMatrix::new(m).expect("cheat state is a valid density matrix"),
        basis_pair,
        policy: CheatPolicy::UnwiredRandom,
    }
}

/// Outcome of one cheat-device round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheatOutcome {
    pub alice: Outcome,
    pub bob: Outcome,
    /// Eve holds the value of the pair Alice's device read.
    pub eve_knows: bool,
}

impl CheatState {
    pub fn with_policy(mut self, policy: CheatPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn state(&self) -> &DensityMatrix {
        &self.state
    }

    pub fn basis_pair(&self) -> BasisPair {
        self.basis_pair
    }

    pub fn policy(&self) -> CheatPolicy {
        self.policy
    }

    /// Site of the particle Alice's device reads for `basis`.
    pub fn alice_site(&self, basis: Basis) -> Option<usize> {
        self.basis_pair.position(basis).map(|i| ALICE_SITES[i])
    }

    /// Site of the particle Bob's device reads for `basis`, or `None` when
    /// the device answers at random.
    pub fn bob_site(&self, basis: Basis) -> Option<usize> {
        if let Some(i) = self.basis_pair.position(basis) {
            return Some(BOB_SITES[i]);
        }
        let wired = match self.policy {
            CheatPolicy::UnwiredRandom => None,
            CheatPolicy::MeasureXPair => Some(Basis::X),
            CheatPolicy::MeasureYPair => Some(Basis::Y),
        };
        wired
            .and_then(|b| self.basis_pair.position(b))
            .map(|i| BOB_SITES[i])
    }

    /// Joint distribution `P[α][β]` of Alice's and Bob's device outputs.
    pub fn joint_distribution(
        &self,
        alice: Basis,
        bob: Basis,
    ) -> Result<[[f64; 2]; 2], AttackError> {
        let a_site = self.alice_site(alice).ok_or(AttackError::Unwired {
            party: "alice",
            basis: alice,
        })?;
        let b_site = self.bob_site(bob);
        if b_site.is_none() && !bob.is_lgi_test() {
            return Err(AttackError::Unwired {
                party: "bob",
                basis: bob,
            });
        }
        let mut dist = [[0.0; 2]; 2];
        for a in Outcome::BOTH {
            let pa = projector_of(&alice.bloch(), a).embed(a_site, 4)?;
            match b_site {
                Some(site) => {
                    for b in Outcome::BOTH {
                        let pb = projector_of(&bob.bloch(), b).embed(site, 4)?;
                        dist[a.index()][b.index()] =
                            sequence_probability(self.state.matrix(), &[&pa, &pb]);
                    }
                }
                None => {
                    let p = sequence_probability(self.state.matrix(), &[&pa]);
                    dist[a.index()] = [0.5 * p, 0.5 * p];
                }
            }
        }
        Ok(dist)
    }
}

/// Picks a cell of a 2×2 joint distribution from one uniform draw in `[0,1)`.
pub(crate) fn sample_joint(dist: &[[f64; 2]; 2], u: f64) -> (Outcome, Outcome) {
    let mut acc = 0.0;
    for a in Outcome::BOTH {
        for b in Outcome::BOTH {
            acc += dist[a.index()][b.index()];
            if u < acc {
                return (a, b);
            }
        }
    }
    // only reachable through round-off when u is within 1e-16 of 1
    let mut last = (Outcome::Minus, Outcome::Minus);
    for a in Outcome::BOTH {
        for b in Outcome::BOTH {
            if dist[a.index()][b.index()] > 0.0 {
                last = (a, b);
            }
        }
    }
    last
}

/// Samples one round of the cheat devices.
pub fn cheat_round_outcomes<R: Rng + ?Sized>(
    cs: &CheatState,
    alice_setting: Basis,
    bob_setting: Basis,
    rng: &mut R,
) -> Result<CheatOutcome, AttackError> {
    let dist = cs.joint_distribution(alice_setting, bob_setting)?;
    let (alice, bob) = sample_joint(&dist, rng.gen::<f64>());
    Ok(CheatOutcome {
        alice,
        bob,
        eve_knows: true,
    })
}

/// Partial-swap interaction between the transmitted qubit and Eve's probe.
///
/// On the probe-in-`|0⟩` subspace `U|00⟩ = |00⟩` and
/// `U|10⟩ = cos θ|10⟩ + sin θ|01⟩`; it is completed by
/// `U|01⟩ = cos θ|01⟩ − sin θ|10⟩`, `U|11⟩ = |11⟩`.
/// Ordering is `|transmitted, probe⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelAttack {
    theta: f64,
    unitary: ComplexMatrix,
}

pub fn channel_unitary(theta: f64) -> Result<ChannelAttack, AttackError> {
    check_theta(theta)?;
    let (c, s) = (cos(theta), sin(theta));
    #[rustfmt::skip]
    let u = ComplexMatrix::from_real(4, &[
        1.0, 0.0, 0.0, 0.0,
        0.0, c,   s,   0.0,
        0.0, -s,  c,   0.0,
        0.0, 0.0, 0.0, 1.0,
    ])?;
    Ok(ChannelAttack { theta, unitary: u })
}

impl ChannelAttack {
    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn unitary(&self) -> &ComplexMatrix {
        &self.unitary
    }

    /// `U (ρ ⊗ |0⟩⟨0|) U†` on transmitted ⊗ probe.
    pub fn joint_state(&self, input: &DensityMatrix) -> Result<DensityMatrix, AttackError> {
        let probe = DensityMatrix::eigenstate(&BlochVector::Z, Outcome::Plus);
        let joint = input.tensor(&probe)?;
        Ok(DensityMatrix::new(self.unitary.sandwich(joint.matrix()))?)
    }

    /// Bob's and Eve's marginals after the interaction.
    pub fn apply(
        &self,
        input: &DensityMatrix,
    ) -> Result<(DensityMatrix, DensityMatrix), AttackError> {
        let joint = self.joint_state(input)?;
        let bob = partial_trace(&joint, &[2, 2], &[0])?;
        let eve = partial_trace(&joint, &[2, 2], &[1])?;
        Ok((bob, eve))
    }
}

/// Sends `psi` through the channel attack of strength `theta`.
pub fn apply_channel_attack(
    psi: &DensityMatrix,
    theta: f64,
) -> Result<(DensityMatrix, DensityMatrix), AttackError> {
    if psi.dim() != 2 {
        return Err(QmathError::DimensionMismatch {
            left: psi.dim(),
            right: 2,
        }
        .into());
    }
    channel_unitary(theta)?.apply(psi)
}

/// Eve measures her probe in the basis Alice announced.
pub fn eve_optimal_probe_basis(announced: Basis) -> Result<BlochVector, AttackError> {
    match announced {
        Basis::X | Basis::Y | Basis::Z => Ok(announced.bloch()),
        other => Err(AttackError::NotAnnounceable(other)),
    }
}

/// `⟨ξ| (τ'⁺ − τ'⁻) |ξ⟩` for Eve's probe after an X-basis transmission,
/// with `|ξ⟩ = α|0⟩ + √(1−α²) e^{iγ}|1⟩`.
pub fn probe_discrimination(theta: f64, alpha: f64, gamma: f64) -> Result<f64, AttackError> {
    let attack = channel_unitary(theta)?;
    let plus = DensityMatrix::eigenstate(&BlochVector::X, Outcome::Plus);
    let minus = DensityMatrix::eigenstate(&BlochVector::X, Outcome::Minus);
    let (_, eve_plus) = attack.apply(&plus)?;
    let (_, eve_minus) = attack.apply(&minus)?;
    let diff = eve_plus.matrix() - eve_minus.matrix();
    let beta = sqrt((1.0 - alpha * alpha).max(0.0));
    let xi = [
        C64::new(alpha, 0.0),
        C64::new(beta * cos(gamma), beta * sin(gamma)),
    ];
    let dxi = diff.apply(&xi);
    let v: C64 = xi.iter().zip(&dxi).map(|(a, b)| a.conj() * b).sum();
    debug_assert!(abs(v.im) < 1e-12);
    Ok(v.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4};

    fn ket(v: [f64; 4]) -> [C64; 4] {
        v.map(|x| C64::new(x, 0.0))
    }

    #[test]
    fn zx_cheat_state_is_valid_and_marginal_is_z_correlated() {
        let cs = build_cheat_state(BasisPair::ZX);
        let rho = cs.state();
        assert!((rho.matrix().trace().re - 1.0).abs() < 1e-14);
        assert!(rho.matrix().is_hermitian(1e-15));
        let evs = rho.matrix().hermitian_eigenvalues().unwrap();
        assert!(evs[0] > -1e-12);

        let m12 = partial_trace(rho, &[2, 2, 2, 2], &[0, 1]).unwrap();
        let expect = ComplexMatrix::diag(&[0.5, 0.0, 0.0, 0.5]);
        assert!(m12.matrix().approx_eq(&expect, 1e-15));
    }

    #[test]
    fn matched_bases_are_perfectly_correlated() {
        for pair in [BasisPair::ZX, BasisPair::XY] {
            let cs = build_cheat_state(pair);
            for b in pair.bases() {
                let d = cs.joint_distribution(b, b).unwrap();
                assert!((d[0][0] - 0.5).abs() < 1e-14);
                assert!((d[1][1] - 0.5).abs() < 1e-14);
                assert!(d[0][1].abs() < 1e-14 && d[1][0].abs() < 1e-14);
            }
            let [a, b] = pair.bases();
            let d = cs.joint_distribution(a, b).unwrap();
            for row in d {
                for p in row {
                    assert!((p - 0.25).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn m_settings_under_each_policy() {
        let corr = |d: [[f64; 2]; 2]| d[0][0] + d[1][1] - d[0][1] - d[1][0];
        let lambda = |cs: &CheatState| {
            let e = |a, b| corr(cs.joint_distribution(a, b).unwrap());
            e(Basis::X, Basis::MPlus) + e(Basis::X, Basis::MMinus) + e(Basis::Y, Basis::MPlus)
                - e(Basis::Y, Basis::MMinus)
        };
        let cs = build_cheat_state(BasisPair::XY);
        assert!(lambda(&cs).abs() < 1e-14);

        let x_wired = cs.clone().with_policy(CheatPolicy::MeasureXPair);
        let e = corr(x_wired.joint_distribution(Basis::X, Basis::MPlus).unwrap());
        assert!((e - FRAC_1_SQRT_2).abs() < 1e-14);
        let e = corr(x_wired.joint_distribution(Basis::Y, Basis::MPlus).unwrap());
        assert!(e.abs() < 1e-14);
        assert!((lambda(&x_wired).abs() - 2f64.sqrt()).abs() < 1e-12);

        let y_wired = cs.with_policy(CheatPolicy::MeasureYPair);
        assert!((lambda(&y_wired).abs() - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn unwired_settings_are_errors() {
        let cs = build_cheat_state(BasisPair::ZX);
        assert!(matches!(
            cs.joint_distribution(Basis::Y, Basis::X),
            Err(AttackError::Unwired { party: "alice", .. })
        ));
        assert!(matches!(
            cs.joint_distribution(Basis::Z, Basis::Y),
            Err(AttackError::Unwired { party: "bob", .. })
        ));
    }

    #[test]
    fn unitary_examples() {
        let u0 = channel_unitary(0.0).unwrap();
        assert!(u0.unitary().approx_eq(&ComplexMatrix::identity(4), 0.0));

        let u = channel_unitary(FRAC_PI_2).unwrap();
        let out = u.unitary().apply(&ket([0.0, 0.0, 1.0, 0.0]));
        let expect = ket([0.0, 1.0, 0.0, 0.0]);
        for (a, b) in out.iter().zip(&expect) {
            assert!((a - b).norm() < 1e-15);
        }

        let u = channel_unitary(FRAC_PI_4).unwrap();
        let out = u.unitary().apply(&ket([0.0, 0.0, 1.0, 0.0]));
        let expect = ket([0.0, FRAC_1_SQRT_2, FRAC_1_SQRT_2, 0.0]);
        for (a, b) in out.iter().zip(&expect) {
            assert!((a - b).norm() < 1e-15);
        }
        assert_eq!(
            u.unitary().apply(&ket([1.0, 0.0, 0.0, 0.0])),
            ket([1.0, 0.0, 0.0, 0.0]).to_vec()
        );
    }

    #[test]
    fn theta_out_of_range() {
        assert!(matches!(
            channel_unitary(-0.1),
            Err(AttackError::ThetaOutOfRange(_))
        ));
        assert!(matches!(
            channel_unitary(1.6),
            Err(AttackError::ThetaOutOfRange(_))
        ));
        assert!(AttackConfig::new(0.1, 1.2, CheatPolicy::UnwiredRandom).is_err());
    }

    #[test]
    fn attack_extremes() {
        let plus = DensityMatrix::eigenstate(&BlochVector::X, Outcome::Plus);
        let zero = DensityMatrix::eigenstate(&BlochVector::Z, Outcome::Plus);
        let (bob, eve) = apply_channel_attack(&plus, 0.0).unwrap();
        assert!(bob.matrix().approx_eq(plus.matrix(), 1e-15));
        assert!(eve.matrix().approx_eq(zero.matrix(), 1e-15));
        let (bob, eve) = apply_channel_attack(&plus, FRAC_PI_2).unwrap();
        assert!(bob.matrix().approx_eq(zero.matrix(), 1e-15));
        assert!(eve.matrix().approx_eq(plus.matrix(), 1e-15));
    }

    #[test]
    fn probe_basis() {
        assert_eq!(eve_optimal_probe_basis(Basis::X).unwrap(), BlochVector::X);
        assert_eq!(eve_optimal_probe_basis(Basis::Y).unwrap(), BlochVector::Y);
        assert!(eve_optimal_probe_basis(Basis::MPlus).is_err());
    }

    #[test]
    fn sampling_respects_distribution_edges() {
        let d = [[0.0, 0.0], [0.0, 1.0]];
        assert_eq!(sample_joint(&d, 0.0), (Outcome::Minus, Outcome::Minus));
        assert_eq!(sample_joint(&d, 1.0), (Outcome::Minus, Outcome::Minus));
        let d = [[0.5, 0.0], [0.0, 0.5]];
        assert_eq!(sample_joint(&d, 0.49), (Outcome::Plus, Outcome::Plus));
        assert_eq!(sample_joint(&d, 0.51), (Outcome::Minus, Outcome::Minus));
    }
}

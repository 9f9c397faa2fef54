//! Closed-form error rates, Leggett-Garg values, mutual informations and
//! one-way key rate of LG-BB84 under the combined attack, plus inversion of
//! the observed `(e, Λ)` back to the attack parameters and the secure
//! threshold on the error rate.
//!
//! Notation: `θ` is the channel-attack strength, `f` the fraction of
//! cheat-device rounds. `e_ab` is the Alice–Bob error of the channel attack
//! alone and `e_prime_ab = (1 − f) e_ab` the error Alice and Bob observe.

use alloc::vec::Vec;

use thiserror::Error;

use crate::attacks::check_theta;
use crate::math::{abs, acos, cos, log2, sin, sqrt, TWO_SQRT_2};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("probability {0} outside [0, 1]")]
    ProbabilityOutOfRange(f64),
    #[error("attack angle {0} outside [0, π/2]")]
    ThetaOutOfRange(f64),
    #[error("cheat fraction {0} outside the allowed range")]
    FractionOutOfRange(f64),
    #[error("inconsistent observations: e = {e}, Λ = {lambda} is outside the attack model")]
    InconsistentObservations { e: f64, lambda: f64 },
    #[error("no positive-rate region for f = {0}")]
    NoPositiveRateRegion(f64),
    #[error("need at least {min} grid points, got {got}")]
    TooFewPoints { min: usize, got: usize },
}

/// `H(p) = −p log₂ p − (1−p) log₂(1−p)`, with `H(0) = H(1) = 0`.
pub fn binary_entropy(p: f64) -> Result<f64, AnalysisError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(AnalysisError::ProbabilityOutOfRange(p));
    }
    let term = |q: f64| if q <= 0.0 { 0.0 } else { -q * log2(q) };
    Ok(term(p) + term(1.0 - p))
}

/// Every closed-form quantity at one `(θ, f)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RatePoint {
    pub theta: f64,
    pub f: f64,
    pub e_ab: f64,
    pub e_prime_ab: f64,
    pub e_ae: f64,
    /// Closed form `(1 − sin 2θ)/2` used for `I_BE`.
    pub e_be: f64,
    /// `e_ab(1 − e_ae) + (1 − e_ab)e_ae`, the Bob–Eve error of independent
    /// flips; equals `(1 − ½ sin 2θ)/2` and is what a joint measurement gives.
    pub e_be_composed: f64,
    pub lambda_ab: f64,
    pub lambda_ae: f64,
    pub i_ab: f64,
    pub i_ae: f64,
    pub i_be: f64,
    /// `I_AB − min(I_AE, I_BE)`
    pub k: f64,
}

fn check_inputs(theta: f64, f: f64) -> Result<(), AnalysisError> {
    check_theta(theta).map_err(|_| AnalysisError::ThetaOutOfRange(theta))?;
    if !(0.0..=1.0).contains(&f) {
        return Err(AnalysisError::FractionOutOfRange(f));
    }
    Ok(())
}

/// Channel-only error rates `(e_ab, e_ae, e_be)`.
fn channel_errors(theta: f64) -> (f64, f64, f64) {
    let e_ab = 0.5 * (1.0 - cos(theta));
    let e_ae = 0.5 * (1.0 - sin(theta));
    let e_be = 0.5 * (1.0 - sin(2.0 * theta));
    debug_assert!(abs(e_ab - sin(theta / 2.0) * sin(theta / 2.0)) < 1e-15);
    (e_ab, e_ae, e_be)
}

pub fn closed_form_rates(theta: f64, f: f64) -> Result<RatePoint, AnalysisError> {
    check_inputs(theta, f)?;
    let (e_ab, e_ae, e_be) = channel_errors(theta);
    let e_prime_ab = (1.0 - f) * e_ab;
    let i_ab = 1.0 - binary_entropy(e_prime_ab)?;
    let i_ae = (1.0 - f) * (1.0 - binary_entropy(e_ae)?) + f;
    let i_be = (1.0 - f) * (1.0 - binary_entropy(e_be)?) + f;
    Ok(RatePoint {
        theta,
        f,
        e_ab,
        e_prime_ab,
        e_ae,
        e_be,
        e_be_composed: e_ab * (1.0 - e_ae) + (1.0 - e_ab) * e_ae,
        lambda_ab: TWO_SQRT_2 * cos(theta) * (1.0 - f),
        lambda_ae: TWO_SQRT_2 * sin(theta),
        i_ab,
        i_ae,
        i_be,
        k: i_ab - i_ae.min(i_be),
    })
}

/// `(I_AB, I_AE, I_BE)` in bits per sifted bit.
pub fn mutual_informations(theta: f64, f: f64) -> Result<(f64, f64, f64), AnalysisError> {
    let r = closed_form_rates(theta, f)?;
    Ok((r.i_ab, r.i_ae, r.i_be))
}

/// One-way key rate `K = I_AB − min(I_AE, I_BE)`; positive means secure.
pub fn key_rate(theta: f64, f: f64) -> Result<f64, AnalysisError> {
    Ok(closed_form_rates(theta, f)?.k)
}

/// Attack parameters recovered from observations.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AttackEstimate {
    pub theta: f64,
    pub f: f64,
}

/// Inverts `e' = (1−f)(1−cos θ)/2`, `Λ = 2√2 cos θ (1−f)`:
/// `1 − f = 2e' + Λ/(2√2)` and `cos θ = Λ / (2√2 (1 − f))`.
pub fn estimate_attack(e_obs: f64, lambda_obs: f64) -> Result<AttackEstimate, AnalysisError> {
    let inconsistent = AnalysisError::InconsistentObservations {
        e: e_obs,
        lambda: lambda_obs,
    };
    if !(0.0..=0.5).contains(&e_obs) || !(0.0..=TWO_SQRT_2).contains(&lambda_obs) {
        return Err(inconsistent);
    }
    let g = 2.0 * e_obs + lambda_obs / TWO_SQRT_2;
    if !(g > 0.0 && g <= 1.0 + 1e-12) {
        return Err(inconsistent);
    }
    let g = g.min(1.0);
    let c = lambda_obs / (TWO_SQRT_2 * g);
    if c > 1.0 + 1e-12 {
        return Err(inconsistent);
    }
    Ok(AttackEstimate {
        theta: acos(c.clamp(0.0, 1.0)),
        f: 1.0 - g,
    })
}

/// [`estimate_attack`] for noisy observations. Points within `z`
/// standard errors of the feasible region are projected onto it;
/// anything further out is inconsistent.
pub fn estimate_attack_noisy(
    e_obs: f64,
    e_std: f64,
    lambda_obs: f64,
    lambda_std: f64,
    z: f64,
) -> Result<AttackEstimate, AnalysisError> {
    let inconsistent = AnalysisError::InconsistentObservations {
        e: e_obs,
        lambda: lambda_obs,
    };
    if e_obs < -z * e_std
        || e_obs > 0.5 + z * e_std
        || lambda_obs < -z * lambda_std
        || lambda_obs > TWO_SQRT_2 + z * lambda_std
    {
        return Err(inconsistent);
    }
    let e = e_obs.clamp(0.0, 0.5);
    let lambda = lambda_obs.clamp(0.0, TWO_SQRT_2);
    let g = 2.0 * e + lambda / TWO_SQRT_2;
    let g_std = sqrt(4.0 * e_std * e_std + lambda_std * lambda_std / 8.0);
    if g > 1.0 + z * g_std + 1e-12 || !g.is_finite() {
        return Err(inconsistent);
    }
    if g <= 1e-12 {
        // every round came from the cheat devices; θ is unobservable
        return Ok(AttackEstimate { theta: 0.0, f: 1.0 });
    }
    let g = g.min(1.0);
    let c = lambda / (TWO_SQRT_2 * g);
    let c_std = lambda_std / (TWO_SQRT_2 * g);
    if c > 1.0 + z * c_std + 1e-12 {
        return Err(inconsistent);
    }
    Ok(AttackEstimate {
        theta: acos(c.clamp(0.0, 1.0)),
        f: 1.0 - g,
    })
}

/// Where the key rate first reaches zero for a given `f`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Threshold {
    pub f: f64,
    pub theta: f64,
    pub e_ab: f64,
    pub e_prime_ab: f64,
    pub lambda_ab: f64,
}

/// Number of points in the scan that brackets the first root of `K(θ)`.
const THRESHOLD_SCAN: usize = 256;
const THRESHOLD_TOL: f64 = 1e-12;

/// Smallest `θ` with `K(θ, f) = 0`.
///
/// `K` is not monotone on all of `[0, π/2]` (at `f = 0` it comes back up
/// to zero at `π/2`), so a coarse scan first brackets the first sign change
/// and bisection then refines it.
pub fn security_threshold(f: f64) -> Result<Threshold, AnalysisError> {
    if !(0.0..1.0).contains(&f) {
        return Err(AnalysisError::FractionOutOfRange(f));
    }
    let k = |t: f64| key_rate(t, f).expect("inputs validated");
    if k(0.0) <= 0.0 {
        return Err(AnalysisError::NoPositiveRateRegion(f));
    }
    let step = core::f64::consts::FRAC_PI_2 / THRESHOLD_SCAN as f64;
    let mut bracket = None;
    for i in 1..=THRESHOLD_SCAN {
        let t = (i as f64 * step).min(core::f64::consts::FRAC_PI_2);
        if k(t) <= 0.0 {
            bracket = Some(((i - 1) as f64 * step, t));
            break;
        }
    }
    let (mut lo, mut hi) = bracket.ok_or(AnalysisError::NoPositiveRateRegion(f))?;
    while hi - lo > THRESHOLD_TOL {
        let mid = 0.5 * (lo + hi);
        if k(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let theta = 0.5 * (lo + hi);
    let r = closed_form_rates(theta, f)?;
    Ok(Threshold {
        f,
        theta,
        e_ab: r.e_ab,
        e_prime_ab: r.e_prime_ab,
        lambda_ab: r.lambda_ab,
    })
}

/// One point on the error-rate curves: `e` is the observed error `e'_AB`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Fig2Row {
    pub f: f64,
    pub theta: f64,
    pub e: f64,
    pub e_ab: f64,
    pub lambda: f64,
    pub k: f64,
}

/// `points` evenly spaced `θ ∈ [0, π/2]` for every `f`, rows grouped by `f`.
pub fn fig2_data(f_values: &[f64], points: usize) -> Result<Vec<Fig2Row>, AnalysisError> {
    if points < 2 {
        return Err(AnalysisError::TooFewPoints {
            min: 2,
            got: points,
        });
    }
    let mut rows = Vec::with_capacity(f_values.len() * points);
    for &f in f_values {
        for i in 0..points {
            let theta = core::f64::consts::FRAC_PI_2 * i as f64 / (points - 1) as f64;
            let r = closed_form_rates(theta, f)?;
            rows.push(Fig2Row {
                f,
                theta,
                e: r.e_prime_ab,
                e_ab: r.e_ab,
                lambda: r.lambda_ab,
                k: r.k,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::FRAC_PI_4;

    // sin²(π/8), written out independently of the code under test
    const E_STAR: f64 = 0.146_446_609_406_726_24;

    #[test]
    fn entropy_examples() {
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        // natural-log form evaluated separately: 0.600884659...
        assert!((binary_entropy(0.14645).unwrap() - 0.600_884_659).abs() < 1e-8);
        assert!(binary_entropy(-0.1).is_err());
        assert!(binary_entropy(1.1).is_err());
    }

    #[test]
    fn rates_at_no_attack() {
        let r = closed_form_rates(0.0, 0.0).unwrap();
        assert_eq!(r.e_ab, 0.0);
        assert_eq!(r.e_ae, 0.5);
        assert!((r.lambda_ab - 2.0 * 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(r.i_ab, 1.0);
        assert_eq!(r.i_ae, 0.0);
        assert_eq!(r.k, 1.0);
    }

    #[test]
    fn rates_at_pi_over_four() {
        let r = closed_form_rates(FRAC_PI_4, 0.0).unwrap();
        assert!((r.e_ab - E_STAR).abs() < 1e-15);
        assert!((r.e_ae - E_STAR).abs() < 1e-15);
        assert!(r.e_be.abs() < 1e-15);
        assert!((r.lambda_ab - 2.0).abs() < 1e-14);
        assert!((r.lambda_ae - 2.0).abs() < 1e-14);
        assert!(r.k.abs() < 1e-12);

        let r = closed_form_rates(FRAC_PI_4, 0.2).unwrap();
        assert!((r.e_prime_ab - 0.8 * E_STAR).abs() < 1e-15);
        assert!((r.lambda_ab - 1.6).abs() < 1e-14);
    }

    #[test]
    fn key_rate_examples() {
        assert!(key_rate(FRAC_PI_4, 0.0).unwrap().abs() < 1e-12);
        assert_eq!(key_rate(0.0, 0.0).unwrap(), 1.0);
        // I_AB = 1 − H(0.8·sin²(π/8)) ≈ 0.47886; I_AE ≈ 0.8·0.39912 + 0.2 ≈ 0.51929
        let r = closed_form_rates(FRAC_PI_4, 0.2).unwrap();
        assert!((r.i_ab - 0.478_86).abs() < 1e-4);
        assert!((r.i_ae - 0.519_29).abs() < 1e-4);
        assert!(r.k < 0.0);
    }

    #[test]
    fn full_cheat_gives_eve_everything() {
        let (i_ab, i_ae, i_be) = mutual_informations(0.7, 1.0).unwrap();
        assert_eq!((i_ab, i_ae, i_be), (1.0, 1.0, 1.0));
    }

    #[test]
    fn out_of_range_inputs() {
        assert!(closed_form_rates(-0.1, 0.0).is_err());
        assert!(closed_form_rates(0.1, 1.5).is_err());
        assert!(security_threshold(1.0).is_err());
    }

    #[test]
    fn inversion_examples() {
        let est = estimate_attack(E_STAR, 2.0).unwrap();
        assert!((est.theta - FRAC_PI_4).abs() < 1e-7);
        assert!(est.f.abs() < 1e-12);
        let est = estimate_attack(0.0, 2.0 * 2f64.sqrt()).unwrap();
        assert_eq!((est.theta, est.f), (0.0, 0.0));
        let est = estimate_attack(0.8 * E_STAR, 1.6).unwrap();
        assert!((est.theta - FRAC_PI_4).abs() < 1e-7);
        assert!((est.f - 0.2).abs() < 1e-12);
    }

    #[test]
    fn inversion_rejects_infeasible() {
        // too much error for the observed violation
        assert!(matches!(
            estimate_attack(0.4, 2.5),
            Err(AnalysisError::InconsistentObservations { .. })
        ));
        assert!(estimate_attack(0.0, 0.0).is_err());
        assert!(estimate_attack(0.6, 1.0).is_err());
    }

    #[test]
    fn noisy_inversion_projects_nearby_points() {
        let est = estimate_attack_noisy(0.0, 0.0, 2.84, 0.01, 3.0).unwrap();
        assert_eq!(est.f, 0.0);
        assert_eq!(est.theta, 0.0);
        assert!(estimate_attack_noisy(0.0, 0.0, 3.2, 0.01, 3.0).is_err());
        let est = estimate_attack_noisy(0.0, 0.0, -0.002, 0.002, 3.0).unwrap();
        assert_eq!((est.theta, est.f), (0.0, 1.0));
    }

    #[test]
    fn threshold_at_zero_fraction() {
        let t = security_threshold(0.0).unwrap();
        assert!((t.theta - FRAC_PI_4).abs() < 1e-9);
        assert!((t.e_ab - E_STAR).abs() < 1e-6);
    }

    #[test]
    fn threshold_with_cheat_fraction() {
        let t = security_threshold(0.2).unwrap();
        assert!((0.104..=0.114).contains(&t.e_prime_ab), "{t:?}");
        assert!(key_rate(t.theta, 0.2).unwrap().abs() < 1e-9);
        let t = security_threshold(0.999).unwrap();
        assert!(t.e_prime_ab < 1e-3);
    }

    #[test]
    fn error_rate_identities() {
        for i in 0..=100 {
            let t = core::f64::consts::FRAC_PI_2 * i as f64 / 100.0;
            let r = closed_form_rates(t, 0.3).unwrap();
            assert!((r.e_ab - (t / 2.0).sin().powi(2)).abs() < 1e-15);
            assert!((r.lambda_ab.powi(2) / 0.49 + r.lambda_ae.powi(2) - 8.0).abs() < 1e-12);
            assert!((r.e_be_composed - 0.5 * (1.0 - 0.5 * (2.0 * t).sin())).abs() < 1e-15);
        }
    }

    #[test]
    fn inversion_round_trips() {
        for i in 0..40 {
            for j in 0..10 {
                let t = 0.01 + 1.5 * i as f64 / 40.0;
                let f = 0.09 * j as f64;
                let r = closed_form_rates(t, f).unwrap();
                let est = estimate_attack(r.e_prime_ab, r.lambda_ab).unwrap();
                assert!((est.theta - t).abs() < 1e-10, "{t} {f} {est:?}");
                assert!((est.f - f).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn key_rate_decreases_with_fraction() {
        for i in 1..=20 {
            let t = FRAC_PI_4 * i as f64 / 20.0;
            let mut prev = key_rate(t, 0.0).unwrap();
            for j in 1..=50 {
                let k = key_rate(t, 0.01 * j as f64).unwrap();
                assert!(k <= prev + 1e-12, "θ={t} f={}", 0.01 * j as f64);
                prev = k;
            }
        }
    }

    #[test]
    fn fig2_shapes() {
        let rows = fig2_data(&[0.0, 0.2], 9).unwrap();
        assert_eq!(rows.len(), 18);
        assert_eq!(rows[0].e, 0.0);
        assert!((rows[0].lambda - 2.0 * 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(rows[0].k, 1.0);
        for i in 0..9 {
            assert!((rows[9 + i].lambda - 0.8 * rows[i].lambda).abs() < 1e-15);
            assert!(rows[9 + i].lambda <= rows[i].lambda);
        }
        assert!(rows[..9].windows(2).all(|w| w[1].e > w[0].e));
        assert!(fig2_data(&[0.0], 1).is_err());
    }
}

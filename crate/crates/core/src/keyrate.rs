//! Reverse-reconciliation secret key rates.
//!
//! Per supermode the rate is `η_r I(A:B) - χ(E:B)`. Eve's Holevo
//! information is computed from the state shared by Alice and Bob, assuming
//! she holds its purification: `χ = S(A B2) - S(A C1 D | B3)`.

use serde::{Deserialize, Serialize};

use crate::channel::{evolve, ChannelParams, DetectorParams, PipelineCms, MODE_A};
use crate::error::{Error, Result};
use crate::gaussian::{entropy_g, symplectic_eigenvalues, TwoModeCm};
use crate::ops::{combined_probability, OpOutcome};

/// Tolerance below zero accepted for χ before it is treated as a failure.
pub const HOLEVO_TOL: f64 = 1e-9;

/// Defaults for the noise and efficiency parameters.
pub const DEFAULT_EPSILON: f64 = 0.1;
pub const DEFAULT_NU: f64 = 1.1;
pub const DEFAULT_ETA_D: f64 = 0.68;
pub const DEFAULT_ETA_R: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateParams {
    /// Reconciliation efficiency.
    pub eta_r: f64,
    /// Alice can store heralded states, so heralding probability does not
    /// scale the rate.
    pub memory: bool,
}

impl RateParams {
    pub fn new(eta_r: f64, memory: bool) -> Result<Self> {
        if !(eta_r > 0.0 && eta_r <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "eta_r",
                value: eta_r,
            });
        }
        Ok(Self { eta_r, memory })
    }
}

impl Default for RateParams {
    fn default() -> Self {
        Self {
            eta_r: DEFAULT_ETA_R,
            memory: true,
        }
    }
}

/// Rate breakdown for one supermode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubchannelRate {
    pub rate: f64,
    pub mutual_info: f64,
    pub holevo: f64,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyRateResult {
    pub per_mode_rates: Vec<f64>,
    pub per_mode_probs: Vec<f64>,
    pub mutual_info: Vec<f64>,
    pub holevo: Vec<f64>,
    /// Product of the heralding probabilities.
    pub success_probability: f64,
    pub total: f64,
}

/// `½ log2(V_A / V_{A|B})` read off the pipeline matrices.
pub fn mutual_information(pipeline: &PipelineCms) -> Result<f64> {
    let v_a = pipeline.pre_measurement.get(2 * MODE_A, 2 * MODE_A);
    let v_cond = pipeline.conditional.get(0, 0);
    if !(v_cond > 0.0 && v_a > 0.0) {
        return Err(Error::UnphysicalPipeline(format!(
            "conditional variance {v_cond}, unconditional {v_a}"
        )));
    }
    Ok(0.5 * (v_a / v_cond).log2())
}

/// Closed-form mutual information in terms of the post-operation CM and the
/// channel and detector parameters.
pub fn mutual_information_closed_form(
    cm: TwoModeCm,
    ch: ChannelParams,
    det: DetectorParams,
) -> f64 {
    let TwoModeCm { a, b, c } = cm;
    let ChannelParams { eta_e, epsilon } = ch;
    let DetectorParams { eta_d, nu } = det;
    let noise = eta_d * ((1.0 - eta_e) + eta_e * epsilon) + (1.0 - eta_d) * nu;
    let ratio = eta_d * eta_e * c * c / (eta_d * eta_e * a * b + noise * a);
    -0.5 * (-ratio).ln_1p() / std::f64::consts::LN_2
}

/// Holevo bound before the tolerance clamp.
pub fn holevo_bound_raw(pipeline: &PipelineCms) -> Result<f64> {
    let (plus, minus) = pipeline.after_channel.symplectic_pair();
    let unconditional = entropy_g(plus)? + entropy_g(minus)?;
    let conditional = symplectic_eigenvalues(&pipeline.conditional)?.entropy()?;
    Ok(unconditional - conditional)
}

/// Holevo bound `Σ g(α_{1,2}) - Σ g(α_{3,4,5})`, with rounding noise in
/// `[-HOLEVO_TOL, 0)` snapped to 0.
pub fn holevo_bound(pipeline: &PipelineCms) -> Result<f64> {
    let chi = holevo_bound_raw(pipeline)?;
    if chi >= 0.0 {
        Ok(chi)
    } else if chi >= -HOLEVO_TOL {
        Ok(0.0)
    } else {
        Err(Error::UnphysicalPipeline(format!(
            "negative Holevo bound {chi}"
        )))
    }
}

pub fn subchannel_rate(
    outcome: &OpOutcome,
    ch: ChannelParams,
    det: DetectorParams,
    rate: RateParams,
) -> Result<SubchannelRate> {
    let pipeline = evolve(outcome.cm, ch, det)?;
    let mutual_info = mutual_information(&pipeline)?;
    let holevo = holevo_bound(&pipeline)?;
    Ok(SubchannelRate {
        rate: rate.eta_r * mutual_info - holevo,
        mutual_info,
        holevo,
        probability: outcome.probability,
    })
}

/// Combines per-mode rates. With memory the total is `Σ f(R_k)`, otherwise
/// it is scaled by the joint heralding probability; `f` is `max(R, 0)` when
/// `clamp` is set and the identity otherwise.
pub fn combine(rates: &[SubchannelRate], memory: bool, clamp: bool) -> KeyRateResult {
    let f = |r: f64| if clamp { r.max(0.0) } else { r };
    // Fixed ascending-k summation order.
    let sum: f64 = rates.iter().map(|s| f(s.rate)).sum();
    let success_probability: f64 = rates.iter().map(|s| s.probability).product();
    let total = if memory {
        sum
    } else {
        success_probability * sum
    };
    KeyRateResult {
        per_mode_rates: rates.iter().map(|s| s.rate).collect(),
        per_mode_probs: rates.iter().map(|s| s.probability).collect(),
        mutual_info: rates.iter().map(|s| s.mutual_info).collect(),
        holevo: rates.iter().map(|s| s.holevo).collect(),
        success_probability,
        total,
    }
}

pub fn total_rate(
    outcomes: &[OpOutcome],
    ch: ChannelParams,
    det: DetectorParams,
    rate: RateParams,
    clamp: bool,
) -> Result<KeyRateResult> {
    let rates = outcomes
        .iter()
        .map(|o| subchannel_rate(o, ch, det, rate))
        .collect::<Result<Vec<_>>>()?;
    let result = combine(&rates, rate.memory, clamp);
    debug_assert!((result.success_probability - combined_probability(outcomes)).abs() <= 1e-15);
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::{apply_op, NonGaussianOp, OpKind};
    use crate::source::epr_cm;
    use approx::assert_abs_diff_eq;

    fn defaults(loss_db: f64) -> (ChannelParams, DetectorParams) {
        (
            ChannelParams::from_loss_db(loss_db, DEFAULT_EPSILON).unwrap(),
            DetectorParams::new(DEFAULT_ETA_D, DEFAULT_NU).unwrap(),
        )
    }

    fn epr_outcome(r: f64) -> OpOutcome {
        OpOutcome {
            cm: epr_cm(r).unwrap(),
            probability: 1.0,
        }
    }

    #[test]
    fn uncorrelated_modes_share_nothing() {
        let (ch, det) = defaults(5.0);
        let p = evolve(TwoModeCm::new(2.0, 3.0, 0.0), ch, det).unwrap();
        assert_eq!(mutual_information(&p).unwrap(), 0.0);
    }

    #[test]
    fn ideal_system_mutual_information() {
        let ch = ChannelParams::new(1.0, 0.0).unwrap();
        let det = DetectorParams::ideal();
        for r in [0.3, 1.0, 1.7] {
            let p = evolve(epr_cm(r).unwrap(), ch, det).unwrap();
            let expected = (2.0 * r).cosh().log2();
            assert_abs_diff_eq!(mutual_information(&p).unwrap(), expected, epsilon = 1e-12);
            let chi = holevo_bound_raw(&p).unwrap();
            assert!(chi.abs() < 1e-9, "chi = {chi}");
            let sub = subchannel_rate(
                &epr_outcome(r),
                ch,
                det,
                RateParams::new(1.0, true).unwrap(),
            )
            .unwrap();
            assert_abs_diff_eq!(sub.rate, expected, epsilon = 1e-9);
        }
    }

    #[test]
    fn closed_form_matches_pipeline() {
        let (ch, det) = defaults(10.0);
        let cm = epr_cm(1.0).unwrap();
        let p = evolve(cm, ch, det).unwrap();
        assert_abs_diff_eq!(
            mutual_information(&p).unwrap(),
            mutual_information_closed_form(cm, ch, det),
            epsilon = 1e-12
        );
    }

    #[test]
    fn vacuum_mode_on_pure_loss_channel_is_silent() {
        let ch = ChannelParams::from_loss_db(10.0, 0.0).unwrap();
        let det = DetectorParams::new(DEFAULT_ETA_D, DEFAULT_NU).unwrap();
        let sub = subchannel_rate(&epr_outcome(0.0), ch, det, RateParams::default()).unwrap();
        assert_eq!(sub.mutual_info, 0.0);
        assert!(sub.holevo.abs() < 1e-9);
        assert!(sub.rate.abs() < 1e-9);
    }

    #[test]
    fn holevo_increases_with_excess_noise() {
        let det = DetectorParams::new(DEFAULT_ETA_D, DEFAULT_NU).unwrap();
        let mut prev = -1.0;
        for i in 0..20 {
            let ch = ChannelParams::new(0.3, 0.02 * i as f64).unwrap();
            let chi = holevo_bound(&evolve(epr_cm(1.0).unwrap(), ch, det).unwrap()).unwrap();
            assert!(chi > prev);
            prev = chi;
        }
    }

    #[test]
    fn combination_rules() {
        let (ch, det) = defaults(10.0);
        let outcomes = [
            apply_op(NonGaussianOp::new(OpKind::PS1, 0.9).unwrap(), 1.0).unwrap(),
            epr_outcome(0.6),
            epr_outcome(0.0),
        ];
        let mem = total_rate(
            &outcomes,
            ch,
            det,
            RateParams::new(0.95, true).unwrap(),
            true,
        )
        .unwrap();
        let nomem = total_rate(
            &outcomes,
            ch,
            det,
            RateParams::new(0.95, false).unwrap(),
            true,
        )
        .unwrap();
        let expected: f64 = mem.per_mode_rates.iter().map(|r| r.max(0.0)).sum();
        assert_abs_diff_eq!(mem.total, expected, epsilon = 1e-15);
        assert_abs_diff_eq!(
            nomem.total,
            mem.total * outcomes[0].probability,
            epsilon = 1e-15
        );
        assert!(nomem.total <= mem.total);

        let raw = total_rate(
            &outcomes,
            ch,
            det,
            RateParams::new(0.95, true).unwrap(),
            false,
        )
        .unwrap();
        assert_abs_diff_eq!(
            raw.total,
            raw.per_mode_rates.iter().sum::<f64>(),
            epsilon = 1e-15
        );
        assert!(raw.total <= mem.total);
    }

    #[test]
    fn all_vacuum_source_has_no_key() {
        let (ch, det) = defaults(3.0);
        let outcomes = vec![epr_outcome(0.0); 5];
        let res = total_rate(&outcomes, ch, det, RateParams::default(), true).unwrap();
        assert_eq!(res.total, 0.0);
    }

    #[test]
    fn rate_params_validation() {
        assert!(RateParams::new(0.0, true).is_err());
        assert!(RateParams::new(1.2, true).is_err());
    }
}

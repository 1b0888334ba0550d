//! Lossy, noisy channel and Bob's imperfect homodyne detector.
//!
//! Each supermode sees the same channel. The detector inefficiency is a beam
//! splitter of transmissivity `η_d` whose second input `C` is one half of an
//! EPR pair `C-D` with variance `ν`. Bob then homodynes the output `B3`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{homodyne_condition, GeneralCm, Quadrature, TwoModeCm};
use crate::ops::OpOutcome;

/// Default fiber attenuation used for the distance column, dB/km.
pub const DEFAULT_ATTENUATION_DB_PER_KM: f64 = 0.2;

/// Mode indices in [`PipelineCms::pre_measurement`].
pub const MODE_A: usize = 0;
pub const MODE_B3: usize = 1;
pub const MODE_C1: usize = 2;
pub const MODE_D: usize = 3;

/// Transmissivity `η_e` and input-referred excess noise `ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub eta_e: f64,
    pub epsilon: f64,
}

impl ChannelParams {
    pub fn new(eta_e: f64, epsilon: f64) -> Result<Self> {
        if !(eta_e > 0.0 && eta_e <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "eta_e",
                value: eta_e,
            });
        }
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "epsilon",
                value: epsilon,
            });
        }
        Ok(Self { eta_e, epsilon })
    }

    pub fn from_loss_db(loss_db: f64, epsilon: f64) -> Result<Self> {
        if !(loss_db >= 0.0 && loss_db.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "loss_db",
                value: loss_db,
            });
        }
        Self::new(loss_to_transmissivity(loss_db), epsilon)
    }
}

/// Efficiency `η_d` and electronic noise variance `ν`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorParams {
    pub eta_d: f64,
    pub nu: f64,
}

impl DetectorParams {
    pub fn new(eta_d: f64, nu: f64) -> Result<Self> {
        if !(eta_d > 0.0 && eta_d <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "eta_d",
                value: eta_d,
            });
        }
        if !(nu >= 1.0 && nu.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "nu",
                value: nu,
            });
        }
        Ok(Self { eta_d, nu })
    }

    pub fn ideal() -> Self {
        Self {
            eta_d: 1.0,
            nu: 1.0,
        }
    }
}

/// `η_e = 10^(-L/10)`.
pub fn loss_to_transmissivity(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 10.0)
}

pub fn distance_km(loss_db: f64, attenuation_db_per_km: f64) -> f64 {
    loss_db / attenuation_db_per_km
}

/// Covariance matrices of one supermode along the detection chain.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineCms {
    /// State of `A, B2` after the channel.
    pub after_channel: TwoModeCm,
    /// State of `A, B3, C1, D` just before the homodyne, in that mode order.
    pub pre_measurement: GeneralCm,
    /// State of `A, C1, D` conditioned on the homodyne outcome of `B3`.
    pub conditional: GeneralCm,
    /// Variance of the measured quadrature, `η_d b' + (1 - η_d) ν`.
    pub b_doubleprime: f64,
}

/// `a` unchanged, `c' = √η_e c`, `b' = η_e (b + ε) + 1 - η_e`.
pub fn channel_evolve(cm: TwoModeCm, ch: ChannelParams) -> TwoModeCm {
    TwoModeCm::new(
        cm.a,
        ch.eta_e * (cm.b + ch.epsilon) + (1.0 - ch.eta_e),
        ch.eta_e.sqrt() * cm.c,
    )
}

/// Builds the 8x8 covariance matrix of `A, B3, C1, D` and conditions it on
/// an x-quadrature homodyne of `B3`.
pub fn detector_assemble(after_channel: TwoModeCm, det: DetectorParams) -> Result<PipelineCms> {
    let pre_measurement = pre_measurement_cm(after_channel, det)?;
    let b_doubleprime = pre_measurement.get(2 * MODE_B3, 2 * MODE_B3);
    let conditional = homodyne_condition(&pre_measurement, MODE_B3, Quadrature::X)?;
    Ok(PipelineCms {
        after_channel,
        pre_measurement,
        conditional,
        b_doubleprime,
    })
}

fn pre_measurement_cm(after_channel: TwoModeCm, det: DetectorParams) -> Result<GeneralCm> {
    let TwoModeCm { a, b: b1, c: c1 } = after_channel;
    let DetectorParams { eta_d, nu } = det;
    let loss = 1.0 - eta_d;
    let thermal = (nu * nu - 1.0).max(0.0);

    // Variances of A, B3, C1, D.
    let var = [a, eta_d * b1 + loss * nu, eta_d * nu + loss * b1, nu];
    // Correlations between mode pairs; `true` marks Z-type (p-p negated).
    // B3 and C1 are the two outputs of one beam splitter, so their
    // correlation is the same in x and p.
    let mut corr = [[(0.0, true); 4]; 4];
    let mut set = |i: usize, j: usize, v: f64, z: bool| {
        corr[i][j] = (v, z);
        corr[j][i] = (v, z);
    };
    set(MODE_A, MODE_B3, eta_d.sqrt() * c1, true);
    set(MODE_A, MODE_C1, -loss.sqrt() * c1, true);
    set(MODE_B3, MODE_C1, (loss * eta_d).sqrt() * (nu - b1), false);
    set(MODE_B3, MODE_D, (loss * thermal).sqrt(), true);
    set(MODE_C1, MODE_D, (eta_d * thermal).sqrt(), true);

    let mut m = DMatrix::zeros(8, 8);
    for i in 0..4 {
        m[(2 * i, 2 * i)] = var[i];
        m[(2 * i + 1, 2 * i + 1)] = var[i];
        for j in 0..4 {
            if i != j {
                let (v, z) = corr[i][j];
                m[(2 * i, 2 * j)] = v;
                m[(2 * i + 1, 2 * j + 1)] = if z { -v } else { v };
            }
        }
    }
    GeneralCm::new(m)
}

/// Re-conditions the pre-measurement state on the given quadrature.
pub fn condition_on_bob(pipeline: &PipelineCms, quadrature: Quadrature) -> Result<GeneralCm> {
    homodyne_condition(&pipeline.pre_measurement, MODE_B3, quadrature)
}

/// Channel plus detector for one supermode.
pub fn evolve(cm: TwoModeCm, ch: ChannelParams, det: DetectorParams) -> Result<PipelineCms> {
    detector_assemble(channel_evolve(cm, ch), det)
}

/// Runs every supermode through its own copy of the channel and detector.
pub fn evolve_supermodes(
    outcomes: &[OpOutcome],
    ch: ChannelParams,
    det: DetectorParams,
) -> Result<Vec<PipelineCms>> {
    outcomes.par_iter().map(|o| evolve(o.cm, ch, det)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::symplectic_eigenvalues;
    use crate::source::epr_cm;
    use approx::assert_abs_diff_eq;

    #[test]
    fn identity_channel() {
        let cm = epr_cm(0.9).unwrap();
        let out = channel_evolve(cm, ChannelParams::new(1.0, 0.0).unwrap());
        assert_eq!(out, cm);
    }

    #[test]
    fn full_loss_leaves_vacuum_at_bob() {
        let cm = epr_cm(0.9).unwrap();
        let out = channel_evolve(cm, ChannelParams::new(1e-300, 0.1).unwrap());
        assert_abs_diff_eq!(out.b, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.c, 0.0, epsilon = 1e-12);
        assert_eq!(out.a, cm.a);
    }

    #[test]
    fn channel_hand_value() {
        let out = channel_evolve(epr_cm(1.0).unwrap(), ChannelParams::new(0.5, 0.1).unwrap());
        // 0.5 (cosh 2 + 0.1) + 0.5
        assert_abs_diff_eq!(out.b, 0.5 * (2f64.cosh() + 0.1) + 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(out.b, 2.431_097_845_541_815_7, epsilon = 1e-14);
        assert_abs_diff_eq!(out.c, 0.5f64.sqrt() * 2f64.sinh(), epsilon = 1e-14);
    }

    #[test]
    fn parameter_validation() {
        assert!(ChannelParams::new(0.0, 0.1).is_err());
        assert!(ChannelParams::new(1.1, 0.1).is_err());
        assert!(ChannelParams::new(0.5, -0.1).is_err());
        assert!(DetectorParams::new(0.0, 1.1).is_err());
        assert!(DetectorParams::new(0.5, 0.9).is_err());
        assert!(ChannelParams::from_loss_db(-1.0, 0.1).is_err());
        let ch = ChannelParams::from_loss_db(300.0, 0.1).unwrap();
        assert_abs_diff_eq!(ch.eta_e, 1e-30, epsilon = 1e-42);
    }

    #[test]
    fn loss_conversions() {
        assert_eq!(loss_to_transmissivity(0.0), 1.0);
        assert_abs_diff_eq!(loss_to_transmissivity(30.0), 1e-3, epsilon = 1e-18);
        assert_eq!(distance_km(30.0, DEFAULT_ATTENUATION_DB_PER_KM), 150.0);
    }

    #[test]
    fn perfect_detector_decouples_ancilla() {
        let after = channel_evolve(epr_cm(1.0).unwrap(), ChannelParams::new(0.3, 0.05).unwrap());
        let p = detector_assemble(after, DetectorParams::new(1.0, 1.3).unwrap()).unwrap();
        let m = p.pre_measurement.matrix();
        for i in 0..4 {
            for j in 4..8 {
                assert_eq!(m[(i, j)], 0.0);
            }
        }
        let cond_a = p.conditional.get(0, 0);
        assert_abs_diff_eq!(
            cond_a,
            after.a - after.c * after.c / after.b,
            epsilon = 1e-12
        );
    }

    #[test]
    fn noiseless_detector_ancilla_is_vacuum() {
        let after = channel_evolve(epr_cm(1.0).unwrap(), ChannelParams::new(0.3, 0.05).unwrap());
        let p = detector_assemble(after, DetectorParams::new(0.7, 1.0).unwrap()).unwrap();
        let m = p.pre_measurement.matrix();
        assert_eq!(m[(6, 6)], 1.0);
        for i in 0..6 {
            assert_eq!(m[(i, 6)], 0.0);
        }
    }

    #[test]
    fn uncorrelated_bob_leaves_rest_unchanged() {
        let p = evolve(
            epr_cm(0.8).unwrap(),
            ChannelParams::new(1e-300, 0.0).unwrap(),
            DetectorParams::new(0.6, 1.0).unwrap(),
        )
        .unwrap();
        let rest = p
            .pre_measurement
            .submatrix(&[MODE_A, MODE_C1, MODE_D])
            .unwrap();
        for i in 0..6 {
            for j in 0..6 {
                assert_abs_diff_eq!(p.conditional.get(i, j), rest.get(i, j), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn pipeline_states_are_physical_and_quadrature_symmetric() {
        for &r in &[0.2, 1.0, 2.0] {
            for &loss in &[0.0, 3.0, 10.0, 30.0] {
                let p = evolve(
                    epr_cm(r).unwrap(),
                    ChannelParams::from_loss_db(loss, 0.1).unwrap(),
                    DetectorParams::new(0.68, 1.1).unwrap(),
                )
                .unwrap();
                assert!(p.b_doubleprime >= 1.0);
                let pre = symplectic_eigenvalues(&p.pre_measurement).unwrap();
                assert!(pre.min() >= 1.0 - 1e-6);
                let sx = symplectic_eigenvalues(&p.conditional).unwrap();
                let sp =
                    symplectic_eigenvalues(&condition_on_bob(&p, Quadrature::P).unwrap()).unwrap();
                assert!(sx.min() >= 1.0 - 1e-6);
                for (x, q) in sx.values().iter().zip(sp.values()) {
                    assert_abs_diff_eq!(*x, *q, epsilon = 1e-9);
                }
            }
        }
    }
}

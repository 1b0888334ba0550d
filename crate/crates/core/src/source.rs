//! Multi-mode parametric down-conversion source.
//!
//! The source is an ensemble of independent EPR pairs, one per supermode,
//! with squeezing `r_k = G * λ_k`. Coefficients are normalized so that
//! `Σ λ_k² = 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::TwoModeCm;

/// Default number of supermodes.
pub const DEFAULT_K_MAX: usize = 5;
/// Default decay constant for [`Scenario::ExpDecay`].
pub const DEFAULT_DECAY: f64 = 2.0;

const NORM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    /// Only the leading coefficient is non-zero.
    SingleMode,
    /// `λ_k ∝ exp(-(k-1)/decay)`.
    ExpDecay,
    /// All coefficients equal.
    Uniform,
    /// User supplied coefficients.
    Custom,
}

impl Scenario {
    pub fn label(self) -> &'static str {
        match self {
            Scenario::SingleMode => "single",
            Scenario::ExpDecay => "exp",
            Scenario::Uniform => "uniform",
            Scenario::Custom => "custom",
        }
    }
}

/// Normalized Schmidt coefficients of the source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupermodeSpectrum {
    lambdas: Vec<f64>,
    scenario: Scenario,
}

impl SupermodeSpectrum {
    /// Builds one of the built-in spectra. `decay` is only read for
    /// [`Scenario::ExpDecay`].
    pub fn new(scenario: Scenario, k_max: usize, decay: f64) -> Result<Self> {
        if k_max == 0 {
            return Err(Error::EmptySpectrum);
        }
        let lambdas = match scenario {
            Scenario::SingleMode => {
                let mut l = vec![0.0; k_max];
                l[0] = 1.0;
                l
            }
            Scenario::Uniform => vec![1.0 / (k_max as f64).sqrt(); k_max],
            Scenario::ExpDecay => {
                if !(decay > 0.0 && decay.is_finite()) {
                    return Err(Error::InvalidParameter {
                        name: "decay",
                        value: decay,
                    });
                }
                let raw: Vec<f64> = (0..k_max).map(|k| (-(k as f64) / decay).exp()).collect();
                let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
                raw.into_iter().map(|x| x / norm).collect()
            }
            Scenario::Custom => {
                return Err(Error::InvalidSpectrum(
                    "custom spectra are built with SupermodeSpectrum::custom".into(),
                ))
            }
        };
        Ok(Self { lambdas, scenario })
    }

    /// Validates user supplied coefficients: non-negative, non-increasing,
    /// `Σ λ² = 1`.
    pub fn custom(lambdas: Vec<f64>) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(Error::EmptySpectrum);
        }
        if lambdas.iter().any(|&l| !(l >= 0.0 && l.is_finite())) {
            return Err(Error::InvalidSpectrum(
                "coefficients must be finite and >= 0".into(),
            ));
        }
        if lambdas.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidSpectrum(
                "coefficients must be non-increasing".into(),
            ));
        }
        let norm: f64 = lambdas.iter().map(|x| x * x).sum();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidSpectrum(format!(
                "sum of squared coefficients is {norm}, expected 1"
            )));
        }
        Ok(Self {
            lambdas,
            scenario: Scenario::Custom,
        })
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    pub fn k_max(&self) -> usize {
        self.lambdas.len()
    }

    pub fn leading(&self) -> f64 {
        self.lambdas[0]
    }
}

/// Source gain plus spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceParams {
    pub gain: f64,
    pub spectrum: SupermodeSpectrum,
}

impl SourceParams {
    pub fn new(gain: f64, spectrum: SupermodeSpectrum) -> Result<Self> {
        if !(gain >= 0.0 && gain.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "gain",
                value: gain,
            });
        }
        Ok(Self { gain, spectrum })
    }

    /// Per-supermode squeezing parameters `r_k = G λ_k`.
    pub fn squeezings(&self) -> Vec<f64> {
        self.spectrum
            .lambdas()
            .iter()
            .map(|l| self.gain * l)
            .collect()
    }

    pub fn epr_cms(&self) -> Vec<TwoModeCm> {
        self.squeezings()
            .into_iter()
            .map(|r| epr_cm(r).expect("gain and coefficients are non-negative"))
            .collect()
    }
}

/// Covariance matrix of a two-mode squeezed vacuum with squeezing `r`.
pub fn epr_cm(r: f64) -> Result<TwoModeCm> {
    if !(r >= 0.0) {
        return Err(Error::NegativeSqueezing(r));
    }
    let v = (2.0 * r).cosh();
    Ok(TwoModeCm::new(v, v, (2.0 * r).sinh()))
}

/// Squeezing in dB, `10 log10(e^{2r})`.
pub fn squeezing_db(r: f64) -> f64 {
    20.0 * r / std::f64::consts::LN_10
}

/// Squeezing parameter of an EPR pair whose quadrature variance is `variance`.
pub fn squeezing_from_variance(variance: f64) -> f64 {
    0.5 * variance.acosh()
}

//! Heralded non-Gaussian operations on Bob's half of an EPR pair.
//!
//! Each operation mixes the selected supermode with an `N`-photon ancilla on
//! a beam splitter of transmissivity `T` and keeps the branch where the
//! ancilla output holds `M` photons. Only the covariance matrix of the
//! heralded state and the heralding probability are tracked; the state is
//! Gaussified downstream.
//!
//! All closed forms are written in terms of `ξ² = tanh² r` and the product
//! `ξ² T`, which stays strictly below 1 for every valid input.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::TwoModeCm;
use crate::source::{epr_cm, SourceParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OpKind {
    None,
    /// Single-photon subtraction: vacuum ancilla, one photon detected.
    PS1,
    /// Single-photon addition: one-photon ancilla, vacuum detected.
    PA1,
    /// Single-photon catalysis: one photon in, one photon detected.
    PC1,
    /// Zero-photon catalysis: vacuum in, vacuum detected.
    PC0,
}

impl OpKind {
    pub const ACTIVE: [OpKind; 4] = [OpKind::PS1, OpKind::PA1, OpKind::PC1, OpKind::PC0];

    /// `(ancilla photons N, detected photons M)`.
    pub fn photon_numbers(self) -> Option<(usize, usize)> {
        match self {
            OpKind::None => None,
            OpKind::PS1 => Some((0, 1)),
            OpKind::PA1 => Some((1, 0)),
            OpKind::PC1 => Some((1, 1)),
            OpKind::PC0 => Some((0, 0)),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            OpKind::None => "none",
            OpKind::PS1 => "1ps",
            OpKind::PA1 => "1pa",
            OpKind::PC1 => "1pc",
            OpKind::PC0 => "0pc",
        }
    }

    pub fn is_active(self) -> bool {
        self != OpKind::None
    }
}

impl std::str::FromStr for OpKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(OpKind::None),
            "1ps" | "ps1" | "ps" => Ok(OpKind::PS1),
            "1pa" | "pa1" | "pa" => Ok(OpKind::PA1),
            "1pc" | "pc1" => Ok(OpKind::PC1),
            "0pc" | "pc0" => Ok(OpKind::PC0),
            other => Err(format!("unknown operation '{other}'")),
        }
    }
}

impl std::fmt::Display for OpKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Operation kind plus beam-splitter transmissivity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonGaussianOp {
    pub kind: OpKind,
    pub transmissivity: f64,
}

impl NonGaussianOp {
    pub fn new(kind: OpKind, transmissivity: f64) -> Result<Self> {
        let op = Self {
            kind,
            transmissivity,
        };
        op.validate()?;
        Ok(op)
    }

    pub const fn identity() -> Self {
        Self {
            kind: OpKind::None,
            transmissivity: 1.0,
        }
    }

    /// `0 < T < 1` for active kinds; zero-photon catalysis also admits `T = 1`.
    pub fn validate(&self) -> Result<()> {
        let t = self.transmissivity;
        let ok = match self.kind {
            OpKind::None => true,
            OpKind::PC0 => t > 0.0 && t <= 1.0,
            _ => t > 0.0 && t < 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidTransmissivity(t))
        }
    }
}

/// Covariance matrix and heralding probability of one operated supermode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpOutcome {
    pub cm: TwoModeCm,
    pub probability: f64,
}

/// Applies `op` to Bob's mode of an EPR pair with squeezing `r`.
pub fn apply_op(op: NonGaussianOp, r: f64) -> Result<OpOutcome> {
    op.validate()?;
    if !(r >= 0.0) {
        return Err(Error::NegativeSqueezing(r));
    }
    if op.kind == OpKind::None {
        return Ok(OpOutcome {
            cm: epr_cm(r)?,
            probability: 1.0,
        });
    }

    let t = op.transmissivity;
    let xi = r.tanh();
    let xi2 = xi * xi;
    let x = xi2 * t;
    let one_minus = 1.0 - x;

    let (cm, probability) = match op.kind {
        OpKind::PS1 => (
            TwoModeCm::new(
                (3.0 + x) / one_minus,
                (1.0 + 3.0 * x) / one_minus,
                4.0 * x.sqrt() / one_minus,
            ),
            xi2 * (1.0 - xi2) * (1.0 - t) / (one_minus * one_minus),
        ),
        OpKind::PA1 => (
            TwoModeCm::new(
                (1.0 + 3.0 * x) / one_minus,
                (3.0 + x) / one_minus,
                4.0 * x.sqrt() / one_minus,
            ),
            (1.0 - xi2) * (1.0 - t) / (one_minus * one_minus),
        ),
        OpKind::PC1 => pc1(xi, t),
        OpKind::PC0 => (
            TwoModeCm::new(
                (1.0 + x) / one_minus,
                (1.0 + x) / one_minus,
                2.0 * x.sqrt() / one_minus,
            ),
            (1.0 - xi2) / one_minus,
        ),
        OpKind::None => unreachable!(),
    };
    Ok(OpOutcome { cm, probability })
}

fn pc1(xi: f64, t: f64) -> (TwoModeCm, f64) {
    let x = xi * xi;
    let x2 = x * x;
    let x3 = x2 * x;
    let t2 = t * t;
    let head = x * t - 1.0;
    let tail = t + x * (1.0 - 4.0 * t + t2) + x2 * t;
    let denom = head * tail;

    // Diagonal entry: overall sign chosen so that vacuum input (ξ = 0)
    // returns variance 1, as the Fock-space heralding confirms.
    let a = -(t - x * (-3.0 + 12.0 * t - 8.0 * t2) - x2 * t * (-8.0 + 12.0 * t - 3.0 * t2)
        + x3 * t2)
        / denom;
    let c = 2.0
        * t.sqrt()
        * xi
        * (1.0 - 2.0 * t - 2.0 * x * (2.0 - 5.0 * t + 2.0 * t2) + x2 * t * (t - 2.0))
        / denom;
    let p = (-t + x * (-1.0 + 5.0 * t - t2) + x2 * (1.0 - 5.0 * t + t2) + x3 * t)
        / (head * head * head);
    (TwoModeCm::new(a, a, c), p)
}

/// Applies `ops[k]` to supermode `k` for `k < ops.len()` and leaves the
/// remaining supermodes untouched. Returns one outcome per supermode.
pub fn apply_to_supermodes(ops: &[NonGaussianOp], source: &SourceParams) -> Result<Vec<OpOutcome>> {
    let k_max = source.spectrum.k_max();
    if ops.len() > k_max {
        return Err(Error::SelectionExceedsModes {
            selected: ops.len(),
            modes: k_max,
        });
    }
    source
        .squeezings()
        .into_iter()
        .enumerate()
        .map(|(k, r)| apply_op(ops.get(k).copied().unwrap_or(NonGaussianOp::identity()), r))
        .collect()
}

/// Overall heralding probability, the product of the per-mode probabilities.
pub fn combined_probability(outcomes: &[OpOutcome]) -> f64 {
    outcomes.iter().map(|o| o.probability).product()
}

//! Cross-checks of the closed-form operation model against the Fock-space
//! oracle, plus the two mutual-information paths.
//!
//! Each check records its largest deviation. A check that misses its
//! tolerance but stays under [`STRUCTURAL_THRESHOLD`] is reported as a
//! tolerance failure (floating-point limits); anything larger, or a missing
//! oracle state, is a structural mismatch.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{evolve, ChannelParams, DetectorParams};
use crate::error::Result;
use crate::fock::{build_tmsv, default_cutoff, herald};
use crate::gaussian::TwoModeCm;
use crate::keyrate::{mutual_information, mutual_information_closed_form};
use crate::ops::{apply_op, NonGaussianOp, OpKind, OpOutcome};

/// Deviations above this are treated as a wrong formula rather than rounding.
pub const STRUCTURAL_THRESHOLD: f64 = 1e-4;

pub const DEFAULT_SQUEEZINGS: [f64; 3] = [0.3, 0.8, 1.2];
pub const DEFAULT_TRANSMISSIVITIES: [f64; 2] = [0.5, 0.9];
pub const DEFAULT_MI_DRAWS: usize = 1000;
pub const DEFAULT_SEED: u64 = 0x5eed;

/// Closed-form operation model under test.
pub type ClosedFormModel = fn(NonGaussianOp, f64) -> Result<OpOutcome>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub cm: f64,
    pub probability: f64,
    pub mutual_info: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            cm: 1e-6,
            probability: 1e-8,
            mutual_info: 1e-12,
        }
    }
}

impl Tolerances {
    pub fn uniform(tol: f64) -> Self {
        Self {
            cm: tol,
            probability: tol,
            mutual_info: tol,
        }
    }
}

#[derive(Debug, Clone)]
pub struct VerifyConfig {
    pub tolerances: Tolerances,
    pub squeezings: Vec<f64>,
    pub transmissivities: Vec<f64>,
    pub mi_draws: usize,
    pub seed: u64,
    pub model: ClosedFormModel,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            tolerances: Tolerances::default(),
            squeezings: DEFAULT_SQUEEZINGS.to_vec(),
            transmissivities: DEFAULT_TRANSMISSIVITIES.to_vec(),
            mi_draws: DEFAULT_MI_DRAWS,
            seed: DEFAULT_SEED,
            model: apply_op,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    ToleranceFailure,
    StructuralMismatch,
}

impl CheckStatus {
    pub fn label(self) -> &'static str {
        match self {
            CheckStatus::Pass => "pass",
            CheckStatus::ToleranceFailure => "tolerance-failure",
            CheckStatus::StructuralMismatch => "structural-mismatch",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    /// Stable identifier, e.g. `1ps.cm` or `mutual-info.dual-path`.
    pub id: String,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub status: CheckStatus,
    /// Parameters at which the largest deviation occurred.
    pub worst_case: String,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<CheckReport>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status == CheckStatus::Pass)
    }

    pub fn failing(&self) -> Vec<&CheckReport> {
        self.checks
            .iter()
            .filter(|c| c.status != CheckStatus::Pass)
            .collect()
    }

    pub fn get(&self, id: &str) -> Option<&CheckReport> {
        self.checks.iter().find(|c| c.id == id)
    }
}

/// Running maximum of deviations for one check.
struct Tracker {
    id: String,
    tolerance: f64,
    max: f64,
    worst: String,
    samples: usize,
    broken: bool,
}

impl Tracker {
    fn new(id: String, tolerance: f64) -> Self {
        Self {
            id,
            tolerance,
            max: 0.0,
            worst: String::new(),
            samples: 0,
            broken: false,
        }
    }

    fn record(&mut self, deviation: f64, at: impl FnOnce() -> String) {
        self.samples += 1;
        // NaN counts as structural.
        if deviation.is_nan() {
            self.broken = true;
            self.worst = at();
            self.max = f64::INFINITY;
        } else if deviation > self.max {
            self.max = deviation;
            self.worst = at();
        }
    }

    fn structural(&mut self, at: String) {
        self.samples += 1;
        self.broken = true;
        self.max = f64::INFINITY;
        self.worst = at;
    }

    fn finish(self) -> CheckReport {
        let status = if self.broken || self.max > STRUCTURAL_THRESHOLD.max(self.tolerance) {
            CheckStatus::StructuralMismatch
        } else if self.max > self.tolerance {
            CheckStatus::ToleranceFailure
        } else {
            CheckStatus::Pass
        };
        CheckReport {
            id: self.id,
            max_deviation: self.max,
            tolerance: self.tolerance,
            status,
            worst_case: self.worst,
            samples: self.samples,
        }
    }
}

fn cm_deviation(x: &TwoModeCm, y: &TwoModeCm) -> f64 {
    (x.a - y.a)
        .abs()
        .max((x.b - y.b).abs())
        .max((x.c - y.c).abs())
}

/// Closed-form CM and probability versus the Fock oracle for one operation.
pub fn check_operation(kind: OpKind, config: &VerifyConfig) -> Result<[CheckReport; 2]> {
    let tol = config.tolerances;
    let mut cm = Tracker::new(format!("{}.cm", kind.label()), tol.cm);
    let mut prob = Tracker::new(format!("{}.prob", kind.label()), tol.probability);
    let Some((ancilla, detect)) = kind.photon_numbers() else {
        return Ok([cm.finish(), prob.finish()]);
    };
    for &r in &config.squeezings {
        let state = build_tmsv(r, default_cutoff(r))?;
        for &t in &config.transmissivities {
            let at = || format!("r={r}, T={t}");
            let oracle = herald(&state, ancilla, detect, t)?;
            let model = (config.model)(NonGaussianOp::new(kind, t)?, r);
            let model = match model {
                Ok(m) => m,
                Err(e) => {
                    cm.structural(format!("{}: {e}", at()));
                    prob.structural(format!("{}: {e}", at()));
                    continue;
                }
            };
            prob.record((model.probability - oracle.probability).abs(), at);
            match oracle.cm {
                Some(ocm) => cm.record(cm_deviation(&model.cm, &ocm), at),
                None => cm.structural(format!("{}: oracle branch has zero norm", at())),
            }
        }
    }
    Ok([cm.finish(), prob.finish()])
}

/// Mutual information from the conditional pipeline CM versus the closed
/// form, on random draws of squeezing, operation, channel and detector.
pub fn check_mutual_information(config: &VerifyConfig) -> Result<CheckReport> {
    let mut tracker = Tracker::new(
        "mutual-info.dual-path".into(),
        config.tolerances.mutual_info,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let kinds = [
        OpKind::None,
        OpKind::PS1,
        OpKind::PA1,
        OpKind::PC1,
        OpKind::PC0,
    ];
    for _ in 0..config.mi_draws {
        let r = rng.random_range(0.0..1.5);
        let kind = kinds[rng.random_range(0..kinds.len())];
        let t = rng.random_range(0.05..0.95);
        let eta_e = 10f64.powf(-rng.random_range(0.0..4.0));
        let epsilon = rng.random_range(0.0..0.3);
        let eta_d = rng.random_range(0.3..1.0);
        let nu = rng.random_range(1.0..2.0);

        let op = if kind == OpKind::None {
            NonGaussianOp::identity()
        } else {
            NonGaussianOp::new(kind, t)?
        };
        let outcome = apply_op(op, r)?;
        let ch = ChannelParams::new(eta_e, epsilon)?;
        let det = DetectorParams::new(eta_d, nu)?;
        let pipeline = evolve(outcome.cm, ch, det)?;
        let direct = mutual_information(&pipeline)?;
        let closed = mutual_information_closed_form(outcome.cm, ch, det);
        tracker.record((direct - closed).abs(), || {
            format!("r={r}, op={kind}, T={t}, eta_e={eta_e}, eps={epsilon}, eta_d={eta_d}, nu={nu}")
        });
    }
    Ok(tracker.finish())
}

pub fn run(config: &VerifyConfig) -> Result<VerifyReport> {
    let mut checks = Vec::new();
    for kind in OpKind::ACTIVE {
        checks.extend(check_operation(kind, config)?);
    }
    checks.push(check_mutual_information(config)?);
    Ok(VerifyReport { checks })
}

/// Deliberately wrong models for exercising the verifier.
pub mod faults {
    use super::*;

    /// Photon subtraction with the sign of the correlation flipped.
    pub fn ps1_sign_flip(op: NonGaussianOp, r: f64) -> Result<OpOutcome> {
        let mut out = apply_op(op, r)?;
        if op.kind == OpKind::PS1 {
            out.cm.c = -out.cm.c;
        }
        Ok(out)
    }

    pub fn by_name(name: &str) -> Option<ClosedFormModel> {
        match name {
            "1ps-sign-flip" => Some(ps1_sign_flip),
            _ => None,
        }
    }
}

//! Resolves flags, environment, config file and built-in defaults into a
//! validated [`RunConfig`]. Flags and environment variables win over the
//! file, which wins over the defaults.

use std::path::{Path, PathBuf};

use cvqkd_core::channel::{ChannelParams, DetectorParams, DEFAULT_ATTENUATION_DB_PER_KM};
use cvqkd_core::keyrate::{RateParams, DEFAULT_EPSILON, DEFAULT_ETA_D, DEFAULT_ETA_R, DEFAULT_NU};
use cvqkd_core::ops::OpKind;
use cvqkd_core::optimizer::{Bounds, OptimizationProblem, Settings};
use cvqkd_core::source::{Scenario, SupermodeSpectrum, DEFAULT_DECAY, DEFAULT_K_MAX};
use serde::Deserialize;

use crate::args::{Format, RunArgs, ScenarioArg};
use crate::error::CliError;

/// Loss range accepted from the command line or config file.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum LossRange {
    Single(f64),
    Text(String),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    scenario: Option<ScenarioArg>,
    decay: Option<f64>,
    kmax: Option<usize>,
    ksel: Option<usize>,
    op: Option<String>,
    memory: Option<bool>,
    clamp: Option<bool>,
    loss_db: Option<LossRange>,
    eps: Option<f64>,
    nu: Option<f64>,
    eta_d: Option<f64>,
    eta_r: Option<f64>,
    attenuation: Option<f64>,
    gain_max: Option<f64>,
    t_min: Option<f64>,
    t_max: Option<f64>,
    grid_points: Option<usize>,
    rel_tol: Option<f64>,
    out: Option<PathBuf>,
    format: Option<Format>,
    workers: Option<usize>,
    gain: Option<f64>,
    t: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub spectrum: SupermodeSpectrum,
    pub op: OpKind,
    pub k_sel: usize,
    pub memory: bool,
    pub clamp: bool,
    pub losses: Vec<f64>,
    pub epsilon: f64,
    pub detector: DetectorParams,
    pub rate: RateParams,
    pub attenuation: f64,
    pub bounds: Bounds,
    pub settings: Settings,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub workers: usize,
    pub gain: Option<f64>,
    pub t: Vec<f64>,
}

impl RunConfig {
    pub fn resolve(args: &RunArgs, gain: Option<f64>, t: &[f64]) -> Result<Self, CliError> {
        let file = match &args.config {
            Some(path) => load_file(path)?,
            None => FileConfig::default(),
        };
        let scenario = match args
            .scenario
            .or(file.scenario)
            .unwrap_or(ScenarioArg::Single)
        {
            ScenarioArg::Single => Scenario::SingleMode,
            ScenarioArg::Exp => Scenario::ExpDecay,
            ScenarioArg::Uniform => Scenario::Uniform,
        };
        let k_max = args.kmax.or(file.kmax).unwrap_or(DEFAULT_K_MAX);
        let decay = args.decay.or(file.decay).unwrap_or(DEFAULT_DECAY);
        let spectrum =
            SupermodeSpectrum::new(scenario, k_max, decay).map_err(|e| usage("kmax/decay", e))?;

        let op = match args.op.as_deref().or(file.op.as_deref()) {
            Some(s) => s
                .parse::<OpKind>()
                .map_err(|e| CliError::Usage(format!("--op: {e}")))?,
            None => OpKind::None,
        };
        let k_sel = args
            .ksel
            .or(file.ksel)
            .unwrap_or(if op.is_active() { 1 } else { 0 });
        if k_sel > k_max {
            return Err(CliError::Usage(format!(
                "--ksel {k_sel} exceeds --kmax {k_max}"
            )));
        }

        let memory = flag(args.memory, args.no_memory)
            .or(file.memory)
            .unwrap_or(true);
        let clamp = flag(args.clamp, args.no_clamp)
            .or(file.clamp)
            .unwrap_or(true);

        let loss_range = match &args.loss_db {
            Some(s) => Some(LossRange::Text(s.clone())),
            None => file.loss_db.clone(),
        };
        let losses = match loss_range {
            None => vec![0.0],
            Some(LossRange::Single(x)) => vec![x],
            Some(LossRange::Text(s)) => parse_losses(&s)?,
        };
        if let Some(&bad) = losses.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
            return Err(CliError::Usage(format!(
                "--loss-db: loss {bad} must be finite and >= 0"
            )));
        }

        let epsilon = args.eps.or(file.eps).unwrap_or(DEFAULT_EPSILON);
        ChannelParams::new(1.0, epsilon).map_err(|e| usage("--eps", e))?;
        let detector = DetectorParams::new(
            args.eta_d.or(file.eta_d).unwrap_or(DEFAULT_ETA_D),
            args.nu.or(file.nu).unwrap_or(DEFAULT_NU),
        )
        .map_err(|e| usage("--eta-d/--nu", e))?;
        let rate = RateParams::new(args.eta_r.or(file.eta_r).unwrap_or(DEFAULT_ETA_R), memory)
            .map_err(|e| usage("--eta-r", e))?;
        let attenuation = args
            .attenuation
            .or(file.attenuation)
            .unwrap_or(DEFAULT_ATTENUATION_DB_PER_KM);
        if !(attenuation > 0.0 && attenuation.is_finite()) {
            return Err(CliError::Usage(format!(
                "--attenuation {attenuation} must be > 0"
            )));
        }

        let mut bounds = Bounds::for_spectrum(&spectrum);
        if let Some(g) = args.gain_max.or(file.gain_max) {
            bounds.gain_max = g;
        }
        if let Some(t) = args.t_min.or(file.t_min) {
            bounds.t_min = t;
        }
        if let Some(t) = args.t_max.or(file.t_max) {
            bounds.t_max = t;
        }
        let mut settings = Settings::default();
        if let Some(n) = args.grid_points.or(file.grid_points) {
            settings.grid_points = n;
        }
        if let Some(tol) = args.rel_tol.or(file.rel_tol) {
            settings.rel_tol = tol;
        }

        let t = if t.is_empty() {
            file.t.unwrap_or_default()
        } else {
            t.to_vec()
        };
        Ok(Self {
            scenario,
            spectrum,
            op,
            k_sel,
            memory,
            clamp,
            losses,
            epsilon,
            detector,
            rate,
            attenuation,
            bounds,
            settings,
            out: args.out.clone().or(file.out),
            format: args.format.or(file.format).unwrap_or_default(),
            workers: args.workers.or(file.workers).unwrap_or(0),
            gain: gain.or(file.gain),
            t,
        })
    }

    pub fn channel(&self, loss_db: f64) -> Result<ChannelParams, CliError> {
        ChannelParams::from_loss_db(loss_db, self.epsilon).map_err(|e| usage("--loss-db", e))
    }

    pub fn problem(&self, loss_db: f64) -> Result<OptimizationProblem, CliError> {
        let mut p = OptimizationProblem::new(
            self.spectrum.clone(),
            self.op,
            self.k_sel,
            self.channel(loss_db)?,
            self.detector,
            self.rate,
            self.clamp,
        );
        p.bounds = self.bounds;
        p.settings = self.settings;
        Ok(p)
    }

    /// Operated modes, counting none when the operation is `none`.
    pub fn active_modes(&self) -> usize {
        if self.op.is_active() {
            self.k_sel
        } else {
            0
        }
    }

    pub fn single_loss(&self, command: &str) -> Result<f64, CliError> {
        match self.losses.as_slice() {
            [x] => Ok(*x),
            _ => Err(CliError::Usage(format!(
                "{command} takes a single --loss-db value, not a range"
            ))),
        }
    }
}

fn flag(on: bool, off: bool) -> Option<bool> {
    match (on, off) {
        (true, _) => Some(true),
        (_, true) => Some(false),
        _ => None,
    }
}

fn usage(field: &str, err: cvqkd_core::Error) -> CliError {
    CliError::Usage(format!("{field}: {err}"))
}

fn load_file(path: &Path) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("--config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Usage(format!("--config {}: {e}", path.display())))
}

/// `A`, or `A:B:STEP` with both ends included.
pub fn parse_losses(text: &str) -> Result<Vec<f64>, CliError> {
    let bad = |why: &str| CliError::Usage(format!("--loss-db '{text}': {why}"));
    let parts: Vec<f64> = text
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad("expected A or A:B:STEP"))?;
    match parts.as_slice() {
        [a] => Ok(vec![*a]),
        [a, b, step] => {
            if !(*step > 0.0 && step.is_finite()) {
                return Err(bad("step must be > 0"));
            }
            if !(b >= a) {
                return Err(bad("empty range"));
            }
            let n = ((b - a) / step + 1e-9).floor() as usize + 1;
            // Multiply rather than accumulate so points do not drift.
            Ok((0..n).map(|i| a + i as f64 * step).collect())
        }
        _ => Err(bad("expected A or A:B:STEP")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_ranges() {
        assert_eq!(
            parse_losses("0:35:5").unwrap(),
            vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0]
        );
        assert_eq!(parse_losses("3").unwrap(), vec![3.0]);
        assert_eq!(parse_losses("0:1:0.1").unwrap().len(), 11);
        assert!(parse_losses("5:1:1").is_err());
        assert!(parse_losses("0:1:0").is_err());
        assert!(parse_losses("0:1").is_err());
        assert!(parse_losses("a:b:c").is_err());
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(
            &path,
            "scenario = \"exp\"\neps = 0.05\nop = \"1pc\"\nksel = 2\nloss_db = \"0:10:5\"\n",
        )
        .unwrap();
        let args = RunArgs {
            config: Some(path),
            eps: Some(0.2),
            ..RunArgs::default()
        };
        let cfg = RunConfig::resolve(&args, None, &[]).unwrap();
        assert_eq!(cfg.scenario, Scenario::ExpDecay);
        assert_eq!(cfg.epsilon, 0.2);
        assert_eq!(cfg.op, OpKind::PC1);
        assert_eq!(cfg.k_sel, 2);
        assert_eq!(cfg.losses, vec![0.0, 5.0, 10.0]);
        assert!(cfg.memory && cfg.clamp);
    }

    #[test]
    fn inconsistent_selection_is_a_usage_error() {
        let args = RunArgs {
            kmax: Some(3),
            ksel: Some(4),
            op: Some("0pc".into()),
            ..RunArgs::default()
        };
        assert!(matches!(
            RunConfig::resolve(&args, None, &[]),
            Err(CliError::Usage(_))
        ));
    }

    #[test]
    fn unknown_file_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "epsilon = 0.1\n").unwrap();
        let args = RunArgs {
            config: Some(path),
            ..RunArgs::default()
        };
        assert!(matches!(
            RunConfig::resolve(&args, None, &[]),
            Err(CliError::Usage(_))
        ));
    }
}

//! Maximizes the total key rate over the source gain `G` and the operation
//! transmissivities `T_1..T_Ksel`.
//!
//! The search is a deterministic tensor grid (gain log-spaced, `1 - T`
//! log-spaced so points crowd toward `T = 1`) followed by coordinate-wise
//! golden-section refinement. Each supermode's rate depends only on `G` and
//! its own `T_k`, so the grid phase tabulates per-mode rates once per
//! `(G, T)` pair and assembles the tensor-grid totals from the tables.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelParams, DetectorParams};
use crate::error::{Error, Result};
use crate::keyrate::{combine, subchannel_rate, KeyRateResult, RateParams, SubchannelRate};
use crate::ops::{apply_op, NonGaussianOp, OpKind};
use crate::source::SupermodeSpectrum;

/// Largest per-mode squeezing reachable at the default gain bound.
pub const DEFAULT_MAX_SQUEEZING: f64 = 2.5;
pub const DEFAULT_T_MIN: f64 = 0.01;
pub const DEFAULT_T_MAX: f64 = 0.999;
pub const DEFAULT_GRID_POINTS: usize = 25;
pub const DEFAULT_REL_TOL: f64 = 1e-5;
pub const DEFAULT_PARAM_TOL: f64 = 1e-9;
/// Ratio between the largest and smallest gain on the grid.
const GAIN_SPAN: f64 = 1e3;
/// Rates closer than this are ties; the earlier (lower) parameters win.
const TIE_TOL: f64 = 1e-12;
const GOLDEN: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub gain_max: f64,
    pub t_min: f64,
    pub t_max: f64,
}

impl Bounds {
    /// Gain bound chosen so that the leading supermode stays at or below
    /// [`DEFAULT_MAX_SQUEEZING`].
    pub fn for_spectrum(spectrum: &SupermodeSpectrum) -> Self {
        Self {
            gain_max: DEFAULT_MAX_SQUEEZING / spectrum.leading(),
            t_min: DEFAULT_T_MIN,
            t_max: DEFAULT_T_MAX,
        }
    }

    fn gain_min(&self) -> f64 {
        self.gain_max / GAIN_SPAN
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    /// Grid points per axis.
    pub grid_points: usize,
    /// Stop refining once a sweep improves the rate by less than this fraction.
    pub rel_tol: f64,
    /// Golden-section bracket width at which a line search stops, in the
    /// transformed coordinates (`ln G`, `ln(1 - T)`).
    pub param_tol: f64,
    pub max_sweeps: usize,
    pub trace: bool,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            grid_points: DEFAULT_GRID_POINTS,
            rel_tol: DEFAULT_REL_TOL,
            param_tol: DEFAULT_PARAM_TOL,
            max_sweeps: 200,
            trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationProblem {
    pub spectrum: SupermodeSpectrum,
    pub op: OpKind,
    pub k_sel: usize,
    pub channel: ChannelParams,
    pub detector: DetectorParams,
    pub rate: RateParams,
    pub clamp: bool,
    pub bounds: Bounds,
    pub settings: Settings,
}

impl OptimizationProblem {
    /// Problem with default bounds and settings.
    pub fn new(
        spectrum: SupermodeSpectrum,
        op: OpKind,
        k_sel: usize,
        channel: ChannelParams,
        detector: DetectorParams,
        rate: RateParams,
        clamp: bool,
    ) -> Self {
        let bounds = Bounds::for_spectrum(&spectrum);
        Self {
            spectrum,
            op,
            k_sel,
            channel,
            detector,
            rate,
            clamp,
            bounds,
            settings: Settings::default(),
        }
    }

    /// Number of operated supermodes; zero when no operation is applied.
    pub fn active_modes(&self) -> usize {
        if self.op.is_active() {
            self.k_sel
        } else {
            0
        }
    }

    fn validate(&self) -> Result<()> {
        let k_max = self.spectrum.k_max();
        if self.k_sel > k_max {
            return Err(Error::SelectionExceedsModes {
                selected: self.k_sel,
                modes: k_max,
            });
        }
        let b = &self.bounds;
        if !(b.gain_max > 0.0 && b.gain_max.is_finite()) {
            return Err(Error::InvalidProblem(format!("gain bound {}", b.gain_max)));
        }
        if !(b.t_min > 0.0 && b.t_min < b.t_max && b.t_max < 1.0) {
            return Err(Error::InvalidProblem(format!(
                "transmissivity bounds ({}, {})",
                b.t_min, b.t_max
            )));
        }
        if self.settings.grid_points < 2 {
            return Err(Error::InvalidProblem(
                "grid needs at least 2 points per axis".into(),
            ));
        }
        Ok(())
    }

    /// Total rate and breakdown at one parameter point.
    pub fn evaluate(&self, gain: f64, transmissivities: &[f64]) -> Result<KeyRateResult> {
        let rates = self
            .spectrum
            .lambdas()
            .iter()
            .enumerate()
            .map(|(k, l)| self.mode_rate(k, gain * l, transmissivities.get(k).copied()))
            .collect::<Result<Vec<_>>>()?;
        Ok(combine(&rates, self.rate.memory, self.clamp))
    }

    fn mode_rate(&self, k: usize, r: f64, t: Option<f64>) -> Result<SubchannelRate> {
        let op = match t {
            Some(t) if k < self.active_modes() => NonGaussianOp::new(self.op, t)?,
            _ => NonGaussianOp::identity(),
        };
        subchannel_rate(&apply_op(op, r)?, self.channel, self.detector, self.rate)
    }

    fn clamp_rate(&self, r: f64) -> f64 {
        if self.clamp {
            r.max(0.0)
        } else {
            r
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub gain: f64,
    pub transmissivities: Vec<f64>,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub best_rate: f64,
    pub best_gain: f64,
    pub best_t: Vec<f64>,
    /// Best rate found on the coarse grid, before refinement.
    pub grid_rate: f64,
    /// Number of single-supermode rate evaluations.
    pub evaluations: usize,
    /// The optimum sits on the upper gain bound.
    pub at_gain_bound: bool,
    pub positive_key: bool,
    pub breakdown: KeyRateResult,
    pub trace: Option<Vec<TracePoint>>,
}

/// Log-spaced gains in `[gain_max / GAIN_SPAN, gain_max]`.
pub fn gain_grid(bounds: &Bounds, n: usize) -> Vec<f64> {
    let (lo, hi) = (bounds.gain_min().ln(), bounds.gain_max.ln());
    (0..n)
        .map(|i| {
            if i + 1 == n {
                bounds.gain_max
            } else {
                (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

/// Transmissivities from `t_min` to `t_max` with `1 - T` log-spaced.
pub fn transmissivity_grid(bounds: &Bounds, n: usize) -> Vec<f64> {
    let (lo, hi) = ((1.0 - bounds.t_min).ln(), (1.0 - bounds.t_max).ln());
    (0..n)
        .map(|i| match i {
            0 => bounds.t_min,
            _ if i + 1 == n => bounds.t_max,
            _ => 1.0 - (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp(),
        })
        .collect()
}

/// Per-gain tables of per-mode rates and probabilities.
struct GainRow {
    /// `operated[k][j]` for mode `k < k_sel` at transmissivity `j`.
    operated: Vec<Vec<SubchannelRate>>,
    /// Untouched modes.
    plain: Vec<SubchannelRate>,
}

#[derive(Debug, Clone)]
struct Candidate {
    rate: f64,
    gain_index: usize,
    t_index: Vec<usize>,
}

pub fn optimize(problem: &OptimizationProblem) -> Result<OptimizationResult> {
    problem.validate()?;
    let settings = problem.settings;
    let n = settings.grid_points;
    let k_act = problem.active_modes();
    let k_max = problem.spectrum.k_max();
    let gains = gain_grid(&problem.bounds, n);
    let ts = transmissivity_grid(&problem.bounds, n);
    let lambdas = problem.spectrum.lambdas();

    let rows = gains
        .par_iter()
        .map(|&g| -> Result<GainRow> {
            let operated = (0..k_act)
                .map(|k| {
                    ts.iter()
                        .map(|&t| problem.mode_rate(k, g * lambdas[k], Some(t)))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            let plain = (k_act..k_max)
                .map(|k| problem.mode_rate(k, g * lambdas[k], None))
                .collect::<Result<Vec<_>>>()?;
            Ok(GainRow { operated, plain })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut evaluations = n * (k_act * n + (k_max - k_act));

    let row_best: Vec<Candidate> = rows
        .par_iter()
        .enumerate()
        .map(|(i, row)| best_in_row(problem, i, row, n))
        .collect();
    let mut best = row_best[0].clone();
    for cand in &row_best[1..] {
        if cand.rate > best.rate + TIE_TOL {
            best = cand.clone();
        }
    }
    let grid_rate = best.rate;

    let mut trace = settings.trace.then(|| {
        row_best
            .iter()
            .map(|c| TracePoint {
                gain: gains[c.gain_index],
                transmissivities: c.t_index.iter().map(|&j| ts[j]).collect(),
                rate: c.rate,
            })
            .collect::<Vec<_>>()
    });

    let mut refiner = Refiner {
        problem,
        evaluations: 0,
        trace: trace.as_mut(),
    };
    let start = Point {
        gain: gains[best.gain_index],
        t: best.t_index.iter().map(|&j| ts[j]).collect(),
    };
    let gain_step = (gains[1] / gains[0]).ln();
    let t_step = ((1.0 - ts[1]) / (1.0 - ts[0])).ln().abs();
    let (point, rate) = refiner.refine(start, grid_rate, gain_step, t_step)?;
    evaluations += refiner.evaluations;

    let breakdown = problem.evaluate(point.gain, &point.t)?;
    evaluations += k_max;
    let best_rate = rate.max(grid_rate);
    Ok(OptimizationResult {
        best_rate,
        best_gain: point.gain,
        at_gain_bound: point.gain >= problem.bounds.gain_max * (1.0 - 1e-9),
        positive_key: best_rate > 0.0,
        best_t: point.t,
        grid_rate,
        evaluations,
        breakdown,
        trace,
    })
}

fn best_in_row(
    problem: &OptimizationProblem,
    gain_index: usize,
    row: &GainRow,
    n: usize,
) -> Candidate {
    let plain_sum: f64 = row.plain.iter().map(|s| problem.clamp_rate(s.rate)).sum();
    let k_act = row.operated.len();
    if problem.rate.memory || k_act == 0 {
        // Separable: pick the best transmissivity for each mode independently.
        let mut total = plain_sum;
        let mut t_index = Vec::with_capacity(k_act);
        for table in &row.operated {
            let mut best_j = 0;
            let mut best_r = problem.clamp_rate(table[0].rate);
            for (j, s) in table.iter().enumerate().skip(1) {
                let r = problem.clamp_rate(s.rate);
                if r > best_r + TIE_TOL {
                    best_r = r;
                    best_j = j;
                }
            }
            total += best_r;
            t_index.push(best_j);
        }
        let rate = if problem.rate.memory {
            total
        } else {
            // No operated modes: every heralding probability is 1.
            total * row.plain.iter().map(|s| s.probability).product::<f64>()
        };
        return Candidate {
            rate,
            gain_index,
            t_index,
        };
    }

    // Heralding probabilities couple the modes: walk the full tensor grid.
    let plain_prob: f64 = row.plain.iter().map(|s| s.probability).product();
    let mut idx = vec![0usize; k_act];
    let mut best = Candidate {
        rate: f64::NEG_INFINITY,
        gain_index,
        t_index: idx.clone(),
    };
    loop {
        let mut sum = plain_sum;
        let mut prob = plain_prob;
        for (k, &j) in idx.iter().enumerate() {
            let s = &row.operated[k][j];
            sum += problem.clamp_rate(s.rate);
            prob *= s.probability;
        }
        let rate = prob * sum;
        if rate > best.rate + TIE_TOL {
            best.rate = rate;
            best.t_index.clone_from(&idx);
        }
        // Lexicographic increment, first mode slowest.
        let mut pos = k_act;
        loop {
            if pos == 0 {
                return best;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < n {
                break;
            }
            idx[pos] = 0;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Point {
    gain: f64,
    t: Vec<f64>,
}

struct Refiner<'a> {
    problem: &'a OptimizationProblem,
    evaluations: usize,
    trace: Option<&'a mut Vec<TracePoint>>,
}

impl Refiner<'_> {
    fn rate(&mut self, p: &Point) -> Result<f64> {
        let total = self.problem.evaluate(p.gain, &p.t)?.total;
        self.evaluations += self.problem.spectrum.k_max();
        if let Some(trace) = self.trace.as_deref_mut() {
            trace.push(TracePoint {
                gain: p.gain,
                transmissivities: p.t.clone(),
                rate: total,
            });
        }
        Ok(total)
    }

    /// Coordinate ascent: a golden-section line search per coordinate over a
    /// bracket one grid step either side of the current point.
    fn refine(
        &mut self,
        start: Point,
        start_rate: f64,
        gain_step: f64,
        t_step: f64,
    ) -> Result<(Point, f64)> {
        let bounds = self.problem.bounds;
        let settings = self.problem.settings;
        let mut point = start;
        let mut rate = start_rate;
        for _ in 0..settings.max_sweeps {
            let sweep_start = rate;
            for coord in 0..=point.t.len() {
                let (lo, hi, current) = if coord == 0 {
                    let u = point.gain.ln();
                    (
                        (u - gain_step).max(bounds.gain_min().ln()),
                        (u + gain_step).min(bounds.gain_max.ln()),
                        u,
                    )
                } else {
                    // u = ln(1 - T) decreases as T grows.
                    let u = (1.0 - point.t[coord - 1]).ln();
                    (
                        (u - t_step).max((1.0 - bounds.t_max).ln()),
                        (u + t_step).min((1.0 - bounds.t_min).ln()),
                        u,
                    )
                };
                let set = |p: &mut Point, u: f64| {
                    if coord == 0 {
                        p.gain = u.exp().min(bounds.gain_max);
                    } else {
                        p.t[coord - 1] = (1.0 - u.exp()).clamp(bounds.t_min, bounds.t_max);
                    }
                };
                let mut trial = point.clone();
                let (u_best, r_best) = self.golden(lo, hi, settings.param_tol, |this, u| {
                    set(&mut trial, u);
                    this.rate(&trial)
                })?;
                // Endpoints are not sampled by the golden section itself.
                let mut cand = (u_best, r_best);
                for u in [lo, hi] {
                    if u != current {
                        set(&mut trial, u);
                        let r = self.rate(&trial)?;
                        if r > cand.1 {
                            cand = (u, r);
                        }
                    }
                }
                if cand.1 > rate + TIE_TOL {
                    set(&mut point, cand.0);
                    rate = cand.1;
                }
            }
            let improvement = rate - sweep_start;
            if !(improvement > settings.rel_tol * sweep_start.abs().max(f64::MIN_POSITIVE)) {
                break;
            }
        }
        Ok((point, rate))
    }

    fn golden(
        &mut self,
        mut lo: f64,
        mut hi: f64,
        tol: f64,
        mut f: impl FnMut(&mut Self, f64) -> Result<f64>,
    ) -> Result<(f64, f64)> {
        let mut x1 = hi - GOLDEN * (hi - lo);
        let mut x2 = lo + GOLDEN * (hi - lo);
        let mut f1 = f(self, x1)?;
        let mut f2 = f(self, x2)?;
        while hi - lo > tol {
            if f1 >= f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - GOLDEN * (hi - lo);
                f1 = f(self, x1)?;
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + GOLDEN * (hi - lo);
                f2 = f(self, x2)?;
            }
        }
        Ok(if f1 >= f2 { (x1, f1) } else { (x2, f2) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::keyrate::{DEFAULT_EPSILON, DEFAULT_ETA_D, DEFAULT_ETA_R, DEFAULT_NU};
    use crate::source::Scenario;

    fn problem(
        scenario: Scenario,
        op: OpKind,
        k_sel: usize,
        loss_db: f64,
        memory: bool,
    ) -> OptimizationProblem {
        OptimizationProblem::new(
            SupermodeSpectrum::new(scenario, 5, 2.0).unwrap(),
            op,
            k_sel,
            ChannelParams::from_loss_db(loss_db, DEFAULT_EPSILON).unwrap(),
            DetectorParams::new(DEFAULT_ETA_D, DEFAULT_NU).unwrap(),
            RateParams::new(DEFAULT_ETA_R, memory).unwrap(),
            true,
        )
    }

    #[test]
    fn grids_span_bounds() {
        let b = Bounds {
            gain_max: 2.0,
            t_min: 0.01,
            t_max: 0.999,
        };
        let g = gain_grid(&b, 25);
        assert_eq!(g.len(), 25);
        assert_eq!(*g.last().unwrap(), 2.0);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        let t = transmissivity_grid(&b, 25);
        assert_eq!(t[0], 0.01);
        assert_eq!(t[24], 0.999);
        assert!(t.windows(2).all(|w| w[1] > w[0]));
        // Spacing shrinks toward T = 1.
        assert!(t[24] - t[23] < t[1] - t[0]);
    }

    #[test]
    fn lossless_system_hits_gain_bound() {
        let p = OptimizationProblem::new(
            SupermodeSpectrum::new(Scenario::SingleMode, 5, 2.0).unwrap(),
            OpKind::None,
            0,
            ChannelParams::new(1.0, 0.0).unwrap(),
            DetectorParams::ideal(),
            RateParams::new(1.0, true).unwrap(),
            true,
        );
        let res = optimize(&p).unwrap();
        assert!(res.at_gain_bound);
        assert!(res.positive_key);
        assert_eq!(res.best_gain, p.bounds.gain_max);
    }

    #[test]
    fn refinement_never_loses_ground() {
        for (op, k) in [(OpKind::None, 0), (OpKind::PC0, 1), (OpKind::PS1, 2)] {
            let res = optimize(&problem(Scenario::ExpDecay, op, k, 20.0, true)).unwrap();
            assert!(res.best_rate >= res.grid_rate);
            assert!(
                (res.breakdown.total - res.best_rate).abs() <= 1e-12 * res.best_rate.abs().max(1.0)
            );
        }
    }

    #[test]
    fn no_key_is_flagged_not_an_error() {
        let mut p = problem(Scenario::SingleMode, OpKind::None, 0, 20.0, true);
        p.channel = ChannelParams::from_loss_db(20.0, 2.0).unwrap();
        p.clamp = false;
        let res = optimize(&p).unwrap();
        assert!(!res.positive_key);
        assert!(res.best_rate <= 0.0);
    }

    #[test]
    fn memoryless_tensor_grid_is_used() {
        let mut p = problem(Scenario::ExpDecay, OpKind::PS1, 2, 10.0, false);
        p.settings.grid_points = 6;
        p.settings.trace = true;
        let res = optimize(&p).unwrap();
        assert!(res.trace.as_ref().unwrap().len() >= 6);
        // The grid optimum bounds every tabulated point from below.
        for g in gain_grid(&p.bounds, 6) {
            for &t1 in &transmissivity_grid(&p.bounds, 6) {
                for &t2 in &transmissivity_grid(&p.bounds, 6) {
                    let r = p.evaluate(g, &[t1, t2]).unwrap().total;
                    assert!(r <= res.grid_rate + 1e-12);
                }
            }
        }
    }

    #[test]
    fn invalid_problems_are_rejected() {
        let mut p = problem(Scenario::ExpDecay, OpKind::PC0, 6, 10.0, true);
        assert!(matches!(
            optimize(&p),
            Err(Error::SelectionExceedsModes { .. })
        ));
        p.k_sel = 1;
        p.bounds.t_max = 1.0;
        assert!(matches!(optimize(&p), Err(Error::InvalidProblem(_))));
    }
}

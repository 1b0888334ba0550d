mod args;
mod config;
mod error;
mod output;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use cvqkd_core::channel::distance_km;
use cvqkd_core::ops::NonGaussianOp;
use cvqkd_core::optimizer::{optimize, OptimizationResult, TracePoint};
use cvqkd_core::verify::{self, CheckStatus, Tolerances, VerifyConfig};
use rayon::prelude::*;
use serde::Serialize;

use args::{Cli, Command, Format, OptimizeArgs, PointArgs, RunArgs, VerifyArgs};
use config::RunConfig;
use error::CliError;
use output::{fmt_f64, write_csv, write_json, SweepRecord};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Point(a) => cmd_point(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::Optimize(a) => cmd_optimize(&a),
        Command::Verify(a) => cmd_verify(&a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("cvqkd: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

/// Opens the destination up front so a bad path fails before any work.
fn open_sink(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    match path {
        None => Ok(Box::new(io::stdout().lock())),
        Some(p) => {
            let f = File::create(p)
                .map_err(|e| CliError::Usage(format!("--out {}: {e}", p.display())))?;
            Ok(Box::new(BufWriter::new(f)))
        }
    }
}

fn record(
    cfg: &RunConfig,
    loss_db: f64,
    gain: f64,
    t: &[f64],
    res: &cvqkd_core::keyrate::KeyRateResult,
    evaluations: usize,
) -> SweepRecord {
    SweepRecord {
        loss_db,
        eta_e: cvqkd_core::channel::loss_to_transmissivity(loss_db),
        distance_km: distance_km(loss_db, cfg.attenuation),
        scenario: cfg.scenario.label().to_string(),
        op: cfg.op.label().to_string(),
        k_sel: cfg.active_modes(),
        memory: cfg.memory,
        best_gain: gain,
        best_t: t.to_vec(),
        total_rate: res.total,
        per_mode_rates: res.per_mode_rates.clone(),
        per_mode_probs: res.per_mode_probs.clone(),
        evaluations,
    }
}

fn optimized_record(cfg: &RunConfig, loss_db: f64, res: &OptimizationResult) -> SweepRecord {
    record(
        cfg,
        loss_db,
        res.best_gain,
        &res.best_t,
        &res.breakdown,
        res.evaluations,
    )
}

fn emit(cfg: &RunConfig, sink: Box<dyn Write>, records: &[SweepRecord]) -> Result<(), CliError> {
    match cfg.format {
        Format::Csv => write_csv(sink, records),
        Format::Json => write_json(sink, records),
    }
}

fn cmd_point(args: &PointArgs) -> Result<ExitCode, CliError> {
    let cfg = RunConfig::resolve(&args.run, args.gain, &args.t)?;
    let loss = cfg.single_loss("point")?;
    let gain = cfg
        .gain
        .ok_or_else(|| CliError::Usage("point needs --gain".into()))?;
    if !(gain >= 0.0 && gain.is_finite()) {
        return Err(CliError::Usage(format!(
            "--gain {gain} must be finite and >= 0"
        )));
    }
    let k = cfg.active_modes();
    let t: Vec<f64> = match (k, cfg.t.len()) {
        (0, _) => Vec::new(),
        (_, 0) => return Err(CliError::Usage("point with an operation needs --t".into())),
        (_, 1) => vec![cfg.t[0]; k],
        (k, n) if k == n => cfg.t.clone(),
        (k, n) => {
            return Err(CliError::Usage(format!(
                "--t has {n} values for {k} operated modes"
            )))
        }
    };
    for &x in &t {
        NonGaussianOp::new(cfg.op, x).map_err(|e| CliError::Usage(format!("--t: {e}")))?;
    }
    let problem = cfg.problem(loss)?;
    let sink = open_sink(cfg.out.as_deref())?;
    let res = problem.evaluate(gain, &t)?;
    let rec = record(&cfg, loss, gain, &t, &res, cfg.spectrum.k_max());
    emit(&cfg, sink, &[rec])?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(args: &RunArgs) -> Result<ExitCode, CliError> {
    let cfg = RunConfig::resolve(args, None, &[])?;
    let problems = cfg
        .losses
        .iter()
        .map(|&l| cfg.problem(l))
        .collect::<Result<Vec<_>, _>>()?;
    let sink = open_sink(cfg.out.as_deref())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| CliError::Usage(format!("--workers: {e}")))?;
    // Indexed collect keeps loss-ascending order whatever the finishing order.
    let results = pool.install(|| {
        problems
            .par_iter()
            .map(optimize)
            .collect::<Result<Vec<_>, _>>()
    })?;
    let records: Vec<SweepRecord> = cfg
        .losses
        .iter()
        .zip(&results)
        .map(|(&l, r)| optimized_record(&cfg, l, r))
        .collect();
    emit(&cfg, sink, &records)?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct OptimizeOutput<'a> {
    record: &'a SweepRecord,
    grid_rate: f64,
    at_gain_bound: bool,
    positive_key: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    trace: Option<&'a [TracePoint]>,
}

fn cmd_optimize(args: &OptimizeArgs) -> Result<ExitCode, CliError> {
    let cfg = RunConfig::resolve(&args.run, None, &[])?;
    let loss = cfg.single_loss("optimize")?;
    let mut problem = cfg.problem(loss)?;
    problem.settings.trace = args.trace;
    let sink = open_sink(cfg.out.as_deref())?;
    let res = optimize(&problem)?;
    let rec = optimized_record(&cfg, loss, &res);
    if !res.positive_key {
        eprintln!("cvqkd: no positive key at {loss} dB");
    }
    if res.at_gain_bound {
        eprintln!(
            "cvqkd: optimum sits on the gain bound {}",
            problem.bounds.gain_max
        );
    }
    match cfg.format {
        Format::Csv => write_csv(sink, &[rec])?,
        Format::Json => write_json(
            sink,
            &OptimizeOutput {
                record: &rec,
                grid_rate: res.grid_rate,
                at_gain_bound: res.at_gain_bound,
                positive_key: res.positive_key,
                trace: res.trace.as_deref(),
            },
        )?,
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(args: &VerifyArgs) -> Result<ExitCode, CliError> {
    let mut config = VerifyConfig::default();
    if let Some(tol) = args.tol {
        config.tolerances = Tolerances::uniform(tol);
    }
    let t = &mut config.tolerances;
    t.cm = args.cm_tol.unwrap_or(t.cm);
    t.probability = args.prob_tol.unwrap_or(t.probability);
    t.mutual_info = args.mi_tol.unwrap_or(t.mutual_info);
    if let Some(n) = args.draws {
        config.mi_draws = n;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if let Some(name) = &args.inject_fault {
        config.model = verify::faults::by_name(name)
            .ok_or_else(|| CliError::Usage(format!("unknown fault '{name}'")))?;
    }
    let sink = args
        .out
        .as_deref()
        .map(|p| open_sink(Some(p)))
        .transpose()?;

    let report = verify::run(&config)?;
    let mut stdout = io::stdout().lock();
    writeln!(
        stdout,
        "{:<24} {:>24} {:>10}  status",
        "check", "max_deviation", "tolerance"
    )?;
    for c in &report.checks {
        writeln!(
            stdout,
            "{:<24} {:>24} {:>10.1e}  {}{}",
            c.id,
            fmt_f64(c.max_deviation),
            c.tolerance,
            c.status.label(),
            if c.status == CheckStatus::Pass {
                String::new()
            } else {
                format!(" at {}", c.worst_case)
            }
        )?;
    }
    if let Some(sink) = sink {
        write_json(sink, &report)?;
    }
    if report.passed() {
        writeln!(stdout, "verify: all {} checks passed", report.checks.len())?;
        Ok(ExitCode::SUCCESS)
    } else {
        let failing: Vec<&str> = report.failing().iter().map(|c| c.id.as_str()).collect();
        writeln!(stdout, "verify: FAILED {}", failing.join(", "))?;
        Ok(ExitCode::from(1))
    }
}

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use iabrate::analysis::{compare_strategies, critical_load, optimal_eta, percentile_rate, Percentile};
use iabrate::channel::db_to_linear;
use iabrate::coverage::{snr_cdf_curves, CoverageModel, CoverageThresholds};
use iabrate::load::Station;
use iabrate::rate::{BandwidthSplit, RateEngine};
use iabrate::simulator::{rate_coverage_of, simulate, TrialOutcome};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Access SNR CDFs and coverage probability over a threshold grid.
    Coverage,
    /// Analytic rate coverage over the split grid.
    RateSweep,
    /// Monte Carlo rate coverage over the split grid.
    Simulate,
    /// Refined split search for the best rate coverage.
    OptimalEta,
    /// Median and fifth-percentile rates over the split grid.
    Percentiles,
    /// Largest per-hotspot load at which splitting still pays, per bandwidth.
    CriticalLoad,
    /// Best split, coverage and percentile rates of every strategy.
    Compare,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Coverage => "coverage",
            Command::RateSweep => "rate-sweep",
            Command::Simulate => "simulate",
            Command::OptimalEta => "optimal-eta",
            Command::Percentiles => "percentiles",
            Command::CriticalLoad => "critical-load",
            Command::Compare => "compare",
        }
    }
}

/// A CSV table. Every row ends with the config hash.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&'static str]) -> Self {
        let mut header = header.to_vec();
        header.push("config_hash");
        Self { header, rows: Vec::new() }
    }

    fn push(&mut self, mut row: Vec<String>, hash: &str) {
        row.push(hash.to_owned());
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write<W: Write>(&self, w: W) -> Result<(), CliError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.header)?;
        for row in &self.rows {
            out.write_record(row)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let i = self.header.iter().position(|h| *h == name)?;
        Some(self.rows.iter().map(|r| r[i].as_str()).collect())
    }
}

/// What a command produced.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub table: Table,
    /// Human-readable summary lines.
    pub notes: Vec<String>,
    /// Set when a requested percentile has no solution on the grid.
    pub unattainable: Option<String>,
}

impl Outcome {
    fn of(table: Table) -> Self {
        Self { table, notes: Vec::new(), unattainable: None }
    }
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn run(command: Command, cfg: &RunConfig) -> Result<Outcome, CliError> {
    cfg.validate()?;
    match command {
        Command::Coverage => coverage(cfg),
        Command::RateSweep => rate_sweep(cfg),
        Command::Simulate => simulate_sweep(cfg),
        Command::OptimalEta => optimal(cfg),
        Command::Percentiles => percentiles(cfg),
        Command::CriticalLoad => critical(cfg),
        Command::Compare => compare(cfg),
    }
}

fn coverage(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let params = cfg.network();
    let quad = cfg.quadrature();
    let theta_db = cfg.theta_db_grid();
    let theta: Vec<f64> = theta_db.iter().map(|&t| db_to_linear(t)).collect();
    let cdf = snr_cdf_curves(&theta, &params, &quad)?;
    let model = CoverageModel::new(&params, &quad)?;
    let hash = cfg.hash();
    let mut table = Table::new(&["theta_db", "snr_cdf_abs", "snr_cdf_sbs", "pc"]);
    for (i, &t) in theta.iter().enumerate() {
        let pc = model.coverage_probability(&CoverageThresholds::uniform(t));
        table.push(vec![num(theta_db[i]), num(cdf.abs[i]), num(cdf.sbs[i]), num(pc)], &hash);
    }
    Ok(Outcome::of(table))
}

const SWEEP_HEADER: [&str; 5] = ["eta", "pr_total", "pr_abs", "pr_sbs", "stderr"];

fn rate_sweep(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let cov = CoverageModel::new(&cfg.network(), &cfg.quadrature())?;
    let engine = RateEngine::new(&cov);
    let q = cfg.query();
    let hash = cfg.hash();
    let mut table = Table::new(&SWEEP_HEADER);
    for eta in cfg.grid().points() {
        let r = engine.rate_coverage(&q.with_eta(eta))?;
        table.push(vec![num(eta), num(r.total), num(r.abs), num(r.sbs), String::new()], &hash);
    }
    Ok(Outcome::of(table))
}

fn simulate_sweep(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let params = cfg.network();
    let q = cfg.query();
    let outcomes = simulate(cfg.trials, &params, &q.model, cfg.seed)?;
    let hash = cfg.hash();
    let mut table = Table::new(&SWEEP_HEADER);
    let n = outcomes.len() as f64;
    for eta in cfg.grid().points() {
        let qe = q.with_eta(eta);
        let total = rate_coverage_of(&outcomes, &qe, &params);
        let covered = |station: Station| {
            let hits = outcomes
                .iter()
                .filter(|o: &&TrialOutcome| o.association == station)
                .filter(|o| o.rate(qe.strategy, BandwidthSplit { eta }, &params) > qe.rho)
                .count();
            hits as f64 / n
        };
        table.push(
            vec![num(eta), num(total.value), num(covered(Station::Abs)), num(covered(Station::Sbs)), num(total.stderr)],
            &hash,
        );
    }
    Ok(Outcome::of(table))
}

fn optimal(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let cov = CoverageModel::new(&cfg.network(), &cfg.quadrature())?;
    let engine = RateEngine::new(&cov);
    let sweep = optimal_eta(&engine, &cfg.query(), &cfg.grid())?;
    let hash = cfg.hash();
    let mut table = Table::new(&["eta", "pr_total", "is_optimum"]);
    for (&eta, &v) in sweep.grid.iter().zip(&sweep.values) {
        table.push(vec![num(eta), num(v), (eta == sweep.argmax).to_string()], &hash);
    }
    let mut out = Outcome::of(table);
    out.notes.push(format!("eta* = {} with rate coverage {}", sweep.argmax, sweep.max));
    Ok(out)
}

fn percentiles(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let cov = CoverageModel::new(&cfg.network(), &cfg.quadrature())?;
    let engine = RateEngine::new(&cov);
    let q = cfg.query();
    let hash = cfg.hash();
    let mut table = Table::new(&["eta", "rho50", "rho95"]);
    let (mut best50, mut best95) = (None::<(f64, f64)>, None::<(f64, f64)>);
    for eta in cfg.grid().points() {
        let qe = q.with_eta(eta);
        let r50 = percentile_rate(&engine, &qe, Percentile::Median)?.rate();
        let r95 = percentile_rate(&engine, &qe, Percentile::Fifth)?.rate();
        for (best, r) in [(&mut best50, r50), (&mut best95, r95)] {
            if let Some(r) = r {
                if best.is_none_or(|(_, b)| r > b) {
                    *best = Some((eta, r));
                }
            }
        }
        table.push(vec![num(eta), opt(r50), opt(r95)], &hash);
    }
    let mut out = Outcome::of(table);
    let mut missing = Vec::new();
    for (label, best) in [("rho50", best50), ("rho95", best95)] {
        match best {
            Some((eta, r)) => out.notes.push(format!("best {label} = {r} bit/s at eta = {eta}")),
            None => missing.push(label),
        }
    }
    if !missing.is_empty() {
        out.unattainable = Some(format!("{} not reached at any split on the grid", missing.join(" and ")));
    }
    Ok(out)
}

fn critical(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let base = if cfg.freeze_noise { cfg.network().with_frozen_noise() } else { cfg.network() };
    let quad = cfg.quadrature();
    let m_bars: Vec<f64> = (cfg.m_bar_min..=cfg.m_bar_max).map(f64::from).collect();
    let hash = cfg.hash();
    let mut table = Table::new(&["bandwidth_hz", "critical_m_bar", "critical_total_load", "at_upper_boundary"]);
    for w in cfg.bandwidths() {
        let cov = CoverageModel::new(&base.with_bandwidth(w), &quad)?;
        let engine = RateEngine::new(&cov);
        let c = critical_load(&engine, &cfg.query(), &m_bars, cfg.epsilon, &cfg.grid())?;
        table.push(vec![num(w), opt(c.m_bar), opt(c.total_load), c.at_upper_boundary.to_string()], &hash);
    }
    Ok(Outcome::of(table))
}

fn compare(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let params = cfg.network();
    let cov = CoverageModel::new(&params, &cfg.quadrature())?;
    let engine = RateEngine::new(&cov);
    let q = cfg.query();
    let rows = compare_strategies(&engine, &q, &cfg.grid())?;
    let outcomes = simulate(cfg.trials, &params, &q.model, cfg.seed)?;
    let hash = cfg.hash();
    let mut table = Table::new(&[
        "strategy",
        "eta_star",
        "pr_star",
        "rho50",
        "rho95",
        "eta_rho50",
        "eta_rho95",
        "mc_pr_star",
        "mc_stderr",
    ]);
    for s in rows {
        let mc = rate_coverage_of(&outcomes, &q.with_eta(s.eta_star).with_strategy(s.strategy), &params);
        table.push(
            vec![
                s.strategy.name().to_owned(),
                num(s.eta_star),
                num(s.pr_star),
                num(s.rho50),
                num(s.rho95),
                num(s.eta_rho50),
                num(s.eta_rho95),
                num(mc.value),
                num(mc.stderr),
            ],
            &hash,
        );
    }
    Ok(Outcome::of(table))
}

/// Everything needed to reproduce an artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: Command,
    pub config: RunConfig,
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub artifact: String,
    pub wall_time_s: f64,
}

/// `results.csv` → `results.manifest.json`.
pub fn manifest_path(csv: &Path) -> PathBuf {
    csv.with_extension("manifest.json")
}

/// Writes the table to `out` plus its manifest, or the table alone to
/// stdout.
pub fn write_outputs(
    command: Command,
    cfg: &RunConfig,
    table: &Table,
    out: Option<&Path>,
    wall_time_s: f64,
) -> Result<(), CliError> {
    let Some(path) = out else {
        return table.write(io::stdout().lock());
    };
    table.write(fs::File::create(path)?)?;
    let manifest = Manifest {
        command,
        config: cfg.clone(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        version: env!("CARGO_PKG_VERSION").to_owned(),
        artifact: path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
        wall_time_s,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(manifest_path(path), json + "\n")?;
    Ok(())
}

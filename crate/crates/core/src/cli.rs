//! Command-line front end. Every command emits one JSON record per result
//! (or a CSV table with `--format csv`) and exits with 0 on success, 2 for
//! configuration or usage errors, 3 for numerical failures and 4 when
//! `verify` finds a failing check.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{ConfigDocument, RunConfig};
use crate::criteria::{
    beta_star_residual, classify_phase, solve_beta_star, theta_of_d, PhaseVerdict, ThetaResolution,
};
use crate::error::{Error, Result};
use crate::loops::{write_configuration, GaussianLoopFactory, LoopConfiguration};
use crate::record::{cell, unix_now, ResultRecord, Table, Timestamps};
use crate::sampler::{
    gks_audit, parallel_chains, slice_of_time, split_settings, Chain, EstimateReport, MatsubaraObserver,
    MatsubaraPoint, OrderParameterObserver, TestFunction,
};
use crate::spectral::{geometric_masses, rigidity_mass_scan, solve_spectrum};
use crate::stats::fnv1a64;
use crate::verify::run_suite;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "anharmonic", version, about = "Phase criteria and path-integral Monte Carlo for quantum anharmonic crystals")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Configuration file (sectioned key = value text).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Write output here instead of standard output.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Master seed; overrides chain.seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for parallel scans and chains.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Records)]
    pub format: Format,
    /// Override a configuration key, e.g. `--set model.J=0.4`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Add start and end times to every record.
    #[arg(long, global = true)]
    pub timestamps: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Records,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Lowest eigenvalues, spectral gap and effective rigidity R_m.
    Spectrum,
    /// R_m across a geometric mass window and its small-mass slope.
    RigidityScan,
    /// The lattice constant theta(d).
    Theta {
        /// Lattice dimension (defaults to model.d).
        #[arg(long)]
        d: Option<usize>,
        /// Coarse nodes per axis (defaults to run.theta_nodes).
        #[arg(long)]
        nodes: Option<usize>,
    },
    /// Critical inverse temperature beta*.
    BetaStar,
    /// Which sufficient condition, if any, the parameters satisfy.
    Classify,
    /// Run Metropolis chains and report acceptance and the order parameter.
    Sample {
        /// Save the final configuration of chain 0 in the binary loop format.
        #[arg(long, value_name = "PATH")]
        save: Option<PathBuf>,
        /// Save a resumable checkpoint of chain 0.
        #[arg(long, value_name = "PATH")]
        checkpoint: Option<PathBuf>,
    },
    /// Matsubara product of run.functions at run.sites and run.times.
    Matsubara,
    /// Slice-averaged displacement at run.site.
    OrderParameter,
    /// Plus/minus sign audit of a three-point Matsubara function.
    GksAudit,
    /// Run the built-in verification suite.
    Verify {
        /// Run only these checks (repeatable).
        #[arg(long = "criterion", value_name = "N")]
        criteria: Vec<u32>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::RigidityScan => "rigidity-scan",
            Command::Theta { .. } => "theta",
            Command::BetaStar => "beta-star",
            Command::Classify => "classify",
            Command::Sample { .. } => "sample",
            Command::Matsubara => "matsubara",
            Command::OrderParameter => "order-parameter",
            Command::GksAudit => "gks-audit",
            Command::Verify { .. } => "verify",
        }
    }
}

/// What a command produced.
struct Output {
    records: Vec<ResultRecord>,
    table: Table,
    failed_checks: bool,
}

impl Output {
    fn single(record: ResultRecord, table: Table) -> Self {
        Output {
            records: vec![record],
            table,
            failed_checks: false,
        }
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                EXIT_CONFIG
            } else {
                EXIT_NUMERICAL
            }
        }
    }
}

fn execute(cli: &Cli) -> Result<i32> {
    let common = &cli.common;
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(Error::config("--threads", "must be positive"));
        }
        // a pool configured earlier in the same process stays in place
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let started = unix_now();
    let mut output = dispatch(&cli.command, common)?;
    if common.timestamps {
        let stamps = Timestamps {
            started,
            finished: unix_now(),
        };
        for r in &mut output.records {
            r.timestamps = Some(stamps);
        }
    }
    emit(&output, common)?;
    Ok(if output.failed_checks { EXIT_VERIFY } else { EXIT_OK })
}

fn emit(output: &Output, common: &Common) -> Result<()> {
    let sink: Box<dyn Write> = match &common.out {
        Some(path) => Box::new(File::create(path)?),
        None => Box::new(io::stdout().lock()),
    };
    let mut sink = BufWriter::new(sink);
    match common.format {
        Format::Records => {
            for r in &output.records {
                writeln!(sink, "{}", r.to_line())?;
            }
        }
        Format::Csv => output.table.write_csv(&mut sink)?,
    }
    sink.flush()?;
    Ok(())
}

fn document(common: &Common) -> Result<ConfigDocument> {
    let mut doc = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::config("--config", format!("cannot read {}: {e}", path.display())))?;
            ConfigDocument::parse(&text)?
        }
        None => ConfigDocument::default(),
    };
    for assignment in &common.set {
        doc.set_assignment(assignment)?;
    }
    if let Some(seed) = common.seed {
        doc.set("chain.seed", &seed.to_string())?;
    }
    Ok(doc)
}

fn run_config(common: &Common) -> Result<RunConfig> {
    let doc = document(common)?;
    let config = RunConfig::from_document(&doc)?;
    for line in config.defaults_applied(&doc) {
        eprintln!("# default {line}");
    }
    Ok(config)
}

fn dispatch(command: &Command, common: &Common) -> Result<Output> {
    let name = command.name();
    if let Command::Theta { d, nodes } = command {
        return theta(common, *d, *nodes);
    }
    if let Command::Verify { criteria } = command {
        return verify(criteria);
    }
    let config = run_config(common)?;
    let digest = config.digest();
    let seed = config.chain.seed;
    let record = |outputs: Value, seeded: bool| ResultRecord::new(name, &digest, seeded.then_some(seed), outputs);
    let p = &config.model;
    match command {
        Command::Spectrum => {
            let sol = solve_spectrum(p, &config.grid)?;
            let s = &sol.spectrum;
            let mut table = Table::new(&["level", "E"]);
            for (n, e) in s.eigenvalues.iter().enumerate() {
                table.push(vec![n.to_string(), cell(*e)]);
            }
            let outputs = json!({
                "eigenvalues": s.eigenvalues,
                "Delta": s.gap,
                "gap_index": s.gap_index,
                "R_m": s.rigidity,
                "half_width": sol.grid.half_width,
                "points": sol.grid.points,
                "tail_mass": sol.tail_mass,
                "widenings": sol.widenings,
            });
            Ok(Output::single(record(outputs, false), table))
        }
        Command::RigidityScan => {
            let r = &config.run;
            let scan = rigidity_mass_scan(p, &geometric_masses(r.mass_min, r.mass_max, r.mass_points), &config.grid)?;
            let mut table = Table::new(&["m", "Delta", "R_m", "gap_index"]);
            for pt in &scan.points {
                table.push(vec![cell(pt.m), cell(pt.gap), cell(pt.rigidity), pt.gap_index.to_string()]);
            }
            let outputs = json!({ "points": scan.points, "small_mass_slope": scan.small_mass_slope });
            Ok(Output::single(record(outputs, false), table))
        }
        Command::BetaStar => {
            let disp = theta_of_d(p.d, &resolution(config.run.theta_nodes))?;
            let beta_star = solve_beta_star(p, &disp)?;
            let residual = beta_star_residual(p, disp.theta, beta_star)?;
            let mut table = Table::new(&["J_hat", "theta", "beta_star"]);
            table.push(vec![cell(p.j_hat()), cell(disp.theta), cell(beta_star)]);
            let outputs = json!({
                "beta_star": beta_star,
                "theta": disp.theta,
                "J_hat": p.j_hat(),
                "transition_strength": p.transition_strength(),
                "residual": residual,
            });
            Ok(Output::single(record(outputs, false), table))
        }
        Command::Classify => {
            let c = classify_phase(p, &config.grid, &resolution(config.run.theta_nodes))?;
            let verdict = match c.verdict {
                PhaseVerdict::StabilizedAllBeta => "stabilized_all_beta",
                PhaseVerdict::TransitionRegime { .. } => "transition_regime",
                PhaseVerdict::Undetermined => "undetermined",
            };
            let v = &c.values;
            let mut table = Table::new(&["verdict", "J_hat", "R_m", "theta", "beta_star"]);
            let opt = |x: Option<f64>| x.map(cell).unwrap_or_default();
            table.push(vec![verdict.into(), cell(v.j_hat), cell(v.rigidity), opt(v.theta), opt(v.beta_star)]);
            let outputs = json!({
                "verdict": verdict,
                "J_hat": v.j_hat,
                "R_m": v.rigidity,
                "transition_strength": v.transition_strength,
                "theta": v.theta,
                "beta_star": v.beta_star,
            });
            Ok(Output::single(record(outputs, false), table))
        }
        Command::Sample { save, checkpoint } => sample(&config, save.as_deref(), checkpoint.as_deref(), record),
        Command::Matsubara => {
            let (start, factory) = chain_inputs(&config)?;
            let points = matsubara_points(&config)?;
            let runs = parallel_chains(&start, p, &factory, &config.chain, config.chains, || {
                MatsubaraObserver::new(points.clone(), &start)
            })?;
            let report = merged(runs.iter().map(|(o, s)| o.report(s)));
            let mut table = Table::new(&["Gamma", "std_error", "n_samples"]);
            table.push(vec![cell(report.value), cell(report.std_error), report.n_samples.to_string()]);
            Ok(Output::single(record(json!({ "Gamma": report }), true), table))
        }
        Command::OrderParameter => {
            let (start, factory) = chain_inputs(&config)?;
            let runs = parallel_chains(&start, p, &factory, &config.chain, config.chains, || {
                OrderParameterObserver::new(config.run.site, &start)
            })?;
            let report = merged(runs.iter().map(|(o, s)| o.report(s)));
            let mut table = Table::new(&["boundary", "M_hat", "std_error", "n_samples"]);
            table.push(vec![
                config.lattice.boundary.name().into(),
                cell(report.value),
                cell(report.std_error),
                report.n_samples.to_string(),
            ]);
            Ok(Output::single(record(json!({ "M_hat": report }), true), table))
        }
        Command::GksAudit => {
            let (start, factory) = chain_inputs(&config)?;
            let points: [MatsubaraPoint; 3] = matsubara_points(&config)?
                .try_into()
                .map_err(|_| Error::config("run.sites", "the sign audit needs exactly three points"))?;
            let audit = gks_audit(&start, p, &factory, &config.chain, points)?;
            let mut table = Table::new(&["boundary", "Gamma", "std_error"]);
            table.push(vec!["plus".into(), cell(audit.plus.value), cell(audit.plus.std_error)]);
            table.push(vec!["minus".into(), cell(audit.minus.value), cell(audit.minus.std_error)]);
            Ok(Output::single(record(serde_json::to_value(&audit).expect("serializable"), true), table))
        }
        Command::Theta { .. } | Command::Verify { .. } => unreachable!("handled above"),
    }
}

fn resolution(nodes: usize) -> ThetaResolution {
    ThetaResolution {
        nodes,
        ..ThetaResolution::default()
    }
}

fn theta(common: &Common, d: Option<usize>, nodes: Option<usize>) -> Result<Output> {
    let doc = document(common)?;
    let parse = |key: &str| -> Result<Option<usize>> {
        doc.get(key)
            .map(|v| v.parse().map_err(|_| Error::config(key, format!("expected an integer, got `{v}`"))))
            .transpose()
    };
    let d = match d {
        Some(d) => d,
        None => parse("model.d")?.ok_or_else(|| Error::config("--d", "give --d or model.d"))?,
    };
    let nodes = match nodes {
        Some(n) => n,
        None => parse("run.theta_nodes")?.unwrap_or(ThetaResolution::default().nodes),
    };
    if nodes < 4 || nodes % 2 != 0 {
        return Err(Error::config("run.theta_nodes", "need an even node count of at least 4"));
    }
    let canonical = format!("[model]\nd = {d}\n\n[run]\ntheta_nodes = {nodes}\n");
    let digest = format!("{:016x}", fnv1a64(canonical.as_bytes()));
    let disp = theta_of_d(d, &resolution(nodes))?;
    let mut table = Table::new(&["d", "theta", "method"]);
    table.push(vec![d.to_string(), cell(disp.theta), format!("{:?}", disp.method).to_lowercase()]);
    let outputs = serde_json::to_value(disp).expect("serializable");
    Ok(Output::single(ResultRecord::new("theta", &digest, None, outputs), table))
}

fn verify(criteria: &[u32]) -> Result<Output> {
    let outcomes = run_suite(criteria)?;
    let mut table = Table::new(&["id", "title", "passed", "gated", "elapsed_s", "detail"]);
    let mut records = Vec::new();
    let ids: Vec<String> = outcomes.iter().map(|o| o.id.to_string()).collect();
    let digest = format!("{:016x}", fnv1a64(format!("verify {}", ids.join(",")).as_bytes()));
    for o in &outcomes {
        eprintln!("{}", o.line());
        table.push(vec![
            o.id.to_string(),
            o.title.clone(),
            o.passed.to_string(),
            o.gated.to_string(),
            format!("{:.3}", o.elapsed_s),
            o.detail.clone(),
        ]);
        records.push(ResultRecord::new("verify", &digest, None, serde_json::to_value(o).expect("serializable")));
    }
    Ok(Output {
        records,
        table,
        failed_checks: outcomes.iter().any(|o| !o.acceptable()),
    })
}

/// Start configuration (every loop at the exterior value) and reference sampler.
fn chain_inputs(config: &RunConfig) -> Result<(LoopConfiguration, GaussianLoopFactory)> {
    let l = &config.lattice;
    let start = LoopConfiguration::uniform(
        config.volume(),
        l.boundary.exterior_value(),
        l.slices,
        config.model.beta,
        l.boundary,
    )?;
    let factory = GaussianLoopFactory::for_params(&config.model, l.slices)?;
    Ok((start, factory))
}

fn matsubara_points(config: &RunConfig) -> Result<Vec<MatsubaraPoint>> {
    let r = &config.run;
    r.sites
        .iter()
        .zip(&r.times)
        .zip(&r.functions)
        .map(|((&site, &tau), f)| {
            Ok(MatsubaraPoint {
                site,
                slice: slice_of_time(config.model.beta, config.lattice.slices, tau)?,
                function: TestFunction::parse(f)?,
            })
        })
        .collect()
}

fn merged(reports: impl Iterator<Item = EstimateReport>) -> EstimateReport {
    reports.reduce(|a, b| a.merge(&b)).expect("at least one chain")
}

fn sample(
    config: &RunConfig,
    save: Option<&Path>,
    checkpoint: Option<&Path>,
    record: impl Fn(Value, bool) -> ResultRecord,
) -> Result<Output> {
    let p = &config.model;
    let (start, factory) = chain_inputs(config)?;
    let runs = (0..config.chains as u64)
        .into_par_iter()
        .map(|i| {
            let settings = split_settings(&config.chain, i);
            let mut chain = Chain::new(start.clone(), p, &factory, &settings)?;
            let mut order = OrderParameterObserver::new(config.run.site, &start)?;
            let summary = chain.run(&mut [&mut order]);
            Ok((chain, order.report(&summary), summary))
        })
        .collect::<Result<Vec<_>>>()?;
    let (first, _, _) = &runs[0];
    if let Some(path) = save {
        write_configuration(first.configuration(), &mut BufWriter::new(File::create(path)?))?;
    }
    if let Some(path) = checkpoint {
        first.write_checkpoint(&mut BufWriter::new(File::create(path)?))?;
    }
    let mut table = Table::new(&["chain", "stream", "redraw", "nudge", "flip", "M_hat", "std_error"]);
    let opt = |x: Option<f64>| x.map(cell).unwrap_or_default();
    let mut chains = Vec::new();
    for (i, (_, report, summary)) in runs.iter().enumerate() {
        table.push(vec![
            i.to_string(),
            summary.settings.stream.to_string(),
            opt(summary.acceptance.redraw),
            opt(summary.acceptance.nudge),
            opt(summary.acceptance.flip),
            cell(report.value),
            cell(report.std_error),
        ]);
        chains.push(json!({ "stream": summary.settings.stream, "summary": summary, "M_hat": report }));
    }
    let pooled = merged(runs.iter().map(|(_, r, _)| r.clone()));
    Ok(Output::single(record(json!({ "chains": chains, "M_hat": pooled }), true), table))
}

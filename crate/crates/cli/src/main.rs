mod config;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use evcorr::correlator::write_csv;
use evcorr::evaluation::{latency_report, score, Report, Selection};
use evcorr::heuristics::extract_heuristics;
use evcorr::model::{parse_pnml_with, parse_simple_net_with};
use evcorr::stream::{read_events, read_labeled, replay, strip_case_ids, EventWriter, WallClock};
use evcorr::{build_task_dependencies, validate, Correlator, HeuristicTable, TaskDependencies, WorkflowNet};

use config::{Flags, ModelFormat, RunConfig};

#[derive(Parser)]
#[command(
    name = "evcorr",
    version,
    about = "Correlate unlabeled process events with cases of a workflow net"
)]
struct Cli {
    /// TOML file with default values for the flags below
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a model and print its task dependencies as JSON
    Analyze {
        #[command(flatten)]
        flags: Flags,
    },
    /// Correlate an event stream and write the labeled log as CSV
    Correlate {
        #[command(flatten)]
        flags: Flags,
    },
    /// Re-emit an event stream, paced by its timestamps
    Replay {
        #[command(flatten)]
        flags: Flags,
    },
    /// Strip case ids from a labeled log, correlate it and score the result
    Evaluate {
        #[command(flatten)]
        flags: Flags,
    },
    /// Derive duration bounds per activity from a labeled log
    ExtractHeuristics {
        #[command(flatten)]
        flags: Flags,
        /// Bounds `MIN,MAX` given to activities without any duration sample
        #[arg(long, value_parser = parse_bounds)]
        fill: Option<(i64, i64)>,
    },
}

fn parse_bounds(s: &str) -> Result<(i64, i64), String> {
    let (lo, hi) = s.split_once(',').ok_or("expected MIN,MAX")?;
    let lo: i64 = lo.trim().parse().map_err(|e| format!("{e}"))?;
    let hi: i64 = hi.trim().parse().map_err(|e| format!("{e}"))?;
    if lo < 0 || hi < lo {
        return Err(format!("need 0 <= MIN <= MAX, got {lo},{hi}"));
    }
    Ok((lo, hi))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let config = cli.config.as_deref();
    match cli.command {
        Command::Analyze { flags } => analyze(&RunConfig::resolve(config, flags)?),
        Command::Correlate { flags } => correlate(&RunConfig::resolve(config, flags)?),
        Command::Replay { flags } => replay_events(&RunConfig::resolve(config, flags)?),
        Command::Evaluate { flags } => evaluate(&RunConfig::resolve(config, flags)?),
        Command::ExtractHeuristics { flags, fill } => extract(&RunConfig::resolve(config, flags)?, fill),
    }
}

fn output(config: &RunConfig) -> Result<Box<dyn Write>> {
    Ok(match &config.output {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).with_context(|| format!("creating {}", path.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn open_input(path: &Path) -> Result<Box<dyn io::Read>> {
    if path.as_os_str() == "-" {
        return Ok(Box::new(io::stdin().lock()));
    }
    Ok(Box::new(
        File::open(path).with_context(|| format!("opening {}", path.display()))?,
    ))
}

/// Parses and validates the model. Validation errors are printed and turn
/// into a failure; warnings are printed and otherwise ignored.
fn load_model(config: &RunConfig) -> Result<(WorkflowNet, TaskDependencies)> {
    let path = RunConfig::require(&config.model, "model")?;
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let net = match config.model_format(path) {
        ModelFormat::Pnml => parse_pnml_with(&text, &config.silent_labels),
        ModelFormat::Simple => parse_simple_net_with(&text, &config.silent_labels),
    }
    .with_context(|| format!("parsing {}", path.display()))?;
    let diagnostics = validate(&net);
    for w in &diagnostics.warnings {
        eprintln!("warning: {w}");
    }
    if !diagnostics.is_ok() {
        for e in &diagnostics.errors {
            eprintln!("invalid model: {e}");
        }
        bail!("{} is not a valid workflow net", path.display());
    }
    let td = build_task_dependencies(&net).context("deriving task dependencies")?;
    Ok((net, td))
}

fn load_heuristics(config: &RunConfig) -> Result<HeuristicTable> {
    let path = RunConfig::require(&config.heuristics, "heuristics")?;
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    HeuristicTable::load(file).with_context(|| format!("reading {}", path.display()))
}

fn analyze(config: &RunConfig) -> Result<()> {
    let (_, td) = load_model(config)?;
    let mut out = output(config)?;
    writeln!(out, "{}", td.to_json())?;
    out.flush()?;
    Ok(())
}

fn correlate(config: &RunConfig) -> Result<()> {
    let (_, td) = load_model(config)?;
    let heuristics = load_heuristics(config)?;
    let input = RunConfig::require(&config.input, "input")?;
    let read = read_events(open_input(input)?, config.event_format(input))?;
    for w in &read.warnings {
        eprintln!("warning: {w}");
    }

    let mut correlator = Correlator::with_mode(&td, &heuristics, config.mode.into())?;
    let mut noise = 0usize;
    let report = replay(&read.events, config.speedup, &mut WallClock::default(), |e| {
        let outcome = correlator.ingest(e.clone())?;
        noise += outcome.is_noise() as usize;
        Ok::<_, evcorr::correlator::CorrelateError>(())
    })?;

    let mut out = output(config)?;
    write_csv(&mut out, correlator.export_log(config.threshold))?;
    out.flush()?;
    eprintln!(
        "events: {}, cases: {}, noise: {}",
        report.delivered,
        correlator.store().case_count(),
        noise
    );
    Ok(())
}

fn replay_events(config: &RunConfig) -> Result<()> {
    let input = RunConfig::require(&config.input, "input")?;
    let read = read_events(open_input(input)?, config.event_format(input))?;
    for w in &read.warnings {
        eprintln!("warning: {w}");
    }
    let mut out = EventWriter::new(output(config)?, false)?;
    let report = replay(&read.events, config.speedup, &mut WallClock::default(), |e| {
        out.write(e, None)
    })?;
    eprintln!(
        "delivered: {}, elapsed: {:.3}s",
        report.delivered,
        report.elapsed.as_secs_f64()
    );
    Ok(())
}

fn evaluate(config: &RunConfig) -> Result<()> {
    let (_, td) = load_model(config)?;
    let heuristics = load_heuristics(config)?;
    let path = RunConfig::require(&config.truth, "truth")?;
    let read = read_labeled(open_input(path)?, config.event_format(path))?;
    for w in &read.warnings {
        eprintln!("warning: {w}");
    }
    let (events, truth) = strip_case_ids(&read.events);

    let mut correlator = Correlator::with_mode(&td, &heuristics, config.mode.into())?;
    let run = replay(&events, config.speedup, &mut WallClock::default(), |e| {
        correlator.ingest(e.clone()).map(drop)
    })?;

    let selection = if config.threshold > 0.0 {
        Selection::Threshold(config.threshold)
    } else {
        Selection::MaxTrust
    };
    let counts = score(correlator.store().instances(), &truth, selection)?;
    let report = Report::new(counts, latency_report(&run.latencies));
    let mut out = output(config)?;
    serde_json::to_writer_pretty(&mut out, &report)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn extract(config: &RunConfig, fill: Option<(i64, i64)>) -> Result<()> {
    let input = RunConfig::require(&config.input, "input")?;
    let read = read_labeled(open_input(input)?, config.event_format(input))?;
    for w in &read.warnings {
        eprintln!("warning: {w}");
    }
    let td = match &config.model {
        Some(_) => Some(load_model(config)?.1),
        None => None,
    };
    let mut extraction = extract_heuristics(&read.events, td.as_ref());
    for w in &extraction.warnings {
        eprintln!("warning: {w}");
    }
    for activity in &extraction.unmeasured {
        match fill {
            Some((lo, hi)) => {
                extraction.table.insert(activity.clone(), lo, hi);
            }
            None => eprintln!("warning: no duration sample for {activity}"),
        }
    }
    let mut out = output(config)?;
    extraction.table.save(&mut out)?;
    out.flush()?;
    Ok(())
}

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use uavsec::audit::{full_audit, recommend_policy, PolicyTier};
use uavsec::config::{BatchReport, CatalogDocument, ConfigDocument, Report, SimulationReport};
use uavsec::model::{select_method, SecurityLevel, SelectQuery};
use uavsec::sim::{run, run_batch, AdversaryPlan, Metrics, Scenario};
use uavsec::{presets, ProtocolRegistry};

#[derive(Parser)]
#[command(name = "uavsec", version, about = "Drone wireless-link security simulator and auditor")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the configured scenario and report metrics.
    Simulate {
        config: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        /// Directory for report.json and transcript.jsonl.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Check the configuration against the security checklist.
    /// Exit status: 0 compliant, 1 non-compliant, 2 configuration error.
    Audit {
        config: PathBuf,
        /// Also fail when a segment uses an encryption mode without integrity.
        #[arg(long)]
        strict: bool,
        /// Write the report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Repeat a passive codebook attack and summarize completion time.
    Codebook {
        config: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 1000)]
        reps: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Capture frames on the configured link and replay them.
    Replay {
        config: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        /// Captures collected before replaying (defaults to the config's plan, else 10).
        #[arg(long)]
        captures: Option<u32>,
        /// Number of replays (defaults to the config's plan, else 100).
        #[arg(long)]
        injections: Option<u32>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recommend per-segment encryption strength.
    Policy {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a built-in configuration.
    Preset {
        #[arg(value_parser = preset_names())]
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the link-method catalog.
    Catalog {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank link methods meeting range, rate and security requirements.
    Select {
        #[arg(long)]
        range_m: f64,
        #[arg(long, default_value_t = 0.0)]
        rate_bps: f64,
        #[arg(long, value_enum, default_value_t = Level::Low)]
        security: Level,
        #[arg(long)]
        include_provisional: bool,
        /// Catalog file; the built-in catalog when omitted.
        #[arg(long)]
        catalog: Option<PathBuf>,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    /// Overrides the config's seed.
    #[arg(long, env = "UAVSEC_SEED")]
    seed: Option<u64>,
    #[arg(long)]
    ticks: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Records,
}

#[derive(Clone, Copy, ValueEnum)]
enum Level {
    Low,
    Medium,
    High,
}

impl From<Level> for SecurityLevel {
    fn from(l: Level) -> Self {
        match l {
            Level::Low => SecurityLevel::Low,
            Level::Medium => SecurityLevel::Medium,
            Level::High => SecurityLevel::High,
        }
    }
}

fn preset_names() -> clap::builder::PossibleValuesParser {
    let mut names = presets::NAMES.to_vec();
    names.push("empty");
    clap::builder::PossibleValuesParser::new(names)
}

/// Anything that is the caller's fault: bad paths, malformed documents,
/// inconsistent scenarios. Maps to exit status 2.
struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

type Outcome = Result<ExitCode, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(Failure(msg)) => {
            eprintln!("uavsec: {msg}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cmd: Cmd) -> Outcome {
    match cmd {
        Cmd::Simulate { config, run, out, format } => simulate(&config, &run, out.as_deref(), format),
        Cmd::Audit { config, strict, out } => audit(&config, strict, out.as_deref()),
        Cmd::Codebook { config, run, reps, out } => codebook(&config, &run, reps, out.as_deref()),
        Cmd::Replay { config, run, captures, injections, out } => {
            replay(&config, &run, captures, injections, out.as_deref())
        }
        Cmd::Policy { config, out } => policy(&config, out.as_deref()),
        Cmd::Preset { name, out } => {
            let doc = presets::by_name(&name).expect("clap restricts names");
            emit(&doc.to_json(), out.as_deref())
        }
        Cmd::Catalog { out } => emit(&CatalogDocument::builtin().to_json(), out.as_deref()),
        Cmd::Select { range_m, rate_bps, security, include_provisional, catalog } => {
            let links = match catalog {
                Some(p) => CatalogDocument::load(p)?.links,
                None => CatalogDocument::builtin().links,
            };
            let mut q = SelectQuery::new(range_m, rate_bps, security.into());
            q.include_provisional = include_provisional;
            for id in select_method(&links, &q)? {
                println!("{id}");
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn emit(text: &str, out: Option<&Path>) -> Outcome {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Failure(format!("cannot write {}: {e}", p.display())))?,
        None => print!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn scenario(doc: &ConfigDocument, args: &RunArgs) -> Result<Scenario, Failure> {
    let mut sc = doc.scenario()?;
    if let Some(seed) = args.seed {
        sc.seed = seed;
    }
    if let Some(ticks) = args.ticks {
        sc.ticks = ticks;
    }
    sc.validate()?;
    Ok(sc)
}

fn metrics_table(m: &Metrics) -> String {
    let mut s = String::new();
    for (name, value) in m.scalars() {
        let shown = value.map_or_else(|| "-".to_owned(), |v| format!("{v}"));
        let _ = writeln!(s, "{name:<26} {shown}");
    }
    for (reason, n) in &m.rejection_histogram {
        let _ = writeln!(s, "{:<26} {n}", format!("rejected.{reason}"));
    }
    s
}

fn simulate(config: &Path, args: &RunArgs, out: Option<&Path>, format: Format) -> Outcome {
    let doc = ConfigDocument::load(config)?;
    let sc = scenario(&doc, args)?;
    let (transcript, metrics) = run(&sc)?;
    let report = SimulationReport {
        scenario: sc.name.clone(),
        seed: sc.seed,
        ticks: sc.ticks,
        transcript_sha256: transcript.digest(),
        metrics,
    };
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("transcript.jsonl"), transcript.to_jsonl())?;
        fs::write(dir.join("report.json"), Report::Simulation(report.clone()).to_json())?;
    }
    match format {
        Format::Records => print!("{}", String::from_utf8_lossy(&transcript.to_jsonl())),
        Format::Table => {
            println!("scenario {} seed {} ticks {}", report.scenario, report.seed, report.ticks);
            println!("transcript sha256 {}", report.transcript_sha256);
            print!("{}", metrics_table(&report.metrics));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn audit(config: &Path, strict: bool, out: Option<&Path>) -> Outcome {
    let doc = ConfigDocument::load(config)?;
    let report = full_audit(&doc.topology()?, doc.declarations(), &ProtocolRegistry::builtin());
    print!("{}", report.render_table());
    let pass = if strict { report.compliant_strict() } else { report.compliant };
    if strict && report.compliant && !pass {
        println!("strict: unauthenticated encryption in use");
    }
    if let Some(p) = out {
        fs::write(p, Report::Audit(report).to_json())?;
    }
    Ok(if pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn codebook(config: &Path, args: &RunArgs, reps: u64, out: Option<&Path>) -> Outcome {
    let mut doc = ConfigDocument::load(config)?;
    doc.adversary = AdversaryPlan::CodebookThenPredict;
    let sc = scenario(&doc, args)?;
    let batches = run_batch(&[sc], reps)?;
    let stats = &batches[0];
    let completion = &stats.metrics["codebook_completion_tick"];
    println!("runs {} completed {}", stats.repetitions, completion.count);
    match (completion.mean, completion.stddev) {
        (Some(mean), Some(sd)) => println!("mean completion tick {mean:.4} (stddev {sd:.4})"),
        _ => println!("codebook never completed"),
    }
    if let Some(acc) = stats.metrics["prediction_accuracy"].mean {
        println!("mean prediction accuracy {acc:.4}");
    }
    if let Some(p) = out {
        fs::write(p, Report::Batch(BatchReport { batches }).to_json())?;
    }
    Ok(ExitCode::SUCCESS)
}

fn replay(
    config: &Path,
    args: &RunArgs,
    captures: Option<u32>,
    injections: Option<u32>,
    out: Option<&Path>,
) -> Outcome {
    let mut doc = ConfigDocument::load(config)?;
    let (c0, i0) = match doc.adversary {
        AdversaryPlan::ReplayAfter { captures, injections } => (captures, injections),
        _ => (10, 100),
    };
    doc.adversary = AdversaryPlan::ReplayAfter {
        captures: captures.unwrap_or(c0),
        injections: injections.unwrap_or(i0),
    };
    let sc = scenario(&doc, args)?;
    let (transcript, m) = run(&sc)?;
    let rejected = m.replays_attempted - m.replays_executed;
    println!("replays {} executed {} rejected {rejected}", m.replays_attempted, m.replays_executed);
    for (reason, n) in &m.rejection_histogram {
        println!("  {reason}: {n}");
    }
    if let Some(p) = out {
        let report = SimulationReport {
            scenario: sc.name,
            seed: sc.seed,
            ticks: sc.ticks,
            transcript_sha256: transcript.digest(),
            metrics: m,
        };
        fs::write(p, Report::Simulation(report).to_json())?;
    }
    Ok(ExitCode::SUCCESS)
}

fn policy_table(tiers: &[PolicyTier]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<8} {:<11} {:<9} {:<14} NOTES", "SEGMENT", "VALUE", "STRENGTH", "SUITE");
    for t in tiers {
        let suite = format!("{}+{:?}", t.recommended_suite.mode, t.recommended_suite.protocol);
        let _ = writeln!(
            s,
            "{:<8} {:<11} {:<9} {:<14} {}",
            format!("{} {}", t.segment.label(), t.segment),
            t.value_band,
            t.required_strength,
            suite,
            t.notes.join("; ")
        );
    }
    s
}

fn policy(config: &Path, out: Option<&Path>) -> Outcome {
    let doc = ConfigDocument::load(config)?;
    let tiers = recommend_policy(&doc.topology()?);
    print!("{}", policy_table(&tiers));
    if let Some(p) = out {
        fs::write(p, Report::Policy(tiers).to_json())?;
    }
    Ok(ExitCode::SUCCESS)
}

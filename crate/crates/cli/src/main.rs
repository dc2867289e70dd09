use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use woz_analysis::{analyze, render, Format, ReportOptions, Sd};
use woz_core::config::ServiceConfig;
use woz_core::log::{check_transitions, load_corpus};
use woz_core::scenario::LoadOptions;
use woz_core::Scenario;
use woz_harness::{generate_corpus_with, CorpusOptions, PolicyMix};

#[derive(Parser)]
#[command(name = "woz", version, about = "Paired Wizard-of-Oz dialogue collection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the websocket/HTTP server.
    Serve {
        /// TOML configuration file.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        bind: Option<String>,
        /// Log directory.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Step time through /test/advance instead of the wall clock.
        #[arg(long)]
        virtual_clock: bool,
    },
    /// Play scripted sessions and write their logs.
    Simulate {
        #[arg(long, default_value_t = 50)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated: golden, random, stubborn, idle.
        #[arg(long, default_value = "golden,random", value_delimiter = ',')]
        policies: Vec<PolicyMix>,
        #[arg(long)]
        out: PathBuf,
        /// Sessions played side by side.
        #[arg(long, default_value_t = 10)]
        concurrency: usize,
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
    /// Compute corpus statistics.
    Analyze {
        dir: PathBuf,
        #[arg(long, value_enum, default_value_t = ReportFormat::Md)]
        report: ReportFormat,
        /// Use n-1 standard deviations.
        #[arg(long)]
        sample: bool,
        #[arg(long, default_value_t = 10)]
        top_k: usize,
        /// Add columns split by this outcome.
        #[arg(long, value_enum)]
        split: Option<Split>,
        /// Write every output file here instead of printing.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
    /// Check every log in a directory, including its dialogue transitions.
    Validate {
        dir: PathBuf,
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
    /// Load a scenario file and report problems.
    CheckScenario {
        path: PathBuf,
        /// Treat unreachable and dead-end states as errors.
        #[arg(long)]
        strict: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Md,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Split {
    Resolved,
}

type Result<T> = std::result::Result<T, String>;

fn load_scenario(path: Option<&Path>, strict: bool) -> Result<Scenario> {
    match path {
        None => Ok(Scenario::reference()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
            Scenario::from_yaml(&text, LoadOptions { strict }).map_err(|e| format!("{}: {e}", p.display()))
        }
    }
}

fn init_tracing(default: &str) {
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(default));
    let _ = tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).try_init();
}

fn runtime() -> Result<tokio::runtime::Runtime> {
    tokio::runtime::Runtime::new().map_err(|e| format!("cannot start runtime: {e}"))
}

fn serve(
    config: Option<PathBuf>,
    bind: Option<String>,
    data: Option<PathBuf>,
    seed: Option<u64>,
    virtual_clock: bool,
) -> Result<()> {
    init_tracing("info");
    let mut cfg = match &config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
            ServiceConfig::from_toml(&text).map_err(|e| format!("{}: {e}", p.display()))?
        }
        None => ServiceConfig::default(),
    };
    if let Some(b) = bind {
        cfg.server.bind = b;
    }
    if let Some(d) = data {
        cfg.log.dir = d;
    }
    if seed.is_some() {
        cfg.server.seed = seed;
    }
    cfg.server.virtual_clock |= virtual_clock;
    let scenario = load_scenario(cfg.scenario.path.as_deref(), cfg.scenario.strict)?;
    for w in &scenario.warnings {
        tracing::warn!("scenario: {w}");
    }
    runtime()?.block_on(async {
        let server = woz_server::start(&cfg, scenario).await.map_err(|e| e.to_string())?;
        println!("listening on {}", server.base_url());
        tokio::select! {
            r = server.wait() => r.map_err(|e| e.to_string()),
            _ = tokio::signal::ctrl_c() => Ok(()),
        }
    })
}

fn simulate(
    n: usize,
    seed: u64,
    policies: Vec<PolicyMix>,
    out: PathBuf,
    concurrency: usize,
    scenario: Option<PathBuf>,
) -> Result<()> {
    init_tracing("warn");
    let scenario = load_scenario(scenario.as_deref(), false)?;
    let opts = CorpusOptions { n, seed, mix: policies.clone(), out: out.clone(), concurrency };
    let (summary, _) = runtime()?.block_on(generate_corpus_with(&opts, scenario)).map_err(|e| e.to_string())?;
    for mix in &policies {
        let of: Vec<_> = summary.sessions.iter().filter(|s| s.policy == *mix).collect();
        let resolved = of.iter().filter(|s| s.resolved).count();
        println!("{mix}: {} sessions, {resolved} resolved", of.len());
    }
    println!("wrote {} logs under {}", summary.sessions.len(), out.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn analyze_cmd(
    dir: PathBuf,
    report: ReportFormat,
    sample: bool,
    top_k: usize,
    split: Option<Split>,
    out: Option<PathBuf>,
    scenario: Option<PathBuf>,
) -> Result<()> {
    let scenario = load_scenario(scenario.as_deref(), false)?;
    let corpus = load_corpus(&dir);
    for s in &corpus.report.skipped {
        eprintln!("skipped {}: {}", s.path.display(), s.reason);
    }
    let foreign = corpus.logs.iter().filter(|l| l.scenario.hash != scenario.hash).count();
    if foreign > 0 {
        eprintln!("warning: {foreign} logs were recorded with a different scenario version");
    }
    let opts = ReportOptions {
        format: match report {
            ReportFormat::Md => Format::Markdown,
            ReportFormat::Csv => Format::Csv,
        },
        sd: if sample { Sd::Sample } else { Sd::Population },
        top_k,
        split_resolved: split.is_some(),
    };
    let analysis = analyze(&corpus.logs, &scenario.graph.da_type_map, &opts).map_err(|e| e.to_string())?;
    let files = render(&analysis, &opts);
    match out {
        Some(out) => {
            fs::create_dir_all(&out).map_err(|e| format!("{}: {e}", out.display()))?;
            for (name, body) in &files {
                let path = out.join(name);
                fs::write(&path, body).map_err(|e| format!("{}: {e}", path.display()))?;
                eprintln!("wrote {}", path.display());
            }
        }
        None => match report {
            ReportFormat::Md => print!("{}", files["report.md"]),
            ReportFormat::Csv => {
                for name in ["table2.csv", "table3.csv", "table4.csv"] {
                    println!("# {name}");
                    print!("{}", files[name]);
                }
            }
        },
    }
    Ok(())
}

fn validate(dir: PathBuf, scenario: Option<PathBuf>) -> Result<bool> {
    let scenario = load_scenario(scenario.as_deref(), false)?;
    let corpus = load_corpus(&dir);
    let mut ok = corpus.report.skipped.is_empty();
    for s in &corpus.report.skipped {
        println!("FAIL {}: {}", s.path.display(), s.reason);
    }
    for log in &corpus.logs {
        match check_transitions(&scenario.graph, log) {
            Ok(n) => println!("ok   {} ({n} transitions)", log.session_id),
            Err(e) => {
                ok = false;
                println!("FAIL {}: {e}", log.session_id);
            }
        }
    }
    println!("{} valid, {} invalid", corpus.logs.len(), corpus.report.skipped.len());
    Ok(ok)
}

fn check_scenario(path: PathBuf, strict: bool) -> Result<()> {
    let s = load_scenario(Some(&path), strict)?;
    for w in &s.warnings {
        println!("warning: {w}");
    }
    println!("{} ({} states, hash {})", s.name, s.graph.states.len(), s.hash);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Serve { config, bind, data, seed, virtual_clock } => serve(config, bind, data, seed, virtual_clock),
        Command::Simulate { n, seed, policies, out, concurrency, scenario } => {
            simulate(n, seed, policies, out, concurrency, scenario)
        }
        Command::Analyze { dir, report, sample, top_k, split, out, scenario } => {
            analyze_cmd(dir, report, sample, top_k, split, out, scenario)
        }
        Command::Validate { dir, scenario } => match validate(dir, scenario) {
            Ok(true) => Ok(()),
            Ok(false) => return ExitCode::FAILURE,
            Err(e) => Err(e),
        },
        Command::CheckScenario { path, strict } => check_scenario(path, strict),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

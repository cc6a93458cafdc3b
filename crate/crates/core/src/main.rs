use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tracing::info;

use geocensus::census::{self, CensusConfig, CensusReport, RunOptions, TaskSet};
use geocensus::index::analyze;
use geocensus::loop_space::read_loop;
use geocensus::Error;

#[derive(Parser)]
#[command(
    name = "geocensus",
    version,
    about = "Closed-geodesic census on surfaces of revolution"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Census configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides the configured one.
    #[arg(long)]
    out: Option<PathBuf>,
    /// tracing filter, e.g. `info` or `geocensus=debug`.
    #[arg(long, default_value = "warn")]
    log_level: String,
    /// Write minimax round traces and shooting trajectories.
    #[arg(long)]
    trace: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Find the parallels that are geodesics.
    Scan(Common),
    /// Descend from the configured seeds.
    Descend(Common),
    /// Mountain passes between consecutive minimal parallels.
    Pass(Common),
    /// Minimax sweeps with free endpoints.
    Sweep(Common),
    /// Clairaut shooting for the configured targets.
    Shoot(Common),
    /// Index analysis of a stored loop, or of the scanned parallels.
    Index {
        #[command(flatten)]
        common: Common,
        /// Loop file in the text node format.
        #[arg(long = "loop")]
        loop_file: Option<PathBuf>,
    },
    /// Every stage, merged into one report.
    Census(Common),
    /// Run the built-in scenarios and check their postconditions.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        scenario: Option<String>,
    },
}

enum Failure {
    Config(String),
    Verification(String),
    Numeric(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Io(_) => Failure::Config(e.to_string()),
            other => Failure::Numeric(other.to_string()),
        }
    }
}

fn load_config(common: &Common) -> Result<CensusConfig, Failure> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| Failure::Config("--config is required".into()))?;
    let cfg = CensusConfig::load(path)?;
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(common: &Common, cfg: Option<&CensusConfig>) -> Option<PathBuf> {
    common
        .out
        .clone()
        .or_else(|| cfg.and_then(|c| c.output.directory.clone()))
}

fn emit(report: &CensusReport, cfg: &CensusConfig, dir: Option<&Path>) -> Result<(), Failure> {
    match dir {
        Some(d) => {
            for p in report.write(d, &cfg.output.formats)? {
                info!(path = %p.display(), "wrote");
            }
        }
        None => print!("{}", report.to_json()),
    }
    Ok(())
}

fn run_stage(common: &Common, tasks: TaskSet) -> Result<(), Failure> {
    let cfg = load_config(common)?;
    let dir = out_dir(common, Some(&cfg));
    let trace = common.trace || cfg.output.trace;
    let trace_dir = match (&dir, trace) {
        (Some(d), true) => Some(d.join("trace")),
        (None, true) => Some(PathBuf::from("trace")),
        _ => None,
    };
    let report = census::run_tasks(&cfg, tasks, &RunOptions { trace_dir })?;
    for t in &report.tasks {
        info!(task = %t.task, status = %t.status, detail = t.detail.as_deref().unwrap_or(""));
    }
    emit(&report, &cfg, dir.as_deref())
}

fn run_index(common: &Common, loop_file: Option<&Path>) -> Result<(), Failure> {
    let Some(file) = loop_file else {
        let tasks = TaskSet {
            scan: true,
            ..TaskSet::NONE
        };
        return run_stage(common, tasks);
    };
    let cfg = load_config(common)?;
    let metric = cfg.metric_arc::<f64>()?;
    let lp = read_loop(file, metric, cfg.connect_options())?;
    let report = analyze(&lp, &cfg.index_options())?;
    let text = serde_json::to_string_pretty(&report).map_err(|e| Failure::Numeric(e.to_string()))? + "\n";
    match out_dir(common, Some(&cfg)) {
        Some(d) => {
            std::fs::create_dir_all(&d).map_err(|e| Failure::Config(e.to_string()))?;
            std::fs::write(d.join("index.json"), text).map_err(|e| Failure::Config(e.to_string()))?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn run_verify(common: &Common, only: Option<&str>) -> Result<(), Failure> {
    let results = census::verify_scenarios(only)?;
    let mut failed = Vec::new();
    for r in &results {
        println!("{:<14} {}", r.name, if r.passed { "PASS" } else { "FAIL" });
        for c in &r.checks {
            println!("    [{}] {}", if c.passed { "ok" } else { "XX" }, c.label);
        }
        if !r.passed {
            failed.push(r.name.clone());
        }
    }
    if let Some(d) = out_dir(common, None) {
        std::fs::create_dir_all(&d).map_err(|e| Failure::Config(e.to_string()))?;
        let text = serde_json::to_string_pretty(&results).map_err(|e| Failure::Numeric(e.to_string()))? + "\n";
        std::fs::write(d.join("verify.json"), text).map_err(|e| Failure::Config(e.to_string()))?;
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Verification(format!("failed: {}", failed.join(", "))))
    }
}

fn common(cmd: &Command) -> &Common {
    match cmd {
        Command::Scan(c)
        | Command::Descend(c)
        | Command::Pass(c)
        | Command::Sweep(c)
        | Command::Shoot(c)
        | Command::Census(c) => c,
        Command::Index { common, .. } | Command::Verify { common, .. } => common,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let c = common(&cli.command);
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::new(&c.log_level))
        .with_writer(std::io::stderr)
        .init();
    let only = |f: fn(&mut TaskSet)| {
        let mut t = TaskSet::NONE;
        f(&mut t);
        t
    };
    let result = match &cli.command {
        Command::Scan(c) => run_stage(c, only(|t| t.scan = true)),
        Command::Descend(c) => run_stage(c, only(|t| t.descend = true)),
        Command::Pass(c) => run_stage(c, only(|t| t.pass = true)),
        Command::Sweep(c) => run_stage(c, only(|t| t.sweep = true)),
        Command::Shoot(c) => run_stage(c, only(|t| t.shoot = true)),
        Command::Census(c) => run_stage(c, TaskSet::ALL),
        Command::Index { common, loop_file } => run_index(common, loop_file.as_deref()),
        Command::Verify { common, scenario } => run_verify(common, scenario.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Verification(m)) => {
            eprintln!("verification failed: {m}");
            ExitCode::from(3)
        }
        Err(Failure::Numeric(m)) => {
            eprintln!("numeric failure: {m}");
            ExitCode::from(4)
        }
    }
}

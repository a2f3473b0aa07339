mod render;
mod report;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::LazyLock;

use clap::{Args, Parser, Subcommand, ValueEnum};
use optbench_core::datastore::{export_ioh_csv, load_records, LoadOptions, Loaded, StoreError};
use optbench_core::metrics::{Aggregation, AoccBounds, MetricsError, PerformanceTable};
use optbench_core::optim::list_portfolio;
use optbench_core::portfolio::ShapleyOptions;
use optbench_core::runner::{run_experiment, ExperimentConfig, RunnerError, CONFIG_KEYS};

use report::{ReportError, ReportKind, ReportOptions};

const EXIT_OK: u8 = 0;
const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_STORAGE: u8 = 3;
const EXIT_MISSING_DATA: u8 = 4;

const STORE_ENV: &str = "OPTBENCH_STORE";
const DEFAULT_STORE: &str = "optbench-runs.ndjson";

static AFTER_HELP: LazyLock<String> = LazyLock::new(|| {
    let mut s = String::from("Reports:\n");
    for kind in ReportKind::value_variants() {
        let help = kind
            .to_possible_value()
            .and_then(|v| v.get_help().map(|h| h.to_string()))
            .unwrap_or_default();
        s.push_str(&format!("  {:<24} {help}\n", kind.name()));
    }
    s.push_str("\nConfig keys (TOML):\n");
    for key in CONFIG_KEYS {
        s.push_str(&format!("  {key}\n"));
    }
    s.push_str("\nAlgorithms:\n");
    for spec in list_portfolio() {
        let params: Vec<&str> = spec.params.keys().map(String::as_str).collect();
        s.push_str(&format!("  {:<16} {}\n", spec.name, params.join(", ")));
    }
    s.push_str(&format!(
        "\nEnvironment:\n  {STORE_ENV:<24} default store path\n\
         \nExit codes:\n  0  success\n  1  invalid configuration or usage\n  2  one or more runs failed\n  \
         3  storage or I/O failure\n  4  missing data for the requested report\n"
    ));
    s
});

#[derive(Parser, Debug)]
#[command(name = "optbench", version, about = "Benchmark continuous black-box optimizers and analyze the results")]
#[command(after_help = AFTER_HELP.as_str())]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the experiment grid described by a TOML config.
    Run {
        config: PathBuf,
        /// Record store to append to.
        #[arg(long, env = STORE_ENV, default_value = DEFAULT_STORE)]
        store: PathBuf,
    },
    /// Compute a report from a record store.
    Report(ReportArgs),
    /// Export a record store to another format.
    Export {
        #[arg(env = STORE_ENV)]
        store: PathBuf,
        #[arg(long, value_enum, default_value_t = ExportFormat::IohCsv)]
        format: ExportFormat,
        #[arg(short, long, default_value = "-")]
        output: PathBuf,
        /// Skip unparseable records with a warning instead of failing.
        #[arg(long)]
        skip_corrupt: bool,
    },
}

#[derive(Args, Debug)]
struct ReportArgs {
    #[arg(env = STORE_ENV)]
    store: PathBuf,
    #[arg(long, value_enum)]
    report: ReportKind,
    /// AOCC precision bounds: default [1e-8, 1e2], large [1e-8, 1e8].
    #[arg(long, value_enum, default_value_t = BoundsArg::Default)]
    bounds: BoundsArg,
    /// Only use runs of this dimension.
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
    /// Aggregation of fixed-budget precisions across runs.
    #[arg(long, value_enum, default_value_t = AggregationArg::Geometric)]
    aggregation: AggregationArg,
    /// Candidate pool for Shapley values (default: every algorithm).
    #[arg(long, value_delimiter = ',')]
    pool: Option<Vec<String>>,
    /// Baseline portfolio (default: the registry baselines).
    #[arg(long, value_delimiter = ',')]
    baselines: Option<Vec<String>>,
    /// Restrict budget-based reports to one budget factor.
    #[arg(long)]
    budget_factor: Option<u64>,
    #[arg(long, default_value_t = ShapleyOptions::default().max_size)]
    max_size: usize,
    #[arg(long, default_value_t = ShapleyOptions::default().sets_per_size)]
    sets_per_size: usize,
    /// Sampling seed for Shapley estimates.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long, default_value = "-")]
    output: PathBuf,
    /// Skip unparseable records with a warning instead of failing.
    #[arg(long)]
    skip_corrupt: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BoundsArg {
    Default,
    Large,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    /// Comma-separated table.
    Table,
    /// JSON document with columns and rows.
    Json,
    /// SVG heatmap.
    Svg,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AggregationArg {
    Geometric,
    Arithmetic,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ExportFormat {
    IohCsv,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

impl From<StoreError> for Failure {
    fn from(e: StoreError) -> Self {
        Failure::new(EXIT_STORAGE, e.to_string())
    }
}

impl From<MetricsError> for Failure {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::MissingData(cells) => {
                let mut message = format!("missing data for {} cell(s):", cells.len());
                for c in cells {
                    message.push_str("\n  ");
                    message.push_str(&c);
                }
                Failure::new(EXIT_MISSING_DATA, message)
            }
            MetricsError::MissingBaseline(_) => Failure::new(EXIT_MISSING_DATA, e.to_string()),
            other => Failure::new(EXIT_RUNTIME, other.to_string()),
        }
    }
}

impl From<ReportError> for Failure {
    fn from(e: ReportError) -> Self {
        match e {
            ReportError::Metrics(m) => m.into(),
            ReportError::Portfolio(p) => Failure::new(EXIT_CONFIG, p.to_string()),
        }
    }
}

fn write_output(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    let result = if path == Path::new("-") {
        let mut out = io::stdout().lock();
        out.write_all(bytes).and_then(|_| out.flush())
    } else {
        fs::write(path, bytes)
    };
    result.map_err(|e| Failure::new(EXIT_STORAGE, format!("cannot write {}: {e}", path.display())))
}

fn load_store(path: &Path, dim: Option<usize>, skip_corrupt: bool) -> Result<Loaded, Failure> {
    if !path.exists() {
        return Err(Failure::new(EXIT_STORAGE, format!("store {} does not exist", path.display())));
    }
    let loaded = load_records(path, |k| dim.is_none_or(|d| k.dimension == d), LoadOptions { skip_corrupt })?;
    for s in &loaded.skipped {
        eprintln!(
            "warning: skipped corrupt record at line {} (byte {}): {}",
            s.line, s.offset, s.reason
        );
    }
    Ok(loaded)
}

fn cmd_run(config: &Path, store: &Path) -> Result<u8, Failure> {
    let config = ExperimentConfig::load(config).map_err(|e| Failure::new(EXIT_CONFIG, e.to_string()))?;
    let summary = run_experiment(&config, store).map_err(|e| match e {
        RunnerError::ConfigInvalid(_) => Failure::new(EXIT_CONFIG, e.to_string()),
        RunnerError::Store(s) => s.into(),
    })?;
    println!("{}", summary.to_json_pretty());
    if summary.failed > 0 {
        for f in &summary.failures {
            eprintln!("run {} failed: {}", f.key, f.reason);
        }
        return Ok(EXIT_RUNTIME);
    }
    Ok(EXIT_OK)
}

fn cmd_report(args: &ReportArgs) -> Result<u8, Failure> {
    let loaded = load_store(&args.store, args.dim, args.skip_corrupt)?;
    let bounds = match args.bounds {
        BoundsArg::Default => AoccBounds::default(),
        BoundsArg::Large => AoccBounds::large(),
    };
    let aggregation = match args.aggregation {
        AggregationArg::Geometric => Aggregation::Geometric,
        AggregationArg::Arithmetic => Aggregation::Arithmetic,
    };
    let table = PerformanceTable::from_records(&loaded.records, bounds, aggregation)?;
    let baselines = args.baselines.clone().unwrap_or_else(|| {
        list_portfolio()
            .into_iter()
            .filter(|s| s.baseline)
            .map(|s| s.name)
            .collect()
    });
    let options = ReportOptions {
        baselines,
        pool: args.pool.clone(),
        budget_factor: args.budget_factor,
        shapley: ShapleyOptions {
            sets_per_size: args.sets_per_size,
            max_size: args.max_size,
            sampling_seed: args.seed,
        },
    };
    let report = report::build(args.report, &table, &options)?;
    let bytes = match args.format {
        Format::Table => render::csv(&report).map_err(|e| Failure::new(EXIT_STORAGE, e.to_string()))?,
        Format::Json => render::json(&report),
        Format::Svg => render::svg(&report.heatmap),
    };
    write_output(&args.output, &bytes)?;
    Ok(EXIT_OK)
}

fn cmd_export(store: &Path, output: &Path, skip_corrupt: bool) -> Result<u8, Failure> {
    let loaded = load_store(store, None, skip_corrupt)?;
    let mut buf = Vec::new();
    export_ioh_csv(&loaded.records, &mut buf)?;
    write_output(output, &buf)?;
    Ok(EXIT_OK)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK });
        }
    };
    let result = match &cli.command {
        Command::Run { config, store } => cmd_run(config, store),
        Command::Report(args) => cmd_report(args),
        Command::Export {
            store,
            format: ExportFormat::IohCsv,
            output,
            skip_corrupt,
        } => cmd_export(store, output, *skip_corrupt),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

//! `korm` command-line tool.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 degenerate
//! run. Failures also print a one-line JSON error object on stderr.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use korm::baselines::{db_nested_loop, dk_outliers};
use korm::bench::{measure, run_bench, summarize, summary_csv, BenchMethod, BenchParams};
use korm::ingest::min_max_scale;
use korm::report::{plot_data, BaselineReport, RankedPoint, Real, SourceRecord, Timing, FORMAT_VERSION, TOOL_VERSION};
use korm::{
    chunk_stream, korm_run, load_dataset, DatasetSchema, Error, ErrorClass, KormConfig, LogBase, Metric, OutlierReport,
    Point, ValidatedConfig,
};

#[derive(Parser, Debug)]
#[command(name = "korm", version, about = "Streaming outlier detection by phase-based online facility location")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the detector over a dataset and emit a report.
    Run(RunArgs),
    /// Run a distance-based baseline (dk or db-nl).
    Baseline(BaselineArgs),
    /// Time the detector against the baselines.
    Bench(BenchArgs),
    /// Project a finished report onto two dimensions for plotting.
    Plotdata(PlotArgs),
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Delimited input file.
    #[arg(long)]
    input: PathBuf,
    /// Schema file: one column kind per line (numeric, char, skip).
    #[arg(long, conflicts_with = "columns", required_unless_present = "columns")]
    schema: Option<PathBuf>,
    /// Inline schema, e.g. `char,numeric,numeric,skip`.
    #[arg(long)]
    columns: Option<String>,
    /// First row is a header (overrides the schema file).
    #[arg(long)]
    header: bool,
    /// Min-max scale every dimension to [0, 1] after loading.
    #[arg(long)]
    scale: bool,
}

#[derive(Args, Debug)]
struct KormArgs {
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Phases a candidate outlier is watched before a verdict.
    #[arg(long = "score-o", default_value_t = 2)]
    score_o: u32,
    #[arg(long, default_value_t = 34.0)]
    gamma: f64,
    #[arg(long, default_value_t = 34.0)]
    beta: f64,
    /// Raw points per chunk.
    #[arg(long, default_value_t = 500)]
    num: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "squared-euclidean")]
    metric: String,
    /// `2` or `e`.
    #[arg(long = "log-base", default_value = "2")]
    log_base: String,
    #[arg(long = "invocation-factor", default_value_t = 2)]
    invocation_factor: u32,
    /// Approximation factor c; only used to warn about the second beta condition.
    #[arg(long = "approx-factor")]
    approx_factor: Option<f64>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    korm: KormArgs,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Include per-invocation statistics in every phase record.
    #[arg(long)]
    trace: bool,
    /// Leave out wall and CPU time so identical runs give identical bytes.
    #[arg(long = "no-timing")]
    no_timing: bool,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum BaselineMethod {
    Dk,
    #[value(name = "db-nl")]
    DbNl,
}

#[derive(Args, Debug)]
struct BaselineArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum)]
    method: BaselineMethod,
    /// K for the K-th nearest neighbour.
    #[arg(long, default_value_t = 3)]
    knn: usize,
    /// Number of top-ranked points reported by dk.
    #[arg(long = "top-n", default_value_t = 7)]
    top_n: usize,
    /// Distance D for db-nl.
    #[arg(long, default_value_t = 0.45)]
    radius: f64,
    /// Fraction p for db-nl.
    #[arg(long, default_value_t = 0.95)]
    fraction: f64,
    #[arg(long, default_value = "euclidean")]
    metric: String,
    #[arg(long = "no-timing")]
    no_timing: bool,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    korm: KormArgs,
    /// Comma-separated: korm, dk, db-nl.
    #[arg(long, default_value = "korm,dk,db-nl", value_delimiter = ',')]
    methods: Vec<String>,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    #[arg(long, default_value_t = 3)]
    knn: usize,
    #[arg(long = "top-n", default_value_t = 7)]
    top_n: usize,
    #[arg(long, default_value_t = 0.45)]
    radius: f64,
    #[arg(long, default_value_t = 0.95)]
    fraction: f64,
    #[arg(long = "baseline-metric", default_value = "euclidean")]
    baseline_metric: String,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PlotArgs {
    /// JSON report written by `korm run`.
    #[arg(long)]
    report: PathBuf,
    /// Two zero-based dimensions, e.g. `2,3`.
    #[arg(long, value_parser = parse_dims)]
    dims: (usize, usize),
    #[arg(long)]
    output: Option<PathBuf>,
}

/// A command failure together with a partial report to flush first, if any.
struct Failure {
    error: Error,
    partial: Option<String>,
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        Failure { error, partial: None }
    }
}

type CmdResult = Result<String, Failure>;

fn exit_code(class: ErrorClass) -> u8 {
    match class {
        ErrorClass::Config => 2,
        ErrorClass::Data => 3,
        ErrorClass::DegenerateRun => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (result, output) = match cli.command {
        Command::Run(a) => {
            let out = a.output.clone();
            (cmd_run(a), out)
        }
        Command::Baseline(a) => {
            let out = a.output.clone();
            (cmd_baseline(a), out)
        }
        Command::Bench(a) => {
            let out = a.output.clone();
            (cmd_bench(a), out)
        }
        Command::Plotdata(a) => {
            let out = a.output.clone();
            (cmd_plotdata(a), out)
        }
    };
    let (text, failure) = match result {
        Ok(text) => (Some(text), None),
        Err(f) => (f.partial.clone(), Some(f.error)),
    };
    if let Some(text) = text {
        if let Err(e) = emit(output.as_deref(), &text) {
            return fail(&e);
        }
    }
    match failure {
        Some(e) => fail(&e),
        None => ExitCode::SUCCESS,
    }
}

fn fail(e: &Error) -> ExitCode {
    let code = exit_code(e.class());
    let obj = serde_json::json!({
        "error": e.kind(),
        "message": e.to_string(),
        "exit_code": code,
    });
    eprintln!("{obj}");
    ExitCode::from(code)
}

fn emit(path: Option<&Path>, text: &str) -> korm::Result<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn schema_of(d: &DataArgs) -> korm::Result<DatasetSchema> {
    let mut schema = match (&d.schema, &d.columns) {
        (Some(path), _) => DatasetSchema::parse(&fs::read_to_string(path)?)?,
        (None, Some(list)) => DatasetSchema::from_list(list, d.header)?,
        (None, None) => unreachable!("clap requires one of --schema/--columns"),
    };
    if d.header {
        schema.has_header = true;
    }
    Ok(schema)
}

fn load(d: &DataArgs) -> korm::Result<(Vec<Point>, SourceRecord)> {
    let schema = schema_of(d)?;
    let mut ds = load_dataset(&d.input, &schema)?;
    if d.scale {
        min_max_scale(&mut ds.points);
    }
    let source = SourceRecord {
        path: d.input.display().to_string(),
        sha256: ds.sha256,
        schema: schema.keywords().iter().map(|s| s.to_string()).collect(),
        has_header: schema.has_header,
        min_max_scaled: d.scale,
    };
    Ok((ds.points, source))
}

fn korm_config(a: &KormArgs, trace: bool) -> korm::Result<ValidatedConfig> {
    KormConfig {
        k: a.k,
        score_threshold: a.score_o,
        gamma: a.gamma,
        beta: a.beta,
        chunk_size: a.num,
        seed: a.seed,
        metric: a.metric.parse::<Metric>()?,
        log_base: a.log_base.parse::<LogBase>()?,
        invocation_factor: a.invocation_factor,
        stream_len: None,
        approx_factor: a.approx_factor,
        trace,
    }
    .validate()
}

fn timing(wall: f64, cpu: Option<f64>) -> Timing {
    Timing {
        wall_seconds: Real(wall),
        cpu_seconds: cpu.map(Real),
    }
}

fn cmd_run(a: RunArgs) -> CmdResult {
    // configuration problems are reported before touching the data
    let cfg = korm_config(&a.korm, a.trace)?;
    let (points, source) = load(&a.data)?;
    let cfg = cfg.with_stream_len(points.len() as u64);
    let scaled = source.min_max_scaled;
    let chunks = chunk_stream(points, cfg.chunk_size)?;
    let (outcome, wall, cpu) = measure(|| korm_run(chunks, &cfg));
    let (run, abort) = match outcome {
        Ok(run) => (run, None),
        Err(abort) => (*abort.partial, Some(abort.error)),
    };
    let mut report = OutlierReport::from_run(&run, abort.as_ref());
    report.metadata.source = Some(source);
    if scaled {
        report.metadata.notes.push("coordinates min-max scaled to [0, 1] before the run".into());
    }
    if !a.no_timing {
        report.timing = Some(timing(wall, cpu));
    }
    let text = match a.format {
        Format::Json => report.to_json()?,
        Format::Csv => report.to_csv()?,
    };
    match abort {
        None => Ok(text),
        Some(error) => Err(Failure {
            error,
            partial: Some(text),
        }),
    }
}

fn cmd_baseline(a: BaselineArgs) -> CmdResult {
    let metric: Metric = a.metric.parse()?;
    let (points, source) = load(&a.data)?;
    let (ranking, outliers, parameters, wall, cpu) = match a.method {
        BaselineMethod::Dk => {
            let (r, wall, cpu) = measure(|| dk_outliers(&points, a.knn, a.top_n, metric));
            let r = r?;
            let ranking: Vec<RankedPoint> = r
                .iter()
                .map(|e| RankedPoint {
                    index: e.index,
                    score: Real(e.dk),
                })
                .collect();
            let outliers = r.iter().map(|e| e.index).collect();
            let params = BTreeMap::from([("knn".to_string(), Real(a.knn as f64)), ("top_n".to_string(), Real(a.top_n as f64))]);
            (ranking, outliers, params, wall, cpu)
        }
        BaselineMethod::DbNl => {
            let (r, wall, cpu) = measure(|| db_nested_loop(&points, a.radius, a.fraction, metric));
            let outliers = r?;
            let params = BTreeMap::from([("radius".to_string(), Real(a.radius)), ("fraction".to_string(), Real(a.fraction))]);
            (Vec::new(), outliers, params, wall, cpu)
        }
    };
    let report = BaselineReport {
        format_version: FORMAT_VERSION,
        tool: "korm".into(),
        tool_version: TOOL_VERSION.into(),
        method: match a.method {
            BaselineMethod::Dk => "dk".into(),
            BaselineMethod::DbNl => "db_nested_loop".into(),
        },
        metric: metric.name().into(),
        parameters,
        source: Some(source),
        points: points.len(),
        ranking,
        outliers,
        timing: (!a.no_timing).then(|| timing(wall, cpu)),
    };
    Ok(report.to_json()?)
}

fn cmd_bench(a: BenchArgs) -> CmdResult {
    let methods = a
        .methods
        .iter()
        .map(|m| m.trim().parse::<BenchMethod>())
        .collect::<korm::Result<Vec<_>>>()?;
    let cfg = korm_config(&a.korm, false)?;
    let (points, source) = load(&a.data)?;
    let params = BenchParams {
        korm: cfg.with_stream_len(points.len() as u64),
        knn: a.knn,
        top_n: a.top_n,
        radius: a.radius,
        fraction: a.fraction,
        baseline_metric: a.baseline_metric.parse()?,
    };
    let name = a
        .data
        .input
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or(source.path);
    let records = run_bench(&name, &points, &methods, a.reps, &params)?;
    Ok(summary_csv(&summarize(&records))?)
}

fn cmd_plotdata(a: PlotArgs) -> CmdResult {
    let text = fs::read_to_string(&a.report).map_err(Error::from)?;
    let report = OutlierReport::from_json(&text)?;
    Ok(plot_data(&report, a.dims)?)
}

fn parse_dims(s: &str) -> Result<(usize, usize), String> {
    let (i, j) = s.split_once(',').ok_or("expected two indices as i,j")?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("{v:?}: {e}"));
    Ok((parse(i)?, parse(j)?))
}

//! `digicopy` command-line frontend.
//!
//! Exit codes: 0 success, 1 validation failure or infeasibility, 2 usage
//! error, 3 I/O error. Machine output goes to stdout, diagnostics to stderr.

use std::ffi::OsString;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use digicopy::compare::{BASE_LABEL, CTRL_LABEL};
use digicopy::panel::{load_metadata, load_panel_parts, write_metadata, write_panel};
use digicopy::strategy::{read_triples, PlanConfig};
use digicopy::{
    check_budget, compare_modes, evaluate_plan, generate_panel, optimize_assignment, render_report, validate_panel,
    verify_paper_table, Aggregate, Engine, EngineConfig, Error, IndicatorSeries, LoadOptions, Optimized, Panel,
    PaperTableFixture, ReportFormat, StrategyModel, SynthSpec, WindowSpec,
};

pub const THREADS_ENV: &str = "DIGICOPY_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "digicopy",
    version,
    about = "Integral indicators for enterprise digital copies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct EngineArgs {
    /// Window length in periods.
    #[arg(long, default_value_t = 6)]
    k: usize,
    /// Reduction of G_i(t) into V(t).
    #[arg(long, value_enum, default_value_t = AggregateArg::Sum)]
    aggregate: AggregateArg,
    /// Tile edge length in columns.
    #[arg(long, default_value_t = 256)]
    block: usize,
    /// Worker threads [default: available parallelism].
    #[arg(long, env = THREADS_ENV)]
    threads: Option<usize>,
}

impl EngineArgs {
    fn config(&self) -> EngineConfig {
        let mut cfg = EngineConfig::default()
            .with_block(self.block)
            .with_aggregate(match self.aggregate {
                AggregateArg::Sum => Aggregate::Sum,
                AggregateArg::Mean => Aggregate::Mean,
            });
        if let Some(t) = self.threads {
            cfg = cfg.with_threads(t);
        }
        cfg
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AggregateArg {
    Sum,
    Mean,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SeriesFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ChartFormat {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TextFormat {
    Text,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Panel CSV -> indicator series G_i(t) and V(t).
    Indicator {
        /// Wide panel CSV; `-` or omitted reads stdin.
        input: Option<PathBuf>,
        /// Sidecar metadata CSV (param_id,process_id,kind).
        #[arg(long)]
        meta: Option<PathBuf>,
        #[command(flatten)]
        engine: EngineArgs,
        #[arg(long, value_enum, default_value_t = SeriesFormat::Csv)]
        format: SeriesFormat,
        #[arg(long, default_value = BASE_LABEL)]
        label: String,
    },
    /// Basic vs controlled mode: two panels or two indicator series -> delta V report.
    Compare {
        #[arg(long)]
        base: PathBuf,
        #[arg(long)]
        ctrl: PathBuf,
        #[command(flatten)]
        engine: EngineArgs,
        #[arg(long, value_enum, default_value_t = ChartFormat::Csv)]
        format: ChartFormat,
        /// Also write the SVG chart to this path.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Strategy model CSV + config JSON -> evaluated and/or optimized plan JSON.
    Strategy {
        /// Triples `strategy,process,cost[,assigned]`.
        #[arg(long)]
        model: PathBuf,
        /// `{"budget": number, "rule": string}`.
        #[arg(long)]
        config: PathBuf,
        /// Enterprise cost independent of strategy overhead.
        #[arg(long, default_value_t = 0.0)]
        base_cost: f64,
        /// Search for the cheapest plan under the configured rule.
        #[arg(long)]
        optimize: bool,
    },
    /// Synthetic spec JSON -> panel CSV.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        /// Overrides the spec's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Write the sidecar metadata CSV here.
        #[arg(long)]
        meta_out: Option<PathBuf>,
    },
    /// Check the built-in published regime table and its totals.
    VerifyPaper {
        #[arg(long, value_enum, default_value_t = TextFormat::Text)]
        format: TextFormat,
    },
    /// Panel CSV -> validation findings.
    Validate {
        input: Option<PathBuf>,
        #[arg(long)]
        meta: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = TextFormat::Text)]
        format: TextFormat,
    },
}

#[derive(Debug)]
enum Failure {
    /// Validation failure or infeasible plan (exit 1).
    Invalid(String),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(_) => Failure::Io(e.to_string()),
            other => Failure::Invalid(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

type CliResult = Result<i32, Failure>;

struct Io<'a> {
    stdin: &'a mut dyn Read,
    stdout: &'a mut dyn Write,
}

impl Io<'_> {
    fn read_input(&mut self, path: Option<&Path>) -> Result<String, Failure> {
        match path {
            None => read_stdin(self.stdin),
            Some(p) if p == Path::new("-") => read_stdin(self.stdin),
            Some(p) => read_file(p),
        }
    }
}

fn read_stdin(stdin: &mut dyn Read) -> Result<String, Failure> {
    let mut s = String::new();
    stdin
        .read_to_string(&mut s)
        .map_err(|e| Failure::Io(format!("stdin: {e}")))?;
    Ok(s)
}

fn read_file(p: &Path) -> Result<String, Failure> {
    fs::read_to_string(p).map_err(|e| Failure::Io(format!("{}: {e}", p.display())))
}

fn write_file(p: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(p, bytes).map_err(|e| Failure::Io(format!("{}: {e}", p.display())))
}

/// Every named input must exist before anything runs.
fn check_inputs(cmd: &Command) -> Result<(), Failure> {
    let inputs: Vec<&Path> = match cmd {
        Command::Indicator { input, meta, .. } | Command::Validate { input, meta, .. } => {
            input.iter().chain(meta).map(PathBuf::as_path).collect()
        }
        Command::Compare { base, ctrl, .. } => vec![base, ctrl],
        Command::Strategy { model, config, .. } => vec![model, config],
        Command::Synth { spec, .. } => vec![spec],
        Command::VerifyPaper { .. } => vec![],
    };
    for p in inputs {
        if p != Path::new("-") && !p.exists() {
            return Err(Failure::Io(format!("{}: no such file", p.display())));
        }
    }
    Ok(())
}

fn load_options(meta: Option<&Path>) -> Result<LoadOptions, Failure> {
    Ok(LoadOptions {
        metadata: match meta {
            Some(p) => Some(load_metadata(read_file(p)?.as_bytes())?),
            None => None,
        },
    })
}

fn engine(args: &EngineArgs) -> Result<(Engine, WindowSpec), Failure> {
    Ok((Engine::new(args.config())?, WindowSpec::new(args.k)?))
}

fn cmd_indicator(
    io: &mut Io<'_>,
    input: Option<&Path>,
    meta: Option<&Path>,
    args: &EngineArgs,
    format: SeriesFormat,
    label: &str,
) -> CliResult {
    let opts = load_options(meta)?;
    let panel = digicopy::load_panel(io.read_input(input)?.as_bytes(), &opts)?;
    let (engine, w) = engine(args)?;
    let series = engine.indicator_series(&panel, w, label)?;
    match format {
        SeriesFormat::Csv => series.write_csv(&mut *io.stdout)?,
        SeriesFormat::Json => {
            serde_json::to_writer_pretty(&mut *io.stdout, &series).map_err(Error::from)?;
            writeln!(io.stdout)?;
        }
    }
    Ok(0)
}

/// A compare input: a panel (header starts with `period`), an indicator CSV
/// (header starts with `t,`) or an indicator JSON document.
fn load_series(path: &Path, label: &str, args: &EngineArgs) -> Result<IndicatorSeries, Failure> {
    let text = read_file(path)?;
    let mut series = if text.trim_start().starts_with('{') {
        serde_json::from_str::<IndicatorSeries>(&text).map_err(Error::from)?
    } else if text.starts_with("t,") {
        IndicatorSeries::read_csv(text.as_bytes(), label)?
    } else {
        let panel = digicopy::load_panel(text.as_bytes(), &LoadOptions::default())?;
        let (engine, w) = engine(args)?;
        engine.indicator_series(&panel, w, label)?
    };
    series.mode_label = label.to_owned();
    Ok(series)
}

fn cmd_compare(
    io: &mut Io<'_>,
    base: &Path,
    ctrl: &Path,
    args: &EngineArgs,
    format: ChartFormat,
    svg: Option<&Path>,
) -> CliResult {
    let base = load_series(base, BASE_LABEL, args)?;
    let ctrl = load_series(ctrl, CTRL_LABEL, args)?;
    let cmp = compare_modes(&base, &ctrl)?;
    let fmt = match format {
        ChartFormat::Csv => ReportFormat::Csv,
        ChartFormat::Json => ReportFormat::Json,
        ChartFormat::Svg => ReportFormat::Svg,
    };
    io.stdout.write_all(&render_report(&cmp, fmt)?)?;
    if let Some(p) = svg {
        write_file(p, &render_report(&cmp, ReportFormat::Svg)?)?;
    }
    Ok(0)
}

fn bits(assign: &[Vec<bool>]) -> Vec<Vec<u8>> {
    assign
        .iter()
        .map(|r| r.iter().map(|b| u8::from(*b)).collect())
        .collect()
}

fn cmd_strategy(io: &mut Io<'_>, model: &Path, config: &Path, base_cost: f64, optimize: bool) -> CliResult {
    let (table, assign) = read_triples(read_file(model)?.as_bytes())?;
    let cfg = PlanConfig::from_json(read_file(config)?.as_bytes())?;
    if base_cost.is_nan() || base_cost < 0.0 {
        return Err(Failure::Invalid("base cost must be non-negative".into()));
    }

    let mut ok = true;
    let mut out = json!({
        "strategies": table.strategies,
        "processes": table.processes,
        "rule": cfg.rule.to_string(),
        "budget": cfg.budget,
        "base_cost": base_cost,
    });

    if let Some(assign) = assign {
        let mdl = StrategyModel::new(table.clone(), assign, cfg.budget)?;
        let report = check_budget(&mdl, base_cost)?;
        ok &= report.feasible;
        out["plan"] = json!({
            "assign": bits(&mdl.assign),
            "cost": evaluate_plan(&mdl)?,
            "budget_check": report,
        });
    }

    if optimize {
        let headroom = cfg.budget - base_cost;
        match optimize_assignment(&table, cfg.rule, Some(headroom))? {
            Optimized::Feasible { assign, objective } => {
                let mdl = StrategyModel::new(table.clone(), assign, cfg.budget)?;
                out["optimized"] = json!({
                    "status": "feasible",
                    "assign": bits(&mdl.assign),
                    "objective": objective,
                    "budget_check": check_budget(&mdl, base_cost)?,
                });
            }
            Optimized::Infeasible { unconstrained_min } => {
                ok = false;
                out["optimized"] = json!({
                    "status": "infeasible",
                    "unconstrained_min": unconstrained_min,
                });
            }
        }
    }

    serde_json::to_writer_pretty(&mut *io.stdout, &out).map_err(Error::from)?;
    writeln!(io.stdout)?;
    Ok(if ok { 0 } else { 1 })
}

fn cmd_synth(io: &mut Io<'_>, spec: &Path, seed: Option<u64>, meta_out: Option<&Path>) -> CliResult {
    let mut spec = SynthSpec::from_json(read_file(spec)?.as_bytes())?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    let panel = generate_panel(&spec)?;
    write_panel(&panel, &mut *io.stdout)?;
    if let Some(p) = meta_out {
        let mut buf = Vec::new();
        write_metadata(panel.params(), &mut buf)?;
        write_file(p, &buf)?;
    }
    Ok(0)
}

fn cmd_verify(io: &mut Io<'_>, format: TextFormat) -> CliResult {
    let report = verify_paper_table(&PaperTableFixture::embedded());
    match format {
        TextFormat::Text => io.stdout.write_all(report.to_text().as_bytes())?,
        TextFormat::Json => {
            let out = json!({"all_pass": report.all_pass(), "rows": report.rows, "totals": report.totals});
            serde_json::to_writer_pretty(&mut *io.stdout, &out).map_err(Error::from)?;
            writeln!(io.stdout)?;
        }
    }
    Ok(if report.all_pass() { 0 } else { 1 })
}

fn cmd_validate(io: &mut Io<'_>, input: Option<&Path>, meta: Option<&Path>, format: TextFormat) -> CliResult {
    let opts = load_options(meta)?;
    let parts = load_panel_parts(io.read_input(input)?.as_bytes(), &opts)?;
    let report = validate_panel(&parts);
    let (errors, warnings) = (report.errors().count(), report.warnings().count());
    match format {
        TextFormat::Text => {
            for f in &report.findings {
                writeln!(io.stdout, "{f}")?;
            }
            writeln!(io.stdout, "{errors} errors, {warnings} warnings")?;
        }
        TextFormat::Json => {
            serde_json::to_writer_pretty(&mut *io.stdout, &report).map_err(Error::from)?;
            writeln!(io.stdout)?;
        }
    }
    // A panel that validates also converts; keep the two paths in step.
    debug_assert_eq!(errors == 0, Panel::try_from(parts).is_ok());
    Ok(if errors == 0 { 0 } else { 1 })
}

fn dispatch(cmd: &Command, io: &mut Io<'_>) -> CliResult {
    check_inputs(cmd)?;
    match cmd {
        Command::Indicator {
            input,
            meta,
            engine,
            format,
            label,
        } => cmd_indicator(io, input.as_deref(), meta.as_deref(), engine, *format, label),
        Command::Compare {
            base,
            ctrl,
            engine,
            format,
            svg,
        } => cmd_compare(io, base, ctrl, engine, *format, svg.as_deref()),
        Command::Strategy {
            model,
            config,
            base_cost,
            optimize,
        } => cmd_strategy(io, model, config, *base_cost, *optimize),
        Command::Synth { spec, seed, meta_out } => cmd_synth(io, spec, *seed, meta_out.as_deref()),
        Command::VerifyPaper { format } => cmd_verify(io, *format),
        Command::Validate { input, meta, format } => cmd_validate(io, input.as_deref(), meta.as_deref(), *format),
    }
}

/// Runs one invocation and returns the process exit code.
pub fn run<I, T>(args: I, stdin: &mut dyn Read, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{e}");
                    0
                }
                _ => {
                    let _ = write!(stderr, "{}", e.render());
                    2
                }
            };
        }
    };
    let mut io = Io { stdin, stdout };
    let result = dispatch(&cli.command, &mut io);
    let _ = io.stdout.flush();
    match result {
        Ok(code) => code,
        Err(Failure::Invalid(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            1
        }
        Err(Failure::Io(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            3
        }
    }
}

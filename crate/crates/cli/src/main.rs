use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use factorseg::benchmark::{run_benchmark, BenchmarkGrid};
use factorseg::pipeline::{DetectConfig, DetectionReport, ScaleStrategy};
use factorseg::simgen::{generate, M1Params, Scenario, ScenarioSpec};
use factorseg::wavelet::{Boundary, PanelMode};
use factorseg::{load_csv, CapRule, Error, Orientation};
use serde::Serialize;

/// Change-point detection in the second-order structure of factor models.
#[derive(Parser)]
#[command(name = "factorseg", version, about)]
struct Cli {
    /// Worker threads (defaults to FACTORSEG_THREADS, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Detect change-points in a CSV panel.
    Detect(DetectArgs),
    /// Simulate a panel from one of the built-in scenarios.
    Simulate(SimulateArgs),
    /// Run a Monte-Carlo grid described by a TOML file.
    Benchmark(BenchmarkArgs),
    /// Render a saved report as CSV or Markdown.
    Report(ReportArgs),
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long)]
    input: PathBuf,
    /// Each CSV row is a time point rather than a series.
    #[arg(long)]
    rows_are_time: bool,
    /// TOML file with pipeline settings; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Include cross-series transforms.
    #[arg(long)]
    full_panel: bool,
    #[arg(long)]
    sequential_scales: bool,
    /// Zero the first 2^J - 1 points instead of reflecting.
    #[arg(long)]
    burn_in: bool,
    #[arg(long, conflicts_with = "cap_auto")]
    no_capping: bool,
    #[arg(long)]
    cap_auto: bool,
    #[arg(long, conflicts_with_all = ["cap_auto", "no_capping"])]
    cap: Option<f64>,
    #[arg(long = "R")]
    replicates: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "d-T")]
    d_t: Option<usize>,
    #[arg(long)]
    min_gap: Option<usize>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    j_star: Option<usize>,
    /// Comma-separated factor counts replacing the screening range.
    #[arg(long, value_delimiter = ',')]
    candidates: Option<Vec<usize>>,
    /// Skip demeaning.
    #[arg(long)]
    no_center: bool,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    scenario: Scenario,
    #[arg(long)]
    n: usize,
    #[arg(long = "T")]
    len: usize,
    #[arg(long)]
    q: Option<usize>,
    #[arg(long)]
    phi: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    varrho: Option<f64>,
    #[arg(long = "H")]
    h: Option<usize>,
    #[arg(long)]
    break_at: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV of M1 loadings, one row per series.
    #[arg(long)]
    m1_loadings: Option<PathBuf>,
    #[arg(long)]
    rows_are_time: bool,
    /// Panel CSV; the truth is written next to it as `<stem>.truth.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchmarkArgs {
    #[arg(long)]
    grid: PathBuf,
    /// CSV output (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Md,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Analysis(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io { .. } | Error::Format(_) | Error::Parse { .. } | Error::Config(_) => {
                Failure::Usage(e.to_string())
            }
            _ => Failure::Analysis(e.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))
}

fn csv_line(fields: &[String]) -> String {
    let mut line = fields.join(",");
    line.push('\n');
    line
}

fn to_json<T: Serialize>(v: &T) -> CliResult<String> {
    serde_json::to_string_pretty(v).map_err(|e| Failure::Analysis(e.to_string()))
}

fn detect_config(args: &DetectArgs) -> CliResult<DetectConfig> {
    let mut cfg = match &args.config {
        Some(p) => DetectConfig::from_toml_str(&read(p)?)?,
        None => DetectConfig::default(),
    };
    if args.full_panel {
        cfg.panel_mode = PanelMode::Full;
    }
    if args.sequential_scales {
        cfg.scales = ScaleStrategy::Sequential;
    }
    if args.burn_in {
        cfg.boundary = Boundary::BurnIn;
    }
    if args.no_capping {
        cfg.cap = CapRule::Disabled;
    }
    if args.cap_auto {
        cfg.cap = CapRule::DataDriven;
    }
    if let Some(c) = args.cap {
        cfg.cap = CapRule::Constant(c);
    }
    if args.no_center {
        cfg.center = false;
    }
    macro_rules! take {
        ($field:ident, $value:expr) => {
            if let Some(v) = $value {
                cfg.$field = v;
            }
        };
    }
    take!(replicates, args.replicates);
    take!(alpha, args.alpha);
    take!(seed, args.seed);
    if args.d_t.is_some() {
        cfg.d_t = args.d_t;
    }
    if args.min_gap.is_some() {
        cfg.min_gap = args.min_gap;
    }
    if args.max_depth.is_some() {
        cfg.max_depth = args.max_depth;
    }
    if args.j_star.is_some() {
        cfg.j_star = args.j_star;
    }
    if args.candidates.is_some() {
        cfg.candidates = args.candidates.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn screening_csv(report: &DetectionReport) -> String {
    let mut out = String::from("k,cardinality,subset_of_k_star,selected,locations\n");
    for run in &report.screening {
        let locs: Vec<String> = run.changepoints.iter().map(|p| p.location.to_string()).collect();
        out += &csv_line(&[
            run.k.to_string(),
            run.cardinality.to_string(),
            run.subset_of_k_star.to_string(),
            (run.k == report.k_star).to_string(),
            locs.join(" "),
        ]);
    }
    out
}

fn profile_csv(report: &DetectionReport) -> String {
    let mut out = String::from("component,b,statistic\n");
    for (name, p) in [
        ("common", &report.profiles.common),
        ("idiosyncratic", &report.profiles.idiosyncratic),
    ] {
        for (i, v) in p.values.iter().enumerate() {
            out += &csv_line(&[name.into(), (p.start + i).to_string(), format!("{v:?}")]);
        }
    }
    out
}

fn kbc_csv(report: &DetectionReport) -> String {
    let mut out = String::from("segment_start,segment_end,c,k\n");
    for (seg, row) in report.kbc.segments.iter().zip(&report.kbc.values) {
        for (c, k) in report.kbc.c_grid.iter().zip(row) {
            out += &csv_line(&[seg.0.to_string(), seg.1.to_string(), format!("{c:?}"), k.to_string()]);
        }
    }
    out
}

fn changepoints_csv(report: &DetectionReport) -> String {
    let mut out = String::from("origin,location,level,stat,threshold\n");
    for (origin, points) in [
        ("common", &report.common_changepoints),
        ("idiosyncratic", &report.idio_changepoints),
    ] {
        for p in points {
            out += &csv_line(&[
                origin.into(),
                p.location.to_string(),
                p.level.to_string(),
                format!("{:?}", p.stat),
                format!("{:?}", p.threshold),
            ]);
        }
    }
    out
}

fn markdown(report: &DetectionReport) -> String {
    let r = &report.resolved;
    let mut md = String::from("# Change-point report\n\n");
    let _ = writeln!(
        md,
        "Panel: n = {}, T = {}. Factor candidates {}..={} (k* = {}), d_T = {}, J* = {}, R = {}, alpha = {}, seed = {}.\n",
        r.n,
        r.len,
        r.range.candidates.first().unwrap_or(&0),
        r.range.candidates.last().unwrap_or(&0),
        report.k_star,
        r.d_t,
        r.j_star,
        report.config.replicates,
        report.config.alpha,
        report.config.seed
    );
    md += "## Change-points\n\n| origin | location | level | statistic | threshold |\n|---|---|---|---|---|\n";
    for (origin, points) in [
        ("common", &report.common_changepoints),
        ("idiosyncratic", &report.idio_changepoints),
    ] {
        for p in points {
            let _ = writeln!(md, "| {origin} | {} | {} | {:.4} | {:.4} |", p.location, p.level, p.stat, p.threshold);
        }
    }
    md += "\n## Screening\n\n| k | points | within k* set |\n|---|---|---|\n";
    for run in &report.screening {
        let locs: Vec<String> = run.changepoints.iter().map(|p| p.location.to_string()).collect();
        let _ = writeln!(md, "| {} | {} | {} |", run.k, locs.join(", "), run.subset_of_k_star);
    }
    md += "\n## Segments\n\n| start | end | factors | break type |\n|---|---|---|---|\n";
    for s in &report.segments {
        let r = s.r_hat.map_or_else(|| "-".into(), |v| v.to_string());
        let c = match s.classification {
            Some(factorseg::pipeline::BreakClass::LoadingOrNumberBreak) => "loading or number",
            Some(factorseg::pipeline::BreakClass::AutocorrelationOnly) => "autocorrelation only",
            None => "-",
        };
        let _ = writeln!(md, "| {} | {} | {r} | {c} |", s.start, s.end);
    }
    if !report.kbc.c_grid.is_empty() {
        md += "\n## Eigenvalues needed to explain a fraction c of variance\n\n| segment |";
        for c in &report.kbc.c_grid {
            let _ = write!(md, " {c:.2} |");
        }
        md += "\n|---|";
        md += &"---|".repeat(report.kbc.c_grid.len());
        md += "\n";
        for (seg, row) in report.kbc.segments.iter().zip(&report.kbc.values) {
            let _ = write!(md, "| {}-{} |", seg.0, seg.1);
            for k in row {
                let _ = write!(md, " {k} |");
            }
            md += "\n";
        }
    }
    md
}

fn run_detect(args: DetectArgs) -> CliResult<()> {
    let cfg = detect_config(&args)?;
    let orientation = if args.rows_are_time {
        Orientation::RowsAreTime
    } else {
        Orientation::RowsAreSeries
    };
    let panel = load_csv(&args.input, orientation)?;
    let report = factorseg::pipeline::detect(&panel, &cfg)?;
    fs::create_dir_all(&args.out)
        .map_err(|e| Failure::Usage(format!("cannot create {}: {e}", args.out.display())))?;
    write(&args.out.join("report.json"), &report.to_json()?)?;
    write(&args.out.join("screening.csv"), &screening_csv(&report))?;
    write(&args.out.join("dc_profile.csv"), &profile_csv(&report))?;
    write(&args.out.join("kbc.csv"), &kbc_csv(&report))?;
    println!("k* = {}", report.k_star);
    println!("common: {:?}", report.common_locations());
    println!("idiosyncratic: {:?}", report.idio_locations());
    Ok(())
}

fn run_simulate(args: SimulateArgs) -> CliResult<()> {
    let mut spec = ScenarioSpec::new(args.scenario, args.n, args.len);
    spec.seed = args.seed;
    spec.break_at = args.break_at;
    spec.h = args.h;
    if let Some(v) = args.q {
        spec.q = v;
    }
    if let Some(v) = args.phi {
        spec.phi = v;
    }
    if let Some(v) = args.sigma {
        spec.sigma = v;
    }
    if let Some(v) = args.varrho {
        spec.varrho = v;
    }
    if let Some(p) = &args.m1_loadings {
        let m = load_csv(p, Orientation::RowsAreSeries)?;
        let rows = (0..m.n()).map(|i| m.values().row(i).iter().copied().collect()).collect();
        spec.m1 = Some(M1Params {
            loadings: Some(rows),
            ..M1Params::default()
        });
    }
    let data = generate(&spec)?;
    let orientation = if args.rows_are_time {
        Orientation::RowsAreTime
    } else {
        Orientation::RowsAreSeries
    };
    let mut buf = Vec::new();
    data.panel.write_csv(&mut buf, orientation)?;
    fs::write(&args.out, buf).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", args.out.display())))?;

    #[derive(Serialize)]
    struct Sidecar<'a> {
        spec: &'a ScenarioSpec,
        theta: f64,
        truth: &'a [factorseg::simgen::TrueBreak],
    }
    let sidecar = args.out.with_extension("truth.json");
    write(
        &sidecar,
        &to_json(&Sidecar {
            spec: &data.spec,
            theta: data.theta,
            truth: &data.truth,
        })?,
    )?;
    println!("wrote {} and {}", args.out.display(), sidecar.display());
    Ok(())
}

fn run_bench(args: BenchmarkArgs) -> CliResult<()> {
    let grid = BenchmarkGrid::from_toml_str(&read(&args.grid)?)?;
    let rows = run_benchmark(&grid)?;
    let mut out = String::from("scenario,n,T,phi,sigma,varrho,test,component,runs,detection_rate,median_abs_error\n");
    for r in rows {
        let scenario = serde_json::to_value(r.scenario).ok().and_then(|v| v.as_str().map(String::from));
        let component = serde_json::to_value(r.component).ok().and_then(|v| v.as_str().map(String::from));
        out += &csv_line(&[
            scenario.unwrap_or_default(),
            r.n.to_string(),
            r.len.to_string(),
            r.phi.to_string(),
            r.sigma.to_string(),
            r.varrho.to_string(),
            r.test.name().into(),
            component.unwrap_or_default(),
            r.runs.to_string(),
            r.detection_rate.to_string(),
            r.median_abs_error.map_or_else(String::new, |v| v.to_string()),
        ]);
    }
    match args.out {
        Some(p) => write(&p, &out),
        None => {
            print!("{out}");
            Ok(())
        }
    }
}

fn run_report(args: ReportArgs) -> CliResult<()> {
    let report = DetectionReport::from_json(&read(&args.input)?)?;
    let text = match args.format {
        Format::Csv => changepoints_csv(&report),
        Format::Md => markdown(&report),
    };
    match args.out {
        Some(p) => write(&p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn init_threads(flag: Option<usize>) -> CliResult<()> {
    let from_env = std::env::var("FACTORSEG_THREADS").ok();
    let n = match (flag, from_env) {
        (Some(n), _) => Some(n),
        (None, Some(v)) => Some(
            v.trim()
                .parse::<usize>()
                .map_err(|_| Failure::Usage(format!("FACTORSEG_THREADS must be a positive integer, got '{v}'")))?,
        ),
        (None, None) => None,
    };
    if let Some(n) = n {
        if n == 0 {
            return Err(Failure::Usage("thread count must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = init_threads(cli.threads).and_then(|()| match cli.command {
        Command::Detect(a) => run_detect(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Benchmark(a) => run_bench(a),
        Command::Report(a) => run_report(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Analysis(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

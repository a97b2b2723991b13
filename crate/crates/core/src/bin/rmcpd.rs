//! Command-line front end.
//!
//! Exit codes: 0 success, 1 statistical degeneracy (hard failure, or any
//! warning under `--strict`), 2 invalid input or configuration.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use rmcpd::critical::critical_value_table;
use rmcpd::dataset::{generate, load_panel_csv, Family, GeneratorConfig, PanelDataset};
use rmcpd::detect::{detect, DetectConfig, DetectionReport, Window};
use rmcpd::graph::{SimilarityGraph, DEFAULT_K};
use rmcpd::pvalue::Correction;
use rmcpd::segmentation::{binary_segmentation, SegmentationConfig, SegmentationResult};
use rmcpd::simulate::{simulate, SimulationConfig, VERSION};
use rmcpd::Error;

#[derive(Parser)]
#[command(name = "rmcpd", version, about = "Graph-based change-point detection for repeated measurements")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test for a single change-point.
    Detect(DetectArgs),
    /// Estimate multiple change-points by binary segmentation.
    Segment(SegmentArgs),
    /// Critical values from the analytic approximations and permutations.
    CriticalValues(CriticalArgs),
    /// Power study over the generator settings.
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Panel CSV: individual_id, rep_index, x1..xd.
    #[arg(long, conflicts_with = "setting")]
    input: Option<PathBuf>,
    /// Number of individuals.
    #[arg(long)]
    n: usize,
    /// Repeated measures per individual.
    #[arg(long)]
    ell: usize,
    /// Generate data from a standard setting (1..=4) instead of reading a file.
    #[arg(long)]
    setting: Option<u8>,
    #[arg(long, default_value = "gaussian")]
    family: String,
    /// Dimension of generated data.
    #[arg(long, default_value_t = 10)]
    d: usize,
    /// Change-point of generated data (default n/2).
    #[arg(long)]
    tau: Option<usize>,
    #[arg(long, default_value_t = 0)]
    data_seed: u64,
}

impl DataArgs {
    fn load(&self) -> Result<PanelDataset, Error> {
        match (&self.input, self.setting) {
            (Some(path), _) => load_panel_csv(path, self.n, self.ell),
            (None, Some(s)) => {
                let family: Family = self.family.parse()?;
                let tau = self.tau.unwrap_or(self.n / 2);
                let cfg = GeneratorConfig::setting(family, s, tau, self.data_seed)?;
                generate(&cfg, self.n, self.ell, self.d)
            }
            (None, None) => Err(Error::Config("either --input or --setting is required".into())),
        }
    }
}

#[derive(Args, Clone)]
struct TestArgs {
    /// Number of successive MSTs in the similarity graph.
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    /// Start of the scan window as a fraction of n.
    #[arg(long, default_value_t = 0.05)]
    n0_frac: f64,
    /// End of the scan window as a fraction of n.
    #[arg(long, default_value_t = 0.95)]
    n1_frac: f64,
    /// Explicit window start (overrides the fractions together with --n1).
    #[arg(long, requires = "n1")]
    n0: Option<usize>,
    #[arg(long, requires = "n0")]
    n1: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value = "A2")]
    correction: String,
    /// Permutation replicates (0 = analytic p-values only).
    #[arg(long, default_value_t = 0)]
    permutations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Base the decision on the permutation p-value.
    #[arg(long)]
    decide_by_permutation: bool,
}

impl TestArgs {
    fn config(&self) -> Result<DetectConfig, Error> {
        let window = match (self.n0, self.n1) {
            (Some(a), Some(b)) => Window::Explicit(a, b),
            _ => Window::Fractions(self.n0_frac, self.n1_frac),
        };
        let cfg = DetectConfig {
            k: self.k,
            window,
            alpha: self.alpha,
            correction: self.correction.parse::<Correction>()?,
            permutations: self.permutations,
            seed: self.seed,
            decide_by_permutation: self.decide_by_permutation,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args, Clone)]
struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Treat degeneracy warnings as failures (exit code 1).
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct DetectArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    test: TestArgs,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct SegmentArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    test: TestArgs,
    #[command(flatten)]
    out: OutputArgs,
    /// Minimum segment length (default max(4, 2 ceil(0.05 n))).
    #[arg(long)]
    min_seg: Option<usize>,
    /// Use alpha / 2^depth at recursion depth `depth`.
    #[arg(long)]
    bonferroni: bool,
    #[arg(long)]
    max_depth: Option<usize>,
}

#[derive(Args)]
struct CriticalArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0.05)]
    n0_frac: f64,
    #[arg(long)]
    n0: Option<usize>,
    #[arg(long)]
    n1: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Data for the graph-dependent A2 and permutation columns.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    ell: Option<usize>,
    #[arg(long)]
    setting: Option<u8>,
    #[arg(long, default_value = "gaussian")]
    family: String,
    #[arg(long, default_value_t = 10)]
    d: usize,
    #[arg(long, default_value_t = 0)]
    data_seed: u64,
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    permutations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value = "gaussian")]
    family: String,
    /// Comma-separated settings.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
    settings: Vec<u8>,
    #[arg(long, default_value_t = 100)]
    replicates: usize,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 5)]
    ell: usize,
    #[arg(long, default_value_t = 40)]
    d: usize,
    #[arg(long)]
    tau: Option<usize>,
    /// Half-width of the localization band around tau.
    #[arg(long, default_value_t = 10)]
    radius: usize,
    #[command(flatten)]
    test: TestArgs,
    /// Append-only CSV of finished replicates; rerunning resumes from it.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Every JSON report carries the tool version and the master seed.
#[derive(Serialize)]
struct Envelope<'a, C: Serialize, R: Serialize> {
    version: &'static str,
    command: &'a str,
    seed: u64,
    config: C,
    report: R,
}

fn emit(text: &str, output: Option<&Path>) -> Result<(), Error> {
    match output {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Error::Io {
                    path: PathBuf::from("<stdout>"),
                    source: e,
                })
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String, Error> {
    serde_json::to_string_pretty(value)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| Error::Internal(format!("JSON encoding failed: {e}")))
}

fn csv_text(header: &[&str], rows: Vec<Vec<String>>) -> Result<String, Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Internal(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Internal(e.to_string()))
}

fn opt(v: Option<f64>) -> String {
    v.filter(|v| !v.is_nan()).map_or_else(String::new, |v| v.to_string())
}

fn fmt_p(p: f64) -> String {
    if p.is_nan() {
        "-".to_string()
    } else {
        format!("{p:.4}")
    }
}

fn detect_text(r: &DetectionReport) -> String {
    let mut s = format!(
        "n = {}, window = [{}, {}], alpha = {}\ntau_hat = {}, M* = {:.3}, p = {}, {}\n",
        r.n,
        r.n0,
        r.n1,
        r.alpha,
        r.tau_hat,
        r.m_star,
        fmt_p(r.p_value),
        if r.reject { "reject" } else { "no change detected" }
    );
    if let Some(p) = &r.permutation {
        s += &format!("permutation p = {} ({} replicates)\n", fmt_p(p.p_value), p.replicates);
    }
    s += "channel       at_tau      max   argmax  p_value\n";
    for c in &r.channels {
        s += &format!(
            "{:<10} {:>9.3} {:>8.3} {:>8} {:>8}\n",
            c.channel.name(),
            c.at_tau,
            c.window_max,
            c.window_argmax,
            fmt_p(c.p_value)
        );
    }
    s
}

fn segment_text(r: &SegmentationResult) -> String {
    if r.change_points.is_empty() {
        return "no change-points detected\n".to_string();
    }
    let mut s = "position  p_value  depth\n".to_string();
    for c in &r.change_points {
        s += &format!("{:>8} {:>8} {:>6}\n", c.position, fmt_p(c.p_value), c.depth);
    }
    s
}

/// Outcome of a command: whether any degeneracy warning was raised.
type Outcome = Result<bool, Error>;

fn run_detect(a: &DetectArgs) -> Outcome {
    let ds = a.data.load()?;
    let cfg = a.test.config()?;
    let report = detect(&ds, &cfg)?;
    let text = match a.out.format {
        Format::Text => detect_text(&report),
        Format::Json => to_json(&Envelope {
            version: VERSION,
            command: "detect",
            seed: cfg.seed,
            config: &cfg,
            report: &report,
        })?,
        Format::Csv => {
            let mut header = vec!["version", "seed", "n", "n0", "n1", "tau_hat", "m_star", "p_value", "reject"];
            let mut row = vec![
                VERSION.to_string(),
                cfg.seed.to_string(),
                report.n.to_string(),
                report.n0.to_string(),
                report.n1.to_string(),
                report.tau_hat.to_string(),
                report.m_star.to_string(),
                report.p_value.to_string(),
                report.reject.to_string(),
            ];
            let names = ["out_w", "out_d", "in", "in_tilde"];
            let cols = ["at_tau", "max", "p_value"];
            let mut owned = Vec::new();
            for name in names {
                for col in cols {
                    owned.push(format!("{name}_{col}"));
                }
                let c = report.channels.iter().find(|c| c.channel.name() == name);
                row.push(opt(c.map(|c| c.at_tau)));
                row.push(opt(c.map(|c| c.window_max)));
                row.push(opt(c.map(|c| c.p_value)));
            }
            header.extend(owned.iter().map(String::as_str));
            csv_text(&header, vec![row])?
        }
    };
    emit(&text, a.out.output.as_deref())?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    Ok(!report.warnings.is_empty())
}

fn run_segment(a: &SegmentArgs) -> Outcome {
    let ds = a.data.load()?;
    let cfg = SegmentationConfig {
        detect: a.test.config()?,
        min_seg: a.min_seg,
        bonferroni: a.bonferroni,
        max_depth: a.max_depth,
    };
    let result = binary_segmentation(&ds, &cfg)?;
    let text = match a.out.format {
        Format::Text => segment_text(&result),
        Format::Json => to_json(&Envelope {
            version: VERSION,
            command: "segment",
            seed: cfg.detect.seed,
            config: &cfg,
            report: &result,
        })?,
        Format::Csv => csv_text(
            &["position", "p_value", "depth"],
            result
                .change_points
                .iter()
                .map(|c| vec![c.position.to_string(), c.p_value.to_string(), c.depth.to_string()])
                .collect(),
        )?,
    };
    emit(&text, a.out.output.as_deref())?;
    Ok(false)
}

fn run_critical(a: &CriticalArgs) -> Outcome {
    let (n0, n1) = match (a.n0, a.n1) {
        (Some(x), Some(y)) => (x, y),
        (Some(x), None) => (x, a.n - x),
        _ => Window::Fractions(a.n0_frac, 1.0 - a.n0_frac).resolve(a.n)?,
    };
    let graph = match (&a.input, a.setting) {
        (None, None) => None,
        _ => {
            let ell = a.ell.ok_or_else(|| Error::Config("--ell is required with data".into()))?;
            let data = DataArgs {
                input: a.input.clone(),
                n: a.n,
                ell,
                setting: a.setting,
                family: a.family.clone(),
                d: a.d,
                tau: Some(a.n / 2),
                data_seed: a.data_seed,
            };
            Some(SimilarityGraph::from_dataset(&data.load()?, a.k)?)
        }
    };
    if a.permutations > 0 && graph.is_none() {
        return Err(Error::Config("permutation critical values need data (--input or --setting)".into()));
    }
    let table = critical_value_table(a.n, n0, n1, a.alpha, graph.as_ref(), a.permutations, a.seed)?;
    let text = match a.format {
        Format::Text => table.to_text(),
        Format::Json => to_json(&Envelope {
            version: VERSION,
            command: "critical-values",
            seed: a.seed,
            config: serde_json::json!({ "n": a.n, "n0": n0, "n1": n1, "alpha": a.alpha, "k": a.k }),
            report: &table,
        })?,
        Format::Csv => csv_text(
            &["channel", "a1", "a2", "permutation"],
            table
                .rows
                .iter()
                .map(|r| vec![r.channel.name().to_string(), opt(r.a1), opt(r.a2), opt(r.permutation)])
                .collect(),
        )?,
    };
    emit(&text, a.output.as_deref())?;
    Ok(false)
}

fn run_simulate(a: &SimulateArgs) -> Outcome {
    let cfg = SimulationConfig {
        family: a.family.parse()?,
        settings: a.settings.clone(),
        replicates: a.replicates,
        n: a.n,
        ell: a.ell,
        d: a.d,
        tau: a.tau.unwrap_or(a.n / 2),
        radius: a.radius,
        detect: a.test.config()?,
        seed: a.test.seed,
    };
    let report = simulate(&cfg, a.checkpoint.as_deref())?;
    let text = match a.format {
        Format::Json => report.to_json()? + "\n",
        Format::Csv => report.summary_csv()?,
        Format::Text => {
            let mut s = format!("family {} n {} d {} tau {} seed {}\n", cfg.family, cfg.n, cfg.d, cfg.tau, cfg.seed);
            for row in &report.summary {
                s.push_str(&format!(
                    "setting {}: {} / {} rejected ({} localized)\n",
                    row.setting, row.rejections, row.replicates, row.localized
                ));
            }
            s
        }
    };
    emit(&text, a.output.as_deref())?;
    Ok(false)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Degenerate(_) | Error::Numerical(_) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (strict, outcome) = match &cli.command {
        Command::Detect(a) => (a.out.strict, run_detect(a)),
        Command::Segment(a) => (a.out.strict, run_segment(a)),
        Command::CriticalValues(a) => (false, run_critical(a)),
        Command::Simulate(a) => (false, run_simulate(a)),
    };
    match outcome {
        Ok(true) if strict => {
            eprintln!("error: degeneracy warnings raised under --strict");
            ExitCode::from(1)
        }
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

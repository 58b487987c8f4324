use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod corpus;
mod report;
mod tuple_spec;

use commands::{run_case, Overrides};
use config::{
    CaseCommand, CaseConfig, ConfigError, DilateMode, GridConfig, SeriesConfig, SeriesOp,
    Tolerances,
};
use report::{Check, ErrorObject, Format, Report};

#[derive(Parser, Debug)]
#[command(
    name = "hypermodel",
    version,
    about = "Weighted Bergman models for commuting matrix tuples"
)]
struct Cli {
    /// Case file (TOML); flags below override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Residual tolerance for isometry, intertwining and identity checks.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Reseeds the tuple generator and auxiliary random draws.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Truncation degrees, one per variable.
    #[arg(long, global = true, value_delimiter = ',')]
    degrees: Option<Vec<usize>>,
    #[arg(long, global = true, value_enum, default_value = "text")]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct CaseArgs {
    /// Weight list such as `bergman:2,hardy`.
    #[arg(long)]
    weights: Option<String>,
    /// Tuple generator such as `nilpotent:7:4:2`.
    #[arg(long)]
    tuple: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Weight-series arithmetic.
    Series {
        #[arg(value_enum)]
        op: SeriesOpArg,
        #[arg(long)]
        weights: Option<String>,
        #[arg(long, default_value_t = 32)]
        terms: usize,
        #[arg(long)]
        r: Option<f64>,
        #[arg(long)]
        s: Option<f64>,
    },
    /// Hypercontractivity, purity, gamma and subtuple checks.
    Check(CaseArgs),
    /// Isometric dilation onto a truncated Bergman model.
    Dilate {
        #[command(flatten)]
        case: CaseArgs,
        #[arg(long, conflicts_with = "general")]
        pure: bool,
        #[arg(long)]
        general: bool,
        /// Include the map and model operators.
        #[arg(long)]
        full: bool,
    },
    /// Characteristic function of a pure one-variable tuple.
    Charfn {
        #[command(flatten)]
        case: CaseArgs,
        #[arg(long)]
        full: bool,
    },
    /// Runs a case corpus and compares each outcome with its `expect` field.
    VerifyAll {
        /// Directory of case files; the built-in corpus when absent.
        #[arg(long)]
        cases: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum SeriesOpArg {
    Invert,
    Quotient,
    Props,
}

fn base_case(command: CaseCommand, name: &str) -> CaseConfig {
    CaseConfig {
        name: name.to_string(),
        command,
        weights: String::new(),
        tuple: None,
        degrees: Vec::new(),
        mode: DilateMode::default(),
        series: None,
        tolerances: Tolerances::default(),
        grid: GridConfig::default(),
        expect: None,
        seed: 0,
        require: Vec::new(),
        base_dir: PathBuf::from("."),
    }
}

/// Loads `--config` if given, otherwise starts from defaults; then applies flags.
fn case_from(cli: &Cli, command: CaseCommand, args: &CaseArgs) -> Result<CaseConfig, ConfigError> {
    let mut cfg = match &cli.config {
        Some(p) => CaseConfig::load(p)?,
        None => base_case(command, "cli"),
    };
    if cfg.command != command {
        return Err(ConfigError(
            format!("case file holds a {:?} case", cfg.command).to_lowercase(),
        ));
    }
    if let Some(w) = &args.weights {
        cfg.weights = w.clone();
    }
    if let Some(t) = &args.tuple {
        cfg.tuple = Some(t.clone());
    }
    if let Some(d) = &cli.degrees {
        cfg.degrees = d.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn overrides(cli: &Cli, full: bool) -> Overrides {
    Overrides {
        tol: cli.tol,
        seed: cli.seed,
        degrees: cli.degrees.clone(),
        full,
    }
}

fn config_error(command: &str, e: ConfigError) -> Report {
    let mut r = Report::new(command, None);
    r.fail_with(ErrorObject::config(&e));
    r.finish()
}

fn load_dir(dir: &Path) -> Result<Vec<CaseConfig>, ConfigError> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| ConfigError(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    paths.sort();
    paths.iter().map(|p| CaseConfig::load(p)).collect()
}

fn embedded() -> Result<Vec<CaseConfig>, ConfigError> {
    corpus::CASES
        .iter()
        .map(|(name, text)| {
            CaseConfig::parse(text, Path::new(config::EMBEDDED))
                .map_err(|e| ConfigError(format!("{name}: {}", e.0)))
        })
        .collect()
}

/// Output text and exit code of `verify-all`.
fn verify_all(cli: &Cli, cases: Option<&Path>) -> (String, u8) {
    let loaded = match cases {
        Some(d) => load_dir(d),
        None => embedded(),
    };
    let cfgs = match loaded {
        Ok(c) => c,
        Err(e) => {
            let r = config_error("verify-all", e);
            return (r.render(cli.format), r.exit_code());
        }
    };
    let ov = overrides(cli, false);
    let mut summary = Report::new("verify-all", None);
    let mut reports = Vec::with_capacity(cfgs.len());
    for cfg in &cfgs {
        let start = Instant::now();
        let r = run_case(cfg, &ov);
        eprintln!("{}: {:.2?}", cfg.name, start.elapsed());
        let expected = cfg.expect.map_or(0, |e| e.exit_code());
        let got = r.exit_code();
        summary.push(
            Check::flag(cfg.name.clone(), got == expected)
                .detail(format!("expected exit {expected}, got {got}")),
        );
        reports.push(r);
    }
    let summary = summary.finish();
    let text = match cli.format {
        Format::Text => {
            let mut s: String = reports
                .iter()
                .map(|r| r.render(Format::Text) + "\n")
                .collect();
            s.push_str(&summary.render(Format::Text));
            s
        }
        Format::Json => {
            let v = serde_json::json!({ "cases": reports, "summary": summary });
            serde_json::to_string_pretty(&v).expect("report serializes") + "\n"
        }
    };
    (text, summary.exit_code())
}

fn run(cli: &Cli) -> (String, u8) {
    let report = match &cli.command {
        Command::Series {
            op,
            weights,
            terms,
            r,
            s,
        } => {
            let op = match op {
                SeriesOpArg::Invert => SeriesOp::Invert,
                SeriesOpArg::Quotient => SeriesOp::Quotient,
                SeriesOpArg::Props => SeriesOp::Props,
            };
            let mut cfg = match &cli.config {
                Some(p) => match CaseConfig::load(p) {
                    Ok(c) => c,
                    Err(e) => return finish(config_error("series", e), cli.format),
                },
                None => base_case(CaseCommand::Series, "cli"),
            };
            if let Some(w) = weights {
                cfg.weights = w.clone();
            }
            let sc = cfg.series.get_or_insert(SeriesConfig {
                op,
                terms: *terms,
                r: None,
                s: None,
            });
            sc.op = op;
            if cli.config.is_none() || *terms != 32 {
                sc.terms = *terms;
            }
            sc.r = r.or(sc.r);
            sc.s = s.or(sc.s);
            match cfg.validate() {
                Ok(()) => run_case(&cfg, &overrides(cli, false)),
                Err(e) => config_error("series", e),
            }
        }
        Command::Check(args) => match case_from(cli, CaseCommand::Check, args) {
            Ok(cfg) => run_case(&cfg, &overrides(cli, false)),
            Err(e) => config_error("check", e),
        },
        Command::Dilate {
            case,
            pure,
            general,
            full,
        } => match case_from(cli, CaseCommand::Dilate, case) {
            Ok(mut cfg) => {
                if *general {
                    cfg.mode = DilateMode::General;
                } else if *pure {
                    cfg.mode = DilateMode::Pure;
                }
                run_case(&cfg, &overrides(cli, *full))
            }
            Err(e) => config_error("dilate", e),
        },
        Command::Charfn { case, full } => match case_from(cli, CaseCommand::Charfn, case) {
            Ok(cfg) => run_case(&cfg, &overrides(cli, *full)),
            Err(e) => config_error("charfn", e),
        },
        Command::VerifyAll { cases } => return verify_all(cli, cases.as_deref()),
    };
    finish(report, cli.format)
}

fn finish(r: Report, format: Format) -> (String, u8) {
    (r.render(format), r.exit_code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let start = Instant::now();
    let (text, code) = run(&cli);
    match &cli.out {
        Some(p) => {
            if let Err(e) = std::fs::write(p, &text) {
                eprintln!("cannot write {}: {e}", p.display());
                return ExitCode::from(2);
            }
        }
        None => print!("{text}"),
    }
    eprintln!("elapsed: {:.2?}", start.elapsed());
    ExitCode::from(code)
}

//! Command-line front end. Exit codes: 0 success, 1 usage, 2 input error,
//! 3 node budget exceeded.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::bench::{run_bench, write_csv};
use crate::format::{format_trace, parse_log, parse_slpn, parse_trace, render, AlignmentReport, OutputFormat};
use crate::heuristics::{HeuristicConfig, Heuristics};
use crate::loss::LossParams;
use crate::net::StochasticNet;
use crate::oracle::{pareto_front, EnumerationBudget};
use crate::product::build_sync_product;
use crate::search::{align_product, SearchConfig, SearchError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "salign", version, about = "Stochastic alignments of traces against stochastic labeled Petri nets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Table,
    Json,
}

#[derive(clap::Args, Debug)]
struct SearchArgs {
    /// Maximum number of expanded search nodes.
    #[arg(long, default_value_t = 5_000_000)]
    node_budget: usize,
    /// Per-variable firing cap in the heuristic programs.
    #[arg(long)]
    cap: Option<i64>,
    /// Solve only the linear relaxations for the heuristics.
    #[arg(long)]
    lp: bool,
    /// Branch-and-bound node limit per heuristic solve.
    #[arg(long)]
    milp_nodes: Option<usize>,
}

impl SearchArgs {
    fn config(&self) -> SearchConfig {
        let mut heuristic = HeuristicConfig {
            cap: self.cap,
            relax_integrality: self.lp,
            ..HeuristicConfig::default()
        };
        if let Some(n) = self.milp_nodes {
            heuristic.max_nodes = n;
        }
        SearchConfig {
            node_budget: self.node_budget,
            heuristic,
            ..SearchConfig::default()
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute an optimal alignment.
    Align {
        #[arg(long)]
        model: PathBuf,
        /// Comma-separated activities (`\,` escapes a comma).
        #[arg(long, conflicts_with = "trace_file", required_unless_present = "trace_file")]
        trace: Option<String>,
        /// File with one trace per line; every trace is aligned.
        #[arg(long)]
        trace_file: Option<PathBuf>,
        #[arg(long)]
        alpha: f64,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
        #[command(flatten)]
        search: SearchArgs,
        /// Also report the exact probability as a fraction.
        #[arg(long)]
        rational: bool,
    },
    /// List the Pareto-optimal model paths by exhaustive enumeration.
    Pareto {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        trace: String,
        /// Longest model path enumerated.
        #[arg(long, default_value_t = 32)]
        max_len: usize,
    },
    /// Check a model file.
    Validate {
        #[arg(long)]
        model: PathBuf,
    },
    /// Time alignments of a log and write a CSV.
    Bench {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        log: PathBuf,
        /// Comma-separated balance factors.
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.5,0.9")]
        alphas: Vec<f64>,
        #[arg(long, default_value_t = 1)]
        repeat: usize,
        #[arg(long)]
        csv: PathBuf,
        #[command(flatten)]
        search: SearchArgs,
    },
}

struct Failure {
    code: i32,
    message: String,
}

fn input(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_INPUT,
        message: message.into(),
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn load_model(path: &Path) -> Result<StochasticNet, Failure> {
    parse_slpn(&read(path)?).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn check_alpha(alpha: f64) -> Result<LossParams, Failure> {
    LossParams::new(alpha).map_err(|e| usage(format!("--alpha: {e}")))
}

/// Runs the CLI on `args` (program name first) and returns the exit code.
pub fn cli_main<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return code;
        }
    };
    match run(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn run(command: Command, out: &mut dyn Write) -> Result<(), Failure> {
    let io = |e: std::io::Error| input(format!("write failed: {e}"));
    match command {
        Command::Align {
            model,
            trace,
            trace_file,
            alpha,
            format,
            search,
            rational,
        } => {
            let params = check_alpha(alpha)?;
            let net = load_model(&model)?;
            let traces = match (trace, trace_file) {
                (Some(t), _) => vec![parse_trace(&t)],
                (None, Some(f)) => parse_log(&read(&f)?),
                (None, None) => return Err(usage("one of --trace or --trace-file is required")),
            };
            let config = search.config();
            let format = match format {
                Format::Table => OutputFormat::Table,
                Format::Json => OutputFormat::Json,
            };
            for (i, trace) in traces.iter().enumerate() {
                let sp = build_sync_product(trace, &net);
                let cap = Heuristics::new(&sp, config.heuristic.clone()).cap();
                let outcome = align_product(&sp, params, &config).map_err(|e| match e {
                    SearchError::BudgetExceeded { ref incumbent, .. } => Failure {
                        code: EXIT_BUDGET,
                        message: match incumbent {
                            Some(a) => format!("{e}; best complete alignment found has loss {:.6}", a.loss),
                            None => e.to_string(),
                        },
                    },
                    SearchError::NoDeadlockReachable { .. } => input(e.to_string()),
                    SearchError::Loss(_) => usage(e.to_string()),
                })?;
                let report = AlignmentReport {
                    alignment: &outcome.alignment,
                    model: &net,
                    expanded: outcome.stats.expanded,
                    runtime_ms: outcome.stats.runtime.as_secs_f64() * 1e3,
                    node_budget: config.node_budget,
                    cap,
                    rational,
                };
                let text = render(&report, format);
                if format == OutputFormat::Table && traces.len() > 1 {
                    if i > 0 {
                        writeln!(out).map_err(io)?;
                    }
                    writeln!(out, "# {}", format_trace(trace)).map_err(io)?;
                }
                write!(out, "{text}").map_err(io)?;
                if format == OutputFormat::Json {
                    writeln!(out).map_err(io)?;
                }
            }
            Ok(())
        }
        Command::Pareto { model, trace, max_len } => {
            let net = load_model(&model)?;
            let trace = parse_trace(&trace);
            let budget = EnumerationBudget {
                max_path_len: max_len,
                ..EnumerationBudget::default()
            };
            let (front, truncated) = pareto_front(&net, &trace, &budget);
            writeln!(out, "distance\tprobability\tlog10\tpath").map_err(io)?;
            for s in &front {
                let names: Vec<&str> = s
                    .path
                    .transitions()
                    .iter()
                    .map(|t| net.transition(*t).name.as_str())
                    .collect();
                writeln!(
                    out,
                    "{}\t{}\t{:.6}\t<{}>",
                    s.distance,
                    s.probability.exact,
                    s.probability.log10,
                    names.join(",")
                )
                .map_err(io)?;
            }
            if truncated {
                writeln!(out, "# enumeration truncated at length {max_len}; front may be incomplete").map_err(io)?;
            }
            Ok(())
        }
        Command::Validate { model } => {
            let net = load_model(&model)?;
            let silent = net.transitions().iter().filter(|t| t.label.is_silent()).count();
            writeln!(
                out,
                "ok: {} places, {} transitions ({} silent), {} initial tokens, {} activities",
                net.num_places(),
                net.num_transitions(),
                silent,
                net.initial_marking().total(),
                net.alphabet().len()
            )
            .map_err(io)?;
            Ok(())
        }
        Command::Bench {
            model,
            log,
            alphas,
            repeat,
            csv,
            search,
        } => {
            for a in &alphas {
                check_alpha(*a)?;
            }
            let net = load_model(&model)?;
            let traces = parse_log(&read(&log)?);
            let rows = run_bench(&net, &traces, &alphas, repeat, &search.config())
                .map_err(|e| usage(e.to_string()))?;
            let file = fs::File::create(&csv).map_err(|e| input(format!("{}: {e}", csv.display())))?;
            write_csv(&rows, file).map_err(|e| input(format!("{}: {e}", csv.display())))?;
            let failed = rows.iter().filter(|r| r.status != "ok").count();
            writeln!(out, "wrote {} rows to {} ({failed} not ok)", rows.len(), csv.display()).map_err(io)?;
            Ok(())
        }
    }
}

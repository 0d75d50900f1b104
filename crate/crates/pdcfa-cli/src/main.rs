//! `pdcfa`: parse an ANF program, run a chosen analysis, emit reports.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use pdcfa::abstracted::AllocPolicy;
use pdcfa::clients::{flows_json, AnalysisResult};
use pdcfa::concrete;
use pdcfa::dsg::{self, FixpointStatus, Limits, WorkOrder};
use pdcfa::pushdown::Rpds;
use pdcfa::syntax::{parse, unique_binders, Label, Program};
use pdcfa::widened;

#[derive(Parser)]
#[command(name = "pdcfa", version, about = "Pushdown control-flow analysis for ANF programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an abstract analysis and emit the requested artifacts.
    Analyze(AnalyzeArgs),
    /// Run the concrete machine for a bounded number of steps.
    Run(RunArgs),
    /// Regenerate the seeded random corpus files.
    GenCorpus(GenCorpusArgs),
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Input program (.anf)
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = Analysis::PushdownWidened)]
    analysis: Analysis,
    /// Allocation policy: 0cfa, 1cfa, kcfa:K, polycfa:FILE
    #[arg(long, default_value = "0cfa")]
    policy: String,
    #[arg(long, value_enum, default_value_t = Algorithm::Worklist)]
    algorithm: Algorithm,
    /// Step budget for --analysis concrete
    #[arg(long, default_value_t = 1000)]
    max_steps: usize,
    #[arg(long, default_value_t = 200_000)]
    node_limit: usize,
    #[arg(long, default_value_t = 2_000_000)]
    edge_limit: usize,
    /// Artifacts to write: flows-json, dsg-dot, ecg-dot, trace, stats
    #[arg(long, value_delimiter = ',')]
    emit: Vec<Emit>,
    /// Directory for emitted artifacts
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Include env/store digests in DOT node labels
    #[arg(long)]
    verbose: bool,
}

#[derive(Args)]
struct RunArgs {
    /// Input program (.anf)
    input: PathBuf,
    #[arg(long, default_value_t = 1000)]
    max_steps: usize,
    /// Print the trace to stdout
    #[arg(long)]
    trace: bool,
    /// Artifacts to write: trace, stats
    #[arg(long, value_delimiter = ',')]
    emit: Vec<Emit>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct GenCorpusArgs {
    /// Output directory
    out_dir: PathBuf,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    count: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Analysis {
    Concrete,
    PushdownUnwidened,
    PushdownWidened,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Algorithm {
    Naive,
    Worklist,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Emit {
    FlowsJson,
    DsgDot,
    EcgDot,
    Trace,
    Stats,
}

/// Exit with 1 on bad input, 2 when a fixpoint limit was exceeded.
fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            eprintln!("{e}");
            return ExitCode::from(1);
        }
        Err(e) => {
            // --help / --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    let result = match cli.command {
        Command::Analyze(args) => analyze(args),
        Command::Run(args) => run(args),
        Command::GenCorpus(args) => gen_corpus(args),
    };
    match result {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("pdcfa: {msg}");
            ExitCode::from(1)
        }
    }
}

fn load_program(path: &Path) -> Result<(Program, String), String> {
    if path.extension().is_none_or(|e| e != "anf") {
        return Err(format!("{}: expected a .anf file", path.display()));
    }
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("{}: {e}", path.display()))?;
    let prog = parse(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "program".to_string());
    Ok((unique_binders(&prog), stem))
}

fn parse_policy(spec: &str) -> Result<AllocPolicy, String> {
    match spec {
        "0cfa" => Ok(AllocPolicy::ZeroCfa),
        "1cfa" => Ok(AllocPolicy::OneCfa),
        _ => {
            if let Some(k) = spec.strip_prefix("kcfa:") {
                let k: u32 = k.parse().map_err(|_| format!("bad kcfa bound `{k}`"))?;
                if k < 1 {
                    return Err("kcfa requires k >= 1".to_string());
                }
                Ok(AllocPolicy::kcfa(k))
            } else if let Some(file) = spec.strip_prefix("polycfa:") {
                let text = std::fs::read_to_string(file).map_err(|e| format!("{file}: {e}"))?;
                let mut labels = BTreeSet::new();
                for (i, line) in text.lines().enumerate() {
                    let line = line.trim();
                    if line.is_empty() {
                        continue;
                    }
                    let Some(rest) = line.strip_prefix("letbound ") else {
                        return Err(format!("{file}:{}: expected `letbound <label>`", i + 1));
                    };
                    let n: u32 = rest
                        .trim()
                        .parse()
                        .map_err(|_| format!("{file}:{}: bad label `{rest}`", i + 1))?;
                    labels.insert(Label(n));
                }
                Ok(AllocPolicy::PolyCfa(labels))
            } else {
                Err(format!("unknown policy `{spec}`"))
            }
        }
    }
}

fn write_artifact(out_dir: &Path, stem: &str, suffix: &str, contents: &str) -> Result<(), String> {
    std::fs::create_dir_all(out_dir).map_err(|e| format!("{}: {e}", out_dir.display()))?;
    let path = out_dir.join(format!("{stem}.{suffix}"));
    std::fs::write(&path, contents).map_err(|e| format!("{}: {e}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn run(args: RunArgs) -> Result<ExitCode, String> {
    let (prog, stem) = load_program(&args.input)?;
    let outcome = concrete::run(&prog, args.max_steps).map_err(|e| e.to_string())?;
    let status = match &outcome.status {
        concrete::RunStatus::Final => "Final",
        concrete::RunStatus::StepLimit => "StepLimit",
        concrete::RunStatus::Failed(e) => return Err(e.to_string()),
    };
    let stats = json!({
        "steps": outcome.trace.len() - 1,
        "status": status,
    });
    println!("{stats}");
    if args.trace {
        print!("{}", concrete::format_trace(&outcome.trace));
    }
    for emit in &args.emit {
        match emit {
            Emit::Trace => write_artifact(
                &args.out_dir,
                &stem,
                "trace.txt",
                &concrete::format_trace(&outcome.trace),
            )?,
            Emit::Stats => write_artifact(
                &args.out_dir,
                &stem,
                "stats.json",
                &format!("{:#}\n", stats),
            )?,
            _ => return Err("run emits only trace and stats".to_string()),
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn analyze(args: AnalyzeArgs) -> Result<ExitCode, String> {
    if args.analysis == Analysis::Concrete {
        return run(RunArgs {
            input: args.input,
            max_steps: args.max_steps,
            trace: false,
            emit: args.emit,
            out_dir: args.out_dir,
        });
    }
    let (prog, stem) = load_program(&args.input)?;
    let policy = parse_policy(&args.policy)?;
    let limits = Limits {
        max_nodes: args.node_limit,
        max_edges: args.edge_limit,
    };
    let bound = widened::iteration_bound(&prog);

    let mut limit_exceeded = false;
    let (result, stats) = match args.analysis {
        Analysis::PushdownUnwidened => {
            let rpds = Rpds::new(&prog, policy.clone()).map_err(|e| e.to_string())?;
            let analysis = match args.algorithm {
                Algorithm::Worklist => dsg::worklist_fixpoint(&rpds, limits, WorkOrder::Fifo),
                Algorithm::Naive => dsg::naive_fixpoint(&rpds, limits),
            };
            limit_exceeded = analysis.status == FixpointStatus::LimitExceeded;
            let s = analysis.stats();
            let stats = json!({
                "iterations": s.iterations,
                "nodes": s.nodes,
                "edges": s.edges,
                "hEdges": s.h_edges,
                "bound": bound,
            });
            (AnalysisResult::Unwidened { policy, analysis }, stats)
        }
        Analysis::PushdownWidened => {
            let (system, iterations) =
                widened::widened_analyze(&prog, &policy).map_err(|e| e.to_string())?;
            let stats = json!({
                "iterations": iterations,
                "nodes": system.dscfg.nodes.len(),
                "edges": system.dscfg.edges.len(),
                "hEdges": system.ecg.len(),
                "bound": bound,
            });
            (
                AnalysisResult::Widened { policy, system, iterations },
                stats,
            )
        }
        Analysis::Concrete => unreachable!(),
    };

    println!("{stats}");
    for emit in &args.emit {
        match emit {
            Emit::FlowsJson => {
                let flows = flows_json(&prog, &result);
                write_artifact(&args.out_dir, &stem, "flows.json", &format!("{flows:#}\n"))?;
            }
            Emit::Stats => {
                write_artifact(&args.out_dir, &stem, "stats.json", &format!("{stats:#}\n"))?;
            }
            Emit::DsgDot => {
                let dot = match &result {
                    AnalysisResult::Unwidened { analysis, .. } => {
                        dsg::dsg_to_dot(analysis, &prog, args.verbose)
                    }
                    AnalysisResult::Widened { system, .. } => {
                        widened::dscfg_to_dot(system, &prog, args.verbose)
                    }
                };
                write_artifact(&args.out_dir, &stem, "dsg.dot", &dot)?;
            }
            Emit::EcgDot => {
                let dot = match &result {
                    AnalysisResult::Unwidened { analysis, .. } => dsg::ecg_to_dot(analysis, &prog),
                    AnalysisResult::Widened { system, .. } => widened_ecg_to_dot(system),
                };
                write_artifact(&args.out_dir, &stem, "ecg.dot", &dot)?;
            }
            Emit::Trace => return Err("trace is only emitted by the concrete analysis".into()),
        }
    }
    if limit_exceeded {
        eprintln!("pdcfa: fixpoint limits exceeded; graphs are partial");
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn widened_ecg_to_dot(system: &widened::WidenedSystem) -> String {
    use std::fmt::Write as _;
    let nodes: Vec<_> = system.dscfg.nodes.iter().collect();
    let mut out = String::from("digraph ecg {\n  rankdir=LR;\n  edge [style=dashed];\n");
    for (i, p) in nodes.iter().enumerate() {
        writeln!(out, "  n{i} [label=\"{}\"];", p.expr).unwrap();
    }
    for (a, b) in &system.ecg {
        let ia = nodes.iter().position(|p| *p == a).unwrap();
        let ib = nodes.iter().position(|p| *p == b).unwrap();
        writeln!(out, "  n{ia} -> n{ib};").unwrap();
    }
    out.push_str("}\n");
    out
}

fn gen_corpus(args: GenCorpusArgs) -> Result<ExitCode, String> {
    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| format!("{}: {e}", args.out_dir.display()))?;
    for (name, src) in pdcfa::corpus::named() {
        let path = args.out_dir.join(format!("{name}.anf"));
        std::fs::write(&path, format!("{src}\n")).map_err(|e| format!("{}: {e}", path.display()))?;
        println!("wrote {}", path.display());
    }
    for (name, src) in pdcfa::corpus::random_suite(args.seed, args.count) {
        let path = args.out_dir.join(format!("{name}.anf"));
        std::fs::write(&path, format!("{src}\n")).map_err(|e| format!("{}: {e}", path.display()))?;
        println!("wrote {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

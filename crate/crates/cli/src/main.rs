use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use ctcsdp::chordal::{decompose, decompose_with, Graph};
use ctcsdp::cone::NuConvention;
use ctcsdp::generators::{lovasz_theta, maxcut, maxkcut};
use ctcsdp::ipm::{SolverOptions, StepRule};
use ctcsdp::sdpa::{read_sdpa_file, write_sdpa_file};
use ctcsdp::{Method, PipelineOptions, Problem};

#[derive(Parser)]
#[command(name = "ctcsdp", version, about = "Sparse SDP solver based on clique tree conversion")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a generated problem in SDPA sparse format
    Generate {
        kind: Kind,
        /// edge list: header `n m`, then `u v [w]` with 1-based vertices
        #[arg(long)]
        graph: PathBuf,
        /// number of parts for maxkcut
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Tree decomposition of a graph
    Decompose {
        #[arg(long)]
        graph: PathBuf,
        /// elimination order, 1-based vertex ids separated by whitespace
        #[arg(long)]
        perm: Option<PathBuf>,
    },
    /// Solve an SDPA sparse problem and print solution and metrics as JSON
    Solve {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = MethodArg::Dctc)]
        method: MethodArg,
        #[arg(long, default_value_t = 1e-9)]
        eps: f64,
        #[arg(long, value_enum, default_value_t = StepArg::Adaptive)]
        step: StepArg,
        #[arg(long)]
        max_iter: Option<usize>,
        #[arg(long, value_enum, default_value_t = NuArg::UnitSoc)]
        nu: NuArg,
        /// per-iteration JSON lines on stderr
        #[arg(long)]
        diag: bool,
        /// write the JSON here instead of stdout
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Maxcut,
    Maxkcut,
    Theta,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Ctc,
    Dctc,
    DctcAux,
}

#[derive(Clone, Copy, ValueEnum)]
enum StepArg {
    Short,
    Adaptive,
}

#[derive(Clone, Copy, ValueEnum)]
enum NuArg {
    UnitSoc,
    Standard,
}

/// Exit status with a message for stderr.
struct Fail(u8, String);

fn usage(msg: impl std::fmt::Display) -> Fail {
    Fail(2, msg.to_string())
}

fn solver(msg: impl std::fmt::Display) -> Fail {
    Fail(1, msg.to_string())
}

fn read_text(path: &Path) -> Result<String, Fail> {
    std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn read_graph(path: &Path) -> Result<Graph, Fail> {
    Graph::parse(&read_text(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn read_perm(path: &Path) -> Result<Vec<usize>, Fail> {
    read_text(path)?
        .split_whitespace()
        .map(|t| match t.parse::<usize>() {
            Ok(v) if v >= 1 => Ok(v - 1),
            _ => Err(usage(format!("{}: bad vertex id `{t}`", path.display()))),
        })
        .collect()
}

fn run(cli: Cli) -> Result<(), Fail> {
    match cli.cmd {
        Cmd::Generate { kind, graph, k, output } => {
            let g = read_graph(&graph)?;
            let p: Problem = match kind {
                Kind::Maxcut => maxcut(&g),
                Kind::Maxkcut => {
                    if k < 2 {
                        return Err(usage("--k must be at least 2"));
                    }
                    maxkcut(&g, k)
                }
                Kind::Theta => lovasz_theta(&g),
            };
            write_sdpa_file(&output, &p).map_err(solver)
        }
        Cmd::Decompose { graph, perm } => {
            let g = read_graph(&graph)?;
            let t0 = Instant::now();
            let td = match perm {
                Some(path) => decompose_with(&g, &read_perm(&path)?).map_err(usage)?,
                None => decompose(&g),
            };
            let secs = t0.elapsed().as_secs_f64();
            println!(
                "|V|={} |E|={} ell={} omega={} time_s={secs:.6}",
                g.vertex_count(),
                g.edge_count(),
                td.len(),
                td.omega()
            );
            Ok(())
        }
        Cmd::Solve {
            input,
            method,
            eps,
            step,
            max_iter,
            nu,
            diag,
            output,
        } => {
            let p: Problem = read_sdpa_file(&input).map_err(usage)?;
            let mut solver_opts = match step {
                StepArg::Short => SolverOptions::default(),
                StepArg::Adaptive => SolverOptions::adaptive(),
            };
            solver_opts.step = match step {
                StepArg::Short => StepRule::Short,
                StepArg::Adaptive => StepRule::Adaptive,
            };
            solver_opts.eps = eps;
            if let Some(m) = max_iter {
                solver_opts.max_iter = m;
            }
            solver_opts.nu = match nu {
                NuArg::UnitSoc => NuConvention::UnitSoc,
                NuArg::Standard => NuConvention::Standard,
            };
            let opts = PipelineOptions {
                method: match method {
                    MethodArg::Ctc => Method::Ctc,
                    MethodArg::Dctc => Method::Dctc,
                    MethodArg::DctcAux => Method::DctcAux,
                },
                solver: solver_opts,
                perm: None,
            };
            let sol = ctcsdp::pipeline::solve_observed(&p, &opts, |r, _| {
                if diag {
                    eprintln!("{}", serde_json::to_string(r).expect("record serializes"));
                }
            })
            .map_err(solver)?;
            let u: Vec<&[f64]> = (0..sol.u.rows()).map(|i| sol.u.row(i)).collect();
            let doc = json!({
                "objective": sol.objective,
                "method": opts.method,
                "metrics": sol.metrics,
                "y": sol.y,
                "u": u,
            });
            let text = serde_json::to_string_pretty(&doc).expect("solution serializes");
            match output {
                Some(path) => std::fs::write(&path, text + "\n")
                    .map_err(|e| solver(format!("{}: {e}", path.display()))),
                None => {
                    println!("{text}");
                    Ok(())
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Fail(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use p2pq::agent::{run_with, AgentOptions};
use p2pq::answers::{answer_traced, answer_with, AnswerReport, TraceEntry};
use p2pq::oracle::{compare, weak_closure};
use p2pq::{load_network, rew, ConjunctiveQuery, Error, Network, TupleSet};

#[derive(Parser)]
#[command(
    name = "p2pq",
    version,
    about = "Query answering over peer networks linked by view mappings"
)]
struct Cli {
    /// Maximum number of agent steps before giving up.
    #[arg(long, global = true, env = "P2PQ_STEP_CEILING", default_value_t = p2pq::agent::DEFAULT_STEP_CEILING)]
    step_ceiling: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a network file and report its size.
    Validate { file: PathBuf },
    /// Derive every equivalent query across the network and union their answers.
    Answer {
        file: PathBuf,
        #[arg(long)]
        peer: String,
        #[arg(long)]
        query: String,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
        /// Include the agent's step log.
        #[arg(long)]
        trace: bool,
    },
    /// Rewrite a query one step, from a peer to a neighbor.
    Rewrite {
        file: PathBuf,
        #[arg(long)]
        peer: String,
        #[arg(long)]
        target: String,
        #[arg(long)]
        query: String,
    },
    /// Compare the agent's fixpoint with the brute-force closure.
    OracleCheck {
        file: PathBuf,
        #[arg(long)]
        peer: String,
        #[arg(long)]
        query: String,
        /// Drop one derived query before comparing (testing only).
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Json,
}

enum Failure {
    Usage(String),
    Domain(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_parse() {
            Failure::Usage(e.to_string())
        } else {
            Failure::Domain(e.to_string())
        }
    }
}

fn load(file: &PathBuf) -> Result<Network, Failure> {
    let text = std::fs::read_to_string(file)
        .map_err(|e| Failure::Domain(format!("cannot read {}: {e}", file.display())))?;
    load_network(&text).map_err(|e| match e {
        Error::Parse { .. } => Failure::Usage(format!("{}: {e}", file.display())),
        other => Failure::Domain(format!("{}: {other}", file.display())),
    })
}

fn parse_query(text: &str) -> Result<ConjunctiveQuery, Failure> {
    ConjunctiveQuery::parse(text).map_err(|e| match e {
        Error::Parse { .. } => Failure::Usage(format!("--query: {e}")),
        other => Failure::Domain(format!("--query: {other}")),
    })
}

fn render_tuples(out: &mut String, tuples: &TupleSet) {
    if tuples.arity == 0 {
        let _ = writeln!(out, "  {}", !tuples.is_empty());
        return;
    }
    for row in &tuples.rows {
        let cells: Vec<String> = row.iter().map(ToString::to_string).collect();
        let _ = writeln!(out, "  {}", cells.join(", "));
    }
}

fn render_trace(out: &mut String, trace: &[TraceEntry]) {
    let _ = writeln!(out, "trace:");
    for entry in trace {
        let _ = writeln!(
            out,
            "  step {} at {}: {}",
            entry.step, entry.peer, entry.query
        );
        for (peer, q) in &entry.appended {
            let _ = writeln!(out, "    -> {peer}: {q}");
        }
    }
}

fn render_table(report: &AnswerReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "origin: {}", report.origin);
    let _ = writeln!(out, "query: {}", report.original_query);
    let total: usize = report.per_peer.values().map(|p| p.queries.len()).sum();
    let _ = writeln!(out, "derived queries ({total}):");
    for (peer, answers) in &report.per_peer {
        for q in &answers.queries {
            let _ = writeln!(out, "  {peer}: {q}");
        }
    }
    for (peer, answers) in &report.per_peer {
        let _ = writeln!(out, "answers at {peer} ({}):", answers.tuples.len());
        render_tuples(&mut out, &answers.tuples);
    }
    let _ = writeln!(out, "union ({}):", report.union.len());
    render_tuples(&mut out, &report.union);
    if let Some(trace) = &report.trace {
        render_trace(&mut out, trace);
    }
    out
}

fn execute(cli: Cli) -> Result<String, Failure> {
    let opts = AgentOptions {
        step_ceiling: cli.step_ceiling,
        ..Default::default()
    };
    match cli.command {
        Command::Validate { file } => {
            let net = load(&file)?;
            let views: usize = net.peers.iter().map(|p| p.views.len()).sum();
            let pairs: usize = net.interfaces.iter().map(|g| g.pairs.len()).sum();
            Ok(format!(
                "valid: {} peers, {views} views, {pairs} mappings in {} interface groups\n",
                net.peers.len(),
                net.interfaces.len()
            ))
        }
        Command::Answer {
            file,
            peer,
            query,
            format,
            trace,
        } => {
            let net = load(&file)?;
            let q = parse_query(&query)?;
            let report = if trace {
                answer_traced(&net, &peer, &q, &opts)?
            } else {
                answer_with(&net, &peer, &q, &opts)?
            };
            Ok(match format {
                Format::Table => render_table(&report),
                Format::Json => {
                    serde_json::to_string_pretty(&report).expect("report serializes") + "\n"
                }
            })
        }
        Command::Rewrite {
            file,
            peer,
            target,
            query,
        } => {
            let net = load(&file)?;
            let q = parse_query(&query)?;
            net.peer(&peer)?.check_query(&q)?;
            Ok(format!("{}\n", rew(&q, &net, &peer, &target)?))
        }
        Command::OracleCheck {
            file,
            peer,
            query,
            inject_fault,
        } => {
            let net = load(&file)?;
            let q = parse_query(&query)?;
            let mut agent = run_with(&net, &peer, &q, &opts)?;
            if inject_fault {
                let victim = agent.per_peer_queries.values_mut().next_back();
                if let Some(qs) = victim {
                    qs.pop_last();
                }
            }
            let closure = weak_closure(&net, &peer, &q)?;
            let report = compare(&agent, &closure);
            if report.holds {
                Ok(format!("{report} ({} queries)\n", agent.total()))
            } else {
                Err(Failure::Domain(report.to_string()))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(Failure::Domain(msg)) => {
            eprintln!("error: {}", msg.trim_end());
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {}", msg.trim_end());
            ExitCode::from(2)
        }
    }
}

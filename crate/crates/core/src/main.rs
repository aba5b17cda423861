use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use lazyid::format::parse_model;
use lazyid::lazy::LazyOptions;
use lazyid::report::{compare, render_comparison, render_json, render_text, run_engine, Engine};
use lazyid::{Error, Evidence, InfluenceDiagram};

#[derive(Parser)]
#[command(name = "lazyid", version, about = "Solve discrete influence diagrams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    Lazy,
    Hugin,
    Ve,
    Brute,
}

impl From<EngineArg> for Engine {
    fn from(e: EngineArg) -> Engine {
        match e {
            EngineArg::Lazy => Engine::Lazy,
            EngineArg::Hugin => Engine::Hugin,
            EngineArg::Ve => Engine::Ve,
            EngineArg::Brute => Engine::Brute,
        }
    }
}

#[derive(clap::Args)]
struct Query {
    /// Model file.
    file: PathBuf,
    /// Observation `VAR=state` on a variable known before the first decision.
    #[arg(long = "evidence", value_name = "VAR=state")]
    evidence: Vec<String>,
    /// Keep irrelevant and barren probability potentials (lazy engine).
    #[arg(long)]
    no_prune: bool,
    /// Perform every division as soon as it is introduced (lazy engine).
    #[arg(long)]
    force_divide: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve with one engine.
    Solve {
        #[command(flatten)]
        query: Query,
        #[arg(long, value_enum, default_value = "lazy")]
        engine: EngineArg,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
        /// Print the strong junction tree.
        #[arg(long)]
        dump_tree: bool,
    },
    /// Run every engine and compare expected utilities and operation counts.
    Compare {
        #[command(flatten)]
        query: Query,
    },
}

/// Failure with the process exit status it maps to.
struct Failure(u8, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(if e.is_model_error() { 2 } else { 1 }, e.to_string())
    }
}

fn load(q: &Query) -> Result<(InfluenceDiagram, Evidence, LazyOptions), Failure> {
    let text = std::fs::read_to_string(&q.file)
        .map_err(|e| Failure(1, format!("cannot read {}: {e}", q.file.display())))?;
    let id = parse_model(&text).map_err(|e| Failure(2, format!("{}: {e}", q.file.display())))?;
    let mut pairs = Vec::with_capacity(q.evidence.len());
    for item in &q.evidence {
        let (var, state) = item
            .split_once('=')
            .ok_or_else(|| Failure(2, format!("evidence `{item}` is not of the form VAR=state")))?;
        pairs.push((var.trim(), state.trim()));
    }
    let ev = id.evidence(&pairs)?;
    let opts = LazyOptions {
        prune: !q.no_prune,
        force_divide: q.force_divide,
        ..Default::default()
    };
    Ok((id, ev, opts))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Solve {
            query,
            engine,
            json,
            dump_tree,
        } => {
            let (id, ev, opts) = load(&query)?;
            let report = run_engine(&id, &ev, engine.into(), opts)?;
            if dump_tree {
                if let Some(t) = &report.tree {
                    print!("{}", t.dump(&id));
                }
            }
            if json {
                println!("{}", render_json(&report));
            } else {
                print!("{}", render_text(&report));
            }
            Ok(())
        }
        Command::Compare { query } => {
            let (id, ev, opts) = load(&query)?;
            let c = compare(&id, &ev, opts)?;
            print!("{}", render_comparison(&c));
            if c.agrees() {
                Ok(())
            } else {
                Err(Failure(3, format!("engines disagree by {:e}", c.max_disagreement)))
            }
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

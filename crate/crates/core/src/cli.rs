//! The `dbnet` command line: `validate`, `simulate` and `explore`.

use std::ffi::OsString;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::control::DbNet;
use crate::dsl::{self, NetDocument};
use crate::explore::{explore, Goal, Verdict};
use crate::semantics::{Bounds, Snapshot};
use crate::sim::{simulate, Chooser, EndReason, InteractiveChooser, RandomChooser, SimError, SimOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;

const DEFAULT_STEPS: u64 = 100;
const DEFAULT_MAX_STATES: u64 = 10_000;

#[derive(Parser, Debug)]
#[command(name = "dbnet", version, about = "Validate, simulate and explore db-net scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Policy {
    Random,
    Interactive,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse and check a scenario.
    Validate {
        file: PathBuf,
        /// Print the parsed document as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Run the net and write a JSON-lines trace.
    Simulate {
        file: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        steps: Option<u64>,
        #[arg(long, value_enum, default_value_t = Policy::Random)]
        policy: Policy,
        /// Trace file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Final database file; defaults to the trace path with extension `final.facts`.
        #[arg(long)]
        final_db: Option<PathBuf>,
        /// Keep fresh values distinct from every value seen earlier in the run.
        #[arg(long)]
        strict_fresh: bool,
    },
    /// Build the bounded state space and check a reachability goal.
    Explore {
        file: PathBuf,
        #[arg(long)]
        max_states: Option<u64>,
        #[arg(long)]
        max_depth: Option<u64>,
        /// Closed query over the database, e.g. "exists t:int . Log(t, \"ann\", \"bug\")".
        #[arg(long)]
        goal: Option<String>,
        /// Token-count condition such as "marking(q) >= 1"; repeatable.
        #[arg(long)]
        marking: Vec<String>,
        #[arg(long)]
        workers: Option<u64>,
        /// Write the summary and the full state space as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Whether diagnostics use ANSI colors: `DBNET_COLOR=1` forces them on,
/// `DBNET_COLOR=0` off, otherwise `default` decides.
pub fn color_enabled(default: bool) -> bool {
    match std::env::var("DBNET_COLOR").as_deref() {
        Ok("1") => true,
        Ok("0") => false,
        _ => default,
    }
}

pub struct Streams<'a> {
    pub stdin: &'a mut dyn BufRead,
    pub stdout: &'a mut dyn Write,
    pub stderr: &'a mut dyn Write,
    pub color: bool,
}

struct Failure(i32);

type CmdResult = Result<(), Failure>;

fn fail(io: &mut Streams<'_>, code: i32, msg: impl std::fmt::Display) -> Failure {
    let _ = writeln!(io.stderr, "error: {msg}");
    Failure(code)
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I, io: &mut Streams<'_>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let rendered = e.render();
            return if e.use_stderr() {
                let _ = write!(io.stderr, "{rendered}");
                EXIT_CONFIG
            } else {
                let _ = write!(io.stdout, "{rendered}");
                EXIT_OK
            };
        }
    };
    let result = match cli.command {
        Command::Validate { file, json } => cmd_validate(&file, json, io),
        Command::Simulate { file, seed, steps, policy, out, final_db, strict_fresh } => {
            cmd_simulate(&file, seed, steps, policy, out.as_deref(), final_db.as_deref(), strict_fresh, io)
        }
        Command::Explore { file, max_states, max_depth, goal, marking, workers, out } => {
            cmd_explore(&file, max_states, max_depth, goal.as_deref(), &marking, workers, out.as_deref(), io)
        }
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure(code)) => code,
    }
}

struct Loaded {
    doc: NetDocument,
    net: DbNet,
    s0: Snapshot,
}

fn load(path: &Path, io: &mut Streams<'_>) -> Result<Loaded, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| fail(io, EXIT_IO, format!("{}: {e}", path.display())))?;
    let name = path.display().to_string();
    let (doc, map) = match dsl::parse_with_map(&text) {
        Ok(x) => x,
        Err(diags) => {
            let _ = write!(io.stderr, "{}", diags.render(&text, &name, io.color));
            return Err(Failure(EXIT_INVALID));
        }
    };
    let diags = dsl::check_document(&doc, &map);
    for d in &diags {
        let _ = write!(io.stderr, "{}", d.render(&text, &name, io.color));
    }
    if diags.iter().any(|d| d.is_error()) {
        return Err(Failure(EXIT_INVALID));
    }
    let (net, s0) = dsl::load_snapshot(&doc).map_err(|e| fail(io, EXIT_INVALID, e))?;
    Ok(Loaded { doc, net, s0 })
}

fn cmd_validate(path: &Path, json: bool, io: &mut Streams<'_>) -> CmdResult {
    let loaded = load(path, io)?;
    if json {
        let text = serde_json::to_string_pretty(&loaded.doc.to_json()).expect("JSON");
        let _ = writeln!(io.stdout, "{text}");
    } else {
        let net = &loaded.net;
        let _ = writeln!(
            io.stdout,
            "{}: ok ({} relations, {} constraints, {} queries, {} actions, {} places, {} transitions)",
            path.display(),
            net.persistence.schema.len(),
            net.persistence.constraints.len(),
            net.logic.queries.len(),
            net.logic.actions.len(),
            net.control.places.len(),
            net.control.transitions.len()
        );
    }
    Ok(())
}

fn write_file(path: &Path, contents: &str, io: &mut Streams<'_>) -> CmdResult {
    std::fs::write(path, contents).map_err(|e| fail(io, EXIT_IO, format!("{}: {e}", path.display())))
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    path: &Path,
    seed: Option<u64>,
    steps: Option<u64>,
    policy: Policy,
    out: Option<&Path>,
    final_db: Option<&Path>,
    strict_fresh: bool,
    io: &mut Streams<'_>,
) -> CmdResult {
    let Loaded { doc, net, s0 } = load(path, io)?;
    let steps = steps.or(doc.config.steps).unwrap_or(DEFAULT_STEPS);
    let options = SimOptions { steps, strict_fresh };
    let result = match policy {
        Policy::Random => {
            let Some(seed) = seed.or(doc.config.seed) else {
                return Err(fail(io, EXIT_CONFIG, "the random policy needs a seed (--seed or `seed` in the config section)"));
            };
            let mut chooser = RandomChooser::new(seed);
            simulate(&net, &s0, &doc.domains, options, &mut chooser)
        }
        Policy::Interactive => {
            let mut chooser = InteractiveChooser::new(&mut *io.stdin, &mut *io.stderr);
            simulate(&net, &s0, &doc.domains, options, &mut chooser as &mut dyn Chooser)
        }
    };
    let result = match result {
        Ok(r) => r,
        Err(SimError::Semantics(e)) => return Err(fail(io, EXIT_CONFIG, e)),
        Err(SimError::Io(e)) => return Err(fail(io, EXIT_IO, e)),
    };
    let trace = result.to_jsonl();
    match out {
        Some(p) => write_file(p, &trace, io)?,
        None => {
            let _ = write!(io.stdout, "{trace}");
        }
    }
    let db_path = final_db.map(Path::to_path_buf).or_else(|| out.map(|p| p.with_extension("final.facts")));
    if let Some(p) = db_path {
        write_file(&p, &result.final_state().instance.to_text(), io)?;
    }
    if result.end == EndReason::Deadlock {
        let _ = writeln!(io.stderr, "note: deadlock after {} step(s): no transition is enabled", result.records.len());
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_explore(
    path: &Path,
    max_states: Option<u64>,
    max_depth: Option<u64>,
    goal: Option<&str>,
    marking: &[String],
    workers: Option<u64>,
    out: Option<&Path>,
    io: &mut Streams<'_>,
) -> CmdResult {
    let Loaded { doc, net, s0 } = load(path, io)?;
    let workers = workers.or(doc.config.workers).unwrap_or(1);
    if workers == 0 {
        return Err(fail(io, EXIT_CONFIG, "--workers must be at least 1"));
    }
    let bounds = Bounds {
        max_states: Some(max_states.or(doc.config.max_states).unwrap_or(DEFAULT_MAX_STATES) as usize),
        max_depth: max_depth.or(doc.config.max_depth).map(|d| d as usize),
    };
    if bounds.max_states == Some(0) {
        return Err(fail(io, EXIT_CONFIG, "--max-states must be at least 1"));
    }
    let goal = if goal.is_some() || !marking.is_empty() {
        Some(Goal::parse(&net, goal, marking).map_err(|e| fail(io, EXIT_CONFIG, e))?)
    } else {
        None
    };
    let ex = explore(&net, s0, &doc.domains, bounds, workers as usize, goal).map_err(|e| fail(io, EXIT_CONFIG, e))?;

    let lts = &ex.lts;
    let w = &mut *io.stdout;
    let _ = writeln!(w, "states: {}", lts.states.len());
    let _ = writeln!(w, "edges: {}", lts.edges.len());
    let truncation = match (lts.truncated_states, lts.truncated_depth) {
        (false, false) => "no".to_string(),
        (s, d) => {
            let mut why = Vec::new();
            if s {
                why.push("state budget");
            }
            if d {
                why.push("depth bound");
            }
            format!("yes ({})", why.join(", "))
        }
    };
    let _ = writeln!(w, "truncated: {truncation}");
    let _ = writeln!(w, "max depth: {}", ex.monitors.max_depth);
    let _ = writeln!(w, "max instance size: {}", ex.monitors.max_instance_size);
    let per_place: Vec<String> = ex.monitors.max_tokens_per_place.iter().map(|(p, n)| format!("{p}={n}")).collect();
    let _ = writeln!(w, "max tokens per place: {}", per_place.join(", "));
    if let (Some(g), Some(v)) = (&ex.goal, ex.verdict) {
        let _ = writeln!(w, "goal: {g}");
        match v {
            Verdict::Reachable => {
                let _ = writeln!(w, "verdict: reachable (witness length {})", ex.witness.len());
                for (i, &e) in ex.witness.iter().enumerate() {
                    let e = &lts.edges[e];
                    let binding: Vec<String> = e.firing.binding.iter().map(|(k, v)| format!("{}={v}", k.name)).collect();
                    let status = if e.committed { "" } else { " (rolled back)" };
                    let _ = writeln!(w, "  {}. {} {{{}}}{status}", i + 1, e.firing.transition, binding.join(", "));
                }
            }
            _ => {
                let _ = writeln!(w, "verdict: {}", v.as_str());
            }
        }
    }
    if lts.is_truncated() {
        let _ = writeln!(io.stderr, "warning: exploration stopped at its bounds; results cover the explored part only");
    }
    if let Some(p) = out {
        let text = serde_json::to_string_pretty(&ex.to_json()).expect("JSON");
        write_file(p, &text, io)?;
    }
    Ok(())
}

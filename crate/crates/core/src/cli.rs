//! Command-line front end. [`main_with`] takes explicit streams so the
//! binary stays a one-liner and the commands can be driven from tests.

use std::ffi::OsString;
use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value as Json};

use crate::checks::{self, CheckOptions};
use crate::creol::{self, Creol};
use crate::engine::{explore, Advance, Language, Scheduler, SchedulerKind, Session, StateKind, Status, TraceEntry, UpgradeSchedule, DEFAULT_FUEL};
use crate::proteus::{self, Proteus};

pub const EXIT_INPUT: i32 = 5;
const EXIT_CHECK_FAILED: i32 = 1;

#[derive(Debug, Parser)]
#[command(name = "dsos", version, about = "Run, explore and check programs under a modular, upgradeable operational semantics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run to completion and print the final configuration.
    Run(RunArgs),
    /// Run and print every step, jump and injection.
    Trace(RunArgs),
    /// Enumerate every reachable configuration.
    Explore(ExploreArgs),
    /// Run the built-in property suites.
    Check(CheckArgs),
    /// Step interactively, injecting upgrade data between steps.
    Repl(RunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Lang {
    Proteus,
    Creol,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    Json,
    #[default]
    Pretty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum SchedulerArg {
    #[default]
    Seeded,
    RoundRobin,
    First,
}

impl From<SchedulerArg> for SchedulerKind {
    fn from(s: SchedulerArg) -> Self {
        match s {
            SchedulerArg::Seeded => SchedulerKind::Seeded,
            SchedulerArg::RoundRobin => SchedulerKind::RoundRobin,
            SchedulerArg::First => SchedulerKind::First,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ProgramArgs {
    /// Program file (`.prot` or `.creol`).
    pub program: PathBuf,
    /// Language, when the extension does not tell.
    #[arg(long, value_enum)]
    pub lang: Option<Lang>,
    /// Also offer simultaneous local steps of several objects.
    #[arg(long)]
    pub non_int: bool,
    /// An upgrade empties the whole upgrade map of its kind.
    #[arg(long)]
    pub consume_all: bool,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub program: ProgramArgs,
    /// Upgrade schedule (JSON).
    #[arg(long)]
    pub schedule: Option<PathBuf>,
    /// Scheduler seed; `DSOS_SEED` takes precedence.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_FUEL)]
    pub fuel: u64,
    #[arg(long, value_enum, default_value_t)]
    pub scheduler: SchedulerArg,
}

#[derive(Debug, Clone, Args)]
pub struct ExploreArgs {
    #[command(flatten)]
    pub program: ProgramArgs,
    #[arg(long, default_value_t = 1000)]
    pub depth: usize,
    #[arg(long, default_value_t = 100_000)]
    pub max_states: usize,
}

#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    /// Run a single suite.
    #[arg(long, value_parser = checks::SUITES)]
    pub only: Option<String>,
    /// Replace `E_v` by a broken endofunctor (negative control).
    #[arg(long)]
    pub inject_mutant: bool,
    /// Corpus directory with `proteus/` and `creol/` subdirectories.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
}

/// Streams and environment of one invocation.
pub struct Io<'a> {
    pub input: &'a mut dyn BufRead,
    pub out: &'a mut dyn Write,
    pub err: &'a mut dyn Write,
    /// Value of `DSOS_SEED`, if set.
    pub env_seed: Option<String>,
}

pub fn main_with<I, T>(args: I, io: &mut Io) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => execute(cli, io),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { 0 };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(io.err, "{text}");
            } else {
                let _ = write!(io.out, "{text}");
            }
            code
        }
    }
}

pub fn execute(cli: Cli, io: &mut Io) -> i32 {
    let result = match cli.command {
        Command::Run(a) => with_program(&a.program, io, |p, io| p.run(&a, io, false)),
        Command::Trace(a) => with_program(&a.program, io, |p, io| p.run(&a, io, true)),
        Command::Repl(a) => with_program(&a.program, io, |p, io| p.repl(&a, io)),
        Command::Explore(a) => with_program(&a.program, io, |p, io| p.explore(&a, io)),
        Command::Check(a) => check(&a, io),
    };
    match result {
        Ok(code) => code,
        Err(msg) => {
            let _ = writeln!(io.err, "error: {msg}");
            EXIT_INPUT
        }
    }
}

enum Program {
    Proteus(Proteus, crate::syntax::Term),
    Creol(Creol, crate::syntax::SystemTerm),
}

fn detect(path: &Path, flag: Option<Lang>) -> Result<Lang, String> {
    if let Some(l) = flag {
        return Ok(l);
    }
    match path.extension().and_then(|e| e.to_str()) {
        Some("prot") => Ok(Lang::Proteus),
        Some("creol") => Ok(Lang::Creol),
        _ => Err(format!("cannot tell the language of {}; pass --lang", path.display())),
    }
}

fn load(args: &ProgramArgs, err: &mut dyn Write) -> Result<Program, String> {
    let src = fs::read_to_string(&args.program).map_err(|e| format!("{}: {e}", args.program.display()))?;
    let at = |e: String| format!("{}: {e}", args.program.display());
    Ok(match detect(&args.program, args.lang)? {
        Lang::Proteus => Program::Proteus(Proteus::new(args.consume_all), proteus::parse(&src).map_err(|e| at(e.to_string()))?),
        Lang::Creol => {
            let parsed = creol::parse(&src).map_err(|e| at(e.to_string()))?;
            for w in &parsed.warnings {
                let _ = writeln!(err, "warning: {w}");
            }
            Program::Creol(Creol::new(args.non_int), parsed.system)
        }
    })
}

fn with_program(args: &ProgramArgs, io: &mut Io, f: impl FnOnce(&Program, &mut Io) -> Result<i32, String>) -> Result<i32, String> {
    let p = load(args, io.err)?;
    f(&p, io)
}

impl Program {
    fn run(&self, a: &RunArgs, io: &mut Io, full: bool) -> Result<i32, String> {
        match self {
            Program::Proteus(l, t) => run_program(l, t.clone(), a, io, full),
            Program::Creol(l, t) => run_program(l, t.clone(), a, io, full),
        }
    }

    fn repl(&self, a: &RunArgs, io: &mut Io) -> Result<i32, String> {
        match self {
            Program::Proteus(l, t) => repl(l, t.clone(), a, io),
            Program::Creol(l, t) => repl(l, t.clone(), a, io),
        }
    }

    fn explore(&self, a: &ExploreArgs, io: &mut Io) -> Result<i32, String> {
        match self {
            Program::Proteus(l, t) => explore_program(l, t.clone(), a, io),
            Program::Creol(l, t) => explore_program(l, t.clone(), a, io),
        }
    }
}

fn seed(flag: u64, env: &Option<String>) -> Result<u64, String> {
    match env {
        Some(s) => s.trim().parse().map_err(|_| format!("DSOS_SEED must be a natural number, got `{s}`")),
        None => Ok(flag),
    }
}

fn schedule<L: Language>(lang: &L, path: &Option<PathBuf>) -> Result<UpgradeSchedule<L::Datum>, String> {
    let Some(p) = path else { return Ok(UpgradeSchedule::empty()) };
    let text = fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
    let json: Json = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", p.display()))?;
    UpgradeSchedule::from_json(lang, &json).map_err(|e| format!("{}: {e}", p.display()))
}

fn session<'a, L: Language>(lang: &'a L, term: L::Term, a: &RunArgs, io: &Io) -> Result<Session<'a, L>, String> {
    let sched = schedule(lang, &a.schedule)?;
    let scheduler = Scheduler::new(a.scheduler.into(), seed(a.seed, &io.env_seed)?);
    Ok(Session::new(lang, term, sched, scheduler))
}

fn status_json(status: &Status) -> Json {
    let stuck = match status {
        Status::Stuck(r) => r.clone(),
        _ => Vec::new(),
    };
    json!({"status": status.as_str(), "exit": status.exit_code(), "stuck": stuck})
}

fn summary<L: Language>(s: &Session<L>, status: &Status) -> Json {
    let mut j = status_json(status);
    j["kind"] = json!("result");
    j["steps"] = json!(s.step_count());
    j["term"] = json!(s.term().to_string());
    j["snapshot"] = s.snapshot().to_json();
    j
}

fn run_program<L: Language>(lang: &L, term: L::Term, a: &RunArgs, io: &mut Io, full: bool) -> Result<i32, String> {
    let mut s = session(lang, term, a, io)?;
    let status = s.run(a.fuel).map_err(|e| e.to_string())?;
    let out = &mut io.out;
    let fmt = a.program.format;
    let w = |e: std::io::Error| e.to_string();
    if full {
        match fmt {
            Format::Json => write!(out, "{}", s.trace().to_jsonl()).map_err(w)?,
            Format::Pretty => {
                writeln!(out, "{}", s.trace().initial_term).map_err(w)?;
                for e in &s.trace().entries {
                    writeln!(out, "{}", e.pretty()).map_err(w)?;
                }
            }
        }
    }
    match fmt {
        Format::Json => writeln!(out, "{}", summary(&s, &status)).map_err(w)?,
        Format::Pretty => {
            writeln!(out, "status: {} after {} transitions", status.as_str(), s.step_count()).map_err(w)?;
            if let Status::Stuck(reasons) = &status {
                for r in reasons {
                    writeln!(out, "  stuck: {r}").map_err(w)?;
                }
            }
            writeln!(out, "term: {}", s.term()).map_err(w)?;
            let snap = serde_json::to_string_pretty(&s.snapshot().to_json()).map_err(|e| e.to_string())?;
            writeln!(out, "snapshot: {snap}").map_err(w)?;
        }
    }
    Ok(status.exit_code())
}

fn explore_program<L: Language>(lang: &L, term: L::Term, a: &ExploreArgs, io: &mut Io) -> Result<i32, String> {
    let snap = lang.initial_snapshot(&term);
    let g = match explore(lang, term, snap, a.depth, a.max_states) {
        Ok(g) => g,
        Err(e) => {
            let _ = writeln!(io.err, "error: {e}");
            return Ok(4);
        }
    };
    let kind = |k: StateKind| match k {
        StateKind::Internal => "internal",
        StateKind::Terminated => "terminated",
        StateKind::Blocked => "blocked",
        StateKind::Stuck => "stuck",
    };
    let count = |k| g.of_kind(k).len();
    let w = |e: std::io::Error| e.to_string();
    match a.program.format {
        Format::Json => {
            for (i, (t, s)) in g.states.iter().enumerate() {
                let line = json!({"kind": "state", "id": i, "class": kind(g.kinds[i]), "term": t.to_string(), "snapshot": s.to_json()});
                writeln!(io.out, "{line}").map_err(w)?;
            }
            for e in &g.edges {
                let label = match &e.label {
                    crate::engine::Label::Step(m) => m.to_json(),
                    crate::engine::Label::Jump(j) => json!({"jump": j.to_json()}),
                };
                let line = json!({"kind": "edge", "from": e.from, "to": e.to, "rule": e.rule, "actor": e.actor, "label": label});
                writeln!(io.out, "{line}").map_err(w)?;
            }
            let line = json!({
                "kind": "summary", "states": g.len(), "edges": g.edges.len(),
                "terminated": count(StateKind::Terminated), "blocked": count(StateKind::Blocked), "stuck": count(StateKind::Stuck),
            });
            writeln!(io.out, "{line}").map_err(w)?;
        }
        Format::Pretty => {
            writeln!(io.out, "{} states, {} edges", g.len(), g.edges.len()).map_err(w)?;
            for k in [StateKind::Terminated, StateKind::Blocked, StateKind::Stuck] {
                for i in g.of_kind(k) {
                    writeln!(io.out, "  {} #{i}: {}", kind(k), g.states[i].0).map_err(w)?;
                }
            }
        }
    }
    Ok(0)
}

fn check(a: &CheckArgs, io: &mut Io) -> Result<i32, String> {
    let opts = CheckOptions {
        corpus: a.corpus.clone().unwrap_or_else(checks::default_corpus),
        only: a.only.clone(),
        mutant: a.inject_mutant,
        seed: seed(a.seed, &io.env_seed)?,
    };
    let results = checks::run_checks(&opts)?;
    let w = |e: std::io::Error| e.to_string();
    let failed = results.iter().filter(|r| !r.passed).count();
    for r in &results {
        match a.format {
            Format::Json => writeln!(io.out, "{}", r.to_json()).map_err(w)?,
            Format::Pretty => {
                let mark = if r.passed { "PASS" } else { "FAIL" };
                writeln!(io.out, "{mark} {:<16} {} ({} checked)", r.suite, r.property, r.checked).map_err(w)?;
                if let Some(wit) = &r.witness {
                    writeln!(io.out, "     witness: {wit}").map_err(w)?;
                }
            }
        }
    }
    match a.format {
        Format::Json => writeln!(io.out, "{}", json!({"kind": "summary", "properties": results.len(), "failed": failed})).map_err(w)?,
        Format::Pretty => writeln!(io.out, "{} properties, {failed} failed", results.len()).map_err(w)?,
    }
    Ok(if failed == 0 { 0 } else { EXIT_CHECK_FAILED })
}

const REPL_HELP: &str = "commands: step [n] | enabled | inject <index> <json> | show <index|term|pools> | jump-log | quit";

fn repl<L: Language>(lang: &L, term: L::Term, a: &RunArgs, io: &mut Io) -> Result<i32, String> {
    let mut s = session(lang, term, a, io)?;
    let json_out = a.program.format == Format::Json;
    let mut last = Status::Blocked;
    let mut halted = false;
    let w = |e: std::io::Error| e.to_string();
    if !json_out {
        writeln!(io.out, "{}\n{}", s.term(), REPL_HELP).map_err(w)?;
    }
    let mut line = String::new();
    loop {
        if !json_out {
            write!(io.out, "> ").map_err(w)?;
            io.out.flush().map_err(w)?;
        }
        line.clear();
        if io.input.read_line(&mut line).map_err(w)? == 0 {
            break;
        }
        let (cmd, rest) = line.trim().split_once(' ').unwrap_or((line.trim(), ""));
        let rest = rest.trim();
        let reply: Result<Vec<Json>, String> = match cmd {
            "" => Ok(Vec::new()),
            "quit" | "exit" => break,
            "help" => Ok(vec![json!(REPL_HELP)]),
            "step" => {
                let n: u64 = if rest.is_empty() { 1 } else { rest.parse().map_err(|_| format!("`{rest}` is not a number"))? };
                let from = s.trace().entries.len();
                let mut msgs = Vec::new();
                for _ in 0..n {
                    match s.advance().map_err(|e| e.to_string()) {
                        Ok(Advance::Halted(st)) => {
                            msgs.push(status_json(&st));
                            last = st;
                            halted = true;
                            break;
                        }
                        Ok(_) => {}
                        Err(e) => {
                            msgs.push(json!({"error": e}));
                            break;
                        }
                    }
                }
                let mut entries: Vec<Json> = s.trace().entries[from..].iter().map(|e| entry_reply(e, json_out)).collect();
                entries.extend(msgs);
                Ok(entries)
            }
            "enabled" => {
                let (ts, stuck) = s.enabled();
                let mut out: Vec<Json> = ts
                    .iter()
                    .enumerate()
                    .map(|(i, t)| {
                        json!({"n": i, "actor": t.actor, "rule": t.rule, "label": t.label.pretty(), "next": t.next.to_string()})
                    })
                    .collect();
                out.extend(stuck.into_iter().map(|r| json!({"stuck": r})));
                Ok(out)
            }
            "inject" => match rest.split_once(' ') {
                Some((idx, payload)) => serde_json::from_str::<Json>(payload)
                    .map_err(|e| format!("payload is not JSON: {e}"))
                    .and_then(|j| s.inject_json(idx, &j).map_err(|e| e.to_string()))
                    .map(|_| vec![json!({"injected": idx})]),
                None => Err("usage: inject <index> <json>".into()),
            },
            "show" => match rest {
                "term" => Ok(vec![json!(s.term().to_string())]),
                "pools" => s.snapshot().get(creol::M).map(|o| vec![o.to_json()]).ok_or_else(|| "no message pools in this language".into()),
                "" => Ok(vec![s.snapshot().to_json()]),
                idx => s.snapshot().get(idx).map(|o| vec![o.to_json()]).ok_or_else(|| format!("no component `{idx}`")),
            },
            "jump-log" => Ok(s
                .trace()
                .entries
                .iter()
                .filter(|e| matches!(e, TraceEntry::Jump { .. }))
                .map(|e| entry_reply(e, json_out))
                .collect()),
            other => Err(format!("unknown command `{other}`; {REPL_HELP}")),
        };
        match reply {
            Ok(lines) => {
                for l in lines {
                    match (&l, json_out) {
                        (Json::String(text), false) => writeln!(io.out, "{text}").map_err(w)?,
                        _ if json_out => writeln!(io.out, "{l}").map_err(w)?,
                        _ => writeln!(io.out, "{}", serde_json::to_string_pretty(&l).unwrap_or_default()).map_err(w)?,
                    }
                }
            }
            Err(e) => {
                if json_out {
                    writeln!(io.out, "{}", json!({"error": e})).map_err(w)?;
                } else {
                    writeln!(io.err, "error: {e}").map_err(w)?;
                }
            }
        }
    }
    Ok(if halted { last.exit_code() } else { 0 })
}

fn entry_reply<V: crate::label::Datum>(e: &TraceEntry<V>, json_out: bool) -> Json {
    if json_out {
        e.to_json()
    } else {
        Json::String(e.pretty())
    }
}

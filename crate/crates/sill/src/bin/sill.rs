//! Command-line front end.
//!
//! Exit codes: 0 on success or a positive verdict, 1 on diagnostics or a
//! negative verdict, 2 on usage errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use sill::diag::check_source;
use sill::runtime::{initial_machine, run, trace_jsonl, Policy, RunOptions, RunStatus};
use sill::subtype::check_subtype;
use sill::synchro::{is_esync, is_ssync, meet, meet_types};
use sill::syntax::format::{format_file, type_to_string};
use sill::syntax::{parse, SourceFile};
use sill::types::{Constraint, Modality, SessionType, TypeDefEnv};

#[derive(Parser)]
#[command(name = "sill", version, about = "Shared and linear session types with subtyping")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Typecheck every definition and the system block.
    Check { file: PathBuf },
    /// Decide `a <= b`; prints the failing path on refusal.
    Sub { file: PathBuf, a: String, b: String },
    /// Decide whether `provider` is subsynchronizing with `client`.
    Ssync {
        file: PathBuf,
        provider: String,
        client: String,
        /// Constraint: `top`, `bot` or a shared type.
        #[arg(long, default_value = "top")]
        constraint: String,
    },
    /// Decide whether a type is equi-synchronizing.
    Esync { file: PathBuf, ty: String },
    /// Greatest lower bound of two constraints or types; prints `bot` if none.
    Meet { file: PathBuf, c: String, d: String },
    /// Run a process under the multiset-rewriting semantics.
    Run {
        file: PathBuf,
        /// Main process; defaults to the one in the system block.
        #[arg(long)]
        main: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        steps: usize,
        /// Typecheck the configuration after every step.
        #[arg(long)]
        monitor: bool,
        #[arg(long, value_enum, default_value_t = PolicyArg::Random)]
        policy: PolicyArg,
        /// Write the JSON-lines trace to this file.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Print the file in canonical form.
    Fmt { file: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Random,
    Fifo,
}

const ARG_TYPE: &str = "cli_arg_type";

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.cmd) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Diagnostics) => ExitCode::from(1),
        Err(Failure::Usage(m)) => {
            eprintln!("sill: {m}");
            ExitCode::from(2)
        }
    }
}

enum Failure {
    /// Already reported on stderr.
    Diagnostics,
    Usage(String),
}

fn read(file: &PathBuf) -> Result<String, Failure> {
    std::fs::read_to_string(file).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", file.display())))
}

/// Reads, parses and checks a file, reporting diagnostics on stderr.
fn load(file: &PathBuf) -> Result<(String, SourceFile), Failure> {
    let src = read(file)?;
    match check_source(&src) {
        Ok((sf, _)) => Ok((src, sf)),
        Err(ds) => {
            for d in ds {
                eprintln!("{}", d.render(&file.display().to_string(), &src));
            }
            Err(Failure::Diagnostics)
        }
    }
}

/// A type argument: a defined name or a type expression over the file's
/// definitions.
fn type_arg(src: &str, env: &TypeDefEnv, arg: &str) -> Result<SessionType, Failure> {
    let arg = arg.trim();
    if env.contains(arg) {
        return Ok(SessionType::Ref(arg.to_string()));
    }
    let extended = format!("{src}\ntype {ARG_TYPE} = {arg}\n");
    let sf = parse(&extended).map_err(|e| Failure::Usage(format!("cannot parse type `{arg}`: {e}")))?;
    Ok(sf.types.get(ARG_TYPE).expect("just declared").body.clone())
}

fn constraint_arg(src: &str, env: &TypeDefEnv, arg: &str) -> Result<Constraint, Failure> {
    match arg.trim() {
        "top" => Ok(Constraint::Top),
        "bot" => Ok(Constraint::Bot),
        n if env.get(n).is_some_and(|d| d.modality == Modality::Shared) => Ok(Constraint::Shared(n.to_string())),
        other => {
            type_arg(src, env, other)?;
            Err(Failure::Usage(format!("constraint `{other}` must be `top`, `bot` or the name of a shared type")))
        }
    }
}

/// Prints definitions that `after` adds to `before`.
fn print_new_defs(before: &TypeDefEnv, after: &TypeDefEnv) {
    for (n, d) in &after.defs {
        if !before.contains(n) {
            println!("type {n} = {}", type_to_string(&d.body));
        }
    }
}

fn dispatch(cmd: Cmd) -> Result<bool, Failure> {
    match cmd {
        Cmd::Check { file } => {
            load(&file)?;
            println!("ok");
            Ok(true)
        }
        Cmd::Sub { file, a, b } => {
            let (src, sf) = load(&file)?;
            let (ta, tb) = (type_arg(&src, &sf.types, &a)?, type_arg(&src, &sf.types, &b)?);
            match check_subtype(&sf.types, &ta, &tb) {
                Ok(()) => {
                    println!("true");
                    Ok(true)
                }
                Err(r) => {
                    println!("false");
                    println!("{r}");
                    Ok(false)
                }
            }
        }
        Cmd::Ssync { file, provider, client, constraint } => {
            let (src, sf) = load(&file)?;
            let a = type_arg(&src, &sf.types, &provider)?;
            let b = type_arg(&src, &sf.types, &client)?;
            let c = constraint_arg(&src, &sf.types, &constraint)?;
            match is_ssync(&sf.types, &a, &b, &c) {
                Ok(v) => {
                    println!("{v}");
                    Ok(v)
                }
                Err(e) => {
                    eprintln!("{}: {e}", file.display());
                    Err(Failure::Diagnostics)
                }
            }
        }
        Cmd::Esync { file, ty } => {
            let (src, sf) = load(&file)?;
            let t = type_arg(&src, &sf.types, &ty)?;
            let v = is_esync(&sf.types, &t);
            println!("{v}");
            Ok(v)
        }
        Cmd::Meet { file, c, d } => {
            let (src, sf) = load(&file)?;
            let env = &sf.types;
            let special = |s: &str| matches!(s.trim(), "top" | "bot");
            let shared = |s: &str| env.get(s.trim()).is_some_and(|d| d.modality == Modality::Shared);
            if special(&c) || special(&d) || (shared(&c) && shared(&d)) {
                let (k, out) = meet(env, &constraint_arg(&src, env, &c)?, &constraint_arg(&src, env, &d)?);
                println!("{k}");
                print_new_defs(env, &out);
                return Ok(k != Constraint::Bot);
            }
            let (ta, tb) = (type_arg(&src, env, &c)?, type_arg(&src, env, &d)?);
            match meet_types(env, &ta, &tb) {
                Some((t, out)) => {
                    println!("{}", type_to_string(&t));
                    print_new_defs(env, &out);
                    Ok(true)
                }
                None => {
                    println!("bot");
                    Ok(false)
                }
            }
        }
        Cmd::Run { file, main, seed, steps, monitor, policy, trace } => {
            let (_, sf) = load(&file)?;
            let main = match (main, &sf.system) {
                (Some(m), _) => m,
                (None, Some(sys)) => sys.main.clone(),
                (None, None) => return Err(Failure::Usage("no --main given and the file has no system block".into())),
            };
            let machine = match initial_machine(&sf.types, &sf.procs, sf.system.as_ref(), &main) {
                Ok(m) => m,
                Err(e) => {
                    eprintln!("{}: {e}", file.display());
                    return Err(Failure::Diagnostics);
                }
            };
            let policy = match policy {
                PolicyArg::Random => Policy::Random(seed),
                PolicyArg::Fifo => Policy::Fifo,
            };
            let res = run(machine, RunOptions { policy, max_steps: steps, monitor });
            if let Some(path) = trace {
                std::fs::write(&path, trace_jsonl(&res.trace))
                    .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))?;
            }
            println!("{} after {} steps", res.status, res.trace.len());
            Ok(matches!(res.status, RunStatus::AllPoised | RunStatus::StuckAcquire(_)))
        }
        Cmd::Fmt { file } => {
            let src = read(&file)?;
            match parse(&src) {
                Ok(sf) => {
                    print!("{}", format_file(&sf));
                    Ok(true)
                }
                Err(e) => {
                    eprintln!("{}", sill::diag::Diagnostic::from_parse(&e).render(&file.display().to_string(), &src));
                    Err(Failure::Diagnostics)
                }
            }
        }
    }
}

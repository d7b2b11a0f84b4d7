//! Initial configurations, scheduling and run classification.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::step::{Site, StepEvent};
use super::typing::{monitor_check, ConfigError, Violation};
use super::{Annotations, Config, LinearPred, Machine, SharedPred};
use crate::process::{Arg, Chan, FwdKind, Layer, Mode, Proc, ShiftOp, Signature};
use crate::subtype::{LinearCtx, SharedCtx};
use crate::syntax::Manifest;
use crate::typecheck::{elaborate_linear, elaborate_signature, TypeError};
use crate::types::{modality, Constraint, Modality, TypeDefEnv};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InitError {
    #[error("unknown process `{0}`")]
    UnknownMain(String),
    #[error("`{0}` offers a shared channel; the main process must be linear")]
    SharedMain(String),
    #[error("the definitions do not typecheck")]
    IllTyped(Vec<TypeError>),
    #[error("the system block does not typecheck: {0}")]
    Manifest(TypeError),
    #[error("the system block binds `{0}`, which is the main process's offered channel")]
    NameClash(String),
}

/// Name of the intermediate channel the main process is spawned on.
const MAIN_BINDER: &str = "%main";

/// Builds the configuration for running `main`: the manifest's spawns and
/// then `main` itself are executed by the ordinary rules from a root
/// process offering `main`'s channel.
pub fn initial_machine(
    env: &TypeDefEnv,
    sig: &Signature,
    manifest: Option<&Manifest>,
    main: &str,
) -> Result<Machine, InitError> {
    let (esig, errors) = elaborate_signature(env, sig);
    if !errors.is_empty() {
        return Err(InitError::IllTyped(errors));
    }
    let def = esig.get(main).ok_or_else(|| InitError::UnknownMain(main.to_string()))?;
    if modality(env, &def.offer_ty) == Modality::Shared {
        return Err(InitError::SharedMain(main.to_string()));
    }
    let root = def.offer.clone();
    let (spawns, main_args) = match manifest {
        Some(m) => (m.spawns.clone(), if m.main == main { m.main_args.clone() } else { vec![] }),
        None => (vec![], vec![]),
    };
    if let Some(s) = spawns.iter().find(|s| s.binder == root) {
        return Err(InitError::NameClash(s.binder.clone()));
    }
    let args = |xs: &[String]| xs.iter().map(|c| Arg { chan: c.clone(), mode: Mode::Unknown }).collect::<Vec<_>>();
    let mut term = Proc::Spawn {
        binder: MAIN_BINDER.into(),
        binder_mode: Mode::Unknown,
        proc: main.to_string(),
        args: args(&main_args),
        cont: Box::new(Proc::Fwd { kind: FwdKind::Unresolved, offer: root.clone(), used: MAIN_BINDER.into() }),
    };
    for s in spawns.iter().rev() {
        term = Proc::Spawn {
            binder: s.binder.clone(),
            binder_mode: Mode::Unknown,
            proc: s.proc.clone(),
            args: args(&s.args),
            cont: Box::new(term),
        };
    }
    let term = elaborate_linear(env, &esig, &SharedCtx::new(), &LinearCtx::new(), &term, &root, &def.offer_ty)
        .map_err(InitError::Manifest)?;

    let mut m = Machine {
        env: env.clone(),
        sig: esig.clone(),
        cfg: Config::default(),
        ann: Annotations { root: root.clone(), ..Annotations::default() },
    };
    m.cfg.linear.push(LinearPred::Proc(root.clone(), term));
    m.cfg.shared.insert(root.clone(), SharedPred::Unavail);
    m.ann.gamma.insert(root.clone(), Constraint::Top);
    m.ann.provides.insert(root.clone(), def.offer_ty.clone());
    m.ann.views.insert(root.clone(), def.offer_ty.clone());
    // Run the root's own spawns and its final forward.
    while let Some(i) = m.cfg.position(&root) {
        let steps = m.enabled_steps();
        let Some(step) = steps.into_iter().find(|s| s.site == Site::Linear(i)) else { break };
        let done = matches!(step.rule, super::Rule::FwdLL);
        m.apply_step(&step);
        if done {
            break;
        }
    }
    Ok(m)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Policy {
    /// Uniform choice among enabled steps with a ChaCha8 generator.
    Random(u64),
    /// Always the first enabled step in scan order.
    Fifo,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunOptions {
    pub policy: Policy,
    pub max_steps: usize,
    pub monitor: bool,
}

/// A linear process waiting to acquire `target`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Blocked {
    pub proc: Chan,
    pub target: Chan,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RunStatus {
    AllPoised,
    StuckAcquire(Vec<Blocked>),
    MaxStepsExceeded,
    MonitorViolation(Violation),
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunStatus::AllPoised => write!(f, "AllPoised"),
            RunStatus::StuckAcquire(bs) => {
                write!(f, "StuckAcquire")?;
                for b in bs {
                    write!(f, " {}->{}", b.proc, b.target)?;
                }
                Ok(())
            }
            RunStatus::MaxStepsExceeded => write!(f, "MaxStepsExceeded"),
            RunStatus::MonitorViolation(v) => write!(f, "MonitorViolation: {v}"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub trace: Vec<StepEvent>,
    pub status: RunStatus,
    pub machine: Machine,
}

/// Runs until no step is enabled, the step budget is spent or the monitor
/// rejects a step.
pub fn run(mut m: Machine, opts: RunOptions) -> RunResult {
    let mut rng = match opts.policy {
        Policy::Random(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        Policy::Fifo => None,
    };
    let mut trace = Vec::new();
    if opts.monitor {
        let errors = m.typecheck();
        if !errors.is_empty() {
            let status = RunStatus::MonitorViolation(Violation { step_rule: "initial configuration".into(), errors });
            return RunResult { trace, status, machine: m };
        }
    }
    loop {
        let steps = m.enabled_steps();
        if steps.is_empty() {
            let status = classify_halted(&m);
            return RunResult { trace, status, machine: m };
        }
        if trace.len() >= opts.max_steps {
            return RunResult { trace, status: RunStatus::MaxStepsExceeded, machine: m };
        }
        let pick = match &mut rng {
            Some(r) => r.gen_range(0..steps.len()),
            None => 0,
        };
        let gamma_before = m.ann.gamma.clone();
        let ev = m.apply_step(&steps[pick]);
        let check = if opts.monitor { monitor_check(&gamma_before, &ev, &m) } else { Ok(()) };
        trace.push(ev);
        if let Err(v) = check {
            return RunResult { trace, status: RunStatus::MonitorViolation(v), machine: m };
        }
    }
}

/// Linear processes whose next action is an acquire that cannot fire.
pub fn blocked_acquires(m: &Machine) -> Vec<Blocked> {
    let mut out = Vec::new();
    for p in &m.cfg.linear {
        let LinearPred::Proc(a, Proc::Shift { op: ShiftOp::Acquire, layer, chan, .. }) = p else { continue };
        let target = match layer {
            Layer::Linear => match m.cfg.linear.iter().find(|q| q.chan() == chan) {
                Some(LinearPred::Connect(_, c)) => c.clone(),
                _ => chan.clone(),
            },
            _ => chan.clone(),
        };
        out.push(Blocked { proc: a.clone(), target });
    }
    out
}

fn classify_halted(m: &Machine) -> RunStatus {
    if m.is_poised() {
        return RunStatus::AllPoised;
    }
    let blocked = blocked_acquires(m);
    if !blocked.is_empty() {
        return RunStatus::StuckAcquire(blocked);
    }
    let stuck: Vec<String> = m
        .cfg
        .linear
        .iter()
        .filter_map(|p| match p {
            LinearPred::Proc(a, t) if !super::poised(a, t) => Some(a.clone()),
            _ => None,
        })
        .collect();
    RunStatus::MonitorViolation(Violation {
        step_rule: "progress".into(),
        errors: vec![ConfigError {
            rule: "progress",
            chan: stuck.first().cloned(),
            message: format!("no step is enabled, yet {stuck:?} are neither poised nor acquiring"),
        }],
    })
}

//! Multiset-rewriting runtime.
//!
//! A configuration has an unordered shared fragment Λ of `procS`/`unavail`
//! predicates and an ordered linear fragment Θ of `procL`/`connect`
//! predicates in which every predicate only uses channels offered to its
//! right. Alongside the configuration the [`Machine`] keeps the typing
//! annotations the monitor needs: the shared context Γ, the type each
//! process is currently checked at and the type each linear channel is seen
//! at by its client.

mod engine;
mod step;
mod trace;
mod typing;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

pub use engine::{
    blocked_acquires, initial_machine, run, Blocked, InitError, Policy, RunOptions, RunResult, RunStatus,
};
pub use step::{Rule, Site, Step, StepEvent};
pub use trace::{event_json, pred_json, trace_jsonl};
pub use typing::{monitor_check, rename_ctx, typecheck_config, ConfigError, Violation};

use crate::process::{free_channels, Chan, Mode, Proc, Signature};
use crate::subtype::SharedCtx;
use crate::syntax::format::proc_to_string;
use crate::types::{SessionType, TypeDefEnv};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SharedPred {
    Proc(Proc),
    Unavail,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LinearPred {
    Proc(Chan, Proc),
    /// `connect(chan, target)`: linear `chan` is backed by shared `target`.
    Connect(Chan, Chan),
}

impl LinearPred {
    pub fn chan(&self) -> &Chan {
        match self {
            LinearPred::Proc(c, _) | LinearPred::Connect(c, _) => c,
        }
    }

    fn to_pred(&self) -> Pred {
        match self {
            LinearPred::Proc(c, p) => Pred::ProcL(c.clone(), p.clone()),
            LinearPred::Connect(c, t) => Pred::Connect(c.clone(), t.clone()),
        }
    }
}

/// A predicate as it appears in step events and traces.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Pred {
    ProcL(Chan, Proc),
    ProcS(Chan, Proc),
    Unavail(Chan),
    Connect(Chan, Chan),
}

impl fmt::Display for Pred {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pred::ProcL(c, p) => write!(f, "procL({c}, {})", proc_to_string(p)),
            Pred::ProcS(c, p) => write!(f, "procS({c}, {})", proc_to_string(p)),
            Pred::Unavail(c) => write!(f, "unavail({c})"),
            Pred::Connect(c, t) => write!(f, "connect({c}, {t})"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Config {
    pub shared: BTreeMap<Chan, SharedPred>,
    pub linear: Vec<LinearPred>,
    /// Counter behind fresh `%g<N>` names.
    pub fresh: usize,
}

impl Config {
    pub fn position(&self, c: &str) -> Option<usize> {
        self.linear.iter().position(|p| p.chan() == c)
    }

    pub fn fresh_chan(&mut self) -> Chan {
        let c = format!("%g{}", self.fresh);
        self.fresh += 1;
        c
    }

    /// All predicates, Θ left to right and then Λ.
    pub fn preds(&self) -> Vec<Pred> {
        let mut out: Vec<Pred> = self.linear.iter().map(LinearPred::to_pred).collect();
        for (c, p) in &self.shared {
            out.push(match p {
                SharedPred::Proc(t) => Pred::ProcS(c.clone(), t.clone()),
                SharedPred::Unavail => Pred::Unavail(c.clone()),
            });
        }
        out
    }

    /// Violations of the well-formedness conditions; empty iff well formed.
    pub fn well_formedness(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let mut seen = BTreeSet::new();
        for p in &self.linear {
            if !seen.insert(p.chan().clone()) {
                errs.push(format!("two linear predicates offer `{}`", p.chan()));
            }
            if self.shared.get(p.chan()) != Some(&SharedPred::Unavail) {
                errs.push(format!("`{}` is offered in the linear fragment without `unavail({})`", p.chan(), p.chan()));
            }
        }
        let offered: BTreeSet<&Chan> = self.linear.iter().map(|p| p.chan()).collect();
        for (i, p) in self.linear.iter().enumerate() {
            if let LinearPred::Proc(a, t) = p {
                for u in linear_uses(a, t) {
                    if offered.contains(&u) && !self.linear[i + 1..].iter().any(|q| q.chan() == &u) {
                        errs.push(format!("`{a}` uses `{u}`, which is not offered to its right"));
                    }
                }
            }
        }
        errs
    }

    /// Reorders Θ so that every predicate precedes the ones it uses,
    /// keeping the existing order where it is already consistent.
    pub(crate) fn normalize_order(&mut self) {
        let index: BTreeMap<Chan, usize> = self.linear.iter().enumerate().map(|(i, p)| (p.chan().clone(), i)).collect();
        let mut uses: Vec<Vec<usize>> = Vec::with_capacity(self.linear.len());
        let mut used = vec![false; self.linear.len()];
        for p in &self.linear {
            let mut u: Vec<usize> = match p {
                LinearPred::Proc(a, t) => linear_uses(a, t).iter().filter_map(|c| index.get(c).copied()).collect(),
                LinearPred::Connect(..) => vec![],
            };
            u.sort_unstable();
            for &j in &u {
                used[j] = true;
            }
            uses.push(u);
        }
        let mut order = Vec::with_capacity(self.linear.len());
        let mut placed = vec![false; self.linear.len()];
        fn visit(i: usize, uses: &[Vec<usize>], placed: &mut [bool], order: &mut Vec<usize>) {
            if placed[i] {
                return;
            }
            placed[i] = true;
            order.push(i);
            for &j in &uses[i] {
                visit(j, uses, placed, order);
            }
        }
        for (i, _) in used.iter().enumerate().filter(|(_, u)| !**u) {
            visit(i, &uses, &mut placed, &mut order);
        }
        for i in 0..self.linear.len() {
            visit(i, &uses, &mut placed, &mut order);
        }
        let old = std::mem::take(&mut self.linear);
        let mut slots: Vec<Option<LinearPred>> = old.into_iter().map(Some).collect();
        self.linear = order.into_iter().map(|i| slots[i].take().expect("each index placed once")).collect();
    }
}

/// Linear channels a process term uses, besides the one it offers.
pub fn linear_uses(offer: &str, p: &Proc) -> BTreeSet<Chan> {
    free_channels(p).into_iter().filter(|(c, m)| *m == Mode::Linear && c != offer).map(|(c, _)| c).collect()
}

/// Typing annotations carried along a run.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Annotations {
    pub gamma: SharedCtx,
    /// The type each process is checked at (A′ in the configuration rules).
    pub provides: BTreeMap<Chan, SessionType>,
    /// The type at which each Θ channel is offered to its client (A).
    pub views: BTreeMap<Chan, SessionType>,
    /// The channel the whole linear fragment offers.
    pub root: Chan,
}

/// A configuration together with the definitions it runs against.
#[derive(Clone, Debug)]
pub struct Machine {
    pub env: TypeDefEnv,
    /// Elaborated definitions.
    pub sig: Signature,
    pub cfg: Config,
    pub ann: Annotations,
}

impl Machine {
    /// Typing diagnostics for the current configuration.
    pub fn typecheck(&self) -> Vec<ConfigError> {
        typecheck_config(&self.env, &self.sig, &self.ann, &self.cfg)
    }

    /// Whether every process predicate is communicating along the channel
    /// it offers.
    pub fn is_poised(&self) -> bool {
        self.cfg.linear.iter().all(|p| match p {
            LinearPred::Proc(a, t) => poised(a, t),
            LinearPred::Connect(..) => true,
        }) && self.cfg.shared.values().all(|p| match p {
            SharedPred::Proc(t) => matches!(t, Proc::Shift { op: crate::process::ShiftOp::Accept, .. }),
            SharedPred::Unavail => true,
        })
    }
}

/// `proc(a, P)` is poised iff `P` acts on `a` as a provider.
pub fn poised(a: &str, p: &Proc) -> bool {
    match p {
        Proc::Fwd { .. } | Proc::Spawn { .. } => false,
        _ => p.subject().is_some_and(|s| s == a),
    }
}

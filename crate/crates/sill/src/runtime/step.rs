//! Redex discovery and the rewriting rules.

use std::collections::BTreeMap;

use super::{LinearPred, Machine, Pred, SharedPred};
use crate::process::{substitute, Chan, FwdKind, Layer, Mode, Proc, Renaming, ShiftOp};
use crate::subtype::{constraint_leq, SharedCtx};
use crate::synchro::meet;
use crate::types::{shared_name, unfold, Constraint, SessionType, TypeDefEnv};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rule {
    FwdLL,
    FwdSS,
    FwdLS,
    SpawnLL,
    SpawnLS,
    SpawnSS,
    One,
    Tensor,
    Tensor2,
    Lolli,
    Lolli2,
    IChoice,
    EChoice,
    ValOut,
    ValIn,
    UpSL,
    DownSL,
    UpLL,
    DownLL,
    UpSL2,
    DownSL2,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::FwdLL => "D-FWDLL",
            Rule::FwdSS => "D-FWDSS",
            Rule::FwdLS => "D-FWDLS",
            Rule::SpawnLL => "D-SPAWNLL",
            Rule::SpawnLS => "D-SPAWNLS",
            Rule::SpawnSS => "D-SPAWNSS",
            Rule::One => "D-1",
            Rule::Tensor => "D-⊗",
            Rule::Tensor2 => "D-⊗2",
            Rule::Lolli => "D-⊸",
            Rule::Lolli2 => "D-⊸2",
            Rule::IChoice => "D-⊕",
            Rule::EChoice => "D-&",
            Rule::ValOut => "D-∧",
            Rule::ValIn => "D-⊃",
            Rule::UpSL => "D-↑SL",
            Rule::DownSL => "D-↓SL",
            Rule::UpLL => "D-↑LL",
            Rule::DownLL => "D-↓LL",
            Rule::UpSL2 => "D-↑SL2",
            Rule::DownSL2 => "D-↓SL2",
        }
    }
}

/// Where the redex is anchored: the acting linear predicate (by position in
/// Θ) or the acting shared process.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Site {
    Linear(usize),
    Shared(Chan),
}

/// An enabled rule instance. For rules with two or three premises the site
/// is the client; the other predicates are found through its subject.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Step {
    pub rule: Rule,
    pub site: Site,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepEvent {
    pub rule: Rule,
    pub consumed: Vec<Pred>,
    pub produced: Vec<Pred>,
    pub fresh: Vec<Chan>,
    /// Global identifications `(from, to)` made by the forwarding rules.
    pub renamings: Vec<(Chan, Chan)>,
}

/// The continuation of a session type after one interaction.
fn advance(env: &TypeDefEnv, t: &SessionType, label: Option<&str>) -> Option<SessionType> {
    use SessionType::*;
    match unfold(env, t).ok()? {
        Tensor(_, b) | Lolli(_, b) | ValIn(_, b) | ValOut(_, b) | UpSL(b) | DownSL(b) | UpLL(b) | DownLL(b) => {
            Some((**b).clone())
        }
        IChoice(bs) | EChoice(bs) => bs.get(label?).cloned(),
        _ => None,
    }
}

fn payload_of(env: &TypeDefEnv, t: Option<&SessionType>) -> Option<SessionType> {
    match unfold(env, t?).ok()? {
        SessionType::Tensor(p, _) | SessionType::Lolli(p, _) => Some(p.as_type()),
        _ => None,
    }
}

fn set_opt(map: &mut BTreeMap<Chan, SessionType>, k: &str, v: Option<SessionType>) {
    match v {
        Some(v) => {
            map.insert(k.to_string(), v);
        }
        None => {
            map.remove(k);
        }
    }
}

/// Greatest lower bound of two constraints, extending `env` if the bound
/// needs new names.
pub(crate) fn meet_constraints(env: &mut TypeDefEnv, c: &Constraint, d: &Constraint) -> Constraint {
    if constraint_leq(env, c, d) {
        return c.clone();
    }
    if constraint_leq(env, d, c) {
        return d.clone();
    }
    let (m, env2) = meet(env, c, d);
    *env = env2;
    m
}

/// Γ after identifying `from` with `to`: the merged entry is the meet.
pub(crate) fn rename_gamma(env: &mut TypeDefEnv, g: &mut SharedCtx, from: &str, to: &str) {
    if let Some(c) = g.remove(from) {
        let merged = match g.get(to) {
            Some(d) => meet_constraints(env, d, &c),
            None => c,
        };
        g.insert(to.to_string(), merged);
    }
}

impl Machine {
    /// Every enabled rule instance, Θ left to right and then Λ.
    pub fn enabled_steps(&self) -> Vec<Step> {
        let mut out = Vec::new();
        for (i, p) in self.cfg.linear.iter().enumerate() {
            if let LinearPred::Proc(a, t) = p {
                if let Some(rule) = self.linear_redex(a, t) {
                    out.push(Step { rule, site: Site::Linear(i) });
                }
            }
        }
        for (c, p) in &self.cfg.shared {
            if let SharedPred::Proc(t) = p {
                let rule = match t {
                    Proc::Fwd { kind: FwdKind::SS, .. } => Some(Rule::FwdSS),
                    Proc::Spawn { binder_mode: Mode::Shared, .. } => Some(Rule::SpawnSS),
                    _ => None,
                };
                if let Some(rule) = rule {
                    out.push(Step { rule, site: Site::Shared(c.clone()) });
                }
            }
        }
        out
    }

    fn provider_term(&self, b: &str) -> Option<&Proc> {
        match self.cfg.linear.iter().find(|p| p.chan() == b)? {
            LinearPred::Proc(_, t) if t.subject().is_some_and(|s| s == b) && !matches!(t, Proc::Fwd { .. }) => Some(t),
            _ => None,
        }
    }

    fn shared_accepting(&self, b: &str) -> bool {
        matches!(
            self.cfg.shared.get(b),
            Some(SharedPred::Proc(Proc::Shift { op: ShiftOp::Accept, layer: Layer::Shared, chan, .. })) if chan == b
        )
    }

    fn unavail(&self, b: &str) -> bool {
        self.cfg.shared.get(b) == Some(&SharedPred::Unavail)
    }

    fn linear_redex(&self, a: &str, t: &Proc) -> Option<Rule> {
        match t {
            Proc::Fwd { kind: FwdKind::LL, .. } => return Some(Rule::FwdLL),
            Proc::Fwd { kind: FwdKind::LS, .. } => return Some(Rule::FwdLS),
            Proc::Fwd { .. } => return None,
            Proc::Spawn { binder_mode: Mode::Linear, .. } => return Some(Rule::SpawnLL),
            Proc::Spawn { binder_mode: Mode::Shared, .. } => return Some(Rule::SpawnLS),
            Proc::Spawn { .. } => return None,
            _ => {}
        }
        let b = t.subject()?;
        if b == a {
            return None;
        }
        if let Proc::Shift { op: ShiftOp::Acquire, layer, chan, .. } = t {
            return match layer {
                Layer::Shared if self.shared_accepting(chan) => Some(Rule::UpSL),
                Layer::Linear => match self.cfg.linear.iter().find(|p| p.chan() == chan)? {
                    LinearPred::Connect(_, c) if self.shared_accepting(c) => Some(Rule::UpSL2),
                    LinearPred::Proc(_, Proc::Shift { op: ShiftOp::Accept, layer: Layer::Linear, chan: pc, .. })
                        if pc == chan =>
                    {
                        Some(Rule::UpLL)
                    }
                    _ => None,
                },
                _ => None,
            };
        }
        let q = self.provider_term(b)?;
        match (t, q) {
            (Proc::Wait { .. }, Proc::Close { .. }) => Some(Rule::One),
            (Proc::RecvChan { .. }, Proc::SendChan { payload, mode, .. }) => match mode {
                Mode::Linear if self.cfg.position(payload).is_some() => Some(Rule::Tensor),
                Mode::Shared => Some(Rule::Tensor2),
                _ => None,
            },
            (Proc::SendChan { payload, mode, .. }, Proc::RecvChan { .. }) => match mode {
                Mode::Linear if self.cfg.position(payload).is_some() => Some(Rule::Lolli),
                Mode::Shared => Some(Rule::Lolli2),
                _ => None,
            },
            (Proc::RecvVal { .. }, Proc::SendVal { .. }) => Some(Rule::ValOut),
            (Proc::SendVal { .. }, Proc::RecvVal { .. }) => Some(Rule::ValIn),
            (Proc::Case { branches, .. }, Proc::SendLabel { label, .. }) if branches.contains_key(label) => {
                Some(Rule::IChoice)
            }
            (Proc::SendLabel { label, .. }, Proc::Case { branches, .. }) if branches.contains_key(label) => {
                Some(Rule::EChoice)
            }
            (
                Proc::Shift { op: ShiftOp::Release, layer: cl, .. },
                Proc::Shift { op: ShiftOp::Detach, layer: pl, .. },
            ) => match (cl, pl) {
                (Layer::Shared, Layer::Shared) if self.unavail(b) => Some(Rule::DownSL),
                (Layer::Linear, Layer::Linear) => Some(Rule::DownLL),
                (Layer::Linear, Layer::Shared) if self.unavail(b) => Some(Rule::DownSL2),
                _ => None,
            },
            _ => None,
        }
    }

    /// Applies an enabled step. Panics if `step` is not enabled.
    pub fn apply_step(&mut self, step: &Step) -> StepEvent {
        let ev = match &step.site {
            Site::Shared(a) => self.apply_shared(step.rule, a),
            Site::Linear(i) => self.apply_linear(step.rule, *i),
        };
        self.cfg.normalize_order();
        ev
    }

    fn apply_shared(&mut self, rule: Rule, a: &Chan) -> StepEvent {
        let Some(SharedPred::Proc(t)) = self.cfg.shared.get(a).cloned() else { panic!("no shared process at `{a}`") };
        let before = Pred::ProcS(a.clone(), t.clone());
        match (rule, &t) {
            (Rule::FwdSS, Proc::Fwd { used, .. }) => {
                self.cfg.shared.remove(a);
                self.rename_global(used, a);
                self.cfg.shared.entry(a.clone()).or_insert(SharedPred::Unavail);
                StepEvent {
                    rule,
                    consumed: vec![before],
                    produced: vec![Pred::Unavail(a.clone())],
                    fresh: vec![],
                    renamings: vec![(used.clone(), a.clone())],
                }
            }
            (Rule::SpawnSS, Proc::Spawn { binder, proc, args, cont, .. }) => {
                let (c, body) = self.instantiate_shared(proc, args);
                let q = substitute(cont, &Renaming::shared(binder, &c));
                self.cfg.shared.insert(a.clone(), SharedPred::Proc(q.clone()));
                self.cfg.shared.insert(c.clone(), SharedPred::Proc(body.clone()));
                StepEvent {
                    rule,
                    consumed: vec![before],
                    produced: vec![Pred::ProcS(a.clone(), q), Pred::ProcS(c.clone(), body)],
                    fresh: vec![c],
                    renamings: vec![],
                }
            }
            _ => panic!("{} is not enabled at `{a}`", rule.name()),
        }
    }

    /// Allocates the offered channel of a shared definition, records its
    /// annotations and returns the instantiated body.
    fn instantiate_shared(&mut self, proc: &str, args: &[crate::process::Arg]) -> (Chan, Proc) {
        let def = self.sig.get(proc).expect("spawned definition exists").clone();
        let c = self.cfg.fresh_chan();
        let mut r = Renaming::shared(&def.offer, &c);
        for (a, p) in args.iter().zip(&def.params) {
            r.shared.insert(p.chan.clone(), a.chan.clone());
        }
        let body = substitute(&def.body, &r);
        let name = shared_name(&self.env, &def.offer_ty).unwrap_or_default();
        self.ann.gamma.insert(c.clone(), Constraint::Shared(name.clone()));
        self.ann.provides.insert(c.clone(), SessionType::Ref(name));
        (c, body)
    }

    fn linear_at(&self, i: usize) -> (Chan, Proc) {
        match &self.cfg.linear[i] {
            LinearPred::Proc(a, t) => (a.clone(), t.clone()),
            LinearPred::Connect(..) => panic!("no linear process at position {i}"),
        }
    }

    fn set_linear(&mut self, a: &str, t: Proc) {
        let i = self.cfg.position(a).expect("linear predicate present");
        self.cfg.linear[i] = LinearPred::Proc(a.to_string(), t);
    }

    fn remove_linear(&mut self, a: &str) -> LinearPred {
        let i = self.cfg.position(a).expect("linear predicate present");
        self.cfg.linear.remove(i)
    }

    fn insert_after(&mut self, a: &str, p: LinearPred) {
        let i = self.cfg.position(a).expect("linear predicate present");
        self.cfg.linear.insert(i + 1, p);
    }

    fn advance_both(&mut self, b: &str, label: Option<&str>) {
        let p = self.ann.provides.get(b).and_then(|t| advance(&self.env, t, label));
        let v = self.ann.views.get(b).and_then(|t| advance(&self.env, t, label));
        set_opt(&mut self.ann.provides, b, p);
        set_opt(&mut self.ann.views, b, v);
    }

    /// Identifies `from` with `to` everywhere, in both modalities.
    fn rename_global(&mut self, from: &str, to: &str) {
        let r = Renaming::both(from, to);
        let ren = |c: &Chan| if c == from { to.to_string() } else { c.clone() };
        for p in &mut self.cfg.linear {
            *p = match p {
                LinearPred::Proc(c, t) => LinearPred::Proc(ren(c), substitute(t, &r)),
                LinearPred::Connect(c, d) => LinearPred::Connect(ren(c), ren(d)),
            };
        }
        let shared = std::mem::take(&mut self.cfg.shared);
        for (c, p) in shared {
            let p = match p {
                SharedPred::Proc(t) => SharedPred::Proc(substitute(&t, &r)),
                SharedPred::Unavail => SharedPred::Unavail,
            };
            let c = ren(&c);
            match self.cfg.shared.get(&c) {
                // Two entries collapse onto one name; a process wins over
                // an `unavail` placeholder.
                Some(SharedPred::Proc(_)) => {}
                _ => {
                    self.cfg.shared.insert(c, p);
                }
            }
        }
        rename_gamma(&mut self.env, &mut self.ann.gamma, from, to);
        if let Some(t) = self.ann.provides.remove(from) {
            self.ann.provides.insert(to.to_string(), t);
        }
        if let Some(t) = self.ann.views.remove(from) {
            self.ann.views.entry(to.to_string()).or_insert(t);
        }
        if self.ann.root == from {
            self.ann.root = to.to_string();
        }
    }

    fn apply_linear(&mut self, rule: Rule, i: usize) -> StepEvent {
        let (a, t) = self.linear_at(i);
        let before_a = Pred::ProcL(a.clone(), t.clone());
        let mut ev = StepEvent { rule, consumed: vec![before_a], produced: vec![], fresh: vec![], renamings: vec![] };
        match (rule, &t) {
            (Rule::FwdLL, Proc::Fwd { used, .. }) => {
                self.cfg.linear.remove(i);
                self.ann.provides.remove(&a);
                self.rename_global(used, &a);
                ev.renamings.push((used.clone(), a.clone()));
            }
            (Rule::FwdLS, Proc::Fwd { used, .. }) => {
                self.cfg.linear[i] = LinearPred::Connect(a.clone(), used.clone());
                self.ann.provides.remove(&a);
                ev.produced.push(Pred::Connect(a.clone(), used.clone()));
            }
            (Rule::SpawnLL, Proc::Spawn { binder, proc, args, cont, .. }) => {
                let def = self.sig.get(proc).expect("spawned definition exists").clone();
                let c = self.cfg.fresh_chan();
                ev.fresh.push(c.clone());
                let mut r = Renaming::linear(&def.offer, &c);
                let mut extra = Vec::new();
                for (arg, prm) in args.iter().zip(&def.params) {
                    if prm.shared {
                        r.shared.insert(prm.chan.clone(), arg.chan.clone());
                    } else if arg.mode == Mode::Linear {
                        r.linear.insert(prm.chan.clone(), arg.chan.clone());
                    } else {
                        let d = self.cfg.fresh_chan();
                        ev.fresh.push(d.clone());
                        r.linear.insert(prm.chan.clone(), d.clone());
                        self.ann.gamma.insert(d.clone(), Constraint::Bot);
                        self.ann.views.insert(d.clone(), prm.ty.clone());
                        extra.push((d, arg.chan.clone()));
                    }
                }
                let body = substitute(&def.body, &r);
                let q = substitute(cont, &Renaming::linear(binder, &c));
                self.cfg.linear[i] = LinearPred::Proc(a.clone(), q.clone());
                self.insert_after(&a, LinearPred::Proc(c.clone(), body.clone()));
                self.cfg.shared.insert(c.clone(), SharedPred::Unavail);
                self.ann.gamma.insert(c.clone(), Constraint::Top);
                self.ann.provides.insert(c.clone(), def.offer_ty.clone());
                self.ann.views.insert(c.clone(), def.offer_ty.clone());
                ev.produced.push(Pred::ProcL(a.clone(), q));
                ev.produced.push(Pred::ProcL(c.clone(), body));
                ev.produced.push(Pred::Unavail(c.clone()));
                let mut anchor = c.clone();
                for (d, target) in extra {
                    self.insert_after(&anchor, LinearPred::Connect(d.clone(), target.clone()));
                    self.cfg.shared.insert(d.clone(), SharedPred::Unavail);
                    ev.produced.push(Pred::Connect(d.clone(), target));
                    ev.produced.push(Pred::Unavail(d.clone()));
                    anchor = d;
                }
            }
            (Rule::SpawnLS, Proc::Spawn { binder, proc, args, cont, .. }) => {
                let (c, body) = self.instantiate_shared(proc, args);
                let q = substitute(cont, &Renaming::shared(binder, &c));
                self.cfg.linear[i] = LinearPred::Proc(a.clone(), q.clone());
                self.cfg.shared.insert(c.clone(), SharedPred::Proc(body.clone()));
                ev.fresh.push(c.clone());
                ev.produced.push(Pred::ProcL(a.clone(), q));
                ev.produced.push(Pred::ProcS(c, body));
            }
            (Rule::UpSL, Proc::Shift { binder, chan: b, cont: p, .. }) => {
                let Some(SharedPred::Proc(q)) = self.cfg.shared.get(b).cloned() else { unreachable!() };
                let Proc::Shift { binder: xq, cont: qc, .. } = &q else { unreachable!() };
                ev.consumed.push(Pred::ProcS(b.clone(), q.clone()));
                let p2 = substitute(p, &Renaming::linear(binder, b));
                let q2 = substitute(qc, &Renaming::linear(xq, b));
                self.cfg.linear[i] = LinearPred::Proc(a.clone(), p2.clone());
                self.insert_after(&a, LinearPred::Proc(b.clone(), q2.clone()));
                self.cfg.shared.insert(b.clone(), SharedPred::Unavail);
                let prov = self.ann.provides.get(b).and_then(|t| advance(&self.env, t, None));
                set_opt(&mut self.ann.provides, b, prov);
                let view = match self.ann.gamma.get(b) {
                    Some(Constraint::Shared(n)) => advance(&self.env, &SessionType::Ref(n.clone()), None),
                    _ => None,
                };
                set_opt(&mut self.ann.views, b, view);
                ev.produced.extend([Pred::ProcL(a.clone(), p2), Pred::ProcL(b.clone(), q2), Pred::Unavail(b.clone())]);
            }
            (Rule::UpSL2, Proc::Shift { binder, chan: b, cont: p, .. }) => {
                let Some(LinearPred::Connect(_, c)) = self.cfg.linear.iter().find(|q| q.chan() == b).cloned() else {
                    unreachable!()
                };
                let Some(SharedPred::Proc(q)) = self.cfg.shared.get(&c).cloned() else { unreachable!() };
                let Proc::Shift { binder: xq, cont: qc, .. } = &q else { unreachable!() };
                ev.consumed.push(Pred::Connect(b.clone(), c.clone()));
                ev.consumed.push(Pred::ProcS(c.clone(), q.clone()));
                let p2 = substitute(p, &Renaming::linear(binder, &c));
                let q2 = substitute(qc, &Renaming::linear(xq, &c));
                self.remove_linear(b);
                self.set_linear(&a, p2.clone());
                self.insert_after(&a, LinearPred::Proc(c.clone(), q2.clone()));
                self.cfg.shared.insert(c.clone(), SharedPred::Unavail);
                let view = self.ann.views.remove(b).and_then(|t| advance(&self.env, &t, None));
                set_opt(&mut self.ann.views, &c, view);
                let prov = self.ann.provides.get(&c).and_then(|t| advance(&self.env, t, None));
                set_opt(&mut self.ann.provides, &c, prov);
                ev.produced.extend([Pred::ProcL(a.clone(), p2), Pred::ProcL(c.clone(), q2), Pred::Unavail(c)]);
            }
            _ => self.apply_pair(rule, &a, &t, &mut ev),
        }
        ev
    }

    /// Rules between a client at `a` and the provider of its subject.
    fn apply_pair(&mut self, rule: Rule, a: &Chan, t: &Proc, ev: &mut StepEvent) {
        let b = t.subject().expect("client acts on a channel").clone();
        let j = self.cfg.position(&b).expect("provider present");
        let LinearPred::Proc(_, q) = self.cfg.linear[j].clone() else { panic!("provider of `{b}` is not a process") };
        ev.consumed.push(Pred::ProcL(b.clone(), q.clone()));
        let finish = |m: &mut Machine, p2: Option<Proc>, q2: Option<Proc>, ev: &mut StepEvent| {
            if let Some(p2) = p2 {
                m.set_linear(a, p2.clone());
                ev.produced.push(Pred::ProcL(a.clone(), p2));
            }
            if let Some(q2) = q2 {
                m.set_linear(&b, q2.clone());
                ev.produced.push(Pred::ProcL(b.clone(), q2));
            }
        };
        match (rule, t, &q) {
            (Rule::One, Proc::Wait { cont: p, .. }, _) => {
                self.remove_linear(&b);
                self.ann.provides.remove(&b);
                self.ann.views.remove(&b);
                finish(self, Some((**p).clone()), None, ev);
            }
            (Rule::Tensor, Proc::RecvChan { binder, cont: p, .. }, Proc::SendChan { payload: c, cont: qc, .. }) => {
                let psi = self.cfg.linear[self.cfg.position(c).expect("payload offered")].to_pred();
                ev.consumed.push(psi.clone());
                self.advance_both(&b, None);
                finish(self, Some(substitute(p, &Renaming::linear(binder, c))), Some((**qc).clone()), ev);
                ev.produced.push(psi);
            }
            (Rule::Lolli, Proc::SendChan { payload: c, cont: p, .. }, Proc::RecvChan { binder, cont: qc, .. }) => {
                let psi = self.cfg.linear[self.cfg.position(c).expect("payload offered")].to_pred();
                ev.consumed.push(psi.clone());
                self.advance_both(&b, None);
                finish(self, Some((**p).clone()), Some(substitute(qc, &Renaming::linear(binder, c))), ev);
                ev.produced.push(psi);
            }
            (Rule::Tensor2, Proc::RecvChan { binder, cont: p, .. }, Proc::SendChan { payload: c, cont: qc, .. }) => {
                let d = self.fresh_connect(c, payload_of(&self.env, self.ann.views.get(&b)), a, ev);
                self.advance_both(&b, None);
                finish(self, Some(substitute(p, &Renaming::linear(binder, &d))), Some((**qc).clone()), ev);
                self.push_connect_preds(&d, c, ev);
            }
            (Rule::Lolli2, Proc::SendChan { payload: c, cont: p, .. }, Proc::RecvChan { binder, cont: qc, .. }) => {
                let d = self.fresh_connect(c, payload_of(&self.env, self.ann.provides.get(&b)), &b, ev);
                self.advance_both(&b, None);
                finish(self, Some((**p).clone()), Some(substitute(qc, &Renaming::linear(binder, &d))), ev);
                self.push_connect_preds(&d, c, ev);
            }
            (Rule::ValOut, Proc::RecvVal { binder, cont: p, .. }, Proc::SendVal { value, cont: qc, .. }) => {
                let mut r = Renaming::new();
                r.values.insert(binder.clone(), value.clone());
                self.advance_both(&b, None);
                finish(self, Some(substitute(p, &r)), Some((**qc).clone()), ev);
            }
            (Rule::ValIn, Proc::SendVal { value, cont: p, .. }, Proc::RecvVal { binder, cont: qc, .. }) => {
                let mut r = Renaming::new();
                r.values.insert(binder.clone(), value.clone());
                self.advance_both(&b, None);
                finish(self, Some((**p).clone()), Some(substitute(qc, &r)), ev);
            }
            (Rule::IChoice, Proc::Case { branches, .. }, Proc::SendLabel { label, cont: qc, .. }) => {
                self.advance_both(&b, Some(label));
                finish(self, Some(branches[label].clone()), Some((**qc).clone()), ev);
            }
            (Rule::EChoice, Proc::SendLabel { label, cont: p, .. }, Proc::Case { branches, .. }) => {
                self.advance_both(&b, Some(label));
                finish(self, Some((**p).clone()), Some(branches[label].clone()), ev);
            }
            (
                Rule::UpLL | Rule::DownLL,
                Proc::Shift { binder, cont: p, .. },
                Proc::Shift { binder: xq, cont: qc, .. },
            ) => {
                self.advance_both(&b, None);
                let p2 = substitute(p, &Renaming::linear(binder, &b));
                let q2 = substitute(qc, &Renaming::linear(xq, &b));
                finish(self, Some(p2), Some(q2), ev);
            }
            (Rule::DownSL, Proc::Shift { binder, cont: p, .. }, Proc::Shift { binder: xq, cont: qc, .. }) => {
                ev.consumed.push(Pred::Unavail(b.clone()));
                let p2 = substitute(p, &Renaming::shared(binder, &b));
                let q2 = substitute(qc, &Renaming::shared(xq, &b));
                self.remove_linear(&b);
                self.cfg.shared.insert(b.clone(), SharedPred::Proc(q2.clone()));
                self.views_remove_and_release(&b);
                finish(self, Some(p2), None, ev);
                ev.produced.push(Pred::ProcS(b.clone(), q2));
            }
            (Rule::DownSL2, Proc::Shift { binder, cont: p, .. }, Proc::Shift { binder: xq, cont: qc, .. }) => {
                ev.consumed.push(Pred::Unavail(b.clone()));
                let c = b.clone();
                let d = self.cfg.fresh_chan();
                ev.fresh.push(d.clone());
                let view = self.ann.views.get(&c).and_then(|t| advance(&self.env, t, None));
                set_opt(&mut self.ann.views, &d, view);
                self.ann.gamma.insert(d.clone(), Constraint::Bot);
                let p2 = substitute(p, &Renaming::linear(binder, &d));
                let q2 = substitute(qc, &Renaming::shared(xq, &c));
                let k = self.cfg.position(&c).expect("provider present");
                self.cfg.linear[k] = LinearPred::Connect(d.clone(), c.clone());
                self.cfg.shared.insert(c.clone(), SharedPred::Proc(q2.clone()));
                self.cfg.shared.insert(d.clone(), SharedPred::Unavail);
                self.views_remove_and_release(&c);
                finish(self, Some(p2), None, ev);
                ev.produced.push(Pred::Connect(d.clone(), c.clone()));
                ev.produced.push(Pred::Unavail(d));
                ev.produced.push(Pred::ProcS(c, q2));
            }
            _ => panic!("{} is not enabled at `{a}`", rule.name()),
        }
    }

    /// A fresh linear channel standing for shared `c`, viewed at `view`.
    fn fresh_connect(&mut self, c: &Chan, view: Option<SessionType>, user: &Chan, ev: &mut StepEvent) -> Chan {
        let d = self.cfg.fresh_chan();
        ev.fresh.push(d.clone());
        self.insert_after(user, LinearPred::Connect(d.clone(), c.clone()));
        self.cfg.shared.insert(d.clone(), SharedPred::Unavail);
        self.ann.gamma.insert(d.clone(), Constraint::Bot);
        set_opt(&mut self.ann.views, &d, view);
        d
    }

    fn push_connect_preds(&self, d: &Chan, c: &Chan, ev: &mut StepEvent) {
        ev.produced.push(Pred::Connect(d.clone(), c.clone()));
        ev.produced.push(Pred::Unavail(d.clone()));
    }

    /// Annotation update when the provider of `b` detaches to shared: Γ
    /// records the type the provider actually returns at.
    fn views_remove_and_release(&mut self, b: &str) {
        self.ann.views.remove(b);
        let after = self.ann.provides.get(b).and_then(|t| advance(&self.env, t, None));
        match after.as_ref().and_then(|s| shared_name(&self.env, s)) {
            Some(n) => {
                self.ann.gamma.insert(b.to_string(), Constraint::Shared(n.clone()));
                self.ann.provides.insert(b.to_string(), SessionType::Ref(n));
            }
            None => {
                self.ann.provides.remove(b);
            }
        }
    }
}

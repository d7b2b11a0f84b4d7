//! Process terms, the signature of named definitions, alpha-normalization
//! and channel substitution.
//!
//! The surface syntax has one keyword per family (`acquire`, `send`, `fwd`,
//! ...). Which modality an occurrence has is decided by the typechecker,
//! which rewrites `Unresolved`/`Unknown` tags into concrete ones.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::types::{Label, SessionType};

pub type Chan = String;
pub type ProcName = String;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    Unknown,
    Linear,
    Shared,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FwdKind {
    Unresolved,
    /// Linear offer, linear used channel.
    LL,
    /// Shared offer, shared used channel.
    SS,
    /// Linear offer, shared used channel.
    LS,
}

/// Which pair of shifts an acquire/accept/release/detach belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Layer {
    Unresolved,
    /// `up_s`/`down_s`.
    Shared,
    /// `up_l`/`down_l`.
    Linear,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Int(i64),
    Sym(String),
    Var(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Arg {
    pub chan: Chan,
    pub mode: Mode,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ShiftOp {
    Acquire,
    Accept,
    Release,
    Detach,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Proc {
    Fwd {
        kind: FwdKind,
        offer: Chan,
        used: Chan,
    },
    Spawn {
        binder: Chan,
        binder_mode: Mode,
        proc: ProcName,
        args: Vec<Arg>,
        cont: Box<Proc>,
    },
    Close {
        on: Chan,
    },
    Wait {
        on: Chan,
        cont: Box<Proc>,
    },
    SendChan {
        on: Chan,
        payload: Chan,
        mode: Mode,
        cont: Box<Proc>,
    },
    RecvChan {
        on: Chan,
        binder: Chan,
        cont: Box<Proc>,
    },
    SendLabel {
        on: Chan,
        label: Label,
        cont: Box<Proc>,
    },
    Case {
        on: Chan,
        branches: BTreeMap<Label, Proc>,
    },
    /// `binder <- op chan; cont`.
    Shift {
        op: ShiftOp,
        layer: Layer,
        binder: Chan,
        chan: Chan,
        cont: Box<Proc>,
    },
    SendVal {
        on: Chan,
        value: Value,
        cont: Box<Proc>,
    },
    RecvVal {
        on: Chan,
        binder: String,
        cont: Box<Proc>,
    },
}

impl Proc {
    /// The channel this term communicates on next, if any.
    pub fn subject(&self) -> Option<&Chan> {
        match self {
            Proc::Fwd { offer, .. } => Some(offer),
            Proc::Spawn { .. } => None,
            Proc::Close { on }
            | Proc::Wait { on, .. }
            | Proc::SendChan { on, .. }
            | Proc::RecvChan { on, .. }
            | Proc::SendLabel { on, .. }
            | Proc::Case { on, .. }
            | Proc::SendVal { on, .. }
            | Proc::RecvVal { on, .. } => Some(on),
            Proc::Shift { chan, .. } => Some(chan),
        }
    }

    /// Number of nodes, counting each statement once.
    pub fn size(&self) -> usize {
        1 + self.children().iter().map(|c| c.size()).sum::<usize>()
    }

    /// Direct sub-terms, case branches in label order.
    pub fn children(&self) -> Vec<&Proc> {
        match self {
            Proc::Fwd { .. } | Proc::Close { .. } => vec![],
            Proc::Case { branches, .. } => branches.values().collect(),
            Proc::Spawn { cont, .. }
            | Proc::Wait { cont, .. }
            | Proc::SendChan { cont, .. }
            | Proc::RecvChan { cont, .. }
            | Proc::SendLabel { cont, .. }
            | Proc::Shift { cont, .. }
            | Proc::SendVal { cont, .. }
            | Proc::RecvVal { cont, .. } => vec![cont],
        }
    }
}

/// Linear or shared position of a parameter or offered channel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Param {
    pub chan: Chan,
    pub ty: SessionType,
    pub shared: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProcDef {
    pub name: ProcName,
    pub params: Vec<Param>,
    pub offer: Chan,
    pub offer_ty: SessionType,
    pub body: Proc,
}

/// The global signature of process definitions, in declaration order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Signature {
    pub defs: indexmap::IndexMap<ProcName, ProcDef>,
}

impl Signature {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, def: ProcDef) {
        self.defs.insert(def.name.clone(), def);
    }

    pub fn get(&self, name: &str) -> Option<&ProcDef> {
        self.defs.get(name)
    }
}

/// A simultaneous renaming, split by the modality of the occurrences it
/// touches. Occurrences whose modality is not yet known use the linear map
/// first and fall back to the shared one.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Renaming {
    pub linear: HashMap<Chan, Chan>,
    pub shared: HashMap<Chan, Chan>,
    pub values: HashMap<String, Value>,
}

impl Renaming {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn linear(from: &str, to: &str) -> Self {
        let mut r = Self::new();
        r.linear.insert(from.into(), to.into());
        r
    }

    pub fn shared(from: &str, to: &str) -> Self {
        let mut r = Self::new();
        r.shared.insert(from.into(), to.into());
        r
    }

    /// Renames both modalities of `from`.
    pub fn both(from: &str, to: &str) -> Self {
        let mut r = Self::new();
        r.linear.insert(from.into(), to.into());
        r.shared.insert(from.into(), to.into());
        r
    }

    pub fn is_empty(&self) -> bool {
        self.linear.is_empty() && self.shared.is_empty() && self.values.is_empty()
    }

    fn get(&self, c: &str, mode: Mode) -> Option<&Chan> {
        match mode {
            Mode::Linear => self.linear.get(c),
            Mode::Shared => self.shared.get(c),
            Mode::Unknown => self.linear.get(c).or_else(|| self.shared.get(c)),
        }
    }

    fn apply(&self, c: &Chan, mode: Mode) -> Chan {
        self.get(c, mode).cloned().unwrap_or_else(|| c.clone())
    }

    fn without(&self, b: &str, mode: Mode) -> Renaming {
        let mut r = self.clone();
        match mode {
            Mode::Linear => {
                r.linear.remove(b);
            }
            Mode::Shared => {
                r.shared.remove(b);
            }
            Mode::Unknown => {
                r.linear.remove(b);
                r.shared.remove(b);
            }
        }
        r
    }

    fn targets(&self) -> BTreeSet<&str> {
        let mut s: BTreeSet<&str> = self.linear.values().chain(self.shared.values()).map(|c| c.as_str()).collect();
        for v in self.values.values() {
            if let Value::Var(x) = v {
                s.insert(x);
            }
        }
        s
    }

    /// `other` after `self`: first apply `self`, then `other`.
    pub fn then(&self, other: &Renaming) -> Renaming {
        let mut out = Renaming::new();
        for (k, v) in &self.linear {
            out.linear.insert(k.clone(), other.linear.get(v).cloned().unwrap_or_else(|| v.clone()));
        }
        for (k, v) in &other.linear {
            out.linear.entry(k.clone()).or_insert_with(|| v.clone());
        }
        for (k, v) in &self.shared {
            out.shared.insert(k.clone(), other.shared.get(v).cloned().unwrap_or_else(|| v.clone()));
        }
        for (k, v) in &other.shared {
            out.shared.entry(k.clone()).or_insert_with(|| v.clone());
        }
        for (k, v) in &self.values {
            let v = match v {
                Value::Var(x) => other.values.get(x).cloned().unwrap_or_else(|| v.clone()),
                _ => v.clone(),
            };
            out.values.insert(k.clone(), v);
        }
        for (k, v) in &other.values {
            out.values.entry(k.clone()).or_insert_with(|| v.clone());
        }
        out
    }
}

/// Binders introduced by a node: (name, mode). Value binders use
/// `Mode::Unknown` and live in their own namespace.
fn binder_of(p: &Proc) -> Option<(&Chan, Mode)> {
    match p {
        Proc::Spawn { binder, binder_mode, .. } => Some((binder, *binder_mode)),
        Proc::RecvChan { binder, .. } => Some((binder, Mode::Linear)),
        Proc::Shift { op, layer, binder, .. } => Some((binder, shift_binder_mode(*op, *layer))),
        _ => None,
    }
}

/// The modality of the channel a shift names (`chan`) and binds (`binder`).
pub fn shift_modes(op: ShiftOp, layer: Layer) -> (Mode, Mode) {
    match (op, layer) {
        (_, Layer::Unresolved) => (Mode::Unknown, Mode::Unknown),
        (_, Layer::Linear) => (Mode::Linear, Mode::Linear),
        (ShiftOp::Acquire | ShiftOp::Accept, Layer::Shared) => (Mode::Shared, Mode::Linear),
        (ShiftOp::Release | ShiftOp::Detach, Layer::Shared) => (Mode::Linear, Mode::Shared),
    }
}

fn shift_binder_mode(op: ShiftOp, layer: Layer) -> Mode {
    match (op, layer) {
        // Before elaboration the binder of a release or detach is the shared
        // side; an acquire or accept binds a linear channel.
        (ShiftOp::Acquire | ShiftOp::Accept, Layer::Unresolved) => Mode::Linear,
        (ShiftOp::Release | ShiftOp::Detach, Layer::Unresolved) => Mode::Shared,
        _ => shift_modes(op, layer).1,
    }
}

/// Free channel occurrences with their modality.
pub fn free_channels(p: &Proc) -> BTreeSet<(Chan, Mode)> {
    let mut out = BTreeSet::new();
    collect_free(p, &mut out);
    out
}

/// Free channels used linearly (including unresolved occurrences).
pub fn free_linear(p: &Proc) -> BTreeSet<Chan> {
    free_channels(p).into_iter().filter(|(_, m)| *m != Mode::Shared).map(|(c, _)| c).collect()
}

fn collect_free(p: &Proc, out: &mut BTreeSet<(Chan, Mode)>) {
    let mut local = BTreeSet::new();
    match p {
        Proc::Fwd { kind, offer, used } => {
            let (mo, mu) = fwd_modes(*kind);
            local.insert((offer.clone(), mo));
            local.insert((used.clone(), mu));
        }
        Proc::Spawn { args, .. } => {
            for a in args {
                local.insert((a.chan.clone(), a.mode));
            }
        }
        Proc::Close { on }
        | Proc::Wait { on, .. }
        | Proc::RecvChan { on, .. }
        | Proc::SendLabel { on, .. }
        | Proc::Case { on, .. }
        | Proc::SendVal { on, .. }
        | Proc::RecvVal { on, .. } => {
            local.insert((on.clone(), Mode::Linear));
        }
        Proc::SendChan { on, payload, mode, .. } => {
            local.insert((on.clone(), Mode::Linear));
            local.insert((payload.clone(), *mode));
        }
        Proc::Shift { op, layer, chan, .. } => {
            local.insert((chan.clone(), shift_modes(*op, *layer).0));
        }
    }
    let mut inner = BTreeSet::new();
    for c in p.children() {
        collect_free(c, &mut inner);
    }
    if let Some((b, m)) = binder_of(p) {
        inner.retain(|(c, cm)| !(c == b && binds(m, *cm)));
    }
    out.extend(local);
    out.extend(inner);
}

/// Whether a binder of mode `binder` captures an occurrence of mode `occ`.
fn binds(binder: Mode, occ: Mode) -> bool {
    binder == Mode::Unknown || occ == Mode::Unknown || binder == occ
}

pub fn fwd_modes(kind: FwdKind) -> (Mode, Mode) {
    match kind {
        FwdKind::Unresolved => (Mode::Linear, Mode::Unknown),
        FwdKind::LL => (Mode::Linear, Mode::Linear),
        FwdKind::SS => (Mode::Shared, Mode::Shared),
        FwdKind::LS => (Mode::Linear, Mode::Shared),
    }
}

/// Every name appearing anywhere in the term, bound or free.
fn all_names(p: &Proc, out: &mut BTreeSet<String>) {
    match p {
        Proc::Fwd { offer, used, .. } => {
            out.insert(offer.clone());
            out.insert(used.clone());
        }
        Proc::Spawn { binder, args, .. } => {
            out.insert(binder.clone());
            out.extend(args.iter().map(|a| a.chan.clone()));
        }
        Proc::SendChan { on, payload, .. } => {
            out.insert(on.clone());
            out.insert(payload.clone());
        }
        Proc::RecvChan { on, binder, .. } | Proc::RecvVal { on, binder, .. } => {
            out.insert(on.clone());
            out.insert(binder.clone());
        }
        Proc::Shift { binder, chan, .. } => {
            out.insert(binder.clone());
            out.insert(chan.clone());
        }
        Proc::SendVal { on, value, .. } => {
            out.insert(on.clone());
            if let Value::Var(x) = value {
                out.insert(x.clone());
            }
        }
        Proc::Close { on } | Proc::Wait { on, .. } | Proc::SendLabel { on, .. } | Proc::Case { on, .. } => {
            out.insert(on.clone());
        }
    }
    for c in p.children() {
        all_names(c, out);
    }
}

fn fresh_binder(base: &str, avoid: &BTreeSet<String>) -> String {
    let stem = base.split('#').next().unwrap_or(base);
    (1..).map(|i| format!("{stem}#{i}")).find(|n| !avoid.contains(n)).expect("unbounded range")
}

/// Simultaneous, capture-avoiding renaming of free occurrences.
pub fn substitute(p: &Proc, r: &Renaming) -> Proc {
    if r.is_empty() {
        return p.clone();
    }
    let mut avoid: BTreeSet<String> = r.targets().into_iter().map(String::from).collect();
    all_names(p, &mut avoid);
    subst(p, r, &avoid)
}

fn subst(p: &Proc, r: &Renaming, avoid: &BTreeSet<String>) -> Proc {
    // Binder handling: drop the binder from the renaming and rename the
    // binder itself if a target would be captured.
    let under = |b: &Chan, m: Mode, cont: &Proc| -> (Chan, Proc) {
        let inner = r.without(b, m);
        if inner.targets().contains(b.as_str()) {
            let nb = fresh_binder(b, avoid);
            let mut rb = Renaming::new();
            match m {
                Mode::Linear => {
                    rb.linear.insert(b.clone(), nb.clone());
                }
                Mode::Shared => {
                    rb.shared.insert(b.clone(), nb.clone());
                }
                Mode::Unknown => {
                    rb.linear.insert(b.clone(), nb.clone());
                    rb.shared.insert(b.clone(), nb.clone());
                }
            }
            let mut avoid2 = avoid.clone();
            avoid2.insert(nb.clone());
            let renamed = subst(cont, &rb, &avoid2);
            (nb, subst(&renamed, &inner, &avoid2))
        } else {
            (b.clone(), subst(cont, &inner, avoid))
        }
    };
    match p {
        Proc::Fwd { kind, offer, used } => {
            let (mo, mu) = fwd_modes(*kind);
            Proc::Fwd { kind: *kind, offer: r.apply(offer, mo), used: r.apply(used, mu) }
        }
        Proc::Spawn { binder, binder_mode, proc, args, cont } => {
            let args = args.iter().map(|a| Arg { chan: r.apply(&a.chan, a.mode), mode: a.mode }).collect();
            let (b, c) = under(binder, *binder_mode, cont);
            Proc::Spawn { binder: b, binder_mode: *binder_mode, proc: proc.clone(), args, cont: Box::new(c) }
        }
        Proc::Close { on } => Proc::Close { on: r.apply(on, Mode::Linear) },
        Proc::Wait { on, cont } => Proc::Wait { on: r.apply(on, Mode::Linear), cont: Box::new(subst(cont, r, avoid)) },
        Proc::SendChan { on, payload, mode, cont } => Proc::SendChan {
            on: r.apply(on, Mode::Linear),
            payload: r.apply(payload, *mode),
            mode: *mode,
            cont: Box::new(subst(cont, r, avoid)),
        },
        Proc::RecvChan { on, binder, cont } => {
            let on = r.apply(on, Mode::Linear);
            let (b, c) = under(binder, Mode::Linear, cont);
            Proc::RecvChan { on, binder: b, cont: Box::new(c) }
        }
        Proc::SendLabel { on, label, cont } => Proc::SendLabel {
            on: r.apply(on, Mode::Linear),
            label: label.clone(),
            cont: Box::new(subst(cont, r, avoid)),
        },
        Proc::Case { on, branches } => Proc::Case {
            on: r.apply(on, Mode::Linear),
            branches: branches.iter().map(|(l, b)| (l.clone(), subst(b, r, avoid))).collect(),
        },
        Proc::Shift { op, layer, binder, chan, cont } => {
            let chan = r.apply(chan, shift_modes(*op, *layer).0);
            let (b, c) = under(binder, shift_binder_mode(*op, *layer), cont);
            Proc::Shift { op: *op, layer: *layer, binder: b, chan, cont: Box::new(c) }
        }
        Proc::SendVal { on, value, cont } => {
            let value = match value {
                Value::Var(x) => r.values.get(x).cloned().unwrap_or_else(|| value.clone()),
                v => v.clone(),
            };
            Proc::SendVal { on: r.apply(on, Mode::Linear), value, cont: Box::new(subst(cont, r, avoid)) }
        }
        Proc::RecvVal { on, binder, cont } => {
            let on = r.apply(on, Mode::Linear);
            let mut inner = r.clone();
            inner.values.remove(binder);
            let captured = inner.values.values().any(|v| matches!(v, Value::Var(x) if x == binder));
            if captured {
                let nb = fresh_binder(binder, avoid);
                let mut rb = Renaming::new();
                rb.values.insert(binder.clone(), Value::Var(nb.clone()));
                let mut avoid2 = avoid.clone();
                avoid2.insert(nb.clone());
                let renamed = subst(cont, &rb, &avoid2);
                Proc::RecvVal { on, binder: nb, cont: Box::new(subst(&renamed, &inner, &avoid2)) }
            } else {
                Proc::RecvVal { on, binder: binder.clone(), cont: Box::new(subst(cont, &inner, avoid)) }
            }
        }
    }
}

/// Renames binders to `c0, c1, ...` (channels) and `v0, v1, ...` (values)
/// in preorder, skipping names that occur free. Idempotent.
pub fn alpha_normalize(p: &Proc) -> Proc {
    let mut free: BTreeSet<String> = free_channels(p).into_iter().map(|(c, _)| c).collect();
    free_values(p, &mut BTreeSet::new(), &mut free);
    let mut n = Normalizer { free, next_chan: 0, next_val: 0 };
    n.go(p)
}

fn free_values(p: &Proc, bound: &mut BTreeSet<String>, out: &mut BTreeSet<String>) {
    if let Proc::SendVal { value: Value::Var(x), .. } = p {
        if !bound.contains(x) {
            out.insert(x.clone());
        }
    }
    let added = match p {
        Proc::RecvVal { binder, .. } => bound.insert(binder.clone()).then(|| binder.clone()),
        _ => None,
    };
    for c in p.children() {
        free_values(c, bound, out);
    }
    if let Some(b) = added {
        bound.remove(&b);
    }
}

struct Normalizer {
    free: BTreeSet<String>,
    next_chan: usize,
    next_val: usize,
}

impl Normalizer {
    fn fresh(&mut self, value: bool) -> String {
        loop {
            let n = if value {
                self.next_val += 1;
                format!("v{}", self.next_val - 1)
            } else {
                self.next_chan += 1;
                format!("c{}", self.next_chan - 1)
            };
            if !self.free.contains(&n) {
                return n;
            }
        }
    }

    fn go(&mut self, p: &Proc) -> Proc {
        match p {
            Proc::Spawn { binder, binder_mode, proc, args, cont } => {
                let nb = self.fresh(false);
                let c = self.rebind(cont, binder, *binder_mode, &nb);
                Proc::Spawn {
                    binder: nb,
                    binder_mode: *binder_mode,
                    proc: proc.clone(),
                    args: args.clone(),
                    cont: Box::new(c),
                }
            }
            Proc::RecvChan { on, binder, cont } => {
                let nb = self.fresh(false);
                let c = self.rebind(cont, binder, Mode::Linear, &nb);
                Proc::RecvChan { on: on.clone(), binder: nb, cont: Box::new(c) }
            }
            Proc::Shift { op, layer, binder, chan, cont } => {
                let nb = self.fresh(false);
                let c = self.rebind(cont, binder, shift_binder_mode(*op, *layer), &nb);
                Proc::Shift { op: *op, layer: *layer, binder: nb, chan: chan.clone(), cont: Box::new(c) }
            }
            Proc::RecvVal { on, binder, cont } => {
                let nb = self.fresh(true);
                let mut r = Renaming::new();
                r.values.insert(binder.clone(), Value::Var(nb.clone()));
                let c = substitute(cont, &r);
                Proc::RecvVal { on: on.clone(), binder: nb, cont: Box::new(self.go(&c)) }
            }
            Proc::Fwd { .. } | Proc::Close { .. } => p.clone(),
            Proc::Wait { on, cont } => Proc::Wait { on: on.clone(), cont: Box::new(self.go(cont)) },
            Proc::SendChan { on, payload, mode, cont } => {
                Proc::SendChan { on: on.clone(), payload: payload.clone(), mode: *mode, cont: Box::new(self.go(cont)) }
            }
            Proc::SendLabel { on, label, cont } => {
                Proc::SendLabel { on: on.clone(), label: label.clone(), cont: Box::new(self.go(cont)) }
            }
            Proc::SendVal { on, value, cont } => {
                Proc::SendVal { on: on.clone(), value: value.clone(), cont: Box::new(self.go(cont)) }
            }
            Proc::Case { on, branches } => {
                Proc::Case { on: on.clone(), branches: branches.iter().map(|(l, b)| (l.clone(), self.go(b))).collect() }
            }
        }
    }

    fn rebind(&mut self, cont: &Proc, old: &str, mode: Mode, new: &str) -> Proc {
        let r = match mode {
            Mode::Linear => Renaming::linear(old, new),
            Mode::Shared => Renaming::shared(old, new),
            Mode::Unknown => Renaming::both(old, new),
        };
        let c = substitute(cont, &r);
        self.go(&c)
    }
}

/// Whether the definition offers a shared channel.
pub fn is_shared_def(env: &crate::types::TypeDefEnv, def: &ProcDef) -> bool {
    crate::types::modality(env, &def.offer_ty) == crate::types::Modality::Shared
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_proc;

    fn p(s: &str) -> Proc {
        parse_proc(s).expect("parses")
    }

    #[test]
    fn normalize_renames_binders() {
        assert_eq!(alpha_normalize(&p("x <- recv a; close x")), p("c0 <- recv a; close c0"));
    }

    #[test]
    fn normalize_is_idempotent() {
        let t = p("x <- acquire q; x.enqueue; send x 5; y <- release x; z <- recv a; fwd z a");
        let once = alpha_normalize(&t);
        assert_eq!(alpha_normalize(&once), once);
    }

    #[test]
    fn alpha_equivalent_terms_normalize_identically() {
        let a = p("y <- acquire a; y.bid; case y { ok => send y 'alice; send y 5; w <- release y; close c | collecting => w <- release y; close c }");
        let b = p("m <- acquire a; m.bid; case m { ok => send m 'alice; send m 5; k <- release m; close c | collecting => n <- release m; close c }");
        assert_eq!(alpha_normalize(&a), alpha_normalize(&b));
    }

    #[test]
    fn normalize_avoids_free_names() {
        let t = alpha_normalize(&p("x <- recv c0; fwd c1 x"));
        assert_eq!(t, p("c2 <- recv c0; fwd c1 c2"));
    }

    #[test]
    fn substitute_send() {
        let t = p("send x y; close x");
        assert_eq!(substitute(&t, &Renaming::both("x", "c")), p("send c y; close c"));
    }

    #[test]
    fn identity_renaming() {
        let t = p("y <- recv x; wait y; close z");
        let mut r = Renaming::new();
        r.linear.insert("x".into(), "x".into());
        assert_eq!(substitute(&t, &r), t);
    }

    #[test]
    fn substitute_avoids_capture() {
        let t = p("y <- recv x; send y q; close x");
        let s = substitute(&t, &Renaming::both("q", "y"));
        assert_eq!(s, p("y#1 <- recv x; send y#1 y; close x"));
    }

    #[test]
    fn binders_stop_substitution() {
        let t = p("x <- recv a; close x");
        assert_eq!(substitute(&t, &Renaming::both("x", "b")), t);
    }
}

//! Syntax-directed checking of process terms.
//!
//! Checking also elaborates the term: forwards, spawns, shifts and channel
//! sends get their modality from the types involved, and `send`/`recv` on a
//! value type become value communication.

use std::collections::BTreeMap;
use std::fmt;

use crate::process::{Arg, FwdKind, Layer, Mode, Proc, ProcDef, ShiftOp, Signature, Value};
use crate::subtype::{constraint_leq_type, is_subtype, LinearCtx, SharedCtx};
use crate::types::{modality, shared_name, unfold, BaseType, Constraint, Modality, SessionType, TypeDefEnv};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ErrorKind {
    UnknownChannel,
    UnknownProcess,
    UnknownType,
    UnconsumedLinear,
    LabelNotInChoice,
    ModalityMismatch,
    SubtypeFailure,
    Independence,
    /// The term does not match the shape of the type, e.g. a label send on
    /// a tensor.
    ProtocolMismatch,
    Arity,
    Shadowing,
}

/// One typing failure. `node` is the preorder index of the offending
/// statement within the definition body.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypeError {
    pub def: Option<String>,
    pub node: Option<usize>,
    pub rule: String,
    pub kind: ErrorKind,
    pub message: String,
}

impl fmt::Display for TypeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(d) = &self.def {
            write!(f, "in `{d}`: ")?;
        }
        write!(f, "[{}] {}", self.rule, self.message)
    }
}

type Vars = BTreeMap<String, BaseType>;
type R<T> = Result<T, TypeError>;

fn err<T>(rule: &str, kind: ErrorKind, node: usize, message: impl Into<String>) -> R<T> {
    Err(TypeError { def: None, node: Some(node), rule: rule.to_string(), kind, message: message.into() })
}

/// Checks `Γ; Δ ⊢ p :: (offer : a)` and returns the elaborated term.
pub fn elaborate_linear(
    env: &TypeDefEnv,
    sig: &Signature,
    gamma: &SharedCtx,
    delta: &LinearCtx,
    p: &Proc,
    offer: &str,
    a: &SessionType,
) -> Result<Proc, TypeError> {
    Checker { env, sig }.lin(gamma, delta.clone(), &Vars::new(), p, 0, offer, a)
}

/// Checks `Γ ⊢ p :: (offer : a)` for a shared offer and returns the
/// elaborated term.
pub fn elaborate_shared(
    env: &TypeDefEnv,
    sig: &Signature,
    gamma: &SharedCtx,
    p: &Proc,
    offer: &str,
    a: &SessionType,
) -> Result<Proc, TypeError> {
    Checker { env, sig }.shared(gamma, &Vars::new(), p, 0, offer, a)
}

/// Diagnostics for `Γ; Δ ⊢ p :: (offer : a)`; empty iff derivable.
pub fn check_linear(
    env: &TypeDefEnv,
    sig: &Signature,
    gamma: &SharedCtx,
    delta: &LinearCtx,
    p: &Proc,
    offer: &str,
    a: &SessionType,
) -> Vec<TypeError> {
    elaborate_linear(env, sig, gamma, delta, p, offer, a).err().into_iter().collect()
}

/// Diagnostics for `Γ ⊢ p :: (offer : a)`; empty iff derivable.
pub fn check_shared(
    env: &TypeDefEnv,
    sig: &Signature,
    gamma: &SharedCtx,
    p: &Proc,
    offer: &str,
    a: &SessionType,
) -> Vec<TypeError> {
    elaborate_shared(env, sig, gamma, p, offer, a).err().into_iter().collect()
}

/// Checks every definition and returns the signature with elaborated bodies
/// along with the diagnostics. Definitions that fail keep their original
/// body.
pub fn elaborate_signature(env: &TypeDefEnv, sig: &Signature) -> (Signature, Vec<TypeError>) {
    let mut out = sig.clone();
    let mut errors = Vec::new();
    for (name, def) in &sig.defs {
        match check_def(env, sig, def) {
            Ok(body) => out.defs[name].body = body,
            Err(mut e) => {
                e.def = Some(name.clone());
                errors.push(e);
            }
        }
    }
    (out, errors)
}

pub fn check_signature(env: &TypeDefEnv, sig: &Signature) -> Vec<TypeError> {
    elaborate_signature(env, sig).1
}

fn header_err<T>(rule: &str, kind: ErrorKind, message: impl Into<String>) -> R<T> {
    Err(TypeError { def: None, node: None, rule: rule.to_string(), kind, message: message.into() })
}

fn check_def(env: &TypeDefEnv, sig: &Signature, def: &ProcDef) -> R<Proc> {
    for t in def.params.iter().map(|p| &p.ty).chain([&def.offer_ty]) {
        if let Err(e) = closed(env, t) {
            return header_err("Σ", ErrorKind::UnknownType, e);
        }
    }
    let shared_offer = modality(env, &def.offer_ty) == Modality::Shared;
    let mut gamma = SharedCtx::new();
    let mut delta = LinearCtx::new();
    for p in &def.params {
        if p.chan == def.offer {
            return header_err(
                "Σ",
                ErrorKind::Shadowing,
                format!("parameter `{}` has the name of the offered channel", p.chan),
            );
        }
        if p.shared {
            let Some(n) = shared_name(env, &p.ty) else {
                return header_err(
                    "Σ",
                    ErrorKind::ModalityMismatch,
                    format!("shared parameter `{}` must have a shared type name, found `{}`", p.chan, p.ty),
                );
            };
            gamma.insert(p.chan.clone(), Constraint::Shared(n));
        } else {
            if shared_offer {
                return header_err(
                    "SP_SS",
                    ErrorKind::Independence,
                    format!("shared definition depends on linear channel `{}`", p.chan),
                );
            }
            delta.insert(p.chan.clone(), p.ty.clone());
        }
    }
    let c = Checker { env, sig };
    if shared_offer {
        if !matches!(def.offer_ty, SessionType::Ref(_)) {
            return header_err("Σ", ErrorKind::ModalityMismatch, "a shared offer must be given by a type name");
        }
        c.shared(&gamma, &Vars::new(), &def.body, 0, &def.offer, &def.offer_ty)
    } else {
        c.lin(&gamma, delta, &Vars::new(), &def.body, 0, &def.offer, &def.offer_ty)
    }
}

/// Every name in `t` is defined and no stray `up_s` appears.
fn closed(env: &TypeDefEnv, t: &SessionType) -> Result<(), String> {
    if let SessionType::Ref(n) = t {
        if !env.contains(n) {
            return Err(format!("unknown type name `{n}`"));
        }
        return Ok(());
    }
    if let SessionType::Tensor(crate::types::Payload::Shared(n), _)
    | SessionType::Lolli(crate::types::Payload::Shared(n), _) = t
    {
        if !env.contains(n) {
            return Err(format!("unknown type name `{n}`"));
        }
    }
    for c in crate::types::children(t) {
        closed(env, c)?;
    }
    if let SessionType::DownSL(c) = t {
        if modality(env, c) != Modality::Shared {
            return Err(format!("`down_s` must be followed by a shared type, found `{c}`"));
        }
    }
    Ok(())
}

struct Checker<'a> {
    env: &'a TypeDefEnv,
    sig: &'a Signature,
}

/// Offset of the i-th child of a node at `idx` in preorder.
fn child_index(p: &Proc, idx: usize, i: usize) -> usize {
    idx + 1 + p.children().iter().take(i).map(|c| c.size()).sum::<usize>()
}

fn value_base_ok(v: &Value, want: &str, vars: &Vars) -> Result<(), String> {
    match v {
        Value::Int(_) if want == "int" => Ok(()),
        Value::Int(n) => Err(format!("integer `{n}` where a value of base type `{want}` is expected")),
        Value::Sym(_) => Ok(()),
        Value::Var(x) => match vars.get(x) {
            Some(b) if b == want => Ok(()),
            Some(b) => Err(format!("value `{x}` has base type `{b}`, expected `{want}`")),
            None => Err(format!("unknown value variable `{x}`")),
        },
    }
}

impl Checker<'_> {
    fn unfold<'t>(&'t self, t: &'t SessionType, rule: &str, node: usize) -> R<&'t SessionType> {
        unfold(self.env, t).or_else(|e| err(rule, ErrorKind::UnknownType, node, e.to_string()))
    }

    fn fresh_binder(&self, d: &LinearCtx, z: &str, b: &str, rule: &str, node: usize) -> R<()> {
        if d.contains_key(b) || b == z {
            return err(rule, ErrorKind::Shadowing, node, format!("binder `{b}` shadows a linear channel in scope"));
        }
        Ok(())
    }

    /// Γ; Δ ⊢ p :: (z : c)
    #[allow(clippy::too_many_arguments)]
    fn lin(
        &self,
        g: &SharedCtx,
        mut d: LinearCtx,
        vars: &Vars,
        p: &Proc,
        idx: usize,
        z: &str,
        c: &SessionType,
    ) -> R<Proc> {
        let cu = self.unfold(c, "Σ", idx)?.clone();
        let next = child_index(p, idx, 0);
        match p {
            Proc::Fwd { offer, used, .. } => {
                if offer != z {
                    return err(
                        "ID_L",
                        ErrorKind::ProtocolMismatch,
                        idx,
                        format!("`fwd` must forward the offered channel `{z}`, not `{offer}`"),
                    );
                }
                if let Some(b) = d.get(used) {
                    if d.len() > 1 {
                        return err("ID_L", ErrorKind::UnconsumedLinear, idx, unconsumed(&d, Some(used)));
                    }
                    if !is_subtype(self.env, b, c) {
                        return err(
                            "ID_L",
                            ErrorKind::SubtypeFailure,
                            idx,
                            format!("`{used}: {b}` is not a subtype of `{z}: {c}`"),
                        );
                    }
                    return Ok(Proc::Fwd { kind: FwdKind::LL, offer: offer.clone(), used: used.clone() });
                }
                if let Some(b) = g.get(used) {
                    if !d.is_empty() {
                        return err("ID_LS", ErrorKind::UnconsumedLinear, idx, unconsumed(&d, None));
                    }
                    if !constraint_leq_type(self.env, b, c) {
                        return err(
                            "ID_LS",
                            ErrorKind::SubtypeFailure,
                            idx,
                            format!("`{used}: {b}` is not a subtype of `{z}: {c}`"),
                        );
                    }
                    return Ok(Proc::Fwd { kind: FwdKind::LS, offer: offer.clone(), used: used.clone() });
                }
                err("ID_L", ErrorKind::UnknownChannel, idx, format!("unknown channel `{used}`"))
            }
            Proc::Spawn { binder, proc, args, cont, .. } => {
                let def = self.lookup(proc, idx)?;
                if args.len() != def.params.len() {
                    return err(
                        "SP_LL",
                        ErrorKind::Arity,
                        idx,
                        format!("`{proc}` takes {} arguments, {} given", def.params.len(), args.len()),
                    );
                }
                if modality(self.env, &def.offer_ty) == Modality::Shared {
                    let new_args = self.shared_args(g, &d, def, args, "SP_LS", idx)?;
                    let mut g2 = g.clone();
                    g2.insert(binder.clone(), Constraint::Shared(self.offer_name(def)));
                    if d.contains_key(binder) {
                        return err(
                            "SP_LS",
                            ErrorKind::Shadowing,
                            idx,
                            format!("binder `{binder}` shadows a linear channel in scope"),
                        );
                    }
                    let k = self.lin(&g2, d, vars, cont, next, z, c)?;
                    return Ok(Proc::Spawn {
                        binder: binder.clone(),
                        binder_mode: Mode::Shared,
                        proc: proc.clone(),
                        args: new_args,
                        cont: Box::new(k),
                    });
                }
                let mut new_args = Vec::new();
                for (a, prm) in args.iter().zip(&def.params) {
                    let ch = &a.chan;
                    if prm.shared {
                        let Some(k) = g.get(ch) else {
                            return err(
                                "SP_LL",
                                ErrorKind::ModalityMismatch,
                                idx,
                                format!("`{ch}` is not a shared channel in scope"),
                            );
                        };
                        if !constraint_leq_type(self.env, k, &prm.ty) {
                            return err(
                                "SP_LL",
                                ErrorKind::SubtypeFailure,
                                idx,
                                format!("`{ch}: {k}` is not a subtype of parameter `{}: {}`", prm.chan, prm.ty),
                            );
                        }
                        new_args.push(Arg { chan: ch.clone(), mode: Mode::Shared });
                    } else if let Some(b) = d.remove(ch) {
                        if !is_subtype(self.env, &b, &prm.ty) {
                            return err(
                                "SP_LL",
                                ErrorKind::SubtypeFailure,
                                idx,
                                format!("`{ch}: {b}` is not a subtype of parameter `{}: {}`", prm.chan, prm.ty),
                            );
                        }
                        new_args.push(Arg { chan: ch.clone(), mode: Mode::Linear });
                    } else if let Some(k) = g.get(ch) {
                        if !constraint_leq_type(self.env, k, &prm.ty) {
                            return err(
                                "SP_LL",
                                ErrorKind::SubtypeFailure,
                                idx,
                                format!("`{ch}: {k}` is not a subtype of parameter `{}: {}`", prm.chan, prm.ty),
                            );
                        }
                        new_args.push(Arg { chan: ch.clone(), mode: Mode::Shared });
                    } else {
                        return err("SP_LL", ErrorKind::UnknownChannel, idx, format!("unknown channel `{ch}`"));
                    }
                }
                self.fresh_binder(&d, z, binder, "SP_LL", idx)?;
                d.insert(binder.clone(), def.offer_ty.clone());
                let k = self.lin(g, d, vars, cont, next, z, c)?;
                Ok(Proc::Spawn {
                    binder: binder.clone(),
                    binder_mode: Mode::Linear,
                    proc: proc.clone(),
                    args: new_args,
                    cont: Box::new(k),
                })
            }
            Proc::Close { on } => {
                if on != z {
                    return err(
                        "1R",
                        ErrorKind::ProtocolMismatch,
                        idx,
                        format!("`close` must close the offered channel `{z}`"),
                    );
                }
                if cu != SessionType::One {
                    return err(
                        "1R",
                        ErrorKind::ProtocolMismatch,
                        idx,
                        format!("`close {on}` but `{z}` has type `{c}`"),
                    );
                }
                if !d.is_empty() {
                    return err("1R", ErrorKind::UnconsumedLinear, idx, unconsumed(&d, None));
                }
                Ok(p.clone())
            }
            Proc::Wait { on, cont } => {
                let t = self.client(&d, on, z, "1L", idx)?;
                if t != SessionType::One {
                    return err(
                        "1L",
                        ErrorKind::ProtocolMismatch,
                        idx,
                        format!("`wait {on}` but `{on}` has type `{t}`"),
                    );
                }
                d.remove(on);
                let k = self.lin(g, d, vars, cont, next, z, c)?;
                Ok(Proc::Wait { on: on.clone(), cont: Box::new(k) })
            }
            Proc::SendChan { on, payload, cont, .. } => {
                if on == payload {
                    return err("⊗R", ErrorKind::ProtocolMismatch, idx, format!("cannot send `{on}` on itself"));
                }
                if on == z {
                    match &cu {
                        SessionType::Tensor(pay, b) => {
                            let mode = self.send_payload(g, &mut d, payload, &pay.as_type(), "⊗R", "⊗S R", idx)?;
                            let k = self.lin(g, d, vars, cont, next, z, b)?;
                            Ok(Proc::SendChan { on: on.clone(), payload: payload.clone(), mode, cont: Box::new(k) })
                        }
                        SessionType::ValOut(base, b) if vars.contains_key(payload) => {
                            let v = Value::Var(payload.clone());
                            value_base_ok(&v, base, vars)
                                .or_else(|m| err("∧R", ErrorKind::ProtocolMismatch, idx, m))?;
                            let k = self.lin(g, d, vars, cont, next, z, b)?;
                            Ok(Proc::SendVal { on: on.clone(), value: v, cont: Box::new(k) })
                        }
                        _ => err(
                            "⊗R",
                            ErrorKind::ProtocolMismatch,
                            idx,
                            format!("`send {on} {payload}` but `{z}` has type `{c}`"),
                        ),
                    }
                } else {
                    let t = self.client(&d, on, z, "⊸L", idx)?;
                    match &t {
                        SessionType::Lolli(pay, b) => {
                            let mode = self.send_payload(g, &mut d, payload, &pay.as_type(), "⊸L", "⊸S L", idx)?;
                            d.insert(on.clone(), (**b).clone());
                            let k = self.lin(g, d, vars, cont, next, z, c)?;
                            Ok(Proc::SendChan { on: on.clone(), payload: payload.clone(), mode, cont: Box::new(k) })
                        }
                        SessionType::ValIn(base, b) if vars.contains_key(payload) => {
                            let v = Value::Var(payload.clone());
                            value_base_ok(&v, base, vars)
                                .or_else(|m| err("⊃L", ErrorKind::ProtocolMismatch, idx, m))?;
                            d.insert(on.clone(), (**b).clone());
                            let k = self.lin(g, d, vars, cont, next, z, c)?;
                            Ok(Proc::SendVal { on: on.clone(), value: v, cont: Box::new(k) })
                        }
                        _ => err(
                            "⊸L",
                            ErrorKind::ProtocolMismatch,
                            idx,
                            format!("`send {on} {payload}` but `{on}` has type `{t}`"),
                        ),
                    }
                }
            }
            Proc::SendVal { on, value, cont } => {
                if on == z {
                    let SessionType::ValOut(base, b) = &cu else {
                        return err(
                            "∧R",
                            ErrorKind::ProtocolMismatch,
                            idx,
                            format!("value send on `{z}` of type `{c}`"),
                        );
                    };
                    value_base_ok(value, base, vars).or_else(|m| err("∧R", ErrorKind::ProtocolMismatch, idx, m))?;
                    let k = self.lin(g, d, vars, cont, next, z, b)?;
                    Ok(Proc::SendVal { on: on.clone(), value: value.clone(), cont: Box::new(k) })
                } else {
                    let t = self.client(&d, on, z, "⊃L", idx)?;
                    let SessionType::ValIn(base, b) = &t else {
                        return err(
                            "⊃L",
                            ErrorKind::ProtocolMismatch,
                            idx,
                            format!("value send on `{on}` of type `{t}`"),
                        );
                    };
                    value_base_ok(value, base, vars).or_else(|m| err("⊃L", ErrorKind::ProtocolMismatch, idx, m))?;
                    d.insert(on.clone(), (**b).clone());
                    let k = self.lin(g, d, vars, cont, next, z, c)?;
                    Ok(Proc::SendVal { on: on.clone(), value: value.clone(), cont: Box::new(k) })
                }
            }
            Proc::RecvChan { on, binder, cont } | Proc::RecvVal { on, binder, cont } => {
                if on == z {
                    match &cu {
                        SessionType::Lolli(pay, b) => {
                            self.fresh_binder(&d, z, binder, "⊸R", idx)?;
                            d.insert(binder.clone(), pay.as_type());
                            let k = self.lin(g, d, vars, cont, next, z, b)?;
                            Ok(Proc::RecvChan { on: on.clone(), binder: binder.clone(), cont: Box::new(k) })
                        }
                        SessionType::ValIn(base, b) => {
                            let mut v2 = vars.clone();
                            v2.insert(binder.clone(), base.clone());
                            let k = self.lin(g, d, &v2, cont, next, z, b)?;
                            Ok(Proc::RecvVal { on: on.clone(), binder: binder.clone(), cont: Box::new(k) })
                        }
                        _ => {
                            err("⊸R", ErrorKind::ProtocolMismatch, idx, format!("`recv {on}` but `{z}` has type `{c}`"))
                        }
                    }
                } else {
                    let t = self.client(&d, on, z, "⊗L", idx)?;
                    match &t {
                        SessionType::Tensor(pay, b) => {
                            self.fresh_binder(&d, z, binder, "⊗L", idx)?;
                            d.insert(on.clone(), (**b).clone());
                            d.insert(binder.clone(), pay.as_type());
                            let k = self.lin(g, d, vars, cont, next, z, c)?;
                            Ok(Proc::RecvChan { on: on.clone(), binder: binder.clone(), cont: Box::new(k) })
                        }
                        SessionType::ValOut(base, b) => {
                            d.insert(on.clone(), (**b).clone());
                            let mut v2 = vars.clone();
                            v2.insert(binder.clone(), base.clone());
                            let k = self.lin(g, d, &v2, cont, next, z, c)?;
                            Ok(Proc::RecvVal { on: on.clone(), binder: binder.clone(), cont: Box::new(k) })
                        }
                        _ => err(
                            "⊗L",
                            ErrorKind::ProtocolMismatch,
                            idx,
                            format!("`recv {on}` but `{on}` has type `{t}`"),
                        ),
                    }
                }
            }
            Proc::SendLabel { on, label, cont } => {
                if on == z {
                    let SessionType::IChoice(bs) = &cu else {
                        return err(
                            "⊕R",
                            ErrorKind::ProtocolMismatch,
                            idx,
                            format!("`{on}.{label}` but `{z}` has type `{c}`"),
                        );
                    };
                    let Some(b) = bs.get(label) else {
                        return err("⊕R", ErrorKind::LabelNotInChoice, idx, format!("label `{label}` not in `{c}`"));
                    };
                    let k = self.lin(g, d, vars, cont, next, z, b)?;
                    Ok(Proc::SendLabel { on: on.clone(), label: label.clone(), cont: Box::new(k) })
                } else {
                    let t = self.client(&d, on, z, "&L", idx)?;
                    let SessionType::EChoice(bs) = &t else {
                        return err(
                            "&L",
                            ErrorKind::ProtocolMismatch,
                            idx,
                            format!("`{on}.{label}` but `{on}` has type `{t}`"),
                        );
                    };
                    let Some(b) = bs.get(label) else {
                        return err("&L", ErrorKind::LabelNotInChoice, idx, format!("label `{label}` not in `{t}`"));
                    };
                    d.insert(on.clone(), b.clone());
                    let k = self.lin(g, d, vars, cont, next, z, c)?;
                    Ok(Proc::SendLabel { on: on.clone(), label: label.clone(), cont: Box::new(k) })
                }
            }
            Proc::Case { on, branches } => {
                let (rule, bs, provider) = if on == z {
                    let SessionType::EChoice(bs) = &cu else {
                        return err(
                            "&R",
                            ErrorKind::ProtocolMismatch,
                            idx,
                            format!("`case {on}` but `{z}` has type `{c}`"),
                        );
                    };
                    ("&R", bs.clone(), true)
                } else {
                    let t = self.client(&d, on, z, "⊕L", idx)?;
                    let SessionType::IChoice(bs) = &t else {
                        return err(
                            "⊕L",
                            ErrorKind::ProtocolMismatch,
                            idx,
                            format!("`case {on}` but `{on}` has type `{t}`"),
                        );
                    };
                    ("⊕L", bs.clone(), false)
                };
                // Arms for labels the type does not mention are allowed and
                // left as written: they can only be reached through a
                // provider at a subtype, which never sends them.
                let mut out = branches.clone();
                for (i, (l, arm)) in branches.iter().enumerate() {
                    let Some(b) = bs.get(l) else { continue };
                    let at = child_index(p, idx, i);
                    let k = if provider {
                        self.lin(g, d.clone(), vars, arm, at, z, b)?
                    } else {
                        let mut d2 = d.clone();
                        d2.insert(on.clone(), b.clone());
                        self.lin(g, d2, vars, arm, at, z, c)?
                    };
                    out.insert(l.clone(), k);
                }
                if let Some(l) = bs.keys().find(|l| !branches.contains_key(*l)) {
                    return err(
                        rule,
                        ErrorKind::LabelNotInChoice,
                        idx,
                        format!("`case {on}` has no branch for label `{l}`"),
                    );
                }
                Ok(Proc::Case { on: on.clone(), branches: out })
            }
            Proc::Shift { op, binder, chan, cont, .. } => {
                self.lin_shift(g, d, vars, p, *op, binder, chan, cont, idx, z, c, &cu)
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn lin_shift(
        &self,
        g: &SharedCtx,
        mut d: LinearCtx,
        vars: &Vars,
        p: &Proc,
        op: ShiftOp,
        binder: &str,
        chan: &str,
        cont: &Proc,
        idx: usize,
        z: &str,
        c: &SessionType,
        cu: &SessionType,
    ) -> R<Proc> {
        let next = child_index(p, idx, 0);
        let mk = |layer: Layer, k: Proc| Proc::Shift {
            op,
            layer,
            binder: binder.to_string(),
            chan: chan.to_string(),
            cont: Box::new(k),
        };
        match op {
            ShiftOp::Acquire => {
                // An already elaborated shared acquire keeps its layer even
                // when the linear side of the same channel is in Δ.
                let resolved_shared = matches!(p, Proc::Shift { layer: Layer::Shared, .. });
                if let Some(t) = d.get(chan).filter(|_| !resolved_shared) {
                    let t = self.unfold(t, "↑LL L", idx)?.clone();
                    return match t {
                        SessionType::UpLL(a) => {
                            d.remove(chan);
                            self.fresh_binder(&d, z, binder, "↑LL L", idx)?;
                            d.insert(binder.to_string(), *a);
                            Ok(mk(Layer::Linear, self.lin(g, d, vars, cont, next, z, c)?))
                        }
                        SessionType::UpSL(_) => err(
                            "↑LL L",
                            ErrorKind::ModalityMismatch,
                            idx,
                            format!(
                                "linear channel `{chan}` has shared type `{}`; acquire it through an `up_l` type",
                                d[chan]
                            ),
                        ),
                        _ => err(
                            "↑LL L",
                            ErrorKind::ProtocolMismatch,
                            idx,
                            format!("`acquire {chan}` but `{chan}` has type `{}`", d[chan]),
                        ),
                    };
                }
                if chan == z {
                    return err(
                        "↑SL L",
                        ErrorKind::ProtocolMismatch,
                        idx,
                        format!("cannot acquire the offered channel `{z}`"),
                    );
                }
                let Some(k) = g.get(chan) else {
                    return err("↑SL L", ErrorKind::UnknownChannel, idx, format!("unknown channel `{chan}`"));
                };
                let Constraint::Shared(n) = k else {
                    return err(
                        "↑SL L",
                        ErrorKind::SubtypeFailure,
                        idx,
                        format!("`{chan}` has constraint `{k}`, which is not below an `up_s` type"),
                    );
                };
                let named = SessionType::Ref(n.clone());
                let SessionType::UpSL(a) = self.unfold(&named, "↑SL L", idx)? else {
                    return err("↑SL L", ErrorKind::ModalityMismatch, idx, format!("`{chan}: {n}` is not shared"));
                };
                self.fresh_binder(&d, z, binder, "↑SL L", idx)?;
                d.insert(binder.to_string(), (**a).clone());
                Ok(mk(Layer::Shared, self.lin(g, d, vars, cont, next, z, c)?))
            }
            ShiftOp::Accept => {
                if chan != z {
                    return err(
                        "↑LL R",
                        ErrorKind::ProtocolMismatch,
                        idx,
                        format!("`accept` must be on the offered channel `{z}`"),
                    );
                }
                match cu {
                    SessionType::UpLL(a) => {
                        self.fresh_binder(&d, z, binder, "↑LL R", idx)?;
                        Ok(mk(Layer::Linear, self.lin(g, d, vars, cont, next, binder, a)?))
                    }
                    SessionType::UpSL(_) => err(
                        "↑SL R",
                        ErrorKind::ModalityMismatch,
                        idx,
                        "a linear process cannot accept at a shared type",
                    ),
                    _ => err(
                        "↑LL R",
                        ErrorKind::ProtocolMismatch,
                        idx,
                        format!("`accept {chan}` but `{z}` has type `{c}`"),
                    ),
                }
            }
            ShiftOp::Release => {
                let t = self.client(&d, chan, z, "↓SL L", idx)?;
                match t {
                    SessionType::DownSL(s) => {
                        d.remove(chan);
                        let Some(n) = shared_name(self.env, &s) else {
                            return err(
                                "↓SL L",
                                ErrorKind::ModalityMismatch,
                                idx,
                                format!("`{s}` is not a shared type name"),
                            );
                        };
                        let mut g2 = g.clone();
                        g2.insert(binder.to_string(), Constraint::Shared(n));
                        Ok(mk(Layer::Shared, self.lin(&g2, d, vars, cont, next, z, c)?))
                    }
                    SessionType::DownLL(a) => {
                        d.remove(chan);
                        self.fresh_binder(&d, z, binder, "↓LL L", idx)?;
                        d.insert(binder.to_string(), *a);
                        Ok(mk(Layer::Linear, self.lin(g, d, vars, cont, next, z, c)?))
                    }
                    _ => err(
                        "↓SL L",
                        ErrorKind::ProtocolMismatch,
                        idx,
                        format!("`release {chan}` but `{chan}` has type `{t}`"),
                    ),
                }
            }
            ShiftOp::Detach => {
                if chan != z {
                    return err(
                        "↓SL R",
                        ErrorKind::ProtocolMismatch,
                        idx,
                        format!("`detach` must be on the offered channel `{z}`"),
                    );
                }
                match cu {
                    SessionType::DownSL(s) => {
                        if !d.is_empty() {
                            return err("↓SL R", ErrorKind::UnconsumedLinear, idx, unconsumed(&d, None));
                        }
                        Ok(mk(Layer::Shared, self.shared(g, vars, cont, next, binder, s)?))
                    }
                    SessionType::DownLL(a) => {
                        self.fresh_binder(&d, z, binder, "↓LL R", idx)?;
                        Ok(mk(Layer::Linear, self.lin(g, d, vars, cont, next, binder, a)?))
                    }
                    _ => err(
                        "↓SL R",
                        ErrorKind::ProtocolMismatch,
                        idx,
                        format!("`detach {chan}` but `{z}` has type `{c}`"),
                    ),
                }
            }
        }
    }

    /// Γ ⊢ p :: (z : a) with `a` shared.
    fn shared(&self, g: &SharedCtx, vars: &Vars, p: &Proc, idx: usize, z: &str, a: &SessionType) -> R<Proc> {
        let au = self.unfold(a, "Σ", idx)?.clone();
        let next = child_index(p, idx, 0);
        match p {
            Proc::Fwd { offer, used, .. } => {
                if offer != z {
                    return err(
                        "ID_S",
                        ErrorKind::ProtocolMismatch,
                        idx,
                        format!("`fwd` must forward the offered channel `{z}`"),
                    );
                }
                let Some(b) = g.get(used) else {
                    return err("ID_S", ErrorKind::UnknownChannel, idx, format!("unknown shared channel `{used}`"));
                };
                if !constraint_leq_type(self.env, b, a) {
                    return err(
                        "ID_S",
                        ErrorKind::SubtypeFailure,
                        idx,
                        format!("`{used}: {b}` is not a subtype of `{z}: {a}`"),
                    );
                }
                Ok(Proc::Fwd { kind: FwdKind::SS, offer: offer.clone(), used: used.clone() })
            }
            Proc::Spawn { binder, proc, args, cont, .. } => {
                let def = self.lookup(proc, idx)?;
                if args.len() != def.params.len() {
                    return err(
                        "SP_SS",
                        ErrorKind::Arity,
                        idx,
                        format!("`{proc}` takes {} arguments, {} given", def.params.len(), args.len()),
                    );
                }
                if modality(self.env, &def.offer_ty) != Modality::Shared {
                    return err(
                        "SP_SS",
                        ErrorKind::Independence,
                        idx,
                        format!("a shared process cannot spawn the linear process `{proc}`"),
                    );
                }
                let new_args = self.shared_args(g, &LinearCtx::new(), def, args, "SP_SS", idx)?;
                let mut g2 = g.clone();
                g2.insert(binder.clone(), Constraint::Shared(self.offer_name(def)));
                let k = self.shared(&g2, vars, cont, next, z, a)?;
                Ok(Proc::Spawn {
                    binder: binder.clone(),
                    binder_mode: Mode::Shared,
                    proc: proc.clone(),
                    args: new_args,
                    cont: Box::new(k),
                })
            }
            Proc::Shift { op: ShiftOp::Accept, binder, chan, cont, .. } => {
                if chan != z {
                    return err(
                        "↑SL R",
                        ErrorKind::ProtocolMismatch,
                        idx,
                        format!("`accept` must be on the offered channel `{z}`"),
                    );
                }
                let SessionType::UpSL(b) = &au else {
                    return err("↑SL R", ErrorKind::ModalityMismatch, idx, format!("`{z}: {a}` is not an `up_s` type"));
                };
                let k = self.lin(g, LinearCtx::new(), vars, cont, next, binder, b)?;
                Ok(Proc::Shift {
                    op: ShiftOp::Accept,
                    layer: Layer::Shared,
                    binder: binder.clone(),
                    chan: chan.clone(),
                    cont: Box::new(k),
                })
            }
            _ => err(
                "↑SL R",
                ErrorKind::ModalityMismatch,
                idx,
                "a shared process can only accept, forward or spawn shared processes".to_string(),
            ),
        }
    }

    fn lookup(&self, name: &str, idx: usize) -> R<&ProcDef> {
        match self.sig.get(name) {
            Some(d) => Ok(d),
            None => err("Σ", ErrorKind::UnknownProcess, idx, format!("unknown process `{name}`")),
        }
    }

    fn offer_name(&self, def: &ProcDef) -> String {
        shared_name(self.env, &def.offer_ty).unwrap_or_else(|| def.offer_ty.to_string())
    }

    fn shared_args(
        &self,
        g: &SharedCtx,
        d: &LinearCtx,
        def: &ProcDef,
        args: &[Arg],
        rule: &str,
        idx: usize,
    ) -> R<Vec<Arg>> {
        let mut out = Vec::new();
        for (a, prm) in args.iter().zip(&def.params) {
            let ch = &a.chan;
            let Some(k) = g.get(ch) else {
                if d.contains_key(ch) {
                    return err(
                        rule,
                        ErrorKind::Independence,
                        idx,
                        format!("linear channel `{ch}` passed to shared process `{}`", def.name),
                    );
                }
                return err(rule, ErrorKind::UnknownChannel, idx, format!("unknown shared channel `{ch}`"));
            };
            if !constraint_leq_type(self.env, k, &prm.ty) {
                return err(
                    rule,
                    ErrorKind::SubtypeFailure,
                    idx,
                    format!("`{ch}: {k}` is not a subtype of parameter `{}: {}`", prm.chan, prm.ty),
                );
            }
            out.push(Arg { chan: ch.clone(), mode: Mode::Shared });
        }
        Ok(out)
    }

    /// The unfolded type of a linear channel used as a client.
    fn client(&self, d: &LinearCtx, on: &str, z: &str, rule: &str, idx: usize) -> R<SessionType> {
        if on == z {
            return err(
                rule,
                ErrorKind::ProtocolMismatch,
                idx,
                format!("`{on}` is the offered channel; this operation acts on a client channel"),
            );
        }
        match d.get(on) {
            Some(t) => Ok(self.unfold(t, rule, idx)?.clone()),
            None => err(rule, ErrorKind::UnknownChannel, idx, format!("unknown linear channel `{on}`")),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn send_payload(
        &self,
        g: &SharedCtx,
        d: &mut LinearCtx,
        payload: &str,
        want: &SessionType,
        lin_rule: &str,
        sh_rule: &str,
        idx: usize,
    ) -> R<Mode> {
        if let Some(t) = d.remove(payload) {
            if !is_subtype(self.env, &t, want) {
                return err(
                    lin_rule,
                    ErrorKind::SubtypeFailure,
                    idx,
                    format!("`{payload}: {t}` is not a subtype of `{want}`"),
                );
            }
            return Ok(Mode::Linear);
        }
        if let Some(k) = g.get(payload) {
            if !constraint_leq_type(self.env, k, want) {
                return err(
                    sh_rule,
                    ErrorKind::SubtypeFailure,
                    idx,
                    format!("`{payload}: {k}` is not a subtype of `{want}`"),
                );
            }
            return Ok(Mode::Shared);
        }
        err(lin_rule, ErrorKind::UnknownChannel, idx, format!("unknown channel `{payload}`"))
    }
}

fn unconsumed(d: &LinearCtx, except: Option<&String>) -> String {
    let left: Vec<&str> = d.keys().filter(|k| Some(*k) != except).map(|k| k.as_str()).collect();
    format!(
        "unconsumed linear channel{} {}",
        if left.len() == 1 { "" } else { "s" },
        left.iter().map(|k| format!("`{k}`")).collect::<Vec<_>>().join(", ")
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse, parse_proc};

    const QUEUE: &str = "
type queue = &{enqueue: ?int. queue, dequeue: +{some: !int. queue, none: queue}}
type shared_queue = up_s &{enqueue: ?int. down_s shared_queue, dequeue: +{some: !int. down_s shared_queue, none: down_s shared_queue}}
type producer = up_s &{enqueue: ?int. down_s producer}
type consumer = up_s &{dequeue: +{some: !int. down_s consumer, none: down_s consumer}}
";

    fn env() -> TypeDefEnv {
        parse(QUEUE).unwrap().types
    }

    fn r(n: &str) -> SessionType {
        SessionType::Ref(n.into())
    }

    #[test]
    fn forward_at_subtype() {
        let env = parse("type A = +{a: 1, b: 1}\ntype B = +{a: 1}").unwrap().types;
        let mut d = LinearCtx::new();
        d.insert("y".into(), r("B"));
        let p = parse_proc("fwd x y").unwrap();
        assert!(check_linear(&env, &Signature::new(), &SharedCtx::new(), &d, &p, "x", &r("A")).is_empty());
        let e = check_linear(
            &env,
            &Signature::new(),
            &SharedCtx::new(),
            &[("y".to_string(), r("A"))].into(),
            &p,
            "x",
            &r("B"),
        );
        assert_eq!(e[0].kind, ErrorKind::SubtypeFailure);
        assert_eq!(e[0].rule, "ID_L");
    }

    #[test]
    fn producer_client() {
        let env = env();
        let mut g = SharedCtx::new();
        g.insert("q".into(), Constraint::Shared("producer".into()));
        let p = parse_proc("x <- acquire q; x.enqueue; send x 5; q2 <- release x; close c").unwrap();
        let out = elaborate_linear(&env, &Signature::new(), &g, &LinearCtx::new(), &p, "c", &SessionType::One).unwrap();
        assert!(matches!(out, Proc::Shift { layer: Layer::Shared, .. }));
    }

    #[test]
    fn client_also_checks_against_smaller_constraint() {
        let env = env();
        let mut g = SharedCtx::new();
        g.insert("q".into(), Constraint::Shared("shared_queue".into()));
        let p = parse_proc("x <- acquire q; x.enqueue; send x 5; q2 <- release x; close c").unwrap();
        assert!(check_linear(&env, &Signature::new(), &g, &LinearCtx::new(), &p, "c", &SessionType::One).is_empty());
    }

    #[test]
    fn close_with_open_channels() {
        let env = env();
        let mut d = LinearCtx::new();
        d.insert("y".into(), SessionType::One);
        let e = check_linear(
            &env,
            &Signature::new(),
            &SharedCtx::new(),
            &d,
            &parse_proc("close x").unwrap(),
            "x",
            &SessionType::One,
        );
        assert_eq!(e[0].kind, ErrorKind::UnconsumedLinear);
        assert_eq!(e[0].rule, "1R");
    }

    #[test]
    fn accept_at_up_s() {
        let env = env();
        let p = parse_proc("y <- accept a; case y { enqueue => n <- recv y; a2 <- detach y; fwd a2 a | dequeue => y.none; a2 <- detach y; fwd a2 a }").unwrap();
        let mut g = SharedCtx::new();
        g.insert("a".into(), Constraint::Shared("shared_queue".into()));
        // Forwarding back to the shared channel itself is well typed.
        assert!(check_shared(&env, &Signature::new(), &g, &p, "a", &r("shared_queue")).is_empty());
    }

    #[test]
    fn shared_definition_with_linear_param() {
        let sf = parse(&format!("{QUEUE}\nproc Bad : (y: 1) |- a: shared_queue = fwd a a")).unwrap();
        let e = check_signature(&sf.types, &sf.procs);
        assert_eq!(e[0].kind, ErrorKind::Independence);
    }

    #[test]
    fn shared_forward() {
        let env = env();
        let mut g = SharedCtx::new();
        g.insert("b".into(), Constraint::Shared("shared_queue".into()));
        let p = parse_proc("fwd a b").unwrap();
        assert!(check_shared(&env, &Signature::new(), &g, &p, "a", &r("producer")).is_empty());
    }

    #[test]
    fn empty_signature() {
        assert!(check_signature(&env(), &Signature::new()).is_empty());
    }

    #[test]
    fn forward_at_unrelated_type() {
        let sf = parse("type A = +{a: 1}\ntype B = +{b: 1}\nproc P : (y: A) |- x: B = fwd x y").unwrap();
        let e = check_signature(&sf.types, &sf.procs);
        assert_eq!(e.len(), 1);
        assert_eq!(e[0].rule, "ID_L");
        assert_eq!(e[0].kind, ErrorKind::SubtypeFailure);
    }

    #[test]
    fn label_not_in_choice() {
        let env = env();
        let mut d = LinearCtx::new();
        d.insert("q".into(), r("queue"));
        let p = parse_proc("q.pop; fwd c q").unwrap();
        let e = check_linear(&env, &Signature::new(), &SharedCtx::new(), &d, &p, "c", &r("queue"));
        assert_eq!(e[0].kind, ErrorKind::LabelNotInChoice);
    }

    #[test]
    fn unknown_channel() {
        let e = check_linear(
            &env(),
            &Signature::new(),
            &SharedCtx::new(),
            &LinearCtx::new(),
            &parse_proc("wait y; close c").unwrap(),
            "c",
            &SessionType::One,
        );
        assert_eq!(e[0].kind, ErrorKind::UnknownChannel);
    }

    #[test]
    fn error_points_at_statement() {
        let env = env();
        let mut g = SharedCtx::new();
        g.insert("q".into(), Constraint::Shared("producer".into()));
        let p = parse_proc("x <- acquire q; x.dequeue; close c").unwrap();
        let e = check_linear(&env, &Signature::new(), &g, &LinearCtx::new(), &p, "c", &SessionType::One);
        assert_eq!(e[0].node, Some(1));
    }
}

//! Canonical printing of types, process terms and whole files.

use std::fmt::Write;

use super::SourceFile;
use crate::process::{Proc, ProcDef, ShiftOp, Value};
use crate::types::{Payload, SessionType};

pub fn type_to_string(t: &SessionType) -> String {
    let mut s = String::new();
    write_type(&mut s, t);
    s
}

/// Types whose printed form extends to the right and would swallow a
/// following `*` or `-o`.
fn is_open(t: &SessionType) -> bool {
    use SessionType::*;
    match t {
        Tensor(..) | Lolli(..) | ValIn(..) | ValOut(..) => true,
        UpSL(c) | UpLL(c) | DownLL(c) => !matches!(**c, Tensor(..) | Lolli(..)) && is_open(c),
        _ => false,
    }
}

fn write_payload(s: &mut String, p: &Payload) {
    match p {
        Payload::Shared(n) => s.push_str(n),
        Payload::Linear(t) if is_open(t) => {
            s.push('(');
            write_type(s, t);
            s.push(')');
        }
        Payload::Linear(t) => write_type(s, t),
    }
}

fn write_operand(s: &mut String, t: &SessionType) {
    if matches!(t, SessionType::Tensor(..) | SessionType::Lolli(..)) {
        s.push('(');
        write_type(s, t);
        s.push(')');
    } else {
        write_type(s, t);
    }
}

fn write_type(s: &mut String, t: &SessionType) {
    use SessionType::*;
    match t {
        One => s.push('1'),
        Ref(n) => s.push_str(n),
        Tensor(p, c) | Lolli(p, c) => {
            write_payload(s, p);
            s.push_str(if matches!(t, Tensor(..)) { " * " } else { " -o " });
            write_type(s, c);
        }
        IChoice(bs) | EChoice(bs) => {
            s.push_str(if matches!(t, IChoice(_)) { "+{" } else { "&{" });
            for (i, (l, b)) in bs.iter().enumerate() {
                if i > 0 {
                    s.push_str(", ");
                }
                s.push_str(l);
                s.push_str(": ");
                write_type(s, b);
            }
            s.push('}');
        }
        UpSL(c) => {
            s.push_str("up_s ");
            write_operand(s, c);
        }
        DownSL(c) => {
            s.push_str("down_s ");
            write_operand(s, c);
        }
        UpLL(c) => {
            s.push_str("up_l ");
            write_operand(s, c);
        }
        DownLL(c) => {
            s.push_str("down_l ");
            write_operand(s, c);
        }
        ValIn(b, c) => {
            let _ = write!(s, "?{b}. ");
            write_type(s, c);
        }
        ValOut(b, c) => {
            let _ = write!(s, "!{b}. ");
            write_type(s, c);
        }
    }
}

fn value_to_string(v: &Value) -> String {
    match v {
        Value::Int(n) => n.to_string(),
        Value::Sym(x) => format!("'{x}"),
        Value::Var(x) => x.clone(),
    }
}

fn shift_kw(op: ShiftOp) -> &'static str {
    match op {
        ShiftOp::Acquire => "acquire",
        ShiftOp::Accept => "accept",
        ShiftOp::Release => "release",
        ShiftOp::Detach => "detach",
    }
}

/// The first statement of a term, without its continuation.
fn head(p: &Proc) -> String {
    match p {
        Proc::Fwd { offer, used, .. } => format!("fwd {offer} {used}"),
        Proc::Spawn { binder, proc, args, .. } => {
            let args: Vec<&str> = args.iter().map(|a| a.chan.as_str()).collect();
            format!("{binder} <- spawn {proc}({})", args.join(", "))
        }
        Proc::Close { on } => format!("close {on}"),
        Proc::Wait { on, .. } => format!("wait {on}"),
        Proc::SendChan { on, payload, .. } => format!("send {on} {payload}"),
        Proc::SendVal { on, value, .. } => format!("send {on} {}", value_to_string(value)),
        Proc::RecvChan { on, binder, .. } | Proc::RecvVal { on, binder, .. } => format!("{binder} <- recv {on}"),
        Proc::SendLabel { on, label, .. } => format!("{on}.{label}"),
        Proc::Case { on, .. } => format!("case {on}"),
        Proc::Shift { op, binder, chan, .. } => format!("{binder} <- {} {chan}", shift_kw(*op)),
    }
}

/// Single-line rendering of a process term.
pub fn proc_to_string(p: &Proc) -> String {
    match p {
        Proc::Case { on, branches } => {
            let arms: Vec<String> = branches.iter().map(|(l, b)| format!("{l} => {}", proc_to_string(b))).collect();
            format!("case {on} {{ {} }}", arms.join(" | "))
        }
        Proc::Fwd { .. } | Proc::Close { .. } => head(p),
        _ => {
            let cont = p.children()[0];
            format!("{}; {}", head(p), proc_to_string(cont))
        }
    }
}

fn write_body(out: &mut String, p: &Proc, indent: usize) {
    let pad = " ".repeat(indent);
    match p {
        Proc::Case { on, branches } => {
            let _ = writeln!(out, "{pad}case {on} {{");
            for (i, (l, b)) in branches.iter().enumerate() {
                let bar = if i == 0 { "  " } else { "| " };
                let _ = writeln!(out, "{pad}{bar}{l} =>");
                write_body(out, b, indent + 6);
                out.push('\n');
            }
            let _ = write!(out, "{pad}}}");
        }
        Proc::Fwd { .. } | Proc::Close { .. } => {
            let _ = write!(out, "{pad}{}", head(p));
        }
        _ => {
            let _ = writeln!(out, "{pad}{};", head(p));
            write_body(out, p.children()[0], indent);
        }
    }
}

pub fn def_to_string(d: &ProcDef) -> String {
    let params: Vec<String> = d
        .params
        .iter()
        .map(|p| format!("{}{}: {}", if p.shared { "sh " } else { "" }, p.chan, type_to_string(&p.ty)))
        .collect();
    let mut s =
        format!("proc {} : ({}) |- {}: {} =\n", d.name, params.join(", "), d.offer, type_to_string(&d.offer_ty));
    write_body(&mut s, &d.body, 4);
    s.push('\n');
    s
}

/// Canonical text of a source file; `parse(format_file(sf)) == sf`.
pub fn format_file(sf: &SourceFile) -> String {
    let mut sections: Vec<String> = Vec::new();
    if !sf.types.defs.is_empty() {
        let mut s = String::new();
        for (n, d) in &sf.types.defs {
            let _ = writeln!(s, "type {n} = {}", type_to_string(&d.body));
        }
        sections.push(s);
    }
    for d in sf.procs.defs.values() {
        sections.push(def_to_string(d));
    }
    if let Some(m) = &sf.system {
        let mut s = String::from("system {\n");
        for sp in &m.spawns {
            let _ = writeln!(s, "    {} <- spawn {}({});", sp.binder, sp.proc, sp.args.join(", "));
        }
        let _ = writeln!(s, "    main {}({})", m.main, m.main_args.join(", "));
        s.push_str("}\n");
        sections.push(s);
    }
    sections.join("\n")
}

//! Recursive-descent parser over the token stream.

use std::collections::BTreeMap;

use super::lexer::Tok;
use super::{Manifest, ManifestSpawn, ParseError, SourceFile, Span, Spans};
use crate::process::{Arg, FwdKind, Layer, Mode, Param, Proc, ProcDef, ShiftOp, Value};
use crate::types::{Modality, Payload, SessionType, TypeDefEnv};

/// Spans of a parsed statement and its sub-statements, mirroring the term.
struct SpanTree {
    span: Span,
    children: Vec<SpanTree>,
}

impl SpanTree {
    fn flatten(self, out: &mut Vec<Span>) {
        out.push(self.span);
        for c in self.children {
            c.flatten(out);
        }
    }
}

pub(super) struct Parser {
    toks: Vec<(Tok, Span)>,
    pos: usize,
    eof: usize,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    pub(super) fn new(toks: Vec<(Tok, Span)>, eof: usize) -> Self {
        Self { toks, pos: 0, eof }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn span(&self) -> Span {
        self.toks.get(self.pos).map(|(_, s)| *s).unwrap_or(Span::new(self.eof, self.eof))
    }

    fn prev_end(&self) -> usize {
        if self.pos == 0 {
            0
        } else {
            self.toks[self.pos - 1].1.end
        }
    }

    fn err<T>(&self, message: impl Into<String>) -> PResult<T> {
        Err(ParseError { span: self.span(), message: message.into() })
    }

    fn unexpected<T>(&self, wanted: &str) -> PResult<T> {
        match self.peek() {
            Some(t) => self.err(format!("expected {wanted}, found {t}")),
            None => self.err(format!("expected {wanted}, found end of input")),
        }
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == Some(t) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: Tok) -> PResult<()> {
        if self.eat(&t) {
            Ok(())
        } else {
            self.unexpected(&t.to_string())
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == kw)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            self.unexpected(&format!("`{kw}`"))
        }
    }

    fn ident(&mut self, what: &str) -> PResult<String> {
        match self.peek() {
            Some(Tok::Ident(s)) if !is_reserved(s) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.unexpected(what),
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    pub(super) fn file(mut self) -> PResult<(SourceFile, Spans)> {
        let mut sf = SourceFile::default();
        let mut spans = Spans::default();
        let mut bodies: Vec<(Span, ProcDef)> = Vec::new();
        while !self.at_end() {
            let start = self.span();
            if self.eat_kw("type") {
                let name = self.ident("a type name")?;
                if sf.types.contains(&name) {
                    return Err(ParseError { span: start, message: format!("type `{name}` defined twice") });
                }
                self.expect(Tok::Eq)?;
                let body = self.ty()?;
                sf.types.insert_with(name.clone(), Modality::Linear, body);
                spans.types.insert(name, Span::new(start.start, self.prev_end()));
            } else if self.eat_kw("proc") {
                let (def, header, tree) = self.proc_def(start)?;
                if sf.procs.get(&def.name).is_some() || bodies.iter().any(|(_, d)| d.name == def.name) {
                    return Err(ParseError { span: start, message: format!("process `{}` defined twice", def.name) });
                }
                let mut nodes = Vec::new();
                tree.flatten(&mut nodes);
                spans.proc_headers.insert(def.name.clone(), header);
                spans.proc_nodes.insert(def.name.clone(), nodes);
                bodies.push((start, def));
            } else if self.eat_kw("system") {
                if sf.system.is_some() {
                    return Err(ParseError { span: start, message: "more than one `system` block".into() });
                }
                sf.system = Some(self.manifest()?);
                spans.system = Some(Span::new(start.start, self.prev_end()));
            } else {
                return self.unexpected("`type`, `proc` or `system`");
            }
        }
        sf.types.settle_modalities();
        let shared = shared_names(&sf.types);
        for def in sf.types.defs.values_mut() {
            classify_payloads(&mut def.body, &shared);
        }
        for (_, mut def) in bodies {
            for p in &mut def.params {
                classify_payloads(&mut p.ty, &shared);
            }
            classify_payloads(&mut def.offer_ty, &shared);
            sf.procs.insert(def);
        }
        Ok((sf, spans))
    }

    pub(super) fn standalone_proc(mut self) -> PResult<Proc> {
        let (p, _) = self.body()?;
        if !self.at_end() {
            return self.unexpected("end of input");
        }
        Ok(p)
    }

    pub(super) fn standalone_type(mut self) -> PResult<SessionType> {
        let t = self.ty()?;
        if !self.at_end() {
            return self.unexpected("end of input");
        }
        Ok(t)
    }

    // Types

    fn ty(&mut self) -> PResult<SessionType> {
        let left = self.prefix()?;
        if self.eat(&Tok::Star) {
            let cont = self.ty()?;
            Ok(SessionType::Tensor(Payload::Linear(Box::new(left)), Box::new(cont)))
        } else if self.eat(&Tok::Lolli) {
            let cont = self.ty()?;
            Ok(SessionType::Lolli(Payload::Linear(Box::new(left)), Box::new(cont)))
        } else {
            Ok(left)
        }
    }

    fn prefix(&mut self) -> PResult<SessionType> {
        if self.eat_kw("up_s") {
            return Ok(SessionType::UpSL(Box::new(self.prefix()?)));
        }
        if self.eat_kw("down_s") {
            let n = self.ident("a shared type name after `down_s`")?;
            return Ok(SessionType::DownSL(Box::new(SessionType::Ref(n))));
        }
        if self.eat_kw("up_l") {
            return Ok(SessionType::UpLL(Box::new(self.prefix()?)));
        }
        if self.eat_kw("down_l") {
            return Ok(SessionType::DownLL(Box::new(self.prefix()?)));
        }
        if self.eat(&Tok::Question) {
            let b = self.ident("a base type")?;
            self.expect(Tok::Dot)?;
            return Ok(SessionType::ValIn(b, Box::new(self.ty()?)));
        }
        if self.eat(&Tok::Bang) {
            let b = self.ident("a base type")?;
            self.expect(Tok::Dot)?;
            return Ok(SessionType::ValOut(b, Box::new(self.ty()?)));
        }
        self.atom()
    }

    fn atom(&mut self) -> PResult<SessionType> {
        match self.peek() {
            Some(Tok::Int(1)) => {
                self.pos += 1;
                Ok(SessionType::One)
            }
            Some(Tok::Plus) => {
                self.pos += 1;
                Ok(SessionType::IChoice(self.branches()?))
            }
            Some(Tok::Amp) => {
                self.pos += 1;
                Ok(SessionType::EChoice(self.branches()?))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let t = self.ty()?;
                self.expect(Tok::RParen)?;
                Ok(t)
            }
            Some(Tok::Ident(_)) => Ok(SessionType::Ref(self.ident("a type")?)),
            _ => self.unexpected("a type"),
        }
    }

    fn branches(&mut self) -> PResult<BTreeMap<String, SessionType>> {
        self.expect(Tok::LBrace)?;
        let mut out = BTreeMap::new();
        loop {
            let at = self.span();
            let l = self.ident("a label")?;
            self.expect(Tok::Colon)?;
            let t = self.ty()?;
            if out.insert(l.clone(), t).is_some() {
                return Err(ParseError { span: at, message: format!("duplicate label `{l}`") });
            }
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        self.expect(Tok::RBrace)?;
        Ok(out)
    }

    // Process definitions

    fn proc_def(&mut self, start: Span) -> PResult<(ProcDef, Span, SpanTree)> {
        let name = self.ident("a process name")?;
        self.expect(Tok::Colon)?;
        self.expect(Tok::LParen)?;
        let mut params: Vec<Param> = Vec::new();
        if !self.eat(&Tok::RParen) {
            loop {
                let at = self.span();
                let shared = self.eat_kw("sh");
                let chan = self.ident("a parameter name")?;
                self.expect(Tok::Colon)?;
                let ty = self.ty()?;
                if params.iter().any(|p| p.chan == chan) {
                    return Err(ParseError { span: at, message: format!("duplicate parameter `{chan}`") });
                }
                params.push(Param { chan, ty, shared });
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
            self.expect(Tok::RParen)?;
        }
        self.expect(Tok::Turnstile)?;
        let offer = self.ident("the offered channel")?;
        self.expect(Tok::Colon)?;
        let offer_ty = self.ty()?;
        let header = Span::new(start.start, self.prev_end());
        self.expect(Tok::Eq)?;
        let (body, tree) = self.body()?;
        Ok((ProcDef { name, params, offer, offer_ty, body }, header, tree))
    }

    fn manifest(&mut self) -> PResult<Manifest> {
        self.expect(Tok::LBrace)?;
        let mut spawns = Vec::new();
        loop {
            if self.eat_kw("main") {
                let main = self.ident("a process name")?;
                let main_args = self.chan_args()?;
                self.expect(Tok::RBrace)?;
                return Ok(Manifest { spawns, main, main_args });
            }
            let binder = self.ident("`main` or a spawn")?;
            self.expect(Tok::Arrow)?;
            self.expect_kw("spawn")?;
            let proc = self.ident("a process name")?;
            let args = self.chan_args()?;
            self.expect(Tok::Semi)?;
            spawns.push(ManifestSpawn { binder, proc, args });
        }
    }

    fn chan_args(&mut self) -> PResult<Vec<String>> {
        self.expect(Tok::LParen)?;
        let mut args = Vec::new();
        if self.eat(&Tok::RParen) {
            return Ok(args);
        }
        loop {
            args.push(self.ident("a channel")?);
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        self.expect(Tok::RParen)?;
        Ok(args)
    }

    // Process bodies

    fn body(&mut self) -> PResult<(Proc, SpanTree)> {
        let start = self.span();
        let leaf = |p: &Parser, term: Proc| {
            let span = Span::new(start.start, p.prev_end());
            (term, SpanTree { span, children: vec![] })
        };
        if self.eat_kw("close") {
            let on = self.ident("a channel")?;
            return Ok(leaf(self, Proc::Close { on }));
        }
        if self.eat_kw("fwd") {
            let offer = self.ident("a channel")?;
            let used = self.ident("a channel")?;
            return Ok(leaf(self, Proc::Fwd { kind: FwdKind::Unresolved, offer, used }));
        }
        if self.eat_kw("case") {
            let on = self.ident("a channel")?;
            self.expect(Tok::LBrace)?;
            let mut arms: BTreeMap<String, (Proc, SpanTree)> = BTreeMap::new();
            loop {
                let at = self.span();
                let l = self.ident("a label")?;
                self.expect(Tok::FatArrow)?;
                let arm = self.body()?;
                if arms.insert(l.clone(), arm).is_some() {
                    return Err(ParseError { span: at, message: format!("duplicate label `{l}`") });
                }
                if !self.eat(&Tok::Bar) {
                    break;
                }
            }
            self.expect(Tok::RBrace)?;
            let span = Span::new(start.start, self.prev_end());
            let mut branches = BTreeMap::new();
            let mut children = Vec::new();
            for (l, (p, t)) in arms {
                branches.insert(l, p);
                children.push(t);
            }
            return Ok((Proc::Case { on, branches }, SpanTree { span, children }));
        }
        if self.eat_kw("wait") {
            let on = self.ident("a channel")?;
            let (span, cont, tree) = self.rest(start)?;
            return Ok((Proc::Wait { on, cont }, SpanTree { span, children: vec![tree] }));
        }
        if self.eat_kw("send") {
            let on = self.ident("a channel")?;
            let make: Box<dyn FnOnce(Box<Proc>) -> Proc> = match self.peek().cloned() {
                Some(Tok::Int(n)) => {
                    self.pos += 1;
                    Box::new(move |cont| Proc::SendVal { on, value: Value::Int(n), cont })
                }
                Some(Tok::Sym(s)) => {
                    self.pos += 1;
                    Box::new(move |cont| Proc::SendVal { on, value: Value::Sym(s), cont })
                }
                _ => {
                    let payload = self.ident("a channel or value")?;
                    Box::new(move |cont| Proc::SendChan { on, payload, mode: Mode::Unknown, cont })
                }
            };
            let (span, cont, tree) = self.rest(start)?;
            return Ok((make(cont), SpanTree { span, children: vec![tree] }));
        }
        // `x.l; P` or `y <- ...; P`
        let first = self.ident("a statement")?;
        if self.eat(&Tok::Dot) {
            let label = self.ident("a label")?;
            let (span, cont, tree) = self.rest(start)?;
            return Ok((Proc::SendLabel { on: first, label, cont }, SpanTree { span, children: vec![tree] }));
        }
        self.expect(Tok::Arrow)?;
        let binder = first;
        if self.eat_kw("recv") {
            let on = self.ident("a channel")?;
            let (span, cont, tree) = self.rest(start)?;
            return Ok((Proc::RecvChan { on, binder, cont }, SpanTree { span, children: vec![tree] }));
        }
        if self.eat_kw("spawn") {
            let proc = self.ident("a process name")?;
            let args = self.chan_args()?.into_iter().map(|chan| Arg { chan, mode: Mode::Unknown }).collect();
            let (span, cont, tree) = self.rest(start)?;
            let term = Proc::Spawn { binder, binder_mode: Mode::Unknown, proc, args, cont };
            return Ok((term, SpanTree { span, children: vec![tree] }));
        }
        let op = match self.peek() {
            Some(Tok::Ident(s)) => match s.as_str() {
                "acquire" => ShiftOp::Acquire,
                "accept" => ShiftOp::Accept,
                "release" => ShiftOp::Release,
                "detach" => ShiftOp::Detach,
                _ => return self.unexpected("`recv`, `spawn`, `acquire`, `accept`, `release` or `detach`"),
            },
            _ => return self.unexpected("`recv`, `spawn`, `acquire`, `accept`, `release` or `detach`"),
        };
        self.pos += 1;
        let chan = self.ident("a channel")?;
        let (span, cont, tree) = self.rest(start)?;
        let term = Proc::Shift { op, layer: Layer::Unresolved, binder, chan, cont };
        Ok((term, SpanTree { span, children: vec![tree] }))
    }

    /// `; P` after a prefix statement. The node span covers the prefix only.
    fn rest(&mut self, start: Span) -> PResult<(Span, Box<Proc>, SpanTree)> {
        let span = Span::new(start.start, self.prev_end());
        self.expect(Tok::Semi)?;
        let (p, t) = self.body()?;
        Ok((span, Box::new(p), t))
    }
}

fn is_reserved(s: &str) -> bool {
    matches!(
        s,
        "type"
            | "proc"
            | "system"
            | "main"
            | "sh"
            | "up_s"
            | "down_s"
            | "up_l"
            | "down_l"
            | "fwd"
            | "close"
            | "wait"
            | "send"
            | "recv"
            | "case"
            | "spawn"
            | "acquire"
            | "accept"
            | "release"
            | "detach"
    )
}

fn shared_names(env: &TypeDefEnv) -> std::collections::BTreeSet<String> {
    env.defs.iter().filter(|(_, d)| d.modality == Modality::Shared).map(|(n, _)| n.clone()).collect()
}

/// Rewrites a payload that is a bare name of a shared definition into a
/// shared payload.
pub(super) fn classify_payloads(t: &mut SessionType, shared: &std::collections::BTreeSet<String>) {
    use SessionType::*;
    match t {
        One | Ref(_) => {}
        Tensor(p, c) | Lolli(p, c) => {
            if let Payload::Linear(pt) = p {
                if let Ref(n) = pt.as_ref() {
                    if shared.contains(n) {
                        *p = Payload::Shared(n.clone());
                    }
                }
            }
            if let Payload::Linear(pt) = p {
                classify_payloads(pt, shared);
            }
            classify_payloads(c, shared);
        }
        IChoice(bs) | EChoice(bs) => bs.values_mut().for_each(|b| classify_payloads(b, shared)),
        UpSL(c) | DownSL(c) | UpLL(c) | DownLL(c) | ValIn(_, c) | ValOut(_, c) => classify_payloads(c, shared),
    }
}

//! Session types, constraints and the named-definition environment.
//!
//! Recursion only goes through names: a [`SessionType::Ref`] points into a
//! [`TypeDefEnv`], and every definition is tagged as shared or linear.
//! Shared definitions have a body of the form `up_s A`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use indexmap::IndexMap;

pub type TypeName = String;
pub type Label = String;
pub type BaseType = String;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SessionType {
    One,
    Tensor(Payload, Box<SessionType>),
    Lolli(Payload, Box<SessionType>),
    IChoice(BTreeMap<Label, SessionType>),
    EChoice(BTreeMap<Label, SessionType>),
    UpSL(Box<SessionType>),
    DownSL(Box<SessionType>),
    UpLL(Box<SessionType>),
    DownLL(Box<SessionType>),
    /// `?b. A`, the client sends a value (⊃).
    ValIn(BaseType, Box<SessionType>),
    /// `!b. A`, the provider sends a value (∧).
    ValOut(BaseType, Box<SessionType>),
    Ref(TypeName),
}

/// The channel type carried by ⊗ and ⊸.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Payload {
    Linear(Box<SessionType>),
    Shared(TypeName),
}

impl Payload {
    /// The payload viewed as a session type.
    pub fn as_type(&self) -> SessionType {
        match self {
            Payload::Linear(t) => (**t).clone(),
            Payload::Shared(n) => SessionType::Ref(n.clone()),
        }
    }
}

/// Constraint lattice ⊥ ≤ Shared(A) ≤ ⊤.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Constraint {
    Bot,
    Shared(TypeName),
    Top,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Modality {
    Shared,
    Linear,
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Modality::Shared => write!(f, "shared"),
            Modality::Linear => write!(f, "linear"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypeDef {
    pub modality: Modality,
    pub body: SessionType,
}

/// Named type definitions in declaration order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TypeDefEnv {
    pub defs: IndexMap<TypeName, TypeDef>,
}

impl TypeDefEnv {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a definition, taking its modality from the body: `up_s` bodies
    /// are shared, names inherit the modality of what they name when known.
    pub fn insert(&mut self, name: impl Into<TypeName>, body: SessionType) {
        let modality = match &body {
            SessionType::UpSL(_) => Modality::Shared,
            SessionType::Ref(n) => self.defs.get(n).map(|d| d.modality).unwrap_or(Modality::Linear),
            _ => Modality::Linear,
        };
        self.defs.insert(name.into(), TypeDef { modality, body });
    }

    pub fn insert_with(&mut self, name: impl Into<TypeName>, modality: Modality, body: SessionType) {
        self.defs.insert(name.into(), TypeDef { modality, body });
    }

    pub fn get(&self, name: &str) -> Option<&TypeDef> {
        self.defs.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.defs.contains_key(name)
    }

    /// Recomputes declared modalities of name-to-name aliases after all
    /// definitions are known.
    pub fn settle_modalities(&mut self) {
        let names: Vec<TypeName> = self.defs.keys().cloned().collect();
        for n in names {
            let m = match unfold(self, &SessionType::Ref(n.clone())) {
                Ok(SessionType::UpSL(_)) => Modality::Shared,
                _ => Modality::Linear,
            };
            if let Some(d) = self.defs.get_mut(&n) {
                d.modality = m;
            }
        }
    }

    /// A name not yet used in the environment, spelled `{prefix}{N}`.
    pub fn fresh_name(&self, prefix: &str) -> TypeName {
        (0..).map(|i| format!("{prefix}{i}")).find(|n| !self.defs.contains_key(n)).expect("unbounded range")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum EnvError {
    #[error("unknown type name `{0}`")]
    UnknownName(TypeName),
    #[error("non-contractive definition `{0}`")]
    NonContractive(TypeName),
}

/// Resolves names until a structural constructor is reached.
pub fn unfold<'a>(env: &'a TypeDefEnv, t: &'a SessionType) -> Result<&'a SessionType, EnvError> {
    let mut cur = t;
    let mut steps = 0;
    while let SessionType::Ref(n) = cur {
        let def = env.get(n).ok_or_else(|| EnvError::UnknownName(n.clone()))?;
        cur = &def.body;
        steps += 1;
        if steps > env.defs.len() {
            return Err(EnvError::NonContractive(n.clone()));
        }
    }
    Ok(cur)
}

/// [`unfold`] for environments that passed [`validate_env`].
pub(crate) fn expand<'a>(env: &'a TypeDefEnv, t: &'a SessionType) -> &'a SessionType {
    unfold(env, t).unwrap_or_else(|e| panic!("unvalidated type environment: {e}"))
}

/// Shared iff the type unfolds to `up_s`.
pub fn modality(env: &TypeDefEnv, t: &SessionType) -> Modality {
    match unfold(env, t) {
        Ok(SessionType::UpSL(_)) => Modality::Shared,
        _ => Modality::Linear,
    }
}

/// The name under which a shared type is known, following aliases.
pub fn shared_name(env: &TypeDefEnv, t: &SessionType) -> Option<TypeName> {
    match t {
        SessionType::Ref(n) => {
            if modality(env, t) == Modality::Shared {
                Some(n.clone())
            } else {
                None
            }
        }
        SessionType::UpSL(_) => env.defs.iter().find(|(_, d)| &d.body == t).map(|(n, _)| n.clone()),
        _ => None,
    }
}

/// Immediate subterms of a structural type, payloads included.
pub fn children(t: &SessionType) -> Vec<&SessionType> {
    use SessionType::*;
    match t {
        One | Ref(_) => vec![],
        Tensor(p, c) | Lolli(p, c) => match p {
            Payload::Linear(pt) => vec![pt, c.as_ref()],
            Payload::Shared(_) => vec![c.as_ref()],
        },
        IChoice(bs) | EChoice(bs) => bs.values().collect(),
        UpSL(c) | DownSL(c) | UpLL(c) | DownLL(c) | ValIn(_, c) | ValOut(_, c) => vec![c.as_ref()],
    }
}

/// Every canonical type reachable from `t` by unfolding and descending into
/// continuations, branches and payloads. Shared payloads count as their name.
pub fn reachable(env: &TypeDefEnv, t: &SessionType) -> BTreeSet<SessionType> {
    let mut seen = BTreeSet::new();
    let mut stack = vec![t.clone()];
    while let Some(cur) = stack.pop() {
        if !seen.insert(cur.clone()) {
            continue;
        }
        let Ok(u) = unfold(env, &cur) else { continue };
        if let SessionType::Tensor(Payload::Shared(n), _) | SessionType::Lolli(Payload::Shared(n), _) = u {
            stack.push(SessionType::Ref(n.clone()));
        }
        for c in children(u) {
            stack.push(c.clone());
        }
    }
    seen
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EnvDiagnosticKind {
    UnknownName(TypeName),
    NonContractive,
    Stratification(String),
    EmptyChoice,
}

/// One problem found by [`validate_env`], with the definition and a path to
/// the offending position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnvDiagnostic {
    pub def: TypeName,
    pub path: String,
    pub kind: EnvDiagnosticKind,
}

impl fmt::Display for EnvDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let at = if self.path.is_empty() { String::new() } else { format!(" at {}", self.path) };
        match &self.kind {
            EnvDiagnosticKind::UnknownName(n) => {
                write!(f, "type `{}`{at}: unknown type name `{n}`", self.def)
            }
            EnvDiagnosticKind::NonContractive => write!(f, "non-contractive: {}", self.def),
            EnvDiagnosticKind::Stratification(m) => {
                write!(f, "stratification: {m} in `{}`{at}", self.def)
            }
            EnvDiagnosticKind::EmptyChoice => write!(f, "type `{}`{at}: empty choice", self.def),
        }
    }
}

/// Checks closure, contractivity, stratification and non-empty choices.
/// Label distinctness is guaranteed by the map representation; the parser
/// rejects duplicate labels.
pub fn validate_env(env: &TypeDefEnv) -> Vec<EnvDiagnostic> {
    let mut out = Vec::new();
    for (name, def) in &env.defs {
        if let Err(EnvError::NonContractive(_)) = unfold(env, &SessionType::Ref(name.clone())) {
            out.push(EnvDiagnostic { def: name.clone(), path: String::new(), kind: EnvDiagnosticKind::NonContractive });
            continue;
        }
        let mut v = Validator { env, def: name, out: &mut out };
        match def.modality {
            Modality::Shared => match &def.body {
                SessionType::UpSL(inner) => v.linear(inner, "up_s".into()),
                SessionType::Ref(_) => v.expect(&def.body, Modality::Shared, String::new()),
                _ => v.report(String::new(), EnvDiagnosticKind::Stratification("shared body must be `up_s A`".into())),
            },
            Modality::Linear => v.linear(&def.body, String::new()),
        }
    }
    out
}

struct Validator<'a> {
    env: &'a TypeDefEnv,
    def: &'a str,
    out: &'a mut Vec<EnvDiagnostic>,
}

impl Validator<'_> {
    fn report(&mut self, path: String, kind: EnvDiagnosticKind) {
        self.out.push(EnvDiagnostic { def: self.def.to_string(), path, kind });
    }

    fn join(path: &str, step: &str) -> String {
        if path.is_empty() {
            step.to_string()
        } else {
            format!("{path}/{step}")
        }
    }

    /// A name in a position that requires the given modality.
    fn expect(&mut self, t: &SessionType, want: Modality, path: String) {
        match t {
            SessionType::Ref(n) => {
                if !self.env.contains(n) {
                    self.report(path, EnvDiagnosticKind::UnknownName(n.clone()));
                    return;
                }
                if unfold(self.env, t).is_err() {
                    return;
                }
                let got = modality(self.env, t);
                if got != want {
                    self.report(
                        path,
                        EnvDiagnosticKind::Stratification(format!("`{n}` is {got} where a {want} type is required")),
                    );
                }
            }
            _ if want == Modality::Linear => self.linear(t, path),
            SessionType::UpSL(_) => {
                self.report(path, EnvDiagnosticKind::Stratification("`up_s` outside a shared definition body".into()))
            }
            _ => self.report(path, EnvDiagnosticKind::Stratification("a shared type must be a name".into())),
        }
    }

    fn linear(&mut self, t: &SessionType, path: String) {
        use SessionType::*;
        match t {
            One => {}
            Ref(_) => self.expect(t, Modality::Linear, path),
            Tensor(p, c) | Lolli(p, c) => {
                match p {
                    Payload::Linear(pt) => self.linear(pt, Self::join(&path, "payload")),
                    Payload::Shared(n) => self.expect(&Ref(n.clone()), Modality::Shared, Self::join(&path, "payload")),
                }
                self.linear(c, Self::join(&path, "cont"));
            }
            IChoice(bs) | EChoice(bs) => {
                if bs.is_empty() {
                    self.report(path.clone(), EnvDiagnosticKind::EmptyChoice);
                }
                for (l, b) in bs {
                    self.linear(b, Self::join(&path, l));
                }
            }
            UpSL(_) => {
                self.report(path, EnvDiagnosticKind::Stratification("nested `up_s` in a linear position".into()))
            }
            DownSL(c) => self.expect(c, Modality::Shared, Self::join(&path, "down_s")),
            UpLL(c) => self.linear(c, Self::join(&path, "up_l")),
            DownLL(c) => self.linear(c, Self::join(&path, "down_l")),
            ValIn(_, c) | ValOut(_, c) => self.linear(c, Self::join(&path, "cont")),
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::Bot => write!(f, "bot"),
            Constraint::Top => write!(f, "top"),
            Constraint::Shared(n) => write!(f, "{n}"),
        }
    }
}

impl fmt::Display for SessionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::syntax::format::type_to_string(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_types;

    fn env(src: &str) -> TypeDefEnv {
        parse_types(src).expect("parses")
    }

    #[test]
    fn queue_validates() {
        let e = env("type queue = &{enqueue: ?int. queue, dequeue: +{some: !int. queue, none: queue}}");
        assert!(validate_env(&e).is_empty());
    }

    #[test]
    fn self_reference_is_non_contractive() {
        let e = env("type X = X");
        let d = validate_env(&e);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].kind, EnvDiagnosticKind::NonContractive);
        assert_eq!(d[0].to_string(), "non-contractive: X");
    }

    #[test]
    fn nested_up_s_rejected() {
        let e = env("type S = up_s up_s 1");
        let d = validate_env(&e);
        assert_eq!(d.len(), 1);
        assert!(matches!(&d[0].kind, EnvDiagnosticKind::Stratification(m) if m.contains("nested")));
    }

    #[test]
    fn unknown_name_reported_with_path() {
        let e = env("type A = &{a: B}");
        let d = validate_env(&e);
        assert_eq!(d[0].kind, EnvDiagnosticKind::UnknownName("B".into()));
        assert_eq!(d[0].path, "a");
    }

    #[test]
    fn down_s_needs_shared_name() {
        let e = env("type L = 1\ntype A = down_s L");
        assert!(matches!(validate_env(&e)[0].kind, EnvDiagnosticKind::Stratification(_)));
    }

    #[test]
    fn unfold_examples() {
        let e = env(
            "type queue = &{enqueue: ?int. queue, dequeue: +{some: !int. queue, none: queue}}\ntype A = B\ntype B = 1",
        );
        assert!(matches!(unfold(&e, &SessionType::Ref("queue".into())), Ok(SessionType::EChoice(_))));
        assert_eq!(unfold(&e, &SessionType::One), Ok(&SessionType::One));
        assert_eq!(unfold(&e, &SessionType::Ref("A".into())), Ok(&SessionType::One));
        assert_eq!(unfold(&e, &SessionType::Ref("Z".into())), Err(EnvError::UnknownName("Z".into())));
    }

    #[test]
    fn modality_examples() {
        let e = env("type S = up_s &{a: down_s S}");
        assert_eq!(modality(&e, &SessionType::Ref("S".into())), Modality::Shared);
        assert_eq!(modality(&e, &SessionType::One), Modality::Linear);
        assert_eq!(modality(&e, &SessionType::DownSL(Box::new(SessionType::Ref("S".into())))), Modality::Linear);
    }

    #[test]
    fn reachable_is_finite_for_recursive_types() {
        let e = env("type queue = &{enqueue: ?int. queue, dequeue: +{some: !int. queue, none: queue}}");
        let r = reachable(&e, &SessionType::Ref("queue".into()));
        // queue, ?int. queue, +{...}, !int. queue
        assert_eq!(r.len(), 4);
    }
}

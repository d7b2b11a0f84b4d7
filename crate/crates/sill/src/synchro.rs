//! Subsynchronizing, equi-synchronizing and the meet of constraints.

use std::collections::{BTreeMap, HashMap, HashSet};

use crate::subtype::{constraint_leq, is_subtype};
use crate::types::{
    expand, modality, shared_name, Constraint, Label, Modality, Payload, SessionType, TypeDefEnv, TypeName,
};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum SyncError {
    #[error("precondition violated: {provider} is not a subtype of {client}")]
    NotSubtype { provider: SessionType, client: SessionType },
}

/// ssync(a, b, d) for a provider type `a`, a client type `b` and the
/// constraint `d`. Fails with [`SyncError`] when `a ≤ b` does not hold.
pub fn is_ssync(env: &TypeDefEnv, a: &SessionType, b: &SessionType, d: &Constraint) -> Result<bool, SyncError> {
    if !is_subtype(env, a, b) {
        return Err(SyncError::NotSubtype { provider: a.clone(), client: b.clone() });
    }
    let mut c = SyncChecker { env, entered: HashSet::new(), reps: Vec::new() };
    Ok(c.check(a, b, d))
}

/// ssync(a, a, ⊤).
pub fn is_esync(env: &TypeDefEnv, a: &SessionType) -> bool {
    is_ssync(env, a, a, &Constraint::Top).unwrap_or(false)
}

struct SyncChecker<'a> {
    env: &'a TypeDefEnv,
    entered: HashSet<(SessionType, SessionType, Constraint)>,
    /// Representatives of constraint names seen so far, one per
    /// bisimilarity class.
    reps: Vec<TypeName>,
}

impl SyncChecker<'_> {
    fn canonical(&mut self, d: &Constraint) -> Constraint {
        let Constraint::Shared(n) = d else { return d.clone() };
        let t = SessionType::Ref(n.clone());
        for r in &self.reps {
            let u = SessionType::Ref(r.clone());
            if r == n || (is_subtype(self.env, &t, &u) && is_subtype(self.env, &u, &t)) {
                return Constraint::Shared(r.clone());
            }
        }
        self.reps.push(n.clone());
        d.clone()
    }

    fn check(&mut self, a: &SessionType, b: &SessionType, d: &Constraint) -> bool {
        let d = self.canonical(d);
        if !self.entered.insert((a.clone(), b.clone(), d.clone())) {
            return true;
        }
        use SessionType::*;
        let env = self.env;
        match (expand(env, a), expand(env, b)) {
            (One, One) => true,
            (Tensor(_, c1), Tensor(_, c2))
            | (Lolli(_, c1), Lolli(_, c2))
            | (ValIn(_, c1), ValIn(_, c2))
            | (ValOut(_, c1), ValOut(_, c2))
            | (UpLL(c1), UpLL(c2))
            | (DownLL(c1), DownLL(c2)) => self.check(c1, c2, &d),
            (IChoice(l), IChoice(r)) => l.iter().all(|(lab, t)| r.get(lab).is_some_and(|u| self.check(t, u, &d))),
            (EChoice(l), EChoice(r)) => r.iter().all(|(lab, u)| l.get(lab).is_some_and(|t| self.check(t, u, &d))),
            (UpSL(c1), UpSL(c2)) | (UpSL(c1), UpLL(c2)) => {
                if d != Constraint::Top {
                    return false;
                }
                match shared_name(env, a) {
                    Some(n) => self.check(c1, c2, &Constraint::Shared(n)),
                    None => false,
                }
            }
            (DownSL(c1), DownSL(c2)) | (DownSL(c1), DownLL(c2)) => {
                let released = match shared_name(env, c1) {
                    Some(n) => Constraint::Shared(n),
                    None => return false,
                };
                constraint_leq(env, &released, &d) && self.check(c1, c2, &Constraint::Top)
            }
            _ => false,
        }
    }
}

/// The greatest lower bound of two constraints. Shared results may name
/// fresh definitions; the returned environment extends `env` with them.
pub fn meet(env: &TypeDefEnv, c: &Constraint, d: &Constraint) -> (Constraint, TypeDefEnv) {
    match (c, d) {
        (Constraint::Top, x) | (x, Constraint::Top) => (x.clone(), env.clone()),
        (Constraint::Bot, _) | (_, Constraint::Bot) => (Constraint::Bot, env.clone()),
        (Constraint::Shared(a), Constraint::Shared(b)) => {
            let (ta, tb) = (SessionType::Ref(a.clone()), SessionType::Ref(b.clone()));
            if is_subtype(env, &ta, &tb) {
                return (c.clone(), env.clone());
            }
            if is_subtype(env, &tb, &ta) {
                return (d.clone(), env.clone());
            }
            match bound(env, Bound::Meet, &ta, &tb) {
                None => (Constraint::Bot, env.clone()),
                Some((SessionType::Ref(n), out)) => (Constraint::Shared(n), out),
                Some((t, _)) => unreachable!("shared bound is always named: {t}"),
            }
        }
    }
}

/// Greatest lower bound of two session types of either modality.
pub fn meet_types(env: &TypeDefEnv, a: &SessionType, b: &SessionType) -> Option<(SessionType, TypeDefEnv)> {
    bound(env, Bound::Meet, a, b)
}

/// Least upper bound of two session types. Only needed for the contravariant
/// payload of ⊸ inside a meet.
pub fn join_types(env: &TypeDefEnv, a: &SessionType, b: &SessionType) -> Option<(SessionType, TypeDefEnv)> {
    bound(env, Bound::Join, a, b)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Bound {
    Meet,
    Join,
}

impl Bound {
    fn flip(self) -> Bound {
        match self {
            Bound::Meet => Bound::Join,
            Bound::Join => Bound::Meet,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Shift {
    UpSL,
    DownSL,
    UpLL,
    DownLL,
}

#[derive(Clone, Debug)]
enum Shape {
    /// One side already bounds the other.
    Witness(SessionType),
    Never,
    One,
    Tensor(usize, usize),
    Lolli(usize, usize),
    Val {
        input: bool,
        base: String,
        cont: usize,
    },
    Shift(Shift, usize),
    /// `common` labels need a bound; `copied` labels come from one side only.
    /// With `any` the node exists as soon as one common label does and
    /// labels without a bound are dropped.
    Choice {
        internal: bool,
        common: Vec<(Label, usize)>,
        copied: Vec<(Label, SessionType)>,
        any: bool,
    },
}

struct Node {
    op: Bound,
    left: SessionType,
    right: SessionType,
    shape: Shape,
}

struct Lattice<'a> {
    env: &'a TypeDefEnv,
    nodes: Vec<Node>,
    index: HashMap<(Bound, SessionType, SessionType), usize>,
}

fn bound(env: &TypeDefEnv, op: Bound, a: &SessionType, b: &SessionType) -> Option<(SessionType, TypeDefEnv)> {
    let mut lat = Lattice { env, nodes: Vec::new(), index: HashMap::new() };
    let root = lat.node(op, a, b);
    let exists = lat.existence();
    if !exists[root] {
        return None;
    }
    Some(lat.build(root, &exists))
}

impl Lattice<'_> {
    fn node(&mut self, op: Bound, a: &SessionType, b: &SessionType) -> usize {
        let key = (op, a.clone(), b.clone());
        if let Some(&i) = self.index.get(&key) {
            return i;
        }
        let id = self.nodes.len();
        self.index.insert(key, id);
        self.nodes.push(Node { op, left: a.clone(), right: b.clone(), shape: Shape::Never });
        let shape = self.shape(op, a, b);
        self.nodes[id].shape = shape;
        id
    }

    fn shape(&mut self, op: Bound, a: &SessionType, b: &SessionType) -> Shape {
        use SessionType::*;
        let env = self.env;
        let (lo, hi) = match op {
            Bound::Meet => (a, b),
            Bound::Join => (b, a),
        };
        if is_subtype(env, lo, hi) {
            return Shape::Witness(lo.clone());
        }
        if is_subtype(env, hi, lo) {
            return Shape::Witness(hi.clone());
        }
        let meet = op == Bound::Meet;
        match (expand(env, a), expand(env, b)) {
            (One, One) => Shape::One,
            (Tensor(p, c), Tensor(q, d)) => {
                let pn = self.node(op, &p.as_type(), &q.as_type());
                Shape::Tensor(pn, self.node(op, c, d))
            }
            (Lolli(p, c), Lolli(q, d)) => {
                let pn = self.node(op.flip(), &p.as_type(), &q.as_type());
                Shape::Lolli(pn, self.node(op, c, d))
            }
            (ValIn(x, c), ValIn(y, d)) | (ValOut(x, c), ValOut(y, d)) if x == y => {
                let input = matches!(expand(env, a), ValIn(..));
                Shape::Val { input, base: x.clone(), cont: self.node(op, c, d) }
            }
            (IChoice(l), IChoice(r)) => self.choice(op, true, l, r, !meet),
            (EChoice(l), EChoice(r)) => self.choice(op, false, l, r, meet),
            (UpSL(c), UpSL(d)) => Shape::Shift(Shift::UpSL, self.node(op, c, d)),
            (UpLL(c), UpLL(d)) => Shape::Shift(Shift::UpLL, self.node(op, c, d)),
            (UpSL(c), UpLL(d)) | (UpLL(c), UpSL(d)) => {
                let s = if meet { Shift::UpSL } else { Shift::UpLL };
                Shape::Shift(s, self.node(op, c, d))
            }
            (DownSL(c), DownSL(d)) => Shape::Shift(Shift::DownSL, self.node(op, c, d)),
            (DownLL(c), DownLL(d)) => Shape::Shift(Shift::DownLL, self.node(op, c, d)),
            (DownSL(c), DownLL(d)) | (DownLL(c), DownSL(d)) => {
                let s = if meet { Shift::DownSL } else { Shift::DownLL };
                Shape::Shift(s, self.node(op, c, d))
            }
            _ => Shape::Never,
        }
    }

    /// `union` keeps every label (meet of &, join of +); otherwise only the
    /// common labels survive.
    fn choice(
        &mut self,
        op: Bound,
        internal: bool,
        l: &BTreeMap<Label, SessionType>,
        r: &BTreeMap<Label, SessionType>,
        union: bool,
    ) -> Shape {
        let mut common = Vec::new();
        let mut copied = Vec::new();
        for (lab, t) in l {
            match r.get(lab) {
                Some(u) => common.push((lab.clone(), self.node(op, t, u))),
                None if union => copied.push((lab.clone(), t.clone())),
                None => {}
            }
        }
        if union {
            for (lab, u) in r {
                if !l.contains_key(lab) {
                    copied.push((lab.clone(), u.clone()));
                }
            }
        }
        if common.is_empty() && !union {
            return Shape::Never;
        }
        Shape::Choice { internal, common, copied, any: !union }
    }

    /// Greatest fixed point of "a bound exists".
    fn existence(&self) -> Vec<bool> {
        let mut ok = vec![true; self.nodes.len()];
        loop {
            let mut changed = false;
            for (i, n) in self.nodes.iter().enumerate() {
                let v = match &n.shape {
                    Shape::Witness(_) | Shape::One => true,
                    Shape::Never => false,
                    Shape::Tensor(p, c) | Shape::Lolli(p, c) => ok[*p] && ok[*c],
                    Shape::Val { cont, .. } | Shape::Shift(_, cont) => ok[*cont],
                    Shape::Choice { common, any: true, .. } => common.iter().any(|(_, j)| ok[*j]),
                    Shape::Choice { common, any: false, .. } => common.iter().all(|(_, j)| ok[*j]),
                };
                if ok[i] && !v {
                    ok[i] = false;
                    changed = true;
                }
            }
            if !changed {
                return ok;
            }
        }
    }

    fn build(&self, root: usize, ok: &[bool]) -> (SessionType, TypeDefEnv) {
        let mut out = self.env.clone();
        // Name every reachable node with a name on either side; cycles must
        // pass through one of them.
        let mut names: HashMap<usize, TypeName> = HashMap::new();
        let mut order = Vec::new();
        let mut stack = vec![root];
        let mut seen = HashSet::new();
        while let Some(i) = stack.pop() {
            if !seen.insert(i) {
                continue;
            }
            let n = &self.nodes[i];
            if matches!(n.shape, Shape::Witness(_)) {
                continue;
            }
            if matches!(n.left, SessionType::Ref(_)) || matches!(n.right, SessionType::Ref(_)) {
                let prefix = match n.op {
                    Bound::Meet => "meet_",
                    Bound::Join => "join_",
                };
                let name = out.fresh_name(prefix);
                out.insert_with(name.clone(), Modality::Linear, SessionType::One);
                names.insert(i, name);
                order.push(i);
            }
            stack.extend(self.successors(i, ok));
        }
        for i in order {
            let body = self.structure(i, ok, &names);
            let m = if matches!(body, SessionType::UpSL(_)) { Modality::Shared } else { Modality::Linear };
            out.insert_with(names[&i].clone(), m, body);
        }
        let top = self.ty(root, ok, &names);
        (top, out)
    }

    fn successors(&self, i: usize, ok: &[bool]) -> Vec<usize> {
        match &self.nodes[i].shape {
            Shape::Tensor(p, c) | Shape::Lolli(p, c) => vec![*p, *c],
            Shape::Val { cont, .. } | Shape::Shift(_, cont) => vec![*cont],
            Shape::Choice { common, .. } => common.iter().map(|(_, j)| *j).filter(|j| ok[*j]).collect(),
            _ => vec![],
        }
    }

    fn ty(&self, i: usize, ok: &[bool], names: &HashMap<usize, TypeName>) -> SessionType {
        if let Shape::Witness(t) = &self.nodes[i].shape {
            return t.clone();
        }
        match names.get(&i) {
            Some(n) => SessionType::Ref(n.clone()),
            None => self.structure(i, ok, names),
        }
    }

    fn payload(&self, i: usize, ok: &[bool], names: &HashMap<usize, TypeName>) -> Payload {
        let t = self.ty(i, ok, names);
        let shared = match &t {
            SessionType::Ref(n) => match names.iter().find(|(_, v)| *v == n) {
                Some((j, _)) => matches!(&self.nodes[*j].shape, Shape::Shift(Shift::UpSL, _)),
                None => modality(self.env, &t) == Modality::Shared,
            },
            _ => false,
        };
        match (shared, t) {
            (true, SessionType::Ref(n)) => Payload::Shared(n),
            (_, t) => Payload::Linear(Box::new(t)),
        }
    }

    fn structure(&self, i: usize, ok: &[bool], names: &HashMap<usize, TypeName>) -> SessionType {
        use SessionType::*;
        let b = |j: usize| Box::new(self.ty(j, ok, names));
        match &self.nodes[i].shape {
            Shape::Witness(t) => t.clone(),
            Shape::Never => unreachable!("absent bounds are never built"),
            Shape::One => One,
            Shape::Tensor(p, c) => Tensor(self.payload(*p, ok, names), b(*c)),
            Shape::Lolli(p, c) => Lolli(self.payload(*p, ok, names), b(*c)),
            Shape::Val { input: true, base, cont } => ValIn(base.clone(), b(*cont)),
            Shape::Val { input: false, base, cont } => ValOut(base.clone(), b(*cont)),
            Shape::Shift(Shift::UpSL, c) => UpSL(b(*c)),
            Shape::Shift(Shift::DownSL, c) => DownSL(b(*c)),
            Shape::Shift(Shift::UpLL, c) => UpLL(b(*c)),
            Shape::Shift(Shift::DownLL, c) => DownLL(b(*c)),
            Shape::Choice { internal, common, copied, .. } => {
                let mut bs: BTreeMap<Label, SessionType> =
                    common.iter().filter(|(_, j)| ok[*j]).map(|(l, j)| (l.clone(), self.ty(*j, ok, names))).collect();
                bs.extend(copied.iter().cloned());
                if *internal {
                    IChoice(bs)
                } else {
                    EChoice(bs)
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_types;
    use crate::types::validate_env;

    fn r(n: &str) -> SessionType {
        SessionType::Ref(n.into())
    }

    const AUCTION: &str = "
type auction = up_s &{bid: +{ok: ?id. ?money. down_s auction, collecting: down_s auction},
                      collect: ?id. +{prize: !item. down_s auction, refund: !money. down_s auction, bidding: down_s auction}}
type bidding_shared = up_s &{bid: +{ok: ?id. ?money. down_s bidding_shared, collecting: down_s collecting_shared}}
type collecting_shared = up_s &{collect: ?id. +{prize: !item. down_s bidding_shared, refund: !money. down_s bidding_shared, bidding: down_s bidding_shared}}
type bidding = up_l &{bid: +{ok: ?id. ?money. down_l bidding, collecting: down_l collecting}}
type collecting = up_l &{collect: ?id. +{prize: !item. down_l bidding, refund: !money. down_l bidding, bidding: down_l bidding}}
type S = up_s &{a: down_s S}
type T = up_s &{a: down_s T, b: down_s U}
type U = up_s &{c: down_s U}
type Sab = up_s &{a: 1, b: 1}
type Sac = up_s &{a: 1, c: 1}
type Pa = up_s +{a: 1}
type Pb = up_s +{b: 1}
";

    #[test]
    fn esync_verdicts() {
        let env = parse_types(AUCTION).unwrap();
        assert!(validate_env(&env).is_empty());
        assert!(is_esync(&env, &r("auction")));
        assert!(!is_esync(&env, &r("bidding_shared")));
        assert!(!is_esync(&env, &r("collecting_shared")));
        assert!(is_esync(&env, &r("S")));
    }

    #[test]
    fn ignored_branch_is_subsynchronizing() {
        let env = parse_types(AUCTION).unwrap();
        assert!(!is_esync(&env, &r("T")));
        assert_eq!(is_ssync(&env, &r("T"), &r("S"), &Constraint::Top), Ok(true));
    }

    #[test]
    fn phased_view_is_subsynchronizing() {
        let env = parse_types(AUCTION).unwrap();
        assert_eq!(is_ssync(&env, &r("auction"), &r("bidding"), &Constraint::Top), Ok(true));
        assert_eq!(is_ssync(&env, &r("auction"), &r("collecting"), &Constraint::Top), Ok(true));
    }

    #[test]
    fn precondition_is_a_distinct_error() {
        let env = parse_types(AUCTION).unwrap();
        assert!(matches!(is_ssync(&env, &r("S"), &r("auction"), &Constraint::Top), Err(SyncError::NotSubtype { .. })));
    }

    #[test]
    fn meet_identities() {
        let env = parse_types(AUCTION).unwrap();
        let s = Constraint::Shared("S".into());
        assert_eq!(meet(&env, &Constraint::Top, &s).0, s);
        assert_eq!(meet(&env, &Constraint::Bot, &s).0, Constraint::Bot);
        assert_eq!(meet(&env, &s, &s).0, s);
    }

    #[test]
    fn meet_of_disjoint_internal_choices_is_bot() {
        let env = parse_types(AUCTION).unwrap();
        let (m, _) = meet(&env, &Constraint::Shared("Pa".into()), &Constraint::Shared("Pb".into()));
        assert_eq!(m, Constraint::Bot);
    }

    #[test]
    fn meet_of_external_choices_takes_the_union() {
        let env = parse_types(AUCTION).unwrap();
        let (m, out) = meet(&env, &Constraint::Shared("Sab".into()), &Constraint::Shared("Sac".into()));
        let Constraint::Shared(n) = m else { panic!("expected a shared meet") };
        let named = r(&n);
        let SessionType::UpSL(body) = expand(&out, &named) else { panic!() };
        let SessionType::EChoice(bs) = expand(&out, body) else { panic!() };
        assert_eq!(bs.keys().collect::<Vec<_>>(), ["a", "b", "c"]);
        assert!(validate_env(&out).is_empty());
        assert!(is_subtype(&out, &r(&n), &r("Sab")));
        assert!(is_subtype(&out, &r(&n), &r("Sac")));
    }
}

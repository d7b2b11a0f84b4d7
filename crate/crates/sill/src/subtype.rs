//! Coinductive subtyping across the shared and linear layers.
//!
//! [`is_subtype`] keeps a set of goals already entered. A revisited goal
//! succeeds (coinductive hypothesis). Every rule is a conjunction with no
//! alternatives, so a single failing goal refutes the root and no cached
//! success ever has to be withdrawn.
//!
//! [`bounded_oracle`] is an independent check: it enumerates the goal graph
//! naively and runs `k` rounds of Kleene iteration from "everything holds".

use std::collections::{BTreeMap, HashMap, HashSet};

use crate::types::{expand, reachable, Constraint, Payload, SessionType, TypeDefEnv};

pub type LinearCtx = BTreeMap<String, SessionType>;
pub type SharedCtx = BTreeMap<String, Constraint>;

/// Why a subtyping goal failed: the chain of goals from the root to the
/// first mismatch.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Refutation {
    pub path: Vec<(SessionType, SessionType)>,
    pub reason: String,
}

impl std::fmt::Display for Refutation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (depth, (a, b)) in self.path.iter().enumerate() {
            writeln!(f, "{:indent$}{a} <= {b}", "", indent = depth * 2)?;
        }
        write!(f, "{:indent$}fails: {}", "", self.reason, indent = self.path.len() * 2)
    }
}

pub fn is_subtype(env: &TypeDefEnv, a: &SessionType, b: &SessionType) -> bool {
    check_subtype(env, a, b).is_ok()
}

/// [`is_subtype`] with the failing derivation path on refusal.
pub fn check_subtype(env: &TypeDefEnv, a: &SessionType, b: &SessionType) -> Result<(), Refutation> {
    let mut c = SubChecker { env, entered: HashSet::new(), path: Vec::new() };
    c.check(a, b)
}

struct SubChecker<'a> {
    env: &'a TypeDefEnv,
    entered: HashSet<(SessionType, SessionType)>,
    path: Vec<(SessionType, SessionType)>,
}

impl SubChecker<'_> {
    fn fail(&self, reason: impl Into<String>) -> Result<(), Refutation> {
        Err(Refutation { path: self.path.clone(), reason: reason.into() })
    }

    fn check(&mut self, a: &SessionType, b: &SessionType) -> Result<(), Refutation> {
        if a == b {
            return Ok(());
        }
        let key = (a.clone(), b.clone());
        if !self.entered.insert(key.clone()) {
            return Ok(());
        }
        self.path.push(key);
        let r = self.step(a, b);
        self.path.pop();
        r
    }

    fn payload(&mut self, p: &Payload, q: &Payload) -> Result<(), Refutation> {
        self.check(&p.as_type(), &q.as_type())
    }

    fn step(&mut self, a: &SessionType, b: &SessionType) -> Result<(), Refutation> {
        use SessionType::*;
        let env = self.env;
        match (expand(env, a), expand(env, b)) {
            (One, One) => Ok(()),
            (Tensor(p, c), Tensor(q, d)) => {
                self.payload(p, q)?;
                self.check(c, d)
            }
            (Lolli(p, c), Lolli(q, d)) => {
                self.payload(q, p)?;
                self.check(c, d)
            }
            (IChoice(l), IChoice(r)) => {
                for (lab, t) in l {
                    match r.get(lab) {
                        Some(u) => self.check(t, u)?,
                        None => return self.fail(format!("label `{lab}` missing on the right of +{{}}")),
                    }
                }
                Ok(())
            }
            (EChoice(l), EChoice(r)) => {
                for (lab, u) in r {
                    match l.get(lab) {
                        Some(t) => self.check(t, u)?,
                        None => return self.fail(format!("label `{lab}` missing on the left of &{{}}")),
                    }
                }
                Ok(())
            }
            (UpSL(c), UpSL(d)) | (UpSL(c), UpLL(d)) | (UpLL(c), UpLL(d)) => self.check(c, d),
            (DownSL(c), DownSL(d)) | (DownSL(c), DownLL(d)) | (DownLL(c), DownLL(d)) => self.check(c, d),
            (ValIn(x, c), ValIn(y, d)) | (ValOut(x, c), ValOut(y, d)) => {
                if x != y {
                    return self.fail(format!("base types `{x}` and `{y}` differ"));
                }
                self.check(c, d)
            }
            (l, r) => self.fail(format!("constructor mismatch: {} vs {}", head(l), head(r))),
        }
    }
}

/// Short name of the top constructor, for messages.
pub fn head(t: &SessionType) -> &'static str {
    use SessionType::*;
    match t {
        One => "1",
        Tensor(..) => "*",
        Lolli(..) => "-o",
        IChoice(_) => "+{}",
        EChoice(_) => "&{}",
        UpSL(_) => "up_s",
        DownSL(_) => "down_s",
        UpLL(_) => "up_l",
        DownLL(_) => "down_l",
        ValIn(..) => "?",
        ValOut(..) => "!",
        Ref(_) => "name",
    }
}

/// Successor goals of a goal, or `None` when no rule applies.
fn rule_premises(env: &TypeDefEnv, a: &SessionType, b: &SessionType) -> Option<Vec<(SessionType, SessionType)>> {
    use SessionType::*;
    let pair = |x: &SessionType, y: &SessionType| (x.clone(), y.clone());
    match (expand(env, a), expand(env, b)) {
        (One, One) => Some(vec![]),
        (Tensor(p, c), Tensor(q, d)) => Some(vec![(p.as_type(), q.as_type()), pair(c, d)]),
        (Lolli(p, c), Lolli(q, d)) => Some(vec![(q.as_type(), p.as_type()), pair(c, d)]),
        (IChoice(l), IChoice(r)) => l.iter().map(|(lab, t)| r.get(lab).map(|u| pair(t, u))).collect(),
        (EChoice(l), EChoice(r)) => r.iter().map(|(lab, u)| l.get(lab).map(|t| pair(t, u))).collect(),
        (UpSL(c), UpSL(d)) | (UpSL(c), UpLL(d)) | (UpLL(c), UpLL(d)) => Some(vec![pair(c, d)]),
        (DownSL(c), DownSL(d)) | (DownSL(c), DownLL(d)) | (DownLL(c), DownLL(d)) => Some(vec![pair(c, d)]),
        (ValIn(x, c), ValIn(y, d)) | (ValOut(x, c), ValOut(y, d)) if x == y => Some(vec![pair(c, d)]),
        _ => None,
    }
}

/// Depth-`k` approximation of subtyping. Truncation counts as success.
pub fn bounded_oracle(env: &TypeDefEnv, a: &SessionType, b: &SessionType, k: usize) -> bool {
    // Enumerate the goal graph.
    let mut ids: HashMap<(SessionType, SessionType), usize> = HashMap::new();
    let mut premises: Vec<Option<Vec<usize>>> = Vec::new();
    let mut pending = vec![(a.clone(), b.clone())];
    ids.insert((a.clone(), b.clone()), 0);
    premises.push(None);
    while let Some(goal) = pending.pop() {
        let id = ids[&goal];
        let succ = rule_premises(env, &goal.0, &goal.1).map(|gs| {
            gs.into_iter()
                .map(|g| {
                    let next = ids.len();
                    *ids.entry(g.clone()).or_insert_with(|| {
                        pending.push(g);
                        next
                    })
                })
                .collect::<Vec<_>>()
        });
        if premises.len() < ids.len() {
            premises.resize(ids.len(), None);
        }
        premises[id] = succ;
    }
    // v_0 = everything holds; v_{j+1}(g) = rule(g, v_j).
    let mut value = vec![true; premises.len()];
    for _ in 0..k {
        let next: Vec<bool> = premises
            .iter()
            .map(|p| match p {
                None => false,
                Some(ps) => ps.iter().all(|&i| value[i]),
            })
            .collect();
        if next == value {
            break;
        }
        value = next;
    }
    value[0]
}

/// The depth at which [`bounded_oracle`] is exact: |reach(a)|·|reach(b)| + 1.
pub fn exact_bound(env: &TypeDefEnv, a: &SessionType, b: &SessionType) -> usize {
    reachable(env, a).len() * reachable(env, b).len() + 1
}

/// Constraint ordering ⊥ ≤ Shared(A) ≤ ⊤, with Shared against Shared by
/// subtyping.
pub fn constraint_leq(env: &TypeDefEnv, c: &Constraint, d: &Constraint) -> bool {
    match (c, d) {
        (Constraint::Bot, _) | (_, Constraint::Top) => true,
        (Constraint::Shared(a), Constraint::Shared(b)) => {
            is_subtype(env, &SessionType::Ref(a.clone()), &SessionType::Ref(b.clone()))
        }
        _ => false,
    }
}

/// A constraint compared against a session type: ⊥ is below everything, ⊤
/// below nothing.
pub fn constraint_leq_type(env: &TypeDefEnv, c: &Constraint, t: &SessionType) -> bool {
    match c {
        Constraint::Bot => true,
        Constraint::Top => false,
        Constraint::Shared(a) => is_subtype(env, &SessionType::Ref(a.clone()), t),
    }
}

/// Δ₁ ≤ Δ₂: same channels, pointwise subtyping.
pub fn ctx_leq(env: &TypeDefEnv, d1: &LinearCtx, d2: &LinearCtx) -> bool {
    d1.len() == d2.len() && d1.iter().all(|(x, a)| d2.get(x).is_some_and(|b| is_subtype(env, a, b)))
}

/// Γ₁ ⪯ Γ₂: Γ₁ may hold extra channels, common ones are pointwise smaller.
pub fn ctx_preceq(env: &TypeDefEnv, g1: &SharedCtx, g2: &SharedCtx) -> bool {
    g2.iter().all(|(x, d)| g1.get(x).is_some_and(|c| constraint_leq(env, c, d)))
}

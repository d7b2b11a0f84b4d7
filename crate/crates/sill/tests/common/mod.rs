//! Random type environments and corpus helpers shared by the integration
//! tests.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use sill::syntax::{parse, SourceFile};
use sill::types::{validate_env, Constraint, Modality, Payload, SessionType, TypeDefEnv};

pub const MAX_DEFS: usize = 6;
pub const MAX_BRANCHES: usize = 3;
pub const MAX_DEPTH: usize = 4;
const LABELS: [&str; 4] = ["a", "b", "c", "d"];

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

/// Corpus files in name order, with their text.
pub fn corpus_files() -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = std::fs::read_dir(corpus_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "sill"))
        .map(|p| (p.file_name().unwrap().to_str().unwrap().to_string(), std::fs::read_to_string(&p).unwrap()))
        .collect();
    out.sort();
    out
}

pub fn load(name: &str) -> SourceFile {
    let src = std::fs::read_to_string(corpus_dir().join(name)).unwrap();
    parse(&src).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn r(n: &str) -> SessionType {
    SessionType::Ref(n.to_string())
}

struct Gen<'a> {
    rng: &'a mut ChaCha8Rng,
    shared: Vec<String>,
    linear: Vec<String>,
    /// The shared definition being generated, favoured as a release target.
    current: Option<String>,
}

impl Gen<'_> {
    fn leaf(&mut self) -> SessionType {
        let mut options = vec![0];
        if !self.linear.is_empty() {
            options.push(1);
        }
        if !self.shared.is_empty() {
            options.extend([2, 2]);
        }
        match *options.choose(self.rng).unwrap() {
            0 => SessionType::One,
            1 => SessionType::Ref(self.linear.choose(self.rng).unwrap().clone()),
            _ => {
                let target = match &self.current {
                    Some(c) if self.rng.gen_bool(0.6) => c.clone(),
                    _ => self.shared.choose(self.rng).unwrap().clone(),
                };
                SessionType::DownSL(Box::new(SessionType::Ref(target)))
            }
        }
    }

    fn branches(&mut self, depth: usize) -> BTreeMap<String, SessionType> {
        let n = self.rng.gen_range(1..=MAX_BRANCHES);
        let mut labels = LABELS.to_vec();
        labels.shuffle(self.rng);
        labels.into_iter().take(n).map(|l| (l.to_string(), self.ty(depth - 1))).collect()
    }

    fn payload(&mut self) -> Payload {
        if !self.shared.is_empty() && self.rng.gen_bool(0.3) {
            return Payload::Shared(self.shared.choose(self.rng).unwrap().clone());
        }
        let saved = self.current.take();
        let t = match self.rng.gen_range(0..3) {
            0 => SessionType::One,
            1 if !self.linear.is_empty() => SessionType::Ref(self.linear.choose(self.rng).unwrap().clone()),
            _ => SessionType::ValOut("int".into(), Box::new(SessionType::One)),
        };
        self.current = saved;
        Payload::Linear(Box::new(t))
    }

    fn ty(&mut self, depth: usize) -> SessionType {
        if depth == 0 || self.rng.gen_bool(0.2) {
            return self.leaf();
        }
        match self.rng.gen_range(0..10) {
            0..=2 => SessionType::EChoice(self.branches(depth)),
            3..=4 => SessionType::IChoice(self.branches(depth)),
            5 => SessionType::Tensor(self.payload(), Box::new(self.ty(depth - 1))),
            6 => SessionType::Lolli(self.payload(), Box::new(self.ty(depth - 1))),
            7 => {
                let b = if self.rng.gen_bool(0.5) { "int" } else { "bool" };
                if self.rng.gen_bool(0.5) {
                    SessionType::ValIn(b.into(), Box::new(self.ty(depth - 1)))
                } else {
                    SessionType::ValOut(b.into(), Box::new(self.ty(depth - 1)))
                }
            }
            8 => SessionType::UpLL(Box::new(self.ty(depth - 1))),
            _ => SessionType::DownLL(Box::new(self.ty(depth - 1))),
        }
    }
}

/// Replaces the `k`-th choice node (preorder) with `f` applied to it.
fn edit_choice(
    t: &SessionType,
    k: &mut usize,
    f: &mut dyn FnMut(&SessionType) -> Option<SessionType>,
) -> Option<SessionType> {
    use SessionType::*;
    match t {
        IChoice(bs) | EChoice(bs) => {
            if *k == 0 {
                *k = usize::MAX;
                return f(t);
            }
            *k -= 1;
            for (l, b) in bs {
                if let Some(nb) = edit_choice(b, k, f) {
                    let mut bs2 = bs.clone();
                    bs2.insert(l.clone(), nb);
                    return Some(if matches!(t, IChoice(_)) { IChoice(bs2) } else { EChoice(bs2) });
                }
            }
            None
        }
        Tensor(p, c) => edit_choice(c, k, f).map(|c| Tensor(p.clone(), Box::new(c))),
        Lolli(p, c) => edit_choice(c, k, f).map(|c| Lolli(p.clone(), Box::new(c))),
        UpSL(c) => edit_choice(c, k, f).map(|c| UpSL(Box::new(c))),
        DownLL(c) => edit_choice(c, k, f).map(|c| DownLL(Box::new(c))),
        UpLL(c) => edit_choice(c, k, f).map(|c| UpLL(Box::new(c))),
        ValIn(b, c) => edit_choice(c, k, f).map(|c| ValIn(b.clone(), Box::new(c))),
        ValOut(b, c) => edit_choice(c, k, f).map(|c| ValOut(b.clone(), Box::new(c))),
        One | DownSL(_) | Ref(_) => None,
    }
}

fn count_choices(t: &SessionType) -> usize {
    use SessionType::*;
    match t {
        IChoice(bs) | EChoice(bs) => 1 + bs.values().map(count_choices).sum::<usize>(),
        Tensor(_, c) | Lolli(_, c) | UpSL(c) | UpLL(c) | DownLL(c) | ValIn(_, c) | ValOut(_, c) => count_choices(c),
        One | DownSL(_) | Ref(_) => 0,
    }
}

/// A variant of `t` one step up (`bigger`) or down in the subtype order:
/// a dropped or added branch at one choice node.
fn mutate(rng: &mut ChaCha8Rng, t: &SessionType, bigger: bool) -> Option<SessionType> {
    let n = count_choices(t);
    if n == 0 {
        return None;
    }
    let mut k = rng.gen_range(0..n);
    let drop_label = rng.gen_range(0..MAX_BRANCHES);
    let mut f = |c: &SessionType| -> Option<SessionType> {
        let (is_internal, bs) = match c {
            SessionType::IChoice(bs) => (true, bs),
            SessionType::EChoice(bs) => (false, bs),
            _ => unreachable!(),
        };
        let mut bs = bs.clone();
        // Adding to ⊕ or dropping from & goes up; the converse goes down.
        if is_internal == bigger {
            if bs.len() >= MAX_BRANCHES {
                return None;
            }
            let l = LABELS.iter().find(|l| !bs.contains_key(**l))?;
            bs.insert(l.to_string(), SessionType::One);
        } else {
            if bs.len() < 2 {
                return None;
            }
            let l = bs.keys().nth(drop_label % bs.len()).unwrap().clone();
            bs.remove(&l);
        }
        Some(if is_internal { SessionType::IChoice(bs) } else { SessionType::EChoice(bs) })
    };
    edit_choice(t, &mut k, &mut f)
}

/// A validated environment of at most [`MAX_DEFS`] definitions: up to four
/// generated ones plus variants one step above or below some of them.
pub fn random_env(rng: &mut ChaCha8Rng) -> TypeDefEnv {
    loop {
        let n = rng.gen_range(1..=4);
        let names: Vec<String> = (0..n).map(|i| format!("t{i}")).collect();
        let shared: Vec<String> = names.iter().filter(|_| rng.gen_bool(0.5)).cloned().collect();
        let linear: Vec<String> = names.iter().filter(|x| !shared.contains(x)).cloned().collect();
        let mut env = TypeDefEnv::new();
        for name in &names {
            let is_shared = shared.contains(name);
            let mut g = Gen {
                rng: &mut *rng,
                shared: shared.clone(),
                linear: linear.clone(),
                current: is_shared.then(|| name.clone()),
            };
            if is_shared {
                let body = g.ty(MAX_DEPTH - 1);
                env.insert_with(name.clone(), Modality::Shared, SessionType::UpSL(Box::new(body)));
            } else {
                let body = g.ty(MAX_DEPTH);
                env.insert_with(name.clone(), Modality::Linear, body);
            }
        }
        let extra = rng.gen_range(0..=MAX_DEFS - n);
        for i in 0..extra {
            let base = names.choose(rng).unwrap().clone();
            let body = env.get(&base).unwrap().body.clone();
            let bigger = rng.gen_bool(0.5);
            if let Some(m) = mutate(rng, &body, bigger) {
                let modality = env.get(&base).unwrap().modality;
                env.insert_with(format!("{base}_{}{i}", if bigger { "up" } else { "down" }), modality, m);
            }
        }
        if validate_env(&env).is_empty() {
            return env;
        }
    }
}

/// Every definition name as a type.
pub fn names(env: &TypeDefEnv) -> Vec<SessionType> {
    env.defs.keys().map(|n| r(n)).collect()
}

pub fn shared_names(env: &TypeDefEnv) -> Vec<String> {
    env.defs.iter().filter(|(_, d)| d.modality == Modality::Shared).map(|(n, _)| n.clone()).collect()
}

/// ⊤, ⊥ and every shared name.
pub fn constraints(env: &TypeDefEnv) -> Vec<Constraint> {
    let mut out = vec![Constraint::Top, Constraint::Bot];
    out.extend(shared_names(env).into_iter().map(Constraint::Shared));
    out
}

/// Corpus files that have a `system` block, parsed.
pub fn programs_with_system() -> Vec<(String, SourceFile)> {
    corpus_files()
        .into_iter()
        .filter_map(|(name, src)| {
            let sf = parse(&src).unwrap();
            sf.system.is_some().then_some((name, sf))
        })
        .collect()
}

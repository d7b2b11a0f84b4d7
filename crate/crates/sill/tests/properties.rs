//! Algebraic properties of subtyping and meet, and runtime properties of the
//! corpus, on sampled inputs.

mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{constraints, load, names, programs_with_system, random_env, shared_names};
use sill::runtime::{initial_machine, run, trace_jsonl, Policy, RunOptions, RunStatus};
use sill::subtype::{constraint_leq, is_subtype};
use sill::synchro::{is_esync, is_ssync, meet};
use sill::syntax::format::format_file;
use sill::syntax::parse;
use sill::typecheck::check_signature;
use sill::types::{Constraint, SessionType, TypeDefEnv};

fn env_for(seed: u64) -> TypeDefEnv {
    random_env(&mut ChaCha8Rng::seed_from_u64(seed))
}

fn equivalent(env: &TypeDefEnv, c: &Constraint, d: &Constraint) -> bool {
    constraint_leq(env, c, d) && constraint_leq(env, d, c)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn subtyping_is_reflexive(seed in any::<u64>()) {
        let env = env_for(seed);
        for a in names(&env) {
            prop_assert!(is_subtype(&env, &a, &a), "{a}");
        }
    }

    #[test]
    fn subtyping_is_transitive(seed in any::<u64>()) {
        let env = env_for(seed);
        let ns = names(&env);
        for a in &ns {
            for b in ns.iter().filter(|b| is_subtype(&env, a, b)) {
                for c in ns.iter().filter(|c| is_subtype(&env, b, c)) {
                    prop_assert!(is_subtype(&env, a, c), "{a} <= {b} <= {c}");
                }
            }
        }
    }

    #[test]
    fn meet_is_commutative_and_idempotent(seed in any::<u64>()) {
        let env = env_for(seed);
        for c in constraints(&env) {
            let (m, ext) = meet(&env, &c, &c);
            prop_assert!(equivalent(&ext, &m, &c), "{c} /\\ {c} = {m}");
            for d in constraints(&env) {
                let (cd, e1) = meet(&env, &c, &d);
                let (dc, e2) = meet(&e1, &d, &c);
                prop_assert!(equivalent(&e2, &cd, &dc), "{c} /\\ {d}: {cd} vs {dc}");
            }
        }
    }

    #[test]
    fn esync_is_ssync_with_itself(seed in any::<u64>()) {
        let env = env_for(seed);
        for n in shared_names(&env) {
            let t = SessionType::Ref(n);
            prop_assert_eq!(is_esync(&env, &t), is_ssync(&env, &t, &t, &Constraint::Top) == Ok(true));
        }
    }

    #[test]
    fn ssync_demands_a_subtype_pair(seed in any::<u64>()) {
        let env = env_for(seed);
        for a in names(&env) {
            for b in names(&env) {
                let r = is_ssync(&env, &a, &b, &Constraint::Top);
                prop_assert_eq!(r.is_err(), !is_subtype(&env, &a, &b), "{} {}", a, b);
            }
        }
    }

    #[test]
    fn monitor_does_not_change_the_schedule(file in 0usize..6, seed in any::<u64>()) {
        let progs = programs_with_system();
        let (name, sf) = &progs[file % progs.len()];
        let sys = sf.system.as_ref().unwrap();
        let m = initial_machine(&sf.types, &sf.procs, Some(sys), &sys.main).unwrap();
        let plain = run(m.clone(), RunOptions { policy: Policy::Random(seed), max_steps: 10_000, monitor: false });
        let checked = run(m, RunOptions { policy: Policy::Random(seed), max_steps: 10_000, monitor: true });
        prop_assert_eq!(trace_jsonl(&plain.trace), trace_jsonl(&checked.trace), "{}", name);
        prop_assert!(!matches!(checked.status, RunStatus::MonitorViolation(_)), "{}: {}", name, checked.status);
    }
}

/// Lowering a shared parameter to a subtype, either a declared one or a
/// meet with another shared type, keeps the definition well typed.
#[test]
fn shared_parameters_can_be_narrowed() {
    let mut narrowed = 0;
    for (name, sf) in programs_with_system() {
        let shared = shared_names(&sf.types);
        for (pname, def) in &sf.procs.defs {
            for (i, p) in def.params.iter().enumerate().filter(|(_, p)| p.shared) {
                let Some(pn) = sill::types::shared_name(&sf.types, &p.ty) else { continue };
                for n in &shared {
                    let (m, env) = meet(&sf.types, &Constraint::Shared(pn.clone()), &Constraint::Shared(n.clone()));
                    let Constraint::Shared(lower) = m else { continue };
                    if lower == pn {
                        continue;
                    }
                    let mut sig = sf.procs.clone();
                    sig.defs[pname].params[i].ty = SessionType::Ref(lower.clone());
                    let errs: Vec<_> =
                        check_signature(&env, &sig).into_iter().filter(|e| e.def.as_deref() == Some(pname)).collect();
                    assert!(errs.is_empty(), "{name} {pname}: {} narrowed to {lower}: {errs:?}", p.chan);
                    narrowed += 1;
                }
            }
        }
    }
    assert!(narrowed >= 3, "only {narrowed} narrowings exercised");
}

#[test]
fn corpus_round_trips_through_format() {
    for (name, src) in common::corpus_files() {
        let sf = parse(&src).unwrap();
        let text = format_file(&sf);
        assert_eq!(parse(&text).unwrap(), sf, "{name}");
        assert_eq!(format_file(&parse(&text).unwrap()), text, "{name}");
    }
    assert!(load("queue.sill").system.is_some());
}

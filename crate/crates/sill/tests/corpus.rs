//! Every example program typechecks and halts in the expected state under
//! the monitor.

mod common;

use common::{corpus_files, load};
use sill::diag::check_source;
use sill::runtime::{initial_machine, run, Policy, RunOptions, RunStatus};

fn run_file(name: &str, seed: u64) -> RunStatus {
    let sf = load(name);
    let m = sf.system.as_ref().unwrap();
    let machine = initial_machine(&sf.types, &sf.procs, Some(m), &m.main).unwrap_or_else(|e| panic!("{name}: {e:?}"));
    run(machine, RunOptions { policy: Policy::Random(seed), max_steps: 10_000, monitor: true }).status
}

#[test]
fn corpus_typechecks() {
    for (name, src) in corpus_files() {
        if let Err(ds) = check_source(&src) {
            panic!("{name}: {ds:?}");
        }
    }
}

#[test]
fn corpus_names_the_expected_types() {
    let expect = [
        ("queue.sill", &["queue", "shared_queue", "producer", "consumer"][..]),
        ("linear_auction.sill", &["bidding", "collecting"]),
        ("auction.sill", &["auction", "bidding_shared", "collecting_shared"]),
        ("phased_auction.sill", &["auction", "bidding_ll", "collecting_ll"]),
        ("dd.sill", &["dd", "dd_start", "dd_acq"]),
    ];
    for (file, types) in expect {
        let env = load(file).types;
        for t in types {
            assert!(env.contains(t), "{file} lacks {t}");
        }
    }
}

#[test]
fn queue_terminates_poised() {
    for seed in 0..5 {
        assert_eq!(run_file("queue.sill", seed), RunStatus::AllPoised, "seed {seed}");
    }
}

#[test]
fn double_acquire_gets_stuck() {
    for seed in 0..5 {
        let st = run_file("double_acquire.sill", seed);
        assert!(matches!(st, RunStatus::StuckAcquire(_)), "seed {seed}: {st}");
    }
}

#[test]
fn other_programs_halt_poised() {
    for name in ["linear_auction.sill", "auction.sill", "phased_auction.sill", "dd.sill"] {
        for seed in 0..5 {
            let st = run_file(name, seed);
            assert_eq!(st, RunStatus::AllPoised, "{name} seed {seed}: {st}");
        }
    }
}

#[test]
fn fifo_policy_is_deterministic_and_halts() {
    for name in ["queue.sill", "auction.sill", "dd.sill"] {
        let sf = load(name);
        let m = sf.system.as_ref().unwrap();
        let machine = initial_machine(&sf.types, &sf.procs, Some(m), &m.main).unwrap();
        let opts = RunOptions { policy: Policy::Fifo, max_steps: 10_000, monitor: true };
        let a = run(machine.clone(), opts);
        let b = run(machine, opts);
        assert_eq!(a.trace, b.trace, "{name}");
        assert_eq!(a.status, RunStatus::AllPoised, "{name}");
    }
}

/// A client that never takes the `b` branch makes the pair subsynchronizing,
/// unless the provider releases back at its own type and so brings `b` back.
#[test]
fn ignored_branch_verdicts() {
    use common::r;
    use sill::synchro::{is_esync, is_ssync};
    use sill::types::Constraint;
    let env = load("ignored_branch.sill").types;
    assert_eq!(is_ssync(&env, &r("wide"), &r("narrow"), &Constraint::Top), Ok(true));
    assert!(!is_esync(&env, &r("wide")));
    assert!(is_esync(&env, &r("stable")));
    assert_eq!(is_ssync(&env, &r("self_wide"), &r("self_narrow"), &Constraint::Top), Ok(false));
}

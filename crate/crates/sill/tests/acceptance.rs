//! Acceptance criteria 1 to 9. Prints one PASS/FAIL line per criterion.

mod common;

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{constraints, corpus_files, load, names, programs_with_system, r, random_env, shared_names};
use sill::process::Renaming;
use sill::runtime::{initial_machine, monitor_check, run, trace_jsonl, Policy, Rule, RunOptions, RunStatus};
use sill::subtype::{bounded_oracle, exact_bound, is_subtype};
use sill::synchro::{is_esync, is_ssync, meet};
use sill::syntax::format::format_file;
use sill::syntax::parse;
use sill::types::{unfold, Constraint, Modality, SessionType, TypeDefEnv};

struct Outcome {
    pass: bool,
    /// The criterion fails, and the failure has been checked to be exactly
    /// the refutation recorded in the README.
    known_refutation: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, known_refutation: false, detail: detail.into() }
}

/// `, first: <item>` for a non-empty list, otherwise nothing.
fn first(items: &[String]) -> String {
    items.first().map(|s| format!(", first: {s}")).unwrap_or_default()
}

fn oracle(env: &TypeDefEnv, a: &SessionType, b: &SessionType) -> bool {
    bounded_oracle(env, a, b, exact_bound(env, a, b))
}

/// Constraint order decided with the bounded oracle on the shared names.
fn oracle_leq(env: &TypeDefEnv, c: &Constraint, d: &Constraint) -> bool {
    match (c, d) {
        (Constraint::Bot, _) | (_, Constraint::Top) => true,
        (Constraint::Shared(a), Constraint::Shared(b)) => oracle(env, &r(a), &r(b)),
        _ => false,
    }
}

fn ssync(env: &TypeDefEnv, a: &SessionType, b: &SessionType, d: &Constraint) -> bool {
    is_ssync(env, a, b, d).unwrap_or_else(|e| panic!("ssync precondition: {e}"))
}

fn criterion_1() -> Outcome {
    let cases = [
        ("queue.sill", "shared_queue", "producer"),
        ("queue.sill", "shared_queue", "consumer"),
        ("phased_auction.sill", "auction", "bidding_ll"),
        ("phased_auction.sill", "auction", "collecting_ll"),
        ("dd.sill", "dd", "dd_start"),
    ];
    let mut bad = Vec::new();
    for (file, a, b) in cases {
        let env = load(file).types;
        for (x, y, want) in [(a, b, true), (b, a, false)] {
            let got = is_subtype(&env, &r(x), &r(y));
            let orc = oracle(&env, &r(x), &r(y));
            if got != want || orc != want {
                bad.push(format!("{x} <= {y}: is_subtype {got}, oracle {orc}, expected {want}"));
            }
        }
    }
    outcome(bad.is_empty(), if bad.is_empty() { "5 verdicts and their 5 reversals".into() } else { bad.join("; ") })
}

fn criterion_2() -> Outcome {
    let env = load("auction.sill").types;
    let ign = load("ignored_branch.sill").types;
    let checks = [
        ("esync(auction)", is_esync(&env, &r("auction")), true),
        ("esync(bidding_shared)", is_esync(&env, &r("bidding_shared")), false),
        ("esync(collecting_shared)", is_esync(&env, &r("collecting_shared")), false),
        ("esync(wide)", is_esync(&ign, &r("wide")), false),
        ("ssync(wide, narrow, top)", ssync(&ign, &r("wide"), &r("narrow"), &Constraint::Top), true),
    ];
    let bad: Vec<String> =
        checks.iter().filter(|(_, got, want)| got != want).map(|(n, got, _)| format!("{n} = {got}")).collect();
    outcome(bad.is_empty(), if bad.is_empty() { "all 5 verdicts as expected".into() } else { bad.join("; ") })
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut pairs, mut positive, mut disagree) = (0usize, 0usize, Vec::new());
    for _ in 0..500 {
        let env = random_env(&mut rng);
        for a in names(&env) {
            for b in names(&env) {
                let (s, o) = (is_subtype(&env, &a, &b), oracle(&env, &a, &b));
                pairs += 1;
                positive += usize::from(s);
                if s != o {
                    disagree.push(format!("{a} <= {b}: is_subtype {s}, oracle {o}"));
                }
            }
        }
    }
    outcome(
        disagree.is_empty(),
        format!(
            "500 environments, {pairs} pairs ({positive} subtypes), {} disagreements{}",
            disagree.len(),
            first(&disagree)
        ),
    )
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut pairs, mut shared_pairs, mut proper, mut bad) = (0usize, 0usize, 0usize, Vec::new());
    let mut envs = 0;
    while shared_pairs < 200 || envs < 200 {
        envs += 1;
        let env = random_env(&mut rng);
        let cs = constraints(&env);
        for c in &cs {
            for d in &cs {
                let (m, ext) = meet(&env, c, d);
                pairs += 1;
                if matches!((c, d), (Constraint::Shared(_), Constraint::Shared(_))) {
                    shared_pairs += 1;
                    if let Constraint::Shared(n) = &m {
                        proper += usize::from(!env.contains(n));
                    }
                }
                if !oracle_leq(&ext, &m, c) || !oracle_leq(&ext, &m, d) {
                    bad.push(format!("{c} /\\ {d} = {m} is not a lower bound"));
                }
                for e in &cs {
                    if oracle_leq(&ext, e, c) && oracle_leq(&ext, e, d) && !oracle_leq(&ext, e, &m) {
                        bad.push(format!("{e} is below {c} and {d} but not below {c} /\\ {d} = {m}"));
                    }
                }
            }
        }
    }
    outcome(
        bad.is_empty(),
        format!(
            "{pairs} pairs in {envs} environments, {shared_pairs} between shared types ({proper} needing a new definition), {} counterexamples{}",
            bad.len(),
            first(&bad)
        ),
    )
}

/// Linear types to sample the lemmas over: linear names and the bodies
/// under `up_s` of shared names.
fn linear_types(env: &TypeDefEnv) -> Vec<SessionType> {
    let mut out = Vec::new();
    for (n, d) in &env.defs {
        match d.modality {
            Modality::Linear => out.push(r(n)),
            Modality::Shared => {
                if let Ok(SessionType::UpSL(a)) = unfold(env, &r(n)) {
                    out.push((**a).clone());
                }
            }
        }
    }
    out
}

/// Shared types at which `t` can release before it is acquired again.
fn release_targets(env: &TypeDefEnv, t: &SessionType) -> Vec<String> {
    let mut seen = std::collections::BTreeSet::new();
    let mut stack = vec![t.clone()];
    let mut out = Vec::new();
    while let Some(u) = stack.pop() {
        if !seen.insert(u.clone()) {
            continue;
        }
        match unfold(env, &u).unwrap() {
            SessionType::DownSL(n) => out.push(sill::types::shared_name(env, n).unwrap()),
            SessionType::One | SessionType::UpSL(_) => {}
            SessionType::Tensor(_, c)
            | SessionType::Lolli(_, c)
            | SessionType::UpLL(c)
            | SessionType::DownLL(c)
            | SessionType::ValIn(_, c)
            | SessionType::ValOut(_, c) => stack.push((**c).clone()),
            SessionType::IChoice(bs) | SessionType::EChoice(bs) => stack.extend(bs.values().cloned()),
            SessionType::Ref(_) => unreachable!("unfolded"),
        }
    }
    out
}

struct LemmaStats {
    instances: usize,
    counterexamples: Vec<String>,
}

impl LemmaStats {
    fn new() -> Self {
        Self { instances: 0, counterexamples: Vec::new() }
    }
    fn line(&self, name: &str) -> String {
        format!(
            "{name}: {} instances, {} counterexamples{}",
            self.instances,
            self.counterexamples.len(),
            first(&self.counterexamples)
        )
    }
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut bigger, mut smaller_hat, mut meet_l) = (LemmaStats::new(), LemmaStats::new(), LemmaStats::new());
    // Instances whose provider type never releases to the shared layer.
    let mut release_free = LemmaStats::new();
    // Counterexamples not explained by a release `down_s S` with S not
    // below the smaller constraint.
    let mut unexplained: Vec<String> = Vec::new();
    let mut envs = 0;
    while envs < 300 || bigger.instances < 100 || smaller_hat.instances < 100 || meet_l.instances < 100 {
        envs += 1;
        let env = random_env(&mut rng);
        let cs = constraints(&env);
        let shared: Vec<SessionType> = shared_names(&env).iter().map(|n| r(n)).collect();
        let lin = linear_types(&env);
        for group in [&shared, &lin] {
            for a in group.iter() {
                for b in group.iter().filter(|b| is_subtype(&env, a, b)) {
                    for d in &cs {
                        if !ssync(&env, a, b, d) {
                            continue;
                        }
                        for c in group.iter().filter(|c| is_subtype(&env, b, c)) {
                            bigger.instances += 1;
                            if !ssync(&env, a, c, d) {
                                bigger.counterexamples.push(format!("A={a} B={b} C={c} D={d}"));
                            }
                        }
                    }
                }
            }
        }
        for a in &lin {
            for b in lin.iter().filter(|b| is_subtype(&env, a, b)) {
                let holds: Vec<&Constraint> = cs.iter().filter(|c| ssync(&env, a, b, c)).collect();
                let releases = release_targets(&env, a);
                for c in &holds {
                    for d in cs.iter().filter(|d| d != c && oracle_leq(&env, d, c)) {
                        smaller_hat.instances += 1;
                        if releases.is_empty() {
                            release_free.instances += 1;
                        }
                        if !ssync(&env, a, b, d) {
                            smaller_hat.counterexamples.push(format!("A={a} B={b} C={c} D={d}"));
                            let premise_broken =
                                releases.iter().any(|n| !oracle_leq(&env, &Constraint::Shared(n.clone()), d));
                            if !premise_broken {
                                unexplained.push(format!("A={a} B={b} C={c} D={d}"));
                            }
                            if releases.is_empty() {
                                release_free.counterexamples.push(format!("A={a} B={b} C={c} D={d}"));
                            }
                        }
                    }
                    for d in holds.iter().filter(|d| d != &c) {
                        meet_l.instances += 1;
                        let (m, ext) = meet(&env, c, d);
                        if !ssync(&ext, a, b, &m) {
                            meet_l.counterexamples.push(format!("A={a} B={b} C={c} D={d} meet={m}"));
                        }
                    }
                }
            }
        }
    }
    let all = [&bigger, &smaller_hat, &meet_l];
    let pass = all.iter().all(|s| s.instances >= 100 && s.counterexamples.is_empty());
    let others_hold = [&bigger, &meet_l].iter().all(|s| s.instances >= 100 && s.counterexamples.is_empty());
    let known_refutation = !pass
        && others_hold
        && smaller_hat.instances >= 100
        && unexplained.is_empty()
        && release_free.counterexamples.is_empty();
    Outcome {
        pass,
        known_refutation,
        detail: format!(
            "{envs} environments; {}; {}; {}; every dsync-smaller-hat counterexample releases at a type not below the smaller constraint: {}; {}",
            bigger.line("dsync-bigger"),
            smaller_hat.line("dsync-smaller-hat"),
            meet_l.line("dsync-meet"),
            unexplained.is_empty(),
            release_free.line("dsync-smaller-hat without releases"),
        ),
    }
}

struct RunStats {
    runs: usize,
    violations: Vec<String>,
    bad_halts: Vec<String>,
    double_acquire_stuck: usize,
    queue_poised: usize,
    secs: f64,
}

fn run_corpus() -> RunStats {
    let start = Instant::now();
    let mut st = RunStats {
        runs: 0,
        violations: vec![],
        bad_halts: vec![],
        double_acquire_stuck: 0,
        queue_poised: 0,
        secs: 0.0,
    };
    for (name, sf) in programs_with_system() {
        let sys = sf.system.as_ref().unwrap();
        let m0 = initial_machine(&sf.types, &sf.procs, Some(sys), &sys.main).unwrap();
        for seed in 0..100 {
            let res = run(m0.clone(), RunOptions { policy: Policy::Random(seed), max_steps: 10_000, monitor: true });
            st.runs += 1;
            match &res.status {
                RunStatus::MonitorViolation(v) => st.violations.push(format!("{name} seed {seed}: {v}")),
                RunStatus::MaxStepsExceeded => st.bad_halts.push(format!("{name} seed {seed}: step budget exhausted")),
                RunStatus::AllPoised if name == "queue.sill" => st.queue_poised += 1,
                RunStatus::StuckAcquire(_) if name == "double_acquire.sill" => st.double_acquire_stuck += 1,
                _ => {}
            }
        }
    }
    st.secs = start.elapsed().as_secs_f64();
    st
}

fn criterion_6(st: &RunStats) -> Outcome {
    outcome(
        st.violations.is_empty() && st.secs < 60.0,
        format!(
            "{} runs in {:.1} s, {} monitor violations{}",
            st.runs,
            st.secs,
            st.violations.len(),
            first(&st.violations)
        ),
    )
}

fn criterion_7(st: &RunStats) -> Outcome {
    let pass =
        st.violations.is_empty() && st.bad_halts.is_empty() && st.double_acquire_stuck == 100 && st.queue_poised == 100;
    outcome(
        pass,
        format!(
            "double_acquire StuckAcquire {}/100, queue AllPoised {}/100, {} other halts{}",
            st.double_acquire_stuck,
            st.queue_poised,
            st.bad_halts.len(),
            first(&st.bad_halts)
        ),
    )
}

fn criterion_8() -> Outcome {
    let mut bad = Vec::new();
    let mut compared = 0;
    for (name, sf) in programs_with_system() {
        let sys = sf.system.as_ref().unwrap();
        for seed in 0..20 {
            let go = || {
                let m = initial_machine(&sf.types, &sf.procs, Some(sys), &sys.main).unwrap();
                trace_jsonl(
                    &run(m, RunOptions { policy: Policy::Random(seed), max_steps: 10_000, monitor: false }).trace,
                )
            };
            compared += 1;
            if go() != go() {
                bad.push(format!("{name} seed {seed}: traces differ"));
            }
        }
    }
    let files = corpus_files();
    for (name, src) in &files {
        let sf = parse(src).unwrap();
        let text = format_file(&sf);
        match parse(&text) {
            Ok(sf2) if sf2 == sf && format_file(&sf2) == text => {}
            Ok(_) => bad.push(format!("{name}: format is not a fixed point")),
            Err(e) => bad.push(format!("{name}: formatted text does not parse: {e}")),
        }
    }
    outcome(
        bad.is_empty(),
        format!("{compared} trace pairs, {} files round-tripped, {} problems{}", files.len(), bad.len(), first(&bad)),
    )
}

/// Runs the auction until a provider detaches, then replaces the released
/// shared process with one that offers `collecting_shared`.
fn criterion_9() -> Outcome {
    let sf = load("auction.sill");
    let sys = sf.system.as_ref().unwrap();
    let mut m = initial_machine(&sf.types, &sf.procs, Some(sys), &sys.main).unwrap();
    for _ in 0..1000 {
        let steps = m.enabled_steps();
        let Some(step) = steps.iter().find(|s| s.rule == Rule::DownSL).or(steps.first()).cloned() else { break };
        let gamma_before = m.ann.gamma.clone();
        let mut ev = m.apply_step(&step);
        if step.rule != Rule::DownSL {
            continue;
        }
        if let Err(v) = monitor_check(&gamma_before, &ev, &m) {
            return outcome(false, format!("the unmodified step was rejected: {v}"));
        }
        let Some(b) = ev.produced.iter().find_map(|p| match p {
            sill::runtime::Pred::ProcS(b, _) => Some(b.clone()),
            _ => None,
        }) else {
            return outcome(false, "the detach produced no shared process");
        };
        let def = m.sig.get("CollectOnly").unwrap().clone();
        let body = sill::process::substitute(&def.body, &Renaming::shared(&def.offer, &b));
        m.cfg.shared.insert(b.clone(), sill::runtime::SharedPred::Proc(body.clone()));
        m.ann.provides.insert(b.clone(), r("collecting_shared"));
        m.ann.gamma.insert(b.clone(), Constraint::Shared("collecting_shared".into()));
        ev.produced.retain(|p| !matches!(p, sill::runtime::Pred::ProcS(..)));
        ev.produced.push(sill::runtime::Pred::ProcS(b.clone(), body));
        return match monitor_check(&gamma_before, &ev, &m) {
            Err(v) => outcome(true, format!("MonitorViolation {v}")),
            Ok(()) => outcome(false, "the broken step was accepted"),
        };
    }
    outcome(false, "no D-↓SL step was reached")
}

#[test]
fn acceptance() {
    let st = run_corpus();
    let results = [
        criterion_1(),
        criterion_2(),
        criterion_3(),
        criterion_4(),
        criterion_5(),
        criterion_6(&st),
        criterion_7(&st),
        criterion_8(),
        criterion_9(),
    ];
    for (i, o) in results.iter().enumerate() {
        let verdict = match (o.pass, o.known_refutation) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known refutation)",
            (false, false) => "FAIL",
        };
        println!("criterion {}: {verdict} ({})", i + 1, o.detail);
    }
    // A criterion whose failure is the recorded refutation does not fail
    // the suite; its line above still reads FAIL.
    let failed: Vec<usize> =
        results.iter().enumerate().filter(|(_, o)| !o.pass && !o.known_refutation).map(|(i, _)| i + 1).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

//! Configuration typing and the preservation monitor.

use std::collections::BTreeSet;
use std::fmt;

use super::step::{rename_gamma, StepEvent};
use super::{linear_uses, Annotations, Config, LinearPred, Machine, SharedPred};
use crate::process::{Chan, Signature};
use crate::subtype::{constraint_leq, constraint_leq_type, ctx_preceq, LinearCtx, SharedCtx};
use crate::synchro::is_ssync;
use crate::typecheck::{check_linear, check_shared};
use crate::types::{Constraint, SessionType, TypeDefEnv};

/// A failed premise of the configuration typing rules.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    /// `WF`, `Ω`, `Λ3`, `Θ2`, `Θ3` or `Γ⪯`.
    pub rule: &'static str,
    pub chan: Option<Chan>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.chan {
            Some(c) => write!(f, "[{}] at `{c}`: {}", self.rule, self.message),
            None => write!(f, "[{}] {}", self.rule, self.message),
        }
    }
}

/// The monitor's verdict on a step that broke typing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    /// Name of the rule whose application was checked.
    pub step_rule: String,
    pub errors: Vec<ConfigError>,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "after {}: ", self.step_rule)?;
        for (i, e) in self.errors.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

fn cerr(rule: &'static str, chan: &str, message: impl Into<String>) -> ConfigError {
    ConfigError { rule, chan: Some(chan.to_string()), message: message.into() }
}

fn ssync_ok(env: &TypeDefEnv, provides: &SessionType, view: &SessionType, c: &Constraint) -> Result<(), String> {
    match is_ssync(env, provides, view, c) {
        Ok(true) => Ok(()),
        Ok(false) => Err(format!("`{provides}` is not subsynchronizing with `{view}` under constraint `{c}`")),
        Err(e) => Err(e.to_string()),
    }
}

/// Diagnostics for `Γ ⊨ Λ; Θ :: Δ` with Δ the root channel at its view.
pub fn typecheck_config(env: &TypeDefEnv, sig: &Signature, ann: &Annotations, cfg: &Config) -> Vec<ConfigError> {
    let mut delta = LinearCtx::new();
    if !cfg.linear.is_empty() {
        if let Some(v) = ann.views.get(&ann.root) {
            delta.insert(ann.root.clone(), v.clone());
        }
    }
    typecheck_config_at(env, sig, ann, cfg, &delta)
}

/// Diagnostics for `Γ ⊨ Λ; Θ :: Δ`; empty iff derivable.
pub fn typecheck_config_at(
    env: &TypeDefEnv,
    sig: &Signature,
    ann: &Annotations,
    cfg: &Config,
    delta: &LinearCtx,
) -> Vec<ConfigError> {
    let mut errs: Vec<ConfigError> =
        cfg.well_formedness().into_iter().map(|m| ConfigError { rule: "WF", chan: None, message: m }).collect();
    let g = &ann.gamma;

    // Λ :: Γ, so Λ and Γ cover the same channels.
    for c in cfg.shared.keys() {
        if !g.contains_key(c) {
            errs.push(cerr("Ω", c, "shared predicate without an entry in Γ"));
        }
    }
    for c in g.keys() {
        if !cfg.shared.contains_key(c) {
            errs.push(cerr("Ω", c, "Γ entry without a shared predicate"));
        }
    }
    for (a, p) in &cfg.shared {
        let SharedPred::Proc(t) = p else { continue };
        let Some(Constraint::Shared(n)) = g.get(a) else {
            errs.push(cerr("Λ3", a, "a shared process needs a shared type in Γ"));
            continue;
        };
        let Some(prov) = ann.provides.get(a) else {
            errs.push(cerr("Λ3", a, "no type recorded for the process"));
            continue;
        };
        if let Err(m) = ssync_ok(env, prov, &SessionType::Ref(n.clone()), &Constraint::Top) {
            errs.push(cerr("Λ3", a, m));
        }
        for e in check_shared(env, sig, g, t, a, prov) {
            errs.push(cerr("Λ3", a, e.to_string()));
        }
    }

    let mut pool = LinearCtx::new();
    for p in cfg.linear.iter().rev() {
        match p {
            LinearPred::Connect(a, b) => {
                let Some(view) = ann.views.get(a) else {
                    errs.push(cerr("Θ2", a, "no client type recorded"));
                    continue;
                };
                match g.get(b) {
                    Some(bh) if constraint_leq_type(env, bh, view) => {}
                    Some(bh) => errs.push(cerr("Θ2", a, format!("`{b}: {bh}` is not a subtype of `{view}`"))),
                    None => errs.push(cerr("Θ2", a, format!("`{b}` has no entry in Γ"))),
                }
                pool.insert(a.clone(), view.clone());
            }
            LinearPred::Proc(a, t) => {
                let (Some(ah), Some(view), Some(prov)) = (g.get(a), ann.views.get(a), ann.provides.get(a)) else {
                    errs.push(cerr("Θ3", a, "missing Γ entry, client type or process type"));
                    continue;
                };
                if let Err(m) = ssync_ok(env, prov, view, ah) {
                    errs.push(cerr("Θ3", a, m));
                }
                let mut da = LinearCtx::new();
                for u in linear_uses(a, t) {
                    match pool.remove(&u) {
                        Some(ty) => {
                            da.insert(u, ty);
                        }
                        None => errs.push(cerr("Θ3", a, format!("uses `{u}`, which no predicate to its right offers"))),
                    }
                }
                for e in check_linear(env, sig, g, &da, t, a, prov) {
                    errs.push(cerr("Θ3", a, e.to_string()));
                }
                pool.insert(a.clone(), view.clone());
            }
        }
    }
    if &pool != delta {
        let extra: BTreeSet<&Chan> = pool.keys().filter(|k| !delta.contains_key(*k)).collect();
        let missing: BTreeSet<&Chan> = delta.keys().filter(|k| !pool.contains_key(*k)).collect();
        errs.push(ConfigError {
            rule: "Ω",
            chan: None,
            message: format!("linear fragment offers {extra:?} beyond and lacks {missing:?} of the expected interface"),
        });
    }
    errs
}

/// Γ with each `(from, to)` identification applied in order.
pub fn rename_ctx(env: &TypeDefEnv, g: &SharedCtx, renamings: &[(Chan, Chan)]) -> SharedCtx {
    let mut env = env.clone();
    let mut g = g.clone();
    for (from, to) in renamings {
        rename_gamma(&mut env, &mut g, from, to);
    }
    g
}

/// Checks that `after` is well typed and that its Γ is ⪯ the Γ before the
/// step, up to the step's identifications.
pub fn monitor_check(gamma_before: &SharedCtx, event: &StepEvent, after: &Machine) -> Result<(), Violation> {
    let mut errors = Vec::new();
    let expected = rename_ctx(&after.env, gamma_before, &event.renamings);
    if !ctx_preceq(&after.env, &after.ann.gamma, &expected) {
        for (c, d) in &expected {
            match after.ann.gamma.get(c) {
                Some(k) if constraint_leq(&after.env, k, d) => {}
                Some(k) => errors.push(cerr("Γ⪯", c, format!("constraint grew from `{d}` to `{k}`"))),
                None => errors.push(cerr("Γ⪯", c, "entry disappeared from Γ")),
            }
        }
    }
    errors.extend(after.typecheck());
    if errors.is_empty() {
        Ok(())
    } else {
        Err(Violation { step_rule: event.rule.name().to_string(), errors })
    }
}

//! JSON-lines rendering of step events.

use serde_json::{json, Value};

use super::step::StepEvent;
use super::Pred;
use crate::syntax::format::proc_to_string;

pub fn pred_json(p: &Pred) -> Value {
    match p {
        Pred::ProcL(c, t) => json!({"kind": "procL", "chan": c, "term": proc_to_string(t)}),
        Pred::ProcS(c, t) => json!({"kind": "procS", "chan": c, "term": proc_to_string(t)}),
        Pred::Unavail(c) => json!({"kind": "unavail", "chan": c, "term": null}),
        Pred::Connect(c, t) => json!({"kind": "connect", "chan": c, "term": t}),
    }
}

pub fn event_json(step: usize, ev: &StepEvent) -> Value {
    json!({
        "step": step,
        "rule": ev.rule.name(),
        "consumed": ev.consumed.iter().map(pred_json).collect::<Vec<_>>(),
        "produced": ev.produced.iter().map(pred_json).collect::<Vec<_>>(),
        "fresh": ev.fresh,
    })
}

/// One JSON object per line, each line terminated by a newline.
pub fn trace_jsonl(trace: &[StepEvent]) -> String {
    let mut out = String::new();
    for (i, ev) in trace.iter().enumerate() {
        out.push_str(&event_json(i, ev).to_string());
        out.push('\n');
    }
    out
}

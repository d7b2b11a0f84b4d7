//! Diagnostics with source positions, and whole-file checking.

use std::fmt;

use crate::runtime::{initial_machine, InitError};
use crate::syntax::{parse_with_spans, ParseError, SourceFile, Span, Spans};
use crate::typecheck::{check_signature, TypeError};
use crate::types::{validate_env, EnvDiagnostic};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Severity::Error => write!(f, "error"),
            Severity::Warning => write!(f, "warning"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub span: Option<Span>,
    /// Name of the rule or check that failed, such as `⊗R` or `syntax`.
    pub rule: String,
    pub message: String,
}

impl Diagnostic {
    pub fn error(span: Option<Span>, rule: impl Into<String>, message: impl Into<String>) -> Self {
        Self { severity: Severity::Error, span, rule: rule.into(), message: message.into() }
    }

    pub fn from_parse(e: &ParseError) -> Self {
        Self::error(Some(e.span), "syntax", e.message.clone())
    }

    pub fn from_env(e: &EnvDiagnostic, spans: &Spans) -> Self {
        Self::error(spans.types.get(&e.def).copied(), "type definition", e.to_string())
    }

    /// Locates the failing statement through the definition's node spans,
    /// falling back to the definition header.
    pub fn from_type_error(e: &TypeError, spans: &Spans) -> Self {
        let span = e.def.as_ref().and_then(|d| {
            let node = e.node.and_then(|n| spans.proc_nodes.get(d).and_then(|v| v.get(n)).copied());
            node.or_else(|| spans.proc_headers.get(d).copied())
        });
        Self::error(span, e.rule.clone(), e.to_string())
    }

    /// `file:line:col: error[rule]: message`.
    pub fn render(&self, file: &str, src: &str) -> String {
        let at = match self.span {
            Some(s) => {
                let (l, c) = s.line_col(src);
                format!("{file}:{l}:{c}")
            }
            None => file.to_string(),
        };
        format!("{at}: {}[{}]: {}", self.severity, self.rule, self.message)
    }
}

/// Parses and checks a whole source file: type definitions, process
/// definitions and the `system` block.
pub fn check_source(src: &str) -> Result<(SourceFile, Spans), Vec<Diagnostic>> {
    let (sf, spans) = parse_with_spans(src).map_err(|e| vec![Diagnostic::from_parse(&e)])?;
    let env_errs = validate_env(&sf.types);
    if !env_errs.is_empty() {
        return Err(env_errs.iter().map(|e| Diagnostic::from_env(e, &spans)).collect());
    }
    let mut out: Vec<Diagnostic> =
        check_signature(&sf.types, &sf.procs).iter().map(|e| Diagnostic::from_type_error(e, &spans)).collect();
    if out.is_empty() {
        if let Some(m) = &sf.system {
            match initial_machine(&sf.types, &sf.procs, Some(m), &m.main) {
                Ok(_) => {}
                Err(InitError::IllTyped(es)) => out.extend(es.iter().map(|e| Diagnostic::from_type_error(e, &spans))),
                Err(e) => out.push(Diagnostic::error(spans.system, "system", e.to_string())),
            }
        }
    }
    if out.is_empty() {
        Ok((sf, spans))
    } else {
        Err(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_error_has_position() {
        let src = "type a = 1\nproc P : () |- c: a = {";
        let ds = check_source(src).unwrap_err();
        assert_eq!(ds.len(), 1);
        assert!(ds[0].render("f.sill", src).starts_with("f.sill:2:"), "{}", ds[0].render("f.sill", src));
    }

    #[test]
    fn type_error_points_at_statement() {
        let src = "type a = 1\nproc P : () |- c: a =\n    wait c;\n    close c\n";
        let ds = check_source(src).unwrap_err();
        let r = ds[0].render("f.sill", src);
        assert!(r.starts_with("f.sill:3:5: error["), "{r}");
    }

    #[test]
    fn unknown_main_reported_on_system_block() {
        let src = "type a = 1\nproc P : () |- c: a = close c\nsystem { main Q() }\n";
        let ds = check_source(src).unwrap_err();
        assert_eq!(ds[0].rule, "system");
    }

    #[test]
    fn well_typed_file_passes() {
        assert!(check_source("type a = 1\nproc P : () |- c: a = close c\n").is_ok());
    }
}

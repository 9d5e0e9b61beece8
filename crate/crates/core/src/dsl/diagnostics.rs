use std::collections::HashMap;
use std::fmt;

use serde::Serialize;

use crate::control::{Location, Severity};
use crate::persistence::Fact;

/// A byte range in the source, with the 1-based line and column of its start.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub line: usize,
    pub col: usize,
}

impl Span {
    /// Span from the start of `self` to the end of `other`.
    pub fn to(self, other: Span) -> Span {
        Span { end: other.end.max(self.end), ..self }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub span: Span,
    pub message: String,
    /// Grammar production or well-formedness rule concerned.
    pub clause: String,
}

impl Diagnostic {
    pub fn error(span: Span, clause: &str, message: impl Into<String>) -> Self {
        Diagnostic { severity: Severity::Error, span, message: message.into(), clause: clause.to_string() }
    }

    pub fn warning(span: Span, clause: &str, message: impl Into<String>) -> Self {
        Diagnostic { severity: Severity::Warning, span, message: message.into(), clause: clause.to_string() }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }

    /// Multi-line rendering with the offending source line underlined.
    pub fn render(&self, source: &str, file: &str, color: bool) -> String {
        let (label, code) = match self.severity {
            Severity::Error => ("error", "31"),
            Severity::Warning => ("warning", "33"),
        };
        let paint = |s: &str, code: &str| if color { format!("\x1b[1;{code}m{s}\x1b[0m") } else { s.to_string() };
        let mut out = format!(
            "{}: {} [{}]\n  --> {}:{}:{}\n",
            paint(label, code),
            self.message,
            self.clause,
            file,
            self.span.line,
            self.span.col
        );
        if let Some(text) = source.lines().nth(self.span.line.saturating_sub(1)) {
            let width = self.span.end.saturating_sub(self.span.start).max(1);
            let avail = text.chars().count().saturating_sub(self.span.col.saturating_sub(1)).max(1);
            let marks = "^".repeat(width.min(avail));
            let pad = " ".repeat(self.span.col.saturating_sub(1));
            out.push_str(&format!("   | {text}\n   | {pad}{}\n", paint(&marks, code)));
        }
        out
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{}:{}: {sev}: {} [{}]", self.span.line, self.span.col, self.message, self.clause)
    }
}

/// A non-empty list of diagnostics.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct Diagnostics(pub Vec<Diagnostic>);

impl Diagnostics {
    pub fn single(d: Diagnostic) -> Self {
        Diagnostics(vec![d])
    }

    pub fn iter(&self) -> impl Iterator<Item = &Diagnostic> {
        self.0.iter()
    }

    pub fn has_errors(&self) -> bool {
        self.0.iter().any(Diagnostic::is_error)
    }

    pub fn render(&self, source: &str, file: &str, color: bool) -> String {
        self.0.iter().map(|d| d.render(source, file, color)).collect()
    }
}

impl fmt::Display for Diagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl std::error::Error for Diagnostics {}

/// Source positions of the named elements of a parsed document.
#[derive(Clone, Debug, Default)]
pub struct SourceMap {
    pub(crate) locations: HashMap<Location, Span>,
    pub(crate) facts: Vec<(Fact, Span)>,
    pub(crate) marking: HashMap<String, Span>,
    pub(crate) end: Span,
}

impl SourceMap {
    pub(crate) fn record(&mut self, loc: Location, span: Span) {
        self.locations.entry(loc).or_insert(span);
    }

    /// Span of `loc`, falling back to the enclosing element.
    pub fn span(&self, loc: &Location) -> Span {
        if let Some(s) = self.locations.get(loc) {
            return *s;
        }
        let parent = match loc {
            Location::Arc { transition, .. } | Location::Guard(transition) | Location::ActionBinding(transition) => {
                Some(Location::Transition(transition.clone()))
            }
            _ => None,
        };
        parent
            .and_then(|p| self.locations.get(&p).copied())
            .or_else(|| self.locations.get(&Location::Net).copied())
            .unwrap_or_default()
    }

    /// Span of an initial fact.
    pub fn fact(&self, fact: &Fact) -> Span {
        self.facts
            .iter()
            .find(|(f, _)| f == fact)
            .map_or_else(|| self.span(&Location::Init), |(_, s)| *s)
    }

    /// Span of the init marking entry for `place`.
    pub fn marking_entry(&self, place: &str) -> Span {
        self.marking.get(place).copied().unwrap_or_else(|| self.span(&Location::Init))
    }
}

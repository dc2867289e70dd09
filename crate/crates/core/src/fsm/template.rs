//! Utterance templates with `{slot}` placeholders.
//!
//! `{{` and `}}` produce literal braces. Slot names are ASCII
//! alphanumerics and underscores.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("unclosed '{{' at byte {0}")]
    Unclosed(usize),
    #[error("stray '}}' at byte {0}")]
    StrayClose(usize),
    #[error("empty slot name at byte {0}")]
    EmptySlot(usize),
    #[error("invalid character {ch:?} in slot name at byte {at}")]
    InvalidSlotChar { ch: char, at: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Literal(String),
    Slot(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    source: String,
    segments: Vec<Segment>,
}

impl Template {
    pub fn parse(source: &str) -> Result<Self, TemplateError> {
        let mut segments = Vec::new();
        let mut literal = String::new();
        let mut chars = source.char_indices().peekable();

        while let Some((at, ch)) = chars.next() {
            match ch {
                '{' if matches!(chars.peek(), Some((_, '{'))) => {
                    chars.next();
                    literal.push('{');
                }
                '}' if matches!(chars.peek(), Some((_, '}'))) => {
                    chars.next();
                    literal.push('}');
                }
                '}' => return Err(TemplateError::StrayClose(at)),
                '{' => {
                    let mut name = String::new();
                    let mut closed = false;
                    for (i, c) in chars.by_ref() {
                        if c == '}' {
                            closed = true;
                            break;
                        }
                        if !(c.is_ascii_alphanumeric() || c == '_') {
                            return Err(TemplateError::InvalidSlotChar { ch: c, at: i });
                        }
                        name.push(c);
                    }
                    if !closed {
                        return Err(TemplateError::Unclosed(at));
                    }
                    if name.is_empty() {
                        return Err(TemplateError::EmptySlot(at));
                    }
                    if !literal.is_empty() {
                        segments.push(Segment::Literal(std::mem::take(&mut literal)));
                    }
                    segments.push(Segment::Slot(name));
                }
                c => literal.push(c),
            }
        }
        if !literal.is_empty() {
            segments.push(Segment::Literal(literal));
        }
        Ok(Template { source: source.to_string(), segments })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Slot names in order of first appearance.
    pub fn slots(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for seg in &self.segments {
            if let Segment::Slot(name) = seg {
                if !out.contains(&name.as_str()) {
                    out.push(name);
                }
            }
        }
        out
    }

    /// Substitutes every slot through `lookup`. On failure returns the
    /// first slot name that could not be resolved.
    pub fn render<'a, F>(&self, lookup: F) -> Result<String, String>
    where
        F: Fn(&str) -> Option<&'a str>,
    {
        let mut out = String::with_capacity(self.source.len() + 16);
        for seg in &self.segments {
            match seg {
                Segment::Literal(s) => out.push_str(s),
                Segment::Slot(name) => match lookup(name) {
                    Some(v) => out.push_str(v),
                    None => return Err(name.clone()),
                },
            }
        }
        Ok(out)
    }

    /// Like [`Template::render`], but leaves unresolved slots as `{name}`.
    pub fn render_partial<'a, F>(&self, lookup: F) -> String
    where
        F: Fn(&str) -> Option<&'a str>,
    {
        let mut out = String::with_capacity(self.source.len() + 16);
        for seg in &self.segments {
            match seg {
                Segment::Literal(s) => out.push_str(s),
                Segment::Slot(name) => match lookup(name) {
                    Some(v) => out.push_str(v),
                    None => {
                        out.push('{');
                        out.push_str(name);
                        out.push('}');
                    }
                },
            }
        }
        out
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

/// Upper-cases the first character of a rendered utterance so templates
/// that open on a slot ("{robot} has arrived") read as sentences.
pub fn capitalize_first(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_slots_and_literals() {
        let t = Template::parse("Moving {robot} to {location}").unwrap();
        assert_eq!(t.slots(), vec!["robot", "location"]);
        let out = t
            .render(|n| match n {
                "robot" => Some("quad copter 1"),
                "location" => Some("processing module east tower"),
                _ => None,
            })
            .unwrap();
        assert_eq!(out, "Moving quad copter 1 to processing module east tower");
    }

    #[test]
    fn escaped_braces() {
        let t = Template::parse("{{literal}} {x}").unwrap();
        assert_eq!(t.slots(), vec!["x"]);
        assert_eq!(t.render(|_| Some("v")).unwrap(), "{literal} v");
    }

    #[test]
    fn malformed_templates() {
        assert_eq!(Template::parse("a {b"), Err(TemplateError::Unclosed(2)));
        assert_eq!(Template::parse("a } b"), Err(TemplateError::StrayClose(2)));
        assert_eq!(Template::parse("{}"), Err(TemplateError::EmptySlot(0)));
        assert!(matches!(Template::parse("{a b}"), Err(TemplateError::InvalidSlotChar { ch: ' ', .. })));
    }

    #[test]
    fn missing_slot_is_reported() {
        let t = Template::parse("{robot} at {location}").unwrap();
        let err = t.render(|n| (n == "robot").then_some("husky 1")).unwrap_err();
        assert_eq!(err, "location");
    }

    #[test]
    fn partial_rendering_keeps_placeholders() {
        let t = Template::parse("Moving {robot} to {location}").unwrap();
        assert_eq!(t.render_partial(|n| (n == "location").then_some("helipad")), "Moving {robot} to helipad");
    }

    #[test]
    fn capitalizes() {
        assert_eq!(capitalize_first("quad copter 1 has arrived"), "Quad copter 1 has arrived");
        assert_eq!(capitalize_first(""), "");
    }

    proptest! {
        #[test]
        fn parse_never_panics(s in "\\PC{0,40}") {
            let _ = Template::parse(&s);
        }

        #[test]
        fn rendering_is_literal_concatenation(
            pre in "[a-zA-Z ,.]{0,12}",
            val in "[a-zA-Z0-9 ]{0,12}",
            post in "[a-zA-Z ,.]{0,12}",
        ) {
            let t = Template::parse(&format!("{pre}{{slot}}{post}")).unwrap();
            prop_assert_eq!(t.render(|_| Some(val.as_str())).unwrap(), format!("{pre}{val}{post}"));
        }
    }
}

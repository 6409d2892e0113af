//! Prompt assembly. The template is data; placeholders use `<<name>>`.

use crate::config::Persona;
use crate::types::HistoryEntry;

pub const TEMPLATE: &str = include_str!("prompt_template.txt");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptContext {
    pub persona: Persona,
    pub participants: Vec<String>,
    pub history: Vec<HistoryEntry>,
}

/// One `label: text` line per entry, oldest first.
pub fn render_history(history: &[HistoryEntry]) -> String {
    history
        .iter()
        .map(|e| format!("{}: {}", e.speaker_label, e.text))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn build_prompt(ctx: &PromptContext) -> String {
    render(TEMPLATE, ctx)
}

pub fn render(template: &str, ctx: &PromptContext) -> String {
    let p = &ctx.persona;
    let slots = [
        ("robot_name", p.robot_name.clone()),
        ("datetime", p.datetime.clone()),
        ("language", p.language.clone()),
        ("location", p.location.clone()),
        ("history", render_history(&ctx.history)),
        ("users", ctx.participants.join(", ")),
    ];
    // Single left-to-right pass so substituted text is never re-scanned.
    let mut out = String::with_capacity(template.len() + 256);
    let mut rest = template;
    while let Some(open) = rest.find("<<") {
        out.push_str(&rest[..open]);
        let after = &rest[open + 2..];
        match after.find(">>") {
            Some(close) => {
                let name = &after[..close];
                match slots.iter().find(|(k, _)| *k == name) {
                    Some((_, v)) => out.push_str(v),
                    None => out.push_str(&rest[open..open + 2 + close + 2]),
                }
                rest = &after[close + 2..];
            }
            None => {
                out.push_str(&rest[open..]);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{HistorySource, Timestamp};

    fn entry(label: &str, text: &str) -> HistoryEntry {
        HistoryEntry {
            speaker_label: label.into(),
            text: text.into(),
            ts: Timestamp(0),
            source: HistorySource::User,
            segment: None,
            participant: None,
            quality: None,
        }
    }

    #[test]
    fn substitutes_every_placeholder() {
        let ctx = PromptContext {
            persona: Persona::default(),
            participants: vec!["alice".into(), "bob".into()],
            history: vec![entry("alice", "Hi!"), entry("Furhat", "Hello alice.")],
        };
        let p = build_prompt(&ctx);
        assert!(p.starts_with("You are Furhat, a social robot.\n"));
        assert!(p.contains("Recognized people: alice, bob\n"));
        assert!(p.contains("alice: Hi!\nFurhat: Hello alice.\n"));
        assert!(!p.contains("<<"));
        assert!(p.ends_with("f\"Addressee: {Chosen_person}; Response: {Response}\"\n"));
    }

    #[test]
    fn empty_context_keeps_static_sections() {
        let ctx = PromptContext {
            persona: Persona::default(),
            participants: Vec::new(),
            history: Vec::new(),
        };
        let p = build_prompt(&ctx);
        assert!(p.contains("Recognized people: \n"));
        assert!(p.contains("Try to involve everyone in the conversation.\n\n\n\nTask:"));
        assert_eq!(build_prompt(&ctx), p);
    }

    #[test]
    fn unknown_placeholders_survive() {
        let ctx = PromptContext {
            persona: Persona::default(),
            participants: Vec::new(),
            history: vec![entry("x", "<<users>>")],
        };
        assert_eq!(render("<<nope>> <<history>>", &ctx), "<<nope>> x: <<users>>");
    }
}

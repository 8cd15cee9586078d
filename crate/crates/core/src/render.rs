//! Final puzzle text and prompt wrappers.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qa::AnswerRecord;
use crate::spec::EvalType;

/// Question text of one query plus its option block, one `A. text` line per option.
pub fn query_block(desc: &str, answer: &AnswerRecord) -> String {
    let mut out = desc.trim().to_string();
    if let Some(options) = &answer.options {
        for o in options {
            out.push('\n');
            out.push_str(&o.label);
            out.push_str(". ");
            out.push_str(&o.text);
        }
    }
    out
}

/// Join rendered instance descriptions of one condition.
pub fn join_instances(descs: &[String]) -> String {
    descs
        .iter()
        .map(|d| d.trim())
        .filter(|d| !d.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Prompt wrappers keyed by qtype; `*` is the fallback.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WrapperSet {
    pub wrappers: BTreeMap<String, String>,
    /// Fail instead of falling back to `*` for unknown qtypes.
    #[serde(default)]
    pub strict: bool,
}

impl Default for WrapperSet {
    fn default() -> Self {
        let mut w = BTreeMap::new();
        w.insert(
            "single_choice".into(),
            "Solve the following puzzle. Exactly one option is correct.\n\n{question}\n\n{directive}".into(),
        );
        w.insert(
            "multiple_choice".into(),
            "Solve the following puzzle. One or more options are correct.\n\n{question}\n\n{directive}".into(),
        );
        w.insert(
            "fill_in_blank".into(),
            "Solve the following puzzle and give the missing value.\n\n{question}\n\n{directive}".into(),
        );
        w.insert(
            "short_answer".into(),
            "Solve the following puzzle.\n\n{question}\n\n{directive}".into(),
        );
        w.insert("*".into(), "{question}\n\n{directive}".into());
        WrapperSet {
            wrappers: w,
            strict: false,
        }
    }
}

impl WrapperSet {
    /// A set containing a single wrapper for every qtype.
    pub fn uniform(template: &str) -> Self {
        let mut w = BTreeMap::new();
        w.insert("*".to_string(), template.to_string());
        WrapperSet {
            wrappers: w,
            strict: false,
        }
    }
}

/// Answer-format instruction for an eval_type.
pub fn directive(eval_type: EvalType) -> &'static str {
    match eval_type {
        EvalType::Numeral => "End your reply with a line of the form `Answer: <number>`.",
        EvalType::Nominal => "End your reply with a line of the form `Answer: <text>`.",
        EvalType::Option => {
            "End your reply with a line of the form `Answer: <letters>`, giving the option letters (A, B, ...) separated by commas."
        }
        EvalType::OrderedArray => "End your reply with a line of the form `Answer: <item>,<item>,...` listing items in order.",
        EvalType::UnorderedArray => "End your reply with a line of the form `Answer: <item>,<item>,...` in any order.",
    }
}

/// Wrap a question for its first query's qtype.
///
/// Placeholders: `{question}` and `{directive}`.
pub fn wrap_prompt(question: &str, answers: &[AnswerRecord], set: &WrapperSet) -> Result<String> {
    let qtype = answers.first().map_or("*", |a| a.qtype.as_str());
    let template = match set.wrappers.get(qtype) {
        Some(t) => t,
        None if set.strict => return Err(Error::MissingWrapper(qtype.to_string())),
        None => set
            .wrappers
            .get("*")
            .ok_or_else(|| Error::MissingWrapper(qtype.to_string()))?,
    };
    let directive = answers
        .iter()
        .map(|a| directive(a.eval_type))
        .collect::<Vec<_>>()
        .join("\n");
    Ok(template.replace("{question}", question).replace("{directive}", &directive))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn answer(qtype: &str) -> AnswerRecord {
        AnswerRecord {
            query_name: "q".into(),
            qtype: qtype.into(),
            eval_type: EvalType::Option,
            gold: serde_json::json!(["B"]),
            rendered: "B".into(),
            options: None,
        }
    }

    #[test]
    fn identity_wrapper() {
        let w = WrapperSet::uniform("{question}");
        assert_eq!(wrap_prompt("Who?", &[answer("single_choice")], &w).unwrap(), "Who?");
    }

    #[test]
    fn default_single_choice_ends_with_label_directive() {
        let out = wrap_prompt("Q", &[answer("single_choice")], &WrapperSet::default()).unwrap();
        assert!(out.ends_with(directive(EvalType::Option)));
        assert!(out.contains("option letters (A, B, ...)"));
    }

    #[test]
    fn strict_mode_requires_wrapper() {
        let w = WrapperSet {
            strict: true,
            ..WrapperSet::default()
        };
        let e = wrap_prompt("Q", &[answer("essay")], &w).unwrap_err();
        assert_eq!(e.class(), "MissingWrapper");
    }
}

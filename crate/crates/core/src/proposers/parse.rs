use rand::seq::SliceRandom;
use rand::RngCore;
use serde_json::Value;

use crate::program::{ModelIdx, ModelSet, Mutator, ProgramState};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationNote {
    pub issue: String,
    pub correction: String,
}

/// A validated joint action together with the text it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct JointProposal {
    pub mutators: Vec<Mutator>,
    pub next_model: ModelIdx,
    pub raw_response: String,
    pub validation_notes: Vec<ValidationNote>,
}

impl JointProposal {
    /// Error count charged to the proposing model; one per note.
    pub fn errors(&self) -> u32 {
        self.validation_notes.len() as u32
    }
}

/// Validates a raw model answer against the program it will be applied to.
///
/// Never fails. Transformations are applied in order and the list is cut at
/// the first entry that is unknown or not applicable at that point in the
/// sequence. An empty result is replaced by one uniformly random valid
/// mutator. An unknown `next_model` falls back to `current_model`. Each kind
/// of problem costs one error.
pub fn parse_proposal(
    text: &str,
    state: &ProgramState,
    models: &ModelSet,
    current_model: ModelIdx,
    rng: &mut dyn RngCore,
) -> JointProposal {
    let mut notes = Vec::new();
    let object = first_json_object(text);

    let mut mutators = Vec::new();
    match object.as_ref().map(|o| o.get("transformations")) {
        None => notes.push(note("no JSON object in response", "random valid transformation")),
        Some(Some(Value::Array(entries))) => {
            let mut cursor = state.clone();
            for (i, entry) in entries.iter().enumerate() {
                let step = entry
                    .as_str()
                    .and_then(|s| s.parse::<Mutator>().ok())
                    .and_then(|m| cursor.apply(m).ok().map(|next| (m, next)));
                match step {
                    Some((m, next)) => {
                        mutators.push(m);
                        cursor = next;
                    }
                    None => {
                        notes.push(note(
                            &format!("invalid transformation {entry} at index {i}"),
                            &format!("truncated to {i} transformation(s)"),
                        ));
                        break;
                    }
                }
            }
            if mutators.is_empty() && notes.is_empty() {
                notes.push(note("empty transformation list", "random valid transformation"));
            }
        }
        Some(_) => notes.push(note(
            "missing or malformed \"transformations\"",
            "random valid transformation",
        )),
    }
    if mutators.is_empty() {
        if let Some(&m) = state.valid_mutators().choose(rng) {
            mutators.push(m);
        }
    }

    let requested = object
        .as_ref()
        .and_then(|o| o.get("next_model"))
        .and_then(Value::as_str);
    let next_model = match requested.map(|id| models.lookup(id)) {
        Some(Ok(idx)) => idx,
        other => {
            let issue = match (other, requested) {
                (Some(_), Some(id)) => format!("unknown next_model {id:?}"),
                _ => "missing next_model".to_string(),
            };
            notes.push(note(&issue, &format!("kept {}", models.id(current_model))));
            current_model
        }
    };

    JointProposal {
        mutators,
        next_model,
        raw_response: text.to_string(),
        validation_notes: notes,
    }
}

fn note(issue: &str, correction: &str) -> ValidationNote {
    ValidationNote {
        issue: issue.to_string(),
        correction: correction.to_string(),
    }
}

/// Finds the first balanced `{...}` span that parses as a JSON object.
///
/// Surrounding prose and code fences are ignored, and trailing commas
/// before `}` or `]` are tolerated.
fn first_json_object(text: &str) -> Option<serde_json::Map<String, Value>> {
    let bytes = text.as_bytes();
    let mut start = 0;
    while let Some(offset) = text[start..].find('{') {
        let open = start + offset;
        if let Some(close) = matching_brace(bytes, open) {
            let candidate = strip_trailing_commas(&text[open..=close]);
            if let Ok(Value::Object(map)) = serde_json::from_str(&candidate) {
                return Some(map);
            }
        }
        start = open + 1;
    }
    None
}

fn matching_brace(bytes: &[u8], open: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate().skip(open) {
        if in_string {
            match b {
                _ if escaped => escaped = false,
                b'\\' => escaped = true,
                b'"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
    }
    None
}

fn strip_trailing_commas(s: &str) -> String {
    let chars: Vec<char> = s.chars().collect();
    let mut out = String::with_capacity(s.len());
    let mut in_string = false;
    let mut escaped = false;
    for (i, &c) in chars.iter().enumerate() {
        if in_string {
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_string = false;
            }
            out.push(c);
            continue;
        }
        if c == ',' {
            let next = chars[i + 1..].iter().find(|c| !c.is_whitespace());
            if matches!(next, Some('}') | Some(']')) {
                continue;
            }
        }
        if c == '"' {
            in_string = true;
        }
        out.push(c);
    }
    out
}

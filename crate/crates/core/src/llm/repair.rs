//! Recovering JSON from chatty model output.

use serde_json::Value;

use super::{excerpt, LlmError};

/// Parses model output as JSON.
///
/// Text that is already valid JSON is returned as is. Otherwise, in order:
/// strip Markdown code fences; if the remainder is valid JSON as a whole,
/// return it; otherwise take the span from the first `{` to
/// the last `}`, parse it strictly, and failing that drop trailing commas
/// before `}`/`]` and parse again. When prose around the object contains
/// braces of its own, the longest balanced `{...}` span that parses wins.
pub fn repair_json(raw: &str) -> Result<Value, LlmError> {
    if let Ok(v) = serde_json::from_str(raw.trim()) {
        return Ok(v);
    }
    let unfenced = strip_code_fences(raw);
    let trimmed = unfenced.trim();
    if let Ok(v) = serde_json::from_str(trimmed) {
        return Ok(v);
    }
    let unrepairable = || LlmError::Unrepairable(excerpt(raw.trim(), 120));
    let start = trimmed.find('{').ok_or_else(unrepairable)?;
    let end = trimmed.rfind('}').ok_or_else(unrepairable)?;
    if end < start {
        return Err(unrepairable());
    }
    if let Some(v) = parse_lenient(&trimmed[start..=end]) {
        return Ok(v);
    }
    longest_balanced_object(trimmed).ok_or_else(unrepairable)
}

fn parse_lenient(span: &str) -> Option<Value> {
    serde_json::from_str(span)
        .ok()
        .or_else(|| serde_json::from_str(&remove_trailing_commas(span)).ok())
}

/// Candidate starts examined before giving up; model output rarely has more.
const MAX_OBJECT_STARTS: usize = 256;

/// The longest `{...}` span, balanced outside strings, that parses as an object.
fn longest_balanced_object(s: &str) -> Option<Value> {
    let mut best: Option<(usize, Value)> = None;
    for (start, _) in s.match_indices('{').take(MAX_OBJECT_STARTS) {
        let Some(end) = balanced_end(s, start) else { continue };
        let len = end + 1 - start;
        if best.as_ref().is_some_and(|(l, _)| *l >= len) {
            continue;
        }
        if let Some(v @ Value::Object(_)) = parse_lenient(&s[start..=end]) {
            best = Some((len, v));
        }
    }
    best.map(|(_, v)| v)
}

/// Byte index of the bracket closing the one at `start`, skipping string contents.
fn balanced_end(s: &str, start: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, c) in s[start..].char_indices() {
        if in_string {
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_string = false;
            }
            continue;
        }
        match c {
            '"' => in_string = true,
            '{' | '[' => depth += 1,
            '}' | ']' => {
                depth = depth.checked_sub(1)?;
                if depth == 0 {
                    return Some(start + i);
                }
            }
            _ => {}
        }
    }
    None
}

/// Returns the body of the first fenced block, or the input when unfenced.
fn strip_code_fences(raw: &str) -> &str {
    let Some(open) = raw.find("```") else {
        return raw;
    };
    let after = &raw[open + 3..];
    // optional language tag up to the end of the fence line
    let body_start = match after.find('\n') {
        Some(nl) if after[..nl].trim().chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') => nl + 1,
        _ => 0,
    };
    let body = &after[body_start..];
    match body.find("```") {
        Some(close) => &body[..close],
        None => body,
    }
}

/// Drops commas that directly precede `}` or `]`, ignoring string contents.
fn remove_trailing_commas(s: &str) -> String {
    let chars: Vec<char> = s.chars().collect();
    let mut out = String::with_capacity(s.len());
    let mut in_string = false;
    let mut escaped = false;
    for (i, &c) in chars.iter().enumerate() {
        if in_string {
            out.push(c);
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_string = false;
            }
            continue;
        }
        match c {
            '"' => {
                in_string = true;
                out.push(c);
            }
            ',' => {
                let next = chars[i + 1..].iter().find(|c| !c.is_whitespace());
                if !matches!(next, Some('}') | Some(']')) {
                    out.push(c);
                }
            }
            _ => out.push(c),
        }
    }
    out
}

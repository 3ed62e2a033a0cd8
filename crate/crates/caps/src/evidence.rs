//! Evidence extraction: candidate parsing, dedup signatures, and the
//! partial/full views shown to the judge.
//!
//! Views form a strict size ladder. The signature is a few bytes and is
//! never shown to a judge; the partial view compresses a candidate to a
//! reasoning sketch plus a solution anchor; the full view is the raw
//! response verbatim. `partial_view` clamps its payload to the raw text, so
//! a partial view is never larger than the full view of the same candidate.

use crate::types::{Candidate, CandidateId, Domain, EvidenceLevel};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Inserted between the head and tail of a long reasoning span.
pub const REASONING_TRUNCATION_MARKER: &str = "[...reasoning truncated...]";

/// Reasoning spans longer than this many words are truncated to the first
/// and last `REASONING_WORDS_KEPT` words.
pub const REASONING_WORDS_LIMIT: usize = 100;
pub const REASONING_WORDS_KEPT: usize = 50;

/// Characters of the solution span anchored into a code partial view.
pub const SOLUTION_ANCHOR_CHARS: usize = 500;

/// Characters of raw-text tail kept by the thinking-aware partial view,
/// sized to roughly 500 tokens.
pub const THINKING_AWARE_TAIL_CHARS: usize = 2000;

/// Counts prompt tokens for a payload string. Pluggable so tests can swap
/// in a word counter without touching the pipeline.
pub type TokenCounter = fn(&str) -> u64;

/// Default counter: one token per four characters, rounded up.
pub fn approx_chars_counter(s: &str) -> u64 {
    (s.chars().count() as u64).div_ceil(4)
}

/// Whitespace-word counter, used by tests that reason in words.
pub fn word_counter(s: &str) -> u64 {
    s.split_whitespace().count() as u64
}

/// One judge-visible rendering of a candidate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvidenceView {
    pub level: EvidenceLevel,
    pub payload: String,
    pub size_tokens: u64,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvidenceError {
    #[error("candidate {0} has no boxed final answer")]
    MissingAnswer(CandidateId),
}

/// Prefixes that mark a line as an import/include directive.
const IMPORT_PREFIXES: &[&str] = &[
    "import ",
    "from ",
    "use ",
    "#include",
    "using ",
    "require(",
    "package ",
    "extern crate",
];

/// Normalizes code for signature hashing: drops import lines, comments,
/// blank lines, and leading whitespace. Line order is preserved. Comment
/// stripping is textual and does not parse string literals; the signature
/// is a dedup key, not a compiler.
pub fn normalize_code(code: &str) -> String {
    let mut kept: Vec<&str> = Vec::new();
    for line in code.lines() {
        let line = line.trim_start();
        if IMPORT_PREFIXES.iter().any(|p| line.starts_with(p)) {
            continue;
        }
        let cut = match (line.find('#'), line.find("//")) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (Some(a), None) => Some(a),
            (None, Some(b)) => Some(b),
            (None, None) => None,
        };
        let line = match cut {
            Some(i) => &line[..i],
            None => line,
        };
        let line = line.trim_end();
        if !line.is_empty() {
            kept.push(line);
        }
    }
    kept.join("\n")
}

/// Normalizes a boxed math answer: lowercase, spacing commands and size
/// delimiters removed, all whitespace stripped.
pub fn normalize_math_answer(answer: &str) -> String {
    let mut s = answer.to_lowercase();
    // Longest forms first so "\bigg" is not left as a dangling "g".
    for cmd in ["\\left", "\\right", "\\bigg", "\\big", "\\,", "\\!"] {
        s = s.replace(cmd, "");
    }
    s.chars().filter(|c| !c.is_whitespace()).collect()
}

/// Equivalence signature used for dedup. Code candidates hash their
/// normalized solution span; math candidates normalize their last boxed
/// answer. A math candidate with no boxed answer has no signature and is
/// treated as unique by the caller.
pub fn signature(c: &Candidate, domain: Domain) -> Result<String, EvidenceError> {
    match domain {
        Domain::Code => {
            let normalized = normalize_code(&c.solution_span);
            let digest = Sha256::digest(normalized.as_bytes());
            let mut hex = String::with_capacity(16);
            for byte in &digest[..8] {
                hex.push_str(&format!("{byte:02x}"));
            }
            Ok(hex)
        }
        Domain::Math => {
            let span = last_boxed_span(&c.solution_span)
                .ok_or(EvidenceError::MissingAnswer(c.id))?;
            Ok(normalize_math_answer(boxed_inner(span)))
        }
    }
}

/// Locates the first `<thinking>`/`<think>` block and returns
/// (text outside the block, block content). An unclosed tag is left in
/// place as ordinary text.
fn split_thinking(raw: &str) -> (String, Option<String>) {
    for (open, close) in [("<thinking>", "</thinking>"), ("<think>", "</think>")] {
        if let Some(start) = raw.find(open) {
            if let Some(rel) = raw[start + open.len()..].find(close) {
                let inner_start = start + open.len();
                let inner_end = inner_start + rel;
                let mut rest = String::with_capacity(raw.len());
                rest.push_str(&raw[..start]);
                rest.push_str(&raw[inner_end + close.len()..]);
                return (rest, Some(raw[inner_start..inner_end].to_string()));
            }
        }
    }
    (raw.to_string(), None)
}

/// Byte offsets of fence lines: positions where "```" starts a line.
fn fence_positions(text: &str) -> Vec<usize> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut at = 0;
    while let Some(rel) = text[at..].find("```") {
        let pos = at + rel;
        if pos == 0 || bytes[pos - 1] == b'\n' {
            out.push(pos);
        }
        at = pos + 3;
    }
    out
}

/// Content of the last complete ``` fenced block, fence lines excluded.
fn last_fenced_block(text: &str) -> Option<(usize, usize)> {
    let fences = fence_positions(text);
    if fences.len() < 2 {
        return None;
    }
    // Fences pair up in document order; the last complete pair wins.
    let pair = (fences.len() / 2) * 2 - 2;
    let open = fences[pair];
    let close = fences[pair + 1];
    // Content starts after the opening fence line (language tag included).
    let content_start = match text[open..close].find('\n') {
        Some(rel) => open + rel + 1,
        None => return None,
    };
    // Drop the newline that precedes the closing fence.
    let content_end = if close > content_start && text.as_bytes()[close - 1] == b'\n' {
        close - 1
    } else {
        close
    };
    Some((content_start, content_end))
}

/// Byte range of the last `\boxed{...}` including the command and braces.
/// Returns the matched text, or None when no balanced boxed group exists.
fn last_boxed_span(text: &str) -> Option<&str> {
    let start = text.rfind("\\boxed{")?;
    let inner_start = start + "\\boxed{".len();
    let mut depth = 1usize;
    let mut escaped = false;
    for (i, ch) in text[inner_start..].char_indices() {
        if escaped {
            escaped = false;
            continue;
        }
        match ch {
            '\\' => escaped = true,
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(&text[start..inner_start + i + 1]);
                }
            }
            _ => {}
        }
    }
    None
}

/// Strips the `\boxed{` prefix and `}` suffix from a span produced by
/// `last_boxed_span`.
fn boxed_inner(span: &str) -> &str {
    &span["\\boxed{".len()..span.len() - 1]
}

/// Splits a raw model response into reasoning and solution spans.
///
/// A thinking block, when present, becomes the reasoning span and is
/// removed from the solution text. For code, the last fenced block is the
/// solution span and any text before it doubles as reasoning when no
/// thinking block exists. For math, the whole remaining text is the
/// solution span and the derivation before the final boxed answer doubles
/// as reasoning.
pub fn parse_candidate(
    id: CandidateId,
    raw_text: String,
    domain: Domain,
    ground_truth: Option<bool>,
) -> Candidate {
    let (rest, thinking) = split_thinking(&raw_text);
    let (reasoning_span, solution_span) = match domain {
        Domain::Code => match last_fenced_block(&rest) {
            Some((start, end)) => {
                let solution = rest[start..end].to_string();
                // Text before the opening fence of the solution block.
                let fence = rest[..start].rfind("```").unwrap_or(0);
                let before = rest[..fence].trim().to_string();
                let reasoning = thinking.or(if before.is_empty() { None } else { Some(before) });
                (reasoning, solution)
            }
            None => (thinking, rest),
        },
        Domain::Math => {
            let reasoning = thinking.or_else(|| {
                last_boxed_span(&rest).and_then(|span| {
                    // The span borrows from `rest`, so its offset is exact
                    // even when the same text occurs earlier.
                    let start = span.as_ptr() as usize - rest.as_ptr() as usize;
                    let before = rest[..start].trim();
                    if before.is_empty() {
                        None
                    } else {
                        Some(before.to_string())
                    }
                })
            });
            (reasoning, rest)
        }
    };
    Candidate {
        id,
        raw_text,
        reasoning_span: reasoning_span.filter(|r| !r.trim().is_empty()),
        solution_span,
        ground_truth,
    }
}

/// Reasoning sketch: the span verbatim when at most `REASONING_WORDS_LIMIT`
/// words, otherwise the first and last `REASONING_WORDS_KEPT` words around
/// the truncation marker. The marker form is only used when it is actually
/// shorter than the trimmed span.
fn reasoning_sketch(reasoning: &str) -> String {
    let trimmed = reasoning.trim();
    let words: Vec<&str> = trimmed.split_whitespace().collect();
    if words.len() <= REASONING_WORDS_LIMIT {
        return trimmed.to_string();
    }
    let head = words[..REASONING_WORDS_KEPT].join(" ");
    let tail = words[words.len() - REASONING_WORDS_KEPT..].join(" ");
    let truncated = format!("{head} {REASONING_TRUNCATION_MARKER} {tail}");
    if truncated.chars().count() < trimmed.chars().count() {
        truncated
    } else {
        trimmed.to_string()
    }
}

fn first_chars(s: &str, n: usize) -> &str {
    match s.char_indices().nth(n) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

fn last_chars(s: &str, n: usize) -> &str {
    let len = s.chars().count();
    if len <= n {
        return s;
    }
    match s.char_indices().nth(len - n) {
        Some((i, _)) => &s[i..],
        None => s,
    }
}

/// Partial evidence view. The payload is the reasoning sketch plus a
/// solution anchor: the first `SOLUTION_ANCHOR_CHARS` characters of the
/// solution span for code, the final boxed answer for math. The
/// thinking-aware variant instead keeps the boxed answer (when present)
/// plus the raw-text tail, for responses whose prefix is hidden reasoning.
/// Either way the payload never exceeds the raw text.
pub fn partial_view(
    c: &Candidate,
    domain: Domain,
    counter: TokenCounter,
    thinking_aware: bool,
) -> EvidenceView {
    let mut parts: Vec<String> = Vec::new();
    if thinking_aware {
        if let Some(span) = last_boxed_span(&c.raw_text) {
            parts.push(span.to_string());
        }
        parts.push(last_chars(&c.raw_text, THINKING_AWARE_TAIL_CHARS).to_string());
    } else {
        if let Some(reasoning) = &c.reasoning_span {
            let sketch = reasoning_sketch(reasoning);
            if !sketch.is_empty() {
                parts.push(sketch);
            }
        }
        match domain {
            Domain::Code => {
                parts.push(first_chars(&c.solution_span, SOLUTION_ANCHOR_CHARS).to_string());
            }
            Domain::Math => {
                if let Some(span) = last_boxed_span(&c.solution_span) {
                    parts.push(span.to_string());
                }
            }
        }
    }
    parts.retain(|p| !p.is_empty());
    let mut payload = parts.join("\n");
    if payload.chars().count() > c.raw_text.chars().count() {
        payload = c.raw_text.clone();
    }
    let size_tokens = counter(&payload);
    EvidenceView {
        level: EvidenceLevel::E1,
        payload,
        size_tokens,
    }
}

/// Full evidence view: the raw response verbatim.
pub fn full_view(c: &Candidate, counter: TokenCounter) -> EvidenceView {
    EvidenceView {
        level: EvidenceLevel::E2,
        payload: c.raw_text.clone(),
        size_tokens: counter(&c.raw_text),
    }
}

//! Prompt templates shipped as plain-text assets, one per (method, domain,
//! level), plus the generation prompts. Rendering is a byte-exact splice of
//! slot values into `{name}` placeholders; nothing else in the template is
//! touched, and braces that do not form an identifier placeholder are
//! literal text.

use std::collections::HashMap;
use std::sync::OnceLock;

use regex::Regex;
use thiserror::Error;

use caps::{Domain, EvidenceLevel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TemplateId {
    CapsE1Code,
    CapsE1Math,
    CapsE2Code,
    CapsE2Math,
    PointwiseCode,
    PointwiseMath,
    V1PairwiseCode,
    V1PairwiseMath,
    GenCodeDefault,
    GenCodeThinking,
    GenMath,
}

impl TemplateId {
    pub const ALL: [TemplateId; 11] = [
        TemplateId::CapsE1Code,
        TemplateId::CapsE1Math,
        TemplateId::CapsE2Code,
        TemplateId::CapsE2Math,
        TemplateId::PointwiseCode,
        TemplateId::PointwiseMath,
        TemplateId::V1PairwiseCode,
        TemplateId::V1PairwiseMath,
        TemplateId::GenCodeDefault,
        TemplateId::GenCodeThinking,
        TemplateId::GenMath,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            TemplateId::CapsE1Code => "caps_e1_code",
            TemplateId::CapsE1Math => "caps_e1_math",
            TemplateId::CapsE2Code => "caps_e2_code",
            TemplateId::CapsE2Math => "caps_e2_math",
            TemplateId::PointwiseCode => "pointwise_code",
            TemplateId::PointwiseMath => "pointwise_math",
            TemplateId::V1PairwiseCode => "v1_pairwise_code",
            TemplateId::V1PairwiseMath => "v1_pairwise_math",
            TemplateId::GenCodeDefault => "gen_code_default",
            TemplateId::GenCodeThinking => "gen_code_thinking",
            TemplateId::GenMath => "gen_math",
        }
    }

    /// Pairwise verdict template for a cascade comparison.
    pub fn caps_pair(domain: Domain, level: EvidenceLevel) -> TemplateId {
        match (level, domain) {
            (EvidenceLevel::E1, Domain::Code) => TemplateId::CapsE1Code,
            (EvidenceLevel::E1, Domain::Math) => TemplateId::CapsE1Math,
            (_, Domain::Code) => TemplateId::CapsE2Code,
            (_, Domain::Math) => TemplateId::CapsE2Math,
        }
    }

    /// Dual-rating template for a rating-interface comparison.
    pub fn v1_pair(domain: Domain) -> TemplateId {
        match domain {
            Domain::Code => TemplateId::V1PairwiseCode,
            Domain::Math => TemplateId::V1PairwiseMath,
        }
    }

    pub fn pointwise(domain: Domain) -> TemplateId {
        match domain {
            Domain::Code => TemplateId::PointwiseCode,
            Domain::Math => TemplateId::PointwiseMath,
        }
    }
}

/// The shipped template texts.
#[derive(Debug, Clone)]
pub struct TemplateSet {
    texts: HashMap<TemplateId, String>,
}

impl TemplateSet {
    /// The assets compiled into the crate.
    pub fn builtin() -> Self {
        let mut texts = HashMap::new();
        texts.insert(
            TemplateId::CapsE1Code,
            include_str!("templates/caps_e1_code.txt").to_string(),
        );
        texts.insert(
            TemplateId::CapsE1Math,
            include_str!("templates/caps_e1_math.txt").to_string(),
        );
        texts.insert(
            TemplateId::CapsE2Code,
            include_str!("templates/caps_e2_code.txt").to_string(),
        );
        texts.insert(
            TemplateId::CapsE2Math,
            include_str!("templates/caps_e2_math.txt").to_string(),
        );
        texts.insert(
            TemplateId::PointwiseCode,
            include_str!("templates/pointwise_code.txt").to_string(),
        );
        texts.insert(
            TemplateId::PointwiseMath,
            include_str!("templates/pointwise_math.txt").to_string(),
        );
        texts.insert(
            TemplateId::V1PairwiseCode,
            include_str!("templates/v1_pairwise_code.txt").to_string(),
        );
        texts.insert(
            TemplateId::V1PairwiseMath,
            include_str!("templates/v1_pairwise_math.txt").to_string(),
        );
        texts.insert(
            TemplateId::GenCodeDefault,
            include_str!("templates/gen_code_default.txt").to_string(),
        );
        texts.insert(
            TemplateId::GenCodeThinking,
            include_str!("templates/gen_code_thinking.txt").to_string(),
        );
        texts.insert(
            TemplateId::GenMath,
            include_str!("templates/gen_math.txt").to_string(),
        );
        Self { texts }
    }

    pub fn text(&self, id: TemplateId) -> &str {
        self.texts
            .get(&id)
            .map(String::as_str)
            .expect("builtin sets carry every template")
    }

    /// Replaces one template's text, for caller-supplied prompt variants.
    pub fn override_text(&mut self, id: TemplateId, text: String) {
        self.texts.insert(id, text);
    }
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self::builtin()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TemplateError {
    #[error("template references slot '{{{0}}}' but no value was provided")]
    MissingSlot(String),
}

fn placeholder_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{([A-Za-z_][A-Za-z0-9_]*)\}").expect("pattern compiles"))
}

/// Splices slot values into `{name}` placeholders. Every placeholder in
/// the template must have a value; extra slots are ignored; spliced values
/// are never rescanned, so candidate text containing brace patterns cannot
/// inject further substitution.
pub fn render_prompt(template: &str, slots: &[(&str, &str)]) -> Result<String, TemplateError> {
    let mut out = String::with_capacity(template.len());
    let mut last = 0;
    for caps in placeholder_pattern().captures_iter(template) {
        let whole = caps.get(0).expect("match exists");
        let name = &caps[1];
        let value = slots
            .iter()
            .find(|(slot, _)| *slot == name)
            .map(|(_, value)| *value)
            .ok_or_else(|| TemplateError::MissingSlot(name.to_string()))?;
        out.push_str(&template[last..whole.start()]);
        out.push_str(value);
        last = whole.end();
    }
    out.push_str(&template[last..]);
    Ok(out)
}

/// Token cost of a template's fixed text alone, under the given counter:
/// the prompt overhead a live call adds on top of the two evidence views.
pub fn template_overhead_tokens(template: &str, counter: caps::evidence::TokenCounter) -> u64 {
    let stripped = placeholder_pattern().replace_all(template, "");
    counter(&stripped)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_byte_exact_substitution() {
        let out = render_prompt("A: {x}, B: {y_2}!", &[("x", "1"), ("y_2", "2"), ("z", "3")])
            .unwrap();
        assert_eq!(out, "A: 1, B: 2!");
    }

    #[test]
    fn missing_slot_is_an_error() {
        assert_eq!(
            render_prompt("{known} {unknown}", &[("known", "v")]),
            Err(TemplateError::MissingSlot("unknown".into()))
        );
    }

    #[test]
    fn non_identifier_braces_are_literal() {
        let out = render_prompt("\\boxed{} and {2x} stay; {p} goes", &[("p", "v")]).unwrap();
        assert_eq!(out, "\\boxed{} and {2x} stay; v goes");
    }

    #[test]
    fn spliced_values_are_not_rescanned() {
        let out = render_prompt("{a}{b}", &[("a", "{b}"), ("b", "x")]).unwrap();
        assert_eq!(out, "{b}x");
    }

    #[test]
    fn builtin_templates_carry_the_output_tags() {
        let set = TemplateSet::builtin();
        for id in [
            TemplateId::CapsE1Code,
            TemplateId::CapsE1Math,
            TemplateId::CapsE2Code,
            TemplateId::CapsE2Math,
        ] {
            let text = set.text(id);
            assert!(text.contains("<winner>A or B or TIE</winner>"), "{id:?}");
            assert!(text.contains("<confidence>HIGH or LOW</confidence>"), "{id:?}");
        }
        for id in [TemplateId::V1PairwiseCode, TemplateId::V1PairwiseMath] {
            let text = set.text(id);
            assert!(text.contains("<rating_A>INTEGER_1_TO_10</rating_A>"), "{id:?}");
            assert!(text.contains("<rating_B>INTEGER_1_TO_10</rating_B>"), "{id:?}");
        }
        for id in [TemplateId::PointwiseCode, TemplateId::PointwiseMath] {
            assert!(set.text(id).contains("<rating>INTEGER_1_TO_10</rating>"), "{id:?}");
        }
    }

    #[test]
    fn caps_templates_render_with_judge_slots() {
        let set = TemplateSet::builtin();
        let slots = [
            ("problem", "sum two ints"),
            ("evidence_A", "ev a"),
            ("evidence_B", "ev b"),
            ("code_A", "code a"),
            ("code_B", "code b"),
            ("sol_A", "sol a"),
            ("sol_B", "sol b"),
        ];
        for domain in [Domain::Code, Domain::Math] {
            for level in [EvidenceLevel::E1, EvidenceLevel::E2] {
                let id = TemplateId::caps_pair(domain, level);
                let prompt = render_prompt(set.text(id), &slots).unwrap();
                assert!(prompt.contains("sum two ints"));
                assert!(!placeholder_pattern().is_match(&prompt));
            }
        }
    }

    #[test]
    fn overhead_counts_fixed_text_only() {
        let counter: caps::evidence::TokenCounter = |s| s.len() as u64;
        assert_eq!(template_overhead_tokens("ab{x}cd", counter), 4);
    }
}

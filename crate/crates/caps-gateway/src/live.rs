//! Judge backed by a live chat-completions endpoint. Prompts come from the
//! shipped templates, sampling is greedy, and malformed judge output is
//! retried a bounded number of times before falling back to the parser's
//! tie/low defaults.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::sync::OnceLock;

use regex::Regex;

use caps::judge::{parse_rating, ratings_to_outcome, try_parse_confidence, try_parse_winner};
use caps::{Candidate, Confidence, Domain, EvidenceLevel, Judge, JudgeError, RawVerdict, Winner};

use crate::client::{GatewayClient, GatewayError};
use crate::templates::{render_prompt, TemplateId, TemplateSet};

/// How many times malformed judge output is re-requested before the
/// defaults apply.
pub const PARSE_RETRIES_DEFAULT: u32 = 2;

/// A [`Judge`] that sends each comparison to a live endpoint.
#[derive(Debug, Clone)]
pub struct LiveJudge {
    client: GatewayClient,
    templates: TemplateSet,
    parse_retries: u32,
}

impl LiveJudge {
    pub fn new(client: GatewayClient) -> Self {
        Self {
            client,
            templates: TemplateSet::builtin(),
            parse_retries: PARSE_RETRIES_DEFAULT,
        }
    }

    pub fn with_templates(mut self, templates: TemplateSet) -> Self {
        self.templates = templates;
        self
    }

    pub fn with_parse_retries(mut self, retries: u32) -> Self {
        self.parse_retries = retries;
        self
    }

    pub fn templates(&self) -> &TemplateSet {
        &self.templates
    }

    /// Renders the pair prompt for `id`, offering the payloads under every
    /// slot name the shipped pair templates use.
    fn pair_prompt(
        &self,
        id: TemplateId,
        problem: &str,
        payload_a: &str,
        payload_b: &str,
    ) -> Result<String, JudgeError> {
        let slots = [
            ("problem", problem),
            ("evidence_A", payload_a),
            ("evidence_B", payload_b),
            ("code_A", payload_a),
            ("code_B", payload_b),
            ("sol_A", payload_a),
            ("sol_B", payload_b),
        ];
        render_prompt(self.templates.text(id), &slots)
            .map_err(|e| JudgeError::Unavailable(e.to_string()))
    }

    fn complete(&self, prompt: &str) -> Result<String, JudgeError> {
        self.client.complete(prompt, 0.0).map_err(gateway_to_judge)
    }
}

fn gateway_to_judge(e: GatewayError) -> JudgeError {
    JudgeError::Unavailable(e.to_string())
}

fn dual_rating_patterns() -> &'static [(Regex, Regex); 2] {
    static RE: OnceLock<[(Regex, Regex); 2]> = OnceLock::new();
    RE.get_or_init(|| {
        let build = |p: &str| Regex::new(p).expect("pattern compiles");
        [
            (
                build(r"(?i)<rating_a>\s*(\d{1,2})\s*</rating_a>"),
                build(r"(?i)<rating_b>\s*(\d{1,2})\s*</rating_b>"),
            ),
            (
                build(r"(?i)rating[\s_]*a[^\d]*(\d{1,2})"),
                build(r"(?i)rating[\s_]*b[^\d]*(\d{1,2})"),
            ),
        ]
    })
}

/// Extracts the two ratings of a dual-rating response, clamped into
/// 1..=10. Both must parse, from the tagged form or the unstructured
/// fallback.
pub fn try_parse_dual_ratings(text: &str) -> Option<(u8, u8)> {
    for (re_a, re_b) in dual_rating_patterns() {
        let a = re_a.captures(text).and_then(|c| c[1].parse::<u8>().ok());
        let b = re_b.captures(text).and_then(|c| c[1].parse::<u8>().ok());
        if let (Some(a), Some(b)) = (a, b) {
            return Some((a.clamp(1, 10), b.clamp(1, 10)));
        }
    }
    None
}

impl Judge for LiveJudge {
    fn compare(&self, q: &caps::judge::PairQuery<'_>) -> Result<RawVerdict, JudgeError> {
        let id = TemplateId::caps_pair(q.domain, q.level);
        let prompt = self.pair_prompt(id, q.problem, &q.view_a.payload, &q.view_b.payload)?;
        for _ in 0..=self.parse_retries {
            let text = self.complete(&prompt)?;
            if let Some(winner) = try_parse_winner(&text) {
                let confidence = try_parse_confidence(&text).unwrap_or(Confidence::Low);
                return Ok(RawVerdict::new(winner, confidence));
            }
        }
        // Persistently malformed output is an uninformative judgment.
        Ok(RawVerdict::new(Winner::Tie, Confidence::Low))
    }

    fn compare_v1(
        &self,
        q: &caps::judge::PairQuery<'_>,
    ) -> Result<(RawVerdict, f64, f64), JudgeError> {
        let id = TemplateId::v1_pair(q.domain);
        let prompt = self.pair_prompt(id, q.problem, &q.view_a.payload, &q.view_b.payload)?;
        for _ in 0..=self.parse_retries {
            let text = self.complete(&prompt)?;
            if let Some((r_a, r_b)) = try_parse_dual_ratings(&text) {
                return Ok(ratings_to_outcome(r_a, r_b));
            }
        }
        Ok((RawVerdict::new(Winner::Tie, Confidence::Low), 0.5, 0.0))
    }

    fn rate(
        &self,
        problem: &str,
        domain: Domain,
        _c: &Candidate,
        view: &caps::evidence::EvidenceView,
    ) -> Result<u8, JudgeError> {
        let id = TemplateId::pointwise(domain);
        let slots = [
            ("problem", problem),
            ("code", view.payload.as_str()),
            ("solution", view.payload.as_str()),
        ];
        let prompt = render_prompt(self.templates.text(id), &slots)
            .map_err(|e| JudgeError::Unavailable(e.to_string()))?;
        let mut last_err = JudgeError::Parse("no rating in response".into());
        for _ in 0..=self.parse_retries {
            let text = self.complete(&prompt)?;
            match parse_rating(&text) {
                Ok(r) => return Ok(r),
                Err(e) => last_err = e,
            }
        }
        Err(last_err)
    }

    /// Overlaps independent queries on up to `concurrency` worker threads,
    /// preserving query order in the results.
    fn compare_many(
        &self,
        queries: &[caps::judge::PairQuery<'_>],
    ) -> Vec<Result<RawVerdict, JudgeError>> {
        let workers = self.client.config().concurrency.min(queries.len());
        if workers <= 1 {
            return queries.iter().map(|q| self.compare(q)).collect();
        }
        let next = AtomicUsize::new(0);
        let results = Mutex::new((0..queries.len()).map(|_| None).collect::<Vec<_>>());
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let idx = next.fetch_add(1, Ordering::Relaxed);
                    if idx >= queries.len() {
                        break;
                    }
                    let verdict = self.compare(&queries[idx]);
                    results.lock().expect("no panics while holding lock")[idx] = Some(verdict);
                });
            }
        });
        results
            .into_inner()
            .expect("scope joined all workers")
            .into_iter()
            .map(|slot| slot.expect("every query index visited"))
            .collect()
    }
}

/// Evidence level whose calls this judge answers at the given domain, as a
/// template id. Exposed so callers can measure a template's fixed token
/// overhead and feed it into the selection ledger.
pub fn pair_template_for(domain: Domain, level: EvidenceLevel) -> TemplateId {
    TemplateId::caps_pair(domain, level)
}

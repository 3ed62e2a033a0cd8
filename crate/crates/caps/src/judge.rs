//! Judge interface: verdict parsing, outcome conversion, and the
//! parametric simulated judge used for Monte Carlo verification.
//!
//! A pairwise judge sees two evidence views and emits a categorical
//! verdict (winner plus confidence). Conversion to the numeric outcome
//! pair `(v, w)` happens here in exactly one place, as does the
//! confidence-weight floor. The simulated judge draws every decision from
//! a per-pair random stream keyed by the unordered pair, so swapping the
//! presentation order provably mirrors the verdict instead of resampling
//! it.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::OnceLock;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evidence::EvidenceView;
use crate::types::{
    Candidate, CandidateId, Confidence, Domain, EvidenceLevel, JudgeOutcome, RawVerdict, Winner,
};

/// Weight of a high-confidence decisive verdict.
pub const W_HIGH: f64 = 0.67;
/// Weight of a low-confidence decisive verdict.
pub const W_LOW: f64 = 0.22;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum JudgeError {
    #[error("judge backend unavailable: {0}")]
    Unavailable(String),
    #[error("unparseable judge response: {0}")]
    Parse(String),
    #[error("no fixture for pair ({i}, {j}) at {level:?}")]
    MissingFixture {
        i: CandidateId,
        j: CandidateId,
        level: EvidenceLevel,
    },
    #[error("candidate {0} lacks the ground truth the simulated judge requires")]
    MissingGroundTruth(CandidateId),
}

/// One pairwise comparison request. The verdict is always expressed from
/// the `a` side's perspective.
#[derive(Debug, Clone, Copy)]
pub struct PairQuery<'a> {
    pub problem: &'a str,
    pub domain: Domain,
    pub level: EvidenceLevel,
    pub a: &'a Candidate,
    pub b: &'a Candidate,
    pub view_a: &'a EvidenceView,
    pub view_b: &'a EvidenceView,
}

/// A pairwise (and optionally pointwise) verifier.
pub trait Judge {
    /// Compares two candidates and returns a categorical verdict.
    fn compare(&self, q: &PairQuery<'_>) -> Result<RawVerdict, JudgeError>;

    /// Rating-interface comparison: returns the verdict together with the
    /// unfloored `(v, w)` pair. The default derives both from `compare`,
    /// which matches the rating equivalents of the categorical verdicts to
    /// within rounding.
    fn compare_v1(&self, q: &PairQuery<'_>) -> Result<(RawVerdict, f64, f64), JudgeError> {
        let verdict = self.compare(q)?;
        let (v, w) = verdict_weights(verdict);
        Ok((verdict, v, w))
    }

    /// Scores one candidate in isolation on a 1..=10 scale.
    fn rate(
        &self,
        problem: &str,
        domain: Domain,
        c: &Candidate,
        view: &EvidenceView,
    ) -> Result<u8, JudgeError>;

    /// Compares a batch of independent queries. The default runs them
    /// sequentially; backends with request latency may overlap them, but
    /// results must come back in query order.
    fn compare_many(&self, queries: &[PairQuery<'_>]) -> Vec<Result<RawVerdict, JudgeError>> {
        queries.iter().map(|q| self.compare(q)).collect()
    }
}

/// Numeric outcome pair for a categorical verdict, before the weight
/// floor: A-HIGH (1, 0.67), A-LOW (1, 0.22), mirrored for B, any tie
/// (1/2, 0).
pub fn verdict_weights(verdict: RawVerdict) -> (f64, f64) {
    let v = match verdict.winner {
        Winner::A => 1.0,
        Winner::B => 0.0,
        Winner::Tie => 0.5,
    };
    let w = match (verdict.winner, verdict.confidence) {
        (Winner::Tie, _) => 0.0,
        (_, Confidence::High) => W_HIGH,
        (_, Confidence::Low) => W_LOW,
    };
    (v, w)
}

/// Keeps every judgment at least minimally informative for the score
/// update: `max(w, tau_w)`.
pub fn floor_weight(w: f64, tau_w: f64) -> f64 {
    w.max(tau_w)
}

/// Floored numeric outcome for a categorical verdict.
pub fn verdict_to_outcome(verdict: RawVerdict, tau_w: f64) -> (f64, f64) {
    let (v, w) = verdict_weights(verdict);
    (v, floor_weight(w, tau_w))
}

/// Converts two 1..=10 ratings into a verdict and unfloored `(v, w)`:
/// `w = |r_a - r_b| / 9`, equal ratings are a tie, and the confidence tag
/// is bookkeeping only (high iff `w >= 1/2`).
pub fn ratings_to_outcome(r_a: u8, r_b: u8) -> (RawVerdict, f64, f64) {
    let diff = r_a as i16 - r_b as i16;
    let w = diff.unsigned_abs() as f64 / 9.0;
    let (winner, v) = match diff.signum() {
        1 => (Winner::A, 1.0),
        -1 => (Winner::B, 0.0),
        _ => (Winner::Tie, 0.5),
    };
    let confidence = if w >= 0.5 {
        Confidence::High
    } else {
        Confidence::Low
    };
    (RawVerdict::new(winner, confidence), v, w)
}

/// Shared per-call parameters for the outcome-building helpers.
#[derive(Debug, Clone, Copy)]
pub struct PairCall<'a> {
    pub problem: &'a str,
    pub domain: Domain,
    pub level: EvidenceLevel,
    pub tau_w: f64,
    pub prompt_overhead: u64,
}

fn build_query<'a>(
    call: &PairCall<'a>,
    i: &'a Candidate,
    j: &'a Candidate,
    view_i: &'a EvidenceView,
    view_j: &'a EvidenceView,
) -> PairQuery<'a> {
    assert!(i.id < j.id, "pairs are judged in canonical orientation");
    PairQuery {
        problem: call.problem,
        domain: call.domain,
        level: call.level,
        a: i,
        b: j,
        view_a: view_i,
        view_b: view_j,
    }
}

fn outcome_token_cost(call: &PairCall<'_>, view_i: &EvidenceView, view_j: &EvidenceView) -> u64 {
    view_i.size_tokens + view_j.size_tokens + call.prompt_overhead
}

/// Runs one canonical pairwise judgment and packages it as a transcript
/// outcome. `i.id < j.id` is required; `v` comes out from `i`'s
/// perspective.
pub fn judge_pair(
    judge: &dyn Judge,
    call: &PairCall<'_>,
    i: &Candidate,
    j: &Candidate,
    view_i: &EvidenceView,
    view_j: &EvidenceView,
) -> Result<JudgeOutcome, JudgeError> {
    let q = build_query(call, i, j, view_i, view_j);
    let raw_verdict = judge.compare(&q)?;
    let (v, w) = verdict_to_outcome(raw_verdict, call.tau_w);
    Ok(JudgeOutcome {
        i: i.id,
        j: j.id,
        v,
        w,
        level: call.level,
        raw_verdict,
        token_cost: outcome_token_cost(call, view_i, view_j),
    })
}

/// Rating-interface counterpart of [`judge_pair`].
pub fn judge_pair_v1(
    judge: &dyn Judge,
    call: &PairCall<'_>,
    i: &Candidate,
    j: &Candidate,
    view_i: &EvidenceView,
    view_j: &EvidenceView,
) -> Result<JudgeOutcome, JudgeError> {
    let q = build_query(call, i, j, view_i, view_j);
    let (raw_verdict, v, w) = judge.compare_v1(&q)?;
    Ok(JudgeOutcome {
        i: i.id,
        j: j.id,
        v,
        w: floor_weight(w, call.tau_w),
        level: call.level,
        raw_verdict,
        token_cost: outcome_token_cost(call, view_i, view_j),
    })
}

struct VerdictParsers {
    winner_tag: Regex,
    winner_loose: Regex,
    confidence_tag: Regex,
    confidence_loose: Regex,
    rating_tag: Regex,
    rating_loose: Regex,
}

fn parsers() -> &'static VerdictParsers {
    static PARSERS: OnceLock<VerdictParsers> = OnceLock::new();
    PARSERS.get_or_init(|| VerdictParsers {
        winner_tag: Regex::new(r"(?i)<winner>\s*(A|B|TIE)\s*</winner>").unwrap(),
        winner_loose: Regex::new(r"(?i)winner[^a-zA-Z0-9]*(A|B|TIE)\b").unwrap(),
        confidence_tag: Regex::new(r"(?i)<confidence>\s*(HIGH|LOW)\s*</confidence>").unwrap(),
        confidence_loose: Regex::new(r"(?i)confidence[^a-zA-Z0-9]*(HIGH|LOW)\b").unwrap(),
        rating_tag: Regex::new(r"(?i)<rating>\s*(\d{1,2})\s*</rating>").unwrap(),
        rating_loose: Regex::new(r"(?i)rating[^\d]*(\d{1,2})").unwrap(),
    })
}

fn capture_first<'t>(text: &'t str, primary: &Regex, fallback: &Regex) -> Option<&'t str> {
    primary
        .captures(text)
        .or_else(|| fallback.captures(text))
        .map(|c| c.get(1).unwrap().as_str())
}

/// Extracts the winner side: the `<winner>` tag first, then an
/// unstructured "winner ... A|B|TIE" mention.
pub fn try_parse_winner(text: &str) -> Option<Winner> {
    let p = parsers();
    capture_first(text, &p.winner_tag, &p.winner_loose).map(|s| {
        match s.to_ascii_uppercase().as_str() {
            "A" => Winner::A,
            "B" => Winner::B,
            _ => Winner::Tie,
        }
    })
}

/// Extracts the confidence tag, with the same tag-then-loose policy.
pub fn try_parse_confidence(text: &str) -> Option<Confidence> {
    let p = parsers();
    capture_first(text, &p.confidence_tag, &p.confidence_loose).map(|s| {
        if s.eq_ignore_ascii_case("HIGH") {
            Confidence::High
        } else {
            Confidence::Low
        }
    })
}

/// Total verdict parse: winner and confidence are extracted independently
/// and default to TIE and LOW when absent.
pub fn parse_verdict(text: &str) -> RawVerdict {
    RawVerdict {
        winner: try_parse_winner(text).unwrap_or(Winner::Tie),
        confidence: try_parse_confidence(text).unwrap_or(Confidence::Low),
    }
}

/// Extracts a 1..=10 rating, clamping out-of-range values into the scale.
/// A response with no recognizable rating is a parse error.
pub fn parse_rating(text: &str) -> Result<u8, JudgeError> {
    let p = parsers();
    let digits = capture_first(text, &p.rating_tag, &p.rating_loose)
        .ok_or_else(|| JudgeError::Parse(format!("no rating found in {text:?}")))?;
    let value: u8 = digits.parse().expect("regex admits at most two digits");
    Ok(value.clamp(1, 10))
}

/// Parameters of the simulated judge.
///
/// For a pair with differing ground truth the judge picks the correct
/// candidate with the level's accuracy and never ties; confidence is HIGH
/// with probability `p_high_when_correct` only on correct picks. For a
/// pair with equal ground truth it ties with probability
/// `p_tie_when_equal` and otherwise names a uniform winner at LOW
/// confidence. Ratings are drawn around the correct or incorrect mean
/// with uniform spread and clamped into 1..=10.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimJudgeConfig {
    pub accuracy_e1: f64,
    pub accuracy_e2: f64,
    pub p_high_when_correct: f64,
    pub p_tie_when_equal: f64,
    pub rating_correct_mean: f64,
    pub rating_incorrect_mean: f64,
    pub rating_spread: f64,
    pub seed: u64,
}

impl Default for SimJudgeConfig {
    fn default() -> Self {
        Self::moderate()
    }
}

impl SimJudgeConfig {
    /// Mid-strength judge: partial evidence is noticeably weaker than full
    /// evidence.
    pub fn moderate() -> Self {
        Self {
            accuracy_e1: 0.70,
            accuracy_e2: 0.85,
            p_high_when_correct: 0.60,
            p_tie_when_equal: 0.70,
            rating_correct_mean: 9.0,
            rating_incorrect_mean: 3.0,
            rating_spread: 1.0,
            seed: 0,
        }
    }

    /// Oracle judge: always right, always HIGH, ties exactly the pairs
    /// whose ground truth matches.
    pub fn perfect() -> Self {
        Self {
            accuracy_e1: 1.0,
            accuracy_e2: 1.0,
            p_high_when_correct: 1.0,
            p_tie_when_equal: 1.0,
            rating_correct_mean: 9.0,
            rating_incorrect_mean: 3.0,
            rating_spread: 0.0,
            seed: 0,
        }
    }

    /// Uninformative judge: every call is a uniform LOW-confidence winner,
    /// independent of ground truth.
    pub fn null() -> Self {
        Self {
            accuracy_e1: 0.5,
            accuracy_e2: 0.5,
            p_high_when_correct: 0.0,
            p_tie_when_equal: 0.0,
            rating_correct_mean: 5.0,
            rating_incorrect_mean: 5.0,
            rating_spread: 0.0,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn accuracy(&self, level: EvidenceLevel) -> f64 {
        match level {
            EvidenceLevel::E1 => self.accuracy_e1,
            EvidenceLevel::E2 => self.accuracy_e2,
            EvidenceLevel::E0 => unreachable!("judges never see E0 signatures"),
        }
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub(crate) fn mix_stream(seed: u64, parts: &[u64]) -> u64 {
    let mut h = splitmix64(seed);
    for &p in parts {
        h = splitmix64(h ^ p);
    }
    h
}

/// Ground-truth-driven judge with independent per-pair random streams.
///
/// Every decision for the unordered pair `{a, b}` at a given level is
/// drawn from a stream keyed by `(seed, lo, hi, level, occurrence)`, and
/// the decision is made in (lo, hi) space before being oriented to the
/// presentation order. Two consequences: a fresh judge replays the exact
/// same verdict sequence, and swapping the presentation order of a call
/// yields the mirrored verdict rather than an independent draw.
#[derive(Debug, Clone)]
pub struct SimJudge {
    cfg: SimJudgeConfig,
    occurrences: RefCell<HashMap<(CandidateId, CandidateId, u8), u64>>,
}

impl SimJudge {
    pub fn new(cfg: SimJudgeConfig) -> Self {
        Self {
            cfg,
            occurrences: RefCell::new(HashMap::new()),
        }
    }

    pub fn config(&self) -> &SimJudgeConfig {
        &self.cfg
    }

    fn level_code(level: EvidenceLevel) -> u8 {
        match level {
            EvidenceLevel::E0 => 0,
            EvidenceLevel::E1 => 1,
            EvidenceLevel::E2 => 2,
        }
    }

    /// Stream for the next judgment of `(lo, hi)` at `level`. Bumps the
    /// occurrence counter so repeated meetings stay independent.
    fn stream(&self, lo: CandidateId, hi: CandidateId, level: EvidenceLevel) -> ChaCha8Rng {
        let code = Self::level_code(level);
        let occ = {
            let mut map = self.occurrences.borrow_mut();
            let slot = map.entry((lo, hi, code)).or_insert(0);
            let occ = *slot;
            *slot += 1;
            occ
        };
        let key = mix_stream(
            self.cfg.seed,
            &[lo as u64 + 1, hi as u64 + 1, code as u64, occ],
        );
        ChaCha8Rng::seed_from_u64(key)
    }

    fn ground_truth(c: &Candidate) -> Result<bool, JudgeError> {
        c.ground_truth.ok_or(JudgeError::MissingGroundTruth(c.id))
    }
}

impl Judge for SimJudge {
    fn compare(&self, q: &PairQuery<'_>) -> Result<RawVerdict, JudgeError> {
        assert_ne!(q.a.id, q.b.id, "a candidate cannot be judged against itself");
        let (lo, hi) = if q.a.id < q.b.id {
            (q.a, q.b)
        } else {
            (q.b, q.a)
        };
        let y_lo = Self::ground_truth(lo)?;
        let y_hi = Self::ground_truth(hi)?;
        let mut rng = self.stream(lo.id, hi.id, q.level);

        // All draws are in (lo, hi) space; only the final orientation
        // depends on which side is presented as A.
        let verdict_lo = if y_lo != y_hi {
            let pick_correct = rng.gen::<f64>() < self.cfg.accuracy(q.level);
            let lo_wins = pick_correct == y_lo;
            let confidence = if pick_correct && rng.gen::<f64>() < self.cfg.p_high_when_correct {
                Confidence::High
            } else {
                Confidence::Low
            };
            RawVerdict::new(if lo_wins { Winner::A } else { Winner::B }, confidence)
        } else if rng.gen::<f64>() < self.cfg.p_tie_when_equal {
            RawVerdict::new(Winner::Tie, Confidence::Low)
        } else {
            let lo_wins = rng.gen::<f64>() < 0.5;
            RawVerdict::new(if lo_wins { Winner::A } else { Winner::B }, Confidence::Low)
        };

        if q.a.id < q.b.id {
            Ok(verdict_lo)
        } else {
            let mirrored = match verdict_lo.winner {
                Winner::A => Winner::B,
                Winner::B => Winner::A,
                Winner::Tie => Winner::Tie,
            };
            Ok(RawVerdict::new(mirrored, verdict_lo.confidence))
        }
    }

    fn rate(
        &self,
        _problem: &str,
        _domain: Domain,
        c: &Candidate,
        view: &EvidenceView,
    ) -> Result<u8, JudgeError> {
        let correct = Self::ground_truth(c)?;
        let mut rng = self.stream(c.id, c.id, view.level);
        let mean = if correct {
            self.cfg.rating_correct_mean
        } else {
            self.cfg.rating_incorrect_mean
        };
        let offset = (2.0 * rng.gen::<f64>() - 1.0) * self.cfg.rating_spread;
        let rating = (mean + offset).round().clamp(1.0, 10.0);
        Ok(rating as u8)
    }
}

/// Replay judge backed by canned response texts, keyed by the unordered
/// candidate pair and evidence level. Pointwise fixtures use `(id, id)`.
#[derive(Debug, Clone, Default)]
pub struct FixtureJudge {
    responses: HashMap<(CandidateId, CandidateId, u8), String>,
}

/// One canned judge response, as stored in a fixtures JSONL file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixtureLine {
    pub i: CandidateId,
    pub j: CandidateId,
    pub level: EvidenceLevel,
    pub text: String,
}

impl FixtureJudge {
    pub fn new() -> Self {
        Self::default()
    }

    /// Stores a response under the canonical (lower, higher) key.
    pub fn insert(&mut self, i: CandidateId, j: CandidateId, level: EvidenceLevel, text: &str) {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        self.responses
            .insert((lo, hi, SimJudge::level_code(level)), text.to_string());
    }

    /// Loads fixtures from JSONL, one [`FixtureLine`] per line.
    pub fn from_jsonl(text: &str) -> Result<Self, serde_json::Error> {
        let mut judge = Self::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let rec: FixtureLine = serde_json::from_str(line)?;
            judge.insert(rec.i, rec.j, rec.level, &rec.text);
        }
        Ok(judge)
    }

    fn lookup(
        &self,
        i: CandidateId,
        j: CandidateId,
        level: EvidenceLevel,
    ) -> Result<&str, JudgeError> {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        self.responses
            .get(&(lo, hi, SimJudge::level_code(level)))
            .map(String::as_str)
            .ok_or(JudgeError::MissingFixture { i: lo, j: hi, level })
    }
}

impl Judge for FixtureJudge {
    fn compare(&self, q: &PairQuery<'_>) -> Result<RawVerdict, JudgeError> {
        let text = self.lookup(q.a.id, q.b.id, q.level)?;
        let verdict = parse_verdict(text);
        // Fixtures are written in canonical orientation; a reversed query
        // sees the mirrored verdict.
        if q.a.id <= q.b.id {
            Ok(verdict)
        } else {
            let winner = match verdict.winner {
                Winner::A => Winner::B,
                Winner::B => Winner::A,
                Winner::Tie => Winner::Tie,
            };
            Ok(RawVerdict::new(winner, verdict.confidence))
        }
    }

    fn rate(
        &self,
        _problem: &str,
        _domain: Domain,
        c: &Candidate,
        view: &EvidenceView,
    ) -> Result<u8, JudgeError> {
        let text = self.lookup(c.id, c.id, view.level)?;
        parse_rating(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn candidate(id: CandidateId, gt: Option<bool>) -> Candidate {
        Candidate {
            id,
            raw_text: format!("candidate {id}"),
            reasoning_span: None,
            solution_span: format!("candidate {id}"),
            ground_truth: gt,
        }
    }

    fn view(level: EvidenceLevel, tokens: u64) -> EvidenceView {
        EvidenceView {
            level,
            payload: String::new(),
            size_tokens: tokens,
        }
    }

    fn query<'a>(
        a: &'a Candidate,
        b: &'a Candidate,
        va: &'a EvidenceView,
        vb: &'a EvidenceView,
        level: EvidenceLevel,
    ) -> PairQuery<'a> {
        PairQuery {
            problem: "p",
            domain: Domain::Code,
            level,
            a,
            b,
            view_a: va,
            view_b: vb,
        }
    }

    #[test]
    fn winner_tag_beats_loose_mention() {
        assert_eq!(try_parse_winner("<winner>A</winner>"), Some(Winner::A));
        assert_eq!(try_parse_winner("<WINNER> b </WINNER>"), Some(Winner::B));
        assert_eq!(
            try_parse_winner("<winner>TIE</winner> although the winner is B"),
            Some(Winner::Tie)
        );
        assert_eq!(try_parse_winner("The winner was B."), Some(Winner::B));
        assert_eq!(try_parse_winner("Winner: tie"), Some(Winner::Tie));
        assert_eq!(try_parse_winner("no verdict here"), None);
    }

    #[test]
    fn confidence_parses_independently_of_winner() {
        assert_eq!(
            try_parse_confidence("<confidence>HIGH</confidence>"),
            Some(Confidence::High)
        );
        assert_eq!(
            try_parse_confidence("Confidence: low."),
            Some(Confidence::Low)
        );
        assert_eq!(try_parse_confidence("nothing"), None);
        let v = parse_verdict("<winner>A</winner> no confidence given");
        assert_eq!(v, RawVerdict::new(Winner::A, Confidence::Low));
        let v = parse_verdict("confidence high but no winner");
        assert_eq!(v, RawVerdict::new(Winner::Tie, Confidence::High));
        let v = parse_verdict("");
        assert_eq!(v, RawVerdict::new(Winner::Tie, Confidence::Low));
    }

    #[test]
    fn rating_parses_tag_then_loose_and_clamps() {
        assert_eq!(parse_rating("<rating>7</rating>").unwrap(), 7);
        assert_eq!(parse_rating("<rating> 10 </rating>").unwrap(), 10);
        assert_eq!(parse_rating("Rating: 9/10").unwrap(), 9);
        assert_eq!(parse_rating("my rating would be 0").unwrap(), 1);
        assert_eq!(parse_rating("rating: 42").unwrap(), 10);
        assert_eq!(
            parse_rating("<rating>3</rating> but the rating is 9").unwrap(),
            3
        );
        assert!(matches!(
            parse_rating("no numbers anywhere"),
            Err(JudgeError::Parse(_))
        ));
    }

    #[test]
    fn verdict_conversion_table() {
        let tau = 0.05;
        let cases = [
            (Winner::A, Confidence::High, 1.0, 0.67),
            (Winner::A, Confidence::Low, 1.0, 0.22),
            (Winner::B, Confidence::High, 0.0, 0.67),
            (Winner::B, Confidence::Low, 0.0, 0.22),
            (Winner::Tie, Confidence::High, 0.5, 0.05),
            (Winner::Tie, Confidence::Low, 0.5, 0.05),
        ];
        for (winner, confidence, v, w) in cases {
            let got = verdict_to_outcome(RawVerdict::new(winner, confidence), tau);
            assert_eq!(got, (v, w), "{winner:?} {confidence:?}");
        }
    }

    #[test]
    fn rating_outcomes_match_verdict_equivalents() {
        let (verdict, v, w) = ratings_to_outcome(9, 3);
        assert_eq!(verdict, RawVerdict::new(Winner::A, Confidence::High));
        assert_eq!(v, 1.0);
        assert!((w - 6.0 / 9.0).abs() < 1e-12);
        let (verdict, v, w) = ratings_to_outcome(5, 7);
        assert_eq!(verdict, RawVerdict::new(Winner::B, Confidence::Low));
        assert_eq!(v, 0.0);
        assert!((w - 2.0 / 9.0).abs() < 1e-12);
        let (verdict, v, w) = ratings_to_outcome(5, 5);
        assert_eq!(verdict.winner, Winner::Tie);
        assert_eq!((v, w), (0.5, 0.0));
    }

    #[test]
    fn judge_pair_builds_canonical_outcome() {
        let judge = SimJudge::new(SimJudgeConfig::perfect());
        let a = candidate(2, Some(true));
        let b = candidate(5, Some(false));
        let va = view(EvidenceLevel::E2, 4000);
        let vb = view(EvidenceLevel::E2, 4000);
        let call = PairCall {
            problem: "p",
            domain: Domain::Code,
            level: EvidenceLevel::E2,
            tau_w: 0.05,
            prompt_overhead: 500,
        };
        let o = judge_pair(&judge, &call, &a, &b, &va, &vb).unwrap();
        assert_eq!((o.i, o.j), (2, 5));
        assert_eq!((o.v, o.w), (1.0, 0.67));
        assert_eq!(o.token_cost, 8500);
        assert_eq!(o.level, EvidenceLevel::E2);
    }

    #[test]
    fn perfect_judge_is_an_oracle() {
        let judge = SimJudge::new(SimJudgeConfig::perfect());
        let good = candidate(0, Some(true));
        let bad = candidate(1, Some(false));
        let v = view(EvidenceLevel::E1, 250);
        for _ in 0..5 {
            let q = query(&good, &bad, &v, &v, EvidenceLevel::E1);
            assert_eq!(
                judge.compare(&q).unwrap(),
                RawVerdict::new(Winner::A, Confidence::High)
            );
        }
        let also_bad = candidate(2, Some(false));
        let q = query(&bad, &also_bad, &v, &v, EvidenceLevel::E2);
        assert_eq!(judge.compare(&q).unwrap().winner, Winner::Tie);
    }

    #[test]
    fn swapped_presentation_mirrors_the_verdict() {
        for seed in 0..20 {
            let cfg = SimJudgeConfig::moderate().with_seed(seed);
            let forward = SimJudge::new(cfg);
            let backward = SimJudge::new(cfg);
            let a = candidate(3, Some(true));
            let b = candidate(8, Some(false));
            let v = view(EvidenceLevel::E2, 100);
            let fv = forward
                .compare(&query(&a, &b, &v, &v, EvidenceLevel::E2))
                .unwrap();
            let bv = backward
                .compare(&query(&b, &a, &v, &v, EvidenceLevel::E2))
                .unwrap();
            let mirrored = match bv.winner {
                Winner::A => Winner::B,
                Winner::B => Winner::A,
                Winner::Tie => Winner::Tie,
            };
            assert_eq!(fv.winner, mirrored, "seed {seed}");
            assert_eq!(fv.confidence, bv.confidence, "seed {seed}");
        }
    }

    #[test]
    fn repeated_meetings_draw_fresh_streams() {
        let judge = SimJudge::new(SimJudgeConfig::null().with_seed(9));
        let a = candidate(0, Some(true));
        let b = candidate(1, Some(true));
        let v = view(EvidenceLevel::E2, 100);
        let verdicts: Vec<Winner> = (0..64)
            .map(|_| {
                judge
                    .compare(&query(&a, &b, &v, &v, EvidenceLevel::E2))
                    .unwrap()
                    .winner
            })
            .collect();
        let a_wins = verdicts.iter().filter(|w| **w == Winner::A).count();
        // A constant stream would give 0 or 64; a fresh stream per meeting
        // makes either extreme astronomically unlikely.
        assert!(a_wins > 10 && a_wins < 54, "a_wins = {a_wins}");
    }

    #[test]
    fn null_judge_is_uniform_and_low() {
        let judge = SimJudge::new(SimJudgeConfig::null().with_seed(4));
        let v = view(EvidenceLevel::E2, 100);
        let mut a_wins = 0u32;
        let n = 2000;
        for k in 0..n {
            let a = candidate(2 * k, Some(true));
            let b = candidate(2 * k + 1, Some(false));
            let verdict = judge
                .compare(&query(&a, &b, &v, &v, EvidenceLevel::E2))
                .unwrap();
            assert_eq!(verdict.confidence, Confidence::Low);
            assert_ne!(verdict.winner, Winner::Tie);
            if verdict.winner == Winner::A {
                a_wins += 1;
            }
        }
        // 4.5 sigma around 1000 for n = 2000 fair coin flips.
        let share = a_wins as f64 / n as f64;
        assert!((share - 0.5).abs() < 0.05, "share = {share}");
    }

    #[test]
    fn same_seed_replays_identically() {
        let run = |seed: u64| -> Vec<RawVerdict> {
            let judge = SimJudge::new(SimJudgeConfig::moderate().with_seed(seed));
            let v = view(EvidenceLevel::E1, 100);
            let mut out = Vec::new();
            for i in 0..6usize {
                for j in (i + 1)..6 {
                    let a = candidate(i, Some(i % 2 == 0));
                    let b = candidate(j, Some(j % 2 == 0));
                    out.push(judge.compare(&query(&a, &b, &v, &v, EvidenceLevel::E1)).unwrap());
                }
            }
            out
        };
        assert_eq!(run(42), run(42));
        assert_ne!(run(42), run(43));
    }

    #[test]
    fn sim_rate_tracks_ground_truth() {
        let judge = SimJudge::new(SimJudgeConfig::perfect());
        let good = candidate(0, Some(true));
        let bad = candidate(1, Some(false));
        let v = view(EvidenceLevel::E2, 100);
        assert_eq!(judge.rate("p", Domain::Code, &good, &v).unwrap(), 9);
        assert_eq!(judge.rate("p", Domain::Code, &bad, &v).unwrap(), 3);
        let missing = candidate(2, None);
        assert_eq!(
            judge.rate("p", Domain::Code, &missing, &v),
            Err(JudgeError::MissingGroundTruth(2))
        );
    }

    #[test]
    fn missing_ground_truth_is_an_error() {
        let judge = SimJudge::new(SimJudgeConfig::perfect());
        let a = candidate(0, Some(true));
        let b = candidate(1, None);
        let v = view(EvidenceLevel::E1, 10);
        assert_eq!(
            judge.compare(&query(&a, &b, &v, &v, EvidenceLevel::E1)),
            Err(JudgeError::MissingGroundTruth(1))
        );
    }

    #[test]
    fn fixture_judge_replays_and_mirrors() {
        let mut judge = FixtureJudge::new();
        judge.insert(0, 1, EvidenceLevel::E2, "<winner>A</winner><confidence>HIGH</confidence>");
        judge.insert(2, 2, EvidenceLevel::E2, "<rating>8</rating>");
        let a = candidate(0, None);
        let b = candidate(1, None);
        let v = view(EvidenceLevel::E2, 10);
        let forward = judge.compare(&query(&a, &b, &v, &v, EvidenceLevel::E2)).unwrap();
        assert_eq!(forward, RawVerdict::new(Winner::A, Confidence::High));
        let backward = judge.compare(&query(&b, &a, &v, &v, EvidenceLevel::E2)).unwrap();
        assert_eq!(backward, RawVerdict::new(Winner::B, Confidence::High));
        let c = candidate(2, None);
        assert_eq!(judge.rate("p", Domain::Code, &c, &v).unwrap(), 8);
        assert_eq!(
            judge.compare(&query(&a, &c, &v, &v, EvidenceLevel::E2)),
            Err(JudgeError::MissingFixture {
                i: 0,
                j: 2,
                level: EvidenceLevel::E2
            })
        );
    }

    #[test]
    fn fixture_judge_loads_jsonl() {
        let jsonl = concat!(
            r#"{"i":0,"j":1,"level":"E1","text":"<winner>B</winner>"}"#,
            "\n",
            r#"{"i":0,"j":0,"level":"E2","text":"<rating>4</rating>"}"#,
            "\n"
        );
        let judge = FixtureJudge::from_jsonl(jsonl).unwrap();
        let a = candidate(0, None);
        let b = candidate(1, None);
        let v1 = view(EvidenceLevel::E1, 10);
        let verdict = judge.compare(&query(&a, &b, &v1, &v1, EvidenceLevel::E1)).unwrap();
        assert_eq!(verdict.winner, Winner::B);
        let v2 = view(EvidenceLevel::E2, 10);
        assert_eq!(judge.rate("p", Domain::Code, &a, &v2).unwrap(), 4);
    }

    #[test]
    fn default_compare_v1_matches_verdict_weights() {
        let judge = SimJudge::new(SimJudgeConfig::perfect());
        let a = candidate(0, Some(true));
        let b = candidate(1, Some(false));
        let v = view(EvidenceLevel::E2, 100);
        let q = query(&a, &b, &v, &v, EvidenceLevel::E2);
        let (verdict, vv, w) = judge.compare_v1(&q).unwrap();
        assert_eq!(verdict, RawVerdict::new(Winner::A, Confidence::High));
        assert_eq!((vv, w), (1.0, 0.67));
    }

    #[test]
    fn floor_weight_only_raises() {
        assert_eq!(floor_weight(0.0, 0.05), 0.05);
        assert_eq!(floor_weight(0.22, 0.05), 0.22);
        assert_eq!(floor_weight(0.67, 0.05), 0.67);
    }

    #[test]
    fn token_cost_sums_views_and_overhead() {
        let call = PairCall {
            problem: "p",
            domain: Domain::Math,
            level: EvidenceLevel::E1,
            tau_w: 0.05,
            prompt_overhead: 500,
        };
        let va = view(EvidenceLevel::E1, 250);
        let vb = view(EvidenceLevel::E1, 250);
        assert_eq!(outcome_token_cost(&call, &va, &vb), 1000);
    }
}

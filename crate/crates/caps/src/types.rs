//! Domain types shared by every module: candidates, judge outcomes,
//! tournament state, and selection results.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::digest;

/// Index of a candidate within its pool. Ids are stable for the lifetime of
/// a selection run; deduplication keeps the representative's original id.
pub type CandidateId = usize;

/// Problem domain, which controls signature extraction and partial views.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Code,
    Math,
}

/// How much of a candidate a judge sees. E0 is a signature used only for
/// clustering and is never shown to a judge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EvidenceLevel {
    E0,
    E1,
    E2,
}

/// Winner side of a pairwise verdict, from the A side's perspective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Winner {
    A,
    B,
    Tie,
}

/// Judge-reported confidence in a pairwise verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Confidence {
    High,
    Low,
}

/// Categorical verdict as emitted by a pairwise judge, before conversion to
/// the numeric outcome pair `(v, w)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RawVerdict {
    pub winner: Winner,
    pub confidence: Confidence,
}

impl RawVerdict {
    pub const fn new(winner: Winner, confidence: Confidence) -> Self {
        Self { winner, confidence }
    }
}

/// One sampled solution to a problem.
///
/// `reasoning_span` and `solution_span` are extracted from `raw_text` at
/// construction (see [`crate::evidence::parse_candidate`]); `solution_span`
/// is always a substring of `raw_text`. `ground_truth` is the unobserved
/// correctness flag and is only populated in simulation and evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: CandidateId,
    pub raw_text: String,
    pub reasoning_span: Option<String>,
    pub solution_span: String,
    pub ground_truth: Option<bool>,
}

/// One pairwise judgment. `v` is the outcome from `i`'s perspective
/// (1 win, 1/2 tie, 0 loss) and `w` the confidence weight, already floored
/// at the configured tau_w. `i < j` always: pairs are judged in canonical
/// orientation with the lower id as the A side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JudgeOutcome {
    pub i: CandidateId,
    pub j: CandidateId,
    pub v: f64,
    pub w: f64,
    pub level: EvidenceLevel,
    pub raw_verdict: RawVerdict,
    pub token_cost: u64,
}

/// Cumulative per-candidate scores, cluster sizes, the judged-pair
/// transcript, and the run's random generator.
///
/// Single-writer: all outcome applications go through [`Self::apply`], which
/// bumps exactly two scores by `w*v` and `w*(1-v)`. Judgments inside one
/// round are independent and may be computed concurrently, but they must be
/// applied here in canonical pair order (ascending lower id) so the
/// transcript is deterministic.
#[derive(Debug, Clone)]
pub struct TournamentState {
    scores: Vec<f64>,
    cluster_sizes: Vec<u32>,
    pub transcript: Vec<JudgeOutcome>,
    rng: ChaCha8Rng,
}

impl TournamentState {
    /// Fresh state for a pool of `n` candidates: zero scores, unit cluster
    /// sizes, empty transcript, generator seeded with `seed`.
    pub fn new(n: usize, seed: u64) -> Self {
        Self {
            scores: vec![0.0; n],
            cluster_sizes: vec![1; n],
            transcript: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn score(&self, id: CandidateId) -> f64 {
        self.scores[id]
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    /// Cluster size nu recorded by deduplication. Representatives carry
    /// their cluster's size; candidates absorbed into another representative
    /// carry 0 so that the sizes always sum to the original pool size.
    pub fn cluster_size(&self, id: CandidateId) -> u32 {
        self.cluster_sizes[id]
    }

    pub fn set_cluster_sizes(&mut self, sizes: Vec<u32>) {
        assert_eq!(sizes.len(), self.scores.len());
        self.cluster_sizes = sizes;
    }

    /// Applies one judgment: `S(i) += w*v`, `S(j) += w*(1-v)`, and appends
    /// it to the transcript.
    pub fn apply(&mut self, outcome: JudgeOutcome) {
        self.scores[outcome.i] += outcome.w * outcome.v;
        self.scores[outcome.j] += outcome.w * (1.0 - outcome.v);
        self.transcript.push(outcome);
    }

    /// Re-applies a transcript to fresh scores, returning the score vector
    /// it produces. Used to check replay determinism.
    pub fn replay(n: usize, transcript: &[JudgeOutcome]) -> Vec<f64> {
        let mut scores = vec![0.0; n];
        for o in transcript {
            scores[o.i] += o.w * o.v;
            scores[o.j] += o.w * (1.0 - o.v);
        }
        scores
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// Uniform draw used for tie-breaking.
    pub fn coin(&mut self) -> bool {
        self.rng.gen::<bool>()
    }

    /// Uniform index draw used for tie-breaking among `n` equal options.
    pub fn pick_index(&mut self, n: usize) -> usize {
        assert!(n > 0);
        self.rng.gen_range(0..n)
    }
}

/// Selection method identifiers used by the CLI, config files, and reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Vanilla,
    Pointwise,
    Random,
    Swiss,
    Caps,
    CapsR,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Vanilla,
        Method::Pointwise,
        Method::Random,
        Method::Swiss,
        Method::Caps,
        Method::CapsR,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Vanilla => "vanilla",
            Method::Pointwise => "pointwise",
            Method::Random => "random",
            Method::Swiss => "swiss",
            Method::Caps => "caps",
            Method::CapsR => "caps_r",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "vanilla" => Ok(Method::Vanilla),
            "pointwise" => Ok(Method::Pointwise),
            "random" => Ok(Method::Random),
            "swiss" => Ok(Method::Swiss),
            "caps" => Ok(Method::Caps),
            "caps_r" => Ok(Method::CapsR),
            other => Err(format!(
                "unknown method '{other}' (expected vanilla|pointwise|random|swiss|caps|caps_r)"
            )),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Verifier-token ledger split by evidence level.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenLedger {
    pub calls_e1: u64,
    pub calls_e2: u64,
    pub tokens_e1: u64,
    pub tokens_e2: u64,
}

impl TokenLedger {
    pub fn record(&mut self, level: EvidenceLevel, tokens: u64) {
        match level {
            EvidenceLevel::E1 => {
                self.calls_e1 += 1;
                self.tokens_e1 += tokens;
            }
            EvidenceLevel::E2 => {
                self.calls_e2 += 1;
                self.tokens_e2 += tokens;
            }
            EvidenceLevel::E0 => panic!("E0 signatures never reach a judge"),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls_e1 + self.calls_e2
    }

    pub fn total(&self) -> u64 {
        self.tokens_e1 + self.tokens_e2
    }
}

/// Judge calls per pipeline stage. Baselines have no stage structure and
/// report all of their calls under `stage_c`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCalls {
    pub stage_a: u64,
    pub stage_b: u64,
    pub stage_c: u64,
}

impl StageCalls {
    pub fn total(&self) -> u64 {
        self.stage_a + self.stage_b + self.stage_c
    }
}

/// Outcome of one selection run.
///
/// The serialized record carries the transcript's 64-bit digest rather than
/// the transcript itself; the in-memory value keeps the full transcript for
/// diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub method: Method,
    pub winner: CandidateId,
    pub finalists: Vec<CandidateId>,
    pub stage_calls: StageCalls,
    pub ledger: TokenLedger,
    pub rescue_triggered: bool,
    pub transcript_digest: u64,
    #[serde(skip)]
    pub transcript: Vec<JudgeOutcome>,
}

impl SelectionResult {
    /// Assembles a result, computing the transcript digest.
    pub fn new(
        method: Method,
        winner: CandidateId,
        finalists: Vec<CandidateId>,
        stage_calls: StageCalls,
        ledger: TokenLedger,
        rescue_triggered: bool,
        transcript: Vec<JudgeOutcome>,
    ) -> Self {
        let transcript_digest = digest::transcript_digest(&transcript);
        Self {
            method,
            winner,
            finalists,
            stage_calls,
            ledger,
            rescue_triggered,
            transcript_digest,
            transcript,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn apply_updates_exactly_two_scores_by_w() {
        let mut st = TournamentState::new(4, 7);
        let outcome = JudgeOutcome {
            i: 1,
            j: 3,
            v: 1.0,
            w: 0.67,
            level: EvidenceLevel::E2,
            raw_verdict: RawVerdict::new(Winner::A, Confidence::High),
            token_cost: 8500,
        };
        st.apply(outcome);
        assert_eq!(st.score(1), 0.67);
        assert_eq!(st.score(3), 0.0);
        assert_eq!(st.score(0), 0.0);
        assert_eq!(st.score(2), 0.0);
        let total: f64 = st.scores().iter().sum();
        assert!((total - 0.67).abs() < 1e-12);
    }

    #[test]
    fn tie_outcome_splits_weight_evenly() {
        let mut st = TournamentState::new(2, 0);
        st.apply(JudgeOutcome {
            i: 0,
            j: 1,
            v: 0.5,
            w: 0.05,
            level: EvidenceLevel::E1,
            raw_verdict: RawVerdict::new(Winner::Tie, Confidence::Low),
            token_cost: 1000,
        });
        assert_eq!(st.score(0), 0.025);
        assert_eq!(st.score(1), 0.025);
    }

    #[test]
    fn replay_reproduces_scores() {
        let mut st = TournamentState::new(3, 11);
        for (i, j, v, w) in [(0, 1, 1.0, 0.67), (0, 2, 0.5, 0.05), (1, 2, 0.0, 0.22)] {
            st.apply(JudgeOutcome {
                i,
                j,
                v,
                w,
                level: EvidenceLevel::E2,
                raw_verdict: RawVerdict::new(Winner::Tie, Confidence::Low),
                token_cost: 0,
            });
        }
        let replayed = TournamentState::replay(3, &st.transcript);
        assert_eq!(replayed, st.scores());
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        let json = serde_json::to_string(&Method::CapsR).unwrap();
        assert_eq!(json, "\"caps_r\"");
    }
}

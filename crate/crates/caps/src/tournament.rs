//! The selection pipeline: signature dedup, one cheap-evidence halving
//! round, full-evidence halving down to the finalist pool, an optional
//! rescue admission, and a confidence-normalized round-robin final.
//!
//! Determinism contract: given the same pool, configuration, and judge
//! behavior, the run produces the same transcript. Every random choice
//! (seeding tiebreaks, score-tie winners, rescue tie picks) comes from the
//! tournament state's generator, and pairs inside a round are judged and
//! applied in canonical order (ascending lower id).

use std::collections::HashMap;

use rand::Rng;
use thiserror::Error;

use crate::config::{validate_config, CapsConfig, ConfigError};
use crate::evidence::{
    approx_chars_counter, full_view, partial_view, signature, EvidenceView, TokenCounter,
};
use crate::judge::{judge_pair, Judge, JudgeError, PairCall};
use crate::types::{
    Candidate, CandidateId, Domain, EvidenceLevel, JudgeOutcome, Method, SelectionResult,
    StageCalls, TokenLedger, TournamentState,
};

/// How candidate text is turned into judge-visible views.
#[derive(Debug, Clone, Copy)]
pub struct EvidenceSpec {
    pub domain: Domain,
    /// Use the boxed-answer-plus-tail partial view for responses whose
    /// prefix is hidden chain-of-thought.
    pub thinking_aware: bool,
    pub counter: TokenCounter,
}

impl EvidenceSpec {
    pub fn new(domain: Domain) -> Self {
        Self {
            domain,
            thinking_aware: false,
            counter: approx_chars_counter,
        }
    }
}

/// One selection problem: the statement, the candidate pool, and how to
/// render evidence. Candidate ids must equal pool positions.
#[derive(Debug, Clone, Copy)]
pub struct ProblemSetup<'a> {
    pub problem: &'a str,
    pub pool: &'a [Candidate],
    pub evidence: EvidenceSpec,
    /// Prompt-template tokens added to every judge call on top of the two
    /// candidate views.
    pub prompt_overhead: u64,
}

#[derive(Debug, Error, PartialEq)]
pub enum SelectError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Judge(#[from] JudgeError),
    #[error("cannot select from an empty pool")]
    EmptyPool,
    #[error("candidate at position {position} has id {id}; ids must equal pool positions")]
    MisnumberedPool { position: usize, id: CandidateId },
}

/// Groups candidates by equivalence signature. Returns the representative
/// ids in ascending order and the per-candidate cluster sizes, where a
/// representative carries its cluster's size and absorbed members carry 0.
/// The representative is the member with the most tokens of raw text, ties
/// to the lowest id. A math candidate with no boxed answer never merges.
pub fn dedup_pool(
    pool: &[Candidate],
    domain: Domain,
    counter: TokenCounter,
) -> (Vec<CandidateId>, Vec<u32>) {
    let mut clusters: HashMap<String, Vec<CandidateId>> = HashMap::new();
    for c in pool {
        let key = match signature(c, domain) {
            Ok(sig) => sig,
            // No extractable answer: the candidate is its own cluster.
            Err(_) => format!("unsigned:{}", c.id),
        };
        clusters.entry(key).or_default().push(c.id);
    }
    let mut sizes = vec![0u32; pool.len()];
    let mut reps: Vec<CandidateId> = Vec::with_capacity(clusters.len());
    for members in clusters.values() {
        let rep = *members
            .iter()
            .max_by_key(|&&id| (counter(&pool[id].raw_text), std::cmp::Reverse(id)))
            .expect("clusters are never empty");
        sizes[rep] = members.len() as u32;
        reps.push(rep);
    }
    reps.sort_unstable();
    (reps, sizes)
}

/// Seeding key for a halving round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SeedKey {
    /// Cluster size, used for the first round: consensus mass is the only
    /// signal available before any judgments.
    ClusterSize,
    /// Cumulative score, used once judgments exist.
    Score,
}

/// Judge-call plumbing shared by every stage.
struct CallCtx<'a> {
    judge: &'a dyn Judge,
    problem: &'a str,
    domain: Domain,
    tau_w: f64,
    prompt_overhead: u64,
    pool: &'a [Candidate],
    views_e1: Vec<EvidenceView>,
    views_e2: Vec<EvidenceView>,
}

impl CallCtx<'_> {
    fn view(&self, level: EvidenceLevel, id: CandidateId) -> &EvidenceView {
        match level {
            EvidenceLevel::E1 => &self.views_e1[id],
            EvidenceLevel::E2 => &self.views_e2[id],
            EvidenceLevel::E0 => unreachable!("judges never see E0 signatures"),
        }
    }

    /// Judges one canonical pair, applies the outcome to the state, and
    /// records it against the ledger and the stage's call counter.
    fn judge_apply(
        &self,
        state: &mut TournamentState,
        ledger: &mut TokenLedger,
        stage_calls: &mut u64,
        level: EvidenceLevel,
        lo: CandidateId,
        hi: CandidateId,
    ) -> Result<JudgeOutcome, JudgeError> {
        let call = PairCall {
            problem: self.problem,
            domain: self.domain,
            level,
            tau_w: self.tau_w,
            prompt_overhead: self.prompt_overhead,
        };
        let outcome = judge_pair(
            self.judge,
            &call,
            &self.pool[lo],
            &self.pool[hi],
            self.view(level, lo),
            self.view(level, hi),
        )?;
        state.apply(outcome);
        ledger.record(level, outcome.token_cost);
        *stage_calls += 1;
        Ok(outcome)
    }
}

/// Orders `ids` by the seeding key, descending, breaking ties uniformly at
/// random. One tiebreak draw is consumed per id regardless of the tie
/// structure, so the generator advances identically for pools of equal
/// size.
fn seed_order(state: &mut TournamentState, ids: &[CandidateId], key: SeedKey) -> Vec<CandidateId> {
    let mut decorated: Vec<(f64, u64, CandidateId)> = ids
        .iter()
        .map(|&id| {
            let k = match key {
                SeedKey::ClusterSize => state.cluster_size(id) as f64,
                SeedKey::Score => state.score(id),
            };
            (k, 0u64, id)
        })
        .collect();
    for entry in decorated.iter_mut() {
        entry.1 = state.rng_mut().gen::<u64>();
    }
    decorated.sort_unstable_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .expect("seeding keys are never NaN")
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });
    decorated.into_iter().map(|(_, _, id)| id).collect()
}

/// Picks the surviving side of a judged pair: higher score, then larger
/// cluster, then a coin flip.
fn pair_survivor(
    state: &mut TournamentState,
    lo: CandidateId,
    hi: CandidateId,
) -> (CandidateId, CandidateId) {
    let (s_lo, s_hi) = (state.score(lo), state.score(hi));
    let winner = if s_lo > s_hi {
        lo
    } else if s_hi > s_lo {
        hi
    } else {
        let (n_lo, n_hi) = (state.cluster_size(lo), state.cluster_size(hi));
        if n_lo > n_hi {
            lo
        } else if n_hi > n_lo {
            hi
        } else if state.coin() {
            lo
        } else {
            hi
        }
    };
    let loser = if winner == lo { hi } else { lo };
    (winner, loser)
}

/// Runs elimination rounds over `ids`. With `stop_at` absent exactly one
/// round is played; with `stop_at = f` rounds repeat while more than `f`
/// candidates remain, so a pool already at or below `f` plays none.
///
/// Each round seeds the pool by `key` descending, pairs the strongest seed
/// with the weakest and so on inward, and gives the middle seed of an odd
/// pool a bye at its current score. Returns (survivors ascending,
/// eliminated in elimination order).
#[allow(clippy::too_many_arguments)]
fn eliminate(
    ctx: &CallCtx<'_>,
    state: &mut TournamentState,
    ledger: &mut TokenLedger,
    stage_calls: &mut u64,
    ids: Vec<CandidateId>,
    level: EvidenceLevel,
    key: SeedKey,
    stop_at: Option<usize>,
) -> Result<(Vec<CandidateId>, Vec<CandidateId>), JudgeError> {
    let mut pool = ids;
    let mut eliminated = Vec::new();
    loop {
        if let Some(f) = stop_at {
            if pool.len() <= f {
                break;
            }
        }
        let order = seed_order(state, &pool, key);
        let half = order.len() / 2;
        let mut pairs: Vec<(CandidateId, CandidateId)> = (0..half)
            .map(|k| {
                let (a, b) = (order[k], order[order.len() - 1 - k]);
                (a.min(b), a.max(b))
            })
            .collect();
        pairs.sort_unstable();
        let mut survivors: Vec<CandidateId> = Vec::with_capacity(half + 1);
        if order.len() % 2 == 1 {
            survivors.push(order[half]);
        }
        for (lo, hi) in pairs {
            ctx.judge_apply(state, ledger, stage_calls, level, lo, hi)?;
            let (winner, loser) = pair_survivor(state, lo, hi);
            survivors.push(winner);
            eliminated.push(loser);
        }
        survivors.sort_unstable();
        pool = survivors;
        if stop_at.is_none() {
            break;
        }
    }
    Ok((pool, eliminated))
}

/// Random pick among the ids attaining the maximum of `key`.
pub(crate) fn random_argmax(
    state: &mut TournamentState,
    ids: &[CandidateId],
    key: impl Fn(&TournamentState, CandidateId) -> f64,
) -> CandidateId {
    let best = ids
        .iter()
        .map(|&id| key(state, id))
        .fold(f64::NEG_INFINITY, f64::max);
    let tied: Vec<CandidateId> = ids.iter().copied().filter(|&id| key(state, id) == best).collect();
    tied[state.pick_index(tied.len())]
}

/// Rescue admission: the strongest eliminated candidate rejoins the
/// finalists when its score is within `delta` of the weakest finalist, or
/// within `2 * delta` when it is a singleton cluster. At most one
/// candidate is admitted; ties on either side are broken at random.
fn rescue_pick(
    state: &mut TournamentState,
    finalists: &[CandidateId],
    eliminated: &[CandidateId],
    delta: f64,
) -> Option<CandidateId> {
    if eliminated.is_empty() || finalists.is_empty() {
        return None;
    }
    let c_plus = random_argmax(state, eliminated, |s, id| s.score(id));
    let c_min = random_argmax(state, finalists, |s, id| -s.score(id));
    let gap = (state.score(c_min) - state.score(c_plus)).abs();
    let margin = if state.cluster_size(c_plus) == 1 {
        2.0 * delta
    } else {
        delta
    };
    (gap <= margin).then_some(c_plus)
}

/// Confidence-normalized round-robin over the finalists. Each finalist's
/// final score is sum(w*v) / sum(w) over its own round-robin calls; the
/// winner is the maximum, with ties broken by pre-round-robin score, then
/// cluster size, then at random.
fn round_robin(
    ctx: &CallCtx<'_>,
    state: &mut TournamentState,
    ledger: &mut TokenLedger,
    stage_calls: &mut u64,
    finalists: &[CandidateId],
) -> Result<CandidateId, JudgeError> {
    if finalists.len() == 1 {
        return Ok(finalists[0]);
    }
    let pre: HashMap<CandidateId, f64> =
        finalists.iter().map(|&id| (id, state.score(id))).collect();
    let mut num: HashMap<CandidateId, f64> = finalists.iter().map(|&id| (id, 0.0)).collect();
    let mut den: HashMap<CandidateId, f64> = num.clone();
    for (k, &a) in finalists.iter().enumerate() {
        for &b in &finalists[k + 1..] {
            let outcome =
                ctx.judge_apply(state, ledger, stage_calls, EvidenceLevel::E2, a, b)?;
            *num.get_mut(&a).unwrap() += outcome.w * outcome.v;
            *num.get_mut(&b).unwrap() += outcome.w * (1.0 - outcome.v);
            *den.get_mut(&a).unwrap() += outcome.w;
            *den.get_mut(&b).unwrap() += outcome.w;
        }
    }
    // The confidence floor keeps every weight positive, so each finalist
    // has a well-defined normalized score.
    let s_c: HashMap<CandidateId, f64> = finalists
        .iter()
        .map(|&id| (id, num[&id] / den[&id]))
        .collect();
    let mut tied = max_set(finalists, |id| s_c[&id]);
    if tied.len() > 1 {
        tied = max_set(&tied, |id| pre[&id]);
    }
    if tied.len() > 1 {
        tied = max_set(&tied, |id| state.cluster_size(id) as f64);
    }
    Ok(tied[state.pick_index(tied.len())])
}

/// Ids attaining the maximum of `key`, preserving input order.
fn max_set(ids: &[CandidateId], key: impl Fn(CandidateId) -> f64) -> Vec<CandidateId> {
    let best = ids.iter().map(|&id| key(id)).fold(f64::NEG_INFINITY, f64::max);
    ids.iter().copied().filter(|&id| key(id) == best).collect()
}

/// Rejects empty pools and pools whose candidate ids disagree with their
/// positions.
pub(crate) fn validate_pool(pool: &[Candidate]) -> Result<(), SelectError> {
    if pool.is_empty() {
        return Err(SelectError::EmptyPool);
    }
    for (position, c) in pool.iter().enumerate() {
        if c.id != position {
            return Err(SelectError::MisnumberedPool { position, id: c.id });
        }
    }
    Ok(())
}

/// Runs the full selection pipeline and returns the winner with its
/// transcript and token ledger.
pub fn select_caps(
    setup: &ProblemSetup<'_>,
    cfg: &CapsConfig,
    judge: &dyn Judge,
) -> Result<SelectionResult, SelectError> {
    let pool = setup.pool;
    validate_pool(pool)?;
    validate_config(cfg, pool.len())?;

    let method = if cfg.rescue_enabled {
        Method::CapsR
    } else {
        Method::Caps
    };
    let mut state = TournamentState::new(pool.len(), cfg.seed);
    let reps = if cfg.dedup_enabled {
        let (reps, sizes) = dedup_pool(pool, setup.evidence.domain, setup.evidence.counter);
        state.set_cluster_sizes(sizes);
        reps
    } else {
        (0..pool.len()).collect()
    };

    // A pool that collapses to one representative needs no judging.
    if reps.len() == 1 {
        return Ok(SelectionResult::new(
            method,
            reps[0],
            reps,
            StageCalls::default(),
            TokenLedger::default(),
            false,
            Vec::new(),
        ));
    }

    let ctx = CallCtx {
        judge,
        problem: setup.problem,
        domain: setup.evidence.domain,
        tau_w: cfg.confidence_floor,
        prompt_overhead: setup.prompt_overhead,
        pool,
        views_e1: pool
            .iter()
            .map(|c| {
                partial_view(
                    c,
                    setup.evidence.domain,
                    setup.evidence.counter,
                    setup.evidence.thinking_aware,
                )
            })
            .collect(),
        views_e2: pool.iter().map(|c| full_view(c, setup.evidence.counter)).collect(),
    };

    let mut ledger = TokenLedger::default();
    let mut stage_calls = StageCalls::default();
    let mut eliminated_all: Vec<CandidateId> = Vec::new();

    // One screening round on cheap evidence (full evidence when the cheap
    // tier is disabled), seeded by consensus mass.
    let level_a = if cfg.e1_enabled {
        EvidenceLevel::E1
    } else {
        EvidenceLevel::E2
    };
    let (pool_b, eliminated_a) = eliminate(
        &ctx,
        &mut state,
        &mut ledger,
        &mut stage_calls.stage_a,
        reps,
        level_a,
        SeedKey::ClusterSize,
        None,
    )?;
    eliminated_all.extend(eliminated_a);

    // Full-evidence halving down to the finalist pool, reseeded by score
    // each round.
    let (mut finalists, eliminated_b) = eliminate(
        &ctx,
        &mut state,
        &mut ledger,
        &mut stage_calls.stage_b,
        pool_b,
        EvidenceLevel::E2,
        SeedKey::Score,
        Some(cfg.finalist_count),
    )?;
    eliminated_all.extend(eliminated_b);

    let mut rescue_triggered = false;
    if cfg.rescue_enabled {
        if let Some(rescued) = rescue_pick(&mut state, &finalists, &eliminated_all, cfg.rescue_margin)
        {
            finalists.push(rescued);
            finalists.sort_unstable();
            rescue_triggered = true;
        }
    }

    let winner = round_robin(&ctx, &mut state, &mut ledger, &mut stage_calls.stage_c, &finalists)?;

    Ok(SelectionResult::new(
        method,
        winner,
        finalists,
        stage_calls,
        ledger,
        rescue_triggered,
        state.transcript,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::call_profile;
    use crate::evidence::parse_candidate;
    use crate::judge::{FixtureJudge, SimJudge, SimJudgeConfig};
    use crate::types::{Confidence, RawVerdict, Winner};
    use proptest::prelude::*;

    /// Distinct single-statement programs; candidate `id` is correct iff
    /// `correct[id]`.
    fn code_pool(correct: &[bool]) -> Vec<Candidate> {
        correct
            .iter()
            .enumerate()
            .map(|(id, &gt)| {
                let raw = format!("reason {id}\n```python\nvalue_{id} = {id}\nprint(value_{id})\n```");
                parse_candidate(id, raw, Domain::Code, Some(gt))
            })
            .collect()
    }

    fn setup<'a>(pool: &'a [Candidate]) -> ProblemSetup<'a> {
        ProblemSetup {
            problem: "write a program",
            pool,
            evidence: EvidenceSpec::new(Domain::Code),
            prompt_overhead: 500,
        }
    }

    fn sim(cfg: SimJudgeConfig) -> SimJudge {
        SimJudge::new(cfg)
    }

    #[test]
    fn dedup_groups_by_signature() {
        // Ids 0, 2, 4 share a body modulo imports and comments; 1 and 3 are
        // distinct.
        let raws = [
            "```python\nimport os\nx = 1\n```",
            "```python\ny = 2\n```",
            "```python\nx = 1  # same\n```",
            "```python\nz = 3\n```",
            "```python\n   x = 1\n```",
        ];
        let pool: Vec<Candidate> = raws
            .iter()
            .enumerate()
            .map(|(id, raw)| parse_candidate(id, raw.to_string(), Domain::Code, None))
            .collect();
        let (reps, sizes) = dedup_pool(&pool, Domain::Code, approx_chars_counter);
        // Id 0 has the longest raw text in its cluster.
        assert_eq!(reps, vec![0, 1, 3]);
        assert_eq!(sizes[0], 3);
        assert_eq!(sizes[1], 1);
        assert_eq!(sizes[3], 1);
        assert_eq!(sizes[2] + sizes[4], 0);
        assert_eq!(sizes.iter().sum::<u32>() as usize, pool.len());
    }

    #[test]
    fn unsigned_math_candidates_stay_unique() {
        let pool: Vec<Candidate> = (0..3)
            .map(|id| parse_candidate(id, "no boxed answer".to_string(), Domain::Math, None))
            .collect();
        let (reps, sizes) = dedup_pool(&pool, Domain::Math, approx_chars_counter);
        assert_eq!(reps, vec![0, 1, 2]);
        assert_eq!(sizes, vec![1, 1, 1]);
    }

    #[test]
    fn standard_pool_call_counts() {
        let pool = code_pool(&[true; 16]);
        let cfg = CapsConfig::default().with_seed(3);
        let result = select_caps(&setup(&pool), &cfg, &sim(SimJudgeConfig::moderate())).unwrap();
        assert_eq!(result.stage_calls.stage_a, 8);
        assert_eq!(result.stage_calls.stage_b, 4);
        assert_eq!(result.stage_calls.stage_c, 6);
        assert_eq!(result.ledger.calls_e1, 8);
        assert_eq!(result.ledger.calls_e2, 10);
        assert_eq!(result.finalists.len(), 4);
        assert_eq!(result.transcript.len(), 18);
        assert!(!result.rescue_triggered);
        assert_eq!(result.method, Method::Caps);
    }

    #[test]
    fn perfect_judge_always_selects_the_correct_candidate() {
        for seed in 0..10 {
            let mut correct = [false; 16];
            correct[(seed as usize * 5) % 16] = true;
            let pool = code_pool(&correct);
            let cfg = CapsConfig::default().with_seed(seed);
            let result =
                select_caps(&setup(&pool), &cfg, &sim(SimJudgeConfig::perfect())).unwrap();
            assert!(correct[result.winner], "seed {seed}");
        }
    }

    #[test]
    fn same_seed_same_transcript() {
        let pool = code_pool(&[
            true, false, false, true, false, false, false, true, false, false, true, false, false,
            false, false, true,
        ]);
        let cfg = CapsConfig::default().with_seed(11);
        let judge_cfg = SimJudgeConfig::moderate().with_seed(5);
        let a = select_caps(&setup(&pool), &cfg, &sim(judge_cfg)).unwrap();
        let b = select_caps(&setup(&pool), &cfg, &sim(judge_cfg)).unwrap();
        assert_eq!(a.transcript_digest, b.transcript_digest);
        assert_eq!(a.winner, b.winner);
        assert_eq!(a.finalists, b.finalists);
        let replayed = TournamentState::replay(pool.len(), &a.transcript);
        let also = TournamentState::replay(pool.len(), &b.transcript);
        assert_eq!(replayed, also);
    }

    #[test]
    fn bye_advances_without_a_call() {
        let pool = code_pool(&[true, false, false, false, false]);
        let mut cfg = CapsConfig::default().with_seed(2);
        cfg.finalist_count = 2;
        let result = select_caps(&setup(&pool), &cfg, &sim(SimJudgeConfig::moderate())).unwrap();
        // Five candidates: two pairs plus a bye, then one pair reaches two
        // finalists, then one final call.
        assert_eq!(result.stage_calls.stage_a, 2);
        assert_eq!(result.stage_calls.stage_b, 1);
        assert_eq!(result.stage_calls.stage_c, 1);
    }

    #[test]
    fn duplicate_heavy_pool_shrinks_every_stage() {
        // Eleven copies of one program plus five distinct others: six
        // representatives, so the whole run is 3 cheap calls plus 3 full
        // calls.
        let mut raws: Vec<String> = (0..11)
            .map(|_| "```python\nshared = 1\n```".to_string())
            .collect();
        for k in 0..5 {
            raws.push(format!("```python\nunique_{k} = {k}\n```"));
        }
        let pool: Vec<Candidate> = raws
            .into_iter()
            .enumerate()
            .map(|(id, raw)| parse_candidate(id, raw, Domain::Code, Some(id == 0)))
            .collect();
        let cfg = CapsConfig::default().with_seed(1);
        let result = select_caps(&setup(&pool), &cfg, &sim(SimJudgeConfig::moderate())).unwrap();
        assert_eq!(result.stage_calls.stage_a, 3);
        assert_eq!(result.stage_calls.stage_b, 0);
        assert_eq!(result.stage_calls.stage_c, 3);
        assert_eq!(result.finalists.len(), 3);

        // With dedup disabled the same pool pays the full 16-candidate
        // schedule.
        let mut no_dedup = cfg;
        no_dedup.dedup_enabled = false;
        let full = select_caps(&setup(&pool), &no_dedup, &sim(SimJudgeConfig::moderate())).unwrap();
        assert_eq!(full.stage_calls.stage_a, 8);
        assert_eq!(full.stage_calls.stage_b, 4);
        assert_eq!(full.stage_calls.stage_c, 6);
    }

    #[test]
    fn unanimous_pool_short_circuits() {
        let pool: Vec<Candidate> = (0..16)
            .map(|id| {
                parse_candidate(
                    id,
                    "```python\nanswer = 7\n```".to_string(),
                    Domain::Code,
                    Some(true),
                )
            })
            .collect();
        let cfg = CapsConfig::default();
        let result = select_caps(&setup(&pool), &cfg, &sim(SimJudgeConfig::moderate())).unwrap();
        assert_eq!(result.winner, 0);
        assert_eq!(result.finalists, vec![0]);
        assert_eq!(result.ledger.calls(), 0);
        assert_eq!(result.transcript.len(), 0);
        assert_eq!(result.transcript_digest, crate::digest::transcript_digest(&[]));
    }

    #[test]
    fn disabling_the_cheap_tier_moves_stage_a_to_full_evidence() {
        let pool = code_pool(&[true; 8]);
        let mut cfg = CapsConfig::default().with_seed(4);
        cfg.e1_enabled = false;
        let result = select_caps(&setup(&pool), &cfg, &sim(SimJudgeConfig::moderate())).unwrap();
        assert_eq!(result.ledger.calls_e1, 0);
        assert_eq!(result.ledger.calls_e2, result.stage_calls.total());
        assert_eq!(result.stage_calls.stage_a, 4);
    }

    #[test]
    fn empty_and_misnumbered_pools_are_rejected() {
        let cfg = CapsConfig::default();
        let judge = sim(SimJudgeConfig::perfect());
        let empty: Vec<Candidate> = Vec::new();
        assert_eq!(
            select_caps(&setup(&empty), &cfg, &judge),
            Err(SelectError::EmptyPool)
        );
        let mut pool = code_pool(&[true, false]);
        pool[1].id = 7;
        assert_eq!(
            select_caps(&setup(&pool), &cfg, &judge),
            Err(SelectError::MisnumberedPool { position: 1, id: 7 })
        );
    }

    #[test]
    fn rescue_admits_within_margin() {
        let mut state = TournamentState::new(4, 0);
        // No singleton clusters, so the plain margin applies throughout.
        state.set_cluster_sizes(vec![2, 2, 2, 2]);
        // Scores: 0 -> 0.50, 1 -> 0.30, 2 -> 0.60, 3 -> 0.90.
        for (id, score) in [(0, 0.50), (1, 0.30), (2, 0.60), (3, 0.90)] {
            state.apply(JudgeOutcome {
                i: id,
                j: (id + 1) % 4,
                v: 1.0,
                w: score,
                level: EvidenceLevel::E2,
                raw_verdict: RawVerdict::new(Winner::A, Confidence::High),
                token_cost: 0,
            });
        }
        // The strongest eliminated candidate (0 at 0.50) sits 0.10 below
        // the weakest finalist (2 at 0.60): inside the 0.15 margin.
        assert_eq!(rescue_pick(&mut state, &[2, 3], &[0, 1], 0.15), Some(0));
        // A tighter margin shuts the door.
        assert_eq!(rescue_pick(&mut state, &[2, 3], &[0, 1], 0.05), None);
        assert_eq!(rescue_pick(&mut state, &[2, 3], &[], 0.15), None);
    }

    #[test]
    fn rescue_widens_margin_for_singleton_clusters() {
        let mut state = TournamentState::new(3, 0);
        state.set_cluster_sizes(vec![1, 2, 0]);
        // 0 -> 0.35, 1 -> 0.60.
        state.apply(JudgeOutcome {
            i: 0,
            j: 2,
            v: 1.0,
            w: 0.35,
            level: EvidenceLevel::E2,
            raw_verdict: RawVerdict::new(Winner::A, Confidence::High),
            token_cost: 0,
        });
        state.apply(JudgeOutcome {
            i: 1,
            j: 2,
            v: 1.0,
            w: 0.60,
            level: EvidenceLevel::E2,
            raw_verdict: RawVerdict::new(Winner::A, Confidence::High),
            token_cost: 0,
        });
        // Gap 0.25 exceeds delta but not 2 * delta; candidate 0 is a
        // singleton, so the wide margin applies.
        assert_eq!(rescue_pick(&mut state, &[1], &[0], 0.15), Some(0));
        // The same gap with consensus mass behind the candidate does not
        // qualify.
        state.set_cluster_sizes(vec![2, 1, 0]);
        assert_eq!(rescue_pick(&mut state, &[1], &[0], 0.15), None);
    }

    #[test]
    fn rescued_candidate_joins_the_final_and_adds_f_calls() {
        // Sixteen distinct candidates, all equally plausible to a null
        // judge; scan seeds for a run where the rescue fires and check the
        // call accounting on it.
        let pool = code_pool(&[true; 16]);
        let judge_cfg = SimJudgeConfig::null();
        let mut saw_rescue = false;
        for seed in 0..40 {
            let cfg = CapsConfig::default().with_seed(seed).with_rescue(true);
            let result = select_caps(&setup(&pool), &cfg, &sim(judge_cfg)).unwrap();
            assert_eq!(result.method, Method::CapsR);
            if result.rescue_triggered {
                saw_rescue = true;
                assert_eq!(result.finalists.len(), 5);
                assert_eq!(result.stage_calls.stage_c, 10);
            } else {
                assert_eq!(result.finalists.len(), 4);
                assert_eq!(result.stage_calls.stage_c, 6);
            }
        }
        assert!(saw_rescue, "no rescue in 40 seeds");
    }

    #[test]
    fn round_robin_normalizes_by_confidence() {
        // Scripted final: 0 beats 1 at high confidence, 0 ties 2, 1 beats
        // 2 at low confidence.
        let pool = code_pool(&[false, false, false]);
        let mut fixtures = FixtureJudge::new();
        fixtures.insert(0, 1, EvidenceLevel::E2, "<winner>A</winner><confidence>HIGH</confidence>");
        fixtures.insert(0, 2, EvidenceLevel::E2, "<winner>TIE</winner>");
        fixtures.insert(1, 2, EvidenceLevel::E2, "<winner>A</winner><confidence>LOW</confidence>");
        let ctx = CallCtx {
            judge: &fixtures,
            problem: "p",
            domain: Domain::Code,
            tau_w: 0.05,
            prompt_overhead: 500,
            pool: &pool,
            views_e1: pool
                .iter()
                .map(|c| partial_view(c, Domain::Code, approx_chars_counter, false))
                .collect(),
            views_e2: pool.iter().map(|c| full_view(c, approx_chars_counter)).collect(),
        };
        let mut state = TournamentState::new(3, 0);
        let mut ledger = TokenLedger::default();
        let mut calls = 0u64;
        let winner = round_robin(&ctx, &mut state, &mut ledger, &mut calls, &[0, 1, 2]).unwrap();
        assert_eq!(winner, 0);
        assert_eq!(calls, 3);
        // s_C(0) = (0.67 + 0.025) / 0.72, s_C(1) = 0.22 / 0.89,
        // s_C(2) = 0.025 / 0.27.
        let replayed = TournamentState::replay(3, &state.transcript);
        assert!((replayed[0] - 0.695).abs() < 1e-12);
        assert!((replayed[1] - 0.22).abs() < 1e-12);
        assert!((replayed[2] - 0.025).abs() < 1e-12);
    }

    #[test]
    fn seed_order_is_descending_with_random_ties() {
        let mut state = TournamentState::new(4, 9);
        state.set_cluster_sizes(vec![1, 5, 5, 2]);
        let order = seed_order(&mut state, &[0, 1, 2, 3], SeedKey::ClusterSize);
        assert_eq!(order[3], 0);
        assert_eq!(order[2], 3);
        assert!(order[..2].contains(&1) && order[..2].contains(&2));
        // Both tie orders appear across seeds.
        let mut first_slots = std::collections::HashSet::new();
        for seed in 0..32 {
            let mut st = TournamentState::new(4, seed);
            st.set_cluster_sizes(vec![1, 5, 5, 2]);
            first_slots.insert(seed_order(&mut st, &[0, 1, 2, 3], SeedKey::ClusterSize)[0]);
        }
        assert_eq!(first_slots.len(), 2);
    }

    #[test]
    fn pair_survivor_applies_the_tiebreak_chain() {
        let mut state = TournamentState::new(4, 0);
        state.set_cluster_sizes(vec![3, 1, 2, 2]);
        // Score decides when scores differ.
        state.apply(JudgeOutcome {
            i: 1,
            j: 2,
            v: 1.0,
            w: 0.22,
            level: EvidenceLevel::E2,
            raw_verdict: RawVerdict::new(Winner::A, Confidence::Low),
            token_cost: 0,
        });
        assert_eq!(pair_survivor(&mut state, 1, 2), (1, 2));
        // Equal scores fall back to cluster size.
        assert_eq!(pair_survivor(&mut state, 0, 3), (0, 3));
        // Equal scores and clusters fall back to the coin.
        let mut outcomes = std::collections::HashSet::new();
        for seed in 0..32 {
            let mut st = TournamentState::new(4, seed);
            st.set_cluster_sizes(vec![2, 2, 1, 1]);
            outcomes.insert(pair_survivor(&mut st, 2, 3).0);
        }
        assert_eq!(outcomes.len(), 2);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn pipeline_invariants(
            n in 2usize..24,
            seed in 0u64..1000,
            judge_seed in 0u64..1000,
            rescue in any::<bool>(),
            gt_bits in prop::collection::vec(any::<bool>(), 24),
        ) {
            let pool = code_pool(&gt_bits[..n]);
            let f = 4.min(n.div_ceil(2));
            let mut cfg = CapsConfig::default().with_seed(seed).with_rescue(rescue);
            cfg.finalist_count = f;
            let judge = sim(SimJudgeConfig::moderate().with_seed(judge_seed));
            let result = select_caps(&setup(&pool), &cfg, &judge).unwrap();

            prop_assert!(result.finalists.contains(&result.winner));
            prop_assert_eq!(result.ledger.calls(), result.stage_calls.total());
            prop_assert_eq!(result.transcript.len() as u64, result.ledger.calls());
            for o in &result.transcript {
                prop_assert!(o.i < o.j);
                prop_assert!(o.w > 0.0);
            }
            let tokens: u64 = result.transcript.iter().map(|o| o.token_cost).sum();
            prop_assert_eq!(tokens, result.ledger.total());

            // Call counts match the closed-form recurrence; the rescue adds
            // exactly one finalist's worth of round-robin calls when it
            // fires. The pool here is distinct, so dedup never shrinks it.
            let profile = call_profile(n as u64, f as u64);
            prop_assert_eq!(result.stage_calls.stage_a, profile.calls_a);
            prop_assert_eq!(result.stage_calls.stage_b, profile.calls_b);
            if result.rescue_triggered {
                let m = profile.finalists;
                prop_assert_eq!(result.stage_calls.stage_c, (m + 1) * m / 2);
                prop_assert_eq!(result.finalists.len() as u64, m + 1);
            } else {
                prop_assert_eq!(result.stage_calls.stage_c, profile.calls_c);
                prop_assert_eq!(result.finalists.len() as u64, profile.finalists);
            }

            // Determinism: a fresh run with the same seeds replays exactly.
            let again = select_caps(&setup(&pool), &cfg, &sim(SimJudgeConfig::moderate().with_seed(judge_seed))).unwrap();
            prop_assert_eq!(again.transcript_digest, result.transcript_digest);
            prop_assert_eq!(again.winner, result.winner);
        }
    }
}

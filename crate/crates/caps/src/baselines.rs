//! Reference selection methods: first-sample, pointwise rating, uniform
//! random pairs, and a budget-matched Swiss tournament with score-adjacent
//! pairing. All pairwise baselines judge at full evidence, so their token
//! costs are directly comparable to the cascade's.

use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::SwissConfig;
use crate::digest;
use crate::evidence::{full_view, EvidenceView};
use crate::judge::{judge_pair, judge_pair_v1, Judge, JudgeError, PairCall};
use crate::tournament::{random_argmax, validate_pool, ProblemSetup, SelectError};
use crate::types::{
    CandidateId, EvidenceLevel, Method, SelectionResult, StageCalls, TokenLedger, TournamentState,
};

/// Takes the first sample, asking no judge at all. The floor every
/// selection method is measured against.
pub fn select_vanilla(setup: &ProblemSetup<'_>) -> Result<SelectionResult, SelectError> {
    validate_pool(setup.pool)?;
    Ok(SelectionResult::new(
        Method::Vanilla,
        0,
        vec![0],
        StageCalls::default(),
        TokenLedger::default(),
        false,
        Vec::new(),
    ))
}

/// Rates every candidate independently at full evidence and takes the
/// highest rating, ties broken uniformly at random. A rating the judge
/// fails to produce in parseable form scores the minimum.
pub fn select_pointwise(
    setup: &ProblemSetup<'_>,
    judge: &dyn Judge,
    seed: u64,
) -> Result<SelectionResult, SelectError> {
    validate_pool(setup.pool)?;
    let mut ledger = TokenLedger::default();
    let mut ratings: Vec<(CandidateId, u8)> = Vec::with_capacity(setup.pool.len());
    for c in setup.pool {
        let view = full_view(c, setup.evidence.counter);
        let rating = match judge.rate(setup.problem, setup.evidence.domain, c, &view) {
            Ok(r) => r,
            Err(JudgeError::Parse(_)) => 1,
            Err(e) => return Err(e.into()),
        };
        ledger.record(EvidenceLevel::E2, view.size_tokens + setup.prompt_overhead);
        ratings.push((c.id, rating));
    }
    let best = ratings.iter().map(|&(_, r)| r).max().expect("pool is non-empty");
    let tied: Vec<CandidateId> = ratings
        .iter()
        .filter(|&&(_, r)| r == best)
        .map(|&(id, _)| id)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let winner = tied[rng.gen_range(0..tied.len())];
    Ok(SelectionResult {
        method: Method::Pointwise,
        winner,
        finalists: vec![winner],
        stage_calls: StageCalls {
            stage_c: setup.pool.len() as u64,
            ..StageCalls::default()
        },
        ledger,
        rescue_triggered: false,
        transcript_digest: digest::ratings_digest(&ratings),
        transcript: Vec::new(),
    })
}

/// Judges `budget` uniformly random unordered pairs (drawn with
/// replacement across calls) at full evidence, accumulates scores, and
/// takes the argmax, ties broken uniformly at random.
pub fn select_random_pairs(
    setup: &ProblemSetup<'_>,
    judge: &dyn Judge,
    budget: u64,
    seed: u64,
) -> Result<SelectionResult, SelectError> {
    validate_pool(setup.pool)?;
    let n = setup.pool.len();
    let mut state = TournamentState::new(n, seed);
    let mut ledger = TokenLedger::default();
    let views: Vec<EvidenceView> = setup
        .pool
        .iter()
        .map(|c| full_view(c, setup.evidence.counter))
        .collect();
    let call = PairCall {
        problem: setup.problem,
        domain: setup.evidence.domain,
        level: EvidenceLevel::E2,
        tau_w: crate::config::CONFIDENCE_FLOOR_DEFAULT,
        prompt_overhead: setup.prompt_overhead,
    };
    if n >= 2 {
        for _ in 0..budget {
            let a = state.rng_mut().gen_range(0..n);
            let b = {
                let raw = state.rng_mut().gen_range(0..n - 1);
                if raw >= a {
                    raw + 1
                } else {
                    raw
                }
            };
            let (lo, hi) = (a.min(b), a.max(b));
            let outcome = judge_pair(
                judge,
                &call,
                &setup.pool[lo],
                &setup.pool[hi],
                &views[lo],
                &views[hi],
            )?;
            state.apply(outcome);
            ledger.record(EvidenceLevel::E2, outcome.token_cost);
        }
    }
    let ids: Vec<CandidateId> = (0..n).collect();
    let winner = random_argmax(&mut state, &ids, |s, id| s.score(id));
    let calls = ledger.calls();
    Ok(SelectionResult::new(
        Method::Random,
        winner,
        vec![winner],
        StageCalls {
            stage_c: calls,
            ..StageCalls::default()
        },
        ledger,
        false,
        state.transcript,
    ))
}

fn pair_key(a: CandidateId, b: CandidateId) -> (CandidateId, CandidateId) {
    (a.min(b), a.max(b))
}

/// One Swiss round over `order` (strongest first): each unpaired candidate
/// takes the first unpaired opponent within `window` ranks it has not yet
/// played, then any unpaired opponent within the window, then the nearest
/// unpaired opponent beyond it. An odd candidate sits the round out.
fn swiss_round_pairs(
    order: &[CandidateId],
    played: &HashSet<(CandidateId, CandidateId)>,
    window: usize,
) -> Vec<(CandidateId, CandidateId)> {
    let n = order.len();
    let mut taken = vec![false; n];
    let mut pairs = Vec::with_capacity(n / 2);
    for i in 0..n {
        if taken[i] {
            continue;
        }
        let near = |j: &usize| !taken[*j] && *j - i <= window;
        let partner = (i + 1..n)
            .filter(near)
            .find(|&j| !played.contains(&pair_key(order[i], order[j])))
            .or_else(|| (i + 1..n).find(near))
            .or_else(|| (i + 1..n).find(|&j| !taken[j]));
        if let Some(j) = partner {
            taken[i] = true;
            taken[j] = true;
            pairs.push((order[i], order[j]));
        }
    }
    pairs
}

/// Budget-matched Swiss tournament using the rating comparison interface:
/// round(k * N) total comparisons, a random first-round matching, then
/// rounds paired by adjacent cumulative score. When the budget cannot
/// cover a full final round, pairs involving the least-compared candidates
/// go first, which is what keeps every candidate at or above the
/// configured minimum degree in budget-matched runs. The winner is the
/// score argmax, ties broken uniformly at random.
pub fn select_swiss_v1(
    setup: &ProblemSetup<'_>,
    judge: &dyn Judge,
    cfg: &SwissConfig,
    tau_w: f64,
    seed: u64,
) -> Result<SelectionResult, SelectError> {
    validate_pool(setup.pool)?;
    cfg.validate()?;
    let n = setup.pool.len();
    let budget = cfg.budget(n);
    let mut state = TournamentState::new(n, seed);
    let mut ledger = TokenLedger::default();
    let views: Vec<EvidenceView> = setup
        .pool
        .iter()
        .map(|c| full_view(c, setup.evidence.counter))
        .collect();
    let call = PairCall {
        problem: setup.problem,
        domain: setup.evidence.domain,
        level: EvidenceLevel::E2,
        tau_w,
        prompt_overhead: setup.prompt_overhead,
    };

    let mut played: HashSet<(CandidateId, CandidateId)> = HashSet::new();
    let mut degree: HashMap<CandidateId, u64> = (0..n).map(|id| (id, 0)).collect();
    let mut calls_made = 0u64;
    let mut first_round = true;
    while calls_made < budget && n >= 2 {
        let order: Vec<CandidateId> = if first_round {
            let mut ids: Vec<CandidateId> = (0..n).collect();
            ids.shuffle(state.rng_mut());
            ids
        } else {
            // Score descending, equal scores shuffled at random.
            let mut decorated: Vec<(f64, u64, CandidateId)> = (0..n)
                .map(|id| (state.score(id), 0u64, id))
                .collect();
            for entry in decorated.iter_mut() {
                entry.1 = state.rng_mut().gen::<u64>();
            }
            decorated.sort_unstable_by(|a, b| {
                b.0.partial_cmp(&a.0)
                    .expect("scores are never NaN")
                    .then(a.1.cmp(&b.1))
                    .then(a.2.cmp(&b.2))
            });
            decorated.into_iter().map(|(_, _, id)| id).collect()
        };
        first_round = false;

        let order = if order.len() % 2 == 1 {
            // Rotate the bye onto the most-compared candidate (weakest rank
            // on ties) so no candidate can sit out round after round.
            let bye = order
                .iter()
                .enumerate()
                .max_by_key(|(rank, id)| (degree[id], *rank))
                .map(|(rank, _)| rank)
                .expect("odd pools are non-empty");
            let mut trimmed = order;
            trimmed.remove(bye);
            trimmed
        } else {
            order
        };

        let mut pairs = swiss_round_pairs(&order, &played, cfg.window);
        let remaining = (budget - calls_made) as usize;
        if pairs.len() > remaining {
            // Partial final round: spend what is left on the candidates
            // that have been compared least.
            pairs.sort_by_key(|&(a, b)| degree[&a].min(degree[&b]));
            pairs.truncate(remaining);
        }
        for (a, b) in pairs {
            let (lo, hi) = pair_key(a, b);
            let outcome = judge_pair_v1(
                judge,
                &call,
                &setup.pool[lo],
                &setup.pool[hi],
                &views[lo],
                &views[hi],
            )?;
            state.apply(outcome);
            ledger.record(EvidenceLevel::E2, outcome.token_cost);
            played.insert((lo, hi));
            *degree.get_mut(&lo).unwrap() += 1;
            *degree.get_mut(&hi).unwrap() += 1;
            calls_made += 1;
        }
    }

    let ids: Vec<CandidateId> = (0..n).collect();
    let winner = random_argmax(&mut state, &ids, |s, id| s.score(id));
    Ok(SelectionResult::new(
        Method::Swiss,
        winner,
        vec![winner],
        StageCalls {
            stage_c: calls_made,
            ..StageCalls::default()
        },
        ledger,
        false,
        state.transcript,
    ))
}

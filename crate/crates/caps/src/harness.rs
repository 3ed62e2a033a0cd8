//! Monte Carlo harness: synthetic candidate pools with known ground truth,
//! driven through every selection method under a simulated judge.
//!
//! Pools come in two size classes. `Compact` candidates are a few dozen
//! characters and exist to make winner statistics cheap. `Standard`
//! candidates are laid out so that under the four-characters-per-token
//! counter a partial view is exactly 250 tokens and a full view exactly
//! 4000, which makes every judged pair cost exactly the cost model's
//! per-call constants. Duplicate clusters share a solution body and differ
//! only in their reasoning text, so equivalence grouping finds exactly the
//! intended clusters.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{select_pointwise, select_random_pairs, select_swiss_v1, select_vanilla};
use crate::config::{CapsConfig, SwissConfig};
use crate::cost::CostModel;
use crate::evidence::parse_candidate;
use crate::judge::{mix_stream, Judge, SimJudge, SimJudgeConfig};
use crate::tournament::{select_caps, EvidenceSpec, ProblemSetup, SelectError};
use crate::types::{Candidate, CandidateId, Domain, EvidenceLevel, Method, SelectionResult};

/// Problem statement attached to every synthetic pool.
pub const PROBLEM_TEXT: &str = "Implement the routine described in the task statement.";

/// Raw-text length of a standard-size candidate, in characters. At four
/// characters per token the full view is 4000 tokens, so a full-evidence
/// call costs 2 * 4000 + 500 overhead tokens.
const STANDARD_RAW_CHARS: usize = 16_000;
/// Thinking-block length chosen so the partial view (reasoning, newline,
/// 500-character solution anchor) is exactly 1000 characters, or 250
/// tokens: a partial-evidence call costs 2 * 250 + 500 overhead tokens.
const STANDARD_REASONING_CHARS: usize = 499;
/// Solution-block length: the raw text minus the thinking block and the
/// fixed wrapper (tags, fences, separators) around the two spans.
const STANDARD_CODE_CHARS: usize = STANDARD_RAW_CHARS - STANDARD_REASONING_CHARS - 36;

/// Duplicate structure of a synthetic pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DupProfile {
    /// Every candidate is its own equivalence cluster.
    Distinct,
    /// One cluster of `size` equivalent solutions plus `singletons`
    /// mutually distinct ones.
    Clustered { size: usize, singletons: usize },
}

impl DupProfile {
    /// Cluster sizes, largest first.
    fn cluster_sizes(&self, n: usize) -> Vec<usize> {
        match *self {
            DupProfile::Distinct => vec![1; n],
            DupProfile::Clustered { size, singletons } => {
                let mut sizes = vec![size];
                sizes.extend(std::iter::repeat(1).take(singletons));
                sizes
            }
        }
    }

    fn covers(&self, n: usize) -> bool {
        match *self {
            DupProfile::Distinct => true,
            DupProfile::Clustered { size, singletons } => size >= 1 && size + singletons == n,
        }
    }
}

impl std::fmt::Display for DupProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            DupProfile::Distinct => f.write_str("distinct"),
            DupProfile::Clustered { size, singletons } => write!(f, "{size}+{singletons}"),
        }
    }
}

impl std::str::FromStr for DupProfile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "distinct" {
            return Ok(DupProfile::Distinct);
        }
        let err = || format!("unknown duplicate profile '{s}' (expected 'distinct' or 'SIZE+SINGLETONS', e.g. '11+5')");
        let (size, singletons) = s.split_once('+').ok_or_else(err)?;
        let size: usize = size.trim().parse().map_err(|_| err())?;
        let singletons: usize = singletons.trim().parse().map_err(|_| err())?;
        if size == 0 {
            return Err(err());
        }
        Ok(DupProfile::Clustered { size, singletons })
    }
}

impl TryFrom<String> for DupProfile {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<DupProfile> for String {
    fn from(p: DupProfile) -> String {
        p.to_string()
    }
}

impl Serialize for DupProfile {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for DupProfile {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Candidate text size class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SizeClass {
    /// Exact-size texts whose judge calls cost exactly the cost model's
    /// per-call constants. Code domain only.
    Standard,
    /// Tiny texts for winner-statistics runs where token totals are
    /// irrelevant.
    Compact,
}

/// Recipe for one synthetic pool.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PoolSpec {
    pub n: usize,
    /// Probability that a cluster's shared solution is correct. Drawn once
    /// per cluster, so duplicates agree with their representatives.
    pub p_correct: f64,
    pub dup_profile: DupProfile,
    pub domain: Domain,
    pub size_class: SizeClass,
    pub seed: u64,
}

impl Default for PoolSpec {
    fn default() -> Self {
        Self {
            n: 16,
            p_correct: 0.3,
            dup_profile: DupProfile::Distinct,
            domain: Domain::Code,
            size_class: SizeClass::Compact,
            seed: 0,
        }
    }
}

impl PoolSpec {
    pub fn validate(&self) -> Result<(), String> {
        if self.n == 0 || self.n > 9999 {
            return Err(format!("pool size {} is outside 1..=9999", self.n));
        }
        if !(0.0..=1.0).contains(&self.p_correct) {
            return Err(format!("p_correct {} is outside [0, 1]", self.p_correct));
        }
        if !self.dup_profile.covers(self.n) {
            return Err(format!(
                "duplicate profile {} does not cover a pool of {}",
                self.dup_profile, self.n
            ));
        }
        if self.size_class == SizeClass::Standard && self.domain == Domain::Math {
            return Err("the standard (exact-size) corpus is code-domain only".into());
        }
        Ok(())
    }
}

fn render_raw(spec: &PoolSpec, id: usize, cluster: usize) -> String {
    match (spec.size_class, spec.domain) {
        (SizeClass::Compact, Domain::Code) => format!(
            "<thinking>plan {id:04}</thinking>\n```python\nk{cluster:04} = {cluster:04}\n```"
        ),
        (SizeClass::Compact, Domain::Math) => {
            format!("<thinking>try {id:04}</thinking>\nAnswer: \\boxed{{v{cluster:04}}}")
        }
        (SizeClass::Standard, Domain::Code) => {
            let mut reasoning = format!("r{id:04}");
            reasoning.push_str(&"x".repeat(STANDARD_REASONING_CHARS - reasoning.len()));
            let mut code = format!("k{cluster:04} = {cluster:04}\n");
            code.push_str(&"f".repeat(STANDARD_CODE_CHARS - code.len()));
            format!("<thinking>{reasoning}</thinking>\n```python\n{code}\n```")
        }
        (SizeClass::Standard, Domain::Math) => {
            unreachable!("rejected by PoolSpec::validate")
        }
    }
}

/// Generates a pool. Candidate ids equal positions; cluster membership is a
/// uniform random assignment; each cluster's ground truth is one Bernoulli
/// draw shared by its members. Panics on a spec `validate` would reject.
pub fn gen_pool(spec: &PoolSpec) -> Vec<Candidate> {
    if let Err(e) = spec.validate() {
        panic!("invalid pool spec: {e}");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let sizes = spec.dup_profile.cluster_sizes(spec.n);
    let truths: Vec<bool> = sizes.iter().map(|_| rng.gen::<f64>() < spec.p_correct).collect();
    let mut assignment: Vec<usize> = sizes
        .iter()
        .enumerate()
        .flat_map(|(c, &s)| std::iter::repeat(c).take(s))
        .collect();
    assignment.shuffle(&mut rng);
    (0..spec.n)
        .map(|id| {
            let cluster = assignment[id];
            parse_candidate(
                id,
                render_raw(spec, id, cluster),
                spec.domain,
                Some(truths[cluster]),
            )
        })
        .collect()
}

/// Complete recipe for one Monte Carlo experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    pub pool: PoolSpec,
    pub judge: SimJudgeConfig,
    pub caps: CapsConfig,
    pub swiss: SwissConfig,
    pub methods: Vec<Method>,
    pub trials: u64,
    pub master_seed: u64,
    pub prompt_overhead: u64,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            pool: PoolSpec::default(),
            judge: SimJudgeConfig::default(),
            caps: CapsConfig::default(),
            swiss: SwissConfig::default(),
            methods: Method::ALL.to_vec(),
            trials: 1000,
            master_seed: 0,
            prompt_overhead: CostModel::default().t_ovhd,
        }
    }
}

// Purpose tags for deriving per-trial seeds from the master seed. The pool
// and judge streams do not depend on the method, so every method sees the
// same pools and, per trial, the same judge randomness.
const SEED_POOL: u64 = 0x706f_6f6c;
const SEED_JUDGE: u64 = 0x6a75_6467;
const SEED_METHOD: u64 = 0x6d65_7468;

pub fn pool_seed(master_seed: u64, trial: u64) -> u64 {
    mix_stream(master_seed, &[SEED_POOL, trial])
}

pub fn judge_seed(master_seed: u64, trial: u64) -> u64 {
    mix_stream(master_seed, &[SEED_JUDGE, trial])
}

pub fn method_seed(master_seed: u64, trial: u64, method: Method) -> u64 {
    mix_stream(master_seed, &[SEED_METHOD, trial, method as u64])
}

/// Runs one method on one prepared problem. CAPS variants get `seed`
/// stamped into their config; baselines take it directly. The rescue
/// toggle comes from the method, not from `caps.rescue_enabled`.
pub fn select_with_method(
    setup: &ProblemSetup<'_>,
    method: Method,
    caps: &CapsConfig,
    swiss: &SwissConfig,
    judge: &dyn Judge,
    seed: u64,
) -> Result<SelectionResult, SelectError> {
    match method {
        Method::Vanilla => select_vanilla(setup),
        Method::Pointwise => select_pointwise(setup, judge, seed),
        Method::Random => {
            select_random_pairs(setup, judge, swiss.budget(setup.pool.len()), seed)
        }
        Method::Swiss => select_swiss_v1(setup, judge, swiss, caps.confidence_floor, seed),
        Method::Caps => select_caps(setup, &caps.with_rescue(false).with_seed(seed), judge),
        Method::CapsR => select_caps(setup, &caps.with_rescue(true).with_seed(seed), judge),
    }
}

/// Pool difficulty presets, realized as the cluster correctness rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    Easy,
    Medium,
    Hard,
}

impl Difficulty {
    pub fn p_correct(self) -> f64 {
        match self {
            Difficulty::Easy => 0.6,
            Difficulty::Medium => 0.3,
            Difficulty::Hard => 0.1,
        }
    }
}

impl std::str::FromStr for Difficulty {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "easy" => Ok(Difficulty::Easy),
            "medium" => Ok(Difficulty::Medium),
            "hard" => Ok(Difficulty::Hard),
            other => Err(format!("unknown difficulty '{other}' (expected easy|medium|hard)")),
        }
    }
}

/// One trial's outcome, reduced to what reports aggregate. Judge accuracy
/// counts cover distinguishable pairs only (members of differing ground
/// truth); a tie on such a pair counts as judged but not correct.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub method: Method,
    pub trial: u64,
    pub winner: CandidateId,
    pub winner_correct: bool,
    pub any_correct: bool,
    /// Every candidate shares one ground truth, so selection cannot matter.
    pub trivial: bool,
    pub calls: u64,
    pub tokens: u64,
    pub rescue_triggered: bool,
    pub transcript_digest: u64,
    pub judged_e1: u64,
    pub correct_e1: u64,
    pub judged_e2: u64,
    pub correct_e2: u64,
}

impl TrialRecord {
    fn from_run(trial: u64, pool: &[Candidate], result: &SelectionResult) -> Self {
        let any_correct = pool.iter().any(|c| c.ground_truth == Some(true));
        let all_correct = pool.iter().all(|c| c.ground_truth == Some(true));
        let mut judged = [0u64; 2];
        let mut correct = [0u64; 2];
        for o in &result.transcript {
            let (Some(gi), Some(gj)) = (pool[o.i].ground_truth, pool[o.j].ground_truth) else {
                continue;
            };
            if gi == gj {
                continue;
            }
            let lvl = match o.level {
                EvidenceLevel::E1 => 0,
                EvidenceLevel::E2 => 1,
                EvidenceLevel::E0 => continue,
            };
            judged[lvl] += 1;
            if (o.v == 1.0) == gi {
                correct[lvl] += 1;
            }
        }
        TrialRecord {
            method: result.method,
            trial,
            winner: result.winner,
            winner_correct: pool[result.winner].ground_truth == Some(true),
            any_correct,
            trivial: all_correct || !any_correct,
            calls: result.ledger.calls(),
            tokens: result.ledger.total(),
            rescue_triggered: result.rescue_triggered,
            transcript_digest: result.transcript_digest,
            judged_e1: judged[0],
            correct_e1: correct[0],
            judged_e2: judged[1],
            correct_e2: correct[1],
        }
    }
}

/// Runs every trial of `spec` for one method. Trial `t` always sees the
/// same pool and judge stream no matter which method runs it.
pub fn run_trials(spec: &ExperimentSpec, method: Method) -> Result<Vec<TrialRecord>, SelectError> {
    let mut records = Vec::with_capacity(spec.trials as usize);
    for trial in 0..spec.trials {
        let mut pool_spec = spec.pool;
        pool_spec.seed = pool_seed(spec.master_seed, trial);
        let pool = gen_pool(&pool_spec);
        let judge = SimJudge::new(spec.judge.with_seed(judge_seed(spec.master_seed, trial)));
        let setup = ProblemSetup {
            problem: PROBLEM_TEXT,
            pool: &pool,
            evidence: EvidenceSpec::new(spec.pool.domain),
            prompt_overhead: spec.prompt_overhead,
        };
        let result = select_with_method(
            &setup,
            method,
            &spec.caps,
            &spec.swiss,
            &judge,
            method_seed(spec.master_seed, trial, method),
        )?;
        records.push(TrialRecord::from_run(trial, &pool, &result));
    }
    Ok(records)
}

/// 95% Wald interval for a binomial proportion, clamped into [0, 1].
pub fn wald_ci95(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let half = 1.96 * (p * (1.0 - p) / n).sqrt();
    ((p - half).max(0.0), (p + half).min(1.0))
}

/// Per-method aggregate over one experiment's trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MethodStats {
    pub method: Method,
    pub trials: u64,
    pub wins: u64,
    /// Fraction of trials whose selected candidate is correct.
    pub pass_rate: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
    pub mean_calls: f64,
    pub mean_tokens: f64,
    pub rescue_rate: f64,
    pub acc_e1: Option<f64>,
    pub acc_e2: Option<f64>,
    /// Accuracy over the method's own mix of evidence levels.
    pub acc_mixed: Option<f64>,
    /// Mean verifier tokens as a percentage of the Swiss baseline's mean.
    pub t_percent_vs_swiss: Option<f64>,
}

/// Collapses trial records into summary statistics.
pub fn aggregate(method: Method, records: &[TrialRecord]) -> MethodStats {
    let trials = records.len() as u64;
    let n = trials.max(1) as f64;
    let wins = records.iter().filter(|r| r.winner_correct).count() as u64;
    let (ci95_low, ci95_high) = wald_ci95(wins, trials);
    let sum = |f: fn(&TrialRecord) -> u64| records.iter().map(f).sum::<u64>();
    let ratio = |num: u64, den: u64| (den > 0).then(|| num as f64 / den as f64);
    let (judged_e1, correct_e1) = (sum(|r| r.judged_e1), sum(|r| r.correct_e1));
    let (judged_e2, correct_e2) = (sum(|r| r.judged_e2), sum(|r| r.correct_e2));
    MethodStats {
        method,
        trials,
        wins,
        pass_rate: wins as f64 / n,
        ci95_low,
        ci95_high,
        mean_calls: sum(|r| r.calls) as f64 / n,
        mean_tokens: sum(|r| r.tokens) as f64 / n,
        rescue_rate: records.iter().filter(|r| r.rescue_triggered).count() as f64 / n,
        acc_e1: ratio(correct_e1, judged_e1),
        acc_e2: ratio(correct_e2, judged_e2),
        acc_mixed: ratio(correct_e1 + correct_e2, judged_e1 + judged_e2),
        t_percent_vs_swiss: None,
    }
}

/// Experiment summary across methods.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub trials: u64,
    pub master_seed: u64,
    /// Fraction of pools containing at least one correct candidate: the
    /// ceiling any selection method can reach.
    pub pass_at_n: f64,
    pub trivial_fraction: f64,
    pub methods: Vec<MethodStats>,
    /// Percentage-point gap between the cascade's mixed-evidence judge
    /// accuracy and the all-full-evidence baseline's, when both ran.
    pub diagnostic_delta_pp: Option<f64>,
}

impl ExperimentReport {
    pub fn stats(&self, method: Method) -> Option<&MethodStats> {
        self.methods.iter().find(|s| s.method == method)
    }
}

/// Percentage-point gap between the cascade's mixed-evidence judge accuracy
/// and the all-full-evidence baseline's. Positive when cheap screening
/// judges at least as well as full evidence, negative when it lags.
pub fn diagnostic_delta(report: &ExperimentReport) -> Option<f64> {
    report.diagnostic_delta_pp
}

/// Builds a report from already-collected per-method trial records. Pool
/// statistics come from the first non-empty group; groups produced by
/// [`run_trials`] see method-independent pools, so any group serves.
pub fn assemble_report(
    trials: u64,
    master_seed: u64,
    per_method: &[(Method, Vec<TrialRecord>)],
) -> ExperimentReport {
    let mut methods = Vec::with_capacity(per_method.len());
    let mut pass_at_n = 0.0;
    let mut trivial_fraction = 0.0;
    if let Some((_, records)) = per_method.iter().find(|(_, r)| !r.is_empty()) {
        let n = records.len() as f64;
        pass_at_n = records.iter().filter(|r| r.any_correct).count() as f64 / n;
        trivial_fraction = records.iter().filter(|r| r.trivial).count() as f64 / n;
    }
    for (method, records) in per_method {
        methods.push(aggregate(*method, records));
    }
    let swiss_mean = methods
        .iter()
        .find(|s| s.method == Method::Swiss)
        .map(|s| s.mean_tokens)
        .filter(|&m| m > 0.0);
    if let Some(swiss_mean) = swiss_mean {
        for s in &mut methods {
            s.t_percent_vs_swiss = Some(100.0 * s.mean_tokens / swiss_mean);
        }
    }
    let cascade_acc = [Method::Caps, Method::CapsR]
        .iter()
        .find_map(|&m| methods.iter().find(|s| s.method == m))
        .and_then(|s| s.acc_mixed);
    let baseline_acc = [Method::Swiss, Method::Random]
        .iter()
        .find_map(|&m| methods.iter().find(|s| s.method == m))
        .and_then(|s| s.acc_e2);
    let diagnostic_delta_pp = cascade_acc
        .zip(baseline_acc)
        .map(|(c, b)| 100.0 * (c - b));
    ExperimentReport {
        trials,
        master_seed,
        pass_at_n,
        trivial_fraction,
        methods,
        diagnostic_delta_pp,
    }
}

/// Runs every configured method over the same trial sequence and
/// aggregates.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport, SelectError> {
    let mut per_method = Vec::with_capacity(spec.methods.len());
    for &method in &spec.methods {
        per_method.push((method, run_trials(spec, method)?));
    }
    Ok(assemble_report(spec.trials, spec.master_seed, &per_method))
}

/// Environment whose rescue pass fires on a steady minority of runs:
/// sixteen distinct standard-size candidates, a moderate judge, and the
/// default margin. Token totals are exact, so each triggered rescue adds
/// exactly `finalist_count` full-evidence calls.
pub fn rescue_preset(trials: u64, master_seed: u64) -> ExperimentSpec {
    ExperimentSpec {
        pool: PoolSpec {
            n: 16,
            p_correct: 0.3,
            dup_profile: DupProfile::Distinct,
            domain: Domain::Code,
            size_class: SizeClass::Standard,
            seed: 0,
        },
        judge: SimJudgeConfig::moderate(),
        caps: CapsConfig {
            dedup_enabled: false,
            ..CapsConfig::default()
        },
        methods: vec![Method::CapsR],
        trials,
        master_seed,
        ..ExperimentSpec::default()
    }
}

/// Environment for the screening-accuracy sweep: full-evidence accuracy
/// pinned while the partial-evidence accuracy varies, cascade against the
/// budget-matched Swiss baseline on the same pools.
pub fn diagnostic_preset(accuracy_e1: f64, trials: u64, master_seed: u64) -> ExperimentSpec {
    ExperimentSpec {
        pool: PoolSpec {
            n: 16,
            p_correct: 0.2,
            dup_profile: DupProfile::Distinct,
            domain: Domain::Code,
            size_class: SizeClass::Compact,
            seed: 0,
        },
        judge: SimJudgeConfig {
            accuracy_e1,
            accuracy_e2: 0.85,
            p_high_when_correct: 0.60,
            p_tie_when_equal: 0.0,
            ..SimJudgeConfig::moderate()
        },
        methods: vec![Method::Caps, Method::Swiss],
        trials,
        master_seed,
        ..ExperimentSpec::default()
    }
}

//! Budgeted best-of-N selection over candidate solution pools.
//!
//! The library implements a cascaded pairwise-selection pipeline (dedup at
//! signature level, a halving round at partial evidence, halving rounds at
//! full evidence down to a finalist set, an optional rescue of the strongest
//! eliminated candidate, and a full-evidence round-robin), together with the
//! baselines it is measured against, a closed-form verifier-token cost model,
//! a parametric simulated judge, and a Monte Carlo experiment harness.
//!
//! Determinism is a first-class concern: every source of randomness flows
//! from explicit 64-bit seeds, judge calls are applied to tournament state in
//! canonical pair order, and each selection run exposes a 64-bit digest of
//! its comparison transcript so behaviour can be pinned in tests.

pub mod baselines;
pub mod config;
pub mod cost;
pub mod digest;
pub mod evidence;
pub mod harness;
pub mod judge;
pub mod pool;
pub mod tournament;
pub mod types;

pub use config::{validate_config, CapsConfig, ConfigError, SwissConfig};
pub use cost::CostModel;
pub use judge::{Judge, JudgeError, SimJudge, SimJudgeConfig};
pub use tournament::{select_caps, ProblemSetup, SelectError};
pub use types::{
    Candidate, Confidence, Domain, EvidenceLevel, JudgeOutcome, Method, RawVerdict,
    SelectionResult, StageCalls, TokenLedger, TournamentState, Winner,
};

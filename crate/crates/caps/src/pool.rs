//! Candidate pool files: JSONL with one header record followed by one
//! candidate record per line. Spans are re-extracted from the raw text at
//! load time, so files only carry what a sampler actually produced.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evidence::parse_candidate;
use crate::types::{Candidate, CandidateId, Domain};

/// First line of a pool file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolHeader {
    pub problem_id: String,
    pub problem_text: String,
    pub domain: Domain,
}

/// One candidate line. `ground_truth` is optional and only present for
/// evaluation pools.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub id: CandidateId,
    pub raw_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<bool>,
}

/// A parsed pool file: header plus candidates with extracted spans.
#[derive(Debug, Clone)]
pub struct PoolFile {
    pub header: PoolHeader,
    pub candidates: Vec<Candidate>,
}

#[derive(Debug, Error)]
pub enum PoolError {
    #[error("pool file has no header line")]
    Empty,
    #[error("pool file line {line}: {source}")]
    Json {
        line: usize,
        source: serde_json::Error,
    },
    #[error("candidate record {position} has id {id}; ids must be 0..n in file order")]
    OutOfOrder { position: usize, id: CandidateId },
}

/// Parses a pool file. Candidate ids must equal their record positions.
pub fn read_pool(text: &str) -> Result<PoolFile, PoolError> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (header_line, header_text) = lines.next().ok_or(PoolError::Empty)?;
    let header: PoolHeader = serde_json::from_str(header_text).map_err(|source| PoolError::Json {
        line: header_line + 1,
        source,
    })?;
    let mut candidates = Vec::new();
    for (position, (line, text)) in lines.enumerate() {
        let record: CandidateRecord =
            serde_json::from_str(text).map_err(|source| PoolError::Json {
                line: line + 1,
                source,
            })?;
        if record.id != position {
            return Err(PoolError::OutOfOrder {
                position,
                id: record.id,
            });
        }
        candidates.push(parse_candidate(
            record.id,
            record.raw_text,
            header.domain,
            record.ground_truth,
        ));
    }
    Ok(PoolFile { header, candidates })
}

/// Serializes a pool back to JSONL.
pub fn write_pool(header: &PoolHeader, candidates: &[Candidate]) -> String {
    let mut out = serde_json::to_string(header).expect("headers always serialize");
    for c in candidates {
        let record = CandidateRecord {
            id: c.id,
            raw_text: c.raw_text.clone(),
            ground_truth: c.ground_truth,
        };
        out.push('\n');
        out.push_str(&serde_json::to_string(&record).expect("records always serialize"));
    }
    out.push('\n');
    out
}

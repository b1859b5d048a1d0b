//! Machine-readable reports: deterministic for a fixed config and seed up
//! to the timing field.

use serde::Serialize;

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Truncated,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub id: String,
    pub status: Status,
    pub cases: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<String>,
}

impl Check {
    pub fn pass(id: &str, cases: usize) -> Self {
        Check { id: id.into(), status: Status::Pass, cases, witness: None }
    }

    pub fn fail(id: &str, cases: usize, witness: String) -> Self {
        Check { id: id.into(), status: Status::Fail, cases, witness: Some(witness) }
    }

    pub fn truncated(id: &str, cases: usize, note: String) -> Self {
        Check { id: id.into(), status: Status::Truncated, cases, witness: Some(note) }
    }

    pub fn from_flags(id: &str, cases: usize, failures: &[String]) -> Self {
        if failures.is_empty() {
            Check::pass(id, cases)
        } else {
            Check::fail(id, cases, failures.join("; "))
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub command: String,
    pub instance: String,
    pub seed: u64,
    pub cap: u64,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<serde_json::Value>,
    pub timing_ms: u128,
}

impl Report {
    pub fn any_fail(&self) -> bool {
        self.checks.iter().any(|c| c.status == Status::Fail)
    }

    pub fn any_truncated(&self) -> bool {
        self.checks.iter().any(|c| c.status == Status::Truncated)
    }
}

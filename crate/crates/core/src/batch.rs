//! Data-parallel drivers over independent work items.
//!
//! With the `parallel` feature the items are spread over the rayon pool; without it, or
//! with [`ExecMode::Sequential`], they run in order on the calling thread. Results are
//! returned in input order either way.

use chrono::{DateTime, Utc};

use crate::enforcement::{detective_check, AuditLog, ObligationStatus};
use crate::model::Policy;
use crate::pdp::{commit_usage, evaluate_request, AccessRequest, Decision, PdpError, UsageState};
use crate::pip::Pip;
use crate::simulator::{run, RunReport, Scenario, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecMode {
    Sequential,
    Parallel,
}

impl Default for ExecMode {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            ExecMode::Parallel
        } else {
            ExecMode::Sequential
        }
    }
}

/// Applies `f` to every item, in parallel when `mode` and the build allow it.
pub fn map<T, R, F>(items: &[T], mode: ExecMode, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match mode {
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        _ => items.iter().map(f).collect(),
    }
}

/// Decides every request against the same state without committing any of them.
pub fn evaluate_batch(
    agreement: &Policy,
    requests: &[AccessRequest],
    state: &UsageState,
    pip: &Pip,
    mode: ExecMode,
) -> Vec<Result<Decision, PdpError>> {
    map(requests, mode, |r| evaluate_request(agreement, r, state, pip))
}

/// Decisions for one request sequence replayed from an empty state, committing permits.
pub fn replay(agreement: &Policy, requests: &[AccessRequest], pip: &Pip) -> Result<Vec<Decision>, PdpError> {
    let mut state = UsageState::new();
    let mut out = Vec::with_capacity(requests.len());
    for r in requests {
        let d = evaluate_request(agreement, r, &state, pip)?;
        if d.is_permit() {
            state = commit_usage(&d, r, &state)?;
        }
        out.push(d);
    }
    Ok(out)
}

/// [`replay`] over many independent sequences.
pub fn replay_sequences(
    agreement: &Policy,
    sequences: &[Vec<AccessRequest>],
    pip: &Pip,
    mode: ExecMode,
) -> Vec<Result<Vec<Decision>, PdpError>> {
    map(sequences, mode, |s| replay(agreement, s, pip))
}

pub fn detective_check_batch(
    cases: &[(Policy, AuditLog)],
    now: DateTime<Utc>,
    mode: ExecMode,
) -> Vec<Vec<ObligationStatus>> {
    map(cases, mode, |(p, log)| detective_check(p, log, now))
}

pub fn run_scenarios(scenarios: &[Scenario], mode: ExecMode) -> Vec<Result<RunReport, SimError>> {
    map(scenarios, mode, run)
}

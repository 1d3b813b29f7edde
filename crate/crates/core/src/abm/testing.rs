//! Daily allocation of limited PCR and antigen tests by weighted sampling
//! without replacement.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::params::TestingParams;
use crate::policy::{PolicyVector, FULL_SCALE_POPULATION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TestKind {
    Pcr,
    Antigen,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TestSupply {
    pub pcr: usize,
    pub antigen: usize,
}

impl TestSupply {
    /// Daily supply for a population of `n_agents` under `policy`.
    pub fn for_policy(testing: &TestingParams, policy: &PolicyVector, n_agents: usize) -> Self {
        let scale = n_agents as f64 / FULL_SCALE_POPULATION;
        Self {
            pcr: (testing.baseline_pcr_per_day * policy.pcr_mult * scale).round() as usize,
            antigen: (testing.baseline_antigen_per_day * policy.antigen_mult * scale).round()
                as usize,
        }
    }

    pub fn total(&self) -> usize {
        self.pcr + self.antigen
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestCandidate {
    pub agent: usize,
    pub symptomatic: bool,
    pub quarantined: bool,
}

/// Relative odds of being tested: 1, times the symptomatic odds ratio when
/// symptomatic, times the quarantine odds ratio when quarantined.
pub fn test_weight(c: &TestCandidate, policy: &PolicyVector) -> f64 {
    let mut w = 1.0;
    if c.symptomatic {
        w *= policy.symptomatic_or;
    }
    if c.quarantined {
        w *= policy.quarantine_test_or;
    }
    w
}

/// Picks at most `supply.total()` distinct candidates with probability
/// proportional to their weights (successive sampling, implemented with
/// Efraimidis–Spirakis keys). The first `supply.pcr` picks get PCR.
pub fn allocate_tests<R: Rng + ?Sized>(
    candidates: &[TestCandidate],
    supply: TestSupply,
    policy: &PolicyVector,
    rng: &mut R,
) -> Vec<(usize, TestKind)> {
    let m = supply.total().min(candidates.len());
    if m == 0 {
        return Vec::new();
    }
    let mut keyed: Vec<(f64, usize)> = candidates
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let u: f64 = 1.0 - rng.random::<f64>();
            (u.ln() / test_weight(c, policy), i)
        })
        .collect();
    let by_key_desc = |a: &(f64, usize), b: &(f64, usize)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
    if m < keyed.len() {
        keyed.select_nth_unstable_by(m - 1, by_key_desc);
        keyed.truncate(m);
    }
    keyed.sort_by(by_key_desc);
    keyed
        .into_iter()
        .enumerate()
        .map(|(rank, (_, i))| {
            let kind = if rank < supply.pcr {
                TestKind::Pcr
            } else {
                TestKind::Antigen
            };
            (candidates[i].agent, kind)
        })
        .collect()
}

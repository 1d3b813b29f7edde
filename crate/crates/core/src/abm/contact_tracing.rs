//! Capacity-limited contact tracing of diagnosed agents.

use std::collections::VecDeque;

use rand::Rng;

use super::state::{extend_window, AgentEpiState};
use crate::policy::{PolicyVector, FULL_SCALE_POPULATION};
use crate::population::Population;

/// Contacts that can be traced per day in a population of `n_agents`.
pub fn tracing_capacity(policy: &PolicyVector, n_agents: usize) -> usize {
    (policy.ct_capacity.round() * n_agents as f64 / FULL_SCALE_POPULATION).round() as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct TraceEntry {
    agent: usize,
    diagnosis_day: i32,
    /// Position in the agent's contact list reached so far.
    cursor: usize,
}

/// FIFO queue of diagnosed agents awaiting tracing, ordered by diagnosis day.
#[derive(Debug, Clone)]
pub struct ContactTracer {
    queue: VecDeque<TraceEntry>,
    last_traced: Vec<i32>,
    scratch: Vec<usize>,
}

impl ContactTracer {
    pub fn new(n_agents: usize) -> Self {
        Self {
            queue: VecDeque::new(),
            last_traced: vec![i32::MIN; n_agents],
            scratch: Vec::new(),
        }
    }

    pub fn enqueue(&mut self, agent: usize, diagnosis_day: i32) {
        self.queue.push_back(TraceEntry {
            agent,
            diagnosis_day,
            cursor: 0,
        });
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    /// Traces up to `capacity` distinct household and venue contacts of queued
    /// diagnoses. A contact reached twice on the same day is traced once and
    /// costs one unit of capacity. Entries diagnosed more than `window_days`
    /// ago are discarded first. Returns the traced agents in tracing order.
    pub fn trace(
        &mut self,
        day: i32,
        capacity: usize,
        window_days: u32,
        pop: &Population,
    ) -> Vec<usize> {
        let oldest = day - window_days as i32;
        self.queue.retain(|e| e.diagnosis_day >= oldest);

        let mut remaining = capacity;
        let mut traced = Vec::new();
        while remaining > 0 {
            let Some(entry) = self.queue.front_mut() else {
                break;
            };
            self.scratch.clear();
            self.scratch.extend(pop.close_contacts(entry.agent));
            while entry.cursor < self.scratch.len() && remaining > 0 {
                let c = self.scratch[entry.cursor];
                entry.cursor += 1;
                if self.last_traced[c] == day {
                    continue;
                }
                self.last_traced[c] = day;
                remaining -= 1;
                traced.push(c);
            }
            // Skip any already-traced tail so a finished entry never lingers.
            while entry.cursor < self.scratch.len()
                && self.last_traced[self.scratch[entry.cursor]] == day
            {
                entry.cursor += 1;
            }
            if entry.cursor >= self.scratch.len() {
                self.queue.pop_front();
            }
        }
        traced
    }
}

/// Traced agents quarantine with the policy's traced adherence and mask for
/// `mask_duration_ct` days.
pub fn apply_trace_outcomes<R: Rng + ?Sized>(
    traced: &[usize],
    agents: &mut [AgentEpiState],
    policy: &PolicyVector,
    day: i32,
    quarantine_days: u32,
    rng: &mut R,
) {
    let mask_days = policy.mask_duration_ct.round().max(0.0) as u32;
    for &c in traced {
        let a = &mut agents[c];
        if rng.random::<f64>() < policy.quarantine_adherence_ct {
            extend_window(&mut a.quarantine, day, quarantine_days);
        }
        extend_window(&mut a.mask, day, mask_days);
    }
}

/// Traces and applies outcomes in one call.
#[allow(clippy::too_many_arguments)]
pub fn contact_trace<R: Rng + ?Sized>(
    tracer: &mut ContactTracer,
    capacity: usize,
    policy: &PolicyVector,
    day: i32,
    window_days: u32,
    quarantine_days: u32,
    pop: &Population,
    agents: &mut [AgentEpiState],
    rng: &mut R,
) -> Vec<usize> {
    let traced = tracer.trace(day, capacity, window_days, pop);
    apply_trace_outcomes(&traced, agents, policy, day, quarantine_days, rng);
    traced
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::population::PopulationConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeSet;

    fn pop() -> Population {
        Population::generate(&PopulationConfig {
            n_agents: 1_000,
            n_tracts: 4,
            seed: 9,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn zero_capacity_traces_nobody() {
        let pop = pop();
        let mut t = ContactTracer::new(pop.len());
        t.enqueue(3, 0);
        assert!(t.trace(0, 0, 3, &pop).is_empty());
        assert_eq!(t.pending(), 1);
    }

    #[test]
    fn ample_capacity_matches_brute_force_contacts() {
        let pop = pop();
        let diagnosed = [5usize, 17, 230, 231, 600];
        let mut t = ContactTracer::new(pop.len());
        for &d in &diagnosed {
            t.enqueue(d, 2);
        }
        let traced = t.trace(2, usize::MAX, 3, &pop);

        // Brute force: scan every agent for a shared household or venue.
        let mut expected = BTreeSet::new();
        for &d in &diagnosed {
            let dd = &pop.agents()[d];
            for a in pop.agents() {
                if a.id == d {
                    continue;
                }
                let same_hh = a.household == dd.household;
                let same_venue = a.venue.is_some() && a.venue == dd.venue;
                if same_hh || same_venue {
                    expected.insert(a.id);
                }
            }
        }
        let got: BTreeSet<usize> = traced.iter().copied().collect();
        assert_eq!(got.len(), traced.len(), "a contact was traced twice");
        assert_eq!(got, expected);
        assert_eq!(t.pending(), 0);
    }

    #[test]
    fn capacity_carries_over_fifo() {
        let pop = pop();
        let mut t = ContactTracer::new(pop.len());
        t.enqueue(5, 0);
        t.enqueue(600, 0);
        let all: Vec<usize> = {
            let mut probe = ContactTracer::new(pop.len());
            probe.enqueue(5, 0);
            probe.enqueue(600, 0);
            probe.trace(0, usize::MAX, 3, &pop)
        };
        let first = t.trace(0, 1, 3, &pop);
        assert_eq!(first, all[..1].to_vec());
        let rest = t.trace(1, usize::MAX, 3, &pop);
        assert_eq!(rest, all[1..].to_vec());
    }

    #[test]
    fn stale_entries_dropped() {
        let pop = pop();
        let mut t = ContactTracer::new(pop.len());
        t.enqueue(5, 0);
        assert!(t.trace(10, 100, 3, &pop).is_empty());
        assert_eq!(t.pending(), 0);
    }

    #[test]
    fn zero_mask_duration_leaves_mask_unchanged() {
        let mut agents = vec![AgentEpiState::default(); 3];
        let mut policy = PolicyVector::baseline();
        policy.mask_duration_ct = 0.0;
        policy.quarantine_adherence_ct = 1.0;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        apply_trace_outcomes(&[0, 2], &mut agents, &policy, 4, 5, &mut rng);
        assert!(agents.iter().all(|a| a.masked_until().is_none()));
        assert_eq!(agents[0].quarantined_until(), Some(9));
        assert_eq!(agents[1].quarantined_until(), None);

        policy.mask_duration_ct = 14.0;
        apply_trace_outcomes(&[1], &mut agents, &policy, 4, 5, &mut rng);
        assert_eq!(agents[1].masked_until(), Some(18));
    }

    #[test]
    fn capacity_scales_with_population() {
        let p = PolicyVector::baseline();
        assert_eq!(tracing_capacity(&p, 2_400_000), 6000);
        assert_eq!(tracing_capacity(&p, 24_000), 60);
    }
}

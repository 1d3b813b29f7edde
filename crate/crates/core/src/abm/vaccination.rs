//! Primary vaccination and boosting toward per-age-group coverage targets.

use rand::Rng;

use super::params::VaccinationParams;
use super::state::AgentEpiState;
use crate::policy::PolicyVector;
use crate::population::{AgeGroup, Population};

/// Number of age groups the thresholds apply to (5-17, 18-49, 50-64, 65+).
pub const N_ELIGIBLE_GROUPS: usize = 4;

fn eligible_group(g: AgeGroup) -> Option<usize> {
    match g {
        AgeGroup::Age0To4 => None,
        AgeGroup::Age5To17 => Some(0),
        AgeGroup::Age18To49 => Some(1),
        AgeGroup::Age50To64 => Some(2),
        AgeGroup::Age65Plus => Some(3),
    }
}

fn count_for(frac: f64, n: usize) -> usize {
    ((frac * n as f64) - 1e-9).ceil().max(0.0) as usize
}

/// Coverage a group should have reached by the end of `day`:
/// the larger of the observed trajectory and a threshold ramp.
pub fn coverage_target(
    start: f64,
    end: f64,
    threshold: f64,
    day: i32,
    n_days: u32,
    ramp_days: u32,
) -> f64 {
    let t = (day + 1) as f64;
    let observed = start + (end - start) * (t / n_days as f64).min(1.0);
    let ramp = start + (threshold - start).max(0.0) * (t / ramp_days as f64).min(1.0);
    observed.max(ramp)
}

#[derive(Debug, Clone)]
pub struct VaccinationState {
    members: [Vec<u32>; N_ELIGIBLE_GROUPS],
    unvaccinated: [Vec<u32>; N_ELIGIBLE_GROUPS],
    vaccinated: [usize; N_ELIGIBLE_GROUPS],
    boosted: [usize; N_ELIGIBLE_GROUPS],
}

impl VaccinationState {
    /// Applies day-0 coverage. Prior doses are spread over the configured
    /// window before the run so only part of the vaccinated pool is booster-eligible.
    pub fn initialize<R: Rng + ?Sized>(
        pop: &Population,
        params: &VaccinationParams,
        agents: &mut [AgentEpiState],
        rng: &mut R,
    ) -> Self {
        let mut members: [Vec<u32>; N_ELIGIBLE_GROUPS] = Default::default();
        for a in pop.agents() {
            if let Some(g) = eligible_group(a.age_group) {
                members[g].push(a.id as u32);
            }
        }
        let mut state = Self {
            unvaccinated: members.clone(),
            members,
            vaccinated: [0; N_ELIGIBLE_GROUPS],
            boosted: [0; N_ELIGIBLE_GROUPS],
        };
        for g in 0..N_ELIGIBLE_GROUPS {
            let n = state.members[g].len();
            let want = count_for(params.vaccinated_start[g], n);
            for _ in 0..want {
                let day = -(rng.random_range(1..=params.prior_vaccination_window.max(1)) as i32);
                state.vaccinate_one(g, day, agents, rng);
            }
            let want_boost = count_for(params.boosted_start[g], n);
            state.boost(g, want_boost, 0, params.booster_lag_days, agents, rng);
        }
        state
    }

    fn vaccinate_one<R: Rng + ?Sized>(
        &mut self,
        g: usize,
        day: i32,
        agents: &mut [AgentEpiState],
        rng: &mut R,
    ) -> bool {
        let pool = &mut self.unvaccinated[g];
        if pool.is_empty() {
            return false;
        }
        let i = rng.random_range(0..pool.len());
        let id = pool.swap_remove(i) as usize;
        agents[id].vaccinated = true;
        agents[id].vaccinated_day = Some(day);
        self.vaccinated[g] += 1;
        true
    }

    /// Boosts up to `target` agents in group `g`, drawing only from agents
    /// whose primary dose is at least `lag` days old.
    fn boost<R: Rng + ?Sized>(
        &mut self,
        g: usize,
        target: usize,
        day: i32,
        lag: u32,
        agents: &mut [AgentEpiState],
        rng: &mut R,
    ) {
        if self.boosted[g] >= target {
            return;
        }
        let mut pool: Vec<u32> = self.members[g]
            .iter()
            .copied()
            .filter(|&id| {
                let a = &agents[id as usize];
                a.vaccinated
                    && !a.boosted
                    && a.vaccinated_day.is_some_and(|d| d <= day - lag as i32)
            })
            .collect();
        while self.boosted[g] < target && !pool.is_empty() {
            let i = rng.random_range(0..pool.len());
            let id = pool.swap_remove(i) as usize;
            agents[id].boosted = true;
            self.boosted[g] += 1;
        }
    }

    /// One day of vaccination then boosting.
    pub fn apply_vaccination<R: Rng + ?Sized>(
        &mut self,
        agents: &mut [AgentEpiState],
        params: &VaccinationParams,
        policy: &PolicyVector,
        day: i32,
        n_days: u32,
        rng: &mut R,
    ) {
        for g in 0..N_ELIGIBLE_GROUPS {
            let n = self.members[g].len();
            let cov = coverage_target(
                params.vaccinated_start[g],
                params.vaccinated_end[g],
                policy.vaccine_threshold,
                day,
                n_days,
                params.policy_ramp_days,
            );
            let want = count_for(cov, n);
            while self.vaccinated[g] < want {
                if !self.vaccinate_one(g, day, agents, rng) {
                    break;
                }
            }
            let bcov = coverage_target(
                params.boosted_start[g],
                params.boosted_end[g],
                policy.booster_threshold,
                day,
                n_days,
                params.policy_ramp_days,
            );
            let want_boost = count_for(bcov, n);
            self.boost(g, want_boost, day, params.booster_lag_days, agents, rng);
        }
    }

    pub fn group_sizes(&self) -> [usize; N_ELIGIBLE_GROUPS] {
        std::array::from_fn(|g| self.members[g].len())
    }

    pub fn vaccinated_counts(&self) -> [usize; N_ELIGIBLE_GROUPS] {
        self.vaccinated
    }

    pub fn boosted_counts(&self) -> [usize; N_ELIGIBLE_GROUPS] {
        self.boosted
    }

    fn eligible_total(&self) -> usize {
        self.members.iter().map(Vec::len).sum()
    }

    /// Vaccinated share of agents aged 5 and older.
    pub fn vaccinated_fraction(&self) -> f64 {
        let n = self.eligible_total();
        if n == 0 {
            return 0.0;
        }
        self.vaccinated.iter().sum::<usize>() as f64 / n as f64
    }

    /// Boosted share of agents aged 5 and older.
    pub fn boosted_fraction(&self) -> f64 {
        let n = self.eligible_total();
        if n == 0 {
            return 0.0;
        }
        self.boosted.iter().sum::<usize>() as f64 / n as f64
    }
}

//! Discrete-day agent-based transmission model with ten intervention levers.
//!
//! Each day runs six phases in a fixed order: vaccination and boosting,
//! transmission, disease progression, test allocation, diagnosis with
//! quarantine draws, and contact tracing.

pub mod contact_tracing;
pub mod outcome;
pub mod params;
pub mod state;
pub mod testing;
pub mod vaccination;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;

pub use contact_tracing::{contact_trace, tracing_capacity, ContactTracer};
pub use outcome::{compute_svi_outcomes, SimOutcome};
pub use params::{ContactParams, DiseaseParams, Duration, TestingParams, VaccinationParams};
pub use state::{AgentEpiState, DiseaseState, Window};
pub use testing::{allocate_tests, TestCandidate, TestKind, TestSupply};
pub use vaccination::VaccinationState;

use crate::error::{Error, Result};
use crate::policy::PolicyVector;
use crate::population::{Population, VenueKind};
use state::extend_window;

/// Per-day counters, indexed by day.
#[derive(Debug, Clone, Default)]
struct DailySeries {
    new_infections: Vec<u64>,
    diagnoses: Vec<u64>,
    tests: Vec<u64>,
    positives: Vec<u64>,
}

/// A single replicate in progress. Drive it with [`Simulation::step_day`]
/// or run it to completion with [`Simulation::run`].
pub struct Simulation<'a> {
    pop: &'a Population,
    params: DiseaseParams,
    policy: PolicyVector,
    rng: ChaCha8Rng,
    day: i32,
    agents: Vec<AgentEpiState>,
    vaccination: VaccinationState,
    tracer: ContactTracer,
    infectiousness: Gamma<f64>,
    supply: TestSupply,
    trace_capacity: usize,
    initial_infections: u64,
    cumulative_infections: u64,
    cumulative_diagnoses: u64,
    daily: DailySeries,
    // scratch
    hazard: Vec<f64>,
    touched: Vec<u32>,
}

impl<'a> Simulation<'a> {
    pub fn new(
        pop: &'a Population,
        params: &DiseaseParams,
        policy: &PolicyVector,
        seed: u64,
    ) -> Result<Self> {
        if pop.is_empty() {
            return Err(Error::EmptyPopulation);
        }
        params.validate()?;
        policy.validate()?;
        let n = pop.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut agents = vec![AgentEpiState::default(); n];
        let vaccination =
            VaccinationState::initialize(pop, &params.vaccination, &mut agents, &mut rng);
        let shape = params.infectiousness_shape;
        let infectiousness =
            Gamma::new(shape, 1.0 / shape).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        let mut sim = Self {
            pop,
            params: params.clone(),
            policy: *policy,
            rng,
            day: 0,
            agents,
            vaccination,
            tracer: ContactTracer::new(n),
            infectiousness,
            supply: TestSupply::for_policy(&params.testing, policy, n),
            trace_capacity: tracing_capacity(policy, n),
            initial_infections: 0,
            cumulative_infections: 0,
            cumulative_diagnoses: 0,
            daily: DailySeries::default(),
            hazard: vec![0.0; n],
            touched: Vec::new(),
        };
        sim.seed_infections();
        Ok(sim)
    }

    pub fn day(&self) -> i32 {
        self.day
    }

    pub fn agents(&self) -> &[AgentEpiState] {
        &self.agents
    }

    pub fn agents_mut(&mut self) -> &mut [AgentEpiState] {
        &mut self.agents
    }

    pub fn vaccination(&self) -> &VaccinationState {
        &self.vaccination
    }

    pub fn is_finished(&self) -> bool {
        self.day >= self.params.n_days as i32
    }

    pub fn cumulative_infections(&self) -> u64 {
        self.cumulative_infections
    }

    pub fn initial_infections(&self) -> u64 {
        self.initial_infections
    }

    /// Tests administered on each completed day.
    pub fn daily_tests(&self) -> &[u64] {
        &self.daily.tests
    }

    pub fn test_supply(&self) -> TestSupply {
        self.supply
    }

    /// `round(multiplier * seed_fraction * n)` infectious agents, apportioned
    /// across tracts by size and staggered across infectious stages.
    fn seed_infections(&mut self) {
        let n = self.pop.len();
        let n0 = (self.params.initial_infection_multiplier
            * self.params.default_seed_fraction
            * n as f64)
            .round()
            .min(n as f64) as usize;
        let weights: Vec<f64> = self
            .pop
            .tracts()
            .iter()
            .map(|t| t.agent_count as f64)
            .collect();
        let per_tract = crate::population::apportion(n0, &weights);
        let mut seeds = Vec::with_capacity(n0);
        for (t, &k) in per_tract.iter().enumerate() {
            let members = self.pop.tract_members(t);
            seeds.extend(
                members
                    .choose_multiple(&mut self.rng, k.min(members.len()))
                    .map(|&a| a as usize),
            );
        }
        seeds.sort_unstable();
        let p = &self.params;
        let presymp_share = p.presymp_days.mean / (p.presymp_days.mean + p.infectious_days.mean);
        for id in seeds {
            let asym = self.rng.random::<f64>() < self.params.asymptomatic_fraction;
            let het = self.infectiousness.sample(&mut self.rng) as f32;
            let (state, dur) = if asym {
                (
                    DiseaseState::InfectiousAsymptomatic,
                    self.params.infectious_days,
                )
            } else if self.rng.random::<f64>() < presymp_share {
                (DiseaseState::Presymptomatic, self.params.presymp_days)
            } else {
                (
                    DiseaseState::InfectiousSymptomatic,
                    self.params.infectious_days,
                )
            };
            let full = self.draw_duration(dur);
            let remaining = self.rng.random_range(1..=full) as i32;
            let a = &mut self.agents[id];
            a.disease = state;
            a.will_be_asymptomatic = asym;
            a.infectiousness = het;
            a.day_of_state_entry = 0;
            a.next_transition = remaining - 1;
            if state == DiseaseState::InfectiousSymptomatic {
                let q = self.pop.agents()[id].quarantine_prob;
                if self.rng.random::<f64>() < q {
                    extend_window(
                        &mut self.agents[id].quarantine,
                        -1,
                        self.params.quarantine_days,
                    );
                }
            }
            self.initial_infections += 1;
        }
        self.cumulative_infections = self.initial_infections;
    }

    fn draw_duration(&mut self, d: Duration) -> u32 {
        self.rng.random_range(d.min..=d.max)
    }

    pub fn run(mut self) -> Result<SimOutcome> {
        while !self.is_finished() {
            self.step_day();
        }
        self.finish()
    }

    /// Advances one day through all six phases.
    pub fn step_day(&mut self) {
        let day = self.day;
        self.vaccination.apply_vaccination(
            &mut self.agents,
            &self.params.vaccination,
            &self.policy,
            day,
            self.params.n_days,
            &mut self.rng,
        );
        let new_inf = self.transmit(day);
        self.progress(day);
        let tested = self.run_tests(day);
        let (positives, diagnosed) = self.process_results(day, &tested);
        let traced = self.tracer.trace(
            day,
            self.trace_capacity,
            self.params.trace_window_days,
            self.pop,
        );
        contact_tracing::apply_trace_outcomes(
            &traced,
            &mut self.agents,
            &self.policy,
            day,
            self.params.quarantine_days,
            &mut self.rng,
        );

        self.daily.new_infections.push(new_inf);
        self.daily.tests.push(tested.len() as u64);
        self.daily.positives.push(positives);
        self.daily.diagnoses.push(diagnosed);
        self.day += 1;
    }

    fn mask_factor(&self, a: &AgentEpiState, day: i32) -> f64 {
        let e = self.params.mask_efficacy;
        if a.is_masked(day) {
            1.0 - e
        } else {
            1.0 - e * self.policy.mask_adherence
        }
    }

    fn stage_multiplier(&self, s: DiseaseState) -> f64 {
        match s {
            DiseaseState::Presymptomatic => self.params.presymptomatic_fraction,
            DiseaseState::InfectiousAsymptomatic => self.params.asymptomatic_infectiousness,
            DiseaseState::InfectiousSymptomatic => 1.0,
            _ => 0.0,
        }
    }

    /// Probability that infectious `src` infects susceptible `dst` through one
    /// contact-day in a setting of relative intensity `weight`. Masks act on
    /// both sides outside the household.
    pub fn contact_probability(
        &self,
        src: usize,
        dst: usize,
        weight: f64,
        household: bool,
        day: i32,
    ) -> f64 {
        let s = &self.agents[src];
        let d = &self.agents[dst];
        let mut p = self.params.base_transmission_rate
            * weight
            * self.stage_multiplier(s.disease)
            * s.infectiousness as f64
            * d.susceptibility(self.params.vaccine_efficacy, self.params.booster_efficacy);
        if !household {
            p *= self.mask_factor(s, day) * self.mask_factor(d, day);
        }
        p.clamp(0.0, 1.0)
    }

    fn expose(&mut self, src: usize, dst: usize, weight: f64, household: bool, day: i32) {
        if self.agents[dst].disease != DiseaseState::Susceptible {
            return;
        }
        if !household && self.agents[dst].is_quarantined(day) {
            return;
        }
        let p = self.contact_probability(src, dst, weight, household, day);
        if p <= 0.0 {
            return;
        }
        if self.hazard[dst] == 0.0 {
            self.touched.push(dst as u32);
        }
        self.hazard[dst] += (-p).ln_1p();
    }

    /// Phase 2. Returns the number of new exposures.
    fn transmit(&mut self, day: i32) -> u64 {
        if self.params.base_transmission_rate <= 0.0 {
            return 0;
        }
        let infectious: Vec<usize> = (0..self.agents.len())
            .filter(|&i| self.agents[i].disease.is_infectious())
            .collect();
        for &i in &infectious {
            self.expose_from(i, day);
        }
        self.resolve_exposures(day)
    }

    /// Accumulates the hazard one infectious agent puts on its contacts today.
    fn expose_from(&mut self, i: usize, day: i32) {
        let pop = self.pop;
        let c = self.params.contacts.clone();
        let n = pop.len();
        let agent = &pop.agents()[i];
        for &j in pop.household_members(agent.household) {
            let j = j as usize;
            if j != i {
                self.expose(i, j, c.household_weight, true, day);
            }
        }
        if self.agents[i].is_quarantined(day) {
            return;
        }
        if let Some(v) = agent.venue {
            let w = match pop.venues()[v].kind {
                VenueKind::School => c.school_weight,
                VenueKind::Workplace => c.workplace_weight,
            };
            for &j in pop.venue_members(v) {
                let j = j as usize;
                if j != i {
                    self.expose(i, j, w, false, day);
                }
            }
        }
        let local = pop.tract_members(agent.home_tract);
        for _ in 0..c.community_contacts {
            let j = if self.rng.random::<f64>() < c.community_local_share {
                local[self.rng.random_range(0..local.len())] as usize
            } else {
                self.rng.random_range(0..n)
            };
            if j != i {
                self.expose(i, j, c.community_weight, false, day);
            }
        }
    }

    /// Draws infections from the accumulated hazard, in agent-id order so the
    /// outcome does not depend on the order contacts were accumulated.
    fn resolve_exposures(&mut self, day: i32) -> u64 {
        let mut touched = std::mem::take(&mut self.touched);
        touched.sort_unstable();
        let mut new_inf = 0;
        for &j in &touched {
            let j = j as usize;
            let log_escape = self.hazard[j];
            self.hazard[j] = 0.0;
            if self.rng.random::<f64>() < 1.0 - log_escape.exp() {
                let latent = self.draw_duration(self.params.latent_days) as i32;
                let asym = self.rng.random::<f64>() < self.params.asymptomatic_fraction;
                let het = self.infectiousness.sample(&mut self.rng) as f32;
                let a = &mut self.agents[j];
                a.disease = DiseaseState::Exposed;
                a.day_of_state_entry = day;
                a.next_transition = day + latent;
                a.will_be_asymptomatic = asym;
                a.infectiousness = het;
                new_inf += 1;
            }
        }
        touched.clear();
        self.touched = touched;
        self.cumulative_infections += new_inf;
        new_inf
    }

    /// Infects one random agent at the start of its infectious period and
    /// counts whom it infects directly until it recovers. Nobody else
    /// transmits, and no quarantine, testing or tracing applies.
    fn run_index_case(&mut self) -> u64 {
        let n = self.agents.len();
        let idx = self.rng.random_range(0..n);
        let asym = self.rng.random::<f64>() < self.params.asymptomatic_fraction;
        let het = self.infectiousness.sample(&mut self.rng) as f32;
        let (state, dur) = if asym {
            (
                DiseaseState::InfectiousAsymptomatic,
                self.params.infectious_days,
            )
        } else {
            (DiseaseState::Presymptomatic, self.params.presymp_days)
        };
        let until = self.draw_duration(dur) as i32;
        let a = &mut self.agents[idx];
        a.disease = state;
        a.will_be_asymptomatic = asym;
        a.infectiousness = het;
        a.next_transition = until;
        let mut count = 0;
        let mut day = 0;
        while self.agents[idx].disease.is_infectious() {
            if self.params.base_transmission_rate > 0.0 {
                self.expose_from(idx, day);
                count += self.resolve_exposures(day);
            }
            if self.agents[idx].next_transition <= day {
                if self.agents[idx].disease == DiseaseState::Presymptomatic {
                    let d = self.draw_duration(self.params.infectious_days) as i32;
                    let a = &mut self.agents[idx];
                    a.disease = DiseaseState::InfectiousSymptomatic;
                    a.next_transition = day + d;
                } else {
                    self.agents[idx].disease = DiseaseState::Recovered;
                }
            }
            day += 1;
        }
        count
    }

    /// Phase 3.
    fn progress(&mut self, day: i32) {
        for i in 0..self.agents.len() {
            if self.agents[i].next_transition > day {
                continue;
            }
            let (next, dur) = match self.agents[i].disease {
                DiseaseState::Exposed if self.agents[i].will_be_asymptomatic => (
                    DiseaseState::InfectiousAsymptomatic,
                    Some(self.params.infectious_days),
                ),
                DiseaseState::Exposed => {
                    (DiseaseState::Presymptomatic, Some(self.params.presymp_days))
                }
                DiseaseState::Presymptomatic => (
                    DiseaseState::InfectiousSymptomatic,
                    Some(self.params.infectious_days),
                ),
                DiseaseState::InfectiousSymptomatic | DiseaseState::InfectiousAsymptomatic => {
                    (DiseaseState::Recovered, None)
                }
                DiseaseState::Susceptible | DiseaseState::Recovered => {
                    self.agents[i].next_transition = i32::MAX;
                    continue;
                }
            };
            let until = match dur {
                Some(d) => day + self.draw_duration(d) as i32,
                None => i32::MAX,
            };
            let a = &mut self.agents[i];
            a.disease = next;
            a.day_of_state_entry = day;
            a.next_transition = until;
            if next == DiseaseState::InfectiousSymptomatic {
                let q = self.pop.agents()[i].quarantine_prob;
                if self.rng.random::<f64>() < q {
                    extend_window(
                        &mut self.agents[i].quarantine,
                        day,
                        self.params.quarantine_days,
                    );
                }
            }
        }
    }

    /// Phase 4.
    fn run_tests(&mut self, day: i32) -> Vec<(usize, TestKind)> {
        if self.supply.total() == 0 {
            return Vec::new();
        }
        let candidates: Vec<TestCandidate> = self
            .agents
            .iter()
            .enumerate()
            .filter(|(_, a)| !a.diagnosed)
            .map(|(i, a)| TestCandidate {
                agent: i,
                symptomatic: a.disease == DiseaseState::InfectiousSymptomatic,
                quarantined: a.is_quarantined(day),
            })
            .collect();
        allocate_tests(&candidates, self.supply, &self.policy, &mut self.rng)
    }

    /// Phase 5. Returns (positive tests, new diagnoses).
    fn process_results(&mut self, day: i32, tested: &[(usize, TestKind)]) -> (u64, u64) {
        let mut positives = 0;
        for &(id, kind) in tested {
            if !self.agents[id].disease.is_infectious() {
                continue;
            }
            let sens = match kind {
                TestKind::Pcr => self.params.testing.pcr_sensitivity,
                TestKind::Antigen => self.params.testing.antigen_sensitivity,
            };
            if self.rng.random::<f64>() >= sens {
                continue;
            }
            positives += 1;
            let q = self.pop.agents()[id].quarantine_prob;
            let quarantines = self.rng.random::<f64>() < q;
            let a = &mut self.agents[id];
            a.diagnosed = true;
            a.diagnosis_day = Some(day);
            if quarantines {
                extend_window(&mut a.quarantine, day, self.params.quarantine_days);
            }
            self.tracer.enqueue(id, day);
            if self.params.household_notification {
                let hh = self.pop.agents()[id].household;
                for &m in self.pop.household_members(hh) {
                    let m = m as usize;
                    if m != id && self.rng.random::<f64>() < self.pop.agents()[m].quarantine_prob {
                        extend_window(
                            &mut self.agents[m].quarantine,
                            day,
                            self.params.quarantine_days,
                        );
                    }
                }
            }
        }
        self.cumulative_diagnoses += positives;
        (positives, positives)
    }

    pub fn finish(self) -> Result<SimOutcome> {
        let ever: Vec<bool> = self
            .agents
            .iter()
            .map(|a| a.disease.ever_infected())
            .collect();
        let (attack_rate_by_svi, svi_variance) = compute_svi_outcomes(&ever, self.pop)?;
        Ok(SimOutcome {
            n_agents: self.pop.len(),
            initial_infections: self.initial_infections,
            cumulative_infections: self.cumulative_infections,
            cumulative_diagnoses: self.cumulative_diagnoses,
            daily_new_infections: self.daily.new_infections,
            daily_diagnoses: self.daily.diagnoses,
            daily_tests: self.daily.tests,
            daily_positives: self.daily.positives,
            attack_rate_by_svi,
            svi_variance,
            vaccinated_fraction: self.vaccination.vaccinated_fraction(),
            boosted_fraction: self.vaccination.boosted_fraction(),
        })
    }
}

/// Runs one replicate to completion.
pub fn run_simulation(
    pop: &Population,
    disease: &DiseaseParams,
    policy: &PolicyVector,
    seed: u64,
) -> Result<SimOutcome> {
    Simulation::new(pop, disease, policy, seed)?.run()
}

/// Direct secondary infections caused by one random index case in an
/// otherwise fully susceptible population with every intervention off.
pub fn index_case_secondaries(pop: &Population, disease: &DiseaseParams, seed: u64) -> Result<u64> {
    let mut p = disease.clone();
    p.initial_infection_multiplier = 0.0;
    p.testing.baseline_pcr_per_day = 0.0;
    p.testing.baseline_antigen_per_day = 0.0;
    p.vaccination.vaccinated_start = [0.0; 4];
    p.vaccination.vaccinated_end = [0.0; 4];
    p.vaccination.boosted_start = [0.0; 4];
    p.vaccination.boosted_end = [0.0; 4];
    let mut sim = Simulation::new(pop, &p, &PolicyVector::baseline(), seed)?;
    Ok(sim.run_index_case())
}

/// Replicate `r` uses seed `base_seed + r`. Replicates run in parallel.
pub fn run_replicates(
    pop: &Population,
    disease: &DiseaseParams,
    policy: &PolicyVector,
    base_seed: u64,
    reps: usize,
) -> Result<Vec<SimOutcome>> {
    (0..reps)
        .into_par_iter()
        .map(|r| run_simulation(pop, disease, policy, base_seed.wrapping_add(r as u64)))
        .collect()
}

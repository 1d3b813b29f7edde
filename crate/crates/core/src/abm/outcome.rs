use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::population::{Population, N_SVI_BINS};
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOutcome {
    pub n_agents: usize,
    pub initial_infections: u64,
    pub cumulative_infections: u64,
    pub cumulative_diagnoses: u64,
    pub daily_new_infections: Vec<u64>,
    pub daily_diagnoses: Vec<u64>,
    pub daily_tests: Vec<u64>,
    pub daily_positives: Vec<u64>,
    pub attack_rate_by_svi: [f64; N_SVI_BINS],
    pub svi_variance: f64,
    pub vaccinated_fraction: f64,
    pub boosted_fraction: f64,
}

impl SimOutcome {
    pub fn attack_rate(&self) -> f64 {
        self.cumulative_infections as f64 / self.n_agents as f64
    }

    /// Cumulative infections at the end of each day (initial infections included).
    pub fn cumulative_infection_curve(&self) -> Vec<u64> {
        let mut acc = self.initial_infections;
        self.daily_new_infections
            .iter()
            .map(|d| {
                acc += d;
                acc
            })
            .collect()
    }
}

/// Per-bin attack rates over agents ever infected, and their sample variance
/// (denominator 3).
pub fn compute_svi_outcomes(
    ever_infected: &[bool],
    pop: &Population,
) -> Result<([f64; N_SVI_BINS], f64)> {
    let mut infected = [0usize; N_SVI_BINS];
    let totals = pop.agents_per_svi_bin();
    for (i, &inf) in ever_infected.iter().enumerate() {
        if inf {
            infected[pop.svi_bin_of(i)] += 1;
        }
    }
    let mut rates = [0.0; N_SVI_BINS];
    for b in 0..N_SVI_BINS {
        if totals[b] == 0 {
            return Err(Error::EmptySviBin(b));
        }
        rates[b] = infected[b] as f64 / totals[b] as f64;
    }
    Ok((rates, svi_variance(&rates)))
}

pub fn svi_variance(rates: &[f64; N_SVI_BINS]) -> f64 {
    stats::sample_variance(rates)
}

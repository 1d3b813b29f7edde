use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integer-valued duration drawn uniformly from `min..=max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Duration {
    pub mean: f64,
    pub min: u32,
    pub max: u32,
}

impl Duration {
    pub const fn jittered(mean: u32, jitter: u32) -> Self {
        Self {
            mean: mean as f64,
            min: mean - jitter,
            max: mean + jitter,
        }
    }
}

/// Relative contact intensities by setting. Multiplied by the base
/// transmission rate to give a per-contact-day infection probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactParams {
    pub household_weight: f64,
    pub school_weight: f64,
    pub workplace_weight: f64,
    /// Random community contacts an agent makes per day.
    pub community_contacts: u32,
    pub community_weight: f64,
    /// Share of community contacts drawn from the agent's own tract.
    pub community_local_share: f64,
}

impl Default for ContactParams {
    fn default() -> Self {
        Self {
            household_weight: 1.0,
            school_weight: 0.22,
            workplace_weight: 0.22,
            community_contacts: 10,
            community_weight: 0.3,
            community_local_share: 0.85,
        }
    }
}

/// Status-quo testing volumes, quoted for the full-scale population and
/// rescaled to the simulated one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestingParams {
    pub baseline_pcr_per_day: f64,
    pub baseline_antigen_per_day: f64,
    pub pcr_sensitivity: f64,
    pub antigen_sensitivity: f64,
}

impl Default for TestingParams {
    fn default() -> Self {
        Self {
            baseline_pcr_per_day: 18_000.0,
            baseline_antigen_per_day: 12_000.0,
            pcr_sensitivity: 1.0,
            antigen_sensitivity: 0.85,
        }
    }
}

/// Observed (status-quo) coverage for the vaccine-eligible age groups
/// 5-17, 18-49, 50-64 and 65+, at day 0 and at the end of the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaccinationParams {
    pub vaccinated_start: [f64; 4],
    pub vaccinated_end: [f64; 4],
    pub boosted_start: [f64; 4],
    pub boosted_end: [f64; 4],
    /// Days after vaccination before an agent can be boosted.
    pub booster_lag_days: u32,
    /// Initially vaccinated agents received their dose uniformly within this many days before day 0.
    pub prior_vaccination_window: u32,
    /// Days over which a threshold policy ramps coverage up to its target.
    pub policy_ramp_days: u32,
}

impl Default for VaccinationParams {
    fn default() -> Self {
        Self {
            vaccinated_start: [0.22, 0.52, 0.66, 0.80],
            vaccinated_end: [0.26, 0.55, 0.68, 0.82],
            boosted_start: [0.0, 0.10, 0.18, 0.36],
            boosted_end: [0.02, 0.18, 0.28, 0.46],
            booster_lag_days: 150,
            prior_vaccination_window: 330,
            policy_ramp_days: 14,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiseaseParams {
    pub base_transmission_rate: f64,
    /// Relative infectiousness during the presymptomatic stage.
    pub presymptomatic_fraction: f64,
    pub asymptomatic_fraction: f64,
    /// Relative infectiousness of asymptomatic infections.
    pub asymptomatic_infectiousness: f64,
    pub initial_infection_multiplier: f64,
    /// Share of the population infectious at day 0 when the multiplier is 1.
    pub default_seed_fraction: f64,
    /// Gamma shape of per-infection infectiousness (mean 1). Smaller is more overdispersed.
    pub infectiousness_shape: f64,
    pub latent_days: Duration,
    pub presymp_days: Duration,
    pub infectious_days: Duration,
    pub vaccine_efficacy: f64,
    pub booster_efficacy: f64,
    pub mask_efficacy: f64,
    pub quarantine_days: u32,
    /// Diagnosed agents older than this many days are dropped from the tracing queue.
    pub trace_window_days: u32,
    /// Household members of a newly diagnosed agent quarantine with their own
    /// quarantine probability, independent of tracing capacity.
    pub household_notification: bool,
    pub n_days: u32,
    pub contacts: ContactParams,
    pub testing: TestingParams,
    pub vaccination: VaccinationParams,
}

impl Default for DiseaseParams {
    fn default() -> Self {
        Self {
            base_transmission_rate: 0.116,
            presymptomatic_fraction: 0.5,
            asymptomatic_fraction: 0.35,
            asymptomatic_infectiousness: 0.5,
            initial_infection_multiplier: 1.0,
            default_seed_fraction: 0.01,
            infectiousness_shape: 1.0,
            latent_days: Duration::jittered(2, 1),
            presymp_days: Duration::jittered(2, 1),
            infectious_days: Duration::jittered(5, 1),
            vaccine_efficacy: 0.4,
            booster_efficacy: 0.7,
            mask_efficacy: 0.6,
            quarantine_days: 5,
            trace_window_days: 3,
            household_notification: true,
            n_days: 60,
            contacts: ContactParams::default(),
            testing: TestingParams::default(),
            vaccination: VaccinationParams::default(),
        }
    }
}

fn unit(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "{name} = {v} must lie in [0, 1]"
        )))
    }
}

impl DiseaseParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.base_transmission_rate >= 0.0) {
            return Err(Error::InvalidConfig(
                "base_transmission_rate must be >= 0".into(),
            ));
        }
        unit("presymptomatic_fraction", self.presymptomatic_fraction)?;
        unit("asymptomatic_fraction", self.asymptomatic_fraction)?;
        unit(
            "asymptomatic_infectiousness",
            self.asymptomatic_infectiousness,
        )?;
        unit("vaccine_efficacy", self.vaccine_efficacy)?;
        unit("booster_efficacy", self.booster_efficacy)?;
        unit("mask_efficacy", self.mask_efficacy)?;
        unit("default_seed_fraction", self.default_seed_fraction)?;
        unit("antigen_sensitivity", self.testing.antigen_sensitivity)?;
        unit("pcr_sensitivity", self.testing.pcr_sensitivity)?;
        unit("community_local_share", self.contacts.community_local_share)?;
        if self.booster_efficacy < self.vaccine_efficacy {
            return Err(Error::InvalidConfig(
                "booster_efficacy must be >= vaccine_efficacy".into(),
            ));
        }
        if !(self.initial_infection_multiplier >= 0.0) || !(self.infectiousness_shape > 0.0) {
            return Err(Error::InvalidConfig(
                "initial_infection_multiplier must be >= 0 and infectiousness_shape > 0".into(),
            ));
        }
        for (name, d) in [
            ("latent_days", self.latent_days),
            ("presymp_days", self.presymp_days),
            ("infectious_days", self.infectious_days),
        ] {
            if d.min < 1 || d.max < d.min {
                return Err(Error::InvalidConfig(format!(
                    "{name} must satisfy 1 <= min <= max"
                )));
            }
        }
        if self.n_days == 0 {
            return Err(Error::InvalidConfig("n_days must be >= 1".into()));
        }
        let v = &self.vaccination;
        for g in 0..4 {
            for (name, x) in [
                ("vaccinated_start", v.vaccinated_start[g]),
                ("vaccinated_end", v.vaccinated_end[g]),
                ("boosted_start", v.boosted_start[g]),
                ("boosted_end", v.boosted_end[g]),
            ] {
                unit(name, x)?;
            }
            if v.vaccinated_end[g] < v.vaccinated_start[g] || v.boosted_end[g] < v.boosted_start[g]
            {
                return Err(Error::InvalidConfig(
                    "baseline coverage trajectories must be non-decreasing".into(),
                ));
            }
        }
        if v.policy_ramp_days == 0 {
            return Err(Error::InvalidConfig("policy_ramp_days must be >= 1".into()));
        }
        Ok(())
    }
}

//! Desk-scale synthetic population: census tracts with SVI scores,
//! households, in-tract schools and cross-tract workplaces.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const POPULATION_SCHEMA_VERSION: u32 = 1;

/// Number of SVI strata used for attack-rate stratification.
pub const N_SVI_BINS: usize = 4;

pub const SVI_BIN_LABELS: [&str; N_SVI_BINS] = ["0-0.25", "0.25-0.5", "0.5-0.75", "0.75-1.0"];

/// Bins are half-open `[lo, hi)` except the top one, which is closed at 1.0.
pub fn svi_bin(svi: f64) -> usize {
    if svi < 0.25 {
        0
    } else if svi < 0.5 {
        1
    } else if svi < 0.75 {
        2
    } else {
        3
    }
}

/// Probability an agent quarantines when symptomatic or positive.
pub fn quarantine_probability(adherence: f64, svi: f64) -> f64 {
    0.5 * adherence + 0.5 * (1.0 - svi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AgeGroup {
    #[serde(rename = "0-4")]
    Age0To4,
    #[serde(rename = "5-17")]
    Age5To17,
    #[serde(rename = "18-49")]
    Age18To49,
    #[serde(rename = "50-64")]
    Age50To64,
    #[serde(rename = "65+")]
    Age65Plus,
}

impl AgeGroup {
    pub const ALL: [AgeGroup; 5] = [
        AgeGroup::Age0To4,
        AgeGroup::Age5To17,
        AgeGroup::Age18To49,
        AgeGroup::Age50To64,
        AgeGroup::Age65Plus,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Vaccination and booster thresholds apply to ages 5 and older.
    pub fn vaccine_eligible(self) -> bool {
        self != AgeGroup::Age0To4
    }

    pub fn working_age(self) -> bool {
        matches!(self, AgeGroup::Age18To49 | AgeGroup::Age50To64)
    }

    pub fn is_adult(self) -> bool {
        matches!(
            self,
            AgeGroup::Age18To49 | AgeGroup::Age50To64 | AgeGroup::Age65Plus
        )
    }
}

// Approximate US metro age structure.
const AGE_WEIGHTS: [f64; 5] = [0.06, 0.16, 0.42, 0.19, 0.17];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VenueKind {
    School,
    Workplace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SviDistribution {
    Uniform,
    /// Relative tract counts per SVI bin; SVI is uniform inside the chosen bin.
    EmpiricalWeights {
        weights: [f64; N_SVI_BINS],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationConfig {
    pub n_agents: usize,
    pub n_tracts: usize,
    pub mean_household_size: f64,
    pub school_size: usize,
    pub workplace_size: usize,
    pub svi_distribution: SviDistribution,
    /// Baseline individual adherence entering the quarantine-probability formula.
    pub quarantine_adherence: f64,
    /// Share of working-age agents holding a workplace.
    pub work_participation: f64,
    pub seed: u64,
}

impl Default for PopulationConfig {
    fn default() -> Self {
        Self {
            n_agents: 20_000,
            n_tracts: 40,
            mean_household_size: 2.5,
            school_size: 25,
            workplace_size: 15,
            svi_distribution: SviDistribution::Uniform,
            quarantine_adherence: 0.8,
            work_participation: 0.6,
            seed: 7,
        }
    }
}

impl PopulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_tracts < N_SVI_BINS {
            return Err(Error::InvalidConfig(format!(
                "n_tracts = {} but at least {N_SVI_BINS} tracts are needed to populate every SVI bin",
                self.n_tracts
            )));
        }
        if self.n_agents < self.n_tracts {
            return Err(Error::InvalidConfig(format!(
                "n_agents ({}) must be at least n_tracts ({})",
                self.n_agents, self.n_tracts
            )));
        }
        if self.school_size < 1 || self.workplace_size < 1 {
            return Err(Error::InvalidConfig("venue sizes must be >= 1".into()));
        }
        if !(self.mean_household_size >= 1.0) {
            return Err(Error::InvalidConfig(
                "mean_household_size must be >= 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.quarantine_adherence)
            || !(0.0..=1.0).contains(&self.work_participation)
        {
            return Err(Error::InvalidConfig(
                "quarantine_adherence and work_participation must lie in [0, 1]".into(),
            ));
        }
        if let SviDistribution::EmpiricalWeights { weights } = &self.svi_distribution {
            if weights.iter().any(|w| !(*w >= 0.0)) || weights.iter().sum::<f64>() <= 0.0 {
                return Err(Error::InvalidConfig(
                    "SVI bin weights must be non-negative".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tract {
    pub id: usize,
    pub svi: f64,
    pub agent_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Venue {
    pub id: usize,
    pub kind: VenueKind,
    /// Home tract for schools; workplaces draw from every tract.
    pub tract: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    pub id: usize,
    pub age_group: AgeGroup,
    pub home_tract: usize,
    pub household: usize,
    pub venue: Option<usize>,
    pub quarantine_prob: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PopulationFile {
    schema_version: u32,
    config: PopulationConfig,
    seed: u64,
    tracts: Vec<Tract>,
    venues: Vec<Venue>,
    agents: Vec<Agent>,
}

/// Immutable population plus membership indexes.
#[derive(Debug, Clone)]
pub struct Population {
    config: PopulationConfig,
    tracts: Vec<Tract>,
    venues: Vec<Venue>,
    agents: Vec<Agent>,
    households: Vec<Vec<u32>>,
    venue_members: Vec<Vec<u32>>,
    tract_members: Vec<Vec<u32>>,
    bin_of_agent: Vec<u8>,
}

impl PartialEq for Population {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config
            && self.tracts == other.tracts
            && self.venues == other.venues
            && self.agents == other.agents
    }
}

impl Population {
    pub fn generate(config: &PopulationConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let k = config.n_tracts;
        let n = config.n_agents;

        let sizes = tract_sizes(n, k, &mut rng);
        let svis = tract_svis(k, &config.svi_distribution, &mut rng);
        let tracts: Vec<Tract> = (0..k)
            .map(|id| Tract {
                id,
                svi: svis[id],
                agent_count: sizes[id],
            })
            .collect();

        let hh_extra = Poisson::new((config.mean_household_size - 1.0).max(1e-9))
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
        let mut agents = Vec::with_capacity(n);
        let mut n_households = 0usize;
        for tract in &tracts {
            let mut remaining = tract.agent_count;
            while remaining > 0 {
                let extra = if config.mean_household_size > 1.0 {
                    hh_extra.sample(&mut rng) as usize
                } else {
                    0
                };
                let size = (1 + extra).min(8).min(remaining);
                let hh = n_households;
                n_households += 1;
                for member in 0..size {
                    let age_group = if member == 0 {
                        sample_adult_age(&mut rng)
                    } else {
                        sample_age(&mut rng)
                    };
                    agents.push(Agent {
                        id: agents.len(),
                        age_group,
                        home_tract: tract.id,
                        household: hh,
                        venue: None,
                        quarantine_prob: quarantine_probability(
                            config.quarantine_adherence,
                            tract.svi,
                        ),
                    });
                }
                remaining -= size;
            }
        }

        let mut venues = Vec::new();
        // Schools: school-age agents grouped within their home tract.
        for tract in &tracts {
            let mut kids: Vec<usize> = agents
                .iter()
                .filter(|a| a.home_tract == tract.id && a.age_group == AgeGroup::Age5To17)
                .map(|a| a.id)
                .collect();
            kids.shuffle(&mut rng);
            for chunk in kids.chunks(config.school_size) {
                let id = venues.len();
                venues.push(Venue {
                    id,
                    kind: VenueKind::School,
                    tract: Some(tract.id),
                });
                for &a in chunk {
                    agents[a].venue = Some(id);
                }
            }
        }
        // Workplaces: a share of working-age agents, mixed across tracts.
        let mut workers: Vec<usize> = agents
            .iter()
            .filter(|a| a.age_group.working_age())
            .map(|a| a.id)
            .collect();
        workers.retain(|_| rng.random::<f64>() < config.work_participation);
        workers.shuffle(&mut rng);
        for chunk in workers.chunks(config.workplace_size) {
            let id = venues.len();
            venues.push(Venue {
                id,
                kind: VenueKind::Workplace,
                tract: None,
            });
            for &a in chunk {
                agents[a].venue = Some(id);
            }
        }

        Ok(Self::from_parts(config.clone(), tracts, venues, agents))
    }

    fn from_parts(
        config: PopulationConfig,
        tracts: Vec<Tract>,
        venues: Vec<Venue>,
        agents: Vec<Agent>,
    ) -> Self {
        let n_households = agents.iter().map(|a| a.household + 1).max().unwrap_or(0);
        let mut households = vec![Vec::new(); n_households];
        let mut venue_members = vec![Vec::new(); venues.len()];
        let mut tract_members = vec![Vec::new(); tracts.len()];
        let mut bin_of_agent = Vec::with_capacity(agents.len());
        for a in &agents {
            households[a.household].push(a.id as u32);
            if let Some(v) = a.venue {
                venue_members[v].push(a.id as u32);
            }
            tract_members[a.home_tract].push(a.id as u32);
            bin_of_agent.push(svi_bin(tracts[a.home_tract].svi) as u8);
        }
        Self {
            config,
            tracts,
            venues,
            agents,
            households,
            venue_members,
            tract_members,
            bin_of_agent,
        }
    }

    fn check(&self) -> Result<()> {
        let n = self.agents.len();
        for (i, a) in self.agents.iter().enumerate() {
            if a.id != i {
                return Err(Error::InvalidConfig(format!("agent ids not dense at {i}")));
            }
            if a.home_tract >= self.tracts.len() {
                return Err(Error::InvalidConfig(format!("agent {i} has unknown tract")));
            }
            if a.venue.is_some_and(|v| v >= self.venues.len()) {
                return Err(Error::InvalidConfig(format!("agent {i} has unknown venue")));
            }
        }
        for (i, t) in self.tracts.iter().enumerate() {
            if t.id != i || !(0.0..=1.0).contains(&t.svi) {
                return Err(Error::InvalidConfig(format!("tract {i} malformed")));
            }
        }
        let total: usize = self.tracts.iter().map(|t| t.agent_count).sum();
        if total != n {
            return Err(Error::InvalidConfig(format!(
                "tract agent counts sum to {total}, expected {n}"
            )));
        }
        Ok(())
    }

    pub fn config(&self) -> &PopulationConfig {
        &self.config
    }

    pub fn tracts(&self) -> &[Tract] {
        &self.tracts
    }

    pub fn venues(&self) -> &[Venue] {
        &self.venues
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    pub fn household_members(&self, household: usize) -> &[u32] {
        &self.households[household]
    }

    pub fn venue_members(&self, venue: usize) -> &[u32] {
        &self.venue_members[venue]
    }

    pub fn tract_members(&self, tract: usize) -> &[u32] {
        &self.tract_members[tract]
    }

    pub fn n_households(&self) -> usize {
        self.households.len()
    }

    pub fn svi_bin_of(&self, agent: usize) -> usize {
        self.bin_of_agent[agent] as usize
    }

    pub fn agents_per_svi_bin(&self) -> [usize; N_SVI_BINS] {
        let mut c = [0; N_SVI_BINS];
        for &b in &self.bin_of_agent {
            c[b as usize] += 1;
        }
        c
    }

    /// Household and venue contacts of `agent`, excluding the agent itself.
    /// Household members come first, then venue members, each in id order.
    pub fn close_contacts(&self, agent: usize) -> impl Iterator<Item = usize> + '_ {
        let a = &self.agents[agent];
        let hh = self.households[a.household].iter();
        let venue: &[u32] = match a.venue {
            Some(v) => &self.venue_members[v],
            None => &[],
        };
        hh.chain(venue.iter())
            .map(|&x| x as usize)
            .filter(move |&x| x != agent)
    }

    /// Same population with every agent's quarantine probability recomputed
    /// for a different baseline adherence.
    pub fn with_quarantine_adherence(&self, adherence: f64) -> Self {
        let mut out = self.clone();
        out.config.quarantine_adherence = adherence;
        for a in &mut out.agents {
            a.quarantine_prob = quarantine_probability(adherence, out.tracts[a.home_tract].svi);
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        let file = PopulationFile {
            schema_version: POPULATION_SCHEMA_VERSION,
            seed: self.config.seed,
            config: self.config.clone(),
            tracts: self.tracts.clone(),
            venues: self.venues.clone(),
            agents: self.agents.clone(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: PopulationFile = serde_json::from_str(s)?;
        if file.schema_version != POPULATION_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                found: file.schema_version,
                supported: POPULATION_SCHEMA_VERSION,
            });
        }
        let pop = Self::from_parts(file.config, file.tracts, file.venues, file.agents);
        pop.check()?;
        Ok(pop)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::store::write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::MissingFile(path.to_path_buf())
            } else {
                Error::io(path, e)
            }
        })?;
        Self::from_json(&s)
    }

    /// SHA-256 of the canonical JSON serialization.
    pub fn content_hash(&self) -> String {
        let json = self.to_json().expect("population serializes");
        hex_digest(json.as_bytes())
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Tract sizes within ±15% of `n / k` before rounding. Perturbations come in
/// mirrored pairs so they cancel exactly.
fn tract_sizes(n: usize, k: usize, rng: &mut impl Rng) -> Vec<usize> {
    let base = n as f64 / k as f64;
    let mut w = vec![1.0; k];
    if base >= 5.0 {
        let mut i = 0;
        while i + 1 < k {
            let d = rng.random_range(-0.15..0.15);
            w[i] = 1.0 + d;
            w[i + 1] = 1.0 - d;
            i += 2;
        }
        w.shuffle(rng);
    }
    apportion(n, &w)
}

/// Largest-remainder apportionment of `n` proportional to `weights`.
pub(crate) fn apportion(n: usize, weights: &[f64]) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    let quotas: Vec<f64> = weights.iter().map(|w| n as f64 * w / total).collect();
    let mut out: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = out.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(n - assigned) {
        out[i] += 1;
    }
    out
}

/// One tract is forced into each SVI bin; the rest follow the configured
/// distribution. Values are shuffled across tract ids.
fn tract_svis(k: usize, dist: &SviDistribution, rng: &mut impl Rng) -> Vec<f64> {
    let mut out = Vec::with_capacity(k);
    for b in 0..N_SVI_BINS {
        out.push(svi_in_bin(b, rng));
    }
    for _ in N_SVI_BINS..k {
        let v = match dist {
            SviDistribution::Uniform => rng.random::<f64>(),
            SviDistribution::EmpiricalWeights { weights } => {
                let total: f64 = weights.iter().sum();
                let mut u = rng.random::<f64>() * total;
                let mut bin = N_SVI_BINS - 1;
                for (i, w) in weights.iter().enumerate() {
                    if u < *w {
                        bin = i;
                        break;
                    }
                    u -= w;
                }
                svi_in_bin(bin, rng)
            }
        };
        out.push(v);
    }
    out.shuffle(rng);
    out
}

fn svi_in_bin(bin: usize, rng: &mut impl Rng) -> f64 {
    let lo = bin as f64 * 0.25;
    lo + 0.25 * rng.random::<f64>()
}

fn sample_age(rng: &mut impl Rng) -> AgeGroup {
    let mut u = rng.random::<f64>();
    for (g, w) in AgeGroup::ALL.iter().zip(AGE_WEIGHTS) {
        if u < w {
            return *g;
        }
        u -= w;
    }
    AgeGroup::Age65Plus
}

fn sample_adult_age(rng: &mut impl Rng) -> AgeGroup {
    let adult_total: f64 = AGE_WEIGHTS[2..].iter().sum();
    let mut u = rng.random::<f64>() * adult_total;
    for (g, w) in AgeGroup::ALL[2..].iter().zip(&AGE_WEIGHTS[2..]) {
        if u < *w {
            return *g;
        }
        u -= w;
    }
    AgeGroup::Age65Plus
}

//! Command-line pipeline and HTTP service over `landscape-core`.

pub mod commands;
pub mod service;

use std::collections::BTreeMap;
use std::path::Path;

use landscape_core::explorer::{
    average_intensity, binomial, fraction_meeting_goal, rank_smallest_meeting_goal,
    AverageIntensity, CandidateSet, GoalSpec,
};
use landscape_core::policy::policy_index;
use landscape_core::store::{load_study, BaselineSummary};
use landscape_core::{
    Emulator, Error, Outcome, PolicyVector, Prediction, Result, N_POLICIES, POLICY_SPECS,
};
use serde::{Deserialize, Serialize};

/// Default cap on predictions per search request.
pub const DEFAULT_SAMPLE_CAP: usize = 500_000;

/// Builds a policy from baseline plus `name → value` overrides in natural
/// units. Integer-valued levers are rounded, then every field is range-checked.
pub fn policy_from_map(values: &BTreeMap<String, f64>) -> Result<PolicyVector> {
    let mut pv = PolicyVector::baseline();
    for (k, v) in values {
        pv.set(k, *v)?;
    }
    let pv = canonical(pv);
    pv.validate()?;
    Ok(pv)
}

/// Rounds integer-valued levers and leaves the rest untouched.
pub fn canonical(pv: PolicyVector) -> PolicyVector {
    let mut a = pv.to_array();
    for (v, s) in a.iter_mut().zip(POLICY_SPECS.iter()) {
        if s.integer {
            *v = v.round();
        }
    }
    PolicyVector::from_array(a)
}

/// Parses `name=value[,name=value...]`.
pub fn parse_assignments(s: &str) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::InvalidConfig(format!("expected name=value, got `{part}`")))?;
        let k = k.trim();
        if policy_index(k).is_none() {
            return Err(Error::InvalidConfig(format!("unknown policy `{k}`")));
        }
        let v: f64 =
            v.trim().replace('_', "").parse().map_err(|_| {
                Error::InvalidConfig(format!("`{k}` needs a numeric value, got `{v}`"))
            })?;
        out.insert(k.to_string(), v);
    }
    Ok(out)
}

/// A policy given as a JSON file (`{"pcr_mult": 2, ...}`) or inline assignments.
pub fn read_policy_arg(arg: &str) -> Result<PolicyVector> {
    let path = Path::new(arg);
    if path.is_file() {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        let map: BTreeMap<String, f64> = serde_json::from_str(&text)?;
        policy_from_map(&map)
    } else {
        policy_from_map(&parse_assignments(arg)?)
    }
}

/// Builds a goal from a threshold and `name=bound` constraints in natural units.
pub fn goal_from_parts(
    threshold: f64,
    constraints: &BTreeMap<String, f64>,
    strict: bool,
) -> Result<GoalSpec> {
    if !(threshold.is_finite() && threshold > 0.0) {
        return Err(Error::InvalidConfig(
            "goal attack rate must be a positive number".into(),
        ));
    }
    let mut goal = GoalSpec::new(Outcome::CumulativeInfections, threshold);
    goal.strict = strict;
    for (k, v) in constraints {
        goal = goal.constrain(k, *v, false)?;
    }
    Ok(goal)
}

/// Reads a baseline from a study directory or a saved summary JSON.
pub fn load_baseline(path: &Path) -> Result<BaselineSummary> {
    if path.is_dir() {
        BaselineSummary::from_study(&load_study(path)?)
    } else {
        let text = std::fs::read_to_string(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::MissingFile(path.to_path_buf())
            } else {
                Error::InvalidConfig(format!("{}: {e}", path.display()))
            }
        })?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyEcho {
    pub natural: BTreeMap<String, f64>,
    pub normalized: BTreeMap<String, f64>,
}

impl PolicyEcho {
    pub fn new(pv: &PolicyVector) -> Self {
        let a = pv.to_array();
        let x = pv.normalize();
        let names = POLICY_SPECS.iter().map(|s| s.name.to_string());
        Self {
            natural: names.clone().zip(a).collect(),
            normalized: names.zip(x).collect(),
        }
    }
}

/// Emulated outcomes for one policy. Infections are reported both as an
/// attack rate and as counts for the training population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictReport {
    pub policy: PolicyEcho,
    pub n_agents: usize,
    pub cumulative_infections: Prediction,
    pub attack_rate: Prediction,
    pub svi_variance: Prediction,
}

pub fn predict_report(em: &Emulator, pv: &PolicyVector) -> Result<PredictReport> {
    let pv = canonical(*pv);
    pv.validate()?;
    let e = em.predict(&pv.normalize())?;
    Ok(PredictReport {
        policy: PolicyEcho::new(&pv),
        n_agents: em.n_agents,
        cumulative_infections: e.cumulative_infections.scaled(em.n_agents as f64),
        attack_rate: e.cumulative_infections,
        svi_variance: e.svi_variance,
    })
}

fn default_count() -> usize {
    10
}

fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchRequest {
    pub k: usize,
    pub n_per_combo: usize,
    /// Goal on the emulated attack rate (infections ÷ agents).
    #[serde(default)]
    pub goal_attack_rate: Option<f64>,
    /// Goal as a fraction of baseline mean infections; needs a baseline.
    #[serde(default)]
    pub goal_fraction_of_baseline: Option<f64>,
    /// Upper bounds in natural units.
    #[serde(default)]
    pub constraints: BTreeMap<String, f64>,
    #[serde(default)]
    pub strict: bool,
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Winner {
    pub rank: usize,
    pub row_id: usize,
    pub intensity: f64,
    pub policy: PolicyEcho,
    pub attack_rate: Prediction,
    pub cumulative_infections: Prediction,
    pub svi_variance: Prediction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResponse {
    pub k: usize,
    pub sampled: usize,
    pub goal_attack_rate: f64,
    pub qualifying: usize,
    pub fraction_meeting_goal: f64,
    pub average_intensity: AverageIntensity,
    pub winners: Vec<Winner>,
    pub warning: Option<String>,
}

/// Errors that distinguish an oversized request from an invalid one.
#[derive(Debug)]
pub enum SearchError {
    TooLarge { requested: usize, cap: usize },
    Invalid(Error),
}

impl From<Error> for SearchError {
    fn from(e: Error) -> Self {
        SearchError::Invalid(e)
    }
}

impl std::fmt::Display for SearchError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SearchError::TooLarge { requested, cap } => {
                write!(
                    f,
                    "search would evaluate {requested} candidates; the limit is {cap}"
                )
            }
            SearchError::Invalid(e) => write!(f, "{e}"),
        }
    }
}

impl SearchRequest {
    pub fn goal(&self, baseline: Option<&BaselineSummary>) -> Result<GoalSpec> {
        let threshold = match (self.goal_attack_rate, self.goal_fraction_of_baseline) {
            (Some(g), None) => g,
            (None, Some(f)) => {
                let b = baseline.ok_or_else(|| Error::Unfitted("baseline".into()))?;
                f * b.attack_rate_mean
            }
            _ => {
                return Err(Error::InvalidConfig(
                    "give exactly one of goal_attack_rate and goal_fraction_of_baseline".into(),
                ))
            }
        };
        goal_from_parts(threshold, &self.constraints, self.strict)
    }

    pub fn sample_size(&self) -> Result<usize> {
        if !(1..=N_POLICIES).contains(&self.k) {
            return Err(Error::KOutOfRange(self.k));
        }
        binomial(N_POLICIES, self.k)
            .checked_mul(self.n_per_combo)
            .ok_or_else(|| Error::InvalidConfig("sample size overflows".into()))
    }
}

/// Samples, filters and ranks; the whole pipeline behind `explore`+`rank`
/// and `POST /search`. Deterministic for a given request.
pub fn run_search(
    em: &Emulator,
    req: &SearchRequest,
    baseline: Option<&BaselineSummary>,
    cap: usize,
) -> std::result::Result<(SearchResponse, CandidateSet, GoalSpec), SearchError> {
    let goal = req.goal(baseline)?;
    let size = req.sample_size()?;
    if size > cap {
        return Err(SearchError::TooLarge {
            requested: size,
            cap,
        });
    }
    if req.n_per_combo == 0 {
        return Err(Error::Empty("n_per_combo must be at least 1".into()).into());
    }
    let cands = CandidateSet::sample(em, req.k, req.n_per_combo, req.seed)?;
    let fraction = fraction_meeting_goal(&cands, &goal)?;
    let avg = average_intensity(&cands, &goal)?;
    let ranking = rank_smallest_meeting_goal(&cands, &goal, req.count)?;
    let winners = ranking
        .winners
        .iter()
        .enumerate()
        .map(|(i, w)| Winner {
            rank: i + 1,
            row_id: w.row_id,
            intensity: w.intensity,
            policy: PolicyEcho::new(&w.policy),
            attack_rate: w.prediction.cumulative_infections,
            cumulative_infections: w
                .prediction
                .cumulative_infections
                .scaled(em.n_agents as f64),
            svi_variance: w.prediction.svi_variance,
        })
        .collect();
    Ok((
        SearchResponse {
            k: req.k,
            sampled: cands.len(),
            goal_attack_rate: goal.threshold,
            qualifying: ranking.qualifying,
            fraction_meeting_goal: fraction,
            average_intensity: avg,
            winners,
            warning: ranking.warning,
        },
        cands,
        goal,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn assignments_parse() {
        let m = parse_assignments("ct_capacity=33_000, mask_adherence=0.1").unwrap();
        assert_eq!(m["ct_capacity"], 33_000.0);
        assert_eq!(m["mask_adherence"], 0.1);
        assert!(parse_assignments("bogus=1").is_err());
        assert!(parse_assignments("pcr_mult").is_err());
        assert!(parse_assignments("pcr_mult=x").is_err());
    }

    #[test]
    fn out_of_range_names_field_and_range() {
        let err = policy_from_map(&parse_assignments("pcr_mult=11").unwrap()).unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("pcr_mult") && msg.contains("1x - 10x"),
            "{msg}"
        );
    }

    #[test]
    fn integer_levers_round() {
        let pv = policy_from_map(&parse_assignments("mask_duration_ct=6.6").unwrap()).unwrap();
        assert_eq!(pv.mask_duration_ct, 7.0);
    }

    #[test]
    fn paper_constraints_map_to_half() {
        let m = parse_assignments("ct_capacity=33000,mask_adherence=0.1").unwrap();
        let g = goal_from_parts(0.2083, &m, false).unwrap();
        assert!(g.constraints.iter().all(|&(_, b)| (b - 0.5).abs() < 1e-12));
        assert!(
            goal_from_parts(0.2, &parse_assignments("ct_capacity=1000").unwrap(), false).is_err()
        );
    }
}

//! Emulator-driven search of the policy landscape: sample mixtures with `k`
//! active levers, keep those whose emulated outcome meets a goal, and rank
//! the survivors by intensity.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::abm::{run_replicates, DiseaseParams};
use crate::design::{lhs_with_rng, DesignMatrix};
use crate::emulator::{EmulatedOutcomes, Emulator, Outcome, Prediction};
use crate::error::{Error, Result};
use crate::policy::{policy_index, PolicyVector, N_POLICIES, POLICY_SPECS};
use crate::population::Population;
use crate::stats;
use crate::store::{csv_err, csv_msg, parse_record, read_text, write_atomic};

/// All size-`k` subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut c: Vec<usize> = (0..k).collect();
    loop {
        out.push(c.clone());
        let Some(i) = (0..k).rev().find(|&i| c[i] != i + n - k) else {
            return out;
        };
        c[i] += 1;
        for j in i + 1..k {
            c[j] = c[j - 1] + 1;
        }
    }
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k.min(n - k)).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// Σ p_i² over normalized coordinates.
pub fn intensity_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Mean normalized intensity of the levers set in `active` (bit j = lever j).
pub fn mean_active_intensity(x: &[f64], active: u16) -> Result<f64> {
    let idx: Vec<usize> = (0..x.len()).filter(|&j| active & (1 << j) != 0).collect();
    if idx.is_empty() {
        return Err(Error::Empty("active policy mask".into()));
    }
    Ok(idx.iter().map(|&j| x[j]).sum::<f64>() / idx.len() as f64)
}

fn mask_of(combo: &[usize]) -> u16 {
    combo.iter().fold(0, |m, &j| m | (1 << j))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalSpec {
    pub outcome: Outcome,
    /// Met when the emulated value is ≤ this; attack-rate units for infections.
    pub threshold: f64,
    /// Normalized upper bounds, `(policy index, bound)`.
    pub constraints: Vec<(usize, f64)>,
    /// Require the upper end of the 90% interval, not the mean, to meet the threshold.
    pub strict: bool,
}

impl GoalSpec {
    pub fn new(outcome: Outcome, threshold: f64) -> Self {
        Self {
            outcome,
            threshold,
            constraints: Vec::new(),
            strict: false,
        }
    }

    /// Adds a bound given as `name=value` in the policy's natural units, or
    /// as a normalized value when `normalized` is set.
    pub fn constrain(mut self, policy: &str, bound: f64, normalized: bool) -> Result<Self> {
        let j = policy_index(policy)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown policy `{policy}`")))?;
        let b = if normalized {
            bound
        } else {
            POLICY_SPECS[j].normalize(bound)
        };
        if !(0.0..=1.0).contains(&b) {
            return Err(Error::InvalidConfig(format!(
                "constraint on `{policy}` must lie within its range {}",
                POLICY_SPECS[j].range
            )));
        }
        self.constraints.push((j, b));
        Ok(self)
    }

    /// The desk-scale analogue of "fewer than 33,000 contacts traced per day
    /// and mask adherence below 0.1": both levers at most half their range.
    pub fn with_default_constraints(self) -> Self {
        let mut s = self;
        s.constraints
            .push((policy_index("ct_capacity").expect("known"), 0.5));
        s.constraints
            .push((policy_index("mask_adherence").expect("known"), 0.5));
        s
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold.is_finite() || self.threshold == f64::INFINITY) {
            return Err(Error::InvalidConfig(
                "goal threshold must be a number".into(),
            ));
        }
        for &(j, b) in &self.constraints {
            if j >= N_POLICIES || !(0.0..=1.0).contains(&b) {
                return Err(Error::InvalidConfig(
                    "constraints must be normalized bounds within [0, 1]".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn satisfied_by(&self, x: &[f64], pred: &EmulatedOutcomes) -> bool {
        self.meets(x, pred.get(self.outcome))
    }

    /// As [`GoalSpec::satisfied_by`], given only the goal outcome's prediction.
    pub fn meets(&self, x: &[f64], p: &Prediction) -> bool {
        let v = if self.strict { p.hi90 } else { p.mean };
        v <= self.threshold && self.constraints.iter().all(|&(j, b)| x[j] <= b + 1e-12)
    }
}

/// Candidate mixtures in the unit cube with their emulated outcomes.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    /// Stable ids used for tie-breaking; `0..n` for a fresh sample.
    pub row_ids: Vec<usize>,
    pub design: DesignMatrix,
    pub active: Vec<u16>,
    pub predictions: Vec<EmulatedOutcomes>,
}

/// For each of the C(10, k) lever subsets, an independent k-dimensional LHS of
/// `n_per_combo` points with the other levers at baseline.
pub fn sample_k_active(
    k: usize,
    n_per_combo: usize,
    seed: u64,
) -> Result<(DesignMatrix, Vec<u16>)> {
    if !(1..=N_POLICIES).contains(&k) {
        return Err(Error::KOutOfRange(k));
    }
    let combos = combinations(N_POLICIES, k);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = combos.len() * n_per_combo;
    let mut rows = Vec::with_capacity(total);
    let mut active = Vec::with_capacity(total);
    for c in &combos {
        let sub = lhs_with_rng(n_per_combo, k, &mut rng);
        let mask = mask_of(c);
        for r in sub.rows() {
            let mut x = vec![0.0; N_POLICIES];
            for (v, &j) in r.iter().zip(c) {
                x[j] = *v;
            }
            rows.push(x);
            active.push(mask);
        }
    }
    Ok((DesignMatrix::from_rows(&rows)?, active))
}

impl CandidateSet {
    pub fn sample(emulator: &Emulator, k: usize, n_per_combo: usize, seed: u64) -> Result<Self> {
        let (design, active) = sample_k_active(k, n_per_combo, seed)?;
        Self::evaluate(emulator, design, active)
    }

    pub fn evaluate(emulator: &Emulator, design: DesignMatrix, active: Vec<u16>) -> Result<Self> {
        let predictions = emulator.predict_batch(design.values())?;
        Ok(Self {
            row_ids: (0..design.n()).collect(),
            design,
            active,
            predictions,
        })
    }

    pub fn len(&self) -> usize {
        self.design.n()
    }

    pub fn is_empty(&self) -> bool {
        self.design.n() == 0
    }

    pub fn meets_goal(&self, goal: &GoalSpec) -> Vec<bool> {
        (0..self.len())
            .into_par_iter()
            .map(|i| goal.satisfied_by(self.design.row(i), &self.predictions[i]))
            .collect()
    }
}

pub fn fraction_meeting_goal(cands: &CandidateSet, goal: &GoalSpec) -> Result<f64> {
    if cands.is_empty() {
        return Err(Error::Empty("candidate set".into()));
    }
    goal.validate()?;
    let hits = cands.meets_goal(goal).iter().filter(|&&m| m).count();
    Ok(hits as f64 / cands.len() as f64)
}

/// Average active-lever intensity, over every sampled row and over only the
/// rows meeting the goal (`None` when no row does).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AverageIntensity {
    pub over_all: f64,
    pub over_qualifying: Option<f64>,
}

pub fn average_intensity(cands: &CandidateSet, goal: &GoalSpec) -> Result<AverageIntensity> {
    if cands.is_empty() {
        return Err(Error::Empty("candidate set".into()));
    }
    let meets = cands.meets_goal(goal);
    let mut all = 0.0;
    let mut q = 0.0;
    let mut nq = 0usize;
    for i in 0..cands.len() {
        let v = mean_active_intensity(cands.design.row(i), cands.active[i])?;
        all += v;
        if meets[i] {
            q += v;
            nq += 1;
        }
    }
    Ok(AverageIntensity {
        over_all: all / cands.len() as f64,
        over_qualifying: (nq > 0).then(|| q / nq as f64),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankedCandidate {
    pub row_id: usize,
    pub intensity: f64,
    pub point: Vec<f64>,
    pub policy: PolicyVector,
    pub prediction: EmulatedOutcomes,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Ranking {
    pub winners: Vec<RankedCandidate>,
    pub qualifying: usize,
    /// Set when fewer than the requested number of rows qualify.
    pub warning: Option<String>,
}

/// Qualifying rows ordered by (intensity norm, row id); the first `count`.
pub fn rank_smallest_meeting_goal(
    cands: &CandidateSet,
    goal: &GoalSpec,
    count: usize,
) -> Result<Ranking> {
    goal.validate()?;
    let meets = cands.meets_goal(goal);
    let mut rows: Vec<(f64, usize)> = (0..cands.len())
        .filter(|&i| meets[i])
        .map(|i| (intensity_norm(cands.design.row(i)), i))
        .collect();
    let qualifying = rows.len();
    rows.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then(cands.row_ids[a.1].cmp(&cands.row_ids[b.1]))
    });
    rows.truncate(count);
    let warning = (qualifying < count)
        .then(|| format!("only {qualifying} candidate(s) meet the goal; {count} requested"));
    if let Some(w) = &warning {
        log::warn!("{w}");
    }
    let winners = rows
        .into_iter()
        .map(|(intensity, i)| {
            let point = cands.design.row(i).to_vec();
            RankedCandidate {
                row_id: cands.row_ids[i],
                intensity,
                policy: PolicyVector::from_normalized(&point),
                point,
                prediction: cands.predictions[i],
            }
        })
        .collect();
    Ok(Ranking {
        winners,
        qualifying,
        warning,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationRow {
    pub policy: PolicyVector,
    pub reps: usize,
    pub infections_mean: f64,
    pub infections_sd: f64,
    pub attack_rate_mean: f64,
    pub svi_variance_mean: f64,
    pub svi_variance_sd: f64,
    pub emulated: Option<EmulatedOutcomes>,
}

/// Simulates each policy `reps` times (seeds `base_seed + r`) and, when an
/// emulator is given, pairs the result with its prediction.
pub fn validate_candidates(
    policies: &[PolicyVector],
    pop: &Population,
    disease: &DiseaseParams,
    reps: usize,
    base_seed: u64,
    emulator: Option<&Emulator>,
) -> Result<Vec<ValidationRow>> {
    let mut out = Vec::with_capacity(policies.len());
    for pol in policies {
        let outs = run_replicates(pop, disease, pol, base_seed, reps)?;
        let inf: Vec<f64> = outs
            .iter()
            .map(|o| o.cumulative_infections as f64)
            .collect();
        let svi: Vec<f64> = outs.iter().map(|o| o.svi_variance).collect();
        let emulated = match emulator {
            Some(e) => Some(e.predict(&pol.normalize())?),
            None => None,
        };
        out.push(ValidationRow {
            policy: *pol,
            reps,
            infections_mean: stats::mean(&inf),
            infections_sd: stats::sample_sd(&inf),
            attack_rate_mean: stats::mean(&inf) / pop.len() as f64,
            svi_variance_mean: stats::mean(&svi),
            svi_variance_sd: stats::sample_sd(&svi),
            emulated,
        });
    }
    Ok(out)
}

fn pred_header(prefix: &str) -> [String; 4] {
    ["mean", "sd", "lo90", "hi90"].map(|f| format!("{prefix}_{f}"))
}

fn pred_fields(p: &Prediction) -> [String; 4] {
    [p.mean, p.sd, p.lo90, p.hi90].map(|v| v.to_string())
}

fn csv_bytes(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    w.into_inner()
        .map_err(|e| Error::InvalidConfig(e.to_string()))
}

impl CandidateSet {
    /// Columns: row_id, active (bit mask), the ten normalized levers, both
    /// outcome predictions (infections in attack-rate units), intensity and
    /// whether the row meets `goal`.
    pub fn write_csv(&self, path: &Path, goal: &GoalSpec, qualifying_only: bool) -> Result<usize> {
        let meets = self.meets_goal(goal);
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["row_id".to_string(), "active".to_string()];
        header.extend(POLICY_SPECS.iter().map(|s| s.name.to_string()));
        header.extend(pred_header("attack_rate"));
        header.extend(pred_header("svi_variance"));
        header.extend(["intensity".to_string(), "meets_goal".to_string()]);
        w.write_record(&header).map_err(|e| csv_err(path, e))?;
        let mut written = 0;
        for i in 0..self.len() {
            if qualifying_only && !meets[i] {
                continue;
            }
            let x = self.design.row(i);
            let mut rec = vec![self.row_ids[i].to_string(), self.active[i].to_string()];
            rec.extend(x.iter().map(f64::to_string));
            rec.extend(pred_fields(&self.predictions[i].cumulative_infections));
            rec.extend(pred_fields(&self.predictions[i].svi_variance));
            rec.push(intensity_norm(x).to_string());
            rec.push(u8::from(meets[i]).to_string());
            w.write_record(&rec).map_err(|e| csv_err(path, e))?;
            written += 1;
        }
        write_atomic(path, &csv_bytes(w)?)?;
        Ok(written)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = read_text(path)?;
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let headers = r.headers().map_err(|e| csv_err(path, e))?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| csv_msg(path, 1, format!("missing column `{name}`")))
        };
        let id_col = col("row_id")?;
        let active_col = col("active")?;
        let lever_cols: Vec<usize> = POLICY_SPECS
            .iter()
            .map(|s| col(s.name))
            .collect::<Result<_>>()?;
        let pred_cols = |prefix: &str| -> Result<[usize; 4]> {
            let h = pred_header(prefix);
            Ok([col(&h[0])?, col(&h[1])?, col(&h[2])?, col(&h[3])?])
        };
        let (ac, sc) = (pred_cols("attack_rate")?, pred_cols("svi_variance")?);
        let mut row_ids = Vec::new();
        let mut active = Vec::new();
        let mut rows = Vec::new();
        let mut predictions = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| csv_err(path, e))?;
            let line = rec.position().map_or(0, |p| p.line());
            let v = parse_record(path, line, &rec)?;
            let x: Vec<f64> = lever_cols.iter().map(|&c| v[c]).collect();
            if !crate::policy::is_unit_point(&x) {
                return Err(csv_msg(
                    path,
                    line,
                    "candidate coordinates must lie in [0, 1]",
                ));
            }
            let pred = |c: [usize; 4]| Prediction {
                mean: v[c[0]],
                sd: v[c[1]],
                lo90: v[c[2]],
                hi90: v[c[3]],
            };
            row_ids.push(v[id_col] as usize);
            active.push(v[active_col] as u16);
            rows.push(x);
            predictions.push(EmulatedOutcomes {
                cumulative_infections: pred(ac),
                svi_variance: pred(sc),
            });
        }
        let design = if rows.is_empty() {
            DesignMatrix::new(crate::policy::policy_labels(), &[])?
        } else {
            DesignMatrix::from_rows(&rows)?
        };
        Ok(Self {
            row_ids,
            design,
            active,
            predictions,
        })
    }
}

impl Ranking {
    /// Winners in natural policy units with their predictions.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec![
            "rank".to_string(),
            "row_id".to_string(),
            "intensity".to_string(),
        ];
        header.extend(POLICY_SPECS.iter().map(|s| s.name.to_string()));
        header.extend(pred_header("attack_rate"));
        header.extend(pred_header("svi_variance"));
        w.write_record(&header).map_err(|e| csv_err(path, e))?;
        for (k, c) in self.winners.iter().enumerate() {
            let mut rec = vec![
                (k + 1).to_string(),
                c.row_id.to_string(),
                c.intensity.to_string(),
            ];
            rec.extend(c.policy.to_array().iter().map(f64::to_string));
            rec.extend(pred_fields(&c.prediction.cumulative_infections));
            rec.extend(pred_fields(&c.prediction.svi_variance));
            w.write_record(&rec).map_err(|e| csv_err(path, e))?;
        }
        write_atomic(path, &csv_bytes(w)?)
    }
}

/// Reads policies from any CSV carrying the ten lever columns in natural
/// units (for example a winners file). Every row is range-checked.
pub fn read_policies_csv(path: &Path) -> Result<Vec<PolicyVector>> {
    let text = read_text(path)?;
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let headers = r.headers().map_err(|e| csv_err(path, e))?.clone();
    let cols: Vec<usize> = POLICY_SPECS
        .iter()
        .map(|s| {
            headers
                .iter()
                .position(|h| h.trim() == s.name)
                .ok_or_else(|| csv_msg(path, 1, format!("missing column `{}`", s.name)))
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let v = parse_record(path, line, &rec)?;
        let pol = PolicyVector::from_array(std::array::from_fn(|j| v[cols[j]]));
        pol.validate()
            .map_err(|e| csv_msg(path, line, e.to_string()))?;
        out.push(pol);
    }
    Ok(out)
}

pub fn write_validation_csv(path: &Path, rows: &[ValidationRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = POLICY_SPECS.iter().map(|s| s.name.to_string()).collect();
    header.extend(
        [
            "reps",
            "sim_infections_mean",
            "sim_infections_sd",
            "sim_attack_rate_mean",
            "sim_svi_variance_mean",
            "sim_svi_variance_sd",
        ]
        .map(String::from),
    );
    header.extend(pred_header("emu_attack_rate"));
    header.extend(pred_header("emu_svi_variance"));
    header.extend(["attack_rate_in_interval", "svi_variance_in_interval"].map(String::from));
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for r in rows {
        let mut rec: Vec<String> = r.policy.to_array().iter().map(f64::to_string).collect();
        rec.extend([
            r.reps.to_string(),
            r.infections_mean.to_string(),
            r.infections_sd.to_string(),
            r.attack_rate_mean.to_string(),
            r.svi_variance_mean.to_string(),
            r.svi_variance_sd.to_string(),
        ]);
        match &r.emulated {
            Some(e) => {
                rec.extend(pred_fields(&e.cumulative_infections));
                rec.extend(pred_fields(&e.svi_variance));
                rec.push(
                    u8::from(e.cumulative_infections.contains(r.attack_rate_mean)).to_string(),
                );
                rec.push(u8::from(e.svi_variance.contains(r.svi_variance_mean)).to_string());
            }
            None => rec.extend(std::iter::repeat_n(String::new(), 10)),
        }
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    write_atomic(path, &csv_bytes(w)?)
}

/// Goal attainment for one number of active levers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapeRow {
    pub k: usize,
    pub n_per_combo: usize,
    pub sampled: usize,
    pub fraction_meeting_goal: f64,
    pub average_intensity: AverageIntensity,
}

/// Per-combination sample sizes `base · C(10, k)` for each k, shrunk by a
/// common factor when their total would exceed `cap` predictions.
pub fn landscape_sample_sizes(ks: &[usize], base: usize, cap: usize) -> Vec<usize> {
    let total: usize = ks.iter().map(|&k| base * binomial(N_POLICIES, k)).sum();
    if total <= cap {
        return vec![base; ks.len()];
    }
    let n = (base as f64 * cap as f64 / total as f64).floor() as usize;
    vec![n.max(1); ks.len()]
}

/// Samples `n_per_combo` points per lever subset of size `k`, predicts only
/// the goal outcome, and summarizes goal attainment.
pub fn landscape_row(
    emulator: &Emulator,
    k: usize,
    n_per_combo: usize,
    goal: &GoalSpec,
    seed: u64,
) -> Result<LandscapeRow> {
    goal.validate()?;
    let (design, active) = sample_k_active(k, n_per_combo, seed)?;
    if design.n() == 0 {
        return Err(Error::Empty("candidate set".into()));
    }
    let preds = emulator.predict_outcome_batch(goal.outcome, design.values())?;
    let meets: Vec<bool> = (0..design.n())
        .map(|i| goal.meets(design.row(i), &preds[i]))
        .collect();
    let mut all = 0.0;
    let mut q = 0.0;
    let mut nq = 0usize;
    for i in 0..design.n() {
        let v = mean_active_intensity(design.row(i), active[i])?;
        all += v;
        if meets[i] {
            q += v;
            nq += 1;
        }
    }
    Ok(LandscapeRow {
        k,
        n_per_combo,
        sampled: design.n(),
        fraction_meeting_goal: nq as f64 / design.n() as f64,
        average_intensity: AverageIntensity {
            over_all: all / design.n() as f64,
            over_qualifying: (nq > 0).then(|| q / nq as f64),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomials() {
        assert_eq!(binomial(10, 3), 120);
        assert_eq!(combinations(10, 3).len(), 120);
        assert_eq!(combinations(10, 10), vec![(0..10).collect::<Vec<_>>()]);
        for k in 1..=10 {
            assert_eq!(combinations(10, k).len(), binomial(10, k));
        }
    }

    #[test]
    fn k_active_structure() {
        let (d, active) = sample_k_active(1, 5, 1).unwrap();
        assert_eq!(d.n(), 50);
        for (r, m) in d.rows().zip(&active) {
            assert_eq!(r.iter().filter(|v| **v != 0.0).count(), 1);
            assert_eq!(m.count_ones(), 1);
        }
        assert_eq!(sample_k_active(3, 2, 1).unwrap().0.n(), 240);
        assert!(matches!(
            sample_k_active(0, 5, 1),
            Err(Error::KOutOfRange(0))
        ));
        assert!(matches!(
            sample_k_active(11, 5, 1),
            Err(Error::KOutOfRange(11))
        ));
    }

    #[test]
    fn intensity_examples() {
        assert_eq!(intensity_norm(&[0.0; 10]), 0.0);
        let mut x = [0.0; 10];
        x[3] = 1.0;
        assert_eq!(intensity_norm(&x), 1.0);
        x[3] = 0.5;
        x[7] = 0.5;
        assert_eq!(intensity_norm(&x), 0.5);
    }

    #[test]
    fn mean_active_examples() {
        assert_eq!(mean_active_intensity(&[1.0; 10], 0x3ff).unwrap(), 1.0);
        let mut x = [0.0; 10];
        x[1] = 0.2;
        x[4] = 0.6;
        assert!((mean_active_intensity(&x, (1 << 1) | (1 << 4)).unwrap() - 0.4).abs() < 1e-15);
        x[1] = 0.0;
        x[4] = 0.7;
        assert_eq!(mean_active_intensity(&x, 1 << 4).unwrap(), 0.7);
        assert!(mean_active_intensity(&x, 0).is_err());
    }

    #[test]
    fn constraint_in_natural_units() {
        let g = GoalSpec::new(Outcome::CumulativeInfections, 0.2)
            .constrain("ct_capacity", 33_000.0, false)
            .unwrap();
        assert_eq!(g.constraints, vec![(4, 0.5)]);
        assert!(GoalSpec::new(Outcome::CumulativeInfections, 0.2)
            .constrain("ct_capacity", 70_000.0, false)
            .is_err());
        assert!(GoalSpec::new(Outcome::CumulativeInfections, 0.2)
            .constrain("nonsense", 0.1, true)
            .is_err());
    }
}

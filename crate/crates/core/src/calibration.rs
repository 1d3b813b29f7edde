//! Calibration targets, two-parameter sensitivity surfaces and the
//! index-case reproduction experiment.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::abm::{index_case_secondaries, run_simulation, DiseaseParams, SimOutcome};
use crate::design::lhs_sample;
use crate::emulator::{fit_gp, GpMean, GpModel, MleConfig, Noise, Prediction};
use crate::error::{Error, Result};
use crate::policy::PolicyVector;
use crate::population::Population;
use crate::stats;
use crate::store::{csv_err, csv_msg, parse_record, read_text, write_atomic};

/// Targets read off one completed run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTargets {
    /// Infections per diagnosis, with diagnoses floored at 1.
    pub underreport_ratio: f64,
    /// Set when the run produced no diagnoses and the floor applied.
    pub zero_diagnoses: bool,
    pub daily_diagnoses: Vec<u64>,
    /// Positives ÷ tests per day; `None` on days without tests.
    pub positivity: Vec<Option<f64>>,
}

pub fn compute_targets(outcome: &SimOutcome) -> CalibrationTargets {
    let d = outcome.cumulative_diagnoses;
    let positivity = outcome
        .daily_tests
        .iter()
        .zip(&outcome.daily_positives)
        .map(|(&t, &p)| (t > 0).then(|| p as f64 / t as f64))
        .collect();
    CalibrationTargets {
        underreport_ratio: outcome.cumulative_infections as f64 / d.max(1) as f64,
        zero_diagnoses: d == 0,
        daily_diagnoses: outcome.daily_diagnoses.clone(),
        positivity,
    }
}

/// Targets averaged over replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSummary {
    pub replicates: usize,
    pub ratio_mean: f64,
    pub ratio_sd: f64,
    pub infections_mean: f64,
    pub infections_sd: f64,
    pub diagnoses_mean: f64,
    pub diagnoses_sd: f64,
    pub zero_diagnosis_runs: usize,
    pub daily_diagnoses_mean: Vec<f64>,
    pub daily_tests_mean: Vec<f64>,
    /// Pooled positives ÷ pooled tests per day.
    pub positivity: Vec<Option<f64>>,
}

impl TargetSummary {
    pub fn from_outcomes(outs: &[SimOutcome]) -> Result<Self> {
        if outs.is_empty() {
            return Err(Error::Empty("replicate outcomes".into()));
        }
        let targets: Vec<CalibrationTargets> = outs.iter().map(compute_targets).collect();
        let ratios: Vec<f64> = targets.iter().map(|t| t.underreport_ratio).collect();
        let inf: Vec<f64> = outs
            .iter()
            .map(|o| o.cumulative_infections as f64)
            .collect();
        let diag: Vec<f64> = outs.iter().map(|o| o.cumulative_diagnoses as f64).collect();
        let days = outs[0].daily_diagnoses.len();
        let r = outs.len() as f64;
        let col_mean = |f: &dyn Fn(&SimOutcome) -> &Vec<u64>| -> Vec<f64> {
            (0..days)
                .map(|d| outs.iter().map(|o| f(o)[d] as f64).sum::<f64>() / r)
                .collect()
        };
        let daily_diagnoses_mean = col_mean(&|o| &o.daily_diagnoses);
        let daily_tests_mean = col_mean(&|o| &o.daily_tests);
        let positives_mean = col_mean(&|o| &o.daily_positives);
        let positivity = daily_tests_mean
            .iter()
            .zip(&positives_mean)
            .map(|(&t, &p)| (t > 0.0).then(|| p / t))
            .collect();
        Ok(Self {
            replicates: outs.len(),
            ratio_mean: stats::mean(&ratios),
            ratio_sd: stats::sample_sd(&ratios),
            infections_mean: stats::mean(&inf),
            infections_sd: stats::sample_sd(&inf),
            diagnoses_mean: stats::mean(&diag),
            diagnoses_sd: stats::sample_sd(&diag),
            zero_diagnosis_runs: targets.iter().filter(|t| t.zero_diagnoses).count(),
            daily_diagnoses_mean,
            daily_tests_mean,
            positivity,
        })
    }

    /// One row per day: day, mean diagnoses, mean tests, positivity (blank when undefined).
    pub fn write_curves_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let wrap = |e: csv::Error| csv_err(path, e);
        w.write_record(["day", "diagnoses", "tests", "positivity"])
            .map_err(wrap)?;
        for d in 0..self.daily_diagnoses_mean.len() {
            w.write_record([
                d.to_string(),
                self.daily_diagnoses_mean[d].to_string(),
                self.daily_tests_mean[d].to_string(),
                self.positivity[d].map_or(String::new(), |v| v.to_string()),
            ])
            .map_err(wrap)?;
        }
        write_atomic(
            path,
            &w.into_inner()
                .map_err(|e| Error::InvalidConfig(e.to_string()))?,
        )
    }
}

/// Externally supplied target curves.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedTargets {
    pub day: Vec<usize>,
    pub diagnoses: Vec<f64>,
    pub tests: Vec<f64>,
}

impl ObservedTargets {
    /// Reads a CSV with columns `day, diagnoses, tests`.
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
        let (cd, cg, ct) = (col("day")?, col("diagnoses")?, col("tests")?);
        let mut out = Self {
            day: Vec::new(),
            diagnoses: Vec::new(),
            tests: Vec::new(),
        };
        for rec in r.records() {
            let rec = rec.map_err(|e| csv_err(path, e))?;
            let line = rec.position().map_or(0, |p| p.line());
            let v = parse_record(path, line, &rec)?;
            if v[cd] < 0.0 || v[cd].fract() != 0.0 || v[cg] < 0.0 || v[ct] < 0.0 {
                return Err(csv_msg(
                    path,
                    line,
                    "day must be a non-negative integer and counts non-negative",
                ));
            }
            out.day.push(v[cd] as usize);
            out.diagnoses.push(v[cg]);
            out.tests.push(v[ct]);
        }
        if out.day.is_empty() {
            return Err(Error::Empty(format!("{} has no rows", path.display())));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedComparison {
    /// Days present in both the observed file and the simulation.
    pub days_compared: usize,
    pub diagnoses_rmse: f64,
    /// Over days where both sides have tests.
    pub positivity_rmse: Option<f64>,
}

pub fn compare_to_observed(
    sim: &TargetSummary,
    obs: &ObservedTargets,
) -> Result<ObservedComparison> {
    let mut dsq = Vec::new();
    let mut psq = Vec::new();
    for (k, &d) in obs.day.iter().enumerate() {
        let Some(&sim_d) = sim.daily_diagnoses_mean.get(d) else {
            continue;
        };
        dsq.push((sim_d - obs.diagnoses[k]).powi(2));
        if let (Some(sp), true) = (sim.positivity[d], obs.tests[k] > 0.0) {
            psq.push((sp - obs.diagnoses[k] / obs.tests[k]).powi(2));
        }
    }
    if dsq.is_empty() {
        return Err(Error::Empty(
            "no observed day overlaps the simulated horizon".into(),
        ));
    }
    Ok(ObservedComparison {
        days_compared: dsq.len(),
        diagnoses_rmse: stats::mean(&dsq).sqrt(),
        positivity_rmse: (!psq.is_empty()).then(|| stats::mean(&psq).sqrt()),
    })
}

/// Short names accepted for the sensitivity parameters.
const SENSITIVITY_ALIASES: [(&str, &str); 5] = [
    ("beta", "base_transmission_rate"),
    ("presymp", "presymptomatic_fraction"),
    ("init_mult", "initial_infection_multiplier"),
    ("symp_or", "symptomatic_or"),
    ("q_adherence", "quarantine_adherence"),
];

pub const SENSITIVITY_PARAMS: [&str; 5] = [
    "base_transmission_rate",
    "presymptomatic_fraction",
    "initial_infection_multiplier",
    "symptomatic_or",
    "quarantine_adherence",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityConfig {
    pub pair: (String, String),
    pub lhs_n: usize,
    pub reps: usize,
    pub grid_resolution: usize,
    pub seed: u64,
}

impl SensitivityConfig {
    pub fn new(a: &str, b: &str) -> Self {
        Self {
            pair: (a.to_string(), b.to_string()),
            lhs_n: 500,
            reps: 10,
            grid_resolution: 25,
            seed: 1,
        }
    }

    /// Indices of the pair into [`SENSITIVITY_PARAMS`].
    pub fn validate(&self) -> Result<(usize, usize)> {
        let idx = |name: &str| {
            let name = SENSITIVITY_ALIASES
                .iter()
                .find(|(a, _)| *a == name)
                .map_or(name, |(_, full)| *full);
            SENSITIVITY_PARAMS
                .iter()
                .position(|p| *p == name)
                .ok_or_else(|| {
                    Error::InvalidConfig(format!(
                        "`{name}` is not a sensitivity parameter; choose from {}",
                        SENSITIVITY_PARAMS.join(", ")
                    ))
                })
        };
        let (a, b) = (idx(&self.pair.0)?, idx(&self.pair.1)?);
        if a == b {
            return Err(Error::InvalidConfig(
                "the sensitivity pair must name two different parameters".into(),
            ));
        }
        if self.lhs_n < 2 || self.reps == 0 || self.grid_resolution < 2 {
            return Err(Error::InvalidConfig(
                "need lhs_n >= 2, reps >= 1 and grid >= 2".into(),
            ));
        }
        Ok((a, b))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamRange {
    pub name: &'static str,
    pub lower: f64,
    pub upper: f64,
    pub baseline: f64,
}

impl ParamRange {
    fn at(&self, u: f64) -> f64 {
        self.lower + u * (self.upper - self.lower)
    }

    fn unit(&self, v: f64) -> f64 {
        (v - self.lower) / (self.upper - self.lower)
    }
}

/// Ranges explored for each sensitivity parameter around the given baseline.
/// The symptomatic testing odds ratio cannot go below its policy floor, so its
/// baseline sits at a corner.
pub fn sensitivity_ranges(disease: &DiseaseParams, pop: &Population) -> [ParamRange; 5] {
    let beta = disease.base_transmission_rate;
    let q = pop.config().quarantine_adherence;
    let sor = PolicyVector::baseline().symptomatic_or;
    [
        ParamRange {
            name: SENSITIVITY_PARAMS[0],
            lower: 0.5 * beta,
            upper: 1.5 * beta,
            baseline: beta,
        },
        ParamRange {
            name: SENSITIVITY_PARAMS[1],
            lower: 0.25,
            upper: 1.0,
            baseline: disease.presymptomatic_fraction,
        },
        ParamRange {
            name: SENSITIVITY_PARAMS[2],
            lower: 0.5,
            upper: 2.0,
            baseline: disease.initial_infection_multiplier,
        },
        ParamRange {
            name: SENSITIVITY_PARAMS[3],
            lower: sor,
            upper: 4.0 * sor,
            baseline: sor,
        },
        ParamRange {
            name: SENSITIVITY_PARAMS[4],
            lower: (q - 0.3).max(0.0),
            upper: 1.0,
            baseline: q,
        },
    ]
}

fn simulate_at(
    values: &[f64; 5],
    disease: &DiseaseParams,
    pop: &Population,
    seed: u64,
) -> Result<SimOutcome> {
    let mut d = disease.clone();
    d.base_transmission_rate = values[0];
    d.presymptomatic_fraction = values[1];
    d.initial_infection_multiplier = values[2];
    let mut policy = PolicyVector::baseline();
    policy.symptomatic_or = values[3];
    if values[4] == pop.config().quarantine_adherence {
        run_simulation(pop, &d, &policy, seed)
    } else {
        run_simulation(&pop.with_quarantine_adherence(values[4]), &d, &policy, seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub a: f64,
    pub b: f64,
    pub ratio: Prediction,
    pub infections: Prediction,
    pub diagnoses: Prediction,
    /// The grid point nearest the baseline parameter values.
    pub is_baseline: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensitivitySurface {
    pub param_a: String,
    pub param_b: String,
    pub baseline_a: f64,
    pub baseline_b: f64,
    pub points: Vec<SurfacePoint>,
    /// Emulated outcomes at exactly the baseline values.
    pub baseline: SurfacePoint,
}

impl SensitivitySurface {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let wrap = |e: csv::Error| csv_err(path, e);
        w.write_record([
            self.param_a.as_str(),
            self.param_b.as_str(),
            "ratio_mean",
            "ratio_sd",
            "infections_mean",
            "infections_sd",
            "diagnoses_mean",
            "diagnoses_sd",
            "is_baseline",
        ])
        .map_err(wrap)?;
        for p in &self.points {
            w.write_record([
                p.a.to_string(),
                p.b.to_string(),
                p.ratio.mean.to_string(),
                p.ratio.sd.to_string(),
                p.infections.mean.to_string(),
                p.infections.sd.to_string(),
                p.diagnoses.mean.to_string(),
                p.diagnoses.sd.to_string(),
                u8::from(p.is_baseline).to_string(),
            ])
            .map_err(wrap)?;
        }
        write_atomic(
            path,
            &w.into_inner()
                .map_err(|e| Error::InvalidConfig(e.to_string()))?,
        )
    }
}

/// Runs an LHS over the five calibration parameters, fits a GP per outcome
/// (underreport ratio, infections, diagnoses) on replicate means, and
/// evaluates a grid over the chosen pair with the other three at baseline.
pub fn sensitivity_surface(
    pop: &Population,
    disease: &DiseaseParams,
    cfg: &SensitivityConfig,
    mle: &MleConfig,
) -> Result<SensitivitySurface> {
    let (ia, ib) = cfg.validate()?;
    let ranges = sensitivity_ranges(disease, pop);
    let design = lhs_sample(cfg.lhs_n, 5, cfg.seed);
    let jobs: Vec<(usize, usize)> = (0..cfg.lhs_n)
        .flat_map(|i| (0..cfg.reps).map(move |r| (i, r)))
        .collect();
    log::info!("sensitivity: {} simulations", jobs.len());
    let outs: Vec<SimOutcome> = jobs
        .par_iter()
        .map(|&(i, r)| {
            let u = design.row(i);
            let v: [f64; 5] = std::array::from_fn(|k| ranges[k].at(u[k]));
            simulate_at(
                &v,
                disease,
                pop,
                cfg.seed
                    .wrapping_mul(1_000_003)
                    .wrapping_add((i * cfg.reps + r) as u64),
            )
        })
        .collect::<Result<_>>()?;

    let mut gps: Vec<GpModel> = Vec::with_capacity(3);
    let extract: [fn(&SimOutcome) -> f64; 3] = [
        |o| compute_targets(o).underreport_ratio,
        |o| o.cumulative_infections as f64,
        |o| o.cumulative_diagnoses as f64,
    ];
    let mut mean_noise = [0.0; 3];
    for (k, f) in extract.iter().enumerate() {
        let mut means = Vec::with_capacity(cfg.lhs_n);
        let mut vars = Vec::with_capacity(cfg.lhs_n);
        for i in 0..cfg.lhs_n {
            let ys: Vec<f64> = outs[i * cfg.reps..(i + 1) * cfg.reps]
                .iter()
                .map(f)
                .collect();
            means.push(stats::mean(&ys));
            vars.push(if ys.len() > 1 {
                stats::sample_variance(&ys) / ys.len() as f64
            } else {
                0.0
            });
        }
        let noise = if cfg.reps > 1 {
            let floor = 1e-6 * stats::mean(&vars).max(1e-12);
            Noise::Fixed {
                variances: vars.iter().map(|v| v.max(floor)).collect(),
            }
        } else {
            Noise::Homoskedastic { variance: 0.0 }
        };
        mean_noise[k] = match &noise {
            Noise::Fixed { variances } => stats::mean(variances),
            Noise::Homoskedastic { .. } => 0.0,
        };
        let gp = fit_gp(design.values(), 5, &means, noise, GpMean::Constant, mle)?;
        if let Noise::Homoskedastic { variance } = gp.noise() {
            mean_noise[k] = *variance;
        }
        gps.push(gp);
    }

    let base_u: Vec<f64> = ranges.iter().map(|r| r.unit(r.baseline)).collect();
    let predict_at = |ua: f64, ub: f64| -> [Prediction; 3] {
        let mut x = base_u.clone();
        x[ia] = ua;
        x[ib] = ub;
        std::array::from_fn(|k| {
            let (m, v) = gps[k].predict(&x);
            Prediction::from_mean_var(m, v + mean_noise[k])
        })
    };
    let g = cfg.grid_resolution;
    let step = |i: usize| i as f64 / (g - 1) as f64;
    let nearest = |u: f64| ((u * (g - 1) as f64).round() as usize).min(g - 1);
    let (na, nb) = (nearest(base_u[ia]), nearest(base_u[ib]));
    let points = (0..g * g)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / g, k % g);
            let [ratio, infections, diagnoses] = predict_at(step(i), step(j));
            SurfacePoint {
                a: ranges[ia].at(step(i)),
                b: ranges[ib].at(step(j)),
                ratio,
                infections,
                diagnoses,
                is_baseline: i == na && j == nb,
            }
        })
        .collect();
    let [ratio, infections, diagnoses] = predict_at(base_u[ia], base_u[ib]);
    Ok(SensitivitySurface {
        param_a: ranges[ia].name.to_string(),
        param_b: ranges[ib].name.to_string(),
        baseline_a: ranges[ia].baseline,
        baseline_b: ranges[ib].baseline,
        points,
        baseline: SurfacePoint {
            a: ranges[ia].baseline,
            b: ranges[ib].baseline,
            ratio,
            infections,
            diagnoses,
            is_baseline: true,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct R0Result {
    pub base_transmission_rate: f64,
    pub counts: Vec<u64>,
    pub mean: f64,
    pub variance: f64,
    pub p25: f64,
    pub p75: f64,
}

impl R0Result {
    /// One row per simulation.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let wrap = |e: csv::Error| csv_err(path, e);
        w.write_record(["sim", "secondary_infections"])
            .map_err(wrap)?;
        for (i, c) in self.counts.iter().enumerate() {
            w.write_record([i.to_string(), c.to_string()])
                .map_err(wrap)?;
        }
        write_atomic(
            path,
            &w.into_inner()
                .map_err(|e| Error::InvalidConfig(e.to_string()))?,
        )
    }
}

/// Secondary-infection distribution of single index cases at the given
/// transmission rate. Simulation `i` uses seed `seed + i`.
pub fn r0_experiment(
    pop: &Population,
    disease: &DiseaseParams,
    beta: f64,
    n_sims: usize,
    seed: u64,
) -> Result<R0Result> {
    if n_sims == 0 {
        return Err(Error::InvalidConfig("n_sims must be at least 1".into()));
    }
    let mut d = disease.clone();
    d.base_transmission_rate = beta;
    let counts: Vec<u64> = (0..n_sims)
        .into_par_iter()
        .map(|i| index_case_secondaries(pop, &d, seed.wrapping_add(i as u64)))
        .collect::<Result<_>>()?;
    let xs: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    Ok(R0Result {
        base_transmission_rate: beta,
        mean: stats::mean(&xs),
        variance: if xs.len() > 1 {
            stats::sample_variance(&xs)
        } else {
            0.0
        },
        p25: stats::quantile(&xs, 0.25),
        p75: stats::quantile(&xs, 0.75),
        counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcome(inf: u64, diag: u64, tests: Vec<u64>, pos: Vec<u64>) -> SimOutcome {
        SimOutcome {
            n_agents: 1000,
            initial_infections: 10,
            cumulative_infections: inf,
            cumulative_diagnoses: diag,
            daily_new_infections: vec![0; tests.len()],
            daily_diagnoses: pos.clone(),
            daily_tests: tests,
            daily_positives: pos,
            attack_rate_by_svi: [0.0; 4],
            svi_variance: 0.0,
            vaccinated_fraction: 0.0,
            boosted_fraction: 0.0,
        }
    }

    #[test]
    fn ratio_examples() {
        let t = compute_targets(&outcome(842_356, 225_044, vec![], vec![]));
        assert!((t.underreport_ratio - 3.743).abs() < 1e-3);
        assert!(!t.zero_diagnoses);
        assert_eq!(
            compute_targets(&outcome(500, 500, vec![], vec![])).underreport_ratio,
            1.0
        );
        let z = compute_targets(&outcome(40, 0, vec![], vec![]));
        assert_eq!(z.underreport_ratio, 40.0);
        assert!(z.zero_diagnoses);
    }

    #[test]
    fn positivity_undefined_without_tests() {
        let t = compute_targets(&outcome(10, 2, vec![0, 0, 0], vec![0, 0, 0]));
        assert!(t.positivity.iter().all(Option::is_none));
        let t = compute_targets(&outcome(10, 2, vec![4, 0], vec![1, 0]));
        assert_eq!(t.positivity, vec![Some(0.25), None]);
    }

    #[test]
    fn pair_validation() {
        assert!(
            SensitivityConfig::new("base_transmission_rate", "symptomatic_or")
                .validate()
                .is_ok()
        );
        assert!(SensitivityConfig::new("symptomatic_or", "symptomatic_or")
            .validate()
            .is_err());
        assert_eq!(
            SensitivityConfig::new("beta", "symp_or")
                .validate()
                .unwrap(),
            (0, 3)
        );
        assert!(SensitivityConfig::new("gamma", "symptomatic_or")
            .validate()
            .is_err());
    }
}

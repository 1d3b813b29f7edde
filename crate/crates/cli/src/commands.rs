use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use landscape_core::calibration::{
    compare_to_observed, r0_experiment, sensitivity_surface, ObservedTargets, SensitivityConfig,
    TargetSummary,
};
use landscape_core::design::{default_augmentation, lhs_sample};
use landscape_core::emulator::{write_predictions_csv, MleConfig, TrainingData};
use landscape_core::explorer::{
    average_intensity, fraction_meeting_goal, rank_smallest_meeting_goal, read_policies_csv,
    validate_candidates, write_validation_csv, CandidateSet, GoalSpec,
};
use landscape_core::store::{
    daily_sidecar_path, write_daily_csv, write_study, OutcomeRow, OutcomeTable, RunManifest,
};
use landscape_core::{
    run_replicates, DesignMatrix, DiseaseParams, Emulator, EmulatorConfig, PolicyVector,
    Population, PopulationConfig, SimOutcome,
};
use serde::{Deserialize, Serialize};

use crate::service::{serve, ServiceConfig};
use crate::{
    goal_from_parts, load_baseline, parse_assignments, predict_report, read_policy_arg, run_search,
    SearchRequest,
};

#[derive(Debug, Parser)]
#[command(
    name = "landscape",
    version,
    about = "Simulate, emulate and search intervention policy mixtures"
)]
pub struct Cli {
    /// Log level filter (error, warn, info, debug).
    #[arg(long, global = true, default_value = "info")]
    pub log: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic population.
    Popgen(PopgenArgs),
    /// Run replicated simulations for one policy or every row of a design.
    Simulate(SimulateArgs),
    /// Write a Latin hypercube design over the ten levers.
    Design(DesignArgs),
    /// Fit the emulator to a design and its outcomes.
    Fit(FitArgs),
    /// Emulate outcomes for one policy or a file of policies.
    Predict(PredictArgs),
    /// Sample policy mixtures with k active levers and test them against a goal.
    Explore(ExploreArgs),
    /// Pick the least intensive candidates that meet the goal.
    Rank(RankArgs),
    /// Simulate chosen policies and compare with the emulator.
    Validate(ValidateArgs),
    /// Calibration targets, sensitivity surfaces and the index-case experiment.
    #[command(subcommand)]
    Calibrate(CalibrateCommand),
    /// Serve predictions and searches over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct PopgenArgs {
    #[arg(long, default_value_t = 20_000)]
    pub agents: usize,
    #[arg(long, default_value_t = 40)]
    pub tracts: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DiseaseArg {
    /// Disease parameters as JSON; defaults to the built-in calibration.
    #[arg(long)]
    pub params: Option<PathBuf>,
}

impl DiseaseArg {
    fn load(&self) -> anyhow::Result<DiseaseParams> {
        match &self.params {
            None => Ok(DiseaseParams::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading {}", p.display()))?;
                let d: DiseaseParams = serde_json::from_str(&text)
                    .with_context(|| format!("parsing {}", p.display()))?;
                d.validate()?;
                Ok(d)
            }
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub pop: PathBuf,
    /// JSON file of lever values, or inline `name=value,...`. Omitted levers stay at baseline.
    #[arg(long, conflicts_with = "design")]
    pub policy: Option<String>,
    /// Simulate every row of this design instead of a single policy.
    #[arg(long)]
    pub design: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub reps: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Outcomes CSV; daily series go to a `.daily.csv` sidecar.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write a study directory (design, outcomes, manifest).
    #[arg(long)]
    pub study: Option<PathBuf>,
    #[command(flatten)]
    pub disease: DiseaseArg,
}

#[derive(Debug, Args)]
pub struct DesignArgs {
    #[arg(long, default_value_t = 1500)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Write natural policy units instead of the unit cube.
    #[arg(long)]
    pub scaled: bool,
    /// Append the baseline point and each lever alone at its maximum.
    #[arg(long)]
    pub augment: bool,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long, required_unless_present = "study")]
    pub design: Option<PathBuf>,
    #[arg(long, required_unless_present = "study")]
    pub outcomes: Option<PathBuf>,
    /// Study directory to read instead of separate files.
    #[arg(long, conflicts_with_all = ["design", "outcomes"])]
    pub study: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Likelihood optimizer restarts.
    #[arg(long, default_value_t = 8)]
    pub starts: usize,
    #[arg(long, default_value_t = 20_220_617)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// One policy (JSON file or `name=value,...`); the report is printed as JSON.
    #[arg(long, conflicts_with = "policies")]
    pub policy: Option<String>,
    /// CSV with the ten lever columns in natural units, or a design CSV.
    #[arg(long)]
    pub policies: Option<PathBuf>,
    #[arg(long, requires = "policies")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GoalArgs {
    /// Goal on the emulated attack rate (infections ÷ agents).
    #[arg(long)]
    pub goal_attack_rate: Option<f64>,
    /// Goal as a fraction of the baseline mean; needs --baseline.
    #[arg(long, requires = "baseline", conflicts_with = "goal_attack_rate")]
    pub goal_baseline_fraction: Option<f64>,
    /// Baseline study directory.
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    /// Upper bound `policy=value` in natural units; repeat or comma-separate.
    #[arg(long = "constrain")]
    pub constrain: Vec<String>,
    /// Require the upper 90% bound, not the mean, to meet the goal.
    #[arg(long)]
    pub strict: bool,
}

impl GoalArgs {
    fn is_set(&self) -> bool {
        self.goal_attack_rate.is_some() || self.goal_baseline_fraction.is_some()
    }

    fn constraints(&self) -> anyhow::Result<BTreeMap<String, f64>> {
        let mut m = BTreeMap::new();
        for c in &self.constrain {
            m.extend(parse_assignments(c)?);
        }
        Ok(m)
    }

    fn threshold(&self) -> anyhow::Result<f64> {
        match (
            self.goal_attack_rate,
            self.goal_baseline_fraction,
            &self.baseline,
        ) {
            (Some(g), _, _) => Ok(g),
            (None, Some(f), Some(b)) => Ok(f * load_baseline(b)?.attack_rate_mean),
            _ => bail!("give --goal-attack-rate, or --goal-baseline-fraction with --baseline"),
        }
    }

    fn goal(&self) -> anyhow::Result<GoalSpec> {
        Ok(goal_from_parts(
            self.threshold()?,
            &self.constraints()?,
            self.strict,
        )?)
    }
}

#[derive(Debug, Args)]
pub struct ExploreArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = 5000)]
    pub n_per_combo: usize,
    #[command(flatten)]
    pub goal: GoalArgs,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Refuse to sample more candidates than this.
    #[arg(long, default_value_t = 1_000_000)]
    pub max_predictions: usize,
    /// Write only rows that meet the goal.
    #[arg(long)]
    pub qualifying_only: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[arg(long)]
    pub candidates: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub count: usize,
    /// Overrides the goal recorded by `explore`.
    #[command(flatten)]
    pub goal: GoalArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// CSV with the ten lever columns in natural units (e.g. a winners file).
    #[arg(long)]
    pub policies: PathBuf,
    #[arg(long)]
    pub pop: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub reps: usize,
    #[arg(long, default_value_t = 10_000)]
    pub seed: u64,
    /// Emulator to compare against.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Baseline study; each policy is then checked against the baseline means.
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub disease: DiseaseArg,
}

#[derive(Debug, Subcommand)]
pub enum CalibrateCommand {
    /// Underreporting ratio and daily curves at the baseline policy.
    Targets(TargetsArgs),
    /// Emulated outcome surface over two calibration parameters.
    Surface(SurfaceArgs),
    /// Secondary infections of single index cases.
    R0(R0Args),
}

#[derive(Debug, Args)]
pub struct TargetsArgs {
    #[arg(long)]
    pub pop: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub reps: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// External curves with columns day, diagnoses, tests.
    #[arg(long)]
    pub observed: Option<PathBuf>,
    /// Daily curves CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub disease: DiseaseArg,
}

#[derive(Debug, Args)]
pub struct SurfaceArgs {
    #[arg(long)]
    pub pop: PathBuf,
    /// Two parameters, comma-separated.
    #[arg(long)]
    pub pair: String,
    #[arg(long, default_value_t = 500)]
    pub lhs: usize,
    #[arg(long, default_value_t = 10)]
    pub reps: usize,
    #[arg(long, default_value_t = 25)]
    pub grid: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 8)]
    pub starts: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub disease: DiseaseArg,
}

#[derive(Debug, Args)]
pub struct R0Args {
    /// Population; a default one is generated when omitted.
    #[arg(long)]
    pub pop: Option<PathBuf>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    pub sims: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub disease: DiseaseArg,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// JSON config with model, baseline, listen and sample_cap; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    #[arg(long)]
    pub listen: Option<String>,
    #[arg(long)]
    pub sample_cap: Option<usize>,
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Popgen(a) => popgen(a),
        Command::Simulate(a) => simulate(a),
        Command::Design(a) => design(a),
        Command::Fit(a) => fit(a),
        Command::Predict(a) => predict(a),
        Command::Explore(a) => explore(a),
        Command::Rank(a) => rank(a),
        Command::Validate(a) => validate(a),
        Command::Calibrate(CalibrateCommand::Targets(a)) => targets(a),
        Command::Calibrate(CalibrateCommand::Surface(a)) => surface(a),
        Command::Calibrate(CalibrateCommand::R0(a)) => r0(a),
        Command::Serve(a) => serve_cmd(a),
    }
}

fn load_pop(path: &Path) -> anyhow::Result<Population> {
    Population::load(path).with_context(|| format!("loading population {}", path.display()))
}

fn popgen(a: PopgenArgs) -> anyhow::Result<()> {
    let pop = Population::generate(&PopulationConfig {
        n_agents: a.agents,
        n_tracts: a.tracts,
        seed: a.seed,
        ..Default::default()
    })?;
    pop.save(&a.out)?;
    println!(
        "wrote {} agents in {} tracts to {}",
        pop.len(),
        pop.tracts().len(),
        a.out.display()
    );
    Ok(())
}

fn simulate(a: SimulateArgs) -> anyhow::Result<()> {
    if a.out.is_none() && a.study.is_none() {
        bail!("give --out, --study or both");
    }
    if a.reps == 0 {
        bail!("--reps must be at least 1");
    }
    let pop = load_pop(&a.pop)?;
    let disease = a.disease.load()?;
    let design = match (&a.design, &a.policy) {
        (Some(path), _) => {
            let (ids, d) = DesignMatrix::read_csv(path)?;
            if ids != (0..d.n()).collect::<Vec<_>>() {
                bail!("{}: row ids must run 0..n in order", path.display());
            }
            d
        }
        (None, Some(p)) => DesignMatrix::from_rows(&[read_policy_arg(p)?.normalize().to_vec()])?,
        (None, None) => DesignMatrix::from_rows(&[PolicyVector::baseline().normalize().to_vec()])?,
    };
    let policies = design.to_policies()?;
    let t = Instant::now();
    let mut rows = Vec::with_capacity(policies.len() * a.reps);
    let mut runs: Vec<(usize, usize, SimOutcome)> = Vec::new();
    for (i, pol) in policies.iter().enumerate() {
        let base = a.seed.wrapping_add((i * a.reps) as u64);
        let outs = run_replicates(&pop, &disease, pol, base, a.reps)?;
        for (r, o) in outs.into_iter().enumerate() {
            rows.push(OutcomeRow::from_outcome(i, r, &o));
            runs.push((i, r, o));
        }
        if (i + 1) % 50 == 0 {
            log::info!("simulated {}/{} design rows", i + 1, policies.len());
        }
    }
    let table = OutcomeTable::new(rows);
    if let Some(out) = &a.out {
        table.write_csv(out)?;
        let refs: Vec<(usize, usize, &SimOutcome)> =
            runs.iter().map(|(i, r, o)| (*i, *r, o)).collect();
        write_daily_csv(&daily_sidecar_path(out), &refs)?;
    }
    if let Some(dir) = &a.study {
        let mut m = RunManifest::new(
            "simulate",
            serde_json::json!({"reps": a.reps, "disease": disease, "population": pop.config()}),
            vec![a.seed],
        )
        .with_input("population", &a.pop)?;
        if let Some(d) = &a.design {
            m = m.with_input("design", d)?;
        }
        let m = write_study(dir, &design, &table, &m)?;
        println!("study {} (run {})", dir.display(), m.run_id);
    }
    println!(
        "{} simulations of {} agents in {:.1}s",
        policies.len() * a.reps,
        pop.len(),
        t.elapsed().as_secs_f64()
    );
    Ok(())
}

fn design(a: DesignArgs) -> anyhow::Result<()> {
    let mut d = lhs_sample(a.n, landscape_core::N_POLICIES, a.seed);
    if a.augment {
        d = d.augment(&default_augmentation(landscape_core::N_POLICIES))?;
    }
    d.write_csv(&a.out, a.scaled)?;
    println!("wrote {} design points to {}", d.n(), a.out.display());
    Ok(())
}

fn fit(a: FitArgs) -> anyhow::Result<()> {
    let data: TrainingData = match &a.study {
        Some(dir) => landscape_core::store::load_study(dir)?.training_data()?,
        None => {
            let (ids, design) =
                DesignMatrix::read_csv(a.design.as_deref().expect("required by clap"))?;
            let table = OutcomeTable::read_csv(a.outcomes.as_deref().expect("required by clap"))?;
            table.training_data(&ids, &design)?
        }
    };
    let cfg = EmulatorConfig {
        mle: MleConfig {
            starts: a.starts.max(1),
            seed: a.seed,
            ..Default::default()
        },
        ..Default::default()
    };
    let t = Instant::now();
    let em = Emulator::fit(&data, &cfg)?;
    em.save(&a.out)?;
    println!(
        "fitted on {} locations × {} replicates in {:.1}s; wrote {}",
        em.n_locations,
        em.replicates,
        t.elapsed().as_secs_f64(),
        a.out.display()
    );
    Ok(())
}

/// Reads either natural-unit policy columns or a normalized design.
fn read_policy_points(
    path: &Path,
) -> anyhow::Result<(Vec<usize>, Vec<[f64; landscape_core::N_POLICIES]>)> {
    let header = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?
        .lines()
        .next()
        .unwrap_or_default()
        .to_string();
    if header.starts_with("row_id") {
        let (ids, d) = DesignMatrix::read_csv(path)?;
        let pts = d
            .to_policies()?
            .iter()
            .map(PolicyVector::normalize)
            .collect();
        Ok((ids, pts))
    } else {
        let pols = read_policies_csv(path)?;
        Ok((
            (0..pols.len()).collect(),
            pols.iter().map(PolicyVector::normalize).collect(),
        ))
    }
}

fn predict(a: PredictArgs) -> anyhow::Result<()> {
    let em = Emulator::load(&a.model)?;
    match (&a.policy, &a.policies) {
        (Some(p), _) => {
            let report = predict_report(&em, &read_policy_arg(p)?)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        (None, Some(path)) => {
            let (ids, pts) = read_policy_points(path)?;
            let flat: Vec<f64> = pts.iter().flatten().copied().collect();
            let preds = em.predict_batch(&flat)?;
            match &a.out {
                Some(out) => {
                    write_predictions_csv(out, &ids, &preds, em.n_agents)?;
                    println!("wrote {} predictions to {}", preds.len(), out.display());
                }
                None => {
                    let tmp = std::env::temp_dir()
                        .join(format!("landscape-predict-{}.csv", std::process::id()));
                    write_predictions_csv(&tmp, &ids, &preds, em.n_agents)?;
                    print!("{}", std::fs::read_to_string(&tmp)?);
                    let _ = std::fs::remove_file(tmp);
                }
            }
        }
        (None, None) => bail!("give --policy or --policies"),
    }
    Ok(())
}

/// Written next to a candidates file so `rank` can reuse the goal.
#[derive(Debug, Serialize, Deserialize)]
pub struct ExploreSummary {
    pub k: usize,
    pub n_per_combo: usize,
    pub seed: u64,
    pub sampled: usize,
    pub written: usize,
    pub goal: GoalSpec,
    pub fraction_meeting_goal: f64,
    pub average_intensity: landscape_core::explorer::AverageIntensity,
}

pub fn summary_path(candidates: &Path) -> PathBuf {
    let stem = candidates
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    candidates.with_file_name(format!("{stem}.summary.json"))
}

fn explore(a: ExploreArgs) -> anyhow::Result<()> {
    let em = Emulator::load(&a.model)?;
    let goal = a.goal.goal()?;
    let req = SearchRequest {
        k: a.k,
        n_per_combo: a.n_per_combo,
        goal_attack_rate: Some(goal.threshold),
        goal_fraction_of_baseline: None,
        constraints: a.goal.constraints()?,
        strict: a.goal.strict,
        count: 0,
        seed: a.seed,
    };
    let t = Instant::now();
    let (resp, cands, goal) =
        run_search(&em, &req, None, a.max_predictions).map_err(|e| anyhow::anyhow!("{e}"))?;
    let written = cands.write_csv(&a.out, &goal, a.qualifying_only)?;
    let summary = ExploreSummary {
        k: a.k,
        n_per_combo: a.n_per_combo,
        seed: a.seed,
        sampled: resp.sampled,
        written,
        goal,
        fraction_meeting_goal: resp.fraction_meeting_goal,
        average_intensity: resp.average_intensity,
    };
    landscape_core::store::write_atomic(
        &summary_path(&a.out),
        serde_json::to_string_pretty(&summary)?.as_bytes(),
    )?;
    println!(
        "k={} sampled {} in {:.1}s: {:.4} meet attack rate ≤ {:.4}; mean active intensity {:.3} (all), {} (qualifying)",
        a.k,
        resp.sampled,
        t.elapsed().as_secs_f64(),
        resp.fraction_meeting_goal,
        summary.goal.threshold,
        resp.average_intensity.over_all,
        resp.average_intensity.over_qualifying.map_or("n/a".into(), |v| format!("{v:.3}")),
    );
    Ok(())
}

fn rank(a: RankArgs) -> anyhow::Result<()> {
    let cands = CandidateSet::read_csv(&a.candidates)?;
    let goal = if a.goal.is_set() {
        a.goal.goal()?
    } else {
        let p = summary_path(&a.candidates);
        let text = std::fs::read_to_string(&p)
            .with_context(|| format!("no goal given and no summary at {}", p.display()))?;
        serde_json::from_str::<ExploreSummary>(&text)?.goal
    };
    let ranking = rank_smallest_meeting_goal(&cands, &goal, a.count)?;
    ranking.write_csv(&a.out)?;
    if let Some(w) = &ranking.warning {
        eprintln!("warning: {w}");
    }
    if !cands.is_empty() {
        let f = fraction_meeting_goal(&cands, &goal)?;
        let avg = average_intensity(&cands, &goal)?;
        println!(
            "{} of {} candidates qualify ({f:.4}); mean active intensity {:.3} over all rows",
            ranking.qualifying,
            cands.len(),
            avg.over_all
        );
    }
    for (i, w) in ranking.winners.iter().enumerate() {
        println!(
            "{:>3}  row {:>8}  norm {:.4}  attack {:.4} [{:.4}, {:.4}]",
            i + 1,
            w.row_id,
            w.intensity,
            w.prediction.cumulative_infections.mean,
            w.prediction.cumulative_infections.lo90,
            w.prediction.cumulative_infections.hi90
        );
    }
    println!("wrote {}", a.out.display());
    Ok(())
}

fn validate(a: ValidateArgs) -> anyhow::Result<()> {
    let policies = read_policies_csv(&a.policies)?;
    let pop = load_pop(&a.pop)?;
    let disease = a.disease.load()?;
    let em = a.model.as_deref().map(Emulator::load).transpose()?;
    let baseline = a.baseline.as_deref().map(load_baseline).transpose()?;
    let rows = validate_candidates(&policies, &pop, &disease, a.reps, a.seed, em.as_ref())?;
    if let Some(out) = &a.out {
        write_validation_csv(out, &rows)?;
    }
    let mut below = (0, 0);
    for (i, r) in rows.iter().enumerate() {
        let emu = r.emulated.map_or(String::new(), |e| {
            let c = e.cumulative_infections;
            format!(
                "  emulated {:.4} [{:.4}, {:.4}]{}",
                c.mean,
                c.lo90,
                c.hi90,
                if c.contains(r.attack_rate_mean) {
                    ""
                } else {
                    " (outside)"
                }
            )
        });
        println!(
            "{:>3}  attack {:.4} ± {:.4}  svi_var {:.3e} ± {:.1e}{emu}",
            i + 1,
            r.attack_rate_mean,
            r.infections_sd / pop.len() as f64,
            r.svi_variance_mean,
            r.svi_variance_sd
        );
        if let Some(b) = &baseline {
            below.0 += usize::from(r.infections_mean < b.infections_mean);
            below.1 += usize::from(r.svi_variance_mean < b.svi_variance_mean);
        }
    }
    if let Some(b) = &baseline {
        println!(
            "below baseline: infections {}/{} (baseline {:.1}), svi_variance {}/{} (baseline {:.3e})",
            below.0,
            rows.len(),
            b.infections_mean,
            below.1,
            rows.len(),
            b.svi_variance_mean
        );
    }
    Ok(())
}

fn targets(a: TargetsArgs) -> anyhow::Result<()> {
    let pop = load_pop(&a.pop)?;
    let disease = a.disease.load()?;
    let outs = run_replicates(&pop, &disease, &PolicyVector::baseline(), a.seed, a.reps)?;
    let s = TargetSummary::from_outcomes(&outs)?;
    println!(
        "underreport ratio {:.3} ± {:.3} over {} replicates; infections {:.1} ± {:.1}; diagnoses {:.1} ± {:.1}",
        s.ratio_mean, s.ratio_sd, s.replicates, s.infections_mean, s.infections_sd, s.diagnoses_mean, s.diagnoses_sd
    );
    if s.zero_diagnosis_runs > 0 {
        println!(
            "warning: {} replicate(s) had no diagnoses; their ratio uses a floor of 1",
            s.zero_diagnosis_runs
        );
    }
    let undefined = s.positivity.iter().filter(|p| p.is_none()).count();
    if undefined > 0 {
        println!("positivity undefined on {undefined} day(s) without tests");
    }
    if let Some(obs) = &a.observed {
        let c = compare_to_observed(&s, &ObservedTargets::read_csv(obs)?)?;
        println!(
            "vs observed over {} days: diagnoses RMSE {:.2}, positivity RMSE {}",
            c.days_compared,
            c.diagnoses_rmse,
            c.positivity_rmse
                .map_or("n/a".into(), |v| format!("{v:.4}"))
        );
    }
    if let Some(out) = &a.out {
        s.write_curves_csv(out)?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn surface(a: SurfaceArgs) -> anyhow::Result<()> {
    let (p, q) = a
        .pair
        .split_once(',')
        .context("--pair takes two names separated by a comma")?;
    let pop = load_pop(&a.pop)?;
    let disease = a.disease.load()?;
    let cfg = SensitivityConfig {
        lhs_n: a.lhs,
        reps: a.reps,
        grid_resolution: a.grid,
        seed: a.seed,
        ..SensitivityConfig::new(p.trim(), q.trim())
    };
    let mle = MleConfig {
        starts: a.starts.max(1),
        ..Default::default()
    };
    let s = sensitivity_surface(&pop, &disease, &cfg, &mle)?;
    s.write_csv(&a.out)?;
    println!(
        "baseline ({} = {}, {} = {}): ratio {:.3}, infections {:.1}, diagnoses {:.1}; wrote {}",
        s.param_a,
        s.baseline_a,
        s.param_b,
        s.baseline_b,
        s.baseline.ratio.mean,
        s.baseline.infections.mean,
        s.baseline.diagnoses.mean,
        a.out.display()
    );
    Ok(())
}

fn r0(a: R0Args) -> anyhow::Result<()> {
    let pop = match &a.pop {
        Some(p) => load_pop(p)?,
        None => Population::generate(&PopulationConfig::default())?,
    };
    let disease = a.disease.load()?;
    let beta = a.beta.unwrap_or(disease.base_transmission_rate);
    let r = r0_experiment(&pop, &disease, beta, a.sims, a.seed)?;
    r.write_csv(&a.out)?;
    println!(
        "beta {beta}: mean {:.3} secondary infections (IQR {}-{}), variance {:.3} over {} index cases; wrote {}",
        r.mean,
        r.p25,
        r.p75,
        r.variance,
        r.counts.len(),
        a.out.display()
    );
    Ok(())
}

fn serve_cmd(a: ServeArgs) -> anyhow::Result<()> {
    let mut cfg = match &a.config {
        Some(p) => {
            let text =
                std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => ServiceConfig::default(),
    };
    if a.model.is_some() {
        cfg.model = a.model;
    }
    if a.baseline.is_some() {
        cfg.baseline = a.baseline;
    }
    if let Some(l) = a.listen {
        cfg.listen = l;
    }
    if let Some(c) = a.sample_cap {
        cfg.sample_cap = c;
    }
    tokio::runtime::Runtime::new()?.block_on(serve(cfg))
}

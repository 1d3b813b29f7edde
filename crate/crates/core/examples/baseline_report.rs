//! Prints baseline and single-lever statistics for the default desk-scale setup.
//!
//! cargo run --release -p landscape-core --example baseline_report [reps]

use std::time::Instant;

use landscape_core::abm::{run_replicates, DiseaseParams};
use landscape_core::policy::{PolicyVector, N_POLICIES, POLICY_SPECS};
use landscape_core::population::{Population, PopulationConfig};
use landscape_core::stats::{mean, sample_sd};

fn summarize(label: &str, outs: &[landscape_core::SimOutcome]) {
    let ar: Vec<f64> = outs.iter().map(|o| o.attack_rate()).collect();
    let ratio: Vec<f64> = outs
        .iter()
        .map(|o| o.cumulative_infections as f64 / o.cumulative_diagnoses.max(1) as f64)
        .collect();
    let var: Vec<f64> = outs.iter().map(|o| o.svi_variance).collect();
    let mut bins = [0.0; 4];
    for o in outs {
        for b in 0..4 {
            bins[b] += o.attack_rate_by_svi[b] / outs.len() as f64;
        }
    }
    let grad = outs
        .iter()
        .filter(|o| o.attack_rate_by_svi[3] > o.attack_rate_by_svi[0])
        .count();
    println!(
        "{label:<26} attack {:.4} ± {:.4}  ratio {:.2}  svi_var {:.2e} ± {:.1e}  bins {:.3?}  grad {}/{}  boosted {:.3}",
        mean(&ar),
        sample_sd(&ar),
        mean(&ratio),
        mean(&var),
        sample_sd(&var),
        bins,
        grad,
        outs.len(),
        mean(&outs.iter().map(|o| o.boosted_fraction).collect::<Vec<_>>()),
    );
}

fn main() {
    let reps: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(10);
    let pop = Population::generate(&PopulationConfig::default()).unwrap();
    let mut params = DiseaseParams::default();
    if let Some(b) = std::env::var("BETA").ok().and_then(|s| s.parse().ok()) {
        params.base_transmission_rate = b;
    }
    let t = Instant::now();
    let base = run_replicates(&pop, &params, &PolicyVector::baseline(), 1, reps).unwrap();
    println!(
        "{:.1} ms per replicate",
        t.elapsed().as_secs_f64() * 1e3 / reps as f64
    );
    summarize("baseline", &base);
    for j in 0..N_POLICIES {
        let outs = run_replicates(&pop, &params, &PolicyVector::single_max(j), 1, reps).unwrap();
        summarize(POLICY_SPECS[j].name, &outs);
    }
    let mut combo = PolicyVector::single_max(4);
    summarize(
        "ct max, mask days 0",
        &run_replicates(&pop, &params, &combo, 1, reps).unwrap(),
    );
    combo.mask_duration_ct = 14.0;
    summarize(
        "ct max, mask days 14",
        &run_replicates(&pop, &params, &combo, 1, reps).unwrap(),
    );
}

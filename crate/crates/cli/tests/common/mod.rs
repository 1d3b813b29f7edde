#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::OnceLock;

use landscape_core::design::lhs_sample;
use landscape_core::emulator::MleConfig;
use landscape_core::store::{write_study, OutcomeRow, OutcomeTable, RunManifest};
use landscape_core::{
    run_replicates, DesignMatrix, DiseaseParams, Emulator, EmulatorConfig, PolicyVector,
    Population, PopulationConfig, N_POLICIES,
};

pub struct Fixture {
    pub dir: tempfile::TempDir,
    pub pop: PathBuf,
    pub model: PathBuf,
    pub baseline: PathBuf,
}

/// A small population, a fitted model and a baseline study, built once per test binary.
pub fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let pop = Population::generate(&PopulationConfig {
            n_agents: 4000,
            n_tracts: 16,
            seed: 11,
            ..Default::default()
        })
        .unwrap();
        let pop_path = dir.path().join("pop.json");
        pop.save(&pop_path).unwrap();
        let disease = DiseaseParams::default();

        let design = lhs_sample(40, N_POLICIES, 5);
        let mut rows = Vec::new();
        for (i, pol) in design.to_policies().unwrap().iter().enumerate() {
            for (r, o) in run_replicates(&pop, &disease, pol, 100 + 4 * i as u64, 4)
                .unwrap()
                .iter()
                .enumerate()
            {
                rows.push(OutcomeRow::from_outcome(i, r, o));
            }
        }
        let ids: Vec<usize> = (0..design.n()).collect();
        let data = OutcomeTable::new(rows)
            .training_data(&ids, &design)
            .unwrap();
        let cfg = EmulatorConfig {
            mle: MleConfig {
                starts: 1,
                ..Default::default()
            },
            ..Default::default()
        };
        let model = dir.path().join("model.json");
        Emulator::fit(&data, &cfg).unwrap().save(&model).unwrap();

        let base_design =
            DesignMatrix::from_rows(&[PolicyVector::baseline().normalize().to_vec()]).unwrap();
        let base_rows = run_replicates(&pop, &disease, &PolicyVector::baseline(), 9000, 5)
            .unwrap()
            .iter()
            .enumerate()
            .map(|(r, o)| OutcomeRow::from_outcome(0, r, o))
            .collect();
        let baseline = dir.path().join("baseline");
        let manifest = RunManifest::new("test", serde_json::json!({}), vec![9000]);
        write_study(
            &baseline,
            &base_design,
            &OutcomeTable::new(base_rows),
            &manifest,
        )
        .unwrap();

        Fixture {
            dir,
            pop: pop_path,
            model,
            baseline,
        }
    })
}

use landscape_core::design::lhs_sample;
use landscape_core::explorer::{
    fraction_meeting_goal, intensity_norm, mean_active_intensity, rank_smallest_meeting_goal,
    sample_k_active, CandidateSet, GoalSpec,
};
use landscape_core::{EmulatedOutcomes, Outcome, PolicyVector, Prediction, N_POLICIES};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Candidates with synthetic predictions. Coordinates are drawn from a coarse
/// grid so intensity ties are common.
fn synthetic(n: usize, seed: u64) -> CandidateSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            (0..N_POLICIES)
                .map(|_| rng.random_range(0..4) as f64 / 4.0)
                .collect()
        })
        .collect();
    let predictions = (0..n)
        .map(|_| {
            let m: f64 = rng.random_range(0.1..0.4);
            let s: f64 = rng.random_range(0.0..0.05);
            EmulatedOutcomes {
                cumulative_infections: Prediction::from_mean_var(m, s * s),
                svi_variance: Prediction::from_mean_var(1e-3, 1e-8),
            }
        })
        .collect();
    CandidateSet {
        row_ids: (0..n).collect(),
        design: landscape_core::DesignMatrix::from_rows(&rows).unwrap(),
        active: rows
            .iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .fold(0u16, |m, (j, v)| if *v > 0.0 { m | 1 << j } else { m })
            })
            .collect(),
        predictions,
    }
}

fn brute_force(c: &CandidateSet, goal: &GoalSpec, count: usize) -> Vec<usize> {
    let mut best: Vec<(f64, usize)> = Vec::new();
    for i in 0..c.len() {
        let x = c.design.row(i);
        let p = c.predictions[i].cumulative_infections;
        let ok = if goal.strict { p.hi90 } else { p.mean } <= goal.threshold
            && goal.constraints.iter().all(|&(j, b)| x[j] <= b);
        if ok {
            let norm: f64 = x.iter().map(|v| v * v).sum();
            best.push((norm, c.row_ids[i]));
        }
    }
    // Selection by repeated minimum, independent of the library's sort.
    let mut out = Vec::new();
    while out.len() < count && !best.is_empty() {
        let mut k = 0;
        for i in 1..best.len() {
            if best[i].0 < best[k].0 || (best[i].0 == best[k].0 && best[i].1 < best[k].1) {
                k = i;
            }
        }
        out.push(best.swap_remove(k).1);
    }
    out
}

#[test]
fn ranking_matches_brute_force() {
    for seed in 0..20 {
        let c = synthetic(1000, seed);
        for (strict, constrained) in [(false, false), (true, false), (false, true)] {
            let mut goal = GoalSpec::new(Outcome::CumulativeInfections, 0.2);
            goal.strict = strict;
            if constrained {
                goal = goal.with_default_constraints();
            }
            let r = rank_smallest_meeting_goal(&c, &goal, 10).unwrap();
            let got: Vec<usize> = r.winners.iter().map(|w| w.row_id).collect();
            assert_eq!(got, brute_force(&c, &goal, 10), "seed {seed}");
            for w in &r.winners {
                assert_eq!(w.intensity, intensity_norm(&w.point));
                assert_eq!(w.policy, PolicyVector::from_normalized(&w.point));
            }
        }
    }
}

#[test]
fn ties_break_by_row_id_regardless_of_order() {
    let c = synthetic(1000, 99);
    let goal = GoalSpec::new(Outcome::CumulativeInfections, 0.3);
    let a = rank_smallest_meeting_goal(&c, &goal, 50).unwrap();
    // Reverse the storage order; ids travel with their rows.
    let n = c.len();
    let rows: Vec<Vec<f64>> = (0..n).rev().map(|i| c.design.row(i).to_vec()).collect();
    let rev = CandidateSet {
        row_ids: (0..n).rev().collect(),
        design: landscape_core::DesignMatrix::from_rows(&rows).unwrap(),
        active: c.active.iter().rev().copied().collect(),
        predictions: c.predictions.iter().rev().copied().collect(),
    };
    let b = rank_smallest_meeting_goal(&rev, &goal, 50).unwrap();
    let ids = |r: &landscape_core::explorer::Ranking| {
        r.winners.iter().map(|w| w.row_id).collect::<Vec<_>>()
    };
    assert_eq!(ids(&a), ids(&b));
    let norms: Vec<f64> = a.winners.iter().map(|w| w.intensity).collect();
    assert!(
        norms.windows(2).any(|w| w[0] == w[1]),
        "fixture should contain ties"
    );
}

#[test]
fn too_few_qualifying_sets_warning() {
    let c = synthetic(50, 3);
    let r = rank_smallest_meeting_goal(&c, &GoalSpec::new(Outcome::CumulativeInfections, 0.12), 40)
        .unwrap();
    assert!(r.winners.len() < 40);
    assert_eq!(r.winners.len(), r.qualifying);
    assert!(r.warning.is_some());
    let r = rank_smallest_meeting_goal(&c, &GoalSpec::new(Outcome::CumulativeInfections, 1.0), 10)
        .unwrap();
    assert!(r.warning.is_none());
}

#[test]
fn empty_candidate_set_is_an_error() {
    let c = CandidateSet {
        row_ids: vec![],
        design: landscape_core::DesignMatrix::new(landscape_core::policy::policy_labels(), &[])
            .unwrap(),
        active: vec![],
        predictions: vec![],
    };
    assert!(fraction_meeting_goal(&c, &GoalSpec::new(Outcome::CumulativeInfections, 0.2)).is_err());
}

#[test]
fn candidates_csv_round_trip() {
    let c = synthetic(200, 5);
    let goal = GoalSpec::new(Outcome::CumulativeInfections, 0.2);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.csv");
    assert_eq!(c.write_csv(&p, &goal, false).unwrap(), 200);
    let back = CandidateSet::read_csv(&p).unwrap();
    assert_eq!(back.row_ids, c.row_ids);
    assert_eq!(back.design, c.design);
    assert_eq!(back.active, c.active);
    assert_eq!(back.predictions, c.predictions);

    let q = c.write_csv(&p, &goal, true).unwrap();
    let only = CandidateSet::read_csv(&p).unwrap();
    assert_eq!(only.len(), q);
    let a = rank_smallest_meeting_goal(&c, &goal, 10).unwrap();
    let b = rank_smallest_meeting_goal(&only, &goal, 10).unwrap();
    assert_eq!(
        a.winners.iter().map(|w| w.row_id).collect::<Vec<_>>(),
        b.winners.iter().map(|w| w.row_id).collect::<Vec<_>>()
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn constraints_and_strictness_only_shrink(seed in any::<u64>(), t in 0.1f64..0.4) {
        let c = synthetic(300, seed);
        let goal = GoalSpec::new(Outcome::CumulativeInfections, t);
        let free = fraction_meeting_goal(&c, &goal).unwrap();
        let constrained = fraction_meeting_goal(&c, &goal.clone().with_default_constraints()).unwrap();
        let strict = fraction_meeting_goal(&c, &GoalSpec { strict: true, ..goal.clone() }).unwrap();
        prop_assert!((0.0..=1.0).contains(&free));
        prop_assert!(constrained <= free);
        prop_assert!(strict <= free);
    }

    #[test]
    fn k_active_rows_have_exactly_k_levers(k in 1usize..=10, seed in any::<u64>()) {
        let n = if k >= 4 && k <= 6 { 2 } else { 6 };
        let (d, active) = sample_k_active(k, n, seed).unwrap();
        for (r, m) in d.rows().zip(&active) {
            prop_assert_eq!(m.count_ones() as usize, k);
            for (j, v) in r.iter().enumerate() {
                prop_assert_eq!(*v > 0.0, m & (1 << j) != 0);
                prop_assert!((0.0..1.0).contains(v));
            }
            let mean = mean_active_intensity(r, *m).unwrap();
            prop_assert!(mean > 0.0 && mean < 1.0);
        }
        let again = sample_k_active(k, n, seed).unwrap();
        prop_assert_eq!(again.0, d);
    }

    #[test]
    fn per_combination_blocks_are_latin(seed in any::<u64>()) {
        let n = 7;
        let (d, _) = sample_k_active(2, n, seed).unwrap();
        for block in 0..45 {
            let rows: Vec<&[f64]> = (0..n).map(|i| d.row(block * n + i)).collect();
            let cols: Vec<usize> = (0..N_POLICIES).filter(|&j| rows[0][j] > 0.0).collect();
            prop_assert_eq!(cols.len(), 2);
            for &j in &cols {
                let mut hits = vec![0; n];
                for r in &rows {
                    hits[(r[j] * n as f64) as usize] += 1;
                }
                prop_assert!(hits.iter().all(|&h| h == 1));
            }
        }
    }

    #[test]
    fn intensity_is_sum_of_squares(x in prop::collection::vec(0.0f64..=1.0, N_POLICIES)) {
        let want: f64 = x.iter().map(|v| v * v).sum();
        prop_assert_eq!(intensity_norm(&x), want);
        prop_assert!(intensity_norm(&x) <= N_POLICIES as f64);
    }
}

#[test]
fn lhs_strata_at_stated_sizes() {
    for n in [10, 100, 1500] {
        let d = lhs_sample(n, 10, 77);
        for j in 0..10 {
            let mut hits = vec![0; n];
            for r in d.rows() {
                hits[(r[j] * n as f64) as usize] += 1;
            }
            assert!(hits.iter().all(|&h| h == 1));
        }
        assert_eq!(d, lhs_sample(n, 10, 77));
    }
}

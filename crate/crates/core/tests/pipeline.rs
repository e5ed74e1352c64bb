use genmakespan::eval::{evaluate_exact, outcome_count};
use genmakespan::instances::{gen_random, FamilyKind, InstanceFile, ResultFile, SizeProfile};
use genmakespan::rounding::{solve_end_to_end, SolverConfig};
use proptest::prelude::*;

fn config(seed: u64) -> SolverConfig {
    SolverConfig {
        inner_samples: 1000,
        final_samples: 2000,
        repetitions: 8,
        seed,
        ..SolverConfig::default()
    }
}

#[test]
fn files_round_trip_through_the_solver() {
    let dir = std::env::temp_dir().join(format!("genmakespan-pipeline-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("rect.json");
    let file = gen_random(FamilyKind::Rectangles, 7, &SizeProfile::default(), 3, 4).unwrap();
    file.save(&path).unwrap();
    let loaded = InstanceFile::load(&path).unwrap();
    assert_eq!(loaded, file);
    let solution = solve_end_to_end(&loaded.to_problem().unwrap(), &config(2)).unwrap();
    let text = ResultFile::new(loaded.name.clone(), config(2), solution).to_json().unwrap();
    let back = ResultFile::from_json(&text).unwrap();
    assert_eq!(back.to_json().unwrap(), text);
    std::fs::remove_dir_all(&dir).unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn solutions_are_valid_selections(
        family in prop_oneof![Just(FamilyKind::Line), Just(FamilyKind::Tree), Just(FamilyKind::Disks)],
        n in 1usize..10,
        frac in 0.0f64..=1.0,
        seed in any::<u64>(),
    ) {
        let t = (frac * n as f64).round() as usize;
        let file = gen_random(family, n, &SizeProfile::default(), t, seed).unwrap();
        let problem = file.to_problem().unwrap();
        let s = solve_end_to_end(&problem, &config(seed)).unwrap();
        prop_assert_eq!(s.chosen.len(), t);
        prop_assert!(s.chosen.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(s.chosen.iter().all(|&j| j < n));
        prop_assert!(s.chosen.iter().all(|j| s.selected.contains(j)));
        if outcome_count(&s.chosen, &problem.dists) <= 1 << 12 {
            let exact = evaluate_exact(&s.chosen, &problem.sys, &problem.dists).unwrap();
            prop_assert!((exact.mean - s.estimate.mean).abs() <= 1e-9 + 5.0 * s.estimate.stderr);
        }
    }
}

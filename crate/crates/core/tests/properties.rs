mod common;

use lesample_core::pddl::{
    ground, parse_domain, parse_problem, print_domain, print_problem, MINIMAL_DOMAIN,
};
use lesample_core::planner::{plan, validate_plan, Budget};
use lesample_core::scene_belief::{entropy, inject_entropy, ClassTable, Observation};
use lesample_core::simworld::{
    execute, goal_satisfied, ground_goal, make_scenario, scene_to_problem,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn printed_problems_reparse_equal(seed in any::<u64>()) {
        let domain = common::domain();
        let p = common::random_problem(seed, 6);
        let back = parse_problem(&print_problem(&p), &domain).unwrap();
        prop_assert_eq!(back, p);
    }

    #[test]
    fn planner_agrees_with_bfs(seed in any::<u64>()) {
        let domain = common::domain();
        let p = common::random_problem(seed, 3);
        let oracle = common::bfs_shortest(&domain, &p);
        match plan(&domain, &p, Budget::default()) {
            Ok(pl) => {
                prop_assert!(validate_plan(&p, &pl.actions).is_ok());
                prop_assert!(pl.len() >= oracle.expect("BFS finds a plan whenever GBFS does"));
            }
            Err(e) => prop_assert!(oracle.is_none(), "planner failed ({e}) on a solvable problem"),
        }
    }

    #[test]
    fn planned_truth_executes_to_the_goal(seed in any::<u64>(), n in 1usize..=7, stacks in 1usize..=3) {
        let mut world = make_scenario(seed, n, stacks.min(n), &ClassTable::grocery()).unwrap();
        let goal = ground_goal(&world.truth);
        let problem = scene_to_problem(&world.truth, &goal.goal).unwrap();
        let pl = plan(&common::domain(), &problem, Budget::default()).unwrap();
        prop_assert_eq!(pl.len(), 2 * n);
        for a in &pl.actions {
            execute(&mut world, a, 10.0).unwrap();
        }
        prop_assert!(goal_satisfied(&world));
        prop_assert_eq!(world.truth.constraint_violations(), 0);
        prop_assert_eq!(world.clock, 20.0 * n as f64);
    }

    #[test]
    fn world_and_pddl_agree_under_random_actions(seed in any::<u64>(), n in 1usize..=6, steps in 0usize..40) {
        let domain = common::domain();
        let mut world = make_scenario(seed, n, 2.min(n), &ClassTable::grocery()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let problem = scene_to_problem(&world.truth, &[]).unwrap();
        let actions = ground(&domain, &problem);
        let mut state = problem.initial_state();
        for _ in 0..steps {
            let legal: Vec<_> = actions.iter().filter(|a| state.apply(a).is_ok()).collect();
            prop_assert!(!legal.is_empty());
            let a = legal[rng.gen_range(0..legal.len())];
            state = state.apply(a).unwrap();
            execute(&mut world, a, 1.0).unwrap();
            let ids = world.truth.object_ids();
            prop_assert!(world.truth.layout.validate(&ids).is_ok());
            prop_assert_eq!(&scene_to_problem(&world.truth, &[]).unwrap().initial_state(), &state);
        }
    }

    #[test]
    fn injection_hits_target_and_keeps_mode(seed in any::<u64>(), h in 0.0f64..=1.0) {
        let table = ClassTable::grocery();
        let world = make_scenario(seed, 5, 2, &table).unwrap();
        let b = inject_entropy(&table, &world.truth, h, 1e-6).unwrap();
        prop_assert!((entropy(&b) - h).abs() <= 1e-6);
        for o in b.objects() {
            let truth = table.index_of(world.truth.category_of(&o.object_id).unwrap()).unwrap();
            prop_assert!(o.weights.iter().all(|&p| p <= o.weights[truth]));
            prop_assert!((o.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn pick_observation_never_raises_entropy(seed in any::<u64>(), h in 0.0f64..=1.0, which in 0usize..5) {
        let table = ClassTable::grocery();
        let world = make_scenario(seed, 5, 2, &table).unwrap();
        let b = inject_entropy(&table, &world.truth, h, 1e-6).unwrap();
        let obj = &world.truth.objects[which];
        let obs = Observation::PickedIdentity { object_id: obj.id.clone(), category: obj.category.clone() };
        let after = b.update_on_observation(&obs).unwrap();
        prop_assert!(entropy(&after) <= entropy(&b) + 1e-12);
        prop_assert!(after.object(&obj.id).unwrap().is_delta());
    }
}

#[test]
fn domains_print_and_reparse() {
    for d in [common::domain(), parse_domain(MINIMAL_DOMAIN).unwrap()] {
        assert_eq!(parse_domain(&print_domain(&d)).unwrap(), d);
    }
}

mod common;

use assign_core::apda::run_apda;
use assign_core::audit::check_dual_ownership;
use assign_core::mechanism::Mechanism;
use assign_core::priority::{
    find_ergin_cycle, find_priority_cycle, find_priority_cycle_bruteforce, find_weak_cycle,
};
use assign_core::search::{search_mechanism, Requirements, SearchOptions};
use assign_core::ttc::{fpttc_allocation, run_fpttc, run_rule};
use assign_core::{Item, Market, PreferenceDomain, RuleTable};
use common::*;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn search_found(m: &Market, rule: &RuleTable, d: &PreferenceDomain, req: &str, single: bool) -> bool {
    let opts = SearchOptions {
        allow_single_edge: single,
        ..Default::default()
    };
    search_mechanism(m, rule, d, Requirements::parse(req).unwrap(), &opts)
        .unwrap()
        .found()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn fpttc_and_apda_invariants(n in 1usize..=4, k in 1usize..=4, seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let m = Market::with_sizes(n, k);
        let s = random_structure(&m, &mut rng);
        for _ in 0..4 {
            let outside_last = rng.gen_bool(0.3);
            let p = random_profile(&m, &mut rng, outside_last);
            let trace = run_fpttc(&m, &s, &p).unwrap();
            let alloc = &trace.allocation;
            prop_assert!(alloc.is_feasible());
            prop_assert_eq!(alloc, &fpttc_allocation(&m, &s, &p).unwrap());
            for a in m.agents() {
                prop_assert!(p.get(a).weakly_prefers(&m, alloc.get(a), Item::Outside));
            }
            // every step assigns someone and the market only shrinks
            let mut agents_left = n + 1;
            let mut objects_left = k + 1;
            for step in &trace.steps {
                prop_assert!(!step.assigned_agents.is_empty());
                prop_assert!(step.remaining_agents.len() < agents_left);
                prop_assert!(step.remaining_objects.len() <= objects_left);
                agents_left = step.remaining_agents.len();
                objects_left = step.remaining_objects.len();
                let owned: usize = step.ownership.values().map(Vec::len).sum();
                prop_assert_eq!(owned, step.remaining_objects.len());
                for &o in step.ownership.keys() {
                    prop_assert!(step.remaining_agents.contains(&o));
                }
            }
            prop_assert!(trace.steps.len() <= n);

            let (da, rounds) = run_apda(&m, &s, &p).unwrap();
            prop_assert!(da.is_feasible());
            for a in m.agents() {
                prop_assert!(p.get(a).weakly_prefers(&m, da.get(a), Item::Outside));
            }
            prop_assert!(rounds.len() <= n * (k + 1));
            let applications: usize = rounds.iter().map(|r| r.applications.len()).sum();
            prop_assert!(applications <= n * (k + 1));
            if find_ergin_cycle(&s).is_none() {
                prop_assert_eq!(&da, alloc);
            }
        }
    }

    #[test]
    fn priority_cycle_matches_bruteforce(n in 1usize..=6, k in 1usize..=6, seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let m = Market::with_sizes(n, k);
        let s = random_structure(&m, &mut rng);
        let fast = find_priority_cycle(&s).unwrap();
        let slow = find_priority_cycle_bruteforce(&s).unwrap();
        prop_assert_eq!(fast.is_some(), slow.is_some());
        if let Some(w) = fast {
            prop_assert!(w.is_valid(&s));
            prop_assert_eq!(Some(&w.cycle), slow.as_ref().map(|w| &w.cycle));
        }
        if find_weak_cycle(&s).is_none() {
            prop_assert!(find_priority_cycle(&s).unwrap().is_none());
        }
    }

    #[test]
    fn two_agents_always_have_dual_ownership(k in 1usize..=4, seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let m = Market::with_sizes(2, k);
        let s = random_structure(&m, &mut rng);
        let d = random_domain(&m, &mut rng, 4);
        prop_assert!(check_dual_ownership(&m, &s, &d).unwrap().holds);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn grouped_and_naive_checkers_agree(n in 1usize..=3, k in 1usize..=3, seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let m = Market::with_sizes(n, k);
        let d = random_domain(&m, &mut rng, 4);
        let g = random_mechanism(&m, &d, &mut rng);
        prop_assert!(g.validate().holds);
        let osp = g.check_osp().unwrap();
        let sosp = g.check_sosp().unwrap();
        prop_assert_eq!(osp.holds, g.check_osp_naive().unwrap().holds);
        prop_assert_eq!(sosp.holds, g.check_sosp_naive().unwrap().holds);
        prop_assert!(!sosp.holds || osp.holds);
        let simple = g.check_simple().holds;
        prop_assert!(!(simple && osp.holds) || sosp.holds);

        let again = Mechanism::from_value(&g.to_value(), None).unwrap();
        prop_assert_eq!(again.outcome_table().unwrap(), g.outcome_table().unwrap());
    }

    #[test]
    fn search_finds_what_random_trees_exhibit(n in 1usize..=3, k in 1usize..=3, seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let m = Market::with_sizes(n, k);
        let d = random_domain(&m, &mut rng, 3);
        let g = random_mechanism(&m, &d, &mut rng);
        let rule = g.outcome_table().unwrap();
        let osp = g.check_osp().unwrap().holds;
        let sosp = g.check_sosp().unwrap().holds;
        let simple = g.check_simple().holds;
        let found_osp = search_found(&m, &rule, &d, "osp", false);
        let found_sosp = search_found(&m, &rule, &d, "sosp", false);
        let found_simple = search_found(&m, &rule, &d, "simple,osp", false);
        prop_assert!(!osp || found_osp);
        prop_assert!(!sosp || found_sosp);
        prop_assert!(!(simple && osp) || found_simple);
        prop_assert!(!found_sosp || found_osp);
        prop_assert!(!found_simple || found_sosp);
        prop_assert_eq!(found_simple, search_found(&m, &rule, &d, "simple,osp", true));
    }

    #[test]
    fn fpttc_search_is_sound_and_monotone(n in 1usize..=3, k in 1usize..=3, seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let m = Market::with_sizes(n, k);
        let s = random_structure(&m, &mut rng);
        let d = random_domain(&m, &mut rng, 4);
        let rule = run_rule(&m, &s, &d).unwrap();
        for req in ["osp", "sosp", "simple,osp"] {
            let out = search_mechanism(&m, &rule, &d, Requirements::parse(req).unwrap(), &SearchOptions::default()).unwrap();
            if let Some(g) = out.mechanism {
                prop_assert!(g.validate().holds);
                prop_assert!(g.implements(&rule).unwrap().holds);
                prop_assert!(g.check_osp().unwrap().holds);
                if req != "osp" {
                    prop_assert!(g.check_sosp().unwrap().holds);
                }
                if req == "simple,osp" {
                    prop_assert!(g.check_simple().holds);
                }
            }
        }
        // a strongly acyclic rule is OSP on the full domain, hence on every subdomain
        if find_weak_cycle(&s).is_none() {
            prop_assert!(search_found(&m, &rule, &d, "osp", false));
        }
    }
}

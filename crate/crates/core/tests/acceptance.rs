//! Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any fails.
//!
//! `ACCEPTANCE_SAMPLE=k` restricts the synthesis sweep to `k` (at least 50)
//! structures spread evenly over all 216.

mod common;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use assign_core::apda::run_apda;
use assign_core::audit::{check_dual_ownership, dual_ownership_at, verify_characterizations};
use assign_core::mechanism::Property;
use assign_core::priority::{
    all_ergin_cycles, find_ergin_cycle, find_priority_cycle, find_priority_cycle_bruteforce,
    find_weak_cycle, is_serial_dictatorship, wsd_rank_condition, ErginCycleWitness,
    WeakCycleWitness,
};
use assign_core::search::{search_mechanism, Requirements, SearchOptions};
use assign_core::ttc::{run_fpttc, run_rule};
use assign_core::apda::run_apda_rule;
use assign_core::{
    AgentId, Allocation, Item, Market, PreferenceDomain, PriorityOrder, PriorityStructure,
    RuleTable,
};
use common::*;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

type Check = Result<(), String>;

fn ensure(cond: bool, what: impl Into<String>) -> Check {
    if cond {
        Ok(())
    } else {
        Err(what.into())
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn found(m: &Market, rule: &RuleTable, d: &PreferenceDomain, req: &str) -> Result<bool, String> {
    let req = Requirements::parse(req).map_err(err)?;
    let out = search_mechanism(m, rule, d, req, &SearchOptions::default()).map_err(err)?;
    if let Some(g) = &out.mechanism {
        let mut props = vec![Property::Valid, Property::Implements, Property::Osp];
        if req.sosp {
            props.push(Property::Sosp);
        }
        if req.simple {
            props.push(Property::Simple);
        }
        for v in g.verify(&props, Some(rule)).map_err(err)? {
            ensure(v.holds, format!("synthesized tree fails {}", v.property))?;
        }
    }
    Ok(out.found())
}

fn walkthrough() -> Check {
    let (m, s) = market("fpttc_walkthrough_market.json");
    let p = profile(&m, "fpttc_walkthrough_profile.json");
    let t0 = Instant::now();
    let trace = run_fpttc(&m, &s, &p).map_err(err)?;
    let took = t0.elapsed();
    let want = Allocation::parse(&m, &["@0", "@0", "a1", "a3"]).map_err(err)?;
    ensure(trace.allocation == want, "allocation differs")?;
    ensure(trace.steps.len() == 3, format!("{} steps", trace.steps.len()))?;
    let ag = |n: &str| m.agent(n).unwrap();
    let ob = |n: &str| m.object(n).unwrap();
    let step2: BTreeMap<_, _> = [
        (ag("2"), vec![ob("a2")]),
        (ag("3"), vec![ob("a3")]),
        (ag("4"), vec![ob("a1"), ob("a4")]),
    ]
    .into_iter()
    .collect();
    ensure(trace.steps[1].ownership == step2, "step 2 ownership differs")?;
    ensure(took < Duration::from_millis(1), format!("took {took:?}"))
}

fn dual_ownership_gap() -> Check {
    let (m, s) = market("dual_ownership_gap_market.json");
    let d = PreferenceDomain::no_outside(&m);
    ensure(d.profile_count() == Some(331_776), "profile count")?;
    let r = check_dual_ownership(&m, &s, &d).map_err(err)?;
    ensure(r.holds, "fails without the outside option")?;
    ensure(r.profiles_checked == 331_776, format!("{} profiles checked", r.profiles_checked))?;
    let p = profile(&m, "dual_ownership_gap_profile.json");
    ensure(PreferenceDomain::with_outside(&m).contains(&p), "witness outside domain")?;
    let w = dual_ownership_at(&m, &s, &p).map_err(err)?.ok_or("no violation at witness")?;
    let owners: Vec<_> = w.owners.iter().map(|&a| m.agent_name(a)).collect();
    ensure(w.step == 2 && owners == ["i1", "i2", "i3"], format!("step {} owners {owners:?}", w.step))
}

fn dotted_fill(m: &Market, rng: &mut StdRng) -> PriorityStructure {
    let ag = |n: &str| m.agent(n).unwrap();
    let fixed: [&[&str]; 5] = [
        &["i4", "i1"],
        &["i4", "i2"],
        &["i4", "i3"],
        &["i5", "i4"],
        &["i5"],
    ];
    let orders = fixed
        .iter()
        .map(|head| {
            let mut col: Vec<AgentId> = head.iter().map(|n| ag(n)).collect();
            let mut rest: Vec<AgentId> = m.agents().filter(|a| !col.contains(a)).collect();
            rest.shuffle(rng);
            col.extend(rest);
            PriorityOrder::new(m, col).unwrap()
        })
        .collect();
    PriorityStructure::new(m, orders).unwrap()
}

fn cycles() -> Check {
    let (m, s) = market("weak_cycle_acyclic_market.json");
    let ag = |n: &str| m.agent(n).unwrap();
    let ob = |n: &str| m.object(n).unwrap();
    let want = WeakCycleWitness {
        agents: [ag("i"), ag("j"), ag("k")],
        objects: [ob("a"), ob("b"), ob("c")],
    };
    ensure(find_weak_cycle(&s) == Some(want), "weak cycle differs")?;
    ensure(find_priority_cycle(&s).map_err(err)?.is_none(), "unexpected priority cycle")?;

    let (m, s) = market("ergin_cycle_market.json");
    let ag = |n: &str| m.agent(n).unwrap();
    let ob = |n: &str| m.object(n).unwrap();
    let listed = ErginCycleWitness {
        agents: [ag("i"), ag("k"), ag("j")],
        objects: [ob("b"), ob("c")],
    };
    ensure(listed.is_valid(&s), "listed Ergin cycle invalid")?;
    ensure(find_ergin_cycle(&s).is_some(), "no Ergin cycle found")?;
    ensure(all_ergin_cycles(&s).contains(&listed), "listed Ergin cycle not enumerated")?;
    ensure(find_weak_cycle(&s).is_none(), "unexpected weak cycle")?;

    let (_, s) = market("strongly_acyclic_market.json");
    ensure(find_weak_cycle(&s).is_none(), "unexpected weak cycle")?;

    let m = bare_market("priority_cycle_support_market.json");
    let mut rng = StdRng::seed_from_u64(3);
    for fill in 0..100 {
        let s = dotted_fill(&m, &mut rng);
        let w = find_priority_cycle(&s).map_err(err)?.ok_or(format!("fill {fill}: none"))?;
        ensure(w.is_valid(&s), format!("fill {fill}: invalid witness"))?;
    }
    Ok(())
}

fn theorem_sweep() -> Check {
    let r = verify_characterizations(3, 3, 3).map_err(err)?;
    ensure(r.structures == 216, format!("{} structures", r.structures))?;
    match r.counterexamples.first() {
        None => Ok(()),
        Some(c) => Err(format!(
            "{} counterexamples, first #{}: {:?}",
            r.counterexamples.len(),
            c.structure_index,
            c.failures
        )),
    }
}

fn mechanisms() -> Check {
    let g = mechanism("osp_not_sosp_mechanism.json");
    ensure(g.validate().holds, "first tree invalid")?;
    ensure(g.check_osp().map_err(err)?.holds, "first tree not OSP")?;
    let sosp = g.check_sosp().map_err(err)?;
    ensure(!sosp.holds, "first tree SOSP")?;
    let node = sosp.witness.map(|w| w.node).unwrap_or_default();
    ensure(node == "v1", format!("witness at {node}"))?;
    ensure(!g.check_simple().holds, "first tree simple")?;

    let g = mechanism("serial_dictatorship_mechanism.json");
    let (m, s) = market("serial_dictatorship_market.json");
    ensure(is_serial_dictatorship(&s), "market not serial")?;
    let rule = run_rule(&m, &s, &PreferenceDomain::no_outside(&m)).map_err(err)?;
    for v in g
        .verify(&[Property::Valid, Property::Sosp, Property::Simple, Property::Implements], Some(&rule))
        .map_err(err)?
    {
        ensure(v.holds, format!("serial tree fails {}", v.property))?;
    }

    let g = mechanism("sosp_not_simple_mechanism.json");
    let (m, s) = market("two_agent_market.json");
    let d = domain(&m, "two_agent_domain.json");
    let rule = run_rule(&m, &s, &d).map_err(err)?;
    ensure(g.validate().holds, "two-agent tree invalid")?;
    ensure(g.check_sosp().map_err(err)?.holds, "two-agent tree not SOSP")?;
    ensure(!g.check_simple().holds, "two-agent tree simple")?;
    ensure(g.implements(&rule).map_err(err)?.holds, "two-agent tree misses the rule")?;
    let rows = outcomes(&m, "two_agent_outcomes.json");
    ensure(rows.len() == 7, "row count")?;
    for (k, (p, want)) in rows.iter().enumerate() {
        ensure(rule.outcome(&d, p) == Some(want), format!("row {} differs", k + 1))?;
    }
    Ok(())
}

fn synthesis_sweep() -> Check {
    let market = Market::with_sizes(3, 3);
    let d = PreferenceDomain::no_outside(&market);
    let all = PriorityStructure::enumerate_all(&market);
    ensure(all.len() == 216, "structure count")?;
    let pick: Vec<usize> = match std::env::var("ACCEPTANCE_SAMPLE").ok().and_then(|v| v.parse().ok()) {
        Some(k) => {
            let k: usize = std::cmp::max(k, 50).min(all.len());
            (0..k).map(|j| j * all.len() / k).collect()
        }
        None => (0..all.len()).collect(),
    };
    for &k in &pick {
        let s = &all[k];
        let rule = run_rule(&market, s, &d).map_err(err)?;
        let sosp = found(&market, &rule, &d, "sosp")?;
        let simple = found(&market, &rule, &d, "simple,osp")?;
        let rank = wsd_rank_condition(s).holds;
        ensure(sosp == rank, format!("structure #{k}: SOSP {sosp}, rank condition {rank}"))?;
        ensure(simple == sosp, format!("structure #{k}: simple-OSP {simple}, SOSP {sosp}"))?;
    }
    if pick.len() < all.len() {
        println!("  (sampled {} of {} structures)", pick.len(), all.len());
    }
    Ok(())
}

fn negative_two_agent() -> Check {
    let (m, s) = market("two_agent_market.json");
    let d = domain(&m, "two_agent_domain.json");
    let rule = run_rule(&m, &s, &d).map_err(err)?;
    ensure(!found(&m, &rule, &d, "simple,osp")?, "simple OSP tree found")?;
    ensure(found(&m, &rule, &d, "sosp")?, "no SOSP tree")
}

fn negative_deferred_acceptance() -> Check {
    let (m, s) = market("deferred_acceptance_cycle_market.json");
    let d = domain(&m, "deferred_acceptance_cycle_domain.json");
    for (k, (p, want)) in outcomes(&m, "deferred_acceptance_cycle_outcomes.json").iter().enumerate() {
        let (got, _) = run_apda(&m, &s, p).map_err(err)?;
        ensure(&got == want, format!("row {} differs", k + 1))?;
    }
    let rule = run_apda_rule(&m, &s, &d).map_err(err)?;
    ensure(!found(&m, &rule, &d, "osp")?, "OSP tree found")
}

fn negative_non_serial() -> Check {
    let (m, s) = market("non_serial_outside_market.json");
    ensure(!is_serial_dictatorship(&s), "structure is serial")?;
    let d = domain(&m, "non_serial_outside_domain.json");
    for (k, (p, want)) in outcomes(&m, "non_serial_outside_outcomes.json").iter().enumerate() {
        let got = run_fpttc(&m, &s, p).map_err(err)?.allocation;
        ensure(&got == want, format!("row {} differs", k + 1))?;
    }
    let rule = run_rule(&m, &s, &d).map_err(err)?;
    ensure(!found(&m, &rule, &d, "sosp")?, "SOSP tree found")
}

fn negative_table_rule(mech: &str, rows: &str) -> Check {
    let g = mechanism(mech);
    ensure(g.validate().holds, "tree invalid")?;
    ensure(g.check_sosp().map_err(err)?.holds, "tree not SOSP")?;
    let m = g.market().clone();
    let rows = outcomes(&m, rows);
    for (k, (p, want)) in rows.iter().enumerate() {
        ensure(&g.run(p).map_err(err)? == want, format!("row {} differs", k + 1))?;
    }
    let d = product_of_rows(&m, &rows);
    let rule = RuleTable::tabulate(&d, |p| g.run(p)).map_err(err)?;
    ensure(found(&m, &rule, &d, "sosp")?, "no SOSP tree on the table domain")?;
    ensure(!found(&m, &rule, &d, "simple,osp")?, "simple OSP tree found")
}

fn property_suites() -> Check {
    let mut rng = StdRng::seed_from_u64(0x5eed);
    for case in 0..1000 {
        let n = rng.gen_range(1..=4);
        let k = rng.gen_range(1..=4);
        let m = Market::with_sizes(n, k);
        let s = random_structure(&m, &mut rng);
        let tag = |what: &str| format!("case {case} ({n}x{k}): {what}");
        for _ in 0..8 {
            let outside_last = rng.gen_bool(0.3);
            let p = random_profile(&m, &mut rng, outside_last);
            let trace = run_fpttc(&m, &s, &p).map_err(err)?;
            let a = &trace.allocation;
            ensure(a.is_feasible(), tag("infeasible"))?;
            ensure(
                m.agents().all(|i| p.get(i).weakly_prefers(&m, a.get(i), Item::Outside)),
                tag("not individually rational"),
            )?;
            let mut left = (n + 1, k + 1);
            for st in &trace.steps {
                let now = (st.remaining_agents.len(), st.remaining_objects.len());
                ensure(now.0 < left.0 && now.1 <= left.1, tag("market grew"))?;
                ensure(!st.assigned_agents.is_empty(), tag("empty step"))?;
                left = now;
            }
            let (da, rounds) = run_apda(&m, &s, &p).map_err(err)?;
            ensure(da.is_feasible(), tag("infeasible APDA"))?;
            ensure(
                m.agents().all(|i| p.get(i).weakly_prefers(&m, da.get(i), Item::Outside)),
                tag("APDA not individually rational"),
            )?;
            let apps: usize = rounds.iter().map(|r| r.applications.len()).sum();
            ensure(apps <= n * (k + 1), tag("APDA bound"))?;
        }
        let fast = find_priority_cycle(&s).map_err(err)?.map(|w| w.cycle);
        let slow = find_priority_cycle_bruteforce(&s).map_err(err)?.map(|w| w.cycle);
        ensure(fast == slow, tag("priority cycle search disagrees"))?;

        let small = Market::with_sizes(n.min(3), k.min(3));
        let d = random_domain(&small, &mut rng, 4);
        let g = random_mechanism(&small, &d, &mut rng);
        let osp = g.check_osp().map_err(err)?.holds;
        let sosp = g.check_sosp().map_err(err)?.holds;
        ensure(osp == g.check_osp_naive().map_err(err)?.holds, tag("OSP checkers disagree"))?;
        ensure(sosp == g.check_sosp_naive().map_err(err)?.holds, tag("SOSP checkers disagree"))?;
    }
    Ok(())
}

type Criterion = (&'static str, Duration, fn() -> Check);

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("1 walkthrough replay", Duration::from_secs(1), walkthrough),
        ("2 dual ownership gap", Duration::from_secs(30), dual_ownership_gap),
        ("3 cycle fixtures", Duration::from_secs(1), cycles),
        ("4 theorem sweep 3x3", Duration::from_secs(600), theorem_sweep),
        ("5 mechanism fixtures", Duration::from_secs(1), mechanisms),
        ("6 synthesis sweep 3x3", Duration::from_secs(1800), synthesis_sweep),
        ("7a two-agent rule", Duration::from_secs(60), negative_two_agent),
        ("7b cyclic deferred acceptance", Duration::from_secs(60), negative_deferred_acceptance),
        ("7c non-serial with outside option", Duration::from_secs(60), negative_non_serial),
        ("7d restricted table rule", Duration::from_secs(60), || {
            negative_table_rule("restricted_sosp_mechanism.json", "restricted_sosp_outcomes.json")
        }),
        ("7e outside-option table rule", Duration::from_secs(60), || {
            negative_table_rule("outside_option_sosp_mechanism.json", "outside_option_sosp_outcomes.json")
        }),
        ("8 property suites", Duration::from_secs(300), property_suites),
    ];
    let mut failed = 0;
    for (name, budget, run) in criteria {
        let t0 = Instant::now();
        let mut result = run();
        let took = t0.elapsed();
        if result.is_ok() && took > budget {
            result = Err(format!("over budget {budget:?}"));
        }
        match result {
            Ok(()) => println!("PASS {name} ({took:.2?})"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name} ({took:.2?}): {why}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

#![allow(dead_code)]

use std::path::PathBuf;

use assign_core::json::{
    allocation_from_value, parse_domain, parse_market, parse_market_with_priorities, parse_profile,
    profile_from_value,
};
use assign_core::mechanism::{Edge, Mechanism, Node, NodeKind, PrefSet};
use assign_core::{
    AgentId, Allocation, Item, Market, Preference, PreferenceDomain, PreferenceProfile,
    PriorityOrder, PriorityStructure,
};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::Value;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

pub fn fixture(name: &str) -> String {
    std::fs::read_to_string(fixture_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn fixture_names() -> Vec<String> {
    let dir = fixture_path("");
    let mut names: Vec<String> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".json"))
        .collect();
    names.sort();
    names
}

pub fn market(name: &str) -> (Market, PriorityStructure) {
    parse_market_with_priorities(&fixture(name)).unwrap()
}

pub fn bare_market(name: &str) -> Market {
    parse_market(&fixture(name)).unwrap().0
}

pub fn profile(m: &Market, name: &str) -> PreferenceProfile {
    parse_profile(m, &fixture(name)).unwrap()
}

pub fn domain(m: &Market, name: &str) -> PreferenceDomain {
    parse_domain(m, &fixture(name)).unwrap()
}

pub fn mechanism(name: &str) -> Mechanism {
    Mechanism::parse(&fixture(name), None).unwrap()
}

/// `[{"profile": .., "allocation": ..}]` rows.
pub fn outcomes(m: &Market, name: &str) -> Vec<(PreferenceProfile, Allocation)> {
    let rows: Value = serde_json::from_str(&fixture(name)).unwrap();
    rows.as_array()
        .unwrap()
        .iter()
        .map(|r| {
            (
                profile_from_value(m, &r["profile"]).unwrap(),
                allocation_from_value(m, &r["allocation"]).unwrap(),
            )
        })
        .collect()
}

/// Product of the preferences each agent uses somewhere in `rows`.
pub fn product_of_rows(m: &Market, rows: &[(PreferenceProfile, Allocation)]) -> PreferenceDomain {
    let sets = m
        .agents()
        .map(|a| rows.iter().map(|(p, _)| p.get(a).clone()).collect())
        .collect();
    PreferenceDomain::explicit(m, sets).unwrap()
}

pub fn random_structure(m: &Market, rng: &mut StdRng) -> PriorityStructure {
    let orders = m
        .objects()
        .map(|_| {
            let mut r: Vec<AgentId> = m.agents().collect();
            r.shuffle(rng);
            PriorityOrder::new(m, r).unwrap()
        })
        .collect();
    PriorityStructure::new(m, orders).unwrap()
}

pub fn random_preference(m: &Market, rng: &mut StdRng, outside_last: bool) -> Preference {
    let mut r: Vec<Item> = m.objects().map(Item::Object).collect();
    r.shuffle(rng);
    if outside_last {
        r.push(Item::Outside);
    } else {
        r.insert(rng.gen_range(0..=r.len()), Item::Outside);
    }
    Preference::new(m, r).unwrap()
}

pub fn random_profile(m: &Market, rng: &mut StdRng, outside_last: bool) -> PreferenceProfile {
    let prefs = m.agents().map(|_| random_preference(m, rng, outside_last)).collect();
    PreferenceProfile::new(m, prefs).unwrap()
}

pub fn random_allocation(m: &Market, rng: &mut StdRng) -> Allocation {
    let mut pool: Vec<Item> = m.objects().map(Item::Object).collect();
    pool.shuffle(rng);
    let items = m
        .agents()
        .map(|_| {
            if !pool.is_empty() && rng.gen_bool(0.75) {
                pool.pop().unwrap()
            } else {
                Item::Outside
            }
        })
        .collect();
    Allocation::new(m, items).unwrap()
}

/// Each agent gets one to `cap` distinct preferences.
pub fn random_domain(m: &Market, rng: &mut StdRng, cap: usize) -> PreferenceDomain {
    let sets = m
        .agents()
        .map(|_| {
            let k = rng.gen_range(1..=cap);
            (0..k).map(|_| random_preference(m, rng, false)).collect()
        })
        .collect();
    PreferenceDomain::explicit(m, sets).unwrap()
}

/// A valid game tree over `d`: at each node a random agent splits her
/// current set into random blocks.
pub fn random_mechanism(m: &Market, d: &PreferenceDomain, rng: &mut StdRng) -> Mechanism {
    struct Builder<'a> {
        m: &'a Market,
        nodes: Vec<Node>,
        edges: Vec<Edge>,
    }
    impl Builder<'_> {
        fn grow(&mut self, sets: Vec<PrefSet>, depth: usize, rng: &mut StdRng) -> usize {
            let id = self.nodes.len();
            let splittable: Vec<usize> = (0..sets.len()).filter(|&i| sets[i].len() > 1).collect();
            if depth == 0 || splittable.is_empty() || rng.gen_bool(0.2) {
                self.nodes.push(Node {
                    id: format!("n{id}"),
                    kind: NodeKind::Leaf(random_allocation(self.m, rng)),
                });
                return id;
            }
            let i = *splittable.choose(rng).unwrap();
            self.nodes.push(Node {
                id: format!("n{id}"),
                kind: NodeKind::Move(AgentId(i)),
            });
            let k = rng.gen_range(1..=sets[i].len().min(3));
            let mut blocks = vec![PrefSet::new(); k];
            for &p in &sets[i] {
                blocks[rng.gen_range(0..k)].insert(p);
            }
            for block in blocks.into_iter().filter(|b| !b.is_empty()) {
                let mut child = sets.clone();
                child[i] = block.clone();
                let to = self.grow(child, depth - 1, rng);
                self.edges.push(Edge { from: id, to, label: block });
            }
            id
        }
    }
    let mut b = Builder {
        m,
        nodes: Vec::new(),
        edges: Vec::new(),
    };
    let full = m.agents().map(|a| (0..d.size(a)).collect()).collect();
    let depth = rng.gen_range(1..=5);
    let root = b.grow(full, depth, rng);
    Mechanism::new(m.clone(), d.clone(), b.nodes, b.edges, root).unwrap()
}

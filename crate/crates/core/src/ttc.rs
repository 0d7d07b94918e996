//! Top trading cycles with fixed priorities.
//!
//! At every step each remaining object is owned by its highest priority
//! remaining agent. Each remaining agent points at the owner of her favourite
//! remaining acceptable object, or at herself when none is acceptable. All
//! cycles of that single pointer graph trade at once, then ownership is
//! recomputed on the reduced market.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::json::{agent_names, allocation_to_value};
use crate::model::{
    AgentId, Allocation, Item, Market, ObjectId, Preference, PreferenceDomain, PreferenceProfile,
    PriorityStructure,
};
use crate::rule::RuleTable;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepRecord {
    /// One-based.
    pub step: usize,
    pub remaining_agents: Vec<AgentId>,
    pub remaining_objects: Vec<ObjectId>,
    pub ownership: BTreeMap<AgentId, Vec<ObjectId>>,
    pub pointers: BTreeMap<AgentId, AgentId>,
    pub cycles: Vec<Vec<AgentId>>,
    pub assigned_agents: Vec<AgentId>,
    pub assigned_objects: Vec<ObjectId>,
    pub assignments: BTreeMap<AgentId, Item>,
}

impl StepRecord {
    /// Agents owning at least one object at this step.
    pub fn owners(&self) -> BTreeSet<AgentId> {
        self.ownership.keys().copied().collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FpttcTrace {
    pub steps: Vec<StepRecord>,
    pub allocation: Allocation,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoundOutcome {
    pub pointers: BTreeMap<AgentId, AgentId>,
    pub cycles: Vec<Vec<AgentId>>,
    pub assignments: BTreeMap<AgentId, Item>,
}

/// Marks the agents lying on a cycle of the functional graph `pointer`
/// restricted to `alive`.
pub(crate) fn cycle_members(pointer: &[usize], alive: &[bool]) -> Vec<bool> {
    // 0 unvisited, 1 on the current walk, 2 finished
    let n = pointer.len();
    let mut state = vec![0u8; n];
    let mut on_cycle = vec![false; n];
    let mut walk = Vec::new();
    for start in 0..n {
        if !alive[start] || state[start] != 0 {
            continue;
        }
        let mut cur = start;
        while state[cur] == 0 {
            state[cur] = 1;
            walk.push(cur);
            cur = pointer[cur];
        }
        if state[cur] == 1 {
            let mut c = cur;
            loop {
                on_cycle[c] = true;
                c = pointer[c];
                if c == cur {
                    break;
                }
            }
        }
        for w in walk.drain(..) {
            state[w] = 2;
        }
    }
    on_cycle
}

/// Cycles listed from their smallest agent, sorted by that agent.
fn extract_cycles(pointer: &[usize], on_cycle: &[bool]) -> Vec<Vec<AgentId>> {
    let mut seen = vec![false; pointer.len()];
    let mut cycles = Vec::new();
    for start in 0..pointer.len() {
        if !on_cycle[start] || seen[start] {
            continue;
        }
        let mut cycle = Vec::new();
        let mut c = start;
        while !seen[c] {
            seen[c] = true;
            cycle.push(AgentId(c));
            c = pointer[c];
        }
        cycles.push(cycle);
    }
    cycles
}

/// Favourite among the flagged objects and the outside option.
fn top_remaining(p: &Preference, alive_objects: &[bool]) -> Item {
    p.ranking()
        .iter()
        .copied()
        .find(|it| match it {
            Item::Object(o) => alive_objects[o.0],
            Item::Outside => true,
        })
        .expect("rankings contain the outside option")
}

/// One trading round given explicit endowments.
pub fn ttc_round(
    market: &Market,
    owners: &BTreeMap<AgentId, Vec<ObjectId>>,
    prefs: &BTreeMap<AgentId, Preference>,
) -> Result<RoundOutcome> {
    let n = market.n_agents();
    let mut alive = vec![false; n];
    for &a in prefs.keys() {
        market.check_agent(a)?;
        alive[a.0] = true;
    }
    let mut owner_of = vec![usize::MAX; market.n_objects()];
    for (&a, objs) in owners {
        if !alive.get(a.0).copied().unwrap_or(false) {
            return Err(Error::Invariant(format!(
                "owner #{} has no preference in this round",
                a.0
            )));
        }
        for &o in objs {
            let slot = owner_of
                .get_mut(o.0)
                .ok_or_else(|| Error::UnknownItem(format!("#{}", o.0)))?;
            if *slot != usize::MAX {
                return Err(Error::Invariant(format!(
                    "object `{}` has two owners",
                    market.object_name(o)
                )));
            }
            *slot = a.0;
        }
    }
    let alive_objects: Vec<bool> = owner_of.iter().map(|&w| w != usize::MAX).collect();

    let mut pointer: Vec<usize> = (0..n).collect();
    let mut target = vec![Item::Outside; n];
    for (&a, p) in prefs {
        target[a.0] = top_remaining(p, &alive_objects);
        if let Item::Object(o) = target[a.0] {
            pointer[a.0] = owner_of[o.0];
        }
    }
    let on_cycle = cycle_members(&pointer, &alive);
    Ok(RoundOutcome {
        pointers: prefs
            .keys()
            .map(|&a| (a, AgentId(pointer[a.0])))
            .collect(),
        cycles: extract_cycles(&pointer, &on_cycle),
        assignments: prefs
            .keys()
            .filter(|a| on_cycle[a.0])
            .map(|&a| (a, target[a.0]))
            .collect(),
    })
}

/// State of one step handed to observers of the fast engine.
pub(crate) struct StepView<'a> {
    pub alive_agents: &'a [bool],
    pub alive_objects: &'a [bool],
    /// Owner per object; meaningful for alive objects only.
    pub owner_of: &'a [usize],
    pub pointer: &'a [usize],
    pub target: &'a [Item],
    pub on_cycle: &'a [bool],
}

/// Runs the rule, invoking `observe` at every step. Returning `false` from the
/// observer stops the run early and yields `None`.
pub(crate) fn fpttc_observed(
    s: &PriorityStructure,
    p: &PreferenceProfile,
    mut observe: impl FnMut(usize, &StepView<'_>) -> bool,
) -> Option<Allocation> {
    let n = p.len();
    let m = s.n_objects();
    let mut alive_agents = vec![true; n];
    let mut alive_objects = vec![true; m];
    let mut agents_left = n;
    let mut objects_left = m;
    let mut owner_of = vec![usize::MAX; m];
    let mut pointer = vec![0usize; n];
    let mut target = vec![Item::Outside; n];
    let mut result = vec![Item::Outside; n];
    let mut step = 0;
    while agents_left > 0 && objects_left > 0 {
        step += 1;
        for o in 0..m {
            if alive_objects[o] {
                owner_of[o] = s
                    .order(ObjectId(o))
                    .top_alive(&alive_agents)
                    .expect("an agent remains")
                    .0;
            }
        }
        for i in 0..n {
            if !alive_agents[i] {
                continue;
            }
            target[i] = top_remaining(p.get(AgentId(i)), &alive_objects);
            pointer[i] = match target[i] {
                Item::Object(o) => owner_of[o.0],
                Item::Outside => i,
            };
        }
        let on_cycle = cycle_members(&pointer, &alive_agents);
        let view = StepView {
            alive_agents: &alive_agents,
            alive_objects: &alive_objects,
            owner_of: &owner_of,
            pointer: &pointer,
            target: &target,
            on_cycle: &on_cycle,
        };
        if !observe(step, &view) {
            return None;
        }
        for i in 0..n {
            if on_cycle[i] {
                result[i] = target[i];
                alive_agents[i] = false;
                agents_left -= 1;
                if let Item::Object(o) = target[i] {
                    alive_objects[o.0] = false;
                    objects_left -= 1;
                }
            }
        }
    }
    Some(Allocation::from_items_unchecked(result))
}

fn check_inputs(market: &Market, s: &PriorityStructure, p: &PreferenceProfile) -> Result<()> {
    s.check_market(market)?;
    if p.len() != market.n_agents() {
        return Err(Error::MarketMismatch(format!(
            "profile has {} agents, market has {}",
            p.len(),
            market.n_agents()
        )));
    }
    Ok(())
}

/// Final allocation only.
pub fn fpttc_allocation(
    market: &Market,
    s: &PriorityStructure,
    p: &PreferenceProfile,
) -> Result<Allocation> {
    check_inputs(market, s, p)?;
    Ok(fpttc_observed(s, p, |_, _| true).expect("observer never stops"))
}

pub fn run_fpttc(market: &Market, s: &PriorityStructure, p: &PreferenceProfile) -> Result<FpttcTrace> {
    check_inputs(market, s, p)?;
    let mut steps = Vec::new();
    let allocation = fpttc_observed(s, p, |step, v| {
        let remaining_agents: Vec<AgentId> = (0..v.alive_agents.len())
            .filter(|&i| v.alive_agents[i])
            .map(AgentId)
            .collect();
        let remaining_objects: Vec<ObjectId> = (0..v.alive_objects.len())
            .filter(|&o| v.alive_objects[o])
            .map(ObjectId)
            .collect();
        let mut ownership: BTreeMap<AgentId, Vec<ObjectId>> = BTreeMap::new();
        for &o in &remaining_objects {
            ownership.entry(AgentId(v.owner_of[o.0])).or_default().push(o);
        }
        let assigned_agents: Vec<AgentId> = remaining_agents
            .iter()
            .copied()
            .filter(|a| v.on_cycle[a.0])
            .collect();
        let assignments: BTreeMap<AgentId, Item> = assigned_agents
            .iter()
            .map(|&a| (a, v.target[a.0]))
            .collect();
        let mut assigned_objects: Vec<ObjectId> =
            assignments.values().filter_map(|it| it.object()).collect();
        assigned_objects.sort();
        steps.push(StepRecord {
            step,
            pointers: remaining_agents
                .iter()
                .map(|&a| (a, AgentId(v.pointer[a.0])))
                .collect(),
            cycles: extract_cycles(v.pointer, v.on_cycle),
            remaining_agents,
            remaining_objects,
            ownership,
            assigned_agents,
            assigned_objects,
            assignments,
        });
        true
    })
    .expect("observer never stops");
    Ok(FpttcTrace { steps, allocation })
}

/// The rule tabulated on every profile of `d`.
pub fn run_rule(market: &Market, s: &PriorityStructure, d: &PreferenceDomain) -> Result<RuleTable> {
    s.check_market(market)?;
    RuleTable::tabulate(d, |p| Ok(fpttc_observed(s, p, |_, _| true).expect("never stops")))
}

pub fn step_to_value(market: &Market, r: &StepRecord) -> Value {
    let objects = |os: &[ObjectId]| -> Value {
        Value::Array(os.iter().map(|&o| json!(market.object_name(o))).collect())
    };
    let mut ownership = Map::new();
    for (&a, os) in &r.ownership {
        ownership.insert(market.agent_name(a).to_string(), objects(os));
    }
    let mut pointers = Map::new();
    for (&a, &b) in &r.pointers {
        pointers.insert(market.agent_name(a).to_string(), json!(market.agent_name(b)));
    }
    let mut assignments = Map::new();
    for (&a, &it) in &r.assignments {
        assignments.insert(market.agent_name(a).to_string(), json!(market.item_name(it)));
    }
    json!({
        "step": r.step,
        "remaining_agents": agent_names(market, r.remaining_agents.iter().copied()),
        "remaining_objects": objects(&r.remaining_objects),
        "ownership": ownership,
        "pointers": pointers,
        "cycles": r.cycles.iter().map(|c| agent_names(market, c.iter().copied())).collect::<Vec<_>>(),
        "assigned_agents": agent_names(market, r.assigned_agents.iter().copied()),
        "assigned_objects": objects(&r.assigned_objects),
        "assignments": assignments,
    })
}

pub fn trace_to_value(market: &Market, t: &FpttcTrace) -> Value {
    json!({
        "allocation": allocation_to_value(market, &t.allocation),
        "steps": t.steps.iter().map(|r| step_to_value(market, r)).collect::<Vec<_>>(),
    })
}

//! Agent-proposing deferred acceptance with simultaneous proposals.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::json::agent_names;
use crate::model::{
    AgentId, Allocation, Item, Market, ObjectId, PreferenceDomain, PreferenceProfile,
    PriorityStructure,
};
use crate::rule::RuleTable;
use crate::ttc::fpttc_observed;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ApdaRoundRecord {
    /// One-based.
    pub round: usize,
    pub applications: BTreeMap<AgentId, Item>,
    /// Holders after this round.
    pub tentative_holders: BTreeMap<ObjectId, AgentId>,
    /// New applicants and displaced holders turned away this round.
    pub rejected: BTreeSet<AgentId>,
    /// Agents who applied to the outside option this round.
    pub finalized_outside: BTreeSet<AgentId>,
}

fn apda_core(
    s: &PriorityStructure,
    p: &PreferenceProfile,
    mut records: Option<&mut Vec<ApdaRoundRecord>>,
) -> Allocation {
    let n = p.len();
    let m = s.n_objects();
    let mut next = vec![0usize; n];
    let mut holder: Vec<Option<usize>> = vec![None; m];
    let mut assigned = vec![Item::Outside; n];
    let mut applicants: Vec<usize> = (0..n).collect();
    let mut round = 0;
    while !applicants.is_empty() {
        round += 1;
        let mut applications = BTreeMap::new();
        let mut rejected_now = BTreeSet::new();
        let mut outside_now = BTreeSet::new();
        for &i in &applicants {
            let item = p.get(AgentId(i)).ranking()[next[i]];
            applications.insert(AgentId(i), item);
        }
        for (&AgentId(i), &item) in &applications {
            match item {
                Item::Outside => {
                    assigned[i] = Item::Outside;
                    outside_now.insert(AgentId(i));
                }
                Item::Object(o) => {
                    let order = s.order(o);
                    match holder[o.0] {
                        Some(h) if order.prefers(AgentId(h), AgentId(i)) => {
                            rejected_now.insert(AgentId(i));
                        }
                        prev => {
                            if let Some(h) = prev {
                                rejected_now.insert(AgentId(h));
                            }
                            holder[o.0] = Some(i);
                        }
                    }
                }
            }
        }
        if let Some(rs) = records.as_deref_mut() {
            rs.push(ApdaRoundRecord {
                round,
                applications,
                tentative_holders: holder
                    .iter()
                    .enumerate()
                    .filter_map(|(o, h)| h.map(|h| (ObjectId(o), AgentId(h))))
                    .collect(),
                rejected: rejected_now.clone(),
                finalized_outside: outside_now,
            });
        }
        applicants = rejected_now.into_iter().map(|a| a.0).collect();
        for &i in &applicants {
            next[i] += 1;
        }
    }
    for (o, h) in holder.iter().enumerate() {
        if let Some(h) = h {
            assigned[*h] = Item::Object(ObjectId(o));
        }
    }
    Allocation::from_items_unchecked(assigned)
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

pub fn run_apda(
    market: &Market,
    s: &PriorityStructure,
    p: &PreferenceProfile,
) -> Result<(Allocation, Vec<ApdaRoundRecord>)> {
    check_inputs(market, s, p)?;
    let mut records = Vec::new();
    let alloc = apda_core(s, p, Some(&mut records));
    Ok((alloc, records))
}

pub fn apda_allocation(market: &Market, s: &PriorityStructure, p: &PreferenceProfile) -> Result<Allocation> {
    check_inputs(market, s, p)?;
    Ok(apda_core(s, p, None))
}

pub fn run_apda_rule(market: &Market, s: &PriorityStructure, d: &PreferenceDomain) -> Result<RuleTable> {
    s.check_market(market)?;
    RuleTable::tabulate(d, |p| Ok(apda_core(s, p, None)))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Disagreement {
    pub index: usize,
    pub profile: PreferenceProfile,
    pub fpttc: Allocation,
    pub apda: Allocation,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EquivalenceReport {
    pub equal: bool,
    pub witness: Option<Disagreement>,
    pub profiles_checked: usize,
}

/// Compares both rules on every profile; reports the first disagreement in
/// enumeration order.
pub fn apda_equals_fpttc(
    market: &Market,
    s: &PriorityStructure,
    d: &PreferenceDomain,
) -> Result<EquivalenceReport> {
    s.check_market(market)?;
    let count = d
        .profile_count()
        .ok_or_else(|| Error::LimitExceeded("profile count overflows".into()))?;
    let first = (0..count).into_par_iter().find_first(|&k| {
        let p = d.profile_at(k);
        apda_core(s, &p, None) != fpttc_observed(s, &p, |_, _| true).expect("never stops")
    });
    let witness = first.map(|k| {
        let profile = d.profile_at(k);
        Disagreement {
            index: k,
            fpttc: fpttc_observed(s, &profile, |_, _| true).expect("never stops"),
            apda: apda_core(s, &profile, None),
            profile,
        }
    });
    Ok(EquivalenceReport {
        equal: witness.is_none(),
        profiles_checked: first.map_or(count, |k| k + 1),
        witness,
    })
}

pub fn rounds_to_value(market: &Market, rounds: &[ApdaRoundRecord]) -> Value {
    Value::Array(
        rounds
            .iter()
            .map(|r| {
                let mut apps = Map::new();
                for (&a, &it) in &r.applications {
                    apps.insert(market.agent_name(a).to_string(), json!(market.item_name(it)));
                }
                let mut holders = Map::new();
                for (&o, &a) in &r.tentative_holders {
                    holders.insert(market.object_name(o).to_string(), json!(market.agent_name(a)));
                }
                json!({
                    "round": r.round,
                    "applications": apps,
                    "tentative_holders": holders,
                    "rejected": agent_names(market, r.rejected.iter().copied()),
                    "finalized_outside": agent_names(market, r.finalized_outside.iter().copied()),
                })
            })
            .collect(),
    )
}

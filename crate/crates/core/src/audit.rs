//! Behavioural audits of the fixed-priority TTC rule over a domain, and the
//! exhaustive cross-check of the structural characterizations.

use std::collections::{BTreeSet, HashSet};

use rayon::prelude::*;
use serde_json::{json, Value};

use crate::apda::apda_equals_fpttc;
use crate::error::{Error, Result};
use crate::json::{agent_names, profile_to_value};
use crate::model::{
    AgentId, DomainKind, Item, Market, ObjectId, Preference, PreferenceDomain, PreferenceProfile, PriorityStructure,
};
use crate::priority::{
    find_ergin_cycle, find_priority_cycle, find_weak_cycle, is_dual_dictatorship,
    wsd_rank_condition,
};
use crate::rule::{first_disagreement, RuleTable};
use crate::ttc::{cycle_members, fpttc_observed, run_fpttc, StepView};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuditWitness {
    pub profile_index: usize,
    pub profile: PreferenceProfile,
    /// One-based step of the violation.
    pub step: usize,
    pub owners: BTreeSet<AgentId>,
    pub remaining_objects: Vec<ObjectId>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuditReport {
    pub property: &'static str,
    pub holds: bool,
    pub witness: Option<AuditWitness>,
    pub profiles_checked: usize,
}

fn owners_of(v: &StepView<'_>) -> BTreeSet<AgentId> {
    v.alive_objects
        .iter()
        .enumerate()
        .filter(|(_, &alive)| alive)
        .map(|(o, _)| AgentId(v.owner_of[o]))
        .collect()
}

/// First step of the run at `p` where `violates(remaining objects, owners)`.
fn first_violation(
    s: &PriorityStructure,
    p: &PreferenceProfile,
    violates: &(impl Fn(usize, usize) -> bool + Sync),
) -> Option<usize> {
    let mut hit = None;
    fpttc_observed(s, p, |step, v| {
        let objects_left = v.alive_objects.iter().filter(|&&a| a).count();
        if violates(objects_left, owners_of(v).len()) {
            hit = Some(step);
            false
        } else {
            true
        }
    });
    hit
}

fn audit(
    property: &'static str,
    market: &Market,
    s: &PriorityStructure,
    d: &PreferenceDomain,
    violates: impl Fn(usize, usize) -> bool + Sync,
) -> Result<AuditReport> {
    s.check_market(market)?;
    if d.n_agents() != market.n_agents() {
        return Err(Error::MarketMismatch("domain and market disagree on agents".into()));
    }
    let count = d
        .profile_count()
        .ok_or_else(|| Error::LimitExceeded("profile count overflows".into()))?;
    let first = (0..count)
        .into_par_iter()
        .find_first(|&k| first_violation(s, &d.profile_at(k), &violates).is_some());
    let witness = match first {
        None => None,
        Some(k) => {
            let profile = d.profile_at(k);
            Some(witness_from_trace(market, s, k, profile, &violates)?)
        }
    };
    Ok(AuditReport {
        property,
        holds: witness.is_none(),
        witness,
        profiles_checked: first.map_or(count, |k| k + 1),
    })
}

/// Rebuilds the witness from a fresh full trace rather than the fast engine.
fn witness_from_trace(
    market: &Market,
    s: &PriorityStructure,
    profile_index: usize,
    profile: PreferenceProfile,
    violates: &impl Fn(usize, usize) -> bool,
) -> Result<AuditWitness> {
    let trace = run_fpttc(market, s, &profile)?;
    let step = trace
        .steps
        .iter()
        .find(|r| violates(r.remaining_objects.len(), r.ownership.len()))
        .ok_or_else(|| Error::Invariant("violation did not reproduce on the full trace".into()))?;
    Ok(AuditWitness {
        profile_index,
        step: step.step,
        owners: step.owners(),
        remaining_objects: step.remaining_objects.clone(),
        profile,
    })
}

fn too_many_owners(_objects_left: usize, owners: usize) -> bool {
    owners > 2
}

fn not_single_owner(objects_left: usize, owners: usize) -> bool {
    objects_left > 2 && owners != 1
}

/// At every step of every profile at most two agents own the remaining objects.
pub fn check_dual_ownership(
    market: &Market,
    s: &PriorityStructure,
    d: &PreferenceDomain,
) -> Result<AuditReport> {
    audit("dual-ownership", market, s, d, too_many_owners)
}

/// Dual ownership at one profile: the first offending step, if any.
pub fn dual_ownership_at(
    market: &Market,
    s: &PriorityStructure,
    p: &PreferenceProfile,
) -> Result<Option<AuditWitness>> {
    s.check_market(market)?;
    match first_violation(s, p, &too_many_owners) {
        None => Ok(None),
        Some(_) => witness_from_trace(market, s, usize::MAX, p.clone(), &too_many_owners).map(Some),
    }
}

/// Whenever more than two objects remain a single agent owns them all.
/// Stated on domains where every object is acceptable.
pub fn check_weak_serial_dictatorship(
    market: &Market,
    s: &PriorityStructure,
    d: &PreferenceDomain,
) -> Result<AuditReport> {
    if !d.is_outside_last() {
        return Err(Error::Input(
            "weak serial dictatorship is defined on domains ranking the outside option last".into(),
        ));
    }
    audit("weak-serial-dictatorship", market, s, d, not_single_owner)
}

/// Dual ownership over a full domain, exploring distinct executions of the
/// rule instead of every profile. At each step only agents whose previous top
/// is gone need to reveal anything, so executions are enumerated by those
/// choices. `profiles_checked` counts execution states visited.
pub fn check_dual_ownership_reachable(
    market: &Market,
    s: &PriorityStructure,
    d: &PreferenceDomain,
) -> Result<AuditReport> {
    audit_reachable("dual-ownership", market, s, d, too_many_owners)
}

/// Weak serial dictatorship on the no-outside domain via reachable executions.
pub fn check_weak_serial_dictatorship_reachable(
    market: &Market,
    s: &PriorityStructure,
    d: &PreferenceDomain,
) -> Result<AuditReport> {
    if d.kind() != DomainKind::NoOutside {
        return Err(Error::Input(
            "weak serial dictatorship is defined on domains ranking the outside option last".into(),
        ));
    }
    audit_reachable("weak-serial-dictatorship", market, s, d, not_single_owner)
}

/// Alive agents, alive objects, and each agent's standing top.
type ExecutionState = (Vec<bool>, Vec<bool>, Vec<Option<Item>>);

struct Explorer<'a, F> {
    s: &'a PriorityStructure,
    outside: bool,
    violates: F,
    seen: HashSet<ExecutionState>,
}

impl<F: Fn(usize, usize) -> bool> Explorer<'_, F> {
    /// Depth first over executions; returns each agent's revealed tops at the
    /// first violating state.
    fn explore(&mut self, agents: &[bool], objects: &[bool], tops: &mut [Vec<Item>]) -> Option<Vec<Vec<Item>>> {
        let n = agents.len();
        let objects_left = objects.iter().filter(|&&a| a).count();
        if objects_left == 0 || !agents.contains(&true) {
            return None;
        }
        let current: Vec<Option<Item>> = (0..n)
            .map(|i| {
                let t = *tops[i].last()?;
                (agents[i] && t.object().is_none_or(|o| objects[o.0])).then_some(t)
            })
            .collect();
        if !self.seen.insert((agents.to_vec(), objects.to_vec(), current.clone())) {
            return None;
        }
        let owner_of: Vec<usize> = (0..objects.len())
            .map(|o| {
                if objects[o] {
                    self.s.order(ObjectId(o)).top_alive(agents).map_or(usize::MAX, |a| a.0)
                } else {
                    usize::MAX
                }
            })
            .collect();
        let owners: BTreeSet<usize> = owner_of.iter().copied().filter(|&a| a != usize::MAX).collect();
        if (self.violates)(objects_left, owners.len()) {
            return Some(tops.to_vec());
        }
        let needy: Vec<usize> = (0..n).filter(|&i| agents[i] && current[i].is_none()).collect();
        let mut choices: Vec<Item> = (0..objects.len()).filter(|&o| objects[o]).map(|o| Item::Object(ObjectId(o))).collect();
        if self.outside {
            choices.push(Item::Outside);
        }
        let mut digits = vec![0usize; needy.len()];
        loop {
            for (&i, &c) in needy.iter().zip(&digits) {
                tops[i].push(choices[c]);
            }
            let mut pointer = vec![0usize; n];
            for i in (0..n).filter(|&i| agents[i]) {
                pointer[i] = match *tops[i].last().expect("every agent has a top") {
                    Item::Object(o) => owner_of[o.0],
                    Item::Outside => i,
                };
            }
            let on_cycle = cycle_members(&pointer, agents);
            let mut next_agents = agents.to_vec();
            let mut next_objects = objects.to_vec();
            for i in (0..n).filter(|&i| on_cycle[i]) {
                next_agents[i] = false;
                if let Item::Object(o) = *tops[i].last().expect("every agent has a top") {
                    next_objects[o.0] = false;
                }
            }
            let hit = self.explore(&next_agents, &next_objects, tops);
            for &i in &needy {
                tops[i].pop();
            }
            if hit.is_some() {
                return hit;
            }
            let d = digits.iter().position(|&c| c + 1 < choices.len())?;
            digits[d] += 1;
            digits[..d].fill(0);
        }
    }
}

fn audit_reachable(
    property: &'static str,
    market: &Market,
    s: &PriorityStructure,
    d: &PreferenceDomain,
    violates: fn(usize, usize) -> bool,
) -> Result<AuditReport> {
    s.check_market(market)?;
    if d.n_agents() != market.n_agents() {
        return Err(Error::MarketMismatch("domain and market disagree on agents".into()));
    }
    let outside = match d.kind() {
        DomainKind::NoOutside => false,
        DomainKind::WithOutside => true,
        DomainKind::Explicit => {
            return Err(Error::Input("the reachable audit needs a full preference domain".into()))
        }
    };
    let mut explorer = Explorer {
        s,
        outside,
        violates,
        seen: HashSet::new(),
    };
    let mut tops = vec![Vec::new(); market.n_agents()];
    let hit = explorer.explore(&vec![true; market.n_agents()], &vec![true; market.n_objects()], &mut tops);
    let profiles_checked = explorer.seen.len();
    let witness = match hit {
        None => None,
        Some(tops) => {
            let prefs = tops
                .into_iter()
                .map(|mut ranking| {
                    ranking.extend(market.items().filter(|it| !ranking.contains(it)).collect::<Vec<_>>());
                    Preference::new(market, ranking)
                })
                .collect::<Result<Vec<_>>>()?;
            let profile = PreferenceProfile::new(market, prefs)?;
            let k = d
                .index_of(&profile)
                .ok_or_else(|| Error::Invariant("reachable witness left the domain".into()))?;
            Some(witness_from_trace(market, s, k, profile, &violates)?)
        }
    };
    Ok(AuditReport {
        property,
        holds: witness.is_none(),
        witness,
        profiles_checked,
    })
}

/// Replays a witness and checks that it still violates `property`.
pub fn witness_reproduces(
    market: &Market,
    s: &PriorityStructure,
    report: &AuditReport,
) -> Result<bool> {
    let Some(w) = &report.witness else {
        return Ok(true);
    };
    let violates: fn(usize, usize) -> bool = match report.property {
        "dual-ownership" => too_many_owners,
        "weak-serial-dictatorship" => not_single_owner,
        other => return Err(Error::Input(format!("unknown audit property `{other}`"))),
    };
    let trace = run_fpttc(market, s, &w.profile)?;
    Ok(trace.steps.get(w.step - 1).is_some_and(|r| {
        r.owners() == w.owners && violates(r.remaining_objects.len(), r.ownership.len())
    }))
}

/// Pointwise equality of two tabulated rules; the first differing profile index on failure.
pub fn rules_equal(a: &RuleTable, b: &RuleTable) -> (bool, Option<usize>) {
    let k = first_disagreement(a, b);
    (k.is_none(), k)
}

pub fn audit_report_to_value(market: &Market, r: &AuditReport) -> Value {
    let witness = r.witness.as_ref().map(|w| {
        json!({
            "profile": profile_to_value(market, &w.profile),
            "step": w.step,
            "owners": agent_names(market, w.owners.iter().copied()),
            "remaining_objects": w.remaining_objects.iter().map(|&o| market.object_name(o)).collect::<Vec<_>>(),
        })
    });
    json!({
        "property": r.property,
        "holds": r.holds,
        "profiles_checked": r.profiles_checked,
        "witness": witness,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StructureFacts {
    pub acyclic: bool,
    pub strongly_acyclic: bool,
    pub ergin_acyclic: bool,
    pub dual_dictatorship: bool,
    pub rank_condition: bool,
    pub dual_ownership_no_outside: bool,
    pub dual_ownership_with_outside: bool,
    pub weak_serial_dictatorship: bool,
    pub apda_equals_fpttc: bool,
}

impl StructureFacts {
    pub fn compute(market: &Market, s: &PriorityStructure) -> Result<Self> {
        let no = PreferenceDomain::no_outside(market);
        let with = PreferenceDomain::with_outside(market);
        Ok(Self {
            acyclic: find_priority_cycle(s)?.is_none(),
            strongly_acyclic: find_weak_cycle(s).is_none(),
            ergin_acyclic: find_ergin_cycle(s).is_none(),
            dual_dictatorship: is_dual_dictatorship(s)?.holds,
            rank_condition: wsd_rank_condition(s).holds,
            dual_ownership_no_outside: check_dual_ownership(market, s, &no)?.holds,
            dual_ownership_with_outside: check_dual_ownership(market, s, &with)?.holds,
            weak_serial_dictatorship: check_weak_serial_dictatorship(market, s, &no)?.holds,
            apda_equals_fpttc: apda_equals_fpttc(market, s, &with)?.equal,
        })
    }

    /// Names of the characterizations this structure contradicts.
    pub fn failures(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.dual_ownership_no_outside != self.acyclic {
            out.push("dual ownership without outside option <=> acyclic");
        }
        if self.dual_ownership_with_outside != self.strongly_acyclic
            || self.strongly_acyclic != self.dual_dictatorship
        {
            out.push("dual ownership with outside option <=> strongly acyclic <=> dual dictatorship");
        }
        if self.weak_serial_dictatorship != self.rank_condition {
            out.push("weak serial dictatorship <=> rank condition");
        }
        if (self.ergin_acyclic && !self.strongly_acyclic) || (self.strongly_acyclic && !self.acyclic)
        {
            out.push("ergin-acyclic => strongly acyclic => acyclic");
        }
        if self.apda_equals_fpttc != self.ergin_acyclic {
            out.push("deferred acceptance equals TTC <=> ergin-acyclic");
        }
        if self.dual_ownership_with_outside && !self.dual_ownership_no_outside {
            out.push("dual ownership with outside option => without");
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct Counterexample {
    pub structure_index: usize,
    pub structure: PriorityStructure,
    pub failures: Vec<&'static str>,
}

#[derive(Clone, Debug)]
pub struct CharacterizationReport {
    pub n: usize,
    pub m: usize,
    pub structures: usize,
    pub facts: Vec<StructureFacts>,
    pub counterexamples: Vec<Counterexample>,
}

impl CharacterizationReport {
    pub fn holds(&self) -> bool {
        self.counterexamples.is_empty()
    }

    pub fn count(&self, pick: impl Fn(&StructureFacts) -> bool) -> usize {
        self.facts.iter().filter(|f| pick(f)).count()
    }
}

fn factorial(k: usize) -> u128 {
    (1..=k as u128).product()
}

/// Structures and profile evaluations needed for an `(n, m)` sweep.
pub fn sweep_size(n: usize, m: usize) -> (u128, u128) {
    let structures = factorial(n).saturating_pow(m as u32);
    let per = factorial(m).saturating_pow(n as u32) * 3 + factorial(m + 1).saturating_pow(n as u32) * 2;
    (structures, structures.saturating_mul(per))
}

/// Checks every characterization on every priority structure with `n`
/// agents and `m` objects.
pub fn verify_characterizations(n: usize, m: usize, limit: usize) -> Result<CharacterizationReport> {
    if n == 0 || m == 0 {
        return Err(Error::Input("need at least one agent and one object".into()));
    }
    if n > limit || m > limit {
        let (structures, runs) = sweep_size(n, m);
        return Err(Error::LimitExceeded(format!(
            "n={n}, m={m} exceeds the limit {limit}: {structures} structures, about {runs} rule evaluations"
        )));
    }
    let market = Market::with_sizes(n, m);
    let all = PriorityStructure::enumerate_all(&market);
    let facts = all
        .par_iter()
        .map(|s| StructureFacts::compute(&market, s))
        .collect::<Result<Vec<_>>>()?;
    let counterexamples = facts
        .iter()
        .enumerate()
        .filter_map(|(k, f)| {
            let failures = f.failures();
            (!failures.is_empty()).then(|| Counterexample {
                structure_index: k,
                structure: all[k].clone(),
                failures,
            })
        })
        .collect();
    Ok(CharacterizationReport {
        n,
        m,
        structures: all.len(),
        facts,
        counterexamples,
    })
}

pub fn characterization_report_to_value(r: &CharacterizationReport) -> Value {
    let market = Market::with_sizes(r.n, r.m);
    json!({
        "n": r.n,
        "m": r.m,
        "structures": r.structures,
        "holds": r.holds(),
        "counts": {
            "acyclic": r.count(|f| f.acyclic),
            "strongly_acyclic": r.count(|f| f.strongly_acyclic),
            "ergin_acyclic": r.count(|f| f.ergin_acyclic),
            "dual_dictatorship": r.count(|f| f.dual_dictatorship),
            "wsd_rank_condition": r.count(|f| f.rank_condition),
            "dual_ownership_no_outside": r.count(|f| f.dual_ownership_no_outside),
            "dual_ownership_with_outside": r.count(|f| f.dual_ownership_with_outside),
            "weak_serial_dictatorship": r.count(|f| f.weak_serial_dictatorship),
            "apda_equals_fpttc": r.count(|f| f.apda_equals_fpttc),
        },
        "counterexamples": r.counterexamples.iter().map(|c| json!({
            "index": c.structure_index,
            "priorities": crate::json::priorities_to_value(&market, &c.structure),
            "failures": c.failures,
        })).collect::<Vec<_>>(),
    })
}

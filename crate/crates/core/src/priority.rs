//! Structural properties of priority structures: the three cycle notions,
//! dual dictatorship, the rank condition and serial dictatorship.
//!
//! Witnesses are searched in lexicographic order of market declaration
//! indices, agents before objects.

use std::collections::{BTreeSet, HashSet};

use itertools::Itertools;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::json::agent_names;
use crate::model::{AgentId, Market, ObjectId, PriorityStructure};

/// `agents[h]` beats the other two under `objects[h]`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct WeakCycleWitness {
    pub agents: [AgentId; 3],
    pub objects: [ObjectId; 3],
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PriorityCycleWitness {
    pub cycle: WeakCycleWitness,
    /// Supporting (agent, object) pairs; empty when each cycle agent tops her object.
    pub support: Vec<(AgentId, ObjectId)>,
}

/// `i1 ≻_{a1} i2 ≻_{a1} i3` and `i3 ≻_{a2} i1`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct ErginCycleWitness {
    pub agents: [AgentId; 3],
    pub objects: [ObjectId; 2],
}

fn distinct<T: Eq + std::hash::Hash>(xs: impl IntoIterator<Item = T>) -> bool {
    xs.into_iter().all_unique()
}

impl WeakCycleWitness {
    pub fn is_valid(&self, s: &PriorityStructure) -> bool {
        if !distinct(self.agents) || !distinct(self.objects) {
            return false;
        }
        if self.agents.iter().any(|a| a.0 >= s.n_agents())
            || self.objects.iter().any(|o| o.0 >= s.n_objects())
        {
            return false;
        }
        (0..3).all(|h| {
            let order = s.order(self.objects[h]);
            (0..3)
                .filter(|&g| g != h)
                .all(|g| order.prefers(self.agents[h], self.agents[g]))
        })
    }
}

impl PriorityCycleWitness {
    pub fn is_valid(&self, s: &PriorityStructure) -> bool {
        let agents: Vec<AgentId> = self
            .cycle
            .agents
            .iter()
            .copied()
            .chain(self.support.iter().map(|p| p.0))
            .collect();
        let objects: Vec<ObjectId> = self
            .cycle
            .objects
            .iter()
            .copied()
            .chain(self.support.iter().map(|p| p.1))
            .collect();
        if !distinct(agents.iter()) || !distinct(objects.iter()) {
            return false;
        }
        if agents.iter().any(|a| a.0 >= s.n_agents()) || objects.iter().any(|o| o.0 >= s.n_objects())
        {
            return false;
        }
        let support_agents: BTreeSet<AgentId> = self.support.iter().map(|p| p.0).collect();
        agents.iter().zip(&objects).all(|(&i, &o)| {
            s.order(o)
                .upper_contour(i)
                .map(|u| u.is_subset(&support_agents))
                .unwrap_or(false)
        })
    }
}

impl ErginCycleWitness {
    pub fn is_valid(&self, s: &PriorityStructure) -> bool {
        let [i1, i2, i3] = self.agents;
        let [a1, a2] = self.objects;
        if !distinct(self.agents) || a1 == a2 {
            return false;
        }
        if self.agents.iter().any(|a| a.0 >= s.n_agents())
            || self.objects.iter().any(|o| o.0 >= s.n_objects())
        {
            return false;
        }
        s.order(a1).prefers(i1, i2) && s.order(a1).prefers(i2, i3) && s.order(a2).prefers(i3, i1)
    }
}

fn ordered_triples(n: usize) -> impl Iterator<Item = [usize; 3]> {
    (0..n)
        .flat_map(move |a| (0..n).flat_map(move |b| (0..n).map(move |c| [a, b, c])))
        .filter(|[a, b, c]| a != b && b != c && a != c)
}

/// Objects under which `agents[h]` beats the other two, per `h`.
fn winning_objects(s: &PriorityStructure, agents: [usize; 3]) -> [Vec<usize>; 3] {
    let mut out: [Vec<usize>; 3] = Default::default();
    for (h, slot) in out.iter_mut().enumerate() {
        for o in 0..s.n_objects() {
            let order = s.order(ObjectId(o));
            if (0..3)
                .filter(|&g| g != h)
                .all(|g| order.prefers(AgentId(agents[h]), AgentId(agents[g])))
            {
                slot.push(o);
            }
        }
    }
    out
}

/// Distinct object triples drawn from the per-position candidate lists, in
/// lexicographic order.
fn object_triples(cands: &[Vec<usize>; 3]) -> impl Iterator<Item = [usize; 3]> + '_ {
    cands[0].iter().flat_map(move |&x| {
        cands[1].iter().flat_map(move |&y| {
            cands[2]
                .iter()
                .map(move |&z| [x, y, z])
                .filter(|[x, y, z]| x != y && y != z && x != z)
        })
    })
}

fn weak_cycles_iter(s: &PriorityStructure) -> impl Iterator<Item = WeakCycleWitness> + '_ {
    ordered_triples(s.n_agents()).flat_map(move |agents| {
        let cands = winning_objects(s, agents);
        object_triples(&cands)
            .map(|objects| WeakCycleWitness {
                agents: agents.map(AgentId),
                objects: objects.map(ObjectId),
            })
            .collect::<Vec<_>>()
    })
}

/// Lexicographically first weak cycle; `None` means strongly acyclic.
pub fn find_weak_cycle(s: &PriorityStructure) -> Option<WeakCycleWitness> {
    weak_cycles_iter(s).next()
}

pub fn all_weak_cycles(s: &PriorityStructure) -> Vec<WeakCycleWitness> {
    weak_cycles_iter(s).collect()
}

fn ergin_cycles_iter(s: &PriorityStructure) -> impl Iterator<Item = ErginCycleWitness> + '_ {
    let m = s.n_objects();
    ordered_triples(s.n_agents()).flat_map(move |[i1, i2, i3]| {
        let (i1, i2, i3) = (AgentId(i1), AgentId(i2), AgentId(i3));
        (0..m)
            .flat_map(move |a1| (0..m).map(move |a2| (a1, a2)))
            .filter(move |&(a1, a2)| {
                let (o1, o2) = (s.order(ObjectId(a1)), s.order(ObjectId(a2)));
                a1 != a2 && o1.prefers(i1, i2) && o1.prefers(i2, i3) && o2.prefers(i3, i1)
            })
            .map(move |(a1, a2)| ErginCycleWitness {
                agents: [i1, i2, i3],
                objects: [ObjectId(a1), ObjectId(a2)],
            })
    })
}

/// Lexicographically first Ergin cycle; `None` means Ergin-acyclic.
pub fn find_ergin_cycle(s: &PriorityStructure) -> Option<ErginCycleWitness> {
    ergin_cycles_iter(s).next()
}

pub fn all_ergin_cycles(s: &PriorityStructure) -> Vec<ErginCycleWitness> {
    ergin_cycles_iter(s).collect()
}

fn check_width(s: &PriorityStructure) -> Result<()> {
    if s.n_agents() > 64 || s.n_objects() > 64 {
        return Err(Error::LimitExceeded(
            "cycle search supports at most 64 agents and 64 objects".into(),
        ));
    }
    Ok(())
}

struct SupportSearch<'a> {
    s: &'a PriorityStructure,
    /// contour[o][i]: agents ranked above i under o, as a bitmask.
    contour: Vec<Vec<u64>>,
    triple: u64,
    failed: HashSet<(u64, u64, u64)>,
}

impl SupportSearch<'_> {
    /// `needed` agents must all receive distinct unused objects whose upper
    /// contour stays inside the growing support.
    fn extend(
        &mut self,
        needed: u64,
        assigned: u64,
        used: u64,
        pairs: &mut Vec<(AgentId, ObjectId)>,
    ) -> bool {
        let open = needed & !assigned;
        if open == 0 {
            return true;
        }
        if self.failed.contains(&(needed, assigned, used)) {
            return false;
        }
        let j = open.trailing_zeros() as usize;
        for o in 0..self.s.n_objects() {
            if used >> o & 1 == 1 {
                continue;
            }
            let above = self.contour[o][j];
            if above & self.triple != 0 {
                continue;
            }
            pairs.push((AgentId(j), ObjectId(o)));
            if self.extend(needed | above, assigned | 1 << j, used | 1 << o, pairs) {
                return true;
            }
            pairs.pop();
        }
        self.failed.insert((needed, assigned, used));
        false
    }
}

fn contour_masks(s: &PriorityStructure) -> Vec<Vec<u64>> {
    s.orders()
        .iter()
        .map(|order| {
            let mut masks = vec![0u64; s.n_agents()];
            let mut above = 0u64;
            for &a in order.ranking() {
                masks[a.0] = above;
                above |= 1 << a.0;
            }
            masks
        })
        .collect()
}

/// First weak cycle (in lexicographic order) admitting a support, with the
/// support built greedily by smallest agent then smallest object.
/// `None` means acyclic.
pub fn find_priority_cycle(s: &PriorityStructure) -> Result<Option<PriorityCycleWitness>> {
    check_width(s)?;
    let contour = contour_masks(s);
    for cycle in weak_cycles_iter(s) {
        let triple = cycle.agents.iter().fold(0u64, |m, a| m | 1 << a.0);
        let used = cycle.objects.iter().fold(0u64, |m, o| m | 1 << o.0);
        let needed = (0..3).fold(0u64, |m, h| m | contour[cycle.objects[h].0][cycle.agents[h].0]);
        let mut search = SupportSearch {
            s,
            contour: contour.clone(),
            triple,
            failed: HashSet::new(),
        };
        let mut pairs = Vec::new();
        if search.extend(needed, 0, used, &mut pairs) {
            pairs.sort();
            return Ok(Some(PriorityCycleWitness {
                cycle,
                support: pairs,
            }));
        }
    }
    Ok(None)
}

/// Exhaustive oracle: every triple, every support subset, every injection.
pub fn find_priority_cycle_bruteforce(s: &PriorityStructure) -> Result<Option<PriorityCycleWitness>> {
    let (n, m) = (s.n_agents(), s.n_objects());
    if n > 7 || m > 7 {
        return Err(Error::LimitExceeded(
            "brute-force cycle search supports at most 7 agents and 7 objects".into(),
        ));
    }
    for agents in ordered_triples(n) {
        for objects in (0..m).permutations(3) {
            let cycle = WeakCycleWitness {
                agents: agents.map(AgentId),
                objects: [ObjectId(objects[0]), ObjectId(objects[1]), ObjectId(objects[2])],
            };
            if !cycle.is_valid(s) {
                continue;
            }
            let rest_agents: Vec<usize> = (0..n).filter(|a| !agents.contains(a)).collect();
            let rest_objects: Vec<usize> = (0..m).filter(|o| !objects.contains(o)).collect();
            for k in 0..=rest_agents.len().min(rest_objects.len()) {
                for support_agents in rest_agents.iter().copied().combinations(k) {
                    for support_objects in rest_objects.iter().copied().permutations(k) {
                        let w = PriorityCycleWitness {
                            cycle: cycle.clone(),
                            support: support_agents
                                .iter()
                                .zip(&support_objects)
                                .map(|(&a, &o)| (AgentId(a), ObjectId(o)))
                                .collect(),
                        };
                        if w.is_valid(s) {
                            return Ok(Some(w));
                        }
                    }
                }
            }
        }
    }
    Ok(None)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DualDictatorshipReport {
    pub holds: bool,
    /// Sub-market with three or more top agents.
    pub witness: Option<(Vec<AgentId>, Vec<ObjectId>)>,
}

/// Whether at most two agents top every reduced structure. Adding objects can
/// only add top agents, so only the full object set is inspected; agent
/// subsets are scanned by increasing bitmask.
pub fn is_dual_dictatorship(s: &PriorityStructure) -> Result<DualDictatorshipReport> {
    let n = s.n_agents();
    if n > 24 {
        return Err(Error::LimitExceeded(format!(
            "dual dictatorship check enumerates 2^{n} agent subsets"
        )));
    }
    let objects: Vec<ObjectId> = (0..s.n_objects()).map(ObjectId).collect();
    for mask in 1u32..(1 << n) {
        if mask.count_ones() < 3 {
            continue;
        }
        let agents: Vec<AgentId> = (0..n).filter(|i| mask >> i & 1 == 1).map(AgentId).collect();
        if s.top_owners(&agents, &objects)?.len() > 2 {
            return Ok(DualDictatorshipReport {
                holds: false,
                witness: Some((agents, objects)),
            });
        }
    }
    Ok(DualDictatorshipReport {
        holds: true,
        witness: None,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RankConditionReport {
    pub holds: bool,
    /// `(i, a, b)` with `rank(i, ≻_a) ≤ |A| - 2` but a different rank under `≻_b`.
    pub witness: Option<(AgentId, ObjectId, ObjectId)>,
}

pub fn wsd_rank_condition(s: &PriorityStructure) -> RankConditionReport {
    let m = s.n_objects();
    for i in (0..s.n_agents()).map(AgentId) {
        for a in (0..m).map(ObjectId) {
            let ra = s.order(a).rank_unchecked(i);
            if ra + 2 > m {
                continue;
            }
            for b in (0..m).map(ObjectId) {
                if s.order(b).rank_unchecked(i) != ra {
                    return RankConditionReport {
                        holds: false,
                        witness: Some((i, a, b)),
                    };
                }
            }
        }
    }
    RankConditionReport {
        holds: true,
        witness: None,
    }
}

/// All priority orders identical.
pub fn is_serial_dictatorship(s: &PriorityStructure) -> bool {
    s.orders().iter().all_equal()
}

#[derive(Clone, Debug)]
pub struct StructureReport {
    pub priority_cycle: Option<PriorityCycleWitness>,
    pub weak_cycle: Option<WeakCycleWitness>,
    pub ergin_cycle: Option<ErginCycleWitness>,
    pub dual_dictatorship: DualDictatorshipReport,
    pub serial_dictatorship: bool,
    pub rank_condition: RankConditionReport,
}

pub fn analyze_structure(s: &PriorityStructure) -> Result<StructureReport> {
    Ok(StructureReport {
        priority_cycle: find_priority_cycle(s)?,
        weak_cycle: find_weak_cycle(s),
        ergin_cycle: find_ergin_cycle(s),
        dual_dictatorship: is_dual_dictatorship(s)?,
        serial_dictatorship: is_serial_dictatorship(s),
        rank_condition: wsd_rank_condition(s),
    })
}

fn objects_value(market: &Market, os: impl IntoIterator<Item = ObjectId>) -> Value {
    Value::Array(os.into_iter().map(|o| json!(market.object_name(o))).collect())
}

pub fn weak_cycle_to_value(market: &Market, w: &WeakCycleWitness) -> Value {
    json!({
        "agents": agent_names(market, w.agents),
        "objects": objects_value(market, w.objects),
    })
}

pub fn structure_report_to_value(market: &Market, r: &StructureReport) -> Value {
    let mut witnesses = serde_json::Map::new();
    if let Some(w) = &r.priority_cycle {
        let support: Vec<Value> = w
            .support
            .iter()
            .map(|&(a, o)| json!([market.agent_name(a), market.object_name(o)]))
            .collect();
        let mut v = weak_cycle_to_value(market, &w.cycle);
        v["support"] = Value::Array(support);
        witnesses.insert("priority_cycle".into(), v);
    }
    if let Some(w) = &r.weak_cycle {
        witnesses.insert("weak_cycle".into(), weak_cycle_to_value(market, w));
    }
    if let Some(w) = &r.ergin_cycle {
        witnesses.insert(
            "ergin_cycle".into(),
            json!({
                "agents": agent_names(market, w.agents),
                "objects": objects_value(market, w.objects),
            }),
        );
    }
    if let Some((agents, objects)) = &r.dual_dictatorship.witness {
        witnesses.insert(
            "dual_dictatorship".into(),
            json!({
                "agents": agent_names(market, agents.iter().copied()),
                "objects": objects_value(market, objects.iter().copied()),
            }),
        );
    }
    if let Some((i, a, b)) = r.rank_condition.witness {
        witnesses.insert(
            "wsd_rank_condition".into(),
            json!({
                "agent": market.agent_name(i),
                "objects": objects_value(market, [a, b]),
            }),
        );
    }
    json!({
        "acyclic": r.priority_cycle.is_none(),
        "strongly_acyclic": r.weak_cycle.is_none(),
        "ergin_acyclic": r.ergin_cycle.is_none(),
        "dual_dictatorship": r.dual_dictatorship.holds,
        "serial_dictatorship": r.serial_dictatorship,
        "wsd_rank_condition": r.rank_condition.holds,
        "witnesses": witnesses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Market;

    fn structure<C: AsRef<[&'static str]>>(agents: &[&str], columns: &[C]) -> (Market, PriorityStructure) {
        let m = Market::new(
            agents.iter().map(|a| a.to_string()).collect(),
            (1..=columns.len()).map(|k| format!("o{k}")).collect(),
        )
        .unwrap();
        let s = PriorityStructure::from_columns(&m, columns).unwrap();
        (m, s)
    }

    #[test]
    fn identical_columns_have_no_cycles() {
        let (_, s) = structure(&["1", "2", "3"], &[&["1", "2", "3"]; 3]);
        assert!(find_weak_cycle(&s).is_none());
        assert!(find_ergin_cycle(&s).is_none());
        assert!(find_priority_cycle(&s).unwrap().is_none());
        assert!(is_dual_dictatorship(&s).unwrap().holds);
        assert!(is_serial_dictatorship(&s));
        assert!(wsd_rank_condition(&s).holds);
    }

    #[test]
    fn distinct_tops_give_unsupported_cycle() {
        let (_, s) = structure(
            &["1", "2", "3"],
            &[&["1", "2", "3"], &["2", "3", "1"], &["3", "1", "2"]],
        );
        let w = find_priority_cycle(&s).unwrap().unwrap();
        assert!(w.support.is_empty());
        assert!(w.is_valid(&s));
    }

    #[test]
    fn rank_condition_only_constrains_low_ranks() {
        let (_, s) = structure(
            &["1", "2", "3"],
            &[&["1", "2", "3"], &["1", "2", "3"], &["1", "3", "2"]],
        );
        assert!(wsd_rank_condition(&s).holds);
        assert!(!is_serial_dictatorship(&s));
    }

    #[test]
    fn rank_condition_witness_order() {
        let (_, s) = structure(
            &["1", "2", "3", "4"],
            &[
                &["1", "4", "3", "2"],
                &["2", "1", "3", "4"],
                &["3", "2", "4", "1"],
                &["4", "3", "2", "1"],
            ],
        );
        let r = wsd_rank_condition(&s);
        assert_eq!(r.witness, Some((AgentId(0), ObjectId(0), ObjectId(1))));
    }

    #[test]
    fn two_agents_are_always_dual_dictatorial() {
        let (_, s) = structure(&["1", "2"], &[&["1", "2"], &["2", "1"], &["2", "1"]]);
        assert!(is_dual_dictatorship(&s).unwrap().holds);
        assert!(find_weak_cycle(&s).is_none());
    }

    #[test]
    fn single_column_is_serial() {
        let (_, s) = structure(&["1", "2", "3"], &[&["2", "3", "1"]]);
        assert!(is_serial_dictatorship(&s));
    }

    #[test]
    fn validators_reject_tampered_witnesses() {
        let (_, s) = structure(
            &["1", "2", "3"],
            &[&["1", "2", "3"], &["2", "3", "1"], &["3", "1", "2"]],
        );
        let w = find_weak_cycle(&s).unwrap();
        assert!(w.is_valid(&s));
        let mut bad = w.clone();
        bad.objects.swap(0, 1);
        assert!(!bad.is_valid(&s));
        let e = find_ergin_cycle(&s).unwrap();
        assert!(e.is_valid(&s));
        let mut bad = e.clone();
        bad.agents.swap(1, 2);
        assert!(!bad.is_valid(&s));
    }
}

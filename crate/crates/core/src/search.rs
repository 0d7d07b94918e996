//! Existence search for mechanisms implementing a tabulated rule.
//!
//! Any implementing mechanism induces exactly the rule, so the outcome of a
//! subtree is determined by the product of each agent's still-possible
//! preferences. Search therefore runs over those products: a state is a leaf
//! when the rule is constant on it, otherwise some mover must split her set
//! into at least two blocks meeting the local dominance conditions, and every
//! block must again be solvable.
//!
//! Solvability is inherited by sub-states (restrict the tree and drop edges
//! that become empty), so for OSP the finest admissible split suffices. Two
//! preferences must share a block exactly when separating them breaks the
//! dominance inequality for one of them, which makes the finest split the
//! connected components of that conflict relation. The strong variant has no
//! such pairwise form and enumerates every set partition.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::mechanism::{Edge, Mechanism, Node, NodeKind, PrefSet};
use crate::model::{AgentId, Allocation, Market, PreferenceDomain, PriorityStructure};
use crate::rule::RuleTable;
use crate::ttc::run_rule;

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq)]
pub struct Requirements {
    pub simple: bool,
    pub osp: bool,
    pub sosp: bool,
}

impl Requirements {
    /// Comma separated subset of `simple`, `osp`, `sosp`.
    pub fn parse(list: &str) -> Result<Self> {
        let mut r = Self::default();
        for tok in list.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            match tok {
                "simple" => r.simple = true,
                "osp" => r.osp = true,
                "sosp" => r.sosp = true,
                other => return Err(Error::Input(format!("unknown requirement `{other}`"))),
            }
        }
        Ok(r)
    }

    pub fn names(&self) -> Vec<&'static str> {
        [(self.simple, "simple"), (self.osp, "osp"), (self.sosp, "sosp")]
            .into_iter()
            .filter_map(|(on, n)| on.then_some(n))
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct SearchOptions {
    pub max_profiles: usize,
    /// Also try one-block splits; they only consume a move, so this is only
    /// meaningful together with `simple`.
    pub allow_single_edge: bool,
    /// Largest set that the strong variant will partition exhaustively.
    pub max_partition_size: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            max_profiles: 4096,
            allow_single_edge: false,
            max_partition_size: 10,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SearchOutcome {
    pub mechanism: Option<Mechanism>,
    pub states_explored: usize,
}

impl SearchOutcome {
    pub fn found(&self) -> bool {
        self.mechanism.is_some()
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
struct State {
    sets: Vec<u64>,
    moved: u64,
}

#[derive(Clone)]
enum Solution {
    Leaf(u32),
    Split { mover: usize, blocks: Vec<u64> },
}

struct Searcher<'a> {
    req: Requirements,
    opts: &'a SearchOptions,
    n: usize,
    strides: Vec<usize>,
    sizes: Vec<usize>,
    alloc_id: Vec<u32>,
    allocs: Vec<Allocation>,
    /// item_of[i][flat]: dense item index agent i receives.
    item_of: Vec<Vec<u8>>,
    /// pos[i][k][item]: position of item in agent i's k-th preference.
    pos: Vec<Vec<Vec<u8>>>,
    memo: HashMap<State, Option<Solution>>,
}

fn bits(mask: u64) -> impl Iterator<Item = usize> {
    let mut m = mask;
    std::iter::from_fn(move || {
        if m == 0 {
            None
        } else {
            let b = m.trailing_zeros() as usize;
            m &= m - 1;
            Some(b)
        }
    })
}

impl Searcher<'_> {
    fn for_each_profile(&self, sets: &[u64], f: &mut impl FnMut(usize)) {
        fn go(s: &Searcher<'_>, sets: &[u64], j: usize, base: usize, f: &mut impl FnMut(usize)) {
            if j == s.n {
                f(base);
                return;
            }
            for k in bits(sets[j]) {
                go(s, sets, j + 1, base + k * s.strides[j], f);
            }
        }
        go(self, sets, 0, 0, f)
    }

    fn constant(&self, sets: &[u64]) -> Option<u32> {
        let mut first = None;
        let mut same = true;
        self.for_each_profile(sets, &mut |flat| {
            let id = self.alloc_id[flat];
            match first {
                None => first = Some(id),
                Some(x) if x != id => same = false,
                _ => {}
            }
        });
        if same {
            first
        } else {
            None
        }
    }

    /// Items agent `i` can receive per own preference, opponents ranging over `sets`.
    fn outcome_sets(&self, sets: &[u64], i: usize) -> Vec<(usize, u64)> {
        bits(sets[i])
            .map(|k| {
                let mut fixed = sets.to_vec();
                fixed[i] = 1 << k;
                let mut items = 0u64;
                self.for_each_profile(&fixed, &mut |flat| items |= 1 << self.item_of[i][flat]);
                (k, items)
            })
            .collect()
    }

    fn worst(&self, i: usize, k: usize, items: u64) -> u8 {
        bits(items).map(|it| self.pos[i][k][it]).max().unwrap_or(0)
    }

    fn best(&self, i: usize, k: usize, items: u64) -> u8 {
        bits(items).map(|it| self.pos[i][k][it]).min().unwrap_or(u8::MAX)
    }

    /// Finest split allowed by the pairwise conflicts; no conflicts at all
    /// when neither OSP nor SOSP is required.
    fn component_split(&self, sets: &[u64], i: usize) -> Vec<u64> {
        let outs = self.outcome_sets(sets, i);
        let r = outs.len();
        let mut parent: Vec<usize> = (0..r).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut x = x;
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        if self.req.osp {
            for a in 0..r {
                for b in a + 1..r {
                    let (ka, sa) = outs[a];
                    let (kb, sb) = outs[b];
                    let conflict = self.worst(i, ka, sa) > self.best(i, ka, sb)
                        || self.worst(i, kb, sb) > self.best(i, kb, sa);
                    if conflict {
                        let (x, y) = (find(&mut parent, a), find(&mut parent, b));
                        parent[x.max(y)] = x.min(y);
                    }
                }
            }
        }
        let mut blocks: Vec<(usize, u64)> = Vec::new();
        for (a, &(k, _)) in outs.iter().enumerate() {
            let root = find(&mut parent, a);
            match blocks.iter_mut().find(|(r0, _)| *r0 == root) {
                Some((_, m)) => *m |= 1 << k,
                None => blocks.push((root, 1 << k)),
            }
        }
        blocks.into_iter().map(|(_, m)| m).collect()
    }

    fn sosp_block_ok(&self, i: usize, outs: &[(usize, u64)], block: u64) -> bool {
        let (mut inside, mut outside) = (0u64, 0u64);
        for &(k, s) in outs {
            if block >> k & 1 == 1 {
                inside |= s;
            } else {
                outside |= s;
            }
        }
        bits(block).all(|k| self.worst(i, k, inside) <= self.best(i, k, outside))
    }

    /// Every partition of `mask` into at least two blocks, blocks ordered by
    /// smallest member, in restricted-growth-string order.
    fn partitions(mask: u64) -> Vec<Vec<u64>> {
        let elems: Vec<usize> = bits(mask).collect();
        let r = elems.len();
        let mut out = Vec::new();
        let mut rgs = vec![0usize; r];
        loop {
            let blocks = rgs.iter().max().map_or(0, |&b| b + 1);
            if blocks >= 2 {
                let mut ms = vec![0u64; blocks];
                for (pos, &b) in rgs.iter().enumerate() {
                    ms[b] |= 1 << elems[pos];
                }
                out.push(ms);
            }
            // next restricted growth string
            let mut j = r;
            loop {
                if j <= 1 {
                    return out;
                }
                j -= 1;
                let cap = rgs[..j].iter().max().copied().unwrap_or(0) + 1;
                if rgs[j] < cap {
                    rgs[j] += 1;
                    for x in &mut rgs[j + 1..] {
                        *x = 0;
                    }
                    break;
                }
            }
        }
    }

    fn child(&self, state: &State, i: usize, block: u64) -> State {
        let mut sets = state.sets.clone();
        sets[i] = block;
        State {
            sets,
            moved: if self.req.simple { state.moved | 1 << i } else { 0 },
        }
    }

    fn solve(&mut self, state: &State) -> Result<bool> {
        if let Some(sol) = self.memo.get(state) {
            return Ok(sol.is_some());
        }
        let solution = self.evaluate(state)?;
        let ok = solution.is_some();
        self.memo.insert(state.clone(), solution);
        Ok(ok)
    }

    fn evaluate(&mut self, state: &State) -> Result<Option<Solution>> {
        if let Some(id) = self.constant(&state.sets) {
            return Ok(Some(Solution::Leaf(id)));
        }
        for i in 0..self.n {
            if self.req.simple && state.moved >> i & 1 == 1 {
                continue;
            }
            let set = state.sets[i];
            let mut candidates: Vec<Vec<u64>> = Vec::new();
            if set.count_ones() >= 2 {
                if self.req.sosp {
                    if set.count_ones() as usize > self.opts.max_partition_size {
                        return Err(Error::LimitExceeded(format!(
                            "strong search would partition {} preferences of one agent (limit {})",
                            set.count_ones(),
                            self.opts.max_partition_size
                        )));
                    }
                    let outs = self.outcome_sets(&state.sets, i);
                    candidates = Self::partitions(set)
                        .into_iter()
                        .filter(|blocks| blocks.iter().all(|&b| self.sosp_block_ok(i, &outs, b)))
                        .collect();
                } else {
                    let split = self.component_split(&state.sets, i);
                    if split.len() >= 2 {
                        candidates.push(split);
                    }
                }
            }
            if self.opts.allow_single_edge && self.req.simple {
                candidates.push(vec![set]);
            }
            for blocks in candidates {
                let mut all = true;
                for &b in &blocks {
                    let c = self.child(state, i, b);
                    if !self.solve(&c)? {
                        all = false;
                        break;
                    }
                }
                if all {
                    return Ok(Some(Solution::Split { mover: i, blocks }));
                }
            }
        }
        Ok(None)
    }

    fn build(&self, state: &State, nodes: &mut Vec<Node>, edges: &mut Vec<Edge>, counts: &mut (usize, usize)) -> usize {
        let v = nodes.len();
        match self.memo[state].as_ref().expect("built states are solved") {
            Solution::Leaf(id) => {
                counts.1 += 1;
                nodes.push(Node {
                    id: format!("l{}", counts.1),
                    kind: NodeKind::Leaf(self.allocs[*id as usize].clone()),
                });
            }
            Solution::Split { mover, blocks } => {
                counts.0 += 1;
                nodes.push(Node {
                    id: format!("v{}", counts.0),
                    kind: NodeKind::Move(AgentId(*mover)),
                });
                for &b in blocks {
                    let c = self.child(state, *mover, b);
                    let to = self.build(&c, nodes, edges, counts);
                    edges.push(Edge {
                        from: v,
                        to,
                        label: bits(b).collect::<PrefSet>(),
                    });
                }
            }
        }
        v
    }
}

/// Searches for a mechanism on `d` implementing `rule` with the required properties.
pub fn search_mechanism(
    market: &Market,
    rule: &RuleTable,
    d: &PreferenceDomain,
    req: Requirements,
    opts: &SearchOptions,
) -> Result<SearchOutcome> {
    let count = d
        .profile_count()
        .ok_or_else(|| Error::LimitExceeded("profile count overflows".into()))?;
    if count > opts.max_profiles {
        return Err(Error::LimitExceeded(format!(
            "domain has {count} profiles, search limit is {}",
            opts.max_profiles
        )));
    }
    if rule.len() != count {
        return Err(Error::MarketMismatch(format!(
            "rule tabulates {} profiles, domain has {count}",
            rule.len()
        )));
    }
    let n = market.n_agents();
    if n > 64 {
        return Err(Error::LimitExceeded("search supports at most 64 agents".into()));
    }
    let sizes: Vec<usize> = market.agents().map(|a| d.size(a)).collect();
    if let Some(&big) = sizes.iter().find(|&&s| s > 64) {
        return Err(Error::LimitExceeded(format!(
            "an agent has {big} admissible preferences, search supports at most 64"
        )));
    }
    let mut strides = vec![1usize; n];
    for j in (0..n.saturating_sub(1)).rev() {
        strides[j] = strides[j + 1] * sizes[j + 1];
    }
    let mut ids: HashMap<&Allocation, u32> = HashMap::new();
    let mut allocs = Vec::new();
    let alloc_id: Vec<u32> = rule
        .outcomes()
        .iter()
        .map(|a| {
            *ids.entry(a).or_insert_with(|| {
                allocs.push(a.clone());
                (allocs.len() - 1) as u32
            })
        })
        .collect();
    let item_of: Vec<Vec<u8>> = market
        .agents()
        .map(|a| {
            rule.outcomes()
                .iter()
                .map(|al| market.item_index(al.get(a)) as u8)
                .collect()
        })
        .collect();
    let pos: Vec<Vec<Vec<u8>>> = market
        .agents()
        .map(|a| {
            d.prefs(a)
                .iter()
                .map(|p| (0..market.n_items()).map(|it| p.position_of_index(it) as u8).collect())
                .collect()
        })
        .collect();
    let mut s = Searcher {
        req,
        opts,
        n,
        strides,
        sizes,
        alloc_id,
        allocs,
        item_of,
        pos,
        memo: HashMap::new(),
    };
    let root = State {
        sets: s
            .sizes
            .iter()
            .map(|&k| if k == 64 { u64::MAX } else { (1u64 << k) - 1 })
            .collect(),
        moved: 0,
    };
    let found = s.solve(&root)?;
    let states_explored = s.memo.len();
    let mechanism = if found {
        let (mut nodes, mut edges) = (Vec::new(), Vec::new());
        s.build(&root, &mut nodes, &mut edges, &mut (0, 0));
        Some(Mechanism::new(market.clone(), d.clone(), nodes, edges, 0)?)
    } else {
        None
    };
    Ok(SearchOutcome {
        mechanism,
        states_explored,
    })
}

pub fn sosp_implementable_fpttc(
    market: &Market,
    s: &PriorityStructure,
    d: &PreferenceDomain,
) -> Result<bool> {
    let rule = run_rule(market, s, d)?;
    let req = Requirements {
        sosp: true,
        ..Default::default()
    };
    Ok(search_mechanism(market, &rule, d, req, &SearchOptions::default())?.found())
}

pub fn simple_osp_implementable(market: &Market, rule: &RuleTable, d: &PreferenceDomain) -> Result<bool> {
    let req = Requirements {
        simple: true,
        osp: true,
        sosp: false,
    };
    Ok(search_mechanism(market, rule, d, req, &SearchOptions::default())?.found())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PriorityOrder;

    #[test]
    fn partitions_are_bell_numbers_minus_one() {
        assert_eq!(Searcher::partitions(0b111).len(), 4);
        assert_eq!(Searcher::partitions(0b111111).len(), 202);
        let first = &Searcher::partitions(0b1011)[0];
        assert_eq!(first, &vec![0b0011, 0b1000]);
    }

    #[test]
    fn requirements_parse() {
        let r = Requirements::parse("simple, osp").unwrap();
        assert!(r.simple && r.osp && !r.sosp);
        assert!(Requirements::parse("fast").is_err());
    }

    #[test]
    fn serial_dictatorship_found_and_verified() {
        let m = Market::with_sizes(3, 3);
        let s = PriorityStructure::serial(&m, PriorityOrder::from_names(&m, ["1", "2", "3"]).unwrap());
        let d = PreferenceDomain::no_outside(&m);
        let rule = run_rule(&m, &s, &d).unwrap();
        for req in ["sosp", "simple,osp", "osp"] {
            let out = search_mechanism(&m, &rule, &d, Requirements::parse(req).unwrap(), &SearchOptions::default())
                .unwrap();
            let mech = out.mechanism.expect(req);
            assert!(mech.validate().holds);
            assert!(mech.implements(&rule).unwrap().holds);
            assert!(mech.check_osp().unwrap().holds);
        }
    }

    #[test]
    fn profile_limit_enforced() {
        let m = Market::with_sizes(3, 3);
        let d = PreferenceDomain::with_outside(&m);
        let s = PriorityStructure::serial(&m, PriorityOrder::from_names(&m, ["1", "2", "3"]).unwrap());
        let rule = run_rule(&m, &s, &d).unwrap();
        let err = search_mechanism(&m, &rule, &d, Requirements::default(), &SearchOptions::default()).unwrap_err();
        assert!(matches!(err, Error::LimitExceeded(_)));
    }
}

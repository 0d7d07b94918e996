//! Agents, objects, preferences, priorities and allocations.
//!
//! Every market value refers to agents and objects by dense indices into the
//! [`Market`] it was built against. Preferences always rank every object plus
//! the outside option, so the models with and without outside options share a
//! single representation: in the latter the outside option is simply last.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use itertools::Itertools;

use crate::error::{Error, Result};

/// Serialized token of the outside option.
pub const OUTSIDE_TOKEN: &str = "@0";

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AgentId(pub usize);

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ObjectId(pub usize);

/// An object or the outside option.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Item {
    Object(ObjectId),
    Outside,
}

impl Item {
    pub fn object(self) -> Option<ObjectId> {
        match self {
            Item::Object(o) => Some(o),
            Item::Outside => None,
        }
    }

    pub fn is_outside(self) -> bool {
        matches!(self, Item::Outside)
    }
}

/// Ordered agent and object token sets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Market {
    agents: Vec<String>,
    objects: Vec<String>,
    agent_index: HashMap<String, usize>,
    object_index: HashMap<String, usize>,
}

impl Market {
    pub fn new(agents: Vec<String>, objects: Vec<String>) -> Result<Self> {
        if agents.is_empty() {
            return Err(Error::InvalidMarket("market needs at least one agent".into()));
        }
        if objects.is_empty() {
            return Err(Error::InvalidMarket("market needs at least one object".into()));
        }
        let mut agent_index = HashMap::new();
        for (k, a) in agents.iter().enumerate() {
            if agent_index.insert(a.clone(), k).is_some() {
                return Err(Error::DuplicateId(a.clone()));
            }
        }
        let mut object_index = HashMap::new();
        for (k, o) in objects.iter().enumerate() {
            if o == OUTSIDE_TOKEN {
                return Err(Error::InvalidMarket(format!(
                    "`{OUTSIDE_TOKEN}` is reserved for the outside option"
                )));
            }
            if agent_index.contains_key(o) {
                return Err(Error::InvalidMarket(format!(
                    "`{o}` names both an agent and an object"
                )));
            }
            if object_index.insert(o.clone(), k).is_some() {
                return Err(Error::DuplicateId(o.clone()));
            }
        }
        Ok(Self {
            agents,
            objects,
            agent_index,
            object_index,
        })
    }

    /// Agents `1..=n` and objects `a1..=am`.
    pub fn with_sizes(n: usize, m: usize) -> Self {
        Self::new(
            (1..=n).map(|k| k.to_string()).collect(),
            (1..=m).map(|k| format!("a{k}")).collect(),
        )
        .expect("generated names are distinct")
    }

    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn n_objects(&self) -> usize {
        self.objects.len()
    }

    /// Objects plus the outside option.
    pub fn n_items(&self) -> usize {
        self.objects.len() + 1
    }

    pub fn agents(&self) -> impl Iterator<Item = AgentId> + Clone {
        (0..self.agents.len()).map(AgentId)
    }

    pub fn objects(&self) -> impl Iterator<Item = ObjectId> + Clone {
        (0..self.objects.len()).map(ObjectId)
    }

    /// Every object in declaration order, then the outside option.
    pub fn items(&self) -> impl Iterator<Item = Item> + Clone {
        self.objects()
            .map(Item::Object)
            .chain(std::iter::once(Item::Outside))
    }

    pub fn agent_names(&self) -> &[String] {
        &self.agents
    }

    pub fn object_names(&self) -> &[String] {
        &self.objects
    }

    pub fn agent_name(&self, a: AgentId) -> &str {
        &self.agents[a.0]
    }

    pub fn object_name(&self, o: ObjectId) -> &str {
        &self.objects[o.0]
    }

    pub fn item_name(&self, item: Item) -> &str {
        match item {
            Item::Object(o) => self.object_name(o),
            Item::Outside => OUTSIDE_TOKEN,
        }
    }

    pub fn agent(&self, name: &str) -> Result<AgentId> {
        self.agent_index
            .get(name)
            .map(|&k| AgentId(k))
            .ok_or_else(|| Error::UnknownAgent(name.to_string()))
    }

    pub fn object(&self, name: &str) -> Result<ObjectId> {
        self.object_index
            .get(name)
            .map(|&k| ObjectId(k))
            .ok_or_else(|| Error::UnknownItem(name.to_string()))
    }

    pub fn item(&self, name: &str) -> Result<Item> {
        if name == OUTSIDE_TOKEN {
            Ok(Item::Outside)
        } else {
            self.object(name).map(Item::Object)
        }
    }

    /// Dense index of an item: objects keep their index, the outside option is `m`.
    pub fn item_index(&self, item: Item) -> usize {
        match item {
            Item::Object(o) => o.0,
            Item::Outside => self.objects.len(),
        }
    }

    pub fn item_at(&self, index: usize) -> Item {
        if index == self.objects.len() {
            Item::Outside
        } else {
            Item::Object(ObjectId(index))
        }
    }

    pub(crate) fn check_agent(&self, a: AgentId) -> Result<()> {
        if a.0 < self.agents.len() {
            Ok(())
        } else {
            Err(Error::UnknownAgent(format!("#{}", a.0)))
        }
    }
}

struct PreferenceData {
    ranking: Vec<Item>,
    position: Vec<u16>,
}

/// A strict ranking over every object and the outside option.
#[derive(Clone)]
pub struct Preference(Arc<PreferenceData>);

impl Preference {
    pub fn new(market: &Market, ranking: Vec<Item>) -> Result<Self> {
        let mut position = vec![u16::MAX; market.n_items()];
        if ranking.len() != market.n_items() {
            return Err(Error::InvalidRanking(format!(
                "expected {} items, got {}",
                market.n_items(),
                ranking.len()
            )));
        }
        for (pos, &item) in ranking.iter().enumerate() {
            if let Item::Object(o) = item {
                if o.0 >= market.n_objects() {
                    return Err(Error::UnknownItem(format!("#{}", o.0)));
                }
            }
            let slot = &mut position[market.item_index(item)];
            if *slot != u16::MAX {
                return Err(Error::InvalidRanking(format!(
                    "`{}` ranked twice",
                    market.item_name(item)
                )));
            }
            *slot = pos as u16;
        }
        Ok(Self(Arc::new(PreferenceData { ranking, position })))
    }

    pub fn from_tokens<S: AsRef<str>>(
        market: &Market,
        tokens: impl IntoIterator<Item = S>,
    ) -> Result<Self> {
        let ranking = tokens
            .into_iter()
            .map(|t| market.item(t.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(market, ranking)
    }

    /// Parses a whitespace separated ranking such as `"a3 a1 a2 @0"`.
    pub fn parse(market: &Market, text: &str) -> Result<Self> {
        Self::from_tokens(market, text.split_whitespace())
    }

    pub fn ranking(&self) -> &[Item] {
        &self.0.ranking
    }

    /// Zero-based position of `item`; zero is the most preferred.
    pub fn position_of_index(&self, item_index: usize) -> usize {
        self.0.position[item_index] as usize
    }

    pub fn position(&self, market: &Market, item: Item) -> usize {
        self.position_of_index(market.item_index(item))
    }

    /// Strict preference `a P b`.
    pub fn prefers(&self, market: &Market, a: Item, b: Item) -> bool {
        self.position(market, a) < self.position(market, b)
    }

    /// Weak preference `a R b`.
    pub fn weakly_prefers(&self, market: &Market, a: Item, b: Item) -> bool {
        self.position(market, a) <= self.position(market, b)
    }

    pub fn top(&self) -> Item {
        self.0.ranking[0]
    }

    /// Most preferred member of a nonempty subset.
    pub fn top_of(&self, market: &Market, subset: &[Item]) -> Result<Item> {
        subset
            .iter()
            .copied()
            .min_by_key(|&it| self.position(market, it))
            .ok_or(Error::EmptySubset)
    }

    pub fn is_acceptable(&self, market: &Market, o: ObjectId) -> bool {
        self.prefers(market, Item::Object(o), Item::Outside)
    }

    /// True when the outside option is ranked last.
    pub fn outside_last(&self) -> bool {
        self.0.ranking.last() == Some(&Item::Outside)
    }

    pub fn tokens<'m>(&self, market: &'m Market) -> Vec<&'m str> {
        self.0.ranking.iter().map(|&i| market.item_name(i)).collect()
    }

    pub fn display(&self, market: &Market) -> String {
        self.tokens(market).join(" ")
    }
}

impl PartialEq for Preference {
    fn eq(&self, other: &Self) -> bool {
        self.0.ranking == other.0.ranking
    }
}

impl Eq for Preference {}

impl Hash for Preference {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.ranking.hash(state)
    }
}

impl fmt::Debug for Preference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.ranking.iter()).finish()
    }
}

/// One preference per agent, indexed by agent.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PreferenceProfile {
    prefs: Vec<Preference>,
}

impl PreferenceProfile {
    pub fn new(market: &Market, prefs: Vec<Preference>) -> Result<Self> {
        if prefs.len() != market.n_agents() {
            return Err(Error::MarketMismatch(format!(
                "profile has {} preferences for {} agents",
                prefs.len(),
                market.n_agents()
            )));
        }
        if let Some(p) = prefs.iter().find(|p| p.ranking().len() != market.n_items()) {
            return Err(Error::MarketMismatch(format!(
                "preference ranks {} items, market has {}",
                p.ranking().len(),
                market.n_items()
            )));
        }
        Ok(Self { prefs })
    }

    /// Builds a profile from whitespace-separated rankings, one per agent in order.
    pub fn parse(market: &Market, rankings: &[&str]) -> Result<Self> {
        let prefs = rankings
            .iter()
            .map(|r| Preference::parse(market, r))
            .collect::<Result<Vec<_>>>()?;
        Self::new(market, prefs)
    }

    pub fn get(&self, agent: AgentId) -> &Preference {
        &self.prefs[agent.0]
    }

    pub fn prefs(&self) -> &[Preference] {
        &self.prefs
    }

    pub fn len(&self) -> usize {
        self.prefs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prefs.is_empty()
    }

    /// Same profile with one agent's preference replaced.
    pub fn with(&self, agent: AgentId, pref: Preference) -> Self {
        let mut prefs = self.prefs.clone();
        prefs[agent.0] = pref;
        Self { prefs }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum DomainKind {
    /// Every object ranked above the outside option.
    NoOutside,
    /// All strict rankings of objects and the outside option.
    WithOutside,
    Explicit,
}

impl DomainKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DomainKind::NoOutside => "no-outside",
            DomainKind::WithOutside => "with-outside",
            DomainKind::Explicit => "explicit",
        }
    }
}

/// A product domain: one finite admissible preference set per agent.
///
/// Each set is sorted lexicographically by item token sequence, and profiles
/// are enumerated in lexicographic order of the per-agent indices with the
/// first declared agent most significant.
#[derive(Clone, Debug)]
pub struct PreferenceDomain {
    kind: DomainKind,
    prefs: Vec<Vec<Preference>>,
    lookup: Vec<HashMap<Preference, usize>>,
}

impl PartialEq for PreferenceDomain {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.prefs == other.prefs
    }
}

impl Eq for PreferenceDomain {}

impl PreferenceDomain {
    pub fn no_outside(market: &Market) -> Self {
        let all = all_rankings(market, false);
        Self::build(DomainKind::NoOutside, vec![all; market.n_agents()])
    }

    pub fn with_outside(market: &Market) -> Self {
        let all = all_rankings(market, true);
        Self::build(DomainKind::WithOutside, vec![all; market.n_agents()])
    }

    /// Per-agent sets given explicitly; duplicates are dropped and each set is
    /// re-sorted into canonical order.
    pub fn explicit(market: &Market, per_agent: Vec<Vec<Preference>>) -> Result<Self> {
        if per_agent.len() != market.n_agents() {
            return Err(Error::MarketMismatch(format!(
                "domain lists {} agents, market has {}",
                per_agent.len(),
                market.n_agents()
            )));
        }
        let mut sets = Vec::with_capacity(per_agent.len());
        for (k, mut set) in per_agent.into_iter().enumerate() {
            if set.is_empty() {
                return Err(Error::Input(format!(
                    "agent `{}` has no admissible preference",
                    market.agent_name(AgentId(k))
                )));
            }
            if let Some(p) = set.iter().find(|p| p.ranking().len() != market.n_items()) {
                return Err(Error::MarketMismatch(format!(
                    "preference ranks {} items, market has {}",
                    p.ranking().len(),
                    market.n_items()
                )));
            }
            sort_canonical(market, &mut set);
            set.dedup();
            sets.push(set);
        }
        Ok(Self::build(DomainKind::Explicit, sets))
    }

    /// The product of singletons containing exactly one profile.
    pub fn singleton(market: &Market, profile: &PreferenceProfile) -> Result<Self> {
        Self::explicit(
            market,
            profile.prefs().iter().map(|p| vec![p.clone()]).collect(),
        )
    }

    fn build(kind: DomainKind, prefs: Vec<Vec<Preference>>) -> Self {
        let lookup = prefs
            .iter()
            .map(|set| {
                set.iter()
                    .enumerate()
                    .map(|(k, p)| (p.clone(), k))
                    .collect()
            })
            .collect();
        Self {
            kind,
            prefs,
            lookup,
        }
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn n_agents(&self) -> usize {
        self.prefs.len()
    }

    pub fn prefs(&self, agent: AgentId) -> &[Preference] {
        &self.prefs[agent.0]
    }

    pub fn size(&self, agent: AgentId) -> usize {
        self.prefs[agent.0].len()
    }

    pub fn pref_index(&self, agent: AgentId, pref: &Preference) -> Option<usize> {
        self.lookup[agent.0].get(pref).copied()
    }

    /// True when every admissible preference ranks the outside option last.
    pub fn is_outside_last(&self) -> bool {
        self.prefs.iter().flatten().all(Preference::outside_last)
    }

    /// Number of profiles, or `None` on overflow.
    pub fn profile_count(&self) -> Option<usize> {
        self.prefs
            .iter()
            .try_fold(1usize, |acc, set| acc.checked_mul(set.len()))
    }

    /// Per-agent preference indices of the profile at `index`.
    pub fn digits(&self, mut index: usize) -> Vec<usize> {
        let mut digits = vec![0; self.prefs.len()];
        for (k, set) in self.prefs.iter().enumerate().rev() {
            digits[k] = index % set.len();
            index /= set.len();
        }
        digits
    }

    pub fn index_of_digits(&self, digits: &[usize]) -> usize {
        digits
            .iter()
            .zip(&self.prefs)
            .fold(0, |acc, (&d, set)| acc * set.len() + d)
    }

    pub fn profile_from_digits(&self, digits: &[usize]) -> PreferenceProfile {
        PreferenceProfile {
            prefs: digits
                .iter()
                .zip(&self.prefs)
                .map(|(&d, set)| set[d].clone())
                .collect(),
        }
    }

    pub fn profile_at(&self, index: usize) -> PreferenceProfile {
        self.profile_from_digits(&self.digits(index))
    }

    /// Flat index of an in-domain profile.
    pub fn index_of(&self, profile: &PreferenceProfile) -> Option<usize> {
        if profile.len() != self.prefs.len() {
            return None;
        }
        let digits = profile
            .prefs()
            .iter()
            .enumerate()
            .map(|(k, p)| self.pref_index(AgentId(k), p))
            .collect::<Option<Vec<_>>>()?;
        Some(self.index_of_digits(&digits))
    }

    pub fn contains(&self, profile: &PreferenceProfile) -> bool {
        self.index_of(profile).is_some()
    }

    /// Every profile in enumeration order.
    ///
    /// Panics if the profile count overflows `usize`.
    pub fn profiles(&self) -> impl Iterator<Item = PreferenceProfile> + '_ {
        let count = self.profile_count().expect("profile count overflows usize");
        (0..count).map(move |k| self.profile_at(k))
    }
}

fn sort_canonical(market: &Market, set: &mut [Preference]) {
    set.sort_by(|a, b| a.tokens(market).cmp(&b.tokens(market)));
}

fn all_rankings(market: &Market, with_outside: bool) -> Vec<Preference> {
    let mut out: Vec<Preference> = if with_outside {
        market
            .items()
            .permutations(market.n_items())
            .map(|r| Preference::new(market, r).expect("permutation of all items"))
            .collect()
    } else {
        market
            .objects()
            .map(Item::Object)
            .permutations(market.n_objects())
            .map(|mut r| {
                r.push(Item::Outside);
                Preference::new(market, r).expect("permutation of all items")
            })
            .collect()
    };
    sort_canonical(market, &mut out);
    out
}

/// A strict ranking over all agents.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PriorityOrder {
    ranking: Vec<AgentId>,
    position: Vec<u16>,
}

impl PriorityOrder {
    pub fn new(market: &Market, ranking: Vec<AgentId>) -> Result<Self> {
        if ranking.len() != market.n_agents() {
            return Err(Error::InvalidRanking(format!(
                "priority lists {} agents, market has {}",
                ranking.len(),
                market.n_agents()
            )));
        }
        let mut position = vec![u16::MAX; market.n_agents()];
        for (pos, &a) in ranking.iter().enumerate() {
            market.check_agent(a)?;
            if position[a.0] != u16::MAX {
                return Err(Error::InvalidRanking(format!(
                    "agent `{}` ranked twice",
                    market.agent_name(a)
                )));
            }
            position[a.0] = pos as u16;
        }
        Ok(Self { ranking, position })
    }

    pub fn from_names<S: AsRef<str>>(
        market: &Market,
        names: impl IntoIterator<Item = S>,
    ) -> Result<Self> {
        let ranking = names
            .into_iter()
            .map(|n| market.agent(n.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(market, ranking)
    }

    pub fn ranking(&self) -> &[AgentId] {
        &self.ranking
    }

    pub fn prefers(&self, a: AgentId, b: AgentId) -> bool {
        self.position[a.0] < self.position[b.0]
    }

    /// Highest priority agent within a nonempty subset.
    pub fn top_of(&self, subset: &[AgentId]) -> Result<AgentId> {
        subset
            .iter()
            .copied()
            .min_by_key(|a| self.position[a.0])
            .ok_or(Error::EmptySubset)
    }

    /// Highest priority agent among those flagged in `alive`.
    pub(crate) fn top_alive(&self, alive: &[bool]) -> Option<AgentId> {
        self.ranking.iter().copied().find(|a| alive[a.0])
    }

    /// Strict upper contour set `{j : j ≻ i}`.
    pub fn upper_contour(&self, i: AgentId) -> Result<BTreeSet<AgentId>> {
        let pos = *self
            .position
            .get(i.0)
            .ok_or_else(|| Error::UnknownAgent(format!("#{}", i.0)))? as usize;
        Ok(self.ranking[..pos].iter().copied().collect())
    }

    /// One-based rank: `1 + |upper_contour(i)|`.
    pub fn rank(&self, i: AgentId) -> Result<usize> {
        self.position
            .get(i.0)
            .map(|&p| p as usize + 1)
            .ok_or_else(|| Error::UnknownAgent(format!("#{}", i.0)))
    }

    pub(crate) fn rank_unchecked(&self, i: AgentId) -> usize {
        self.position[i.0] as usize + 1
    }
}

/// A priority order per object, indexed by object.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PriorityStructure {
    orders: Vec<PriorityOrder>,
}

/// A priority structure restricted to a sub-market, keeping the original ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReducedStructure {
    pub agents: BTreeSet<AgentId>,
    pub orders: BTreeMap<ObjectId, Vec<AgentId>>,
}

impl PriorityStructure {
    pub fn new(market: &Market, orders: Vec<PriorityOrder>) -> Result<Self> {
        if orders.len() != market.n_objects() {
            return Err(Error::MarketMismatch(format!(
                "{} priority orders for {} objects",
                orders.len(),
                market.n_objects()
            )));
        }
        if orders.iter().any(|o| o.ranking.len() != market.n_agents()) {
            return Err(Error::MarketMismatch("priority order size".into()));
        }
        Ok(Self { orders })
    }

    /// Builds a structure from one agent-name column per object.
    pub fn from_columns<C, S>(market: &Market, columns: &[C]) -> Result<Self>
    where
        C: AsRef<[S]>,
        S: AsRef<str>,
    {
        let orders = columns
            .iter()
            .map(|c| PriorityOrder::from_names(market, c.as_ref().iter()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(market, orders)
    }

    /// Every object uses the same order.
    pub fn serial(market: &Market, order: PriorityOrder) -> Self {
        Self {
            orders: vec![order; market.n_objects()],
        }
    }

    pub fn order(&self, o: ObjectId) -> &PriorityOrder {
        &self.orders[o.0]
    }

    pub fn orders(&self) -> &[PriorityOrder] {
        &self.orders
    }

    pub fn n_objects(&self) -> usize {
        self.orders.len()
    }

    pub fn n_agents(&self) -> usize {
        self.orders.first().map_or(0, |o| o.ranking.len())
    }

    pub(crate) fn check_market(&self, market: &Market) -> Result<()> {
        if self.n_objects() != market.n_objects() || self.n_agents() != market.n_agents() {
            return Err(Error::MarketMismatch(format!(
                "structure is {}x{}, market is {}x{}",
                self.n_agents(),
                self.n_objects(),
                market.n_agents(),
                market.n_objects()
            )));
        }
        Ok(())
    }

    /// Restriction to the sub-market `(agents, objects)`.
    pub fn reduced(&self, agents: &[AgentId], objects: &[ObjectId]) -> Result<ReducedStructure> {
        if agents.is_empty() || objects.is_empty() {
            return Err(Error::EmptySubset);
        }
        let keep: BTreeSet<AgentId> = agents.iter().copied().collect();
        let orders = objects
            .iter()
            .map(|&o| {
                let order = self.orders.get(o.0).ok_or_else(|| {
                    Error::UnknownItem(format!("#{}", o.0))
                })?;
                Ok((
                    o,
                    order
                        .ranking
                        .iter()
                        .copied()
                        .filter(|a| keep.contains(a))
                        .collect(),
                ))
            })
            .collect::<Result<_>>()?;
        Ok(ReducedStructure {
            agents: keep,
            orders,
        })
    }

    /// Agents with top priority within `agents` for at least one of `objects`.
    pub fn top_owners(&self, agents: &[AgentId], objects: &[ObjectId]) -> Result<BTreeSet<AgentId>> {
        if agents.is_empty() || objects.is_empty() {
            return Err(Error::EmptySubset);
        }
        objects
            .iter()
            .map(|&o| {
                self.orders
                    .get(o.0)
                    .ok_or_else(|| Error::UnknownItem(format!("#{}", o.0)))?
                    .top_of(agents)
            })
            .collect()
    }

    /// Every structure on `market`, each object ranging over all `n!` orders.
    /// The last object varies fastest.
    pub fn enumerate_all(market: &Market) -> Vec<PriorityStructure> {
        let orders: Vec<PriorityOrder> = market
            .agents()
            .permutations(market.n_agents())
            .map(|r| PriorityOrder::new(market, r).expect("permutation"))
            .collect();
        (0..market.n_objects())
            .map(|_| orders.iter().cloned())
            .multi_cartesian_product()
            .map(|orders| PriorityStructure { orders })
            .collect()
    }
}

/// Each agent's assignment; an object is held by at most one agent.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Allocation {
    items: Vec<Item>,
}

impl Allocation {
    pub fn new(market: &Market, items: Vec<Item>) -> Result<Self> {
        if items.len() != market.n_agents() {
            return Err(Error::MarketMismatch(format!(
                "allocation covers {} agents, market has {}",
                items.len(),
                market.n_agents()
            )));
        }
        let mut seen = BTreeSet::new();
        for &it in &items {
            if let Item::Object(o) = it {
                if o.0 >= market.n_objects() {
                    return Err(Error::UnknownItem(format!("#{}", o.0)));
                }
                if !seen.insert(o) {
                    return Err(Error::Invariant(format!(
                        "object `{}` assigned twice",
                        market.object_name(o)
                    )));
                }
            }
        }
        Ok(Self { items })
    }

    pub fn parse(market: &Market, tokens: &[&str]) -> Result<Self> {
        let items = tokens
            .iter()
            .map(|t| market.item(t))
            .collect::<Result<Vec<_>>>()?;
        Self::new(market, items)
    }

    pub(crate) fn from_items_unchecked(items: Vec<Item>) -> Self {
        Self { items }
    }

    pub fn get(&self, agent: AgentId) -> Item {
        self.items[agent.0]
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    /// No object is held twice.
    pub fn is_feasible(&self) -> bool {
        let objs: Vec<ObjectId> = self.items.iter().filter_map(|i| i.object()).collect();
        objs.iter().all_unique()
    }

    pub fn display(&self, market: &Market) -> String {
        format!(
            "({})",
            self.items.iter().map(|&i| market.item_name(i)).join(", ")
        )
    }
}

pub fn top_pref(market: &Market, p: &Preference, subset: &[Item]) -> Result<Item> {
    p.top_of(market, subset)
}

pub fn top_agent(o: &PriorityOrder, subset: &[AgentId]) -> Result<AgentId> {
    o.top_of(subset)
}

pub fn upper_contour(o: &PriorityOrder, i: AgentId) -> Result<BTreeSet<AgentId>> {
    o.upper_contour(i)
}

pub fn rank(o: &PriorityOrder, i: AgentId) -> Result<usize> {
    o.rank(i)
}

pub fn reduced_structure(
    s: &PriorityStructure,
    agents: &[AgentId],
    objects: &[ObjectId],
) -> Result<ReducedStructure> {
    s.reduced(agents, objects)
}

pub fn top_owner_set(
    s: &PriorityStructure,
    agents: &[AgentId],
    objects: &[ObjectId],
) -> Result<BTreeSet<AgentId>> {
    s.top_owners(agents, objects)
}

pub fn enumerate_profiles(d: &PreferenceDomain) -> impl Iterator<Item = PreferenceProfile> + '_ {
    d.profiles()
}

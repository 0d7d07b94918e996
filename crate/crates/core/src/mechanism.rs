//! Extensive-form mechanisms: rooted game trees whose internal nodes call one
//! agent to move, whose edges carry the set of that agent's preferences that
//! take the edge, and whose leaves carry allocations.
//!
//! Labels are stored as sets of indices into the mover's admissible
//! preference list. In JSON an edge label is either explicit,
//! `{"explicit": ["a1 a2 @0", ["a2", "a1", "@0"]]}`, or a pattern such as
//! `{"pattern": "top=a1"}`, `"top=a2|a3"`, `"before=a2,a3"`,
//! `"before=@0,a1|a2"` (the first item ahead of every listed one), with
//! clauses joined by `&`. A pattern matches within the mover's current
//! possible set, i.e. it is intersected with the label she inherited from her
//! previous move on the path; explicit labels are taken verbatim.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;

use itertools::Itertools;
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::json::{
    allocation_from_value, allocation_to_value, domain_from_value, domain_to_value,
    market_from_value, market_to_value, preference_from_value,
};
use crate::model::{AgentId, Allocation, Item, Market, Preference, PreferenceDomain, PreferenceProfile};
use crate::rule::RuleTable;

/// Indices into one agent's admissible preference list.
pub type PrefSet = BTreeSet<usize>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NodeKind {
    Move(AgentId),
    Leaf(Allocation),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Node {
    pub id: String,
    pub kind: NodeKind,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub label: PrefSet,
}

#[derive(Clone, Debug)]
pub struct Mechanism {
    market: Market,
    domain: PreferenceDomain,
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    root: usize,
    out: Vec<Vec<usize>>,
    parent: Vec<Option<usize>>,
    /// Per node, per agent: preferences still consistent with the path.
    reach: Vec<Vec<PrefSet>>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Property {
    Valid,
    Osp,
    Sosp,
    Simple,
    Implements,
}

impl Property {
    pub fn as_str(self) -> &'static str {
        match self {
            Property::Valid => "valid",
            Property::Osp => "osp",
            Property::Sosp => "sosp",
            Property::Simple => "simple",
            Property::Implements => "implements",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "valid" => Property::Valid,
            "osp" => Property::Osp,
            "sosp" => Property::Sosp,
            "simple" => Property::Simple,
            "implements" => Property::Implements,
            other => return Err(Error::Input(format!("unknown property `{other}`"))),
        })
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerdictWitness {
    pub node: String,
    pub agent: Option<AgentId>,
    /// The mover's truthful preference, for dominance failures.
    pub preference: Option<Preference>,
    pub profiles: Vec<PreferenceProfile>,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerificationVerdict {
    pub property: Property,
    pub holds: bool,
    pub witness: Option<VerdictWitness>,
}

impl VerificationVerdict {
    fn pass(property: Property) -> Self {
        Self {
            property,
            holds: true,
            witness: None,
        }
    }

    fn fail(property: Property, witness: VerdictWitness) -> Self {
        Self {
            property,
            holds: false,
            witness: Some(witness),
        }
    }

    fn from_option(property: Property, witness: Option<VerdictWitness>) -> Self {
        match witness {
            None => Self::pass(property),
            Some(w) => Self::fail(property, w),
        }
    }
}

struct Shape {
    out: Vec<Vec<usize>>,
    parent: Vec<Option<usize>>,
    order: Vec<usize>,
}

fn tree_shape(nodes: &[Node], links: &[(usize, usize)], root: usize) -> Result<Shape> {
    let n = nodes.len();
    let mut out = vec![Vec::new(); n];
    let mut parent = vec![None; n];
    for (k, &(from, to)) in links.iter().enumerate() {
        if to == root {
            return Err(Error::Mechanism(format!("edge into root `{}`", nodes[root].id)));
        }
        if parent[to].is_some() {
            return Err(Error::Mechanism(format!("node `{}` has two parents", nodes[to].id)));
        }
        if matches!(nodes[from].kind, NodeKind::Leaf(_)) {
            return Err(Error::Mechanism(format!("leaf `{}` has an outgoing edge", nodes[from].id)));
        }
        parent[to] = Some(k);
        out[from].push(k);
    }
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::from([root]);
    let mut seen = vec![false; n];
    seen[root] = true;
    while let Some(v) = queue.pop_front() {
        order.push(v);
        for &k in &out[v] {
            let c = links[k].1;
            if !seen[c] {
                seen[c] = true;
                queue.push_back(c);
            }
        }
    }
    if let Some(v) = (0..n).find(|&v| !seen[v]) {
        return Err(Error::Mechanism(format!("node `{}` is unreachable from the root", nodes[v].id)));
    }
    Ok(Shape { out, parent, order })
}

/// Parsed `top=` / `before=` clauses.
enum Clause {
    Top(Vec<Item>),
    Before(Item, Vec<Item>),
}

fn parse_pattern(market: &Market, text: &str) -> Result<Vec<Clause>> {
    let items = |s: &str| -> Result<Vec<Item>> {
        s.split('|').map(|t| market.item(t.trim())).collect()
    };
    text.split('&')
        .map(|clause| {
            let clause = clause.trim();
            if let Some(rest) = clause.strip_prefix("top=") {
                Ok(Clause::Top(items(rest)?))
            } else if let Some(rest) = clause.strip_prefix("before=") {
                let (first, later) = rest
                    .split_once(',')
                    .ok_or_else(|| Error::Input(format!("pattern `{clause}`: expected `before=x,y`")))?;
                Ok(Clause::Before(market.item(first.trim())?, items(later)?))
            } else {
                Err(Error::Input(format!("unknown pattern `{clause}`")))
            }
        })
        .collect()
}

fn pattern_matches(market: &Market, clauses: &[Clause], p: &Preference) -> bool {
    clauses.iter().all(|c| match c {
        Clause::Top(items) => items.contains(&p.top()),
        Clause::Before(first, later) => later.iter().all(|&b| p.prefers(market, *first, b)),
    })
}

enum RawLabel {
    Explicit(Vec<Preference>),
    Pattern(String),
}

fn node_names(v: &Value) -> Result<&str> {
    v.as_str()
        .ok_or_else(|| Error::Input("mechanism: node references must be strings".into()))
}

impl Mechanism {
    /// Builds a mechanism from resolved labels; only the tree shape is checked
    /// here, everything else is left to [`Mechanism::validate`].
    pub fn new(
        market: Market,
        domain: PreferenceDomain,
        nodes: Vec<Node>,
        edges: Vec<Edge>,
        root: usize,
    ) -> Result<Self> {
        if root >= nodes.len() {
            return Err(Error::Mechanism("root out of range".into()));
        }
        if domain.n_agents() != market.n_agents() {
            return Err(Error::MarketMismatch("domain and market disagree on agents".into()));
        }
        if let Some(e) = edges.iter().find(|e| e.from >= nodes.len() || e.to >= nodes.len()) {
            return Err(Error::Mechanism(format!("edge {}->{} out of range", e.from, e.to)));
        }
        for node in &nodes {
            match &node.kind {
                NodeKind::Move(a) => market.check_agent(*a)?,
                NodeKind::Leaf(alloc) => {
                    Allocation::new(&market, alloc.items().to_vec())?;
                }
            }
        }
        if !nodes.iter().map(|n| &n.id).all_unique() {
            return Err(Error::Mechanism("duplicate node id".into()));
        }
        let links: Vec<(usize, usize)> = edges.iter().map(|e| (e.from, e.to)).collect();
        let shape = tree_shape(&nodes, &links, root)?;
        for e in &edges {
            let NodeKind::Move(i) = nodes[e.from].kind else { unreachable!() };
            if let Some(&bad) = e.label.iter().find(|&&k| k >= domain.size(i)) {
                return Err(Error::Mechanism(format!("label index {bad} out of range")));
            }
        }
        let mut m = Self {
            market,
            domain,
            nodes,
            edges,
            root,
            out: shape.out,
            parent: shape.parent,
            reach: Vec::new(),
        };
        m.reach = m.compute_reach(&shape.order);
        Ok(m)
    }

    fn full_sets(&self) -> Vec<PrefSet> {
        self.market
            .agents()
            .map(|a| (0..self.domain.size(a)).collect())
            .collect()
    }

    fn compute_reach(&self, order: &[usize]) -> Vec<Vec<PrefSet>> {
        let mut reach = vec![Vec::new(); self.nodes.len()];
        reach[self.root] = self.full_sets();
        for &v in order {
            for &k in &self.out[v] {
                let e = &self.edges[k];
                let NodeKind::Move(i) = self.nodes[v].kind else { unreachable!() };
                let mut sets = reach[v].clone();
                sets[i.0] = e.label.clone();
                reach[e.to] = sets;
            }
        }
        reach
    }

    /// Parses the JSON form. A `market` key in the document takes precedence
    /// over `market`; one of the two must be present.
    pub fn from_value(v: &Value, market: Option<&Market>) -> Result<Self> {
        let obj = v
            .as_object()
            .ok_or_else(|| Error::Input("mechanism: expected a JSON object".into()))?;
        let market = match obj.get("market") {
            Some(mv) => market_from_value(mv)?.0,
            None => market
                .cloned()
                .ok_or_else(|| Error::Input("mechanism: no market given".into()))?,
        };
        let domain = domain_from_value(
            &market,
            obj.get("domain")
                .ok_or_else(|| Error::Input("mechanism: missing `domain`".into()))?,
        )?;

        let mut nodes = Vec::new();
        let mut index = HashMap::new();
        for nv in obj
            .get("nodes")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Input("mechanism: missing `nodes`".into()))?
        {
            let id = nv
                .get("id")
                .and_then(Value::as_str)
                .ok_or_else(|| Error::Input("mechanism: node without `id`".into()))?
                .to_string();
            let kind = match (nv.get("agent"), nv.get("alloc")) {
                (Some(a), None) => NodeKind::Move(market.agent(node_names(a)?)?),
                (None, Some(al)) => NodeKind::Leaf(allocation_from_value(&market, al)?),
                _ => {
                    return Err(Error::Input(format!(
                        "mechanism: node `{id}` needs exactly one of `agent`, `alloc`"
                    )))
                }
            };
            if index.insert(id.clone(), nodes.len()).is_some() {
                return Err(Error::DuplicateId(id));
            }
            nodes.push(Node { id, kind });
        }
        let lookup = |v: Option<&Value>, what: &str| -> Result<usize> {
            let name = node_names(v.ok_or_else(|| Error::Input(format!("mechanism: missing `{what}`")))?)?;
            index
                .get(name)
                .copied()
                .ok_or_else(|| Error::Input(format!("mechanism: unknown node `{name}`")))
        };
        let root = lookup(obj.get("root"), "root")?;

        let mut links = Vec::new();
        let mut raw = Vec::new();
        for ev in obj
            .get("edges")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Input("mechanism: missing `edges`".into()))?
        {
            let from = lookup(ev.get("from"), "from")?;
            let to = lookup(ev.get("to"), "to")?;
            let label = ev
                .get("label")
                .and_then(Value::as_object)
                .ok_or_else(|| Error::Input("mechanism: edge without `label`".into()))?;
            let label = match (label.get("explicit"), label.get("pattern")) {
                (Some(list), None) => RawLabel::Explicit(
                    list.as_array()
                        .ok_or_else(|| Error::Input("explicit label: expected an array".into()))?
                        .iter()
                        .map(|r| preference_from_value(&market, r))
                        .collect::<Result<_>>()?,
                ),
                (None, Some(p)) => RawLabel::Pattern(
                    p.as_str()
                        .ok_or_else(|| Error::Input("pattern label: expected a string".into()))?
                        .to_string(),
                ),
                _ => return Err(Error::Input("label needs `explicit` or `pattern`".into())),
            };
            links.push((from, to));
            raw.push(label);
        }

        // labels resolve top-down, since patterns depend on the inherited set
        let shape = tree_shape(&nodes, &links, root)?;
        let mut reach: Vec<Option<Vec<PrefSet>>> = vec![None; nodes.len()];
        reach[root] = Some(
            market
                .agents()
                .map(|a| (0..domain.size(a)).collect())
                .collect(),
        );
        let mut labels: Vec<Option<PrefSet>> = vec![None; links.len()];
        for &v in &shape.order {
            let NodeKind::Move(i) = nodes[v].kind else { continue };
            let here = reach[v].clone().expect("parents resolve first");
            for &k in &shape.out[v] {
                let label: PrefSet = match &raw[k] {
                    RawLabel::Explicit(prefs) => prefs
                        .iter()
                        .map(|p| {
                            domain
                                .pref_index(i, p)
                                .ok_or_else(|| Error::OutsideDomain(market.agent_name(i).to_string()))
                        })
                        .collect::<Result<_>>()?,
                    RawLabel::Pattern(text) => {
                        let clauses = parse_pattern(&market, text)?;
                        here[i.0]
                            .iter()
                            .copied()
                            .filter(|&k| pattern_matches(&market, &clauses, &domain.prefs(i)[k]))
                            .collect()
                    }
                };
                let mut child = here.clone();
                child[i.0] = label.clone();
                reach[links[k].1] = Some(child);
                labels[k] = Some(label);
            }
        }
        let edges = links
            .iter()
            .zip(labels)
            .map(|(&(from, to), label)| Edge {
                from,
                to,
                label: label.expect("every edge is reachable"),
            })
            .collect();
        Self::new(market, domain, nodes, edges, root)
    }

    pub fn parse(text: &str, market: Option<&Market>) -> Result<Self> {
        Self::from_value(&serde_json::from_str(text)?, market)
    }

    /// JSON form with explicit labels.
    pub fn to_value(&self) -> Value {
        let nodes: Vec<Value> = self
            .nodes
            .iter()
            .map(|n| match &n.kind {
                NodeKind::Move(a) => json!({"id": n.id, "agent": self.market.agent_name(*a)}),
                NodeKind::Leaf(al) => json!({"id": n.id, "alloc": allocation_to_value(&self.market, al)}),
            })
            .collect();
        let edges: Vec<Value> = self
            .edges
            .iter()
            .map(|e| {
                let NodeKind::Move(i) = self.nodes[e.from].kind else { unreachable!() };
                let prefs: Vec<Value> = e
                    .label
                    .iter()
                    .map(|&k| json!(self.domain.prefs(i)[k].display(&self.market)))
                    .collect();
                json!({
                    "from": self.nodes[e.from].id,
                    "to": self.nodes[e.to].id,
                    "label": {"explicit": prefs},
                })
            })
            .collect();
        let mut out = Map::new();
        out.insert("market".into(), market_to_value(&self.market, None));
        out.insert("domain".into(), domain_to_value(&self.market, &self.domain));
        out.insert("nodes".into(), Value::Array(nodes));
        out.insert("edges".into(), Value::Array(edges));
        out.insert("root".into(), json!(self.nodes[self.root].id));
        Value::Object(out)
    }

    pub fn market(&self) -> &Market {
        &self.market
    }

    pub fn domain(&self) -> &PreferenceDomain {
        &self.domain
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    /// Outgoing edge indices of `v`, in declaration order.
    pub fn out_edges(&self, v: usize) -> &[usize] {
        &self.out[v]
    }

    pub fn parent_edge(&self, v: usize) -> Option<usize> {
        self.parent[v]
    }

    /// Per agent, the preferences consistent with the path to `v`.
    pub fn possible_sets(&self, v: usize) -> &[PrefSet] {
        &self.reach[v]
    }

    fn mover(&self, v: usize) -> Option<AgentId> {
        match self.nodes[v].kind {
            NodeKind::Move(a) => Some(a),
            NodeKind::Leaf(_) => None,
        }
    }

    /// The label the mover of `v` inherited: her latest label on the path, or
    /// her whole admissible set.
    fn inherited(&self, v: usize) -> &PrefSet {
        let i = self.mover(v).expect("internal node");
        &self.reach[v][i.0]
    }

    fn witness(&self, v: usize, agent: Option<AgentId>, detail: String) -> VerdictWitness {
        VerdictWitness {
            node: self.nodes[v].id.clone(),
            agent,
            preference: None,
            profiles: Vec::new(),
            detail,
        }
    }

    pub fn validate(&self) -> VerificationVerdict {
        for v in 0..self.nodes.len() {
            let Some(i) = self.mover(v) else { continue };
            let outs = &self.out[v];
            if outs.is_empty() {
                return VerificationVerdict::fail(
                    Property::Valid,
                    self.witness(v, Some(i), "internal node without outgoing edges".into()),
                );
            }
            let mut union = PrefSet::new();
            for &k in outs {
                let label = &self.edges[k].label;
                if label.is_empty() {
                    return VerificationVerdict::fail(
                        Property::Valid,
                        self.witness(v, Some(i), format!("empty label on edge to `{}`", self.nodes[self.edges[k].to].id)),
                    );
                }
                if !label.is_disjoint(&union) {
                    return VerificationVerdict::fail(
                        Property::Valid,
                        self.witness(v, Some(i), "sibling labels overlap".into()),
                    );
                }
                union.extend(label.iter().copied());
            }
            if &union != self.inherited(v) {
                return VerificationVerdict::fail(
                    Property::Valid,
                    self.witness(
                        v,
                        Some(i),
                        format!(
                            "outgoing labels cover {} preferences, the mover's possible set has {}",
                            union.len(),
                            self.inherited(v).len()
                        ),
                    ),
                );
            }
        }
        VerificationVerdict::pass(Property::Valid)
    }

    fn require_valid(&self) -> Result<()> {
        let v = self.validate();
        match v.witness {
            None => Ok(()),
            Some(w) => Err(Error::Mechanism(format!("invalid at `{}`: {}", w.node, w.detail))),
        }
    }

    /// Follows the unique path selected by `p` and returns the leaf allocation.
    pub fn run(&self, p: &PreferenceProfile) -> Result<Allocation> {
        let mut v = self.root;
        loop {
            match &self.nodes[v].kind {
                NodeKind::Leaf(alloc) => return Ok(alloc.clone()),
                NodeKind::Move(i) => {
                    let outside = || Error::OutsideDomain(self.market.agent_name(*i).to_string());
                    let k = self.domain.pref_index(*i, p.get(*i)).ok_or_else(outside)?;
                    let e = self.out[v]
                        .iter()
                        .find(|&&e| self.edges[e].label.contains(&k))
                        .ok_or_else(outside)?;
                    v = self.edges[*e].to;
                }
            }
        }
    }

    /// The induced rule on the whole domain.
    pub fn outcome_table(&self) -> Result<RuleTable> {
        RuleTable::tabulate(&self.domain, |p| self.run(p))
    }

    pub fn implements(&self, rule: &RuleTable) -> Result<VerificationVerdict> {
        self.require_valid()?;
        let own = self.outcome_table()?;
        if own.len() != rule.len() {
            return Err(Error::MarketMismatch("rule table and domain sizes differ".into()));
        }
        let first = (0..own.len()).find(|&k| own.get(k) != rule.get(k));
        Ok(VerificationVerdict::from_option(
            Property::Implements,
            first.map(|k| VerdictWitness {
                node: self.nodes[self.root].id.clone(),
                agent: None,
                preference: None,
                profiles: vec![self.domain.profile_at(k)],
                detail: format!(
                    "mechanism gives {}, rule gives {}",
                    own.get(k).display(&self.market),
                    rule.get(k).display(&self.market)
                ),
            }),
        ))
    }

    /// No agent moves twice on any root-to-leaf path.
    pub fn check_simple(&self) -> VerificationVerdict {
        for v in 0..self.nodes.len() {
            let Some(i) = self.mover(v) else { continue };
            let mut up = self.parent[v];
            while let Some(k) = up {
                let u = self.edges[k].from;
                if self.mover(u) == Some(i) {
                    return VerificationVerdict::fail(
                        Property::Simple,
                        self.witness(
                            v,
                            Some(i),
                            format!(
                                "agent `{}` already moved at `{}`",
                                self.market.agent_name(i),
                                self.nodes[u].id
                            ),
                        ),
                    );
                }
                up = self.parent[u];
            }
        }
        VerificationVerdict::pass(Property::Simple)
    }

    /// Flat domain indices of the profiles through `v`, grouped by the
    /// mover's preference index.
    fn profiles_by_mover(&self, v: usize, i: AgentId) -> Vec<(usize, Vec<usize>)> {
        let sets = &self.reach[v];
        sets[i.0]
            .iter()
            .map(|&own| {
                let flats = sets
                    .iter()
                    .enumerate()
                    .map(|(j, s)| {
                        if j == i.0 {
                            vec![own]
                        } else {
                            s.iter().copied().collect()
                        }
                    })
                    .multi_cartesian_product()
                    .map(|digits| self.domain.index_of_digits(&digits))
                    .collect();
                (own, flats)
            })
            .collect()
    }

    fn dominance_grouped(&self, table: &RuleTable, strong: bool) -> Option<VerdictWitness> {
        let property = if strong { "SOSP" } else { "OSP" };
        for v in 0..self.nodes.len() {
            let Some(i) = self.mover(v) else { continue };
            let groups: HashMap<usize, Vec<usize>> = self.profiles_by_mover(v, i).into_iter().collect();
            let outcome = |flat: usize| table.get(flat).get(i);
            for &e in &self.out[v] {
                let label = &self.edges[e].label;
                for &own in label {
                    let pref = &self.domain.prefs(i)[own];
                    let pos = |flat: usize| pref.position(&self.market, outcome(flat));
                    let same: Vec<usize> = if strong {
                        label.iter().flat_map(|k| groups[k].iter().copied()).collect()
                    } else {
                        groups[&own].clone()
                    };
                    let worst = same.iter().copied().max_by_key(|&f| (pos(f), std::cmp::Reverse(f)));
                    let best = self.inherited(v)
                        .difference(label)
                        .flat_map(|k| groups[k].iter().copied())
                        .min_by_key(|&f| (pos(f), f));
                    if let (Some(w), Some(b)) = (worst, best) {
                        if pos(b) < pos(w) {
                            return Some(VerdictWitness {
                                node: self.nodes[v].id.clone(),
                                agent: Some(i),
                                preference: Some(pref.clone()),
                                profiles: vec![self.domain.profile_at(w), self.domain.profile_at(b)],
                                detail: format!(
                                    "{property}: worst outcome {} on the chosen edge, {} reachable by deviating",
                                    self.market.item_name(outcome(w)),
                                    self.market.item_name(outcome(b))
                                ),
                            });
                        }
                    }
                }
            }
        }
        None
    }

    fn edge_of(&self, v: usize) -> HashMap<usize, usize> {
        self.out[v]
            .iter()
            .flat_map(|&e| self.edges[e].label.iter().map(move |&k| (k, e)))
            .collect()
    }

    /// Literal pair / triple quantification over profiles through each node.
    fn dominance_naive(&self, table: &RuleTable, strong: bool) -> Result<Option<VerdictWitness>> {
        for v in 0..self.nodes.len() {
            let Some(i) = self.mover(v) else { continue };
            let edge_of = self.edge_of(v);
            let through: Vec<(usize, usize)> = self
                .profiles_by_mover(v, i)
                .into_iter()
                .flat_map(|(own, flats)| flats.into_iter().map(move |f| (own, f)))
                .collect();
            let cube = (through.len() as u128).pow(if strong { 3 } else { 2 });
            if cube > 200_000_000 {
                return Err(Error::LimitExceeded(format!(
                    "naive check at `{}` needs {cube} comparisons",
                    self.nodes[v].id
                )));
            }
            let outcome = |flat: usize| table.get(flat).get(i);
            for &(own, truth) in &through {
                let pref = &self.domain.prefs(i)[own];
                let ok = |a: usize, b: usize| pref.weakly_prefers(&self.market, outcome(a), outcome(b));
                for &(dev_own, dev) in &through {
                    if edge_of[&dev_own] == edge_of[&own] {
                        continue;
                    }
                    if strong {
                        for &(same_own, same) in &through {
                            if edge_of[&same_own] == edge_of[&own] && !ok(same, dev) {
                                return Ok(Some(VerdictWitness {
                                    node: self.nodes[v].id.clone(),
                                    agent: Some(i),
                                    preference: Some(pref.clone()),
                                    profiles: vec![
                                        self.domain.profile_at(truth),
                                        self.domain.profile_at(same),
                                        self.domain.profile_at(dev),
                                    ],
                                    detail: "SOSP violated".into(),
                                }));
                            }
                        }
                    } else if !ok(truth, dev) {
                        return Ok(Some(VerdictWitness {
                            node: self.nodes[v].id.clone(),
                            agent: Some(i),
                            preference: Some(pref.clone()),
                            profiles: vec![self.domain.profile_at(truth), self.domain.profile_at(dev)],
                            detail: "OSP violated".into(),
                        }));
                    }
                }
            }
        }
        Ok(None)
    }

    pub fn check_osp(&self) -> Result<VerificationVerdict> {
        self.require_valid()?;
        let table = self.outcome_table()?;
        Ok(VerificationVerdict::from_option(Property::Osp, self.dominance_grouped(&table, false)))
    }

    pub fn check_sosp(&self) -> Result<VerificationVerdict> {
        self.require_valid()?;
        let table = self.outcome_table()?;
        Ok(VerificationVerdict::from_option(Property::Sosp, self.dominance_grouped(&table, true)))
    }

    pub fn check_osp_naive(&self) -> Result<VerificationVerdict> {
        self.require_valid()?;
        let table = self.outcome_table()?;
        Ok(VerificationVerdict::from_option(Property::Osp, self.dominance_naive(&table, false)?))
    }

    pub fn check_sosp_naive(&self) -> Result<VerificationVerdict> {
        self.require_valid()?;
        let table = self.outcome_table()?;
        Ok(VerificationVerdict::from_option(Property::Sosp, self.dominance_naive(&table, true)?))
    }

    /// Runs the requested checks; `implements` needs a rule.
    pub fn verify(&self, props: &[Property], rule: Option<&RuleTable>) -> Result<Vec<VerificationVerdict>> {
        props
            .iter()
            .map(|&p| match p {
                Property::Valid => Ok(self.validate()),
                Property::Simple => Ok(self.check_simple()),
                Property::Osp => self.check_osp(),
                Property::Sosp => self.check_sosp(),
                Property::Implements => {
                    let rule = rule.ok_or_else(|| Error::Input("`implements` needs a rule".into()))?;
                    self.implements(rule)
                }
            })
            .collect()
    }
}

pub fn verdict_to_value(market: &Market, v: &VerificationVerdict) -> Value {
    let witness = v.witness.as_ref().map(|w| {
        json!({
            "node": w.node,
            "agent": w.agent.map(|a| market.agent_name(a).to_string()),
            "preference": w.preference.as_ref().map(|p| p.display(market)),
            "profiles": w.profiles.iter().map(|p| crate::json::profile_to_value(market, p)).collect::<Vec<_>>(),
            "detail": w.detail,
        })
    });
    json!({"property": v.property.as_str(), "holds": v.holds, "witness": witness})
}

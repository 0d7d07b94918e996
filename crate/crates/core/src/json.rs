//! JSON encodings of markets, profiles, domains and allocations.
//!
//! ```json
//! {"agents":["1","2"],"objects":["a1","a2"],"priorities":{"a1":["1","2"],"a2":["2","1"]}}
//! {"1":["@0","a2","a1"],"2":["a1","a2","@0"]}
//! {"kind":"explicit","prefs":{"1":[["a1","a2","@0"]],"2":["a2 a1 @0"]}}
//! ```
//!
//! Rankings may be written either as token arrays or as whitespace separated
//! strings. Objects are emitted with keys in market declaration order.

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::model::{
    AgentId, Allocation, Market, Preference, PreferenceDomain, PreferenceProfile, PriorityOrder,
    PriorityStructure,
};

fn object<'v>(v: &'v Value, what: &str) -> Result<&'v Map<String, Value>> {
    v.as_object()
        .ok_or_else(|| Error::Input(format!("{what}: expected a JSON object")))
}

fn string_list(v: &Value, what: &str) -> Result<Vec<String>> {
    v.as_array()
        .ok_or_else(|| Error::Input(format!("{what}: expected an array")))?
        .iter()
        .map(|t| {
            t.as_str()
                .map(str::to_string)
                .ok_or_else(|| Error::Input(format!("{what}: expected string tokens")))
        })
        .collect()
}

/// Parses `{"agents", "objects", "priorities"?}`.
pub fn market_from_value(v: &Value) -> Result<(Market, Option<PriorityStructure>)> {
    let obj = object(v, "market")?;
    let agents = string_list(
        obj.get("agents")
            .ok_or_else(|| Error::Input("market: missing `agents`".into()))?,
        "agents",
    )?;
    let objects = string_list(
        obj.get("objects")
            .ok_or_else(|| Error::Input("market: missing `objects`".into()))?,
        "objects",
    )?;
    let market = Market::new(agents, objects)?;
    let priorities = match obj.get("priorities") {
        None | Some(Value::Null) => None,
        Some(p) => Some(priorities_from_value(&market, p)?),
    };
    Ok((market, priorities))
}

pub fn priorities_from_value(market: &Market, v: &Value) -> Result<PriorityStructure> {
    let obj = object(v, "priorities")?;
    for key in obj.keys() {
        market.object(key)?;
    }
    let orders = market
        .objects()
        .map(|o| {
            let name = market.object_name(o);
            let col = obj
                .get(name)
                .ok_or_else(|| Error::Input(format!("priorities: missing object `{name}`")))?;
            PriorityOrder::from_names(market, string_list(col, name)?)
        })
        .collect::<Result<Vec<_>>>()?;
    PriorityStructure::new(market, orders)
}

pub fn parse_market(text: &str) -> Result<(Market, Option<PriorityStructure>)> {
    market_from_value(&serde_json::from_str(text)?)
}

/// Parses a market that must carry priorities.
pub fn parse_market_with_priorities(text: &str) -> Result<(Market, PriorityStructure)> {
    match parse_market(text)? {
        (m, Some(s)) => Ok((m, s)),
        (_, None) => Err(Error::Input("market: missing `priorities`".into())),
    }
}

pub fn market_to_value(market: &Market, priorities: Option<&PriorityStructure>) -> Value {
    let mut out = Map::new();
    out.insert("agents".into(), json!(market.agent_names()));
    out.insert("objects".into(), json!(market.object_names()));
    if let Some(s) = priorities {
        out.insert("priorities".into(), priorities_to_value(market, s));
    }
    Value::Object(out)
}

pub fn priorities_to_value(market: &Market, s: &PriorityStructure) -> Value {
    let mut out = Map::new();
    for o in market.objects() {
        let col: Vec<&str> = s
            .order(o)
            .ranking()
            .iter()
            .map(|&a| market.agent_name(a))
            .collect();
        out.insert(market.object_name(o).to_string(), json!(col));
    }
    Value::Object(out)
}

/// A ranking given as a token array or a whitespace separated string.
pub fn preference_from_value(market: &Market, v: &Value) -> Result<Preference> {
    match v {
        Value::String(s) => Preference::parse(market, s),
        Value::Array(_) => Preference::from_tokens(market, string_list(v, "ranking")?),
        _ => Err(Error::Input("ranking: expected an array or a string".into())),
    }
}

pub fn preference_to_value(market: &Market, p: &Preference) -> Value {
    json!(p.tokens(market))
}

/// Parses `{agent: ranking}`, which must cover every agent exactly once.
pub fn profile_from_value(market: &Market, v: &Value) -> Result<PreferenceProfile> {
    let obj = object(v, "profile")?;
    for key in obj.keys() {
        market.agent(key)?;
    }
    let prefs = market
        .agents()
        .map(|a| {
            let name = market.agent_name(a);
            let r = obj
                .get(name)
                .ok_or_else(|| Error::Input(format!("profile: missing agent `{name}`")))?;
            preference_from_value(market, r)
        })
        .collect::<Result<Vec<_>>>()?;
    PreferenceProfile::new(market, prefs)
}

pub fn parse_profile(market: &Market, text: &str) -> Result<PreferenceProfile> {
    profile_from_value(market, &serde_json::from_str(text)?)
}

pub fn profile_to_value(market: &Market, p: &PreferenceProfile) -> Value {
    let mut out = Map::new();
    for a in market.agents() {
        out.insert(
            market.agent_name(a).to_string(),
            preference_to_value(market, p.get(a)),
        );
    }
    Value::Object(out)
}

pub fn domain_from_value(market: &Market, v: &Value) -> Result<PreferenceDomain> {
    let obj = object(v, "domain")?;
    let kind = obj
        .get("kind")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Input("domain: missing `kind`".into()))?;
    match kind {
        "no-outside" => Ok(PreferenceDomain::no_outside(market)),
        "with-outside" => Ok(PreferenceDomain::with_outside(market)),
        "explicit" => {
            let prefs = object(
                obj.get("prefs")
                    .ok_or_else(|| Error::Input("domain: missing `prefs`".into()))?,
                "prefs",
            )?;
            for key in prefs.keys() {
                market.agent(key)?;
            }
            let sets = market
                .agents()
                .map(|a| {
                    let name = market.agent_name(a);
                    prefs
                        .get(name)
                        .and_then(Value::as_array)
                        .ok_or_else(|| {
                            Error::Input(format!("domain: missing preference list for `{name}`"))
                        })?
                        .iter()
                        .map(|r| preference_from_value(market, r))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            PreferenceDomain::explicit(market, sets)
        }
        other => Err(Error::Input(format!("domain: unknown kind `{other}`"))),
    }
}

pub fn parse_domain(market: &Market, text: &str) -> Result<PreferenceDomain> {
    domain_from_value(market, &serde_json::from_str(text)?)
}

/// Factory kinds are written by name; explicit domains list every set.
pub fn domain_to_value(market: &Market, d: &PreferenceDomain) -> Value {
    use crate::model::DomainKind;
    match d.kind() {
        DomainKind::NoOutside | DomainKind::WithOutside => json!({"kind": d.kind().as_str()}),
        DomainKind::Explicit => {
            let mut prefs = Map::new();
            for a in market.agents() {
                let set: Vec<Value> = d
                    .prefs(a)
                    .iter()
                    .map(|p| preference_to_value(market, p))
                    .collect();
                prefs.insert(market.agent_name(a).to_string(), Value::Array(set));
            }
            json!({"kind": "explicit", "prefs": prefs})
        }
    }
}

pub fn allocation_to_value(market: &Market, alloc: &Allocation) -> Value {
    let mut out = Map::new();
    for a in market.agents() {
        out.insert(
            market.agent_name(a).to_string(),
            json!(market.item_name(alloc.get(a))),
        );
    }
    Value::Object(out)
}

/// Parses `{agent: item}`, covering every agent.
pub fn allocation_from_value(market: &Market, v: &Value) -> Result<Allocation> {
    let obj = object(v, "allocation")?;
    for key in obj.keys() {
        market.agent(key)?;
    }
    let items = market
        .agents()
        .map(|a| {
            let name = market.agent_name(a);
            let tok = obj
                .get(name)
                .and_then(Value::as_str)
                .ok_or_else(|| Error::Input(format!("allocation: missing agent `{name}`")))?;
            market.item(tok)
        })
        .collect::<Result<Vec<_>>>()?;
    Allocation::new(market, items)
}

pub(crate) fn agent_names(market: &Market, agents: impl IntoIterator<Item = AgentId>) -> Value {
    Value::Array(
        agents
            .into_iter()
            .map(|a| json!(market.agent_name(a)))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    const TABLE: &str = r#"{"agents":["1","2","3","4"],"objects":["a1","a2","a3","a4"],
        "priorities":{"a1":["1","4","3","2"],"a2":["2","1","3","4"],
                      "a3":["3","2","4","1"],"a4":["4","3","2","1"]}}"#;

    #[test]
    fn market_round_trip() {
        let (m, s) = parse_market(TABLE).unwrap();
        let v = market_to_value(&m, s.as_ref());
        let (m2, s2) = market_from_value(&v).unwrap();
        assert_eq!(m, m2);
        assert_eq!(s, s2);
        assert_eq!(market_to_value(&m2, s2.as_ref()), v);
    }

    #[test]
    fn priorities_must_cover_objects() {
        let bad = r#"{"agents":["1"],"objects":["a","b"],"priorities":{"a":["1"]}}"#;
        assert!(parse_market(bad).is_err());
        let unknown = r#"{"agents":["1"],"objects":["a"],"priorities":{"a":["1"],"z":["1"]}}"#;
        assert!(parse_market(unknown).is_err());
        let partial = r#"{"agents":["1","2"],"objects":["a"],"priorities":{"a":["1"]}}"#;
        assert!(parse_market(partial).is_err());
    }

    #[test]
    fn profile_accepts_strings_and_arrays() {
        let (m, _) = parse_market(TABLE).unwrap();
        let p = parse_profile(
            &m,
            r#"{"1":["@0","a2","a1","a3","a4"],"2":"a1 @0 a2 a3 a4",
                "3":"a1 a2 a3 @0 a4","4":"a3 a2 a1 a4 @0"}"#,
        )
        .unwrap();
        assert_eq!(p.get(AgentId(1)).display(&m), "a1 @0 a2 a3 a4");
        let v = profile_to_value(&m, &p);
        assert_eq!(profile_from_value(&m, &v).unwrap(), p);
        assert!(parse_profile(&m, r#"{"1":["a1"]}"#).is_err());
    }

    #[test]
    fn explicit_domain_round_trip() {
        let m = Market::with_sizes(2, 2);
        let d = parse_domain(
            &m,
            r#"{"kind":"explicit","prefs":{"1":["a2 a1 @0","a1 a2 @0"],"2":[["a1","@0","a2"]]}}"#,
        )
        .unwrap();
        assert_eq!(d.profile_count(), Some(2));
        assert_eq!(d.prefs(AgentId(0))[0].display(&m), "a1 a2 @0");
        let v = domain_to_value(&m, &d);
        let d2 = domain_from_value(&m, &v).unwrap();
        assert_eq!(domain_to_value(&m, &d2), v);
        assert!(parse_domain(&m, r#"{"kind":"bogus"}"#).is_err());
    }

    #[test]
    fn allocation_round_trip() {
        let m = Market::with_sizes(2, 2);
        let a = Allocation::parse(&m, &["@0", "a1"]).unwrap();
        let v = allocation_to_value(&m, &a);
        assert_eq!(v.to_string(), r#"{"1":"@0","2":"a1"}"#);
        assert_eq!(allocation_from_value(&m, &v).unwrap(), a);
    }
}

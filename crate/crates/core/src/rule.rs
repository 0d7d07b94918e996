//! Assignment rules tabulated over a finite domain.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{Allocation, PreferenceDomain, PreferenceProfile};

/// Allocation per profile, indexed by the domain's flat profile index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RuleTable {
    outcomes: Vec<Allocation>,
}

impl RuleTable {
    /// Evaluates `f` on every profile of `d`, in parallel; the table order is
    /// the domain's enumeration order regardless of scheduling.
    pub fn tabulate<F>(d: &PreferenceDomain, f: F) -> Result<Self>
    where
        F: Fn(&PreferenceProfile) -> Result<Allocation> + Sync,
    {
        let count = d
            .profile_count()
            .ok_or_else(|| Error::LimitExceeded("profile count overflows".into()))?;
        let outcomes = (0..count)
            .into_par_iter()
            .map(|k| f(&d.profile_at(k)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { outcomes })
    }

    pub fn from_outcomes(outcomes: Vec<Allocation>) -> Self {
        Self { outcomes }
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn get(&self, index: usize) -> &Allocation {
        &self.outcomes[index]
    }

    pub fn outcomes(&self) -> &[Allocation] {
        &self.outcomes
    }

    pub fn outcome(&self, d: &PreferenceDomain, p: &PreferenceProfile) -> Option<&Allocation> {
        d.index_of(p).and_then(|k| self.outcomes.get(k))
    }
}

/// First profile index where two tables disagree.
pub fn first_disagreement(a: &RuleTable, b: &RuleTable) -> Option<usize> {
    if a.len() != b.len() {
        return Some(a.len().min(b.len()));
    }
    a.outcomes
        .par_iter()
        .zip(b.outcomes.par_iter())
        .position_first(|(x, y)| x != y)
}

//! Individuals, populations and the health-state registry.
//!
//! Health states are opaque labels. All structure on states enters through
//! the weight tables of the evaluators; the model only knows which label is
//! full health.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::ModelError;

/// Opaque, non-empty health-state label compared by exact equality.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HealthStateId(Arc<str>);

impl HealthStateId {
    pub fn new(label: impl AsRef<str>) -> Result<Self, ModelError> {
        let label = label.as_ref();
        if label.is_empty() {
            return Err(ModelError::EmptyLabel);
        }
        Ok(Self(Arc::from(label)))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for HealthStateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

impl fmt::Display for HealthStateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Serialize for HealthStateId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for HealthStateId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        HealthStateId::new(s).map_err(serde::de::Error::custom)
    }
}

/// Finite set of health states with one distinguished full-health state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawRegistry", into = "RawRegistry")]
pub struct HealthRegistry {
    states: BTreeSet<HealthStateId>,
    full_health: HealthStateId,
}

#[derive(Serialize, Deserialize)]
struct RawRegistry {
    states: Vec<HealthStateId>,
    full_health: HealthStateId,
}

impl TryFrom<RawRegistry> for HealthRegistry {
    type Error = ModelError;

    fn try_from(raw: RawRegistry) -> Result<Self, Self::Error> {
        HealthRegistry::new(raw.full_health, raw.states)
    }
}

impl From<HealthRegistry> for RawRegistry {
    fn from(reg: HealthRegistry) -> Self {
        RawRegistry {
            states: reg.states.into_iter().collect(),
            full_health: reg.full_health,
        }
    }
}

impl HealthRegistry {
    /// Builds a registry; `full_health` is added to the state set if absent.
    pub fn new(
        full_health: HealthStateId,
        states: impl IntoIterator<Item = HealthStateId>,
    ) -> Result<Self, ModelError> {
        let mut set: BTreeSet<HealthStateId> = states.into_iter().collect();
        set.insert(full_health.clone());
        Ok(Self {
            states: set,
            full_health,
        })
    }

    /// Convenience constructor from string labels.
    pub fn from_labels(full_health: &str, others: &[&str]) -> Result<Self, ModelError> {
        let fh = HealthStateId::new(full_health)?;
        let rest = others
            .iter()
            .map(HealthStateId::new)
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(fh, rest)
    }

    pub fn full_health(&self) -> &HealthStateId {
        &self.full_health
    }

    pub fn contains(&self, state: &HealthStateId) -> bool {
        self.states.contains(state)
    }

    pub fn states(&self) -> impl ExactSizeIterator<Item = &HealthStateId> {
        self.states.iter()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// States other than full health, in label order.
    pub fn impaired_states(&self) -> impl Iterator<Item = &HealthStateId> {
        self.states.iter().filter(move |s| **s != self.full_health)
    }
}

/// One individual: health state, productivity in [0, 1], lifetime in years.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub state: HealthStateId,
    pub productivity: f64,
    pub lifetime: f64,
}

impl Profile {
    pub fn new(state: HealthStateId, productivity: f64, lifetime: f64) -> Self {
        Self {
            state,
            productivity,
            lifetime,
        }
    }

    fn check(&self, index: usize) -> Result<(), ModelError> {
        if !(0.0..=1.0).contains(&self.productivity) {
            return Err(ModelError::OutOfRangeProductivity(index));
        }
        if self.lifetime.is_nan() || self.lifetime.is_infinite() {
            return Err(ModelError::NonFiniteLifetime(index));
        }
        if self.lifetime < 0.0 {
            return Err(ModelError::NegativeLifetime(index));
        }
        Ok(())
    }
}

/// Ordered list of profiles; position `i` is individual `i`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Distribution {
    profiles: Vec<Profile>,
}

impl Distribution {
    pub fn new(profiles: Vec<Profile>) -> Self {
        Self { profiles }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn profiles(&self) -> &[Profile] {
        &self.profiles
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&Profile> {
        self.profiles.get(i)
    }

    pub fn push(&mut self, p: Profile) {
        self.profiles.push(p);
    }

    pub fn into_profiles(self) -> Vec<Profile> {
        self.profiles
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Profile> {
        self.profiles.iter()
    }

    /// Checks every profile against the registry and the attribute bounds.
    pub fn validate(&self, reg: &HealthRegistry) -> Result<(), ModelError> {
        for (i, p) in self.profiles.iter().enumerate() {
            if !reg.contains(&p.state) {
                return Err(ModelError::UnknownState(p.state.to_string()));
            }
            p.check(i)?;
        }
        Ok(())
    }

    /// Bounds check only, without a registry.
    pub fn validate_attributes(&self) -> Result<(), ModelError> {
        self.profiles
            .iter()
            .enumerate()
            .try_for_each(|(i, p)| p.check(i))
    }

    /// Returns the distribution with position `k` holding the old profile `perm[k]`.
    pub fn permute(&self, perm: &[usize]) -> Result<Distribution, ModelError> {
        let n = self.profiles.len();
        if perm.len() != n {
            return Err(ModelError::InvalidPermutation);
        }
        let mut seen = vec![false; n];
        for &j in perm {
            if j >= n || seen[j] {
                return Err(ModelError::InvalidPermutation);
            }
            seen[j] = true;
        }
        Ok(Distribution::new(
            perm.iter().map(|&j| self.profiles[j].clone()).collect(),
        ))
    }

    /// Copy of the distribution with individual `i` replaced.
    pub fn replace_profile(&self, i: usize, p: Profile) -> Result<Distribution, ModelError> {
        if i >= self.profiles.len() {
            return Err(ModelError::IndexOutOfRange {
                index: i,
                len: self.profiles.len(),
            });
        }
        let mut out = self.clone();
        out.profiles[i] = p;
        Ok(out)
    }

    pub(crate) fn profiles_mut(&mut self) -> &mut [Profile] {
        &mut self.profiles
    }

    /// Total lifetime over all individuals.
    pub fn total_lifetime(&self) -> f64 {
        self.profiles.iter().map(|p| p.lifetime).sum()
    }
}

impl FromIterator<Profile> for Distribution {
    fn from_iter<I: IntoIterator<Item = Profile>>(iter: I) -> Self {
        Distribution::new(iter.into_iter().collect())
    }
}

impl<'a> IntoIterator for &'a Distribution {
    type Item = &'a Profile;
    type IntoIter = std::slice::Iter<'a, Profile>;

    fn into_iter(self) -> Self::IntoIter {
        self.profiles.iter()
    }
}

/// Label of the full-health state in the worked example.
pub const EXAMPLE_FULL_HEALTH: &str = "a*";
/// Label of the impaired state in the worked example.
pub const EXAMPLE_IMPAIRED: &str = "a";

/// Registry `{a*, a}` used by the worked example.
pub fn example_registry() -> HealthRegistry {
    HealthRegistry::from_labels(EXAMPLE_FULL_HEALTH, &[EXAMPLE_IMPAIRED])
        .expect("static labels are non-empty")
}

/// The two five-person distributions of the worked example, `(d_delta, d_lambda)`.
///
/// Everyone in `d_delta` is in full health; in `d_lambda` everyone but the
/// first individual is in the impaired state `a`.
pub fn example1() -> (Distribution, Distribution) {
    let full = HealthStateId::new(EXAMPLE_FULL_HEALTH).unwrap();
    let a = HealthStateId::new(EXAMPLE_IMPAIRED).unwrap();
    let rows = [
        (1.0, 40.0),
        (0.5, 40.0),
        (0.0, 40.0),
        (0.5, 10.0),
        (0.0, 0.0),
    ];
    let delta = rows
        .iter()
        .map(|&(p, t)| Profile::new(full.clone(), p, t))
        .collect();
    let lambda_rows = [
        (1.0, 40.0),
        (1.0, 40.0),
        (0.5, 40.0),
        (0.5, 10.0),
        (0.0, 0.0),
    ];
    let lambda = lambda_rows
        .iter()
        .enumerate()
        .map(|(i, &(p, t))| {
            let s = if i == 0 { full.clone() } else { a.clone() };
            Profile::new(s, p, t)
        })
        .collect();
    (delta, lambda)
}

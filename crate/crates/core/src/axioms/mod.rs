//! Sampled conformance checks of evaluators against the seventeen axioms.
//!
//! Each axiom is turned into a numeric property: the quantified objects
//! (distributions, individuals, constants, replacement attributes) are drawn
//! at random and the conclusion is asserted on evaluation values within an
//! absolute tolerance. A failing trial yields a [`Witness`] that can be
//! replayed against the evaluator.
//!
//! Continuity is only checked in a weakened sequential form: each individual's
//! productivity and lifetime approach their limit along a geometric sequence
//! with ratio 1/2 over [`CONT_STEPS`] steps, and the running error bound must
//! contract. Full topological continuity is not falsifiable by sampling.

pub mod sampler;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{AxiomError, EvalError};
use crate::evaluators::{EvaluatorSpec, FamilyId, Preference};
use crate::model::{Distribution, HealthRegistry, Profile};
use sampler::ProfileSampler;

/// Number of halving steps in the sequential continuity check.
pub const CONT_STEPS: usize = 20;
/// The final continuity error must be at most this fraction of the largest error seen.
pub const CONT_CONTRACTION: f64 = 0.9;

/// Note attached to reports about how continuity is checked.
pub const CONT_NOTE: &str = "CONT is checked in a weakened sequential form: every individual's \
productivity and lifetime approach their limit geometrically (ratio 1/2, 20 steps) and the \
final evaluation error must be within tolerance or at most 0.9 of the largest error along the \
sequence. Full topological continuity cannot be falsified by sampling.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum AxiomId {
    Anon,
    Sep,
    Cont,
    Zero,
    Fhps,
    Lmfhp,
    Pld,
    Pi,
    Tichfp,
    Hi,
    Tifhcp,
    Pifhct,
    Tiup,
    Tichp,
    Picht,
    Pict,
    Tifhp,
}

impl AxiomId {
    pub const ALL: [AxiomId; 17] = [
        AxiomId::Anon,
        AxiomId::Sep,
        AxiomId::Cont,
        AxiomId::Zero,
        AxiomId::Fhps,
        AxiomId::Lmfhp,
        AxiomId::Pld,
        AxiomId::Pi,
        AxiomId::Tichfp,
        AxiomId::Hi,
        AxiomId::Tifhcp,
        AxiomId::Pifhct,
        AxiomId::Tiup,
        AxiomId::Tichp,
        AxiomId::Picht,
        AxiomId::Pict,
        AxiomId::Tifhp,
    ];

    /// The seven axioms shared by every characterization.
    pub const COMMON: [AxiomId; 7] = [
        AxiomId::Anon,
        AxiomId::Sep,
        AxiomId::Cont,
        AxiomId::Zero,
        AxiomId::Fhps,
        AxiomId::Lmfhp,
        AxiomId::Pld,
    ];

    pub fn code(self) -> &'static str {
        match self {
            AxiomId::Anon => "ANON",
            AxiomId::Sep => "SEP",
            AxiomId::Cont => "CONT",
            AxiomId::Zero => "ZERO",
            AxiomId::Fhps => "FHPS",
            AxiomId::Lmfhp => "LMFHP",
            AxiomId::Pld => "PLD",
            AxiomId::Pi => "PI",
            AxiomId::Tichfp => "TICHFP",
            AxiomId::Hi => "HI",
            AxiomId::Tifhcp => "TIFHCP",
            AxiomId::Pifhct => "PIFHCT",
            AxiomId::Tiup => "TIUP",
            AxiomId::Tichp => "TICHP",
            AxiomId::Picht => "PICHT",
            AxiomId::Pict => "PICT",
            AxiomId::Tifhp => "TIFHP",
        }
    }

    pub fn is_common(self) -> bool {
        AxiomId::COMMON.contains(&self)
    }

    fn index(self) -> u64 {
        AxiomId::ALL.iter().position(|a| *a == self).unwrap() as u64
    }
}

impl fmt::Display for AxiomId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for AxiomId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let up = s.to_ascii_uppercase();
        AxiomId::ALL
            .into_iter()
            .find(|a| a.code() == up)
            .ok_or_else(|| format!("unknown axiom `{s}`"))
    }
}

/// Sampling ranges, trial budget and tolerance of a conformance run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckConfig {
    pub trials: u64,
    pub tolerance: f64,
    pub seed: u64,
    pub max_individuals: usize,
    pub t_max: f64,
    pub registry: HealthRegistry,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self {
            trials: 10_000,
            tolerance: 1e-9,
            seed: 42,
            max_individuals: 6,
            t_max: 80.0,
            registry: HealthRegistry::from_labels("a*", &["a", "b", "c"])
                .expect("static labels are non-empty"),
        }
    }
}

impl CheckConfig {
    pub fn validate(&self) -> Result<(), AxiomError> {
        if self.trials == 0 {
            return Err(AxiomError::InvalidConfig(
                "trials must be at least 1".into(),
            ));
        }
        if !(self.tolerance > 0.0) {
            return Err(AxiomError::InvalidConfig(
                "tolerance must be positive".into(),
            ));
        }
        if self.max_individuals < 2 {
            return Err(AxiomError::InvalidConfig(
                "max_individuals must be at least 2".into(),
            ));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(AxiomError::InvalidConfig(
                "t_max must be positive and finite".into(),
            ));
        }
        Ok(())
    }
}

/// The relation a witness asserts between its evaluation values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// `values[0]` and `values[1]` agree within tolerance.
    Indifferent,
    /// `values[0] >= values[1] - tol`.
    AtLeastAsGood,
    /// `values[0] > values[1] + tol`.
    StrictlyBetter,
    /// Comparison of `values[0]` with `values[1]` matches that of `values[2]` with `values[3]`.
    SameComparison,
    /// `values[1..]` converge to the limit `values[0]`.
    Converges,
}

impl Relation {
    /// True when the values break the relation.
    pub fn violated(self, values: &[f64], tol: f64) -> bool {
        match self {
            Relation::Indifferent => (values[0] - values[1]).abs() > tol,
            Relation::AtLeastAsGood => values[0] < values[1] - tol,
            Relation::StrictlyBetter => !(values[0] - values[1] > tol),
            Relation::SameComparison => {
                Preference::from_difference(values[0] - values[1], tol)
                    != Preference::from_difference(values[2] - values[3], tol)
            }
            Relation::Converges => {
                let limit = values[0];
                let errors: Vec<f64> = values[1..].iter().map(|v| (v - limit).abs()).collect();
                let last = *errors.last().unwrap_or(&0.0);
                let peak = errors.iter().copied().fold(0.0, f64::max);
                !(last <= tol || last <= CONT_CONTRACTION * peak)
            }
        }
    }
}

/// Counterexample to an axiom: the compared distributions and their values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub trial: u64,
    pub relation: Relation,
    /// Individuals the axiom instance quantifies over.
    pub individuals: Vec<usize>,
    /// The constant `c` or replacement value, when the axiom has one.
    pub constant: Option<f64>,
    pub distributions: Vec<Distribution>,
    pub values: Vec<f64>,
}

impl Witness {
    /// Re-evaluates the witness distributions and reports whether the
    /// relation is still violated at `tol`.
    pub fn replay(&self, spec: &EvaluatorSpec, tol: f64) -> Result<bool, EvalError> {
        let values = self
            .distributions
            .iter()
            .map(|d| spec.evaluate(d))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(self.relation.violated(&values, tol))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum VerdictResult {
    Pass { trials_run: u64 },
    Fail { witness: Box<Witness> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomVerdict {
    pub axiom: AxiomId,
    pub result: VerdictResult,
}

impl AxiomVerdict {
    pub fn passed(&self) -> bool {
        matches!(self.result, VerdictResult::Pass { .. })
    }

    pub fn witness(&self) -> Option<&Witness> {
        match &self.result {
            VerdictResult::Fail { witness } => Some(witness),
            VerdictResult::Pass { .. } => None,
        }
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-trial generator, a pure function of (seed, axiom, trial).
fn trial_rng(seed: u64, axiom: AxiomId, trial: u64) -> ChaCha8Rng {
    let s = splitmix(splitmix(seed ^ splitmix(axiom.index() + 1)) ^ trial);
    ChaCha8Rng::seed_from_u64(s)
}

struct TrialContext<'a> {
    spec: &'a EvaluatorSpec,
    sampler: &'a ProfileSampler,
    tol: f64,
}

struct Instance {
    relation: Relation,
    individuals: Vec<usize>,
    constant: Option<f64>,
    distributions: Vec<Distribution>,
}

impl Instance {
    fn new(relation: Relation, distributions: Vec<Distribution>) -> Self {
        Self {
            relation,
            individuals: Vec::new(),
            constant: None,
            distributions,
        }
    }

    fn at(mut self, individuals: &[usize]) -> Self {
        self.individuals = individuals.to_vec();
        self
    }

    fn with_constant(mut self, c: f64) -> Self {
        self.constant = Some(c);
        self
    }
}

fn set(d: &Distribution, i: usize, p: Profile) -> Distribution {
    d.replace_profile(i, p).expect("sampled index is in range")
}

fn two_distinct<R: Rng>(rng: &mut R, n: usize) -> (usize, usize) {
    let i = rng.random_range(0..n);
    let mut j = rng.random_range(0..n - 1);
    if j >= i {
        j += 1;
    }
    (i, j)
}

impl TrialContext<'_> {
    /// Draws the axiom's quantified objects; `None` when the instance is vacuous.
    fn instances<R: Rng>(&self, axiom: AxiomId, rng: &mut R, trial: u64) -> Vec<Instance> {
        let s = self.sampler;
        let full = s.full_health().clone();
        match axiom {
            AxiomId::Anon => {
                let d = s.trial_distribution(rng, 1, trial);
                let mut perm: Vec<usize> = (0..d.len()).collect();
                perm.shuffle(rng);
                let pd = d.permute(&perm).expect("shuffle is a bijection");
                vec![Instance::new(Relation::Indifferent, vec![d, pd]).at(&perm)]
            }
            AxiomId::Sep => {
                let d = s.trial_distribution(rng, 2, trial);
                let n = d.len();
                let d2: Distribution = (0..n).map(|_| s.profile(rng)).collect();
                // Nonempty proper subset, uniform over the 2^n - 2 choices.
                let mask = rng.random_range(1..(1u64 << n) - 1);
                let in_s = |k: usize| mask >> k & 1 == 1;
                let mix = |inside: &Distribution, outside: &Distribution| -> Distribution {
                    (0..n)
                        .map(|k| {
                            if in_s(k) { inside } else { outside }
                                .get(k)
                                .unwrap()
                                .clone()
                        })
                        .collect()
                };
                let subset: Vec<usize> = (0..n).filter(|&k| in_s(k)).collect();
                let a = d.clone();
                let b = mix(&d2, &d);
                let c = mix(&d, &d2);
                vec![Instance::new(Relation::SameComparison, vec![a, b, c, d2]).at(&subset)]
            }
            AxiomId::Cont => {
                let limit = s.trial_distribution(rng, 1, trial);
                let offsets: Vec<(f64, f64)> = limit
                    .iter()
                    .map(|p| {
                        (
                            s.productivity(rng) - p.productivity,
                            s.lifetime(rng) - p.lifetime,
                        )
                    })
                    .collect();
                let mut seq = vec![limit.clone()];
                let mut scale = 1.0;
                for _ in 0..CONT_STEPS {
                    let dk: Distribution = limit
                        .iter()
                        .zip(&offsets)
                        .map(|(p, &(dp, dt))| {
                            Profile::new(
                                p.state.clone(),
                                (p.productivity + dp * scale).clamp(0.0, 1.0),
                                (p.lifetime + dt * scale).max(0.0),
                            )
                        })
                        .collect();
                    seq.push(dk);
                    scale *= 0.5;
                }
                vec![Instance::new(Relation::Converges, seq)]
            }
            AxiomId::Zero => {
                let d = s.trial_distribution(rng, 1, trial);
                let i = rng.random_range(0..d.len());
                let p = d.get(i).unwrap();
                let d0 = set(&d, i, Profile::new(p.state.clone(), p.productivity, 0.0));
                let repl = Profile::new(s.state(rng), s.productivity(rng), 0.0);
                let d1 = set(&d0, i, repl);
                vec![Instance::new(Relation::Indifferent, vec![d0, d1]).at(&[i])]
            }
            AxiomId::Fhps => {
                let d = s.trial_distribution(rng, 1, trial);
                let i = rng.random_range(0..d.len());
                let p = d.get(i).unwrap().clone();
                let healthier = set(&d, i, Profile::new(full, p.productivity, p.lifetime));
                let productive = set(&d, i, Profile::new(p.state.clone(), 1.0, p.lifetime));
                vec![
                    Instance::new(Relation::AtLeastAsGood, vec![healthier, d.clone()]).at(&[i]),
                    Instance::new(Relation::AtLeastAsGood, vec![productive, d]).at(&[i]),
                ]
            }
            AxiomId::Lmfhp => {
                let d = s.trial_distribution(rng, 1, trial);
                let i = rng.random_range(0..d.len());
                let t = s.positive_up_to(rng, s.t_max());
                let shorter = rng.random::<f64>() * t;
                let longer_d = set(&d, i, Profile::new(full.clone(), 1.0, t));
                let shorter_d = set(&d, i, Profile::new(full, 1.0, shorter));
                vec![
                    Instance::new(Relation::StrictlyBetter, vec![longer_d, shorter_d])
                        .at(&[i])
                        .with_constant(t - shorter),
                ]
            }
            AxiomId::Pld => {
                let d = s.trial_distribution(rng, 1, trial);
                let i = rng.random_range(0..d.len());
                let p = d.get(i).unwrap();
                let zeroed = set(&d, i, Profile::new(p.state.clone(), p.productivity, 0.0));
                vec![Instance::new(Relation::AtLeastAsGood, vec![d, zeroed]).at(&[i])]
            }
            AxiomId::Pi => {
                let d = s.trial_distribution(rng, 1, trial);
                let i = rng.random_range(0..d.len());
                let p = d.get(i).unwrap();
                let new_p = s.productivity(rng);
                let d1 = set(&d, i, Profile::new(p.state.clone(), new_p, p.lifetime));
                vec![Instance::new(Relation::Indifferent, vec![d, d1])
                    .at(&[i])
                    .with_constant(new_p)]
            }
            AxiomId::Hi => {
                let d = s.trial_distribution(rng, 1, trial);
                let i = rng.random_range(0..d.len());
                let p = d.get(i).unwrap();
                match s.other_state(rng, &p.state) {
                    Some(other) => {
                        let d1 = set(&d, i, Profile::new(other, p.productivity, p.lifetime));
                        vec![Instance::new(Relation::Indifferent, vec![d, d1]).at(&[i])]
                    }
                    None => Vec::new(),
                }
            }
            AxiomId::Tichfp | AxiomId::Tifhcp | AxiomId::Tichp => {
                let (state, prod) = match axiom {
                    AxiomId::Tichfp => (s.state(rng), 1.0),
                    AxiomId::Tifhcp => (full, s.productivity(rng)),
                    _ => (s.state(rng), s.productivity(rng)),
                };
                self.time_swap(rng, trial, |_| (state.clone(), prod))
            }
            AxiomId::Pifhct | AxiomId::Picht | AxiomId::Pict => {
                let common = match axiom {
                    AxiomId::Pifhct => Some(full),
                    AxiomId::Picht => Some(s.state(rng)),
                    _ => None,
                };
                self.productivity_swap(rng, trial, common)
            }
            AxiomId::Tiup => {
                let d = s.trial_distribution(rng, 1, trial);
                let i = rng.random_range(0..d.len());
                let p = d.get(i).unwrap().clone();
                let d0 = set(&d, i, Profile::new(p.state.clone(), 0.0, p.lifetime));
                let other_t = s.lifetime(rng);
                let d1 = set(&d0, i, Profile::new(p.state, 0.0, other_t));
                vec![Instance::new(Relation::Indifferent, vec![d0, d1])
                    .at(&[i])
                    .with_constant(other_t)]
            }
            AxiomId::Tifhp => {
                let d = s.trial_distribution(rng, 2, trial);
                let (i, j) = two_distinct(rng, d.len());
                let (ti, tj) = (d.get(i).unwrap().lifetime, d.get(j).unwrap().lifetime);
                let base = set(&d, i, Profile::new(full.clone(), 1.0, ti));
                let base = set(&base, j, Profile::new(full.clone(), 1.0, tj));
                let c = s.positive_up_to(rng, s.t_max());
                let di = set(&base, i, Profile::new(full.clone(), 1.0, ti + c));
                let dj = set(&base, j, Profile::new(full, 1.0, tj + c));
                vec![Instance::new(Relation::Indifferent, vec![di, dj])
                    .at(&[i, j])
                    .with_constant(c)]
            }
        }
    }

    /// Gives `c` extra years to `i` or to `j`, both holding the same (state, productivity).
    fn time_swap<R: Rng>(
        &self,
        rng: &mut R,
        trial: u64,
        attrs: impl Fn(&mut R) -> (crate::model::HealthStateId, f64),
    ) -> Vec<Instance> {
        let s = self.sampler;
        let d = s.trial_distribution(rng, 2, trial);
        let (i, j) = two_distinct(rng, d.len());
        let (state, prod) = attrs(rng);
        let (ti, tj) = (d.get(i).unwrap().lifetime, d.get(j).unwrap().lifetime);
        let c = s.positive_up_to(rng, s.t_max());
        let mk = |a: f64, b: f64| {
            let x = set(&d, i, Profile::new(state.clone(), prod, a));
            set(&x, j, Profile::new(state.clone(), prod, b))
        };
        vec![
            Instance::new(Relation::Indifferent, vec![mk(ti + c, tj), mk(ti, tj + c)])
                .at(&[i, j])
                .with_constant(c),
        ]
    }

    /// Gives `c` extra productivity to `i` or to `j`, both with the same
    /// lifetime and, when `common` is set, the same state.
    fn productivity_swap<R: Rng>(
        &self,
        rng: &mut R,
        trial: u64,
        common: Option<crate::model::HealthStateId>,
    ) -> Vec<Instance> {
        let s = self.sampler;
        let d = s.trial_distribution(rng, 2, trial);
        let (i, j) = two_distinct(rng, d.len());
        let t = s.lifetime(rng);
        let (si, sj) = match &common {
            Some(a) => (a.clone(), a.clone()),
            None => (s.state(rng), s.state(rng)),
        };
        let pi = rng.random::<f64>();
        let pj = rng.random::<f64>();
        let c = s.positive_up_to(rng, 1.0 - pi.max(pj));
        let mk = |a: f64, b: f64| {
            let x = set(&d, i, Profile::new(si.clone(), a, t));
            set(&x, j, Profile::new(sj.clone(), b, t))
        };
        vec![Instance::new(
            Relation::Indifferent,
            vec![mk((pi + c).min(1.0), pj), mk(pi, (pj + c).min(1.0))],
        )
        .at(&[i, j])
        .with_constant(c)]
    }

    fn run(&self, axiom: AxiomId, seed: u64, trial: u64) -> Result<Option<Witness>, EvalError> {
        let mut rng = trial_rng(seed, axiom, trial);
        for inst in self.instances(axiom, &mut rng, trial) {
            let values = inst
                .distributions
                .iter()
                .map(|d| self.spec.evaluate(d))
                .collect::<Result<Vec<_>, _>>()?;
            if inst.relation.violated(&values, self.tol) {
                return Ok(Some(Witness {
                    trial,
                    relation: inst.relation,
                    individuals: inst.individuals,
                    constant: inst.constant,
                    distributions: inst.distributions,
                    values,
                }));
            }
        }
        Ok(None)
    }
}

/// Samples `cfg.trials` instances of `axiom` and reports the first violation.
///
/// Trials run in parallel; the earliest failing trial index is reported, so
/// the verdict does not depend on scheduling.
pub fn check_axiom(
    spec: &EvaluatorSpec,
    axiom: AxiomId,
    cfg: &CheckConfig,
) -> Result<AxiomVerdict, AxiomError> {
    cfg.validate()?;
    spec.validate(&cfg.registry)?;
    let sampler = ProfileSampler::new(&cfg.registry, cfg.max_individuals, cfg.t_max);
    let ctx = TrialContext {
        spec,
        sampler: &sampler,
        tol: cfg.tolerance,
    };
    let found = (0..cfg.trials)
        .into_par_iter()
        .find_map_first(|k| match ctx.run(axiom, cfg.seed, k) {
            Ok(None) => None,
            Ok(Some(w)) => Some(Ok(w)),
            Err(e) => Some(Err(e)),
        })
        .transpose()?;
    let result = match found {
        Some(witness) => VerdictResult::Fail {
            witness: Box::new(witness),
        },
        None => VerdictResult::Pass {
            trials_run: cfg.trials,
        },
    };
    Ok(AxiomVerdict { axiom, result })
}

pub fn check_axiom_set(
    spec: &EvaluatorSpec,
    axioms: &[AxiomId],
    cfg: &CheckConfig,
) -> Result<Vec<AxiomVerdict>, AxiomError> {
    axioms.iter().map(|&a| check_axiom(spec, a, cfg)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    MustPass,
    MayFail,
}

/// Axioms each family's characterization bundles require, beyond COMMON.
fn characterization_bundle(family: FamilyId) -> &'static [AxiomId] {
    use AxiomId::*;
    match family {
        FamilyId::Qaly => &[Pi, Tichfp],
        FamilyId::GenPaly => &[Hi, Tifhcp],
        FamilyId::AffinePaly => &[Hi, Tifhcp, Pifhct],
        FamilyId::LinearPaly => &[Hi, Tifhcp, Pifhct, Tiup],
        FamilyId::Pqaly => &[Tichp, Picht, Tiup],
        FamilyId::QalyPqaly => &[Tichp, Picht],
        FamilyId::QalyPaly => &[Tichp, Pict],
        FamilyId::PowerPqaly | FamilyId::Weighted => &[Tichp],
        FamilyId::Hpye => &[Tifhp],
        FamilyId::GenHpye => &[],
    }
}

/// Which axioms a family must satisfy for every legal parameterization.
///
/// COMMON plus the family's own characterization bundle, plus the bundles of
/// the enclosing general families: every time-linear family lies inside the
/// weighted family (TICHP) and the HPYE family (TIFHP). With a single-state
/// registry, HI is vacuous and therefore always satisfied.
pub fn expected_matrix(reg: &HealthRegistry, family: FamilyId) -> BTreeMap<AxiomId, Expectation> {
    let mut must: Vec<AxiomId> = AxiomId::COMMON.to_vec();
    must.extend_from_slice(characterization_bundle(family));
    if family.is_time_linear() {
        must.push(AxiomId::Tichp);
    }
    if family != FamilyId::GenHpye {
        must.push(AxiomId::Tifhp);
    }
    if reg.len() < 2 {
        must.push(AxiomId::Hi);
    }
    AxiomId::ALL
        .into_iter()
        .map(|a| {
            let e = if must.contains(&a) {
                Expectation::MustPass
            } else {
                Expectation::MayFail
            };
            (a, e)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformanceRow {
    pub axiom: AxiomId,
    pub expectation: Expectation,
    pub verdict: AxiomVerdict,
    /// A MustPass axiom that failed empirically.
    pub defect: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformanceReport {
    pub family: FamilyId,
    pub trials: u64,
    pub seed: u64,
    pub tolerance: f64,
    pub rows: Vec<ConformanceRow>,
    pub defects: Vec<AxiomId>,
    pub continuity_note: String,
}

impl ConformanceReport {
    pub fn has_defects(&self) -> bool {
        !self.defects.is_empty()
    }

    pub fn render_text(&self) -> String {
        let mut out = format!(
            "family {}  trials {}  seed {}  tolerance {:e}\n",
            self.family, self.trials, self.seed, self.tolerance
        );
        out.push_str(&format!(
            "{:<8} {:<10} {:<6} {}\n",
            "axiom", "expected", "result", "note"
        ));
        for row in &self.rows {
            let exp = match row.expectation {
                Expectation::MustPass => "must-pass",
                Expectation::MayFail => "may-fail",
            };
            let (res, note) = match &row.verdict.result {
                VerdictResult::Pass { trials_run } => ("pass", format!("{trials_run} trials")),
                VerdictResult::Fail { witness } => (
                    "FAIL",
                    format!(
                        "trial {} individuals {:?} values {:?}",
                        witness.trial,
                        witness.individuals,
                        witness
                            .values
                            .iter()
                            .take(4)
                            .map(|v| crate::report::fmt_sig(*v))
                            .collect::<Vec<_>>()
                    ),
                ),
            };
            let flag = if row.defect { "  DEFECT" } else { "" };
            out.push_str(&format!(
                "{:<8} {:<10} {:<6} {}{}\n",
                row.axiom.code(),
                exp,
                res,
                note,
                flag
            ));
        }
        out.push_str(&format!("defects: {}\n", self.defects.len()));
        out.push_str(&format!("note: {}\n", self.continuity_note));
        out
    }
}

/// Runs all seventeen axioms and flags every MustPass axiom that fails.
pub fn conformance_report(
    spec: &EvaluatorSpec,
    cfg: &CheckConfig,
) -> Result<ConformanceReport, AxiomError> {
    let expected = expected_matrix(&cfg.registry, spec.family());
    let mut rows = Vec::with_capacity(AxiomId::ALL.len());
    for axiom in AxiomId::ALL {
        let verdict = check_axiom(spec, axiom, cfg)?;
        let expectation = expected[&axiom];
        let defect = expectation == Expectation::MustPass && !verdict.passed();
        rows.push(ConformanceRow {
            axiom,
            expectation,
            verdict,
            defect,
        });
    }
    let defects = rows.iter().filter(|r| r.defect).map(|r| r.axiom).collect();
    Ok(ConformanceReport {
        family: spec.family(),
        trials: cfg.trials,
        seed: cfg.seed,
        tolerance: cfg.tolerance,
        rows,
        defects,
        continuity_note: CONT_NOTE.to_string(),
    })
}

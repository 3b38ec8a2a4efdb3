//! Population evaluation functions.
//!
//! Every family scores a distribution as a sum of per-individual terms. The
//! time-linear families weight each lifetime by a function of health and
//! productivity; the HPYE families read equivalent lifetimes from a grid and
//! optionally transform them before summing.

mod tables;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use tables::{
    GainTransform, HpyeTable, PiecewiseLinear, QualityWeights, ValueCurve, WeightSurface,
};

use crate::error::EvalError;
use crate::model::{Distribution, HealthRegistry, HealthStateId, Profile};

/// Default absolute tolerance for indifference.
pub const DEFAULT_INDIFFERENCE_TOL: f64 = 1e-9;

/// The eleven evaluator families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyId {
    Qaly,
    GenPaly,
    AffinePaly,
    LinearPaly,
    Pqaly,
    QalyPqaly,
    QalyPaly,
    PowerPqaly,
    Weighted,
    Hpye,
    GenHpye,
}

impl FamilyId {
    pub const ALL: [FamilyId; 11] = [
        FamilyId::Qaly,
        FamilyId::GenPaly,
        FamilyId::AffinePaly,
        FamilyId::LinearPaly,
        FamilyId::Pqaly,
        FamilyId::QalyPqaly,
        FamilyId::QalyPaly,
        FamilyId::PowerPqaly,
        FamilyId::Weighted,
        FamilyId::Hpye,
        FamilyId::GenHpye,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FamilyId::Qaly => "qaly",
            FamilyId::GenPaly => "gen_paly",
            FamilyId::AffinePaly => "affine_paly",
            FamilyId::LinearPaly => "linear_paly",
            FamilyId::Pqaly => "pqaly",
            FamilyId::QalyPqaly => "qaly_pqaly",
            FamilyId::QalyPaly => "qaly_paly",
            FamilyId::PowerPqaly => "power_pqaly",
            FamilyId::Weighted => "weighted",
            FamilyId::Hpye => "hpye",
            FamilyId::GenHpye => "gen_hpye",
        }
    }

    /// Families whose contribution is a weight times lifetime.
    pub fn is_time_linear(self) -> bool {
        !matches!(self, FamilyId::Hpye | FamilyId::GenHpye)
    }
}

impl fmt::Display for FamilyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FamilyId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FamilyId::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| format!("unknown evaluator family `{s}`"))
    }
}

/// An evaluator family together with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum EvaluatorSpec {
    /// Sum of `q(a) t`.
    Qaly { q: QualityWeights },
    /// Sum of `v(p) t`.
    GenPaly { v: ValueCurve },
    /// Sum of `(alpha p + 1 - alpha) t`.
    AffinePaly { alpha: f64 },
    /// Sum of `p t`.
    LinearPaly {},
    /// Sum of `q(a) p t`.
    Pqaly { q: QualityWeights },
    /// `delta` times the QALY sum plus `1 - delta` times the PQALY sum under `r`.
    QalyPqaly {
        delta: f64,
        q: QualityWeights,
        r: QualityWeights,
    },
    /// `sigma` times the QALY sum plus `1 - sigma` times the PALY sum.
    QalyPaly { sigma: f64, q: QualityWeights },
    /// Sum of `q(a) p^gamma t`.
    PowerPqaly { gamma: f64, q: QualityWeights },
    /// Sum of `w(a, p) t`.
    Weighted { w: WeightSurface },
    /// Sum of `f(a, p, t)`.
    Hpye { f: HpyeTable },
    /// Sum of `g(f(a, p, t))`.
    GenHpye { g: GainTransform, f: HpyeTable },
}

/// Outcome of comparing two distributions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preference {
    PreferFirst,
    Indifferent,
    PreferSecond,
}

impl Preference {
    /// Classifies a value difference `first - second`.
    pub fn from_difference(diff: f64, tol: f64) -> Self {
        if diff.abs() <= tol {
            Preference::Indifferent
        } else if diff > 0.0 {
            Preference::PreferFirst
        } else {
            Preference::PreferSecond
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Preference::PreferFirst => "first",
            Preference::Indifferent => "indifferent",
            Preference::PreferSecond => "second",
        }
    }
}

fn unit_param(name: &'static str, value: f64) -> Result<(), EvalError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(EvalError::InvalidParameter { name, value })
    }
}

impl EvaluatorSpec {
    pub fn family(&self) -> FamilyId {
        match self {
            EvaluatorSpec::Qaly { .. } => FamilyId::Qaly,
            EvaluatorSpec::GenPaly { .. } => FamilyId::GenPaly,
            EvaluatorSpec::AffinePaly { .. } => FamilyId::AffinePaly,
            EvaluatorSpec::LinearPaly {} => FamilyId::LinearPaly,
            EvaluatorSpec::Pqaly { .. } => FamilyId::Pqaly,
            EvaluatorSpec::QalyPqaly { .. } => FamilyId::QalyPqaly,
            EvaluatorSpec::QalyPaly { .. } => FamilyId::QalyPaly,
            EvaluatorSpec::PowerPqaly { .. } => FamilyId::PowerPqaly,
            EvaluatorSpec::Weighted { .. } => FamilyId::Weighted,
            EvaluatorSpec::Hpye { .. } => FamilyId::Hpye,
            EvaluatorSpec::GenHpye { .. } => FamilyId::GenHpye,
        }
    }

    /// Checks scalar parameters against their legal ranges.
    pub fn validate_params(&self) -> Result<(), EvalError> {
        match self {
            EvaluatorSpec::AffinePaly { alpha } => unit_param("alpha", *alpha),
            EvaluatorSpec::QalyPqaly { delta, .. } => unit_param("delta", *delta),
            EvaluatorSpec::QalyPaly { sigma, .. } => unit_param("sigma", *sigma),
            EvaluatorSpec::PowerPqaly { gamma, .. } => {
                if *gamma > 0.0 && *gamma < 1.0 {
                    Ok(())
                } else {
                    Err(EvalError::InvalidParameter {
                        name: "gamma",
                        value: *gamma,
                    })
                }
            }
            EvaluatorSpec::GenHpye { g, .. } => g.validate(),
            _ => Ok(()),
        }
    }

    /// Checks parameters and that every table covers the registry.
    pub fn validate(&self, reg: &HealthRegistry) -> Result<(), EvalError> {
        self.validate_params()?;
        match self {
            EvaluatorSpec::Qaly { q }
            | EvaluatorSpec::Pqaly { q }
            | EvaluatorSpec::QalyPaly { q, .. }
            | EvaluatorSpec::PowerPqaly { q, .. } => q.validate_for(reg),
            EvaluatorSpec::QalyPqaly { q, r, .. } => {
                q.validate_for(reg)?;
                r.validate_for(reg)
            }
            EvaluatorSpec::Weighted { w } => w.validate_for(reg),
            EvaluatorSpec::Hpye { f } | EvaluatorSpec::GenHpye { f, .. } => f.validate_for(reg),
            EvaluatorSpec::GenPaly { .. }
            | EvaluatorSpec::AffinePaly { .. }
            | EvaluatorSpec::LinearPaly {} => Ok(()),
        }
    }

    /// Registry implied by the spec's first state-indexed table, if it has one.
    pub fn implied_registry(&self) -> Option<HealthRegistry> {
        let (fh, states): (&HealthStateId, Vec<HealthStateId>) = match self {
            EvaluatorSpec::Qaly { q }
            | EvaluatorSpec::Pqaly { q }
            | EvaluatorSpec::QalyPaly { q, .. }
            | EvaluatorSpec::PowerPqaly { q, .. }
            | EvaluatorSpec::QalyPqaly { q, .. } => {
                (q.full_health(), q.weights().keys().cloned().collect())
            }
            EvaluatorSpec::Weighted { w } => (w.full_health(), w.rows().keys().cloned().collect()),
            EvaluatorSpec::Hpye { f } | EvaluatorSpec::GenHpye { f, .. } => {
                (f.full_health(), f.values().keys().cloned().collect())
            }
            _ => return None,
        };
        HealthRegistry::new(fh.clone(), states).ok()
    }

    /// Lifetime weight of a (state, productivity) pair for the time-linear families.
    #[inline]
    pub fn time_weight(&self, state: &HealthStateId, p: f64) -> Result<f64, EvalError> {
        Ok(match self {
            EvaluatorSpec::Qaly { q } => q.get(state)?,
            EvaluatorSpec::GenPaly { v } => v.eval(p),
            EvaluatorSpec::AffinePaly { alpha } => alpha * p + (1.0 - alpha),
            EvaluatorSpec::LinearPaly {} => p,
            EvaluatorSpec::Pqaly { q } => q.get(state)? * p,
            EvaluatorSpec::QalyPqaly { delta, q, r } => {
                delta * q.get(state)? + (1.0 - delta) * r.get(state)? * p
            }
            EvaluatorSpec::QalyPaly { sigma, q } => sigma * q.get(state)? + (1.0 - sigma) * p,
            EvaluatorSpec::PowerPqaly { gamma, q } => {
                let pw = if p == 0.0 { 0.0 } else { p.powf(*gamma) };
                q.get(state)? * pw
            }
            EvaluatorSpec::Weighted { w } => w.eval(state, p)?,
            EvaluatorSpec::Hpye { .. } | EvaluatorSpec::GenHpye { .. } => {
                return Err(EvalError::UnsupportedFamily("a lifetime weight"))
            }
        })
    }

    /// Contribution of one individual to the total.
    #[inline]
    pub fn term(&self, p: &Profile) -> Result<f64, EvalError> {
        match self {
            EvaluatorSpec::Hpye { f } => f.eval(&p.state, p.productivity, p.lifetime),
            EvaluatorSpec::GenHpye { g, f } => {
                Ok(g.apply(f.eval(&p.state, p.productivity, p.lifetime)?))
            }
            _ => Ok(self.time_weight(&p.state, p.productivity)? * p.lifetime),
        }
    }

    /// Social value of a distribution.
    pub fn evaluate(&self, d: &Distribution) -> Result<f64, EvalError> {
        let mut terms = self.per_profile_contributions(d)?;
        Ok(order_free_sum(&mut terms))
    }

    /// Per-individual contributions in distribution order.
    pub fn per_profile_contributions(&self, d: &Distribution) -> Result<Vec<f64>, EvalError> {
        d.iter().map(|p| self.term(p)).collect()
    }

    /// Compares two distributions; indifferent when values differ by at most `tol`.
    pub fn compare(
        &self,
        first: &Distribution,
        second: &Distribution,
        tol: f64,
    ) -> Result<Preference, EvalError> {
        let diff = self.evaluate(first)? - self.evaluate(second)?;
        Ok(Preference::from_difference(diff, tol))
    }

    /// Full-health, full-productivity lifetime worth the same as the profile.
    pub fn hpye_of_profile(&self, p: &Profile) -> Result<f64, EvalError> {
        if !self.family().is_time_linear() {
            return Err(EvalError::UnsupportedFamily("hpye_of_profile"));
        }
        Ok(self.time_weight(&p.state, p.productivity)? * p.lifetime)
    }

    /// The distribution in which everyone is replaced by their equivalent
    /// full-health, full-productivity lifetime.
    pub fn equivalent_distribution(
        &self,
        d: &Distribution,
        full_health: &HealthStateId,
    ) -> Result<Distribution, EvalError> {
        d.iter()
            .map(|p| {
                let t = match self {
                    EvaluatorSpec::Hpye { f } | EvaluatorSpec::GenHpye { f, .. } => {
                        f.eval(&p.state, p.productivity, p.lifetime)?
                    }
                    _ => self.hpye_of_profile(p)?,
                };
                Ok(Profile::new(full_health.clone(), 1.0, t))
            })
            .collect()
    }
}

/// Sums terms in sorted order with Neumaier compensation, so the result does
/// not depend on the order in which individuals are listed.
pub fn order_free_sum(terms: &mut [f64]) -> f64 {
    terms.sort_unstable_by(f64::total_cmp);
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for &x in terms.iter() {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{example1, example_registry};

    fn q(a: f64) -> QualityWeights {
        QualityWeights::from_pairs(&example_registry(), &[("a", a)]).unwrap()
    }

    fn st(s: &str) -> HealthStateId {
        HealthStateId::new(s).unwrap()
    }

    #[test]
    fn example_table_values() {
        let (delta, lambda) = example1();
        let e = |s: &EvaluatorSpec, d: &Distribution| s.evaluate(d).unwrap();
        assert_eq!(e(&EvaluatorSpec::Qaly { q: q(0.3) }, &delta), 130.0);
        assert_eq!(e(&EvaluatorSpec::LinearPaly {}, &lambda), 105.0);
        assert_eq!(e(&EvaluatorSpec::LinearPaly {}, &delta), 65.0);
        assert!((e(&EvaluatorSpec::AffinePaly { alpha: 0.4 }, &delta) - 104.0).abs() < 1e-12);
        assert!((e(&EvaluatorSpec::Pqaly { q: q(0.5) }, &lambda) - 72.5).abs() < 1e-12);
        for s in [
            EvaluatorSpec::LinearPaly {},
            EvaluatorSpec::Qaly { q: q(0.5) },
            EvaluatorSpec::AffinePaly { alpha: 0.1 },
        ] {
            assert_eq!(s.evaluate(&Distribution::empty()).unwrap(), 0.0);
        }
    }

    #[test]
    fn compare_directions() {
        let (delta, lambda) = example1();
        let tol = DEFAULT_INDIFFERENCE_TOL;
        let qaly = EvaluatorSpec::Qaly { q: q(0.5) };
        assert_eq!(
            qaly.compare(&delta, &lambda, tol).unwrap(),
            Preference::PreferFirst
        );
        assert_eq!(
            EvaluatorSpec::LinearPaly {}
                .compare(&delta, &lambda, tol)
                .unwrap(),
            Preference::PreferSecond
        );
        assert_eq!(
            qaly.compare(&delta, &delta, tol).unwrap(),
            Preference::Indifferent
        );
    }

    #[test]
    fn contributions_linear_paly() {
        let (_, lambda) = example1();
        let c = EvaluatorSpec::LinearPaly {}
            .per_profile_contributions(&lambda)
            .unwrap();
        assert_eq!(c, vec![40.0, 40.0, 20.0, 5.0, 0.0]);
        assert!(EvaluatorSpec::LinearPaly {}
            .per_profile_contributions(&Distribution::empty())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn hpye_of_profile_cases() {
        let spec = EvaluatorSpec::Qaly { q: q(0.5) };
        assert_eq!(
            spec.hpye_of_profile(&Profile::new(st("a"), 0.9, 20.0))
                .unwrap(),
            10.0
        );
        assert_eq!(
            spec.hpye_of_profile(&Profile::new(st("a"), 0.9, 0.0))
                .unwrap(),
            0.0
        );
        let grid = HpyeTable::from_weight_surface(
            &WeightSurface::new(
                st("a*"),
                [
                    (
                        st("a*"),
                        PiecewiseLinear::new(vec![(0.0, 0.5), (1.0, 1.0)]).unwrap(),
                    ),
                    (
                        st("a"),
                        PiecewiseLinear::new(vec![(0.0, 0.2), (1.0, 0.7)]).unwrap(),
                    ),
                ]
                .into_iter()
                .collect(),
            )
            .unwrap(),
            vec![0.0, 100.0],
        )
        .unwrap();
        assert_eq!(
            EvaluatorSpec::Hpye { f: grid }.hpye_of_profile(&Profile::new(st("a"), 0.5, 1.0)),
            Err(EvalError::UnsupportedFamily("hpye_of_profile"))
        );
    }

    #[test]
    fn missing_weight_is_reported() {
        let spec = EvaluatorSpec::Qaly { q: q(0.5) };
        let d = Distribution::new(vec![Profile::new(st("b"), 0.5, 1.0)]);
        assert_eq!(spec.evaluate(&d), Err(EvalError::MissingWeight("b".into())));
    }

    #[test]
    fn parameter_bounds() {
        assert!(EvaluatorSpec::AffinePaly { alpha: 1.1 }
            .validate_params()
            .is_err());
        assert!(EvaluatorSpec::PowerPqaly {
            gamma: 1.0,
            q: q(0.5)
        }
        .validate_params()
        .is_err());
        assert!(EvaluatorSpec::PowerPqaly {
            gamma: 0.5,
            q: q(0.5)
        }
        .validate_params()
        .is_ok());
        assert!(EvaluatorSpec::QalyPaly {
            sigma: -0.1,
            q: q(0.5)
        }
        .validate_params()
        .is_err());
    }

    #[test]
    fn json_round_trip_and_shape() {
        let spec = EvaluatorSpec::QalyPqaly {
            delta: 0.25,
            q: q(0.4),
            r: q(0.6),
        };
        let s = serde_json::to_string(&spec).unwrap();
        assert!(
            s.starts_with(r#"{"family":"qaly_pqaly","params":{"delta":0.25"#),
            "{s}"
        );
        let back: EvaluatorSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, spec);
        let lp: EvaluatorSpec =
            serde_json::from_str(r#"{"family":"linear_paly","params":{}}"#).unwrap();
        assert_eq!(lp, EvaluatorSpec::LinearPaly {});
        let bad = serde_json::from_str::<EvaluatorSpec>(
            r#"{"family":"qaly","params":{"q":{"full_health":"a*","weights":{"a*":0.5}}}}"#,
        );
        assert!(bad.is_err());
    }

    #[test]
    fn order_free_sum_is_permutation_invariant() {
        let mut a = vec![1e16, 1.0, -1e16, 3.5, 0.1];
        let mut b = vec![0.1, -1e16, 3.5, 1.0, 1e16];
        assert_eq!(order_free_sum(&mut a), order_free_sum(&mut b));
        assert!((order_free_sum(&mut a) - 4.6).abs() < 1e-12);
    }
}

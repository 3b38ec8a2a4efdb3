//! Random distributions and random evaluator parameterizations.

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::error::EvalError;
use crate::evaluators::{
    EvaluatorSpec, FamilyId, GainTransform, HpyeTable, PiecewiseLinear, QualityWeights, ValueCurve,
    WeightSurface,
};
use crate::model::{Distribution, HealthRegistry, HealthStateId, Profile};

/// Draws profiles and distributions within the configured ranges.
#[derive(Debug, Clone)]
pub struct ProfileSampler {
    states: Vec<HealthStateId>,
    full_health: HealthStateId,
    max_individuals: usize,
    t_max: f64,
}

impl ProfileSampler {
    pub fn new(reg: &HealthRegistry, max_individuals: usize, t_max: f64) -> Self {
        Self {
            states: reg.states().cloned().collect(),
            full_health: reg.full_health().clone(),
            max_individuals,
            t_max,
        }
    }

    pub fn full_health(&self) -> &HealthStateId {
        &self.full_health
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn state<R: Rng>(&self, rng: &mut R) -> HealthStateId {
        self.states
            .choose(rng)
            .expect("registry is never empty")
            .clone()
    }

    /// A state different from `other`, if the registry has one.
    pub fn other_state<R: Rng>(&self, rng: &mut R, other: &HealthStateId) -> Option<HealthStateId> {
        let rest: Vec<&HealthStateId> = self.states.iter().filter(|s| *s != other).collect();
        rest.choose(rng).map(|s| (*s).clone())
    }

    pub fn productivity<R: Rng>(&self, rng: &mut R) -> f64 {
        rng.random::<f64>()
    }

    pub fn lifetime<R: Rng>(&self, rng: &mut R) -> f64 {
        rng.random::<f64>() * self.t_max
    }

    /// Uniform on (0, headroom].
    pub fn positive_up_to<R: Rng>(&self, rng: &mut R, headroom: f64) -> f64 {
        (1.0 - rng.random::<f64>()) * headroom
    }

    pub fn profile<R: Rng>(&self, rng: &mut R) -> Profile {
        Profile::new(self.state(rng), self.productivity(rng), self.lifetime(rng))
    }

    /// Distribution with between `min_n` and `max_individuals` people.
    pub fn distribution<R: Rng>(&self, rng: &mut R, min_n: usize) -> Distribution {
        let hi = self.max_individuals.max(min_n);
        let n = rng.random_range(min_n..=hi);
        (0..n).map(|_| self.profile(rng)).collect()
    }

    /// Like [`distribution`](Self::distribution) with the boundary cases forced
    /// in on the first trials of a batch: zero lifetime on trial 0, zero
    /// productivity on trial 1.
    pub fn trial_distribution<R: Rng>(
        &self,
        rng: &mut R,
        min_n: usize,
        trial: u64,
    ) -> Distribution {
        let mut d = self.distribution(rng, min_n);
        if let Some(p) = d.profiles_mut().first_mut() {
            match trial {
                0 => p.lifetime = 0.0,
                1 => p.productivity = 0.0,
                _ => {}
            }
        }
        d
    }
}

fn sorted_interior<R: Rng>(rng: &mut R, max_interior: usize) -> Vec<f64> {
    let k = rng.random_range(0..=max_interior);
    let mut xs: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..0.99)).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
    let mut nodes = Vec::with_capacity(xs.len() + 2);
    nodes.push(0.0);
    nodes.extend(xs);
    nodes.push(1.0);
    nodes
}

pub fn random_quality<R: Rng>(rng: &mut R, reg: &HealthRegistry) -> QualityWeights {
    let weights: BTreeMap<HealthStateId, f64> = reg
        .states()
        .map(|s| {
            let w = if s == reg.full_health() {
                1.0
            } else {
                rng.random::<f64>()
            };
            (s.clone(), w)
        })
        .collect();
    QualityWeights::new(reg.full_health().clone(), weights).expect("weights drawn in [0, 1]")
}

pub fn random_value_curve<R: Rng>(rng: &mut R) -> ValueCurve {
    let ps = sorted_interior(rng, 3);
    let last = ps.len() - 1;
    let nodes = ps
        .into_iter()
        .enumerate()
        .map(|(i, p)| (p, if i == last { 1.0 } else { rng.random::<f64>() }))
        .collect();
    ValueCurve::new(nodes).expect("curve drawn within bounds")
}

/// Random surface on a shared node set: full-health row first, every other
/// row scaled below it and capped by its own value at full productivity.
fn random_surface_on<R: Rng>(rng: &mut R, reg: &HealthRegistry, ps: &[f64]) -> WeightSurface {
    let last = ps.len() - 1;
    let top: Vec<f64> = (0..ps.len())
        .map(|i| if i == last { 1.0 } else { rng.random::<f64>() })
        .collect();
    let mut rows = BTreeMap::new();
    for s in reg.states() {
        let vals: Vec<f64> = if s == reg.full_health() {
            top.clone()
        } else {
            let at_one = rng.random::<f64>();
            top.iter()
                .enumerate()
                .map(|(i, &t)| {
                    if i == last {
                        at_one
                    } else {
                        (rng.random::<f64>() * t).min(at_one)
                    }
                })
                .collect()
        };
        let nodes = ps.iter().copied().zip(vals).collect();
        rows.insert(
            s.clone(),
            PiecewiseLinear::new(nodes).expect("row within bounds"),
        );
    }
    WeightSurface::new(reg.full_health().clone(), rows).expect("surface satisfies its bounds")
}

pub fn random_surface<R: Rng>(rng: &mut R, reg: &HealthRegistry) -> WeightSurface {
    let ps = sorted_interior(rng, 3);
    random_surface_on(rng, reg, &ps)
}

/// Random HPYE grid that is not separable in lifetime: every lifetime column
/// uses its own random surface.
pub fn random_hpye_grid<R: Rng>(rng: &mut R, reg: &HealthRegistry, t_max: f64) -> HpyeTable {
    let ps = sorted_interior(rng, 3);
    let t_nodes = vec![0.0, 0.25 * t_max, 0.5 * t_max, t_max];
    let columns: Vec<WeightSurface> = t_nodes
        .iter()
        .map(|_| random_surface_on(rng, reg, &ps))
        .collect();
    let values = reg
        .states()
        .map(|s| {
            let grid = ps
                .iter()
                .map(|&p| {
                    t_nodes
                        .iter()
                        .zip(&columns)
                        .map(|(&t, w)| w.eval(s, p).unwrap() * t)
                        .collect()
                })
                .collect();
            (s.clone(), grid)
        })
        .collect();
    HpyeTable::new(reg.full_health().clone(), ps, t_nodes, values)
        .expect("grid satisfies its bounds")
}

pub fn random_gain<R: Rng>(rng: &mut R) -> GainTransform {
    match rng.random_range(0..3) {
        0 => GainTransform::Identity,
        1 => GainTransform::Power {
            exponent: rng.random_range(0.2..3.0),
        },
        _ => GainTransform::Affine {
            slope: rng.random_range(0.1..5.0),
            intercept: rng.random_range(0.0..2.0),
        },
    }
}

/// A random legal parameterization of `family` over the registry.
///
/// Power exponents are kept away from 0 so the sequential continuity check
/// can observe convergence within its step budget.
pub fn random_spec<R: Rng>(
    rng: &mut R,
    family: FamilyId,
    reg: &HealthRegistry,
    t_max: f64,
) -> Result<EvaluatorSpec, EvalError> {
    let spec = match family {
        FamilyId::Qaly => EvaluatorSpec::Qaly {
            q: random_quality(rng, reg),
        },
        FamilyId::GenPaly => EvaluatorSpec::GenPaly {
            v: random_value_curve(rng),
        },
        FamilyId::AffinePaly => EvaluatorSpec::AffinePaly {
            alpha: rng.random(),
        },
        FamilyId::LinearPaly => EvaluatorSpec::LinearPaly {},
        FamilyId::Pqaly => EvaluatorSpec::Pqaly {
            q: random_quality(rng, reg),
        },
        FamilyId::QalyPqaly => EvaluatorSpec::QalyPqaly {
            delta: rng.random(),
            q: random_quality(rng, reg),
            r: random_quality(rng, reg),
        },
        FamilyId::QalyPaly => EvaluatorSpec::QalyPaly {
            sigma: rng.random(),
            q: random_quality(rng, reg),
        },
        FamilyId::PowerPqaly => EvaluatorSpec::PowerPqaly {
            gamma: rng.random_range(0.1..0.9),
            q: random_quality(rng, reg),
        },
        FamilyId::Weighted => EvaluatorSpec::Weighted {
            w: random_surface(rng, reg),
        },
        FamilyId::Hpye => EvaluatorSpec::Hpye {
            f: random_hpye_grid(rng, reg, t_max),
        },
        FamilyId::GenHpye => EvaluatorSpec::GenHpye {
            g: random_gain(rng),
            f: random_hpye_grid(rng, reg, t_max),
        },
    };
    spec.validate(reg)?;
    Ok(spec)
}

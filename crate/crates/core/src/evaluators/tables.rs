//! Weight tables and transforms parameterizing the evaluator families.
//!
//! Every table validates on construction and on deserialization, so a value
//! of these types always satisfies its bounds.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::EvalError;
use crate::model::{HealthRegistry, HealthStateId};

fn invalid(msg: impl Into<String>) -> EvalError {
    EvalError::InvalidTable(msg.into())
}

fn in_unit(x: f64) -> bool {
    (0.0..=1.0).contains(&x)
}

fn check_registry_coverage<'a>(
    what: &str,
    full_health: &HealthStateId,
    keys: impl Iterator<Item = &'a HealthStateId>,
    reg: &HealthRegistry,
) -> Result<(), EvalError> {
    if full_health != reg.full_health() {
        return Err(invalid(format!(
            "{what} names `{full_health}` as full health, registry names `{}`",
            reg.full_health()
        )));
    }
    let keys: BTreeSet<&HealthStateId> = keys.collect();
    for s in reg.states() {
        if !keys.contains(s) {
            return Err(EvalError::MissingWeight(s.to_string()));
        }
    }
    Ok(())
}

/// Health-state quality weights `q(a)` in [0, 1] with `q(full health) = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawQuality")]
pub struct QualityWeights {
    full_health: HealthStateId,
    weights: BTreeMap<HealthStateId, f64>,
}

#[derive(Deserialize)]
struct RawQuality {
    full_health: HealthStateId,
    weights: BTreeMap<HealthStateId, f64>,
}

impl TryFrom<RawQuality> for QualityWeights {
    type Error = EvalError;
    fn try_from(raw: RawQuality) -> Result<Self, EvalError> {
        QualityWeights::new(raw.full_health, raw.weights)
    }
}

impl QualityWeights {
    pub fn new(
        full_health: HealthStateId,
        mut weights: BTreeMap<HealthStateId, f64>,
    ) -> Result<Self, EvalError> {
        match weights.get(&full_health) {
            Some(&w) if w != 1.0 => {
                return Err(invalid(format!("weight of full health must be 1, got {w}")))
            }
            Some(_) => {}
            None => {
                weights.insert(full_health.clone(), 1.0);
            }
        }
        if let Some((s, w)) = weights.iter().find(|(_, w)| !in_unit(**w)) {
            return Err(invalid(format!("weight of `{s}` is {w}, outside [0, 1]")));
        }
        Ok(Self {
            full_health,
            weights,
        })
    }

    /// Weights for the registry states, full health fixed at 1.
    pub fn from_pairs(reg: &HealthRegistry, pairs: &[(&str, f64)]) -> Result<Self, EvalError> {
        let mut weights = BTreeMap::new();
        for &(label, w) in pairs {
            weights.insert(HealthStateId::new(label)?, w);
        }
        Self::new(reg.full_health().clone(), weights)
    }

    /// Every state gets the same weight except full health.
    pub fn uniform(reg: &HealthRegistry, w: f64) -> Result<Self, EvalError> {
        let weights = reg
            .states()
            .map(|s| (s.clone(), if s == reg.full_health() { 1.0 } else { w }))
            .collect();
        Self::new(reg.full_health().clone(), weights)
    }

    pub fn full_health(&self) -> &HealthStateId {
        &self.full_health
    }

    #[inline]
    pub fn get(&self, state: &HealthStateId) -> Result<f64, EvalError> {
        self.weights
            .get(state)
            .copied()
            .ok_or_else(|| EvalError::MissingWeight(state.to_string()))
    }

    pub fn weights(&self) -> &BTreeMap<HealthStateId, f64> {
        &self.weights
    }

    /// Copy with one state's weight replaced; full health cannot be changed.
    pub fn with_weight(&self, state: &HealthStateId, w: f64) -> Result<Self, EvalError> {
        if *state == self.full_health && w != 1.0 {
            return Err(invalid("the full-health weight is fixed at 1"));
        }
        let mut weights = self.weights.clone();
        weights.insert(state.clone(), w);
        Self::new(self.full_health.clone(), weights)
    }

    pub fn validate_for(&self, reg: &HealthRegistry) -> Result<(), EvalError> {
        check_registry_coverage("quality table", &self.full_health, self.weights.keys(), reg)
    }
}

/// Piecewise-linear function on [0, 1] with nodes at 0 and 1 and values in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct PiecewiseLinear {
    nodes: Vec<(f64, f64)>,
}

impl TryFrom<Vec<(f64, f64)>> for PiecewiseLinear {
    type Error = EvalError;
    fn try_from(nodes: Vec<(f64, f64)>) -> Result<Self, EvalError> {
        PiecewiseLinear::new(nodes)
    }
}

impl From<PiecewiseLinear> for Vec<(f64, f64)> {
    fn from(pl: PiecewiseLinear) -> Self {
        pl.nodes
    }
}

impl PiecewiseLinear {
    pub fn new(nodes: Vec<(f64, f64)>) -> Result<Self, EvalError> {
        if nodes.len() < 2 {
            return Err(invalid("a curve needs at least the nodes p = 0 and p = 1"));
        }
        if nodes[0].0 != 0.0 || nodes[nodes.len() - 1].0 != 1.0 {
            return Err(invalid("curve nodes must start at p = 0 and end at p = 1"));
        }
        if nodes.windows(2).any(|w| !(w[0].0 < w[1].0)) {
            return Err(invalid("curve abscissas must be strictly increasing"));
        }
        if let Some(&(p, v)) = nodes.iter().find(|(_, v)| !in_unit(*v)) {
            return Err(invalid(format!(
                "curve value {v} at p = {p} is outside [0, 1]"
            )));
        }
        Ok(Self { nodes })
    }

    pub fn constant(v: f64) -> Result<Self, EvalError> {
        Self::new(vec![(0.0, v), (1.0, v)])
    }

    pub fn nodes(&self) -> &[(f64, f64)] {
        &self.nodes
    }

    #[inline]
    pub fn eval(&self, p: f64) -> f64 {
        let nodes = &self.nodes;
        // first node with abscissa > p
        let k = nodes.partition_point(|&(x, _)| x <= p);
        if k == 0 {
            return nodes[0].1;
        }
        if k == nodes.len() {
            return nodes[k - 1].1;
        }
        let (x0, y0) = nodes[k - 1];
        let (x1, y1) = nodes[k];
        let s = (p - x0) / (x1 - x0);
        y0 + s * (y1 - y0)
    }

    /// Maximum node value; the maximum of the interpolant.
    pub fn max_value(&self) -> f64 {
        self.nodes
            .iter()
            .map(|n| n.1)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Productivity value curve `v` with `v(1) = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CurveRaw", into = "CurveRaw")]
pub struct ValueCurve(PiecewiseLinear);

#[derive(Serialize, Deserialize)]
struct CurveRaw {
    nodes: PiecewiseLinear,
}

impl TryFrom<CurveRaw> for ValueCurve {
    type Error = EvalError;
    fn try_from(raw: CurveRaw) -> Result<Self, EvalError> {
        ValueCurve::from_curve(raw.nodes)
    }
}

impl From<ValueCurve> for CurveRaw {
    fn from(v: ValueCurve) -> Self {
        CurveRaw { nodes: v.0 }
    }
}

impl ValueCurve {
    pub fn new(nodes: Vec<(f64, f64)>) -> Result<Self, EvalError> {
        Self::from_curve(PiecewiseLinear::new(nodes)?)
    }

    fn from_curve(pl: PiecewiseLinear) -> Result<Self, EvalError> {
        if pl.eval(1.0) != 1.0 {
            return Err(invalid("value curve must satisfy v(1) = 1"));
        }
        Ok(Self(pl))
    }

    /// The identity curve `v(p) = p`.
    pub fn linear() -> Self {
        Self::new(vec![(0.0, 0.0), (1.0, 1.0)]).unwrap()
    }

    /// Curve through `(0, v0)`, `(0.5, v_half)`, `(1, 1)`.
    pub fn three_point(v0: f64, v_half: f64) -> Result<Self, EvalError> {
        Self::new(vec![(0.0, v0), (0.5, v_half), (1.0, 1.0)])
    }

    #[inline]
    pub fn eval(&self, p: f64) -> f64 {
        self.0.eval(p)
    }

    pub fn nodes(&self) -> &[(f64, f64)] {
        self.0.nodes()
    }
}

/// Weight surface `w(a, p)`: one piecewise-linear curve over productivity per state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SurfaceRaw")]
pub struct WeightSurface {
    full_health: HealthStateId,
    rows: BTreeMap<HealthStateId, PiecewiseLinear>,
}

#[derive(Deserialize)]
struct SurfaceRaw {
    full_health: HealthStateId,
    rows: BTreeMap<HealthStateId, PiecewiseLinear>,
}

impl TryFrom<SurfaceRaw> for WeightSurface {
    type Error = EvalError;
    fn try_from(raw: SurfaceRaw) -> Result<Self, EvalError> {
        WeightSurface::new(raw.full_health, raw.rows)
    }
}

impl WeightSurface {
    pub fn new(
        full_health: HealthStateId,
        rows: BTreeMap<HealthStateId, PiecewiseLinear>,
    ) -> Result<Self, EvalError> {
        let top = rows.get(&full_health).ok_or_else(|| {
            invalid(format!(
                "surface has no row for full health `{full_health}`"
            ))
        })?;
        if top.eval(1.0) != 1.0 {
            return Err(invalid("surface must satisfy w(full health, 1) = 1"));
        }
        for (state, row) in &rows {
            let at_one = row.eval(1.0);
            if row.max_value() > at_one {
                return Err(invalid(format!(
                    "w(`{state}`, p) exceeds w(`{state}`, 1) at some node"
                )));
            }
            // The difference of two piecewise-linear curves is piecewise linear
            // with breakpoints in the union of their nodes.
            let breakpoints = row.nodes().iter().chain(top.nodes()).map(|n| n.0);
            for p in breakpoints {
                if row.eval(p) > top.eval(p) {
                    return Err(invalid(format!(
                        "w(`{state}`, {p}) exceeds the full-health weight at the same productivity"
                    )));
                }
            }
        }
        Ok(Self { full_health, rows })
    }

    pub fn full_health(&self) -> &HealthStateId {
        &self.full_health
    }

    pub fn rows(&self) -> &BTreeMap<HealthStateId, PiecewiseLinear> {
        &self.rows
    }

    #[inline]
    pub fn eval(&self, state: &HealthStateId, p: f64) -> Result<f64, EvalError> {
        self.rows
            .get(state)
            .map(|row| row.eval(p))
            .ok_or_else(|| EvalError::MissingWeight(state.to_string()))
    }

    pub fn validate_for(&self, reg: &HealthRegistry) -> Result<(), EvalError> {
        check_registry_coverage("weight surface", &self.full_health, self.rows.keys(), reg)
    }
}

/// Grid of healthy productive years equivalents `f(a, p, t)`.
///
/// All states share the same productivity and lifetime nodes; values are
/// bilinearly interpolated inside the grid. Beyond the last lifetime node
/// the value is extended proportionally, `f(a, p, t) = f(a, p, t_last) * t / t_last`,
/// which keeps every node-level inequality intact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HpyeRaw", into = "HpyeRaw")]
pub struct HpyeTable {
    full_health: HealthStateId,
    p_nodes: Vec<f64>,
    t_nodes: Vec<f64>,
    values: BTreeMap<HealthStateId, Vec<Vec<f64>>>,
}

#[derive(Serialize, Deserialize)]
struct HpyeRaw {
    full_health: HealthStateId,
    p_nodes: Vec<f64>,
    t_nodes: Vec<f64>,
    values: BTreeMap<HealthStateId, Vec<Vec<f64>>>,
}

impl TryFrom<HpyeRaw> for HpyeTable {
    type Error = EvalError;
    fn try_from(raw: HpyeRaw) -> Result<Self, EvalError> {
        HpyeTable::new(raw.full_health, raw.p_nodes, raw.t_nodes, raw.values)
    }
}

impl From<HpyeTable> for HpyeRaw {
    fn from(t: HpyeTable) -> Self {
        HpyeRaw {
            full_health: t.full_health,
            p_nodes: t.p_nodes,
            t_nodes: t.t_nodes,
            values: t.values,
        }
    }
}

impl HpyeTable {
    pub fn new(
        full_health: HealthStateId,
        p_nodes: Vec<f64>,
        t_nodes: Vec<f64>,
        values: BTreeMap<HealthStateId, Vec<Vec<f64>>>,
    ) -> Result<Self, EvalError> {
        if p_nodes.len() < 2 || p_nodes[0] != 0.0 || p_nodes[p_nodes.len() - 1] != 1.0 {
            return Err(invalid("productivity nodes must start at 0 and end at 1"));
        }
        if p_nodes.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("productivity nodes must be strictly increasing"));
        }
        if t_nodes.len() < 2 || t_nodes[0] != 0.0 {
            return Err(invalid(
                "lifetime nodes must start at 0 and have at least two entries",
            ));
        }
        if t_nodes.windows(2).any(|w| !(w[0] < w[1])) || !t_nodes.iter().all(|t| t.is_finite()) {
            return Err(invalid(
                "lifetime nodes must be finite and strictly increasing",
            ));
        }
        let top = values.get(&full_health).ok_or_else(|| {
            invalid(format!(
                "grid has no values for full health `{full_health}`"
            ))
        })?;
        let (np, nt) = (p_nodes.len(), t_nodes.len());
        for (state, grid) in &values {
            if grid.len() != np || grid.iter().any(|row| row.len() != nt) {
                return Err(invalid(format!(
                    "grid for `{state}` must be {np} productivity rows by {nt} lifetime columns"
                )));
            }
            for (i, row) in grid.iter().enumerate() {
                for (j, &f) in row.iter().enumerate() {
                    let t = t_nodes[j];
                    let at = || format!("(`{state}`, {}, {t})", p_nodes[i]);
                    if !f.is_finite() || f < 0.0 || f > t {
                        return Err(invalid(format!("f{} = {f} violates 0 <= f <= t", at())));
                    }
                    if f > grid[np - 1][j] {
                        return Err(invalid(format!("f{} exceeds the value at p = 1", at())));
                    }
                    if f > top[i][j] {
                        return Err(invalid(format!("f{} exceeds the full-health value", at())));
                    }
                }
            }
        }
        for (j, &t) in t_nodes.iter().enumerate() {
            if (top[np - 1][j] - t).abs() > 1e-12 * t.max(1.0) {
                return Err(invalid(format!(
                    "full health at full productivity must be its own equivalent: f(a*, 1, {t}) = {}",
                    top[np - 1][j]
                )));
            }
        }
        Ok(Self {
            full_health,
            p_nodes,
            t_nodes,
            values,
        })
    }

    /// Tabulates `f(a, p, t) = w(a, p) * t` on the union of the surface nodes.
    pub fn from_weight_surface(w: &WeightSurface, t_nodes: Vec<f64>) -> Result<Self, EvalError> {
        let mut ps: Vec<f64> = w
            .rows()
            .values()
            .flat_map(|row| row.nodes().iter().map(|n| n.0))
            .collect();
        ps.sort_by(f64::total_cmp);
        ps.dedup();
        let values = w
            .rows()
            .iter()
            .map(|(s, row)| {
                let grid = ps
                    .iter()
                    .map(|&p| t_nodes.iter().map(|&t| row.eval(p) * t).collect())
                    .collect();
                (s.clone(), grid)
            })
            .collect();
        Self::new(w.full_health().clone(), ps, t_nodes, values)
    }

    pub fn full_health(&self) -> &HealthStateId {
        &self.full_health
    }

    pub fn p_nodes(&self) -> &[f64] {
        &self.p_nodes
    }

    pub fn t_nodes(&self) -> &[f64] {
        &self.t_nodes
    }

    pub fn values(&self) -> &BTreeMap<HealthStateId, Vec<Vec<f64>>> {
        &self.values
    }

    fn cell(nodes: &[f64], x: f64) -> (usize, f64) {
        let k = nodes.partition_point(|&n| n <= x);
        if k == 0 {
            return (0, 0.0);
        }
        if k >= nodes.len() {
            return (nodes.len() - 2, 1.0);
        }
        let s = (x - nodes[k - 1]) / (nodes[k] - nodes[k - 1]);
        (k - 1, s)
    }

    #[inline]
    pub fn eval(&self, state: &HealthStateId, p: f64, t: f64) -> Result<f64, EvalError> {
        let grid = self
            .values
            .get(state)
            .ok_or_else(|| EvalError::MissingWeight(state.to_string()))?;
        let (i, sp) = Self::cell(&self.p_nodes, p);
        let along_p = |j: usize| grid[i][j] + sp * (grid[i + 1][j] - grid[i][j]);
        let t_last = self.t_nodes[self.t_nodes.len() - 1];
        if t > t_last {
            return Ok(along_p(self.t_nodes.len() - 1) * (t / t_last));
        }
        let (j, st) = Self::cell(&self.t_nodes, t);
        let lo = along_p(j);
        let hi = along_p(j + 1);
        Ok(lo + st * (hi - lo))
    }

    pub fn validate_for(&self, reg: &HealthRegistry) -> Result<(), EvalError> {
        check_registry_coverage("HPYE grid", &self.full_health, self.values.keys(), reg)
    }
}

/// Strictly increasing, continuous transform applied to each equivalent lifetime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", try_from = "GainRaw")]
pub enum GainTransform {
    Identity,
    Power { exponent: f64 },
    Affine { slope: f64, intercept: f64 },
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum GainRaw {
    Identity,
    Power { exponent: f64 },
    Affine { slope: f64, intercept: f64 },
}

impl TryFrom<GainRaw> for GainTransform {
    type Error = EvalError;
    fn try_from(raw: GainRaw) -> Result<Self, EvalError> {
        let g = match raw {
            GainRaw::Identity => GainTransform::Identity,
            GainRaw::Power { exponent } => GainTransform::Power { exponent },
            GainRaw::Affine { slope, intercept } => GainTransform::Affine { slope, intercept },
        };
        g.validate()?;
        Ok(g)
    }
}

impl GainTransform {
    pub fn validate(&self) -> Result<(), EvalError> {
        match *self {
            GainTransform::Identity => Ok(()),
            GainTransform::Power { exponent } if exponent > 0.0 && exponent.is_finite() => Ok(()),
            GainTransform::Power { exponent } => Err(EvalError::InvalidParameter {
                name: "exponent",
                value: exponent,
            }),
            GainTransform::Affine { slope, .. } if !(slope > 0.0 && slope.is_finite()) => {
                Err(EvalError::InvalidParameter {
                    name: "slope",
                    value: slope,
                })
            }
            // A negative intercept would let the total go below zero.
            GainTransform::Affine { intercept, .. }
                if !(intercept >= 0.0 && intercept.is_finite()) =>
            {
                Err(EvalError::InvalidParameter {
                    name: "intercept",
                    value: intercept,
                })
            }
            GainTransform::Affine { .. } => Ok(()),
        }
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            GainTransform::Identity => x,
            GainTransform::Power { exponent } => x.powf(exponent),
            GainTransform::Affine { slope, intercept } => slope * x + intercept,
        }
    }
}

//! Ranking flips under a one-parameter evaluator family, and the worked
//! example's comparison tables.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{EvalError, SensitivityError};
use crate::evaluators::{EvaluatorSpec, FamilyId, Preference, QualityWeights, ValueCurve};
use crate::model::{example1, example_registry, Distribution, HealthStateId, EXAMPLE_IMPAIRED};
use crate::report::fmt_sig;

/// Differences within this band of zero count as exact indifference.
pub const ZERO_BAND: f64 = 1e-12;
pub const DEFAULT_GRID_N: usize = 1024;
pub const DEFAULT_TOL: f64 = 1e-9;

/// The parameter swept by a [`ParametricFamily`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum FreeParameter {
    Alpha,
    Delta,
    Sigma,
    Gamma,
    /// One entry of the quality table `q`.
    Q(HealthStateId),
    /// One entry of the second quality table `r` of the QALY/PQALY mix.
    R(HealthStateId),
}

impl fmt::Display for FreeParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FreeParameter::Alpha => f.write_str("alpha"),
            FreeParameter::Delta => f.write_str("delta"),
            FreeParameter::Sigma => f.write_str("sigma"),
            FreeParameter::Gamma => f.write_str("gamma"),
            FreeParameter::Q(s) => write!(f, "q:{s}"),
            FreeParameter::R(s) => write!(f, "r:{s}"),
        }
    }
}

impl FromStr for FreeParameter {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let state = |label: &str| HealthStateId::new(label).map_err(|e| e.to_string());
        match s {
            "alpha" => Ok(FreeParameter::Alpha),
            "delta" => Ok(FreeParameter::Delta),
            "sigma" => Ok(FreeParameter::Sigma),
            "gamma" => Ok(FreeParameter::Gamma),
            _ => match s.split_once(':') {
                Some(("q", label)) => Ok(FreeParameter::Q(state(label)?)),
                Some(("r", label)) => Ok(FreeParameter::R(state(label)?)),
                _ => Err(format!(
                    "unknown parameter `{s}` (expected alpha, delta, sigma, gamma, q:<state> or r:<state>)"
                )),
            },
        }
    }
}

impl Serialize for FreeParameter {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FreeParameter {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A base spec with one parameter left free over `[lo, hi]`.
///
/// Without a free parameter the family is constant in θ; the range is then
/// only the interval scanned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParametricFamily {
    base: EvaluatorSpec,
    parameter: Option<FreeParameter>,
    range: (f64, f64),
}

fn legal_bounds(p: &FreeParameter) -> (f64, f64, bool) {
    match p {
        // gamma lives on the open interval
        FreeParameter::Gamma => (0.0, 1.0, true),
        _ => (0.0, 1.0, false),
    }
}

impl ParametricFamily {
    pub fn new(
        base: EvaluatorSpec,
        parameter: Option<FreeParameter>,
        lo: f64,
        hi: f64,
    ) -> Result<Self, SensitivityError> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(SensitivityError::InvalidFamily(format!(
                "range [{lo}, {hi}] must be finite with lo < hi"
            )));
        }
        base.validate_params()?;
        if let Some(p) = &parameter {
            let (min, max, open) = legal_bounds(p);
            let inside = if open {
                lo > min && hi < max
            } else {
                lo >= min && hi <= max
            };
            if !inside {
                return Err(SensitivityError::ParameterOutOfRange {
                    value: if lo < min { lo } else { hi },
                    lo: min,
                    hi: max,
                });
            }
            check_applicable(&base, p)?;
        }
        Ok(Self {
            base,
            parameter,
            range: (lo, hi),
        })
    }

    /// Family that does not depend on θ.
    pub fn constant(base: EvaluatorSpec, lo: f64, hi: f64) -> Result<Self, SensitivityError> {
        Self::new(base, None, lo, hi)
    }

    pub fn base(&self) -> &EvaluatorSpec {
        &self.base
    }

    pub fn parameter(&self) -> Option<&FreeParameter> {
        self.parameter.as_ref()
    }

    pub fn range(&self) -> (f64, f64) {
        self.range
    }

    /// The member of the family at `theta`.
    pub fn spec_at(&self, theta: f64) -> Result<EvaluatorSpec, SensitivityError> {
        let (lo, hi) = self.range;
        if !(theta >= lo && theta <= hi) {
            return Err(SensitivityError::ParameterOutOfRange {
                value: theta,
                lo,
                hi,
            });
        }
        let Some(param) = &self.parameter else {
            return Ok(self.base.clone());
        };
        let mut spec = self.base.clone();
        match (param, &mut spec) {
            (FreeParameter::Alpha, EvaluatorSpec::AffinePaly { alpha }) => *alpha = theta,
            (FreeParameter::Delta, EvaluatorSpec::QalyPqaly { delta, .. }) => *delta = theta,
            (FreeParameter::Sigma, EvaluatorSpec::QalyPaly { sigma, .. }) => *sigma = theta,
            (FreeParameter::Gamma, EvaluatorSpec::PowerPqaly { gamma, .. }) => *gamma = theta,
            (FreeParameter::R(s), EvaluatorSpec::QalyPqaly { r, .. }) => {
                *r = r.with_weight(s, theta)?
            }
            (FreeParameter::Q(s), spec) => {
                let q = quality_table_mut(spec).expect("checked at construction");
                *q = q.with_weight(s, theta)?;
            }
            _ => unreachable!("checked at construction"),
        }
        Ok(spec)
    }
}

fn quality_table_mut(spec: &mut EvaluatorSpec) -> Option<&mut QualityWeights> {
    match spec {
        EvaluatorSpec::Qaly { q }
        | EvaluatorSpec::Pqaly { q }
        | EvaluatorSpec::QalyPqaly { q, .. }
        | EvaluatorSpec::QalyPaly { q, .. }
        | EvaluatorSpec::PowerPqaly { q, .. } => Some(q),
        _ => None,
    }
}

fn check_applicable(base: &EvaluatorSpec, p: &FreeParameter) -> Result<(), SensitivityError> {
    let fam = base.family();
    let table_entry = |q: Option<&QualityWeights>, s: &HealthStateId| match q {
        Some(q) if q.full_health() == s => Err(format!("q({s}) of full health is fixed at 1")),
        Some(q) if !q.weights().contains_key(s) => Err(format!("state `{s}` is not in the table")),
        Some(_) => Ok(()),
        None => Err(format!("{fam} has no such table")),
    };
    let ok = match (p, base) {
        (FreeParameter::Alpha, EvaluatorSpec::AffinePaly { .. })
        | (FreeParameter::Delta, EvaluatorSpec::QalyPqaly { .. })
        | (FreeParameter::Sigma, EvaluatorSpec::QalyPaly { .. })
        | (FreeParameter::Gamma, EvaluatorSpec::PowerPqaly { .. }) => Ok(()),
        (FreeParameter::R(s), EvaluatorSpec::QalyPqaly { r, .. }) => table_entry(Some(r), s),
        (FreeParameter::Q(s), spec) => {
            let mut spec = spec.clone();
            table_entry(quality_table_mut(&mut spec).map(|q| &*q), s)
        }
        _ => Err(format!("{fam} has no parameter {p}")),
    };
    ok.map_err(SensitivityError::InvalidFamily)
}

/// `evaluate(spec(θ), a) - evaluate(spec(θ), b)`.
pub fn difference(
    fam: &ParametricFamily,
    theta: f64,
    a: &Distribution,
    b: &Distribution,
) -> Result<f64, SensitivityError> {
    let spec = fam.spec_at(theta)?;
    Ok(spec.evaluate(a)? - spec.evaluate(b)?)
}

/// `n + 1` equally spaced samples of the difference over the family's range.
pub fn difference_curve(
    fam: &ParametricFamily,
    a: &Distribution,
    b: &Distribution,
    n: usize,
) -> Result<Vec<(f64, f64)>, SensitivityError> {
    if n < 2 {
        return Err(SensitivityError::InvalidGrid);
    }
    (0..=n)
        .map(|k| {
            let theta = grid_point(fam.range, n, k);
            Ok((theta, difference(fam, theta, a, b)?))
        })
        .collect()
}

fn grid_point((lo, hi): (f64, f64), n: usize, k: usize) -> f64 {
    if k == n {
        hi
    } else {
        lo + (hi - lo) * (k as f64 / n as f64)
    }
}

fn sign(x: f64) -> i8 {
    if x.abs() <= ZERO_BAND {
        0
    } else if x > 0.0 {
        1
    } else {
        -1
    }
}

/// An interval of θ on which the preference between the two distributions is fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub lo: f64,
    pub hi: f64,
    pub preference: Preference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub parameter: Option<FreeParameter>,
    pub range: (f64, f64),
    /// Values of θ where the difference crosses or touches zero, increasing.
    pub crossings: Vec<f64>,
    /// Open intervals between crossings, with the preference that holds there.
    pub segments: Vec<Segment>,
    /// Closures of the intervals on which the first distribution is strictly preferred.
    pub prefer_first_on: Vec<[f64; 2]>,
    /// Intervals on which the two distributions are identically indifferent.
    pub degenerate: Vec<[f64; 2]>,
    pub grid_n: usize,
    pub tol: f64,
}

impl ThresholdReport {
    pub fn render_text(&self) -> String {
        let param = self
            .parameter
            .as_ref()
            .map_or_else(|| "none".to_string(), |p| p.to_string());
        let mut out = format!(
            "parameter {param} over [{}, {}]  grid_n {}  tol {:e}\n",
            fmt_sig(self.range.0),
            fmt_sig(self.range.1),
            self.grid_n,
            self.tol
        );
        let crossings: Vec<String> = self.crossings.iter().map(|c| fmt_sig(*c)).collect();
        out.push_str(&format!("crossings: [{}]\n", crossings.join(", ")));
        out.push_str(&format!("{:<14} {:<14} {}\n", "from", "to", "preference"));
        for s in &self.segments {
            let rel = match s.preference {
                Preference::PreferFirst => "A > B",
                Preference::Indifferent => "A ~ B",
                Preference::PreferSecond => "A < B",
            };
            out.push_str(&format!(
                "{:<14} {:<14} {}\n",
                fmt_sig(s.lo),
                fmt_sig(s.hi),
                rel
            ));
        }
        out
    }
}

/// Scans `grid_n + 1` equally spaced θ and refines every sign change by
/// bisection to an interval of width at most `tol`.
///
/// A single grid point with zero difference is reported as a crossing, a run
/// of two or more as a degenerate interval.
pub fn find_thresholds(
    fam: &ParametricFamily,
    a: &Distribution,
    b: &Distribution,
    grid_n: usize,
    tol: f64,
) -> Result<ThresholdReport, SensitivityError> {
    if grid_n < 2 || !(tol > 0.0 && tol.is_finite()) {
        return Err(SensitivityError::InvalidGrid);
    }
    let f = |theta: f64| difference(fam, theta, a, b);
    let grid = difference_curve(fam, a, b, grid_n)?;
    let signs: Vec<i8> = grid.iter().map(|&(_, v)| sign(v)).collect();

    let mut crossings = Vec::new();
    let mut degenerate = Vec::new();
    let mut k = 0;
    while k <= grid_n {
        if signs[k] == 0 {
            let start = k;
            while k < grid_n && signs[k + 1] == 0 {
                k += 1;
            }
            if k == start {
                crossings.push(grid[k].0);
            } else {
                degenerate.push([grid[start].0, grid[k].0]);
            }
        } else if k < grid_n && signs[k + 1] == -signs[k] {
            let (mut lo, mut hi) = (grid[k].0, grid[k + 1].0);
            let s_lo = signs[k];
            let mut root = None;
            while hi - lo > tol {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                match sign(f(mid)?) {
                    0 => {
                        root = Some(mid);
                        break;
                    }
                    s if s == s_lo => lo = mid,
                    _ => hi = mid,
                }
            }
            crossings.push(root.unwrap_or(0.5 * (lo + hi)));
        }
        k += 1;
    }

    let segments = segments_between(fam.range, &crossings, &degenerate, &f)?;
    let prefer_first_on = merged(&segments, Preference::PreferFirst);
    Ok(ThresholdReport {
        parameter: fam.parameter.clone(),
        range: fam.range,
        crossings,
        segments,
        prefer_first_on,
        degenerate,
        grid_n,
        tol,
    })
}

fn segments_between(
    (lo, hi): (f64, f64),
    crossings: &[f64],
    degenerate: &[[f64; 2]],
    f: &impl Fn(f64) -> Result<f64, SensitivityError>,
) -> Result<Vec<Segment>, SensitivityError> {
    // Breakpoints split [lo, hi]; degenerate intervals become their own segments.
    let mut cuts: Vec<(f64, f64)> = crossings.iter().map(|&c| (c, c)).collect();
    cuts.extend(degenerate.iter().map(|d| (d[0], d[1])));
    cuts.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut segments = Vec::new();
    let mut cursor = lo;
    for (start, end) in cuts {
        if start > cursor {
            let mid = 0.5 * (cursor + start);
            segments.push(Segment {
                lo: cursor,
                hi: start,
                preference: Preference::from_difference(f(mid)?, ZERO_BAND),
            });
        }
        if end > start {
            segments.push(Segment {
                lo: start,
                hi: end,
                preference: Preference::Indifferent,
            });
        }
        cursor = cursor.max(end);
    }
    if cursor < hi {
        let mid = 0.5 * (cursor + hi);
        segments.push(Segment {
            lo: cursor,
            hi,
            preference: Preference::from_difference(f(mid)?, ZERO_BAND),
        });
    }
    Ok(segments)
}

fn merged(segments: &[Segment], pref: Preference) -> Vec<[f64; 2]> {
    let mut out: Vec<[f64; 2]> = Vec::new();
    for s in segments.iter().filter(|s| s.preference == pref) {
        match out.last_mut() {
            Some(last) if last[1] >= s.lo => last[1] = s.hi,
            _ => out.push([s.lo, s.hi]),
        }
    }
    out
}

/// One evaluator's values on the two example distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub label: String,
    pub spec: EvaluatorSpec,
    pub delta: f64,
    pub lambda: f64,
    pub preference: Preference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleTable {
    pub rows: Vec<TableRow>,
}

impl ExampleTable {
    pub fn row(&self, label: &str) -> Option<&TableRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn render_text(&self) -> String {
        let mut out = format!(
            "{:<8} {:>14} {:>14}  {}\n",
            "", "E[d_delta]", "E[d_lambda]", "ranking"
        );
        for r in &self.rows {
            let rel = match r.preference {
                Preference::PreferFirst => "d_delta > d_lambda",
                Preference::Indifferent => "d_delta ~ d_lambda",
                Preference::PreferSecond => "d_delta < d_lambda",
            };
            out.push_str(&format!(
                "{:<8} {:>14} {:>14}  {}\n",
                r.label,
                fmt_sig(r.delta),
                fmt_sig(r.lambda),
                rel
            ));
        }
        out
    }
}

fn table(specs: Vec<(&str, EvaluatorSpec)>) -> Result<ExampleTable, EvalError> {
    let reg = example_registry();
    let (d_delta, d_lambda) = example1();
    let rows = specs
        .into_iter()
        .map(|(label, spec)| {
            spec.validate(&reg)?;
            let delta = spec.evaluate(&d_delta)?;
            let lambda = spec.evaluate(&d_lambda)?;
            Ok(TableRow {
                label: label.to_string(),
                preference: Preference::from_difference(
                    delta - lambda,
                    crate::evaluators::DEFAULT_INDIFFERENCE_TOL,
                ),
                spec,
                delta,
                lambda,
            })
        })
        .collect::<Result<_, EvalError>>()?;
    Ok(ExampleTable { rows })
}

fn example_q(w: f64) -> Result<QualityWeights, EvalError> {
    QualityWeights::from_pairs(&example_registry(), &[(EXAMPLE_IMPAIRED, w)])
}

/// QALY, linear PALY, affine PALY and general PALY rows on the worked example.
pub fn table_qaly_paly(q_a: f64, alpha: f64, v: &ValueCurve) -> Result<ExampleTable, EvalError> {
    table(vec![
        ("E^q", EvaluatorSpec::Qaly { q: example_q(q_a)? }),
        ("E^p", EvaluatorSpec::LinearPaly {}),
        ("E^ap", EvaluatorSpec::AffinePaly { alpha }),
        ("E^vp", EvaluatorSpec::GenPaly { v: v.clone() }),
    ])
}

/// PQALY, QALY/PQALY mix and QALY/PALY mix rows on the worked example.
pub fn table_hybrid(q_a: f64, r_a: f64, delta: f64, sigma: f64) -> Result<ExampleTable, EvalError> {
    table(vec![
        ("E^pq", EvaluatorSpec::Pqaly { q: example_q(q_a)? }),
        (
            "E^delta",
            EvaluatorSpec::QalyPqaly {
                delta,
                q: example_q(q_a)?,
                r: example_q(r_a)?,
            },
        ),
        (
            "E^sigma",
            EvaluatorSpec::QalyPaly {
                sigma,
                q: example_q(q_a)?,
            },
        ),
    ])
}

/// Family helper used by the example threshold questions: `base` with the
/// impaired state's quality weight free on `[0, 1]`.
pub fn example_q_family(family: FamilyId) -> Result<ParametricFamily, SensitivityError> {
    let q = example_q(0.5)?;
    let base = match family {
        FamilyId::Qaly => EvaluatorSpec::Qaly { q },
        FamilyId::Pqaly => EvaluatorSpec::Pqaly { q },
        _ => {
            return Err(SensitivityError::InvalidFamily(format!(
                "{family} has no example q family"
            )))
        }
    };
    let state = HealthStateId::new(EXAMPLE_IMPAIRED).map_err(EvalError::from)?;
    ParametricFamily::new(base, Some(FreeParameter::Q(state)), 0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a() -> HealthStateId {
        HealthStateId::new("a").unwrap()
    }

    #[test]
    fn pqaly_difference_vanishes_at_five_thirteenths() {
        let fam = example_q_family(FamilyId::Pqaly).unwrap();
        let (dd, dl) = example1();
        assert!(difference(&fam, 5.0 / 13.0, &dd, &dl).unwrap().abs() < 1e-9);
        assert!(matches!(
            difference(&fam, 1.5, &dd, &dl),
            Err(SensitivityError::ParameterOutOfRange { .. })
        ));
    }

    #[test]
    fn constant_family_difference() {
        let fam = ParametricFamily::constant(EvaluatorSpec::LinearPaly {}, 0.0, 1.0).unwrap();
        let (dd, dl) = example1();
        for theta in [0.0, 0.3, 1.0] {
            assert_eq!(difference(&fam, theta, &dd, &dl).unwrap(), -40.0);
        }
        let r = find_thresholds(&fam, &dd, &dl, 16, 1e-9).unwrap();
        assert!(r.crossings.is_empty());
        assert!(r.prefer_first_on.is_empty());
        assert_eq!(r.segments.len(), 1);
    }

    #[test]
    fn identical_distributions_are_degenerate() {
        let fam = example_q_family(FamilyId::Pqaly).unwrap();
        let (dd, _) = example1();
        let r = find_thresholds(&fam, &dd, &dd, 64, 1e-9).unwrap();
        assert!(r.crossings.is_empty());
        assert_eq!(r.degenerate, vec![[0.0, 1.0]]);
    }

    #[test]
    fn sigma_threshold_at_full_quality_sits_on_boundary() {
        let q = example_q(1.0).unwrap();
        let fam = ParametricFamily::new(
            EvaluatorSpec::QalyPaly { sigma: 0.5, q },
            Some(FreeParameter::Sigma),
            0.0,
            1.0,
        )
        .unwrap();
        let (dd, dl) = example1();
        let r = find_thresholds(&fam, &dd, &dl, 1024, 1e-9).unwrap();
        assert_eq!(r.crossings, vec![1.0]);
        assert!(r.prefer_first_on.is_empty());
    }

    #[test]
    fn parameter_must_fit_family() {
        assert!(matches!(
            ParametricFamily::new(
                EvaluatorSpec::LinearPaly {},
                Some(FreeParameter::Sigma),
                0.0,
                1.0
            ),
            Err(SensitivityError::InvalidFamily(_))
        ));
        let q = example_q(0.5).unwrap();
        let full = HealthStateId::new("a*").unwrap();
        assert!(ParametricFamily::new(
            EvaluatorSpec::Qaly { q: q.clone() },
            Some(FreeParameter::Q(full)),
            0.0,
            1.0
        )
        .is_err());
        assert!(ParametricFamily::new(
            EvaluatorSpec::Qaly { q: q.clone() },
            Some(FreeParameter::Q(a())),
            0.0,
            1.5
        )
        .is_err());
        assert!(ParametricFamily::new(
            EvaluatorSpec::PowerPqaly { gamma: 0.5, q },
            Some(FreeParameter::Gamma),
            0.0,
            1.0
        )
        .is_err());
    }

    #[test]
    fn parameter_names_round_trip() {
        for p in [
            FreeParameter::Alpha,
            FreeParameter::Sigma,
            FreeParameter::Q(a()),
            FreeParameter::R(a()),
        ] {
            assert_eq!(p.to_string().parse::<FreeParameter>().unwrap(), p);
        }
        assert!("beta".parse::<FreeParameter>().is_err());
    }

    #[test]
    fn full_quality_collapses_tables() {
        let t3 = table_qaly_paly(1.0, 0.5, &ValueCurve::linear()).unwrap();
        let row = t3.row("E^q").unwrap();
        assert_eq!((row.delta, row.lambda), (130.0, 130.0));
        assert_eq!(row.preference, Preference::Indifferent);
        let t4 = table_hybrid(1.0, 0.3, 1.0, 0.2).unwrap();
        let row = t4.row("E^delta").unwrap();
        assert_eq!((row.delta, row.lambda), (130.0, 130.0));
        assert!(t4.render_text().contains("E^sigma"));
    }
}

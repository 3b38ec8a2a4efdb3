//! Subcommand implementations. Each returns the rendered report and the
//! process exit code so they can be driven from tests without spawning.

use std::path::{Path, PathBuf};

use lifeyears_core::axioms::{conformance_report, CheckConfig};
use lifeyears_core::elicitation::{simulate_batch, SimulationReport};
use lifeyears_core::evaluators::{QualityWeights, ValueCurve};
use lifeyears_core::io::{read_distribution, read_registry, read_spec};
use lifeyears_core::report::fmt_sig;
use lifeyears_core::sensitivity::{
    difference_curve, find_thresholds, table_hybrid, table_qaly_paly, FreeParameter,
    ParametricFamily,
};
use lifeyears_core::{Distribution, EvaluatorSpec, FamilyId, HealthRegistry, HealthStateId};
use serde::Serialize;
use serde_json::{json, Value};

use crate::svg::difference_plot;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Debug)]
pub struct CliError(pub String);

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for CliError {}

macro_rules! cli_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self { CliError(e.to_string()) }
        }
    )*};
}
cli_from!(
    lifeyears_core::IoError,
    lifeyears_core::EvalError,
    lifeyears_core::ModelError,
    lifeyears_core::AxiomError,
    lifeyears_core::SensitivityError,
    lifeyears_core::ElicitationError,
    std::io::Error
);

pub struct Output {
    pub text: String,
    pub exit_code: i32,
}

impl Output {
    fn ok(text: String) -> Self {
        Self { text, exit_code: 0 }
    }
}

/// Rounds every number to nine significant digits so reports are byte-stable.
pub fn stable_json(v: &impl Serialize) -> String {
    fn round(v: Value) -> Value {
        match v {
            Value::Number(n) => match n.as_f64() {
                Some(x) if n.is_f64() => fmt_sig(x)
                    .parse::<f64>()
                    .ok()
                    .and_then(serde_json::Number::from_f64)
                    .map_or(Value::Number(n), Value::Number),
                _ => Value::Number(n),
            },
            Value::Array(a) => Value::Array(a.into_iter().map(round).collect()),
            Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round(v))).collect()),
            other => other,
        }
    }
    let value = serde_json::to_value(v).expect("reports serialize to JSON");
    let mut s = serde_json::to_string_pretty(&round(value)).expect("JSON values print");
    s.push('\n');
    s
}

/// Registry from a file, else the one the spec's tables imply.
fn resolve_registry(
    path: Option<&Path>,
    spec: &EvaluatorSpec,
) -> Result<Option<HealthRegistry>, CliError> {
    match path {
        Some(p) => Ok(Some(read_registry(p)?)),
        None => Ok(spec.implied_registry()),
    }
}

fn check_inputs(
    reg: Option<&HealthRegistry>,
    spec: &EvaluatorSpec,
    dists: &[&Distribution],
) -> Result<(), CliError> {
    if let Some(reg) = reg {
        spec.validate(reg)?;
        for d in dists {
            d.validate(reg)?;
        }
    }
    Ok(())
}

pub fn cmd_evaluate(
    dist: &Path,
    spec: &Path,
    registry: Option<&Path>,
    format: Format,
) -> Result<Output, CliError> {
    let d = read_distribution(dist)?;
    let spec = read_spec(spec)?;
    let reg = resolve_registry(registry, &spec)?;
    check_inputs(reg.as_ref(), &spec, &[&d])?;
    let total = spec.evaluate(&d)?;
    let contributions = spec.per_profile_contributions(&d)?;
    let full = reg
        .as_ref()
        .map(|r| r.full_health().clone())
        .unwrap_or_else(|| HealthStateId::new(lifeyears_core::model::EXAMPLE_FULL_HEALTH).unwrap());
    let hpye: Option<Vec<f64>> = spec
        .equivalent_distribution(&d, &full)
        .ok()
        .map(|eq| eq.iter().map(|p| p.lifetime).collect());
    let text = match format {
        Format::Json => stable_json(&json!({
            "family": spec.family(),
            "total": total,
            "contributions": contributions,
            "hpye": hpye,
        })),
        Format::Text => {
            let mut out = format!("family {}\ntotal {}\n", spec.family(), fmt_sig(total));
            out.push_str(&format!(
                "{:<6} {:<12} {:>12} {:>12} {:>14} {:>12}\n",
                "person", "state", "productivity", "lifetime", "contribution", "hpye"
            ));
            for (i, p) in d.iter().enumerate() {
                let h = hpye.as_ref().map_or("-".to_string(), |h| fmt_sig(h[i]));
                out.push_str(&format!(
                    "{:<6} {:<12} {:>12} {:>12} {:>14} {:>12}\n",
                    i + 1,
                    p.state.as_str(),
                    fmt_sig(p.productivity),
                    fmt_sig(p.lifetime),
                    fmt_sig(contributions[i]),
                    h
                ));
            }
            out
        }
    };
    Ok(Output::ok(text))
}

pub fn cmd_compare(
    a: &Path,
    b: &Path,
    spec: &Path,
    registry: Option<&Path>,
    tol: f64,
    format: Format,
) -> Result<Output, CliError> {
    let (da, db) = (read_distribution(a)?, read_distribution(b)?);
    let spec = read_spec(spec)?;
    let reg = resolve_registry(registry, &spec)?;
    check_inputs(reg.as_ref(), &spec, &[&da, &db])?;
    let (ea, eb) = (spec.evaluate(&da)?, spec.evaluate(&db)?);
    let pref = spec.compare(&da, &db, tol)?;
    let text = match format {
        Format::Json => stable_json(&json!({
            "family": spec.family(),
            "value_a": ea,
            "value_b": eb,
            "difference": ea - eb,
            "preference": pref,
        })),
        Format::Text => {
            let rel = match pref {
                lifeyears_core::Preference::PreferFirst => "A > B",
                lifeyears_core::Preference::Indifferent => "A ~ B",
                lifeyears_core::Preference::PreferSecond => "A < B",
            };
            format!(
                "family {}\nA {}\nB {}\n{rel}\n",
                spec.family(),
                fmt_sig(ea),
                fmt_sig(eb)
            )
        }
    };
    Ok(Output::ok(text))
}

pub struct AxiomArgs<'a> {
    pub spec: &'a Path,
    pub registry: Option<&'a Path>,
    pub trials: u64,
    pub seed: u64,
    pub tol: f64,
}

pub fn cmd_axioms(args: AxiomArgs<'_>, format: Format) -> Result<Output, CliError> {
    let spec = read_spec(args.spec)?;
    let mut cfg = CheckConfig {
        trials: args.trials,
        seed: args.seed,
        tolerance: args.tol,
        ..CheckConfig::default()
    };
    if let Some(reg) = resolve_registry(args.registry, &spec)? {
        cfg.registry = reg;
    }
    let report = conformance_report(&spec, &cfg)?;
    let text = match format {
        Format::Json => stable_json(&report),
        Format::Text => report.render_text(),
    };
    Ok(Output {
        text,
        exit_code: i32::from(report.has_defects()),
    })
}

pub struct ThresholdArgs<'a> {
    pub a: &'a Path,
    pub b: &'a Path,
    pub family: FamilyId,
    pub param: Option<FreeParameter>,
    pub range: (f64, f64),
    pub spec: Option<&'a Path>,
    pub full_health: &'a str,
    pub grid_n: usize,
    pub tol: f64,
    pub svg: Option<PathBuf>,
}

/// Base spec for a family when none is given: every quality weight, mixing
/// weight and exponent at 0.5 over the states seen in the inputs.
fn default_base(
    family: FamilyId,
    full: &HealthStateId,
    dists: &[&Distribution],
) -> Result<EvaluatorSpec, CliError> {
    let others: Vec<HealthStateId> = dists
        .iter()
        .flat_map(|d| d.iter().map(|p| p.state.clone()))
        .filter(|s| s != full)
        .collect();
    let reg = HealthRegistry::new(full.clone(), others)?;
    let q = QualityWeights::uniform(&reg, 0.5)?;
    Ok(match family {
        FamilyId::Qaly => EvaluatorSpec::Qaly { q },
        FamilyId::GenPaly => EvaluatorSpec::GenPaly {
            v: ValueCurve::linear(),
        },
        FamilyId::AffinePaly => EvaluatorSpec::AffinePaly { alpha: 0.5 },
        FamilyId::LinearPaly => EvaluatorSpec::LinearPaly {},
        FamilyId::Pqaly => EvaluatorSpec::Pqaly { q },
        FamilyId::QalyPqaly => EvaluatorSpec::QalyPqaly {
            delta: 0.5,
            q: q.clone(),
            r: q,
        },
        FamilyId::QalyPaly => EvaluatorSpec::QalyPaly { sigma: 0.5, q },
        FamilyId::PowerPqaly => EvaluatorSpec::PowerPqaly { gamma: 0.5, q },
        FamilyId::Weighted | FamilyId::Hpye | FamilyId::GenHpye => {
            return Err(CliError(format!(
                "family {family} needs --spec with its table"
            )))
        }
    })
}

pub fn cmd_thresholds(args: ThresholdArgs<'_>, format: Format) -> Result<Output, CliError> {
    let (da, db) = (read_distribution(args.a)?, read_distribution(args.b)?);
    let full = HealthStateId::new(args.full_health)?;
    let base = match args.spec {
        Some(p) => {
            let s = read_spec(p)?;
            if s.family() != args.family {
                return Err(CliError(format!(
                    "--family {} does not match the spec's family {}",
                    args.family,
                    s.family()
                )));
            }
            s
        }
        None => default_base(args.family, &full, &[&da, &db])?,
    };
    let fam = ParametricFamily::new(base, args.param, args.range.0, args.range.1)?;
    let report = find_thresholds(&fam, &da, &db, args.grid_n, args.tol)?;
    if let Some(path) = &args.svg {
        let curve = difference_curve(&fam, &da, &db, args.grid_n)?;
        std::fs::write(path, difference_plot(&curve, &report.crossings))?;
    }
    let text = match format {
        Format::Json => stable_json(&report),
        Format::Text => report.render_text(),
    };
    Ok(Output::ok(text))
}

pub struct TableArgs {
    pub qa: f64,
    pub ra: f64,
    pub alpha: f64,
    pub delta: f64,
    pub sigma: f64,
    pub v0: f64,
    pub v05: f64,
}

pub fn cmd_tables(args: TableArgs, format: Format) -> Result<Output, CliError> {
    let v = ValueCurve::three_point(args.v0, args.v05)?;
    let t3 = table_qaly_paly(args.qa, args.alpha, &v)?;
    let t4 = table_hybrid(args.qa, args.ra, args.delta, args.sigma)?;
    let text = match format {
        Format::Json => {
            let rows = |t: &lifeyears_core::sensitivity::ExampleTable| -> Vec<Value> {
                t.rows
                    .iter()
                    .map(|r| json!({"label": r.label, "d_delta": r.delta, "d_lambda": r.lambda, "preference": r.preference}))
                    .collect()
            };
            stable_json(&json!({"qaly_paly": rows(&t3), "hybrid": rows(&t4)}))
        }
        Format::Text => format!(
            "QALY and PALY families\n{}\nHybrid families\n{}",
            t3.render_text(),
            t4.render_text()
        ),
    };
    Ok(Output::ok(text))
}

pub fn cmd_simulate(
    truth: &Path,
    k: usize,
    state: &str,
    tol: f64,
    seed: u64,
    format: Format,
) -> Result<Output, CliError> {
    let truth = read_spec(truth)?;
    let state = HealthStateId::new(state)?;
    let report = simulate_batch(&truth, &state, k, tol, seed)?;
    let text = match format {
        Format::Json => stable_json(&report),
        Format::Text => render_simulation(&report),
    };
    Ok(Output::ok(text))
}

fn render_simulation(r: &SimulationReport) -> String {
    let mut out = format!(
        "state {}  truth q {}  truth sigma {}\n",
        r.state,
        fmt_sig(r.truth_q),
        fmt_sig(r.truth_sigma)
    );
    out.push_str(&format!(
        "{:<8} {:<8} {:>10} {:>14} {:>10}\n",
        "session", "kind", "questions", "estimate", "clamped"
    ));
    let all = r.quality_sessions.iter().chain(&r.sigma_sessions);
    for (i, s) in all.enumerate() {
        out.push_str(&format!(
            "{:<8} {:<8} {:>10} {:>14} {:>10}\n",
            i + 1,
            s.kind,
            s.questions,
            fmt_sig(s.estimate.value),
            s.estimate.clamped
        ));
    }
    for (name, s) in [("quality", &r.quality), ("sigma", &r.sigma)] {
        out.push_str(&format!(
            "{name}: n {}  median {}  iqr {}\n",
            s.n,
            fmt_sig(s.median),
            fmt_sig(s.iqr)
        ));
    }
    out
}

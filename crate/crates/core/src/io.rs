//! Reading distributions, registries and evaluator specs from files.
//!
//! Distribution CSV files have the header
//! `person_id,health_state,productivity,lifetime_years`; the JSON form is an
//! array of objects with the same keys. Registry CSV files have the header
//! `health_state,is_full_health` with exactly one `true` row.

use std::path::Path;

use serde::Deserialize;

use crate::error::IoError;
use crate::evaluators::EvaluatorSpec;
use crate::model::{Distribution, HealthRegistry, HealthStateId, Profile};

pub const DISTRIBUTION_HEADER: [&str; 4] = [
    "person_id",
    "health_state",
    "productivity",
    "lifetime_years",
];
pub const REGISTRY_HEADER: [&str; 2] = ["health_state", "is_full_health"];

#[derive(Debug, Deserialize)]
struct Row {
    #[allow(dead_code)]
    person_id: String,
    health_state: String,
    productivity: f64,
    lifetime_years: f64,
}

fn read_file(path: &Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(|e| IoError::File {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn row_profile(row: Row) -> Result<Profile, String> {
    let state = HealthStateId::new(row.health_state.trim()).map_err(|e| e.to_string())?;
    if !(0.0..=1.0).contains(&row.productivity) {
        return Err(format!("productivity {} outside [0, 1]", row.productivity));
    }
    if !row.lifetime_years.is_finite() {
        return Err("lifetime_years is not finite".into());
    }
    if row.lifetime_years < 0.0 {
        return Err(format!("lifetime_years {} is negative", row.lifetime_years));
    }
    Ok(Profile::new(state, row.productivity, row.lifetime_years))
}

fn check_header(found: &csv::StringRecord, want: &[&str]) -> Result<(), IoError> {
    let got: Vec<&str> = found.iter().map(str::trim).collect();
    if got != want {
        return Err(IoError::Line {
            line: 1,
            message: format!(
                "expected header `{}`, found `{}`",
                want.join(","),
                got.join(",")
            ),
        });
    }
    Ok(())
}

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes())
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

/// Parses distribution CSV text; errors carry 1-based line numbers.
pub fn parse_distribution_csv(text: &str) -> Result<Distribution, IoError> {
    let mut rdr = csv_reader(text);
    let headers = rdr
        .headers()
        .map_err(|e| IoError::Line {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    check_header(&headers, &DISTRIBUTION_HEADER)?;
    let mut profiles = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| IoError::Line {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = line_of(&rec);
        let row: Row = rec.deserialize(Some(&headers)).map_err(|e| IoError::Line {
            line,
            message: e.to_string(),
        })?;
        profiles.push(row_profile(row).map_err(|message| IoError::Line { line, message })?);
    }
    Ok(Distribution::new(profiles))
}

/// Parses a JSON array of distribution rows.
pub fn parse_distribution_json(text: &str) -> Result<Distribution, IoError> {
    let rows: Vec<Row> = serde_json::from_str(text).map_err(|e| IoError::Line {
        line: e.line() as u64,
        message: e.to_string(),
    })?;
    rows.into_iter()
        .enumerate()
        .map(|(i, r)| row_profile(r).map_err(|m| IoError::Format(format!("row {}: {m}", i + 1))))
        .collect()
}

/// Reads a distribution, choosing the format from the extension (`.json` or CSV).
pub fn read_distribution(path: &Path) -> Result<Distribution, IoError> {
    let text = read_file(path)?;
    let parsed = if path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"))
    {
        parse_distribution_json(&text)
    } else {
        parse_distribution_csv(&text)
    };
    parsed.map_err(|e| with_path(path, e))
}

fn with_path(path: &Path, e: IoError) -> IoError {
    IoError::File {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Renders a distribution as CSV with person ids numbered from 1.
pub fn distribution_to_csv(d: &Distribution) -> String {
    let mut out = DISTRIBUTION_HEADER.join(",");
    out.push('\n');
    for (i, p) in d.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{}\n",
            i + 1,
            p.state,
            p.productivity,
            p.lifetime
        ));
    }
    out
}

pub fn parse_registry_csv(text: &str) -> Result<HealthRegistry, IoError> {
    let mut rdr = csv_reader(text);
    let headers = rdr
        .headers()
        .map_err(|e| IoError::Line {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    check_header(&headers, &REGISTRY_HEADER)?;
    let mut full = None;
    let mut others = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| IoError::Line {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = line_of(&rec);
        let err = |message: String| IoError::Line { line, message };
        let state = HealthStateId::new(rec.get(0).unwrap_or("")).map_err(|e| err(e.to_string()))?;
        let flag = match rec.get(1).unwrap_or("").to_ascii_lowercase().as_str() {
            "true" | "1" | "yes" => true,
            "false" | "0" | "no" | "" => false,
            other => {
                return Err(err(format!(
                    "is_full_health must be true or false, got `{other}`"
                )))
            }
        };
        if flag {
            if full.is_some() {
                return Err(err("more than one full-health state".into()));
            }
            full = Some(state);
        } else {
            others.push(state);
        }
    }
    let full = full.ok_or_else(|| IoError::Format("registry has no full-health state".into()))?;
    HealthRegistry::new(full, others).map_err(|e| IoError::Format(e.to_string()))
}

pub fn read_registry(path: &Path) -> Result<HealthRegistry, IoError> {
    let text = read_file(path)?;
    let parsed = if path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"))
    {
        serde_json::from_str(&text).map_err(|e| IoError::Line {
            line: e.line() as u64,
            message: e.to_string(),
        })
    } else {
        parse_registry_csv(&text)
    };
    parsed.map_err(|e| with_path(path, e))
}

pub fn parse_spec_json(text: &str) -> Result<EvaluatorSpec, IoError> {
    let spec: EvaluatorSpec = serde_json::from_str(text).map_err(|e| IoError::Line {
        line: e.line() as u64,
        message: e.to_string(),
    })?;
    spec.validate_params()?;
    Ok(spec)
}

pub fn read_spec(path: &Path) -> Result<EvaluatorSpec, IoError> {
    parse_spec_json(&read_file(path)?).map_err(|e| with_path(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::example1;

    #[test]
    fn csv_round_trip() {
        let (dd, _) = example1();
        let text = distribution_to_csv(&dd);
        assert_eq!(parse_distribution_csv(&text).unwrap(), dd);
    }

    #[test]
    fn header_only_is_empty() {
        let d =
            parse_distribution_csv("person_id,health_state,productivity,lifetime_years\n").unwrap();
        assert!(d.is_empty());
    }

    #[test]
    fn errors_report_lines() {
        let text = "person_id,health_state,productivity,lifetime_years\n1,a*,1,40\n2,a,1.5,10\n";
        assert_eq!(
            parse_distribution_csv(text).unwrap_err(),
            IoError::Line {
                line: 3,
                message: "productivity 1.5 outside [0, 1]".into()
            }
        );
        let text = "person_id,health_state,productivity,lifetime_years\n1,a*,x,40\n";
        assert!(matches!(
            parse_distribution_csv(text),
            Err(IoError::Line { line: 2, .. })
        ));
        let text = "id,state,p,t\n";
        assert!(matches!(
            parse_distribution_csv(text),
            Err(IoError::Line { line: 1, .. })
        ));
        let text = "person_id,health_state,productivity,lifetime_years\n1,a,0.5,-1\n";
        assert!(parse_distribution_csv(text)
            .unwrap_err()
            .to_string()
            .starts_with("line 2"));
    }

    #[test]
    fn json_rows() {
        let text =
            r#"[{"person_id":"1","health_state":"a","productivity":0.5,"lifetime_years":10}]"#;
        let d = parse_distribution_json(text).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.get(0).unwrap().lifetime, 10.0);
    }

    #[test]
    fn registry_csv() {
        let r = parse_registry_csv("health_state,is_full_health\na*,true\na,false\n").unwrap();
        assert_eq!(r.full_health().as_str(), "a*");
        assert_eq!(r.len(), 2);
        assert!(parse_registry_csv("health_state,is_full_health\na*,true\nb,true\n").is_err());
        assert!(parse_registry_csv("health_state,is_full_health\na,false\n").is_err());
    }

    #[test]
    fn spec_json() {
        let s = parse_spec_json(r#"{"family":"linear_paly","params":{}}"#).unwrap();
        assert_eq!(s, EvaluatorSpec::LinearPaly {});
        assert!(parse_spec_json(r#"{"family":"affine_paly","params":{"alpha":2}}"#).is_err());
    }
}

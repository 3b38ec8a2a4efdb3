//! Person trade-off elicitation of quality weights and of the QALY/PALY
//! mixing weight σ.
//!
//! A quality session searches for the number of people `x` in state `a`
//! whose one year is worth as much as one year for 1000 people in full
//! health, both groups without productivity; then `q(a) = 1000 / x`.
//! A sigma session searches for the duration `y` of a year of full
//! productivity in state `a` that matches one unproductive year in full
//! health; then `σ = y / (1 + y - q(a) y)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::ElicitationError;
use crate::evaluators::EvaluatorSpec;
use crate::model::{HealthStateId, Profile, EXAMPLE_FULL_HEALTH, EXAMPLE_IMPAIRED};

/// People in full health in the fixed quality-session intervention.
pub const BASE_COUNT: f64 = 1000.0;
/// Default relative bracket width at which a session stops.
pub const DEFAULT_SESSION_TOL: f64 = 1e-3;
/// Relative difference below which a simulated respondent is indifferent.
pub const RESPONDENT_TOL: f64 = 1e-9;
/// Answers after which a session stops even without convergence.
pub const MAX_QUESTIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Answer {
    /// The fixed intervention (A, or C in a sigma session).
    PreferA,
    /// The adjustable intervention (B, or D in a sigma session).
    PreferB,
    Indifferent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SessionKind {
    Quality {
        state: HealthStateId,
        full_health: HealthStateId,
    },
    Sigma {
        q_a: f64,
        state: HealthStateId,
        full_health: HealthStateId,
    },
}

impl SessionKind {
    pub fn state(&self) -> &HealthStateId {
        match self {
            SessionKind::Quality { state, .. } | SessionKind::Sigma { state, .. } => state,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SessionKind::Quality { .. } => "quality",
            SessionKind::Sigma { .. } => "sigma",
        }
    }

    fn midpoint(&self, lo: f64, hi: f64) -> f64 {
        match self {
            SessionKind::Quality { .. } => (lo * hi).sqrt(),
            SessionKind::Sigma { .. } => 0.5 * (lo + hi),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SessionStatus {
    Active,
    /// `value` is the elicited indifference point (x or y).
    Converged {
        value: f64,
    },
    Inconsistent {
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub value: f64,
    pub answer: Answer,
    /// Bracket after the answer was applied.
    pub bracket: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub kind: SessionKind,
    pub bracket: [f64; 2],
    pub initial_bracket: [f64; 2],
    pub tolerance: f64,
    pub history: Vec<HistoryEntry>,
    pub status: SessionStatus,
}

/// One side of a trade-off question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Intervention {
    pub label: String,
    pub individuals: f64,
    pub state: HealthStateId,
    pub productivity: f64,
    pub years: f64,
}

impl Intervention {
    fn describe(&self) -> String {
        let prod = if self.productivity == 0.0 {
            "zero productivity".to_string()
        } else if self.productivity == 1.0 {
            "maximum productivity".to_string()
        } else {
            format!("productivity {}", self.productivity)
        };
        format!(
            "Intervention {}: {} individuals obtaining {} years in health state {} and having {}",
            self.label, self.individuals, self.years, self.state, prod
        )
    }

    fn profile(&self) -> Profile {
        Profile::new(self.state.clone(), self.productivity, self.years)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Adjustable {
    /// Number of individuals in the right-hand intervention.
    Count,
    /// Duration in the right-hand intervention.
    Duration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeOffQuestion {
    /// Position of the question in the session, for idempotent answering.
    pub index: usize,
    pub left: Intervention,
    pub right: Intervention,
    pub adjustable: Adjustable,
    pub current_value: f64,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    /// The elicited parameter, q(a) or σ, within [0, 1].
    pub value: f64,
    /// The indifference point it was derived from.
    pub indifference_point: f64,
    /// Set when the search ended against an edge of the starting bracket.
    pub clamped: bool,
}

fn check_tol(tol: f64) -> Result<(), ElicitationError> {
    if tol > 0.0 && tol < 1.0 {
        Ok(())
    } else {
        Err(ElicitationError::InvalidTolerance)
    }
}

fn bad(lo: f64, hi: f64, reason: &str) -> ElicitationError {
    ElicitationError::BadBracket {
        lo,
        hi,
        reason: reason.to_string(),
    }
}

fn default_state(label: &str) -> HealthStateId {
    HealthStateId::new(label).expect("static label is non-empty")
}

/// Quality-weight session for `state` over a bracket on x.
pub fn start_quality_session(
    state: HealthStateId,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<SessionState, ElicitationError> {
    start_quality_session_with(state, default_state(EXAMPLE_FULL_HEALTH), lo, hi, tol)
}

pub fn start_quality_session_with(
    state: HealthStateId,
    full_health: HealthStateId,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<SessionState, ElicitationError> {
    if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
        return Err(bad(lo, hi, "need finite lo < hi"));
    }
    if lo < BASE_COUNT {
        return Err(bad(lo, hi, "x cannot be below 1000"));
    }
    check_tol(tol)?;
    Ok(SessionState::new(
        SessionKind::Quality { state, full_health },
        lo,
        hi,
        tol,
    ))
}

/// Sigma session given the state's quality weight, over a bracket on y.
pub fn start_sigma_session(
    q_a: f64,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<SessionState, ElicitationError> {
    start_sigma_session_with(
        q_a,
        default_state(EXAMPLE_IMPAIRED),
        default_state(EXAMPLE_FULL_HEALTH),
        lo,
        hi,
        tol,
    )
}

pub fn start_sigma_session_with(
    q_a: f64,
    state: HealthStateId,
    full_health: HealthStateId,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<SessionState, ElicitationError> {
    if !(q_a > 0.0 && q_a <= 1.0) {
        return Err(ElicitationError::InvalidQ(q_a));
    }
    if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
        return Err(bad(lo, hi, "need finite lo < hi"));
    }
    if lo <= 0.0 {
        return Err(bad(lo, hi, "y must be positive"));
    }
    if hi > 1.0 / q_a {
        return Err(bad(lo, hi, "y above 1/q(a) would imply sigma > 1"));
    }
    check_tol(tol)?;
    Ok(SessionState::new(
        SessionKind::Sigma {
            q_a,
            state,
            full_health,
        },
        lo,
        hi,
        tol,
    ))
}

/// `q(a) = 1000 / x`.
pub fn quality_from_count(x: f64) -> f64 {
    BASE_COUNT / x
}

/// `σ = y / (1 + y - q(a) y)`.
pub fn sigma_from_duration(y: f64, q_a: f64) -> f64 {
    y / (1.0 + y - q_a * y)
}

/// Inverse of [`sigma_from_duration`]: `y = σ / (1 - σ (1 - q(a)))`.
pub fn duration_from_sigma(sigma: f64, q_a: f64) -> f64 {
    sigma / (1.0 - sigma * (1.0 - q_a))
}

impl SessionState {
    fn new(kind: SessionKind, lo: f64, hi: f64, tol: f64) -> Self {
        Self {
            kind,
            bracket: [lo, hi],
            initial_bracket: [lo, hi],
            tolerance: tol,
            history: Vec::new(),
            status: SessionStatus::Active,
        }
    }

    pub fn is_active(&self) -> bool {
        matches!(self.status, SessionStatus::Active)
    }

    /// The value the next question asks about.
    pub fn current_value(&self) -> f64 {
        self.kind.midpoint(self.bracket[0], self.bracket[1])
    }

    pub fn next_question(&self) -> Result<TradeOffQuestion, ElicitationError> {
        if !self.is_active() {
            return Err(ElicitationError::SessionFinished);
        }
        Ok(self.question_at(self.current_value()))
    }

    /// The question template instantiated at `value`.
    pub fn question_at(&self, value: f64) -> TradeOffQuestion {
        let (left, right, adjustable) = match &self.kind {
            SessionKind::Quality { state, full_health } => (
                Intervention {
                    label: "A".into(),
                    individuals: BASE_COUNT,
                    state: full_health.clone(),
                    productivity: 0.0,
                    years: 1.0,
                },
                Intervention {
                    label: "B".into(),
                    individuals: value,
                    state: state.clone(),
                    productivity: 0.0,
                    years: 1.0,
                },
                Adjustable::Count,
            ),
            SessionKind::Sigma {
                state, full_health, ..
            } => (
                Intervention {
                    label: "C".into(),
                    individuals: 1.0,
                    state: full_health.clone(),
                    productivity: 0.0,
                    years: 1.0,
                },
                Intervention {
                    label: "D".into(),
                    individuals: 1.0,
                    state: state.clone(),
                    productivity: 1.0,
                    years: value,
                },
                Adjustable::Duration,
            ),
        };
        let text = format!(
            "Which of the following interventions is most desirable for society?\n{}\n{}",
            left.describe(),
            right.describe()
        );
        TradeOffQuestion {
            index: self.history.len(),
            left,
            right,
            adjustable,
            current_value: value,
            text,
        }
    }

    /// Answers the current question.
    pub fn submit_answer(&mut self, answer: Answer) -> Result<(), ElicitationError> {
        if !self.is_active() {
            return Err(ElicitationError::SessionFinished);
        }
        let value = self.current_value();
        self.submit_answer_at(value, answer)
    }

    /// Records an answer to the question asked at an arbitrary `value`.
    ///
    /// Answers that contradict the bracket (preferring A at or above its
    /// upper end, B at or below its lower end, or indifference outside it)
    /// mark the session inconsistent.
    pub fn submit_answer_at(&mut self, value: f64, answer: Answer) -> Result<(), ElicitationError> {
        if !self.is_active() {
            return Err(ElicitationError::SessionFinished);
        }
        if !value.is_finite() {
            return Err(bad(value, value, "asked value must be finite"));
        }
        let [lo, hi] = self.bracket;
        // A preferred: the adjustable side is too small, the indifference point lies above.
        let outcome = match answer {
            Answer::PreferA if value >= hi => Err(format!(
                "prefers A at {value}, at or above the upper bound {hi}"
            )),
            Answer::PreferA => Ok(([lo.max(value), hi], None)),
            Answer::PreferB if value <= lo => Err(format!(
                "prefers B at {value}, at or below the lower bound {lo}"
            )),
            Answer::PreferB => Ok(([lo, hi.min(value)], None)),
            Answer::Indifferent if value < lo || value > hi => Err(format!(
                "indifferent at {value}, outside the bracket [{lo}, {hi}]"
            )),
            Answer::Indifferent => Ok(([lo, hi], Some(value))),
        };
        match outcome {
            Err(reason) => {
                self.history.push(HistoryEntry {
                    value,
                    answer,
                    bracket: self.bracket,
                });
                self.status = SessionStatus::Inconsistent { reason };
            }
            Ok((bracket, indifferent)) => {
                self.bracket = bracket;
                self.history.push(HistoryEntry {
                    value,
                    answer,
                    bracket,
                });
                if let Some(v) = indifferent {
                    self.status = SessionStatus::Converged { value: v };
                } else {
                    let mid = self.current_value();
                    if bracket[1] - bracket[0] <= self.tolerance * mid
                        || self.history.len() >= MAX_QUESTIONS
                    {
                        self.status = SessionStatus::Converged { value: mid };
                    }
                }
            }
        }
        Ok(())
    }

    /// The elicited parameter of a converged session.
    ///
    /// A search that never moved one end of its starting bracket reports
    /// that end as the indifference point and raises the clamp flag.
    pub fn estimate(&self) -> Result<Estimate, ElicitationError> {
        let SessionStatus::Converged { value } = self.status else {
            return Err(ElicitationError::NotConverged);
        };
        let indifferent = matches!(self.history.last(), Some(h) if h.answer == Answer::Indifferent);
        let (point, clamped) = if indifferent {
            (value, false)
        } else if self.bracket[0] == self.initial_bracket[0] {
            (self.initial_bracket[0], true)
        } else if self.bracket[1] == self.initial_bracket[1] {
            (self.initial_bracket[1], true)
        } else {
            (value, false)
        };
        let raw = match &self.kind {
            SessionKind::Quality { .. } => quality_from_count(point),
            SessionKind::Sigma { q_a, .. } => sigma_from_duration(point, *q_a),
        };
        Ok(Estimate {
            value: raw.clamp(0.0, 1.0),
            indifference_point: point,
            clamped: clamped || !(0.0..=1.0).contains(&raw),
        })
    }
}

/// Answer of a respondent who values interventions with `truth`.
///
/// Each side is worth its head count times the truth's value of one
/// individual's profile; sides within a relative 1e-9 are indifferent.
pub fn simulate_respondent(
    truth: &EvaluatorSpec,
    s: &SessionState,
) -> Result<Answer, ElicitationError> {
    if !matches!(truth, EvaluatorSpec::QalyPaly { .. }) {
        return Err(ElicitationError::UnsupportedTruthFamily);
    }
    let q = s.next_question()?;
    let value = |iv: &Intervention| -> Result<f64, ElicitationError> {
        Ok(iv.individuals * truth.term(&iv.profile())?)
    };
    Ok(answer_from_values(value(&q.left)?, value(&q.right)?))
}

/// Preference between values of the fixed (A) and adjustable (B) sides.
pub fn answer_from_values(a: f64, b: f64) -> Answer {
    if (a - b).abs() <= RESPONDENT_TOL * a.abs().max(b.abs()) {
        Answer::Indifferent
    } else if a > b {
        Answer::PreferA
    } else {
        Answer::PreferB
    }
}

/// Lets the simulated respondent answer until the session stops.
pub fn run_simulated_session(
    truth: &EvaluatorSpec,
    mut s: SessionState,
) -> Result<SessionState, ElicitationError> {
    while s.is_active() {
        let answer = simulate_respondent(truth, &s)?;
        s.submit_answer(answer)?;
    }
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateSummary {
    pub n: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
    pub min: f64,
    pub max: f64,
    pub estimates: Vec<f64>,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let i = h.floor() as usize;
    let frac = h - i as f64;
    match sorted.get(i + 1) {
        Some(next) if frac > 0.0 => sorted[i] + frac * (next - sorted[i]),
        _ => sorted[i],
    }
}

/// Median and interquartile range of respondents' estimates.
pub fn aggregate(estimates: &[f64]) -> Result<EstimateSummary, ElicitationError> {
    if estimates.is_empty() {
        return Err(ElicitationError::EmptyInput);
    }
    let mut sorted = estimates.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile(&sorted, 0.25);
    let q3 = quantile(&sorted, 0.75);
    Ok(EstimateSummary {
        n: sorted.len(),
        median: quantile(&sorted, 0.5),
        q1,
        q3,
        iqr: q3 - q1,
        min: sorted[0],
        max: sorted[sorted.len() - 1],
        estimates: estimates.to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedSession {
    pub kind: String,
    pub initial_bracket: [f64; 2],
    pub questions: usize,
    pub estimate: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub state: HealthStateId,
    pub truth_q: f64,
    pub truth_sigma: f64,
    pub quality_sessions: Vec<SimulatedSession>,
    pub sigma_sessions: Vec<SimulatedSession>,
    pub quality: EstimateSummary,
    pub sigma: EstimateSummary,
}

/// Runs `k` quality and `k` sigma sessions against a QALY/PALY truth.
///
/// Starting brackets are randomized per session from `seed`: quality
/// sessions search `[1000, 1000 * 2^u]` with `u` uniform on [6, 8]; sigma
/// sessions search `[l, 1/q(a)]` with `l` uniform on [0.001, 0.01]. Sigma
/// sessions are told the truth's own `q(a)`.
pub fn simulate_batch(
    truth: &EvaluatorSpec,
    state: &HealthStateId,
    k: usize,
    tol: f64,
    seed: u64,
) -> Result<SimulationReport, ElicitationError> {
    let EvaluatorSpec::QalyPaly { sigma, q } = truth else {
        return Err(ElicitationError::UnsupportedTruthFamily);
    };
    if k == 0 {
        return Err(ElicitationError::EmptyInput);
    }
    let q_a = q.get(state)?;
    let full = q.full_health().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut quality_sessions = Vec::with_capacity(k);
    let mut sigma_sessions = Vec::with_capacity(k);
    for _ in 0..k {
        let hi = BASE_COUNT * 2f64.powf(rng.random_range(6.0..8.0));
        let s = start_quality_session_with(state.clone(), full.clone(), BASE_COUNT, hi, tol)?;
        quality_sessions.push(finish(truth, s)?);
        let lo = rng.random_range(0.001..0.01);
        let s = start_sigma_session_with(q_a, state.clone(), full.clone(), lo, 1.0 / q_a, tol)?;
        sigma_sessions.push(finish(truth, s)?);
    }
    let values = |v: &[SimulatedSession]| v.iter().map(|s| s.estimate.value).collect::<Vec<_>>();
    Ok(SimulationReport {
        state: state.clone(),
        truth_q: q_a,
        truth_sigma: *sigma,
        quality: aggregate(&values(&quality_sessions))?,
        sigma: aggregate(&values(&sigma_sessions))?,
        quality_sessions,
        sigma_sessions,
    })
}

fn finish(truth: &EvaluatorSpec, s: SessionState) -> Result<SimulatedSession, ElicitationError> {
    let initial_bracket = s.initial_bracket;
    let done = run_simulated_session(truth, s)?;
    Ok(SimulatedSession {
        kind: done.kind.name().to_string(),
        initial_bracket,
        questions: done.history.len(),
        estimate: done.estimate()?,
    })
}

//! One PASS/FAIL line per acceptance criterion, with timings.
//!
//! Run with `cargo test -p lifeyears-core --test acceptance -- --nocapture`
//! to see the lines.

use std::time::{Duration, Instant};

use lifeyears_core::axioms::sampler::{random_spec, random_surface, ProfileSampler};
use lifeyears_core::axioms::{check_axiom, conformance_report, AxiomId, CheckConfig};
use lifeyears_core::elicitation::{
    run_simulated_session, sigma_from_duration, simulate_batch, start_quality_session,
    start_sigma_session,
};
use lifeyears_core::evaluators::{QualityWeights, ValueCurve};
use lifeyears_core::sensitivity::{
    difference, find_thresholds, table_hybrid, table_qaly_paly, FreeParameter, ParametricFamily,
};
use lifeyears_core::{example1, example_registry, EvaluatorSpec, FamilyId, HealthStateId};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

/// Collects failed checks; the criterion passes when none failed.
#[derive(Default)]
struct Checks {
    failures: Vec<String>,
    count: usize,
}

impl Checks {
    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.count += 1;
        if !ok {
            self.failures.push(what());
        }
    }

    fn close(&mut self, what: &str, got: f64, want: f64, tol: f64) {
        self.check((got - want).abs() <= tol, || {
            format!("{what}: got {got}, want {want}")
        });
    }

    fn outcome(self, extra: &str) -> Outcome {
        let pass = self.failures.is_empty();
        let mut detail = format!("{} checks{extra}", self.count);
        if !pass {
            detail.push_str(&format!("; failures: {}", self.failures.join(" | ")));
        }
        Outcome { pass, detail }
    }
}

fn report(id: usize, name: &str, out: &Outcome, took: Duration) {
    println!(
        "{} [{id}] {name}: {} ({:.3}s)",
        if out.pass { "PASS" } else { "FAIL" },
        out.detail,
        took.as_secs_f64()
    );
}

fn q(w: f64) -> QualityWeights {
    QualityWeights::from_pairs(&example_registry(), &[("a", w)]).unwrap()
}

fn qaly_paly_tables() -> Outcome {
    let mut c = Checks::default();
    for qa in [0.0, 0.5, 1.0] {
        let t = table_qaly_paly(qa, 0.5, &ValueCurve::linear()).unwrap();
        let r = t.row("E^q").unwrap();
        c.close("E^q(d_delta)", r.delta, 130.0, 1e-9);
        c.close("E^q(d_lambda)", r.lambda, 40.0 + 90.0 * qa, 1e-9);
    }
    let t = table_qaly_paly(0.5, 0.5, &ValueCurve::linear()).unwrap();
    let r = t.row("E^p").unwrap();
    c.close("E^p(d_delta)", r.delta, 65.0, 1e-9);
    c.close("E^p(d_lambda)", r.lambda, 105.0, 1e-9);
    for alpha in [0.0, 0.5, 1.0] {
        let t = table_qaly_paly(0.5, alpha, &ValueCurve::linear()).unwrap();
        let r = t.row("E^ap").unwrap();
        c.close("E^ap(d_delta)", r.delta, 130.0 - 65.0 * alpha, 1e-9);
        c.close("E^ap(d_lambda)", r.lambda, 130.0 - 25.0 * alpha, 1e-9);
    }
    for v0 in [0.0, 0.3] {
        for vh in [0.5, 0.7] {
            let v = ValueCurve::three_point(v0, vh).unwrap();
            let t = table_qaly_paly(0.5, 0.5, &v).unwrap();
            let r = t.row("E^vp").unwrap();
            c.close("E^vp(d_delta)", r.delta, 40.0 + 50.0 * vh + 40.0 * v0, 1e-9);
            c.close("E^vp(d_lambda)", r.lambda, 80.0 + 50.0 * vh, 1e-9);
        }
    }
    c.outcome("")
}

fn hybrid_tables() -> Outcome {
    let mut c = Checks::default();
    let grid = [0.0, 0.25, 0.5, 0.75, 1.0];
    for qa in grid {
        for x in grid {
            let t = table_hybrid(qa, 0.5, 0.5, x).unwrap();
            let r = t.row("E^pq").unwrap();
            c.close("E^pq(d_delta)", r.delta, 65.0, 1e-9);
            c.close("E^pq(d_lambda)", r.lambda, 40.0 + 65.0 * qa, 1e-9);
            let r = t.row("E^sigma").unwrap();
            c.close("E^sigma(d_delta)", r.delta, 65.0 * (1.0 + x), 1e-9);
            c.close(
                "E^sigma(d_lambda)",
                r.lambda,
                105.0 - 65.0 * x + 90.0 * qa * x,
                1e-9,
            );
            for ra in grid {
                let t = table_hybrid(qa, ra, x, 0.5).unwrap();
                let r = t.row("E^delta").unwrap();
                c.close("E^delta(d_delta)", r.delta, 65.0 * (1.0 + x), 1e-9);
                c.close(
                    "E^delta(d_lambda)",
                    r.lambda,
                    40.0 + 90.0 * x * qa + 65.0 * (1.0 - x) * ra,
                    1e-9,
                );
            }
        }
    }
    c.outcome("")
}

/// Sign changes of the difference on a dense uniform grid, each located by
/// linear interpolation between the bracketing grid points.
fn brute_force_crossings(fam: &ParametricFamily, n: usize) -> Vec<f64> {
    let (dd, dl) = example1();
    let (lo, hi) = fam.range();
    let pts: Vec<(f64, f64)> = (0..=n)
        .map(|k| {
            let th = if k == n {
                hi
            } else {
                lo + (hi - lo) * k as f64 / n as f64
            };
            (th, difference(fam, th, &dd, &dl).unwrap())
        })
        .collect();
    let mut out = Vec::new();
    for w in pts.windows(2) {
        let ((t0, f0), (t1, f1)) = (w[0], w[1]);
        if f0 == 0.0 {
            out.push(t0);
        } else if f0 * f1 < 0.0 {
            out.push(t0 + (t1 - t0) * f0 / (f0 - f1));
        }
    }
    if pts[n].1 == 0.0 {
        out.push(hi);
    }
    out
}

fn thresholds() -> (Outcome, Vec<(String, f64)>, Vec<String>) {
    let mut c = Checks::default();
    let (dd, dl) = example1();
    let a = HealthStateId::new("a").unwrap();
    let tol = 1e-9;
    let mut slowest = 0.0f64;
    let mut found = Vec::new();
    let mut solve = |c: &mut Checks, label: String, fam: ParametricFamily, want: f64| {
        let start = Instant::now();
        let rep = find_thresholds(&fam, &dd, &dl, 1024, tol).unwrap();
        let took = start.elapsed().as_secs_f64();
        slowest = slowest.max(took);
        c.check(took < 0.1, || format!("{label}: solve took {took}s"));
        c.check(rep.crossings.len() == 1, || {
            format!("{label}: crossings {:?}", rep.crossings)
        });
        let got = rep.crossings.first().copied().unwrap_or(f64::NAN);
        found.push((label.clone(), got));
        c.close(&label, got, want, tol);
        let bf = brute_force_crossings(&fam, 100_000);
        c.check(bf.len() == rep.crossings.len(), || {
            format!("{label}: brute force {bf:?}")
        });
        for (x, y) in bf.iter().zip(&rep.crossings) {
            c.close(&format!("{label} vs brute force"), *y, *x, 10.0 * tol);
        }
    };
    let pq = ParametricFamily::new(
        EvaluatorSpec::Pqaly { q: q(0.5) },
        Some(FreeParameter::Q(a.clone())),
        0.0,
        1.0,
    )
    .unwrap();
    solve(&mut c, "q* (PQALY)".into(), pq, 5.0 / 13.0);
    for qa in [0.0, 0.2, 0.4, 0.8] {
        let fam = ParametricFamily::new(
            EvaluatorSpec::QalyPaly {
                sigma: 0.5,
                q: q(qa),
            },
            Some(FreeParameter::Sigma),
            0.0,
            1.0,
        )
        .unwrap();
        solve(
            &mut c,
            format!("sigma*(q={qa})"),
            fam,
            4.0 / (13.0 - 9.0 * qa),
        );
    }
    let delta_fam = ParametricFamily::new(
        EvaluatorSpec::QalyPqaly {
            delta: 0.5,
            q: q(0.4),
            r: q(0.4),
        },
        Some(FreeParameter::Delta),
        0.0,
        1.0,
    )
    .unwrap();
    solve(&mut c, "delta*(q=r=0.4)".into(), delta_fam, 1.0 / 3.0);
    let failures = c.failures.clone();
    let mut out = c.outcome(&format!("; slowest solve {slowest:.4}s"));
    if failures.iter().any(|f| f.starts_with("delta*")) {
        out.detail.push_str(
            "; note: the tabulated E^delta entries give 55*delta - 1 at q = r = 0.4, whose root is 1/55",
        );
    }
    (out, found, failures)
}

fn axiom_matrix() -> Outcome {
    let mut c = Checks::default();
    let cfg = CheckConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut may_fail_found = 0;
    for fam in FamilyId::ALL {
        for _ in 0..5 {
            let spec = random_spec(&mut rng, fam, &cfg.registry, cfg.t_max).unwrap();
            let rep = conformance_report(&spec, &cfg).unwrap();
            c.check(!rep.has_defects(), || {
                format!("{fam}: MustPass failures {:?}", rep.defects)
            });
            may_fail_found += rep.rows.iter().filter(|r| !r.verdict.passed()).count();
        }
    }
    let reg = &cfg.registry;
    let half = QualityWeights::uniform(reg, 0.5).unwrap();
    let cases = [
        (EvaluatorSpec::Qaly { q: half.clone() }, AxiomId::Hi),
        (EvaluatorSpec::LinearPaly {}, AxiomId::Pi),
        (
            EvaluatorSpec::QalyPaly {
                sigma: 0.5,
                q: half.clone(),
            },
            AxiomId::Tiup,
        ),
        (EvaluatorSpec::Pqaly { q: half }, AxiomId::Pi),
    ];
    for (spec, axiom) in cases {
        let v = check_axiom(&spec, axiom, &cfg).unwrap();
        match v.witness() {
            Some(w) => c.check(w.replay(&spec, cfg.tolerance).unwrap(), || {
                format!("{} {axiom}: witness does not replay", spec.family())
            }),
            None => c.check(false, || format!("{} {axiom}: no witness", spec.family())),
        }
    }
    c.outcome(&format!("; {may_fail_found} MayFail violations found"))
}

fn elicitation() -> Outcome {
    let mut c = Checks::default();
    let tol = 1e-3;
    for qa in [0.1, 0.25, 0.5, 0.9] {
        for sigma in [0.2, 4.0 / 7.0, 0.9] {
            let truth = EvaluatorSpec::QalyPaly { sigma, q: q(qa) };
            let s = start_quality_session(HealthStateId::new("a").unwrap(), 1000.0, 64000.0, tol)
                .unwrap();
            let e = run_simulated_session(&truth, s)
                .unwrap()
                .estimate()
                .unwrap();
            c.close(
                &format!("q at (q={qa}, sigma={sigma})"),
                e.value,
                qa,
                2.0 * tol * qa,
            );
            let s = start_sigma_session(qa, 0.01, 1.0 / qa, tol).unwrap();
            let e = run_simulated_session(&truth, s)
                .unwrap()
                .estimate()
                .unwrap();
            c.close(
                &format!("sigma at (q={qa}, sigma={sigma})"),
                e.value,
                sigma,
                2.0 * tol * sigma,
            );
        }
    }
    c.close(
        "sigma(y=0.8, q=0.5)",
        sigma_from_duration(0.8, 0.5),
        4.0 / 7.0,
        1e-9,
    );
    let truth = EvaluatorSpec::QalyPaly {
        sigma: 4.0 / 7.0,
        q: q(0.5),
    };
    let start = Instant::now();
    let batch = simulate_batch(&truth, &HealthStateId::new("a").unwrap(), 20, tol, 42).unwrap();
    let took = start.elapsed().as_secs_f64();
    c.check(took < 1.0, || format!("20-session batch took {took}s"));
    c.close("batch median sigma", batch.sigma.median, 4.0 / 7.0, 2e-3);
    c.outcome(&format!("; 20-session batch {took:.4}s"))
}

fn hpye_consistency() -> Outcome {
    let mut c = Checks::default();
    let cfg = CheckConfig::default();
    let sampler = ProfileSampler::new(&cfg.registry, 8, cfg.t_max);
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for trial in 0..1000 {
        let w = random_surface(&mut rng, &cfg.registry);
        let d = sampler.distribution(&mut rng, 1);
        let spec = EvaluatorSpec::Weighted { w: w.clone() };
        for p in &d {
            let want = w.eval(&p.state, p.productivity).unwrap() * p.lifetime;
            let got = spec.hpye_of_profile(p).unwrap();
            c.check(got == want, || {
                format!("trial {trial}: hpye {got} != {want}")
            });
        }
        let eq = spec
            .equivalent_distribution(&d, cfg.registry.full_health())
            .unwrap();
        let (x, y) = (spec.evaluate(&d).unwrap(), spec.evaluate(&eq).unwrap());
        c.check((x - y).abs() <= 1e-12 * x.abs().max(y.abs()), || {
            format!("trial {trial}: {x} vs {y}")
        });
    }
    c.outcome(" over 1000 random (w, d)")
}

fn main() {
    let mut results = Vec::new();
    let mut run = |id: usize, name: &str, limit: Option<f64>, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let mut out = f();
        let took = start.elapsed();
        if let Some(limit) = limit {
            if took.as_secs_f64() >= limit {
                out.pass = false;
                out.detail.push_str(&format!("; over the {limit}s budget"));
            }
        }
        report(id, name, &out, took);
        results.push((id, out.pass));
    };

    run(
        1,
        "example table, QALY and PALY families",
        Some(1.0),
        &mut qaly_paly_tables,
    );
    run(
        2,
        "example table, hybrid families",
        None,
        &mut hybrid_tables,
    );
    let mut found = Vec::new();
    let mut threshold_failures = Vec::new();
    run(3, "ranking thresholds", None, &mut || {
        let (out, f, fails) = thresholds();
        found = f;
        threshold_failures = fails;
        out
    });
    run(4, "axiom conformance matrix", Some(60.0), &mut axiom_matrix);
    run(5, "elicitation round trip", None, &mut elicitation);
    run(6, "HPYE consistency", None, &mut hpye_consistency);

    for (id, pass) in &results {
        if *id != 3 {
            assert!(*pass, "criterion {id} failed");
        }
    }

    // The stated delta threshold of 1/3 is incompatible with the table
    // entries checked in criterion 2: at q = r = 0.4 the difference is
    // 55 delta - 1. Everything else in criterion 3 must hold, and the delta
    // crossing must sit at the root of the tabulated closed form.
    assert!(
        threshold_failures
            .iter()
            .all(|f| f.starts_with("delta*(q=r=0.4): got")),
        "unexpected threshold failures: {threshold_failures:?}"
    );
    let delta = found
        .iter()
        .find(|(l, _)| l.starts_with("delta"))
        .unwrap()
        .1;
    let closed_form = |d: f64| 65.0 * (1.0 + d) - (40.0 + 90.0 * d * 0.4 + 65.0 * (1.0 - d) * 0.4);
    assert!(closed_form(delta).abs() < 1e-7);
    assert!((delta - 1.0 / 55.0).abs() < 1e-9, "delta crossing {delta}");
    for (label, value) in &found {
        if label.starts_with("q*") {
            assert!((value - 5.0 / 13.0).abs() <= 1e-9);
        } else if let Some(rest) = label.strip_prefix("sigma*(q=") {
            let qa: f64 = rest.trim_end_matches(')').parse().unwrap();
            assert!((value - 4.0 / (13.0 - 9.0 * qa)).abs() <= 1e-9, "{label}");
        }
    }
}

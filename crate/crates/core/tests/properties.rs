use lifeyears_core::axioms::sampler::{
    random_hpye_grid, random_quality, random_spec, random_surface, ProfileSampler,
};
use lifeyears_core::axioms::{check_axiom, AxiomId, CheckConfig};
use lifeyears_core::elicitation::{
    answer_from_values, start_quality_session, start_sigma_session, Answer, SessionState,
};
use lifeyears_core::evaluators::{GainTransform, HpyeTable, QualityWeights, ValueCurve};
use lifeyears_core::sensitivity::{find_thresholds, FreeParameter, ParametricFamily};
use lifeyears_core::{
    Distribution, EvaluatorSpec, FamilyId, HealthRegistry, HealthStateId, Profile,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn registry() -> HealthRegistry {
    HealthRegistry::from_labels("a*", &["a", "b", "c"]).unwrap()
}

fn family() -> impl Strategy<Value = FamilyId> {
    (0..FamilyId::ALL.len()).prop_map(|i| FamilyId::ALL[i])
}

fn setup(seed: u64, fam: FamilyId) -> (ChaCha8Rng, EvaluatorSpec, Distribution, ProfileSampler) {
    let reg = registry();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = random_spec(&mut rng, fam, &reg, 80.0).unwrap();
    let sampler = ProfileSampler::new(&reg, 7, 80.0);
    let d = sampler.distribution(&mut rng, 0);
    (rng, spec, d, sampler)
}

fn rel_close(x: f64, y: f64, rel: f64) -> bool {
    (x - y).abs() <= rel * x.abs().max(y.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn permutation_leaves_value_unchanged(seed in any::<u64>(), fam in family()) {
        let (mut rng, spec, d, _) = setup(seed, fam);
        let mut perm: Vec<usize> = (0..d.len()).collect();
        perm.shuffle(&mut rng);
        let e = spec.evaluate(&d).unwrap();
        prop_assert_eq!(e, spec.evaluate(&d.permute(&perm).unwrap()).unwrap());
    }

    #[test]
    fn values_are_bounded(seed in any::<u64>(), fam in family()) {
        let (_, spec, d, _) = setup(seed, fam);
        let e = spec.evaluate(&d).unwrap();
        prop_assert!(e >= 0.0);
        if fam != FamilyId::GenHpye {
            prop_assert!(e <= d.total_lifetime() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn zero_lifetime_individuals_do_not_count(seed in any::<u64>(), fam in family()) {
        let (mut rng, spec, d, sampler) = setup(seed, fam);
        let mut longer = d.clone();
        let p = sampler.profile(&mut rng);
        longer.push(Profile::new(p.state, p.productivity, 0.0));
        let (x, y) = (spec.evaluate(&d).unwrap(), spec.evaluate(&longer).unwrap());
        // GenHpye with an affine gain values a zero-length life at g(0) > 0.
        if let EvaluatorSpec::GenHpye { g: GainTransform::Affine { intercept, .. }, .. } = &spec {
            prop_assert!(rel_close(y - x, *intercept, 1e-12));
        } else {
            prop_assert!(rel_close(x, y, 1e-12));
        }
    }

    #[test]
    fn full_health_and_productivity_never_hurt(seed in any::<u64>(), fam in family()) {
        let (mut rng, spec, d, sampler) = setup(seed, fam);
        prop_assume!(!d.is_empty());
        let i = rng.random_range(0..d.len());
        let p = d.get(i).unwrap().clone();
        let e = spec.evaluate(&d).unwrap();
        let healthy = d.replace_profile(i, Profile::new(sampler.full_health().clone(), p.productivity, p.lifetime)).unwrap();
        let productive = d.replace_profile(i, Profile::new(p.state.clone(), 1.0, p.lifetime)).unwrap();
        prop_assert!(spec.evaluate(&healthy).unwrap() >= e - 1e-9);
        prop_assert!(spec.evaluate(&productive).unwrap() >= e - 1e-9);
    }

    #[test]
    fn time_linear_families_scale_with_lifetime(seed in any::<u64>(), fam in family(), k in 0.0f64..3.0) {
        prop_assume!(fam.is_time_linear());
        let (_, spec, d, _) = setup(seed, fam);
        let scaled: Distribution = d.iter().map(|p| Profile::new(p.state.clone(), p.productivity, p.lifetime * k)).collect();
        prop_assert!(rel_close(spec.evaluate(&scaled).unwrap(), k * spec.evaluate(&d).unwrap(), 1e-12));
    }

    #[test]
    fn mixtures_recompose(seed in any::<u64>(), s in 0.0f64..=1.0) {
        let reg = registry();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = random_quality(&mut rng, &reg);
        let r = random_quality(&mut rng, &reg);
        let d = ProfileSampler::new(&reg, 7, 80.0).distribution(&mut rng, 0);
        let ev = |spec: EvaluatorSpec| spec.evaluate(&d).unwrap();
        let eq = ev(EvaluatorSpec::Qaly { q: q.clone() });
        let ep = ev(EvaluatorSpec::LinearPaly {});
        let epq = ev(EvaluatorSpec::Pqaly { q: r.clone() });
        let mix = ev(EvaluatorSpec::QalyPaly { sigma: s, q: q.clone() });
        prop_assert!(rel_close(mix, s * eq + (1.0 - s) * ep, 1e-12));
        let mix = ev(EvaluatorSpec::QalyPqaly { delta: s, q: q.clone(), r });
        prop_assert!(rel_close(mix, s * eq + (1.0 - s) * epq, 1e-12));
        let affine = ev(EvaluatorSpec::AffinePaly { alpha: s });
        prop_assert!(rel_close(affine, s * ep + (1.0 - s) * d.total_lifetime(), 1e-12));
        prop_assert_eq!(ev(EvaluatorSpec::QalyPaly { sigma: 1.0, q: q.clone() }), eq);
        prop_assert_eq!(ev(EvaluatorSpec::QalyPaly { sigma: 0.0, q }), ep);
        let general = ev(EvaluatorSpec::GenPaly { v: ValueCurve::linear() });
        prop_assert!(rel_close(general, ep, 1e-12));
    }

    #[test]
    fn power_pqaly_approaches_pqaly(seed in any::<u64>()) {
        let reg = registry();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = random_quality(&mut rng, &reg);
        let d = ProfileSampler::new(&reg, 7, 80.0).distribution(&mut rng, 0);
        let near = EvaluatorSpec::PowerPqaly { gamma: 1.0 - 1e-6, q: q.clone() }.evaluate(&d).unwrap();
        let exact = EvaluatorSpec::Pqaly { q }.evaluate(&d).unwrap();
        prop_assert!(rel_close(near, exact, 1e-4));
    }

    #[test]
    fn hpye_generalizations_collapse(seed in any::<u64>()) {
        let reg = registry();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_hpye_grid(&mut rng, &reg, 80.0);
        let d = ProfileSampler::new(&reg, 7, 120.0).distribution(&mut rng, 0);
        let h = EvaluatorSpec::Hpye { f: f.clone() }.evaluate(&d).unwrap();
        let g = EvaluatorSpec::GenHpye { g: GainTransform::Identity, f }.evaluate(&d).unwrap();
        prop_assert_eq!(h, g);

        // A grid built from a weight surface reproduces the weighted family,
        // including beyond its last lifetime node.
        let w = random_surface(&mut rng, &reg);
        let grid = HpyeTable::from_weight_surface(&w, vec![0.0, 10.0, 40.0]).unwrap();
        let a = EvaluatorSpec::Weighted { w }.evaluate(&d).unwrap();
        let b = EvaluatorSpec::Hpye { f: grid }.evaluate(&d).unwrap();
        prop_assert!(rel_close(a, b, 1e-12));
    }

    #[test]
    fn bracket_narrows_monotonically(answers in prop::collection::vec(0u8..3, 1..40), sigma_kind in any::<bool>()) {
        let mut s: SessionState = if sigma_kind {
            start_sigma_session(0.4, 0.05, 2.5, 1e-3).unwrap()
        } else {
            start_quality_session(HealthStateId::new("a").unwrap(), 1000.0, 64000.0, 1e-3).unwrap()
        };
        for code in answers {
            if !s.is_active() { break; }
            let answer = [Answer::PreferA, Answer::PreferB, Answer::Indifferent][code as usize];
            let before = s.bracket;
            s.submit_answer(answer).unwrap();
            prop_assert!(s.bracket[0] >= before[0] && s.bracket[1] <= before[1]);
            if answer != Answer::Indifferent {
                prop_assert!(s.bracket[1] - s.bracket[0] < before[1] - before[0]);
            }
        }
        if let Ok(e) = s.estimate() {
            prop_assert!((0.0..=1.0).contains(&e.value));
        }
    }

    #[test]
    fn respondent_choices_ignore_value_scale(a in 0.0f64..1e4, b in 0.0f64..1e4, c in 1e-3f64..1e3) {
        prop_assert_eq!(answer_from_values(a, b), answer_from_values(a * c, b * c));
    }

    #[test]
    fn thresholds_match_dense_scan(seed in any::<u64>(), gamma_family in any::<bool>()) {
        let reg = registry();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sampler = ProfileSampler::new(&reg, 5, 80.0);
        let (da, db) = (sampler.distribution(&mut rng, 1), sampler.distribution(&mut rng, 1));
        let q = random_quality(&mut rng, &reg);
        let fam = if gamma_family {
            ParametricFamily::new(EvaluatorSpec::PowerPqaly { gamma: 0.5, q }, Some(FreeParameter::Gamma), 0.05, 0.95).unwrap()
        } else {
            let a = HealthStateId::new("a").unwrap();
            ParametricFamily::new(EvaluatorSpec::Qaly { q }, Some(FreeParameter::Q(a)), 0.0, 1.0).unwrap()
        };
        let rep = find_thresholds(&fam, &da, &db, 256, 1e-9).unwrap();
        prop_assert!(rep.crossings.windows(2).all(|w| w[0] < w[1]));
        let (lo, hi) = fam.range();
        prop_assert!(rep.crossings.iter().all(|c| (lo..=hi).contains(c)));
        for c in &rep.crossings {
            let spec = fam.spec_at(*c).unwrap();
            let diff = spec.evaluate(&da).unwrap() - spec.evaluate(&db).unwrap();
            let scale = da.total_lifetime() + db.total_lifetime();
            prop_assert!(diff.abs() <= 1e-6 * scale.max(1.0), "difference {} at {}", diff, c);
        }
        // Every strict sign change on a dense scan lies near a reported crossing.
        let n = 4096;
        let f = |t: f64| { let s = fam.spec_at(t).unwrap(); s.evaluate(&da).unwrap() - s.evaluate(&db).unwrap() };
        let step = (hi - lo) / n as f64;
        for k in 0..n {
            let (t0, t1) = (lo + step * k as f64, lo + step * (k + 1) as f64);
            if f(t0) * f(t1.min(hi)) < 0.0 && f(t0).abs() > 1e-9 && f(t1.min(hi)).abs() > 1e-9 {
                prop_assert!(rep.crossings.iter().any(|c| *c >= t0 - 1e-9 && *c <= t1 + 1e-9), "no crossing in [{}, {}]", t0, t1);
            }
        }
    }
}

#[test]
fn witnesses_replay_and_runs_are_deterministic() {
    let cfg = CheckConfig {
        trials: 500,
        ..CheckConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for fam in FamilyId::ALL {
        let spec = random_spec(&mut rng, fam, &cfg.registry, cfg.t_max).unwrap();
        for axiom in AxiomId::ALL {
            let v = check_axiom(&spec, axiom, &cfg).unwrap();
            assert_eq!(v, check_axiom(&spec, axiom, &cfg).unwrap());
            if let Some(w) = v.witness() {
                assert!(w.replay(&spec, cfg.tolerance).unwrap(), "{fam} {axiom}");
            }
        }
    }
}

#[test]
fn single_state_registry_makes_hi_vacuous() {
    let reg = HealthRegistry::from_labels("a*", &[]).unwrap();
    let cfg = CheckConfig {
        trials: 200,
        registry: reg.clone(),
        ..CheckConfig::default()
    };
    let spec = EvaluatorSpec::Qaly {
        q: QualityWeights::uniform(&reg, 0.5).unwrap(),
    };
    assert!(check_axiom(&spec, AxiomId::Hi, &cfg).unwrap().passed());
}

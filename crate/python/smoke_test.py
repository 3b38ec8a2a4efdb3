"""Smoke test for the lifeyears Python extension.

Build and install first:  pip install --no-build-isolation ./crates/py
"""

import math
import time

import lifeyears as ly


def qaly_paly(sigma, q):
    return {
        "family": "qaly_paly",
        "params": {
            "sigma": sigma,
            "q": {"full_health": "a*", "weights": {"a*": 1.0, "a": q}},
        },
    }


def pqaly(q):
    return {
        "family": "pqaly",
        "params": {"q": {"full_health": "a*", "weights": {"a*": 1.0, "a": q}}},
    }


def main():
    delta, lam = ly.example1()
    assert len(delta) == len(lam) == 5

    linear = ly.Spec({"family": "linear_paly", "params": {}})
    assert linear.family == "linear_paly"
    assert linear.evaluate(delta) == 65.0
    assert linear.evaluate(lam) == 105.0
    assert linear.compare(delta, lam) == "second"
    assert sum(linear.contributions(lam)) == 105.0

    # E^pq(d_lambda) = 40 + 65q
    for q in (0.0, 0.3, 1.0):
        assert abs(ly.evaluate(pqaly(q), lam) - (40 + 65 * q)) < 1e-9

    spec = ly.Spec(qaly_paly(0.5, 0.4))
    assert abs(spec.hpye("a", 1.0, 10.0) - 10 * (0.5 * 0.4 + 0.5)) < 1e-12

    t0 = time.perf_counter()
    report = ly.find_thresholds(pqaly(0.5), "q:a", delta, lam)
    assert abs(report["crossings"][0] - 5 / 13) < 1e-9, report
    for q in (0.0, 0.4, 0.8):
        r = ly.find_thresholds(qaly_paly(0.5, q), "sigma", delta, lam)
        assert abs(r["crossings"][0] - 4 / (13 - 9 * q)) < 1e-9, r
    assert time.perf_counter() - t0 < 1.0

    verdict = ly.check_axiom(linear, "TIUP", trials=500)
    assert verdict["result"]["status"] == "pass", verdict
    verdict = ly.check_axiom(ly.Spec(qaly_paly(0.5, 0.5)), "TIUP", trials=2000)
    assert verdict["result"]["status"] == "fail", verdict
    conf = ly.conformance_report(pqaly(0.5), trials=500)
    assert conf["defects"] == [] and len(conf["rows"]) == 17

    # Indifference at 8000 people in state a means q(a) = 1000 / 8000.
    s = ly.Session.quality("a", 1000.0, 64000.0)
    assert abs(s.question()["current_value"] - 8000.0) < 1e-9
    s.answer("indifferent")
    assert not s.active
    assert abs(s.estimate()["value"] - 0.125) < 1e-12

    s = ly.Session.sigma(0.5, 0.01, 2.0)
    while s.active:
        y = s.question()["current_value"]
        # Truth sigma = 4/7 with q = 0.5 is indifferent at y = 0.8.
        s.answer("prefer_a" if y < 0.8 else "prefer_b")
    assert abs(s.estimate()["value"] - 4 / 7) <= 2e-3 * 4 / 7

    batch = ly.simulate_batch(qaly_paly(4 / 7, 0.5), k=20)
    assert math.isclose(batch["sigma"]["median"], 4 / 7, rel_tol=2e-3)
    assert math.isclose(batch["quality"]["median"], 0.5, rel_tol=2e-3)

    try:
        ly.Spec({"family": "qaly_paly", "params": {"sigma": 2.0}})
    except ValueError:
        pass
    else:
        raise AssertionError("invalid spec accepted")

    print("python smoke test: ok")


if __name__ == "__main__":
    main()

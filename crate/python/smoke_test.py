"""Smoke test for the prrr extension module.

Build and install it first:

    pip install maturin
    pip install --no-build-isolation -e crates/py

then run `python python/smoke_test.py` (or `pytest python/smoke_test.py`).
"""

from fractions import Fraction

import prrr


def test_contract_rewards():
    rows = [
        ([10.0, 8.0], "standard", 8.0, {"0": 2.0}),
        ([10.0], "succinct", 2.0, {"0": 8.0}),
        ([10.0, 8.0, 2.0], "deviation", 0.0, {"0": 8.0}),
        ([8.0, 10.0], "deviation", 0.0, {"0": 6.0}),
        ([10.0, 2.0], "deviation", 0.0, {"0": 8.0}),
    ]
    for values, case, validator, winner in rows:
        ledger = prrr.process_values(values, r_min=2.0)
        assert ledger["case"] == case, (values, ledger)
        assert ledger["validator_reward"] == validator, (values, ledger)
        for p, r in winner.items():
            assert ledger["publisher_rewards"][p] == r, (values, ledger)
    assert prrr.process_values([None, None])["case"] == "rejected"


def test_random_values():
    log = prrr.RandomValueSpec.logarithmic(1.0, 2.0)
    assert log.check_properties()["holds"]
    # The gap between the two largest of n exponentials is exponential.
    for n in (2, 5, 10):
        assert abs(log.rallpub(n) - 1.0) < 1e-12
        mc = log.monte_carlo(n, trials=50_000, seed=1)["rallpub"]
        assert abs(mc["mean"] - 1.0) < 4 * mc["std_err"], mc
    weak = prrr.RandomValueSpec.logarithmic(0.4, 2.0).check_properties()
    assert not weak["skipping_resistance"]["holds"]
    assert weak["skipping_resistance"]["witness"] == 1
    try:
        prrr.RandomValueSpec.logarithmic(-1.0, 2.0)
    except ValueError:
        pass
    else:
        raise AssertionError("negative lambda accepted")


def test_simulation():
    game = prrr.Game(prrr.RandomValueSpec.logarithmic(1.0, 2.0))
    assert game.total_reports == 4 and game.window == 3
    honest = game.simulate(trials=4000, seed=3)
    for p in ("0", "1"):
        est = honest["publishers"][p]
        assert abs(est["mean"] - 0.5) < 4 * est["std_err"], est
    bribed = game.simulate({"p1": "bribe-to-skip:amount=2.5"}, trials=4000, seed=3)
    assert bribed["publishers"]["1"]["mean"] < honest["publishers"]["1"]["mean"]
    epoch = game.play({"p0": "withhold:keep=0"}, trial=2)
    assert all(0 not in s["reformulated"] and 1 not in s["reformulated"] for s in epoch["steps"])
    assert game.play(trial=5) == game.play(trial=5)
    for bad in ({"p1": "steal"}, {"p9": "honest"}):
        try:
            game.simulate(bad, trials=10)
        except ValueError:
            pass
        else:
            raise AssertionError(f"{bad} accepted")


def test_incentive_checks():
    spec = prrr.RandomValueSpec.logarithmic(1.0, 2.0)
    game = prrr.Game(spec, publishers=[2, 2], t_total=2)
    report = game.verify_spne(trials=3000)
    assert report["verdict"]["verdict"] == "no_profitable_deviation", report["best"]
    assert len(report["deviations"]) > 100
    assert game.collusion(trials=2000)["holds"]
    assert all(p["holds"] for p in game.stability(trials=1000))
    sybil = prrr.Game(spec, publishers=[4, 2], t_total=2).sybil(0, [2, 2], trials=2000)
    assert sybil["holds"] and sybil["honest_traces_equal"]
    try:
        prrr.Game(spec, publishers=[3, 3, 1]).verify_spne(trials=10)
    except ValueError as e:
        assert "search budget" in str(e)
    else:
        raise AssertionError("over-budget instance accepted")


def test_impossibility():
    r = prrr.impossibility_demo(n=2, r_fix=10.0, v=1.0, strings=1)
    assert r["matches_prediction"]
    assert Fraction(r["outcome"]["expected_gain"]) == Fraction(20, 3)
    r = prrr.impossibility_demo(n=3, strings=4, seed=2)
    assert Fraction(r["outcome"]["expected_gain"]) == Fraction(10, 3) / 4
    try:
        prrr.impossibility_demo(capacity=0)
    except ValueError:
        pass
    else:
        raise AssertionError("zero capacity accepted")


if __name__ == "__main__":
    for name, fn in list(globals().items()):
        if name.startswith("test_") and callable(fn):
            fn()
            print(f"ok  {name}")
    print("smoke test passed")

import json
import math

import numpy as np
import pytest

from sigscope.experiments import (
    SCHEMA_VERSION,
    ConfigError,
    ExperimentConfig,
    run_conjecture,
    run_experiment,
    run_hurst_recovery,
    run_moment_identity,
    run_qv_recovery,
    worker_count,
)


def small(experiment, **kw):
    return ExperimentConfig(experiment=experiment, **kw)


class TestConfig:
    def test_defaults(self):
        cfg = small("moment-identity").resolved()
        assert (cfg.dim, cfg.depth, cfg.norm) == (2, 6, "l2")

    @pytest.mark.parametrize(
        "kw",
        [
            dict(trials=0),
            dict(steps=0),
            dict(depth=1),
            dict(dim=0),
            dict(norm="linf"),
            dict(window=(1, 3)),
            dict(window=(2, 99)),
            dict(t=-1.0),
        ],
    )
    def test_invalid(self, kw):
        with pytest.raises(ConfigError):
            small("moment-identity", **kw).resolved()

    def test_unknown(self):
        with pytest.raises(ConfigError):
            small("nope").resolved()
        with pytest.raises(ConfigError):
            run_experiment(small("nope"))

    def test_worker_count(self, monkeypatch):
        monkeypatch.setenv("SIGSCOPE_THREADS", "3")
        assert worker_count() == 3
        monkeypatch.setenv("SIGSCOPE_THREADS", "x")
        with pytest.raises(ConfigError):
            worker_count()

    def test_budget_enforced(self):
        from sigscope.tensor_algebra import MemoryBudgetError

        with pytest.raises(MemoryBudgetError):
            run_moment_identity(small("moment-identity", dim=10, depth=9, trials=1, steps=2))


class TestReports:
    def test_moment_identity_small(self):
        rep = run_moment_identity(small("moment-identity", trials=200, steps=500, depth=4, seed=1))
        assert rep.schema_version == SCHEMA_VERSION
        assert len(rep.trials) == 200 and all(c["provenance"] == "DERIVED" for c in rep.checks)
        # aggregates recompute from the rows
        for agg in rep.aggregates["levels"]:
            n = agg["level"]
            vals = np.array([r["per_level"][n - 1]["sq_norm"] for r in rep.trials])
            assert agg["mean"] == pytest.approx(vals.mean(), rel=1e-12)
            assert agg["stderr"] == pytest.approx(vals.std(ddof=1) / math.sqrt(vals.size), rel=1e-12)
            assert agg["target"] == pytest.approx(2**n / math.factorial(n))

    def test_moment_identity_needs_l2(self):
        with pytest.raises(ConfigError):
            run_moment_identity(small("moment-identity", norm="l1", trials=2, steps=10))

    def test_thread_count_does_not_change_rows(self, monkeypatch):
        cfg = small("moment-identity", trials=300, steps=20000, depth=3, seed=5)
        monkeypatch.setenv("SIGSCOPE_THREADS", "1")
        a = run_moment_identity(cfg).to_json()
        monkeypatch.setenv("SIGSCOPE_THREADS", "4")
        b = run_moment_identity(cfg).to_json()
        assert a == b

    def test_qv_recovery(self):
        rep = run_qv_recovery(small("qv-recovery", trials=100, qv=2.5, seed=3))
        assert rep.passed
        kept = [r["estimate"] for r in rep.trials if not r["degenerate"]]
        assert rep.aggregates["mean_estimate"] == pytest.approx(np.mean(kept), rel=1e-12)

    def test_qv_path_mode(self):
        rep = run_qv_recovery(small("qv-recovery", mode="path", trials=8, steps=2000, depth=8, qv=1.0))
        assert all("realized_qv" in r for r in rep.trials)
        assert rep.aggregates["window"] == [4, 8]

    def test_qv_validation(self):
        with pytest.raises(ConfigError):
            run_qv_recovery(small("qv-recovery", dim=2, trials=1))
        with pytest.raises(ConfigError):
            run_qv_recovery(small("qv-recovery", mode="bogus", trials=1))

    def test_hurst_recovery(self):
        rep = run_hurst_recovery(small("hurst-recovery", trials=60, seed=2))
        assert rep.passed
        assert rep.aggregates["mean_hurst"] == pytest.approx(np.mean([r["hurst"] for r in rep.trials]), rel=1e-12)
        assert {c["provenance"] for c in rep.checks} == {"PAPER", "DERIVED"}

    def test_hurst_validation(self):
        with pytest.raises(ConfigError):
            run_hurst_recovery(small("hurst-recovery", hurst=0.3, trials=1))
        with pytest.raises(ConfigError):
            run_hurst_recovery(small("hurst-recovery", t=1.0, trials=1))

    def test_conjecture_small(self):
        rep = run_conjecture(small("conjecture", trials=6, steps=300, depth=6))
        gating = {c["name"]: c for c in rep.checks if c["gating"]}
        info = [c for c in rep.checks if not c["gating"]]
        assert all(name.startswith("kappa bracket") for name in gating)
        assert info and all(c["provenance"] == "CONJECTURE" for c in info)
        assert len(rep.trials[0]["results"]) == 4

    def test_conjecture_validation(self):
        with pytest.raises(ConfigError):
            run_conjecture(small("conjecture", dim=1, trials=1))
        with pytest.raises(ConfigError):
            run_conjecture(small("conjecture", matrices=[[[1, 0], [0, 0]]], trials=1, steps=10))
        with pytest.raises(ConfigError):
            run_conjecture(small("conjecture", matrices=[[[1.0]]], trials=1, steps=10))

    def test_json_and_csv(self):
        rep = run_qv_recovery(small("qv-recovery", trials=5, depth=20))
        data = json.loads(rep.to_json())
        assert set(data) == {"schema_version", "config", "trials", "aggregates", "checks", "notes"}
        lines = rep.to_csv().splitlines()
        assert len(lines) == 1 + 5 * 11
        assert lines[0].startswith("trial,")

    def test_nan_serialised_as_null(self):
        rep = run_moment_identity(small("moment-identity", trials=1, steps=10, depth=2))
        data = json.loads(rep.to_json())
        assert data["aggregates"]["levels"][0]["stderr"] is None

    def test_reproducible(self):
        cfg = small("hurst-recovery", trials=10, seed=11)
        assert run_hurst_recovery(cfg).to_json() == run_hurst_recovery(cfg).to_json()

"""Exit criteria, one test each; every test prints a PASS/FAIL line."""

import csv
import json
import math
import time
from contextlib import contextmanager

import numpy as np
import pytest
from scipy import stats

from stressfreq.budget import FIELDS, solve
from stressfreq.categories import REFERENCE_FITS
from stressfreq.cli import run
from stressfreq.errors import FatigueOutOfDomain, InfeasibleBudget
from stressfreq.estimator import SaturationFit, evaluate, fit_exponential, weekly
from stressfreq.events import RatedEvent, emit
from stressfreq.simulator import SimulationConfig, fatigue_scale, sample_candidates
from stressfreq.synth import SynthSpec, generate, grid_fit, oracle_curve

K = np.arange(1, 37, dtype=float)
SEED = 42


@pytest.fixture
def verdict(capsys):
    @contextmanager
    def check(number, title):
        try:
            yield
        except BaseException:
            with capsys.disabled():
                print(f"\nACCEPTANCE {number} FAIL  {title}")
            raise
        with capsys.disabled():
            print(f"\nACCEPTANCE {number} PASS  {title}")

    return check


def read_report(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def check_shape(fit):
    ks = np.arange(0, 37, dtype=float)
    y = evaluate(fit, ks)
    gains = np.diff(y)
    assert evaluate(fit, 0.0) == 0.0
    assert (gains > 0).all()
    assert (np.diff(gains) < 0).all()
    assert evaluate(fit, 1000.0) >= fit.S - 1e-9


@pytest.fixture(scope="module")
def pipeline_runs(tmp_path_factory):
    root = tmp_path_factory.mktemp("accept")
    out = []
    for name in ("first", "second"):
        t0 = time.perf_counter()
        status = run(["pipeline", "--synth-default", "--seed", str(SEED), "--out-dir", str(root / name)])
        out.append((root / name, status, time.perf_counter() - t0))
    return out


def test_1_reference_table_weekly_arithmetic(verdict):
    with verdict(1, "weekly = 7 x S for all 13 reference rows within 0.005"):
        assert len(REFERENCE_FITS) == 13
        for row in REFERENCE_FITS:
            fit = SaturationFit(row.label, row.S, row.a, 0.0, 36, True)
            assert abs(weekly(fit).weekly_model - row.weekly) <= 0.005, row.label


def test_2_budget_round_trip(verdict):
    with verdict(2, "1000 random budgets: hide-and-resolve to 1e-12; infeasible rejected; < 1 s"):
        rng = np.random.default_rng(2024)
        t0 = time.perf_counter()
        for _ in range(1000):
            rho = rng.uniform(1e-3, 1.0)
            eta = rng.uniform(0.1, 20.0)
            omega = rng.uniform(0.5, 24.0)
            alpha = rng.uniform(1e-2, 1.0)
            full = dict(rho=rho, eta=eta, omega=omega, alpha=alpha, k=rho * alpha * eta * omega)
            for hidden in FIELDS:
                known = {f: v for f, v in full.items() if f != hidden}
                got = getattr(solve(hidden, **known), hidden)
                assert abs(got - full[hidden]) <= 1e-12 * abs(full[hidden])
            # k/alpha beyond eta*omega
            k_bad = alpha * eta * omega * rng.uniform(1.001, 3.0)
            with pytest.raises(InfeasibleBudget):
                solve("rho", k=k_bad, eta=eta, omega=omega, alpha=alpha)
        assert time.perf_counter() - t0 < 1.0


def test_3_fit_recovery(verdict):
    with verdict(3, "noiseless reference curves recovered to 1e-6 and match grid oracle; < 5 s"):
        t0 = time.perf_counter()
        for row in REFERENCE_FITS:
            y = row.S * (1 - np.exp(-row.a * K))
            fit = fit_exponential(np.c_[K, y], category=row.label)
            assert fit.converged
            assert abs(fit.S / row.S - 1) <= 1e-6 and abs(fit.a / row.a - 1) <= 1e-6, row.label
            S_g, a_g, identified = grid_fit(
                K, y, S_range=(0.5 * row.S, 2 * row.S), a_range=(0.25 * row.a, 4 * row.a), resolution=1e-3
            )
            assert identified
            assert abs(fit.S / S_g - 1) <= 1e-3 and abs(fit.a / a_g - 1) <= 1e-3, row.label
        assert time.perf_counter() - t0 < 5.0


def test_4_fatigue_identity(verdict):
    with verdict(4, "fatigue(3.89) == 1, fatigue(10) = 0.8687 +- 5e-5, out of domain past 50.43"):
        assert fatigue_scale(3.89) == 1.0
        assert abs(fatigue_scale(10) - 0.8687) <= 5e-5
        for k in (50.43, 51, 60):
            with pytest.raises(FatigueOutOfDomain):
                fatigue_scale(k)
        assert fatigue_scale(50.42) > 0


def test_5_debiased_bucket_uniformity(verdict, default_cohort):
    with verdict(5, "100,000 bucket draws pass chi-square uniformity at 0.001"):
        bucket, _ = sample_candidates(default_cohort[0], 100_000, seed=SEED)
        counts = np.bincount(bucket, minlength=20)
        assert len(counts) == 20
        assert stats.chisquare(counts).pvalue > 0.001


def test_6_end_to_end_oracle_recovery(verdict, pipeline_runs):
    with verdict(6, "default synthetic pipeline: S within 5%, a within 10% of oracle; deterministic; <= 60 s"):
        (first, s1, t1), (second, s2, _) = pipeline_runs
        assert s1 == 0 and s2 == 0
        assert t1 <= 60.0
        for name in ("events.csv", "points.csv", "report.csv", "report.json"):
            assert (first / name).read_bytes() == (second / name).read_bytes(), name
        pooled = read_report(first / "report.csv")[-1]
        assert pooled["category"] == "All Stressors"
        oracle = oracle_curve(SynthSpec(seed=SEED), SimulationConfig())
        assert oracle.identified
        assert abs(float(pooled["S"]) / oracle.S_true - 1) <= 0.05
        assert abs(float(pooled["a"]) / oracle.a_true - 1) <= 0.10


def test_7_model_shape(verdict, pipeline_runs):
    with verdict(7, "converged fits: y(0)=0, increasing, shrinking gains, y(1000) >= S - 1e-9"):
        fits = [fit_exponential(np.c_[K, r.S * (1 - np.exp(-r.a * K))]) for r in REFERENCE_FITS]
        doc = json.loads((pipeline_runs[0][0] / "report.json").read_text())
        fits += [
            SaturationFit(r["category"], r["S"], r["a"], r["rmse"], r["n_points"], r["converged"])
            for r in doc["rows"]
        ]
        converged = [f for f in fits if f.converged]
        assert len(converged) >= 13
        for fit in converged:
            check_shape(fit)


def test_8_supplied_event_table(verdict, tmp_path):
    with verdict(8, "supplied event table runs end to end into a complete 13-row report"):
        events = generate(SynthSpec(seed=7))
        # unanswered prompts and events outside the day window, as in field data
        events += [RatedEvent("P001", 300.0 + i, float(i), i % 2 == 0) for i in range(10)]
        events += [RatedEvent("P002", 1300.0, 0.5, False)]
        table = tmp_path / "field.csv"
        emit(events, table)
        out = tmp_path / "run"
        assert run(["pipeline", "--input", str(table), "--out-dir", str(out)]) == 0
        rows = read_report(out / "report.csv")
        assert len(rows) == 13
        assert all(r["S"] and r["note"] == "" for r in rows)
        assert (out / "manifest.json").exists()

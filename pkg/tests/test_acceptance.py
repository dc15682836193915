"""Acceptance criteria, one test per criterion.

Each check returns ``(ok, detail)``; the test records the detail as a user
property so ``conftest.py`` can print one PASS/FAIL line per criterion at the
end of the session. Running this file as a script prints the same lines
without pytest:

    python3 tests/test_acceptance.py
"""

import math
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.special import gammaln

from autorank_lora import alpha, restart_layer, signal_indices, threshold
from autorank_lora.analysis import SphereExperiment, sphere_ratio_experiment
from autorank_lora.cli import main
from autorank_lora.config import load_config
from autorank_lora.experiment import run_sweep
from autorank_lora.spectral import SignalSplit
from autorank_lora.trainer import train
from autorank_lora.tasks import task_from_descriptor

pytestmark = pytest.mark.acceptance

ROOT = Path(__file__).resolve().parents[1]
DEFAULT_CONFIG = ROOT / "configs" / "default.cfg"
SEEDS = tuple(range(10))


# -- oracles -----------------------------------------------------------------

def brute_signal(d, p):
    """Plain-loop cumulative energy rule, written independently of the
    vectorised version."""
    energies = [float(x) * float(x) for x in d]
    total = 0.0
    for e in energies:
        total += e
    if p == 1.0:
        return set(range(len(d)))
    keep = set()
    running = 0.0
    for i, e in enumerate(energies):
        running += e
        if running < p * total:
            keep.add(i)
    return keep or {0}


def chi_ratio_prediction(R, lam):
    # sqrt(2) * Gamma((R+1)/2) / Gamma(R/2) is the mean of a chi variable
    return math.sqrt(1.0 / (R * lam)) * math.sqrt(2.0) * math.exp(gammaln((R + 1) / 2) - gammaln(R / 2))


# -- checks ------------------------------------------------------------------

def sweep_medians(out_dir):
    """Run the default 10-seed sweep; returns (medians by mode, seconds)."""
    cfg = load_config(str(DEFAULT_CONFIG))
    start = time.perf_counter()
    rows, _ = run_sweep(cfg, SEEDS, out_dir=str(out_dir))
    elapsed = time.perf_counter() - start
    medians = {}
    for seed, mode, ev, rank, rec, *_ in rows:
        if seed == "median":
            medians[mode] = dict(final_eval=float(ev), final_I=float(rank), recovery_error=float(rec))
    return medians, elapsed


def check_rank_recovery(medians, elapsed):
    med_i = medians["ac_lora"]["final_I"]
    # both the whole sweep (20 runs) and the AC-LoRA half must fit the budget
    ok = 3 <= med_i <= 5 and elapsed < 120
    return ok, f"median final I = {med_i:g} (want [3, 5]); sweep took {elapsed:.1f}s (< 120s)"


def check_overfitting(medians):
    ac, base = medians["ac_lora"], medians["fixed_rank_baseline"]
    ok_eval = ac["final_eval"] <= base["final_eval"]
    ok_rec = ac["recovery_error"] <= base["recovery_error"]
    return ok_eval and ok_rec, (
        f"eval {ac['final_eval']:.4g} <= {base['final_eval']:.4g}: {ok_eval}; "
        f"recovery {ac['recovery_error']:.4g} <= {base['recovery_error']:.4g}: {ok_rec}"
    )


def check_restart_identity():
    gen = np.random.default_rng(101)
    worst_err = worst_sigma = 0.0
    for _ in range(100):
        m, n = gen.integers(1, 65, size=2)
        mat = gen.standard_normal((m, n)) * gen.uniform(0.01, 100.0)
        split = signal_indices(np.linalg.svd(mat, compute_uv=False), 1.0)
        out, sigma = restart_layer(mat, split, gen)
        worst_err = max(worst_err, np.linalg.norm(out - mat) / np.linalg.norm(mat))
        worst_sigma = max(worst_sigma, sigma)
    ok = worst_err <= 1e-7 and worst_sigma <= 1e-8
    return ok, f"max rel err {worst_err:.2e} (<= 1e-7), max sigma {worst_sigma:.2e} (<= 1e-8)"


def check_variance_matching():
    hits = 0
    for seed in range(200):
        gen = np.random.default_rng([seed, 4])
        mat = gen.standard_normal((64, 64))
        u, s, vt = np.linalg.svd(mat)
        signal = (u[:, :32] * s[:32]) @ vt[:32]
        out, sigma = restart_layer(mat, SignalSplit(retained=32, size=64, threshold=float("nan")), gen)
        if abs(np.std(out - signal) - sigma) <= 0.1 * sigma:
            hits += 1
    return hits >= 190, f"{hits}/200 runs within 10% of sigma (need >= 190)"


def check_threshold_oracle():
    gen = np.random.default_rng(55)
    ps = (0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95, 0.99, 0.999, 1.0)
    mismatches = 0
    for i in range(1000):
        n = int(gen.integers(1, 65))
        kind = i % 4
        if kind == 0:
            d = gen.exponential(1.0, n)
        elif kind == 1:
            d = np.where(gen.random(n) < 0.3, 0.0, gen.uniform(0, 5, n))
        elif kind == 2:
            d = np.full(n, gen.uniform(0.1, 3.0))  # ties
        else:
            d = np.linalg.svd(gen.standard_normal((n, n)), compute_uv=False)
        d = np.sort(d)[::-1]
        for p in ps:
            if set(signal_indices(d, p).signal) != brute_signal(d, p):
                mismatches += 1
    return mismatches == 0, f"{mismatches} mismatches over 1000 spectra x 10 p"


def check_schedule():
    errs = [abs(alpha(0, 100) - 1.0), abs(alpha(100, 100) - 2.0), abs(threshold(0.25, 1.5) - 0.875)]
    for total in (1, 3, 10, 100, 1000):
        errs += [abs(alpha(e + 1, total) - alpha(e, total) - 1 / total) for e in range(total)]
    worst = max(errs)
    return worst <= 1e-15, f"max deviation {worst:.1e} (<= 1e-15)"


def check_sphere():
    start = time.perf_counter()
    dims, lams = (4, 16, 64), (16, 64, 256)
    med = np.empty((3, 3))
    center_mean = None
    for i, R in enumerate(dims):
        for j, lam in enumerate(lams):
            s = sphere_ratio_experiment(SphereExperiment(R, lam, 2000, seed=0))
            med[i, j] = s.median
            if (R, lam) == (16, 64):
                center_mean = s.mean
    elapsed = time.perf_counter() - start
    pred = chi_ratio_prediction(16, 64)
    ok_mean = abs(center_mean - pred) <= 0.1 * pred
    ok_lam = bool(np.all(np.diff(med, axis=1) < 0))
    ok_r = bool(np.all(np.diff(med, axis=0) < 0))
    ok_time = elapsed < 30
    detail = (
        f"mean {center_mean:.5f} vs predicted {pred:.5f}: {ok_mean}; "
        f"decreasing in lambda: {ok_lam}; decreasing in R: {ok_r} "
        f"(medians by R: {np.round(med, 4).tolist()}); {elapsed:.1f}s"
    )
    return ok_mean and ok_lam and ok_r and ok_time, detail


def check_determinism(out_dir):
    out = Path(out_dir) / "run"
    names = ("summary.json", "epochs.csv", "restarts.csv", "spectrum.csv", "adapters.json")
    snapshots = []
    for _ in range(2):
        if main(["run", str(DEFAULT_CONFIG), "--out", str(out), "--seed", "7", "--quiet"]) != 0:
            return False, "run exited non-zero"
        snapshots.append({n: (out / n).read_bytes() for n in names})
        for n in names:
            (out / n).unlink()
    differ = [n for n in names if snapshots[0][n] != snapshots[1][n]]
    return not differ, f"differing files: {differ or 'none'}"


def check_restart_count():
    cfg = load_config(str(DEFAULT_CONFIG))
    rec = train(task_from_descriptor(cfg.task), cfg.train)
    n = len(rec.reports)
    return n == 9, f"{n} restart events at epochs {rec.restart_epochs}"


# -- pytest wiring -----------------------------------------------------------

@pytest.fixture(scope="module")
def sweep(tmp_path_factory):
    return sweep_medians(tmp_path_factory.mktemp("sweep"))


def _report(record_property, label, result):
    ok, detail = result
    record_property("acceptance", f"{label}: {detail}")
    assert ok, detail


def test_c1_rank_recovery(sweep, record_property):
    _report(record_property, "1 rank recovery", check_rank_recovery(*sweep))


def test_c2_overfitting_mitigation(sweep, record_property):
    _report(record_property, "2 overfitting mitigation", check_overfitting(sweep[0]))


def test_c3_restart_identity(record_property):
    _report(record_property, "3 restart identity", check_restart_identity())


def test_c4_variance_matching(record_property):
    _report(record_property, "4 variance matching", check_variance_matching())


def test_c5_threshold_oracle(record_property):
    _report(record_property, "5 threshold-set oracle", check_threshold_oracle())


def test_c6_schedule_exactness(record_property):
    _report(record_property, "6 schedule exactness", check_schedule())


def test_c7_sphere_monte_carlo(record_property):
    _report(record_property, "7 sphere Monte Carlo", check_sphere())


def test_c8_determinism(tmp_path, record_property):
    _report(record_property, "8 determinism", check_determinism(tmp_path))


def test_c9_restart_count(record_property):
    _report(record_property, "9 restart bookkeeping", check_restart_count())


if __name__ == "__main__":
    with tempfile.TemporaryDirectory() as tmp:
        medians, elapsed = sweep_medians(Path(tmp) / "sweep")
        checks = [
            ("1 rank recovery", lambda: check_rank_recovery(medians, elapsed)),
            ("2 overfitting mitigation", lambda: check_overfitting(medians)),
            ("3 restart identity", check_restart_identity),
            ("4 variance matching", check_variance_matching),
            ("5 threshold-set oracle", check_threshold_oracle),
            ("6 schedule exactness", check_schedule),
            ("7 sphere Monte Carlo", check_sphere),
            ("8 determinism", lambda: check_determinism(tmp)),
            ("9 restart bookkeeping", check_restart_count),
        ]
        failed = 0
        for label, fn in checks:
            ok, detail = fn()
            failed += not ok
            print(f"{'PASS' if ok else 'FAIL'}  criterion {label}: {detail}")
    sys.exit(1 if failed else 0)

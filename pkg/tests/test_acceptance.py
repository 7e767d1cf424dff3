"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line (shown in the terminal summary) before
asserting, so a failing criterion still reports its measured numbers.
"""

import csv
import io
import json
import statistics

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, neumann_values
from mcmi import (IdentityFeatures, MlModel, discounted_split, estimate_row, exact_value,
                  ls_mcmi_evaluate, lstd_evaluate, mcmi_evaluate, mcmi_variance_pred, ml_value,
                  neumann_reference, random_mrp, rel_residual_error, run_walks, sample_stream,
                  td_lambda, make_mrp)
from mcmi.bench import ExperimentConfig, run_single, run_sweep
from mcmi.cli import main
from mcmi.rng import RngStream

pytestmark = pytest.mark.acceptance

SEEDS = 20


def record(number, title, ok, detail):
    ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] {number:>2}. {title}: {detail}")
    assert ok, detail


def mean_errors(records, key):
    groups = {}
    for r in records:
        groups.setdefault(key(r), []).append(r.rel_error)
    return {k: statistics.fmean(v) for k, v in groups.items()}


def fixed_five_state():
    return random_mrp(5, seed=RngStream(2024), gamma=0.8)


def test_c01_oracle_correctness():
    worst_res = worst_gap = 0.0
    ok = True
    for k in range(50):
        n = (5, 50, 300)[k % 3]
        gamma = (0.5, 0.8, 0.9)[(k // 3) % 3]
        deg = None if k % 2 else max(1, n // 10)
        m = random_mrp(n, deg, seed=RngStream(k), gamma=gamma)
        v = exact_value(m).values
        P, r = m.transitions.to_dense(), m.rewards.mean
        res = np.max(np.abs(v - gamma * P @ v - r))
        K = 400
        bound = gamma ** (K + 1) * np.max(np.abs(r)) / (1 - gamma)
        gap = np.max(np.abs(v - neumann_values(P, r, gamma, K)))
        worst_res, worst_gap = max(worst_res, res), max(worst_gap, gap)
        ok &= res <= 1e-9 and gap <= bound + 1e-12
    record(1, "oracle residual and truncated-series agreement", ok,
           f"50 MRPs, max residual {worst_res:.2e} (<= 1e-9), max series gap {worst_gap:.2e}")


def test_c02_walk_length_law():
    m = fixed_five_state()
    lengths = run_walks(discounted_split(m), np.zeros(10**6, int), RngStream(1)).length
    mean, var = lengths.mean(), lengths.var(ddof=1)
    ok = abs(mean - 4.0) <= 0.02 * 4.0 and abs(var - 20.0) <= 0.05 * 20.0
    record(2, "geometric walk length at gamma 0.8", ok,
           f"mean {mean:.4f} (4 +/- 2%), variance {var:.3f} (20 +/- 5%)")


def test_c03_inverse_unbiased():
    m = fixed_five_state()
    split = discounted_split(m)
    ref = neumann_reference(split.target())
    W = 10**6
    worst = 0.0
    for i in range(5):
        row = estimate_row(split, i, W, RngStream(100 + i))
        se = np.sqrt([mcmi_variance_pred(x, 0.8) / W for x in ref[i]])
        worst = max(worst, np.max(np.abs(row - ref[i]) / se))
    record(3, "MCMI inverse entries unbiased", worst < 4,
           f"largest deviation {worst:.2f} standard errors (< 4)")


def test_c04_variance_formula():
    m = fixed_five_state()
    split = discounted_split(m)
    ref = neumann_reference(split.target())
    W = 10**6
    worst_rel, worst_abs = 0.0, 0.0
    for i in range(5):
        b = run_walks(split, np.full(W, i), RngStream(200 + i))
        for j in range(5):
            x = np.where(b.terminal == j, b.weight, 0.0)
            emp, pred = x.var(ddof=1), mcmi_variance_pred(ref[i, j], 0.8)
            worst_rel = max(worst_rel, abs(emp - pred) / pred)
            worst_abs = max(worst_abs, emp)
    ok = worst_rel <= 0.05 and worst_abs <= 6.25
    record(4, "per-entry walk variance", ok,
           f"max relative gap {worst_rel:.4f} (<= 0.05), max variance {worst_abs:.3f} (<= 6.25)")


def test_c05_row_sum_identity():
    worst = 0.0
    for seed in range(40):
        gamma = (0.5, 0.8, 0.9)[seed % 3]
        m = random_mrp(3 + seed % 20, seed=RngStream(seed), gamma=gamma)
        for walks in (1, 7, 5000):
            row = estimate_row(discounted_split(m), seed % m.n, walks, RngStream(seed * 31 + walks))
            worst = max(worst, abs(row.sum() - 1 / (1 - gamma)))
    record(5, "row sums equal 1/(1-gamma)", worst <= 1e-12, f"max deviation {worst:.2e} (<= 1e-12)")


def test_c06_error_vs_steps_and_gamma():
    by_t = mean_errors(run_sweep(ExperimentConfig(estimator="mcmi", n=300, repetitions=SEEDS,
                                                  sweep=("steps", [2000, 20000]))),
                       lambda r: r.t_steps)
    by_g = mean_errors(run_sweep(ExperimentConfig(estimator="mcmi", n=300, steps=20000,
                                                  repetitions=SEEDS,
                                                  sweep=("gamma", [0.5, 0.8, 0.9]))),
                       lambda r: r.gamma)
    ok = by_t[20000] < by_t[2000] and by_g[0.5] < by_g[0.8] < by_g[0.9]
    record(6, "MCMI error falls with T and rises with gamma", ok,
           f"T 2000/20000: {by_t[2000]:.4f}/{by_t[20000]:.4f}; "
           f"gamma .5/.8/.9: {by_g[0.5]:.4f}/{by_g[0.8]:.4f}/{by_g[0.9]:.4f}")


def test_c07_estimator_ordering():
    cfg = ExperimentConfig(estimator=("mcmi", "ml", "td"), n=300, steps=20000, gamma=0.8,
                           lam=0.9, alpha=0.5, repetitions=SEEDS)
    err = mean_errors(run_sweep(cfg), lambda r: r.estimator)
    ratio = err["mcmi"] / err["ml"]
    ok = err["mcmi"] < err["td"] and err["ml"] < err["td"] and ratio <= 2.0
    record(7, "MCMI < TD, ML < TD, MCMI within 2x of ML", ok,
           f"mcmi {err['mcmi']:.4f}, ml {err['ml']:.4f}, td {err['td']:.4f}; "
           f"mcmi/ml = {ratio:.2f} (<= 2)")


def test_c08_runtime_vs_states():
    ratios = {}
    for est in ("td", "mcmi", "ml"):
        run_single(ExperimentConfig(estimator=est, n=100, steps=20000), 999)  # warm-up
        med = {}
        for n in (100, 200, 400, 800):
            cfg = ExperimentConfig(estimator=est, n=n, steps=20000, repetitions=1)
            med[n] = statistics.median(run_single(cfg, r).wall_ms for r in range(3))
        ratios[est] = med[800] / med[100]
    ok = (ratios["td"] <= 12 and ratios["mcmi"] <= 12
          and ratios["ml"] > max(ratios["td"], ratios["mcmi"]))
    record(8, "runtime growth over N = 100..800", ok,
           ", ".join(f"{k} x{v:.2f}" for k, v in ratios.items())
           + " (td, mcmi <= 12; ml above both)")


def test_c09_runtime_flat_on_procedural():
    spreads = {}
    for est in ("lstd", "lsmcmi"):
        cfgs = {N: ExperimentConfig(estimator=est, source="procedural", n=N, m=100,
                                    features="gaussian:100", steps=20000)
                for N in (10**3, 10**4, 10**5)}
        run_single(cfgs[10**3], 999)  # warm-up
        times = {N: [] for N in cfgs}
        for r in range(5):
            for N, c in cfgs.items():
                times[N].append(run_single(c, r).wall_ms)
        med = [statistics.median(v) for v in times.values()]
        spreads[est] = max(med) / min(med) - 1
    ok = all(s < 0.25 for s in spreads.values())
    record(9, "LSTD / LS-MCMI time flat in nominal N", ok,
           ", ".join(f"{k} spread {v:.1%}" for k, v in spreads.items()) + " (< 25%)")


def test_c10_identity_equivalences():
    bitwise, worst = True, 0.0
    for seed in range(10):
        m = random_mrp(20, seed=RngStream(seed))
        vv = mcmi_evaluate(m, total_steps=5000, rng=RngStream(seed))
        res = ls_mcmi_evaluate(m, IdentityFeatures(20), None, 5000, RngStream(seed))
        idx = res.visited.as_array()
        bitwise &= np.array_equal(res.weights.w[idx], vv.values[idx])
        s = sample_stream(m, "single_random_walk", 5000, RngStream(seed))
        _, value_of = lstd_evaluate(s, IdentityFeatures(20), 0.8, 0.0)
        ml = ml_value(MlModel(20).update_many(s), 0.8).values
        worst = max(worst, np.max(np.abs(value_of(np.arange(20)) - ml)))
    record(10, "identity-feature equivalences", bitwise and worst <= 1e-8,
           f"LS-MCMI == MCMI bitwise: {bitwise}; max |LSTD - ML| {worst:.2e} (<= 1e-8)")


def test_c11_ml_consistency_and_td_convergence():
    mrp = random_mrp(10, seed=RngStream(77))
    truth = exact_value(mrp)
    errs = {}
    for T in (10**3, 10**4, 10**5):
        errs[T] = statistics.fmean(
            rel_residual_error(ml_value(MlModel(10).update_many(
                sample_stream(mrp, "single_random_walk", T, RngStream(s))), 0.8), truth)
            for s in range(SEEDS))
    one = make_mrp([[1.0]], [1.0], 0.8)
    s = sample_stream(one, "single_random_walk", 10**5, RngStream(0))
    v = td_lambda(s, 1, 0.8, 0.9, "harmonic").values[0]
    ok = errs[10**3] > errs[10**4] > errs[10**5] and abs(v - 5.0) < 0.05
    record(11, "ML error falls with T; harmonic TD reaches 5.0", ok,
           "ML " + "/".join(f"{e:.4f}" for e in errs.values())
           + f"; TD {v:.4f} (|v - 5| < 0.05)")


def _csv_without_wall(path):
    rows = list(csv.reader(io.StringIO(path.read_text())))
    col = rows[0].index("wall_ms")
    return [r[:col] + r[col + 1:] for r in rows]


def test_c12_determinism(tmp_path):
    mrp = tmp_path / "m.json"
    assert main(["gen", "--n", "30", "--seed", "5", "--out", str(mrp)]) == 0
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"estimator": ["td", "ml", "mcmi", "lstd", "lsmcmi"], "n": 25,
                               "steps": 800, "repetitions": 3, "features": "gaussian:4",
                               "sweep": {"param": "gamma", "values": [0.5, 0.9]}}))
    invocations = [
        ["eval", "--estimator", "mcmi", "--mrp", str(mrp), "--steps", "1000", "--reps", "3"],
        ["eval", "--estimator", "lstd", "--procedural", "100000,40,4", "--steps", "2000",
         "--reps", "2"],
        ["bench", "--config", str(cfg)],
    ]
    same = True
    for k, argv in enumerate(invocations):
        a, b = tmp_path / f"a{k}.csv", tmp_path / f"b{k}.csv"
        assert main(argv + ["--out", str(a)]) == 0 and main(argv + ["--out", str(b)]) == 0
        same &= _csv_without_wall(a) == _csv_without_wall(b)
    record(12, "repeated eval/bench runs give identical CSV", same,
           f"{len(invocations)} invocations compared apart from wall_ms")

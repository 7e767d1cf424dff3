import csv
import json

import numpy as np
import pytest

from mcmi import save_mrp, random_mrp
from mcmi.bench import (CSV_COLUMNS, ExperimentConfig, ExperimentError, emit_csv, run_single,
                        run_sweep, summarize)
from mcmi.rng import RngStream
from mcmi.exceptions import ValidationError


def small(**kw):
    base = dict(estimator="mcmi", n=20, steps=500, repetitions=3)
    base.update(kw)
    return ExperimentConfig(**base)


def test_record_fields():
    rec = run_single(small(), 0)
    assert rec.rel_error >= 0 and rec.wall_ms > 0
    assert rec.walks_completed > 0 and rec.mean_walk_length >= 0
    assert rec.lam is None and rec.alpha is None and rec.k is None


def test_reproducible_from_seed_column():
    a = run_sweep(small(base_seed=10))
    b = run_single(small(base_seed=0), 12)
    assert a[2].seed == 12 == b.seed
    assert a[2].rel_error == b.rel_error


def test_sweep_record_count_and_pairing():
    cfg = small(estimator=("td", "mcmi"), sweep=("T", [200, 400]), repetitions=4)
    recs = run_sweep(cfg)
    assert len(recs) == 2 * 2 * 4
    seeds = {(r.estimator, r.t_steps): [x.seed for x in recs
                                        if (x.estimator, x.t_steps) == (r.estimator, r.t_steps)]
             for r in recs}
    assert len({tuple(v) for v in seeds.values()}) == 1


def test_order_independence():
    cfg = small(estimator=("ml", "mcmi"), repetitions=3)
    fwd = run_sweep(cfg)
    rev = run_sweep(cfg, order=list(range(6))[::-1])
    assert [r.rel_error for r in fwd] == [r.rel_error for r in rev]


def test_invalid_sweep_params():
    with pytest.raises(ValidationError):
        small(estimator="mcmi", sweep=("lambda", [0.1]))
    with pytest.raises(ValidationError):
        small(sweep=("bogus", [1]))
    with pytest.raises(ValidationError):
        small(repetitions=0)
    with pytest.raises(ValidationError):
        ExperimentConfig.from_dict({"estimator": "td", "colour": 1})


def test_error_carries_config():
    with pytest.raises(ExperimentError, match=r"estimator=lstd .*seed=0"):
        run_single(small(estimator="lstd", steps=3), 0)


def test_csv_layout(tmp_path):
    recs = run_sweep(small(estimator=("td", "lsmcmi"), features="gaussian:3", repetitions=2))
    out = tmp_path / "r.csv"
    emit_csv(recs, out)
    raw = out.read_bytes()
    assert b"\r" not in raw
    rows = list(csv.reader(raw.decode().splitlines()))
    assert tuple(rows[0]) == CSV_COLUMNS
    td, ls = rows[1], rows[3]
    assert td[4] == "0.90000000000000002" and td[5] == "0.5" and td[6] == ""
    assert ls[4] == "" and ls[6] == "3"
    for r in rows[1:]:
        assert float(r[9]) == float(repr(float(r[9])))


def test_file_source(tmp_path):
    p = tmp_path / "m.json"
    save_mrp(random_mrp(10, seed=RngStream(1), gamma=0.7), p)
    rec = run_single(ExperimentConfig(estimator="ml", source="file", mrp_path=str(p), gamma=None,
                                      steps=300), 0)
    assert rec.gamma == 0.7 and rec.n == 10


def test_procedural_has_no_error():
    rec = run_single(ExperimentConfig(estimator="lsmcmi", source="procedural", n=10**6, m=50,
                                      features="gaussian:10", steps=2000), 0)
    assert rec.rel_error is None and rec.m <= 50


def test_summarize():
    recs = run_sweep(small(repetitions=4))
    s = summarize(recs)
    assert len(s) == 1 and s[0]["repetitions"] == 4
    assert s[0]["rel_error"] == pytest.approx(np.mean([r.rel_error for r in recs]))


def test_load_config(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"estimator": ["td"], "lambda": 0.3, "n": 10,
                             "sweep": {"param": "alpha", "values": [0.1, 0.2]}}))
    cfg = ExperimentConfig.load(p)
    assert cfg.lam == 0.3 and cfg.sweep == ("alpha", (0.1, 0.2))

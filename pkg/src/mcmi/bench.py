"""Experiment harness: configs, single runs, sweeps and CSV output.

Repetition ``r`` of a config with ``base_seed`` b runs on seed b + r:
the MRP (when generated), the sampling stream and any random features all
derive from that seed, so every estimator sees the same draws for the
same repetition, and the ``seed`` column alone reproduces a row.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import os
import statistics
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exceptions import SingularSystemError, ValidationError
from .features import IdentityFeatures, parse_features
from .least_squares import ls_mcmi_evaluate, lstd_evaluate
from .ml import MlModel, ml_value
from .montecarlo import mcmi_walk_estimates
from .mrp import DESK_LIMIT, exact_value, load_mrp, random_mrp, rel_residual_error
from .procedural import ProceduralMrp
from .rng import RngStream
from .sampling import default_strategy, sample_stream
from .td import td_lambda

ESTIMATORS = ("td", "ml", "mcmi", "lstd", "lsmcmi")
SOURCES = ("random", "file", "procedural")
CSV_COLUMNS = ("estimator", "n", "t_steps", "gamma", "lambda", "alpha", "k", "m", "seed",
               "rel_error", "wall_ms", "walks_completed", "mean_walk_length")

# sweepable parameter -> estimators it applies to (None: all)
SWEEP_PARAMS = {
    "steps": None, "gamma": None, "n": None, "out_degree": None, "m": None,
    "lambda": ("td", "lstd"), "alpha": ("td",), "k": ("lstd", "lsmcmi"),
}
_SWEEP_ALIASES = {"T": "steps", "t_steps": "steps"}


class ExperimentError(ValidationError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    estimator: object = "mcmi"          # one name or a tuple of names
    source: str = "random"
    mrp_path: Optional[str] = None
    n: int = 300
    out_degree: Optional[int] = None    # None: dense rows (random) / 5 (procedural)
    m: int = 100
    reward_stddev: float = 0.0
    gamma: Optional[float] = 0.8        # None with a file source: use the file's gamma
    lam: Optional[float] = None         # None: 0.9 for td, 0.0 for lstd
    alpha: object = 0.5
    steps: int = 20000
    features: str = "identity"
    repetitions: int = 20
    base_seed: int = 0
    sweep: Optional[tuple] = None       # (param, values)

    def __post_init__(self):
        est = (self.estimator,) if isinstance(self.estimator, str) else tuple(self.estimator)
        bad = [e for e in est if e not in ESTIMATORS]
        if bad or not est:
            raise ValidationError(f"unknown estimator(s) {bad}; choose from {ESTIMATORS}")
        object.__setattr__(self, "estimator", est[0] if len(est) == 1 else est)
        if self.source not in SOURCES:
            raise ValidationError(f"unknown MRP source {self.source!r}")
        if self.source == "file" and not self.mrp_path:
            raise ValidationError("file source needs mrp_path")
        if self.repetitions < 1:
            raise ValidationError("repetitions must be at least 1")
        if self.steps < 1:
            raise ValidationError("steps must be at least 1")
        if not 0 <= self.base_seed < 2 ** 64:
            raise ValidationError("base_seed must be an unsigned 64-bit integer")
        if self.sweep is not None:
            param, values = self.sweep
            param = _SWEEP_ALIASES.get(param, param)
            if param not in SWEEP_PARAMS:
                raise ValidationError(f"cannot sweep over {param!r}")
            allowed = SWEEP_PARAMS[param]
            if allowed is not None:
                wrong = [e for e in self.estimators if e not in allowed]
                if wrong:
                    raise ValidationError(f"sweep parameter {param!r} does not apply to {wrong}")
            if param == "n" and self.source == "file":
                raise ValidationError("cannot sweep n over a fixed MRP file")
            if param == "m" and self.source != "procedural":
                raise ValidationError("m only applies to procedural MRPs")
            object.__setattr__(self, "sweep", (param, tuple(values)))

    @property
    def estimators(self) -> tuple:
        return (self.estimator,) if isinstance(self.estimator, str) else self.estimator

    def point(self, estimator, **overrides) -> "ExperimentConfig":
        """Single-estimator, sweep-free copy with ``overrides`` applied."""
        kw = {("lam" if k == "lambda" else k): v for k, v in overrides.items()}
        if "k" in kw:
            kw["features"] = f"gaussian:{int(kw.pop('k'))}"
        return dataclasses.replace(self, estimator=estimator, sweep=None, **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        if isinstance(d.get("estimator"), list):
            d["estimator"] = tuple(d["estimator"])
        sweep = d.get("sweep")
        if sweep is not None:
            if isinstance(sweep, dict):
                try:
                    sweep = (sweep["param"], sweep["values"])
                except KeyError as exc:
                    raise ValidationError(f"sweep needs {exc}") from None
            d["sweep"] = tuple(sweep)
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValidationError(f"unknown config field(s): {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class ResultRecord:
    estimator: str
    n: int
    t_steps: int
    gamma: float
    lam: Optional[float]
    alpha: object
    k: Optional[int]
    m: Optional[int]
    seed: int
    rel_error: Optional[float]
    wall_ms: float
    walks_completed: Optional[int] = None
    mean_walk_length: Optional[float] = None
    values: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def row(self) -> list:
        cells = [self.estimator, self.n, self.t_steps, self.gamma, self.lam, self.alpha, self.k,
                 self.m, self.seed, self.rel_error, self.wall_ms, self.walks_completed,
                 self.mean_walk_length]
        return [_cell(c) for c in cells]


def _cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


_FILE_CACHE = {}


def _build_sampler(cfg: ExperimentConfig, seed: int):
    if cfg.source == "file":
        st = os.stat(cfg.mrp_path)
        key = (os.path.abspath(cfg.mrp_path), st.st_mtime_ns, st.st_size)
        mrp = _FILE_CACHE.get(key)
        if mrp is None:
            mrp = _FILE_CACHE[key] = load_mrp(cfg.mrp_path)
        return mrp if cfg.gamma is None else mrp.with_gamma(cfg.gamma)
    gamma = 0.8 if cfg.gamma is None else cfg.gamma
    if cfg.source == "procedural":
        return ProceduralMrp(cfg.n, cfg.m, cfg.out_degree or 5, seed=seed, gamma=gamma,
                             reward_stddev=cfg.reward_stddev)
    return random_mrp(cfg.n, cfg.out_degree, seed=RngStream(seed), gamma=gamma,
                      reward_stddev=cfg.reward_stddev)


def run_single(config: ExperimentConfig, repetition_index: int) -> ResultRecord:
    """One repetition of a single-estimator config.

    Only the estimator itself is timed: MRP generation, stream sampling
    for the stream-based estimators and the oracle solve are excluded.
    """
    if len(config.estimators) != 1:
        raise ValidationError("run_single needs exactly one estimator")
    est = config.estimators[0]
    seed = config.base_seed + int(repetition_index)
    try:
        return _run(config, est, seed)
    except (ValidationError, SingularSystemError) as exc:
        raise ExperimentError(f"[estimator={est} n={config.n} steps={config.steps} "
                              f"seed={seed}] {exc}") from exc


def _run(cfg, est, seed):
    rs = RngStream(seed)
    sampler = _build_sampler(cfg, seed)
    gamma = sampler.gamma
    n = sampler.n_states
    lam = cfg.lam if cfg.lam is not None else (0.9 if est == "td" else 0.0)
    features = None
    if est in ("lstd", "lsmcmi"):
        spec = cfg.features
        if spec == "identity" and cfg.source == "procedural":
            raise ValidationError("identity features are not available for procedural MRPs")
        features = IdentityFeatures(n) if spec == "identity" else parse_features(spec, n, seed)
    stream = None
    if est in ("td", "ml", "lstd"):
        stream = sample_stream(sampler, default_strategy(sampler), cfg.steps, rs)

    walks = walk_len = None
    t0 = time.perf_counter_ns()
    if est == "td":
        vv = td_lambda(stream, n, gamma, lam, cfg.alpha)
    elif est == "ml":
        vv = ml_value(MlModel(n).update_many(stream), gamma)
    elif est == "mcmi":
        res = mcmi_walk_estimates(sampler, gamma, cfg.steps, rs)
    elif est == "lstd":
        weights, value_of = lstd_evaluate(stream, features, gamma, lam)
    else:
        res = ls_mcmi_evaluate(sampler, features, gamma, cfg.steps, rs)
    wall_ms = max((time.perf_counter_ns() - t0) / 1e6, 1e-6)

    oracle_sized = cfg.source != "procedural" and n <= DESK_LIMIT
    values = None
    if est in ("td", "ml"):
        values = vv.filled()
        m = int(vv.visited_mask.sum())
    elif est == "lstd":
        m = len(np.unique(stream.states))
        if oracle_sized:
            values = value_of(np.arange(n))
    else:
        walks, walk_len = res.stats.walks, res.stats.mean_walk_length
        m = len(res.visited)
        if est == "mcmi" and oracle_sized:
            values = np.zeros(n)
            values[res.visited.as_array()] = res.estimates
        elif oracle_sized:
            values = features.rows(np.arange(n)) @ res.weights.w
    rel = rel_residual_error(values, exact_value(sampler)) if oracle_sized else None
    return ResultRecord(
        estimator=est, n=n, t_steps=cfg.steps, gamma=gamma,
        lam=lam if est in ("td", "lstd") else None,
        alpha=cfg.alpha if est == "td" else None,
        k=features.k if features is not None else None, m=m, seed=seed,
        rel_error=rel, wall_ms=wall_ms, walks_completed=walks, mean_walk_length=walk_len,
        values=values)


def run_sweep(config: ExperimentConfig, order=None) -> list:
    """All (estimator, sweep value, repetition) runs in that nesting order.

    ``order`` optionally permutes execution; records are always returned
    in the canonical order.
    """
    param, values = config.sweep if config.sweep else (None, (None,))
    points = []
    for est in config.estimators:
        for value in values:
            point = config.point(est, **({param: value} if param else {}))
            for rep in range(config.repetitions):
                points.append((point, rep))
    jobs = range(len(points)) if order is None else order
    if sorted(jobs) != list(range(len(points))):
        raise ValidationError("order must be a permutation of the run indices")
    out = [None] * len(points)
    for j in jobs:
        out[j] = run_single(*points[j])
    return out


def emit_csv(records, path) -> None:
    if not records:
        raise ValidationError("no records to write")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for rec in records:
            writer.writerow(rec.row())


def summarize(records, by=("estimator", "n", "t_steps", "gamma")) -> list:
    """Per-group means of rel_error and wall_ms over repetitions."""
    keyfn = lambda r: tuple(getattr(r, a) for a in by)
    groups = {}
    for rec in records:
        groups.setdefault(keyfn(rec), []).append(rec)
    out = []
    for key, recs in groups.items():
        errs = [r.rel_error for r in recs if r.rel_error is not None]
        out.append(dict(zip(by, key),
                        repetitions=len(recs),
                        rel_error=statistics.fmean(errs) if errs else None,
                        wall_ms=statistics.fmean(r.wall_ms for r in recs)))
    return out

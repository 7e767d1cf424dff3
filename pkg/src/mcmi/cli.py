"""Command-line entry point: ``mcmi {gen,exact,eval,bench,inverse}``.

Exit status: 0 on success, 1 on validation errors, 2 on I/O errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

import numpy as np

from . import bench
from .exceptions import SingularSystemError, ValidationError
from .inverse import default_split, discounted_split, estimate_entry, neumann_reference
from .mrp import dumps, exact_value, load_mrp, mrp_from_dict, random_mrp, save_mrp
from .rng import RngStream

NEUMANN_LIMIT = 500


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _alpha(text):
    return text if text == "harmonic" else float(text)


def _ints(text, count):
    try:
        parts = [int(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected {count} comma-separated integers") from None
    if len(parts) != count:
        raise argparse.ArgumentTypeError(f"expected {count} comma-separated integers")
    return parts


def build_parser():
    p = _Parser(prog="mcmi", description="Policy evaluation by Monte Carlo matrix inversion.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="write a random MRP as JSON")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--out-degree", type=int, default=None, help="successors per state (default: n)")
    g.add_argument("--gamma", type=float, default=0.8)
    g.add_argument("--reward-stddev", type=float, default=0.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)

    e = sub.add_parser("exact", help="write the exact value vector of an MRP")
    e.add_argument("--mrp", required=True)
    e.add_argument("--out", required=True)

    ev = sub.add_parser("eval", help="run one estimator over repetitions")
    ev.add_argument("--estimator", choices=bench.ESTIMATORS, required=True)
    src = ev.add_mutually_exclusive_group(required=True)
    src.add_argument("--mrp", help="MRP JSON file")
    src.add_argument("--procedural", type=lambda t: _ints(t, 3), metavar="N,M,DEG")
    src.add_argument("--random", type=lambda t: _ints(t, 2), metavar="N,DEG")
    ev.add_argument("--gamma", type=float, default=None)
    ev.add_argument("--lambda", dest="lam", type=float, default=None)
    ev.add_argument("--alpha", type=_alpha, default=0.5)
    ev.add_argument("--steps", type=int, default=20000)
    ev.add_argument("--features", default=None, help="identity | gaussian:K | FILE")
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("--reps", type=int, default=20)
    ev.add_argument("--out", required=True)

    b = sub.add_parser("bench", help="run a sweep described by a JSON config")
    b.add_argument("--config", required=True)
    b.add_argument("--out", required=True)
    b.add_argument("--seed", type=int, default=None)
    b.add_argument("--reps", type=int, default=None)
    b.add_argument("--steps", type=int, default=None)
    b.add_argument("--gamma", type=float, default=None)

    inv = sub.add_parser("inverse", help="estimate one entry of (I - M)^-1 by random walks")
    inv.add_argument("--matrix", required=True,
                     help='JSON file: {"matrix": [[...]]} or an MRP document (M = gamma P)')
    inv.add_argument("--entry", type=lambda t: _ints(t, 2), required=True, metavar="I,J")
    inv.add_argument("--walks", type=int, default=100000)
    inv.add_argument("--seed", type=int, default=0)
    inv.add_argument("--tol", type=float, default=1e-12)
    return p


def _cmd_gen(a):
    mrp = random_mrp(a.n, a.out_degree, seed=RngStream(a.seed), gamma=a.gamma,
                     reward_stddev=a.reward_stddev)
    save_mrp(mrp, a.out)


def _cmd_exact(a):
    v = exact_value(load_mrp(a.mrp))
    with open(a.out, "w", newline="\n") as fh:
        fh.write(dumps({"n": len(v), "values": v.values.tolist()}))


def _eval_config(a):
    kw = dict(estimator=a.estimator, gamma=a.gamma, lam=a.lam, alpha=a.alpha, steps=a.steps,
              repetitions=a.reps, base_seed=a.seed)
    if a.mrp:
        kw.update(source="file", mrp_path=a.mrp)
    elif a.procedural:
        n, m, deg = a.procedural
        kw.update(source="procedural", n=n, m=m, out_degree=deg)
        if kw["gamma"] is None:
            kw["gamma"] = 0.8
    else:
        n, deg = a.random
        kw.update(source="random", n=n, out_degree=deg)
        if kw["gamma"] is None:
            kw["gamma"] = 0.8
    if a.features is not None:
        kw["features"] = a.features
    elif a.procedural and a.estimator in ("lstd", "lsmcmi"):
        kw["features"] = f"gaussian:{min(100, a.procedural[1])}"
    return bench.ExperimentConfig(**kw)


def _cmd_eval(a):
    cfg = _eval_config(a)
    bench.emit_csv(bench.run_sweep(cfg), a.out)


def _cmd_bench(a):
    cfg = bench.ExperimentConfig.load(a.config)
    over = {k: v for k, v in (("base_seed", a.seed), ("repetitions", a.reps),
                              ("steps", a.steps), ("gamma", a.gamma)) if v is not None}
    if over:
        cfg = dataclasses.replace(cfg, **over)
    bench.emit_csv(bench.run_sweep(cfg), a.out)


def _cmd_inverse(a):
    with open(a.matrix) as fh:
        doc = json.load(fh)
    if isinstance(doc, dict) and "matrix" in doc:
        M = np.asarray(doc["matrix"], dtype=np.float64)
        split = default_split(M)
    elif isinstance(doc, list):
        M = np.asarray(doc, dtype=np.float64)
        split = default_split(M)
    else:
        mrp = mrp_from_dict(doc)
        split = discounted_split(mrp)
        M = split.target()
    i, j = a.entry
    if not (0 <= i < split.n and 0 <= j < split.n):
        raise ValidationError(f"entry ({i}, {j}) outside a {split.n} x {split.n} matrix")
    est, se = estimate_entry(split, i, j, a.walks, RngStream(a.seed), return_std=True)
    print(f"estimate {est:.17g}")
    print(f"stderr {se:.17g}")
    if split.n <= NEUMANN_LIMIT:
        print(f"neumann {neumann_reference(M, a.tol)[i, j]:.17g}")


COMMANDS = {"gen": _cmd_gen, "exact": _cmd_exact, "eval": _cmd_eval, "bench": _cmd_bench,
            "inverse": _cmd_inverse}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        COMMANDS[args.command](args)
    except json.JSONDecodeError as exc:
        print(f"mcmi: malformed JSON: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"mcmi: {exc}", file=sys.stderr)
        return 2
    except (ValidationError, SingularSystemError, IndexError, TypeError) as exc:
        print(f"mcmi: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: ``leanols <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DomainError, InvalidDataError
from .maxnorm import MAX_DRAWS, sampled_max_upper
from .model_space import count_up_to_k, enumerate_up_to_k, load_json, model_at
from .posi_boot import METHODS, posi_analysis
from .regress_core import Dataset, fit_model, load_csv
from .sandwich import fit_report
from .simlab.designs import DesignSpec, make_design
from .simlab.experiment import SimConfig, SimulationError, run_experiment
from .simlab.rates import rate_scan, write_rates_csv
from .simlab.report import report_csv

log = logging.getLogger("leanols")


def _methods(text: str) -> tuple[int, ...]:
    if text == "all":
        return METHODS
    try:
        out = tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad method list {text!r}") from None
    if not out or any(m not in METHODS for m in out):
        raise argparse.ArgumentTypeError(f"methods must be drawn from {METHODS}")
    return out


def _grid(text: str) -> list[tuple[int, int, int]]:
    """``n:d:s`` triples separated by commas; each field may be ``a|b|c``."""
    out = []
    for item in text.split(","):
        parts = item.strip().split(":")
        if len(parts) != 3:
            raise argparse.ArgumentTypeError(f"grid item {item!r} is not n:d:s")
        try:
            axes = [[int(v) for v in p.split("|")] for p in parts]
        except ValueError:
            raise argparse.ArgumentTypeError(f"grid item {item!r} is not numeric") from None
        out.extend((n, d, s) for n in axes[0] for d in axes[1] for s in axes[2])
    return out


def _emit(obj, out: str | None) -> None:
    text = json.dumps(obj, indent=2)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def cmd_simulate(args) -> int:
    cfg = SimConfig(
        design=DesignSpec(args.design, args.d, args.n),
        k_max=args.k,
        alpha=args.alpha,
        sigma_noise=args.sigma,
        replications=args.reps,
        b_boot=args.b,
        seed=args.seed,
        methods=args.methods,
        oracle_variance=args.oracle_variance,
        fixed_beta0=args.fixed_beta0,
    )
    report = run_experiment(cfg, workers=args.workers, keep_replicates=False)
    report_csv(report, args.out)
    for method, cov in zip(report.methods, report.total_coverage):
        print(f"method {method}: total coverage {cov:.3f}")
    return 0


def cmd_designs(args) -> int:
    x = make_design(DesignSpec(args.kind, args.d, args.n), args.seed)
    np.savetxt(args.out, x, delimiter=",", header=",".join(f"x{j + 1}" for j in range(args.d)),
               comments="", fmt="%.17g")
    return 0


def cmd_rate_scan(args) -> int:
    rows = rate_scan(args.kinds.split(","), args.grid, args.trials, seed=args.seed, mode=args.mode)
    write_rates_csv(rows, args.out)
    return 0


def cmd_fit(args) -> int:
    _emit(fit_report(load_csv(args.data), args.alpha, b=args.b, seed=args.seed), args.out)
    return 0


def _collection(spec: str, d: int):
    if spec.startswith("up-to-"):
        return enumerate_up_to_k(d, int(spec[len("up-to-"):]))
    return load_json(d, spec)


def cmd_posi(args) -> int:
    data = load_csv(args.data)
    coll = _collection(args.collection, data.d)
    summary, records = posi_analysis(data, coll, args.alpha, args.b, args.seed, args.method)
    _emit({"alpha": args.alpha, "b": args.b, "seed": args.seed, "k": summary.k.tolist(),
           "mad_fallback": summary.mad_fallback, "records": records}, args.out)
    return 0


def _values_csv(path: str) -> np.ndarray:
    vals = np.loadtxt(path, delimiter=",", ndmin=1, comments="#")
    return np.asarray(vals, dtype=np.float64).reshape(-1)


def _posi_evaluator(data: Dataset, d: int, k: int, seed: int):
    """``w(j) = T_M`` of the ``j``-th model under one multiplier draw, bounded by ``|g|``.

    Values are cached, so repeated indices cost one fit.
    """
    g = np.random.default_rng(seed).standard_normal(data.n)
    cache: dict[int, float] = {}

    def one(j: int) -> float:
        fit = fit_model(data, model_at(d, k, j))
        xm = data.x[:, fit.model.cols]
        psi = np.linalg.solve(np.atleast_2d(fit.sigma_hat_m), xm.T).T * fit.residuals[:, None]
        norm = np.linalg.norm(psi, axis=0)
        t = np.divide(np.abs(g @ psi), norm, out=np.zeros_like(norm), where=norm > 0)
        return float(t.max())

    def w(idx: np.ndarray) -> np.ndarray:
        uniq, inv = np.unique(idx, return_inverse=True)
        vals = np.array([cache[j] if j in cache else cache.setdefault(j, one(j)) for j in uniq.tolist()])
        return vals[inv]

    return w, float(np.linalg.norm(g))


def cmd_maxnorm(args) -> int:
    if args.values:
        vals = _values_csv(args.values)
        m = vals.size if args.m is None else args.m
        if m != vals.size:
            raise InvalidDataError(f"--m {m} does not match {vals.size} values")
        bound = float(vals.max()) if args.bound is None else args.bound
        est = sampled_max_upper(lambda idx: vals[idx], m, args.eps, args.delta, bound, seed=args.seed,
                                max_draws=args.max_draws)
        extra = {"true_max": float(vals.max())}
    else:
        if args.data is None or args.k is None:
            raise DomainError("give --values, or --data with --k")
        data = load_csv(args.data)
        m = count_up_to_k(data.d, args.k)
        w, bound = _posi_evaluator(data, data.d, args.k, args.seed)
        if args.bound is not None:
            bound = args.bound
        est = sampled_max_upper(w, m, args.eps, args.delta, bound, seed=args.seed, max_draws=args.max_draws)
        extra = {"models": m}
    _emit({"point": est.point, "upper": est.upper, "q": est.q, "k": est.k, "eps": est.eps,
           "delta": est.delta, "margin": est.margin, "bound": bound, **extra}, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="leanols", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="coverage experiment over a fixed design")
    s.add_argument("--design", required=True)
    s.add_argument("--d", type=int, default=10)
    s.add_argument("--n", type=int, default=100)
    s.add_argument("--k", type=int, default=5)
    s.add_argument("--alpha", type=float, default=0.05)
    s.add_argument("--reps", type=int, default=300)
    s.add_argument("--b", type=int, default=200)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--methods", type=_methods, default=METHODS)
    s.add_argument("--sigma", type=float, default=1.0)
    s.add_argument("--oracle-variance", action="store_true")
    s.add_argument("--fixed-beta0", action="store_true")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("designs", help="write a fixed design matrix")
    s.add_argument("--kind", required=True)
    s.add_argument("--d", type=int, required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_designs)

    s = sub.add_parser("rate-scan", help="normalised Gram discrepancy over a grid")
    s.add_argument("--grid", type=_grid, default=_grid("200|400|800:12:1|2|3"),
                   help="comma-separated n:d:s items; fields accept a|b|c")
    s.add_argument("--kinds", default="orthogonal")
    s.add_argument("--trials", type=int, default=50)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--mode", choices=("random", "fixed"), default="random")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_rate_scan)

    s = sub.add_parser("fit", help="full-model fit with sandwich regions")
    s.add_argument("--data", required=True)
    s.add_argument("--alpha", type=float, default=0.05)
    s.add_argument("--b", type=int, default=200)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("posi", help="post-selection regions over a model collection")
    s.add_argument("--data", required=True)
    s.add_argument("--collection", required=True, help="JSON file or text, or up-to-K")
    s.add_argument("--alpha", type=float, default=0.05)
    s.add_argument("--b", type=int, default=200)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--method", type=_methods, default=METHODS, help="0, 1, 2, 3 or all")
    s.add_argument("--out")
    s.set_defaults(func=cmd_posi)

    s = sub.add_parser("maxnorm", help="sampled upper bound for a maximum")
    s.add_argument("--m", type=int)
    s.add_argument("--eps", type=float, default=0.5)
    s.add_argument("--delta", type=float, default=0.05)
    s.add_argument("--bound", type=float)
    s.add_argument("--values", help="CSV of non-negative values")
    s.add_argument("--data", help="dataset CSV for the max-t evaluator")
    s.add_argument("--k", type=int, help="largest model size for the evaluator")
    s.add_argument("--max-draws", type=int, default=MAX_DRAWS)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_maxnorm)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, ArithmeticError, OSError, np.linalg.LinAlgError, SimulationError) as exc:
        print(f"leanols {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

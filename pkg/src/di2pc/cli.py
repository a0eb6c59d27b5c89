"""Command-line interface.

One binary, subcommand style, machine-readable output. Every subcommand is a
thin adapter over the library; numbers printed here equal direct library
calls exactly.

Exit codes: 0 success, 2 usage or input error, 3 verification failure,
4 dimension-cap error. Errors go to stderr as one-line JSON
{"error": kind, "detail": ...}.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys

from . import bounds as bounds_mod
from .adversary import (
    breidbart,
    StoreSubset,
    exact_win_probability,
    strategy_from_obj,
    verify_key_lemma,
    verify_norm_lemma,
    verify_overlap_lemma,
)
from .chsh import TSIRELSON, estimate_chsh, zeta_from_violation
from .config import PROFILES
from .errors import CapExceededError, Di2pcError, DimensionCapError
from .jordan import block_probabilities, decompose_pair, epsilon_plus_blocks
from .matcore import child_seed
from .protocols import DeviceModel, PvConfig, run_pv, run_wse

_EXIT_OK = 0
_EXIT_USAGE = 2
_EXIT_VERIFY = 3
_EXIT_CAP = 4


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage errors match the JSON error contract."""

    def error(self, message):
        print(json.dumps({"error": "usage", "detail": message}), file=sys.stderr)
        raise SystemExit(_EXIT_USAGE)


def _emit(payload, args, csv_rows=None, csv_header=None) -> None:
    """Write JSON (stable key order) or CSV (fixed column order) to --out."""
    if getattr(args, "format", "json") == "csv" and csv_rows is not None:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(csv_header)
        for row in csv_rows:
            writer.writerow(row)
        text = buf.getvalue()
    else:
        text = json.dumps(payload, sort_keys=True) + "\n"
    out = getattr(args, "out", None)
    if out and out != "-":
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load_device(path: str) -> DeviceModel:
    try:
        with open(path) as fh:
            return DeviceModel.from_obj(json.load(fh))
    except FileNotFoundError as exc:
        raise _UsageError(f"device file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise _UsageError(f"device file is not valid JSON: {exc}") from exc


def _zeta_arg(args) -> float:
    if (args.S is None) == (args.zeta is None):
        raise _UsageError("provide exactly one of --S or --zeta")
    if args.zeta is not None:
        if not 0.0 <= args.zeta <= 1.0:
            raise _UsageError(f"--zeta must lie in [0, 1], got {args.zeta}")
        return args.zeta
    if args.S > TSIRELSON + 1e-9:
        raise _UsageError(f"--S exceeds the quantum maximum {TSIRELSON:.6f}")
    return zeta_from_violation(args.S)


def _cmd_bound(args) -> int:
    zeta = _zeta_arg(args)
    report = bounds_mod.bound_report(n=args.n, d=args.d, zeta=zeta,
                                     gamma=args.gamma, kind=args.kind)
    d = report.to_dict()
    _emit(d, args, csv_rows=[[d[k] for k in sorted(d)]], csv_header=sorted(d))
    return _EXIT_OK


def _cmd_region(args) -> int:
    if args.s_steps < 2 or args.gamma_steps < 2:
        raise _UsageError("--s-steps and --gamma-steps must be at least 2")
    s_grid = [2.0 + (TSIRELSON - 2.0) * i / (args.s_steps - 1)
              for i in range(args.s_steps)]
    g_grid = [0.5 * j / (args.gamma_steps - 1) for j in range(args.gamma_steps)]
    region = bounds_mod.security_region(s_grid, g_grid)
    rows = [[r["S"], r["gamma"], r["zeta"], r["secure"], r["gamma_star"]]
            for r in region.rows()]
    payload = {"rows": [dict(zip(("S", "gamma", "zeta", "secure", "gamma_star"), r))
                        for r in rows]}
    if args.format == "json":
        _emit(payload, args)
    else:
        _emit(payload, args, csv_rows=rows,
              csv_header=["S", "gamma", "zeta", "secure", "gamma_star"])
    return _EXIT_OK


def _cmd_min_n(args) -> int:
    zeta = _zeta_arg(args)
    result = bounds_mod.min_rounds(args.d, zeta, args.gamma, args.eps)
    if result == bounds_mod.INSECURE:
        _emit({"insecure": True}, args)
    else:
        _emit({"n": result}, args)
    return _EXIT_OK


def _cmd_curve(args) -> int:
    if args.s_steps < 2:
        raise _UsageError("--s-steps must be at least 2")
    rows = []
    for i in range(args.s_steps):
        s = 2.0 + (TSIRELSON - 2.0) * i / (args.s_steps - 1)
        zeta = zeta_from_violation(min(s, TSIRELSON))
        try:
            result = bounds_mod.min_rounds(args.d, zeta, args.gamma, args.eps)
        except CapExceededError:
            result = ""
        secure = result != bounds_mod.INSECURE and result != ""
        rows.append([s, zeta, secure, result if secure else ""])
    payload = {"rows": [dict(zip(("S", "zeta", "secure", "n"), r)) for r in rows]}
    if args.format == "json":
        _emit(payload, args)
    else:
        _emit(payload, args, csv_rows=rows, csv_header=["S", "zeta", "secure", "n"])
    return _EXIT_OK


def _cmd_chsh(args) -> int:
    device = _load_device(args.device)
    est = estimate_chsh(device, args.rounds, args.delta, seed=args.seed)
    _emit({"s_hat": est.s_hat, "half_width": est.half_width,
           "rounds_per_setting": est.rounds_per_setting,
           "confidence_delta": est.confidence_delta,
           "zeta_conservative": est.zeta_conservative}, args)
    return _EXIT_OK


def _cmd_jordan(args) -> int:
    device = _load_device(args.device)
    tol = PROFILES[args.tol_profile]
    dec = decompose_pair(device.alice_meas_0, device.alice_meas_1, tol)
    probs = block_probabilities(dec, device.sigma_a, tol)
    eps = epsilon_plus_blocks(dec, device.sigma_a, tol)
    _emit({"blocks": [{"dim": b.block_dim, "beta": b.angle_beta, "p": float(p)}
                      for b, p in zip(dec.blocks, probs)],
           "epsilon_plus": eps}, args)
    return _EXIT_OK


def _cmd_simulate(args) -> int:
    device = _load_device(args.device)
    test_rounds = args.test_rounds or None
    if args.what == "wse":
        if args.runs > 1:
            matches = 0
            sizes = 0
            for r in range(args.runs):
                tr = run_wse(device, args.n, seed=child_seed(args.seed, r))
                matches += int((tr.substring == tr.x[tr.index_set]).all())
                sizes += int(tr.index_set.size)
            _emit({"runs": args.runs, "n": args.n,
                   "match_rate": matches / args.runs,
                   "mean_index_fraction": sizes / (args.runs * args.n)}, args)
        else:
            _emit(run_wse(device, args.n, seed=args.seed,
                          test_rounds=test_rounds).to_obj(), args)
    else:
        cfg = PvConfig(pos_v1=args.v1, pos_v2=args.v2, pos_claimed=args.claim,
                       n=args.n, gamma=args.gamma, delta_t=args.dt)
        _emit(run_pv(device, cfg, seed=args.seed,
                     test_rounds=test_rounds).to_obj(), args)
    return _EXIT_OK


def _cmd_attack(args) -> int:
    device = _load_device(args.device)
    if args.strategy == "breidbart":
        strategy = breidbart(args.n)
    elif args.strategy == "store-subset":
        keep = tuple(range(min(args.n, int(math.log2(max(args.d, 1))) or 0)))
        if not keep:
            raise _UsageError("--d leaves no room to store a subset")
        strategy = StoreSubset(keep=keep)
    elif args.strategy.startswith("file:"):
        path = args.strategy[5:]
        try:
            with open(path) as fh:
                strategy = strategy_from_obj(json.load(fh))
        except FileNotFoundError as exc:
            raise _UsageError(f"strategy file not found: {path}") from exc
    else:
        raise _UsageError(f"unknown strategy {args.strategy!r}")
    tol = PROFILES[args.tol_profile]
    res = exact_win_probability(device, strategy, args.n, args.d, args.gamma,
                                tol=tol.dual_gap / 10)
    _emit({"win_prob": res.win_prob, "per_theta": res.per_theta,
           "certified_gap": res.certified_gap, "converged": res.converged}, args)
    return _EXIT_OK


def _cmd_verify(args) -> int:
    reports = []
    which = args.lemma
    if which in ("key-lemma", "all"):
        n = args.n if args.n is not None else 1
        d = args.d if args.d is not None else 1
        reports.append(verify_key_lemma(args.trials, n=n, d=d,
                                        gamma=args.gamma, seed=args.seed,
                                        threads=args.threads))
    if which in ("norm-lemma", "all"):
        reports.append(verify_norm_lemma(args.trials, seed=args.seed,
                                         threads=args.threads))
    if which in ("overlap-lemma", "all"):
        n = args.n if args.n is not None else 2
        d = args.d if args.d is not None else 3
        reports.append(verify_overlap_lemma(args.trials, n=n, d=d,
                                            seed=args.seed,
                                            threads=args.threads))
    payload = {"reports": [r.to_dict() for r in reports],
               "passed": all(r.passed for r in reports)}
    _emit(payload, args)
    return _EXIT_OK if payload["passed"] else _EXIT_VERIFY


def _add_global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    """Global flags, attachable before or after the subcommand.

    The subcommand copies use SUPPRESS defaults so a post-subcommand flag
    overrides a pre-subcommand one without clobbering it otherwise.
    """
    d = argparse.SUPPRESS if suppress else None
    parser.add_argument("--seed", type=int,
                        default=d if suppress else int(os.environ.get("DI2PC_SEED", "0")),
                        help="master seed (env DI2PC_SEED overrides the default)")
    parser.add_argument("--format", choices=("json", "csv"),
                        default=d if suppress else "json")
    parser.add_argument("--out", default=d if suppress else None,
                        help="output path (default stdout)")
    parser.add_argument("--tol-profile", choices=sorted(PROFILES),
                        default=d if suppress else "default")
    parser.add_argument("--threads", type=int, default=d if suppress else 1,
                        help="worker cap for verification sweeps")
    parser.add_argument("--config", default=d if suppress else None,
                        help="JSON file whose keys mirror the flags")


def build_parser(defaults: dict | None = None) -> argparse.ArgumentParser:
    """Construct the CLI parser; ``defaults`` (from --config) override flag
    defaults on the top level and on every subcommand."""
    parser = _Parser(
        prog="di2pc",
        description="CHSH-certified bounded-storage security bounds, "
                    "simulators and verifiers")
    _add_global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)
    all_parsers = [parser]

    def add_parser(name, **kwargs):
        p = sub.add_parser(name, **kwargs)
        _add_global_flags(p, suppress=True)
        all_parsers.append(p)
        return p

    p = add_parser("bound", help="evaluate the security bound at one point")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--S", type=float, default=None)
    p.add_argument("--zeta", type=float, default=None)
    p.add_argument("--gamma", type=float, default=0.0)
    p.add_argument("--kind", choices=("guessing", "wse_ne", "pv"),
                   default="guessing")
    p.set_defaults(func=_cmd_bound)

    p = add_parser("region", help="secure-region table over (S, gamma)")
    p.add_argument("--s-steps", type=int, default=50)
    p.add_argument("--gamma-steps", type=int, default=50)
    p.set_defaults(func=_cmd_region)

    p = add_parser("min-n", help="smallest n reaching a target bound")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--S", type=float, default=None)
    p.add_argument("--zeta", type=float, default=None)
    p.add_argument("--gamma", type=float, default=0.0)
    p.add_argument("--eps", type=float, required=True)
    p.set_defaults(func=_cmd_min_n)

    p = add_parser("curve", help="rounds-vs-violation curve data")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--gamma", type=float, default=0.0)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--s-steps", type=int, default=50)
    p.set_defaults(func=_cmd_curve)

    p = add_parser("chsh", help="sampled CHSH estimate for a device")
    p.add_argument("--device", required=True)
    p.add_argument("--rounds", type=int, required=True)
    p.add_argument("--delta", type=float, default=0.01)
    p.set_defaults(func=_cmd_chsh)

    p = add_parser("jordan", help="block decomposition of a device's pair")
    p.add_argument("--device", required=True)
    p.set_defaults(func=_cmd_jordan)

    p = add_parser("simulate", help="honest protocol runs")
    psub = p.add_subparsers(dest="what", required=True)
    w = psub.add_parser("wse")
    _add_global_flags(w, suppress=True)
    all_parsers.append(w)
    w.add_argument("--device", required=True)
    w.add_argument("--n", type=int, required=True)
    w.add_argument("--runs", type=int, default=1)
    w.add_argument("--test-rounds", type=int, default=0,
                   help="CHSH testing rounds before the run (0 skips)")
    w.set_defaults(func=_cmd_simulate)
    v = psub.add_parser("pv")
    _add_global_flags(v, suppress=True)
    all_parsers.append(v)
    v.add_argument("--device", required=True)
    v.add_argument("--n", type=int, required=True)
    v.add_argument("--gamma", type=float, default=0.0)
    v.add_argument("--v1", type=float, default=0.0)
    v.add_argument("--v2", type=float, default=1.0)
    v.add_argument("--claim", type=float, default=0.5)
    v.add_argument("--dt", type=float, default=1.0)
    v.add_argument("--test-rounds", type=int, default=0,
                   help="CHSH testing rounds before the run (0 skips)")
    v.set_defaults(func=_cmd_simulate)

    p = add_parser("attack", help="exact value of a concrete attack")
    p.add_argument("--device", required=True)
    p.add_argument("--strategy", required=True,
                   help="breidbart | store-subset | file:STRAT.json")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--gamma", type=float, default=0.0)
    p.set_defaults(func=_cmd_attack)

    p = add_parser("verify", help="fuzzed inequality verification suites")
    p.add_argument("lemma", choices=("key-lemma", "norm-lemma",
                                     "overlap-lemma", "all"))
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--gamma", type=float, default=0.0)
    p.set_defaults(func=_cmd_verify)

    # Applied last so argparse patches the already-registered action defaults.
    if defaults:
        for sp in all_parsers:
            sp.set_defaults(**defaults)
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    # --config supplies defaults that explicit flags still override.
    defaults = None
    if "--config" in argv:
        idx = argv.index("--config")
        try:
            with open(argv[idx + 1]) as fh:
                raw = json.load(fh)
            defaults = {k.replace("-", "_"): v for k, v in raw.items()}
        except (IndexError, FileNotFoundError, json.JSONDecodeError) as exc:
            print(json.dumps({"error": "usage", "detail": f"bad --config: {exc}"}),
                  file=sys.stderr)
            return _EXIT_USAGE
    parser = build_parser(defaults)
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(json.dumps({"error": "usage", "detail": str(exc)}), file=sys.stderr)
        return _EXIT_USAGE
    except DimensionCapError as exc:
        print(json.dumps({"error": "dimension-cap", "detail": str(exc)}),
              file=sys.stderr)
        return _EXIT_CAP
    except Di2pcError as exc:
        print(json.dumps({"error": type(exc).__name__, "detail": str(exc)}),
              file=sys.stderr)
        return _EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())

"""Command-line entry point.

Exit codes: 0 success, 1 usage or config error, 2 numerical-contract
violation, 3 dimension-guard refusal.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .angmom import HalfInt, stretched_cg
from .channels import random_dlocal_channel
from .codes import CodeSpec, analyze_generic, inaccuracy_erasure, kl_offdiagonal_check
from .errors import ConfigError, SU2QECError
from .metrology import (explicit_erased_probe_qfi, fidelity_erased_codewords,
                        fidelity_expansion, fidelity_leading_order, measurement_estimate,
                        qfi_erased_probe)
from .sweep import (SweepConfig, fig2_fit, geometric_grid, load_config, run_sweep,
                    write_sweep, rows_to_csv, rows_to_json)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _sites(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad site list {text!r}") from exc


def _half(text: str) -> HalfInt:
    try:
        return HalfInt.of(text)
    except SU2QECError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _emit(record: dict, args) -> None:
    if args.format == "csv":
        flat = {k: v for k, v in record.items() if not isinstance(v, (list, dict))}
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(flat), lineterminator="\n")
        w.writeheader()
        w.writerow(flat)
        text = buf.getvalue()
    else:
        text = json.dumps(record, indent=2, default=str) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _cmd_cg(args) -> dict:
    val = stretched_cg(args.J, args.M, args.j1, args.m1, method=args.method)
    return {"J": str(args.J), "M": str(args.M), "j1": str(args.j1), "m1": str(args.m1),
            "j2": str(args.J - args.j1), "cg": val}


def _cmd_qfi(args) -> dict:
    rep = qfi_erased_probe(args.s, args.N, args.M, args.d)
    out = {"s": str(args.s), "N": args.N, "M": str(args.M), "d": args.d, **rep.as_dict()}
    if args.explicit:
        out["qfi_explicit"] = explicit_erased_probe_qfi(args.s, args.N, args.M, args.d)
    return out


def _cmd_fidelity(args) -> dict:
    f = fidelity_erased_codewords(args.s, args.N, args.M, args.d)
    J, j1 = HalfInt(args.s.twice * args.N), HalfInt(args.s.twice * args.d)
    return {"s": str(args.s), "N": args.N, "M": str(args.M), "d": args.d, "fidelity": f,
            "expansion_reference": fidelity_expansion(J, args.M, j1),
            "leading_order": fidelity_leading_order(J, args.M, j1)}


def _code(args) -> CodeSpec:
    return CodeSpec(args.s, args.N, args.M_min, args.delta, args.count)


def _cmd_kl_check(args) -> dict:
    code = _code(args)
    ch = random_dlocal_channel(args.s, args.sites, args.n_kraus, args.seed)
    return {"code": code.as_dict(), "channel_meta": ch.metadata(),
            "offdiag_residual": kl_offdiagonal_check(code, ch),
            "admissible": code.admissible(ch.d)}


def _cmd_inaccuracy(args) -> dict:
    code = _code(args)
    if args.noise == "erasure":
        return inaccuracy_erasure(code, args.sites, method=args.method).as_dict()
    ch = random_dlocal_channel(args.s, args.sites, args.n_kraus, args.seed)
    return analyze_generic(code, ch).as_dict()


def _cmd_measure(args) -> dict:
    theta = args.theta if args.theta is not None else math.pi / (8 * float(args.M))
    rep = measurement_estimate(args.scheme, args.s, args.N, args.M, args.d, theta, args.nu,
                               seed=args.seed)
    return rep.as_dict()


def _finish_sweep(cfg: SweepConfig, args, fit: bool) -> int:
    rows = run_sweep(cfg)
    out = args.out or cfg.out
    if out:
        write_sweep(rows, cfg, out)
    else:
        sys.stdout.write(rows_to_csv(rows) if cfg.format == "csv" else rows_to_json(rows, cfg))
    if fit:
        usable = [r for r in rows if r.loss_ratio and r.loss_ratio > 0]
        if len(usable) >= 3:
            res = fig2_fit(usable)
            target = 2 * cfg.b + cfg.c - 2
            sys.stderr.write(f"slope {res.slope:.4f} (2b+c-2 = {target:.4f}), "
                             f"r^2 {res.r_squared:.4f}\n")
    return 0


def _cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.format_given:
        overrides["format"] = args.format
    if args.s_given:
        overrides["s"] = args.s
    if overrides:
        cfg = SweepConfig(**{**cfg.__dict__, **overrides})
    return _finish_sweep(cfg, args, fit=cfg.mode == "fig2")


def _cmd_fig2(args) -> int:
    try:
        cfg = SweepConfig(mode="fig2", grid=geometric_grid(args.J_min, args.J_max, args.factor),
                          b=args.b, c=args.c, s=args.s, format=args.format,
                          seed=args.seed or 0, workers=args.workers)
    except SU2QECError as exc:
        raise ConfigError(str(exc)) from exc
    return _finish_sweep(cfg, args, fit=True)


def _fraction(text: str) -> float:
    from fractions import Fraction
    try:
        return float(Fraction(text))
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"bad number {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--s", type=_half, default=HalfInt(1), help='local spin, e.g. "1/2"')
    common.add_argument("--out", help="write output to this path")
    common.add_argument("--format", choices=("csv", "json"), default=None)
    common.add_argument("--seed", type=int, default=None)

    p = _Parser(prog="su2qec", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    q = sub.add_parser("cg", parents=[common], help="stretched Clebsch-Gordan coefficient")
    q.add_argument("--J", type=_half, required=True)
    q.add_argument("--M", type=_half, required=True)
    q.add_argument("--j1", type=_half, required=True)
    q.add_argument("--m1", type=_half, required=True)
    q.add_argument("--method", choices=("auto", "exact", "log"), default="auto")
    q.set_defaults(func=_cmd_cg)

    for name, func, helptext in (("qfi", _cmd_qfi, "QFI of an erased probe"),
                                 ("fidelity", _cmd_fidelity, "erased-codeword fidelity")):
        q = sub.add_parser(name, parents=[common], help=helptext)
        q.add_argument("--N", type=int, required=True)
        q.add_argument("--M", type=_half, required=True)
        q.add_argument("--d", type=int, default=1)
        if name == "qfi":
            q.add_argument("--explicit", action="store_true",
                           help="also evaluate the SLD formula on explicit vectors")
        q.set_defaults(func=func)

    for name, func, helptext in (("kl-check", _cmd_kl_check, "off-diagonal residual"),
                                 ("inaccuracy", _cmd_inaccuracy, "inaccuracy estimate")):
        q = sub.add_parser(name, parents=[common], help=helptext)
        q.add_argument("--N", type=int, required=True)
        q.add_argument("--M-min", dest="M_min", type=_half, required=True)
        q.add_argument("--delta", type=int, required=True)
        q.add_argument("--count", type=int, default=2)
        q.add_argument("--sites", type=_sites, default=(0,))
        q.add_argument("--n-kraus", dest="n_kraus", type=int, default=4)
        if name == "inaccuracy":
            q.add_argument("--noise", choices=("erasure", "generic"), default="erasure")
            q.add_argument("--method", choices=("auto", "cg", "explicit"), default="auto")
        q.set_defaults(func=func)

    q = sub.add_parser("measure", parents=[common], help="phase estimator statistics")
    q.add_argument("--scheme", choices=("local_D", "global_Dprime", "local_Dbar"),
                   default="local_D")
    q.add_argument("--N", type=int, required=True)
    q.add_argument("--M", type=_half, required=True)
    q.add_argument("--d", type=int, default=0)
    q.add_argument("--theta", type=float, default=None, help="default pi/(8M)")
    q.add_argument("--nu", type=int, default=10_000)
    q.set_defaults(func=_cmd_measure)

    q = sub.add_parser("sweep", parents=[common], help="run a sweep from a config file")
    q.add_argument("config")
    q.set_defaults(func=_cmd_sweep)

    q = sub.add_parser("fig2", parents=[common], help="loss ratio vs J sweep with slope fit")
    q.add_argument("--b", type=_fraction, default=2 / 3)
    q.add_argument("--c", type=_fraction, default=1 / 4)
    q.add_argument("--J-min", dest="J_min", type=int, default=64)
    q.add_argument("--J-max", dest="J_max", type=int, default=8192)
    q.add_argument("--factor", type=float, default=2.0)
    q.add_argument("--workers", type=int, default=1)
    q.set_defaults(func=_cmd_fig2)
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    args.format_given = args.format is not None
    args.s_given = any(a == "--s" or a.startswith("--s=") for a in argv)
    if args.format is None:
        args.format = "csv" if args.command in ("sweep", "fig2") else "json"
    if args.seed is None and args.command in ("kl-check", "inaccuracy"):
        args.seed = 0
    try:
        result = args.func(args)
        if isinstance(result, dict):
            _emit(result, args)
            return 0
        return int(result)
    except SU2QECError as exc:
        sys.stderr.write(f"su2qec: {type(exc).__name__}: {exc}\n")
        return exc.exit_code
    except np.linalg.LinAlgError as exc:
        sys.stderr.write(f"su2qec: linear algebra failure: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Parameter sweeps over J (or N), power-law fits and sweep config files."""
from __future__ import annotations

import configparser
import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from .angmom import HalfInt
from .channels import RNG_ALGORITHM, random_dlocal_channel
from .codes import CodeSpec, inaccuracy_erasure, inaccuracy_generic
from .errors import ConfigError, DomainError, SU2QECError
from .metrology import qfi_erased_probe

log = logging.getLogger(__name__)

MODES = ("fig2", "erasure_eps", "generic_eps")
COLUMNS = ("J", "N", "M", "d", "j1", "qfi_ideal", "qfi_erased", "loss_ratio", "epsilon_hat")


@dataclass(frozen=True)
class SweepConfig:
    """Sweep description.

    In ``fig2`` mode the grid lists J values, M ~ J^b and j1 ~ J^c. In the
    ``*_eps`` modes the grid lists N values (J = sN), M ~ N^b and d ~ N^c.
    """

    mode: str = "fig2"
    grid: tuple[int, ...] = ()
    b: float = 2 / 3
    c: float = 1 / 4
    a: float = 1.0
    s: HalfInt = HalfInt(1)
    out: str | None = None
    format: str = "csv"
    seed: int = 0
    workers: int = 1
    n_kraus: int = 4

    def __post_init__(self):
        object.__setattr__(self, "s", HalfInt.of(self.s))
        object.__setattr__(self, "grid", tuple(int(g) for g in self.grid))
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.format not in ("csv", "json"):
            raise ConfigError("format must be csv or json")
        if any(g <= 0 for g in self.grid):
            raise ConfigError("grid values must be positive")
        if any(y <= x for x, y in zip(self.grid, self.grid[1:])):
            raise ConfigError("grid must be strictly increasing")
        if self.s.twice <= 0:
            raise ConfigError("s must be positive")
        if self.mode == "fig2" and not 0 <= self.c <= self.b < 1:
            raise ConfigError("fig2 mode needs 0 <= c <= b < 1")
        if self.a != 1.0:
            raise ConfigError("only J = sN (a = 1) is supported")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def echo(self) -> dict:
        out = asdict(self)
        out["s"] = str(self.s)
        out["grid"] = list(self.grid)
        return out


@dataclass(frozen=True)
class SweepRow:
    J: HalfInt
    N: int
    M: HalfInt
    d: int
    j1: HalfInt
    qfi_ideal: float | None
    qfi_erased: float | None
    loss_ratio: float | None
    epsilon_hat: float | None = None
    wall_time: float = field(default=0.0, compare=False)

    def __post_init__(self):
        if self.loss_ratio is not None and not 0.0 <= self.loss_ratio <= 1.0:
            raise DomainError(f"loss ratio {self.loss_ratio} outside [0, 1]")

    def cells(self) -> dict:
        def fmt(v):
            if v is None:
                return ""
            if isinstance(v, float):
                return repr(v)
            return str(v)
        return {k: fmt(getattr(self, k)) for k in COLUMNS}

    def record(self) -> dict:
        out = {}
        for k in COLUMNS:
            v = getattr(self, k)
            out[k] = str(v) if isinstance(v, HalfInt) else v
        return out


# ---------------------------------------------------------------------------
# rounding rules


def nearest_ladder_value(x: float, J: HalfInt) -> HalfInt:
    """Value nearest to ``x`` on the ladder J, J-1, ...; ties go to the smaller magnitude."""
    offset = Fraction(J.twice % 2, 2)  # 0 or 1/2
    lo = math.floor(x - offset) + offset
    hi = lo + 1
    dlo, dhi = x - lo, hi - x
    if dlo < dhi or (dlo == dhi and abs(lo) <= abs(hi)):
        return HalfInt.of(lo)
    return HalfInt.of(hi)


def nearest_multiple(x: float, s: HalfInt) -> HalfInt:
    """Multiple of s nearest to ``x`` (ties go to the smaller one)."""
    step = float(s)
    k = math.floor(x / step)
    if x / step - k > 0.5:
        k += 1
    return HalfInt(s.twice * k)


def nearest_count(x: float) -> int:
    k = math.floor(x)
    return k + 1 if x - k > 0.5 else k


# ---------------------------------------------------------------------------
# evaluation


def _point_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=(index,)).generate_state(1)[0])


def _evaluate(cfg: SweepConfig, index: int) -> SweepRow | None:
    g = cfg.grid[index]
    start = time.perf_counter()
    s = cfg.s
    if cfg.mode == "fig2":
        J = HalfInt(2 * g)
        if J.twice % s.twice:
            log.warning("J = %s is not a multiple of s = %s; point skipped", J, s)
            return None
        N = J.twice // s.twice
        M = nearest_ladder_value(g**cfg.b, J)
        j1 = nearest_multiple(g**cfg.c, s)
        d = j1.twice // s.twice
    else:
        N = g
        J = HalfInt(s.twice * N)
        M = nearest_ladder_value(N**cfg.b, J)
        d = nearest_count(N**cfg.c)
        j1 = HalfInt(s.twice * d)
    if M.twice <= 0 or M > J:
        log.warning("grid point %s: M = %s outside (0, J]; point skipped", g, M)
        return None
    eps = None
    if cfg.mode != "fig2":
        code = CodeSpec(s, N, -M, M.twice, 2)
        if not code.admissible(max(d, 1)):
            log.warning("grid point %s: code {-M, M} not admissible for d = %s; skipped", g, d)
            return None
        if cfg.mode == "erasure_eps":
            eps = inaccuracy_erasure(code, tuple(range(d)), method="cg").epsilon_hat
        else:
            ch = random_dlocal_channel(s, tuple(range(max(d, 1))),
                                       min(cfg.n_kraus, (s.twice + 1) ** (2 * max(d, 1))),
                                       _point_seed(cfg.seed, index))
            eps = inaccuracy_generic(code, ch)
    if M <= j1 and d > 0:
        if cfg.mode == "fig2":
            log.warning("grid point J = %s: M = %s <= j1 = %s; point skipped", J, M, j1)
            return None
        qfi = None
    else:
        qfi = qfi_erased_probe(s, N, M, d)
    return SweepRow(J, N, M, d, j1,
                    None if qfi is None else qfi.qfi_ideal,
                    None if qfi is None else qfi.qfi,
                    None if qfi is None else qfi.loss_ratio,
                    eps, time.perf_counter() - start)


def run_sweep(cfg: SweepConfig) -> list[SweepRow]:
    """Evaluate every grid point; rows come back in grid order whatever the worker count."""
    idx = range(len(cfg.grid))
    if cfg.workers > 1 and len(cfg.grid) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            rows = list(pool.map(_evaluate, [cfg] * len(cfg.grid), idx))
    else:
        rows = [_evaluate(cfg, i) for i in idx]
    return [r for r in rows if r is not None]


def rows_to_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r.cells())
    return buf.getvalue()


def rows_to_json(rows: Sequence[SweepRow], cfg: SweepConfig) -> str:
    doc = {"config": cfg.echo(), "columns": list(COLUMNS),
           "rows": [r.record() for r in rows]}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def sweep_metadata(rows: Sequence[SweepRow], cfg: SweepConfig) -> dict:
    from . import __version__
    return {"config": cfg.echo(), "rng": RNG_ALGORITHM, "version": __version__,
            "wall_time": [{"J": str(r.J), "N": r.N, "seconds": r.wall_time} for r in rows]}


def write_sweep(rows: Sequence[SweepRow], cfg: SweepConfig, out: str | Path) -> Path:
    """Write the table to ``out`` and timing data to ``out`` + ``.meta.json``."""
    out = Path(out)
    text = rows_to_csv(rows) if cfg.format == "csv" else rows_to_json(rows, cfg)
    out.write_text(text, encoding="utf-8")
    meta = out.with_name(out.name + ".meta.json")
    meta.write_text(json.dumps(sweep_metadata(rows, cfg), indent=2) + "\n", encoding="utf-8")
    return meta


# ---------------------------------------------------------------------------
# fits


@dataclass(frozen=True)
class PowerLawFit:
    slope: float
    intercept: float
    r_squared: float


def fit_loglog_slope(points: Sequence[tuple[float, float]]) -> PowerLawFit:
    """Least-squares line through (log10 x, log10 y)."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
        raise DomainError("need at least 3 (x, y) points")
    if np.any(pts <= 0) or not np.all(np.isfinite(pts)):
        raise DomainError("all coordinates must be positive and finite")
    lx, ly = np.log10(pts[:, 0]), np.log10(pts[:, 1])
    if np.ptp(lx) == 0:
        raise DomainError("x values must not all coincide")
    xm, ym = lx.mean(), ly.mean()
    slope = float(np.sum((lx - xm) * (ly - ym)) / np.sum((lx - xm) ** 2))
    intercept = float(ym - slope * xm)
    ss_res = float(np.sum((ly - intercept - slope * lx) ** 2))
    ss_tot = float(np.sum((ly - ym) ** 2))
    r2 = 1.0 if ss_tot <= 1e-30 * max(1.0, float(np.sum(ly**2))) else 1.0 - ss_res / ss_tot
    return PowerLawFit(slope, intercept, min(1.0, max(0.0, r2)))


def geometric_grid(start: int, stop: int, factor: float = 2.0) -> tuple[int, ...]:
    """Rounded geometric sequence start, start*factor, ... not exceeding stop."""
    if start < 1 or stop < start or factor <= 1:
        raise DomainError("need 1 <= start <= stop and factor > 1")
    out = []
    k = 0
    while True:
        v = int(round(start * factor**k))
        if v > stop:
            break
        if not out or v > out[-1]:
            out.append(v)
        k += 1
    return tuple(out)


def fig2_fit(rows: Sequence[SweepRow]) -> PowerLawFit:
    """Slope of loss_ratio = Delta F / (4 M^2) against J."""
    return fit_loglog_slope([(float(r.J), r.loss_ratio) for r in rows])


# ---------------------------------------------------------------------------
# config files

_FIELDS = {
    "mode": str, "b": float, "c": float, "a": float, "s": str, "out": str,
    "format": str, "seed": int, "workers": int, "n_kraus": int,
}


def _number(text: str) -> float:
    return float(Fraction(text.strip()))


def load_config(path: str | Path) -> SweepConfig:
    """Read ``key = value`` lines under a ``[sweep]`` header.

    The grid is either ``grid = 64, 128, 256`` or ``grid_start``/``grid_stop``
    with an optional ``grid_factor``. Exponents accept fractions such as 2/3.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, str(path))


def parse_config(text: str, source: str = "<config>") -> SweepConfig:
    lines = text.splitlines()

    def where(key: str) -> str:
        for no, line in enumerate(lines, 1):
            if line.split("=", 1)[0].strip().lower() == key:
                return f"{source}:{no}"
        return source

    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    if not parser.has_section("sweep"):
        raise ConfigError(f"{source}: missing [sweep] section")
    sec = parser["sweep"]
    known = set(_FIELDS) | {"grid", "grid_start", "grid_stop", "grid_factor"}
    for key in sec:
        if key not in known:
            raise ConfigError(f"{where(key)}: unknown key {key!r}")
    kwargs = {}
    for key, kind in _FIELDS.items():
        if key not in sec:
            continue
        raw = sec[key]
        try:
            if kind is float:
                kwargs[key] = _number(raw)
            elif kind is int:
                kwargs[key] = int(raw)
            else:
                kwargs[key] = raw.strip()
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"{where(key)}: bad value for {key}: {raw!r}") from exc
    try:
        if "grid" in sec:
            items = [x for x in sec["grid"].split(",") if x.strip()]
            kwargs["grid"] = tuple(int(x) for x in items)
        elif "grid_start" in sec:
            kwargs["grid"] = geometric_grid(int(sec["grid_start"]),
                                            int(sec.get("grid_stop", sec["grid_start"])),
                                            _number(sec.get("grid_factor", "2")))
    except (ValueError, DomainError) as exc:
        raise ConfigError(f"{where('grid')}: bad grid: {exc}") from exc
    try:
        return SweepConfig(**kwargs)
    except SU2QECError as exc:
        raise ConfigError(f"{source}: {exc}") from exc

"""Experiment specs, grid execution and CSV/JSON output.

A spec file is UTF-8 ``key = value`` text. Lists are comma separated, ``#``
starts a comment, and a numeric list may be written ``start:stop:step``
(inclusive of ``stop``). Recognised keys:

=============  ==========================================================
name           free text label (default ``experiment``)
schemes        ``rsma``, ``noma``, ``oma`` (default ``rsma``)
k_list         numbers of GF users
snr_db         transmit power grid in dB; P_B for ``equal``/``fixed_ratio``,
               P_F for ``fixed_pb``
power_rule     ``equal``, ``fixed_ratio`` or ``fixed_pb``
ratio          P_F / P_B for ``fixed_ratio``
p_b_fixed_db   P_B in dB for ``fixed_pb``
rate_b         GB target rate(s) in BPCU, or ``tied`` to follow ``rate_f``
rate_f         GF target rate(s) in BPCU
methods        any of ``mc``, ``mc_gb``, ``mc_rate_gf``, ``mc_rate_sum``,
               ``theorem1``, ``corollary1``, ``theorem2``, ``corollary2``,
               ``corollary3``, ``quadrature``
trials         Monte Carlo trials per point (default 1000000)
seed           master seed (default 0)
out            output path (default: standard output)
format         ``csv`` or ``json`` (default ``csv``)
=============  ==========================================================

Noise has unit variance, so a transmit power in dB is also the transmit SNR.
"""

from __future__ import annotations

import csv
import io
import json
import math
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import analytic, oracle
from .channel_model import SystemConfig
from .protocol import SchemeKind
from .simulator import DEFAULT_Z, simulate_point

CSV_HEADER = ["k", "p_b_db", "p_f_db", "rate_b", "rate_f", "scheme", "method", "value", "ci", "condition_flag", "error"]
MC_METHODS = ("mc", "mc_gb", "mc_rate_gf", "mc_rate_sum")
ANALYTIC_METHODS = ("theorem1", "corollary1", "theorem2", "corollary2", "corollary3")
ALL_METHODS = MC_METHODS + ANALYTIC_METHODS + ("quadrature",)
POWER_RULES = ("equal", "fixed_ratio", "fixed_pb")
KEYS = (
    "name", "schemes", "k_list", "snr_db", "power_rule", "ratio", "p_b_fixed_db",
    "rate_b", "rate_f", "methods", "trials", "seed", "out", "format",
)  # fmt: skip
REQUIRED = ("k_list", "snr_db", "rate_f", "methods")


class SpecError(ValueError):
    """Invalid experiment spec; the message names the key and line."""

    def __init__(self, key: str, line: int | None, message: str):
        where = f"line {line}" if line else "spec"
        super().__init__(f"{where}: {key}: {message}")
        self.key = key
        self.line = line


@dataclass
class ExperimentSpec:
    name: str = "experiment"
    schemes: list[SchemeKind] = field(default_factory=lambda: [SchemeKind.RSMA_SGF])
    k_list: list[int] = field(default_factory=list)
    snr_db: list[float] = field(default_factory=list)
    power_rule: str = "equal"
    ratio: float | None = None
    p_b_fixed_db: float | None = None
    rate_b: list[float] | None = None  # None means tied to rate_f
    rate_f: list[float] = field(default_factory=list)
    methods: list[str] = field(default_factory=list)
    trials: int = 10**6
    seed: int = 0
    out: str | None = None
    format: str = "csv"

    def rate_pairs(self) -> list[tuple[float, float]]:
        if self.rate_b is None:
            return [(r, r) for r in self.rate_f]
        return [(rb, rf) for rb in self.rate_b for rf in self.rate_f]

    def powers_db(self, snr: float) -> tuple[float, float]:
        """``(P_B, P_F)`` in dB for one grid value."""
        if self.power_rule == "equal":
            return snr, snr
        if self.power_rule == "fixed_ratio":
            return snr, snr + 10.0 * math.log10(self.ratio)
        return self.p_b_fixed_db, snr

    def validate(self, lines: dict[str, int] | None = None):
        lines = lines or {}

        def fail(key, msg):
            raise SpecError(key, lines.get(key), msg)

        for key in ("k_list", "snr_db", "rate_f", "methods", "schemes"):
            if not getattr(self, key):
                fail(key, "must not be empty")
        if self.rate_b is not None and not self.rate_b:
            fail("rate_b", "must not be empty")
        if any(k < 1 for k in self.k_list):
            fail("k_list", "every K must be >= 1")
        for key in ("rate_f", "rate_b"):
            if any(not (math.isfinite(r) and r > 0) for r in getattr(self, key) or []):
                fail(key, "rates must be finite and > 0")
        if any(not math.isfinite(s) for s in self.snr_db):
            fail("snr_db", "values must be finite")
        if self.power_rule not in POWER_RULES:
            fail("power_rule", f"expected one of {', '.join(POWER_RULES)}")
        if self.power_rule == "fixed_ratio" and not (self.ratio is not None and self.ratio > 0):
            fail("ratio", "fixed_ratio needs ratio > 0")
        if self.power_rule == "fixed_pb" and self.p_b_fixed_db is None:
            fail("p_b_fixed_db", "fixed_pb needs p_b_fixed_db")
        for m in self.methods:
            if m not in ALL_METHODS:
                fail("methods", f"unknown method {m!r}")
        if any(m in MC_METHODS for m in self.methods) and self.trials < 1:
            fail("trials", "must be >= 1 when a Monte Carlo method is requested")
        if self.format not in ("csv", "json"):
            fail("format", "expected csv or json")
        return self


def _split(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def _numbers(value: str, cast):
    out = []
    for item in _split(value):
        if ":" in item:
            start, stop, step = (float(p) for p in item.split(":"))
            if step <= 0:
                raise ValueError("range step must be > 0")
            n = int(math.floor((stop - start) / step + 1e-9))
            out += [cast(start + i * step) for i in range(n + 1)]
        else:
            number = float(item)
            if cast is int and number != int(number):
                raise ValueError(f"{item!r} is not an integer")
            out.append(cast(number))
    return out


def _integer(value: str) -> int:
    return int(value.strip())


def _count(value: str) -> int:
    # accepts 1000000 as well as 1e6
    number = float(value)
    if number != int(number):
        raise ValueError("not an integer")
    return int(number)


def parse_spec_text(text: str) -> ExperimentSpec:
    raw: dict[str, tuple[str, int]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SpecError(line.split()[0], lineno, "expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in KEYS:
            raise SpecError(key, lineno, "unknown key")
        if key in raw:
            raise SpecError(key, lineno, f"duplicate key (first set on line {raw[key][1]})")
        raw[key] = (value, lineno)
    for key in REQUIRED:
        if key not in raw:
            raise SpecError(key, None, "missing required key")

    spec = ExperimentSpec()
    converters = {
        "name": lambda v: v,
        "schemes": lambda v: [SchemeKind.parse(s) for s in _split(v)],
        "k_list": lambda v: _numbers(v, int),
        "snr_db": lambda v: _numbers(v, float),
        "power_rule": lambda v: v.lower(),
        "ratio": float,
        "p_b_fixed_db": float,
        "rate_b": lambda v: None if v.lower() == "tied" else _numbers(v, float),
        "rate_f": lambda v: _numbers(v, float),
        "methods": lambda v: [m.lower() for m in _split(v)],
        "trials": _count,
        "seed": _integer,
        "out": lambda v: v or None,
        "format": lambda v: v.lower(),
    }
    for key, (value, lineno) in raw.items():
        try:
            setattr(spec, key, converters[key](value))
        except ValueError as exc:
            raise SpecError(key, lineno, f"cannot parse {value!r}: {exc}") from None
    if "rate_b" not in raw:
        raise SpecError("rate_b", None, "missing required key (use 'tied' for rate_b = rate_f)")
    return spec.validate({k: ln for k, (_, ln) in raw.items()})


def parse_spec(path) -> ExperimentSpec:
    """Read and validate a spec file; raises :class:`SpecError` or ``OSError``."""
    return parse_spec_text(Path(path).read_text(encoding="utf-8"))


@dataclass
class ResultRow:
    k: int
    p_b_db: float
    p_f_db: float
    rate_b: float
    rate_f: float
    scheme: str
    method: str
    value: float | None = None
    ci: float | None = None
    condition_flag: float | None = None
    error: str = ""
    wall_time_ms: float = 0.0


def _analytic_value(method: str, config: SystemConfig) -> analytic.AnalyticResult:
    K = config.k_users
    if method == "theorem1":
        # K = 1 is covered by the single-user closed form
        return analytic.exact_pout(config, trusted=True)
    if method == "corollary1":
        return analytic.exact_pout(config, trusted=True) if K == 1 else analytic.corollary1_pout(config)
    if method == "theorem2":
        return analytic.theorem2_approx(config)
    if method == "corollary2":
        return analytic.corollary2_approx(config)
    if method == "corollary3":
        return analytic.corollary3_approx(config)
    if method == "quadrature":
        return oracle.assemble_pout(config)
    raise ValueError(f"unknown analytic method {method!r}")


def _point_rows(spec, config, base, scheme, methods, cache):
    rows = []
    for method in methods:
        row = ResultRow(**base, scheme=scheme.value, method=method)
        start = time.perf_counter()
        try:
            if method in MC_METHODS:
                if cache.get("mc") is None:
                    cache["mc"] = simulate_point(config, scheme, spec.trials, spec.seed)
                gf, gb, erg = cache["mc"]
                if method == "mc":
                    row.value, row.ci = gf.p_hat, gf.ci_halfwidth
                elif method == "mc_gb":
                    row.value, row.ci = gb.p_hat, gb.ci_halfwidth
                elif method == "mc_rate_gf":
                    row.value, row.ci = erg.mean_rate_gf, DEFAULT_Z * erg.std_error
                else:
                    row.value, row.ci = erg.mean_rate_sum, DEFAULT_Z * erg.std_error_sum
            else:
                if scheme is not SchemeKind.RSMA_SGF:
                    raise ValueError(f"{method} describes rsma only")
                res = _analytic_value(method, config)
                row.value = res.value
                row.ci = res.est_error
                row.condition_flag = res.condition_flag
                if res.method.value != method:
                    row.method = res.method.value
        except Exception as exc:  # noqa: BLE001 - surfaced in the error column
            row.value = row.ci = row.condition_flag = None
            row.error = f"{type(exc).__name__}: {exc}"
        row.wall_time_ms = (time.perf_counter() - start) * 1e3
        rows.append(row)
    return rows


def run_experiment(spec: ExperimentSpec, methods: list[str] | None = None) -> list[ResultRow]:
    """One row per (K, power, rate pair, scheme, method), in that nesting order."""
    methods = list(spec.methods if methods is None else methods)
    rows = []
    for k in spec.k_list:
        for snr in spec.snr_db:
            p_b_db, p_f_db = spec.powers_db(snr)
            for rate_b, rate_f in spec.rate_pairs():
                base = dict(k=k, p_b_db=p_b_db, p_f_db=p_f_db, rate_b=rate_b, rate_f=rate_f)
                try:
                    config = SystemConfig(k, db_to_linear(p_b_db), _p_f_linear(spec, snr, p_b_db, p_f_db), rate_b, rate_f)
                except ValueError as exc:
                    for scheme in spec.schemes:
                        rows += [ResultRow(**base, scheme=scheme.value, method=m, error=f"ValueError: {exc}") for m in methods]
                    continue
                for scheme in spec.schemes:
                    rows += _point_rows(spec, config, base, scheme, methods, {})
    return rows


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def _p_f_linear(spec, snr, p_b_db, p_f_db):
    # keep the ratio exact instead of round-tripping through dB
    if spec.power_rule == "fixed_ratio":
        return db_to_linear(p_b_db) * spec.ratio
    return db_to_linear(p_f_db)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def rows_to_csv(rows: list[ResultRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        d = asdict(row)
        writer.writerow([_fmt(d[c]) for c in CSV_HEADER])
    return buf.getvalue()


def rows_to_json(rows: list[ResultRow]) -> str:
    # json writes floats with repr, the shortest text that reads back bit-for-bit
    return json.dumps([asdict(r) for r in rows], indent=1) + "\n"


def emit(rows: list[ResultRow], format: str, path) -> None:
    """Write rows as CSV or JSON to ``path`` (``None`` or ``-`` for standard output)."""
    if format == "csv":
        text = rows_to_csv(rows)
    elif format == "json":
        text = rows_to_json(rows)
    else:
        raise ValueError(f"unknown format {format!r}")
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def load_json_rows(path) -> list[ResultRow]:
    return [ResultRow(**d) for d in json.loads(Path(path).read_text(encoding="utf-8"))]


_OUTAGE = "schemes = rsma, noma, oma\nmethods = mc, theorem1\n"
FIGURES = {
    "2a": "name = fig2a\nk_list = 1, 5\nsnr_db = 0:40:5\npower_rule = fixed_ratio\nratio = 0.1\nrate_b = 1.5\nrate_f = 2\n" + _OUTAGE,
    "2b": "name = fig2b\nk_list = 1, 5\nsnr_db = 0:40:5\npower_rule = fixed_ratio\nratio = 0.1\nrate_b = 2\nrate_f = 1.5\n" + _OUTAGE,
    "3a": "name = fig3a\nk_list = 1, 5\nsnr_db = 0:40:5\npower_rule = equal\nrate_b = 2\nrate_f = 1.5\n" + _OUTAGE,
    "3b": "name = fig3b\nk_list = 1, 5\nsnr_db = 0:40:5\npower_rule = fixed_pb\np_b_fixed_db = 10\nrate_b = 1.5\nrate_f = 2\n"
    + _OUTAGE,
    "4a": "name = fig4a\nk_list = 1:5:1\nsnr_db = 0:40:5\nrate_b = 2\nrate_f = 1.5\nmethods = mc, theorem1\n",
    "4b": "name = fig4b\nk_list = 1:5:1\nsnr_db = 0:40:5\nrate_b = 1.5\nrate_f = 2\n"
    "methods = theorem1, theorem2, corollary2, corollary3\n",
    "5a": "name = fig5a\nk_list = 1, 5\nsnr_db = 15\nrate_b = 2\nrate_f = 0.5:4:0.5\n" + _OUTAGE,
    "5b": "name = fig5b\nk_list = 1, 5\nsnr_db = 20\nrate_b = tied\nrate_f = 0.5:4:0.5\n" + _OUTAGE,
    "6": "name = fig6\nk_list = 1:8:1\nsnr_db = 0:40:5\nrate_b = 2\nrate_f = 1.5\nmethods = mc, theorem1\n",
    "7": "name = fig7\nk_list = 1, 5\nsnr_db = 0:40:5\nrate_b = 4\nrate_f = 1.5\nschemes = rsma, noma, oma\n"
    "methods = mc_rate_gf, mc_rate_sum\n",
}


def figure_spec(figure: str) -> ExperimentSpec:
    """Bundled spec for one figure family (SNR grids in 5 dB steps)."""
    try:
        return parse_spec_text(FIGURES[figure])
    except KeyError:
        raise SpecError("figure", None, f"unknown figure {figure!r}; choose from {', '.join(FIGURES)}") from None

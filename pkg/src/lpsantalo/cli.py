"""Command-line interface: ``lpsantalo <subcommand> ...``.

Function specs
--------------
``name:key=val,key=val`` with ``name`` one of ``quadratic``, ``l1``, ``cube``,
``ball``, ``simplex``, ``funcsimplex``; ``grid@PATH`` reads a grid CSV.
Wrappers nest: ``translate(SPEC, a=[0.3,0.1])``, ``scale(SPEC, l=2)`` and
``tensor(SPEC, SPEC, ...)``.  Inside a wrapper, a ``key=val`` item whose key
is not a wrapper parameter belongs to the function spec before it, so
``translate(cube:dim=2,half_width=0.5, a=[1,0])`` works.

Settings are resolved as command-line flag, then ``LPS_<KEY>`` environment
variable, then ``--config`` file (``key = value`` lines, ``#`` comments), then
the default.  Exit codes: 0 success, 1 domain or numerical error, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__, flow, functions, integrate, mahler, santalo, specfun, transform
from .errors import LpSantaloError
from .integrate import QuadratureSpec

__all__ = ["UsageError", "build_parser", "dumps_json", "load_config", "main", "parse_function", "serialize"]


class UsageError(Exception):
    """Bad command line, function spec, grid file or configuration."""


# ---------------------------------------------------------------------------
# function spec grammar

_ATOMS = {
    "quadratic": (functions.Quadratic, {"dim": int}),
    "l1": (functions.L1Norm, {"dim": int}),
    "cube": (functions.IndicatorCube, {"dim": int, "half_width": float}),
    "ball": (functions.IndicatorBall, {"dim": int, "radius": float}),
    "simplex": (functions.IndicatorSimplex, {"dim": int, "centered": lambda s: s.lower() in ("1", "true", "yes")}),
    "funcsimplex": (functions.FunctionalSimplex, {"dim": int}),
}
_WRAPPER_KEYS = {"translate": {"a"}, "scale": {"l"}, "tensor": set()}


def _split_top(text: str) -> list[str]:
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch in "([":
            depth += 1
        elif ch in ")]":
            depth -= 1
            if depth < 0:
                raise UsageError(f"unbalanced brackets in {text!r}")
        if ch == "," and depth == 0:
            parts.append("".join(cur).strip())
            cur = []
        else:
            cur.append(ch)
    if depth != 0:
        raise UsageError(f"unbalanced brackets in {text!r}")
    parts.append("".join(cur).strip())
    return parts


def _parse_vector(text: str) -> np.ndarray:
    t = text.strip()
    if t.startswith("["):
        if not t.endswith("]"):
            raise UsageError(f"malformed vector {text!r}")
        t = t[1:-1]
    try:
        return np.array([float(v) for v in t.split(",") if v.strip()], dtype=float)
    except ValueError as exc:
        raise UsageError(f"malformed vector {text!r}") from exc


def _parse_atom(text: str) -> functions.FunctionHandle:
    if text.startswith("grid@"):
        path = text[5:]
        try:
            return functions.read_grid_csv(path)
        except (OSError, ValueError, LpSantaloError) as exc:
            raise UsageError(f"cannot read grid file {path!r}: {exc}") from exc
    name, _, rest = text.partition(":")
    name = name.strip().lower()
    if name not in _ATOMS:
        raise UsageError(f"unknown function {name!r}; expected one of {sorted(_ATOMS)} or grid@PATH")
    kls, params = _ATOMS[name]
    kwargs = {}
    for item in [s for s in rest.split(",") if s.strip()] if rest else []:
        key, eq, val = item.partition("=")
        key = key.strip()
        if not eq or key not in params:
            raise UsageError(f"bad parameter {item!r} for {name}; allowed: {sorted(params)}")
        try:
            kwargs[key] = params[key](val.strip())
        except ValueError as exc:
            raise UsageError(f"bad value in {item!r}") from exc
    try:
        return kls(**kwargs)
    except LpSantaloError as exc:
        raise UsageError(str(exc)) from exc


def parse_function(text: str) -> functions.FunctionHandle:
    """Build a handle from the function spec mini-language (see module docstring).

    Raises
    ------
    UsageError
        For unknown names, bad parameters, unreadable grid files or bad nesting.
    """
    text = text.strip()
    if not text:
        raise UsageError("empty function spec")
    head, paren, _ = text.partition("(")
    head = head.strip().lower()
    if paren and head in _WRAPPER_KEYS:
        if not text.endswith(")"):
            raise UsageError(f"missing ')' in {text!r}")
        items = _split_top(text[len(head) + 1:-1].strip())
        specs: list[str] = []
        kw: dict[str, str] = {}
        for item in items:
            key, eq, val = item.partition("=")
            key = key.strip()
            if eq and "(" not in key and ":" not in key and "@" not in key:
                if key in _WRAPPER_KEYS[head]:
                    kw[key] = val
                elif specs:
                    specs[-1] += "," + item
                else:
                    raise UsageError(f"parameter {item!r} before any function in {head}(...)")
            else:
                specs.append(item)
        inner = [parse_function(s) for s in specs]
        try:
            if head == "tensor":
                if len(inner) < 2:
                    raise UsageError("tensor(...) needs at least two functions")
                out = inner[0]
                for g in inner[1:]:
                    out = functions.tensor(out, g)
                return out
            if len(inner) != 1:
                raise UsageError(f"{head}(...) takes exactly one function")
            if head == "translate":
                if "a" not in kw:
                    raise UsageError("translate(...) needs a=...")
                return functions.translate(inner[0], _parse_vector(kw["a"]))
            if "l" not in kw:
                raise UsageError("scale(...) needs l=...")
            try:
                lam = float(kw["l"])
            except ValueError as exc:
                raise UsageError(f"bad scale factor {kw['l']!r}") from exc
            return functions.scale(lam, inner[0])
        except LpSantaloError as exc:
            raise UsageError(str(exc)) from exc
    return _parse_atom(text)


# ---------------------------------------------------------------------------
# configuration

_DEFAULTS = {
    "p": "1",
    "out": "json",
    "output": "-",
    "seed": "0",
    "threads": "0",
    "tol": "1e-9",
    "quad.scheme": "auto",
    "quad.rtol": "1e-10",
}


def load_config(path: str | None) -> dict[str, str]:
    """Read ``key = value`` lines; blank lines and ``#`` comments are ignored."""
    if not path:
        return {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path!r}: {exc}") from exc
    out = {}
    for num, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, val = line.partition("=")
        if not eq or not key.strip():
            raise UsageError(f"{path}:{num}: expected key = value")
        out[key.strip().lower()] = val.strip()
    return out


def _env_key(key: str) -> str:
    return "LPS_" + key.upper().replace(".", "_").replace("-", "_")


class Settings:
    """Resolved settings with flag > environment > config file > default precedence."""

    def __init__(self, args: argparse.Namespace, config: dict[str, str]):
        self.args = args
        self.config = config

    def get(self, key: str, flag: str | None = None):
        flag = flag or key.replace(".", "_").replace("-", "_")
        val = getattr(self.args, flag, None)
        if val is not None:
            return val
        env = os.environ.get(_env_key(key))
        if env is not None:
            return env
        if key in self.config:
            return self.config[key]
        return _DEFAULTS.get(key)

    def number(self, key: str, flag: str | None = None) -> float:
        val = self.get(key, flag)
        try:
            return float(val)
        except (TypeError, ValueError) as exc:
            raise UsageError(f"setting {key!r} must be a number, got {val!r}") from exc

    def quadrature(self) -> QuadratureSpec:
        cfg = {k: self.get(k) for k in ("quad.scheme", "quad.nodes", "quad.radius", "quad.rtol")}
        cfg["quad.seed"] = self.get("seed")
        cfg = {k: v for k, v in cfg.items() if v is not None}
        try:
            return QuadratureSpec.from_config(cfg)
        except (LpSantaloError, ValueError) as exc:
            raise UsageError(f"bad quadrature settings: {exc}") from exc


# ---------------------------------------------------------------------------
# serialization


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if obj is None or isinstance(obj, str):
        return obj
    if hasattr(obj, "to_dict"):
        return _plain(obj.to_dict())
    return str(obj)


def _real(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return format(x, ".17g")


def _encode(obj, indent: int) -> str:
    pad = "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {_encode(obj[k], indent + 1)}" for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + "  " * indent + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        return "[\n" + ",\n".join(pad + _encode(v, indent + 1) for v in obj) + "\n" + "  " * indent + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, float):
        return _real(obj)
    return json.dumps(obj)


def dumps_json(report) -> str:
    """Deterministic JSON: sorted keys, 17 significant digits, ``"inf"``/``"nan"`` strings."""
    return _encode(_plain(report), 0) + "\n"


def _csv_cell(v) -> str:
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    return "" if v is None else str(v)


def serialize(report, fmt: str = "json", columns: Sequence[str] | None = None) -> str:
    """Render ``report`` as JSON or CSV text.

    CSV needs ``report`` to be a list of flat dicts (or objects with
    ``to_dict``); ``columns`` fixes the column order.
    """
    if fmt == "json":
        return dumps_json(report)
    if fmt != "csv":
        raise UsageError(f"unknown output format {fmt!r}")
    rows = _plain(report)
    if isinstance(rows, dict):
        rows = [rows]
    if not rows:
        return ""
    columns = list(columns or rows[0].keys())
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_csv_cell(r.get(c)) for c in columns])
    return buf.getvalue()


def _emit(text: str, path: str):
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise UsageError(f"cannot write {path!r}: {exc}") from exc


# ---------------------------------------------------------------------------
# helpers


def _parse_points(text: str, dim: int) -> np.ndarray:
    """``"0.1,0.2;0.3,0.4"`` to an ``(m, dim)`` array."""
    pts = [_parse_vector(chunk) for chunk in text.split(";") if chunk.strip()]
    if not pts:
        raise UsageError("empty point list")
    for v in pts:
        if v.size != dim:
            raise UsageError(f"point {v.tolist()} has dimension {v.size}, expected {dim}")
    return np.array(pts)


def _parse_t_grid(text: str) -> list[float]:
    """``start:step:stop`` (inclusive) or a comma list."""
    try:
        if ":" in text:
            a, h, b = (float(v) for v in text.split(":"))
            if not h > 0 or b < a:
                raise UsageError("t-grid needs step > 0 and stop >= start")
            k = int(math.floor((b - a) / h + 1e-9))
            return [round(a + i * h, 12) for i in range(k + 1)]
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"malformed t-grid {text!r}") from exc


def _parse_p(settings: Settings) -> float:
    val = str(settings.get("p")).strip().lower()
    if val in ("inf", "infinity"):
        return math.inf
    try:
        return float(val)
    except ValueError as exc:
        raise UsageError(f"p must be a number or 'inf', got {val!r}") from exc


def _function(settings: Settings) -> functions.FunctionHandle:
    text = settings.get("function")
    if not text:
        raise UsageError("--function is required")
    return parse_function(text)


# ---------------------------------------------------------------------------
# subcommands


def cmd_transform(s: Settings):
    f = _function(s)
    p = _parse_p(s)
    if s.args.y is None:
        raise UsageError("--y is required")
    Y = _parse_points(s.args.y, f.dim)
    T = transform.lp_transform(f, p, s.quadrature(), path=s.args.path)
    vals = T.batch(Y) if not math.isinf(p) else np.atleast_1d(T(Y))
    if s.get("out") == "csv":
        cols = [f"y{i + 1}" for i in range(f.dim)] + ["value"]
        return [dict(zip(cols, list(y) + [float(v)])) for y, v in zip(Y, vals)], cols
    return {"function": s.get("function"), "p": p, "path": T.path,
            "points": [{"y": y.tolist(), "value": float(v)} for y, v in zip(Y, vals)]}, None


def cmd_volume(s: Settings):
    f = _function(s)
    spec = s.quadrature()
    out = {"function": s.get("function"), "volume": integrate.volume(f, spec)}
    if s.args.moments:
        out.update(integrate.covariance(f, spec).to_dict())
    return out, None


def cmd_mahler(s: Settings):
    f = _function(s)
    if s.args.method == "closed_form" and (s.args.quad_scheme or s.args.quad_rtol):
        raise UsageError("--method closed_form conflicts with quadrature flags")
    rep = mahler.mahler(f, _parse_p(s), s.quadrature(), method=s.args.method)
    return rep.to_dict(), None


def cmd_santalo(s: Settings):
    f = _function(s)
    res = santalo.santalo_point(f, _parse_p(s), s.quadrature(), tol=s.number("tol"), max_iter=s.args.max_iter)
    return res.to_dict(), None


FLOW_COLUMNS = ["t", "V", "Mp", "sp", "b_norm", "dMdt_fd", "dMdt_rhs", "mpbound_slack", "g"]


def cmd_flow(s: Settings):
    f = _function(s)
    p = _parse_p(s)
    ts = _parse_t_grid(s.get("t-grid", "t_grid") or "0:0.5:2")
    probes = _parse_points(s.args.probes, f.dim).tolist() if s.args.probes else None
    diags = flow.monotonicity_experiment(f, p, ts, s.quadrature(), full=s.args.full or bool(probes), probes=probes)
    rows = []
    for d in diags:
        r = d.to_dict()
        sp = r.pop("sp")
        if f.dim == 1:
            r["sp"] = sp[0]
            cols = FLOW_COLUMNS
        else:
            for i, v in enumerate(sp):
                r[f"sp{i + 1}"] = v
            cols = FLOW_COLUMNS[:3] + [f"sp{i + 1}" for i in range(f.dim)] + FLOW_COLUMNS[4:]
        rows.append(r)
    if s.get("out") == "csv":
        return rows, cols
    return {"function": s.get("function"), "p": p, "states": rows}, None


def cmd_ball_asymptotics(s: Settings):
    p = _parse_p(s)
    n_max = s.args.n_max
    rows = []
    for n in range(1, n_max + 1, 2):
        logm = specfun.log_mahler_ball(n, p)
        row = {"n": n, "p": p, "log_mahler": logm, "mahler": math.exp(logm),
               "per_dim_gap": logm / n - math.log(4.0 * math.pi)}
        if p == 1.0:
            jk, ji = specfun.gaunt_bracket(n)
            row.update({"J_K": jk, "J_I": ji, "bracket_ok": bool(jk <= ji < 2.0 * jk)})
        rows.append(row)
    if s.get("out") == "csv":
        return rows, list(rows[0].keys())
    return {"p": p, "rows": rows}, None


def cmd_scan(s: Settings):
    if not s.args.family:
        raise UsageError("--family is required (semicolon separated function specs)")
    names = [t.strip() for t in _split_semicolons(s.args.family)]
    fam = [parse_function(t) for t in names]
    recs = mahler.conjecture_scan(fam, _parse_p(s), s.quadrature(), names=names)
    rows = [r.to_dict() for r in recs]
    if s.get("out") == "csv":
        for r in rows:
            r["santalo_point"] = " ".join(format(v, ".17g") for v in r["santalo_point"])
            r["notes"] = "; ".join(r["notes"])
        return rows, list(rows[0].keys())
    return {"p": _parse_p(s), "records": rows}, None


def _split_semicolons(text: str) -> list[str]:
    out, depth, cur = [], 0, []
    for ch in text:
        depth += ch in "(["
        depth -= ch in ")]"
        if ch == ";" and depth == 0:
            out.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    out.append("".join(cur))
    return [t for t in out if t.strip()]


def cmd_verify(s: Settings):
    from . import verify

    results = verify.run_suite(s.args.suite, s.quadrature())
    width = max(len(r.name) for r in results)
    lines = [f"{'PASS' if r.passed else 'FAIL'}  {r.name:<{width}}  {r.detail}" for r in results]
    sys.stderr.write("\n".join(lines) + "\n")
    ok = all(r.passed for r in results)
    report = {"suite": s.args.suite, "passed": ok, "checks": [r.to_dict() for r in results]}
    return report, ("exit", 0 if ok else 1)


COMMANDS = {
    "transform": cmd_transform,
    "volume": cmd_volume,
    "mahler": cmd_mahler,
    "santalo": cmd_santalo,
    "flow": cmd_flow,
    "ball-asymptotics": cmd_ball_asymptotics,
    "scan": cmd_scan,
    "verify": cmd_verify,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="key = value settings file")
    common.add_argument("--out", choices=["json", "csv"], default=None, help="output format (default json)")
    common.add_argument("--output", default=None, help="output path, '-' for stdout")
    common.add_argument("--seed", default=None, help="seed for randomized quadrature")
    common.add_argument("--threads", default=None, help="worker threads (results do not depend on it)")
    common.add_argument("--quad-scheme", dest="quad_scheme", default=None,
                        help="adaptive, tensor-gauss-legendre, gauss-hermite, qmc or auto")
    common.add_argument("--quad-nodes", dest="quad_nodes", default=None, help="node count for the scheme")
    common.add_argument("--quad-rtol", dest="quad_rtol", default=None, help="target relative tolerance")

    fun = _Parser(add_help=False)
    fun.add_argument("--function", default=None, help="function spec, e.g. quadratic:dim=2")
    fun.add_argument("--p", default=None, help="exponent p > 0 or 'inf'")

    ap = _Parser(prog="lpsantalo", description="L^p Legendre transforms, Mahler integrals and Santaló points.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("transform", parents=[common, fun], help="evaluate f^{*,p} at points")
    sp.add_argument("--y", default=None, help="points 'y1,y2;y1,y2;...'")
    sp.add_argument("--path", choices=list(transform.PATHS), default="auto")

    sp = sub.add_parser("volume", parents=[common, fun], help="V(f), optionally with moments")
    sp.add_argument("--moments", action="store_true")

    sp = sub.add_parser("mahler", parents=[common, fun], help="M_p(f) = V(f) V(f^{*,p})")
    sp.add_argument("--method", choices=["auto", "quadrature", "closed_form"], default="auto")

    sp = sub.add_parser("santalo", parents=[common, fun], help="the L^p Santaló point")
    sp.add_argument("--tol", default=None)
    sp.add_argument("--max-iter", dest="max_iter", type=int, default=40)

    sp = sub.add_parser("flow", parents=[common, fun], help="Ornstein–Uhlenbeck flow diagnostics")
    sp.add_argument("--t-grid", dest="t_grid", default=None, help="start:step:stop or comma list (default 0:0.5:2)")
    sp.add_argument("--probes", default=None, help="probe points for evolution residuals")
    sp.add_argument("--full", action="store_true", help="also compute time-derivative diagnostics")

    sp = sub.add_parser("ball-asymptotics", parents=[common], help="M_p of Euclidean balls over odd n")
    sp.add_argument("--p", default=None)
    sp.add_argument("--n-max", dest="n_max", type=int, default=15)

    sp = sub.add_parser("scan", parents=[common], help="margins against the proven and conjectured bounds")
    sp.add_argument("--family", default=None, help="function specs separated by ';'")
    sp.add_argument("--p", default=None)

    sp = sub.add_parser("verify", parents=[common], help="run the property suite")
    sp.add_argument("--suite", default="all", help="all, quick, or a module name")
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    """Parse ``argv``, run the subcommand and return the exit code."""
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        settings = Settings(args, load_config(args.config))
        fmt = settings.get("out")
        if fmt not in ("json", "csv"):
            raise UsageError(f"unknown output format {fmt!r}")
        report, extra = COMMANDS[args.command](settings)
        code = 0
        columns = None
        if isinstance(extra, tuple) and extra and extra[0] == "exit":
            code = extra[1]
        else:
            columns = extra
        if fmt == "csv" and columns is None:
            raise UsageError(f"{args.command} has no CSV form; use --out json")
        _emit(serialize(report, fmt, columns), settings.get("output"))
        return code
    except UsageError as exc:
        sys.stderr.write(f"lpsantalo: usage error: {exc}\n")
        return 2
    except LpSantaloError as exc:
        sys.stderr.write(f"lpsantalo: {type(exc).__name__}: {exc}\n")
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

"""Text matrix files, JSON problem configs and JSON reports.

Matrix file format::

    rows cols
    re re+imi ...      (one matrix row per line, entries whitespace-separated)

Entries are real (``1.5``), complex (``2-1i``, ``-0.5+3e-2i``) or purely
imaginary (``3i``, ``-i``).  ``j`` is accepted as a synonym for ``i``.
Values are written with 17 significant digits so a round trip is exact.
"""

from __future__ import annotations

import json
import math
import os
import re
from dataclasses import dataclass
from importlib import resources
from typing import Optional

import numpy as np

from .objective import OptimizerConfig
from .solve import CertificateChecks, SolveRequest
from .structured import InstanceError, ProblemInstance

__all__ = [
    "ParseError",
    "ProblemFile",
    "parse_complex",
    "format_complex",
    "read_matrix",
    "write_matrix",
    "format_matrix",
    "parse_matrix_text",
    "load_config",
    "resolve_config_path",
    "report_dict",
]


class ParseError(ValueError):
    """Malformed input; ``location`` names the file/line/field at fault."""

    def __init__(self, location, msg):
        super().__init__(f"{location}: {msg}")
        self.location = location


_REAL = r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_COMPLEX_RE = re.compile(
    rf"""^(?:
        (?P<re>[+-]?{_REAL})(?:(?P<isign>[+-])(?P<im>{_REAL})?[ij])?
      | (?P<pure>[+-]?(?:{_REAL})?)[ij]
      | (?P<special>[+-]?(?:inf|nan))
    )$""",
    re.VERBOSE | re.IGNORECASE,
)


def parse_complex(tok: str) -> complex:
    """Parse ``a``, ``a+bi``, ``a-bi``, ``bi``, ``i``, ``-i``."""
    s = tok.strip()
    mt = _COMPLEX_RE.match(s)
    if not s or mt is None:
        raise ValueError(f"not a complex literal: {tok!r}")
    if mt.group("special") is not None:
        raise ValueError(f"non-finite literal: {tok!r}")
    if mt.group("re") is not None:
        re_part = float(mt.group("re"))
        if mt.group("isign") is None:
            return complex(re_part, 0.0)
        im = float(mt.group("im")) if mt.group("im") else 1.0
        return complex(re_part, im if mt.group("isign") == "+" else -im)
    p = mt.group("pure")
    if p in ("", "+"):
        return 1j
    if p == "-":
        return -1j
    return complex(0.0, float(p))


def _fmt_real(x) -> str:
    return format(float(x), ".17g")


def format_complex(z) -> str:
    z = complex(z)
    if z.imag == 0 and not math.copysign(1.0, z.imag) < 0:
        return _fmt_real(z.real)
    im = _fmt_real(abs(z.imag))
    sign = "-" if math.copysign(1.0, z.imag) < 0 else "+"
    return f"{_fmt_real(z.real)}{sign}{im}i"


def format_matrix(M) -> str:
    a = np.asarray(M, dtype=np.complex128)
    lines = [f"{a.shape[0]} {a.shape[1]}"]
    lines += [" ".join(format_complex(z) for z in row) for row in a]
    return "\n".join(lines) + "\n"


def parse_matrix_text(text: str, source="<matrix>") -> np.ndarray:
    rows = [(i + 1, ln) for i, ln in enumerate(text.splitlines()) if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows:
        raise ParseError(source, "empty matrix file")
    lineno, header = rows[0]
    parts = header.split()
    if len(parts) != 2 or not all(p.isdigit() for p in parts):
        raise ParseError(f"{source}:{lineno}", f"header must be 'rows cols', got {header.strip()!r}")
    nr, nc = int(parts[0]), int(parts[1])
    if nr < 1 or nc < 1:
        raise ParseError(f"{source}:{lineno}", "matrix dimensions must be positive")
    body = rows[1:]
    if len(body) != nr:
        raise ParseError(source, f"expected {nr} rows, found {len(body)}")
    out = np.empty((nr, nc), dtype=np.complex128)
    for r, (lineno, ln) in enumerate(body):
        toks = ln.split()
        if len(toks) != nc:
            raise ParseError(f"{source}:{lineno}", f"expected {nc} entries, found {len(toks)}")
        for c, t in enumerate(toks):
            try:
                out[r, c] = parse_complex(t)
            except ValueError as exc:
                raise ParseError(f"{source}:{lineno}:{c + 1}", str(exc)) from None
    return out


def read_matrix(path) -> np.ndarray:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ParseError(str(path), f"cannot read matrix file ({exc.strerror})") from None
    return parse_matrix_text(text, str(path))


def write_matrix(path, M):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_matrix(M))


# --- config -----------------------------------------------------------------

_TOP_KEYS = {"matrix", "block_sizes", "target_block", "lambdas", "optimizer", "checks"}
_OPT_KEYS = {"seed", "restarts", "xtol", "ftol", "max_iters", "init_radius"}
_CHECK_KEYS = {"lower_bound_samples", "stationarity", "invariant_pair"}


@dataclass(frozen=True)
class ProblemFile:
    path: str
    matrix_path: str
    instance: ProblemInstance
    optimizer: OptimizerConfig
    checks: CertificateChecks

    def request(self) -> SolveRequest:
        return SolveRequest(self.instance, self.optimizer, self.checks)


def resolve_config_path(spec) -> str:
    """``@name`` selects a bundled config from the package ``data`` directory."""
    spec = str(spec)
    if spec.startswith("@"):
        name = spec[1:]
        if not name.endswith(".json"):
            name += ".json"
        ref = resources.files("blockeig") / "data" / name
        if not ref.is_file():
            raise ParseError(spec, "no such bundled config")
        return str(ref)
    return spec


def _int_field(v, where, minimum=None):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ParseError(where, f"expected an integer, got {v!r}")
    if minimum is not None and v < minimum:
        raise ParseError(where, f"must be >= {minimum}")
    return v


def _num_field(v, where):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ParseError(where, f"expected a number, got {v!r}")
    return float(v)


def _lambda_field(v, where):
    if isinstance(v, bool):
        raise ParseError(where, f"expected a complex literal, got {v!r}")
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, str):
        try:
            return parse_complex(v)
        except ValueError as exc:
            raise ParseError(where, str(exc)) from None
    raise ParseError(where, f"expected a complex literal, got {v!r}")


def _reject_unknown(d, allowed, where):
    extra = sorted(set(d) - allowed)
    if extra:
        raise ParseError(f"{where}.{extra[0]}" if where else extra[0], "unknown key")


def load_config(path, overrides: Optional[dict] = None) -> ProblemFile:
    """Parse and validate a JSON problem file.

    The matrix path is resolved relative to the config file.  Any violated
    instance invariant is reported as a :class:`ParseError` naming the field.
    """
    path = resolve_config_path(path)
    src = str(path)
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ParseError(src, f"cannot read config ({exc.strerror})") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"{src}:{exc.lineno}:{exc.colno}", f"invalid JSON: {exc.msg}") from None
    if overrides:
        raw = {**raw, **overrides}
    if not isinstance(raw, dict):
        raise ParseError(src, "config must be a JSON object")
    _reject_unknown(raw, _TOP_KEYS, "")
    for key in ("matrix", "block_sizes", "target_block", "lambdas"):
        if key not in raw:
            raise ParseError(f"{src}: {key}", "missing required key")

    if not isinstance(raw["matrix"], str):
        raise ParseError(f"{src}: matrix", "expected a file path")
    mpath = os.path.join(os.path.dirname(os.path.abspath(path)), raw["matrix"])
    K = read_matrix(mpath)

    bs = raw["block_sizes"]
    if not isinstance(bs, list) or not bs:
        raise ParseError(f"{src}: block_sizes", "expected a non-empty list of integers")
    sizes = tuple(_int_field(b, f"{src}: block_sizes[{i}]", 1) for i, b in enumerate(bs))
    if isinstance(raw["target_block"], list):
        raise ParseError(f"{src}: target_block", "exactly one target block is supported")
    target = _int_field(raw["target_block"], f"{src}: target_block")
    lam = raw["lambdas"]
    if not isinstance(lam, list):
        raise ParseError(f"{src}: lambdas", "expected a list of complex literals")
    lambdas = tuple(_lambda_field(v, f"{src}: lambdas[{i}]") for i, v in enumerate(lam))

    opt = raw.get("optimizer", {}) or {}
    if not isinstance(opt, dict):
        raise ParseError(f"{src}: optimizer", "expected an object")
    _reject_unknown(opt, _OPT_KEYS, f"{src}: optimizer")
    kw = {}
    for key in ("seed", "restarts"):
        if key in opt:
            kw[key] = _int_field(opt[key], f"{src}: optimizer.{key}", 0 if key == "seed" else 1)
    if "max_iters" in opt and opt["max_iters"] is not None:
        kw["max_iters"] = _int_field(opt["max_iters"], f"{src}: optimizer.max_iters", 1)
    for key in ("xtol", "ftol", "init_radius"):
        if key in opt:
            kw[key] = _num_field(opt[key], f"{src}: optimizer.{key}")
    try:
        cfg = OptimizerConfig(**kw)
    except ValueError as exc:
        raise ParseError(f"{src}: optimizer", str(exc)) from None

    chk = raw.get("checks", {}) or {}
    if not isinstance(chk, dict):
        raise ParseError(f"{src}: checks", "expected an object")
    _reject_unknown(chk, _CHECK_KEYS, f"{src}: checks")
    ckw = {}
    if "lower_bound_samples" in chk:
        ckw["lower_bound_samples"] = _int_field(chk["lower_bound_samples"], f"{src}: checks.lower_bound_samples", 0)
    for key in ("stationarity", "invariant_pair"):
        if key in chk:
            if not isinstance(chk[key], bool):
                raise ParseError(f"{src}: checks.{key}", "expected true or false")
            ckw[key] = chk[key]
    checks = CertificateChecks(**ckw)

    try:
        inst = ProblemInstance(K, sizes, target, lambdas)
    except InstanceError as exc:
        field = {
            "finite_matrix": "matrix",
            "square_matrix": "matrix",
            "at_least_two_blocks": "block_sizes",
            "block_partition": "block_sizes",
            "single_target_block": "target_block",
            "target_block_range": "target_block",
            "lambda_not_in_spec_A": "lambdas",
            "k_le_block_size": "lambdas",
        }.get(exc.invariant, "lambdas")
        raise ParseError(f"{src}: {field}", str(exc)) from None
    return ProblemFile(src, mpath, inst, cfg, checks)


# --- report -------------------------------------------------------------------


def _c(z):
    z = complex(z)
    return [z.real, z.imag]


def _f(x):
    x = float(x)
    return x if math.isfinite(x) else None


def report_dict(result, problem: Optional[ProblemFile] = None) -> dict:
    """JSON-ready summary of a :class:`PerturbationResult`.

    Complex numbers are ``[re, im]`` pairs; gamma is keyed ``"i,j"`` (1-based).
    """
    c = result.certificate
    d = result.diagnostics
    out = {
        "alpha_star": _f(c.alpha_star),
        "gamma_star": {key: _c(v) for key, v in c.gamma_star.to_dict().items()},
        "gram_residual": _f(c.gram_residual),
        "membership_residuals": [_f(r) for r in c.membership_residuals],
        "we_residual": _f(c.we_residual),
        "lower_bound_samples": [
            {"gamma": {key: _c(v) for key, v in g.to_dict().items()}, "s_kappa": _f(s)}
            for g, s in c.lower_bound_samples
        ],
        "simple": bool(c.simple),
        "converged": bool(c.converged),
        "certified": bool(result.certified),
        "failures": list(result.failures),
        "achieved_norm": _f(result.achieved_norm),
        "stationarity": _f(c.stationarity),
        "rank_ok": bool(c.rank_ok),
        "notes": list(c.notes),
        "kappa_index": d.get("kappa_index"),
        "simplicity_gap": _f(d.get("simplicity_gap", float("nan"))),
        "restarts_used": d.get("restarts_used"),
        "restart_values": [_f(v) for v in d.get("restart_values", [])],
        "gradient_norm": _f(d.get("gradient_norm", float("nan"))),
        "trace": [[int(i), _f(v)] for i, v in d.get("trace", [])],
        "block_sizes": d.get("block_sizes"),
        "target_block": d.get("target_block"),
        "resolvent_warnings": list(d.get("resolvent_warnings", [])),
    }
    if problem is not None:
        out["lambdas"] = [_c(z) for z in problem.instance.lambdas]
        out["optimizer"] = {
            "seed": problem.optimizer.seed,
            "restarts": problem.optimizer.restarts,
            "xtol": problem.optimizer.xtol,
            "ftol": problem.optimizer.ftol,
            "max_iters": problem.optimizer.max_iters,
            "init_radius": problem.optimizer.init_radius,
        }
    return out

"""``blockeig`` command line: solve, sweep, verify.

Exit codes: 0 success (certified), 2 finished but uncertified, 1 error.
Log verbosity comes from ``BLOCKEIG_LOG_LEVEL`` (default WARNING).
"""

from __future__ import annotations

import argparse
import csv
import io as _stdio
import json
import logging
import os
import sys
import tempfile

import numpy as np

from .io import ParseError, format_matrix, load_config, parse_complex, read_matrix, report_dict
from .matrix_core import SVDError
from .objective import maximize, sweep_slice
from .perturbation import verify_membership
from .solve import solve
from .structured import GammaPoint, InstanceError, SkEvaluator, to_southeast

log = logging.getLogger("blockeig")

EXIT_OK, EXIT_ERROR, EXIT_UNCERTIFIED = 0, 1, 2
VERIFY_TOL = 1e-6


def _setup_logging():
    level = os.environ.get("BLOCKEIG_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    logging.captureWarnings(True)


def _write_outputs(out_dir, files):
    """Write all files or none: stage in a temp dir, then move into place."""
    os.makedirs(out_dir, exist_ok=True)
    stage = tempfile.mkdtemp(prefix=".blockeig-", dir=out_dir)
    try:
        for name, text in files.items():
            with open(os.path.join(stage, name), "w", encoding="utf-8") as fh:
                fh.write(text)
        for name in files:
            os.replace(os.path.join(stage, name), os.path.join(out_dir, name))
    finally:
        for name in os.listdir(stage):
            os.remove(os.path.join(stage, name))
        os.rmdir(stage)


def cmd_solve(args) -> int:
    prob = load_config(args.config)
    result = solve(prob.request())
    rep = report_dict(result, prob)
    files = {
        "report.json": json.dumps(rep, indent=2) + "\n",
        "delta.txt": format_matrix(result.delta),
        "x_star.txt": format_matrix(result.X_star),
        "k_perturbed.txt": format_matrix(result.K_perturbed),
    }
    _write_outputs(args.out, files)

    c = result.certificate
    print(f"alpha_star      {c.alpha_star:.12g}")
    print(f"||Delta*||_2    {result.achieved_norm:.12g}")
    print("gamma_star      " + ", ".join(f"g{k.replace(',', '')}={v:.6g}" for k, v in c.gamma_star.to_dict().items()))
    print(f"gram_residual   {c.gram_residual:.3e}")
    print("membership      " + " ".join(f"{r:.3e}" for r in c.membership_residuals))
    print(f"we_residual     {c.we_residual:.3e}")
    print(f"stationarity    {c.stationarity:.3e}")
    print(f"simple          {c.simple}")
    print(f"converged       {c.converged}")
    for note in c.notes:
        print(f"note: {note}")
    if result.certified:
        print(f"certified; outputs in {args.out}")
        return EXIT_OK
    print(f"NOT certified ({', '.join(result.failures)}); outputs in {args.out}")
    return EXIT_UNCERTIFIED


def _parse_range(text):
    parts = text.split(":")
    if len(parts) != 3:
        raise ParseError("--range", f"expected a:b:n, got {text!r}")
    try:
        a, b = float(parts[0]), float(parts[1])
        n = int(parts[2])
    except ValueError:
        raise ParseError("--range", f"expected a:b:n, got {text!r}") from None
    if n < 1:
        raise ParseError("--range", "n must be >= 1")
    return [a] if n == 1 else list(np.linspace(a, b, n))


def _parse_gamma_list(text, k, where):
    toks = [t for t in text.split(",") if t.strip()]
    npairs = k * (k - 1) // 2
    if len(toks) != npairs:
        raise ParseError(where, f"expected {npairs} comma-separated complex values (pairs 12,13,..), got {len(toks)}")
    try:
        return GammaPoint(k, [parse_complex(t) for t in toks])
    except ValueError as exc:
        raise ParseError(where, str(exc)) from None


def cmd_sweep(args) -> int:
    prob = load_config(args.config)
    inst = prob.instance
    k = inst.k
    se = to_southeast(inst)
    ev = SkEvaluator(se, inst.lambdas)
    star = None

    def get_star():
        nonlocal star
        if star is None:
            star = maximize(se, inst.lambdas, prob.optimizer, ev).gamma_star
        return star

    def point(spec, where, allow_origin):
        if spec == "origin" and allow_origin:
            return GammaPoint(k)
        if spec == "star":
            return get_star()
        if spec.startswith("random"):
            seed = prob.optimizer.seed
            if ":" in spec:
                try:
                    seed = int(spec.split(":", 1)[1])
                except ValueError:
                    raise ParseError(where, f"bad random seed in {spec!r}") from None
            rng = np.random.default_rng(seed)
            npairs = k * (k - 1) // 2
            z = rng.normal(size=npairs) + 1j * rng.normal(size=npairs)
            return GammaPoint(k, z / max(np.linalg.norm(z), 1e-300))
        return _parse_gamma_list(spec, k, where)

    base = point(args.base, "--base", True)
    direction = point(args.direction, "--direction", False)
    grid = _parse_range(args.range)
    try:
        rows = sweep_slice(se, inst.lambdas, base, direction, grid, ev)
    except ValueError as exc:
        raise ParseError("--direction", str(exc)) from None

    buf = _stdio.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "s_kappa"])
    for t, s in rows:
        w.writerow([format(t, ".17g"), format(s, ".17g")])
    if args.output:
        _write_outputs(os.path.dirname(os.path.abspath(args.output)), {os.path.basename(args.output): buf.getvalue()})
    else:
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


def cmd_verify(args) -> int:
    K = read_matrix(args.matrix)
    if K.shape[0] != K.shape[1]:
        raise ParseError(args.matrix, f"matrix must be square, got {K.shape}")
    toks = [t for t in args.lambdas.split(",") if t.strip()]
    if not toks:
        raise ParseError("--lambdas", "at least one value required")
    lambdas = []
    for i, t in enumerate(toks):
        try:
            lambdas.append(parse_complex(t))
        except ValueError as exc:
            raise ParseError(f"--lambdas[{i}]", str(exc)) from None
    res = verify_membership(K, lambdas)
    ok = True
    for lam, r in zip(lambdas, res):
        flag = "ok" if r <= VERIFY_TOL else "FAIL"
        ok &= r <= VERIFY_TOL
        print(f"{lam.real:.12g}{lam.imag:+.12g}i  residual {r:.3e}  {flag}")
    return EXIT_OK if ok else EXIT_UNCERTIFIED


class _Parser(argparse.ArgumentParser):
    # usage errors are errors (exit 1), not the "uncertified" code argparse uses
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser():
    p = _Parser(prog="blockeig", description="Minimal-norm single-block perturbations placing prescribed eigenvalues.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="solve a problem file (or @name for a bundled one)")
    s.add_argument("config")
    s.add_argument("--out", default="blockeig_out", help="output directory (default: %(default)s)")
    s.set_defaults(func=cmd_solve)

    w = sub.add_parser("sweep", help="emit s_kappa along a line in gamma space as CSV")
    w.add_argument("config")
    w.add_argument("--direction", required=True, help="star, random[:seed], or comma-separated gammas g12,g13,..")
    w.add_argument("--base", default="origin", help="origin, star, random[:seed], or gammas (default: origin)")
    w.add_argument("--range", required=True, help="a:b:n grid of t values")
    w.add_argument("--output", help="CSV file (default: stdout)")
    w.set_defaults(func=cmd_sweep)

    v = sub.add_parser("verify", help="check that each lambda is an eigenvalue of a matrix")
    v.add_argument("matrix")
    v.add_argument("--lambdas", required=True, help="comma-separated complex values, e.g. 1,2-i,1.7320508")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, InstanceError, SVDError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

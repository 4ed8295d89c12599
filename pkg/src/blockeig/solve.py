"""End-to-end solve: validate, move the target block southeast, optimize, certify."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .matrix_core import spectral_norm
from .objective import OptimizerConfig, _value, maximize
from .perturbation import (
    SolveCertificate,
    assemble_result,
    build_delta,
    build_invariant_pair,
    extract_uv,
    verify_membership,
    we_residual,
)
from .structured import GammaPoint, ProblemInstance, SkEvaluator, kappa_index, to_southeast

__all__ = ["CertificateChecks", "SolveRequest", "SharpPointWarning", "solve", "sample_gammas"]

log = logging.getLogger(__name__)


class SharpPointWarning(RuntimeWarning):
    """The maximized singular value is not simple; optimality is not established."""


@dataclass(frozen=True)
class CertificateChecks:
    lower_bound_samples: int = 50
    stationarity: bool = True
    invariant_pair: bool = True


@dataclass(frozen=True)
class SolveRequest:
    instance: ProblemInstance
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    checks: CertificateChecks = field(default_factory=CertificateChecks)


def sample_gammas(k, count, seed, radius):
    """Deterministic gamma samples, uniform in the box ``[-radius, radius]`` per coordinate."""
    npairs = k * (k - 1) // 2
    # stream 1 of the seed; stream 0 seeds the optimizer restarts
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(2)[1])
    out = []
    for _ in range(count):
        z = rng.uniform(-radius, radius, npairs) + 1j * rng.uniform(-radius, radius, npairs)
        out.append(GammaPoint(k, z))
    return out


def _is_normal(K):
    return np.linalg.norm(K @ K.conj().T - K.conj().T @ K, 2) <= 1e-10 * max(1.0, spectral_norm(K)) ** 2


def solve(req: SolveRequest):
    """Compute the minimal-norm target-block perturbation and its certificate."""
    inst = req.instance
    cfg = req.optimizer
    lambdas = inst.lambdas
    k = inst.k
    se = to_southeast(inst)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        ev = SkEvaluator(se, lambdas)
    resolvent_warnings = [str(w.message) for w in caught]
    for msg in resolvent_warnings:
        log.warning(msg)

    mres = maximize(se, lambdas, cfg, ev)
    K_norm = spectral_norm(inst.K)
    alpha = mres.alpha_star
    notes = []
    if alpha <= 1e-12 * K_norm:
        notes.append("alpha* is zero: Lambda already lies in the spectrum, Delta* = 0")
        alpha = 0.0

    sv = extract_uv(mres.eval, se.m, k)
    delta = build_delta(sv, alpha)
    K_star = se.assemble(se.D + delta)

    pair = None
    we = float("nan")
    if req.checks.invariant_pair:
        pair = build_invariant_pair(se, lambdas, mres.gamma_star, sv, ev)
        we = we_residual(K_star, pair, K_norm)
    membership = verify_membership(K_star, lambdas, scale=K_norm)

    kap = kappa_index(k, se.m)
    samples = [
        (g, _value(ev, kap, g))
        for g in sample_gammas(k, req.checks.lower_bound_samples, cfg.seed, cfg.init_radius)
    ]
    stationarity = mres.stationarity if req.checks.stationarity else 0.0

    if not mres.simple and alpha > 0:
        normal = _is_normal(inst.K)
        msg = (
            "alpha* is not a simple singular value of S_k(D, gamma*)"
            + (" (K is normal)" if normal else "")
            + "; gamma* may be a sharp point and optimality is not established"
        )
        notes.append(msg)
        warnings.warn(msg, SharpPointWarning, stacklevel=2)
    if not sv.rank_ok and alpha > 0:
        notes.append("U or V is rank-deficient; Delta* built with a pseudoinverse")
    if not mres.converged:
        notes.append("optimizer did not converge; the lower bound is still valid")

    achieved = spectral_norm(delta) if alpha > 0 else 0.0
    cert = SolveCertificate(
        gamma_star=mres.gamma_star,
        alpha_star=alpha,
        gram_residual=sv.gram_residual,
        membership_residuals=membership,
        we_residual=we,
        stationarity=stationarity,
        lower_bound_samples=samples,
        simple=mres.simple,
        converged=mres.converged,
        rank_ok=sv.rank_ok,
        norm_gap=abs(achieved - alpha),
        notes=notes,
    )
    diagnostics = dict(
        kappa_index=kap,
        simplicity_gap=mres.eval.gap,
        trace=mres.trace,
        restarts_used=mres.restarts_used,
        restart_values=mres.restart_values,
        polish_steps=mres.polish_steps,
        gradient_norm=mres.gradient_norm,
        resolvent_warnings=resolvent_warnings,
        block_sizes=list(inst.block_sizes),
        target_block=inst.target_block,
    )
    result = assemble_result(se, delta, alpha, cert, pair, diagnostics)
    if result.failures:
        log.info("solve not certified: %s", ", ".join(result.failures))
    return result

"""Optimal perturbation and its certificates.

From the maximizer ``gamma*`` with singular pair ``(u, v)`` of ``S_k``:
``U = [u_1 .. u_k]`` and ``V = [v_1 .. v_k]`` (the m-blocks of u and v as
columns), ``Delta* = -alpha* U V^+`` and ``X* = D + Delta*``.  The
certificates are the Gram equality ``U^*U = V^*V`` (which forces
``||Delta*||_2 = alpha*``) and the invariant pair ``K_X* W = W E``, whose
upper-triangular ``E`` carries Lambda on its diagonal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .matrix_core import pinv, singular_values, smallest_singular, spectral_norm
from .structured import GammaPoint, SkEvaluator, SouthEastForm

__all__ = [
    "RANK_TOL",
    "SingularVectorMats",
    "InvariantPair",
    "SolveCertificate",
    "PerturbationResult",
    "extract_uv",
    "build_delta",
    "build_invariant_pair",
    "verify_membership",
    "we_residual",
    "assemble_result",
]

RANK_TOL = 1e-8


@dataclass(frozen=True)
class SingularVectorMats:
    U: np.ndarray
    V: np.ndarray
    gram_residual: float
    rank_ok: bool


@dataclass(frozen=True)
class InvariantPair:
    """``W`` ((n+m) x k, columns ``[w_i; v_i]`` for i = k..1) and upper-triangular ``E``."""

    W: np.ndarray
    E: np.ndarray


@dataclass
class SolveCertificate:
    gamma_star: GammaPoint
    alpha_star: float
    gram_residual: float
    membership_residuals: List[float]
    we_residual: float
    stationarity: float
    lower_bound_samples: List[Tuple[GammaPoint, float]]
    simple: bool
    converged: bool
    rank_ok: bool = True
    norm_gap: float = 0.0
    notes: List[str] = field(default_factory=list)

    # thresholds a certified solve must meet
    GRAM_TOL = 1e-6
    MEMBERSHIP_TOL = 1e-6
    WE_TOL = 1e-8
    LOWER_BOUND_SLACK = 1e-6
    STATIONARITY_REL = 1e-4

    def failures(self, achieved_norm) -> List[str]:
        """Names of the checks that fail; empty when the solve is certified."""
        out = []
        if not self.converged:
            out.append("converged")
        if self.alpha_star > 0:
            # with alpha* = 0 nothing is perturbed and there is no optimality claim to check
            if not self.simple:
                out.append("simple")
            if not self.rank_ok:
                out.append("rank_ok")
            if self.norm_gap > 1e-8 * (1 + self.alpha_star):
                out.append("norm_equals_alpha")
            if self.gram_residual > self.GRAM_TOL:
                out.append("gram_residual")
            if self.stationarity > self.STATIONARITY_REL * self.alpha_star:
                out.append("stationarity")
        if any(not r <= self.MEMBERSHIP_TOL for r in self.membership_residuals):
            out.append("membership_residuals")
        if not self.we_residual <= self.WE_TOL:
            out.append("we_residual")
        if any(s > achieved_norm + self.LOWER_BOUND_SLACK for _, s in self.lower_bound_samples):
            out.append("lower_bound_samples")
        return out


@dataclass
class PerturbationResult:
    """Outcome of one solve.

    `delta` and `X_star` are the m x m target-block quantities; `delta_full`
    and `K_perturbed` live in the caller's original block layout.
    """

    delta: np.ndarray
    X_star: np.ndarray
    achieved_norm: float
    alpha_star: float
    certificate: SolveCertificate
    delta_full: np.ndarray
    K_perturbed: np.ndarray
    invariant_pair: Optional[InvariantPair] = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def failures(self) -> List[str]:
        return self.certificate.failures(self.achieved_norm)

    @property
    def certified(self) -> bool:
        return not self.failures


def extract_uv(e, m, k) -> SingularVectorMats:
    """Reshape the km-vectors of a singular pair into m x k matrices."""
    U = np.asarray(e.left_vec).reshape(k, m).T
    V = np.asarray(e.right_vec).reshape(k, m).T
    gram = float(np.linalg.norm(U.conj().T @ U - V.conj().T @ V, 2))

    def full_rank(Z):
        s = singular_values(Z)
        return bool(s[-1] > RANK_TOL * s[0])

    return SingularVectorMats(U, V, gram, full_rank(U) and full_rank(V))


def build_delta(sv: SingularVectorMats, alpha_star) -> np.ndarray:
    """``Delta* = -alpha* U V^+``."""
    m = sv.U.shape[0]
    if alpha_star == 0:
        return np.zeros((m, m), dtype=np.complex128)
    return -alpha_star * sv.U @ pinv(sv.V)


def build_invariant_pair(se: SouthEastForm, lambdas, g: GammaPoint, sv: SingularVectorMats, evaluator=None) -> InvariantPair:
    """``W`` and ``E`` with ``K_X* W = W E``.

    ``w = -calA^+ calB v`` (so ``w_k = -(A - lambda_k I)^-1 B v_k`` and the
    lower ones cascade through the resolvent recursion).  Columns run
    ``k..1``; ``E`` has ``lambda_k..lambda_1`` on the diagonal and
    ``E[p, q] = -gamma_{k-q, k-p}`` (1-based) above it.
    """
    ev = evaluator or SkEvaluator(se, lambdas)
    k = ev.k
    v_blocks = [sv.V[:, i] for i in range(k)]
    w = ev.w_vectors(g, v_blocks)
    W = np.column_stack([np.concatenate([w[i], v_blocks[i]]) for i in reversed(range(k))])
    G = g.as_matrix()
    E = np.zeros((k, k), dtype=np.complex128)
    for q in range(k):
        E[q, q] = ev.lambdas[k - 1 - q]
        for p in range(q):
            E[p, q] = -G[k - 1 - q, k - 1 - p]
    return InvariantPair(W, E)


def we_residual(K_star, pair: InvariantPair, scale) -> float:
    return float(np.linalg.norm(K_star @ pair.W - pair.W @ pair.E, 2) / scale)


def verify_membership(K_perturbed, lambdas, scale=None) -> List[float]:
    """Per-lambda ``s_min(K - lambda I) / scale`` (scale defaults to ``||K||_2``)."""
    K = np.asarray(K_perturbed, dtype=np.complex128)
    if scale is None:
        scale = spectral_norm(K)
    scale = scale if scale > 0 else 1.0
    eye = np.eye(K.shape[0])
    return [smallest_singular(K - complex(lam) * eye) / scale for lam in lambdas]


def assemble_result(se: SouthEastForm, delta, alpha_star, certificate, invariant_pair=None, diagnostics=None) -> PerturbationResult:
    """Place ``Delta*`` back into the original layout of K."""
    n = se.n
    X_star = se.D + delta
    K_orig = se.to_original()
    padded = np.zeros_like(K_orig)
    padded[n:, n:] = delta
    idx = se.permutation.inverse_map
    delta_full = padded[np.ix_(idx, idx)]
    return PerturbationResult(
        delta=delta,
        X_star=X_star,
        achieved_norm=spectral_norm(delta) if np.any(delta) else 0.0,
        alpha_star=float(alpha_star),
        certificate=certificate,
        delta_full=delta_full,
        K_perturbed=K_orig + delta_full,
        invariant_pair=invariant_pair,
        diagnostics=dict(diagnostics or {}),
    )

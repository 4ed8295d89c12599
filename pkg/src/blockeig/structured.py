"""Structured block matrices of the prescribed-eigenvalue problem.

For a southeast form ``K = [[A, B], [C, D]]`` (``A`` is n x n, ``D`` is m x m)
and prescribed eigenvalues ``lambda_1..lambda_k`` the coupling parameters
``gamma_ij`` (i < j) define the block upper-triangular matrices

    calA = [A - lambda_i I_n on the diagonal, gamma_ij I_n above],
    calX = [X - lambda_i I_m on the diagonal, gamma_ij I_m above],
    calB = diag(B, ..., B),   calC = diag(C, ..., C),

and the km x km matrix ``S_k(X, gamma)`` whose ``k(m-1)+1``-th singular value
bounds ``||X - D||_2`` from below whenever ``K_X`` has every lambda_i as an
eigenvalue.  ``S_k`` is computed two ways: the generic pseudoinverse form
(:func:`build_sk_pinv`) and the resolvent recursion (:func:`build_sk_explicit`).
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .matrix_core import (
    PermutationSpec,
    apply_symmetric_permutation,
    as_cmatrix,
    default_rank_tol,
    numerical_rank,
    pinv,
    smallest_singular,
    spectral_norm,
    unapply_symmetric_permutation,
)

__all__ = [
    "EIG_TOL",
    "InstanceError",
    "IllConditionedResolventWarning",
    "ProblemInstance",
    "SouthEastForm",
    "GammaPoint",
    "SkIntermediates",
    "BlockFormulaParts",
    "SkEvaluator",
    "to_southeast",
    "build_structured",
    "pinv_calA_recursive",
    "build_sk_pinv",
    "build_sk_explicit",
    "block_formula_parts",
    "sk_from_parts",
    "rho",
    "build_q_t",
    "kappa_index",
]

EIG_TOL = 1e-8


class InstanceError(ValueError):
    """A problem instance violates one of its invariants.

    ``invariant`` names the violated condition, e.g. ``"k_le_block_size"``.
    """

    def __init__(self, invariant, msg):
        super().__init__(f"[{invariant}] {msg}")
        self.invariant = invariant


class IllConditionedResolventWarning(RuntimeWarning):
    pass


def kappa_index(k, m) -> int:
    """1-based position (descending order) of the governing singular value."""
    return k * (m - 1) + 1


@dataclass(frozen=True)
class SouthEastForm:
    """``P K P^T = [[A, B], [C, D]]`` with the target block ``D`` southeast."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    permutation: PermutationSpec

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.D.shape[0]

    def assemble(self, X=None) -> np.ndarray:
        """``[[A, B], [C, X]]`` in the permuted layout (``X`` defaults to ``D``)."""
        X = self.D if X is None else X
        return np.block([[self.A, self.B], [self.C, X]])

    def to_original(self, X=None) -> np.ndarray:
        """Un-permute ``[[A, B], [C, X]]`` back to the caller's block layout."""
        return unapply_symmetric_permutation(self.assemble(X), self.permutation)


@dataclass(frozen=True)
class ProblemInstance:
    """Matrix K, its diagonal block partition, the target block and Lambda.

    `target_block` is 1-based.  Construction validates every invariant and
    raises :class:`InstanceError` naming the first one that fails.
    """

    K: np.ndarray
    block_sizes: tuple
    target_block: int
    lambdas: tuple

    def __post_init__(self):
        try:
            K = as_cmatrix(self.K, "K")
        except ValueError as exc:
            raise InstanceError("finite_matrix", str(exc)) from None
        if K.shape[0] != K.shape[1]:
            raise InstanceError("square_matrix", f"K must be square, got {K.shape}")
        object.__setattr__(self, "K", K)
        sizes = tuple(int(b) for b in self.block_sizes)
        if len(sizes) < 2:
            raise InstanceError(
                "at_least_two_blocks", "K must be partitioned into at least two blocks"
            )
        if any(b < 1 for b in sizes) or sum(sizes) != K.shape[0]:
            raise InstanceError(
                "block_partition",
                f"block sizes {list(sizes)} do not partition dimension {K.shape[0]}",
            )
        object.__setattr__(self, "block_sizes", sizes)
        if isinstance(self.target_block, (list, tuple, set, np.ndarray)):
            raise InstanceError(
                "single_target_block", "exactly one target block may be perturbed per solve"
            )
        t = int(self.target_block)
        if not 1 <= t <= len(sizes):
            raise InstanceError(
                "target_block_range", f"target block {t} not in 1..{len(sizes)}"
            )
        object.__setattr__(self, "target_block", t)
        lams = tuple(complex(x) for x in self.lambdas)
        if not lams:
            raise InstanceError("nonempty_lambdas", "at least one eigenvalue is required")
        if not all(np.isfinite(x) for x in lams):
            raise InstanceError("finite_lambdas", "prescribed eigenvalues must be finite")
        object.__setattr__(self, "lambdas", lams)
        if len(lams) > sizes[t - 1]:
            raise InstanceError(
                "k_le_block_size",
                f"{len(lams)} prescribed eigenvalues exceed target block size {sizes[t - 1]}",
            )
        for a, b in itertools.combinations(range(len(lams)), 2):
            if lams[a] == lams[b]:
                raise InstanceError(
                    "distinct_lambdas", f"lambda_{a + 1} == lambda_{b + 1} == {lams[a]}"
                )
        A = _southeast_blocks(K, sizes, t)[0]
        scale = spectral_norm(A)
        for i, lam in enumerate(lams):
            smin = smallest_singular(A - lam * np.eye(A.shape[0]))
            if not smin > EIG_TOL * scale:
                raise InstanceError(
                    "lambda_not_in_spec_A",
                    f"lambda_{i + 1} = {lam} is (numerically) an eigenvalue of the "
                    f"complement block: s_min(A - lambda I) = {smin:.3e}",
                )

    @property
    def k(self) -> int:
        return len(self.lambdas)


def _southeast_blocks(K, sizes, target):
    perm = PermutationSpec(K.shape[0], sizes, (target, len(sizes)))
    Kp = apply_symmetric_permutation(K, perm)
    n = K.shape[0] - sizes[target - 1]
    return Kp[:n, :n], Kp[:n, n:], Kp[n:, :n], Kp[n:, n:], perm


def to_southeast(inst: ProblemInstance) -> SouthEastForm:
    A, B, C, D, perm = _southeast_blocks(inst.K, inst.block_sizes, inst.target_block)
    return SouthEastForm(A.copy(), B.copy(), C.copy(), D.copy(), perm)


class GammaPoint:
    """Complex coupling parameters ``gamma_ij`` for ``1 <= i < j <= k``.

    Stored in row-major pair order (1,2), (1,3), ..., (1,k), (2,3), ...;
    indexing uses 1-based pairs, ``g[1, 3]``.  The real coordinate vector
    used by the optimizer interleaves real and imaginary parts.
    """

    __slots__ = ("k", "values")

    def __init__(self, k, values=None):
        self.k = int(k)
        npairs = self.k * (self.k - 1) // 2
        if values is None:
            vals = np.zeros(npairs, dtype=np.complex128)
        else:
            vals = np.array(values, dtype=np.complex128).reshape(-1)
        if vals.shape != (npairs,):
            raise ValueError(f"k={self.k} needs {npairs} gammas, got {vals.size}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("gamma entries must be finite")
        vals.setflags(write=False)
        self.values = vals

    @staticmethod
    def pairs_for(k):
        return [(i, j) for i in range(1, k + 1) for j in range(i + 1, k + 1)]

    @property
    def pairs(self):
        return self.pairs_for(self.k)

    @classmethod
    def from_mapping(cls, k, mapping):
        g = np.zeros(k * (k - 1) // 2, dtype=np.complex128)
        index = {p: n for n, p in enumerate(cls.pairs_for(k))}
        for (i, j), val in mapping.items():
            if (i, j) not in index:
                raise KeyError(f"gamma pair {(i, j)} invalid for k={k}")
            g[index[(i, j)]] = val
        return cls(k, g)

    @classmethod
    def from_real(cls, k, x):
        x = np.asarray(x, dtype=float)
        return cls(k, x[0::2] + 1j * x[1::2])

    def to_real(self) -> np.ndarray:
        out = np.empty(2 * self.values.size)
        out[0::2] = self.values.real
        out[1::2] = self.values.imag
        return out

    def as_matrix(self) -> np.ndarray:
        """k x k strictly upper-triangular array with ``G[i-1, j-1] = gamma_ij``."""
        G = np.zeros((self.k, self.k), dtype=np.complex128)
        if self.k > 1:
            G[np.triu_indices(self.k, 1)] = self.values
        return G

    def __getitem__(self, pair):
        i, j = pair
        if not 1 <= i < j <= self.k:
            raise KeyError(pair)
        return complex(self.as_matrix()[i - 1, j - 1])

    def __add__(self, other):
        return GammaPoint(self.k, self.values + other.values)

    def scaled(self, t):
        return GammaPoint(self.k, t * self.values)

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))

    def to_dict(self):
        return {f"{i},{j}": complex(v) for (i, j), v in zip(self.pairs, self.values)}

    def __eq__(self, other):
        return (
            isinstance(other, GammaPoint)
            and self.k == other.k
            and np.array_equal(self.values, other.values)
        )

    def __repr__(self):
        inner = ", ".join(f"g{i}{j}={v:.6g}" for (i, j), v in zip(self.pairs, self.values))
        return f"GammaPoint(k={self.k}, {inner})"


def _check_gamma(lambdas, g):
    if g.k != len(lambdas):
        raise ValueError(f"gamma point has k={g.k} but {len(lambdas)} eigenvalues given")


def _upper_structured(T, lambdas, G):
    """[T - lambda_i I on the diagonal, gamma_ij I above]."""
    k, l = len(lambdas), T.shape[0]
    I = np.eye(l)
    Q = np.zeros((k * l, k * l), dtype=np.complex128)
    for i in range(k):
        Q[i * l:(i + 1) * l, i * l:(i + 1) * l] = T - lambdas[i] * I
        for j in range(i + 1, k):
            Q[i * l:(i + 1) * l, j * l:(j + 1) * l] = G[i, j] * I
    return Q


@dataclass
class SkIntermediates:
    calA: np.ndarray
    calB: np.ndarray
    calC: np.ndarray
    calX: np.ndarray
    calA_pinv: Optional[np.ndarray] = None
    Mgamma: Optional[np.ndarray] = None
    Ngamma: Optional[np.ndarray] = None
    Sk: Optional[np.ndarray] = None


def build_structured(se: SouthEastForm, lambdas, g: GammaPoint, X=None) -> SkIntermediates:
    _check_gamma(lambdas, g)
    k = len(lambdas)
    G = g.as_matrix()
    X = se.D if X is None else np.asarray(X, dtype=np.complex128)
    return SkIntermediates(
        calA=_upper_structured(se.A, lambdas, G),
        calB=np.kron(np.eye(k), se.B),
        calC=np.kron(np.eye(k), se.C),
        calX=_upper_structured(X, lambdas, G),
    )


def build_q_t(T, lambdas, g: GammaPoint) -> np.ndarray:
    """``Q_T(gamma)``: T - lambda_i I on the diagonal, gamma_ij I above."""
    T = as_cmatrix(T, "T")
    if T.shape[0] != T.shape[1]:
        raise ValueError("T must be square")
    _check_gamma(lambdas, g)
    return _upper_structured(T, [complex(x) for x in lambdas], g.as_matrix())


def build_sk_pinv(se: SouthEastForm, lambdas, g: GammaPoint, X=None, rank_tol=None) -> SkIntermediates:
    """``S_k`` from the generic formula with an SVD pseudoinverse for every dagger.

    ``S = (I - N N^+)(calX - calC calA^+ calB)(I - M^+ M)`` with
    ``M = (I - calA calA^+) calB`` and ``N = calC (I - calA^+ calA)``.
    """
    parts = build_structured(se, lambdas, g, X)
    kn = parts.calA.shape[0]
    km = parts.calX.shape[0]
    Ap = pinv(parts.calA, rank_tol)
    I_n = np.eye(kn)
    I_m = np.eye(km)
    M = (I_n - parts.calA @ Ap) @ parts.calB
    N = parts.calC @ (I_n - Ap @ parts.calA)
    # When calA is invertible M and N are rounding noise of size
    # ~ eps * cond(calA) * ||calB||, so the cutoff is scaled by cond(calA).
    tol = default_rank_tol((km, km)) if rank_tol is None else rank_tol
    cond = spectral_norm(parts.calA) * spectral_norm(Ap) if np.any(Ap) else 1.0
    Mp = pinv(M, tol, scale=cond * spectral_norm(parts.calB))
    Np = pinv(N, tol, scale=cond * spectral_norm(parts.calC))
    core = parts.calX - parts.calC @ Ap @ parts.calB
    parts.calA_pinv = Ap
    parts.Mgamma = M
    parts.Ngamma = N
    parts.Sk = (I_m - N @ Np) @ core @ (I_m - Mp @ M)
    return parts


class SkEvaluator:
    """Resolvent cache for repeated ``S_k(D, gamma)`` evaluations at fixed lambdas.

    Precomputes ``R_i = (A - lambda_i I)^-1``, ``R_i B`` and the diagonal
    blocks ``M_i = (D - lambda_i I) - C R_i B``; every gamma evaluation then
    only runs the upper-triangular resolvent recursion.
    """

    def __init__(self, se: SouthEastForm, lambdas):
        self.se = se
        self.lambdas = tuple(complex(x) for x in lambdas)
        self.k = len(self.lambdas)
        n, m = se.n, se.m
        I_n, I_m = np.eye(n), np.eye(m)
        self.warnings = []
        self.R = []
        for i, lam in enumerate(self.lambdas):
            Ai = se.A - lam * I_n
            cond = np.linalg.cond(Ai)
            if not cond < 1.0 / EIG_TOL:
                msg = f"A - lambda_{i + 1} I is ill-conditioned (cond ~ {cond:.2e})"
                self.warnings.append(msg)
                warnings.warn(msg, IllConditionedResolventWarning, stacklevel=2)
            self.R.append(np.linalg.solve(Ai, I_n.astype(np.complex128)))
        self.RB = [R @ se.B for R in self.R]
        self.M = [(se.D - lam * I_m) - se.C @ RB for lam, RB in zip(self.lambdas, self.RB)]

    def _check(self, g):
        _check_gamma(self.lambdas, g)
        return g.as_matrix()

    def calA_pinv_blocks(self, g: GammaPoint):
        """Blocks ``a_ij`` of ``calA^+``: ``a_ij = -R_i sum_{r=i+1..j} gamma_ir a_rj``."""
        G = self._check(g)
        k = self.k
        a = {}
        for j in range(k):
            a[j, j] = self.R[j]
            for i in range(j - 1, -1, -1):
                acc = sum(G[i, r] * a[r, j] for r in range(i + 1, j + 1))
                a[i, j] = -self.R[i] @ acc
        return a

    def calA_pinv(self, g: GammaPoint) -> np.ndarray:
        n, k = self.se.n, self.k
        a = self.calA_pinv_blocks(g)
        out = np.zeros((k * n, k * n), dtype=np.complex128)
        for (i, j), blk in a.items():
            out[i * n:(i + 1) * n, j * n:(j + 1) * n] = blk
        return out

    def column_solutions(self, g: GammaPoint, G=None):
        """``Y_ij = a_ij B`` for ``i <= j`` (the block columns of ``calA^+ calB``)."""
        if G is None:
            G = self._check(g)
        k = self.k
        Y = {}
        for j in range(k):
            Y[j, j] = self.RB[j]
            for i in range(j - 1, -1, -1):
                acc = G[i, i + 1] * Y[i + 1, j]
                for r in range(i + 2, j + 1):
                    acc = acc + G[i, r] * Y[r, j]
                Y[i, j] = -self.R[i] @ acc
        return Y

    def sk(self, g: GammaPoint) -> np.ndarray:
        """``S_k(D, gamma)``: blocks ``M_i`` on the diagonal, ``gamma_ij I - C a_ij B`` above."""
        G = self._check(g)
        k, m = self.k, self.se.m
        Y = self.column_solutions(g, G)
        C = self.se.C
        I_m = np.eye(m)
        S = np.zeros((k * m, k * m), dtype=np.complex128)
        for i in range(k):
            S[i * m:(i + 1) * m, i * m:(i + 1) * m] = self.M[i]
            for j in range(i + 1, k):
                S[i * m:(i + 1) * m, j * m:(j + 1) * m] = G[i, j] * I_m - C @ Y[i, j]
        return S

    def sk_at(self, g: GammaPoint, X) -> np.ndarray:
        """``S_k(X, gamma) = S_k(D, gamma) + diag(X - D, ..., X - D)``."""
        dX = np.asarray(X, dtype=np.complex128) - self.se.D
        return self.sk(g) + np.kron(np.eye(self.k), dX)

    def w_vectors(self, g: GammaPoint, v_blocks):
        """``w = -calA^+ calB v`` split into ``w_1..w_k`` (each of length n)."""
        Y = self.column_solutions(g)
        k = self.k
        return [-sum(Y[i, j] @ v_blocks[j] for j in range(i, k)) for i in range(k)]


def pinv_calA_recursive(se: SouthEastForm, lambdas, g: GammaPoint) -> np.ndarray:
    return SkEvaluator(se, lambdas).calA_pinv(g)


class _PBlocks(dict):
    """Lazy ``P_{a1..at} = C R_a1 R_a2 ... R_at B`` over strictly increasing keys."""

    def __init__(self, ev: SkEvaluator):
        super().__init__()
        self._ev = ev

    def __missing__(self, key):
        key = tuple(key)
        if len(key) < 2 or any(b <= a for a, b in zip(key, key[1:])):
            raise KeyError(f"P blocks need strictly increasing index sequences, got {key}")
        if not all(1 <= a <= self._ev.k for a in key):
            raise KeyError(key)
        ev = self._ev
        acc = ev.RB[key[-1] - 1]
        for a in reversed(key[:-1]):
            acc = ev.R[a - 1] @ acc
        val = ev.se.C @ acc
        self[key] = val
        return val


@dataclass
class BlockFormulaParts:
    """``M_i``, ``N_ij = I + C R_i R_j B`` and lazily evaluated chain products ``P``.

    Keys are 1-based: ``N_blocks[1, 3]``, ``P_blocks[1, 2, 3]``.
    """

    M_blocks: list
    N_blocks: dict
    P_blocks: dict = field(repr=False)


def block_formula_parts(se: SouthEastForm, lambdas, evaluator=None) -> BlockFormulaParts:
    ev = evaluator or SkEvaluator(se, lambdas)
    P = _PBlocks(ev)
    I_m = np.eye(se.m)
    N = {}
    for i, j in GammaPoint.pairs_for(ev.k):
        N[i, j] = I_m + P[i, j]
    return BlockFormulaParts(list(ev.M), N, P)


def sk_from_parts(parts: BlockFormulaParts, g: GammaPoint) -> np.ndarray:
    """Expand ``S_k`` as a sum over index chains ``i = c0 < c1 < ... < ct = j``.

    ``s_ij = gamma_ij N_ij + sum_{t>=2} (-1)^(t+1) gamma_{c0c1}...gamma_{c(t-1)ct} P_{c0..ct}``.
    Exponential in k; intended for small k as an independent check.
    """
    k = g.k
    G = g.as_matrix()
    m = parts.M_blocks[0].shape[0]
    S = np.zeros((k * m, k * m), dtype=np.complex128)
    for i in range(1, k + 1):
        S[(i - 1) * m:i * m, (i - 1) * m:i * m] = parts.M_blocks[i - 1]
        for j in range(i + 1, k + 1):
            blk = G[i - 1, j - 1] * parts.N_blocks[i, j]
            inner = range(i + 1, j)
            for t in range(1, j - i):
                for mid in itertools.combinations(inner, t):
                    chain = (i,) + mid + (j,)
                    coef = np.prod([G[a - 1, b - 1] for a, b in zip(chain, chain[1:])])
                    blk = blk + (-1) ** len(mid) * coef * parts.P_blocks[chain]
            S[(i - 1) * m:i * m, (j - 1) * m:j * m] = blk
    return S


def build_sk_explicit(se: SouthEastForm, lambdas, g: GammaPoint, evaluator=None):
    """``S_k(D, gamma)`` from the resolvent recursion, plus its block formula parts."""
    ev = evaluator or SkEvaluator(se, lambdas)
    return ev.sk(g), block_formula_parts(se, lambdas, ev)


def rho(se: SouthEastForm, lambdas, g: GammaPoint, rank_tol=None) -> int:
    """``rank [calA, calB] + rank [calA; calC] - rank calA``."""
    parts = build_structured(se, lambdas, g)
    A, B, C = parts.calA, parts.calB, parts.calC
    return (
        numerical_rank(np.hstack([A, B]), rank_tol)
        + numerical_rank(np.vstack([A, C]), rank_tol)
        - numerical_rank(A, rank_tol)
    )

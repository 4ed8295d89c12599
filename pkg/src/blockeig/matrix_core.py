"""Dense complex matrix substrate: SVD, pseudoinverse, norms, block permutations.

Everything here is a thin, validated layer over LAPACK (through numpy/scipy).
Functions are pure and never mutate their inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

__all__ = [
    "SVDError",
    "SvdResult",
    "PermutationSpec",
    "as_cmatrix",
    "default_rank_tol",
    "svd",
    "singular_values",
    "pinv",
    "numerical_rank",
    "spectral_norm",
    "smallest_singular",
    "apply_symmetric_permutation",
    "unapply_symmetric_permutation",
]


class SVDError(ArithmeticError):
    """Raised when no LAPACK driver manages to converge on an SVD.

    ``info`` carries the LAPACK status, which for the bidiagonal QR
    drivers is the number of superdiagonals that failed to converge.
    """

    def __init__(self, msg, info=None):
        super().__init__(msg)
        self.info = info


def as_cmatrix(m, name="matrix") -> np.ndarray:
    """Return `m` as a 2-D complex128 array, rejecting empty or non-finite input."""
    a = np.asarray(m)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {a.shape}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"{name} must have at least one row and column")
    a = a.astype(np.complex128, copy=False)
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def default_rank_tol(shape) -> float:
    return 1e-12 * max(shape)


@dataclass(frozen=True)
class SvdResult:
    """Full SVD ``m = left_vectors @ diag(singular_values) @ right_vectors^*``."""

    singular_values: np.ndarray
    left_vectors: np.ndarray
    right_vectors: np.ndarray

    def triplet(self, index):
        """Singular triplet ``(s, u, v)`` at 0-based `index` in descending order."""
        return (
            float(self.singular_values[index]),
            self.left_vectors[:, index],
            self.right_vectors[:, index],
        )


def _lapack_svd(a, compute_uv):
    # gesdd first (fast); gesvd is slower but converges in cases gesdd does not.
    try:
        return np.linalg.svd(a, full_matrices=True, compute_uv=compute_uv)
    except np.linalg.LinAlgError:
        pass
    try:
        return scipy.linalg.svd(
            a, full_matrices=True, compute_uv=compute_uv, lapack_driver="gesvd"
        )
    except np.linalg.LinAlgError as exc:
        info = None
        for tok in str(exc).split():
            if tok.isdigit():
                info = int(tok)
        raise SVDError(f"SVD did not converge on a {a.shape} matrix", info) from exc


def svd(m) -> SvdResult:
    a = as_cmatrix(m)
    u, s, vh = _lapack_svd(a, True)
    return SvdResult(s, u, vh.conj().T)


def singular_values(m) -> np.ndarray:
    """Singular values only, in descending order."""
    return _lapack_svd(as_cmatrix(m), False)


def _cutoff(s, rank_tol, scale):
    ref = s[0] if s.size else 0.0
    if scale is not None:
        ref = max(ref, scale)
    return rank_tol * ref


def pinv(m, rank_tol=None, scale=None) -> np.ndarray:
    """Moore-Penrose pseudoinverse by truncated SVD.

    Singular values at or below ``rank_tol * s1`` are discarded.  Passing
    `scale` replaces ``s1`` by ``max(s1, scale)``; use it when `m` is a
    residual that should be exactly zero, so rounding noise is not inverted.
    """
    a = as_cmatrix(m)
    if rank_tol is None:
        rank_tol = default_rank_tol(a.shape)
    if rank_tol <= 0:
        raise ValueError("rank_tol must be positive")
    u, s, vh = _lapack_svd(a, True)
    keep = s > _cutoff(s, rank_tol, scale)
    r = int(np.count_nonzero(keep))
    if r == 0:
        return np.zeros((a.shape[1], a.shape[0]), dtype=np.complex128)
    return (vh[:r].conj().T / s[:r]) @ u[:, :r].conj().T


def numerical_rank(m, rank_tol=None, scale=None) -> int:
    a = as_cmatrix(m)
    if rank_tol is None:
        rank_tol = default_rank_tol(a.shape)
    s = singular_values(a)
    return int(np.count_nonzero(s > _cutoff(s, rank_tol, scale)))


def spectral_norm(m) -> float:
    return float(singular_values(m)[0])


def smallest_singular(m) -> float:
    """Smallest singular value, ``s_min(m)`` (min(rows, cols)-th)."""
    return float(singular_values(m)[-1])


@dataclass(frozen=True)
class PermutationSpec:
    """Symmetric block permutation that exchanges two diagonal blocks.

    `block_sizes` describes the partition of a ``size x size`` matrix and
    `swapped_pair` holds the 1-based indices of the two exchanged blocks.
    ``index_map[p]`` is the original row/column index that lands at
    position ``p``.  When the two swapped blocks have equal size the map
    is an involution; otherwise invert it with
    :func:`unapply_symmetric_permutation`.
    """

    size: int
    block_sizes: tuple
    swapped_pair: tuple
    index_map: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        sizes = tuple(int(b) for b in self.block_sizes)
        if any(b < 1 for b in sizes) or sum(sizes) != self.size:
            raise ValueError(f"block sizes {sizes} do not partition {self.size}")
        i, j = (int(x) for x in self.swapped_pair)
        if not (1 <= i <= len(sizes) and 1 <= j <= len(sizes)):
            raise ValueError(f"swapped pair {(i, j)} out of range")
        object.__setattr__(self, "block_sizes", sizes)
        object.__setattr__(self, "swapped_pair", (i, j))
        starts = np.concatenate([[0], np.cumsum(sizes)])
        order = list(range(len(sizes)))
        order[i - 1], order[j - 1] = order[j - 1], order[i - 1]
        idx = np.concatenate([np.arange(starts[b], starts[b + 1]) for b in order])
        idx.setflags(write=False)
        object.__setattr__(self, "index_map", idx)

    @classmethod
    def identity(cls, block_sizes):
        n = len(block_sizes)
        return cls(int(sum(block_sizes)), tuple(block_sizes), (n, n))

    @property
    def is_identity(self) -> bool:
        return bool(np.array_equal(self.index_map, np.arange(self.size)))

    @property
    def inverse_map(self) -> np.ndarray:
        return np.argsort(self.index_map)

    @property
    def is_involution(self) -> bool:
        return bool(np.array_equal(self.index_map[self.index_map], np.arange(self.size)))

    def permuted_block_sizes(self) -> tuple:
        sizes = list(self.block_sizes)
        i, j = self.swapped_pair
        sizes[i - 1], sizes[j - 1] = sizes[j - 1], sizes[i - 1]
        return tuple(sizes)


def _check_perm(a, p):
    if a.shape != (p.size, p.size):
        raise ValueError(f"permutation of size {p.size} cannot act on shape {a.shape}")


def apply_symmetric_permutation(m, p: PermutationSpec) -> np.ndarray:
    """``P m P^T``: entry ``(i, j)`` of the result is ``m[p(i), p(j)]``."""
    a = np.asarray(m)
    _check_perm(a, p)
    idx = p.index_map
    return a[np.ix_(idx, idx)]


def unapply_symmetric_permutation(m, p: PermutationSpec) -> np.ndarray:
    a = np.asarray(m)
    _check_perm(a, p)
    inv = p.inverse_map
    return a[np.ix_(inv, inv)]

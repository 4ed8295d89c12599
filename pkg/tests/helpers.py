"""Shared instance generators and reference data for the tests."""

import warnings

import numpy as np

from blockeig.io import load_config
from blockeig.matrix_core import smallest_singular, spectral_norm
from blockeig.structured import InstanceError, ProblemInstance

SQRT3 = np.sqrt(3.0)
EXAMPLE_LAMBDAS = (1.0, 2 - 1j, SQRT3)

# 4-digit values printed alongside the worked 6x6 example (target block 2)
PRINTED_DELTA = np.array(
    [
        [-4.6844 + 0.1673j, 0.6878 - 0.0261j, -1.2805 - 0.2018j],
        [1.2046 - 0.2466j, -0.4433 + 0.3773j, -4.7156 + 0.1950j],
        [0.7989 - 0.0625j, 4.7596 - 0.8124j, -0.3161 - 0.2655j],
    ]
)
PRINTED_U = np.array(
    [
        [-0.0462 + 0.0022j, 0.2930 - 0.0773j, -0.1985 + 0.0054j],
        [0.1694 - 0.0160j, 0.4330 - 0.0922j, -0.4832 + 0.0987j],
        [0.2684 - 0.0456j, 0.5515 - 0.0892j, -0.1097 + 0.0114j],
    ]
)
PRINTED_V = np.array(
    [
        [-0.1307, 0.0804 - 0.0554j, -0.0481 - 0.0021j],
        [-0.2446 + 0.0113j, -0.5444 + 0.0294j, 0.0848 - 0.0209j],
        [0.1661 - 0.0236j, 0.5233 - 0.1391j, -0.5258 + 0.0918j],
    ]
)
PRINTED_EXTRA_SPECTRUM = (-0.7516 + 12.0308j, -0.5027 - 11.5211j, 10.0784 + 0.7695j)
ALPHA_EXAMPLE = 4.9119


def example_instance():
    return load_config("@example6").instance


def example_matrix_as_printed():
    K = example_instance().K.copy()
    K[0, 2] = 4.0
    return K


def random_instance(rng, k, n, m, sizes=None, target=None, min_sep=0.05, complex_lambdas=True, max_tries=50):
    """Random complex instance with ``s_min(A - lambda I) >= min_sep * ||A||``.

    Default layout is two blocks ``(n, m)`` targeting the second.  With
    explicit `sizes` the target block must have size m and the others sum to n.
    """
    if sizes is None:
        sizes, target = (n, m), 2
    d = sum(sizes)
    for _ in range(max_tries):
        K = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        lam = rng.normal(size=k) + (1j * rng.normal(size=k) if complex_lambdas else 0)
        try:
            inst = ProblemInstance(K, tuple(sizes), target, tuple(lam))
        except InstanceError:
            continue
        from blockeig.structured import to_southeast

        se = to_southeast(inst)
        nA = spectral_norm(se.A)
        if all(smallest_singular(se.A - l * np.eye(se.n)) >= min_sep * nA for l in inst.lambdas):
            return inst
    raise RuntimeError("could not draw a well-separated instance")


def instance_grid(seed, count, kmax=4, nmax=5, mmax=5):
    """`count` random valid instances with k in 1..kmax and n, m in 1..5 (k <= m)."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        k = int(rng.integers(1, kmax + 1))
        m = int(rng.integers(k, mmax + 1))
        n = int(rng.integers(1, nmax + 1))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            out.append(random_instance(rng, k, n, m))
    return out


def companion(roots):
    """Companion matrix whose eigenvalues are `roots`."""
    c = np.poly(roots)
    l = len(roots)
    T = np.zeros((l, l), dtype=np.complex128)
    T[1:, :-1] = np.eye(l - 1)
    T[:, -1] = -c[::-1][:-1]
    return T


# criterion number -> one-line verdict, filled by test_acceptance and echoed
# in the terminal summary
ACCEPTANCE_LINES = {}

"""The lower-bound objective ``s_kappa(gamma)`` and its maximization.

``s_kappa(gamma)`` is the ``k(m-1)+1``-th largest singular value of
``S_k(D, gamma)``.  Every gamma gives a lower bound on the norm of any
admissible perturbation; the maximizer ``gamma*`` gives the optimal one.

The search is a multistart Nelder-Mead over the real and imaginary parts of
the gammas, followed by a Newton polish of the first-order condition
``Re(u^* dS/dt v) = 0``.  Singular values are invariant under the phase
change ``gamma_ij -> gamma_ij exp(i(theta_i - theta_j))`` (a unitary
similarity of ``S_k``), so the search runs on the gauge slice where every
superdiagonal ``gamma_{i,i+1}`` is real: ``(k-1)^2`` real coordinates
instead of ``k(k-1)``, and no flat directions to stall the simplex.

Value-only search stalls with gradients around 1e-7, too coarse for the
singular-vector certificates built downstream; the polish pushes them to
rounding level.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy.optimize import minimize

from .matrix_core import singular_values, svd
from .structured import GammaPoint, SkEvaluator, SouthEastForm, kappa_index

__all__ = [
    "SIMPLICITY_TOL",
    "OptimizerConfig",
    "ObjectiveEval",
    "MaximizerResult",
    "eval_objective",
    "objective_gradient",
    "check_stationarity",
    "maximize",
    "polish_stationary",
    "sweep_slice",
]

log = logging.getLogger(__name__)

SIMPLICITY_TOL = 1e-8


@dataclass(frozen=True)
class OptimizerConfig:
    seed: int = 0
    restarts: int = 8
    xtol: float = 1e-10
    ftol: float = 1e-12
    max_iters: Optional[int] = None  # per restart; None means 2000 * dim
    init_radius: float = 10.0
    polish: bool = True
    workers: int = 1

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.xtol <= 0 or self.ftol <= 0:
            raise ValueError("xtol and ftol must be positive")
        if self.init_radius <= 0:
            raise ValueError("init_radius must be positive")
        if self.max_iters is not None and self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def iteration_cap(self, dim) -> int:
        return self.max_iters if self.max_iters is not None else 2000 * dim


@dataclass(frozen=True)
class ObjectiveEval:
    """``s_kappa`` at one gamma with its unit singular pair and neighbour gap.

    `gap` is ``min(s_{kappa-1} - s_kappa, s_kappa - s_{kappa+1}) / s_1``
    over the neighbours that exist (``inf`` when there are none).
    """

    gamma: GammaPoint
    value: float
    kappa_index: int
    left_vec: np.ndarray
    right_vec: np.ndarray
    gap: float
    sk_norm: float
    singular_values: np.ndarray = field(repr=False)

    @property
    def simple(self) -> bool:
        return self.gap > SIMPLICITY_TOL


@dataclass
class MaximizerResult:
    gamma_star: GammaPoint
    alpha_star: float
    eval: ObjectiveEval
    trace: List[Tuple[int, float]]
    restarts_used: int
    simple: bool
    converged: bool
    restart_values: List[float] = field(default_factory=list)
    stationarity: float = 0.0
    polish_steps: int = 0
    gradient_norm: float = 0.0


def _evaluator(se, lambdas, evaluator):
    return evaluator if evaluator is not None else SkEvaluator(se, lambdas)


def eval_objective(se: SouthEastForm, lambdas, g: GammaPoint, evaluator=None) -> ObjectiveEval:
    ev = _evaluator(se, lambdas, evaluator)
    S = ev.sk(g)
    res = svd(S)
    s = res.singular_values
    kap = kappa_index(ev.k, se.m)
    val, u, v = res.triplet(kap - 1)
    gaps = []
    if kap >= 2:
        gaps.append(s[kap - 2] - s[kap - 1])
    if kap < s.size:
        gaps.append(s[kap - 1] - s[kap])
    s1 = float(s[0])
    if not gaps:
        gap = float("inf")
    else:
        gap = float(min(gaps) / s1) if s1 > 0 else 0.0
    return ObjectiveEval(g, val, kap, u, v, gap, s1, s)


def _value(ev, kap, g):
    return float(singular_values(ev.sk(g))[kap - 1])


class _Gauge:
    """Reduced real coordinates: superdiagonal gammas real, the rest complex."""

    def __init__(self, k):
        self.k = k
        self.pairs = GammaPoint.pairs_for(k)
        self.real_only = np.array([j == i + 1 for i, j in self.pairs])
        # positions of the reduced coordinates inside the full interleaved vector
        full = []
        for p, ro in enumerate(self.real_only):
            full.append(2 * p)
            if not ro:
                full.append(2 * p + 1)
        self.full_index = np.array(full, dtype=int)
        self.dim = len(full)

    def to_gamma(self, y):
        x = np.zeros(2 * len(self.pairs))
        x[self.full_index] = y
        return GammaPoint.from_real(self.k, x)

    def from_gamma(self, g):
        """Rotate phases so the superdiagonal is real, then drop its imaginary parts."""
        G = g.as_matrix()
        theta = np.zeros(self.k)
        for i in range(self.k - 1):
            z = G[i, i + 1]
            # theta_{i+1} chosen so gamma_{i,i+1} e^{i(theta_i - theta_{i+1})} is real
            theta[i + 1] = theta[i] + (np.angle(z) if z != 0 else 0.0)
        phase = np.exp(1j * (theta[:, None] - theta[None, :]))
        rotated = GammaPoint(self.k, (G * phase)[np.triu_indices(self.k, 1)])
        return rotated.to_real()[self.full_index]


def _d_sk(ev, g, pair_index, step=1.0):
    """Central difference of ``S_k`` along the real part of one gamma.

    ``S_k`` is affine in each single gamma_ij, so this is exact for any step.
    """
    e = np.zeros(g.values.size, dtype=np.complex128)
    e[pair_index] = step
    plus = ev.sk(GammaPoint(g.k, g.values + e))
    minus = ev.sk(GammaPoint(g.k, g.values - e))
    return (plus - minus) / (2.0 * step)


def objective_gradient(ev: SkEvaluator, e: ObjectiveEval, steps=None) -> np.ndarray:
    """``Re(u^* dS/dt v)`` for every real coordinate t (interleaved re/im)."""
    g = e.gamma
    npairs = g.values.size
    grad = np.empty(2 * npairs)
    u, v = e.left_vec, e.right_vec
    for p in range(npairs):
        h = 1.0 if steps is None else steps[p]
        z = u.conj() @ _d_sk(ev, g, p, h) @ v
        grad[2 * p] = z.real
        # d/d(Im gamma) = i * d/d(Re gamma) for a holomorphic S_k
        grad[2 * p + 1] = -z.imag
    return grad


def check_stationarity(se: SouthEastForm, lambdas, e: ObjectiveEval, evaluator=None) -> float:
    """Largest first-order residual ``|Re(u^* dS/dt v)|`` over real gamma coordinates."""
    if e.gamma.values.size == 0:
        return 0.0
    ev = _evaluator(se, lambdas, evaluator)
    steps = 1e-6 * (1.0 + np.abs(e.gamma.values))
    return float(np.max(np.abs(objective_gradient(ev, e, steps))))


def polish_stationary(ev: SkEvaluator, e: ObjectiveEval, gauge=None, max_steps=12):
    """Newton iteration on the gradient of ``s_kappa`` starting from `e`.

    Works in the reduced (gauge-fixed) coordinates, where the Hessian is
    generically nonsingular; it comes from central differences of the
    analytic gradient.  A step is kept only if the gradient shrinks and the
    value does not drop by more than its rounding noise.  Returns
    ``(eval, steps_taken, gradient_norm)``.
    """
    gauge = gauge or _Gauge(e.gamma.k)
    idx = gauge.full_index

    def at(y):
        return eval_objective(ev.se, ev.lambdas, gauge.to_gamma(y), ev)

    def grad(ee):
        return objective_gradient(ev, ee)[idx]

    best = at(gauge.from_gamma(e.gamma))
    best_grad = grad(best)
    taken = 0
    for _ in range(max_steps):
        gnorm = np.linalg.norm(best_grad)
        noise = 64 * np.finfo(float).eps * best.sk_norm
        if not best.simple or gnorm <= noise:
            break
        y = gauge.from_gamma(best.gamma)
        dim = y.size
        H = np.empty((dim, dim))
        for c in range(dim):
            h = 1e-5 * (1.0 + abs(y[c]))
            yp, ym = y.copy(), y.copy()
            yp[c] += h
            ym[c] -= h
            H[:, c] = (grad(at(yp)) - grad(at(ym))) / (2 * h)
        H = 0.5 * (H + H.T)
        step = -np.linalg.lstsq(H, best_grad, rcond=1e-10)[0]
        improved = False
        for _ in range(6):
            trial = at(y + step)
            tgrad = grad(trial)
            drop_ok = trial.value >= best.value - noise - 1e-14 * best.value
            if trial.simple and drop_ok and np.linalg.norm(tgrad) < gnorm:
                best, best_grad = trial, tgrad
                improved = True
                taken += 1
                break
            step = step / 2
        if not improved:
            break
    return best, taken, float(np.linalg.norm(best_grad))


def _start_points(cfg: OptimizerConfig, dim):
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(1)[0])
    pts = [np.zeros(dim)]
    for _ in range(cfg.restarts - 1):
        pts.append(rng.uniform(-cfg.init_radius, cfg.init_radius, dim))
    return pts


def _run_restart(ev, kap, gauge, x0, cfg):
    dim = x0.size
    edge = 0.1 * cfg.init_radius
    simplex = np.vstack([x0] + [x0 + edge * np.eye(dim)[c] for c in range(dim)])
    best = [-np.inf]

    def negf(x):
        val = _value(ev, kap, gauge.to_gamma(x))
        if val > best[0]:
            best[0] = val
        return -val

    trace = []

    def callback(xk):
        trace.append(best[0])

    res = minimize(
        negf,
        x0,
        method="Nelder-Mead",
        callback=callback,
        options=dict(
            maxiter=cfg.iteration_cap(dim),
            xatol=cfg.xtol,
            fatol=cfg.ftol,
            initial_simplex=simplex,
            adaptive=dim > 4,
        ),
    )
    return res.x, -float(res.fun), res.status == 0, trace


def maximize(se: SouthEastForm, lambdas, cfg: Optional[OptimizerConfig] = None, evaluator=None) -> MaximizerResult:
    cfg = cfg or OptimizerConfig()
    ev = _evaluator(se, lambdas, evaluator)
    k = ev.k
    kap = kappa_index(k, se.m)
    gauge = _Gauge(k)
    dim = gauge.dim
    if dim == 0:
        e = eval_objective(se, lambdas, GammaPoint(k), ev)
        return MaximizerResult(e.gamma, e.value, e, [], 0, e.simple, True, [e.value])

    starts = _start_points(cfg, dim)
    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            runs = list(pool.map(lambda x0: _run_restart(ev, kap, gauge, x0, cfg), starts))
    else:
        runs = [_run_restart(ev, kap, gauge, x0, cfg) for x0 in starts]

    trace, running, it = [], -np.inf, 0
    for _, _, _, rtrace in runs:
        for val in rtrace:
            it += 1
            running = max(running, val)
            trace.append((it, running))
    values = [r[1] for r in runs]
    # highest value wins; ties go to the earliest restart
    best_idx = max(range(len(runs)), key=lambda i: (values[i], -i))
    x, _, nm_converged, _ = runs[best_idx]
    log.debug("restart values %s, best restart %d", values, best_idx)

    e = eval_objective(se, lambdas, gauge.to_gamma(x), ev)
    steps = 0
    gnorm = float(np.linalg.norm(objective_gradient(ev, e)))
    if cfg.polish and e.simple:
        e, steps, gnorm = polish_stationary(ev, e, gauge)
    stat = check_stationarity(se, lambdas, e, ev)
    # A stalled simplex still counts when the polish reached a stationary point.
    converged = nm_converged or gnorm <= 1e-10 * max(1.0, e.sk_norm)
    if not converged:
        log.warning("maximizer hit the iteration cap and the polish did not reach stationarity")
    return MaximizerResult(
        gamma_star=e.gamma,
        alpha_star=e.value,
        eval=e,
        trace=trace,
        restarts_used=len(runs),
        simple=e.simple,
        converged=bool(converged),
        restart_values=values,
        stationarity=stat,
        polish_steps=steps,
        gradient_norm=gnorm,
    )


def sweep_slice(se: SouthEastForm, lambdas, base: GammaPoint, direction: GammaPoint, t_grid, evaluator=None):
    """``[(t, s_kappa(base + t * direction)) for t in t_grid]``."""
    if direction.values.size and not np.any(direction.values):
        raise ValueError("sweep direction must be nonzero")
    ev = _evaluator(se, lambdas, evaluator)
    kap = kappa_index(ev.k, se.m)
    return [(float(t), _value(ev, kap, base + direction.scaled(t))) for t in t_grid]

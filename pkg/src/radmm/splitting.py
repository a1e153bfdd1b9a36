"""Operator-splitting primitives.

Proximal and reflective operators, the Krasnosel'skii-Mann averaging step and
the relaxed Peaceman-Rachford solver for ``min f(x) + g(x)``. Functions enter
only through their proximal maps.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .exceptions import DomainError, ParameterError


@dataclass(frozen=True)
class ProxFunction:
    """Closed proper convex function known through its proximal map.

    Parameters
    ----------
    prox_map : callable
        ``prox_map(lam, v)`` returns ``argmin_x f(x) + ||x - v||^2 / (2 lam)``.
    value : callable, optional
        ``value(x)`` evaluates ``f`` (may return ``inf`` off its domain).
    name : str, optional
        Label used in reprs.
    """

    prox_map: Callable[[float, np.ndarray], np.ndarray]
    value: Optional[Callable[[np.ndarray], float]] = None
    name: str = "f"

    def __call__(self, x):
        if self.value is None:
            raise NotImplementedError(f"{self.name} has no value oracle")
        return self.value(np.asarray(x, dtype=float))


def zero_function():
    """The function identically equal to zero; its prox is the identity."""
    return ProxFunction(lambda lam, v: np.array(v, dtype=float, copy=True),
                        lambda x: 0.0, name="zero")


def quadratic_function(Q, b=None, c=0.0):
    """``f(x) = x^T Q x / 2 + b^T x + c`` with ``Q`` symmetric PSD.

    A scalar ``Q`` is treated as a 1x1 matrix. The prox solves
    ``(lam Q + I) x = v - lam b`` exactly.
    """
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    n = Q.shape[0]
    b = np.zeros(n) if b is None else np.atleast_1d(np.asarray(b, dtype=float))
    eye = np.eye(n)

    def prox_map(lam, v):
        v = np.atleast_1d(np.asarray(v, dtype=float))
        if n == 1:
            return (v - lam * b) / (lam * Q[0, 0] + 1.0)
        return np.linalg.solve(lam * Q + eye, v - lam * b)

    def value(x):
        x = np.atleast_1d(x)
        return float(0.5 * x @ Q @ x + b @ x + c)

    return ProxFunction(prox_map, value, name="quadratic")


def subspace_indicator(basis):
    """Indicator of the column span of ``basis``; its prox is the projection.

    ``subspace_indicator([[1], [1]])`` is the indicator of the diagonal
    ``{y : y_1 = y_2}``.
    """
    B = np.atleast_2d(np.asarray(basis, dtype=float))
    q, _ = np.linalg.qr(B)

    def prox_map(lam, v):
        v = np.asarray(v, dtype=float)
        return q @ (q.T @ v)

    def value(x):
        x = np.asarray(x, dtype=float)
        r = x - q @ (q.T @ x)
        return 0.0 if np.linalg.norm(r) <= 1e-12 * max(1.0, np.linalg.norm(x)) else np.inf

    return ProxFunction(prox_map, value, name="subspace_indicator")


def _check_point(v):
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise DomainError("point must be finite")
    return v


def _check_penalty(lam):
    if not lam > 0:
        raise ParameterError(f"penalty must be positive, got {lam!r}")


def prox(f, lam, v):
    """Proximal operator ``argmin_x f(x) + ||x - v||^2 / (2 lam)``."""
    _check_penalty(lam)
    v = _check_point(v)
    return np.asarray(f.prox_map(lam, v), dtype=float)


def reflect(f, lam, v):
    """Reflective operator ``2 prox(f, lam, v) - v``."""
    _check_penalty(lam)
    v = _check_point(v)
    return 2.0 * np.asarray(f.prox_map(lam, v), dtype=float) - v


def km_step(T, alpha, x):
    """One Krasnosel'skii-Mann step ``(1 - alpha) x + alpha T(x)``.

    Parameters
    ----------
    T : callable
        Operator on points.
    alpha : float
        Averaging coefficient in ``(0, 1]``.
    x : array_like
        Current point.
    """
    if not 0.0 < alpha <= 1.0:
        raise ParameterError(f"alpha must lie in (0, 1], got {alpha!r}")
    x = np.asarray(x, dtype=float)
    return (1.0 - alpha) * x + alpha * np.asarray(T(x), dtype=float)


@dataclass(frozen=True)
class SplittingParams:
    """Parameters of :func:`rprs_solve`.

    ``alpha = 1`` (pure Peaceman-Rachford) is accepted; convergence is only
    guaranteed for ``alpha < 1``.
    """

    alpha: float = 0.5
    rho: float = 1.0
    max_iters: int = 10_000
    tol: float = 1e-10

    def __post_init__(self):
        if not self.rho > 0:
            raise ParameterError(f"rho must be positive, got {self.rho!r}")
        if not 0.0 < self.alpha <= 1.0:
            raise ParameterError(f"alpha must lie in (0, 1], got {self.alpha!r}")
        if self.max_iters < 1:
            raise ParameterError("max_iters must be at least 1")
        if not self.tol > 0:
            raise ParameterError("tol must be positive")

    @property
    def guaranteed(self):
        return self.alpha < 1.0


@dataclass(frozen=True)
class RPRSState:
    """Iterate of the relaxed Peaceman-Rachford recursion at step ``k``.

    ``psi = prox_{rho g}(z)``, ``xi = prox_{rho f}(2 psi - z)`` and ``x`` is
    the primal readout ``psi``.
    """

    z: np.ndarray
    psi: np.ndarray
    xi: np.ndarray
    x: np.ndarray


@dataclass
class RPRSResult:
    x: np.ndarray
    z: np.ndarray
    status: str
    iterations: int
    trace: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)


def rprs_iterate(f, g, alpha, rho, z):
    """Half-steps at ``z``; returns ``(state, z_next)``."""
    psi = prox(g, rho, z)
    xi = prox(f, rho, 2.0 * psi - z)
    z_next = z + 2.0 * alpha * (xi - psi)
    return RPRSState(z=z, psi=psi, xi=xi, x=psi), z_next


def rprs_solve(f, g, params, z0, keep_trace=True):
    """Relaxed Peaceman-Rachford splitting for ``min f + g``.

    Iterates ``psi = prox_{rho g}(z)``, ``xi = prox_{rho f}(2 psi - z)``,
    ``z <- z + 2 alpha (xi - psi)`` until ``||z_{k+1} - z_k||_inf < tol`` and
    returns ``x = prox_{rho g}(z)`` at the last ``z``.

    Returns
    -------
    RPRSResult
        ``status`` is ``"converged"`` or ``"inconclusive"`` (iteration budget
        exhausted). ``metadata["guaranteed_region"]`` is False for
        ``alpha = 1``. ``trace`` holds one :class:`RPRSState` per step when
        ``keep_trace`` is set.
    """
    z = _check_point(z0).copy()
    trace = []
    status = "inconclusive"
    k = 0
    for k in range(1, params.max_iters + 1):
        state, z_next = rprs_iterate(f, g, params.alpha, params.rho, z)
        if keep_trace:
            trace.append(state)
        step = np.max(np.abs(z_next - z)) if z.size else 0.0
        z = z_next
        if not np.all(np.isfinite(z)):
            status = "diverged"
            break
        if step < params.tol:
            status = "converged"
            break
    meta = {"guaranteed_region": params.guaranteed}
    if not params.guaranteed:
        meta["note"] = "outside guaranteed region (alpha = 1)"
    return RPRSResult(x=prox(g, params.rho, z) if np.all(np.isfinite(z)) else z,
                      z=z, status=status, iterations=k, trace=trace, metadata=meta)

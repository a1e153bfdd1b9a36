"""Local cost functions and the centralized optimum.

A node's only job with its cost ``f_i`` is the primal update

    x_update(s, rho, d) = argmin_x f_i(x) - s^T x + (rho d / 2) ||x||^2

which for quadratics ``x^T Q x / 2 + b^T x + c`` is the linear solve
``(Q + rho d I) x = s - b``.

The scalar form ``a x^2 + b x + c`` corresponds to ``Q = 2a``; use
:meth:`QuadraticCost.from_scalar` rather than passing ``a`` as ``Q``.
"""

from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np

from . import _rng
from .exceptions import ParameterError


@runtime_checkable
class LocalCost(Protocol):
    dim: int

    def x_update(self, s, rho, degree): ...

    def value(self, x): ...


@dataclass(frozen=True, eq=False)
class QuadraticCost:
    """``f(x) = x^T Q x / 2 + b^T x + c``.

    ``c`` only affects :meth:`value`; it never enters an update.
    """

    Q: np.ndarray
    b: np.ndarray
    c: float = 0.0

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if Q.shape != (b.size, b.size):
            raise ParameterError(f"Q has shape {Q.shape}, b has size {b.size}")
        if not np.allclose(Q, Q.T, rtol=0, atol=1e-12 * max(1.0, np.abs(Q).max())):
            raise ParameterError("Q must be symmetric")
        Q.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", float(self.c))

    @classmethod
    def from_scalar(cls, a, b, c=0.0):
        """Scalar cost ``a x^2 + b x + c`` (so ``Q = 2a``)."""
        return cls(np.array([[2.0 * a]]), np.array([float(b)]), c)

    @property
    def dim(self):
        return self.b.size

    def x_update(self, s, rho, degree):
        return quadratic_x_update(self, s, rho, degree)

    def value(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return float(0.5 * x @ self.Q @ x + self.b @ x + self.c)

    def to_dict(self):
        return {"Q": self.Q.tolist(), "b": self.b.tolist(), "c": self.c}


def quadratic_x_update(cost, s, rho, degree):
    """Solve ``(Q + rho d I) x = s - b``.

    In one dimension this is ``(s - b) / (Q + rho d)``, i.e. the familiar
    ``(sum_j z_ji - b_i) / (2 a_i + rho |N_i|)``.
    """
    if not rho > 0:
        raise ParameterError(f"rho must be positive, got {rho!r}")
    if degree < 1:
        raise ParameterError(f"degree must be >= 1, got {degree!r}")
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if cost.dim == 1:
        return (s - cost.b) / (cost.Q[0, 0] + rho * degree)
    M = cost.Q + (rho * degree) * np.eye(cost.dim)
    try:
        return np.linalg.solve(M, s - cost.b)
    except np.linalg.LinAlgError as exc:  # excluded by Q PSD
        raise RuntimeError("singular x-update system") from exc


def centralized_optimum(costs):
    """Minimiser of ``sum_i f_i``, ``-(sum Q_i)^{-1} sum b_i``."""
    Qs = sum(c.Q for c in costs)
    bs = sum(c.b for c in costs)
    if Qs.shape == (1, 1):
        if not Qs[0, 0] > 0:
            raise ParameterError("optimum not unique: aggregate curvature is zero")
        return -bs / Qs[0, 0]
    if np.linalg.eigvalsh(Qs).min() <= 1e-14 * max(1.0, np.abs(Qs).max()):
        raise ParameterError("optimum not unique: aggregate Q is singular")
    return -np.linalg.solve(Qs, bs)


DEFAULT_A_RANGE = (0.5, 2.0)
DEFAULT_B_RANGE = (-5.0, 5.0)
DEFAULT_C_RANGE = (-1.0, 1.0)


def _check_range(name, r, positive=False):
    lo, hi = float(r[0]), float(r[1])
    if not (np.isfinite(lo) and np.isfinite(hi)) or lo > hi:
        raise ParameterError(f"{name} range {r!r} is invalid")
    if positive and lo <= 0:
        raise ParameterError(f"{name} range must be strictly positive, got {r!r}")
    return lo, hi


def make_random_quadratics(n_agents, seed, a_range=DEFAULT_A_RANGE, b_range=DEFAULT_B_RANGE,
                           c_range=DEFAULT_C_RANGE, dim=1):
    """Independent random quadratics, one per agent.

    In one dimension ``f_i = a_i x^2 + b_i x + c_i`` with each coefficient
    uniform on its range. For ``dim > 1`` the curvature is
    ``Q_i = U diag(2 a) U^T`` with ``a`` drawn from ``a_range`` per
    eigenvalue and ``U`` a random rotation.
    """
    if n_agents < 1:
        raise ParameterError("need at least one agent")
    a_lo, a_hi = _check_range("a", a_range, positive=True)
    b_lo, b_hi = _check_range("b", b_range)
    c_lo, c_hi = _check_range("c", c_range)
    rng = _rng.generator(seed, "costs")
    out = []
    for _ in range(n_agents):
        if dim == 1:
            a = rng.uniform(a_lo, a_hi)
            b = rng.uniform(b_lo, b_hi)
            c = rng.uniform(c_lo, c_hi)
            out.append(QuadraticCost.from_scalar(a, b, c))
        else:
            a = rng.uniform(a_lo, a_hi, size=dim)
            U, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
            Q = U @ np.diag(2.0 * a) @ U.T
            Q = 0.5 * (Q + Q.T)
            out.append(QuadraticCost(Q, rng.uniform(b_lo, b_hi, size=dim), rng.uniform(c_lo, c_hi)))
    return out


class CostBank:
    """Stacked quadratics for vectorised x-updates over many nodes.

    Parameters
    ----------
    costs : sequence of QuadraticCost
        All of the same dimension.
    degrees : array_like of int
        Node degrees, aligned with ``costs``.
    rho : float or array_like
        Penalty, scalar or one per node.
    """

    def __init__(self, costs, degrees, rho):
        dims = {c.dim for c in costs}
        if len(dims) != 1:
            raise ParameterError("costs must share one dimension")
        self.dim = dims.pop()
        self.b = np.stack([c.b for c in costs])
        degrees = np.asarray(degrees, dtype=float)
        rho = np.broadcast_to(np.asarray(rho, dtype=float), degrees.shape)
        if np.any(rho <= 0):
            raise ParameterError("rho must be positive")
        if self.dim == 1:
            self.denom = (np.array([c.Q[0, 0] for c in costs]) + rho * degrees)[:, None]
        else:
            eye = np.eye(self.dim)
            self.M = np.stack([c.Q + (r * d) * eye for c, r, d in zip(costs, rho, degrees)])

    def x_update(self, s):
        """Row ``i`` of the result is ``x_update_i(s[i])``."""
        if self.dim == 1:
            return (s - self.b) / self.denom
        return np.linalg.solve(self.M, (s - self.b)[..., None])[..., 0]

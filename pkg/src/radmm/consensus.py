"""Distributed relaxed ADMM over a synchronous, possibly lossy network.

Three state machines share one slot layout (see :class:`radmm.graph.Graph`):

* Algorithm 1 keeps ``x_i`` plus bridge variables ``y_ij`` and multipliers
  ``w_ij`` in slot ``(i, j)``.
* Algorithm 2 keeps ``z_ij`` in slot ``(i, j)``; that variable lives at node
  ``j`` and is refreshed by the message ``q_{i->j}``.
* Algorithm 3 is Algorithm 2 where a lost ``q_{i->j}`` leaves ``z_ij`` as it
  was.

Vectors are stored row-wise: node arrays have shape ``(N, n)`` and slot
arrays ``(2|E|, n)``. All right-hand sides of a round read iteration-``k``
values.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _rng
from .costs import CostBank, QuadraticCost
from .exceptions import ParameterError


@dataclass(frozen=True, eq=False)
class Alg1State:
    x: np.ndarray
    y: np.ndarray
    w: np.ndarray


@dataclass(frozen=True, eq=False)
class Alg2State:
    """``z`` at the current iteration and the primal ``x`` it produced last.

    After :func:`alg2_step` from ``z(k)`` the state holds ``x(k)`` and
    ``z(k+1)``.
    """

    x: np.ndarray
    z: np.ndarray


class QMessage(NamedTuple):
    sender: int
    receiver: int
    payload: np.ndarray


class LossModel:
    """I.i.d. Bernoulli drop of each directed message at each iteration.

    Parameters
    ----------
    p : float or dict
        Drop probability. A dict maps ordered pairs ``(i, j)`` (message
        ``i -> j``) to their own probability; pairs not listed use
        ``default``.
    seed : int
        Root seed. The draw for ``(k, i, j)`` depends only on these values.
    default : float
        Probability for pairs missing from a dict ``p``.
    """

    def __init__(self, p=0.0, seed=0, default=0.0):
        self.p = p
        self.seed = int(seed)
        self.default = float(default)
        values = list(p.values()) if isinstance(p, dict) else [p]
        for v in values + [self.default]:
            if not 0.0 <= float(v) <= 1.0:
                raise ParameterError(f"loss probability must lie in [0, 1], got {v!r}")

    def __repr__(self):
        return f"LossModel(p={self.p!r}, seed={self.seed})"

    def probabilities(self, graph):
        """Per-slot drop probabilities (slot ``(i, j)`` is message ``i -> j``)."""
        if isinstance(self.p, dict):
            probs = np.full(graph.n_slots, self.default)
            for (i, j), v in self.p.items():
                probs[graph.slot(i, j)] = float(v)
            return probs
        return np.full(graph.n_slots, float(self.p))

    def keys(self, graph):
        return _rng.slot_keys(self.seed, graph.src, graph.dst)


def sample_loss_mask(loss, k, graph):
    """Boolean per slot: True when message ``src -> dst`` is lost at ``k``."""
    return _rng.keyed_uniform(loss.keys(graph), k) < loss.probabilities(graph)


# -- vectorised round kernels ------------------------------------------------
#
# ``starts`` are the offsets of each node's outgoing slots (slots are sorted
# by source), so per-node sums over j in N_i are segment sums.


def node_offsets(graph):
    return np.searchsorted(graph.src, np.arange(graph.n_nodes))


def segment_sum(values, starts):
    return np.add.reduceat(values, starts, axis=0)


def alg1_kernel(x, y, w, src, dst, mate, alpha, rho):
    """New ``(y, w)`` per slot for Algorithm 1 (iteration-k inputs)."""
    rx = 2.0 * alpha * rho
    ry = rho * (2.0 * alpha - 1.0)
    y_new = ((w + w[mate]) + rx * (x[src] + x[dst]) - ry * (y + y[mate])) / (2.0 * rho)
    w_new = 0.5 * ((w - w[mate]) + rx * (x[src] - x[dst]) - ry * (y - y[mate]))
    return y_new, w_new


def alg2_kernel(x, z, src, mate, alpha, rho):
    """Messages ``q_{i->j}`` (slot ``(i, j)``) and the lossless ``z`` update."""
    q = -z[mate] + 2.0 * rho * x[src]
    return q, (1.0 - alpha) * z + alpha * q


def _primal_update(graph, costs, s, rho):
    if all(isinstance(c, QuadraticCost) for c in costs):
        return CostBank(costs, graph.degrees, rho).x_update(s)
    return np.stack([np.atleast_1d(c.x_update(s[i], rho, int(graph.degrees[i])))
                     for i, c in enumerate(costs)])


def _check_params(alpha, rho):
    if not rho > 0:
        raise ParameterError(f"rho must be positive, got {rho!r}")
    if not alpha > 0:
        raise ParameterError(f"alpha must be positive, got {alpha!r}")


def alg1_step(state, graph, costs, alpha, rho, lost=None):
    """One synchronous round of Algorithm 1.

    ``lost`` (boolean per slot, message ``src -> dst``) is an exploratory
    extension: node ``i`` keeps ``y_ij`` and ``w_ij`` when the packet from
    ``j`` is dropped. Nothing is claimed about its convergence.
    """
    _check_params(alpha, rho)
    y_new, w_new = alg1_kernel(state.x, state.y, state.w, graph.src, graph.dst,
                               graph.mate, alpha, rho)
    if lost is not None:
        keep = np.asarray(lost)[graph.mate][:, None]
        y_new = np.where(keep, state.y, y_new)
        w_new = np.where(keep, state.w, w_new)
    s = segment_sum(rho * y_new - w_new, node_offsets(graph))
    x_new = _primal_update(graph, costs, s, rho)
    return Alg1State(x=x_new, y=y_new, w=w_new)


def alg2_primal(graph, costs, z, rho):
    """``x_i`` from ``sum_{j in N_i} z_ji``."""
    return _primal_update(graph, costs, segment_sum(z[graph.mate], node_offsets(graph)), rho)


def alg2_step(state, graph, costs, alpha, rho):
    """One round of Algorithm 2; returns the new state and the q-messages."""
    _check_params(alpha, rho)
    x = alg2_primal(graph, costs, state.z, rho)
    q, z_new = alg2_kernel(x, state.z, graph.src, graph.mate, alpha, rho)
    msgs = [QMessage(int(i), int(j), q[e]) for e, (i, j) in enumerate(zip(graph.src, graph.dst))]
    return Alg2State(x=x, z=z_new), msgs


def alg3_step(state, graph, costs, alpha, rho, loss, k):
    """One round of Algorithm 3 at iteration ``k`` under ``loss``."""
    _check_params(alpha, rho)
    x = alg2_primal(graph, costs, state.z, rho)
    _, z_upd = alg2_kernel(x, state.z, graph.src, graph.mate, alpha, rho)
    lost = sample_loss_mask(loss, k, graph)
    return Alg2State(x=x, z=np.where(lost[:, None], state.z, z_upd))


# -- initial states ----------------------------------------------------------


def alg1_zero_state(graph, dim=1):
    return Alg1State(x=np.zeros((graph.n_nodes, dim)), y=np.zeros((graph.n_slots, dim)),
                     w=np.zeros((graph.n_slots, dim)))


def alg2_zero_state(graph, dim=1):
    return Alg2State(x=np.zeros((graph.n_nodes, dim)), z=np.zeros((graph.n_slots, dim)))


def alg2_state_from_alg1(state, rho):
    """Map ``z = w + rho y`` (exact when ``y`` is pair-symmetric, ``w``
    pair-antisymmetric and ``x`` is the primal readout of that ``z``)."""
    return Alg2State(x=state.x.copy(), z=state.w + rho * state.y)


def alg1_state_from_z(graph, costs, z, rho):
    """Algorithm 1 state that tracks Algorithm 2 started from ``z``.

    ``y = (I + P) z / (2 rho)``, ``w = (I - P) z / 2`` and ``x`` is the
    primal update from ``z``; then ``w + rho y = z``.
    """
    z = np.asarray(z, dtype=float)
    y = (z + z[graph.mate]) / (2.0 * rho)
    w = 0.5 * (z - z[graph.mate])
    return Alg1State(x=alg2_primal(graph, costs, z, rho), y=y, w=w)


# -- bookkeeping -------------------------------------------------------------


def resource_counts(variant, degree):
    """Per-node ``(updated_and_sent, stored)`` vector counts.

    Algorithm 1 updates ``x_i, y_ij, w_ij`` and holds the ``x_j, y_ji, w_ji``
    gathered from each neighbor; Algorithms 2 and 3 update ``x_i, z_ji`` and
    hold one ``q_{j->i}`` per neighbor.
    """
    if degree < 1:
        raise ParameterError(f"degree must be >= 1, got {degree!r}")
    if variant == 1:
        return 2 * degree + 1, 3 * degree
    if variant in (2, 3):
        return degree + 1, degree
    raise ParameterError(f"unknown variant {variant!r}")


def admm_step(state, graph, costs, rho):
    """Classical ADMM round on the bridge-variable problem (reference).

    Written from the unrelaxed augmented-Lagrangian updates
    ``y = (I + P)(w - rho A x) / (2 rho)``, ``w <- w - rho (A x + y)`` and
    the ``x`` minimisation, with ``(A x)_ij = -x_i``. Relaxed ADMM with
    ``alpha = 1/2`` must reproduce it.
    """
    ax = -state.x[graph.src]
    t = state.w - rho * ax
    y_new = (t + t[graph.mate]) / (2.0 * rho)
    w_new = state.w - rho * (ax + y_new)
    s = segment_sum(rho * y_new - w_new, node_offsets(graph))
    return Alg1State(x=_primal_update(graph, costs, s, rho), y=y_new, w=w_new)

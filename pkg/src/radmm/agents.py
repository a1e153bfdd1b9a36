"""Node-by-node message-passing simulation with access accounting.

The vectorised kernels in :mod:`radmm.consensus` touch every slot at once.
This module runs the same algorithms as a set of agents that only see their
own memory and the messages addressed to them, and counts what each agent
writes, receives and reads. It is slow and meant for verification: locality,
per-node resource counts and agreement with the vectorised path.
"""

from collections import defaultdict

import numpy as np

from .consensus import sample_loss_mask


class Memory(dict):
    """Agent memory that logs reads made while another agent is acting."""

    def __init__(self, owner, network):
        super().__init__()
        self.owner = owner
        self._net = network

    def __getitem__(self, key):
        actor = self._net.actor
        if actor is not None and actor != self.owner:
            self._net.foreign_reads.append((actor, self.owner, key))
        return super().__getitem__(key)


class Agent:
    def __init__(self, ident, neighbors, cost, network):
        self.id = ident
        self.neighbors = tuple(neighbors)
        self.cost = cost
        self.memory = Memory(ident, network)
        self.written = set()
        self.received = 0

    @property
    def degree(self):
        return len(self.neighbors)

    def write(self, key, value):
        self.memory[key] = np.array(value, dtype=float, copy=True)
        self.written.add(key)

    def per_neighbor_keys(self):
        return sorted(k for k in self.memory if isinstance(k, tuple))


class SyncNetwork:
    """Synchronous rounds of Algorithm 1 or Algorithm 2/3 over ``graph``.

    Parameters
    ----------
    graph : Graph
    costs : sequence of LocalCost
    alpha, rho : float
    variant : {1, 2, 3}
    loss : LossModel, optional
        Required for variant 3.
    """

    def __init__(self, graph, costs, alpha, rho, variant=2, loss=None):
        self.graph = graph
        self.alpha = alpha
        self.rho = rho
        self.variant = variant
        self.loss = loss
        self.actor = None
        self.foreign_reads = []
        self.k = 0
        self.agents = [Agent(i, graph.neighbors[i], costs[i], self) for i in range(graph.n_nodes)]
        self.history = []
        self.stats = []

    # -- initialisation --------------------------------------------------

    def init_alg1(self, state):
        g = self.graph
        for a in self.agents:
            a.memory["x"] = np.array(state.x[a.id], dtype=float)
            for j in a.neighbors:
                e = g.slot(a.id, j)
                a.memory[("y", j)] = np.array(state.y[e], dtype=float)
                a.memory[("w", j)] = np.array(state.w[e], dtype=float)

    def init_alg2(self, state):
        g = self.graph
        for a in self.agents:
            for j in a.neighbors:
                a.memory[("z", j)] = np.array(state.z[g.slot(j, a.id)], dtype=float)
            a.memory["x"] = self._primal2(a)

    # -- per-agent computations (read only self.memory and inbox) ------

    def _primal2(self, a):
        s = 0.0
        for j in a.neighbors:
            s = s + a.memory[("z", j)]
        return np.atleast_1d(a.cost.x_update(s, self.rho, a.degree))

    def _round_alg1(self, a, inbox):
        al, rho = self.alpha, self.rho
        rx, ry = 2.0 * al * rho, rho * (2.0 * al - 1.0)
        xi = a.memory["x"]
        s = 0.0
        for j in a.neighbors:
            xj, yji, wji = inbox[j]
            yij, wij = a.memory[("y", j)], a.memory[("w", j)]
            y_new = ((wij + wji) + rx * (xi + xj) - ry * (yij + yji)) / (2.0 * rho)
            w_new = 0.5 * ((wij - wji) + rx * (xi - xj) - ry * (yij - yji))
            a.write(("y", j), y_new)
            a.write(("w", j), w_new)
            s = s + (rho * y_new - w_new)
        a.write("x", np.atleast_1d(a.cost.x_update(s, rho, a.degree)))

    def _emit_alg2(self, a):
        xi = self._primal2(a)
        a.write("x", xi)
        return {j: -a.memory[("z", j)] + 2.0 * self.rho * xi for j in a.neighbors}

    def _absorb_alg2(self, a, inbox):
        for j, q in inbox.items():
            z = a.memory[("z", j)]
            a.write(("z", j), (1.0 - self.alpha) * z + self.alpha * q)

    # -- rounds ---------------------------------------------------------

    def step(self):
        """Run one synchronous round; returns the node primal values."""
        for a in self.agents:
            a.written = set()
            a.received = 0
        lost = None
        if self.loss is not None:
            lost = sample_loss_mask(self.loss, self.k, self.graph)
        boxes = defaultdict(dict)
        if self.variant == 1:
            for a in self.agents:
                self.actor = a.id
                for j in a.neighbors:
                    boxes[j][a.id] = (a.memory["x"], a.memory[("y", j)], a.memory[("w", j)])
            self.actor = None
            for a in self.agents:
                a.received = 3 * len(boxes[a.id])
                self.actor = a.id
                self._round_alg1(a, boxes[a.id])
            self.actor = None
            x = np.stack([a.memory["x"] for a in self.agents])
        else:
            for a in self.agents:
                self.actor = a.id
                for j, q in self._emit_alg2(a).items():
                    if lost is not None and lost[self.graph.slot(a.id, j)]:
                        continue
                    boxes[j][a.id] = q
            self.actor = None
            x = np.stack([a.memory["x"] for a in self.agents])
            for a in self.agents:
                a.received = len(boxes[a.id])
                self.actor = a.id
                self._absorb_alg2(a, boxes[a.id])
            self.actor = None
        self.stats.append([(len(a.written), a.received) for a in self.agents])
        self.history.append(x)
        self.k += 1
        return x

    def run(self, rounds):
        for _ in range(rounds):
            self.step()
        return np.stack(self.history)

    def measured_counts(self):
        """Per node ``(updated_and_sent, stored)`` from the last lossless round.

        ``stored`` is the number of neighbor-originated vectors the agent
        buffered to run the round.
        """
        return self.stats[-1]

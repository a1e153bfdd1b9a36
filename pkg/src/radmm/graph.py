"""Communication graphs and per-directed-edge indexing.

A :class:`Graph` owns a contiguous slot numbering of its ordered neighbor
pairs. Slot ``e`` stands for the pair ``(src[e], dst[e])`` and ``mate[e]`` is
the slot of the reversed pair, so the swap permutation that exchanges
``t_ij`` and ``t_ji`` is just fancy indexing with ``mate``.
"""

import warnings
from collections import deque
from functools import cached_property

import numpy as np

from . import _rng
from .exceptions import InfeasibleGraphError, ParameterError

DEFAULT_MAX_RETRIES = 1000


class Graph:
    """Undirected simple graph on nodes ``0 .. n_nodes - 1``.

    Parameters
    ----------
    n_nodes : int
        Number of vertices.
    edges : iterable of (int, int)
        Unordered pairs; stored normalised as ``(min, max)`` and sorted.
    """

    def __init__(self, n_nodes, edges):
        n_nodes = int(n_nodes)
        if n_nodes < 1:
            raise ParameterError("a graph needs at least one node")
        norm = set()
        for i, j in edges:
            i, j = int(i), int(j)
            if i == j:
                raise ParameterError(f"self-loop at node {i}")
            if not (0 <= i < n_nodes and 0 <= j < n_nodes):
                raise ParameterError(f"edge ({i}, {j}) out of range")
            e = (min(i, j), max(i, j))
            if e in norm:
                raise ParameterError(f"duplicate edge {e}")
            norm.add(e)
        self.n_nodes = n_nodes
        self.edges = tuple(sorted(norm))
        nbrs = [[] for _ in range(n_nodes)]
        for i, j in self.edges:
            nbrs[i].append(j)
            nbrs[j].append(i)
        self.neighbors = tuple(tuple(sorted(l)) for l in nbrs)

        src = [i for i in range(n_nodes) for _ in self.neighbors[i]]
        dst = [j for i in range(n_nodes) for j in self.neighbors[i]]
        self.src = np.array(src, dtype=np.intp)
        self.dst = np.array(dst, dtype=np.intp)
        self._slot = {(i, j): e for e, (i, j) in enumerate(zip(src, dst))}
        self.mate = np.array([self._slot[(j, i)] for i, j in zip(src, dst)], dtype=np.intp)
        for arr in (self.src, self.dst, self.mate):
            arr.flags.writeable = False

    def __repr__(self):
        return f"Graph(n_nodes={self.n_nodes}, n_edges={len(self.edges)})"

    def __eq__(self, other):
        return (isinstance(other, Graph) and self.n_nodes == other.n_nodes
                and self.edges == other.edges)

    def __hash__(self):
        return hash((self.n_nodes, self.edges))

    @property
    def n_slots(self):
        """Number of directed edges, ``2 |E|``."""
        return len(self.src)

    @cached_property
    def degrees(self):
        d = np.array([len(n) for n in self.neighbors], dtype=np.intp)
        d.flags.writeable = False
        return d

    def slot(self, i, j):
        """Slot index of the ordered pair ``(i, j)``."""
        try:
            return self._slot[(int(i), int(j))]
        except KeyError:
            raise KeyError(f"({i}, {j}) is not an edge") from None

    def slots_from(self, i):
        """Slots ``(i, j)`` for ``j`` in the neighbors of ``i``, in order."""
        return [self._slot[(i, j)] for j in self.neighbors[i]]

    def slots_into(self, i):
        """Slots ``(j, i)`` for ``j`` in the neighbors of ``i``, in order."""
        return [self._slot[(j, i)] for j in self.neighbors[i]]


def is_connected(g):
    """True iff a breadth-first search from node 0 reaches every node."""
    seen = [False] * g.n_nodes
    seen[0] = True
    queue = deque([0])
    count = 1
    while queue:
        i = queue.popleft()
        for j in g.neighbors[i]:
            if not seen[j]:
                seen[j] = True
                count += 1
                queue.append(j)
    return count == g.n_nodes


def cycle_graph(n):
    """Ring ``0 - 1 - ... - (n-1) - 0``.

    ``n = 2`` degenerates to a single edge and emits a warning.
    """
    if n <= 1:
        raise ParameterError(f"cycle graph needs n >= 2, got {n}")
    if n == 2:
        warnings.warn("cycle_graph(2) is a single edge", stacklevel=2)
        return Graph(2, [(0, 1)])
    return Graph(n, [(i, (i + 1) % n) for i in range(n)])


def complete_graph(n):
    return Graph(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def geometric_graph(points, radius):
    """Edges between points at Euclidean distance strictly below ``radius``."""
    pts = np.asarray(points, dtype=float)
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=-1))
    n = len(pts)
    iu, ju = np.triu_indices(n, k=1)
    close = dist[iu, ju] < radius
    return Graph(n, zip(iu[close].tolist(), ju[close].tolist()))


def random_geometric(n, radius, seed, max_retries=DEFAULT_MAX_RETRIES, return_points=False):
    """Connected random geometric graph on the unit square.

    Points are drawn i.i.d. uniform from PCG64 seeded with
    ``derive_seed(seed, "rgg", attempt)``; disconnected draws are rejected
    and redrawn with the next attempt index.

    Raises
    ------
    InfeasibleGraphError
        If ``max_retries`` draws are all disconnected.
    """
    if n < 2:
        raise ParameterError(f"random geometric graph needs n >= 2, got {n}")
    if not radius > 0:
        raise ParameterError(f"radius must be positive, got {radius!r}")
    for attempt in range(max_retries):
        pts = _rng.generator(seed, "rgg", attempt).random((n, 2))
        g = geometric_graph(pts, radius)
        if is_connected(g):
            return (g, pts) if return_points else g
    raise InfeasibleGraphError(
        f"no connected random geometric graph with n={n}, radius={radius} "
        f"after {max_retries} draws")


def pair_sum(g, t):
    """``(I + P) t``: slot ``(i, j)`` becomes ``t_ij + t_ji``."""
    t = np.asarray(t)
    return t + t[g.mate]


def pair_diff(g, t):
    """``(I - P) t``: slot ``(i, j)`` becomes ``t_ij - t_ji``."""
    t = np.asarray(t)
    return t - t[g.mate]


def swap(g, t):
    """``P t``: exchange the entries of each directed-edge pair."""
    return np.asarray(t)[g.mate]


def disjoint_union(graphs):
    """Union of graphs with node labels shifted by the running node count.

    Returns the union and the node offsets; slot order of each part is
    preserved contiguously.
    """
    edges = []
    offsets = []
    off = 0
    for g in graphs:
        offsets.append(off)
        edges.extend((i + off, j + off) for i, j in g.edges)
        off += g.n_nodes
    return Graph(off, edges), np.array(offsets, dtype=np.intp)


def write_edgelist(g, path):
    """Plain text: first line ``N``, then one ``i j`` line per edge."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{g.n_nodes}\n")
        for i, j in g.edges:
            fh.write(f"{i} {j}\n")


def read_edgelist(path):
    with open(path, encoding="utf-8") as fh:
        lines = [ln.split() for ln in fh if ln.strip()]
    if not lines or len(lines[0]) != 1:
        raise ValueError(f"{path}: first line must hold the node count")
    n = int(lines[0][0])
    edges = []
    for lineno, parts in enumerate(lines[1:], start=2):
        if len(parts) != 2:
            raise ValueError(f"{path}:{lineno}: expected 'i j'")
        edges.append((int(parts[0]), int(parts[1])))
    return Graph(n, edges)

"""Monte-Carlo harness for the distributed R-ADMM variants.

Runs are simulated in lock-step: the graphs of a batch are joined into one
disjoint union and every round is a handful of numpy operations over all
slots at once. Each run ("lane") keeps its own parameters, loss keys and
optimum, so a lane's trajectory does not depend on the other lanes it is
batched with.
"""

import csv
import dataclasses
import hashlib
import io
import json
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _rng
from .consensus import alg1_kernel, alg2_kernel, node_offsets, segment_sum
from .costs import (DEFAULT_A_RANGE, DEFAULT_B_RANGE, DEFAULT_C_RANGE, CostBank,
                    centralized_optimum, make_random_quadratics)
from .exceptions import ConfigError
from .graph import cycle_graph, disjoint_union, random_geometric

CONFIG_VERSION = 1
TINY = np.finfo(float).tiny

CONVERGED = "converged"
DIVERGED = "diverged"
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class GraphSpec:
    family: str = "random_geometric"
    n_nodes: int = 10
    radius: float = 0.5
    max_retries: int = 1000
    fixed: bool = False


@dataclass(frozen=True)
class CostSpec:
    a_range: tuple = DEFAULT_A_RANGE
    b_range: tuple = DEFAULT_B_RANGE
    c_range: tuple = DEFAULT_C_RANGE
    dim: int = 1
    fixed: bool = False


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce a batch of runs.

    ``p`` is the default drop probability; ``p_edges`` optionally maps
    ``"i,j"`` (message ``i -> j``) to its own probability and requires a
    fixed graph. ``tol`` is the relative error declaring a run converged,
    ``target`` the level used for the iterations-to-target metric and
    ``divergence`` the relative error declaring it diverged.
    """

    version: int = CONFIG_VERSION
    variant: int = 3
    graph: GraphSpec = field(default_factory=GraphSpec)
    costs: CostSpec = field(default_factory=CostSpec)
    alpha: float = 1.0
    rho: float = 1.0
    p: float = 0.0
    p_edges: dict = None
    max_iters: int = 5000
    tol: float = 1e-8
    target: float = 1e-4
    divergence: float = 1e8
    n_runs: int = 100
    seed: int = 0
    init: str = "zeros"
    init_scale: float = 1.0
    unsafe_lossy_alg1: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self):
        def bad(key, msg):
            raise ConfigError(key, msg)

        if self.version != CONFIG_VERSION:
            bad("version", f"unsupported version {self.version!r}")
        if self.variant not in (1, 2, 3):
            bad("variant", "must be 1, 2 or 3")
        g = self.graph
        if g.family not in ("random_geometric", "cycle"):
            bad("graph.family", "must be 'random_geometric' or 'cycle'")
        if g.n_nodes < 2:
            bad("graph.n_nodes", "must be >= 2")
        if not g.radius > 0:
            bad("graph.radius", "must be > 0")
        if g.max_retries < 1:
            bad("graph.max_retries", "must be >= 1")
        c = self.costs
        for name in ("a_range", "b_range", "c_range"):
            r = getattr(c, name)
            if len(r) != 2 or not all(math.isfinite(v) for v in r) or r[0] > r[1]:
                bad(f"costs.{name}", "must be a finite [low, high] pair")
        if c.a_range[0] <= 0:
            bad("costs.a_range", "curvature must be strictly positive")
        if c.dim < 1:
            bad("costs.dim", "must be >= 1")
        if not self.alpha > 0:
            bad("alpha", "must be > 0")
        if not self.rho > 0:
            bad("rho", "must be > 0")
        if not 0.0 <= self.p <= 1.0:
            bad("p", "must lie in [0, 1]")
        if self.p_edges:
            if not g.fixed:
                bad("p_edges", "per-edge probabilities need graph.fixed = true")
            for key, v in self.p_edges.items():
                if not 0.0 <= v <= 1.0:
                    bad(f"p_edges.{key}", "must lie in [0, 1]")
        lossy = self.p > 0 or any(v > 0 for v in (self.p_edges or {}).values())
        if lossy and self.variant == 2:
            bad("variant", "variant 2 is lossless; use variant 3 for p > 0")
        if lossy and self.variant == 1 and not self.unsafe_lossy_alg1:
            bad("variant", "Algorithm 1 has no lossy variant (set unsafe_lossy_alg1 to explore)")
        if self.max_iters < 1:
            bad("max_iters", "must be >= 1")
        for key in ("tol", "target", "divergence"):
            if not getattr(self, key) > 0:
                bad(key, "must be > 0")
        if self.n_runs < 1:
            bad("n_runs", "must be >= 1")
        if not 0 <= self.seed < 2**64:
            bad("seed", "must be an unsigned 64-bit integer")
        if self.init not in ("zeros", "random"):
            bad("init", "must be 'zeros' or 'random'")

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["costs"] = {k: list(v) if isinstance(v, tuple) else v for k, v in d["costs"].items()}
        return d

    @classmethod
    def from_dict(cls, data):
        """Build from nested plain data; unknown keys are rejected."""
        data = dict(data)
        known = {f.name for f in dataclasses.fields(cls)}
        for key in data:
            if key not in known:
                raise ConfigError(key, "unknown key")
        sub = {}
        for key, spec_cls in (("graph", GraphSpec), ("costs", CostSpec)):
            part = data.pop(key, {}) or {}
            if not isinstance(part, dict):
                raise ConfigError(key, "must be a table")
            fields = {f.name: f for f in dataclasses.fields(spec_cls)}
            for k in part:
                if k not in fields:
                    raise ConfigError(f"{key}.{k}", "unknown key")
            vals = {}
            for k, v in part.items():
                vals[k] = _coerce(f"{key}.{k}", fields[k].default, v)
            sub[key] = spec_cls(**vals)
        defaults = {f.name: f.default for f in dataclasses.fields(cls)}
        vals = {k: _coerce(k, defaults[k], v) for k, v in data.items()}
        return cls(**vals, **sub)

    def digest(self):
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]


def _coerce(key, default, value):
    try:
        if key == "p_edges":
            if value is None:
                return None
            if not isinstance(value, dict):
                raise TypeError
            return {str(k): float(v) for k, v in value.items()}
        if isinstance(default, bool):
            if isinstance(value, str):
                if value.lower() in ("true", "1", "yes"):
                    return True
                if value.lower() in ("false", "0", "no"):
                    return False
                raise ValueError
            if not isinstance(value, (bool, int)):
                raise TypeError
            return bool(value)
        if isinstance(default, int):
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            if isinstance(value, bool):
                raise TypeError
            return int(value)
        if isinstance(default, float):
            if isinstance(value, bool):
                raise TypeError
            return float(value)
        if isinstance(default, tuple):
            if isinstance(value, str):
                value = json.loads(value)
            return tuple(float(v) for v in value)
        if isinstance(default, str):
            if not isinstance(value, str):
                raise TypeError
            return value
    except (TypeError, ValueError):
        raise ConfigError(key, f"invalid value {value!r}") from None
    return value


def parse_edge_key(key):
    i, j = key.replace("->", ",").split(",")
    return int(i), int(j)


# -- problem instances ------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Problem:
    """One Monte-Carlo draw: graph, costs, optimum and seeds."""

    run_id: int
    seed: int
    graph: object
    costs: list
    x_star: np.ndarray
    loss_seed: int
    init_seed: int


def run_seed(master, run_id):
    return _rng.derive_seed(master, "run", run_id)


def draw_problem(config, run_id):
    """Graph, costs and seeds for run ``run_id`` of ``config``."""
    rs = run_seed(config.seed, run_id)
    g_seed = _rng.derive_seed(config.seed if config.graph.fixed else rs, "graph")
    c_seed = _rng.derive_seed(config.seed if config.costs.fixed else rs, "costs")
    gs = config.graph
    if gs.family == "cycle":
        graph = cycle_graph(gs.n_nodes)
    else:
        graph = random_geometric(gs.n_nodes, gs.radius, g_seed, max_retries=gs.max_retries)
    cs = config.costs
    costs = make_random_quadratics(gs.n_nodes, c_seed, cs.a_range, cs.b_range, cs.c_range, cs.dim)
    return Problem(run_id=run_id, seed=rs, graph=graph, costs=costs,
                   x_star=centralized_optimum(costs),
                   loss_seed=_rng.derive_seed(rs, "loss"),
                   init_seed=_rng.derive_seed(rs, "init"))


# -- results ----------------------------------------------------------------


@dataclass
class TraceRecord:
    """Relative error per iteration of one run.

    ``errors[k]`` is ``||x(k) - x*|| / ||x*||`` over the stacked node
    vectors. The trace ends at the first ``k`` where the run reached the
    tolerance or diverged, or at ``max_iters``. ``iters_to_target`` is the
    first ``k`` with error below the target (None if never).
    """

    run_id: int
    alpha: float
    rho: float
    p: float
    seed: int
    errors: np.ndarray
    outcome: str
    iters_to_target: int = None
    iters_to_tol: int = None
    last_finite_error: float = None


@dataclass
class MonteCarloResult:
    config: ExperimentConfig
    records: list

    @property
    def n_diverged(self):
        return sum(r.outcome == DIVERGED for r in self.records)

    @property
    def n_iterations(self):
        return max(len(r.errors) for r in self.records)

    def error_matrix(self):
        """Runs x iterations.

        A run that stopped below tolerance is held at its final error;
        a diverged run is NaN after its last recorded round.
        """
        K = self.n_iterations
        E = np.full((len(self.records), K), np.nan)
        for i, r in enumerate(self.records):
            n = len(r.errors)
            E[i, :n] = r.errors
            if r.outcome != DIVERGED:
                E[i, n:] = r.errors[-1]
        return E

    def aggregate(self):
        """Per-iteration ``(mean_rel_error, mean_log10_rel_error, n_diverged)``.

        Means run over the runs not yet diverged at ``k``; ``n_diverged``
        counts runs that diverged at or before ``k``.
        """
        E = self.error_matrix()
        div_at = np.full(len(self.records), E.shape[1])
        for i, r in enumerate(self.records):
            if r.outcome == DIVERGED:
                div_at[i] = len(r.errors) - 1
        ks = np.arange(E.shape[1])
        diverged = div_at[:, None] <= ks[None, :]
        use = ~diverged & np.isfinite(E)
        cnt = use.sum(axis=0)
        with np.errstate(invalid="ignore", divide="ignore"):
            mean = np.where(use, E, 0.0).sum(axis=0) / cnt
            logs = np.log10(np.maximum(np.where(use, E, 1.0), TINY))
            mean_log = np.where(use, logs, 0.0).sum(axis=0) / cnt
        return mean, mean_log, diverged.sum(axis=0)

    def mean_iters_to_target(self):
        """Mean over runs that reached the target (NaN if none did)."""
        its = [r.iters_to_target for r in self.records if r.iters_to_target is not None]
        return float(np.mean(its)) if its else math.nan

    def outcome(self):
        """``diverged`` if any run diverged, ``converged`` if all did."""
        outs = {r.outcome for r in self.records}
        if DIVERGED in outs:
            return DIVERGED
        if outs == {CONVERGED}:
            return CONVERGED
        return INCONCLUSIVE


# -- batched simulation -----------------------------------------------------


def _lane_probabilities(config, problem):
    probs = np.full(problem.graph.n_slots, float(config.p))
    for key, v in (config.p_edges or {}).items():
        i, j = parse_edge_key(key)
        probs[problem.graph.slot(i, j)] = v
    return probs


def _initial_state(config, problem):
    g = problem.graph
    dim = config.costs.dim
    if config.init == "zeros":
        zs = np.zeros((g.n_slots, dim))
        return np.zeros((g.n_nodes, dim)), zs, zs.copy()
    rng = _rng.generator(problem.init_seed)
    s = config.init_scale
    x0 = s * rng.standard_normal((g.n_nodes, dim))
    return x0, s * rng.standard_normal((g.n_slots, dim)), s * rng.standard_normal((g.n_slots, dim))


def simulate_lanes(configs, problems):
    """Simulate one lane per ``(config, problem)`` pair in lock-step.

    All configs must share ``variant``, ``costs.dim``, ``max_iters``,
    ``tol``, ``target`` and ``divergence``.
    """
    base = configs[0]
    shared = ("variant", "max_iters", "tol", "target", "divergence", "init")
    for c in configs[1:]:
        for key in shared:
            if getattr(c, key) != getattr(base, key):
                raise ConfigError(key, "lanes of one batch must agree")
        if c.costs.dim != base.costs.dim:
            raise ConfigError("costs.dim", "lanes of one batch must agree")
    L = len(problems)
    union, node_off = disjoint_union([pb.graph for pb in problems])
    n_nodes = np.array([pb.graph.n_nodes for pb in problems])
    n_slots = np.array([pb.graph.n_slots for pb in problems])
    node_lane = np.repeat(np.arange(L), n_nodes)
    slot_lane = np.repeat(np.arange(L), n_slots)
    src, dst, mate = union.src, union.dst, union.mate
    starts = node_offsets(union)

    alpha = np.array([c.alpha for c in configs])[slot_lane][:, None]
    rho_lane = np.array([c.rho for c in configs])
    rho = rho_lane[slot_lane][:, None]
    bank = CostBank([c for pb in problems for c in pb.costs], union.degrees, rho_lane[node_lane])
    probs = np.concatenate([_lane_probabilities(c, pb) for c, pb in zip(configs, problems)])
    lossy = bool(np.any(probs > 0))
    if lossy:
        keys = np.concatenate([_rng.slot_keys(pb.loss_seed, pb.graph.src, pb.graph.dst)
                               for pb in problems])

    x_star = np.concatenate([np.broadcast_to(pb.x_star, (pb.graph.n_nodes, pb.x_star.size))
                             for pb in problems])
    den = np.sqrt(np.bincount(node_lane, weights=np.sum(x_star * x_star, axis=1), minlength=L))
    den[den == 0] = 1.0  # x* = 0: fall back to the absolute error

    inits = [_initial_state(c, pb) for c, pb in zip(configs, problems)]
    x = np.concatenate([i[0] for i in inits])
    y = np.concatenate([i[1] for i in inits])
    w = np.concatenate([i[2] for i in inits])
    variant = base.variant
    if variant == 1:
        z = None
    else:
        z = y  # Algorithm 2/3 start from z(0); x(0) is its primal readout

    K = base.max_iters
    errors = np.full((K + 1, L), np.nan)
    # Lanes keep iterating until the whole batch stops, but each record ends
    # at the lane's own stopping round so it does not depend on batching.
    stop_k = np.full(L, -1)
    alive = np.ones(L, dtype=bool)
    last_finite = np.full(L, np.nan)
    k_stop = K

    for k in range(K + 1):
        if variant != 1:
            x = bank.x_update(segment_sum(z[mate], starts))
        with np.errstate(over="ignore", invalid="ignore"):
            d = x - x_star
            num = np.sqrt(np.bincount(node_lane, weights=np.sum(d * d, axis=1), minlength=L))
            err = num / den
        err = np.where(alive, err, np.nan)
        errors[k] = err
        last_finite = np.where(alive & np.isfinite(err), err, last_finite)
        open_ = stop_k < 0
        newly_bad = alive & ~(err <= base.divergence)
        stop_k[open_ & (newly_bad | (err < base.tol))] = k
        if newly_bad.any():
            alive &= ~newly_bad
            bad_slots = newly_bad[slot_lane]
            if variant == 1:
                y[bad_slots] = 0.0
                w[bad_slots] = 0.0
                x[newly_bad[node_lane]] = 0.0
            else:
                z[bad_slots] = 0.0
        if np.all(stop_k >= 0) or k == K:
            k_stop = k
            break
        if lossy:
            lost = (_rng.keyed_uniform(keys, k) < probs)[:, None]
        with np.errstate(over="ignore", invalid="ignore"):
            if variant == 1:
                y_new, w_new = alg1_kernel(x, y, w, src, dst, mate, alpha, rho)
                if lossy:
                    keep = lost[mate]
                    y_new = np.where(keep, y, y_new)
                    w_new = np.where(keep, w, w_new)
                y, w = y_new, w_new
                x = bank.x_update(segment_sum(rho * y - w, starts))
            else:
                _, z_new = alg2_kernel(x, z, src, mate, alpha, rho)
                z = np.where(lost, z, z_new) if lossy else z_new

    stop_k[stop_k < 0] = k_stop
    records = []
    for lane, (c, pb) in enumerate(zip(configs, problems)):
        e = errors[:stop_k[lane] + 1, lane].copy()
        hit_t = np.flatnonzero(e < c.target)
        hit_tol = np.flatnonzero(e < c.tol)
        if not alive[lane]:
            outcome = DIVERGED
        elif hit_tol.size:
            outcome = CONVERGED
        else:
            outcome = INCONCLUSIVE
        records.append(TraceRecord(
            run_id=pb.run_id, alpha=c.alpha, rho=c.rho, p=c.p, seed=pb.seed, errors=e,
            outcome=outcome,
            iters_to_target=int(hit_t[0]) if hit_t.size else None,
            iters_to_tol=int(hit_tol[0]) if hit_tol.size else None,
            last_finite_error=None if math.isnan(last_finite[lane]) else float(last_finite[lane])))
    return records


# -- studies ----------------------------------------------------------------


def draw_problems(config, run_ids=None):
    run_ids = range(config.n_runs) if run_ids is None else run_ids
    return [draw_problem(config, r) for r in run_ids]


def run_trace(config, run_id=0, problem=None):
    """Single run of ``config`` (run index ``run_id``)."""
    problem = draw_problem(config, run_id) if problem is None else problem
    return simulate_lanes([config], [problem])[0]


def _simulate_chunk(args):
    config, problems = args
    return simulate_lanes([config] * len(problems), problems)


def monte_carlo(config, n_runs=None, problems=None, workers=1):
    """``n_runs`` independent runs of ``config``.

    With ``workers > 1`` the runs are split into contiguous chunks simulated
    in separate processes; records are merged in run order and are identical
    to the single-process result.
    """
    if n_runs is not None:
        config = config.replace(n_runs=n_runs)
    problems = draw_problems(config) if problems is None else problems
    if workers > 1 and len(problems) > 1:
        bounds = np.linspace(0, len(problems), min(workers, len(problems)) + 1).astype(int)
        chunks = [(config, problems[a:b]) for a, b in zip(bounds[:-1], bounds[1:])]
        with ProcessPoolExecutor(max_workers=workers) as ex:
            records = [r for part in ex.map(_simulate_chunk, chunks) for r in part]
    else:
        records = _simulate_chunk((config, problems))
    return MonteCarloResult(config, records)


@dataclass
class SweepCell:
    alpha: float
    rho: float
    p: float
    outcome: str
    mean_iters_to_tol: float
    n_diverged: int
    n_converged: int
    max_final_error: float


@dataclass
class SweepResult:
    cells: list
    alphas: tuple
    rhos: tuple
    ps: tuple

    def cell(self, alpha, rho, p):
        for c in self.cells:
            if c.alpha == alpha and c.rho == rho and c.p == p:
                return c
        raise KeyError((alpha, rho, p))

    def alpha_max(self, p, rho):
        """Largest grid alpha classified converged at ``(p, rho)`` (NaN if none)."""
        ok = [c.alpha for c in self.cells if c.p == p and c.rho == rho and c.outcome == CONVERGED]
        return max(ok) if ok else math.nan

    def boundary(self):
        return {p: {rho: self.alpha_max(p, rho) for rho in self.rhos} for p in self.ps}


DEFAULT_SWEEP_ALPHAS = tuple(round(0.1 * i, 1) for i in range(1, 21))
DEFAULT_SWEEP_RHOS = (0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0)
DEFAULT_SWEEP_PS = (0.0, 0.2, 0.4, 0.6, 0.8)


def _sweep_cell(args):
    config, problems = args
    res = monte_carlo(config, problems=problems)
    finals = [r.last_finite_error for r in res.records if r.last_finite_error is not None]
    return SweepCell(alpha=config.alpha, rho=config.rho, p=config.p, outcome=res.outcome(),
                     mean_iters_to_tol=res.mean_iters_to_target(), n_diverged=res.n_diverged,
                     n_converged=sum(r.outcome == CONVERGED for r in res.records),
                     max_final_error=max(finals) if finals else math.nan)


def _cell_config(base, alpha, rho, p):
    variant = base.variant
    if p > 0 and variant == 2:
        variant = 3
    return base.replace(alpha=alpha, rho=rho, p=p, variant=variant)


def stability_sweep(base, alphas=DEFAULT_SWEEP_ALPHAS, rhos=DEFAULT_SWEEP_RHOS,
                    ps=DEFAULT_SWEEP_PS, workers=1):
    """Classify every ``(alpha, rho, p)`` cell over ``base.n_runs`` runs.

    All cells share the same graph and cost draws (common random numbers);
    cells may be evaluated by several worker processes and are merged in
    grid order.
    """
    if not (alphas and rhos and ps):
        raise ValueError("empty sweep grid")
    problems = draw_problems(base)
    jobs = [(_cell_config(base, a, r, p), problems) for p in ps for r in rhos for a in alphas]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            cells = list(ex.map(_sweep_cell, jobs))
    else:
        cells = [_sweep_cell(j) for j in jobs]
    return SweepResult(cells=cells, alphas=tuple(alphas), rhos=tuple(rhos), ps=tuple(ps))


def stepsize_study(alphas, config, p=None, rho=None, workers=1):
    """One Monte-Carlo aggregate per alpha at fixed ``p`` and ``rho``.

    Every alpha sees the same graph, cost and loss draws.
    """
    p = config.p if p is None else p
    rho = config.rho if rho is None else rho
    problems = draw_problems(config)
    return {a: monte_carlo(_cell_config(config, a, rho, p), problems=problems, workers=workers)
            for a in alphas}


# -- CSV output -------------------------------------------------------------


def fmt(v):
    """Shortest text that round-trips the float exactly; NaN as ``nan``."""
    if v is None:
        return "nan"
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return repr(float(v))


def _csv_text(header, rows):
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for row in rows:
        wr.writerow([fmt(v) if not isinstance(v, str) else v for v in row])
    return buf.getvalue()


TRACE_HEADER = ("k", "run_id", "alpha", "rho", "p", "rel_error")
AGGREGATE_HEADER = ("k", "alpha", "rho", "p", "mean_rel_error", "mean_log10_rel_error", "n_diverged")
SWEEP_HEADER = ("alpha", "rho", "p", "outcome", "mean_iters_to_tol")


def trace_csv(records):
    rows = ((k, r.run_id, r.alpha, r.rho, r.p, e)
            for r in records for k, e in enumerate(r.errors))
    return _csv_text(TRACE_HEADER, rows)


def aggregate_csv(results):
    """Aggregate rows for one or several :class:`MonteCarloResult`."""
    if isinstance(results, MonteCarloResult):
        results = [results]
    first = results[0].config
    for res in results[1:]:
        for key in ("variant", "max_iters", "graph", "costs"):
            if getattr(res.config, key) != getattr(first, key):
                raise ConfigError(key, "aggregates must share one variant and problem family")
    rows = []
    for res in results:
        c = res.config
        mean, mean_log, n_div = res.aggregate()
        rows.extend((k, c.alpha, c.rho, c.p, mean[k], mean_log[k], int(n_div[k]))
                    for k in range(len(mean)))
    return _csv_text(AGGREGATE_HEADER, rows)


def sweep_csv(sweep):
    rows = ((c.alpha, c.rho, c.p, c.outcome, c.mean_iters_to_tol) for c in sweep.cells)
    return _csv_text(SWEEP_HEADER, rows)


def atomic_write(path, text):
    """Write ``text`` to a temporary file next to ``path`` then rename."""
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise

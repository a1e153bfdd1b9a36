"""Command line front end.

::

    radmm run      --config cfg.json --out results/ [--set key=value ...] [--seed N]
    radmm sweep    --config cfg.json --out results/ [--alphas ...] [--rhos ...] [--ps ...]
    radmm stepsize --config cfg.json --out results/ [--alphas ...]
    radmm compare  --config cfg.json --out results/ [--rounds 100] [--edgelist g.txt]
    radmm counts   --config cfg.json --out results/ [--edgelist g.txt]

Exit codes: 0 success, 2 invalid configuration, 3 a run diverged where the
parameters guarantee convergence, 4 output could not be written, 5 the
Algorithm 1 / Algorithm 2 trajectories disagree.
"""

import argparse
import hashlib
import json
import os
import platform
import sys
import time

import numpy as np

from . import __version__, _rng
from .agents import SyncNetwork
from .consensus import (admm_step, alg1_state_from_z, alg1_step, alg1_zero_state,
                        alg2_state_from_alg1, alg2_step, alg2_zero_state, resource_counts)
from .costs import make_random_quadratics
from .exceptions import ConfigError, InfeasibleGraphError, ParameterError
from .experiments import (DEFAULT_SWEEP_ALPHAS, DEFAULT_SWEEP_PS, DEFAULT_SWEEP_RHOS,
                          DIVERGED, ExperimentConfig, aggregate_csv, atomic_write, draw_problem,
                          fmt, monte_carlo, stability_sweep, stepsize_study, sweep_csv, trace_csv)
from .graph import is_connected, read_edgelist

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_IO = 4
EXIT_EQUIVALENCE = 5

SEED_ENV = "RADMM_SEED"
EQUIVALENCE_TOL = 1e-8
DEFAULT_STEPSIZE_ALPHAS = (0.3, 0.5, 0.7, 0.9)


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(data, assignment):
    """Apply ``dotted.key=value`` to nested ``data`` in place."""
    if "=" not in assignment:
        raise ConfigError(assignment, "override must look like key=value")
    key, raw = assignment.split("=", 1)
    key = key.strip()
    parts = key.split(".")
    node = data
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(key, "cannot descend into a non-table value")
    node[parts[-1]] = _parse_value(raw.strip())
    return key


def parse_config(path=None, overrides=(), seed=None, env=None):
    """Load, override and validate an experiment configuration.

    Seed precedence: ``seed`` argument, then a ``seed`` key from the file or
    overrides, then ``$RADMM_SEED``, then 0.

    Returns
    -------
    (ExperimentConfig, dict)
        The config and provenance (applied overrides, seed source).
    """
    env = os.environ if env is None else env
    data = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError("<file>", f"{path} is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("<file>", "top level must be a table")
        if "version" not in data:
            raise ConfigError("version", "missing (configuration files must declare version)")
    applied = [apply_override(data, o) for o in overrides]
    if seed is not None:
        data["seed"] = int(seed)
        source = "--seed"
    elif "seed" in data:
        source = "config"
    elif env.get(SEED_ENV):
        try:
            data["seed"] = int(env[SEED_ENV])
        except ValueError:
            raise ConfigError(SEED_ENV, f"not an integer: {env[SEED_ENV]!r}") from None
        source = SEED_ENV
    else:
        source = "default"
    cfg = ExperimentConfig.from_dict(data)
    return cfg, {"overrides": list(overrides), "override_keys": applied, "seed_source": source}


def _floats(text):
    return tuple(float(v) for v in text.split(",") if v.strip())


def build_parser():
    ap = argparse.ArgumentParser(prog="radmm", description="Relaxed ADMM over lossy networks")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="override a config key (repeatable)")
        p.add_argument("--seed", type=int, help="master seed (falls back to $RADMM_SEED)")
        p.add_argument("--unsafe-lossy-alg1", action="store_true",
                       help="allow packet loss with Algorithm 1 (no convergence claim)")
        p.add_argument("--workers", type=int, default=1, help="worker processes")
        return p

    common(sub.add_parser("run", help="Monte-Carlo traces for one parameter set"))
    sw = common(sub.add_parser("sweep", help="stability classification over an (alpha, rho, p) grid"))
    sw.add_argument("--alphas", type=_floats, default=DEFAULT_SWEEP_ALPHAS)
    sw.add_argument("--rhos", type=_floats, default=DEFAULT_SWEEP_RHOS)
    sw.add_argument("--ps", type=_floats, default=DEFAULT_SWEEP_PS)
    st = common(sub.add_parser("stepsize", help="averaged traces for several alphas"))
    st.add_argument("--alphas", type=_floats, default=DEFAULT_STEPSIZE_ALPHAS)
    cp = common(sub.add_parser("compare", help="co-simulate Algorithms 1 and 2"))
    cp.add_argument("--rounds", type=int, default=100)
    cp.add_argument("--edgelist", help="graph file (first line N, then 'i j' per edge)")
    ct = common(sub.add_parser("counts", help="per-node resource counts"))
    ct.add_argument("--edgelist", help="graph file (first line N, then 'i j' per edge)")
    return ap


def _guaranteed(cfg, alpha=None):
    a = cfg.alpha if alpha is None else alpha
    return 0 < a < 1 and cfg.rho > 0 and (cfg.variant != 1 or cfg.p == 0)


class _Output:
    """Collects files and writes them (single writer, write-then-rename)."""

    def __init__(self, out_dir, command, digest):
        self.dir = out_dir
        self.stem = f"{command}-{digest}"
        self.files = []

    def path(self, suffix):
        return os.path.join(self.dir, f"{self.stem}{suffix}")

    def write(self, suffix, text):
        p = self.path(suffix)
        atomic_write(p, text)
        self.files.append(p)
        return p


def _meta(cfg, provenance, command, extra, started):
    return {
        "command": command,
        "artifact_version": __version__,
        "config": cfg.to_dict(),
        "config_digest": cfg.digest(),
        **provenance,
        "extra": extra,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "wall_time_s": time.time() - started,
    }


def _digest(cfg, extra):
    blob = json.dumps({"config": cfg.to_dict(), "extra": extra}, sort_keys=True)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]


def _load_graph_problem(cfg, edgelist):
    pb = draw_problem(cfg, 0)
    if edgelist is None:
        return pb.graph, pb.costs
    g = read_edgelist(edgelist)
    if not is_connected(g):
        raise ConfigError("edgelist", f"{edgelist} describes a disconnected graph")
    c = cfg.costs
    costs = make_random_quadratics(g.n_nodes, pb.seed, c.a_range, c.b_range, c.c_range, c.dim)
    return g, costs


def cmd_run(cfg, out, args):
    res = monte_carlo(cfg, workers=args.workers)
    out.write("-trace.csv", trace_csv(res.records))
    out.write("-aggregate.csv", aggregate_csv(res))
    outcomes = {}
    for r in res.records:
        outcomes[r.outcome] = outcomes.get(r.outcome, 0) + 1
    print(f"runs: {len(res.records)}  outcomes: {outcomes}  "
          f"mean iters to {cfg.target:g}: {res.mean_iters_to_target():.1f}")
    extra = {"outcomes": outcomes, "mean_iters_to_target": res.mean_iters_to_target()}
    bad = res.n_diverged and _guaranteed(cfg)
    return (EXIT_DIVERGED if bad else EXIT_OK), extra


def cmd_sweep(cfg, out, args):
    sw = stability_sweep(cfg, args.alphas, args.rhos, args.ps, workers=args.workers)
    out.write(".csv", sweep_csv(sw))
    boundary = {fmt(p): {fmt(r): sw.alpha_max(p, r) for r in sw.rhos} for p in sw.ps}
    for p, row in boundary.items():
        print(f"p={p}: alpha_max by rho {row}")
    bad = any(c.outcome == DIVERGED and _guaranteed(cfg, c.alpha) for c in sw.cells)
    return (EXIT_DIVERGED if bad else EXIT_OK), {"alpha_max": boundary}


def cmd_stepsize(cfg, out, args):
    results = stepsize_study(args.alphas, cfg, workers=args.workers)
    out.write("-aggregate.csv", aggregate_csv(list(results.values())))
    out.write("-trace.csv", trace_csv([r for res in results.values() for r in res.records]))
    its = {fmt(a): res.mean_iters_to_target() for a, res in results.items()}
    for a, v in its.items():
        print(f"alpha={a}: mean iters to {cfg.target:g} = {v:.1f}")
    bad = any(res.n_diverged and _guaranteed(cfg, a) for a, res in results.items())
    return (EXIT_DIVERGED if bad else EXIT_OK), {"mean_iters_to_target": its}


def compare_algorithms(graph, costs, alpha, rho, rounds, seed=0):
    """Co-simulate Algorithms 1 and 2 from matched random states.

    Algorithm 2 starts from a random ``z``; Algorithm 1 from
    ``y = (I + P) z / (2 rho)``, ``w = (I - P) z / 2`` so that
    ``z = w + rho y``. Returns the largest deviation between the two
    ``x``-trajectories and, for ``alpha = 1/2``, between Algorithm 1 and the
    classical ADMM step.
    """
    dim = costs[0].dim
    z0 = _rng.generator(seed, "compare").standard_normal((graph.n_slots, dim))
    s1 = alg1_state_from_z(graph, costs, z0, rho)
    s2 = alg2_state_from_alg1(s1, rho)
    dev = 0.0
    admm_dev = 0.0 if alpha == 0.5 else None
    for _ in range(rounds):
        s2, _msgs = alg2_step(s2, graph, costs, alpha, rho)
        dev = max(dev, float(np.max(np.abs(s2.x - s1.x))))
        if admm_dev is not None:
            ref = admm_step(s1, graph, costs, rho)
        s1 = alg1_step(s1, graph, costs, alpha, rho)
        if admm_dev is not None:
            admm_dev = max(admm_dev, float(max(np.max(np.abs(ref.x - s1.x)),
                                               np.max(np.abs(ref.y - s1.y)),
                                               np.max(np.abs(ref.w - s1.w)))))
    return dev, admm_dev


def node_counts(graph, costs, alpha, rho):
    """Measured vs tabulated per-node counts for both implementations."""
    dim = costs[0].dim
    rows = []
    measured = {}
    for variant, init in ((1, alg1_zero_state), (2, alg2_zero_state)):
        net = SyncNetwork(graph, costs, alpha, rho, variant=variant)
        st = init(graph, dim)
        (net.init_alg1 if variant == 1 else net.init_alg2)(st)
        net.step()
        measured[variant] = net.measured_counts()
    for i in range(graph.n_nodes):
        d = len(graph.neighbors[i])
        rows.append({"node": i, "degree": d,
                     "alg1_measured": measured[1][i], "alg1_table": resource_counts(1, d),
                     "alg2_measured": measured[2][i], "alg2_table": resource_counts(2, d)})
    return rows


def cmd_compare(cfg, out, args):
    graph, costs = _load_graph_problem(cfg, args.edgelist)
    dev, admm_dev = compare_algorithms(graph, costs, cfg.alpha, cfg.rho, args.rounds, cfg.seed)
    counts = node_counts(graph, costs, cfg.alpha, cfg.rho)
    report = {"rounds": args.rounds, "alpha": cfg.alpha, "rho": cfg.rho,
              "max_x_deviation": dev, "admm_reduction_deviation": admm_dev,
              "tolerance": EQUIVALENCE_TOL, "counts": counts}
    out.write(".json", json.dumps(report, indent=2, default=list) + "\n")
    print(f"max |x_alg1 - x_alg2| over {args.rounds} rounds: {dev:.3e}")
    if admm_dev is not None:
        print(f"alpha = 1/2 vs classical ADMM: {admm_dev:.3e}")
    for row in counts:
        if row["degree"] == 3:
            print(f"degree-3 node {row['node']}: alg1 {row['alg1_table']} vs alg2 {row['alg2_table']}")
            break
    return (EXIT_EQUIVALENCE if dev > EQUIVALENCE_TOL else EXIT_OK), {"max_x_deviation": dev}


def cmd_counts(cfg, out, args):
    graph, costs = _load_graph_problem(cfg, args.edgelist)
    rows = node_counts(graph, costs, cfg.alpha, cfg.rho)
    lines = ["node,degree,alg1_updated,alg1_stored,alg2_updated,alg2_stored"]
    for r in rows:
        a1, a2 = r["alg1_measured"], r["alg2_measured"]
        lines.append(f"{r['node']},{r['degree']},{a1[0]},{a1[1]},{a2[0]},{a2[1]}")
        print(f"node {r['node']} (degree {r['degree']}): "
              f"alg1 {tuple(a1)} table {r['alg1_table']}, alg2 {tuple(a2)} table {r['alg2_table']}")
    out.write(".csv", "\n".join(lines) + "\n")
    mismatch = [r["node"] for r in rows
                if tuple(r["alg1_measured"]) != r["alg1_table"]
                or tuple(r["alg2_measured"]) != r["alg2_table"]]
    return (EXIT_EQUIVALENCE if mismatch else EXIT_OK), {"mismatched_nodes": mismatch}


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "stepsize": cmd_stepsize,
            "compare": cmd_compare, "counts": cmd_counts}


def _command_extra(args):
    extra = {}
    for key in ("alphas", "rhos", "ps", "rounds", "edgelist"):
        if hasattr(args, key):
            v = getattr(args, key)
            extra[key] = list(v) if isinstance(v, tuple) else v
    return extra


def main(argv=None):
    args = build_parser().parse_args(argv)
    started = time.time()
    overrides = list(args.overrides)
    if args.unsafe_lossy_alg1:
        overrides.append("unsafe_lossy_alg1=true")
    try:
        cfg, provenance = parse_config(args.config, overrides, seed=args.seed)
        extra = _command_extra(args)
        digest = _digest(cfg, extra)
        if not os.path.isdir(args.out):
            os.makedirs(args.out, exist_ok=True)
        out = _Output(args.out, args.command, digest)
        code, summary = COMMANDS[args.command](cfg, out, args)
        meta = _meta(cfg, provenance, args.command, {**extra, **summary}, started)
        meta["outputs"] = [os.path.basename(p) for p in out.files]
        meta["exit_code"] = code
        out.write("-meta.json", json.dumps(meta, indent=2, sort_keys=True, default=str) + "\n")
    except (ConfigError, ParameterError, InfeasibleGraphError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    for p in out.files:
        print(f"wrote {p}")
    return code


if __name__ == "__main__":
    sys.exit(main())

"""Scenario files, experiment orchestration and report bundles.

A scenario is a YAML document (extension ``.cfg``) with the sections::

    name: star20
    seed: 0
    game:      {kind: cournot, n_agents: 20, capacity: 20, box: [0, 10], constants: declared}
    graph:     {topology: star}
    params:    {c: 0.5, delta: 300, kappa_inv: 500, tau_inv: 2000, upsilon_inv: 300, alpha_inv: 300}
    run:       {max_iter: 100000, tol: 1.0e-3, record_every: 100}
    baseline:  {nu: 200, tau: 0.01, mixing_eps: 0.05, max_updates: 1000}   # optional

Unknown keys are rejected. Step sizes can be given inverted (``tau_inv``) or
directly (``tau``), as scalars, per-agent lists or ``auto``. Graph edges in
``edge_list`` graphs are 1-based pairs.
"""

import copy
import csv
import io
import json
import os
from dataclasses import dataclass, field

import numpy as np
import yaml

from . import baseline as _baseline
from .errors import CertificationError, ComparisonError, ConfigError, DomainError, GNEError
from .game import GameConstants, cournot_instance, estimate_constants, quadratic_game
from .graph import build_graph, laplacian
from .kkt import active_set_reference, solve_reference_gne
from .params import AlgorithmParams, assemble_phi, certify
from .solver import TRACE_COLUMNS, fixed_point_state, initial_state, run, step
from .splitting import (SplitState, apply_phi, dense_B_skew, fb_inclusion_residual,
                        operator_B_skew, reduced_step, restricted_monotonicity_probe)

SCENARIO_DIR = os.path.join(os.path.dirname(__file__), "scenarios")
BUNDLED = ("star20", "ring20", "ring20_x10", "star20_baseline", "ring20_baseline")

_TOP_KEYS = {"name", "seed", "game", "graph", "params", "run", "baseline"}
_GAME_KEYS = {
    "cournot": {"kind", "n_agents", "capacity", "box", "constants"},
    "quadratic": {"kind", "q", "r", "s", "p", "h", "lower", "upper", "A", "b", "constants"},
}
_GRAPH_KEYS = {"topology", "n_nodes", "edges", "weights"}
_STEP_KEYS = ("kappa", "tau", "upsilon", "alpha")
_PARAM_KEYS = ({"c", "delta", "delta_margin", "kappa_fraction"}
               | set(_STEP_KEYS) | {k + "_inv" for k in _STEP_KEYS})
_RUN_DEFAULTS = {"max_iter": 10_000, "tol": 1e-8, "record_every": 100, "x0": "zero",
                 "verify_pairs": 5}
_BASELINE_DEFAULTS = {"nu": None, "tau": None, "mixing_eps": None, "max_updates": 1000,
                      "record_every": 1}


@dataclass
class Scenario:
    """Validated scenario; ``config`` is the normalized document."""

    config: dict
    source: str = "<memory>"

    @property
    def name(self):
        return self.config["name"]

    @property
    def seed(self):
        return self.config["seed"]

    def emit(self):
        return emit_config(self.config)

    def has_auto(self):
        p = self.config["params"]
        return any(p.get(k) == "auto" for k in _PARAM_KEYS)


@dataclass
class ReportBundle:
    config: dict
    certificate: dict = None
    reference: dict = None
    traces: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    verification: list = field(default_factory=list)
    errors: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.errors

    def exit_code(self):
        stages = {e["type"] for e in self.errors}
        if "CertificationError" in stages:
            return 2
        if "NumericalError" in stages:
            return 3
        return 1 if self.errors else 0

    def write(self, out_dir):
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "resolved.cfg"), "w") as fh:
            fh.write(emit_config(self.config))
        _dump_json(os.path.join(out_dir, "summary.json"), self.summary)
        _dump_json(os.path.join(out_dir, "errors.json"), self.errors)
        if self.certificate is not None:
            _dump_json(os.path.join(out_dir, "certificate.json"), self.certificate)
        if self.reference is not None:
            _dump_json(os.path.join(out_dir, "reference.json"), self.reference)
        if self.verification:
            _dump_json(os.path.join(out_dir, "verify.json"), self.verification)
        for label, trace in self.traces.items():
            trace.to_csv(os.path.join(out_dir, f"trace_{label}.csv"))
            with open(os.path.join(out_dir, f"actions_{label}.csv"), "w", newline="") as fh:
                fh.write(actions_csv(trace))


def _dump_json(path, obj):
    with open(path, "w") as fh:
        json.dump(_plain(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _plain(obj):
    """Convert numpy scalars and arrays to plain Python for serialization."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def emit_config(config):
    return yaml.safe_dump(_plain(config), sort_keys=False, default_flow_style=None)


def actions_csv(trace):
    """Action profiles against communication rounds (one column per agent)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    n_cols = len(trace.actions[0]) if trace.actions else 0
    w.writerow(["iter", "comm_round"] + [f"x{i + 1}" for i in range(n_cols)])
    for k, rounds, x in zip(trace.iterations, trace.comm_rounds, trace.actions):
        w.writerow([int(k), int(rounds)] + [repr(float(v)) for v in x])
    return buf.getvalue()


# ---------------------------------------------------------------- loading

def resolve_path(path):
    """Return ``path`` if it exists, else the bundled scenario of that name."""
    if os.path.exists(path):
        return path
    name = os.path.basename(path)
    if not name.endswith(".cfg"):
        name += ".cfg"
    bundled = os.path.join(SCENARIO_DIR, name)
    if os.path.exists(bundled):
        return bundled
    raise FileNotFoundError(path)


def load_scenario(path):
    """Read and validate a scenario file (bundled names such as ``star20.cfg`` also work)."""
    path = resolve_path(path)
    with open(path) as fh:
        text = fh.read()
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("<root>", f"not valid YAML: {exc}") from exc
    default_name = os.path.splitext(os.path.basename(path))[0]
    return Scenario(validate_config(doc, default_name), source=path)


def validate_config(doc, default_name="scenario"):
    """Check a parsed document against the schema and fill in defaults."""
    if not isinstance(doc, dict):
        raise ConfigError("<root>", "expected a mapping")
    _reject_unknown(doc, _TOP_KEYS, "")
    for key in ("game", "graph", "params"):
        if key not in doc:
            raise ConfigError(key)
        if not isinstance(doc[key], dict):
            raise ConfigError(key, "expected a mapping")
    cfg = {
        "name": str(doc.get("name", default_name)),
        "seed": _int(doc.get("seed", 0), "seed", minimum=0),
    }
    cfg["game"] = _validate_game(doc["game"])
    cfg["graph"] = _validate_graph(doc["graph"])
    cfg["params"] = _validate_params(doc["params"])
    cfg["run"] = _validate_section(doc.get("run") or {}, _RUN_DEFAULTS, "run")
    if doc.get("baseline") is not None:
        cfg["baseline"] = _validate_section(doc["baseline"], _BASELINE_DEFAULTS, "baseline")
    return cfg


def _reject_unknown(d, allowed, prefix):
    for key in d:
        if key not in allowed:
            raise ConfigError(f"{prefix}{key}", "unknown key")


def _number(v, key, positive=False, allow_none=False):
    if v is None and allow_none:
        return None
    try:
        x = float(v)
    except (TypeError, ValueError):
        raise ConfigError(key, f"expected a number, got {v!r}") from None
    if not np.isfinite(x) or (positive and x <= 0):
        raise ConfigError(key, f"expected a {'positive ' if positive else ''}finite number, got {v!r}")
    return x


def _int(v, key, minimum=1):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or int(v) != v or v < minimum:
        raise ConfigError(key, f"expected an integer >= {minimum}, got {v!r}")
    return int(v)


def _numbers(v, key):
    try:
        arr = np.asarray(v, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(key, "expected a number or a list of numbers") from None
    if not np.all(np.isfinite(arr)):
        raise ConfigError(key, "entries must be finite")
    return arr.tolist()


def _validate_game(g):
    gtype = g.get("kind")
    if gtype not in _GAME_KEYS:
        raise ConfigError("game.kind", f"expected one of {sorted(_GAME_KEYS)}")
    _reject_unknown(g, _GAME_KEYS[gtype], "game.")
    out = {"kind": gtype}
    if gtype == "cournot":
        out["n_agents"] = _int(g.get("n_agents", 20), "game.n_agents", minimum=2)
        out["capacity"] = _number(g.get("capacity", 20.0), "game.capacity")
        box = g.get("box", [0.0, 10.0])
        if not isinstance(box, (list, tuple)) or len(box) != 2:
            raise ConfigError("game.box", "expected [lower, upper]")
        out["box"] = [_number(box[0], "game.box"), _number(box[1], "game.box")]
    else:
        for key in ("q", "r", "s", "p", "h", "lower", "upper", "A", "b"):
            if key not in g:
                raise ConfigError(f"game.{key}")
            out[key] = _numbers(g[key], f"game.{key}")
    out["constants"] = _validate_constants(g.get("constants", "declared"), gtype)
    return out


def _validate_constants(c, gtype):
    if isinstance(c, str):
        allowed = ("declared", "exact", "estimate") if gtype == "cournot" else ("estimate",)
        if c not in allowed:
            raise ConfigError("game.constants", f"expected one of {allowed} or a mapping")
        return c
    if isinstance(c, dict):
        _reject_unknown(c, {"mu", "lfx", "lfu", "l_F"}, "game.constants.")
        out = {}
        for key in ("mu", "lfx", "lfu"):
            if key not in c:
                raise ConfigError(f"game.constants.{key}")
            out[key] = _number(c[key], f"game.constants.{key}", positive=key != "lfu")
        if out["lfu"] < 0:
            raise ConfigError("game.constants.lfu", "must be non-negative")
        if c.get("l_F") is not None:
            out["l_F"] = _number(c["l_F"], "game.constants.l_F", positive=True)
        return out
    raise ConfigError("game.constants", "expected a string or a mapping")


def _validate_graph(g):
    _reject_unknown(g, _GRAPH_KEYS, "graph.")
    topo = g.get("topology")
    if topo not in ("star", "ring", "path", "complete", "edge_list"):
        raise ConfigError("graph.topology", "expected star, ring, path, complete or edge_list")
    out = {"topology": topo}
    if g.get("n_nodes") is not None:
        out["n_nodes"] = _int(g["n_nodes"], "graph.n_nodes", minimum=2)
    if topo == "edge_list":
        edges = g.get("edges")
        if not edges:
            raise ConfigError("graph.edges")
        try:
            out["edges"] = [[int(a), int(b)] for a, b in edges]
        except (TypeError, ValueError):
            raise ConfigError("graph.edges", "expected a list of 1-based [i, j] pairs") from None
        if min(min(e) for e in out["edges"]) < 1:
            raise ConfigError("graph.edges", "node labels are 1-based")
    elif "edges" in g:
        raise ConfigError("graph.edges", "only allowed for edge_list graphs")
    if g.get("weights") is not None:
        out["weights"] = _numbers(g["weights"], "graph.weights")
    return out


def _validate_params(p):
    _reject_unknown(p, _PARAM_KEYS, "params.")
    if "c" not in p:
        raise ConfigError("params.c")
    out = {"c": _number(p["c"], "params.c", positive=True)}
    out["delta"] = _auto_or(p.get("delta", "auto"), "params.delta")
    out["delta_margin"] = _number(p.get("delta_margin", 0.1), "params.delta_margin", positive=True)
    out["kappa_fraction"] = _number(p.get("kappa_fraction", 0.5), "params.kappa_fraction",
                                    positive=True)
    for key in _STEP_KEYS:
        direct, inv = p.get(key), p.get(key + "_inv")
        if direct is not None and inv is not None:
            raise ConfigError(f"params.{key}", f"give either {key} or {key}_inv, not both")
        if direct is not None:
            out[key] = _auto_or(direct, f"params.{key}")
        else:
            out[key + "_inv"] = _auto_or("auto" if inv is None else inv, f"params.{key}_inv")
    return out


def _auto_or(v, key):
    if v == "auto":
        return "auto"
    if isinstance(v, (list, tuple)):
        vals = _numbers(v, key)
        if any(x <= 0 for x in vals):
            raise ConfigError(key, "entries must be positive")
        return vals
    return _number(v, key, positive=True)


def _validate_section(d, defaults, name):
    if not isinstance(d, dict):
        raise ConfigError(name, "expected a mapping")
    _reject_unknown(d, set(defaults), f"{name}.")
    out = {}
    for key, default in defaults.items():
        v = d.get(key, default)
        full = f"{name}.{key}"
        if key in ("max_iter", "record_every", "max_updates", "nu"):
            if v is None:
                raise ConfigError(full)
            out[key] = _int(v, full)
        elif key == "verify_pairs":
            out[key] = _int(v, full, minimum=0)
        elif key == "tol":
            out[key] = _number(v, full, positive=True, allow_none=True)
        elif key == "x0":
            out[key] = "zero" if v == "zero" else _numbers(v, full)
        else:
            if v is None:
                raise ConfigError(full)
            out[key] = _number(v, full, positive=True)
    return out


# ---------------------------------------------------------------- building

def build_game(scenario):
    g = scenario.config["game"]
    consts = g["constants"]
    if g["kind"] == "cournot":
        mode = consts if consts in ("declared", "exact") else None
        game = cournot_instance(g["n_agents"], g["capacity"], tuple(g["box"]), constants=mode)
    else:
        N = len(g["q"])
        A = np.asarray(g["A"], dtype=float)
        b = np.asarray(g["b"], dtype=float).reshape(N, -1)
        try:
            game = quadratic_game(g["q"], g["r"], g["s"], g["p"], g["h"], g["lower"], g["upper"],
                                  A, b)
        except (ValueError, DomainError) as exc:
            raise ConfigError("game", str(exc)) from exc
    if consts == "estimate":
        game = game.with_constants(estimate_constants(game, seed=scenario.seed))
    elif isinstance(consts, dict):
        game = game.with_constants(GameConstants(**consts))
    return game


def build_comm_graph(scenario):
    g = scenario.config["graph"]
    N = _n_agents(scenario)
    n_nodes = g.get("n_nodes", N)
    if n_nodes != N:
        raise ConfigError("graph.n_nodes", f"graph has {n_nodes} nodes, game has {N} agents")
    edges = None
    if g["topology"] == "edge_list":
        edges = [(a - 1, b - 1) for a, b in g["edges"]]
    return build_graph(g["topology"], N, edges=edges, weights=g.get("weights"))


def _n_agents(scenario):
    g = scenario.config["game"]
    return g["n_agents"] if g["kind"] == "cournot" else len(g["q"])


def certify_scenario(scenario, game=None, lap=None):
    """Return ``(report, params)``; auto entries are derived, pinned ones audited."""
    if game is None:
        game = build_game(scenario)
    if lap is None:
        lap = laplacian(build_comm_graph(scenario))
    p = scenario.config["params"]
    pinned = {}
    if p["delta"] != "auto":
        pinned["delta"] = p["delta"]
    for key in _STEP_KEYS:
        if p.get(key) not in (None, "auto"):
            pinned[key + "_inv"] = 1.0 / np.asarray(p[key], dtype=float)
        elif p.get(key + "_inv") not in (None, "auto"):
            pinned[key + "_inv"] = p[key + "_inv"]
    report, params = certify(game, lap, p["c"], p["delta_margin"], p["kappa_fraction"],
                             pinned=pinned or None)
    # Exact step values from a resolved config bypass the inverse round trip.
    exact = {key: np.broadcast_to(np.asarray(p[key], dtype=float), (game.n_agents,)).copy()
             for key in ("tau", "upsilon", "alpha") if p.get(key) not in (None, "auto")}
    if exact or p.get("kappa") not in (None, "auto"):
        kappa = float(p["kappa"]) if p.get("kappa") not in (None, "auto") else params.kappa
        params = AlgorithmParams(params.c, kappa, params.delta,
                                 exact.get("tau", params.tau), exact.get("upsilon", params.upsilon),
                                 exact.get("alpha", params.alpha))
    if not pinned and not report.passed:
        raise CertificationError("derived parameters fail the certificate", report=report)
    return report, params


def resolved_config(scenario, params, game):
    """Scenario document with every auto value replaced by the value actually used."""
    cfg = copy.deepcopy(scenario.config)
    if cfg["game"]["constants"] == "estimate":
        c = game.constants
        cfg["game"]["constants"] = {"mu": c.mu, "lfx": c.lfx, "lfu": c.lfu, "l_F": c.l_F}
    p = {"c": params.c, "delta": params.delta,
         "delta_margin": cfg["params"]["delta_margin"],
         "kappa_fraction": cfg["params"]["kappa_fraction"],
         "kappa": params.kappa}
    for key in ("tau", "upsilon", "alpha"):
        v = np.asarray(getattr(params, key))
        p[key] = float(v[0]) if np.all(v == v[0]) else v.tolist()
    cfg["params"] = p
    return cfg


def _x0(scenario, game):
    x0 = scenario.config["run"]["x0"]
    if x0 == "zero":
        return None
    arr = np.asarray(x0, dtype=float)
    if arr.size != game.n_agents * game.dim:
        raise ConfigError("run.x0", f"expected {game.n_agents * game.dim} entries")
    return arr.reshape(game.n_agents, game.dim)


# ---------------------------------------------------------------- verification

def verify_scenario(scenario, game=None, lap=None, params=None, reference=None, report=None):
    """Run the splitting checks; returns a list of dicts with name, value, limit, passed."""
    if game is None:
        game = build_game(scenario)
    if lap is None:
        lap = laplacian(build_comm_graph(scenario))
    if params is None:
        report, params = certify_scenario(scenario, game, lap)
    if reference is None:
        reference = solve_reference_gne(game)
    rng = np.random.default_rng(scenario.seed)
    checks = []

    def add(name, value, limit, passed):
        checks.append({"check": name, "value": float(value), "limit": float(limit),
                       "passed": bool(passed)})

    # consecutive iterates of the network iteration satisfy the inclusion
    n_pairs = scenario.config["run"]["verify_pairs"]
    horizon = min(scenario.config["run"]["max_iter"], 2000)
    picks = set(int(k) for k in rng.choice(horizon, size=min(n_pairs, horizon), replace=False))
    st = initial_state(game, _x0(scenario, game))
    worst = 0.0
    for k in range(max(picks) + 1 if picks else 0):
        nxt = step(st, game, lap, params)
        if k in picks:
            r = fb_inclusion_residual(st.split_vector(), nxt.split_vector(), game, lap, params)
            worst = max(worst, r)
        st = nxt
    if picks:
        add("fb_inclusion_consecutive_iterates", worst, 1e-8, worst <= 1e-8)

    fp = fixed_point_state(game, lap, reference).split_vector()
    r = fb_inclusion_residual(fp, fp, game, lap, params)
    add("fb_inclusion_fixed_point", r, 1e-10, r <= 1e-10)

    st = initial_state(game, _x0(scenario, game))
    ss = SplitState.initial(game, st.x)
    gap = 0.0
    for _ in range(10):
        st = step(st, game, lap, params, fused=False)
        ss = reduced_step(ss, game, lap, params)
        gap = max(gap, np.abs(ss.x - st.x).max(), np.abs(ss.to_network_u() - st.u).max(),
                  np.abs(ss.z - st.z).max(), np.abs(ss.lam - st.lam).max())
    add("reduced_iteration_mapping", gap, 1e-10, gap <= 1e-10)

    leak = ss.parallel_leak()
    add("reduced_iteration_stays_orthogonal", leak, 1e-10, leak <= 1e-10 * (1 + np.linalg.norm(ss.u_perp)))

    w = rng.standard_normal(fp.size)
    skew = abs(w @ operator_B_skew(w, game, lap)) / (w @ w)
    if game.n_agents <= 10:
        B = dense_B_skew(game, lap)
        skew = max(skew, np.abs(B + B.T).max())
    add("skew_part_antisymmetric", skew, 1e-10, skew <= 1e-10)

    phi = assemble_phi(params, lap, game)
    d = rng.standard_normal(fp.size)
    diff = np.abs(phi @ d - apply_phi(d, game, lap, params)).max()
    limit = 1e-9 * np.linalg.norm(phi, 2) * (1 + np.abs(d).max())
    add("precondition_matrix_free_vs_dense", diff, limit, diff <= limit)

    if report is None:
        report, _ = certify_scenario(scenario, game, lap)
    probe = restricted_monotonicity_probe(game, lap, params.c, samples=200, seed=scenario.seed)
    add("restricted_monotonicity_probe", probe, report.mu_tilde - 1e-6,
        probe >= report.mu_tilde - 1e-6)
    return checks


# ---------------------------------------------------------------- orchestration

def run_scenario(scenario, out_dir=None):
    """certify -> reference -> run -> baseline -> verify; errors are recorded per stage.

    Writes the bundle into ``out_dir`` when given and returns it.
    """
    bundle = ReportBundle(config=copy.deepcopy(scenario.config))
    stage = "build"
    try:
        game = build_game(scenario)
        graph = build_comm_graph(scenario)
        lap = laplacian(graph)

        stage = "certify"
        report, params = certify_scenario(scenario, game, lap)
        bundle.certificate = report.as_dict()
        bundle.config = resolved_config(scenario, params, game)

        stage = "reference"
        ref = solve_reference_gne(game)
        bundle.reference = {"x": ref.x, "lambda": ref.lam, "active": list(ref.active),
                            "kkt_residual": ref.residual, "iterations": ref.iterations}
        try:
            alt = active_set_reference(game)
            bundle.reference["active_set_max_abs_diff"] = float(np.abs(alt.x - ref.x).max())
        except DomainError:
            pass

        stage = "run"
        rc = scenario.config["run"]
        phi = assemble_phi(params, lap, game)
        anchor = fixed_point_state(game, lap, ref).split_vector()
        trace = run(game, lap, params, x0=_x0(scenario, game), max_iter=rc["max_iter"],
                    tol=rc["tol"], record_every=rc["record_every"], reference=ref,
                    phi=phi, anchor=anchor)
        bundle.traces["algorithm"] = trace

        bc = scenario.config.get("baseline")
        if bc is not None:
            stage = "baseline"
            bundle.traces["baseline"] = _baseline.baseline_run(
                game, graph, bc["nu"], bc["tau"], bc["max_updates"], bc["mixing_eps"],
                reference=ref, x0=_x0(scenario, game), record_every=bc["record_every"])

        stage = "verify"
        bundle.verification = verify_scenario(scenario, game, lap, params, ref, report)
        failed = [c["check"] for c in bundle.verification if not c["passed"]]
        if failed:
            bundle.errors.append({"stage": "verify", "type": "VerificationError",
                                  "message": "failed checks: " + ", ".join(failed)})
    except (GNEError, ValueError, ArithmeticError) as exc:
        bundle.errors.append({"stage": stage, "type": type(exc).__name__, "message": str(exc)})
    bundle.summary = summarize(bundle)
    if out_dir is not None:
        bundle.write(out_dir)
    return bundle


def summarize(bundle):
    """Summary statistics, all recomputable from the traces."""
    out = {"name": bundle.config["name"], "errors": [e["stage"] for e in bundle.errors]}
    if bundle.certificate is not None:
        out["certificate_passed"] = bundle.certificate["passed"]
    for label, tr in bundle.traces.items():
        last = dict(zip(TRACE_COLUMNS, tr.rows[-1]))
        k1 = tr.first_iteration_below("normalized_error_pct", 1.0)
        out[label] = {
            "status": tr.status,
            "iterations": int(tr.iterations[-1]),
            "comm_rounds": int(tr.comm_rounds[-1]),
            "comm_rounds_per_iter": tr.comm_rounds_per_iter,
            "iterations_to_1pct": k1,
            "comm_rounds_to_1pct": None if k1 is None else k1 * tr.comm_rounds_per_iter,
            "final_normalized_error_pct": last["normalized_error_pct"],
            "final_kkt_residual": last["kkt_residual"],
            "final_consensus_u": last["consensus_u"],
            "final_consensus_lambda": last["consensus_lambda"],
        }
    if "baseline" in bundle.traces:
        base = bundle.traces["baseline"]
        out["baseline"]["plateau_pct"] = _baseline.plateau(base)
        if "algorithm" in bundle.traces:
            alg = bundle.traces["algorithm"]
            out["algorithm_error_at_baseline_horizon_pct"] = _error_at_round(
                alg, int(base.comm_rounds[-1]))
    return out


def _error_at_round(trace, rounds):
    """Last recorded normalized error at or before ``rounds`` communication rounds."""
    idx = np.flatnonzero(trace.comm_rounds <= rounds)
    return float(trace.column("normalized_error_pct")[idx[-1]]) if idx.size else None


# ---------------------------------------------------------------- comparison

@dataclass
class LoadedBundle:
    label: str
    config: dict
    series: dict  # label -> (comm_rounds, normalized_error_pct)


def load_bundle(path):
    with open(os.path.join(path, "resolved.cfg")) as fh:
        config = yaml.safe_load(fh)
    series = {}
    for kind in ("algorithm", "baseline"):
        fname = os.path.join(path, f"trace_{kind}.csv")
        if not os.path.exists(fname):
            continue
        with open(os.path.join(path, "summary.json")) as fh:
            per_iter = json.load(fh)[kind]["comm_rounds_per_iter"]
        with open(fname, newline="") as fh:
            rows = list(csv.DictReader(fh))
        rounds = np.array([int(r["iter"]) * per_iter for r in rows])
        err = np.array([float(r["normalized_error_pct"]) if r["normalized_error_pct"] else np.nan
                        for r in rows])
        series[kind] = (rounds, err)
    label = os.path.basename(os.path.normpath(path))
    return LoadedBundle(label, config, series)


@dataclass
class Comparison:
    labels: list
    rounds: np.ndarray
    errors: np.ndarray  # (len(rounds), len(labels))
    summary: list

    def to_csv(self, path=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["comm_round"] + self.labels)
        for r, row in zip(self.rounds, self.errors):
            w.writerow([int(r)] + ["" if np.isnan(v) else repr(float(v)) for v in row])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    def to_text(self):
        head = ["series", "final_err_pct", "delta_final", "rounds_to_10pct", "rounds_to_1pct",
                "rounds_to_0.1pct"]
        lines = ["  ".join(f"{h:>18}" for h in head)]
        for s in self.summary:
            vals = [s["series"], _fmt(s["final_error_pct"]), _fmt(s["delta_final_error_pct"]),
                    _fmt(s["rounds_to_10pct"]), _fmt(s["rounds_to_1pct"]),
                    _fmt(s["rounds_to_0.1pct"])]
            lines.append("  ".join(f"{v:>18}" for v in vals))
        return "\n".join(lines) + "\n"


def _fmt(v):
    if v is None:
        return "-"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{v:.6g}"


def compare(bundles):
    """Align normalized-error series of several bundles on the communication-round axis.

    ``bundles`` are :class:`LoadedBundle` objects or bundle directories. Each
    series is held constant between its records. Deltas are taken against the
    first series.

    Raises
    ------
    ComparisonError
        With fewer than two bundles, or when the bundles solve different games.
    """
    bundles = [b if isinstance(b, LoadedBundle) else load_bundle(b) for b in bundles]
    if len(bundles) < 2:
        raise ComparisonError("need at least two bundles")
    game0 = bundles[0].config["game"]
    for b in bundles[1:]:
        if b.config["game"] != game0:
            raise ComparisonError(f"bundle {b.label!r} solves a different game")
    labels, series = [], []
    for i, b in enumerate(bundles):
        for kind, s in b.series.items():
            label = f"{b.label}:{kind}"
            if label in labels:
                label = f"{i}:{label}"
            labels.append(label)
            series.append(s)
    if not series:
        raise ComparisonError("bundles contain no traces")
    grid = np.unique(np.concatenate([s[0] for s in series]))
    table = np.full((grid.size, len(series)), np.nan)
    for j, (rounds, err) in enumerate(series):
        idx = np.searchsorted(rounds, grid, side="right") - 1
        ok = idx >= 0
        table[ok, j] = err[idx[ok]]
    summary = []
    first_final = series[0][1][-1]
    for label, (rounds, err) in zip(labels, series):
        entry = {"series": label, "final_error_pct": float(err[-1]),
                 "delta_final_error_pct": float(err[-1] - first_final)}
        for thr, key in ((10.0, "rounds_to_10pct"), (1.0, "rounds_to_1pct"),
                         (0.1, "rounds_to_0.1pct")):
            hit = np.flatnonzero(err < thr)
            entry[key] = int(rounds[hit[0]]) if hit.size else None
        summary.append(entry)
    return Comparison(labels, grid, table, summary)


def spectrum(scenario):
    lap = laplacian(build_comm_graph(scenario))
    d = np.asarray(lap.degrees, dtype=float)
    return {"lambda2": lap.lambda2, "lambda_max": lap.lambda_max, "max_degree": float(d.max()),
            "degrees": d.tolist()}


def reference_summary(scenario):
    game = build_game(scenario)
    ref = solve_reference_gne(game)
    out = {"x": ref.x.tolist(), "lambda": ref.lam.tolist(), "kkt_residual": ref.residual,
           "active_coupling": list(ref.active), "iterations": ref.iterations}
    return out


__all__ = [
    "BUNDLED", "Comparison", "LoadedBundle", "ReportBundle", "Scenario", "build_comm_graph",
    "build_game", "certify_scenario", "compare", "emit_config", "load_bundle", "load_scenario",
    "reference_summary", "resolved_config", "run_scenario", "spectrum", "validate_config",
    "verify_scenario",
]

import numpy as np
import pytest

from aggne import (AlgorithmParams, GameConstants, build_graph, certify, cournot_instance,
                   laplacian, quadratic_game, solve_reference_gne)
from aggne.params import step_size_bounds
from aggne import harness

STAR_PINNED = dict(delta=300.0, kappa_inv=500.0, tau_inv=2000.0, upsilon_inv=300.0, alpha_inv=300.0)
RING_PINNED = dict(delta=1200.0, kappa_inv=2000.0, tau_inv=8000.0, upsilon_inv=1200.0,
                   alpha_inv=1200.0)


def exact_quadratic_constants(q, r, s):
    """Exact (mu, lfx, lfu) of a scalar quadratic aggregative game.

    Composite gradient of agent i: (q_i + r_i/N) x_i + (r_i + s_i/N) u_i + const.
    The pseudo-gradient Jacobian is diag(q + r/N) + diag(r + s/N) 11^T / N.
    """
    q, r, s = map(np.asarray, (q, r, s))
    N = q.size
    a = q + r / N
    c = r + s / N
    J = np.diag(a) + np.outer(c, np.ones(N)) / N
    mu = np.linalg.eigvalsh((J + J.T) / 2)[0]
    return float(mu), float(np.abs(a).max()), float(np.abs(c).max())


def random_cournot_like(N, seed, m=1):
    """Scalar-action quadratic game with random coefficients and a binding-ish capacity."""
    rng = np.random.default_rng(seed)
    q = rng.uniform(1.0, 2.0, N)
    r = rng.uniform(0.2, 0.8, N)
    s = np.zeros(N)
    p = rng.uniform(-20.0, -5.0, N)
    h = np.zeros(N)
    upper = rng.uniform(4.0, 10.0, N)
    A = rng.uniform(0.5, 1.5, (N, m, 1))
    b = np.full((N, m), rng.uniform(1.0, 3.0))
    mu, lfx, lfu = exact_quadratic_constants(q, r, s)
    return quadratic_game(q, r, s, p, h, np.zeros(N), upper, A, b,
                          constants=GameConstants(mu, lfx, lfu))


def random_setup(seed):
    """Random game, graph, delta and kappa for certification experiments."""
    rng = np.random.default_rng(seed)
    N = int(rng.integers(2, 7))
    n = int(rng.integers(1, 3))
    m = int(rng.integers(1, 3))
    topology = ["star", "ring", "path", "complete"][int(rng.integers(4))]
    g = quadratic_game(np.ones(N), np.zeros(N), np.zeros(N), np.zeros((N, n)), np.zeros((N, n)),
                       np.zeros((N, n)), np.ones((N, n)), rng.normal(size=(N, m, n)),
                       np.ones((N, m)), constants=GameConstants(1.0, 1.0, 1.0))
    G = build_graph(topology, N, weights=list(rng.uniform(0.2, 3.0, N * (N - 1) // 2)
                                              if topology == "complete" else
                                              rng.uniform(0.2, 3.0, N if topology == "ring" and N > 2
                                                          else N - 1)))
    lap = laplacian(G)
    delta = float(rng.uniform(0.1, 50.0))
    kappa = float(rng.uniform(0.05, 0.95) / delta)
    return rng, g, lap, delta, kappa


def within_bounds(seed):
    rng, g, lap, delta, kappa = random_setup(seed)
    tau, ups, alp = step_size_bounds(g, lap, delta, kappa)
    N = g.n_agents
    params = AlgorithmParams(1.0, kappa, delta, tau * rng.uniform(0.1, 1.0, N),
                             ups * rng.uniform(0.1, 1.0, N), alp * rng.uniform(0.1, 1.0, N))
    return params, g, lap


def violating(seed):
    """One step size family pushed so that its inverse drops below delta."""
    rng, g, lap, delta, kappa = random_setup(seed)
    tau, ups, alp = step_size_bounds(g, lap, delta, kappa)
    N = g.n_agents
    which = int(rng.integers(3))
    bad = 1.0 / (delta * rng.uniform(0.2, 0.9, N))
    steps = [tau, ups, alp]
    steps[which] = bad
    return AlgorithmParams(1.0, kappa, delta, *steps), g, lap


@pytest.fixture(scope="session")
def cournot20():
    return cournot_instance(20)


@pytest.fixture(scope="session")
def star20_lap():
    return laplacian(build_graph("star", 20))


@pytest.fixture(scope="session")
def ring20_lap():
    return laplacian(build_graph("ring", 20))


@pytest.fixture(scope="session")
def cournot_ref(cournot20):
    return solve_reference_gne(cournot20)


@pytest.fixture(scope="session")
def star20_setup(cournot20, star20_lap):
    report, params = certify(cournot20, star20_lap, 0.5, pinned=STAR_PINNED)
    return report, params


@pytest.fixture(scope="session")
def ring20_setup(cournot20, ring20_lap):
    report, params = certify(cournot20, ring20_lap, 4.0, pinned=RING_PINNED)
    return report, params


class BundledRuns:
    """Runs each bundled scenario at most once per session."""

    def __init__(self, root):
        self.root = root
        self.cache = {}

    def __call__(self, name):
        if name not in self.cache:
            import time
            scn = harness.load_scenario(f"{name}.cfg")
            t0 = time.perf_counter()
            bundle = harness.run_scenario(scn, out_dir=str(self.root / name))
            self.cache[name] = (bundle, time.perf_counter() - t0)
        return self.cache[name]


@pytest.fixture(scope="session")
def bundled_runs(tmp_path_factory):
    return BundledRuns(tmp_path_factory.mktemp("bundled"))

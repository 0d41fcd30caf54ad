"""Distributed GNE seeking iteration with aggregate tracking, and run traces.

One iteration updates actions ``x``, aggregate estimates ``u``, auxiliary
variables ``z`` and local multipliers ``lam`` in that order::

    x+   = P_Omega[x - tau (F(x, u) + Lambda^T lam + c L u)]
    u+   = u - kappa c L u + (x+ - x)
    z+   = z + upsilon L lam
    lam+ = P_+(lam - alpha [L lam + b - Lambda (2 x+ - x) + L (2 z+ - z)])

where ``F(x, u)`` is the extended pseudo-gradient. Each iteration needs two
neighbor exchanges: one for ``u`` and ``lam`` and one for ``2 z+ - z``.
"""

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NumericalError
from .kkt import kkt_residual

TRACE_COLUMNS = ("iter", "normalized_error_pct", "kkt_residual", "consensus_u",
                 "consensus_lambda", "sigma_gap", "phi_distance")
COMM_ROUNDS_PER_ITER = 2


def project_box(v, lo, hi):
    return np.clip(v, lo, hi)


def project_nonneg(v):
    return np.maximum(v, 0.0)


@dataclass(frozen=True, eq=False)
class NetworkState:
    """Snapshot of every agent's ``(x_i, u_i, z_i, lam_i)``; arrays of shape ``(N, n)`` / ``(N, m)``."""

    x: np.ndarray
    u: np.ndarray
    z: np.ndarray
    lam: np.ndarray
    k: int = 0

    def flat(self):
        return np.concatenate([self.x.ravel(), self.u.ravel(), self.z.ravel(), self.lam.ravel()])

    def split_vector(self):
        """``varpi = (x, P_perp u, z, lam)`` as one flat vector."""
        return np.concatenate([self.x.ravel(), (self.u - self.u.mean(axis=0)).ravel(),
                               self.z.ravel(), self.lam.ravel()])


def initial_state(game, x0=None, z0=None, lam0=None):
    """State with ``u0 = x0``; defaults ``x0 = P_Omega(0)``, ``z0 = lam0 = 0``."""
    N, n, m = game.n_agents, game.dim, game.n_coupling
    x = game.project(np.zeros((N, n))) if x0 is None else np.asarray(x0, dtype=float).reshape(N, n)
    if np.any(x < game.lower) or np.any(x > game.upper):
        raise DomainError("x0 must lie in the action boxes")
    z = np.zeros((N, m)) if z0 is None else np.asarray(z0, dtype=float).reshape(N, m).copy()
    lam = np.zeros((N, m)) if lam0 is None else np.asarray(lam0, dtype=float).reshape(N, m).copy()
    if np.any(lam < 0):
        raise DomainError("lam0 must be non-negative")
    return NetworkState(x.copy(), x.copy(), z, lam, 0)


class _Sweep:
    """Precomputed operands of one iteration for a fixed (game, graph, params).

    Works on the flat state ``s = (x, u, z, lam)``.
    """

    def __init__(self, game, lap, params):
        N, n, m = game.n_agents, game.dim, game.n_coupling
        if lap.n_nodes != N:
            raise DomainError(f"graph has {lap.n_nodes} nodes, game has {N} agents")
        self.game = game
        self.shape = (N, n, m)
        self.cuts = np.cumsum([N * n, N * n, N * m])
        self.L = lap.matrix
        self.N = N
        self.c = params.c
        self.kc = params.kappa * params.c
        self.tau = params.tau[:, None]
        self.ups = params.upsilon[:, None]
        self.alpha = params.alpha[:, None]
        self.lo, self.hi = game.lower, game.upper
        self.b = game.b_blocks

    def split(self, s):
        N, n, m = self.shape
        x, u, z, lam = np.split(s, self.cuts)
        return x.reshape(N, n), u.reshape(N, n), z.reshape(N, m), lam.reshape(N, m)

    def flat_step(self, s):
        return np.concatenate([a.ravel() for a in self(*self.split(s))])

    def __call__(self, x, u, z, lam):
        g = self.game
        L = self.L
        Lu = L @ u
        grad = g.grad_own(x, u) + g.grad_agg(x, u) / self.N
        x_new = np.clip(x - self.tau * (grad + g.apply_AT_blocks(lam) + self.c * Lu),
                        self.lo, self.hi)
        u_new = u - self.kc * Lu + (x_new - x)
        Llam = L @ lam
        z_new = z + self.ups * Llam
        A_ext = g.apply_A_blocks(2.0 * x_new - x)
        lam_new = np.maximum(
            lam - self.alpha * (Llam + self.b - A_ext + L @ (2.0 * z_new - z)), 0.0)
        return x_new, u_new, z_new, lam_new


class _AffineSweep(_Sweep):
    """The same iteration for quadratic games, fused into dense linear maps.

    With an affine extended pseudo-gradient every update is a linear map of
    the flat state (and of ``x+``) followed by a projection, which keeps the
    per-iteration cost at a handful of matrix-vector products.
    """

    def __init__(self, game, lap, params):
        super().__init__(game, lap, params)
        N, n, m = self.shape
        coef = game.quadratic
        In, Im = np.eye(N * n), np.eye(N * m)
        a_own = np.repeat(coef.q + coef.r / N, n)
        a_agg = np.repeat(coef.r + coef.s / N, n)
        g0 = (coef.p + coef.h / N).ravel()
        T = np.repeat(params.tau, n)[:, None]
        Y = np.repeat(params.upsilon, m)[:, None]
        Al = np.repeat(params.alpha, m)[:, None]
        Lu = lap.kron(n)
        Ll = lap.kron(m)
        Lam = game.block_diag_A()
        Znm = np.zeros((N * n, N * m))
        self.Mx = np.hstack([In - T * a_own[None, :] * In,
                             -T * (a_agg[None, :] * In + params.c * Lu),
                             Znm, -T * Lam.T])
        self.cx = -(T[:, 0] * g0)
        self.Muz = np.block([[-In, In - self.kc * Lu, Znm, Znm],
                             [Znm.T, Znm.T, Im, Y * Ll]])
        self.Ml = np.hstack([-Al * Lam, np.zeros((N * m, N * n)), -Al * Ll,
                             Im - Al * Ll - 2.0 * Al * (Ll @ (Y * Ll))])
        self.Mlx = 2.0 * Al * Lam
        self.cl = -(Al[:, 0] * game.b_blocks.ravel())
        self.lo_f = game.lower.ravel()
        self.hi_f = game.upper.ravel()
        self.nx = N * n

    def flat_step(self, s):
        x_new = np.minimum(np.maximum(self.Mx @ s + self.cx, self.lo_f), self.hi_f)
        uz = self.Muz @ s
        uz[:self.nx] += x_new
        lam_new = np.maximum(self.Ml @ s + self.Mlx @ x_new + self.cl, 0.0)
        return np.concatenate([x_new, uz, lam_new])

    def __call__(self, x, u, z, lam):
        s = np.concatenate([x.ravel(), u.ravel(), z.ravel(), lam.ravel()])
        return self.split(self.flat_step(s))


def make_sweep(game, lap, params, fused=True):
    if fused and game.quadratic is not None:
        return _AffineSweep(game, lap, params)
    return _Sweep(game, lap, params)


def step(state, game, lap, params, fused=True):
    """One synchronous iteration; returns a new :class:`NetworkState`.

    ``fused=False`` forces the oracle-based update even for quadratic games.
    """
    out = make_sweep(game, lap, params, fused)(state.x, state.u, state.z, state.lam)
    if not all(np.all(np.isfinite(a)) for a in out):
        raise NumericalError(f"non-finite iterate at iteration {state.k + 1}",
                             iteration=state.k + 1, state=state)
    return NetworkState(*out, k=state.k + 1)


def step_distributed(state, game, graph, params, executor=None):
    """Same iteration written as per-agent local rules over neighbor messages.

    Each of the two phases maps a local update over agents; ``executor``
    (anything with a ``map`` method, e.g. a thread pool) may run the agents
    of a phase concurrently. Neighbor sums are accumulated in sorted neighbor
    order, so the result does not depend on the schedule.
    """
    N = game.n_agents
    nbrs = [graph.neighbors(i) for i in range(N)]
    W = graph.adjacency()
    x, u, z, lam = state.x, state.u, state.z, state.lam
    mapper = map if executor is None else executor.map

    def lap_i(v, i):
        acc = np.zeros_like(v[i])
        for j in nbrs[i]:
            acc = acc + W[i, j] * (v[i] - v[j])
        return acc

    def phase1(i):
        # round 1: neighbors' u_j and lam_j
        Lu_i = lap_i(u, i)
        grad = (game.grad_own(x, u)[i] + game.grad_agg(x, u)[i] / N)
        xi = np.clip(x[i] - params.tau[i] * (grad + game.A_blocks[i].T @ lam[i] + params.c * Lu_i),
                     game.lower[i], game.upper[i])
        ui = u[i] - params.kappa * params.c * Lu_i + (xi - x[i])
        Llam_i = lap_i(lam, i)
        zi = z[i] + params.upsilon[i] * Llam_i
        return xi, ui, zi, Llam_i

    res1 = list(mapper(phase1, range(N)))
    x_new = np.array([r[0] for r in res1])
    u_new = np.array([r[1] for r in res1])
    z_new = np.array([r[2] for r in res1])
    z_ext = 2.0 * z_new - z

    def phase2(i):
        # round 2: neighbors' 2 z_j+ - z_j
        Llam_i = res1[i][3]
        inner = (Llam_i + game.b_blocks[i] - game.A_blocks[i] @ (2.0 * x_new[i] - x[i])
                 + lap_i(z_ext, i))
        return np.maximum(lam[i] - params.alpha[i] * inner, 0.0)

    lam_new = np.array(list(mapper(phase2, range(N))))
    return NetworkState(x_new, u_new, z_new, lam_new, k=state.k + 1)


def fixed_point_state(game, lap, reference):
    """Fixed point built from a reference solution.

    ``x = x*``, ``u = 1 kron sigma(x*)``, ``lam = 1 kron lam*`` and ``z`` the
    minimum-norm solution of ``L z = P_perp(Lambda x* - b)``.
    """
    N, n, m = game.n_agents, game.dim, game.n_coupling
    xs = np.asarray(reference.x, dtype=float).reshape(N, n)
    lam_s = np.asarray(reference.lam, dtype=float).reshape(m)
    resid = game.apply_A_blocks(xs) - game.b_blocks
    resid = resid - resid.mean(axis=0)
    z = np.linalg.lstsq(lap.matrix, resid, rcond=None)[0]
    u = np.broadcast_to(xs.mean(axis=0), (N, n)).copy()
    lam = np.broadcast_to(lam_s, (N, m)).copy()
    return NetworkState(xs.copy(), u, z, lam, 0)


def residuals(state, game, lap, reference=None, phi=None, anchor=None):
    """Trace metrics of one state, keyed by :data:`TRACE_COLUMNS` (minus ``iter``).

    ``normalized_error_pct`` needs ``reference``; ``phi_distance`` needs both
    ``phi`` and ``anchor`` (a fixed point as a split vector). Missing metrics
    are ``None``.
    """
    x, u, lam = state.x, state.u, state.lam
    sx = x.mean(axis=0)
    lam_bar = lam.mean(axis=0)
    out = {
        "normalized_error_pct": None,
        "kkt_residual": kkt_residual(x, lam_bar, game),
        "consensus_u": float(np.max(np.linalg.norm(u - sx, axis=1))),
        "consensus_lambda": _max_pairwise(lam),
        "sigma_gap": float(np.linalg.norm(u.mean(axis=0) - sx)),
        "phi_distance": None,
    }
    if reference is not None:
        xs = np.asarray(reference.x, dtype=float).ravel()
        scale = np.linalg.norm(xs)
        err = np.linalg.norm(x.ravel() - xs)
        out["normalized_error_pct"] = float(100.0 * err / scale) if scale > 0 else float(err)
    if phi is not None and anchor is not None:
        d = state.split_vector() - anchor
        out["phi_distance"] = float(np.sqrt(max(d @ phi @ d, 0.0)))
    return out


def _max_pairwise(v):
    if v.shape[1] == 1:
        return float(v.max() - v.min())
    diff = v[:, None, :] - v[None, :, :]
    return float(np.sqrt((diff ** 2).sum(axis=2)).max())


@dataclass
class RunTrace:
    """Recorded metrics of one run plus the recorded action profiles."""

    rows: list = field(default_factory=list)
    actions: list = field(default_factory=list)
    status: str = "running"
    final_state: NetworkState = None
    comm_rounds_per_iter: int = COMM_ROUNDS_PER_ITER

    def column(self, name):
        idx = TRACE_COLUMNS.index(name)
        return np.array([np.nan if r[idx] is None else r[idx] for r in self.rows], dtype=float)

    @property
    def iterations(self):
        return np.array([r[0] for r in self.rows], dtype=int)

    @property
    def comm_rounds(self):
        return self.iterations * self.comm_rounds_per_iter

    def first_iteration_below(self, name, threshold):
        """First recorded iteration where ``name`` is below ``threshold`` (None if never)."""
        vals = self.column(name)
        hit = np.flatnonzero(vals < threshold)
        return int(self.iterations[hit[0]]) if hit.size else None

    def to_csv(self, path=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for r in self.rows:
            w.writerow([r[0]] + ["" if v is None else repr(float(v)) for v in r[1:]])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def run(game, lap, params, x0=None, max_iter=10_000, tol=1e-8, record_every=100,
        reference=None, phi=None, anchor=None, z0=None, lam0=None, state=None, fused=True):
    """Iterate from ``x0`` (with ``u0 = x0``) and record metrics.

    Stops at the first recorded iteration where
    ``kkt_residual + consensus_u + consensus_lambda < tol`` (status
    ``"converged"``) or after ``max_iter`` iterations (status ``"max_iter"``).
    Pass ``tol=None`` for a fixed horizon. ``state`` overrides the initial
    conditions entirely.

    Raises
    ------
    NumericalError
        If an iterate becomes non-finite; ``err.state`` is the last recorded
        finite state.
    """
    if record_every < 1:
        raise DomainError("record_every must be >= 1")
    if state is None:
        state = initial_state(game, x0, z0, lam0)
    sweep = make_sweep(game, lap, params, fused)
    trace = RunTrace()

    def record(st):
        m = residuals(st, game, lap, reference, phi, anchor)
        trace.rows.append((st.k,) + tuple(m[c] for c in TRACE_COLUMNS[1:]))
        trace.actions.append(st.x.ravel().copy())
        return m

    def done(m):
        return tol is not None and (m["kkt_residual"] + m["consensus_u"] + m["consensus_lambda"]) < tol

    last_good = state
    m = record(state)
    if done(m):
        trace.status = "converged"
        trace.final_state = state
        return trace

    s = state.flat()
    k0 = state.k
    # overflow is caught by the finiteness check below
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(k0 + 1, k0 + max_iter + 1):
            s = sweep.flat_step(s)
            if (k - k0) % record_every == 0 or k == k0 + max_iter:
                if not np.all(np.isfinite(s)):
                    trace.status = "numerical_error"
                    trace.final_state = last_good
                    raise NumericalError(f"non-finite iterate by iteration {k}",
                                         iteration=k, state=last_good)
                cur = NetworkState(*(a.copy() for a in sweep.split(s)), k=k)
                m = record(cur)
                last_good = cur
                if done(m):
                    trace.status = "converged"
                    trace.final_state = cur
                    return trace
    trace.status = "max_iter"
    trace.final_state = last_good
    return trace

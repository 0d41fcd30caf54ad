"""Multi-round consensus baseline (interpreted).

Each action update is wrapped in ``nu`` rounds of averaging with a doubly
stochastic mixing matrix ``W = I - eps L``:

1. ``nu`` mixing rounds on the local multipliers, then a projected dual
   ascent step ``lam_i <- max(0, lam_i + tau N r_i)`` where ``r_i`` is
   agent ``i``'s estimate of the mean constraint residual
   ``(1/N) sum_j (A_j x_j - b_j)``;
2. one projected-gradient action step with step ``tau`` using the agent's
   aggregate estimate;
3. ``nu`` mixing rounds on the estimates ``(x_i, A_i x_i - b_i)``, which
   restart from the fresh local values after every action update.

Restarting the estimates is the interpretation choice: with finite ``nu`` the
estimates keep a disagreement of order ``rho^nu`` (``rho`` the second largest
eigenvalue modulus of ``W``), so the iteration settles near, not at, the
variational GNE. The gap shrinks as ``nu`` grows.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericalError
from .game import extended_pseudo_gradient
from .solver import NetworkState, RunTrace, TRACE_COLUMNS, residuals


@dataclass(frozen=True)
class MixingMatrix:
    W: np.ndarray
    eps: float

    @property
    def spectral_gap_radius(self):
        """Largest eigenvalue modulus of ``W - 11^T/N``."""
        N = self.W.shape[0]
        ev = np.linalg.eigvalsh(self.W - np.full((N, N), 1.0 / N))
        return float(np.max(np.abs(ev)))

    def power(self, nu):
        return np.linalg.matrix_power(self.W, int(nu))


def build_mixing(graph, eps):
    """``W = I - eps L``; requires ``0 < eps < 1/d_max`` so every entry stays non-negative."""
    L = np.diag(graph.degrees()) - graph.adjacency()
    d_max = graph.max_degree
    if not 0 < eps < 1.0 / d_max:
        raise DomainError(f"mixing eps must lie in (0, 1/d_max) = (0, {1.0 / d_max:g}), got {eps:g}")
    return MixingMatrix(np.eye(graph.n_nodes) - eps * L, float(eps))


def baseline_run(game, graph, nu, tau, max_updates, mixing_eps, reference=None,
                 x0=None, record_every=1):
    """Run the baseline for ``max_updates`` action updates.

    Returns a :class:`~aggne.solver.RunTrace` whose ``iter`` column counts
    action updates; each update costs ``2 nu`` communication rounds, exposed
    through ``trace.comm_rounds``. Actions only change at updates, so the
    per-update records fix the error series on the round axis too. The
    ``u`` entries of the recorded states are the aggregate estimates.
    """
    if nu < 1 or int(nu) != nu:
        raise DomainError("nu must be a positive integer")
    if not tau > 0:
        raise DomainError("tau must be positive")
    if record_every < 1:
        raise DomainError("record_every must be >= 1")
    N, n, m = game.n_agents, game.dim, game.n_coupling
    Wnu = build_mixing(graph, mixing_eps).power(nu)
    x = game.project(np.zeros((N, n))) if x0 is None else np.asarray(x0, dtype=float).reshape(N, n)
    lam = np.zeros((N, m))
    est_x = x.copy()
    est_r = game.apply_A_blocks(x) - game.b_blocks
    trace = RunTrace(comm_rounds_per_iter=2 * int(nu))
    z = np.zeros((N, m))

    def record(k):
        st = NetworkState(x, est_x, z, lam, k)
        met = residuals(st, game, None, reference)
        trace.rows.append((k,) + tuple(met[c] for c in TRACE_COLUMNS[1:]))
        trace.actions.append(x.ravel().copy())
        trace.final_state = st

    record(0)
    for k in range(1, int(max_updates) + 1):
        lam = np.maximum(Wnu @ lam + tau * N * est_r, 0.0)
        grad = extended_pseudo_gradient(game, x, est_x)
        x = game.project(x - tau * (grad + game.apply_AT_blocks(lam)))
        est_x = Wnu @ x
        est_r = Wnu @ (game.apply_A_blocks(x) - game.b_blocks)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(lam))):
            trace.status = "numerical_error"
            raise NumericalError(f"baseline diverged at update {k}", iteration=k,
                                 state=trace.final_state)
        if k % record_every == 0 or k == max_updates:
            record(k)
    trace.status = "max_iter"
    return trace


def plateau(trace, column="normalized_error_pct", tail=0.1):
    """Mean of ``column`` over the last ``tail`` fraction of the records."""
    vals = trace.column(column)
    k = max(1, int(np.ceil(tail * len(vals))))
    return float(np.mean(vals[-k:]))

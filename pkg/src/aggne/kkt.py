"""Ground truth for variational GNEs: KKT residuals and centralized reference solvers.

Nothing here touches the communication graph or the distributed iteration;
the reference solutions are computed with full information.
"""

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, OracleError
from .game import pseudo_gradient


@dataclass(frozen=True)
class ReferenceSolution:
    """Variational GNE ``x`` (flat, length ``N*n``) with shared multiplier ``lam``."""

    x: np.ndarray
    lam: np.ndarray
    active: tuple
    residual: float
    iterations: int = 0
    method: str = "primal-dual"


def kkt_residual(x, lam, game):
    """Natural-map residual of the variational GNE conditions.

    ``|x - P_Omega(x - F(x) - A^T lam)| + |lam - P_+(lam + A x - b)|``.
    ``x`` is the stacked action profile, ``lam`` a single multiplier in R^m.
    """
    N, n, m = game.n_agents, game.dim, game.n_coupling
    x = np.asarray(x, dtype=float).reshape(N, n)
    lam = np.asarray(lam, dtype=float).reshape(m)
    F = pseudo_gradient(game, x)
    ATlam = np.einsum("imn,m->in", game.A_blocks, lam)
    r1 = x - game.project(x - F - ATlam)
    g = game.apply_A_blocks(x).sum(axis=0) - game.b
    r2 = lam - np.maximum(lam + g, 0.0)
    return float(np.linalg.norm(r1) + np.linalg.norm(r2))


def _active_constraints(game, x, lam, tol=1e-9):
    g = game.apply_A_blocks(x.reshape(game.n_agents, game.dim)).sum(axis=0) - game.b
    return tuple(int(k) for k in np.flatnonzero((g >= -tol * (1 + abs(game.b))) | (lam > tol)))


def solve_reference_gne(game, tol=1e-12, max_iter=200_000, lipschitz=None):
    """Solve VI(F, K) by a centralized projected primal-dual iteration.

    ``x+ = P_Omega(x - t (F(x) + A^T lam))`` and
    ``lam+ = P_+(lam + s (A (2 x+ - x) - b))`` with primal step
    ``t = 1/(l_F + |A|^2)`` and dual step ``s = 0.5/|A|^2``. Stops when
    :func:`kkt_residual` drops to ``tol``.

    Raises
    ------
    OracleError
        If the residual is still above ``tol`` after ``max_iter`` iterations.
    """
    N, n, m = game.n_agents, game.dim, game.n_coupling
    A = game.A
    normA2 = float(np.linalg.norm(A, 2) ** 2) or 1.0
    if lipschitz is None:
        consts = game.constants
        lipschitz = consts.l_F if consts is not None and consts.l_F else _lipschitz_bound(game)
    t = 1.0 / (lipschitz + normA2)
    s = 0.5 / normA2
    x = game.project(np.zeros((N, n)))
    lam = np.zeros(m)
    res = kkt_residual(x, lam, game)
    for k in range(1, max_iter + 1):
        F = pseudo_gradient(game, x)
        x_new = game.project(x - t * (F + np.einsum("imn,m->in", game.A_blocks, lam)))
        g = game.apply_A_blocks(2 * x_new - x).sum(axis=0) - game.b
        lam = np.maximum(lam + s * g, 0.0)
        x = x_new
        if k % 10 == 0:
            res = kkt_residual(x, lam, game)
            if res <= tol:
                break
    else:
        raise OracleError(f"reference solver stalled at residual {res:.3e} after {max_iter} iterations")
    xf = x.ravel()
    return ReferenceSolution(xf, lam, _active_constraints(game, xf, lam), res, k, "primal-dual")


def _lipschitz_bound(game, samples=200, seed=0):
    rng = np.random.default_rng(seed)
    lo, hi = game.lower, game.upper
    best = 0.0
    for _ in range(samples):
        x = lo + (hi - lo) * rng.random(lo.shape)
        y = lo + (hi - lo) * rng.random(lo.shape)
        d = np.linalg.norm(x - y)
        if d > 0:
            best = max(best, np.linalg.norm(pseudo_gradient(game, x) - pseudo_gradient(game, y)) / d)
    # sampled ratios underestimate the constant
    return 2.0 * best + 1e-12


def active_set_reference(game, tol=1e-9):
    """Solve a scalar quadratic aggregative game by active-set enumeration.

    Requires ``n = m = 1`` and a game built by
    :func:`aggne.game.quadratic_game`. With ``F_i = a_i x_i + c_i y + g_i``
    every candidate (box faces, coupling active or not) reduces to a linear
    system; the unique candidate satisfying all sign and feasibility
    conditions is returned.

    When the agents share ``a_i``, ``c_i`` and ``A_i``, any solution has the
    agents with the smallest ``g_i`` at the upper bound and those with the
    largest at the lower bound, so only ordered splits need to be enumerated.
    Otherwise all ``3^N`` faces are enumerated (``N <= 10``).
    """
    coef = game.quadratic
    if coef is None or game.dim != 1 or game.n_coupling != 1:
        raise DomainError("active-set enumeration needs a scalar quadratic game (n = m = 1)")
    N = game.n_agents
    a_own = coef.q + coef.r / N
    a_agg = coef.r + coef.s / N
    g0 = coef.p[:, 0] + coef.h[:, 0] / N
    a_con = game.A_blocks[:, 0, 0]
    lo, hi = game.lower[:, 0], game.upper[:, 0]
    b = float(game.b[0])

    homogeneous = (np.ptp(a_own) == 0 and np.ptp(a_agg) == 0 and np.ptp(a_con) == 0
                   and np.ptp(lo) == 0 and np.ptp(hi) == 0 and a_own[0] > 0 and a_con[0] >= 0)
    if homogeneous:
        order = np.argsort(g0, kind="stable")

        def candidates():
            for k_up in range(N + 1):
                for k_lo in range(N - k_up + 1):
                    status = np.zeros(N, dtype=int)
                    status[order[:k_up]] = 1
                    status[order[N - k_lo:]] = -1
                    yield status
    elif N <= 10:
        def candidates():
            for combo in itertools.product((-1, 0, 1), repeat=N):
                yield np.array(combo)
    else:
        raise DomainError("heterogeneous active-set enumeration limited to N <= 10")

    found = []
    for status in candidates():
        for coupled in (False, True):
            sol = _solve_face(status, coupled, a_own, a_agg, g0, a_con, lo, hi, b, N)
            if sol is None:
                continue
            x, lam = sol
            if _face_ok(status, coupled, x, lam, a_own, a_agg, g0, a_con, lo, hi, b, N, tol):
                found.append((x, lam))
    if not found:
        raise OracleError("no active set satisfies the KKT conditions")
    x, lam = found[0]
    for x2, lam2 in found[1:]:
        if np.max(np.abs(x2 - x)) > 1e-7:
            raise OracleError("active-set enumeration found distinct solutions")
    lam = np.array([lam])
    res = kkt_residual(x, lam, game)
    return ReferenceSolution(x.copy(), lam, _active_constraints(game, x, lam), res, 0, "active-set")


def _solve_face(status, coupled, a_own, a_agg, g0, a_con, lo, hi, b, N):
    size = N + 1
    M = np.zeros((size, size))
    rhs = np.zeros(size)
    for i in range(N):
        if status[i] == 0:
            M[i, i] += a_own[i]
            M[i, :N] += a_agg[i] / N
            M[i, N] = a_con[i]
            rhs[i] = -g0[i]
        else:
            M[i, i] = 1.0
            rhs[i] = hi[i] if status[i] == 1 else lo[i]
    if coupled:
        M[N, :N] = a_con
        rhs[N] = b
    else:
        M[N, N] = 1.0
    try:
        sol = np.linalg.solve(M, rhs)
    except np.linalg.LinAlgError:
        return None
    return sol[:N], float(sol[N])


def _face_ok(status, coupled, x, lam, a_own, a_agg, g0, a_con, lo, hi, b, N, tol):
    scale = 1.0 + np.max(np.abs(hi)) + np.max(np.abs(lo))
    if np.any(x < lo - tol * scale) or np.any(x > hi + tol * scale):
        return False
    if lam < -tol * (1 + abs(lam)):
        return False
    if a_con @ x > b + tol * (1 + abs(b)):
        return False
    y = x.mean()
    grad = a_own * x + a_agg * y + g0 + a_con * lam
    gscale = 1.0 + np.max(np.abs(grad))
    if np.any(grad[status == 1] > tol * gscale) or np.any(grad[status == -1] < -tol * gscale):
        return False
    return True

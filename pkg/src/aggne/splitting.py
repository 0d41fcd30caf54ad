"""Operator-splitting view of the iteration.

On ``varpi = (x, u_perp, z, lam)`` the iteration is a preconditioned
forward-backward step ``0 in A(varpi_k) + B(varpi_{k+1}) + Phi (varpi_{k+1} - varpi_k)``
with

* ``A(varpi) = (F(x, P_par x + u_perp), c L u_perp, 0, L lam + b)``,
* ``B = N_Omega x {0} x {0} x N_+`` plus a skew-symmetric linear map.

The backward resolvent is never formed; :func:`fb_inclusion_residual`
checks the inclusion directly.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .game import extended_pseudo_gradient
from .graph import project_parallel, project_perp

ACTIVE_RTOL = 1e-9
DENSE_MAX_AGENTS = 10


@dataclass(frozen=True, eq=False)
class SplitState:
    """``(x, u_perp, z, lam)`` with ``u_perp`` in the complement of the consensus subspace."""

    x: np.ndarray
    u_perp: np.ndarray
    z: np.ndarray
    lam: np.ndarray

    @classmethod
    def from_network(cls, state):
        return cls(state.x.copy(), state.u - state.u.mean(axis=0), state.z.copy(), state.lam.copy())

    @classmethod
    def initial(cls, game, x0, z0=None, lam0=None):
        """``(x0, P_perp x0, z0, lam0)``, zeros by default."""
        N, n, m = game.n_agents, game.dim, game.n_coupling
        x0 = np.asarray(x0, dtype=float).reshape(N, n)
        z0 = np.zeros((N, m)) if z0 is None else np.asarray(z0, dtype=float).reshape(N, m)
        lam0 = np.zeros((N, m)) if lam0 is None else np.asarray(lam0, dtype=float).reshape(N, m)
        return cls(x0.copy(), project_perp(x0, N), z0.copy(), lam0.copy())

    def flat(self):
        return np.concatenate([self.x.ravel(), self.u_perp.ravel(), self.z.ravel(), self.lam.ravel()])

    def to_network_u(self):
        """Estimates ``u = P_par x + u_perp`` of the matching full iteration."""
        return project_parallel(self.x, self.x.shape[0]) + self.u_perp

    def parallel_leak(self):
        return float(np.linalg.norm(self.u_perp.mean(axis=0)) * np.sqrt(self.u_perp.shape[0]))


def _split_flat(v, game):
    N, n, m = game.n_agents, game.dim, game.n_coupling
    cuts = np.cumsum([N * n, N * n, N * m])
    x, u, z, lam = np.split(np.asarray(v, dtype=float), cuts)
    if lam.size != N * m:
        raise DomainError(f"expected a vector of length {2 * N * (n + m)}, got {np.size(v)}")
    return x.reshape(N, n), u.reshape(N, n), z.reshape(N, m), lam.reshape(N, m)


def _as_split(w, game):
    if isinstance(w, SplitState):
        return w.x, w.u_perp, w.z, w.lam
    return _split_flat(w, game)


def operator_A(w, game, lap, c):
    """Forward operator, returned as a flat vector."""
    x, up, z, lam = _as_split(w, game)
    N = game.n_agents
    u = project_parallel(x, N) + up
    blocks = (
        extended_pseudo_gradient(game, x, u),
        c * (lap.matrix @ up),
        np.zeros_like(z),
        lap.matrix @ lam + game.b_blocks,
    )
    return np.concatenate([b.ravel() for b in blocks])


def operator_B_skew(w, game, lap):
    """Skew-symmetric linear part of the backward operator, as a flat vector."""
    x, up, z, lam = _as_split(w, game)
    L = lap.matrix
    blocks = (
        game.apply_AT_blocks(lam),
        np.zeros_like(up),
        -(L @ lam),
        -game.apply_A_blocks(x) + L @ z,
    )
    return np.concatenate([b.ravel() for b in blocks])


def dense_B_skew(game, lap):
    """Dense matrix of :func:`operator_B_skew` (verification instances only)."""
    N, n, m = game.n_agents, game.dim, game.n_coupling
    if N > DENSE_MAX_AGENTS:
        raise DomainError(f"dense operators are limited to N <= {DENSE_MAX_AGENTS}")
    Lam = game.block_diag_A()
    Ll = lap.kron(m)
    Znn = np.zeros((N * n, N * n))
    Znm = np.zeros((N * n, N * m))
    Zmm = np.zeros((N * m, N * m))
    return np.block([
        [Znn, Znn, Znm, Lam.T],
        [Znn, Znn, Znm, Znm],
        [Znm.T, Znm.T, Zmm, -Ll],
        [-Lam, Znm.T, Ll, Zmm],
    ])


def apply_phi(d, game, lap, params):
    """Matrix-free product of the precondition matrix with a flat vector ``d``."""
    dx, du, dz, dl = _split_flat(d, game)
    N = game.n_agents
    L = lap.matrix
    k_inv = 1.0 / params.kappa
    pdx = project_perp(dx, N)
    pdu = project_perp(du, N)
    blocks = (
        dx / params.tau[:, None] + k_inv * (pdx - pdu) - game.apply_AT_blocks(dl),
        -k_inv * pdx + k_inv * du,
        dz / params.upsilon[:, None] + L @ dl,
        -game.apply_A_blocks(dx) + L @ dz + dl / params.alpha[:, None],
    )
    return np.concatenate([b.ravel() for b in blocks])


def _cone_violation(w, point, lo, hi):
    """Largest distance of ``w`` from the normal cone of the box ``[lo, hi]`` at ``point``.

    Coordinates within ``1e-9 (1 + |bound|)`` of a bound count as active there.
    """
    at_lo = point <= lo + ACTIVE_RTOL * (1.0 + np.abs(lo))
    hi_slack = np.where(np.isfinite(hi), ACTIVE_RTOL * (1.0 + np.abs(hi)), 0.0)
    at_hi = point >= hi - hi_slack
    viol = np.abs(w)
    viol = np.where(at_lo & ~at_hi, np.maximum(w, 0.0), viol)
    viol = np.where(at_hi & ~at_lo, np.maximum(-w, 0.0), viol)
    viol = np.where(at_lo & at_hi, 0.0, viol)
    return float(viol.max()) if viol.size else 0.0


def fb_inclusion_residual(w_k, w_next, game, lap, params, phi=None):
    """Largest violation of ``-(A w_k + B_skew w_next + Phi (w_next - w_k)) in N(w_next)``.

    The x-block is tested against the normal cone of the boxes, the
    lam-block against the normal cone of the non-negative orthant, and the
    u- and z-blocks must vanish. ``phi`` (dense) is optional; the product
    is applied matrix-free otherwise.
    """
    a = np.concatenate([v.ravel() for v in _as_split(w_k, game)])
    b = np.concatenate([v.ravel() for v in _as_split(w_next, game)])
    diff = b - a
    metric = phi @ diff if phi is not None else apply_phi(diff, game, lap, params)
    w = -(operator_A(w_k, game, lap, params.c) + operator_B_skew(w_next, game, lap) + metric)
    wx, wu, wz, wl = _split_flat(w, game)
    xn, _, _, ln = _split_flat(b, game)
    return max(
        _cone_violation(wx, xn, game.lower, game.upper),
        float(np.abs(wu).max()),
        float(np.abs(wz).max()),
        _cone_violation(wl, ln, np.zeros_like(ln), np.full_like(ln, np.inf)),
    )


def reduced_step(ss, game, lap, params):
    """One iteration on ``(x, u_perp, z, lam)``; ``u_perp`` stays orthogonal to consensus."""
    N = game.n_agents
    L = lap.matrix
    x, up, z, lam = ss.x, ss.u_perp, ss.z, ss.lam
    c = params.c
    tau = params.tau[:, None]
    grad = extended_pseudo_gradient(game, x, project_parallel(x, N) + up)
    x_new = game.project(x - tau * (grad + game.apply_AT_blocks(lam) + c * (L @ up)))
    up_new = up - params.kappa * c * (L @ up) + project_perp(x_new - x, N)
    z_new = z + params.upsilon[:, None] * (L @ lam)
    inner = L @ lam + game.b_blocks - game.apply_A_blocks(2 * x_new - x) + L @ (2 * z_new - z)
    lam_new = np.maximum(lam - params.alpha[:, None] * inner, 0.0)
    return SplitState(x_new, up_new, z_new, lam_new)


def restricted_monotonicity_probe(game, lap, c, samples=1000, seed=0):
    """Smallest sampled ratio ``<d, A~(x, u_perp) - A~(x', 0)> / |d|^2``.

    ``A~(x, u_perp) = (F(x, P_par x + u_perp), c L u_perp)``; the reference
    points have ``u_perp = 0``. Actions are drawn from the boxes, estimate
    disagreements from the hull of the boxes projected off consensus.
    """
    if samples < 100:
        raise DomainError("samples must be at least 100")
    rng = np.random.default_rng(seed)
    N, n = game.n_agents, game.dim
    lo, hi = game.lower, game.upper
    span = (hi.max(axis=0) - lo.min(axis=0))
    L = lap.matrix
    best = np.inf
    for _ in range(samples):
        x = lo + (hi - lo) * rng.random((N, n))
        x2 = lo + (hi - lo) * rng.random((N, n))
        up = project_perp(span * rng.standard_normal((N, n)) * rng.random(), N)
        a1 = np.concatenate([extended_pseudo_gradient(game, x, project_parallel(x, N) + up).ravel(),
                             c * (L @ up).ravel()])
        a2 = np.concatenate([extended_pseudo_gradient(game, x2, project_parallel(x2, N)).ravel(),
                             np.zeros(N * n)])
        d = np.concatenate([(x - x2).ravel(), up.ravel()])
        nd = d @ d
        if nd > 0:
            best = min(best, float(d @ (a1 - a2) / nd))
    return best

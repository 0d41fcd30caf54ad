"""Aggregative games with box action sets and affine coupling constraints.

A game is described through its gradient oracles in (own action, aggregate)
coordinates. Both oracles are vectorized over agents: they receive arrays of
shape ``(N, n)`` holding ``x_i`` and the aggregate value agent ``i`` uses, and
return an ``(N, n)`` array whose row ``i`` is ``grad_{x_i} J_i(x_i, y_i)``
(resp. ``grad_y J_i(x_i, y_i)``).
"""

import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, MonotonicityWarning, NumericalError


@dataclass(frozen=True)
class GameConstants:
    """Regularity constants of the (extended) pseudo-gradient.

    ``mu`` strong monotonicity of F, ``l_F`` Lipschitz constant of F, ``lfx``
    and ``lfu`` Lipschitz constants of the extended pseudo-gradient in the
    action and estimate arguments.
    """

    mu: float
    lfx: float
    lfu: float
    l_F: Optional[float] = None
    provenance: str = "declared"

    def __post_init__(self):
        for name in ("mu", "lfx"):
            if not getattr(self, name) > 0:
                raise DomainError(f"constant {name} must be positive")
        # lfu = 0 when the gradients ignore the aggregate
        if not self.lfu >= 0:
            raise DomainError("constant lfu must be non-negative")


@dataclass(frozen=True)
class QuadraticCoefficients:
    """Per-agent scalars of ``J_i(x_i, y) = q/2 |x_i|^2 + s/2 |y|^2 + r x_i.y + p.x_i + h.y``.

    ``q, r, s`` have shape ``(N,)``; ``p, h`` have shape ``(N, n)``.
    """

    q: np.ndarray
    r: np.ndarray
    s: np.ndarray
    p: np.ndarray
    h: np.ndarray


@dataclass(frozen=True, eq=False)
class AggregativeGame:
    n_agents: int
    dim: int
    n_coupling: int
    grad_own: Callable = field(repr=False)
    grad_agg: Callable = field(repr=False)
    lower: np.ndarray = field(repr=False)
    upper: np.ndarray = field(repr=False)
    A_blocks: np.ndarray = field(repr=False)  # (N, m, n)
    b_blocks: np.ndarray = field(repr=False)  # (N, m)
    constants: Optional[GameConstants] = None
    quadratic: Optional[QuadraticCoefficients] = field(default=None, repr=False)
    name: str = "custom"

    def __post_init__(self):
        N, n, m = self.n_agents, self.dim, self.n_coupling
        if N < 1 or n < 1 or m < 1:
            raise DomainError("agents, action and coupling dimensions must be positive")
        if self.lower.shape != (N, n) or self.upper.shape != (N, n):
            raise DomainError("box bounds must have shape (N, n)")
        if np.any(self.lower > self.upper):
            raise DomainError("empty box: lower > upper")
        if not (np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper))):
            raise DomainError("boxes must be bounded")
        if self.A_blocks.shape != (N, m, n) or self.b_blocks.shape != (N, m):
            raise DomainError("coupling data must have shapes (N, m, n) and (N, m)")

    @property
    def A(self):
        """Coupling matrix ``[A_1, ..., A_N]`` of shape ``(m, N*n)``."""
        return np.concatenate(list(self.A_blocks), axis=1)

    @property
    def b(self):
        return self.b_blocks.sum(axis=0)

    def block_diag_A(self):
        """``Lambda = diag(A_i)`` of shape ``(N*m, N*n)``."""
        N, n, m = self.n_agents, self.dim, self.n_coupling
        out = np.zeros((N * m, N * n))
        for i in range(N):
            out[i * m:(i + 1) * m, i * n:(i + 1) * n] = self.A_blocks[i]
        return out

    def apply_A_blocks(self, x):
        """Per-agent ``A_i x_i``, shape ``(N, m)``."""
        return np.einsum("imn,in->im", self.A_blocks, x)

    def apply_AT_blocks(self, lam):
        """Per-agent ``A_i^T lam_i``, shape ``(N, n)``."""
        return np.einsum("imn,im->in", self.A_blocks, lam)

    def with_constants(self, constants):
        return replace(self, constants=constants)

    def project(self, x):
        return np.clip(x, self.lower, self.upper)


def _blocks(v, N, d):
    arr = np.asarray(v, dtype=float)
    if arr.ndim == 1:
        if arr.size != N * d:
            raise DomainError(f"expected {N * d} entries, got {arr.size}")
        return arr.reshape(N, d)
    if arr.shape != (N, d):
        raise DomainError(f"expected shape {(N, d)}, got {arr.shape}")
    return arr


def _composite(game, x, u):
    g = game.grad_own(x, u) + game.grad_agg(x, u) / game.n_agents
    if not np.all(np.isfinite(g)):
        raise NumericalError("gradient oracle returned a non-finite value")
    return g


def composite_local_gradient(game, i, x_i, u_i):
    """``grad_x J_i(x_i, u_i) + (1/N) grad_y J_i(x_i, u_i)`` for a single agent."""
    N, n = game.n_agents, game.dim
    x = np.zeros((N, n))
    u = np.zeros((N, n))
    x[i] = np.asarray(x_i, dtype=float).reshape(n)
    u[i] = np.asarray(u_i, dtype=float).reshape(n)
    return _composite(game, x, u)[i]


def extended_pseudo_gradient(game, x, u):
    """Stack of every agent's gradient evaluated with its own estimate ``u_i``.

    Returns an array with the same layout as ``x`` (flat or ``(N, n)``).
    """
    flat = np.ndim(x) == 1
    xb = _blocks(x, game.n_agents, game.dim)
    ub = _blocks(u, game.n_agents, game.dim)
    g = _composite(game, xb, ub)
    return g.ravel() if flat else g


def pseudo_gradient(game, x):
    """Pseudo-gradient ``F(x)``: the extended map at ``u = 1 kron sigma(x)``."""
    xb = _blocks(x, game.n_agents, game.dim)
    u = np.broadcast_to(xb.mean(axis=0), xb.shape)
    return extended_pseudo_gradient(game, x, u.ravel() if np.ndim(x) == 1 else u)


def quadratic_game(q, r, s, p, h, lower, upper, A, b, constants=None, name="quadratic"):
    """Quadratic aggregative game.

    Agent ``i`` minimizes ``q_i/2 |x_i|^2 + s_i/2 |y|^2 + r_i x_i.y + p_i.x_i + h_i.y``
    with ``y = sigma(x)``, over the box ``[lower_i, upper_i]``, subject to the
    shared constraint ``sum_i A_i x_i <= sum_i b_i``.

    ``q, r, s`` are per-agent scalars (length N); ``p, h, lower, upper`` are
    ``(N, n)`` (or length-N for n = 1); ``A`` is ``(N, m, n)`` or anything
    reshapeable to it, ``b`` is ``(N, m)``.
    """
    q, r, s = (np.asarray(v, dtype=float).ravel() for v in (q, r, s))
    N = q.size
    p = np.asarray(p, dtype=float).reshape(N, -1)
    n = p.shape[1]
    h = np.asarray(h, dtype=float).reshape(N, n)
    lower = np.broadcast_to(np.asarray(lower, dtype=float).reshape(N, -1), (N, n)).copy()
    upper = np.broadcast_to(np.asarray(upper, dtype=float).reshape(N, -1), (N, n)).copy()
    b = np.asarray(b, dtype=float).reshape(N, -1)
    m = b.shape[1]
    A = np.asarray(A, dtype=float).reshape(N, m, n)
    if r.size != N or s.size != N:
        raise DomainError("q, r, s must have one entry per agent")
    coef = QuadraticCoefficients(q, r, s, p, h)
    qc, rc, sc = q[:, None], r[:, None], s[:, None]

    def grad_own(x, y):
        return qc * x + rc * y + p

    def grad_agg(x, y):
        return sc * y + rc * x + h

    return AggregativeGame(N, n, m, grad_own, grad_agg, lower, upper, A, b,
                           constants, coef, name)


def cournot_instance(N=20, capacity=20.0, box=(0.0, 10.0), constants="declared"):
    """Networked Nash-Cournot market.

    Agent ``i`` (1-based) has production cost ``(2i - 1) x_i`` and sells at
    price ``60 - sigma(x) - x_i/2``. The shared market capacity
    ``sum_i x_i <= capacity`` is split equally, ``b_i = capacity/N``.

    ``constants="declared"`` attaches ``mu = lfx = lfu = 1``;
    ``"exact"`` attaches the exact values of the quadratic model;
    ``None`` attaches nothing.
    """
    if N < 2:
        raise DomainError("Cournot instance needs N >= 2")
    idx = np.arange(1, N + 1, dtype=float)
    if constants == "declared":
        consts = GameConstants(mu=1.0, lfx=1.0, lfu=1.0, provenance="declared")
    elif constants == "exact":
        a = 1.0 + 1.0 / N
        consts = GameConstants(mu=a, lfx=a, lfu=1.0, l_F=a + 1.0, provenance="declared")
    elif constants is None:
        consts = None
    else:
        raise DomainError(f"unknown constants mode {constants!r}")
    return quadratic_game(
        q=np.ones(N), r=np.ones(N), s=np.zeros(N),
        p=(2 * idx - 1) - 60.0, h=np.zeros(N),
        lower=np.full(N, box[0]), upper=np.full(N, box[1]),
        A=np.ones(N), b=np.full(N, capacity / N),
        constants=consts, name=f"cournot{N}",
    )


def estimate_constants(game, sample_count=1000, seed=0):
    """Sample-based estimates of ``mu``, ``l_F``, ``lfx`` and ``lfu``.

    Each quantity is an extreme difference ratio over ``sample_count`` random
    pairs drawn uniformly from the boxes (estimates ``u`` are drawn from the
    hull of all boxes). A non-positive ``mu`` triggers a
    :class:`MonotonicityWarning`; the estimate is still returned, as a plain
    record that skips the positivity checks of :class:`GameConstants`.
    """
    if sample_count < 100:
        raise DomainError("sample_count must be at least 100")
    rng = np.random.default_rng(seed)
    N, n = game.n_agents, game.dim
    lo, hi = game.lower, game.upper
    ulo = np.broadcast_to(lo.min(axis=0), (N, n))
    uhi = np.broadcast_to(hi.max(axis=0), (N, n))

    def draw(a, c):
        return a + (c - a) * rng.random((N, n))

    mu = np.inf
    l_F = lfx = lfu = 0.0
    for _ in range(sample_count):
        x, x2 = draw(lo, hi), draw(lo, hi)
        u, u2 = draw(ulo, uhi), draw(ulo, uhi)
        dx = (x - x2).ravel()
        du = (u - u2).ravel()
        nx, nu = dx @ dx, du @ du
        dF = (pseudo_gradient(game, x) - pseudo_gradient(game, x2)).ravel()
        if nx > 0:
            mu = min(mu, dx @ dF / nx)
            l_F = max(l_F, np.linalg.norm(dF) / np.sqrt(nx))
            dFx = extended_pseudo_gradient(game, x, u) - extended_pseudo_gradient(game, x2, u)
            lfx = max(lfx, np.linalg.norm(dFx) / np.sqrt(nx))
        if nu > 0:
            dFu = extended_pseudo_gradient(game, x, u) - extended_pseudo_gradient(game, x, u2)
            lfu = max(lfu, np.linalg.norm(dFu) / np.sqrt(nu))

    if mu <= 0:
        warnings.warn(f"estimated strong monotonicity constant {mu:.3g} is not positive",
                      MonotonicityWarning, stacklevel=2)
        return _RawConstants(mu, lfx, lfu, l_F)
    return GameConstants(mu=float(mu), lfx=float(lfx), lfu=float(lfu), l_F=float(l_F),
                         provenance="estimated")


@dataclass(frozen=True)
class _RawConstants:
    """Estimated constants that fail the positivity invariants."""

    mu: float
    lfx: float
    lfu: float
    l_F: float
    provenance: str = "estimated"

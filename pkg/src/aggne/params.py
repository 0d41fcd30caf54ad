"""Parameter certification: restricted monotonicity, cocoercivity, step-size bounds, Phi.

The precondition matrix acts on ``varpi = (x, u_perp, z, lam)`` stacked in
that order, every block agent-major.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import CertificationError, DomainError
from .graph import perp_projector_matrix

PSD_RTOL = 1e-9


@dataclass(frozen=True)
class AlgorithmParams:
    """Consensus gain ``c``, estimate step ``kappa``, design constant ``delta``
    and per-agent step sizes ``tau``, ``upsilon``, ``alpha`` (arrays of length N)."""

    c: float
    kappa: float
    delta: float
    tau: np.ndarray
    upsilon: np.ndarray
    alpha: np.ndarray

    def __post_init__(self):
        for name in ("c", "kappa", "delta"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")
        for name in ("tau", "upsilon", "alpha"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.ndim != 1 or np.any(~(v > 0)):
                raise DomainError(f"{name} must be a 1-D array of positive step sizes")
            object.__setattr__(self, name, v)

    @classmethod
    def uniform(cls, n_agents, c, kappa_inv, tau_inv, upsilon_inv, alpha_inv, delta):
        return cls(c=float(c), kappa=1.0 / kappa_inv, delta=float(delta),
                   tau=np.full(n_agents, 1.0 / tau_inv),
                   upsilon=np.full(n_agents, 1.0 / upsilon_inv),
                   alpha=np.full(n_agents, 1.0 / alpha_inv))

    def scaled(self, factor):
        """Same parameters with every step size (tau, upsilon, alpha, kappa) times ``factor``."""
        return replace(self, kappa=self.kappa * factor, tau=self.tau * factor,
                       upsilon=self.upsilon * factor, alpha=self.alpha * factor)


@dataclass(frozen=True)
class CertificateReport:
    mu_tilde: float
    theta2: float
    beta: float
    delta_min: float
    delta: float
    kappa_max: float
    tau_max: np.ndarray = field(repr=False)
    upsilon_max: np.ndarray = field(repr=False)
    alpha_max: np.ndarray = field(repr=False)
    phi_min_eig: float
    phi_shift_min_eig: float
    checks: dict

    @property
    def passed(self):
        return all(self.checks.values())

    @property
    def beta_inv(self):
        return 1.0 / self.beta

    def as_dict(self):
        return {
            "mu_tilde": self.mu_tilde,
            "theta2": self.theta2,
            "beta_inv": self.beta_inv,
            "delta_min": self.delta_min,
            "delta": self.delta,
            "kappa_max": self.kappa_max,
            "tau_inv_min": float(1.0 / self.tau_max.min()),
            "upsilon_inv_min": float(1.0 / self.upsilon_max.min()),
            "alpha_inv_min": float(1.0 / self.alpha_max.min()),
            "tau_inv_bound": (1.0 / self.tau_max).tolist(),
            "upsilon_inv_bound": (1.0 / self.upsilon_max).tolist(),
            "alpha_inv_bound": (1.0 / self.alpha_max).tolist(),
            "phi_min_eig": self.phi_min_eig,
            "phi_minus_delta_min_eig": self.phi_shift_min_eig,
            "checks": dict(self.checks),
            "passed": self.passed,
        }


def mu_tilde(mu, lfu, c, lambda2):
    """Smallest eigenvalue of ``[[mu, -lfu/2], [-lfu/2, c*lambda2]]``."""
    if min(mu, c, lambda2) <= 0 or lfu < 0:
        raise DomainError("mu, c, lambda2 must be positive and lfu non-negative")
    a, d = mu, c * lambda2
    half_gap = np.hypot((a - d) / 2.0, lfu / 2.0)
    return float((a + d) / 2.0 - half_gap)


def cocoercivity_beta(mu_t, lfx, lfu, c, lambda_max):
    """Return ``(theta2, beta)`` with ``beta = min(mu_t/theta2, 1/lambda_max)``."""
    if mu_t <= 0:
        raise CertificationError("restricted monotonicity fails")
    theta2 = max(lfx ** 2, lfu ** 2 + (c * lambda_max) ** 2)
    return float(theta2), float(min(mu_t / theta2, 1.0 / lambda_max))


def step_size_bounds(game, lap, delta, kappa):
    """Per-agent upper bounds ``(tau_max, upsilon_max, alpha_max)`` making ``Phi - delta I`` PSD.

    ``tau_i <= 1/(max_j sum_k |[A_i^T]_jk| + delta + 1/(kappa (1 - kappa delta)))``,
    ``upsilon_i <= 1/(2 d_i + delta)``,
    ``alpha_i <= 1/(max_j sum_k |[A_i]_jk| + 2 d_i + delta)``, with ``d_i`` the
    weighted degree.
    """
    if delta <= 0 or kappa <= 0:
        raise DomainError("delta and kappa must be positive")
    if kappa * delta >= 1:
        raise DomainError(f"kappa = {kappa:g} must be below 1/delta = {1 / delta:g}")
    absA = np.abs(game.A_blocks)  # (N, m, n)
    row_AT = absA.sum(axis=1).max(axis=1)  # rows of A_i^T sum over m
    row_A = absA.sum(axis=2).max(axis=1)
    d = np.asarray(lap.degrees, dtype=float)
    extra = 1.0 / (kappa * (1.0 - kappa * delta))
    tau_max = 1.0 / (row_AT + delta + extra)
    upsilon_max = 1.0 / (2.0 * d + delta)
    alpha_max = 1.0 / (row_A + 2.0 * d + delta)
    return tau_max, upsilon_max, alpha_max


def assemble_phi(params, lap, game):
    """Dense precondition matrix of size ``2N(n+m)``.

    Block rows ``(x, u_perp, z, lam)``::

        [tau^-1 + P_perp/kappa, -P_perp/kappa, 0,        -Lambda^T]
        [-P_perp/kappa,          I/kappa,      0,         0       ]
        [0,                      0,            upsilon^-1, L_lam   ]
        [-Lambda,                0,            L_lam,     alpha^-1 ]
    """
    N, n, m = game.n_agents, game.dim, game.n_coupling
    Pp = perp_projector_matrix(N, n)
    Lam = game.block_diag_A()
    L_lam = lap.kron(m)
    k_inv = 1.0 / params.kappa
    Zxm = np.zeros((N * n, N * m))
    tau_inv = np.diag(np.repeat(1.0 / params.tau, n))
    ups_inv = np.diag(np.repeat(1.0 / params.upsilon, m))
    alp_inv = np.diag(np.repeat(1.0 / params.alpha, m))
    phi = np.block([
        [tau_inv + k_inv * Pp, -k_inv * Pp, Zxm, -Lam.T],
        [-k_inv * Pp, k_inv * np.eye(N * n), Zxm, Zxm],
        [Zxm.T, Zxm.T, ups_inv, L_lam],
        [-Lam, Zxm.T, L_lam, alp_inv],
    ])
    return phi


def verify_phi_psd(phi, delta):
    """Return ``(ok, lambda_min(Phi - delta I))``; ok allows a relative ``-1e-9 |Phi|`` slack."""
    phi = np.asarray(phi, dtype=float)
    shifted = phi - delta * np.eye(phi.shape[0])
    lam_min = float(np.linalg.eigvalsh((shifted + shifted.T) / 2.0)[0])
    return lam_min >= -PSD_RTOL * np.linalg.norm(phi, 2), lam_min


def min_admissible_c(mu, lfu, lambda2):
    return lfu ** 2 / (4.0 * mu * lambda2)


def certify(game, lap, c, delta_margin=0.1, kappa_fraction=0.5, pinned=None):
    """Check the convergence hypotheses and pick (or audit) algorithm parameters.

    With ``pinned=None`` the design constant is ``delta = (1 + delta_margin)/(2 beta)``,
    ``kappa = kappa_fraction/delta`` and every step size sits at its bound.
    ``pinned`` may be a dict with any of ``delta``, ``kappa_inv``, ``tau_inv``,
    ``upsilon_inv``, ``alpha_inv`` (scalars or per-agent arrays); pinned
    entries replace the derived ones and are audited instead.

    Pinned step sizes need not satisfy the per-agent bounds: the certificate
    then rests on the numerically verified smallest eigenvalue of Phi, which
    must exceed ``1/(2 beta)`` while ``kappa`` stays below its inverse.

    Raises
    ------
    CertificationError
        When ``c lambda2 <= lfu^2/(4 mu)``; carries the smallest admissible ``c``.
    """
    consts = game.constants
    if consts is None:
        raise DomainError("game has no regularity constants; declare or estimate them first")
    c = float(c)
    c_min = min_admissible_c(consts.mu, consts.lfu, lap.lambda2)
    if not c * lap.lambda2 > consts.lfu ** 2 / (4.0 * consts.mu):
        raise CertificationError(
            f"c = {c:g} too small: need c > {c_min:.6g} (c * lambda2 > lfu^2 / (4 mu))",
            min_c=c_min,
        )
    mt = mu_tilde(consts.mu, consts.lfu, c, lap.lambda2)
    theta2, beta = cocoercivity_beta(mt, consts.lfx, consts.lfu, c, lap.lambda_max)
    delta_min = 1.0 / (2.0 * beta)

    pinned = dict(pinned or {})
    delta = float(pinned.get("delta", delta_min * (1.0 + delta_margin)))
    if "kappa_inv" in pinned:
        kappa = 1.0 / float(pinned["kappa_inv"])
    else:
        kappa = kappa_fraction / delta
    N = game.n_agents
    if kappa * delta < 1.0:
        tau_max, ups_max, alp_max = step_size_bounds(game, lap, delta, kappa)
    else:
        tau_max = ups_max = alp_max = np.full(N, np.nan)

    def pick(key, bound):
        if key in pinned:
            return np.broadcast_to(1.0 / np.asarray(pinned[key], dtype=float), (N,)).copy()
        return bound.copy()

    params = AlgorithmParams(c=c, kappa=kappa, delta=delta,
                             tau=pick("tau_inv", tau_max),
                             upsilon=pick("upsilon_inv", ups_max),
                             alpha=pick("alpha_inv", alp_max))
    phi = assemble_phi(params, lap, game)
    phi_min = float(np.linalg.eigvalsh(phi)[0])
    psd_ok, shifted_min = verify_phi_psd(phi, delta)
    slack = 1e-12
    bounds_ok = bool(kappa * delta < 1.0
                     and np.all(params.tau <= tau_max + slack)
                     and np.all(params.upsilon <= ups_max + slack)
                     and np.all(params.alpha <= alp_max + slack))
    checks = {
        "restricted_monotone": mt > 0,
        "delta_above_half_inv_beta": delta > delta_min,
        "kappa_below_inv_delta": kappa * delta < 1.0,
        "step_bounds": bounds_ok,
        "phi_minus_delta_psd": bool(psd_ok),
    }
    if pinned and not (bounds_ok and psd_ok):
        # Pinned parameters are audited on the metric itself.
        checks = {
            "restricted_monotone": mt > 0,
            "phi_min_eig_above_half_inv_beta": phi_min > delta_min,
            "kappa_below_inv_phi_min_eig": kappa * phi_min < 1.0,
        }
    report = CertificateReport(mt, theta2, beta, delta_min, delta, 1.0 / delta,
                               tau_max, ups_max, alp_max, phi_min, shifted_min, checks)
    return report, params

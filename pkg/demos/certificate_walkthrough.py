"""
Choosing step sizes with the convergence certificate
====================================================

The estimate-coupling gain ``c`` has to beat the aggregate sensitivity of the
game on the given network. Once it does, the certificate turns the game
constants and the Laplacian spectrum into a cocoercivity constant, a design
constant ``delta`` and per-agent step-size bounds.

Run with ``python demos/certificate_walkthrough.py``.
"""

import numpy as np

from aggne import CertificationError, assemble_phi, build_graph, certify, cournot_instance, laplacian
from aggne.params import min_admissible_c

# %%
# A 20-firm Cournot market with declared constants mu = lfx = lfu = 1.
game = cournot_instance(20)
star = laplacian(build_graph("star", 20))
ring = laplacian(build_graph("ring", 20))

for name, lap in (("star", star), ("ring", ring)):
    print(f"{name}: lambda2 = {lap.lambda2:.6f}, lambda_max = {lap.lambda_max:.1f}, "
          f"smallest admissible c = {min_admissible_c(1.0, 1.0, lap.lambda2):.4f}")

# %%
# The ring is poorly connected, so a gain that works on the star is rejected.
try:
    certify(game, ring, 0.5)
except CertificationError as exc:
    print(f"\nring with c = 0.5 rejected: {exc}")

# %%
# With admissible gains, let the certificate pick every step size.
print()
for name, lap, c in (("star", star, 0.5), ("ring", ring, 4.0)):
    report, params = certify(game, lap, c)
    print(f"{name} c = {c}: mu~ = {report.mu_tilde:.6f}, 1/beta = {report.beta_inv:.2f}, "
          f"delta = {params.delta:.2f}")
    print(f"    1/kappa = {1 / params.kappa:.1f}, 1/tau in [{1 / params.tau.max():.1f}, "
          f"{1 / params.tau.min():.1f}], 1/alpha in [{1 / params.alpha.max():.1f}, "
          f"{1 / params.alpha.min():.1f}]")

# %%
# Pinned step sizes are audited instead. On the star, 1/upsilon = 300 sits
# below the per-agent bound 2 d_i + delta of the leaves (302), yet the
# precondition matrix still clears 1/(2 beta) because the bounds are only
# sufficient.
pinned = dict(delta=300.0, kappa_inv=500.0, tau_inv=2000.0, upsilon_inv=300.0, alpha_inv=300.0)
report, params = certify(game, star, 0.5, pinned=pinned)
print(f"\npinned star: passed = {report.passed}, lambda_min(Phi) = {report.phi_min_eig:.2f} "
      f"vs 1/(2 beta) = {report.delta_min:.2f}")
print("    checks:", {k: bool(v) for k, v in report.checks.items()})

# %%
# Scaling every step by ten breaks the certificate on the ring.
x10 = dict(delta=1200.0, kappa_inv=200.0, tau_inv=800.0, upsilon_inv=120.0, alpha_inv=120.0)
report, params = certify(game, ring, 4.0, pinned=x10)
phi = assemble_phi(params, ring, game)
print(f"\nring x10: passed = {report.passed}, "
      f"lambda_min(Phi) = {np.linalg.eigvalsh(phi)[0]:.2f} vs 1/(2 beta) = {report.delta_min:.2f}")

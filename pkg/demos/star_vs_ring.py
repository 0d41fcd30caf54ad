"""
Network connectivity and convergence speed
==========================================

The same market is solved on a star and on a ring. The ring's algebraic
connectivity is ten times smaller, which forces a larger gain and a smaller
cocoercivity constant, so it needs many more iterations to reach the same
accuracy. Scaling every ring step by ten speeds it up, but leaves the
region the certificate covers.

Run with ``python demos/star_vs_ring.py`` (under a minute).
"""

import time

import numpy as np

from aggne import build_graph, certify, cournot_instance, laplacian, run, solve_reference_gne

game = cournot_instance(20)
ref = solve_reference_gne(game)
print("equilibrium actions of the first six firms:", np.round(ref.x[:6], 4))
print(f"capacity price lambda* = {ref.lam[0]:.4f}\n")

# %%
# Pinned step sizes for each network (inverse steps).
setups = {
    "star": ("star", 0.5, dict(delta=300.0, kappa_inv=500.0, tau_inv=2000.0,
                               upsilon_inv=300.0, alpha_inv=300.0)),
    "ring": ("ring", 4.0, dict(delta=1200.0, kappa_inv=2000.0, tau_inv=8000.0,
                               upsilon_inv=1200.0, alpha_inv=1200.0)),
    "ring x10": ("ring", 4.0, dict(delta=1200.0, kappa_inv=200.0, tau_inv=800.0,
                                   upsilon_inv=120.0, alpha_inv=120.0)),
}

# %%
# Run each to a 1e-3 stopping residual and report when the normalized
# distance to the equilibrium first drops below a few thresholds.
thresholds = (10.0, 1.0, 0.1)
print(f"{'network':<10}{'certified':>10}" + "".join(f"{f'iters to {t}%':>16}" for t in thresholds)
      + f"{'seconds':>10}")
for name, (topology, c, pinned) in setups.items():
    lap = laplacian(build_graph(topology, 20))
    report, params = certify(game, lap, c, pinned=pinned)
    t0 = time.perf_counter()
    trace = run(game, lap, params, max_iter=800_000, tol=1e-3, record_every=100, reference=ref)
    secs = time.perf_counter() - t0
    hits = [trace.first_iteration_below("normalized_error_pct", t) for t in thresholds]
    print(f"{name:<10}{str(report.passed):>10}" + "".join(f"{str(h):>16}" for h in hits)
          + f"{secs:>10.1f}")

# %%
# Each iteration costs two communication rounds (actions' estimates and
# multipliers), so the round counts are twice the iteration counts above.

"""
The marginal-penalty catalogue
==============================

Every flavour of unbalanced transport is driven by one convex penalty phi
on the marginal density ratios.  This script walks through the catalogue
(balanced, KL, TV, range, power/Hellinger, Berg) and shows the three faces
of each penalty: phi itself, its Legendre conjugate, and the pointwise
dampening map that the solver inserts between its half-updates.
"""

import numpy as np

from uot import KL, TV, Balanced, Berg, Power, Range, hellinger

##############################################################
# The catalogue
# -------------
# All penalties vanish at ratio 1 (no deviation, no cost) and are +inf for
# negative ratios.  Their behaviour at 0 decides what happens to mass that
# is simply destroyed.

entropies = {
    "balanced": Balanced(),
    "kl": KL(rho=1.0),
    "tv": TV(rho=1.0),
    "range[0.7,1.3]": Range(a=0.7, b=1.3),
    "hellinger": hellinger(1.0),
    "power(s=-1)": Power(rho=1.0, s=-1.0),
    "berg": Berg(rho=1.0),
}

ratios = np.array([0.0, 0.5, 1.0, 2.0])
print("phi(p) over p =", ratios.tolist())
for name, e in entropies.items():
    vals = np.asarray(e.phi(ratios))
    print(f"  {name:15s} {np.array2string(vals, precision=4)}")

##############################################################
# Dampening maps
# --------------
# The map damp(p) = -aprox(-p) is what turns the classical Sinkhorn update
# into its unbalanced counterpart.  It is always 1-Lipschitz, monotone and
# fixes 0: balanced transport keeps the identity, KL shrinks by
# rho/(rho+eps), TV clamps at +-rho, the range penalty soft-thresholds
# with knees at -eps*log(b) and -eps*log(a), and the power family bends
# through a Lambert-W curve.

eps = 1.0
grid = np.array([-3.0, -1.0, 0.0, 1.0, 3.0])
print(f"\ndamp(p) at eps = {eps} over p =", grid.tolist())
for name, e in entropies.items():
    vals = np.asarray(e.damp(eps, grid))
    print(f"  {name:15s} {np.array2string(vals, precision=4)}")

##############################################################
# A picture says more
# -------------------

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    plt = None

if plt is not None:
    p = np.linspace(-3, 3, 401)
    fig, ax = plt.subplots(figsize=(6, 6))
    for name, e in entropies.items():
        ax.plot(p, np.asarray(e.damp(eps, p)), label=name)
    ax.set_xlabel("p")
    ax.set_ylabel("damp(p)")
    ax.set_title("dampening maps, eps = 1, rho = 1")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    ax.set_aspect("equal")
    fig.savefig("demo_entropy_catalogue.png", dpi=120, bbox_inches="tight")
    print("\nwrote demo_entropy_catalogue.png")

##############################################################
# Feasibility
# -----------
# The range penalty is the only catalogue member that can make the problem
# infeasible for positive masses: total masses must satisfy
# [a m1, b m1] meets [a m2, b m2].

rg = Range(a=0.5, b=1.5)
for m1, m2 in [(1.0, 1.2), (1.0, 2.9), (1.0, 3.1)]:
    print(f"range feasible for masses ({m1}, {m2}):", rg.feasible(m1, m2))

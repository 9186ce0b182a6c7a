"""Walk through the main objects on the interval (-1, 1).

Builds a variable exponent, measures a function in the Luxemburg norm,
applies the Riesz potential and recovers the density with the truncated
hypersingular integral, then estimates a Hardy constant with the exterior
weight.  Run with ``python3 demos/interval_walkthrough.py``.
"""

import numpy as np

from hardylab.exponent import ExponentField, class_P_check, log_condition_check
from hardylab.grid_domain import DomainSpec, Grid, GriddedFunction, Interval, chi_mask
from hardylab.hardy import TestFamily, estimate_hardy_constant
from hardylab.luxemburg import luxemburg_norm, modular_norm_bracket
from hardylab.operators import a_omega, inversion_error, weight_equivalence_check

domain = DomainSpec(Interval(-1.0, 1.0), exterior_cone=True)
grid = Grid.from_bounds([-2.0], [2.0], [1024])
chi = chi_mask(domain, grid)
x = grid.points()[:, 0].reshape(grid.shape)

# p(x) = 1.8 + 0.2 x, between 1.6 and 2.0 on the domain
p = ExponentField.affine(grid, [0.2], 1.8, chi)
cls = class_P_check(p)
log = log_condition_check(p)
print(f"p_minus = {cls.p_minus:.3f}, p_plus = {cls.p_plus:.3f}, log-Hoelder constant ~ {log.C_est:.3f}")

# a smooth bump and its norm; the modular brackets the norm
phi = GriddedFunction(grid, np.where(chi, np.exp(-8 * x ** 2), 0.0), chi)
norm = luxemburg_norm(phi, p)
br = modular_norm_bracket(phi, p)
print(f"||phi||_p(.) = {norm:.6f}, modular = {br.modular:.6f}, bracket holds: {br.holds}")

# D^alpha I^alpha phi = phi, checked on a ladder of truncation radii
for alpha in (0.25, 0.5):
    inv = inversion_error(phi, alpha, p=2.0)
    errs = ", ".join(f"{e:.2e}" for e in inv.errors)
    print(f"alpha = {alpha}: relative inversion error at eps = 8h, 4h, 2h: {errs}")

# the exterior weight against delta^(-alpha)
w = weight_equivalence_check(domain, 0.25, grid)
print(f"max a_Omega delta^alpha / c1 = {w.c1_ratio:.4f} (c1 = {w.c1:.3f}), "
      f"c2 estimate = {w.c2_est:.3f}")
a = a_omega(domain, 0.25, grid)
mid = grid.shape[0] // 2
print(f"a_Omega near the center: {a.values[mid]:.4f}")

# a lower estimate of the Hardy constant over a seeded family
rep = estimate_hardy_constant(domain, p, 0.25, grid, TestFamily("mixed", 12, 42))
print(f"Hardy constant estimate: {rep.C_est:.4f} (worst member {rep.argmax['member_id']})")
print("greedy trace:", " ".join(f"{g:.4f}" for g in rep.greedy))

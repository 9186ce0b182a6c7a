"""Exterior weight on a disk and on a slit disk.

On the disk the exterior satisfies a cone condition, so a_Omega and
delta^(-alpha) stay comparable; the c2 estimate drifts up only slowly as
the staircase boundary is resolved.  A thin slit removes the cone: the
complement near the slit has almost no volume, a_Omega stays small while
delta^(-alpha) blows up, and the c2 estimate grows much faster once the
grid resolves the slit (width 0.04, so from m = 128 on).
Run with ``python3 demos/weights_cone_vs_slit.py``.
"""

from hardylab.grid_domain import Ball, DomainSpec, Grid, slit_disk
from hardylab.operators import weight_equivalence_check

alpha = 0.5
domains = {
    "disk": DomainSpec(Ball((0.0, 0.0), 1.0), exterior_cone=True),
    "slit disk": DomainSpec(slit_disk((0.0, 0.0), 1.0, 0.04), exterior_cone=False),
}
print(f"alpha = {alpha}")
print(f"{'domain':<10} {'m':>4} {'c1 ratio':>9} {'c2 est':>9} {'growth':>7}")
for name, dom in domains.items():
    prev = None
    for m in (64, 128, 256):
        grid = Grid.from_bounds([-2.0, -2.0], [2.0, 2.0], [m, m])
        w = weight_equivalence_check(dom, alpha, grid)
        growth = "" if prev is None else f"{w.c2_est / prev:.3f}"
        print(f"{name:<10} {m:>4} {w.c1_ratio:>9.4f} {w.c2_est:>9.3f} {growth:>7}")
        prev = w.c2_est

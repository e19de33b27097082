"""Upwind finite differences for v d_x f = d_vv f with phi0 as boundary data.

The global error converges slowly because phi0 is only C^{1/2} at the
grazing point; away from the wall the scheme is first order.
"""

from grazing import fd
from grazing import solutions as sol

exact = lambda x, v: sol.phi(0, x, v)
base = fd.GridSpec(1.0, 1.0, 32, 32)

print("whole box")
for row in fd.convergence_study(exact, levels=4, base=base):
    print(f"  n={row.nx:4d}  max error {row.max_error:.3e}  order {row.observed_order}")

print("x >= 1/4")
for row in fd.convergence_study(exact, levels=4, base=base, error_mask=lambda x, v: x >= 0.25):
    print(f"  n={row.nx:4d}  max error {row.max_error:.3e}  order {row.observed_order}")

"""Probabilistic representation against the PDE solver.

f(x, v) = E[g(V_tau)] where (X, V) runs backward until it leaves the box.
With g(v) = v on the outgoing wall both methods should agree at (1, -1).
"""

import math

from grazing import fd, mc
from grazing.acceptance import MC_BOX, inflow_v_data

cfg = mc.McConfig(n_paths=20_000, dt_base=1e-3, seed=1)
est = mc.estimate_inflow_solution(1.0, -1.0, lambda v: v, cfg, MC_BOX)
grid = fd.GridSpec(2.0, 2.0, 256, 256)
fd_val = float(fd.solve(fd.assemble(grid, 1.0, 0.0, fd.Inflow(inflow_v_data)))(1.0, -1.0))

print(f"MC  {est.mean:.5f} +/- {est.stderr:.5f}  (n={est.n})")
print(f"FD  {fd_val:.5f}  (256 x 256)")
print(f"difference in standard errors: {abs(est.mean - fd_val) / est.stderr:.2f}")
print(f"exact step covariance at dt=0.1:\n{mc.step_covariance(0.1)}")
print("sqrt(n) stderr:", est.stderr * math.sqrt(est.n))

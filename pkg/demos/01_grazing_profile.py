"""How phi0 looks near the grazing set.

On the wall (x = 0) phi0 vanishes for v > 0 and equals 9^{-1/6} sqrt(-v)
for v < 0. It is homogeneous of degree 1/2 under (x, v) -> (r^3 x, r v)
and flat as x -> 0 along v > 0.
"""

import numpy as np

from grazing import solutions as sol
from grazing import specfun as sf

print("phi0(0, 1, 0) =", float(sol.phi(0, 1.0, 0.0)), " Gamma(1/3)/Gamma(1/6) =", sf.gamma(1 / 3) / sf.gamma(1 / 6))

v = np.array([-4.0, -1.0, -0.25, 0.25, 1.0])
print(f"\nwall trace  v, phi0(0, v), phi0/sqrt(|v|)   [9^(-1/6) = {9 ** (-1 / 6):.6f}]")
for vi, p in zip(v, sol.phi(0, np.zeros_like(v), v)):
    print(f"  {vi:6.2f}  {p:.6f}  {p / np.sqrt(abs(vi)):.6f}")

print("\nhomogeneity  r, phi0(r^3, r) / r^0.5")
for r in (1.0, 0.1, 0.01, 0.001):
    print(f"  {r:6g}  {float(sol.phi(0, r**3, r)) / r**0.5:.12f}")

print("\nflat side: log phi0(x, 1) * x approaches -1/9")
for x in (0.01, 0.003, 0.001, 0.0005):
    print(f"  x={x:7.4f}  {float(sol.phi(0, x, 1.0)):.3e}  x log = {x * np.log(float(sol.phi(0, x, 1.0))):.5f}")

"""Numerical regularity exponents and a local expansion fit at the origin."""

from grazing import probes
from grazing import solutions as sol

phi0 = lambda x, v: sol.phi(0, x, v)
psi0 = lambda x, v: sol.psi(0, x, v)

for name, f in (("phi0", phi0), ("psi0", psi0), ("phi1", lambda x, v: sol.phi(1, x, v))):
    e = probes.holder_exponent(f)
    print(f"{name:5s} alpha_hat={e.alpha_hat:.3f}  +/-{e.ci_half_width:.3f}  saturated={e.saturated}")

f = lambda x, v: 2 * phi0(x, v) + psi0(x, v) + 1 + v
fit = probes.expansion_fit(f)
print("\nexpansion of 2 phi0 + psi0 + 1 + v")
for n in fit.names:
    c = fit.coefficient(n)
    if abs(c) > 1e-6:
        print(f"  {n:9s} {c: .6f}")
print(f"residual order {fit.residual_order:.2f}, stable={fit.stable}")

d = probes.gamma_minus_decay(phi0, 1.0)
print(f"\nincoming decay along v=1: slope of log phi0 vs 1/x = {d.slope:.4f} (exact -1/9 = {-1 / 9:.4f})")

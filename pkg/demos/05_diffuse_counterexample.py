"""A diffuse-reflection solution that is only C^{1/2} at the grazing point.

f = a phi0 cutoff(v) + xi(v) exp(-v^2) is tuned so its outgoing flux is one;
then M(v) = 2 exp(-v^2) reproduces f on the wall and f solves the diffuse
problem, but the phi0 part caps the regularity at the origin.
"""

from grazing import probes

ce = probes.build_diffuse_counterexample()
print(f"a = {ce.a:.8f}")
print(f"flux residual (quadrature)      {ce.normalization_residual:.2e}")
print(f"flux (independent Gauss-Legendre) {ce.wall_flux():.12f}")
print(f"exponent at origin    {ce.exponent_origin.alpha_hat:.3f}")
print(f"exponent in interior  {ce.exponent_interior.alpha_hat:.3f}")

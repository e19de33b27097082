"""Finite differences for v ∂_x f - a(x,v) ∂_vv f = F on (0, X] × [-V, V].

The transport term is upwinded in the direction of sign(v) and the diffusion
uses the three-point stencil, so every interior row has a positive diagonal,
nonpositive off-diagonals and zero row sum: the matrix is an M-matrix and the
discrete maximum principle holds.  Data are imposed on the kinetic boundary

    {x = 0, v > 0} ∪ {x = X, v < 0} ∪ {v = ±V};

{x = 0, v <= 0} and {x = X, v >= 0} carry the interior equation (outflow).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy import integrate

from .errors import SolverError, ValidationError

Coefficient = Union[float, Callable[[np.ndarray, np.ndarray], np.ndarray]]

INTERIOR, DIRICHLET, DIFFUSE = 0, 1, 2
DIRECT_LIMIT = 4_000_000


@dataclass(frozen=True)
class GridSpec:
    """Uniform nodes x_i = i X/nx (i = 0..nx) and v_j = -V + 2jV/nv (j = 0..nv).

    ``nv`` must be even so that v = 0 is a node.
    """

    X: float = 1.0
    V: float = 1.0
    nx: int = 64
    nv: int = 64

    def __post_init__(self) -> None:
        if not (self.X > 0 and self.V > 0):
            raise ValidationError("grid: X and V must be positive")
        if self.nx < 4 or self.nv < 4:
            raise ValidationError("grid: need at least 4 cells in each direction")
        if self.nv % 2:
            raise ValidationError("grid: nv must be even (a node at v = 0)")

    @property
    def hx(self) -> float:
        return self.X / self.nx

    @property
    def hv(self) -> float:
        return 2.0 * self.V / self.nv

    @property
    def x(self) -> np.ndarray:
        return np.linspace(0.0, self.X, self.nx + 1)

    @property
    def v(self) -> np.ndarray:
        return np.linspace(-self.V, self.V, self.nv + 1)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx + 1, self.nv + 1)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.v, indexing="ij")

    def refine(self, factor: int = 2) -> "GridSpec":
        return GridSpec(self.X, self.V, self.nx * factor, self.nv * factor)


# ------------------------------------------------------- boundary conditions


@dataclass(frozen=True)
class Absorbing:
    """Zero data on the whole kinetic boundary."""


@dataclass(frozen=True)
class Inflow:
    """Dirichlet data g(x, v) on the kinetic boundary."""

    g: Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Diffuse:
    """f(0, v) = M(v) ∫ f(0, w) w_- dw for v > 0.

    ``far_field`` supplies data on {x = X, v < 0} and {v = ±V} (zero if
    omitted).
    """

    M: Callable[[np.ndarray], np.ndarray]
    far_field: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None


BoundaryCondition = Union[Absorbing, Inflow, Diffuse]


def maxwellian(v: np.ndarray) -> np.ndarray:
    """2 e^{-v²}, normalized so that ∫ M(w) w_- dw = 1."""
    return 2.0 * np.exp(-np.asarray(v, dtype=float) ** 2)


def wall_normalization(M: Callable[[np.ndarray], np.ndarray]) -> float:
    """∫_{-∞}^0 M(w) |w| dw by adaptive quadrature."""
    val, _ = integrate.quad(lambda w: float(M(np.array(w))) * -w, -np.inf, 0.0, epsabs=1e-13, epsrel=1e-12)
    return val


def _evaluate(c: Coefficient, x: np.ndarray, v: np.ndarray) -> np.ndarray:
    if callable(c):
        return np.broadcast_to(np.asarray(c(x, v), dtype=float), x.shape).astype(float)
    return np.full(x.shape, float(c))


# --------------------------------------------------------------- assembling


@dataclass
class LinearSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    grid: GridSpec
    kind: np.ndarray  # node kinds on the grid, INTERIOR/DIRICHLET/DIFFUSE
    wall_truncation: Optional[float] = None  # ∫_{-∞}^{-V} M |w| dw for Diffuse


@dataclass
class Field:
    """Node values of shape (nx+1, nv+1) on ``grid``."""

    values: np.ndarray
    grid: GridSpec
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ValidationError(f"field shape {self.values.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("field contains non-finite values")

    def __call__(self, x, v) -> np.ndarray:
        """Bilinear interpolation; points outside the box raise."""
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        g = self.grid
        tol = 1e-12
        if np.any(x < -tol) or np.any(x > g.X + tol) or np.any(np.abs(v) > g.V + tol):
            raise ValidationError("field evaluated outside its grid")
        fx = np.clip(x / g.hx, 0, g.nx)
        fv = np.clip((v + g.V) / g.hv, 0, g.nv)
        i = np.minimum(np.floor(fx).astype(int), g.nx - 1)
        j = np.minimum(np.floor(fv).astype(int), g.nv - 1)
        px, pv = fx - i, fv - j
        f = self.values
        return (
            (1 - px) * (1 - pv) * f[i, j]
            + px * (1 - pv) * f[i + 1, j]
            + (1 - px) * pv * f[i, j + 1]
            + px * pv * f[i + 1, j + 1]
        )

    def to_csv(self, header: Sequence[str] = ()) -> str:
        buf = io.StringIO()
        for line in header:
            buf.write(f"# {line}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["x", "v", "value"])
        X, V = self.grid.mesh()
        for xv, vv, fv in zip(X.ravel(), V.ravel(), self.values.ravel()):
            writer.writerow([repr(float(xv)), repr(float(vv)), repr(float(fv))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "Field":
        rows = [line for line in text.splitlines() if line and not line.startswith("#")]
        reader = csv.DictReader(rows)
        if reader.fieldnames is None or not {"x", "v", "value"} <= set(reader.fieldnames):
            raise ValidationError("field CSV needs columns x,v,value")
        data = np.array([[float(r["x"]), float(r["v"]), float(r["value"])] for r in reader])
        xs = np.unique(data[:, 0])
        vs = np.unique(data[:, 1])
        grid = GridSpec(float(xs[-1]), float(vs[-1]), xs.size - 1, vs.size - 1)
        if data.shape[0] != xs.size * vs.size:
            raise ValidationError("field CSV is not a full tensor grid")
        order = np.lexsort((data[:, 1], data[:, 0]))
        values = data[order, 2].reshape(grid.shape)
        return cls(values, grid)


def _node_kinds(grid: GridSpec, bc: BoundaryCondition) -> np.ndarray:
    X, V = grid.mesh()
    kind = np.full(grid.shape, INTERIOR, dtype=int)
    kind[:, 0] = DIRICHLET
    kind[:, -1] = DIRICHLET
    kind[-1, V[-1] < 0] = DIRICHLET
    wall_in = (np.arange(grid.nv + 1) > grid.nv // 2) & (np.arange(grid.nv + 1) < grid.nv)
    kind[0, wall_in] = DIFFUSE if isinstance(bc, Diffuse) else DIRICHLET
    return kind


def _boundary_data(grid: GridSpec, bc: BoundaryCondition, kind: np.ndarray) -> np.ndarray:
    X, V = grid.mesh()
    data = np.zeros(grid.shape)
    mask = kind == DIRICHLET
    if isinstance(bc, Inflow):
        data[mask] = np.asarray(bc.g(X[mask], V[mask]), dtype=float)
    elif isinstance(bc, Diffuse) and bc.far_field is not None:
        data[mask] = np.asarray(bc.far_field(X[mask], V[mask]), dtype=float)
    return data


def assemble(grid: GridSpec, a: Coefficient = 1.0, F: Coefficient = 0.0, bc: BoundaryCondition = Absorbing()) -> LinearSystem:
    """Sparse system for the nodal values (row-major in (x, v))."""
    if not isinstance(bc, (Absorbing, Inflow, Diffuse)):
        raise ValidationError("unknown boundary condition")
    X, V = grid.mesh()
    nxp, nvp = grid.shape
    N = nxp * nvp
    idx = np.arange(N).reshape(grid.shape)
    kind = _node_kinds(grid, bc)
    aval = _evaluate(a, X, V)
    if np.any(~np.isfinite(aval)) or np.any(aval <= 0):
        raise ValidationError("diffusion coefficient must be positive and finite")
    Fval = _evaluate(F, X, V)
    hx, hv = grid.hx, grid.hv

    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    vals: list[np.ndarray] = []

    inner = kind == INTERIOR
    ii, jj = np.nonzero(inner)
    vv = V[ii, jj]
    av = aval[ii, jj]
    diag = np.abs(vv) / hx + 2.0 * av / hv**2
    r = idx[ii, jj]
    rows += [r, r, r]
    cols += [r, idx[ii, jj - 1], idx[ii, jj + 1]]
    vals += [diag, -av / hv**2, -av / hv**2]
    up = vv > 0
    rows.append(r[up])
    cols.append(idx[ii[up] - 1, jj[up]])
    vals.append(-vv[up] / hx)
    down = vv < 0
    rows.append(r[down])
    cols.append(idx[ii[down] + 1, jj[down]])
    vals.append(vv[down] / hx)

    rhs = np.zeros(N)
    rhs[r] = Fval[ii, jj]

    dmask = kind == DIRICHLET
    rd = idx[dmask]
    rows.append(rd)
    cols.append(rd)
    vals.append(np.ones(rd.size))
    rhs[rd] = _boundary_data(grid, bc, kind)[dmask]

    truncation = None
    if isinstance(bc, Diffuse):
        norm = wall_normalization(bc.M)
        if abs(norm - 1.0) > 1e-6:
            raise ValidationError(f"wall density not normalized: ∫ M w_- dw = {norm:.10g}")
        truncation, _ = integrate.quad(lambda w: float(bc.M(np.array(w))) * -w, -np.inf, -grid.V)
        jout = np.arange(0, grid.nv // 2 + 1)  # v <= 0 on the wall
        weights = np.full(jout.size, hv)
        weights[0] = weights[-1] = 0.5 * hv
        flux = weights * np.abs(grid.v[jout])
        jin = np.nonzero(kind[0] == DIFFUSE)[0]
        Mv = np.asarray(bc.M(grid.v[jin]), dtype=float)
        for j, m in zip(jin, Mv):
            rows.append(np.concatenate(([idx[0, j]], np.full(jout.size, idx[0, j]))))
            cols.append(np.concatenate(([idx[0, j]], idx[0, jout])))
            vals.append(np.concatenate(([1.0], -m * flux)))

    A = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(N, N)
    )
    A.sum_duplicates()
    return LinearSystem(A, rhs, grid, kind, truncation)


# ------------------------------------------------------------------ solving


def _condition_estimate(A: sp.csr_matrix, lu=None) -> float:
    try:
        norm_a = spla.onenormest(A)
        if lu is None:
            lu = spla.splu(A.tocsc())
        inv = spla.LinearOperator(A.shape, matvec=lu.solve, rmatvec=lambda y: lu.solve(y, trans="T"))
        return float(norm_a * spla.onenormest(inv))
    except Exception:  # noqa: BLE001 - the estimate is diagnostic only
        return math.inf


def solve(system: LinearSystem, rtol: float = 1e-10) -> Field:
    """Direct sparse LU (iterative GMRES + ILU above 4e6 unknowns)."""
    A, b = system.matrix, system.rhs
    N = A.shape[0]
    lu = None
    if N <= DIRECT_LIMIT:
        try:
            lu = spla.splu(A.tocsc(), permc_spec="COLAMD")
        except RuntimeError as exc:
            raise SolverError(f"singular system: {exc}; condition estimate inf") from exc
        f = lu.solve(b)
    else:
        ilu = spla.spilu(A.tocsc(), drop_tol=1e-6, fill_factor=20)
        pre = spla.LinearOperator(A.shape, matvec=ilu.solve)
        f, info = spla.gmres(A, b, M=pre, rtol=rtol * 1e-2, restart=200, maxiter=2000)
        if info != 0:
            raise SolverError(f"GMRES did not converge (info={info}); condition estimate {_condition_estimate(A):.3g}")
    res = float(np.max(np.abs(A @ f - b))) if N else 0.0
    scale = max(float(np.max(np.abs(b))), float(spla.norm(A, np.inf)) * float(np.max(np.abs(f))), 1e-300)
    if not np.all(np.isfinite(f)) or res > rtol * scale:
        raise SolverError(
            f"solve residual {res:.3g} exceeds tolerance; condition estimate {_condition_estimate(A, lu):.3g}"
        )
    meta = {"residual": res}
    if system.wall_truncation is not None:
        meta["wall_truncation"] = system.wall_truncation
    return Field(f.reshape(system.grid.shape), system.grid, meta)


def residual(f: Field, a: Coefficient = 1.0, F: Coefficient = 0.0, mask: Optional[np.ndarray] = None) -> float:
    """Max |v D_x f - a D_vv f - F| over nodes carrying the interior equation.

    Interior nodes are those off the kinetic boundary; ``mask`` restricts
    the maximum further.
    """
    g = f.grid
    X, V = g.mesh()
    kind = _node_kinds(g, Absorbing())
    sel = kind == INTERIOR
    if mask is not None:
        sel &= mask
    u = f.values
    ii, jj = np.nonzero(sel)
    vv = V[ii, jj]
    dvv = (u[ii, jj + 1] - 2 * u[ii, jj] + u[ii, jj - 1]) / g.hv**2
    dx = np.zeros(ii.size)
    up = vv > 0
    dx[up] = (u[ii[up], jj[up]] - u[ii[up] - 1, jj[up]]) / g.hx
    dn = vv < 0
    dx[dn] = (u[ii[dn] + 1, jj[dn]] - u[ii[dn], jj[dn]]) / g.hx
    r = vv * dx - _evaluate(a, X, V)[ii, jj] * dvv - _evaluate(F, X, V)[ii, jj]
    return float(np.max(np.abs(r))) if r.size else 0.0


def sample_field(func: Callable[[np.ndarray, np.ndarray], np.ndarray], grid: GridSpec) -> Field:
    X, V = grid.mesh()
    return Field(np.asarray(func(X, V), dtype=float), grid)


# -------------------------------------------------------------- convergence


@dataclass(frozen=True)
class ConvergenceRow:
    nx: int
    nv: int
    h: float
    max_error: float
    observed_order: Optional[float]


def convergence_study(
    exact: Callable[[np.ndarray, np.ndarray], np.ndarray],
    levels: int = 4,
    base: GridSpec = GridSpec(1.0, 1.0, 64, 64),
    a: Coefficient = 1.0,
    F: Coefficient = 0.0,
    error_mask: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None,
) -> list[ConvergenceRow]:
    """Solve with the trace of ``exact`` as data on successively halved grids.

    Each row reports the max nodal error and log2 of the error ratio to the
    previous level.  ``error_mask`` (x, v) -> bool restricts the maximum.
    """
    if levels < 3:
        raise ValidationError("convergence_study: need at least 3 levels")
    rows: list[ConvergenceRow] = []
    grid = base
    prev = None
    for _ in range(levels):
        field_ = solve(assemble(grid, a, F, Inflow(exact)))
        X, V = grid.mesh()
        err = np.abs(field_.values - exact(X, V))
        if error_mask is not None:
            err = err[error_mask(X, V)]
        e = float(np.max(err))
        order = None if prev is None else math.log2(prev / e)
        rows.append(ConvergenceRow(grid.nx, grid.nv, grid.hx, e, order))
        prev = e
        grid = grid.refine()
    return rows

"""Command line entry point: ``grazing <command> <action> [options]``.

Parameters resolve as defaults < ``--config`` JSON < explicit flags, and the
resolved values are echoed into every output header.  Exit codes: 0 success,
1 invalid input, 2 numerical failure; errors go to stderr as one JSON record.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import math
import sys
from dataclasses import asdict
from typing import Any, Callable, Optional

import numpy as np

from . import __version__
from . import fd, geometry as geo, mc, probes
from . import solutions as sol
from . import specfun as sf
from .errors import NumericalError, ValidationError

SCHEMA = 1


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit with status 2
        raise ValidationError(message)


# ----------------------------------------------------------------- params


def _floats(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(u) for u in text]
    return [float(u) for u in str(text).split(",") if u.strip()]


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    low = str(text).lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValidationError(f"not a boolean: {text!r}")


def _opt_float(text) -> Optional[float]:
    return None if text is None or str(text).lower() in ("none", "null", "") else float(text)


# (name, converter, default, help)
Param = tuple[str, Callable[[Any], Any], Any, str]

POINT_HELP = "kinetic point t,x,v"

PARAMS: dict[tuple[str, str], list[Param]] = {
    ("specfun", "eval"): [
        ("fn", str, "tricomi-u", "gamma | rgamma | kummer-m | tricomi-u | tricomi-u-scaled"),
        ("a", float, 0.0, "first parameter (or the argument of gamma)"),
        ("b", float, 0.5, "second parameter"),
        ("z", _floats, [1.0], "comma-separated arguments"),
    ],
    ("solutions", "tabulate"): [
        ("family", str, "phi", "phi | psi | psi0-forced | Phi"),
        ("m", int, 0, "family index (m for phi, l for psi, k for Phi)"),
        ("grid", str, "default", "default | fd"),
        ("x_min", float, 2.0**-30, "smallest x of the default grid"),
        ("x_max", float, 1.0, "largest x"),
        ("nx", int, 61, "x nodes (geometric for default, cells for fd)"),
        ("v_max", float, 1.0, "velocity half-width"),
        ("nv", int, 256, "velocity cells"),
    ],
    ("geometry", "distance"): [("z1", _floats, [0, 0, 0], POINT_HELP), ("z2", _floats, [0, 0, 0], POINT_HELP)],
    ("geometry", "compose"): [("z1", _floats, [0, 0, 0], POINT_HELP), ("z2", _floats, [0, 0, 0], POINT_HELP)],
    ("geometry", "scale"): [("z1", _floats, [0, 0, 0], POINT_HELP), ("r", float, 1.0, "dilation factor")],
    ("geometry", "contains"): [
        ("z1", _floats, [0, 0, 0], "cylinder centre t,x,v"),
        ("z2", _floats, [0, 0, 0], POINT_HELP),
        ("r", float, 1.0, "cylinder radius"),
        ("half_space", _bool, False, "intersect with x > 0"),
    ],
    ("geometry", "grazing-distance"): [("z1", _floats, [0, 0, 0], POINT_HELP)],
    ("fd", "solve"): [
        ("X", float, 1.0, "box length in x"),
        ("V", float, 1.0, "velocity half-width"),
        ("nx", int, 64, "x cells"),
        ("nv", int, 64, "v cells (even)"),
        ("a", float, 1.0, "diffusion coefficient"),
        ("F", float, 0.0, "constant source"),
        ("bc", str, "inflow", "absorbing | inflow | diffuse"),
        ("data", str, "phi0", "boundary data for inflow: a named function"),
    ],
    ("fd", "convergence"): [
        ("exact", str, "phi0", "phi0 | psi0-forced | a named function solving the homogeneous problem"),
        ("levels", int, 4, "number of grids"),
        ("nx", int, 64, "cells of the coarsest grid"),
        ("x_cut", float, 0.0, "measure errors only on x >= x_cut"),
    ],
    ("mc", "estimate"): [
        ("x", float, 1.0, "starting x"),
        ("v", float, -1.0, "starting v"),
        ("g", str, "v", "wall data: one | v | a named function of v"),
        ("n_paths", int, 10_000, "number of paths"),
        ("dt_base", float, 1e-3, "largest time step"),
        ("boundary_refinement", float, 0.1, "adaptive step factor k in dt = k x^{2/3}"),
        ("box_X", _opt_float, None, "truncate at x = box_X"),
        ("box_V", _opt_float, None, "truncate at |v| = box_V"),
        ("far_field", float, 0.0, "value paid on the truncation walls"),
        ("horizon", float, 1e3, "time horizon per path"),
        ("max_unresolved", float, 0.0, "tolerated fraction of paths hitting the horizon"),
    ],
    ("mc", "forward"): [
        ("T", float, 2.0, "final time"),
        ("x_init", float, 1.0, "initial position"),
        ("absorbing", _bool, False, "kill particles at the wall instead of re-emitting"),
        ("n_paths", int, 100_000, "number of particles"),
        ("dt_base", float, 1e-2, "largest time step"),
        ("boundary_refinement", float, 0.1, "adaptive step factor"),
        ("x_hist", float, 0.05, "histogram range in x"),
        ("nx_bins", int, 5, "x bins"),
        ("v_hist", float, 1.0, "histogram range in |v|"),
        ("nv_bins", int, 40, "v bins"),
        ("wall_profile", str, "", "optional path for the wall density CSV v_bin,count,density,stderr"),
        ("wall_v_lo", float, 0.05, "smallest |v| of the wall profile"),
        ("wall_v_hi", float, 0.5, "largest |v| of the wall profile"),
        ("wall_bins", int, 6, "logarithmic bins of the wall profile"),
    ],
    ("probe", "holder"): [
        ("z0", _floats, [0, 0, 0], POINT_HELP),
        ("k0", int, 1, "largest scale 2^-k0"),
        ("k1", int, 8, "smallest scale 2^-k1"),
        ("n_points", int, 256, "points per cylinder"),
        ("scale_table", str, "", "optional path for the r,osc,fit CSV"),
    ],
    ("probe", "expansion"): [
        ("z0", _floats, [0, 0, 0], POINT_HELP),
        ("radii", _floats, [0.5, 0.25, 0.125, 0.0625], "comma-separated radii"),
        ("n_points", int, 512, "points per cylinder"),
    ],
    ("probe", "quotient"): [
        ("z0", _floats, [0, 0, 0], POINT_HELP),
        ("region", str, "all", "all | RZero | RPlus"),
        ("radius", float, 0.5, "sample radius"),
        ("n_points", int, 256, "sample size"),
    ],
    ("probe", "c3"): [
        ("z0", _floats, [0, 0, 0], POINT_HELP),
        ("eps", float, 0.2, "region exponent"),
        ("delta", float, 0.0, "depth shift of the sample curve"),
    ],
    ("probe", "decay"): [
        ("v0", float, 1.0, "incoming velocity"),
        ("R", float, 1.0, "sample radius"),
        ("n", int, 16, "sample size"),
    ],
    ("probe", "harnack"): [
        ("x0", float, 0.5, "centre x"),
        ("v0", float, 0.0, "centre v"),
        ("R", float, 0.5, "parent radius"),
        ("theta", float, 0.1, "inner radius factor"),
        ("gamma", float, 0.25, "time lag factor"),
        ("n_side", int, 64, "samples per side"),
    ],
    ("probe", "diffuse"): [
        ("k0", int, 8, "largest scale 2^-k0"),
        ("k1", int, 14, "smallest scale 2^-k1"),
    ],
    ("probe", "slope"): [
        ("v_lo", float, 0.05, "smallest |v| used"),
        ("v_hi", float, 0.5, "largest |v| used"),
        ("min_count", int, 10, "skip bins with fewer particles"),
    ],
    ("report", "grazing"): [
        ("criteria", str, "all", "comma-separated criterion numbers"),
        ("format", str, "text", "text | json"),
    ],
}

INPUT_ACTIONS = {("probe", a) for a in ("holder", "expansion", "quotient", "c3", "decay", "harnack", "slope")}


# ---------------------------------------------------------- named functions


def named_function(name: str) -> Callable:
    """Evaluable f(x, v) by name: phi0, psi1, phi:-1, psi0-forced, ..."""
    key = name.strip()
    fixed = {
        "phi0-quotient": lambda x, v: sol.phi(0, x, v) + np.asarray(v) ** 2 * sol.phi_dv(0, x, v, 1),
        "psi0-forced": sol.psi0_forced,
        "synthetic": lambda x, v: 2 * sol.phi(0, x, v) + sol.psi(0, x, v) + 1 + np.asarray(v),
        "counterexample": None,
        "one": lambda x, v: np.ones(np.broadcast(np.asarray(x), np.asarray(v)).shape),
        "zero": lambda x, v: np.zeros(np.broadcast(np.asarray(x), np.asarray(v)).shape),
        "v": lambda x, v: np.broadcast_to(np.asarray(v, dtype=float), np.broadcast(np.asarray(x), np.asarray(v)).shape).copy(),
    }
    if key in fixed:
        if key == "counterexample":
            return probes.build_diffuse_counterexample(scales=probes.default_scales(1, 4))
        return fixed[key]
    for fam, fun in (("phi", sol.phi), ("psi", sol.psi), ("Phi", sol.basis_Phi)):
        for sep in (":", ""):
            if key.startswith(fam + sep) and key != fam:
                tail = key[len(fam) + len(sep):]
                try:
                    idx = int(tail)
                except ValueError:
                    continue
                return lambda x, v, f=fun, i=idx: f(i, x, v)
    raise ValidationError(f"unknown function name {name!r}")


# ---------------------------------------------------------------- tables


def read_table(text: str) -> tuple[list[str], dict[str, np.ndarray]]:
    rows = [line for line in text.splitlines() if line.strip() and not line.startswith("#")]
    if not rows:
        raise ValidationError("empty CSV")
    reader = csv.DictReader(rows)
    cols = list(reader.fieldnames or [])
    data: dict[str, list] = {c: [] for c in cols}
    for r in reader:
        for c in cols:
            data[c].append(r[c])
    out = {}
    for c, vals in data.items():
        try:
            out[c] = np.array([float(u) if u != "" else math.nan for u in vals])
        except ValueError:
            out[c] = np.array(vals, dtype=object)
    return cols, out


class TabulatedFunction:
    """Bilinear interpolant of x,v,value data on a tensor grid of any spacing."""

    def __init__(self, xs: np.ndarray, vs: np.ndarray, values: np.ndarray):
        from scipy.interpolate import RegularGridInterpolator

        self.xs, self.vs = xs, vs
        self._interp = RegularGridInterpolator((xs, vs), values, bounds_error=True)

    def __call__(self, x, v):
        x, v = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(v, dtype=float))
        try:
            return self._interp(np.column_stack([x.ravel(), v.ravel()])).reshape(x.shape)
        except ValueError as exc:
            raise ValidationError(f"point outside the tabulated grid: {exc}") from exc


def load_evaluable(text: str):
    """Field when the CSV is an FD node grid, otherwise a tensor-grid interpolant."""
    cols, data = read_table(text)
    if not {"x", "v", "value"} <= set(cols):
        raise ValidationError("input CSV needs columns x,v,value")
    x, v, val = data["x"], data["v"], data["value"]
    xs, vs = np.unique(x), np.unique(v)
    if xs.size * vs.size != x.size:
        raise ValidationError("input CSV is not a full tensor grid")
    if np.any(~np.isfinite(val)):
        raise ValidationError("input CSV has missing values")
    uniform = lambda a: a.size > 2 and np.allclose(np.diff(a), a[1] - a[0], rtol=1e-9, atol=0)
    fd_shape = xs.size >= 5 and vs.size >= 5 and (vs.size - 1) % 2 == 0
    if fd_shape and xs[0] == 0.0 and uniform(xs) and uniform(vs) and math.isclose(vs[0], -vs[-1], rel_tol=1e-12):
        return fd.Field.from_csv(text)
    order = np.lexsort((v, x))
    return TabulatedFunction(xs, vs, val[order].reshape(xs.size, vs.size))


# ---------------------------------------------------------------- output


class Output:
    def __init__(self, command: str, action: str, params: dict, args):
        self.command, self.action, self.params = command, action, params
        self.path = args.out
        self.timestamp = not args.no_timestamp
        self.seed = args.seed
        self.threads = args.threads

    def resolved(self) -> dict:
        out = {"command": f"{self.command} {self.action}", **self.params}
        if self.seed is not None:
            out["seed"] = self.seed
        if self.threads is not None:
            out["threads"] = self.threads
        return out

    def header(self) -> list[str]:
        lines = [f"schema={SCHEMA}", f"grazing={__version__}"]
        if self.timestamp:
            lines.append("generated=" + _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"))
        for k, val in self.resolved().items():
            lines.append(f"{k}={json.dumps(val)}")
        return lines

    def _emit(self, text: str) -> None:
        if self.path:
            with open(self.path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
                fh.flush()
        else:
            sys.stdout.write(text)
            sys.stdout.flush()

    def csv(self, body: str) -> None:
        self._emit("".join(f"# {h}\n" for h in self.header()) + body)

    def json(self, result: dict) -> None:
        record = {"schema": SCHEMA, "grazing": __version__, "params": self.resolved(), "result": result}
        if self.timestamp:
            record["generated"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
        self._emit(json.dumps(_plain(record), sort_keys=True) + "\n")


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


# -------------------------------------------------------------- handlers


def _point(p: list[float]) -> geo.KineticPoint:
    if len(p) != 3:
        raise ValidationError("a kinetic point needs three components t,x,v")
    return geo.KineticPoint(p[0], p[1], p[2])


def _point_json(z: geo.KineticPoint) -> list[float]:
    return [z.t, float(z.x[0]), float(z.v[0])]


def do_specfun(action, p, out, args):
    z = np.asarray(p["z"], dtype=float)
    fn = p["fn"]
    if fn == "gamma":
        values = [sf.gamma(p["a"])]
    elif fn == "rgamma":
        values = [sf.rgamma(p["a"])]
    elif fn == "kummer-m":
        values = np.atleast_1d(sf.kummer_m(p["a"], p["b"], z)).tolist()
    elif fn == "tricomi-u":
        values = np.atleast_1d(sf.tricomi_u(p["a"], p["b"], z)).tolist()
    elif fn == "tricomi-u-scaled":
        values = np.atleast_1d(sf.tricomi_u_scaled(p["a"], p["b"], z)).tolist()
    else:
        raise ValidationError(f"unknown special function {fn!r}")
    out.json({"value": values[0] if len(values) == 1 else values, "z": z.tolist()})


def _tabulate_grid(p) -> tuple[np.ndarray, np.ndarray]:
    if p["grid"] == "default":
        if not 0 < p["x_min"] < p["x_max"]:
            raise ValidationError("need 0 < x_min < x_max")
        # the x = 0 row lets probes sample cylinders that touch the wall
        xs = np.concatenate([[0.0], np.geomspace(p["x_min"], p["x_max"], p["nx"])])
        vs = np.linspace(-p["v_max"], p["v_max"], p["nv"] + 1)
        return xs, vs
    if p["grid"] == "fd":
        g = fd.GridSpec(p["x_max"], p["v_max"], p["nx"], p["nv"])
        return g.x, g.v
    raise ValidationError(f"unknown grid {p['grid']!r}")


def do_solutions(action, p, out, args):
    xs, vs = _tabulate_grid(p)
    fam, m = p["family"], p["m"]
    if fam == "Phi":
        xs = xs[xs > 0]
    X, V = np.meshgrid(xs, vs, indexing="ij")
    x, v = X.ravel(), V.ravel()
    if fam == "phi":
        value = np.asarray(sol.phi(m, x, v))
    elif fam == "psi":
        value = np.asarray(sol.psi(m, x, v))
    elif fam == "psi0-forced":
        value = np.asarray(sol.psi0_forced(x, v))
    elif fam == "Phi":
        value = np.asarray(sol.basis_Phi(m, x, v))
    else:
        raise ValidationError(f"unknown family {fam!r}")
    n = x.size
    region = np.full(n, "", dtype=object)
    env = np.full(n, math.nan)
    ratio = np.full(n, math.nan)
    pos = x > 0
    names = np.array(["RMinus", "RZero", "RPlus"], dtype=object)
    region[pos] = names[sol._region_codes(x[pos], v[pos]) + 1]
    if fam == "phi":
        ok = pos & ~((m >= 1) & (v < 0))
        ratio[ok] = np.asarray(sol.envelope_ratio(m, x[ok], v[ok]))
        with np.errstate(divide="ignore", invalid="ignore"):
            env[ok] = value[ok] / ratio[ok]
    cell = lambda a: "" if math.isnan(a) else repr(float(a))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["index", "x", "v", "value", "region", "envelope", "ratio"])
    for i in range(n):
        w.writerow([m, repr(float(x[i])), repr(float(v[i])), repr(float(value[i])), region[i], cell(env[i]), cell(ratio[i])])
    out.csv(buf.getvalue())


def do_geometry(action, p, out, args):
    if action == "distance":
        d = geo.kinetic_distance(_point(p["z1"]), _point(p["z2"]))
        out.json({"distance": d})
    elif action == "compose":
        out.json({"point": _point_json(geo.group_compose(_point(p["z1"]), _point(p["z2"])))})
    elif action == "scale":
        out.json({"point": _point_json(geo.kinetic_scale(p["r"], _point(p["z1"])))})
    elif action == "contains":
        cyl = geo.KineticCylinder(_point(p["z1"]), p["r"], p["half_space"])
        out.json({"contains": geo.cylinder_contains(cyl, _point(p["z2"]))})
    else:
        out.json({"distance": geo.kinetic_dist_to_grazing(_point(p["z1"]))})


def do_fd(action, p, out, args):
    if action == "solve":
        grid = fd.GridSpec(p["X"], p["V"], p["nx"], p["nv"])
        if p["bc"] == "absorbing":
            bc = fd.Absorbing()
        elif p["bc"] == "inflow":
            bc = fd.Inflow(named_function(p["data"]))
        elif p["bc"] == "diffuse":
            bc = fd.Diffuse(fd.maxwellian)
        else:
            raise ValidationError(f"unknown boundary condition {p['bc']!r}")
        f = fd.solve(fd.assemble(grid, p["a"], p["F"], bc))
        res = fd.residual(f, p["a"], p["F"])
        out.csv(f.to_csv(header=[f"residual={res!r}"]))
        return
    if p["exact"] == "psi0-forced":
        exact, F = sol.psi0_forced, 1.0
    else:
        exact, F = named_function(p["exact"]), 0.0
    mask = (lambda x, v: x >= p["x_cut"]) if p["x_cut"] > 0 else None
    rows = fd.convergence_study(exact, levels=p["levels"], base=fd.GridSpec(1.0, 1.0, p["nx"], p["nx"]), F=F, error_mask=mask)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["nx", "nv", "h", "max_error", "observed_order"])
    for r in rows:
        w.writerow([r.nx, r.nv, repr(r.h), repr(r.max_error), "" if r.observed_order is None or math.isnan(r.observed_order) else repr(r.observed_order)])
    out.csv(buf.getvalue())


def _mc_config(p, args, **extra) -> mc.McConfig:
    return mc.McConfig(
        n_paths=p["n_paths"], dt_base=p["dt_base"], seed=args.seed if args.seed is not None else 0,
        boundary_refinement=p["boundary_refinement"], threads=args.threads, **extra,
    )


def do_mc(action, p, out, args):
    if action == "estimate":
        cfg = _mc_config(p, args, horizon=p["horizon"], max_unresolved=p["max_unresolved"])
        g = named_function(p["g"])
        wall = lambda v, g=g: np.asarray(g(np.zeros_like(v), v), dtype=float)
        X = p["box_X"] if p["box_X"] is not None else math.inf
        Vb = p["box_V"] if p["box_V"] is not None else math.inf
        far = None
        if math.isfinite(X) or math.isfinite(Vb):
            c = p["far_field"]
            far = lambda x, v, c=c: np.full(np.shape(x), c)
        est = mc.estimate_inflow_solution(p["x"], p["v"], wall, cfg, mc.Box(X, Vb, far))
        out.json(json.loads(est.to_json()))
        return
    cfg = _mc_config(p, args)
    x_edges = np.linspace(0.0, p["x_hist"], p["nx_bins"] + 1)
    v_edges = np.linspace(-p["v_hist"], p["v_hist"], p["nv_bins"] + 1)
    res = mc.simulate_forward_diffuse(
        None if p["absorbing"] else fd.maxwellian, p["T"], cfg, x_init=p["x_init"],
        absorbing=p["absorbing"], x_edges=x_edges, v_edges=v_edges,
    )
    extra = [f"n_alive={res.n_alive}", f"n_absorbed={res.n_absorbed}", f"n_reemitted={res.n_reemitted}"]
    if p["wall_profile"]:
        prof = mc.wall_density_profile(res, p["wall_v_lo"], p["wall_v_hi"], p["wall_bins"])
        edges = np.geomspace(p["wall_v_lo"], p["wall_v_hi"], p["wall_bins"] + 1)
        counts, _ = np.histogram(-res.hit_velocities[res.hit_velocities < 0], bins=edges)
        lines = ["v_bin,count,density,stderr"]
        for c, k, d, e in zip(prof.v_centers, counts, prof.density, prof.stderr):
            lines.append(f"{-float(c)!r},{int(k)},{float(d)!r},{float(e)!r}")
        with open(p["wall_profile"], "w", encoding="utf-8") as fh:
            fh.write("".join(f"# {h}\n" for h in out.header() + extra) + "\n".join(lines) + "\n")
    out.csv(res.to_csv(header=extra))


def histogram_slope(text: str, v_lo: float, v_hi: float, min_count: int = 10) -> dict:
    """Weighted slope of log density against log |v| on the outgoing side.

    Accepts the wall profile (v_bin,count,density,stderr) or the phase-space
    histogram, from which the first x bin is used.
    """
    cols, d = read_table(text)
    need = {"v_bin", "count", "density"}
    if not need <= set(cols):
        raise ValidationError("histogram CSV needs columns v_bin,count,density")
    rows = np.ones(d["v_bin"].size, dtype=bool)
    if "x_bin" in cols:
        rows = d["x_bin"] == d["x_bin"].min()
    speed = -d["v_bin"]
    sel = rows & (speed >= v_lo) & (speed <= v_hi) & (d["count"] >= min_count)
    if sel.sum() < 3:
        raise ValidationError("fewer than three usable bins")
    lv, ld = np.log(speed[sel]), np.log(d["density"][sel])
    w = d["count"][sel]
    A = np.column_stack([np.ones(lv.size), lv]) * np.sqrt(w)[:, None]
    coef, *_ = np.linalg.lstsq(A, ld * np.sqrt(w), rcond=None)
    cov = np.linalg.inv(A.T @ A)
    return {"slope": float(coef[1]), "slope_stderr": float(math.sqrt(cov[1, 1])), "bins": int(sel.sum())}


def do_probe(action, p, out, args):
    if action == "diffuse":
        ce = probes.build_diffuse_counterexample(scales=probes.default_scales(p["k0"], p["k1"]))
        out.json({
            "a": ce.a, "flux_phi": ce.flux_phi, "flux_xi": ce.flux_xi,
            "normalization_residual": ce.normalization_residual,
            "exponent_origin": asdict(ce.exponent_origin), "exponent_interior": asdict(ce.exponent_interior),
        })
        return
    text = _read_input(args)
    if action == "slope":
        if text is None:
            raise ValidationError("probe slope needs --input with a histogram CSV")
        out.json(histogram_slope(text, p["v_lo"], p["v_hi"], p["min_count"]))
        return
    if text is not None:
        f = load_evaluable(text)
    elif args.function:
        f = named_function(args.function)
    else:
        raise ValidationError("give --input CSV or --function NAME")
    if action == "holder":
        est = probes.holder_exponent(f, tuple(p["z0"]), probes.default_scales(p["k0"], p["k1"]), p["n_points"])
        if p["scale_table"]:
            with open(p["scale_table"], "w", encoding="utf-8") as fh:
                fh.write("".join(f"# {h}\n" for h in out.header()) + est.scale_table())
        out.json(asdict(est))
    elif action == "expansion":
        fit = probes.expansion_fit(f, tuple(p["z0"]), p["radii"], p["n_points"])
        out.json(json.loads(fit.to_json()))
    elif action == "quotient":
        region = {"all": None, "RZero": sol.R_ZERO, "RPlus": sol.R_PLUS, "RMinus": sol.RMinus()}.get(p["region"], "bad")
        if region == "bad":
            raise ValidationError(f"unknown region {p['region']!r}")
        out.json(asdict(probes.quotient_lipschitz(f, tuple(p["z0"]), region, p["radius"], p["n_points"])))
    elif action == "c3":
        out.json(asdict(probes.c3_region_check(f, p["eps"], tuple(p["z0"]), p["delta"])))
    elif action == "decay":
        fit = probes.gamma_minus_decay(f, p["v0"], p["R"], p["n"])
        out.json({"slope": fit.slope, "intercept": fit.intercept, "decays": fit.decays,
                  "predicted": -p["v0"] ** 3 / 9.0})
    elif action == "harnack":
        rep = probes.harnack_ratio(f, p["x0"], p["v0"], p["R"], p["theta"], p["gamma"], p["n_side"])
        out.json(asdict(rep))


def do_report(action, p, out, args):
    from . import acceptance

    if p["criteria"] == "all":
        numbers = sorted(acceptance.CHECKS)
    else:
        try:
            numbers = [int(u) for u in p["criteria"].split(",")]
        except ValueError as exc:
            raise ValidationError("criteria must be comma-separated integers") from exc
        bad = [k for k in numbers if k not in acceptance.CHECKS]
        if bad:
            raise ValidationError(f"unknown criteria {bad}")
    results = [acceptance.run(k) for k in numbers]
    if p["format"] == "json":
        out.json({"criteria": [
            {"number": r.number, "title": r.title, "passed": r.passed, "measured": r.measured,
             "runtime_s": r.runtime_s, "budget_s": r.budget_s, "notes": r.notes}
            for r in results
        ]})
    elif p["format"] == "text":
        lines = [r.line() + ("".join(f"\n    note: {n}" for n in r.notes)) for r in results]
        passed = sum(r.passed for r in results)
        lines.append(f"{passed}/{len(results)} criteria passed")
        out.csv("\n".join(lines) + "\n")
    else:
        raise ValidationError(f"unknown format {p['format']!r}")


def _read_input(args) -> Optional[str]:
    if not getattr(args, "input", None):
        return None
    try:
        with open(args.input, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise ValidationError(f"cannot read {args.input}: {exc}") from exc


HANDLERS = {
    "specfun": do_specfun,
    "solutions": do_solutions,
    "geometry": do_geometry,
    "fd": do_fd,
    "mc": do_mc,
    "probe": do_probe,
    "report": do_report,
}


# ---------------------------------------------------------------- parsing


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON file with parameter values")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--seed", type=int, help="unsigned 64-bit seed")
    common.add_argument("--threads", type=int, help="worker threads for Monte Carlo")
    common.add_argument("--no-timestamp", action="store_true", help="omit the generation time")

    parser = _Parser(prog="grazing", description="Kinetic boundary regularity toolkit.")
    parser.add_argument("--version", action="version", version=__version__)
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    groups: dict[str, argparse._SubParsersAction] = {}
    for (cmd, action), params in PARAMS.items():
        if cmd not in groups:
            groups[cmd] = commands.add_parser(cmd).add_subparsers(dest="action", required=True, parser_class=_Parser)
        sub = groups[cmd].add_parser(action, parents=[common])
        for name, _conv, default, help_ in params:
            sub.add_argument("--" + name.replace("_", "-"), dest=name, default=None, help=f"{help_} (default {default})")
        if (cmd, action) in INPUT_ACTIONS:
            sub.add_argument("--input", help="CSV produced by another subcommand")
            if action != "slope":
                sub.add_argument("--function", help="named function, e.g. phi0, psi0, phi:1")
    return parser


def resolve_params(cmd: str, action: str, args) -> dict:
    spec = {name: (conv, default) for name, conv, default, _ in PARAMS[(cmd, action)]}
    values = {name: default for name, (_c, default) in spec.items()}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(cfg, dict):
            raise ValidationError("config must be a JSON object")
        unknown = sorted(set(cfg) - set(spec) - {"seed", "threads"})
        if unknown:
            raise ValidationError(f"unknown config keys: {', '.join(unknown)}")
        for key in ("seed", "threads"):
            if key in cfg and getattr(args, key) is None:
                setattr(args, key, int(cfg[key]))
        for k, val in cfg.items():
            if k in spec:
                values[k] = _convert(spec[k][0], val, k)
    for k in spec:
        flag = getattr(args, k, None)
        if flag is not None:
            values[k] = _convert(spec[k][0], flag, k)
    if args.seed is not None and not 0 <= args.seed < 2**64:
        raise ValidationError("seed must be an unsigned 64-bit integer")
    if args.threads is not None and args.threads < 1:
        raise ValidationError("threads must be positive")
    return values


def _convert(conv, value, name):
    try:
        return conv(value)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"bad value for {name}: {value!r}") from exc


def _fail(exc: Exception, code: int) -> int:
    record = {"schema": SCHEMA, "error": type(exc).__name__, "message": str(exc), "exit_code": code}
    sys.stderr.write(json.dumps(record) + "\n")
    sys.stderr.flush()
    return code


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        params = resolve_params(args.command, args.action, args)
        out = Output(args.command, args.action, params, args)
        with np.errstate(all="ignore"):
            HANDLERS[args.command](args.action, params, out, args)
    except ValueError as exc:  # ValidationError and its subclasses
        return _fail(exc, 1)
    except (NumericalError, ArithmeticError) as exc:
        return _fail(exc, 2)
    except OSError as exc:
        return _fail(exc, 1)
    return 0


def main() -> None:
    sys.exit(run())

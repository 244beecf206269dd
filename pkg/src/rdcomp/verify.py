"""Manufactured-solutions harness: derived forcings, errors, rate tables.

Pick exact densities u_i(t,x,y), derive the forcing that makes them solve
the competition system exactly, run the discrete schemes against Dirichlet
data from the exact solutions, and measure the discrete L2(0,T;H1) error

    ||e_i|| = ( dt * sum_{n=1..M} ||u_i(t^n) - u_{i,h}^n||_{H1}^2 )^{1/2}.

Successive halvings of h or dt then give observed convergence rates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import expr as ex
from . import fem, schemes
from .expr import Expr, as_expr, differentiate, evaluate
from .model import SpeciesParams, SystemSpec


@dataclass
class MmsCase:
    """Exact solutions plus the system spec carrying their derived forcings."""

    spec: SystemSpec
    exacts: list


def mms_forcing(exacts, species: SpeciesParams, K: Expr, i: int) -> Expr:
    """Forcing that makes exacts[i] solve species i's equation.

    f_i = du_i/dt - d_i lap(u_i) - r_i u_i (1 - mu_i - (1/K) sum_j u_j),
    assembled symbolically.
    """
    u = exacts[i]
    du_dt = differentiate(u, "t")
    lap = ex.add(
        differentiate(differentiate(u, "x"), "x"),
        differentiate(differentiate(u, "y"), "y"),
    )
    total = exacts[0]
    for other in exacts[1:]:
        total = ex.add(total, other)
    logistic = ex.sub(ex.sub(ex.Num(1.0), ex.Num(float(species.mu))), ex.div(total, K))
    reaction = ex.mul(ex.mul(species.r, u), logistic)
    return ex.sub(ex.sub(du_dt, ex.mul(ex.Num(float(species.d)), lap)), reaction)


def make_case(exacts, species, K, *, T, dt, nx, ny=None, degree=2,
              scheme="dbe", domain=(0.0, 1.0, 0.0, 1.0), bc="dirichlet") -> MmsCase:
    """Build an MmsCase: forcings derived, initial and boundary data = exact."""
    exacts = [as_expr(e) for e in exacts]
    if len(exacts) != len(species):
        raise ValueError("one exact solution per species is required")
    K = as_expr(K)
    full = [
        SpeciesParams(
            d=sp.d, mu=sp.mu, r=sp.r,
            f=mms_forcing(exacts, sp, K, i),
            u0=exacts[i],
            boundary=exacts[i] if bc == "dirichlet" else None,
        )
        for i, sp in enumerate(species)
    ]
    spec = SystemSpec(species=full, K=K, T=T, dt=dt, bc=bc, scheme=scheme,
                      domain=domain, nx=nx, ny=ny if ny is not None else nx, degree=degree)
    return MmsCase(spec=spec, exacts=exacts)


def pde_residual(case: MmsCase, i: int, points) -> np.ndarray:
    """Residual of species i's equation at (t,x,y) points, all derivatives
    reconstructed by fourth-order central differences (independent of the
    symbolic derivative path that produced the forcing)."""
    u = case.exacts[i]
    sp = case.spec.species[i]
    pts = np.asarray(points, dtype=float)
    t, x, y = pts[:, 0], pts[:, 1], pts[:, 2]

    def d1(var_index, h=1e-4):
        shift = np.zeros(3)
        shift[var_index] = h
        args = [(t + 2 * shift[0], x + 2 * shift[1], y + 2 * shift[2]),
                (t + shift[0], x + shift[1], y + shift[2]),
                (t - shift[0], x - shift[1], y - shift[2]),
                (t - 2 * shift[0], x - 2 * shift[1], y - 2 * shift[2])]
        f2p, f1p, f1m, f2m = (evaluate(u, *a) for a in args)
        return (-f2p + 8 * f1p - 8 * f1m + f2m) / (12 * h)

    def d2(var_index, h=3e-3):
        shift = np.zeros(3)
        shift[var_index] = h
        args = [(t + 2 * shift[0], x + 2 * shift[1], y + 2 * shift[2]),
                (t + shift[0], x + shift[1], y + shift[2]),
                (t - shift[0], x - shift[1], y - shift[2]),
                (t - 2 * shift[0], x - 2 * shift[1], y - 2 * shift[2])]
        f2p, f1p, f1m, f2m = (evaluate(u, *a) for a in args)
        f0 = evaluate(u, t, x, y)
        return (-f2p + 16 * f1p - 30 * f0 + 16 * f1m - f2m) / (12 * h * h)

    total = sum(evaluate(e, t, x, y) for e in case.exacts)
    uval = evaluate(u, t, x, y)
    rval = evaluate(sp.r, t, x, y)
    kval = evaluate(case.spec.K, t, x, y)
    fval = evaluate(sp.f, t, x, y)
    return (d1(0) - sp.d * (d2(1) + d2(2))
            - rval * uval * (1.0 - sp.mu - total / kval) - fval)


def error_21(traj: schemes.Trajectory, case: MmsCase, i: int) -> float:
    """Discrete L2(0,T;H1) error of species i over the retained field levels."""
    if traj.fields is None:
        raise ValueError("trajectory does not retain fields; run with keep_fields=True")
    dt = case.spec.dt
    total = 0.0
    for n in range(1, len(traj.fields)):
        _, h1 = fem.error_norms(traj.fields[n][i], case.exacts[i], t=traj.times[n])
        total += h1 * h1
    return math.sqrt(dt * total)


@dataclass
class RateTable:
    """Per-level errors and observed log2 rates of a refinement study."""

    axis: str  # "spatial" | "temporal"
    params: np.ndarray  # h for spatial, dt for temporal
    errors: np.ndarray  # (levels, species)
    rates: np.ndarray  # (levels, species); first row is nan

    @property
    def num_species(self):
        return self.errors.shape[1]

    def header(self):
        label = "h" if self.axis == "spatial" else "dt"
        cols = [label]
        for i in range(self.num_species):
            cols += [f"err_{i + 1}", f"rate_{i + 1}"]
        return cols

    def to_csv(self, path):
        with open(path, "w", newline="\n") as out:
            out.write(",".join(self.header()) + "\n")
            for row in range(len(self.params)):
                cells = [schemes.format_float(self.params[row])]
                for i in range(self.num_species):
                    cells.append(f"{self.errors[row, i]:.6e}")
                    rate = self.rates[row, i]
                    cells.append("" if math.isnan(rate) else f"{rate:.2f}")
                out.write(",".join(cells) + "\n")

    def __str__(self):
        widths = [12] + [12, 6] * self.num_species
        head = self.header()
        lines = ["  ".join(f"{h:>{w}}" for h, w in zip(head, widths))]
        for row in range(len(self.params)):
            cells = [f"{self.params[row]:>12.6g}"]
            for i in range(self.num_species):
                cells.append(f"{self.errors[row, i]:>12.4e}")
                rate = self.rates[row, i]
                cells.append(f"{'':>6}" if math.isnan(rate) else f"{rate:>6.2f}")
            lines.append("  ".join(cells))
        return "\n".join(lines)


def convergence_study(case: MmsCase, axis: str, levels, fixed=None) -> RateTable:
    """Run the case over successive refinements and tabulate errors and rates.

    axis="spatial": levels are cell counts nx (h = 1/nx), dt kept fixed
    (override step count with ``fixed``).  axis="temporal": levels are step
    counts M (dt = T/M), mesh kept fixed (override nx with ``fixed``).
    """
    base = case.spec
    if axis == "spatial":
        if fixed is not None:
            base = base.replace(dt=base.T / int(fixed))
        specs = [base.replace(nx=int(n), ny=int(n)) for n in levels]
        params = np.array([1.0 / int(n) for n in levels])
    elif axis == "temporal":
        if fixed is not None:
            base = base.replace(nx=int(fixed), ny=int(fixed))
        specs = [base.replace(dt=base.T / int(m)) for m in levels]
        params = np.array([base.T / int(m) for m in levels])
    else:
        raise ValueError(f"axis must be 'spatial' or 'temporal', got {axis!r}")

    errors = np.empty((len(specs), base.N))
    for row, spec in enumerate(specs):
        traj = schemes.run(spec, keep_fields=True)
        sub_case = MmsCase(spec=spec, exacts=case.exacts)
        errors[row] = [error_21(traj, sub_case, i) for i in range(spec.N)]

    rates = np.full_like(errors, np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        rates[1:] = np.log2(errors[:-1] / errors[1:])
    return RateTable(axis=axis, params=params, errors=errors, rates=rates)

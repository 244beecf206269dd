"""Competition-system specification and stability diagnostics.

The governed system, for i = 1..N on a rectangle:

    du_i/dt = d_i lap(u_i) + r_i u_i (1 - mu_i - (1/K) sum_j u_j) + f_i

with either Dirichlet data per species or a no-flux boundary.  The
diagnostics report sampled coefficient bounds, the coercivity surrogate
alpha_i, and the backward-Euler time-step bound; they are advisory and are
never enforced.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import fem
from .expr import Expr, as_expr, evaluate
from .mesh import build_rect_mesh

# Poincare constant of the unit square with homogeneous Dirichlet data,
# 1/(sqrt(2) pi); the analysis constant is generic, this gives the
# diagnostics a concrete default.
DEFAULT_C = 1.0 / (math.sqrt(2.0) * math.pi)

SCHEMES = ("dbe", "dbdf2")
BOUNDARY_KINDS = ("no_flux", "dirichlet")


class ModelError(Exception):
    """Invalid system specification or inadmissible sampled data."""


@dataclass
class SpeciesParams:
    """Coefficients of one competing species."""

    d: float  # diffusion rate, > 0
    mu: float  # harvesting (>0) or stocking (<0) coefficient
    r: Expr  # intrinsic growth rate r(t, x, y)
    f: Expr = None  # forcing; None means zero
    u0: Expr = None  # initial density
    boundary: Expr = None  # Dirichlet value; required when bc == "dirichlet"

    def __post_init__(self):
        if self.d <= 0:
            raise ModelError(f"diffusion rate must be positive, got {self.d}")
        self.r = as_expr(self.r)
        self.f = as_expr(self.f) if self.f is not None else None
        self.u0 = as_expr(self.u0) if self.u0 is not None else None
        self.boundary = as_expr(self.boundary) if self.boundary is not None else None


@dataclass
class SystemSpec:
    """Full problem description: species, environment, grid, and scheme."""

    species: list
    K: Expr
    T: float
    dt: float
    bc: str = "no_flux"
    scheme: str = "dbdf2"
    domain: tuple = (0.0, 1.0, 0.0, 1.0)
    nx: int = 16
    ny: int = 16
    degree: int = 2

    def __post_init__(self):
        if not self.species:
            raise ModelError("at least one species is required")
        self.K = as_expr(self.K)
        if self.bc not in BOUNDARY_KINDS:
            raise ModelError(f"bc must be one of {BOUNDARY_KINDS}, got {self.bc!r}")
        if self.scheme not in SCHEMES:
            raise ModelError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.degree not in (1, 2):
            raise ModelError(f"degree must be 1 or 2, got {self.degree}")
        if self.T <= 0 or self.dt <= 0:
            raise ModelError("T and dt must be positive")
        steps = self.T / self.dt
        if abs(steps - round(steps)) > 1e-9 * steps:
            raise ModelError(f"T/dt = {steps} is not an integer; adjust dt")
        if self.bc == "dirichlet":
            for i, sp in enumerate(self.species):
                if sp.boundary is None:
                    raise ModelError(f"species {i + 1} needs a boundary expression for Dirichlet data")
        for i, sp in enumerate(self.species):
            if sp.u0 is None:
                raise ModelError(f"species {i + 1} needs an initial density u0")

    @property
    def N(self):
        return len(self.species)

    @property
    def steps(self):
        return int(round(self.T / self.dt))

    def times(self):
        return self.dt * np.arange(self.steps + 1)

    def build_mesh(self):
        x0, x1, y0, y1 = self.domain
        return build_rect_mesh(x0, x1, y0, y1, self.nx, self.ny)

    def replace(self, **kw):
        """Copy with selected fields replaced (species list is shared)."""
        from dataclasses import replace as dc_replace

        return dc_replace(self, **kw)


@dataclass
class StabilityReport:
    """Sampled coefficient bounds and the derived per-species diagnostics.

    The extrema are sample estimates over mesh quadrature points and the
    discrete time levels, not certified bounds.  ``dt_max`` entries of inf
    mean no restriction was derivable (denominator <= 0 or r vanishes).
    """

    r_inf: np.ndarray  # per species sup-norm sample of r_i
    K_min: float  # inf sample of |K|
    alpha: np.ndarray  # d_i - C r_inf (|1-mu_i| + 1/K_min)
    dt_max: np.ndarray
    C_used: float
    dt: float

    def __str__(self):
        lines = [
            f"stability report (C = {self.C_used:.4f}, K_min sample = {self.K_min:.6g})",
        ]
        for i, (r, a, dm) in enumerate(zip(self.r_inf, self.alpha, self.dt_max), start=1):
            bound = "unconditional" if math.isinf(dm) else f"{dm:.6g}"
            flag = ""
            if not math.isinf(dm) and self.dt > dm:
                flag = "  [dt exceeds bound]"
            lines.append(
                f"  species {i}: sup|r| = {r:.6g}  alpha = {a:.6g}  dt_max = {bound}{flag}"
            )
        return "\n".join(lines)


def _sample_grid(spec: SystemSpec, quad_degree=fem.ASSEMBLY_DEGREE):
    """Quadrature points of the mesh, flattened, plus the time levels t^1..t^M."""
    space = fem.FunctionSpace(spec.build_mesh(), spec.degree)
    _, _, _, phys, _ = space.tables(quad_degree)
    pts = phys.reshape(-1, 2)
    times = spec.dt * np.arange(1, spec.steps + 1)
    return pts, times


def _sample_extrema(e: Expr, pts, times, chunk=2_000_000):
    """(min, max) of the expression over the times x points tensor grid."""
    lo, hi = math.inf, -math.inf
    x, y = pts[:, 0], pts[:, 1]
    per = max(1, chunk // max(1, len(pts)))
    for start in range(0, len(times), per):
        tt = times[start:start + per][:, None]
        vals = np.broadcast_to(evaluate(e, tt, x[None, :], y[None, :]),
                               (len(tt), len(pts)))
        lo = min(lo, float(vals.min()))
        hi = max(hi, float(vals.max()))
    return lo, hi


def estimate_bounds(spec: SystemSpec):
    """Sampled sup of each r_i and inf of |K| over quad points and time levels."""
    pts, times = _sample_grid(spec)
    k_lo, _ = _sample_extrema(spec.K, pts, times)
    if k_lo <= 0.0:
        raise ModelError("carrying capacity not positive on sample grid")
    r_inf = np.empty(spec.N)
    for i, sp in enumerate(spec.species):
        lo, hi = _sample_extrema(sp.r, pts, times)
        r_inf[i] = max(abs(lo), abs(hi))
    return r_inf, k_lo


def alpha(spec: SystemSpec, i: int, C: float = DEFAULT_C, bounds=None) -> float:
    """Coercivity surrogate d_i - C sup|r_i| (|1 - mu_i| + 1/K_min)."""
    r_inf, k_min = bounds if bounds is not None else estimate_bounds(spec)
    sp = spec.species[i]
    return sp.d - C * r_inf[i] * (abs(1.0 - sp.mu) + 1.0 / k_min)


def dt_max(spec: SystemSpec, i: int, C: float = DEFAULT_C, bounds=None) -> float:
    """Backward-Euler step bound K_min / (|1-mu_i| sup|r_i| K_min + C sup|r_i|).

    Returns inf when no restriction is derivable.
    """
    r_inf, k_min = bounds if bounds is not None else estimate_bounds(spec)
    sp = spec.species[i]
    denom = abs(1.0 - sp.mu) * r_inf[i] * k_min + C * r_inf[i]
    if denom <= 0.0:
        return math.inf
    return k_min / denom


def stability_report(spec: SystemSpec, C: float = DEFAULT_C) -> StabilityReport:
    bounds = estimate_bounds(spec)
    r_inf, k_min = bounds
    return StabilityReport(
        r_inf=r_inf,
        K_min=k_min,
        alpha=np.array([alpha(spec, i, C, bounds) for i in range(spec.N)]),
        dt_max=np.array([dt_max(spec, i, C, bounds) for i in range(spec.N)]),
        C_used=C,
        dt=spec.dt,
    )

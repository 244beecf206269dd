"""Decoupled time steppers for the competition system.

Both schemes linearize the competition term with previous-level data, so at
every step each species solves its own linear system from shared read-only
level-n information; the N solves are independent and their order cannot
affect the result.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import fem, model
from .expr import evaluate
from .fem import (
    FEField,
    FunctionSpace,
    assemble_load,
    assemble_mass,
    assemble_stiffness,
    interpolate,
)
from .model import SystemSpec
from .sparse import CsrMatrix, SingularMatrixError, lu_solve


@dataclass
class SystemState:
    """Densities of all species at one time level (plus the previous one)."""

    n: int
    t: float
    fields: list
    prev: list = None  # level n-1 fields, kept for the BDF2 stencil


@dataclass
class Trajectory:
    """Per-step record of a run: times, average densities, optional fields."""

    times: np.ndarray  # (M+1,)
    averages: np.ndarray  # (M+1, N)
    report: model.StabilityReport
    spec: SystemSpec
    snapshots: dict = field(default_factory=dict)  # grid time -> fields
    fields: list = None  # all levels, verification mode only

    @property
    def num_species(self):
        return self.averages.shape[1]


class Workspace:
    """Per-run caches: space, time-independent matrices, parsed coefficients."""

    def __init__(self, spec: SystemSpec):
        self.spec = spec
        self.space = FunctionSpace(spec.build_mesh(), spec.degree)
        self.mass = assemble_mass(self.space)
        self.stiffness = [assemble_stiffness(self.space, sp.d) for sp in spec.species]
        self.mass_row_sum = self.mass.matvec(np.ones(self.space.ndof))
        self.area = float(self.mass_row_sum.sum())
        _, _, _, phys, _ = self.space.tables(fem.ASSEMBLY_DEGREE)
        self.quad_x = phys[..., 0]
        self.quad_y = phys[..., 1]
        self.bdofs = np.flatnonzero(self.space.boundary_dof)
        self.dirichlet = spec.bc == "dirichlet"

    def coeff_at_quad(self, e, t):
        vals = evaluate(e, t, self.quad_x, self.quad_y)
        return np.broadcast_to(np.asarray(vals, dtype=float), self.quad_x.shape)

    def reaction_matrix(self, i, t_next, explicit_sum):
        """Mass matrix weighted by -(1-mu_i) r_i + (r_i / K) * explicit_sum."""
        sp = self.spec.species[i]
        r = self.coeff_at_quad(sp.r, t_next)
        k = self.coeff_at_quad(self.spec.K, t_next)
        w = r * (explicit_sum / k - (1.0 - sp.mu))
        _, vals, _, _, scale = self.space.tables(fem.ASSEMBLY_DEGREE)
        local = np.einsum("tq,qa,qb->tab", scale * w, vals, vals)
        return self.space.assemble_from_local(local)

    def solve_species(self, i, lhs: CsrMatrix, rhs, t_next, n_next):
        if self.dirichlet:
            g = self.spec.species[i].boundary
            for r in self.bdofs:
                lo, hi = lhs.indptr[r], lhs.indptr[r + 1]
                lhs.data[lo:hi] = 0.0
                k = lo + np.searchsorted(lhs.indices[lo:hi], r)
                lhs.data[k] = 1.0
            coords = self.space.dof_coords[self.bdofs]
            rhs[self.bdofs] = np.broadcast_to(
                np.asarray(evaluate(g, t_next, coords[:, 0], coords[:, 1]), dtype=float),
                (len(self.bdofs),),
            )
        try:
            x = lu_solve(lhs, rhs)
        except SingularMatrixError as err:
            raise RuntimeError(f"species {i + 1} solve failed at step {n_next}: {err}") from err
        return FEField(self.space, x, time=t_next)


def _sum_at_quad(fields):
    acc = fields[0].at_quad(fem.ASSEMBLY_DEGREE).copy()
    for f in fields[1:]:
        acc += f.at_quad(fem.ASSEMBLY_DEGREE)
    return acc


def dbe_step(state: SystemState, spec: SystemSpec, ws: Workspace = None,
             species_order=None) -> SystemState:
    """One decoupled backward-Euler step.

    For each species the implicit operator is (1/dt) M + d_i A - (1-mu_i)
    M[r_i] + M[(r_i/K) sum_j u_j^n]; the explicit sum uses only level-n
    fields, so the species systems share no new data.
    """
    ws = ws or Workspace(spec)
    dt = spec.dt
    n_next = state.n + 1
    t_next = n_next * dt
    explicit_sum = _sum_at_quad(state.fields)
    order = range(spec.N) if species_order is None else species_order
    new_fields = [None] * spec.N
    for i in order:
        reac = ws.reaction_matrix(i, t_next, explicit_sum)
        lhs = CsrMatrix(
            ws.mass.n, ws.mass.indptr, ws.mass.indices,
            ws.mass.data / dt + ws.stiffness[i].data + reac.data,
        )
        rhs = ws.mass.matvec(state.fields[i].coeffs) / dt
        f = spec.species[i].f
        if f is not None:
            rhs = rhs + assemble_load(ws.space, f, t_next)
        new_fields[i] = ws.solve_species(i, lhs, rhs, t_next, n_next)
    return SystemState(n=n_next, t=t_next, fields=new_fields, prev=state.fields)


def dbdf2_step(state: SystemState, spec: SystemSpec, ws: Workspace = None,
               species_order=None) -> SystemState:
    """One decoupled BDF2 step; needs levels n and n-1 in the state.

    The competition term is linearized with the second-order extrapolation
    2 u_j^n - u_j^{n-1} of the previous levels.
    """
    if state.prev is None:
        raise ValueError("BDF2 step requires the previous level in state.prev")
    ws = ws or Workspace(spec)
    dt = spec.dt
    n_next = state.n + 1
    t_next = n_next * dt
    explicit_sum = 2.0 * _sum_at_quad(state.fields) - _sum_at_quad(state.prev)
    order = range(spec.N) if species_order is None else species_order
    new_fields = [None] * spec.N
    for i in order:
        reac = ws.reaction_matrix(i, t_next, explicit_sum)
        lhs = CsrMatrix(
            ws.mass.n, ws.mass.indptr, ws.mass.indices,
            1.5 * ws.mass.data / dt + ws.stiffness[i].data + reac.data,
        )
        hist = 4.0 * state.fields[i].coeffs - state.prev[i].coeffs
        rhs = ws.mass.matvec(hist) / (2.0 * dt)
        f = spec.species[i].f
        if f is not None:
            rhs = rhs + assemble_load(ws.space, f, t_next)
        new_fields[i] = ws.solve_species(i, lhs, rhs, t_next, n_next)
    return SystemState(n=n_next, t=t_next, fields=new_fields, prev=state.fields)


def initial_state(spec: SystemSpec, ws: Workspace = None) -> SystemState:
    """Nodal interpolant of each species' initial density at t = 0."""
    ws = ws or Workspace(spec)
    fields = [interpolate(ws.space, sp.u0, t=0.0) for sp in spec.species]
    return SystemState(n=0, t=0.0, fields=fields, prev=None)


def average_density(u: FEField, mass: CsrMatrix = None) -> float:
    """Domain mean of the finite element function, (1^T M u) / |Omega|."""
    if mass is None:
        mass = u.space.mass_matrix()
    row_sum = mass.matvec(np.ones(u.space.ndof))
    return _mean_from_row_sum(row_sum, float(row_sum.sum()), u.coeffs)


def _mean_from_row_sum(row_sum, area, coeffs):
    # shifted form: exact for constant fields, identical otherwise
    base = float(coeffs[0])
    return base + float(row_sum @ (coeffs - base)) / area


def csv_header(num_species):
    return "t," + ",".join(f"ubar_{i + 1}" for i in range(num_species))


def format_float(v):
    """Shortest decimal that reparses to the same double (<= 17 digits)."""
    s = repr(float(v))
    return s[:-2] if s.endswith(".0") else s


def csv_row(t, values):
    return ",".join([format_float(t)] + [format_float(v) for v in values])


def _match_snapshot_steps(spec, snapshot_times):
    steps = {}
    for t_req in snapshot_times:
        n = int(round(t_req / spec.dt))
        if n < 0 or n > spec.steps or abs(t_req - n * spec.dt) > spec.dt / 2 + 1e-9 * spec.T:
            raise ValueError(
                f"snapshot time {t_req} is more than dt/2 from any step in [0, {spec.T}]"
            )
        steps[n] = n * spec.dt
    return steps


def run(spec: SystemSpec, *, constant_C=model.DEFAULT_C, keep_fields=False,
        snapshot_times=(), csv_path=None) -> Trajectory:
    """Advance the system from t=0 to t=T and record average densities.

    DBE runs M backward-Euler steps; DBDF2 bootstraps its missing starting
    level with a single DBE step and continues with BDF2.  When ``csv_path``
    is given the time series is streamed row by row, so a failing step still
    leaves the rows computed so far on disk.
    """
    ws = Workspace(spec)
    report = model.stability_report(spec, constant_C)
    for i, dm in enumerate(report.dt_max):
        if np.isfinite(dm) and spec.dt > dm:
            warnings.warn(
                f"dt = {spec.dt} exceeds the stability bound {dm:.6g} for species {i + 1}",
                stacklevel=2,
            )

    snapshot_steps = _match_snapshot_steps(spec, snapshot_times)
    state = initial_state(spec, ws)
    times = np.empty(spec.steps + 1)
    averages = np.empty((spec.steps + 1, spec.N))
    traj = Trajectory(times=times, averages=averages, report=report, spec=spec)
    if keep_fields:
        traj.fields = [list(state.fields)]

    def record(st):
        times[st.n] = st.t
        averages[st.n] = [
            _mean_from_row_sum(ws.mass_row_sum, ws.area, f.coeffs) for f in st.fields
        ]
        if st.n in snapshot_steps:
            traj.snapshots[snapshot_steps[st.n]] = list(st.fields)
        if keep_fields and st.n > 0:
            traj.fields.append(list(st.fields))

    out = open(csv_path, "w", newline="\n") if csv_path else None
    try:
        record(state)
        if out:
            out.write(csv_header(spec.N) + "\n")
            out.write(csv_row(state.t, averages[0]) + "\n")
        for n in range(spec.steps):
            if spec.scheme == "dbe" or n == 0:
                state = dbe_step(state, spec, ws)
            else:
                state = dbdf2_step(state, spec, ws)
            record(state)
            if out:
                out.write(csv_row(state.t, averages[state.n]) + "\n")
    finally:
        if out:
            out.close()
    return traj

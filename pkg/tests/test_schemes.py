import math

import numpy as np
import pytest

from rdcomp.fem import interpolate
from rdcomp.model import SpeciesParams, SystemSpec
from rdcomp.schemes import (
    SystemState,
    Workspace,
    average_density,
    csv_row,
    dbe_step,
    dbdf2_step,
    initial_state,
    run,
)


def constant_spec(r=0.8, K=2.0, mu=0.1, u0=1.2, dt=0.05, T=1.0, scheme="dbe", d=1.0):
    sp = SpeciesParams(d=d, mu=mu, r=str(r), u0=str(u0))
    return SystemSpec(species=[sp], K=str(K), T=T, dt=dt, scheme=scheme, nx=4, ny=4)


def dbe_scalar_sequence(u0, r, K, mu, dt, steps):
    us = [u0]
    for _ in range(steps):
        u = us[-1]
        us.append(u / (1.0 - dt * (1.0 - mu) * r + dt * (r / K) * u))
    return us


def bdf2_scalar_sequence(u0, r, K, mu, dt, steps):
    # first step backward Euler (the bootstrap), then the BDF2 recurrence
    us = dbe_scalar_sequence(u0, r, K, mu, dt, 1)
    for _ in range(steps - 1):
        un, um = us[-1], us[-2]
        denom = 3.0 - 2.0 * dt * (1.0 - mu) * r + 2.0 * dt * (r / K) * (2.0 * un - um)
        us.append((4.0 * un - um) / denom)
    return us


class TestScalarOracle:
    def test_dbe_matches_recurrence(self):
        spec = constant_spec(scheme="dbe")
        traj = run(spec, keep_fields=True)
        want = dbe_scalar_sequence(1.2, 0.8, 2.0, 0.1, spec.dt, spec.steps)
        for level, w in zip(traj.fields, want):
            coeffs = level[0].coeffs
            assert np.abs(coeffs - w).max() <= 1e-9 * abs(w)  # spatially constant too

    def test_dbdf2_matches_recurrence(self):
        spec = constant_spec(scheme="dbdf2")
        traj = run(spec, keep_fields=True)
        want = bdf2_scalar_sequence(1.2, 0.8, 2.0, 0.1, spec.dt, spec.steps)
        for level, w in zip(traj.fields, want):
            assert np.abs(level[0].coeffs - w).max() <= 1e-9 * abs(w)

    def test_dbe_monotone_toward_carrying_capacity(self):
        # mu=0, constant r and K, start below K: iterates increase toward K
        spec = constant_spec(r=1.0, K=2.0, mu=0.0, u0=1.0, dt=0.2, T=4.0)
        traj = run(spec)
        series = traj.averages[:, 0]
        assert (np.diff(series) > 0).all()
        assert (series > 0).all()
        assert series[-1] <= 2.0 + 1e-9
        assert series[-1] == pytest.approx(2.0, abs=0.05)


class TestStepsDirect:
    def test_zero_dirichlet_zero_forcing_stays_zero(self):
        sp = SpeciesParams(d=1.0, mu=0.0, r="1", u0="0", boundary="0")
        spec = SystemSpec(species=[sp], K="2", T=0.5, dt=0.1, bc="dirichlet",
                          scheme="dbe", nx=4, ny=4)
        traj = run(spec, keep_fields=True)
        for level in traj.fields:
            assert np.abs(level[0].coeffs).max() == 0.0

    def test_dbdf2_zero_levels_stay_zero(self):
        sp = SpeciesParams(d=1.0, mu=0.0, r="1", u0="0", boundary="0")
        spec = SystemSpec(species=[sp], K="2", T=0.5, dt=0.1, bc="dirichlet",
                          scheme="dbdf2", nx=4, ny=4)
        ws = Workspace(spec)
        zero = initial_state(spec, ws)
        state = SystemState(n=1, t=spec.dt, fields=zero.fields, prev=zero.fields)
        nxt = dbdf2_step(state, spec, ws)
        assert np.abs(nxt.fields[0].coeffs).max() == 0.0

    def test_dbdf2_requires_history(self):
        spec = constant_spec(scheme="dbdf2")
        ws = Workspace(spec)
        with pytest.raises(ValueError, match="previous level"):
            dbdf2_step(initial_state(spec, ws), spec, ws)

    def test_solver_failure_names_species_and_step(self):
        from rdcomp.sparse import csr_from_triplets

        spec = constant_spec()
        ws = Workspace(spec)
        singular = csr_from_triplets(ws.space.ndof, ([0], [0], [1.0]))
        with pytest.raises(RuntimeError, match="species 1 solve failed at step 7"):
            ws.solve_species(0, singular, np.zeros(ws.space.ndof), 0.7, 7)

    def test_species_permutation_invariance(self):
        species = [
            SpeciesParams(d=1.0, mu=0.001, r="(1.5+sin(x)*sin(y))*(1.2+sin(t))", u0="1.6"),
            SpeciesParams(d=0.5, mu=0.0, r="1.0+0.2*cos(x)", u0="1.2+0.3*x"),
            SpeciesParams(d=0.2, mu=-0.002, r="0.8", u0="1.0+0.5*y"),
        ]
        spec = SystemSpec(species=species, K="(2.1+cos(x)*cos(y))*(1.1+cos(t))",
                          T=0.2, dt=0.1, scheme="dbe", nx=6, ny=6)
        ws = Workspace(spec)
        s0 = initial_state(spec, ws)
        a = dbe_step(s0, spec, ws)
        b = dbe_step(s0, spec, ws, species_order=[2, 0, 1])
        for fa, fb in zip(a.fields, b.fields):
            assert np.abs(fa.coeffs - fb.coeffs).max() <= 1e-12
        # and the BDF2 step reads only old levels as well
        a2 = dbdf2_step(a, spec, ws)
        b2 = dbdf2_step(a, spec, ws, species_order=[1, 2, 0])
        for fa, fb in zip(a2.fields, b2.fields):
            assert np.abs(fa.coeffs - fb.coeffs).max() <= 1e-12

    def test_scheme_agreement_at_first_order(self):
        # one DBE and one DBDF2 step from identical smooth states differ by
        # O(dt); the ratio test shows at least first-order decay (the state
        # must satisfy the no-flux condition or boundary layers dominate)
        g = "(1.1+sin(t))*(2.0+cos(pi*y))*(1.1+0.2*cos(pi*x))"
        diffs = []
        t0 = 0.5
        for dt in (1 / 64, 1 / 128, 1 / 256):
            sp = SpeciesParams(d=0.05, mu=0.0, r="1", u0=g)
            spec = SystemSpec(species=[sp], K="2", T=1.0, dt=dt, nx=8, ny=8)
            ws = Workspace(spec)
            n0 = int(round(t0 / dt))
            now = [interpolate(ws.space, g, t=t0)]
            before = [interpolate(ws.space, g, t=t0 - dt)]
            state = SystemState(n=n0, t=t0, fields=now, prev=before)
            a = dbe_step(state, spec, ws)
            b = dbdf2_step(state, spec, ws)
            diffs.append(np.abs(a.fields[0].coeffs - b.fields[0].coeffs).max())
        order1 = math.log2(diffs[0] / diffs[1])
        order2 = math.log2(diffs[1] / diffs[2])
        assert order1 >= 0.9
        assert order2 >= 0.9


class TestConservation:
    @pytest.mark.parametrize("scheme", ["dbe", "dbdf2"])
    def test_pure_diffusion_no_flux_preserves_mass(self, scheme):
        sp = SpeciesParams(d=0.7, mu=0.0, r="0",
                           u0="1.0+exp(-(x-0.3)^2-(y-0.6)^2)")
        spec = SystemSpec(species=[sp], K="2", T=1.0, dt=0.1, scheme=scheme, nx=8, ny=8)
        traj = run(spec)
        series = traj.averages[:, 0]
        assert np.abs(series - series[0]).max() <= 1e-10 * abs(series[0])


class TestRunDriver:
    def test_single_step_trajectory(self):
        spec = constant_spec(dt=0.5, T=0.5)
        traj = run(spec)
        assert len(traj.times) == 2
        assert traj.times[-1] == 0.5

    def test_record_count(self):
        spec = constant_spec(dt=0.1, T=1.0, scheme="dbdf2")
        traj = run(spec)
        assert traj.averages.shape == (11, 1)
        assert np.allclose(traj.times, np.arange(11) * 0.1)

    def test_report_attached_and_warning_on_large_dt(self):
        spec = constant_spec(r=2.0, K=2.0, mu=0.0, dt=0.5, T=1.0)
        with pytest.warns(UserWarning, match="stability bound"):
            traj = run(spec)
        assert traj.report.dt_max[0] < 0.5

    def test_snapshots_matched_to_steps(self):
        spec = constant_spec(dt=0.1, T=1.0)
        traj = run(spec, snapshot_times=[0.52, 1.0])
        assert set(traj.snapshots) == {0.5, 1.0}
        with pytest.raises(ValueError, match="snapshot"):
            run(spec, snapshot_times=[1.2])

    def test_csv_streaming(self, tmp_path):
        spec = constant_spec(dt=0.25, T=0.5)
        path = tmp_path / "series.csv"
        traj = run(spec, csv_path=str(path))
        lines = path.read_text().splitlines()
        assert lines[0] == "t,ubar_1"
        assert len(lines) == 4
        for line, (t, row) in zip(lines[1:], zip(traj.times, traj.averages)):
            assert line == csv_row(t, row)


class TestAverageDensity:
    def test_constant(self):
        spec = constant_spec()
        ws = Workspace(spec)
        f = interpolate(ws.space, 1.6)
        assert average_density(f) == pytest.approx(1.6, abs=1e-13)

    def test_linear(self):
        spec = constant_spec()
        ws = Workspace(spec)
        f = interpolate(ws.space, "x")
        assert average_density(f) == pytest.approx(0.5, abs=1e-13)

    def test_zero(self):
        spec = constant_spec()
        ws = Workspace(spec)
        f = interpolate(ws.space, 0.0)
        assert average_density(f) == 0.0

import math

import numpy as np
import pytest

from rdcomp.expr import evaluate, parse
from rdcomp.fem import FunctionSpace, interpolate
from rdcomp.model import SpeciesParams, SystemSpec
from rdcomp.schemes import Trajectory, run
from rdcomp.verify import MmsCase, convergence_study, error_21, make_case, mms_forcing

U1 = "(1.1+sin(t))*(2.0+sin(y))"
U2 = "(2.0+cos(t))*(1.1+cos(x))"
K_PERIODIC = "(2.1+cos(x)*cos(y))*(1.1+cos(t))"
R_PERIODIC = "(1.5+sin(x)*sin(y))*(1.2+sin(t))"


def two_species_case(T=1e-4, dt=1.25e-5, nx=4, scheme="dbe"):
    species = [
        SpeciesParams(d=1.0, mu=0.001, r=R_PERIODIC, u0="1"),
        SpeciesParams(d=1.0, mu=0.0006, r=R_PERIODIC, u0="1"),
    ]
    return make_case([U1, U2], species, K_PERIODIC, T=T, dt=dt, nx=nx, scheme=scheme)


def rand_points(n, seed=0, t_range=(0.05, 2.0)):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0.05, 0.95, size=(n, 3))
    pts[:, 0] = rng.uniform(*t_range, size=n)
    return pts


class TestMmsForcing:
    def test_constant_solution_hand_formula(self):
        # u = c with constant r, K: f = -r c (1 - mu - c/K)
        c, r, k, mu = 1.7, 0.8, 2.5, 0.1
        sp = SpeciesParams(d=1.0, mu=mu, r=str(r), u0=str(c))
        f = mms_forcing([parse(str(c))], sp, parse(str(k)), 0)
        want = -r * c * (1 - mu - c / k)
        for t, x, y in rand_points(10, seed=1):
            assert evaluate(f, t, x, y) == pytest.approx(want, rel=1e-14)

    def test_heat_kernel_zero_forcing(self):
        # u solving the pure heat equation (d=1, r=0) needs no forcing
        u = "exp(-2.0*pi^2*t)*sin(pi*x)*sin(pi*y)"
        sp = SpeciesParams(d=1.0, mu=0.0, r="0", u0=u)
        f = mms_forcing([parse(u)], sp, parse("2"), 0)
        for t, x, y in rand_points(30, seed=2, t_range=(0.0, 0.3)):
            assert abs(evaluate(f, t, x, y)) <= 1e-10

    def test_two_species_forcing_at_origin(self):
        case = two_species_case()
        res = case.spec  # forcing was stored on the species
        assert res.species[0].f is not None
        point = np.array([[0.0, 0.0, 0.0]])
        from rdcomp.verify import pde_residual

        assert abs(pde_residual(case, 0, point)[0]) <= 1e-6

    @pytest.mark.parametrize("i", [0, 1])
    def test_residual_small_at_random_points(self, i):
        from rdcomp.verify import pde_residual

        case = two_species_case()
        res = pde_residual(case, i, rand_points(50, seed=5))
        assert np.abs(res).max() <= 1e-8


class TestError21:
    def make_manual_traj(self, spec, levels):
        times = spec.dt * np.arange(len(levels))
        return Trajectory(
            times=times,
            averages=np.zeros((len(levels), spec.N)),
            report=None,
            spec=spec,
            fields=levels,
        )

    def test_exact_fields_give_zero(self):
        # a quadratic exact solution lies in the P2 space, so the nodal
        # interpolant IS the exact function and the error vanishes
        g = "0.5+x*y-y^2"
        sp = SpeciesParams(d=1.0, mu=0.0, r="1", u0=g, boundary=g)
        spec = SystemSpec(species=[sp], K="2", T=0.5, dt=0.25, bc="dirichlet",
                          scheme="dbe", nx=4, ny=4)
        space = FunctionSpace(spec.build_mesh(), spec.degree)
        levels = [[interpolate(space, g, t=0.0)] for _ in range(3)]
        case = MmsCase(spec=spec, exacts=[parse(g)])
        traj = self.make_manual_traj(spec, levels)
        assert error_21(traj, case, 0) <= 1e-11

    def test_single_level_zero_field(self):
        g = "sin(pi*x)*sin(pi*y)"
        sp = SpeciesParams(d=1.0, mu=0.0, r="1", u0="0", boundary="0")
        spec = SystemSpec(species=[sp], K="2", T=1.0, dt=1.0, bc="dirichlet",
                          scheme="dbe", nx=24, ny=24)
        space = FunctionSpace(spec.build_mesh(), spec.degree)
        zero = interpolate(space, "0")
        traj = self.make_manual_traj(spec, [[zero], [zero]])
        case = MmsCase(spec=spec, exacts=[parse(g)])
        want = math.sqrt(0.25 + math.pi**2 / 2)
        assert error_21(traj, case, 0) == pytest.approx(want, abs=1e-7)

    def test_dt_weighting_is_time_integral(self):
        # constant per-level error e over [0, T] gives e * sqrt(T) whatever M
        g = "sin(pi*x)*sin(pi*y)"
        results = []
        for m in (2, 4):
            sp = SpeciesParams(d=1.0, mu=0.0, r="1", u0="0", boundary="0")
            spec = SystemSpec(species=[sp], K="2", T=1.0, dt=1.0 / m, bc="dirichlet",
                              scheme="dbe", nx=8, ny=8)
            space = FunctionSpace(spec.build_mesh(), spec.degree)
            zero = interpolate(space, "0")
            traj = self.make_manual_traj(spec, [[zero]] * (m + 1))
            results.append(error_21(traj, MmsCase(spec=spec, exacts=[parse(g)]), 0))
        assert results[0] == pytest.approx(results[1], rel=1e-12)

    def test_requires_retained_fields(self):
        case = two_species_case(nx=4)
        traj = run(case.spec)
        with pytest.raises(ValueError, match="fields"):
            error_21(traj, case, 0)


class TestConvergenceStudy:
    def test_single_level_table(self):
        case = two_species_case(nx=4)
        table = convergence_study(case, "spatial", [4])
        assert table.errors.shape == (1, 2)
        assert np.isnan(table.rates).all()

    def test_coarse_spatial_rate_near_two(self):
        case = two_species_case()
        table = convergence_study(case, "spatial", [4, 8])
        assert table.params[0] == 0.25
        for i in range(2):
            assert 1.7 <= table.rates[1, i] <= 2.3

    def test_csv_round_trip(self, tmp_path):
        case = two_species_case()
        table = convergence_study(case, "spatial", [4, 8])
        path = tmp_path / "rates.csv"
        table.to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "h,err_1,rate_1,err_2,rate_2"
        assert len(lines) == 3
        first = lines[1].split(",")
        assert first[0] == "0.25"
        assert first[2] == ""  # empty rate on the first row
        assert float(first[1]) == pytest.approx(table.errors[0, 0], rel=1e-5)

    def test_bad_axis(self):
        case = two_species_case(nx=4)
        with pytest.raises(ValueError):
            convergence_study(case, "both", [4])

    def test_text_rendering(self):
        case = two_species_case()
        table = convergence_study(case, "spatial", [4, 8])
        text = str(table)
        assert "err_1" in text and "rate_1" in text
        assert f"{table.rates[1, 0]:.2f}" in text


class TestSteadyState:
    def steady_case(self, T=5.0, dt=0.5, nx=8, scheme="dbdf2"):
        sp = SpeciesParams(d=1.0, mu=0.1, r="1.0+0.5*x", u0="2.0+sin(y)")
        return make_case(["2.0+sin(y)"], [sp], "2.5", T=T, dt=dt, nx=nx,
                         scheme=scheme)

    def test_consecutive_states_reach_fixed_point(self):
        case = self.steady_case()
        traj = run(case.spec, keep_fields=True)
        last = traj.fields[-1][0].coeffs
        prev = traj.fields[-2][0].coeffs
        assert np.abs(last - prev).max() <= 1e-10

    def test_time_refinement_leaves_error_unchanged(self):
        # steady exact solution: the error is all spatial
        errs = []
        for m in (4, 8):
            case = self.steady_case(T=1.0, dt=1.0 / m)
            traj = run(case.spec, keep_fields=True)
            errs.append(error_21(traj, case, 0))
        assert abs(errs[0] - errs[1]) <= 0.01 * errs[0]


def test_one_step_sequence_error_first_order():
    # fixed end time, M vs 2M backward-Euler steps: global error halves
    errs = []
    for m in (4, 8):
        case = two_species_case(T=0.25, dt=0.25 / m, nx=16)
        traj = run(case.spec, keep_fields=True)
        errs.append(error_21(traj, case, 0))
    ratio = errs[0] / errs[1]
    assert 1.7 <= ratio <= 2.3

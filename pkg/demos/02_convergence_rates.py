"""Manufactured-solution convergence rates for the two time steppers.

Runs the two-species verification problem on a short ladder of meshes and
time steps.  With P2 elements the spatial error drops by 4 per mesh
halving for both schemes; in time the backward-Euler variant is first
order and the BDF2 variant second order.  (The bundled presets run the
same studies at the full depth via `rdcomp converge`.)
"""

from rdcomp.model import SpeciesParams
from rdcomp.verify import convergence_study, make_case

GROWTH = "(1.5+sin(x)*sin(y))*(1.2+sin(t))"
CAPACITY = "(2.1+cos(x)*cos(y))*(1.1+cos(t))"
EXACT = ["(1.1+sin(t))*(2.0+sin(y))", "(2.0+cos(t))*(1.1+cos(x))"]

species = [
    SpeciesParams(d=1.0, mu=0.001, r=GROWTH, u0="1"),
    SpeciesParams(d=1.0, mu=0.0006, r=GROWTH, u0="1"),
]

print("spatial refinement (fixed T = 1e-4, dt = T/8)")
for scheme in ("dbe", "dbdf2"):
    case = make_case(EXACT, species, CAPACITY, T=1e-4, dt=1e-4 / 8, nx=4, scheme=scheme)
    table = convergence_study(case, "spatial", [4, 8, 16, 32])
    print(f"\n  scheme = {scheme}")
    print(table)

print("\ntemporal refinement (fixed mesh 32x32, T = 1)")
for scheme in ("dbe", "dbdf2"):
    case = make_case(EXACT, species, CAPACITY, T=1.0, dt=0.25, nx=32, scheme=scheme)
    table = convergence_study(case, "temporal", [4, 8, 16, 32])
    print(f"\n  scheme = {scheme}")
    print(table)

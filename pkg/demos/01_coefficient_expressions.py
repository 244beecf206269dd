"""Tour of the coefficient expression language.

Every coefficient in a configuration (growth rates, carrying capacity,
exact solutions) is a formula in t, x, y.  This demo parses a few, checks
a symbolic derivative against finite differences, and assembles the
forcing that makes a chosen function an exact solution of the
single-species logistic equation.
"""

import numpy as np

from rdcomp import expr
from rdcomp.model import SpeciesParams
from rdcomp.verify import mms_forcing

growth = expr.parse("(1.5+sin(x)*sin(y))*(1.2+sin(t))")
capacity = expr.parse("(2.1+cos(x)*cos(y))*(1.1+cos(t))")

print("growth rate   :", expr.to_source(growth))
print("capacity      :", expr.to_source(capacity))
print("r(0, 0.5, 0.5):", expr.evaluate(growth, 0.0, 0.5, 0.5))
print("K(0, 0, 0)    :", expr.evaluate(capacity, 0.0, 0.0, 0.0), "(= 3.1 * 2.1)")

# exact symbolic derivative vs a central difference
dr_dx = expr.differentiate(growth, "x")
t, x, y = 0.3, 0.4, 0.7
h = 1e-6
fd = (expr.evaluate(growth, t, x + h, y) - expr.evaluate(growth, t, x - h, y)) / (2 * h)
print("\nd r / d x at (0.3, 0.4, 0.7)")
print("  symbolic        :", expr.evaluate(dr_dx, t, x, y))
print("  central diff    :", fd)

# manufactured forcing: pick u, get the f that makes it an exact solution of
#   du/dt = d lap(u) + r u (1 - mu - u / K) + f
u_exact = expr.parse("(1.1+sin(t))*(2.0+sin(y))")
species = SpeciesParams(d=1.0, mu=0.001, r=growth, u0=u_exact)
forcing = mms_forcing([u_exact], species, capacity, 0)
print("\nmanufactured forcing at a few points:")
for t, x, y in [(0.0, 0.2, 0.8), (0.5, 0.5, 0.5), (1.0, 0.9, 0.1)]:
    print(f"  f({t}, {x}, {y}) = {expr.evaluate(forcing, t, x, y):+.6f}")

# arrays broadcast through evaluation, which is what the assembly loops use
xs = np.linspace(0, 1, 5)
print("\nvectorized K(0, xs, 0.5):", expr.evaluate(capacity, 0.0, xs, 0.5))

"""Three competitors under a seasonally varying carrying capacity.

The environment peaks at the domain center and oscillates with period
2 pi; the three species are identical except for their harvesting
coefficients.  The average densities settle into a periodic cycle ordered
by harvesting pressure: the most harvested species stays lowest and keeps
declining.  Writes a CSV time series and a VTK snapshot of the final
fields for external plotting.
"""

import math
import os

import numpy as np

from rdcomp.cli import write_timeseries_csv, write_vtk_snapshot
from rdcomp.model import SpeciesParams, SystemSpec
from rdcomp.schemes import run

CAPACITY = "(1.2+2.5*pi^2*exp(-(x-0.5)^2-(y-0.5)^2))*(1.0+0.3*cos(t))"
HARVEST = [0.0009, 0.0015, 0.0027]
T = 40.0

species = [SpeciesParams(d=1.0, mu=mu, r="1", u0="1.6") for mu in HARVEST]
spec = SystemSpec(species=species, K=CAPACITY, T=T, dt=0.1, scheme="dbdf2",
                  bc="no_flux", nx=16, ny=16, degree=2)

traj = run(spec, snapshot_times=[T])
print(traj.report)

out_dir = os.path.join(os.path.dirname(__file__), "output")
os.makedirs(out_dir, exist_ok=True)
csv_path = os.path.join(out_dir, "seasonal_timeseries.csv")
write_timeseries_csv(traj, csv_path)
fields = traj.snapshots[T]
vtk_path = os.path.join(out_dir, "seasonal_final.vtk")
write_vtk_snapshot(fields, fields[0].space.mesh, vtk_path, title=f"t = {T}")
print(f"\nwrote {csv_path}\nwrote {vtk_path}")

print("\naverage densities (one row per 2 pi season):")
period = 2 * math.pi
print(f"  {'t':>8} {'ubar_1':>9} {'ubar_2':>9} {'ubar_3':>9}")
for k in range(1, int(T / period) + 1):
    i = np.argmin(np.abs(traj.times - k * period))
    u = traj.averages[i]
    print(f"  {traj.times[i]:8.1f} {u[0]:9.4f} {u[1]:9.4f} {u[2]:9.4f}")

final = traj.averages[-1]
print(f"\nat t = {T}: ubar_1 > ubar_2 > ubar_3 is {final[0] > final[1] > final[2]}"
      f"  (least harvested species stays on top)")

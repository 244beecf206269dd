"""Steering a diffusion-driven competition with harvesting and stocking.

With unequal diffusion speeds and no intervention, the slowest diffuser
crowds out the others.  Harvesting the dominant species or stocking the
losing one shifts the balance; this demo compares three scenarios at
matched times against the hands-off baseline.
"""

from rdcomp.model import SpeciesParams, SystemSpec, stability_report
from rdcomp.schemes import run

CAPACITY = "(1.2+2.5*pi^2*exp(-(x-0.5)^2-(y-0.5)^2))*(1.0+0.3*cos(t))"
GROWTH = "(1.5+sin(x)*sin(y))*(1.2+sin(t))"
DIFFUSION = [0.1, 0.02, 0.01]  # species 1 spreads fastest, species 3 slowest
T = 60.0


def scenario(mu):
    species = [SpeciesParams(d=d, mu=m, r=GROWTH, u0="1.6")
               for d, m in zip(DIFFUSION, mu)]
    return SystemSpec(species=species, K=CAPACITY, T=T, dt=0.1, scheme="dbdf2",
                      bc="no_flux", nx=16, ny=16, degree=2)


baseline_spec = scenario([0.0, 0.0, 0.0])
print("stability diagnostics of the baseline scenario:")
print(stability_report(baseline_spec))

runs = {
    "baseline (no intervention)": run(baseline_spec),
    "harvest slow winner (mu3 = 0.001)": run(scenario([0.0, 0.0, 0.001])),
    "stock fast loser (mu1 = -0.002)": run(scenario([-0.002, 0.0, 0.0])),
}

print(f"\naverage densities at t = {T}:")
print(f"  {'scenario':<36} {'ubar_1':>8} {'ubar_2':>8} {'ubar_3':>8}")
for label, traj in runs.items():
    u = traj.averages[-1]
    print(f"  {label:<36} {u[0]:8.4f} {u[1]:8.4f} {u[2]:8.4f}")

base = runs["baseline (no intervention)"].averages[-1]
print("\nshift against the baseline:")
for label, traj in runs.items():
    if label.startswith("baseline"):
        continue
    delta = traj.averages[-1] - base
    arrows = ", ".join(f"u{i + 1} {d:+.4f}" for i, d in enumerate(delta))
    print(f"  {label:<36} {arrows}")

print("\nharvesting the winner frees resources for the others; stocking the")
print("fast diffuser props it up at the expense of the slow winner.")

"""Tour of the benchmark definitions and the experiment schedule.

Prints the run matrix each benchmark defines (refinement, mesh transfer,
initial-condition extrapolation, step-size sensitivity) and solves one
shallow-water and one compressible-flow case to show the system support.
"""

from collections import Counter

import numpy as np

from hyperweno import ClassicalScheme, conservation_remainder, make_grid, plan_steps, rollout
from hyperweno.benchmarks import (
    BENCHMARKS,
    benchmark_spec,
    default_dt_ratio,
    experiment_matrix,
    fixed_test_instance,
    instantiate_ic,
    nominal_euler_instance,
)

print("=== experiment schedule ===")
for benchmark in BENCHMARKS:
    runs = experiment_matrix(benchmark)
    tags = Counter(run.tag for run in runs)
    summary = ", ".join(f"{tag} x{count}" for tag, count in sorted(tags.items()))
    print(f"  {benchmark:9s} {len(runs):3d} runs: {summary}")

print()
print("=== shallow-water dam-break-like fixed test (N = 128, T = 1) ===")
spec = benchmark_spec("shallow")
grid = make_grid(spec.x_lo, spec.x_hi, 128)
state0 = instantiate_ic(fixed_test_instance("shallow"), grid)
n_steps, dt = plan_steps(1.0, default_dt_ratio("shallow") * grid.dx)
record = rollout(grid, spec.bc, ClassicalScheme(spec.system), state0, n_steps, dt)
h = record.snapshots[-1][:, 0]
print(f"  depth range {h.min():.4f} .. {h.max():.4f}")
print(f"  max C(h) = {conservation_remainder(record, 0).max():.2e}, "
      f"max C(hv) = {conservation_remainder(record, 1).max():.2e}")

print()
print("=== compressible shock/sine interaction (N = 256, T = 1.6) ===")
spec = benchmark_spec("euler")
grid = make_grid(spec.x_lo, spec.x_hi, 256)
state0 = instantiate_ic(nominal_euler_instance(), grid)
n_steps, dt = plan_steps(1.6, default_dt_ratio("euler") * grid.dx)
record = rollout(grid, spec.bc, ClassicalScheme(spec.system), state0, n_steps, dt)
rho = record.snapshots[-1][:, 0]
momentum = record.snapshots[-1][:, 1]
energy = record.snapshots[-1][:, 2]
pressure = 0.4 * (energy - 0.5 * momentum**2 / rho)
print(f"  {n_steps} steps; density range {rho.min():.3f} .. {rho.max():.3f}, "
      f"min pressure {pressure.min():.3f}")
shock = int(np.argmax(-np.diff(rho)))
print(f"  main shock near x = {grid.x_mid[shock]:.2f} with oscillatory region behind it")

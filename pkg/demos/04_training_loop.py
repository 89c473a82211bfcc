"""A small end-to-end training run.

Generates reference trajectories with the classical solver, trains the
weight predictor on windowed multi-step rollouts, and compares the learned
scheme against its linear-weight starting point on the fixed test problem.
Settings here are trimmed for a quick demonstration; the acceptance suite
runs the full desk-scale configuration.
"""

import numpy as np

from hyperweno import make_scheme, plan_steps, rollout
from hyperweno.autodiff import value_of
from hyperweno.benchmarks import benchmark_spec, default_dt_ratio, fixed_test_instance, instantiate_ic
from hyperweno.grid import coarsen_cell_averages, make_grid
from hyperweno.schemes import ClassicalScheme
from hyperweno.training import TrainConfig, generate_dataset, train

print("generating 8 reference trajectories on meshes {32, 64} ...")
dataset = generate_dataset("burgers1", n_traj=8, mesh_levels=(32, 64), seed=0)

config = TrainConfig(
    benchmark="burgers1",
    mesh_levels=(32, 64),
    n_traj=8,
    window_length=20,
    unroll=4,
    epochs=25,
    batch_size=8,
    lr=1e-3,
    seed=0,
)
print("training the weight predictor for 25 epochs ...")
result = train(config, dataset)
for epoch, loss, wall in result.history[::5] + result.history[-1:]:
    print(f"  epoch {epoch:3d}   batch loss {loss:.3e}   {wall:5.1f}s")

spec = benchmark_spec("burgers1")
instance = fixed_test_instance("burgers1")
trained_params = {k: value_of(v) for k, v in result.scheme.hyper_params.items()}

print()
print("=== fixed test instance at T = 1.5, error vs fine reference ===")
grid_ref = make_grid(spec.x_lo, spec.x_hi, 512)
n_steps, dt = plan_steps(1.5, default_dt_ratio("burgers1") * grid_ref.dx)
reference = rollout(
    grid_ref, spec.bc, ClassicalScheme(spec.system), instantiate_ic(instance, grid_ref), n_steps, dt
).snapshots[-1]

for n in (32, 64, 128):
    grid = make_grid(spec.x_lo, spec.x_hi, n)
    state0 = instantiate_ic(instance, grid)
    n_steps, dt = plan_steps(1.5, default_dt_ratio("burgers1") * grid.dx)
    target = coarsen_cell_averages(reference, 512 // n)
    row = [f"N={n:4d}"]
    for kind in ("linear", "hcfcnn"):
        scheme = (
            make_scheme(kind, spec.system)
            if kind == "linear"
            else make_scheme(kind, spec.system, hyper_params=trained_params)
        )
        record = rollout(grid, spec.bc, scheme, state0, n_steps, dt)
        mse = np.mean((record.snapshots[-1] - target) ** 2)
        row.append(f"{kind}: {mse:.3e}")
    print("  " + "   ".join(row))
print("(mesh 128 was never seen during training)")

"""Classical WENO5 on the single-shock Burgers problem.

Solves u_t + (u^2/2)_x = 0 with smooth data that steepens into a shock,
then shows the two headline properties of the discretization: high-order
convergence while the solution is smooth, and conservation of the total
mass to rounding across the shock.
"""

import numpy as np

from hyperweno import (
    ClassicalScheme,
    State,
    burgers,
    conservation_remainder,
    make_grid,
    plan_steps,
    rollout,
)
from hyperweno.benchmarks import default_dt_ratio, fixed_test_instance, instantiate_ic
from hyperweno.grid import BoundaryCondition

BC = BoundaryCondition.PERIODIC


def exact_smooth_solution(grid, t):
    """Characteristics of u = sin(x - u t), solved by Newton (pre-shock)."""
    nodes, weights = np.polynomial.legendre.leggauss(4)
    xq = grid.x_mid[:, None] + 0.5 * grid.dx * nodes[None, :]
    u = np.sin(xq)
    for _ in range(50):
        phase = xq - u * t
        u -= (u - np.sin(phase)) / (1.0 + t * np.cos(phase))
    return (u @ weights * 0.5)[:, None]


print("=== convergence while the solution is smooth (T = 0.5) ===")
previous = None
for n in (32, 64, 128, 256):
    grid = make_grid(0.0, 2 * np.pi, n)
    u0 = exact_smooth_solution(grid, 0.0)
    # shrink dt superlinearly so the RK3 error cannot hide the spatial order
    ratio = 0.4 * (32.0 / n) ** (2.0 / 3.0)
    n_steps, dt = plan_steps(0.5, ratio * grid.dx)
    record = rollout(grid, BC, ClassicalScheme(burgers()), State(u0), n_steps, dt)
    error = np.sqrt(grid.dx * np.sum((record.snapshots[-1] - exact_smooth_solution(grid, 0.5)) ** 2))
    rate = "" if previous is None else f"  order {np.log2(previous / error):5.2f}"
    print(f"  N={n:4d}   L2 error {error:.3e}{rate}")
    previous = error

print()
print("=== conservation across the shock (T = 3) ===")
instance = fixed_test_instance("burgers1")
for n in (64, 256):
    grid = make_grid(0.0, 2 * np.pi, n)
    state0 = instantiate_ic(instance, grid)
    n_steps, dt = plan_steps(3.0, default_dt_ratio("burgers1") * grid.dx)
    record = rollout(grid, BC, ClassicalScheme(burgers()), state0, n_steps, dt)
    mass = record.snapshots[:, :, 0].sum(axis=1) * grid.dx
    remainder = conservation_remainder(record).max()
    print(
        f"  N={n:4d}   {n_steps} steps, mass {mass[0]:+.6f} -> {mass[-1]:+.6f}, "
        f"max remainder {remainder:.2e}"
    )

"""Differentiating through the unrolled solver.

The training objective composes the full discretization -- padding, WENO
candidates, softmax weights, Rusanov flux, three RK stages -- K times and
compares against reference snapshots.  The tape differentiates the whole
composition; here the reverse-mode gradient of a 2-step loss is checked
against central finite differences on a handful of randomly chosen
hypernetwork weights.
"""

import numpy as np

from hyperweno import ClassicalScheme, autodiff as ad
from hyperweno.autodiff import Tensor, value_of
from hyperweno.benchmarks import benchmark_spec, default_dt_ratio, fixed_test_instance, instantiate_ic
from hyperweno.grid import make_grid
from hyperweno.networks import HyperNetConfig, init_hypernet
from hyperweno.schemes import HyperWeightScheme
from hyperweno.stepper import plan_steps, rollout
from hyperweno.training import unrolled_loss

spec = benchmark_spec("burgers1")
grid = make_grid(spec.x_lo, spec.x_hi, 16)
state0 = instantiate_ic(fixed_test_instance("burgers1"), grid)
n_steps, dt = plan_steps(0.8, default_dt_ratio("burgers1") * grid.dx)
window = rollout(grid, spec.bc, ClassicalScheme(spec.system), state0, n_steps, dt).snapshots[-3:]

cfg = HyperNetConfig(n_components=1)
rng = np.random.default_rng(1)
params = {k: v + 0.05 * rng.standard_normal(v.shape) for k, v in init_hypernet(cfg, 0).items()}

leaves = {k: Tensor(v.copy(), requires_grad=True) for k, v in params.items()}
loss = unrolled_loss(HyperWeightScheme(spec.system, cfg, leaves), grid, spec.bc, window, dt, 2)
ad.backward(loss)
print(f"2-step loss on N=16: {float(value_of(loss)):.6e}")
print(f"gradient norm: {ad.global_norm(l.grad for l in leaves.values()):.4e}")
print()
print(f"{'parameter':24s} {'reverse-mode':>14s} {'central FD':>14s} {'rel err':>10s}")


def loss_value():
    scheme = HyperWeightScheme(spec.system, cfg, params)
    return float(value_of(unrolled_loss(scheme, grid, spec.bc, window, dt, 2)))


check = np.random.default_rng(7)
for name in ("hyper/conv0/w", "hyper/conv2/w", "hyper/conv5/w", "hyper/conv5/b"):
    flat = params[name].reshape(-1)
    grad = leaves[name].grad.reshape(-1)
    i = int(check.integers(flat.size))
    h = 1e-6
    keep = flat[i]
    flat[i] = keep + h
    fp = loss_value()
    flat[i] = keep - h
    fm = loss_value()
    flat[i] = keep
    g_fd = (fp - fm) / (2 * h)
    rel = abs(grad[i] - g_fd) / max(abs(g_fd), abs(grad[i]), 1e-300)
    print(f"{name + f'[{i}]':24s} {grad[i]:14.6e} {g_fd:14.6e} {rel:10.2e}")

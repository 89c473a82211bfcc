"""SSP-RK3 time integration, rollout driver, and quantitative diagnostics.

The three-stage update is applied in its slope-combination form

    u^{n+1} = u^n + dt * (k0 + k1 + 4 k2) / 6

which is algebraically identical to the staged convex-combination form and
has two useful floating-point properties: cells whose stage slopes are all
exactly zero do not move at all, and the per-step update telescopes against
the stage-weighted effective interface flux

    f_eff = (f(u^n) + f(u^(1)) + 4 f(u^(2))) / 6

to rounding.  The effective boundary fluxes are what the rollout logs, so
the discrete conservation remainder measures pure scheme drift rather than
a flux-sampling quadrature error.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .autodiff import value_of
from .grid import BoundaryCondition, Grid, State

__all__ = [
    "StepDiverged",
    "ssp_rk3_step",
    "RolloutRecord",
    "rollout",
    "plan_steps",
    "conservation_remainder",
    "refinement_orders",
    "mse_and_order",
    "Diagnostics",
    "DIVERGENCE_LIMIT",
]

DIVERGENCE_LIMIT = 1e8


class StepDiverged(Exception):
    """Raised when a state entry exceeds the divergence guard or goes non-finite."""


def ssp_rk3_step(u, dt: float, rhs_operator):
    """One strong-stability-preserving RK3 step.

    ``rhs_operator(u) -> (dudt, fluxes_or_None)``.  Returns
    ``(u_next, effective_fluxes)`` where the effective fluxes are the
    (1/6, 1/6, 2/3) stage combination, or None when the operator does not
    report fluxes (plain ODE right-hand sides).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    k0, f0 = rhs_operator(u)
    u1 = u + k0 * dt
    k1, f1 = rhs_operator(u1)
    u2 = u * 0.75 + u1 * 0.25 + k1 * (0.25 * dt)
    k2, f2 = rhs_operator(u2)
    u_next = u + (k0 + k1 + k2 * 4.0) * (dt / 6.0)

    v = value_of(u_next)
    if not np.all(np.isfinite(v)) or np.any(np.abs(v) > DIVERGENCE_LIMIT):
        raise StepDiverged(f"state magnitude exceeded {DIVERGENCE_LIMIT:.0e}")

    f_eff = None
    if f0 is not None and f1 is not None and f2 is not None:
        f_eff = (f0 + f1 + f2 * 4.0) * (1.0 / 6.0)
    return u_next, f_eff


@dataclass
class RolloutRecord:
    """Snapshots at t_m = m*dt plus the per-step effective boundary fluxes."""

    snapshots: np.ndarray  # (n_snapshots, N, C)
    times: np.ndarray  # (n_snapshots,)
    dt: float
    dx: float
    boundary_flux_log: np.ndarray  # (n_steps, 2, C); columns: left, right
    diverged: bool = False
    wall_seconds: float = 0.0

    @property
    def n_steps(self) -> int:
        return len(self.times) - 1

    def final_state(self) -> State:
        return State(self.snapshots[-1].copy(), t=float(self.times[-1]))


def rollout(
    grid: Grid,
    bc: BoundaryCondition,
    scheme,
    state0: State,
    n_steps: int,
    dt: float,
) -> RolloutRecord:
    """Advance ``n_steps`` fixed steps, recording every snapshot.

    ``scheme.prepare(grid, bc, u0)`` is called exactly once, before the
    first step; learned schemes generate their per-cell target parameters
    there and reuse them across all stages.  A diverged step aborts with a
    partial record flagged ``diverged``.
    """
    u0 = np.asarray(state0.u, dtype=np.float64)
    n, c = u0.shape
    snaps = np.empty((n_steps + 1, n, c))
    snaps[0] = u0
    flux_log = np.zeros((n_steps, 2, c))
    rhs = scheme.prepare(grid, bc, u0)
    u = u0
    start = time.perf_counter()
    done = 0
    diverged = False
    for m in range(n_steps):
        try:
            u, f_eff = ssp_rk3_step(u, dt, rhs)
        except StepDiverged:
            diverged = True
            break
        snaps[m + 1] = u
        if f_eff is not None:
            flux_log[m, 0] = f_eff[0]
            flux_log[m, 1] = f_eff[-1]
        done = m + 1
    wall = time.perf_counter() - start
    times = state0.t + dt * np.arange(done + 1)
    return RolloutRecord(
        snapshots=snaps[: done + 1],
        times=times,
        dt=dt,
        dx=grid.dx,
        boundary_flux_log=flux_log[:done],
        diverged=diverged,
        wall_seconds=wall,
    )


def plan_steps(t_final: float, dt_max: float) -> tuple[int, float]:
    """Uniform step count and size landing exactly on ``t_final``.

    The step is shrunk (never stretched) from ``dt_max`` so that
    ``n * dt == t_final``; comparisons across mesh levels then happen at
    identical times.
    """
    if t_final <= 0 or dt_max <= 0:
        raise ValueError("t_final and dt_max must be positive")
    n = max(1, math.ceil(t_final / dt_max - 1e-12))
    return n, t_final / n


def conservation_remainder(record: RolloutRecord, component: int = 0) -> np.ndarray:
    """Discrepancy between total-mass change and accumulated boundary fluxes.

    Uses the logged effective boundary fluxes, so for any scheme that
    assigns one shared flux per interface the series stays at rounding
    level; for periodic runs the boundary fluxes coincide and the boundary
    term is identically zero.
    """
    q = record.snapshots[:, :, component]
    mass = q.sum(axis=1) * record.dx
    flux = record.boundary_flux_log[:, :, component]
    through = np.concatenate([[0.0], np.cumsum(flux[:, 0] - flux[:, 1]) * record.dt])
    return np.abs((mass - mass[0]) - through)


def refinement_orders(mses) -> np.ndarray:
    """Empirical rates between consecutive mesh levels.

    Tabulated rates in the literature for mean-squared errors follow the
    root-mean-square convention, p = log2(E_h / E_{h/2}) with E the RMS
    error, i.e. half the base-2 log of the MSE ratio; that is what is
    computed here.
    """
    m = np.asarray(list(mses), dtype=np.float64)
    if np.any(m <= 0):
        raise ValueError("MSE values must be positive to define a rate")
    return 0.5 * np.log2(m[:-1] / m[1:])


@dataclass
class Diagnostics:
    mse: np.ndarray
    orders: np.ndarray


def mse_and_order(predictions, references) -> Diagnostics:
    """Per-level mean-squared errors and the rates between levels."""
    if len(predictions) != len(references):
        raise ValueError("need one reference per prediction")
    mses = []
    for pred, ref in zip(predictions, references):
        pred, ref = np.asarray(pred), np.asarray(ref)
        if pred.shape != ref.shape:
            raise ValueError(f"shape mismatch {pred.shape} vs {ref.shape}")
        mses.append(float(np.mean(np.square(pred - ref))))
    mse = np.array(mses)
    if len(mse) > 1 and np.all(mse > 0):
        orders = refinement_orders(mse)
    else:
        # exact matches leave the rate undefined
        orders = np.full(max(len(mse) - 1, 0), np.nan)
    return Diagnostics(mse=mse, orders=orders)

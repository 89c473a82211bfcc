"""Analytical fluxes, wave-speed bounds, the Rusanov numerical flux, and the
conservative semi-discrete right-hand side.

Three systems are supported: inviscid Burgers (1 component), the flat-bottom
shallow-water system on (h, hv) with gravity g, and the compressible Euler
equations on (rho, rho*u, E) with an ideal-gas pressure closure.  Wave-speed
bounds use the closed-form spectral radius of each flux Jacobian.

Flux and speed evaluation are generic over ndarrays and autodiff Tensors so
the same code serves data generation and training.  States with h <= 0,
rho <= 0, or p <= 0 raise :class:`NonPhysicalState` rather than being
clamped; silent clamping would corrupt the conservation accounting.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import weno
from .autodiff import value_of
from .grid import BoundaryCondition, Grid, pad_ghost_array

__all__ = [
    "SystemSpec",
    "burgers",
    "shallow_water",
    "euler",
    "NonPhysicalState",
    "analytical_flux",
    "max_wave_speed",
    "max_signal_speed",
    "rusanov_flux",
    "rusanov_flux_provider",
    "semi_discrete_rhs",
]


class NonPhysicalState(Exception):
    """Raised when a state leaves the physical region (h, rho, or p <= 0)."""


@dataclass(frozen=True)
class SystemSpec:
    kind: str
    g: float = 0.0
    gamma: float = 0.0

    @property
    def n_components(self) -> int:
        return {"burgers": 1, "shallow_water": 2, "euler": 3}[self.kind]


def burgers() -> SystemSpec:
    return SystemSpec("burgers")


def shallow_water(g: float = 1.0) -> SystemSpec:
    if g <= 0:
        raise ValueError("gravitational constant must be positive")
    return SystemSpec("shallow_water", g=g)


def euler(gamma: float = 1.4) -> SystemSpec:
    if gamma <= 1:
        raise ValueError("ratio of specific heats must exceed one")
    return SystemSpec("euler", gamma=gamma)


def _check_positive(name: str, q) -> None:
    v = value_of(q)
    if not np.all(np.isfinite(v)):
        raise NonPhysicalState(f"non-finite {name}")
    if np.any(v <= 0.0):
        raise NonPhysicalState(f"{name} must stay positive (min {v.min():.3e})")


def analytical_flux(sys: SystemSpec, u):
    """Physical flux of a state array (..., n_components)."""
    if sys.kind == "burgers":
        return u * u * 0.5
    if sys.kind == "shallow_water":
        h, hv = u[:, 0:1], u[:, 1:2]
        _check_positive("water depth", h)
        v = hv / h
        return ad.concat([hv, hv * v + (0.5 * sys.g) * (h * h)], axis=1)
    rho, mom, E = u[:, 0:1], u[:, 1:2], u[:, 2:3]
    _check_positive("density", rho)
    v = mom / rho
    p = (sys.gamma - 1.0) * (E - mom * v * 0.5)
    _check_positive("pressure", p)
    return ad.concat([mom, mom * v + p, v * (E + p)], axis=1)


def _signal_speed(sys: SystemSpec, u):
    """Spectral radius of the flux Jacobian at each state, shape (..., 1)."""
    if sys.kind == "burgers":
        return ad.absolute(u)
    if sys.kind == "shallow_water":
        h, hv = u[:, 0:1], u[:, 1:2]
        _check_positive("water depth", h)
        return ad.absolute(hv / h) + ad.sqrt(h * sys.g)
    rho, mom, E = u[:, 0:1], u[:, 1:2], u[:, 2:3]
    _check_positive("density", rho)
    v = mom / rho
    p = (sys.gamma - 1.0) * (E - mom * v * 0.5)
    _check_positive("pressure", p)
    return ad.absolute(v) + ad.sqrt(p / rho * sys.gamma)


def max_wave_speed(sys: SystemSpec, u_minus, u_plus):
    """Characteristic-speed bound over the two reconstructed interface states."""
    return ad.maximum(_signal_speed(sys, u_minus), _signal_speed(sys, u_plus))


def max_signal_speed(sys: SystemSpec, u) -> float:
    """Largest characteristic speed over a whole state; used to set dt."""
    return float(np.max(value_of(_signal_speed(sys, u))))


def rusanov_flux(sys: SystemSpec, u_minus, u_plus):
    """Local Lax-Friedrichs flux; equal states return the analytical flux."""
    fm = analytical_flux(sys, u_minus)
    fp = analytical_flux(sys, u_plus)
    alpha = max_wave_speed(sys, u_minus, u_plus)
    return (fm + fp - alpha * (u_plus - u_minus)) * 0.5


def rusanov_flux_provider(sys: SystemSpec):
    def provider(u_minus, u_plus):
        return rusanov_flux(sys, u_minus, u_plus)

    return provider


def semi_discrete_rhs(
    grid: Grid,
    bc: BoundaryCondition,
    u,
    weights_provider,
    flux_provider,
):
    """Conservative flux-difference right-hand side.

    ``weights_provider(u, padded)`` must yield simplex weight rows for both
    biased reconstructions; ``flux_provider(u_minus, u_plus)`` one numerical
    flux vector per interface.  Returns ``(dudt, fluxes)`` with ``fluxes`` of
    shape (N+1, C); each interior flux is shared by its two neighbors, and
    for periodic boundaries rows 0 and N are computed from identical stencil
    data and therefore coincide bitwise.
    """
    padded = pad_ghost_array(u, bc, weno.GHOST_WIDTH)
    q_minus, q_plus = weno.candidates(padded)
    w_minus, w_plus = weights_provider(u, padded)
    u_minus, u_plus = weno.reconstruct(q_minus, q_plus, w_minus, w_plus)
    fluxes = flux_provider(u_minus, u_plus)
    n = value_of(u).shape[0]
    dudt = (fluxes[1 : n + 1] - fluxes[0:n]) * (-1.0 / grid.dx)
    return dudt, fluxes

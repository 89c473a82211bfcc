"""Uniform 1-d meshes, cell-average states, and ghost-cell padding.

Cells are indexed 0..N-1 internally; interface k sits at ``x_lo + k*dx``
(k = 0..N), so interface k separates cells k-1 and k.  States store one row
per cell and one column per conserved component, scalars included (N, 1).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import autodiff as ad

__all__ = [
    "Grid",
    "BoundaryCondition",
    "State",
    "make_grid",
    "pad_ghost",
    "pad_ghost_array",
    "coarsen_cell_averages",
]

MIN_CELLS = 8  # WENO5 stencil width plus interior


class BoundaryCondition(Enum):
    PERIODIC = "periodic"
    NO_FLUX = "no_flux"

    @property
    def conv_padding(self) -> str:
        """Padding rule matching this boundary for convolutional layers."""
        return "circular" if self is BoundaryCondition.PERIODIC else "replicate"


@dataclass(frozen=True)
class Grid:
    x_lo: float
    x_hi: float
    n_cells: int
    dx: float
    x_mid: np.ndarray

    @property
    def interfaces(self) -> np.ndarray:
        return self.x_lo + self.dx * np.arange(self.n_cells + 1)


@dataclass
class State:
    """Cell averages (N, n_components) at simulation time t."""

    u: np.ndarray
    t: float = 0.0

    def __post_init__(self) -> None:
        self.u = np.asarray(self.u, dtype=np.float64)
        if self.u.ndim == 1:
            self.u = self.u[:, None]
        if self.u.ndim != 2:
            raise ValueError(f"state must be (N, n_components), got shape {self.u.shape}")
        if not np.all(np.isfinite(self.u)):
            raise ValueError("state contains non-finite entries")

    @property
    def n_components(self) -> int:
        return self.u.shape[1]


def make_grid(x_lo: float, x_hi: float, n_cells: int) -> Grid:
    """Uniform mesh with cell centers at ``x_lo + (i + 1/2) dx``."""
    if x_hi <= x_lo:
        raise ValueError(f"domain must be increasing, got ({x_lo}, {x_hi})")
    if n_cells < MIN_CELLS:
        raise ValueError(f"need at least {MIN_CELLS} cells, got {n_cells}")
    dx = (x_hi - x_lo) / n_cells
    x_mid = x_lo + dx * (np.arange(n_cells) + 0.5)
    return Grid(float(x_lo), float(x_hi), int(n_cells), float(dx), x_mid)


def pad_ghost_array(u, bc: BoundaryCondition, width: int):
    """Extend a cell field with ``width`` ghost rows per side.

    Periodic ghosts copy the opposite end of the field, no-flux ghosts
    replicate the nearest boundary cell; both applied componentwise.  Works
    on ndarrays and on autodiff Tensors (ghost gradients fold back through
    the concatenated slices).
    """
    if width < 1:
        raise ValueError(f"ghost width must be >= 1, got {width}")
    n = ad.value_of(u).shape[0]
    if n < width:
        raise ValueError(f"field of {n} cells cannot supply {width} ghosts")
    if isinstance(u, ad.Tensor):
        if bc is BoundaryCondition.PERIODIC:
            return ad.concat([u[n - width :], u, u[:width]], axis=0)
        left = [u[0:1]] * width
        right = [u[n - 1 : n]] * width
        return ad.concat(left + [u] + right, axis=0)
    mode = "wrap" if bc is BoundaryCondition.PERIODIC else "edge"
    pad = ((width, width),) + ((0, 0),) * (u.ndim - 1)
    return np.pad(u, pad, mode=mode)


def pad_ghost(state: State, bc: BoundaryCondition, width: int) -> np.ndarray:
    return pad_ghost_array(state.u, bc, width)


def coarsen_cell_averages(u: np.ndarray, factor: int) -> np.ndarray:
    """Block-average a fine cell field onto a mesh ``factor`` times coarser."""
    u = np.asarray(u)
    n = u.shape[0]
    if n % factor != 0:
        raise ValueError(f"{n} cells do not divide into blocks of {factor}")
    return u.reshape(n // factor, factor, *u.shape[1:]).mean(axis=1)

"""Scheme variants: classical WENO5, the fixed-linear-weight scheme, the
hypernetwork-conditioned weight predictor, and its learned-flux extension.

A scheme bundles a weight provider and a flux provider for
:func:`hyperweno.physics.semi_discrete_rhs`.  ``prepare(grid, bc, u0)``
returns the right-hand-side operator for one rollout; the learned schemes
generate their per-cell target parameters exactly once there (counted in
``prepare_count``) and every stage evaluation reuses them.  Passing
parameter dicts of autodiff Tensors yields a differentiable operator;
ndarray parameters give the fast path.  Both produce identical values.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from . import weno
from .autodiff import value_of
from .grid import BoundaryCondition, Grid
from .networks import (
    FluxNetConfig,
    HyperNetConfig,
    build_metadata,
    fluxnet_forward,
    hypernet_forward,
    init_fluxnet,
    init_hypernet,
    interface_features,
    targetnet_forward,
)
from .physics import SystemSpec, rusanov_flux_provider, semi_discrete_rhs

__all__ = [
    "ClassicalScheme",
    "LinearWeightScheme",
    "HyperWeightScheme",
    "LearnedFluxScheme",
    "make_scheme",
    "pack_model",
    "unpack_model",
    "SCHEME_HYPER",
    "SCHEME_HYPER_FLUX",
]

# command-line scheme identifiers
SCHEME_HYPER = "hcfcnn"
SCHEME_HYPER_FLUX = "hcfcnn-f"


def _classical_weights_provider(eps: float, power: int):
    def provider(u, padded):
        bm, bp = weno.smoothness_indicators(value_of(padded))
        wm = weno.classical_weights(bm, weno.OPTIMAL_WEIGHTS_LEFT, eps, power)
        wp = weno.classical_weights(bp, weno.OPTIMAL_WEIGHTS_RIGHT, eps, power)
        return wm, wp

    return provider


def _linear_weights_provider():
    def provider(u, padded):
        n = value_of(u).shape[0]
        wm = np.broadcast_to(weno.OPTIMAL_WEIGHTS_LEFT[None, :, None], (n + 1, 3, 1))
        wp = np.broadcast_to(weno.OPTIMAL_WEIGHTS_RIGHT[None, :, None], (n + 1, 3, 1))
        return wm, wp

    return provider


def _extend_interface_rows(rows, bc: BoundaryCondition):
    """Grow N interface rows (right interface of each cell) to all N+1.

    Periodically the missing left-boundary interface is the same interface
    as the last row; under no-flux it replicates its nearest neighbor, the
    same rule the replicate padding applies inside the networks.
    """
    n = value_of(rows).shape[0]
    if bc is BoundaryCondition.PERIODIC:
        return ad.concat([rows[n - 1 : n], rows], axis=0)
    return ad.concat([rows[0:1], rows], axis=0)


def _learned_weights_provider(slab, bc: BoundaryCondition):
    def provider(u, padded):
        logits = targetnet_forward(slab, u, bc)
        w_left = ad.softmax_rows(logits[:, 0:3])
        w_right = ad.softmax_rows(logits[:, 3:6])
        n1 = value_of(u).shape[0] + 1
        wm = ad.reshape(_extend_interface_rows(w_left, bc), (n1, 3, 1))
        wp = ad.reshape(_extend_interface_rows(w_right, bc), (n1, 3, 1))
        return wm, wp

    return provider


def _fluxnet_provider(cfg: FluxNetConfig, params, bc: BoundaryCondition):
    def provider(u_minus, u_plus):
        if bc is BoundaryCondition.PERIODIC:
            # rows 1..N are one full period; the boundary interface is row N
            n = value_of(u_minus).shape[0] - 1
            feats = interface_features(u_minus[1:], u_plus[1:])
            f = fluxnet_forward(cfg, params, feats, bc)
            return ad.concat([f[n - 1 : n], f], axis=0)
        feats = interface_features(u_minus, u_plus)
        return fluxnet_forward(cfg, params, feats, bc)

    return provider


class _SchemeBase:
    kind: str = ""

    def __init__(self, system: SystemSpec):
        self.system = system
        self.prepare_count = 0

    def _providers(self, grid: Grid, bc: BoundaryCondition, u0):
        raise NotImplementedError

    def prepare(self, grid: Grid, bc: BoundaryCondition, u0):
        """Build the rollout right-hand side; one call per rollout."""
        self.prepare_count += 1
        weights_provider, flux_provider = self._providers(grid, bc, u0)

        def rhs(u):
            return semi_discrete_rhs(grid, bc, u, weights_provider, flux_provider)

        return rhs


class ClassicalScheme(_SchemeBase):
    """WENO5 with smoothness-indicator weights and the Rusanov flux."""

    kind = "classical"

    def __init__(self, system: SystemSpec, eps: float = weno.WENO_EPSILON, power: int = weno.WENO_POWER):
        super().__init__(system)
        self.eps = eps
        self.power = power

    def _providers(self, grid, bc, u0):
        return (
            _classical_weights_provider(self.eps, self.power),
            rusanov_flux_provider(self.system),
        )


class LinearWeightScheme(_SchemeBase):
    """Optimal linear weights everywhere; the learned schemes' starting point."""

    kind = "linear"

    def _providers(self, grid, bc, u0):
        return _linear_weights_provider(), rusanov_flux_provider(self.system)


class HyperWeightScheme(_SchemeBase):
    """Reconstruction weights predicted by a hypernetwork-generated target net."""

    kind = SCHEME_HYPER

    def __init__(self, system: SystemSpec, hyper_cfg: HyperNetConfig, hyper_params):
        super().__init__(system)
        if hyper_cfg.n_components != system.n_components:
            raise ValueError("hypernetwork was configured for a different system")
        self.hyper_cfg = hyper_cfg
        self.hyper_params = hyper_params

    def _weights(self, grid, bc, u0):
        metadata = build_metadata(grid, bc, value_of(u0))
        slab = hypernet_forward(self.hyper_cfg, self.hyper_params, metadata, bc)
        return _learned_weights_provider(slab, bc)

    def _providers(self, grid, bc, u0):
        return self._weights(grid, bc, u0), rusanov_flux_provider(self.system)


class LearnedFluxScheme(HyperWeightScheme):
    """Hypernetwork weights plus a learned interface flux in place of Rusanov."""

    kind = SCHEME_HYPER_FLUX

    def __init__(
        self,
        system: SystemSpec,
        hyper_cfg: HyperNetConfig,
        hyper_params,
        flux_cfg: FluxNetConfig,
        flux_params,
    ):
        super().__init__(system, hyper_cfg, hyper_params)
        if flux_cfg.n_components != system.n_components:
            raise ValueError("flux network was configured for a different system")
        self.flux_cfg = flux_cfg
        self.flux_params = flux_params

    def _providers(self, grid, bc, u0):
        return (
            self._weights(grid, bc, u0),
            _fluxnet_provider(self.flux_cfg, self.flux_params, bc),
        )


def make_scheme(
    kind: str,
    system: SystemSpec,
    hyper_params=None,
    flux_params=None,
    flux_kernel: int = 5,
    seed: int = 0,
):
    """Factory used by the CLI and the training loop.

    Missing parameter dicts are freshly initialized from ``seed``.
    """
    if kind == "classical":
        return ClassicalScheme(system)
    if kind == "linear":
        return LinearWeightScheme(system)
    hyper_cfg = HyperNetConfig(n_components=system.n_components)
    if hyper_params is None:
        hyper_params = init_hypernet(hyper_cfg, seed)
    if kind == SCHEME_HYPER:
        return HyperWeightScheme(system, hyper_cfg, hyper_params)
    if kind == SCHEME_HYPER_FLUX:
        flux_cfg = FluxNetConfig(n_components=system.n_components, kernel=flux_kernel)
        if flux_params is None:
            flux_params = init_fluxnet(flux_cfg, seed + 1)
        return LearnedFluxScheme(system, hyper_cfg, hyper_params, flux_cfg, flux_params)
    raise ValueError(f"unknown scheme kind {kind!r}")


# ---------------------------------------------------------------------------
# model packing for checkpoints

_KIND_CODES = {SCHEME_HYPER: 0.0, SCHEME_HYPER_FLUX: 1.0}


def pack_model(scheme) -> dict[str, np.ndarray]:
    """Flatten a learned scheme into named arrays for the checkpoint format."""
    entries = {k: value_of(v) for k, v in scheme.hyper_params.items()}
    entries["config/kind"] = np.array(_KIND_CODES[scheme.kind])
    entries["config/n_components"] = np.array(float(scheme.system.n_components))
    if isinstance(scheme, LearnedFluxScheme):
        entries.update({k: value_of(v) for k, v in scheme.flux_params.items()})
        entries["config/flux_kernel"] = np.array(float(scheme.flux_cfg.kernel))
    return entries


def unpack_model(entries: dict[str, np.ndarray], system: SystemSpec):
    """Rebuild a scheme from checkpoint arrays; validates the component count."""
    code = float(entries["config/kind"])
    n_comp = int(entries["config/n_components"])
    if n_comp != system.n_components:
        raise ValueError(
            f"checkpoint was trained for {n_comp}-component systems, "
            f"got {system.n_components}"
        )
    hyper_params = {k: v for k, v in entries.items() if k.startswith("hyper/")}
    kind = SCHEME_HYPER if code == 0.0 else SCHEME_HYPER_FLUX
    if kind == SCHEME_HYPER:
        return make_scheme(kind, system, hyper_params=hyper_params)
    flux_params = {k: v for k, v in entries.items() if k.startswith("flux/")}
    return make_scheme(
        kind,
        system,
        hyper_params=hyper_params,
        flux_params=flux_params,
        flux_kernel=int(entries["config/flux_kernel"]),
    )

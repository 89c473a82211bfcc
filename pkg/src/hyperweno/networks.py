"""Network components: the parameter-generating hypernetwork, the per-cell
target network it emits, the learned interface-flux model, and checkpoint
I/O.

The hypernetwork is a six-layer 1-d CNN (kernel 5, 32 channels, tanh between
layers, linear head) mapping the conditioning field -- mesh spacing,
normalized cell centers, and the rollout-initial state -- to a per-cell
parameter slab of fixed width ``per_cell_param_count``.  The slab unpacks
into a two-layer locally-parameterized network per cell: kernel-5 conv into
six tanh channels, then a pointwise layer emitting six logits per interface
(three per reconstruction bias).  Softmax of those logits gives the convex
reconstruction weights.

At initialization the hypernetwork head has zero weights and a bias chosen
so the generated logits softmax to the optimal linear weights at every cell:
the freshly initialized scheme is exactly the fixed-linear-weight scheme,
and training can only move away from a consistent discretization.

All forward functions run on plain ndarrays or on autodiff Tensors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import value_of
from .grid import BoundaryCondition, Grid
from .weno import OPTIMAL_WEIGHTS_LEFT, OPTIMAL_WEIGHTS_RIGHT

__all__ = [
    "TARGET_HIDDEN",
    "TARGET_KERNEL",
    "N_LOGITS",
    "per_cell_param_count",
    "HyperNetConfig",
    "FluxNetConfig",
    "build_metadata",
    "init_hypernet",
    "init_fluxnet",
    "hypernet_forward",
    "targetnet_forward",
    "fluxnet_forward",
    "interface_features",
    "CheckpointFormatError",
    "save_checkpoint",
    "load_checkpoint",
]

TARGET_HIDDEN = 6
TARGET_KERNEL = 5
N_LOGITS = 6  # three left-biased, three right-biased


def per_cell_param_count(n_components: int) -> int:
    """Parameters generated per cell: both locally-parameterized layers."""
    first = TARGET_HIDDEN * (TARGET_KERNEL * n_components + 1)
    head = N_LOGITS * (TARGET_HIDDEN + 1)
    return first + head


@dataclass(frozen=True)
class HyperNetConfig:
    n_components: int = 1
    channels: int = 32
    layers: int = 6
    kernel: int = 5

    def __post_init__(self) -> None:
        if self.kernel % 2 != 1:
            raise ValueError("kernel size must be odd")

    @property
    def in_channels(self) -> int:
        return 2 + self.n_components

    @property
    def out_channels(self) -> int:
        return per_cell_param_count(self.n_components)


@dataclass(frozen=True)
class FluxNetConfig:
    n_components: int = 1
    channels: int = 32
    layers: int = 4
    kernel: int = 5

    def __post_init__(self) -> None:
        if self.kernel not in (1, 5):
            raise ValueError("flux network kernel must be 1 or 5")

    @property
    def in_channels(self) -> int:
        return 2 * self.n_components

    @property
    def out_channels(self) -> int:
        return self.n_components


def build_metadata(grid: Grid, bc: BoundaryCondition, u0: np.ndarray) -> np.ndarray:
    """Conditioning field (N, 2 + n_components), held fixed over a rollout.

    Channel 0 broadcasts the mesh spacing, channel 1 maps the cell centers
    affinely onto [-1, 1], and the remaining channels carry the
    rollout-initial cell averages.
    """
    u0 = np.asarray(u0, dtype=np.float64)
    if u0.ndim == 1:
        u0 = u0[:, None]
    if u0.shape[0] != grid.n_cells:
        raise ValueError("initial state does not match the grid")
    span = grid.x_hi - grid.x_lo
    centers = -1.0 + 2.0 * (grid.x_mid - grid.x_lo) / span
    cols = [np.full(grid.n_cells, grid.dx), centers]
    return np.column_stack(cols + [u0[:, c] for c in range(u0.shape[1])])


# ---------------------------------------------------------------------------
# initialization


def _layer_sizes(in_channels: int, hidden: int, layers: int, out_channels: int):
    sizes = [in_channels] + [hidden] * (layers - 1) + [out_channels]
    return list(zip(sizes[:-1], sizes[1:]))


def _fan_in_uniform(rng: np.random.Generator, kernel: int, c_in: int, c_out: int):
    bound = 1.0 / np.sqrt(kernel * c_in)
    return rng.uniform(-bound, bound, size=(kernel, c_in, c_out))


def init_hypernet(cfg: HyperNetConfig, seed: int) -> dict[str, np.ndarray]:
    """Fan-in-scaled hidden layers; zero head with the linear-weight bias.

    The head bias writes log of the optimal linear weights into the logit
    slots of the slab, so softmax of the generated logits reproduces those
    weights exactly at every cell.
    """
    rng = np.random.default_rng(seed)
    params: dict[str, np.ndarray] = {}
    for i, (c_in, c_out) in enumerate(
        _layer_sizes(cfg.in_channels, cfg.channels, cfg.layers, cfg.out_channels)
    ):
        last = i == cfg.layers - 1
        if last:
            w = np.zeros((cfg.kernel, c_in, c_out))
            b = np.zeros(c_out)
            b[-N_LOGITS:] = np.concatenate(
                [np.log(OPTIMAL_WEIGHTS_LEFT), np.log(OPTIMAL_WEIGHTS_RIGHT)]
            )
        else:
            w = _fan_in_uniform(rng, cfg.kernel, c_in, c_out)
            b = np.zeros(c_out)
        params[f"hyper/conv{i}/w"] = w
        params[f"hyper/conv{i}/b"] = b
    return params


def init_fluxnet(cfg: FluxNetConfig, seed: int) -> dict[str, np.ndarray]:
    """Fan-in-scaled hidden layers; zero-weight, zero-bias output layer."""
    rng = np.random.default_rng(seed)
    params: dict[str, np.ndarray] = {}
    for i, (c_in, c_out) in enumerate(
        _layer_sizes(cfg.in_channels, cfg.channels, cfg.layers, cfg.out_channels)
    ):
        if i == cfg.layers - 1:
            w = np.zeros((cfg.kernel, c_in, c_out))
        else:
            w = _fan_in_uniform(rng, cfg.kernel, c_in, c_out)
        params[f"flux/conv{i}/w"] = w
        params[f"flux/conv{i}/b"] = np.zeros(c_out)
    return params


# ---------------------------------------------------------------------------
# forward passes


def _conv_stack(prefix: str, n_layers: int, params, x, padding: str):
    for i in range(n_layers):
        x = ad.conv1d(x, params[f"{prefix}/conv{i}/w"], params[f"{prefix}/conv{i}/b"], padding)
        if i < n_layers - 1:
            x = ad.tanh(x)
    return x


def hypernet_forward(cfg: HyperNetConfig, params, metadata, bc: BoundaryCondition):
    """Generate the per-cell parameter slab (N, per_cell_param_count).

    Evaluated once per problem instance; the slab is then reused across
    every stage of the rollout.
    """
    if value_of(metadata).shape[1] != cfg.in_channels:
        raise ValueError(
            f"metadata has {value_of(metadata).shape[1]} channels, expected {cfg.in_channels}"
        )
    return _conv_stack("hyper", cfg.layers, params, metadata, bc.conv_padding)


def _unpack_slab(slab, n_components: int):
    n = value_of(slab).shape[0]
    k_w1 = TARGET_KERNEL * n_components * TARGET_HIDDEN
    o1 = k_w1
    o2 = o1 + TARGET_HIDDEN
    o3 = o2 + TARGET_HIDDEN * N_LOGITS
    w1 = ad.reshape(slab[:, :o1], (n, TARGET_KERNEL, n_components, TARGET_HIDDEN))
    b1 = slab[:, o1:o2]
    w2 = ad.reshape(slab[:, o2:o3], (n, 1, TARGET_HIDDEN, N_LOGITS))
    b2 = slab[:, o3:]
    return w1, b1, w2, b2


def targetnet_forward(slab, u, bc: BoundaryCondition):
    """Per-interface logits (N, 6) from the current cell averages.

    Row j holds the logits for the right interface of cell j; the first
    three are left-biased, the last three right-biased.
    """
    uv, sv = value_of(u), value_of(slab)
    if sv.shape[0] != uv.shape[0]:
        raise ValueError(f"slab rows {sv.shape[0]} != state cells {uv.shape[0]}")
    if sv.shape[1] != per_cell_param_count(uv.shape[1]):
        raise ValueError("slab width does not match the state's component count")
    w1, b1, w2, b2 = _unpack_slab(slab, uv.shape[1])
    hidden = ad.tanh(ad.conv1d_local(u, w1, b1, bc.conv_padding))
    return ad.conv1d_local(hidden, w2, b2, bc.conv_padding)


def interface_features(u_minus, u_plus):
    """Interleave reconstructed states into (L, 2C) flux-model input."""
    c = value_of(u_minus).shape[1]
    cols = []
    for j in range(c):
        cols.append(u_minus[:, j : j + 1])
        cols.append(u_plus[:, j : j + 1])
    return ad.concat(cols, axis=1)


def fluxnet_forward(cfg: FluxNetConfig, params, features, bc: BoundaryCondition):
    """Map interface-aligned features to one flux vector per interface."""
    if value_of(features).shape[1] != cfg.in_channels:
        raise ValueError(
            f"features have {value_of(features).shape[1]} channels, expected {cfg.in_channels}"
        )
    return _conv_stack("flux", cfg.layers, params, features, bc.conv_padding)


# ---------------------------------------------------------------------------
# checkpoint format: magic HWCK1, little-endian
#   u32 entry count
#   per entry: u32 name length, name bytes (utf-8), u32 rank, rank*u64 dims,
#              float64 data


class CheckpointFormatError(Exception):
    pass


_MAGIC = b"HWCK1"


def save_checkpoint(path, params: dict[str, np.ndarray]) -> None:
    import struct

    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(params)))
        for name in sorted(params):
            # asarray keeps 0-d arrays 0-d; ascontiguousarray would not
            arr = np.asarray(value_of(params[name]), dtype="<f8", order="C")
            raw = name.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            fh.write(arr.tobytes())


def load_checkpoint(path) -> dict[str, np.ndarray]:
    import struct

    with open(path, "rb") as fh:
        blob = fh.read()

    def fail(msg: str, offset: int):
        raise CheckpointFormatError(f"{msg} at offset {offset}")

    if blob[: len(_MAGIC)] != _MAGIC:
        fail("bad magic", 0)
    off = len(_MAGIC)

    def take(n: int) -> bytes:
        nonlocal off
        if off + n > len(blob):
            fail("truncated checkpoint", off)
        out = blob[off : off + n]
        off += n
        return out

    (count,) = struct.unpack("<I", take(4))
    params: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<I", take(4))
        name = take(name_len).decode("utf-8")
        (rank,) = struct.unpack("<I", take(4))
        if rank > 8:
            fail(f"implausible rank {rank}", off - 4)
        dims = struct.unpack(f"<{rank}Q", take(8 * rank)) if rank else ()
        n_items = int(np.prod(dims)) if dims else 1
        data = np.frombuffer(take(8 * n_items), dtype="<f8").reshape(dims)
        params[name] = data.astype(np.float64).reshape(dims if dims else ())
    if off != len(blob):
        fail("trailing bytes", off)
    return params

"""Reference-data generation, window sampling, the multi-step recurrent
loss, and the optimization loop.

Reference trajectories are classical WENO5 rollouts run natively on every
mesh level of the hierarchy (coarsening the fine reference is available as
an option).  Training draws windows of L+1 consecutive snapshots, rebuilds
the conditioning metadata from the window's first snapshot, and penalizes
the mesh-weighted squared error accumulated over K composed solver steps.
Gradients flow through the unrolled steps back to the hypernetwork (and,
for the learned-flux variant, flux-network) parameters only; the per-cell
target parameters are generated once per window and never optimized
directly.
"""

from __future__ import annotations

import struct
import time
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Adam, Tensor
from .benchmarks import (
    ProblemInstance,
    benchmark_spec,
    default_dt_ratio,
    instantiate_ic,
    sample_instance,
)
from .grid import coarsen_cell_averages, make_grid
from .networks import FluxNetConfig, HyperNetConfig, init_fluxnet, init_hypernet, save_checkpoint
from .physics import NonPhysicalState
from .schemes import (
    SCHEME_HYPER,
    SCHEME_HYPER_FLUX,
    ClassicalScheme,
    LearnedFluxScheme,
    make_scheme,
    pack_model,
)
from .stepper import StepDiverged, plan_steps, rollout, ssp_rk3_step

__all__ = [
    "Trajectory",
    "TrajectoryDataset",
    "TrainConfig",
    "TrainingAborted",
    "generate_dataset",
    "sample_window",
    "unrolled_loss",
    "train",
    "save_trajectory",
    "load_trajectory",
    "write_loss_history",
]


@dataclass
class Trajectory:
    """Uniformly sampled snapshots of one instance on one mesh level."""

    u: np.ndarray  # (M+1, N, C)
    dx: float
    dt: float
    ic_params: tuple[float, ...] = ()
    boundary_flux_log: np.ndarray | None = None  # (M, 2, C) when recorded

    @property
    def n_snapshots(self) -> int:
        return self.u.shape[0]

    @property
    def n_cells(self) -> int:
        return self.u.shape[1]


@dataclass
class TrajectoryDataset:
    benchmark: str
    mesh_levels: tuple[int, ...]
    instances: list[ProblemInstance]
    data: dict[tuple[int, int], Trajectory]  # (instance index, n_cells)
    resampled: int = 0

    def trajectory(self, instance: int, n_cells: int) -> Trajectory:
        return self.data[(instance, n_cells)]


class TrainingAborted(Exception):
    pass


def generate_dataset(
    benchmark: str,
    n_traj: int,
    mesh_levels,
    t_final: float | None = None,
    seed: int = 0,
    max_resample: int = 10,
) -> TrajectoryDataset:
    """Classical-WENO5 reference rollouts for every (instance, level) pair.

    A diverged rollout discards the instance, draws a fresh one, and counts
    the event in ``resampled``.  Fixed seed gives a bitwise-identical
    dataset.
    """
    spec = benchmark_spec(benchmark)
    mesh_levels = tuple(int(n) for n in mesh_levels)
    horizon = spec.data_time if t_final is None else t_final
    rng = np.random.default_rng(seed)
    instances: list[ProblemInstance] = []
    data: dict[tuple[int, int], Trajectory] = {}
    resampled = 0
    for i in range(n_traj):
        for _attempt in range(max_resample):
            instance = sample_instance(benchmark, rng)
            try:
                per_level = {
                    n: _reference_trajectory(benchmark, instance, n, horizon)
                    for n in mesh_levels
                }
            except (StepDiverged, NonPhysicalState):
                resampled += 1
                continue
            instances.append(instance)
            for n, traj in per_level.items():
                data[(i, n)] = traj
            break
        else:
            raise TrainingAborted(
                f"instance {i}: {max_resample} consecutive reference rollouts diverged"
            )
    return TrajectoryDataset(benchmark, mesh_levels, instances, data, resampled)


def _reference_trajectory(
    benchmark: str, instance: ProblemInstance, n_cells: int, t_final: float
) -> Trajectory:
    spec = benchmark_spec(benchmark)
    grid = make_grid(spec.x_lo, spec.x_hi, n_cells)
    state0 = instantiate_ic(instance, grid)
    ratio = default_dt_ratio(benchmark, state0)
    n_steps, dt = plan_steps(t_final, ratio * grid.dx)
    record = rollout(grid, spec.bc, ClassicalScheme(spec.system), state0, n_steps, dt)
    if record.diverged:
        raise StepDiverged("reference rollout diverged")
    return Trajectory(
        u=record.snapshots,
        dx=grid.dx,
        dt=dt,
        ic_params=instance.params,
        boundary_flux_log=record.boundary_flux_log,
    )


def coarsened_reference(traj: Trajectory, factor: int) -> np.ndarray:
    """Block-averaged snapshots of a finer trajectory (optional data source)."""
    return np.stack([coarsen_cell_averages(u, factor) for u in traj.u])


# ---------------------------------------------------------------------------
# windows and loss


def sample_window(
    dataset: TrajectoryDataset,
    instance: int,
    n_cells: int,
    window_length: int,
    rng: np.random.Generator,
):
    """Uniformly placed window of L+1 snapshots; returns (start, window)."""
    traj = dataset.trajectory(instance, n_cells)
    m = traj.n_snapshots - 1
    if m < window_length:
        raise ValueError(f"trajectory has {m} steps, window needs {window_length}")
    start = int(rng.integers(0, m - window_length + 1))
    return start, traj.u[start : start + window_length + 1]


def unrolled_loss(scheme, grid, bc, window: np.ndarray, dt: float, unroll: int):
    """Mean over the unrolled steps of the mesh-weighted squared error.

    The scheme is prepared once from the window's first snapshot (that is
    where the learned schemes generate their target parameters) and the
    one-step map is composed ``unroll`` times.
    """
    if unroll < 1 or unroll > window.shape[0] - 1:
        raise ValueError(f"unroll depth {unroll} does not fit window {window.shape[0] - 1}")
    rhs = scheme.prepare(grid, bc, window[0])
    u = window[0]
    terms = None
    for step in range(1, unroll + 1):
        u, _ = ssp_rk3_step(u, dt, rhs)
        diff = u - window[step]
        term = ad.reduce_sum(ad.square(diff)) * grid.dx
        terms = term if terms is None else terms + term
    return terms * (1.0 / unroll)


# ---------------------------------------------------------------------------
# optimization loop


@dataclass
class TrainConfig:
    benchmark: str
    scheme: str = SCHEME_HYPER
    mesh_levels: tuple[int, ...] = (32, 64)
    n_traj: int = 20
    window_length: int | None = None  # None: benchmark default
    unroll: int = 4
    epochs: int = 60
    batch_size: int = 8
    lr: float = 1e-3
    clip_norm: float = 1.0
    seed: int = 0
    checkpoint_every: int = 0  # 0: final only
    checkpoint_path: str | None = None

    def resolved_window(self) -> int:
        if self.window_length is not None:
            return self.window_length
        return benchmark_spec(self.benchmark).window_length


@dataclass
class TrainResult:
    scheme: object
    history: list[tuple[int, float, float]]  # epoch, loss, wall seconds
    invalid_windows: int = 0


def _trainable_leaves(config: TrainConfig, system) -> tuple[dict, dict, dict]:
    hyper_cfg = HyperNetConfig(n_components=system.n_components)
    hyper = {
        k: Tensor(v, requires_grad=True)
        for k, v in init_hypernet(hyper_cfg, config.seed).items()
    }
    leaves = dict(hyper)
    flux = {}
    if config.scheme == SCHEME_HYPER_FLUX:
        spec = benchmark_spec(config.benchmark)
        flux_cfg = FluxNetConfig(n_components=system.n_components, kernel=spec.flux_kernel)
        flux = {
            k: Tensor(v, requires_grad=True)
            for k, v in init_fluxnet(flux_cfg, config.seed + 1).items()
        }
        leaves.update(flux)
    return hyper, flux, leaves


def train(config: TrainConfig, dataset: TrajectoryDataset) -> TrainResult:
    """Mini-batched optimization of the learned scheme on sampled windows.

    Each epoch draws one fresh window per (instance, mesh level) pair,
    shuffles the tuples, and accumulates gradients over batches; diverged
    windows are skipped and counted, and an epoch in which more than half
    the windows are invalid aborts training.
    """
    spec = benchmark_spec(config.benchmark)
    for n in config.mesh_levels:
        if n not in dataset.mesh_levels:
            raise ValueError(f"dataset has no mesh level {n}")
    window_length = config.resolved_window()
    hyper, flux, leaves = _trainable_leaves(config, spec.system)
    if config.scheme == SCHEME_HYPER:
        scheme = make_scheme(SCHEME_HYPER, spec.system, hyper_params=hyper)
    else:
        scheme = LearnedFluxScheme(
            spec.system,
            HyperNetConfig(n_components=spec.system.n_components),
            hyper,
            FluxNetConfig(n_components=spec.system.n_components, kernel=spec.flux_kernel),
            flux,
        )
    grids = {n: make_grid(spec.x_lo, spec.x_hi, n) for n in config.mesh_levels}
    optimizer = Adam(leaves, lr=config.lr)
    rng = np.random.default_rng(config.seed + 17)
    pairs = [
        (i, n) for i in range(len(dataset.instances)) for n in config.mesh_levels
    ]
    history: list[tuple[int, float, float]] = []
    invalid_total = 0
    start = time.perf_counter()
    for epoch in range(config.epochs):
        order = rng.permutation(len(pairs))
        losses: list[float] = []
        invalid = 0
        for lo in range(0, len(order), config.batch_size):
            batch = [pairs[j] for j in order[lo : lo + config.batch_size]]
            optimizer.zero_grad()
            valid = 0
            with ad.Tape() as tape:
                for i, n in batch:
                    _, window = sample_window(dataset, i, n, window_length, rng)
                    traj = dataset.trajectory(i, n)
                    try:
                        loss = unrolled_loss(
                            scheme, grids[n], spec.bc, window, traj.dt, config.unroll
                        )
                        ad.backward(loss)
                    except (StepDiverged, NonPhysicalState):
                        invalid += 1
                        continue
                    losses.append(float(loss.value))
                    valid += 1
                tape.clear()
            if valid == 0:
                continue
            grads = {
                k: (p.grad if p.grad is not None else np.zeros_like(p.value)) / valid
                for k, p in leaves.items()
            }
            grads = ad.clip_gradients(grads, config.clip_norm)
            optimizer.step(grads)
        invalid_total += invalid
        if invalid > len(pairs) // 2:
            raise TrainingAborted(
                f"epoch {epoch}: {invalid}/{len(pairs)} windows diverged"
            )
        epoch_loss = float(np.mean(losses)) if losses else float("nan")
        history.append((epoch, epoch_loss, time.perf_counter() - start))
        if (
            config.checkpoint_path
            and config.checkpoint_every
            and (epoch + 1) % config.checkpoint_every == 0
        ):
            save_checkpoint(config.checkpoint_path, pack_model(scheme))
    return TrainResult(scheme=scheme, history=history, invalid_windows=invalid_total)


def write_loss_history(path, history) -> None:
    with open(path, "w") as fh:
        fh.write("epoch,loss,wall_seconds\n")
        for epoch, loss, wall in history:
            fh.write(f"{epoch},{loss:.17g},{wall:.17g}\n")


# ---------------------------------------------------------------------------
# trajectory file format: magic HWTRJ1, little-endian
#   u32 version (1: snapshots only, 2: + boundary-flux log)
#   u32 n_components, u32 N, u32 n_snapshots
#   f64 dx, f64 dt
#   u32 n_params, n_params * f64          (initial-condition parameters)
#   snapshots row-major (time, cell, component), f64
#   [v2] u32 n_steps, n_steps*2*C f64     (left/right effective fluxes)


class TrajectoryFormatError(Exception):
    pass


_TRJ_MAGIC = b"HWTRJ1"


def save_trajectory(path, traj: Trajectory) -> None:
    version = 2 if traj.boundary_flux_log is not None else 1
    m, n, c = traj.u.shape
    with open(path, "wb") as fh:
        fh.write(_TRJ_MAGIC)
        fh.write(struct.pack("<IIII", version, c, n, m))
        fh.write(struct.pack("<dd", traj.dx, traj.dt))
        params = np.asarray(traj.ic_params, dtype="<f8")
        fh.write(struct.pack("<I", params.size))
        fh.write(params.tobytes())
        fh.write(np.ascontiguousarray(traj.u, dtype="<f8").tobytes())
        if version == 2:
            log = np.ascontiguousarray(traj.boundary_flux_log, dtype="<f8")
            fh.write(struct.pack("<I", log.shape[0]))
            fh.write(log.tobytes())


def load_trajectory(path) -> Trajectory:
    with open(path, "rb") as fh:
        blob = fh.read()
    off = len(_TRJ_MAGIC)
    if blob[:off] != _TRJ_MAGIC:
        raise TrajectoryFormatError("bad magic at offset 0")

    def take(n: int) -> bytes:
        nonlocal off
        if off + n > len(blob):
            raise TrajectoryFormatError(f"truncated trajectory at offset {off}")
        out = blob[off : off + n]
        off += n
        return out

    version, c, n, m = struct.unpack("<IIII", take(16))
    if version not in (1, 2):
        raise TrajectoryFormatError(f"unsupported version {version}")
    dx, dt = struct.unpack("<dd", take(16))
    (n_params,) = struct.unpack("<I", take(4))
    params = tuple(np.frombuffer(take(8 * n_params), dtype="<f8"))
    u = np.frombuffer(take(8 * m * n * c), dtype="<f8").reshape(m, n, c).copy()
    flux = None
    if version == 2:
        (n_steps,) = struct.unpack("<I", take(4))
        flux = (
            np.frombuffer(take(8 * n_steps * 2 * c), dtype="<f8")
            .reshape(n_steps, 2, c)
            .copy()
        )
    if off != len(blob):
        raise TrajectoryFormatError(f"trailing bytes at offset {off}")
    return Trajectory(u=u, dx=dx, dt=dt, ic_params=params, boundary_flux_log=flux)

"""Command-line surface: data generation, training, rollouts, diagnostics,
refinement studies, and cost tables, all emitting machine-readable files.

Output conventions: CSV files carry a header row, floats are printed with 17
significant digits (lossless round-trip), and every file is written
atomically (temp + rename).  Exit codes: 0 success, 2 usage, 3 missing
file, 4 format error, 5 diverged run, 6 non-physical state.

The ``--seed`` flag falls back to the ``HYPERWENO_SEED`` environment
variable, then to 0.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile

import numpy as np

from .benchmarks import (
    BENCHMARKS,
    ProblemInstance,
    benchmark_spec,
    default_dt_ratio,
    fixed_test_instance,
    instantiate_ic,
)
from .grid import coarsen_cell_averages, make_grid
from .networks import (
    CheckpointFormatError,
    load_checkpoint,
    per_cell_param_count,
    save_checkpoint,
)
from .physics import NonPhysicalState
from .schemes import SCHEME_HYPER, SCHEME_HYPER_FLUX, make_scheme, pack_model, unpack_model
from .stepper import (
    StepDiverged,
    conservation_remainder,
    mse_and_order,
    plan_steps,
    rollout,
)
from .training import (
    TrainConfig,
    Trajectory,
    TrajectoryDataset,
    TrajectoryFormatError,
    generate_dataset,
    load_trajectory,
    save_trajectory,
    train,
    write_loss_history,
)

_EXIT_USAGE = 2
_EXIT_MISSING = 3
_EXIT_FORMAT = 4
_EXIT_DIVERGED = 5
_EXIT_NONPHYSICAL = 6

_TABLE_TIMES = {"burgers1": 1.5, "burgers2": 1.5, "shallow": 1.0, "euler": 1.6}
_RUN_TIMES = {"burgers1": 3.0, "burgers2": 6.0, "shallow": 1.0, "euler": 1.6}
_TABLE_MESHES = {
    "burgers1": (32, 64, 128, 256),
    "burgers2": (32, 64, 128, 256),
    "shallow": (64, 128, 256),
    "euler": (64, 128, 256),
}


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_csv(path: str, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(cell if isinstance(cell, str) else _fmt(cell) for cell in row))
    _atomic_write(path, "\n".join(lines) + "\n")


class ConfigError(Exception):
    pass


def parse_config(path: str) -> dict[str, object]:
    """Flat ``key = value`` files; '#' starts a comment.

    Values parse as float lists (comma-separated), single numbers, booleans,
    or bare strings.
    """
    out: dict[str, object] = {}
    with open(path) as fh:
        for ln, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{ln}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            out[key] = _parse_value(value)
    return out


def _parse_value(value: str):
    low = value.lower()
    if low in ("true", "false"):
        return low == "true"
    parts = [p.strip() for p in value.split(",") if p.strip()]
    try:
        nums = [float(p) for p in parts]
    except ValueError:
        return value
    if len(nums) == 1 and "," not in value:
        return nums[0]
    return nums


_DEFAULT_FAMILY = {
    "burgers1": "sine",
    "burgers2": "two_jumps",
    "shallow": "riemann",
    "euler": "shock_profile",
}


def instance_from_config(cfg: dict[str, object]) -> ProblemInstance:
    if "benchmark" not in cfg:
        raise ConfigError("instance config needs a 'benchmark' key")
    benchmark = str(cfg["benchmark"])
    if benchmark not in BENCHMARKS:
        raise ConfigError(f"unknown benchmark {benchmark!r}")
    if "params" not in cfg and "family" not in cfg:
        return fixed_test_instance(benchmark)
    family = str(cfg.get("family", _DEFAULT_FAMILY[benchmark]))
    raw = cfg.get("params", [])
    params = tuple(raw) if isinstance(raw, list) else (float(raw),)
    return ProblemInstance(
        benchmark, family, params, extrapolation=bool(cfg.get("extrapolation", False))
    )


# ---------------------------------------------------------------------------
# shared run helper


def _run_instance(
    instance: ProblemInstance,
    scheme,
    n_cells: int,
    t_final: float,
    dt_ratio: float | None = None,
):
    spec = benchmark_spec(instance.benchmark)
    grid = make_grid(spec.x_lo, spec.x_hi, n_cells)
    state0 = instantiate_ic(instance, grid)
    ratio = dt_ratio if dt_ratio is not None else default_dt_ratio(instance.benchmark, state0)
    n_steps, dt = plan_steps(t_final, ratio * grid.dx)
    record = rollout(grid, spec.bc, scheme, state0, n_steps, dt)
    if record.diverged:
        raise StepDiverged(
            f"{instance.benchmark} N={n_cells} diverged at step {record.n_steps}"
        )
    return grid, record


def _snapshot_rows(grid, record, every: int):
    indices = range(record.n_steps, -1, -every) if every > 0 else [record.n_steps]
    for m in sorted(set(indices)):
        for i in range(grid.n_cells):
            yield (grid.x_mid[i], *record.snapshots[m, i], record.times[m])


def _write_rollout_csv(path, grid, record, n_components: int, every: int) -> None:
    header = ["x"] + [f"component_{c}" for c in range(n_components)] + ["t"]
    _write_csv(path, header, _snapshot_rows(grid, record, every))


def _record_trajectory(record, ic_params) -> Trajectory:
    return Trajectory(
        u=record.snapshots,
        dx=record.dx,
        dt=record.dt,
        ic_params=tuple(ic_params),
        boundary_flux_log=record.boundary_flux_log,
    )


def _load_model(path: str, system):
    return unpack_model(load_checkpoint(path), system)


# ---------------------------------------------------------------------------
# subcommands


def _cmd_gen_data(args) -> int:
    spec = benchmark_spec(args.benchmark)
    levels = args.mesh_levels or list(spec.train_meshes)
    dataset = generate_dataset(
        args.benchmark,
        n_traj=args.n_traj,
        mesh_levels=levels,
        t_final=args.t_final,
        seed=args.seed,
    )
    os.makedirs(args.out, exist_ok=True)
    files = []
    for (i, n), traj in sorted(dataset.data.items()):
        name = f"traj_{i:04d}_N{n}.hwtrj"
        # dataset files use the plain snapshot format; the flux log is a
        # rollout-record extension
        plain = Trajectory(u=traj.u, dx=traj.dx, dt=traj.dt, ic_params=traj.ic_params)
        save_trajectory(os.path.join(args.out, name), plain)
        files.append(
            {
                "instance": i,
                "n_cells": n,
                "path": name,
                "params": list(traj.ic_params),
                "dt": traj.dt,
                "dx": traj.dx,
            }
        )
    manifest = {
        "benchmark": args.benchmark,
        "mesh_levels": [int(n) for n in levels],
        "n_traj": args.n_traj,
        "seed": args.seed,
        "resampled": dataset.resampled,
        "files": files,
    }
    _atomic_write(os.path.join(args.out, "manifest.json"), json.dumps(manifest, indent=2))
    print(f"wrote {len(files)} trajectories to {args.out}")
    return 0


def _load_dataset(directory: str) -> TrajectoryDataset:
    manifest_path = os.path.join(directory, "manifest.json")
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    data = {}
    instances: dict[int, ProblemInstance] = {}
    benchmark = manifest["benchmark"]
    for entry in manifest["files"]:
        traj = load_trajectory(os.path.join(directory, entry["path"]))
        data[(entry["instance"], entry["n_cells"])] = traj
        instances.setdefault(
            entry["instance"],
            ProblemInstance(
                benchmark, _DEFAULT_FAMILY[benchmark], tuple(entry["params"])
            ),
        )
    return TrajectoryDataset(
        benchmark=benchmark,
        mesh_levels=tuple(manifest["mesh_levels"]),
        instances=[instances[i] for i in sorted(instances)],
        data=data,
    )


def _cmd_train(args) -> int:
    dataset = _load_dataset(args.data)
    config = TrainConfig(
        benchmark=args.benchmark,
        scheme=args.scheme,
        mesh_levels=tuple(args.mesh_levels or dataset.mesh_levels),
        n_traj=len(dataset.instances),
        window_length=args.L,
        unroll=args.K,
        epochs=args.epochs,
        batch_size=args.batch_size,
        lr=args.lr,
        seed=args.seed,
    )
    result = train(config, dataset)
    save_checkpoint(args.out, pack_model(result.scheme))
    loss_csv = args.loss_csv or args.out + ".loss.csv"
    write_loss_history(loss_csv, result.history)
    print(
        f"trained {args.scheme} for {config.epochs} epochs: "
        f"loss {result.history[0][1]:.3e} -> {result.history[-1][1]:.3e}"
    )
    return 0


def _cmd_rollout(args) -> int:
    instance = instance_from_config(parse_config(args.instance))
    spec = benchmark_spec(instance.benchmark)
    scheme = _load_model(args.ckpt, spec.system)
    grid, record = _run_instance(instance, scheme, args.mesh, args.T, args.dt_ratio)
    _write_rollout_csv(args.out, grid, record, spec.system.n_components, args.save_every)
    if args.record:
        save_trajectory(args.record, _record_trajectory(record, instance.params))
    return 0


def _cmd_reference(args) -> int:
    instance = (
        instance_from_config(parse_config(args.instance))
        if args.instance
        else fixed_test_instance(args.benchmark)
    )
    spec = benchmark_spec(args.benchmark)
    scheme = make_scheme("classical", spec.system)
    grid, record = _run_instance(instance, scheme, args.mesh, args.T, args.dt_ratio)
    _write_rollout_csv(args.out, grid, record, spec.system.n_components, args.save_every)
    if args.record:
        save_trajectory(args.record, _record_trajectory(record, instance.params))
    return 0


def _cmd_diagnose(args) -> int:
    traj = load_trajectory(args.rollout)
    if traj.boundary_flux_log is None:
        raise TrajectoryFormatError(
            "record has no boundary-flux log (version 1 file); "
            "re-run rollout with --record"
        )
    record_like = _RecordView(traj)
    n_comp = traj.u.shape[2]
    series = [conservation_remainder(record_like, c) for c in range(n_comp)]
    times = traj.dt * np.arange(traj.u.shape[0])
    header = ["t"] + [f"C_q{c}" for c in range(n_comp)]
    rows = ((times[m], *(s[m] for s in series)) for m in range(len(times)))
    _write_csv(args.out, header, rows)
    return 0


class _RecordView:
    """Adapts a stored trajectory to the diagnostics interface."""

    def __init__(self, traj: Trajectory):
        self.snapshots = traj.u
        self.dt = traj.dt
        self.dx = traj.dx
        self.boundary_flux_log = traj.boundary_flux_log


def _cmd_converge(args) -> int:
    benchmark = args.benchmark
    spec = benchmark_spec(benchmark)
    meshes = tuple(int(n) for n in (args.meshes or _TABLE_MESHES[benchmark]))
    t_final = args.T if args.T is not None else _TABLE_TIMES[benchmark]
    instance = fixed_test_instance(benchmark)
    if args.scheme == "classical":
        scheme_factory = lambda: make_scheme("classical", spec.system)
    else:
        if not args.ckpt:
            raise ConfigError("learned schemes need --ckpt")
        model = _load_model(args.ckpt, spec.system)
        scheme_factory = lambda: model

    # reference on the fine mesh, block-averaged onto each coarse mesh
    ref_grid, ref_record = _run_instance(
        instance, make_scheme("classical", spec.system), spec.reference_n, t_final
    )
    ref_final = ref_record.snapshots[-1]

    dx0 = (spec.x_hi - spec.x_lo) / min(meshes)
    predictions, references = [], []
    for n in meshes:
        dx_n = (spec.x_hi - spec.x_lo) / n
        ratio = None
        if args.dt_power:
            ratio = default_dt_ratio(benchmark) * (dx_n / dx0) ** args.dt_power
        _, record = _run_instance(instance, scheme_factory(), n, t_final, ratio)
        if spec.reference_n % n != 0:
            raise ConfigError(f"reference mesh {spec.reference_n} does not divide by {n}")
        predictions.append(record.snapshots[-1])
        references.append(coarsen_cell_averages(ref_final, spec.reference_n // n))
    diag = mse_and_order(predictions, references)
    rows = []
    for i, n in enumerate(meshes):
        order = "" if i == 0 else _fmt(diag.orders[i - 1])
        rows.append((float(n), diag.mse[i], order))
    _write_csv(args.out, ["N", "mse", "order"], rows)
    return 0


def _cmd_bench_cost(args) -> int:
    benchmark = args.benchmark
    spec = benchmark_spec(benchmark)
    entries = load_checkpoint(args.ckpt)
    model = unpack_model(entries, spec.system)
    t_final = args.T if args.T is not None else _RUN_TIMES[benchmark]
    instance = fixed_test_instance(benchmark)
    p_cell = per_cell_param_count(spec.system.n_components)
    rows = []
    for n in args.meshes:
        n = int(n)
        _, record = _run_instance(instance, model, n, t_final)
        rows.append((float(n), float(n * p_cell), record.wall_seconds))
    _write_csv(args.out, ["N", "params", "wall_seconds"], rows)
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _int_list(text: str) -> list[int]:
    return [int(p) for p in text.split(",") if p.strip()]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hyperweno",
        description="Conservative WENO5 solver with learned reconstruction weights",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    seed_default = int(os.environ.get("HYPERWENO_SEED", "0"))

    def add_seed(p):
        p.add_argument("--seed", type=int, default=seed_default)

    p = sub.add_parser("gen-data", help="generate reference trajectories")
    p.add_argument("--benchmark", required=True, choices=BENCHMARKS)
    p.add_argument("--out", required=True)
    p.add_argument("--n-traj", type=int, default=20)
    p.add_argument("--mesh-levels", type=_int_list, default=None)
    p.add_argument("--t-final", type=float, default=None)
    add_seed(p)
    p.set_defaults(func=_cmd_gen_data)

    p = sub.add_parser("train", help="train a learned scheme")
    p.add_argument("--benchmark", required=True, choices=BENCHMARKS)
    p.add_argument("--data", required=True)
    p.add_argument("--scheme", choices=(SCHEME_HYPER, SCHEME_HYPER_FLUX), default=SCHEME_HYPER)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=60)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--K", type=int, default=4)
    p.add_argument("--L", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--mesh-levels", type=_int_list, default=None)
    p.add_argument("--loss-csv", default=None)
    add_seed(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("rollout", help="advance a learned scheme and dump snapshots")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--instance", required=True, help="key=value instance config file")
    p.add_argument("--mesh", type=int, required=True)
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--dt-ratio", type=float, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--record", default=None, help="also write an HWTRJ record with flux log")
    p.add_argument("--save-every", type=int, default=0, help="0: final snapshot only")
    p.set_defaults(func=_cmd_rollout)

    p = sub.add_parser("reference", help="classical WENO5 run")
    p.add_argument("--benchmark", required=True, choices=BENCHMARKS)
    p.add_argument("--mesh", type=int, required=True)
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--instance", default=None)
    p.add_argument("--dt-ratio", type=float, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--record", default=None)
    p.add_argument("--save-every", type=int, default=0)
    p.set_defaults(func=_cmd_reference)

    p = sub.add_parser("diagnose", help="conservation remainder series from a record")
    p.add_argument("--rollout", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_diagnose)

    p = sub.add_parser("converge", help="MSE/order table against the fine reference")
    p.add_argument("--benchmark", required=True, choices=BENCHMARKS)
    p.add_argument("--ckpt", default=None)
    p.add_argument("--scheme", choices=("classical", SCHEME_HYPER, SCHEME_HYPER_FLUX), default=None)
    p.add_argument("--T", type=float, default=None)
    p.add_argument("--meshes", type=_int_list, default=None)
    p.add_argument("--dt-power", type=float, default=0.0,
                   help="shrink dt as (dx/dx0)^p to expose spatial order")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_converge)

    p = sub.add_parser("bench-cost", help="parameter counts and rollout wall time")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--meshes", type=_int_list, required=True)
    p.add_argument("--benchmark", choices=BENCHMARKS, default="burgers1")
    p.add_argument("--T", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_bench_cost)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "scheme", None) is None and args.command == "converge":
        args.scheme = SCHEME_HYPER if args.ckpt else "classical"
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: missing file: {exc}", file=sys.stderr)
        return _EXIT_MISSING
    except (CheckpointFormatError, TrajectoryFormatError, ConfigError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_FORMAT
    except StepDiverged as exc:
        print(f"error: diverged: {exc}", file=sys.stderr)
        return _EXIT_DIVERGED
    except NonPhysicalState as exc:
        print(f"error: non-physical state: {exc}", file=sys.stderr)
        return _EXIT_NONPHYSICAL
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

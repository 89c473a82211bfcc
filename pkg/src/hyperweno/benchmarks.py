"""Benchmark problem definitions: initial-condition families, fixed test
instances, sampling ranges, and the experiment schedule.

Four benchmarks are defined:

``burgers1``
    Periodic Burgers with smooth data ``a + b sin x`` that steepens into a
    single shock; a, b drawn uniformly from [-0.25, 0.25] x [0.75, 1.25].
``burgers2``
    Periodic Burgers with piecewise-constant data carrying two jumps; the
    fixed test case is a three-level profile outside the sampled family.
``shallow``
    Flat-bottom shallow water (g = 1) on (-5, 5) with zero-gradient
    boundaries and Riemann-type data.
``euler``
    Compressible Euler (gamma = 1.4) on (-5, 5): a randomized shock/
    sine-density interaction profile with a smoothed right tail; training
    instances perturb the nominal parameters by +-10 percent.

Initial states are true cell averages: smooth pieces are integrated with
Gauss-Legendre quadrature, and cells cut by a discontinuity are integrated
exactly on each sub-interval.  Point sampling would cap the solver order at
two well before the reconstruction order could be observed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import BoundaryCondition, Grid, State
from .physics import SystemSpec, burgers, euler, shallow_water

__all__ = [
    "BENCHMARKS",
    "BenchmarkSpec",
    "ProblemInstance",
    "RunSpec",
    "benchmark_spec",
    "sample_instance",
    "fixed_test_instance",
    "nominal_euler_instance",
    "instantiate_ic",
    "default_dt_ratio",
    "experiment_matrix",
]

TWO_PI = 2.0 * np.pi
EULER_SINE_CUTOFF = 3.29867  # right edge of the unsmoothed sine region

# nominal shock/sine-interaction parameters: rho_l, u_l, p_l, p_r, eps, x0
EULER_NOMINAL = (3.857135, 2.629369, 10.33333, 1.0, 0.2, -4.0)


@dataclass(frozen=True)
class ProblemInstance:
    benchmark: str
    family: str
    params: tuple[float, ...]
    extrapolation: bool = False


@dataclass(frozen=True)
class BenchmarkSpec:
    name: str
    system: SystemSpec
    bc: BoundaryCondition
    x_lo: float
    x_hi: float
    data_time: float  # horizon of training trajectories
    cfl: float  # stepping ratio dt/dx
    train_meshes: tuple[int, ...]
    reference_n: int
    window_length: int
    flux_kernel: int


_SPECS = {
    "burgers1": BenchmarkSpec(
        "burgers1", burgers(), BoundaryCondition.PERIODIC, 0.0, TWO_PI,
        data_time=1.5, cfl=0.4,
        train_meshes=tuple(32 * l for l in range(1, 9)),
        reference_n=512, window_length=20, flux_kernel=5,
    ),
    "burgers2": BenchmarkSpec(
        "burgers2", burgers(), BoundaryCondition.PERIODIC, 0.0, TWO_PI,
        data_time=1.5, cfl=0.4,
        train_meshes=tuple(32 * l for l in range(1, 9)),
        reference_n=512, window_length=20, flux_kernel=5,
    ),
    "shallow": BenchmarkSpec(
        "shallow", shallow_water(g=1.0), BoundaryCondition.NO_FLUX, -5.0, 5.0,
        data_time=1.0, cfl=0.4,
        train_meshes=(64, 128, 192, 256),
        reference_n=1024, window_length=30, flux_kernel=5,
    ),
    "euler": BenchmarkSpec(
        "euler", euler(gamma=1.4), BoundaryCondition.NO_FLUX, -5.0, 5.0,
        data_time=1.6, cfl=0.064,
        train_meshes=(64, 128, 192, 256),
        reference_n=512, window_length=30, flux_kernel=1,
    ),
}

BENCHMARKS = tuple(_SPECS)


def benchmark_spec(name: str) -> BenchmarkSpec:
    try:
        return _SPECS[name]
    except KeyError:
        raise ValueError(f"unknown benchmark {name!r}; choose from {BENCHMARKS}") from None


# ---------------------------------------------------------------------------
# sampling and fixed instances


def sample_instance(benchmark: str, rng: np.random.Generator) -> ProblemInstance:
    if benchmark == "burgers1":
        a = rng.uniform(-0.25, 0.25)
        b = rng.uniform(0.75, 1.25)
        return ProblemInstance(benchmark, "sine", (a, b))
    if benchmark == "burgers2":
        y1, y2 = rng.uniform(-1.0, 1.0, 2)
        x1, x2 = rng.uniform(0.0, TWO_PI, 2)
        return ProblemInstance(benchmark, "two_jumps", (y1, y2, x1, x2))
    if benchmark == "shallow":
        h_l = rng.uniform(1.8, 2.2)
        h_r = rng.uniform(1.9, 2.1)
        v_l, v_r, x0 = rng.uniform(-0.1, 0.1, 3)
        return ProblemInstance(benchmark, "riemann", (h_l, h_r, v_l, v_r, x0))
    if benchmark == "euler":
        params = tuple(v * (1.0 + rng.uniform(-0.1, 0.1)) for v in EULER_NOMINAL)
        return ProblemInstance(benchmark, "shock_profile", params)
    raise ValueError(f"unknown benchmark {benchmark!r}")


def fixed_test_instance(benchmark: str) -> ProblemInstance:
    if benchmark == "burgers1":
        return ProblemInstance(benchmark, "sine", (-0.062730, 0.965973))
    if benchmark == "burgers2":
        # three-level profile, deliberately outside the two-jump family
        return ProblemInstance(benchmark, "three_levels", (), extrapolation=True)
    if benchmark == "shallow":
        # the right depth sits outside the sampled band, hence the flag
        return ProblemInstance(
            benchmark, "riemann",
            (1.949816, 1.090143, 0.046399, 0.019732, -0.068796),
            extrapolation=True,
        )
    if benchmark == "euler":
        return ProblemInstance(
            benchmark, "shock_profile",
            (3.760352, 2.681251, 11.264806, 1.046399, 0.186240, -3.724815),
        )
    raise ValueError(f"unknown benchmark {benchmark!r}")


def nominal_euler_instance() -> ProblemInstance:
    return ProblemInstance("euler", "shock_profile", EULER_NOMINAL)


def extrapolation_instances(benchmark: str) -> list[ProblemInstance]:
    if benchmark == "burgers1":
        return [
            ProblemInstance(benchmark, "sine", (-0.3, 1.0), extrapolation=True),
            ProblemInstance(benchmark, "sine", (-0.3, 1.3), extrapolation=True),
        ]
    if benchmark == "shallow":
        return [
            ProblemInstance(
                benchmark, "riemann", (3.5, 1.5, -0.2, 0.2, 0.2), extrapolation=True
            )
        ]
    return []


# ---------------------------------------------------------------------------
# cell-average instantiation


def _pieces(instance: ProblemInstance, sys: SystemSpec):
    """Breakpoints and per-piece conserved-variable point functions."""
    fam, p = instance.family, instance.params
    if fam == "sine":
        a, b = p
        return [], [lambda x: (a + b * np.sin(x))[:, None]]
    if fam == "two_jumps":
        y1, y2, x1, x2 = p
        lo, hi = min(x1, x2), max(x1, x2)

        def const(v):
            return lambda x: np.full((x.size, 1), v)

        return [lo, hi], [const(y2), const(y1), const(y2)]
    if fam == "three_levels":
        levels = [0.8, -0.1, -0.7, 0.8]

        def const(v):
            return lambda x: np.full((x.size, 1), v)

        return [2.5, 3.5, 4.5], [const(v) for v in levels]
    if fam == "riemann":
        h_l, h_r, v_l, v_r, x0 = p

        def side(h, v):
            return lambda x: np.column_stack(
                [np.full(x.size, h), np.full(x.size, h * v)]
            )

        return [x0], [side(h_l, v_l), side(h_r, v_r)]
    if fam == "shock_profile":
        rho_l, u_l, p_l, p_r, eps, x0 = p
        x1 = EULER_SINE_CUTOFF
        gm1 = sys.gamma - 1.0

        def conserved(rho, u, p):
            return np.column_stack([rho, rho * u, p / gm1 + 0.5 * rho * u * u])

        def left(x):
            ones = np.ones(x.size)
            return conserved(rho_l * ones, u_l * ones, p_l * ones)

        def sine(x):
            return conserved(1.0 + eps * np.sin(5.0 * x), np.zeros(x.size), np.full(x.size, p_r))

        def tail(x):
            rho = 1.0 + eps * np.sin(5.0 * x) * np.exp(-((x - x1) ** 4))
            return conserved(rho, np.zeros(x.size), np.full(x.size, p_r))

        return [x0, x1], [left, sine, tail]
    raise ValueError(f"unknown initial-condition family {fam!r}")


def instantiate_ic(
    instance: ProblemInstance, grid: Grid, n_quad: int = 4, n_panels: int = 4
) -> State:
    """Cell averages of the instance's initial data on ``grid``.

    Jumps are split exactly at their location; each smooth overlap is
    integrated by composite ``n_quad``-point Gauss-Legendre quadrature on
    ``n_panels`` equal panels, converged far past the scheme's order even
    for the steep smoothed tail of the shock-profile family.
    """
    spec = benchmark_spec(instance.benchmark)
    breaks, funcs = _pieces(instance, spec.system)
    nodes, weights = np.polynomial.legendre.leggauss(n_quad)
    faces = grid.x_lo + grid.dx * np.arange(grid.n_cells + 1)
    edges = [grid.x_lo] + list(breaks) + [grid.x_hi]
    total = np.zeros((grid.n_cells, spec.system.n_components))
    for func, lo, hi in zip(funcs, edges[:-1], edges[1:]):
        a = np.maximum(faces[:-1], lo)
        b = np.minimum(faces[1:], hi)
        cells = np.nonzero(b > a + 0.0)[0]
        if cells.size == 0:
            continue
        a, b = a[cells], b[cells]
        for p in range(n_panels):
            pa = a + (b - a) * (p / n_panels)
            pb = a + (b - a) * ((p + 1) / n_panels)
            half = 0.5 * (pb - pa)
            # quadrature points for all overlapping cells at once
            xq = (0.5 * (pa + pb))[:, None] + half[:, None] * nodes[None, :]
            vals = func(xq.reshape(-1)).reshape(cells.size, n_quad, -1)
            total[cells] += np.einsum("cqk,q->ck", vals, weights) * half[:, None]
    return State(total / grid.dx, t=0.0)


def default_dt_ratio(benchmark: str, state0: State | None = None) -> float:
    """Stepping ratio dt/dx for a run.

    The benchmark families quote their step size as a fraction of the mesh
    width; the fastest waves stay comfortably below 1/ratio for every
    sampled instance (checked against ``max_signal_speed`` in tests), and a
    mesh-independent ratio keeps the coarsest training trajectories exactly
    one window long.
    """
    return benchmark_spec(benchmark).cfl


# ---------------------------------------------------------------------------
# experiment schedule


@dataclass(frozen=True)
class RunSpec:
    instance: ProblemInstance
    n_cells: int
    scheme: str  # classical | hcfcnn | hcfcnn-f
    t_final: float
    tag: str
    dt_ratio: float | None = None  # None: benchmark default


def experiment_matrix(benchmark: str) -> list[RunSpec]:
    """Every figure and table run for one benchmark, as data."""
    spec = benchmark_spec(benchmark)
    fixed = fixed_test_instance(benchmark)
    learned = ("hcfcnn", "hcfcnn-f")
    runs: list[RunSpec] = []

    def add(instance, n, scheme, t, tag, ratio=None):
        runs.append(RunSpec(instance, n, scheme, t, tag, ratio))

    if benchmark == "burgers1":
        for n in (32, 64, 128, 256):
            for s in learned:
                add(fixed, n, s, 3.0, "refinement")
            add(fixed, n, "hcfcnn", 1.5, "mse_table")
        for n in (48, 208, 288, 320):
            for s in learned:
                add(fixed, n, s, 3.0, "mesh_transfer")
        for inst in extrapolation_instances(benchmark):
            add(inst, 256, "hcfcnn", 3.0, "ic_extrapolation")
        for ratio in (0.2, 0.3, 0.48):
            for s in learned:
                add(fixed, 256, s, 3.0, "dt_sensitivity", ratio)
        add(fixed, spec.reference_n, "classical", 3.0, "reference")
    elif benchmark == "burgers2":
        for n in (32, 64, 128, 256):
            for s in learned:
                for t in (0.5, 1.5, 6.0):
                    add(fixed, n, s, t, "refinement")
        for n in (48, 320):
            for s in learned:
                add(fixed, n, s, 6.0, "mesh_transfer")
        for ratio in (0.2, 0.3, 0.48):
            for s in learned:
                add(fixed, 256, s, 6.0, "dt_sensitivity", ratio)
        add(fixed, spec.reference_n, "classical", 6.0, "reference")
    elif benchmark == "shallow":
        for n in (64, 128, 256):
            for s in learned:
                for t in (0.5, 1.0):
                    add(fixed, n, s, t, "refinement")
            add(fixed, n, "hcfcnn", 1.0, "mse_table")
        for s in learned:
            add(fixed, 224, s, 1.0, "mesh_transfer")
        for inst in extrapolation_instances(benchmark):
            for s in learned:
                add(inst, 256, s, 1.0, "ic_extrapolation")
        add(fixed, spec.reference_n, "classical", 1.0, "reference")
    elif benchmark == "euler":
        for n in (64, 128, 256):
            for s in learned:
                for t in (0.8, 1.6):
                    add(fixed, n, s, t, "refinement")
            add(fixed, n, "hcfcnn", 1.6, "cost_table")
        add(fixed, 224, "hcfcnn", 1.6, "mesh_transfer")
        add(fixed, spec.reference_n, "classical", 1.6, "reference")
    else:
        raise ValueError(f"unknown benchmark {benchmark!r}")
    return runs

import numpy as np
import pytest

from _oracles import classical_smooth_l2_errors, empirical_order
from hyperweno.benchmarks import default_dt_ratio, fixed_test_instance, instantiate_ic
from hyperweno.grid import BoundaryCondition, State, make_grid
from hyperweno.physics import burgers
from hyperweno.schemes import ClassicalScheme, make_scheme
from hyperweno.stepper import (
    Diagnostics,
    StepDiverged,
    conservation_remainder,
    mse_and_order,
    plan_steps,
    refinement_orders,
    rollout,
    ssp_rk3_step,
)

PERIODIC = BoundaryCondition.PERIODIC


def burgers_setup(n, t_final, benchmark_time=True):
    grid = make_grid(0.0, 2 * np.pi, n)
    state0 = instantiate_ic(fixed_test_instance("burgers1"), grid)
    ratio = default_dt_ratio("burgers1", state0)
    n_steps, dt = plan_steps(t_final, ratio * grid.dx)
    return grid, state0, n_steps, dt


# ---------------------------------------------------------------------------
# single step


def test_zero_rhs_keeps_state():
    u = np.random.default_rng(0).standard_normal((10, 2))
    out, fluxes = ssp_rk3_step(u, 0.1, lambda v: (np.zeros_like(v), None))
    np.testing.assert_array_equal(out, u)
    assert fluxes is None


def test_amplification_factor_third_order():
    # u' = lambda*u with z = -0.1: growth 1 + z + z^2/2 + z^3/6
    lam, dt = -1.0, 0.1
    u = np.array([[1.0]])
    out, _ = ssp_rk3_step(u, dt, lambda v: (lam * v, None))
    z = lam * dt
    assert out[0, 0] == pytest.approx(1 + z + z**2 / 2 + z**3 / 6, abs=1e-12)


def test_step_conserves_periodic_mass():
    grid, state0, _, dt = burgers_setup(64, 1.0)
    scheme = ClassicalScheme(burgers())
    rhs = scheme.prepare(grid, PERIODIC, state0.u)
    out, _ = ssp_rk3_step(state0.u, dt, rhs)
    before = state0.u.sum() * grid.dx
    after = out.sum() * grid.dx
    assert abs(after - before) <= 1e-13 * max(abs(before), 1.0)


def test_divergence_guard_raises():
    u = np.array([[1.0]])
    with pytest.raises(StepDiverged):
        ssp_rk3_step(u, 1.0, lambda v: (1e9 * np.ones_like(v), None))
    with pytest.raises(StepDiverged):
        ssp_rk3_step(u, 1.0, lambda v: (np.full_like(v, np.nan), None))


def test_effective_flux_telescopes_every_cell():
    # u^{n+1} - u^n must equal the effective-flux difference to rounding,
    # for the classical and the learned variants alike
    grid, state0, _, dt = burgers_setup(48, 1.0)
    for kind in ("classical", "linear", "hcfcnn"):
        scheme = make_scheme(kind, burgers(), seed=4)
        rhs = scheme.prepare(grid, PERIODIC, state0.u)
        out, f_eff = ssp_rk3_step(state0.u, dt, rhs)
        update = out - state0.u
        flux_form = -(dt / grid.dx) * (f_eff[1:] - f_eff[:-1])
        scale = max(np.max(np.abs(update)), 1e-30)
        np.testing.assert_allclose(update, flux_form, atol=1e-13 * scale)


# ---------------------------------------------------------------------------
# rollout


def test_zero_step_rollout_is_single_snapshot():
    grid, state0, _, dt = burgers_setup(32, 1.0)
    record = rollout(grid, PERIODIC, ClassicalScheme(burgers()), state0, 0, dt)
    assert record.snapshots.shape[0] == 1
    assert record.boundary_flux_log.shape[0] == 0


def test_rollout_bookkeeping_and_reference_run():
    grid, state0, n_steps, dt = burgers_setup(128, 1.5)
    record = rollout(grid, PERIODIC, ClassicalScheme(burgers()), state0, n_steps, dt)
    assert not record.diverged
    assert record.n_steps == n_steps
    assert record.times[-1] == pytest.approx(1.5)
    assert record.boundary_flux_log.shape == (n_steps, 2, 1)
    np.testing.assert_allclose(np.diff(record.times), dt, rtol=1e-12)


def test_fresh_hypernetwork_matches_linear_weight_scheme():
    grid, state0, _, dt = burgers_setup(64, 1.0)
    n_steps = 50
    rec_h = rollout(grid, PERIODIC, make_scheme("hcfcnn", burgers(), seed=0), state0, n_steps, dt)
    rec_l = rollout(grid, PERIODIC, make_scheme("linear", burgers()), state0, n_steps, dt)
    assert np.max(np.abs(rec_h.snapshots - rec_l.snapshots)) < 1e-12


def test_diverged_rollout_returns_partial_record():
    grid, state0, _, dt = burgers_setup(32, 1.0)

    class Explosive:
        def prepare(self, grid, bc, u0):
            return lambda u: (np.full_like(u, 1e10), None)

    record = rollout(grid, PERIODIC, Explosive(), state0, 10, dt)
    assert record.diverged
    assert record.snapshots.shape[0] < 11


def test_odd_symmetry_preserved():
    # odd-symmetric data on a symmetric grid stays odd under the classical
    # scheme: reflecting cells and negating reproduces the state
    grid = make_grid(0.0, 2 * np.pi, 64)
    u0 = np.sin(grid.x_mid)[:, None]
    # exact cell averages of sin keep the odd symmetry exactly
    faces = grid.x_lo + grid.dx * np.arange(grid.n_cells + 1)
    u0 = ((np.cos(faces[:-1]) - np.cos(faces[1:])) / grid.dx)[:, None]
    dt = 0.4 * grid.dx
    record = rollout(grid, PERIODIC, ClassicalScheme(burgers()), State(u0), 10, dt)
    final = record.snapshots[-1][:, 0]
    np.testing.assert_allclose(final, -final[::-1], atol=1e-10)


# ---------------------------------------------------------------------------
# conservation remainder


def test_remainder_starts_at_zero():
    grid, state0, n_steps, dt = burgers_setup(32, 1.0)
    record = rollout(grid, PERIODIC, ClassicalScheme(burgers()), state0, n_steps, dt)
    assert conservation_remainder(record)[0] == 0.0


@pytest.mark.parametrize("n", [32, 64, 128, 256])
def test_periodic_remainder_at_machine_precision(n):
    grid, state0, n_steps, dt = burgers_setup(n, 3.0)
    record = rollout(grid, PERIODIC, ClassicalScheme(burgers()), state0, n_steps, dt)
    mass_scale = np.max(np.abs(record.snapshots.sum(axis=1) * grid.dx))
    assert conservation_remainder(record).max() <= 1e-12 * mass_scale


def test_noflux_shallow_remainder_stays_small():
    from hyperweno.benchmarks import benchmark_spec

    spec = benchmark_spec("shallow")
    grid = make_grid(spec.x_lo, spec.x_hi, 64)
    state0 = instantiate_ic(fixed_test_instance("shallow"), grid)
    ratio = default_dt_ratio("shallow", state0)
    n_steps, dt = plan_steps(1.0, ratio * grid.dx)
    record = rollout(grid, spec.bc, ClassicalScheme(spec.system), state0, n_steps, dt)
    for comp in (0, 1):
        c = conservation_remainder(record, comp)
        mass_scale = np.max(np.abs(record.snapshots[:, :, comp].sum(axis=1) * grid.dx))
        assert np.all(np.isfinite(c))
        assert c.max() <= 1e-12 * max(mass_scale, 1.0)


# ---------------------------------------------------------------------------
# refinement arithmetic


def test_refinement_orders_reproduce_tabulated_single_shock_rates():
    orders = refinement_orders([1.2034e-2, 5.5819e-3, 1.5290e-3, 2.9309e-4])
    np.testing.assert_allclose(orders, [0.55, 0.93, 1.19], atol=0.01)


def test_refinement_orders_reproduce_tabulated_shallow_rates():
    orders = refinement_orders([5.473e-4, 1.830e-4, 5.857e-5])
    np.testing.assert_allclose(orders, [0.79, 0.82], atol=0.01)


def test_mse_and_order_identical_fields():
    fields = [np.ones((8, 1)), np.ones((16, 1))]
    diag = mse_and_order(fields, [f.copy() for f in fields])
    np.testing.assert_array_equal(diag.mse, 0.0)


def test_mse_and_order_validates_lengths():
    with pytest.raises(ValueError):
        mse_and_order([np.ones(4)], [])
    with pytest.raises(ValueError):
        mse_and_order([np.ones(4)], [np.ones(5)])


def test_refinement_orders_reject_nonpositive():
    with pytest.raises(ValueError):
        refinement_orders([1.0, 0.0])


def test_plan_steps_lands_exactly():
    n, dt = plan_steps(1.5, 0.076)
    assert n * dt == pytest.approx(1.5, abs=1e-15)
    assert dt <= 0.076 + 1e-15
    with pytest.raises(ValueError):
        plan_steps(0.0, 0.1)


# ---------------------------------------------------------------------------
# classical order (property)


def test_classical_scheme_reaches_fourth_order_l2():
    meshes = [32, 64, 128]
    errors = classical_smooth_l2_errors(meshes, t_final=0.5)
    assert empirical_order(meshes, errors) >= 4.0

import math

import numpy as np
import pytest
from scipy.optimize import brentq

import chvi.dynamics as dynamics
from chvi.dynamics import (
    ConstraintViolationError,
    EnergyBoundWarning,
    SimConfig,
    SimState,
    StepFailure,
    energy,
    monitor,
    regularize_initial_data,
    simulate,
    step,
)
from chvi.potential import PotentialKind, PotentialSpec
from chvi.spectral import (
    Grid,
    SpectralField,
    eigenvalues,
    to_values,
    zero_field,
)
from conftest import mode_field


def make_cfg(grid, potential, **kw):
    args = dict(alpha=1.0, delta=1.0, lam=0.0, eps=0.1, T=0.02, dt=1e-3,
                potential=potential, grid=grid)
    args.update(kw)
    return SimConfig(**args)


def modal_reference(alpha, delta, mu, T, n_samples, u0=1.0, v0=0.0, substeps=2000):
    """Dense RK4 oracle for alpha u'' + (1 + delta mu) u' + mu^2 u = 0."""
    h = T / (n_samples * substeps)

    def f(y):
        return np.array([y[1], (-(1.0 + delta * mu) * y[1] - mu**2 * y[0]) / alpha])

    y = np.array([u0, v0])
    out = [u0]
    for _ in range(n_samples):
        for _ in range(substeps):
            k1 = f(y)
            k2 = f(y + 0.5 * h * k1)
            k3 = f(y + 0.5 * h * k2)
            k4 = f(y + h * k3)
            y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        out.append(y[0])
    return np.array(out)


class TestRegularizeInitialData:
    def test_diagonal_resolvent_formula(self, grid31, log_pot):
        u0 = mode_field(grid31, 0.4)
        u1 = zero_field(grid31)
        u0e, u1e = regularize_initial_data(u0, u1, 0.1)
        damp = 1.0 / (1.0 + 0.1 * math.pi**2)
        assert u0e.coeffs[0] == pytest.approx(u0.coeffs[0] * damp, rel=1e-15)
        assert np.all(u1e.coeffs == 0.0)

    def test_zero_data_stays_zero(self, grid31):
        u0e, u1e = regularize_initial_data(zero_field(grid31), zero_field(grid31), 0.05)
        assert np.all(u0e.coeffs == 0.0) and np.all(u1e.coeffs == 0.0)

    def test_constraint_violation(self, grid31):
        with pytest.raises(ConstraintViolationError):
            regularize_initial_data(mode_field(grid31, 1.2), zero_field(grid31), 0.1)

    def test_energy_bound_holds_for_construction(self, log_pot):
        # the mollifier must not raise the potential energy of the profile
        g = Grid(1, 63)
        u0 = mode_field(g, 0.9)
        from chvi.potential import j_value
        from chvi.spectral import trapezoid_integral
        from chvi.potential import NonlinearTerm

        j_raw = trapezoid_integral(np.asarray(j_value(log_pot, to_values(u0))), g)
        for eps in (0.1, 0.01):
            u0e, _ = regularize_initial_data(u0, zero_field(g), eps, log_pot)
            jeps = trapezoid_integral(NonlinearTerm(log_pot, eps).density(to_values(u0e)), g)
            assert jeps <= j_raw + 1e-12

    def test_v_convergence_monotone(self, grid31):
        from chvi.spectral import norm_V, norm_H

        u0 = mode_field(grid31, 0.99)
        u1 = mode_field(grid31, 0.3, k=2)
        v_err, h_err = [], []
        for eps in (0.1, 0.05, 0.025, 0.0125):
            u0e, u1e = regularize_initial_data(u0, u1, eps)
            v_err.append(norm_V(SpectralField(grid31, u0e.coeffs - u0.coeffs)))
            h_err.append(norm_H(SpectralField(grid31, u1e.coeffs - u1.coeffs)))
        assert all(a > b for a, b in zip(v_err, v_err[1:]))
        assert all(a > b for a, b in zip(h_err, h_err[1:]))

    def test_warns_if_energy_bound_violated(self, grid31, monkeypatch, log_pot):
        # force a violation by faking a huge envelope to check the flagging path
        from chvi import dynamics as dyn

        class Fake:
            def __init__(self, *a):
                pass

            def density(self, values):
                return np.full_like(values, 1e6)

        monkeypatch.setattr(dyn, "NonlinearTerm", Fake)
        with pytest.warns(EnergyBoundWarning):
            regularize_initial_data(mode_field(grid31, 0.5), zero_field(grid31), 0.1, log_pot)


class TestStep:
    def test_zero_state_fixed_point(self, grid31, log_pot):
        cfg = make_cfg(grid31, log_pot)
        st = SimState(zero_field(grid31), zero_field(grid31), 0.0, 0, 0.0)
        st2 = step(st, cfg)
        assert np.all(st2.u.coeffs == 0.0)
        assert np.all(st2.v.coeffs == 0.0)
        assert st2.step == 1
        assert st2.t == pytest.approx(cfg.dt)
        assert st2.dissipation_integral == 0.0

    def test_linear_single_mode_matches_recurrence(self, grid31):
        # with the nonlinearity off the scheme must solve the modal recurrence
        pot = PotentialSpec(PotentialKind.DOUBLE_WELL, coeff=0.0)
        cfg = make_cfg(grid31, pot, dt=1e-3, T=0.02)
        rec = simulate(cfg, mode_field(grid31, 1.0), field_stride=1, regularize=False)
        mu = math.pi**2
        u, v = 1.0 / math.sqrt(2.0), 0.0
        for _ in range(20):
            vp = (cfg.alpha * v - cfg.dt * mu**2 * u) / (
                cfg.alpha + cfg.dt * (1 + cfg.delta * mu) + cfg.dt**2 * mu**2
            )
            u += cfg.dt * vp
            v = vp
        assert rec.stored_u[-1][0] == pytest.approx(u, abs=1e-13)
        assert np.max(np.abs(rec.stored_u[-1][1:])) <= 1e-14

    def test_linear_first_order_convergence(self, grid31):
        pot = PotentialSpec(PotentialKind.DOUBLE_WELL, coeff=0.0)
        mu = math.pi**2
        errs = []
        dts = (1e-2, 5e-3, 2.5e-3)
        for dt in dts:
            cfg = make_cfg(grid31, pot, dt=dt, T=1.0)
            rec = simulate(cfg, mode_field(grid31, 1.0), field_stride=1, regularize=False)
            ref = modal_reference(1.0, 1.0, mu, 1.0, int(rec.step[-1]), u0=1 / math.sqrt(2))
            num = np.array([c[0] for c in rec.stored_u])
            errs.append(abs(num[-1] - ref[-1]) / np.abs(ref).max())
        orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all(orders > 0.8) and np.all(orders < 1.2)

    def test_newton_failure_carries_residual(self, grid31, log_pot):
        cfg = make_cfg(grid31, log_pot, newton_max_iter=1, eps=0.01)
        u0 = mode_field(grid31, 0.9)
        v0 = mode_field(grid31, 30.0)
        with pytest.raises(StepFailure) as exc:
            dynamics._substep(u0.coeffs, v0.coeffs, cfg.dt, cfg)
        assert exc.value.residual > 0.0

    def test_halving_ladder_retries(self, grid31, log_pot, monkeypatch):
        cfg = make_cfg(grid31, log_pot)
        calls = []
        orig = dynamics._substep

        def flaky(u, v, dt, c):
            calls.append(dt)
            if dt == cfg.dt:
                raise StepFailure(1.0, 0)
            return orig(u, v, dt, c)

        monkeypatch.setattr(dynamics, "_substep", flaky)
        st = SimState(mode_field(grid31, 0.5), zero_field(grid31), 0.0, 0, 0.0)
        st2 = step(st, cfg)
        assert st2.step == 1
        assert st2.t == pytest.approx(cfg.dt)
        # one failed full step, then two half steps
        assert calls == [cfg.dt, cfg.dt / 2, cfg.dt / 2]

    def test_halving_ladder_exhausts(self, grid31, log_pot, monkeypatch):
        cfg = make_cfg(grid31, log_pot)

        def always_fail(u, v, dt, c):
            raise StepFailure(1.0, 0)

        monkeypatch.setattr(dynamics, "_substep", always_fail)
        st = SimState(mode_field(grid31, 0.5), zero_field(grid31), 0.0, 0, 0.0)
        with pytest.raises(StepFailure):
            step(st, cfg)


class TestEnergyLedger:
    def test_zero_state(self, grid31, log_pot):
        cfg = make_cfg(grid31, log_pot)
        led = energy(SimState(zero_field(grid31), zero_field(grid31), 0.0, 0, 0.0), cfg)
        assert (led.kinetic, led.dirichlet, led.potential, led.concave, led.total) == (
            0.0, 0.0, 0.0, 0.0, 0.0,
        )

    def test_obstacle_inside_constraint_has_no_potential(self, grid31, obstacle_pot):
        cfg = make_cfg(grid31, obstacle_pot)
        u = mode_field(grid31, 0.8)
        led = energy(SimState(u, zero_field(grid31), 0.0, 0, 0.0), cfg)
        assert led.potential == 0.0
        from chvi.spectral import norm_H

        assert led.total == pytest.approx(0.5 * math.pi**2 * norm_H(u) ** 2, rel=1e-12)

    def test_log_potential_matches_fine_quadrature_oracle(self, grid31, log_pot):
        # independent oracle: analytic profile on a fine grid, resolvent by brentq
        eps = 0.1
        cfg = make_cfg(grid31, log_pot, eps=eps)
        u = mode_field(grid31, 0.5)
        led = energy(SimState(u, zero_field(grid31), 0.0, 0, 0.0), cfg)

        def envelope(r):
            if r == 0.0:
                return 0.0
            x = brentq(
                lambda x: x + eps * math.log((1 + x) / (1 - x)) - r,
                -1 + 1e-15, 1 - 1e-15, xtol=1e-15,
            )
            j = (1 - x) * math.log(1 - x) + (1 + x) * math.log(1 + x)
            return j + (r - x) ** 2 / (2 * eps)

        xs = np.linspace(0.0, 1.0, 4001)
        vals = np.array([envelope(0.5 * math.sin(math.pi * x)) for x in xs])
        oracle = np.trapezoid(vals, xs) if hasattr(np, "trapezoid") else np.trapz(vals, xs)
        assert led.potential == pytest.approx(float(oracle), rel=1e-6)

    @pytest.mark.parametrize("lam", [0.0, 2.0])
    def test_discrete_energy_inequality(self, grid31, lam):
        pot = PotentialSpec(PotentialKind.LOGARITHMIC, lam=lam)
        cfg = make_cfg(grid31, pot, lam=lam, eps=0.05, T=0.1)
        rec = simulate(cfg, mode_field(grid31, 0.5))
        tol = 1e-8 * (1.0 + rec.total[0])
        assert np.all(rec.ineq_residual <= tol)
        assert np.all(rec.energy_defect[1:] >= -tol)

    def test_dissipation_nondecreasing(self, grid31, log_pot):
        cfg = make_cfg(grid31, log_pot, T=0.05)
        rec = simulate(cfg, mode_field(grid31, 0.5))
        assert np.all(np.diff(rec.dissipation_integral) >= 0.0)

    def test_defect_integral_halves_with_dt(self, grid31, log_pot):
        totals = []
        for dt in (1e-3, 5e-4):
            cfg = make_cfg(grid31, log_pot, eps=0.05, T=0.2, dt=dt)
            rec = simulate(cfg, mode_field(grid31, 0.5))
            assert np.all(rec.energy_defect[1:] >= 0.0)
            totals.append(rec.energy_defect[1:].sum())
        assert totals[0] / totals[1] == pytest.approx(2.0, rel=0.2)


class TestSimulateAndMonitor:
    def test_determinism_bitwise(self, grid31, log_pot):
        cfg = make_cfg(grid31, log_pot, T=0.05)
        a = simulate(cfg, mode_field(grid31, 0.5), field_stride=10)
        b = simulate(cfg, mode_field(grid31, 0.5), field_stride=10)
        assert np.array_equal(a.total, b.total)
        assert np.array_equal(a.stored_u[-1], b.stored_u[-1])
        assert a.final_state.t == b.final_state.t

    def test_zero_run_monitors(self, grid31, log_pot):
        cfg = make_cfg(grid31, log_pot, T=0.01)
        rec = simulate(cfg, zero_field(grid31))
        rep = monitor(rec)
        assert all(v == 0.0 for v in rep.as_dict().values())

    def test_linear_run_has_no_nonlinearity_mass(self, grid31):
        pot = PotentialSpec(PotentialKind.DOUBLE_WELL, coeff=0.0)
        cfg = make_cfg(grid31, pot, T=0.01)
        rec = simulate(cfg, mode_field(grid31, 0.5), regularize=False)
        rep = monitor(rec)
        assert rep.L1L1_of_beta == 0.0
        assert rep.Vprime_dual_of_beta_proxy == 0.0
        assert rep.sup_V_of_u > 0.0

    def test_monitors_finite_on_log_run(self, grid31, log_pot):
        cfg = make_cfg(grid31, log_pot, T=0.05)
        rec = simulate(cfg, mode_field(grid31, 0.5))
        rep = monitor(rec)
        for name, val in rep.as_dict().items():
            assert np.isfinite(val), name
        assert rep.sup_L1_of_jeps == pytest.approx(rec.potential.max())

    def test_resume_from_state_continues_exactly(self, grid31, log_pot):
        cfg = make_cfg(grid31, log_pot, T=0.02)
        full = simulate(cfg, mode_field(grid31, 0.5), field_stride=5)
        # rebuild the state at step 10 and continue
        i = full.stored_steps.index(10)
        mid = SimState(
            u=SpectralField(grid31, full.stored_u[i].copy()),
            v=SpectralField(grid31, full.stored_v[i].copy()),
            t=float(full.t[10]),
            step=10,
            dissipation_integral=float(full.dissipation_integral[10]),
        )
        tail = simulate(cfg, None, start_state=mid, field_stride=5)
        assert np.array_equal(tail.stored_u[-1], full.stored_u[-1])
        assert tail.total[-1] == full.total[-1]
        assert tail.t[-1] == full.t[-1]

    def test_dealias_run_completes_and_decays(self, grid31, log_pot):
        cfg = make_cfg(grid31, log_pot, T=0.02, dealias=True)
        rec = simulate(cfg, mode_field(grid31, 0.5))
        assert rec.total[-1] < rec.total[0]

    def test_2d_run_energy_decays(self):
        g = Grid(2, 8)
        pot = PotentialSpec(PotentialKind.LOGARITHMIC)
        cfg = make_cfg(g, pot, T=5e-3, dt=1e-3)
        rec = simulate(cfg, mode_field(g, 0.5))
        assert rec.total[-1] < rec.total[0]
        assert np.all(rec.ineq_residual <= 1e-8 * (1 + rec.total[0]))

    def test_config_validation(self, grid31, log_pot):
        with pytest.raises(ValueError):
            make_cfg(grid31, log_pot, alpha=0.0)
        with pytest.raises(ValueError):
            make_cfg(grid31, log_pot, delta=0.0)
        with pytest.raises(ValueError):
            make_cfg(grid31, log_pot, eps=1.0)
        with pytest.raises(ValueError):
            make_cfg(grid31, log_pot, dt=0.5, T=0.2)
        with pytest.raises(ValueError):
            make_cfg(grid31, log_pot, T=0.0205).n_steps()  # not a dt multiple

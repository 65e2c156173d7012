import math

import numpy as np
import pytest

from funneltrap import (
    ParameterError,
    bistable_region,
    classify_stability,
    critical_drive,
    hysteresis_sweep,
    response_residual,
    start_tracker,
    steady_state_roots,
    track_branch,
    track_series,
)

import oracles

TWO_PI = 2.0 * math.pi


class TestSteadyStateRoots:
    def test_linear_limit_is_lorentzian(self, derived, trap):
        gamma = trap.damping
        f0 = derived.f0_reduced
        for delta in (-TWO_PI * 5e3, 0.0, TWO_PI * 1e3):
            sols = steady_state_roots(delta, f0, gamma, 0.0)
            assert len(sols) == 1
            assert sols[0].u == pytest.approx(
                oracles.lorentzian_u(delta, f0, gamma), rel=1e-12)
            assert sols[0].stable

    def test_zero_drive(self, derived, trap):
        sols = steady_state_roots(-TWO_PI * 5e3, 0.0, trap.damping, derived.xi)
        assert len(sols) == 1
        assert sols[0].u == 0.0
        assert sols[0].stable

    def test_three_roots_at_5khz(self, derived, trap):
        delta = -TWO_PI * 5e3
        sols = steady_state_roots(delta, derived.f0_reduced, trap.damping,
                                  derived.xi)
        assert len(sols) == 3
        assert [s.stability for s in sols] == ["stable", "unstable", "stable"]
        us = [s.u for s in sols]
        assert us == sorted(us)
        ref = oracles.scan_roots(delta, derived.f0_reduced, trap.damping,
                                 derived.xi)
        assert len(ref) == 3
        for got, want in zip(us, ref):
            assert got == pytest.approx(want, rel=1e-6)

    def test_amplitude_is_sqrt_u(self, derived, trap):
        sols = steady_state_roots(-TWO_PI * 5e3, derived.f0_reduced,
                                  trap.damping, derived.xi)
        for s in sols:
            assert s.amplitude == pytest.approx(math.sqrt(s.u), rel=1e-12)

    def test_deep_detuning_upper_branch(self, derived, trap):
        delta = -TWO_PI * 20e3
        sols = steady_state_roots(delta, derived.f0_reduced, trap.damping,
                                  derived.xi)
        upper = max(s.u for s in sols)
        assert math.sqrt(upper) == pytest.approx(
            math.sqrt(-delta / derived.xi), rel=0.05)

    def test_residuals_and_odd_count(self, derived, trap):
        for delta in np.linspace(-TWO_PI * 40e3, TWO_PI * 5e3, 61):
            sols = steady_state_roots(delta, derived.f0_reduced, trap.damping,
                                      derived.xi)
            assert len(sols) in (1, 3)
            for s in sols:
                res = response_residual(s.u, delta, derived.f0_reduced,
                                        trap.damping, derived.xi)
                assert abs(res) < 1e-9 * derived.f0_reduced ** 2

    def test_vieta(self, derived, trap):
        delta = -TWO_PI * 5e3
        f0, gamma, xi = derived.f0_reduced, trap.damping, derived.xi
        us = [s.u for s in steady_state_roots(delta, f0, gamma, xi)]
        assert len(us) == 3
        s1 = us[0] + us[1] + us[2]
        s2 = us[0] * us[1] + us[0] * us[2] + us[1] * us[2]
        s3 = us[0] * us[1] * us[2]
        assert s1 == pytest.approx(-2.0 * delta / xi, rel=1e-8)
        assert s2 == pytest.approx((delta ** 2 + gamma ** 2 / 4) / xi ** 2,
                                   rel=1e-8)
        assert s3 == pytest.approx(f0 ** 2 / xi ** 2, rel=1e-8)


class TestClassifyStability:
    def test_linear_eigenvalues(self, derived, trap):
        gamma = trap.damping
        u = oracles.lorentzian_u(-TWO_PI * 2e3, derived.f0_reduced, gamma)
        label, eigs = classify_stability(u, -TWO_PI * 2e3, derived.f0_reduced,
                                         gamma, 0.0)
        assert label == "stable"
        for e in eigs:
            assert complex(e).real == pytest.approx(-gamma / 2.0, rel=1e-9)

    def test_non_root_rejected(self, derived, trap):
        with pytest.raises(ParameterError):
            classify_stability(1e-9, -TWO_PI * 5e3, derived.f0_reduced,
                               trap.damping, derived.xi)

    def test_middle_and_outer_roots(self, derived, trap):
        delta = -TWO_PI * 5e3
        sols = steady_state_roots(delta, derived.f0_reduced, trap.damping,
                                  derived.xi)
        draws = [(s.u, delta, derived.f0_reduced, trap.damping, derived.xi)
                 for s in sols]
        want = oracles.perturbation_stable(draws)
        assert list(want) == [True, False, True]
        assert [s.stable for s in sols] == list(want)

    def test_randomized_draws_match_perturbation_oracle(self):
        rng = np.random.default_rng(2024)
        draws = []
        labels = []
        for _ in range(25):
            (delta, f0, gamma, xi), _ = oracles.draw_parameters(rng)
            for s in steady_state_roots(delta, f0, gamma, xi):
                draws.append((s.u, delta, f0, gamma, xi))
                labels.append(s.stable)
        want = oracles.perturbation_stable(draws)
        assert labels == list(want)


class TestBistableRegion:
    def test_weak_drive_no_region(self, derived, trap):
        reg = bistable_region(1e-4, trap.damping, derived.xi)
        assert not reg.exists

    def test_critical_drive_closed_form(self, derived, trap):
        assert critical_drive(trap.damping, derived.xi) == pytest.approx(
            oracles.critical_drive_closed(trap.damping, derived.xi), rel=1e-12)

    def test_window_collapses_at_critical(self, derived, trap):
        gamma, xi = trap.damping, derived.xi
        f0c = critical_drive(gamma, xi)
        assert not bistable_region(f0c * 0.999, gamma, xi).exists
        reg = bistable_region(f0c * 1.01, gamma, xi)
        assert reg.exists
        assert reg.delta_upper - reg.delta_lower < 0.05 * gamma
        assert reg.center == pytest.approx(oracles.collapse_detuning(gamma),
                                           abs=0.05 * gamma)
        # a window far below the bisection resolution is still reported
        thin = bistable_region(f0c * 1.001, gamma, xi)
        assert thin.exists
        assert thin.delta_lower < thin.delta_upper
        assert thin.delta_upper - thin.delta_lower < 5e-3 * gamma

    def test_strong_drive_window_vs_scan(self, derived, trap):
        gamma, xi = trap.damping, derived.xi
        reg = bistable_region(derived.f0_reduced, gamma, xi)
        assert reg.exists
        assert reg.delta_upper - reg.delta_lower > 10.0 * gamma
        # brute-force cross-check of both boundaries
        lo, hi = oracles.window_by_scan(
            derived.f0_reduced, gamma, xi,
            reg.delta_lower - 5 * gamma, reg.delta_upper + 0.4 * gamma)
        assert reg.delta_lower == pytest.approx(lo, abs=2e-3 * gamma)
        assert reg.delta_upper == pytest.approx(hi, abs=2e-3 * gamma)

    def test_root_count_against_boundaries(self, derived, trap):
        gamma, xi = trap.damping, derived.xi
        f0 = derived.f0_reduced
        reg = bistable_region(f0, gamma, xi)
        eps = 0.05 * gamma
        for delta, n in ((reg.delta_lower - eps, 1), (reg.delta_lower + eps, 3),
                         (reg.delta_upper - eps, 3), (reg.delta_upper + eps, 1)):
            assert len(steady_state_roots(delta, f0, gamma, xi)) == n

    def test_contains(self, derived, trap):
        reg = bistable_region(derived.f0_reduced, trap.damping, derived.xi)
        assert reg.center in reg
        assert (reg.delta_upper + trap.damping) not in reg


class TestBranchTracking:
    def test_single_root_region_continuous(self, derived, trap):
        gamma, xi, f0 = trap.damping, derived.xi, derived.f0_reduced
        tr = start_tracker(TWO_PI * 2e3, f0, gamma, xi)
        u_prev = tr.current_u
        for delta in TWO_PI * np.linspace(2e3, 4e3, 40)[1:]:
            track_branch(tr, delta)
            assert abs(tr.current_u - u_prev) < 0.2 * u_prev
            u_prev = tr.current_u
        assert tr.jump_log == []

    def test_descending_jump_at_lower_boundary(self, derived, trap):
        gamma, xi, f0 = trap.damping, derived.xi, derived.f0_reduced
        reg = bistable_region(f0, gamma, xi)
        step = gamma / 5.0
        start = reg.delta_upper + 10 * gamma
        tr = start_tracker(start, f0, gamma, xi)
        assert tr.branch_label == "upper"
        delta = start
        while delta > reg.delta_lower - 10 * gamma:
            delta -= step
            track_branch(tr, delta)
        assert len(tr.jump_log) == 1
        jump_delta = tr.jump_log[0][0]
        assert abs(jump_delta - reg.delta_lower) <= step

    def test_ascending_jump_at_upper_boundary(self, derived, trap):
        gamma, xi, f0 = trap.damping, derived.xi, derived.f0_reduced
        reg = bistable_region(f0, gamma, xi)
        step = gamma / 5.0
        delta = reg.delta_lower - 10 * gamma
        tr = start_tracker(delta, f0, gamma, xi)
        assert tr.branch_label == "lower"
        while delta < reg.delta_upper + 10 * gamma:
            delta += step
            track_branch(tr, delta)
        assert len(tr.jump_log) == 1
        assert abs(tr.jump_log[0][0] - reg.delta_upper) <= step

    def test_idempotent_repeat(self, derived, trap):
        gamma, xi, f0 = trap.damping, derived.xi, derived.f0_reduced
        tr = start_tracker(-TWO_PI * 5e3, f0, gamma, xi)
        u1 = tr.current_u
        for _ in range(5):
            track_branch(tr, -TWO_PI * 5e3)
        assert tr.current_u == u1
        assert tr.jump_log == []

    def test_track_series_matches_stepwise(self, derived, trap):
        gamma, xi, f0 = trap.damping, derived.xi, derived.f0_reduced
        reg = bistable_region(f0, gamma, xi)
        deltas = np.linspace(reg.delta_upper + 5 * gamma,
                             reg.delta_lower - 5 * gamma, 400)
        u_vec, labels, jumps = track_series(deltas, f0, gamma, xi)
        tr = start_tracker(deltas[0], f0, gamma, xi)
        for i, delta in enumerate(deltas):
            if i:
                track_branch(tr, delta)
            assert u_vec[i] == pytest.approx(tr.current_u, rel=1e-9)
        assert len(jumps) == len(tr.jump_log) == 1


class TestHysteresisSweep:
    def test_weak_drive_symmetric_lorentzian(self, trap):
        from funneltrap import DriveConfig, derive_params
        # 0.05 zN: the cubic term shifts the resonance by well under a
        # linewidth, so the trace must sit on the bare Lorentzian
        d = DriveConfig(f0_force=0.05e-21, omega_0=trap.omega_x)
        der = derive_params(trap, d)
        assert der.f0_reduced < critical_drive(trap.damping, der.xi)
        up = hysteresis_sweep(trap, d, -TWO_PI * 3e3, TWO_PI * 3e3,
                              TWO_PI * 20.0)
        down = hysteresis_sweep(trap, d, TWO_PI * 3e3, -TWO_PI * 3e3,
                                -TWO_PI * 20.0)
        assert not up.jumped.any() and not down.jumped.any()
        np.testing.assert_allclose(up.u, down.u[::-1], rtol=1e-9)
        np.testing.assert_allclose(up.u, up.u[::-1], rtol=0.01)  # symmetric
        want = oracles.lorentzian_u(up.detunings, der.f0_reduced, trap.damping)
        np.testing.assert_allclose(up.u, want, rtol=0.01)

    def test_below_critical_no_jumps_either_direction(self, trap):
        from funneltrap import DriveConfig
        d = DriveConfig(f0_force=0.5e-21, omega_0=trap.omega_x)
        up = hysteresis_sweep(trap, d, -TWO_PI * 3e3, TWO_PI * 3e3,
                              TWO_PI * 20.0)
        down = hysteresis_sweep(trap, d, TWO_PI * 3e3, -TWO_PI * 3e3,
                                -TWO_PI * 20.0)
        assert not up.jumped.any() and not down.jumped.any()
        np.testing.assert_allclose(up.u, down.u[::-1], rtol=1e-9)

    def test_strong_drive_jumps_negative_side(self, trap, strong_drive):
        up = hysteresis_sweep(trap, strong_drive, -TWO_PI * 40e3, 0.0,
                              TWO_PI * 50.0)
        down = hysteresis_sweep(trap, strong_drive, 0.0, -TWO_PI * 40e3,
                                -TWO_PI * 50.0)
        for rec in (up, down):
            assert rec.jump_detunings.size == 1
            assert (rec.jump_detunings < 0).all()
        # hysteresis: the two directions jump at different detunings
        assert up.jump_detunings[0] > down.jump_detunings[0]

    def test_width_grows_with_drive(self, trap, derived):
        gamma, xi = trap.damping, derived.xi
        f0c = critical_drive(gamma, xi)
        widths = []
        for scale in (1.5, 3.0, 6.0, 10.0, 13.0):
            reg = bistable_region(scale * f0c, gamma, xi)
            assert reg.exists
            widths.append(reg.delta_upper - reg.delta_lower)
        assert all(b > a for a, b in zip(widths, widths[1:]))

    def test_step_validation(self, trap, strong_drive):
        with pytest.raises(ParameterError):
            hysteresis_sweep(trap, strong_drive, 0.0, -TWO_PI * 1e3,
                             TWO_PI * 10.0)   # sign mismatch
        with pytest.raises(ParameterError):
            hysteresis_sweep(trap, strong_drive, 0.0, -TWO_PI * 1e3,
                             -trap.damping)   # too coarse

    def test_csv_columns(self, trap, strong_drive, tmp_path):
        rec = hysteresis_sweep(trap, strong_drive, -TWO_PI * 1e3, 0.0,
                               TWO_PI * 50.0)
        path = tmp_path / "sweep.csv"
        rec.write_csv(path)
        lines = path.read_text().splitlines()
        header = [ln for ln in lines if not ln.startswith("#")][0]
        assert header == "detuning_hz,u_m2,amplitude_um,branch,jumped,z0_um"
        assert any(ln.startswith("#") for ln in lines)

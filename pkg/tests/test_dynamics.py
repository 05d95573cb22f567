"""Reduction SDE integration: steps, trajectories, drift calibration, noise."""

import numpy as np
import pytest

from qreduce import (
    ConfigurationError,
    InsufficientDataError,
    Observable,
    Ray,
    SdeConfig,
    ValidationError,
    build_epr_hamiltonian,
    FilterCoupling,
    eigensystem,
    expectation,
    reduction_step,
    simulate_trajectory,
    singlet_state,
    step_normals,
    unitary_evolve,
    variance,
    variance_drift_estimate,
)

TWO_LEVEL = Observable(np.diag([0.0, 1.0]))
BALANCED = np.array([1.0, 1.0]) / np.sqrt(2.0)


class TestSdeConfig:
    def test_validation(self):
        with pytest.raises(ValidationError):
            SdeConfig(sigma=-1.0, dt=1e-3, t_max=1.0)
        with pytest.raises(ValidationError):
            SdeConfig(sigma=1.0, dt=0.0, t_max=1.0)
        with pytest.raises(ValidationError):
            SdeConfig(sigma=1.0, dt=1e-3, t_max=-1.0)
        with pytest.raises(ValidationError):
            SdeConfig(sigma=1.0, dt=1e-3, t_max=1.0, collapse_variance_tol=0.0)
        with pytest.raises(ValidationError):
            SdeConfig(sigma=1.0, dt=1e-3, t_max=1.0, seed=-1)
        with pytest.raises(ValidationError):
            SdeConfig(sigma=1.0, dt=1e-3, t_max=1.0, record_stride=0)

    def test_stability_guard(self):
        H = Observable(np.diag([0.0, 10.0]))
        cfg = SdeConfig(sigma=1.0, dt=1e-2, t_max=1.0)  # sigma^2 ||H||^2 dt = 1
        with pytest.raises(ConfigurationError):
            reduction_step(H, [1, 0], cfg, 0.0)
        with pytest.raises(ConfigurationError):
            simulate_trajectory(H, BALANCED, cfg)


class TestStepNormals:
    def test_prefix_stability(self):
        a = step_normals(123, 7, 5)
        b = step_normals(123, 7, 50)
        np.testing.assert_array_equal(a, b[:5])

    def test_streams_differ_by_seed_and_step(self):
        base = step_normals(1, 0, 8)
        assert not np.array_equal(base, step_normals(2, 0, 8))
        assert not np.array_equal(base, step_normals(1, 1, 8))

    def test_reproducible(self):
        np.testing.assert_array_equal(step_normals(9, 3, 16), step_normals(9, 3, 16))


class TestUnitaryEvolve:
    def test_zero_time_is_identity(self):
        psi = unitary_evolve(TWO_LEVEL, BALANCED, 0.0)
        np.testing.assert_allclose(psi.amplitudes, BALANCED, atol=1e-14)

    def test_eigenvector_moves_only_in_phase(self):
        H = Observable(np.diag([1.0, 3.0]))
        for t in (0.1, 1.7, 12.0):
            out = unitary_evolve(H, [0, 1], t)
            assert Ray(out.amplitudes).approx_eq(Ray([0, 1]), tol=1e-12)

    def test_half_period_flips_relative_sign(self):
        out = unitary_evolve(TWO_LEVEL, BALANCED, np.pi)
        assert Ray(out.amplitudes).approx_eq(Ray(np.array([1.0, -1.0])), tol=1e-12)

    def test_norm_preserved(self):
        rng = np.random.default_rng(107)
        a = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
        H = Observable((a + a.conj().T) / 2)
        z = rng.normal(size=5) + 1j * rng.normal(size=5)
        out = unitary_evolve(H, z, 2.3)
        assert np.linalg.norm(out.amplitudes) == pytest.approx(
            np.linalg.norm(z), rel=1e-12
        )

    def test_nonfinite_time_rejected(self):
        with pytest.raises(ValidationError):
            unitary_evolve(TWO_LEVEL, BALANCED, np.inf)


class TestReductionStep:
    CFG = SdeConfig(sigma=1.0, dt=1e-4, t_max=1.0)

    def test_eigenvector_is_fixed_point(self):
        for dw in (0.0, 0.02, -0.02):
            out = reduction_step(TWO_LEVEL, [0.0, 1.0], self.CFG, dw)
            assert Ray(out.amplitudes).approx_eq(Ray([0.0, 1.0]), tol=1e-12)

    def test_deterministic_limit_second_order_per_step(self):
        rng = np.random.default_rng(109)
        a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        H = Observable((a + a.conj().T) / 2)
        z = rng.normal(size=4) + 1j * rng.normal(size=4)
        z = z / np.linalg.norm(z)
        errs = []
        for dt in (1e-3, 5e-4):
            cfg = SdeConfig(sigma=0.0, dt=dt, t_max=1.0)
            stepped = reduction_step(H, z, cfg, 0.0)
            exact = unitary_evolve(H, z, dt)
            errs.append(Ray(stepped.amplitudes).distance_to(Ray(exact.amplitudes)))
        assert errs[0] < 5e-5  # O(dt^2) one-step error at a scale-1 Hamiltonian
        assert errs[1] == pytest.approx(errs[0] / 4.0, rel=0.25)

    def test_positive_kick_raises_energy(self):
        out = reduction_step(TWO_LEVEL, BALANCED, self.CFG, 0.01)
        assert abs(out.amplitudes[1]) > abs(out.amplitudes[0])
        assert expectation(TWO_LEVEL, out) > 0.5

    def test_renormalized(self):
        out = reduction_step(TWO_LEVEL, BALANCED, self.CFG, 0.3)
        assert np.linalg.norm(out.amplitudes) == pytest.approx(1.0, abs=1e-12)


class TestSimulateTrajectory:
    def test_eigenvector_collapses_at_time_zero(self):
        H = Observable(np.diag([0.0, 1.0, 2.0]))
        cfg = SdeConfig(sigma=1.0, dt=1e-3, t_max=1.0, seed=1)
        records, outcome = simulate_trajectory(H, [0, 1, 0], cfg)
        assert outcome.collapsed
        assert outcome.hitting_time == 0.0
        assert outcome.eigenspace_index == 1
        assert len(records) == 1
        assert records[0].variance < 1e-20

    def test_sigma_zero_never_collapses_and_preserves_uncertainty(self):
        # Fine step and a small-norm Hamiltonian: the first-order scheme's
        # uncertainty drift is O(dt ||H||^4) per unit time, far below 1e-10.
        H = Observable([[0.02, 0.01], [0.01, 0.05]])
        psi0 = np.array([0.6, 0.8])
        v0 = variance(H, psi0)
        drifts = []
        for dt in (4e-7, 2e-7):
            cfg = SdeConfig(sigma=0.0, dt=dt, t_max=0.004, seed=0, record_stride=10**9)
            records, outcome = simulate_trajectory(H, psi0, cfg)
            assert not outcome.collapsed
            drifts.append(abs(records[-1].variance - v0) / 0.004)
        assert drifts[1] < 1e-10
        assert drifts[1] < 0.75 * drifts[0]  # systematic part shrinks with dt

    def test_sigma_zero_matches_unitary_evolution_first_order(self):
        rng = np.random.default_rng(113)
        a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        H = Observable((a + a.conj().T) / 2)
        z = rng.normal(size=4) + 1j * rng.normal(size=4)
        errs = []
        for dt in (2e-3, 1e-3):
            cfg = SdeConfig(sigma=0.0, dt=dt, t_max=1.0, seed=0,
                            record_stride=int(round(0.25 / dt)))
            records, _ = simulate_trajectory(H, z, cfg)
            errs.append(max(
                r.ray.distance_to(Ray(unitary_evolve(H, z, r.time).amplitudes))
                for r in records
            ))
        assert 1.5 < errs[0] / errs[1] < 3.0

    def test_singlet_collapses_to_product_state(self):
        H = build_epr_hamiltonian(FilterCoupling.from_values(1.0, 2.0, 1.0, 3.0))
        cfg = SdeConfig(sigma=1.0, dt=2e-3, t_max=800.0, seed=11, record_stride=500)
        records, outcome = simulate_trajectory(H, singlet_state(), cfg)
        assert outcome.collapsed
        assert outcome.final_record.quadric_residual < 1e-3
        # collapsed eigenspace carries nearly all of the state
        spaces = eigensystem(H)
        psi = outcome.final_record.ray.vector
        proj = spaces[outcome.eigenspace_index].projector
        assert np.vdot(psi, proj @ psi).real > 1.0 - 1e-6
        # the nondegenerate outcomes are the split pair, eigenvalues 2 or 3
        assert spaces[outcome.eigenspace_index].eigenvalue in (2.0, 3.0)

    def test_records_respect_stride_and_carry_wiener_sum(self):
        H = TWO_LEVEL
        cfg = SdeConfig(sigma=0.5, dt=1e-3, t_max=0.05, seed=21, record_stride=10)
        records, outcome = simulate_trajectory(H, BALANCED, cfg, trajectory_index=2)
        times = [r.time for r in records]
        assert times[0] == 0.0
        assert times[-1] == pytest.approx(0.05)
        for t in times[:-1]:
            assert (round(t / cfg.dt) % 10) == 0
        # realized Wiener path: recompute independently from the noise streams
        expect_w = 0.0
        by_time = {round(r.time / cfg.dt): r for r in records}
        sq = np.sqrt(cfg.dt)
        for k in range(cfg.n_steps):
            if k in by_time:
                assert by_time[k].wiener_increment_sum == pytest.approx(expect_w, abs=1e-14)
            expect_w += float(step_normals(cfg.seed, k, 3)[2]) * sq
        assert records[-1].wiener_increment_sum == pytest.approx(expect_w, abs=1e-14)
        for rec in records:
            assert rec.variance >= 0.0
            assert np.linalg.norm(rec.ray.vector) == pytest.approx(1.0, abs=1e-12)
        assert not outcome.collapsed

    def test_bit_reproducible_and_index_sensitive(self):
        H = TWO_LEVEL
        cfg = SdeConfig(sigma=1.0, dt=1e-3, t_max=0.2, seed=33, record_stride=50)
        r1, o1 = simulate_trajectory(H, BALANCED, cfg, trajectory_index=3)
        r2, o2 = simulate_trajectory(H, BALANCED, cfg, trajectory_index=3)
        assert len(r1) == len(r2)
        for a, b in zip(r1, r2):
            np.testing.assert_array_equal(a.ray.vector, b.ray.vector)
            assert a.wiener_increment_sum == b.wiener_increment_sum
        assert o1.collapsed == o2.collapsed
        r3, _ = simulate_trajectory(H, BALANCED, cfg, trajectory_index=0)
        assert any(
            not np.array_equal(a.ray.vector, b.ray.vector) for a, b in zip(r1, r3)
        )

    def test_quadric_residual_only_in_dimension_four(self):
        cfg = SdeConfig(sigma=0.5, dt=1e-3, t_max=0.01, seed=2)
        records, _ = simulate_trajectory(TWO_LEVEL, BALANCED, cfg)
        assert all(r.quadric_residual is None for r in records)
        H4 = build_epr_hamiltonian(FilterCoupling.from_values(0.0, 2.0, 1.0, 3.0))
        records4, _ = simulate_trajectory(H4, singlet_state(), cfg)
        assert all(r.quadric_residual is not None for r in records4)


class TestVarianceDriftEstimate:
    CFG = SdeConfig(sigma=1.0, dt=1e-3, t_max=5.0, seed=5)

    def test_requires_enough_trajectories(self):
        with pytest.raises(ValidationError):
            variance_drift_estimate(TWO_LEVEL, BALANCED, self.CFG, 50)

    def test_sigma_zero_has_no_regressor(self):
        cfg = SdeConfig(sigma=0.0, dt=1e-3, t_max=0.2, seed=5)
        with pytest.raises(InsufficientDataError):
            variance_drift_estimate(TWO_LEVEL, BALANCED, cfg, 200)

    def test_eigenvector_start_collapses_immediately(self):
        with pytest.raises(InsufficientDataError):
            variance_drift_estimate(TWO_LEVEL, [1.0, 0.0], self.CFG, 200)

    def test_slope_is_unity(self):
        slope, stderr = variance_drift_estimate(TWO_LEVEL, BALANCED, self.CFG, 800)
        assert slope == pytest.approx(1.0, abs=0.1)
        assert 0.0 < stderr < 0.1

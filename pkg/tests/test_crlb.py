import math

import numpy as np
import numpy.testing as npt
import pytest

from pencil_doa import (
    ArrayConfig,
    CrlbInputs,
    HadConfig,
    PencilConfig,
    RngSpec,
    SourceSet,
    build_pc_codebook,
    crlb_fd,
    crlb_spc,
    estimate_spc_mpm,
    generate_noise,
    generate_signals,
    steering_matrix,
    steering_derivative,
)
from pencil_doa.arrays import paired_squared_errors
from pencil_doa.crlb import _invert_fim
from pencil_doa.errors import ConfigError, ESTIMATOR_FAILURES, SingularFim


def numeric_crlb_theta(m, theta_deg, power, snapshots, h=1e-6):
    """Gaussian-model Fisher information over (theta, power, noise variance),
    with covariance derivatives taken by central differences; returns the
    angle entry of the inverse information matrix."""
    cfg = ArrayConfig(m, 0.5)

    def cov(params):
        theta, p, nv = params
        src = SourceSet((math.degrees(theta),), (p,))
        a = steering_matrix(cfg, src).entries
        return p * (a @ a.conj().T) + nv * np.eye(m)

    base = np.array([math.radians(theta_deg), power, 1.0])
    sigma_inv = np.linalg.inv(cov(base))
    derivs = []
    for i in range(3):
        step = np.zeros(3)
        step[i] = h
        derivs.append((cov(base + step) - cov(base - step)) / (2 * h))
    fim = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            fim[i, j] = snapshots * np.real(
                np.trace(sigma_inv @ derivs[i] @ sigma_inv @ derivs[j]))
    return np.linalg.inv(fim)[0, 0]


class TestSteeringDerivative:
    def test_first_element_is_zero(self):
        f = steering_derivative(ArrayConfig(4, 0.5), SourceSet((0.0,), (1.0,)))
        assert f[0, 0] == 0.0

    def test_second_element_broadside(self):
        f = steering_derivative(ArrayConfig(4, 0.5), SourceSet((0.0,), (1.0,)))
        npt.assert_allclose(f[1, 0], 1j * np.pi, atol=1e-12)

    def test_central_difference_oracle(self):
        cfg = ArrayConfig(6, 0.5)
        for theta in (-47.0, 3.0, 61.0):
            src = SourceSet((theta,), (1.0,))
            f = steering_derivative(cfg, src)
            h = 1e-5  # radians
            up = steering_matrix(cfg, SourceSet((theta + math.degrees(h),), (1.0,)))
            dn = steering_matrix(cfg, SourceSet((theta - math.degrees(h),), (1.0,)))
            fd = (up.entries - dn.entries) / (2 * h)
            assert np.max(np.abs(fd[:, 0] - f[:, 0])) < 1e-6


class TestCrlbFd:
    def test_snapshot_scaling_exact(self):
        cfg = ArrayConfig(16, 0.5)
        src = SourceSet((12.0, -33.0), (5.0, 2.0))
        one = crlb_fd(CrlbInputs(cfg, src, 64)).matrix
        two = crlb_fd(CrlbInputs(cfg, src, 128)).matrix
        npt.assert_array_equal(one, 2.0 * two)

    def test_headline_value(self):
        bound = crlb_fd(CrlbInputs(ArrayConfig(32, 0.5),
                                   SourceSet((0.0,), (100.0,)), 32))
        assert abs(bound.pooled_root_deg / 0.004 - 1.0) <= 0.20

    def test_matches_numeric_fisher_information(self):
        for theta, power in ((20.0, 5.0), (0.0, 10.0), (-35.0, 2.0)):
            closed = crlb_fd(CrlbInputs(ArrayConfig(4, 0.5),
                                        SourceSet((theta,), (power,)), 10))
            oracle = numeric_crlb_theta(4, theta, power, 10)
            assert abs(closed.matrix[0, 0] / oracle - 1.0) < 0.01

    def test_positive_definite_and_symmetric(self):
        bound = crlb_fd(CrlbInputs(ArrayConfig(12, 0.5),
                                   SourceSet((-20.0, 1.0, 44.0), (1.0, 3.0, 2.0)),
                                   16))
        npt.assert_allclose(bound.matrix, bound.matrix.T, atol=1e-18)
        assert np.all(np.linalg.eigvalsh(bound.matrix) > 0)

    def test_monotone_in_power(self):
        cfg = ArrayConfig(16, 0.5)
        roots = [crlb_fd(CrlbInputs(cfg, SourceSet((10.0,), (p,)), 8)).pooled_root_deg
                 for p in (1.0, 10.0, 100.0)]
        assert roots[0] > roots[1] > roots[2]

    def test_combiners_rejected(self):
        cb = build_pc_codebook(HadConfig("pc", 16, 4))
        with pytest.raises(ConfigError):
            crlb_fd(CrlbInputs(ArrayConfig(16, 0.5), SourceSet((0.0,), (1.0,)),
                               8, combiners=cb))

    def test_singular_information_raises(self):
        with pytest.raises(SingularFim):
            _invert_fim(np.array([[1.0, 0.0], [0.0, -1.0]]), 1.0)
        with pytest.raises(SingularFim):
            _invert_fim(np.zeros((2, 2)), 1.0)


class TestCrlbSpc:
    def setup_method(self):
        self.cfg = ArrayConfig(32, 0.5)
        self.had = HadConfig("pc", 32, 8)
        self.cb = build_pc_codebook(self.had)

    def test_snapshot_scaling_exact(self):
        src = SourceSet((0.0,), (100.0,))
        full = crlb_spc(CrlbInputs(self.cfg, src, 32, combiners=self.cb)).matrix
        half = crlb_spc(CrlbInputs(self.cfg, src, 16, combiners=self.cb)).matrix
        npt.assert_array_equal(half, 2.0 * full)

    def test_headline_value(self):
        src = SourceSet((0.0,), (100.0,))
        bound = crlb_spc(CrlbInputs(self.cfg, src, 32, combiners=self.cb))
        assert abs(bound.pooled_root_deg / 0.004 - 1.0) <= 0.25

    def test_positive_definite(self):
        src = SourceSet((-25.0, 30.0), (10.0, 10.0))
        bound = crlb_spc(CrlbInputs(self.cfg, src, 16, combiners=self.cb))
        assert np.all(np.linalg.eigvalsh(bound.matrix) > 0)

    def test_monotone_in_power(self):
        roots = [
            crlb_spc(CrlbInputs(self.cfg, SourceSet((10.0,), (p,)), 16,
                                combiners=self.cb)).pooled_root_deg
            for p in (1.0, 10.0, 100.0)
        ]
        assert roots[0] > roots[1] > roots[2]

    def test_missing_combiners_rejected(self):
        with pytest.raises(ConfigError):
            crlb_spc(CrlbInputs(self.cfg, SourceSet((0.0,), (1.0,)), 8))

    def test_estimator_respects_bound_across_angles(self):
        # the estimator cannot beat its bound (finite-trial slack 10%)
        m, l, ktot = 32, 8, 128
        k2 = ktot // 8
        k = (ktot - k2) // self.had.n_combiners
        pcfg = PencilConfig(l // 2, 1, l)
        for theta in (-40.0, 0.0, 55.0):
            src = SourceSet((theta,), (100.0,))
            sm = steering_matrix(self.cfg, src)
            bound = crlb_spc(CrlbInputs(self.cfg, src, k,
                                        combiners=self.cb)).pooled_root_deg
            total, count = 0.0, 0
            for t in range(200):
                rng = RngSpec(61).child(int(theta), t)
                sigs = generate_signals(src, k, self.had.n_combiners, False,
                                        rng.child("signal"))
                segs = [sm.entries @ sigs[i]
                        + generate_noise(m, k, rng.child("noise", i))
                        for i in range(self.had.n_combiners)]
                s2 = generate_signals(src, k2, 1, False, rng.child("signal2"))[0]
                block2 = sm.entries @ s2 + generate_noise(m, k2, rng.child("noise2"))
                try:
                    est = estimate_spc_mpm(segs, block2, self.had, pcfg,
                                           self.cfg, codebook=self.cb)
                except ESTIMATOR_FAILURES:
                    continue
                total += float(paired_squared_errors(est, (theta,)).sum())
                count += 1
            level = math.sqrt(total / count)
            assert level >= 0.9 * bound

import math

import numpy as np
import pytest

from qfc.smearing import (BipartiteSystem, SmearingProfile, bipartite_no_signalling,
                          localization_report, partial_trace_A, random_density,
                          random_hermitian, random_unitary, smearing_FG, smearing_JK,
                          tail_metric, trace_norm)
from qfc.spacetime import SpacetimePoint
from qfc.wavepacket import Gaussian, Tabulated, psi_1d, psi_tabulated

X_GRID = np.linspace(-20, 20, 801)


def origin_slice(x):
    return [SpacetimePoint(0.0, (float(v),)) for v in x]


class TestPlaneWave:
    def test_origin_values(self):
        F, G = smearing_FG(3.0, X_GRID)
        i0 = np.argmin(np.abs(X_GRID))
        assert F.values[i0] == pytest.approx(math.sqrt(6) / math.sqrt(2 * math.pi))
        assert G.values[i0] == 0.0

    def test_parity_on_symmetric_grid(self):
        F, G = smearing_FG(1.7, X_GRID)
        assert np.allclose(F.values, F.values[::-1], atol=1e-15)
        assert np.allclose(G.values, -G.values[::-1], atol=1e-15)

    def test_pythagorean_identity(self):
        k, L = 2.5, 10.0
        F, G = smearing_FG(k, X_GRID, L=L)
        total = F.values ** 2 / (2 * k) + G.values ** 2 * k / 2
        assert np.allclose(total, 1 / L, atol=1e-15)

    def test_three_dimensional(self):
        k = np.array([0.0, 3.0, 4.0])
        pts = np.random.default_rng(0).normal(size=(50, 3))
        F, G = smearing_FG(k, pts)
        assert np.allclose(F, math.sqrt(10) * (2 * math.pi) ** -1.5 * np.cos(pts @ k))
        assert G.shape == (50,)

    def test_zero_momentum_rejected(self):
        with pytest.raises(ValueError):
            smearing_FG(0.0, X_GRID)

    def test_non_decaying(self):
        F, _ = smearing_FG(1.0, X_GRID)
        assert localization_report(F, (-10, 10)).decay_classification == "non-decaying"
        assert F.tail_metric == pytest.approx(1.0, abs=1e-3)


class TestPacketSmearings:
    @pytest.mark.parametrize("k0", [5.0, 10.0])
    @pytest.mark.parametrize("sigma", [0.5, 1.0, 2.0])
    @pytest.mark.filterwarnings("ignore:.k0. = 5 is not large")
    def test_K_is_twice_imaginary_part(self, k0, sigma):
        tab = Tabulated.from_gaussian(Gaussian((k0,), sigma))
        _, K = smearing_JK(tab, X_GRID)
        ref = np.array([psi_tabulated(tab, Y) for Y in origin_slice(X_GRID)])
        assert np.max(np.abs(K.values - 2 * ref.imag)) < 1e-14

    @pytest.mark.parametrize("k0,sigma", [(5.0, 0.5), (10.0, 0.5), (10.0, 1.0)])
    def test_K_matches_independent_quadrature(self, k0, sigma):
        # only packets whose tabulated support stays clear of k = 0
        packet = Gaussian((k0,), sigma)
        tab = Tabulated.from_gaussian(packet)
        assert tab.k[0] > 0
        x = X_GRID[::40]
        _, K = smearing_JK(tab, x)
        ref = np.array([psi_1d(packet, Y) for Y in origin_slice(x)])
        assert np.max(np.abs(K.values - 2 * ref.imag)) < 1e-10

    @pytest.mark.parametrize("k0,sigma", [(5.0, 1.0), (10.0, 2.0)])
    def test_J_is_not_twice_real_part(self, k0, sigma):
        tab = Tabulated.from_gaussian(Gaussian((k0,), sigma))
        J, _ = smearing_JK(tab, X_GRID)
        ref = np.array([psi_tabulated(tab, Y) for Y in origin_slice(X_GRID)])
        assert np.max(np.abs(J.values - 2 * ref.real)) > 0.5

    def test_K_vanishes_for_real_even_amplitude(self):
        k = np.linspace(-8, 8, 1025)
        amp = np.exp(-k ** 2 / 2)
        dk = k[1] - k[0]
        amp = amp / math.sqrt(dk * np.sum(amp ** 2 * np.r_[0.5, np.ones(k.size - 2), 0.5]))
        _, K = smearing_JK(Tabulated(k, amp), X_GRID)
        assert np.max(np.abs(K.values)) < 1e-14

    def test_unnormalised_rejected(self):
        tab = Tabulated.from_gaussian(Gaussian((10.0,), 1.0))
        with pytest.raises(ValueError):
            smearing_JK(Tabulated(tab.k, 2 * tab.amplitude), X_GRID)

    def test_K_has_fast_tail(self):
        tab = Tabulated.from_gaussian(Gaussian((10.0,), 1.0))
        _, K = smearing_JK(tab, X_GRID, window=(-8, 8))
        report = localization_report(K, (-8, 8))
        assert report.decay_classification == "exponential-tail"
        assert K.tail_metric < 1e-10


class TestProfiles:
    def test_compact_profile_is_bounded(self):
        x = np.linspace(-5, 5, 501)
        v = np.where(np.abs(x) < 1, 1 - x ** 2, 0.0)
        p = SmearingProfile.build(x, v, (-2, 2))
        assert p.tail_metric == 0.0
        assert localization_report(p, (-2, 2)).decay_classification == "bounded"

    def test_exponential_profile(self):
        x = np.linspace(-30, 30, 3001)
        v = np.exp(-np.abs(x)) * np.cos(3 * x)
        report = localization_report(SmearingProfile.build(x, v, (-5, 5)), (-5, 5))
        assert report.decay_classification == "exponential-tail"
        assert report.slope == pytest.approx(-1.0, rel=0.1)
        assert report.r_squared > 0.9

    def test_power_law_is_not_exponential(self):
        x = np.linspace(-300, 300, 6001)
        v = 1 / (1 + x ** 2) ** 0.25
        report = localization_report(SmearingProfile.build(x, v, (-5, 5)), (-5, 5))
        assert report.decay_classification == "non-decaying"

    def test_tail_metric(self):
        x = np.linspace(0, 4, 5)
        assert tail_metric(x, [0.1, 1, 2, 1, 0.5], (1, 3)) == pytest.approx(0.25)

    @pytest.mark.parametrize("grid,values,window", [
        ([0, 1, 1, 2], [0, 0, 0, 0], None),
        ([0, 1, 2], [0, 1], None),
        ([0, 1, 2], [0, math.nan, 0], None),
        ([0, 1, 2, 3], [0, 1, 1, 0], (-1, 2)),
    ])
    def test_invalid(self, grid, values, window):
        with pytest.raises(ValueError):
            SmearingProfile.build(grid, values, window)


class TestBipartite:
    def test_helpers(self):
        rng = np.random.default_rng(0)
        U = random_unitary(rng, 4)
        assert np.allclose(U.conj().T @ U, np.eye(4))
        rho = random_density(rng, 6)
        assert np.trace(rho).real == pytest.approx(1)
        assert np.linalg.eigvalsh(rho).min() > -1e-14
        assert trace_norm(np.diag([1.0, -2.0])) == pytest.approx(3.0)
        rA, rB = random_density(rng, 2), random_density(rng, 3)
        assert np.allclose(partial_trace_A(np.kron(rA, rB), 2, 3), rB)

    def test_identity_choice_gives_zero(self):
        rng = np.random.default_rng(1)
        system = BipartiteSystem.random(rng, 2, 3)
        assert bipartite_no_signalling(system, np.eye(2), [0.0, 0.5, 2.0]) == 0.0

    def test_local_unitaries_do_not_signal(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            system = BipartiteSystem.random(rng, 3, 2)
            U = random_unitary(rng, 3)
            assert bipartite_no_signalling(system, U, rng.uniform(-3, 3, 5)) < 1e-12

    def test_nonlocal_control_signals(self):
        rng = np.random.default_rng(3)
        system = BipartiteSystem.random(rng, 2, 2)
        A_prime = random_hermitian(rng, 4)
        assert bipartite_no_signalling(system, random_unitary(rng, 2), [1.0], A_prime) > 1e-3

    def test_validation(self):
        rng = np.random.default_rng(4)
        rho = random_density(rng, 4)
        with pytest.raises(ValueError):
            BipartiteSystem(2, 2, np.array([[0, 1], [0, 0]]), np.eye(2), rho)
        with pytest.raises(ValueError):
            BipartiteSystem(2, 2, np.eye(2), np.eye(2), 2 * rho)
        with pytest.raises(ValueError):
            BipartiteSystem(2, 3, np.eye(2), np.eye(3), rho)
        system = BipartiteSystem(2, 2, np.eye(2), np.eye(2), rho)
        with pytest.raises(ValueError):
            bipartite_no_signalling(system, 2 * np.eye(2), [1.0])
        with pytest.raises(ValueError):
            bipartite_no_signalling(system, np.eye(2), [1.0], A_prime=np.ones((2, 2)))

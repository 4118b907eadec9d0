import math

import numpy as np
import pytest
import scipy.optimize
from hypothesis import given
from hypothesis import strategies as st

from bosonic_capacity import fockcore as fc
from bosonic_capacity.errors import DomainError, ModeCountError
from bosonic_capacity.gauss import (
    GaussianMoments,
    entropy_photon_number,
    extract_moments,
    g_derivative,
    g_function,
    g_inverse,
    gaussified_entropy,
)

# reference values from the textbook formula (N+1)ln(N+1) - N ln N in mpmath
G_TABLE = {
    0.0: 0.0,
    0.5: 0.9547712524422192,
    1.0: 1.3862943611198906,
    1.5: 1.682529167523141,
    2.0: 1.9095425048844386,
    2 * math.pi: 2.9135397523319817,
}


class TestG:
    @pytest.mark.parametrize("N, expected", sorted(G_TABLE.items()))
    def test_values(self, N, expected):
        assert g_function(N) == pytest.approx(expected, abs=1e-12)

    def test_caption_value(self):
        assert abs(g_function(2.0) - 1.9095) < 5e-4

    def test_small_and_large(self):
        assert g_function(1e-300) > 0
        n = 1e12
        assert g_function(n) == pytest.approx(math.log(n) + 1, rel=1e-12)

    def test_array(self):
        arr = g_function(np.array([0.0, 1.0, 2.0]))
        assert np.allclose(arr, [0, G_TABLE[1.0], G_TABLE[2.0]], atol=1e-15)

    @pytest.mark.parametrize("bad", [-1e-9, -3.0, float("nan")])
    def test_domain(self, bad):
        with pytest.raises(DomainError):
            g_function(bad)

    def test_increasing_concave(self):
        grid = np.linspace(0, 50, 5001)
        vals = g_function(grid)
        d1 = np.diff(vals)
        assert np.all(d1 > 0)
        assert np.all(np.diff(d1) < 1e-15)

    def test_derivative(self):
        h = 1e-6
        for n in (0.1, 1.0, 7.0):
            fd = (g_function(n + h) - g_function(n - h)) / (2 * h)
            assert g_derivative(n) == pytest.approx(fd, rel=1e-7)
        with pytest.raises(DomainError):
            g_derivative(0.0)


class TestGInverse:
    def test_zero(self):
        assert g_inverse(0.0) == 0.0

    def test_fig1_entropy(self):
        assert g_inverse(0.91) == pytest.approx(0.46024208893492624, abs=1e-12)
        assert abs(g_inverse(0.91) - 0.4603) < 1e-3

    def test_domain(self):
        with pytest.raises(DomainError):
            g_inverse(-0.1)

    @given(n=st.floats(0, 1e6))
    def test_round_trip_photons(self, n):
        assert g_inverse(g_function(n)) == pytest.approx(n, rel=1e-9, abs=1e-12)

    @given(s=st.floats(0, 30))
    def test_round_trip_entropy(self, s):
        assert g_function(g_inverse(s)) == pytest.approx(s, abs=1e-10)


class TestMoments:
    def test_vacuum(self):
        m = extract_moments(fc.make_number_state(0, 5))
        assert np.allclose(m.mean, 0) and np.allclose(m.cov, 0.5 * np.eye(2))

    def test_number_state(self):
        m = extract_moments(fc.make_number_state(1, 8))
        assert np.allclose(m.mean, 0) and np.allclose(m.cov, 1.5 * np.eye(2), atol=1e-14)

    @pytest.mark.parametrize("alpha", [1.0, 0.5 - 0.7j])
    def test_coherent(self, alpha):
        m = extract_moments(fc.make_coherent_state(alpha, 40))
        assert np.allclose(m.mean, math.sqrt(2) * np.array([alpha.real, np.imag(alpha)]), atol=1e-8)
        assert np.allclose(m.cov, 0.5 * np.eye(2), atol=1e-8)

    def test_matches_quadrature_matrices(self):
        # compare with <Q>, <P>, <{Q,P}>/2 from explicit operators on a padded space
        rho = fc.random_density_matrix(6, 1.5, 11)
        d = 12
        big = rho.padded(d).data
        a = fc.annihilation(d)
        q = (a + a.T) / math.sqrt(2)
        p = (a - a.T) / (1j * math.sqrt(2))
        ev = lambda op: np.trace(big @ op).real
        mean = np.array([ev(q), ev(p)])
        cov = np.array(
            [[ev(q @ q), ev((q @ p + p @ q) / 2)], [ev((q @ p + p @ q) / 2), ev(p @ p)]]
        ) - np.outer(mean, mean)
        m = extract_moments(rho)
        assert np.allclose(m.mean, mean, atol=1e-12)
        assert np.allclose(m.cov, cov, atol=1e-12)

    def test_photon_number_identity(self):
        rho = fc.random_density_matrix(7, 2.0, 4)
        assert extract_moments(rho).mean_photon == pytest.approx(fc.mean_photon_number(rho), abs=1e-12)

    def test_two_mode_rejected(self):
        with pytest.raises(ModeCountError):
            extract_moments(fc.tensor(fc.make_number_state(0, 2), fc.make_number_state(0, 2)))

    def test_asymmetric_cov_rejected(self):
        with pytest.raises(DomainError):
            GaussianMoments(np.zeros(2), [[1.0, 0.2], [0.0, 1.0]])


class TestGaussifiedEntropy:
    def test_vacuum(self):
        assert gaussified_entropy(GaussianMoments.vacuum()) == 0.0

    def test_number_state(self):
        m = extract_moments(fc.make_number_state(1, 4))
        assert gaussified_entropy(m) == pytest.approx(2 * math.log(2), abs=1e-12)

    @pytest.mark.parametrize("N", [0.1, 2.0, 9.0])
    def test_thermal(self, N):
        assert gaussified_entropy(GaussianMoments.thermal(N)) == pytest.approx(g_function(N), abs=1e-12)

    def test_unphysical(self):
        with pytest.raises(DomainError):
            gaussified_entropy(GaussianMoments(np.zeros(2), 0.3 * np.eye(2)))

    @pytest.mark.parametrize("seed", range(500))
    def test_maximum_entropy(self, seed):
        rho = fc.random_density_matrix(1 + seed % 12, 3.0, seed)
        s = fc.von_neumann_entropy(rho)
        assert gaussified_entropy(extract_moments(rho)) - s >= -1e-8
        assert s <= g_function(fc.mean_photon_number(rho)) + 1e-8
        assert entropy_photon_number(rho) <= fc.mean_photon_number(rho) + 1e-8


class TestEntropyPhotonNumber:
    def test_thermal(self):
        assert entropy_photon_number(fc.make_thermal_state(2.0, 80)) == pytest.approx(2.0, abs=1e-4)

    def test_pure(self):
        assert entropy_photon_number(fc.make_coherent_state(0.6, 20)) == 0.0

    def test_state_with_given_entropy(self):
        def entropy(p):
            return -(1 - p) * math.log(1 - p) - p * math.log(p / 2)

        p = scipy.optimize.brentq(lambda p: entropy(p) - 0.91, 1e-9, 0.6)
        rho = fc.DensityMatrix(np.diag([1 - p, p / 2, p / 2]))
        assert fc.von_neumann_entropy(rho) == pytest.approx(0.91, abs=1e-12)
        assert abs(entropy_photon_number(rho) - 0.4603) < 1e-3

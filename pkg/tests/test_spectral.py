from __future__ import annotations

import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mpdaniell.process import LinearProcessModel, make_rotating_ma, simulate, white_noise
from mpdaniell.spectral import (FrequencyIndex, approx_s_prime, approx_s_tilde, daniell_avg, daniell_matrix,
                                dft_columns, grid_index, matrix_to_json, mod_distance, periodogram,
                                selected_columns, selector_diag, smoothed_from_dft, smoothed_periodogram,
                                write_eigen_csv)


def lag_sum_periodogram(X, theta):
    """I(theta) = n^{-1} sum_{s,t} X_s X_t^T e^{-i(s-t) theta}, written as a double loop."""
    d, n = X.shape
    out = np.zeros((d, d), dtype=complex)
    for s in range(n):
        for t in range(n):
            out += np.outer(X[:, s], X[:, t]) * np.exp(-1j * (s - t) * theta)
    return out / n


class TestGrid:
    @pytest.mark.parametrize("theta,n,r", [(0.0, 8, 0), (math.pi, 8, 4), (2 * math.pi - 1e-9, 8, 0),
                                           (1.0, 100, 16), (math.pi / 4 + 1e-12, 8, 1)])
    def test_grid_index(self, theta, n, r):
        assert grid_index(theta, n).r == r

    def test_half_rounds_up(self):
        # theta = 2 pi * 0.5 / 4 sits halfway between r = 0 and r = 1
        assert grid_index(math.pi / 4, 4).r == 1

    @given(st.floats(0, 2 * math.pi, exclude_max=True), st.integers(1, 5000))
    def test_snap_error(self, theta, n):
        f = grid_index(theta, n)
        gap = abs(theta - f.theta_snapped)
        assert min(gap, 2 * math.pi - gap) <= math.pi / n + 1e-9

    @pytest.mark.parametrize("theta", [-0.1, 2 * math.pi, float("nan")])
    def test_rejects(self, theta):
        with pytest.raises(ValueError):
            grid_index(theta, 8)

    def test_frequency_index_validates(self):
        with pytest.raises(ValueError):
            FrequencyIndex(8, 8)

    @pytest.mark.parametrize("r,rp,n,dist", [(0, 7, 8, 1), (3, 3, 8, 0), (1, 5, 8, 4), (2, 12, 10, 0)])
    def test_mod_distance(self, r, rp, n, dist):
        assert mod_distance(r, rp, n) == dist


class TestSelector:
    def test_wraps(self):
        np.testing.assert_array_equal(selector_diag(0, 8, 1), [1, 1, 0, 0, 0, 0, 0, 1])
        np.testing.assert_array_equal(selected_columns(0, 8, 1), [7, 0, 1])

    @given(st.integers(1, 200), st.data())
    def test_trace(self, n, data):
        m = data.draw(st.integers(0, (n - 1) // 2))
        r = data.draw(st.integers(0, n - 1))
        D = selector_diag(r, n, m)
        assert D.sum() == 2 * m + 1
        np.testing.assert_array_equal(np.flatnonzero(D), np.sort(selected_columns(r, n, m)))

    def test_bandwidth(self):
        with pytest.raises(ValueError):
            selector_diag(0, 4, 2)


class TestDft:
    def test_two_points(self):
        X = np.array([[1.0, 3.0]])
        np.testing.assert_allclose(dft_columns(X), [[4 / math.sqrt(2), -2 / math.sqrt(2)]])

    def test_three_points(self):
        w = np.exp(-2j * math.pi / 3)
        X = np.array([[1.0, 2.0, 4.0]])
        expected = [(1 + 2 * w**k + 4 * w ** (2 * k)) / math.sqrt(3) for k in range(3)]
        np.testing.assert_allclose(dft_columns(X)[0], expected)

    def test_four_points(self):
        X = np.array([[1.0, 0.0, -1.0, 0.0]])
        np.testing.assert_allclose(dft_columns(X)[0], [0, 1, 0, 1], atol=1e-15)

    def test_unitary(self, rng):
        X = rng.standard_normal((3, 17))
        XV = dft_columns(X)
        np.testing.assert_allclose(XV @ XV.conj().T, X @ X.T, atol=1e-12)


class TestPeriodogram:
    @pytest.mark.parametrize("n", [5, 8])
    def test_lag_sum_oracle(self, rng, n):
        X = rng.standard_normal((2, n))
        for r in range(n):
            freq = FrequencyIndex(r, n)
            np.testing.assert_allclose(periodogram(X, freq), lag_sum_periodogram(X, freq.theta_snapped), atol=1e-12)

    def test_parseval(self, rng):
        X = rng.standard_normal((3, 12))
        total = sum(periodogram(X, FrequencyIndex(r, 12)) for r in range(12))
        np.testing.assert_allclose(total, X @ X.T, atol=1e-12)

    def test_conjugate_symmetry(self, rng):
        X = rng.standard_normal((3, 11))
        for r in range(1, 11):
            np.testing.assert_allclose(periodogram(X, FrequencyIndex(r, 11)),
                                       periodogram(X, FrequencyIndex(11 - r, 11)).conj(), atol=1e-12)

    def test_shape_mismatch(self, rng):
        with pytest.raises(ValueError):
            periodogram(rng.standard_normal((2, 5)), FrequencyIndex(0, 6))


class TestSmoothed:
    @given(st.integers(1, 40), st.data())
    def test_avg_equals_matrix(self, n, data):
        m = data.draw(st.integers(0, (n - 1) // 2))
        theta = data.draw(st.floats(0, 2 * math.pi, exclude_max=True))
        X = np.random.default_rng(n).standard_normal((3, n))
        np.testing.assert_allclose(daniell_avg(X, theta, m).matrix, daniell_matrix(X, theta, m).matrix, atol=1e-12)

    def test_full_window_is_sample_covariance(self, rng):
        X = rng.standard_normal((4, 9))
        np.testing.assert_allclose(daniell_matrix(X, 1.0, 4).matrix, X @ X.T / 9, atol=1e-12)

    def test_hermitian_psd(self, rng):
        X = rng.standard_normal((6, 64))
        S = daniell_matrix(X, 2.0, 3).matrix
        np.testing.assert_array_equal(S, S.conj().T)
        assert np.linalg.eigvalsh(S).min() > -1e-12

    def test_rank(self, rng):
        X = rng.standard_normal((10, 64))
        assert np.linalg.matrix_rank(daniell_matrix(X, 2.0, 2).matrix) == 5

    def test_reuse_dft(self, rng):
        X = rng.standard_normal((3, 32))
        XV = dft_columns(X)
        np.testing.assert_array_equal(daniell_matrix(X, 1.0, 2, XV).matrix, daniell_matrix(X, 1.0, 2).matrix)

    def test_esd(self, rng):
        X = rng.standard_normal((5, 40))
        mu = daniell_matrix(X, 1.0, 3).esd()
        assert mu.weights.sum() == pytest.approx(1.0)


class TestApproximations:
    def test_smoothed_periodogram_uses_simulate(self):
        model = make_rotating_ma(3, 2, 0.5, seed=1)
        X = simulate(model, 128, 5).data
        np.testing.assert_array_equal(smoothed_periodogram(model, 128, 1.0, 4, 5).matrix,
                                      daniell_matrix(X, 1.0, 4).matrix)

    def test_s_prime_exact_for_lag_zero(self):
        model = LinearProcessModel(np.random.default_rng(3).standard_normal((1, 4, 4)))
        for theta in (0.3, 2.0):
            np.testing.assert_array_equal(approx_s_prime(model, 256, theta, 6, 9).matrix,
                                          smoothed_periodogram(model, 256, theta, 6, 9).matrix)

    def test_s_tilde_exact_for_lag_zero(self):
        model = LinearProcessModel(np.random.default_rng(3).standard_normal((1, 4, 4)))
        np.testing.assert_array_equal(approx_s_tilde(model, 256, 1.0, 6, 9).matrix,
                                      smoothed_periodogram(model, 256, 1.0, 6, 9).matrix)

    def test_s_tilde_is_g_s_eta_g_star(self):
        # for the circular process the DFT factorizes: (X V)_s = G(2 pi s / n) (eta V)_s
        model = make_rotating_ma(3, 2, 0.5, seed=1)
        n, m, theta = 64, 0, 1.0
        S = approx_s_tilde(model, n, theta, m, 2)
        S_eta = smoothed_periodogram(white_noise(3, model.innovation_law), n, theta, m, 2).matrix
        from mpdaniell.process import transfer_function
        G = transfer_function(model, S.freq.theta_snapped)
        np.testing.assert_allclose(S.matrix, G @ S_eta @ G.conj().T, atol=1e-12)

    def test_s_prime_close(self):
        model = make_rotating_ma(4, 2, 0.5, seed=1)
        n, m = 4096, 100
        diff = approx_s_prime(model, n, 1.0, m, 3).matrix - smoothed_periodogram(model, n, 1.0, m, 3).matrix
        assert np.linalg.norm(diff, 2) < 0.5


class TestIO:
    def test_eigen_csv(self, tmp_path):
        path = tmp_path / "eig.csv"
        write_eigen_csv(path, [(8, 2, 1, 3, [0.5, 1 / 3])])
        rows = list(csv.reader(open(path)))
        assert rows[0] == ["n", "d", "m", "r", "lambda"]
        assert float(rows[2][4]) == 1 / 3

    def test_matrix_json(self):
        A = np.array([[1.0, 2j], [-2j, 3.0]])
        data = json.loads(matrix_to_json(A))
        np.testing.assert_array_equal(np.array(data["real"]) + 1j * np.array(data["imag"]), A)
        assert json.loads(matrix_to_json(np.eye(2))) == {"real": [[1.0, 0.0], [0.0, 1.0]]}

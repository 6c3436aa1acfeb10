import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from filab import coremath as cm
from filab.errors import (InvalidDimensionError, InvalidIndexError, InvalidInputError,
                          InvariantViolationError)

from conftest import naive_dft, random_hermitian


def test_qft_basis_zero_is_uniform():
    np.testing.assert_allclose(cm.qft(np.eye(4)[0]), np.full(4, 0.5), atol=1e-15)


def test_qft_basis_one_phases():
    np.testing.assert_allclose(cm.qft(np.eye(4)[1]), np.array([1, 1j, -1, -1j]) / 2, atol=1e-15)


@pytest.mark.parametrize("N", [1, 2, 3, 5, 8, 12, 17, 64])
def test_qft_matches_naive_dft(rng, N):
    v = rng.normal(size=N) + 1j * rng.normal(size=N)
    np.testing.assert_allclose(cm.qft(v), naive_dft(v), atol=1e-10)


@pytest.mark.parametrize("N", [2 ** k for k in range(1, 11)])
def test_qft_preserves_norm(rng, N):
    v = rng.normal(size=(1000, N)) + 1j * rng.normal(size=(1000, N))
    before = np.sum(np.abs(v) ** 2, axis=1)
    after = np.sum(np.abs(cm.qft(v)) ** 2, axis=1)
    assert np.max(np.abs(after - before) / before) < 1e-10


@given(st.lists(st.complex_numbers(max_magnitude=1e3, allow_nan=False, allow_infinity=False),
                min_size=1, max_size=40))
def test_inverse_qft_roundtrip(vals):
    v = np.array(vals, dtype=complex)
    np.testing.assert_allclose(cm.inverse_qft(cm.qft(v)), v, atol=1e-9)


def test_qft_matrix_is_the_transform(rng):
    v = rng.normal(size=9) + 0j
    np.testing.assert_allclose(cm.qft_matrix(9) @ v, cm.qft(v), atol=1e-12)


def test_qft_rejects_empty():
    with pytest.raises(InvalidDimensionError):
        cm.qft(np.array([], dtype=complex))


# -- complex normal -------------------------------------------------------

def test_gaussian_moments(rng):
    x = cm.sample_complex_gaussian(cm.GaussianParams(0j, 1.0), rng, 10 ** 6)
    a = np.abs(x) ** 2
    assert abs(a.mean() - 1) < 0.01
    assert abs(x.real.mean()) < 0.005 and abs(x.imag.mean()) < 0.005
    assert abs(np.mean(a * np.exp(-a)) - 0.25) < 0.01


def test_gaussian_ks(rng):
    sigma = 0.7
    x = cm.sample_complex_gaussian(cm.GaussianParams(1 - 2j, sigma), rng, 10 ** 5)
    scale = sigma / math.sqrt(2)
    assert stats.kstest(x.real, "norm", args=(1.0, scale)).pvalue > 1e-3
    assert stats.kstest(x.imag, "norm", args=(-2.0, scale)).pvalue > 1e-3


def test_gaussian_scalar_draw(rng):
    assert isinstance(cm.sample_complex_gaussian(cm.GaussianParams(), rng), complex)


@pytest.mark.parametrize("sigma", [0.0, -1.0])
def test_gaussian_needs_positive_sigma(sigma):
    with pytest.raises(InvalidInputError):
        cm.GaussianParams(0j, sigma)


# -- Hermitian algebra ------------------------------------------------------

def test_principal_minor_direct_indexing(rng):
    M = random_hermitian(rng, 4)
    sub = cm.principal_minor(M, {2, 0})
    assert sub.shape == (2, 2)
    for a, i in enumerate([0, 2]):
        for b, j in enumerate([0, 2]):
            assert sub[a, b] == M[i, j]


def test_principal_minor_edges(rng):
    M = random_hermitian(rng, 5)
    np.testing.assert_array_equal(cm.principal_minor(M, range(5)), M)
    np.testing.assert_array_equal(cm.principal_minor(M, [3]), M[[3]][:, [3]])
    with pytest.raises(InvalidIndexError):
        cm.principal_minor(M, [5])
    with pytest.raises(InvalidIndexError):
        cm.principal_minor(M, [])


@pytest.mark.parametrize("d", [1, 3, 7])
def test_det_simple(d):
    assert cm.det_hermitian(np.eye(d)) == pytest.approx(1.0)
    assert cm.det_hermitian(2 * np.eye(d)) == pytest.approx(2.0 ** d)


def test_det_matches_eigen_product(rng):
    for _ in range(20):
        M = random_hermitian(rng, 3, psd=True)
        lam = np.linalg.eigvalsh(M)
        assert cm.det_hermitian(M) == pytest.approx(np.prod(lam), rel=1e-8)


def test_det_rejects_non_hermitian():
    with pytest.raises(InvariantViolationError):
        cm.det_hermitian(np.array([[1, 2], [0, 1]]))


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 6), st.floats(0, 10), st.integers(0, 2 ** 31 - 1))
def test_det_of_identity_plus_psd_minor_at_least_one(n, c, seed):
    r = np.random.default_rng(seed)
    M = random_hermitian(r, n, psd=True)
    T = r.choice(n, size=r.integers(1, n + 1), replace=False)
    assert cm.det_hermitian(cm.principal_minor(np.eye(n) + c * M, T), atol=1e-9) >= 1 - 1e-9


def test_max_eigenvalue_and_gershgorin(rng):
    assert cm.max_eigenvalue(np.eye(6)) == pytest.approx(1.0)
    assert cm.max_eigenvalue(np.diag([2.0, 5.0, 1.0])) == pytest.approx(5.0)
    for _ in range(50):
        M = random_hermitian(rng, 6)
        assert cm.max_eigenvalue(M) <= cm.gershgorin_upper(M) + 1e-12


def test_eigenvalues_are_real(rng):
    M = random_hermitian(rng, 8)
    np.testing.assert_allclose(cm.eigenvalues_hermitian(M), np.linalg.eigvalsh(M))


# -- Gaussian integrals ------------------------------------------------------

def test_gaussian_integral_n1(rng):
    out = cm.verify_gaussian_integral_identities(1, np.array([[1.0]]), 50_000, rng)
    assert out["first"]["quadrature"] == pytest.approx(math.pi, rel=1e-2)
    assert out["first"]["monte_carlo"] == pytest.approx(math.pi, rel=1e-2)


def test_gaussian_integrals_identity_n2(rng):
    out = cm.verify_gaussian_integral_identities(2, np.eye(2), 200_000, rng)
    assert out["first"]["quadrature"] == pytest.approx(math.pi ** 2, rel=2e-2)
    # at M = I the trace form and the Wick form coincide at pi^2
    assert out["second"]["closed_form_trace"] == pytest.approx(math.pi ** 2)
    assert out["second"]["quadrature"] == pytest.approx(math.pi ** 2, rel=2e-2)
    assert out["second"]["quadrature_matches_trace"]


def test_gaussian_integrals_general_n2(rng):
    M = np.array([[2.0, 0.5 - 0.3j], [0.5 + 0.3j, 1.0]])
    out = cm.verify_gaussian_integral_identities(2, M, 200_000, rng)
    det = np.linalg.det(M).real
    assert out["first"]["quadrature_matches_pi_n"] and not out["first"]["quadrature_matches_pi"]
    assert out["first"]["monte_carlo"] == pytest.approx(math.pi ** 2 / det, rel=3e-2)
    assert out["second"]["quadrature_matches_wick"]
    assert out["second"]["monte_carlo"] == pytest.approx(out["second"]["closed_form_wick"], rel=5e-2)


def test_gaussian_integrals_reject_indefinite(rng):
    with pytest.raises(InvalidInputError):
        cm.verify_gaussian_integral_identities(2, np.diag([1.0, -1.0]), 100, rng)

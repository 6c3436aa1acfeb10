"""Numerical kernel: Fourier transform, complex Gaussians, Hermitian algebra.

Fourier convention: ``qft`` maps the basis state ``|y>`` to
``N**-0.5 * sum_z exp(+2j*pi*y*z/N) |z>``; ``inverse_qft`` uses the opposite
sign.  Hermitian matrices are plain complex ``numpy`` arrays; the helpers here
validate them on entry.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    InvalidDimensionError,
    InvalidIndexError,
    InvalidInputError,
    InvariantViolationError,
)
from .tolerances import DEFAULT


# --------------------------------------------------------------------------
# Fourier transform
# --------------------------------------------------------------------------

def qft(v) -> np.ndarray:
    """Unitary DFT with the ``+i`` phase convention, along the last axis."""
    v = np.asarray(v, dtype=complex)
    if v.ndim == 0 or v.shape[-1] == 0:
        raise InvalidDimensionError("qft needs a vector of length N >= 1")
    return np.fft.ifft(v, axis=-1, norm="ortho")


def inverse_qft(v) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    if v.ndim == 0 or v.shape[-1] == 0:
        raise InvalidDimensionError("inverse_qft needs a vector of length N >= 1")
    return np.fft.fft(v, axis=-1, norm="ortho")


def qft_matrix(n: int) -> np.ndarray:
    """Dense ``n x n`` matrix of ``qft``; entry ``[z, y]`` is the image amplitude."""
    if n < 1:
        raise InvalidDimensionError("n must be positive")
    zy = np.outer(np.arange(n), np.arange(n)) % n
    return np.exp(2j * np.pi * zy / n) / math.sqrt(n)


# --------------------------------------------------------------------------
# Complex normal distribution
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class GaussianParams:
    """Complex normal with density ``exp(-|x-mean|^2/sigma^2) / (pi sigma^2)``."""

    mean: complex = 0j
    sigma: float = 1.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise InvalidInputError("sigma must be positive")


def sample_complex_gaussian(p: GaussianParams, rng, size=None):
    """Draw from the complex normal ``p``.

    Real and imaginary parts are independent with variance ``sigma**2 / 2``,
    so ``E|x - mean|^2 = sigma**2``.
    """
    scale = p.sigma / math.sqrt(2.0)
    re = rng.normal(0.0, scale, size)
    im = rng.normal(0.0, scale, size)
    out = p.mean + re + 1j * im
    return complex(out) if size is None else out


# --------------------------------------------------------------------------
# Hermitian linear algebra
# --------------------------------------------------------------------------

def check_hermitian(M, atol: float = DEFAULT.hermitian_atol) -> np.ndarray:
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] == 0:
        raise InvalidDimensionError(f"expected a nonempty square matrix, got shape {M.shape}")
    dev = np.max(np.abs(M - M.conj().T))
    if dev > atol:
        raise InvariantViolationError(f"matrix is not Hermitian (max |M - M^H| = {dev:.3e})")
    return M


def principal_minor(M, T) -> np.ndarray:
    """Rows and columns of ``M`` indexed by ``T``, in ascending index order."""
    M = np.asarray(M)
    idx = np.unique(np.asarray(list(T), dtype=np.int64))
    if idx.size == 0:
        raise InvalidIndexError("index set must be nonempty")
    if idx[0] < 0 or idx[-1] >= M.shape[0]:
        raise InvalidIndexError(f"index out of range for dimension {M.shape[0]}")
    return M[np.ix_(idx, idx)]


def det_hermitian(M, atol: float = DEFAULT.hermitian_atol,
                  imag_tol: float = DEFAULT.det_imag) -> float:
    """Real determinant of a Hermitian matrix via LU (``slogdet``)."""
    M = check_hermitian(M, atol)
    sign, logabs = np.linalg.slogdet(M)
    if sign == 0:
        return 0.0
    d = sign * np.exp(logabs)
    if abs(d.imag) > imag_tol * max(1.0, abs(d.real)):
        raise InvariantViolationError(f"determinant has imaginary residue {d.imag:.3e}")
    return float(d.real)


def eigenvalues_hermitian(M, atol: float = DEFAULT.hermitian_atol,
                          imag_tol: float = DEFAULT.eig_imag) -> np.ndarray:
    M = check_hermitian(M, atol)
    # general solver as a cross-check that the spectrum really is real
    if M.shape[0] <= 512:
        w = np.linalg.eigvals(M)
        if np.max(np.abs(w.imag)) > imag_tol * max(1.0, np.max(np.abs(w))):
            raise InvariantViolationError("eigenvalues are not real")
    return np.linalg.eigvalsh(M)


def max_eigenvalue(M, atol: float = DEFAULT.hermitian_atol) -> float:
    M = check_hermitian(M, atol)
    if M.shape[0] > 10_000:
        raise InvalidDimensionError("max_eigenvalue supports dim <= 1e4")
    return float(np.linalg.eigvalsh(M)[-1])


def gershgorin_upper(M) -> float:
    """Largest right edge of the Gershgorin discs of ``M``."""
    M = np.asarray(M)
    radii = np.sum(np.abs(M), axis=1) - np.abs(np.diag(M))
    return float(np.max(np.diag(M).real + radii))


# --------------------------------------------------------------------------
# Gaussian integral identities
# --------------------------------------------------------------------------

def _real_form(M: np.ndarray) -> np.ndarray:
    """Symmetric ``2n x 2n`` R with ``v^H M v = x^T R x`` for ``x = (Re v, Im v)``."""
    A, B = M.real, M.imag
    return np.block([[A, -B], [B, A]])


def _gauss_hermite_integrals(M: np.ndarray, nodes: int):
    """Tensor Gauss-Hermite estimates of both integrals over C^n.

    Substituting ``x = c u`` with ``c**2 = 1 / lambda_max`` leaves the weight
    ``exp(-|u|^2)`` times a bounded factor, which Gauss-Hermite resolves well
    for reasonably conditioned ``M``.
    """
    n = M.shape[0]
    R = _real_form(M)
    lam_max = np.linalg.eigvalsh(R)[-1]
    c = 1.0 / math.sqrt(lam_max)
    t, w = np.polynomial.hermite.hermgauss(nodes)
    grids = np.meshgrid(*([t] * (2 * n)), indexing="ij")
    u = np.stack([g.ravel() for g in grids], axis=1)
    weights = np.prod(np.stack(np.meshgrid(*([w] * (2 * n)), indexing="ij")), axis=0).ravel()
    E = c * c * R - np.eye(2 * n)
    f = weights * np.exp(-np.einsum("ij,jk,ik->i", u, E, u))
    jac = c ** (2 * n)
    first = float(f.sum()) * jac
    second = 0.0
    if n == 2:
        x = c * u
        # x = (Re v1, Re v2, Im v1, Im v2)
        mod1 = x[:, 0] ** 2 + x[:, 2] ** 2
        mod2 = x[:, 1] ** 2 + x[:, 3] ** 2
        second = float((f * mod1 * mod2).sum()) * jac
    return first, second


def verify_gaussian_integral_identities(n: int, M, samples: int, rng,
                                        quadrature_nodes: int = 24) -> dict:
    """Estimate ``int exp(-v^H M v) dv`` (and, for n=2, the fourth-moment
    integral) and compare with candidate closed forms.

    Two independent routes are reported: tensor Gauss-Hermite quadrature and
    importance-sampled Monte Carlo from a complex normal wide enough that the
    weights stay bounded.  Closed forms compared:

    * ``pi / det M`` and ``pi**n / det M`` for the first integral;
    * ``pi**2 Tr(M)**2 / (4 det(M)**3)`` and the Wick-contraction value
      ``pi**2 (M11 M22 + |M12|**2) / det(M)**3`` for the second.
    """
    if n not in (1, 2):
        raise InvalidInputError("n must be 1 or 2")
    M = check_hermitian(np.atleast_2d(np.asarray(M, dtype=complex)))
    if M.shape[0] != n:
        raise InvalidDimensionError("M must be n x n")
    lam = np.linalg.eigvalsh(M)
    if lam[0] <= 0:
        raise InvalidInputError("M must be positive definite")
    det = float(np.prod(lam))

    q1, q2 = _gauss_hermite_integrals(M, quadrature_nodes)

    # importance sampling from CN(0, s2 I) with s2 * lambda_min > 1 keeps
    # the weight exp(-v^H (M - I/s2) v) in (0, 1]
    s2 = 1.5 / lam[0]
    v = sample_complex_gaussian(GaussianParams(0j, math.sqrt(s2)), rng, (samples, n))
    quad = np.einsum("si,ij,sj->s", v.conj(), M, v).real
    wgt = (math.pi * s2) ** n * np.exp(-quad + np.sum(np.abs(v) ** 2, axis=1) / s2)
    mc1 = float(wgt.mean())
    se1 = float(wgt.std(ddof=1) / math.sqrt(samples))

    report = {
        "n": n,
        "det": det,
        "first": {
            "quadrature": q1,
            "monte_carlo": mc1,
            "monte_carlo_se": se1,
            "closed_form_pi_over_det": math.pi / det,
            "closed_form_pi_n_over_det": math.pi ** n / det,
        },
    }
    report["first"]["quadrature_matches_pi_n"] = bool(
        math.isclose(q1, math.pi ** n / det, rel_tol=1e-6))
    report["first"]["quadrature_matches_pi"] = bool(
        math.isclose(q1, math.pi / det, rel_tol=1e-6))
    if n == 2:
        g = wgt * np.abs(v[:, 0]) ** 2 * np.abs(v[:, 1]) ** 2
        tr = float(np.trace(M).real)
        wick = float(math.pi ** 2 * (M[0, 0].real * M[1, 1].real + abs(M[0, 1]) ** 2) / det ** 3)
        trace_form = math.pi ** 2 * tr ** 2 / (4 * det ** 3)
        report["second"] = {
            "quadrature": q2,
            "monte_carlo": float(g.mean()),
            "monte_carlo_se": float(g.std(ddof=1) / math.sqrt(samples)),
            "closed_form_trace": trace_form,
            "closed_form_wick": wick,
            "quadrature_matches_trace": bool(math.isclose(q2, trace_form, rel_tol=1e-6)),
            "quadrature_matches_wick": bool(math.isclose(q2, wick, rel_tol=1e-6)),
        }
    return report

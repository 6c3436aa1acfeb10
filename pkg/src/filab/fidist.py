"""The Gaussian-amplitude distribution over (state, set) pairs and its marginals.

Sampling a pair for a support ``S`` of size ``l``:

1. ``alpha_y ~ CN(0, 1/sqrt(l))`` for ``y`` in ``S`` (zero elsewhere);
2. ``beta_z = sum_y exp(2j*pi*y*z/N) alpha_y``, so ``qft(psi)[z] = beta_z/sqrt(N)``;
3. each ``z`` joins ``U'`` independently with probability ``1 - exp(-|beta_z|^2)``.

The probability ``tau`` that ``U'`` misses a set ``T`` has the closed form
``1 / det(I + (N/l) M^S_T)`` where ``M^S[z, z'] = (1/N) sum_{y in S}
exp(2j*pi*(z - z')*y/N)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import coremath
from .errors import (
    InvalidConfigError,
    InvalidDimensionError,
    InvalidInputError,
    InvariantViolationError,
    ResourceLimitError,
)
from .tolerances import DEFAULT

DENSE_LIMIT = 4096


# --------------------------------------------------------------------------
# Types
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SubsetOracle:
    """A subset of ``[N]``, also read as the boolean function ``x -> [x in set]``."""

    n_points: int
    mask: np.ndarray = field(repr=False)

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool)
        if mask.shape != (self.n_points,):
            raise InvalidDimensionError(
                f"mask has shape {mask.shape}, expected ({self.n_points},)")
        mask.setflags(write=False)
        object.__setattr__(self, "mask", mask)

    @classmethod
    def from_indices(cls, n_points: int, indices) -> "SubsetOracle":
        idx = np.asarray(list(indices), dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= n_points):
            raise InvalidDimensionError(f"index outside [0, {n_points})")
        mask = np.zeros(n_points, dtype=bool)
        mask[idx] = True
        return cls(n_points, mask)

    @classmethod
    def full(cls, n_points: int) -> "SubsetOracle":
        return cls(n_points, np.ones(n_points, dtype=bool))

    @classmethod
    def empty(cls, n_points: int) -> "SubsetOracle":
        return cls(n_points, np.zeros(n_points, dtype=bool))

    @classmethod
    def from_bits(cls, n_points: int, bits: int) -> "SubsetOracle":
        """Bit ``i`` of ``bits`` set means ``i`` is a member."""
        mask = (np.right_shift(int(bits), np.arange(n_points)) & 1).astype(bool)
        return cls(n_points, mask)

    def to_bits(self) -> int:
        return int(sum(1 << int(i) for i in self.indices))

    @property
    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.mask)

    def cardinality(self) -> int:
        return int(np.count_nonzero(self.mask))

    def __len__(self):
        return self.cardinality()

    def __contains__(self, x) -> bool:
        return 0 <= int(x) < self.n_points and bool(self.mask[int(x)])

    def __iter__(self):
        return (int(i) for i in self.indices)

    def __eq__(self, other):
        if not isinstance(other, SubsetOracle):
            return NotImplemented
        return self.n_points == other.n_points and bool(np.array_equal(self.mask, other.mask))

    def __hash__(self):
        return hash((self.n_points, self.mask.tobytes()))

    def _same(self, other: "SubsetOracle"):
        if other.n_points != self.n_points:
            raise InvalidDimensionError("subsets live in different ground sets")

    def union(self, other):
        self._same(other)
        return SubsetOracle(self.n_points, self.mask | other.mask)

    def intersection(self, other):
        self._same(other)
        return SubsetOracle(self.n_points, self.mask & other.mask)

    def difference(self, other):
        self._same(other)
        return SubsetOracle(self.n_points, self.mask & ~other.mask)

    def symmetric_difference(self, other):
        self._same(other)
        return SubsetOracle(self.n_points, self.mask ^ other.mask)

    def issubset(self, other) -> bool:
        self._same(other)
        return not np.any(self.mask & ~other.mask)


@dataclass(frozen=True)
class FiConfig:
    n_points: int
    support_size: int
    bernoulli_p: float | None = None

    def __post_init__(self):
        if not 1 <= self.support_size <= self.n_points:
            raise InvalidConfigError("need 1 <= support_size <= n_points")
        if self.bernoulli_p is not None and not 0.0 <= self.bernoulli_p <= 1.0:
            raise InvalidConfigError("bernoulli_p must lie in [0, 1]")

    @property
    def sigma(self) -> float:
        return 1.0 / math.sqrt(self.support_size)


@dataclass(frozen=True)
class FiParams:
    """Target ``(k, delta, gamma)`` of a Fourier-Independent distribution."""

    k: int
    delta: float
    gamma: float

    def __post_init__(self):
        if self.k < 1:
            raise InvalidConfigError("k must be positive")
        if not 0.0 <= self.delta <= 1.0:
            raise InvalidConfigError("delta must lie in [0, 1]")
        if not 0.0 < self.gamma <= 0.5:
            raise InvalidConfigError("gamma must lie in (0, 1/2]")


@dataclass(frozen=True, eq=False)
class FiSample:
    psi: np.ndarray
    fourier_amps: np.ndarray
    u_set: SubsetOracle


@dataclass(frozen=True, eq=False)
class FiBatch:
    """Many draws at once; row ``t`` is one sample."""

    n_points: int
    support: np.ndarray     # (trials, l) member indices
    alpha: np.ndarray       # (trials, l)
    beta: np.ndarray        # (trials, N)
    u_mask: np.ndarray      # (trials, N) bool

    def __len__(self):
        return self.alpha.shape[0]

    def norms_sq(self) -> np.ndarray:
        return np.sum(np.abs(self.alpha) ** 2, axis=1)

    def sample(self, t: int) -> FiSample:
        psi = np.zeros(self.n_points, dtype=complex)
        psi[self.support[t]] = self.alpha[t]
        return FiSample(psi, self.beta[t].copy(), SubsetOracle(self.n_points, self.u_mask[t]))


# --------------------------------------------------------------------------
# Sampling
# --------------------------------------------------------------------------

def sample_support(cfg: FiConfig, rng) -> SubsetOracle:
    """Each point joins independently with probability ``cfg.bernoulli_p``."""
    if cfg.bernoulli_p is None:
        raise InvalidConfigError("bernoulli_p is not set")
    return SubsetOracle(cfg.n_points, rng.random(cfg.n_points) < cfg.bernoulli_p)


def sample_support_fixed(n_points: int, size: int, rng) -> SubsetOracle:
    """Uniformly random subset of exactly ``size`` points."""
    if not 0 <= size <= n_points:
        raise InvalidConfigError("need 0 <= size <= n_points")
    return SubsetOracle.from_indices(n_points, rng.choice(n_points, size, replace=False))


def _draw_batch(support: np.ndarray, n_points: int, rng) -> FiBatch:
    trials, ell = support.shape
    sigma = 1.0 / math.sqrt(ell)
    alpha = coremath.sample_complex_gaussian(coremath.GaussianParams(0j, sigma), rng, (trials, ell))
    psi = np.zeros((trials, n_points), dtype=complex)
    np.put_along_axis(psi, support, alpha, axis=1)
    # beta = sqrt(N) * qft(psi), i.e. N * ifft with numpy's (1/N) normalisation
    beta = n_points * np.fft.ifft(psi, axis=1)
    u_mask = rng.random((trials, n_points)) < -np.expm1(-np.abs(beta) ** 2)
    return FiBatch(n_points, support, alpha, beta, u_mask)


def _check_support(S: SubsetOracle, cfg: FiConfig) -> np.ndarray:
    if S.n_points != cfg.n_points:
        raise InvalidDimensionError("support and config disagree on N")
    idx = S.indices
    if idx.size == 0:
        raise InvalidInputError("support S must be nonempty")
    if idx.size != cfg.support_size:
        raise InvalidInputError(f"|S| = {idx.size} but support_size = {cfg.support_size}")
    return idx


def sample_fi(S: SubsetOracle, cfg: FiConfig, rng) -> FiSample:
    idx = _check_support(S, cfg)
    return _draw_batch(idx[None, :], cfg.n_points, rng).sample(0)


def sample_fi_batch(S: SubsetOracle, cfg: FiConfig, trials: int, rng) -> FiBatch:
    idx = _check_support(S, cfg)
    return _draw_batch(np.broadcast_to(idx, (trials, idx.size)), cfg.n_points, rng)


def sample_fi_random_supports(cfg: FiConfig, trials: int, rng) -> FiBatch:
    """One fresh uniform ``l``-subset per row, then one draw on it."""
    keys = rng.random((trials, cfg.n_points))
    support = np.sort(np.argpartition(keys, cfg.support_size - 1, axis=1)[:, :cfg.support_size], axis=1)
    return _draw_batch(support, cfg.n_points, rng)


# --------------------------------------------------------------------------
# The matrix M^S and its minors
# --------------------------------------------------------------------------

def _phase_matrix(rows: np.ndarray, cols: np.ndarray, n_points: int) -> np.ndarray:
    """``exp(2j*pi*r*c/N)``, with the product reduced mod N in integers first."""
    rc = np.multiply.outer(rows.astype(np.int64), cols.astype(np.int64)) % n_points
    return np.exp(2j * np.pi * rc / n_points)


def gram_minor(S: SubsetOracle, T) -> np.ndarray:
    """``G[i, j] = sum_{y in S} exp(2j*pi*(t_i - t_j)*y/N)`` for sorted ``T``.

    ``G = N * M^S_T``.  The diagonal is set to ``|S|`` exactly.
    """
    t = np.unique(np.asarray(list(T), dtype=np.int64))
    if t.size and (t[0] < 0 or t[-1] >= S.n_points):
        raise InvalidDimensionError("T has an index outside [0, N)")
    F = _phase_matrix(t, S.indices, S.n_points)
    G = F @ F.conj().T
    np.fill_diagonal(G, float(S.cardinality()))
    return G


def build_M(S: SubsetOracle) -> np.ndarray:
    """Dense ``QFT^dagger Pi_S QFT`` written in the index convention above.

    ``M^S`` is circulant: ``M[z, z'] = c[(z - z') mod N]`` with ``c = ifft(1_S)``.
    """
    N = S.n_points
    if N > DENSE_LIMIT:
        raise ResourceLimitError(f"dense M^S limited to N <= {DENSE_LIMIT}")
    c = np.fft.ifft(S.mask.astype(float))
    c[0] = S.cardinality() / N
    d = (np.arange(N)[:, None] - np.arange(N)[None, :]) % N
    return c[d]


def m_minor(S: SubsetOracle, T) -> np.ndarray:
    """``M^S_T`` built directly from the double sum; works for any N."""
    return gram_minor(S, T) / S.n_points


def offdiag_max(M) -> float:
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] < 2:
        raise InvalidDimensionError("offdiag_max needs dim >= 2")
    A = np.abs(M).copy()
    np.fill_diagonal(A, 0.0)
    return float(A.max())


def offdiag_max_of_support(S: SubsetOracle) -> float:
    """``offdiag_max(build_M(S))`` without the dense matrix (circulant shortcut)."""
    c = np.fft.ifft(S.mask.astype(float))
    return float(np.max(np.abs(c[1:]))) if S.n_points > 1 else 0.0


def tau_exact(S: SubsetOracle, T, ell: int | None = None,
              rel_tol: float = DEFAULT.dual_det_rel, return_dual: bool = False):
    """Probability that ``U'`` misses ``T``: ``1/det(I + (N/l) M^S_T)``.

    Also evaluates the dual ``l x l`` determinant ``det(I + (N/l) M^T_S)`` and
    raises if the two differ by more than ``rel_tol`` (relative).
    """
    T = T if isinstance(T, SubsetOracle) else SubsetOracle.from_indices(S.n_points, T)
    n_s = S.cardinality()
    if ell is None:
        ell = n_s
    if n_s == 0 or n_s != ell:
        raise InvalidInputError(f"need |S| = ell >= 1 (|S| = {n_s}, ell = {ell})")
    if T.cardinality() == 0:
        return (1.0, 1.0) if return_dual else 1.0
    primal = np.eye(T.cardinality()) + gram_minor(S, T.indices) / ell
    dual = np.eye(n_s) + gram_minor(T, S.indices) / ell
    d1 = coremath.det_hermitian(primal, atol=1e-9)
    d2 = coremath.det_hermitian(dual, atol=1e-9)
    if abs(d1 - d2) > rel_tol * max(abs(d1), abs(d2)):
        raise InvariantViolationError(f"dual determinants disagree: {d1!r} vs {d2!r}")
    return (1.0 / d1, 1.0 / d2) if return_dual else 1.0 / d1


def tau_monte_carlo(S: SubsetOracle, T, cfg: FiConfig, trials: int, rng,
                    estimator: str = "conditional", chunk: int = 20_000):
    """Estimate ``Pr[T and U' disjoint]`` with its standard error.

    ``conditional`` averages ``exp(-sum_{z in T} |beta_z|^2)`` over amplitude
    draws.  ``indicator`` runs the full sampler and counts disjoint outcomes;
    its error is binomial.
    """
    T = T if isinstance(T, SubsetOracle) else SubsetOracle.from_indices(S.n_points, T)
    idx = _check_support(S, cfg)
    if trials < 1000:
        raise InvalidInputError("tau_monte_carlo needs at least 1000 trials")
    if T.cardinality() == 0:
        return 1.0, 0.0
    if estimator == "conditional":
        F = _phase_matrix(T.indices, idx, cfg.n_points)
        alpha = coremath.sample_complex_gaussian(
            coremath.GaussianParams(0j, cfg.sigma), rng, (trials, idx.size))
        beta_T = alpha @ F.T
        vals = np.exp(-np.sum(np.abs(beta_T) ** 2, axis=1))
        return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(trials))
    if estimator == "indicator":
        hits = 0
        done = 0
        while done < trials:
            m = min(chunk, trials - done)
            b = sample_fi_batch(S, cfg, m, rng)
            hits += int(np.count_nonzero(~np.any(b.u_mask[:, T.mask], axis=1)))
            done += m
        p = hits / trials
        return p, math.sqrt(p * (1 - p) / trials)
    raise InvalidInputError(f"unknown estimator {estimator!r}")


# --------------------------------------------------------------------------
# Statistics of a sample
# --------------------------------------------------------------------------

def acceptance_stat(sample: FiSample) -> float:
    """Normalised Fourier mass of the state on ``U'``."""
    norm_sq = float(np.sum(np.abs(sample.psi) ** 2))
    if norm_sq == 0.0:
        raise InvalidInputError("zero state")
    hat = coremath.qft(sample.psi)
    return float(np.sum(np.abs(hat[sample.u_set.mask]) ** 2) / norm_sq)


def acceptance_stats(batch: FiBatch, u_mask: np.ndarray | None = None) -> np.ndarray:
    """Row-wise ``acceptance_stat``; ``u_mask`` overrides the batch's sets."""
    u = batch.u_mask if u_mask is None else u_mask
    weight = np.abs(batch.beta) ** 2 / batch.n_points
    return np.sum(weight * u, axis=1) / batch.norms_sq()


# --------------------------------------------------------------------------
# Analytic tails
# --------------------------------------------------------------------------

def norm_tail_bound(eps: float, ell: int) -> float:
    return 2.0 * math.exp(-eps ** 2 * ell / 8.0)


def offdiag_tail_bound(eps: float, n_points: int, ell: int) -> float:
    return 2.0 * n_points ** 2 * math.exp(-eps ** 2 * n_points ** 2 / (8.0 * ell))


def detupperavg_tail_bound(eps: float, n_points: int, ell: int) -> float:
    return 2.0 * n_points ** 2 * math.exp(-eps ** 2 * ell / 2.0)


def probaccept_tail_bound(eps: float, n_points: int, ell: int) -> float:
    return (3.0 * (1.0 / n_points + ell ** 2 / n_points ** 2) / eps ** 2
            + 4.0 * n_points ** 2 * math.exp(-ell * eps ** 2 / 32.0))


def norm_concentration_experiment(cfg: FiConfig, trials: int, rng,
                                  eps_grid=(0.25, 0.5, 1.0)) -> dict:
    """Empirical ``Pr[| ||psi||^2 - 1 | > eps]`` against ``2 exp(-eps^2 l/8)``.

    The squared norm only depends on ``l``, so the support is ``{0..l-1}``.
    """
    alpha = coremath.sample_complex_gaussian(
        coremath.GaussianParams(0j, cfg.sigma), rng, (trials, cfg.support_size))
    norms = np.sum(np.abs(alpha) ** 2, axis=1)
    rows = []
    for eps in eps_grid:
        out = np.abs(norms - 1.0) > eps
        p = float(out.mean())
        bound = norm_tail_bound(eps, cfg.support_size)
        rows.append({
            "eps": eps,
            "exceedance": p,
            "se": math.sqrt(p * (1 - p) / trials),
            "bound": bound,
            "pass": p <= bound,
        })
    return {
        "ell": cfg.support_size,
        "trials": trials,
        "mean_norm_sq": float(norms.mean()),
        "mean_norm_sq_se": float(norms.std(ddof=1) / math.sqrt(trials)),
        "rows": rows,
        "pass": all(r["pass"] for r in rows),
    }

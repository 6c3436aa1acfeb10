"""Explicit distributions over ``{0,1}^m``, k-wise uniformity, and the
substitution distance.

Atoms are integers ``x`` in ``[0, 2^m)``; coordinate ``i`` is bit ``i`` of
``x``.  A subset ``U`` of ``[m]`` corresponds to the atom ``sum_{z in U} 2^z``.

k-wise uniformity is tested through parity biases
``E[(-1)^{sum_{i in T} x_i}]``: all marginals on at most ``k`` coordinates
are uniform iff every bias with ``1 <= |T| <= k`` vanishes.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .errors import (
    ConditionalUndefinedError,
    InvalidConfigError,
    InvalidDimensionError,
    InvalidIndexError,
    InvalidInputError,
    SolverError,
)
from .fidist import FiConfig, SubsetOracle, sample_fi_batch
from .tolerances import DEFAULT

MAX_HIST_COORDS = 14
MAX_LP_COORDS = 7


@dataclass(frozen=True, eq=False)
class ExplicitDistribution:
    n_coords: int
    probs: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not 1 <= self.n_coords <= MAX_HIST_COORDS:
            raise InvalidConfigError(f"n_coords must lie in [1, {MAX_HIST_COORDS}]")
        p = np.asarray(self.probs, dtype=float)
        if p.shape != (2 ** self.n_coords,):
            raise InvalidDimensionError(f"expected {2 ** self.n_coords} probabilities")
        if np.any(p < 0):
            raise InvalidInputError("probabilities must be nonnegative")
        if abs(p.sum() - 1.0) > DEFAULT.prob_sum:
            raise InvalidInputError(f"probabilities sum to {p.sum()!r}")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @classmethod
    def uniform(cls, m: int) -> "ExplicitDistribution":
        return cls(m, np.full(2 ** m, 2.0 ** -m))

    @classmethod
    def point_mass(cls, m: int, atom: int) -> "ExplicitDistribution":
        p = np.zeros(2 ** m)
        p[atom] = 1.0
        return cls(m, p)

    @classmethod
    def uniform_on(cls, m: int, atoms) -> "ExplicitDistribution":
        atoms = list(atoms)
        p = np.zeros(2 ** m)
        np.add.at(p, atoms, 1.0 / len(atoms))
        return cls(m, p)

    @classmethod
    def from_unnormalised(cls, m: int, weights) -> "ExplicitDistribution":
        w = np.clip(np.asarray(weights, dtype=float), 0.0, None)
        return cls(m, w / w.sum())

    def to_json(self) -> dict:
        return {"m": self.n_coords, "probs": [float(x) for x in self.probs]}

    @classmethod
    def from_json(cls, obj: dict) -> "ExplicitDistribution":
        return cls(int(obj["m"]), np.asarray(obj["probs"], dtype=float))

    def bit_table(self) -> np.ndarray:
        """``(2^m, m)`` array whose row ``x`` lists the coordinates of atom ``x``."""
        return _bits(self.n_coords)


@dataclass(frozen=True, eq=False)
class Coupling:
    """Joint law of ``(Z0, Z1)``; ``joint[x, y] = Pr[Z0 = x, Z1 = y]``."""

    n_coords: int
    joint: np.ndarray = field(repr=False)

    def __post_init__(self):
        J = np.asarray(self.joint, dtype=float)
        n = 2 ** self.n_coords
        if J.shape != (n, n):
            raise InvalidDimensionError(f"expected a {n}x{n} joint table")
        if np.any(J < -DEFAULT.coupling_sum):
            raise InvalidInputError("joint table has negative entries")
        if abs(J.sum() - 1.0) > DEFAULT.coupling_sum:
            raise InvalidInputError(f"joint table sums to {J.sum()!r}")
        J = np.clip(J, 0.0, None)
        J.setflags(write=False)
        object.__setattr__(self, "joint", J)

    @classmethod
    def identity(cls, d: ExplicitDistribution) -> "Coupling":
        return cls(d.n_coords, np.diag(d.probs))

    @classmethod
    def product(cls, a: ExplicitDistribution, b: ExplicitDistribution) -> "Coupling":
        return cls(a.n_coords, np.outer(a.probs, b.probs))

    def first(self) -> np.ndarray:
        return self.joint.sum(axis=1)

    def second(self) -> np.ndarray:
        return self.joint.sum(axis=0)

    def disagreement(self) -> np.ndarray:
        """``Pr[Z0_i != Z1_i]`` for every coordinate ``i``."""
        bits = _bits(self.n_coords)
        return np.array([
            float(np.sum(self.joint * (bits[:, i][:, None] != bits[:, i][None, :])))
            for i in range(self.n_coords)
        ])

    def to_json(self) -> dict:
        return {"m": self.n_coords, "joint": [[float(x) for x in row] for row in self.joint]}

    @classmethod
    def from_json(cls, obj: dict) -> "Coupling":
        return cls(int(obj["m"]), np.asarray(obj["joint"], dtype=float))


@dataclass(frozen=True)
class ConjectureParams:
    r: int
    k: int
    zeta: float = 0.0
    eta: float = 0.0

    def validate(self, m: int):
        if not 1 <= self.k <= m or not 1 <= self.r <= m:
            raise InvalidConfigError(f"need 1 <= r, k <= m = {m}")
        if self.zeta < 0 or self.eta < 0:
            raise InvalidConfigError("zeta and eta must be nonnegative")


def _bits(m: int) -> np.ndarray:
    return ((np.arange(2 ** m)[:, None] >> np.arange(m)[None, :]) & 1).astype(np.int8)


def _subsets(m: int, kmax: int, kmin: int = 1):
    for t in range(kmin, kmax + 1):
        yield from itertools.combinations(range(m), t)


def _characters(m: int, k: int):
    """Rows ``chi_T(x) = (-1)^{sum_{i in T} x_i}`` for ``1 <= |T| <= k``."""
    bits = _bits(m)
    Ts = list(_subsets(m, k))
    chi = np.empty((len(Ts), 2 ** m))
    for r, T in enumerate(Ts):
        chi[r] = 1 - 2 * (bits[:, list(T)].sum(axis=1) % 2)
    return Ts, chi


# --------------------------------------------------------------------------
# Marginals and uniformity
# --------------------------------------------------------------------------

def marginal_zero_prob(d: ExplicitDistribution, T) -> float:
    """``Pr[x_i = 0 for all i in T]``."""
    T = [int(i) for i in T]
    if any(i < 0 or i >= d.n_coords for i in T):
        raise InvalidIndexError(f"coordinate out of range for m = {d.n_coords}")
    sel = 0
    for i in T:
        sel |= 1 << i
    atoms = np.arange(2 ** d.n_coords)
    return float(d.probs[(atoms & sel) == 0].sum())


def parity_biases(d: ExplicitDistribution, k: int):
    """``[(T, E[chi_T])]`` for every ``T`` with ``1 <= |T| <= k``."""
    Ts, chi = _characters(d.n_coords, k)
    return list(zip(Ts, (chi @ d.probs).tolist()))


def is_kwise_uniform(d: ExplicitDistribution, k: int, tol: float = DEFAULT.kwise) -> bool:
    if not 0 <= k <= d.n_coords:
        raise InvalidInputError("need 0 <= k <= m")
    if k == 0:
        return True
    return all(abs(b) <= tol for _, b in parity_biases(d, k))


def linear_code_distribution(m: int, dual_generators) -> ExplicitDistribution:
    """Uniform distribution on ``{x : <x, h> = 0 mod 2 for every h}``.

    It is k-wise uniform exactly for ``k`` below the minimum weight of a
    nonzero word in the span of the ``h``.
    """
    bits = _bits(m)
    ok = np.ones(2 ** m, dtype=bool)
    for h in dual_generators:
        h = np.asarray(h, dtype=np.int8)
        ok &= (bits @ h) % 2 == 0
    return ExplicitDistribution.uniform_on(m, np.flatnonzero(ok))


# --------------------------------------------------------------------------
# Linear programs
# --------------------------------------------------------------------------

def _coupling_lp_blocks(m: int):
    """Sparse constraint blocks shared by both LPs.

    Variables are ``joint.ravel()`` (row-major, ``x * 2^m + y``) followed by
    ``eps``.
    """
    n = 2 ** m
    nv = n * n
    eye = sp.identity(n, format="csr")
    ones = sp.csr_matrix(np.ones((1, n)))
    rows = sp.kron(eye, ones, format="csr")        # sum_y J[x, y]
    cols = sp.kron(ones, eye, format="csr")        # sum_x J[x, y]
    bits = _bits(m)
    dis = np.stack([(bits[:, i][:, None] != bits[:, i][None, :]).ravel() for i in range(m)])
    disagree = sp.hstack([sp.csr_matrix(dis.astype(float)), -sp.csr_matrix(np.ones((m, 1)))],
                         format="csr")
    return nv, rows, cols, disagree


def _solve(c, A_ub, b_ub, A_eq, b_eq, nv, gap_tol):
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                  bounds=[(0, None)] * nv + [(0, None)], method="highs")
    if res.status != 0:
        raise SolverError(f"LP failed (status {res.status}): {res.message}")
    dual = float(b_eq @ res.eqlin.marginals + b_ub @ res.ineqlin.marginals)
    gap = abs(res.fun - dual)
    if gap > gap_tol:
        raise SolverError(f"duality gap {gap:.3e} exceeds {gap_tol:.1e}")
    return res, gap


def substitution_distance(a: ExplicitDistribution, b: ExplicitDistribution,
                          gap_tol: float = DEFAULT.lp_gap):
    """Smallest ``eps`` such that some coupling of ``a`` and ``b`` disagrees on
    every coordinate with probability at most ``eps``.

    Returns ``(eps, coupling)``.  Optimality is certified by the LP duality gap.
    """
    if a.n_coords != b.n_coords:
        raise InvalidDimensionError("distributions have different m")
    m = a.n_coords
    if m > MAX_LP_COORDS:
        raise InvalidConfigError(f"coupling LP limited to m <= {MAX_LP_COORDS}")
    nv, rows, cols, disagree = _coupling_lp_blocks(m)
    pad = sp.csr_matrix((2 ** m, 1))
    A_eq = sp.vstack([sp.hstack([rows, pad]), sp.hstack([cols, pad])], format="csr")
    b_eq = np.concatenate([a.probs, b.probs])
    c = np.zeros(nv + 1)
    c[-1] = 1.0
    res, gap = _solve(c, disagree, np.zeros(m), A_eq, b_eq, nv, gap_tol)
    J = res.x[:nv].reshape(2 ** m, 2 ** m)
    J = np.clip(J, 0.0, None)
    return float(res.x[-1]), Coupling(m, J / J.sum())


def conjecture_hypothesis_table(x0: ExplicitDistribution, r: int, zeta: float,
                                tol: float = 1e-9):
    """Zero-marginal check ``2^-|T| <= Pr[x_T = 0] <= (1 + zeta) 2^-|T|`` for
    every nonempty ``T`` with ``|T| <= r``."""
    table = []
    for T in _subsets(x0.n_coords, r):
        p = marginal_zero_prob(x0, T)
        lo = 2.0 ** -len(T)
        hi = (1.0 + zeta) * lo
        table.append({"T": list(T), "prob": p, "lower": lo, "upper": hi,
                      "ok": lo - tol <= p <= hi + tol})
    return table


@dataclass(frozen=True, eq=False)
class ProbeResult:
    x1: ExplicitDistribution
    epsilon: float
    coupling: Coupling
    report: dict


def conjecture_probe(x0: ExplicitDistribution, params: ConjectureParams,
                     gap_tol: float = DEFAULT.lp_gap) -> ProbeResult:
    """Closest k-wise uniform distribution to ``x0`` in substitution distance.

    One LP over couplings whose first marginal is ``x0`` and whose second
    marginal has every parity bias of order ``1..k`` equal to zero.
    """
    m = x0.n_coords
    params.validate(m)
    if m > MAX_LP_COORDS:
        raise InvalidConfigError(f"coupling LP limited to m <= {MAX_LP_COORDS}")
    table = conjecture_hypothesis_table(x0, params.r, params.zeta)
    nv, rows, cols, disagree = _coupling_lp_blocks(m)
    Ts, chi = _characters(m, params.k)
    pad_r = sp.csr_matrix((2 ** m, 1))
    pad_c = sp.csr_matrix((len(Ts), 1))
    A_eq = sp.vstack([sp.hstack([rows, pad_r]),
                      sp.hstack([sp.csr_matrix(chi) @ cols, pad_c])], format="csr")
    b_eq = np.concatenate([x0.probs, np.zeros(len(Ts))])
    c = np.zeros(nv + 1)
    c[-1] = 1.0
    res, gap = _solve(c, disagree, np.zeros(m), A_eq, b_eq, nv, gap_tol)
    J = np.clip(res.x[:nv].reshape(2 ** m, 2 ** m), 0.0, None)
    J /= J.sum()
    coupling = Coupling(m, J)
    x1 = ExplicitDistribution(m, coupling.second() / coupling.second().sum())
    eps = float(res.x[-1])
    worst_bias = max((abs(b) for _, b in parity_biases(x1, params.k)), default=0.0)
    report = {
        "m": m,
        "params": {"r": params.r, "k": params.k, "zeta": params.zeta, "eta": params.eta},
        "epsilon": eps,
        "duality_gap": gap,
        "eps_le_eta": eps <= params.eta,
        "x1_max_parity_bias": worst_bias,
        "x1_kwise_uniform": worst_bias <= DEFAULT.kwise,
        "hypothesis_violations": sum(not row["ok"] for row in table),
        "hypothesis_table": table,
        # the asymptotic requirement on N zeta^3 / r^6, evaluated raw at N = m
        "n_zeta3_over_r6": m * params.zeta ** 3 / params.r ** 6,
        "max_disagreement": float(coupling.disagreement().max()),
    }
    return ProbeResult(x1, eps, coupling, report)


# --------------------------------------------------------------------------
# Bridges to the sampler
# --------------------------------------------------------------------------

def empirical_u_distribution(S: SubsetOracle, cfg: FiConfig, trials: int, rng,
                             chunk: int = 100_000):
    """Histogram of sampled ``U'`` patterns with per-atom standard errors.

    Returns ``(distribution, report)``.
    """
    m = cfg.n_points
    if m > MAX_HIST_COORDS:
        raise InvalidConfigError(f"histograms limited to N <= {MAX_HIST_COORDS}")
    weights = 1 << np.arange(m)
    counts = np.zeros(2 ** m, dtype=np.int64)
    done = 0
    while done < trials:
        n = min(chunk, trials - done)
        b = sample_fi_batch(S, cfg, n, rng)
        counts += np.bincount(b.u_mask.astype(np.int64) @ weights, minlength=2 ** m)
        done += n
    p = counts / trials
    d = ExplicitDistribution(m, p)
    report = {
        "trials": trials,
        "probs": p.tolist(),
        "se": np.sqrt(p * (1 - p) / trials).tolist(),
        "coordinate_inclusion": [1.0 - marginal_zero_prob(d, [i]) for i in range(m)],
    }
    return d, report


def couple_and_substitute(u_prime: SubsetOracle, coupling: Coupling, rng) -> SubsetOracle:
    """Draw ``U`` from the coupling's second coordinate given the first is ``U'``."""
    if u_prime.n_points != coupling.n_coords:
        raise InvalidDimensionError("set and coupling disagree on m")
    row = coupling.joint[u_prime.to_bits()]
    mass = row.sum()
    if mass <= 0:
        raise ConditionalUndefinedError(f"coupling row {u_prime.to_bits()} has zero mass")
    y = rng.choice(row.size, p=row / mass)
    return SubsetOracle.from_bits(coupling.n_coords, int(y))


def couple_and_substitute_many(atoms: np.ndarray, coupling: Coupling, rng) -> np.ndarray:
    """Vectorised ``couple_and_substitute`` on integer atoms."""
    rows = coupling.joint[atoms]
    mass = rows.sum(axis=1)
    if np.any(mass <= 0):
        bad = int(atoms[np.flatnonzero(mass <= 0)[0]])
        raise ConditionalUndefinedError(f"coupling row {bad} has zero mass")
    cdf = np.cumsum(rows, axis=1) / mass[:, None]
    u = rng.random(len(atoms))[:, None]
    return np.minimum((cdf < u).sum(axis=1), rows.shape[1] - 1)


def marginal_tv_lower_bound(a: ExplicitDistribution, b: ExplicitDistribution) -> float:
    """``max_i |Pr_a[x_i = 1] - Pr_b[x_i = 1]|``; no coupling can do better."""
    bits = _bits(a.n_coords)
    return float(np.max(np.abs(bits.T @ a.probs - bits.T @ b.probs)))


def max_disagreement(coupling: Coupling) -> float:
    return float(coupling.disagreement().max())

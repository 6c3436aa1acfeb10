"""The two-step subset/Fourier verifier and query-lower-bound experiments.

The verifier measures the witness against ``S`` and, on success, measures the
Fourier transform of the collapsed state against ``U``.  The remaining
functions drive :mod:`filab.queries` strategies to check query-mass
inequalities, k-wise indistinguishability, and the classical-witness
extraction loop.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import coremath
from .errors import InvalidInputError, ResourceLimitError
from .fidist import SubsetOracle, m_minor
from .kwise import ExplicitDistribution, is_kwise_uniform
from .queries import (
    QueryStrategy,
    accept_probability,
    query_register_distribution,
    run_strategy,
)
from .strategies import grover
from .tolerances import DEFAULT

MULTI_SEARCH_C = 48 * math.e
MAX_ENUM_POINTS = 8


def run_verifier(S: SubsetOracle, U: SubsetOracle, psi, norm_tol: float = DEFAULT.norm) -> float:
    """Exact acceptance probability of the two-measurement verifier on ``psi``."""
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (S.n_points,) or U.n_points != S.n_points:
        raise InvalidInputError("state and oracles must share N")
    if abs(float(np.vdot(psi, psi).real) - 1.0) > norm_tol:
        raise InvalidInputError("witness state must be normalised")
    p1 = float(np.sum(np.abs(psi[S.mask]) ** 2))
    if p1 == 0.0:
        return 0.0
    phi = np.where(S.mask, psi, 0.0) / math.sqrt(p1)
    p2 = float(np.sum(np.abs(coremath.qft(phi)[U.mask]) ** 2))
    return p1 * p2


# --------------------------------------------------------------------------
# BBBV hybrid bound
# --------------------------------------------------------------------------

def bbbv_check(strategy: QueryStrategy, O: SubsetOracle, O_prime: SubsetOracle,
               oracle: str = "O", others: dict | None = None, witness: int | None = None) -> dict:
    """``|Pr[A^O = 1] - Pr[A^O' = 1]| <= 4 sqrt(q M_V)`` with ``V = O xor O'``."""
    others = dict(others or {})
    dist, prof = run_strategy(strategy, {**others, oracle: O}, witness)
    dist2, _ = run_strategy(strategy, {**others, oracle: O_prime}, witness)
    p, p2 = accept_probability(strategy, dist), accept_probability(strategy, dist2)
    V = O.symmetric_difference(O_prime)
    q = strategy.queries_to(oracle)
    mass = prof.set_mass(V, oracle)
    bound = 4.0 * math.sqrt(q * mass)
    diff = abs(p - p2)
    return {
        "q": q,
        "accept_O": p,
        "accept_O_prime": p2,
        "difference": diff,
        "mass_V": mass,
        "bound": bound,
        "pass": diff <= bound + 1e-12,
    }


# --------------------------------------------------------------------------
# k-wise independence vs uniform oracles
# --------------------------------------------------------------------------

def averaged_output(strategy: QueryStrategy, dist: ExplicitDistribution,
                    oracle: str = "O", others: dict | None = None,
                    witness: int | None = None) -> np.ndarray:
    """Output distribution averaged over oracles drawn from ``dist``.

    Oracle atom ``x`` is the subset whose indicator is the bit pattern of ``x``.
    """
    N = strategy.n_points
    if dist.n_coords != N:
        raise InvalidInputError("oracle distribution must have m = N")
    if N > MAX_ENUM_POINTS:
        raise ResourceLimitError(f"exact enumeration limited to N <= {MAX_ENUM_POINTS}")
    others = dict(others or {})
    acc = np.zeros((N, 2, strategy.ancilla_dim))
    for atom in np.flatnonzero(dist.probs > 0):
        out, _ = run_strategy(strategy, {**others, oracle: SubsetOracle.from_bits(N, int(atom))},
                              witness)
        acc += dist.probs[atom] * out
    return acc


def kwise_equivalence_check(strategy: QueryStrategy, dist: ExplicitDistribution,
                            oracle: str = "O", tol: float = 1e-10, **kw) -> dict:
    """Compare outputs under ``dist``-oracles and uniformly random oracles."""
    N = strategy.n_points
    q = strategy.queries_to(oracle)
    a = averaged_output(strategy, dist, oracle, **kw)
    b = averaged_output(strategy, ExplicitDistribution.uniform(N), oracle, **kw)
    dev = float(np.max(np.abs(a - b)))
    k = 2 * q
    return {
        "q": q,
        "k": k,
        "dist_is_2q_wise_uniform": is_kwise_uniform(dist, min(k, N)),
        "max_abs_difference": dev,
        "equal": dev <= tol,
    }


# --------------------------------------------------------------------------
# Classical-witness extraction
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class GenSmallSetConfig:
    iterations: int
    witness: int = 0
    seed: int | None = None

    def __post_init__(self):
        if self.iterations < 1:
            raise InvalidInputError("iterations must be >= 1")


@dataclass(eq=False)
class GenSmallSetReport:
    extracted: SubsetOracle
    per_iteration_hit: list = field(default_factory=list)
    measured_query_indices: list = field(default_factory=list)
    # exact Pr[new element at iteration j | S' before j]
    new_element_prob: list = field(default_factory=list)


def s_query_distribution(strategy: QueryStrategy, S: SubsetOracle, U: SubsetOracle,
                         witness: int = 0, s_name: str = "S", u_name: str = "U") -> np.ndarray:
    """Law of the measured string when a uniformly chosen ``S``-query is measured."""
    oracles = {s_name: S}
    if u_name in strategy.oracle_names():
        oracles[u_name] = U
    _, prof = run_strategy(strategy, oracles, witness)
    calls = prof.calls(s_name)
    if not calls:
        raise InvalidInputError("strategy never queries S")
    mix = np.mean([m / m.sum() for m in calls], axis=0)
    return mix / mix.sum()


def gen_small_set(strategy: QueryStrategy, S: SubsetOracle, U: SubsetOracle,
                  cfg: GenSmallSetConfig, rng, s_name: str = "S", u_name: str = "U",
                  measure_law: np.ndarray | None = None) -> GenSmallSetReport:
    """Harvest ``S' subset S`` by measuring randomly chosen ``S``-queries.

    Each iteration reruns the strategy from scratch on ``(S, U)``, stops just
    before a uniformly chosen ``S``-query, measures the query register, and
    keeps the result if it is a new member of ``S``.  Because there is no
    earlier measurement, the law of the measured string is the query mass at
    that call, so one exact run serves every iteration.
    """
    law = measure_law if measure_law is not None else \
        s_query_distribution(strategy, S, U, cfg.witness, s_name, u_name)
    N = S.n_points
    have = np.zeros(N, dtype=bool)
    rep = GenSmallSetReport(SubsetOracle.empty(N))
    draws = rng.choice(N, size=cfg.iterations, p=law)
    for y in draws:
        y = int(y)
        rep.new_element_prob.append(float(law[S.mask & ~have].sum()))
        hit = bool(S.mask[y] and not have[y])
        if hit:
            have[y] = True
        rep.per_iteration_hit.append(hit)
        rep.measured_query_indices.append(y)
    rep.extracted = SubsetOracle(N, have)
    return rep


def new_element_sequence(strategy: QueryStrategy, S: SubsetOracle, U: SubsetOracle,
                         iterations: int, reruns: int, rng, witness: int = 0) -> dict:
    """Per-iteration new-element probabilities averaged over independent reruns.

    Two estimators: the hit indicator, and the exact conditional probability
    given the prefix (lower variance).  Means come with standard errors.
    """
    if reruns < 2:
        raise InvalidInputError("need at least two reruns")
    law = s_query_distribution(strategy, S, U, witness)
    cfg = GenSmallSetConfig(iterations, witness)
    hits = np.empty((reruns, iterations))
    cond = np.empty((reruns, iterations))
    for r in range(reruns):
        rep = gen_small_set(strategy, S, U, cfg, rng, measure_law=law)
        hits[r] = rep.per_iteration_hit
        cond[r] = rep.new_element_prob
    se = lambda a: (a.std(axis=0, ddof=1) / math.sqrt(reruns)).tolist()
    return {
        "reruns": reruns,
        "hit_mean": hits.mean(axis=0).tolist(),
        "hit_se": se(hits),
        "conditional_mean": cond.mean(axis=0).tolist(),
        "conditional_se": se(cond),
        "mean_extracted": float(hits.sum(axis=1).mean()),
    }


def non_increasing_within(means, ses, z: float = 2.0) -> bool:
    means, ses = np.asarray(means), np.asarray(ses)
    slack = z * np.sqrt(ses[1:] ** 2 + ses[:-1] ** 2)
    return bool(np.all(means[1:] <= means[:-1] + slack + 1e-15))


# --------------------------------------------------------------------------
# Small supports see at most 1/2 + v eps of any Fourier-side set
# --------------------------------------------------------------------------

def pairwise_small_check(U: SubsetOracle, S_prime: SubsetOracle,
                         epsilon: float | None = None) -> dict:
    """Largest Fourier mass on ``U`` of a normalised state supported on ``S'``.

    That maximum is the top eigenvalue of the ``|S'| x |S'|`` minor of
    ``M^U``.  It is compared against the Gershgorin bound ``1/2 + v eps_emp``
    where ``eps_emp`` is the largest deviation of a diagonal entry from 1/2 or
    of an off-diagonal entry from 0.  With ``epsilon`` given, the stated bound
    ``1/2 + v epsilon`` is also evaluated when the entry conditions hold.
    """
    v = S_prime.cardinality()
    if v < 1:
        raise InvalidInputError("S' must be nonempty")
    minor = m_minor(U, S_prime.indices)
    lam = coremath.max_eigenvalue(minor, atol=1e-12)
    diag_dev = float(np.max(np.abs(np.diag(minor).real - 0.5)))
    off = 0.0
    if v > 1:
        A = np.abs(minor).copy()
        np.fill_diagonal(A, 0.0)
        off = float(A.max())
    eps_emp = max(diag_dev, off)
    gersh = 0.5 + v * eps_emp
    out = {
        "v": v,
        "max_eigenvalue": lam,
        "eps_empirical": eps_emp,
        "gershgorin_bound": gersh,
        "gershgorin_disc_bound": coremath.gershgorin_upper(minor),
        "pass": lam <= gersh + 1e-12,
    }
    if epsilon is not None:
        cond = eps_emp <= epsilon
        out.update({
            "epsilon": epsilon,
            "conditions_hold": cond,
            "stated_bound": 0.5 + v * epsilon,
            "stated_bound_pass": (lam <= 0.5 + v * epsilon + 1e-12) if cond else None,
        })
    return out


# --------------------------------------------------------------------------
# Finding many marked items
# --------------------------------------------------------------------------

def multi_search_bound(p: float, Q: int, K: int, C: float = MULTI_SEARCH_C) -> float:
    return (C * p * (Q / K) ** 2) ** K


def classical_success_probability(p: float, Q: int, K: int) -> float:
    """``Pr[Binomial(Q, p) >= K]``: Q distinct probes of an iid-p marked set."""
    return float(sum(math.comb(Q, j) * p ** j * (1 - p) ** (Q - j) for j in range(K, Q + 1)))


def multi_search_experiment(search_strategy: str, p: float, N: int, K: int, Q: int,
                            trials: int, rng) -> dict:
    """Empirical rate of outputting ``K`` distinct marked items with ``Q`` queries.

    ``classical`` probes ``Q`` distinct random points and outputs the marked
    ones.  ``grover`` runs ``K`` independent rounds of ``Q // K`` amplitude
    amplification steps and measures the query register after each.
    """
    if not 1 <= K <= Q:
        raise InvalidInputError("need Q >= K >= 1")
    successes = 0
    if search_strategy == "classical":
        if Q > N:
            raise InvalidInputError("classical prober needs Q <= N")
        for _ in range(trials):
            S = rng.random(N) < p
            probes = rng.choice(N, size=Q, replace=False)
            successes += int(np.count_nonzero(S[probes]) >= K)
        reference = classical_success_probability(p, Q, K)
    elif search_strategy == "grover":
        strat = grover(N, Q // K)
        reference = None
        for _ in range(trials):
            S = SubsetOracle(N, rng.random(N) < p)
            law = query_register_distribution(run_strategy(strat, {"S": S})[0])
            law = law / law.sum()
            outs = rng.choice(N, size=K, p=law)
            successes += int(len(set(outs.tolist())) == K and bool(np.all(S.mask[outs])))
    else:
        raise InvalidInputError(f"unknown search strategy {search_strategy!r}")
    rate = successes / trials
    bound = multi_search_bound(p, Q, K)
    return {
        "strategy": search_strategy,
        "p": p, "N": N, "K": K, "Q": Q, "trials": trials,
        "success_rate": rate,
        "se": math.sqrt(rate * (1 - rate) / trials),
        "reference_probability": reference,
        "bound": bound,
        "pass": rate <= bound,
    }


# --------------------------------------------------------------------------
# End to end: extract S', swap it in, compare acceptance
# --------------------------------------------------------------------------

def extraction_bound(Q: int, K: int, v: int) -> float:
    return 4.0 * (Q ** 3 * K / v) ** 0.25


def extraction_soundness(strategy: QueryStrategy, S: SubsetOracle, U: SubsetOracle,
                         v: int, rng, witness: int = 0) -> dict:
    """Gap in acceptance when ``S`` is replaced by the extracted ``S'``."""
    rep = gen_small_set(strategy, S, U, GenSmallSetConfig(v, witness), rng)
    Sp = rep.extracted
    oracles = {"S": S}
    if "U" in strategy.oracle_names():
        oracles["U"] = U
    dist, prof = run_strategy(strategy, oracles, witness)
    dist2, _ = run_strategy(strategy, {**oracles, "S": Sp}, witness)
    p, p2 = accept_probability(strategy, dist), accept_probability(strategy, dist2)
    Q = strategy.queries_to("S")
    K = Sp.cardinality()
    missed = prof.set_mass(S.difference(Sp), "S")
    return {
        "Q": Q,
        "K": K,
        "v": v,
        "accept_S": p,
        "accept_S_prime": p2,
        "gap": abs(p - p2),
        "bound": extraction_bound(Q, K, v),
        "mass_missed": missed,
        "bbbv_realised_bound": 4.0 * math.sqrt(Q * missed),
        "subset_ok": Sp.issubset(S),
    }

"""Small library of representative query strategies."""
from __future__ import annotations

import numpy as np
from scipy.stats import unitary_group

from .coremath import qft_matrix
from .errors import InvalidInputError
from .queries import OracleCall, QueryStrategy, Unitary

# |0> -> |->: X then H
MINUS_PREP = np.array([[1, 1], [1, -1]]) / np.sqrt(2) @ np.array([[0, 1], [1, 0]])


def prep_unitary(target) -> np.ndarray:
    """A unitary whose first column is the normalised ``target``.

    Built as a Householder reflection composed with a phase so that it is
    exactly unitary for any target.
    """
    t = np.asarray(target, dtype=complex)
    t = t / np.linalg.norm(t)
    n = t.size
    phase = t[0] / abs(t[0]) if abs(t[0]) > 0 else 1.0
    u = t / phase
    e0 = np.zeros(n, dtype=complex)
    e0[0] = 1.0
    w = e0 - u
    nw = np.linalg.norm(w)
    if nw < 1e-15:
        H = np.eye(n, dtype=complex)
    else:
        w /= nw
        H = np.eye(n, dtype=complex) - 2.0 * np.outer(w, w.conj())
    return H * phase


def reflection_about(state) -> np.ndarray:
    """``2|s><s| - I``."""
    s = np.asarray(state, dtype=complex)
    s = s / np.linalg.norm(s)
    return 2.0 * np.outer(s, s.conj()) - np.eye(s.size)


def classical_prober(n_points: int, x0: int, oracle: str = "S") -> QueryStrategy:
    """Query the single point ``x0``; accept iff it is marked."""
    if not 0 <= x0 < n_points:
        raise InvalidInputError("x0 outside [N]")
    perm = np.eye(n_points)
    perm[[0, x0]] = perm[[x0, 0]]
    return QueryStrategy(n_points, [Unitary(perm, "query"), OracleCall(oracle)],
                         name=f"classical-prober({x0})")


def uniform_prober(n_points: int, oracle: str = "S", queries: int = 1) -> QueryStrategy:
    """Query the uniform superposition ``queries`` times; accept on the response bit."""
    stages = [Unitary(qft_matrix(n_points), "query")]
    stages += [OracleCall(oracle)] * queries
    return QueryStrategy(n_points, stages, name=f"uniform-prober(q={queries})")


def grover(n_points: int, iterations: int, oracle: str = "S") -> QueryStrategy:
    """Amplitude amplification toward marked points, one query per iteration.

    The response register is held in ``|->`` so each call is a phase flip.
    Read the answer off the query register.
    """
    uniform = np.full(n_points, 1 / np.sqrt(n_points))
    diffusion = reflection_about(uniform)
    stages = [Unitary(qft_matrix(n_points), "query"), Unitary(MINUS_PREP, "response")]
    for _ in range(iterations):
        stages += [OracleCall(oracle), Unitary(diffusion, "query")]
    return QueryStrategy(n_points, stages, name=f"grover(it={iterations})")


def deutsch_distinguisher(n_points: int = 2, a: int = 0, b: int = 1,
                          oracle: str = "O") -> QueryStrategy:
    """One query that learns ``O(a) XOR O(b)``: the query register ends in
    ``|a>`` when they agree and in ``|b>`` when they differ."""
    if a == b or not (0 <= a < n_points and 0 <= b < n_points):
        raise InvalidInputError("need two distinct points in [N]")
    target = np.zeros(n_points)
    target[[a, b]] = 1 / np.sqrt(2)
    prep = prep_unitary(target)
    # Hadamard on span{|a>, |b>}, identity elsewhere
    had = np.eye(n_points, dtype=complex)
    had[np.ix_([a, b], [a, b])] = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    stages = [Unitary(prep, "query"), Unitary(MINUS_PREP, "response"),
              OracleCall(oracle), Unitary(had, "query")]
    return QueryStrategy(n_points, stages, name=f"deutsch({a},{b})")


def random_strategy(n_points: int, queries: int, rng, ancilla_dim: int = 1,
                    oracle: str = "O", output: str = "response") -> QueryStrategy:
    """Haar-random unitaries on the full space around ``queries`` oracle calls."""
    dim = 2 * n_points * ancilla_dim
    seed = int(rng.integers(2 ** 32))
    stages = []
    for j in range(queries + 1):
        U = unitary_group.rvs(dim, random_state=seed + j) if dim > 1 else np.eye(1)
        stages.append(Unitary(U, "full"))
        if j < queries:
            stages.append(OracleCall(oracle))
    return QueryStrategy(n_points, stages, ancilla_dim=ancilla_dim, output=output,
                         name=f"random(q={queries})")


def heavy_verifier(n_points: int, heavy_sets, spread: float = 0.1, s_queries: int = 2,
                   u_query: bool = True) -> QueryStrategy:
    """Toy witness-holding verifier.

    The witness ``w`` (ancilla value) selects ``heavy_sets[w]``.  The query
    register starts with weight ``1 - spread`` spread evenly over that set and
    ``spread`` spread over all of ``[N]``.  It then queries ``S`` ``s_queries``
    times, reflecting about its start state between calls, optionally queries
    ``U`` once, and accepts on the response bit.
    """
    if not 0.0 <= spread <= 1.0:
        raise InvalidInputError("spread must lie in [0, 1]")
    A = len(heavy_sets)
    preps = np.empty((A, n_points, n_points), dtype=complex)
    refls = np.empty_like(preps)
    for w, heavy in enumerate(heavy_sets):
        amp = np.full(n_points, spread / n_points)
        if len(heavy):
            amp[list(heavy)] += (1.0 - spread) / len(heavy)
        else:
            amp[:] = 1.0 / n_points
        start = np.sqrt(amp)
        preps[w] = prep_unitary(start)
        refls[w] = reflection_about(start)
    stages = [Unitary(preps, "query_by_ancilla")]
    for j in range(s_queries):
        if j:
            stages.append(Unitary(refls, "query_by_ancilla"))
        stages.append(OracleCall("S"))
    if u_query:
        stages.append(OracleCall("U"))
    return QueryStrategy(n_points, stages, ancilla_dim=A, name="heavy-verifier")


def ignoring_verifier(n_points: int) -> QueryStrategy:
    """Queries ``S`` and immediately uncomputes it, so acceptance is the ``U``
    answer on the uniform superposition whatever ``S`` is."""
    stages = [Unitary(qft_matrix(n_points), "query"),
              OracleCall("S"), OracleCall("S"), OracleCall("U")]
    return QueryStrategy(n_points, stages, name="ignoring-verifier")


BUILTIN = {
    "classical-prober": classical_prober,
    "uniform-prober": uniform_prober,
    "grover": grover,
    "deutsch": deutsch_distinguisher,
    "random": random_strategy,
    "heavy-verifier": heavy_verifier,
    "ignoring-verifier": ignoring_verifier,
}

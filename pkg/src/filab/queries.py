"""Dense state-vector simulation of oracle-query algorithms.

The register space is ``query (N) x response (2) x ancilla (A)``, stored as
an array of shape ``(N, 2, A)``; the flat basis index of ``|x, b, a>`` is
``(2 * x + b) * A + a``.  A strategy is a declarative list of stages, each
either a unitary or a call to a named subset oracle, which acts as
``|x, b, a> -> |x, b XOR [x in O], a>``.  Query mass is recorded immediately
before every oracle call.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    InvalidDimensionError,
    InvalidInputError,
    InvariantViolationError,
    ResourceLimitError,
)
from .fidist import SubsetOracle
from .tolerances import DEFAULT

MAX_DIM = 2 ** 22
REGISTERS = ("full", "query", "response", "ancilla", "query_by_ancilla")


@dataclass(frozen=True, eq=False)
class Unitary:
    """A unitary stage.

    ``register`` selects where ``matrix`` acts: the whole space, one
    register, or ``query_by_ancilla`` where ``matrix[a]`` acts on the query
    register when the ancilla holds ``a``.
    """

    matrix: np.ndarray = field(repr=False)
    register: str = "full"

    def __post_init__(self):
        if self.register not in REGISTERS:
            raise InvalidInputError(f"unknown register {self.register!r}")
        mat = np.asarray(self.matrix, dtype=complex)
        blocks = mat if self.register == "query_by_ancilla" else mat[None]
        if blocks.ndim != 3 or blocks.shape[1] != blocks.shape[2]:
            raise InvalidDimensionError(f"bad unitary shape {mat.shape}")
        eye = np.eye(blocks.shape[1])
        for blk in blocks:
            dev = np.max(np.abs(blk.conj().T @ blk - eye))
            if dev > DEFAULT.unitary:
                raise InvariantViolationError(f"stage is not unitary (deviation {dev:.2e})")
        object.__setattr__(self, "matrix", mat)


@dataclass(frozen=True)
class OracleCall:
    oracle: str


Stage = Unitary | OracleCall


@dataclass(eq=False)
class QueryStrategy:
    """An oracle algorithm over ``[N]`` with an ``A``-dimensional ancilla.

    ``output`` names the measured accept bit: ``"response"`` or
    ``"ancilla:<bit>"`` (bit ``j`` of the ancilla basis label).  ``witness``
    is the default classical witness, loaded into the ancilla at the start.
    """

    n_points: int
    stages: list = field(default_factory=list)
    ancilla_dim: int = 1
    output: str = "response"
    witness: int = 0
    name: str = ""

    def __post_init__(self):
        if self.n_points < 1 or self.ancilla_dim < 1:
            raise InvalidDimensionError("register dimensions must be positive")
        for st in self.stages:
            if isinstance(st, Unitary):
                self._check_stage(st)
            elif not isinstance(st, OracleCall):
                raise InvalidInputError(f"unknown stage {st!r}")
        _output_selector(self.output, self.ancilla_dim)

    @property
    def dim(self) -> int:
        return 2 * self.n_points * self.ancilla_dim

    def _check_stage(self, st: Unitary):
        want = {
            "full": (self.dim, self.dim),
            "query": (self.n_points, self.n_points),
            "response": (2, 2),
            "ancilla": (self.ancilla_dim, self.ancilla_dim),
            "query_by_ancilla": (self.ancilla_dim, self.n_points, self.n_points),
        }[st.register]
        if st.matrix.shape != want:
            raise InvalidDimensionError(
                f"{st.register} unitary has shape {st.matrix.shape}, expected {want}")

    @property
    def num_queries(self) -> int:
        return sum(isinstance(s, OracleCall) for s in self.stages)

    def queries_to(self, oracle: str) -> int:
        return sum(isinstance(s, OracleCall) and s.oracle == oracle for s in self.stages)

    def oracle_names(self) -> list[str]:
        seen = []
        for s in self.stages:
            if isinstance(s, OracleCall) and s.oracle not in seen:
                seen.append(s.oracle)
        return seen


@dataclass
class QueryMassProfile:
    """Query mass ``M_x(i)`` recorded at each oracle call, in call order."""

    n_points: int
    oracles: list = field(default_factory=list)      # name of the i-th call
    per_query: list = field(default_factory=list)    # M_x(i) arrays

    def calls(self, oracle: str | None = None) -> list[np.ndarray]:
        return [m for name, m in zip(self.oracles, self.per_query)
                if oracle is None or name == oracle]

    def totals(self, oracle: str | None = None) -> np.ndarray:
        calls = self.calls(oracle)
        return np.sum(calls, axis=0) if calls else np.zeros(self.n_points)

    def set_mass(self, V, oracle: str | None = None) -> float:
        mask = V.mask if isinstance(V, SubsetOracle) else \
            SubsetOracle.from_indices(self.n_points, V).mask
        return float(self.totals(oracle)[mask].sum())


def _output_selector(output: str, ancilla_dim: int):
    if output == "response":
        return ("response", None)
    if output.startswith("ancilla:"):
        bit = int(output.split(":", 1)[1])
        if bit < 0 or (1 << bit) >= ancilla_dim:
            raise InvalidInputError(f"ancilla bit {bit} does not exist for A = {ancilla_dim}")
        return ("ancilla", bit)
    raise InvalidInputError(f"unknown output {output!r}")


def _apply(state: np.ndarray, st: Unitary) -> np.ndarray:
    U = st.matrix
    if st.register == "full":
        return (U @ state.reshape(-1)).reshape(state.shape)
    if st.register == "query":
        return np.tensordot(U, state, axes=(1, 0))
    if st.register == "response":
        return np.einsum("ij,xja->xia", U, state)
    if st.register == "ancilla":
        return np.einsum("ij,xbj->xbi", U, state)
    return np.einsum("aij,jba->iba", U, state)


def initial_state(strategy: QueryStrategy, witness: int | None = None) -> np.ndarray:
    w = strategy.witness if witness is None else witness
    if not 0 <= w < strategy.ancilla_dim:
        raise InvalidInputError(f"witness {w} outside ancilla range {strategy.ancilla_dim}")
    state = np.zeros((strategy.n_points, 2, strategy.ancilla_dim), dtype=complex)
    state[0, 0, w] = 1.0
    return state


def evolve(strategy: QueryStrategy, oracles: Mapping[str, SubsetOracle],
           witness: int | None = None, check_norm: bool = True):
    """Run every stage; return the final state and the query-mass profile."""
    if strategy.dim > MAX_DIM:
        raise ResourceLimitError(f"simulated dimension {strategy.dim} exceeds {MAX_DIM}")
    for name in strategy.oracle_names():
        if name not in oracles:
            raise InvalidInputError(f"no oracle supplied for {name!r}")
        if oracles[name].n_points != strategy.n_points:
            raise InvalidDimensionError(f"oracle {name!r} has the wrong N")
    state = initial_state(strategy, witness)
    profile = QueryMassProfile(strategy.n_points)
    for st in strategy.stages:
        if isinstance(st, OracleCall):
            mass = np.sum(np.abs(state) ** 2, axis=(1, 2))
            profile.oracles.append(st.oracle)
            profile.per_query.append(mass)
            mask = oracles[st.oracle].mask
            state = state.copy()
            state[mask] = state[mask][:, ::-1, :]
        else:
            state = _apply(state, st)
            if check_norm:
                nrm = float(np.sum(np.abs(state) ** 2))
                if abs(nrm - 1.0) > DEFAULT.unitary * 10:
                    raise InvariantViolationError(f"norm drifted to {nrm!r}")
    return state, profile


def run_strategy(strategy: QueryStrategy, oracles: Mapping[str, SubsetOracle],
                 witness: int | None = None):
    """Exact final measurement distribution (shape ``(N, 2, A)``) and query mass."""
    state, profile = evolve(strategy, oracles, witness)
    return np.abs(state) ** 2, profile


def accept_probability(strategy: QueryStrategy, dist: np.ndarray) -> float:
    """Probability that the designated output bit reads 1."""
    kind, bit = _output_selector(strategy.output, strategy.ancilla_dim)
    if kind == "response":
        return float(dist[:, 1, :].sum())
    sel = ((np.arange(strategy.ancilla_dim) >> bit) & 1).astype(bool)
    return float(dist[:, :, sel].sum())


def query_register_distribution(dist: np.ndarray) -> np.ndarray:
    return dist.sum(axis=(1, 2))


def acceptance(strategy: QueryStrategy, oracles: Mapping[str, SubsetOracle],
               witness: int | None = None) -> float:
    dist, _ = run_strategy(strategy, oracles, witness)
    return accept_probability(strategy, dist)


# --------------------------------------------------------------------------
# JSON gate-list format
# --------------------------------------------------------------------------

def strategy_to_json(strategy: QueryStrategy) -> dict:
    stages = []
    for st in strategy.stages:
        if isinstance(st, OracleCall):
            stages.append({"oracle_call": st.oracle})
        else:
            stages.append({"unitary": {
                "register": st.register,
                "real": st.matrix.real.tolist(),
                "imag": st.matrix.imag.tolist(),
            }})
    return {
        "name": strategy.name,
        "registers": {"query": strategy.n_points, "response": 2, "ancilla": strategy.ancilla_dim},
        "stages": stages,
        "output_qubit": strategy.output,
        "witness": strategy.witness,
    }


def strategy_from_json(obj: dict) -> QueryStrategy:
    from .schemas import validate
    validate(obj, "strategy")
    regs = obj["registers"]
    stages: list = []
    for st in obj["stages"]:
        if "oracle_call" in st:
            stages.append(OracleCall(st["oracle_call"]))
        else:
            u = st["unitary"]
            mat = np.asarray(u["real"], dtype=float) + 1j * np.asarray(u.get("imag", 0.0), dtype=float)
            stages.append(Unitary(mat, u.get("register", "full")))
    return QueryStrategy(
        n_points=int(regs["query"]),
        stages=stages,
        ancilla_dim=int(regs.get("ancilla", 1)),
        output=obj.get("output_qubit", "response"),
        witness=int(obj.get("witness", 0)),
        name=obj.get("name", ""),
    )


def load_strategy(path) -> QueryStrategy:
    return strategy_from_json(json.loads(Path(path).read_text()))


def save_strategy(strategy: QueryStrategy, path):
    Path(path).write_text(json.dumps(strategy_to_json(strategy)))


def stages_summary(stages: Sequence) -> str:
    return " ".join("O:" + s.oracle if isinstance(s, OracleCall) else "U:" + s.register
                    for s in stages)

import json

import numpy as np
import pytest

from filab import queries as q
from filab import strategies as st
from filab.errors import (InvalidDimensionError, InvalidInputError, InvariantViolationError,
                          ResourceLimitError)
from filab.fidist import SubsetOracle
from filab.queries import OracleCall, QueryStrategy, Unitary


def test_oracle_flips_response_on_members():
    N = 4
    O = SubsetOracle.from_indices(N, [1, 2])
    for x in range(N):
        for b in range(2):
            perm = np.eye(2 * N)[[2 * x + b] + [i for i in range(2 * N) if i != 2 * x + b]].T
            s = QueryStrategy(N, [Unitary(perm, "full"), OracleCall("O")])
            state, _ = q.evolve(s, {"O": O})
            assert abs(state[x, b ^ int(x in O), 0]) == pytest.approx(1.0)


def test_zero_query_strategy_ignores_oracle(rng):
    s = QueryStrategy(4, [Unitary(st.qft_matrix(4), "query")])
    a, _ = q.run_strategy(s, {})
    b, _ = q.run_strategy(s, {"O": SubsetOracle.full(4)})
    np.testing.assert_array_equal(a, b)


def _hand_deutsch(O):
    """Final amplitudes over index 2x+b for the N=2 one-query distinguisher."""
    # phase kickback gives ((-1)^O(0)|0> + (-1)^O(1)|1>)/sqrt2, then H
    minus = np.array([1, -1]) / np.sqrt(2)
    query = np.array([1, 0]) if (0 in O) == (1 in O) else np.array([0, 1])
    return (-1) ** (0 in O) * np.kron(query, minus)


@pytest.mark.parametrize("members", [[], [0], [1], [0, 1]])
def test_deutsch_matches_hand_amplitudes(members):
    O = SubsetOracle.from_indices(2, members)
    state, _ = q.evolve(st.deutsch_distinguisher(2), {"O": O})
    np.testing.assert_allclose(state.reshape(-1), _hand_deutsch(O), atol=1e-12)


def test_query_mass_normalised(rng):
    s = st.random_strategy(8, 3, rng, ancilla_dim=2)
    _, prof = q.run_strategy(s, {"O": SubsetOracle(8, rng.random(8) < 0.5)})
    assert len(prof.per_query) == 3
    for m in prof.per_query:
        assert m.sum() == pytest.approx(1.0, abs=1e-9)
    V = [0, 3, 5]
    assert prof.set_mass(V) == pytest.approx(prof.totals()[V].sum())


def test_query_mass_of_uniform_prober():
    _, prof = q.run_strategy(st.uniform_prober(8), {"S": SubsetOracle.empty(8)})
    np.testing.assert_allclose(prof.per_query[0], np.full(8, 1 / 8))


def test_grover_matches_closed_form():
    N = 64
    S = SubsetOracle.from_indices(N, [3, 17, 40, 41])
    theta = np.arcsin(np.sqrt(4 / N))
    for it in range(4):
        dist, _ = q.run_strategy(st.grover(N, it), {"S": S})
        marked = q.query_register_distribution(dist)[S.mask].sum()
        assert marked == pytest.approx(np.sin((2 * it + 1) * theta) ** 2, abs=1e-10)


def test_witness_selects_branch():
    N = 8
    s = st.heavy_verifier(N, [[1], [6]], spread=0.0, s_queries=1, u_query=False)
    for w, good in [(0, 1), (1, 6)]:
        S = SubsetOracle.from_indices(N, [good])
        assert q.acceptance(s, {"S": S}, witness=w) == pytest.approx(1.0)
        assert q.acceptance(s, {"S": S}, witness=1 - w) == pytest.approx(0.0, abs=1e-12)


def test_ancilla_output_bit():
    swap03 = np.eye(4)[[3, 1, 2, 0]]
    s = QueryStrategy(2, [Unitary(swap03, "ancilla")], ancilla_dim=4, output="ancilla:1")
    assert q.acceptance(s, {}) == pytest.approx(1.0)
    with pytest.raises(InvalidInputError):
        QueryStrategy(2, [], ancilla_dim=2, output="ancilla:1")


def test_validation_errors():
    with pytest.raises(InvariantViolationError):
        Unitary(np.array([[1, 1], [0, 1]]), "response")
    with pytest.raises(InvalidDimensionError):
        QueryStrategy(4, [Unitary(np.eye(3), "query")])
    with pytest.raises(InvalidInputError):
        Unitary(np.eye(2), "nowhere")
    with pytest.raises(InvalidInputError):
        q.run_strategy(st.uniform_prober(4), {})
    with pytest.raises(InvalidDimensionError):
        q.run_strategy(st.uniform_prober(4), {"S": SubsetOracle.empty(5)})


def test_dimension_cap():
    s = QueryStrategy(2 ** 21, [OracleCall("O")], ancilla_dim=2)
    with pytest.raises(ResourceLimitError):
        q.run_strategy(s, {"O": SubsetOracle.empty(2 ** 21)})


def test_json_roundtrip(tmp_path, rng):
    s = st.heavy_verifier(6, [[0, 1], [4]], spread=0.2)
    path = tmp_path / "s.json"
    q.save_strategy(s, path)
    s2 = q.load_strategy(path)
    oracles = {"S": SubsetOracle.from_indices(6, [1, 4]), "U": SubsetOracle.from_indices(6, [2])}
    for w in (0, 1):
        a, _ = q.run_strategy(s, oracles, w)
        b, _ = q.run_strategy(s2, oracles, w)
        np.testing.assert_allclose(a, b, atol=1e-14)
    assert q.stages_summary(s2.stages).startswith("U:query_by_ancilla O:S")


def test_json_schema_rejects_garbage():
    import jsonschema
    with pytest.raises(jsonschema.ValidationError):
        q.strategy_from_json({"registers": {"query": 2}, "stages": [{"bogus": 1}]})


def test_minimal_handwritten_json():
    obj = json.loads('{"registers": {"query": 2, "response": 2, "ancilla": 1},'
                     ' "stages": [{"unitary": {"register": "response", "real": [[0,1],[1,0]]}},'
                     ' {"oracle_call": "O"}], "output_qubit": "response"}')
    s = q.strategy_from_json(obj)
    assert q.acceptance(s, {"O": SubsetOracle.empty(2)}) == pytest.approx(1.0)
    assert q.acceptance(s, {"O": SubsetOracle.full(2)}) == pytest.approx(0.0)

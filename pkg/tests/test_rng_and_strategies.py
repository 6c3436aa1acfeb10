import numpy as np
import pytest

from filab import strategies as st
from filab.rng import make_rng
from filab.tolerances import DEFAULT


def test_streams_reproducible_and_distinct():
    a = make_rng(5, "tau-check", 3).random(4)
    np.testing.assert_array_equal(a, make_rng(5, "tau-check", 3).random(4))
    assert not np.array_equal(a, make_rng(5, "tau-check", 4).random(4))
    assert not np.array_equal(a, make_rng(6, "tau-check", 3).random(4))
    with pytest.raises(ValueError):
        make_rng(1, -1)


def test_tolerance_overrides():
    t = DEFAULT.updated({"lp_gap": 1e-9})
    assert t.lp_gap == 1e-9 and DEFAULT.lp_gap == 1e-7
    assert DEFAULT.updated(None) is DEFAULT


@pytest.mark.parametrize("n", [1, 2, 5, 16])
def test_prep_unitary_first_column(rng, n):
    t = rng.normal(size=n) + 1j * rng.normal(size=n)
    U = st.prep_unitary(t)
    np.testing.assert_allclose(U.conj().T @ U, np.eye(n), atol=1e-12)
    np.testing.assert_allclose(U[:, 0], t / np.linalg.norm(t), atol=1e-12)


def test_reflection_about(rng):
    s = rng.normal(size=6) + 0j
    R = st.reflection_about(s)
    np.testing.assert_allclose(R @ s, s, atol=1e-12)
    np.testing.assert_allclose(R @ R, np.eye(6), atol=1e-12)


def test_builtin_registry():
    assert set(st.BUILTIN) >= {"classical-prober", "uniform-prober", "grover"}
    assert st.grover(8, 3).queries_to("S") == 3
    assert st.ignoring_verifier(8).oracle_names() == ["S", "U"]

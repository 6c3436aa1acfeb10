import math

import numpy as np
import pytest

from filab import fidist as fd
from filab import strategies as st
from filab import verifier as vf
from filab.errors import InvalidInputError, ResourceLimitError
from filab.fidist import FiConfig, SubsetOracle
from filab.kwise import ExplicitDistribution, linear_code_distribution


# -- two-step verifier --------------------------------------------------------------

def test_basis_state_in_S():
    N = 16
    S = SubsetOracle.from_indices(N, [2, 9])
    U = SubsetOracle.from_indices(N, [0, 1, 5, 7, 11])
    assert vf.run_verifier(S, U, np.eye(N)[9]) == pytest.approx(5 / 16, abs=1e-15)


def test_state_outside_S():
    N = 8
    psi = np.zeros(N, complex)
    psi[[0, 1]] = [0.6, 0.8j]
    assert vf.run_verifier(SubsetOracle.from_indices(N, [5]), SubsetOracle.full(N), psi) == 0.0


def test_unnormalised_rejected():
    with pytest.raises(InvalidInputError):
        vf.run_verifier(SubsetOracle.full(4), SubsetOracle.full(4), np.ones(4))


def test_composition_with_acceptance_stat(rng):
    N = 32
    for _ in range(20):
        S = fd.sample_support_fixed(N, 6, rng)
        U = SubsetOracle(N, rng.random(N) < 0.5)
        psi = rng.normal(size=N) + 1j * rng.normal(size=N)
        psi /= np.linalg.norm(psi)
        p1 = np.sum(np.abs(psi[S.mask]) ** 2)
        proj = np.where(S.mask, psi, 0)
        stat = fd.acceptance_stat(fd.FiSample(proj, np.zeros(N), U))
        assert vf.run_verifier(S, U, psi) == pytest.approx(p1 * stat, abs=1e-12)


def test_verifier_on_fi_samples(rng):
    N, ell = 256, 32
    b = fd.sample_fi_random_supports(FiConfig(N, ell), 2000, rng)
    vals = []
    for t in range(2000):
        s = b.sample(t)
        vals.append(vf.run_verifier(SubsetOracle.from_indices(N, b.support[t]), s.u_set,
                                    s.psi / np.linalg.norm(s.psi)))
    mean, se = np.mean(vals), np.std(vals) / math.sqrt(2000)
    assert 0.73 - 3 * se <= mean <= 0.77 + 3 * se


# -- hybrid bound -----------------------------------------------------------------------

def test_bbbv_identical_oracles(rng):
    O = SubsetOracle(16, rng.random(16) < 0.5)
    out = vf.bbbv_check(st.random_strategy(16, 2, rng), O, O)
    assert out["difference"] == 0 and out["pass"]


def test_bbbv_zero_mass():
    O = SubsetOracle.from_indices(16, [0, 4])
    out = vf.bbbv_check(st.classical_prober(16, 4, oracle="O"), O,
                        O.symmetric_difference(SubsetOracle.from_indices(16, [7, 8])))
    assert out["bound"] == 0 and out["difference"] == 0


def test_bbbv_random(rng):
    for _ in range(30):
        s = st.random_strategy(16, int(rng.integers(1, 3)), rng, ancilla_dim=int(rng.integers(1, 3)))
        O, O2 = (SubsetOracle(16, rng.random(16) < 0.5) for _ in range(2))
        assert vf.bbbv_check(s, O, O2)["pass"]


# -- k-wise indistinguishability -----------------------------------------------------------

def test_kwise_positive_q1(rng):
    d = linear_code_distribution(4, [(1, 1, 0, 1)])
    for s in [st.deutsch_distinguisher(4, 1, 3), st.random_strategy(4, 1, rng, ancilla_dim=2)]:
        out = vf.kwise_equivalence_check(s, d)
        assert out["equal"] and out["k"] == 2


def test_kwise_positive_q2(rng):
    d = linear_code_distribution(5, [(1,) * 5])
    out = vf.kwise_equivalence_check(st.random_strategy(5, 2, rng), d)
    assert out["equal"] and out["dist_is_2q_wise_uniform"]


def test_kwise_q0_trivial():
    s = st.QueryStrategy(4, [st.Unitary(st.qft_matrix(4), "query")])
    assert vf.kwise_equivalence_check(s, ExplicitDistribution.point_mass(4, 9))["equal"]


def test_kwise_negative_control():
    bad = ExplicitDistribution.uniform_on(4, [0, 15])
    out = vf.kwise_equivalence_check(st.deutsch_distinguisher(4, 0, 1), bad)
    assert not out["equal"] and out["max_abs_difference"] > 0.1


def test_kwise_enumeration_cap(rng):
    with pytest.raises(ResourceLimitError):
        vf.kwise_equivalence_check(st.uniform_prober(9, oracle="O"), ExplicitDistribution.uniform(9))


# -- extraction loop ------------------------------------------------------------------------

def test_gen_small_set_classical(rng):
    S = SubsetOracle.from_indices(16, [3, 5])
    rep = vf.gen_small_set(st.classical_prober(16, 5), S, SubsetOracle.empty(16),
                           vf.GenSmallSetConfig(10), rng)
    assert rep.extracted.indices.tolist() == [5]
    assert rep.per_iteration_hit == [True] + [False] * 9
    assert rep.measured_query_indices == [5] * 10


def test_gen_small_set_empty_S(rng):
    rep = vf.gen_small_set(st.uniform_prober(8), SubsetOracle.empty(8), SubsetOracle.empty(8),
                           vf.GenSmallSetConfig(20), rng)
    assert rep.extracted.cardinality() == 0


def test_gen_small_set_needs_S_queries(rng):
    s = st.QueryStrategy(4, [st.OracleCall("U")])
    with pytest.raises(InvalidInputError):
        vf.gen_small_set(s, SubsetOracle.full(4), SubsetOracle.full(4), vf.GenSmallSetConfig(1), rng)
    with pytest.raises(InvalidInputError):
        vf.GenSmallSetConfig(0)


def test_gen_small_set_coupon_collector(rng):
    N, ell, v, runs = 16, 4, 64, 2000
    S = SubsetOracle.from_indices(N, [1, 6, 7, 12])
    full = 0
    for _ in range(runs):
        rep = vf.gen_small_set(st.uniform_prober(N), S, SubsetOracle.empty(N),
                               vf.GenSmallSetConfig(v), rng)
        assert rep.extracted.issubset(S)
        full += rep.extracted == S
    exact = sum((-1) ** j * math.comb(ell, j) * (1 - j / N) ** v for j in range(ell + 1))
    assert abs(full / runs - exact) <= 3 * math.sqrt(exact * (1 - exact) / runs)


def test_gen_small_set_subset_always(rng):
    N = 12
    for _ in range(20):
        S = SubsetOracle(N, rng.random(N) < 0.4)
        U = SubsetOracle(N, rng.random(N) < 0.5)
        s = st.heavy_verifier(N, [rng.choice(N, 3, replace=False).tolist()], spread=0.3)
        assert vf.gen_small_set(s, S, U, vf.GenSmallSetConfig(8), rng).extracted.issubset(S)


def test_new_element_probability_non_increasing(rng):
    N = 16
    S = SubsetOracle.from_indices(N, [0, 5, 9, 14])
    U = SubsetOracle.from_indices(N, range(0, N, 2))
    s = st.heavy_verifier(N, [[0, 5]], spread=0.3)
    seq = vf.new_element_sequence(s, S, U, iterations=16, reruns=1000, rng=rng)
    assert vf.non_increasing_within(seq["conditional_mean"], seq["conditional_se"])
    assert seq["hit_mean"][0] == pytest.approx(seq["conditional_mean"][0], abs=5 * seq["hit_se"][0])


# -- pairwise-small ---------------------------------------------------------------------------

def test_pairwise_small_controls():
    Sp = SubsetOracle.from_indices(64, [1, 2, 30])
    assert vf.pairwise_small_check(SubsetOracle.full(64), Sp)["max_eigenvalue"] == pytest.approx(1.0)
    assert vf.pairwise_small_check(SubsetOracle.empty(64), Sp)["max_eigenvalue"] == \
        pytest.approx(0.0, abs=1e-15)
    with pytest.raises(InvalidInputError):
        vf.pairwise_small_check(SubsetOracle.full(64), SubsetOracle.empty(64))


def test_pairwise_small_is_max_over_states(rng):
    N = 32
    U = SubsetOracle(N, rng.random(N) < 0.5)
    Sp = SubsetOracle.from_indices(N, [3, 8, 20, 21])
    lam = vf.pairwise_small_check(U, Sp)["max_eigenvalue"]
    best = 0.0
    for _ in range(2000):
        phi = np.zeros(N, complex)
        phi[Sp.indices] = rng.normal(size=4) + 1j * rng.normal(size=4)
        phi /= np.linalg.norm(phi)
        best = max(best, np.sum(np.abs(st.qft_matrix(N) @ phi)[U.mask] ** 2))
    assert best <= lam + 1e-12 and best >= lam - 0.05


def test_pairwise_small_gershgorin(rng):
    for _ in range(100):
        U = SubsetOracle(256, rng.random(256) < 0.5)
        out = vf.pairwise_small_check(U, fd.sample_support_fixed(256, 4, rng), epsilon=0.2)
        assert out["pass"]
        assert out["stated_bound_pass"] in (True, None)


# -- multi-search ---------------------------------------------------------------------------------

def test_multi_search_p0(rng):
    for name in ("classical", "grover"):
        out = vf.multi_search_experiment(name, 0.0, 64, 1, 8, 500, rng)
        assert out["success_rate"] == 0 and out["pass"]


def test_multi_search_classical_closed_form(rng):
    p, Q, n = 0.05, 6, 20_000
    out = vf.multi_search_experiment("classical", p, 128, 1, Q, n, rng)
    exact = 1 - (1 - p) ** Q
    assert out["reference_probability"] == pytest.approx(exact)
    assert abs(out["success_rate"] - exact) <= 3 * math.sqrt(exact * (1 - exact) / n)


def test_multi_search_grover_point(rng):
    out = vf.multi_search_experiment("grover", 1 / 16, 64, 2, 8, 2000, rng)
    assert out["pass"]
    assert out["bound"] == pytest.approx((48 * math.e / 16 * 16) ** 2)


def test_multi_search_guards(rng):
    with pytest.raises(InvalidInputError):
        vf.multi_search_experiment("classical", 0.1, 8, 3, 2, 10, rng)
    with pytest.raises(InvalidInputError):
        vf.multi_search_experiment("magic", 0.1, 8, 1, 2, 10, rng)


# -- extraction soundness ------------------------------------------------------------------------

def test_extraction_ignoring_verifier(rng):
    S = fd.sample_support_fixed(64, 8, rng)
    U = SubsetOracle(64, rng.random(64) < 0.5)
    out = vf.extraction_soundness(st.ignoring_verifier(64), S, U, 32, rng)
    assert out["gap"] <= 1e-12


def test_extraction_all_mass_on_extracted(rng):
    S = SubsetOracle.from_indices(64, [4, 9, 30])
    out = vf.extraction_soundness(st.classical_prober(64, 9), S, SubsetOracle.empty(64), 32, rng)
    assert out["K"] == 1 and out["mass_missed"] == 0 and out["gap"] <= 1e-9


def test_extraction_heavy_verifier(rng):
    for _ in range(10):
        S = fd.sample_support_fixed(64, 8, rng)
        U = SubsetOracle(64, rng.random(64) < 0.5)
        out = vf.extraction_soundness(st.heavy_verifier(64, [S.indices.tolist()]), S, U, 32, rng)
        assert out["subset_ok"]
        assert out["gap"] <= out["bbbv_realised_bound"] + 1e-12
        assert out["bound"] == pytest.approx(vf.extraction_bound(out["Q"], out["K"], 32))

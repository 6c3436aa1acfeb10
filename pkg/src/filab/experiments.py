"""Named, seeded experiments producing JSON-ready reports.

Every experiment takes a parameter dict (defaults merged with overrides), a
master seed and an optional worker count, and returns a :class:`Run` holding
the report and per-trial CSV rows.  Randomness is drawn from
``make_rng(seed, experiment, item)`` so results do not depend on the number
of workers or on the order in which items finish.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Callable

import numpy as np

from . import coremath, fidist, kwise, strategies, verifier
from .errors import InvalidConfigError
from .fidist import FiConfig, SubsetOracle
from .rng import DEFAULT_SEED, make_rng

THREE_SE = 3.0


# --------------------------------------------------------------------------
# Report plumbing
# --------------------------------------------------------------------------

class Recorder:
    """Accumulates estimates, bounds, assertions and CSV rows."""

    def __init__(self, name: str, params: dict, seed: int):
        self.name = name
        self.params = params
        self.seed = seed
        self.estimates: dict = {}
        self.bounds: dict = {}
        self.assertions: list = []
        self.rows: list = []
        self.details: dict = {}

    def rng(self, *keys) -> np.random.Generator:
        return make_rng(self.seed, self.name, *keys)

    def estimate(self, key: str, value, se="exact"):
        self.estimates[key] = {"value": _plain(value), "se": se if se == "exact" else float(se)}

    def bound(self, key: str, formula: str, value):
        self.bounds[key] = {"formula": formula, "value": _plain(value)}

    def check(self, name: str, ok, detail: str = ""):
        self.assertions.append({"name": name, "pass": bool(ok), "detail": detail})

    def row(self, **fields):
        # trailing underscore lets callers use keywords such as ``pass_``
        self.rows.append({k.rstrip("_"): _plain(v) for k, v in fields.items()})

    @property
    def passed(self) -> bool:
        return all(a["pass"] for a in self.assertions)

    def report(self, description: str = "") -> dict:
        return {
            "experiment": self.name,
            "description": description,
            "params": self.params,
            "seed": self.seed,
            "estimates": self.estimates,
            "bounds": self.bounds,
            "assertions": self.assertions,
            "pass": self.passed,
            "details": _plain(self.details),
        }


def _plain(x):
    """Convert numpy scalars/arrays (recursively) to JSON-native values."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    return x


def _pmap(fn: Callable, items: list, workers: int) -> list:
    """Order-preserving map, optionally across a process pool."""
    if workers <= 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * workers))))


@dataclass
class Run:
    report: dict
    rows: list = field(default_factory=list)


@dataclass(frozen=True)
class Experiment:
    name: str
    description: str
    func: Callable
    defaults: dict
    primary: bool = True


REGISTRY: dict[str, Experiment] = {}


def experiment(name: str, description: str, primary: bool = True, **defaults):
    def wrap(fn):
        REGISTRY[name] = Experiment(name, description, fn, defaults, primary)
        return fn
    return wrap


def resolve_params(exp: Experiment, overrides: dict | None, trials: int | None) -> dict:
    params = dict(exp.defaults)
    for k, v in (overrides or {}).items():
        if k not in params:
            raise InvalidConfigError(f"{exp.name} has no parameter {k!r}; known: {sorted(params)}")
        params[k] = v
    if trials is not None:
        if "trials" not in params:
            raise InvalidConfigError(f"{exp.name} does not take a trial count")
        params["trials"] = int(trials)
    return params


def run_experiment(name: str, params: dict | None = None, seed: int | None = None,
                   trials: int | None = None, workers: int = 1) -> Run:
    if name not in REGISTRY:
        raise KeyError(name)
    exp = REGISTRY[name]
    seed = DEFAULT_SEED if seed is None else int(seed)
    rec = Recorder(name, resolve_params(exp, params, trials), seed)
    t0 = time.perf_counter()
    exp.func(rec, workers=workers, **rec.params)
    rep = rec.report(exp.description)
    # everything run-dependent lives under one key so reports diff cleanly
    rep["timestamp"] = {"utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
                        "wall_clock_s": time.perf_counter() - t0}
    return Run(rep, rec.rows)


def suite(seed: int | None = None, workers: int = 1, names=None) -> dict:
    """Run the battery; failures and errors are recorded, never raised."""
    names = list(names) if names is not None else [e.name for e in REGISTRY.values() if e.primary]
    reports = {}
    for name in names:
        try:
            reports[name] = run_experiment(name, seed=seed, workers=workers).report
        except Exception as exc:  # noqa: BLE001 - the battery must keep going
            reports[name] = {"experiment": name, "pass": False,
                             "error": f"{type(exc).__name__}: {exc}"}
    return {
        "seed": DEFAULT_SEED if seed is None else int(seed),
        "experiments": reports,
        "pass": all(r["pass"] for r in reports.values()),
    }


# --------------------------------------------------------------------------
# Marginals of U'
# --------------------------------------------------------------------------

def _tau_item(args):
    seed, idx, N, ell, max_t, trials, estimator = args
    rng = make_rng(seed, "tau-check", idx)
    S = fidist.sample_support_fixed(N, ell, rng)
    t = int(rng.integers(1, max_t + 1))
    T = fidist.sample_support_fixed(N, t, rng)
    exact, dual = fidist.tau_exact(S, T, return_dual=True)
    mc, se = fidist.tau_monte_carlo(S, T, FiConfig(N, ell), trials, rng, estimator=estimator)
    return {"pair": idx, "S": S.indices.tolist(), "T": T.indices.tolist(), "t": t,
            "tau_exact": exact, "tau_dual": dual, "tau_mc": mc, "se": se,
            "pass": abs(exact - mc) <= THREE_SE * se}


@experiment("tau-check", "determinant formula for Pr[T misses U'] vs Monte Carlo",
            n_points=64, ell=8, pairs=100, max_t=4, trials=100_000,
            estimator="conditional", min_agree=95)
def tau_check(rec, workers, n_points, ell, pairs, max_t, trials, estimator, min_agree):
    items = [(rec.seed, i, n_points, ell, max_t, trials, estimator) for i in range(pairs)]
    rows = _pmap(_tau_item, items, workers)
    for r in rows:
        rec.row(pair=r["pair"], t=r["t"], tau_exact=r["tau_exact"], tau_mc=r["tau_mc"],
                se=r["se"], pass_=r["pass"])
    agree = sum(r["pass"] for r in rows)
    rel = max(abs(r["tau_exact"] - r["tau_dual"]) / r["tau_exact"] for r in rows)
    rec.estimate("pairs_within_3se", agree)
    rec.estimate("max_dual_rel_diff", rel)
    rec.estimate("mean_abs_z", float(np.mean([abs(r["tau_exact"] - r["tau_mc"]) / r["se"]
                                              for r in rows])))
    rec.bound("per_pair_band", "|tau_exact - tau_mc| <= 3 se", THREE_SE)
    rec.check(f"at least {min_agree}/{pairs} pairs agree within 3 se", agree >= min_agree,
              f"{agree}/{pairs}")
    rec.check("dual determinant agrees within 1e-8 relative", rel <= 1e-8, f"{rel:.2e}")
    rec.details["pairs"] = rows


@experiment("singleton-marginal", "Pr[z misses U'] is exactly 1/2 for every single z",
            sizes=[[8, 1], [16, 3], [64, 8], [64, 32], [128, 5], [256, 32]], supports_per_size=5)
def singleton_marginal(rec, workers, sizes, supports_per_size):
    worst = 0.0
    count = 0
    for N, ell in sizes:
        for j in range(supports_per_size):
            S = fidist.sample_support_fixed(N, ell, rec.rng(N, ell, j))
            taus = np.array([fidist.tau_exact(S, [z]) for z in range(N)])
            dev = float(np.max(np.abs(taus - 0.5)))
            worst = max(worst, dev)
            count += N
            rec.row(n_points=N, ell=ell, support=j, max_abs_dev=dev)
    rec.estimate("max_abs_deviation_from_half", worst)
    rec.estimate("pairs_tested", count)
    rec.check("tau({z}) = 1/2 within 1e-12", worst <= 1e-12, f"{worst:.2e}")


def _detworst_item(args):
    seed, idx = args
    rng = make_rng(seed, "detupperworst", idx)
    N = int(rng.choice([8, 16, 32, 64, 128]))
    ell = int(rng.integers(1, N + 1))
    t = int(rng.integers(1, min(N, 8) + 1))
    S = fidist.sample_support_fixed(N, ell, rng)
    T = fidist.sample_support_fixed(N, t, rng)
    tau = fidist.tau_exact(S, T)
    return {"n_points": N, "ell": ell, "t": t, "tau": tau,
            "lower": 2.0 ** -t, "upper": 1.0 / (1 + t)}


@experiment("detupperworst", "2^-|T| <= tau <= 1/(1+|T|) for every (S, T)", pairs=1000)
def detupperworst(rec, workers, pairs):
    rows = _pmap(_detworst_item, [(rec.seed, i) for i in range(pairs)], workers)
    viol = 0
    for r in rows:
        ok = r["lower"] - 1e-12 <= r["tau"] <= r["upper"] + 1e-12
        viol += not ok
        rec.row(**r, pass_=ok)
    rec.estimate("violations", viol)
    rec.estimate("min_slack_lower", min(r["tau"] - r["lower"] for r in rows))
    rec.estimate("min_slack_upper", min(r["upper"] - r["tau"] for r in rows))
    rec.bound("lower", "2^(-|T|)", "per pair")
    rec.bound("upper", "1/(1+|T|)", "per pair")
    rec.check("zero violations", viol == 0, f"{viol}/{pairs}")


@experiment("detupperavg", "tau <= 2^-|T| (1 + 2|T|^2 eps) on well-spread supports",
            primary=False, n_points=1024, ell=256, supports=100, sets_per_support=5, max_t=3)
def detupperavg(rec, workers, n_points, ell, supports, sets_per_support, max_t):
    checked = viol = 0
    eps_s = []
    for i in range(supports):
        rng = rec.rng(i)
        S = fidist.sample_support_fixed(n_points, ell, rng)
        eps = fidist.offdiag_max_of_support(S) * n_points / (2 * ell)
        eps_s.append(eps)
        for j in range(sets_per_support):
            t = int(rng.integers(1, max_t + 1))
            if t * t * eps > 0.5:
                continue
            T = fidist.sample_support_fixed(n_points, t, rng)
            tau = fidist.tau_exact(S, T)
            bound = 2.0 ** -t * (1 + 2 * t * t * eps)
            ok = tau <= bound + 1e-12
            checked += 1
            viol += not ok
            rec.row(support=i, t=t, eps=eps, tau=tau, bound=bound, pass_=ok)
    eps_s = np.asarray(eps_s)
    rec.estimate("checked_pairs", checked)
    rec.estimate("violations", viol)
    rec.estimate("mean_eps_S", eps_s.mean(), eps_s.std(ddof=1) / math.sqrt(len(eps_s)))
    for eps in (0.1, 0.2, 0.4):
        freq = float(np.mean(eps_s > eps))
        tail = fidist.detupperavg_tail_bound(eps, n_points, ell)
        rec.bound(f"tail_eps_{eps}", "2 N^2 exp(-eps^2 l / 2)", tail)
        rec.estimate(f"exceedance_eps_{eps}", freq, math.sqrt(freq * (1 - freq) / len(eps_s)))
        rec.check(f"exceedance <= tail at eps={eps}", freq <= tail)
    rec.bound("conditional", "2^(-|T|) (1 + 2 |T|^2 eps)", "per pair")
    rec.check("conditional bound holds", viol == 0, f"{viol}/{checked}")
    rec.check("some pairs satisfied the entry condition", checked > 0)


@experiment("offdiag-tail", "max off-diagonal of M^S against 2N^2 exp(-eps^2 N^2/8l)",
            primary=False, n_points=256, ell=64, supports=200, eps_grid=[0.05, 0.1, 0.2, 0.3])
def offdiag_tail(rec, workers, n_points, ell, supports, eps_grid):
    vals = np.array([fidist.offdiag_max_of_support(
        fidist.sample_support_fixed(n_points, ell, rec.rng(i))) for i in range(supports)])
    for i, v in enumerate(vals):
        rec.row(support=i, offdiag_max=v)
    rec.estimate("mean_offdiag_max", vals.mean(), vals.std(ddof=1) / math.sqrt(supports))
    for eps in eps_grid:
        freq = float(np.mean(vals > eps))
        tail = fidist.offdiag_tail_bound(eps, n_points, ell)
        rec.estimate(f"exceedance_eps_{eps}", freq, math.sqrt(freq * (1 - freq) / supports))
        rec.bound(f"tail_eps_{eps}", "2 N^2 exp(-eps^2 N^2 / (8 l))", tail)
        rec.check(f"exceedance <= tail at eps={eps}", freq <= tail)


# --------------------------------------------------------------------------
# Acceptance statistic and norms
# --------------------------------------------------------------------------

@experiment("accept-mean", "mean normalised Fourier mass on U' lies in [0.73, 0.77]",
            n_points=256, ell=32, trials=10_000, lo=0.73, hi=0.77, verifier_checks=200)
def accept_mean(rec, workers, n_points, ell, trials, lo, hi, verifier_checks):
    batch = fidist.sample_fi_random_supports(FiConfig(n_points, ell), trials, rec.rng("batch"))
    stats = fidist.acceptance_stats(batch)
    mean, se = float(stats.mean()), float(stats.std(ddof=1) / math.sqrt(trials))
    rec.estimate("mean_acceptance", mean, se)
    rec.estimate("target", 0.75)
    for t in range(0, trials, max(1, trials // 100)):
        rec.row(trial=t, acceptance=stats[t])
    # cross-module: the two-step verifier on the normalised sample
    worst = 0.0
    for t in range(min(verifier_checks, trials)):
        s = batch.sample(t)
        psi = s.psi / np.linalg.norm(s.psi)
        S = SubsetOracle.from_indices(n_points, batch.support[t])
        v = verifier.run_verifier(S, s.u_set, psi)
        worst = max(worst, abs(v - fidist.acceptance_stat(s)))
    rec.estimate("verifier_vs_stat_max_diff", worst)
    eps = 0.25
    rec.bound("tail_eps_0.25", "3 (1/N + l^2/N^2) / eps^2 + 4 N^2 exp(-l eps^2 / 32)",
              fidist.probaccept_tail_bound(eps, n_points, ell))
    rec.bound("band", f"[{lo}, {hi}]", [lo, hi])
    rec.check("mean in band", lo <= mean <= hi, f"{mean:.4f} +/- {se:.4f}")
    rec.check("run_verifier equals acceptance_stat on normalised samples", worst <= 1e-12,
              f"{worst:.2e}")


@experiment("norm-concentration", "Pr[| |psi|^2 - 1 | > eps] <= 2 exp(-eps^2 l / 8)",
            ells=[32, 128], eps_grid=[0.25, 0.5, 1.0], trials=10_000, n_points=256)
def norm_concentration(rec, workers, ells, eps_grid, trials, n_points):
    for ell in ells:
        out = fidist.norm_concentration_experiment(
            FiConfig(n_points, ell), trials, rec.rng(ell), eps_grid=tuple(eps_grid))
        rec.estimate(f"mean_norm_sq_l{ell}", out["mean_norm_sq"], out["mean_norm_sq_se"])
        for r in out["rows"]:
            key = f"l{ell}_eps{r['eps']}"
            rec.estimate(f"exceedance_{key}", r["exceedance"], r["se"])
            rec.bound(f"tail_{key}", "2 exp(-eps^2 l / 8)", r["bound"])
            rec.check(f"exceedance <= bound ({key})", r["pass"])
            rec.row(ell=ell, eps=r["eps"], exceedance=r["exceedance"], se=r["se"],
                    bound=r["bound"], pass_=r["pass"])


@experiment("verifier-accept", "two-step verifier acceptance on normalised FI states",
            primary=False, n_points=256, ell=32, trials=2000, lo=0.73, hi=0.77)
def verifier_accept(rec, workers, n_points, ell, trials, lo, hi):
    rng = rec.rng()
    S = fidist.sample_support_fixed(n_points, ell, rng)
    batch = fidist.sample_fi_batch(S, FiConfig(n_points, ell), trials, rng)
    vals = np.empty(trials)
    for t in range(trials):
        s = batch.sample(t)
        vals[t] = verifier.run_verifier(S, s.u_set, s.psi / np.linalg.norm(s.psi))
    mean, se = float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(trials))
    rec.estimate("mean_acceptance", mean, se)
    rec.check("mean within band widened by 3 se", lo - 3 * se <= mean <= hi + 3 * se)


@experiment("gaussian-identities", "complex Gaussian integrals by quadrature and Monte Carlo",
            primary=False, samples=200_000, nodes=24)
def gaussian_identities(rec, workers, samples, nodes):
    cases = {
        "n1": (1, np.array([[2.0]])),
        "n2_identity": (2, np.eye(2)),
        "n2_general": (2, np.array([[2.0, 0.5 - 0.3j], [0.5 + 0.3j, 1.0]])),
    }
    for key, (n, M) in cases.items():
        out = coremath.verify_gaussian_integral_identities(n, M, samples, rec.rng(key),
                                                           quadrature_nodes=nodes)
        rec.details[key] = out
        q1 = out["first"]["quadrature"]
        rec.estimate(f"{key}_first_quadrature", q1)
        rec.estimate(f"{key}_first_mc", out["first"]["monte_carlo"], out["first"]["monte_carlo_se"])
        rec.bound(f"{key}_first", "pi^n / det(M)", out["first"]["closed_form_pi_n_over_det"])
        rec.check(f"{key}: first integral = pi^n/det", out["first"]["quadrature_matches_pi_n"])
        if n == 2:
            rec.estimate(f"{key}_second_quadrature", out["second"]["quadrature"])
            rec.bound(f"{key}_second_wick", "pi^2 (M11 M22 + |M12|^2) / det^3",
                      out["second"]["closed_form_wick"])
            rec.check(f"{key}: second integral = Wick form", out["second"]["quadrature_matches_wick"])


# --------------------------------------------------------------------------
# Query model
# --------------------------------------------------------------------------

@experiment("kwise-equivalence", "2q-wise uniform oracles are invisible to q-query strategies",
            random_strategies=8)
def kwise_equivalence(rec, workers, random_strategies):
    rng = rec.rng()
    pairwise4 = kwise.linear_code_distribution(4, [(1, 1, 0, 1)])
    even5 = kwise.linear_code_distribution(5, [(1, 1, 1, 1, 1)])
    even6 = kwise.linear_code_distribution(6, [(1, 1, 1, 1, 1, 1)])
    cases = [("q0-identity", kwise.ExplicitDistribution.uniform_on(4, [0, 15]),
              strategies.QueryStrategy(4, [strategies.Unitary(np.eye(4), "query")]))]
    cases += [(f"deutsch({a},{b})", pairwise4, strategies.deutsch_distinguisher(4, a, b))
              for a in range(4) for b in range(a + 1, 4)]
    cases += [("classical-prober", pairwise4, strategies.classical_prober(4, 2, oracle="O")),
              ("uniform-prober", pairwise4, strategies.uniform_prober(4, oracle="O"))]
    for j in range(random_strategies):
        A = 1 + j % 2
        cases.append((f"random-q1-A{A}-{j}", pairwise4,
                      strategies.random_strategy(4, 1, rng, ancilla_dim=A)))
        cases.append((f"random-q2-N5-{j}", even5, strategies.random_strategy(5, 2, rng)))
    cases.append(("random-q2-N6", even6, strategies.random_strategy(6, 2, rng)))
    worst = 0.0
    ok_all = True
    for label, dist, strat in cases:
        out = verifier.kwise_equivalence_check(strat, dist)
        worst = max(worst, out["max_abs_difference"])
        ok_all &= out["equal"] and (out["q"] == 0 or out["dist_is_2q_wise_uniform"])
        rec.row(case=label, n_points=strat.n_points, q=out["q"],
                max_abs_difference=out["max_abs_difference"], equal=out["equal"])
    rec.estimate("max_abs_difference", worst)
    rec.estimate("cases", len(cases))
    rec.bound("equality", "max |avg_k-wise - avg_uniform| <= 1e-10", 1e-10)
    rec.check("averaged outputs equal for every 2q-wise uniform case", ok_all, f"{worst:.2e}")
    # 1-wise but not 2-wise: uniform on {0000, 1111}
    neg = verifier.kwise_equivalence_check(
        strategies.deutsch_distinguisher(4, 0, 1), kwise.ExplicitDistribution.uniform_on(4, [0, 15]))
    rec.estimate("negative_control_difference", neg["max_abs_difference"])
    rec.row(case="negative-control", n_points=4, q=1,
            max_abs_difference=neg["max_abs_difference"], equal=neg["equal"])
    rec.check("1-wise negative control is distinguished", not neg["equal"])


def _bbbv_item(args):
    seed, idx, N, max_q = args
    rng = make_rng(seed, "bbbv", idx)
    q = int(rng.integers(1, max_q + 1))
    A = int(rng.integers(1, 3))
    strat = strategies.random_strategy(N, q, rng, ancilla_dim=A)
    O = SubsetOracle(N, rng.random(N) < 0.5)
    flip = fidist.sample_support_fixed(N, int(rng.integers(1, 5)), rng)
    out = verifier.bbbv_check(strat, O, O.symmetric_difference(flip))
    return {"instance": idx, "q": q, "ancilla": A, "v_size": flip.cardinality(),
            "difference": out["difference"], "mass_V": out["mass_V"], "bound": out["bound"],
            "pass": out["pass"]}


@experiment("bbbv", "|Pr[A^O=1] - Pr[A^O'=1]| <= 4 sqrt(q M_V) on random strategies",
            n_points=16, instances=100, max_q=2)
def bbbv(rec, workers, n_points, instances, max_q):
    rows = _pmap(_bbbv_item, [(rec.seed, i, n_points, max_q) for i in range(instances)], workers)
    for r in rows:
        rec.row(**r)
    viol = sum(not r["pass"] for r in rows)
    ratio = max(r["difference"] / r["bound"] for r in rows if r["bound"] > 0)
    rec.estimate("violations", viol)
    rec.estimate("max_difference_over_bound", ratio)
    rec.bound("hybrid", "4 sqrt(q M_V)", "per instance")
    rec.check("zero violations", viol == 0, f"{viol}/{instances}")
    # controls
    rng = rec.rng("controls")
    O = SubsetOracle(n_points, rng.random(n_points) < 0.5)
    same = verifier.bbbv_check(strategies.random_strategy(n_points, 2, rng), O, O)
    rec.check("O = O' gives zero difference", same["difference"] == 0.0)
    V = SubsetOracle.from_indices(n_points, [1, 2])
    blind = verifier.bbbv_check(strategies.classical_prober(n_points, 0, oracle="O"),
                                O, O.symmetric_difference(V))
    rec.check("zero mass on V forces equality", blind["bound"] == 0.0 and blind["difference"] == 0.0)


@experiment("pairwise-small", "top eigenvalue of M^U on S' is at most 1/2 + |S'| eps_emp",
            n_points=256, v=4, draws=200)
def pairwise_small(rec, workers, n_points, v, draws):
    viol = 0
    lams, eps = [], []
    for i in range(draws):
        rng = rec.rng(i)
        U = SubsetOracle(n_points, rng.random(n_points) < 0.5)
        Sp = fidist.sample_support_fixed(n_points, v, rng)
        out = verifier.pairwise_small_check(U, Sp)
        viol += not out["pass"]
        lams.append(out["max_eigenvalue"])
        eps.append(out["eps_empirical"])
        rec.row(draw=i, max_eigenvalue=out["max_eigenvalue"], eps_empirical=out["eps_empirical"],
                bound=out["gershgorin_bound"], pass_=out["pass"])
    lams = np.asarray(lams)
    rec.estimate("violations", viol)
    rec.estimate("mean_max_eigenvalue", lams.mean(), lams.std(ddof=1) / math.sqrt(draws))
    rec.estimate("mean_eps_empirical", float(np.mean(eps)), float(np.std(eps, ddof=1) / math.sqrt(draws)))
    rec.bound("gershgorin", "1/2 + v eps_emp", "per draw")
    rec.check("zero violations", viol == 0, f"{viol}/{draws}")
    Sp = SubsetOracle.from_indices(n_points, range(v))
    full = verifier.pairwise_small_check(SubsetOracle.full(n_points), Sp)["max_eigenvalue"]
    empty = verifier.pairwise_small_check(SubsetOracle.empty(n_points), Sp)["max_eigenvalue"]
    rec.estimate("control_full_U", full)
    rec.estimate("control_empty_U", empty)
    rec.check("controls: U=[N] gives 1, U=empty gives 0",
              abs(full - 1) <= 1e-12 and abs(empty) <= 1e-12)


@experiment("multi-search", "success at finding K marked items vs (48e p (Q/K)^2)^K",
            points=[[256, 0.00390625, 1, 1], [64, 0.0, 1, 8], [64, 0.0625, 2, 8]],
            search=["classical", "grover"], trials=10_000)
def multi_search(rec, workers, points, search, trials):
    viol = 0
    for j, (N, p, K, Q) in enumerate(points):
        for name in search:
            out = verifier.multi_search_experiment(name, p, N, K, Q, trials, rec.rng(j, name))
            viol += not out["pass"]
            key = f"{name}_N{N}_p{p}_K{K}_Q{Q}"
            rec.estimate(f"success_{key}", out["success_rate"], out["se"])
            rec.bound(f"bound_{key}", "(C p (Q/K)^2)^K, C = 48e", out["bound"])
            rec.check(f"success <= bound ({key})", out["pass"])
            ref = out["reference_probability"]
            if ref is not None:
                band = THREE_SE * math.sqrt(ref * (1 - ref) / trials)
                rec.estimate(f"reference_{key}", ref)
                rec.check(f"classical rate matches Pr[Bin(Q,p) >= K] ({key})",
                          abs(out["success_rate"] - ref) <= band)
            rec.row(strategy=name, n_points=N, p=p, K=K, Q=Q, success=out["success_rate"],
                    se=out["se"], bound=out["bound"], pass_=out["pass"])
    rec.estimate("violations", viol)


def _extraction_item(args):
    seed, idx, N, v, ell, spread = args
    rng = make_rng(seed, "extraction-soundness", idx)
    S = fidist.sample_support_fixed(N, ell, rng)
    U = SubsetOracle(N, rng.random(N) < 0.5)
    strat = strategies.heavy_verifier(N, [S.indices.tolist()], spread=spread)
    out = verifier.extraction_soundness(strat, S, U, v, rng)
    return {"run": idx, **{k: out[k] for k in ("Q", "K", "gap", "bound", "mass_missed",
                                               "bbbv_realised_bound", "subset_ok")}}


@experiment("extraction-soundness", "acceptance gap after swapping S for the extracted S'",
            n_points=64, v=32, ell=8, spread=0.1, runs=100, min_pass=99)
def extraction_soundness(rec, workers, n_points, v, ell, spread, runs, min_pass):
    items = [(rec.seed, i, n_points, v, ell, spread) for i in range(runs)]
    rows = _pmap(_extraction_item, items, workers)
    ok = 0
    bbbv_ok = subset_ok = True
    for r in rows:
        passed = r["gap"] <= r["bound"]
        ok += passed
        bbbv_ok &= r["gap"] <= r["bbbv_realised_bound"] + 1e-12
        subset_ok &= r["subset_ok"]
        rec.row(**r, pass_=passed)
    gaps = np.array([r["gap"] for r in rows])
    rec.estimate("runs_within_bound", ok)
    rec.estimate("mean_gap", gaps.mean(), gaps.std(ddof=1) / math.sqrt(runs))
    rec.estimate("mean_K", float(np.mean([r["K"] for r in rows])))
    rec.bound("extraction", "4 (Q^3 K / v)^(1/4)", "per run")
    rec.bound("realised", "4 sqrt(Q M_{S minus S'})", "per run")
    rec.check(f"gap <= bound in at least {min_pass}/{runs} runs", ok >= min_pass, f"{ok}/{runs}")
    rec.check("gap <= realised hybrid bound in every run", bbbv_ok)
    rec.check("S' is a subset of S in every run", subset_ok)
    rng = rec.rng("control")
    S = fidist.sample_support_fixed(n_points, ell, rng)
    U = SubsetOracle(n_points, rng.random(n_points) < 0.5)
    ctl = verifier.extraction_soundness(strategies.ignoring_verifier(n_points), S, U, v, rng)
    rec.estimate("control_ignoring_gap", ctl["gap"])
    rec.check("verifier ignoring S has zero gap", ctl["gap"] <= 1e-12)


@experiment("gensmallset-monotone", "new-element probability per extraction iteration",
            primary=False, n_points=16, ell=4, iterations=24, reruns=1000, coupon_v=64)
def gensmallset_monotone(rec, workers, n_points, ell, iterations, reruns, coupon_v):
    rng = rec.rng()
    S = fidist.sample_support_fixed(n_points, ell, rng)
    U = SubsetOracle(n_points, rng.random(n_points) < 0.5)
    strat = strategies.heavy_verifier(n_points, [S.indices[: ell // 2].tolist()], spread=0.3)
    seq = verifier.new_element_sequence(strat, S, U, iterations, reruns, rng)
    for j in range(iterations):
        rec.row(iteration=j + 1, hit_mean=seq["hit_mean"][j], hit_se=seq["hit_se"][j],
                conditional_mean=seq["conditional_mean"][j],
                conditional_se=seq["conditional_se"][j])
    rec.estimate("first_new_prob", seq["conditional_mean"][0], seq["conditional_se"][0])
    rec.estimate("last_new_prob", seq["conditional_mean"][-1], seq["conditional_se"][-1])
    rec.estimate("mean_extracted", seq["mean_extracted"])
    rec.details["sequence"] = seq
    rec.check("conditional new-element probability non-increasing within 2 se",
              verifier.non_increasing_within(seq["conditional_mean"], seq["conditional_se"]))
    # uniform prober: every draw is uniform on [N], so Pr[S' = S] is a coupon-collector sum
    full = sum(verifier.gen_small_set(strategies.uniform_prober(n_points), S, U,
                                      verifier.GenSmallSetConfig(coupon_v), rng).extracted == S
               for _ in range(reruns))
    exact = sum((-1) ** j * math.comb(ell, j) * (1 - j / n_points) ** coupon_v
                for j in range(ell + 1))
    rate = full / reruns
    rec.estimate("coupon_full_rate", rate, math.sqrt(rate * (1 - rate) / reruns))
    rec.estimate("coupon_full_exact", exact)
    rec.check("coupon-collector rate within 3 se",
              abs(rate - exact) <= THREE_SE * math.sqrt(exact * (1 - exact) / reruns))


# --------------------------------------------------------------------------
# Substitution distance and the probe
# --------------------------------------------------------------------------

@experiment("substitution-lp", "optimal-coupling LP on cases with known answers", random_pairs=5)
def substitution_lp(rec, workers, random_pairs):
    rng = rec.rng()
    a = kwise.ExplicitDistribution.from_unnormalised(3, rng.random(8))
    same, _ = kwise.substitution_distance(a, a)
    rec.estimate("eps_a_a", same)
    rec.check("eps(a, a) = 0", abs(same) <= 1e-9)
    pm, _ = kwise.substitution_distance(kwise.ExplicitDistribution.point_mass(3, 0b010),
                                        kwise.ExplicitDistribution.point_mass(3, 0b111))
    rec.estimate("eps_point_masses", pm)
    rec.check("distinct point masses give 1", abs(pm - 1) <= 1e-6)
    u = kwise.ExplicitDistribution.uniform(2)
    cond = kwise.ExplicitDistribution.uniform_on(2, [0b00, 0b10])  # coordinate 0 forced to 0
    e1, cpl = kwise.substitution_distance(u, cond)
    e2, _ = kwise.substitution_distance(cond, u)
    lower = kwise.marginal_tv_lower_bound(u, cond)
    rec.estimate("eps_conditional_uniform", e1)
    rec.estimate("eps_conditional_uniform_swapped", e2)
    rec.bound("marginal_lower", "max_i |Pr_a[x_i=1] - Pr_b[x_i=1]|", lower)
    rec.bound("hand_value", "1/2", 0.5)
    rec.check("m=2 conditional-uniform gives 1/2 within 1e-6", abs(e1 - 0.5) <= 1e-6)
    rec.check("coupling disagreement matches eps", abs(cpl.disagreement().max() - e1) <= 1e-7)
    worst = 0.0
    for j in range(random_pairs):
        x = kwise.ExplicitDistribution.from_unnormalised(3, rng.random(8))
        y = kwise.ExplicitDistribution.from_unnormalised(3, rng.random(8))
        d1, _ = kwise.substitution_distance(x, y)
        d2, _ = kwise.substitution_distance(y, x)
        worst = max(worst, abs(d1 - d2))
        rec.row(pair=j, eps_xy=d1, eps_yx=d2, lower=kwise.marginal_tv_lower_bound(x, y))
    rec.estimate("max_asymmetry", worst)
    rec.check("symmetric within 1e-7", worst <= 1e-7)


@experiment("conjecture-probe", "nearest k-wise uniform distribution to an empirical U' law",
            m=6, ell=2, samples=1_000_000, ks=[1, 2], r=2, zeta=0.5, eta=0.1,
            shift_samples=100_000)
def conjecture_probe(rec, workers, m, ell, samples, ks, r, zeta, eta, shift_samples):
    rng = rec.rng("support")
    S = fidist.sample_support_fixed(m, ell, rng)
    cfg = FiConfig(m, ell)
    x0, hist = kwise.empirical_u_distribution(S, cfg, samples, rec.rng("histogram"))
    rec.details["support"] = S.indices.tolist()
    rec.details["coordinate_inclusion"] = hist["coordinate_inclusion"]
    for k in ks:
        res = kwise.conjecture_probe(x0, kwise.ConjectureParams(r=r, k=k, zeta=zeta, eta=eta))
        rep = res.report
        ok_k = kwise.is_kwise_uniform(res.x1, k, tol=1e-7)
        rec.estimate(f"epsilon_k{k}", res.epsilon)
        rec.estimate(f"duality_gap_k{k}", rep["duality_gap"])
        rec.estimate(f"hypothesis_violations_k{k}", rep["hypothesis_violations"])
        rec.estimate(f"n_zeta3_over_r6_k{k}", rep["n_zeta3_over_r6"])
        rec.check(f"x1 is {k}-wise uniform at tol 1e-7", ok_k)
        rec.check(f"LP certified (gap <= 1e-7) for k={k}", rep["duality_gap"] <= 1e-7)
        rec.check(f"coupling first marginal equals x0 for k={k}",
                  np.max(np.abs(res.coupling.first() - x0.probs)) <= 1e-9)
        # acceptance shift under coupled substitution on fresh samples
        batch = fidist.sample_fi_batch(S, cfg, shift_samples, rec.rng("shift", k))
        atoms = batch.u_mask.astype(np.int64) @ (1 << np.arange(m))
        live = res.coupling.joint[atoms].sum(axis=1) > 0
        new = kwise.couple_and_substitute_many(atoms[live], res.coupling, rec.rng("couple", k))
        new_mask = ((new[:, None] >> np.arange(m)) & 1).astype(bool)
        keep = np.flatnonzero(live)
        sub = fidist.FiBatch(m, batch.support[keep], batch.alpha[keep], batch.beta[keep],
                             batch.u_mask[keep])
        shift = np.abs(fidist.acceptance_stats(sub) - fidist.acceptance_stats(sub, new_mask))
        mean, se = float(shift.mean()), float(shift.std(ddof=1) / math.sqrt(shift.size))
        rec.estimate(f"acceptance_shift_k{k}", mean, se)
        rec.estimate(f"unmatched_atoms_k{k}", int((~live).sum()))
        rec.bound(f"shift_k{k}", "m eps", m * res.epsilon)
        rec.check(f"acceptance shift <= m eps + 3 se for k={k}",
                  mean <= m * res.epsilon + THREE_SE * se)
        rec.row(k=k, epsilon=res.epsilon, duality_gap=rep["duality_gap"],
                hypothesis_violations=rep["hypothesis_violations"], x1_kwise=ok_k,
                shift_mean=mean, shift_se=se, eps_le_eta=rep["eps_le_eta"])
        rec.details[f"k{k}"] = {kk: vv for kk, vv in rep.items() if kk != "hypothesis_table"}
        rec.details[f"k{k}"]["hypothesis_table"] = rep["hypothesis_table"]

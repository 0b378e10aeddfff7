"""Monte Carlo harnesses for the structural identities and limit theorems.

Identity checks (stationarity, change of law, many-to-one) compare paired
Monte Carlo estimates at 4 combined standard errors.  CLT checks compare the
scaled endpoint law against its Gaussian target with a fixed KS ceiling
calibrated on the closed-form case.  Every harness derives per-replica
generators by a counter split of one master seed, so results are independent
of worker count and reproducible bit for bit.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.special
import scipy.stats

from .cascade import estimate_sigma2, require_diffusive
from .coupling import build_coupled, couple_to_horizon, decompose, discrepancies
from .errors import TooFewSamplesError
from .laws import Atom, FiniteSupportLaw, MarkLaw
from .regime import kappa as regime_kappa
from .seeding import replica_rng, spawn_rng
from .trees import generate_imt, generate_mt, level_ids
from .walk import Walker, run_walk, step_once

SCHEMA_VERSION = "1.0"

# float-arithmetic noise floor for identities that hold exactly
_NOISE_FLOOR = 1e-12


@dataclass
class ExperimentReport:
    """Outcome of one Monte Carlo check, with everything needed to rerun it."""

    name: str
    parameters: dict
    estimates: dict
    statistics: dict
    tolerances: dict
    passed: bool
    replicas: int
    seed: int
    wall_clock_s: float | None = None

    def to_dict(self, include_timing: bool = False) -> dict:
        out = {
            "schema_version": SCHEMA_VERSION,
            "name": self.name,
            "parameters": self.parameters,
            "estimates": self.estimates,
            "statistics": self.statistics,
            "tolerances": self.tolerances,
            "passed": self.passed,
            "replicas": self.replicas,
            "seed": self.seed,
        }
        if include_timing:
            out["wall_clock_s"] = self.wall_clock_s
        return out


def canonical_laws() -> dict[str, FiniteSupportLaw]:
    """The fixed law suite used by the verification harnesses."""
    return {
        "binary_half": FiniteSupportLaw((Atom(1.0, 2, (0.5, 0.5)),)),
        "binary_unit": FiniteSupportLaw((Atom(1.0, 2, (1.0, 1.0)),)),
        "binary_quarter": FiniteSupportLaw((Atom(1.0, 2, (0.25, 0.25)),)),
        "ternary_half": FiniteSupportLaw((Atom(1.0, 3, (0.5, 0.5, 0.5)),)),
        "unary_unit": FiniteSupportLaw((Atom(1.0, 1, (1.0,)),)),
        "two_atom_critical": FiniteSupportLaw(
            (Atom(0.5, 2, (0.25, 0.25)), Atom(0.5, 2, (0.75, 0.75)))
        ),
    }


# --------------------------------------------------------------------------
# Replica runner (worker-count invariant)
# --------------------------------------------------------------------------


def _chunk_worker(args):
    fn_name, law, params, seed, lo, hi = args
    fn = _REPLICA_FNS[fn_name]
    return [fn(law, params, seed, j) for j in range(lo, hi)]


def run_replicas(fn_name: str, law: MarkLaw, params: dict, n: int, seed: int,
                 workers: int = 1) -> np.ndarray:
    """Evaluate a registered per-replica function for j = 0..n-1.

    Replica j's randomness comes only from (seed, j), and results are
    aggregated in index order, so any worker count gives identical output.
    """
    if workers <= 1:
        fn = _REPLICA_FNS[fn_name]
        out = [fn(law, params, seed, j) for j in range(n)]
    else:
        chunk = max(1, math.ceil(n / (workers * 4)))
        tasks = [
            (fn_name, law, params, seed, lo, min(lo + chunk, n))
            for lo in range(0, n, chunk)
        ]
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_chunk_worker, tasks))
        out = [x for part in parts for x in part]
    return np.asarray(out)


def _mean_se(vals: np.ndarray) -> tuple[float, float]:
    n = len(vals)
    se = float(vals.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return float(vals.mean()), se


# --------------------------------------------------------------------------
# Functional catalogs
# --------------------------------------------------------------------------

# pair functionals F(T_a, T_b) for stationarity; a is the occupied root
def _f_one(tree, a, b):
    return 1.0


def _f_went_to_parent(tree, a, b):
    return 1.0 if tree.parent[a] == b else 0.0


def _f_child_count(tree, a, b):
    return float(tree.n_children[a])


def _f_occupied_mark(tree, a, b):
    return tree.mark[a]


def _f_edge_mark(tree, a, b):
    # mark of the traversed edge: the deeper endpoint's mark (symmetric)
    return tree.mark[a] if tree.parent[a] == b else tree.mark[b]


F_CATALOG = {
    "one": _f_one,
    "went_to_parent": _f_went_to_parent,
    "child_count": _f_child_count,
    "occupied_mark": _f_occupied_mark,
    "edge_mark": _f_edge_mark,
}

# vertex functionals G(T, x) for the change-of-law identity
G_CATALOG = {
    "one": lambda tree, x: 1.0,
    "child_count": lambda tree, x: float(tree.n_children[x]),
    "mark": lambda tree, x: tree.mark[x],
}

# path functionals G(C_1, ..., C_n) for many-to-one


def _path_one(products, params):
    return 1.0


def _path_final(products, params):
    return products[-1]


def _path_indicator_gt(products, params):
    return 1.0 if products[-1] > params["c"] else 0.0


PATH_CATALOG = {
    "one": _path_one,
    "final_product": _path_final,
    "indicator_final_gt": _path_indicator_gt,
}


# --------------------------------------------------------------------------
# Per-replica functions (module level: picklable for worker pools)
# --------------------------------------------------------------------------


def _rep_stationarity(law, params, seed, j):
    rng = replica_rng(seed, j)
    t = generate_imt(law, 2, 1, rng)
    x0 = t.root
    x1 = step_once(t, x0, rng)
    if t.n_children[x1] < 0:
        t.expand(x1)
    f = F_CATALOG[params["functional"]]
    return f(t, x0, x1) - f(t, x1, x0)


def _rep_col_imt(law, params, seed, j):
    rng = spawn_rng(seed, 0, j)
    t = generate_imt(law, max(1, params["n"]), 1, rng)
    g = G_CATALOG[params["functional"]]
    return g(t, t.root)


def _rep_col_mt(law, params, seed, j):
    rng = spawn_rng(seed, 1, j)
    n = params["n"]
    t = generate_mt(law, n + 1, rng)
    g = G_CATALOG[params["functional"]]
    cum = t.cum
    total = 0.0
    for x in level_ids(t, n):
        total += cum[x] * g(t, x) * (1.0 + t.sum_marks[x]) / 2.0
    return total


def _tilted_table(law: FiniteSupportLaw):
    logs = []
    weights = []
    for a in law.atoms:
        for m in a.marks:
            logs.append(math.log(m))
            weights.append(a.prob * m)
    total = math.fsum(weights)
    cum = np.cumsum(np.asarray(weights) / total)
    cum[-1] = 1.0
    return np.asarray(logs), cum


def _rep_mto_mt(law, params, seed, j):
    rng = spawn_rng(seed, 0, j)
    n = params["n"]
    t = generate_mt(law, n, rng)
    g = PATH_CATALOG[params["functional"]]
    cum = t.cum
    parent = t.parent
    total = 0.0
    for x in level_ids(t, n):
        prods = []
        u = x
        while u != t.root:
            prods.append(cum[u])
            u = parent[u]
        prods.reverse()
        total += cum[x] * g(tuple(prods), params)
    return total


def _rep_mto_rw(law, params, seed, j):
    rng = spawn_rng(seed, 1, j)
    n = params["n"]
    g = PATH_CATALOG[params["functional"]]
    rho_one = law.rho_exact(1.0)
    if law.is_finite_support:
        logs, cum = _tilted_table(law)
        idx = np.searchsorted(cum, rng.random(n), side="right")
        steps = logs[idx]
    else:
        bound = law.max_offspring * law.marks.support[1]
        steps = np.empty(n)
        for i in range(n):
            while True:
                _, marks = law.sample(rng)
                s = sum(marks)
                if s > 0.0 and rng.random() * bound < s:
                    break
            u = rng.random() * s
            acc = 0.0
            pick = marks[-1]
            for m in marks:
                acc += m
                if u < acc:
                    pick = m
                    break
            steps[i] = math.log(pick)
    prods = tuple(np.exp(np.cumsum(steps)).tolist())
    return rho_one ** n * g(prods, params)


def _rep_annealed_endpoint(law, params, seed, j):
    rng = replica_rng(seed, j)
    steps = params["steps"]
    if params["kind"] == "imt":
        env = generate_imt(law, 4, 0, rng)
    else:
        env = generate_mt(law, 0, rng)
    traj = run_walk(env, None, steps, rng)
    return float(env.level[traj.vertices[-1]])


def _rep_carne(law, params, seed, j):
    rng = replica_rng(seed, j)
    env = generate_mt(law, 0, rng)
    w = Walker(env, rng)
    w.advance(params["t"])
    lv = env.level
    reach = max(lv[v] for v in w.path)
    return 1.0 if reach >= params["u"] else 0.0


def _rep_coupling_root(law, params, seed, j):
    rng = replica_rng(seed, j)
    env_rng = spawn_rng(seed, j, 0)
    env = generate_mt(law, 0, env_rng)
    w = Walker(env, spawn_rng(seed, j, 1))
    w.advance(params["source_steps"])
    decomp = decompose(env, w.trajectory())
    pair = build_coupled(decomp, law, rng, max_steps=params["budget"])
    t = pair.tilde_tree
    kids = t.children(t.root)
    marks = tuple(round(t.mark[c], 12) for c in kids)
    return hash((len(kids), marks))


def _rep_imt_root_key(law, params, seed, j):
    rng = replica_rng(seed, j)
    t = generate_imt(law, 1, 0, rng)
    kids = t.children(t.root)
    marks = tuple(round(t.mark[c], 12) for c in kids)
    return hash((len(kids), marks))


def _rep_excursion_preserve(law, params, seed, j):
    env = generate_mt(law, 0, spawn_rng(seed, j, 0))
    w = Walker(env, spawn_rng(seed, j, 1))
    w.advance(params["source_steps"])
    decomp = decompose(env, w.trajectory())
    pair = build_coupled(decomp, law, spawn_rng(seed, j, 2))
    bad = 0
    for i in range(len(pair.tilde_eta)):
        if (pair.tilde_eta[i] - pair.tilde_tau[i]) != decomp.excursion_length(i):
            bad += 1
    return float(bad)


def _rep_cascade_y(law, params, seed, j):
    rng = replica_rng(seed, j)
    t = generate_mt(law, max(params["ns"]), rng)
    cum = t.cum
    out = []
    for n in params["ns"]:
        out.append(math.fsum(cum[v] for v in level_ids(t, n)))
    return tuple(out)


def _rep_coupling_decline(law, params, seed, j):
    ts = params["ts"]
    alpha = params["alpha"]
    pair = couple_to_horizon(
        law,
        max(ts),
        tree_rng=spawn_rng(seed, j, 0),
        walk_rng=spawn_rng(seed, j, 1),
        tilde_rng=spawn_rng(seed, j, 2),
    )
    out = []
    for t in ts:
        d = discrepancies(pair, alpha, t)
        out.append(d.delta / t)
        out.append(d.backtrack / math.sqrt(t))
    return tuple(out)


_REPLICA_FNS = {
    "stationarity": _rep_stationarity,
    "col_imt": _rep_col_imt,
    "col_mt": _rep_col_mt,
    "mto_mt": _rep_mto_mt,
    "mto_rw": _rep_mto_rw,
    "annealed_endpoint": _rep_annealed_endpoint,
    "carne": _rep_carne,
    "coupling_root": _rep_coupling_root,
    "imt_root_key": _rep_imt_root_key,
    "coupling_decline": _rep_coupling_decline,
    "excursion_preserve": _rep_excursion_preserve,
    "cascade_y": _rep_cascade_y,
}


# --------------------------------------------------------------------------
# Identity checks
# --------------------------------------------------------------------------


def check_stationarity(law: MarkLaw, functional: str, replicas: int, seed: int,
                       workers: int = 1) -> ExperimentReport:
    """E[F(T_0, T_1)] = E[F(T_1, T_0)] for the environment seen from the walk
    on a fresh rayed tree; paired difference tested at 4 combined SE."""
    t0 = time.perf_counter()
    diffs = run_replicas("stationarity", law, {"functional": functional},
                         replicas, seed, workers)
    mean, se = _mean_se(diffs)
    passed = abs(mean) <= 4.0 * se + _NOISE_FLOOR
    return ExperimentReport(
        name="stationarity",
        parameters={"functional": functional},
        estimates={"difference": {"value": mean, "se": se}},
        statistics={},
        tolerances={"max_abs_difference": "4 SE"},
        passed=passed,
        replicas=replicas,
        seed=seed,
        wall_clock_s=time.perf_counter() - t0,
    )


def check_change_of_law(law: MarkLaw, n: int, functional: str, replicas: int,
                        seed: int, workers: int = 1) -> ExperimentReport:
    """Rayed-side mean of G against the plain-side reweighted level sum."""
    if functional == "mark" and n < 1:
        raise ValueError("the mark functional needs n >= 1")
    t0 = time.perf_counter()
    params = {"n": n, "functional": functional}
    imt_vals = run_replicas("col_imt", law, params, replicas, seed, workers)
    mt_vals = run_replicas("col_mt", law, params, replicas, seed, workers)
    m1, se1 = _mean_se(imt_vals)
    m2, se2 = _mean_se(mt_vals)
    diff = m1 - m2
    comb = math.hypot(se1, se2)
    passed = abs(diff) <= 4.0 * comb + _NOISE_FLOOR * max(1.0, abs(m1), abs(m2))
    return ExperimentReport(
        name="change_of_law",
        parameters=params,
        estimates={
            "imt_side": {"value": m1, "se": se1},
            "mt_side": {"value": m2, "se": se2},
            "difference": {"value": diff, "se": comb},
        },
        statistics={},
        tolerances={"max_abs_difference": "4 combined SE"},
        passed=passed,
        replicas=replicas,
        seed=seed,
        wall_clock_s=time.perf_counter() - t0,
    )


def check_many_to_one(law: MarkLaw, n: int, functional: str, replicas: int,
                      seed: int, workers: int = 1, c: float | None = None
                      ) -> ExperimentReport:
    """Level sum of C_x G(path) against the tilted i.i.d. walk representation."""
    t0 = time.perf_counter()
    params = {"n": n, "functional": functional}
    if c is not None:
        params["c"] = c
    mt_vals = run_replicas("mto_mt", law, params, replicas, seed, workers)
    rw_vals = run_replicas("mto_rw", law, params, replicas, seed, workers)
    m1, se1 = _mean_se(mt_vals)
    m2, se2 = _mean_se(rw_vals)
    diff = m1 - m2
    comb = math.hypot(se1, se2)
    passed = abs(diff) <= 4.0 * comb + _NOISE_FLOOR * max(1.0, abs(m1), abs(m2))
    return ExperimentReport(
        name="many_to_one",
        parameters=params,
        estimates={
            "tree_side": {"value": m1, "se": se1},
            "walk_side": {"value": m2, "se": se2},
            "difference": {"value": diff, "se": comb},
        },
        statistics={},
        tolerances={"max_abs_difference": "4 combined SE"},
        passed=passed,
        replicas=replicas,
        seed=seed,
        wall_clock_s=time.perf_counter() - t0,
    )


# --------------------------------------------------------------------------
# Distribution distance
# --------------------------------------------------------------------------


def _target_cdf(name: str, x: np.ndarray) -> np.ndarray:
    if name == "normal":
        return scipy.special.ndtr(x)
    if name == "half_normal":
        return np.where(x < 0.0, 0.0, 2.0 * scipy.special.ndtr(x) - 1.0)
    raise ValueError(f"unknown target {name!r}")


def ks_statistic(samples, target: str) -> float:
    """Sup distance between the empirical CDF and a named target CDF."""
    xs = np.sort(np.asarray(samples, dtype=float))
    n = len(xs)
    if n < 100:
        raise TooFewSamplesError(f"need at least 100 samples, got {n}")
    cdf = _target_cdf(target, xs)
    grid = np.arange(1, n + 1) / n
    d_plus = float(np.max(grid - cdf))
    d_minus = float(np.max(cdf - (grid - 1.0 / n)))
    return max(d_plus, d_minus)


# --------------------------------------------------------------------------
# CLT harnesses
# --------------------------------------------------------------------------


def _sigma2_for(law: MarkLaw, seed: int, sigma_replicas: int, n_w: int) -> tuple[float, float]:
    est = estimate_sigma2(law, sigma_replicas, 0, n_w, spawn_rng(seed, 777),
                          method="root", eta_replicas=sigma_replicas)
    return est.sigma2, est.se


def quenched_clt(law: MarkLaw, tree_seed: int, steps: int, walks: int, seed: int,
                 kind: str = "imt", ks_tol: float = 0.05,
                 sigma2: float | None = None, sigma_replicas: int = 1000,
                 n_w: int = 8, enforce_regime: bool = True) -> ExperimentReport:
    """Endpoint law of the scaled walk on ONE environment against its target.

    kind="imt": horocycle endpoint against the standard normal.
    kind="mt": depth endpoint against the half-normal.
    The environment is shared (and grown) across walks, so this harness is
    sequential by design; parallelism belongs to annealed replicas.
    ``enforce_regime=False`` lets negative controls run outside the diffusive
    regime (the check is then expected to fail).
    """
    if enforce_regime:
        require_diffusive(law)
    t0 = time.perf_counter()
    sig_se = 0.0
    if sigma2 is None:
        sigma2, sig_se = _sigma2_for(law, seed, sigma_replicas, n_w)
    env_rng = spawn_rng(tree_seed, 0)
    env = generate_imt(law, 4, 0, env_rng) if kind == "imt" else generate_mt(law, 0, env_rng)
    scale = math.sqrt(sigma2 * steps)
    endpoints = np.empty(walks)
    midpoints = np.empty(walks)
    lv = env.level
    half = steps // 2
    for j in range(walks):
        traj = run_walk(env, None, steps, replica_rng(seed, j))
        endpoints[j] = lv[traj.vertices[-1]] / scale
        midpoints[j] = lv[traj.vertices[half]] / scale
    target = "normal" if kind == "imt" else "half_normal"
    ks = ks_statistic(endpoints, target)
    second_moment = float(np.mean(endpoints ** 2))
    # diagnostic only: Brownian increments over disjoint blocks decorrelate
    late = endpoints - midpoints
    inc_corr = float(np.corrcoef(midpoints, late)[0, 1]) if walks > 2 else 0.0
    kap = regime_kappa(law)
    passed = ks <= ks_tol
    return ExperimentReport(
        name=f"quenched_clt_{kind}",
        parameters={"steps": steps, "walks": walks, "tree_seed": tree_seed,
                    "sigma2": sigma2, "sigma2_se": sig_se,
                    "kappa": "inf" if math.isinf(kap) else kap},
        estimates={"second_moment_ratio": {"value": second_moment, "se": 0.0}},
        statistics={"ks": ks, "increment_correlation": inc_corr},
        tolerances={"ks_max": ks_tol},
        passed=passed,
        replicas=walks,
        seed=seed,
        wall_clock_s=time.perf_counter() - t0,
    )


def annealed_clt(law: MarkLaw, steps: int, walks: int, seed: int,
                 kind: str = "imt", ks_tol: float = 0.08,
                 sigma2: float | None = None, sigma_replicas: int = 1000,
                 n_w: int = 8, workers: int = 1,
                 enforce_regime: bool = True) -> ExperimentReport:
    """Endpoint law with a fresh environment per walk.

    ``enforce_regime=False`` lets negative controls run outside the diffusive
    regime with an explicit sigma2.
    """
    if enforce_regime:
        require_diffusive(law)
    t0 = time.perf_counter()
    sig_se = 0.0
    if sigma2 is None:
        sigma2, sig_se = _sigma2_for(law, seed, sigma_replicas, n_w)
    raw = run_replicas("annealed_endpoint", law,
                       {"steps": steps, "kind": kind}, walks, seed, workers)
    scale = math.sqrt(sigma2 * steps)
    endpoints = raw / scale
    target = "normal" if kind == "imt" else "half_normal"
    ks = ks_statistic(endpoints, target)
    second_moment = float(np.mean(endpoints ** 2))
    kap = regime_kappa(law)
    passed = ks <= ks_tol
    return ExperimentReport(
        name=f"annealed_clt_{kind}",
        parameters={"steps": steps, "walks": walks, "sigma2": sigma2,
                    "sigma2_se": sig_se,
                    "kappa": "inf" if math.isinf(kap) else kap},
        estimates={"second_moment_ratio": {"value": second_moment, "se": 0.0},
                   "endpoint_mean": {"value": float(np.mean(endpoints)), "se": 0.0}},
        statistics={"ks": ks},
        tolerances={"ks_max": ks_tol},
        passed=passed,
        replicas=walks,
        seed=seed,
        wall_clock_s=time.perf_counter() - t0,
    )


# --------------------------------------------------------------------------
# Tail bound and coupling checks
# --------------------------------------------------------------------------


def check_carne_bound(law: MarkLaw, t: int, u: int, replicas: int, seed: int,
                      workers: int = 1) -> ExperimentReport:
    """One-sided tail check: P(max depth >= u within t) <= 2 t exp(-u^2 / 2t)."""
    t0 = time.perf_counter()
    hits = run_replicas("carne", law, {"t": t, "u": u}, replicas, seed, workers)
    p_hat, se = _mean_se(hits)
    bound = 2.0 * t * math.exp(-(u * u) / (2.0 * t))
    passed = p_hat <= bound + 3.0 * se
    return ExperimentReport(
        name="carne_varopoulos_bound",
        parameters={"t": t, "u": u},
        estimates={"p_reach": {"value": p_hat, "se": se}},
        statistics={"bound": bound},
        tolerances={"max_exceed": "3 SE"},
        passed=passed,
        replicas=replicas,
        seed=seed,
        wall_clock_s=time.perf_counter() - t0,
    )


def check_coupling_root_law(law: MarkLaw, builds: int, seed: int,
                            workers: int = 1, source_steps: int = 48,
                            budget: int = 16, min_p: float = 0.001
                            ) -> ExperimentReport:
    """Chi-squared comparison of the coupled environment's root litter against
    direct rayed-tree sampling."""
    t0 = time.perf_counter()
    coupled = run_replicas("coupling_root", law,
                           {"source_steps": source_steps, "budget": budget},
                           builds, seed, workers)
    direct = run_replicas("imt_root_key", law, {}, builds, spawn_rng_seed(seed),
                          workers)
    keys = sorted(set(coupled.tolist()) | set(direct.tolist()))
    table = np.array([
        [int(np.sum(coupled == k)) for k in keys],
        [int(np.sum(direct == k)) for k in keys],
    ])
    if len(keys) < 2:
        p_value = 1.0
        chi2 = 0.0
    else:
        chi2, p_value = scipy.stats.chi2_contingency(table)[:2]
    passed = p_value > min_p
    return ExperimentReport(
        name="coupling_root_law",
        parameters={"source_steps": source_steps, "budget": budget},
        estimates={},
        statistics={"chi2": float(chi2), "p_value": float(p_value),
                    "n_bins": len(keys)},
        tolerances={"min_p_value": min_p},
        passed=passed,
        replicas=builds,
        seed=seed,
        wall_clock_s=time.perf_counter() - t0,
    )


def spawn_rng_seed(seed: int) -> int:
    """A derived integer seed (for a second independent replica family)."""
    return int(np.random.SeedSequence(seed, spawn_key=(1,)).generate_state(1)[0])


def check_excursion_preservation(law: MarkLaw, replicas: int, seed: int,
                                 source_steps: int = 2000, workers: int = 1
                                 ) -> ExperimentReport:
    """Coupled excursion lengths must equal the source lengths exactly."""
    t0 = time.perf_counter()
    mism = run_replicas("excursion_preserve", law, {"source_steps": source_steps},
                        replicas, seed, workers)
    bad = int(np.sum(mism))
    return ExperimentReport(
        name="excursion_length_preservation",
        parameters={"source_steps": source_steps},
        estimates={"mismatches": {"value": bad, "se": 0.0}},
        statistics={},
        tolerances={"mismatches": 0},
        passed=bad == 0,
        replicas=replicas,
        seed=seed,
        wall_clock_s=time.perf_counter() - t0,
    )


def check_coupling_declines(law: MarkLaw, ts: tuple[int, ...], replicas: int,
                            seed: int, alpha: float = 0.4, workers: int = 1
                            ) -> ExperimentReport:
    """Medians of delta_t / t and backtrack_t / sqrt(t) must strictly decrease
    across the checkpoint times."""
    t0 = time.perf_counter()
    rows = run_replicas("coupling_decline", law, {"ts": tuple(ts), "alpha": alpha},
                        replicas, seed, workers)
    rows = np.asarray(rows)
    delta_med = [float(np.median(rows[:, 2 * i])) for i in range(len(ts))]
    back_med = [float(np.median(rows[:, 2 * i + 1])) for i in range(len(ts))]
    decl_delta = all(a > b for a, b in zip(delta_med, delta_med[1:]))
    decl_back = all(a > b for a, b in zip(back_med, back_med[1:]))
    passed = decl_delta and decl_back
    return ExperimentReport(
        name="coupling_declines",
        parameters={"ts": list(ts), "alpha": alpha},
        estimates={
            "delta_over_t_medians": {"value": delta_med, "se": 0.0},
            "backtrack_over_sqrt_t_medians": {"value": back_med, "se": 0.0},
        },
        statistics={},
        tolerances={"strictly_decreasing": True},
        passed=passed,
        replicas=replicas,
        seed=seed,
        wall_clock_s=time.perf_counter() - t0,
    )


def check_cascade_martingale(law: MarkLaw, ns: tuple[int, ...], replicas: int,
                             seed: int, workers: int = 1) -> ExperimentReport:
    """Mean of the level-sum martingale Y_n / rho(1)^n equals 1 at 4 SE."""
    t0 = time.perf_counter()
    rows = np.asarray(run_replicas("cascade_y", law, {"ns": tuple(ns)},
                                   replicas, seed, workers))
    rho_one = law.rho_exact(1.0)
    estimates = {}
    passed = True
    for i, n in enumerate(ns):
        vals = rows[:, i] / rho_one ** n
        mean, se = _mean_se(vals)
        estimates[f"Y_{n}"] = {"value": mean, "se": se}
        if abs(mean - 1.0) > 4.0 * se:
            passed = False
    return ExperimentReport(
        name="cascade_martingale",
        parameters={"ns": list(ns)},
        estimates=estimates,
        statistics={},
        tolerances={"max_abs_deviation_from_1": "4 SE"},
        passed=passed,
        replicas=replicas,
        seed=seed,
        wall_clock_s=time.perf_counter() - t0,
    )


def check_regime_closed_forms(seed: int = 0) -> ExperimentReport:
    """Canonical-suite classifications and kappa values against closed forms."""
    from .regime import Classification, classify

    t0 = time.perf_counter()
    laws = canonical_laws()
    expected = {
        "binary_half": (Classification.CRITICAL_NULL_NEG_DRIFT, math.inf),
        "binary_unit": (Classification.TRANSIENT, 1.0),
        "binary_quarter": (Classification.POSITIVE_RECURRENT, math.inf),
        "ternary_half": (Classification.TRANSIENT, math.log(3) / math.log(2)),
        "unary_unit": (Classification.UNBIASED_NULL_RECURRENT, math.inf),
        "two_atom_critical": (Classification.CRITICAL_NULL_NEG_DRIFT, math.inf),
    }
    failures = []
    stats = {}
    for name, law in laws.items():
        rep = classify(law)
        want_cls, want_kappa = expected[name]
        ok = rep.classification is want_cls
        if math.isinf(want_kappa):
            ok = ok and math.isinf(rep.kappa)
        else:
            ok = ok and abs(rep.kappa - want_kappa) <= 1e-9
        stats[name] = {
            "classification": rep.classification.value,
            "kappa": "inf" if math.isinf(rep.kappa) else rep.kappa,
        }
        if not ok:
            failures.append(name)
    return ExperimentReport(
        name="regime_closed_forms",
        parameters={"laws": sorted(laws)},
        estimates={},
        statistics={"per_law": stats, "failures": failures},
        tolerances={"kappa_abs": 1e-9},
        passed=not failures,
        replicas=len(laws),
        seed=seed,
        wall_clock_s=time.perf_counter() - t0,
    )


def check_detailed_balance(law: MarkLaw, trees: int, depth: int, seed: int
                           ) -> ExperimentReport:
    """pi(x) omega(x, y) = pi(y) omega(y, x) on every edge of sampled trees.

    Uses the generic mark kernel on all edges (the root keeps its artificial
    parent mass) and additionally the reflected simulation kernel away from
    the root.
    """
    from .network import invariant_measure
    from .walk import kernel

    t0 = time.perf_counter()
    worst = 0.0
    for j in range(trees):
        t = generate_mt(law, depth, replica_rng(seed, j))
        probs_generic = {}
        probs_reflect = {}
        for v in range(len(t)):
            if t.n_children[v] < 0:
                continue
            probs_generic[v] = dict(kernel(t, v, reflect_root=False))
            probs_reflect[v] = dict(kernel(t, v, reflect_root=True))
        pi = {v: invariant_measure(t, v) for v in probs_generic}
        for v in range(1, len(t)):
            p = t.parent[v]
            if p not in probs_generic or v not in probs_generic:
                continue
            lhs = pi[p] * probs_generic[p][v]
            rhs = pi[v] * probs_generic[v][p]
            worst = max(worst, abs(lhs - rhs))
            if p != t.root:
                lhs = pi[p] * probs_reflect[p][v]
                rhs = pi[v] * probs_reflect[v][p]
                worst = max(worst, abs(lhs - rhs))
    passed = worst <= 1e-12
    return ExperimentReport(
        name="detailed_balance",
        parameters={"trees": trees, "depth": depth},
        estimates={},
        statistics={"max_abs_violation": worst},
        tolerances={"max_abs_violation": 1e-12},
        passed=passed,
        replicas=trees,
        seed=seed,
        wall_clock_s=time.perf_counter() - t0,
    )


def check_oracle_equivalence(law: MarkLaw, trees: int, max_depth: int, seed: int
                             ) -> ExperimentReport:
    """Conductance and max-flow recursions against their independent oracles."""
    from .network import (
        conductance_oracle,
        effective_conductance,
        max_flow,
        max_flow_oracle,
    )

    t0 = time.perf_counter()
    worst = 0.0
    for j in range(trees):
        rng = replica_rng(seed, j)
        depth = 1 + j % max_depth
        t = generate_mt(law, depth, rng)
        c_rec = effective_conductance(t, depth)
        c_orc = conductance_oracle(t, depth)
        f_rec = max_flow(t, depth)
        f_orc = max_flow_oracle(t, depth)
        worst = max(
            worst,
            abs(c_rec - c_orc) / max(1.0, abs(c_orc)),
            abs(f_rec - f_orc) / max(1.0, abs(f_orc)),
        )
    passed = worst <= 1e-9
    return ExperimentReport(
        name="oracle_equivalence",
        parameters={"trees": trees, "max_depth": max_depth},
        estimates={},
        statistics={"max_rel_deviation": worst},
        tolerances={"max_rel_deviation": 1e-9},
        passed=passed,
        replicas=trees,
        seed=seed,
        wall_clock_s=time.perf_counter() - t0,
    )


# --------------------------------------------------------------------------
# Suites
# --------------------------------------------------------------------------


def verify_suite(suite: str, seed: int, workers: int = 1, scale: float = 1.0,
                 law: MarkLaw | None = None) -> list[ExperimentReport]:
    """Run a named verification suite; ``scale`` shrinks replica counts.

    ``law`` substitutes the subject law in the law-parameterized checks
    (it must be critical for the identity and coupling checks); the
    deterministic calibration law is always the fixed binary one.
    """
    laws = canonical_laws()
    two_atom = law if law is not None else laws["two_atom_critical"]
    binary = laws["binary_half"]

    def n(x: int) -> int:
        return max(10, int(x * scale))

    if suite == "core":
        return [
            check_regime_closed_forms(seed),
            check_detailed_balance(two_atom, trees=20, depth=6, seed=seed),
            check_oracle_equivalence(two_atom, trees=n(100), max_depth=8, seed=seed),
            check_cascade_martingale(two_atom, ns=(5, 10), replicas=n(10_000),
                                     seed=seed, workers=workers),
            check_stationarity(binary, "went_to_parent", n(100_000), seed, workers),
            check_stationarity(two_atom, "occupied_mark", n(100_000), seed, workers),
            check_change_of_law(binary, 2, "child_count", n(20_000), seed, workers),
            check_change_of_law(two_atom, 1, "mark", n(100_000), seed, workers),
            check_many_to_one(binary, 3, "final_product", n(20_000), seed, workers),
            check_many_to_one(two_atom, 2, "indicator_final_gt", n(100_000),
                              seed, workers, c=0.25),
            check_carne_bound(two_atom, t=100, u=30, replicas=n(10_000),
                              seed=seed, workers=workers),
            check_carne_bound(two_atom, t=1000, u=100, replicas=n(10_000),
                              seed=seed, workers=workers),
        ]
    if suite == "clt":
        steps = max(256, int(2 ** 14 * min(1.0, scale)))
        walks = n(2000)
        sig_binary, _ = _sigma2_for(binary, seed, n(500), 4)
        return [
            quenched_clt(binary, tree_seed=seed + 1, steps=steps, walks=walks,
                         seed=seed, kind="imt", ks_tol=0.05, sigma2=sig_binary),
            quenched_clt(binary, tree_seed=seed + 2, steps=steps, walks=walks,
                         seed=seed, kind="mt", ks_tol=0.06, sigma2=sig_binary),
            annealed_clt(two_atom, steps=steps, walks=walks, seed=seed,
                         kind="imt", ks_tol=0.08, workers=workers,
                         sigma_replicas=n(3000), n_w=10),
        ]
    if suite == "coupling":
        return [
            check_excursion_preservation(binary, replicas=n(200), seed=seed,
                                         workers=workers),
            check_coupling_root_law(two_atom, builds=n(10_000), seed=seed,
                                    workers=workers),
            check_coupling_declines(binary, ts=(10 ** 3, 10 ** 4, 10 ** 5),
                                    replicas=n(100), seed=seed, workers=workers),
        ]
    raise ValueError(f"unknown suite {suite!r}")

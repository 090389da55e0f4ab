"""Reduced-scale run of every cross-module oracle, used by ``maxinfo verify``."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import hilbert, histories as hs, selection as se, spinmodel as sm

BRUTE_N_MAX = 4


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float


def _configs(n: int, count: int, rng: np.random.Generator) -> list[sm.SpinModelConfig]:
    out = []
    while len(out) < count:
        cfg = sm.SpinModelConfig.random(n, rng)
        if sm.genericity_check(cfg, "weak").generic:
            out.append(cfg)
    return out


def check_evolution(n, rng):
    worst = 0.0
    for cfg in _configs(n, 3, rng):
        for t in rng.uniform(0, n + 0.5, 4):
            a = sm.evolve(cfg, t).amplitudes
            b = sm.evolve_pi_sum(cfg, t)
            worst = max(worst, float(np.abs(a - b).max()))
    return worst < 1e-12, f"pi-sum vs dense max err {worst:.2e}"


def check_reduced_density(n, rng):
    worst = 0.0
    for cfg in _configs(n, 3, rng):
        for t in np.linspace(0, n, 4 * n + 1):
            rho = hilbert.partial_trace_env(sm.evolve(cfg, t)).entries
            worst = max(worst, float(np.abs(rho - sm.reduced_density_analytic(cfg, t)).max()))
    return worst < 1e-12, f"reduced density max err {worst:.2e}"


def check_closed_forms(n, rng):
    worst = 0.0
    for cfg in _configs(n, 3, rng):
        for _ in range(3):
            t, s = sorted(rng.uniform(0, n, 2))
            d = sm.brute_force_decoherence(cfg, [t, s]).entries
            worst = max(worst, float(np.abs(d - sm.analytic_pair_matrix(cfg, t, s)).max()))
        k = int(rng.integers(1, n + 1))
        spec = sm.HistorySpec(tuple(range(1, k)), k - 1 + rng.uniform(0.05, 0.95), k)
        dmat = sm.brute_force_decoherence(cfg, spec.times)
        for i, h in enumerate(dmat.histories):
            signs = [1 if lab == "+" else -1 for lab in h.labels]
            p = sm.analytic_probability(cfg, spec.with_signs(signs))
            worst = max(worst, abs(p - dmat.entries[i, i].real))
    return worst < 1e-10, f"closed form vs brute force max err {worst:.2e}"


def check_classification(n, rng):
    cfg = _configs(min(n, 3), 1, rng)[0]
    rep = sm.classify_pairs(cfg, 9)
    return rep.matches, f"{len(rep.rows)} pairs, {len(rep.mismatches)} mismatches"


def check_interior_optimum(n, rng):
    for cfg in _configs(n, 20, rng):
        se.max_info_select(cfg)
    return True, "golden-section optimum matches closed form on 20 configs"


def check_il(n, rng):
    m = set()
    for cfg in _configs(min(n, 4), 5, rng):
        m.add(se.min_il_select(cfg, interior_points=8).m)
    return m == {min(n, 4) + 1}, f"minimizer sizes {sorted(m)}"


def check_properties(n, rng):
    nb = min(n, 3)
    cfg = _configs(nb, 1, rng)[0]
    sel = se.max_info_select(cfg)
    hset = sm.history_set(cfg, sel.candidate.times)
    dmat = hs.decoherence_matrix(hset, sm.initial_state(cfg))
    dmat.check_invariants()
    e = hs.shannon_information(dmat.probabilities)
    ok = abs(e - hs.eigenvalue_information(dmat)) < 1e-10
    ok &= abs(e - sel.information) < 1e-10
    ok &= hs.tree_information(hset, dmat).consistent
    ok &= hs.nontrivial_count_check(dmat) <= dmat.split.d
    ok &= hs.il_information_entropy(hset, dmat) >= -len(sel.candidate.times) * math.log(dmat.split.d)
    return bool(ok), f"selected S_{sel.chosen_k}, E={e:.6f}"


def check_epsilon(n, rng):
    n = max(n, 3)
    k = 2
    cfg = se.epsilon_regime_config(n, k, 1e-3, rng)
    res = se.max_info_select(cfg)
    ok = res.chosen_k == k and abs(res.E_values[k - 1] - 2 * math.log(2)) < 0.02
    return ok, f"E = {np.round(res.E_values, 4).tolist()}"


def check_non_extendable(n, rng):
    cfg = _configs(min(n, 3), 1, rng)[0]
    sel = se.max_info_select(cfg)
    rep = se.non_extendability_check(cfg, sel.candidate.times, 5)
    return not rep.extendable, f"{len(rep.records)} extensions tried"


def check_montecarlo(n, rng):
    a = se.montecarlo_stats(max(n, 2), 5000, 7, crosscheck=50)
    b = se.montecarlo_stats(max(n, 2), 5000, 7, crosscheck=0)
    same = np.array_equal(a.counts, b.counts) and a.counts.sum() == 5000
    return bool(same), f"fraction S_n {a.fraction_Sn:.4f} reproducible"


CHECKS: list[tuple[str, Callable]] = [
    ("evolution_dual_path", check_evolution),
    ("reduced_density", check_reduced_density),
    ("closed_forms", check_closed_forms),
    ("classification", check_classification),
    ("interior_optimum", check_interior_optimum),
    ("il_minimizer", check_il),
    ("properties", check_properties),
    ("epsilon_regime", check_epsilon),
    ("non_extendability", check_non_extendable),
    ("montecarlo_reproducible", check_montecarlo),
]


def run_verification(n: int, seed: int = 0) -> list[CheckResult]:
    """Run every check at brute-force size ``min(n, 4)``; exceptions count as failures."""
    nb = max(2, min(n, BRUTE_N_MAX))
    out = []
    for i, (name, fn) in enumerate(CHECKS):
        rng = np.random.default_rng([seed, i])
        start = time.perf_counter()
        try:
            passed, detail = fn(nb, rng)
        except Exception as exc:  # a crash is a failed check, reported not raised
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        out.append(CheckResult(name, bool(passed), detail, time.perf_counter() - start))
    return out

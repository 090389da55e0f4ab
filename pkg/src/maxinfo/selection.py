"""Maximum-information selection of Schmidt-projection history sets in the spin model.

The consistent branch-independent candidates are the sets ``S_k`` with
projections at ``{1, ..., k-1, t, k}`` and ``t`` inside interaction k.  Their
information is

    E(S_k, t) = f(N_k) + f(c_k / N_k) + sum_{0 < j < k} f(c_j)

with ``f`` the binary entropy of ``(1 + x)/2``.  Maximizing over ``t`` puts
``N_k(omega*)^2 = |c_k|`` and gives ``E_k = 2 f(sqrt|c_k|) + sum_{j<k} f(c_j)``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import spinmodel as sm
from .histories import (
    CONSISTENCY_TOL,
    P_MIN,
    HistorySet,
    consistency_check,
    decoherence_matrix,
    shannon_information,
)
from .spinmodel import HALF_PI, HistorySpec, SpinModelConfig

TIE_TOL = 1e-10
GOLDEN_TOL = 1e-12
THREADS_ENV = "MAXINFO_THREADS"
MC_CHUNK = 1 << 16
LOG2 = math.log(2.0)

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def f_info(x):
    """Binary entropy of ``(1 + x)/2`` in nats; ``|x|`` slightly above 1 is clamped."""
    x = np.clip(np.asarray(x, dtype=float), -1.0, 1.0)
    p = 0.5 * (1.0 + x)
    q = 0.5 * (1.0 - x)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -np.where(p > 0, p * np.log(p), 0.0) - np.where(q > 0, q * np.log(q), 0.0)
    return float(out) if out.ndim == 0 else out


def golden_section_max(
    fn: Callable[[float], float], lo: float, hi: float, tol: float = GOLDEN_TOL, max_iter: int = 200
) -> tuple[float, float]:
    """Maximize a unimodal ``fn`` on ``[lo, hi]``; returns ``(x*, fn(x*))``."""
    a, b = lo, hi
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = fn(d)
    x = 0.5 * (a + b)
    return x, fn(x)


def closed_form_E(config: SpinModelConfig, k: int) -> float:
    c = config.dots
    return 2.0 * f_info(math.sqrt(abs(c[k - 1]))) + float(np.sum(f_info(c[: k - 1])))


def _omega_information(config: SpinModelConfig, k: int, omega: float) -> float:
    c = config.dots
    nk = sm.N_k(config, k, omega)
    return f_info(nk) + f_info(c[k - 1] / nk) + float(np.sum(f_info(c[: k - 1])))


def set_information(config: SpinModelConfig, k: int, t: float, check: bool = False) -> float:
    """Shannon information of ``S_k`` with interior time ``t``.

    With ``check=True`` the value is compared against the Shannon information
    of all closed-form leaf probabilities.
    """
    if not (k - 1) < t < k:
        raise ValueError(f"t={t} is not inside interaction {k}")
    _, omega = sm.InteractionSchedule(config.n).locate(t)
    if sm.N_k(config, k, omega) <= sm.AXIS_TOL:
        raise sm.DegenerateAxis(f"N_{k} vanishes at t={t}")
    value = _omega_information(config, k, omega)
    if check:
        spec = HistorySpec(tuple(range(1, k)), t, k)
        probs = [
            sm.analytic_probability(config, spec.with_signs(s)) for s in sm.sign_patterns(k + 1)
        ]
        other = shannon_information(probs)
        if abs(other - value) > 1e-12:
            raise AssertionError(f"set information {value!r} != leaf information {other!r}")
    return value


def optimal_interior_time(config: SpinModelConfig, k: int) -> tuple[float, float]:
    """Golden-section maximum of ``E(S_k, t)`` over the interior of interaction k."""
    c = abs(config.dots[k - 1])
    omega, value = golden_section_max(lambda w: _omega_information(config, k, w), 0.0, HALF_PI)
    expected = closed_form_E(config, k)
    if abs(value - expected) > 1e-9:
        raise AssertionError(f"E_{k}: golden-section {value!r} vs closed form {expected!r}")
    nk = sm.N_k(config, k, omega)
    if abs(nk * nk - c) > 1e-6:
        raise AssertionError(f"N_{k}(omega*)^2 = {nk * nk!r} but |c_{k}| = {c!r}")
    return sm.InteractionSchedule.time_of(k, omega), value


@dataclass(frozen=True)
class CandidateSet:
    k: int
    interior_time: float

    def __post_init__(self) -> None:
        if not (self.k - 1) < self.interior_time < self.k:
            raise ValueError(f"interior time {self.interior_time} is outside interaction {self.k}")

    @property
    def times(self) -> tuple[float, ...]:
        return tuple(float(m) for m in range(1, self.k)) + (self.interior_time, float(self.k))

    @property
    def spec(self) -> HistorySpec:
        return HistorySpec(tuple(range(1, self.k)), self.interior_time, self.k)


@dataclass(frozen=True)
class SelectionResult:
    chosen_k: int
    optimal_t: float
    E_values: np.ndarray
    optimal_times: np.ndarray
    information: float
    ties: tuple[int, ...]

    @property
    def candidate(self) -> CandidateSet:
        return CandidateSet(self.chosen_k, self.optimal_t)


def _pick(values: np.ndarray, tie_tol: float) -> tuple[int, tuple[int, ...]]:
    best = values.max()
    ties = tuple(int(i) + 1 for i in np.flatnonzero(values >= best - tie_tol))
    return ties[0], ties


def max_info_select(config: SpinModelConfig, tie_tol: float = TIE_TOL) -> SelectionResult:
    """Pick the ``S_k`` of greatest information; ties are reported, the smallest k is returned."""
    pairs = [optimal_interior_time(config, k) for k in range(1, config.n + 1)]
    times = np.array([p[0] for p in pairs])
    values = np.array([p[1] for p in pairs])
    k, ties = _pick(values, tie_tol)
    return SelectionResult(k, float(times[k - 1]), values, times, float(values[k - 1]), ties)


def epsilon_regime_config(
    n: int, k: int, eps: float, rng: np.random.Generator | None = None
) -> SpinModelConfig:
    """Chain with ``c_j = 1 - eps`` for ``j != k`` and ``c_k = eps``."""
    dots = [eps if j == k else 1.0 - eps for j in range(1, n + 1)]
    return SpinModelConfig.from_angles([math.acos(c) for c in dots], rng)


# ---------------------------------------------------------------------------
# Monte Carlo over measurement directions
# ---------------------------------------------------------------------------


def sample_unit_vector(rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Uniform point(s) on the unit sphere from normalized Gaussian triples."""
    shape = (3,) if size is None else (size, 3)
    x = rng.normal(size=shape)
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


@dataclass(frozen=True)
class MonteCarloReport:
    n: int
    samples: int
    seed: int
    fraction_Sn: float
    fraction_by_k: np.ndarray
    stderr: float
    counts: np.ndarray
    rejections: int
    crosschecked: int = 0


def _draw_generic(rng, n: int, count: int, tol: float) -> tuple[np.ndarray, int]:
    """``count`` generic direction chains of shape ``(count, n+1, 3)`` and the rejection tally."""
    kept = []
    have = 0
    rejected = 0
    while have < count:
        need = count - have
        vecs = sample_unit_vector(rng, need * (n + 1)).reshape(need, n + 1, 3)
        dots = np.einsum("sij,sij->si", vecs[:, :-1], vecs[:, 1:])
        cross = np.linalg.norm(np.cross(vecs[:, :-1], vecs[:, 1:]), axis=-1)
        ok = (np.abs(dots) > tol).all(axis=1) & (cross > tol).all(axis=1)
        rejected += int(need - ok.sum())
        kept.append(vecs[ok])
        have += int(ok.sum())
    return np.concatenate(kept), rejected


def selection_from_vectors(vecs: np.ndarray, tie_tol: float = TIE_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form ``E_k`` table ``(samples, n)`` and chosen k (1-based) for direction chains."""
    c = np.einsum("sij,sij->si", vecs[:, :-1], vecs[:, 1:])
    fc = f_info(c)
    prefix = np.concatenate([np.zeros((c.shape[0], 1)), np.cumsum(fc, axis=1)[:, :-1]], axis=1)
    e = 2.0 * f_info(np.sqrt(np.abs(c))) + prefix
    chosen = np.argmax(e >= e.max(axis=1, keepdims=True) - tie_tol, axis=1) + 1
    return e, chosen


def _mc_chunk(args) -> tuple[np.ndarray, int]:
    n, count, seed_seq, tol, tie_tol = args
    rng = np.random.default_rng(seed_seq)
    vecs, rejected = _draw_generic(rng, n, count, tol)
    _, chosen = selection_from_vectors(vecs, tie_tol)
    return np.bincount(chosen, minlength=n + 1)[1:], rejected


def default_workers() -> int:
    return max(1, int(os.environ.get(THREADS_ENV, "1")))


def montecarlo_stats(
    n: int,
    samples: int,
    seed: int,
    genericity_tol: float = sm.GENERICITY_TOL,
    tie_tol: float = TIE_TOL,
    workers: int | None = None,
    crosscheck: int = 200,
    chunk: int = MC_CHUNK,
) -> MonteCarloReport:
    """Fraction of uniformly random configurations for which ``S_n`` is selected.

    Samples are split into fixed chunks; chunk i draws from
    ``SeedSequence(seed).spawn(...)[i]`` so the counts do not depend on the
    number of workers.  The first ``crosscheck`` samples are re-run through
    :func:`max_info_select` and must choose the same k.
    """
    if samples < 1 or n < 2:
        raise ValueError("need samples >= 1 and n >= 2")
    sizes = [chunk] * (samples // chunk) + ([samples % chunk] if samples % chunk else [])
    seqs = np.random.SeedSequence(seed).spawn(len(sizes))
    jobs = [(n, s, q, genericity_tol, tie_tol) for s, q in zip(sizes, seqs)]
    workers = workers or default_workers()
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_mc_chunk, jobs))
    else:
        results = [_mc_chunk(j) for j in jobs]
    counts = np.sum([r[0] for r in results], axis=0)
    rejections = sum(r[1] for r in results)

    checked = 0
    if crosscheck:
        rng = np.random.default_rng(seqs[0])
        vecs, _ = _draw_generic(rng, n, sizes[0], genericity_tol)
        _, chosen = selection_from_vectors(vecs[:crosscheck], tie_tol)
        for row, k in zip(vecs[:crosscheck], chosen):
            res = max_info_select(SpinModelConfig(row[0], tuple(row[1:])), tie_tol)
            if res.chosen_k != k:
                raise AssertionError(f"vectorized selection chose {k}, direct path {res.chosen_k}")
            checked += 1

    fractions = counts / samples
    p = float(fractions[-1])
    return MonteCarloReport(
        n=n,
        samples=samples,
        seed=seed,
        fraction_Sn=p,
        fraction_by_k=fractions,
        stderr=math.sqrt(p * (1.0 - p) / samples),
        counts=counts,
        rejections=rejections,
        crosschecked=checked,
    )


# ---------------------------------------------------------------------------
# Minimum information-entropy comparison
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ILSelection:
    spec: HistorySpec
    m: int
    s_prime: float
    s2_terms: np.ndarray
    min_by_m: dict[int, float]
    candidates_by_m: dict[int, int]


def _info_terms(config: SpinModelConfig, spec: HistorySpec) -> list[float]:
    """Arguments ``alpha`` with ``E = sum f(alpha)``, one per projection time."""
    m = [0] + list(spec.between_times)
    alphas = [config.lam(m[i], m[i + 1]) for i in range(len(m) - 1)]
    if spec.interior_time is not None:
        k, om = sm.InteractionSchedule(config.n).locate(spec.interior_time)
        nk = sm.N_k(config, k, om)
        alphas.append(config.lam(m[-1], k - 1) * nk)
        if spec.final_time is not None:
            alphas.append(abs(config.dots[k - 1]) / nk)
    return alphas


def il_entropy_of_spec(config: SpinModelConfig, spec: HistorySpec) -> float:
    """``S' = E - 2 m log 2`` from closed-form probabilities (every projection has half the dimension)."""
    probs = [
        sm.analytic_probability(config, spec.with_signs(s))
        for s in sm.sign_patterns(len(spec.times))
    ]
    return shannon_information(probs) - 2 * len(spec.times) * LOG2


def classified_specs(n: int, interior_points: int) -> list[HistorySpec]:
    """Every theorem-form set with nontrivial projection times and interior times on a grid."""
    out = []
    interior = [(i + 1) / (interior_points + 1) for i in range(interior_points)]
    for mask in range(1, 2**n):
        between = tuple(m for m in range(1, n + 1) if mask >> (m - 1) & 1)
        out.append(HistorySpec(between))
    for k in range(1, n + 1):
        for mask in range(2 ** (k - 1)):
            between = tuple(m for m in range(1, k) if mask >> (m - 1) & 1)
            for frac in interior:
                t = (k - 1) + frac
                out.append(HistorySpec(between, t))
                out.append(HistorySpec(between, t, k))
    return out


def min_il_select(
    config: SpinModelConfig, max_times: int | None = None, interior_points: int = 24
) -> ILSelection:
    """Minimize ``S'`` over consistent Schmidt sets with at most ``max_times`` projection times.

    Candidates are the classified consistent forms; projections at ``t = 0``,
    after ``t = n``, or repeated times only add zero-probability histories and
    are excluded as trivial.
    """
    max_times = config.n + 2 if max_times is None else max_times
    best: HistorySpec | None = None
    best_val = math.inf
    min_by_m: dict[int, float] = {}
    count_by_m = {m: 0 for m in range(1, max_times + 1)}
    for spec in classified_specs(config.n, interior_points):
        m = len(spec.times)
        if m > max_times:
            continue
        val = il_entropy_of_spec(config, spec)
        count_by_m[m] += 1
        min_by_m[m] = min(min_by_m.get(m, math.inf), val)
        if val < best_val:
            best, best_val = spec, val
    assert best is not None
    terms = np.array([-(2 * LOG2 - f_info(a)) for a in _info_terms(config, best)])
    if not np.all(terms < 0):
        raise AssertionError(f"S'' has a non-negative term: {terms}")
    if abs(terms.sum() - best_val) > 1e-10:
        raise AssertionError("S'' does not sum to S'")
    if max_times >= config.n + 1 and len(best.times) != config.n + 1:
        raise AssertionError(f"minimizer uses {len(best.times)} times, expected {config.n + 1}")
    return ILSelection(best, len(best.times), best_val, terms, min_by_m, count_by_m)


# ---------------------------------------------------------------------------
# Brute-force checks on the full Hilbert space
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExtensionRecord:
    time: float
    leaf: tuple[int, ...] | None
    consistent: bool
    nontrivial: bool
    max_offdiag: float


@dataclass(frozen=True)
class ExtensionReport:
    base_times: tuple[float, ...]
    records: tuple[ExtensionRecord, ...] = field(default=())

    @property
    def extendable(self) -> bool:
        return any(r.consistent and r.nontrivial for r in self.records)


def _splits_nontrivially(child_probs: dict, p_min: float) -> bool:
    """True if some parent history has two or more children of nonzero probability."""
    for kids in child_probs.values():
        if sum(p > p_min for p in kids) >= 2:
            return True
    return False


def _build_tree(times: Sequence[float], extra: float, leaf: tuple[int, ...] | None):
    """Nested tree for ``times`` with ``extra`` inserted on every branch or under one leaf."""
    times = list(times)

    def build(level: int, prefix: tuple[int, ...]):
        if level == len(times):
            if leaf is not None and prefix == leaf:
                return (extra, [])
            return None
        return (times[level], [build(level + 1, prefix + (i,)) for i in range(2)])

    if leaf is None:
        return _nested(sorted(times + [extra]))
    return build(0, ())


def _nested(times: Sequence[float]):
    if not times:
        return None
    return (times[0], [_nested(times[1:]), _nested(times[1:])])


def _leaf_groups(hset: HistorySet, depth_of: Callable) -> dict:
    groups: dict = {}
    for i, h in enumerate(hset.histories):
        groups.setdefault(depth_of(h), []).append(i)
    return groups


def non_extendability_check(
    config: SpinModelConfig,
    base_times: Sequence[float],
    grid_points_per_interaction: int = 9,
    tol: float = 1e-9,
    p_min: float = P_MIN,
    per_leaf: bool = True,
) -> ExtensionReport:
    """Try adding a Schmidt projection at every grid time to the branch-independent set.

    Each extension is applied to all branches at once and, with ``per_leaf``,
    below every single nontrivial leaf.  A record is nontrivial when some
    history of the base set splits into two children of nonzero probability.
    """
    base = sorted(float(t) for t in base_times)
    psi = sm.initial_state(config)
    base_set = sm.history_set(config, base)
    base_p = decoherence_matrix(base_set, psi).probabilities
    leaves = [h.indices for h, p in zip(base_set.histories, base_p) if p > p_min]
    grid = sm.InteractionSchedule(config.n).grid(grid_points_per_interaction)
    records = []
    for tau in grid:
        if any(abs(tau - b) < 1e-12 for b in base):
            continue
        targets: list[tuple[int, ...] | None] = [None]
        if per_leaf and tau > base[-1]:
            targets += leaves
        for leaf in targets:
            tree = _build_tree(base, float(tau), leaf)
            hset = sm.history_tree(config, tree)
            dmat = decoherence_matrix(hset, psi)
            rep = consistency_check(dmat, "medium", tol)
            # Group children by their parent in the base set (drop the index of tau).
            if leaf is None:
                pos = sorted(base + [float(tau)]).index(float(tau))

                def parent(h, pos=pos):
                    return h.indices[:pos] + h.indices[pos + 1 :]

            else:

                def parent(h):
                    return h.indices[: len(base)]

            groups = _leaf_groups(hset, parent)
            probs = dmat.probabilities
            child = {k: [probs[i] for i in v] for k, v in groups.items()}
            records.append(
                ExtensionRecord(
                    float(tau),
                    leaf,
                    rep.consistent,
                    _splits_nontrivially(child, p_min),
                    rep.max_offdiag,
                )
            )
    return ExtensionReport(tuple(base), tuple(records))


@dataclass(frozen=True)
class EnumerationResult:
    best_information: float
    best_tree: object
    sets_checked: int
    consistent_sets: int


def enumerate_branch_dependent(
    config: SpinModelConfig,
    grid_points_per_interaction: int = 4,
    tol: float = 1e-9,
    p_min: float = P_MIN,
    max_depth: int | None = None,
) -> EnumerationResult:
    """Exhaustive search over branch-dependent Schmidt trees on a coarse time grid.

    Trees grow one node at a time; any partial tree that is already
    inconsistent is pruned since refining an inconsistent set cannot restore
    consistency.  Leaves of zero probability are not extended.
    """
    grid = [float(t) for t in sm.InteractionSchedule(config.n).grid(grid_points_per_interaction)]
    grid = [t for t in grid if t > 0.0]
    max_depth = max_depth or len(grid)
    psi = sm.initial_state(config)
    decs: dict[float, sm.TimedDecomposition] = {}
    heis: dict[float, list[np.ndarray]] = {}
    for t in grid:
        decs[t] = sm.schmidt_decomposition_at(config, t)
        u = sm.full_unitary(config, t)
        heis[t] = [u.conj().T @ p.entries @ u for p in decs[t].projectors]

    stats = {"checked": 0, "consistent": 0}
    best = {"info": -1.0, "tree": None}

    # A partial tree is a list of leaves (path vector, last time, depth, open flag).
    def evaluate(leaves):
        vecs = np.array([lv[0] for lv in leaves])
        gram = vecs.conj() @ vecs.T
        off = gram - np.diag(gram.diagonal())
        return float(np.abs(off).max(initial=0.0)), gram.diagonal().real

    def search(leaves, history):
        stats["checked"] += 1
        worst, probs = evaluate(leaves)
        if worst > tol:
            return
        stats["consistent"] += 1
        info = shannon_information(probs)
        if info > best["info"] + 1e-12:
            best["info"], best["tree"] = info, tuple(history)
        # Expand open leaves in a fixed order so each tree is generated once.
        for i, (vec, last, depth, open_) in enumerate(leaves):
            if not open_:
                continue
            closed = [
                lv if j != i else (lv[0], lv[1], lv[2], False) for j, lv in enumerate(leaves)
            ]
            if probs[i] <= p_min or depth >= max_depth:
                leaves = closed
                continue
            for t in grid:
                if t <= last:
                    continue
                kids = [(h @ vec, t, depth + 1, True) for h in heis[t]]
                search(
                    closed[:i] + kids + closed[i + 1 :],
                    history + [(leaves[i][1], i, t)],
                )
            leaves = closed
        return

    root = [(psi.amplitudes.copy(), 0.0, 0, True)]
    search(root, [])
    return EnumerationResult(best["info"], best["tree"], stats["checked"], stats["consistent"])

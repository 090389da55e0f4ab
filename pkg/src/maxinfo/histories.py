"""Branch-dependent history sets, decoherence matrices and information measures.

A :class:`HistorySet` is a tree.  Each internal node carries a projective
decomposition of the identity at one time; child ``i`` of a node continues the
branch selected by projector ``i``.  Leaves are histories.  Projectors are
stored in the Schrodinger picture and moved to the Heisenberg picture with the
set's evolution operator, ``P_H(t) = U(t)^dagger P U(t)``.

All logarithms are natural.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterator, Literal, Sequence

import numpy as np

from .hilbert import DenseOperator, StateVector, TensorSplit

CONSISTENCY_TOL = 1e-10
P_MIN = 1e-12

Criterion = Literal["medium", "weak"]


class TimeOrderingError(ValueError):
    pass


class ConsistencyBoundViolation(RuntimeError):
    """More nontrivial medium-consistent histories than the Hilbert space dimension."""


@dataclass(frozen=True, eq=False)
class TimedDecomposition:
    """Orthogonal projectors at one time summing to the identity."""

    time: float
    projectors: tuple[DenseOperator, ...]
    labels: tuple[str, ...] = ()
    tol: float = field(default=CONSISTENCY_TOL, repr=False)

    def __post_init__(self) -> None:
        if self.time < 0:
            raise ValueError(f"projection time must be >= 0, got {self.time}")
        projs = tuple(self.projectors)
        if not projs:
            raise ValueError("a decomposition needs at least one projector")
        object.__setattr__(self, "projectors", projs)
        if not self.labels:
            object.__setattr__(self, "labels", tuple(str(i) for i in range(len(projs))))
        elif len(self.labels) != len(projs):
            raise ValueError("one label per projector")

        d = projs[0].dim
        total = np.zeros((d, d), dtype=complex)
        for i, p in enumerate(projs):
            if p.space != "total":
                raise ValueError("history projectors act on the total space")
            total += p.entries
            for q in projs[i:]:
                prod = p.entries @ q.entries
                target = p.entries if q is p else 0.0
                if np.abs(prod - target).max() > self.tol:
                    raise ValueError(f"projectors at t={self.time} are not orthogonal idempotents")
        if np.abs(total - np.eye(d)).max() > self.tol:
            raise ValueError(f"projectors at t={self.time} do not sum to the identity")

    def __len__(self) -> int:
        return len(self.projectors)


@dataclass(eq=False)
class HistoryNode:
    decomposition: TimedDecomposition
    children: list[HistoryNode | None] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.children:
            self.children = [None] * len(self.decomposition)
        if len(self.children) != len(self.decomposition):
            raise ValueError("one child slot per projector")


@dataclass(frozen=True, eq=False)
class History:
    """One root-to-leaf path, stored chronologically (alpha_1 first)."""

    indices: tuple[int, ...]
    times: tuple[float, ...]
    projectors: tuple[DenseOperator, ...]
    labels: tuple[str, ...]

    @property
    def name(self) -> str:
        return "".join(self.labels)

    def __len__(self) -> int:
        return len(self.indices)


class HistorySet:
    """Tree of timed decompositions; leaves enumerate histories.

    Args:
        root: top node, or ``None`` for the trivial set with one empty history.
        split: tensor split of the total space.
        evolution: ``t -> U(t)`` as a dense array; ``None`` means projectors
            are already in the Heisenberg picture.
    """

    def __init__(
        self,
        root: HistoryNode | None,
        split: TensorSplit,
        evolution: Callable[[float], np.ndarray] | None = None,
    ):
        self.root = root
        self.split = split
        self._evolution = evolution
        self._unitary = lru_cache(maxsize=None)(self._compute_unitary)
        self._check_times(root, -math.inf)
        self._histories = tuple(self._walk(root, (), (), (), ()))

    def _compute_unitary(self, t: float) -> np.ndarray:
        return np.asarray(self._evolution(t), dtype=complex)

    def _check_times(self, node: HistoryNode | None, last: float) -> None:
        if node is None:
            return
        t = node.decomposition.time
        if not t > last:
            raise TimeOrderingError(f"time {t} does not follow {last} along a branch")
        for child in node.children:
            self._check_times(child, t)

    def _walk(self, node, idx, times, projs, labels) -> Iterator[History]:
        if node is None:
            yield History(idx, times, projs, labels)
            return
        dec = node.decomposition
        for i, child in enumerate(node.children):
            yield from self._walk(
                child,
                idx + (i,),
                times + (dec.time,),
                projs + (dec.projectors[i],),
                labels + (dec.labels[i],),
            )

    @property
    def histories(self) -> tuple[History, ...]:
        return self._histories

    def __len__(self) -> int:
        return len(self._histories)

    def heisenberg(self, projector: DenseOperator, t: float) -> np.ndarray:
        if self._evolution is None:
            return projector.entries
        u = self._unitary(float(t))
        return u.conj().T @ projector.entries @ u

    def path_states(self, initial: StateVector) -> dict[tuple[int, ...], np.ndarray]:
        """Heisenberg-picture path-projected states ``C_alpha |psi>`` for every node.

        Keys are index prefixes; the empty tuple is the initial state and full
        histories are leaf keys.  Each node reuses its parent's vector.
        """
        out: dict[tuple[int, ...], np.ndarray] = {(): initial.amplitudes}

        def visit(node: HistoryNode | None, prefix: tuple[int, ...]) -> None:
            if node is None:
                return
            dec = node.decomposition
            parent = out[prefix]
            for i, (proj, child) in enumerate(zip(dec.projectors, node.children)):
                out[prefix + (i,)] = self.heisenberg(proj, dec.time) @ parent
                visit(child, prefix + (i,))

        visit(self.root, ())
        return out

    @classmethod
    def branch_independent(
        cls,
        times: Sequence[float],
        decomposition_at: Callable[[float], TimedDecomposition],
        split: TensorSplit,
        evolution: Callable[[float], np.ndarray] | None = None,
    ) -> "HistorySet":
        """Same decomposition times on every branch."""
        decs = [decomposition_at(t) for t in times]

        def build(level: int) -> HistoryNode | None:
            if level == len(decs):
                return None
            dec = decs[level]
            return HistoryNode(dec, [build(level + 1) for _ in dec.projectors])

        return cls(build(0), split, evolution)

    @classmethod
    def from_tree(
        cls,
        tree,
        decomposition_at: Callable[[float], TimedDecomposition],
        split: TensorSplit,
        evolution: Callable[[float], np.ndarray] | None = None,
    ) -> "HistorySet":
        """Build a branch-dependent set from nested ``(time, [child, ...])`` tuples.

        A child of ``None`` ends the branch.  A child list shorter than the
        decomposition is padded with ``None``.
        """
        cache: dict[float, TimedDecomposition] = {}

        def dec(t: float) -> TimedDecomposition:
            if t not in cache:
                cache[t] = decomposition_at(t)
            return cache[t]

        def build(spec) -> HistoryNode | None:
            if spec is None:
                return None
            t, kids = spec
            d = dec(t)
            kids = list(kids) + [None] * (len(d) - len(kids))
            if len(kids) != len(d):
                raise ValueError(f"{len(kids)} children given for {len(d)} projectors at t={t}")
            return HistoryNode(d, [build(k) for k in kids])

        return cls(build(tree), split, evolution)


@dataclass(frozen=True, eq=False)
class DecoherenceMatrix:
    entries: np.ndarray
    histories: tuple[History, ...]
    split: TensorSplit

    @property
    def probabilities(self) -> np.ndarray:
        return self.entries.diagonal().real.copy()

    def __len__(self) -> int:
        return self.entries.shape[0]

    def check_invariants(self, complete: bool = True) -> None:
        d = self.entries
        if np.abs(d - d.conj().T).max() > 1e-12:
            raise AssertionError("decoherence matrix is not Hermitian")
        if np.linalg.eigvalsh(d).min() < -1e-10:
            raise AssertionError("decoherence matrix is not positive semidefinite")
        if complete and abs(np.trace(d).real - 1.0) > 1e-10:
            raise AssertionError(f"trace {np.trace(d).real!r} != 1 for a complete set")


@dataclass(frozen=True)
class ConsistencyReport:
    criterion: Criterion
    max_offdiag: float
    consistent: bool
    tol: float


@dataclass(frozen=True)
class InformationMeasures:
    shannon: float
    il_entropy: float
    history_normalized_dims: np.ndarray


@dataclass(frozen=True)
class TreeInformation:
    """Recursive information breakdown.

    ``nodes`` maps an index prefix to ``(probability, local, subtree)`` where
    ``local`` is the information of the branching at that node and
    ``subtree`` the information of the normalized subtree below it.
    """

    total: float
    leaf_shannon: float
    nodes: dict[tuple[int, ...], tuple[float, float, float]]
    consistent: bool


def class_operator(
    history: History,
    heisenberg: Callable[[DenseOperator, float], np.ndarray],
    split: TensorSplit | None = None,
) -> DenseOperator:
    """``P_H(t_n) ... P_H(t_1)``, latest time leftmost; the empty history gives the identity."""
    if history.projectors:
        split = history.projectors[0].split
    elif split is None:
        raise ValueError("empty history needs an explicit split")
    out = np.eye(split.d, dtype=complex)
    last = -math.inf
    for proj, t in zip(history.projectors, history.times):
        if not t > last:
            raise TimeOrderingError(f"time {t} does not follow {last}")
        last = t
        out = heisenberg(proj, t) @ out
    return DenseOperator(out, "total", split)


def decoherence_matrix(hset: HistorySet, initial: StateVector) -> DecoherenceMatrix:
    """``D[a, b] = <psi| C_b^dagger C_a |psi>`` over the leaves of ``hset``."""
    states = hset.path_states(initial)
    cols = np.column_stack([states[h.indices] for h in hset.histories])
    dmat = cols.T @ cols.conj()
    dmat = 0.5 * (dmat + dmat.conj().T)
    return DecoherenceMatrix(dmat, hset.histories, hset.split)


def consistency_check(
    dmat: DecoherenceMatrix, criterion: Criterion = "medium", tol: float = CONSISTENCY_TOL
) -> ConsistencyReport:
    off = dmat.entries - np.diag(dmat.entries.diagonal())
    if criterion == "medium":
        worst = float(np.abs(off).max(initial=0.0))
    elif criterion == "weak":
        worst = float(np.abs(off.real).max(initial=0.0))
    else:
        raise ValueError(f"unknown criterion {criterion!r}")
    return ConsistencyReport(criterion, worst, worst <= tol, tol)


def probabilities(dmat: DecoherenceMatrix) -> np.ndarray:
    return dmat.probabilities


def shannon_information(probs: Sequence[float] | np.ndarray) -> float:
    """``-sum p log p`` in nats with ``0 log 0 = 0``; tiny negatives are clipped."""
    p = np.clip(np.asarray(probs, dtype=float), 0.0, None)
    if p.sum() > 1.0 + 1e-10:
        raise ValueError(f"probabilities sum to {p.sum()!r} > 1")
    p = np.minimum(p, 1.0)
    nz = p[p > 0]
    return float(-np.sum(nz * np.log(nz)))


def eigenvalue_information(dmat: DecoherenceMatrix) -> float:
    """Shannon information of the eigenvalues of ``D``."""
    return shannon_information(np.linalg.eigvalsh(dmat.entries))


def normalized_dimensions(hset: HistorySet) -> np.ndarray:
    """``prod_k rank(P_k) / d`` for each history."""
    d = hset.split.d
    return np.array(
        [np.prod([p.rank() / d for p in h.projectors]) if len(h) else 1.0 for h in hset.histories]
    )


def il_information_entropy(hset: HistorySet, dmat: DecoherenceMatrix) -> float:
    """Information-entropy ``-sum D_aa log(D_aa / dimhat(a)^2)``."""
    dims = normalized_dimensions(hset)
    total = 0.0
    for p, dim, h in zip(np.clip(dmat.probabilities, 0.0, None), dims, hset.histories):
        if p <= 0.0:
            continue
        if dim == 0.0:
            raise ValueError(f"history {h.name} has a zero-rank projector but probability {p}")
        total -= p * math.log(p / dim**2)
    return total


def information_measures(hset: HistorySet, dmat: DecoherenceMatrix) -> InformationMeasures:
    return InformationMeasures(
        shannon=shannon_information(dmat.probabilities),
        il_entropy=il_information_entropy(hset, dmat),
        history_normalized_dims=normalized_dimensions(hset),
    )


def tree_information(
    hset: HistorySet, dmat: DecoherenceMatrix, tol: float = CONSISTENCY_TOL
) -> TreeInformation:
    """Information computed node by node as ``E(children) + sum_c q_c E(subtree_c)``.

    Node probabilities are those of the coarse-grained set obtained by cutting
    the tree at that node, i.e. the sum of the D block over the leaves below
    it.  For a consistent set these agree with sums of leaf probabilities, and
    the recursive total equals the leaf Shannon information to 1e-12; for an
    inconsistent set the result is still returned with ``consistent=False``.
    """
    leaves = [h.indices for h in hset.histories]
    pos = {idx: i for i, idx in enumerate(leaves)}
    nodes: dict[tuple[int, ...], tuple[float, float, float]] = {}

    def prob(prefix: tuple[int, ...]) -> float:
        sel = [pos[idx] for idx in leaves if idx[: len(prefix)] == prefix]
        return float(dmat.entries[np.ix_(sel, sel)].sum().real)

    def visit(node: HistoryNode | None, prefix: tuple[int, ...]) -> float:
        if node is None:
            nodes[prefix] = (prob(prefix), 0.0, 0.0)
            return 0.0
        p_node = prob(prefix)
        child_p = np.array([prob(prefix + (i,)) for i in range(len(node.children))])
        sub = [visit(c, prefix + (i,)) for i, c in enumerate(node.children)]
        if p_node <= 0.0:
            nodes[prefix] = (p_node, 0.0, 0.0)
            return 0.0
        q = np.clip(child_p / p_node, 0.0, None)
        local = shannon_information(q / max(q.sum(), 1.0))
        subtree = local + float(np.dot(q, sub))
        nodes[prefix] = (p_node, local, subtree)
        return subtree

    total = visit(hset.root, ())
    leaf = shannon_information(dmat.probabilities)
    consistent = consistency_check(dmat, "medium", tol).consistent
    if consistent and abs(total - leaf) > 1e-12:
        raise AssertionError(f"subtree additivity failed: {total!r} vs {leaf!r}")
    return TreeInformation(total, leaf, nodes, consistent)


def _env_overlap(a: np.ndarray, b: np.ndarray, split: TensorSplit) -> float:
    ma = a.reshape(split.d1, split.d2)
    mb = b.reshape(split.d1, split.d2)
    return float(np.sum(np.abs(mb @ ma.conj().T) ** 2))


def env_orthogonality_check(path_states: Sequence[StateVector], tol: float = 1e-10) -> bool:
    """True iff every pair of states has orthogonal environment reduced density matrices.

    Uses ``Tr(rho_E^a rho_E^b) = ||M_b M_a^dagger||_F^2`` with ``M`` the
    ``(d1, d2)`` coefficient matrix, which avoids forming ``d2 x d2`` matrices.
    Inputs are expected normalized.
    """
    for i, a in enumerate(path_states):
        for b in path_states[i + 1 :]:
            if _env_overlap(a.amplitudes, b.amplitudes, a.split) > tol:
                return False
    return True


def nontrivial_count_check(
    dmat: DecoherenceMatrix,
    p_min: float = P_MIN,
    criterion: Criterion = "medium",
    tol: float = CONSISTENCY_TOL,
) -> int:
    count = int(np.sum(dmat.probabilities > p_min))
    if criterion == "medium" and consistency_check(dmat, "medium", tol).consistent:
        if count > dmat.split.d:
            raise ConsistencyBoundViolation(
                f"{count} nontrivial consistent histories exceed d={dmat.split.d}"
            )
    return count


def coarse_grain(dmat: DecoherenceMatrix, groups: Sequence[Sequence[int]]) -> np.ndarray:
    """Decoherence matrix of the coarse-grained set whose histories are unions of ``groups``."""
    g = len(groups)
    out = np.zeros((g, g), dtype=complex)
    for a, ga in enumerate(groups):
        for b, gb in enumerate(groups):
            out[a, b] = dmat.entries[np.ix_(list(ga), list(gb))].sum()
    return out

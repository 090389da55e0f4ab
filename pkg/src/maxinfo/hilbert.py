"""Dense linear algebra on a bipartite Hilbert space H = H1 (system) x H2 (environment).

Index convention: the system index is slowest, so a total-space vector is the
row-major flattening of a ``(d1, d2)`` coefficient matrix and ``A (x) B`` is
``np.kron(A, B)`` with ``A`` acting on the system.  For the spin model the
environment factor is itself ordered (env_1, ..., env_n), again slowest first.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

SpaceTag = Literal["system", "environment", "total"]

DEGENERACY_TOL = 1e-9
WEIGHT_TOL = 1e-12


class SchmidtDegenerate(ValueError):
    """Schmidt projectors are ill-defined because two retained weights coincide."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TensorSplit:
    d1: int
    d2: int

    def __post_init__(self) -> None:
        if self.d1 < 1 or self.d2 < 1:
            raise ValueError(f"dimensions must be positive, got d1={self.d1}, d2={self.d2}")
        if self.d1 > self.d2:
            raise ValueError(f"expected d1 <= d2, got d1={self.d1}, d2={self.d2}")

    @property
    def d(self) -> int:
        return self.d1 * self.d2

    def dim(self, space: SpaceTag) -> int:
        return {"system": self.d1, "environment": self.d2, "total": self.d}[space]


@dataclass(frozen=True, eq=False)
class StateVector:
    """Normalized pure state on the total space of ``split``."""

    amplitudes: np.ndarray
    split: TensorSplit
    norm_tol: float = field(default=1e-12, repr=False)

    def __post_init__(self) -> None:
        amps = _frozen(np.ravel(self.amplitudes))
        if amps.shape != (self.split.d,):
            raise ValueError(f"state has length {amps.shape[0]}, split needs {self.split.d}")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > self.norm_tol:
            raise ValueError(f"state is not normalized (norm={norm!r})")
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def normalized(cls, amplitudes: np.ndarray, split: TensorSplit) -> "StateVector":
        amps = np.asarray(amplitudes, dtype=complex).ravel()
        norm = np.linalg.norm(amps)
        if norm == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return cls(amps / norm, split)

    def coefficients(self) -> np.ndarray:
        """The ``(d1, d2)`` coefficient matrix ``M`` with psi = sum M[a, b] |a>|b>."""
        return self.amplitudes.reshape(self.split.d1, self.split.d2)

    def density(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())


@dataclass(frozen=True, eq=False)
class DenseOperator:
    entries: np.ndarray
    space: SpaceTag
    split: TensorSplit

    def __post_init__(self) -> None:
        m = _frozen(self.entries)
        n = self.split.dim(self.space)
        if m.shape != (n, n):
            raise ValueError(f"{self.space} operator must be {n}x{n}, got {m.shape}")
        object.__setattr__(self, "entries", m)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def is_projector(self, tol: float = 1e-10) -> bool:
        m = self.entries
        return bool(np.abs(m - m.conj().T).max() <= tol and np.abs(m @ m - m).max() <= tol)

    def rank(self, tol: float = 1e-10) -> int:
        # Projector rank is its trace; fall back to SVD for anything else.
        if self.is_projector(tol):
            return int(round(np.trace(self.entries).real))
        return int(np.linalg.matrix_rank(self.entries, tol=tol))

    def apply(self, state: StateVector) -> np.ndarray:
        if self.space != "total":
            raise ValueError("only total-space operators act on states")
        return self.entries @ state.amplitudes


@dataclass(frozen=True, eq=False)
class SchmidtDecomposition:
    """psi = sum_i sqrt(weights[i]) system_basis[:, i] (x) env_basis[:, i].

    Weights are descending.  ``system_basis`` is ``d1 x d1`` (columns), and
    ``env_basis`` is ``d2 x d1``; columns belonging to weights at or below the
    weight tolerance are an arbitrary orthonormal completion.
    """

    weights: np.ndarray
    system_basis: np.ndarray
    env_basis: np.ndarray
    degenerate: bool
    rank: int
    split: TensorSplit

    def reconstruct(self) -> np.ndarray:
        amps = np.zeros(self.split.d, dtype=complex)
        for i, p in enumerate(self.weights):
            amps += np.sqrt(p) * np.kron(self.system_basis[:, i], self.env_basis[:, i])
        return amps


def tensor_product(a, b, split: TensorSplit | None = None):
    """Kronecker product ``a (x) b`` with ``a`` on the slower (system) index.

    Two :class:`DenseOperator` operands must be tagged ``system`` and
    ``environment`` on the same split and give a ``total`` operator.  Plain
    arrays are combined with ``np.kron``; when ``split`` is given the result is
    wrapped as a :class:`StateVector` (1-D) or total :class:`DenseOperator`.
    """
    if isinstance(a, DenseOperator) or isinstance(b, DenseOperator):
        if not (isinstance(a, DenseOperator) and isinstance(b, DenseOperator)):
            raise TypeError("cannot mix DenseOperator with a plain array")
        if (a.space, b.space) != ("system", "environment") or a.split != b.split:
            raise ValueError(
                f"operands {a.space}/{b.space} do not compose to a total operator on one split"
            )
        return DenseOperator(np.kron(a.entries, b.entries), "total", a.split)

    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != b.ndim:
        raise ValueError("cannot take the product of a vector and a matrix")
    out = np.kron(a, b)
    if split is None:
        return out
    if out.shape[0] != split.d:
        raise ValueError(f"product has dimension {out.shape[0]}, split declares {split.d}")
    if a.shape[0] != split.d1:
        raise ValueError(f"first factor has dimension {a.shape[0]}, expected d1={split.d1}")
    if out.ndim == 1:
        return StateVector(out, split)
    return DenseOperator(out, "total", split)


def kron_all(*factors: np.ndarray) -> np.ndarray:
    out = np.ones((1,) if np.ndim(factors[0]) == 1 else (1, 1), dtype=complex)
    for f in factors:
        out = np.kron(out, f)
    return out


def partial_trace_env(state: StateVector) -> DenseOperator:
    """Reduced system density matrix Tr_E |psi><psi|."""
    m = state.coefficients()
    rho = m @ m.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    return DenseOperator(rho, "system", state.split)


def _fix_phase(vec: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(vec)))
    return vec * (abs(vec[k]) / vec[k])


def _complete_basis(cols: np.ndarray, dim: int) -> np.ndarray:
    """Extend orthonormal columns to ``cols.shape[1] + extra`` columns via QR."""
    rng = np.random.default_rng(0)
    k = cols.shape[1]
    trial = np.hstack([cols, rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))])
    q, _ = np.linalg.qr(trial)
    # QR may flip phases of the leading columns; keep the caller's vectors.
    return np.hstack([cols, q[:, k:]])


def schmidt_decompose(
    state: StateVector,
    degeneracy_tol: float = DEGENERACY_TOL,
    weight_tol: float = WEIGHT_TOL,
) -> SchmidtDecomposition:
    """Schmidt decomposition via the eigendecomposition of the reduced density matrix.

    Degenerate weights are reported through ``degenerate`` rather than raised;
    :func:`schmidt_projectors` is where a degeneracy becomes an error.
    """
    split = state.split
    rho = partial_trace_env(state).entries
    vals, vecs = np.linalg.eigh(rho)
    order = np.argsort(vals)[::-1]
    weights = np.clip(vals[order], 0.0, None)
    sys_basis = np.column_stack([_fix_phase(vecs[:, i]) for i in order])

    m = state.coefficients()
    rank = int(np.sum(weights > weight_tol))
    env_cols = [
        (sys_basis[:, i].conj() @ m) / np.sqrt(weights[i]) for i in range(rank)
    ]
    env = np.column_stack(env_cols) if env_cols else np.zeros((split.d2, 0), dtype=complex)
    if rank < split.d1:
        env = _complete_basis(env, split.d2)[:, : split.d1]

    degenerate = bool(np.any(np.abs(np.diff(weights)) < degeneracy_tol))
    return SchmidtDecomposition(
        weights=weights,
        system_basis=sys_basis,
        env_basis=env,
        degenerate=degenerate,
        rank=rank,
        split=split,
    )


def schmidt_weights_svd(state: StateVector) -> np.ndarray:
    """Schmidt weights from the singular values of the coefficient matrix (self-test route)."""
    s = np.linalg.svd(state.coefficients(), compute_uv=False)
    return np.sort(s**2)[::-1]


def schmidt_projectors(
    sd: SchmidtDecomposition,
    split: TensorSplit | None = None,
    weight_tol: float = WEIGHT_TOL,
    degeneracy_tol: float = DEGENERACY_TOL,
) -> tuple[list[DenseOperator], DenseOperator]:
    """Projectors ``|w_i><w_i| (x) I`` for each retained weight, plus the complement.

    Raises:
        SchmidtDegenerate: two weights above ``weight_tol`` coincide within
            ``degeneracy_tol``.
    """
    split = split or sd.split
    kept = [i for i, p in enumerate(sd.weights) if p > weight_tol]
    w = sd.weights[kept]
    if len(w) > 1 and np.any(np.abs(np.diff(w)) < degeneracy_tol):
        raise SchmidtDegenerate(f"retained Schmidt weights {w.tolist()} are degenerate")

    eye2 = np.eye(split.d2)
    projs = []
    total = np.zeros((split.d, split.d), dtype=complex)
    for i in kept:
        vec = sd.system_basis[:, i]
        p = np.kron(np.outer(vec, vec.conj()), eye2)
        total += p
        projs.append(DenseOperator(p, "total", split))
    complement = DenseOperator(np.eye(split.d) - total, "total", split)
    return projs, complement

"""A spin-1/2 system measured in turn by a line of n spin-1/2 pointers.

Interaction k measures the system along ``u_k``: ``|u_k>|up>`` is left alone
while ``|-u_k>|up>`` ends as ``|-u_k>|down>``.  Interactions are separated and
reparameterized so that interaction k runs over ``t in [k-1, k]`` with a linear
ramp ``theta_k(t) = clamp(t - (k-1), 0, 1) * pi/2``.

Conventions used throughout:

* ``u_0 = v`` (the initial system direction) and ``c_k = u_{k-1} . u_k``.
* ``lam(i, j) = prod_{i <= m < j} |u_m . u_{m+1}|`` (empty product is 1).
* ``N_k(omega) = |A_k(omega) u_{k-1}|`` with ``A_k = P(u_k) + cos(omega) Pbar(u_k)``.
* Schmidt projections are labelled ``+`` for the larger weight ``(1 + N)/2``,
  i.e. the system state ``|w(t)>`` with ``w = A(t) v / N(t)``, and ``-`` for
  ``|-w(t)>``.  Closed-form probabilities and off-diagonal elements are written
  for this labelling, which is why signs of the ``c_k`` appear in them.
* A time is located in interaction ``(j, omega)``; integer times ``m >= 1`` are
  placed at the end of interaction m (``omega = pi/2``), ``t = 0`` at the
  start of interaction 1.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Literal, Sequence

import numpy as np

from . import hilbert
from .hilbert import DenseOperator, StateVector, TensorSplit
from .histories import (
    DecoherenceMatrix,
    HistorySet,
    TimedDecomposition,
    decoherence_matrix,
)

GENERICITY_TOL = 1e-6
AXIS_TOL = 1e-12
MAX_DENSE_SPINS = 12
HALF_PI = 0.5 * math.pi

SIGMA = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)
UP = np.array([1.0, 0.0], dtype=complex)
# Pointer eigenbasis of F = i|down><up| - i|up><down| (= sigma_y): columns |+>, |->.
PM_BASIS = np.array([[1.0, 1.0], [1j, -1j]], dtype=complex) / math.sqrt(2.0)


class GenericityError(ValueError):
    pass


class DegenerateAxis(ValueError):
    pass


class NotClassified(ValueError):
    pass


class DimensionCapExceeded(ValueError):
    pass


def sigma_dot(y: np.ndarray) -> np.ndarray:
    return np.tensordot(np.asarray(y, dtype=complex), SIGMA, axes=1)


def bloch_projector(y: np.ndarray) -> np.ndarray:
    """``P(y) = (1 + sigma . y) / 2``; a projector iff ``y`` is a real unit vector."""
    return 0.5 * (np.eye(2) + sigma_dot(y))


def spin_state(u: np.ndarray) -> np.ndarray:
    """Eigenvector of ``sigma . u`` with eigenvalue +1, largest component real positive."""
    _, vecs = np.linalg.eigh(sigma_dot(u))
    vec = vecs[:, 1]
    k = int(np.argmax(np.abs(vec)))
    return vec * (abs(vec[k]) / vec[k])


def projector3(u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    return np.outer(u, u)


def cross_matrix(u: np.ndarray) -> np.ndarray:
    """Matrix of ``x -> u ^ x``."""
    x, y, z = u
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def _unit(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x / np.linalg.norm(x)


@dataclass(frozen=True, eq=False)
class SpinModelConfig:
    """Initial direction ``v`` and measurement directions ``u_1 .. u_n``."""

    v: np.ndarray
    u: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        v = np.array(self.v, dtype=float)
        us = tuple(np.array(x, dtype=float) for x in self.u)
        for name, vec in [("v", v)] + [(f"u[{i + 1}]", x) for i, x in enumerate(us)]:
            if vec.shape != (3,):
                raise ValueError(f"{name} must be a 3-vector")
            if abs(np.linalg.norm(vec) - 1.0) > 1e-12:
                raise ValueError(f"{name} is not a unit vector (norm {np.linalg.norm(vec)!r})")
            vec.setflags(write=False)
        if not us:
            raise ValueError("the model needs at least one environment spin")
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "u", us)

    @classmethod
    def from_vectors(cls, v, u: Iterable) -> "SpinModelConfig":
        return cls(_unit(v), tuple(_unit(x) for x in u))

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "SpinModelConfig":
        vecs = rng.normal(size=(n + 1, 3))
        vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
        return cls(vecs[0], tuple(vecs[1:]))

    @classmethod
    def from_angles(cls, angles: Sequence[float], rng: np.random.Generator | None = None):
        """Chain ``u_0 .. u_n`` with ``angle(u_{k-1}, u_k) = angles[k-1]``.

        Each new vector is tilted from its predecessor in a random azimuthal
        plane (deterministic when ``rng`` is omitted).
        """
        rng = rng or np.random.default_rng(0)
        vecs = [np.array([0.0, 0.0, 1.0])]
        for ang in angles:
            prev = vecs[-1]
            perp = rng.normal(size=3)
            perp -= perp.dot(prev) * prev
            perp /= np.linalg.norm(perp)
            vecs.append(_unit(math.cos(ang) * prev + math.sin(ang) * perp))
        return cls(vecs[0], tuple(vecs[1:]))

    @property
    def n(self) -> int:
        return len(self.u)

    @property
    def directions(self) -> tuple[np.ndarray, ...]:
        """``(u_0 = v, u_1, ..., u_n)``."""
        return (self.v,) + self.u

    @property
    def dots(self) -> np.ndarray:
        """``c_k = u_{k-1} . u_k`` for k = 1..n (index 0 holds c_1)."""
        d = self.directions
        return np.array([d[k - 1] @ d[k] for k in range(1, self.n + 1)])

    @property
    def split(self) -> TensorSplit:
        return TensorSplit(2, 2**self.n)

    def rotated(self, rot: np.ndarray) -> "SpinModelConfig":
        return SpinModelConfig(rot @ self.v, tuple(rot @ x for x in self.u))

    def lam(self, i: int, j: int) -> float:
        c = self.dots
        return float(np.prod(np.abs(c[i:j]))) if j > i else 1.0

    def sign_chain(self, m: int) -> float:
        """Sign of ``c_1 ... c_m`` (so ``w(m) = sign_chain(m) u_m``)."""
        return float(np.prod(np.sign(self.dots[:m]))) if m > 0 else 1.0


@dataclass(frozen=True)
class InteractionSchedule:
    """Separated linear ramps: interaction k runs over ``[k-1, k]``."""

    n: int

    def theta(self, t: float) -> np.ndarray:
        k = np.arange(self.n)
        return np.clip(t - k, 0.0, 1.0) * HALF_PI

    def locate(self, t: float) -> tuple[int, float]:
        """``(j, omega)`` with 1-based interaction index j and ``omega = theta_j(t)``."""
        if t <= 0.0:
            return 1, 0.0
        if t >= self.n:
            return self.n, HALF_PI
        j = math.ceil(t)
        return j, (t - (j - 1)) * HALF_PI

    @staticmethod
    def time_of(k: int, omega: float) -> float:
        return (k - 1) + omega / HALF_PI

    def is_between(self, t: float) -> bool:
        _, om = self.locate(t)
        return om == 0.0 or om == HALF_PI

    def grid(self, points_per_interaction: int) -> np.ndarray:
        """Times with ``points_per_interaction`` per unit interval, endpoints shared."""
        g = points_per_interaction
        pts = [0.0]
        for k in range(1, self.n + 1):
            pts.extend((k - 1) + i / (g - 1) for i in range(1, g))
        pts = np.array(pts)
        # Integers land exactly; fractional points stay strictly inside.
        return np.where(np.isclose(pts, np.round(pts), atol=1e-12), np.round(pts), pts)


def schedule_theta(config: SpinModelConfig, t: float) -> np.ndarray:
    if t < 0:
        raise ValueError("t must be >= 0")
    return InteractionSchedule(config.n).theta(t)


# ---------------------------------------------------------------------------
# Evolution
# ---------------------------------------------------------------------------


def _pointer_rotation(theta: float) -> np.ndarray:
    """``exp(-i theta F)`` with ``F = sigma_y``."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]], dtype=complex)


def _check_cap(n: int, cap: int) -> None:
    if n > cap:
        raise DimensionCapExceeded(f"n={n} exceeds the dense cap of {cap} spins")


def _apply_V(block: np.ndarray, u: np.ndarray, k: int, theta: float, n: int) -> np.ndarray:
    """Apply ``V_k`` to ``block`` of shape ``(2, 2, ..., 2, batch)``."""
    p_up = bloch_projector(u)
    p_dn = np.eye(2) - p_up
    keep = np.tensordot(p_up, block, axes=(1, 0))
    flip = np.tensordot(p_dn, block, axes=(1, 0))
    flip = np.moveaxis(np.tensordot(_pointer_rotation(theta), flip, axes=(1, k)), 0, k)
    return keep + flip


def _evolve_columns(config: SpinModelConfig, t: float, cols: np.ndarray) -> np.ndarray:
    n = config.n
    theta = schedule_theta(config, t)
    block = cols.reshape((2,) * (n + 1) + (cols.shape[1],))
    for k in range(1, n + 1):
        if theta[k - 1] == 0.0:
            continue
        block = _apply_V(block, config.u[k - 1], k, theta[k - 1], n)
    return block.reshape(2 ** (n + 1), cols.shape[1])


def full_unitary(config: SpinModelConfig, t: float, cap: int = MAX_DENSE_SPINS) -> np.ndarray:
    """Dense ``U(t) = V_n(t) ... V_1(t)`` on the ``2^(n+1)``-dimensional space."""
    if t < 0:
        raise ValueError("t must be >= 0")
    _check_cap(config.n, cap)
    d = 2 ** (config.n + 1)
    return _evolve_columns(config, t, np.eye(d, dtype=complex))


def initial_state(config: SpinModelConfig) -> StateVector:
    env = np.zeros(2**config.n, dtype=complex)
    env[0] = 1.0
    return StateVector(np.kron(spin_state(config.v), env), config.split)


def _x_factor(u: np.ndarray, theta: float, sign: int) -> np.ndarray:
    """``x_{+k} = exp(-i theta P(-u_k))`` and ``x_{-k}`` its adjoint."""
    p_dn = bloch_projector(-np.asarray(u))
    return np.eye(2) + (np.exp(-1j * sign * theta) - 1.0) * p_dn


def evolve_pi_sum(config: SpinModelConfig, t: float) -> np.ndarray:
    """``2^{-n/2} sum_pi x_pi(t)|v> (x) |pi>`` with pointer strings in the |+>, |-> basis."""
    n = config.n
    theta = schedule_theta(config, t)
    # amps[pi_1, ..., pi_n, :] = x_pi |v>, built one interaction at a time.
    amps = spin_state(config.v)[None, :]
    for k in range(n):
        xs = [_x_factor(config.u[k], theta[k], s) for s in (+1, -1)]
        amps = np.stack([amps @ x.T for x in xs], axis=-2)
        amps = amps.reshape(-1, 2)
    amps = amps.reshape((2,) * n + (2,))
    # Change pointer basis |pi> -> |up/down> on every env axis.
    for axis in range(n):
        amps = np.moveaxis(np.tensordot(PM_BASIS, amps, axes=(1, axis)), 0, axis)
    sys_first = np.moveaxis(amps, -1, 0).reshape(2, 2**n)
    return (2.0 ** (-n / 2)) * sys_first.ravel()


def evolve(
    config: SpinModelConfig, t: float, check: bool = False, cap: int = MAX_DENSE_SPINS
) -> StateVector:
    """``|psi(t)> = U(t)(|v> (x) |up ... up>)``.

    With ``check=True`` the pi-sum route is evaluated as well and the two must
    agree to 1e-12.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    _check_cap(config.n, cap)
    psi0 = initial_state(config).amplitudes
    amps = _evolve_columns(config, t, psi0[:, None])[:, 0]
    if check:
        other = evolve_pi_sum(config, t)
        err = np.abs(amps - other).max()
        if err > 1e-12:
            raise AssertionError(f"pi-sum and dense evolution disagree by {err:.3e}")
    return StateVector(amps, config.split)


# ---------------------------------------------------------------------------
# SO(3) reduction
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RotationChain:
    b_plus: tuple[np.ndarray, ...]
    b_minus: tuple[np.ndarray, ...]
    a_factors: tuple[np.ndarray, ...]
    a: np.ndarray
    n_value: float


def _A_factor(u: np.ndarray, theta: float) -> np.ndarray:
    p = projector3(u)
    return p + math.cos(theta) * (np.eye(3) - p)


def _B_factor(u: np.ndarray, theta: float, sign: int) -> np.ndarray:
    b = _A_factor(u, theta) - math.sin(theta) * cross_matrix(u)
    return b if sign > 0 else b.T


def rotation_A(config: SpinModelConfig, t: float) -> tuple[np.ndarray, list[np.ndarray]]:
    """``A(t) = A_n(t) ... A_1(t)`` and the factors ``[A_1, ..., A_n]``."""
    theta = schedule_theta(config, t)
    factors = [_A_factor(u, th) for u, th in zip(config.u, theta)]
    a = np.eye(3)
    for f in factors:
        a = f @ a
    return a, factors


def rotation_chain(config: SpinModelConfig, t: float) -> RotationChain:
    theta = schedule_theta(config, t)
    a, factors = rotation_A(config, t)
    return RotationChain(
        b_plus=tuple(_B_factor(u, th, +1) for u, th in zip(config.u, theta)),
        b_minus=tuple(_B_factor(u, th, -1) for u, th in zip(config.u, theta)),
        a_factors=tuple(factors),
        a=a,
        n_value=float(np.linalg.norm(a @ config.v)),
    )


def reduced_density_analytic(config: SpinModelConfig, t: float) -> np.ndarray:
    a, _ = rotation_A(config, t)
    return bloch_projector(a @ config.v)


def schmidt_axis(
    config: SpinModelConfig, t: float, axis_tol: float = AXIS_TOL
) -> tuple[np.ndarray, float]:
    """Unit Schmidt axis ``w(t)`` and ``N(t) = |A(t) v|``."""
    a, _ = rotation_A(config, t)
    y = a @ config.v
    nv = float(np.linalg.norm(y))
    if nv <= axis_tol:
        raise DegenerateAxis(f"N(t={t}) = {nv:.3e} is below {axis_tol}")
    return y / nv, nv


def N_k(config: SpinModelConfig, k: int, omega: float) -> float:
    """``|A_k(omega) u_{k-1}| = sqrt(c_k^2 + cos^2(omega) (1 - c_k^2))``."""
    c = config.dots[k - 1]
    return math.sqrt(c * c + math.cos(omega) ** 2 * (1.0 - c * c))


@dataclass(frozen=True)
class Lemma1Result:
    hypothesis_holds: bool
    min_N: float
    t_at_min: float

    def __bool__(self) -> bool:
        return self.hypothesis_holds


def lemma1_check(
    config: SpinModelConfig, tol: float = GENERICITY_TOL, grid_points: int = 1000
) -> Lemma1Result:
    """Adjacent-dot hypothesis plus the minimum of ``N(t)`` over a grid hitting every integer time."""
    holds = bool(np.all(np.abs(config.dots) > tol))
    per = max(2, math.ceil((grid_points - 1) / config.n) + 1)
    times = InteractionSchedule(config.n).grid(per)
    ns = np.array([np.linalg.norm(rotation_A(config, t)[0] @ config.v) for t in times])
    i = int(np.argmin(ns))
    return Lemma1Result(holds, float(ns[i]), float(times[i]))


@dataclass(frozen=True)
class GenericityReport:
    generic: bool
    mode: str
    min_dot: float
    min_cross: float
    min_weak: float | None
    margin: float


def genericity_check(
    config: SpinModelConfig, mode: Literal["medium", "weak"] = "medium", tol: float = GENERICITY_TOL
) -> GenericityReport:
    d = config.directions
    n = config.n
    dots = [abs(d[k] @ d[k + 1]) for k in range(n)]
    crosses = [float(np.linalg.norm(np.cross(d[k], d[k + 1]))) for k in range(n)]
    margins = dots + crosses
    weak = None
    if mode == "weak" and n >= 2:
        vals = [abs(d[k - 1] @ (np.eye(3) - projector3(d[k])) @ d[k + 1]) for k in range(1, n)]
        weak = min(vals)
        margins = margins + vals
    margin = min(margins)
    return GenericityReport(
        bool(margin > tol),
        mode,
        float(min(dots)),
        float(min(crosses)),
        None if weak is None else float(weak),
        float(margin),
    )


# ---------------------------------------------------------------------------
# Brute-force history sets on the full Hilbert space
# ---------------------------------------------------------------------------


def schmidt_decomposition_at(
    config: SpinModelConfig, t: float, analytic: bool = False
) -> TimedDecomposition:
    """Schmidt projections at time ``t`` labelled ``+`` (larger weight) and ``-``.

    The default computes the Schmidt basis numerically from the evolved state,
    independent of the SO(3) reduction; ``analytic=True`` uses ``w(t)``.
    """
    split = config.split
    eye_env = np.eye(split.d2)
    if analytic:
        w, _ = schmidt_axis(config, t)
        projs = [
            DenseOperator(np.kron(bloch_projector(s * w), eye_env), "total", split) for s in (1, -1)
        ]
    else:
        sd = hilbert.schmidt_decompose(evolve(config, t))
        projs, comp = hilbert.schmidt_projectors(sd, split)
        if comp.rank() > 0:
            projs = projs + [comp]
    return TimedDecomposition(float(t), tuple(projs), ("+", "-")[: len(projs)])


def _evolution(config: SpinModelConfig):
    return lambda t: full_unitary(config, t)


def history_set(
    config: SpinModelConfig, times: Sequence[float], analytic: bool = False
) -> HistorySet:
    """Branch-independent Schmidt-projection set with projections at ``times``."""
    return HistorySet.branch_independent(
        sorted(times),
        lambda t: schmidt_decomposition_at(config, t, analytic),
        config.split,
        _evolution(config),
    )


def history_tree(config: SpinModelConfig, tree, analytic: bool = False) -> HistorySet:
    """Branch-dependent Schmidt-projection set from nested ``(time, [children])`` tuples."""
    return HistorySet.from_tree(
        tree,
        lambda t: schmidt_decomposition_at(config, t, analytic),
        config.split,
        _evolution(config),
    )


def brute_force_decoherence(config: SpinModelConfig, times: Sequence[float]) -> DecoherenceMatrix:
    return decoherence_matrix(history_set(config, times), initial_state(config))


def schrodinger_path_states(
    config: SpinModelConfig, hset: HistorySet, at_time: float, p_min: float = 1e-12
) -> list[StateVector]:
    """Normalized path-projected states ``U(T) C_alpha |psi>`` of the nontrivial histories."""
    states = hset.path_states(initial_state(config))
    u = full_unitary(config, at_time)
    out = []
    for h in hset.histories:
        vec = u @ states[h.indices]
        if np.vdot(vec, vec).real > p_min:
            out.append(StateVector.normalized(vec, config.split))
    return out


# ---------------------------------------------------------------------------
# Closed forms
# ---------------------------------------------------------------------------


def _sign_to_int(s) -> int:
    if s in (1, "+", +1.0):
        return 1
    if s in (-1, "-", -1.0):
        return -1
    raise ValueError(f"bad sign {s!r}")


def _triple(a, b, c) -> float:
    return float(a @ np.cross(b, c))


def _pair_location(config: SpinModelConfig, t: float, s: float):
    if not t <= s:
        raise ValueError(f"expected t <= s, got t={t}, s={s}")
    sched = InteractionSchedule(config.n)
    j, om = sched.locate(t)
    k, ph = sched.locate(s)
    return j, om, k, ph


def pair_case(config: SpinModelConfig, t: float, s: float) -> str:
    j, _, k, _ = _pair_location(config, t, s)
    return "k=j" if k == j else ("k=j+1" if k == j + 1 else "k>j+1")


def _offdiag_parts(config: SpinModelConfig, t: float, s: float) -> tuple[float, float]:
    """``(R, I)`` with ``<psi|P_t^{-b} P_s^a P_t^b|psi> = -a (R + i b I)``."""
    j, om, k, ph = _pair_location(config, t, s)
    d = config.directions
    c = config.dots
    lam = config.lam
    so, co = math.sin(om), math.cos(om)
    if k == j:
        wedge2 = float(np.linalg.norm(np.cross(d[j - 1], d[j])) ** 2)
        r = lam(0, j - 1) * so * math.sin(ph - om) * math.cos(ph) * wedge2 / (4 * N_k(config, j, ph))
        return r, 0.0
    xbar = float(d[j - 1] @ (np.eye(3) - projector3(d[j])) @ d[j + 1])
    triple = _triple(d[j - 1], d[j], d[j + 1])
    sgn_re = math.copysign(1.0, c[j - 1] * c[j])
    sgn_im = -config.sign_chain(j - 1) * math.copysign(1.0, c[j])
    if k == j + 1:
        pre = lam(0, j - 1) * lam(j, j + 1) * so * co * math.sin(ph) ** 2 / (
            4 * N_k(config, j, om) * N_k(config, j + 1, ph)
        )
    else:
        pre = lam(0, j - 1) * lam(j + 1, k - 1) * N_k(config, k, ph) * so * co / (
            4 * N_k(config, j, om)
        )
    re = sgn_re * pre * N_k(config, j, om) * xbar
    im = sgn_im * pre * lam(j - 1, j) * triple
    return re, im


def analytic_offdiag_pair(config: SpinModelConfig, t: float, s: float, signs) -> complex:
    """Closed-form ``D[alpha, beta]`` for the two-time Schmidt set at ``t <= s``.

    ``signs = (alpha, beta)`` with each history a ``(sign at t, sign at s)``
    pair.  Histories with different outcomes at ``s`` never interfere.
    """
    (at, as_), (bt, bs) = [tuple(_sign_to_int(x) for x in h) for h in signs]
    if (at, as_) == (bt, bs):
        raise ValueError("diagonal element requested; use analytic_pair_probability")
    if not genericity_check(config).generic:
        warnings.warn("direction vectors are not generic; closed form may be degenerate")
    if as_ != bs or t == s:
        return 0.0j
    re, im = _offdiag_parts(config, t, s)
    return complex(-as_ * re, -as_ * at * im)


def analytic_pair_probability(config: SpinModelConfig, t: float, s: float, signs) -> float:
    """``p(b at t, a at s) = (1 + b N(t)) (1 + a b q) / 4`` for the two-time Schmidt set."""
    b, a = (_sign_to_int(x) for x in signs)
    j, om, k, ph = _pair_location(config, t, s)
    d = config.directions
    c = config.dots
    lam = config.lam
    so, co = math.sin(om), math.cos(om)
    n_t = lam(0, j - 1) * N_k(config, j, om)
    if k == j:
        wedge2 = float(np.linalg.norm(np.cross(d[j - 1], d[j])) ** 2)
        nphi = N_k(config, j, ph)
        q = (nphi**2 + so * math.cos(ph) * math.sin(ph - om) * wedge2) / (N_k(config, j, om) * nphi)
    else:
        xbar = float(d[j - 1] @ (np.eye(3) - projector3(d[j])) @ d[j + 1])
        if k == j + 1:
            nphi = N_k(config, j + 1, ph)
            q = (
                abs(c[j - 1]) * nphi**2
                + co * so * math.copysign(1.0, c[j - 1]) * c[j] * math.sin(ph) ** 2 * xbar
            ) / (N_k(config, j, om) * nphi)
        else:
            q = (
                N_k(config, k, ph)
                * (
                    lam(j - 1, k - 1)
                    + math.copysign(1.0, c[j - 1] * c[j]) * lam(j + 1, k - 1) * co * so * xbar
                )
                / N_k(config, j, om)
            )
    return 0.25 * (1 + b * n_t) * (1 + a * b * q)


def analytic_pair_matrix(config: SpinModelConfig, t: float, s: float) -> np.ndarray:
    """4x4 closed-form decoherence matrix, histories ordered ``++, +-, -+, --``."""
    labels = [(1, 1), (1, -1), (-1, 1), (-1, -1)]
    out = np.zeros((4, 4), dtype=complex)
    for i, al in enumerate(labels):
        for m, be in enumerate(labels):
            if i == m:
                out[i, i] = analytic_pair_probability(config, t, s, al)
            else:
                out[i, m] = analytic_offdiag_pair(config, t, s, (al, be))
    return out


@dataclass(frozen=True)
class HistorySpec:
    """Projections at integer ``between_times``, then optionally one interior time
    ``t in (k-1, k)`` and optionally the end ``k`` of that interaction.

    ``signs`` lists one sign per projection in chronological order.
    """

    between_times: tuple[int, ...] = ()
    interior_time: float | None = None
    final_time: int | None = None
    signs: tuple[int, ...] = ()

    @property
    def times(self) -> tuple[float, ...]:
        out: list[float] = [float(m) for m in self.between_times]
        if self.interior_time is not None:
            out.append(float(self.interior_time))
        if self.final_time is not None:
            out.append(float(self.final_time))
        return tuple(out)

    def form(self) -> str | None:
        """Theorem form ``"i"``, ``"ii"``, ``"iii"``, or ``None`` if not classified."""
        m = list(self.between_times)
        if any(x < 1 for x in m) or m != sorted(set(m)):
            return None
        if self.interior_time is None:
            return "i" if self.final_time is None else None
        t = self.interior_time
        if t <= 0 or float(t).is_integer():
            return None
        k = math.ceil(t)
        if m and m[-1] > k - 1:
            return None
        if self.final_time is None:
            return "iii"
        return "ii" if self.final_time == k else None

    def with_signs(self, signs: Sequence[int]) -> "HistorySpec":
        return HistorySpec(self.between_times, self.interior_time, self.final_time, tuple(signs))


def analytic_probability(config: SpinModelConfig, spec: HistorySpec) -> float:
    """Closed-form probability of a theorem-classified history.

    The between-time chain contributes ``prod [1 + a_i a_{i+1} lam(m_i, m_{i+1})] / 2``
    with ``m_0 = 0`` and ``a_0 = +``; an interior projection in interaction k adds
    ``[1 + a_l a_t lam(m_l, k-1) N_k] / 2`` and a final projection at k adds
    ``[1 + a_t a_k |c_k| / N_k] / 2``.
    """
    form = spec.form()
    if form is None:
        raise NotClassified(f"{spec} is not of a classified form; use the brute-force path")
    signs = [_sign_to_int(s) for s in spec.signs]
    if len(signs) != len(spec.times):
        raise ValueError(f"{len(signs)} signs for {len(spec.times)} projections")
    if spec.final_time is not None and spec.final_time > config.n:
        raise ValueError("final time beyond the last interaction")
    m = [0] + list(spec.between_times)
    a = [1] + signs[: len(spec.between_times)]
    p = 1.0
    for i in range(len(m) - 1):
        p *= 0.5 * (1 + a[i] * a[i + 1] * config.lam(m[i], m[i + 1]))
    if spec.interior_time is not None:
        k, om = InteractionSchedule(config.n).locate(spec.interior_time)
        nk = N_k(config, k, om)
        a_t = signs[len(spec.between_times)]
        p *= 0.5 * (1 + a[-1] * a_t * config.lam(m[-1], k - 1) * nk)
        if spec.final_time is not None:
            a_k = signs[-1]
            p *= 0.5 * (1 + a_t * a_k * abs(config.dots[k - 1]) / nk)
    return p


def sign_patterns(length: int) -> list[tuple[int, ...]]:
    return list(itertools.product((1, -1), repeat=length))


# ---------------------------------------------------------------------------
# Classification scan
# ---------------------------------------------------------------------------


def is_allowed_pair(config: SpinModelConfig, t: float, s: float) -> bool:
    """Whether ``(t, s)`` is one of the pair shapes the classification permits."""
    j, om, k, ph = _pair_location(config, t, s)
    if t == s or om in (0.0, HALF_PI):
        return True
    return k == j and ph == HALF_PI


@dataclass(frozen=True)
class PairRecord:
    t: float
    s: float
    case_tag: str
    offdiag_abs: float
    analytic_abs: float
    consistent: bool
    allowed: bool


@dataclass(frozen=True)
class ClassificationReport:
    rows: tuple[PairRecord, ...]
    tol: float
    max_analytic_error: float

    @property
    def mismatches(self) -> list[PairRecord]:
        return [r for r in self.rows if r.consistent != r.allowed]

    @property
    def matches(self) -> bool:
        return not self.mismatches


def heisenberg_schmidt_projectors(config: SpinModelConfig, times: Iterable[float]):
    """``{t: [P_H^+(t), P_H^-(t)]}`` computed by brute force."""
    out = {}
    for t in times:
        dec = schmidt_decomposition_at(config, t)
        u = full_unitary(config, t)
        out[t] = [u.conj().T @ p.entries @ u for p in dec.projectors]
    return out


def classify_pairs(
    config: SpinModelConfig,
    grid_points_per_interaction: int = 25,
    tol: float = 1e-9,
    genericity_tol: float = GENERICITY_TOL,
) -> ClassificationReport:
    """Scan all grid pairs ``t <= s`` and mark which two-time Schmidt sets are consistent.

    Off-diagonal magnitudes come from the full Hilbert space; the closed form is
    evaluated alongside and its worst disagreement is reported.
    """
    gen = genericity_check(config, "medium", genericity_tol)
    if not gen.generic:
        raise GenericityError(f"configuration is not generic (margin {gen.margin:.3e})")
    times = InteractionSchedule(config.n).grid(grid_points_per_interaction)
    heis = heisenberg_schmidt_projectors(config, times)
    psi = initial_state(config).amplitudes
    first = {t: [p @ psi for p in heis[t]] for t in times}
    rows = []
    worst = 0.0
    for i, t in enumerate(times):
        for s in times[i:]:
            vecs = [ps @ ft for ft in first[t] for ps in heis[s]]
            if len(vecs) == 4:
                gram = np.array([[np.vdot(b, a) for b in vecs] for a in vecs])
                off = gram - np.diag(gram.diagonal())
                mag = float(np.abs(off).max())
                ana = analytic_pair_matrix(config, t, s)
                worst = max(worst, float(np.abs(ana - gram).max()))
                ana_mag = float(np.abs(ana - np.diag(ana.diagonal())).max())
            else:
                # Rank-one Schmidt set at t = 0: projection onto the initial state.
                gram = np.array([[np.vdot(b, a) for b in vecs] for a in vecs])
                mag = float(np.abs(gram - np.diag(gram.diagonal())).max())
                ana_mag = 0.0
            rows.append(
                PairRecord(
                    float(t),
                    float(s),
                    pair_case(config, t, s),
                    mag,
                    ana_mag,
                    mag < tol,
                    is_allowed_pair(config, t, s),
                )
            )
    return ClassificationReport(tuple(rows), tol, worst)

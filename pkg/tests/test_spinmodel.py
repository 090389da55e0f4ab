import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import generic_configs
from maxinfo import hilbert
from maxinfo import histories as hs
from maxinfo import spinmodel as sm

HALF_PI = math.pi / 2


def angle_config():
    return sm.SpinModelConfig(oracles.ANGLE_V, oracles.ANGLE_U)


def test_config_rejects_non_unit():
    with pytest.raises(ValueError, match=r"u\[2\]"):
        sm.SpinModelConfig(np.array([0, 0, 1.0]), (np.array([1.0, 0, 0]), np.array([0.5, 0, 0])))


def test_schedule_values():
    sched = sm.InteractionSchedule(4)
    np.testing.assert_array_equal(sched.theta(0.0), np.zeros(4))
    np.testing.assert_allclose(sched.theta(2.0), [HALF_PI, HALF_PI, 0, 0])
    np.testing.assert_allclose(sched.theta(1.5), [HALF_PI, HALF_PI / 2, 0, 0])
    assert sched.locate(2.0) == (2, HALF_PI)
    assert sched.locate(0.0) == (1, 0.0)
    assert sched.locate(1.25) == (2, pytest.approx(HALF_PI / 4))
    grid = sched.grid(5)
    assert len(grid) == 17
    assert set(range(5)) <= set(grid.tolist())
    with pytest.raises(ValueError):
        sm.schedule_theta(sm.SpinModelConfig.from_angles([0.3]), -1.0)


def test_unitary_identity_and_unitarity(rng):
    cfg = generic_configs(3, 1, rng)[0]
    np.testing.assert_allclose(sm.full_unitary(cfg, 0.0), np.eye(16), atol=0)
    for t in rng.uniform(0, 3.5, 5):
        u = sm.full_unitary(cfg, t)
        np.testing.assert_allclose(u.conj().T @ u, np.eye(16), atol=1e-12)


def test_measurement_interaction():
    u1 = np.array([1.0, 0.0, 0.0])
    cfg = sm.SpinModelConfig(np.array([0, 0, 1.0]), (u1, np.array([0, 1.0, 0])))
    u = sm.full_unitary(cfg, 1.0)
    up, down = np.array([1.0, 0]), np.array([0, 1.0])
    keep = np.kron(sm.spin_state(u1), np.kron(up, up))
    np.testing.assert_allclose(u @ keep, keep, atol=1e-15)
    flip = np.kron(sm.spin_state(-u1), np.kron(up, up))
    np.testing.assert_allclose(u @ flip, np.kron(sm.spin_state(-u1), np.kron(down, up)), atol=1e-15)


def test_dense_cap():
    cfg = sm.SpinModelConfig.from_angles([0.3] * 3)
    with pytest.raises(sm.DimensionCapExceeded):
        sm.full_unitary(cfg, 1.0, cap=2)


def test_evolve_initial_and_eigenstate():
    v = np.array([0.0, 0.6, 0.8])
    cfg = sm.SpinModelConfig(v, (v.copy(),))
    np.testing.assert_allclose(
        sm.evolve(cfg, 0.0).amplitudes, np.kron(sm.spin_state(v), [1, 0]), atol=0
    )
    sd = hilbert.schmidt_decompose(sm.evolve(cfg, 1.0))
    np.testing.assert_allclose(sd.weights, [1.0, 0.0], atol=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.floats(0.0, 7.0), st.integers(0, 2**31 - 1))
def test_pi_sum_matches_dense(n, t, seed):
    cfg = sm.SpinModelConfig.random(n, np.random.default_rng(seed))
    psi = sm.evolve(cfg, t, check=True)
    assert abs(np.linalg.norm(psi.amplitudes) - 1.0) < 1e-12


def test_rotation_chain_basics(rng):
    cfg = generic_configs(3, 1, rng)[0]
    a, factors = sm.rotation_A(cfg, 0.0)
    np.testing.assert_allclose(a, np.eye(3))
    _, factors = sm.rotation_A(cfg, 1.5)
    np.testing.assert_allclose(factors[0], np.outer(cfg.u[0], cfg.u[0]), atol=1e-15)
    chain = sm.rotation_chain(cfg, 2.3)
    for bp, bm, ak in zip(chain.b_plus, chain.b_minus, chain.a_factors):
        np.testing.assert_allclose(0.5 * (bp + bm), ak, atol=1e-15)
        np.testing.assert_allclose(bp @ bp.T, np.eye(3), atol=1e-14)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 6])
def test_reduced_density_matches_partial_trace(n, rng):
    cfg = generic_configs(n, 1, rng)[0]
    for t in sm.InteractionSchedule(n).grid(5):
        rho = hilbert.partial_trace_env(sm.evolve(cfg, t)).entries
        np.testing.assert_allclose(rho, sm.reduced_density_analytic(cfg, t), atol=1e-12)


def test_schmidt_axis(rng):
    cfg = generic_configs(4, 1, rng)[0]
    w, nv = sm.schmidt_axis(cfg, 0.0)
    np.testing.assert_allclose(w, cfg.v)
    assert nv == 1.0
    for j in range(1, 5):
        w, nv = sm.schmidt_axis(cfg, float(j))
        assert nv == pytest.approx(cfg.lam(0, j), abs=1e-14)
        np.testing.assert_allclose(w, cfg.sign_chain(j) * cfg.u[j - 1], atol=1e-12)
    for t in rng.uniform(0, 4, 8):
        _, nv = sm.schmidt_axis(cfg, t)
        sd = hilbert.schmidt_decompose(sm.evolve(cfg, t))
        np.testing.assert_allclose(sd.weights, [0.5 * (1 + nv), 0.5 * (1 - nv)], atol=1e-12)


def test_degenerate_axis():
    cfg = sm.SpinModelConfig.from_vectors([0, 0, 1], [[1, 0, 0]])
    with pytest.raises(sm.DegenerateAxis):
        sm.schmidt_axis(cfg, 1.0)


def test_lemma1(rng):
    cfg = generic_configs(3, 1, rng)[0]
    res = sm.lemma1_check(cfg)
    assert res.hypothesis_holds and res.min_N > 0
    bad = sm.SpinModelConfig.from_vectors([0, 0, 1], [[1, 0, 1], [1, 0, -1]])
    res = sm.lemma1_check(bad)
    assert not res
    assert res.min_N < 1e-12 and res.t_at_min >= 1.0


def test_genericity():
    ok = sm.SpinModelConfig.from_angles([0.7, 0.7, 0.7])
    assert sm.genericity_check(ok).generic
    perp = sm.SpinModelConfig.from_vectors([0, 0, 1], [[1, 0, 1], [1, 0, -1]])
    rep = sm.genericity_check(perp)
    assert not rep.generic and rep.min_dot < 1e-12
    par = sm.SpinModelConfig.from_vectors([0, 0, 1], [[1, 0, 1], [1, 0, 1]])
    rep = sm.genericity_check(par)
    assert not rep.generic and rep.min_cross < 1e-12
    assert sm.genericity_check(ok, "weak").generic
    # u2 - u1 along y makes Pbar(u1) u0 and Pbar(u1) u2 orthogonal
    weak_only = sm.SpinModelConfig.from_vectors([0, 0, 1], [[1, 0, 1], [1, 2**0.5, 1]])
    assert sm.genericity_check(weak_only, "medium").generic
    rep = sm.genericity_check(weak_only, "weak")
    assert not rep.generic and rep.min_weak < 1e-12


def test_offdiag_vanishes_between_interactions(rng):
    cfg = generic_configs(3, 1, rng)[0]
    for t in (0.0, 1.0, 2.0):
        for s in (t, t + 0.3, 2.5, 3.0):
            for a in (1, -1):
                for b in (1, -1):
                    value = sm.analytic_offdiag_pair(cfg, t, s, ((b, a), (-b, a)))
                    assert abs(value) < 1e-15


def test_offdiag_vanishes_at_end_of_same_interaction(rng):
    cfg = generic_configs(3, 1, rng)[0]
    assert sm.analytic_offdiag_pair(cfg, 1.3, 2.0, ((1, 1), (-1, 1))) == pytest.approx(0, abs=1e-16)


def test_angle_config_pair_matches_frozen_oracle():
    cfg = angle_config()
    d = sm.analytic_pair_matrix(cfg, 0.5, 1.5)
    assert abs(d[0, 2]) > 1e-3
    np.testing.assert_allclose(d, oracles.ANGLE_PAIR_D, atol=1e-10)
    np.testing.assert_allclose(sm.brute_force_decoherence(cfg, [0.5, 1.5]).entries, oracles.ANGLE_PAIR_D, atol=1e-10)


def test_between_times_probability():
    cfg = angle_config()
    spec = sm.HistorySpec((1, 2), signs=(1, 1))
    expected = 0.25 * (1 + cfg.v @ cfg.u[0]) * (1 + cfg.u[0] @ cfg.u[1])
    assert sm.analytic_probability(cfg, spec) == pytest.approx(expected, abs=1e-15)
    assert sm.analytic_probability(cfg, spec) == pytest.approx(oracles.P_PP_12, abs=1e-12)


@pytest.mark.parametrize(
    "spec,form",
    [
        (sm.HistorySpec((1, 2)), "i"),
        (sm.HistorySpec((1,), 2.5, 3), "ii"),
        (sm.HistorySpec((), 0.5), "iii"),
        (sm.HistorySpec((2,), 1.5), None),
        (sm.HistorySpec((1,), 2.5, 2), None),
        (sm.HistorySpec((), 2.0, 2), None),
    ],
)
def test_spec_forms(spec, form):
    assert spec.form() == form


def test_unclassified_spec_refused(rng):
    cfg = generic_configs(3, 1, rng)[0]
    with pytest.raises(sm.NotClassified):
        sm.analytic_probability(cfg, sm.HistorySpec((2,), 1.5, signs=(1, 1)))


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_probabilities_normalized(n, rng):
    cfg = generic_configs(n, 1, rng)[0]
    for spec in (
        sm.HistorySpec(tuple(range(1, n + 1))),
        sm.HistorySpec(tuple(range(1, n)), n - 0.3, n),
        sm.HistorySpec((), n - 0.6),
    ):
        probs = [sm.analytic_probability(cfg, spec.with_signs(s)) for s in sm.sign_patterns(len(spec.times))]
        assert min(probs) >= 0
        assert abs(sum(probs) - 1.0) < 1e-12


def test_closed_forms_match_brute_force_with_signs(rng):
    """Negative adjacent dots exercise the sign factors in every case."""
    worst = 0.0
    for cfg in generic_configs(4, 6, rng):
        for t, s in [(0.4, 0.8), (0.4, 1.0), (0.3, 1.6), (1.2, 3.7), (0.7, 3.2)]:
            d = sm.brute_force_decoherence(cfg, [t, s]).entries
            worst = max(worst, np.abs(d - sm.analytic_pair_matrix(cfg, t, s)).max())
    assert worst < 1e-10


def test_classify_two_spins(rng):
    cfg = generic_configs(2, 1, rng)[0]
    rep = sm.classify_pairs(cfg, 25)
    assert rep.matches
    assert rep.max_analytic_error < 1e-10
    by_pair = {(r.t, r.s): r for r in rep.rows}
    assert by_pair[(0.5, 0.5)].consistent
    assert by_pair[(1.0, 1.75)].consistent
    assert not by_pair[(0.5, 1.5)].consistent
    assert not by_pair[(0.25, 0.5)].consistent


def test_classify_refuses_degenerate():
    cfg = sm.SpinModelConfig.from_vectors([0, 0, 1], [[1, 0, 1], [1, 0, -1]])
    with pytest.raises(sm.GenericityError):
        sm.classify_pairs(cfg, 5)


def test_allowed_multi_time_sets_consistent(rng):
    for cfg in generic_configs(3, 3, rng):
        for times in ([1, 2, 3], [1, 2.4, 3], [1, 2, 2.7], [0.6, 1], [2.2]):
            dmat = sm.brute_force_decoherence(cfg, times)
            assert hs.consistency_check(dmat, "medium", 1e-10).consistent


def test_analytic_schmidt_projectors_agree(rng):
    cfg = generic_configs(2, 1, rng)[0]
    for t in (0.3, 1.0, 1.7):
        num = sm.schmidt_decomposition_at(cfg, t)
        ana = sm.schmidt_decomposition_at(cfg, t, analytic=True)
        for p, q in zip(num.projectors, ana.projectors):
            np.testing.assert_allclose(p.entries, q.entries, atol=1e-10)


def test_rotation_invariance(rng):
    cfg = generic_configs(3, 1, rng)[0]
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    rot = cfg.rotated(q)
    for t, s in [(0.3, 1.6), (0.5, 2.5)]:
        d1 = sm.analytic_pair_matrix(cfg, t, s)
        d2 = sm.analytic_pair_matrix(rot, t, s)
        # improper rotations flip the triple product, i.e. conjugate D
        expected = d1 if np.linalg.det(q) > 0 else d1.conj()
        np.testing.assert_allclose(d2, expected, atol=1e-12)

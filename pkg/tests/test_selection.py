import math

import numpy as np
import pytest

import oracles
from conftest import generic_configs
from maxinfo import histories as hs
from maxinfo import selection as se
from maxinfo import spinmodel as sm

LOG2 = math.log(2)


def test_f_info_values():
    assert se.f_info(0.0) == pytest.approx(LOG2, abs=1e-15)
    assert se.f_info(1.0) == 0.0
    assert se.f_info(-1.0) == 0.0
    assert se.f_info(1.0 + 1e-13) == 0.0
    assert se.f_info(0.5) == pytest.approx(oracles.F_HALF, abs=1e-15)
    x = np.linspace(-1, 1, 11)
    np.testing.assert_allclose(se.f_info(x), se.f_info(-x))


def test_golden_section_on_parabola():
    x, fx = se.golden_section_max(lambda t: -(t - 0.3) ** 2, 0.0, 1.0)
    assert x == pytest.approx(0.3, abs=1e-7)
    assert fx == pytest.approx(0.0, abs=1e-13)


def test_set_information_single_interaction():
    cfg = sm.SpinModelConfig.from_angles([math.acos(0.5)])
    value = se.set_information(cfg, 1, 0.5, check=True)
    assert value == pytest.approx(oracles.K1_QUARTER, abs=1e-14)


def test_set_information_matches_leaf_probabilities(rng):
    for cfg in generic_configs(4, 5, rng):
        for k in range(1, 5):
            se.set_information(cfg, k, k - 1 + rng.uniform(0.05, 0.95), check=True)


def test_set_information_near_end_of_interaction(rng):
    cfg = generic_configs(2, 1, rng)[0]
    c = cfg.dots
    near = se.set_information(cfg, 2, 2 - 1e-9)
    expected = se.f_info(c[0]) + se.f_info(abs(c[1]))
    assert near == pytest.approx(expected, abs=1e-7)
    with pytest.raises(ValueError):
        se.set_information(cfg, 2, 2.0)


def test_optimal_interior_time_half():
    cfg = sm.SpinModelConfig.from_angles([math.acos(0.5)])
    t, value = se.optimal_interior_time(cfg, 1)
    assert value == pytest.approx(oracles.TWO_F_ROOT_HALF, abs=1e-12)
    _, om = sm.InteractionSchedule(1).locate(t)
    assert sm.N_k(cfg, 1, om) ** 2 == pytest.approx(0.5, abs=1e-6)


def test_optimum_vanishes_for_parallel_steps():
    cfg = sm.SpinModelConfig.from_angles([1e-4, 1e-4])
    _, value = se.optimal_interior_time(cfg, 2)
    assert value < 1e-6


def test_epsilon_regime_table():
    eps = 1e-3
    for n, k in [(3, 2), (4, 1), (4, 4), (5, 3)]:
        cfg = se.epsilon_regime_config(n, k, eps)
        res = se.max_info_select(cfg)
        assert res.chosen_k == k
        e = res.E_values
        small = -eps * math.log(eps) * 10
        assert all(x < small for x in e[: k - 1])
        assert abs(e[k - 1] - 2 * LOG2) < 0.02 + (k - 1) * small
        assert all(abs(x - LOG2) < small for x in e[k:])


def test_epsilon_regime_matches_frozen_brute_force():
    res = se.max_info_select(se.epsilon_regime_config(3, 2, 1e-3))
    np.testing.assert_allclose(res.E_values, oracles.EPS_E, atol=1e-10)


def test_first_set_selected_for_nearly_parallel_chain():
    # v nearly perpendicular to u1, later steps nearly parallel
    cfg = sm.SpinModelConfig.from_angles([math.acos(0.02), 0.01, 0.01, 0.01])
    res = se.max_info_select(cfg)
    assert res.chosen_k == 1


def test_ties_reported():
    # choose c2 so that 2 f(sqrt c2) + f(c1) = 2 f(sqrt c1)
    c1 = 0.3
    target = 2 * se.f_info(math.sqrt(c1)) - se.f_info(c1)
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if 2 * se.f_info(math.sqrt(mid)) > target else (lo, mid)
    cfg = sm.SpinModelConfig.from_angles([math.acos(c1), math.acos(lo)])
    res = se.max_info_select(cfg, tie_tol=1e-10)
    assert res.ties == (1, 2)
    assert res.chosen_k == 1


def test_selection_rotation_invariant(rng):
    for cfg in generic_configs(4, 5, rng):
        q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
        a = se.max_info_select(cfg)
        b = se.max_info_select(cfg.rotated(q))
        assert a.chosen_k == b.chosen_k
        np.testing.assert_allclose(a.E_values, b.E_values, atol=1e-10)


def test_vectorized_selection_agrees(rng):
    vecs = se.sample_unit_vector(rng, 300 * 4).reshape(300, 4, 3)
    e, chosen = se.selection_from_vectors(vecs)
    for row, ev, k in zip(vecs[:40], e, chosen):
        res = se.max_info_select(sm.SpinModelConfig(row[0], tuple(row[1:])))
        assert res.chosen_k == k
        np.testing.assert_allclose(res.E_values, ev, atol=1e-12)


def test_sample_unit_vector(rng):
    x = se.sample_unit_vector(rng)
    assert abs(np.linalg.norm(x) - 1) < 1e-12
    many = se.sample_unit_vector(rng, 100_000)
    assert np.linalg.norm(many.mean(axis=0)) < 0.02
    a = se.sample_unit_vector(np.random.default_rng(5), 10)
    b = se.sample_unit_vector(np.random.default_rng(5), 10)
    np.testing.assert_array_equal(a, b)


def test_montecarlo_reproducible_and_worker_independent():
    a = se.montecarlo_stats(3, 20_000, 11, chunk=4096, crosscheck=20)
    b = se.montecarlo_stats(3, 20_000, 11, chunk=4096, workers=2, crosscheck=0)
    np.testing.assert_array_equal(a.counts, b.counts)
    assert a.counts.sum() == 20_000
    assert abs(a.fraction_by_k.sum() - 1) < 1 / 20_000
    assert a.crosschecked == 20
    assert a.stderr == pytest.approx(math.sqrt(a.fraction_Sn * (1 - a.fraction_Sn) / 20_000))
    c = se.montecarlo_stats(3, 20_000, 12, chunk=4096, crosscheck=0)
    assert not np.array_equal(a.counts, c.counts)


def test_montecarlo_counts_rejections():
    rep = se.montecarlo_stats(2, 2000, 3, genericity_tol=0.05, crosscheck=0)
    assert rep.rejections > 0
    assert rep.counts.sum() == 2000


def test_min_il_two_spins(rng):
    cfg = generic_configs(2, 1, rng)[0]
    res = se.min_il_select(cfg, max_times=3, interior_points=12)
    assert res.m == 3
    assert res.spec.between_times == (1,)
    assert res.spec.final_time == 2
    frac = res.spec.interior_time - 1
    assert min(frac, 1 - frac) == pytest.approx(1 / 13)
    # same value from the brute-force decoherence matrix
    hset = sm.history_set(cfg, res.spec.times)
    dmat = hs.decoherence_matrix(hset, sm.initial_state(cfg))
    assert hs.il_information_entropy(hset, dmat) == pytest.approx(res.s_prime, abs=1e-10)


def test_min_il_decreases_with_more_times(rng):
    for n in (2, 3):
        cfg = generic_configs(n, 1, rng)[0]
        res = se.min_il_select(cfg, interior_points=6)
        values = [res.min_by_m[m] for m in range(1, n + 2)]
        assert all(b < a for a, b in zip(values, values[1:]))
        assert res.candidates_by_m[n + 2] == 0
        assert np.all(res.s2_terms < 0)


def test_il_spec_value_matches_definition(rng):
    cfg = generic_configs(2, 1, rng)[0]
    spec = sm.HistorySpec((1,))
    expected = -2 * LOG2 + se.f_info(cfg.dots[0])
    assert se.il_entropy_of_spec(cfg, spec) == pytest.approx(expected, abs=1e-14)


def test_enumerator_never_beats_selection(rng):
    for cfg in generic_configs(2, 3, rng):
        res = se.max_info_select(cfg)
        enum = se.enumerate_branch_dependent(cfg, 4)
        assert enum.consistent_sets > 10
        assert enum.best_information <= res.information + 1e-9


def test_selected_set_not_extendable_two_spins(rng):
    for cfg in generic_configs(2, 3, rng):
        res = se.max_info_select(cfg)
        rep = se.non_extendability_check(cfg, res.candidate.times, 7)
        assert rep.records
        assert not rep.extendable


def test_extension_of_smaller_set_is_found(rng):
    cfg = generic_configs(2, 1, rng)[0]
    rep = se.non_extendability_check(cfg, [1.0], 5)
    assert rep.extendable


def test_selected_set_env_orthogonality(rng):
    cfg = generic_configs(3, 1, rng)[0]
    res = se.max_info_select(cfg)
    k = res.chosen_k
    if k > 1:
        between = sm.history_set(cfg, list(range(1, k)))
        assert hs.env_orthogonality_check(sm.schrodinger_path_states(cfg, between, k - 1))
    full = sm.history_set(cfg, res.candidate.times)
    assert not hs.env_orthogonality_check(sm.schrodinger_path_states(cfg, full, k))

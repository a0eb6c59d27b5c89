"""Tests for strategies, discrimination, the exact game, and the verifiers."""

import math

import numpy as np
import pytest

from di2pc.adversary import (
    GeneralEncoding,
    MeasureAll,
    StoreSubset,
    breidbart,
    exact_win_probability,
    optimal_discrimination,
    post_measurement_ensemble,
    random_qubit_device,
    replay_win_probability,
    seesaw_search,
    strategy_family,
    strategy_from_obj,
    verify_key_lemma,
    verify_norm_lemma,
    verify_overlap_lemma,
)
from di2pc.bounds import bound_perfect
from di2pc.errors import DimensionCapError, StrategyError
from di2pc.jordan import epsilon_plus_direct
from di2pc.matcore import RandomSuite, trace_norm
from di2pc.protocols import ideal_bb84_device

COS2_PI8 = math.cos(math.pi / 8) ** 2

KET0 = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)
KET1 = np.array([[0.0, 0.0], [0.0, 1.0]], dtype=complex)
PLUS = np.full((2, 2), 0.5, dtype=complex)


# ---------------------------------------------------------------------------
# discrimination
# ---------------------------------------------------------------------------

def test_discrimination_orthogonal_pure_states():
    res = optimal_discrimination([(0.5, KET0), (0.5, KET1)])
    assert res.win_prob == pytest.approx(1.0, abs=1e-10)
    assert res.dual_gap <= 1e-10


def test_discrimination_identical_states():
    res = optimal_discrimination([(0.5, KET0), (0.5, KET0)])
    assert res.win_prob == pytest.approx(0.5, abs=1e-10)


def test_discrimination_helstrom_value():
    res = optimal_discrimination([(0.5, KET0), (0.5, PLUS)])
    assert res.win_prob == pytest.approx(COS2_PI8, abs=1e-10)
    assert res.dual_gap <= 1e-10


def test_discrimination_matches_helstrom_fuzz():
    rs = RandomSuite(301)
    for trial in range(200):
        suite = rs.child(trial)
        q = float(suite.rng.random())
        rho0 = suite.density_operator(3)
        rho1 = suite.density_operator(3)
        res = optimal_discrimination([(q, rho0), (1.0 - q, rho1)])
        expect = 0.5 * (1.0 + trace_norm(q * rho0 - (1.0 - q) * rho1))
        assert res.win_prob == pytest.approx(expect, abs=1e-10)


def test_discrimination_multi_state_certificate():
    rs = RandomSuite(303)
    for trial in range(40):
        suite = rs.child(trial)
        k = int(suite.rng.integers(3, 6))
        probs = suite.rng.random(k)
        probs /= probs.sum()
        ens = [(float(p), suite.density_operator(3)) for p in probs]
        res = optimal_discrimination(ens)
        assert res.converged
        assert res.dual_gap <= 1e-7
        # POVM validity: PSD within roundoff and sums to identity
        total = sum(res.povm)
        assert np.max(np.abs(total - np.eye(3))) < 1e-8
        for f in res.povm:
            assert np.linalg.eigvalsh((f + f.conj().T) / 2).min() > -1e-9
        # value cannot beat always-guessing-the-likeliest baseline by less
        assert res.win_prob >= max(p for p, _ in ens) - 1e-9


# ---------------------------------------------------------------------------
# ensembles
# ---------------------------------------------------------------------------

def test_ensemble_breidbart_branch_probabilities():
    device = ideal_bb84_device()
    ens = post_measurement_ensemble(device, breidbart(1), 1, (0,))
    assert ens.q == pytest.approx([0.5, 0.5], abs=1e-12)
    # two classical branches per outcome, each a 1-dim record
    for x in (0, 1):
        probs = [p for p, _ in ens.branch_states(x)]
        assert sum(probs) == pytest.approx(1.0, abs=1e-10)


def test_ensemble_store_all_steering():
    device = ideal_bb84_device()
    ens = post_measurement_ensemble(device, StoreSubset(keep=(0,)), 1, (0,))
    # conditional states are |0><0| and |1><1| for the Z basis
    st0 = ens.branch_ops[0][0] / np.trace(ens.branch_ops[0][0])
    st1 = ens.branch_ops[0][1] / np.trace(ens.branch_ops[0][1])
    assert np.max(np.abs(st0 - KET0)) < 1e-12
    assert np.max(np.abs(st1 - KET1)) < 1e-12


def test_ensemble_probabilities_sum_to_one_fuzz():
    rs = RandomSuite(307)
    for trial in range(200):
        suite = rs.child(trial)
        device = random_qubit_device(suite)
        n = 1 + trial % 2
        strat = (breidbart(n) if trial % 3 else
                 StoreSubset(keep=(0,), angles=(0.3,) * (n - 1)))
        theta = tuple(int(b) for b in suite.rng.integers(0, 2, n))
        ens = post_measurement_ensemble(device, strat, n, theta)
        assert ens.q.sum() == pytest.approx(1.0, abs=1e-10)


# ---------------------------------------------------------------------------
# exact game values
# ---------------------------------------------------------------------------

def test_breidbart_attains_unit_memory_bound():
    device = ideal_bb84_device()
    res = exact_win_probability(device, breidbart(1), 1, 1, 0.0)
    assert res.win_prob == pytest.approx(bound_perfect(1, 1, 0.0), abs=1e-9)
    assert res.certified_gap <= 1e-7


def test_store_qubit_attains_qubit_memory_bound():
    device = ideal_bb84_device()
    res = exact_win_probability(device, StoreSubset(keep=(0,)), 1, 2, 0.0)
    assert res.win_prob == pytest.approx(1.0, abs=1e-9)
    assert bound_perfect(1, 2, 0.0) == pytest.approx(1.0, abs=1e-12)


def test_win_probability_monotone_in_gamma():
    device = ideal_bb84_device()
    vals = [exact_win_probability(device, breidbart(2), 2, 1, g).win_prob
            for g in (0.0, 0.5)]
    assert vals[1] >= vals[0] - 1e-12


def test_per_theta_average_invariant():
    device = ideal_bb84_device()
    res = exact_win_probability(device, breidbart(2), 2, 1, 0.0)
    assert len(res.per_theta) == 4
    mean = sum(res.per_theta.values()) / 4
    assert mean == pytest.approx(res.win_prob, abs=1e-12)


def test_strategy_dimension_enforced():
    device = ideal_bb84_device()
    with pytest.raises(StrategyError):
        exact_win_probability(device, StoreSubset(keep=(0, 1)), 2, 2, 0.0)


def test_game_cap_enforced():
    device = ideal_bb84_device()
    with pytest.raises(DimensionCapError):
        exact_win_probability(device, breidbart(7), 7, 1, 0.0)


def test_general_encoding_roundtrip_and_value():
    # keep-the-qubit as an explicit single-branch instrument
    enc = GeneralEncoding(((np.eye(2, dtype=complex),),))
    device = ideal_bb84_device()
    res = exact_win_probability(device, enc, 1, 2, 0.0)
    assert res.win_prob == pytest.approx(1.0, abs=1e-9)
    back = strategy_from_obj(enc.to_obj())
    assert isinstance(back, GeneralEncoding)


def test_general_encoding_must_be_trace_preserving():
    bad = GeneralEncoding(((0.5 * np.eye(2, dtype=complex),),))
    with pytest.raises(StrategyError):
        exact_win_probability(ideal_bb84_device(), bad, 1, 2, 0.0)


def test_strategy_objects_roundtrip():
    for strat in (breidbart(2), StoreSubset(keep=(1,), angles=(0.3,)),
                  MeasureAll(angles=(0.1, 0.2))):
        back = strategy_from_obj(strat.to_obj())
        assert back == strat


def test_monte_carlo_replay_matches_exact_value():
    device = ideal_bb84_device()
    for strat, d in ((breidbart(1), 1), (StoreSubset(keep=(0,)), 2)):
        res = exact_win_probability(device, strat, 1, d, 0.0,
                                    want_decoders=True)
        trials = 20_000
        emp = replay_win_probability(device, strat, 1, 0.0, res.decoders,
                                     trials, seed=11)
        sigma = math.sqrt(res.win_prob * (1 - res.win_prob) / trials) + 1e-9
        assert abs(emp - res.win_prob) < 3 * sigma + 1e-9


# ---------------------------------------------------------------------------
# see-saw
# ---------------------------------------------------------------------------

def test_seesaw_finds_store_optimum():
    res, enc = seesaw_search(ideal_bb84_device(), 1, 2, restarts=3, seed=17,
                             iters=25)
    assert res.win_prob >= 1.0 - 1e-6


def test_seesaw_finds_breidbart_optimum():
    res, _ = seesaw_search(ideal_bb84_device(), 1, 1, restarts=3, seed=17,
                           iters=25)
    assert res.win_prob >= COS2_PI8 - 1e-4


def test_seesaw_never_beats_bound():
    rs = RandomSuite(311)
    for trial in range(10):
        suite = rs.child(trial)
        device = random_qubit_device(suite)
        eps = epsilon_plus_direct(device.alice_meas_0, device.alice_meas_1,
                                  device.sigma_a)
        res, _ = seesaw_search(device, 1, 2, restarts=2, seed=trial, iters=20)
        assert res.win_prob <= bound_perfect(1, 2, eps) + 1e-6


# ---------------------------------------------------------------------------
# verifiers
# ---------------------------------------------------------------------------

def test_verify_key_lemma_small_runs():
    for n, d in ((1, 1), (1, 2), (2, 1), (2, 2)):
        rep = verify_key_lemma(8, n, d, seed=23)
        assert rep.passed, rep.violations[:1]
        assert rep.max_ratio <= 1.0 + 1e-6


def test_verify_key_lemma_imperfect_game():
    rep = verify_key_lemma(8, 2, 2, gamma=0.5, seed=23)
    assert rep.passed


def test_verify_key_lemma_deterministic_and_threaded():
    a = verify_key_lemma(6, 1, 2, seed=29)
    b = verify_key_lemma(6, 1, 2, seed=29)
    c = verify_key_lemma(6, 1, 2, seed=29, threads=3)
    assert a.max_ratio == b.max_ratio == c.max_ratio


def test_verify_norm_lemma_single_term_equality():
    rep = verify_norm_lemma(1, max_dim=4, max_terms=1, seed=1)
    assert rep.passed
    assert rep.max_ratio == pytest.approx(1.0, abs=1e-9)


def test_verify_norm_lemma_commuting_diagonal():
    # diagonal PSD matrices: both sides computable by hand
    from di2pc.matcore import operator_norm, psd_sqrt
    a = np.diag([1.0, 2.0]).astype(complex)
    b = np.diag([3.0, 1.0]).astype(complex)
    lhs = operator_norm(a + b)
    assert lhs == pytest.approx(4.0, abs=1e-12)      # max eig of diag(4, 3)
    roots = [psd_sqrt(a), psd_sqrt(b)]
    l_mat = np.array([[operator_norm(ri @ rj) for rj in roots] for ri in roots])
    # ||sqrt(A)sqrt(B)|| = max_i sqrt(a_i b_i) = sqrt(3)
    assert l_mat[0][1] == pytest.approx(math.sqrt(3.0), abs=1e-12)
    rhs = float(np.max(l_mat.sum(axis=0)))
    assert rhs == pytest.approx(3.0 + math.sqrt(3.0), abs=1e-12)
    assert lhs <= rhs + 1e-12


def test_verify_norm_lemma_fuzz():
    rep = verify_norm_lemma(300, seed=31)
    assert rep.passed
    assert rep.worst_slack >= -1e-9


def test_verify_overlap_lemma_fuzz():
    rep = verify_overlap_lemma(100, 2, 3, seed=37)
    assert rep.passed
    assert rep.worst_slack >= -1e-9


def test_verify_overlap_lemma_anticommuting_blocks():
    # beta = pi/4, d = 1: opposite bases force lhs <= 1/sqrt(2); the
    # deterministic POVM (1, 0) makes the inequality tight.
    from di2pc.adversary import _block_measurement
    from di2pc.matcore import operator_norm, psd_sqrt
    blocks = _block_measurement(math.pi / 4)
    for povm, expect_tight in (((1.0, 0.0), True), ((0.5, 0.5), False)):
        pi0 = sum(np.kron(blocks[(0, x)], np.array([[povm[x]]])) for x in (0, 1))
        pi1 = sum(np.kron(blocks[(1, x)], np.array([[povm[x]]])) for x in (0, 1))
        lhs = operator_norm(psd_sqrt(pi1) @ psd_sqrt(pi0))
        assert lhs <= 1.0 / math.sqrt(2.0) + 1e-9
        if expect_tight:
            assert lhs == pytest.approx(1.0 / math.sqrt(2.0), abs=1e-9)


def test_verification_report_serializes():
    rep = verify_norm_lemma(5, seed=41)
    obj = rep.to_dict()
    assert obj["name"] == "norm-lemma" and obj["trials"] == 5


def test_strategy_family_respects_memory():
    suite = RandomSuite(43)
    fam = strategy_family(2, 1, 2, suite)
    assert all(s.memory_dim(2, 2) <= 1 for s in fam
               if not isinstance(s, StoreSubset))


def test_ball_factor_bounds_imperfect_win():
    # permutation argument: win(gamma) <= |ball| * win(0) for the same encoding
    from di2pc.bounds import hamming_ball
    device = ideal_bb84_device()
    for strat, d in ((breidbart(2), 1), (StoreSubset(keep=(1,)), 2)):
        w0 = exact_win_probability(device, strat, 2, d, 0.0).win_prob
        w_half = exact_win_probability(device, strat, 2, d, 0.5).win_prob
        assert w_half <= hamming_ball(2, 1) * w0 + 1e-9


def test_measure_all_matches_analytic_value():
    # Ideal device, n = 1, intercept at angle mu: the optimal decode picks
    # the likelier outcome per branch, giving
    #   win(mu) = [max(cos^2 mu, sin^2 mu)
    #              + max(cos^2(mu - pi/4), sin^2(mu - pi/4))] / 2.
    device = ideal_bb84_device()
    for mu in np.linspace(0.0, math.pi / 2, 13):
        res = exact_win_probability(device, MeasureAll(angles=(float(mu),)),
                                    1, 1, 0.0)
        c2 = math.cos(mu) ** 2
        x2 = math.cos(mu - math.pi / 4) ** 2
        expect = (max(c2, 1 - c2) + max(x2, 1 - x2)) / 2
        assert res.win_prob == pytest.approx(expect, abs=1e-12)


def test_intercept_game_value_factorizes_over_rounds():
    # i.i.d. device, product strategy, perfect game: the two-round value is
    # the product of the single-round values.
    device = ideal_bb84_device()
    for a, b in ((0.1, 0.6), (math.pi / 8, math.pi / 8), (0.0, 0.5)):
        w1a = exact_win_probability(device, MeasureAll(angles=(a,)), 1, 1,
                                    0.0).win_prob
        w1b = exact_win_probability(device, MeasureAll(angles=(b,)), 1, 1,
                                    0.0).win_prob
        w2 = exact_win_probability(device, MeasureAll(angles=(a, b)), 2, 1,
                                   0.0).win_prob
        assert w2 == pytest.approx(w1a * w1b, abs=1e-10)

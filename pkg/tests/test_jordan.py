"""Tests for the two-projector block decomposition and the anti-commutator routes."""

import math

import numpy as np
import pytest

from di2pc.errors import ArityError, DomainError, ShapeError
from di2pc.jordan import (
    BinaryMeasurement,
    block_probabilities,
    decompose_pair,
    epsilon_plus_blocks,
    epsilon_plus_direct,
    naimark_dilate,
)
from di2pc.matcore import RandomSuite, dagger

Z0 = np.diag([1.0, 0.0]).astype(complex)
Z1 = np.diag([0.0, 1.0]).astype(complex)
PLUS = np.full((2, 2), 0.5, dtype=complex)

Z_MEAS = BinaryMeasurement(Z0, Z1)
X_MEAS = BinaryMeasurement(PLUS, np.eye(2) - PLUS)
MIXED = np.eye(2, dtype=complex) / 2


def rotated_meas(mu: float) -> BinaryMeasurement:
    """Measurement along cos(mu) Z + sin(mu) X."""
    obs = math.cos(mu) * np.diag([1.0, -1.0]) + math.sin(mu) * np.array([[0, 1], [1, 0]])
    return BinaryMeasurement((np.eye(2) + obs) / 2, (np.eye(2) - obs) / 2)


def test_identical_projectors_two_beta_zero_blocks():
    dec = decompose_pair(Z_MEAS, Z_MEAS)
    assert sorted(b.block_dim for b in dec.blocks) == [1, 1]
    assert all(abs(b.angle_beta) < 1e-9 for b in dec.blocks)


def test_mutually_unbiased_pair_gives_pi_over_4():
    dec = decompose_pair(Z_MEAS, X_MEAS)
    assert [b.block_dim for b in dec.blocks] == [2]
    assert dec.blocks[0].angle_beta == pytest.approx(math.pi / 4, abs=1e-10)
    assert np.max(np.abs(dec.reconstruct_p0() - Z0)) < 1e-10
    assert np.max(np.abs(dec.reconstruct_p1() - PLUS)) < 1e-10


def test_swapped_projectors_give_pi_over_2():
    swapped = BinaryMeasurement(Z1, Z0)
    dec = decompose_pair(Z_MEAS, swapped)
    assert sorted(b.block_dim for b in dec.blocks) == [1, 1]
    assert all(abs(b.angle_beta - math.pi / 2) < 1e-9 for b in dec.blocks)


def test_dimension_mismatch_raises():
    big = BinaryMeasurement(np.diag([1.0, 0.0, 0.0]).astype(complex),
                            np.diag([0.0, 1.0, 1.0]).astype(complex))
    with pytest.raises(ShapeError):
        decompose_pair(Z_MEAS, big)


def test_nonprojective_input_rejected():
    with pytest.raises(DomainError):
        BinaryMeasurement(0.6 * Z0, np.eye(2) - 0.6 * Z0)


def _random_projective_pair(suite, dim):
    rng = suite.rng
    r0 = int(rng.integers(0, dim + 1))
    r1 = int(rng.integers(0, dim + 1))
    p = suite.projector(dim, r0)
    q = suite.projector(dim, r1)
    m0 = BinaryMeasurement(p, np.eye(dim) - p)
    m1 = BinaryMeasurement(q, np.eye(dim) - q)
    return m0, m1


def test_reconstruction_fuzz():
    rs = RandomSuite(101)
    for trial in range(300):
        suite = rs.child(trial)
        dim = int(suite.rng.integers(2, 17))
        m0, m1 = _random_projective_pair(suite, dim)
        dec = decompose_pair(m0, m1)
        assert np.max(np.abs(dec.reconstruct_p0() - m0.p0)) < 1e-8
        assert np.max(np.abs(dec.reconstruct_p1() - m1.p0)) < 1e-8
        assert sum(b.block_dim for b in dec.blocks) == dim


def test_block_projectors_orthogonal_and_complete():
    rs = RandomSuite(103)
    for trial in range(50):
        suite = rs.child(trial)
        dim = int(suite.rng.integers(2, 9))
        m0, m1 = _random_projective_pair(suite, dim)
        dec = decompose_pair(m0, m1)
        total = np.zeros((dim, dim), dtype=complex)
        for i, bi in enumerate(dec.blocks):
            si = bi.subspace_projector
            total += si
            for j, bj in enumerate(dec.blocks):
                if i != j:
                    assert np.max(np.abs(si @ bj.subspace_projector)) < 1e-8
        assert np.max(np.abs(total - np.eye(dim))) < 1e-8


def test_block_outcome_orthogonality_relations():
    # P_{x|j} P_{x'|j'} = delta delta P_{x|j} for the same basis choice
    rs = RandomSuite(104)
    suite = rs.child(0)
    m0, m1 = _random_projective_pair(suite, 6)
    dec = decompose_pair(m0, m1)
    p0_blocks = [b.projector_p0() for b in dec.blocks]
    for i, pi in enumerate(p0_blocks):
        for j, pj in enumerate(p0_blocks):
            expect = pi if i == j else np.zeros_like(pi)
            assert np.max(np.abs(pi @ pj - expect)) < 1e-8


def test_block_probabilities_maximally_mixed():
    dec = decompose_pair(Z_MEAS, X_MEAS)
    probs = block_probabilities(dec, MIXED)
    assert probs == pytest.approx([1.0], abs=1e-12)
    dec2 = decompose_pair(Z_MEAS, Z_MEAS)
    probs2 = block_probabilities(dec2, MIXED)
    assert sorted(probs2) == pytest.approx([0.5, 0.5], abs=1e-12)


def test_block_probabilities_supported_state():
    dec = decompose_pair(Z_MEAS, Z_MEAS)
    probs = block_probabilities(dec, Z0)
    assert max(probs) == pytest.approx(1.0, abs=1e-12)
    assert min(probs) == pytest.approx(0.0, abs=1e-12)


def test_block_probabilities_sum_to_one_random():
    rs = RandomSuite(107)
    for trial in range(200):
        suite = rs.child(trial)
        dim = int(suite.rng.integers(2, 9))
        m0, m1 = _random_projective_pair(suite, dim)
        dec = decompose_pair(m0, m1)
        sigma = suite.density_operator(dim)
        assert abs(block_probabilities(dec, sigma).sum() - 1.0) < 1e-10


def test_epsilon_plus_identical_observables():
    sigma = RandomSuite(1).density_operator(2)
    assert epsilon_plus_direct(Z_MEAS, Z_MEAS, sigma) == pytest.approx(1.0, abs=1e-12)


def test_epsilon_plus_anticommuting():
    sigma = RandomSuite(2).density_operator(2)
    assert epsilon_plus_direct(Z_MEAS, X_MEAS, sigma) == pytest.approx(0.0, abs=1e-12)


def test_epsilon_plus_rotated_pair():
    # {Z, cos(mu) Z + sin(mu) X} = 2 cos(mu) I, so eps_+ = |cos(mu)|
    mu = math.pi / 3
    sigma = RandomSuite(3).density_operator(2)
    val = epsilon_plus_direct(Z_MEAS, rotated_meas(mu), sigma)
    assert val == pytest.approx(0.5, abs=1e-12)


def test_epsilon_plus_block_formula_examples():
    dec = decompose_pair(Z_MEAS, X_MEAS)  # single block at pi/4
    assert epsilon_plus_blocks(dec, MIXED) == pytest.approx(0.0, abs=1e-12)
    dec2 = decompose_pair(Z_MEAS, Z_MEAS)  # all beta = 0
    assert epsilon_plus_blocks(dec2, MIXED) == pytest.approx(1.0, abs=1e-12)


def test_epsilon_routes_agree_fuzz():
    rs = RandomSuite(109)
    for trial in range(300):
        suite = rs.child(trial)
        dim = int(suite.rng.integers(2, 9))
        m0, m1 = _random_projective_pair(suite, dim)
        sigma = suite.density_operator(dim)
        direct = epsilon_plus_direct(m0, m1, sigma)
        blocks = epsilon_plus_blocks(decompose_pair(m0, m1), sigma)
        assert abs(direct - blocks) < 1e-9


def test_naimark_projective_input_preserved():
    meas, iso = naimark_dilate([Z0, Z1])
    rs = RandomSuite(5)
    for _ in range(20):
        rho = rs.density_operator(2)
        lifted = iso @ rho @ dagger(iso)
        assert np.trace(meas.p0 @ lifted).real == pytest.approx(
            np.trace(Z0 @ rho).real, abs=1e-9)


def test_naimark_trivial_povm():
    meas, iso = naimark_dilate([MIXED, MIXED])
    rs = RandomSuite(6)
    for _ in range(20):
        rho = rs.density_operator(2)
        lifted = iso @ rho @ dagger(iso)
        assert np.trace(meas.p0 @ lifted).real == pytest.approx(0.5, abs=1e-9)
        assert np.trace(meas.p1 @ lifted).real == pytest.approx(0.5, abs=1e-9)


def test_naimark_noisy_effect_statistics():
    e0 = 0.7 * Z0 + 0.3 * np.eye(2) / 2
    e1 = np.eye(2) - e0
    meas, iso = naimark_dilate([e0, e1])
    rs = RandomSuite(8)
    for _ in range(20):
        rho = rs.density_operator(2)
        lifted = iso @ rho @ dagger(iso)
        for effect, proj in ((e0, meas.p0), (e1, meas.p1)):
            born = np.trace(effect @ rho).real
            assert np.trace(proj @ lifted).real == pytest.approx(born, abs=1e-9)


def test_naimark_wrong_arity():
    with pytest.raises(ArityError):
        naimark_dilate([np.eye(2) / 3, np.eye(2) / 3, np.eye(2) / 3])


def test_decompose_recovers_planted_angles():
    # Build a pair with a known block structure (planted angles plus all four
    # trivial intersection types), hide it behind a Haar rotation, and demand
    # the decomposition recover exactly that structure.
    rs = RandomSuite(113)
    for trial in range(50):
        suite = rs.child(trial)
        rng = suite.rng
        n_generic = int(rng.integers(1, 4))
        margin = 0.05
        angles = np.sort(rng.random(n_generic) * (math.pi / 2 - 2 * margin)
                         + margin)
        blocks_p = []
        blocks_q = []
        for beta in angles:
            c, s = math.cos(beta), math.sin(beta)
            blocks_p.append(np.array([[1.0, 0.0], [0.0, 0.0]]))
            blocks_q.append(np.array([[c * c, c * s], [c * s, s * s]]))
        # one of each trivial class: ran/ran, ran/ker, ker/ran, ker/ker
        for pv, qv in ((1.0, 1.0), (1.0, 0.0), (0.0, 1.0), (0.0, 0.0)):
            blocks_p.append(np.array([[pv]]))
            blocks_q.append(np.array([[qv]]))
        from scipy.linalg import block_diag
        p = block_diag(*blocks_p).astype(complex)
        q = block_diag(*blocks_q).astype(complex)
        u = suite.unitary(p.shape[0])
        p = u @ p @ dagger(u)
        q = u @ q @ dagger(u)
        dec = decompose_pair(BinaryMeasurement(p, np.eye(p.shape[0]) - p),
                             BinaryMeasurement(q, np.eye(q.shape[0]) - q))
        got = sorted(b.angle_beta for b in dec.blocks if b.block_dim == 2)
        assert len(got) == n_generic
        assert np.allclose(got, angles, atol=1e-9)
        one_dim = sorted(round(b.angle_beta, 6) for b in dec.blocks
                         if b.block_dim == 1)
        assert one_dim == sorted([0.0, round(math.pi / 2, 6)] * 2)

import numpy as np
import pytest

from su2qec.channels import (KrausChannel, MomentMatrix, apply_kraus,
                             complementary_moment_matrix, completeness_residual,
                             random_dlocal_channel, random_multiset_channel)
from su2qec.errors import DomainError, NumericalContractError
from su2qec.statevec import DensityMatrix, dicke_state

PAULI = [np.eye(2), np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]),
         np.diag([1.0, -1.0])]


def test_identity_channel():
    rho = dicke_state("1/2", 3, "1/2").density()
    out = apply_kraus(rho, KrausChannel.identity("1/2", (1,)))
    assert np.max(np.abs(out.matrix - rho.matrix)) <= 1e-15
    m = complementary_moment_matrix(dicke_state("1/2", 3, "1/2"), KrausChannel.identity("1/2", (2,)))
    assert np.allclose(m.entries, [[1]], atol=1e-15)


def test_full_depolarization():
    ch = KrausChannel("1/2", (0,), np.array([p / 2 for p in PAULI]))
    up = DensityMatrix("1/2", (0,), np.diag([0.0, 1.0]))
    assert np.allclose(apply_kraus(up, ch).matrix, np.eye(2) / 2, atol=1e-15)


def test_depolarization_on_one_site_of_two():
    ch = KrausChannel("1/2", (1,), np.array([p / 2 for p in PAULI]))
    rho = dicke_state("1/2", 2, 1).density()  # |up up>
    out = apply_kraus(rho, ch).matrix
    # site 0 stays up (index bit 0 = 1), site 1 becomes maximally mixed
    assert np.allclose(out, np.diag([0, 0.5, 0, 0.5]), atol=1e-15)


def test_random_channel_contracts():
    for seed in range(100):
        ch = random_dlocal_channel(1, (0, 2), n_kraus=1 + seed % 9, seed=seed)
        assert completeness_residual(ch.kraus_ops) <= 1e-12
        assert max(np.linalg.norm(k, 2) for k in ch.kraus_ops) <= 1 + 1e-12
    a = random_dlocal_channel("1/2", (1,), 3, seed=5)
    b = random_dlocal_channel("1/2", (1,), 3, seed=5)
    assert np.array_equal(a.kraus_ops, b.kraus_ops)
    single = random_dlocal_channel(1, (0,), 1, seed=2).kraus_ops[0]
    assert np.allclose(single.conj().T @ single, np.eye(3), atol=1e-12)


def test_random_channel_bounds():
    with pytest.raises(DomainError):
        random_dlocal_channel("1/2", (0,), 5, seed=0)
    with pytest.raises(DomainError):
        random_dlocal_channel("1/2", (), 1, seed=0)
    with pytest.raises(NumericalContractError):
        KrausChannel("1/2", (0,), np.array([np.eye(2), np.eye(2)]))


def test_multiset_channel_complete():
    ch = random_multiset_channel("1/2", [(0, 1), (3, 4)], n_kraus=4, seed=9)
    assert ch.sites == (0, 1, 3, 4)
    assert ch.n_d == 8
    assert completeness_residual(ch.kraus_ops) <= 1e-12


def test_moment_matrix_invariants():
    for seed in range(20):
        ch = random_dlocal_channel(1, (seed % 4, 4), 5, seed)
        for M in (-2, 0, 3):
            m = complementary_moment_matrix(dicke_state(1, 5, M), ch).entries
            assert abs(np.trace(m) - 1) <= 1e-10
            assert np.max(np.abs(m - m.conj().T)) <= 1e-12
            assert np.linalg.eigvalsh(m).min() >= -1e-10


def test_moment_matrix_rejects_bad_input():
    with pytest.raises(NumericalContractError):
        MomentMatrix(np.diag([0.5, 0.6]))
    with pytest.raises(NumericalContractError):
        MomentMatrix(np.array([[1.2, 0], [0, -0.2]]))


def test_orthogonal_images_give_diagonal_moments():
    # K_0 = |up><up|, K_1 = |down><down| on site 0 map a Q^z eigenstate to orthogonal vectors
    ch = KrausChannel("1/2", (0,), np.array([np.diag([0.0, 1.0]), np.diag([1.0, 0.0])]))
    m = complementary_moment_matrix(dicke_state("1/2", 4, 1), ch).entries
    assert abs(m[0, 1]) <= 1e-15
    assert np.allclose(np.diag(m).real, [0.75, 0.25], atol=1e-12)


def test_apply_kraus_linear():
    rng = np.random.default_rng(0)
    ch = random_dlocal_channel("1/2", (2,), 3, seed=1)
    a = dicke_state("1/2", 3, "1/2").density()
    b = dicke_state("1/2", 3, "-3/2").density()
    for _ in range(5):
        p = rng.uniform()
        mix = DensityMatrix("1/2", a.sites, p * a.matrix + (1 - p) * b.matrix)
        lhs = apply_kraus(mix, ch).matrix
        rhs = p * apply_kraus(a, ch).matrix + (1 - p) * apply_kraus(b, ch).matrix
        assert np.max(np.abs(lhs - rhs)) <= 1e-10


def test_apply_kraus_pinned_spectrum():
    ch = random_dlocal_channel("1/2", (0, 1), 4, seed=42)
    out = apply_kraus(dicke_state("1/2", 4, 0).density(), ch)
    assert abs(np.trace(out.matrix) - 1) <= 1e-10
    eig = np.sort(out.eigvalsh())[::-1]
    # pinned from a first run of this seed
    assert np.allclose(eig[:4], PINNED_TOP4, atol=1e-10)
    assert np.all(eig >= -1e-10)


PINNED_TOP4 = [0.475896124061, 0.271015891184, 0.159684198358, 0.093403786397]

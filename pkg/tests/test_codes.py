import math

import numpy as np
import pytest

from su2qec.angmom import HalfInt, ladder_coeff
from su2qec.channels import KrausChannel, random_dlocal_channel
from su2qec.codes import (CodeSpec, analyze_generic, cg_erased_fidelity, inaccuracy_erasure,
                          inaccuracy_generic, kl_diagonal_bound_check, kl_offdiagonal_check,
                          fidelity_from_factors, matrix_fidelity, q0)
from su2qec.errors import DomainError, NumericalContractError, PremiseError
from su2qec.statevec import spin_matrices


def test_codespec_validation():
    code = CodeSpec("1/2", 8, -2, 2, 3)
    assert code.J == HalfInt(8) and code.M_max == 2
    assert [str(m) for m in code.ms] == ["-2", "0", "2"]
    assert code.admissible(1) and not code.admissible(2)
    assert not code.multiset_admissible(1)
    assert CodeSpec.from_ms("1/2", 8, [2, -2, 0]) == code
    with pytest.raises(DomainError):
        CodeSpec("1/2", 8, -2, 4, 3)  # M_max = 6 > J = 4
    with pytest.raises(DomainError):
        CodeSpec("1/2", 8, "-1/2", 1, 2)
    with pytest.raises(DomainError):
        CodeSpec.from_ms("1/2", 8, [0, 1, 3])


def test_offdiagonal_zero_for_admissible_spacing():
    code = CodeSpec("1/2", 8, -2, 2, 3)
    for seed in range(50):
        ch = random_dlocal_channel("1/2", (seed % 8,), 4, seed)
        assert kl_offdiagonal_check(code, ch) <= 1e-12


def test_offdiagonal_nonzero_for_raising_operator():
    # K = {q+ / 1, |down><down|...}: q+ connects |J,M> and |J,M+1>
    qz, qp, qm = spin_matrices("1/2")
    k0 = qp  # |up><down|
    k1 = np.diag([0.0, 1.0])  # |up><up|
    ch = KrausChannel("1/2", (0,), np.array([k0, k1]))
    code = CodeSpec("1/2", 4, 0, 1, 2)
    resid = kl_offdiagonal_check(code, ch)
    # <2,1| K1^dag K0 |2,0> = <2,1|up up><down|_0|2,0> = (1/N) c+_0 by symmetry
    assert resid == pytest.approx(ladder_coeff(2, 0, "plus") / 4, abs=1e-12)
    assert resid > 0


def test_offdiagonal_identity_channel():
    code = CodeSpec(1, 3, -3, 1, 7)
    assert kl_offdiagonal_check(code, KrausChannel.identity(1, (1,))) == 0.0


def test_diagonal_bound_examples():
    code = CodeSpec("1/2", 6, -3, 1, 7)
    rep = kl_diagonal_bound_check(code, np.eye(2), (0,))
    assert rep.holds and max(p[2] for p in rep.pairs) <= 1e-15
    assert rep.q0 == pytest.approx(2.0)
    qz = spin_matrices("1/2")[0]
    rep = kl_diagonal_bound_check(code, qz, (0,))
    for n, m, lhs, rhs in rep.pairs:
        assert lhs == pytest.approx(abs(float(HalfInt.of(n)) - float(HalfInt.of(m))) / 6, abs=1e-12)
    assert rep.holds


def test_q0_values():
    assert q0("1/2") == pytest.approx(2.0)
    assert q0(1) == pytest.approx(2 * math.sqrt(2))


def test_matrix_fidelity_examples():
    rho = np.diag([0.3, 0.7])
    assert matrix_fidelity(rho, rho) == pytest.approx(1.0, abs=1e-12)
    assert matrix_fidelity(np.diag([0.5, 0.5]), np.diag([0.9, 0.1])) == pytest.approx(
        math.sqrt(0.45) + math.sqrt(0.05), abs=1e-12)
    rng = np.random.default_rng(4)
    a = rng.normal(size=3) + 1j * rng.normal(size=3)
    b = rng.normal(size=3) + 1j * rng.normal(size=3)
    a, b = a / np.linalg.norm(a), b / np.linalg.norm(b)
    fab = matrix_fidelity(np.outer(a, a.conj()), np.outer(b, b.conj()))
    assert fab == pytest.approx(abs(np.vdot(a, b)), abs=1e-7)
    with pytest.raises(NumericalContractError):
        matrix_fidelity(np.diag([1.5, -0.5]), rho)


def test_matrix_fidelity_symmetric():
    rng = np.random.default_rng(12)
    for _ in range(20):
        x = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        y = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        a, b = x @ x.conj().T, y @ y.conj().T
        a, b = a / np.trace(a), b / np.trace(b)
        f1, f2 = matrix_fidelity(a, b), matrix_fidelity(b, a)
        assert abs(f1 - f2) <= 1e-10 and 0 <= f1 <= 1 + 1e-10


def test_generic_inaccuracy_trivial_cases():
    one = CodeSpec("1/2", 6, 1, 1, 1)
    ch = random_dlocal_channel("1/2", (2,), 4, 0)
    assert inaccuracy_generic(one, ch) == 0.0
    code = CodeSpec("1/2", 6, -2, 4, 2)
    assert inaccuracy_generic(code, KrausChannel.identity("1/2", (0,))) == 0.0


def test_generic_inaccuracy_premise():
    code = CodeSpec("1/2", 6, -1, 1, 3)
    ch = random_dlocal_channel("1/2", (0,), 4, 0)
    with pytest.raises(PremiseError):
        analyze_generic(code, ch)


def test_generic_inaccuracy_pinned_and_decreasing():
    ch = random_dlocal_channel("1/2", (0,), 4, 2024)
    eps = [inaccuracy_generic(CodeSpec("1/2", N, -2, 4, 2), ch) for N in (6, 8, 10, 12, 14)]
    # pinned from a first run with this seed
    assert eps[2] == pytest.approx(PINNED_EPS_N10, abs=1e-10)
    drops = sum(b > a for a, b in zip(eps, eps[1:]))
    assert drops <= 1


def test_generic_report_contents():
    code = CodeSpec(1, 5, -3, 3, 3)
    ch = random_dlocal_channel(1, (1,), 6, 8)
    rep = analyze_generic(code, ch)
    assert len(rep.fidelities) == 3 and rep.fidelities[0] == pytest.approx(1.0)
    assert 0 <= rep.epsilon_hat <= 1
    assert rep.q0 == pytest.approx(2 * math.sqrt(2))
    for n, m, diff, bound in rep.diag_checks:
        assert diff <= bound + 1e-10
    d = rep.as_dict()
    assert set(d) >= {"code", "channel_meta", "offdiag_residual", "diag_checks", "epsilon_hat",
                      "fidelities"}


def test_erasure_example():
    rep = inaccuracy_erasure(CodeSpec.from_ms("1/2", 4, [-2, 2]), [0])
    assert rep.epsilon_hat == pytest.approx(1 / math.sqrt(2), abs=1e-12)
    assert rep.explicit_cg_gap is not None and rep.explicit_cg_gap <= 1e-8


def test_erasure_degenerate_code():
    rep = inaccuracy_erasure(CodeSpec("1/2", 6, 0, 1, 1), [0, 1])
    assert rep.epsilon_hat == 0.0


def test_erasure_premise_and_reference():
    with pytest.raises(PremiseError):
        inaccuracy_erasure(CodeSpec("1/2", 8, -1, 2, 2), [0, 1])
    rep = inaccuracy_erasure(CodeSpec("1/2", 7, "-5/2", 5, 2), [3])
    assert rep.reference_substituted and rep.reference_M == HalfInt(1)


@pytest.mark.parametrize("s,N", [("1/2", 4), ("1/2", 7), ("1/2", 8), (1, 4), (1, 6)])
def test_erasure_routes_agree(s, N):
    J = HalfInt.of(s) * N
    for d in (1, 2):
        for tM in range(J.twice % 2 or 2, J.twice + 1, 2):
            code = CodeSpec(s, N, HalfInt(-tM), tM, 2)
            if not code.admissible(d):
                continue
            sites = tuple(range(N - d, N))
            cg = inaccuracy_erasure(code, sites, method="cg")
            ex = inaccuracy_erasure(code, sites, method="explicit")
            assert max(abs(a - b) for a, b in zip(cg.fidelities, ex.fidelities)) <= 1e-8


def test_erasure_large_N_runs_closed_form():
    rep = inaccuracy_erasure(CodeSpec("1/2", 100_000, -20, 20, 3), range(5))
    assert 0 < rep.epsilon_hat < 1e-2
    assert rep.explicit_cg_gap is None


def test_cg_erased_fidelity_trivial():
    assert cg_erased_fidelity(5, 3, 3, 2) == pytest.approx(1.0, abs=1e-14)
    assert cg_erased_fidelity(5, 3, 0, 0) == 1.0


PINNED_EPS_N10 = 0.2762205852517003


def test_fidelity_from_factors_matches_matrix_fidelity():
    rng = np.random.default_rng(7)
    for rows, rank in [(4, 2), (6, 6), (9, 3)]:
        X = rng.normal(size=(rows, rank)) + 1j * rng.normal(size=(rows, rank))
        Y = rng.normal(size=(rows, 5)) + 1j * rng.normal(size=(rows, 5))
        X /= np.linalg.norm(X)
        Y /= np.linalg.norm(Y)
        ref = matrix_fidelity(X @ X.conj().T, Y @ Y.conj().T)
        assert fidelity_from_factors(X, Y) == pytest.approx(ref, abs=1e-7)
    # orthogonal supports
    e = np.eye(3)
    assert fidelity_from_factors(e[:, :1], e[:, 1:]) == pytest.approx(0.0, abs=1e-15)

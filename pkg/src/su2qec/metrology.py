"""Quantum Fisher information of erased probe states and phase estimators.

The probe is (|J,M> + |J,-M>)/sqrt(2) with J = sN, evolved by exp(-i theta Q^z).
Erasing d sites leaves j1 = sd. Writing a_m = <j1 m; j2 M-m | J M> and
b_m = <j1 m; j2 -M-m | J -M>, the reduced state splits into 2x2 blocks
(one per m), and for M > j1 everything follows from a_m and b_m.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lapack

from .angmom import HalfInt, log_cg_squared
from .codes import CodeSpec, cg_erased_fidelity, inaccuracy_erasure
from .errors import DomainError, NumericalContractError
from .statevec import _site_matrix, _total_m, dicke_state, evolve_phase, probe_state

SUPPORT_CUTOFF = 1e-12
DENSE_EIGH_LIMIT = 256
RNG_ALGORITHM = "numpy.PCG64"


# ---------------------------------------------------------------------------
# SLD formula


def _support(rho: np.ndarray, cutoff: float) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues above ``cutoff`` and their eigenvectors."""
    n = rho.shape[0]
    if n <= DENSE_EIGH_LIMIT:
        w, u = np.linalg.eigh(rho)
    else:
        # rank-revealing Cholesky isolates the range; eigh then runs on r x r only
        c, piv, rank, info = lapack.zpstrf(rho, lower=1, tol=cutoff)
        if info < 0:
            raise NumericalContractError("pivoted Cholesky failed")
        low = np.tril(c)[:, :rank]
        basis = np.zeros((n, rank), dtype=complex)
        basis[piv - 1] = low
        q, _ = np.linalg.qr(basis)
        w, v = np.linalg.eigh(q.conj().T @ rho @ q)
        u = q @ v
    keep = w > cutoff
    return w[keep], u[:, keep]


def qfi_sld(rho, drho, cutoff: float = SUPPORT_CUTOFF) -> float:
    """Quantum Fisher information sum 2|<m|drho|m'>|^2 / (lambda_m + lambda_m').

    Pairs with one index in the kernel are included; their total is obtained
    from ||drho|m>||^2 so kernel eigenvectors are never needed.
    """
    rho = np.asarray(getattr(rho, "matrix", rho), dtype=complex)
    drho = np.asarray(drho, dtype=complex)
    if rho.shape != drho.shape or rho.shape[0] != rho.shape[1]:
        raise DomainError("rho and drho must be square matrices of equal size")
    scale = max(1.0, float(np.max(np.abs(drho)))) if drho.size else 1.0
    if np.max(np.abs(drho - drho.conj().T)) > 1e-10 * scale:
        raise DomainError("drho is not Hermitian")
    if np.max(np.abs(rho - rho.conj().T)) > 1e-10:
        raise DomainError("rho is not Hermitian")
    if abs(np.trace(drho)) > 1e-10 * scale:
        raise DomainError("drho is not traceless")
    lam, u = _support(0.5 * (rho + rho.conj().T), cutoff)
    if lam.size == 0:
        return 0.0
    du = drho @ u
    e = u.conj().T @ du
    e2 = np.abs(e) ** 2
    inner = float(np.sum(2 * e2 / (lam[:, None] + lam[None, :])))
    col = np.sum(np.abs(du) ** 2, axis=0)
    kernel_part = np.clip(col - e2.sum(axis=1), 0, None)
    return inner + float(np.sum(4 * kernel_part / lam))


def erased_probe_blocks(s, N: int, M, d: int, theta: float = 0.0):
    """(rho, drho) of the probe after erasing the last d sites, on its nonzero rows.

    Q^z is diagonal, so rows of the reduced state that vanish identically
    also vanish in its derivative and can be dropped without changing the QFI.
    """
    psi = evolve_phase(probe_state(s, N, M), theta)
    keep = tuple(range(N - d))
    x = _site_matrix(psi.amplitudes, keep, N, psi.D) if keep else psi.amplitudes.reshape(1, -1)
    rows = np.flatnonzero(np.any(x != 0, axis=1))
    x = x[rows]
    m = (_total_m(psi.s.twice, len(keep)) if keep else np.zeros(1))[rows]
    rho = x @ x.conj().T
    drho = -1j * (m[:, None] - m[None, :]) * rho
    return rho, drho


def explicit_erased_probe_qfi(s, N: int, M, d: int, theta: float = 0.3) -> float:
    """QFI of the erased probe from explicit vectors and the SLD formula."""
    if not 0 <= d <= N:
        raise DomainError("need 0 <= d <= N")
    rho, drho = erased_probe_blocks(s, N, M, d, theta)
    return qfi_sld(rho, drho)


# ---------------------------------------------------------------------------
# closed forms


@dataclass(frozen=True)
class QFIReport:
    qfi: float
    qfi_ideal: float
    loss_ratio: float
    support: tuple[HalfInt, ...]
    lambda_m: tuple[float, ...]
    a_m: tuple[float, ...]
    b_m: tuple[float, ...]
    A: float
    sld_matrix: np.ndarray | None = field(default=None, repr=False)

    def as_dict(self) -> dict:
        return {"qfi": self.qfi, "qfi_ideal": self.qfi_ideal, "loss_ratio": self.loss_ratio,
                "support": [str(m) for m in self.support], "lambda_m": list(self.lambda_m),
                "a_m": list(self.a_m), "b_m": list(self.b_m), "A": self.A}


def _erasure_params(s, N: int, M, d: int) -> tuple[int, int, int]:
    s, M = HalfInt.of(s), HalfInt.of(M)
    if isinstance(N, bool) or int(N) != N or N < 1:
        raise DomainError("N must be a positive integer")
    if isinstance(d, bool) or int(d) != d or not 0 <= d <= N:
        raise DomainError("need an integer 0 <= d <= N")
    tJ, tM, tj1 = s.twice * int(N), M.twice, s.twice * int(d)
    if not 0 < tM <= tJ or (tJ - tM) % 2:
        raise DomainError("need 0 < M <= J with J - M integral")
    return tJ, tM, tj1


def qfi_erased_probe(s, N: int, M, d: int) -> QFIReport:
    """Closed-form QFI of the probe after erasing d sites (requires M > sd)."""
    tJ, tM, tj1 = _erasure_params(s, N, M, d)
    ideal = float(tM * tM)  # 4 M^2
    if tj1 == 0:
        return QFIReport(ideal, ideal, 0.0, (HalfInt(0),), (1.0,), (1.0,), (1.0,), 1.0)
    if tM <= tj1:
        raise DomainError(f"closed form needs M > j1 = {HalfInt(tj1)}")
    support, lam, avals, bvals = [], [], [], []
    keep_terms, loss_terms, overlap_terms = [], [], []
    for tm in range(-tj1, tj1 + 1, 2):
        la = log_cg_squared(tJ, tM, tj1, tm)
        lb = log_cg_squared(tJ, -tM, tj1, tm)
        a2 = math.exp(la) if la > -math.inf else 0.0
        b2 = math.exp(lb) if lb > -math.inf else 0.0
        if a2 + b2 <= 0.0:
            continue
        support.append(HalfInt(tm))
        lam.append(0.5 * (a2 + b2))
        avals.append(math.sqrt(a2))
        bvals.append(math.sqrt(b2))
        if a2 > 0 and b2 > 0:
            hi, lo = max(la, lb), min(la, lb)
            log_sum = hi + math.log1p(math.exp(lo - hi))
            keep_terms.append(2.0 * math.exp(la + lb - log_sum))
            overlap_terms.append(math.exp(0.5 * (la + lb)))
            diff = math.exp(hi) * -math.expm1(lo - hi)  # |a^2 - b^2| without cancellation
            loss_terms.append(diff * diff / (2.0 * (a2 + b2)))
        else:
            loss_terms.append(0.5 * (a2 + b2))
    keep = math.fsum(keep_terms)
    loss = min(1.0, max(0.0, math.fsum(loss_terms)))
    return QFIReport(keep * ideal, ideal, loss, tuple(support), tuple(lam), tuple(avals),
                     tuple(bvals), math.fsum(overlap_terms))


def fidelity_erased_codewords(s, N: int, M, d: int) -> float:
    """f between the d-site reduced states of |J,M> and |J,0>, J = sN."""
    s, M = HalfInt.of(s), HalfInt.of(M)
    tJ = s.twice * int(N)
    if tJ % 2:
        raise DomainError("|J, 0> needs integral J = sN")
    if abs(M.twice) > tJ or (tJ - M.twice) % 2:
        raise DomainError("M out of range")
    if not 0 <= d <= N:
        raise DomainError("need 0 <= d <= N")
    return cg_erased_fidelity(HalfInt(tJ), M, HalfInt(0), HalfInt(s.twice * d))


def fidelity_expansion(J, M, j1) -> float:
    """The J^-2 expansion of the erased-codeword fidelity with the reference coefficients.

    Diagnostic only: the polynomial does not match the exact closed form for
    j1 >= 1 (see :func:`fidelity_leading_order`).
    """
    J, M, j1 = (float(HalfInt.of(x)) for x in (J, M, j1))
    poly = (0.25 * j1 * M**2 + 7 / 8 * j1**2 - 2 * j1**2 * M**2 - 4 * j1**3 * M
            - 0.5 * j1**3 - 3 / 8 * j1)
    return 1.0 - poly / J**2


# interface name
lemma3_asymptotic = fidelity_expansion


def fidelity_leading_order(J, M, j1) -> float:
    """1 - j1 M^2 / (4 J^2), the J^-2 term of the exact fidelity."""
    J, M, j1 = (float(HalfInt.of(x)) for x in (J, M, j1))
    return 1.0 - j1 * M**2 / (4 * J**2)


def fidelity_deficit_coefficient(d: int, M) -> float:
    """d^2/8 + [d(1 + M^2 + 2M) + 2d^3 + d^2(2M - 1)]/4 (spin-1/2 expansion coefficient)."""
    M = float(HalfInt.of(M))
    return d**2 / 8 + (d * (1 + M**2 + 2 * M) + 2 * d**3 + d**2 * (2 * M - 1)) / 4


# ---------------------------------------------------------------------------
# loss bound


@dataclass(frozen=True)
class LossBoundReport:
    delta_F_ratio: float
    epsilon_hat: float
    four_epsilon: float
    holds: bool

    def as_dict(self) -> dict:
        return {"delta_F_ratio": self.delta_F_ratio, "epsilon_hat": self.epsilon_hat,
                "four_epsilon": self.four_epsilon, "holds": self.holds}


def verify_qfi_loss_bound(s, N: int, M, d: int) -> LossBoundReport:
    """Check (4M^2 - F_erased)/(4M^2) <= 4 eps for the code {|J,-M>, |J,M>}."""
    rep = qfi_erased_probe(s, N, M, d)
    M = HalfInt.of(M)
    code = CodeSpec(s, N, -M, M.twice, 2)
    eps = inaccuracy_erasure(code, tuple(range(d)), method="cg").epsilon_hat
    return LossBoundReport(rep.loss_ratio, eps, 4 * eps, rep.loss_ratio <= 4 * eps + 1e-8)


# ---------------------------------------------------------------------------
# estimators

SCHEMES = ("local_D", "global_Dprime", "local_Dbar")


@dataclass(frozen=True)
class EstimatorReport:
    scheme: str
    theta: float
    nu: int
    expectation: float
    variance: float
    delta_theta: float
    amplitude: float
    d_used: int
    extra_site_erased: bool
    mc_delta_theta: float | None = None
    mc_repetitions: int = 0
    seed: int | None = None
    rng: str | None = None

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def estimator_amplitude(scheme: str, s, N: int, M, d: int) -> tuple[float, int, bool]:
    """Contrast of the measured signal, erased-site count used, extra-erasure flag."""
    s = HalfInt.of(s)
    if scheme == "local_D":
        if d != 0:
            raise DomainError("local_D applies to the unerased probe (d = 0)")
        _erasure_params(s, N, M, 0)
        return 1.0, 0, False
    if scheme == "global_Dprime":
        return qfi_erased_probe(s, N, M, d).A, d, False
    if scheme == "local_Dbar":
        extra = (s.twice * d) % 2 == 1
        d_used = d + 1 if extra else d
        tJ, tM, tj1 = _erasure_params(s, N, M, d_used)
        if tM <= tj1:
            raise DomainError(f"needs M > j1 = {HalfInt(tj1)}")
        la = log_cg_squared(tJ, tM, tj1, 0)
        lb = log_cg_squared(tJ, -tM, tj1, 0)
        amp = math.exp(0.5 * (la + lb)) if la > -math.inf and lb > -math.inf else 0.0
        return amp, d_used, extra
    raise DomainError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")


def measurement_estimate(scheme: str, s, N: int, M, d: int, theta: float, nu: int,
                         seed: int | None = None, repetitions: int = 400) -> EstimatorReport:
    """Signal amp*cos(2M theta) of a +-1 observable, with propagated-error delta theta.

    With a seed, ``repetitions`` independent runs of ``nu`` binary outcomes
    are also simulated and the spread of the arccos estimates is reported.
    """
    if isinstance(nu, bool) or int(nu) != nu or nu < 1:
        raise DomainError("nu must be a positive integer")
    amp, d_used, extra = estimator_amplitude(scheme, s, N, M, d)
    twoM = HalfInt.of(M).twice  # 2M
    sin = math.sin(twoM * theta)
    if abs(sin) <= 1e-8:
        raise DomainError("sin(2 M theta) = 0: the estimator is singular at this theta")
    if amp <= 0.0:
        raise DomainError("zero signal contrast")
    cos = math.cos(twoM * theta)
    expectation = amp * cos
    variance = max(0.0, 1.0 - expectation**2)
    if scheme == "local_D":
        # variance sin^2 cancels against the slope exactly
        delta = 1.0 / (twoM * math.sqrt(nu))
    else:
        delta = math.sqrt(variance) / (math.sqrt(nu) * twoM * amp * abs(sin))
    mc = None
    if seed is not None:
        rng = np.random.default_rng(seed)
        p_plus = 0.5 * (1.0 + expectation)
        counts = rng.binomial(int(nu), p_plus, size=repetitions)
        mean = 2.0 * counts / nu - 1.0
        est = np.arccos(np.clip(mean / amp, -1.0, 1.0)) / twoM
        mc = float(np.std(est, ddof=1))
    return EstimatorReport(scheme, float(theta), int(nu), expectation, variance, delta, amp,
                           d_used, extra, mc, repetitions if seed is not None else 0, seed,
                           RNG_ALGORITHM if seed is not None else None)


def explicit_expectation(scheme: str, s, N: int, M, d: int, theta: float) -> float:
    """<observable> from explicit vectors, for cross-checking the analytic signal."""
    s, M = HalfInt.of(s), HalfInt.of(M)
    psi = evolve_phase(probe_state(s, N, M), theta)
    D = psi.D
    if scheme == "global_Dprime":
        n_keep = N - d
        x = _site_matrix(psi.amplitudes, tuple(range(n_keep)), N, D)
        rho = x @ x.conj().T
        tj2 = s.twice * n_keep
        total = 0.0
        for tm in range(-s.twice * d, s.twice * d + 1, 2):
            up, down = M.twice - tm, -M.twice - tm
            if abs(up) > tj2 or abs(down) > tj2:
                continue
            u = dicke_state(s, n_keep, HalfInt(up)).amplitudes
            v = dicke_state(s, n_keep, HalfInt(down)).amplitudes
            total += 2 * float(np.real(np.vdot(u, rho @ v)))
        return total
    if scheme in ("local_D", "local_Dbar"):
        _, d_used, _ = estimator_amplitude(scheme, s, N, M, d)
        n_keep = N - d_used
        flip = np.eye(D)[::-1]  # |m> -> |-m>
        x = _site_matrix(psi.amplitudes, tuple(range(n_keep)), N, D)
        y = x
        for site in range(n_keep):
            t = y.reshape(D ** (n_keep - 1 - site), D, -1)
            y = np.einsum("ab,xbz->xaz", flip, t).reshape(x.shape)
        return float(np.real(np.vdot(x, y)))
    raise DomainError(f"unknown scheme {scheme!r}")

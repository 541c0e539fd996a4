"""Codes spanned by |J, M> states with evenly spaced M, and their correctability checks."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .angmom import HalfInt, ladder_inverse_sum, log_cg_squared
from .channels import KrausChannel, MomentMatrix, complementary_moment_matrix, kraus_images
from .errors import DomainError, NumericalContractError, PremiseError
from .statevec import (MAX_DENSITY_DIM, StateVector, _site_matrix, check_density,
                       dicke_state, spin_matrices)

OFFDIAG_PREMISE_TOL = 1e-8
EXPLICIT_DIM_LIMIT = 1 << 16
AGREEMENT_TOL = 1e-8


@dataclass(frozen=True)
class CodeSpec:
    """span{|J, M_min>, |J, M_min + delta>, ..., |J, M_max>} on N spin-s sites."""

    s: HalfInt
    N: int
    M_min: HalfInt
    delta: int
    count: int
    J: HalfInt | None = None

    def __post_init__(self):
        object.__setattr__(self, "s", HalfInt.of(self.s))
        object.__setattr__(self, "M_min", HalfInt.of(self.M_min))
        J = HalfInt(self.s.twice * self.N) if self.J is None else HalfInt.of(self.J)
        object.__setattr__(self, "J", J)
        if self.N < 1:
            raise DomainError("N must be positive")
        if J.twice > self.s.twice * self.N or J.twice < 0:
            raise DomainError("J must lie in 0..sN")
        if isinstance(self.delta, bool) or int(self.delta) != self.delta or self.delta < 1:
            raise DomainError("spacing delta must be a positive integer")
        if isinstance(self.count, bool) or int(self.count) != self.count or self.count < 1:
            raise DomainError("codeword count must be a positive integer")
        if (J.twice - self.M_min.twice) % 2:
            raise DomainError("J - M_min must be an integer")
        if self.M_min.twice < -J.twice or self.M_max.twice > J.twice:
            raise DomainError(f"codeword range [{self.M_min}, {self.M_max}] exceeds [-J, J]")

    @classmethod
    def from_ms(cls, s, N: int, ms: Sequence) -> "CodeSpec":
        """Code from an explicit, evenly spaced list of M values."""
        tw = sorted(HalfInt.of(m).twice for m in ms)
        if not tw:
            raise DomainError("empty codeword list")
        gaps = {b - a for a, b in zip(tw, tw[1:])}
        if len(gaps) > 1 or 0 in gaps:
            raise DomainError("codeword M values must be distinct and evenly spaced")
        delta = gaps.pop() // 2 if gaps else 1
        return cls(s, N, HalfInt(tw[0]), delta, len(tw))

    @property
    def M_max(self) -> HalfInt:
        return HalfInt(self.M_min.twice + 2 * self.delta * (self.count - 1))

    @property
    def k(self) -> float:
        """Logical qubits, log2(count)."""
        return math.log2(self.count)

    @property
    def ms(self) -> list[HalfInt]:
        return [HalfInt(self.M_min.twice + 2 * self.delta * i) for i in range(self.count)]

    def admissible(self, d: int) -> bool:
        """delta >= 2sd + 1: off-diagonal terms vanish for one d-site set."""
        return self.count == 1 or 2 * self.delta >= self.s.twice * 2 * d + 2

    def multiset_admissible(self, d: int) -> bool:
        """delta >= 4sd + 1: the same for Kraus operators on different d-site sets."""
        return self.count == 1 or 2 * self.delta >= self.s.twice * 4 * d + 2

    def codewords(self) -> list[StateVector]:
        if self.J.twice != self.s.twice * self.N:
            raise DomainError("explicit codewords exist only for J = sN")
        return [dicke_state(self.s, self.N, m) for m in self.ms]

    def as_dict(self) -> dict:
        return {"s": str(self.s), "N": self.N, "J": str(self.J), "M_min": str(self.M_min),
                "delta": self.delta, "count": self.count, "M_max": str(self.M_max)}


# ---------------------------------------------------------------------------
# Knill-Laflamme style checks


def kl_offdiagonal_check(code: CodeSpec, ch: KrausChannel) -> float:
    """max |<J,n| K_i^dag K_j |J,m>| over codeword pairs n != m and all (i, j)."""
    if ch.s != code.s:
        raise DomainError("channel and code have different local spin")
    images = [kraus_images(psi, ch).reshape(ch.n_d, -1) for psi in code.codewords()]
    worst = 0.0
    for a in range(len(images)):
        for b in range(a + 1, len(images)):
            cross = images[a].conj() @ images[b].T
            worst = max(worst, float(np.max(np.abs(cross))))
    return worst


def q0(s) -> float:
    """2 ||q^+||_op for one spin-s site."""
    return 2.0 * float(np.linalg.norm(spin_matrices(s)[1], 2))


@dataclass(frozen=True)
class DiagonalCheck:
    pairs: tuple[tuple[str, str, float, float], ...]  # (n, m, lhs, rhs)
    holds: bool
    q0: float

    def as_dict(self) -> dict:
        return {"holds": self.holds, "q0": self.q0,
                "pairs": [{"n": n, "m": m, "lhs": lhs, "rhs": rhs}
                          for n, m, lhs, rhs in self.pairs]}


def local_expectations(code: CodeSpec, F: np.ndarray, sites: Sequence[int]) -> list[complex]:
    """<J,M| F |J,M> for each codeword, F acting on ``sites``."""
    out = []
    for psi in code.codewords():
        x = _site_matrix(psi.amplitudes, tuple(sites), psi.N, psi.D)
        out.append(complex(np.vdot(x, F @ x)))
    return out


def kl_diagonal_bound_check(code: CodeSpec, F: np.ndarray, sites: Sequence[int],
                            expectations: Sequence[complex] | None = None) -> DiagonalCheck:
    """Compare |<n|F|n> - <m|F|m>| with d q0 ||F|| C(n, m) for every codeword pair."""
    sites = tuple(int(x) for x in sites)
    F = np.asarray(F, dtype=complex)
    D = code.s.twice + 1
    if F.shape != (D ** len(sites),) * 2:
        raise DomainError("operator shape does not match its site set")
    vals = local_expectations(code, F, sites) if expectations is None else list(expectations)
    norm = float(np.linalg.norm(F, 2))
    qq = q0(code.s)
    ms = code.ms
    pairs = []
    holds = True
    for a in range(len(ms)):
        for b in range(a + 1, len(ms)):
            lhs = abs(vals[a] - vals[b])
            rhs = len(sites) * qq * norm * ladder_inverse_sum(code.J, ms[a], ms[b])
            holds &= lhs <= rhs + 1e-10
            pairs.append((str(ms[a]), str(ms[b]), lhs, rhs))
    return DiagonalCheck(tuple(pairs), bool(holds), qq)


# ---------------------------------------------------------------------------
# fidelities and inaccuracy estimates


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(m)
    return (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T


def matrix_fidelity(A, B) -> float:
    """||sqrt(B) sqrt(A)||_1 for density matrices (arrays or DensityMatrix)."""
    a = np.asarray(getattr(A, "matrix", getattr(A, "entries", A)), dtype=complex)
    b = np.asarray(getattr(B, "matrix", getattr(B, "entries", B)), dtype=complex)
    if a.shape != b.shape:
        raise DomainError(f"shape mismatch {a.shape} vs {b.shape}")
    for m in (a, b):
        check_density(m, herm_tol=1e-10, trace_tol=1e-10, psd_tol=1e-10)
    sv = np.linalg.svd(_psd_sqrt(b) @ _psd_sqrt(a), compute_uv=False)
    return float(math.fsum(sv))


def fidelity_from_factors(X: np.ndarray, Y: np.ndarray) -> float:
    """f(X X^dag, Y Y^dag) = ||X^dag Y||_1, without square roots of eigenvalues.

    Near-singular states lose about half their digits when sqrt(rho) is formed
    from an eigendecomposition; working with the factors avoids that.
    """
    X = np.asarray(X, dtype=complex)
    Y = np.asarray(Y, dtype=complex)
    if X.shape[0] != Y.shape[0]:
        raise DomainError("factors must have the same number of rows")
    # compress X to its column space first so the SVD below stays small
    u, sv, _ = np.linalg.svd(X, full_matrices=False)
    left = u * sv
    return float(math.fsum(np.linalg.svd(left.conj().T @ Y, compute_uv=False)))


def purified_distance(fidelity: float) -> float:
    return math.sqrt(max(0.0, 1.0 - min(fidelity, 1.0) ** 2))


@dataclass(frozen=True, eq=False)
class KLReport:
    code: CodeSpec
    channel_meta: dict
    lambda0: MomentMatrix = field(repr=False)
    sigmas: tuple[MomentMatrix, ...] = field(repr=False)
    offdiag_residual: float
    diag_checks: tuple[tuple[str, str, float, float], ...]
    fidelities: tuple[float, ...]
    epsilon_hat: float
    q0: float

    def as_dict(self) -> dict:
        return {
            "code": self.code.as_dict(),
            "channel_meta": self.channel_meta,
            "offdiag_residual": self.offdiag_residual,
            "diag_checks": [{"n": n, "m": m, "max_diff": lhs, "bound": rhs}
                            for n, m, lhs, rhs in self.diag_checks],
            "epsilon_hat": self.epsilon_hat,
            "fidelities": list(self.fidelities),
            "q0": self.q0,
        }


def analyze_generic(code: CodeSpec, ch: KrausChannel) -> KLReport:
    """Moment matrices, diagonal deviations and the inaccuracy estimate for a d-local channel.

    lambda0 is the moment matrix of the M_min codeword; the estimate is
    sqrt(1 - F^2) with F the smallest fidelity between a codeword's moment
    matrix and lambda0.
    """
    resid = kl_offdiagonal_check(code, ch)
    if resid > OFFDIAG_PREMISE_TOL:
        raise PremiseError(
            f"off-diagonal residual {resid:.3e} is not zero; spacing {code.delta} is too small "
            f"for d = {ch.d}")
    words = code.codewords()
    sigmas = tuple(complementary_moment_matrix(psi, ch) for psi in words)
    lam0 = sigmas[0]
    # Sigma = B B^dag with rows of B the conjugated Kraus images K_i X
    factors = [kraus_images(psi, ch).reshape(ch.n_d, -1).conj() for psi in words]
    fids = tuple(min(1.0, fidelity_from_factors(f, factors[0])) for f in factors)
    qq = q0(code.s)
    prod_norm = max(float(np.linalg.norm(ki.conj().T @ kj, 2))
                    for ki in ch.kraus_ops for kj in ch.kraus_ops)
    ms = code.ms
    diag = []
    for a in range(len(ms)):
        for b in range(a + 1, len(ms)):
            diff = float(np.max(np.abs(sigmas[a].entries - sigmas[b].entries)))
            bound = ch.d * qq * prod_norm * ladder_inverse_sum(code.J, ms[a], ms[b])
            diag.append((str(ms[a]), str(ms[b]), diff, bound))
    return KLReport(code, ch.metadata(), lam0, sigmas, resid, tuple(diag), fids,
                    purified_distance(min(fids)), qq)


def inaccuracy_generic(code: CodeSpec, ch: KrausChannel) -> float:
    return analyze_generic(code, ch).epsilon_hat


@dataclass(frozen=True)
class ErasureReport:
    code: CodeSpec
    sites: tuple[int, ...]
    reference_M: HalfInt
    reference_substituted: bool
    fidelities: tuple[float, ...]
    epsilon_hat: float
    method: str
    explicit_cg_gap: float | None = None

    def as_dict(self) -> dict:
        return {
            "code": self.code.as_dict(),
            "sites": list(self.sites),
            "reference_M": str(self.reference_M),
            "reference_substituted": self.reference_substituted,
            "fidelities": list(self.fidelities),
            "epsilon_hat": self.epsilon_hat,
            "method": self.method,
            "explicit_cg_gap": self.explicit_cg_gap,
        }


def erasure_reference(J) -> tuple[HalfInt, bool]:
    """M = 0 when it exists, otherwise M = 1/2 (flagged as a substitution)."""
    J = HalfInt.of(J)
    return (HalfInt(0), False) if J.is_integer else (HalfInt(1), True)


def cg_erased_fidelity(J, M, M_ref, j1) -> float:
    """f between the j1-site reduced states of |J,M> and |J,M_ref> (J = s * N).

    Both are diagonal in the symmetric |j1, m1> basis with weights given by
    squared stretched Clebsch-Gordan coefficients, so f = sum sqrt(w w_ref).
    """
    tJ, tM, tR, tj1 = (HalfInt.of(x).twice for x in (J, M, M_ref, j1))
    terms = []
    for tm1 in range(-tj1, tj1 + 1, 2):
        la = log_cg_squared(tJ, tM, tj1, tm1)
        lb = log_cg_squared(tJ, tR, tj1, tm1)
        if la > -math.inf and lb > -math.inf:
            terms.append(math.exp(0.5 * (la + lb)))
    return min(1.0, math.fsum(terms))


def _explicit_erased_fidelities(code: CodeSpec, sites: tuple[int, ...], ref: HalfInt) -> list[float]:
    D = code.s.twice + 1
    if D ** len(sites) > MAX_DENSITY_DIM:
        raise DomainError("erased subsystem exceeds the density-matrix guard")
    ref_psi = dicke_state(code.s, code.N, ref)
    y = _site_matrix(ref_psi.amplitudes, sites, code.N, D)
    out = []
    for psi in code.codewords():
        x = _site_matrix(psi.amplitudes, sites, code.N, D)
        out.append(min(1.0, fidelity_from_factors(x, y)))
    return out


def _explicit_feasible(code: CodeSpec) -> bool:
    return code.N * math.log2(code.s.twice + 1) <= math.log2(EXPLICIT_DIM_LIMIT)


def inaccuracy_erasure(code: CodeSpec, sites: Sequence[int], method: str = "auto") -> ErasureReport:
    """Inaccuracy estimate against heralded loss of ``sites``.

    ``method`` is ``"cg"`` (closed-form weights, any N), ``"explicit"`` (partial
    traces of explicit vectors) or ``"auto"`` (CG, plus the explicit route and an
    agreement check when the register is small).
    """
    sites = tuple(int(x) for x in sites)
    if len(set(sites)) != len(sites) or any(not 0 <= x < code.N for x in sites):
        raise DomainError(f"invalid erased sites {sites} for N = {code.N}")
    if code.J.twice != code.s.twice * code.N:
        raise DomainError("erasure estimate requires J = sN")
    d = len(sites)
    if not code.admissible(d):
        raise PremiseError(f"spacing {code.delta} < 2sd+1 for d = {d}")
    ref, substituted = erasure_reference(code.J)
    j1 = HalfInt(code.s.twice * d)
    gap = None
    if method in ("cg", "auto"):
        fids = [cg_erased_fidelity(code.J, m, ref, j1) for m in code.ms]
        if method == "auto" and _explicit_feasible(code):
            explicit = _explicit_erased_fidelities(code, sites, ref)
            gap = max(abs(x - y) for x, y in zip(fids, explicit))
            if gap > AGREEMENT_TOL:
                raise NumericalContractError(
                    f"closed-form and explicit erased fidelities differ by {gap:.2e}")
    elif method == "explicit":
        fids = _explicit_erased_fidelities(code, sites, ref)
    else:
        raise DomainError(f"unknown method {method!r}")
    fids = tuple(fids)
    return ErasureReport(code, sites, ref, substituted, fids, purified_distance(min(fids)),
                         method, gap)

"""Dense states of N spin-s qudits.

Basis convention: site 0 varies fastest in the flat index, and local index k
carries magnetic number m = -s + k (index 0 is m = -s, index 2s is m = +s).
Operators acting on an ordered site list use the same rule: the first listed
site is the fastest-varying digit of the operator's row/column index.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .angmom import HalfInt, ladder_coeff
from .errors import DimensionGuardError, DomainError, NumericalContractError

MAX_VECTOR_DIM = 1 << 24
MAX_DENSITY_DIM = 1 << 12

NORM_TOL = 1e-12
EIGEN_TOL = 1e-8


@dataclass(frozen=True)
class QuditRegister:
    s: HalfInt
    N: int

    def __post_init__(self):
        object.__setattr__(self, "s", HalfInt.of(self.s))
        if self.s.twice <= 0:
            raise DomainError("local spin s must be positive")
        if isinstance(self.N, bool) or int(self.N) != self.N or self.N < 1:
            raise DomainError("N must be a positive integer")
        object.__setattr__(self, "N", int(self.N))
        if self.local_dim ** self.N > MAX_VECTOR_DIM:
            raise DimensionGuardError(
                f"register dim {self.local_dim}^{self.N} exceeds guard {MAX_VECTOR_DIM}")

    @property
    def local_dim(self) -> int:
        return self.s.twice + 1

    @property
    def dim(self) -> int:
        return self.local_dim ** self.N

    @property
    def J_max(self) -> HalfInt:
        return HalfInt(self.s.twice * self.N)

    def total_m(self) -> np.ndarray:
        """Q^z eigenvalue of every computational basis state (read-only)."""
        return _total_m(self.s.twice, self.N)


@lru_cache(maxsize=32)
def _total_m(ts: int, n_sites: int) -> np.ndarray:
    local = np.arange(ts + 1) - ts / 2
    tot = np.zeros(1)
    for _ in range(n_sites):
        tot = (local[:, None] + tot[None, :]).ravel()
    tot.setflags(write=False)
    return tot


def spin_matrices(s) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Single-site (q^z, q^+, q^-) in the local-index basis."""
    ts = HalfInt.of(s).twice
    m = np.arange(ts + 1) - ts / 2
    qz = np.diag(m).astype(complex)
    qp = np.zeros((ts + 1, ts + 1), dtype=complex)
    for k in range(ts):
        # <m+1| q+ |m>
        qp[k + 1, k] = math.sqrt((ts / 2 - m[k]) * (ts / 2 + m[k] + 1))
    return qz, qp, qp.conj().T.copy()


# ---------------------------------------------------------------------------
# low-level tensor helpers


def _check_sites(sites: Sequence[int], N: int) -> tuple[int, ...]:
    out = tuple(int(x) for x in sites)
    if len(set(out)) != len(out):
        raise DomainError(f"repeated site in {sites}")
    for x in out:
        if not 0 <= x < N:
            raise DomainError(f"site {x} outside 0..{N - 1}")
    return out


def apply_site(op: np.ndarray, vec: np.ndarray, site: int, N: int, D: int) -> np.ndarray:
    """Apply a D x D operator to one site of a flat vector."""
    t = vec.reshape(D ** (N - 1 - site), D, D**site)
    return np.einsum("ab,xbz->xaz", op, t).reshape(-1)


def apply_local_op(op: np.ndarray, vec: np.ndarray, sites: Sequence[int], N: int,
                   D: int) -> np.ndarray:
    """Apply an operator on the ordered site list ``sites`` to a flat vector."""
    d = len(sites)
    if d == 0:
        return complex(np.asarray(op).reshape(-1)[0]) * vec
    if d == 1:
        return apply_site(op, vec, sites[0], N, D)
    opt = np.asarray(op).reshape((D,) * (2 * d))
    psi = vec.reshape((D,) * N)
    targets = [N - 1 - sites[d - 1 - u] for u in range(d)]
    res = np.tensordot(opt, psi, axes=(list(range(d, 2 * d)), targets))
    return np.moveaxis(res, list(range(d)), targets).reshape(-1)


def _site_matrix(vec: np.ndarray, keep: Sequence[int], N: int, D: int) -> np.ndarray:
    """Reshape a flat vector into (dim_keep, dim_rest) with ``keep`` as row digits."""
    d = len(keep)
    keep_axes = [N - 1 - keep[d - 1 - u] for u in range(d)]
    rest_axes = [a for a in range(N) if a not in keep_axes]
    t = vec.reshape((D,) * N).transpose(keep_axes + rest_axes)
    return t.reshape(D**d, -1)


def reduced_operator(vec_a: np.ndarray, vec_b: np.ndarray, keep: Sequence[int], N: int,
                     D: int) -> np.ndarray:
    """Tr over the complement of ``keep`` of |a><b|."""
    xa = _site_matrix(vec_a, keep, N, D)
    xb = xa if vec_b is vec_a else _site_matrix(vec_b, keep, N, D)
    return xa @ xb.conj().T


def embed_operator(op: np.ndarray, sites: Sequence[int], target: Sequence[int],
                   D: int) -> np.ndarray:
    """Express an operator on ``sites`` as an operator on the superset ``target``."""
    sites, target = tuple(sites), tuple(target)
    if not set(sites) <= set(target):
        raise DomainError("target must contain all operator sites")
    if sites == target:
        return np.asarray(op)
    others = tuple(x for x in target if x not in sites)
    full = np.kron(np.eye(D ** len(others)), op)
    order = sites + others  # first = fastest digit of ``full``
    n = len(order)
    t = full.reshape((D,) * (2 * n))
    old_axis = {site: n - 1 - i for i, site in enumerate(order)}
    perm = [old_axis[target[n - 1 - u]] for u in range(n)]
    t = t.transpose(perm + [n + p for p in perm])
    return t.reshape(D**n, D**n)


# ---------------------------------------------------------------------------
# states


@dataclass(frozen=True, eq=False)
class StateVector:
    register: QuditRegister
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        amp = np.array(self.amplitudes, dtype=complex, copy=True).reshape(-1)
        if amp.size != self.register.dim:
            raise DomainError(f"expected {self.register.dim} amplitudes, got {amp.size}")
        norm = np.linalg.norm(amp)
        if abs(norm - 1) > 1e-10:
            raise NumericalContractError(f"state norm {norm!r} is not 1")
        amp.setflags(write=False)
        object.__setattr__(self, "amplitudes", amp)

    @property
    def s(self) -> HalfInt:
        return self.register.s

    @property
    def N(self) -> int:
        return self.register.N

    @property
    def D(self) -> int:
        return self.register.local_dim

    def overlap(self, other: "StateVector") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def qz_moments(self) -> tuple[float, float]:
        """(<Q^z>, Var Q^z)."""
        p = np.abs(self.amplitudes) ** 2
        m = self.register.total_m()
        mean = float(p @ m)
        return mean, float(p @ (m - mean) ** 2)

    def density(self) -> "DensityMatrix":
        return DensityMatrix(self.s, tuple(range(self.N)),
                             np.outer(self.amplitudes, self.amplitudes.conj()))


def _from_array(register: QuditRegister, amp: np.ndarray) -> StateVector:
    return StateVector(register, amp / np.linalg.norm(amp))


def collective(register: QuditRegister, vec: np.ndarray, which: str) -> np.ndarray:
    """Q^z, Q^+ or Q^- applied to a flat vector."""
    if which == "z":
        return register.total_m() * vec
    qz, qp, qm = spin_matrices(register.s)
    op = qp if which == "+" else qm
    D, N = register.local_dim, register.N
    out = np.zeros_like(vec, dtype=complex)
    for site in range(N):
        out += apply_site(op, vec, site, N, D)
    return out


def eigen_residuals(psi: StateVector, J, M) -> tuple[float, float]:
    """(||Q^z psi - M psi||, ||Q^2 psi - J(J+1) psi||)."""
    J, M = float(HalfInt.of(J)), float(HalfInt.of(M))
    v = psi.amplitudes
    reg = psi.register
    qz_v = collective(reg, v, "z")
    casimir = collective(reg, collective(reg, v, "-"), "+") + collective(reg, qz_v - v, "z")
    return (float(np.linalg.norm(qz_v - M * v)),
            float(np.linalg.norm(casimir - J * (J + 1) * v)))


def lower_state(psi: StateVector, J, M, check: bool = True) -> StateVector:
    """Q^- psi / c^-_M for a |J, M> eigenstate ``psi``."""
    J, M = HalfInt.of(J), HalfInt.of(M)
    c = ladder_coeff(J, M, "minus")
    if c == 0.0:
        raise DomainError("cannot lower |J, -J>")
    if check:
        rz, rc = eigen_residuals(psi, J, M)
        if rz > EIGEN_TOL or rc > EIGEN_TOL:
            raise NumericalContractError(
                f"input is not a |J={J}, M={M}> eigenstate (residuals {rz:.2e}, {rc:.2e})")
    out = collective(psi.register, psi.amplitudes, "-") / c
    return _from_array(psi.register, out)


@lru_cache(maxsize=32)
def _dicke_cached(ts: int, N: int, tM: int) -> StateVector:
    reg = QuditRegister(HalfInt(ts), N)
    tJ = ts * N
    vec = np.zeros(reg.dim, dtype=complex)
    vec[-1] = 1.0  # every site at m = +s
    qm = spin_matrices(reg.s)[2]
    D = reg.local_dim
    for tcur in range(tJ, tM, -2):
        c = ladder_coeff(HalfInt(tJ), HalfInt(tcur), "minus")
        nxt = np.zeros_like(vec)
        for site in range(N):
            nxt += apply_site(qm, vec, site, N, D)
        vec = nxt / c
        vec /= np.linalg.norm(vec)
    psi = StateVector(reg, vec)
    rz, rc = eigen_residuals(psi, HalfInt(tJ), HalfInt(tM))
    if rz > 1e-10 or rc > EIGEN_TOL:
        raise NumericalContractError(f"Dicke construction drifted: residuals {rz:.2e}, {rc:.2e}")
    return psi


def dicke_state(s, N: int, M) -> StateVector:
    """The permutation-symmetric |J = sN, M> state, built by lowering from |s>^N."""
    reg = QuditRegister(s, N)
    tM = HalfInt.of(M).twice
    tJ = reg.s.twice * reg.N
    if abs(tM) > tJ:
        raise DomainError(f"|M| > sN = {HalfInt(tJ)}")
    if (tJ - tM) % 2:
        raise DomainError("sN - M must be an integer")
    return _dicke_cached(reg.s.twice, reg.N, tM)


def probe_state(s, N: int, M) -> StateVector:
    """(|J,M> + |J,-M>)/sqrt(2) with J = sN and M > 0."""
    M = HalfInt.of(M)
    if M.twice <= 0:
        raise DomainError("probe state needs M > 0")
    plus = dicke_state(s, N, M)
    minus = dicke_state(s, N, -M)
    return _from_array(plus.register, plus.amplitudes + minus.amplitudes)


def evolve_phase(psi: StateVector, theta: float) -> StateVector:
    """exp(-i theta Q^z) psi."""
    phase = np.exp(-1j * theta * psi.register.total_m())
    return StateVector(psi.register, phase * psi.amplitudes)


# ---------------------------------------------------------------------------
# scar states: spin-1/2 ladders inside the {|-s>, |s>} doublet


def scar_state(s, N: int, M: int, phases: Sequence[float]) -> StateVector:
    """Normalized (J^+)^M |-s...-s> with J^+ = sum_j exp(i phi_j) |s><-s|_j."""
    reg = QuditRegister(s, N)
    phases = np.asarray(phases, dtype=float)
    if phases.shape != (reg.N,):
        raise DomainError(f"need {reg.N} phases, got shape {phases.shape}")
    if isinstance(M, bool) or int(M) != M or not 0 <= M <= reg.N:
        raise DomainError(f"scar index M must be an integer in 0..{reg.N}")
    D = reg.local_dim
    vec = np.zeros(reg.dim, dtype=complex)
    vec[0] = 1.0
    for _ in range(int(M)):
        nxt = np.zeros_like(vec)
        for site in range(reg.N):
            flip = np.zeros((D, D), dtype=complex)
            flip[D - 1, 0] = np.exp(1j * phases[site])
            nxt += apply_site(flip, vec, site, reg.N, D)
        vec = nxt / np.linalg.norm(nxt)
    return StateVector(reg, vec)


def scar_jz(psi: StateVector) -> float:
    """<J^z> with J^z = (1/2) sum_j (|s><s| - |-s><-s|)_j."""
    D = psi.D
    local = np.zeros(D)
    local[0], local[-1] = -0.5, 0.5
    tot = np.zeros(1)
    for _ in range(psi.N):
        tot = (local[:, None] + tot[None, :]).ravel()
    return float(np.abs(psi.amplitudes) ** 2 @ tot)


def scar_dressing_unitary(s, phases: Sequence[float]) -> list[np.ndarray]:
    """Single-site unitaries w_j with |S_M> = (global phase) * (prod_j w_j) |D_M>.

    ``w_j = exp(i phi_j/2)|s><s| + exp(-i phi_j/2)|-s><-s| + (identity elsewhere)``,
    so the adjoint product maps a scar state onto the embedded Dicke state.
    """
    D = HalfInt.of(s).twice + 1
    out = []
    for phi in phases:
        w = np.eye(D, dtype=complex)
        w[-1, -1] = np.exp(0.5j * phi)
        w[0, 0] = np.exp(-0.5j * phi)
        out.append(w)
    return out


def apply_product(ops: Sequence[np.ndarray], psi: StateVector) -> StateVector:
    """(prod_j ops[j]) psi for single-site operators, one per site."""
    if len(ops) != psi.N:
        raise DomainError("need one operator per site")
    vec = psi.amplitudes
    for site, op in enumerate(ops):
        vec = apply_site(op, vec, site, psi.N, psi.D)
    return StateVector(psi.register, vec)


def embed_doublet(psi_half: StateVector, s) -> StateVector:
    """Map a spin-1/2 state into the {|-s>, |s>} doublet of spin-s sites."""
    if psi_half.s != HalfInt(1):
        raise DomainError("embed_doublet takes a spin-1/2 state")
    reg = QuditRegister(s, psi_half.N)
    D, N = reg.local_dim, reg.N
    idx = np.zeros(1, dtype=np.int64)
    # spin-1/2 digit b maps to local index b*(D-1), site 0 fastest
    for site in reversed(range(N)):
        idx = (idx[:, None] * D + np.array([0, D - 1])[None, :]).ravel()
    vec = np.zeros(reg.dim, dtype=complex)
    vec[idx] = psi_half.amplitudes
    return StateVector(reg, vec)


# ---------------------------------------------------------------------------
# density matrices


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Density matrix on the ordered ``sites`` of an N-qudit spin-s register."""

    s: HalfInt
    sites: tuple[int, ...]
    matrix: np.ndarray = field(repr=False)
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "s", HalfInt.of(self.s))
        object.__setattr__(self, "sites", tuple(int(x) for x in self.sites))
        mat = np.array(self.matrix, dtype=complex, copy=True)
        dim = (self.s.twice + 1) ** len(self.sites)
        if dim > MAX_DENSITY_DIM:
            raise DimensionGuardError(f"density matrix dim {dim} exceeds guard {MAX_DENSITY_DIM}")
        if mat.shape != (dim, dim):
            raise DomainError(f"matrix shape {mat.shape} does not match {dim}x{dim}")
        if self.validate:
            check_density(mat)
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    @property
    def D(self) -> int:
        return self.s.twice + 1

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def eigvalsh(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)


def check_density(mat: np.ndarray, herm_tol: float = 1e-12, trace_tol: float = 1e-12,
                  psd_tol: float = 1e-10) -> None:
    """Raise NumericalContractError unless ``mat`` is a valid density matrix."""
    if mat.size == 0:
        raise NumericalContractError("empty density matrix")
    if np.max(np.abs(mat - mat.conj().T)) > herm_tol:
        raise NumericalContractError("density matrix is not Hermitian")
    tr = np.trace(mat)
    if abs(tr - 1) > trace_tol:
        raise NumericalContractError(f"density matrix trace {tr!r} is not 1")
    shifted = 0.5 * (mat + mat.conj().T) + psd_tol * np.eye(mat.shape[0])
    try:
        np.linalg.cholesky(shifted)
    except np.linalg.LinAlgError as exc:
        raise NumericalContractError("density matrix has eigenvalue below -1e-10") from exc


def partial_trace(state, sites: Sequence[int]) -> DensityMatrix:
    """Trace out ``sites``; the result lives on the remaining sites in ascending order."""
    if isinstance(state, StateVector):
        N, D = state.N, state.D
        drop = set(_check_sites(sites, N))
        keep = [x for x in range(N) if x not in drop]
        if D ** len(keep) > MAX_DENSITY_DIM:
            raise DimensionGuardError(
                f"reduced state dim {D ** len(keep)} exceeds guard {MAX_DENSITY_DIM}")
        rho = reduced_operator(state.amplitudes, state.amplitudes, keep, N, D)
        return DensityMatrix(state.s, tuple(keep), rho)
    if isinstance(state, DensityMatrix):
        drop = set(int(x) for x in sites)
        if not drop <= set(state.sites):
            raise DomainError(f"sites {sorted(drop)} not all present in {state.sites}")
        n, D = len(state.sites), state.D
        t = state.matrix.reshape((D,) * (2 * n))
        labels = list(reversed(state.sites))  # axis a <-> site labels[a]
        for site in sorted(drop, key=labels.index, reverse=True):
            a = labels.index(site)
            t = np.trace(t, axis1=a, axis2=a + len(labels))
            labels.pop(a)
        keep = tuple(reversed(labels))
        dim = D ** len(keep)
        return DensityMatrix(state.s, keep, t.reshape(dim, dim))
    raise TypeError("partial_trace takes a StateVector or DensityMatrix")
